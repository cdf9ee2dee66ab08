//! Seeded randomized scan of the caterpillar conjecture quantity.
//!
//! Trial `i` draws its tree from `trial_rng(seed, i)`, so records do not
//! depend on thread scheduling. Only simple caterpillars carry a proved
//! bound; the other families are measured, never asserted.

use std::fmt;
use std::str::FromStr;

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::theorem_c_constant;
use crate::distribution::Caps;
use crate::error::{Error, Result};
use crate::generate::{
    complete_binary, random_depth2_caterpillar, random_simple_caterpillar, random_tree,
    trial_rng, uniform_signed, uniform_unit,
};
use crate::metrics::conjecture_b_lhs;
use crate::transforms::normalize_internal_signs;
use crate::tree::InfoFlowTree;

/// Name of the scanned quantity in every record.
pub const QUANTITY: &str = "conjecture-b-lhs";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Family {
    SimpleCaterpillar,
    Depth2Caterpillar,
    CompleteBinary,
    RandomTree,
}

impl Family {
    pub const ALL: [Family; 4] = [
        Family::SimpleCaterpillar,
        Family::Depth2Caterpillar,
        Family::CompleteBinary,
        Family::RandomTree,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Family::SimpleCaterpillar => "simple-caterpillar",
            Family::Depth2Caterpillar => "depth2-caterpillar",
            Family::CompleteBinary => "complete-binary",
            Family::RandomTree => "random-tree",
        }
    }

    /// Whether `C / t` is a theorem for this family.
    pub fn bound_enforced(self) -> bool {
        self == Family::SimpleCaterpillar
    }
}

impl fmt::Display for Family {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Family {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Family::ALL
            .into_iter()
            .find(|f| f.name() == s)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown family `{s}`")))
    }
}

/// Sizes are leaf counts, except for `random-tree` where they count
/// vertices. Complete binary trees use every depth whose leaf count
/// `2^d` lies in the range.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanConfig {
    pub family: Family,
    pub trials: usize,
    pub min_size: usize,
    pub max_size: usize,
    pub seed: u64,
    pub caps: Caps,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanRecord {
    pub family: Family,
    pub seed: u64,
    pub trial: u64,
    /// FNV-1a of the sorted edge list and leaf list.
    pub topology_hash: String,
    pub t: usize,
    pub edges: Vec<(u32, u32)>,
    pub rhos: Vec<f64>,
    pub quantity: String,
    pub lhs: f64,
    /// `C / t`.
    pub bound: f64,
    pub margin: f64,
    /// `lhs · t`, the slack measure against `C`.
    pub scaled_lhs: f64,
    pub enforced: bool,
}

impl ScanRecord {
    pub fn is_violation(&self) -> bool {
        self.enforced && self.margin < 0.0
    }

    /// The scanned tree, rebuilt from the record.
    pub fn tree(&self) -> Result<InfoFlowTree<f64>> {
        InfoFlowTree::from_edges(
            self.edges
                .iter()
                .zip(&self.rhos)
                .map(|(&(u, v), &r)| (u, v, r))
                .collect(),
        )
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScanSummary {
    pub family: Family,
    pub seed: u64,
    pub trials: usize,
    pub violations: usize,
    pub max_lhs: f64,
    pub max_scaled_lhs: f64,
    /// Trial attaining `max_scaled_lhs`.
    pub argmax_trial: Option<u64>,
}

impl ScanSummary {
    pub fn from_records(config: &ScanConfig, records: &[ScanRecord]) -> Self {
        let argmax = records
            .iter()
            .max_by(|a, b| a.scaled_lhs.total_cmp(&b.scaled_lhs));
        ScanSummary {
            family: config.family,
            seed: config.seed,
            trials: records.len(),
            violations: records.iter().filter(|r| r.is_violation()).count(),
            max_lhs: records.iter().map(|r| r.lhs).fold(0.0, f64::max),
            max_scaled_lhs: argmax.map_or(0.0, |r| r.scaled_lhs),
            argmax_trial: argmax.map(|r| r.trial),
        }
    }
}

pub fn topology_hash(tree: &InfoFlowTree<f64>) -> String {
    const OFFSET: u64 = 0xcbf2_9ce4_8422_2325;
    const PRIME: u64 = 0x0000_0100_0000_01b3;
    let mut keys: Vec<(u32, u32)> = tree.edges().iter().map(|e| (e.key().0 .0, e.key().1 .0)).collect();
    keys.sort_unstable();
    let words = keys
        .iter()
        .flat_map(|&(u, v)| [u, v])
        .chain([u32::MAX])
        .chain(tree.leaves().iter().map(|l| l.0));
    let mut hash = OFFSET;
    for byte in words.flat_map(u32::to_le_bytes) {
        hash ^= u64::from(byte);
        hash = hash.wrapping_mul(PRIME);
    }
    format!("{hash:016x}")
}

fn check_config(config: &ScanConfig) -> Result<Vec<usize>> {
    let ScanConfig {
        family,
        min_size,
        max_size,
        caps,
        ..
    } = *config;
    if min_size > max_size {
        return Err(Error::InvalidArgument(format!(
            "empty size range {min_size}..={max_size}"
        )));
    }
    let sizes: Vec<usize> = match family {
        Family::CompleteBinary => (1..=20u32)
            .map(|d| 1usize << d)
            .filter(|n| (min_size..=max_size).contains(n))
            .collect(),
        _ => (min_size.max(2)..=max_size).collect(),
    };
    let Some(&largest) = sizes.last() else {
        return Err(Error::InvalidArgument(format!(
            "no {family} size in {min_size}..={max_size}"
        )));
    };
    match family {
        Family::RandomTree => caps.check_vertices(largest)?,
        _ => caps.check_leaves(largest)?,
    }
    Ok(sizes)
}

fn draw_tree<R: Rng>(rng: &mut R, family: Family, size: usize) -> Result<InfoFlowTree<f64>> {
    let tree = match family {
        Family::SimpleCaterpillar => return random_simple_caterpillar(rng, size),
        Family::Depth2Caterpillar => random_depth2_caterpillar(rng, size)?,
        Family::CompleteBinary => {
            let rho = uniform_unit(rng);
            complete_binary(size.trailing_zeros(), rho)?
        }
        Family::RandomTree => random_tree(rng, size, |r| uniform_signed(r))?,
    };
    Ok(normalize_internal_signs(&tree)?.0)
}

/// One record per trial, in trial order.
pub fn scan_conjecture_b(config: &ScanConfig) -> Result<Vec<ScanRecord>> {
    let sizes = check_config(config)?;
    let c = theorem_c_constant();
    (0..config.trials as u64)
        .into_par_iter()
        .map(|trial| {
            let mut rng = trial_rng(config.seed, trial);
            let size = sizes[rng.random_range(0..sizes.len())];
            let tree = draw_tree(&mut rng, config.family, size)?;
            config.caps.check_vertices(tree.num_vertices())?;
            let lhs = conjecture_b_lhs(&tree, &config.caps)?;
            let t = tree.leaves().len();
            let bound = c / t as f64;
            Ok(ScanRecord {
                family: config.family,
                seed: config.seed,
                trial,
                topology_hash: topology_hash(&tree),
                t,
                edges: tree.edges().iter().map(|e| (e.u.0, e.v.0)).collect(),
                rhos: tree.edges().iter().map(|e| *e.rho.value()).collect(),
                quantity: QUANTITY.to_string(),
                lhs,
                bound,
                margin: bound - lhs,
                scaled_lhs: lhs * t as f64,
                enforced: config.family.bound_enforced(),
            })
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(family: Family, trials: usize, max_size: usize) -> ScanConfig {
        ScanConfig {
            family,
            trials,
            min_size: 2,
            max_size,
            seed: 11,
            caps: Caps::default(),
        }
    }

    #[test]
    fn family_names_round_trip() {
        for f in Family::ALL {
            assert_eq!(f.to_string().parse::<Family>().unwrap(), f);
        }
        assert!("tripod".parse::<Family>().is_err());
    }

    #[test]
    fn simple_caterpillar_scan_holds() {
        let cfg = config(Family::SimpleCaterpillar, 40, 6);
        let records = scan_conjecture_b(&cfg).unwrap();
        assert_eq!(records.len(), 40);
        assert!(records.iter().all(|r| !r.is_violation() && r.enforced));
        assert_eq!(records, scan_conjecture_b(&cfg).unwrap());
        let summary = ScanSummary::from_records(&cfg, &records);
        assert_eq!(summary.violations, 0);
        assert!(summary.max_scaled_lhs < theorem_c_constant());
    }

    #[test]
    fn other_families_are_observational() {
        for family in [Family::Depth2Caterpillar, Family::CompleteBinary, Family::RandomTree] {
            let records = scan_conjecture_b(&config(family, 6, 8)).unwrap();
            assert!(records.iter().all(|r| !r.enforced && r.t >= 2));
            for r in &records {
                let tree = r.tree().unwrap();
                assert_eq!(topology_hash(&tree), r.topology_hash);
                assert!(tree
                    .edges()
                    .iter()
                    .filter(|e| !tree.is_leaf(e.u) && !tree.is_leaf(e.v))
                    .all(|e| *e.rho.value() >= 0.0));
            }
        }
    }

    #[test]
    fn zero_correlations_give_zero_lhs() {
        let tree = complete_binary(2, 0.0).unwrap();
        assert_eq!(conjecture_b_lhs(&tree, &Caps::default()).unwrap(), 0.0);
    }

    #[test]
    fn bad_ranges() {
        let mut cfg = config(Family::CompleteBinary, 1, 3);
        cfg.min_size = 3;
        assert!(scan_conjecture_b(&cfg).is_err());
        let cfg = config(Family::SimpleCaterpillar, 1, 40);
        assert!(matches!(scan_conjecture_b(&cfg), Err(Error::CapExceeded { .. })));
    }
}
