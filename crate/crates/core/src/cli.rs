//! The `ift` command line.
//!
//! Every subcommand reads JSON from `--in` and writes to `--out` (stdout when
//! omitted). Failures print a JSON error report on stderr and exit with a
//! code per error kind, see [`exit_code`].

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde_json::{json, Value};

use crate::bounds::scan::{scan_conjecture_b, Family, ScanConfig, ScanSummary};
use crate::bounds::{parity_counterexample, star_bound, theorem_c_constant};
use crate::covariance::{expected_abs_cond_cov, other_leaves};
use crate::distribution::{Caps, JointDistribution};
use crate::error::{Error, Result};
use crate::generate::trial_rng;
use crate::inference::{leaf_distribution, leaf_distribution_bruteforce, Sampler};
use crate::io::{
    dist_to_json, document_from_json, emit_records, emit_series, read_json, tree_from_json,
    tree_mode, tree_spec_from_json, tree_to_json, write_json, write_jsonl, write_series_csv,
    Document, Mode, Numeric, ReportFormat,
};
use crate::metrics::{avg_cov_cond_series, avg_covariance, avg_info_cond_series, MetricSeries};
use crate::scalar::{Exact, Scalar, DEFAULT_TOLERANCE};
use crate::transforms::{
    check_equivalence, normalize_internal_signs, split_edge, to_binary, to_simple_caterpillar,
    Rewrite, TransformTrace,
};
use crate::tree::{validate, InfoFlowTree, VertexId};

/// Exit status when a scan finds an enforced bound violated.
pub const EXIT_SCAN_VIOLATION: i32 = 7;

#[derive(Debug, Parser)]
#[command(name = "ift", version, about = "Exact inference on information flow trees")]
pub struct Cli {
    #[command(flatten)]
    pub global: GlobalOpts,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Clone, Args)]
pub struct GlobalOpts {
    /// Numeric mode; `auto` follows the input document.
    #[arg(long, global = true, value_enum, default_value_t = ModeArg::Auto)]
    pub mode: ModeArg,
    #[arg(long, global = true, default_value_t = 20)]
    pub max_leaves: usize,
    #[arg(long, global = true, default_value_t = 24)]
    pub max_vertices: usize,
    /// Absolute tolerance for float-mode comparisons.
    #[arg(long, global = true, default_value_t = DEFAULT_TOLERANCE)]
    pub tol: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum ModeArg {
    Auto,
    Rational,
    Float,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Self {
        match m {
            ModeArg::Auto => Mode::Auto,
            ModeArg::Rational => Mode::Rational,
            ModeArg::Float => Mode::Float,
        }
    }
}

#[derive(Debug, Clone, Subcommand)]
pub enum Command {
    /// Check a tree file and list every structural violation.
    Validate {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Draw seeded joint samples of all vertex and edge variables (JSONL).
    Sample {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 1)]
        count: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Leaf distribution of a tree.
    Dist {
        #[arg(long = "in")]
        input: PathBuf,
        /// Enumerate all vertex assignments instead of message passing.
        #[arg(long)]
        bruteforce: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Expected absolute conditional covariance of two vertices.
    CondCov {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        u: u32,
        #[arg(long)]
        v: u32,
        /// `all-other-leaves`, `none`, or a comma-separated leaf list.
        #[arg(long, default_value = "all-other-leaves")]
        condition_on: String,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Averaged covariance or information series of a tree or law.
    Metrics {
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long, value_enum)]
        metric: MetricArg,
        /// Inclusive range `a..b`; defaults to `0..n-2`.
        #[arg(long)]
        t_range: Option<String>,
        /// `.csv`, `.json` or `.jsonl`; CSV on stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Apply a leaf-law preserving rewrite or pipeline.
    Transform {
        #[arg(long, value_enum)]
        rule: RuleArg,
        #[arg(long = "in")]
        input: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        trace: Option<PathBuf>,
        #[arg(long)]
        vertex: Option<u32>,
        #[arg(long)]
        u: Option<u32>,
        #[arg(long)]
        v: Option<u32>,
        #[arg(long)]
        rho1: Option<String>,
        #[arg(long)]
        rho2: Option<String>,
        /// Comma-separated vertex ids.
        #[arg(long)]
        vertices: Option<String>,
        /// Path length for `split-vertex`.
        #[arg(long)]
        parts: Option<usize>,
        /// `neighbour:position` pairs for `split-vertex`, comma-separated.
        #[arg(long)]
        attach: Option<String>,
        /// Verify the output has the same leaf law as the input.
        #[arg(long)]
        check: bool,
    },
    /// Star bound `4 exp(-α/2)`, or the caterpillar constant.
    Bound {
        #[arg(long, required_unless_present = "constant", allow_negative_numbers = true)]
        alpha: Option<f64>,
        #[arg(long)]
        constant: bool,
    },
    /// Randomized scan of the caterpillar conjecture quantity (JSONL).
    Scan {
        #[arg(long)]
        family: Family,
        #[arg(long)]
        trials: usize,
        #[arg(long)]
        seed: u64,
        #[arg(long, default_value_t = 2)]
        min_size: usize,
        #[arg(long)]
        max_size: usize,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write the summary JSON here (it always goes to stdout).
        #[arg(long)]
        summary: Option<PathBuf>,
    },
    /// Parity law on `T + 2` variables conditioned on product `+1`.
    Counterexample {
        #[arg(long = "big-t")]
        big_t: usize,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MetricArg {
    Avgcov,
    Avgcovcond,
    Avginfocond,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum RuleArg {
    NegateInternalVertex,
    NormalizeSigns,
    MergeDegree2,
    SplitEdge,
    ContractUnitSubgraph,
    SplitVertex,
    PruneHiddenPendant,
    Binary,
    SimpleCaterpillar,
}

/// Parsed invocation with checked global options.
#[derive(Debug, Clone)]
pub struct RunConfig {
    pub command: Command,
    pub mode: Mode,
    pub caps: Caps,
    pub tol: f64,
}

impl RunConfig {
    pub fn from_cli(cli: Cli) -> Result<Self> {
        let g = cli.global;
        if g.max_leaves == 0 || g.max_vertices == 0 {
            return Err(Error::InvalidArgument("caps must be positive".into()));
        }
        if g.tol.is_nan() || g.tol <= 0.0 {
            return Err(Error::InvalidArgument(format!("tolerance must be > 0, got {}", g.tol)));
        }
        Ok(RunConfig {
            command: cli.command,
            mode: g.mode.into(),
            caps: Caps {
                max_leaves: g.max_leaves,
                max_vertices: g.max_vertices,
            },
            tol: g.tol,
        })
    }
}

/// Process exit status for an error kind.
pub fn exit_code(err: &Error) -> i32 {
    match err.kind() {
        "io" => 3,
        "format" => 4,
        "cap" => 5,
        "invalid-tree" => 6,
        "zero-probability" => 9,
        _ => 8,
    }
}

pub fn error_report(err: &Error) -> Value {
    let mut report = json!({
        "error": err.kind(),
        "message": err.to_string(),
        "exit_code": exit_code(err),
    });
    if let Error::InvalidTree(v) = err {
        report["violations"] = json!(v);
    }
    report
}

/// Parses `args` (program name first), runs, and returns the exit status.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return e.exit_code();
        }
    };
    if let Ok(n) = std::env::var("IFT_THREADS") {
        match n.parse::<usize>() {
            Ok(n) if n > 0 => {
                // fails only if a pool already exists, which is harmless
                let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
            }
            _ => {
                let err = Error::InvalidArgument(format!("IFT_THREADS must be a positive integer, got `{n}`"));
                return report_failure(&err);
            }
        }
    }
    match RunConfig::from_cli(cli).and_then(|c| run(&c)) {
        Ok(code) => code,
        Err(e) => report_failure(&e),
    }
}

fn report_failure(err: &Error) -> i32 {
    eprintln!("{}", error_report(err));
    exit_code(err)
}

macro_rules! dispatch {
    ($any:expr, |$x:ident| $body:expr) => {
        match $any {
            Numeric::Rational($x) => $body,
            Numeric::Float($x) => $body,
        }
    };
}

/// Runs one command; `Ok` carries the exit status (nonzero only for scan
/// violations and invalid trees under `validate`).
pub fn run(config: &RunConfig) -> Result<i32> {
    let caps = &config.caps;
    match &config.command {
        Command::Validate { input, out } => validate_cmd(config, input, out.as_deref()),
        Command::Sample {
            input,
            seed,
            count,
            out,
        } => {
            let tree = tree_from_json(&read_json(input)?, config.mode)?;
            let sampler = dispatch!(&tree, |t| Sampler::new(t))?;
            let mut rng = trial_rng(*seed, 0);
            let rows: Vec<Value> = (0..*count)
                .map(|i| {
                    let s = sampler.draw(&mut rng);
                    json!({"seed": seed, "index": i, "vertices": s.vertices, "edges": s.edges})
                })
                .collect();
            match out {
                Some(p) => write_jsonl(std::fs::File::create(p)?, &rows)?,
                None => write_jsonl(std::io::stdout().lock(), &rows)?,
            }
            Ok(0)
        }
        Command::Dist {
            input,
            bruteforce,
            out,
        } => {
            let tree = tree_from_json(&read_json(input)?, config.mode)?;
            let doc = dispatch!(&tree, |t| {
                let d = if *bruteforce {
                    leaf_distribution_bruteforce(t, caps)?
                } else {
                    leaf_distribution(t, caps)?
                };
                dist_to_json(&d)
            });
            emit_json(out.as_deref(), &doc)?;
            Ok(0)
        }
        Command::CondCov {
            input,
            u,
            v,
            condition_on,
            report,
        } => {
            let tree = tree_from_json(&read_json(input)?, config.mode)?;
            let (u, v) = (VertexId(*u), VertexId(*v));
            let doc = dispatch!(&tree, |t| {
                let given = conditioning_set(t, u, v, condition_on)?;
                expected_abs_cond_cov(t, u, v, &given, caps)?.to_json()
            });
            emit_json(report.as_deref(), &doc)?;
            Ok(0)
        }
        Command::Metrics {
            input,
            metric,
            t_range,
            out,
        } => {
            let dist = match document_from_json(&read_json(input)?, config.mode)? {
                Document::Dist(d) => d,
                Document::Tree(t) => match t {
                    Numeric::Rational(t) => Numeric::Rational(leaf_distribution(&t, caps)?),
                    Numeric::Float(t) => Numeric::Float(leaf_distribution(&t, caps)?),
                },
            };
            dispatch!(&dist, |d| metrics_cmd(d, *metric, t_range.as_deref(), out.as_deref()))?;
            Ok(0)
        }
        Command::Transform { input, .. } => {
            let tree = tree_from_json(&read_json(input)?, config.mode)?;
            dispatch!(&tree, |t| transform_cmd(config, t))?;
            Ok(0)
        }
        Command::Bound { alpha, constant } => {
            let value = match alpha {
                Some(a) if !*constant => star_bound(*a)?,
                _ => theorem_c_constant(),
            };
            println!("{}", json!(value));
            Ok(0)
        }
        Command::Scan {
            family,
            trials,
            seed,
            min_size,
            max_size,
            out,
            summary,
        } => {
            let scan = ScanConfig {
                family: *family,
                trials: *trials,
                min_size: *min_size,
                max_size: *max_size,
                seed: *seed,
                caps: *caps,
            };
            let records = scan_conjecture_b(&scan)?;
            match out {
                Some(p) => emit_records(p, &records, ReportFormat::from_path(p))?,
                None => write_jsonl(std::io::stdout().lock(), &records)?,
            }
            let s = ScanSummary::from_records(&scan, &records);
            let s_json = serde_json::to_value(&s)?;
            if let Some(p) = summary {
                write_json(p, &s_json)?;
            }
            if out.is_some() {
                println!("{s_json}");
            }
            Ok(if s.violations > 0 { EXIT_SCAN_VIOLATION } else { 0 })
        }
        Command::Counterexample { big_t, out } => {
            let doc = if config.mode == Mode::Float {
                dist_to_json(&parity_counterexample::<f64>(*big_t, caps)?)
            } else {
                dist_to_json(&parity_counterexample::<Exact>(*big_t, caps)?)
            };
            emit_json(out.as_deref(), &doc)?;
            Ok(0)
        }
    }
}

fn emit_json(out: Option<&Path>, value: &Value) -> Result<()> {
    match out {
        Some(p) => write_json(p, value),
        None => {
            let mut stdout = std::io::stdout().lock();
            serde_json::to_writer_pretty(&mut stdout, value)?;
            writeln!(stdout)?;
            Ok(())
        }
    }
}

fn validate_cmd(config: &RunConfig, input: &Path, out: Option<&Path>) -> Result<i32> {
    let doc = read_json(input)?;
    let mode = tree_mode(&doc, config.mode)?;
    let violations = if mode == Mode::Float {
        validate(&tree_spec_from_json::<f64>(&doc)?)
    } else {
        validate(&tree_spec_from_json::<Exact>(&doc)?)
    };
    let mut report = json!({
        "valid": violations.is_empty(),
        "mode": if mode == Mode::Float { f64::MODE } else { Exact::MODE },
        "violations": violations,
    });
    if violations.is_empty() {
        let tree = tree_from_json(&doc, mode)?;
        let (n, leaves) = dispatch!(&tree, |t| (t.num_vertices(), t.leaves().to_vec()));
        report["vertices"] = json!(n);
        report["leaves"] = json!(leaves);
    }
    emit_json(out, &report)?;
    Ok(if violations.is_empty() {
        0
    } else {
        exit_code(&Error::InvalidTree(violations))
    })
}

fn conditioning_set<S: Scalar>(
    tree: &InfoFlowTree<S>,
    u: VertexId,
    v: VertexId,
    spec: &str,
) -> Result<Vec<VertexId>> {
    match spec.trim() {
        "all-other-leaves" => Ok(other_leaves(tree, &[u, v])),
        "none" | "" => Ok(Vec::new()),
        list => parse_ids(list),
    }
}

fn parse_ids(list: &str) -> Result<Vec<VertexId>> {
    list.split(',')
        .map(|s| {
            s.trim()
                .parse::<u32>()
                .map(VertexId)
                .map_err(|_| Error::InvalidArgument(format!("bad vertex id `{s}`")))
        })
        .collect()
}

/// Inclusive `a..b` or `a..=b`.
pub fn parse_t_range(s: &str) -> Result<std::ops::RangeInclusive<usize>> {
    let bad = || Error::InvalidArgument(format!("bad range `{s}`, expected a..b"));
    let (a, b) = s.split_once("..").ok_or_else(bad)?;
    let b = b.strip_prefix('=').unwrap_or(b);
    let a = a.trim().parse().map_err(|_| bad())?;
    let b = b.trim().parse().map_err(|_| bad())?;
    Ok(a..=b)
}

fn metrics_cmd<S: Scalar>(
    dist: &JointDistribution<S>,
    metric: MetricArg,
    t_range: Option<&str>,
    out: Option<&Path>,
) -> Result<()> {
    let n = dist.num_vars();
    let range = match t_range {
        Some(s) => parse_t_range(s)?,
        None => 0..=n.saturating_sub(2),
    };
    match metric {
        MetricArg::Avgcov => write_series(
            &MetricSeries {
                metric: "avgcov".into(),
                n,
                values: vec![(0, avg_covariance(dist)?)],
            },
            out,
        ),
        MetricArg::Avgcovcond => write_series(&avg_cov_cond_series(dist, range)?, out),
        MetricArg::Avginfocond => write_series(&avg_info_cond_series(dist, range)?, out),
    }
}

fn write_series<S: Scalar>(series: &MetricSeries<S>, out: Option<&Path>) -> Result<()> {
    let series = std::slice::from_ref(series);
    match out {
        Some(p) => emit_series(p, series, ReportFormat::from_path(p)),
        None => write_series_csv(std::io::stdout().lock(), series),
    }
}

fn transform_cmd<S: Scalar>(config: &RunConfig, tree: &InfoFlowTree<S>) -> Result<()> {
    let Command::Transform {
        rule,
        out,
        trace: trace_path,
        vertex,
        u,
        v,
        rho1,
        rho2,
        vertices,
        parts,
        attach,
        check,
        ..
    } = &config.command
    else {
        unreachable!("transform_cmd called for another command");
    };
    let need = |x: &Option<u32>, name: &str| {
        x.map(VertexId)
            .ok_or_else(|| Error::InvalidArgument(format!("rule needs --{name}")))
    };
    let scalar = |x: &Option<String>, name: &str| -> Result<S> {
        let text = x
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument(format!("rule needs --{name}")))?;
        let value = if text.contains('/') {
            Value::String(text.to_string())
        } else {
            json!(text
                .parse::<f64>()
                .map_err(|_| Error::InvalidArgument(format!("bad correlation `{text}`")))?)
        };
        crate::io::scalar_from_json(&value)
    };
    let single = |rewrite: Rewrite<S>| -> Result<(InfoFlowTree<S>, TransformTrace<S>)> {
        let mut trace = TransformTrace::new();
        let t = trace.apply(tree, rewrite)?;
        Ok((t, trace))
    };
    let (result, trace) = match rule {
        RuleArg::NegateInternalVertex => {
            let vertex = need(vertex, "vertex")?;
            single(Rewrite::NegateInternalVertex { vertex })?
        }
        RuleArg::NormalizeSigns => normalize_internal_signs(tree)?,
        RuleArg::MergeDegree2 => {
            let vertex = need(vertex, "vertex")?;
            single(Rewrite::MergeDegree2 { vertex })?
        }
        RuleArg::SplitEdge => {
            let (u, v) = (need(u, "u")?, need(v, "v")?);
            let (rho1, rho2) = (scalar(rho1, "rho1")?, scalar(rho2, "rho2")?);
            // applied with the configured tolerance, then recorded
            let (t, _) = split_edge(tree, u, v, rho1.clone(), rho2.clone(), config.tol)?;
            let mut trace = TransformTrace::new();
            trace.record(tree, Rewrite::SplitEdge { u, v, rho1, rho2 }, &t);
            (t, trace)
        }
        RuleArg::ContractUnitSubgraph => {
            let set = parse_ids(
                vertices
                    .as_deref()
                    .ok_or_else(|| Error::InvalidArgument("rule needs --vertices".into()))?,
            )?;
            single(Rewrite::ContractUnitSubgraph { vertices: set })?
        }
        RuleArg::SplitVertex => {
            let vertex = need(vertex, "vertex")?;
            let m = parts.ok_or_else(|| Error::InvalidArgument("rule needs --parts".into()))?;
            let attachment = parse_attachment(attach.as_deref().unwrap_or(""))?;
            single(Rewrite::SplitVertex {
                vertex,
                m,
                attachment,
            })?
        }
        RuleArg::PruneHiddenPendant => {
            let vertex = need(vertex, "vertex")?;
            single(Rewrite::PruneHiddenPendant { vertex })?
        }
        RuleArg::Binary => {
            let (t, _, trace) = to_binary(tree)?;
            (t, trace)
        }
        RuleArg::SimpleCaterpillar => to_simple_caterpillar(tree)?,
    };
    if *check && !check_equivalence(tree, &result, &config.caps, config.tol)? {
        return Err(Error::InvalidArgument(
            "rewritten tree does not reproduce the input leaf law".into(),
        ));
    }
    emit_json(out.as_deref(), &tree_to_json(&result))?;
    if let Some(p) = trace_path {
        write_json(p, &trace.to_json())?;
    }
    Ok(())
}

/// `"u:i,u:i"` into a neighbour to 1-based position map.
fn parse_attachment(s: &str) -> Result<BTreeMap<VertexId, usize>> {
    s.split(',')
        .filter(|p| !p.trim().is_empty())
        .map(|pair| {
            let bad = || Error::InvalidArgument(format!("bad attachment `{pair}`, expected u:i"));
            let (u, i) = pair.split_once(':').ok_or_else(bad)?;
            Ok((
                VertexId(u.trim().parse().map_err(|_| bad())?),
                i.trim().parse().map_err(|_| bad())?,
            ))
        })
        .collect()
}
