//! ±1 outcomes and partial assignments of them to labeled variables.

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::scalar::Scalar;
use crate::tree::VertexId;

/// A value in {+1, -1}. Serialized as the integer `1` or `-1`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Spin {
    Plus,
    Minus,
}

impl Spin {
    pub const BOTH: [Spin; 2] = [Spin::Plus, Spin::Minus];

    pub fn sign(self) -> i64 {
        match self {
            Spin::Plus => 1,
            Spin::Minus => -1,
        }
    }

    /// Bit used in dense tables: `+1 -> 0`, `-1 -> 1`.
    pub fn bit(self) -> usize {
        match self {
            Spin::Plus => 0,
            Spin::Minus => 1,
        }
    }

    pub fn from_bit(bit: usize) -> Spin {
        if bit & 1 == 0 {
            Spin::Plus
        } else {
            Spin::Minus
        }
    }

    pub fn from_sign(sign: i64) -> Option<Spin> {
        match sign {
            1 => Some(Spin::Plus),
            -1 => Some(Spin::Minus),
            _ => None,
        }
    }

    pub fn to_scalar<S: Scalar>(self) -> S {
        S::from_ratio(self.sign(), 1)
    }
}

impl std::ops::Neg for Spin {
    type Output = Spin;

    fn neg(self) -> Spin {
        match self {
            Spin::Plus => Spin::Minus,
            Spin::Minus => Spin::Plus,
        }
    }
}

impl std::ops::Mul for Spin {
    type Output = Spin;

    fn mul(self, rhs: Spin) -> Spin {
        if self == rhs {
            Spin::Plus
        } else {
            Spin::Minus
        }
    }
}

impl fmt::Display for Spin {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Spin::Plus => "+1",
            Spin::Minus => "-1",
        })
    }
}

impl Serialize for Spin {
    fn serialize<Ser: serde::Serializer>(&self, s: Ser) -> Result<Ser::Ok, Ser::Error> {
        s.serialize_i64(self.sign())
    }
}

impl<'de> Deserialize<'de> for Spin {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> Result<Self, D::Error> {
        let v = i64::deserialize(d)?;
        Spin::from_sign(v).ok_or_else(|| serde::de::Error::custom(format!("{v} is not ±1")))
    }
}

/// Values for a set of labels, each label appearing once.
#[derive(Debug, Clone, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Assignment(BTreeMap<VertexId, Spin>);

impl Assignment {
    pub fn new() -> Self {
        Self::default()
    }

    /// Decodes `index` over `labels` using the table convention: bit `i` of
    /// `index` is the value of `labels[i]`.
    pub fn from_index(labels: &[VertexId], index: usize) -> Self {
        labels
            .iter()
            .enumerate()
            .map(|(i, &l)| (l, Spin::from_bit(index >> i)))
            .collect()
    }

    /// Inverse of [`Assignment::from_index`]; `None` if a label is missing.
    pub fn index_over(&self, labels: &[VertexId]) -> Option<usize> {
        labels.iter().enumerate().try_fold(0usize, |acc, (i, l)| {
            self.0.get(l).map(|s| acc | (s.bit() << i))
        })
    }

    pub fn insert(&mut self, label: VertexId, value: Spin) -> Option<Spin> {
        self.0.insert(label, value)
    }

    pub fn get(&self, label: VertexId) -> Option<Spin> {
        self.0.get(&label).copied()
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn labels(&self) -> impl Iterator<Item = VertexId> + '_ {
        self.0.keys().copied()
    }

    pub fn iter(&self) -> impl Iterator<Item = (VertexId, Spin)> + '_ {
        self.0.iter().map(|(&k, &v)| (k, v))
    }

    /// The part of the assignment whose labels satisfy `keep`.
    pub fn restrict(&self, mut keep: impl FnMut(VertexId) -> bool) -> Self {
        self.iter().filter(|&(l, _)| keep(l)).collect()
    }

    pub fn negated(&self) -> Self {
        self.iter().map(|(l, s)| (l, -s)).collect()
    }
}

impl FromIterator<(VertexId, Spin)> for Assignment {
    fn from_iter<I: IntoIterator<Item = (VertexId, Spin)>>(iter: I) -> Self {
        Assignment(iter.into_iter().collect())
    }
}

impl fmt::Display for Assignment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("{")?;
        for (i, (l, s)) in self.iter().enumerate() {
            if i > 0 {
                f.write_str(", ")?;
            }
            write!(f, "{l}: {s}")?;
        }
        f.write_str("}")
    }
}
