//! Splits of the band-limited subspace into disjoint blocks of harmonics.
//!
//! Every block is a list of flat coefficient indices. The four named choices
//! group harmonics by degree or by order; any other grouping can be supplied
//! as a custom partition and is checked by [`validate_partition`].
//!
//! Block order is fixed: degree choices ascend in degree, the order choice
//! runs `m = 0, +1, -1, +2, -2, ...`, and the paired-order choice ascends in
//! the positive member's order.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::harmonics::flat_index;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum PartitionError {
    #[error("index {0} appears in more than one block")]
    DuplicateIndex(usize),
    #[error("indices not covered by any block: {0:?}")]
    MissingIndex(Vec<usize>),
    #[error("block {0} is empty")]
    EmptyBlock(usize),
    #[error("index {index} is outside band limit {band_limit}")]
    IndexOutOfRange { index: usize, band_limit: usize },
    #[error("partition has no blocks")]
    NoBlocks,
    #[error("band limit must be positive")]
    ZeroBandLimit,
    #[error("unknown partition choice {0:?}")]
    UnknownChoice(String),
    #[error("partition file: {0}")]
    Json(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartitionChoice {
    /// One block per degree.
    Degree,
    /// Degree `k` paired with degree `L - 1 - k`.
    DegreePaired,
    /// One block per order.
    Order,
    /// Order `m` paired with order `-(L - m)`.
    OrderPaired,
    Custom,
}

impl PartitionChoice {
    pub fn build(self, band_limit: usize) -> Result<Partition, PartitionError> {
        if band_limit == 0 {
            return Err(PartitionError::ZeroBandLimit);
        }
        Ok(match self {
            Self::Degree => partition_choice_1(band_limit),
            Self::DegreePaired => partition_choice_2(band_limit),
            Self::Order => partition_choice_3(band_limit),
            Self::OrderPaired => partition_choice_4(band_limit),
            Self::Custom => Partition::single_block(band_limit),
        })
    }

    pub fn name(self) -> &'static str {
        match self {
            Self::Degree => "degree",
            Self::DegreePaired => "degree-paired",
            Self::Order => "order",
            Self::OrderPaired => "order-paired",
            Self::Custom => "custom",
        }
    }
}

impl fmt::Display for PartitionChoice {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Accepts the choice numbers `1`–`4` as well as the names.
impl FromStr for PartitionChoice {
    type Err = PartitionError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "1" | "degree" => Ok(Self::Degree),
            "2" | "degree-paired" => Ok(Self::DegreePaired),
            "3" | "order" => Ok(Self::Order),
            "4" | "order-paired" => Ok(Self::OrderPaired),
            "custom" => Ok(Self::Custom),
            other => Err(PartitionError::UnknownChoice(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Partition {
    band_limit: usize,
    choice: PartitionChoice,
    blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// A caller-supplied partition, validated before it is returned.
    pub fn custom(band_limit: usize, blocks: Vec<Vec<usize>>) -> Result<Self, PartitionError> {
        let p = Self {
            band_limit,
            choice: PartitionChoice::Custom,
            blocks,
        };
        validate_partition(&p)?;
        Ok(p)
    }

    /// All `L²` harmonics in one block, i.e. plain least squares.
    pub fn single_block(band_limit: usize) -> Self {
        Self {
            band_limit,
            choice: PartitionChoice::Custom,
            blocks: vec![(0..band_limit * band_limit).collect()],
        }
    }

    pub fn band_limit(&self) -> usize {
        self.band_limit
    }

    pub fn choice(&self) -> PartitionChoice {
        self.choice
    }

    pub fn blocks(&self) -> &[Vec<usize>] {
        &self.blocks
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    /// Block sizes `N_k`.
    pub fn sizes(&self) -> Vec<usize> {
        self.blocks.iter().map(Vec::len).collect()
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("partition serializes")
    }

    /// Parses and validates a partition written by [`Partition::to_json`].
    pub fn from_json(text: &str) -> Result<Self, PartitionError> {
        let p: Self =
            serde_json::from_str(text).map_err(|e| PartitionError::Json(e.to_string()))?;
        validate_partition(&p)?;
        Ok(p)
    }
}

fn degree_block(degree: usize) -> Vec<usize> {
    (degree * degree..(degree + 1) * (degree + 1)).collect()
}

fn order_block(band_limit: usize, order: i64) -> Vec<usize> {
    (order.unsigned_abs() as usize..band_limit)
        .map(|l| flat_index(l, order).expect("|m| <= l by construction"))
        .collect()
}

/// One block per degree `l = 0, ..., L-1`; block `k` has `2k - 1` members.
pub fn partition_choice_1(band_limit: usize) -> Partition {
    Partition {
        band_limit,
        choice: PartitionChoice::Degree,
        blocks: (0..band_limit).map(degree_block).collect(),
    }
}

/// Degree `k` joined with degree `L - 1 - k`: `⌈L/2⌉` blocks of size `2L`,
/// except a lone middle degree of size `L` when `L` is odd.
pub fn partition_choice_2(band_limit: usize) -> Partition {
    let blocks = (0..band_limit.div_ceil(2))
        .map(|k| {
            let mut block = degree_block(k);
            let partner = band_limit - 1 - k;
            if partner != k {
                block.extend(degree_block(partner));
            }
            block
        })
        .collect();
    Partition {
        band_limit,
        choice: PartitionChoice::DegreePaired,
        blocks,
    }
}

/// One block per order, `2L - 1` blocks; order `m` holds `L - |m|` members.
pub fn partition_choice_3(band_limit: usize) -> Partition {
    let l = band_limit as i64;
    let blocks = std::iter::once(0)
        .chain((1..l).flat_map(|m| [m, -m]))
        .map(|m| order_block(band_limit, m))
        .collect();
    Partition {
        band_limit,
        choice: PartitionChoice::Order,
        blocks,
    }
}

/// Order 0 alone, then order `m` joined with order `-(L - m)` for
/// `m = 1, ..., L-1`; `L` blocks of exactly `L` members.
pub fn partition_choice_4(band_limit: usize) -> Partition {
    let l = band_limit as i64;
    let blocks = std::iter::once(order_block(band_limit, 0))
        .chain((1..l).map(|m| {
            let mut block = order_block(band_limit, m);
            block.extend(order_block(band_limit, -(l - m)));
            block
        }))
        .collect();
    Partition {
        band_limit,
        choice: PartitionChoice::OrderPaired,
        blocks,
    }
}

/// Checks that the blocks are non-empty, pairwise disjoint and together cover
/// `{0, ..., L²-1}`; reports the first violation found.
pub fn validate_partition(p: &Partition) -> Result<(), PartitionError> {
    if p.band_limit == 0 {
        return Err(PartitionError::ZeroBandLimit);
    }
    if p.blocks.is_empty() {
        return Err(PartitionError::NoBlocks);
    }
    let n = p.band_limit * p.band_limit;
    let mut seen = vec![false; n];
    for (k, block) in p.blocks.iter().enumerate() {
        if block.is_empty() {
            return Err(PartitionError::EmptyBlock(k));
        }
        for &i in block {
            if i >= n {
                return Err(PartitionError::IndexOutOfRange {
                    index: i,
                    band_limit: p.band_limit,
                });
            }
            if std::mem::replace(&mut seen[i], true) {
                return Err(PartitionError::DuplicateIndex(i));
            }
        }
    }
    let missing: Vec<usize> = (0..n).filter(|&i| !seen[i]).collect();
    if missing.is_empty() {
        Ok(())
    } else {
        Err(PartitionError::MissingIndex(missing))
    }
}
