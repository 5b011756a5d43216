//! Performance indices over joint-angle trajectories and block-wise
//! classification error accounting.
//!
//! Angles are signed: the positive direction of a DOF is +, the negative −,
//! so both directions of one DOF form a single trajectory.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::types::{Dof, Sign};

/// R² of one DOF: `1 − Σ(est − truth)² / Σ(truth − mean(truth))²`, evaluated as
/// `(SST − SSE) / SST` so exact cases stay exact. May be negative.
pub fn r_squared_dof(truth: &[f64], estimate: &[f64]) -> Result<f64> {
    let (sse, sst) = sums(truth, estimate)?;
    if sst == 0.0 {
        return Err(Error::UndefinedDenominator("truth trajectory is constant".into()));
    }
    Ok((sst - sse) / sst)
}

/// Pooled R² over several DOFs: squared errors and deviations are summed
/// across DOFs before taking the ratio.
pub fn r_squared_global(pairs: &[(&[f64], &[f64])]) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::EmptyInput("no trajectories".into()));
    }
    let (mut sse, mut sst) = (0.0, 0.0);
    for (truth, estimate) in pairs {
        let (e, t) = sums(truth, estimate)?;
        sse += e;
        sst += t;
    }
    if sst == 0.0 {
        return Err(Error::UndefinedDenominator("truth trajectories are constant on every DOF".into()));
    }
    Ok((sst - sse) / sst)
}

fn sums(truth: &[f64], estimate: &[f64]) -> Result<(f64, f64)> {
    if truth.len() != estimate.len() {
        return Err(Error::DimensionMismatch {
            expected: truth.len(),
            got: estimate.len(),
        });
    }
    if truth.is_empty() {
        return Err(Error::EmptyInput("empty trajectory".into()));
    }
    let mean = truth.iter().sum::<f64>() / truth.len() as f64;
    let sse = truth.iter().zip(estimate).map(|(t, e)| (e - t) * (e - t)).sum();
    let sst = truth.iter().map(|t| (t - mean) * (t - mean)).sum();
    Ok((sse, sst))
}

/// A run of consecutive windows sharing one intended movement.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub range: Range<usize>,
    pub intended: BTreeMap<Dof, Sign>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrajectoryPair {
    pub dofs: Vec<Dof>,
    /// Indexed like `dofs`, then by window.
    pub truth: Vec<Vec<f64>>,
    pub estimate: Vec<Vec<f64>>,
    pub blocks: Vec<Block>,
}

impl TrajectoryPair {
    pub fn new(dofs: Vec<Dof>, truth: Vec<Vec<f64>>, estimate: Vec<Vec<f64>>, blocks: Vec<Block>) -> Result<Self> {
        if truth.len() != dofs.len() || estimate.len() != dofs.len() {
            return Err(Error::DimensionMismatch {
                expected: dofs.len(),
                got: truth.len().min(estimate.len()),
            });
        }
        let n = truth.first().map(Vec::len).unwrap_or(0);
        for series in truth.iter().chain(&estimate) {
            if series.len() != n {
                return Err(Error::DimensionMismatch {
                    expected: n,
                    got: series.len(),
                });
            }
        }
        let mut next = 0;
        for (i, b) in blocks.iter().enumerate() {
            if b.range.start != next {
                return Err(Error::MalformedBlock {
                    block: i,
                    reason: format!("starts at {} but previous block ended at {next}", b.range.start),
                });
            }
            if b.range.is_empty() {
                return Err(Error::MalformedBlock {
                    block: i,
                    reason: "block has no windows".into(),
                });
            }
            next = b.range.end;
        }
        if next != n {
            return Err(Error::MalformedBlock {
                block: blocks.len().saturating_sub(1),
                reason: format!("blocks cover {next} windows, trajectories have {n}"),
            });
        }
        Ok(TrajectoryPair {
            dofs,
            truth,
            estimate,
            blocks,
        })
    }

    pub fn len(&self) -> usize {
        self.truth.first().map(Vec::len).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn r_squared(&self) -> Result<BTreeMap<Dof, f64>> {
        self.dofs
            .iter()
            .enumerate()
            .map(|(k, d)| Ok((*d, r_squared_dof(&self.truth[k], &self.estimate[k]).map_err(|e| e.context(format!("R² of {d}")))?)))
            .collect()
    }

    pub fn r_squared_global(&self) -> Result<f64> {
        let pairs: Vec<(&[f64], &[f64])> = self
            .truth
            .iter()
            .zip(&self.estimate)
            .map(|(t, e)| (t.as_slice(), e.as_slice()))
            .collect();
        r_squared_global(&pairs)
    }

    /// Pair restricted to the listed blocks, in the given order.
    pub fn subset(&self, block_indices: &[usize]) -> Result<TrajectoryPair> {
        let mut truth = vec![Vec::new(); self.dofs.len()];
        let mut estimate = vec![Vec::new(); self.dofs.len()];
        let mut blocks = Vec::with_capacity(block_indices.len());
        for &bi in block_indices {
            let b = self.blocks.get(bi).ok_or_else(|| Error::MalformedBlock {
                block: bi,
                reason: "no such block".into(),
            })?;
            let start = truth[0].len();
            for k in 0..self.dofs.len() {
                truth[k].extend_from_slice(&self.truth[k][b.range.clone()]);
                estimate[k].extend_from_slice(&self.estimate[k][b.range.clone()]);
            }
            blocks.push(Block {
                range: start..start + b.range.len(),
                intended: b.intended.clone(),
            });
        }
        TrajectoryPair::new(self.dofs.clone(), truth, estimate, blocks)
    }
}

/// Majority sign of a slice of signed angles; ties resolve toward rest, then positive.
pub fn majority_sign(values: impl IntoIterator<Item = f64>) -> Sign {
    let mut counts = [0usize; 3];
    for v in values {
        counts[sign_slot(Sign::of_angle(v))] += 1;
    }
    let order = [Sign::Rest, Sign::Positive, Sign::Negative];
    let mut best = Sign::Rest;
    for s in order {
        if counts[sign_slot(s)] > counts[sign_slot(best)] {
            best = s;
        }
    }
    best
}

fn sign_slot(s: Sign) -> usize {
    match s {
        Sign::Positive => 0,
        Sign::Negative => 1,
        Sign::Rest => 2,
    }
}

/// When a block counts as misclassified on one DOF.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BlockRule {
    /// The intended direction is not the strict plurality of decoded directions.
    #[default]
    Majority,
    /// Any window decodes to a different direction.
    Any,
    /// Every window decodes to a different direction.
    All,
}

impl fmt::Display for BlockRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            BlockRule::Majority => "majority",
            BlockRule::Any => "any",
            BlockRule::All => "all",
        })
    }
}

impl FromStr for BlockRule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "majority" => Ok(BlockRule::Majority),
            "any" => Ok(BlockRule::Any),
            "all" => Ok(BlockRule::All),
            other => Err(Error::InvalidArgument(format!("unknown block rule {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BlockErrors {
    pub n_blocks: usize,
    pub per_dof: BTreeMap<Dof, usize>,
    /// Blocks with at least one misclassified DOF, ascending.
    pub misclassified: Vec<usize>,
    /// Blocks where more than one DOF was misclassified.
    pub multi_dof: usize,
}

pub fn block_errors(pair: &TrajectoryPair, rule: BlockRule) -> Result<BlockErrors> {
    let mut per_dof: BTreeMap<Dof, usize> = pair.dofs.iter().map(|d| (*d, 0)).collect();
    let mut misclassified = Vec::new();
    let mut multi_dof = 0;
    for (bi, block) in pair.blocks.iter().enumerate() {
        if block.range.is_empty() {
            return Err(Error::MalformedBlock {
                block: bi,
                reason: "block has no windows".into(),
            });
        }
        let mut wrong_dofs = 0;
        for (k, dof) in pair.dofs.iter().enumerate() {
            let intended = block.intended.get(dof).copied().unwrap_or(Sign::Rest);
            let mut counts = [0usize; 3];
            for &v in &pair.estimate[k][block.range.clone()] {
                counts[sign_slot(Sign::of_angle(v))] += 1;
            }
            let hits = counts[sign_slot(intended)];
            let total = block.range.len();
            let wrong = match rule {
                BlockRule::Majority => counts
                    .iter()
                    .enumerate()
                    .any(|(slot, &c)| slot != sign_slot(intended) && c >= hits),
                BlockRule::Any => hits < total,
                BlockRule::All => hits == 0,
            };
            if wrong {
                *per_dof.get_mut(dof).unwrap() += 1;
                wrong_dofs += 1;
            }
        }
        if wrong_dofs > 0 {
            misclassified.push(bi);
        }
        if wrong_dofs > 1 {
            multi_dof += 1;
        }
    }
    Ok(BlockErrors {
        n_blocks: pair.blocks.len(),
        per_dof,
        misclassified,
        multi_dof,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn r2_examples() {
        let t = [0.0, 1.0, 2.0, 3.0];
        assert_eq!(r_squared_dof(&t, &t).unwrap(), 1.0);
        assert_eq!(r_squared_dof(&t, &[1.5; 4]).unwrap(), 0.0);
        assert!((r_squared_dof(&t, &[0.0, 1.0, 2.0, 5.0]).unwrap() - 0.2).abs() < 1e-15);
        assert!(r_squared_dof(&t, &[0.0, 1.0, 2.0, 30.0]).unwrap() < 0.0);
        assert!(matches!(r_squared_dof(&[2.0; 3], &[2.0; 3]), Err(Error::UndefinedDenominator(_))));
        assert!(r_squared_dof(&t, &[0.0; 3]).is_err());
        assert!(r_squared_dof(&[], &[]).is_err());
    }

    #[test]
    fn global_examples() {
        let t = [0.0, 1.0, 2.0, 3.0];
        let e = [0.0, 1.0, 2.0, 5.0];
        assert_eq!(r_squared_global(&[(&t, &t), (&e, &e)]).unwrap(), 1.0);
        assert_eq!(r_squared_global(&[(&t, &e)]).unwrap(), r_squared_dof(&t, &e).unwrap());
        // equal denominators (5 each), per-DOF 0.2 and 1.0 → pooled 1 − 4/10
        let g = r_squared_global(&[(&t, &e), (&t, &t)]).unwrap();
        assert!((g - 0.6).abs() < 1e-15);
        assert!(r_squared_global(&[(&[1.0, 1.0], &[0.0, 0.0]), (&[2.0], &[2.0])]).is_err());
    }

    fn intended(d1: Sign, d3: Sign) -> BTreeMap<Dof, Sign> {
        [(Dof::D1, d1), (Dof::D3, d3)].into_iter().collect()
    }

    fn pair(est_d1: Vec<f64>, est_d3: Vec<f64>, blocks: Vec<Block>) -> TrajectoryPair {
        let n = est_d1.len();
        TrajectoryPair::new(vec![Dof::D1, Dof::D3], vec![vec![0.0; n], vec![0.0; n]], vec![est_d1, est_d3], blocks).unwrap()
    }

    #[test]
    fn block_error_counting() {
        let blocks = vec![
            Block {
                range: 0..5,
                intended: intended(Sign::Positive, Sign::Negative),
            },
            Block {
                range: 5..10,
                intended: intended(Sign::Negative, Sign::Positive),
            },
        ];
        let ok = pair(
            vec![1.0, 2.0, 3.0, 4.0, 5.0, -1.0, -1.0, -1.0, -1.0, -1.0],
            vec![-1.0, -1.0, -1.0, -1.0, -1.0, 2.0, 2.0, 2.0, 2.0, 2.0],
            blocks.clone(),
        );
        let r = block_errors(&ok, BlockRule::Majority).unwrap();
        assert_eq!(r.misclassified, Vec::<usize>::new());
        assert_eq!(r.per_dof[&Dof::D1], 0);

        // D1 majority flipped in block 1
        let flipped = pair(
            vec![1.0, 2.0, 3.0, 4.0, 5.0, 1.0, 1.0, 1.0, -1.0, -1.0],
            vec![-1.0, -1.0, -1.0, -1.0, -1.0, 2.0, 2.0, 2.0, 2.0, 2.0],
            blocks.clone(),
        );
        let r = block_errors(&flipped, BlockRule::Majority).unwrap();
        assert_eq!(r.per_dof[&Dof::D1], 1);
        assert_eq!(r.per_dof[&Dof::D3], 0);
        assert_eq!(r.misclassified, vec![1]);

        // 3 of 5 D3 windows wrong in block 0
        let d3_wrong = pair(
            vec![1.0, 2.0, 3.0, 4.0, 5.0, -1.0, -1.0, -1.0, -1.0, -1.0],
            vec![-1.0, 1.0, 0.0, 1.0, -1.0, 2.0, 2.0, 2.0, 2.0, 2.0],
            blocks.clone(),
        );
        let r = block_errors(&d3_wrong, BlockRule::Majority).unwrap();
        assert_eq!(r.per_dof[&Dof::D3], 1);
        assert_eq!(r.misclassified, vec![0]);
        assert_eq!(block_errors(&d3_wrong, BlockRule::All).unwrap().per_dof[&Dof::D3], 0);
        assert_eq!(block_errors(&d3_wrong, BlockRule::Any).unwrap().per_dof[&Dof::D3], 1);

        let both = pair(vec![1.0; 10], vec![-1.0; 10], blocks);
        let r = block_errors(&both, BlockRule::Majority).unwrap();
        assert_eq!(r.misclassified, vec![1]);
        assert_eq!(r.multi_dof, 1);
    }

    #[test]
    fn malformed_blocks_are_rejected() {
        let gap = vec![
            Block {
                range: 0..2,
                intended: BTreeMap::new(),
            },
            Block {
                range: 3..4,
                intended: BTreeMap::new(),
            },
        ];
        assert!(TrajectoryPair::new(vec![Dof::D1], vec![vec![0.0; 4]], vec![vec![0.0; 4]], gap).is_err());
        let empty = vec![
            Block {
                range: 0..0,
                intended: BTreeMap::new(),
            },
            Block {
                range: 0..4,
                intended: BTreeMap::new(),
            },
        ];
        assert!(matches!(
            TrajectoryPair::new(vec![Dof::D1], vec![vec![0.0; 4]], vec![vec![0.0; 4]], empty),
            Err(Error::MalformedBlock { block: 0, .. })
        ));
    }

    #[test]
    fn majority_sign_ties() {
        assert_eq!(majority_sign([1.0, 2.0, -1.0]), Sign::Positive);
        assert_eq!(majority_sign([1.0, -1.0]), Sign::Positive);
        assert_eq!(majority_sign([0.0, 1.0]), Sign::Rest);
        assert_eq!(majority_sign([-3.0]), Sign::Negative);
    }

    proptest! {
        #[test]
        fn r2_at_most_one(t in proptest::collection::vec(-50.0f64..50.0, 2..40), noise in proptest::collection::vec(-5.0f64..5.0, 40)) {
            prop_assume!(t.iter().any(|x| *x != t[0]));
            let e: Vec<f64> = t.iter().zip(&noise).map(|(a, b)| a + b).collect();
            let r = r_squared_dof(&t, &e).unwrap();
            prop_assert!(r <= 1.0);
            if e != t {
                prop_assert!(r < 1.0);
            }
        }

        #[test]
        fn shift_invariance(
            t in proptest::collection::vec(-50.0f64..50.0, 5..40),
            noise in proptest::collection::vec(-5.0f64..5.0, 40),
            c in -100.0f64..100.0,
        ) {
            // Keep SST away from zero so |R²| stays small enough for an
            // absolute 1e-12 comparison to be meaningful in f64.
            let spread = t.iter().cloned().fold(f64::MIN, f64::max) - t.iter().cloned().fold(f64::MAX, f64::min);
            prop_assume!(spread >= 10.0);
            let e: Vec<f64> = t.iter().zip(&noise).map(|(a, b)| a + b).collect();
            let ts: Vec<f64> = t.iter().map(|x| x + c).collect();
            let es: Vec<f64> = e.iter().map(|x| x + c).collect();
            prop_assert!((r_squared_dof(&t, &e).unwrap() - r_squared_dof(&ts, &es).unwrap()).abs() < 1e-12);
            prop_assert!(
                (r_squared_global(&[(&t, &e), (&e, &t)]).unwrap() - r_squared_global(&[(&ts, &es), (&es, &ts)]).unwrap()).abs() < 1e-12
            );
        }

        #[test]
        fn block_errors_ignore_window_order(est in proptest::collection::vec(-2i32..=2, 12), seed in 0u64..500) {
            use rand::{seq::SliceRandom, SeedableRng};
            let est: Vec<f64> = est.into_iter().map(f64::from).collect();
            let blocks = vec![
                Block { range: 0..6, intended: [(Dof::D1, Sign::Positive)].into_iter().collect() },
                Block { range: 6..12, intended: [(Dof::D1, Sign::Negative)].into_iter().collect() },
            ];
            let mut shuffled = est.clone();
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            shuffled[0..6].shuffle(&mut rng);
            shuffled[6..12].shuffle(&mut rng);
            let a = TrajectoryPair::new(vec![Dof::D1], vec![vec![0.0; 12]], vec![est], blocks.clone()).unwrap();
            let b = TrajectoryPair::new(vec![Dof::D1], vec![vec![0.0; 12]], vec![shuffled], blocks).unwrap();
            for rule in [BlockRule::Majority, BlockRule::Any, BlockRule::All] {
                prop_assert_eq!(block_errors(&a, rule).unwrap(), block_errors(&b, rule).unwrap());
            }
        }
    }
}
