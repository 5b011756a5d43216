//! Amplitude encoding: a per-channel feature vector becomes a unit-norm real
//! state whose i-th amplitude is the normalized feature of channel i.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::signal::FeatureVector;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct QuantumState {
    amplitudes: Vec<f64>,
}

impl QuantumState {
    /// Normalize an arbitrary nonzero real vector.
    pub fn from_unnormalized(values: &[f64]) -> Result<Self> {
        if values.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("state amplitudes must be finite".into()));
        }
        let norm = l2_norm(values);
        if norm == 0.0 {
            return Err(Error::ZeroSignal);
        }
        Ok(QuantumState {
            amplitudes: values.iter().map(|v| v / norm).collect(),
        })
    }

    /// Wrap amplitudes that are already unit norm (within 1e-9), keeping them bit-for-bit.
    pub fn from_unit(values: Vec<f64>) -> Result<Self> {
        let norm = l2_norm(&values);
        if !norm.is_finite() || (norm - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("state is not unit norm (norm {norm})")));
        }
        Ok(QuantumState { amplitudes: values })
    }

    /// Computational basis state |index⟩.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut amplitudes = vec![0.0; dim];
        amplitudes[index] = 1.0;
        QuantumState { amplitudes }
    }

    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        l2_norm(&self.amplitudes)
    }

    /// Copy with channels reordered so that `new[i] = old[perm[i]]`.
    pub fn permuted(&self, perm: &[usize]) -> Self {
        QuantumState {
            amplitudes: perm.iter().map(|&p| self.amplitudes[p]).collect(),
        }
    }
}

pub(crate) fn l2_norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

pub fn encode(fv: &FeatureVector) -> Result<QuantumState> {
    QuantumState::from_unnormalized(&fv.values)
}

pub fn inner_product(a: &QuantumState, b: &QuantumState) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch {
            expected: a.dim(),
            got: b.dim(),
        });
    }
    Ok(a.amplitudes.iter().zip(&b.amplitudes).map(|(x, y)| x * y).sum())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn enc(v: &[f64]) -> Vec<f64> {
        encode(&FeatureVector::mav(v.to_vec())).unwrap().amplitudes().to_vec()
    }

    #[test]
    fn encode_examples() {
        assert_eq!(enc(&[3.0, 4.0]), vec![0.6, 0.8]);
        assert_eq!(enc(&[1.0, 0.0, 0.0]), vec![1.0, 0.0, 0.0]);
        assert_eq!(enc(&[1.0, 1.0, 1.0, 1.0]), vec![0.5; 4]);
    }

    #[test]
    fn zero_vector_is_rejected() {
        assert!(matches!(encode(&FeatureVector::mav(vec![0.0; 8])), Err(Error::ZeroSignal)));
    }

    #[test]
    fn inner_product_examples() {
        let a = QuantumState::from_unnormalized(&[0.6, 0.8]).unwrap();
        let b = QuantumState::from_unnormalized(&[0.8, 0.6]).unwrap();
        assert!((inner_product(&a, &a).unwrap() - 1.0).abs() < 1e-15);
        assert!((inner_product(&a, &b).unwrap() - 0.96).abs() < 1e-15);
        let e0 = QuantumState::basis(3, 0);
        let e2 = QuantumState::basis(3, 2);
        assert_eq!(inner_product(&e0, &e2).unwrap(), 0.0);
        assert!(matches!(
            inner_product(&a, &e0),
            Err(Error::DimensionMismatch { expected: 2, got: 3 })
        ));
    }

    #[test]
    fn unit_norm_on_a_million_random_inputs() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for _ in 0..1_000_000 {
            let n = rng.random_range(1..=12);
            let v: Vec<f64> = (0..n).map(|_| rng.random_range(-1e3..1e3)).collect();
            if v.iter().all(|x| *x == 0.0) {
                continue;
            }
            let s = QuantumState::from_unnormalized(&v).unwrap();
            assert!((s.amplitudes().iter().map(|a| a * a).sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    proptest! {
        #[test]
        fn scale_invariant(v in proptest::collection::vec(0.0f64..10.0, 1..16), c in 1e-3f64..1e3) {
            prop_assume!(v.iter().any(|x| *x > 1e-9));
            let a = enc(&v);
            let scaled: Vec<f64> = v.iter().map(|x| x * c).collect();
            let b = enc(&scaled);
            for (x, y) in a.iter().zip(&b) {
                prop_assert!((x - y).abs() < 1e-12);
            }
            // MAV features are non-negative so the state stays in the positive orthant
            prop_assert!(a.iter().all(|x| *x >= 0.0));
        }

        #[test]
        fn inner_product_bounded(
            a in proptest::collection::vec(-5.0f64..5.0, 4),
            b in proptest::collection::vec(-5.0f64..5.0, 4),
        ) {
            prop_assume!(l2_norm(&a) > 1e-6 && l2_norm(&b) > 1e-6);
            let a = QuantumState::from_unnormalized(&a).unwrap();
            let b = QuantumState::from_unnormalized(&b).unwrap();
            let ip = inner_product(&a, &b).unwrap();
            prop_assert!((-1.0 - 1e-12..=1.0 + 1e-12).contains(&ip));
        }
    }
}
