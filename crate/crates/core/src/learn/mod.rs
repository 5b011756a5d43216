//! Learning the per-DOF operator triple from single-DOF training data.
//!
//! For one DOF and one direction, every training window is encoded to a unit
//! state `f_i` and weighted by its share of the total angle,
//! `α_i = θ_i / Σθ_j`. The superposition `Σ α_i f_i` is renormalized into the
//! direction prototype `p`, and the direction operator is the projector
//! `|p⟩⟨p|`. The third operator `I − P_pos − P_neg` completes the set so that
//! the three sum to the identity. It is not positive semidefinite when the two
//! prototypes overlap; [`DofOperators::min_eigenvalue_p_zero`] reports that.

mod model_io;
mod operator;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::decode::DecodeConfig;
use crate::encode::{encode, inner_product, QuantumState};
use crate::error::{Error, Result};
use crate::signal::FeatureVector;
use crate::types::{Direction, Dof, MovementPhase};

pub use model_io::{load_model, save_model, MODEL_FORMAT, MODEL_VERSION};
pub use operator::Operator;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub features: FeatureVector,
    pub dof: Dof,
    pub direction: Direction,
    /// Magnitude of the joint angle in degrees, > 0.
    pub angle: f64,
    pub phase: MovementPhase,
}

impl TrainingSample {
    pub fn direct(features: FeatureVector, dof: Dof, direction: Direction, angle: f64) -> Self {
        TrainingSample {
            features,
            dof,
            direction,
            angle,
            phase: MovementPhase::Direct,
        }
    }
}

/// Operator triple and calibration for one DOF.
#[derive(Debug, Clone, PartialEq)]
pub struct DofOperators {
    pub proto_pos: QuantumState,
    pub proto_neg: QuantumState,
    pub p_pos: Operator,
    pub p_neg: Operator,
    pub p_zero: Operator,
    pub theta_pos_max: f64,
    pub theta_neg_max: f64,
    /// Tr(P_pos · P_neg) = ⟨proto_pos|proto_neg⟩².
    pub overlap: f64,
}

impl DofOperators {
    pub fn from_prototypes(
        proto_pos: QuantumState,
        proto_neg: QuantumState,
        theta_pos_max: f64,
        theta_neg_max: f64,
    ) -> Result<Self> {
        let ip = inner_product(&proto_pos, &proto_neg)?;
        let p_pos = build_direction_operator(&proto_pos);
        let p_neg = build_direction_operator(&proto_neg);
        let p_zero = build_completeness_operator(&p_pos, &p_neg)?;
        Ok(DofOperators {
            proto_pos,
            proto_neg,
            p_pos,
            p_neg,
            p_zero,
            theta_pos_max,
            theta_neg_max,
            overlap: ip * ip,
        })
    }

    pub fn dim(&self) -> usize {
        self.p_pos.dim()
    }

    pub fn operator(&self, direction: Direction) -> &Operator {
        match direction {
            Direction::Positive => &self.p_pos,
            Direction::Negative => &self.p_neg,
        }
    }

    pub fn prototype(&self, direction: Direction) -> &QuantumState {
        match direction {
            Direction::Positive => &self.proto_pos,
            Direction::Negative => &self.proto_neg,
        }
    }

    pub fn theta_max(&self, direction: Direction) -> f64 {
        match direction {
            Direction::Positive => self.theta_pos_max,
            Direction::Negative => self.theta_neg_max,
        }
    }

    /// ‖P_pos + P_neg + P_0 − I‖_max.
    pub fn completeness_error(&self) -> f64 {
        let sum = self
            .p_pos
            .checked_add(&self.p_neg)
            .and_then(|s| s.checked_add(&self.p_zero))
            .expect("operators of one DOF share a dimension");
        sum.max_abs_diff(&Operator::identity(self.dim())).expect("same dimension")
    }

    /// Smallest eigenvalue of P_0; negative whenever the prototypes overlap.
    pub fn min_eigenvalue_p_zero(&self) -> f64 {
        self.p_zero.min_eigenvalue()
    }
}

/// A trained network: one operator triple per controlled DOF.
#[derive(Debug, Clone, PartialEq)]
pub struct ControllerModel {
    pub n_channels: usize,
    pub dofs: BTreeMap<Dof, DofOperators>,
    pub decode_config: DecodeConfig,
}

impl ControllerModel {
    pub fn dof_ids(&self) -> Vec<Dof> {
        self.dofs.keys().copied().collect()
    }

    /// Check shapes and that every DOF is decodable under the model's config.
    pub fn validate(&self) -> Result<()> {
        self.decode_config.validate()?;
        for (dof, ops) in &self.dofs {
            for op in [&ops.p_pos, &ops.p_neg, &ops.p_zero] {
                if op.dim() != self.n_channels {
                    return Err(Error::DimensionMismatch {
                        expected: self.n_channels,
                        got: op.dim(),
                    });
                }
            }
            if ops.overlap >= 1.0 - self.decode_config.overlap_epsilon {
                return Err(Error::DegenerateOperators {
                    dof: Some(*dof),
                    overlap: ops.overlap,
                    epsilon: self.decode_config.overlap_epsilon,
                });
            }
        }
        Ok(())
    }
}

/// Angle-weighted, renormalized superposition of the encoded training states
/// of one DOF direction.
pub fn build_prototype(samples: &[&TrainingSample]) -> Result<QuantumState> {
    let first = samples.first().ok_or_else(|| Error::EmptyInput("no training samples for prototype".into()))?;
    let (dof, direction) = (first.dof, first.direction);
    if let Some(s) = samples.iter().find(|s| s.dof != dof || s.direction != direction) {
        return Err(Error::InvalidArgument(format!(
            "prototype samples mix {dof} {direction} with {} {}",
            s.dof, s.direction
        )));
    }
    if let Some(s) = samples.iter().find(|s| !(s.angle > 0.0 && s.angle.is_finite())) {
        return Err(Error::InvalidArgument(format!(
            "training angle must be positive, got {} for {dof} {direction}",
            s.angle
        )));
    }
    let n = first.features.len();
    let total: f64 = samples.iter().map(|s| s.angle).sum();
    let mut acc = vec![0.0; n];
    for s in samples {
        if s.features.len() != n {
            return Err(Error::DimensionMismatch {
                expected: n,
                got: s.features.len(),
            });
        }
        let state = encode(&s.features)?;
        let alpha = s.angle / total;
        for (a, f) in acc.iter_mut().zip(state.amplitudes()) {
            *a += alpha * f;
        }
    }
    let norm = crate::encode::l2_norm(&acc);
    if norm < 1e-12 {
        return Err(Error::DegeneratePrototype { dof, direction, norm });
    }
    QuantumState::from_unnormalized(&acc)
}

pub fn build_direction_operator(prototype: &QuantumState) -> Operator {
    Operator::projector(prototype)
}

/// `I − p_pos − p_neg`.
pub fn build_completeness_operator(p_pos: &Operator, p_neg: &Operator) -> Result<Operator> {
    Operator::identity(p_pos.dim()).checked_sub(p_pos)?.checked_sub(p_neg)
}

fn usable(samples: &[TrainingSample], n_channels: usize) -> Result<Vec<&TrainingSample>> {
    let mut out = Vec::with_capacity(samples.len());
    let (mut returns, mut zeros) = (0usize, 0usize);
    for s in samples {
        if s.features.len() != n_channels {
            return Err(Error::DimensionMismatch {
                expected: n_channels,
                got: s.features.len(),
            });
        }
        if s.phase == MovementPhase::Return {
            returns += 1;
        } else if s.features.is_zero() {
            zeros += 1;
        } else {
            out.push(s);
        }
    }
    if returns > 0 {
        log::info!("training: ignored {returns} return-phase samples");
    }
    if zeros > 0 {
        log::warn!("training: ignored {zeros} samples with an all-zero feature vector");
    }
    Ok(out)
}

/// Train operator triples for `dofs` from direct-phase single-DOF samples.
pub fn train(
    samples: &[TrainingSample],
    n_channels: usize,
    dofs: &[Dof],
    decode_config: DecodeConfig,
) -> Result<ControllerModel> {
    if n_channels == 0 {
        return Err(Error::InvalidArgument("n_channels must be at least 1".into()));
    }
    let usable = usable(samples, n_channels)?;
    let mut groups: BTreeMap<(Dof, Direction), Vec<&TrainingSample>> = BTreeMap::new();
    for s in usable {
        groups.entry((s.dof, s.direction)).or_default().push(s);
    }

    let mut model_dofs = BTreeMap::new();
    for &dof in dofs {
        let mut protos = Vec::with_capacity(2);
        for direction in Direction::BOTH {
            let group = groups.get(&(dof, direction)).map(Vec::as_slice).unwrap_or(&[]);
            if group.is_empty() {
                return Err(Error::InsufficientTraining {
                    dof,
                    direction,
                    reason: "no direct-phase samples".into(),
                });
            }
            let proto = build_prototype(group)?;
            let theta_max = group.iter().map(|s| s.angle).fold(0.0, f64::max);
            protos.push((proto, theta_max));
        }
        let (neg, pos) = (protos.pop().unwrap(), protos.pop().unwrap());
        let ops = DofOperators::from_prototypes(pos.0, neg.0, pos.1, neg.1)?;
        debug_assert!(ops.completeness_error() < 1e-10);
        model_dofs.insert(dof, ops);
    }

    Ok(ControllerModel {
        n_channels,
        dofs: model_dofs,
        decode_config,
    })
}

/// DOFs that have at least one sample in either direction, in D1..D3 order.
pub fn dofs_present(samples: &[TrainingSample]) -> Vec<Dof> {
    Dof::ALL
        .into_iter()
        .filter(|d| samples.iter().any(|s| s.dof == *d))
        .collect()
}

/// The first `per_action` direct-phase samples of every action (DOF and
/// direction) of `dofs`, keeping input order.
pub fn per_action_prefix(samples: &[TrainingSample], dofs: &[Dof], per_action: usize) -> Result<Vec<TrainingSample>> {
    let mut taken: BTreeMap<(Dof, Direction), usize> = BTreeMap::new();
    let mut out = Vec::new();
    for s in samples {
        if s.phase != MovementPhase::Direct || !dofs.contains(&s.dof) {
            continue;
        }
        let count = taken.entry((s.dof, s.direction)).or_default();
        if *count < per_action {
            *count += 1;
            out.push(s.clone());
        }
    }
    for &dof in dofs {
        for direction in Direction::BOTH {
            let got = taken.get(&(dof, direction)).copied().unwrap_or(0);
            if got < per_action {
                return Err(Error::Config(format!(
                    "training size {per_action} per action exceeds the {got} direct samples available for {dof} {direction}"
                )));
            }
        }
    }
    Ok(out)
}

/// Overlap of each DOF's prototypes after retraining on growing per-action prefixes.
pub fn overlap_curve(
    samples: &[TrainingSample],
    batch_sizes: &[usize],
    n_channels: usize,
    dofs: &[Dof],
) -> Result<BTreeMap<Dof, Vec<f64>>> {
    if batch_sizes.windows(2).any(|w| w[0] >= w[1]) {
        return Err(Error::Config("batch sizes must be strictly increasing".into()));
    }
    if batch_sizes.first() == Some(&0) {
        return Err(Error::Config("batch sizes must be at least 1".into()));
    }
    let mut curve: BTreeMap<Dof, Vec<f64>> = dofs.iter().map(|d| (*d, Vec::new())).collect();
    for &k in batch_sizes {
        let subset = per_action_prefix(samples, dofs, k)?;
        let model = train(&subset, n_channels, dofs, DecodeConfig::default())?;
        for (dof, ops) in &model.dofs {
            curve.get_mut(dof).unwrap().push(ops.overlap);
        }
    }
    Ok(curve)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn sample(v: &[f64], dof: Dof, dir: Direction, angle: f64) -> TrainingSample {
        TrainingSample::direct(FeatureVector::mav(v.to_vec()), dof, dir, angle)
    }

    fn close(a: &[f64], b: &[f64], tol: f64) -> bool {
        a.len() == b.len() && a.iter().zip(b).all(|(x, y)| (x - y).abs() < tol)
    }

    #[test]
    fn prototype_single_sample_is_its_state() {
        let s = sample(&[3.0, 4.0], Dof::D1, Direction::Positive, 17.0);
        let p = build_prototype(&[&s]).unwrap();
        assert!(close(p.amplitudes(), &[0.6, 0.8], 1e-15));
    }

    #[test]
    fn prototype_weighted_by_angle_share() {
        let a = sample(&[1.0, 0.0], Dof::D1, Direction::Positive, 30.0);
        let b = sample(&[0.0, 1.0], Dof::D1, Direction::Positive, 60.0);
        let p = build_prototype(&[&a, &b]).unwrap();
        let s5 = 5f64.sqrt();
        assert!(close(p.amplitudes(), &[1.0 / s5, 2.0 / s5], 1e-15));
    }

    #[test]
    fn prototype_of_identical_states() {
        let a = sample(&[1.0, 2.0, 2.0], Dof::D3, Direction::Negative, 10.0);
        let b = sample(&[2.0, 4.0, 4.0], Dof::D3, Direction::Negative, 50.0);
        let p = build_prototype(&[&a, &b]).unwrap();
        assert!(close(p.amplitudes(), &[1.0 / 3.0, 2.0 / 3.0, 2.0 / 3.0], 1e-15));
    }

    #[test]
    fn prototype_errors() {
        assert!(matches!(build_prototype(&[]), Err(Error::EmptyInput(_))));
        let a = sample(&[1.0, 0.0], Dof::D1, Direction::Positive, 30.0);
        let b = sample(&[1.0, 0.0], Dof::D1, Direction::Negative, 30.0);
        assert!(build_prototype(&[&a, &b]).is_err());
        let c = sample(&[1.0, 0.0], Dof::D1, Direction::Positive, 0.0);
        assert!(build_prototype(&[&c]).is_err());
        // real amplitudes of opposite sign can cancel
        let d = sample(&[1.0, 1.0], Dof::D2, Direction::Positive, 10.0);
        let e = sample(&[-1.0, -1.0], Dof::D2, Direction::Positive, 10.0);
        assert!(matches!(
            build_prototype(&[&d, &e]),
            Err(Error::DegeneratePrototype { dof: Dof::D2, .. })
        ));
    }

    #[test]
    fn direction_operator_examples() {
        let p = build_direction_operator(&QuantumState::basis(2, 0));
        assert_eq!(p.rows(), vec![vec![1.0, 0.0], vec![0.0, 0.0]]);

        let s5 = 5f64.sqrt();
        let p = build_direction_operator(&QuantumState::from_unnormalized(&[1.0 / s5, 2.0 / s5]).unwrap());
        let expected = [[0.2, 0.4], [0.4, 0.8]];
        for (i, row) in expected.iter().enumerate() {
            for (j, v) in row.iter().enumerate() {
                assert!((p.get(i, j) - v).abs() < 1e-15);
            }
        }
        assert!((p.trace() - 1.0).abs() < 1e-15);
    }

    #[test]
    fn completeness_examples() {
        let p = build_direction_operator(&QuantumState::basis(2, 0));
        let e = build_direction_operator(&QuantumState::basis(2, 1));
        let z = build_completeness_operator(&p, &e).unwrap();
        assert_eq!(z.rows(), vec![vec![0.0, 0.0], vec![0.0, 0.0]]);

        let p = build_direction_operator(&QuantumState::basis(3, 0));
        let e = build_direction_operator(&QuantumState::basis(3, 1));
        let z = build_completeness_operator(&p, &e).unwrap();
        assert_eq!(z.rows(), vec![vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 0.0], vec![0.0, 0.0, 1.0]]);

        assert!(build_completeness_operator(&p, &Operator::zeros(2)).is_err());
    }

    #[test]
    fn completeness_of_overlapping_projectors_is_indefinite() {
        // p = (1,0), n = (cos t, sin t): I − P − N has eigenvalues ±|cos t| (2x2 oracle)
        let t: f64 = 0.5;
        let p = build_direction_operator(&QuantumState::basis(2, 0));
        let n = build_direction_operator(&QuantumState::from_unnormalized(&[t.cos(), t.sin()]).unwrap());
        let z = build_completeness_operator(&p, &n).unwrap();
        // trace 0, det = -(cos t)^2 for the 2x2 remainder
        let (a, b, d) = (z.get(0, 0), z.get(0, 1), z.get(1, 1));
        let disc = ((a - d) * (a - d) / 4.0 + b * b).sqrt();
        let lo = (a + d) / 2.0 - disc;
        assert!((lo + t.cos()).abs() < 1e-12);
        assert!((z.min_eigenvalue() - lo).abs() < 1e-12);
    }

    fn two_dof_samples() -> Vec<TrainingSample> {
        vec![
            sample(&[1.0, 0.0, 0.0, 0.0], Dof::D1, Direction::Positive, 20.0),
            sample(&[0.0, 1.0, 0.0, 0.0], Dof::D1, Direction::Negative, 30.0),
            sample(&[0.0, 0.0, 2.0, 0.0], Dof::D3, Direction::Positive, 40.0),
            sample(&[0.0, 0.0, 1.0, 0.0], Dof::D3, Direction::Positive, 45.0),
            sample(&[0.0, 0.0, 0.0, 1.0], Dof::D3, Direction::Negative, 50.0),
        ]
    }

    #[test]
    fn train_single_dof() {
        let samples = two_dof_samples();
        let m = train(&samples, 4, &[Dof::D1], DecodeConfig::default()).unwrap();
        assert_eq!(m.dof_ids(), vec![Dof::D1]);
        let ops = &m.dofs[&Dof::D1];
        assert_eq!(ops.overlap, 0.0);
        assert_eq!(ops.theta_pos_max, 20.0);
        assert_eq!(ops.theta_neg_max, 30.0);
        assert!(ops.completeness_error() < 1e-10);
    }

    #[test]
    fn train_two_dofs_and_theta_max() {
        let m = train(&two_dof_samples(), 4, &[Dof::D1, Dof::D3], DecodeConfig::default()).unwrap();
        assert_eq!(m.dofs.len(), 2);
        assert_eq!(m.dofs[&Dof::D3].theta_pos_max, 45.0);
        m.validate().unwrap();
    }

    #[test]
    fn train_reports_missing_direction() {
        let mut samples = two_dof_samples();
        samples.retain(|s| !(s.dof == Dof::D3 && s.direction == Direction::Negative));
        match train(&samples, 4, &[Dof::D1, Dof::D3], DecodeConfig::default()) {
            Err(Error::InsufficientTraining { dof, direction, .. }) => {
                assert_eq!((dof, direction), (Dof::D3, Direction::Negative));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn train_ignores_return_phase() {
        let mut samples = two_dof_samples();
        let mut ret = sample(&[0.0, 0.0, 0.0, 1.0], Dof::D1, Direction::Positive, 60.0);
        ret.phase = MovementPhase::Return;
        samples.push(ret);
        let m = train(&samples, 4, &[Dof::D1], DecodeConfig::default()).unwrap();
        assert_eq!(m.dofs[&Dof::D1].theta_pos_max, 20.0);
        assert_eq!(m.dofs[&Dof::D1].proto_pos, QuantumState::basis(4, 0));
    }

    #[test]
    fn train_rejects_wrong_width() {
        let samples = two_dof_samples();
        assert!(matches!(
            train(&samples, 5, &[Dof::D1], DecodeConfig::default()),
            Err(Error::DimensionMismatch { expected: 5, got: 4 })
        ));
    }

    #[test]
    fn overlap_curve_full_batch_matches_train() {
        let samples = vec![
            sample(&[1.0, 0.2, 0.1], Dof::D1, Direction::Positive, 20.0),
            sample(&[0.9, 0.3, 0.1], Dof::D1, Direction::Positive, 25.0),
            sample(&[0.1, 0.3, 1.0], Dof::D1, Direction::Negative, 20.0),
            sample(&[0.2, 0.2, 0.9], Dof::D1, Direction::Negative, 35.0),
        ];
        let m = train(&samples, 3, &[Dof::D1], DecodeConfig::default()).unwrap();
        let c = overlap_curve(&samples, &[2], 3, &[Dof::D1]).unwrap();
        assert_eq!(c[&Dof::D1], vec![m.dofs[&Dof::D1].overlap]);
        assert!(overlap_curve(&samples, &[3], 3, &[Dof::D1]).is_err());
        assert!(overlap_curve(&samples, &[2, 1], 3, &[Dof::D1]).is_err());
    }

    fn random_set() -> impl Strategy<Value = Vec<TrainingSample>> {
        let row = proptest::collection::vec(0.0f64..1.0, 5);
        (
            proptest::collection::vec((row.clone(), 1.0f64..60.0), 1..6),
            proptest::collection::vec((row, 1.0f64..60.0), 1..6),
        )
            .prop_map(|(pos, neg)| {
                let mut out = Vec::new();
                for (v, a) in pos {
                    let mut v = v;
                    v[0] += 0.5;
                    out.push(sample(&v, Dof::D2, Direction::Positive, a));
                }
                for (v, a) in neg {
                    let mut v = v;
                    v[4] += 0.5;
                    out.push(sample(&v, Dof::D2, Direction::Negative, a));
                }
                out
            })
    }

    proptest! {
        #[test]
        fn projector_laws(samples in random_set()) {
            let m = train(&samples, 5, &[Dof::D2], DecodeConfig::default()).unwrap();
            let ops = &m.dofs[&Dof::D2];
            prop_assert!(ops.completeness_error() < 1e-10);
            for p in [&ops.p_pos, &ops.p_neg] {
                prop_assert!(p.idempotence_error() < 1e-10);
                prop_assert!(p.symmetry_error() < 1e-12);
                prop_assert!((p.trace() - 1.0).abs() < 1e-12);
            }
            let tr = ops.p_pos.trace_product(&ops.p_neg).unwrap();
            prop_assert!((tr - ops.overlap).abs() < 1e-12);
        }

        #[test]
        fn angle_scaling_leaves_prototype(samples in random_set(), c in 0.1f64..10.0) {
            let scaled: Vec<TrainingSample> = samples
                .iter()
                .cloned()
                .map(|mut s| {
                    if s.direction == Direction::Positive {
                        s.angle *= c;
                    }
                    s
                })
                .collect();
            let a = &train(&samples, 5, &[Dof::D2], DecodeConfig::default()).unwrap().dofs[&Dof::D2];
            let b = &train(&scaled, 5, &[Dof::D2], DecodeConfig::default()).unwrap().dofs[&Dof::D2];
            prop_assert!(close(a.proto_pos.amplitudes(), b.proto_pos.amplitudes(), 1e-12));
            prop_assert!((a.theta_pos_max * c - b.theta_pos_max).abs() < 1e-9);
            prop_assert_eq!(a.theta_neg_max, b.theta_neg_max);
        }

        #[test]
        fn channel_permutation_equivariance(samples in random_set(), seed in 0u64..1000) {
            use rand::{seq::SliceRandom, SeedableRng};
            let mut perm: Vec<usize> = (0..5).collect();
            perm.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
            let permuted: Vec<TrainingSample> = samples
                .iter()
                .cloned()
                .map(|mut s| {
                    s.features.values = perm.iter().map(|&p| s.features.values[p]).collect();
                    s
                })
                .collect();
            let a = &train(&samples, 5, &[Dof::D2], DecodeConfig::default()).unwrap().dofs[&Dof::D2];
            let b = &train(&permuted, 5, &[Dof::D2], DecodeConfig::default()).unwrap().dofs[&Dof::D2];
            for (x, y) in [(&a.p_pos, &b.p_pos), (&a.p_neg, &b.p_neg), (&a.p_zero, &b.p_zero)] {
                prop_assert!(x.permuted(&perm).max_abs_diff(y).unwrap() < 1e-12);
            }
        }
    }
}
