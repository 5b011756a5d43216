//! Expectation-value decoding.
//!
//! For each DOF the state is measured against the triple: `f = ⟨ψ|P_pos|ψ⟩`,
//! `e = ⟨ψ|P_neg|ψ⟩`, `z = ⟨ψ|P_0|ψ⟩`. The winning direction moves by
//! `|f − e| · θ_max / (1 − overlap)` degrees, where θ_max is the largest angle
//! seen for that direction in training. With all three DOFs present, the
//! inactivity values also feed the residual system `z1 = d2 + d3`,
//! `z2 = d1 + d3`, `z3 = d1 + d2`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::encode::{encode, QuantumState};
use crate::error::{Error, Result};
use crate::learn::{ControllerModel, DofOperators, Operator};
use crate::signal::FeatureVector;
use crate::types::{Direction, Dof, Sign};

pub const DEFAULT_REST_THRESHOLD: f64 = 0.05;
pub const DEFAULT_OVERLAP_EPSILON: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DecodeConfig {
    /// A DOF is at rest when |f − e| is at most this value.
    pub rest_threshold: f64,
    /// Operators with overlap ≥ 1 − epsilon are rejected.
    pub overlap_epsilon: f64,
}

impl Default for DecodeConfig {
    fn default() -> Self {
        DecodeConfig {
            rest_threshold: DEFAULT_REST_THRESHOLD,
            overlap_epsilon: DEFAULT_OVERLAP_EPSILON,
        }
    }
}

impl DecodeConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.rest_threshold >= 0.0 && self.rest_threshold.is_finite()) {
            return Err(Error::Config(format!("rest_threshold must be >= 0, got {}", self.rest_threshold)));
        }
        if !(self.overlap_epsilon > 0.0 && self.overlap_epsilon < 1.0) {
            return Err(Error::Config(format!(
                "overlap_epsilon must lie in (0, 1), got {}",
                self.overlap_epsilon
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DofDecision {
    pub expectation_pos: f64,
    pub expectation_neg: f64,
    pub expectation_zero: f64,
    pub direction: Sign,
    /// Degrees, clamped to [0, θ_max] of the winning direction.
    pub angle_estimate: f64,
    /// Angle before clamping.
    pub raw_angle: f64,
    pub clamped: bool,
    /// Set when `expectation_zero` < 0, i.e. P_0 is not positive on this state.
    pub negative_zero: bool,
}

impl DofDecision {
    fn rest_input() -> Self {
        DofDecision {
            expectation_pos: 0.0,
            expectation_neg: 0.0,
            expectation_zero: 1.0,
            direction: Sign::Rest,
            angle_estimate: 0.0,
            raw_angle: 0.0,
            clamped: false,
            negative_zero: false,
        }
    }

    /// Angle with the direction folded in as its sign (negative direction is −).
    pub fn signed_angle(&self) -> f64 {
        match self.direction {
            Sign::Positive => self.angle_estimate,
            Sign::Negative => -self.angle_estimate,
            Sign::Rest => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResidualActivations {
    /// d1, d2, d3.
    pub values: [f64; 3],
    /// Which z inputs were negative and clamped to 0 before solving.
    pub clamped_inputs: [bool; 3],
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Diagnostics {
    /// The window had an all-zero feature vector and was decoded as rest.
    pub rest_input: bool,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecodedAction {
    pub per_dof: BTreeMap<Dof, DofDecision>,
    pub residual: Option<ResidualActivations>,
    pub diagnostics: Diagnostics,
}

impl DecodedAction {
    pub fn signed_angle(&self, dof: Dof) -> Option<f64> {
        self.per_dof.get(&dof).map(DofDecision::signed_angle)
    }
}

pub fn expectation(state: &QuantumState, op: &Operator) -> Result<f64> {
    op.expectation(state)
}

pub fn decode_dof(state: &QuantumState, ops: &DofOperators, cfg: &DecodeConfig) -> Result<DofDecision> {
    if ops.overlap >= 1.0 - cfg.overlap_epsilon {
        return Err(Error::DegenerateOperators {
            dof: None,
            overlap: ops.overlap,
            epsilon: cfg.overlap_epsilon,
        });
    }
    let f = ops.p_pos.expectation(state)?;
    let e = ops.p_neg.expectation(state)?;
    let z = ops.p_zero.expectation(state)?;

    let diff = f - e;
    let (direction, raw_angle) = if diff.abs() <= cfg.rest_threshold {
        (Sign::Rest, 0.0)
    } else {
        let dir = if diff > 0.0 { Direction::Positive } else { Direction::Negative };
        (dir.into(), diff.abs() * ops.theta_max(dir) / (1.0 - ops.overlap))
    };
    let (angle_estimate, clamped) = match direction {
        Sign::Rest => (0.0, false),
        Sign::Positive => clamp(raw_angle, ops.theta_pos_max),
        Sign::Negative => clamp(raw_angle, ops.theta_neg_max),
    };
    Ok(DofDecision {
        expectation_pos: f,
        expectation_neg: e,
        expectation_zero: z,
        direction,
        angle_estimate,
        raw_angle,
        clamped,
        negative_zero: z < 0.0,
    })
}

fn clamp(angle: f64, max: f64) -> (f64, bool) {
    if angle > max {
        (max, true)
    } else {
        (angle, false)
    }
}

/// Solve `z1 = d2 + d3`, `z2 = d1 + d3`, `z3 = d1 + d2` for (d1, d2, d3).
pub fn residual_activations(z1: f64, z2: f64, z3: f64) -> (f64, f64, f64) {
    (
        (-z1 + z2 + z3) / 2.0,
        (z1 - z2 + z3) / 2.0,
        (z1 + z2 - z3) / 2.0,
    )
}

fn residual_from_decisions(per_dof: &BTreeMap<Dof, DofDecision>) -> ResidualActivations {
    let mut z = [0.0; 3];
    let mut clamped_inputs = [false; 3];
    for dof in Dof::ALL {
        let raw = per_dof[&dof].expectation_zero;
        clamped_inputs[dof.index()] = raw < 0.0;
        z[dof.index()] = raw.max(0.0);
    }
    let (d1, d2, d3) = residual_activations(z[0], z[1], z[2]);
    ResidualActivations {
        values: [d1, d2, d3],
        clamped_inputs,
    }
}

/// Decode one encoded window against every DOF of the model.
pub fn decode(state: &QuantumState, model: &ControllerModel) -> Result<DecodedAction> {
    if state.dim() != model.n_channels {
        return Err(Error::DimensionMismatch {
            expected: model.n_channels,
            got: state.dim(),
        });
    }
    let mut per_dof = BTreeMap::new();
    for (dof, ops) in &model.dofs {
        let d = decode_dof(state, ops, &model.decode_config).map_err(|e| match e {
            Error::DegenerateOperators { overlap, epsilon, .. } => Error::DegenerateOperators {
                dof: Some(*dof),
                overlap,
                epsilon,
            },
            other => other,
        })?;
        debug_assert!((d.expectation_pos + d.expectation_neg + d.expectation_zero - 1.0).abs() < 1e-10);
        per_dof.insert(*dof, d);
    }
    let mut diagnostics = Diagnostics::default();
    let residual = if per_dof.len() == 3 {
        Some(residual_from_decisions(&per_dof))
    } else {
        diagnostics.notes.push(format!(
            "residual activations need all three DOFs; model has {}",
            per_dof.len()
        ));
        None
    };
    Ok(DecodedAction {
        per_dof,
        residual,
        diagnostics,
    })
}

/// Encode and decode a feature vector. All-zero features decode as rest on every DOF.
pub fn decode_features(fv: &FeatureVector, model: &ControllerModel) -> Result<DecodedAction> {
    if fv.len() != model.n_channels {
        return Err(Error::DimensionMismatch {
            expected: model.n_channels,
            got: fv.len(),
        });
    }
    match encode(fv) {
        Ok(state) => decode(&state, model),
        Err(Error::ZeroSignal) => Ok(DecodedAction {
            per_dof: model.dofs.keys().map(|d| (*d, DofDecision::rest_input())).collect(),
            residual: None,
            diagnostics: Diagnostics {
                rest_input: true,
                notes: vec!["zero-signal window decoded as rest".into()],
            },
        }),
        Err(e) => Err(e),
    }
}

/// Decode many windows in parallel; output order follows input order.
pub fn decode_batch(features: &[FeatureVector], model: &ControllerModel) -> Result<Vec<DecodedAction>> {
    model.validate()?;
    features.par_iter().map(|fv| decode_features(fv, model)).collect()
}

/// Rest threshold that keeps the given `quantile` of rest-window |f − e|
/// values (over every DOF) inside the deadzone. `None` without rest windows.
pub fn calibrate_rest_threshold(model: &ControllerModel, rest: &[QuantumState], quantile: f64) -> Result<Option<f64>> {
    if !(0.0..=1.0).contains(&quantile) {
        return Err(Error::InvalidArgument(format!("quantile must lie in [0, 1], got {quantile}")));
    }
    let mut gaps = Vec::with_capacity(rest.len() * model.dofs.len());
    for state in rest {
        for ops in model.dofs.values() {
            gaps.push((ops.p_pos.expectation(state)? - ops.p_neg.expectation(state)?).abs());
        }
    }
    if gaps.is_empty() {
        return Ok(None);
    }
    gaps.sort_by(f64::total_cmp);
    let idx = ((gaps.len() - 1) as f64 * quantile).ceil() as usize;
    Ok(Some(gaps[idx]))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::learn::{train, TrainingSample};
    use nalgebra::{Matrix3, Vector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn state(v: &[f64]) -> QuantumState {
        QuantumState::from_unnormalized(v).unwrap()
    }

    fn ops(pos: &[f64], neg: &[f64], tp: f64, tn: f64) -> DofOperators {
        DofOperators::from_prototypes(state(pos), state(neg), tp, tn).unwrap()
    }

    #[test]
    fn expectation_examples() {
        let s5 = 5f64.sqrt();
        let p = Operator::projector(&state(&[1.0 / s5, 2.0 / s5]));
        assert!((expectation(&state(&[1.0, 2.0]), &p).unwrap() - 1.0).abs() < 1e-15);
        assert!(expectation(&state(&[2.0, -1.0]), &p).unwrap().abs() < 1e-15);
        // ψ = (1,0): direct row-0/col-0 entry of the matrix
        assert!((expectation(&QuantumState::basis(2, 0), &p).unwrap() - 0.2).abs() < 1e-15);
        assert!(expectation(&QuantumState::basis(3, 0), &p).is_err());
    }

    #[test]
    fn own_prototype_decodes_to_theta_max() {
        let o = ops(&[1.0, 0.0, 0.0], &[0.0, 1.0, 0.0], 40.0, 30.0);
        let d = decode_dof(&QuantumState::basis(3, 0), &o, &DecodeConfig::default()).unwrap();
        assert_eq!((d.expectation_pos, d.expectation_neg), (1.0, 0.0));
        assert_eq!(d.direction, Sign::Positive);
        assert_eq!(d.angle_estimate, 40.0);
        let d = decode_dof(&QuantumState::basis(3, 1), &o, &DecodeConfig::default()).unwrap();
        assert_eq!(d.signed_angle(), -30.0);
    }

    #[test]
    fn tie_is_rest() {
        let o = ops(&[1.0, 0.0], &[0.0, 1.0], 40.0, 30.0);
        let cfg = DecodeConfig {
            rest_threshold: 0.0,
            ..DecodeConfig::default()
        };
        let d = decode_dof(&state(&[1.0, 1.0]), &o, &cfg).unwrap();
        assert_eq!(d.direction, Sign::Rest);
        assert_eq!(d.angle_estimate, 0.0);
    }

    #[test]
    fn overlap_corrected_angle() {
        // build prototypes with overlap exactly 0.5 and a state with f = 0.6, e = 0.2:
        // p = (1,0,0), n = (c,c,0) with c² = 1/2. ψ = (a,b,r): f = a², e = (a+b)²/2.
        let c = 0.5f64.sqrt();
        let a = 0.6f64.sqrt();
        let b = (0.4f64).sqrt() - a; // (a+b)² = 0.4
        let r = (1.0 - a * a - b * b).sqrt();
        let o = ops(&[1.0, 0.0, 0.0], &[c, c, 0.0], 40.0, 40.0);
        assert!((o.overlap - 0.5).abs() < 1e-15);
        let d = decode_dof(&state(&[a, b, r]), &o, &DecodeConfig::default()).unwrap();
        assert!((d.expectation_pos - 0.6).abs() < 1e-12);
        assert!((d.expectation_neg - 0.2).abs() < 1e-12);
        assert!((d.raw_angle - 32.0).abs() < 1e-9);
        assert!(!d.clamped);
    }

    #[test]
    fn clamping_sets_flag() {
        let c = 0.5f64.sqrt();
        let o = ops(&[1.0, 0.0, 0.0], &[c, c, 0.0], 40.0, 40.0);
        // ψ = (c, -c, 0): f = 1/2, e = 0 → raw = 0.5 * 40 / 0.5 = 40, not clamped
        // ψ = (1, -1, 0)/√2 rotated slightly further raises f - e above 1 - overlap
        let t: f64 = -0.2;
        let psi = state(&[t.cos(), t.sin(), 0.0]);
        let d = decode_dof(&psi, &o, &DecodeConfig::default()).unwrap();
        assert!(d.raw_angle > 40.0);
        assert!(d.clamped);
        assert_eq!(d.angle_estimate, 40.0);
        // the two rank-1 projectors overlap so P_0 is indefinite on some states
        assert!(d.negative_zero == (d.expectation_zero < 0.0));
    }

    #[test]
    fn degenerate_overlap_is_an_error() {
        let o = ops(&[1.0, 0.0], &[1.0, 1e-9], 40.0, 40.0);
        assert!(matches!(
            decode_dof(&QuantumState::basis(2, 0), &o, &DecodeConfig::default()),
            Err(Error::DegenerateOperators { .. })
        ));
    }

    #[test]
    fn residual_examples() {
        let (a, b, c) = residual_activations(0.6, 0.7, 0.7);
        assert!((a - 0.4).abs() < 1e-15 && (b - 0.3).abs() < 1e-15 && (c - 0.3).abs() < 1e-15);
        assert_eq!(residual_activations(0.0, 0.0, 0.0), (0.0, 0.0, 0.0));
        assert_eq!(residual_activations(1.0, 1.0, 1.0), (0.5, 0.5, 0.5));
    }

    #[test]
    fn residual_matches_general_solver() {
        let m = Matrix3::new(0.0, 1.0, 1.0, 1.0, 0.0, 1.0, 1.0, 1.0, 0.0);
        let lu = m.lu();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        for _ in 0..100_000 {
            let z = Vector3::new(rng.random::<f64>(), rng.random::<f64>(), rng.random::<f64>());
            let x = lu.solve(&z).unwrap();
            let (a, b, c) = residual_activations(z[0], z[1], z[2]);
            assert!((a - x[0]).abs() < 1e-12 && (b - x[1]).abs() < 1e-12 && (c - x[2]).abs() < 1e-12);
        }
    }

    fn orthogonal_model(dofs: &[Dof]) -> ControllerModel {
        let n = 6;
        let mut samples = Vec::new();
        for (k, dof) in dofs.iter().enumerate() {
            for (j, dir) in Direction::BOTH.into_iter().enumerate() {
                let mut v = vec![0.0; n];
                v[2 * k + j] = 1.0;
                samples.push(TrainingSample::direct(FeatureVector::mav(v), *dof, dir, 50.0));
            }
        }
        train(&samples, n, dofs, DecodeConfig::default()).unwrap()
    }

    #[test]
    fn decode_own_prototype_activates_one_dof() {
        let model = orthogonal_model(&Dof::ALL);
        let psi = model.dofs[&Dof::D1].proto_pos.clone();
        let out = decode(&psi, &model).unwrap();
        assert_eq!(out.per_dof[&Dof::D1].direction, Sign::Positive);
        assert_eq!(out.per_dof[&Dof::D1].angle_estimate, 50.0);
        assert_eq!(out.per_dof[&Dof::D2].direction, Sign::Rest);
        assert_eq!(out.per_dof[&Dof::D3].direction, Sign::Rest);
        let r = out.residual.unwrap();
        // z = (0, 1, 1) → d1 = 1, d2 = d3 = 0
        assert_eq!(r.values, [1.0, 0.0, 0.0]);
    }

    #[test]
    fn two_dof_model_omits_residual() {
        let model = orthogonal_model(&[Dof::D1, Dof::D3]);
        let out = decode(&QuantumState::basis(6, 0), &model).unwrap();
        assert!(out.residual.is_none());
        assert!(out.diagnostics.notes[0].contains("three DOFs"));
    }

    #[test]
    fn zero_features_decode_as_rest() {
        let model = orthogonal_model(&Dof::ALL);
        let out = decode_features(&FeatureVector::mav(vec![0.0; 6]), &model).unwrap();
        assert!(out.diagnostics.rest_input);
        assert!(out.per_dof.values().all(|d| d.direction == Sign::Rest && d.angle_estimate == 0.0));
        assert!(decode_features(&FeatureVector::mav(vec![1.0; 5]), &model).is_err());
    }

    #[test]
    fn rest_calibration() {
        let model = orthogonal_model(&[Dof::D1]);
        let rest = vec![state(&[1.0, 0.9, 1.0, 1.0, 1.0, 1.0]), state(&[1.0; 6])];
        let t = calibrate_rest_threshold(&model, &rest, 1.0).unwrap().unwrap();
        let expected = (1.0 - 0.81) / (5.0 + 0.81);
        assert!((t - expected).abs() < 1e-12);
        assert_eq!(calibrate_rest_threshold(&model, &[], 0.95).unwrap(), None);
    }
}
