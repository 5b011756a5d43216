//! Quantum-inspired myoelectric control.
//!
//! EMG features (mean absolute value per channel) are encoded as unit-norm
//! amplitude states. Each degree of freedom (DOF) of the wrist gets a
//! "perceptron": a pair of rank-1 projectors learned from single-DOF training
//! data plus a completeness operator. Decoding computes expectation values of
//! all three operators and turns them into a signed, proportional joint angle,
//! so several DOFs are estimated from one window at once.
//!
//! Module map:
//!
//! - [`signal`]: windowing of raw multi-channel EMG and the four time-domain features
//! - [`encode`]: feature vector to [`QuantumState`]
//! - [`learn`]: prototypes, projector triples, [`ControllerModel`] and its file format
//! - [`decode`]: expectation values, angle formula, residual activation system
//! - [`metrics`]: performance indices and block-wise error accounting
//! - [`synth`]: linear-mixing synthetic datasets
//! - [`pipeline`]: CSV datasets, experiment config, experiment runner, reports

pub mod decode;
pub mod encode;
pub mod error;
pub mod learn;
pub mod metrics;
pub mod pipeline;
pub mod signal;
pub mod synth;
mod types;

pub use decode::{decode, decode_dof, decode_features, expectation, residual_activations, DecodeConfig, DecodedAction, DofDecision};
pub use encode::{encode, inner_product, QuantumState};
pub use error::{Error, Result};
pub use learn::{train, ControllerModel, DofOperators, Operator, TrainingSample};
pub use signal::{EmgRecording, FeatureKind, FeatureVector};
pub use types::{Direction, Dof, JointAngles, MovementPhase, Sign};
