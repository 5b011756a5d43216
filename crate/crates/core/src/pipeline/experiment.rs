use std::collections::BTreeMap;

use crate::decode::{decode_batch, DecodedAction};
use crate::error::{Error, Result};
use crate::learn::{per_action_prefix, train, ControllerModel};
use crate::metrics::{block_errors, majority_sign, Block, BlockErrors, BlockRule, TrajectoryPair};
use crate::synth::{generate_test_scenario, generate_training_set_for, SyntheticScenario};
use crate::types::Dof;

use super::config::ExperimentConfig;
use super::dataset::FeatureDataset;

/// Decoded test set with its scores.
#[derive(Debug, Clone)]
pub struct Evaluation {
    pub pair: TrajectoryPair,
    pub decoded: Vec<DecodedAction>,
    pub r_squared: BTreeMap<Dof, f64>,
    pub r_squared_global: f64,
    /// Global R² over the windows of correctly classified blocks only.
    pub r_squared_classified: Option<f64>,
    pub errors: BlockErrors,
    pub clamped: usize,
    pub negative_zero: usize,
}

/// Decode `test` with `model` and score the model's DOFs. A block's intended
/// direction per DOF is the majority sign of its ground truth.
pub fn evaluate(model: &ControllerModel, test: &FeatureDataset, rule: BlockRule) -> Result<Evaluation> {
    if test.is_empty() {
        return Err(Error::EmptyInput(format!("test set {} has no rows", test.source)));
    }
    if test.n_channels != model.n_channels {
        return Err(Error::DimensionMismatch {
            expected: model.n_channels,
            got: test.n_channels,
        });
    }
    let dofs = model.dof_ids();
    let decoded = decode_batch(&test.features(), model)?;

    let truth: Vec<Vec<f64>> = dofs
        .iter()
        .map(|d| test.rows.iter().map(|r| r.angles.get(*d)).collect())
        .collect();
    let estimate: Vec<Vec<f64>> = dofs
        .iter()
        .map(|d| decoded.iter().map(|a| a.signed_angle(*d).unwrap_or(0.0)).collect())
        .collect();
    let blocks = test
        .block_ranges()
        .into_iter()
        .map(|range| Block {
            intended: dofs
                .iter()
                .enumerate()
                .map(|(k, d)| (*d, majority_sign(truth[k][range.clone()].iter().copied())))
                .collect(),
            range,
        })
        .collect();
    let pair = TrajectoryPair::new(dofs, truth, estimate, blocks)?;

    let r_squared = pair.r_squared()?;
    let r_squared_global = pair.r_squared_global()?;
    let errors = block_errors(&pair, rule)?;
    let correct: Vec<usize> = (0..pair.blocks.len()).filter(|b| !errors.misclassified.contains(b)).collect();
    let r_squared_classified = if correct.is_empty() {
        None
    } else {
        pair.subset(&correct)?.r_squared_global().ok()
    };
    let flags = |f: fn(&crate::decode::DofDecision) -> bool| {
        decoded.iter().flat_map(|a| a.per_dof.values()).filter(|d| f(d)).count()
    };
    let clamped = flags(|d| d.clamped);
    let negative_zero = flags(|d| d.negative_zero);

    Ok(Evaluation {
        pair,
        decoded,
        r_squared,
        r_squared_global,
        r_squared_classified,
        errors,
        clamped,
        negative_zero,
    })
}

/// Model diagnostics reported per training size.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelSummary {
    pub overlap: BTreeMap<Dof, f64>,
    pub min_eigenvalue_p_zero: BTreeMap<Dof, f64>,
    pub theta_max: BTreeMap<Dof, (f64, f64)>,
}

impl ModelSummary {
    pub fn of(model: &ControllerModel) -> Self {
        ModelSummary {
            overlap: model.dofs.iter().map(|(d, o)| (*d, o.overlap)).collect(),
            min_eigenvalue_p_zero: model.dofs.iter().map(|(d, o)| (*d, o.min_eigenvalue_p_zero())).collect(),
            theta_max: model.dofs.iter().map(|(d, o)| (*d, (o.theta_pos_max, o.theta_neg_max))).collect(),
        }
    }
}

#[derive(Debug, Clone)]
pub struct SizeResult {
    /// `None` when the model was trained outside the experiment.
    pub per_action: Option<usize>,
    pub model: ModelSummary,
    pub evaluation: Evaluation,
}

#[derive(Debug, Clone)]
pub struct ExperimentReport {
    pub config: ExperimentConfig,
    pub config_hash: String,
    pub train_source: String,
    pub test_source: String,
    pub n_test_windows: usize,
    pub n_test_blocks: usize,
    pub results: Vec<SizeResult>,
}

/// Train one model per configured training size (a per-action prefix of
/// `train`) and evaluate each on `test`.
pub fn run_experiment(cfg: &ExperimentConfig, train_set: &FeatureDataset, test: &FeatureDataset) -> Result<ExperimentReport> {
    cfg.validate()?;
    if train_set.n_channels != test.n_channels {
        return Err(Error::DimensionMismatch {
            expected: train_set.n_channels,
            got: test.n_channels,
        });
    }
    let (samples, _rest) = train_set.training_samples()?;
    let mut results = Vec::with_capacity(cfg.training_sizes.len());
    for &size in &cfg.training_sizes {
        let ctx = || format!("experiment with {size} samples per action");
        let subset = per_action_prefix(&samples, &cfg.dofs, size).map_err(|e| e.context(ctx()))?;
        let model = train(&subset, train_set.n_channels, &cfg.dofs, cfg.decode_config()).map_err(|e| e.context(ctx()))?;
        let evaluation = evaluate(&model, test, cfg.block_rule).map_err(|e| e.context(ctx()))?;
        log::info!(
            "{size} per action: global R2 {:.4}, {} of {} blocks misclassified",
            evaluation.r_squared_global,
            evaluation.errors.misclassified.len(),
            evaluation.errors.n_blocks
        );
        results.push(SizeResult {
            per_action: Some(size),
            model: ModelSummary::of(&model),
            evaluation,
        });
    }
    Ok(ExperimentReport {
        config: cfg.clone(),
        config_hash: cfg.hash(),
        train_source: train_set.source.clone(),
        test_source: test.source.clone(),
        n_test_windows: test.len(),
        n_test_blocks: test.block_ranges().len(),
        results,
    })
}

/// Training set (largest configured size per action) and combined-DOF test
/// set drawn from the configured synthetic mixing model.
pub fn synthetic_datasets(cfg: &ExperimentConfig) -> Result<(FeatureDataset, FeatureDataset)> {
    cfg.validate()?;
    let model = cfg.mixing_model();
    let per_action = *cfg.training_sizes.iter().max().expect("validated non-empty");
    let samples = generate_training_set_for(&model, &cfg.dofs, per_action, cfg.angle_range())?;
    let scenario = SyntheticScenario::combined(
        &cfg.dofs,
        cfg.test_blocks,
        cfg.test_windows,
        cfg.angle_range(),
        cfg.jitter,
        cfg.seed,
    )?;
    let test = generate_test_scenario(&model, &scenario)?;
    let label = |kind: &str| format!("synthetic {kind} ({:?} mixing, seed {})", cfg.mixing, cfg.seed).to_lowercase();
    Ok((
        FeatureDataset::from_training(&samples, model.n_channels(), label("train")),
        FeatureDataset::from_test_set(&test, model.n_channels(), label("test")),
    ))
}
