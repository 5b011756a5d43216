//! Synthetic datasets from a linear mixing model.
//!
//! A window's feature vector is `mixing · activation + noise`, where the
//! activation has one entry per DOF direction: `|angle|` in the column of the
//! active direction and 0 in the opposite one. Negative results are clipped to
//! 0 because MAV cannot be negative. Every random draw comes from a ChaCha
//! stream derived from the model seed, one stream per action or test block,
//! so outputs are reproducible and independent of generation order.

use std::ops::Range;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};
use crate::learn::TrainingSample;
use crate::signal::{EmgRecording, FeatureVector};
use crate::types::{Direction, Dof, JointAngles, MovementPhase};

const TEST_STREAM_BASE: u64 = 1 << 32;
const RAW_STREAM_BASE: u64 = 1 << 40;

/// Default training angle range in degrees.
pub const DEFAULT_ANGLE_RANGE: (f64, f64) = (5.0, 60.0);

/// Linear generative model of MAV features.
#[derive(Debug, Clone, PartialEq)]
pub struct MixingModel {
    dofs: Vec<Dof>,
    /// n_channels × 2K; columns ordered (dof₀+, dof₀−, dof₁+, dof₁−, …).
    mixing: DMatrix<f64>,
    pub noise_sigma: f64,
    pub seed: u64,
}

impl MixingModel {
    pub fn new(dofs: Vec<Dof>, mixing: DMatrix<f64>, noise_sigma: f64, seed: u64) -> Result<Self> {
        if dofs.is_empty() || mixing.ncols() != 2 * dofs.len() {
            return Err(Error::InvalidArgument(format!(
                "mixing matrix needs 2 columns per DOF: {} DOFs, {} columns",
                dofs.len(),
                mixing.ncols()
            )));
        }
        if mixing.nrows() == 0 {
            return Err(Error::InvalidArgument("mixing matrix has no channels".into()));
        }
        if mixing.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::InvalidArgument("mixing entries must be finite and non-negative".into()));
        }
        for (c, col) in mixing.column_iter().enumerate() {
            if !col.iter().any(|v| *v > 0.0) {
                return Err(Error::InvalidArgument(format!("mixing column {c} has no positive entry")));
            }
        }
        let units: Vec<_> = mixing.column_iter().map(|c| c.normalize()).collect();
        let all_parallel = units
            .iter()
            .all(|u| (u.dot(&units[0]) - 1.0).abs() < 1e-12);
        if all_parallel {
            return Err(Error::InvalidArgument("mixing columns are all parallel".into()));
        }
        if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
            return Err(Error::InvalidArgument(format!("noise sigma must be >= 0, got {noise_sigma}")));
        }
        let mut seen = dofs.clone();
        seen.sort();
        seen.dedup();
        if seen.len() != dofs.len() {
            return Err(Error::InvalidArgument("duplicate DOF in mixing model".into()));
        }
        Ok(MixingModel {
            dofs,
            mixing,
            noise_sigma,
            seed,
        })
    }

    /// Eight channels, all three DOFs. Each direction has its own dominant
    /// channel pair; D3 columns are weaker and share channels with D1, as a
    /// deep muscle group masked by superficial flexors and extensors would.
    pub fn masking_default(noise_sigma: f64, seed: u64) -> Self {
        #[rustfmt::skip]
        let cols: [[f64; 8]; 6] = [
            [1.00, 0.80, 0.15, 0.05, 0.00, 0.00, 0.05, 0.20], // D1+ flexion
            [0.00, 0.05, 0.20, 0.10, 1.00, 0.80, 0.15, 0.05], // D1- extension
            [0.30, 0.10, 0.90, 0.30, 0.10, 0.00, 0.00, 0.10], // D2+ radial
            [0.00, 0.10, 0.00, 0.10, 0.30, 0.10, 0.90, 0.30], // D2- ulnar
            [0.30, 0.20, 0.50, 0.10, 0.05, 0.05, 0.00, 0.10], // D3+ pronation
            [0.05, 0.00, 0.10, 0.05, 0.30, 0.20, 0.10, 0.50], // D3- supination
        ];
        Self::from_columns(&cols, 0.02, noise_sigma, seed)
    }

    /// Eight channels, all three DOFs, every direction on its own channels
    /// over a small common floor. Prototype overlaps are about 0.014.
    pub fn separated(noise_sigma: f64, seed: u64) -> Self {
        let dominant: [&[usize]; 6] = [&[0, 1], &[4, 5], &[2], &[6], &[3], &[7]];
        let mut cols = [[0.05; 8]; 6];
        for (c, chans) in dominant.iter().enumerate() {
            for (i, &ch) in chans.iter().enumerate() {
                cols[c][ch] += if i == 0 { 1.0 } else { 0.6 };
            }
        }
        Self::from_columns(&cols, 0.02, noise_sigma, seed)
    }

    fn from_columns(cols: &[[f64; 8]; 6], scale: f64, noise_sigma: f64, seed: u64) -> Self {
        let mixing = DMatrix::from_fn(8, 6, |r, c| cols[c][r] * scale);
        MixingModel::new(Dof::ALL.to_vec(), mixing, noise_sigma, seed).expect("built-in mixing is valid")
    }

    pub fn with_seed(mut self, seed: u64) -> Self {
        self.seed = seed;
        self
    }

    pub fn with_noise(mut self, noise_sigma: f64) -> Self {
        self.noise_sigma = noise_sigma;
        self
    }

    pub fn dofs(&self) -> &[Dof] {
        &self.dofs
    }

    pub fn n_channels(&self) -> usize {
        self.mixing.nrows()
    }

    pub fn mixing(&self) -> &DMatrix<f64> {
        &self.mixing
    }

    pub fn column_index(&self, dof: Dof, direction: Direction) -> Option<usize> {
        let k = self.dofs.iter().position(|d| *d == dof)?;
        Some(2 * k + usize::from(direction == Direction::Negative))
    }

    pub fn column(&self, dof: Dof, direction: Direction) -> Option<Vec<f64>> {
        self.column_index(dof, direction)
            .map(|c| self.mixing.column(c).iter().copied().collect())
    }

    /// Noise-free features for the given angles.
    pub fn mean_features(&self, angles: &JointAngles) -> Result<Vec<f64>> {
        let mut out = vec![0.0; self.n_channels()];
        for dof in angles.active() {
            let angle = angles.get(dof);
            let dir = Direction::of_angle(angle).expect("active angle is nonzero");
            let c = self.column_index(dof, dir).ok_or_else(|| {
                Error::InvalidArgument(format!("mixing model has no columns for {dof}"))
            })?;
            for (o, m) in out.iter_mut().zip(self.mixing.column(c).iter()) {
                *o += angle.abs() * m;
            }
        }
        Ok(out)
    }

    fn stream(&self, stream: u64) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(stream);
        rng
    }
}

/// Feature windows with their ground truth.
#[derive(Debug, Clone, PartialEq)]
pub struct GeneratedFeatures {
    pub features: Vec<FeatureVector>,
    pub truth: Vec<JointAngles>,
    /// Number of negative feature entries clipped to 0.
    pub clipped: usize,
}

fn noisy_features<R: Rng>(model: &MixingModel, angles: &JointAngles, rng: &mut R, clipped: &mut usize) -> Result<FeatureVector> {
    let mut v = model.mean_features(angles)?;
    if model.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, model.noise_sigma).expect("sigma validated");
        for x in v.iter_mut() {
            *x += normal.sample(rng);
            if *x < 0.0 {
                *x = 0.0;
                *clipped += 1;
            }
        }
    }
    Ok(FeatureVector::mav(v))
}

/// `count` windows at fixed angles, drawn from `rng`.
pub fn generate_features<R: Rng>(model: &MixingModel, angles: &JointAngles, count: usize, rng: &mut R) -> Result<GeneratedFeatures> {
    let mut clipped = 0;
    let features = (0..count)
        .map(|_| noisy_features(model, angles, rng, &mut clipped))
        .collect::<Result<Vec<_>>>()?;
    Ok(GeneratedFeatures {
        features,
        truth: vec![*angles; count],
        clipped,
    })
}

/// `per_action_count` single-DOF direct-phase samples for each direction of
/// each DOF in the model, angles uniform in `angle_range`. Samples are grouped
/// by action; a smaller count yields a per-action prefix of a larger one.
pub fn generate_training_set(model: &MixingModel, per_action_count: usize, angle_range: (f64, f64)) -> Result<Vec<TrainingSample>> {
    generate_training_set_for(model, model.dofs(), per_action_count, angle_range)
}

pub fn generate_training_set_for(
    model: &MixingModel,
    dofs: &[Dof],
    per_action_count: usize,
    angle_range: (f64, f64),
) -> Result<Vec<TrainingSample>> {
    let (lo, hi) = angle_range;
    if per_action_count == 0 {
        return Err(Error::InvalidArgument("per-action count must be at least 1".into()));
    }
    if !(lo > 0.0 && lo < hi && hi.is_finite()) {
        return Err(Error::InvalidArgument(format!("angle range must satisfy 0 < min < max, got ({lo}, {hi})")));
    }
    let mut out = Vec::with_capacity(per_action_count * 2 * dofs.len());
    for &dof in dofs {
        for direction in Direction::BOTH {
            let col = model
                .column_index(dof, direction)
                .ok_or_else(|| Error::InvalidArgument(format!("mixing model has no columns for {dof}")))?;
            let mut rng = model.stream(col as u64 + 1);
            let mut clipped = 0;
            for _ in 0..per_action_count {
                let angle = rng.random_range(lo..hi);
                let angles = JointAngles::single(dof, direction.signum() * angle);
                let features = noisy_features(model, &angles, &mut rng, &mut clipped)?;
                out.push(TrainingSample {
                    features,
                    dof,
                    direction,
                    angle,
                    phase: MovementPhase::Direct,
                });
            }
            if clipped > 0 {
                log::debug!("synth: clipped {clipped} negative feature entries for {dof} {direction}");
            }
        }
    }
    Ok(out)
}

/// One test block: the per-window joint angles.
#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioBlock {
    pub angles: Vec<JointAngles>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticScenario {
    pub blocks: Vec<ScenarioBlock>,
}

impl SyntheticScenario {
    pub fn single(angles: JointAngles, count: usize) -> Self {
        SyntheticScenario {
            blocks: vec![ScenarioBlock {
                angles: vec![angles; count],
            }],
        }
    }

    /// `n_blocks` blocks of simultaneous activation of every DOF in `dofs`,
    /// `total_windows` windows split as evenly as possible. Each block draws
    /// one direction per DOF and a centre angle uniformly in
    /// `[min + jitter, max − jitter]`; every window then varies the centre by
    /// a uniform offset in `[−jitter, jitter]`.
    pub fn combined(dofs: &[Dof], n_blocks: usize, total_windows: usize, angle_range: (f64, f64), jitter: f64, seed: u64) -> Result<Self> {
        let (lo, hi) = angle_range;
        if n_blocks == 0 || total_windows < n_blocks {
            return Err(Error::InvalidArgument(format!(
                "need at least one window per block ({total_windows} windows, {n_blocks} blocks)"
            )));
        }
        if !(jitter >= 0.0 && lo > 0.0 && lo + jitter < hi - jitter) {
            return Err(Error::InvalidArgument(format!(
                "angle range ({lo}, {hi}) too narrow for jitter {jitter}"
            )));
        }
        let base = total_windows / n_blocks;
        let extra = total_windows % n_blocks;
        let mut blocks = Vec::with_capacity(n_blocks);
        for b in 0..n_blocks {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let centres: Vec<(Dof, f64)> = dofs
                .iter()
                .map(|d| {
                    let sign = if rng.random::<bool>() { 1.0 } else { -1.0 };
                    (*d, sign * rng.random_range(lo + jitter..hi - jitter))
                })
                .collect();
            let len = base + usize::from(b < extra);
            let angles = (0..len)
                .map(|_| {
                    let mut a = JointAngles::zero();
                    for (d, c) in &centres {
                        let offset = if jitter > 0.0 { rng.random_range(-jitter..=jitter) } else { 0.0 };
                        a.set(*d, c + c.signum() * offset);
                    }
                    a
                })
                .collect();
            blocks.push(ScenarioBlock { angles });
        }
        Ok(SyntheticScenario { blocks })
    }

    /// 55 blocks, 8216 windows, D1 and D3 moving together.
    pub fn standard(angle_range: (f64, f64), seed: u64) -> Self {
        SyntheticScenario::combined(&[Dof::D1, Dof::D3], 55, 8216, angle_range, 2.0, seed).expect("default scenario is valid")
    }

    pub fn n_windows(&self) -> usize {
        self.blocks.iter().map(|b| b.angles.len()).sum()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestSet {
    pub features: Vec<FeatureVector>,
    pub truth: Vec<JointAngles>,
    pub blocks: Vec<Range<usize>>,
    pub clipped: usize,
}

pub fn generate_test_scenario(model: &MixingModel, scenario: &SyntheticScenario) -> Result<TestSet> {
    let mut features = Vec::with_capacity(scenario.n_windows());
    let mut truth = Vec::with_capacity(scenario.n_windows());
    let mut blocks = Vec::with_capacity(scenario.blocks.len());
    let mut clipped = 0;
    for (b, block) in scenario.blocks.iter().enumerate() {
        let mut rng = model.stream(TEST_STREAM_BASE + b as u64);
        let start = features.len();
        for angles in &block.angles {
            features.push(noisy_features(model, angles, &mut rng, &mut clipped)?);
            truth.push(*angles);
        }
        blocks.push(start..features.len());
    }
    Ok(TestSet {
        features,
        truth,
        blocks,
        clipped,
    })
}

/// Raw multi-channel EMG whose per-window MAV tracks the mixing model.
///
/// Each window is low-pass filtered Gaussian noise (first-order recursive
/// filter), scaled per channel so its expected absolute value equals the
/// window's feature value.
pub fn generate_raw_emg(model: &MixingModel, windows: &[JointAngles], sample_rate: f64, window_ms: f64) -> Result<EmgRecording> {
    let (len, _) = crate::signal::window_geometry(window_ms, window_ms, sample_rate)?;
    let n = model.n_channels();
    let mut rng = model.stream(RAW_STREAM_BASE);
    let pole = 0.5f64;
    let gain = ((1.0 + pole) / (1.0 - pole)).sqrt();
    let std_normal = Normal::new(0.0, 1.0).expect("unit normal");
    let mut clipped = 0;
    let mut samples = Vec::with_capacity(windows.len() * len * n);
    for angles in windows {
        let target = noisy_features(model, angles, &mut rng, &mut clipped)?;
        let scale: Vec<f64> = target
            .values
            .iter()
            .map(|m| m * (std::f64::consts::PI / 2.0).sqrt())
            .collect();
        let mut state: Vec<f64> = (0..n).map(|_| std_normal.sample(&mut rng)).collect();
        for _ in 0..len {
            for ch in 0..n {
                let x: f64 = std_normal.sample(&mut rng) * gain;
                state[ch] = pole * state[ch] + (1.0 - pole) * x;
                samples.push(state[ch] * scale[ch]);
            }
        }
    }
    EmgRecording::new(samples, n, sample_rate)
}
