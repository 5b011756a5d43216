//! Sliding-window segmentation of multi-channel EMG and the four classical
//! time-domain features: mean absolute value (MAV), zero crossings (ZC),
//! slope sign changes (SSC) and waveform length (WL).

use std::fmt;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Default acquisition rate in Hz.
pub const DEFAULT_SAMPLE_RATE: f64 = 1024.0;
/// Default analysis window in milliseconds.
pub const DEFAULT_WINDOW_MS: f64 = 100.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default, Serialize, Deserialize)]
pub enum FeatureKind {
    #[default]
    Mav,
    Zc,
    Ssc,
    Wl,
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FeatureKind::Mav => "MAV",
            FeatureKind::Zc => "ZC",
            FeatureKind::Ssc => "SSC",
            FeatureKind::Wl => "WL",
        })
    }
}

impl std::str::FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_uppercase().as_str() {
            "MAV" => Ok(FeatureKind::Mav),
            "ZC" => Ok(FeatureKind::Zc),
            "SSC" => Ok(FeatureKind::Ssc),
            "WL" => Ok(FeatureKind::Wl),
            other => Err(Error::InvalidArgument(format!("unknown feature kind {other:?}"))),
        }
    }
}

/// Per-channel feature values of one window, before normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    pub values: Vec<f64>,
    pub kind: FeatureKind,
}

impl FeatureVector {
    pub fn new(values: Vec<f64>, kind: FeatureKind) -> Self {
        FeatureVector { values, kind }
    }

    pub fn mav(values: Vec<f64>) -> Self {
        FeatureVector::new(values, FeatureKind::Mav)
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.values.iter().all(|v| *v == 0.0)
    }
}

/// Raw multi-channel recording, stored row-major (one row per time sample).
#[derive(Debug, Clone, PartialEq)]
pub struct EmgRecording {
    samples: Vec<f64>,
    n_channels: usize,
    sample_rate: f64,
}

impl EmgRecording {
    pub fn new(samples: Vec<f64>, n_channels: usize, sample_rate: f64) -> Result<Self> {
        if n_channels == 0 {
            return Err(Error::InvalidArgument("recording needs at least one channel".into()));
        }
        if !(sample_rate > 0.0 && sample_rate.is_finite()) {
            return Err(Error::InvalidArgument(format!("sample rate must be positive, got {sample_rate}")));
        }
        if !samples.len().is_multiple_of(n_channels) {
            return Err(Error::DimensionMismatch {
                expected: n_channels,
                got: samples.len() % n_channels,
            });
        }
        Ok(EmgRecording {
            samples,
            n_channels,
            sample_rate,
        })
    }

    pub fn from_rows(rows: &[Vec<f64>], sample_rate: f64) -> Result<Self> {
        let n_channels = rows.first().map(Vec::len).unwrap_or(0);
        let mut samples = Vec::with_capacity(rows.len() * n_channels);
        for row in rows {
            if row.len() != n_channels {
                return Err(Error::DimensionMismatch {
                    expected: n_channels,
                    got: row.len(),
                });
            }
            samples.extend_from_slice(row);
        }
        EmgRecording::new(samples, n_channels, sample_rate)
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn n_samples(&self) -> usize {
        self.samples.len() / self.n_channels
    }

    pub fn sample_rate(&self) -> f64 {
        self.sample_rate
    }

    pub fn samples(&self) -> &[f64] {
        &self.samples
    }
}

/// A contiguous block of rows, borrowed from a recording or a plain buffer.
#[derive(Debug, Clone, Copy)]
pub struct Window<'a> {
    data: &'a [f64],
    n_channels: usize,
}

impl<'a> Window<'a> {
    pub fn new(data: &'a [f64], n_channels: usize) -> Result<Self> {
        if n_channels == 0 || !data.len().is_multiple_of(n_channels) {
            return Err(Error::DimensionMismatch {
                expected: n_channels,
                got: data.len(),
            });
        }
        Ok(Window { data, n_channels })
    }

    pub fn n_rows(&self) -> usize {
        self.data.len() / self.n_channels
    }

    pub fn n_channels(&self) -> usize {
        self.n_channels
    }

    pub fn channel(&self, ch: usize) -> impl Iterator<Item = f64> + 'a {
        self.data[ch..].iter().step_by(self.n_channels).copied()
    }

    fn channel_vec(&self, ch: usize) -> Vec<f64> {
        self.channel(ch).collect()
    }

    fn require_rows(&self, needed: usize) -> Result<()> {
        if self.n_rows() < needed {
            Err(Error::InsufficientSamples {
                needed,
                got: self.n_rows(),
            })
        } else {
            Ok(())
        }
    }
}

fn ms_to_samples(ms: f64, sample_rate: f64) -> usize {
    // 1e-9 absorbs representation error such as 99.99999 for 100
    (ms * sample_rate / 1000.0 + 1e-9).floor() as usize
}

/// Window and step lengths in samples for the given durations.
pub fn window_geometry(window_ms: f64, step_ms: f64, sample_rate: f64) -> Result<(usize, usize)> {
    if window_ms.is_nan() || step_ms.is_nan() || window_ms <= 0.0 || step_ms <= 0.0 {
        return Err(Error::InvalidArgument(format!(
            "window and step must be positive (window {window_ms} ms, step {step_ms} ms)"
        )));
    }
    let len = ms_to_samples(window_ms, sample_rate);
    let step = ms_to_samples(step_ms, sample_rate);
    if len < 2 {
        return Err(Error::InvalidArgument(format!(
            "window of {window_ms} ms spans {len} samples at {sample_rate} Hz; need at least 2"
        )));
    }
    if step < 1 {
        return Err(Error::InvalidArgument(format!(
            "step of {step_ms} ms is shorter than one sample at {sample_rate} Hz"
        )));
    }
    Ok((len, step))
}

/// Split a recording into fixed-length windows. The trailing partial window is dropped.
pub fn segment_windows(rec: &EmgRecording, window_ms: f64, step_ms: f64) -> Result<Vec<Window<'_>>> {
    let (len, step) = window_geometry(window_ms, step_ms, rec.sample_rate)?;
    let n = rec.n_samples();
    if n < len {
        return Err(Error::EmptyInput(format!(
            "recording has {n} samples, shorter than one {len}-sample window"
        )));
    }
    let count = (n - len) / step + 1;
    let c = rec.n_channels;
    Ok((0..count)
        .map(|i| Window {
            data: &rec.samples[i * step * c..(i * step + len) * c],
            n_channels: c,
        })
        .collect())
}

fn per_channel(window: &Window<'_>, kind: FeatureKind, f: impl Fn(&[f64]) -> f64) -> FeatureVector {
    let values = (0..window.n_channels).map(|ch| f(&window.channel_vec(ch))).collect();
    FeatureVector::new(values, kind)
}

pub fn mav(window: &Window<'_>) -> Result<FeatureVector> {
    window.require_rows(1)?;
    Ok(per_channel(window, FeatureKind::Mav, |x| {
        x.iter().map(|v| v.abs()).sum::<f64>() / x.len() as f64
    }))
}

/// Count of sign changes between consecutive samples whose jump exceeds `deadband`.
pub fn zero_crossings(window: &Window<'_>, deadband: f64) -> Result<FeatureVector> {
    check_deadband(deadband)?;
    Ok(per_channel(window, FeatureKind::Zc, |x| {
        x.windows(2)
            .filter(|p| p[0] * p[1] < 0.0 && (p[0] - p[1]).abs() > deadband)
            .count() as f64
    }))
}

/// Count of interior strict local extrema whose two neighbour differences both exceed `deadband`.
pub fn slope_sign_changes(window: &Window<'_>, deadband: f64) -> Result<FeatureVector> {
    check_deadband(deadband)?;
    window.require_rows(3)?;
    Ok(per_channel(window, FeatureKind::Ssc, |x| {
        x.windows(3)
            .filter(|t| {
                let left = t[1] - t[0];
                let right = t[1] - t[2];
                left * right > 0.0 && left.abs() > deadband && right.abs() > deadband
            })
            .count() as f64
    }))
}

pub fn waveform_length(window: &Window<'_>) -> Result<FeatureVector> {
    window.require_rows(2)?;
    Ok(per_channel(window, FeatureKind::Wl, |x| {
        x.windows(2).map(|p| (p[1] - p[0]).abs()).sum()
    }))
}

fn check_deadband(deadband: f64) -> Result<()> {
    if deadband >= 0.0 {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("deadband must be non-negative, got {deadband}")))
    }
}

pub fn extract(window: &Window<'_>, kind: FeatureKind, deadband: f64) -> Result<FeatureVector> {
    match kind {
        FeatureKind::Mav => mav(window),
        FeatureKind::Zc => zero_crossings(window, deadband),
        FeatureKind::Ssc => slope_sign_changes(window, deadband),
        FeatureKind::Wl => waveform_length(window),
    }
}

/// Segment a recording and extract one feature per window, in window order.
pub fn extract_features(
    rec: &EmgRecording,
    window_ms: f64,
    step_ms: f64,
    kind: FeatureKind,
    deadband: f64,
) -> Result<Vec<FeatureVector>> {
    let windows = segment_windows(rec, window_ms, step_ms)?;
    windows.par_iter().map(|w| extract(w, kind, deadband)).collect()
}
