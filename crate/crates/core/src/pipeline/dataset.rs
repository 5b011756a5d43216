//! Feature-dataset and raw-recording CSV files.
//!
//! Feature datasets have the header `ch1..chN,d1_angle,d2_angle,d3_angle,phase,block`.
//! Angle columns that are missing read as 0, a missing `phase` reads as
//! `direct` and a missing `block` as 0. Block ids must form contiguous runs.

use std::fs::File;
use std::ops::Range;
use std::path::Path;

use crate::error::{Error, Result};
use crate::learn::TrainingSample;
use crate::signal::{EmgRecording, FeatureKind, FeatureVector};
use crate::synth::TestSet;
use crate::types::{Direction, Dof, JointAngles, MovementPhase};

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetRow {
    pub features: Vec<f64>,
    pub angles: JointAngles,
    pub phase: MovementPhase,
    pub block: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct FeatureDataset {
    pub rows: Vec<DatasetRow>,
    pub n_channels: usize,
    pub feature_kind: FeatureKind,
    pub source: String,
}

enum Column {
    Channel(usize),
    Angle(Dof),
    Phase,
    Block,
}

fn parse_header(path: &str, header: &csv::StringRecord) -> Result<(Vec<Column>, usize)> {
    let schema = |message: String| Error::Schema {
        path: path.to_string(),
        line: 1,
        message,
    };
    let mut cols = Vec::with_capacity(header.len());
    let mut channels = Vec::new();
    for name in header.iter() {
        let name = name.trim();
        let lower = name.to_ascii_lowercase();
        let col = if let Some(num) = lower.strip_prefix("ch") {
            let k: usize = num.parse().map_err(|_| schema(format!("bad channel column {name:?}")))?;
            if k == 0 {
                return Err(schema("channel columns are numbered from ch1".into()));
            }
            channels.push(k);
            Column::Channel(k - 1)
        } else {
            match lower.as_str() {
                "d1_angle" => Column::Angle(Dof::D1),
                "d2_angle" => Column::Angle(Dof::D2),
                "d3_angle" => Column::Angle(Dof::D3),
                "phase" => Column::Phase,
                "block" => Column::Block,
                _ => return Err(schema(format!("unknown column {name:?}"))),
            }
        };
        cols.push(col);
    }
    let mut sorted = channels.clone();
    sorted.sort_unstable();
    if sorted.is_empty() || sorted.iter().enumerate().any(|(i, k)| *k != i + 1) {
        return Err(schema(format!("channel columns must be ch1..chN, got {channels:?}")));
    }
    Ok((cols, sorted.len()))
}

pub fn load_feature_dataset(path: &Path) -> Result<FeatureDataset> {
    let p = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(file);
    let header = reader.headers().map_err(|e| Error::Parse {
        path: p.clone(),
        line: 1,
        message: e.to_string(),
    })?;
    let (cols, n_channels) = parse_header(&p, header)?;

    let mut rows = Vec::new();
    let mut seen_blocks: Vec<u64> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: p.clone(),
            line: e.position().map(|pos| pos.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|pos| pos.line()).unwrap_or(0);
        if record.len() != cols.len() {
            return Err(Error::Schema {
                path: p.clone(),
                line,
                message: format!("expected {} fields, found {}", cols.len(), record.len()),
            });
        }
        let num = |s: &str, what: &str| -> Result<f64> {
            let v: f64 = s.parse().map_err(|_| Error::Parse {
                path: p.clone(),
                line,
                message: format!("{what}: {s:?} is not a number"),
            })?;
            if v.is_finite() {
                Ok(v)
            } else {
                Err(Error::Parse {
                    path: p.clone(),
                    line,
                    message: format!("{what}: value must be finite"),
                })
            }
        };
        let mut row = DatasetRow {
            features: vec![0.0; n_channels],
            angles: JointAngles::zero(),
            phase: MovementPhase::Direct,
            block: 0,
        };
        for (col, field) in cols.iter().zip(record.iter()) {
            match col {
                Column::Channel(i) => row.features[*i] = num(field, &format!("ch{}", i + 1))?,
                Column::Angle(d) => row.angles.set(*d, num(field, &format!("{d} angle"))?),
                Column::Phase => {
                    row.phase = field.parse().map_err(|e: Error| Error::Parse {
                        path: p.clone(),
                        line,
                        message: e.to_string(),
                    })?
                }
                Column::Block => {
                    row.block = field.parse().map_err(|_| Error::Parse {
                        path: p.clone(),
                        line,
                        message: format!("block id {field:?} is not a non-negative integer"),
                    })?
                }
            }
        }
        if seen_blocks.last() != Some(&row.block) {
            if seen_blocks.contains(&row.block) {
                return Err(Error::Schema {
                    path: p.clone(),
                    line,
                    message: format!("block {} reappears after other blocks; block ids must be contiguous", row.block),
                });
            }
            seen_blocks.push(row.block);
        }
        rows.push(row);
    }

    if rows.is_empty() {
        log::warn!("{p}: dataset has a header but no rows");
    }
    let returns = rows.iter().filter(|r| r.phase == MovementPhase::Return).count();
    log::info!("{p}: {} rows ({} direct, {returns} return), {n_channels} channels", rows.len(), rows.len() - returns);
    Ok(FeatureDataset {
        rows,
        n_channels,
        feature_kind: FeatureKind::Mav,
        source: p,
    })
}

pub fn write_feature_dataset(path: &Path, ds: &FeatureDataset) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let mut header: Vec<String> = (1..=ds.n_channels).map(|k| format!("ch{k}")).collect();
    header.extend(["d1_angle", "d2_angle", "d3_angle", "phase", "block"].map(String::from));
    w.write_record(&header).map_err(|e| csv_io(path, e))?;
    for row in &ds.rows {
        let mut rec: Vec<String> = row.features.iter().map(|v| v.to_string()).collect();
        rec.extend(row.angles.0.iter().map(|v| v.to_string()));
        rec.push(row.phase.as_str().to_string());
        rec.push(row.block.to_string());
        w.write_record(&rec).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::io(path, std::io::Error::other(format!("{other:?}"))),
    }
}

impl FeatureDataset {
    pub fn from_training(samples: &[TrainingSample], n_channels: usize, source: impl Into<String>) -> Self {
        let mut block = 0u64;
        let mut last = None;
        let rows = samples
            .iter()
            .map(|s| {
                let key = (s.dof, s.direction, s.phase);
                if last.is_some() && last != Some(key) {
                    block += 1;
                }
                last = Some(key);
                DatasetRow {
                    features: s.features.values.clone(),
                    angles: JointAngles::single(s.dof, s.direction.signum() * s.angle),
                    phase: s.phase,
                    block,
                }
            })
            .collect();
        FeatureDataset {
            rows,
            n_channels,
            feature_kind: FeatureKind::Mav,
            source: source.into(),
        }
    }

    pub fn from_test_set(test: &TestSet, n_channels: usize, source: impl Into<String>) -> Self {
        let mut rows = Vec::with_capacity(test.features.len());
        for (b, range) in test.blocks.iter().enumerate() {
            for i in range.clone() {
                rows.push(DatasetRow {
                    features: test.features[i].values.clone(),
                    angles: test.truth[i],
                    phase: MovementPhase::Direct,
                    block: b as u64,
                });
            }
        }
        FeatureDataset {
            rows,
            n_channels,
            feature_kind: FeatureKind::Mav,
            source: source.into(),
        }
    }

    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    pub fn features(&self) -> Vec<FeatureVector> {
        self.rows
            .iter()
            .map(|r| FeatureVector::new(r.features.clone(), self.feature_kind))
            .collect()
    }

    /// Split rows into single-DOF training samples and rest windows (all angles
    /// zero). Rows with more than one active DOF are rejected.
    pub fn training_samples(&self) -> Result<(Vec<TrainingSample>, Vec<FeatureVector>)> {
        let mut samples = Vec::new();
        let mut rest = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            let active: Vec<Dof> = row.angles.active().collect();
            match active.as_slice() {
                [] => rest.push(FeatureVector::new(row.features.clone(), self.feature_kind)),
                [dof] => {
                    let angle = row.angles.get(*dof);
                    samples.push(TrainingSample {
                        features: FeatureVector::new(row.features.clone(), self.feature_kind),
                        dof: *dof,
                        direction: Direction::of_angle(angle).expect("nonzero"),
                        angle: angle.abs(),
                        phase: row.phase,
                    });
                }
                many => {
                    return Err(Error::Schema {
                        path: self.source.clone(),
                        line: i as u64 + 2,
                        message: format!("training rows must activate a single DOF, found {many:?}"),
                    })
                }
            }
        }
        Ok((samples, rest))
    }

    /// Contiguous row ranges of each block, in file order.
    pub fn block_ranges(&self) -> Vec<Range<usize>> {
        let mut out: Vec<Range<usize>> = Vec::new();
        for (i, row) in self.rows.iter().enumerate() {
            match out.last_mut() {
                Some(r) if self.rows[r.start].block == row.block => r.end = i + 1,
                _ => out.push(i..i + 1),
            }
        }
        out
    }
}

/// Raw EMG: one row per time sample, header `ch1..chN`.
pub fn load_recording(path: &Path, sample_rate: f64) -> Result<EmgRecording> {
    let p = path.display().to_string();
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().flexible(true).trim(csv::Trim::All).from_reader(file);
    let header = reader.headers().map_err(|e| Error::Parse {
        path: p.clone(),
        line: 1,
        message: e.to_string(),
    })?;
    let (cols, n) = parse_header(&p, header)?;
    let order: Vec<usize> = cols
        .iter()
        .map(|c| match c {
            Column::Channel(i) => Ok(*i),
            _ => Err(Error::Schema {
                path: p.clone(),
                line: 1,
                message: "raw recordings may only contain ch1..chN columns".into(),
            }),
        })
        .collect::<Result<_>>()?;
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| Error::Parse {
            path: p.clone(),
            line: e.position().map(|pos| pos.line()).unwrap_or(0),
            message: e.to_string(),
        })?;
        let line = record.position().map(|pos| pos.line()).unwrap_or(0);
        if record.len() != n {
            return Err(Error::Schema {
                path: p.clone(),
                line,
                message: format!("expected {n} fields, found {}", record.len()),
            });
        }
        let mut row = vec![0.0; n];
        for (i, field) in order.iter().zip(record.iter()) {
            row[*i] = field.parse().map_err(|_| Error::Parse {
                path: p.clone(),
                line,
                message: format!("{field:?} is not a number"),
            })?;
        }
        samples.extend(row);
    }
    EmgRecording::new(samples, n, sample_rate)
}

pub fn write_recording(path: &Path, rec: &EmgRecording) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
    let header: Vec<String> = (1..=rec.n_channels()).map(|k| format!("ch{k}")).collect();
    w.write_record(&header).map_err(|e| csv_io(path, e))?;
    for row in rec.samples().chunks(rec.n_channels()) {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(|e| csv_io(path, e))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}
