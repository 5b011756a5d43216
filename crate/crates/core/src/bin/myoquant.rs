use std::fs;
use std::fmt::Write as _;
use std::io::Write as _;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use myoquant::decode::{calibrate_rest_threshold, decode_batch};
use myoquant::learn::{load_model, overlap_curve, save_model, train};
use myoquant::pipeline::{
    evaluate, load_feature_dataset, load_recording, render_decode_csv, render_summary_csv, render_text,
    run_experiment, synthetic_datasets, write_feature_dataset, write_recording, ExperimentConfig, ExperimentReport,
    ModelSummary, SizeResult,
};
use myoquant::signal::{extract_features, FeatureKind};
use myoquant::synth::generate_raw_emg;
use myoquant::{Error, QuantumState, Result};

#[derive(Parser)]
#[command(name = "myoquant", version, about = "Quantum-inspired simultaneous and proportional myoelectric control")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Clone)]
struct ConfigArgs {
    /// Flat TOML config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Override a config key, e.g. `--set noise_sigma=0.1`. Repeatable.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    #[arg(long)]
    seed: Option<u64>,
}

impl ConfigArgs {
    fn resolve(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(p) => ExperimentConfig::load(p)?,
            None => ExperimentConfig::default(),
        };
        for kv in &self.overrides {
            let (k, v) = kv
                .split_once('=')
                .ok_or_else(|| Error::InvalidArgument(format!("--set expects KEY=VALUE, got {kv:?}")))?;
            cfg.set(k.trim(), v.trim())?;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic training and combined-DOF test datasets.
    Synth {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        train_out: PathBuf,
        #[arg(long)]
        test_out: PathBuf,
        /// Also write raw EMG whose windows reproduce the test features.
        #[arg(long)]
        raw_out: Option<PathBuf>,
    },
    /// Learn a controller model from single-DOF training rows.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        model: PathBuf,
        /// Set the rest threshold to this quantile of |f - e| over rest rows.
        #[arg(long, value_name = "QUANTILE")]
        calibrate_rest: Option<f64>,
    },
    /// Decode feature rows or a raw recording into per-window angles.
    Decode {
        #[arg(long)]
        model: PathBuf,
        #[arg(long, conflicts_with = "raw", required_unless_present = "raw")]
        features: Option<PathBuf>,
        #[arg(long)]
        raw: Option<PathBuf>,
        #[command(flatten)]
        cfg: ConfigArgs,
        /// Output CSV; stdout when omitted.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Score a trained model on a labelled test set.
    Evaluate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        test: PathBuf,
        /// Text report; stdout when omitted.
        #[arg(long)]
        report: Option<PathBuf>,
        #[arg(long)]
        summary_csv: Option<PathBuf>,
        #[arg(long)]
        decode_csv: Option<PathBuf>,
    },
    /// Train at every configured size and evaluate; synthetic data when no files are given.
    Experiment {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, requires = "test")]
        train: Option<PathBuf>,
        #[arg(long, requires = "train")]
        test: Option<PathBuf>,
        #[arg(long)]
        out_dir: PathBuf,
    },
    /// Prototype overlap per DOF as the per-action training size grows.
    LearningCurve {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        data: PathBuf,
        #[arg(long, value_delimiter = ',', required = true)]
        sizes: Vec<usize>,
    },
    /// Print operator spectra, overlaps, minimum eigenvalue of P0 and angle maxima.
    InspectModel {
        #[arg(long)]
        model: PathBuf,
    },
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(if e.use_stderr() { 1 } else { 0 });
        }
    };
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn write_out(path: Option<&Path>, text: &str) -> Result<()> {
    match path {
        Some(p) => fs::write(p, text).map_err(|e| Error::io(p, e)),
        None => {
            let mut out = std::io::stdout().lock();
            match out.write_all(text.as_bytes()).and_then(|_| out.flush()) {
                Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(Error::io("<stdout>", e)),
                _ => Ok(()),
            }
        }
    }
}

fn run(command: Command) -> Result<()> {
    match command {
        Command::Synth {
            cfg,
            train_out,
            test_out,
            raw_out,
        } => {
            let cfg = cfg.resolve()?;
            let (tr, te) = synthetic_datasets(&cfg)?;
            write_feature_dataset(&train_out, &tr)?;
            write_feature_dataset(&test_out, &te)?;
            if let Some(raw) = raw_out {
                let windows: Vec<_> = te.rows.iter().map(|r| r.angles).collect();
                let rec = generate_raw_emg(&cfg.mixing_model(), &windows, cfg.sample_rate, cfg.window_ms)?;
                write_recording(&raw, &rec)?;
            }
            log::info!("wrote {} training and {} test rows", tr.len(), te.len());
            Ok(())
        }
        Command::Train {
            cfg,
            data,
            model,
            calibrate_rest,
        } => {
            let cfg = cfg.resolve()?;
            let ds = load_feature_dataset(&data)?;
            let (samples, rest) = ds.training_samples()?;
            let mut m = train(&samples, ds.n_channels, &cfg.dofs, cfg.decode_config())?;
            if let Some(q) = calibrate_rest {
                let states: Vec<QuantumState> = rest
                    .iter()
                    .filter(|f| !f.is_zero())
                    .map(|f| QuantumState::from_unnormalized(&f.values))
                    .collect::<Result<_>>()?;
                match calibrate_rest_threshold(&m, &states, q)? {
                    Some(t) => {
                        log::info!("rest threshold calibrated to {t} from {} rest rows", states.len());
                        m.decode_config.rest_threshold = t;
                    }
                    None => log::warn!("no rest rows in {}; keeping rest threshold {}", data.display(), cfg.rest_threshold),
                }
            }
            save_model(&m, &model)
        }
        Command::Decode {
            model,
            features,
            raw,
            cfg,
            out,
        } => {
            let cfg = cfg.resolve()?;
            let m = load_model(&model)?;
            let fvs = match (features, raw) {
                (Some(p), _) => load_feature_dataset(&p)?.features(),
                (None, Some(p)) => {
                    let rec = load_recording(&p, cfg.sample_rate)?;
                    extract_features(&rec, cfg.window_ms, cfg.step_ms, FeatureKind::Mav, cfg.deadband)?
                }
                (None, None) => unreachable!("clap requires one input"),
            };
            if let Some(f) = fvs.first() {
                if f.len() != m.n_channels {
                    return Err(Error::DimensionMismatch {
                        expected: m.n_channels,
                        got: f.len(),
                    });
                }
            }
            let decoded = decode_batch(&fvs, &m)?;
            write_out(out.as_deref(), &render_decode_csv(&m.dof_ids(), &decoded))
        }
        Command::Evaluate {
            cfg,
            model,
            test,
            report,
            summary_csv,
            decode_csv,
        } => {
            let cfg = cfg.resolve()?;
            let m = load_model(&model)?;
            let te = load_feature_dataset(&test)?;
            let evaluation = evaluate(&m, &te, cfg.block_rule)?;
            let dofs = evaluation.pair.dofs.clone();
            let rep = ExperimentReport {
                config_hash: cfg.hash(),
                train_source: model.display().to_string(),
                test_source: te.source.clone(),
                n_test_windows: te.len(),
                n_test_blocks: te.block_ranges().len(),
                results: vec![SizeResult {
                    per_action: None,
                    model: ModelSummary::of(&m),
                    evaluation,
                }],
                config: cfg,
            };
            write_out(report.as_deref(), &render_text(&rep))?;
            if let Some(p) = summary_csv {
                write_out(Some(&p), &render_summary_csv(&rep))?;
            }
            if let Some(p) = decode_csv {
                write_out(Some(&p), &render_decode_csv(&dofs, &rep.results[0].evaluation.decoded))?;
            }
            Ok(())
        }
        Command::Experiment {
            cfg,
            train,
            test,
            out_dir,
        } => {
            let cfg = cfg.resolve()?;
            let (tr, te) = match (train, test) {
                (Some(a), Some(b)) => (load_feature_dataset(&a)?, load_feature_dataset(&b)?),
                _ => synthetic_datasets(&cfg)?,
            };
            let rep = run_experiment(&cfg, &tr, &te)?;
            fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
            write_out(Some(&out_dir.join("report.txt")), &render_text(&rep))?;
            write_out(Some(&out_dir.join("summary.csv")), &render_summary_csv(&rep))?;
            write_out(Some(&out_dir.join("config.toml")), &cfg.to_toml())?;
            for r in &rep.results {
                let name = format!("decode_{}.csv", r.per_action.unwrap_or(0));
                write_out(
                    Some(&out_dir.join(name)),
                    &render_decode_csv(&r.evaluation.pair.dofs, &r.evaluation.decoded),
                )?;
            }
            write_out(None, &render_text(&rep))
        }
        Command::LearningCurve { cfg, data, sizes } => {
            let cfg = cfg.resolve()?;
            let ds = load_feature_dataset(&data)?;
            let (samples, _) = ds.training_samples()?;
            let curve = overlap_curve(&samples, &sizes, ds.n_channels, &cfg.dofs)?;
            let mut out = String::from("per_action");
            for d in curve.keys() {
                out.push_str(&format!(",overlap_{d}"));
            }
            out.push('\n');
            for (i, k) in sizes.iter().enumerate() {
                out.push_str(&k.to_string());
                for v in curve.values() {
                    out.push_str(&format!(",{}", v[i]));
                }
                out.push('\n');
            }
            write_out(None, &out)
        }
        Command::InspectModel { model } => {
            let m = load_model(&model)?;
            let fmt = |v: &[f64]| v.iter().map(|x| format!("{x:.6}")).collect::<Vec<_>>().join(" ");
            let mut out = String::new();
            let _ = writeln!(out, "channels: {}", m.n_channels);
            let _ = writeln!(
                out,
                "rest threshold: {}, overlap epsilon: {}",
                m.decode_config.rest_threshold, m.decode_config.overlap_epsilon
            );
            for (dof, ops) in &m.dofs {
                let _ = writeln!(out, "{dof}:");
                let _ = writeln!(out, "  overlap: {:.6}", ops.overlap);
                let _ = writeln!(out, "  theta max: +{} / -{}", ops.theta_pos_max, ops.theta_neg_max);
                let _ = writeln!(out, "  spectrum P+: {}", fmt(&ops.p_pos.eigenvalues()));
                let _ = writeln!(out, "  spectrum P-: {}", fmt(&ops.p_neg.eigenvalues()));
                let _ = writeln!(out, "  spectrum P0: {}", fmt(&ops.p_zero.eigenvalues()));
                let min = ops.min_eigenvalue_p_zero();
                let note = if min < 0.0 { " (P0 is not positive semidefinite)" } else { "" };
                let _ = writeln!(out, "  min eigenvalue P0: {min:.6e}{note}");
            }
            write_out(None, &out)
        }
    }
}
