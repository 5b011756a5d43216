//! Plain-text and CSV renderings of experiment results. Output depends only on
//! the report contents, so equal inputs give byte-identical files.

use std::fmt::Write as _;

use crate::decode::DecodedAction;
use crate::types::Dof;

use super::experiment::{ExperimentReport, SizeResult};

fn size_label(r: &SizeResult) -> String {
    r.per_action.map_or_else(|| "model".to_string(), |n| n.to_string())
}

fn dofs_of(report: &ExperimentReport) -> Vec<Dof> {
    report
        .results
        .first()
        .map(|r| r.evaluation.pair.dofs.clone())
        .unwrap_or_else(|| report.config.dofs.clone())
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "n/a".to_string(), |x| format!("{x:.4}"))
}

pub fn render_text(report: &ExperimentReport) -> String {
    let dofs = dofs_of(report);
    let mut out = String::new();
    let _ = writeln!(out, "myoquant evaluation report");
    let _ = writeln!(out, "config_hash: {}", report.config_hash);
    let _ = writeln!(out, "seed: {}", report.config.seed);
    let _ = writeln!(out, "train: {}", report.train_source);
    let _ = writeln!(out, "test: {} ({} windows, {} blocks)", report.test_source, report.n_test_windows, report.n_test_blocks);
    let _ = writeln!(out, "block rule: {}", report.config.block_rule);
    let _ = writeln!(
        out,
        "rest threshold: {}, overlap epsilon: {}",
        report.config.rest_threshold, report.config.overlap_epsilon
    );
    for r in &report.results {
        let ev = &r.evaluation;
        let _ = writeln!(out);
        let _ = writeln!(out, "training size per action: {}", size_label(r));
        for d in &dofs {
            let (tp, tn) = r.model.theta_max[d];
            let _ = writeln!(
                out,
                "  {d}: R2 {:.4}  block errors {}  overlap {:.6}  min eig P0 {:.6}  theta max +{tp:.3} / -{tn:.3}",
                ev.r_squared[d], ev.errors.per_dof[d], r.model.overlap[d], r.model.min_eigenvalue_p_zero[d]
            );
        }
        let _ = writeln!(out, "  global R2: {:.4}", ev.r_squared_global);
        let _ = writeln!(out, "  global R2 on correctly classified blocks: {}", opt(ev.r_squared_classified));
        let _ = writeln!(
            out,
            "  misclassified blocks: {} of {} ({} with more than one DOF wrong)",
            ev.errors.misclassified.len(),
            ev.errors.n_blocks,
            ev.errors.multi_dof
        );
        let idx: Vec<String> = ev.errors.misclassified.iter().map(|b| b.to_string()).collect();
        let _ = writeln!(out, "  misclassified block indices: [{}]", idx.join(", "));
        let _ = writeln!(out, "  clamped angles: {}  negative z: {}", ev.clamped, ev.negative_zero);
    }
    out
}

/// One row per training size.
pub fn render_summary_csv(report: &ExperimentReport) -> String {
    let dofs = dofs_of(report);
    let mut header = vec!["config_hash".to_string(), "seed".into(), "per_action".into()];
    for d in &dofs {
        header.push(format!("r2_{d}"));
    }
    header.extend(["r2_global".into(), "r2_global_classified".into()]);
    for d in &dofs {
        header.push(format!("block_errors_{d}"));
    }
    header.extend(["misclassified_blocks".into(), "multi_dof_blocks".into(), "n_blocks".into()]);
    for d in &dofs {
        header.push(format!("overlap_{d}"));
        header.push(format!("min_eig_p0_{d}"));
    }
    header.push("misclassified_indices".into());

    let mut out = header.join(",");
    out.push('\n');
    for r in &report.results {
        let ev = &r.evaluation;
        let mut row = vec![report.config_hash.clone(), report.config.seed.to_string(), size_label(r)];
        row.extend(dofs.iter().map(|d| ev.r_squared[d].to_string()));
        row.push(ev.r_squared_global.to_string());
        row.push(ev.r_squared_classified.map_or_else(String::new, |v| v.to_string()));
        row.extend(dofs.iter().map(|d| ev.errors.per_dof[d].to_string()));
        row.push(ev.errors.misclassified.len().to_string());
        row.push(ev.errors.multi_dof.to_string());
        row.push(ev.errors.n_blocks.to_string());
        for d in &dofs {
            row.push(r.model.overlap[d].to_string());
            row.push(r.model.min_eigenvalue_p_zero[d].to_string());
        }
        let idx: Vec<String> = ev.errors.misclassified.iter().map(|b| b.to_string()).collect();
        row.push(idx.join(";"));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// Per-window decode output: expectations, direction, angle and flags per
/// DOF, then the residual activations when all three DOFs were decoded.
pub fn render_decode_csv(dofs: &[Dof], decoded: &[DecodedAction]) -> String {
    let mut header = vec!["window".to_string()];
    for d in dofs {
        for col in ["f", "e", "z", "direction", "angle", "clamped", "negative_z"] {
            header.push(format!("{d}_{col}"));
        }
    }
    header.extend(["residual_d1", "residual_d2", "residual_d3", "rest_input"].map(String::from));
    let mut out = header.join(",");
    out.push('\n');
    for (i, action) in decoded.iter().enumerate() {
        let mut row = vec![i.to_string()];
        for d in dofs {
            match action.per_dof.get(d) {
                Some(dec) => row.extend([
                    dec.expectation_pos.to_string(),
                    dec.expectation_neg.to_string(),
                    dec.expectation_zero.to_string(),
                    dec.direction.as_str().to_string(),
                    dec.signed_angle().to_string(),
                    u8::from(dec.clamped).to_string(),
                    u8::from(dec.negative_zero).to_string(),
                ]),
                None => row.extend(std::iter::repeat_n(String::new(), 7)),
            }
        }
        match &action.residual {
            Some(res) => row.extend(res.values.iter().map(|v| v.to_string())),
            None => row.extend(std::iter::repeat_n(String::new(), 3)),
        }
        row.push(u8::from(action.diagnostics.rest_input).to_string());
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}
