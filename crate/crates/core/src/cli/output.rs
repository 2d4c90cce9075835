//! Trajectory CSV and comparison tables.

use std::fmt::Write as _;
use std::io::{self, Write};

use super::RunOutcome;
use crate::sim::Trajectory;

/// `t,x1..xn,u,delta,h,V,b_true,b_hat,M_b,d_true,d_hat,qp_status,cbf_margin,clf_margin`.
/// Multi-input plants get `u1..um` in place of `u`.
pub fn csv_header(state_dim: usize, input_dim: usize) -> String {
    let mut cols = vec!["t".to_string()];
    cols.extend((1..=state_dim).map(|i| format!("x{i}")));
    if input_dim == 1 {
        cols.push("u".into());
    } else {
        cols.extend((1..=input_dim).map(|i| format!("u{i}")));
    }
    for c in ["delta", "h", "V", "b_true", "b_hat", "M_b", "d_true", "d_hat", "qp_status", "cbf_margin", "clf_margin"]
    {
        cols.push(c.into());
    }
    cols.join(",")
}

/// Values use Rust's shortest round-trip formatting; unavailable values are `NaN`.
pub fn write_trajectory_csv(mut w: impl Write, trajectory: &Trajectory) -> io::Result<()> {
    writeln!(w, "{}", csv_header(trajectory.state_dim, trajectory.input_dim))?;
    let mut line = String::new();
    for r in &trajectory.records {
        line.clear();
        let _ = write!(line, "{}", r.t);
        for v in r.state.iter().chain(&r.u) {
            let _ = write!(line, ",{v}");
        }
        for v in [r.delta, r.h, r.v, r.b_true, r.b_hat, r.m_b, r.d_true, r.d_hat] {
            let _ = write!(line, ",{v}");
        }
        let _ = write!(line, ",{},{},{}", r.qp_status.as_str(), r.cbf_margin, r.clf_margin);
        writeln!(w, "{line}")?;
    }
    w.flush()
}

fn opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NaN".into(), |x| x.to_string())
}

pub fn comparison_csv(rows: &[RunOutcome], variants: &[String]) -> String {
    let mut out = String::from(
        "name,variant,min_h,first_violation_time,mean_h,tracking_rms,max_envelope_slack,non_optimal_steps,completed\n",
    );
    for (r, v) in rows.iter().zip(variants) {
        let s = &r.report;
        let _ = writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            r.name,
            v,
            s.min_h,
            opt(s.first_violation_time),
            s.mean_h,
            s.tracking_rms,
            opt(s.max_envelope_slack),
            s.infeasible_steps,
            s.completed
        );
    }
    out
}

pub fn comparison_table(rows: &[RunOutcome], variants: &[String]) -> String {
    let header = ["scenario", "variant", "min h", "first h<0 [s]", "mean h", "tracking RMS", "envelope slack", "non-opt"];
    let mut cells: Vec<Vec<String>> = vec![header.iter().map(|s| s.to_string()).collect()];
    for (r, v) in rows.iter().zip(variants) {
        let s = &r.report;
        cells.push(vec![
            r.name.clone(),
            v.clone(),
            format!("{:.4e}", s.min_h),
            s.first_violation_time.map_or_else(|| "-".into(), |t| format!("{t:.3}")),
            format!("{:.4}", s.mean_h),
            format!("{:.4}", s.tracking_rms),
            s.max_envelope_slack.map_or_else(|| "-".into(), |x| format!("{x:.3e}")),
            s.infeasible_steps.to_string(),
        ]);
    }
    let widths: Vec<usize> =
        (0..header.len()).map(|c| cells.iter().map(|row| row[c].chars().count()).max().unwrap_or(0)).collect();
    let mut out = String::new();
    for (i, row) in cells.iter().enumerate() {
        let padded: Vec<String> = row.iter().zip(&widths).map(|(c, w)| format!("{c:<w$}")).collect();
        let _ = writeln!(out, "{}", padded.join("  ").trim_end());
        if i == 0 {
            let rule: Vec<String> = widths.iter().map(|w| "-".repeat(*w)).collect();
            let _ = writeln!(out, "{}", rule.join("  "));
        }
    }
    out
}
