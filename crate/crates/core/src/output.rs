//! CSV and JSON-lines emitters. Every CSV starts with a `# schema:` line
//! followed by the resolved configuration as `#` comments.

use std::io::Write;
use std::path::Path;

use serde_json::{json, Value};

use crate::bounds::BoundReport;
use crate::current::ActionRates;
use crate::error::{Error, Result};
use crate::langevin::MomentTrajectory;
use crate::scenarios::Fig1Row;

pub const TRAJECTORY_SCHEMA: &str = "speedlimit.trajectory.v1";
pub const FIG1_SCHEMA: &str = "speedlimit.fig1.v1";
pub const BOUNDS_SCHEMA: &str = "speedlimit.bounds.v1";

/// Writes through a temporary file in the target directory, then renames.
pub fn write_atomic(path: &Path, contents: &[u8]) -> Result<()> {
    let io = |e: std::io::Error| Error::Config(format!("cannot write {}: {e}", path.display()));
    let dir = match path.parent() {
        Some(d) if !d.as_os_str().is_empty() => d,
        _ => Path::new("."),
    };
    std::fs::create_dir_all(dir).map_err(io)?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(io)?;
    tmp.write_all(contents).map_err(io)?;
    tmp.flush().map_err(io)?;
    tmp.persist(path).map_err(|e| io(e.error))?;
    Ok(())
}

fn header(schema: &str, config_toml: &str) -> String {
    let mut out = format!("# schema: {schema}\n");
    for line in config_toml.lines() {
        out.push_str("# ");
        out.push_str(line);
        out.push('\n');
    }
    out
}

fn join(values: impl IntoIterator<Item = f64>) -> String {
    values.into_iter().map(|v| v.to_string()).collect::<Vec<_>>().join(",")
}

/// Column names `t, mu_a…, S_ab… (upper triangle), sigma_rate, y_rate,
/// phi_rate`.
pub fn trajectory_columns(labels: &[String]) -> Vec<String> {
    let mut cols = vec!["t".to_string()];
    cols.extend(labels.iter().map(|l| format!("mu_{l}")));
    for i in 0..labels.len() {
        for j in i..labels.len() {
            cols.push(format!("S_{}{}", labels[i], labels[j]));
        }
    }
    cols.extend(["sigma_rate", "y_rate", "phi_rate"].map(String::from));
    cols
}

/// Trajectory table. Rates are divided by `k_B` unless `si`.
pub fn trajectory_csv(
    traj: &MomentTrajectory,
    rates: &[ActionRates],
    labels: &[String],
    si: bool,
    config_toml: &str,
) -> String {
    let n = traj.system.dim();
    let unit = if si { 1.0 } else { traj.system.bath().kb };
    let mut out = header(TRAJECTORY_SCHEMA, config_toml);
    out.push_str(&trajectory_columns(labels).join(","));
    out.push('\n');
    for (k, st) in traj.states.iter().enumerate() {
        let mut row = vec![traj.times[k]];
        row.extend(st.mean.iter().copied());
        for i in 0..n {
            for j in i..n {
                row.push(st.cov[(i, j)]);
            }
        }
        let r = &rates[k];
        row.extend([r.sigma / unit, r.upsilon / unit, r.phi / unit]);
        out.push_str(&join(row));
        out.push('\n');
    }
    out
}

pub fn fig1_csv(rows: &[Fig1Row], config_toml: &str) -> String {
    let mut out = header(FIG1_SCHEMA, config_toml);
    out.push_str("gamma_over_m,tau24,tau25,tau_actual\n");
    for r in rows {
        out.push_str(&join([r.gamma_over_m, r.tau24, r.tau25, r.tau_actual]));
        out.push('\n');
    }
    out
}

fn scaled(x: f64, unit: f64) -> Value {
    let v = x / unit;
    if v.is_finite() {
        json!(v)
    } else {
        json!(v.to_string())
    }
}

/// One JSON object per report. `lhs`, `rhs` and `slack` are converted to
/// `k_B` units unless `si`; `terms` stay in SI.
pub fn bound_record(report: &BoundReport, kb: f64, si: bool) -> Value {
    let unit = if si { 1.0 } else { kb.powf(report.kb_power) };
    let terms: serde_json::Map<String, Value> =
        report.terms.iter().map(|(k, v)| (k.clone(), scaled(*v, 1.0))).collect();
    let mut rec = json!({
        "schema": BOUNDS_SCHEMA,
        "kind": report.kind.to_string(),
        "lhs": scaled(report.lhs, unit),
        "rhs": scaled(report.rhs, unit),
        "slack": scaled(report.slack, unit),
        "satisfied": report.satisfied,
        "tolerance": report.tolerance,
        "units": if si || report.kb_power == 0.0 { "SI" } else { "k_B" },
        "terms": terms,
    });
    if let Some(c) = &report.chain {
        rec["chain"] = json!({
            "lhs": scaled(c.lhs, unit),
            "rhs": scaled(c.rhs, unit),
            "slack": scaled(c.slack, unit),
            "satisfied": c.satisfied,
        });
    }
    if !report.flags.is_empty() {
        rec["flags"] = json!(report.flags);
    }
    rec
}

pub fn bounds_jsonl(reports: &[BoundReport], kb: f64, si: bool) -> String {
    reports
        .iter()
        .map(|r| serde_json::to_string(&bound_record(r, kb, si)).expect("json") + "\n")
        .collect()
}
