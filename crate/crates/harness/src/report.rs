//! CSV output (RFC 4180, UTF-8, header row, fixed column order).
//!
//! Numbers are written with Rust's shortest round-trip formatting, so a rerun
//! with the same seed produces byte-identical files regardless of worker
//! count. Non-finite values appear as `inf` / `-inf`; absent optional metrics
//! as empty cells.

use std::io::Write;
use std::path::Path;

use crate::error::Result;
use crate::sweep::SweepRow;
use crate::trial::TrialSummary;

fn fmt(v: f64) -> String {
    format!("{v}")
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map(fmt).unwrap_or_default()
}

fn toml_scalar(v: &toml::Value) -> String {
    match v {
        toml::Value::String(s) => s.clone(),
        toml::Value::Integer(i) => i.to_string(),
        toml::Value::Float(f) => fmt(*f),
        toml::Value::Boolean(b) => b.to_string(),
        other => other.to_string(),
    }
}

/// Per-realization rows plus `mean` / `stderr` aggregate rows.
///
/// Columns: `realization, evm_pct_avg, evm_pct_user_<k>..., snr_db, aslr_db,
/// unwanted_rel_db, seed, config_hash`.
pub fn write_trial_csv(path: &Path, summary: &TrialSummary, users: usize) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(path)?;
    let mut header = vec!["realization".to_string(), "evm_pct_avg".to_string()];
    for k in 0..users {
        header.push(format!("evm_pct_user_{k}"));
    }
    header.extend(
        ["snr_db", "aslr_db", "unwanted_rel_db", "seed", "config_hash"]
            .iter()
            .map(|s| s.to_string()),
    );
    w.write_record(&header)?;
    for (i, r) in summary.reports.iter().enumerate() {
        let mut rec = vec![i.to_string(), fmt(r.evm_pct_avg)];
        for k in 0..users {
            rec.push(fmt(r.evm_pct_per_user[k]));
        }
        rec.push(fmt(r.snr_db));
        rec.push(fmt_opt(r.aslr_db));
        rec.push(fmt_opt(r.unwanted_rel_db));
        rec.push(r.seed.to_string());
        rec.push(r.config_hash.clone());
        w.write_record(&rec)?;
    }
    for (label, evm, snr) in [
        ("mean", summary.evm_mean, summary.snr_mean),
        ("stderr", summary.evm_stderr, summary.snr_stderr),
    ] {
        let mut rec = vec![label.to_string(), fmt(evm)];
        rec.extend(std::iter::repeat_n(String::new(), users));
        rec.push(fmt(snr));
        rec.push(String::new());
        rec.push(String::new());
        rec.push(String::new());
        rec.push(String::new());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// One row per grid point.
///
/// Columns: `point, <axis paths...>, realizations, evm_pct_avg_mean,
/// evm_pct_avg_stderr, snr_db_mean, snr_db_stderr, aslr_db_mean,
/// unwanted_rel_db_mean, status, point_seed`.
pub fn write_sweep_csv(path: &Path, axis_paths: &[String], rows: &[SweepRow]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(path)?;
    let mut header = vec!["point".to_string()];
    header.extend(axis_paths.iter().cloned());
    header.extend(
        [
            "realizations",
            "evm_pct_avg_mean",
            "evm_pct_avg_stderr",
            "snr_db_mean",
            "snr_db_stderr",
            "aslr_db_mean",
            "unwanted_rel_db_mean",
            "status",
            "point_seed",
        ]
        .iter()
        .map(|s| s.to_string()),
    );
    w.write_record(&header)?;
    for row in rows {
        let mut rec = vec![row.point.to_string()];
        if row.axis_values.is_empty() {
            rec.extend(std::iter::repeat_n(String::new(), axis_paths.len()));
        } else {
            rec.extend(row.axis_values.iter().map(toml_scalar));
        }
        rec.push(row.realizations.to_string());
        match (&row.summary, &row.error) {
            (Some(s), _) => {
                rec.push(fmt(s.evm_mean));
                rec.push(fmt(s.evm_stderr));
                rec.push(fmt(s.snr_mean));
                rec.push(fmt(s.snr_stderr));
                rec.push(fmt_opt(s.aslr_mean));
                rec.push(fmt_opt(s.unwanted_mean));
                rec.push("ok".to_string());
            }
            (None, Some(e)) => {
                rec.extend(std::iter::repeat_n(String::new(), 6));
                rec.push(format!("error: {e}"));
            }
            (None, None) => unreachable!("sweep row without summary or error"),
        }
        rec.push(row.point_seed.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Generic small-table writer for the special experiments.
pub fn write_table_csv(path: &Path, header: &[&str], rows: &[Vec<String>]) -> Result<()> {
    let mut w = csv::WriterBuilder::new().terminator(csv::Terminator::CRLF).from_path(path)?;
    w.write_record(header)?;
    for row in rows {
        w.write_record(row)?;
    }
    w.flush()?;
    Ok(())
}

/// Formats a float for CSV cells produced by the experiment tables.
pub fn cell(v: f64) -> String {
    fmt(v)
}

pub fn write_text(path: &Path, text: &str) -> Result<()> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(text.as_bytes())?;
    Ok(())
}
