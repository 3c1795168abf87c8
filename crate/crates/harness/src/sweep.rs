//! Parameter sweeps: a grid of configuration overrides, one trial summary
//! per point, CSV rows out.

use serde::{Deserialize, Serialize};

use crate::config::TrialConfig;
use crate::error::{HarnessError, Result};
use crate::trial::{run_trial, TrialSummary};

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepAxis {
    /// Dotted parameter path, e.g. `dac.bits` or `array.antennas`.
    pub path: String,
    pub values: Vec<toml::Value>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SweepSpec {
    /// Full cross product when true; otherwise axes are zipped.
    #[serde(default = "default_true")]
    pub cross_product: bool,
    /// Realizations per grid point (falls back to the base config).
    #[serde(default)]
    pub realizations: Option<u64>,
    pub axis: Vec<SweepAxis>,
}

fn default_true() -> bool {
    true
}

impl SweepSpec {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let spec: SweepSpec =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<()> {
        if self.axis.is_empty() {
            return Err(HarnessError::Config("sweep needs at least one axis".into()));
        }
        if self.axis.iter().any(|a| a.values.is_empty()) {
            return Err(HarnessError::Config("sweep axis with no values".into()));
        }
        if !self.cross_product {
            let n = self.axis[0].values.len();
            if self.axis.iter().any(|a| a.values.len() != n) {
                return Err(HarnessError::Config(
                    "zipped sweep needs equal-length axes".into(),
                ));
            }
        }
        Ok(())
    }

    /// Number of grid points.
    pub fn points(&self) -> usize {
        if self.cross_product {
            self.axis.iter().map(|a| a.values.len()).product()
        } else {
            self.axis[0].values.len()
        }
    }

    /// Value indices of one grid point (first axis slowest).
    fn indices(&self, point: usize) -> Vec<usize> {
        if !self.cross_product {
            return vec![point; self.axis.len()];
        }
        let mut idx = vec![0usize; self.axis.len()];
        let mut rem = point;
        for (i, a) in self.axis.iter().enumerate().rev() {
            idx[i] = rem % a.values.len();
            rem /= a.values.len();
        }
        idx
    }

    /// Builds the configuration of one grid point.
    pub fn point_config(&self, base: &TrialConfig, point: usize) -> Result<(TrialConfig, Vec<toml::Value>)> {
        let idx = self.indices(point);
        let mut cfg = base.clone();
        let mut values = Vec::with_capacity(self.axis.len());
        for (a, &i) in self.axis.iter().zip(idx.iter()) {
            cfg.apply_override(&a.path, &a.values[i])?;
            values.push(a.values[i].clone());
        }
        if let Some(r) = self.realizations {
            cfg.run.realizations = r;
        }
        cfg.validate()?;
        Ok((cfg, values))
    }
}

/// One sweep-grid result row.
#[derive(Debug, Clone)]
pub struct SweepRow {
    pub point: usize,
    pub axis_values: Vec<toml::Value>,
    pub realizations: u64,
    pub summary: Option<TrialSummary>,
    pub error: Option<String>,
    pub point_seed: u64,
}

/// Runs a sweep. Per-point failures become error rows and the sweep
/// continues; the caller maps a partial completion onto exit code 4.
pub fn run_sweep(base: &TrialConfig, spec: &SweepSpec) -> Result<(Vec<SweepRow>, usize)> {
    spec.validate()?;
    base.validate()?;
    let total = spec.points();
    let mut rows = Vec::with_capacity(total);
    let mut failed = 0usize;
    for point in 0..total {
        let (row_cfg, axis_values) = match spec.point_config(base, point) {
            Ok(pc) => pc,
            Err(e) => {
                failed += 1;
                rows.push(SweepRow {
                    point,
                    axis_values: vec![],
                    realizations: 0,
                    summary: None,
                    error: Some(e.to_string()),
                    point_seed: 0,
                });
                continue;
            }
        };
        let point_seed = masim_core::rng::derive_seed(row_cfg.run.master_seed, &[point as u64]);
        match run_trial(&row_cfg, point as u64) {
            Ok(summary) => rows.push(SweepRow {
                point,
                axis_values,
                realizations: row_cfg.run.realizations,
                summary: Some(summary),
                error: None,
                point_seed,
            }),
            Err(e) => {
                failed += 1;
                rows.push(SweepRow {
                    point,
                    axis_values,
                    realizations: row_cfg.run.realizations,
                    summary: None,
                    error: Some(e.to_string()),
                    point_seed,
                });
            }
        }
    }
    Ok((rows, failed))
}
