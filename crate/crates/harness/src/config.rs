//! Trial configuration: one TOML schema for the whole pipeline.
//!
//! The schema is versioned through `schema_version`; unknown fields are
//! rejected so typos surface as config errors rather than silent defaults.

use masim_core::converters::DitherPolicy;
use masim_core::frontend::CouplingMode;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

pub const SCHEMA_VERSION: u32 = 1;

fn default_schema_version() -> u32 {
    SCHEMA_VERSION
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TrialConfig {
    #[serde(default = "default_schema_version")]
    pub schema_version: u32,
    #[serde(default)]
    pub link: LinkConfig,
    #[serde(default)]
    pub qam: QamSection,
    #[serde(default)]
    pub pulse: PulseSection,
    #[serde(default)]
    pub array: ArraySection,
    #[serde(default)]
    pub channel: ChannelSection,
    #[serde(default)]
    pub precoder: PrecoderSection,
    #[serde(default)]
    pub frontend: FrontendSection,
    #[serde(default)]
    pub dac: DacSection,
    #[serde(default)]
    pub stochastic: StochasticSection,
    #[serde(default)]
    pub metrics: MetricsSection,
    #[serde(default)]
    pub run: RunSection,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LinkConfig {
    /// Per-user receive SNR anchor in dB (exact at M = K for a clean ZF link).
    pub snr_db: f64,
    /// Receive noise on/off.
    pub noise: bool,
    pub noise_injection: NoiseInjection,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseInjection {
    /// Per-symbol noise after the matched filter (default).
    SymbolRate,
    /// Per-sample noise before the matched filter, same post-filter variance.
    Oversampled,
}

impl Default for LinkConfig {
    fn default() -> Self {
        Self { snr_db: 10.0, noise: true, noise_injection: NoiseInjection::SymbolRate }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct QamSection {
    pub order: usize,
    pub symbols_per_frame: usize,
}

impl Default for QamSection {
    fn default() -> Self {
        Self { order: 64, symbols_per_frame: 1000 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseSection {
    pub rolloff: f64,
    pub osr: usize,
    pub span_symbols: usize,
}

impl Default for PulseSection {
    fn default() -> Self {
        Self { rolloff: 0.22, osr: 5, span_symbols: 16 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArraySection {
    pub antennas: usize,
    pub spacing_wl: f64,
    /// Grid rows; 0 selects a square-as-possible layout.
    pub rows: usize,
}

impl Default for ArraySection {
    fn default() -> Self {
        Self { antennas: 4, spacing_wl: 0.5, rows: 0 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ChannelSection {
    pub kappa: f64,
    pub users: usize,
    pub placement: Placement,
    pub azimuth_deg: [f64; 2],
    pub elevation_deg: [f64; 2],
    /// `[elevation, azimuth]` pairs used when `placement = "fixed"`.
    pub fixed_directions: Vec<[f64; 2]>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Placement {
    Uniform,
    Fixed,
}

impl Default for ChannelSection {
    fn default() -> Self {
        Self {
            kappa: 0.0,
            users: 4,
            placement: Placement::Uniform,
            azimuth_deg: [-60.0, 60.0],
            elevation_deg: [-30.0, 30.0],
            fixed_directions: vec![],
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PrecoderSection {
    /// Regularization SNR in dB; omitted means "track the link SNR".
    pub reg_snr_db: Option<f64>,
    pub normalize_power: bool,
}

impl Default for PrecoderSection {
    fn default() -> Self {
        Self { reg_snr_db: None, normalize_power: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FrontendSection {
    pub enabled: bool,
    pub mode: CouplingMode,
    /// PA input backoff in dB relative to unit full scale.
    pub backoff_db: f64,
    pub coupling: CouplingSource,
    pub coupling_c0_db: f64,
    pub coupling_decay_exp: f64,
    pub coupling_ref_spacing_wl: f64,
    /// CSV file with measured S-parameters, used when `coupling = "csv"`.
    pub s_matrix_csv: Option<String>,
    pub pattern_exponent: f64,
    /// TOML file with PA coefficients; omitted means built-in defaults.
    pub pa_file: Option<String>,
    /// Inline PA coefficients (`[re, im]` pairs); overrides `pa_file`.
    pub pa: Option<PaCoefficients>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CouplingSource {
    Synth,
    None,
    Csv,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PaCoefficients {
    pub chi: Vec<[f64; 2]>,
    #[serde(default)]
    pub eta: Vec<[f64; 2]>,
    #[serde(default)]
    pub gamma: Vec<[f64; 2]>,
}

impl Default for FrontendSection {
    fn default() -> Self {
        Self {
            enabled: false,
            mode: CouplingMode::FixedPoint,
            backoff_db: 8.0,
            coupling: CouplingSource::Synth,
            coupling_c0_db: -20.0,
            coupling_decay_exp: 3.0,
            coupling_ref_spacing_wl: 0.5,
            s_matrix_csv: None,
            pattern_exponent: 1.5,
            pa_file: None,
            pa: None,
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DacSection {
    pub enabled: bool,
    pub bits: u32,
    /// Full scale as a multiple of the frame's per-rail RMS.
    pub loading: f64,
    pub dither: DitherPolicy,
}

impl Default for DacSection {
    fn default() -> Self {
        Self { enabled: false, bits: 6, loading: 3.0, dither: DitherPolicy::None }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StochasticSection {
    pub model: StochModel,
    pub nu: f64,
    pub sigma_a2: f64,
    pub sigma_phi2: f64,
    pub normalize: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StochModel {
    None,
    Additive,
    Multiplicative,
}

impl Default for StochasticSection {
    fn default() -> Self {
        Self { model: StochModel::None, nu: 0.01, sigma_a2: 0.0025, sigma_phi2: 0.0025, normalize: true }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MetricsSection {
    /// Compute the space-frequency emission metrics (deterministic chain only).
    pub emissions: bool,
    pub grid_step_deg: f64,
    pub segment: usize,
    pub overlap: f64,
}

impl Default for MetricsSection {
    fn default() -> Self {
        Self { emissions: false, grid_step_deg: 2.0, segment: 256, overlap: 0.5 }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RunSection {
    pub master_seed: u64,
    pub realizations: u64,
}

impl Default for RunSection {
    fn default() -> Self {
        Self { master_seed: 1, realizations: 100 }
    }
}

impl Default for TrialConfig {
    fn default() -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            link: LinkConfig::default(),
            qam: QamSection::default(),
            pulse: PulseSection::default(),
            array: ArraySection::default(),
            channel: ChannelSection::default(),
            precoder: PrecoderSection::default(),
            frontend: FrontendSection::default(),
            dac: DacSection::default(),
            stochastic: StochasticSection::default(),
            metrics: MetricsSection::default(),
            run: RunSection::default(),
        }
    }
}

impl TrialConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg: TrialConfig =
            toml::from_str(text).map_err(|e| HarnessError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml_string(&self) -> String {
        toml::to_string_pretty(self).expect("config serializes")
    }

    /// Stable hash of the serialized configuration (first 16 hex chars).
    pub fn hash(&self) -> String {
        let mut hasher = Sha256::new();
        hasher.update(self.to_toml_string().as_bytes());
        let digest = hasher.finalize();
        digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let fail = |msg: String| Err(HarnessError::Config(msg));
        if self.schema_version != SCHEMA_VERSION {
            return fail(format!(
                "schema_version {} unsupported (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if self.array.antennas == 0 {
            return fail("array.antennas must be >= 1".into());
        }
        if self.array.rows > 0 && !self.array.antennas.is_multiple_of(self.array.rows) {
            return fail(format!(
                "array.rows = {} does not divide antennas = {}",
                self.array.rows, self.array.antennas
            ));
        }
        if self.channel.users == 0 {
            return fail("channel.users must be >= 1".into());
        }
        if self.channel.kappa < 0.0 {
            return fail("channel.kappa must be >= 0".into());
        }
        if self.channel.placement == Placement::Fixed
            && self.channel.fixed_directions.len() != self.channel.users
        {
            return fail(format!(
                "fixed placement needs {} directions, got {}",
                self.channel.users,
                self.channel.fixed_directions.len()
            ));
        }
        if self.stochastic.model != StochModel::None
            && (self.frontend.enabled || self.dac.enabled)
        {
            return fail(
                "stochastic model and deterministic hardware chain are mutually exclusive".into(),
            );
        }
        if self.dac.enabled
            && self.dac.dither == DitherPolicy::Nspd
            && self.array.antennas <= self.channel.users
        {
            return fail(format!(
                "nspd dithering requires antennas > users ({} <= {})",
                self.array.antennas, self.channel.users
            ));
        }
        if self.metrics.emissions && self.stochastic.model != StochModel::None {
            return fail("emission metrics need the deterministic chain".into());
        }
        if !(self.dac.loading > 0.0) {
            return fail("dac.loading must be > 0".into());
        }
        if self.run.realizations == 0 {
            return fail("run.realizations must be >= 1".into());
        }
        Ok(())
    }

    pub fn snr_linear(&self) -> f64 {
        10f64.powf(self.link.snr_db / 10.0)
    }

    pub fn reg_snr_linear(&self) -> f64 {
        10f64.powf(self.precoder.reg_snr_db.unwrap_or(self.link.snr_db) / 10.0)
    }

    /// Per-user symbol-rate noise variance: `K / (M * SNR)`. Anchored so a
    /// clean zero-forcing link at `M = K` sits exactly at the configured SNR;
    /// the array gain of larger arrays is kept.
    pub fn noise_variance(&self) -> f64 {
        self.channel.users as f64 / (self.array.antennas as f64 * self.snr_linear())
    }

    /// Applies a dotted-path override (sweep axes, CLI tweaks).
    pub fn apply_override(&mut self, path: &str, value: &toml::Value) -> Result<()> {
        let bad_type = |want: &str| {
            HarnessError::Config(format!("axis '{path}': expected {want}, got {value:?}"))
        };
        let as_f64 = || -> Result<f64> {
            value
                .as_float()
                .or_else(|| value.as_integer().map(|v| v as f64))
                .ok_or_else(|| bad_type("number"))
        };
        let as_usize = || -> Result<usize> {
            value
                .as_integer()
                .filter(|&v| v >= 0)
                .map(|v| v as usize)
                .ok_or_else(|| bad_type("non-negative integer"))
        };
        let as_bool = || -> Result<bool> { value.as_bool().ok_or_else(|| bad_type("bool")) };
        let as_str = || -> Result<&str> { value.as_str().ok_or_else(|| bad_type("string")) };
        match path {
            "link.snr_db" => self.link.snr_db = as_f64()?,
            "link.noise" => self.link.noise = as_bool()?,
            "qam.order" => self.qam.order = as_usize()?,
            "qam.symbols_per_frame" => self.qam.symbols_per_frame = as_usize()?,
            "pulse.rolloff" => self.pulse.rolloff = as_f64()?,
            "pulse.osr" => self.pulse.osr = as_usize()?,
            "pulse.span_symbols" => self.pulse.span_symbols = as_usize()?,
            "array.antennas" => self.array.antennas = as_usize()?,
            "array.spacing_wl" => self.array.spacing_wl = as_f64()?,
            "array.rows" => self.array.rows = as_usize()?,
            "channel.kappa" => self.channel.kappa = as_f64()?,
            "channel.users" => self.channel.users = as_usize()?,
            "precoder.reg_snr_db" => self.precoder.reg_snr_db = Some(as_f64()?),
            "frontend.enabled" => self.frontend.enabled = as_bool()?,
            "frontend.backoff_db" => self.frontend.backoff_db = as_f64()?,
            "frontend.coupling_c0_db" => self.frontend.coupling_c0_db = as_f64()?,
            "frontend.coupling_decay_exp" => self.frontend.coupling_decay_exp = as_f64()?,
            "dac.enabled" => self.dac.enabled = as_bool()?,
            "dac.bits" => self.dac.bits = as_usize()? as u32,
            "dac.loading" => self.dac.loading = as_f64()?,
            "dac.dither" => {
                self.dac.dither = match as_str()? {
                    "none" => DitherPolicy::None,
                    "uniform" => DitherPolicy::Uniform,
                    "nspd" => DitherPolicy::Nspd,
                    other => {
                        return Err(HarnessError::Config(format!(
                            "unknown dither policy '{other}'"
                        )))
                    }
                }
            }
            "stochastic.model" => {
                self.stochastic.model = match as_str()? {
                    "none" => StochModel::None,
                    "additive" => StochModel::Additive,
                    "multiplicative" => StochModel::Multiplicative,
                    other => {
                        return Err(HarnessError::Config(format!("unknown model '{other}'")))
                    }
                }
            }
            "stochastic.nu" => self.stochastic.nu = as_f64()?,
            "stochastic.sigma_a2" => self.stochastic.sigma_a2 = as_f64()?,
            "stochastic.sigma_phi2" => self.stochastic.sigma_phi2 = as_f64()?,
            "stochastic.normalize" => self.stochastic.normalize = as_bool()?,
            "metrics.emissions" => self.metrics.emissions = as_bool()?,
            "run.realizations" => self.run.realizations = as_usize()? as u64,
            other => {
                return Err(HarnessError::Config(format!("unknown parameter path '{other}'")))
            }
        }
        Ok(())
    }
}
