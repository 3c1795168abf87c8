//! Single-trial pipeline: symbols -> pulse shaping -> precoding ->
//! impairments -> channel -> receive processing -> metrics.

use masim_core::channel::{draw_iid, los_matrix, rice_mix, ArrayGeometry, ChannelMatrix, UserPlacement};
use masim_core::converters::{dithered_quantize, DitherPolicy, QuantizerConfig};
use masim_core::frontend::{
    run_frontend, synth_coupling, CouplingMatrix, ElementPattern, PaParams,
};
use masim_core::linalg::{herm_mul, mean_power};
use masim_core::metrics::{
    emission_integrals, evm, snr_of, AngularGrid, AngularSector, EmissionSpec, MetricsReport,
};
use masim_core::precode::{apply_precoder, rzf};
use masim_core::rng::{standard_complex, trial_stream, StreamKind};
use masim_core::stochastic::{additive_impair, mult_impair, AdditiveParams, MultiplicativeParams};
use masim_core::waveform::{
    frame_from_bits, matched_filter_decimate, pulse_shape, PulseConfig, QamConfig, SymbolFrame,
};
use masim_core::{C64, Mat};
use ndarray::{s, Array2};
use rand::Rng;
use rayon::prelude::*;

use crate::config::{CouplingSource, NoiseInjection, Placement, StochModel, TrialConfig};
use crate::error::{HarnessError, Result};

/// Aggregated outcome of one configuration point.
#[derive(Debug, Clone)]
pub struct TrialSummary {
    pub reports: Vec<MetricsReport<f64>>,
    pub evm_mean: f64,
    pub evm_stderr: f64,
    pub snr_mean: f64,
    pub snr_stderr: f64,
    pub aslr_mean: Option<f64>,
    pub unwanted_mean: Option<f64>,
}

pub(crate) fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 || !mean.is_finite() {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, (var / n).sqrt())
}

/// Runs all realizations of one configuration point and aggregates.
pub fn run_trial(cfg: &TrialConfig, point: u64) -> Result<TrialSummary> {
    cfg.validate()?;
    let reports: Vec<MetricsReport<f64>> = (0..cfg.run.realizations)
        .into_par_iter()
        .map(|r| run_realization(cfg, point, r))
        .collect::<Result<Vec<_>>>()?;
    let evms: Vec<f64> = reports.iter().map(|r| r.evm_pct_avg).collect();
    let snrs: Vec<f64> = reports.iter().map(|r| r.snr_db).collect();
    let (evm_mean, evm_stderr) = mean_stderr(&evms);
    let (snr_mean, snr_stderr) = mean_stderr(&snrs);
    let aslrs: Vec<f64> = reports.iter().filter_map(|r| r.aslr_db).collect();
    let unwanted: Vec<f64> = reports.iter().filter_map(|r| r.unwanted_rel_db).collect();
    Ok(TrialSummary {
        evm_mean,
        evm_stderr,
        snr_mean,
        snr_stderr,
        aslr_mean: (!aslrs.is_empty()).then(|| mean_stderr(&aslrs).0),
        unwanted_mean: (!unwanted.is_empty()).then(|| mean_stderr(&unwanted).0),
        reports,
    })
}

pub(crate) fn build_geometry(cfg: &TrialConfig) -> Result<ArrayGeometry<f64>> {
    let m = cfg.array.antennas;
    let d = cfg.array.spacing_wl;
    let geom = if cfg.array.rows == 0 {
        ArrayGeometry::rectangular(m, d)
    } else {
        ArrayGeometry::grid(cfg.array.rows, m / cfg.array.rows, d)
    };
    geom.map_err(|e| HarnessError::sim(e, "array geometry"))
}

pub(crate) fn build_pa(cfg: &TrialConfig) -> Result<PaParams<f64>> {
    if let Some(coeffs) = &cfg.frontend.pa {
        let conv = |v: &[[f64; 2]]| v.iter().map(|p| C64::new(p[0], p[1])).collect();
        return PaParams::new(conv(&coeffs.chi), conv(&coeffs.eta), conv(&coeffs.gamma))
            .map_err(|e| HarnessError::sim(e, "inline PA coefficients"));
    }
    if let Some(path) = &cfg.frontend.pa_file {
        let text = std::fs::read_to_string(path)?;
        return PaParams::from_toml_str(&text)
            .map_err(|e| HarnessError::sim(e, format!("PA parameter file {path}")));
    }
    Ok(PaParams::default())
}

pub(crate) fn build_coupling(
    cfg: &TrialConfig,
    geom: &ArrayGeometry<f64>,
) -> Result<CouplingMatrix<f64>> {
    match cfg.frontend.coupling {
        CouplingSource::None => Ok(CouplingMatrix::none(geom.len())),
        CouplingSource::Synth => synth_coupling(
            geom,
            cfg.frontend.coupling_c0_db,
            cfg.frontend.coupling_decay_exp,
            cfg.frontend.coupling_ref_spacing_wl,
        )
        .map_err(|e| HarnessError::sim(e, "coupling synthesis")),
        CouplingSource::Csv => {
            let path = cfg.frontend.s_matrix_csv.as_ref().ok_or_else(|| {
                HarnessError::Config("coupling = \"csv\" needs frontend.s_matrix_csv".into())
            })?;
            let text = std::fs::read_to_string(path)?;
            let s = masim_core::frontend::coupling_from_csv(&text)
                .map_err(|e| HarnessError::sim(e, format!("S-matrix file {path}")))?;
            if s.s.nrows() != geom.len() {
                return Err(HarnessError::Config(format!(
                    "S-matrix is {} x {}, array has {} elements",
                    s.s.nrows(),
                    s.s.ncols(),
                    geom.len()
                )));
            }
            Ok(s)
        }
    }
}

fn draw_users(cfg: &TrialConfig, rng: &mut impl Rng) -> UserPlacement<f64> {
    match cfg.channel.placement {
        Placement::Fixed => UserPlacement::fixed(
            cfg.channel.fixed_directions.iter().map(|d| (d[0], d[1])).collect(),
        ),
        Placement::Uniform => UserPlacement::uniform(
            cfg.channel.users,
            (cfg.channel.elevation_deg[0], cfg.channel.elevation_deg[1]),
            (cfg.channel.azimuth_deg[0], cfg.channel.azimuth_deg[1]),
            rng,
        ),
    }
}

pub(crate) fn draw_channel(
    cfg: &TrialConfig,
    geom: &ArrayGeometry<f64>,
    users: &UserPlacement<f64>,
    rng: &mut impl Rng,
) -> Result<ChannelMatrix<f64>> {
    let h_iid = draw_iid(geom.len(), users.users(), rng);
    let h_los = los_matrix(geom, users);
    rice_mix(h_iid, h_los, cfg.channel.kappa).map_err(|e| HarnessError::sim(e, "channel draw"))
}

/// Runs one realization end to end.
pub fn run_realization(cfg: &TrialConfig, point: u64, realization: u64) -> Result<MetricsReport<f64>> {
    let seed = cfg.run.master_seed;
    let ctx = |what: &str| format!("realization {realization} (point {point}): {what}");
    let wrap = |e: masim_core::SimError, what: &str| HarnessError::sim(e, ctx(what));

    let k = cfg.channel.users;
    let geom = build_geometry(cfg)?;

    let mut users_rng = trial_stream(seed, point, realization, StreamKind::Users);
    let users = draw_users(cfg, &mut users_rng);
    let mut channel_rng = trial_stream(seed, point, realization, StreamKind::Channel);
    let channel = draw_channel(cfg, &geom, &users, &mut channel_rng)?;

    // transmit data
    let qam = QamConfig::new(cfg.qam.order, cfg.qam.symbols_per_frame)
        .map_err(|e| wrap(e, "QAM config"))?;
    let pulse = PulseConfig::new(cfg.pulse.rolloff, cfg.pulse.osr, cfg.pulse.span_symbols)
        .map_err(|e| wrap(e, "pulse config"))?;
    let mut data_rng = trial_stream(seed, point, realization, StreamKind::Data);
    let nbits = k * cfg.qam.symbols_per_frame * qam.bits_per_symbol();
    let bits: Vec<bool> = (0..nbits).map(|_| data_rng.random::<bool>()).collect();
    let frame = frame_from_bits::<f64>(&bits, k, &qam).map_err(|e| wrap(e, "symbol mapping"))?;
    let shaped = pulse_shape(&frame, &pulse).map_err(|e| wrap(e, "pulse shaping"))?;

    // precode with total-power normalization
    let precoder = rzf(&channel, cfg.reg_snr_linear()).map_err(|e| wrap(e, "precoder"))?;
    let (x, scale) = apply_precoder(&precoder, &shaped, cfg.precoder.normalize_power)
        .map_err(|e| wrap(e, "precoding"))?;

    // nominal end-to-end symbol gain for the receiver's perfect-CSI AGC
    let hg = herm_mul(&channel.h.view(), &precoder.g.view());
    let mut c_nom = C64::new(0.0, 0.0);
    for i in 0..k {
        c_nom += hg[(i, i)];
    }
    c_nom = c_nom * (scale / k as f64);
    if c_nom.norm() == 0.0 {
        return Err(HarnessError::sim(
            masim_core::SimError::Numeric("nominal link gain is zero".into()),
            ctx("receive normalization"),
        ));
    }

    // impairment branch
    let mut impairment_rng = trial_stream(seed, point, realization, StreamKind::Impairment);
    let mut dither_rng = trial_stream(seed, point, realization, StreamKind::Dither);
    let mut emissions: Option<(f64, f64)> = None; // (unwanted_rel_db, aslr_db)
    let received: Mat<f64> = match cfg.stochastic.model {
        StochModel::Additive => {
            let p = AdditiveParams::new(cfg.stochastic.nu).map_err(|e| wrap(e, "additive params"))?;
            let (x2, _alpha) = additive_impair(&x, &p, &mut impairment_rng, cfg.stochastic.normalize)
                .map_err(|e| wrap(e, "additive impairment"))?;
            herm_mul(&channel.h.view(), &x2.view())
        }
        StochModel::Multiplicative => {
            let p = MultiplicativeParams::new(cfg.stochastic.sigma_a2, cfg.stochastic.sigma_phi2)
                .map_err(|e| wrap(e, "multiplicative params"))?;
            let imp = mult_impair(&channel, &p, &mut impairment_rng, cfg.stochastic.normalize);
            imp.apply(&channel, &x).map_err(|e| wrap(e, "multiplicative impairment"))?
        }
        StochModel::None => {
            let mut chain = x;
            let mut g_chain = C64::new(1.0, 0.0);
            if cfg.frontend.enabled {
                // fix the PA operating point: per-antenna rms to the backoff level
                let drive_rms = 10f64.powf(-cfg.frontend.backoff_db / 20.0);
                let current = mean_power(&chain.view()).sqrt();
                let g_drive = drive_rms / current;
                chain.mapv_inplace(|v| v * g_drive);
                g_chain *= g_drive;
            }
            if cfg.dac.enabled {
                let rail_rms = (mean_power(&chain.view()) / 2.0).sqrt();
                let qcfg = QuantizerConfig::new(cfg.dac.bits, cfg.dac.loading * rail_rms, cfg.dac.dither)
                    .map_err(|e| wrap(e, "quantizer config"))?;
                let ch_ref = (cfg.dac.dither == DitherPolicy::Nspd).then_some(&channel);
                chain = dithered_quantize(&chain, &qcfg, ch_ref, &mut dither_rng)
                    .map_err(|e| wrap(e, "DAC"))?;
            }
            if cfg.frontend.enabled {
                let pa = build_pa(cfg)?;
                let s = build_coupling(cfg, &geom)?;
                let out =
                    run_frontend(&chain, &s, &pa, cfg.frontend.mode).map_err(|e| wrap(e, "PA bank"))?;
                chain = out.y;
                g_chain *= pa.linear_gain();
            }
            let r_phys = herm_mul(&channel.h.view(), &chain.view());
            if cfg.metrics.emissions {
                emissions = Some(compute_emissions(cfg, &geom, &chain, &r_phys)?);
            }
            c_nom *= g_chain;
            r_phys
        }
    };

    // receiver: perfect-CSI AGC, optional oversampled noise, matched filter
    let mut r_hat = received.mapv(|v| v / c_nom);
    let noise_var = cfg.noise_variance();
    let mut noise_rng = trial_stream(seed, point, realization, StreamKind::Noise);
    if cfg.link.noise && cfg.link.noise_injection == NoiseInjection::Oversampled {
        let sigma = noise_var.sqrt();
        r_hat.mapv_inplace(|v| v + standard_complex::<f64, _>(&mut noise_rng) * C64::new(sigma, 0.0));
    }
    let delay = 2 * pulse.group_delay();
    let decoded = matched_filter_decimate(&r_hat, &pulse, delay).map_err(|e| wrap(e, "matched filter"))?;

    // align, trim filter-edge symbols, optional symbol-rate noise
    let l = cfg.qam.symbols_per_frame;
    let span = cfg.pulse.span_symbols;
    if decoded.symbols() < l {
        return Err(HarnessError::sim(
            masim_core::SimError::Alignment(format!(
                "decoded {} symbols, expected at least {l}",
                decoded.symbols()
            )),
            ctx("decimation"),
        ));
    }
    let keep = l.saturating_sub(2 * span);
    if keep == 0 {
        return Err(HarnessError::Config(format!(
            "frame of {l} symbols leaves nothing after discarding 2 x {span} edge symbols"
        )));
    }
    let mut s_hat: Mat<f64> = decoded.data.slice(s![.., span..span + keep]).to_owned();
    let s_ref: Mat<f64> = frame.data.slice(s![.., span..span + keep]).to_owned();
    if cfg.link.noise && cfg.link.noise_injection == NoiseInjection::SymbolRate {
        let sigma = noise_var.sqrt();
        s_hat.mapv_inplace(|v| v + standard_complex::<f64, _>(&mut noise_rng) * C64::new(sigma, 0.0));
    }

    let ev = evm(&s_ref, &s_hat).map_err(|e| wrap(e, "EVM"))?;
    let snr_db = snr_of(&s_ref, &s_hat).map_err(|e| wrap(e, "SNR"))?;
    Ok(MetricsReport {
        evm_pct_per_user: ev.per_user,
        evm_pct_avg: ev.avg,
        snr_db,
        aslr_db: emissions.map(|e| e.1),
        unwanted_rel_db: emissions.map(|e| e.0),
        config_hash: cfg.hash(),
        seed: masim_core::rng::derive_seed(seed, &[point, realization]),
    })
}

fn compute_emissions(
    cfg: &TrialConfig,
    geom: &ArrayGeometry<f64>,
    y: &Mat<f64>,
    r_phys: &Mat<f64>,
) -> Result<(f64, f64)> {
    let pat = ElementPattern::patch(cfg.frontend.pattern_exponent);
    let half_bw = (1.0 + cfg.pulse.rolloff) / (2.0 * cfg.pulse.osr as f64);
    let spec = EmissionSpec {
        band: (-half_bw, half_bw),
        cone: AngularSector {
            theta_deg: (cfg.channel.elevation_deg[0], cfg.channel.elevation_deg[1]),
            phi_deg: (cfg.channel.azimuth_deg[0], cfg.channel.azimuth_deg[1]),
        },
        segment: cfg.metrics.segment,
        overlap: cfg.metrics.overlap,
    };
    let grid = AngularGrid::hemisphere(cfg.metrics.grid_step_deg)
        .map_err(|e| HarnessError::sim(e, "angular grid"))?;
    let (useful, unwanted) = emission_integrals(y, geom, &pat, &spec, &grid)
        .map_err(|e| HarnessError::sim(e, "emission integration"))?;
    let per_user_rx = mean_power(&r_phys.view());
    if !(per_user_rx > 0.0) {
        return Err(HarnessError::sim(
            masim_core::SimError::Numeric("zero received power".into()),
            "emission metric".to_string(),
        ));
    }
    let unwanted_rel_db = 10.0 * (unwanted / per_user_rx).log10();
    let aslr_db = if unwanted <= useful * 1e-14 {
        f64::INFINITY
    } else {
        10.0 * (useful / unwanted).log10()
    };
    Ok((unwanted_rel_db, aslr_db))
}

/// Reference frame/decoded pair of a noiseless loopback (used by tests).
pub fn loopback_reference(cfg: &TrialConfig) -> Result<(SymbolFrame<f64>, Array2<C64>)> {
    let qam = QamConfig::new(cfg.qam.order, cfg.qam.symbols_per_frame)
        .map_err(|e| HarnessError::sim(e, "QAM config"))?;
    let pulse = PulseConfig::new(cfg.pulse.rolloff, cfg.pulse.osr, cfg.pulse.span_symbols)
        .map_err(|e| HarnessError::sim(e, "pulse config"))?;
    let mut rng = trial_stream(cfg.run.master_seed, 0, 0, StreamKind::Data);
    let nbits = cfg.channel.users * cfg.qam.symbols_per_frame * qam.bits_per_symbol();
    let bits: Vec<bool> = (0..nbits).map(|_| rng.random::<bool>()).collect();
    let frame = frame_from_bits::<f64>(&bits, cfg.channel.users, &qam)
        .map_err(|e| HarnessError::sim(e, "mapping"))?;
    let shaped = pulse_shape(&frame, &pulse).map_err(|e| HarnessError::sim(e, "shaping"))?;
    let back = matched_filter_decimate(&shaped, &pulse, 2 * pulse.group_delay())
        .map_err(|e| HarnessError::sim(e, "matched filter"))?;
    Ok((frame, back.data))
}
