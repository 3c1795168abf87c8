//! Special experiments that do not fit the plain sweep grid: dither decay
//! with array size, distortion averaging at the user, link-SNR scaling of
//! the stochastic models, and the calibrated deterministic-vs-stochastic
//! comparison.

use masim_core::channel::{draw_iid, los_matrix, rice_mix, ArrayGeometry, UserPlacement};
use masim_core::converters::{draw_dither, null_projector};
use masim_core::frontend::{run_frontend, synth_coupling, CouplingMode, PaParams};
use masim_core::linalg::{herm_mul, mean_power};
use masim_core::precode::{apply_precoder, rzf};
use masim_core::rng::tagged_stream;
use masim_core::waveform::{frame_from_bits, pulse_shape, PulseConfig, QamConfig};
use masim_core::C64;
use rand::Rng;
use rayon::prelude::*;

use crate::calibrate::{calibrate, reference_evm, stochastic_config, CalibModel, Calibration};
use crate::config::{StochModel, TrialConfig};
use crate::error::{HarnessError, Result};
use crate::trial::run_trial;

/// Least-squares slope of `log10(y)` against `log10(x)`.
pub fn loglog_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1.log10()).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// Least-squares slope of `y` against `log10(x)` (dB-per-decade fits).
pub fn db_per_decade_slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let xs: Vec<f64> = points.iter().map(|p| p.0.log10()).collect();
    let ys: Vec<f64> = points.iter().map(|p| p.1).collect();
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let num: f64 = xs.iter().zip(&ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let den: f64 = xs.iter().map(|x| (x - mx).powi(2)).sum();
    num / den
}

/// Spearman rank correlation of two equally long samples.
pub fn spearman(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    let rank = |v: &[f64]| -> Vec<f64> {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
        let mut r = vec![0.0; v.len()];
        for (pos, &i) in idx.iter().enumerate() {
            r[i] = pos as f64;
        }
        r
    };
    let ra = rank(a);
    let rb = rank(b);
    let n = a.len() as f64;
    let ma = ra.iter().sum::<f64>() / n;
    let mb = rb.iter().sum::<f64>() / n;
    let mut num = 0.0;
    let mut da = 0.0;
    let mut db = 0.0;
    for i in 0..a.len() {
        num += (ra[i] - ma) * (rb[i] - mb);
        da += (ra[i] - ma).powi(2);
        db += (rb[i] - mb).powi(2);
    }
    num / (da * db).sqrt()
}

/// One array size of the dither-decay experiment.
#[derive(Debug, Clone)]
pub struct DitherDecayRow {
    pub antennas: usize,
    /// RMS of the plain dither at the users, with the 1/M receive combining.
    pub plain_rms: f64,
    /// Same quantity with null-space-projected dither.
    pub nspd_rms: f64,
}

/// Measures how much dither reaches the users as the array grows, over an
/// IID channel. The dither step is fixed (`lsb`), `K` users, `samples`
/// columns per realization.
pub fn dither_decay(
    seed: u64,
    antennas: &[usize],
    users: usize,
    realizations: usize,
    lsb: f64,
    samples: usize,
) -> Result<Vec<DitherDecayRow>> {
    let mut rows = Vec::with_capacity(antennas.len());
    for (mi, &m) in antennas.iter().enumerate() {
        if m <= users {
            return Err(HarnessError::Config(format!(
                "dither decay needs M > K, got M = {m}, K = {users}"
            )));
        }
        let acc: Vec<(f64, f64, usize)> = (0..realizations)
            .into_par_iter()
            .map(|r| {
                let mut rng = tagged_stream(seed, &[mi as u64, r as u64, 0xd17]);
                let h = draw_iid::<f64, _>(m, users, &mut rng);
                let ch = masim_core::channel::ChannelMatrix {
                    h: h.clone(),
                    kappa: 0.0,
                    h_iid: h.clone(),
                    h_los: ndarray::Array2::zeros((m, users)),
                };
                let eps = draw_dither::<f64, _>(m, samples, lsb, &mut rng)
                    .map_err(|e| HarnessError::sim(e, "dither draw"))?;
                let proj = null_projector(&ch).map_err(|e| HarnessError::sim(e, "projector"))?;
                let eps_p = proj.apply(&eps.view()).map_err(|e| HarnessError::sim(e, "projection"))?;
                let through = herm_mul(&h.view(), &eps.view());
                let through_p = herm_mul(&h.view(), &eps_p.view());
                let inv_m2 = 1.0 / (m as f64 * m as f64);
                let plain: f64 =
                    through.iter().map(|v| v.norm_sqr()).sum::<f64>() * inv_m2;
                let nspd: f64 =
                    through_p.iter().map(|v| v.norm_sqr()).sum::<f64>() * inv_m2;
                Ok((plain, nspd, through.len()))
            })
            .collect::<Result<Vec<_>>>()?;
        let total: usize = acc.iter().map(|a| a.2).sum();
        let plain_rms = (acc.iter().map(|a| a.0).sum::<f64>() / total as f64).sqrt();
        let nspd_rms = (acc.iter().map(|a| a.1).sum::<f64>() / total as f64).sqrt();
        rows.push(DitherDecayRow { antennas: m, plain_rms, nspd_rms });
    }
    Ok(rows)
}

/// One array size of the distortion-averaging experiment.
#[derive(Debug, Clone)]
pub struct AveragingRow {
    pub antennas: usize,
    /// Mean `|(1/M) h^H d|^2` over realizations and samples.
    pub residual_power: f64,
}

/// Settings for the coupling-distortion averaging experiment.
///
/// A single-user link on a one-row array, driven at a fixed per-antenna
/// level through a coupling-only PA (`chi = [1]`, `eta = [eta1]`): the
/// distortion seen by the user is the coupled cross-term, whose channel
/// correlation is what the experiment probes.
#[derive(Debug, Clone)]
pub struct AveragingSetup {
    pub kappa: f64,
    /// Fixed user direction for the LOS-dominated case.
    pub direction: (f64, f64),
    pub c0_db: f64,
    pub decay_exp: f64,
    pub eta1: f64,
    pub drive_rms: f64,
    pub symbols: usize,
}

impl Default for AveragingSetup {
    fn default() -> Self {
        Self {
            kappa: 0.0,
            direction: (20.0, 10.0),
            c0_db: -20.0,
            decay_exp: 4.0,
            eta1: 0.12,
            drive_rms: 10f64.powf(-8.0 / 20.0),
            symbols: 64,
        }
    }
}

pub fn distortion_averaging(
    seed: u64,
    antennas: &[usize],
    realizations: &[usize],
    setup: &AveragingSetup,
) -> Result<Vec<AveragingRow>> {
    assert_eq!(antennas.len(), realizations.len());
    let qam = QamConfig::new(64, setup.symbols).map_err(|e| HarnessError::sim(e, "qam"))?;
    let pulse = PulseConfig::new(0.22f64, 5, 8).map_err(|e| HarnessError::sim(e, "pulse"))?;
    let pa = PaParams::new(vec![C64::new(1.0, 0.0)], vec![C64::new(setup.eta1, 0.0)], vec![])
        .map_err(|e| HarnessError::sim(e, "pa"))?;
    let mut rows = Vec::with_capacity(antennas.len());
    for (mi, (&m, &reps)) in antennas.iter().zip(realizations.iter()).enumerate() {
        let geom =
            ArrayGeometry::row(m, 0.5).map_err(|e| HarnessError::sim(e, "geometry"))?;
        let coupling = synth_coupling(&geom, setup.c0_db, setup.decay_exp, 0.5)
            .map_err(|e| HarnessError::sim(e, "coupling"))?;
        let users = UserPlacement::fixed(vec![setup.direction]);
        let sum: f64 = (0..reps)
            .into_par_iter()
            .map(|r| -> Result<f64> {
                let mut rng = tagged_stream(seed, &[mi as u64, r as u64, AVERAGING_TAG]);
                let ch = rice_mix(draw_iid(m, 1, &mut rng), los_matrix(&geom, &users), setup.kappa)
                    .map_err(|e| HarnessError::sim(e, "channel"))?;
                let bits: Vec<bool> =
                    (0..setup.symbols * 6).map(|_| rng.random::<bool>()).collect();
                let frame = frame_from_bits::<f64>(&bits, 1, &qam)
                    .map_err(|e| HarnessError::sim(e, "mapping"))?;
                let shaped = pulse_shape(&frame, &pulse).map_err(|e| HarnessError::sim(e, "shaping"))?;
                let precoder = rzf(&ch, 1e12).map_err(|e| HarnessError::sim(e, "precoder"))?;
                let (mut x, _) = apply_precoder(&precoder, &shaped, true)
                    .map_err(|e| HarnessError::sim(e, "precoding"))?;
                // fixed per-antenna operating point across M
                let g = setup.drive_rms / mean_power(&x.view()).sqrt();
                x.mapv_inplace(|v| v * g);
                let out = run_frontend(&x, &coupling, &pa, CouplingMode::FixedPoint)
                    .map_err(|e| HarnessError::sim(e, "frontend"))?;
                // distortion = output minus the linear part (chi_1 = 1)
                let d = &out.y - &x;
                let dr = herm_mul(&ch.h.view(), &d.view());
                let inv_m2 = 1.0 / (m as f64 * m as f64);
                Ok(dr.iter().map(|v| v.norm_sqr()).sum::<f64>() / dr.len() as f64 * inv_m2)
            })
            .collect::<Result<Vec<f64>>>()?
            .iter()
            .sum();
        rows.push(AveragingRow { antennas: m, residual_power: sum / reps as f64 });
    }
    Ok(rows)
}

const AVERAGING_TAG: u64 = 0x41d6;

/// One grid point of the SNR-scaling experiment.
#[derive(Debug, Clone)]
pub struct SnrScalingRow {
    pub antennas: usize,
    pub snr_db: f64,
    pub evm_pct: f64,
}

/// Link SNR versus array size for a stochastic model, with or without the
/// energy-conservation normalization.
pub fn snr_scaling(
    base: &TrialConfig,
    model: StochModel,
    normalize: bool,
    antennas: &[usize],
) -> Result<Vec<SnrScalingRow>> {
    let mut rows = Vec::with_capacity(antennas.len());
    for (i, &m) in antennas.iter().enumerate() {
        let mut cfg = base.clone();
        cfg.stochastic.model = model;
        cfg.stochastic.normalize = normalize;
        cfg.array.antennas = m;
        cfg.validate()?;
        let out = run_trial(&cfg, i as u64)?;
        rows.push(SnrScalingRow { antennas: m, snr_db: out.snr_mean, evm_pct: out.evm_mean });
    }
    Ok(rows)
}

/// Output of the calibrated model comparison.
#[derive(Debug, Clone)]
pub struct ComparisonOutput {
    pub kappa: f64,
    pub additive: Calibration,
    pub multiplicative: Calibration,
    /// `(M, deterministic, additive, multiplicative)` mean EVM in percent.
    pub rows: Vec<(usize, f64, f64, f64)>,
    pub spearman_additive: f64,
    pub spearman_multiplicative: f64,
    pub max_dev_additive_pp: f64,
    pub max_dev_multiplicative_pp: f64,
}

/// Calibrates both stochastic models against the deterministic chain at the
/// base configuration's array size, then compares EVM across array sizes.
pub fn calibrated_comparison(base: &TrialConfig, antennas: &[usize]) -> Result<ComparisonOutput> {
    let (ref_evm, ref_stderr) = reference_evm(base)?;
    let additive = calibrate(base, CalibModel::Additive, ref_evm, ref_stderr)?;
    let multiplicative = calibrate(base, CalibModel::Multiplicative, ref_evm, ref_stderr)?;

    let mut rows = Vec::with_capacity(antennas.len());
    for (i, &m) in antennas.iter().enumerate() {
        let point = i as u64;
        let mut det = base.clone();
        det.array.antennas = m;
        det.validate()?;
        let det_evm = run_trial(&det, point)?.evm_mean;

        let mut add = stochastic_config(base, CalibModel::Additive, additive.fitted_param);
        add.array.antennas = m;
        add.validate()?;
        let add_evm = run_trial(&add, point)?.evm_mean;

        let mut mult =
            stochastic_config(base, CalibModel::Multiplicative, multiplicative.fitted_param);
        mult.array.antennas = m;
        mult.validate()?;
        let mult_evm = run_trial(&mult, point)?.evm_mean;

        rows.push((m, det_evm, add_evm, mult_evm));
    }
    let det: Vec<f64> = rows.iter().map(|r| r.1).collect();
    let add: Vec<f64> = rows.iter().map(|r| r.2).collect();
    let mult: Vec<f64> = rows.iter().map(|r| r.3).collect();
    let max_dev = |a: &[f64], b: &[f64]| {
        a.iter().zip(b.iter()).map(|(x, y)| (x - y).abs()).fold(0.0f64, f64::max)
    };
    Ok(ComparisonOutput {
        kappa: base.channel.kappa,
        additive,
        multiplicative,
        spearman_additive: spearman(&det, &add),
        spearman_multiplicative: spearman(&det, &mult),
        max_dev_additive_pp: max_dev(&det, &add),
        max_dev_multiplicative_pp: max_dev(&det, &mult),
        rows,
    })
}
