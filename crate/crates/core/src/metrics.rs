//! Quality metrics: EVM, link SNR, Welch spectra, and space-frequency
//! emission integrals.
//!
//! EVM removes a constant per-user complex gain before measuring the error.
//! The gain is the least-squares fit of the received stream onto the
//! reference (`c = s^H y / |s|^2`), so a clean AWGN link at SNR `g` reads
//! `EVM = 100 / sqrt(g)` and gain/phase offsets cost nothing. The link SNR
//! deliberately applies no such correction.
//!
//! The emission metrics integrate the array far field over frequency and
//! solid angle. The triple integral separates into a pattern Gram matrix
//! (angle) and band-integrated cross-spectra (frequency), which is exact and
//! avoids sweeping every direction per frequency bin; a brute-force oracle in
//! the tests pins the algebra.

use ndarray::Array2;
use num_complex::Complex;
use rustfft::FftPlanner;

use crate::channel::ArrayGeometry;
use crate::frontend::ElementPattern;
use crate::{real, Mat, Real, Result, SimError};

/// Per-trial metric record with provenance.
#[derive(Debug, Clone)]
pub struct MetricsReport<T> {
    pub evm_pct_per_user: Vec<T>,
    pub evm_pct_avg: T,
    pub snr_db: T,
    pub aslr_db: Option<T>,
    pub unwanted_rel_db: Option<T>,
    /// Hash of the configuration the trial ran under.
    pub config_hash: String,
    /// Seed of the realization's stream family.
    pub seed: u64,
}

/// EVM in percent, per user and averaged over users.
#[derive(Debug, Clone, PartialEq)]
pub struct EvmResult<T> {
    pub per_user: Vec<T>,
    pub avg: T,
}

/// Error vector magnitude with per-user gain/phase removal.
pub fn evm<T: Real>(s: &Mat<T>, y: &Mat<T>) -> Result<EvmResult<T>> {
    if s.dim() != y.dim() {
        return Err(SimError::ShapeMismatch(format!(
            "reference is {:?}, received {:?}",
            s.dim(),
            y.dim()
        )));
    }
    let k = s.nrows();
    let mut per_user = Vec::with_capacity(k);
    for r in 0..k {
        let sr = s.row(r);
        let yr = y.row(r);
        let mut dot = Complex::new(T::zero(), T::zero());
        let mut ps = T::zero();
        let mut py = T::zero();
        for (a, b) in sr.iter().zip(yr.iter()) {
            dot += a.conj() * *b;
            ps += a.norm_sqr();
            py += b.norm_sqr();
        }
        if !(py > T::zero()) || dot.norm() == T::zero() {
            return Err(SimError::Numeric(format!(
                "EVM undefined for user {r}: received stream carries no reference component"
            )));
        }
        if !(ps > T::zero()) {
            return Err(SimError::InvalidInput(format!("zero reference for user {r}")));
        }
        let c = dot / Complex::new(ps, T::zero());
        let mut err = T::zero();
        for (a, b) in sr.iter().zip(yr.iter()) {
            err += (*a - *b / c).norm_sqr();
        }
        per_user.push(real::<T>(100.0) * (err / ps).sqrt());
    }
    let avg = per_user.iter().cloned().sum::<T>() / real::<T>(k as f64);
    Ok(EvmResult { per_user, avg })
}

/// Link SNR in dB: `10 log10(E|s|^2 / E|s - y|^2)`, no gain correction.
/// Returns `+inf` as the distinguished clean value when `y == s` exactly.
pub fn snr_of<T: Real>(s: &Mat<T>, y: &Mat<T>) -> Result<T> {
    if s.dim() != y.dim() {
        return Err(SimError::ShapeMismatch(format!(
            "reference is {:?}, received {:?}",
            s.dim(),
            y.dim()
        )));
    }
    let mut ps = T::zero();
    let mut pe = T::zero();
    for (a, b) in s.iter().zip(y.iter()) {
        ps += a.norm_sqr();
        pe += (*a - *b).norm_sqr();
    }
    if pe == T::zero() {
        return Ok(T::infinity());
    }
    Ok(real::<T>(10.0) * (ps / pe).log10())
}

/// Two-sided power spectrum over normalized frequency (cycles/sample),
/// DC-centered. Bin powers sum to the mean signal power.
#[derive(Debug, Clone)]
pub struct Spectrum<T> {
    pub freq: Vec<T>,
    pub power: Vec<T>,
}

fn hann<T: Real>(n: usize) -> Vec<T> {
    (0..n)
        .map(|i| {
            let x = real::<T>(i as f64) / real::<T>(n as f64);
            real::<T>(0.5) * (T::one() - (real::<T>(2.0) * T::PI() * x).cos())
        })
        .collect()
}

fn segment_starts(len: usize, segment: usize, overlap: f64) -> Vec<usize> {
    let hop = ((segment as f64) * (1.0 - overlap)).round().max(1.0) as usize;
    (0..)
        .map(|i| i * hop)
        .take_while(|&s| s + segment <= len)
        .collect()
}

/// Welch average periodogram with a Hann window.
pub fn psd_welch<T: Real>(y: &[Complex<T>], segment: usize, overlap: T) -> Result<Spectrum<T>> {
    if segment < 2 {
        return Err(SimError::InvalidInput("segment must be >= 2".into()));
    }
    if y.len() < segment {
        return Err(SimError::InvalidInput(format!(
            "stream of {} samples shorter than segment {segment}",
            y.len()
        )));
    }
    let ov = overlap.to_f64().unwrap_or(0.5);
    if !(0.0..1.0).contains(&ov) {
        return Err(SimError::InvalidInput("overlap must be in [0, 1)".into()));
    }
    let window = hann::<T>(segment);
    let wsum: T = window.iter().map(|&w| w * w).sum();
    let starts = segment_starts(y.len(), segment, ov);
    let mut planner = FftPlanner::<T>::new();
    let fft = planner.plan_fft_forward(segment);
    let mut acc = vec![T::zero(); segment];
    let mut buf = vec![Complex::new(T::zero(), T::zero()); segment];
    for &s0 in &starts {
        for (i, b) in buf.iter_mut().enumerate() {
            *b = y[s0 + i] * window[i];
        }
        fft.process(&mut buf);
        for (a, b) in acc.iter_mut().zip(buf.iter()) {
            *a += b.norm_sqr();
        }
    }
    // Parseval: sum_k |X_k|^2 = N sum_n |x_n|^2, so bin powers sum to the
    // window-corrected mean power
    let norm = T::one() / (real::<T>(starts.len() as f64) * wsum * real::<T>(segment as f64));
    // fftshift to DC-centered order
    let half = segment.div_ceil(2);
    let mut freq = Vec::with_capacity(segment);
    let mut power = Vec::with_capacity(segment);
    for k in 0..segment {
        let src = (k + half) % segment;
        let f_unshifted = src as f64 / segment as f64;
        let f = if f_unshifted >= 0.5 { f_unshifted - 1.0 } else { f_unshifted };
        freq.push(real::<T>(f));
        power.push(acc[src] * norm);
    }
    Ok(Spectrum { freq, power })
}

/// Angular integration grid in the (elevation, azimuth) chart, degrees.
///
/// Elevation spans `[-90, 90]` from boresight and azimuth `[-90, 90]`,
/// which parameterizes the front hemisphere once; the solid-angle measure is
/// `|sin(theta)| dtheta dphi`.
#[derive(Debug, Clone)]
pub struct AngularGrid<T> {
    pub theta_deg: Vec<T>,
    pub phi_deg: Vec<T>,
}

impl<T: Real> AngularGrid<T> {
    /// Uniform grid over the front hemisphere with the given step.
    pub fn hemisphere(step_deg: T) -> Result<Self> {
        let step = step_deg.to_f64().unwrap_or(0.0);
        if !(step > 0.0 && step <= 90.0) {
            return Err(SimError::InvalidInput("grid step must be in (0, 90]".into()));
        }
        let n = (180.0 / step).round() as usize;
        let axis: Vec<T> = (0..=n)
            .map(|i| real::<T>(-90.0 + i as f64 * 180.0 / n as f64))
            .collect();
        Ok(Self { theta_deg: axis.clone(), phi_deg: axis })
    }
}

/// Axis-aligned angular sector (degrees) in the same chart as the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngularSector<T> {
    pub theta_deg: (T, T),
    pub phi_deg: (T, T),
}

/// Space-frequency region and spectral-estimation settings for the emission
/// metrics. The useful region is `band x cone`; unwanted is its complement
/// within the sampled band and the front hemisphere.
#[derive(Debug, Clone, Copy)]
pub struct EmissionSpec<T> {
    /// Useful band in normalized frequency (cycles/sample).
    pub band: (T, T),
    pub cone: AngularSector<T>,
    pub segment: usize,
    pub overlap: T,
}

fn trapezoid_weights<T: Real>(axis: &[T]) -> Vec<T> {
    let n = axis.len();
    if n == 1 {
        return vec![T::one()];
    }
    let mut w = vec![T::zero(); n];
    for i in 0..n - 1 {
        let h = (axis[i + 1] - axis[i]) / real::<T>(2.0);
        w[i] += h;
        w[i + 1] += h;
    }
    w
}

fn in_range<T: Real>(v: T, lo: T, hi: T) -> bool {
    let tol = real::<T>(1e-9);
    v >= lo - tol && v <= hi + tol
}

/// Pattern Gram matrix over an angular region:
/// `G[m][j] = sum_d w_d E_m(d) conj(E_j(d))` with trapezoid weights and the
/// `|sin theta|` solid-angle factor (radian measure).
fn pattern_gram<T: Real>(
    geom: &ArrayGeometry<T>,
    pat: &ElementPattern<T>,
    thetas: &[T],
    phis: &[T],
) -> Mat<T> {
    let m = geom.len();
    let wt = trapezoid_weights(thetas);
    let wp = trapezoid_weights(phis);
    let deg = T::PI() / real::<T>(180.0);
    let two_pi = real::<T>(2.0) * T::PI();
    let mut g: Mat<T> = Array2::zeros((m, m));
    let mut e: Vec<Complex<T>> = vec![Complex::new(T::zero(), T::zero()); m];
    for (ti, &th) in thetas.iter().enumerate() {
        let sin_th = (th * deg).sin().abs();
        if sin_th == T::zero() && thetas.len() > 1 {
            continue;
        }
        for (pi_, &ph) in phis.iter().enumerate() {
            let w = wt[ti] * wp[pi_] * sin_th * deg * deg;
            if w == T::zero() {
                continue;
            }
            let gain = pat.gain(th, ph);
            let psi = geom.steering_phase(th, ph);
            for (mm, &p) in psi.iter().enumerate() {
                let ang = two_pi * p;
                e[mm] = Complex::new(gain * ang.cos(), gain * ang.sin());
            }
            for a in 0..m {
                for b in a..m {
                    let v = e[a] * e[b].conj() * w;
                    g[(a, b)] += v;
                    if b != a {
                        g[(b, a)] += v.conj();
                    }
                }
            }
        }
    }
    g
}

/// Band-integrated cross-spectra of the antenna streams: Welch segments,
/// Hann window; `C[m][j] = avg_seg sum_{bins in band} F_m conj(F_j) / Wss`.
/// The diagonal of the full-band matrix is each antenna's mean power.
fn band_cross_integrals<T: Real>(
    y: &Mat<T>,
    segment: usize,
    overlap: T,
    band: (T, T),
) -> Result<(Mat<T>, Mat<T>)> {
    let n = y.ncols();
    let m = y.nrows();
    if segment < 2 || n < segment {
        return Err(SimError::InvalidInput(format!(
            "stream of {n} samples with segment {segment}"
        )));
    }
    let ov = overlap.to_f64().unwrap_or(0.5);
    if !(0.0..1.0).contains(&ov) {
        return Err(SimError::InvalidInput("overlap must be in [0, 1)".into()));
    }
    let window = hann::<T>(segment);
    let wsum: T = window.iter().map(|&w| w * w).sum();
    let starts = segment_starts(n, segment, ov);
    let mut planner = FftPlanner::<T>::new();
    let fft = planner.plan_fft_forward(segment);
    // bin -> normalized frequency, unshifted order
    let bin_freq: Vec<T> = (0..segment)
        .map(|k| {
            let f = k as f64 / segment as f64;
            real::<T>(if f >= 0.5 { f - 1.0 } else { f })
        })
        .collect();
    let in_band: Vec<bool> = bin_freq.iter().map(|&f| in_range(f, band.0, band.1)).collect();
    let mut c_band: Mat<T> = Array2::zeros((m, m));
    let mut c_full: Mat<T> = Array2::zeros((m, m));
    let mut spectra: Vec<Vec<Complex<T>>> = vec![vec![Complex::new(T::zero(), T::zero()); segment]; m];
    for &s0 in &starts {
        for r in 0..m {
            let row = y.row(r);
            for i in 0..segment {
                spectra[r][i] = row[s0 + i] * window[i];
            }
            fft.process(&mut spectra[r]);
        }
        for a in 0..m {
            for b in a..m {
                let mut sb = Complex::new(T::zero(), T::zero());
                let mut sf = Complex::new(T::zero(), T::zero());
                for k in 0..segment {
                    let v = spectra[a][k] * spectra[b][k].conj();
                    sf += v;
                    if in_band[k] {
                        sb += v;
                    }
                }
                c_band[(a, b)] += sb;
                c_full[(a, b)] += sf;
                if b != a {
                    c_band[(b, a)] = c_band[(a, b)].conj();
                    c_full[(b, a)] = c_full[(a, b)].conj();
                }
            }
        }
    }
    let norm = Complex::new(
        T::one() / (real::<T>(starts.len() as f64) * wsum * real::<T>(segment as f64)),
        T::zero(),
    );
    c_band.mapv_inplace(|v| v * norm);
    c_full.mapv_inplace(|v| v * norm);
    Ok((c_band, c_full))
}

fn combine<T: Real>(c: &Mat<T>, g: &Mat<T>) -> T {
    c.iter().zip(g.iter()).map(|(a, b)| (a * b).re).sum()
}

/// Space-frequency power split of an antenna frame: `(useful, unwanted)`
/// integrated over `band x cone` and its complement.
pub fn emission_integrals<T: Real>(
    y: &Mat<T>,
    geom: &ArrayGeometry<T>,
    pat: &ElementPattern<T>,
    spec: &EmissionSpec<T>,
    grid: &AngularGrid<T>,
) -> Result<(T, T)> {
    if y.nrows() != geom.len() {
        return Err(SimError::ShapeMismatch(format!(
            "frame has {} rows, geometry {} elements",
            y.nrows(),
            geom.len()
        )));
    }
    let cone_thetas: Vec<T> = grid
        .theta_deg
        .iter()
        .cloned()
        .filter(|&t| in_range(t, spec.cone.theta_deg.0, spec.cone.theta_deg.1))
        .collect();
    let cone_phis: Vec<T> = grid
        .phi_deg
        .iter()
        .cloned()
        .filter(|&p| in_range(p, spec.cone.phi_deg.0, spec.cone.phi_deg.1))
        .collect();
    if cone_thetas.is_empty() || cone_phis.is_empty() {
        return Err(SimError::InvalidInput("useful cone contains no grid points".into()));
    }
    let band_covers_all = spec.band.0 <= real::<T>(-0.5) && spec.band.1 >= real::<T>(0.5);
    let cone_covers_all = cone_thetas.len() == grid.theta_deg.len()
        && cone_phis.len() == grid.phi_deg.len();
    if band_covers_all && cone_covers_all {
        return Err(SimError::InvalidInput(
            "unwanted region is empty: useful box covers the whole sampled domain".into(),
        ));
    }
    let (c_band, c_full) = band_cross_integrals(y, spec.segment, spec.overlap, spec.band)?;
    let g_cone = pattern_gram(geom, pat, &cone_thetas, &cone_phis);
    let g_hemi = pattern_gram(geom, pat, &grid.theta_deg, &grid.phi_deg);
    let useful = combine(&c_band, &g_cone);
    let total = combine(&c_full, &g_hemi);
    let unwanted = total - useful;
    Ok((useful, unwanted))
}

fn ratio_db<T: Real>(num: T, den: T) -> Result<T> {
    if !(num > T::zero()) {
        return Err(SimError::Numeric("useful emission power is zero".into()));
    }
    if den <= num * real::<T>(1e-14) {
        return Ok(T::infinity());
    }
    Ok(real::<T>(10.0) * (num / den).log10())
}

/// Adjacent space-frequency leakage ratio in dB: useful power over unwanted
/// power (`+inf` when the unwanted region carries no energy).
pub fn aslr<T: Real>(
    y: &Mat<T>,
    geom: &ArrayGeometry<T>,
    pat: &ElementPattern<T>,
    spec: &EmissionSpec<T>,
    grid: &AngularGrid<T>,
) -> Result<T> {
    let (useful, unwanted) = emission_integrals(y, geom, pat, spec, grid)?;
    ratio_db(useful, unwanted)
}

/// Total unwanted emission power relative to the average received per-user
/// in-band power, in dB.
pub fn unwanted_emission_rel<T: Real>(
    y: &Mat<T>,
    geom: &ArrayGeometry<T>,
    pat: &ElementPattern<T>,
    spec: &EmissionSpec<T>,
    grid: &AngularGrid<T>,
    per_user_rx_power: T,
) -> Result<T> {
    if !(per_user_rx_power > T::zero()) {
        return Err(SimError::InvalidInput("per-user receive power must be > 0".into()));
    }
    let (_, unwanted) = emission_integrals(y, geom, pat, spec, grid)?;
    if unwanted <= T::zero() {
        return Ok(T::neg_infinity());
    }
    Ok(real::<T>(10.0) * (unwanted / per_user_rx_power).log10())
}

#[allow(unused_imports)]
use num_traits::ToPrimitive;

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::ArrayGeometry;
    use crate::rng::{standard_complex, tagged_stream};
    use crate::waveform::{frame_from_bits, pulse_shape, PulseConfig, QamConfig};
    use crate::C64;
    use ndarray::Array2;
    use rand::Rng;

    fn noisy_pair(l: usize, var: f64, seed: u64) -> (Mat<f64>, Mat<f64>) {
        let mut rng = tagged_stream(seed, &[l as u64]);
        let s = Array2::from_shape_fn((1, l), |_| standard_complex::<f64, _>(&mut rng));
        let sigma = var.sqrt();
        let y = s.mapv(|v| v + standard_complex::<f64, _>(&mut rng) * C64::new(sigma, 0.0));
        (s, y)
    }

    #[test]
    fn evm_zero_for_exact_and_scaled_copies() {
        let (s, _) = noisy_pair(512, 0.1, 1);
        let r = evm(&s, &s).unwrap();
        assert!(r.avg < 1e-12);
        let c = C64::new(-0.3, 1.7);
        let y = s.mapv(|v| v * c);
        let r = evm(&s, &y).unwrap();
        assert!(r.avg < 1e-10, "scaled copy EVM {}", r.avg);
    }

    #[test]
    fn evm_gain_invariance() {
        let (s, y) = noisy_pair(4096, 0.05, 2);
        let base = evm(&s, &y).unwrap().avg;
        for c in [C64::new(2.0, 0.0), C64::new(0.0, -3.0), C64::new(1.4, 0.7)] {
            let scaled = y.mapv(|v| v * c);
            let e = evm(&s, &scaled).unwrap().avg;
            assert!((e - base).abs() < 1e-10, "gain {c}: {e} vs {base}");
        }
    }

    #[test]
    fn evm_awgn_analytic_limit() {
        let (s, y) = noisy_pair(100_000, 0.1, 3);
        let r = evm(&s, &y).unwrap();
        assert!((r.avg - 31.6228).abs() < 1.0, "EVM {}", r.avg);
    }

    #[test]
    fn evm_snr_consistency() {
        let (s, y) = noisy_pair(120_000, 0.1, 4);
        let e = evm(&s, &y).unwrap().avg;
        let snr = snr_of(&s, &y).unwrap();
        let evm_db = 20.0 * (e / 100.0).log10();
        assert!((evm_db + snr).abs() < 0.2, "EVM {evm_db:.2} dB vs SNR {snr:.2} dB");
    }

    #[test]
    fn evm_rejects_zero_received() {
        let (s, _) = noisy_pair(64, 0.1, 5);
        let zero: Mat<f64> = Array2::zeros((1, 64));
        assert!(evm(&s, &zero).is_err());
    }

    #[test]
    fn snr_examples() {
        let (s, y) = noisy_pair(200_000, 0.1, 6);
        let snr = snr_of(&s, &y).unwrap();
        assert!((snr - 10.0).abs() < 0.1, "snr {snr}");
        let doubled = s.mapv(|v| v * 2.0);
        let zero_db = snr_of(&s, &doubled).unwrap();
        assert!(zero_db.abs() < 1e-9);
        assert!(snr_of(&s, &s).unwrap().is_infinite());
    }

    #[test]
    fn psd_peak_at_tone_frequency() {
        let f0 = 0.19f64;
        let n = 4096;
        let y: Vec<C64> = (0..n)
            .map(|t| {
                let ph = 2.0 * std::f64::consts::PI * f0 * t as f64;
                C64::new(ph.cos(), ph.sin())
            })
            .collect();
        let sp = psd_welch(&y, 256, 0.5).unwrap();
        let peak = sp
            .power
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .unwrap()
            .0;
        assert!((sp.freq[peak] - f0).abs() < 1.0 / 256.0);
    }

    #[test]
    fn psd_parseval_audit_on_white_noise() {
        let mut rng = tagged_stream(7, &[0]);
        let var = 2.3f64;
        let y: Vec<C64> = (0..32_768)
            .map(|_| standard_complex::<f64, _>(&mut rng) * C64::new(var.sqrt(), 0.0))
            .collect();
        let time_power: f64 = y.iter().map(|v| v.norm_sqr()).sum::<f64>() / y.len() as f64;
        let sp = psd_welch(&y, 512, 0.5).unwrap();
        let spec_power: f64 = sp.power.iter().sum();
        assert!(
            (spec_power / time_power - 1.0).abs() < 0.02,
            "spectral {spec_power} vs time {time_power}"
        );
    }

    #[test]
    fn psd_rrc_half_power_bandwidth() {
        let qam = QamConfig::new(64, 8192).unwrap();
        let pulse = PulseConfig::new(0.22f64, 5, 12).unwrap();
        let mut rng = tagged_stream(8, &[1]);
        let bits: Vec<bool> = (0..8192 * 6).map(|_| rng.random::<bool>()).collect();
        let frame = frame_from_bits::<f64>(&bits, 1, &qam).unwrap();
        let wave = pulse_shape(&frame, &pulse).unwrap();
        let row: Vec<C64> = wave.row(0).to_vec();
        let sp = psd_welch(&row, 512, 0.5).unwrap();
        // order by frequency and lightly smooth against per-bin noise
        let mut order: Vec<usize> = (0..sp.freq.len()).collect();
        order.sort_by(|&a, &b| sp.freq[a].total_cmp(&sp.freq[b]));
        let p_sorted: Vec<f64> = order.iter().map(|&i| sp.power[i]).collect();
        let f_sorted: Vec<f64> = order.iter().map(|&i| sp.freq[i]).collect();
        let smooth: Vec<f64> = (0..p_sorted.len())
            .map(|i| {
                let lo = i.saturating_sub(1);
                let hi = (i + 1).min(p_sorted.len() - 1);
                p_sorted[lo..=hi].iter().sum::<f64>() / (hi - lo + 1) as f64
            })
            .collect();
        let peak = f_sorted
            .iter()
            .zip(smooth.iter())
            .filter(|(f, _)| f.abs() <= 0.05)
            .map(|(_, &p)| p)
            .sum::<f64>()
            / f_sorted.iter().filter(|f| f.abs() <= 0.05).count() as f64;
        // scan outward from DC for the half-power crossings
        let dc = f_sorted.iter().position(|&f| f >= 0.0).unwrap();
        let cross_hi = (dc..f_sorted.len())
            .find(|&i| smooth[i] < peak / 2.0)
            .map(|i| f_sorted[i])
            .unwrap();
        let cross_lo = (0..=dc)
            .rev()
            .find(|&i| smooth[i] < peak / 2.0)
            .map(|i| f_sorted[i])
            .unwrap();
        let width = cross_hi - cross_lo;
        let bin = 1.0 / 512.0;
        assert!(
            (width - 0.2).abs() <= 2.0 * bin,
            "half-power width {width:.4} (expected 0.2 +- {:.4})",
            2.0 * bin
        );
    }

    #[test]
    fn psd_rejects_short_streams() {
        let y = vec![C64::new(1.0, 0.0); 16];
        assert!(psd_welch(&y, 64, 0.5).is_err());
    }

    fn default_spec(segment: usize) -> EmissionSpec<f64> {
        EmissionSpec {
            band: (-0.122, 0.122),
            cone: AngularSector { theta_deg: (-30.0, 30.0), phi_deg: (-60.0, 60.0) },
            segment,
            overlap: 0.5,
        }
    }

    #[test]
    fn single_antenna_aslr_equals_pure_spectral_ratio() {
        // cone = full hemisphere, so only the band edge separates regions
        let geom = ArrayGeometry::rectangular(1, 0.5f64).unwrap();
        let pat = ElementPattern::isotropic();
        let n = 8192;
        let y_row: Vec<C64> = {
            let mut rng = tagged_stream(9, &[2]);
            (0..n)
                .map(|t| {
                    let ph1 = 2.0 * std::f64::consts::PI * 0.05 * t as f64;
                    let ph2 = 2.0 * std::f64::consts::PI * 0.35 * t as f64;
                    C64::new(ph1.cos(), ph1.sin())
                        + C64::new(ph2.cos(), ph2.sin()) * 0.3
                        + standard_complex::<f64, _>(&mut rng) * 0.01
                })
                .collect()
        };
        let y = Array2::from_shape_vec((1, n), y_row.clone()).unwrap();
        let spec = EmissionSpec {
            band: (-0.2, 0.2),
            cone: AngularSector { theta_deg: (-90.0, 90.0), phi_deg: (-90.0, 90.0) },
            segment: 256,
            overlap: 0.5,
        };
        let grid = AngularGrid::hemisphere(6.0).unwrap();
        let got = aslr(&y, &geom, &pat, &spec, &grid).unwrap();
        let sp = psd_welch(&y_row, 256, 0.5).unwrap();
        let mut pin = 0.0;
        let mut pout = 0.0;
        for (f, p) in sp.freq.iter().zip(sp.power.iter()) {
            if f.abs() <= 0.2 {
                pin += p;
            } else {
                pout += p;
            }
        }
        let oracle = 10.0 * (pin / pout).log10();
        assert!((got - oracle).abs() < 0.05, "aslr {got:.3} vs spectral {oracle:.3}");
    }

    #[test]
    fn separable_path_matches_bruteforce_integration() {
        let geom = ArrayGeometry::rectangular(4, 0.5f64).unwrap();
        let pat = ElementPattern::patch(1.5);
        let mut rng = tagged_stream(10, &[3]);
        let n = 512;
        let segment = 128;
        let y = Array2::from_shape_fn((4, n), |_| standard_complex::<f64, _>(&mut rng));
        let spec = default_spec(segment);
        let grid = AngularGrid::hemisphere(10.0).unwrap();
        let (useful, unwanted) = emission_integrals(&y, &geom, &pat, &spec, &grid).unwrap();

        // brute force: sweep every (bin, direction) and accumulate
        let window = hann::<f64>(segment);
        let wsum: f64 = window.iter().map(|w| w * w).sum();
        let starts = segment_starts(n, segment, 0.5);
        let mut planner = FftPlanner::<f64>::new();
        let fft = planner.plan_fft_forward(segment);
        let mut spectra: Vec<Vec<Vec<C64>>> = Vec::new(); // [seg][ant][bin]
        for &s0 in &starts {
            let mut per_ant = Vec::new();
            for r in 0..4 {
                let mut buf: Vec<C64> = (0..segment).map(|i| y[(r, s0 + i)] * window[i]).collect();
                fft.process(&mut buf);
                per_ant.push(buf);
            }
            spectra.push(per_ant);
        }
        // direct double-sum over (direction, bin); each angular region is
        // integrated with its own trapezoid rule, matching the fast path
        let deg = std::f64::consts::PI / 180.0;
        let sweep = |thetas: &[f64], phis: &[f64], band_only: bool| -> f64 {
            let wt = trapezoid_weights(thetas);
            let wp = trapezoid_weights(phis);
            let mut out = 0.0;
            for (ti, &th) in thetas.iter().enumerate() {
                let sin_th = (th * deg).sin().abs();
                for (pi_, &ph) in phis.iter().enumerate() {
                    let w_ang = wt[ti] * wp[pi_] * sin_th * deg * deg;
                    let gain = pat.gain(th, ph);
                    let psi = geom.steering_phase(th, ph);
                    let e: Vec<C64> = psi
                        .iter()
                        .map(|&p| {
                            let a = 2.0 * std::f64::consts::PI * p;
                            C64::new(gain * a.cos(), gain * a.sin())
                        })
                        .collect();
                    for k in 0..segment {
                        let f = {
                            let f = k as f64 / segment as f64;
                            if f >= 0.5 {
                                f - 1.0
                            } else {
                                f
                            }
                        };
                        if band_only && f.abs() > 0.122 + 1e-9 {
                            continue;
                        }
                        let mut acc = 0.0;
                        for seg in &spectra {
                            let mut field = C64::new(0.0, 0.0);
                            for m in 0..4 {
                                field += seg[m][k] * e[m];
                            }
                            acc += field.norm_sqr();
                        }
                        out += acc / (starts.len() as f64 * wsum * segment as f64) * w_ang;
                    }
                }
            }
            out
        };
        let cone_t: Vec<f64> = grid.theta_deg.iter().cloned().filter(|t| t.abs() <= 30.0 + 1e-9).collect();
        let cone_p: Vec<f64> = grid.phi_deg.iter().cloned().filter(|p| p.abs() <= 60.0 + 1e-9).collect();
        let brute_useful = sweep(&cone_t, &cone_p, true);
        let brute_total = sweep(&grid.theta_deg, &grid.phi_deg, false);
        let brute_unwanted = brute_total - brute_useful;
        assert!(
            (useful / brute_useful - 1.0).abs() < 1e-10,
            "useful {useful} vs brute {brute_useful}"
        );
        assert!(
            (unwanted / brute_unwanted - 1.0).abs() < 1e-9,
            "unwanted {unwanted} vs brute {brute_unwanted}"
        );
    }

    #[test]
    fn empty_unwanted_region_is_an_error() {
        let geom = ArrayGeometry::rectangular(2, 0.5f64).unwrap();
        let pat = ElementPattern::isotropic();
        let mut rng = tagged_stream(11, &[4]);
        let y = Array2::from_shape_fn((2, 512), |_| standard_complex::<f64, _>(&mut rng));
        let spec = EmissionSpec {
            band: (-0.5, 0.5),
            cone: AngularSector { theta_deg: (-90.0, 90.0), phi_deg: (-90.0, 90.0) },
            segment: 128,
            overlap: 0.5,
        };
        let grid = AngularGrid::hemisphere(10.0).unwrap();
        assert!(matches!(
            aslr(&y, &geom, &pat, &spec, &grid),
            Err(SimError::InvalidInput(_))
        ));
    }

    #[test]
    fn zero_unwanted_energy_yields_infinite_sentinel() {
        assert!(ratio_db(1.0f64, 0.0).unwrap().is_infinite());
        assert!(ratio_db(1.0f64, 1e-16).unwrap().is_infinite());
        assert!(ratio_db(1.0f64, 0.5).unwrap().is_finite());
        assert!(ratio_db(0.0f64, 0.5).is_err());
    }

    #[test]
    fn emission_ratio_is_scale_invariant() {
        let geom = ArrayGeometry::rectangular(4, 0.5f64).unwrap();
        let pat = ElementPattern::patch(1.5);
        let mut rng = tagged_stream(12, &[5]);
        let y = Array2::from_shape_fn((4, 1024), |_| standard_complex::<f64, _>(&mut rng));
        let spec = default_spec(256);
        let grid = AngularGrid::hemisphere(10.0).unwrap();
        let rx_power = 0.7;
        let a = unwanted_emission_rel(&y, &geom, &pat, &spec, &grid, rx_power).unwrap();
        let y2 = y.mapv(|v| v * 2.0);
        let b = unwanted_emission_rel(&y2, &geom, &pat, &spec, &grid, rx_power * 4.0).unwrap();
        assert!((a - b).abs() < 1e-9, "{a} vs {b}");
    }

    #[test]
    fn aslr_grid_convergence() {
        // reference scenario: small steered array with mild nonlinearity
        let geom = ArrayGeometry::rectangular(16, 0.5f64).unwrap();
        let pat = ElementPattern::patch(1.5);
        let qam = QamConfig::new(64, 384).unwrap();
        let pulse = PulseConfig::new(0.22f64, 5, 8).unwrap();
        let mut rng = tagged_stream(13, &[6]);
        let bits: Vec<bool> = (0..384 * 6).map(|_| rng.random::<bool>()).collect();
        let frame = frame_from_bits::<f64>(&bits, 1, &qam).unwrap();
        let wave = pulse_shape(&frame, &pulse).unwrap();
        let psi = geom.steering_phase(10.0, 20.0);
        let n = wave.ncols();
        let y = Array2::from_shape_fn((16, n), |(m, t)| {
            let a = -2.0 * std::f64::consts::PI * psi[m];
            let steer = C64::new(a.cos(), a.sin());
            let v = wave[(0, t)] * steer;
            v + v * v.norm_sqr() * 0.05 // mild odd-order distortion
        });
        let spec = default_spec(256);
        // halving the step from the 2-degree default must not move the answer
        let coarse = aslr(&y, &geom, &pat, &spec, &AngularGrid::hemisphere(2.0).unwrap()).unwrap();
        let fine = aslr(&y, &geom, &pat, &spec, &AngularGrid::hemisphere(1.0).unwrap()).unwrap();
        assert!((coarse - fine).abs() < 0.2, "coarse {coarse:.3} dB vs fine {fine:.3} dB");
    }
}
