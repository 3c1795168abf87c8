//! Transmit DAC model: uniform Cartesian quantization with hard-limiting,
//! plus uniform and null-space-projected dithering.
//!
//! Quantization is mid-rise per rail: inputs are clipped to the full-scale
//! range and rounded to the nearest of `2^bits` level centers. Dither is
//! non-subtractive; the null-space-projected variant pushes the dither
//! through `P = I - H (H^H H)^{-1} H^H` so it never reaches any user.

use ndarray::{Array2, ArrayView2};
use num_complex::Complex;
use rand::Rng;

use crate::channel::ChannelMatrix;
use crate::linalg::{fro_norm, herm_mul, orthonormal_basis};
use crate::rng::uniform_complex;
use crate::{real, Mat, Real, Result, SimError};

/// Dither policy for the transmit DACs.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DitherPolicy {
    None,
    Uniform,
    Nspd,
}

/// Uniform quantizer configuration (per I/Q rail).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct QuantizerConfig<T> {
    /// Resolution in bits, 1..=16.
    pub bits: u32,
    /// Clip level per rail; the DAC hard-limits beyond it.
    pub fullscale: T,
    pub dither: DitherPolicy,
}

impl<T: Real> QuantizerConfig<T> {
    pub fn new(bits: u32, fullscale: T, dither: DitherPolicy) -> Result<Self> {
        let cfg = Self { bits, fullscale, dither };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.bits < 1 || self.bits > 16 {
            return Err(SimError::InvalidInput(format!(
                "bits must be in 1..=16, got {}",
                self.bits
            )));
        }
        if !(self.fullscale > T::zero()) {
            return Err(SimError::InvalidInput("fullscale must be > 0".into()));
        }
        Ok(())
    }

    /// Step size `2 * fullscale / 2^bits`.
    pub fn lsb(&self) -> T {
        real::<T>(2.0) * self.fullscale / real::<T>((1u64 << self.bits) as f64)
    }

    pub fn levels(&self) -> usize {
        1usize << self.bits
    }
}

fn quantize_rail<T: Real>(v: T, fullscale: T, lsb: T, levels: isize) -> T {
    let clipped = v.max(-fullscale).min(fullscale);
    let t = ((clipped + fullscale) / lsb).floor();
    let k = t.to_f64().map(|x| x as isize).unwrap_or(0).clamp(0, levels - 1);
    (real::<T>(k as f64) + real::<T>(0.5)) * lsb - fullscale
}

/// Mid-rise uniform quantization, independently per rail. Deterministic;
/// clipping is defined behavior.
pub fn quantize<T: Real>(x: &Mat<T>, cfg: &QuantizerConfig<T>) -> Mat<T> {
    let lsb = cfg.lsb();
    let fs = cfg.fullscale;
    let levels = cfg.levels() as isize;
    x.mapv(|v| {
        Complex::new(
            quantize_rail(v.re, fs, lsb, levels),
            quantize_rail(v.im, fs, lsb, levels),
        )
    })
}

/// Independent uniform dither on `(-lsb/2, lsb/2)` for both rails of every
/// entry.
pub fn draw_dither<T: Real, R: Rng>(m: usize, n: usize, lsb: T, rng: &mut R) -> Result<Mat<T>> {
    if !(lsb > T::zero()) {
        return Err(SimError::InvalidInput("LSB must be > 0".into()));
    }
    let half = lsb / real::<T>(2.0);
    Ok(Array2::from_shape_fn((m, n), |_| uniform_complex(rng, half)))
}

/// Orthogonal projector onto the null space of the downlink map `H^H`.
///
/// Stored in factored form `P = I - Q Q^H` with `Q` an orthonormal basis of
/// the column space of `H`; the dense matrix is only materialized on demand.
#[derive(Debug, Clone)]
pub struct NullProjector<T> {
    q: Mat<T>,
    antennas: usize,
}

impl<T: Real> NullProjector<T> {
    pub fn antennas(&self) -> usize {
        self.antennas
    }

    pub fn rank_deficiency(&self) -> usize {
        self.antennas - self.q.ncols()
    }

    /// Applies the projector to a frame: `x - Q (Q^H x)`.
    pub fn apply(&self, x: &ArrayView2<'_, Complex<T>>) -> Result<Mat<T>> {
        if x.nrows() != self.antennas {
            return Err(SimError::ShapeMismatch(format!(
                "frame has {} rows, projector expects {}",
                x.nrows(),
                self.antennas
            )));
        }
        let coeff = herm_mul(&self.q.view(), x);
        Ok(x.to_owned() - self.q.dot(&coeff))
    }

    /// Dense `M x M` projector matrix.
    pub fn matrix(&self) -> Mat<T> {
        let mut p = crate::linalg::eye::<T>(self.antennas);
        let qqh = self.q.dot(&crate::linalg::herm(&self.q.view()));
        p = p - qqh;
        p
    }
}

/// Builds the channel null-space projector and certifies its invariants.
///
/// `M = K` yields the zero projector (empty null space); `K = 0` the
/// identity. Rank-deficient channels are rejected with a condition
/// diagnostic.
pub fn null_projector<T: Real>(ch: &ChannelMatrix<T>) -> Result<NullProjector<T>> {
    let (m, k) = (ch.antennas(), ch.users());
    if k == 0 {
        return Ok(NullProjector { q: Array2::zeros((m, 0)), antennas: m });
    }
    if m < k {
        return Err(SimError::InvalidInput(format!(
            "null projector needs M >= K, got M = {m}, K = {k}"
        )));
    }
    let (q, rdiag) = orthonormal_basis(&ch.h.view())?;
    let rmax = rdiag.iter().cloned().fold(T::zero(), T::max);
    let rmin = rdiag.iter().cloned().fold(T::infinity(), T::min);
    let tol = real::<T>(1e-10);
    if !(rmin > rmax * tol) {
        let cond = (rmax / rmin).to_f64().unwrap_or(f64::INFINITY);
        return Err(SimError::Numeric(format!(
            "channel is numerically rank deficient (triangular condition estimate {cond:.3e})"
        )));
    }
    let proj = NullProjector { q, antennas: m };
    // build-time certificate: the projector annihilates the downlink map
    let hp = herm_mul(&ch.h.view(), &proj.matrix().view());
    let rel = fro_norm(&hp.view()) / fro_norm(&ch.h.view());
    if rel > real::<T>(1e-8) {
        return Err(SimError::Numeric(format!(
            "projector certificate failed: |H^H P| / |H| = {:e}",
            rel.to_f64().unwrap_or(f64::NAN)
        )));
    }
    Ok(proj)
}

/// Quantizes a frame under the configured dither policy.
///
/// `none` is plain quantization; `uniform` adds fresh per-sample dither;
/// `nspd` projects the dither onto the channel null space first. Dither is
/// never subtracted after quantization. `nspd` requires `H` with `M > K`.
pub fn dithered_quantize<T: Real, R: Rng>(
    x: &Mat<T>,
    cfg: &QuantizerConfig<T>,
    ch: Option<&ChannelMatrix<T>>,
    rng: &mut R,
) -> Result<Mat<T>> {
    cfg.validate()?;
    match cfg.dither {
        DitherPolicy::None => Ok(quantize(x, cfg)),
        DitherPolicy::Uniform => {
            let eps = draw_dither(x.nrows(), x.ncols(), cfg.lsb(), rng)?;
            Ok(quantize(&(x + &eps), cfg))
        }
        DitherPolicy::Nspd => {
            let ch = ch.ok_or_else(|| {
                SimError::InvalidInput("nspd dithering needs the channel matrix".into())
            })?;
            if ch.antennas() <= ch.users() {
                return Err(SimError::InvalidInput(format!(
                    "nspd requires M > K, got M = {}, K = {}",
                    ch.antennas(),
                    ch.users()
                )));
            }
            let proj = null_projector(ch)?;
            let eps = draw_dither(x.nrows(), x.ncols(), cfg.lsb(), rng)?;
            let projected = proj.apply(&eps.view())?;
            Ok(quantize(&(x + &projected), cfg))
        }
    }
}
