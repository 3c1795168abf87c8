//! Simplified stochastic impairment models.
//!
//! Two families: an additive model that perturbs the precoded frame with
//! Gaussian noise whose per-antenna variance tracks the per-antenna signal
//! power, and a multiplicative model of per-branch amplitude/phase errors
//! applied on the channel side. Both carry an energy-conservation
//! normalization so the impairment never adds power.

use ndarray::Array1;
use num_complex::Complex;
use rand::Rng;

use crate::channel::ChannelMatrix;
use crate::linalg::{fro_norm, herm};
use crate::rng::{standard_complex, standard_normal};
use crate::{real, Mat, Real, Result, SimError};

/// Additive model: impairment variance is `nu` times the per-antenna signal
/// power.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct AdditiveParams<T> {
    pub nu: T,
}

impl<T: Real> AdditiveParams<T> {
    pub fn new(nu: T) -> Result<Self> {
        if !(nu >= T::zero()) {
            return Err(SimError::InvalidInput("nu must be >= 0".into()));
        }
        Ok(Self { nu })
    }
}

/// Multiplicative model: per-branch gain `(1 + a_m) e^{-i phi_m}` with
/// Gaussian amplitude and phase errors (fields are variances).
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct MultiplicativeParams<T> {
    pub sigma_a2: T,
    pub sigma_phi2: T,
}

impl<T: Real> MultiplicativeParams<T> {
    pub fn new(sigma_a2: T, sigma_phi2: T) -> Result<Self> {
        if !(sigma_a2 >= T::zero() && sigma_phi2 >= T::zero()) {
            return Err(SimError::InvalidInput("variances must be >= 0".into()));
        }
        Ok(Self { sigma_a2, sigma_phi2 })
    }
}

/// Applies the additive impairment to an antenna frame.
///
/// Draws `w` with per-antenna variance `nu * W_mm`, where `W_mm` is the
/// antenna's empirical power over the frame, and returns
/// `alpha (X + w)` with `alpha = |X|_F / |X + w|_F` when `normalize` is set
/// (else `alpha = 1`). The scale factor is returned alongside the frame.
pub fn additive_impair<T: Real, R: Rng>(
    x: &Mat<T>,
    p: &AdditiveParams<T>,
    rng: &mut R,
    normalize: bool,
) -> Result<(Mat<T>, T)> {
    let (m, n) = x.dim();
    if p.nu == T::zero() {
        return Ok((x.clone(), T::one()));
    }
    let inv_n = T::one() / real::<T>(n.max(1) as f64);
    let mut out = x.clone();
    for (r, mut row) in out.rows_mut().into_iter().enumerate() {
        let w_mm = x.row(r).iter().map(|v| v.norm_sqr()).sum::<T>() * inv_n;
        let sigma = (p.nu * w_mm).sqrt();
        for v in row.iter_mut() {
            *v += standard_complex::<T, _>(rng) * Complex::new(sigma, T::zero());
        }
    }
    let mut alpha = T::one();
    if normalize {
        let denom = fro_norm(&out.view());
        if !(denom > T::zero()) {
            return Err(SimError::Numeric(
                "additive normalization undefined for a zero-power frame".into(),
            ));
        }
        let num = fro_norm(&x.view());
        if !(num > T::zero()) {
            return Err(SimError::Numeric(
                "additive normalization undefined for a zero-power input".into(),
            ));
        }
        alpha = num / denom;
        out.mapv_inplace(|v| v * alpha);
    }
    let _ = m;
    Ok((out, alpha))
}

/// One draw of the multiplicative error model.
#[derive(Debug, Clone)]
pub struct MultImpairment<T> {
    /// Diagonal of the error matrix `E`.
    pub e_diag: Array1<Complex<T>>,
    /// Energy-conservation scale on the effective map `beta H^H E`.
    pub beta: T,
}

impl<T: Real> MultImpairment<T> {
    /// Effective downlink map `beta * H^H E` as a dense `K x M` matrix.
    pub fn effective_map(&self, ch: &ChannelMatrix<T>) -> Mat<T> {
        let mut he = ch.h.clone();
        for (r, mut row) in he.rows_mut().into_iter().enumerate() {
            // column scaling of H^H == row scaling of H by conj pairs:
            // (H^H E)_{k,m} = conj(H_{m,k}) E_m  => scale H rows by conj(E_m)
            let e = self.e_diag[r].conj();
            for v in row.iter_mut() {
                *v *= e;
            }
        }
        let mut map = herm(&he.view());
        let beta = Complex::new(self.beta, T::zero());
        map.mapv_inplace(|v| v * beta);
        map
    }

    /// Applies `beta H^H E` to an antenna frame.
    pub fn apply(&self, ch: &ChannelMatrix<T>, x: &Mat<T>) -> Result<Mat<T>> {
        if x.nrows() != ch.antennas() {
            return Err(SimError::ShapeMismatch(format!(
                "frame has {} rows, channel has {} antennas",
                x.nrows(),
                ch.antennas()
            )));
        }
        Ok(self.effective_map(ch).dot(x))
    }
}

/// Draws the multiplicative error matrix for one channel realization.
pub fn mult_impair<T: Real, R: Rng>(
    ch: &ChannelMatrix<T>,
    p: &MultiplicativeParams<T>,
    rng: &mut R,
    normalize: bool,
) -> MultImpairment<T> {
    let m = ch.antennas();
    let sa = p.sigma_a2.sqrt();
    let sp = p.sigma_phi2.sqrt();
    let e_diag = Array1::from_iter((0..m).map(|_| {
        let a = standard_normal::<T, _>(rng) * sa;
        let phi = standard_normal::<T, _>(rng) * sp;
        Complex::new((T::one() + a) * phi.cos(), -(T::one() + a) * phi.sin())
    }));
    let mut beta = T::one();
    if normalize {
        // |H^H E|_F: scale each row m of H by |E_m| and take the norm
        let mut num = T::zero();
        let mut den = T::zero();
        for r in 0..m {
            let rp = ch.h.row(r).iter().map(|v| v.norm_sqr()).sum::<T>();
            num += rp;
            den += rp * e_diag[r].norm_sqr();
        }
        if den > T::zero() {
            beta = (num / den).sqrt();
        }
    }
    MultImpairment { e_diag, beta }
}
