//! Regularized zero-forcing precoding with total-power normalization.

use num_complex::Complex;

use crate::channel::ChannelMatrix;
use crate::linalg::{herm_mul, mean_power, solve_hpd};
use crate::{real, Mat, Real, Result, SimError};

/// Precoding matrix `G = H (H^H H + I/snr)^{-1}` plus the regularization it
/// was built with.
#[derive(Debug, Clone)]
pub struct Precoder<T> {
    pub g: Mat<T>,
    pub snr_linear: T,
}

/// Builds the RZF precoder. The regularized Gram is `K x K`; a strictly
/// positive `snr_linear` keeps it positive definite for any `H`.
pub fn rzf<T: Real>(ch: &ChannelMatrix<T>, snr_linear: T) -> Result<Precoder<T>> {
    if !(snr_linear > T::zero()) {
        return Err(SimError::InvalidInput("snr_linear must be > 0".into()));
    }
    let h = &ch.h;
    let k = h.ncols();
    let mut gram = herm_mul(&h.view(), &h.view());
    let reg = T::one() / snr_linear;
    for i in 0..k {
        gram[(i, i)] += Complex::new(reg, T::zero());
    }
    // G = H A^{-1} with Hermitian A: solve A Y = H^H, then G = Y^H
    let hh = crate::linalg::herm(&h.view());
    let y = solve_hpd(&gram.view(), &hh.view())?;
    let g = crate::linalg::herm(&y.view());
    Ok(Precoder { g, snr_linear })
}

/// Applies the precoder to a per-user waveform (`K x N`), optionally scaling
/// the result so the measured total transmit power over the frame is 1.
///
/// Returns the antenna frame (`M x N`) and the scale that was applied.
pub fn apply_precoder<T: Real>(
    p: &Precoder<T>,
    frame: &Mat<T>,
    normalize: bool,
) -> Result<(Mat<T>, T)> {
    if p.g.ncols() != frame.nrows() {
        return Err(SimError::ShapeMismatch(format!(
            "precoder serves {} users, frame has {} rows",
            p.g.ncols(),
            frame.nrows()
        )));
    }
    let mut x = p.g.dot(frame);
    let mut scale = T::one();
    if normalize {
        let m = x.nrows();
        // E||x[n]||^2 = 1  <=>  mean per-entry power = 1/M
        let per_entry = mean_power(&x.view());
        if !(per_entry > T::zero()) {
            return Err(SimError::Numeric("cannot normalize a zero-power frame".into()));
        }
        scale = (T::one() / (per_entry * real::<T>(m as f64))).sqrt();
        x.mapv_inplace(|v| v * scale);
    }
    Ok((x, scale))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::{draw_iid, ChannelMatrix};
    use crate::linalg::{eye, fro_norm, herm_mul};
    use crate::rng::{standard_complex, tagged_stream};
    use crate::C64;
    use ndarray::Array2;

    fn wrap(h: Mat<f64>) -> ChannelMatrix<f64> {
        let dim = h.dim();
        ChannelMatrix { h, kappa: 0.0, h_iid: Array2::zeros(dim), h_los: Array2::zeros(dim) }
    }

    #[test]
    fn scalar_channel_hand_value() {
        let mut h = Array2::zeros((1, 1));
        h[(0, 0)] = C64::new(1.0, 0.0);
        let p = rzf(&wrap(h), 1.0).unwrap();
        assert!((p.g[(0, 0)] - C64::new(0.5, 0.0)).norm() < 1e-15);
    }

    #[test]
    fn zf_limit_inverts_the_channel() {
        let mut rng = tagged_stream(2, &[0]);
        let h = draw_iid::<f64, _>(12, 4, &mut rng);
        let p = rzf(&wrap(h.clone()), 1e12).unwrap();
        let prod = herm_mul(&h.view(), &p.g.view());
        let dev = &prod - &eye::<f64>(4);
        assert!(fro_norm(&dev.view()) < 1e-6, "H^H G deviation {}", fro_norm(&dev.view()));
    }

    #[test]
    fn orthogonal_columns_gain() {
        // H with orthogonal columns of norm sqrt(M): scaled identity blocks
        let m = 9;
        let mut h: Mat<f64> = Array2::zeros((m, 3));
        for k in 0..3 {
            for r in 0..3 {
                let ph = 2.0 * std::f64::consts::PI * (k * r) as f64 / 3.0;
                let v = C64::new(ph.cos(), ph.sin());
                h[(3 * r + k, k)] = v * 3.0f64.sqrt();
            }
        }
        let gram = herm_mul(&h.view(), &h.view());
        for i in 0..3 {
            assert!((gram[(i, i)] - C64::new(9.0, 0.0)).norm() < 1e-12);
        }
        let snr = 4.0;
        let p = rzf(&wrap(h.clone()), snr).unwrap();
        let expect = h.mapv(|v| v / C64::new(9.0 + 1.0 / snr, 0.0));
        let dev = &p.g - &expect;
        assert!(fro_norm(&dev.view()) < 1e-12);
    }

    #[test]
    fn regularization_shrinks_the_precoder() {
        let mut rng = tagged_stream(4, &[1]);
        let h = draw_iid::<f64, _>(16, 4, &mut rng);
        let hi = rzf(&wrap(h.clone()), 100.0).unwrap();
        let lo = rzf(&wrap(h), 1.0).unwrap();
        assert!(fro_norm(&hi.g.view()) >= fro_norm(&lo.g.view()));
    }

    #[test]
    fn identity_precoder_without_scaling_passes_through() {
        let p = Precoder { g: eye::<f64>(3), snr_linear: 10.0 };
        let mut rng = tagged_stream(5, &[2]);
        let frame = Array2::from_shape_fn((3, 40), |_| standard_complex::<f64, _>(&mut rng));
        let (x, scale) = apply_precoder(&p, &frame, false).unwrap();
        assert_eq!(scale, 1.0);
        let d = &x - &frame;
        assert!(fro_norm(&d.view()) == 0.0);
    }

    #[test]
    fn zero_frame_maps_to_zero() {
        let p = Precoder { g: eye::<f64>(3), snr_linear: 10.0 };
        let frame: Mat<f64> = Array2::zeros((3, 5));
        let (x, _) = apply_precoder(&p, &frame, false).unwrap();
        assert!(x.iter().all(|v| v.norm() == 0.0));
        assert!(apply_precoder(&p, &frame, true).is_err());
    }

    #[test]
    fn normalized_frame_has_unit_total_power() {
        let mut rng = tagged_stream(6, &[3]);
        let h = draw_iid::<f64, _>(24, 4, &mut rng);
        let p = rzf(&wrap(h), 10.0).unwrap();
        let frame = Array2::from_shape_fn((4, 512), |_| standard_complex::<f64, _>(&mut rng));
        let (x, _) = apply_precoder(&p, &frame, true).unwrap();
        let total: f64 = x.iter().map(|v| v.norm_sqr()).sum::<f64>() / 512.0;
        assert!((total - 1.0).abs() < 1e-3, "E||x||^2 = {total}");
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = Precoder { g: eye::<f64>(3), snr_linear: 10.0 };
        let frame: Mat<f64> = Array2::zeros((4, 5));
        assert!(matches!(
            apply_precoder(&p, &frame, false),
            Err(SimError::ShapeMismatch(_))
        ));
    }
}
