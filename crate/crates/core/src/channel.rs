//! Rice-mixture channel generation.
//!
//! The channel matrix mixes an IID circularly symmetric Gaussian component
//! with a geometry-derived line-of-sight component, weighted by the Rice
//! factor kappa. LOS phases come from the per-element coordinates and the
//! user direction: `psi_m = X_m sin(theta) cos(phi) + Y_m sin(theta) sin(phi)`
//! with theta the elevation from boresight and phi the azimuth, wavelength
//! normalized to 1.

use ndarray::Array2;
use num_complex::Complex;
use rand::Rng;

use crate::rng::standard_complex;
use crate::{real, Mat, Real, Result, SimError};

/// Planar antenna array on a rectangular grid (wavelength units).
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayGeometry<T> {
    positions: Vec<(T, T)>,
    rows: usize,
    cols: usize,
    spacing: T,
}

impl<T: Real> ArrayGeometry<T> {
    /// Grid with explicit shape, row-major element order, `X = col * d`,
    /// `Y = row * d`.
    pub fn grid(rows: usize, cols: usize, spacing: T) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(SimError::InvalidInput("grid dimensions must be >= 1".into()));
        }
        if !(spacing > T::zero()) {
            return Err(SimError::InvalidInput("element spacing must be > 0".into()));
        }
        let positions = (0..rows * cols)
            .map(|m| {
                let r = m / cols;
                let c = m % cols;
                (spacing * real::<T>(c as f64), spacing * real::<T>(r as f64))
            })
            .collect();
        Ok(Self { positions, rows, cols, spacing })
    }

    /// Square-as-possible grid for `m` elements: `cols = ceil(sqrt(m))`,
    /// rows filled row-major until `m` elements are placed.
    pub fn rectangular(m: usize, spacing: T) -> Result<Self> {
        if m == 0 {
            return Err(SimError::InvalidInput("array needs at least one element".into()));
        }
        let cols = (m as f64).sqrt().ceil() as usize;
        let rows = m.div_ceil(cols);
        let mut g = Self::grid(rows, cols, spacing)?;
        g.positions.truncate(m);
        Ok(g)
    }

    /// Single-row array of `m` elements.
    pub fn row(m: usize, spacing: T) -> Result<Self> {
        Self::grid(1, m, spacing)
    }

    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }

    pub fn positions(&self) -> &[(T, T)] {
        &self.positions
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn spacing(&self) -> T {
        self.spacing
    }

    /// Geometric path-length term `psi_m` for a direction, in wavelengths.
    pub fn steering_phase(&self, theta_deg: T, phi_deg: T) -> Vec<T> {
        let theta = theta_deg.to_radians();
        let phi = phi_deg.to_radians();
        let u = theta.sin() * phi.cos();
        let v = theta.sin() * phi.sin();
        self.positions.iter().map(|&(x, y)| x * u + y * v).collect()
    }
}

/// Per-user directions in degrees: (elevation from boresight, azimuth).
#[derive(Debug, Clone, PartialEq)]
pub struct UserPlacement<T> {
    pub directions: Vec<(T, T)>,
}

impl<T: Real> UserPlacement<T> {
    pub fn fixed(directions: Vec<(T, T)>) -> Self {
        Self { directions }
    }

    /// Draws `k` users uniformly over the given sector.
    pub fn uniform<R: Rng>(
        k: usize,
        elevation_deg: (T, T),
        azimuth_deg: (T, T),
        rng: &mut R,
    ) -> Self {
        let span = |lo: T, hi: T, u: f64| lo + (hi - lo) * real::<T>(u);
        let directions = (0..k)
            .map(|_| {
                let e = span(elevation_deg.0, elevation_deg.1, rng.random());
                let a = span(azimuth_deg.0, azimuth_deg.1, rng.random());
                (e, a)
            })
            .collect();
        Self { directions }
    }

    pub fn users(&self) -> usize {
        self.directions.len()
    }
}

/// Rice channel with its components retained for diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelMatrix<T> {
    pub h: Mat<T>,
    pub kappa: T,
    pub h_iid: Mat<T>,
    pub h_los: Mat<T>,
}

impl<T: Real> ChannelMatrix<T> {
    pub fn antennas(&self) -> usize {
        self.h.nrows()
    }

    pub fn users(&self) -> usize {
        self.h.ncols()
    }
}

/// IID circularly symmetric complex Gaussian matrix, unit entry variance.
pub fn draw_iid<T: Real, R: Rng>(m: usize, k: usize, rng: &mut R) -> Mat<T> {
    Array2::from_shape_fn((m, k), |_| standard_complex(rng))
}

/// LOS steering matrix: entry `(m, k) = exp(i 2 pi psi_m(user_k))`.
/// Every entry has unit modulus.
pub fn los_matrix<T: Real>(geom: &ArrayGeometry<T>, users: &UserPlacement<T>) -> Mat<T> {
    let m = geom.len();
    let k = users.users();
    let mut h = Array2::zeros((m, k));
    let two_pi = real::<T>(2.0) * T::PI();
    for (col, &(el, az)) in users.directions.iter().enumerate() {
        let psi = geom.steering_phase(el, az);
        for (row, &p) in psi.iter().enumerate() {
            let ang = two_pi * p;
            h[(row, col)] = Complex::new(ang.cos(), ang.sin());
        }
    }
    h
}

/// Mixes IID and LOS components per the Rice model.
pub fn rice_mix<T: Real>(h_iid: Mat<T>, h_los: Mat<T>, kappa: T) -> Result<ChannelMatrix<T>> {
    if h_iid.dim() != h_los.dim() {
        return Err(SimError::ShapeMismatch(format!(
            "IID component is {:?}, LOS component {:?}",
            h_iid.dim(),
            h_los.dim()
        )));
    }
    if !(kappa >= T::zero()) {
        return Err(SimError::InvalidInput("kappa must be >= 0".into()));
    }
    let w_iid = (T::one() / (T::one() + kappa)).sqrt();
    let w_los = (kappa / (T::one() + kappa)).sqrt();
    let h = h_iid.mapv(|v| v * w_iid) + h_los.mapv(|v| v * w_los);
    Ok(ChannelMatrix { h, kappa, h_iid, h_los })
}

/// Normalized column inner product `h_k^H h_l / M` (diagnostic).
pub fn channel_correlation<T: Real>(
    ch: &ChannelMatrix<T>,
    k: usize,
    l: usize,
) -> Result<Complex<T>> {
    let users = ch.users();
    if k >= users || l >= users {
        return Err(SimError::InvalidInput(format!(
            "user index out of range: {k}, {l} with K = {users}"
        )));
    }
    let m = ch.antennas();
    let mut acc = Complex::new(T::zero(), T::zero());
    for r in 0..m {
        acc += ch.h[(r, k)].conj() * ch.h[(r, l)];
    }
    Ok(acc / Complex::new(real::<T>(m as f64), T::zero()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::fro_norm;
    use crate::rng::tagged_stream;
    use crate::C64;

    #[test]
    fn iid_draw_is_seed_deterministic() {
        let mut r1 = tagged_stream(5, &[0]);
        let mut r2 = tagged_stream(5, &[0]);
        let a = draw_iid::<f64, _>(1, 1, &mut r1);
        let b = draw_iid::<f64, _>(1, 1, &mut r2);
        assert_eq!(a[(0, 0)], b[(0, 0)]);
        let mut r3 = tagged_stream(6, &[0]);
        let c = draw_iid::<f64, _>(1, 1, &mut r3);
        assert_ne!(a[(0, 0)], c[(0, 0)]);
    }

    #[test]
    fn iid_entries_have_unit_mean_power() {
        let mut rng = tagged_stream(11, &[1]);
        let h = draw_iid::<f64, _>(256, 4, &mut rng);
        let mean = h.iter().map(|v| v.norm_sqr()).sum::<f64>() / 1024.0;
        assert!((mean - 1.0).abs() < 0.05, "mean |h|^2 = {mean}");
    }

    #[test]
    fn broadside_user_gives_all_ones_column() {
        let geom = ArrayGeometry::rectangular(12, 0.5f64).unwrap();
        let users = UserPlacement::fixed(vec![(0.0, 25.0)]);
        let h = los_matrix(&geom, &users);
        for r in 0..12 {
            assert!((h[(r, 0)] - C64::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn single_element_at_origin_gives_ones_row() {
        let geom = ArrayGeometry::rectangular(1, 0.5f64).unwrap();
        let users = UserPlacement::fixed(vec![(17.0, -40.0), (35.0, 60.0)]);
        let h = los_matrix(&geom, &users);
        for c in 0..2 {
            assert!((h[(0, c)] - C64::new(1.0, 0.0)).norm() < 1e-14);
        }
    }

    #[test]
    fn row_array_matches_ula_steering_oracle() {
        // elements along Y (a grid column): in-plane user (elevation 90
        // degrees) at azimuth phi gives phase increments 2 pi d m sin(phi)
        let d = 0.5f64;
        let geom = ArrayGeometry::grid(8, 1, d).unwrap();
        let phi = 23.0f64;
        let users = UserPlacement::fixed(vec![(90.0, phi)]);
        let h = los_matrix(&geom, &users);
        for m in 0..8 {
            let expect = 2.0 * std::f64::consts::PI * d * m as f64 * phi.to_radians().sin();
            let got = h[(m, 0)];
            let want = C64::new(expect.cos(), expect.sin());
            assert!((got - want).norm() < 1e-12, "element {m}");
        }
    }

    #[test]
    fn los_entries_unit_modulus() {
        let geom = ArrayGeometry::rectangular(37, 0.7f64).unwrap();
        let mut rng = tagged_stream(3, &[7]);
        let users = UserPlacement::uniform(5, (-30.0, 30.0), (-60.0, 60.0), &mut rng);
        let h = los_matrix(&geom, &users);
        for v in h.iter() {
            assert!((v.norm() - 1.0).abs() < 1e-13);
        }
    }

    #[test]
    fn rice_weights() {
        let mut rng = tagged_stream(9, &[2]);
        let geom = ArrayGeometry::rectangular(16, 0.5f64).unwrap();
        let users = UserPlacement::uniform(3, (-30.0, 30.0), (-60.0, 60.0), &mut rng);
        let h_iid = draw_iid::<f64, _>(16, 3, &mut rng);
        let h_los = los_matrix(&geom, &users);

        let k0 = rice_mix(h_iid.clone(), h_los.clone(), 0.0).unwrap();
        let d0 = &k0.h - &h_iid;
        assert!(fro_norm(&d0.view()) < 1e-14);

        let k1 = rice_mix(h_iid.clone(), h_los.clone(), 1.0).unwrap();
        let w = 1.0 / 2.0f64.sqrt();
        let built = h_iid.mapv(|v| v * w) + h_los.mapv(|v| v * w);
        let d1 = &k1.h - &built;
        assert!(fro_norm(&d1.view()) < 1e-14);

        let k100 = rice_mix(h_iid.clone(), h_los.clone(), 100.0).unwrap();
        let los_only = h_los.mapv(|v| v * (100.0f64 / 101.0).sqrt());
        let dist = &k100.h - &los_only;
        // dominated by LOS: remaining IID part has weight sqrt(1/101)
        assert!(fro_norm(&dist.view()) / fro_norm(&k100.h.view()) < 0.2);
    }

    #[test]
    fn components_reconstruct_h() {
        let mut rng = tagged_stream(13, &[4]);
        let geom = ArrayGeometry::rectangular(25, 0.5f64).unwrap();
        let users = UserPlacement::uniform(4, (-30.0, 30.0), (-60.0, 60.0), &mut rng);
        let ch = rice_mix(
            draw_iid::<f64, _>(25, 4, &mut rng),
            los_matrix(&geom, &users),
            7.3,
        )
        .unwrap();
        let w_iid = (1.0 / 8.3f64).sqrt();
        let w_los = (7.3 / 8.3f64).sqrt();
        let rebuilt = ch.h_iid.mapv(|v| v * w_iid) + ch.h_los.mapv(|v| v * w_los);
        let d = &rebuilt - &ch.h;
        assert!(fro_norm(&d.view()) < 1e-14);
    }

    #[test]
    fn rice_mix_rejects_shape_mismatch() {
        let mut rng = tagged_stream(1, &[1]);
        let a = draw_iid::<f64, _>(4, 2, &mut rng);
        let b = draw_iid::<f64, _>(4, 3, &mut rng);
        assert!(matches!(rice_mix(a, b, 1.0), Err(SimError::ShapeMismatch(_))));
    }

    #[test]
    fn correlation_examples() {
        let geom = ArrayGeometry::rectangular(64, 0.5f64).unwrap();
        // self-correlation of a unit-modulus LOS column is exactly 1
        let users = UserPlacement::fixed(vec![(12.0, 30.0), (0.0, 10.0), (0.0, -50.0)]);
        let h_los = los_matrix(&geom, &users);
        let ch = ChannelMatrix {
            h: h_los.clone(),
            kappa: f64::INFINITY,
            h_iid: Array2::zeros((64, 3)),
            h_los,
        };
        let self_corr = channel_correlation(&ch, 0, 0).unwrap();
        assert!((self_corr - C64::new(1.0, 0.0)).norm() < 1e-13);
        // two broadside users have identical columns
        let corr = channel_correlation(&ch, 1, 2).unwrap();
        assert!((corr - C64::new(1.0, 0.0)).norm() < 1e-13);
        assert!(channel_correlation(&ch, 0, 5).is_err());
    }

    #[test]
    fn correlation_matches_bruteforce_for_close_users() {
        let geom = ArrayGeometry::rectangular(64, 0.5f64).unwrap();
        let users = UserPlacement::fixed(vec![(20.0, 10.0), (20.0, 13.0)]);
        let mut rng = tagged_stream(21, &[3]);
        let ch = rice_mix(
            draw_iid::<f64, _>(64, 2, &mut rng),
            los_matrix(&geom, &users),
            100.0,
        )
        .unwrap();
        let got = channel_correlation(&ch, 0, 1).unwrap();
        let mut brute = C64::new(0.0, 0.0);
        for m in 0..64 {
            brute += ch.h[(m, 0)].conj() * ch.h[(m, 1)];
        }
        brute /= 64.0;
        assert!((got - brute).norm() < 1e-13);
    }

    #[test]
    fn iid_columns_decorrelate_on_average() {
        let mut rng = tagged_stream(31, &[5]);
        let mut acc = C64::new(0.0, 0.0);
        let draws = 200;
        for _ in 0..draws {
            let h = draw_iid::<f64, _>(64, 2, &mut rng);
            let mut ip = C64::new(0.0, 0.0);
            for m in 0..64 {
                ip += h[(m, 0)].conj() * h[(m, 1)];
            }
            acc += ip / 64.0;
        }
        assert!((acc / draws as f64).norm() <= 0.05);
    }

    #[test]
    fn correlation_nondecreasing_in_kappa() {
        let geom = ArrayGeometry::rectangular(64, 0.5f64).unwrap();
        let users = UserPlacement::fixed(vec![(20.0, 10.0), (20.0, 13.0)]);
        let h_los = los_matrix(&geom, &users);
        let mut prev = -1.0f64;
        for kappa in [0.0, 1.0, 10.0, 100.0] {
            let mut rng = tagged_stream(41, &[kappa as u64]);
            let mut mean = 0.0;
            let draws = 200;
            for _ in 0..draws {
                let ch = rice_mix(draw_iid::<f64, _>(64, 2, &mut rng), h_los.clone(), kappa).unwrap();
                mean += channel_correlation(&ch, 0, 1).unwrap().norm();
            }
            mean /= draws as f64;
            assert!(
                mean >= prev - 0.01,
                "mean |corr| not monotone: {prev} -> {mean} at kappa {kappa}"
            );
            prev = mean;
        }
    }
}
