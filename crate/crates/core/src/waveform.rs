//! Single-carrier QAM baseband generation and recovery.
//!
//! The transmit side maps bit streams onto a Gray-coded square QAM
//! constellation with unit average power and pulse-shapes the symbols with a
//! truncated root-raised-cosine filter at the configured oversampling ratio.
//! The receive side applies the matched filter and decimates back to symbol
//! rate. Both filters are unit-energy, so the noiseless cascade has unit
//! gain; the residual symbol error is the truncation ISI of the filter pair
//! (about -53 dB for the default 16-symbol span at roll-off 0.22).

use ndarray::{Array1, Array2};
use num_complex::Complex;

use crate::{real, Mat, Real, Result, SimError};

/// Square QAM constellation configuration.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct QamConfig {
    /// Constellation size; must be a power of 4 (4, 16, 64, 256, ...).
    pub order: usize,
    /// Symbols per user per frame.
    pub symbols_per_frame: usize,
}

impl QamConfig {
    pub fn new(order: usize, symbols_per_frame: usize) -> Result<Self> {
        let cfg = Self { order, symbols_per_frame };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        let mut q = self.order;
        while q > 1 && q % 4 == 0 {
            q /= 4;
        }
        if q != 1 || self.order < 4 {
            return Err(SimError::InvalidInput(format!(
                "QAM order {} is not a power of 4",
                self.order
            )));
        }
        if self.symbols_per_frame == 0 {
            return Err(SimError::InvalidInput("symbols_per_frame must be >= 1".into()));
        }
        Ok(())
    }

    /// Bits carried by one symbol.
    pub fn bits_per_symbol(&self) -> usize {
        self.order.ilog2() as usize
    }

    /// Levels per I/Q rail (`sqrt(order)`).
    pub fn rail_levels(&self) -> usize {
        1 << (self.bits_per_symbol() / 2)
    }
}

/// Root-raised-cosine pulse configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseConfig<T> {
    /// Roll-off factor in `[0, 1]`.
    pub rolloff: T,
    /// Oversampling ratio (samples per symbol).
    pub osr: usize,
    /// Filter half-support in symbols; taps = `2*span*osr + 1`.
    pub span_symbols: usize,
}

impl<T: Real> PulseConfig<T> {
    pub fn new(rolloff: T, osr: usize, span_symbols: usize) -> Result<Self> {
        let cfg = Self { rolloff, osr, span_symbols };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.rolloff < T::zero() || self.rolloff > T::one() {
            return Err(SimError::InvalidInput("rolloff must be in [0, 1]".into()));
        }
        if self.osr == 0 {
            return Err(SimError::InvalidInput("osr must be >= 1".into()));
        }
        if self.span_symbols == 0 {
            return Err(SimError::InvalidInput("span_symbols must be >= 1".into()));
        }
        Ok(())
    }

    pub fn taps_len(&self) -> usize {
        2 * self.span_symbols * self.osr + 1
    }

    /// Group delay of one filter in samples.
    pub fn group_delay(&self) -> usize {
        self.span_symbols * self.osr
    }
}

/// Block of unit-average-power data symbols, one row per user.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame<T> {
    pub data: Mat<T>,
}

impl<T: Real> SymbolFrame<T> {
    pub fn users(&self) -> usize {
        self.data.nrows()
    }

    pub fn symbols(&self) -> usize {
        self.data.ncols()
    }
}

fn gray_to_bin(mut g: usize) -> usize {
    let mut b = g;
    while g > 0 {
        g >>= 1;
        b ^= g;
    }
    b
}

fn bin_to_gray(b: usize) -> usize {
    b ^ (b >> 1)
}

/// Per-rail amplitude normalization so the full constellation has unit
/// average power: `E|s|^2 = 1` exactly.
fn rail_norm<T: Real>(order: usize) -> T {
    (real::<T>(3.0) / (real::<T>(2.0) * real::<T>((order - 1) as f64))).sqrt()
}

/// Maps a bit stream onto one user's Gray-coded square QAM symbol vector.
///
/// Bits are consumed MSB-first per symbol; the first half selects the I rail,
/// the second half the Q rail.
pub fn map_qam<T: Real>(bits: &[bool], cfg: &QamConfig) -> Result<Array1<Complex<T>>> {
    cfg.validate()?;
    let b = cfg.bits_per_symbol();
    if bits.len() % b != 0 {
        return Err(SimError::InvalidInput(format!(
            "bit count {} not divisible by {} bits/symbol",
            bits.len(),
            b
        )));
    }
    let m = b / 2;
    let levels = cfg.rail_levels() as isize;
    let norm = rail_norm::<T>(cfg.order);
    let amp = |chunk: &[bool]| -> T {
        let g = chunk.iter().fold(0usize, |acc, &bit| (acc << 1) | bit as usize);
        let k = gray_to_bin(g) as isize;
        real::<T>((2 * k - (levels - 1)) as f64) * norm
    };
    let out = bits
        .chunks(b)
        .map(|sym| Complex::new(amp(&sym[..m]), amp(&sym[m..])))
        .collect();
    Ok(out)
}

/// Hard decision back to bits: nearest rail level, then Gray encoding.
pub fn demap_qam<T: Real>(symbols: &Array1<Complex<T>>, cfg: &QamConfig) -> Result<Vec<bool>> {
    cfg.validate()?;
    let b = cfg.bits_per_symbol();
    let m = b / 2;
    let levels = cfg.rail_levels() as isize;
    let norm = rail_norm::<T>(cfg.order);
    let slice_rail = |v: T| -> usize {
        let k = ((v / norm + real::<T>((levels - 1) as f64)) / real::<T>(2.0)).round();
        let k = k.to_f64().unwrap_or(0.0).max(0.0) as isize;
        k.min(levels - 1) as usize
    };
    let mut bits = Vec::with_capacity(symbols.len() * b);
    for s in symbols.iter() {
        for (rail, width) in [(s.re, m), (s.im, m)] {
            let g = bin_to_gray(slice_rail(rail));
            for i in (0..width).rev() {
                bits.push((g >> i) & 1 == 1);
            }
        }
    }
    Ok(bits)
}

/// Builds a frame of symbols for `users` users from one flat bit stream
/// (row-major: all bits of user 0, then user 1, ...).
pub fn frame_from_bits<T: Real>(bits: &[bool], users: usize, cfg: &QamConfig) -> Result<SymbolFrame<T>> {
    let per_user = cfg.symbols_per_frame * cfg.bits_per_symbol();
    if bits.len() != per_user * users {
        return Err(SimError::InvalidInput(format!(
            "expected {} bits for {} users, got {}",
            per_user * users,
            users,
            bits.len()
        )));
    }
    let mut data = Array2::zeros((users, cfg.symbols_per_frame));
    for (k, chunk) in bits.chunks(per_user).enumerate() {
        let row = map_qam::<T>(chunk, cfg)?;
        data.row_mut(k).assign(&row);
    }
    Ok(SymbolFrame { data })
}

/// Unit-energy root-raised-cosine impulse response sampled at `osr` samples
/// per symbol. Singular time points are evaluated by their analytic limits.
pub fn rrc_taps<T: Real>(cfg: &PulseConfig<T>) -> Result<Array1<T>> {
    cfg.validate()?;
    let a = cfg.rolloff;
    let half = (cfg.span_symbols * cfg.osr) as isize;
    let mut taps = Array1::zeros((2 * half + 1) as usize);
    for (idx, k) in (-half..=half).enumerate() {
        let t = real::<T>(k as f64) / real::<T>(cfg.osr as f64);
        taps[idx] = rrc_value(t, a);
    }
    let energy = taps.iter().map(|&v| v * v).sum::<T>().sqrt();
    taps.mapv_inplace(|v| v / energy);
    Ok(taps)
}

fn rrc_value<T: Real>(t: T, a: T) -> T {
    let pi = T::PI();
    if t == T::zero() {
        return T::one() + a * (real::<T>(4.0) / pi - T::one());
    }
    if a == T::zero() {
        return (pi * t).sin() / (pi * t);
    }
    let four_at = real::<T>(4.0) * a * t;
    if (four_at.abs() - T::one()).abs() < real::<T>(1e-8) {
        let x = pi / (real::<T>(4.0) * a);
        let c = a / real::<T>(2.0).sqrt();
        let two_over_pi = real::<T>(2.0) / pi;
        return c * ((T::one() + two_over_pi) * x.sin() + (T::one() - two_over_pi) * x.cos());
    }
    let num = (pi * t * (T::one() - a)).sin() + four_at * (pi * t * (T::one() + a)).cos();
    let den = pi * t * (T::one() - four_at * four_at);
    num / den
}

fn convolve_rows<T: Real>(rows: &Mat<T>, taps: &Array1<T>) -> Mat<T> {
    let (k, n) = (rows.nrows(), rows.ncols());
    let lt = taps.len();
    let mut out: Mat<T> = Array2::zeros((k, n + lt - 1));
    for r in 0..k {
        let src = rows.row(r);
        let mut dst = out.row_mut(r);
        for i in 0..n {
            let s = src[i];
            if s.re == T::zero() && s.im == T::zero() {
                continue;
            }
            for (j, &h) in taps.iter().enumerate() {
                dst[i + j] += s * h;
            }
        }
    }
    out
}

/// Upsamples each user's symbols by `osr` and applies the RRC filter.
///
/// Output is `K x N` with `N = L*osr + 2*span*osr` (full convolution tail
/// kept so the matched filter sees the complete pulse of every symbol).
pub fn pulse_shape<T: Real>(frame: &SymbolFrame<T>, cfg: &PulseConfig<T>) -> Result<Mat<T>> {
    let taps = rrc_taps(cfg)?;
    let (k, l) = (frame.users(), frame.symbols());
    let mut up: Mat<T> = Array2::zeros((k, l * cfg.osr));
    for r in 0..k {
        for j in 0..l {
            up[(r, j * cfg.osr)] = frame.data[(r, j)];
        }
    }
    Ok(convolve_rows(&up, &taps))
}

/// Matched filter and symbol-rate decimation.
///
/// `delay` must equal the combined group delay of the shaping/matched filter
/// pair (`2 * span * osr` samples for a loopback of [`pulse_shape`]).
pub fn matched_filter_decimate<T: Real>(
    waveform: &Mat<T>,
    cfg: &PulseConfig<T>,
    delay: usize,
) -> Result<SymbolFrame<T>> {
    let taps = rrc_taps(cfg)?;
    let filtered = convolve_rows(waveform, &taps);
    let n = filtered.ncols();
    if delay >= n {
        return Err(SimError::Alignment(format!(
            "delay {delay} exceeds filtered length {n}"
        )));
    }
    let l_out = (n - 1 - delay) / cfg.osr + 1;
    let (k, osr) = (filtered.nrows(), cfg.osr);
    let mut data = Array2::zeros((k, l_out));
    for r in 0..k {
        for j in 0..l_out {
            data[(r, j)] = filtered[(r, delay + j * osr)];
        }
    }
    Ok(SymbolFrame { data })
}
