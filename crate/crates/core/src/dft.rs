//! Unitary DFT conventions and the shift/modulation matrices.
//!
//! `F[p, i] = exp(-j 2π p i / M) / √M`. With this choice a circulant matrix
//! `C` (first row `c`) satisfies `F^H C F = diag(λ)` with `λ_i = Σ_r c_r e^{-j2π r i/M}`.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rustfft::FftPlanner;

pub type CMatrix = DMatrix<Complex64>;

pub const J: Complex64 = Complex64 { re: 0.0, im: 1.0 };

/// `e^{-j 2π n / M}` with the exponent reduced exactly in integers.
pub fn twiddle(n: i64, m: usize) -> Complex64 {
    let r = n.rem_euclid(m as i64) as f64;
    Complex64::from_polar(1.0, -2.0 * PI * r / m as f64)
}

/// `j^n` for any integer n.
pub fn j_pow(n: i64) -> Complex64 {
    match n.rem_euclid(4) {
        0 => Complex64::new(1.0, 0.0),
        1 => J,
        2 => Complex64::new(-1.0, 0.0),
        _ => -J,
    }
}

pub fn dft_matrix(m: usize) -> CMatrix {
    let s = 1.0 / (m as f64).sqrt();
    CMatrix::from_fn(m, m, |p, i| twiddle((p * i) as i64, m) * s)
}

/// Column `i` of the unitary DFT matrix.
pub fn dft_column(m: usize, i: usize) -> Vec<Complex64> {
    let s = 1.0 / (m as f64).sqrt();
    (0..m).map(|p| twiddle((p * i) as i64, m) * s).collect()
}

/// `Z^k`: cyclic shift of rows downwards by k.
pub fn shift_matrix(m: usize, k: i64) -> CMatrix {
    let mut z = CMatrix::zeros(m, m);
    for c in 0..m {
        let r = (c as i64 + k).rem_euclid(m as i64) as usize;
        z[(r, c)] = Complex64::new(1.0, 0.0);
    }
    z
}

/// `W^k = diag(e^{-j2π p k / M})`.
pub fn modulation_matrix(m: usize, k: i64) -> CMatrix {
    CMatrix::from_fn(m, m, |p, q| {
        if p == q {
            twiddle(p as i64 * k, m)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

/// Unnormalised forward DFT `X_i = Σ_n x_n e^{-j2π n i / N}`.
pub fn fft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    if buf.is_empty() {
        return buf;
    }
    FftPlanner::new().plan_fft_forward(buf.len()).process(&mut buf);
    buf
}

/// Inverse DFT with the `1/N` factor: `x_n = (1/N) Σ_i X_i e^{j2π n i / N}`.
pub fn ifft(x: &[Complex64]) -> Vec<Complex64> {
    let mut buf = x.to_vec();
    if buf.is_empty() {
        return buf;
    }
    let n = buf.len() as f64;
    FftPlanner::new().plan_fft_inverse(buf.len()).process(&mut buf);
    buf.iter_mut().for_each(|v| *v /= n);
    buf
}

pub fn max_abs_diff(a: &CMatrix, b: &CMatrix) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

pub fn diag(v: &[Complex64]) -> CMatrix {
    CMatrix::from_diagonal(&nalgebra::DVector::from_column_slice(v))
}

pub fn diag_real(v: &[f64]) -> CMatrix {
    CMatrix::from_fn(v.len(), v.len(), |p, q| {
        if p == q {
            Complex64::new(v[p], 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}
