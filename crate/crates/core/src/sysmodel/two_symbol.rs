//! Two consecutive pilot symbols: `ȳ = Γ̄ h + η̄`, `cov(η̄) = σ² B̄`,
//! `B̄ = [[B, S A⁺], [S A⁻, B]]` and its unitary eigen-decomposition.

use log::warn;
use nalgebra::DVector;
use num_complex::Complex64;

use super::{circulant_deviation, eig_first_row, BlockGenerator};
use crate::dft::{self, CMatrix, J};
use crate::error::{Error, Result};
use crate::filterbank::FilterBank;

const BOUNDARY_TOL: f64 = 1e-6;
const STAGE_TOL: f64 = 1e-8;

#[derive(Debug, Clone)]
pub struct TwoSymbolMatrices {
    pub m: usize,
    pub lh: usize,
    pub d1: Vec<Complex64>,
    pub d2: Vec<Complex64>,
    /// 𝒢_k^{(q,n)} for k = 0..L_h-1, indexed `[k][2(q-1) + (n-1)]`.
    pub blocks: Vec<[CMatrix; 4]>,
    pub gamma_bar: CMatrix,
    pub a_plus: CMatrix,
    pub a_minus: CMatrix,
    /// Diagonal of S = diag(1, -1, 1, ...).
    pub s: Vec<f64>,
    pub b: CMatrix,
    pub b_bar: CMatrix,
    /// Eigenvalues of G_k (diagonal blocks) and of the cross cores G_k^{(1,2)}, G_k^{(2,1)}.
    pub lambda_k: Vec<Vec<Complex64>>,
    pub lambda_k12: Vec<Vec<Complex64>>,
    pub lambda_k21: Vec<Vec<Complex64>>,
}

fn alternating(m: usize) -> Vec<f64> {
    (0..m).map(|p| if p % 2 == 0 { 1.0 } else { -1.0 }).collect()
}

fn scale_rows(s: &[f64], a: &CMatrix) -> CMatrix {
    CMatrix::from_fn(a.nrows(), a.ncols(), |p, q| a[(p, q)] * s[p])
}

fn lenient_eig(c: &CMatrix, what: &str) -> Result<Vec<Complex64>> {
    let dev = circulant_deviation(c);
    if dev > BOUNDARY_TOL {
        return Err(Error::NotCirculant(dev));
    }
    if dev > super::CIRCULANT_TOL {
        warn!("{what}: boundary deviation from circulant structure {dev:e}");
    }
    Ok(eig_first_row(c))
}

pub fn build_two_symbol(
    fb: &FilterBank,
    lh: usize,
    d1: &[Complex64],
    d2: &[Complex64],
) -> Result<TwoSymbolMatrices> {
    let m = fb.subcarriers();
    for d in [d1, d2] {
        if d.len() != m {
            return Err(Error::Dimension { expected: m, got: d.len() });
        }
    }
    if lh == 0 || lh > m / 2 {
        return Err(Error::Config(format!("two-symbol model needs 1 <= L_h <= M/2 = {}", m / 2)));
    }
    let gen = BlockGenerator::new(fb);
    let s = alternating(m);
    let blocks: Vec<[CMatrix; 4]> = (0..lh as i64)
        .map(|k| {
            [gen.block_qn(1, 1, k), gen.block_qn(1, 2, k), gen.block_qn(2, 1, k), gen.block_qn(2, 2, k)]
        })
        .collect();
    let (v1, v2) = (DVector::from_column_slice(d1), DVector::from_column_slice(d2));
    let mut gamma_bar = CMatrix::zeros(2 * m, lh);
    for (k, blk) in blocks.iter().enumerate() {
        let top = &blk[0] * &v1 + &blk[1] * &v2;
        let bottom = &blk[2] * &v1 + &blk[3] * &v2;
        gamma_bar.view_mut((0, k), (m, 1)).copy_from(&top);
        gamma_bar.view_mut((m, k), (m, 1)).copy_from(&bottom);
    }
    let b = blocks[0][0].clone();
    let a_plus = scale_rows(&s, &blocks[0][1]);
    let a_minus = scale_rows(&s, &blocks[0][2]);
    let mut b_bar = CMatrix::zeros(2 * m, 2 * m);
    b_bar.view_mut((0, 0), (m, m)).copy_from(&blocks[0][0]);
    b_bar.view_mut((0, m), (m, m)).copy_from(&blocks[0][1]);
    b_bar.view_mut((m, 0), (m, m)).copy_from(&blocks[0][2]);
    b_bar.view_mut((m, m), (m, m)).copy_from(&blocks[0][3]);

    let mut lambda_k = Vec::with_capacity(lh);
    let mut lambda_k12 = Vec::with_capacity(lh);
    let mut lambda_k21 = Vec::with_capacity(lh);
    for (k, blk) in blocks.iter().enumerate() {
        let w = dft::modulation_matrix(m, -(k as i64));
        lambda_k.push(lenient_eig(&(&w * &blk[0]), "G_k")?);
        lambda_k12.push(lenient_eig(&scale_rows(&s, &(&w * &blk[1])), "G_k^(1,2)")?);
        lambda_k21.push(lenient_eig(&scale_rows(&s, &(&w * &blk[2])), "G_k^(2,1)")?);
    }
    Ok(TwoSymbolMatrices {
        m,
        lh,
        d1: d1.to_vec(),
        d2: d2.to_vec(),
        blocks,
        gamma_bar,
        a_plus,
        a_minus,
        s,
        b,
        b_bar,
        lambda_k,
        lambda_k12,
        lambda_k21,
    })
}

/// Unitary chain `E` and diagonal `L = [L⁺; L⁻]` with `B̄ = E diag(L) E^H`.
#[derive(Debug, Clone)]
pub struct CbarDecomposition {
    pub m: usize,
    /// Eigenvalues of B.
    pub lambda: Vec<f64>,
    /// Λ_I⁺ = Im(eigenvalues of A⁺).
    pub lambda_plus_imag: Vec<f64>,
    /// Givens angle for the pair (i, M-i), i = 1..M/2-1; entry 0 unused.
    pub theta: Vec<f64>,
    pub l_plus: Vec<f64>,
    pub l_minus: Vec<f64>,
    /// max |Λ⁻ + Z^{M/2} Λ⁺ Z^{M/2}|.
    pub minus_plus_residual: f64,
    pub reconstruction_residual: f64,
}

fn parity(m: usize) -> CMatrix {
    CMatrix::from_fn(m, m, |r, c| {
        if (r + c) % m == 0 {
            Complex64::new(1.0, 0.0)
        } else {
            Complex64::new(0.0, 0.0)
        }
    })
}

fn block_diag(a: &CMatrix, b: &CMatrix) -> CMatrix {
    let (m, n) = (a.nrows(), b.nrows());
    let mut out = CMatrix::zeros(m + n, m + n);
    out.view_mut((0, 0), (m, m)).copy_from(a);
    out.view_mut((m, m), (n, n)).copy_from(b);
    out
}

impl CbarDecomposition {
    /// Givens factor V⁺: rotation `[[c, s], [-s, c]]` on each pair (i, M-i).
    pub fn v_plus(&self) -> CMatrix {
        let m = self.m;
        let mut v = CMatrix::identity(m, m);
        for i in 1..m / 2 {
            let (s, c) = self.theta[i].sin_cos();
            let k = m - i;
            v[(i, i)] = Complex64::new(c, 0.0);
            v[(k, k)] = Complex64::new(c, 0.0);
            v[(i, k)] = Complex64::new(s, 0.0);
            v[(k, i)] = Complex64::new(-s, 0.0);
        }
        v
    }

    /// The full unitary `E = (I₂⊗F) diag(Z^{M/2}, -jI) diag(P, I) H₂ diag(V⁺, V⁺ᵀ)`.
    pub fn unitary(&self) -> CMatrix {
        let m = self.m;
        let f = dft::dft_matrix(m);
        let eye = CMatrix::identity(m, m);
        let outer = block_diag(&f, &f);
        let rot = block_diag(&dft::shift_matrix(m, (m / 2) as i64), &(&eye * -J));
        let par = block_diag(&parity(m), &eye);
        let r = Complex64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0);
        let mut h2 = CMatrix::zeros(2 * m, 2 * m);
        for i in 0..m {
            h2[(i, i)] = r;
            h2[(i, i + m)] = r;
            h2[(i + m, i)] = r;
            h2[(i + m, i + m)] = -r;
        }
        let v = self.v_plus();
        let givens = block_diag(&v, &v.transpose());
        outer * rot * par * h2 * givens
    }

    pub fn eigenvalues(&self) -> Vec<f64> {
        self.l_plus.iter().chain(&self.l_minus).copied().collect()
    }

    pub fn reconstruct(&self) -> CMatrix {
        let e = self.unitary();
        &e * dft::diag_real(&self.eigenvalues()) * e.adjoint()
    }

    /// `diag(L)^{-1/2} E^H`, which whitens the two-symbol noise.
    pub fn whitening_transform(&self) -> Result<CMatrix> {
        let l = self.eigenvalues();
        if let Some(bad) = l.iter().find(|v| **v <= 1e-12) {
            return Err(Error::IllConditioned(*bad));
        }
        let inv: Vec<f64> = l.iter().map(|v| 1.0 / v.sqrt()).collect();
        Ok(dft::diag_real(&inv) * self.unitary().adjoint())
    }
}

fn stage(name: &'static str, residual: f64) -> Result<()> {
    if residual > STAGE_TOL {
        Err(Error::Decomposition { stage: name, residual })
    } else {
        Ok(())
    }
}

/// Runs the K → M → N → Givens chain, checking each stage against B̄.
pub fn decompose_cbar(two: &TwoSymbolMatrices) -> Result<CbarDecomposition> {
    let m = two.m;
    let h = m / 2;
    let lambda_c = lenient_eig(&two.b, "B")?;
    let lam_plus = lenient_eig(&two.a_plus, "A+")?;
    let lam_minus = lenient_eig(&two.a_minus, "A-")?;
    let lambda: Vec<f64> = lambda_c.iter().map(|v| v.re).collect();
    let lpi: Vec<f64> = lam_plus.iter().map(|v| v.im).collect();

    let imag_parts = lambda_c.iter().map(|v| v.im.abs()).fold(0.0, f64::max);
    let real_parts = lam_plus.iter().chain(&lam_minus).map(|v| v.re.abs()).fold(0.0, f64::max);
    stage("spectra (Λ real, Λ± imaginary)", imag_parts.max(real_parts))?;
    let minus_plus_residual =
        (0..m).map(|i| (lam_minus[i] + lam_plus[(i + h) % m]).norm()).fold(0.0, f64::max);
    stage("Λ⁻ = -Z^{M/2} Λ⁺ Z^{M/2}", minus_plus_residual)?;
    let parity_residual = (0..m).map(|i| (lpi[i] - lpi[(m - i) % m]).abs()).fold(0.0, f64::max);
    stage("P Λ_I⁺ P = Λ_I⁺", parity_residual)?;

    // Stage K: (I₂⊗F)^H B̄ (I₂⊗F) = [[Λ, Z^{M/2}Λ⁺], [Z^{M/2}Λ⁻, Λ]].
    let f = dft::dft_matrix(m);
    let outer = block_diag(&f, &f);
    let k_mat = outer.adjoint() * &two.b_bar * &outer;
    let z = dft::shift_matrix(m, h as i64);
    let mut k_model = CMatrix::zeros(2 * m, 2 * m);
    k_model.view_mut((0, 0), (m, m)).copy_from(&dft::diag(&lambda_c));
    k_model.view_mut((m, m), (m, m)).copy_from(&dft::diag(&lambda_c));
    k_model.view_mut((0, m), (m, m)).copy_from(&(&z * dft::diag(&lam_plus)));
    k_model.view_mut((m, 0), (m, m)).copy_from(&(&z * dft::diag(&lam_minus)));
    stage("K block form", dft::max_abs_diff(&k_mat, &k_model))?;

    // Givens angles on the N⁺ pairs [[λ_i, μ], [μ, λ_{M-i}]], μ = Λ_I⁺[M-i].
    let mut theta = vec![0.0; h];
    let mut l_plus = vec![0.0; m];
    let mut l_minus = vec![0.0; m];
    for i in 1..h {
        let k = m - i;
        let (a, b) = (lambda[i], lambda[k]);
        let mu = 0.5 * (lpi[k] + lpi[i]);
        let t = 0.5 * (-2.0 * mu).atan2(a - b);
        let (s, c) = t.sin_cos();
        theta[i] = t;
        l_plus[i] = a * c * c - 2.0 * mu * c * s + b * s * s;
        l_plus[k] = a * s * s + 2.0 * mu * c * s + b * c * c;
        l_minus[i] = l_plus[i];
        l_minus[k] = l_plus[k];
    }
    l_plus[0] = lambda[0] + lpi[0];
    l_minus[0] = lambda[0] - lpi[0];
    l_plus[h] = lambda[h] + lpi[h];
    l_minus[h] = lambda[h] - lpi[h];

    let mut dec = CbarDecomposition {
        m,
        lambda,
        lambda_plus_imag: lpi,
        theta,
        l_plus,
        l_minus,
        minus_plus_residual,
        reconstruction_residual: f64::NAN,
    };
    dec.reconstruction_residual = dft::max_abs_diff(&dec.reconstruct(), &two.b_bar);
    stage("reconstruction", dec.reconstruction_residual)?;
    Ok(dec)
}

#[derive(Debug, Clone)]
pub struct OrthogonalityReport {
    /// Residual of the (0, k) condition from the eigenvalue formula, k = 1..L_h-1.
    pub zero_k: Vec<Complex64>,
    /// The same quantities from the Gram matrix of the whitened Γ̄.
    pub zero_k_direct: Vec<Complex64>,
    /// Gram entries (k, l), 1 <= k < l.
    pub pairwise: Vec<((usize, usize), Complex64)>,
    pub formula_mismatch: f64,
}

/// Orthogonality residuals of the whitened two-symbol model for the preamble pair.
pub fn check_two_symbol_orthogonality(
    two: &TwoSymbolMatrices,
    dec: &CbarDecomposition,
) -> Result<OrthogonalityReport> {
    let m = two.m;
    let h = m / 2;
    let f = dft::dft_matrix(m);
    let dt1 = f.adjoint() * DVector::from_column_slice(&two.d1);
    let dt2 = f.adjoint() * DVector::from_column_slice(&two.d2);
    let tw = dec.whitening_transform()?;
    let gt = &tw * &two.gamma_bar;
    let gram = gt.adjoint() * &gt;

    let mut zero_k = Vec::new();
    let mut zero_k_direct = Vec::new();
    let mut pairwise = Vec::new();
    for k in 1..two.lh {
        // Inner matrix [[Λ_k, Z^{M/2}Λ_k^{(1,2)}], [Z^{M/2}Λ_k^{(2,1)}, Λ_k]] applied to d̃̄.
        let lk = &two.lambda_k[k];
        let l12 = &two.lambda_k12[k];
        let l21 = &two.lambda_k21[k];
        let mut top = vec![Complex64::new(0.0, 0.0); m];
        let mut bottom = vec![Complex64::new(0.0, 0.0); m];
        for i in 0..m {
            let src = (i + m - h) % m;
            top[i] = lk[i] * dt1[i] + l12[src] * dt2[src];
            bottom[i] = l21[src] * dt1[src] + lk[i] * dt2[i];
        }
        // (I₂⊗Z^k) then the quadratic form with d̃̄.
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..m {
            let src = (i + m - k % m) % m;
            acc += dt1[i].conj() * top[src] + dt2[i].conj() * bottom[src];
        }
        zero_k.push(acc);
        zero_k_direct.push(gram[(0, k)]);
        for l in k + 1..two.lh {
            pairwise.push(((k, l), gram[(k, l)]));
        }
    }
    let formula_mismatch =
        zero_k.iter().zip(&zero_k_direct).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
    Ok(OrthogonalityReport { zero_k, zero_k_direct, pairwise, formula_mismatch })
}
