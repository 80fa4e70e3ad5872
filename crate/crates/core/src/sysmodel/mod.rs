//! System matrices of the preamble-based estimation model `y = Γ h + η`,
//! with `Γ = [𝒢_0 d | 𝒢_1 d | ...]`, `𝒢_k = W^k G_k`, `G_k` circulant
//! and `cov(η) = σ² B`.

mod two_symbol;

pub use two_symbol::{
    build_two_symbol, check_two_symbol_orthogonality, decompose_cbar, CbarDecomposition,
    OrthogonalityReport, TwoSymbolMatrices,
};

use std::sync::Arc;

use log::warn;
use nalgebra::DVector;
use num_complex::Complex64;

use crate::dft::{self, diag_real, j_pow, twiddle, CMatrix, J};
use crate::error::{Error, Result};
use crate::filterbank::{FilterBank, SymbolGrid};

pub const CIRCULANT_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InterferenceConstants {
    pub beta: f64,
    pub gamma: f64,
    pub delta: f64,
    pub epsilon: f64,
    /// Sign s such that `B[0, M-1] = s·jβ` (the usual convention is -1).
    pub corner_sign: f64,
}

impl InterferenceConstants {
    /// Reads β, γ, δ, ε off single-pulse transmissions without checking the ordering.
    pub fn measure(fb: &FilterBank) -> Result<Self> {
        let m = fb.subcarriers();
        let response = |sc: usize, sym: usize| -> Result<Vec<Complex64>> {
            let mut grid = SymbolGrid::zeros(m, 4);
            grid.set(sc, sym, Complex64::new(1.0, 0.0));
            fb.analyze(&fb.synthesize(&grid)?, 1)
        };
        let upper = response(1, 1)?[0];
        let corner = response(m - 1, 1)?[0];
        if upper.im < 0.0 {
            warn!("B[0,1] has negative imaginary part; B is built from computed correlations");
        }
        let beta = upper.norm();
        let corner_sign = if corner.im * upper.im.signum() < 0.0 { -1.0 } else { 1.0 };
        Ok(Self {
            beta,
            gamma: response(0, 2)?[0].im,
            delta: response(1, 2)?[0].im,
            epsilon: -response(2, 2)?[0].im,
            corner_sign,
        })
    }
}

/// Interference constants of a filter bank, with the `γ > δ > |ε|` ordering enforced.
pub fn interference_constants(fb: &FilterBank) -> Result<InterferenceConstants> {
    let energy: f64 = fb.filter().coeffs().iter().map(|c| c * c).sum();
    if (energy - 1.0).abs() > 1e-12 {
        return Err(Error::FilterEnergy(energy));
    }
    let c = InterferenceConstants::measure(fb)?;
    if !(c.gamma > c.delta && c.delta > c.epsilon.abs()) {
        return Err(Error::ConstantOrdering { gamma: c.gamma, delta: c.delta, epsilon: c.epsilon });
    }
    Ok(c)
}

/// Tridiagonal circulant `B` with `jβ` above the diagonal and `corner_sign·jβ` in the corner.
pub fn build_b(m: usize, c: &InterferenceConstants) -> CMatrix {
    let mut b = CMatrix::identity(m, m);
    for p in 0..m - 1 {
        b[(p, p + 1)] = J * c.beta;
        b[(p + 1, p)] = -J * c.beta;
    }
    b[(0, m - 1)] = J * c.beta * c.corner_sign;
    b[(m - 1, 0)] = -J * c.beta * c.corner_sign;
    b
}

/// Max deviation of `c` from the circulant matrix generated by its first row.
pub fn circulant_deviation(c: &CMatrix) -> f64 {
    let m = c.nrows();
    let mut dev: f64 = 0.0;
    for p in 0..m {
        for q in 0..m {
            dev = dev.max((c[(p, q)] - c[(0, (q + m - p) % m)]).norm());
        }
    }
    dev
}

/// Eigenvalues `λ_i = (F^H C F)_{ii} = Σ_r C[0,r] e^{-j2π r i/M}` of a circulant matrix.
pub fn eig_circulant(c: &CMatrix) -> Result<Vec<Complex64>> {
    let dev = circulant_deviation(c);
    if dev > CIRCULANT_TOL {
        return Err(Error::NotCirculant(dev));
    }
    Ok(eig_first_row(c))
}

fn eig_first_row(c: &CMatrix) -> Vec<Complex64> {
    let row: Vec<Complex64> = c.row(0).iter().copied().collect();
    dft::fft(&row)
}

fn real_parts(v: &[Complex64], what: &str) -> Result<Vec<f64>> {
    let worst = v.iter().map(|z| z.im.abs()).fold(0.0, f64::max);
    if worst > CIRCULANT_TOL {
        return Err(Error::Config(format!("{what} eigenvalues are not real (max |Im| {worst:e})")));
    }
    Ok(v.iter().map(|z| z.re).collect())
}

/// Closed-form block generator for a filter bank.
#[derive(Debug, Clone)]
pub struct BlockGenerator {
    m: usize,
    g: Vec<f64>,
}

impl BlockGenerator {
    pub fn new(fb: &FilterBank) -> Self {
        Self { m: fb.subcarriers(), g: fb.filter().coeffs().to_vec() }
    }

    fn g_at(&self, l: i64) -> f64 {
        if l < 0 || l as usize >= self.g.len() {
            0.0
        } else {
            self.g[l as usize]
        }
    }

    /// `e^{j2π r (l - c)/M}` with `c = (Lg-1)/2`, reduced exactly.
    fn carrier(&self, r: i64, l: i64) -> Complex64 {
        let two_off = 2 * l - (self.g.len() as i64 - 1);
        twiddle(-(r * two_off), 2 * self.m)
    }

    /// Single-symbol block: `𝒢_k[p,m] = e^{-j2π mk/M} j^{m-p} Σ_{l} g(l-k) g(l) e^{j2π(m-p)(l-c)/M}`.
    pub fn block(&self, k: i64) -> CMatrix {
        let m = self.m as i64;
        let lg = self.g.len() as i64;
        let sums: Vec<Complex64> = (-(m - 1)..m)
            .map(|r| {
                (k.max(0)..lg.min(lg + k))
                    .map(|l| self.carrier(r, l) * (self.g_at(l - k) * self.g_at(l)))
                    .sum()
            })
            .collect();
        CMatrix::from_fn(self.m, self.m, |p, q| {
            let r = q as i64 - p as i64;
            twiddle(q as i64 * k, self.m) * j_pow(r) * sums[(r + m - 1) as usize]
        })
    }

    /// Two-symbol block `𝒢_k^{(q,n)}`: response at instant q to symbol n through a k-sample delay.
    pub fn block_qn(&self, q: usize, n: usize, k: i64) -> CMatrix {
        let m = self.m as i64;
        let half = m / 2;
        let (q, n) = (q as i64, n as i64);
        let lg = self.g.len() as i64;
        let lo = (k + n * half).max(q * half);
        let hi = (lg + k + n * half).min(lg + q * half);
        let sums: Vec<Complex64> = (-(m - 1)..m)
            .map(|r| {
                (lo..hi.max(lo))
                    .map(|l| {
                        self.carrier(r, l) * (self.g_at(l - k - n * half) * self.g_at(l - q * half))
                    })
                    .sum()
            })
            .collect();
        CMatrix::from_fn(self.m, self.m, |p, c| {
            let (p, c) = (p as i64, c as i64);
            let r = c - p;
            let sign = if (c * n - p * q).rem_euclid(2) == 1 { -1.0 } else { 1.0 };
            twiddle(c * k, self.m) * j_pow(c + n - p - q) * sign * sums[(r + m - 1) as usize]
        })
    }
}

/// Preamble-independent part of the model for a given channel length.
#[derive(Debug, Clone)]
pub struct SystemModel {
    pub m: usize,
    pub lh: usize,
    pub constants: InterferenceConstants,
    /// 𝒢_k, k = 0..L_h-1.
    pub blocks: Vec<CMatrix>,
    /// G_k = W^{-k} 𝒢_k.
    pub cores: Vec<CMatrix>,
    pub b: CMatrix,
    pub lambda: Vec<f64>,
    pub lambda_k: Vec<Vec<f64>>,
    /// Δ_k[i] = λ_{k,i}² / (λ_i λ_{(i+k) mod M}).
    pub delta_k: Vec<Vec<f64>>,
    pub alpha: Vec<f64>,
}

impl SystemModel {
    pub fn new(fb: &FilterBank, lh: usize) -> Result<Self> {
        let m = fb.subcarriers();
        if lh == 0 || lh > m {
            return Err(Error::Config(format!("L_h={lh} must lie in [1, M={m}]")));
        }
        let constants = interference_constants(fb)?;
        let gen = BlockGenerator::new(fb);
        let blocks: Vec<CMatrix> = (0..lh as i64).map(|k| gen.block(k)).collect();
        let b = blocks[0].clone();
        let assumed = build_b(m, &constants);
        let dev = dft::max_abs_diff(&assumed, &b);
        if dev > 1e-9 {
            warn!("computed B deviates from the tridiagonal pattern by {dev:e}; using computed B");
        }
        let cores: Vec<CMatrix> = blocks
            .iter()
            .enumerate()
            .map(|(k, blk)| dft::modulation_matrix(m, -(k as i64)) * blk)
            .collect();
        let lambda = real_parts(&eig_circulant(&b)?, "B")?;
        if let Some(bad) = lambda.iter().find(|v| **v <= 0.0) {
            return Err(Error::IllConditioned(*bad));
        }
        let lambda_k = cores
            .iter()
            .map(|c| real_parts(&eig_circulant(c)?, "G_k"))
            .collect::<Result<Vec<_>>>()?;
        let delta_k = lambda_k
            .iter()
            .enumerate()
            .map(|(k, lk)| {
                (0..m).map(|i| lk[i] * lk[i] / (lambda[i] * lambda[(i + k) % m])).collect()
            })
            .collect();
        let alpha = (0..lh).map(|k| fb.filter().autocorrelation(k)).collect();
        Ok(Self { m, lh, constants, blocks, cores, b, lambda, lambda_k, delta_k, alpha })
    }

    /// Max over k ≥ 1 and pilot pairs of |G_k[P,P] - α_k I|.
    pub fn sparse_structure_deviation(&self, pilots: &[usize]) -> f64 {
        let mut dev: f64 = 0.0;
        for (k, core) in self.cores.iter().enumerate() {
            for (a, &p) in pilots.iter().enumerate() {
                for (b, &q) in pilots.iter().enumerate() {
                    let want = if a == b { self.alpha[k] } else { 0.0 };
                    dev = dev.max((core[(p, q)] - Complex64::new(want, 0.0)).norm());
                }
            }
        }
        dev
    }
}

/// Γ together with the model it was built from.
#[derive(Debug, Clone)]
pub struct SystemMatrices {
    pub model: Arc<SystemModel>,
    pub d: Vec<Complex64>,
    pub gamma: CMatrix,
}

impl SystemMatrices {
    pub fn new(model: Arc<SystemModel>, d: &[Complex64]) -> Result<Self> {
        if d.len() != model.m {
            return Err(Error::Dimension { expected: model.m, got: d.len() });
        }
        let dv = DVector::from_column_slice(d);
        let mut gamma = CMatrix::zeros(model.m, model.lh);
        for (k, blk) in model.blocks.iter().enumerate() {
            gamma.set_column(k, &(blk * &dv));
        }
        Ok(Self { model, d: d.to_vec(), gamma })
    }
}

pub fn build_gamma(fb: &FilterBank, lh: usize, d: &[Complex64]) -> Result<SystemMatrices> {
    SystemMatrices::new(Arc::new(SystemModel::new(fb, lh)?), d)
}

/// Whitened model: `ỹ = T y`, `T = Λ^{-1/2} F^H`.
#[derive(Debug, Clone)]
pub struct Whitened {
    pub transform: CMatrix,
    pub d_tilde: Vec<Complex64>,
    pub gamma_tilde: CMatrix,
}

impl Whitened {
    pub fn gram(&self) -> CMatrix {
        self.gamma_tilde.adjoint() * &self.gamma_tilde
    }
}

/// Whitening through the shift formula: column k is `Λ^{-1/2} Z^k Λ_k Λ^{-1/2} d̃`.
pub fn whiten(sys: &SystemMatrices) -> Result<Whitened> {
    let model = &sys.model;
    let m = model.m;
    if model.lambda.iter().any(|v| *v <= 0.0) {
        return Err(Error::IllConditioned(f64::INFINITY));
    }
    let f = dft::dft_matrix(m);
    let sqrt_l: Vec<f64> = model.lambda.iter().map(|v| v.sqrt()).collect();
    let inv_sqrt: Vec<f64> = sqrt_l.iter().map(|v| 1.0 / v).collect();
    let fh_d = f.adjoint() * DVector::from_column_slice(&sys.d);
    let d_tilde: Vec<Complex64> = (0..m).map(|i| fh_d[i] * sqrt_l[i]).collect();
    let mut gamma_tilde = CMatrix::zeros(m, model.lh);
    for k in 0..model.lh {
        for i in 0..m {
            let src = (i + m - k % m) % m;
            let v = if k == 0 {
                d_tilde[i]
            } else {
                d_tilde[src] * inv_sqrt[src] * model.lambda_k[k][src] * inv_sqrt[i]
            };
            gamma_tilde[(i, k)] = v;
        }
    }
    let transform = diag_real(&inv_sqrt) * f.adjoint();
    Ok(Whitened { transform, d_tilde, gamma_tilde })
}

/// `δ_k = d̃^H Δ_k d̃`, the diagonal of Γ̃^H Γ̃.
pub fn delta_values(model: &SystemModel, d_tilde: &[Complex64]) -> Vec<f64> {
    (0..model.lh)
        .map(|k| {
            if k == 0 {
                d_tilde.iter().map(|v| v.norm_sqr()).sum()
            } else {
                d_tilde.iter().zip(&model.delta_k[k]).map(|(v, w)| v.norm_sqr() * w).sum()
            }
        })
        .collect()
}

/// Writes a complex matrix as CSV rows of `re,im` pairs.
pub fn write_matrix_csv<W: std::io::Write>(mut w: W, a: &CMatrix) -> std::io::Result<()> {
    for r in 0..a.nrows() {
        let row: Vec<String> =
            (0..a.ncols()).map(|c| format!("{:.17e},{:.17e}", a[(r, c)].re, a[(r, c)].im)).collect();
        writeln!(w, "{}", row.join(","))?;
    }
    Ok(())
}
