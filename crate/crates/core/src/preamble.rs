//! Preamble designs and their closed-form MSE predictions.

use std::io::{BufRead, Write};

use log::info;
use nalgebra::DVector;
use num_complex::Complex64;

use crate::dft::{self, CMatrix};
use crate::error::{Error, Result};
use crate::sysmodel::SystemModel;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PreambleKind {
    Full,
    Sparse,
    TwoSymbol,
    Iamc,
}

impl PreambleKind {
    pub fn name(&self) -> &'static str {
        match self {
            PreambleKind::Full => "full",
            PreambleKind::Sparse => "sparse",
            PreambleKind::TwoSymbol => "two_symbol",
            PreambleKind::Iamc => "iamc",
        }
    }
}

/// Pilot symbol(s) sent between two zero guard symbols.
#[derive(Debug, Clone, PartialEq)]
pub struct PreambleSpec {
    pub kind: PreambleKind,
    pub d: Vec<Complex64>,
    pub d2: Option<Vec<Complex64>>,
    /// Nonzero subcarriers of a sparse preamble (empty otherwise).
    pub pilots: Vec<usize>,
    /// Energy budget E.
    pub energy: f64,
}

impl PreambleSpec {
    pub fn scaled(&self, rho: f64) -> Self {
        let s = |v: &Vec<Complex64>| v.iter().map(|x| x * rho).collect::<Vec<_>>();
        Self {
            kind: self.kind,
            d: s(&self.d),
            d2: self.d2.as_ref().map(s),
            pilots: self.pilots.clone(),
            energy: self.energy * rho * rho,
        }
    }
}

#[derive(Debug, Clone)]
pub struct FullDesign {
    pub spec: PreambleSpec,
    /// 0-based index; the one-based index is `m_opt + 1`.
    pub m_opt: usize,
    /// `λ_m Σ_{k=1}^{L_h-1} λ_{(m+k) mod M} / λ_{k,m}²` for every m.
    pub costs: Vec<f64>,
}

impl FullDesign {
    /// Predicted time-domain MSE `σ²/E · (1 + cost(m_opt))`.
    pub fn predicted_mse(&self, sigma2: f64) -> f64 {
        sigma2 / self.spec.energy * (1.0 + self.costs[self.m_opt])
    }
}

pub fn full_costs(lambda: &[f64], lambda_k: &[Vec<f64>]) -> Vec<f64> {
    let m = lambda.len();
    (0..m)
        .map(|i| {
            let s: f64 = (1..lambda_k.len())
                .map(|k| lambda[(i + k) % m] / lambda_k[k][i].powi(2))
                .sum();
            lambda[i] * s
        })
        .collect()
}

/// Index of the smallest cost; ties resolve to the lowest index.
pub fn argmin_lowest(costs: &[f64]) -> usize {
    let mut best = 0;
    for (i, c) in costs.iter().enumerate() {
        if *c < costs[best] {
            best = i;
        }
    }
    let ties = costs.iter().filter(|c| **c == costs[best]).count();
    if ties > 1 {
        info!("{ties} subcarrier indices tie for the minimum cost; picking {best}");
    }
    best
}

/// Single-spike whitened preamble `d = √(E/λ_m) f_m` at the cost-minimising m.
pub fn design_full_optimal(model: &SystemModel, energy: f64) -> Result<FullDesign> {
    if energy <= 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let costs = full_costs(&model.lambda, &model.lambda_k);
    let m_opt = argmin_lowest(&costs);
    let scale = (energy / model.lambda[m_opt]).sqrt();
    let d = dft::dft_column(model.m, m_opt).into_iter().map(|v| v * scale).collect();
    Ok(FullDesign {
        spec: PreambleSpec { kind: PreambleKind::Full, d, d2: None, pilots: vec![], energy },
        m_opt,
        costs,
    })
}

fn nearest_divisor(m: usize, lh: usize) -> usize {
    (1..=m / 2)
        .filter(|v| m.is_multiple_of(*v))
        .min_by_key(|v| (v.abs_diff(lh), *v))
        .unwrap_or(1)
}

/// Equispaced, equipowered pilots `p_i = p0 + i·M/L_h` with `|d_{p_i}| = √(E/L_h)`.
pub fn design_sparse_optimal(
    m: usize,
    lh: usize,
    energy: f64,
    p0: usize,
    phases: &[f64],
) -> Result<PreambleSpec> {
    if lh == 0 || !m.is_multiple_of(lh) || lh > m / 2 {
        return Err(Error::SparseSpacing { lh, m, nearest: nearest_divisor(m, lh) });
    }
    let step = m / lh;
    if p0 >= step {
        return Err(Error::Config(format!("pilot offset p0={p0} must be below the spacing {step}")));
    }
    if !phases.is_empty() && phases.len() != lh {
        return Err(Error::Dimension { expected: lh, got: phases.len() });
    }
    if energy <= 0.0 {
        return Err(Error::ZeroEnergy);
    }
    let amp = (energy / lh as f64).sqrt();
    let pilots: Vec<usize> = (0..lh).map(|i| p0 + i * step).collect();
    let mut d = vec![Complex64::new(0.0, 0.0); m];
    for (i, &p) in pilots.iter().enumerate() {
        d[p] = Complex64::from_polar(amp, phases.get(i).copied().unwrap_or(0.0));
    }
    Ok(PreambleSpec { kind: PreambleKind::Sparse, d, d2: None, pilots, energy })
}

/// Time-domain MSE `(1/L_h)(1 + Σ_{k≥1} 1/α_k²) / SNR_sbc`.
pub fn predicted_sparse_mse(alpha: &[f64], snr_sbc: f64) -> f64 {
    let lh = alpha.len() as f64;
    let s: f64 = alpha.iter().skip(1).map(|a| 1.0 / (a * a)).sum();
    (1.0 + s) / lh / snr_sbc
}

/// `d = √(E/(M(1+2β))) (1_{M/4} ⊗ [1, -j, -1, j])`.
pub fn design_iamc(m: usize, beta: f64, energy: f64) -> Result<PreambleSpec> {
    if !m.is_multiple_of(4) {
        return Err(Error::Config(format!("IAM-C needs M divisible by 4 (M={m})")));
    }
    let amp = (energy / (m as f64 * (1.0 + 2.0 * beta))).sqrt();
    let d = (0..m).map(|p| dft::j_pow(-(p as i64)) * amp).collect();
    Ok(PreambleSpec { kind: PreambleKind::Iamc, d, d2: None, pilots: vec![], energy })
}

/// Frequency-domain IAM-C MSE `M / ((1+2β) SNR_sbc)` for a flat channel.
pub fn predicted_iamc_mse(m: usize, beta: f64, snr_sbc: f64) -> f64 {
    m as f64 / ((1.0 + 2.0 * beta) * snr_sbc)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CpofdmKind {
    Full,
    Sparse(usize),
}

/// CP-OFDM pilot tones of total energy E: a scaled DFT column, or equal equispaced tones.
pub fn design_cpofdm(m: usize, energy: f64, kind: CpofdmKind) -> Result<Vec<Complex64>> {
    match kind {
        CpofdmKind::Full => Ok(dft::dft_column(m, 0).into_iter().map(|v| v * energy.sqrt()).collect()),
        CpofdmKind::Sparse(lh) => Ok(design_sparse_optimal(m, lh, energy, 0, &[])?.d),
    }
}

/// `d^H B d`, or `d̄^H B̄ d̄` for a two-symbol preamble.
pub fn sfb_energy(b: &CMatrix, spec: &PreambleSpec) -> f64 {
    let quad = |a: &CMatrix, v: &[Complex64]| {
        let x = DVector::from_column_slice(v);
        (x.adjoint() * a * &x)[(0, 0)].re
    };
    match &spec.d2 {
        None => quad(b, &spec.d),
        Some(d2) => {
            let dbar: Vec<Complex64> = spec.d.iter().chain(d2).copied().collect();
            quad(b, &dbar)
        }
    }
}

/// CSV with header `index,re,im`; a two-symbol preamble lists d₁ then d₂ (indices 0..2M).
pub fn write_csv<W: Write>(mut w: W, spec: &PreambleSpec) -> std::io::Result<()> {
    writeln!(w, "index,re,im")?;
    let all = spec.d.iter().chain(spec.d2.iter().flatten());
    for (i, v) in all.enumerate() {
        writeln!(w, "{i},{:.17e},{:.17e}", v.re, v.im)?;
    }
    Ok(())
}

/// Reads `index,re,im` rows; lines starting with `#` are ignored.
pub fn read_csv<R: BufRead>(r: R) -> Result<Vec<Complex64>> {
    let mut out: Vec<(usize, Complex64)> = Vec::new();
    for (n, line) in r.lines().enumerate() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() || t.starts_with('#') || t.starts_with("index") {
            continue;
        }
        let f: Vec<&str> = t.split(',').map(str::trim).collect();
        let parse = |s: &str| s.parse::<f64>().map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)));
        if f.len() != 3 {
            return Err(Error::Parse(format!("line {}: expected index,re,im", n + 1)));
        }
        let idx = f[0].parse::<usize>().map_err(|e| Error::Parse(format!("line {}: {e}", n + 1)))?;
        out.push((idx, Complex64::new(parse(f[1])?, parse(f[2])?)));
    }
    out.sort_by_key(|(i, _)| *i);
    if out.iter().enumerate().any(|(k, (i, _))| k != *i) {
        return Err(Error::Parse("indices must be 0..N without gaps".into()));
    }
    Ok(out.into_iter().map(|(_, v)| v).collect())
}
