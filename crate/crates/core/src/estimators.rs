//! Channel estimators: Gauss-Markov in the time domain (full, sparse, two-symbol),
//! flat-subchannel IAM with optional smoothing, and the CP-OFDM least-squares baseline.

use std::f64::consts::PI;

use log::{debug, warn};
use nalgebra::DVector;
use num_complex::Complex64;

use crate::dft::{self, CMatrix};
use crate::error::{Error, Result};
use crate::sysmodel::{CbarDecomposition, SystemMatrices, TwoSymbolMatrices};

const MAX_CONDITION: f64 = 1e12;

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    taps: Vec<Complex64>,
    m: usize,
}

impl ChannelRealization {
    pub fn new(taps: Vec<Complex64>, m: usize) -> Result<Self> {
        if taps.is_empty() || taps.len() > m {
            return Err(Error::Config(format!("channel length {} must lie in [1, M={m}]", taps.len())));
        }
        Ok(Self { taps, m })
    }

    pub fn taps(&self) -> &[Complex64] {
        &self.taps
    }

    pub fn lh(&self) -> usize {
        self.taps.len()
    }

    /// `H_i = Σ_k h_k e^{-j2π ik/M}`, i.e. `√M F_{:,0..L_h} h`.
    pub fn cfr(&self) -> Vec<Complex64> {
        let mut padded = self.taps.clone();
        padded.resize(self.m, Complex64::new(0.0, 0.0));
        dft::fft(&padded)
    }
}

/// CFR of an arbitrary tap vector on M tones.
pub fn taps_to_cfr(taps: &[Complex64], m: usize) -> Vec<Complex64> {
    let mut padded = taps.to_vec();
    padded.resize(m, Complex64::new(0.0, 0.0));
    dft::fft(&padded)
}

#[derive(Debug, Clone)]
pub struct EstimationResult {
    pub method: String,
    pub h_hat: Option<Vec<Complex64>>,
    pub cfr_hat: Vec<Complex64>,
}

impl EstimationResult {
    pub fn from_taps(method: &str, h_hat: Vec<Complex64>, m: usize) -> Self {
        let cfr_hat = taps_to_cfr(&h_hat, m);
        Self { method: method.to_string(), h_hat: Some(h_hat), cfr_hat }
    }

    pub fn from_cfr(method: &str, cfr_hat: Vec<Complex64>) -> Self {
        Self { method: method.to_string(), h_hat: None, cfr_hat }
    }

    pub fn nmse(&self, truth: &[Complex64]) -> f64 {
        nmse(truth, &self.cfr_hat)
    }
}

/// `‖H - Ĥ‖² / ‖H‖²`.
pub fn nmse(truth: &[Complex64], estimate: &[Complex64]) -> f64 {
    let err: f64 = truth.iter().zip(estimate).map(|(a, b)| (a - b).norm_sqr()).sum();
    let pow: f64 = truth.iter().map(|a| a.norm_sqr()).sum();
    err / pow
}

/// Precomputed weighted least-squares estimator `(Γ^H C^{-1} Γ)^{-1} Γ^H C^{-1}`.
#[derive(Debug, Clone)]
pub struct GaussMarkov {
    estimator: CMatrix,
    normal_inverse: CMatrix,
    condition: f64,
}

impl GaussMarkov {
    /// `cov` is the noise covariance up to the scalar σ².
    pub fn new(gamma: &CMatrix, cov: &CMatrix) -> Result<Self> {
        let chol = cov.clone().cholesky().ok_or(Error::IllConditioned(f64::INFINITY))?;
        let weighted = chol.solve(gamma);
        let normal = gamma.adjoint() * &weighted;
        Self::from_parts(&normal, weighted.adjoint())
    }

    /// From an already whitened model `ỹ = Γ̃ h + white noise`, with `ỹ = T y`.
    pub fn whitened(gamma_tilde: &CMatrix, transform: &CMatrix) -> Result<Self> {
        let normal = gamma_tilde.adjoint() * gamma_tilde;
        Self::from_parts(&normal, gamma_tilde.adjoint() * transform)
    }

    fn from_parts(normal: &CMatrix, rhs: CMatrix) -> Result<Self> {
        let hermitian = (normal + normal.adjoint()) * Complex64::new(0.5, 0.0);
        let eig = hermitian.clone().symmetric_eigenvalues();
        let max = eig.iter().copied().fold(f64::MIN, f64::max);
        let min = eig.iter().copied().fold(f64::MAX, f64::min);
        let condition = if min > 0.0 { max / min } else { f64::INFINITY };
        if condition > MAX_CONDITION {
            return Err(Error::IllConditioned(condition));
        }
        debug!("normal matrix condition number {condition:.3e}");
        let chol = hermitian.cholesky().ok_or(Error::IllConditioned(condition))?;
        let normal_inverse = chol.inverse();
        let estimator = &normal_inverse * rhs;
        Ok(Self { estimator, normal_inverse, condition })
    }

    pub fn estimate(&self, y: &[Complex64]) -> Vec<Complex64> {
        (&self.estimator * DVector::from_column_slice(y)).iter().copied().collect()
    }

    /// `tr{(Γ^H C^{-1} Γ)^{-1}}`: time-domain MSE per unit σ².
    pub fn trace(&self) -> f64 {
        self.normal_inverse.diagonal().iter().map(|v| v.re).sum()
    }

    pub fn condition(&self) -> f64 {
        self.condition
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.estimator
    }
}

/// Time-domain Gauss-Markov estimate for a single pilot symbol.
pub fn td_estimate(sys: &SystemMatrices, y: &[Complex64]) -> Result<Vec<Complex64>> {
    if y.len() != sys.model.m {
        return Err(Error::Dimension { expected: sys.model.m, got: y.len() });
    }
    Ok(GaussMarkov::new(&sys.gamma, &sys.model.b)?.estimate(y))
}

/// True when the pilot set is `p0 + i·M/L_h`, i = 0..L_h-1.
pub fn is_equispaced(pilots: &[usize], m: usize) -> bool {
    let n = pilots.len();
    if n == 0 || !m.is_multiple_of(n) {
        return false;
    }
    let step = m / n;
    pilots[0] < step && pilots.iter().enumerate().all(|(i, p)| *p == pilots[0] + i * step)
}

/// Divide / IDFT / divide estimator for equispaced pilots:
/// `ĥ_k = [IDFT_{L_h}(y_P ⊘ d_P)]_k · e^{j2π k p_0/M} / α_k`.
pub fn sparse_fast(
    pilots: &[usize],
    d_p: &[Complex64],
    alpha: &[f64],
    m: usize,
    y_p: &[Complex64],
) -> Result<Vec<Complex64>> {
    let lh = pilots.len();
    if d_p.len() != lh || y_p.len() != lh || alpha.len() != lh {
        return Err(Error::Dimension { expected: lh, got: d_p.len().min(y_p.len()).min(alpha.len()) });
    }
    if let Some(i) = d_p.iter().position(|v| v.norm() == 0.0) {
        return Err(Error::ZeroPilot(pilots[i]));
    }
    let ratio: Vec<Complex64> = y_p.iter().zip(d_p).map(|(y, d)| y / d).collect();
    let p0 = pilots[0] as f64;
    Ok(dft::ifft(&ratio)
        .into_iter()
        .enumerate()
        .map(|(k, v)| v * Complex64::from_polar(1.0, 2.0 * PI * k as f64 * p0 / m as f64) / alpha[k])
        .collect())
}

/// Sparse-preamble estimate from the full AFB vector.
/// Non-equispaced pilot sets fall back to the generic solve `Γ_P^{-1} y_P`.
pub fn td_estimate_sparse(
    sys: &SystemMatrices,
    pilots: &[usize],
    y: &[Complex64],
) -> Result<Vec<Complex64>> {
    let m = sys.model.m;
    let lh = sys.model.lh;
    if pilots.len() != lh {
        return Err(Error::Dimension { expected: lh, got: pilots.len() });
    }
    let y_p: Vec<Complex64> = pilots.iter().map(|&p| y[p]).collect();
    let d_p: Vec<Complex64> = pilots.iter().map(|&p| sys.d[p]).collect();
    if is_equispaced(pilots, m) {
        return sparse_fast(pilots, &d_p, &sys.model.alpha, m, &y_p);
    }
    warn!("pilot set is not equispaced; using the generic solve");
    sparse_generic(sys, pilots, &y_p)
}

/// `ĥ = Γ_P^{-1} y_P` on the pilot rows.
pub fn sparse_generic(sys: &SystemMatrices, pilots: &[usize], y_p: &[Complex64]) -> Result<Vec<Complex64>> {
    let lh = sys.model.lh;
    let gamma_p = CMatrix::from_fn(lh, lh, |r, c| sys.gamma[(pilots[r], c)]);
    let lu = gamma_p.lu();
    lu.solve(&DVector::from_column_slice(y_p))
        .map(|v| v.iter().copied().collect())
        .ok_or(Error::IllConditioned(f64::INFINITY))
}

/// Two-symbol Gauss-Markov estimator with `B̄^{-1}` applied through the decomposition chain.
pub fn two_symbol_estimator(two: &TwoSymbolMatrices, dec: &CbarDecomposition) -> Result<GaussMarkov> {
    let tw = dec.whitening_transform()?;
    let gt = &tw * &two.gamma_bar;
    GaussMarkov::whitened(&gt, &tw)
}

pub fn td_estimate_two_symbol(
    two: &TwoSymbolMatrices,
    dec: &CbarDecomposition,
    ybar: &[Complex64],
) -> Result<Vec<Complex64>> {
    if ybar.len() != 2 * two.m {
        return Err(Error::Dimension { expected: 2 * two.m, got: ybar.len() });
    }
    Ok(two_symbol_estimator(two, dec)?.estimate(ybar))
}

/// Pseudo-pilots `c = B d`.
pub fn pseudo_pilots(b: &CMatrix, d: &[Complex64]) -> Vec<Complex64> {
    (b * DVector::from_column_slice(d)).iter().copied().collect()
}

/// `Ĥ_m = y_m / c_m`.
pub fn iam_estimate(c: &[Complex64], y: &[Complex64]) -> Result<Vec<Complex64>> {
    if c.len() != y.len() {
        return Err(Error::Dimension { expected: c.len(), got: y.len() });
    }
    if let Some(i) = c.iter().position(|v| v.norm() == 0.0) {
        return Err(Error::ZeroPilot(i));
    }
    Ok(y.iter().zip(c).map(|(a, b)| a / b).collect())
}

/// Projects a CFR estimate onto the span of length-L_h impulse responses.
pub fn dft_interpolate(cfr: &[Complex64], lh: usize) -> Vec<Complex64> {
    let mut taps = dft::ifft(cfr);
    for t in taps.iter_mut().skip(lh) {
        *t = Complex64::new(0.0, 0.0);
    }
    dft::fft(&taps)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SmoothingVariant {
    /// Weights from the inverse of the local 3×3 noise covariance.
    Blue,
    /// Same combiner with the covariance replaced by the identity.
    Plain,
}

/// 3-tap combining of adjacent CFR estimates, windows wrapping circularly:
/// `Ĥ̂_m = c^H B₃^{-1} (c ⊙ Ĥ) / (c^H B₃^{-1} c)` over subcarriers m-1, m, m+1.
pub fn blue_smooth(
    cfr: &[Complex64],
    c: &[Complex64],
    beta: f64,
    variant: SmoothingVariant,
) -> Result<Vec<Complex64>> {
    let m = cfr.len();
    if m < 3 {
        return Err(Error::Config("smoothing needs at least 3 subcarriers".into()));
    }
    if c.len() != m {
        return Err(Error::Dimension { expected: m, got: c.len() });
    }
    let jb = Complex64::new(0.0, beta);
    let z = Complex64::new(0.0, 0.0);
    let one = Complex64::new(1.0, 0.0);
    let weight = match variant {
        SmoothingVariant::Blue => {
            let b3 = CMatrix::from_row_slice(3, 3, &[one, jb, z, -jb, one, jb, z, -jb, one]);
            b3.try_inverse().ok_or(Error::IllConditioned(f64::INFINITY))?
        }
        SmoothingVariant::Plain => CMatrix::identity(3, 3),
    };
    let mut out = Vec::with_capacity(m);
    for i in 0..m {
        let idx = [(i + m - 1) % m, i, (i + 1) % m];
        let cw = DVector::from_iterator(3, idx.iter().map(|&p| c[p]));
        let ch = DVector::from_iterator(3, idx.iter().map(|&p| c[p] * cfr[p]));
        let num = (cw.adjoint() * &weight * ch)[(0, 0)];
        let den = (cw.adjoint() * &weight * &cw)[(0, 0)];
        if den.norm() < 1e-300 {
            return Err(Error::ZeroPilot(i));
        }
        out.push(num / den);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EstimationMode {
    Frequency,
    Time,
}

/// CP-OFDM least squares `Ĥ = Y ⊘ X`, optionally DFT-interpolated to L_h taps.
pub fn cpofdm_estimate(
    pilots: &[Complex64],
    y_freq: &[Complex64],
    lh: usize,
    mode: EstimationMode,
) -> Result<Vec<Complex64>> {
    let ls = iam_estimate(pilots, y_freq)?;
    Ok(match mode {
        EstimationMode::Frequency => ls,
        EstimationMode::Time => dft_interpolate(&ls, lh),
    })
}

/// CP-OFDM with equispaced pilot tones: divide, L_h-point IDFT, then the full CFR.
pub fn cpofdm_estimate_sparse(
    pilot_tones: &[usize],
    pilots: &[Complex64],
    y_freq: &[Complex64],
) -> Result<Vec<Complex64>> {
    let m = y_freq.len();
    let lh = pilot_tones.len();
    let x_p: Vec<Complex64> = pilot_tones.iter().map(|&p| pilots[p]).collect();
    let y_p: Vec<Complex64> = pilot_tones.iter().map(|&p| y_freq[p]).collect();
    let taps = sparse_fast(pilot_tones, &x_p, &vec![1.0; lh], m, &y_p)?;
    Ok(taps_to_cfr(&taps, m))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filterbank::{FbmcConfig, FilterBank};
    use crate::sysmodel::{build_gamma, SystemModel};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;
    use std::sync::Arc;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn random_vec(rng: &mut ChaCha8Rng, n: usize) -> Vec<Complex64> {
        (0..n).map(|_| c(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)).collect()
    }

    #[test]
    fn cfr_matches_dft_columns() {
        let h = ChannelRealization::new(vec![c(1.0, 0.5), c(-0.2, 0.1), c(0.0, 0.3)], 16).unwrap();
        let f = dft::dft_matrix(16);
        let hv = DVector::from_column_slice(h.taps());
        let want = f.columns(0, 3) * hv * c(4.0, 0.0);
        for (a, b) in h.cfr().iter().zip(want.iter()) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(ChannelRealization::new(vec![], 8).is_err());
    }

    #[test]
    fn gauss_markov_noiseless_and_zero() {
        let fb = FilterBank::new(FbmcConfig::new(64, 3).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let d = random_vec(&mut rng, 64);
        let sys = build_gamma(&fb, 8, &d).unwrap();
        let h = random_vec(&mut rng, 8);
        let y: Vec<Complex64> = (&sys.gamma * DVector::from_column_slice(&h)).iter().copied().collect();
        let est = td_estimate(&sys, &y).unwrap();
        let err: f64 = est.iter().zip(&h).map(|(a, b)| (a - b).norm_sqr()).sum::<f64>().sqrt();
        let norm: f64 = h.iter().map(|v| v.norm_sqr()).sum::<f64>().sqrt();
        assert!(err / norm < 1e-8);
        assert!(td_estimate(&sys, &vec![c(0.0, 0.0); 64]).unwrap().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn rank_deficient_is_reported() {
        let fb = FilterBank::new(FbmcConfig::new(16, 3).unwrap()).unwrap();
        let d = vec![c(0.0, 0.0); 16];
        let sys = build_gamma(&fb, 8, &d).unwrap();
        assert!(matches!(td_estimate(&sys, &vec![c(0.0, 0.0); 16]), Err(Error::IllConditioned(_))));
    }

    #[test]
    fn sparse_fast_equals_structured_solve() {
        let (m, lh) = (64, 8);
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let fb = FilterBank::new(FbmcConfig::new(m, 3).unwrap()).unwrap();
        let model = SystemModel::new(&fb, lh).unwrap();
        for p0 in [0usize, 3] {
            let pilots: Vec<usize> = (0..lh).map(|i| p0 + i * m / lh).collect();
            let d_p = random_vec(&mut rng, lh);
            // Idealised Γ_P = diag(d_P) · (α-windowed DFT).
            let gp = CMatrix::from_fn(lh, lh, |r, k| {
                d_p[r] * dft::twiddle((pilots[r] * k) as i64, m) * model.alpha[k]
            });
            let y_p = random_vec(&mut rng, lh);
            let generic = gp.lu().solve(&DVector::from_column_slice(&y_p)).unwrap();
            let fast = sparse_fast(&pilots, &d_p, &model.alpha, m, &y_p).unwrap();
            for (a, b) in fast.iter().zip(generic.iter()) {
                assert!((a - b).norm() < 1e-10);
            }
        }
    }

    #[test]
    fn sparse_fast_close_to_exact_model() {
        let (m, lh) = (64, 8);
        let fb = FilterBank::new(FbmcConfig::new(m, 3).unwrap()).unwrap();
        let model = Arc::new(SystemModel::new(&fb, lh).unwrap());
        let pilots: Vec<usize> = (0..lh).map(|i| i * m / lh).collect();
        let mut d = vec![c(0.0, 0.0); m];
        for &p in &pilots {
            d[p] = c(1.0, 0.0);
        }
        let sys = SystemMatrices::new(model.clone(), &d).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let y = random_vec(&mut rng, m);
        let fast = td_estimate_sparse(&sys, &pilots, &y).unwrap();
        let y_p: Vec<Complex64> = pilots.iter().map(|&p| y[p]).collect();
        let generic = sparse_generic(&sys, &pilots, &y_p).unwrap();
        let dev = model.sparse_structure_deviation(&pilots);
        let gap = fast.iter().zip(&generic).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        let scale = generic.iter().map(|v| v.norm()).fold(0.0, f64::max);
        assert!(gap <= 100.0 * dev * scale.max(1.0), "gap {gap:e} dev {dev:e}");
    }

    #[test]
    fn sparse_with_unit_alpha_is_divide_and_ifft() {
        let pilots = [0usize, 4, 8, 12];
        let d_p = vec![c(2.0, 0.0); 4];
        let y_p = vec![c(2.0, 0.0), c(0.0, 2.0), c(-2.0, 0.0), c(0.0, -2.0)];
        let got = sparse_fast(&pilots, &d_p, &[1.0; 4], 16, &y_p).unwrap();
        let want = dft::ifft(&[c(1.0, 0.0), c(0.0, 1.0), c(-1.0, 0.0), c(0.0, -1.0)]);
        for (a, b) in got.iter().zip(&want) {
            assert!((a - b).norm() < 1e-14);
        }
        assert!(matches!(
            sparse_fast(&pilots, &[c(0.0, 0.0); 4], &[1.0; 4], 16, &y_p),
            Err(Error::ZeroPilot(0))
        ));
        assert!(is_equispaced(&pilots, 16));
        assert!(!is_equispaced(&[0, 4, 9, 12], 16));
    }

    #[test]
    fn interpolation_properties() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let h = ChannelRealization::new(random_vec(&mut rng, 5), 32).unwrap();
        let cfr = h.cfr();
        for (a, b) in dft_interpolate(&cfr, 5).iter().zip(&cfr) {
            assert!((a - b).norm() < 1e-12);
        }
        let noise = random_vec(&mut rng, 32);
        for (a, b) in dft_interpolate(&noise, 32).iter().zip(&noise) {
            assert!((a - b).norm() < 1e-12);
        }
        let once = dft_interpolate(&noise, 7);
        let twice = dft_interpolate(&once, 7);
        for (a, b) in once.iter().zip(&twice) {
            assert!((a - b).norm() < 1e-12);
        }
    }

    #[test]
    fn smoothing_basics() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let pp = random_vec(&mut rng, 16);
        let flat = vec![c(0.7, -0.3); 16];
        for v in [SmoothingVariant::Blue, SmoothingVariant::Plain] {
            for (a, b) in blue_smooth(&flat, &pp, 0.25, v).unwrap().iter().zip(&flat) {
                assert!((a - b).norm() < 1e-12);
            }
        }
        let noisy = random_vec(&mut rng, 16);
        let blue = blue_smooth(&noisy, &pp, 0.0, SmoothingVariant::Blue).unwrap();
        let plain = blue_smooth(&noisy, &pp, 0.0, SmoothingVariant::Plain).unwrap();
        for (a, b) in blue.iter().zip(&plain) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(blue_smooth(&noisy[..2], &pp[..2], 0.2, SmoothingVariant::Blue).is_err());
    }

    #[test]
    fn iam_and_ofdm_noiseless() {
        let c1 = vec![c(1.0, 1.0); 8];
        assert!(matches!(iam_estimate(&[c(0.0, 0.0)], &[c(1.0, 0.0)]), Err(Error::ZeroPilot(0))));
        let est = iam_estimate(&c1, &c1).unwrap();
        assert!(est.iter().all(|v| (v - c(1.0, 0.0)).norm() < 1e-15));
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let h = ChannelRealization::new(random_vec(&mut rng, 4), 16).unwrap();
        let x: Vec<Complex64> = (0..16).map(|i| dft::twiddle(i * i, 16)).collect();
        let y: Vec<Complex64> = x.iter().zip(h.cfr()).map(|(a, b)| a * b).collect();
        for mode in [EstimationMode::Frequency, EstimationMode::Time] {
            let e = cpofdm_estimate(&x, &y, 4, mode).unwrap();
            assert!(nmse(&h.cfr(), &e) < 1e-24);
        }
        let tones = [1usize, 5, 9, 13];
        let sparse = cpofdm_estimate_sparse(&tones, &x, &y).unwrap();
        assert!(nmse(&h.cfr(), &sparse) < 1e-24);
    }
}
