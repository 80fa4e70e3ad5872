//! Direct-form FBMC/OQAM chain: synthesis, tapped-delay channel with AWGN, analysis.
//!
//! Pulses are `g_{m,n}(l) = g(l - nM/2) e^{j2π m (l - (Lg-1)/2)/M} e^{jφ_{m,n}}`
//! with `φ_{m,n} = (m+n)π/2 + mnπ`.

use std::f64::consts::PI;

use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;

use crate::dft::{j_pow, twiddle};
use crate::error::{Error, Result};
use crate::estimators::ChannelRealization;

const ENERGY_TOL: f64 = 1e-12;
const SYMMETRY_TOL: f64 = 1e-12;

/// System geometry. The prototype length is `K·M − 1` (odd, exactly symmetric).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FbmcConfig {
    pub m: usize,
    pub k: usize,
}

impl FbmcConfig {
    pub fn new(m: usize, k: usize) -> Result<Self> {
        if m < 8 || !m.is_multiple_of(4) {
            return Err(Error::Config(format!(
                "M={m}: subcarrier count must be a multiple of 4 and at least 8"
            )));
        }
        if !(2..=4).contains(&k) {
            return Err(Error::UnsupportedOverlap(k));
        }
        Ok(Self { m, k })
    }

    pub fn filter_len(&self) -> usize {
        self.k * self.m - 1
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeFilter {
    coeffs: Vec<f64>,
}

impl PrototypeFilter {
    /// Wraps arbitrary real taps after checking unit energy and symmetry.
    pub fn new(coeffs: Vec<f64>) -> Result<Self> {
        let energy: f64 = coeffs.iter().map(|c| c * c).sum();
        if (energy - 1.0).abs() > ENERGY_TOL {
            return Err(Error::FilterEnergy(energy));
        }
        let n = coeffs.len();
        let asym = (0..n)
            .map(|l| (coeffs[l] - coeffs[n - 1 - l]).abs())
            .fold(0.0, f64::max);
        if asym > SYMMETRY_TOL {
            return Err(Error::FilterSymmetry(asym));
        }
        Ok(Self { coeffs })
    }

    /// Frequency-sampling prototype with `K-1` free coefficients.
    pub fn design(m: usize, k: usize) -> Result<Self> {
        let p: Vec<f64> = match k {
            2 => vec![1.0, std::f64::consts::FRAC_1_SQRT_2],
            3 => {
                let p1 = (1.0 + 7f64.sqrt()) / 4.0;
                vec![1.0, p1, (1.0 - p1 * p1).sqrt()]
            }
            4 => {
                let p1 = 0.971_959_83;
                vec![1.0, p1, std::f64::consts::FRAC_1_SQRT_2, (1.0 - p1 * p1).sqrt()]
            }
            _ => return Err(Error::UnsupportedOverlap(k)),
        };
        let km = (k * m) as f64;
        let len = k * m - 1;
        let sample = |l: usize| {
            let mut v = p[0];
            for (i, pi) in p.iter().enumerate().skip(1) {
                let sign = if i % 2 == 1 { -1.0 } else { 1.0 };
                v += 2.0 * sign * pi * (2.0 * PI * i as f64 * (l + 1) as f64 / km).cos();
            }
            v
        };
        let mut g = vec![0.0; len];
        for l in 0..=len / 2 {
            let v = sample(l);
            g[l] = v;
            g[len - 1 - l] = v;
        }
        let norm = g.iter().map(|c| c * c).sum::<f64>().sqrt();
        g.iter_mut().for_each(|c| *c /= norm);
        Self::new(g)
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    /// g(l), zero outside the support.
    pub fn at(&self, l: i64) -> f64 {
        if l < 0 || l as usize >= self.coeffs.len() {
            0.0
        } else {
            self.coeffs[l as usize]
        }
    }

    /// Lag-k autocorrelation `α_k = Σ_l g(l-k) g(l)`.
    pub fn autocorrelation(&self, k: usize) -> f64 {
        (k..self.len()).map(|l| self.coeffs[l - k] * self.coeffs[l]).sum()
    }
}

/// `e^{jφ_{m,n}}` with `φ = (m+n)π/2 + mnπ`.
pub fn phase(m: usize, n: usize) -> Complex64 {
    let sign = if (m * n) % 2 == 1 { -1.0 } else { 1.0 };
    j_pow((m + n) as i64) * sign
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct TimeSignal(pub Vec<Complex64>);

impl TimeSignal {
    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn energy(&self) -> f64 {
        self.0.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// Symbols `d_{m,n}` stored symbol by symbol.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolGrid {
    m: usize,
    symbols: Vec<Vec<Complex64>>,
}

impl SymbolGrid {
    pub fn zeros(m: usize, n: usize) -> Self {
        Self { m, symbols: vec![vec![Complex64::new(0.0, 0.0); m]; n] }
    }

    pub fn from_symbols(m: usize, symbols: Vec<Vec<Complex64>>) -> Result<Self> {
        for s in &symbols {
            if s.len() != m {
                return Err(Error::Dimension { expected: m, got: s.len() });
            }
        }
        Ok(Self { m, symbols })
    }

    /// Guard / pilots / guard frame.
    pub fn guarded(m: usize, pilots: &[&[Complex64]]) -> Result<Self> {
        let zero = vec![Complex64::new(0.0, 0.0); m];
        let mut symbols = vec![zero.clone()];
        symbols.extend(pilots.iter().map(|p| p.to_vec()));
        symbols.push(zero);
        Self::from_symbols(m, symbols)
    }

    pub fn subcarriers(&self) -> usize {
        self.m
    }

    pub fn num_symbols(&self) -> usize {
        self.symbols.len()
    }

    pub fn get(&self, m: usize, n: usize) -> Complex64 {
        self.symbols[n][m]
    }

    pub fn set(&mut self, m: usize, n: usize, v: Complex64) {
        self.symbols[n][m] = v;
    }
}

/// AFB outputs at symbol instants `first_q, first_q + 1, ...`.
#[derive(Debug, Clone, PartialEq)]
pub struct AfbGrid {
    pub first_q: usize,
    pub symbols: Vec<Vec<Complex64>>,
}

impl AfbGrid {
    pub fn at(&self, q: usize) -> Option<&[Complex64]> {
        q.checked_sub(self.first_q)
            .and_then(|i| self.symbols.get(i))
            .map(|v| v.as_slice())
    }
}

#[derive(Debug, Clone)]
pub struct FilterBank {
    m: usize,
    filter: PrototypeFilter,
    /// `e^{jπ n / M}` for n in [0, 2M), used for the half-integer-safe modulation.
    half_twiddles: Vec<Complex64>,
}

impl FilterBank {
    pub fn new(config: FbmcConfig) -> Result<Self> {
        let filter = PrototypeFilter::design(config.m, config.k)?;
        Ok(Self::with_filter(config.m, filter))
    }

    pub fn with_filter(m: usize, filter: PrototypeFilter) -> Self {
        let half_twiddles = (0..2 * m).map(|n| twiddle(-(n as i64), 2 * m)).collect();
        Self { m, filter, half_twiddles }
    }

    pub fn subcarriers(&self) -> usize {
        self.m
    }

    pub fn filter(&self) -> &PrototypeFilter {
        &self.filter
    }

    pub fn signal_len(&self, num_symbols: usize) -> usize {
        num_symbols.saturating_sub(1) * self.m / 2 + self.filter.len()
    }

    /// `e^{j2π m (l - (Lg-1)/2)/M}`; `2(l - c)` is an integer for any length.
    fn modulation(&self, m: usize, l: usize) -> Complex64 {
        let two_off = 2 * l as i64 - (self.filter.len() as i64 - 1);
        let idx = (m as i64 * two_off).rem_euclid(2 * self.m as i64) as usize;
        self.half_twiddles[idx]
    }

    /// Sample l of pulse g_{m,n} (zero outside its support).
    pub fn pulse(&self, m: usize, n: usize, l: usize) -> Complex64 {
        let start = n * self.m / 2;
        if l < start || l - start >= self.filter.len() {
            return Complex64::new(0.0, 0.0);
        }
        self.modulation(m, l) * phase(m, n) * self.filter.coeffs()[l - start]
    }

    pub fn synthesize(&self, d: &SymbolGrid) -> Result<TimeSignal> {
        if d.subcarriers() != self.m {
            return Err(Error::Dimension { expected: self.m, got: d.subcarriers() });
        }
        let mut s = vec![Complex64::new(0.0, 0.0); self.signal_len(d.num_symbols())];
        let lg = self.filter.len();
        for n in 0..d.num_symbols() {
            let start = n * self.m / 2;
            for m in 0..self.m {
                let v = d.get(m, n);
                if v == Complex64::new(0.0, 0.0) {
                    continue;
                }
                let a = v * phase(m, n);
                for i in 0..lg {
                    let l = start + i;
                    s[l] += a * self.modulation(m, l) * self.filter.coeffs()[i];
                }
            }
        }
        Ok(TimeSignal(s))
    }

    /// AFB output at symbol instant q: `y_{p,q} = Σ_l y(l) g*_{p,q}(l)`.
    pub fn analyze(&self, y: &TimeSignal, q: usize) -> Result<Vec<Complex64>> {
        let start = q * self.m / 2;
        let lg = self.filter.len();
        if start + lg > y.len() {
            return Err(Error::OutOfRange { q, needed: start + lg, have: y.len() });
        }
        let mut out = vec![Complex64::new(0.0, 0.0); self.m];
        for (p, o) in out.iter_mut().enumerate() {
            let a = phase(p, q).conj();
            let mut acc = Complex64::new(0.0, 0.0);
            for i in 0..lg {
                let l = start + i;
                acc += y.0[l] * self.modulation(p, l).conj() * self.filter.coeffs()[i];
            }
            *o = acc * a;
        }
        Ok(out)
    }

    /// AFB outputs for `count` consecutive instants starting at `first_q`.
    pub fn analyze_grid(&self, y: &TimeSignal, first_q: usize, count: usize) -> Result<AfbGrid> {
        let symbols = (first_q..first_q + count)
            .map(|q| self.analyze(y, q))
            .collect::<Result<Vec<_>>>()?;
        Ok(AfbGrid { first_q, symbols })
    }

    /// Guarded preamble `[0, d, 0]` through a pure k-sample delay, read at q = 1.
    pub fn transmux_response(&self, k: usize, d: &[Complex64]) -> Result<Vec<Complex64>> {
        let frame = SymbolGrid::guarded(self.m, &[d])?;
        let s = self.synthesize(&frame)?;
        let mut y = vec![Complex64::new(0.0, 0.0); s.len() + k];
        y[k..].copy_from_slice(&s.0);
        self.analyze(&TimeSignal(y), 1)
    }
}

/// Linear convolution with the channel taps, output length `len(s) + L_h - 1`.
pub fn convolve(s: &TimeSignal, taps: &[Complex64]) -> TimeSignal {
    if s.is_empty() || taps.is_empty() {
        return TimeSignal::default();
    }
    let mut y = vec![Complex64::new(0.0, 0.0); s.len() + taps.len() - 1];
    for (k, h) in taps.iter().enumerate() {
        for (l, v) in s.0.iter().enumerate() {
            y[l + k] += h * v;
        }
    }
    TimeSignal(y)
}

/// Circularly-symmetric complex Gaussian samples of unit variance.
pub fn complex_gaussian<R: Rng + ?Sized>(rng: &mut R, n: usize) -> Vec<Complex64> {
    let s = std::f64::consts::FRAC_1_SQRT_2;
    (0..n)
        .map(|_| {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re * s, im * s)
        })
        .collect()
}

pub fn apply_channel<R: Rng + ?Sized>(
    s: &TimeSignal,
    h: &ChannelRealization,
    sigma2: f64,
    rng: &mut R,
) -> TimeSignal {
    let mut y = convolve(s, h.taps());
    if sigma2 > 0.0 {
        let sd = sigma2.sqrt();
        let w = complex_gaussian(rng, y.len());
        y.0.iter_mut().zip(w).for_each(|(v, n)| *v += n * sd);
    }
    y
}
