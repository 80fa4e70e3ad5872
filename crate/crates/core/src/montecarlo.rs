//! Channel generation, power normalization and NMSE sweeps over SNR.
//!
//! SNR is the transmit power of the training signal over σ², with the reference
//! (CP-OFDM) power fixed to 1. A training signal's power is its energy divided by
//! its nominal duration: `M + L_cp` samples for CP-OFDM and `(pilot symbols + 2)·M/2`
//! samples for a guarded FBMC preamble.

use std::fmt;
use std::io::Write;
use std::str::FromStr;
use std::sync::Arc;

use log::warn;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::dft::CMatrix;
use crate::error::{Error, Result};
use crate::estimators::{
    blue_smooth, cpofdm_estimate, cpofdm_estimate_sparse, dft_interpolate, iam_estimate,
    pseudo_pilots, sparse_fast, taps_to_cfr, ChannelRealization, EstimationMode, GaussMarkov,
    SmoothingVariant,
};
use crate::filterbank::{complex_gaussian, convolve, FbmcConfig, FilterBank, SymbolGrid, TimeSignal};
use crate::ofdm;
use crate::preamble::{
    design_cpofdm, design_full_optimal, design_iamc, design_sparse_optimal, sfb_energy,
    CpofdmKind, PreambleSpec,
};
use crate::sysmodel::{SystemMatrices, SystemModel};

pub const VERSION: &str = concat!("fbmc-chanest ", env!("CARGO_PKG_VERSION"));

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PowerDelayProfile {
    Exponential { decay_db_per_tap: f64 },
    Uniform,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ChannelProfile {
    pub lh: usize,
    pub pdp: PowerDelayProfile,
    pub label: String,
}

impl ChannelProfile {
    pub fn new(lh: usize, pdp: PowerDelayProfile, label: &str) -> Result<Self> {
        if lh == 0 {
            return Err(Error::Config("channel profile needs at least one tap".into()));
        }
        Ok(Self { lh, pdp, label: label.to_string() })
    }

    /// Six taps, exponential power-delay profile decaying 3 dB per tap.
    pub fn low_selectivity() -> Self {
        Self {
            lh: 6,
            pdp: PowerDelayProfile::Exponential { decay_db_per_tap: 3.0 },
            label: "low".into(),
        }
    }

    /// Sixteen taps of equal average power.
    pub fn high_selectivity() -> Self {
        Self { lh: 16, pdp: PowerDelayProfile::Uniform, label: "high".into() }
    }

    pub fn by_name(name: &str) -> Result<Self> {
        match name {
            "low" => Ok(Self::low_selectivity()),
            "high" => Ok(Self::high_selectivity()),
            "flat" => Self::new(1, PowerDelayProfile::Uniform, "flat"),
            _ => Err(Error::Config(format!("unknown channel profile '{name}' (low, high, flat)"))),
        }
    }

    /// Average tap powers, normalised to unit sum.
    pub fn tap_powers(&self) -> Vec<f64> {
        let raw: Vec<f64> = match self.pdp {
            PowerDelayProfile::Uniform => vec![1.0; self.lh],
            PowerDelayProfile::Exponential { decay_db_per_tap } => (0..self.lh)
                .map(|k| 10f64.powf(-decay_db_per_tap * k as f64 / 10.0))
                .collect(),
        };
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|p| p / total).collect()
    }
}

/// Independent circular complex Gaussian taps with the profile's powers.
pub fn gen_channel<R: Rng + ?Sized>(profile: &ChannelProfile, m: usize, rng: &mut R) -> Result<ChannelRealization> {
    let w = complex_gaussian(rng, profile.lh);
    let taps = w.into_iter().zip(profile.tap_powers()).map(|(v, p)| v * p.sqrt()).collect();
    ChannelRealization::new(taps, m)
}

/// RNG stream for one trial: the seed picks the key, the trial index the stream.
pub fn trial_rng(seed: u64, trial: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial);
    rng
}

pub fn fbmc_duration(m: usize, pilot_symbols: usize) -> f64 {
    ((pilot_symbols + 2) * m) as f64 / 2.0
}

pub fn ofdm_duration(m: usize, cp: usize) -> f64 {
    (m + cp) as f64
}

/// Scales each FBMC preamble so that its SFB-output power equals `reference_power`.
/// Returns the scaled specs with their amplitude factors.
pub fn power_normalize(
    specs: &[PreambleSpec],
    b: &CMatrix,
    b_bar: Option<&CMatrix>,
    reference_power: f64,
) -> Result<Vec<(PreambleSpec, f64)>> {
    let m = b.nrows();
    specs
        .iter()
        .map(|s| {
            let (energy, symbols) = match (&s.d2, b_bar) {
                (None, _) => (sfb_energy(b, s), 1),
                (Some(_), Some(bb)) => (sfb_energy(bb, s), 2),
                (Some(_), None) => {
                    return Err(Error::Config("two-symbol preamble needs the two-symbol covariance".into()))
                }
            };
            if energy <= 0.0 {
                return Err(Error::ZeroEnergy);
            }
            let rho = (reference_power * fbmc_duration(m, symbols) / energy).sqrt();
            Ok((s.scaled(rho), rho))
        })
        .collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Method {
    /// Time-domain Gauss-Markov with the optimal full preamble.
    Td,
    /// Time-domain estimate with the optimal sparse preamble.
    TdSparse,
    Iamc,
    IamcTd,
    IamcBlue,
    IamcPlain,
    /// Sparse preamble under the flat-subchannel model (divide and IDFT, no α correction).
    IamSparse,
    Cpofdm,
    CpofdmTd,
    CpofdmSparse,
}

impl Method {
    pub const ALL: [Method; 10] = [
        Method::Td,
        Method::TdSparse,
        Method::Iamc,
        Method::IamcTd,
        Method::IamcBlue,
        Method::IamcPlain,
        Method::IamSparse,
        Method::Cpofdm,
        Method::CpofdmTd,
        Method::CpofdmSparse,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Method::Td => "td",
            Method::TdSparse => "td-sparse",
            Method::Iamc => "iamc",
            Method::IamcTd => "iamc-td",
            Method::IamcBlue => "iamc-blue",
            Method::IamcPlain => "iamc-plain",
            Method::IamSparse => "iam-sparse",
            Method::Cpofdm => "cpofdm",
            Method::CpofdmTd => "cpofdm-td",
            Method::CpofdmSparse => "cpofdm-sparse",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Method::ALL
            .iter()
            .find(|m| m.name() == s)
            .copied()
            .ok_or_else(|| Error::Config(format!("unknown method '{s}'")))
    }
}

#[derive(Debug, Clone)]
pub struct SweepConfig {
    pub m: usize,
    pub k: usize,
    /// Channel length assumed by the estimators and preamble designs.
    pub lh_design: usize,
    pub profile: ChannelProfile,
    pub methods: Vec<Method>,
    pub snr_db: Vec<f64>,
    pub trials: usize,
    pub seed: u64,
}

impl SweepConfig {
    pub fn validate(&self) -> Result<FbmcConfig> {
        let cfg = FbmcConfig::new(self.m, self.k)?;
        if self.lh_design == 0 || self.lh_design > self.m {
            return Err(Error::Config(format!("design L_h={} must lie in [1, M]", self.lh_design)));
        }
        if self.profile.lh > self.m {
            return Err(Error::Config(format!("true L_h={} exceeds M", self.profile.lh)));
        }
        let sparse = self.methods.iter().any(|m| {
            matches!(m, Method::TdSparse | Method::IamSparse | Method::CpofdmSparse)
        });
        if sparse && (!self.m.is_multiple_of(self.lh_design) || self.lh_design > self.m / 2) {
            design_sparse_optimal(self.m, self.lh_design, 1.0, 0, &[])?;
        }
        Ok(cfg)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub method: Method,
    pub snr_db: f64,
    pub nmse_mean: f64,
    pub nmse_stderr: f64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
    pub metadata: Vec<(String, String)>,
}

impl SweepResult {
    pub fn get(&self, method: Method, snr_db: f64) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.method == method && r.snr_db == snr_db)
    }

    pub fn write_csv<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (k, v) in &self.metadata {
            writeln!(w, "# {k}={v}")?;
        }
        writeln!(w, "method,snr_db,nmse_mean,nmse_stderr,trials")?;
        for r in &self.rows {
            writeln!(w, "{},{},{:.10e},{:.10e},{}", r.method, r.snr_db, r.nmse_mean, r.nmse_stderr, r.trials)?;
        }
        Ok(())
    }

    pub fn write_metadata<W: Write>(&self, mut w: W) -> std::io::Result<()> {
        for (k, v) in &self.metadata {
            writeln!(w, "{k}={v}")?;
        }
        Ok(())
    }
}

/// Mean and standard error of the mean.
pub fn mean_stderr(values: &[f64]) -> (f64, f64) {
    let n = values.len();
    if n == 0 {
        return (f64::NAN, f64::NAN);
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    if n < 2 {
        return (mean, f64::NAN);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
    (mean, (var / n as f64).sqrt())
}

/// Received AFB vector at q = 1 for a guarded one-symbol preamble: `(signal part, unit-noise part)`.
fn fbmc_parts(fb: &FilterBank, s: &TimeSignal, h: &ChannelRealization, noise_afb: &[Complex64]) -> Result<(Vec<Complex64>, Vec<Complex64>)> {
    let y = convolve(s, h.taps());
    Ok((fb.analyze(&y, 1)?, noise_afb.to_vec()))
}

/// Everything a sweep needs that does not depend on the trial.
struct Prepared {
    fb: FilterBank,
    model: Arc<SystemModel>,
    lh: usize,
    full: Option<(TimeSignal, GaussMarkov)>,
    sparse: Option<(TimeSignal, PreambleSpec)>,
    iamc: Option<(TimeSignal, Vec<Complex64>)>,
    ofdm_full: Option<(TimeSignal, Vec<Complex64>)>,
    ofdm_sparse: Option<(TimeSignal, Vec<Complex64>, Vec<usize>)>,
    cp: usize,
    metadata: Vec<(String, String)>,
}

fn prepare(cfg: &SweepConfig) -> Result<Prepared> {
    let fcfg = cfg.validate()?;
    let fb = FilterBank::new(fcfg)?;
    let model = Arc::new(SystemModel::new(&fb, cfg.lh_design)?);
    let m = cfg.m;
    let lh = cfg.lh_design;
    let cp = cfg.profile.lh.max(lh) - 1;
    let e_fbmc = fbmc_duration(m, 1);
    let uses = |set: &[Method]| cfg.methods.iter().any(|x| set.contains(x));
    let mut metadata = vec![
        ("version".to_string(), VERSION.to_string()),
        ("seed".to_string(), cfg.seed.to_string()),
        ("M".to_string(), m.to_string()),
        ("K".to_string(), cfg.k.to_string()),
        ("filter_len".to_string(), fb.filter().len().to_string()),
        ("Lh_design".to_string(), lh.to_string()),
        ("Lh_true".to_string(), cfg.profile.lh.to_string()),
        ("profile".to_string(), cfg.profile.label.clone()),
        ("trials".to_string(), cfg.trials.to_string()),
        ("beta".to_string(), format!("{:.10}", model.constants.beta)),
        ("cp_len".to_string(), cp.to_string()),
        (
            "snr_definition".to_string(),
            "transmit power / sigma^2; reference CP-OFDM power 1; power = energy / nominal duration (OFDM: M+cp, FBMC: (pilot symbols+2)*M/2)".to_string(),
        ),
        ("fbmc_preamble_energy".to_string(), format!("{e_fbmc}")),
        ("methods".to_string(), cfg.methods.iter().map(|m| m.name()).collect::<Vec<_>>().join(",")),
        ("snr_db".to_string(), cfg.snr_db.iter().map(|s| s.to_string()).collect::<Vec<_>>().join(",")),
    ];
    if cfg.trials < 100 {
        metadata.push(("warning".into(), format!("only {} trials per point", cfg.trials)));
        warn!("sweep uses only {} trials per point", cfg.trials);
    }
    let synth = |d: &[Complex64]| -> Result<TimeSignal> { fb.synthesize(&SymbolGrid::guarded(m, &[d])?) };

    let mut specs = Vec::new();
    let full_design = if uses(&[Method::Td]) {
        let des = design_full_optimal(&model, 1.0)?;
        metadata.push(("m_opt".into(), format!("{} (one-based {})", des.m_opt, des.m_opt + 1)));
        specs.push(("td", des.spec.clone()));
        Some(des)
    } else {
        None
    };
    let sparse_spec = if uses(&[Method::TdSparse, Method::IamSparse]) {
        let s = design_sparse_optimal(m, lh, 1.0, 0, &[])?;
        specs.push(("sparse", s.clone()));
        Some(s)
    } else {
        None
    };
    let iamc_spec = if uses(&[Method::Iamc, Method::IamcTd, Method::IamcBlue, Method::IamcPlain]) {
        let s = design_iamc(m, model.constants.beta, 1.0)?;
        specs.push(("iamc", s.clone()));
        Some(s)
    } else {
        None
    };
    let plain: Vec<PreambleSpec> = specs.iter().map(|(_, s)| s.clone()).collect();
    let normalized = power_normalize(&plain, &model.b, None, 1.0)?;
    for ((name, _), (_, rho)) in specs.iter().zip(&normalized) {
        metadata.push((format!("scale_{name}"), format!("{rho:.10}")));
    }
    let mut scaled = normalized.into_iter().map(|(s, _)| s);

    let full = match full_design {
        Some(_) => {
            let s = scaled.next().ok_or(Error::ZeroEnergy)?;
            let sys = SystemMatrices::new(model.clone(), &s.d)?;
            Some((synth(&s.d)?, GaussMarkov::new(&sys.gamma, &model.b)?))
        }
        None => None,
    };
    let sparse = match sparse_spec {
        Some(_) => {
            let s = scaled.next().ok_or(Error::ZeroEnergy)?;
            Some((synth(&s.d)?, s))
        }
        None => None,
    };
    let iamc = match iamc_spec {
        Some(_) => {
            let s = scaled.next().ok_or(Error::ZeroEnergy)?;
            let c = pseudo_pilots(&model.b, &s.d);
            Some((synth(&s.d)?, c))
        }
        None => None,
    };
    let ofdm_power = |x: Vec<Complex64>| -> (TimeSignal, Vec<Complex64>) {
        let sig = ofdm::modulate(&x, cp);
        let rho = (ofdm_duration(m, cp) / sig.energy()).sqrt();
        let x: Vec<Complex64> = x.into_iter().map(|v| v * rho).collect();
        (ofdm::modulate(&x, cp), x)
    };
    let ofdm_full = if uses(&[Method::Cpofdm, Method::CpofdmTd]) {
        Some(ofdm_power(design_cpofdm(m, 1.0, CpofdmKind::Full)?))
    } else {
        None
    };
    let ofdm_sparse = if uses(&[Method::CpofdmSparse]) {
        let (sig, x) = ofdm_power(design_cpofdm(m, 1.0, CpofdmKind::Sparse(lh))?);
        let tones = (0..m).filter(|&i| x[i].norm() > 0.0).collect();
        Some((sig, x, tones))
    } else {
        None
    };
    Ok(Prepared { fb, model, lh, full, sparse, iamc, ofdm_full, ofdm_sparse, cp, metadata })
}

fn trial_nmse(cfg: &SweepConfig, p: &Prepared, trial: u64) -> Result<Vec<f64>> {
    let m = cfg.m;
    let mut rng = trial_rng(cfg.seed, trial);
    let h = gen_channel(&cfg.profile, m, &mut rng)?;
    let truth = h.cfr();
    let fbmc_len = p.fb.signal_len(3) + cfg.profile.lh - 1;
    let noise = TimeSignal(complex_gaussian(&mut rng, fbmc_len));
    let noise_afb = p.fb.analyze(&noise, 1)?;
    let ofdm_noise = complex_gaussian(&mut rng, m + p.cp + cfg.profile.lh - 1);
    let ofdm_noise_freq = ofdm::demodulate(&TimeSignal(ofdm_noise), m, p.cp)?;

    let full = p.full.as_ref().map(|(s, _)| fbmc_parts(&p.fb, s, &h, &noise_afb)).transpose()?;
    let sparse = p.sparse.as_ref().map(|(s, _)| fbmc_parts(&p.fb, s, &h, &noise_afb)).transpose()?;
    let iamc = p.iamc.as_ref().map(|(s, _)| fbmc_parts(&p.fb, s, &h, &noise_afb)).transpose()?;
    let ofdm_rx = |sig: &TimeSignal| -> Result<Vec<Complex64>> {
        ofdm::demodulate(&convolve(sig, h.taps()), m, p.cp)
    };
    let ofdm_full = p.ofdm_full.as_ref().map(|(s, _)| ofdm_rx(s)).transpose()?;
    let ofdm_sparse = p.ofdm_sparse.as_ref().map(|(s, _, _)| ofdm_rx(s)).transpose()?;

    let mix = |clean: &[Complex64], noise: &[Complex64], sd: f64| -> Vec<Complex64> {
        clean.iter().zip(noise).map(|(a, b)| a + b * sd).collect()
    };
    let missing = || Error::Config("method was not prepared".into());
    let mut out = Vec::with_capacity(cfg.snr_db.len() * cfg.methods.len());
    for snr in &cfg.snr_db {
        let sd = 10f64.powf(-snr / 10.0).sqrt();
        for method in &cfg.methods {
            let est: Vec<Complex64> = match method {
                Method::Td => {
                    let (clean, n) = full.as_ref().ok_or_else(missing)?;
                    let gm = &p.full.as_ref().ok_or_else(missing)?.1;
                    taps_to_cfr(&gm.estimate(&mix(clean, n, sd)), m)
                }
                Method::TdSparse | Method::IamSparse => {
                    let (clean, n) = sparse.as_ref().ok_or_else(missing)?;
                    let spec = &p.sparse.as_ref().ok_or_else(missing)?.1;
                    let y = mix(clean, n, sd);
                    let y_p: Vec<Complex64> = spec.pilots.iter().map(|&i| y[i]).collect();
                    let d_p: Vec<Complex64> = spec.pilots.iter().map(|&i| spec.d[i]).collect();
                    let ones = vec![1.0; p.lh];
                    let alpha = if *method == Method::TdSparse { &p.model.alpha } else { &ones };
                    taps_to_cfr(&sparse_fast(&spec.pilots, &d_p, alpha, m, &y_p)?, m)
                }
                Method::Iamc | Method::IamcTd | Method::IamcBlue | Method::IamcPlain => {
                    let (clean, n) = iamc.as_ref().ok_or_else(missing)?;
                    let c = &p.iamc.as_ref().ok_or_else(missing)?.1;
                    let raw = iam_estimate(c, &mix(clean, n, sd))?;
                    match method {
                        Method::IamcTd => dft_interpolate(&raw, p.lh),
                        Method::IamcBlue => blue_smooth(&raw, c, p.model.constants.beta, SmoothingVariant::Blue)?,
                        Method::IamcPlain => blue_smooth(&raw, c, p.model.constants.beta, SmoothingVariant::Plain)?,
                        _ => raw,
                    }
                }
                Method::Cpofdm | Method::CpofdmTd => {
                    let clean = ofdm_full.as_ref().ok_or_else(missing)?;
                    let x = &p.ofdm_full.as_ref().ok_or_else(missing)?.1;
                    let mode = if *method == Method::Cpofdm { EstimationMode::Frequency } else { EstimationMode::Time };
                    cpofdm_estimate(x, &mix(clean, &ofdm_noise_freq, sd), p.lh, mode)?
                }
                Method::CpofdmSparse => {
                    let clean = ofdm_sparse.as_ref().ok_or_else(missing)?;
                    let (_, x, tones) = p.ofdm_sparse.as_ref().ok_or_else(missing)?;
                    cpofdm_estimate_sparse(tones, x, &mix(clean, &ofdm_noise_freq, sd))?
                }
            };
            out.push(crate::estimators::nmse(&truth, &est));
        }
    }
    Ok(out)
}

/// Runs every method on every trial and SNR point. Channel and unit-variance noise
/// are drawn once per trial and reused across SNR points and FBMC methods.
pub fn run_sweep(cfg: &SweepConfig) -> Result<SweepResult> {
    let p = prepare(cfg)?;
    let per_trial: Vec<Vec<f64>> = (0..cfg.trials as u64)
        .into_par_iter()
        .map(|t| trial_nmse(cfg, &p, t))
        .collect::<Result<Vec<_>>>()?;
    let mut rows = Vec::new();
    if cfg.trials > 0 {
        let nm = cfg.methods.len();
        for (si, snr) in cfg.snr_db.iter().enumerate() {
            for (mi, method) in cfg.methods.iter().enumerate() {
                let vals: Vec<f64> = per_trial.iter().map(|v| v[si * nm + mi]).collect();
                let (mean, se) = mean_stderr(&vals);
                rows.push(SweepRow { method: *method, snr_db: *snr, nmse_mean: mean, nmse_stderr: se, trials: cfg.trials });
            }
        }
    }
    Ok(SweepResult { rows, metadata: p.metadata })
}
