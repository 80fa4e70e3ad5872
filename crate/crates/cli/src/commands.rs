//! Subcommand implementations.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::sync::Arc;

use fbmc_chanest::dft::{self, CMatrix};
use fbmc_chanest::filterbank::{complex_gaussian, convolve, FbmcConfig, FilterBank, SymbolGrid, TimeSignal};
use fbmc_chanest::montecarlo::{run_sweep, trial_rng, ChannelProfile, Method, SweepConfig, VERSION};
use fbmc_chanest::preamble::{
    self, design_full_optimal, design_iamc, design_sparse_optimal, predicted_iamc_mse, predicted_sparse_mse,
    PreambleSpec,
};
use fbmc_chanest::sysmodel::{
    build_b, build_two_symbol, check_two_symbol_orthogonality, circulant_deviation, decompose_cbar,
    interference_constants, whiten, write_matrix_csv, SystemMatrices, SystemModel,
};
use num_complex::Complex64;
use statrs::distribution::{ContinuousCDF, Normal};

use crate::{CliError, DesignArgs, DesignKind, Smoothing, SweepArgs, VerifyArgs};

type Res<T> = Result<T, CliError>;

fn create(dir: &Path, name: &str) -> Res<(BufWriter<File>, PathBuf)> {
    let io = |path: &Path, source| CliError::Io { path: path.to_path_buf(), source };
    std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let path = dir.join(name);
    let f = File::create(&path).map_err(|e| io(&path, e))?;
    Ok((BufWriter::new(f), path))
}

fn write_all(path: &Path, f: impl FnOnce() -> std::io::Result<()>) -> Res<()> {
    f().map_err(|source| CliError::Io { path: path.to_path_buf(), source })
}

/// `0,10,20` or `start:step:stop` (inclusive).
pub fn parse_grid(s: &str) -> Res<Vec<f64>> {
    let bad = || CliError::Config(format!("invalid SNR grid '{s}'"));
    let num = |t: &str| t.trim().parse::<f64>().map_err(|_| bad());
    let parts: Vec<&str> = s.split(':').collect();
    let grid = match parts.as_slice() {
        [start, step, stop] => {
            let (a, h, b) = (num(start)?, num(step)?, num(stop)?);
            if h <= 0.0 || b < a {
                return Err(bad());
            }
            let n = ((b - a) / h + 1e-9).floor() as usize;
            (0..=n).map(|i| a + i as f64 * h).collect()
        }
        [list] => list.split(',').map(num).collect::<Res<Vec<_>>>()?,
        _ => return Err(bad()),
    };
    if grid.is_empty() || grid.iter().any(|v| !v.is_finite()) {
        return Err(bad());
    }
    Ok(grid)
}

fn fmt_list(v: &[f64]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(",")
}

// ---------------------------------------------------------------- design

pub fn design(a: &DesignArgs) -> Res<bool> {
    let c = &a.common;
    let lh = c.lh.unwrap_or(8);
    let snr = parse_grid(&a.snr)?;
    if !(a.energy > 0.0 && a.energy.is_finite()) {
        return Err(CliError::Config(format!("energy must be positive (got {})", a.energy)));
    }
    let fb = FilterBank::new(FbmcConfig::new(c.m, c.k)?)?;
    let mut report = vec![
        format!("version={VERSION}"),
        format!("command=design"),
        format!("kind={:?}", a.kind).to_lowercase(),
        format!("M={}", c.m),
        format!("K={}", c.k),
        format!("filter_len={}", fb.filter().len()),
        format!("energy={}", a.energy),
        format!("seed={}", c.seed),
    ];
    if a.kind != DesignKind::Iamc {
        report.push(format!("Lh={lh}"));
    }
    let header = report.len();
    let mut table = Vec::new();
    let spec: PreambleSpec = match a.kind {
        DesignKind::Full => {
            let model = SystemModel::new(&fb, lh)?;
            let des = design_full_optimal(&model, a.energy)?;
            report.push(format!("beta={:.10}", model.constants.beta));
            report.push(format!("m_opt={} (one-based {})", des.m_opt, des.m_opt + 1));
            report.push(format!("cost(m_opt)={:.10e}", des.costs[des.m_opt]));
            report.push(format!("lambda={}", fmt_list(&model.lambda)));
            report.push("predicted time-domain MSE = sigma2/E * (1 + cost(m_opt))".into());
            for s in &snr {
                let sigma2 = 10f64.powf(-s / 10.0);
                table.push(format!("{s},{sigma2:.6e},{:.6e}", des.predicted_mse(sigma2)));
            }
            des.spec
        }
        DesignKind::Sparse => {
            let spec = design_sparse_optimal(c.m, lh, a.energy, a.p0, &[])?;
            let alpha: Vec<f64> = (0..lh).map(|k| fb.filter().autocorrelation(k)).collect();
            report.push(format!("pilots={}", spec.pilots.iter().map(|p| p.to_string()).collect::<Vec<_>>().join(",")));
            report.push(format!("alpha={}", fmt_list(&alpha)));
            report.push("predicted time-domain MSE = (1/Lh)(1 + sum_k 1/alpha_k^2) / SNR_sbc, SNR_sbc = (E/Lh)/sigma2".into());
            for s in &snr {
                let sigma2 = 10f64.powf(-s / 10.0);
                let snr_sbc = a.energy / lh as f64 / sigma2;
                table.push(format!("{s},{sigma2:.6e},{:.6e}", predicted_sparse_mse(&alpha, snr_sbc)));
            }
            spec
        }
        DesignKind::Iamc => {
            let beta = interference_constants(&fb)?.beta;
            report.push(format!("beta={beta:.10}"));
            report.push("predicted frequency-domain MSE (flat channel) = M / ((1+2 beta) SNR_sbc), SNR_sbc = E/(M sigma2)".into());
            for s in &snr {
                let sigma2 = 10f64.powf(-s / 10.0);
                let snr_sbc = a.energy / c.m as f64 / sigma2;
                table.push(format!("{s},{sigma2:.6e},{:.6e}", predicted_iamc_mse(c.m, beta, snr_sbc)));
            }
            design_iamc(c.m, beta, a.energy)?
        }
    };
    let kind = spec.kind.name();
    let (mut w, path) = create(&c.out, &format!("preamble_{kind}.csv"))?;
    write_all(&path, || {
        for line in &report[..header] {
            writeln!(w, "# {line}")?;
        }
        preamble::write_csv(&mut w, &spec)?;
        w.flush()
    })?;
    let (mut r, rpath) = create(&c.out, &format!("preamble_{kind}_report.txt"))?;
    let body = format!("{}\nsnr_db,sigma2,predicted_mse\n{}\n", report.join("\n"), table.join("\n"));
    write_all(&rpath, || {
        r.write_all(body.as_bytes())?;
        r.flush()
    })?;
    print!("{body}");
    println!("wrote {} and {}", path.display(), rpath.display());
    Ok(true)
}

// ---------------------------------------------------------------- verify

struct Check {
    name: String,
    residual: f64,
    tol: f64,
}

impl Check {
    fn new(name: &str, residual: f64, tol: f64) -> Self {
        Self { name: name.into(), residual, tol }
    }

    fn pass(&self) -> bool {
        self.residual <= self.tol
    }
}

/// Γ column k rebuilt by sending the guarded preamble through a pure k-sample delay.
fn chain_columns(fb: &FilterBank, symbols: &[&[Complex64]], lh: usize) -> Res<CMatrix> {
    let m = fb.subcarriers();
    let s = fb.synthesize(&SymbolGrid::guarded(m, symbols)?)?;
    let rows = m * symbols.len();
    let mut out = CMatrix::zeros(rows, lh);
    for k in 0..lh {
        let mut taps = vec![Complex64::new(0.0, 0.0); k + 1];
        taps[k] = Complex64::new(1.0, 0.0);
        let y = convolve(&s, &taps);
        for q in 0..symbols.len() {
            for (p, v) in fb.analyze(&y, q + 1)?.into_iter().enumerate() {
                out[(q * m + p, k)] = v;
            }
        }
    }
    Ok(out)
}

/// Largest |z| of the sampled covariance against `target`, and the Šidák bound
/// that keeps the familywise false-alarm rate at that of a single 3-SE test.
fn covariance_z(samples: &[Vec<Complex64>], target: &CMatrix) -> (f64, f64) {
    let n = samples.len() as f64;
    let dim = target.nrows();
    let mut zmax: f64 = 0.0;
    let mut count = 0usize;
    for p in 0..dim {
        for q in p..dim {
            let (mut sr, mut si, mut qr, mut qi) = (0.0, 0.0, 0.0, 0.0);
            for v in samples {
                let x = v[p] * v[q].conj();
                sr += x.re;
                si += x.im;
                qr += x.re * x.re;
                qi += x.im * x.im;
            }
            let (mr, mi) = (sr / n, si / n);
            let se_r = ((qr / n - mr * mr) / n).sqrt();
            let se_i = ((qi / n - mi * mi) / n).sqrt();
            zmax = zmax.max(((mr - target[(p, q)].re) / se_r).abs());
            count += 1;
            if p != q {
                zmax = zmax.max(((mi - target[(p, q)].im) / se_i).abs());
                count += 1;
            }
        }
    }
    let normal = Normal::new(0.0, 1.0).expect("standard normal");
    let single = 2.0 * (1.0 - normal.cdf(3.0));
    let family = 1.0 - (1.0 - single).powf(1.0 / count as f64);
    (zmax, normal.inverse_cdf(1.0 - family / 2.0))
}

fn noise_samples(fb: &FilterBank, seed: u64, trials: usize, instants: usize) -> Res<Vec<Vec<Complex64>>> {
    let len = fb.signal_len(4);
    (0..trials as u64)
        .map(|t| {
            let mut rng = trial_rng(seed, t);
            let y = TimeSignal(complex_gaussian(&mut rng, len));
            let mut v = Vec::with_capacity(instants * fb.subcarriers());
            for q in 1..=instants {
                v.extend(fb.analyze(&y, q)?);
            }
            Ok(v)
        })
        .collect()
}

pub fn verify(a: &VerifyArgs) -> Res<bool> {
    let c = &a.common;
    let m = c.m;
    let lh = c.lh.unwrap_or(16);
    if a.trials < 100 {
        return Err(CliError::Config(format!("covariance check needs at least 100 trials (got {})", a.trials)));
    }
    let fb = FilterBank::new(FbmcConfig::new(m, c.k)?)?;
    let model = Arc::new(SystemModel::new(&fb, lh)?);
    let mut rng = trial_rng(c.seed, u64::MAX);
    let d = complex_gaussian(&mut rng, m);
    let sys = SystemMatrices::new(model.clone(), &d)?;
    let mut checks = Vec::new();

    let chain = chain_columns(&fb, &[&d], lh)?;
    checks.push(Check::new("signal chain vs Γ", dft::max_abs_diff(&chain, &sys.gamma), 1e-9));
    let g0 = dft::max_abs_diff(&model.blocks[0], &model.b);
    checks.push(Check::new("G_0 = B", g0, 0.0));
    let pattern = dft::max_abs_diff(&build_b(m, &model.constants), &model.b);
    checks.push(Check::new("B tridiagonal circulant pattern", pattern, 1e-9));
    let circ = model.cores.iter().map(circulant_deviation).fold(0.0, f64::max);
    checks.push(Check::new("G_k circulant", circ, 1e-9));
    let f = dft::dft_matrix(m);
    let fw = (0..m as i64)
        .map(|k| {
            let lhs = f.adjoint() * dft::modulation_matrix(m, k);
            dft::max_abs_diff(&lhs, &(dft::shift_matrix(m, k) * f.adjoint()))
        })
        .fold(0.0, f64::max);
    checks.push(Check::new("F^H W^k = Z^k F^H", fw, 1e-12));

    let lh_sparse = (1..=lh.min(m / 2)).rev().find(|l| m.is_multiple_of(*l)).unwrap_or(1);
    let sparse_model = if lh_sparse == lh { model.clone() } else { Arc::new(SystemModel::new(&fb, lh_sparse)?) };
    let pilots: Vec<usize> = (0..lh_sparse).map(|i| i * (m / lh_sparse)).collect();
    let name = format!("G_k|P = alpha_k I (Lh={lh_sparse})");
    checks.push(Check::new(&name, sparse_model.sparse_structure_deviation(&pilots), a.sparse_tol));

    let w = whiten(&sys)?;
    let direct = sys.gamma.adjoint()
        * model.b.clone().lu().solve(&sys.gamma).ok_or(fbmc_chanest::Error::IllConditioned(f64::INFINITY))?;
    let scale = direct.iter().map(|v| v.norm()).fold(1.0, f64::max);
    checks.push(Check::new("whitened Gram vs Γ^H B^-1 Γ (relative)", dft::max_abs_diff(&w.gram(), &direct) / scale, 1e-9));

    let instants = if a.two_symbol { 2 } else { 1 };
    let samples = noise_samples(&fb, c.seed, a.trials, instants)?;
    let mut constants = model.constants;
    if a.inject_corner_sign_error {
        constants.corner_sign = -constants.corner_sign;
        println!("note: corner sign of the reference B flipped");
    }
    let b_ref = build_b(m, &constants);
    let single: Vec<Vec<Complex64>> = samples.iter().map(|v| v[..m].to_vec()).collect();
    let (z, bound) = covariance_z(&single, &b_ref);
    checks.push(Check::new("noise covariance = sigma^2 B (max |z|)", z, bound));

    let mut dumps: Vec<(&str, CMatrix)> = vec![("B.csv", model.b.clone()), ("gamma.csv", sys.gamma.clone())];
    if a.two_symbol {
        let d2 = complex_gaussian(&mut rng, m);
        let two = build_two_symbol(&fb, lh, &d, &d2)?;
        let dec = decompose_cbar(&two)?;
        let chain2 = chain_columns(&fb, &[&d, &d2], lh)?;
        checks.push(Check::new("two-symbol signal chain vs Γ̄", dft::max_abs_diff(&chain2, &two.gamma_bar), 1e-9));
        checks.push(Check::new("B̄ reconstruction from E diag(L) E^H", dec.reconstruction_residual, 1e-10));
        let u = dec.unitary();
        let eye = CMatrix::identity(2 * m, 2 * m);
        checks.push(Check::new("E unitary", dft::max_abs_diff(&(u.adjoint() * &u), &eye), 1e-10));
        checks.push(Check::new("Λ⁻ = -Z^{M/2} Λ⁺ Z^{M/2}", dec.minus_plus_residual, 1e-9));
        let rep = check_two_symbol_orthogonality(&two, &dec)?;
        checks.push(Check::new("two-symbol (0,k) formula vs Gram", rep.formula_mismatch, 1e-9));
        let (z2, bound2) = covariance_z(&samples, &two.b_bar);
        checks.push(Check::new("noise covariance = sigma^2 B̄ (max |z|)", z2, bound2));
        dumps.push(("b_bar.csv", two.b_bar.clone()));
    }

    if a.dump {
        for (name, mat) in &dumps {
            let (mut w, path) = create(&c.out, name)?;
            write_all(&path, || {
                writeln!(w, "# version={VERSION}")?;
                writeln!(w, "# M={m} K={} Lh={lh} seed={}", c.k, c.seed)?;
                write_matrix_csv(&mut w, mat)?;
                w.flush()
            })?;
        }
    }

    println!("# version={VERSION} M={m} K={} Lh={lh} seed={} trials={}", c.k, c.seed, a.trials);
    let mut ok = true;
    for ch in &checks {
        ok &= ch.pass();
        println!(
            "{} {}: residual {:.3e} (tol {:.1e})",
            if ch.pass() { "PASS" } else { "FAIL" },
            ch.name,
            ch.residual,
            ch.tol
        );
    }
    Ok(ok)
}

// ---------------------------------------------------------------- sweep

fn gnuplot_script(csv: &str, title: &str, methods: &[Method], meta: &[(String, String)]) -> String {
    let mut s = String::new();
    for (k, v) in meta {
        s.push_str(&format!("# {k}={v}\n"));
    }
    s.push_str("set datafile separator ','\n");
    s.push_str("set xlabel 'SNR (dB)'\nset ylabel 'NMSE (dB)'\nset grid\nset key outside right\n");
    s.push_str(&format!("set title '{title}'\n"));
    let curves: Vec<String> = methods
        .iter()
        .map(|m| {
            format!(
                "'{csv}' every ::1 using 2:(strcol(1) eq '{m}' ? 10*log10($3) : 1/0) with linespoints title '{m}'"
            )
        })
        .collect();
    s.push_str(&format!("plot {}\n", curves.join(", \\\n     ")));
    s
}

pub fn sweep(a: &SweepArgs) -> Res<bool> {
    let c = &a.common;
    let profile = ChannelProfile::by_name(&a.profile)?;
    let mut methods = a
        .methods
        .split(',')
        .filter(|s| !s.trim().is_empty())
        .map(|s| s.trim().parse::<Method>())
        .collect::<Result<Vec<_>, _>>()?;
    let extra: &[Method] = match a.smoothing {
        Smoothing::None => &[],
        Smoothing::Blue => &[Method::IamcBlue],
        Smoothing::Plain => &[Method::IamcPlain],
        Smoothing::Both => &[Method::IamcBlue, Method::IamcPlain],
    };
    for m in extra {
        if !methods.contains(m) {
            methods.push(*m);
        }
    }
    if methods.is_empty() {
        return Err(CliError::Config("no methods selected".into()));
    }
    if a.name.is_empty() || a.name.contains(['/', '\\']) {
        return Err(CliError::Config(format!("invalid output name '{}'", a.name)));
    }
    let cfg = SweepConfig {
        m: c.m,
        k: c.k,
        lh_design: c.lh.unwrap_or(profile.lh),
        profile,
        methods: methods.clone(),
        snr_db: parse_grid(&a.snr)?,
        trials: a.trials,
        seed: c.seed,
    };
    cfg.validate()?;
    let result = run_sweep(&cfg)?;

    let csv_name = format!("{}.csv", a.name);
    let (mut w, csv_path) = create(&c.out, &csv_name)?;
    write_all(&csv_path, || {
        result.write_csv(&mut w)?;
        w.flush()
    })?;
    let (mut w, meta_path) = create(&c.out, &format!("{}.meta", a.name))?;
    write_all(&meta_path, || {
        result.write_metadata(&mut w)?;
        w.flush()
    })?;
    let title = format!("NMSE vs SNR, M={} K={} profile {}", c.m, c.k, cfg.profile.label);
    let script = gnuplot_script(&csv_name, &title, &methods, &result.metadata);
    let (mut w, gp_path) = create(&c.out, &format!("{}.gp", a.name))?;
    write_all(&gp_path, || {
        w.write_all(script.as_bytes())?;
        w.flush()
    })?;

    println!("method,snr_db,nmse_db");
    for r in &result.rows {
        println!("{},{},{:.2}", r.method, r.snr_db, 10.0 * r.nmse_mean.log10());
    }
    println!("wrote {}, {}, {}", csv_path.display(), meta_path.display(), gp_path.display());
    Ok(true)
}
