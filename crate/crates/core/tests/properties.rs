use std::sync::Arc;

use fbmc_chanest::dft;
use fbmc_chanest::estimators::{dft_interpolate, nmse, td_estimate, ChannelRealization};
use fbmc_chanest::filterbank::{convolve, FbmcConfig, FilterBank, SymbolGrid};
use fbmc_chanest::preamble::{self, design_full_optimal, design_sparse_optimal, sfb_energy, PreambleKind, PreambleSpec};
use fbmc_chanest::sysmodel::{SystemMatrices, SystemModel};
use num_complex::Complex64;
use proptest::prelude::*;

const M: usize = 16;

fn bank() -> FilterBank {
    FilterBank::new(FbmcConfig::new(M, 3).unwrap()).unwrap()
}

fn cvec(n: usize) -> impl Strategy<Value = Vec<Complex64>> {
    prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0).prop_map(|(re, im)| Complex64::new(re, im)), n)
}

fn spec(d: Vec<Complex64>) -> PreambleSpec {
    PreambleSpec { kind: PreambleKind::Full, d, d2: None, pilots: vec![], energy: 1.0 }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn chain_is_linear(x in cvec(M), y in cvec(M), a in -2.0f64..2.0, b in -2.0f64..2.0) {
        let fb = bank();
        let rx = |d: &[Complex64]| {
            let s = fb.synthesize(&SymbolGrid::guarded(M, &[d]).unwrap()).unwrap();
            fb.analyze(&s, 1).unwrap()
        };
        let mix: Vec<Complex64> = x.iter().zip(&y).map(|(u, v)| u * a + v * b).collect();
        let lhs = rx(&mix);
        let (rx_x, rx_y) = (rx(&x), rx(&y));
        for i in 0..M {
            prop_assert!((lhs[i] - (rx_x[i] * a + rx_y[i] * b)).norm() < 1e-12);
        }
    }

    #[test]
    fn sfb_energy_equals_signal_energy(d in cvec(M), rho in 0.1f64..3.0) {
        let fb = bank();
        let b = SystemModel::new(&fb, 1).unwrap().b;
        let s = fb.synthesize(&SymbolGrid::guarded(M, &[&d]).unwrap()).unwrap();
        let e = sfb_energy(&b, &spec(d.clone()));
        prop_assert!((e - s.energy()).abs() < 1e-10 * (1.0 + e));
        let scaled = sfb_energy(&b, &spec(d).scaled(rho));
        prop_assert!((scaled - rho * rho * e).abs() < 1e-10 * (1.0 + scaled));
    }

    #[test]
    fn dft_interpolation_is_a_projection(cfr in cvec(M), lh in 1usize..=M) {
        let once = dft_interpolate(&cfr, lh);
        let twice = dft_interpolate(&once, lh);
        for i in 0..M {
            prop_assert!((once[i] - twice[i]).norm() < 1e-12);
        }
    }

    #[test]
    fn noiseless_td_recovers_taps(taps in cvec(6), d in cvec(M)) {
        prop_assume!(taps.iter().any(|t| t.norm() > 1e-3));
        let fb = bank();
        let model = Arc::new(SystemModel::new(&fb, taps.len()).unwrap());
        let sys = SystemMatrices::new(model, &d).unwrap();
        let s = fb.synthesize(&SymbolGrid::guarded(M, &[&d]).unwrap()).unwrap();
        let y = fb.analyze(&convolve(&s, &taps), 1).unwrap();
        let est = td_estimate(&sys, &y).unwrap();
        prop_assert!(nmse(&taps, &est) < 1e-16);
    }

    #[test]
    fn full_design_prediction_scales_inverse_with_energy(e in 0.1f64..100.0, lh in 1usize..=8) {
        let model = SystemModel::new(&bank(), lh).unwrap();
        let a = design_full_optimal(&model, 1.0).unwrap();
        let b = design_full_optimal(&model, e).unwrap();
        prop_assert_eq!(a.m_opt, b.m_opt);
        prop_assert!((a.predicted_mse(1.0) / b.predicted_mse(1.0) - e).abs() < 1e-9 * e);
        prop_assert!((sfb_energy(&model.b, &b.spec) - e).abs() < 1e-9 * e);
    }

    #[test]
    fn preamble_csv_roundtrip(d in cvec(M)) {
        let mut buf = Vec::new();
        preamble::write_csv(&mut buf, &spec(d.clone())).unwrap();
        prop_assert_eq!(preamble::read_csv(buf.as_slice()).unwrap(), d);
    }

    #[test]
    fn channel_cfr_is_unitary_dft_scaled(taps in cvec(5)) {
        let h = ChannelRealization::new(taps.clone(), M).unwrap();
        let cfr = h.cfr();
        let e_time: f64 = taps.iter().map(|t| t.norm_sqr()).sum();
        let e_freq: f64 = cfr.iter().map(|t| t.norm_sqr()).sum();
        prop_assert!((e_freq - M as f64 * e_time).abs() < 1e-10 * (1.0 + e_freq));
    }

    #[test]
    fn sparse_pilots_are_equispaced(p in 0usize..4, lh in prop::sample::select(vec![1usize, 2, 4])) {
        let step = M / lh;
        prop_assume!(p < step);
        let s = design_sparse_optimal(M, lh, 2.0, p, &[]).unwrap();
        prop_assert_eq!(s.pilots.len(), lh);
        for (i, &q) in s.pilots.iter().enumerate() {
            prop_assert_eq!(q, p + i * step);
        }
        let e: f64 = s.d.iter().map(|v| v.norm_sqr()).sum();
        prop_assert!((e - 2.0).abs() < 1e-12);
    }

    #[test]
    fn shift_powers_compose(a in 0i64..40, b in 0i64..40) {
        let lhs = dft::shift_matrix(M, a) * dft::shift_matrix(M, b);
        prop_assert!(dft::max_abs_diff(&lhs, &dft::shift_matrix(M, a + b)) < 1e-15);
        let wt = dft::modulation_matrix(M, a) * dft::modulation_matrix(M, b);
        prop_assert!(dft::max_abs_diff(&wt, &dft::modulation_matrix(M, a + b)) < 1e-12);
    }
}
