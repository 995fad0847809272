use mimo_aging::cli::{config_entries, format_sig, parse_config, preset, Overrides};
use mimo_aging::det_equiv::{de_sinr, de_terms_from_kernel, DeKernel};
use mimo_aging::downlink::{rate_from_sinr, SinrEntry};
use mimo_aging::estimation::{aging_operator, mse_of_operator};
use mimo_aging::numerics::{bessel_j0, CMatrix};
use mimo_aging::scenario::{CorrelationSet, SystemConfig};
use num_complex::Complex64;
use proptest::prelude::*;

fn scalar_cfg(m: usize, k: usize, p: f64, sigma: f64, doppler: f64, deg: f64) -> SystemConfig {
    SystemConfig {
        antennas: m,
        users: k,
        tau: k,
        p_u: p,
        p_d: p,
        sigma_b2: sigma,
        sigma_k2: sigma,
        doppler_hz: doppler,
        sigma_phi_deg: vec![deg],
        sigma_varphi_deg: vec![deg],
        ..SystemConfig::default()
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn normalization_times_mean_delta_is_one(
        m in 4usize..64,
        k in 1usize..6,
        p in 0.01f64..10.0,
        sigma in 1e-4f64..1.0,
        betas in prop::collection::vec(1e-3f64..10.0, 6),
        n in 1usize..400,
    ) {
        let cfg = scalar_cfg(m, k, p, sigma, 100.0, 1.0);
        let corr = CorrelationSet::scalar(&betas[..k], m);
        let terms = de_terms_from_kernel(&cfg, &DeKernel::from_config(&cfg, &corr).unwrap(), n).unwrap();
        let mean = terms.delta.iter().sum::<f64>() / k as f64;
        prop_assert!((terms.lambda_bar * mean - 1.0).abs() < 1e-12);
    }

    #[test]
    fn closed_form_sinr_is_linear_in_antennas(
        m in 4usize..128,
        k in 1usize..6,
        p in 0.01f64..10.0,
        betas in prop::collection::vec(1e-2f64..10.0, 6),
        n in 1usize..200,
    ) {
        let sinr_at = |antennas: usize| {
            let cfg = scalar_cfg(antennas, k, p, 0.1, 200.0, 0.5);
            let corr = CorrelationSet::scalar(&betas[..k], antennas);
            let terms = de_terms_from_kernel(&cfg, &DeKernel::from_config(&cfg, &corr).unwrap(), n).unwrap();
            de_sinr(&terms, &cfg, 0, n).unwrap()
        };
        let ratio = sinr_at(2 * m) / sinr_at(m);
        prop_assert!((ratio - 2.0).abs() < 1e-9);
    }

    #[test]
    fn sinr_entry_is_signal_over_breakdown(
        s in 0.0f64..1e3,
        bf in 1e-6f64..1e2,
        cross in 0.0f64..1e2,
        noise in 0.0f64..1e2,
    ) {
        let e = SinrEntry::new(0, 1, s, bf, cross, noise);
        prop_assert!((e.sinr * (bf + cross + noise) - s).abs() <= 1e-12 * s.max(1.0));
        prop_assert!((e.interference() - (bf + cross + noise)).abs() <= 1e-12 * e.interference());
    }

    #[test]
    fn rate_is_monotone_in_sinr(
        base in prop::collection::vec(0.0f64..100.0, 1..20),
        bump in 1e-6f64..10.0,
        slot in 0usize..20,
    ) {
        let weights = vec![1.0; base.len()];
        let mut higher = base.clone();
        let i = slot % base.len();
        higher[i] += bump;
        prop_assert!(rate_from_sinr(&higher, &weights, 100) > rate_from_sinr(&base, &weights, 100));
    }

    #[test]
    fn bessel_is_even_and_bounded(x in 0.0f64..200.0) {
        let a = bessel_j0(x).unwrap();
        prop_assert!(a.abs() <= 1.0 + 1e-15);
        prop_assert_eq!(a, bessel_j0(-x).unwrap());
    }

    #[test]
    fn aging_operator_minimizes_mse(
        m in 1usize..8,
        diag in prop::collection::vec(0.05f64..5.0, 8),
        deg in 0.0f64..3.0,
        doppler in 0.0f64..2e4,
        lag in 1usize..500,
        which in 0usize..8,
        step in prop::sample::select(vec![-0.05, -0.01, 0.01, 0.05]),
    ) {
        let cfg = scalar_cfg(m, 1, 1.0, 1e-4, doppler, deg);
        let r = CMatrix::from_fn(m, m, |i, j| if i == j { Complex64::new(diag[i], 0.0) } else { Complex64::new(0.0, 0.0) });
        let best = aging_operator(&cfg, 0, lag).entries();
        let mut other = best.clone();
        other[which % m] += step;
        prop_assert!(mse_of_operator(&other, &cfg, &r, 0, lag) > mse_of_operator(&best, &cfg, &r, 0, lag));
    }

    #[test]
    fn formatted_numbers_round_trip(x in prop::num::f64::NORMAL) {
        let back: f64 = format_sig(x).parse().unwrap();
        prop_assert!((back - x).abs() <= 1e-11 * x.abs());
    }

    #[test]
    fn config_echo_round_trips(
        name in prop::sample::select(vec!["fig1", "fig2", "fig3", "scaling"]),
        trials in 2usize..1000,
        seed in any::<u64>(),
    ) {
        let overrides = Overrides { trials: Some(trials), seed: Some(seed), ..Overrides::default() };
        let spec = parse_config(&format!("preset = {name}\n"), &overrides).unwrap();
        let text: String = std::iter::once(format!("preset = {name}\n"))
            .chain(config_entries(&spec).into_iter().map(|(k, v)| format!("{k} = {v}\n")))
            .collect();
        let again = parse_config(&text, &Overrides::default()).unwrap();
        prop_assert_eq!(&again, &spec);
        prop_assert_eq!(again.kind, preset(name, false).unwrap().kind);
    }
}
