use nalgebra::DMatrix;
use num_complex::Complex64;
use proptest::prelude::*;

use spiked::mp::{
    companion_stieltjes, contour_mu_nu, phi, phi_derivative, phi_inverse, residual, ContourOptions, DiscreteLsd,
    ModelMoments, Side, SpectralFn,
};
use spiked::noise::{bias_term, NoiseModelSpec};
use spiked::roots::{pseudo_lr, smallest_roots_test, RootsStatistic, SmallestRootsConfig};
use spiked::sim::{replicate_rng, replicate_spectrum, ModelKind, PopulationModel, SamplerKind};
use spiked::spectrum::{eigen_spectrum, sample_covariance, split_spectrum};
use spiked::syntax::{parse_bulk, parse_spikes};
use spiked::{DataMatrix, EigenSpectrum, SpikeRankSet};

fn two_atom() -> impl Strategy<Value = DiscreteLsd> {
    (0.2f64..1.0, 1.2f64..5.0, 0.1f64..0.9, 0.5f64..4.0)
        .prop_map(|(a, b, w, s2)| DiscreteLsd::from_pairs(&[(a, w), (b, 1.0 - w)], s2).unwrap())
}

fn spectrum(p: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..50.0, p)
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(1e-300)
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 64, ..ProptestConfig::default() })]

    #[test]
    fn spike_map_round_trip(h in two_atom(), c in 0.05f64..3.0, k in 1.05f64..80.0) {
        let (lo, hi) = h.range();
        let a = hi * k;
        if phi_derivative(a, c, &h) > 0.0 {
            let back = phi_inverse(phi(a, c, &h).unwrap(), c, &h, Side::Large).unwrap();
            prop_assert!(rel(back, a) < 1e-9, "{back} vs {a}");
        }
        let a = lo / k;
        if c < 1.0 && phi_derivative(a, c, &h) > 0.0 {
            let back = phi_inverse(phi(a, c, &h).unwrap(), c, &h, Side::Small).unwrap();
            prop_assert!(rel(back, a) < 1e-9, "{back} vs {a}");
        }
    }

    #[test]
    fn stieltjes_solves_its_equation(h in two_atom(), c in 0.05f64..3.0, re in -5.0f64..60.0, lim in -6.0f64..1.5) {
        let z = Complex64::new(re, 10f64.powf(lim));
        let m = companion_stieltjes(z, c, &h).unwrap();
        prop_assert!(m.im > 0.0);
        prop_assert!(residual(z, m, c, &h) < 1e-10);
    }

    #[test]
    fn pseudo_lr_is_scale_free(ev in spectrum(30), k in -6.0f64..6.0, large in 0usize..4, small in 0usize..4) {
        let ranks = SpikeRankSet::new(large, small);
        let a = pseudo_lr(&EigenSpectrum::from_eigenvalues(ev.clone(), 70).unwrap(), ranks).unwrap();
        let s = 10f64.powf(k);
        let scaled: Vec<f64> = ev.iter().map(|x| x * s).collect();
        let b = pseudo_lr(&EigenSpectrum::from_eigenvalues(scaled, 70).unwrap(), ranks).unwrap();
        prop_assert!(a >= 0.0);
        prop_assert!((a - b).abs() <= 1e-10 * a.max(1e-6));
    }

    #[test]
    fn split_sums_add_to_trace(ev in spectrum(25), large in 0usize..5, small in 0usize..5) {
        let spec = EigenSpectrum::from_eigenvalues(ev, 40).unwrap();
        let s = split_spectrum(&spec, SpikeRankSet::new(large, small), SpectralFn::Identity).unwrap();
        let flagged: f64 = SpikeRankSet::new(large, small).ranks(25).iter().map(|&r| spec.rank(r)).sum();
        prop_assert!(rel(s.nonspiked + flagged, spec.trace()) < 1e-12);
    }

    #[test]
    fn bias_is_linear_in_sigma2(s2 in 0.01f64..100.0, c in 0.05f64..0.95, a in 0.1f64..10.0) {
        let model = NoiseModelSpec::with_spikes(&[(25.0, 1), (16.0, 2), (0.2, 2), (0.1, 1)]).unwrap();
        let x = bias_term(&model, a * s2, c).unwrap();
        let y = bias_term(&model, s2, c).unwrap();
        prop_assert!((x - a * y).abs() <= 1e-12 * x.abs().max(1e-12));
    }

    #[test]
    fn bulk_syntax_round_trips(h in two_atom()) {
        let text: Vec<String> = h.atoms().iter().map(|a| format!("{:?}:{:?}", a.location, a.weight)).collect();
        let back = parse_bulk(&text.join(",")).unwrap();
        for (x, y) in back.atoms().iter().zip(h.atoms()) {
            prop_assert!(rel(x.location, y.location) < 1e-15);
            prop_assert!((x.weight - y.weight).abs() < 1e-12);
        }
    }

    #[test]
    fn spike_syntax_round_trips(pairs in prop::collection::vec((0.01f64..100.0, 1usize..5), 0..6)) {
        let text: Vec<String> = pairs.iter().map(|(a, m)| format!("{a:?}x{m}")).collect();
        let text = if text.is_empty() { "none".to_string() } else { text.join(",") };
        prop_assert_eq!(parse_spikes(&text).unwrap(), pairs);
    }
}

proptest! {
    #![proptest_config(ProptestConfig { cases: 16, ..ProptestConfig::default() })]

    #[test]
    fn spectrum_ignores_row_order(seed in any::<u64>(), rot in 1usize..39) {
        let mut rng = replicate_rng(seed, 1, 0);
        let x = SamplerKind::Gaussian.matrix(40, 12, &mut rng);
        let perm = DMatrix::from_fn(40, 12, |i, j| x[((i + rot) % 40, j)]);
        let a = eigen_spectrum(&sample_covariance(&DataMatrix::new(x).unwrap(), true), 39).unwrap();
        let b = eigen_spectrum(&sample_covariance(&DataMatrix::new(perm).unwrap(), true), 39).unwrap();
        for (u, v) in a.eigenvalues().iter().zip(b.eigenvalues()) {
            prop_assert!((u - v).abs() <= 1e-10 * a.rank(1));
        }
    }

    #[test]
    fn replicates_are_seed_deterministic(seed in any::<u64>(), rep in 0u64..1000) {
        let model = PopulationModel::new(ModelKind::Model2, 20).unwrap();
        let a = replicate_spectrum(&model, SamplerKind::ScaledT4, 40, &mut replicate_rng(seed, 9, rep)).unwrap();
        let b = replicate_spectrum(&model, SamplerKind::ScaledT4, 40, &mut replicate_rng(seed, 9, rep)).unwrap();
        prop_assert_eq!(a.eigenvalues(), b.eigenvalues());
        let c = replicate_spectrum(&model, SamplerKind::ScaledT4, 40, &mut replicate_rng(seed, 9, rep + 1)).unwrap();
        prop_assert_ne!(a.eigenvalues(), c.eigenvalues());
    }

    #[test]
    fn t_l_is_scale_free(ev in spectrum(40), k in -4.0f64..4.0) {
        let mut ev = ev;
        ev[0] = 400.0;
        let spec = EigenSpectrum::from_eigenvalues(ev.clone(), 100).unwrap();
        let cfg = SmallestRootsConfig::from_spikes(&[(30.0, 1)], spec.c_n(), 2.0).unwrap();
        let a = smallest_roots_test(&spec, &cfg, RootsStatistic::TL).unwrap();
        let s = 10f64.powf(k);
        let scaled = EigenSpectrum::from_eigenvalues(ev.iter().map(|x| x * s).collect(), 100).unwrap();
        let cfg_s = SmallestRootsConfig { sigma2: 2.0 * s, ..cfg };
        let b = smallest_roots_test(&scaled, &cfg_s, RootsStatistic::TL).unwrap();
        prop_assert!((a.decision.statistic - b.decision.statistic).abs() <= 1e-9 * a.decision.statistic.abs().max(1.0));
    }

    // tr S has exact mean tr(Sigma) and variance
    // (2 tr Sigma^2 + beta sum_i Sigma_ii^2) / n; with delocalized
    // eigenvectors every Sigma_ii equals the bulk mean
    #[test]
    fn contour_matches_trace_moments(h in two_atom(), c in 0.05f64..3.0, beta in -1.5f64..3.0) {
        let mom = ModelMoments::new(1, beta).unwrap();
        let (mu, nu) = contour_mu_nu(SpectralFn::Identity, c, &h, mom, &ContourOptions::default()).unwrap();
        let want = 2.0 * c * h.second_moment() + beta * c * h.mean().powi(2);
        prop_assert!(mu.abs() < 1e-8 * want.abs().max(1.0), "{mu}");
        prop_assert!(rel(nu, want) < 1e-8, "{nu} vs {want}");
    }

    // log det S = log det Sigma + log det W, so the log terms ignore the bulk
    #[test]
    fn contour_log_terms_ignore_bulk(h in two_atom(), c in 0.05f64..0.99, beta in -1.5f64..3.0) {
        let mom = ModelMoments::new(1, beta).unwrap();
        let (mu, nu) = contour_mu_nu(SpectralFn::Log, c, &h, mom, &ContourOptions::default()).unwrap();
        let l = (1.0 - c).ln();
        let (want_mu, want_nu) = (0.5 * l - 0.5 * beta * c, -2.0 * l + beta * c);
        prop_assert!((mu - want_mu).abs() < 1e-7, "{mu} vs {want_mu}");
        prop_assert!((nu - want_nu).abs() < 1e-7 * want_nu.max(1.0), "{nu} vs {want_nu}");
    }
}
