//! Randomized invariants across the modules.

use crate::config::parse_config_str;
use crate::harvesting::{build_rf_covariance, optimal_steering};
use crate::linalg::{complex_gaussian, herm_eig, svd, unit_sphere_vector, HermitianPsd};
use crate::montecarlo::McResult;
use crate::rates::{
    interference_plus_noise, optimal_q_global, tin_rate_global, waterfill, worst_case_rate,
    NoiseProfile,
};
use crate::saddle::{bs_best_response, kkt_stationarity, solve_saddle};
use crate::scenario::{equivalent_channels, synthesize_channel, PowerSplit, ScenarioConfig};
use crate::sweep::format_sig;
use crate::transfer::{classical_design, structure2_rate, swipt_design, swipt_rate, Structure2Noise};
use proptest::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

fn descending(len: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(0.05f64..1.5, len).prop_map(|mut v| {
        v.sort_by(|a, b| b.total_cmp(a));
        v
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn waterfill_spends_budget_on_one_level(
        inv in prop::collection::vec(0.05f64..20.0, 1..6),
        budget in 0.0f64..50.0,
    ) {
        let (alloc, eta) = waterfill(&inv, budget).unwrap();
        prop_assert!((alloc.total() - budget).abs() <= 1e-9 * budget.max(1.0));
        for (&p, &g) in alloc.powers().iter().zip(&inv) {
            prop_assert!(p >= 0.0);
            if p > 0.0 {
                prop_assert!((p + g - eta).abs() <= 1e-9 * eta.max(1.0));
            } else {
                prop_assert!(g >= eta - 1e-9 * eta.max(1.0));
            }
        }
    }

    #[test]
    fn bs_response_meets_kkt(
        alpha in prop::collection::vec(0.05f64..5.0, 3),
        beta in prop::collection::vec(0.2f64..3.0, 3),
        lb in prop::collection::vec(0.05f64..2.0, 3),
        budget in 0.01f64..40.0,
    ) {
        let br = bs_best_response(&alpha, &beta, &lb, budget).unwrap();
        let q = br.allocation.powers();
        prop_assert!((q.iter().sum::<f64>() - budget).abs() <= 1e-9 * budget.max(1.0));
        let mu = br.multiplier.unwrap();
        for k in 0..3 {
            let g = kkt_stationarity(alpha[k], beta[k], lb[k], q[k], mu);
            if q[k] > 1e-9 * budget {
                prop_assert!(g.abs() <= 1e-7 * mu.max(1.0), "mode {k}: {g}");
            } else {
                prop_assert!(g >= -1e-7 * mu.max(1.0));
            }
        }
    }

    #[test]
    fn saddle_has_no_profitable_deviation(
        sigma in descending(3),
        sigma_b in descending(3),
        psi in 0.1f64..0.95,
        ratio in 0.0f64..15.0,
        seed in any::<u64>(),
    ) {
        let l2: Vec<f64> = sigma.iter().map(|s| psi * s * s).collect();
        let l2b: Vec<f64> = sigma_b.iter().map(|s| psi * s * s).collect();
        let noise = NoiseProfile::new(1.0, 1.0, vec![psi; 3]).unwrap();
        let (p_budget, pb) = (5.0, 5.0 * ratio);
        let sol = solve_saddle(&l2, &l2b, &noise, p_budget, pb).unwrap();
        let mut r = rng(seed);
        use rand::Rng;
        let mut simplex = |total: f64| -> Vec<f64> {
            let e: Vec<f64> = (0..3).map(|_| -(1.0 - r.random::<f64>()).ln()).collect();
            let s: f64 = e.iter().sum();
            e.iter().map(|x| total * x / s).collect()
        };
        for _ in 0..20 {
            let p = simplex(p_budget);
            prop_assert!(worst_case_rate(&l2, &l2b, &p, sol.pb_star.powers(), &noise).unwrap() <= sol.rate + 1e-6);
            let q = simplex(pb);
            prop_assert!(worst_case_rate(&l2, &l2b, sol.p_star.powers(), &q, &noise).unwrap() >= sol.rate - 1e-6);
        }
    }

    #[test]
    fn svd_and_eig_reconstruct(seed in any::<u64>(), rows in 1usize..5, cols in 1usize..5) {
        let a = complex_gaussian(rows, cols, &mut rng(seed));
        let s = svd(&a).unwrap();
        prop_assert!((s.reconstruct() - &a).norm() <= 1e-10 * a.norm().max(1.0));
        prop_assert!(s.sigma.windows(2).all(|w| w[0] >= w[1]));
        let g = &a * a.adjoint();
        let e = herm_eig(&g).unwrap();
        prop_assert!(e.values.windows(2).all(|w| w[0] >= w[1]));
        prop_assert!(e.values.iter().all(|&v| v >= -1e-10 * g.norm()));
    }

    #[test]
    fn steering_is_optimal(seed in any::<u64>(), psi in 0.0f64..1.0, pb in 0.0f64..50.0) {
        let mut r = rng(seed);
        let h = synthesize_channel(&[0.9, 0.8, 0.7], 3, 3, &mut r).unwrap();
        let h_b = synthesize_channel(&[0.8, 0.7, 0.5], 3, 5, &mut r).unwrap();
        let v = complex_gaussian(3, 3, &mut r);
        let q = HermitianPsd::new(&v * v.adjoint()).unwrap();
        let vb = complex_gaussian(5, 2, &mut r).scale((pb / 2.0).sqrt());
        let q_b = HermitianPsd::new(&vb * vb.adjoint()).unwrap();
        let split = PowerSplit::uniform(3, psi).unwrap();
        let cov = build_rf_covariance(&h, &q, &h_b, &q_b, &split, 1.0).unwrap();
        let best = optimal_steering(&cov);
        let parts = [&cov.c, &cov.c_b, &cov.w_tilde].map(|m| m.largest_eigenvalue());
        prop_assert!(best.linear >= parts.iter().cloned().fold(0.0, f64::max) - 1e-10);
        for _ in 0..50 {
            let u = unit_sphere_vector(3, &mut r);
            prop_assert!(best.linear - cov.total.quadratic_form(&u) >= -1e-9);
        }
    }

    #[test]
    fn structure2_never_beats_structure1(seed in any::<u64>(), psi in 0.05f64..0.95, ratio in 0.0f64..15.0) {
        let mut r = rng(seed);
        let cfg = ScenarioConfig::default().with_uniform_psi(psi).with_bs_power(5.0 * ratio);
        let h = synthesize_channel(&cfg.sigma_p2p, 3, 3, &mut r).unwrap();
        let h_b = synthesize_channel(&cfg.sigma_bs, 3, 5, &mut r).unwrap();
        let vb = complex_gaussian(5, 5, &mut r);
        let tr: f64 = (&vb * vb.adjoint()).diagonal().iter().map(|z| z.re).sum();
        let q_b = HermitianPsd::new((&vb * vb.adjoint()).scale(cfg.pb / tr)).unwrap();
        let split = cfg.split().unwrap();
        let noise = NoiseProfile::from_config(&cfg);
        let (hhat, hhat_b) = equivalent_channels(&h, &h_b, &split).unwrap();
        let s = interference_plus_noise(&hhat_b, &q_b, &noise).unwrap();
        let q = optimal_q_global(&hhat, &s, cfg.p).unwrap();
        let r1 = tin_rate_global(&hhat, &hhat_b, &q, &q_b, &noise).unwrap();
        let d = classical_design(&cfg, &h, &h_b, q_b.clone(), &split).unwrap();
        prop_assert!((tin_rate_global(&hhat, &hhat_b, &d.q, &q_b, &noise).unwrap() - r1).abs() < 1e-12);
        let n2 = Structure2Noise { sigma2_w: 1.0, sigma2_n: 1.0 };
        let r2 = structure2_rate(&h, &h_b, &q_b, psi, &n2, cfg.p).unwrap();
        prop_assert!(r2 <= r1 + 1e-12);
    }

    #[test]
    fn swipt_rate_ignores_bs_covariance(seed in any::<u64>(), psi in 0.05f64..1.0, pb in 0.0f64..70.0) {
        let mut r = rng(seed);
        let cfg = ScenarioConfig::default().with_uniform_psi(psi).with_bs_power(pb);
        let h = synthesize_channel(&cfg.sigma_p2p, 3, 3, &mut r).unwrap();
        let h_b = synthesize_channel(&cfg.sigma_bs, 3, 5, &mut r).unwrap();
        let split = cfg.split().unwrap();
        let (hhat, _) = equivalent_channels(&h, &h_b, &split).unwrap();
        let noise = NoiseProfile::from_config(&cfg);
        let mut d = swipt_design(&cfg, &h, &h_b, &split).unwrap();
        prop_assert!((d.q_b.trace() - pb).abs() <= 1e-9 * pb.max(1.0));
        let base = swipt_rate(&d, &hhat, &noise).unwrap();
        let v = complex_gaussian(5, 5, &mut r);
        d.q_b = HermitianPsd::new(&v * v.adjoint()).unwrap();
        prop_assert_eq!(swipt_rate(&d, &hhat, &noise).unwrap(), base);
    }

    #[test]
    fn stderr_is_nonnegative(samples in prop::collection::vec(-1e3f64..1e3, 1..50)) {
        let r = McResult::from_samples(&samples).unwrap();
        prop_assert!(r.stderr >= 0.0);
        prop_assert_eq!(r.trials, samples.len());
        let lo = samples.iter().cloned().fold(f64::INFINITY, f64::min);
        let hi = samples.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        prop_assert!(r.mean >= lo - 1e-9 && r.mean <= hi + 1e-9);
    }

    #[test]
    fn nine_digit_rendering_round_trips(x in -1e12f64..1e12) {
        let s = format_sig(x, 9);
        let back: f64 = s.parse().unwrap();
        prop_assert!((back - x).abs() <= 5e-9 * x.abs(), "{} -> {}", x, s);
    }

    #[test]
    fn out_of_range_psi_is_rejected(psi in prop_oneof![-5.0f64..-1e-9, 1.000001f64..5.0]) {
        let text = format!("psi = {}", psi);
        prop_assert!(parse_config_str(&text).is_err());
    }

    #[test]
    fn valid_grids_parse(grid in prop::collection::vec(0.0f64..30.0, 1..10), psi in 0.0f64..=1.0) {
        let list: Vec<String> = grid.iter().map(|g| format!("{g}")).collect();
        let text = format!("ratio_grid = [{}]\npsi = {}\n", list.join(", "), psi);
        let cfg = parse_config_str(&text).unwrap();
        prop_assert_eq!(cfg.psi, vec![psi]);
        prop_assert!(cfg.ratio_grid.iter().all(|g| grid.contains(g)));
    }
}
