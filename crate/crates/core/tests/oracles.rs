use approx::assert_relative_eq;
use proptest::prelude::*;

use cogsec::calibrate::{calibrate_lambda_on, default_tau_max, optimize_threshold, ConstraintSet};
use cogsec::mc::SampleSet;
use cogsec::oracle::{
    argmax_no_ecsi_grid, argmax_power_grid, no_ecsi_per_state_objective, per_state_lagrangian,
    GridSpec,
};
use cogsec::policy::{
    peak_active, peak_cap, power_full_csi_avg, power_full_csi_avg_peak, power_no_ecsi,
};
use cogsec::rate::{onoff_rate_closed_form, secrecy_rate_on};
use cogsec::{ChannelState, FadingParams, PolicyFamily, SampleStream};

fn fig34() -> FadingParams {
    FadingParams::new(1.0, 2.0, 2.0).unwrap()
}

fn states(n: usize, stream: u64) -> Vec<ChannelState> {
    let params = FadingParams::new(1.0, 1.0, 2.0).unwrap();
    let mut s = SampleStream::new(7, stream);
    (0..n).map(|_| s.sample_state(&params)).collect()
}

#[test]
fn larger_lambda_shrinks_grid_argmax() {
    for s in states(200, 1) {
        let mut prev = f64::INFINITY;
        for &lambda in &[0.01, 0.03, 0.1, 0.3, 1.0] {
            let p = argmax_power_grid(&s, lambda, &GridSpec::covering(0.01, s.h_p), None).unwrap();
            assert!(p <= prev * (1.0 + 1e-9), "{s:?} λ={lambda}: {p} > {prev}");
            prev = p;
        }
    }
}

#[test]
fn peak_branch_matches_peak_active() {
    for s in states(10_000, 2) {
        for &(lambda, q) in &[(0.05, 0.5), (0.2, 1.0), (1.0, 2.0)] {
            let p = power_full_csi_avg_peak(&s, lambda, q).unwrap();
            let boundary = p == peak_cap(q, s.h_p);
            assert_eq!(boundary, peak_active(&s, lambda, q).unwrap(), "{s:?}");
        }
    }
}

#[test]
fn no_ecsi_root_is_grid_argmax() {
    let grid = GridSpec::default_for(0.05);
    let step = 10f64.powf(9.0 / (grid.n_points - 1) as f64) - 1.0;
    let mut zeros = 0;
    for s in states(100, 3) {
        let lambda = 0.05;
        let p = power_no_ecsi(s.h_m, s.h_p, lambda, 2.0).unwrap();
        let g = argmax_no_ecsi_grid(
            s.h_m,
            s.h_p,
            lambda,
            2.0,
            &GridSpec::covering(lambda, s.h_p),
        )
        .unwrap();
        if p == 0.0 {
            zeros += 1;
            assert_eq!(g, 0.0);
        } else {
            assert!((p - g).abs() <= step * p, "{s:?}: root {p} grid {g}");
        }
    }
    assert!(zeros > 0 && zeros < 100);
}

#[test]
fn vanishing_eavesdropper_scale_recovers_full_csi_objective() {
    for s in states(50, 4) {
        for &p in &[0.1, 1.0, 10.0] {
            let a = no_ecsi_per_state_objective(s.h_m, s.h_p, p, 0.1, 1e-9).unwrap();
            let b = per_state_lagrangian(&ChannelState::new(s.h_m, 1e-9, s.h_p), p, 0.1);
            assert!((a - b).abs() <= 1e-4 * b.abs().max(1.0), "{a} vs {b}");
        }
    }
}

#[test]
fn policy_ordering_at_equal_budget() {
    let samples = SampleSet::generate(&fig34(), 200_000, 11, 8).unwrap();
    let budget = ConstraintSet::average(1.0);
    let rate = |family| {
        let r = calibrate_lambda_on(family, &budget, 1e-3, &samples).unwrap();
        secrecy_rate_on(&r.policy, &samples).unwrap()
    };
    let full = rate(PolicyFamily::FullCsiAvg);
    let blind = rate(PolicyFamily::NoEcsi);
    let onoff = optimize_threshold(&fig34(), 1.0, default_tau_max(&fig34())).unwrap();
    let onoff = secrecy_rate_on(&onoff.policy(), &samples).unwrap();
    assert!(blind.mean > 0.0);
    assert!(full.mean >= blind.mean - 3.0 * full.combined_std_error(&blind));
    assert!(blind.mean >= onoff.mean - 3.0 * blind.combined_std_error(&onoff));
}

#[test]
fn optimized_threshold_agrees_with_simulation() {
    let params = fig34();
    let samples = SampleSet::generate(&params, 1_000_000, 5, 8).unwrap();
    for &q in &[0.1, 1.0, 10.0] {
        let opt = optimize_threshold(&params, q, default_tau_max(&params)).unwrap();
        assert!(opt.tau > 0.0);
        let mc = secrecy_rate_on(&opt.policy(), &samples).unwrap();
        assert!(
            (mc.mean - opt.rate).abs() <= 3.0 * mc.std_error,
            "Q={q}: {mc:?} vs {}",
            opt.rate
        );
        assert_relative_eq!(
            opt.rate,
            onoff_rate_closed_form(&params, q, opt.tau).unwrap()
        );
        // no grid point beats the refined optimum
        for i in 0..=100 {
            let t = default_tau_max(&params) * i as f64 / 100.0;
            assert!(onoff_rate_closed_form(&params, q, t).unwrap() <= opt.rate + 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn closed_form_power_is_grid_argmax(
        h_m in 0.01f64..20.0,
        h_e in 0.01f64..20.0,
        h_p in 0.05f64..10.0,
        log_lambda in -2.0f64..0.5,
    ) {
        let lambda = 10f64.powf(log_lambda);
        let s = ChannelState::new(h_m, h_e, h_p);
        let p = power_full_csi_avg(&s, lambda).unwrap();
        let g = argmax_power_grid(&s, lambda, &GridSpec::covering(lambda, h_p), None).unwrap();
        prop_assert!((p == 0.0 && g == 0.0) || (p - g).abs() <= 1e-4 * p.max(g), "{} vs {}", p, g);
    }
}
