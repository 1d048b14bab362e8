//! Lagrange multiplier calibration and on/off threshold search.
//!
//! Calibration draws one [`SampleSet`] and reuses it for every trial
//! multiplier. With the draws fixed, `λ ↦ E[P·h_P]` is a deterministic,
//! continuous, nonincreasing function, so a bracketing search on `ln λ`
//! always terminates.

use std::fmt;

use crate::error::{domain, Error, Result};
use crate::fading::FadingParams;
use crate::mc::{check_min_samples, RateEstimate, SampleSet, DEFAULT_PARTITIONS};
use crate::numeric::golden_max;
use crate::policy::{PolicyFamily, PolicySpec};
use crate::rate::onoff_rate_closed_form;

pub const DEFAULT_TOL: f64 = 1e-3;
pub const DEFAULT_SAMPLES: usize = 1_000_000;
pub const LAMBDA_START: f64 = 1.0;
/// Floor reported when even vanishing `λ` cannot reach `Q_avg`.
pub const LAMBDA_MIN: f64 = 1e-12;
pub const LAMBDA_MAX: f64 = 1e12;
const EXPANSION: f64 = 10.0;
const MAX_ITER: usize = 200;

/// Received-power limits at the primary receiver.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConstraintSet {
    pub q_avg: f64,
    /// `None` (or `+∞`) when there is no peak limit.
    pub q_peak: Option<f64>,
}

impl ConstraintSet {
    pub fn average(q_avg: f64) -> Self {
        Self {
            q_avg,
            q_peak: None,
        }
    }

    pub fn with_peak(q_avg: f64, q_peak: f64) -> Self {
        Self {
            q_avg,
            q_peak: Some(q_peak),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.q_avg.is_finite() && self.q_avg > 0.0) {
            return Err(domain(format!(
                "Q_avg must be positive, got {}",
                self.q_avg
            )));
        }
        if let Some(q) = self.q_peak {
            if !(q > 0.0) {
                return Err(domain(format!("Q_peak must be positive, got {q}")));
            }
        }
        Ok(())
    }

    pub fn peak_or_inf(&self) -> f64 {
        self.q_peak.unwrap_or(f64::INFINITY)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CalibrationFlag {
    /// `|E[P·h_P] − Q_avg| ≤ tol·Q_avg`.
    Converged,
    /// The peak limit caps the average below `Q_avg` even as `λ → 0`;
    /// the report carries `λ = LAMBDA_MIN`.
    Unattainable,
}

impl CalibrationFlag {
    pub fn as_str(&self) -> &'static str {
        match self {
            CalibrationFlag::Converged => "",
            CalibrationFlag::Unattainable => "unattainable",
        }
    }
}

impl fmt::Display for CalibrationFlag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CalibrationFlag::Converged => f.write_str("converged"),
            CalibrationFlag::Unattainable => f.write_str("unattainable"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationReport {
    pub family: PolicyFamily,
    pub lambda_star: f64,
    /// In-sample `E[P·h_P]` at `lambda_star`.
    pub achieved_avg_power: f64,
    pub std_error: f64,
    /// Number of multiplier evaluations.
    pub iterations: usize,
    /// `achieved_avg_power / Q_avg − 1`.
    pub residual: f64,
    pub flag: CalibrationFlag,
    pub policy: PolicySpec,
}

/// Builds the policy of `family` with multiplier `lambda`.
pub fn policy_with_lambda(
    family: PolicyFamily,
    lambda: f64,
    params: &FadingParams,
    constraints: &ConstraintSet,
) -> Result<PolicySpec> {
    let spec = match family {
        PolicyFamily::FullCsiAvg => {
            if constraints.q_peak.is_some_and(f64::is_finite) {
                return Err(Error::Config(
                    "full_csi_avg ignores peak limits; use full_csi_avg_peak".into(),
                ));
            }
            PolicySpec::FullCsiAvg { lambda }
        }
        PolicyFamily::FullCsiAvgPeak => PolicySpec::FullCsiAvgPeak {
            lambda,
            q_peak: constraints.peak_or_inf(),
        },
        PolicyFamily::NoEcsi => PolicySpec::NoEcsi {
            lambda,
            gamma_e: params.gamma_e,
        },
        PolicyFamily::OnOff => {
            return Err(Error::Config(
                "on/off power control has no multiplier; use optimize_threshold".into(),
            ))
        }
    };
    spec.validate()?;
    Ok(spec)
}

/// `E[P·h_P]` of `policy` over a fixed sample set.
pub fn received_power_on(policy: &PolicySpec, samples: &SampleSet) -> Result<RateEstimate> {
    policy.validate()?;
    samples.estimate(|s| Ok(policy.power(s)? * s.h_p))
}

/// Monte Carlo estimate of the average received power `E[P·h_P]`.
pub fn avg_received_power(
    policy: &PolicySpec,
    params: &FadingParams,
    n_samples: usize,
    seed: u64,
) -> Result<RateEstimate> {
    check_min_samples(n_samples)?;
    let samples = SampleSet::generate(params, n_samples, seed, DEFAULT_PARTITIONS)?;
    received_power_on(policy, &samples)
}

/// Calibrates `λ` so that `E[P·h_P] = Q_avg` within relative `tol`, using
/// `n_samples` draws from `seed` held fixed across all trial multipliers.
pub fn calibrate_lambda(
    family: PolicyFamily,
    params: &FadingParams,
    constraints: &ConstraintSet,
    tol: f64,
    n_samples: usize,
    seed: u64,
) -> Result<CalibrationReport> {
    check_min_samples(n_samples)?;
    let samples = SampleSet::generate(params, n_samples, seed, DEFAULT_PARTITIONS)?;
    calibrate_lambda_on(family, constraints, tol, &samples)
}

/// [`calibrate_lambda`] over an existing sample set.
///
/// The bracket is grown geometrically from `λ = 1`, then narrowed by
/// Illinois false position on `ln λ` with a bisection step whenever an
/// interpolated step fails to shrink the bracket by half.
pub fn calibrate_lambda_on(
    family: PolicyFamily,
    constraints: &ConstraintSet,
    tol: f64,
    samples: &SampleSet,
) -> Result<CalibrationReport> {
    constraints.validate()?;
    if !(tol > 0.0 && tol < 1.0) {
        return Err(domain(format!("tolerance must lie in (0, 1), got {tol}")));
    }
    let params = *samples.params();
    let q = constraints.q_avg;
    let mut evals = 0usize;
    let mut eval = |lambda: f64| -> Result<(PolicySpec, RateEstimate)> {
        evals += 1;
        let policy = policy_with_lambda(family, lambda, &params, constraints)?;
        let est = received_power_on(&policy, samples)?;
        Ok((policy, est))
    };
    let report =
        |policy: PolicySpec, lambda: f64, est: RateEstimate, iterations, flag| CalibrationReport {
            family,
            lambda_star: lambda,
            achieved_avg_power: est.mean,
            std_error: est.std_error,
            iterations,
            residual: est.mean / q - 1.0,
            flag,
            policy,
        };

    let (policy, est) = eval(LAMBDA_START)?;
    let h0 = est.mean / q - 1.0;
    if h0.abs() <= tol {
        return Ok(report(
            policy,
            LAMBDA_START,
            est,
            evals,
            CalibrationFlag::Converged,
        ));
    }

    // (ln λ, g/q − 1) at each end; h is positive at `lo`, negative at `hi`.
    let (mut x_lo, mut h_lo, mut x_hi, mut h_hi);
    if h0 > 0.0 {
        x_lo = LAMBDA_START.ln();
        h_lo = h0;
        let mut lambda = LAMBDA_START;
        loop {
            lambda *= EXPANSION;
            if lambda > LAMBDA_MAX {
                return Err(Error::BracketNotFound(format!(
                    "E[P·h_P] still above Q_avg = {q} at lambda = {LAMBDA_MAX:e}"
                )));
            }
            let (policy, est) = eval(lambda)?;
            let h = est.mean / q - 1.0;
            if h.abs() <= tol {
                return Ok(report(
                    policy,
                    lambda,
                    est,
                    evals,
                    CalibrationFlag::Converged,
                ));
            }
            if h < 0.0 {
                x_hi = lambda.ln();
                h_hi = h;
                break;
            }
            x_lo = lambda.ln();
            h_lo = h;
        }
    } else {
        x_hi = LAMBDA_START.ln();
        h_hi = h0;
        let mut lambda = LAMBDA_START;
        loop {
            lambda = (lambda / EXPANSION).max(LAMBDA_MIN);
            let (policy, est) = eval(lambda)?;
            let h = est.mean / q - 1.0;
            if h.abs() <= tol {
                return Ok(report(
                    policy,
                    lambda,
                    est,
                    evals,
                    CalibrationFlag::Converged,
                ));
            }
            if h > 0.0 {
                x_lo = lambda.ln();
                h_lo = h;
                break;
            }
            if lambda <= LAMBDA_MIN {
                return Ok(report(
                    policy,
                    lambda,
                    est,
                    evals,
                    CalibrationFlag::Unattainable,
                ));
            }
            x_hi = lambda.ln();
            h_hi = h;
        }
    }

    // Illinois bookkeeping: which end was retained last time.
    let mut side = 0i8;
    let mut width = x_hi - x_lo;
    let mut best: Option<(PolicySpec, f64, RateEstimate)> = None;
    for _ in 0..MAX_ITER {
        let mut x = x_lo - h_lo * (x_hi - x_lo) / (h_hi - h_lo);
        if !(x > x_lo && x < x_hi) {
            x = 0.5 * (x_lo + x_hi);
        }
        let lambda = x.exp();
        let (policy, est) = eval(lambda)?;
        let h = est.mean / q - 1.0;
        if h.abs() <= tol {
            return Ok(report(
                policy,
                lambda,
                est,
                evals,
                CalibrationFlag::Converged,
            ));
        }
        best = Some((policy, lambda, est));
        if h > 0.0 {
            x_lo = x;
            h_lo = h;
            if side == 1 {
                h_hi *= 0.5;
            }
            side = 1;
        } else {
            x_hi = x;
            h_hi = h;
            if side == -1 {
                h_lo *= 0.5;
            }
            side = -1;
        }
        let new_width = x_hi - x_lo;
        if new_width > 0.5 * width {
            // force a bisection on the next round
            side = 0;
            let mid = 0.5 * (x_lo + x_hi);
            let lambda = mid.exp();
            let (policy, est) = eval(lambda)?;
            let h = est.mean / q - 1.0;
            if h.abs() <= tol {
                return Ok(report(
                    policy,
                    lambda,
                    est,
                    evals,
                    CalibrationFlag::Converged,
                ));
            }
            best = Some((policy, lambda, est));
            if h > 0.0 {
                x_lo = mid;
                h_lo = h;
            } else {
                x_hi = mid;
                h_hi = h;
            }
        }
        width = x_hi - x_lo;
        if width <= 1e-14 * x_lo.abs().max(1.0) {
            break;
        }
    }
    let last = best.map(|(_, l, _)| l).unwrap_or(f64::NAN);
    Err(Error::NoConvergence {
        method: "lambda calibration",
        iterations: evals,
        last,
    })
}

pub const THRESHOLD_GRID_POINTS: usize = 201;
pub const THRESHOLD_TOL: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdOptimum {
    pub tau: f64,
    /// Closed-form on/off rate at `tau`, in nats.
    pub rate: f64,
    /// On/off power level at `tau`.
    pub p_level: f64,
}

impl ThresholdOptimum {
    pub fn policy(&self) -> PolicySpec {
        PolicySpec::OnOff {
            tau: self.tau,
            p_level: self.p_level,
        }
    }
}

/// Default search range for the on/off threshold: `10·γ̄_M`.
pub fn default_tau_max(params: &FadingParams) -> f64 {
    10.0 * params.gamma_m
}

/// Maximizes the closed-form on/off rate over `τ ∈ [0, tau_max]`: a
/// 201-point grid scan followed by golden-section refinement around the best
/// grid cell.
pub fn optimize_threshold(
    params: &FadingParams,
    q_avg: f64,
    tau_max: f64,
) -> Result<ThresholdOptimum> {
    params.validate()?;
    if !(tau_max.is_finite() && tau_max > 0.0) {
        return Err(domain(format!("tau_max must be positive, got {tau_max}")));
    }
    let n = THRESHOLD_GRID_POINTS;
    let step = tau_max / (n - 1) as f64;
    let mut best_i = 0;
    let mut best_rate = f64::NEG_INFINITY;
    for i in 0..n {
        let r = onoff_rate_closed_form(params, q_avg, i as f64 * step)?;
        if r > best_rate {
            best_rate = r;
            best_i = i;
        }
    }
    let lo = best_i.saturating_sub(1) as f64 * step;
    let hi = ((best_i + 1).min(n - 1) as f64 * step).min(tau_max);
    let objective = |t: f64| onoff_rate_closed_form(params, q_avg, t).unwrap_or(f64::NEG_INFINITY);
    let (t_ref, r_ref) = golden_max(objective, lo, hi, THRESHOLD_TOL);
    let (tau, rate) = if r_ref >= best_rate {
        (t_ref, r_ref)
    } else {
        (best_i as f64 * step, best_rate)
    };
    let p_level = crate::policy::onoff_power_level(q_avg, params.gamma_p, params.gamma_m, tau)?;
    Ok(ThresholdOptimum { tau, rate, p_level })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::onoff_power_level;

    fn fig2() -> FadingParams {
        FadingParams::new(1.0, 1.0, 2.0).unwrap()
    }

    fn fig3() -> FadingParams {
        FadingParams::new(1.0, 2.0, 2.0).unwrap()
    }

    #[test]
    fn constraint_validation() {
        assert!(ConstraintSet::average(1.0).validate().is_ok());
        assert!(ConstraintSet::average(0.0).validate().is_err());
        assert!(ConstraintSet::with_peak(1.0, 0.0).validate().is_err());
        assert!(ConstraintSet::with_peak(1.0, f64::INFINITY)
            .validate()
            .is_ok());
    }

    #[test]
    fn huge_lambda_means_no_power() {
        let est = avg_received_power(&PolicySpec::FullCsiAvg { lambda: 1e9 }, &fig2(), 10_000, 1)
            .unwrap();
        assert_eq!(est.mean, 0.0);
    }

    #[test]
    fn doubling_lambda_never_increases_power() {
        let samples = SampleSet::generate(&fig2(), 20_000, 9, 4).unwrap();
        let mut prev = f64::INFINITY;
        for k in 0..20 {
            let lambda = 1e-4 * 2f64.powi(k);
            let est = received_power_on(&PolicySpec::FullCsiAvg { lambda }, &samples).unwrap();
            assert!(est.mean <= prev);
            prev = est.mean;
        }
    }

    #[test]
    fn onoff_meets_budget() {
        let params = fig3();
        let tau = 0.7;
        let q = 1.0;
        let p_level = onoff_power_level(q, params.gamma_p, params.gamma_m, tau).unwrap();
        let est =
            avg_received_power(&PolicySpec::OnOff { tau, p_level }, &params, 200_000, 5).unwrap();
        assert!((est.mean - q).abs() < 3.0 * est.std_error, "{est:?}");
    }

    #[test]
    fn calibration_hits_target_and_is_reproducible() {
        let c = ConstraintSet::average(1.0);
        let a = calibrate_lambda(PolicyFamily::FullCsiAvg, &fig2(), &c, 1e-3, 50_000, 42).unwrap();
        let b = calibrate_lambda(PolicyFamily::FullCsiAvg, &fig2(), &c, 1e-3, 50_000, 42).unwrap();
        assert_eq!(a.flag, CalibrationFlag::Converged);
        assert!(a.residual.abs() <= 1e-3);
        assert_eq!(a.lambda_star.to_bits(), b.lambda_star.to_bits());
        // plug back in
        let samples = SampleSet::generate(&fig2(), 50_000, 42, DEFAULT_PARTITIONS).unwrap();
        let est = received_power_on(&a.policy, &samples).unwrap();
        assert!((est.mean / 1.0 - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn recalibration_is_idempotent() {
        let samples = SampleSet::generate(&fig3(), 30_000, 3, DEFAULT_PARTITIONS).unwrap();
        let c = ConstraintSet::average(0.5);
        let r = calibrate_lambda_on(PolicyFamily::FullCsiAvg, &c, 1e-3, &samples).unwrap();
        let again = received_power_on(&r.policy, &samples).unwrap();
        assert!((again.mean / 0.5 - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn peak_cap_flags_unattainable() {
        // with γ̄_M = γ̄_E the peak-limited average cannot exceed Q_peak/2
        let c = ConstraintSet::with_peak(1.0, 0.5);
        let r =
            calibrate_lambda(PolicyFamily::FullCsiAvgPeak, &fig2(), &c, 1e-3, 20_000, 1).unwrap();
        assert_eq!(r.flag, CalibrationFlag::Unattainable);
        assert_eq!(r.lambda_star, LAMBDA_MIN);
        assert!(r.achieved_avg_power < 0.26 && r.achieved_avg_power > 0.24);
    }

    #[test]
    fn peak_calibration_converges_when_attainable() {
        let c = ConstraintSet::with_peak(0.1, 1.0);
        let r =
            calibrate_lambda(PolicyFamily::FullCsiAvgPeak, &fig2(), &c, 1e-3, 20_000, 1).unwrap();
        assert_eq!(r.flag, CalibrationFlag::Converged);
        assert!(r.achieved_avg_power <= 0.1 * (1.0 + 1e-3));
    }

    #[test]
    fn no_ecsi_calibration() {
        let c = ConstraintSet::average(1.0);
        let samples = SampleSet::generate(&fig3(), 5_000, 2, DEFAULT_PARTITIONS).unwrap();
        let r = calibrate_lambda_on(PolicyFamily::NoEcsi, &c, 1e-3, &samples).unwrap();
        assert_eq!(r.flag, CalibrationFlag::Converged);
        assert!(r.residual.abs() <= 1e-3);
    }

    #[test]
    fn rejects_bad_requests() {
        let c = ConstraintSet::average(1.0);
        assert!(calibrate_lambda(PolicyFamily::OnOff, &fig2(), &c, 1e-3, 10_000, 1).is_err());
        assert!(calibrate_lambda(PolicyFamily::FullCsiAvg, &fig2(), &c, 0.0, 10_000, 1).is_err());
        assert!(calibrate_lambda(PolicyFamily::FullCsiAvg, &fig2(), &c, 1e-3, 9_999, 1).is_err());
        let p = ConstraintSet::with_peak(1.0, 2.0);
        assert!(calibrate_lambda(PolicyFamily::FullCsiAvg, &fig2(), &p, 1e-3, 10_000, 1).is_err());
    }

    #[test]
    fn threshold_search() {
        let params = fig3();
        let opt = optimize_threshold(&params, 10.0, default_tau_max(&params)).unwrap();
        let at_zero = onoff_rate_closed_form(&params, 10.0, 0.0).unwrap();
        assert!(opt.rate >= at_zero);
        assert!(opt.tau > 0.0);
        // finer scan never beats the refined optimum by more than round-off
        for i in 0..=10_000 {
            let t = i as f64 * 1e-3;
            assert!(onoff_rate_closed_form(&params, 10.0, t).unwrap() <= opt.rate + 1e-12);
        }
        assert!(optimize_threshold(&params, 10.0, 0.0).is_err());
    }
}
