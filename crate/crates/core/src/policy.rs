//! Per-state power allocation rules.
//!
//! Every rule maps the current fading gains to a transmit power `P ≥ 0`. The
//! average received-power constraint `E[P·h_P] ≤ Q_avg` enters through the
//! Lagrange multiplier `lambda`, which [`crate::calibrate`] tunes so the
//! constraint holds with equality.

use std::fmt;
use std::str::FromStr;

use crate::error::{domain, Error, Result};
use crate::fading::ChannelState;
use crate::numeric::{brent, integrate, QuadOptions};
use crate::specfun::e1_remainder;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum PolicyFamily {
    /// Global CSI, average received-power constraint only.
    FullCsiAvg,
    /// Global CSI, average and peak received-power constraints.
    FullCsiAvgPeak,
    /// Main and primary CSI only; eavesdropper known statistically.
    NoEcsi,
    /// Constant power whenever `h_M` exceeds a threshold.
    OnOff,
}

impl PolicyFamily {
    pub const ALL: [PolicyFamily; 4] = [
        PolicyFamily::FullCsiAvg,
        PolicyFamily::FullCsiAvgPeak,
        PolicyFamily::NoEcsi,
        PolicyFamily::OnOff,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PolicyFamily::FullCsiAvg => "full_csi_avg",
            PolicyFamily::FullCsiAvgPeak => "full_csi_avg_peak",
            PolicyFamily::NoEcsi => "no_ecsi",
            PolicyFamily::OnOff => "onoff",
        }
    }

    /// Families whose multiplier is found by [`crate::calibrate::calibrate_lambda`].
    pub fn uses_lambda(&self) -> bool {
        !matches!(self, PolicyFamily::OnOff)
    }
}

impl fmt::Display for PolicyFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for PolicyFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        PolicyFamily::ALL
            .into_iter()
            .find(|f| f.as_str() == s)
            .ok_or_else(|| Error::Config(format!("unknown policy family '{s}'")))
    }
}

/// A policy family together with its parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum PolicySpec {
    FullCsiAvg {
        lambda: f64,
    },
    /// `q_peak` may be `+∞`, which reduces to [`PolicySpec::FullCsiAvg`].
    FullCsiAvgPeak {
        lambda: f64,
        q_peak: f64,
    },
    NoEcsi {
        lambda: f64,
        gamma_e: f64,
    },
    OnOff {
        tau: f64,
        p_level: f64,
    },
}

impl PolicySpec {
    pub fn family(&self) -> PolicyFamily {
        match self {
            PolicySpec::FullCsiAvg { .. } => PolicyFamily::FullCsiAvg,
            PolicySpec::FullCsiAvgPeak { .. } => PolicyFamily::FullCsiAvgPeak,
            PolicySpec::NoEcsi { .. } => PolicyFamily::NoEcsi,
            PolicySpec::OnOff { .. } => PolicyFamily::OnOff,
        }
    }

    pub fn lambda(&self) -> Option<f64> {
        match *self {
            PolicySpec::FullCsiAvg { lambda }
            | PolicySpec::FullCsiAvgPeak { lambda, .. }
            | PolicySpec::NoEcsi { lambda, .. } => Some(lambda),
            PolicySpec::OnOff { .. } => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            PolicySpec::FullCsiAvg { lambda } => check_lambda(lambda),
            PolicySpec::FullCsiAvgPeak { lambda, q_peak } => {
                check_lambda(lambda)?;
                check_q_peak(q_peak)
            }
            PolicySpec::NoEcsi { lambda, gamma_e } => {
                check_lambda(lambda)?;
                check_positive("gamma_E", gamma_e)
            }
            PolicySpec::OnOff { tau, p_level } => {
                if !(tau >= 0.0 && tau.is_finite()) {
                    return Err(domain(format!("threshold must be nonnegative, got {tau}")));
                }
                if !(p_level >= 0.0 && p_level.is_finite()) {
                    return Err(domain(format!(
                        "power level must be nonnegative, got {p_level}"
                    )));
                }
                Ok(())
            }
        }
    }

    /// Transmit power in `state`.
    pub fn power(&self, state: &ChannelState) -> Result<f64> {
        match *self {
            PolicySpec::FullCsiAvg { lambda } => power_full_csi_avg(state, lambda),
            PolicySpec::FullCsiAvgPeak { lambda, q_peak } => {
                power_full_csi_avg_peak(state, lambda, q_peak)
            }
            PolicySpec::NoEcsi { lambda, gamma_e } => {
                power_no_ecsi(state.h_m, state.h_p, lambda, gamma_e)
            }
            PolicySpec::OnOff { tau, p_level } => Ok(power_onoff(state.h_m, tau, p_level)),
        }
    }
}

fn check_positive(name: &str, v: f64) -> Result<()> {
    if !(v.is_finite() && v > 0.0) {
        return Err(domain(format!(
            "{name} must be positive and finite, got {v}"
        )));
    }
    Ok(())
}

fn check_lambda(lambda: f64) -> Result<()> {
    check_positive("lambda", lambda)
}

fn check_q_peak(q_peak: f64) -> Result<()> {
    // +inf is an admissible "no peak constraint"
    if !(q_peak > 0.0) {
        return Err(domain(format!("peak limit must be positive, got {q_peak}")));
    }
    Ok(())
}

/// Optimal power under the average received-power constraint with global CSI.
///
/// Transmits only when `(h_M − h_E)/h_P > λ`, at the root of
/// `h_M/(1 + h_M P) − h_E/(1 + h_E P) = λ h_P`. The textbook form
/// `½[√(d² + 4d/(λh_P)) − (1/h_M + 1/h_E)]`, `d = 1/h_E − 1/h_M`, is evaluated
/// after rationalizing the difference, which gives
///
/// `P = 2(s − λ) / (λ h_M (√(u² + 4u·h_E/(λh_P)) + 1 + h_E/h_M))`
///
/// with `s = (h_M − h_E)/h_P` and `u = 1 − h_E/h_M`. The two agree exactly in
/// real arithmetic, but this one neither cancels near the threshold nor
/// overflows when `h_E → 0`.
pub fn power_full_csi_avg(state: &ChannelState, lambda: f64) -> Result<f64> {
    state.check_positive()?;
    check_lambda(lambda)?;
    let ChannelState { h_m, h_e, h_p } = *state;
    let s = (h_m - h_e) / h_p;
    if s <= lambda {
        return Ok(0.0);
    }
    let ratio = h_e / h_m;
    let u = 1.0 - ratio;
    let root = (u * u + 4.0 * u * h_e / (lambda * h_p)).sqrt();
    let p = 2.0 * (s - lambda) / (lambda * h_m * (root + 1.0 + ratio));
    Ok(p.max(0.0))
}

/// Largest `P` with `P·h_P ≤ q_peak` in floating point.
pub fn peak_cap(q_peak: f64, h_p: f64) -> f64 {
    let mut cap = q_peak / h_p;
    while cap.is_finite() && cap * h_p > q_peak {
        cap = cap.next_down();
    }
    cap
}

/// Optimal power under average and peak received-power constraints:
/// `min(Q_peak/h_P, power_full_csi_avg)`. `P·h_P ≤ q_peak` holds exactly.
pub fn power_full_csi_avg_peak(state: &ChannelState, lambda: f64, q_peak: f64) -> Result<f64> {
    check_q_peak(q_peak)?;
    let interior = power_full_csi_avg(state, lambda)?;
    Ok(interior.min(peak_cap(q_peak, state.h_p)))
}

/// Whether the peak limit binds in `state`:
/// `1/(h_E/h_P + 1/Q) − 1/(h_M/h_P + 1/Q) > λQ²`.
///
/// This is the sign of the stationarity condition evaluated at `P = Q/h_P`,
/// so it agrees with the branch chosen by [`power_full_csi_avg_peak`].
pub fn peak_active(state: &ChannelState, lambda: f64, q_peak: f64) -> Result<bool> {
    state.check_positive()?;
    check_lambda(lambda)?;
    check_q_peak(q_peak)?;
    let ChannelState { h_m, h_e, h_p } = *state;
    let inv_q = 1.0 / q_peak;
    let lhs = 1.0 / (h_e / h_p + inv_q) - 1.0 / (h_m / h_p + inv_q);
    Ok(lhs > lambda * q_peak * q_peak)
}

fn check_no_ecsi_args(h_m: f64, h_p: f64, lambda: f64, gamma_e: f64) -> Result<()> {
    check_positive("h_M", h_m)?;
    check_positive("h_P", h_p)?;
    check_lambda(lambda)?;
    check_positive("gamma_E", gamma_e)
}

/// Stationarity residual of the no-eavesdropper-CSI problem under Rayleigh
/// fading, at power `p > 0`.
///
/// With `a = h_M`, `γ = γ̄_E`, `F = 1 − e^(−a/γ)` and `c = 1/(γp)` the
/// condition reads
///
/// `F·a/(1 + ap) − F/p + e^c/(γp²)·[E₁(c) − E₁(a/γ + c)] − λh_P = 0`.
///
/// It is evaluated in the equivalent form
///
/// `a/(1 + ap) − λh_P − T(c)/p + e^(−a/γ)·T(c + a/γ)/(p(1 + ap))`,
///
/// `T(x) = 1 − x·eˣE₁(x)`, which avoids the `1/p` cancellation for small `p`
/// and the overflow of `e^c`. The residual is strictly decreasing in `p`.
pub fn no_ecsi_residual(p: f64, h_m: f64, h_p: f64, lambda: f64, gamma_e: f64) -> Result<f64> {
    check_positive("p", p)?;
    check_no_ecsi_args(h_m, h_p, lambda, gamma_e)?;
    let a = h_m;
    let c = 1.0 / (gamma_e * p);
    let c_shift = c + a / gamma_e;
    let one_ap = 1.0 + a * p;
    let t0 = e1_remainder(c)?;
    let t1 = e1_remainder(c_shift)?;
    Ok(a / one_ap - lambda * h_p - t0 / p + (-a / gamma_e).exp() * t1 / (p * one_ap))
}

/// Limit of [`no_ecsi_residual`] as `p → 0⁺`:
/// `h_M − γ̄_E(1 − e^(−h_M/γ̄_E)) − λh_P`.
pub fn no_ecsi_residual_at_zero(h_m: f64, h_p: f64, lambda: f64, gamma_e: f64) -> Result<f64> {
    check_no_ecsi_args(h_m, h_p, lambda, gamma_e)?;
    Ok(h_m + gamma_e * (-h_m / gamma_e).exp_m1() - lambda * h_p)
}

/// The same stationarity condition evaluated directly by quadrature:
/// `h_M·Pr(h_E ≤ h_M)/(1 + h_M p) − ∫₀^{h_M} h/(1 + hp)·f(h) dh − λh_P`.
pub fn no_ecsi_residual_integral(
    p: f64,
    h_m: f64,
    h_p: f64,
    lambda: f64,
    gamma_e: f64,
) -> Result<f64> {
    check_positive("p", p)?;
    check_no_ecsi_args(h_m, h_p, lambda, gamma_e)?;
    let prob = -(-h_m / gamma_e).exp_m1();
    let integral = integrate(
        |h| h / (1.0 + h * p) * (-h / gamma_e).exp() / gamma_e,
        0.0,
        h_m,
        QuadOptions::with_tolerances(1e-15, 1e-12),
    )?;
    Ok(h_m * prob / (1.0 + h_m * p) - integral.value - lambda * h_p)
}

const NO_ECSI_REL_TOL: f64 = 1e-10;

/// Optimal power without eavesdropper CSI under Rayleigh fading.
///
/// Returns the positive root of [`no_ecsi_residual`], or zero when the
/// residual is already nonpositive at `p → 0⁺` (no positive root). The root
/// is bracketed by `[0, F/(λh_P) − 1/h_M]`: dropping the integral term from
/// the residual bounds it above by `F·h_M/(1 + h_M p) − λh_P`, which vanishes
/// at that upper end.
pub fn power_no_ecsi(h_m: f64, h_p: f64, lambda: f64, gamma_e: f64) -> Result<f64> {
    let r0 = no_ecsi_residual_at_zero(h_m, h_p, lambda, gamma_e)?;
    if r0 <= 0.0 {
        return Ok(0.0);
    }
    let mu = lambda * h_p;
    let prob = -(-h_m / gamma_e).exp_m1();
    let mut hi = prob / mu - 1.0 / h_m;
    let mut r_hi = no_ecsi_residual(hi, h_m, h_p, lambda, gamma_e)?;
    let mut expansions = 0;
    while r_hi > 0.0 {
        // only reachable through rounding right at the bound
        expansions += 1;
        if expansions > 60 {
            return Err(Error::NoConvergence {
                method: "no-ecsi bracket",
                iterations: expansions,
                last: hi,
            });
        }
        hi *= 2.0;
        r_hi = no_ecsi_residual(hi, h_m, h_p, lambda, gamma_e)?;
    }
    let mut failure = None;
    let root = brent(
        |p| {
            if p <= 0.0 {
                return r0;
            }
            match no_ecsi_residual(p, h_m, h_p, lambda, gamma_e) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    f64::NAN
                }
            }
        },
        0.0,
        hi,
        0.0,
        NO_ECSI_REL_TOL,
        200,
    )?;
    if let Some(e) = failure {
        return Err(e);
    }
    Ok(root.x)
}

/// On/off transmit level meeting `E[P·h_P·1{h_M > τ}] = Q_avg` under Rayleigh
/// fading: `(Q_avg/γ̄_P)·e^(τ/γ̄_M)`.
pub fn onoff_power_level(q_avg: f64, gamma_p: f64, gamma_m: f64, tau: f64) -> Result<f64> {
    check_positive("Q_avg", q_avg)?;
    check_positive("gamma_P", gamma_p)?;
    check_positive("gamma_M", gamma_m)?;
    if !(tau >= 0.0 && tau.is_finite()) {
        return Err(domain(format!("threshold must be nonnegative, got {tau}")));
    }
    Ok(q_avg / gamma_p * (tau / gamma_m).exp())
}

/// `p_level` when `h_M > τ` (strictly), zero otherwise.
pub fn power_onoff(h_m: f64, tau: f64, p_level: f64) -> f64 {
    if h_m > tau {
        p_level
    } else {
        0.0
    }
}
