//! Ergodic secrecy rates.

use crate::error::{domain, Result};
use crate::fading::{ChannelState, FadingParams};
use crate::mc::{check_min_samples, RateEstimate, SampleSet, DEFAULT_PARTITIONS};
use crate::policy::{onoff_power_level, PolicySpec};
use crate::specfun::e1_scaled;

/// `[ln(1 + h_M P) − ln(1 + h_E P)]⁺` in nats.
pub fn instantaneous_secrecy_rate(state: &ChannelState, power: f64) -> f64 {
    if !(power > 0.0) || state.h_e >= state.h_m {
        return 0.0;
    }
    ((state.h_m * power).ln_1p() - (state.h_e * power).ln_1p()).max(0.0)
}

/// Monte Carlo ergodic secrecy rate of `policy` over the given states.
pub fn secrecy_rate_on(policy: &PolicySpec, samples: &SampleSet) -> Result<RateEstimate> {
    policy.validate()?;
    samples.estimate(|s| Ok(instantaneous_secrecy_rate(s, policy.power(s)?)))
}

/// Monte Carlo ergodic secrecy rate with `n_samples` fresh draws.
pub fn ergodic_secrecy_rate_mc(
    policy: &PolicySpec,
    params: &FadingParams,
    n_samples: usize,
    seed: u64,
) -> Result<RateEstimate> {
    check_min_samples(n_samples)?;
    let samples = SampleSet::generate(params, n_samples, seed, DEFAULT_PARTITIONS)?;
    secrecy_rate_on(policy, &samples)
}

/// The four pieces of the on/off closed-form rate.
///
/// With `P` the on/off level, `c_M = 1/(γ̄_M P)`, `c_E = 1/(γ̄_E P)` and
/// `k = 1/γ̄_M + 1/γ̄_E`:
///
/// - `log_term   = e^(−τ/γ̄_M)·ln(1 + τP)`
/// - `main_term  = e^(c_M)·E₁(τ/γ̄_M + c_M)`
/// - `eave_term  = e^(c_E − τ/γ̄_M)·[E₁(τ/γ̄_E + c_E) − E₁(c_E)]`
/// - `cross_term = −e^(k/P)·E₁(k(τ + 1/P))`
///
/// Exponential factors are folded into `eˣE₁(x)` so nothing overflows for
/// small `P`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OnOffRateTerms {
    pub log_term: f64,
    pub main_term: f64,
    pub eave_term: f64,
    pub cross_term: f64,
}

impl OnOffRateTerms {
    pub fn total(&self) -> f64 {
        self.log_term + self.main_term + self.eave_term + self.cross_term
    }
}

pub fn onoff_rate_terms(params: &FadingParams, q_avg: f64, tau: f64) -> Result<OnOffRateTerms> {
    params.validate()?;
    let FadingParams {
        gamma_m,
        gamma_e,
        gamma_p,
    } = *params;
    let p = onoff_power_level(q_avg, gamma_p, gamma_m, tau)?;
    if !p.is_finite() {
        return Err(domain(format!("on/off level overflows at tau = {tau}")));
    }
    let c_m = 1.0 / (gamma_m * p);
    let c_e = 1.0 / (gamma_e * p);
    let k = 1.0 / gamma_m + 1.0 / gamma_e;
    let off = (-tau / gamma_m).exp();

    let log_term = off * (tau * p).ln_1p();
    // e^(c_M)E₁(τ/γ̄_M + c_M) = e^(−τ/γ̄_M)·S(τ/γ̄_M + c_M), S(x) = eˣE₁(x)
    let main_term = off * e1_scaled(tau / gamma_m + c_m)?;
    let eave_term =
        off * ((-tau / gamma_e).exp() * e1_scaled(tau / gamma_e + c_e)? - e1_scaled(c_e)?);
    let cross_term = -(-k * tau).exp() * e1_scaled(k * (tau + 1.0 / p))?;
    Ok(OnOffRateTerms {
        log_term,
        main_term,
        eave_term,
        cross_term,
    })
}

/// Closed-form ergodic secrecy rate of on/off power control with threshold
/// `tau` and the level that meets `Q_avg` with equality.
pub fn onoff_rate_closed_form(params: &FadingParams, q_avg: f64, tau: f64) -> Result<f64> {
    // rounding can leave a tiny negative value when the rate is ~0
    Ok(onoff_rate_terms(params, q_avg, tau)?.total().max(0.0))
}

/// Converts nats to bits, for presentation only.
pub fn nats_to_bits(nats: f64) -> f64 {
    nats / std::f64::consts::LN_2
}
