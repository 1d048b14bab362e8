//! Rayleigh block fading at the power-gain level.
//!
//! Each link's power gain `h = |g|²` is exponentially distributed with the
//! link's mean gain. Gains are constant over a coherence interval and drawn
//! independently across links and intervals.
//!
//! Only the exponential family is provided. The closed forms in [`crate::policy`]
//! and [`crate::rate`] assume it; another fading law would enter here as a
//! sampler plus `pdf`/`cdf` pair.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{domain, Result};

/// Mean power gains of the main, eavesdropper and primary links.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FadingParams {
    pub gamma_m: f64,
    pub gamma_e: f64,
    pub gamma_p: f64,
}

impl FadingParams {
    pub fn new(gamma_m: f64, gamma_e: f64, gamma_p: f64) -> Result<Self> {
        let params = Self {
            gamma_m,
            gamma_e,
            gamma_p,
        };
        params.validate()?;
        Ok(params)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("gamma_M", self.gamma_m),
            ("gamma_E", self.gamma_e),
            ("gamma_P", self.gamma_p),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return Err(domain(format!(
                    "{name} must be positive and finite, got {v}"
                )));
            }
        }
        Ok(())
    }
}

/// One realization of the three power gains.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ChannelState {
    /// Source to legitimate receiver.
    pub h_m: f64,
    /// Source to eavesdropper.
    pub h_e: f64,
    /// Source to primary receiver.
    pub h_p: f64,
}

impl ChannelState {
    pub fn new(h_m: f64, h_e: f64, h_p: f64) -> Self {
        Self { h_m, h_e, h_p }
    }

    /// Rejects anything other than strictly positive finite gains.
    pub(crate) fn check_positive(&self) -> Result<()> {
        if !(self.h_m > 0.0 && self.h_e > 0.0 && self.h_p > 0.0)
            || !(self.h_m.is_finite() && self.h_e.is_finite() && self.h_p.is_finite())
        {
            return Err(domain(format!(
                "channel gains must be positive and finite, got {self:?}"
            )));
        }
        Ok(())
    }
}

/// A deterministic substream of channel draws.
///
/// `(master_seed, stream_index)` fully determines the sequence. Distinct
/// stream indices select independent ChaCha keystreams under the same key,
/// so partitions of a Monte Carlo run can be generated by separate workers.
#[derive(Debug, Clone)]
pub struct SampleStream {
    master_seed: u64,
    stream_index: u64,
    rng: ChaCha8Rng,
}

impl SampleStream {
    pub fn new(master_seed: u64, stream_index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(master_seed);
        rng.set_stream(stream_index);
        Self {
            master_seed,
            stream_index,
            rng,
        }
    }

    pub fn master_seed(&self) -> u64 {
        self.master_seed
    }

    pub fn stream_index(&self) -> u64 {
        self.stream_index
    }

    /// Draws `h ~ Exp(mean = gamma)` by inversion. The uniform lies in
    /// `[0, 1)` so the result is always finite.
    pub fn exponential(&mut self, gamma: f64) -> f64 {
        let u: f64 = self.rng.random();
        -gamma * (-u).ln_1p()
    }

    /// Draws one coherence interval: `h_M`, `h_E`, `h_P` in that order.
    pub fn sample_state(&mut self, params: &FadingParams) -> ChannelState {
        let h_m = self.exponential(params.gamma_m);
        let h_e = self.exponential(params.gamma_e);
        let h_p = self.exponential(params.gamma_p);
        ChannelState { h_m, h_e, h_p }
    }
}

fn check_pdf_args(gamma: f64, h: f64) -> Result<()> {
    if !(gamma.is_finite() && gamma > 0.0) {
        return Err(domain(format!("mean gain must be positive, got {gamma}")));
    }
    if !(h >= 0.0) {
        return Err(domain(format!("power gain must be nonnegative, got {h}")));
    }
    Ok(())
}

/// Density of an exponential power gain with mean `gamma`.
pub fn pdf_h(gamma: f64, h: f64) -> Result<f64> {
    check_pdf_args(gamma, h)?;
    Ok((-h / gamma).exp() / gamma)
}

/// `Pr(h ≤ x)` for an exponential power gain with mean `gamma`. Accepts `+∞`.
pub fn cdf_h(gamma: f64, h: f64) -> Result<f64> {
    check_pdf_args(gamma, h)?;
    Ok(-(-h / gamma).exp_m1())
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn pdf_values() {
        assert_eq!(pdf_h(1.0, 0.0).unwrap(), 1.0);
        assert_eq!(pdf_h(2.0, 0.0).unwrap(), 0.5);
        assert_relative_eq!(
            pdf_h(1.0, 1.0).unwrap(),
            0.367_879_441_171_442_33,
            epsilon = 1e-15
        );
    }

    #[test]
    fn cdf_values() {
        assert_eq!(cdf_h(3.0, 0.0).unwrap(), 0.0);
        assert_eq!(cdf_h(3.0, f64::INFINITY).unwrap(), 1.0);
        assert_relative_eq!(
            cdf_h(2.0, 2.0).unwrap(),
            0.632_120_558_828_557_7,
            epsilon = 1e-15
        );
    }

    #[test]
    fn pdf_domain_errors() {
        assert!(pdf_h(0.0, 1.0).is_err());
        assert!(pdf_h(-1.0, 1.0).is_err());
        assert!(pdf_h(1.0, -1e-9).is_err());
        assert!(cdf_h(1.0, f64::NAN).is_err());
    }

    #[test]
    fn params_validation() {
        assert!(FadingParams::new(1.0, 1.0, 2.0).is_ok());
        assert!(FadingParams::new(0.0, 1.0, 2.0).is_err());
        assert!(FadingParams::new(1.0, f64::INFINITY, 2.0).is_err());
    }

    #[test]
    fn stream_is_deterministic() {
        let params = FadingParams::new(1.0, 2.0, 3.0).unwrap();
        let mut a = SampleStream::new(7, 3);
        let mut b = SampleStream::new(7, 3);
        for _ in 0..1000 {
            assert_eq!(a.sample_state(&params), b.sample_state(&params));
        }
    }

    #[test]
    fn streams_differ_by_index_and_seed() {
        let params = FadingParams::new(1.0, 1.0, 1.0).unwrap();
        let first = |seed, idx| SampleStream::new(seed, idx).sample_state(&params);
        assert_ne!(first(7, 0), first(7, 1));
        assert_ne!(first(7, 0), first(8, 0));
    }

    #[test]
    fn moments_and_independence() {
        let params = FadingParams::new(1.0, 1.0, 1.0).unwrap();
        let mut s = SampleStream::new(42, 0);
        let n = 1_000_000usize;
        let (mut sm, mut se, mut sp) = (0.0, 0.0, 0.0);
        let (mut sm2, mut se2, mut sme) = (0.0, 0.0, 0.0);
        for _ in 0..n {
            let st = s.sample_state(&params);
            assert!(st.h_m >= 0.0 && st.h_e >= 0.0 && st.h_p >= 0.0);
            sm += st.h_m;
            se += st.h_e;
            sp += st.h_p;
            sm2 += st.h_m * st.h_m;
            se2 += st.h_e * st.h_e;
            sme += st.h_m * st.h_e;
        }
        let nf = n as f64;
        let (mm, me, mp) = (sm / nf, se / nf, sp / nf);
        // Exp(1): standard error of the mean is 1/sqrt(n).
        let three_se = 3.0 / nf.sqrt();
        for m in [mm, me, mp] {
            assert!((m - 1.0).abs() < 0.01);
            assert!((m - 1.0).abs() < three_se, "mean {m}");
        }
        let var_m = sm2 / nf - mm * mm;
        let var_e = se2 / nf - me * me;
        assert!((var_m - 1.0).abs() < 0.02);
        let corr = (sme / nf - mm * me) / (var_m * var_e).sqrt();
        assert!(corr.abs() < 0.01, "corr {corr}");
    }

    #[test]
    fn exponential_moments_scale_with_gamma() {
        let mut s = SampleStream::new(1, 0);
        let gamma = 3.5;
        let n = 400_000;
        let xs: Vec<f64> = (0..n).map(|_| s.exponential(gamma)).collect();
        let mean = xs.iter().sum::<f64>() / n as f64;
        let var = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / (n - 1) as f64;
        assert!((mean - gamma).abs() < 3.0 * gamma / (n as f64).sqrt());
        assert!((var / (gamma * gamma) - 1.0).abs() < 0.03);
    }
}
