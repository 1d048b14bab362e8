//! Brute-force maximizers used to validate the closed-form policies.
//!
//! Each oracle maximizes the per-state Lagrangian directly over a dense power
//! grid and polishes the best cell with a golden-section pass. Nothing here
//! calls into [`crate::policy`].

use crate::error::{domain, Result};
use crate::fading::ChannelState;
use crate::numeric::{golden_max, integrate, QuadOptions};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Spacing {
    Linear,
    /// Zero plus log-spaced points over nine decades below `p_max`.
    Geometric,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridSpec {
    pub p_max: f64,
    pub n_points: usize,
    pub spacing: Spacing,
}

const GEOMETRIC_DECADES: f64 = 9.0;

impl GridSpec {
    /// Geometric, 10⁴ points, `p_max = max(10/λ, 10³)`.
    pub fn default_for(lambda: f64) -> Self {
        Self {
            p_max: (10.0 / lambda).max(1e3),
            n_points: 10_000,
            spacing: Spacing::Geometric,
        }
    }

    /// [`GridSpec::default_for`] widened to `10/(λh_P)` when that is larger.
    /// No maximizer exceeds `1/(λh_P)`: beyond it the marginal rate, at most
    /// `h_M/(1 + h_M p) < 1/p`, is below the price `λh_P`.
    pub fn covering(lambda: f64, h_p: f64) -> Self {
        let mut g = Self::default_for(lambda);
        g.p_max = g.p_max.max(10.0 / (lambda * h_p));
        g
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_points < 100 {
            return Err(domain(format!(
                "grid needs at least 100 points, got {}",
                self.n_points
            )));
        }
        if !(self.p_max.is_finite() && self.p_max > 0.0) {
            return Err(domain(format!(
                "grid p_max must be positive, got {}",
                self.p_max
            )));
        }
        Ok(())
    }

    /// Grid points on `[0, upper]`, increasing, always including both ends.
    pub fn points(&self, upper: f64) -> Vec<f64> {
        let n = self.n_points;
        match self.spacing {
            Spacing::Linear => (0..n).map(|i| upper * i as f64 / (n - 1) as f64).collect(),
            Spacing::Geometric => {
                let lo = upper * 10f64.powf(-GEOMETRIC_DECADES);
                let ratio = (upper / lo).ln() / (n - 2) as f64;
                let mut pts = Vec::with_capacity(n);
                pts.push(0.0);
                pts.extend((0..n - 1).map(|i| lo * (ratio * i as f64).exp()));
                pts[n - 1] = upper;
                pts
            }
        }
    }
}

/// `[ln(1 + h_M p) − ln(1 + h_E p)]⁺ − λ h_P p`.
pub fn per_state_lagrangian(state: &ChannelState, p: f64, lambda: f64) -> f64 {
    let gain = (state.h_m * p).ln_1p() - (state.h_e * p).ln_1p();
    gain.max(0.0) - lambda * state.h_p * p
}

/// Grid argmax of `objective` over `points`, refined by golden section on the
/// two cells around the best point. Returns exactly 0 when no positive power
/// beats `objective(0)`.
fn refine_argmax<F>(mut objective: F, points: &[f64]) -> Result<f64>
where
    F: FnMut(f64) -> Result<f64>,
{
    let mut best_i = 0;
    let mut best_v = f64::NEG_INFINITY;
    for (i, &p) in points.iter().enumerate() {
        let v = objective(p)?;
        if v > best_v {
            best_v = v;
            best_i = i;
        }
    }
    let lo = points[best_i.saturating_sub(1)];
    let hi = points[(best_i + 1).min(points.len() - 1)];
    let mut failure = None;
    let (p_ref, v_ref) = golden_max(
        |p| match objective(p) {
            Ok(v) => v,
            Err(e) => {
                failure.get_or_insert(e);
                f64::NEG_INFINITY
            }
        },
        lo,
        hi,
        1e-13 * hi.max(f64::MIN_POSITIVE),
    );
    if let Some(e) = failure {
        return Err(e);
    }
    let (p, v) = if v_ref > best_v {
        (p_ref, v_ref)
    } else {
        (points[best_i], best_v)
    };
    let at_zero = objective(0.0)?;
    Ok(if v > at_zero { p } else { 0.0 })
}

/// Brute-force maximizer of [`per_state_lagrangian`] over
/// `[0, min(p_max, q_peak/h_P)]`.
pub fn argmax_power_grid(
    state: &ChannelState,
    lambda: f64,
    grid: &GridSpec,
    q_peak: Option<f64>,
) -> Result<f64> {
    grid.validate()?;
    let upper = match q_peak {
        Some(q) if q.is_finite() => grid.p_max.min(q / state.h_p),
        _ => grid.p_max,
    };
    let points = grid.points(upper);
    refine_argmax(|p| Ok(per_state_lagrangian(state, p, lambda)), &points)
}

/// Expected per-state objective without eavesdropper CSI:
/// `E_{h_E}[ln(1 + h_M p) − ln(1 + h_E p)]⁺ − λh_P p`, integrating the
/// exponential density of `h_E` over `[0, h_M]` (the bracket vanishes beyond).
pub fn no_ecsi_per_state_objective(
    h_m: f64,
    h_p: f64,
    p: f64,
    lambda: f64,
    gamma_e: f64,
) -> Result<f64> {
    if !(p >= 0.0) || !(h_m > 0.0) || !(gamma_e > 0.0) {
        return Err(domain(
            "no-ecsi objective needs p ≥ 0, h_M > 0, gamma_E > 0",
        ));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    let top = (h_m * p).ln_1p();
    let integrand = |h: f64| (top - (h * p).ln_1p()) * (-h / gamma_e).exp() / gamma_e;
    let opts = QuadOptions::with_tolerances(1e-16, 1e-13);
    // the density lives on a scale of gamma_E; split there so a narrow
    // density is not missed by the first panel
    let split = h_m.min(50.0 * gamma_e);
    let near = integrate(integrand, 0.0, split, opts)?;
    let far = integrate(integrand, split, h_m, opts)?;
    Ok(near.value + far.value - lambda * h_p * p)
}

/// Brute-force maximizer of [`no_ecsi_per_state_objective`].
pub fn argmax_no_ecsi_grid(
    h_m: f64,
    h_p: f64,
    lambda: f64,
    gamma_e: f64,
    grid: &GridSpec,
) -> Result<f64> {
    grid.validate()?;
    let points = grid.points(grid.p_max);
    refine_argmax(
        |p| no_ecsi_per_state_objective(h_m, h_p, p, lambda, gamma_e),
        &points,
    )
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_shapes() {
        let g = GridSpec::default_for(0.1);
        assert_eq!(g.p_max, 1e3);
        let pts = g.points(g.p_max);
        assert_eq!(pts.len(), 10_000);
        assert_eq!(pts[0], 0.0);
        assert_eq!(*pts.last().unwrap(), 1e3);
        assert!(pts.windows(2).all(|w| w[0] < w[1]));
        let lin = GridSpec {
            p_max: 2.0,
            n_points: 101,
            spacing: Spacing::Linear,
        };
        assert_eq!(lin.points(2.0)[50], 1.0);
        assert!(GridSpec {
            n_points: 99,
            ..lin
        }
        .validate()
        .is_err());
        assert!(GridSpec { p_max: 0.0, ..lin }.validate().is_err());
        assert_eq!(GridSpec::default_for(1e-3).p_max, 1e4);
    }

    #[test]
    fn lagrangian_basics() {
        let s = ChannelState::new(1.0, 0.5, 1.0);
        assert_eq!(per_state_lagrangian(&s, 0.0, 0.1), 0.0);
        let bad = ChannelState::new(0.5, 1.0, 1.0);
        for p in [1e-6, 0.1, 1.0, 100.0] {
            assert!(per_state_lagrangian(&bad, p, 0.1) < 0.0);
        }
        assert_eq!(
            argmax_power_grid(&bad, 0.1, &GridSpec::default_for(0.1), None).unwrap(),
            0.0
        );
    }

    #[test]
    fn stationarity_at_reference_optimum() {
        let s = ChannelState::new(1.0, 0.5, 1.0);
        let p_star = 0.5 * (41f64.sqrt() - 3.0);
        let h = 1e-5 * p_star;
        let d = (per_state_lagrangian(&s, p_star + h, 0.1)
            - per_state_lagrangian(&s, p_star - h, 0.1))
            / (2.0 * h);
        assert!(d.abs() < 1e-6, "{d}");
        let p = argmax_power_grid(&s, 0.1, &GridSpec::default_for(0.1), None).unwrap();
        assert!((p - p_star).abs() < 1e-6 * p_star);
    }

    #[test]
    fn peak_boundary_hit() {
        let s = ChannelState::new(1.0, 0.5, 1.0);
        let p = argmax_power_grid(&s, 0.1, &GridSpec::default_for(0.1), Some(1.0)).unwrap();
        assert_eq!(p, 1.0);
    }

    #[test]
    fn no_ecsi_objective_limits() {
        assert_eq!(
            no_ecsi_per_state_objective(1.0, 1.0, 0.0, 0.1, 1.0).unwrap(),
            0.0
        );
        // almost-silent eavesdropper
        let s = ChannelState::new(1.3, 1e-9, 0.7);
        for p in [0.1, 1.0, 5.0] {
            let a = no_ecsi_per_state_objective(1.3, 0.7, p, 0.2, 1e-9).unwrap();
            let b = per_state_lagrangian(&s, p, 0.2);
            assert!((a - b).abs() < 1e-4, "{a} vs {b}");
        }
    }
}
