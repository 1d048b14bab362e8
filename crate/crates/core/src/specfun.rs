//! Exponential integral.
//!
//! `e1(x) = ∫ₓ^∞ e^(−t)/t dt` (the E₁ convention; some texts write this as
//! `Ei(x)`). Evaluation uses the power series for `x ≤ 1` and a Lentz
//! continued fraction above. The scaled forms keep products like
//! `eˣ·E₁(x)` finite for large arguments where `eˣ` alone overflows.

use crate::error::{domain, Result};
use crate::numeric::{integrate_to_infinity, QuadOptions};

const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;
/// Arguments below this indicate a degenerate power value upstream.
pub const E1_MIN_ARG: f64 = 1e-12;
const SERIES_CROSSOVER: f64 = 1.0;
const MAX_TERMS: usize = 10_000;
const TINY: f64 = 1e-300;

fn check_arg(x: f64) -> Result<()> {
    if x.is_nan() || x < E1_MIN_ARG {
        return Err(domain(format!(
            "exponential integral argument must be at least {E1_MIN_ARG:e}, got {x}"
        )));
    }
    Ok(())
}

/// Series for E₁ on `(0, 1]`.
fn e1_series(x: f64) -> f64 {
    let mut sum = 0.0;
    let mut term = 1.0;
    for k in 1..MAX_TERMS {
        let kf = k as f64;
        term *= -x / kf;
        let contrib = term / kf;
        sum += contrib;
        if contrib.abs() < f64::EPSILON * sum.abs() {
            break;
        }
    }
    -EULER_GAMMA - x.ln() - sum
}

/// Tail `g` of the continued fraction
/// `eˣE₁(x) = 1/(x + 1 − g)`, `g = 1²/(x + 3 − 2²/(x + 5 − 3²/(x + 7 − …)))`,
/// by modified Lentz. Valid for `x > 1`.
fn cf_tail(x: f64) -> f64 {
    let mut f = TINY;
    let mut c = f;
    let mut d = 0.0;
    for j in 1..MAX_TERMS {
        let jf = j as f64;
        let a = if j == 1 { 1.0 } else { -jf * jf };
        let b = x + 2.0 * jf + 1.0;
        d = b + a * d;
        if d == 0.0 {
            d = TINY;
        }
        c = b + a / c;
        if c == 0.0 {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = c * d;
        f *= delta;
        if (delta - 1.0).abs() < f64::EPSILON {
            break;
        }
    }
    f
}

/// `E₁(x)` for `x ≥ 1e−12`. Strictly positive and decreasing.
pub fn e1(x: f64) -> Result<f64> {
    check_arg(x)?;
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    if x <= SERIES_CROSSOVER {
        Ok(e1_series(x))
    } else {
        Ok((-x).exp() / (x + 1.0 - cf_tail(x)))
    }
}

/// `eˣ·E₁(x)`, finite for all admissible `x`; behaves like `1/x` for large `x`.
pub fn e1_scaled(x: f64) -> Result<f64> {
    check_arg(x)?;
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    if x <= SERIES_CROSSOVER {
        Ok(x.exp() * e1_series(x))
    } else {
        Ok(1.0 / (x + 1.0 - cf_tail(x)))
    }
}

/// `1 − x·eˣ·E₁(x)`, computed without cancellation for large `x`
/// (where it behaves like `1/x`). Lies in `(0, 1)`.
pub fn e1_remainder(x: f64) -> Result<f64> {
    check_arg(x)?;
    if x == f64::INFINITY {
        return Ok(0.0);
    }
    if x <= SERIES_CROSSOVER {
        Ok(1.0 - x * x.exp() * e1_series(x))
    } else {
        let q = 1.0 - cf_tail(x);
        Ok(q / (x + q))
    }
}

/// Independent evaluation of `∫ₓ^∞ e^(−t)/t dt` by adaptive quadrature at
/// relative tolerance 1e−12. Used to validate [`e1`].
pub fn e1_quadrature_oracle(x: f64) -> Result<f64> {
    if x.is_nan() || x <= 0.0 {
        return Err(domain(format!("oracle argument must be positive, got {x}")));
    }
    let r = integrate_to_infinity(
        |t| (-t).exp() / t,
        x,
        QuadOptions::with_tolerances(0.0, 1e-12),
    )?;
    Ok(r.value)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn log_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
        (0..n)
            .map(|i| lo * (hi / lo).powf(i as f64 / (n - 1) as f64))
            .collect()
    }

    #[test]
    fn reference_values() {
        assert!((e1(1.0).unwrap() - 0.219_383_934).abs() < 1e-9);
        assert!((e1(0.5).unwrap() - 0.559_773_595).abs() < 1e-9);
        assert_relative_eq!(e1(10.0).unwrap(), 4.156_97e-6, max_relative = 1e-5);
    }

    #[test]
    fn oracle_reference_values() {
        assert!((e1_quadrature_oracle(1.0).unwrap() - e1(1.0).unwrap()).abs() < 1e-10);
        assert_relative_eq!(
            e1_quadrature_oracle(10.0).unwrap(),
            4.156_97e-6,
            max_relative = 1e-5
        );
        assert!(e1_quadrature_oracle(2.0).unwrap() < e1_quadrature_oracle(1.0).unwrap());
    }

    #[test]
    fn large_argument_decay() {
        let v = e1(50.0).unwrap();
        assert!(v > 0.0 && v < 1e-23);
        assert_eq!(e1(f64::INFINITY).unwrap(), 0.0);
    }

    #[test]
    fn matches_oracle_on_log_grid() {
        for x in log_grid(0.01, 50.0, 50) {
            let a = e1(x).unwrap();
            let b = e1_quadrature_oracle(x).unwrap();
            assert!((a - b).abs() <= 1e-10, "x={x}: {a} vs {b}");
            assert_relative_eq!(a, b, max_relative = 1e-11);
        }
    }

    #[test]
    fn crossover_is_continuous() {
        let below = e1(SERIES_CROSSOVER).unwrap();
        let above = e1(SERIES_CROSSOVER * (1.0 + 1e-12)).unwrap();
        assert_relative_eq!(below, above, max_relative = 1e-11);
    }

    #[test]
    fn bound_sandwich_and_monotone() {
        let grid = log_grid(1e-6, 200.0, 400);
        let mut prev = f64::INFINITY;
        for &x in &grid {
            let v = e1(x).unwrap();
            let upper = (-x).exp() / x;
            let lower = upper * x / (x + 1.0);
            assert!(lower < v && v < upper, "x={x}");
            assert!(v < prev);
            prev = v;
        }
    }

    #[test]
    fn scaled_forms_are_consistent() {
        for x in log_grid(1e-6, 600.0, 200) {
            let s = e1_scaled(x).unwrap();
            let t = e1_remainder(x).unwrap();
            assert!(t > 0.0 && t < 1.0);
            assert_relative_eq!(1.0 - x * s, t, epsilon = 1e-12);
            if x < 500.0 {
                assert_relative_eq!(s, x.exp() * e1(x).unwrap(), max_relative = 1e-13);
            }
        }
        // asymptotics: eˣE₁(x) ~ 1/x, 1 − x·eˣE₁(x) ~ 1/x
        let x = 1e6;
        assert_relative_eq!(e1_scaled(x).unwrap(), 1.0 / (x + 1.0), max_relative = 1e-11);
        assert_relative_eq!(
            e1_remainder(x).unwrap(),
            1.0 / x - 2.0 / (x * x),
            max_relative = 1e-11
        );
    }

    #[test]
    fn domain_errors() {
        assert!(e1(0.0).is_err());
        assert!(e1(-1.0).is_err());
        assert!(e1(1e-13).is_err());
        assert!(e1(f64::NAN).is_err());
        assert!(e1(1e-12).is_ok());
        assert!(e1_quadrature_oracle(0.0).is_err());
    }
}
