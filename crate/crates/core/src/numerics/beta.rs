//! Regularized incomplete beta function and its inverse.

use super::gamma::{ln_gamma, stirling_remainder};
use super::newton::{safeguarded_newton, Bracket};
use super::normal::std_normal_cdf;
use super::{TAIL_FLOOR, TINY};
use crate::error::{Error, Result};

const EPS: f64 = 1e-16;
const LN_SQRT_2PI: f64 = 0.918_938_533_204_672_7;

fn check_shapes(a: f64, b: f64) -> Result<()> {
    if !(a > 0.0 && b > 0.0) || !a.is_finite() || !b.is_finite() {
        return Err(Error::domain(format!(
            "beta shapes must be positive and finite, got a = {a}, b = {b}"
        )));
    }
    Ok(())
}

/// `ln B(a, b)`.
pub fn ln_beta(a: f64, b: f64) -> f64 {
    if a >= 10.0 && b >= 10.0 {
        let c = a + b;
        -LN_SQRT_2PI + (a - 0.5) * a.ln() + (b - 0.5) * b.ln() - (c - 0.5) * c.ln()
            + stirling_remainder(a)
            + stirling_remainder(b)
            - stirling_remainder(c)
    } else {
        ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b)
    }
}

/// `x^a (1 - x)^b / B(a, b)`.
fn beta_prefix(a: f64, b: f64, x: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    if a >= 10.0 && b >= 10.0 {
        // Expand around the mode-like point a/(a+b); the linear terms cancel.
        let c = a + b;
        let x0 = a / c;
        let y0 = b / c;
        let e = x - x0;
        let u = e / x0;
        let v = -e / y0;
        let core = a * (u.ln_1p() - u) + b * (v.ln_1p() - v) - stirling_remainder(a)
            - stirling_remainder(b)
            + stirling_remainder(c);
        return core.exp() * (a * b / (std::f64::consts::TAU * c)).sqrt();
    }
    (a * x.ln() + b * (-x).ln_1p() - ln_beta(a, b)).exp()
}

fn max_iterations(a: f64, b: f64) -> usize {
    1_000 + (60.0 * a.max(b).sqrt()) as usize
}

// Continued fraction for I_x(a, b) (modified Lentz); converges for x < (a+1)/(a+b+2).
fn fraction(a: f64, b: f64, x: f64) -> Result<f64> {
    let qab = a + b;
    let qap = a + 1.0;
    let qam = a - 1.0;
    let mut c = 1.0;
    let mut d = 1.0 - qab * x / qap;
    if d.abs() < TINY {
        d = TINY;
    }
    d = 1.0 / d;
    let mut h = d;
    for m in 1..max_iterations(a, b) {
        let m = m as f64;
        let m2 = 2.0 * m;
        let aa = m * (b - m) * x / ((qam + m2) * (a + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        h *= d * c;
        let aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2));
        d = 1.0 + aa * d;
        if d.abs() < TINY {
            d = TINY;
        }
        c = 1.0 + aa / c;
        if c.abs() < TINY {
            c = TINY;
        }
        d = 1.0 / d;
        let delta = d * c;
        h *= delta;
        if (delta - 1.0).abs() < EPS {
            return Ok(h);
        }
    }
    Err(Error::NonConvergence {
        routine: "incomplete beta continued fraction",
        a,
        b,
        p: x,
    })
}

/// `(I_x(a, b), 1 - I_x(a, b))`, each accurate in its own tail.
pub fn reg_beta_pair(x: f64, a: f64, b: f64) -> Result<(f64, f64)> {
    check_shapes(a, b)?;
    if !(0.0..=1.0).contains(&x) {
        return Err(Error::domain(format!("beta argument must lie in [0, 1], got {x}")));
    }
    if x == 0.0 {
        return Ok((0.0, 1.0));
    }
    if x == 1.0 {
        return Ok((1.0, 0.0));
    }
    if a == 1.0 && b == 1.0 {
        return Ok((x, 1.0 - x));
    }
    if x < (a + 1.0) / (a + b + 2.0) {
        let lower = (beta_prefix(a, b, x) * fraction(a, b, x)? / a).min(1.0);
        Ok((lower, 1.0 - lower))
    } else {
        let upper = (beta_prefix(b, a, 1.0 - x) * fraction(b, a, 1.0 - x)? / b).min(1.0);
        Ok((1.0 - upper, upper))
    }
}

/// Regularized incomplete beta `I_x(a, b)`: the Beta(a, b) CDF.
pub fn reg_beta_i(x: f64, a: f64, b: f64) -> Result<f64> {
    reg_beta_pair(x, a, b).map(|(p, _)| p)
}

pub fn beta_pdf(x: f64, a: f64, b: f64) -> f64 {
    if x <= 0.0 || x >= 1.0 {
        return 0.0;
    }
    beta_prefix(a, b, x) / (x * (1.0 - x))
}

// Initial guess from Numerical Recipes' invbetai.
fn initial_guess(p: f64, a: f64, b: f64) -> f64 {
    if a >= 1.0 && b >= 1.0 {
        let pp = if p < 0.5 { p } else { 1.0 - p };
        let t = (-2.0 * pp.ln()).sqrt();
        let mut x = (2.307_53 + t * 0.270_61) / (1.0 + t * (0.992_29 + t * 0.044_81)) - t;
        if p < 0.5 {
            x = -x;
        }
        let al = (x * x - 3.0) / 6.0;
        let h = 2.0 / (1.0 / (2.0 * a - 1.0) + 1.0 / (2.0 * b - 1.0));
        let w = x * (al + h).sqrt() / h
            - (1.0 / (2.0 * b - 1.0) - 1.0 / (2.0 * a - 1.0)) * (al + 5.0 / 6.0 - 2.0 / (3.0 * h));
        a / (a + b * (2.0 * w).exp())
    } else {
        let lna = (a / (a + b)).ln();
        let lnb = (b / (a + b)).ln();
        let t = (a * lna).exp() / a;
        let u = (b * lnb).exp() / b;
        let w = t + u;
        if p < t / w {
            (p * a * w).powf(1.0 / a)
        } else {
            1.0 - (b * w * (1.0 - p)).powf(1.0 / b)
        }
    }
}

// Solves I_x(a, b) = p for p <= 1/2 (the lower tail is computed directly).
fn beta_inverse_lower(p: f64, a: f64, b: f64) -> Result<f64> {
    if p <= 0.0 {
        return Ok(0.0);
    }
    if a == 1.0 && b == 1.0 {
        return Ok(p);
    }
    let x0 = initial_guess(p, a, b);
    let eval = |x: f64| -> Result<(f64, f64)> {
        let (lower, _) = reg_beta_pair(x, a, b)?;
        Ok((lower - p, beta_pdf(x, a, b)))
    };
    safeguarded_newton(Bracket::new(0.0, 1.0), x0, eval).map_err(|e| match e {
        Error::NonConvergence { .. } => Error::NonConvergence {
            routine: "inverse incomplete beta",
            a,
            b,
            p,
        },
        other => other,
    })
}

/// `(x, 1 - x)` with `I_x(a, b) = p` and `1 - I_x(a, b) = q`, where the
/// caller supplies both tails of the target. The smaller one is solved.
pub(crate) fn beta_inverse_pair(p: f64, q: f64, a: f64, b: f64) -> Result<(f64, f64)> {
    if p <= q {
        let x = beta_inverse_lower(p, a, b)?;
        Ok((x, 1.0 - x))
    } else {
        // 1 - I_x(a, b) = I_{1-x}(b, a)
        let y = beta_inverse_lower(q, b, a)?;
        Ok((1.0 - y, y))
    }
}

/// Inverse of `I_·(a, b)` for `0 <= p <= 1`.
pub fn inv_reg_beta_i(p: f64, a: f64, b: f64) -> Result<f64> {
    check_shapes(a, b)?;
    if !(0.0..=1.0).contains(&p) {
        return Err(Error::domain(format!("inverse beta requires 0 <= p <= 1, got {p}")));
    }
    if p == 0.0 {
        return Ok(0.0);
    }
    if p == 1.0 {
        return Ok(1.0);
    }
    let p = p.max(TAIL_FLOOR);
    beta_inverse_pair(p, 1.0 - p, a, b).map(|(x, _)| x)
}

/// Beta(a, b) quantile at `Φ(z)` returned as `(x, 1 - x)`, both tails solved
/// without cancellation. The flag reports tail clamping.
pub fn beta_quantile_of_normal(a: f64, b: f64, z: f64) -> Result<(f64, f64, bool)> {
    check_shapes(a, b)?;
    let lower = std_normal_cdf(z);
    let upper = std_normal_cdf(-z);
    let clamped = lower.min(upper) < TAIL_FLOOR;
    let (x, y) = beta_inverse_pair(lower.max(TAIL_FLOOR), upper.max(TAIL_FLOOR), a, b)?;
    Ok((x, y, clamped))
}

#[cfg(test)]
mod tests {
    use super::*;

    // Composite Simpson on the Beta(a, b) density using lgamma directly.
    fn cdf_by_quadrature(x: f64, a: f64, b: f64) -> f64 {
        let lnb = ln_gamma(a) + ln_gamma(b) - ln_gamma(a + b);
        let f = |t: f64| ((a - 1.0) * t.ln() + (b - 1.0) * (1.0 - t).ln() - lnb).exp();
        let n = 200_000;
        let h = x / n as f64;
        let mut acc = f(x);
        for i in 1..n {
            acc += if i % 2 == 1 { 4.0 } else { 2.0 } * f(i as f64 * h);
        }
        acc * h / 3.0
    }

    #[test]
    fn symmetric_median() {
        let x = inv_reg_beta_i(0.5, 3.0, 3.0).unwrap();
        assert!((x - 0.5).abs() < 1e-14);
    }

    #[test]
    fn uniform_case() {
        for x in [0.2, 0.7] {
            assert!((reg_beta_i(x, 1.0, 1.0).unwrap() - x).abs() < 1e-16);
        }
    }

    #[test]
    fn matches_quadrature() {
        let oracle = cdf_by_quadrature(0.3, 2.0, 5.0);
        assert!((reg_beta_i(0.3, 2.0, 5.0).unwrap() - oracle).abs() < 1e-10);
        // Beta(2,5) CDF in closed form as an extra anchor: 1 - (1-x)^5 (1 + 5x)
        let closed = 1.0 - 0.7f64.powi(5) * (1.0 + 5.0 * 0.3);
        assert!((oracle - closed).abs() < 1e-12);
    }

    #[test]
    fn reflection_symmetry() {
        for &(x, a, b) in &[(0.1, 2.0, 3.0), (0.45, 0.5, 7.0), (0.8, 12.0, 40.0), (0.5, 300.0, 280.0)] {
            let lhs = reg_beta_i(x, a, b).unwrap();
            let rhs = 1.0 - reg_beta_i(1.0 - x, b, a).unwrap();
            assert!((lhs - rhs).abs() < 1e-13, "x={x} a={a} b={b}");
        }
    }

    #[test]
    fn large_symmetric_shapes_round_trip() {
        for &a in &[2.0, 16.0, 1024.0, 8192.0] {
            for &z in &[-7.0, -2.5, -0.1, 0.0, 0.4, 3.3] {
                let (x, y, clamped) = beta_quantile_of_normal(a, a, z).unwrap();
                assert!(!clamped);
                assert!((x + y - 1.0).abs() < 1e-15);
                let (lo, hi) = reg_beta_pair(x, a, a).unwrap();
                if z <= 0.0 {
                    let want = std_normal_cdf(z);
                    assert!((lo - want).abs() <= 1e-10 * want, "a={a} z={z}");
                } else {
                    let want = std_normal_cdf(-z);
                    assert!((hi - want).abs() <= 1e-10 * want, "a={a} z={z}");
                }
            }
        }
    }

    #[test]
    fn domain_errors() {
        assert!(reg_beta_i(1.2, 1.0, 1.0).is_err());
        assert!(reg_beta_i(0.5, 0.0, 1.0).is_err());
        assert!(inv_reg_beta_i(1.5, 2.0, 2.0).is_err());
        assert_eq!(inv_reg_beta_i(1.0, 2.0, 2.0).unwrap(), 1.0);
    }
}
