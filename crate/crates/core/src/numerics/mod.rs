//! Special functions used by the quantile coupling.
//!
//! All functions are pure. Inverses are safeguarded Newton iterations that
//! solve in the smaller tail, so `1 - p` never has to be formed from a `p`
//! close to one. Tail probabilities below [`TAIL_FLOOR`] are clamped to it;
//! the `*_of_normal` entry points report when that happened.

mod beta;
mod gamma;
mod newton;
mod normal;

pub use beta::{beta_pdf, beta_quantile_of_normal, inv_reg_beta_i, ln_beta, reg_beta_i, reg_beta_pair};
pub use gamma::{
    gamma2_tail, gamma_pdf, gamma_quantile_of_normal, inv_reg_gamma_p, inv_reg_gamma_q, ln_gamma,
    reg_gamma_p, reg_gamma_pq, reg_gamma_q,
};
pub use normal::{std_normal_cdf, std_normal_pdf, std_normal_quantile, std_normal_sf};

/// Smallest tail probability handed to an inverse; anything below is clamped.
pub const TAIL_FLOOR: f64 = 1e-300;

pub(crate) const TINY: f64 = 1e-300;

#[cfg(test)]
mod proptests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(2_000))]

        #[test]
        fn gamma_round_trip(a in 1e-3f64..2_000.0, p in 1e-12f64..0.999_999_999) {
            let x = inv_reg_gamma_p(a, p).unwrap();
            let back = reg_gamma_p(a, x).unwrap();
            prop_assert!((back - p).abs() <= 1e-10, "a={} p={} x={} back={}", a, p, x, back);
        }

        #[test]
        fn beta_round_trip(a in 0.05f64..500.0, b in 0.05f64..500.0, p in 1e-12f64..0.999_999_999) {
            let x = inv_reg_beta_i(p, a, b).unwrap();
            let back = reg_beta_i(x, a, b).unwrap();
            // Near an endpoint one ulp of x can move I_x by more than the
            // tolerance; the neighbouring doubles must then bracket p.
            let below = reg_beta_i(x.next_down().max(0.0), a, b).unwrap();
            let above = reg_beta_i(x.next_up().min(1.0), a, b).unwrap();
            let bracketed = below <= p + 1e-10 && p - 1e-10 <= above;
            prop_assert!((back - p).abs() <= 1e-10 || bracketed, "a={} b={} p={} x={} back={}", a, b, p, x, back);
        }

        #[test]
        fn quantiles_monotone_in_p(a in 0.1f64..300.0, b in 0.1f64..300.0, p1 in 1e-9f64..0.999_999, p2 in 1e-9f64..0.999_999) {
            let (lo, hi) = if p1 <= p2 { (p1, p2) } else { (p2, p1) };
            prop_assert!(inv_reg_gamma_p(a, lo).unwrap() <= inv_reg_gamma_p(a, hi).unwrap());
            prop_assert!(inv_reg_beta_i(lo, a, b).unwrap() <= inv_reg_beta_i(hi, a, b).unwrap());
            prop_assert!(std_normal_quantile(lo).unwrap() <= std_normal_quantile(hi).unwrap());
        }

        #[test]
        fn cdfs_monotone_in_x(a in 0.1f64..300.0, b in 0.1f64..300.0, x1 in 0.0f64..1.0, x2 in 0.0f64..1.0) {
            let (lo, hi) = if x1 <= x2 { (x1, x2) } else { (x2, x1) };
            prop_assert!(reg_beta_i(lo, a, b).unwrap() <= reg_beta_i(hi, a, b).unwrap() + 1e-15);
            let scale = 3.0 * a;
            prop_assert!(reg_gamma_p(a, lo * scale).unwrap() <= reg_gamma_p(a, hi * scale).unwrap() + 1e-15);
        }
    }
}
