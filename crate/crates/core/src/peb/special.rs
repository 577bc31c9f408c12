//! Gaussian tail function in forms that survive deep tails.

use libm::erfc;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

/// Upper tail of the standard normal, `Q(z) = P(N(0,1) > z)`.
pub fn q_function(z: f64) -> f64 {
    0.5 * erfc(z * FRAC_1_SQRT_2)
}

/// `ln Q(z)`, accurate for arbitrarily large positive `z`.
pub fn ln_q(z: f64) -> f64 {
    if z < 30.0 {
        return q_function(z).ln();
    }
    // Asymptotic series of the Mills ratio; at z >= 30 the truncation error
    // is below 1e-15 relative.
    let r = 1.0 / (z * z);
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 1..=7 {
        term *= -((2 * n - 1) as f64) * r;
        sum += term;
    }
    -0.5 * z * z - (z * (2.0 * PI).sqrt()).ln() + sum.ln()
}

/// `ln(Q(a) - Q(b))` for `a < b`. Returns `-inf` when the difference is zero
/// in double precision.
pub fn ln_q_diff(a: f64, b: f64) -> f64 {
    debug_assert!(a <= b);
    if a >= 0.0 {
        tail_diff(a, b)
    } else if b <= 0.0 {
        // Q(a) - Q(b) = Q(-b) - Q(-a) by symmetry
        tail_diff(-b, -a)
    } else {
        // straddles zero: the value is at least min(Q(-a), Q(b)) - 1/2 away
        // from cancellation, direct evaluation is fine
        (1.0 - q_function(-a) - q_function(b)).ln()
    }
}

fn tail_diff(lo: f64, hi: f64) -> f64 {
    let la = ln_q(lo);
    let lb = ln_q(hi);
    let ratio = lb - la;
    if ratio >= 0.0 {
        return f64::NEG_INFINITY;
    }
    la + (-ratio.exp_m1()).ln()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn q_known_values() {
        assert_relative_eq!(q_function(0.0), 0.5, epsilon = 1e-16);
        assert_relative_eq!(q_function(1.959963984540054), 0.025, max_relative = 1e-12);
        // Q(10) = 7.619853024160526e-24
        assert_relative_eq!(q_function(10.0), 7.619853024160526e-24, max_relative = 1e-12);
    }

    #[test]
    fn ln_q_on_both_sides_of_the_switch() {
        // 30-digit reference values
        assert_relative_eq!(ln_q(29.9), -451.322912458528677, max_relative = 1e-14);
        assert_relative_eq!(ln_q(30.1), -457.329564416382215, max_relative = 1e-14);
        // ln Q(40) from the series vs the known value -804.6084420137538
        assert_relative_eq!(ln_q(40.0), -804.6084420137538, max_relative = 1e-14);
    }

    #[test]
    fn diff_matches_direct_where_direct_is_safe() {
        for (a, b) in [(-1.0, 0.5), (0.2, 1.3), (-3.0, -0.1), (2.0, 2.5)] {
            let direct = (q_function(a) - q_function(b)).ln();
            assert_relative_eq!(ln_q_diff(a, b), direct, max_relative = 1e-12);
        }
    }

    #[test]
    fn diff_deep_tails_stay_finite() {
        let v = ln_q_diff(50.0, 50.5);
        assert!(v.is_finite() && v < -1200.0);
        assert_relative_eq!(ln_q_diff(-50.5, -50.0), v, max_relative = 1e-14);
        assert_eq!(ln_q_diff(3.0, 3.0), f64::NEG_INFINITY);
    }
}
