//! ToA position error bound: ranging noise, information weights, the PEB of
//! an anchor set and the per-test-point geometry cache.

mod geometry;
pub mod quadrature;
pub mod special;

pub use geometry::{precompute_geometry, Geometry, PointGeometry, GEOMETRY_SCHEMA_VERSION};

use std::f64::consts::{PI, SQRT_2};

use crate::error::{Error, Result};
use crate::model::{NoiseModel, Position};
use quadrature::Tolerance;
use special::ln_q_diff;

/// Anchor sets whose angular spread term falls below this fraction of
/// `(sum nu)^2` are treated as collinear.
const DEGENERATE_GEOMETRY: f64 = 1e-12;

/// Integrand tails are cut where they drop below this fraction of the peak.
const TAIL_CUTOFF: f64 = 1e-14;

/// Ranging standard deviation at distance `d`.
pub fn noise_sigma(nm: &NoiseModel, d: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain { what: "ranging distance", value: d });
    }
    Ok(nm.sigma0 * (d / nm.d0).powf(0.5 * nm.alpha_meas))
}

/// The integrand of the information weight for a uniform bias on
/// `[0, lambda]` plus Gaussian noise with distance-dependent variance.
pub fn h_integrand(y: f64, lambda: f64, d: f64, nm: &NoiseModel) -> Result<f64> {
    if !(lambda > 0.0) {
        return Err(Error::Domain { what: "maximum bias", value: lambda });
    }
    let sigma = noise_sigma(nm, d)?;
    Ok(h_with_sigma(y, lambda, d, sigma, nm.alpha_meas))
}

fn h_with_sigma(y: f64, lambda: f64, d: f64, sigma: f64, alpha: f64) -> f64 {
    let c = lambda / (sigma * SQRT_2);
    let k = alpha * sigma / (d * SQRT_2);
    let e1 = (y + c) * (y + c);
    let e2 = y * y;
    // factor out the larger exponential so nothing underflows
    let m = e1.min(e2);
    let inner = (m - e1).exp() * (1.0 + alpha * lambda / (2.0 * d) + k * y) - (m - e2).exp() * (1.0 + k * y);
    if inner == 0.0 {
        return 0.0;
    }
    let ln_den = ln_q_diff(SQRT_2 * y, SQRT_2 * (y + c)).max(-690.0);
    let ln_h = -2.0 * m + 2.0 * inner.abs().ln() - ln_den;
    if ln_h < -745.0 { 0.0 } else { ln_h.exp() }
}

/// Information weight `nu` (1/m^2) of one ranging link.
pub fn nu_weight(d: f64, lambda: f64, nm: &NoiseModel) -> Result<f64> {
    if !(lambda > 0.0) || !lambda.is_finite() {
        return Err(Error::Domain { what: "maximum bias", value: lambda });
    }
    let sigma = noise_sigma(nm, d)?;
    let alpha = nm.alpha_meas;
    let h = |y: f64| h_with_sigma(y, lambda, d, sigma, alpha);
    let c = lambda / (sigma * SQRT_2);

    // The integrand has one bump near y = -c and one near y = 0.
    let peak = [-c, -0.5 * c, 0.0, -c - 0.5, 0.5].iter().map(|&y| h(y)).fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Domain { what: "information weight integrand peak", value: peak });
    }
    let mut half_width: f64 = 6.0;
    while h(-c - half_width).max(h(half_width)) > TAIL_CUTOFF * peak && half_width < 1e3 {
        half_width *= 2.0;
    }
    let windows = if c > 2.0 * half_width {
        vec![
            (-c - half_width, -c + half_width),
            (-c + half_width, -half_width),
            (-half_width, half_width),
        ]
    } else {
        vec![(-c - half_width, half_width)]
    };
    let tol = Tolerance { abs: 1e-300, rel: 1e-10, max_intervals: 4000 };
    let (integral, _) = quadrature::integrate(h, &windows, tol)?;
    let nu = integral / (lambda * sigma * PI * SQRT_2);
    if !(nu > 0.0 && nu.is_finite()) {
        return Err(Error::Domain { what: "information weight", value: nu });
    }
    Ok(nu)
}

/// Position error bound at `p` from anchors given as (position, weight).
pub fn peb(anchors: &[(Position, f64)], p: &Position) -> Result<f64> {
    if anchors.len() < 2 {
        return Err(Error::UnboundedPeb { reason: format!("{} anchor(s), at least 2 needed", anchors.len()) });
    }
    let angles: Vec<f64> = anchors.iter().map(|(q, _)| p.bearing_to(q)).collect();
    let mut num = 0.0;
    let mut den = 0.0;
    for i in 0..anchors.len() {
        num += anchors[i].1;
        for j in (i + 1)..anchors.len() {
            let s = (angles[j] - angles[i]).sin();
            den += anchors[i].1 * anchors[j].1 * s * s;
        }
    }
    bounded_ratio(num, den).map(f64::sqrt)
}

fn bounded_ratio(num: f64, den: f64) -> Result<f64> {
    if !(den > DEGENERATE_GEOMETRY * num * num) {
        return Err(Error::UnboundedPeb { reason: "anchors are collinear with the test point".into() });
    }
    Ok(num / den)
}

/// Squared PEB of the deployment `x` from the weight vector `nu` and the
/// strictly upper-triangular S x S angular matrix `f` (row-major).
pub fn peb_quadratic_form(nu: &[f64], f: &[f64], x: &[f64]) -> Result<f64> {
    let s = nu.len();
    debug_assert_eq!(f.len(), s * s);
    let num: f64 = nu.iter().zip(x).map(|(a, b)| a * b).sum();
    let mut den = 0.0;
    for i in 0..s {
        if x[i] == 0.0 {
            continue;
        }
        let row = &f[i * s..(i + 1) * s];
        let mut acc = 0.0;
        for j in (i + 1)..s {
            acc += row[j] * x[j];
        }
        den += x[i] * acc;
    }
    bounded_ratio(num, den)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn nm(sigma0: f64, alpha: f64) -> NoiseModel {
        NoiseModel { sigma0, d0: 1.0, alpha_meas: alpha, lambda_max: 1.0 }
    }

    #[test]
    fn sigma_law() {
        assert_eq!(noise_sigma(&nm(2e-3, 3.0), 1.0).unwrap(), 2e-3);
        assert_eq!(noise_sigma(&nm(2e-3, 0.0), 731.0).unwrap(), 2e-3);
        assert_relative_eq!(noise_sigma(&nm(1e-4, 3.5), 250.0).unwrap(), 1.5717917871036692604, max_relative = 1e-14);
        assert!(noise_sigma(&nm(1.0, 1.0), 0.0).is_err());
    }

    #[test]
    fn h_matches_high_precision_value() {
        let v = h_integrand(0.0, 1.0, 1.0, &nm(1.0, 0.0)).unwrap();
        assert_relative_eq!(v, 0.45355355115115079771, max_relative = 1e-13);
    }

    #[test]
    fn h_is_non_negative_and_finite() {
        for &y in &[-400.0, -35.0, -3.0, -0.2, 0.0, 0.7, 12.0, 39.0, 300.0] {
            for &(lam, d, a) in &[(1.0, 250.0, 3.5), (10.0, 80.0, 2.5), (1e-3, 5.0, 0.0)] {
                let v = h_integrand(y, lam, d, &nm(1e-3, a)).unwrap();
                assert!(v >= 0.0 && v.is_finite(), "h({y}) = {v}");
            }
        }
    }

    #[test]
    fn h_large_bias_limit() {
        // lambda/sigma huge, alpha = 0: h -> e^{-2y^2}/Q(sqrt2 y)
        for &y in &[-1.5, -0.3, 0.0, 0.8, 2.5, 6.0] {
            let v = h_integrand(y, 1e4, 10.0, &nm(1.0, 0.0)).unwrap();
            let limit = (-2.0 * y * y - special::ln_q(SQRT_2 * y)).exp();
            assert_relative_eq!(v, limit, max_relative = 1e-10);
        }
    }

    #[test]
    fn nu_matches_high_precision_values() {
        let cases = [
            (250.0, 1.0, 1e-4, 3.5, 0.3916555941873473351),
            (100.0, 10.0, 1e-3, 3.5, 0.055616109457812219587),
            (50.0, 1.0, 1.0, 0.0, 0.92308481645710104948),
            (400.0, 1.0, 1e-4, 2.5, 10.096757993077531631),
            (10.0, 1.0, 1e-4, 3.0, 571.23227680194135845),
            (1.0, 0.001, 1.0, 0.0, 0.99999991666667361111),
        ];
        for (d, lam, s0, a, want) in cases {
            let got = nu_weight(d, lam, &nm(s0, a)).unwrap();
            assert_relative_eq!(got, want, max_relative = 1e-8);
        }
    }

    #[test]
    fn nu_gaussian_limit_and_monotone_in_bias() {
        let m = nm(0.7, 0.0);
        let g = nu_weight(3.0, 1e-3 * 0.7, &m).unwrap();
        assert_relative_eq!(g, 1.0 / (0.7 * 0.7), max_relative = 1e-2);
        let a = nu_weight(3.0, 0.07, &m).unwrap();
        let b = nu_weight(3.0, 0.7, &m).unwrap();
        let c = nu_weight(3.0, 7.0, &m).unwrap();
        assert!(a > b && b > c, "{a} {b} {c}");
    }

    #[test]
    fn nu_scales_with_sigma() {
        // alpha = 0: scaling sigma0 and lambda together by c scales nu by 1/c^2
        let base = nu_weight(20.0, 0.5, &nm(0.5, 0.0)).unwrap();
        let scaled = nu_weight(20.0, 1.5, &nm(1.5, 0.0)).unwrap();
        assert_relative_eq!(scaled, base / 9.0, max_relative = 1e-9);
    }

    #[test]
    fn nu_positive_over_grid() {
        let m = nm(1e-3, 3.0);
        for i in 0..=8 {
            let d = 10f64.powf(i as f64 * 0.5);
            let sigma = noise_sigma(&m, d).unwrap();
            for &ratio in &[0.01, 0.3, 1.0, 10.0, 100.0] {
                let v = nu_weight(d, ratio * sigma, &m).unwrap();
                assert!(v > 0.0 && v.is_finite(), "d={d} ratio={ratio}");
            }
        }
    }

    #[test]
    fn peb_regular_polygon_closed_form() {
        let p = Position::new(3.0, -2.0);
        for b in [3usize, 4, 6] {
            let anchors: Vec<(Position, f64)> = (0..b)
                .map(|i| {
                    let th = 2.0 * PI * i as f64 / b as f64;
                    (Position::new(p.x + 40.0 * th.cos(), p.y + 40.0 * th.sin()), 4.0)
                })
                .collect();
            // nu = 1/sigma^2 with sigma = 0.5
            assert_relative_eq!(peb(&anchors, &p).unwrap(), 2.0 * 0.5 / (b as f64).sqrt(), max_relative = 1e-12);
        }
    }

    #[test]
    fn peb_degenerate_cases() {
        let p = Position::new(0.0, 0.0);
        let one = [(Position::new(1.0, 0.0), 1.0)];
        assert!(matches!(peb(&one, &p), Err(Error::UnboundedPeb { .. })));
        let opposite = [(Position::new(1.0, 0.0), 1.0), (Position::new(-5.0, 0.0), 2.0)];
        assert!(matches!(peb(&opposite, &p), Err(Error::UnboundedPeb { .. })));
    }

    #[test]
    fn quadratic_form_single_site_is_unbounded() {
        let nu = [1.0, 2.0];
        let f = [0.0, 2.0, 0.0, 0.0];
        assert!(peb_quadratic_form(&nu, &f, &[1.0, 0.0]).is_err());
        assert_relative_eq!(peb_quadratic_form(&nu, &f, &[1.0, 1.0]).unwrap(), 1.5);
    }
}
