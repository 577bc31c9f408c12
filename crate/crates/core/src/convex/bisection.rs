use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct BisectionOutcome<T> {
    /// Smallest feasible level found (upper end of the final bracket).
    pub eta: f64,
    pub state: T,
    /// Halving steps performed.
    pub iterations: usize,
    /// Final bracket.
    pub lo: f64,
    pub hi: f64,
}

/// Number of halvings needed to shrink `[lo, hi]` to width `eps`.
pub fn bisection_iterations(lo: f64, hi: f64, eps: f64) -> usize {
    let ratio = (hi - lo) / eps;
    if ratio <= 1.0 {
        return 0;
    }
    (ratio.log2() - 1e-12).ceil() as usize
}

/// Bisection on a monotone feasibility oracle (feasible for all levels above
/// some threshold). The oracle is called exactly
/// `bisection_iterations(lo, hi, eps)` times, plus once at `hi` when no
/// midpoint was feasible.
pub fn bisection<T, F>(lo: f64, hi: f64, eps: f64, mut feasible: F) -> Result<BisectionOutcome<T>>
where
    F: FnMut(f64) -> Result<Option<T>>,
{
    if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
        return Err(Error::validation("bisection bracket", format!("need 0 <= lo < hi, got [{lo}, {hi}]")));
    }
    if !(eps > 0.0) {
        return Err(Error::validation("bisection tolerance", "must be positive"));
    }
    let iterations = bisection_iterations(lo, hi, eps);
    let (mut l, mut h) = (lo, hi);
    let mut best = None;
    for _ in 0..iterations {
        let mid = 0.5 * (l + h);
        match feasible(mid)? {
            Some(state) => {
                h = mid;
                best = Some(state);
            }
            None => l = mid,
        }
    }
    let state = match best {
        Some(s) => s,
        None => feasible(hi)?.ok_or(Error::NoFeasiblePoint { eta_hi: hi })?,
    };
    Ok(BisectionOutcome { eta: h, state, iterations, lo: l, hi: h })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn step_oracle() {
        let eps = 2f64.powi(-10);
        let mut calls = 0;
        let out = bisection(0.0, 1.0, eps, |eta| {
            calls += 1;
            Ok((eta >= 0.3).then_some(eta))
        })
        .unwrap();
        assert_eq!(out.iterations, 10);
        assert_eq!(calls, 10);
        assert!(out.eta >= 0.3 && out.eta <= 0.3 + eps);
        assert!(out.hi - out.lo <= eps);
    }

    #[test]
    fn always_and_never_feasible() {
        let out = bisection(0.0, 1.0, 1.0 / 256.0, |e| Ok(Some(e))).unwrap();
        assert_eq!(out.iterations, 8);
        assert!(out.eta <= 1.0 / 256.0);
        let err = bisection(0.0, 1.0, 1.0 / 256.0, |_| Ok(None::<()>)).unwrap_err();
        assert!(matches!(err, Error::NoFeasiblePoint { .. }));
    }

    #[test]
    fn iteration_count_formula() {
        assert_eq!(bisection_iterations(0.0, 1.0, 1.0 / 1024.0), 10);
        assert_eq!(bisection_iterations(2.0, 5.0, 1.0), 2);
        assert_eq!(bisection_iterations(0.0, 1.0, 2.0), 0);
    }
}
