use super::{
    associate, AssociatedRows, AssociationMode, Incumbent, OuterRecord, RoutineKind, RoutineOutput, RoutineTrace,
    StallCounter, Termination,
};
use crate::convex::{bisection, gaussian_randomize, solve_feasibility_sdr, BudgetMode, FeasibilitySpec, SdrInstance, SolverConfig};
use crate::error::{Error, Result};
use crate::peb::Geometry;
use crate::rng::derive_seed;

const RANDOMIZATION_ATTEMPTS: u64 = 2;

/// Headroom above the incumbent's worst 5G squared PEB for the top of the
/// bisection bracket.
const BRACKET_HEADROOM: f64 = 1e-3;

/// Default ratio between the bottom and top of the bracket.
const BRACKET_RATIO: f64 = 1e-3;

/// Min-max PEB deployment subject to every row's rate staying at least
/// `zeta_r` (bit/s).
pub fn positioning_routine(geom: &Geometry, zeta_r: f64, init: &Incumbent, cfg: &SolverConfig) -> Result<RoutineOutput> {
    cfg.validate()?;
    if !(zeta_r >= 0.0 && zeta_r.is_finite()) {
        return Err(Error::Domain { what: "rate threshold", value: zeta_r });
    }
    let mode = AssociationMode::Positioning { rate_threshold: zeta_r };
    let evaluate = |x: &[bool]| associate(geom, x, mode).ok().map(|r| -r.max_peb_sq());
    let rate_threshold = (zeta_r > 0.0).then(|| zeta_r / geom.nr_bandwidth);

    let mut best: Option<(Vec<bool>, AssociatedRows)> =
        associate(geom, &init.x, mode).ok().map(|rows| (init.x.clone(), rows));
    let mut a_hat = best.as_ref().map_or_else(|| init.association.clone(), |b| b.1.association.clone());
    let mut x_hat = init.x.clone();
    let mut instance = SdrInstance::from_geometry(geom, &a_hat);
    let mut stall = StallCounter { previous: best.as_ref().map(|b| b.1.max_peb_sq()), consecutive: 0 };
    let mut records = Vec::new();
    let mut termination = Termination::OuterCap;

    for k in 0..cfg.max_outer {
        instance.set_association(&a_hat);
        let mut rec = OuterRecord {
            k,
            objective: None,
            inner_iterations: 0,
            inner_cap_hit: false,
            relaxed_objective: None,
            eta: None,
            bisection_calls: 0,
            budget_mode: None,
            infeasible_solves: 0,
            feasible_samples: 0,
            randomization_failures: 0,
            kept_incumbent: true,
        };

        let eta_hi = cfg.eta_hi.unwrap_or_else(|| bracket_top(geom, &x_hat, &a_hat));
        let eta_lo = cfg.eta_lo.unwrap_or(eta_hi * BRACKET_RATIO).min(eta_hi * 0.5);
        let eps = cfg.eps_bisect * (eta_hi - eta_lo);
        let start: Vec<f64> = x_hat.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let mut infeasible_solves = 0;
        let mut calls = 0;
        let found = bisection(eta_lo, eta_hi, eps, |eta| {
            calls += 1;
            for budget_mode in [BudgetMode::Equality, BudgetMode::AtMost] {
                let spec = FeasibilitySpec { instance: &instance, rate_threshold, budget_mode, start: Some(&start) };
                if let Some(s) = solve_feasibility_sdr(eta, &spec)? {
                    return Ok(Some(s));
                }
                infeasible_solves += 1;
            }
            Ok(None)
        });
        rec.bisection_calls = calls;
        rec.infeasible_solves = infeasible_solves;
        rec.inner_iterations = 1;
        let state = match found {
            Ok(out) => {
                rec.eta = Some(out.eta);
                Some(out.state)
            }
            Err(Error::NoFeasiblePoint { .. }) => None,
            Err(e) => return Err(e),
        };

        if let Some(s) = &state {
            rec.budget_mode = Some(s.budget_mode);
            for attempt in 0..RANDOMIZATION_ATTEMPTS {
                let seed = derive_seed(cfg.seed, &[RoutineKind::Positioning.tag(), k as u64, attempt]);
                let n = if attempt == 0 { cfg.n_rand } else { 4 * cfg.n_rand };
                match gaussian_randomize(&s.x_bar, &s.x, geom.budget, n, seed, evaluate) {
                    Ok(r) => {
                        rec.feasible_samples += r.feasible_samples;
                        let better = best.as_ref().is_none_or(|(_, b)| -r.score < b.max_peb_sq());
                        if better {
                            let rows = associate(geom, &r.x, mode)?;
                            best = Some((r.x, rows));
                            rec.kept_incumbent = false;
                        }
                        break;
                    }
                    Err(Error::RandomizationFailed { .. }) => rec.randomization_failures += 1,
                    Err(e) => return Err(e),
                }
            }
        }

        rec.objective = best.as_ref().map(|b| b.1.max_peb_sq());
        if let Some((x, rows)) = &best {
            x_hat = x.clone();
            a_hat = rows.association.clone();
        }
        let stop = stall.update(rec.objective, cfg.tol_inner);
        records.push(rec);
        if stop {
            termination = Termination::Stalled;
            break;
        }
        if state.is_none() && best.is_none() {
            break;
        }
    }

    let trace = RoutineTrace { routine: RoutineKind::Positioning, threshold: zeta_r * 1e-6, records, termination };
    match best {
        Some((x, rows)) => Ok(RoutineOutput {
            objective: rows.max_peb_sq(),
            x,
            association: rows.association,
            rates: rows.rates,
            peb_sq: rows.peb_sq,
            trace,
        }),
        None => Err(Error::InfeasibleThreshold { tightest: tightest_rate(geom, &x_hat) }),
    }
}

/// Top of the bisection bracket: a little above the worst 5G squared PEB of
/// the incumbent, or a generous multiple of the worst LTE one when the
/// incumbent has no finite 5G PEB.
fn bracket_top(geom: &Geometry, x: &[bool], assoc: &[Option<usize>]) -> f64 {
    let nr_ok = x.iter().any(|&b| b);
    let worst_nr = (0..geom.n_points())
        .filter(|&t| assoc[t].is_some())
        .map(|t| if nr_ok { geom.nr_peb_sq(t, x).unwrap_or(f64::INFINITY) } else { f64::INFINITY })
        .fold(0.0, f64::max);
    if worst_nr > 0.0 && worst_nr.is_finite() {
        return worst_nr * (1.0 + BRACKET_HEADROOM);
    }
    let worst_lte = (0..geom.n_points()).map(|t| geom.lte_peb_sq(t)).filter(|v| v.is_finite()).fold(0.0, f64::max);
    if worst_lte > 0.0 {
        4.0 * worst_lte
    } else {
        1e4
    }
}

/// Largest rate threshold (bit/s) every row of deployment `x` could meet.
fn tightest_rate(geom: &Geometry, x: &[bool]) -> f64 {
    (0..geom.n_points())
        .map(|t| {
            (0..x.len())
                .filter(|&j| x[j])
                .map(|j| geom.gnb_rate(t, j, x))
                .fold(geom.lte_rate(t), f64::max)
        })
        .fold(f64::INFINITY, f64::min)
}
