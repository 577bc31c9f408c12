use super::{
    associate, AssociatedRows, AssociationMode, Incumbent, OuterRecord, RoutineKind, RoutineOutput, RoutineTrace,
    StallCounter, Termination,
};
use crate::convex::{gaussian_randomize, optimal_y, solve_maximin_sdr, BudgetMode, MaximinSpec, RelaxedState, SdrInstance, SolverConfig};
use crate::error::{Error, Result};
use crate::peb::Geometry;
use crate::rng::derive_seed;

/// Randomization rounds per outer iteration before giving up on it.
const RANDOMIZATION_ATTEMPTS: u64 = 2;

/// Max-min throughput deployment subject to every row's squared PEB staying
/// at most `zeta_b^2` (`zeta_b` in m, may be infinite).
pub fn throughput_routine(geom: &Geometry, zeta_b: f64, init: &Incumbent, cfg: &SolverConfig) -> Result<RoutineOutput> {
    cfg.validate()?;
    if !(zeta_b > 0.0) {
        return Err(Error::Domain { what: "PEB threshold", value: zeta_b });
    }
    let peb_sq = zeta_b * zeta_b;
    let mode = AssociationMode::Throughput { peb_threshold_sq: peb_sq };
    let evaluate = |x: &[bool]| associate(geom, x, mode).ok().map(|r| r.min_rate_mbps());

    let mut best: Option<(Vec<bool>, AssociatedRows)> =
        associate(geom, &init.x, mode).ok().map(|rows| (init.x.clone(), rows));
    let mut a_hat = best.as_ref().map_or_else(|| init.association.clone(), |b| b.1.association.clone());
    let mut x_hat = init.x.clone();
    let mut instance = SdrInstance::from_geometry(geom, &a_hat);
    let mut stall = StallCounter { previous: best.as_ref().map(|b| b.1.min_rate_mbps()), consecutive: 0 };
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

        // Inner loop: auxiliary variables, then the relaxed deployment.
        let mut d: Vec<f64> = x_hat.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        let mut budget_mode = BudgetMode::Equality;
        let mut state: Option<RelaxedState> = None;
        for _ in 0..cfg.max_inner {
            let y: Vec<f64> = instance
                .rows
                .iter()
                .enumerate()
                .map(|(t, row)| match row.serving {
                    Some(j) => optimal_y(row.gains[j] * d[j].max(1e-12), instance.interference(t, j, &d), 1.0),
                    None => 0.0,
                })
                .collect();
            let solved = loop {
                let spec = MaximinSpec {
                    instance: &instance,
                    y: &y,
                    peb_threshold_sq: peb_sq.is_finite().then_some(peb_sq),
                    budget_mode,
                    start: Some(&d),
                };
                match solve_maximin_sdr(&spec) {
                    Ok(s) => break Some(s),
                    Err(e) if e.is_infeasibility() => {
                        rec.infeasible_solves += 1;
                        if budget_mode == BudgetMode::Equality {
                            budget_mode = BudgetMode::AtMost;
                        } else {
                            break None;
                        }
                    }
                    Err(e) => return Err(e),
                }
            };
            let Some(s) = solved else { break };
            rec.inner_iterations += 1;
            let done = state.as_ref().is_some_and(|prev| {
                (s.objective - prev.objective).abs() <= cfg.tol_inner * prev.objective.abs().max(s.objective.abs())
            });
            d = s.x_bar.clone();
            state = Some(s);
            if done {
                break;
            }
        }
        rec.inner_cap_hit = rec.inner_iterations == cfg.max_inner;

        if let Some(s) = &state {
            rec.relaxed_objective = Some(s.objective);
            rec.budget_mode = Some(s.budget_mode);
            for attempt in 0..RANDOMIZATION_ATTEMPTS {
                let seed = derive_seed(cfg.seed, &[RoutineKind::Throughput.tag(), k as u64, attempt]);
                let n = if attempt == 0 { cfg.n_rand } else { 4 * cfg.n_rand };
                match gaussian_randomize(&s.x_bar, &s.x, geom.budget, n, seed, evaluate) {
                    Ok(r) => {
                        rec.feasible_samples += r.feasible_samples;
                        let better = best.as_ref().is_none_or(|(_, b)| r.score > b.min_rate_mbps());
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

        rec.objective = best.as_ref().map(|b| b.1.min_rate_mbps());
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

    let trace = RoutineTrace { routine: RoutineKind::Throughput, threshold: zeta_b, records, termination };
    match best {
        Some((x, rows)) => Ok(RoutineOutput {
            objective: rows.min_rate_mbps(),
            x,
            association: rows.association,
            rates: rows.rates,
            peb_sq: rows.peb_sq,
            trace,
        }),
        None => Err(Error::InfeasibleThreshold { tightest: tightest_peb(geom, &x_hat) }),
    }
}

/// Smallest PEB threshold (m) every row of deployment `x` could meet.
fn tightest_peb(geom: &Geometry, x: &[bool]) -> f64 {
    let nr_ok = x.iter().any(|&b| b);
    (0..geom.n_points())
        .map(|t| {
            let nr = if nr_ok { geom.nr_peb_sq(t, x).unwrap_or(f64::INFINITY) } else { f64::INFINITY };
            nr.min(geom.lte_peb_sq(t))
        })
        .fold(0.0, f64::max)
        .sqrt()
}
