//! Reference planners: greedy site elimination, the distance-invariant
//! ranging baseline, exhaustive search and random placement.

use rand::seq::index::sample;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::convex::SolverConfig;
use crate::error::{Error, Result};
use crate::kpi::initial_incumbent;
use crate::model::{Association, Topology};
use crate::peb::{precompute_geometry, Geometry};
use crate::report::PlanReport;
use crate::rng::{stream_rng, Stream};
use crate::routines::{associate, association_step, max_sinr_association, positioning_routine, AssociationMode};

/// Default cap on `rows x subsets` for exhaustive search.
pub const DEFAULT_ORACLE_BUDGET: u128 = 10_000_000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BaselineResult {
    pub report: PlanReport,
    /// Elimination rounds, subsets visited, and similar planner-specific
    /// effort counters.
    pub steps: u64,
}

/// Row-wise association maximizing `rate - mu * peb_sq`; gNBs win ties over
/// LTE and low site indices over high ones.
pub fn best_association_given_x(geom: &Geometry, x: &[bool], mu: f64) -> Result<Association> {
    association_step(geom, x, AssociationMode::Joint { mu })
}

fn total_sinr(geom: &Geometry, x: &[bool]) -> f64 {
    let assoc = max_sinr_association(geom, x);
    assoc
        .iter()
        .enumerate()
        .map(|(t, a)| match a {
            Some(j) => geom.gnb_sinr(t, *j, x),
            None => geom.points[t].lte_sinr,
        })
        .sum()
}

fn min_rate_mbps(geom: &Geometry, x: &[bool]) -> f64 {
    let assoc = max_sinr_association(geom, x);
    (0..geom.n_points()).map(|t| geom.row_metrics(t, x, assoc[t]).0).fold(f64::INFINITY, f64::min) * 1e-6
}

/// Greedy elimination from full deployment: each round drops the site whose
/// removal leaves the highest total SINR over the test points (max-SINR
/// association), until the budget is met. With `rate_floor` (Mbit/s) it then
/// keeps eliminating while the min rate stays at or above the floor.
pub fn modified_bse(geom: &Geometry, rate_floor: Option<f64>, mu: f64) -> Result<BaselineResult> {
    let s = geom.n_sites();
    let mut x = vec![true; s];
    let mut rounds = 0;
    loop {
        let active = x.iter().filter(|&&b| b).count();
        if active <= geom.budget && (rate_floor.is_none() || active <= 1) {
            break;
        }
        let mut best: Option<(usize, f64)> = None;
        for j in 0..s {
            if !x[j] {
                continue;
            }
            x[j] = false;
            let v = total_sinr(geom, &x);
            x[j] = true;
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((j, v));
            }
        }
        let (j, _) = best.expect("at least one active site");
        if let (Some(floor), true) = (rate_floor, active <= geom.budget) {
            x[j] = false;
            let ok = min_rate_mbps(geom, &x) >= floor;
            x[j] = true;
            if !ok {
                break;
            }
        }
        x[j] = false;
        rounds += 1;
    }
    let assoc = max_sinr_association(geom, &x);
    Ok(BaselineResult { report: PlanReport::evaluate("bse", geom, &x, &assoc, mu)?, steps: rounds })
}

/// Copy of the topology whose ranging noise no longer grows with distance.
pub fn distance_invariant(topo: &Topology) -> Topology {
    let mut t = topo.clone();
    t.lte.noise_model.alpha_meas = 0.0;
    t.nr.noise_model.alpha_meas = 0.0;
    t
}

/// Positioning routine run on the distance-invariant ranging model, then
/// reported under the true one. `rate_threshold` (Mbit/s) defaults to none.
pub fn modified_sdr_toa(
    topo: &Topology,
    geom: &Geometry,
    rate_threshold: Option<f64>,
    solver: &SolverConfig,
    mu: f64,
) -> Result<BaselineResult> {
    let mut flat_topo = distance_invariant(topo);
    flat_topo.budget = geom.budget;
    let flat = precompute_geometry(&flat_topo)?;
    let zeta_r = rate_threshold.unwrap_or(0.0) * 1e6;
    let out = positioning_routine(&flat, zeta_r, &initial_incumbent(&flat), solver)?;
    let rows = associate(geom, &out.x, AssociationMode::Positioning { rate_threshold: zeta_r })
        .map_err(|_| Error::InfeasibleThreshold { tightest: rate_threshold.unwrap_or(0.0) })?;
    Ok(BaselineResult {
        report: PlanReport::evaluate("sdr-toa", geom, &out.x, &rows.association, mu)?,
        steps: out.trace.outer_iterations() as u64,
    })
}

fn binomial(n: usize, k: usize) -> u128 {
    if k > n {
        return 0;
    }
    let k = k.min(n - k);
    let mut c: u128 = 1;
    for i in 0..k {
        c = c * (n - i) as u128 / (i + 1) as u128;
    }
    c
}

/// Row evaluations exhaustive search needs for `s` sites, budget `g` and
/// `t` test points.
pub fn oracle_cost(s: usize, g: usize, t: usize) -> u128 {
    (0..=g).map(|k| binomial(s, k)).sum::<u128>() * t as u128
}

/// Subsets of `0..s` with at most `g` elements, by size then
/// lexicographically.
fn subsets(s: usize, g: usize) -> Vec<Vec<bool>> {
    let mut out = Vec::new();
    for k in 0..=g.min(s) {
        let mut idx: Vec<usize> = (0..k).collect();
        loop {
            let mut x = vec![false; s];
            for &i in &idx {
                x[i] = true;
            }
            out.push(x);
            // Next combination.
            let mut i = k;
            while i > 0 && idx[i - 1] == s - k + i - 1 {
                i -= 1;
            }
            if i == 0 {
                break;
            }
            idx[i - 1] += 1;
            for m in i..k {
                idx[m] = idx[m - 1] + 1;
            }
        }
    }
    out
}

/// Exhaustive search over every deployment of at most `G` sites with the
/// exact joint association. The first subset (by size, then lexicographic
/// order) attaining the maximum wins.
pub fn exhaustive_oracle(geom: &Geometry, mu: f64, max_evals: u128) -> Result<BaselineResult> {
    let (s, g, t) = (geom.n_sites(), geom.budget, geom.n_points());
    let required = oracle_cost(s, g, t);
    if required > max_evals {
        return Err(Error::BudgetExceeded { required, limit: max_evals });
    }
    let all = subsets(s, g);
    let values: Vec<f64> = all
        .par_iter()
        .map(|x| {
            let assoc = best_association_given_x(geom, x, mu).expect("joint association always exists");
            (0..t)
                .map(|i| {
                    let (r, b) = geom.row_metrics(i, x, assoc[i]);
                    crate::model::row_value(r * 1e-6, b, mu)
                })
                .fold(f64::INFINITY, f64::min)
        })
        .collect();
    let mut best = 0;
    for (k, v) in values.iter().enumerate() {
        if *v > values[best] {
            best = k;
        }
    }
    let x = &all[best];
    let assoc = best_association_given_x(geom, x, mu)?;
    Ok(BaselineResult { report: PlanReport::evaluate("oracle", geom, x, &assoc, mu)?, steps: all.len() as u64 })
}

/// `G` sites drawn uniformly without replacement, joint association.
pub fn random_placement(geom: &Geometry, mu: f64, seed: u64) -> Result<BaselineResult> {
    let mut rng = stream_rng(seed, Stream::Baseline);
    let mut x = vec![false; geom.n_sites()];
    for j in sample(&mut rng, geom.n_sites(), geom.budget) {
        x[j] = true;
    }
    let assoc = best_association_given_x(geom, &x, mu)?;
    Ok(BaselineResult { report: PlanReport::evaluate("random", geom, &x, &assoc, mu)?, steps: 1 })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn subset_enumeration() {
        let all = subsets(4, 2);
        assert_eq!(all.len(), 1 + 4 + 6);
        assert_eq!(all[0], vec![false; 4]);
        assert_eq!(all[5], vec![true, true, false, false]);
        assert_eq!(all[10], vec![false, false, true, true]);
        assert_eq!(subsets(3, 3).len(), 8);
        assert_eq!(oracle_cost(6, 3, 8), (1 + 6 + 15 + 20) * 8);
        assert_eq!(binomial(20, 8), 125_970);
    }
}
