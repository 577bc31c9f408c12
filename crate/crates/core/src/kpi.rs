//! Adaptive threshold tuning between the throughput and positioning
//! routines, quantization of their output, and the overall planner.

use serde::{Deserialize, Serialize};

use crate::convex::{top_g, SolverConfig};
use crate::error::{Error, Result};
use crate::model::{joint_value, Association};
use crate::peb::Geometry;
use crate::report::PlanReport;
use crate::rng::derive_seed;
use crate::routines::{
    association_step, max_sinr_association, positioning_routine, throughput_routine, AssociationMode, Incumbent,
    RoutineOutput, RoutineTrace,
};

/// Multiple of the worst LTE PEB used as the initial PEB threshold.
pub const BOOTSTRAP_PEB_FACTOR: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PlanConfig {
    /// Throughput-positioning ratio in Mbit/s per m^2.
    pub mu: f64,
    /// Convergence tolerance on the realized ratio; defaults to `0.05 mu`,
    /// or 0.5 when `mu = 0`.
    pub eps_outer: Option<f64>,
    pub max_tau: usize,
    pub solver: SolverConfig,
}

impl Default for PlanConfig {
    fn default() -> Self {
        PlanConfig { mu: 0.0, eps_outer: None, max_tau: 6, solver: SolverConfig::default() }
    }
}

impl PlanConfig {
    pub fn eps(&self) -> f64 {
        self.eps_outer.unwrap_or(if self.mu == 0.0 { 0.5 } else { 0.05 * self.mu })
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.mu >= 0.0 && self.mu.is_finite()) {
            return Err(Error::validation("mu", "must be non-negative and finite"));
        }
        if !(self.eps() > 0.0) {
            return Err(Error::validation("eps_outer", "must be positive"));
        }
        if self.max_tau < 1 {
            return Err(Error::validation("max_tau", "must be at least 1"));
        }
        self.solver.validate()
    }
}

/// Thresholds and KPIs carried between iterations.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanState {
    pub tau: usize,
    /// Mbit/s.
    pub zeta_r: f64,
    /// m.
    pub zeta_b: f64,
    pub omega_r: f64,
    pub omega_b: f64,
    /// Throughput-only min rate (Mbit/s) and its largest squared PEB (m^2).
    pub r0: f64,
    pub b0: f64,
    /// Quantized plan KPIs of this iteration.
    pub r_star: f64,
    pub b_star: f64,
}

/// Next PEB threshold: `omega_b = (b_prev - 1) / b_prev`, squared threshold
/// `omega_b * b0`, kept within `[floor, cap]` (all in m^2). Returns
/// `(omega_b, zeta_b^2)`.
pub fn next_peb_threshold(b_prev: f64, b0: f64, floor: f64, cap: f64) -> (f64, f64) {
    let omega = (b_prev - 1.0) / b_prev;
    let raw = omega * b0;
    let z = if raw.is_nan() { cap } else { raw.min(cap).max(floor.min(cap)) };
    (omega, z)
}

/// Next rate threshold: `omega_r = (r_prev - mu) / r_prev`, threshold
/// `omega_r * r0` kept within `[0, r0]` (Mbit/s). Returns `(omega_r, zeta_r)`.
pub fn next_rate_threshold(r_prev: f64, mu: f64, r0: f64) -> (f64, f64) {
    let omega = (r_prev - mu) / r_prev;
    let raw = omega * r0;
    let z = if raw.is_nan() { 0.0 } else { raw.clamp(0.0, r0.max(0.0)) };
    (omega, z)
}

/// Rounds the relaxed deployment to its top `G` entries and builds a binary
/// association: entries of undeployed sites and entries at most
/// `delta * (column max)` are dropped, then each row keeps the surviving site
/// with the best SINR under the rounded deployment, or falls back to LTE.
pub fn quantize(x_hat: &[f64], a_hat: &[Vec<f64>], delta: f64, geom: &Geometry) -> (Vec<bool>, Association) {
    let x = top_g(x_hat, geom.budget);
    let s = x.len();
    let col_max: Vec<f64> = (0..s).map(|j| a_hat.iter().map(|r| r[j]).fold(0.0, f64::max)).collect();
    let assoc = a_hat
        .iter()
        .enumerate()
        .map(|(t, row)| {
            let mut best: Option<(usize, f64)> = None;
            for j in 0..s {
                if !x[j] || row[j] == 0.0 || row[j] <= delta * col_max[j] {
                    continue;
                }
                let sinr = geom.gnb_sinr(t, j, &x);
                if best.is_none_or(|(_, b)| sinr > b) {
                    best = Some((j, sinr));
                }
            }
            best.map(|(j, _)| j)
        })
        .collect();
    (x, assoc)
}

/// One iteration of the threshold loop.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TauRecord {
    pub state: PlanState,
    /// `(r0 - r*) / (b0 - b*)`; `None` when the denominator vanishes.
    pub ratio: Option<f64>,
    pub throughput: Option<RoutineTrace>,
    pub positioning: Option<RoutineTrace>,
    /// Routine errors absorbed by the loop.
    pub notes: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanResult {
    pub report: PlanReport,
    pub converged: bool,
    /// Iteration whose plan was returned; 0 is the throughput-only start.
    pub best_tau: usize,
    pub bootstrap: RoutineTrace,
    pub iterations: Vec<TauRecord>,
    pub config: PlanConfig,
}

impl PlanResult {
    /// Every routine trace in execution order.
    pub fn routine_traces(&self) -> Vec<&RoutineTrace> {
        let mut v = vec![&self.bootstrap];
        for it in &self.iterations {
            v.extend(it.throughput.iter());
            v.extend(it.positioning.iter());
        }
        v
    }
}

/// Deployment of the `G` sites serving the most test points under full
/// deployment with max-SINR association, and its max-SINR association.
pub fn initial_incumbent(geom: &Geometry) -> Incumbent {
    let all = vec![true; geom.n_sites()];
    let mut served = vec![0.0; geom.n_sites()];
    for j in max_sinr_association(geom, &all).into_iter().flatten() {
        served[j] += 1.0;
    }
    let x = top_g(&served, geom.budget);
    let association = max_sinr_association(geom, &x);
    Incumbent { x, association }
}

fn seeded(cfg: &SolverConfig, tau: usize, which: u64) -> SolverConfig {
    SolverConfig { seed: derive_seed(cfg.seed, &[tau as u64, which]), ..*cfg }
}

/// Best of the quantized association and the row-wise joint optimum for the
/// same deployment.
fn candidate(geom: &Geometry, x: &[bool], quantized: &Association, mu: f64) -> Result<(Association, f64)> {
    let q = joint_value(geom, x, quantized, mu)?.min;
    let joint = association_step(geom, x, AssociationMode::Joint { mu })?;
    let j = joint_value(geom, x, &joint, mu)?.min;
    Ok(if j > q { (joint, j) } else { (quantized.clone(), q) })
}

fn ratio(r0: f64, b0: f64, r: f64, b: f64) -> Option<f64> {
    let den = b0 - b;
    let v = (r0 - r) / den;
    (den != 0.0 && v.is_finite()).then_some(v)
}

fn absorb(e: Error, notes: &mut Vec<String>) -> Result<()> {
    if e.is_infeasibility() {
        notes.push(e.to_string());
        Ok(())
    } else {
        Err(e)
    }
}

/// Plans a deployment maximizing `min_t (r_t - mu b_t)` by alternating the
/// throughput and positioning routines under adaptively tuned thresholds.
/// Returns the best quantized plan seen.
pub fn plan(geom: &Geometry, cfg: &PlanConfig) -> Result<PlanResult> {
    cfg.validate()?;
    let mu = cfg.mu;
    let worst_lte = (0..geom.n_points()).map(|t| geom.lte_peb(t)).filter(|u| u.is_finite()).fold(0.0, f64::max);
    let zeta_b0 = if worst_lte > 0.0 { BOOTSTRAP_PEB_FACTOR * worst_lte } else { f64::INFINITY };
    let b_cap = zeta_b0 * zeta_b0;

    let init = initial_incumbent(geom);
    let thr0 = throughput_routine(geom, zeta_b0, &init, &seeded(&cfg.solver, 0, 1))?;
    let r0 = thr0.min_rate_mbps();
    let b0 = thr0.max_peb_sq();

    let (mut best_assoc, mut best_value) = candidate(geom, &thr0.x, &thr0.association, mu)?;
    let mut best_x = thr0.x.clone();
    let mut best_tau = 0;
    let mut b_floor = b0;
    let (mut r_prev, mut b_prev) = (r0, b0);
    let mut incumbent = Incumbent { x: thr0.x.clone(), association: thr0.association.clone() };
    let mut iterations = Vec::new();
    let mut converged = false;

    for tau in 1..=cfg.max_tau {
        let mut notes = Vec::new();
        let (omega_b, zb_sq) = next_peb_threshold(b_prev, b0, b_floor, b_cap);
        let zeta_b = zb_sq.sqrt();
        let thr = match throughput_routine(geom, zeta_b, &incumbent, &seeded(&cfg.solver, tau, 1)) {
            Ok(o) => Some(o),
            Err(e) => {
                absorb(e, &mut notes)?;
                None
            }
        };
        let (omega_r, zeta_r) = next_rate_threshold(r_prev, mu, r0);
        let pos_start = thr.as_ref().map_or_else(
            || incumbent.clone(),
            |o: &RoutineOutput| Incumbent { x: o.x.clone(), association: o.association.clone() },
        );
        let pos = match positioning_routine(geom, zeta_r * 1e6, &pos_start, &seeded(&cfg.solver, tau, 2)) {
            Ok(o) => Some(o),
            Err(e) => {
                absorb(e, &mut notes)?;
                None
            }
        };

        let mut state =
            PlanState { tau, zeta_r, zeta_b, omega_r, omega_b, r0, b0, r_star: f64::NAN, b_star: f64::NAN };
        let mut rec_ratio = None;
        if let Some(p) = &pos {
            let x_hat: Vec<f64> = p.x.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
            let a_hat: Vec<Vec<f64>> = p
                .association
                .iter()
                .map(|a| (0..geom.n_sites()).map(|j| if *a == Some(j) { 1.0 } else { 0.0 }).collect())
                .collect();
            let (x_star, a_star) = quantize(&x_hat, &a_hat, cfg.solver.delta, geom);
            let jv = joint_value(geom, &x_star, &a_star, mu)?;
            state.r_star = jv.rates.iter().copied().fold(f64::INFINITY, f64::min);
            state.b_star = jv.peb_sq.iter().copied().fold(0.0, f64::max);
            rec_ratio = ratio(r0, b0, state.r_star, state.b_star);

            let (assoc, value) = candidate(geom, &x_star, &a_star, mu)?;
            if value > best_value {
                best_value = value;
                best_x = x_star.clone();
                best_assoc = assoc;
                best_tau = tau;
            }
            b_floor = b_floor.min(p.max_peb_sq());
            b_prev = p.max_peb_sq();
            incumbent = Incumbent { x: x_star, association: a_star };
        }
        if let Some(t) = &thr {
            let (assoc, value) = candidate(geom, &t.x, &t.association, mu)?;
            if value > best_value {
                best_value = value;
                best_x = t.x.clone();
                best_assoc = assoc;
                best_tau = tau;
            }
            r_prev = t.min_rate_mbps();
        }

        let done = rec_ratio.is_some_and(|q| (q - mu).abs() <= cfg.eps())
            || (mu == 0.0 && state.r_star.is_finite() && (r0 - state.r_star).abs() <= cfg.eps());
        iterations.push(TauRecord {
            state,
            ratio: rec_ratio,
            throughput: thr.map(|o| o.trace),
            positioning: pos.map(|o| o.trace),
            notes,
        });
        if done {
            converged = true;
            break;
        }
    }

    let report = PlanReport::evaluate("joint", geom, &best_x, &best_assoc, mu)?;
    Ok(PlanResult { report, converged, best_tau, bootstrap: thr0.trace, iterations, config: *cfg })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn threshold_formulas() {
        let (w, z) = next_rate_threshold(20.0, 10.0, 30.0);
        assert_eq!((w, z), (0.5, 15.0));
        let (w, z) = next_peb_threshold(2.0, 8.0, 0.0, 100.0);
        assert_eq!((w, z), (0.5, 4.0));
        // Below mu the literal threshold would be negative.
        let (w, z) = next_rate_threshold(5.0, 10.0, 30.0);
        assert_eq!((w, z), (-1.0, 0.0));
        // Below one square metre the literal threshold flips sign.
        let (w, z) = next_peb_threshold(0.5, 8.0, 0.2, 100.0);
        assert_eq!((w, z), (-1.0, 0.2));
        let (_, z) = next_peb_threshold(1e9, 1e6, 0.0, 100.0);
        assert_eq!(z, 100.0);
    }
}
