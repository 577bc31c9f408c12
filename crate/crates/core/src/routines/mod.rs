//! Alternating deployment/association routines: max-min throughput under a
//! PEB threshold, and min-max PEB under a rate threshold.

mod association;
mod positioning;
mod throughput;

pub use association::{associate, association_step, max_sinr_association, row_choice, AssociatedRows, AssociationMode};
pub use positioning::positioning_routine;
pub use throughput::throughput_routine;

use serde::{Deserialize, Serialize};

use crate::convex::BudgetMode;
use crate::model::Association;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoutineKind {
    Throughput,
    Positioning,
}

impl RoutineKind {
    pub(crate) fn tag(self) -> u64 {
        match self {
            RoutineKind::Throughput => 1,
            RoutineKind::Positioning => 2,
        }
    }
}

/// Why the outer loop stopped.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Termination {
    /// Relative objective change below tolerance twice in a row.
    Stalled,
    /// The outer iteration cap was reached first.
    OuterCap,
}

/// One outer iteration.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OuterRecord {
    pub k: usize,
    /// Incumbent objective after the iteration: the smallest rate in Mbit/s
    /// for throughput, the largest squared PEB in m^2 for positioning.
    /// `None` while no feasible deployment is known.
    pub objective: Option<f64>,
    pub inner_iterations: usize,
    pub inner_cap_hit: bool,
    /// Relaxed max-min value in bit/s/Hz (throughput only).
    pub relaxed_objective: Option<f64>,
    /// Squared PEB level returned by bisection (positioning only).
    pub eta: Option<f64>,
    pub bisection_calls: usize,
    pub budget_mode: Option<BudgetMode>,
    pub infeasible_solves: usize,
    pub feasible_samples: usize,
    pub randomization_failures: usize,
    /// No candidate beat the incumbent.
    pub kept_incumbent: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoutineTrace {
    pub routine: RoutineKind,
    /// PEB threshold in m (throughput) or rate threshold in Mbit/s
    /// (positioning).
    pub threshold: f64,
    pub records: Vec<OuterRecord>,
    pub termination: Termination,
}

impl RoutineTrace {
    pub fn outer_iterations(&self) -> usize {
        self.records.len()
    }

    pub fn converged(&self) -> bool {
        self.termination == Termination::Stalled
    }
}

/// Deployment and association a routine starts from.
#[derive(Debug, Clone, PartialEq)]
pub struct Incumbent {
    pub x: Vec<bool>,
    pub association: Association,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RoutineOutput {
    pub x: Vec<bool>,
    pub association: Association,
    /// bit/s per test point.
    pub rates: Vec<f64>,
    /// m^2 per test point.
    pub peb_sq: Vec<f64>,
    /// Same units as [`OuterRecord::objective`].
    pub objective: f64,
    pub trace: RoutineTrace,
}

impl RoutineOutput {
    pub fn min_rate_mbps(&self) -> f64 {
        self.rates.iter().copied().fold(f64::INFINITY, f64::min) * 1e-6
    }

    pub fn max_peb_sq(&self) -> f64 {
        self.peb_sq.iter().copied().fold(0.0, f64::max)
    }
}

/// Tracks the relative-change stopping rule shared by both routines.
#[derive(Debug, Default)]
struct StallCounter {
    previous: Option<f64>,
    consecutive: usize,
}

impl StallCounter {
    /// Feeds the objective after an iteration; true once the change stayed
    /// below `tol` for two iterations in a row.
    fn update(&mut self, objective: Option<f64>, tol: f64) -> bool {
        let stalled = match (self.previous, objective) {
            (Some(a), Some(b)) => a == b || (b - a).abs() <= tol * a.abs().max(b.abs()),
            _ => false,
        };
        self.consecutive = if stalled { self.consecutive + 1 } else { 0 };
        self.previous = objective;
        self.consecutive >= 2
    }
}
