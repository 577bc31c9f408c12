//! Relaxed subproblems: the max-min rate SDR, the PEB feasibility SDR used
//! under bisection, the quadratic-transform auxiliary update and Gaussian
//! randomization.

pub(crate) mod barrier;
mod bisection;
mod randomize;
mod sdr;

pub use bisection::{bisection, bisection_iterations, BisectionOutcome};
pub use randomize::{gaussian_randomize, stable_factorize, top_g, Randomized};
pub use sdr::{solve_feasibility_sdr, solve_maximin_sdr, FeasibilitySpec, MaximinSpec, SdrInstance, SdrRow};

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Eigenvalue floor below which a matrix is not treated as PSD.
pub const PSD_FLOOR: f64 = -1e-8;

/// Which form of the budget constraint the relaxation used.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BudgetMode {
    /// `trace(X) = G`.
    Equality,
    /// `trace(X) <= G`, used when the equality form is infeasible.
    AtMost,
}

/// Solution of a relaxed subproblem.
#[derive(Debug, Clone)]
pub struct RelaxedState {
    /// S x S, rows and columns of sites excluded from the relaxation are zero.
    pub x: DMatrix<f64>,
    /// `diag(X)`.
    pub x_bar: Vec<f64>,
    /// T x S association used by the subproblem.
    pub a_relax: Vec<Vec<f64>>,
    /// T x S quadratic-transform variables (zero where unused).
    pub y_aux: Vec<Vec<f64>>,
    /// Max-min objective in bit/s/Hz of the 5G bandwidth; NaN for
    /// feasibility solves.
    pub objective: f64,
    pub budget_mode: BudgetMode,
    /// The barrier method reached its gap target.
    pub converged: bool,
}

impl RelaxedState {
    /// Checks the PSD floor, box and budget invariants.
    pub fn check_invariants(&self, budget: usize) -> Result<()> {
        let min_eig = self.x.clone().symmetric_eigenvalues().min();
        if min_eig < PSD_FLOOR {
            return Err(Error::NotPsd { min_eigenvalue: min_eig });
        }
        for (j, &d) in self.x_bar.iter().enumerate() {
            if !(-1e-6..=1.0 + 1e-6).contains(&d) {
                return Err(Error::ConstraintViolation { constraint: "diag_box", detail: format!("X[{j}][{j}] = {d}") });
            }
        }
        let trace: f64 = self.x_bar.iter().sum();
        let ok = match self.budget_mode {
            BudgetMode::Equality => (trace - budget as f64).abs() <= 1e-6,
            BudgetMode::AtMost => trace <= budget as f64 + 1e-6,
        };
        if !ok {
            return Err(Error::ConstraintViolation { constraint: "trace", detail: format!("trace {trace}, budget {budget}") });
        }
        Ok(())
    }
}

/// Tuning of the relaxed solvers and the routines built on them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Lower end of the bisection bracket on the squared PEB (m^2). When
    /// unset it is a fraction of the upper end.
    pub eta_lo: Option<f64>,
    /// Upper end of the bracket (m^2). When unset it is the incumbent's
    /// largest 5G squared PEB.
    pub eta_hi: Option<f64>,
    /// Bisection tolerance as a fraction of the bracket width.
    pub eps_bisect: f64,
    /// Gaussian randomization samples.
    pub n_rand: usize,
    /// Association pruning factor of the quantization step.
    pub delta: f64,
    /// Relative objective change that counts as converged.
    pub tol_inner: f64,
    pub max_inner: usize,
    pub max_outer: usize,
    pub seed: u64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        SolverConfig {
            eta_lo: None,
            eta_hi: None,
            eps_bisect: 1.0 / 256.0,
            n_rand: 200,
            delta: 0.1,
            tol_inner: 1e-4,
            max_inner: 10,
            max_outer: 10,
            seed: 0,
        }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if let (Some(lo), Some(hi)) = (self.eta_lo, self.eta_hi) {
            if !(0.0 < lo && lo < hi) {
                return Err(Error::validation("solver.eta_lo", "need 0 < eta_lo < eta_hi"));
            }
        }
        if let Some(lo) = self.eta_lo {
            if !(lo > 0.0) {
                return Err(Error::validation("solver.eta_lo", "must be positive"));
            }
        }
        if !(self.eps_bisect > 0.0 && self.eps_bisect < 1.0) {
            return Err(Error::validation("solver.eps_bisect", "must lie in (0, 1)"));
        }
        if self.n_rand < 1 {
            return Err(Error::validation("solver.n_rand", "must be at least 1"));
        }
        if !(self.delta > 0.0 && self.delta < 1.0) {
            return Err(Error::validation("solver.delta", "must lie in (0, 1)"));
        }
        if !(self.tol_inner > 0.0) {
            return Err(Error::validation("solver.tol_inner", "must be positive"));
        }
        if self.max_inner < 1 || self.max_outer < 1 {
            return Err(Error::validation("solver.max_inner", "iteration caps must be at least 1"));
        }
        Ok(())
    }
}

/// Maximizer of `2 y sqrt(g + g_int + n) - y^2 (g_int + n)` over `y`.
pub fn optimal_y(g: f64, g_int: f64, n_prime: f64) -> f64 {
    (g + g_int + n_prime).sqrt() / (g_int + n_prime)
}

/// The quadratic-transform surrogate of `1 + g / (g_int + n)`.
pub fn transformed_ratio(y: f64, g: f64, g_int: f64, n_prime: f64) -> f64 {
    2.0 * y * (g + g_int + n_prime).sqrt() - y * y * (g_int + n_prime)
}
