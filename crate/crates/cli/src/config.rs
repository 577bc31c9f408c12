use std::path::Path;

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use siteplan_core::baselines::DEFAULT_ORACLE_BUDGET;
use siteplan_core::convex::SolverConfig;
use siteplan_core::kpi::PlanConfig;

/// Settings a `--config` file may pin. Command-line flags override them.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub plan: PlanConfig,
    pub budget: Option<usize>,
    pub oracle_max_evals: u128,
    /// Rate floor (Mbit/s) of the distance-invariant baseline.
    pub sdr_toa_rate_threshold_mbps: Option<f64>,
    /// When set, greedy elimination continues below the budget while the min
    /// rate stays at or above this floor (Mbit/s).
    pub bse_rate_floor_mbps: Option<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            plan: PlanConfig::default(),
            budget: None,
            oracle_max_evals: DEFAULT_ORACLE_BUDGET,
            sdr_toa_rate_threshold_mbps: None,
            bse_rate_floor_mbps: None,
        }
    }
}

impl RunConfig {
    pub fn load(path: Option<&Path>) -> Result<RunConfig> {
        let Some(path) = path else { return Ok(RunConfig::default()) };
        let text = std::fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let cfg: RunConfig = serde_json::from_str(&text)
            .map_err(siteplan_core::Error::from)
            .with_context(|| format!("parsing {}", path.display()))?;
        Ok(cfg)
    }

    pub fn apply(&mut self, tpr: Option<f64>, seed: Option<u64>, budget: Option<usize>) {
        if let Some(mu) = tpr {
            self.plan.mu = mu;
        }
        if let Some(s) = seed {
            self.plan.solver = SolverConfig { seed: s, ..self.plan.solver };
        }
        if budget.is_some() {
            self.budget = budget;
        }
    }

    pub fn validate(&self) -> siteplan_core::Result<()> {
        self.plan.validate()
    }
}
