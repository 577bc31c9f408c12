//! Fixtures shared by the planning benchmarks.

use siteplan_core::peb::{precompute_geometry, Geometry};
use siteplan_core::scenarios::{generate, ScenarioKind, ScenarioSpec};

/// Geometry of a default synthetic scenario with the given budget.
pub fn geometry(kind: ScenarioKind, seed: u64, budget: usize) -> Geometry {
    let mut spec = ScenarioSpec::new(kind, seed);
    spec.budget = Some(budget);
    let topo = generate(&spec).expect("default scenarios are valid");
    precompute_geometry(&topo).expect("generated topologies have finite geometry")
}
