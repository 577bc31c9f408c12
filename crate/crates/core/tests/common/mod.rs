#![allow(dead_code)]

use siteplan_core::model::{Area, Topology};
use siteplan_core::peb::{precompute_geometry, Geometry};
use siteplan_core::scenarios::{generate, ScenarioKind, ScenarioSpec};

/// Small dense-urban instance: 6 candidate sites, 4 eNBs and 8 test points on
/// a 600 x 300 m block.
pub fn small_spec(seed: u64, budget: usize) -> ScenarioSpec {
    let mut spec = ScenarioSpec::new(ScenarioKind::DenseUrban, seed);
    spec.area = Some(Area { width: 600.0, height: 300.0 });
    spec.n_enbs = Some(4);
    spec.n_sites = Some(6);
    spec.test_grid_spacing_m = Some(150.0);
    spec.budget = Some(budget);
    spec
}

pub fn small(seed: u64, budget: usize) -> (Topology, Geometry) {
    let topo = generate(&small_spec(seed, budget)).unwrap();
    let geom = precompute_geometry(&topo).unwrap();
    (topo, geom)
}

pub fn default_instance(kind: ScenarioKind, seed: u64, budget: usize) -> (Topology, Geometry) {
    let mut spec = ScenarioSpec::new(kind, seed);
    spec.budget = Some(budget);
    let topo = generate(&spec).unwrap();
    let geom = precompute_geometry(&topo).unwrap();
    (topo, geom)
}

/// All subsets of `0..s` with exactly `k` elements.
pub fn k_subsets(s: usize, k: usize) -> Vec<Vec<bool>> {
    (0u32..(1 << s))
        .filter(|m| m.count_ones() as usize == k)
        .map(|m| (0..s).map(|j| m >> j & 1 == 1).collect())
        .collect()
}
