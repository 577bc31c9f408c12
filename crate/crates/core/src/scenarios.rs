//! Synthetic highway, suburban and dense-urban topologies, topology files
//! and test-point grids.

use std::io::Write;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{Area, NoiseModel, Position, TierParams, Topology};
use crate::rng::{stream_rng, Stream};

pub const TOPOLOGY_SCHEMA_VERSION: u32 = 1;

/// Half-width of the band around the highway axis where base stations go.
const HIGHWAY_JITTER_M: f64 = 50.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ScenarioKind {
    #[serde(rename = "H", alias = "highway")]
    Highway,
    #[serde(rename = "SU", alias = "suburban")]
    Suburban,
    #[serde(rename = "DU", alias = "dense_urban")]
    DenseUrban,
}

impl ScenarioKind {
    pub fn parse(s: &str) -> Option<ScenarioKind> {
        match s.to_ascii_lowercase().as_str() {
            "h" | "highway" => Some(ScenarioKind::Highway),
            "su" | "suburban" => Some(ScenarioKind::Suburban),
            "du" | "dense-urban" | "dense_urban" => Some(ScenarioKind::DenseUrban),
            _ => None,
        }
    }

    pub fn label(self) -> &'static str {
        match self {
            ScenarioKind::Highway => "H",
            ScenarioKind::Suburban => "SU",
            ScenarioKind::DenseUrban => "DU",
        }
    }

    /// Path-loss exponent shared by both tiers.
    pub fn pathloss_exp(self) -> f64 {
        match self {
            ScenarioKind::Highway => 2.5,
            ScenarioKind::Suburban => 3.0,
            ScenarioKind::DenseUrban => 3.5,
        }
    }

    /// Shadowing standard deviations in dB, (LTE, 5G).
    pub fn shadowing_db(self) -> (f64, f64) {
        match self {
            ScenarioKind::Highway => (3.0, 5.0),
            ScenarioKind::Suburban => (5.0, 7.0),
            ScenarioKind::DenseUrban => (6.0, 9.0),
        }
    }

    pub fn default_area(self) -> Area {
        match self {
            ScenarioKind::Highway => Area { width: 5000.0, height: 500.0 },
            ScenarioKind::Suburban => Area { width: 3000.0, height: 3000.0 },
            ScenarioKind::DenseUrban => Area { width: 1500.0, height: 1500.0 },
        }
    }

    /// Estimated densities per km^2, (eNBs, candidate sites). Chosen so that
    /// the dense-urban default has about 20 candidate sites and 10 eNBs.
    pub fn default_densities(self) -> (f64, f64) {
        match self {
            ScenarioKind::Highway => (2.0, 4.0),
            ScenarioKind::Suburban => (0.9, 1.8),
            ScenarioKind::DenseUrban => (4.444, 8.889),
        }
    }

    pub fn default_spacing(self) -> f64 {
        match self {
            ScenarioKind::Highway => 250.0,
            ScenarioKind::Suburban => 300.0,
            ScenarioKind::DenseUrban => 150.0,
        }
    }

    pub fn lte_params(self) -> TierParams {
        TierParams {
            tx_power: 30.0,
            carrier_freq: 1.8e9,
            bandwidth: 20e6,
            pathloss_exp: self.pathloss_exp(),
            shadowing_std: self.shadowing_db().0,
            noise_model: NoiseModel { sigma0: 1e-3, d0: 1.0, alpha_meas: self.pathloss_exp(), lambda_max: 10.0 },
        }
    }

    pub fn nr_params(self) -> TierParams {
        TierParams {
            tx_power: 20.0,
            carrier_freq: 3.5e9,
            bandwidth: 100e6,
            pathloss_exp: self.pathloss_exp(),
            shadowing_std: self.shadowing_db().1,
            noise_model: NoiseModel { sigma0: 1e-4, d0: 1.0, alpha_meas: self.pathloss_exp(), lambda_max: 1.0 },
        }
    }
}

/// Recipe for a synthetic topology. Unset fields take the kind's defaults.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    pub kind: ScenarioKind,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<Area>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub enb_density_per_km2: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cs_density_per_km2: Option<f64>,
    /// Exact counts; take precedence over the densities.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_enbs: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n_sites: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub test_grid_spacing_m: Option<f64>,
    /// Defaults to every candidate site.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub budget: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lte: Option<TierParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub nr: Option<TierParams>,
}

impl ScenarioSpec {
    pub fn new(kind: ScenarioKind, seed: u64) -> Self {
        ScenarioSpec {
            kind,
            seed,
            area: None,
            enb_density_per_km2: None,
            cs_density_per_km2: None,
            n_enbs: None,
            n_sites: None,
            test_grid_spacing_m: None,
            budget: None,
            lte: None,
            nr: None,
        }
    }

    pub fn area(&self) -> Area {
        self.area.unwrap_or_else(|| self.kind.default_area())
    }

    /// (eNBs, candidate sites) this spec will place.
    pub fn counts(&self) -> (usize, usize) {
        let area = self.area();
        let km2 = area.width * area.height * 1e-6;
        let (de, dc) = self.kind.default_densities();
        let e = self.n_enbs.unwrap_or_else(|| (self.enb_density_per_km2.unwrap_or(de) * km2).round() as usize);
        let s = self.n_sites.unwrap_or_else(|| (self.cs_density_per_km2.unwrap_or(dc) * km2).round() as usize);
        (e, s)
    }

    pub fn validate(&self) -> Result<()> {
        let a = self.area();
        if !(a.width > 0.0 && a.height > 0.0 && a.width.is_finite() && a.height.is_finite()) {
            return Err(Error::validation("area", "must be positive"));
        }
        for (name, d) in [("enb_density_per_km2", self.enb_density_per_km2), ("cs_density_per_km2", self.cs_density_per_km2)] {
            if let Some(d) = d {
                if !(d > 0.0 && d.is_finite()) {
                    return Err(Error::validation(name, "must be positive"));
                }
            }
        }
        if let Some(sp) = self.test_grid_spacing_m {
            if !(sp > 0.0 && sp.is_finite()) {
                return Err(Error::validation("test_grid_spacing_m", "must be positive"));
            }
        }
        let (_, s) = self.counts();
        if s == 0 {
            return Err(Error::validation("cs_density_per_km2", "yields no candidate site"));
        }
        if let Some(g) = self.budget {
            if g < 1 || g > s {
                return Err(Error::validation("budget", format!("must lie in [1, {s}], got {g}")));
            }
        }
        Ok(())
    }
}

/// Places eNBs and candidate sites uniformly at random (within a band
/// around the axis for the highway) and test points on a regular grid.
pub fn generate(spec: &ScenarioSpec) -> Result<Topology> {
    spec.validate()?;
    let area = spec.area();
    let (n_enbs, n_sites) = spec.counts();
    let spacing = spec.test_grid_spacing_m.unwrap_or_else(|| spec.kind.default_spacing());
    let test_points = grid_test_points(area, spacing)?;
    if test_points.is_empty() {
        return Err(Error::validation("test_grid_spacing_m", "yields no test point"));
    }

    let mut rng = stream_rng(spec.seed, Stream::Scenario);
    let draw = |rng: &mut rand_chacha::ChaCha8Rng| match spec.kind {
        ScenarioKind::Highway => {
            let mid = 0.5 * area.height;
            let half = HIGHWAY_JITTER_M.min(mid);
            Position::new(rng.random_range(0.0..=area.width), mid + rng.random_range(-half..=half))
        }
        _ => Position::new(rng.random_range(0.0..=area.width), rng.random_range(0.0..=area.height)),
    };
    let enbs: Vec<Position> = (0..n_enbs).map(|_| draw(&mut rng)).collect();
    let candidate_sites: Vec<Position> = (0..n_sites).map(|_| draw(&mut rng)).collect();

    let budget = spec.budget.unwrap_or(n_sites);
    let topo = Topology {
        enbs,
        candidate_sites,
        test_points,
        lte: spec.lte.unwrap_or_else(|| spec.kind.lte_params()),
        nr: spec.nr.unwrap_or_else(|| spec.kind.nr_params()),
        budget,
        constants: Default::default(),
        area: Some(area),
        bias_model: Default::default(),
    };
    topo.validate()?;
    Ok(topo)
}

/// Cell centres of a `spacing` lattice over the area, clipped to it, row by
/// row from the origin.
pub fn grid_test_points(area: Area, spacing: f64) -> Result<Vec<Position>> {
    if !(spacing > 0.0 && spacing.is_finite()) {
        return Err(Error::Domain { what: "grid spacing", value: spacing });
    }
    let nx = (area.width / spacing).ceil() as usize;
    let ny = (area.height / spacing).ceil() as usize;
    let mut pts = Vec::with_capacity(nx * ny);
    for j in 0..ny {
        let y = ((j as f64 + 0.5) * spacing).min(area.height);
        for i in 0..nx {
            let x = ((i as f64 + 0.5) * spacing).min(area.width);
            pts.push(Position::new(x, y));
        }
    }
    Ok(pts)
}

#[derive(Serialize)]
struct FileOut<'a> {
    schema_version: u32,
    topology: &'a Topology,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct FileIn {
    schema_version: u32,
    topology: Topology,
}

pub fn to_json(topo: &Topology) -> Result<String> {
    let mut s = serde_json::to_string_pretty(&FileOut { schema_version: TOPOLOGY_SCHEMA_VERSION, topology: topo })?;
    s.push('\n');
    Ok(s)
}

/// Parses and validates a topology document.
pub fn from_json(text: &str) -> Result<Topology> {
    let file: FileIn = serde_json::from_str(text)?;
    if file.schema_version != TOPOLOGY_SCHEMA_VERSION {
        return Err(Error::validation(
            "schema_version",
            format!("unsupported version {} (expected {TOPOLOGY_SCHEMA_VERSION})", file.schema_version),
        ));
    }
    file.topology.validate()?;
    Ok(file.topology)
}

pub fn save(topo: &Topology, path: &Path) -> Result<()> {
    std::fs::write(path, to_json(topo)?)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Topology> {
    from_json(&std::fs::read_to_string(path)?)
}

/// Test points as `index,x_m,y_m` CSV.
pub fn write_points_csv<W: Write>(points: &[Position], mut out: W) -> Result<()> {
    writeln!(out, "index,x_m,y_m")?;
    for (i, p) in points.iter().enumerate() {
        writeln!(out, "{i},{:.3},{:.3}", p.x, p.y)?;
    }
    Ok(())
}
