use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{nu_weight, peb, peb_quadratic_form};
use crate::error::{Error, Result};
use crate::model::{best_lte_link, link_gain, noise_prime, shannon_rate, Position, Topology, MIN_LINK_DISTANCE_M};

pub const GEOMETRY_SCHEMA_VERSION: u32 = 1;

/// Deployment-independent quantities of one test point.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointGeometry {
    pub position: Position,
    /// Distance to each candidate site, meters.
    pub distances: Vec<f64>,
    /// Bearing from the test point to each candidate site, radians.
    pub angles: Vec<f64>,
    /// Information weight of each candidate-site link, 1/m^2.
    pub nu: Vec<f64>,
    /// Strictly upper-triangular S x S matrix, row-major:
    /// `f[i*S + j] = nu_i nu_j sin^2(theta_j - theta_i)` for `i < j`.
    pub peb_form: Vec<f64>,
    /// 5G channel gain of each candidate site.
    pub gains: Vec<f64>,
    /// PEB of the LTE tier, meters; `None` when it is unbounded.
    pub lte_peb: Option<f64>,
    /// Best LTE throughput, bit/s; zero without eNBs.
    pub lte_rate: f64,
    pub lte_sinr: f64,
}

/// Cached geometry of a topology. Everything the planners need, so they never
/// recompute weights or gains inside solver loops.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Geometry {
    pub schema_version: u32,
    pub sites: Vec<Position>,
    pub budget: usize,
    /// 5G `N0 W / P`.
    pub nr_noise: f64,
    pub nr_bandwidth: f64,
    pub lte_bandwidth: f64,
    pub points: Vec<PointGeometry>,
}

pub fn precompute_geometry(topo: &Topology) -> Result<Geometry> {
    topo.validate()?;
    let nr_lambda = topo.bias_model.lambda(&topo.nr);
    let lte_lambda = topo.bias_model.lambda(&topo.lte);
    let s = topo.n_sites();
    let points: Vec<Result<PointGeometry>> = topo
        .test_points
        .par_iter()
        .map(|p| {
            let mut distances = Vec::with_capacity(s);
            let mut angles = Vec::with_capacity(s);
            let mut nu = Vec::with_capacity(s);
            let mut gains = Vec::with_capacity(s);
            for site in &topo.candidate_sites {
                let d = p.distance(site).max(MIN_LINK_DISTANCE_M);
                distances.push(d);
                angles.push(p.bearing_to(site));
                nu.push(nu_weight(d, nr_lambda, &topo.nr.noise_model)?);
                gains.push(link_gain(&topo.nr, &topo.constants, d));
            }
            let mut peb_form = vec![0.0; s * s];
            for i in 0..s {
                for j in (i + 1)..s {
                    let sn = (angles[j] - angles[i]).sin();
                    peb_form[i * s + j] = nu[i] * nu[j] * sn * sn;
                }
            }

            let mut anchors = Vec::with_capacity(topo.n_enbs());
            let mut lte_gains = Vec::with_capacity(topo.n_enbs());
            for e in &topo.enbs {
                let d = p.distance(e).max(MIN_LINK_DISTANCE_M);
                anchors.push((*e, nu_weight(d, lte_lambda, &topo.lte.noise_model)?));
                lte_gains.push(link_gain(&topo.lte, &topo.constants, d));
            }
            let lte_peb = match peb(&anchors, p) {
                Ok(v) => Some(v),
                Err(Error::UnboundedPeb { .. }) => None,
                Err(e) => return Err(e),
            };
            let link = best_lte_link(&lte_gains, noise_prime(&topo.lte, &topo.constants), topo.lte.bandwidth);
            Ok(PointGeometry {
                position: *p,
                distances,
                angles,
                nu,
                peb_form,
                gains,
                lte_peb,
                lte_rate: link.rate,
                lte_sinr: link.sinr,
            })
        })
        .collect();
    Ok(Geometry {
        schema_version: GEOMETRY_SCHEMA_VERSION,
        sites: topo.candidate_sites.clone(),
        budget: topo.budget,
        nr_noise: noise_prime(&topo.nr, &topo.constants),
        nr_bandwidth: topo.nr.bandwidth,
        lte_bandwidth: topo.lte.bandwidth,
        points: points.into_iter().collect::<Result<_>>()?,
    })
}

impl Geometry {
    pub fn n_sites(&self) -> usize {
        self.sites.len()
    }

    pub fn n_points(&self) -> usize {
        self.points.len()
    }

    /// LTE PEB of test point `t`, `+inf` when unbounded.
    pub fn lte_peb(&self, t: usize) -> f64 {
        self.points[t].lte_peb.unwrap_or(f64::INFINITY)
    }

    pub fn lte_peb_sq(&self, t: usize) -> f64 {
        let u = self.lte_peb(t);
        u * u
    }

    pub fn lte_rate(&self, t: usize) -> f64 {
        self.points[t].lte_rate
    }

    /// Diagonal of `V_t`.
    pub fn weights(&self, t: usize) -> &[f64] {
        &self.points[t].nu
    }

    /// SINR of site `j` at test point `t` with the sites in `x` active
    /// (site `j` counted as active).
    pub fn gnb_sinr(&self, t: usize, j: usize, x: &[bool]) -> f64 {
        let g = &self.points[t].gains;
        let mut interference = 0.0;
        for n in 0..g.len() {
            if n != j && x[n] {
                interference += g[n];
            }
        }
        g[j] / (interference + self.nr_noise)
    }

    pub fn gnb_rate(&self, t: usize, j: usize, x: &[bool]) -> f64 {
        shannon_rate(self.nr_bandwidth, self.gnb_sinr(t, j, x))
    }

    /// Squared 5G PEB over the active sites in `x`.
    pub fn nr_peb_sq(&self, t: usize, x: &[bool]) -> Result<f64> {
        let xf: Vec<f64> = x.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
        peb_quadratic_form(&self.points[t].nu, &self.points[t].peb_form, &xf)
    }

    /// (rate bit/s, squared PEB m^2) of test point `t` when served by
    /// `server` (`None` = LTE). Unbounded PEBs are reported as `+inf`.
    pub fn row_metrics(&self, t: usize, x: &[bool], server: Option<usize>) -> (f64, f64) {
        match server {
            None => (self.lte_rate(t), self.lte_peb_sq(t)),
            Some(j) => (self.gnb_rate(t, j, x), self.nr_peb_sq(t, x).unwrap_or(f64::INFINITY)),
        }
    }

    pub fn save_json(&self, path: &std::path::Path) -> Result<()> {
        let text = serde_json::to_string(self)?;
        std::fs::write(path, text)?;
        Ok(())
    }

    pub fn load_json(path: &std::path::Path) -> Result<Geometry> {
        let g: Geometry = serde_json::from_str(&std::fs::read_to_string(path)?)?;
        if g.schema_version != GEOMETRY_SCHEMA_VERSION {
            return Err(Error::validation(
                "schema_version",
                format!("expected {GEOMETRY_SCHEMA_VERSION}, found {}", g.schema_version),
            ));
        }
        Ok(g)
    }
}
