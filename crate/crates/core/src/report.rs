//! Per-point evaluation of a finished plan, shared by every planner, and
//! PEB maps.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{joint_value, Area, Association, Topology};
use crate::peb::{precompute_geometry, Geometry};
use crate::scenarios::grid_test_points;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Tier {
    Lte,
    Nr,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointReport {
    pub index: usize,
    pub x_m: f64,
    pub y_m: f64,
    pub tier: Tier,
    /// Serving candidate site for 5G rows.
    pub site: Option<usize>,
    pub rate_mbps: f64,
    /// `None` when the PEB is unbounded.
    pub peb_m: Option<f64>,
}

/// A deployment, its association and the KPIs they give.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlanReport {
    pub planner: String,
    pub budget: usize,
    pub mu: f64,
    pub x: Vec<bool>,
    pub association: Association,
    pub points: Vec<PointReport>,
    pub min_rate_mbps: f64,
    /// `None` when some point has an unbounded PEB.
    pub max_peb_m: Option<f64>,
    pub avg_peb_m: Option<f64>,
    /// `min_t (rate_t - mu * peb_t^2)`, `None` when unbounded below.
    pub joint_value: Option<f64>,
}

impl PlanReport {
    /// Evaluates `(x, assoc)` after checking the deployment constraints.
    pub fn evaluate(planner: &str, geom: &Geometry, x: &[bool], assoc: &Association, mu: f64) -> Result<PlanReport> {
        let jv = joint_value(geom, x, assoc, mu)?;
        let points: Vec<PointReport> = (0..geom.n_points())
            .map(|t| {
                let p = geom.points[t].position;
                PointReport {
                    index: t,
                    x_m: p.x,
                    y_m: p.y,
                    tier: if assoc[t].is_some() { Tier::Nr } else { Tier::Lte },
                    site: assoc[t],
                    rate_mbps: jv.rates[t],
                    peb_m: jv.peb_sq[t].is_finite().then(|| jv.peb_sq[t].sqrt()),
                }
            })
            .collect();
        let pebs: Option<Vec<f64>> = points.iter().map(|p| p.peb_m).collect();
        let (max_peb_m, avg_peb_m) = match pebs {
            Some(v) => (Some(v.iter().copied().fold(0.0, f64::max)), Some(v.iter().sum::<f64>() / v.len() as f64)),
            None => (None, None),
        };
        Ok(PlanReport {
            planner: planner.to_string(),
            budget: geom.budget,
            mu,
            x: x.to_vec(),
            association: assoc.clone(),
            min_rate_mbps: jv.rates.iter().copied().fold(f64::INFINITY, f64::min),
            max_peb_m,
            avg_peb_m,
            joint_value: jv.min.is_finite().then_some(jv.min),
            points,
        })
    }

    pub fn deployed(&self) -> Vec<usize> {
        (0..self.x.len()).filter(|&j| self.x[j]).collect()
    }

    /// One row per test point: `index,x_m,y_m,tier,site,rate_mbps,peb_m`.
    pub fn write_points_csv<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(out, "index,x_m,y_m,tier,site,rate_mbps,peb_m")?;
        for p in &self.points {
            let tier = match p.tier {
                Tier::Lte => "lte",
                Tier::Nr => "nr",
            };
            let site = p.site.map_or(String::new(), |s| s.to_string());
            writeln!(out, "{},{:.3},{:.3},{},{},{:.6},{}", p.index, p.x_m, p.y_m, tier, site, p.rate_mbps, fmt_opt(p.peb_m))?;
        }
        Ok(())
    }
}

/// Fixed six-decimal rendering, `inf` for unbounded values.
pub fn fmt_opt(v: Option<f64>) -> String {
    match v {
        Some(v) => format!("{v:.6}"),
        None => "inf".to_string(),
    }
}

/// PEB of one map cell under a fixed deployment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PebCell {
    pub x_m: f64,
    pub y_m: f64,
    /// From the deployed gNBs; `None` when unbounded.
    pub nr_peb_m: Option<f64>,
    pub lte_peb_m: Option<f64>,
}

impl PebCell {
    pub fn best_peb_m(&self) -> Option<f64> {
        match (self.nr_peb_m, self.lte_peb_m) {
            (Some(a), Some(b)) => Some(a.min(b)),
            (a, b) => a.or(b),
        }
    }
}

/// PEB over a regular grid covering the topology's area (or the bounding
/// box of its nodes from the origin when no area is set).
pub fn peb_map(topo: &Topology, x: &[bool], spacing: f64) -> Result<Vec<PebCell>> {
    if x.len() != topo.n_sites() {
        return Err(Error::validation("deployment", format!("has {} entries, topology has {} sites", x.len(), topo.n_sites())));
    }
    let area = topo.area.unwrap_or_else(|| {
        let all = topo.enbs.iter().chain(&topo.candidate_sites).chain(&topo.test_points);
        let (w, h) = all.fold((0.0f64, 0.0f64), |(w, h), p| (w.max(p.x), h.max(p.y)));
        Area { width: w.max(spacing), height: h.max(spacing) }
    });
    let mut grid_topo = topo.clone();
    grid_topo.test_points = grid_test_points(area, spacing)?;
    grid_topo.area = Some(area);
    let geom = precompute_geometry(&grid_topo)?;
    let any = x.iter().any(|&b| b);
    Ok((0..geom.n_points())
        .map(|t| {
            let p = geom.points[t].position;
            let nr = if any { geom.nr_peb_sq(t, x).ok().filter(|v| v.is_finite()).map(f64::sqrt) } else { None };
            PebCell { x_m: p.x, y_m: p.y, nr_peb_m: nr, lte_peb_m: geom.points[t].lte_peb }
        })
        .collect())
}

pub fn write_peb_map_csv<W: Write>(cells: &[PebCell], mut out: W) -> Result<()> {
    writeln!(out, "x_m,y_m,nr_peb_m,lte_peb_m,best_peb_m")?;
    for c in cells {
        writeln!(
            out,
            "{:.3},{:.3},{},{},{}",
            c.x_m,
            c.y_m,
            fmt_opt(c.nr_peb_m),
            fmt_opt(c.lte_peb_m),
            fmt_opt(c.best_peb_m())
        )?;
    }
    Ok(())
}
