use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{row_value, Association};
use crate::peb::Geometry;

/// Relative slack when comparing a row against its threshold.
const THRESHOLD_SLACK: f64 = 1e-12;

/// What the association step optimizes, row by row.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "mode", rename_all = "snake_case")]
pub enum AssociationMode {
    /// Maximize the rate subject to squared PEB at most the threshold (m^2).
    Throughput { peb_threshold_sq: f64 },
    /// Minimize the squared PEB subject to rate at least the threshold (bit/s).
    Positioning { rate_threshold: f64 },
    /// Maximize `rate (Mbit/s) - mu * squared PEB`.
    Joint { mu: f64 },
}

#[derive(Debug, Clone, Copy)]
struct RowOption {
    server: Option<usize>,
    rate: f64,
    peb_sq: f64,
}

fn options<'a>(geom: &'a Geometry, t: usize, x: &'a [bool], nr_peb_sq: f64) -> impl Iterator<Item = RowOption> + 'a {
    let active: Vec<usize> = (0..x.len()).filter(|&j| x[j]).collect();
    let lte = RowOption { server: None, rate: geom.lte_rate(t), peb_sq: geom.lte_peb_sq(t) };
    // gNBs first in index order, LTE last: with "replace only if strictly
    // better" this prefers gNBs and then low indices on ties.
    active
        .into_iter()
        .map(move |j| RowOption { server: Some(j), rate: geom.gnb_rate(t, j, x), peb_sq: nr_peb_sq })
        .chain(std::iter::once(lte))
}

/// Best serving option of row `t`, or `None` if no option meets the row's
/// constraint.
pub fn row_choice(geom: &Geometry, t: usize, x: &[bool], mode: AssociationMode) -> Option<Option<usize>> {
    choose(geom, t, x, mode).map(|o| o.server)
}

fn choose(geom: &Geometry, t: usize, x: &[bool], mode: AssociationMode) -> Option<RowOption> {
    let nr_peb_sq = if x.iter().any(|&b| b) { geom.nr_peb_sq(t, x).unwrap_or(f64::INFINITY) } else { f64::INFINITY };
    let mut best: Option<RowOption> = None;
    for o in options(geom, t, x, nr_peb_sq) {
        let better = match mode {
            AssociationMode::Throughput { peb_threshold_sq } => {
                if !(o.peb_sq <= peb_threshold_sq * (1.0 + THRESHOLD_SLACK)) {
                    continue;
                }
                best.is_none_or(|b| o.rate > b.rate)
            }
            AssociationMode::Positioning { rate_threshold } => {
                if !(o.rate >= rate_threshold * (1.0 - THRESHOLD_SLACK)) {
                    continue;
                }
                best.is_none_or(|b| o.peb_sq < b.peb_sq || (o.peb_sq == b.peb_sq && o.rate > b.rate))
            }
            AssociationMode::Joint { mu } => {
                let v = row_value(o.rate * 1e-6, o.peb_sq, mu);
                best.is_none_or(|b| v > row_value(b.rate * 1e-6, b.peb_sq, mu))
            }
        };
        if better {
            best = Some(o);
        }
    }
    best
}

/// Exact association for a fixed deployment. Rows are independent, so the
/// row-wise optimum solves the max-min (or min-max) problem exactly.
pub fn association_step(geom: &Geometry, x: &[bool], mode: AssociationMode) -> Result<Association> {
    (0..geom.n_points())
        .map(|t| row_choice(geom, t, x, mode).ok_or(Error::InfeasibleRow { point: t }))
        .collect()
}

/// Rows of an association together with their rates and squared PEBs.
#[derive(Debug, Clone, PartialEq)]
pub struct AssociatedRows {
    pub association: Association,
    /// bit/s.
    pub rates: Vec<f64>,
    /// m^2.
    pub peb_sq: Vec<f64>,
}

impl AssociatedRows {
    /// Smallest rate in Mbit/s.
    pub fn min_rate_mbps(&self) -> f64 {
        self.rates.iter().copied().fold(f64::INFINITY, f64::min) * 1e-6
    }

    pub fn max_peb_sq(&self) -> f64 {
        self.peb_sq.iter().copied().fold(0.0, f64::max)
    }
}

/// [`association_step`] that also returns the chosen rows' metrics.
pub fn associate(geom: &Geometry, x: &[bool], mode: AssociationMode) -> Result<AssociatedRows> {
    let n = geom.n_points();
    let mut out = AssociatedRows {
        association: Vec::with_capacity(n),
        rates: Vec::with_capacity(n),
        peb_sq: Vec::with_capacity(n),
    };
    for t in 0..n {
        let o = choose(geom, t, x, mode).ok_or(Error::InfeasibleRow { point: t })?;
        out.association.push(o.server);
        out.rates.push(o.rate);
        out.peb_sq.push(o.peb_sq);
    }
    Ok(out)
}

/// Hybrid max-SINR association: the best gNB when its SINR is at least the
/// best LTE SINR, LTE otherwise.
pub fn max_sinr_association(geom: &Geometry, x: &[bool]) -> Association {
    (0..geom.n_points())
        .map(|t| {
            let mut best: Option<(usize, f64)> = None;
            for j in (0..x.len()).filter(|&j| x[j]) {
                let s = geom.gnb_sinr(t, j, x);
                if best.is_none_or(|(_, b)| s > b) {
                    best = Some((j, s));
                }
            }
            match best {
                Some((j, s)) if s >= geom.points[t].lte_sinr => Some(j),
                _ => None,
            }
        })
        .collect()
}
