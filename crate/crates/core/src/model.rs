//! Network topology, two-tier radio parameters and the link budget.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::peb::Geometry;

pub const LIGHT_SPEED_M_S: f64 = 299_792_458.0;

/// Thermal noise density, -174 dBm/Hz expressed in W/Hz.
pub const THERMAL_NOISE_PSD_W_HZ: f64 = 3.981_071_705_534_972e-21;

/// Links shorter than this are evaluated at this distance. Keeps the
/// far-field path-loss law and the ranging-noise law away from d -> 0 when a
/// test point coincides with a site.
pub const MIN_LINK_DISTANCE_M: f64 = 1.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Position {
    #[serde(rename = "x_m")]
    pub x: f64,
    #[serde(rename = "y_m")]
    pub y: f64,
}

impl Position {
    pub const fn new(x: f64, y: f64) -> Self {
        Position { x, y }
    }

    pub fn distance(&self, other: &Position) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }

    /// Angle of the vector from `self` to `other` w.r.t. the x axis.
    pub fn bearing_to(&self, other: &Position) -> f64 {
        (other.y - self.y).atan2(other.x - self.x)
    }

    pub fn is_finite(&self) -> bool {
        self.x.is_finite() && self.y.is_finite()
    }
}

/// Ranging-error statistics of one tier: Gaussian noise whose variance grows
/// as `sigma0^2 (d/d0)^alpha_meas`, plus a bias uniform on `[0, lambda_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NoiseModel {
    #[serde(rename = "sigma0_m")]
    pub sigma0: f64,
    #[serde(rename = "d0_m")]
    pub d0: f64,
    pub alpha_meas: f64,
    #[serde(rename = "lambda_max_m")]
    pub lambda_max: f64,
}

impl NoiseModel {
    pub fn validate(&self, field: &str) -> Result<()> {
        let bad = |name: &str, msg: &str| Err(Error::validation(format!("{field}.{name}"), msg));
        if !(self.sigma0 > 0.0 && self.sigma0.is_finite()) {
            return bad("sigma0_m", "must be positive and finite");
        }
        if !(self.d0 > 0.0 && self.d0.is_finite()) {
            return bad("d0_m", "must be positive and finite");
        }
        if !(self.alpha_meas >= 0.0 && self.alpha_meas.is_finite()) {
            return bad("alpha_meas", "must be non-negative and finite");
        }
        if !(self.lambda_max > 0.0 && self.lambda_max.is_finite()) {
            return bad("lambda_max_m", "must be positive and finite");
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TierParams {
    #[serde(rename = "tx_power_w")]
    pub tx_power: f64,
    #[serde(rename = "carrier_freq_hz")]
    pub carrier_freq: f64,
    #[serde(rename = "bandwidth_hz")]
    pub bandwidth: f64,
    pub pathloss_exp: f64,
    #[serde(rename = "shadowing_std_db")]
    pub shadowing_std: f64,
    #[serde(rename = "noise")]
    pub noise_model: NoiseModel,
}

impl TierParams {
    pub fn validate(&self, field: &str) -> Result<()> {
        let positive = [
            ("tx_power_w", self.tx_power),
            ("carrier_freq_hz", self.carrier_freq),
            ("bandwidth_hz", self.bandwidth),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::validation(format!("{field}.{name}"), "must be positive and finite"));
            }
        }
        if !(self.pathloss_exp >= 2.0 && self.pathloss_exp.is_finite()) {
            return Err(Error::validation(format!("{field}.pathloss_exp"), "must be at least 2"));
        }
        if !(self.shadowing_std >= 0.0 && self.shadowing_std.is_finite()) {
            return Err(Error::validation(format!("{field}.shadowing_std_db"), "must be non-negative"));
        }
        self.noise_model.validate(&format!("{field}.noise"))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RadioConstants {
    #[serde(rename = "light_speed_m_s")]
    pub light_speed: f64,
    pub xi: f64,
    #[serde(rename = "noise_psd_w_hz")]
    pub noise_psd: f64,
}

impl Default for RadioConstants {
    fn default() -> Self {
        RadioConstants {
            light_speed: LIGHT_SPEED_M_S,
            xi: 10.0 / std::f64::consts::LN_10,
            noise_psd: THERMAL_NOISE_PSD_W_HZ,
        }
    }
}

/// Rectangular deployment area with its lower-left corner at the origin.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Area {
    #[serde(rename = "width_m")]
    pub width: f64,
    #[serde(rename = "height_m")]
    pub height: f64,
}

impl Area {
    pub fn contains(&self, p: &Position) -> bool {
        (0.0..=self.width).contains(&p.x) && (0.0..=self.height).contains(&p.y)
    }
}

/// How the maximum NLoS bias of a link is chosen.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BiasModel {
    /// Per-tier constant `lambda_max` from the noise model.
    #[default]
    Constant,
    /// `lambda = kappa * shadowing_std_db` for every link of a tier.
    ProportionalToShadowing { kappa: f64 },
}

impl BiasModel {
    pub fn lambda(&self, tier: &TierParams) -> f64 {
        match *self {
            BiasModel::Constant => tier.noise_model.lambda_max,
            BiasModel::ProportionalToShadowing { kappa } => kappa * tier.shadowing_std,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Topology {
    pub enbs: Vec<Position>,
    pub candidate_sites: Vec<Position>,
    pub test_points: Vec<Position>,
    pub lte: TierParams,
    pub nr: TierParams,
    pub budget: usize,
    #[serde(default)]
    pub constants: RadioConstants,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub area: Option<Area>,
    #[serde(default, skip_serializing_if = "is_default_bias")]
    pub bias_model: BiasModel,
}

fn is_default_bias(b: &BiasModel) -> bool {
    *b == BiasModel::Constant
}

impl Topology {
    pub fn n_sites(&self) -> usize {
        self.candidate_sites.len()
    }

    pub fn n_points(&self) -> usize {
        self.test_points.len()
    }

    pub fn n_enbs(&self) -> usize {
        self.enbs.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.candidate_sites.is_empty() {
            return Err(Error::validation("candidate_sites", "at least one candidate site is required"));
        }
        if self.test_points.is_empty() {
            return Err(Error::validation("test_points", "at least one test point is required"));
        }
        if self.budget < 1 || self.budget > self.candidate_sites.len() {
            return Err(Error::validation(
                "budget",
                format!("must lie in [1, {}], got {}", self.candidate_sites.len(), self.budget),
            ));
        }
        for (name, list) in [
            ("enbs", &self.enbs),
            ("candidate_sites", &self.candidate_sites),
            ("test_points", &self.test_points),
        ] {
            for (i, p) in list.iter().enumerate() {
                if !p.is_finite() {
                    return Err(Error::validation(format!("{name}[{i}]"), "non-finite coordinate"));
                }
                if let Some(area) = &self.area {
                    if !area.contains(p) {
                        return Err(Error::validation(format!("{name}[{i}]"), "outside the deployment area"));
                    }
                }
            }
            let mut sorted: Vec<(f64, f64, usize)> = list.iter().enumerate().map(|(i, p)| (p.x, p.y, i)).collect();
            sorted.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.total_cmp(&b.1)));
            for w in sorted.windows(2) {
                if w[0].0 == w[1].0 && w[0].1 == w[1].1 {
                    return Err(Error::validation(
                        format!("{name}[{}]", w[1].2),
                        format!("duplicates position of {name}[{}]", w[0].2),
                    ));
                }
            }
        }
        self.lte.validate("lte")?;
        self.nr.validate("nr")?;
        let c = &self.constants;
        if !(c.light_speed > 0.0 && c.xi > 0.0 && c.noise_psd > 0.0) {
            return Err(Error::validation("constants", "must be positive"));
        }
        if let BiasModel::ProportionalToShadowing { kappa } = self.bias_model {
            for (tier, p) in [("lte", &self.lte), ("nr", &self.nr)] {
                if !(kappa * p.shadowing_std > 0.0) {
                    return Err(Error::validation(
                        "bias_model.kappa",
                        format!("gives a non-positive bias for tier {tier}"),
                    ));
                }
            }
        }
        Ok(())
    }
}

/// Average attenuation under log-normal shadowing.
pub fn channel_gain(tier: &TierParams, consts: &RadioConstants, d: f64) -> Result<f64> {
    if !(d > 0.0) || !d.is_finite() {
        return Err(Error::Domain { what: "link distance", value: d });
    }
    let arg = 4.0 * std::f64::consts::PI * tier.carrier_freq * d / consts.light_speed;
    let s = tier.shadowing_std;
    Ok((-tier.pathloss_exp * arg.ln() - s * s / (2.0 * consts.xi * consts.xi)).exp())
}

/// Gain with the distance floored at [`MIN_LINK_DISTANCE_M`].
pub(crate) fn link_gain(tier: &TierParams, consts: &RadioConstants, d: f64) -> f64 {
    channel_gain(tier, consts, d.max(MIN_LINK_DISTANCE_M)).expect("floored distance is positive")
}

/// Noise power relative to transmit power, `N0 W / P`.
pub fn noise_prime(tier: &TierParams, consts: &RadioConstants) -> f64 {
    consts.noise_psd * tier.bandwidth / tier.tx_power
}

/// Downlink SINR of candidate site `j` at test point `t` when the sites
/// flagged in `x` are active. Site `j` is treated as active regardless of `x[j]`.
pub fn sinr(topo: &Topology, x: &[bool], t: usize, j: usize) -> f64 {
    let p = &topo.test_points[t];
    let gain = |n: usize| link_gain(&topo.nr, &topo.constants, p.distance(&topo.candidate_sites[n]));
    let interference: f64 = (0..topo.n_sites()).filter(|&n| n != j && x[n]).map(gain).sum();
    gain(j) / (interference + noise_prime(&topo.nr, &topo.constants))
}

pub fn shannon_rate(bandwidth: f64, sinr: f64) -> f64 {
    bandwidth * sinr.ln_1p() / std::f64::consts::LN_2
}

pub fn gnb_rate(topo: &Topology, x: &[bool], t: usize, j: usize) -> f64 {
    shannon_rate(topo.nr.bandwidth, sinr(topo, x, t, j))
}

/// Best LTE link at a test point, all eNBs transmitting.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LteLink {
    /// bit/s; zero when there is no eNB.
    pub rate: f64,
    pub sinr: f64,
    pub server: Option<usize>,
}

impl LteLink {
    pub fn available(&self) -> bool {
        self.server.is_some()
    }
}

pub(crate) fn best_lte_link(gains: &[f64], noise: f64, bandwidth: f64) -> LteLink {
    let total: f64 = gains.iter().sum();
    let mut best = LteLink { rate: 0.0, sinr: 0.0, server: None };
    for (m, &g) in gains.iter().enumerate() {
        let s = g / (total - g + noise);
        if best.server.is_none() || s > best.sinr {
            best = LteLink { rate: shannon_rate(bandwidth, s), sinr: s, server: Some(m) };
        }
    }
    best
}

pub fn lte_best_rate(topo: &Topology, t: usize) -> LteLink {
    let p = &topo.test_points[t];
    let gains: Vec<f64> = topo.enbs.iter().map(|e| link_gain(&topo.lte, &topo.constants, p.distance(e))).collect();
    best_lte_link(&gains, noise_prime(&topo.lte, &topo.constants), topo.lte.bandwidth)
}

/// Serving choice per test point: `Some(j)` for candidate site `j`, `None` for LTE.
pub type Association = Vec<Option<usize>>;

/// Binary association matrix (T x S) of an [`Association`].
pub fn association_matrix(assoc: &[Option<usize>], n_sites: usize) -> Vec<Vec<f64>> {
    assoc
        .iter()
        .map(|row| {
            let mut r = vec![0.0; n_sites];
            if let Some(j) = row {
                r[*j] = 1.0;
            }
            r
        })
        .collect()
}

pub fn deployment_vector(x: &[bool]) -> Vec<f64> {
    x.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect()
}

/// One broken planning constraint.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub constraint: &'static str,
    pub detail: String,
}

/// Checks a (possibly non-binary) plan against the planning constraints:
/// association only to deployed sites, at most one server per test point,
/// at most `budget` deployed sites, and binary entries.
pub fn check_constraints(x: &[f64], a: &[Vec<f64>], budget: usize) -> Vec<Violation> {
    const TOL: f64 = 1e-9;
    let mut out = Vec::new();
    let binary = |v: f64| (v - 0.0).abs() <= TOL || (v - 1.0).abs() <= TOL;
    for (j, &v) in x.iter().enumerate() {
        if !binary(v) {
            out.push(Violation { constraint: "binary", detail: format!("x[{j}] = {v}") });
        }
    }
    for (t, row) in a.iter().enumerate() {
        if row.len() != x.len() {
            out.push(Violation {
                constraint: "association_shape",
                detail: format!("row {t} has {} entries for {} sites", row.len(), x.len()),
            });
            continue;
        }
        for (j, &v) in row.iter().enumerate() {
            if !binary(v) {
                out.push(Violation { constraint: "binary", detail: format!("a[{t}][{j}] = {v}") });
            }
            if v > x[j] + TOL {
                out.push(Violation {
                    constraint: "served_by_deployed",
                    detail: format!("a[{t}][{j}] = {v} exceeds x[{j}] = {}", x[j]),
                });
            }
        }
        let s: f64 = row.iter().sum();
        if s > 1.0 + TOL {
            out.push(Violation { constraint: "single_server", detail: format!("row {t} sums to {s}") });
        }
    }
    let total: f64 = x.iter().sum();
    if total > budget as f64 + TOL {
        out.push(Violation { constraint: "budget", detail: format!("{total} sites deployed, budget {budget}") });
    }
    out
}

/// Checks a binary plan; returns the first violation as an error.
pub fn check_plan(x: &[bool], assoc: &[Option<usize>], budget: usize) -> Result<()> {
    let a = association_matrix(assoc, x.len());
    for (t, row) in assoc.iter().enumerate() {
        if let Some(j) = row {
            if *j >= x.len() {
                return Err(Error::ConstraintViolation {
                    constraint: "served_by_deployed",
                    detail: format!("test point {t} served by unknown site {j}"),
                });
            }
        }
    }
    match check_constraints(&deployment_vector(x), &a, budget).into_iter().next() {
        None => Ok(()),
        Some(v) => Err(Error::ConstraintViolation { constraint: v.constraint, detail: v.detail }),
    }
}

/// Per-test-point rate, squared PEB and joint value of a binary plan.
#[derive(Debug, Clone, PartialEq)]
pub struct JointValue {
    /// Mbit/s.
    pub rates: Vec<f64>,
    /// m^2; infinite where fewer than two usable anchors exist.
    pub peb_sq: Vec<f64>,
    /// `rate - mu * peb_sq` per test point.
    pub values: Vec<f64>,
    pub min: f64,
}

/// `r_t - mu b_t` with `mu` in Mbit/s per m^2. For `mu = 0` the rate alone,
/// so an unbounded PEB does not turn the value into NaN.
pub fn row_value(rate_mbps: f64, peb_sq: f64, mu: f64) -> f64 {
    if mu == 0.0 { rate_mbps } else { rate_mbps - mu * peb_sq }
}

pub fn joint_value(geom: &Geometry, x: &[bool], assoc: &[Option<usize>], mu: f64) -> Result<JointValue> {
    if x.len() != geom.n_sites() || assoc.len() != geom.n_points() {
        return Err(Error::ConstraintViolation {
            constraint: "shape",
            detail: format!(
                "plan has {} sites and {} rows, geometry has {} and {}",
                x.len(),
                assoc.len(),
                geom.n_sites(),
                geom.n_points()
            ),
        });
    }
    check_plan(x, assoc, geom.budget)?;
    let mut rates = Vec::with_capacity(assoc.len());
    let mut peb_sq = Vec::with_capacity(assoc.len());
    for (t, row) in assoc.iter().enumerate() {
        let (r, b) = geom.row_metrics(t, x, *row);
        rates.push(r * 1e-6);
        peb_sq.push(b);
    }
    let values: Vec<f64> = rates.iter().zip(&peb_sq).map(|(&r, &b)| row_value(r, b, mu)).collect();
    let min = values.iter().copied().fold(f64::INFINITY, f64::min);
    Ok(JointValue { rates, peb_sq, values, min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn tier(f: f64, alpha: f64, shadow: f64) -> TierParams {
        TierParams {
            tx_power: 20.0,
            carrier_freq: f,
            bandwidth: 100e6,
            pathloss_exp: alpha,
            shadowing_std: shadow,
            noise_model: NoiseModel { sigma0: 1e-4, d0: 1.0, alpha_meas: alpha, lambda_max: 1.0 },
        }
    }

    #[test]
    fn gain_is_one_at_unit_argument() {
        let consts = RadioConstants::default();
        let f = 1e9;
        let d = LIGHT_SPEED_M_S / (4.0 * std::f64::consts::PI * f);
        let g = channel_gain(&tier(f, 2.0, 0.0), &consts, d).unwrap();
        assert_relative_eq!(g, 1.0, epsilon = 1e-14);
    }

    #[test]
    fn gain_matches_high_precision_value() {
        // 50-digit evaluation of the same formula.
        let g = channel_gain(&tier(3.5e9, 3.5, 9.0), &RadioConstants::default(), 100.0).unwrap();
        assert_relative_eq!(g, 3.0538859806582920736e-16, max_relative = 1e-12);
    }

    #[test]
    fn gain_power_law_ratio() {
        let consts = RadioConstants::default();
        for alpha in [2.0, 2.5, 3.0, 3.5, 4.2] {
            let t = tier(1.8e9, alpha, 0.0);
            for d in [1.0, 37.0, 512.0] {
                let ratio = channel_gain(&t, &consts, 2.0 * d).unwrap() / channel_gain(&t, &consts, d).unwrap();
                assert_relative_eq!(ratio, 2f64.powf(-alpha), max_relative = 1e-12);
            }
        }
    }

    #[test]
    fn gain_rejects_non_positive_distance() {
        let consts = RadioConstants::default();
        assert!(matches!(channel_gain(&tier(1e9, 2.0, 0.0), &consts, 0.0), Err(Error::Domain { .. })));
        assert!(channel_gain(&tier(1e9, 2.0, 0.0), &consts, -3.0).is_err());
    }

    #[test]
    fn noise_constant_is_minus_174_dbm() {
        let dbm = 10.0 * (THERMAL_NOISE_PSD_W_HZ * 1e3).log10();
        assert_relative_eq!(dbm, -174.0, epsilon = 1e-12);
        assert_relative_eq!(RadioConstants::default().xi, 10.0 / 10f64.ln(), epsilon = 0.0);
    }

    #[test]
    fn shannon_rate_identities() {
        assert_relative_eq!(shannon_rate(100e6, 3.0), 200e6, max_relative = 1e-15);
        assert_eq!(shannon_rate(100e6, 0.0), 0.0);
    }

    #[test]
    fn best_lte_link_single_enb() {
        // gain 1, noise 1 -> SINR 1 -> one bit/s/Hz
        let l = best_lte_link(&[1.0], 1.0, 20e6);
        assert_relative_eq!(l.rate, 20e6, max_relative = 1e-15);
        assert_eq!(l.server, Some(0));
        let none = best_lte_link(&[], 1.0, 20e6);
        assert_eq!(none.rate, 0.0);
        assert!(!none.available());
    }

    #[test]
    fn constraint_checker_flags_each_rule() {
        let x = vec![1.0, 0.0, 1.0];
        let ok = vec![vec![1.0, 0.0, 0.0], vec![0.0, 0.0, 0.0]];
        assert!(check_constraints(&x, &ok, 2).is_empty());
        let to_idle = vec![vec![0.0, 1.0, 0.0]];
        assert_eq!(check_constraints(&x, &to_idle, 2)[0].constraint, "served_by_deployed");
        let two = vec![vec![1.0, 0.0, 1.0]];
        assert_eq!(check_constraints(&x, &two, 2)[0].constraint, "single_server");
        assert_eq!(check_constraints(&x, &ok, 1)[0].constraint, "budget");
        let frac = vec![0.5, 0.0, 1.0];
        assert_eq!(check_constraints(&frac, &[], 2)[0].constraint, "binary");
    }
}
