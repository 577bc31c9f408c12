use nalgebra::DMatrix;

use super::barrier::{Concave, Lin, Options, Problem, QuadPiece};
use super::{BudgetMode, RelaxedState};
use crate::error::{Error, Result};
use crate::peb::Geometry;

/// Constraint violation (in units of the normalized rows) still accepted as
/// feasible.
const FEAS_TOL: f64 = 1e-7;

/// Off-diagonal correlation of the starting matrix.
const START_CORRELATION: f64 = 0.9;

/// One test point of a relaxed subproblem.
#[derive(Debug, Clone)]
pub struct SdrRow {
    /// Serving candidate site, `None` for LTE.
    pub serving: Option<usize>,
    /// LTE throughput in bit/s per Hz of 5G bandwidth.
    pub lte_rate: f64,
    pub lte_peb_sq: f64,
    /// 5G gains divided by the 5G `N0 W / P`.
    pub gains: Vec<f64>,
    pub nu: Vec<f64>,
    /// Strictly upper triangular, row-major S x S.
    pub peb_form: Vec<f64>,
}

#[derive(Debug, Clone)]
pub struct SdrInstance {
    pub n_sites: usize,
    pub budget: usize,
    pub rows: Vec<SdrRow>,
}

impl SdrInstance {
    pub fn from_geometry(geom: &Geometry, assoc: &[Option<usize>]) -> Self {
        let rows = geom
            .points
            .iter()
            .enumerate()
            .map(|(t, p)| SdrRow {
                serving: assoc[t],
                lte_rate: p.lte_rate / geom.nr_bandwidth,
                lte_peb_sq: geom.lte_peb_sq(t),
                gains: p.gains.iter().map(|g| g / geom.nr_noise).collect(),
                nu: p.nu.clone(),
                peb_form: p.peb_form.clone(),
            })
            .collect();
        SdrInstance { n_sites: geom.n_sites(), budget: geom.budget, rows }
    }

    pub fn set_association(&mut self, assoc: &[Option<usize>]) {
        for (row, a) in self.rows.iter_mut().zip(assoc) {
            row.serving = *a;
        }
    }

    /// Normalized interference `sum_{n != j} g_n d_n` seen by row `t`.
    pub fn interference(&self, t: usize, j: usize, d: &[f64]) -> f64 {
        let g = &self.rows[t].gains;
        (0..self.n_sites).filter(|&n| n != j).map(|n| g[n] * d[n]).sum()
    }
}

/// Max-min subproblem: maximize the smallest transformed rate.
#[derive(Debug, Clone, Copy)]
pub struct MaximinSpec<'a> {
    pub instance: &'a SdrInstance,
    /// Quadratic-transform variable of each row (ignored for LTE rows).
    pub y: &'a [f64],
    /// Squared PEB threshold for rows served by a gNB.
    pub peb_threshold_sq: Option<f64>,
    pub budget_mode: BudgetMode,
    /// Diagonal the starting point should lean towards.
    pub start: Option<&'a [f64]>,
}

/// PEB feasibility check at a fixed level.
#[derive(Debug, Clone, Copy)]
pub struct FeasibilitySpec<'a> {
    pub instance: &'a SdrInstance,
    /// Minimum spectral efficiency (bit/s/Hz) of rows served by a gNB.
    pub rate_threshold: Option<f64>,
    pub budget_mode: BudgetMode,
    pub start: Option<&'a [f64]>,
}

struct Layout {
    /// local -> global site, ascending.
    local: Vec<usize>,
    ones: Vec<usize>,
    free: Vec<usize>,
    /// (bound on the sum of free diagonal entries, equality?)
    trace: Option<(f64, bool)>,
}

fn layout(inst: &SdrInstance, mode: BudgetMode) -> Result<Layout> {
    let s = inst.n_sites;
    let mut forced = vec![false; s];
    for row in &inst.rows {
        if let Some(j) = row.serving {
            forced[j] = true;
        }
    }
    let n_forced = forced.iter().filter(|&&f| f).count();
    if n_forced > inst.budget {
        return Err(Error::Infeasible(format!("{n_forced} serving sites exceed the budget of {}", inst.budget)));
    }
    let need = inst.budget - n_forced;
    let others: Vec<usize> = (0..s).filter(|&j| !forced[j]).collect();
    let equality = mode == BudgetMode::Equality;
    let mut pinned = forced.clone();
    let mut free_global = Vec::new();
    let mut trace = None;
    if need > 0 {
        if equality && need == others.len() {
            for &j in &others {
                pinned[j] = true;
            }
        } else {
            free_global = others.clone();
            if need < others.len() {
                trace = Some((need as f64, equality));
            }
        }
    }
    let local: Vec<usize> = (0..s).filter(|&j| pinned[j] || free_global.contains(&j)).collect();
    let ones = (0..local.len()).filter(|&l| pinned[local[l]]).collect();
    let free = (0..local.len()).filter(|&l| !pinned[local[l]]).collect();
    Ok(Layout { local, ones, free, trace })
}

fn base_problem(lay: &Layout) -> Problem {
    let mut p = Problem::new(lay.local.len(), 1);
    for &l in &lay.ones {
        p.equalities.push(Lin { coeffs: vec![(p.svec.diag(l), 1.0)], rhs: 1.0 });
    }
    if let Some((bound, equality)) = lay.trace {
        let row = Lin { coeffs: lay.free.iter().map(|&l| (p.svec.diag(l), 1.0)).collect(), rhs: bound };
        if equality {
            p.equalities.push(row);
        } else {
            p.inequalities.push(row);
        }
    }
    for &l in &lay.free {
        p.inequalities.push(Lin { coeffs: vec![(p.svec.diag(l), 1.0)], rhs: 1.0 });
    }
    p
}

/// Strictly feasible diagonal mixing a uniform point with `hint`.
fn start_diagonal(lay: &Layout, hint: Option<&[f64]>, weight: f64) -> Vec<f64> {
    let mut d = vec![1.0; lay.local.len()];
    if lay.free.is_empty() {
        return d;
    }
    let nf = lay.free.len() as f64;
    let uniform = match lay.trace {
        Some((bound, true)) => bound / nf,
        Some((bound, false)) => 0.5 * bound / nf,
        None => 0.5,
    };
    let hinted: Option<Vec<f64>> = hint.and_then(|h| {
        let v: Vec<f64> = lay.free.iter().map(|&l| h[lay.local[l]].clamp(0.0, 1.0)).collect();
        let sum: f64 = v.iter().sum();
        match lay.trace {
            Some((bound, true)) if (sum - bound).abs() > 1e-9 => None,
            Some((bound, false)) if sum > bound + 1e-9 => None,
            _ => Some(v),
        }
    });
    for (k, &l) in lay.free.iter().enumerate() {
        d[l] = match &hinted {
            Some(h) => (1.0 - weight) * uniform + weight * h[k],
            None => uniform,
        };
    }
    d
}

fn start_vector(p: &Problem, d: &[f64]) -> Vec<f64> {
    let n = d.len();
    let mut v = vec![0.0; p.n_vars];
    for i in 0..n {
        for k in i..n {
            let c = if i == k { 1.0 } else { START_CORRELATION };
            v[p.svec.idx(i, k)] = c * (d[i] * d[k]).sqrt();
        }
    }
    v
}

fn normalized(coeffs: Vec<(usize, f64)>, rhs: f64) -> Lin {
    let scale = coeffs.iter().map(|c| c.1.abs()).fold(rhs.abs(), f64::max);
    if scale > 0.0 {
        Lin { coeffs: coeffs.into_iter().map(|(k, c)| (k, c / scale)).collect(), rhs: rhs / scale }
    } else {
        Lin { coeffs, rhs }
    }
}

/// `sum_j nu_j X_jj - eta sum_{i<j} F_ij X_ij <= 0`.
fn peb_row(row: &SdrRow, lay: &Layout, p: &Problem, s: usize, eta: f64) -> Lin {
    let mut coeffs = Vec::new();
    for (i, &gi) in lay.local.iter().enumerate() {
        coeffs.push((p.svec.diag(i), row.nu[gi]));
        for (k, &gk) in lay.local.iter().enumerate().skip(i + 1) {
            let f = row.peb_form[gi * s + gk];
            if f > 0.0 {
                coeffs.push((p.svec.idx(i, k), -eta * f));
            }
        }
    }
    normalized(coeffs, 0.0)
}

fn rate_piece(row: &SdrRow, j: usize, y: f64, lay: &Layout, p: &Problem) -> QuadPiece {
    let terms = lay
        .local
        .iter()
        .enumerate()
        .filter(|&(_, &g)| g != j && row.gains[g] > 0.0)
        .map(|(l, &g)| (p.svec.diag(l), row.gains[g]))
        .collect();
    QuadPiece { weight: 1.0, y, signal: row.gains[j], base: 1.0, terms }
}

enum PhaseOne {
    Strict(Vec<f64>),
    /// Feasible only up to the returned violation.
    Weak(Vec<f64>, f64),
    Infeasible,
}

fn phase_one(base: &Problem, soft: &[Lin], guards: &[QuadPiece], mut v: Vec<f64>, halt_margin: f64) -> PhaseOne {
    let m = base.svec.len();
    let violation = soft.iter().map(|r| r.eval(&v) - r.rhs).fold(f64::NEG_INFINITY, f64::max);
    if soft.is_empty() || violation < -halt_margin.min(1e-9) {
        return PhaseOne::Strict(v);
    }
    let mut p1 = base.clone();
    for r in soft {
        let mut coeffs = r.coeffs.clone();
        coeffs.push((m, -1.0));
        p1.inequalities.push(Lin { coeffs, rhs: r.rhs });
    }
    p1.inequalities.push(Lin { coeffs: vec![(m, -1.0)], rhs: 1.0 });
    p1.concave.extend(guards.iter().cloned().map(Concave::Positive));
    p1.objective = vec![(m, 1.0)];
    v[m] = violation.max(-0.5) + 1.0;
    let theta = p1.barrier_terms();
    let opts = Options { gap_tol: 1e-9, tau0: theta, ..Options::default() };
    let out = p1.solve(v, opts, |v, tau, centred| v[m] < -halt_margin || (centred && v[m] - theta / tau > FEAS_TOL));
    let sigma = out.v[m];
    if sigma < 0.0 {
        PhaseOne::Strict(out.v)
    } else if sigma <= FEAS_TOL {
        PhaseOne::Weak(out.v, sigma)
    } else {
        PhaseOne::Infeasible
    }
}

fn relaxed_state(
    inst: &SdrInstance,
    lay: &Layout,
    p: &Problem,
    v: &[f64],
    y: Option<&[f64]>,
    objective: f64,
    budget_mode: BudgetMode,
    converged: bool,
) -> RelaxedState {
    let s = inst.n_sites;
    let mut x = DMatrix::zeros(s, s);
    for (i, &gi) in lay.local.iter().enumerate() {
        for (k, &gk) in lay.local.iter().enumerate() {
            x[(gi, gk)] = v[p.svec.idx(i, k)];
        }
    }
    let x_bar = (0..s).map(|j| x[(j, j)]).collect();
    let mut a_relax = vec![vec![0.0; s]; inst.rows.len()];
    let mut y_aux = vec![vec![0.0; s]; inst.rows.len()];
    for (t, row) in inst.rows.iter().enumerate() {
        if let Some(j) = row.serving {
            a_relax[t][j] = 1.0;
            if let Some(y) = y {
                y_aux[t][j] = y[t];
            }
        }
    }
    RelaxedState { x, x_bar, a_relax, y_aux, objective, budget_mode, converged }
}

/// Maximizes the smallest quadratic-transform rate over the relaxed
/// deployment, with the association and auxiliary variables held fixed.
pub fn solve_maximin_sdr(spec: &MaximinSpec) -> Result<RelaxedState> {
    let inst = spec.instance;
    let lay = layout(inst, spec.budget_mode)?;
    let base = base_problem(&lay);
    let m = base.svec.len();

    let mut pieces = Vec::new();
    for (t, row) in inst.rows.iter().enumerate() {
        if let Some(j) = row.serving {
            pieces.push(rate_piece(row, j, spec.y[t], &lay, &base));
        }
    }
    let soft: Vec<Lin> = match spec.peb_threshold_sq {
        Some(eta) => inst
            .rows
            .iter()
            .filter(|r| r.serving.is_some())
            .map(|r| peb_row(r, &lay, &base, inst.n_sites, eta))
            .collect(),
        None => Vec::new(),
    };

    // The transformed terms are only defined where q > 0; lean towards the
    // linearization point until the start is inside.
    let mut v0 = None;
    for w in [0.9, 0.99, 0.999, 0.5, 0.0] {
        let cand = start_vector(&base, &start_diagonal(&lay, spec.start, w));
        if pieces.iter().all(|p| p.value(&cand).is_some_and(|q| q > 0.0)) {
            v0 = Some(cand);
            break;
        }
    }
    let v0 = v0.ok_or_else(|| Error::Infeasible("no starting point inside the transformed-rate domain".into()))?;

    let (mut v, relax) = match phase_one(&base, &soft, &pieces, v0, 1e-3) {
        PhaseOne::Strict(v) => (v, 0.0),
        PhaseOne::Weak(v, sigma) => (v, sigma + 1e-9),
        PhaseOne::Infeasible => return Err(Error::Infeasible("PEB constraints cannot be met".into())),
    };

    let mut p2 = base.clone();
    for r in &soft {
        p2.inequalities.push(Lin { coeffs: r.coeffs.clone(), rhs: r.rhs + relax });
    }
    let mut cap = f64::INFINITY;
    for row in &inst.rows {
        if row.serving.is_none() {
            p2.inequalities.push(Lin { coeffs: vec![(m, 1.0)], rhs: row.lte_rate });
            cap = cap.min(row.lte_rate);
        }
    }
    for piece in &pieces {
        let q = piece.value(&v).expect("start inside the domain");
        cap = cap.min(q.log2());
        p2.concave.push(Concave::Rate { pieces: vec![piece.clone()], s: m });
    }
    p2.objective = vec![(m, -1.0)];
    v[m] = cap - 1.0;
    let theta = p2.barrier_terms();
    let out = p2.solve(v, Options { gap_tol: 1e-9, tau0: theta, ..Options::default() }, |_, _, _| false);
    let objective = out.v[m];
    Ok(relaxed_state(inst, &lay, &p2, &out.v, Some(spec.y), objective, spec.budget_mode, out.converged))
}

/// Checks whether some relaxed deployment keeps every gNB-served row's
/// squared PEB at most `eta` and its rate above the threshold.
/// `Ok(None)` means infeasible; solver trouble is also reported that way.
pub fn solve_feasibility_sdr(eta: f64, spec: &FeasibilitySpec) -> Result<Option<RelaxedState>> {
    let inst = spec.instance;
    let lay = match layout(inst, spec.budget_mode) {
        Ok(l) => l,
        Err(Error::Infeasible(_)) => return Ok(None),
        Err(e) => return Err(e),
    };
    let base = base_problem(&lay);
    let served: Vec<(&SdrRow, usize)> = inst.rows.iter().filter_map(|r| r.serving.map(|j| (r, j))).collect();
    if !served.is_empty() && !(eta > 0.0) {
        return Ok(None);
    }
    let mut soft: Vec<Lin> = served.iter().map(|(r, _)| peb_row(r, &lay, &base, inst.n_sites, eta)).collect();
    if let Some(rate) = spec.rate_threshold {
        let kappa = rate.exp2() - 1.0;
        for (r, j) in &served {
            let slack = r.gains[*j] - kappa;
            if slack <= 0.0 {
                return Ok(None);
            }
            let coeffs: Vec<(usize, f64)> = lay
                .local
                .iter()
                .enumerate()
                .filter(|&(_, &g)| g != *j && r.gains[g] > 0.0)
                .map(|(l, &g)| (base.svec.diag(l), kappa * r.gains[g]))
                .collect();
            if !coeffs.is_empty() {
                soft.push(normalized(coeffs, slack));
            }
        }
    }
    let v0 = start_vector(&base, &start_diagonal(&lay, spec.start, 0.9));
    let v = match phase_one(&base, &soft, &[], v0, 1e-3) {
        PhaseOne::Strict(v) | PhaseOne::Weak(v, _) => v,
        PhaseOne::Infeasible => return Ok(None),
    };
    Ok(Some(relaxed_state(inst, &lay, &base, &v, None, f64::NAN, spec.budget_mode, true)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    fn row(serving: Option<usize>, gains: Vec<f64>, nu: Vec<f64>, angles: &[f64]) -> SdrRow {
        let s = gains.len();
        let mut peb_form = vec![0.0; s * s];
        for i in 0..s {
            for j in (i + 1)..s {
                peb_form[i * s + j] = nu[i] * nu[j] * (angles[j] - angles[i]).sin().powi(2);
            }
        }
        SdrRow { serving, lte_rate: 0.5, lte_peb_sq: 100.0, gains, nu, peb_form }
    }

    #[test]
    fn singleton_site() {
        let inst = SdrInstance { n_sites: 1, budget: 1, rows: vec![row(Some(0), vec![3.0], vec![1.0], &[0.0])] };
        let y = [optimal(3.0, 0.0)];
        let spec = MaximinSpec { instance: &inst, y: &y, peb_threshold_sq: None, budget_mode: BudgetMode::Equality, start: None };
        let st = solve_maximin_sdr(&spec).unwrap();
        assert_relative_eq!(st.x[(0, 0)], 1.0, epsilon = 1e-12);
        assert_relative_eq!(st.objective, 2.0, epsilon = 1e-6);
    }

    fn optimal(g: f64, gi: f64) -> f64 {
        super::super::optimal_y(g, gi, 1.0)
    }

    #[test]
    fn two_sites_full_budget_diagonal_is_pinned() {
        let angles = [0.0, 1.5];
        let inst = SdrInstance {
            n_sites: 2,
            budget: 2,
            rows: vec![row(Some(0), vec![4.0, 4.0], vec![1.0, 1.0], &angles)],
        };
        let y = [optimal(4.0, 4.0)];
        let spec = MaximinSpec { instance: &inst, y: &y, peb_threshold_sq: None, budget_mode: BudgetMode::Equality, start: None };
        let st = solve_maximin_sdr(&spec).unwrap();
        assert_relative_eq!(st.x_bar[0], 1.0, epsilon = 1e-9);
        assert_relative_eq!(st.x_bar[1], 1.0, epsilon = 1e-9);
        st.check_invariants(2).unwrap();
        // a PEB threshold at the rank-one boundary pins the off-diagonal too
        let eta = 2.0 / (1.5f64.sin().powi(2));
        let spec = MaximinSpec { peb_threshold_sq: Some(eta), ..spec };
        let st = solve_maximin_sdr(&spec).unwrap();
        assert_relative_eq!(st.x[(0, 1)], 1.0, epsilon = 1e-3);
    }

    #[test]
    fn feasibility_extremes() {
        let angles = [0.0, 2.0, 4.0];
        let inst = SdrInstance {
            n_sites: 3,
            budget: 2,
            rows: vec![row(Some(1), vec![1.0, 5.0, 2.0], vec![1.0, 2.0, 3.0], &angles)],
        };
        let spec = FeasibilitySpec { instance: &inst, rate_threshold: Some(0.01), budget_mode: BudgetMode::Equality, start: None };
        assert!(solve_feasibility_sdr(1e9, &spec).unwrap().is_some());
        assert!(solve_feasibility_sdr(0.0, &spec).unwrap().is_none());
        assert!(solve_feasibility_sdr(1e-6, &spec).unwrap().is_none());
        let st = solve_feasibility_sdr(1e9, &spec).unwrap().unwrap();
        st.check_invariants(2).unwrap();
    }
}
