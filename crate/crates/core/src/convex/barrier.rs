//! Primal log-barrier path following for problems with one PSD block.
//!
//! Variables are `v = (svec(X), extras)`, where `svec` packs the upper
//! triangle of the symmetric matrix `X` (entry `(i, j)` stored once).
//! Supported constraints: linear equalities, linear inequalities, and
//! concave constraints built from the quadratic-transform rate terms.

use nalgebra::{DMatrix, DVector};

use std::f64::consts::LN_2;

#[derive(Debug, Clone)]
pub(crate) struct Svec {
    n: usize,
    pairs: Vec<(usize, usize)>,
    index: Vec<usize>,
}

impl Svec {
    pub fn new(n: usize) -> Self {
        let mut pairs = Vec::with_capacity(n * (n + 1) / 2);
        let mut index = vec![0; n * n];
        for i in 0..n {
            for j in i..n {
                index[i * n + j] = pairs.len();
                index[j * n + i] = pairs.len();
                pairs.push((i, j));
            }
        }
        Svec { n, pairs, index }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn idx(&self, i: usize, j: usize) -> usize {
        self.index[i * self.n + j]
    }

    pub fn diag(&self, i: usize) -> usize {
        self.idx(i, i)
    }

    pub fn matrix(&self, v: &[f64]) -> DMatrix<f64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (k, &(i, j)) in self.pairs.iter().enumerate() {
            m[(i, j)] = v[k];
            m[(j, i)] = v[k];
        }
        m
    }

    #[cfg(test)]
    pub fn pack(&self, m: &DMatrix<f64>) -> Vec<f64> {
        self.pairs.iter().map(|&(i, j)| m[(i, j)]).collect()
    }
}

/// `coeffs . v <= rhs` (or `= rhs` when used as an equality).
#[derive(Debug, Clone)]
pub(crate) struct Lin {
    pub coeffs: Vec<(usize, f64)>,
    pub rhs: f64,
}

impl Lin {
    pub fn eval(&self, v: &[f64]) -> f64 {
        self.coeffs.iter().map(|&(k, c)| c * v[k]).sum()
    }
}

/// `q(d) = 2 y sqrt(signal + D) - y^2 D` with `D = base + sum_k w_k v_k`.
#[derive(Debug, Clone)]
pub(crate) struct QuadPiece {
    pub weight: f64,
    pub y: f64,
    pub signal: f64,
    pub base: f64,
    pub terms: Vec<(usize, f64)>,
}

impl QuadPiece {
    fn denominator(&self, v: &[f64]) -> f64 {
        self.base + self.terms.iter().map(|&(k, w)| w * v[k]).sum::<f64>()
    }

    /// (q, dq/dD, d2q/dD2) at `v`; `None` outside the domain `signal + D > 0`.
    fn eval(&self, v: &[f64]) -> Option<(f64, f64, f64)> {
        let d = self.denominator(v);
        let lam = self.signal + d;
        if !(lam > 0.0) {
            return None;
        }
        let r = lam.sqrt();
        let q = 2.0 * self.y * r - self.y * self.y * d;
        Some((q, self.y / r - self.y * self.y, -0.5 * self.y / (lam * r)))
    }

    pub fn value(&self, v: &[f64]) -> Option<f64> {
        self.eval(v).map(|e| e.0)
    }
}

#[derive(Debug, Clone)]
pub(crate) enum Concave {
    /// `v[s] < sum_p weight_p log2 q_p(v)`.
    Rate { pieces: Vec<QuadPiece>, s: usize },
    /// `q(v) > 0`.
    Positive(QuadPiece),
}

impl Concave {
    /// Slack of the constraint; `None` outside the domain.
    fn slack(&self, v: &[f64]) -> Option<f64> {
        match self {
            Concave::Rate { pieces, s } => {
                let mut f = 0.0;
                for p in pieces {
                    let q = p.value(v)?;
                    if !(q > 0.0) {
                        return None;
                    }
                    f += p.weight * q.ln() / LN_2;
                }
                Some(f - v[*s])
            }
            Concave::Positive(p) => p.value(v),
        }
    }

    /// Adds the gradient and Hessian of `-log slack` to `g` and `h`.
    fn accumulate(&self, v: &[f64], g: &mut DVector<f64>, h: &mut DMatrix<f64>) -> Option<()> {
        let phi = self.slack(v)?;
        if !(phi > 0.0) {
            return None;
        }
        // grad(phi) as a sparse vector; Hessian of phi = -sum gamma_p w_p w_p^T
        let mut grad: Vec<(usize, f64)> = Vec::new();
        let mut curv: Vec<(f64, &[(usize, f64)])> = Vec::new();
        match self {
            Concave::Rate { pieces, s } => {
                for p in pieces {
                    let (q, dq, d2q) = p.eval(v)?;
                    let c = p.weight / LN_2;
                    let beta = c * dq / q;
                    for &(k, w) in &p.terms {
                        grad.push((k, beta * w));
                    }
                    curv.push((c * (dq * dq / (q * q) - d2q / q), &p.terms));
                }
                grad.push((*s, -1.0));
            }
            Concave::Positive(p) => {
                let (_, dq, d2q) = p.eval(v)?;
                for &(k, w) in &p.terms {
                    grad.push((k, dq * w));
                }
                curv.push((-d2q, &p.terms));
            }
        }
        for &(k, gk) in &grad {
            g[k] -= gk / phi;
        }
        for &(k, gk) in &grad {
            for &(l, gl) in &grad {
                h[(k, l)] += gk * gl / (phi * phi);
            }
        }
        for (gamma, terms) in curv {
            let scale = gamma / phi;
            for &(k, wk) in terms {
                for &(l, wl) in terms {
                    h[(k, l)] += scale * wk * wl;
                }
            }
        }
        Some(())
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Problem {
    pub svec: Svec,
    pub n_vars: usize,
    pub equalities: Vec<Lin>,
    pub inequalities: Vec<Lin>,
    pub concave: Vec<Concave>,
    /// Minimized.
    pub objective: Vec<(usize, f64)>,
}

#[derive(Debug, Clone, Copy)]
pub(crate) struct Options {
    pub gap_tol: f64,
    pub tau0: f64,
    pub tau_factor: f64,
    pub max_newton: usize,
}

impl Default for Options {
    fn default() -> Self {
        Options { gap_tol: 1e-8, tau0: 1.0, tau_factor: 12.0, max_newton: 600 }
    }
}

#[derive(Debug, Clone)]
pub(crate) struct Outcome {
    pub v: Vec<f64>,
    /// Reached the duality-gap target.
    pub converged: bool,
}

impl Problem {
    pub fn new(n: usize, extras: usize) -> Self {
        let svec = Svec::new(n);
        let n_vars = svec.len() + extras;
        Problem {
            svec,
            n_vars,
            equalities: Vec::new(),
            inequalities: Vec::new(),
            concave: Vec::new(),
            objective: Vec::new(),
        }
    }

    pub fn barrier_terms(&self) -> f64 {
        (self.svec.dim() + self.inequalities.len() + self.concave.len()) as f64
    }

    pub fn objective_value(&self, v: &[f64]) -> f64 {
        self.objective.iter().map(|&(k, c)| c * v[k]).sum()
    }

    fn barrier(&self, v: &[f64], tau: f64) -> Option<f64> {
        let x = self.svec.matrix(v);
        let chol = x.cholesky()?;
        let logdet: f64 = chol.l_dirty().diagonal().iter().map(|d| 2.0 * d.ln()).sum();
        if !logdet.is_finite() {
            return None;
        }
        let mut f = tau * self.objective_value(v) - logdet;
        for row in &self.inequalities {
            let s = row.rhs - row.eval(v);
            if !(s > 0.0) {
                return None;
            }
            f -= s.ln();
        }
        for c in &self.concave {
            let s = c.slack(v)?;
            if !(s > 0.0) {
                return None;
            }
            f -= s.ln();
        }
        Some(f)
    }

    fn gradient_hessian(&self, v: &[f64], tau: f64) -> Option<(DVector<f64>, DMatrix<f64>)> {
        let nv = self.n_vars;
        let mut g = DVector::zeros(nv);
        let mut h = DMatrix::zeros(nv, nv);
        for &(k, c) in &self.objective {
            g[k] += tau * c;
        }

        let x = self.svec.matrix(v);
        let w = x.cholesky()?.inverse();
        let pairs = &self.svec.pairs;
        let scale = |i: usize, j: usize| if i == j { 0.5 } else { 1.0 };
        for (k, &(a, b)) in pairs.iter().enumerate() {
            g[k] -= 2.0 * scale(a, b) * w[(a, b)];
            for (l, &(c, d)) in pairs.iter().enumerate().skip(k) {
                let val = 2.0 * scale(a, b) * scale(c, d) * (w[(b, c)] * w[(a, d)] + w[(b, d)] * w[(a, c)]);
                h[(k, l)] += val;
                if l != k {
                    h[(l, k)] += val;
                }
            }
        }

        for row in &self.inequalities {
            let s = row.rhs - row.eval(v);
            if !(s > 0.0) {
                return None;
            }
            let inv = 1.0 / s;
            for &(k, ck) in &row.coeffs {
                g[k] += ck * inv;
                for &(l, cl) in &row.coeffs {
                    h[(k, l)] += ck * cl * inv * inv;
                }
            }
        }
        for c in &self.concave {
            c.accumulate(v, &mut g, &mut h)?;
        }
        Some((g, h))
    }

    /// Newton direction under the equality constraints.
    fn newton_step(&self, g: &DVector<f64>, h: DMatrix<f64>) -> Option<DVector<f64>> {
        let nv = self.n_vars;
        let mut chol = None;
        let mut reg = 0.0;
        for _ in 0..8 {
            let mut hr = h.clone();
            if reg > 0.0 {
                for i in 0..nv {
                    hr[(i, i)] += reg;
                }
            }
            if let Some(c) = hr.cholesky() {
                chol = Some(c);
                break;
            }
            let maxdiag = (0..nv).map(|i| h[(i, i)].abs()).fold(0.0, f64::max).max(1.0);
            reg = if reg == 0.0 { 1e-12 * maxdiag } else { reg * 100.0 };
        }
        let chol = chol?;
        let hinv_g = chol.solve(g);
        if self.equalities.is_empty() {
            return Some(-hinv_g);
        }
        let m = self.equalities.len();
        let mut e = DMatrix::zeros(m, nv);
        for (r, row) in self.equalities.iter().enumerate() {
            for &(k, c) in &row.coeffs {
                e[(r, k)] += c;
            }
        }
        let hinv_et = chol.solve(&e.transpose());
        let schur = &e * &hinv_et;
        let rhs = -(&e * &hinv_g);
        let w = schur.clone().cholesky().map(|c| c.solve(&rhs)).or_else(|| schur.lu().solve(&rhs))?;
        Some(-(hinv_g + hinv_et * w))
    }

    /// Runs the barrier method from the strictly feasible `v0`. `monitor` is
    /// called after every Newton step with (v, tau, centred) and may halt.
    pub fn solve<M>(&self, v0: Vec<f64>, opts: Options, mut monitor: M) -> Outcome
    where
        M: FnMut(&[f64], f64, bool) -> bool,
    {
        let theta = self.barrier_terms();
        let mut v = v0;
        let mut tau = opts.tau0;
        let mut steps = 0;
        loop {
            // centering
            let mut centred = false;
            while steps < opts.max_newton {
                let Some((g, h)) = self.gradient_hessian(&v, tau) else { break };
                let Some(dv) = self.newton_step(&g, h) else { break };
                let decrement = -g.dot(&dv);
                if !(decrement > 0.0) || decrement * 0.5 <= 1e-10 {
                    centred = true;
                    break;
                }
                let f0 = self.barrier(&v, tau).unwrap_or(f64::INFINITY);
                let mut t = 1.0;
                let mut moved = false;
                while t > 1e-14 {
                    let cand: Vec<f64> = v.iter().zip(dv.iter()).map(|(a, b)| a + t * b).collect();
                    if let Some(f1) = self.barrier(&cand, tau) {
                        if f1 <= f0 - 0.25 * t * decrement {
                            v = cand;
                            moved = true;
                            break;
                        }
                    }
                    t *= 0.5;
                }
                steps += 1;
                if !moved {
                    centred = true;
                    break;
                }
                if monitor(&v, tau, false) {
                    return Outcome { v, converged: false };
                }
            }
            let gap = theta / tau;
            if monitor(&v, tau, centred) {
                return Outcome { v, converged: false };
            }
            if gap <= opts.gap_tol {
                return Outcome { v, converged: true };
            }
            if steps >= opts.max_newton {
                return Outcome { v, converged: false };
            }
            tau *= opts.tau_factor;
        }
    }
}
