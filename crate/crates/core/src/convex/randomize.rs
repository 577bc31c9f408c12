use nalgebra::{DMatrix, DVector};
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use super::PSD_FLOOR;
use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Relative size of the second eigenvalue below which `X` counts as rank one.
const RANK_ONE_RATIO: f64 = 1e-6;

/// Factor `L` with `L L^T = X + jitter I`. Returns `(L, jitter)`.
pub fn stable_factorize(x: &DMatrix<f64>) -> Result<(DMatrix<f64>, f64)> {
    let n = x.nrows();
    if n == 0 {
        return Ok((DMatrix::zeros(0, 0), 0.0));
    }
    let sym = (x + x.transpose()) * 0.5;
    let min_eig = sym.clone().symmetric_eigenvalues().min();
    if min_eig < PSD_FLOOR {
        return Err(Error::NotPsd { min_eigenvalue: min_eig });
    }
    let mut jitter = 1e-12;
    while jitter < 1.0 {
        let shifted = &sym + DMatrix::identity(n, n) * jitter;
        if let Some(c) = shifted.cholesky() {
            return Ok((c.l(), jitter));
        }
        jitter *= 10.0;
    }
    Err(Error::NotPsd { min_eigenvalue: min_eig })
}

/// Sets the `g` largest entries to one; ties go to the lower index.
pub fn top_g(scores: &[f64], g: usize) -> Vec<bool> {
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]).then(a.cmp(&b)));
    let mut x = vec![false; scores.len()];
    for &j in order.iter().take(g) {
        x[j] = true;
    }
    x
}

#[derive(Debug, Clone, PartialEq)]
pub struct Randomized {
    pub x: Vec<bool>,
    pub score: f64,
    /// Feasible samples among the ones drawn (duplicates counted).
    pub feasible_samples: usize,
    /// False when the rank-one shortcut applied.
    pub sampled: bool,
}

/// Draws `n_samples` vectors from `N(x_bar, X)`, keeps the top `g` entries
/// of each, and returns the best one according to `evaluate` (`None` marks an
/// infeasible candidate). The plain top-`g` rounding of `x_bar` is always
/// among the candidates.
pub fn gaussian_randomize<F>(
    x_bar: &[f64],
    x: &DMatrix<f64>,
    g: usize,
    n_samples: usize,
    seed: u64,
    evaluate: F,
) -> Result<Randomized>
where
    F: Fn(&[bool]) -> Option<f64> + Sync,
{
    let s = x_bar.len();
    let rounded = top_g(x_bar, g);
    let eig = x.clone().symmetric_eigenvalues();
    let mut sorted: Vec<f64> = eig.iter().copied().collect();
    sorted.sort_by(|a, b| b.total_cmp(a));
    let rank_one = s <= 1 || sorted[1] <= RANK_ONE_RATIO * sorted[0].max(f64::MIN_POSITIVE);
    if rank_one {
        if let Some(score) = evaluate(&rounded) {
            return Ok(Randomized { x: rounded, score, feasible_samples: 0, sampled: false });
        }
    }

    let (l, _) = stable_factorize(x)?;
    let mean = DVector::from_column_slice(x_bar);
    let mut rng = stream_rng(seed, Stream::Randomization);
    let mut samples = Vec::with_capacity(n_samples);
    for _ in 0..n_samples {
        let z = DVector::from_fn(s, |_, _| StandardNormal.sample(&mut rng));
        let xi = &mean + &l * z;
        samples.push(top_g(xi.as_slice(), g));
    }

    // Distinct candidates in first-seen order, the plain rounding first.
    let mut candidates: Vec<Vec<bool>> = vec![rounded];
    let mut seen = std::collections::BTreeSet::new();
    seen.insert(candidates[0].clone());
    for smp in &samples {
        if seen.insert(smp.clone()) {
            candidates.push(smp.clone());
        }
    }
    let scores: Vec<Option<f64>> = candidates.par_iter().map(|c| evaluate(c)).collect();
    let feasible: std::collections::BTreeSet<&Vec<bool>> =
        candidates.iter().zip(&scores).filter(|(_, s)| s.is_some()).map(|(c, _)| c).collect();
    let feasible_samples = samples.iter().filter(|smp| feasible.contains(smp)).count();

    let mut best: Option<(usize, f64)> = None;
    for (k, sc) in scores.iter().enumerate() {
        if let Some(v) = *sc {
            if best.is_none_or(|(_, b)| v > b) {
                best = Some((k, v));
            }
        }
    }
    match best {
        Some((k, score)) => Ok(Randomized { x: candidates[k].clone(), score, feasible_samples, sampled: true }),
        None => Err(Error::RandomizationFailed { samples: n_samples }),
    }
}
