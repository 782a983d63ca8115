//! Adaptive regression splines: a greedy forward pass adds mirrored hinge
//! pairs (knots restricted to observed values, products of at most two
//! hinges), then a backward pass prunes by generalized cross-validation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{least_squares, GramRss, FittedModel, Hinge, MarsTerm, ModelKind};
use crate::arx::DesignMatrix;
use crate::error::{Error, Result};

/// GCV smoothing: each non-intercept term costs this many extra parameters.
pub const GCV_PENALTY_PER_TERM: f64 = 3.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MarsConfig {
    /// Basis-function budget including the intercept; default 2·columns + 1.
    pub max_terms: Option<usize>,
    pub max_degree: usize,
}

impl Default for MarsConfig {
    fn default() -> Self {
        MarsConfig {
            max_terms: None,
            max_degree: 2,
        }
    }
}

#[derive(Debug, Clone)]
pub struct MarsDiagnostics {
    pub forward_terms: usize,
    pub forward_gcv: f64,
    pub final_terms: usize,
    pub final_gcv: f64,
    pub rss: f64,
}

/// GCV = (RSS/n) / (1 − C(m)/n)², C(m) = m + 3 (m − 1).
pub fn gcv(rss: f64, n: usize, terms: usize) -> f64 {
    let c = terms as f64 + GCV_PENALTY_PER_TERM * (terms as f64 - 1.0);
    let nf = n as f64;
    if c >= nf {
        return f64::INFINITY;
    }
    (rss / nf) / (1.0 - c / nf).powi(2)
}

#[derive(Debug, Clone)]
struct Basis {
    /// (column index, knot, rising); empty = intercept.
    hinges: Vec<(usize, f64, bool)>,
    values: Vec<f64>,
}

impl Basis {
    fn degree(&self) -> usize {
        self.hinges.len()
    }

    fn uses_col(&self, col: usize) -> bool {
        self.hinges.iter().any(|(c, _, _)| *c == col)
    }
}

/// Best single-hinge extension of `parent` on variable `x` against the
/// residual: for every observed knot and both orientations, the exact RSS
/// drop of fitting (intercept, candidate) to the residual. The candidate is
/// centered, so with only the intercept in the basis this matches a full
/// joint fit; later it is a greedy approximation and the basis is refit
/// exactly after each accepted pair.
fn sweep_best(parent: &[f64], x: &[f64], sorted: &[u32], r: &[f64]) -> Option<(f64, f64, bool)> {
    let n = x.len() as f64;
    let mut best: Option<(f64, f64, bool)> = None;
    let mut consider = |score: f64, knot: f64, rising: bool| {
        if best.is_none_or(|(s, _, _)| score > s) {
            best = Some((score, knot, rising));
        }
    };

    // Rising hinges (x − τ)+: sweep τ descending; active set is x > τ.
    let (mut s_pr, mut s_prx, mut s_p, mut s_px, mut s_pp, mut s_ppx, mut s_ppxx) =
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut i = sorted.len();
    while i > 0 {
        // The group of equal values ending at i.
        let v = x[sorted[i - 1] as usize];
        let mut j = i;
        while j > 0 && x[sorted[j - 1] as usize] == v {
            j -= 1;
        }
        if i < sorted.len() {
            // Score τ = v with the active set {x > v} accumulated so far.
            let num = s_prx - v * s_pr; // ⟨c, r⟩ (r is centered already)
            let norm2 = s_ppxx - 2.0 * v * s_ppx + v * v * s_pp;
            let mean = (s_px - v * s_p) / n;
            let den = norm2 - n * mean * mean;
            if den > 1e-12 * (norm2.abs() + 1.0) {
                consider(num * num / den, v, true);
            }
        }
        for &si in &sorted[j..i] {
            let (p, xv, rv) = (parent[si as usize], x[si as usize], r[si as usize]);
            s_pr += p * rv;
            s_prx += p * rv * xv;
            s_p += p;
            s_px += p * xv;
            s_pp += p * p;
            s_ppx += p * p * xv;
            s_ppxx += p * p * xv * xv;
        }
        i = j;
    }

    // Falling hinges (τ − x)+: sweep τ ascending; active set is x < τ.
    let (mut s_pr, mut s_prx, mut s_p, mut s_px, mut s_pp, mut s_ppx, mut s_ppxx) =
        (0.0, 0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    let mut i = 0;
    while i < sorted.len() {
        let v = x[sorted[i] as usize];
        let mut j = i;
        while j < sorted.len() && x[sorted[j] as usize] == v {
            j += 1;
        }
        if i > 0 {
            let num = v * s_pr - s_prx;
            let norm2 = v * v * s_pp - 2.0 * v * s_ppx + s_ppxx;
            let mean = (v * s_p - s_px) / n;
            let den = norm2 - n * mean * mean;
            if den > 1e-12 * (norm2.abs() + 1.0) {
                consider(num * num / den, v, false);
            }
        }
        for &si in &sorted[i..j] {
            let (p, xv, rv) = (parent[si as usize], x[si as usize], r[si as usize]);
            s_pr += p * rv;
            s_prx += p * rv * xv;
            s_p += p;
            s_px += p * xv;
            s_pp += p * p;
            s_ppx += p * p * xv;
            s_ppxx += p * p * xv * xv;
        }
        i = j;
    }
    best
}

fn hinge_column(parent: &[f64], x: &[f64], knot: f64, rising: bool) -> Vec<f64> {
    parent
        .iter()
        .zip(x)
        .map(|(p, &xv)| {
            let h = if rising { (xv - knot).max(0.0) } else { (knot - xv).max(0.0) };
            p * h
        })
        .collect()
}

fn refit(basis: &[Basis], y: &DVector<f64>) -> Result<(Vec<f64>, Vec<f64>, f64)> {
    let n = y.len();
    let m = basis.len();
    let b = DMatrix::from_fn(n, m, |i, j| basis[j].values[i]);
    let fit = least_squares(&b, y)?;
    let fitted = &b * DVector::from_column_slice(&fit.beta);
    let resid: Vec<f64> = (0..n).map(|i| y[i] - fitted[i]).collect();
    Ok((fit.beta, resid, fit.rss))
}

pub fn fit_mars(train: &DesignMatrix, cfg: &MarsConfig) -> Result<(FittedModel, MarsDiagnostics)> {
    let n = train.n_rows();
    let p = train.n_cols();
    if n < 8 || p == 0 {
        return Err(Error::Fit(format!("mars needs data, got {n}x{p}")));
    }
    if !(1..=2).contains(&cfg.max_degree) {
        return Err(Error::config("learners.mars.max_degree", "must be 1 or 2"));
    }
    let max_terms = cfg.max_terms.unwrap_or(2 * p + 1).max(1);

    let cols: Vec<Vec<f64>> = (0..p).map(|k| train.column(k).collect()).collect();
    let sorted: Vec<Vec<u32>> = cols
        .iter()
        .map(|c| {
            let mut idx: Vec<u32> = (0..n as u32).collect();
            idx.sort_by(|&a, &b| c[a as usize].total_cmp(&c[b as usize]));
            idx
        })
        .collect();

    let y = DVector::from_column_slice(&train.y);
    let yty = y.dot(&y);
    let mut basis = vec![Basis {
        hinges: vec![],
        values: vec![1.0; n],
    }];
    let (_, mut resid, mut rss) = refit(&basis, &y)?;

    while basis.len() + 2 <= max_terms {
        // Numerically perfect fit: anything further is float dust.
        if rss <= 1e-22 * yty.max(1e-300) {
            break;
        }
        // Keep the GCV denominator meaningful.
        let c_next = (basis.len() + 2) as f64 * (1.0 + GCV_PENALTY_PER_TERM) - GCV_PENALTY_PER_TERM;
        if c_next >= n as f64 / 2.0 {
            break;
        }
        let mut best: Option<(f64, usize, usize, f64, bool)> = None;
        for (bi, parent) in basis.iter().enumerate() {
            if parent.degree() >= cfg.max_degree {
                continue;
            }
            for k in 0..p {
                if parent.uses_col(k) {
                    continue;
                }
                if let Some((score, knot, rising)) =
                    sweep_best(&parent.values, &cols[k], &sorted[k], &resid)
                {
                    if best.is_none_or(|(s, ..)| score > s) {
                        best = Some((score, bi, k, knot, rising));
                    }
                }
            }
        }
        let Some((score, bi, k, knot, rising)) = best else { break };
        if score <= 1e-10 * rss {
            break;
        }
        for dir in [rising, !rising] {
            let values = hinge_column(&basis[bi].values, &cols[k], knot, dir);
            if values.iter().all(|v| *v == 0.0) {
                continue;
            }
            let mut hinges = basis[bi].hinges.clone();
            hinges.push((k, knot, dir));
            basis.push(Basis { hinges, values });
        }
        let (_, r2, rss2) = refit(&basis, &y)?;
        resid = r2;
        rss = rss2;
    }

    let forward_terms = basis.len();
    let forward_gcv = gcv(rss, n, forward_terms);

    // Backward: walk removals greedily by GCV, keep the best model seen
    // (including the full forward model).
    let bmat = DMatrix::from_fn(n, basis.len(), |i, j| basis[j].values[i]);
    let gram = GramRss::new(&bmat, &y);
    let mut active: Vec<usize> = (0..basis.len()).collect();
    let mut best_set = active.clone();
    let mut best_gcv = forward_gcv;
    while active.len() > 1 {
        let mut step_best: Option<(usize, f64)> = None;
        for &t in active.iter().filter(|&&t| t != 0) {
            let trial: Vec<usize> = active.iter().copied().filter(|&j| j != t).collect();
            let g = gcv(gram.rss(&trial), n, trial.len());
            if step_best.is_none_or(|(_, bg)| g < bg) {
                step_best = Some((t, g));
            }
        }
        let Some((t, g)) = step_best else { break };
        active.retain(|&j| j != t);
        if g < best_gcv {
            best_gcv = g;
            best_set = active.clone();
        }
    }

    let kept: Vec<&Basis> = best_set.iter().map(|&i| &basis[i]).collect();
    let kept_basis: Vec<Basis> = kept.iter().map(|b| (*b).clone()).collect();
    let (weights, _, final_rss) = refit(&kept_basis, &y)?;

    let mut intercept = 0.0;
    let mut terms = Vec::new();
    let mut selected = std::collections::BTreeSet::new();
    for (w, b) in weights.iter().zip(&kept_basis) {
        if b.hinges.is_empty() {
            intercept = *w;
            continue;
        }
        let hinges: Vec<Hinge> = b
            .hinges
            .iter()
            .map(|&(col, knot, rising)| {
                selected.insert(train.labels[col].clone());
                Hinge {
                    label: train.labels[col].clone(),
                    knot,
                    rising,
                }
            })
            .collect();
        terms.push(MarsTerm { weight: *w, hinges });
    }

    let final_terms = kept_basis.len();
    Ok((
        FittedModel {
            kind: ModelKind::Mars,
            intercept,
            coefficients: vec![],
            basis: terms,
            selected,
            standardization: None,
        },
        MarsDiagnostics {
            forward_terms,
            forward_gcv,
            final_terms,
            final_gcv: gcv(final_rss, n, final_terms),
            rss: final_rss,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::super::linear::tests::matrix_from;
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Brute-force oracle: best single rising hinge by exhaustive knot
    /// search with an exact 2-parameter least-squares fit per knot.
    fn brute_force_single_knot(x: &[f64], y: &[f64]) -> (f64, f64) {
        let n = x.len() as f64;
        let mut best = (f64::INFINITY, 0.0);
        for &tau in x {
            let h: Vec<f64> = x.iter().map(|&v| (v - tau).max(0.0)).collect();
            let (sh, shh, shy, sy) = h.iter().zip(y).fold((0.0, 0.0, 0.0, 0.0), |a, (hv, yv)| {
                (a.0 + hv, a.1 + hv * hv, a.2 + hv * yv, a.3 + yv)
            });
            let det = n * shh - sh * sh;
            if det.abs() < 1e-12 {
                continue;
            }
            let b = (n * shy - sh * sy) / det;
            let a = (sy - b * sh) / n;
            let rss: f64 = h
                .iter()
                .zip(y)
                .map(|(hv, yv)| (yv - a - b * hv).powi(2))
                .sum();
            if rss < best.0 {
                best = (rss, tau);
            }
        }
        best
    }

    #[test]
    fn recovers_single_hinge_knot() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let n = 201;
        let xs: Vec<f64> = (0..n).map(|i| i as f64 / (n - 1) as f64).collect();
        let ys: Vec<f64> = xs
            .iter()
            .map(|&x| (x - 0.5).max(0.0) + 1e-4 * (rng.random::<f64>() - 0.5))
            .collect();
        let spacing = 1.0 / (n - 1) as f64;

        let (_, tau_oracle) = brute_force_single_knot(&xs, &ys);
        assert!((tau_oracle - 0.5).abs() <= spacing + 1e-12);

        let rows: Vec<Vec<f64>> = xs.iter().map(|&x| vec![x]).collect();
        let dm = matrix_from(&["x lag1"], rows, ys);
        let (model, diag) = fit_mars(&dm, &MarsConfig::default()).unwrap();
        let knots: Vec<f64> = model
            .basis
            .iter()
            .flat_map(|t| t.hinges.iter())
            .filter(|h| h.rising)
            .map(|h| h.knot)
            .collect();
        assert!(
            knots.iter().any(|k| (k - 0.5).abs() <= spacing + 1e-12),
            "no rising hinge near 0.5 in {knots:?}"
        );
        assert!(diag.final_gcv <= diag.forward_gcv + 1e-15);
    }

    #[test]
    fn constant_target_prunes_to_intercept() {
        let mut rng = ChaCha8Rng::seed_from_u64(67);
        let rows: Vec<Vec<f64>> = (0..100)
            .map(|_| vec![rng.random_range(0.0..1.0), rng.random_range(0.0..1.0)])
            .collect();
        let y = vec![3.25; 100];
        let dm = matrix_from(&["a lag1", "b lag1"], rows, y);
        let (model, _) = fit_mars(&dm, &MarsConfig::default()).unwrap();
        assert!(model.basis.is_empty(), "basis {:?}", model.basis);
        assert!((model.intercept - 3.25).abs() < 1e-9);
        assert!(model.selected.is_empty());
    }

    #[test]
    fn interaction_needs_degree_two() {
        // y = x1 * x2 on a grid: degree-2 products capture it, additive
        // hinges cannot.
        let mut rows = Vec::new();
        let mut ys = Vec::new();
        for i in 0..25 {
            for j in 0..25 {
                let (a, b) = (i as f64 / 24.0, j as f64 / 24.0);
                rows.push(vec![a, b]);
                ys.push(a * b);
            }
        }
        let dm = matrix_from(&["x1 lag1", "x2 lag1"], rows, ys);
        let budget = Some(21);
        let (_, d2) = fit_mars(
            &dm,
            &MarsConfig {
                max_terms: budget,
                max_degree: 2,
            },
        )
        .unwrap();
        let (_, d1) = fit_mars(
            &dm,
            &MarsConfig {
                max_terms: budget,
                max_degree: 1,
            },
        )
        .unwrap();
        assert!(
            d2.rss < 0.05 * d1.rss,
            "degree-2 rss {} vs additive {}",
            d2.rss,
            d1.rss
        );
    }

    #[test]
    fn backward_gcv_never_exceeds_forward() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| (0..4).map(|_| rng.random_range(-1.0..1.0)).collect())
            .collect();
        let ys: Vec<f64> = rows
            .iter()
            .map(|r| (r[0] - 0.2).max(0.0) * 2.0 - r[1] + 0.3 * (rng.random::<f64>() - 0.5))
            .collect();
        let dm = matrix_from(&["a lag1", "b lag1", "c lag1", "d lag1"], rows, ys);
        let (model, diag) = fit_mars(&dm, &MarsConfig::default()).unwrap();
        assert!(diag.final_gcv <= diag.forward_gcv + 1e-15);
        assert!(model.basis.iter().all(|t| t.hinges.len() <= 2));
        assert!(model.selected.contains("a lag1"));
    }
}
