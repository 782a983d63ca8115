//! Efroymson-style forward/backward selection under the risk inflation
//! criterion: a term enters only if it cuts RSS by more than 2 σ̂² ln(p),
//! and is removed if deleting it costs less than that.

use std::collections::BTreeSet;

use nalgebra::DMatrix;

use super::{least_squares, target_vector, with_intercept, FittedModel, GramRss, ModelKind};
use crate::arx::DesignMatrix;
use crate::error::{Error, Result};

/// Per-term RIC penalty: 2 σ̂² ln(p) with p the candidate-column count.
pub fn ric_penalty(sigma2: f64, n_candidates: usize) -> f64 {
    2.0 * sigma2 * (n_candidates as f64).ln()
}

#[derive(Debug, Clone)]
pub struct StepwiseDiagnostics {
    pub sigma2_full: f64,
    pub penalty: f64,
    pub rss: f64,
    pub n_forward_adds: usize,
    pub n_backward_drops: usize,
}

/// Forward-then-backward sweeps to a fixed point of the RIC-penalized RSS.
/// σ̂² comes from the full OLS fit over all candidates.
pub fn fit_stepwise(train: &DesignMatrix) -> Result<(FittedModel, StepwiseDiagnostics)> {
    let n = train.n_rows();
    let p = train.n_cols();
    if n <= p + 1 {
        return Err(Error::Fit(format!(
            "stepwise needs more rows ({n}) than columns ({p}) plus intercept"
        )));
    }
    let x = with_intercept(train);
    let y = target_vector(train);

    let full = least_squares(&x, &y)?;
    let df = n - full.rank;
    let sigma2 = full.rss / df as f64;
    let penalty = ric_penalty(sigma2, p);

    let gram = GramRss::new(&x, &y);
    let yty = y.dot(&y);
    // Design-column indices offset by 1 for the intercept at slot 0.
    let mut active: Vec<usize> = vec![0];
    let mut rss_cur = gram.rss(&active);
    let mut adds = 0;
    let mut drops = 0;

    loop {
        let mut changed = false;
        // Forward adds.
        loop {
            // A numerically perfect fit leaves only float dust to chase.
            if rss_cur <= 1e-22 * yty.max(1e-300) {
                break;
            }
            let mut best: Option<(usize, f64)> = None;
            for k in 1..=p {
                if active.contains(&k) {
                    continue;
                }
                let mut trial = active.clone();
                trial.push(k);
                let drop = rss_cur - gram.rss(&trial);
                if best.is_none_or(|(_, d)| drop > d) {
                    best = Some((k, drop));
                }
            }
            match best {
                Some((k, drop)) if drop > penalty => {
                    active.push(k);
                    active.sort_unstable();
                    rss_cur -= drop;
                    adds += 1;
                    changed = true;
                }
                _ => break,
            }
        }
        // Backward drops.
        loop {
            let mut best: Option<(usize, f64)> = None;
            for &k in active.iter().filter(|&&k| k != 0) {
                let trial: Vec<usize> = active.iter().copied().filter(|&j| j != k).collect();
                let cost = gram.rss(&trial) - rss_cur;
                if best.is_none_or(|(_, c)| cost < c) {
                    best = Some((k, cost));
                }
            }
            match best {
                Some((k, cost)) if cost < penalty => {
                    active.retain(|&j| j != k);
                    rss_cur += cost;
                    drops += 1;
                    changed = true;
                }
                _ => break,
            }
        }
        if !changed {
            break;
        }
    }

    // Final coefficients from a QR fit on the retained columns.
    let m = active.len();
    let xs = DMatrix::from_fn(n, m, |i, j| x[(i, active[j])]);
    let fit = least_squares(&xs, &y)?;
    let mut coefficients: Vec<(String, f64)> = train
        .labels
        .iter()
        .map(|l| (l.clone(), 0.0))
        .collect();
    let mut intercept = 0.0;
    for (slot, &col) in active.iter().enumerate() {
        if col == 0 {
            intercept = fit.beta[slot];
        } else {
            coefficients[col - 1].1 = fit.beta[slot];
        }
    }
    let selected: BTreeSet<String> = active
        .iter()
        .filter(|&&k| k != 0)
        .map(|&k| train.labels[k - 1].clone())
        .collect();

    Ok((
        FittedModel {
            kind: ModelKind::Stepwise,
            intercept,
            coefficients,
            basis: vec![],
            selected,
            standardization: None,
        },
        StepwiseDiagnostics {
            sigma2_full: sigma2,
            penalty,
            rss: rss_cur,
            n_forward_adds: adds,
            n_backward_drops: drops,
        },
    ))
}

/// Check the fixed-point property: no single addition beats the penalty and
/// no single deletion costs less than it.
pub fn is_ric_fixed_point(train: &DesignMatrix, model: &FittedModel, penalty: f64) -> bool {
    let x = with_intercept(train);
    let y = target_vector(train);
    let gram = GramRss::new(&x, &y);
    let mut active: Vec<usize> = vec![0];
    for (i, l) in train.labels.iter().enumerate() {
        if model.selected.contains(l) {
            active.push(i + 1);
        }
    }
    let rss_cur = gram.rss(&active);
    for k in 1..=train.n_cols() {
        if active.contains(&k) {
            continue;
        }
        let mut trial = active.clone();
        trial.push(k);
        if rss_cur - gram.rss(&trial) > penalty {
            return false;
        }
    }
    for &k in active.iter().filter(|&&k| k != 0) {
        let trial: Vec<usize> = active.iter().copied().filter(|&j| j != k).collect();
        if gram.rss(&trial) - rss_cur < penalty {
            return false;
        }
    }
    true
}
