//! Elastic net by cyclic coordinate descent on the standardized problem
//!     (1/2n)‖y − Xβ‖² + λ(α‖β‖₁ + (1−α)/2‖β‖₂²),
//! with λ chosen by blocked cross-validation over a log-spaced path.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::{FittedModel, ModelKind, Standardization};
use crate::arx::DesignMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ElasticNetConfig {
    pub alpha: f64,
    pub n_lambda: usize,
    pub lambda_min_ratio: f64,
    pub cv_folds: usize,
    pub tol: f64,
    pub max_sweeps: usize,
    /// Fixed λ (skips cross-validation); mostly for verification runs.
    pub lambda_override: Option<f64>,
}

impl Default for ElasticNetConfig {
    fn default() -> Self {
        ElasticNetConfig {
            alpha: 0.5,
            n_lambda: 100,
            lambda_min_ratio: 1e-4,
            cv_folds: 5,
            tol: 1e-10,
            max_sweeps: 50_000,
            lambda_override: None,
        }
    }
}

impl ElasticNetConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.alpha > 0.0 && self.alpha <= 1.0) {
            return Err(Error::config("learners.elastic_net.alpha", "must be in (0, 1]"));
        }
        if self.cv_folds < 2 {
            return Err(Error::config("learners.elastic_net.cv_folds", "must be >= 2"));
        }
        if self.n_lambda < 1 {
            return Err(Error::config("learners.elastic_net.n_lambda", "must be >= 1"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone)]
pub struct ElasticNetDiagnostics {
    pub lambda: f64,
    pub alpha: f64,
    pub kkt_max_violation: f64,
    /// Objective value after every sweep of the final fit.
    pub objective_trace: Vec<f64>,
    pub sweeps: usize,
    pub converged: bool,
    /// (λ, pooled validation MSE) per path point, empty when λ was fixed.
    pub cv_curve: Vec<(f64, f64)>,
}

/// Standardized sufficient statistics for covariance-update descent.
struct StdData {
    xtx: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
    n: f64,
    mean: Vec<f64>,
    scale: Vec<f64>,
    y_mean: f64,
    y_scale: f64,
}

impl StdData {
    /// Build from the rows of `dm` for which `keep` returns true.
    fn build(dm: &DesignMatrix, keep: impl Fn(usize) -> bool) -> Option<StdData> {
        let p = dm.n_cols();
        let rows: Vec<usize> = (0..dm.n_rows()).filter(|&i| keep(i)).collect();
        let n = rows.len();
        if n < 2 {
            return None;
        }
        let nf = n as f64;
        let mut mean = vec![0.0; p];
        let mut y_mean = 0.0;
        for &i in &rows {
            let r = dm.row(i);
            for k in 0..p {
                mean[k] += r[k];
            }
            y_mean += dm.y[i];
        }
        for m in &mut mean {
            *m /= nf;
        }
        y_mean /= nf;
        let mut var = vec![0.0; p];
        let mut y_var = 0.0;
        for &i in &rows {
            let r = dm.row(i);
            for k in 0..p {
                var[k] += (r[k] - mean[k]).powi(2);
            }
            y_var += (dm.y[i] - y_mean).powi(2);
        }
        let scale: Vec<f64> = var.iter().map(|v| (v / nf).sqrt()).collect();
        let y_scale = {
            let s = (y_var / nf).sqrt();
            if s > 0.0 {
                s
            } else {
                1.0
            }
        };

        let mut xtx = DMatrix::zeros(p, p);
        let mut xty = DVector::zeros(p);
        let mut yty = 0.0;
        let mut xs = vec![0.0; p];
        for &i in &rows {
            let r = dm.row(i);
            for k in 0..p {
                xs[k] = if scale[k] > 0.0 { (r[k] - mean[k]) / scale[k] } else { 0.0 };
            }
            let ys = (dm.y[i] - y_mean) / y_scale;
            for a in 0..p {
                if xs[a] == 0.0 {
                    continue;
                }
                for b in a..p {
                    xtx[(a, b)] += xs[a] * xs[b];
                }
                xty[a] += xs[a] * ys;
            }
            yty += ys * ys;
        }
        for a in 0..p {
            for b in 0..a {
                xtx[(a, b)] = xtx[(b, a)];
            }
        }
        Some(StdData {
            xtx,
            xty,
            yty,
            n: nf,
            mean,
            scale,
            y_mean,
            y_scale,
        })
    }

    fn lambda_max(&self, alpha: f64) -> f64 {
        let mx = self.xty.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        (mx / self.n / alpha).max(1e-12)
    }

    fn objective(&self, beta: &DVector<f64>, s: &DVector<f64>, lambda: f64, alpha: f64) -> f64 {
        let rss = self.yty - 2.0 * beta.dot(&self.xty) + beta.dot(s);
        let l1: f64 = beta.iter().map(|b| b.abs()).sum();
        let l2: f64 = beta.iter().map(|b| b * b).sum();
        rss / (2.0 * self.n) + lambda * (alpha * l1 + 0.5 * (1.0 - alpha) * l2)
    }

    /// Max KKT/subgradient violation over all coordinates.
    fn kkt_violation(&self, beta: &DVector<f64>, s: &DVector<f64>, lambda: f64, alpha: f64) -> f64 {
        let p = beta.len();
        let mut worst = 0.0f64;
        for k in 0..p {
            if self.scale[k] == 0.0 {
                continue;
            }
            let c = (self.xty[k] - s[k]) / self.n;
            let v = if beta[k] != 0.0 {
                (c - lambda * (1.0 - alpha) * beta[k] - lambda * alpha * beta[k].signum()).abs()
            } else {
                (c.abs() - lambda * alpha).max(0.0)
            };
            worst = worst.max(v);
        }
        worst
    }
}

fn soft_threshold(z: f64, t: f64) -> f64 {
    z.signum() * (z.abs() - t).max(0.0)
}

/// One descent to convergence at fixed λ. `s` must equal `xtx * beta` on
/// entry and is kept in sync. Returns (sweeps, converged).
fn descend(
    data: &StdData,
    lambda: f64,
    alpha: f64,
    beta: &mut DVector<f64>,
    s: &mut DVector<f64>,
    tol: f64,
    max_sweeps: usize,
    mut trace: Option<&mut Vec<f64>>,
) -> (usize, bool) {
    let p = beta.len();
    for sweep in 1..=max_sweeps {
        let mut max_delta = 0.0f64;
        for k in 0..p {
            let gkk = data.xtx[(k, k)];
            if gkk <= 0.0 {
                continue;
            }
            let z = (data.xty[k] - s[k] + gkk * beta[k]) / data.n;
            let denom = gkk / data.n + lambda * (1.0 - alpha);
            let new = soft_threshold(z, lambda * alpha) / denom;
            let delta = new - beta[k];
            if delta != 0.0 {
                s.axpy(delta, &data.xtx.column(k), 1.0);
                beta[k] = new;
                max_delta = max_delta.max(delta.abs());
            }
        }
        if let Some(tr) = trace.as_deref_mut() {
            tr.push(data.objective(beta, s, lambda, alpha));
        }
        if max_delta < tol {
            return (sweep, true);
        }
    }
    (max_sweeps, false)
}

fn lambda_path(lambda_max: f64, cfg: &ElasticNetConfig) -> Vec<f64> {
    if cfg.n_lambda == 1 {
        return vec![lambda_max];
    }
    let lo = lambda_max * cfg.lambda_min_ratio;
    (0..cfg.n_lambda)
        .map(|i| {
            let t = i as f64 / (cfg.n_lambda - 1) as f64;
            (lambda_max.ln() + t * (lo.ln() - lambda_max.ln())).exp()
        })
        .collect()
}

/// Fit with λ chosen by contiguous-block cross-validation (time-series
/// folds), or at the overridden λ.
pub fn fit_elastic_net(
    train: &DesignMatrix,
    cfg: &ElasticNetConfig,
) -> Result<(FittedModel, ElasticNetDiagnostics)> {
    cfg.validate()?;
    let n = train.n_rows();
    let p = train.n_cols();
    if n < 4 || p == 0 {
        return Err(Error::Fit(format!("elastic net needs data, got {n}x{p}")));
    }
    let full = StdData::build(train, |_| true)
        .ok_or_else(|| Error::Fit("elastic net: empty training set".into()))?;

    let mut cv_curve = Vec::new();
    let lambda = match cfg.lambda_override {
        Some(l) => l,
        None => {
            let path = lambda_path(full.lambda_max(cfg.alpha), cfg);
            let folds = cfg.cv_folds.min(n / 2).max(2);
            let mut err_sum = vec![0.0f64; path.len()];
            let mut err_cnt = vec![0usize; path.len()];
            for f in 0..folds {
                let lo = f * n / folds;
                let hi = (f + 1) * n / folds;
                let Some(data) = StdData::build(train, |i| i < lo || i >= hi) else { continue };
                let mut beta = DVector::zeros(p);
                let mut s = DVector::zeros(p);
                for (li, &lam) in path.iter().enumerate() {
                    descend(&data, lam, cfg.alpha, &mut beta, &mut s, cfg.tol, cfg.max_sweeps, None);
                    for i in lo..hi {
                        let r = train.row(i);
                        let mut pred = 0.0;
                        for k in 0..p {
                            if data.scale[k] > 0.0 {
                                pred += beta[k] * (r[k] - data.mean[k]) / data.scale[k];
                            }
                        }
                        let pred = data.y_mean + data.y_scale * pred;
                        err_sum[li] += (train.y[i] - pred).powi(2);
                        err_cnt[li] += 1;
                    }
                }
            }
            let mut best = 0;
            for li in 0..path.len() {
                let mse = err_sum[li] / err_cnt[li].max(1) as f64;
                cv_curve.push((path[li], mse));
                if mse < cv_curve[best].1 {
                    best = li;
                }
            }
            cv_curve[best].0
        }
    };

    // Final fit: warm-start down the path to the chosen λ, then trace the
    // last descent for the monotonicity diagnostic.
    let mut beta = DVector::zeros(p);
    let mut s = DVector::zeros(p);
    if lambda > 0.0 {
        for lam in lambda_path(full.lambda_max(cfg.alpha), cfg) {
            if lam <= lambda {
                break;
            }
            descend(&full, lam, cfg.alpha, &mut beta, &mut s, cfg.tol, cfg.max_sweeps, None);
        }
    }
    let mut trace = Vec::new();
    let (sweeps, converged) = descend(
        &full,
        lambda,
        cfg.alpha,
        &mut beta,
        &mut s,
        cfg.tol,
        cfg.max_sweeps,
        Some(&mut trace),
    );
    if !converged {
        log::warn!("elastic net did not converge in {} sweeps at lambda {lambda}", cfg.max_sweeps);
    }
    let kkt = full.kkt_violation(&beta, &s, lambda, cfg.alpha);

    let mut coefficients = Vec::with_capacity(p);
    let mut selected = std::collections::BTreeSet::new();
    let mut intercept = full.y_mean;
    for k in 0..p {
        let c = if full.scale[k] > 0.0 {
            full.y_scale * beta[k] / full.scale[k]
        } else {
            0.0
        };
        coefficients.push((train.labels[k].clone(), c));
        intercept -= full.mean[k] * c;
        if beta[k] != 0.0 {
            selected.insert(train.labels[k].clone());
        }
    }

    Ok((
        FittedModel {
            kind: ModelKind::ElasticNet,
            intercept,
            coefficients,
            basis: vec![],
            selected,
            standardization: Some(Standardization {
                labels: train.labels.clone(),
                mean: full.mean.clone(),
                scale: full.scale.clone(),
                y_mean: full.y_mean,
                y_scale: full.y_scale,
            }),
        },
        ElasticNetDiagnostics {
            lambda,
            alpha: cfg.alpha,
            kkt_max_violation: kkt,
            objective_trace: trace,
            sweeps,
            converged,
            cv_curve,
        },
    ))
}
