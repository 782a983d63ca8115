//! Ordinary least squares with t-test variable significance.

use statrs::distribution::{ContinuousCDF, StudentsT};

use super::{least_squares, target_vector, with_intercept, FittedModel, ModelKind};
use crate::arx::DesignMatrix;
use crate::error::{Error, Result};

pub const SIGNIFICANCE_LEVEL: f64 = 0.05;

/// Per-column inference from an OLS fit (index 0 is the intercept).
#[derive(Debug, Clone)]
pub struct OlsDiagnostics {
    pub rss: f64,
    pub sigma2: f64,
    pub df: usize,
    pub rank: usize,
    /// Original design-column indices dropped as linearly dependent.
    pub dropped: Vec<usize>,
    pub se: Vec<Option<f64>>,
    pub t_values: Vec<Option<f64>>,
    pub p_values: Vec<Option<f64>>,
}

/// Least squares via pivoted QR; significant variables are the slopes with
/// two-sided t-test p < 0.05.
pub fn fit_ols(train: &DesignMatrix) -> Result<(FittedModel, OlsDiagnostics)> {
    let n = train.n_rows();
    let p = train.n_cols();
    if n <= p + 1 {
        return Err(Error::Fit(format!("OLS needs more rows ({n}) than columns ({p}) plus intercept")));
    }
    let x = with_intercept(train);
    let y = target_vector(train);
    let fit = least_squares(&x, &y)?;
    if !fit.dropped.is_empty() {
        let names: Vec<&str> = fit
            .dropped
            .iter()
            .map(|&i| if i == 0 { "intercept" } else { train.labels[i - 1].as_str() })
            .collect();
        log::warn!("OLS dropped {} dependent column(s): {}", names.len(), names.join(", "));
    }

    let df = n - fit.rank;
    let sigma2 = if df > 0 { fit.rss / df as f64 } else { 0.0 };
    let dist = if df > 0 {
        StudentsT::new(0.0, 1.0, df as f64)
            .map_err(|e| Error::Fit(format!("t distribution: {e}")))?
    } else {
        return Err(Error::Fit("no residual degrees of freedom".into()));
    };

    let cols = p + 1;
    let mut se = vec![None; cols];
    let mut t_values = vec![None; cols];
    let mut p_values = vec![None; cols];
    for k in 0..cols {
        if let Some(d) = fit.xtx_inv_diag[k] {
            let s = (sigma2 * d).sqrt();
            se[k] = Some(s);
            if s > 0.0 {
                let t = fit.beta[k] / s;
                t_values[k] = Some(t);
                p_values[k] = Some(2.0 * (1.0 - dist.cdf(t.abs())));
            }
        }
    }

    let selected = train
        .labels
        .iter()
        .enumerate()
        .filter(|(i, _)| p_values[i + 1].is_some_and(|pv| pv < SIGNIFICANCE_LEVEL))
        .map(|(_, l)| l.clone())
        .collect();

    let model = FittedModel {
        kind: ModelKind::LinearRegression,
        intercept: fit.beta[0],
        coefficients: train
            .labels
            .iter()
            .cloned()
            .zip(fit.beta[1..].iter().copied())
            .collect(),
        basis: vec![],
        selected,
        standardization: None,
    };
    Ok((
        model,
        OlsDiagnostics {
            rss: fit.rss,
            sigma2,
            df,
            rank: fit.rank,
            dropped: fit.dropped,
            se,
            t_values,
            p_values,
        },
    ))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::arx::RowKey;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub fn matrix_from(labels: &[&str], rows: Vec<Vec<f64>>, y: Vec<f64>) -> DesignMatrix {
        let mut dm = DesignMatrix {
            labels: labels.iter().map(|s| s.to_string()).collect(),
            ..DesignMatrix::default()
        };
        for (i, row) in rows.iter().enumerate() {
            dm.x.extend_from_slice(row);
            dm.y.push(y[i]);
            dm.current.push(0.0);
            dm.provenance.push(RowKey { month: 1, replication: 0, window: i as u32 });
        }
        dm
    }

    pub fn random_instance(n: usize, p: usize, seed: u64, noise: f64) -> (DesignMatrix, Vec<f64>) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let truth: Vec<f64> = (0..p).map(|_| rng.random_range(-3.0..3.0)).collect();
        let labels: Vec<String> = (0..p).map(|k| format!("x{k} lag1")).collect();
        let mut dm = DesignMatrix {
            labels,
            ..DesignMatrix::default()
        };
        for i in 0..n {
            let row: Vec<f64> = (0..p).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut y = 1.5;
            for k in 0..p {
                y += truth[k] * row[k];
            }
            y += noise * (rng.random::<f64>() - 0.5);
            dm.x.extend_from_slice(&row);
            dm.y.push(y);
            dm.current.push(0.0);
            dm.provenance.push(RowKey { month: 1, replication: 0, window: i as u32 });
        }
        (dm, truth)
    }

    /// Independent oracle: explicitly form XᵀX and solve the normal
    /// equations by Gaussian elimination with partial pivoting.
    pub fn normal_equations_oracle(dm: &DesignMatrix) -> Vec<f64> {
        let n = dm.n_rows();
        let p = dm.n_cols() + 1;
        let xi = |i: usize, j: usize| -> f64 {
            if j == 0 {
                1.0
            } else {
                dm.row(i)[j - 1]
            }
        };
        let mut a = vec![vec![0.0; p + 1]; p];
        for r in 0..p {
            for c in 0..p {
                let mut s = 0.0;
                for i in 0..n {
                    s += xi(i, r) * xi(i, c);
                }
                a[r][c] = s;
            }
            let mut s = 0.0;
            for i in 0..n {
                s += xi(i, r) * dm.y[i];
            }
            a[r][p] = s;
        }
        for col in 0..p {
            let piv = (col..p).max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs())).unwrap();
            a.swap(col, piv);
            let d = a[col][col];
            for c in col..=p {
                a[col][c] /= d;
            }
            for r in 0..p {
                if r != col && a[r][col] != 0.0 {
                    let f = a[r][col];
                    for c in col..=p {
                        a[r][c] -= f * a[col][c];
                    }
                }
            }
        }
        (0..p).map(|r| a[r][p]).collect()
    }

    #[test]
    fn exact_linear_recovery() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let rows: Vec<Vec<f64>> = (0..60)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let y: Vec<f64> = rows.iter().map(|r| 2.0 * r[0] - 3.0 * r[1]).collect();
        let dm = matrix_from(&["x1 lag1", "x2 lag1"], rows, y);
        let (model, _) = fit_ols(&dm).unwrap();
        assert!((model.coefficients[0].1 - 2.0).abs() < 1e-8);
        assert!((model.coefficients[1].1 + 3.0).abs() < 1e-8);
        assert!(model.intercept.abs() < 1e-8);
    }

    #[test]
    fn constant_target_gives_intercept_only() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let rows: Vec<Vec<f64>> = (0..50)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let y = vec![7.5; 50];
        let dm = matrix_from(&["x1 lag1", "x2 lag1"], rows, y);
        let (model, _) = fit_ols(&dm).unwrap();
        assert!((model.intercept - 7.5).abs() < 1e-10);
        for (_, c) in &model.coefficients {
            assert!(c.abs() < 1e-10);
        }
        assert!(model.selected.is_empty());
    }

    #[test]
    fn matches_normal_equations_oracle_on_random_instances() {
        for seed in 0..5 {
            let (dm, _) = random_instance(200, 16, seed, 0.4);
            let (model, _) = fit_ols(&dm).unwrap();
            let oracle = normal_equations_oracle(&dm);
            let scale = oracle.iter().fold(1.0f64, |m, v| m.max(v.abs()));
            assert!((model.intercept - oracle[0]).abs() / scale < 1e-8);
            for (k, (_, c)) in model.coefficients.iter().enumerate() {
                assert!((c - oracle[k + 1]).abs() / scale < 1e-8, "seed {seed} col {k}");
            }
        }
    }

    #[test]
    fn residuals_are_orthogonal_to_regressors() {
        let (dm, _) = random_instance(150, 8, 9, 1.0);
        let (model, _) = fit_ols(&dm).unwrap();
        let preds = model.predict_matrix(&dm).unwrap();
        let resid: Vec<f64> = dm.y.iter().zip(&preds).map(|(y, p)| y - p).collect();
        let rnorm = resid.iter().map(|r| r * r).sum::<f64>().sqrt();
        for k in 0..dm.n_cols() {
            let col: Vec<f64> = dm.column(k).collect();
            let cnorm = col.iter().map(|c| c * c).sum::<f64>().sqrt();
            let dot: f64 = resid.iter().zip(&col).map(|(r, c)| r * c).sum();
            assert!(dot.abs() < 1e-6 * rnorm * cnorm, "column {k}: {dot}");
        }
    }

    #[test]
    fn strong_signal_is_selected_noise_is_not() {
        let mut rng = ChaCha8Rng::seed_from_u64(10);
        let rows: Vec<Vec<f64>> = (0..300)
            .map(|_| vec![rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)])
            .collect();
        let y: Vec<f64> = rows
            .iter()
            .map(|r| 5.0 * r[0] + 0.05 * (rng.random::<f64>() - 0.5))
            .collect();
        let dm = matrix_from(&["signal lag1", "noise lag1"], rows, y);
        let (model, diag) = fit_ols(&dm).unwrap();
        assert!(model.selected.contains("signal lag1"));
        assert!(diag.p_values[1].unwrap() < 1e-10);
    }
}
