//! The four travel-time predictors behind a shared model surface:
//! ordinary least squares, forward/backward stepwise with the risk
//! inflation criterion, elastic net, and adaptive regression splines.

mod elastic_net;
mod linear;
mod mars;
mod stepwise;

pub use elastic_net::{fit_elastic_net, ElasticNetConfig, ElasticNetDiagnostics};
pub use linear::{fit_ols, OlsDiagnostics};
pub use mars::{fit_mars, MarsConfig, MarsDiagnostics};
pub use stepwise::{fit_stepwise, is_ric_fixed_point, ric_penalty, StepwiseDiagnostics};

use std::collections::BTreeSet;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::arx::DesignMatrix;
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    LinearRegression,
    Stepwise,
    ElasticNet,
    Mars,
}

impl ModelKind {
    pub fn name(&self) -> &'static str {
        match self {
            ModelKind::LinearRegression => "linear_regression",
            ModelKind::Stepwise => "stepwise",
            ModelKind::ElasticNet => "elastic_net",
            ModelKind::Mars => "mars",
        }
    }
}

/// `max(0, x - knot)` when rising, `max(0, knot - x)` otherwise.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hinge {
    pub label: String,
    pub knot: f64,
    pub rising: bool,
}

impl Hinge {
    pub fn eval(&self, x: f64) -> f64 {
        if self.rising {
            (x - self.knot).max(0.0)
        } else {
            (self.knot - x).max(0.0)
        }
    }
}

/// One spline basis function: a weighted product of at most two hinges.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarsTerm {
    pub weight: f64,
    pub hinges: Vec<Hinge>,
}

/// Column centering/scaling applied before an elastic-net fit. Reported for
/// reproducibility; coefficients are already folded back to original units.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardization {
    pub labels: Vec<String>,
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
    pub y_mean: f64,
    pub y_scale: f64,
}

/// A fitted predictor: linear kinds carry labeled coefficients, the spline
/// kind carries its basis. `selected` is the model's significant-variable
/// set (columns, by label).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FittedModel {
    pub kind: ModelKind,
    pub intercept: f64,
    #[serde(default)]
    pub coefficients: Vec<(String, f64)>,
    #[serde(default)]
    pub basis: Vec<MarsTerm>,
    pub selected: BTreeSet<String>,
    #[serde(default)]
    pub standardization: Option<Standardization>,
}

impl FittedModel {
    /// Resolve the model's column labels against a row layout once.
    pub fn bind(&self, labels: &[String]) -> Result<BoundModel> {
        let find = |label: &str| -> Result<usize> {
            labels
                .iter()
                .position(|l| l == label)
                .ok_or_else(|| Error::MissingColumn(label.to_string()))
        };
        let mut linear = Vec::with_capacity(self.coefficients.len());
        for (label, coef) in &self.coefficients {
            linear.push((find(label)?, *coef));
        }
        let mut terms = Vec::with_capacity(self.basis.len());
        for term in &self.basis {
            let mut hinges = Vec::with_capacity(term.hinges.len());
            for h in &term.hinges {
                hinges.push((find(&h.label)?, h.knot, h.rising));
            }
            terms.push((term.weight, hinges));
        }
        Ok(BoundModel {
            intercept: self.intercept,
            linear,
            terms,
        })
    }

    /// Predict one row given its column labels. For repeated use, `bind`
    /// once and reuse the result.
    pub fn predict_row(&self, labels: &[String], row: &[f64]) -> Result<f64> {
        Ok(self.bind(labels)?.predict(row))
    }

    /// Test-set predictions for a whole design matrix.
    pub fn predict_matrix(&self, dm: &DesignMatrix) -> Result<Vec<f64>> {
        let bound = self.bind(&dm.labels)?;
        Ok((0..dm.n_rows()).map(|i| bound.predict(dm.row(i))).collect())
    }
}

/// Label-resolved evaluator.
#[derive(Debug, Clone)]
pub struct BoundModel {
    intercept: f64,
    linear: Vec<(usize, f64)>,
    terms: Vec<(f64, Vec<(usize, f64, bool)>)>,
}

impl BoundModel {
    pub fn predict(&self, row: &[f64]) -> f64 {
        let mut y = self.intercept;
        for (idx, coef) in &self.linear {
            y += coef * row[*idx];
        }
        for (weight, hinges) in &self.terms {
            let mut v = *weight;
            for (idx, knot, rising) in hinges {
                let x = row[*idx];
                v *= if *rising { (x - knot).max(0.0) } else { (knot - x).max(0.0) };
                if v == 0.0 {
                    break;
                }
            }
            y += v;
        }
        y
    }
}

/// Serialize models to JSON (reloadable, bit-identical predictions).
pub fn save_models(path: &Path, models: &[FittedModel]) -> Result<()> {
    let file = std::fs::File::create(path)?;
    serde_json::to_writer_pretty(std::io::BufWriter::new(file), models)?;
    Ok(())
}

pub fn load_models(path: &Path) -> Result<Vec<FittedModel>> {
    let file = std::fs::File::open(path)?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

// ---------------------------------------------------------------------------
// Shared least-squares core.

/// Pivoted-QR least squares on a tall matrix. Dependent columns are dropped
/// (coefficient zero) and reported.
#[derive(Debug, Clone)]
pub(crate) struct Lsq {
    pub beta: Vec<f64>,
    pub rank: usize,
    pub dropped: Vec<usize>,
    pub rss: f64,
    /// Diagonal of (XᵀX)⁻¹ restricted to kept columns (None for dropped).
    pub xtx_inv_diag: Vec<Option<f64>>,
}

pub(crate) fn least_squares(x: &DMatrix<f64>, y: &DVector<f64>) -> Result<Lsq> {
    let (n, p) = x.shape();
    if n < p || p == 0 {
        return Err(Error::Fit(format!("least squares needs rows >= columns, got {n}x{p}")));
    }
    let qr = x.clone().col_piv_qr();
    let r = qr.r();
    let r00 = r[(0, 0)].abs();
    let tol = r00.max(1.0) * 1e-10;
    let mut rank = 0;
    while rank < p && r[(rank, rank)].abs() > tol {
        rank += 1;
    }
    if rank == 0 {
        return Err(Error::Fit("design matrix is numerically zero".into()));
    }

    let mut c = y.clone();
    qr.q_tr_mul(&mut c);

    // Back-substitute the rank x rank leading block.
    let mut z = vec![0.0; p];
    for i in (0..rank).rev() {
        let mut s = c[i];
        for j in (i + 1)..rank {
            s -= r[(i, j)] * z[j];
        }
        z[i] = s / r[(i, i)];
    }
    let mut w = DVector::from_vec(z);
    qr.p().inv_permute_rows(&mut w);
    let beta: Vec<f64> = w.iter().copied().collect();

    // Map pivot slots back to original column indices.
    let mut slot = DVector::from_iterator(p, (0..p).map(|i| i as f64));
    qr.p().inv_permute_rows(&mut slot);
    let pivot_pos: Vec<usize> = slot.iter().map(|v| *v as usize).collect();
    let dropped: Vec<usize> = (0..p).filter(|&o| pivot_pos[o] >= rank).collect();

    // Rows of R11^{-1} give the kept-column (XᵀX)⁻¹ diagonal.
    let mut rinv = DMatrix::zeros(rank, rank);
    for k in 0..rank {
        rinv[(k, k)] = 1.0 / r[(k, k)];
        for i in (0..k).rev() {
            let mut s = 0.0;
            for j in (i + 1)..=k {
                s += r[(i, j)] * rinv[(j, k)];
            }
            rinv[(i, k)] = -s / r[(i, i)];
        }
    }
    let mut xtx_inv_diag = vec![None; p];
    for o in 0..p {
        let j = pivot_pos[o];
        if j < rank {
            let norm2: f64 = (j..rank).map(|k| rinv[(j, k)] * rinv[(j, k)]).sum();
            xtx_inv_diag[o] = Some(norm2);
        }
    }

    let resid = y - x * DVector::from_column_slice(&beta);
    let rss = resid.dot(&resid);

    Ok(Lsq {
        beta,
        rank,
        dropped,
        rss,
        xtx_inv_diag,
    })
}

/// Gram-subset RSS evaluator: RSS(S) = yᵀy − b_Sᵀ (Xᵀy)_S with
/// G_SS b_S = (Xᵀy)_S. Singular subsets report +inf.
pub(crate) struct GramRss {
    gram: DMatrix<f64>,
    xty: DVector<f64>,
    yty: f64,
}

impl GramRss {
    pub(crate) fn new(x: &DMatrix<f64>, y: &DVector<f64>) -> GramRss {
        GramRss {
            gram: x.tr_mul(x),
            xty: x.tr_mul(y),
            yty: y.dot(y),
        }
    }

    pub(crate) fn rss(&self, subset: &[usize]) -> f64 {
        let m = subset.len();
        let g = DMatrix::from_fn(m, m, |i, j| self.gram[(subset[i], subset[j])]);
        let b = DVector::from_fn(m, |i, _| self.xty[subset[i]]);
        match nalgebra::Cholesky::new(g) {
            Some(ch) => {
                let sol = ch.solve(&b);
                (self.yty - sol.dot(&b)).max(0.0)
            }
            None => f64::INFINITY,
        }
    }
}

/// Design matrix with a leading intercept column.
pub(crate) fn with_intercept(dm: &DesignMatrix) -> DMatrix<f64> {
    let (n, p) = (dm.n_rows(), dm.n_cols());
    DMatrix::from_fn(n, p + 1, |i, j| if j == 0 { 1.0 } else { dm.row(i)[j - 1] })
}

pub(crate) fn target_vector(dm: &DesignMatrix) -> DVector<f64> {
    DVector::from_column_slice(&dm.y)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn pivoted_qr_recovers_exact_coefficients() {
        // y = 3 + 2 x1 - 3 x2, no noise.
        let n = 40;
        let x = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => 1.0,
            1 => (i as f64 * 0.37).sin(),
            _ => (i as f64 * 0.11).cos() * 2.0,
        });
        let y = DVector::from_fn(n, |i, _| 3.0 + 2.0 * x[(i, 1)] - 3.0 * x[(i, 2)]);
        let fit = least_squares(&x, &y).unwrap();
        assert_eq!(fit.rank, 3);
        assert!((fit.beta[0] - 3.0).abs() < 1e-10);
        assert!((fit.beta[1] - 2.0).abs() < 1e-10);
        assert!((fit.beta[2] + 3.0).abs() < 1e-10);
        assert!(fit.rss < 1e-18);
    }

    #[test]
    fn duplicate_column_is_dropped_not_fatal() {
        let n = 30;
        let mut x = DMatrix::from_fn(n, 3, |i, j| match j {
            0 => 1.0,
            _ => (i as f64 * 0.29).sin(),
        });
        // Column 2 duplicates column 1 exactly.
        for i in 0..n {
            x[(i, 2)] = x[(i, 1)];
        }
        let y = DVector::from_fn(n, |i, _| 1.0 + 4.0 * x[(i, 1)]);
        let fit = least_squares(&x, &y).unwrap();
        assert_eq!(fit.rank, 2);
        assert_eq!(fit.dropped.len(), 1);
        // The kept pair still reproduces the signal.
        let yhat = &x * DVector::from_column_slice(&fit.beta);
        assert!((yhat - y).norm() < 1e-8);
    }

    #[test]
    fn bound_model_evaluates_hinges() {
        let model = FittedModel {
            kind: ModelKind::Mars,
            intercept: 1.0,
            coefficients: vec![],
            basis: vec![MarsTerm {
                weight: 2.0,
                hinges: vec![Hinge { label: "a".into(), knot: 0.5, rising: true }],
            }],
            selected: BTreeSet::from(["a".to_string()]),
            standardization: None,
        };
        let labels = vec!["a".to_string()];
        // Hinge inactive below the knot.
        assert_eq!(model.predict_row(&labels, &[0.3]).unwrap(), 1.0);
        assert!((model.predict_row(&labels, &[0.9]).unwrap() - (1.0 + 2.0 * 0.4)).abs() < 1e-12);
    }

    #[test]
    fn missing_column_is_a_named_error() {
        let model = FittedModel {
            kind: ModelKind::LinearRegression,
            intercept: 0.0,
            coefficients: vec![("TT_wz lag1".into(), 1.0)],
            basis: vec![],
            selected: BTreeSet::new(),
            standardization: None,
        };
        let err = model.predict_row(&["Other".to_string()], &[1.0]).unwrap_err();
        match err {
            Error::MissingColumn(c) => assert_eq!(c, "TT_wz lag1"),
            other => panic!("unexpected error {other}"),
        }
    }

    #[test]
    fn model_dump_roundtrips_bit_identically() {
        let model = FittedModel {
            kind: ModelKind::ElasticNet,
            intercept: 0.123456789012345678,
            coefficients: vec![("x1".into(), -3.0e-17), ("x2".into(), 2.5)],
            basis: vec![],
            selected: BTreeSet::from(["x2".to_string()]),
            standardization: Some(Standardization {
                labels: vec!["x1".into(), "x2".into()],
                mean: vec![0.1, 0.2],
                scale: vec![1.0, 2.0],
                y_mean: 5.0,
                y_scale: 3.0,
            }),
        };
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("models.json");
        save_models(&path, std::slice::from_ref(&model)).unwrap();
        let back = load_models(&path).unwrap();
        assert_eq!(back.len(), 1);
        assert_eq!(back[0], model);
        let labels = vec!["x1".to_string(), "x2".to_string()];
        let row = [0.7, -1.3];
        assert_eq!(
            model.predict_row(&labels, &row).unwrap().to_bits(),
            back[0].predict_row(&labels, &row).unwrap().to_bits()
        );
    }
}
