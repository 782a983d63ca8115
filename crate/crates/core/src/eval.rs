//! Test-set scoring, the significance matrix, RSU placement plans, and the
//! error histogram export.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::arx::{column_to_rsus, DesignMatrix, RowKey};
use crate::error::{Error, Result};
use crate::features::{var_name, N_INPUT_VARS};
use crate::learners::{FittedModel, ModelKind};

/// Root mean squared error, seconds.
pub fn rmse(predictions: &[f64], actuals: &[f64]) -> Result<f64> {
    if predictions.len() != actuals.len() {
        return Err(Error::Shape(format!(
            "rmse length mismatch: {} predictions vs {} actuals",
            predictions.len(),
            actuals.len()
        )));
    }
    if predictions.is_empty() {
        return Err(Error::Shape("rmse over empty vectors".into()));
    }
    let mse = predictions
        .iter()
        .zip(actuals)
        .map(|(p, a)| (p - a) * (p - a))
        .sum::<f64>()
        / predictions.len() as f64;
    Ok(mse.sqrt())
}

/// RSUs a model needs: the union over its selected columns.
pub fn rsu_plan(model: &FittedModel) -> Result<BTreeSet<u8>> {
    let mut out = BTreeSet::new();
    for label in &model.selected {
        out.extend(column_to_rsus(label)?);
    }
    Ok(out)
}

/// Naive baseline: predict the future value as the current one.
pub fn persistence_baseline(test: &DesignMatrix) -> Result<f64> {
    rmse(&test.current, &test.y)
}

/// Histogram of prediction errors over bins `[k·w, (k+1)·w)` symmetric
/// about zero. Returns (lo, hi, count) sorted by lo; counts sum to the
/// number of errors.
pub fn error_histogram(errors: &[f64], bin_width: f64) -> Vec<(f64, f64, u64)> {
    assert!(bin_width > 0.0, "bin width must be positive");
    let mut counts = std::collections::BTreeMap::<i64, u64>::new();
    for e in errors {
        let k = (e / bin_width).floor() as i64;
        *counts.entry(k).or_insert(0) += 1;
    }
    counts
        .into_iter()
        .map(|(k, c)| (k as f64 * bin_width, (k + 1) as f64 * bin_width, c))
        .collect()
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ReportEntry {
    pub model: String,
    pub rmse_s: f64,
    pub n_rsus: usize,
    pub rsus: Vec<u8>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvaluationReport {
    /// Ranked by RMSE ascending; persistence baseline last.
    pub entries: Vec<ReportEntry>,
    /// Input variable x model significance stars (paper column order:
    /// linear regression, MARS, stepwise, elastic net).
    pub stars: Vec<(String, [bool; 4])>,
    /// Error histogram (actual − predicted) for the stepwise model.
    pub histogram: Vec<(f64, f64, u64)>,
    /// Per test row: provenance, actual, one prediction column per model,
    /// persistence last.
    pub prediction_rows: Vec<PredictionRow>,
    pub model_order: Vec<String>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct PredictionRow {
    pub key: RowKey,
    pub actual: f64,
    pub predicted: Vec<f64>,
}

pub const STAR_MODEL_ORDER: [ModelKind; 4] = [
    ModelKind::LinearRegression,
    ModelKind::Mars,
    ModelKind::Stepwise,
    ModelKind::ElasticNet,
];

/// Score fitted models on the test split and assemble the report.
pub fn evaluate_models(
    models: &[FittedModel],
    test: &DesignMatrix,
    hist_bin_width_s: f64,
) -> Result<EvaluationReport> {
    if test.n_rows() == 0 {
        return Err(Error::Shape("evaluation needs a non-empty test split".into()));
    }
    let mut entries = Vec::new();
    let mut preds_per_model: Vec<Vec<f64>> = Vec::new();
    let mut order: Vec<String> = Vec::new();
    let mut stepwise_errors: Option<Vec<f64>> = None;

    for model in models {
        let preds = model.predict_matrix(test)?;
        let err = rmse(&preds, &test.y)?;
        let rsus = rsu_plan(model)?;
        entries.push(ReportEntry {
            model: model.kind.name().to_string(),
            rmse_s: err,
            n_rsus: rsus.len(),
            rsus: rsus.into_iter().collect(),
        });
        if model.kind == ModelKind::Stepwise {
            stepwise_errors = Some(
                test.y.iter().zip(&preds).map(|(a, p)| a - p).collect(),
            );
        }
        order.push(model.kind.name().to_string());
        preds_per_model.push(preds);
    }

    // Persistence baseline rides along: it watches TT_wz, an RSU-1 quantity.
    let persist_rmse = persistence_baseline(test)?;
    entries.sort_by(|a, b| a.rmse_s.total_cmp(&b.rmse_s));
    entries.push(ReportEntry {
        model: "persistence".to_string(),
        rmse_s: persist_rmse,
        n_rsus: 1,
        rsus: vec![1],
    });
    order.push("persistence".to_string());
    preds_per_model.push(test.current.clone());

    let mut stars = Vec::with_capacity(N_INPUT_VARS);
    for v in 0..N_INPUT_VARS {
        let name = var_name(v);
        let mut row = [false; 4];
        for (slot, kind) in STAR_MODEL_ORDER.iter().enumerate() {
            if let Some(model) = models.iter().find(|m| m.kind == *kind) {
                row[slot] = model
                    .selected
                    .iter()
                    .any(|label| label.rsplit_once(" lag").is_some_and(|(n, _)| n == name));
            }
        }
        stars.push((name.to_string(), row));
    }

    let histogram = match stepwise_errors {
        Some(errs) => error_histogram(&errs, hist_bin_width_s),
        None => Vec::new(),
    };

    let prediction_rows = (0..test.n_rows())
        .map(|i| PredictionRow {
            key: test.provenance[i],
            actual: test.y[i],
            predicted: preds_per_model.iter().map(|p| p[i]).collect(),
        })
        .collect();

    Ok(EvaluationReport {
        entries,
        stars,
        histogram,
        prediction_rows,
        model_order: order,
    })
}

pub fn write_report_csv(path: &Path, report: &EvaluationReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["model", "rmse_s", "n_rsus", "rsu_list"])?;
    for e in &report.entries {
        let list = e.rsus.iter().map(u8::to_string).collect::<Vec<_>>().join(";");
        w.write_record([e.model.as_str(), &e.rmse_s.to_string(), &e.n_rsus.to_string(), &list])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_stars_csv(path: &Path, report: &EvaluationReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["variable", "linear_regression", "mars", "stepwise", "elastic_net"])?;
    for (name, row) in &report.stars {
        let cell = |b: bool| if b { "*" } else { "" };
        w.write_record([name.as_str(), cell(row[0]), cell(row[1]), cell(row[2]), cell(row[3])])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_hist_csv(path: &Path, report: &EvaluationReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["bin_lo", "bin_hi", "count"])?;
    for (lo, hi, c) in &report.histogram {
        w.write_record([lo.to_string(), hi.to_string(), c.to_string()])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_predictions_csv(path: &Path, report: &EvaluationReport) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["month".to_string(), "replication".to_string(), "t".to_string(), "actual".to_string()];
    for m in &report.model_order {
        header.push(format!("pred_{m}"));
    }
    w.write_record(&header)?;
    for row in &report.prediction_rows {
        let mut rec = vec![
            row.key.month.to_string(),
            row.key.replication.to_string(),
            row.key.window.to_string(),
            row.actual.to_string(),
        ];
        rec.extend(row.predicted.iter().map(f64::to_string));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    fn model_with(kind: ModelKind, selected: &[&str]) -> FittedModel {
        FittedModel {
            kind,
            intercept: 0.0,
            coefficients: vec![],
            basis: vec![],
            selected: selected.iter().map(|s| s.to_string()).collect(),
            standardization: None,
        }
    }

    #[test]
    fn rmse_basics() {
        assert_eq!(rmse(&[1.0, 2.0], &[1.0, 2.0]).unwrap(), 0.0);
        // Constant offset c gives |c|.
        let r = rmse(&[4.0, 5.0], &[1.0, 2.0]).unwrap();
        assert!((r - 3.0).abs() < 1e-12);
        // ([0,0] vs [3,4]) -> sqrt(12.5).
        let r = rmse(&[0.0, 0.0], &[3.0, 4.0]).unwrap();
        assert!((r - 12.5f64.sqrt()).abs() < 1e-12);
        assert!(rmse(&[1.0], &[1.0, 2.0]).is_err());
        assert!(rmse(&[], &[]).is_err());
    }

    #[test]
    fn plans_follow_selected_columns() {
        let m = model_with(
            ModelKind::Stepwise,
            &["TT_12_1 lag1", "TT_wz lag2"],
        );
        assert_eq!(rsu_plan(&m).unwrap(), BTreeSet::from([1, 12]));

        let m = model_with(
            ModelKind::LinearRegression,
            &["TT_10_1 lag1", "TT_12_1 lag3", "UpstreamFlow lag1", "StartQueue lag2"],
        );
        assert_eq!(rsu_plan(&m).unwrap(), BTreeSet::from([1, 10, 12]));

        let m = model_with(ModelKind::Mars, &[]);
        assert!(rsu_plan(&m).unwrap().is_empty());
    }

    #[test]
    fn rsu1_present_whenever_an_rsu1_variable_is_selected() {
        for label in ["TT_7_1 lag1", "Qlength lag2", "WorkZoneEndAcc lag1", "TT_wz lag1"] {
            let m = model_with(ModelKind::ElasticNet, &[label]);
            assert!(rsu_plan(&m).unwrap().contains(&1), "{label}");
        }
    }

    #[test]
    fn persistence_on_linear_series_is_lahead_times_slope() {
        let slope = 2.5;
        let mut dm = DesignMatrix {
            labels: vec!["TT_wz lag1".into()],
            ..DesignMatrix::default()
        };
        for t in 0..40u32 {
            dm.x.push(0.0);
            dm.current.push(slope * f64::from(t));
            dm.y.push(slope * f64::from(t + 5));
            dm.provenance.push(RowKey { month: 11, replication: 0, window: t });
        }
        let r = persistence_baseline(&dm).unwrap();
        assert!((r - 5.0 * slope).abs() < 1e-12);

        // Constant series: zero error.
        dm.current = vec![100.0; 40];
        dm.y = vec![100.0; 40];
        assert_eq!(persistence_baseline(&dm).unwrap(), 0.0);
    }

    #[test]
    fn histogram_bins_match_hand_counts() {
        let h = error_histogram(&[0.0, 0.0, 0.0], 5.0);
        assert_eq!(h, vec![(0.0, 5.0, 3)]);

        let h = error_histogram(&[-15.0, 5.0, 5.0], 10.0);
        assert_eq!(h, vec![(-20.0, -10.0, 1), (0.0, 10.0, 2)]);

        let errs: Vec<f64> = (-20..20).map(|k| k as f64 * 1.7).collect();
        let h = error_histogram(&errs, 5.0);
        let total: u64 = h.iter().map(|(_, _, c)| c).sum();
        assert_eq!(total as usize, errs.len());
    }

    #[test]
    fn report_ranks_models_and_marks_stars() {
        let mut dm = DesignMatrix {
            labels: vec!["TT_12_1 lag1".into(), "UpstreamFlow lag1".into()],
            ..DesignMatrix::default()
        };
        for t in 0..30u32 {
            let v = f64::from(t);
            dm.x.extend_from_slice(&[v, 2.0 * v]);
            dm.current.push(v);
            dm.y.push(3.0 * v);
            dm.provenance.push(RowKey { month: 11, replication: 0, window: t });
        }
        let good = FittedModel {
            kind: ModelKind::Stepwise,
            intercept: 0.0,
            coefficients: vec![("TT_12_1 lag1".into(), 3.0), ("UpstreamFlow lag1".into(), 0.0)],
            basis: vec![],
            selected: BTreeSet::from(["TT_12_1 lag1".to_string()]),
            standardization: None,
        };
        let bad = FittedModel {
            kind: ModelKind::LinearRegression,
            intercept: 10.0,
            coefficients: vec![("TT_12_1 lag1".into(), 1.0), ("UpstreamFlow lag1".into(), 0.5)],
            basis: vec![],
            selected: BTreeSet::from(["UpstreamFlow lag1".to_string()]),
            standardization: None,
        };
        let report = evaluate_models(&[bad, good], &dm, 5.0).unwrap();
        assert_eq!(report.entries[0].model, "stepwise");
        assert!(report.entries[0].rmse_s < 1e-9);
        assert_eq!(report.entries.last().unwrap().model, "persistence");
        // Stepwise picked TT_12_1: star in column 2; linear picked
        // UpstreamFlow: star in column 0.
        let tt12 = report.stars.iter().find(|(n, _)| n == "TT_12_1").unwrap();
        assert_eq!(tt12.1, [false, false, true, false]);
        let up = report.stars.iter().find(|(n, _)| n == "UpstreamFlow").unwrap();
        assert_eq!(up.1, [true, false, false, false]);
        // Histogram present for the stepwise model and counts cover rows.
        let total: u64 = report.histogram.iter().map(|(_, _, c)| c).sum();
        assert_eq!(total as usize, dm.n_rows());
    }
}
