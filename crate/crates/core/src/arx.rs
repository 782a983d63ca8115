//! Lagged regression dataset: autoregressive target lags plus lagged
//! exogenous inputs, with the month-based train/test split and the
//! column-to-RSU bookkeeping behind the sensing-plan reports.

use std::collections::BTreeSet;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{var_name, FeatureWindow, N_INPUT_VARS, TARGET_NAME};

/// Months 1..=this train; the rest test.
pub const TRAIN_MONTHS: u32 = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArxConfig {
    /// Prediction horizon in five-minute windows (5 = 25 minutes ahead).
    pub lahead: u32,
    /// Autoregressive lag count on the target.
    pub n_a: usize,
    /// Exogenous lag count, one per input variable.
    pub n_b: Vec<usize>,
    /// Also include lag 0 (the current observation) for each input. The
    /// backshift sums start at lag 1; this is an opt-in extension.
    pub include_current: bool,
}

impl Default for ArxConfig {
    fn default() -> Self {
        ArxConfig {
            lahead: 5,
            n_a: 3,
            n_b: vec![3; N_INPUT_VARS],
            include_current: false,
        }
    }
}

impl ArxConfig {
    pub fn validate(&self) -> Result<()> {
        if self.lahead < 1 {
            return Err(Error::config("arx.lahead", "must be >= 1"));
        }
        if self.n_a < 1 {
            return Err(Error::config("arx.n_a", "must be >= 1"));
        }
        if self.n_b.len() != N_INPUT_VARS {
            return Err(Error::config(
                "arx.n_b",
                format!("expected {N_INPUT_VARS} lag counts, got {}", self.n_b.len()),
            ));
        }
        if self.n_b.iter().any(|&n| n < 1) {
            return Err(Error::config("arx.n_b", "all lag counts must be >= 1"));
        }
        Ok(())
    }

    pub fn max_lag(&self) -> usize {
        self.n_a.max(self.n_b.iter().copied().max().unwrap_or(0))
    }

    /// Column labels in design order: AR lags of the target, then each
    /// input's lags.
    pub fn labels(&self) -> Vec<String> {
        let mut out = Vec::new();
        for j in 1..=self.n_a {
            out.push(format!("{TARGET_NAME} lag{j}"));
        }
        for (i, &nb) in self.n_b.iter().enumerate() {
            let j0 = if self.include_current { 0 } else { 1 };
            for j in j0..=nb {
                out.push(format!("{} lag{j}", var_name(i)));
            }
        }
        out
    }
}

/// Row provenance: which simulated day and window produced it.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct RowKey {
    pub month: u32,
    pub replication: u32,
    pub window: u32,
}

/// Labeled lagged regressor matrix with aligned target. `current` carries
/// the target's value at the row's own window (for the persistence
/// baseline); it is not a regressor.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct DesignMatrix {
    pub labels: Vec<String>,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub current: Vec<f64>,
    pub provenance: Vec<RowKey>,
}

impl DesignMatrix {
    pub fn n_rows(&self) -> usize {
        self.y.len()
    }

    pub fn n_cols(&self) -> usize {
        self.labels.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let p = self.n_cols();
        &self.x[i * p..(i + 1) * p]
    }

    pub fn column(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        let p = self.n_cols();
        self.x.iter().skip(k).step_by(p).copied()
    }

    fn push_row(&mut self, key: RowKey, row: &[f64], y: f64, current: f64) {
        self.x.extend_from_slice(row);
        self.y.push(y);
        self.current.push(current);
        self.provenance.push(key);
    }
}

/// Build the lagged design from feature rows sorted by (month, replication,
/// window). Lags never cross a day/replication boundary; a day shorter than
/// the required lags contributes nothing (with a warning).
pub fn build_design(features: &[FeatureWindow], cfg: &ArxConfig) -> Result<DesignMatrix> {
    cfg.validate()?;
    debug_assert!(features.windows(2).all(|w| {
        (w[0].month, w[0].replication, w[0].window)
            <= (w[1].month, w[1].replication, w[1].window)
    }));
    let mut dm = DesignMatrix {
        labels: cfg.labels(),
        ..DesignMatrix::default()
    };
    let p = dm.labels.len();
    let max_lag = cfg.max_lag();
    let lahead = cfg.lahead as usize;

    let mut row = vec![0.0; p];
    let mut start = 0;
    while start < features.len() {
        let key = (features[start].month, features[start].replication);
        let mut end = start + 1;
        while end < features.len()
            && (features[end].month, features[end].replication) == key
        {
            end += 1;
        }
        let day = &features[start..end];
        for w in day.windows(2) {
            if w[1].window != w[0].window + 1 {
                return Err(Error::Shape(format!(
                    "non-contiguous windows {} -> {} in month {} replication {}",
                    w[0].window, w[1].window, key.0, key.1
                )));
            }
        }
        if day.len() <= max_lag + lahead {
            log::warn!(
                "month {} replication {}: {} windows is too short for lags {} + horizon {}",
                key.0,
                key.1,
                day.len(),
                max_lag,
                lahead
            );
        } else {
            for t in max_lag..(day.len() - lahead) {
                let mut c = 0;
                for j in 1..=cfg.n_a {
                    row[c] = day[t - j].tt_wz;
                    c += 1;
                }
                for (i, &nb) in cfg.n_b.iter().enumerate() {
                    let j0 = if cfg.include_current { 0 } else { 1 };
                    for j in j0..=nb {
                        row[c] = day[t - j].input(i);
                        c += 1;
                    }
                }
                debug_assert_eq!(c, p);
                dm.push_row(
                    RowKey {
                        month: day[t].month,
                        replication: day[t].replication,
                        window: day[t].window,
                    },
                    &row,
                    day[t + lahead].tt_wz,
                    day[t].tt_wz,
                );
            }
        }
        start = end;
    }
    Ok(dm)
}

/// Months 1..=10 train, 11..=12 test; no shuffling.
pub fn split_by_month(dm: &DesignMatrix) -> (DesignMatrix, DesignMatrix) {
    let mut train = DesignMatrix {
        labels: dm.labels.clone(),
        ..DesignMatrix::default()
    };
    let mut test = DesignMatrix {
        labels: dm.labels.clone(),
        ..DesignMatrix::default()
    };
    for i in 0..dm.n_rows() {
        let key = dm.provenance[i];
        let dst = if key.month <= TRAIN_MONTHS { &mut train } else { &mut test };
        dst.push_row(key, dm.row(i), dm.y[i], dm.current[i]);
    }
    if test.n_rows() == 0 {
        log::warn!("test split is empty (no months past {TRAIN_MONTHS} in the data)");
    }
    (train, test)
}

/// RSUs needed to observe one design column.
pub fn column_to_rsus(label: &str) -> Result<BTreeSet<u8>> {
    let (name, lag) = label
        .rsplit_once(' ')
        .ok_or_else(|| Error::UnknownColumn(label.to_string()))?;
    let lag_ok = lag.strip_prefix("lag").is_some_and(|j| j.parse::<u32>().is_ok());
    if !lag_ok {
        return Err(Error::UnknownColumn(label.to_string()));
    }
    let set: &[u8] = match name {
        "TT_wz" | "DownstreamFlow" | "WorkZoneEndAcc" | "Qlength" | "StartQueue" => &[1],
        "UpstreamFlow" => &[12],
        _ => {
            let i = name
                .strip_prefix("TT_")
                .and_then(|s| s.strip_suffix("_1"))
                .and_then(|s| s.parse::<u8>().ok())
                .filter(|i| (2..=12).contains(i))
                .ok_or_else(|| Error::UnknownColumn(label.to_string()))?;
            return Ok(BTreeSet::from([i, 1]));
        }
    };
    Ok(set.iter().copied().collect())
}

/// Design CSV: provenance, labeled regressors, the current target value,
/// then the target.
pub fn write_design_csv(path: &Path, dm: &DesignMatrix) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["month".to_string(), "replication".to_string(), "t".to_string()];
    header.extend(dm.labels.iter().cloned());
    header.push("tt_wz_current".to_string());
    header.push("target".to_string());
    w.write_record(&header)?;
    let mut rec: Vec<String> = Vec::with_capacity(header.len());
    for i in 0..dm.n_rows() {
        rec.clear();
        let k = dm.provenance[i];
        rec.push(k.month.to_string());
        rec.push(k.replication.to_string());
        rec.push(k.window.to_string());
        for v in dm.row(i) {
            rec.push(v.to_string());
        }
        rec.push(dm.current[i].to_string());
        rec.push(dm.y[i].to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_design_csv(path: &Path) -> Result<DesignMatrix> {
    let mut rdr = csv::Reader::from_path(path)?;
    let header = rdr.headers()?.clone();
    if header.len() < 5
        || &header[0] != "month"
        || &header[header.len() - 2] != "tt_wz_current"
        || &header[header.len() - 1] != "target"
    {
        return Err(Error::Shape(format!("design CSV header mismatch at {}", path.display())));
    }
    let labels: Vec<String> = header.iter().skip(3).take(header.len() - 5).map(String::from).collect();
    let mut dm = DesignMatrix {
        labels,
        ..DesignMatrix::default()
    };
    let p = dm.labels.len();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::Shape(format!("bad float `{}` in design CSV", &rec[i])))
        };
        let key = RowKey {
            month: rec[0].parse().map_err(|_| Error::Shape("bad month".into()))?,
            replication: rec[1].parse().map_err(|_| Error::Shape("bad replication".into()))?,
            window: rec[2].parse().map_err(|_| Error::Shape("bad window".into()))?,
        };
        let mut row = Vec::with_capacity(p);
        for i in 0..p {
            row.push(f(3 + i)?);
        }
        let current = f(3 + p)?;
        let y = f(4 + p)?;
        dm.push_row(key, &row, y, current);
    }
    Ok(dm)
}

/// Companion manifest: label -> RSUs that supply it.
pub fn write_columns_manifest(path: &Path, labels: &[String]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["label", "rsus"])?;
    for label in labels {
        let rsus = column_to_rsus(label)?;
        let list = rsus.iter().map(u8::to_string).collect::<Vec<_>>().join(";");
        w.write_record([label.as_str(), &list])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::TT_SEG_COUNT;

    fn fw(month: u32, replication: u32, window: u32, tt_wz: f64) -> FeatureWindow {
        FeatureWindow {
            month,
            replication,
            window,
            tt_seg: [170.0; TT_SEG_COUNT],
            upstream_flow: 10.0,
            downstream_flow: 9.0,
            wz_end_acc: 0.1,
            q_length: 0.0,
            start_queue: 0.0,
            tt_wz,
            missing_mask: 0,
            q_vehicles: 0,
        }
    }

    fn day(n: u32) -> Vec<FeatureWindow> {
        (0..n).map(|t| fw(1, 0, t, f64::from(t))).collect()
    }

    fn unit_cfg() -> ArxConfig {
        ArxConfig {
            lahead: 5,
            n_a: 1,
            n_b: vec![1; N_INPUT_VARS],
            include_current: false,
        }
    }

    /// Independent counting oracle: enumerate windows t and check lag/target
    /// bounds directly.
    fn brute_force_rows(day_len: u32, n_a: usize, n_b_max: usize, lahead: u32) -> usize {
        let max_lag = n_a.max(n_b_max) as i64;
        (0..i64::from(day_len))
            .filter(|&t| t - max_lag >= 0 && t + i64::from(lahead) < i64::from(day_len))
            .count()
    }

    #[test]
    fn row_count_matches_counting_oracle() {
        let dm = build_design(&day(288), &unit_cfg()).unwrap();
        assert_eq!(dm.n_rows(), 282);
        assert_eq!(dm.n_rows(), brute_force_rows(288, 1, 1, 5));

        let cfg = ArxConfig::default();
        let dm = build_design(&day(288), &cfg).unwrap();
        assert_eq!(dm.n_rows(), brute_force_rows(288, 3, 3, 5));
        assert_eq!(dm.n_cols(), 3 + 16 * 3);
    }

    #[test]
    fn constant_series_fills_constant_rows() {
        let rows: Vec<_> = (0..50).map(|t| fw(1, 0, t, 42.0)).collect();
        let dm = build_design(&rows, &unit_cfg()).unwrap();
        assert!(dm.n_rows() > 0);
        for i in 0..dm.n_rows() {
            assert_eq!(dm.row(i)[0], 42.0); // AR lag of the constant target
            assert_eq!(dm.y[i], 42.0);
        }
    }

    #[test]
    fn linear_series_index_bookkeeping() {
        // tt_wz(t) = t: the AR lag-1 column is t-1 and the target is t+5.
        let dm = build_design(&day(30), &unit_cfg()).unwrap();
        for i in 0..dm.n_rows() {
            let t = f64::from(dm.provenance[i].window);
            assert_eq!(dm.row(i)[0], t - 1.0);
            assert_eq!(dm.y[i], t + 5.0);
            assert_eq!(dm.current[i], t);
        }
    }

    #[test]
    fn lags_never_cross_replication_boundaries() {
        let mut rows = day(20);
        rows.extend((0..20).map(|t| fw(1, 1, t, 100.0 + f64::from(t))));
        let dm = build_design(&rows, &unit_cfg()).unwrap();
        // Each 20-window day yields 20 - 1 - 5 = 14 rows.
        assert_eq!(dm.n_rows(), 28);
        for i in 0..dm.n_rows() {
            let k = dm.provenance[i];
            let base = if k.replication == 1 { 100.0 } else { 0.0 };
            assert_eq!(dm.row(i)[0], base + f64::from(k.window) - 1.0);
        }
    }

    #[test]
    fn too_short_series_yields_empty_matrix() {
        let dm = build_design(&day(6), &unit_cfg()).unwrap();
        assert_eq!(dm.n_rows(), 0);
    }

    #[test]
    fn split_partitions_by_month() {
        let mut rows = Vec::new();
        for m in 1..=12 {
            rows.extend((0..20).map(|t| fw(m, 0, t, 1.0)));
        }
        let dm = build_design(&rows, &unit_cfg()).unwrap();
        let (train, test) = split_by_month(&dm);
        assert_eq!(train.n_rows() + test.n_rows(), dm.n_rows());
        assert!(train.provenance.iter().all(|k| k.month <= 10));
        assert!(test.provenance.iter().all(|k| k.month >= 11));
        assert_eq!(test.n_rows(), 2 * 14);
    }

    #[test]
    fn single_month_gives_empty_test_split() {
        let dm = build_design(&day(30), &unit_cfg()).unwrap();
        let (train, test) = split_by_month(&dm);
        assert_eq!(test.n_rows(), 0);
        assert_eq!(train.n_rows(), dm.n_rows());
    }

    #[test]
    fn rebuild_is_identical() {
        let rows = day(60);
        let cfg = ArxConfig::default();
        let a = build_design(&rows, &cfg).unwrap();
        let b = build_design(&rows, &cfg).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn regressors_precede_target_in_time() {
        let cfg = ArxConfig::default();
        let dm = build_design(&day(40), &cfg).unwrap();
        for k in &dm.provenance {
            // Newest regressor is window - 1; target sits at window + lahead.
            assert!(k.window >= cfg.max_lag() as u32);
            assert!(i64::from(k.window) - 1 < i64::from(k.window + cfg.lahead));
        }
    }

    #[test]
    fn rsu_mapping_matches_variable_sources() {
        assert_eq!(column_to_rsus("TT_10_1 lag2").unwrap(), BTreeSet::from([1, 10]));
        assert_eq!(column_to_rsus("UpstreamFlow lag1").unwrap(), BTreeSet::from([12]));
        assert_eq!(column_to_rsus("Qlength lag1").unwrap(), BTreeSet::from([1]));
        assert_eq!(column_to_rsus("TT_wz lag3").unwrap(), BTreeSet::from([1]));
        assert_eq!(column_to_rsus("DownstreamFlow lag2").unwrap(), BTreeSet::from([1]));
        assert!(column_to_rsus("Bogus lag1").is_err());
        assert!(column_to_rsus("TT_13_1 lag1").is_err());
        assert!(column_to_rsus("TT_10_1").is_err());
    }

    #[test]
    fn design_csv_roundtrip() {
        let dm = build_design(&day(40), &ArxConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("design.csv");
        write_design_csv(&path, &dm).unwrap();
        let back = read_design_csv(&path).unwrap();
        assert_eq!(dm, back);
    }

    #[test]
    fn labels_include_lag_zero_when_opted_in() {
        let mut cfg = unit_cfg();
        cfg.include_current = true;
        let labels = cfg.labels();
        assert!(labels.contains(&"UpstreamFlow lag0".to_string()));
        assert!(!labels.contains(&"TT_wz lag0".to_string()));
        let dm = build_design(&day(30), &cfg).unwrap();
        assert_eq!(dm.n_cols(), 1 + 16 * 2);
    }
}
