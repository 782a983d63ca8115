//! Five-minute aggregation of V2I data into the sixteen model inputs and the
//! work-zone travel-time target.

mod ops;
mod queue;

pub use ops::{
    flows, segment_travel_times, work_zone_travel_time, wz_end_acceleration, ExitPassageSet,
    Window, TT_SEG_COUNT, WINDOWS_PER_DAY, WINDOW_LEN_S,
};
pub use queue::{
    detect_queue, QueueDetection, QUEUE_MIN_VEHICLES, QUEUE_SPACING_MI, QUEUE_SPEED_MPH,
};

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sensing::SensingField;
use crate::sim::{RoadGeometry, World};

/// Width of the end-of-zone band used for the acceleration variable.
pub const WZ_END_BAND_MI: f64 = 0.1;

pub const N_INPUT_VARS: usize = 16;

/// Canonical input-variable names, in feature-table column order.
pub fn var_name(idx: usize) -> &'static str {
    const NAMES: [&str; N_INPUT_VARS] = [
        "TT_2_1", "TT_3_1", "TT_4_1", "TT_5_1", "TT_6_1", "TT_7_1", "TT_8_1", "TT_9_1",
        "TT_10_1", "TT_11_1", "TT_12_1", "UpstreamFlow", "DownstreamFlow", "WorkZoneEndAcc",
        "Qlength", "StartQueue",
    ];
    NAMES[idx]
}

pub const TARGET_NAME: &str = "TT_wz";

/// How queue state is observed: straight from the simulator, or
/// reconstructed from trajectories the RSUs have received so far.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum QueueMode {
    Oracle,
    V2i,
}

/// One five-minute row before the missing-value policy runs.
#[derive(Debug, Clone, PartialEq)]
pub struct RawWindow {
    pub month: u32,
    pub replication: u32,
    pub window: u32,
    pub tt_seg: [Option<f64>; TT_SEG_COUNT],
    pub upstream_flow: u32,
    pub downstream_flow: u32,
    pub wz_end_acc: Option<f64>,
    /// None when no queue snapshot could be formed (v2i mode, no coverage).
    pub q_length: Option<f64>,
    /// None when there is no queue (or no snapshot).
    pub start_queue: Option<f64>,
    pub q_vehicles: u32,
    pub tt_wz: Option<f64>,
}

/// Missing-mask bit for each value column of the feature table.
pub mod mask_bit {
    pub const TT_SEG_BASE: u32 = 0; // bits 0..=10 for TT_2_1..TT_12_1
    pub const UPSTREAM_FLOW: u32 = 11;
    pub const DOWNSTREAM_FLOW: u32 = 12;
    pub const WZ_END_ACC: u32 = 13;
    pub const Q_LENGTH: u32 = 14;
    pub const START_QUEUE: u32 = 15;
    pub const TT_WZ: u32 = 16;
}

/// One finished feature row: every field numeric, original missingness
/// recorded in `missing_mask`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureWindow {
    pub month: u32,
    pub replication: u32,
    pub window: u32,
    pub tt_seg: [f64; TT_SEG_COUNT],
    pub upstream_flow: f64,
    pub downstream_flow: f64,
    pub wz_end_acc: f64,
    pub q_length: f64,
    pub start_queue: f64,
    pub tt_wz: f64,
    pub missing_mask: u32,
    /// Auxiliary: queue size in vehicles (not a model input).
    pub q_vehicles: u32,
}

impl FeatureWindow {
    /// Input variable by canonical index (see [`var_name`]).
    pub fn input(&self, idx: usize) -> f64 {
        match idx {
            0..=10 => self.tt_seg[idx],
            11 => self.upstream_flow,
            12 => self.downstream_flow,
            13 => self.wz_end_acc,
            14 => self.q_length,
            15 => self.start_queue,
            _ => panic!("input index {idx} out of range"),
        }
    }
}

/// Free-flow travel-time constants used to seed leading missings.
#[derive(Debug, Clone)]
pub struct FillContext {
    pub tt_seg_free_s: [f64; TT_SEG_COUNT],
    pub tt_wz_free_s: f64,
}

impl FillContext {
    pub fn new(geometry: &RoadGeometry, rsu_positions: &[(u8, f64)]) -> FillContext {
        let wz_tt = geometry.wz_length_mi / geometry.speed_limit_wz_mph * 3600.0;
        let mut tt = [wz_tt; TT_SEG_COUNT];
        for (id, pos) in rsu_positions {
            if (2..=12).contains(id) {
                let d_up = (geometry.wz_start() - pos).max(0.0);
                tt[(*id - 2) as usize] = d_up / geometry.speed_limit_normal_mph * 3600.0 + wz_tt;
            }
        }
        FillContext {
            tt_seg_free_s: tt,
            tt_wz_free_s: wz_tt,
        }
    }
}

/// Missing-value policy: forward-fill the last observed value within the
/// day; leading missings take free-flow constants (zero for the queue and
/// acceleration fields). The mask records original missingness so row
/// counts stay exact without fabricating observations silently.
pub fn fill_missing(raw: &[RawWindow], ctx: &FillContext) -> Vec<FeatureWindow> {
    let mut out = Vec::with_capacity(raw.len());
    let mut last_tt_seg = ctx.tt_seg_free_s;
    let mut last_acc = 0.0;
    let mut last_qlen = 0.0;
    let mut last_startq = 0.0;
    let mut last_ttwz = ctx.tt_wz_free_s;
    for r in raw {
        let mut mask = 0u32;
        let mut tt_seg = [0.0; TT_SEG_COUNT];
        for k in 0..TT_SEG_COUNT {
            match r.tt_seg[k] {
                Some(v) => {
                    last_tt_seg[k] = v;
                    tt_seg[k] = v;
                }
                None => {
                    mask |= 1 << (mask_bit::TT_SEG_BASE + k as u32);
                    tt_seg[k] = last_tt_seg[k];
                }
            }
        }
        let wz_end_acc = match r.wz_end_acc {
            Some(v) => {
                last_acc = v;
                v
            }
            None => {
                mask |= 1 << mask_bit::WZ_END_ACC;
                last_acc
            }
        };
        let q_length = match r.q_length {
            Some(v) => {
                last_qlen = v;
                v
            }
            None => {
                mask |= 1 << mask_bit::Q_LENGTH;
                last_qlen
            }
        };
        let start_queue = match r.start_queue {
            Some(v) => {
                last_startq = v;
                v
            }
            None => {
                mask |= 1 << mask_bit::START_QUEUE;
                last_startq
            }
        };
        let tt_wz = match r.tt_wz {
            Some(v) => {
                last_ttwz = v;
                v
            }
            None => {
                mask |= 1 << mask_bit::TT_WZ;
                last_ttwz
            }
        };
        out.push(FeatureWindow {
            month: r.month,
            replication: r.replication,
            window: r.window,
            tt_seg,
            upstream_flow: f64::from(r.upstream_flow),
            downstream_flow: f64::from(r.downstream_flow),
            wz_end_acc,
            q_length,
            start_queue,
            tt_wz,
            missing_mask: mask,
            q_vehicles: r.q_vehicles,
        });
    }
    out
}

/// Queue state observed at a window start.
#[derive(Debug, Clone, PartialEq)]
pub enum QueueObs {
    /// No snapshot could be formed (v2i mode with no received coverage).
    Unavailable,
    NoQueue,
    Queue(QueueDetection),
}

/// Builds the 288 windows of one simulated day, one at a time, pruning
/// consumed sensing data as it goes.
#[derive(Debug)]
pub struct FeatureBuilder {
    month: u32,
    replication: u32,
    mode: QueueMode,
    wz_start: f64,
    wz_end: f64,
    rsu1_radius: f64,
    rows: Vec<RawWindow>,
    current_queue: Option<QueueObs>,
}

impl FeatureBuilder {
    pub fn new(
        month: u32,
        replication: u32,
        mode: QueueMode,
        geometry: &RoadGeometry,
        rsu1_radius: f64,
    ) -> FeatureBuilder {
        FeatureBuilder {
            month,
            replication,
            mode,
            wz_start: geometry.wz_start(),
            wz_end: geometry.wz_end(),
            rsu1_radius,
            rows: Vec::with_capacity(WINDOWS_PER_DAY as usize),
            current_queue: None,
        }
    }

    /// Take the queue snapshot for the window that starts now; the snapshot
    /// used (if any) is returned so callers may log it.
    pub fn open_window(
        &mut self,
        world: &World,
        sensing: &SensingField,
    ) -> Option<Vec<(u64, f64, f64)>> {
        let snapshot: Option<Vec<(u64, f64, f64)>> = match self.mode {
            QueueMode::Oracle => Some(world.snapshot_upto(self.wz_end)),
            QueueMode::V2i => sensing.latest_covered_time().map(|t| {
                let t_q = t.min(world.time_s());
                sensing
                    .reconstruct_positions(t_q)
                    .into_iter()
                    .filter(|(_, pos, _)| *pos <= self.wz_end)
                    .collect()
            }),
        };
        self.current_queue = Some(match &snapshot {
            None => QueueObs::Unavailable,
            Some(s) => match detect_queue(s) {
                None => QueueObs::NoQueue,
                Some(det) => QueueObs::Queue(det),
            },
        });
        snapshot
    }

    /// Aggregate the window that just ended. Returns the vehicles consumed
    /// by this window (their traces may be pruned by the caller once any
    /// dumps are taken).
    pub fn close_window(&mut self, index: u32, sensing: &mut SensingField) -> Vec<u64> {
        let w = Window::at(index);
        sensing.sort_passages();
        let (up, down) = flows(sensing.passages_at(12), sensing.passages_at(1), &w);

        let rsu1 = sensing.passages_at(1);
        let lo = rsu1.partition_point(|p| p.timestamp_s < w.start_s);
        let hi = rsu1.partition_point(|p| p.timestamp_s < w.end_s);
        let exit_ids: Vec<u64> = rsu1[lo..hi].iter().map(|p| p.vehicle_id).collect();
        let exits: Vec<ExitPassageSet> = exit_ids
            .iter()
            .filter_map(|id| {
                sensing
                    .vehicle_passage_times(*id)
                    .and_then(|ps| ExitPassageSet::from_passages(*id, ps))
            })
            .collect();

        let tt_seg = segment_travel_times(&exits);

        let segments: Vec<_> = exit_ids
            .iter()
            .filter_map(|id| sensing.trace(*id))
            .flat_map(|t| t.segments.iter())
            .filter(|s| s.rsu_id == 1 && w.contains(s.received_at_s))
            .collect();
        let wz_end_acc =
            wz_end_acceleration(&segments, self.wz_end - WZ_END_BAND_MI, self.wz_end);

        let queue_obs = self.current_queue.take().unwrap_or(QueueObs::Unavailable);
        let (q_length, start_queue, q_vehicles, tail) = match &queue_obs {
            QueueObs::Unavailable => (None, None, 0, None),
            QueueObs::NoQueue => (Some(0.0), None, 0, None),
            QueueObs::Queue(det) => (
                Some(det.q_length_mi),
                Some(det.start_queue_mi(self.wz_start)),
                det.member_ids.len() as u32,
                Some(det.tail_pos_mi),
            ),
        };

        let tt_wz = work_zone_travel_time(tail, &exits, sensing.traces(), self.rsu1_radius);

        self.rows.push(RawWindow {
            month: self.month,
            replication: self.replication,
            window: index,
            tt_seg,
            upstream_flow: up,
            downstream_flow: down,
            wz_end_acc,
            q_length,
            start_queue,
            q_vehicles,
            tt_wz,
        });

        exit_ids
    }

    pub fn rows(&self) -> &[RawWindow] {
        &self.rows
    }

    pub fn finish(self) -> Vec<RawWindow> {
        self.rows
    }
}

const FEATURE_HEADER: [&str; 21] = [
    "month", "replication", "t", "tt_2_1", "tt_3_1", "tt_4_1", "tt_5_1", "tt_6_1", "tt_7_1",
    "tt_8_1", "tt_9_1", "tt_10_1", "tt_11_1", "tt_12_1", "upstream_flow", "downstream_flow",
    "wz_end_acc", "q_length", "start_queue", "tt_wz", "missing_mask",
];

/// Write the feature table (fixed column order).
pub fn write_features_csv(path: &Path, rows: &[FeatureWindow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(FEATURE_HEADER)?;
    let mut rec = Vec::with_capacity(FEATURE_HEADER.len());
    for r in rows {
        rec.clear();
        rec.push(r.month.to_string());
        rec.push(r.replication.to_string());
        rec.push(r.window.to_string());
        for v in r.tt_seg {
            rec.push(v.to_string());
        }
        rec.push(r.upstream_flow.to_string());
        rec.push(r.downstream_flow.to_string());
        rec.push(r.wz_end_acc.to_string());
        rec.push(r.q_length.to_string());
        rec.push(r.start_queue.to_string());
        rec.push(r.tt_wz.to_string());
        rec.push(r.missing_mask.to_string());
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_features_csv(path: &Path) -> Result<Vec<FeatureWindow>> {
    let mut rdr = csv::Reader::from_path(path)?;
    {
        let got = rdr.headers()?;
        if got.len() != FEATURE_HEADER.len() || got.iter().zip(FEATURE_HEADER).any(|(a, b)| a != b)
        {
            return Err(Error::Shape(format!(
                "feature CSV header mismatch at {}",
                path.display()
            )));
        }
    }
    let mut out = Vec::new();
    for rec in rdr.records() {
        let rec = rec?;
        let f = |i: usize| -> Result<f64> {
            rec[i]
                .parse()
                .map_err(|_| Error::Shape(format!("bad float `{}` in feature CSV", &rec[i])))
        };
        let mut tt_seg = [0.0; TT_SEG_COUNT];
        for k in 0..TT_SEG_COUNT {
            tt_seg[k] = f(3 + k)?;
        }
        out.push(FeatureWindow {
            month: rec[0].parse().map_err(|_| Error::Shape("bad month".into()))?,
            replication: rec[1].parse().map_err(|_| Error::Shape("bad replication".into()))?,
            window: rec[2].parse().map_err(|_| Error::Shape("bad window".into()))?,
            tt_seg,
            upstream_flow: f(14)?,
            downstream_flow: f(15)?,
            wz_end_acc: f(16)?,
            q_length: f(17)?,
            start_queue: f(18)?,
            tt_wz: f(19)?,
            missing_mask: rec[20].parse().map_err(|_| Error::Shape("bad mask".into()))?,
            q_vehicles: 0,
        });
    }
    Ok(out)
}

/// Auxiliary queue-size log (month, replication, t, q_vehicles).
pub fn write_queue_aux_csv(path: &Path, rows: &[FeatureWindow]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    w.write_record(["month", "replication", "t", "q_vehicles"])?;
    for r in rows {
        w.write_record([
            r.month.to_string(),
            r.replication.to_string(),
            r.window.to_string(),
            r.q_vehicles.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(window: u32) -> RawWindow {
        RawWindow {
            month: 1,
            replication: 0,
            window,
            tt_seg: [Some(200.0); TT_SEG_COUNT],
            upstream_flow: 10,
            downstream_flow: 9,
            wz_end_acc: Some(0.5),
            q_length: Some(0.0),
            start_queue: None,
            q_vehicles: 0,
            tt_wz: Some(180.0),
        }
    }

    fn ctx() -> FillContext {
        let g = RoadGeometry::default();
        let rsus: Vec<(u8, f64)> = crate::sensing::standard_layout(&g, 0.05)
            .iter()
            .map(|r| (r.rsu_id, r.position_mi))
            .collect();
        FillContext::new(&g, &rsus)
    }

    #[test]
    fn leading_missings_take_free_flow_constants() {
        let mut r0 = raw(0);
        r0.tt_seg = [None; TT_SEG_COUNT];
        r0.tt_wz = None;
        r0.wz_end_acc = None;
        let filled = fill_missing(&[r0], &ctx());
        let f = &filled[0];
        // RSU 2 sits at the work-zone start: free flow is the WZ traverse.
        assert!((f.tt_seg[0] - 160.0).abs() < 1e-9);
        // RSU 12 adds 2.0 mi at 65 mph.
        assert!((f.tt_seg[10] - (160.0 + 2.0 / 65.0 * 3600.0)).abs() < 1e-9);
        assert!((f.tt_wz - 160.0).abs() < 1e-9);
        assert_eq!(f.wz_end_acc, 0.0);
        assert_ne!(f.missing_mask & (1 << mask_bit::TT_WZ), 0);
        assert_ne!(f.missing_mask & (1 << mask_bit::WZ_END_ACC), 0);
    }

    #[test]
    fn forward_fill_carries_last_observation() {
        let mut rows = vec![raw(0), raw(1), raw(2)];
        rows[1].tt_wz = None;
        rows[1].tt_seg[4] = None;
        rows[2].tt_wz = Some(210.0);
        let filled = fill_missing(&rows, &ctx());
        assert_eq!(filled[1].tt_wz, 180.0);
        assert_eq!(filled[1].tt_seg[4], 200.0);
        assert_eq!(filled[2].tt_wz, 210.0);
        assert_eq!(filled[0].missing_mask, 1 << mask_bit::START_QUEUE);
    }

    #[test]
    fn feature_csv_roundtrip_preserves_values() {
        let rows = fill_missing(&[raw(0), raw(1)], &ctx());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("features.csv");
        write_features_csv(&path, &rows).unwrap();
        let back = read_features_csv(&path).unwrap();
        assert_eq!(back.len(), 2);
        for (a, b) in rows.iter().zip(&back) {
            assert_eq!(a.tt_wz, b.tt_wz);
            assert_eq!(a.tt_seg, b.tt_seg);
            assert_eq!(a.missing_mask, b.missing_mask);
        }
    }

    #[test]
    fn input_indexing_matches_names() {
        let rows = fill_missing(&[raw(0)], &ctx());
        let f = &rows[0];
        assert_eq!(var_name(0), "TT_2_1");
        assert_eq!(var_name(10), "TT_12_1");
        assert_eq!(var_name(11), "UpstreamFlow");
        assert_eq!(f.input(11), 10.0);
        assert_eq!(var_name(15), "StartQueue");
        assert_eq!(f.input(15), 0.0);
    }
}
