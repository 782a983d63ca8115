//! Per-window aggregation primitives, pure over their inputs.

use std::collections::HashMap;

use crate::sensing::{PassageRecord, ReceivedSegment, VehicleTrace};

/// Index range of the upstream travel-time variables: TT_{i,1}, i = 2..=12.
pub const TT_SEG_COUNT: usize = 11;

/// Five-minute aggregation window `[start_s, end_s)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Window {
    pub index: u32,
    pub start_s: f64,
    pub end_s: f64,
}

pub const WINDOW_LEN_S: f64 = 300.0;
pub const WINDOWS_PER_DAY: u32 = 288;

impl Window {
    pub fn at(index: u32) -> Window {
        Window {
            index,
            start_s: f64::from(index) * WINDOW_LEN_S,
            end_s: f64::from(index + 1) * WINDOW_LEN_S,
        }
    }

    pub fn contains(&self, t: f64) -> bool {
        t >= self.start_s && t < self.end_s
    }
}

/// One vehicle observed leaving at RSU 1 during a window, with its passage
/// times at the upstream units (index 0 = RSU 2 .. index 10 = RSU 12).
#[derive(Debug, Clone, PartialEq)]
pub struct ExitPassageSet {
    pub vehicle_id: u64,
    pub rsu1_time_s: f64,
    pub upstream_times_s: [Option<f64>; TT_SEG_COUNT],
}

impl ExitPassageSet {
    pub fn from_passages(vehicle_id: u64, passages: &[(u8, f64)]) -> Option<ExitPassageSet> {
        let rsu1 = passages.iter().find(|(r, _)| *r == 1)?.1;
        let mut upstream = [None; TT_SEG_COUNT];
        for (r, t) in passages {
            if (2..=12).contains(r) {
                upstream[(*r - 2) as usize] = Some(*t);
            }
        }
        Some(ExitPassageSet {
            vehicle_id,
            rsu1_time_s: rsu1,
            upstream_times_s: upstream,
        })
    }
}

/// Mean travel time from each upstream RSU to RSU 1 over the vehicles that
/// reached RSU 1 this window. Vehicles missing an upstream record are
/// skipped for that RSU; records implying negative travel are rejected.
pub fn segment_travel_times(exits: &[ExitPassageSet]) -> [Option<f64>; TT_SEG_COUNT] {
    let mut sums = [0.0f64; TT_SEG_COUNT];
    let mut counts = [0u32; TT_SEG_COUNT];
    for e in exits {
        for (k, t_up) in e.upstream_times_s.iter().enumerate() {
            let Some(t_up) = t_up else { continue };
            let tt = e.rsu1_time_s - t_up;
            if tt < 0.0 {
                log::warn!(
                    "vehicle {}: RSU {} time after RSU 1 time; record rejected",
                    e.vehicle_id,
                    k + 2
                );
                continue;
            }
            sums[k] += tt;
            counts[k] += 1;
        }
    }
    let mut out = [None; TT_SEG_COUNT];
    for k in 0..TT_SEG_COUNT {
        if counts[k] > 0 {
            out[k] = Some(sums[k] / f64::from(counts[k]));
        }
    }
    out
}

/// Passage counts at the upstream (RSU 12) and downstream (RSU 1) units
/// within the window. Slices must be time-sorted per RSU.
pub fn flows(
    rsu12_passages: &[PassageRecord],
    rsu1_passages: &[PassageRecord],
    window: &Window,
) -> (u32, u32) {
    let count = |log: &[PassageRecord]| {
        let lo = log.partition_point(|p| p.timestamp_s < window.start_s);
        let hi = log.partition_point(|p| p.timestamp_s < window.end_s);
        (hi - lo) as u32
    };
    (count(rsu12_passages), count(rsu1_passages))
}

/// Mean acceleration over received trajectory points inside the end-of-zone
/// band `[band_lo, band_hi]`, across the segments uploaded at RSU 1 this
/// window. None when no points fall in the band.
pub fn wz_end_acceleration(
    segments: &[&ReceivedSegment],
    band_lo_mi: f64,
    band_hi_mi: f64,
) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0u32;
    for seg in segments {
        for p in &seg.points {
            if p.position_mi >= band_lo_mi && p.position_mi <= band_hi_mi {
                sum += p.accel_mphps;
                n += 1;
            }
        }
    }
    (n > 0).then(|| sum / f64::from(n))
}

/// Work-zone travel time for one window.
///
/// With a queue whose tail sits at absolute position `S`: the mean over this
/// window's exiting vehicles of (RSU-1 time − time the vehicle crossed
/// `S − measure_offset`). The offset is RSU 1's coverage radius, so the
/// measured span is exactly the distance from the queue tail to the
/// work-zone end. Without a queue: mean RSU 2 → RSU 1 passage difference.
pub fn work_zone_travel_time(
    queue_tail_pos_mi: Option<f64>,
    exits: &[ExitPassageSet],
    traces: &HashMap<u64, VehicleTrace>,
    measure_offset_mi: f64,
) -> Option<f64> {
    let mut sum = 0.0;
    let mut n = 0u32;
    match queue_tail_pos_mi {
        Some(tail) => {
            let target = tail - measure_offset_mi;
            for e in exits {
                let Some(trace) = traces.get(&e.vehicle_id) else { continue };
                let Some(t_cross) = trace.crossing_time(target) else { continue };
                let tt = e.rsu1_time_s - t_cross;
                if tt >= 0.0 {
                    sum += tt;
                    n += 1;
                }
            }
        }
        None => {
            for e in exits {
                if let Some(t2) = e.upstream_times_s[0] {
                    let tt = e.rsu1_time_s - t2;
                    if tt >= 0.0 {
                        sum += tt;
                        n += 1;
                    }
                }
            }
        }
    }
    (n > 0).then(|| sum / f64::from(n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sensing::TrajectoryPoint;

    fn exit_with(rsu1: f64, upstream: &[(u8, f64)]) -> ExitPassageSet {
        let mut passages = vec![(1u8, rsu1)];
        passages.extend_from_slice(upstream);
        ExitPassageSet::from_passages(7, &passages).unwrap()
    }

    #[test]
    fn constant_speed_covers_four_miles_in_240s() {
        // RSU 12 -> RSU 1 spans 4.0 mi; at 60 mph that's 240 s.
        let e = exit_with(540.0, &[(12, 300.0)]);
        let tt = segment_travel_times(&[e]);
        assert_eq!(tt[10], Some(240.0));
        assert!(tt[0].is_none());
    }

    #[test]
    fn no_exits_leaves_all_segments_missing() {
        let tt = segment_travel_times(&[]);
        assert!(tt.iter().all(Option::is_none));
    }

    #[test]
    fn two_vehicles_average() {
        let a = exit_with(500.0, &[(12, 300.0)]); // 200 s
        let b = exit_with(700.0, &[(12, 400.0)]); // 300 s
        let tt = segment_travel_times(&[a, b]);
        assert_eq!(tt[10], Some(250.0));
    }

    #[test]
    fn negative_difference_is_rejected() {
        let e = exit_with(100.0, &[(12, 300.0)]);
        let tt = segment_travel_times(&[e]);
        assert!(tt[10].is_none());
    }

    #[test]
    fn flow_counts_are_window_bounded() {
        let w = Window::at(1); // [300, 600)
        let mk = |rsu_id, ts: &[f64]| -> Vec<PassageRecord> {
            ts.iter()
                .enumerate()
                .map(|(i, &t)| PassageRecord { rsu_id, vehicle_id: i as u64, timestamp_s: t })
                .collect()
        };
        let up = mk(12, &[299.9, 300.0, 450.0, 599.9, 600.0]);
        let down = mk(1, &[350.0, 400.0]);
        assert_eq!(flows(&up, &down, &w), (3, 2));
        assert_eq!(flows(&[], &[], &w), (0, 0));
    }

    #[test]
    fn acceleration_band_filters_points() {
        let seg = ReceivedSegment {
            rsu_id: 1,
            received_at_s: 320.0,
            points: vec![
                TrajectoryPoint { time_s: 310.0, position_mi: 6.85, speed_mph: 44.0, accel_mphps: 9.0 },
                TrajectoryPoint { time_s: 311.0, position_mi: 6.92, speed_mph: 44.0, accel_mphps: 1.2 },
            ],
        };
        // Band is the final 0.1 mi of a work zone ending at 7.0.
        assert_eq!(wz_end_acceleration(&[&seg], 6.9, 7.0), Some(1.2));
        assert_eq!(wz_end_acceleration(&[], 6.9, 7.0), None);
    }

    #[test]
    fn constant_speed_points_average_to_zero() {
        let seg = ReceivedSegment {
            rsu_id: 1,
            received_at_s: 320.0,
            points: (0..5)
                .map(|k| TrajectoryPoint {
                    time_s: 310.0 + k as f64,
                    position_mi: 6.91 + 0.0125 * k as f64,
                    speed_mph: 45.0,
                    accel_mphps: 0.0,
                })
                .collect(),
        };
        assert_eq!(wz_end_acceleration(&[&seg], 6.9, 7.0), Some(0.0));
    }

    #[test]
    fn no_queue_travel_time_uses_rsu2_to_rsu1() {
        // Constant 45 mph over the exact 2.0 mi work zone: 160 s.
        let e = exit_with(1160.0, &[(2, 1000.0)]);
        let tt = work_zone_travel_time(None, &[e], &HashMap::new(), 0.05);
        assert_eq!(tt, Some(160.0));
    }

    #[test]
    fn queue_tail_at_rsu2_matches_no_queue_definition() {
        // Trace at constant 45 mph; queue tail exactly at the RSU 2 position
        // (work-zone start, 5.0 mi). Measured span = 2.0 mi either way.
        let speed = 45.0;
        let points: Vec<TrajectoryPoint> = (0..700)
            .map(|k| {
                let t = k as f64;
                TrajectoryPoint {
                    time_s: 400.0 + t,
                    position_mi: 2.0 + speed * t / 3600.0,
                    speed_mph: speed,
                    accel_mphps: 0.0,
                }
            })
            .collect();
        let mut traces = HashMap::new();
        traces.insert(7u64, VehicleTrace {
            segments: vec![ReceivedSegment { rsu_id: 9, received_at_s: 500.0, points }],
        });
        // RSU 2 passage at coverage entry 4.95 mi, RSU 1 at 6.95 mi.
        let t2 = 400.0 + (4.95 - 2.0) / speed * 3600.0;
        let t1 = 400.0 + (6.95 - 2.0) / speed * 3600.0;
        let e = exit_with(t1, &[(2, t2)]);
        let no_queue = work_zone_travel_time(None, &[e.clone()], &traces, 0.05).unwrap();
        let degenerate = work_zone_travel_time(Some(5.0), &[e], &traces, 0.05).unwrap();
        assert!((no_queue - 160.0).abs() < 1e-9);
        assert!((degenerate - no_queue).abs() < 1e-9);
    }

    #[test]
    fn vehicle_without_coverage_of_tail_is_skipped() {
        let mut traces = HashMap::new();
        traces.insert(7u64, VehicleTrace::default());
        let e = exit_with(500.0, &[(2, 300.0)]);
        assert_eq!(work_zone_travel_time(Some(4.0), &[e], &traces, 0.05), None);
    }
}
