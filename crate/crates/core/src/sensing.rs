//! V2I sensing: on-board units buffer 1 Hz trajectory points and hand them
//! to each roadside unit they pass; RSUs log (id, timestamp) passages at the
//! moment a vehicle first enters their coverage interval.

use std::collections::HashMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::sim::{RoadGeometry, TrajRecord, World};

pub const RSU_COUNT: usize = 12;
pub const RSU_SPACING_MI: f64 = 0.2;
pub const DEFAULT_COVERAGE_RADIUS_MI: f64 = 0.05;

/// One buffered or received trajectory sample.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryPoint {
    pub time_s: f64,
    pub position_mi: f64,
    pub speed_mph: f64,
    pub accel_mphps: f64,
}

/// Vehicle-passage log entry at one RSU.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PassageRecord {
    pub rsu_id: u8,
    pub vehicle_id: u64,
    pub timestamp_s: f64,
}

/// A fixed roadside unit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Rsu {
    pub rsu_id: u8,
    pub position_mi: f64,
    pub coverage_radius_mi: f64,
}

impl Rsu {
    /// Upstream edge of the coverage interval; crossing it triggers the
    /// passage record and the buffer upload.
    pub fn coverage_entry(&self) -> f64 {
        self.position_mi - self.coverage_radius_mi
    }
}

/// RSU 1 at the work-zone end; RSUs 2..=12 every 0.2 mi from the work-zone
/// start to 2.0 mi upstream.
pub fn standard_layout(geometry: &RoadGeometry, coverage_radius_mi: f64) -> Vec<Rsu> {
    let mut rsus = Vec::with_capacity(RSU_COUNT);
    rsus.push(Rsu {
        rsu_id: 1,
        position_mi: geometry.wz_end(),
        coverage_radius_mi,
    });
    for k in 2..=RSU_COUNT as u8 {
        rsus.push(Rsu {
            rsu_id: k,
            position_mi: geometry.wz_start() - RSU_SPACING_MI * f64::from(k - 2),
            coverage_radius_mi,
        });
    }
    rsus
}

/// Trajectory segment uploaded at one RSU passage.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReceivedSegment {
    pub rsu_id: u8,
    pub received_at_s: f64,
    pub points: Vec<TrajectoryPoint>,
}

/// Everything the infrastructure has received from one vehicle, in upload
/// order (which is also time order).
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct VehicleTrace {
    pub segments: Vec<ReceivedSegment>,
}

impl VehicleTrace {
    pub fn points(&self) -> impl Iterator<Item = &TrajectoryPoint> {
        self.segments.iter().flat_map(|s| s.points.iter())
    }

    pub fn first_time(&self) -> Option<f64> {
        self.segments.first().and_then(|s| s.points.first()).map(|p| p.time_s)
    }

    pub fn last_time(&self) -> Option<f64> {
        self.segments.iter().rev().find_map(|s| s.points.last()).map(|p| p.time_s)
    }

    /// Position and speed at `time_s`, linearly interpolated, if the trace
    /// spans it.
    pub fn interpolate_at(&self, time_s: f64) -> Option<(f64, f64)> {
        let mut prev: Option<&TrajectoryPoint> = None;
        for p in self.points() {
            if p.time_s >= time_s {
                return match prev {
                    None => {
                        if p.time_s == time_s {
                            Some((p.position_mi, p.speed_mph))
                        } else {
                            None
                        }
                    }
                    Some(q) => {
                        let span = p.time_s - q.time_s;
                        if span <= 0.0 {
                            Some((p.position_mi, p.speed_mph))
                        } else {
                            let f = (time_s - q.time_s) / span;
                            Some((
                                q.position_mi + f * (p.position_mi - q.position_mi),
                                q.speed_mph + f * (p.speed_mph - q.speed_mph),
                            ))
                        }
                    }
                };
            }
            prev = Some(p);
        }
        None
    }

    /// First time the vehicle crossed `position_mi`, linearly interpolated.
    pub fn crossing_time(&self, position_mi: f64) -> Option<f64> {
        let mut prev: Option<&TrajectoryPoint> = None;
        for p in self.points() {
            if p.position_mi >= position_mi {
                return match prev {
                    None => {
                        if p.position_mi == position_mi {
                            Some(p.time_s)
                        } else {
                            None // trace starts downstream of the target
                        }
                    }
                    Some(q) => {
                        let span = p.position_mi - q.position_mi;
                        if span <= 0.0 {
                            Some(p.time_s)
                        } else {
                            Some(q.time_s + (p.time_s - q.time_s) * (position_mi - q.position_mi) / span)
                        }
                    }
                };
            }
            prev = Some(p);
        }
        None
    }
}

#[derive(Debug, Clone)]
struct ObuState {
    equipped: bool,
    last_pos: f64,
    last_time: f64,
    next_rsu: usize,
    buffer: Vec<TrajectoryPoint>,
    last_received_s: Option<f64>,
}

/// Cumulative point accounting: `logged == received + buffered + dropped`
/// holds at every instant (dropped = points still on board when the vehicle
/// left the network).
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct PointCounters {
    pub logged: u64,
    pub received: u64,
    pub buffered: u64,
    pub dropped: u64,
}

/// The twelve RSUs plus every live OBU, owned by one replication.
#[derive(Debug, Clone)]
pub struct SensingField {
    rsus: Vec<Rsu>,
    /// Indices into `rsus`, ascending by coverage-entry position.
    crossing_order: Vec<usize>,
    penetration: f64,
    /// Indexed by vehicle id (ids are dense within one replication).
    obu: Vec<Option<ObuState>>,
    /// Per RSU (by `rsus` index), passages in detection order; sorted by
    /// timestamp up to `sorted_upto`.
    passages: Vec<Vec<PassageRecord>>,
    vehicle_passages: HashMap<u64, Vec<(u8, f64)>>,
    traces: HashMap<u64, VehicleTrace>,
    pub counters: PointCounters,
    rng: ChaCha8Rng,
}

impl SensingField {
    pub fn new(rsus: Vec<Rsu>, penetration: f64, seed: u64) -> SensingField {
        let mut crossing_order: Vec<usize> = (0..rsus.len()).collect();
        crossing_order.sort_by(|&a, &b| rsus[a].coverage_entry().total_cmp(&rsus[b].coverage_entry()));
        let n = rsus.len();
        SensingField {
            rsus,
            crossing_order,
            penetration,
            obu: Vec::new(),
            passages: vec![Vec::new(); n],
            vehicle_passages: HashMap::new(),
            traces: HashMap::new(),
            counters: PointCounters::default(),
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn rsus(&self) -> &[Rsu] {
        &self.rsus
    }

    pub fn rsu_index(&self, rsu_id: u8) -> Option<usize> {
        self.rsus.iter().position(|r| r.rsu_id == rsu_id)
    }

    fn obu_entry(&mut self, id: u64, pos: f64, time: f64) -> &mut ObuState {
        let idx = id as usize;
        if idx >= self.obu.len() {
            self.obu.resize_with(idx + 1, || None);
        }
        if self.obu[idx].is_none() {
            let equipped = self.penetration >= 1.0 || self.rng.random::<f64>() < self.penetration;
            let next_rsu = self
                .crossing_order
                .iter()
                .position(|&i| self.rsus[i].coverage_entry() > pos)
                .unwrap_or(self.crossing_order.len());
            self.obu[idx] = Some(ObuState {
                equipped,
                last_pos: pos,
                last_time: time,
                next_rsu,
                buffer: Vec::new(),
                last_received_s: None,
            });
        }
        self.obu[idx].as_mut().unwrap()
    }

    /// Append one 1 Hz log record to the vehicle's OBU buffer.
    pub fn ingest_log(&mut self, rec: &TrajRecord) {
        let state = self.obu_entry(rec.vehicle_id, rec.position_mi, rec.time_s);
        if !state.equipped {
            return;
        }
        state.buffer.push(TrajectoryPoint {
            time_s: rec.time_s,
            position_mi: rec.position_mi,
            speed_mph: rec.speed_mph,
            accel_mphps: rec.accel_mphps,
        });
        self.counters.logged += 1;
        self.counters.buffered += 1;
    }

    /// Crossing detection after one simulation step: when a vehicle first
    /// enters an RSU's coverage interval, the passage is stamped at the
    /// interpolated crossing instant and the OBU buffer moves to that RSU.
    /// Re-detections within a traversal are suppressed by construction.
    pub fn detect_and_transmit(&mut self, world: &World) {
        let now = world.time_s();
        for lane in world.lanes() {
            for v in lane {
                self.track_vehicle(v.id, v.position_mi, now);
            }
        }
    }

    fn track_vehicle(&mut self, id: u64, pos: f64, now: f64) {
        self.obu_entry(id, pos, now);
        let state = self.obu[id as usize].as_mut().unwrap();
        if !state.equipped {
            state.last_pos = pos;
            state.last_time = now;
            return;
        }
        while state.next_rsu < self.crossing_order.len() {
            let rsu_idx = self.crossing_order[state.next_rsu];
            let boundary = self.rsus[rsu_idx].coverage_entry();
            if pos < boundary {
                break;
            }
            let t_cross = if pos > state.last_pos && boundary > state.last_pos {
                state.last_time
                    + (now - state.last_time) * (boundary - state.last_pos) / (pos - state.last_pos)
            } else {
                now
            };
            let rsu_id = self.rsus[rsu_idx].rsu_id;
            self.passages[rsu_idx].push(PassageRecord {
                rsu_id,
                vehicle_id: id,
                timestamp_s: t_cross,
            });
            self.vehicle_passages.entry(id).or_default().push((rsu_id, t_cross));
            if !state.buffer.is_empty() {
                let points = std::mem::take(&mut state.buffer);
                self.counters.buffered -= points.len() as u64;
                self.counters.received += points.len() as u64;
                self.traces.entry(id).or_default().segments.push(ReceivedSegment {
                    rsu_id,
                    received_at_s: t_cross,
                    points,
                });
            }
            state.last_received_s = Some(t_cross);
            state.next_rsu += 1;
        }
        state.last_pos = pos;
        state.last_time = now;
    }

    /// Drop OBU state for a vehicle that left the network. Points still in
    /// its buffer were never uploaded and are accounted as dropped.
    pub fn on_exit(&mut self, vehicle_id: u64) {
        let idx = vehicle_id as usize;
        if let Some(state) = self.obu.get_mut(idx).and_then(Option::take) {
            let n = state.buffer.len() as u64;
            self.counters.buffered -= n;
            self.counters.dropped += n;
        }
    }

    /// Discard a vehicle's received trace and passage index once downstream
    /// consumers are done with it (bounded memory). Aggregate passage logs
    /// are retained.
    pub fn prune_vehicle(&mut self, vehicle_id: u64) {
        self.traces.remove(&vehicle_id);
        self.vehicle_passages.remove(&vehicle_id);
    }

    pub fn point_conservation_holds(&self) -> bool {
        self.counters.logged
            == self.counters.received + self.counters.buffered + self.counters.dropped
    }

    /// Sort the unsorted tail of each per-RSU passage log; call before
    /// window-sliced reads.
    pub fn sort_passages(&mut self) {
        for log in &mut self.passages {
            log.sort_by(|a, b| {
                a.timestamp_s
                    .total_cmp(&b.timestamp_s)
                    .then(a.vehicle_id.cmp(&b.vehicle_id))
            });
        }
    }

    /// All passages at one RSU (call `sort_passages` first for time order).
    pub fn passages_at(&self, rsu_id: u8) -> &[PassageRecord] {
        match self.rsu_index(rsu_id) {
            Some(i) => &self.passages[i],
            None => &[],
        }
    }

    pub fn vehicle_passage_times(&self, vehicle_id: u64) -> Option<&[(u8, f64)]> {
        self.vehicle_passages.get(&vehicle_id).map(Vec::as_slice)
    }

    pub fn trace(&self, vehicle_id: u64) -> Option<&VehicleTrace> {
        self.traces.get(&vehicle_id)
    }

    pub fn traces(&self) -> &HashMap<u64, VehicleTrace> {
        &self.traces
    }

    /// Latest instant fully covered by uploads from every transmitting
    /// vehicle still on the network: a consistent (if lagged) snapshot time
    /// for infrastructure-side reconstruction.
    pub fn latest_covered_time(&self) -> Option<f64> {
        self.obu
            .iter()
            .flatten()
            .filter(|s| s.equipped)
            .filter_map(|s| s.last_received_s)
            .min_by(f64::total_cmp)
    }

    /// Positions and speeds known to the infrastructure at `query_time`,
    /// interpolated from received trajectories; vehicles whose uploads do
    /// not span the query are omitted. Sorted by position, then id.
    pub fn reconstruct_positions(&self, query_time: f64) -> Vec<(u64, f64, f64)> {
        let mut out: Vec<(u64, f64, f64)> = self
            .traces
            .iter()
            .filter_map(|(id, trace)| {
                trace.interpolate_at(query_time).map(|(pos, speed)| (*id, pos, speed))
            })
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
        out
    }
}

/// Validate an RSU position override: exactly twelve units, id 1 strictly
/// the most downstream, all on the network.
pub fn validate_layout(rsus: &[Rsu], geometry: &RoadGeometry) -> Result<()> {
    if rsus.len() != RSU_COUNT {
        return Err(Error::config(
            "sensing.rsu_positions",
            format!("expected {RSU_COUNT} RSUs, got {}", rsus.len()),
        ));
    }
    let max = rsus.iter().map(|r| r.position_mi).fold(f64::MIN, f64::max);
    if rsus[0].rsu_id != 1 || rsus[0].position_mi < max {
        return Err(Error::config(
            "sensing.rsu_positions",
            "RSU 1 must be the most downstream unit",
        ));
    }
    for r in rsus {
        if r.position_mi <= 0.0 || r.position_mi > geometry.network_length() {
            return Err(Error::config(
                "sensing.rsu_positions",
                format!("RSU {} at {} mi is off the network", r.rsu_id, r.position_mi),
            ));
        }
        if r.coverage_radius_mi <= 0.0 {
            return Err(Error::config("sensing.coverage_radius_mi", "must be positive"));
        }
    }
    Ok(())
}
