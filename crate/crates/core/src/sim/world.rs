use std::collections::VecDeque;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::driver::{car_following_accel_toward, free_accel_toward, DriverParams};
use super::geometry::RoadGeometry;
use super::vehicle::{ExitRecord, TrajRecord, VehicleState, VEHICLE_LENGTH_MI};
use crate::error::{Error, Result};

/// Strict separation kept beyond the leader's length by the safety clamp.
const COLLISION_MARGIN_MI: f64 = 1e-4;
/// Within this distance of the lane-closure wall a waiting vehicle accepts
/// minimum-gap openings (forced merge with creep).
const CREEP_ZONE_MI: f64 = 0.05;
/// Below this speed in the mandatory zone the zipper also accepts
/// speed-scaled slots, so mergers slide in while the queue crawls instead
/// of stopping at the wall first.
const CREEP_SPEED_MPH: f64 = 12.0;
/// A through-lane vehicle yields to a taper merger within this range.
const COURTESY_RANGE_MI: f64 = 0.15;
/// Drivers start tracking the work-zone speed this far ahead of the
/// reduced-speed region, so braking is spread out instead of instant.
const CAP_ANTICIPATION_MI: f64 = 0.25;
/// Per-vehicle spread of desired speed around the nominal (uniform ±10%).
const SPEED_HETEROGENEITY: f64 = 0.1;

/// Discrete-time two-lane freeway with a one-lane work zone. One `World` is
/// a single replication: strictly sequential and deterministic for a seed.
#[derive(Debug, Clone)]
pub struct World {
    pub geometry: RoadGeometry,
    pub driver: DriverParams,
    pub dt_s: f64,
    time_s: f64,
    /// Per lane, sorted by position descending (front vehicle first).
    lanes: Vec<Vec<VehicleState>>,
    /// Scheduled entry times per lane, ascending.
    pending: Vec<VecDeque<f64>>,
    next_id: u64,
    entered: u64,
    exited: u64,
    step_exits: Vec<ExitRecord>,
    accel_buf: Vec<Vec<f64>>,
    rng: ChaCha8Rng,
}

impl World {
    pub fn new(geometry: RoadGeometry, driver: DriverParams, dt_s: f64, seed: u64) -> World {
        let n = geometry.lanes_upstream;
        World {
            geometry,
            driver,
            dt_s,
            time_s: 0.0,
            lanes: vec![Vec::new(); n],
            pending: vec![VecDeque::new(); n],
            next_id: 0,
            entered: 0,
            exited: 0,
            step_exits: Vec::new(),
            accel_buf: vec![Vec::new(); n],
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn time_s(&self) -> f64 {
        self.time_s
    }

    pub fn lanes(&self) -> &[Vec<VehicleState>] {
        &self.lanes
    }

    pub fn entered(&self) -> u64 {
        self.entered
    }

    pub fn exited(&self) -> u64 {
        self.exited
    }

    pub fn present(&self) -> usize {
        self.lanes.iter().map(Vec::len).sum()
    }

    pub fn pending_count(&self) -> usize {
        self.pending.iter().map(VecDeque::len).sum()
    }

    /// Exits produced by the most recent `advance` call.
    pub fn step_exits(&self) -> &[ExitRecord] {
        &self.step_exits
    }

    /// Queue an arrival at the network entry. Times must be scheduled in
    /// nondecreasing order per lane.
    pub fn schedule_arrival(&mut self, lane: usize, time_s: f64) {
        self.pending[lane].push_back(time_s);
    }

    /// Insert a vehicle directly (test harnesses and warm starts).
    pub fn spawn_at(
        &mut self,
        lane: usize,
        position_mi: f64,
        speed_mph: f64,
        desired_speed_mph: f64,
        wz_speed_mph: f64,
    ) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        let v = VehicleState {
            id,
            lane,
            position_mi,
            speed_mph,
            accel_mphps: 0.0,
            length_mi: VEHICLE_LENGTH_MI,
            desired_speed_mph,
            wz_speed_mph,
            entered_s: self.time_s,
        };
        let idx = self.lanes[lane].partition_point(|w| w.position_mi > position_mi);
        self.lanes[lane].insert(idx, v);
        self.entered += 1;
        id
    }

    /// Current 1 Hz log lines for every vehicle on the network.
    pub fn traj_records(&self) -> impl Iterator<Item = TrajRecord> + '_ {
        let t = self.time_s;
        self.lanes.iter().flatten().map(move |v| TrajRecord {
            vehicle_id: v.id,
            time_s: t,
            lane: v.lane,
            position_mi: v.position_mi,
            speed_mph: v.speed_mph,
            accel_mphps: v.accel_mphps,
        })
    }

    /// All vehicles at or upstream of `max_pos`, sorted by position ascending.
    pub fn snapshot_upto(&self, max_pos: f64) -> Vec<(u64, f64, f64)> {
        let mut out: Vec<(u64, f64, f64)> = self
            .lanes
            .iter()
            .flatten()
            .filter(|v| v.position_mi <= max_pos)
            .map(|v| (v.id, v.position_mi, v.speed_mph))
            .collect();
        out.sort_by(|a, b| a.1.total_cmp(&b.1));
        out
    }

    fn effective_desired(&self, v: &VehicleState) -> f64 {
        let from = self.geometry.cap_zone_start() - CAP_ANTICIPATION_MI;
        if v.position_mi >= from && v.position_mi < self.geometry.wz_end() {
            v.desired_speed_mph.min(v.wz_speed_mph)
        } else {
            v.desired_speed_mph
        }
    }

    /// Lane-change pass for the closing lanes. Each closed lane merges into
    /// its lower neighbor: optional (probabilistic) after the VMS, mandatory
    /// after the arrow panel, stop-and-creep at the taper.
    pub fn merge_step(&mut self) {
        let vms = self.geometry.vms_pos();
        let arrow = self.geometry.arrow_panel_pos();
        let wz_start = self.geometry.wz_start();
        let creep_from = wz_start - CREEP_ZONE_MI;

        for l in self.geometry.lanes_wz..self.geometry.lanes_upstream {
            let mut closing = std::mem::take(&mut self.lanes[l]);
            let target = l - 1;
            let mut i = 0;
            while i < closing.len() {
                let pos = closing[i].position_mi;
                if pos < vms {
                    // Sorted descending: everything further back is upstream of the VMS.
                    break;
                }
                let attempt = pos >= arrow || self.rng.random::<f64>() < self.driver.early_merge_prob;
                if !attempt {
                    i += 1;
                    continue;
                }
                let lane0 = &self.lanes[target];
                let idx = lane0.partition_point(|w| w.position_mi > pos);
                let lead_gap = if idx > 0 {
                    lane0[idx - 1].position_mi - lane0[idx - 1].length_mi - pos
                } else {
                    f64::INFINITY
                };
                let (lag_gap, lag_speed) = if idx < lane0.len() {
                    (
                        pos - closing[i].length_mi - lane0[idx].position_mi,
                        lane0[idx].speed_mph,
                    )
                } else {
                    (f64::INFINITY, 0.0)
                };
                // At walking pace near the closure, accept speed-scaled
                // slots (forced merge with creep); otherwise demand the full
                // merge gap on both sides.
                let speed = closing[i].speed_mph;
                let creeping =
                    pos >= creep_from || (pos >= arrow && speed < CREEP_SPEED_MPH);
                let headway_h = self.driver.time_headway_s / 3600.0;
                let (lead_min, lag_min) = if creeping {
                    (
                        self.driver.min_gap_mi + 0.25 * speed * headway_h,
                        0.5 * self.driver.min_gap_mi + 0.25 * lag_speed * headway_h,
                    )
                } else {
                    (self.driver.merge_gap_min_mi, self.driver.merge_gap_min_mi)
                };
                if lead_gap >= lead_min && lag_gap >= lag_min {
                    let mut moved = closing.remove(i);
                    moved.lane = target;
                    self.lanes[target].insert(idx, moved);
                } else {
                    i += 1;
                }
            }
            self.lanes[l] = closing;
        }
    }

    fn compute_accels(&mut self) {
        let wz_start = self.geometry.wz_start();
        let arrow = self.geometry.arrow_panel_pos();
        for l in 0..self.lanes.len() {
            let lane = &self.lanes[l];
            let buf = &mut self.accel_buf[l];
            buf.clear();
            for (i, v) in lane.iter().enumerate() {
                let v0 = {
                    let from = self.geometry.cap_zone_start() - CAP_ANTICIPATION_MI;
                    if v.position_mi >= from && v.position_mi < self.geometry.wz_end() {
                        v.desired_speed_mph.min(v.wz_speed_mph)
                    } else {
                        v.desired_speed_mph
                    }
                };
                let mut a = if i > 0 {
                    let lead = &lane[i - 1];
                    let gap = lead.position_mi - lead.length_mi - v.position_mi;
                    car_following_accel_toward(gap, v.speed_mph, lead.speed_mph, v0, &self.driver)
                } else {
                    free_accel_toward(v.speed_mph, v0, &self.driver)
                };
                // The closure is a standing wall at the work-zone start. The
                // front vehicle of a closed lane also paces the target-lane
                // stream it is merging into, so it arrives rolling at slot
                // speed instead of braking to rest first.
                if l >= self.geometry.lanes_wz {
                    let wall_gap = wz_start - v.position_mi;
                    a = a.min(car_following_accel_toward(
                        wall_gap,
                        v.speed_mph,
                        0.0,
                        v0,
                        &self.driver,
                    ));
                    if i == 0 && v.position_mi >= arrow {
                        let lane0 = &self.lanes[l - 1];
                        let j = lane0.partition_point(|w| w.position_mi > v.position_mi);
                        if j > 0 {
                            let lead = &lane0[j - 1];
                            // Hang one merge gap behind the target-lane
                            // leader, i.e. roughly on the slot behind it.
                            let gap = lead.position_mi - lead.length_mi - v.position_mi
                                + self.driver.merge_gap_min_mi;
                            let pace = car_following_accel_toward(
                                gap,
                                v.speed_mph,
                                lead.speed_mph,
                                v0,
                                &self.driver,
                            );
                            a = a.min(pace);
                        }
                    }
                }
                buf.push(a);
            }
        }

        // Courtesy yield: the through-lane vehicle just behind the frontmost
        // taper merger tracks it as a virtual leader so a gap opens.
        for l in self.geometry.lanes_wz..self.geometry.lanes_upstream {
            let Some(front) = self.lanes[l].first() else { continue };
            if front.position_mi < arrow {
                continue;
            }
            let (m_pos, m_len, m_speed) = (front.position_mi, front.length_mi, front.speed_mph);
            let target = l - 1;
            let lane0 = &self.lanes[target];
            let idx = lane0.partition_point(|w| w.position_mi > m_pos);
            if idx >= lane0.len() {
                continue;
            }
            let f = &lane0[idx];
            if m_pos - f.position_mi > COURTESY_RANGE_MI {
                continue;
            }
            let v0 = self.effective_desired(f);
            // Stand off a couple of jam gaps so the merger's slot stays
            // acceptably open once everything comes to rest. A vehicle that
            // already overlaps the slot cannot back out: let it pass and
            // the next one yields instead.
            let gap = m_pos - m_len - f.position_mi - 2.0 * self.driver.min_gap_mi;
            if gap <= 0.0 {
                continue;
            }
            let a = car_following_accel_toward(gap, f.speed_mph, m_speed, v0, &self.driver);
            let slot = &mut self.accel_buf[target][idx];
            *slot = slot.min(a);
        }
    }

    /// One time step: merges, car following, kinematics with the work-zone
    /// speed cap and a hard no-overlap clamp, exits, then scheduled entries.
    pub fn advance(&mut self) -> Result<()> {
        self.step_exits.clear();
        self.merge_step();
        self.compute_accels();

        let dt = self.dt_s;
        let cap_start = self.geometry.cap_zone_start();
        let wz_end = self.geometry.wz_end();
        let net_len = self.geometry.network_length();
        let t = self.time_s;

        for l in 0..self.lanes.len() {
            let lane = &mut self.lanes[l];
            for i in 0..lane.len() {
                let a = self.accel_buf[l][i];
                let (x0, s0) = (lane[i].position_mi, lane[i].speed_mph);
                let mut v1 = (s0 + a * dt).max(0.0);
                let mut x1 = x0 + (s0 + v1) * 0.5 * dt / 3600.0;
                if x1 >= cap_start && x1 < wz_end && v1 > lane[i].wz_speed_mph {
                    v1 = lane[i].wz_speed_mph;
                    x1 = x0 + (s0 + v1) * 0.5 * dt / 3600.0;
                }
                if i > 0 {
                    let x_max =
                        lane[i - 1].position_mi - lane[i - 1].length_mi - COLLISION_MARGIN_MI;
                    if x1 > x_max {
                        x1 = x_max.max(x0);
                        v1 = (2.0 * (x1 - x0) * 3600.0 / dt - s0).clamp(0.0, v1);
                    }
                }
                if x1 > net_len {
                    let frac = if x1 > x0 { (net_len - x0) / (x1 - x0) } else { 1.0 };
                    self.step_exits.push(ExitRecord {
                        vehicle_id: lane[i].id,
                        entered_s: lane[i].entered_s,
                        exited_s: t + dt * frac,
                    });
                }
                let v = &mut lane[i];
                v.accel_mphps = (v1 - s0) / dt;
                v.speed_mph = v1;
                v.position_mi = x1;
            }
            while lane.first().is_some_and(|v| v.position_mi > net_len) {
                lane.remove(0);
                self.exited += 1;
            }
        }

        self.insert_arrivals();
        self.check_no_overlap()?;
        self.time_s = t + dt;
        Ok(())
    }

    fn insert_arrivals(&mut self) {
        let due = self.time_s + self.dt_s;
        for l in 0..self.pending.len() {
            while self.pending[l].front().is_some_and(|&at| at <= due) {
                let blocked = match self.lanes[l].last() {
                    Some(rear) => {
                        let space = rear.position_mi - rear.length_mi;
                        let entry_speed = rear.speed_mph.max(10.0).min(self.driver.desired_speed_mph);
                        let need = self.driver.min_gap_mi
                            + entry_speed * self.driver.time_headway_s / 3600.0;
                        space < need
                    }
                    None => false,
                };
                if blocked {
                    break;
                }
                self.pending[l].pop_front();
                let f: f64 = self
                    .rng
                    .random_range(1.0 - SPEED_HETEROGENEITY..1.0 + SPEED_HETEROGENEITY);
                let desired = self.driver.desired_speed_mph * f;
                let wz_cap = self.geometry.speed_limit_wz_mph * f.min(1.0);
                let entry_speed = match self.lanes[l].last() {
                    Some(rear) => rear.speed_mph.max(10.0).min(desired),
                    None => desired,
                };
                let id = self.next_id;
                self.next_id += 1;
                self.lanes[l].push(VehicleState {
                    id,
                    lane: l,
                    position_mi: 0.0,
                    speed_mph: entry_speed,
                    accel_mphps: 0.0,
                    length_mi: VEHICLE_LENGTH_MI,
                    desired_speed_mph: desired,
                    wz_speed_mph: wz_cap,
                    entered_s: self.time_s,
                });
                self.entered += 1;
            }
        }
    }

    fn check_no_overlap(&self) -> Result<()> {
        for (l, lane) in self.lanes.iter().enumerate() {
            for i in 1..lane.len() {
                let lead = &lane[i - 1];
                let v = &lane[i];
                if lead.position_mi - v.position_mi <= lead.length_mi {
                    return Err(Error::Collision {
                        time_s: self.time_s,
                        lane: l,
                        leader_id: lead.id,
                        leader_pos: lead.position_mi,
                        follower_id: v.id,
                        follower_pos: v.position_mi,
                    });
                }
            }
        }
        Ok(())
    }

    /// entered == exited + present must hold exactly at every step.
    pub fn conservation_holds(&self) -> bool {
        self.entered == self.exited + self.present() as u64
    }
}
