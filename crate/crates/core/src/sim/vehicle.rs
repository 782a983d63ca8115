use serde::{Deserialize, Serialize};

/// Default vehicle length, miles (~4.8 m).
pub const VEHICLE_LENGTH_MI: f64 = 0.003;

/// One simulated vehicle. `position_mi` is the front bumper, miles from the
/// network entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VehicleState {
    pub id: u64,
    pub lane: usize,
    pub position_mi: f64,
    pub speed_mph: f64,
    pub accel_mphps: f64,
    pub length_mi: f64,
    /// Personal free-flow target speed (heterogeneous around the nominal).
    pub desired_speed_mph: f64,
    /// Personal speed ceiling inside the reduced-speed region.
    pub wz_speed_mph: f64,
    pub entered_s: f64,
}

/// One line of the append-only trajectory log (1 Hz).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajRecord {
    pub vehicle_id: u64,
    pub time_s: f64,
    pub lane: usize,
    pub position_mi: f64,
    pub speed_mph: f64,
    pub accel_mphps: f64,
}

/// Recorded when a vehicle leaves the downstream end of the network.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExitRecord {
    pub vehicle_id: u64,
    pub entered_s: f64,
    pub exited_s: f64,
}
