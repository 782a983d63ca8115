//! Microscopic two-lane freeway simulation with a one-lane-closed work zone.
//!
//! Car following is the Intelligent Driver Model; the lane drop is handled
//! with probabilistic early merging after the VMS, mandatory gap-acceptance
//! merging after the arrow panel, and stop-and-creep at the taper.

mod driver;
mod geometry;
mod vehicle;
mod world;

pub use driver::{
    car_following_accel, car_following_accel_toward, equilibrium_gap_mi, free_accel_toward,
    idm_acceleration, DriverParams, EMERGENCY_DECEL_MPHPS,
};
pub use geometry::{RoadGeometry, RUNOUT_MI};
pub use vehicle::{ExitRecord, TrajRecord, VehicleState, VEHICLE_LENGTH_MI};
pub use world::World;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Configuration for one replication.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimConfig {
    pub dt_s: f64,
    pub duration_h: f64,
    pub seed: u64,
    pub geometry: RoadGeometry,
    pub driver: DriverParams,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig {
            dt_s: 0.5,
            duration_h: 24.0,
            seed: 0,
            geometry: RoadGeometry::default(),
            driver: DriverParams::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.dt_s > 0.0 && self.dt_s <= 1.0) {
            return Err(Error::config("sim.dt_s", "must be in (0, 1]"));
        }
        if self.duration_h <= 0.0 {
            return Err(Error::config("sim.duration_h", "must be positive"));
        }
        self.geometry.validate()?;
        self.driver.validate()
    }
}
