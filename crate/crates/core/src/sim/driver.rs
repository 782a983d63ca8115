use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hard braking floor, mph per second (~7 m/s²).
pub const EMERGENCY_DECEL_MPHPS: f64 = 16.0;

const SECONDS_PER_HOUR: f64 = 3600.0;

/// Car-following and lane-change parameters shared by all drivers.
/// Per-vehicle heterogeneity is applied on top of `desired_speed_mph`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DriverParams {
    pub desired_speed_mph: f64,
    pub time_headway_s: f64,
    pub min_gap_mi: f64,
    pub max_accel_mphps: f64,
    pub comfort_decel_mphps: f64,
    /// Chance per step that a closing-lane driver attempts a merge once past
    /// the VMS (before the arrow panel, where merging becomes mandatory).
    pub early_merge_prob: f64,
    pub merge_gap_min_mi: f64,
}

impl Default for DriverParams {
    fn default() -> Self {
        DriverParams {
            desired_speed_mph: 65.0,
            time_headway_s: 1.5,
            min_gap_mi: 0.002,
            max_accel_mphps: 3.0,
            comfort_decel_mphps: 4.5,
            early_merge_prob: 0.05,
            merge_gap_min_mi: 0.02,
        }
    }
}

impl DriverParams {
    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("driver.desired_speed_mph", self.desired_speed_mph),
            ("driver.time_headway_s", self.time_headway_s),
            ("driver.min_gap_mi", self.min_gap_mi),
            ("driver.max_accel_mphps", self.max_accel_mphps),
            ("driver.comfort_decel_mphps", self.comfort_decel_mphps),
            ("driver.merge_gap_min_mi", self.merge_gap_min_mi),
        ] {
            if v <= 0.0 || !v.is_finite() {
                return Err(Error::config(name, "must be strictly positive"));
            }
        }
        if !(0.0..=1.0).contains(&self.early_merge_prob) {
            return Err(Error::config("driver.early_merge_prob", "must be within [0, 1]"));
        }
        Ok(())
    }
}

/// Intelligent Driver Model acceleration in a single consistent unit system:
/// lengths, speeds, and accelerations must all share the same length and time
/// units (`gap` [L], speeds [L/T], `min_gap` [L], `headway` [T],
/// `max_accel`/`comfort_decel` [L/T²]). Returns acceleration in [L/T²].
pub fn idm_acceleration(
    gap: f64,
    speed: f64,
    leader_speed: f64,
    desired_speed: f64,
    min_gap: f64,
    headway: f64,
    max_accel: f64,
    comfort_decel: f64,
) -> f64 {
    let approach = speed - leader_speed;
    let s_star =
        min_gap + speed * headway + speed * approach / (2.0 * (max_accel * comfort_decel).sqrt());
    let free = (speed / desired_speed).powi(4);
    max_accel * (1.0 - free - (s_star / gap).powi(2))
}

/// IDM acceleration in simulation units (gap in miles, speeds in mph,
/// result in mph/s) against an explicit desired speed. Non-positive gaps
/// return the emergency braking value rather than an error, and the result
/// is clamped to the emergency floor.
pub fn car_following_accel_toward(
    gap_mi: f64,
    speed_mph: f64,
    leader_speed_mph: f64,
    desired_speed_mph: f64,
    p: &DriverParams,
) -> f64 {
    if gap_mi <= 0.0 {
        return -EMERGENCY_DECEL_MPHPS;
    }
    // Consistent (miles, hours) system: mph/s -> mph/h, seconds -> hours.
    let a = idm_acceleration(
        gap_mi,
        speed_mph,
        leader_speed_mph,
        desired_speed_mph,
        p.min_gap_mi,
        p.time_headway_s / SECONDS_PER_HOUR,
        p.max_accel_mphps * SECONDS_PER_HOUR,
        p.comfort_decel_mphps * SECONDS_PER_HOUR,
    ) / SECONDS_PER_HOUR;
    a.max(-EMERGENCY_DECEL_MPHPS)
}

/// Spec surface: follower acceleration given the bumper-to-bumper gap to the
/// leader, using the driver's nominal desired speed.
pub fn car_following_accel(
    gap_mi: f64,
    speed_mph: f64,
    leader_speed_mph: f64,
    p: &DriverParams,
) -> f64 {
    car_following_accel_toward(gap_mi, speed_mph, leader_speed_mph, p.desired_speed_mph, p)
}

/// Free-road acceleration (no leader in range).
pub fn free_accel_toward(speed_mph: f64, desired_speed_mph: f64, p: &DriverParams) -> f64 {
    let a = p.max_accel_mphps * (1.0 - (speed_mph / desired_speed_mph).powi(4));
    a.max(-EMERGENCY_DECEL_MPHPS)
}

/// Bumper-to-bumper gap at which a follower at `speed` behind a leader at the
/// same speed has exactly zero IDM acceleration, given desired speed `v0`.
/// Used by tests to build steady-state configurations.
pub fn equilibrium_gap_mi(speed_mph: f64, desired_speed_mph: f64, p: &DriverParams) -> f64 {
    let s_star = p.min_gap_mi + speed_mph * p.time_headway_s / SECONDS_PER_HOUR;
    s_star / (1.0 - (speed_mph / desired_speed_mph).powi(4)).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn equilibrium_at_desired_speed_is_zero_accel() {
        let p = DriverParams::default();
        // Huge gap, driving at the desired speed, leader at the same speed.
        let a = car_following_accel(1e9, p.desired_speed_mph, p.desired_speed_mph, &p);
        assert!(a.abs() < 1e-9, "accel {a}");
    }

    #[test]
    fn free_road_start_accelerates_at_max() {
        let p = DriverParams::default();
        let a = car_following_accel(1e9, 0.0, 0.0, &p);
        assert_relative_eq!(a, p.max_accel_mphps, max_relative = 1e-9);
    }

    #[test]
    fn metric_instance_matches_hand_evaluation() {
        // v0=30 m/s, v=15, dv=0, s=20 m, s0=2 m, T=1.5 s, a=1.4, b=2.0 (SI).
        // s* = 2 + 22.5 = 24.5; a*(1 - (0.5)^4 - (24.5/20)^2) = -0.788375.
        let a = idm_acceleration(20.0, 15.0, 15.0, 30.0, 2.0, 1.5, 1.4, 2.0);
        assert_relative_eq!(a, -0.788375, epsilon = 1e-9);
    }

    #[test]
    fn non_positive_gap_returns_emergency_brake() {
        let p = DriverParams::default();
        assert_eq!(car_following_accel(0.0, 30.0, 30.0, &p), -EMERGENCY_DECEL_MPHPS);
        assert_eq!(car_following_accel(-0.5, 30.0, 30.0, &p), -EMERGENCY_DECEL_MPHPS);
    }

    #[test]
    fn accel_is_bounded() {
        let p = DriverParams::default();
        // Tailgating at speed: clamped at the emergency floor, never below.
        let a = car_following_accel(1e-6, 65.0, 0.0, &p);
        assert_eq!(a, -EMERGENCY_DECEL_MPHPS);
        // Never exceeds max_accel from above.
        let a = car_following_accel(1e9, 1.0, 1.0, &p);
        assert!(a <= p.max_accel_mphps + 1e-12);
    }

    #[test]
    fn equilibrium_gap_zeroes_idm() {
        let p = DriverParams::default();
        let v = 40.0;
        let gap = equilibrium_gap_mi(v, p.desired_speed_mph, &p);
        let a = car_following_accel(gap, v, v, &p);
        assert!(a.abs() < 1e-10, "accel {a}");
    }
}
