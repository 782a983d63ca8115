//! Monthly 24-hour demand profiles and Poisson arrival generation.
//!
//! The default profiles are synthetic: a double-peak diurnal shape scaled
//! per month so the summer months push the one-lane work zone past capacity
//! while winter months stay uncongested. Real counts can be substituted via
//! a CSV override (columns month, hour, volume).

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Hour-of-day shape as a fraction of the daily peak.
const DIURNAL_SHAPE: [f64; 24] = [
    0.10, 0.07, 0.06, 0.06, 0.08, 0.18, 0.45, 0.85, 1.00, 0.80, 0.62, 0.58, 0.60, 0.62, 0.70,
    0.85, 0.97, 1.00, 0.80, 0.55, 0.40, 0.30, 0.20, 0.13,
];

/// Peak hourly volume (two-lane total, veh/h) by month, Jan..Dec. The
/// one-lane work zone discharges about 1,300 veh/h, so the summer months
/// (and November, mildly) overload it while winter stays free-flowing.
const MONTHLY_PEAK_VEH_H: [f64; 12] = [
    950.0, 1000.0, 1060.0, 1120.0, 1180.0, 1440.0, 1650.0, 1700.0, 1480.0, 1240.0, 1380.0, 1150.0,
];

/// Hourly two-lane entry volumes for one month.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DemandProfile {
    pub month: u32,
    pub hourly_volume: Vec<f64>,
}

impl DemandProfile {
    pub fn validate(&self) -> Result<()> {
        if !(1..=12).contains(&self.month) {
            return Err(Error::config("demand.month", "must be within 1..=12"));
        }
        if self.hourly_volume.len() != 24 {
            return Err(Error::config(
                "demand.hourly_volume",
                format!("expected 24 hourly values, got {}", self.hourly_volume.len()),
            ));
        }
        if self.hourly_volume.iter().any(|v| *v < 0.0 || !v.is_finite()) {
            return Err(Error::config("demand.hourly_volume", "volumes must be >= 0"));
        }
        Ok(())
    }

    pub fn peak(&self) -> f64 {
        self.hourly_volume.iter().cloned().fold(0.0, f64::max)
    }

    pub fn daily_total(&self) -> f64 {
        self.hourly_volume.iter().sum()
    }
}

/// Twelve synthetic profiles sharing the diurnal shape.
pub fn default_profiles() -> Vec<DemandProfile> {
    (1..=12u32)
        .map(|month| DemandProfile {
            month,
            hourly_volume: DIURNAL_SHAPE
                .iter()
                .map(|f| f * MONTHLY_PEAK_VEH_H[(month - 1) as usize])
                .collect(),
        })
        .collect()
}

/// One scheduled network entry.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Arrival {
    /// Seconds from midnight.
    pub time_s: f64,
    pub lane: usize,
}

/// Homogeneous Poisson arrivals within one hour of the profile, split 50/50
/// at random over `entry_lanes`. Times are strictly increasing, in seconds
/// from midnight.
pub fn generate_arrivals<R: Rng>(
    profile: &DemandProfile,
    hour: usize,
    entry_lanes: usize,
    rng: &mut R,
) -> Vec<Arrival> {
    let volume = profile.hourly_volume[hour];
    let mut out = Vec::new();
    if volume <= 0.0 {
        return out;
    }
    let rate_per_s = volume / 3600.0;
    let mut t = hour as f64 * 3600.0;
    let end = (hour as f64 + 1.0) * 3600.0;
    loop {
        let u: f64 = rng.random();
        t += -u.ln() / rate_per_s;
        if t >= end {
            break;
        }
        let lane = rng.random_range(0..entry_lanes);
        out.push(Arrival { time_s: t, lane });
    }
    out
}

/// Apply `month,hour,volume` overrides from a CSV file on top of the given
/// profiles. Every overridden month must supply all 24 hours.
pub fn apply_profile_overrides(profiles: &mut [DemandProfile], path: &Path) -> Result<()> {
    #[derive(Deserialize)]
    struct Row {
        month: u32,
        hour: usize,
        volume: f64,
    }
    let mut rdr = csv::Reader::from_path(path)?;
    let mut seen = vec![[false; 24]; 12];
    for rec in rdr.deserialize() {
        let row: Row = rec?;
        if !(1..=12).contains(&row.month) || row.hour >= 24 {
            return Err(Error::config(
                "demand_override",
                format!("bad month/hour pair ({}, {})", row.month, row.hour),
            ));
        }
        if row.volume < 0.0 || !row.volume.is_finite() {
            return Err(Error::config("demand_override", "volume must be >= 0"));
        }
        let p = profiles
            .iter_mut()
            .find(|p| p.month == row.month)
            .ok_or_else(|| Error::config("demand_override", format!("month {} not in run", row.month)))?;
        p.hourly_volume[row.hour] = row.volume;
        seen[(row.month - 1) as usize][row.hour] = true;
    }
    for (m, hours) in seen.iter().enumerate() {
        let n = hours.iter().filter(|h| **h).count();
        if n != 0 && n != 24 {
            return Err(Error::config(
                "demand_override",
                format!("month {} overrides only {n} of 24 hours", m + 1),
            ));
        }
    }
    Ok(())
}
