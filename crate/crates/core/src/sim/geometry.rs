use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Distance past the work-zone end before vehicles leave the network, so
/// exits happen downstream of the last roadside unit.
pub const RUNOUT_MI: f64 = 0.3;

/// Two-lane freeway with a single-lane work zone at the downstream end.
///
/// Positions are measured in miles from the network entry. The closed lane
/// is the highest lane index; lane 0 runs through the work zone.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct RoadGeometry {
    pub upstream_length_mi: f64,
    pub wz_length_mi: f64,
    pub lanes_upstream: usize,
    pub lanes_wz: usize,
    pub speed_limit_normal_mph: f64,
    pub speed_limit_wz_mph: f64,
    /// Warning arrow panel, miles upstream of the work-zone start.
    pub arrow_panel_upstream_mi: f64,
    /// Variable message sign, miles upstream of the work-zone start.
    pub vms_upstream_mi: f64,
}

impl Default for RoadGeometry {
    fn default() -> Self {
        RoadGeometry {
            upstream_length_mi: 5.0,
            wz_length_mi: 2.0,
            lanes_upstream: 2,
            lanes_wz: 1,
            speed_limit_normal_mph: 65.0,
            speed_limit_wz_mph: 45.0,
            arrow_panel_upstream_mi: 0.1,
            vms_upstream_mi: 0.7,
        }
    }
}

impl RoadGeometry {
    /// Position where the lane closure begins.
    pub fn wz_start(&self) -> f64 {
        self.upstream_length_mi
    }

    /// Position of the work-zone end (roadside unit 1 sits here).
    pub fn wz_end(&self) -> f64 {
        self.upstream_length_mi + self.wz_length_mi
    }

    pub fn network_length(&self) -> f64 {
        self.wz_end() + RUNOUT_MI
    }

    pub fn arrow_panel_pos(&self) -> f64 {
        self.wz_start() - self.arrow_panel_upstream_mi
    }

    pub fn vms_pos(&self) -> f64 {
        self.wz_start() - self.vms_upstream_mi
    }

    /// Start of the reduced-speed region. Drivers obey the work-zone limit
    /// from the arrow panel onward so they enter the closure already slowed.
    pub fn cap_zone_start(&self) -> f64 {
        self.arrow_panel_pos()
    }

    pub fn validate(&self) -> Result<()> {
        if self.upstream_length_mi < 3.0 {
            return Err(Error::config(
                "geometry.upstream_length_mi",
                "must be at least 3.0 so RSU 12 fits 2.0 mi upstream with queue headroom",
            ));
        }
        if self.wz_length_mi <= 0.0 {
            return Err(Error::config("geometry.wz_length_mi", "must be positive"));
        }
        if self.lanes_wz >= self.lanes_upstream {
            return Err(Error::config(
                "geometry.lanes_wz",
                "work zone must close at least one lane",
            ));
        }
        if self.lanes_wz == 0 {
            return Err(Error::config("geometry.lanes_wz", "need at least one open lane"));
        }
        if self.speed_limit_normal_mph <= 0.0 || self.speed_limit_wz_mph <= 0.0 {
            return Err(Error::config("geometry.speed_limit", "limits must be positive"));
        }
        if self.vms_upstream_mi <= self.arrow_panel_upstream_mi {
            return Err(Error::config(
                "geometry.vms_upstream_mi",
                "VMS must be farther upstream than the arrow panel",
            ));
        }
        if self.arrow_panel_upstream_mi < 0.0 {
            return Err(Error::config("geometry.arrow_panel_upstream_mi", "must be nonnegative"));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_geometry_is_valid() {
        let g = RoadGeometry::default();
        g.validate().unwrap();
        assert_eq!(g.wz_start(), 5.0);
        assert_eq!(g.wz_end(), 7.0);
        assert!(g.vms_pos() < g.arrow_panel_pos());
    }

    #[test]
    fn rejects_short_upstream() {
        let g = RoadGeometry {
            upstream_length_mi: 2.0,
            ..RoadGeometry::default()
        };
        assert!(g.validate().is_err());
    }

    #[test]
    fn rejects_sign_order_swap() {
        let g = RoadGeometry {
            vms_upstream_mi: 0.05,
            ..RoadGeometry::default()
        };
        assert!(g.validate().is_err());
    }
}
