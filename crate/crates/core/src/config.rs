//! Scenario configuration: one TOML file drives the whole pipeline.
//! Unknown keys are rejected so typos fail loudly.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::arx::ArxConfig;
use crate::demand::{apply_profile_overrides, default_profiles, DemandProfile};
use crate::error::{Error, Result};
use crate::features::{QueueMode, N_INPUT_VARS};
use crate::learners::{ElasticNetConfig, MarsConfig};
use crate::sensing::{standard_layout, validate_layout, Rsu, DEFAULT_COVERAGE_RADIUS_MI};
use crate::sim::{DriverParams, RoadGeometry, SimConfig};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SensingConfig {
    pub coverage_radius_mi: f64,
    /// Fraction of vehicles carrying an OBU.
    pub penetration: f64,
    /// Optional positions for the twelve RSUs (id 1 first, most downstream).
    pub rsu_positions_mi: Option<Vec<f64>>,
}

impl Default for SensingConfig {
    fn default() -> Self {
        SensingConfig {
            coverage_radius_mi: DEFAULT_COVERAGE_RADIUS_MI,
            penetration: 1.0,
            rsu_positions_mi: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DemandConfig {
    /// CSV override (month,hour,volume) applied over the built-in profiles.
    pub profile_csv: Option<PathBuf>,
}

impl Default for DemandConfig {
    fn default() -> Self {
        DemandConfig { profile_csv: None }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ArxSection {
    pub lahead: u32,
    pub n_a: usize,
    /// Uniform exogenous lag count; `n_b_per_input` overrides it per input.
    pub n_b: usize,
    pub n_b_per_input: Option<Vec<usize>>,
    pub include_current: bool,
}

impl Default for ArxSection {
    fn default() -> Self {
        ArxSection {
            lahead: 5,
            n_a: 3,
            n_b: 3,
            n_b_per_input: None,
            include_current: false,
        }
    }
}

impl ArxSection {
    pub fn to_arx_config(&self) -> ArxConfig {
        ArxConfig {
            lahead: self.lahead,
            n_a: self.n_a,
            n_b: self
                .n_b_per_input
                .clone()
                .unwrap_or_else(|| vec![self.n_b; N_INPUT_VARS]),
            include_current: self.include_current,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LearnerConfig {
    pub elastic_net: ElasticNetConfig,
    pub mars: MarsConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    pub hist_bin_width_s: f64,
}

impl Default for OutputConfig {
    fn default() -> Self {
        OutputConfig { hist_bin_width_s: 5.0 }
    }
}

/// Everything one run needs. The CLI can override months, replications,
/// seed, mode, and the output directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ScenarioConfig {
    pub seed: u64,
    pub replications: u32,
    pub months: Vec<u32>,
    pub mode: QueueMode,
    pub output_dir: Option<PathBuf>,
    pub sim: SimTimeConfig,
    pub geometry: RoadGeometry,
    pub driver: DriverParams,
    pub demand: DemandConfig,
    pub sensing: SensingConfig,
    pub arx: ArxSection,
    pub learners: LearnerConfig,
    pub output: OutputConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimTimeConfig {
    pub dt_s: f64,
    pub duration_h: f64,
}

impl Default for SimTimeConfig {
    fn default() -> Self {
        SimTimeConfig {
            dt_s: 0.5,
            duration_h: 24.0,
        }
    }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            seed: 20140104,
            replications: 10,
            months: (1..=12).collect(),
            mode: QueueMode::Oracle,
            output_dir: None,
            sim: SimTimeConfig::default(),
            geometry: RoadGeometry::default(),
            driver: DriverParams::default(),
            demand: DemandConfig::default(),
            sensing: SensingConfig::default(),
            arx: ArxSection::default(),
            learners: LearnerConfig::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ScenarioConfig {
    pub fn load(path: &Path) -> Result<ScenarioConfig> {
        let text = std::fs::read_to_string(path)?;
        let cfg: ScenarioConfig =
            toml::from_str(&text).map_err(|e| Error::TomlParse(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string_pretty(self).map_err(|e| Error::TomlParse(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        if self.replications < 1 {
            return Err(Error::config("replications", "must be >= 1"));
        }
        if self.months.is_empty() {
            return Err(Error::config("months", "must list at least one month"));
        }
        if self.months.iter().any(|m| !(1..=12).contains(m)) {
            return Err(Error::config("months", "months must be within 1..=12"));
        }
        let mut sorted = self.months.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.months.len() {
            return Err(Error::config("months", "months must be unique"));
        }
        if !(0.0..=1.0).contains(&self.sensing.penetration) {
            return Err(Error::config("sensing.penetration", "must be within [0, 1]"));
        }
        self.sim_config(0).validate()?;
        validate_layout(&self.rsus(), &self.geometry)?;
        self.arx.to_arx_config().validate()?;
        self.learners.elastic_net.validate()?;
        if self.output.hist_bin_width_s <= 0.0 {
            return Err(Error::config("output.hist_bin_width_s", "must be positive"));
        }
        Ok(())
    }

    pub fn sim_config(&self, seed: u64) -> SimConfig {
        SimConfig {
            dt_s: self.sim.dt_s,
            duration_h: self.sim.duration_h,
            seed,
            geometry: self.geometry.clone(),
            driver: self.driver.clone(),
        }
    }

    pub fn rsus(&self) -> Vec<Rsu> {
        match &self.sensing.rsu_positions_mi {
            Some(positions) => positions
                .iter()
                .enumerate()
                .map(|(i, &position_mi)| Rsu {
                    rsu_id: (i + 1) as u8,
                    position_mi,
                    coverage_radius_mi: self.sensing.coverage_radius_mi,
                })
                .collect(),
            None => standard_layout(&self.geometry, self.sensing.coverage_radius_mi),
        }
    }

    /// Demand profiles for the configured months, with CSV overrides.
    pub fn profiles(&self) -> Result<Vec<DemandProfile>> {
        let mut all = default_profiles();
        if let Some(path) = &self.demand.profile_csv {
            apply_profile_overrides(&mut all, path)?;
        }
        let mut out = Vec::new();
        for m in &self.months {
            let p = all
                .iter()
                .find(|p| p.month == *m)
                .ok_or_else(|| Error::config("months", format!("no profile for month {m}")))?;
            p.validate()?;
            out.push(p.clone());
        }
        Ok(out)
    }
}

/// Stable per-day seed derivation (splitmix64 over the base seed and the
/// day identity), so replications are independent yet reproducible.
pub fn seed_for(base: u64, month: u32, replication: u32, stream: u64) -> u64 {
    let mut z = base
        ^ (u64::from(month) << 40)
        ^ (u64::from(replication) << 16)
        ^ stream.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        ScenarioConfig::default().validate().unwrap();
    }

    #[test]
    fn toml_roundtrip_is_identity() {
        let cfg = ScenarioConfig::default();
        let text = cfg.to_toml().unwrap();
        let back: ScenarioConfig = toml::from_str(&text).unwrap();
        assert_eq!(cfg, back);
        // And a second serialize matches byte for byte.
        assert_eq!(text, back.to_toml().unwrap());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let err = toml::from_str::<ScenarioConfig>("bogus_key = 1").unwrap_err();
        assert!(err.to_string().contains("bogus_key"));
        let err =
            toml::from_str::<ScenarioConfig>("[geometry]\nwz_length_mi = 2.0\ntypo = 1").unwrap_err();
        assert!(err.to_string().contains("typo"));
    }

    #[test]
    fn invalid_fields_name_themselves() {
        let mut cfg = ScenarioConfig::default();
        cfg.months = vec![13];
        let err = cfg.validate().unwrap_err();
        assert!(err.to_string().contains("months"));

        let mut cfg = ScenarioConfig::default();
        cfg.sensing.penetration = 1.5;
        assert!(cfg.validate().unwrap_err().to_string().contains("penetration"));

        let mut cfg = ScenarioConfig::default();
        cfg.sim.dt_s = 2.0;
        assert!(cfg.validate().unwrap_err().to_string().contains("dt_s"));
    }

    #[test]
    fn rsu_override_is_validated() {
        let mut cfg = ScenarioConfig::default();
        cfg.sensing.rsu_positions_mi = Some(vec![1.0; 3]);
        assert!(cfg.validate().is_err());

        let g = RoadGeometry::default();
        let standard: Vec<f64> = standard_layout(&g, 0.05).iter().map(|r| r.position_mi).collect();
        cfg.sensing.rsu_positions_mi = Some(standard);
        cfg.validate().unwrap();
    }

    #[test]
    fn seed_derivation_separates_streams() {
        let a = seed_for(7, 1, 0, 0);
        let b = seed_for(7, 1, 1, 0);
        let c = seed_for(7, 2, 0, 0);
        let d = seed_for(7, 1, 0, 1);
        assert!(a != b && a != c && a != d && b != c);
        assert_eq!(a, seed_for(7, 1, 0, 0));
    }
}
