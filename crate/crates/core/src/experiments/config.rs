use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::phc::FacilityConfig;
use crate::rthfa::{CalibrationSettings, NetworkConfig, PredictorKind};

/// Minutes to the preferred facility when no travel matrix is given.
pub const DEFAULT_TRAVEL_PREFERRED: f64 = 15.0;
/// Minutes to any other facility when no travel matrix is given.
pub const DEFAULT_TRAVEL_ALTERNATE: f64 = 30.0;

/// A complete experiment: network, policy, horizon and replication plan.
///
/// Read from TOML. Facilities are `[[facility]]` tables whose omitted keys
/// take the primary-health-centre defaults.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScenarioConfig {
    pub name: String,
    #[serde(rename = "facility")]
    pub facilities: Vec<FacilityConfig>,
    /// Minutes from origin (row) to facility (column).
    pub travel: Option<Vec<Vec<f64>>>,
    pub predictor: PredictorKind,
    pub compliance: f64,
    pub horizon_days: f64,
    pub warmup_days: f64,
    pub replications: usize,
    pub seed: u64,
    pub doctor_departures: bool,
    pub oracle_guard_days: f64,
    pub calibration: Option<CalibrationSettings>,
    /// Policy that drives the calibration windows; defaults to `predictor`.
    pub calibration_predictor: Option<PredictorKind>,
    /// Fitted nearest-neighbour model, required by the `simml` predictor.
    pub model: Option<PathBuf>,
    pub output_dir: Option<PathBuf>,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: "baseline".into(),
            facilities: vec![
                FacilityConfig::with_outpatient_interarrival("PHC1", 9.0),
                FacilityConfig::with_outpatient_interarrival("PHC2", 2.0),
            ],
            travel: None,
            predictor: PredictorKind::None,
            compliance: 1.0,
            horizon_days: 365.0,
            warmup_days: 180.0,
            replications: 50,
            seed: 1,
            doctor_departures: true,
            oracle_guard_days: 10.0,
            calibration: None,
            calibration_predictor: None,
            model: None,
            output_dir: None,
        }
    }
}

impl ScenarioConfig {
    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: ScenarioConfig = toml::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Loads a scenario file; relative paths inside it resolve against its directory.
    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        let mut cfg = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in [&mut cfg.model, &mut cfg.output_dir].into_iter().flatten() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.horizon_days > self.warmup_days && self.warmup_days >= 0.0) {
            return Err(Error::Config(format!(
                "horizon ({}) must exceed warm-up ({}) and warm-up must be non-negative",
                self.horizon_days, self.warmup_days
            )));
        }
        if self.replications == 0 {
            return Err(Error::Config("at least one replication is required".into()));
        }
        if let Some(c) = &self.calibration {
            if !(c.epsilon > 0.0) || c.window_days < 1.0 || c.max_windows == 0 {
                return Err(Error::Config("calibration needs epsilon > 0, a window of at least one day and one window".into()));
            }
        }
        self.network(self.predictor).validate()
    }

    pub fn travel_matrix(&self) -> Vec<Vec<f64>> {
        self.travel.clone().unwrap_or_else(|| {
            let m = self.facilities.len();
            (0..m)
                .map(|o| {
                    (0..m)
                        .map(|j| if o == j { DEFAULT_TRAVEL_PREFERRED } else { DEFAULT_TRAVEL_ALTERNATE })
                        .collect()
                })
                .collect()
        })
    }

    /// Network settings for one replication under `predictor`, without calibration.
    pub fn network(&self, predictor: PredictorKind) -> NetworkConfig {
        NetworkConfig {
            facilities: self.facilities.clone(),
            travel: self.travel_matrix(),
            predictor,
            compliance: self.compliance,
            warmup_days: self.warmup_days,
            horizon_days: self.horizon_days,
            calibration: None,
            initial_interarrivals: None,
            doctor_departures: self.doctor_departures,
            oracle_guard_days: self.oracle_guard_days,
            collect_features: false,
            collect_decisions: false,
        }
    }

    pub fn facility_names(&self) -> Vec<String> {
        self.facilities.iter().map(|f| f.name.clone()).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sim::ServiceDistribution;

    #[test]
    fn facility_tables_override_only_given_keys() {
        let cfg = ScenarioConfig::from_toml(
            r#"
            name = "x"
            replications = 3
            travel = [[15.0, 15.0], [15.0, 15.0]]

            [[facility]]
            name = "A"
            outpatient_interarrival = { kind = "exponential", mean = 4.0 }

            [[facility]]
            name = "B"
            lab_visit_prob = 0.25
            "#,
        )
        .unwrap();
        assert_eq!(cfg.facilities[0].outpatient_interarrival, ServiceDistribution::exponential(4.0));
        assert_eq!(cfg.facilities[1].lab_visit_prob, 0.25);
        assert_eq!(cfg.facilities[1].ncd_service, FacilityConfig::default().ncd_service);
        assert_eq!(cfg.replications, 3);
        assert_eq!(cfg.horizon_days, 365.0);
    }

    #[test]
    fn default_travel_prefers_the_own_facility() {
        let cfg = ScenarioConfig::default();
        assert_eq!(cfg.travel_matrix(), vec![vec![15.0, 30.0], vec![30.0, 15.0]]);
    }

    #[test]
    fn malformed_scenarios_are_config_errors() {
        for text in [
            "horizon_days = 10\nwarmup_days = 20",
            "replications = 0",
            "compliance = 2.0",
            "unknown_key = 1",
            "[calibration]\nepsilon = 0.0",
            "predictor = \"oracle\"",
        ] {
            let err = ScenarioConfig::from_toml(text).unwrap_err();
            assert_eq!(err.exit_code(), 1, "{text}: {err}");
        }
    }

    #[test]
    fn relative_paths_follow_the_scenario_file() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("s.cfg");
        fs::write(&path, "model = \"knn.json\"\noutput_dir = \"/abs/out\"").unwrap();
        let cfg = ScenarioConfig::load(&path).unwrap();
        assert_eq!(cfg.model.unwrap(), dir.path().join("knn.json"));
        assert_eq!(cfg.output_dir.unwrap(), PathBuf::from("/abs/out"));
    }
}
