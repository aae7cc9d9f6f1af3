use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::channel::SystemConfig;
use crate::error::{Error, Result};
use crate::support::{MmvOptions, ThresholdRule};

/// Scenario geometry, sweep lists and Monte-Carlo sizes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioSpec {
    /// Number of scattering clusters shared by all users.
    pub cluster_count: usize,
    /// Angular width of every cluster in radians.
    pub cluster_width: f64,
    /// Each user couples to `1..=max_clusters_per_user` clusters, uniformly.
    pub max_clusters_per_user: usize,
    pub ul_snr_db: f64,
    pub master_seed: u64,
    pub pilot_dims: Vec<usize>,
    pub dl_snr_db: Vec<f64>,
    pub rate_trials: usize,
    pub geometry_seeds: usize,
    pub threshold: ThresholdRule,
    pub mmv: MmvOptions,
    /// Shared atoms in the J-OMP joint stage; 0 disables it.
    pub joint_atoms: usize,
    pub ilp_node_limit: usize,
    /// Record per-cell wall time; off keeps reports byte-reproducible.
    pub record_timing: bool,
}

impl Default for ScenarioSpec {
    fn default() -> Self {
        ScaleProfile::Desk.scenario()
    }
}

impl ScenarioSpec {
    pub fn validate(&self, cfg: &SystemConfig) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.cluster_count == 0 {
            return bad("cluster_count must be ≥ 1".into());
        }
        if !(self.cluster_width > 0.0 && self.cluster_width <= 2.0 * cfg.theta_max) {
            return bad(format!("cluster_width = {} must lie in (0, 2θmax]", self.cluster_width));
        }
        if self.max_clusters_per_user == 0 {
            return bad("max_clusters_per_user must be ≥ 1".into());
        }
        if self.rate_trials == 0 || self.geometry_seeds == 0 {
            return bad("trial and seed counts must be ≥ 1".into());
        }
        if self.pilot_dims.contains(&0) {
            return bad("pilot dimensions must be ≥ 1".into());
        }
        if self.dl_snr_db.iter().any(|s| !s.is_finite()) {
            return bad("non-finite DL SNR".into());
        }
        Ok(())
    }

    /// Nominal worst-case support size: every cluster at its nominal width.
    pub fn s_max(&self, cfg: &SystemConfig) -> usize {
        self.cluster_count * crate::channel::nominal_cluster_size(cfg, self.cluster_width)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScaleProfile {
    /// `M = 64`, `K = 10`, two clusters.
    Desk,
    /// `M = 128`, `K = 20`, three clusters.
    Full,
}

impl ScaleProfile {
    pub fn system(self) -> SystemConfig {
        match self {
            ScaleProfile::Desk => {
                let mut c = SystemConfig::full_scale().with_antennas(64);
                c.users = 10;
                c
            }
            ScaleProfile::Full => SystemConfig::full_scale(),
        }
    }

    pub fn scenario(self) -> ScenarioSpec {
        let width = 2.0 * SystemConfig::full_scale().theta_max / 10.0;
        let base = ScenarioSpec {
            cluster_count: 2,
            cluster_width: width,
            max_clusters_per_user: 2,
            ul_snr_db: 15.0,
            master_seed: 1,
            pilot_dims: vec![2, 4, 6, 8, 10, 12, 16, 20],
            dl_snr_db: vec![0.0, 10.0],
            rate_trials: 200,
            geometry_seeds: 20,
            threshold: ThresholdRule::default(),
            mmv: MmvOptions::default(),
            joint_atoms: 0,
            ilp_node_limit: 200_000,
            record_timing: false,
        };
        match self {
            ScaleProfile::Desk => base,
            ScaleProfile::Full => ScenarioSpec {
                cluster_count: 3,
                max_clusters_per_user: 3,
                pilot_dims: vec![5, 10, 15, 20, 25, 30, 35, 39, 50, 64],
                ..base
            },
        }
    }

    pub fn config(self) -> ExperimentConfig {
        ExperimentConfig {
            system: self.system(),
            scenario: self.scenario(),
        }
    }
}

impl std::str::FromStr for ScaleProfile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "desk" => Ok(ScaleProfile::Desk),
            "full" => Ok(ScaleProfile::Full),
            other => Err(Error::InvalidConfig(format!("unknown profile {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentConfig {
    pub system: SystemConfig,
    pub scenario: ScenarioSpec,
}

impl ExperimentConfig {
    /// Parses a TOML document. An optional top-level `profile` picks the
    /// base values; keys under `[system]` and `[scenario]` override them.
    pub fn from_toml(text: &str) -> Result<Self> {
        let doc: toml::Table = text.parse()?;
        let profile = match doc.get("profile") {
            None => ScaleProfile::Desk,
            Some(toml::Value::String(s)) => s.parse()?,
            Some(other) => return Err(Error::InvalidConfig(format!("profile must be a string, got {other}"))),
        };
        for key in doc.keys() {
            if !matches!(key.as_str(), "profile" | "system" | "scenario") {
                return Err(Error::InvalidConfig(format!("unknown top-level key {key:?}")));
            }
        }
        let base = profile.config();
        let merge = |section: &str, base: toml::Table| -> Result<toml::Table> {
            let mut merged = base;
            match doc.get(section) {
                None => {}
                Some(toml::Value::Table(over)) => {
                    for (k, v) in over {
                        if !merged.contains_key(k) {
                            return Err(Error::InvalidConfig(format!("unknown key {section}.{k}")));
                        }
                        merged.insert(k.clone(), v.clone());
                    }
                }
                Some(_) => return Err(Error::InvalidConfig(format!("{section} must be a table"))),
            }
            Ok(merged)
        };
        let system: SystemConfig = merge("system", to_table(&base.system)?)?.try_into()?;
        let scenario: ScenarioSpec = merge("scenario", to_table(&base.scenario)?)?.try_into()?;
        let cfg = ExperimentConfig { system, scenario };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text)
    }

    pub fn validate(&self) -> Result<()> {
        let mut probe = self.system.clone();
        probe.pilot_dim = 1;
        probe.validate()?;
        self.scenario.validate(&self.system)
    }
}

fn to_table<T: Serialize>(v: &T) -> Result<toml::Table> {
    toml::Table::try_from(v).map_err(|e| Error::InvalidConfig(e.to_string()))
}
