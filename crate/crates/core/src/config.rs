//! Study configuration files.
//!
//! A configuration is TOML with a few top-level keys and one parameter
//! table named after the study:
//!
//! ```toml
//! study = "stability"
//! seed = 7
//! out = "runs/stability"
//!
//! [stability]
//! mode = "sweep"
//! ```
//!
//! Unknown keys are errors at every level, and a parameter table for a
//! different study than the one selected is rejected.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dist::{Feeder, StorageSpec};
use crate::fault_lab::{Case1Config, FeatureSet};
use crate::lightning::LightningConfig;
use crate::stability::SmibModel;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("{path}: {message}")]
    Parse { path: String, message: String },
    #[error("reading {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum StudyKind {
    FaultLab,
    Lightning,
    Dist,
    Stability,
    Ml,
}

impl StudyKind {
    pub fn name(self) -> &'static str {
        match self {
            StudyKind::FaultLab => "fault-lab",
            StudyKind::Lightning => "lightning",
            StudyKind::Dist => "dist",
            StudyKind::Stability => "stability",
            StudyKind::Ml => "ml",
        }
    }
}

impl fmt::Display for StudyKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FaultMode {
    Train,
    Test,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FaultLabParams {
    pub mode: FaultMode,
    /// Upper bound of the uniform fault resistances in test mode, ohms.
    pub r_max: f64,
    /// Dataset file name inside the output directory; `train.csv` or
    /// `test.csv` when absent.
    pub file: Option<String>,
    pub system: Case1Config,
}

impl Default for FaultLabParams {
    fn default() -> Self {
        Self {
            mode: FaultMode::Train,
            r_max: 1.0,
            file: None,
            system: Case1Config::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DistCase {
    A1,
    A2,
    A3,
    A4,
    B1,
    B2,
    B3,
    B4,
}

impl DistCase {
    pub const ALL: [DistCase; 8] = [
        DistCase::A1,
        DistCase::A2,
        DistCase::A3,
        DistCase::A4,
        DistCase::B1,
        DistCase::B2,
        DistCase::B3,
        DistCase::B4,
    ];

    pub fn is_time_series(self) -> bool {
        matches!(
            self,
            DistCase::A1 | DistCase::A2 | DistCase::A3 | DistCase::A4
        )
    }

    pub fn parse(s: &str) -> Option<Self> {
        Self::ALL
            .into_iter()
            .find(|c| c.to_string().eq_ignore_ascii_case(s))
    }
}

impl fmt::Display for DistCase {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{self:?}")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DistParams {
    pub case: DistCase,
    pub hours: usize,
    pub runs: usize,
    pub feeder: Feeder,
    /// PV rating for cases A2–A4, kW.
    pub pv_kw: f64,
    /// Generator rating for cases B2 and B4, kW.
    pub gen_kw: f64,
    pub storage: StorageSpec,
    /// Optional (hour, multiplier) files, one per load. Synthetic shapes are
    /// used when empty.
    pub load_shapes: Vec<PathBuf>,
    pub pv_shape: Option<PathBuf>,
    pub storage_shape: Option<PathBuf>,
    /// (run, load, kW) table for cases B3 and B4. When absent the table is
    /// generated from the seed and written to the output directory.
    pub random_loads: Option<PathBuf>,
    pub bins: usize,
}

impl Default for DistParams {
    fn default() -> Self {
        Self {
            case: DistCase::A1,
            hours: 200,
            runs: 1000,
            feeder: Feeder::default(),
            pv_kw: 300.0,
            gen_kw: 300.0,
            storage: StorageSpec::default(),
            load_shapes: Vec::new(),
            pv_shape: None,
            storage_shape: None,
            random_loads: None,
            bins: 40,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StabilityMode {
    Single,
    Sweep,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct StabilityParams {
    pub mode: StabilityMode,
    /// Active power at full apparent power; sets the power factor.
    pub p_mw: f64,
    pub duration_ms: f64,
    pub dt_s: f64,
    pub durations_ms: [f64; 3],
    pub power_factors: [f64; 3],
    pub model: SmibModel,
}

impl Default for StabilityParams {
    fn default() -> Self {
        Self {
            mode: StabilityMode::Single,
            p_mw: 1998.0,
            duration_ms: 50.0,
            dt_s: 0.5e-3,
            durations_ms: [70.0, 250.0, 5.0],
            power_factors: [0.6, 1.0, 0.05],
            model: SmibModel::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MlTask {
    Fault,
    Lightning,
    Stability,
    All,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct MlParams {
    pub task: MlTask,
    /// Fault-resistance bounds of the fault test sets, ohms.
    pub fault_r_max: Vec<f64>,
    pub fault_features: FeatureSet,
    pub k_max: usize,
    /// Share of rows used for training in the random splits.
    pub train_fraction: f64,
    /// Lightning strokes sampled when no events file is given.
    pub lightning_n: usize,
    pub lightning_events: Option<PathBuf>,
    pub hidden: Vec<usize>,
    pub epochs: usize,
    pub learning_rate: f64,
    pub svm_c: f64,
}

impl Default for MlParams {
    fn default() -> Self {
        Self {
            task: MlTask::All,
            fault_r_max: vec![1.0, 5.0],
            fault_features: FeatureSet::All,
            k_max: 4,
            train_fraction: 0.8,
            lightning_n: 5000,
            lightning_events: None,
            hidden: vec![8, 8],
            epochs: 20_000,
            learning_rate: 0.1,
            svm_c: 10.0,
        }
    }
}

fn default_out() -> PathBuf {
    PathBuf::from("out")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct StudyConfig {
    pub study: StudyKind,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_out")]
    pub out: PathBuf,
    /// Worker threads for the parallel parts; all cores when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(default, rename = "fault-lab", skip_serializing_if = "Option::is_none")]
    pub fault_lab: Option<FaultLabParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lightning: Option<LightningConfig>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub dist: Option<DistParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stability: Option<StabilityParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ml: Option<MlParams>,
}

impl StudyConfig {
    /// Defaults for `study` with its parameter table filled in.
    pub fn new(study: StudyKind) -> Self {
        let mut c = Self {
            study,
            seed: 0,
            out: default_out(),
            threads: None,
            fault_lab: None,
            lightning: None,
            dist: None,
            stability: None,
            ml: None,
        };
        c.resolve();
        c
    }

    pub fn from_toml(text: &str, origin: &str) -> Result<Self, ConfigError> {
        let mut c: StudyConfig = toml::from_str(text).map_err(|e| ConfigError::Parse {
            path: origin.into(),
            message: e.to_string().trim_end().to_string(),
        })?;
        c.check_blocks()?;
        c.resolve();
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml(&text, &path.display().to_string())
    }

    fn check_blocks(&self) -> Result<(), ConfigError> {
        let present = [
            (StudyKind::FaultLab, self.fault_lab.is_some()),
            (StudyKind::Lightning, self.lightning.is_some()),
            (StudyKind::Dist, self.dist.is_some()),
            (StudyKind::Stability, self.stability.is_some()),
            (StudyKind::Ml, self.ml.is_some()),
        ];
        for (kind, set) in present {
            if set && kind != self.study {
                return Err(ConfigError::Invalid(format!(
                    "table [{kind}] does not apply to study \"{}\"",
                    self.study
                )));
            }
        }
        Ok(())
    }

    /// Fills the selected study's parameter table with defaults.
    pub fn resolve(&mut self) {
        match self.study {
            StudyKind::FaultLab => {
                self.fault_lab.get_or_insert_with(Default::default);
            }
            StudyKind::Lightning => {
                self.lightning.get_or_insert_with(Default::default);
            }
            StudyKind::Dist => {
                self.dist.get_or_insert_with(Default::default);
            }
            StudyKind::Stability => {
                self.stability.get_or_insert_with(Default::default);
            }
            StudyKind::Ml => {
                self.ml.get_or_insert_with(Default::default);
            }
        }
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: String| Err(ConfigError::Invalid(m));
        if self.threads == Some(0) {
            return bad("threads must be at least 1".into());
        }
        if let Some(p) = &self.fault_lab {
            if !(p.r_max.is_finite() && p.r_max > 0.0) {
                return bad(format!("fault-lab.r_max must be positive, got {}", p.r_max));
            }
        }
        if let Some(p) = &self.lightning {
            p.validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if p.n == 0 {
                return bad("lightning.n must be at least 1".into());
            }
        }
        if let Some(p) = &self.dist {
            p.feeder
                .validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if p.hours == 0 || p.runs == 0 || p.bins == 0 {
                return bad("dist.hours, dist.runs and dist.bins must be at least 1".into());
            }
            if !p.load_shapes.is_empty() && p.load_shapes.len() != p.feeder.loads.len() {
                return bad(format!(
                    "dist.load_shapes lists {} files for {} loads",
                    p.load_shapes.len(),
                    p.feeder.loads.len()
                ));
            }
        }
        if let Some(p) = &self.stability {
            p.model
                .validate()
                .map_err(|e| ConfigError::Invalid(e.to_string()))?;
            if !(p.dt_s > 0.0 && p.duration_ms >= 0.0 && p.p_mw >= 0.0) {
                return bad(
                    "stability.dt_s must be positive, duration and power non-negative".into(),
                );
            }
            for (name, g) in [
                ("durations_ms", p.durations_ms),
                ("power_factors", p.power_factors),
            ] {
                if !(g[2] > 0.0 && g[1] >= g[0]) {
                    return bad(format!("stability.{name} must be [start, stop, step] with stop >= start and step > 0"));
                }
            }
        }
        if let Some(p) = &self.ml {
            if p.k_max == 0 || p.hidden.contains(&0) || p.epochs == 0 {
                return bad("ml.k_max, ml.epochs and every hidden width must be at least 1".into());
            }
            if !(p.train_fraction > 0.0 && p.train_fraction < 1.0) {
                return bad(format!(
                    "ml.train_fraction must be in (0, 1), got {}",
                    p.train_fraction
                ));
            }
            if p.fault_r_max.iter().any(|r| !(r.is_finite() && *r > 0.0)) {
                return bad("ml.fault_r_max entries must be positive".into());
            }
            if p.lightning_n == 0 {
                return bad("ml.lightning_n must be at least 1".into());
            }
        }
        Ok(())
    }

    /// The resolved configuration as TOML.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn unknown_key_is_named() {
        let e = StudyConfig::from_toml("study = \"ml\"\nsede = 3\n", "x.toml").unwrap_err();
        assert!(e.to_string().contains("sede"), "{e}");
        let e = StudyConfig::from_toml("study = \"stability\"\n[stability]\np_mx = 1\n", "x.toml")
            .unwrap_err();
        assert!(e.to_string().contains("p_mx"), "{e}");
    }

    #[test]
    fn foreign_table_is_rejected() {
        let e = StudyConfig::from_toml("study = \"ml\"\n[dist]\nhours = 3\n", "x").unwrap_err();
        assert!(matches!(e, ConfigError::Invalid(_)));
    }

    #[test]
    fn resolved_config_round_trips() {
        for kind in [
            StudyKind::FaultLab,
            StudyKind::Lightning,
            StudyKind::Dist,
            StudyKind::Stability,
            StudyKind::Ml,
        ] {
            let c = StudyConfig::new(kind);
            let back = StudyConfig::from_toml(&c.to_toml(), "echo").unwrap();
            assert_eq!(back, c);
        }
    }

    #[test]
    fn dist_case_names() {
        assert_eq!(DistCase::parse("b3"), Some(DistCase::B3));
        assert_eq!(DistCase::parse("C1"), None);
    }
}
