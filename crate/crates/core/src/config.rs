//! Run configuration, read from TOML.
//!
//! Every section may be omitted; missing fields take the tuned defaults.
//! `TENNIS_DATA_DIR`, when set, replaces `data.dir`.

use std::path::{Path, PathBuf};

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use crate::betting::Staking;
use crate::error::{Error, Result};
use crate::eval::Source;
use crate::graphs::GraphParams;
use crate::ingest::Tour;
use crate::magnet::MagnetHyperparams;
use crate::pipeline::{DateRange, WalkForwardConfig};

pub const DATA_DIR_ENV: &str = "TENNIS_DATA_DIR";

/// Input and output locations. Relative input paths resolve against `dir`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DataConfig {
    pub dir: PathBuf,
    /// Directories (under `dir`) holding one results CSV per season.
    pub men_results: PathBuf,
    pub women_results: PathBuf,
    pub men_players: PathBuf,
    pub women_players: PathBuf,
    /// Optional `name,player_id` map from source spellings to player ids.
    pub names: Option<PathBuf>,
    pub output: PathBuf,
}

impl Default for DataConfig {
    fn default() -> Self {
        DataConfig {
            dir: "data".into(),
            men_results: "men".into(),
            women_results: "women".into(),
            men_players: "players_men.csv".into(),
            women_players: "players_women.csv".into(),
            names: None,
            output: "out".into(),
        }
    }
}

impl DataConfig {
    pub fn resolve(&self, p: &Path) -> PathBuf {
        if p.is_absolute() {
            p.to_path_buf()
        } else {
            self.dir.join(p)
        }
    }

    pub fn results_dir(&self, tour: Tour) -> PathBuf {
        self.resolve(match tour {
            Tour::Men => &self.men_results,
            Tour::Women => &self.women_results,
        })
    }

    pub fn players_file(&self, tour: Tour) -> PathBuf {
        self.resolve(match tour {
            Tour::Men => &self.men_players,
            Tour::Women => &self.women_players,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct WalkForwardDates {
    pub history_start: NaiveDate,
    pub validation_start: NaiveDate,
    pub validation_end: NaiveDate,
    pub test_start: NaiveDate,
    pub test_end: NaiveDate,
    pub train_fraction: f64,
}

impl Default for WalkForwardDates {
    fn default() -> Self {
        let d = WalkForwardConfig::new(Tour::Men);
        WalkForwardDates {
            history_start: d.history_start,
            validation_start: d.validation.start,
            validation_end: d.validation.end,
            test_start: d.test.start,
            test_end: d.test.end,
            train_fraction: d.train_fraction,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BettingConfig {
    pub staking: Staking,
    /// Eligibility threshold on weighted intransitivity; 0 admits every match.
    pub gamma: f64,
    pub source: Source,
    pub trials: usize,
}

impl Default for BettingConfig {
    fn default() -> Self {
        BettingConfig {
            staking: Staking::Kelly,
            gamma: 2.55,
            source: Source::Model,
            trials: 10_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluationConfig {
    /// Player resamples per cluster-bootstrap interval.
    pub bootstrap_resamples: usize,
}

impl Default for EvaluationConfig {
    fn default() -> Self {
        EvaluationConfig { bootstrap_resamples: 1_000 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Config {
    /// Root of every random stream in a run.
    pub seed: u64,
    pub data: DataConfig,
    pub graph: GraphParams,
    pub model: MagnetHyperparams,
    pub walkforward: WalkForwardDates,
    pub evaluation: EvaluationConfig,
    pub betting: BettingConfig,
}

impl Default for Config {
    fn default() -> Self {
        Config {
            seed: 42,
            data: DataConfig::default(),
            graph: GraphParams::default(),
            model: MagnetHyperparams::default(),
            walkforward: WalkForwardDates::default(),
            evaluation: EvaluationConfig::default(),
            betting: BettingConfig::default(),
        }
    }
}

impl Config {
    pub fn from_toml_str(s: &str) -> Result<Self> {
        toml::from_str(s).map_err(|e| Error::Config(e.to_string()))
    }

    /// Reads and validates a config file, then applies the data-directory
    /// environment override.
    pub fn load(path: &Path) -> Result<Self> {
        if !path.is_file() {
            return Err(Error::MissingFile(path.to_path_buf()));
        }
        let mut c = Self::from_toml_str(&std::fs::read_to_string(path)?)?;
        c.apply_env_override(std::env::var_os(DATA_DIR_ENV).map(PathBuf::from));
        c.validate()?;
        Ok(c)
    }

    pub fn apply_env_override(&mut self, dir: Option<PathBuf>) {
        if let Some(d) = dir.filter(|d| !d.as_os_str().is_empty()) {
            self.data.dir = d;
        }
    }

    pub fn to_toml(&self) -> String {
        toml::to_string_pretty(self).expect("config always serialises")
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.betting.gamma >= 0.0) {
            return Err(Error::Config("betting.gamma must be non-negative".into()));
        }
        if self.evaluation.bootstrap_resamples == 0 {
            return Err(Error::Config("evaluation.bootstrap_resamples must be positive".into()));
        }
        if self.betting.trials == 0 {
            return Err(Error::Config("betting.trials must be positive".into()));
        }
        self.walk_forward(Tour::Men).validate()
    }

    pub fn walk_forward(&self, tour: Tour) -> WalkForwardConfig {
        let w = &self.walkforward;
        WalkForwardConfig {
            tour,
            history_start: w.history_start,
            validation: DateRange {
                start: w.validation_start,
                end: w.validation_end,
            },
            test: DateRange {
                start: w.test_start,
                end: w.test_end,
            },
            train_fraction: w.train_fraction,
            seed: self.seed,
            graph: self.graph.clone(),
            model: self.model.clone(),
            checkpoint_dir: None,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_defaults() {
        assert_eq!(Config::from_toml_str("").unwrap(), Config::default());
    }

    #[test]
    fn round_trip() {
        let mut c = Config::default();
        c.model.hidden = 8;
        c.betting.gamma = 0.0;
        c.data.names = Some("names.csv".into());
        assert_eq!(Config::from_toml_str(&c.to_toml()).unwrap(), c);
    }

    #[test]
    fn partial_sections() {
        let c = Config::from_toml_str(
            "seed = 7\n[model]\nhidden = 16\n[graph.tier_prestige]\nt500 = 0.5\n[betting]\nstaking = \"unit\"\n",
        )
        .unwrap();
        assert_eq!(c.seed, 7);
        assert_eq!(c.model.hidden, 16);
        assert_eq!(c.model.order, MagnetHyperparams::default().order);
        assert_eq!(c.graph.tier_prestige.t500, 0.5);
        assert_eq!(c.graph.tier_prestige.grand_slam, 1.0);
        assert_eq!(c.betting.staking, Staking::Unit);
    }

    #[test]
    fn unknown_keys_rejected() {
        assert!(matches!(Config::from_toml_str("[model]\nhiden = 3\n"), Err(Error::Config(_))));
    }

    #[test]
    fn env_override_and_resolution() {
        let mut c = Config::default();
        c.apply_env_override(Some("/srv/tennis".into()));
        assert_eq!(c.data.results_dir(Tour::Women), PathBuf::from("/srv/tennis/women"));
        c.apply_env_override(Some(PathBuf::new()));
        assert_eq!(c.data.dir, PathBuf::from("/srv/tennis"));
        c.data.men_players = "/abs/p.csv".into();
        assert_eq!(c.data.players_file(Tour::Men), PathBuf::from("/abs/p.csv"));
    }

    #[test]
    fn missing_file() {
        assert!(matches!(Config::load(Path::new("/nonexistent/x.toml")), Err(Error::MissingFile(_))));
    }
}
