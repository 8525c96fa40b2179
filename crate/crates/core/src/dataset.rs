//! Episode data and the versioned JSON file formats.

use std::fs;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::error::{FitError, Result};
use crate::model::{ModelConfig, RLParams, RewardSeries};
use crate::sim::EnvSpec;

pub const SCHEMA: &str = "banditfit/1";

/// Observed behavior of one session, with ground truth when simulated.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Episode {
    /// 0-based arm chosen at each trial.
    pub actions: Vec<usize>,
    /// `[signal][t][arm]`
    pub rewards: Vec<RewardSeries>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_params: Option<RLParams>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub true_x: Option<Vec<Vec<f64>>>,
}

impl Episode {
    pub fn n(&self) -> usize {
        self.actions.len()
    }

    pub fn k(&self) -> usize {
        self.rewards.len()
    }

    pub fn m(&self) -> usize {
        self.rewards.first().and_then(|s| s.first()).map_or(0, Vec::len)
    }

    /// Checks the episode against `cfg`.
    pub fn check(&self, cfg: &ModelConfig) -> Result<()> {
        cfg.check_actions(&self.actions)?;
        cfg.check_rewards(&self.rewards)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub schema: String,
    pub spec: EnvSpec,
    pub episodes: Vec<Episode>,
}

impl Dataset {
    pub fn new(spec: EnvSpec, episodes: Vec<Episode>) -> Self {
        Dataset { schema: SCHEMA.to_string(), spec, episodes }
    }

    pub fn read(path: &Path) -> Result<Self> {
        let ds: Dataset = read_json(path)?;
        check_schema(path, &ds.schema)?;
        for (e, ep) in ds.episodes.iter().enumerate() {
            if ep.k() == 0 || ep.rewards.iter().any(|s| s.len() != ep.n()) {
                return Err(FitError::Format {
                    path: path.to_path_buf(),
                    msg: format!("episode {e}: reward series do not match {} actions", ep.n()),
                });
            }
        }
        Ok(ds)
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        write_json(path, self)
    }
}

pub fn check_schema(path: &Path, schema: &str) -> Result<()> {
    if schema != SCHEMA {
        return Err(FitError::Format {
            path: path.to_path_buf(),
            msg: format!("unsupported schema {schema:?}, expected {SCHEMA:?}"),
        });
    }
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = fs::read_to_string(path).map_err(|source| FitError::Io { path: path.to_path_buf(), source })?;
    serde_json::from_str(&text).map_err(|e| FitError::Format { path: path.to_path_buf(), msg: e.to_string() })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string(value)
        .map_err(|e| FitError::Format { path: path.to_path_buf(), msg: e.to_string() })?;
    fs::write(path, text).map_err(|source| FitError::Io { path: path.to_path_buf(), source })
}
