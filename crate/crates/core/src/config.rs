//! Run configuration: defaults, TOML overlay, and content hashing.
//!
//! Precedence is handled by the caller (command-line flags override the
//! file, the file overrides defaults). Every output file carries the hash
//! of the fully resolved configuration, so a run is reconstructible from
//! its manifest plus inputs.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{ColumnMap, LoadOptions};
use crate::error::{Error, Result};
use crate::likelihood::{PriorConfig, Scaling};
use crate::sampler::SamplerConfig;
use crate::simulate::SimTruth;

/// Problem size presets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum Scale {
    /// 50 subjects × 200 observations, 50 replicates, 3 × 2000/1000 chains.
    #[default]
    Desk,
    /// 150 subjects × 600 observations, 200 replicates, 3 × 8000/4000 chains.
    Paper,
}

/// Simulation-study settings; unset fields fall back to the scale preset.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StudySettings {
    /// Built-in truth: 1 (low measurement error) or 2 (high).
    pub setting: u8,
    pub scale: Scale,
    pub replicates: Option<usize>,
    pub n_subjects: Option<usize>,
    pub n_obs: Option<usize>,
    pub chains: Option<usize>,
    pub iterations: Option<usize>,
    pub burnin: Option<usize>,
    /// Fully custom truth; overrides `setting` when present.
    pub truth: Option<SimTruth>,
}

impl Default for StudySettings {
    fn default() -> Self {
        Self {
            setting: 1,
            scale: Scale::Desk,
            replicates: None,
            n_subjects: None,
            n_obs: None,
            chains: None,
            iterations: None,
            burnin: None,
            truth: None,
        }
    }
}

/// Complete run configuration.
#[derive(Debug, Clone, Serialize, Deserialize, Default)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub data: LoadOptions,
    pub columns: ColumnMap,
    pub priors: PriorConfig,
    pub sampler: SamplerConfig,
    pub scaling: Scaling,
    pub study: StudySettings,
}

impl RunConfig {
    pub fn from_toml_path(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    /// Hex SHA-256 of the resolved configuration.
    pub fn hash(&self) -> String {
        use sha2::{Digest, Sha256};
        let json = serde_json::to_string(self).expect("config serializes");
        Sha256::digest(json.as_bytes())
            .iter()
            .map(|b| format!("{b:02x}"))
            .collect()
    }

    /// The generative truth for simulate/study commands.
    pub fn resolved_truth(&self) -> Result<SimTruth> {
        let mut truth = match &self.study.truth {
            Some(t) => t.clone(),
            None => SimTruth::setting(self.study.setting)?,
        };
        if self.study.scale == Scale::Desk && self.study.truth.is_none() {
            truth = truth.desk();
        }
        if let Some(n) = self.study.n_subjects {
            truth.n_subjects = n;
        }
        if let Some(n) = self.study.n_obs {
            truth.n_obs = n;
        }
        Ok(truth)
    }

    /// Replicate count for study commands.
    pub fn study_replicates(&self) -> usize {
        self.study.replicates.unwrap_or(match self.study.scale {
            Scale::Desk => 50,
            Scale::Paper => 200,
        })
    }

    /// Chain settings for study commands: the scale preset, with explicit
    /// study overrides on top. Seed and instrumentation come from the
    /// `[sampler]` section.
    pub fn study_sampler(&self) -> SamplerConfig {
        let (iterations, burnin) = match self.study.scale {
            Scale::Desk => (2000, 1000),
            Scale::Paper => (8000, 4000),
        };
        SamplerConfig {
            iterations: self.study.iterations.unwrap_or(iterations),
            burnin: self.study.burnin.unwrap_or(burnin),
            chains: self.study.chains.unwrap_or(3),
            collect_states: 0,
            monitor_subject_params: false,
            debug_checks: false,
            ..self.sampler.clone()
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_resolve_to_desk_setting1() {
        let cfg = RunConfig::default();
        let truth = cfg.resolved_truth().unwrap();
        assert_eq!(truth.n_subjects, 50);
        assert_eq!(truth.n_obs, 200);
        assert_eq!(truth.alpha, vec![0.3, -1.0, 0.5]);
        assert_eq!(cfg.study_replicates(), 50);
        let sampler = cfg.study_sampler();
        assert_eq!(sampler.iterations, 2000);
        assert_eq!(sampler.burnin, 1000);
    }

    #[test]
    fn toml_overlay_and_hash_stability() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(
            &path,
            "[study]\nsetting = 2\nscale = \"paper\"\nreplicates = 7\n\n[sampler]\nseed = 99\n",
        )
        .unwrap();
        let cfg = RunConfig::from_toml_path(&path).unwrap();
        assert_eq!(cfg.study.setting, 2);
        assert_eq!(cfg.study_replicates(), 7);
        assert_eq!(cfg.sampler.seed, 99);
        let truth = cfg.resolved_truth().unwrap();
        assert_eq!(truth.n_subjects, 150);
        assert_eq!(cfg.hash(), cfg.clone().hash());
        assert_ne!(cfg.hash(), RunConfig::default().hash());
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("cfg.toml");
        std::fs::write(&path, "[sampler]\nseeed = 3\n").unwrap();
        assert!(RunConfig::from_toml_path(&path).is_err());
    }
}
