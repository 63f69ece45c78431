//! Run configuration: architecture presets, training settings, and flag
//! resolution.
//!
//! Defaults follow the shipped presets: `dbn1` is hidden layers
//! `[100, 80, 50, 5]` with learning rate 0.87, `dbn2` is `[80, 50, 5]` with
//! 0.90; both use 100 epochs, batch size 100, and momentum 0.05 for
//! pretraining and fine-tuning alike. Every value can be overridden by a
//! flag, and flags win.

use std::path::Path;
use std::str::FromStr;

use dbnwp_core::dataset::{ReleasePolicy, FEATURE_WIDTH};
use dbnwp_core::dbn::{DbnArchitecture, FineTuneConfig};
use dbnwp_core::rbm::CdConfig;

use crate::CliError;

/// Architecture choice: a named preset or `custom:<sizes>`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum ArchChoice {
    Dbn1,
    Dbn2,
    Custom(Vec<usize>),
}

impl ArchChoice {
    pub fn architecture(&self, input_dim: usize) -> Result<DbnArchitecture, CliError> {
        match self {
            ArchChoice::Dbn1 => Ok(DbnArchitecture::dbn1(input_dim)),
            ArchChoice::Dbn2 => Ok(DbnArchitecture::dbn2(input_dim)),
            ArchChoice::Custom(sizes) => DbnArchitecture::new(input_dim, sizes.clone())
                .map_err(|e| CliError::Usage(e.to_string())),
        }
    }

    /// Preset learning rate used when `--lr` is not given.
    pub fn default_learning_rate(&self) -> f64 {
        match self {
            ArchChoice::Dbn1 => 0.87,
            ArchChoice::Dbn2 | ArchChoice::Custom(_) => 0.90,
        }
    }
}

impl FromStr for ArchChoice {
    type Err = String;

    fn from_str(s: &str) -> Result<ArchChoice, String> {
        match s {
            "dbn1" => Ok(ArchChoice::Dbn1),
            "dbn2" => Ok(ArchChoice::Dbn2),
            other => {
                let Some(sizes) = other.strip_prefix("custom:") else {
                    return Err(format!(
                        "unknown architecture `{other}`; use dbn1, dbn2, or custom:<h1,h2,...>"
                    ));
                };
                let sizes: Vec<usize> = sizes
                    .split(',')
                    .map(|p| p.trim().parse().map_err(|e| format!("bad size `{p}`: {e}")))
                    .collect::<Result<_, _>>()?;
                if sizes.is_empty() {
                    return Err("custom architecture needs at least one hidden size".into());
                }
                Ok(ArchChoice::Custom(sizes))
            }
        }
    }
}

/// Shared training flags after resolution against the preset defaults.
#[derive(Debug, Clone)]
pub struct TrainingSettings {
    pub arch: DbnArchitecture,
    pub cd: CdConfig,
    pub ft: FineTuneConfig,
    pub seed: u64,
}

/// Raw training-related flags as they arrive from the command line.
#[derive(Debug, Clone, clap::Args)]
pub struct TrainingFlags {
    /// Architecture: dbn1, dbn2, or custom:<h1,h2,...>
    #[arg(long, default_value = "dbn1")]
    pub arch: ArchChoice,
    /// RNG seed for the whole run
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
    /// Epochs for pretraining and fine-tuning
    #[arg(long, default_value_t = 100)]
    pub epochs: usize,
    /// Mini-batch size for both phases
    #[arg(long, default_value_t = 100)]
    pub batch: usize,
    /// Learning rate for both phases (default: the preset's rate)
    #[arg(long)]
    pub lr: Option<f64>,
    /// Momentum for both phases
    #[arg(long, default_value_t = 0.05)]
    pub momentum: f64,
    /// Gibbs steps per contrastive-divergence sample
    #[arg(long, default_value_t = 1)]
    pub gibbs: usize,
}

impl TrainingFlags {
    pub fn resolve(&self, input_dim: usize) -> Result<TrainingSettings, CliError> {
        let arch = self.arch.architecture(input_dim)?;
        let learning_rate = self.lr.unwrap_or_else(|| self.arch.default_learning_rate());
        let cd = CdConfig {
            learning_rate,
            momentum: self.momentum,
            epochs: self.epochs,
            batch_size: self.batch,
            gibbs_steps: self.gibbs,
            final_hidden_as_probability: true,
        };
        let ft = FineTuneConfig {
            learning_rate,
            momentum: self.momentum,
            epochs: self.epochs,
            batch_size: self.batch,
        };
        cd.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        ft.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        Ok(TrainingSettings {
            arch,
            cd,
            ft,
            seed: self.seed,
        })
    }
}

pub fn parse_release_policy(s: &str) -> Result<ReleasePolicy, String> {
    match s {
        "strict" => Ok(ReleasePolicy::Strict),
        "latest" => Ok(ReleasePolicy::Latest),
        "average" => Ok(ReleasePolicy::Average),
        other => Err(format!(
            "unknown release policy `{other}`; use strict, latest, or average"
        )),
    }
}

/// Checks a data path up front so missing files fail as usage errors that
/// name the path.
pub fn require_readable(path: &Path) -> Result<(), CliError> {
    if !path.is_file() {
        return Err(CliError::Usage(format!(
            "data file not found: {}",
            path.display()
        )));
    }
    Ok(())
}

/// The expected feature width; models and data that disagree with it are
/// reported with both dimensions.
pub const INPUT_DIM: usize = FEATURE_WIDTH;

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn arch_choice_parses_presets_and_custom() {
        assert_eq!("dbn1".parse::<ArchChoice>().unwrap(), ArchChoice::Dbn1);
        assert_eq!("dbn2".parse::<ArchChoice>().unwrap(), ArchChoice::Dbn2);
        assert_eq!(
            "custom:12,6,3".parse::<ArchChoice>().unwrap(),
            ArchChoice::Custom(vec![12, 6, 3])
        );
        assert!("custom:".parse::<ArchChoice>().is_err());
        assert!("dbn3".parse::<ArchChoice>().is_err());
    }

    #[test]
    fn presets_resolve_to_documented_defaults() {
        let flags = TrainingFlags {
            arch: ArchChoice::Dbn1,
            seed: 1,
            epochs: 100,
            batch: 100,
            lr: None,
            momentum: 0.05,
            gibbs: 1,
        };
        let settings = flags.resolve(124).unwrap();
        assert_eq!(settings.arch.hidden_sizes, vec![100, 80, 50, 5]);
        assert_eq!(settings.cd.learning_rate, 0.87);
        assert_eq!(settings.ft.learning_rate, 0.87);
        assert_eq!(settings.cd.epochs, 100);
        assert_eq!(settings.cd.batch_size, 100);
        assert_eq!(settings.cd.momentum, 0.05);

        let flags = TrainingFlags {
            arch: ArchChoice::Dbn2,
            lr: None,
            ..flags
        };
        let settings = flags.resolve(124).unwrap();
        assert_eq!(settings.arch.hidden_sizes, vec![80, 50, 5]);
        assert_eq!(settings.cd.learning_rate, 0.90);
    }

    #[test]
    fn explicit_lr_wins_over_preset() {
        let flags = TrainingFlags {
            arch: ArchChoice::Dbn2,
            seed: 1,
            epochs: 10,
            batch: 10,
            lr: Some(0.25),
            momentum: 0.05,
            gibbs: 1,
        };
        let settings = flags.resolve(124).unwrap();
        assert_eq!(settings.cd.learning_rate, 0.25);
        assert_eq!(settings.ft.learning_rate, 0.25);
    }
}
