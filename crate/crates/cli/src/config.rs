//! Effective run configuration: built-in defaults, then a TOML config file,
//! then command-line flags.

use std::path::{Path, PathBuf};

use emovox::dsp::{FeatureConfig, FeatureExtractor};
use emovox::model::FcnConfig;
use emovox::train::TrainConfig;
use serde::{Deserialize, Serialize};

use crate::CliError;

pub const SEED_ENV: &str = "EMOVOX_SEED";
pub const EFFECTIVE_CONFIG: &str = "effective_config.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub seed: u64,
    /// Worker threads; 0 means one per core.
    pub threads: usize,
    pub out: PathBuf,
    /// Reuse extracted features across runs via `<out>/cache`.
    pub cache: bool,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            seed: 0,
            threads: 0,
            out: PathBuf::from("emovox-out"),
            cache: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CrossvalSection {
    pub folds: usize,
    pub ratio: f64,
    pub stratified: bool,
}

impl Default for CrossvalSection {
    fn default() -> Self {
        Self {
            folds: 5,
            ratio: 0.8,
            stratified: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct StreamSection {
    pub cadence_s: f64,
    /// Shortest segment worth predicting; raised to the model minimum.
    pub min_duration_s: f64,
}

impl Default for StreamSection {
    fn default() -> Self {
        Self {
            cadence_s: 1.0,
            min_duration_s: 0.1,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CliConfig {
    pub run: RunSection,
    pub features: FeatureConfig,
    pub train: TrainConfig,
    pub crossval: CrossvalSection,
    pub stream: StreamSection,
}

impl CliConfig {
    /// Defaults overlaid with `path`, if given. The seed falls back to
    /// `EMOVOX_SEED` when the file does not set one.
    pub fn load(path: Option<&Path>) -> Result<Self, CliError> {
        let (mut cfg, file_sets_seed) = match path {
            None => (CliConfig::default(), false),
            Some(p) => {
                let text = std::fs::read_to_string(p)
                    .map_err(|e| CliError::Usage(format!("--config {}: {e}", p.display())))?;
                let cfg: CliConfig = toml::from_str(&text)
                    .map_err(|e| CliError::Usage(format!("--config {}: {e}", p.display())))?;
                let raw: toml::Table = toml::from_str(&text).expect("parsed above");
                let sets_seed = raw
                    .get("run")
                    .and_then(|r| r.as_table())
                    .is_some_and(|r| r.contains_key("seed"));
                (cfg, sets_seed)
            }
        };
        if !file_sets_seed {
            if let Ok(v) = std::env::var(SEED_ENV) {
                cfg.run.seed = v
                    .trim()
                    .parse()
                    .map_err(|_| CliError::Usage(format!("{SEED_ENV}={v} is not an unsigned integer")))?;
            }
        }
        Ok(cfg)
    }

    /// Checks every section against its module's rules.
    pub fn validate(&mut self) -> Result<(), CliError> {
        let usage = |m: String| Err(CliError::Usage(m));
        self.train.descriptor = self.features.descriptor;
        self.train.seed = self.run.seed;
        if self.run.seed > i64::MAX as u64 {
            return usage(format!("seed {} exceeds {}", self.run.seed, i64::MAX));
        }
        if let Err(e) = FeatureExtractor::new(self.features) {
            return usage(format!("[features] {e}"));
        }
        if let Err(e) = self.train.validate() {
            return usage(format!("[train] {e}"));
        }
        let cv = &self.crossval;
        if cv.folds == 0 || !(cv.ratio > 0.0 && cv.ratio < 1.0) {
            return usage("[crossval] need folds >= 1 and 0 < ratio < 1".into());
        }
        let st = &self.stream;
        if !(st.cadence_s > 0.0 && st.cadence_s.is_finite() && st.min_duration_s > 0.0) {
            return usage("[stream] cadence_s and min_duration_s must be positive".into());
        }
        Ok(())
    }

    pub fn feature_bins(&self) -> usize {
        match self.features.descriptor {
            emovox::dsp::Descriptor::Mfcc => self.features.n_mfcc,
            _ => self.features.mel.n_mels,
        }
    }

    /// Model architecture for `n_classes`, checked against the feature
    /// height.
    pub fn model_config(&self, n_classes: usize) -> Result<FcnConfig, CliError> {
        let cfg = FcnConfig::new(n_classes);
        let (min_h, _) = cfg.min_input_shape();
        if self.feature_bins() < min_h {
            return Err(CliError::Usage(format!(
                "[features] {} bins is below the model minimum of {min_h}",
                self.feature_bins()
            )));
        }
        Ok(cfg)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config is representable in TOML")
    }

    pub fn write_effective(&self, dir: &Path) -> Result<(), CliError> {
        std::fs::create_dir_all(dir).map_err(CliError::io)?;
        std::fs::write(dir.join(EFFECTIVE_CONFIG), self.to_toml()).map_err(CliError::io)
    }
}
