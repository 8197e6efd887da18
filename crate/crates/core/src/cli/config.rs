use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::market::{self, SynthKind, SynthSpec};
use crate::mgtn::AgentSpec;
use crate::rl::TrainConfig;

use super::CliError;

/// Where prices come from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "source", rename_all = "kebab-case", deny_unknown_fields)]
pub enum DataSource {
    Csv {
        path: PathBuf,
        #[serde(default = "default_max_fill")]
        max_fill_fraction: f64,
    },
    Synthetic {
        kind: SynthKind,
        length: usize,
        /// Defaults to the run seed.
        #[serde(default, skip_serializing_if = "Option::is_none")]
        seed: Option<u64>,
        #[serde(default)]
        noise: f64,
        #[serde(default = "default_magnitude")]
        magnitude: f64,
    },
}

fn default_max_fill() -> f64 {
    market::DEFAULT_MAX_FILL_FRACTION
}

fn default_magnitude() -> f64 {
    0.001
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ExtractorKind {
    /// Shift filters from the time and carry graphs.
    #[default]
    Fmgtn,
    /// The same network with both graphs empty, so the extractor is a plain
    /// feature transform.
    Ttnn,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ModelConfig {
    pub extractor: ExtractorKind,
    pub hidden_features: usize,
    pub dense_out_modes: Vec<usize>,
    pub tt_ranks: Vec<usize>,
    /// Divide carry weights by their maximum.
    pub carry_rescale: bool,
    /// Symmetrically normalize the carry graph; fails on isolated currencies.
    pub normalize_carry: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        let spec = AgentSpec::default();
        Self {
            extractor: ExtractorKind::Fmgtn,
            hidden_features: spec.hidden_features,
            dense_out_modes: spec.dense_out_modes,
            tt_ranks: spec.tt_ranks,
            carry_rescale: false,
            normalize_carry: false,
        }
    }
}

/// One run, as a single TOML document. Relative paths resolve against the
/// directory of the file they were read from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub output_dir: PathBuf,
    pub data: DataSource,
    /// Pair codes, one per currency-mode slot.
    #[serde(default = "market::default_symbols")]
    pub symbols: Vec<String>,
    /// Graph vertex of each slot, aligned with `symbols`.
    #[serde(default = "market::default_currencies")]
    pub currencies: Vec<String>,
    pub target: String,
    /// Spot/forward table for the carry graph; without it the graph is empty.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub carry_table: Option<PathBuf>,
    #[serde(default = "default_lags")]
    pub lags: usize,
    #[serde(default = "default_train_fraction")]
    pub train_fraction: f64,
    /// Write a checkpoint every this many episodes; 0 disables.
    #[serde(default = "default_checkpoint_every")]
    pub checkpoint_every: usize,
    #[serde(default)]
    pub model: ModelConfig,
    #[serde(default)]
    pub train: TrainConfig,
}

fn default_lags() -> usize {
    30
}

fn default_train_fraction() -> f64 {
    7.0 / 9.0
}

fn default_checkpoint_every() -> usize {
    5
}

/// What the `[run]` table of a manifest records besides the config.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunInfo {
    pub version: String,
    pub command: String,
    #[serde(default)]
    pub overrides: Overrides,
}

/// Scalar fields that command-line flags may replace.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Overrides {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_dir: Option<PathBuf>,
}

/// `manifest.toml`: the resolved config plus how the run was launched.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub run: RunInfo,
    pub config: RunConfig,
}

impl Manifest {
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("manifest serializes")
    }
}

fn field_error(field: &str, message: impl Into<String>) -> CliError {
    CliError::Validation {
        field: field.to_string(),
        message: message.into(),
    }
}

fn resolve(base: &Path, p: &Path) -> PathBuf {
    if p.is_absolute() {
        p.to_path_buf()
    } else {
        base.join(p)
    }
}

impl RunConfig {
    /// Parses a plain config or a manifest (its `[config]` table).
    pub fn parse(text: &str, base_dir: &Path) -> Result<Self, CliError> {
        let value: toml::Table = toml::from_str(text).map_err(|e| field_error("config", e.to_string()))?;
        let mut config: RunConfig = if value.contains_key("run") && value.contains_key("config") {
            let m: Manifest = toml::from_str(text).map_err(|e| field_error("manifest", e.to_string()))?;
            m.config
        } else {
            toml::from_str(text).map_err(|e| field_error("config", e.to_string()))?
        };
        config.resolve_paths(base_dir);
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text =
            std::fs::read_to_string(path).map_err(|e| field_error("--config", format!("{}: {e}", path.display())))?;
        let base = match path.parent() {
            Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
            _ => PathBuf::from("."),
        };
        Self::parse(&text, &base)
    }

    fn resolve_paths(&mut self, base: &Path) {
        let base = std::path::absolute(base).unwrap_or_else(|_| base.to_path_buf());
        self.output_dir = resolve(&base, &self.output_dir);
        if let DataSource::Csv { path, .. } = &mut self.data {
            *path = resolve(&base, path);
        }
        if let Some(p) = &mut self.carry_table {
            *p = resolve(&base, p);
        }
    }

    pub fn apply(&mut self, overrides: &Overrides) {
        if let Some(s) = overrides.seed {
            self.seed = s;
        }
        if let Some(o) = &overrides.output_dir {
            self.output_dir = std::path::absolute(o).unwrap_or_else(|_| o.clone());
        }
    }

    pub fn agent_spec(&self) -> AgentSpec {
        AgentSpec {
            input_features: market::FEATURES,
            hidden_features: self.model.hidden_features,
            lags: self.lags,
            nodes: self.symbols.len(),
            dense_out_modes: self.model.dense_out_modes.clone(),
            tt_ranks: self.model.tt_ranks.clone(),
        }
    }

    /// The trainer's settings; every seed derives from `self.seed`.
    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            seed: self.seed,
            ..self.train.clone()
        }
    }

    pub fn synth_spec(&self) -> Option<SynthSpec> {
        match &self.data {
            DataSource::Synthetic {
                kind,
                length,
                seed,
                noise,
                magnitude,
            } => Some(SynthSpec {
                kind: *kind,
                length: *length,
                seed: seed.unwrap_or(self.seed),
                noise: *noise,
                magnitude: *magnitude,
                symbols: Some(self.symbols.clone()),
                ..SynthSpec::default()
            }),
            DataSource::Csv { .. } => None,
        }
    }

    /// Field-level checks that need no data.
    pub fn validate(&self) -> Result<(), CliError> {
        if self.symbols.is_empty() {
            return Err(field_error("symbols", "at least one pair is required"));
        }
        if let Some(s) = self.symbols.iter().find(|s| s.len() != 6 || !s.is_ascii()) {
            return Err(field_error("symbols", format!("{s:?} is not a 6-letter pair code")));
        }
        if self.currencies.len() != self.symbols.len() {
            return Err(field_error(
                "currencies",
                format!(
                    "{} currencies for {} symbols; one per symbol",
                    self.currencies.len(),
                    self.symbols.len()
                ),
            ));
        }
        if !self.symbols.contains(&self.target) {
            return Err(field_error(
                "target",
                format!("{} is not one of the symbols", self.target),
            ));
        }
        if let Some(p) = &self.carry_table {
            if !p.is_file() {
                return Err(field_error("carry_table", format!("{} does not exist", p.display())));
            }
        }
        match &self.data {
            DataSource::Csv {
                path,
                max_fill_fraction,
            } => {
                if !path.is_file() {
                    return Err(field_error("data.path", format!("{} does not exist", path.display())));
                }
                if !(0.0..=1.0).contains(max_fill_fraction) {
                    return Err(field_error("data.max_fill_fraction", "must lie in [0, 1]"));
                }
            }
            DataSource::Synthetic { .. } => {
                self.synth_spec()
                    .expect("synthetic")
                    .validate()
                    .map_err(|e| field_error("data", e.to_string()))?;
            }
        }
        if self.lags == 0 {
            return Err(field_error("lags", "must be positive"));
        }
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(field_error("train_fraction", "must lie in (0, 1)"));
        }
        self.agent_spec()
            .validate()
            .map_err(|e| field_error("model", e.to_string()))?;
        self.train_config()
            .validate()
            .map_err(|e| field_error("train", e.to_string()))?;
        if self.train.episodes == 0 {
            return Err(field_error("train.episodes", "must be positive"));
        }
        Ok(())
    }
}
