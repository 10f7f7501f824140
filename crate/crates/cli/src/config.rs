//! Train settings resolved from flags and an optional TOML file.
//!
//! Every field may come from either source; the file wins when both set it.

use std::path::Path;

use nsft::model::{Lambdas, ModelConfig};
use nsft::tensor::SplitRatios;
use nsft::training::{GradientMode, TrainConfig, UpdateScheme};
use serde::{Deserialize, Serialize};

use crate::CliError;

#[derive(Debug, Clone, Default, Deserialize, Serialize, PartialEq)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub dims: Option<[usize; 3]>,
    pub ratios: Option<String>,
    pub rank: Option<usize>,
    pub arm_width: Option<usize>,
    pub lambda_a: Option<f64>,
    pub lambda_b: Option<f64>,
    pub lambda_c: Option<f64>,
    pub max_epochs: Option<usize>,
    pub tol: Option<f64>,
    pub seed_split: Option<u64>,
    pub seed_init: Option<u64>,
    pub seed_shuffle: Option<u64>,
    pub gradient_mode: Option<GradientMode>,
    pub scheme: Option<UpdateScheme>,
    pub use_bias: Option<bool>,
    pub init_range: Option<[f64; 2]>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::config(format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::config(format!("{}: {e}", path.display())))
    }

    /// Fills every unset field from `flags`.
    pub fn or(self, flags: FileConfig) -> FileConfig {
        FileConfig {
            dims: self.dims.or(flags.dims),
            ratios: self.ratios.or(flags.ratios),
            rank: self.rank.or(flags.rank),
            arm_width: self.arm_width.or(flags.arm_width),
            lambda_a: self.lambda_a.or(flags.lambda_a),
            lambda_b: self.lambda_b.or(flags.lambda_b),
            lambda_c: self.lambda_c.or(flags.lambda_c),
            max_epochs: self.max_epochs.or(flags.max_epochs),
            tol: self.tol.or(flags.tol),
            seed_split: self.seed_split.or(flags.seed_split),
            seed_init: self.seed_init.or(flags.seed_init),
            seed_shuffle: self.seed_shuffle.or(flags.seed_shuffle),
            gradient_mode: self.gradient_mode.or(flags.gradient_mode),
            scheme: self.scheme.or(flags.scheme),
            use_bias: self.use_bias.or(flags.use_bias),
            init_range: self.init_range.or(flags.init_range),
        }
    }
}

pub const DEFAULT_RATIOS: &str = "2:2:6";
pub const DEFAULT_LAMBDA: f64 = 1e-4;

/// Fully resolved training run; echoed into the report header.
#[derive(Debug, Clone, Serialize)]
pub struct RunConfig {
    pub dims: Option<[usize; 3]>,
    pub ratios: String,
    pub rank: usize,
    pub arm_width: usize,
    pub lambda_a: f64,
    pub lambda_b: f64,
    pub lambda_c: f64,
    pub max_epochs: usize,
    pub tol: f64,
    pub seed_split: u64,
    pub seed_init: u64,
    pub seed_shuffle: u64,
    pub gradient_mode: GradientMode,
    pub scheme: UpdateScheme,
    pub use_bias: bool,
    pub init_range: [f64; 2],
}

impl RunConfig {
    pub fn resolve(c: FileConfig) -> Self {
        let train = TrainConfig::default();
        let model = ModelConfig::default();
        RunConfig {
            dims: c.dims,
            ratios: c.ratios.unwrap_or_else(|| DEFAULT_RATIOS.to_owned()),
            rank: c.rank.unwrap_or(model.rank),
            arm_width: c.arm_width.unwrap_or(model.arm_width),
            lambda_a: c.lambda_a.unwrap_or(DEFAULT_LAMBDA),
            lambda_b: c.lambda_b.unwrap_or(DEFAULT_LAMBDA),
            lambda_c: c.lambda_c.unwrap_or(DEFAULT_LAMBDA),
            max_epochs: c.max_epochs.unwrap_or(train.max_epochs),
            tol: c.tol.unwrap_or(train.tol),
            seed_split: c.seed_split.unwrap_or(0),
            seed_init: c.seed_init.unwrap_or(1),
            seed_shuffle: c.seed_shuffle.unwrap_or(2),
            gradient_mode: c.gradient_mode.unwrap_or(train.gradient_mode),
            scheme: c.scheme.unwrap_or(train.scheme),
            use_bias: c.use_bias.unwrap_or(model.use_bias),
            init_range: c.init_range.unwrap_or([model.init_low, model.init_high]),
        }
    }

    pub fn ratios(&self) -> Result<SplitRatios, CliError> {
        Ok(SplitRatios::parse(&self.ratios)?)
    }

    pub fn model_config(&self) -> ModelConfig {
        ModelConfig {
            rank: self.rank,
            arm_width: self.arm_width,
            lambdas: Lambdas {
                core: self.lambda_a,
                factor: self.lambda_b,
                bias: self.lambda_c,
            },
            use_bias: self.use_bias,
            init_low: self.init_range[0],
            init_high: self.init_range[1],
        }
    }

    pub fn train_config(&self) -> TrainConfig {
        TrainConfig {
            max_epochs: self.max_epochs,
            tol: self.tol,
            shuffle_seed: self.seed_shuffle,
            gradient_mode: self.gradient_mode,
            scheme: self.scheme,
            ..TrainConfig::default()
        }
    }
}
