//! Non-negative snowflake factorization of sparse user × service × time
//! QoS tensors.
//!
//! The model predicts an entry as a Tucker contraction whose core is
//! restricted to a "snowflake" support (superdiagonal plus short arms along
//! each mode) plus per-user, per-service and per-slice biases. Parameters
//! are learned with non-negative multiplicative updates, one observation at
//! a time.
//!
//! ```no_run
//! use nsft::prelude::*;
//!
//! let dims = Dims::new(30, 25, 20)?;
//! let spec = SyntheticSpec::new(dims, 3, 1, 7);
//! let truth = generate_ground_truth(&spec)?;
//! let data = sample_observations(&truth, &spec)?;
//! let split = split(&data, SplitRatios::parse("2:2:6")?, 1)?;
//! let mut model = NsftModel::init(dims, &ModelConfig::default(), 2)?;
//! let report = train(&mut model, &split, &TrainConfig::default())?;
//! let test = evaluate(&model, &split.test)?;
//! # Ok::<(), nsft::Error>(())
//! ```

pub mod error;
pub mod io;
pub mod metrics;
pub mod model;
pub mod par;
pub mod sum;
pub mod synthetic;
pub mod tensor;
pub mod training;

pub use error::{Error, ErrorKind, Result};

pub mod prelude {
    pub use crate::error::{Error, Result};
    pub use crate::metrics::{evaluate, evaluate_with, EvalResult};
    pub use crate::model::{support, CoreIndex, Lambdas, ModelConfig, NsftModel};
    pub use crate::par::Execution;
    pub use crate::synthetic::{generate_ground_truth, sample_observations, SyntheticSpec};
    pub use crate::tensor::{
        density, parse_wsdream, split, DataSplit, Dims, EntryIndex, Observation, SparseTensor,
        SplitRatios,
    };
    pub use crate::training::{
        entry_gradients, slf_nmut_update, train, train_epoch, GradientMode, TrainConfig,
        TrainReport, UpdateScheme,
    };
}
