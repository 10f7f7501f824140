//! MAE / RMSE over an evaluation set.
//!
//! Sums are exactly rounded (see [`crate::sum`]), so the metrics do not
//! depend on entry order or on how the work is split across threads.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::NsftModel;
use crate::par::{self, Execution};
use crate::sum::ExactSum;
use crate::tensor::SparseTensor;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalResult {
    pub mae: f64,
    pub rmse: f64,
    pub count: usize,
}

#[derive(Debug, Clone, Default)]
struct ResidualSums {
    abs: ExactSum,
    sq: ExactSum,
}

impl ResidualSums {
    fn push(&mut self, residual: f64) {
        self.abs.add(residual.abs());
        self.sq.add(residual * residual);
    }

    fn merge(&mut self, other: &ResidualSums) {
        self.abs.merge(&other.abs);
        self.sq.merge(&other.sq);
    }

    fn finish(&self, count: usize) -> Result<EvalResult> {
        if count == 0 {
            return Err(Error::EmptyTensor);
        }
        let n = count as f64;
        Ok(EvalResult {
            mae: self.abs.value() / n,
            rmse: (self.sq.value() / n).sqrt(),
            count,
        })
    }
}

/// Metrics of a plain residual list.
pub fn from_residuals(residuals: &[f64]) -> Result<EvalResult> {
    let mut sums = ResidualSums::default();
    residuals.iter().for_each(|&r| sums.push(r));
    sums.finish(residuals.len())
}

/// Metrics of `model` on exactly the entries of `set`.
pub fn evaluate(model: &NsftModel, set: &SparseTensor) -> Result<EvalResult> {
    evaluate_with(model, set, Execution::default())
}

pub fn evaluate_with(model: &NsftModel, set: &SparseTensor, exec: Execution) -> Result<EvalResult> {
    if set.is_empty() {
        return Err(Error::EmptyTensor);
    }
    if set.dims() != model.dims() {
        return Err(Error::DimensionMismatch {
            model: model.dims(),
            data: set.dims(),
        });
    }
    let partials = par::map_chunks(set.entries(), exec, |chunk| {
        let mut sums = ResidualSums::default();
        for obs in chunk {
            sums.push(obs.value - model.predict_unchecked(obs.index));
        }
        sums
    });
    let mut total = ResidualSums::default();
    partials.iter().for_each(|p| total.merge(p));
    total.finish(set.len())
}
