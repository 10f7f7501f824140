//! Non-negative multiplicative training of an [`NsftModel`].
//!
//! Every observation triggers one multiplicative step on all parameters it
//! touches: the whole core, row `i` of the user factors, row `j` of the
//! service factors, row `k` of the time factors and the three biases. Each
//! step is gradient descent with a per-parameter learning rate chosen so the
//! negative part of the gradient cancels, which leaves
//!
//! ```text
//! x <- x * ((y * c) / (ŷ * c + λ * x + ε))
//! ```
//!
//! where `c` is the coefficient of `x` in the prediction. The prediction `ŷ`
//! is computed once from the pre-update state and shared by all blocks; the
//! blocks run in the order core diagonal, core arms, user row, service row,
//! time row, biases, each reading the values left by the blocks before it.

use std::fmt;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{self, EvalResult};
use crate::model::{ArmFamily, CoreIndex, CoreSlot, Direction, Mode, NsftModel};
use crate::par::{self, Execution};
use crate::sum::ExactSum;
use crate::tensor::{DataSplit, EntryIndex, Observation, SparseTensor};

/// Which factor coefficient the factor updates use.
///
/// `Paper` keeps only the arms of the parameter's own group in `β`. `Full`
/// also adds the arms of neighbouring groups that reach back into the
/// parameter's column, which makes `g_rrr·s_jr·t_kr + β` the exact partial
/// derivative of the prediction. The two coincide when `F = 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GradientMode {
    #[default]
    Paper,
    Full,
}

impl fmt::Display for GradientMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            GradientMode::Paper => "paper",
            GradientMode::Full => "full",
        })
    }
}

impl std::str::FromStr for GradientMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "paper" => Ok(GradientMode::Paper),
            "full" => Ok(GradientMode::Full),
            other => Err(Error::InvalidTrainConfig(format!(
                "gradient mode `{other}` is not one of paper, full"
            ))),
        }
    }
}

/// How an epoch applies the multiplicative rule.
///
/// `Stochastic` applies it once per observation in shuffled order.
/// `Batch` sums the numerator and denominator of each parameter's rule over
/// all of its training observations and updates block by block (core,
/// user, service, time, biases), refreshing predictions between blocks.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum UpdateScheme {
    Stochastic,
    #[default]
    Batch,
}

impl fmt::Display for UpdateScheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            UpdateScheme::Stochastic => "stochastic",
            UpdateScheme::Batch => "batch",
        })
    }
}

impl std::str::FromStr for UpdateScheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "stochastic" => Ok(UpdateScheme::Stochastic),
            "batch" => Ok(UpdateScheme::Batch),
            other => Err(Error::InvalidTrainConfig(format!(
                "update scheme `{other}` is not one of stochastic, batch"
            ))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub max_epochs: usize,
    /// Stop once successive validation RMSEs differ by less than this.
    pub tol: f64,
    pub shuffle_seed: u64,
    pub gradient_mode: GradientMode,
    /// Added to every update denominator to avoid `0/0`.
    pub epsilon_denom: f64,
    pub scheme: UpdateScheme,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            max_epochs: 500,
            tol: 1e-5,
            shuffle_seed: 0,
            gradient_mode: GradientMode::Paper,
            epsilon_denom: 1e-12,
            scheme: UpdateScheme::Batch,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if self.max_epochs < 1 {
            return Err(Error::InvalidTrainConfig("max_epochs must be >= 1".into()));
        }
        if !(self.tol.is_finite() && self.tol >= 0.0) {
            return Err(Error::InvalidTrainConfig(format!(
                "tol = {} must be >= 0",
                self.tol
            )));
        }
        if !(self.epsilon_denom.is_finite() && self.epsilon_denom > 0.0) {
            return Err(Error::InvalidTrainConfig(format!(
                "epsilon_denom = {} must be > 0",
                self.epsilon_denom
            )));
        }
        Ok(())
    }
}

/// The other two modes of `mode`, in tensor order.
fn others(mode: Mode) -> (Mode, Mode) {
    match mode {
        Mode::User => (Mode::Service, Mode::Time),
        Mode::Service => (Mode::User, Mode::Time),
        Mode::Time => (Mode::User, Mode::Service),
    }
}

const fn fam(mode: Mode, direction: Direction) -> ArmFamily {
    ArmFamily { mode, direction }
}

/// Arm contribution to the coefficient of the `mode` factor at column `r`
/// (1-based). `a` and `b` are the factor rows of the other two modes.
fn beta(model: &NsftModel, mode: Mode, r: usize, a: &[f64], b: &[f64], gm: GradientMode) -> f64 {
    let core = &model.core;
    let rank = core.rank();
    let (ma, mb) = others(mode);
    let c = r - 1;
    let mut acc = 0.0;
    for f in 1..=core.effective_width() {
        let up = r + f <= rank;
        let down = f < r;
        if up {
            let e = c + f;
            acc += core.arm(r, f, fam(ma, Direction::Up)) * a[e] * b[c];
            acc += core.arm(r, f, fam(mb, Direction::Up)) * a[c] * b[e];
        }
        if down {
            let d = c - f;
            acc += core.arm(r, f, fam(ma, Direction::Down)) * a[d] * b[c];
            acc += core.arm(r, f, fam(mb, Direction::Down)) * a[c] * b[d];
        }
        if gm == GradientMode::Full {
            if up {
                let e = c + f;
                acc += core.arm(r + f, f, fam(mode, Direction::Down)) * a[e] * b[e];
            }
            if down {
                let d = c - f;
                acc += core.arm(r - f, f, fam(mode, Direction::Up)) * a[d] * b[d];
            }
        }
    }
    acc
}

fn check_rank_index(model: &NsftModel, index: EntryIndex, r: usize) -> Result<()> {
    model.check_index(index)?;
    if r < 1 || r > model.rank() {
        return Err(Error::InvalidModel(format!(
            "rank index {r} outside 1..={}",
            model.rank()
        )));
    }
    Ok(())
}

/// `β` for the user factor `u_ir`.
pub fn beta_user(
    model: &NsftModel,
    index: EntryIndex,
    r: usize,
    mode: GradientMode,
) -> Result<f64> {
    check_rank_index(model, index, r)?;
    let (_, s, t) = model.rows(index);
    Ok(beta(model, Mode::User, r, s, t, mode))
}

/// `β` for the service factor `s_jr`.
pub fn beta_service(
    model: &NsftModel,
    index: EntryIndex,
    r: usize,
    mode: GradientMode,
) -> Result<f64> {
    check_rank_index(model, index, r)?;
    let (u, _, t) = model.rows(index);
    Ok(beta(model, Mode::Service, r, u, t, mode))
}

/// `β` for the time factor `t_kr`.
pub fn beta_time(
    model: &NsftModel,
    index: EntryIndex,
    r: usize,
    mode: GradientMode,
) -> Result<f64> {
    check_rank_index(model, index, r)?;
    let (u, s, _) = model.rows(index);
    Ok(beta(model, Mode::Time, r, u, s, mode))
}

fn slot_coordinate(slot: CoreSlot, rank: usize) -> CoreIndex {
    match slot {
        CoreSlot::Diagonal { r } => CoreIndex::new(r, r, r),
        CoreSlot::Arm { r, f, family } => family.index(r, f, rank).expect("slot in range"),
    }
}

/// Product of the three factor entries multiplying the core element at `slot`.
#[inline]
fn core_coefficient(slot: CoreSlot, u: &[f64], s: &[f64], t: &[f64], rank: usize) -> f64 {
    let CoreIndex { p, q, r } = slot_coordinate(slot, rank);
    u[p - 1] * s[q - 1] * t[r - 1]
}

/// Coefficient of factor `mode` at column `r`: `g_rrr·a_r·b_r + β`.
#[inline]
fn factor_coefficient(
    model: &NsftModel,
    mode: Mode,
    r: usize,
    a: &[f64],
    b: &[f64],
    gm: GradientMode,
) -> f64 {
    model.core.diagonal(r) * a[r - 1] * b[r - 1] + beta(model, mode, r, a, b, gm)
}

/// Gradients of the instance objective for one observation, halved (the
/// common factor 2 of every component is dropped).
#[derive(Debug, Clone, PartialEq)]
pub struct EntryGradients {
    pub prediction: f64,
    /// `y - ŷ`.
    pub theta: f64,
    /// One entry per core support element, in canonical order.
    pub core: Vec<(CoreIndex, f64)>,
    pub user: Vec<f64>,
    pub service: Vec<f64>,
    pub time: Vec<f64>,
    /// `(a_i, b_j, c_k)`; all zero when the model has no bias.
    pub bias: [f64; 3],
}

impl EntryGradients {
    pub fn is_finite(&self) -> bool {
        self.prediction.is_finite()
            && self.core.iter().all(|(_, g)| g.is_finite())
            && self
                .user
                .iter()
                .chain(&self.service)
                .chain(&self.time)
                .chain(&self.bias)
                .all(|g| g.is_finite())
    }
}

pub fn entry_gradients(
    model: &NsftModel,
    obs: &Observation,
    mode: GradientMode,
) -> Result<EntryGradients> {
    let yhat = model.predict(obs.index)?;
    let theta = obs.value - yhat;
    let l = model.lambdas;
    let rank = model.rank();
    let (u, s, t) = model.rows(obs.index);

    let core = model
        .core
        .slots()
        .map(|slot| {
            let g = model.core.slot_value(slot);
            (
                slot_coordinate(slot, rank),
                -theta * core_coefficient(slot, u, s, t, rank) + l.core * g,
            )
        })
        .collect();
    let factor = |mode_: Mode, own: &[f64], a: &[f64], b: &[f64]| -> Vec<f64> {
        (1..=rank)
            .map(|r| {
                -theta * factor_coefficient(model, mode_, r, a, b, mode) + l.factor * own[r - 1]
            })
            .collect()
    };
    let bias = if model.use_bias {
        let (i, j, k) = (
            obs.index.i as usize,
            obs.index.j as usize,
            obs.index.k as usize,
        );
        [
            -theta + l.bias * model.biases.user[i],
            -theta + l.bias * model.biases.service[j],
            -theta + l.bias * model.biases.time[k],
        ]
    } else {
        [0.0; 3]
    };
    Ok(EntryGradients {
        prediction: yhat,
        theta,
        core,
        user: factor(Mode::User, u, s, t),
        service: factor(Mode::Service, s, u, t),
        time: factor(Mode::Time, t, u, s),
        bias,
    })
}

/// `x * ((y * c) / (ŷ * c + λ * x + ε))`. The ratio is formed first so
/// that `ŷ = y` with `λ = ε = 0` multiplies by exactly one.
#[inline]
pub fn multiplicative_step(x: f64, y: f64, yhat: f64, coef: f64, lambda: f64, eps: f64) -> f64 {
    x * ((y * coef) / (yhat * coef + lambda * x + eps))
}

#[derive(Debug)]
struct NonFinite;

fn apply_update(
    model: &mut NsftModel,
    obs: &Observation,
    config: &TrainConfig,
) -> std::result::Result<f64, NonFinite> {
    let y = obs.value;
    let yhat = model.predict_unchecked(obs.index);
    if !yhat.is_finite() {
        return Err(NonFinite);
    }
    let eps = config.epsilon_denom;
    let gm = config.gradient_mode;
    let l = model.lambdas;
    let rank = model.rank();
    let (i, j, k) = (
        obs.index.i as usize,
        obs.index.j as usize,
        obs.index.k as usize,
    );
    let finite = |v: f64| if v.is_finite() { Ok(v) } else { Err(NonFinite) };

    // The slot iterator visits diagonal and arms interleaved by group; the
    // diagonal pass comes first, then the arms.
    {
        let u = model.factors.user.row(i);
        let s = model.factors.service.row(j);
        let t = model.factors.time.row(k);
        for r in 1..=rank {
            let slot = CoreSlot::Diagonal { r };
            let coef = core_coefficient(slot, u, s, t, rank);
            let g = model.core.slot_value_mut(slot);
            *g = finite(multiplicative_step(*g, y, yhat, coef, l.core, eps))?;
        }
        let arms: Vec<CoreSlot> = model
            .core
            .slots()
            .filter(|s| matches!(s, CoreSlot::Arm { .. }))
            .collect();
        for slot in arms {
            let coef = core_coefficient(slot, u, s, t, rank);
            let g = model.core.slot_value_mut(slot);
            *g = finite(multiplicative_step(*g, y, yhat, coef, l.core, eps))?;
        }
    }

    for mode in [Mode::User, Mode::Service, Mode::Time] {
        let (own, a, b) = match mode {
            Mode::User => (i, model.factors.service.row(j), model.factors.time.row(k)),
            Mode::Service => (j, model.factors.user.row(i), model.factors.time.row(k)),
            Mode::Time => (k, model.factors.user.row(i), model.factors.service.row(j)),
        };
        let coefs: Vec<f64> = (1..=rank)
            .map(|r| factor_coefficient(model, mode, r, a, b, gm))
            .collect();
        let row = match mode {
            Mode::User => model.factors.user.row_mut(own),
            Mode::Service => model.factors.service.row_mut(own),
            Mode::Time => model.factors.time.row_mut(own),
        };
        for (x, coef) in row.iter_mut().zip(coefs) {
            *x = finite(multiplicative_step(*x, y, yhat, coef, l.factor, eps))?;
        }
    }

    if model.use_bias {
        for x in [
            &mut model.biases.user[i],
            &mut model.biases.service[j],
            &mut model.biases.time[k],
        ] {
            *x = finite(multiplicative_step(*x, y, yhat, 1.0, l.bias, eps))?;
        }
    }
    Ok(yhat)
}

/// Applies one multiplicative step for `obs` in place and returns the
/// pre-update prediction.
pub fn slf_nmut_update(
    model: &mut NsftModel,
    obs: &Observation,
    config: &TrainConfig,
) -> Result<f64> {
    model.check_index(obs.index)?;
    apply_update(model, obs, config).map_err(|_| Error::Divergence {
        epoch: 0,
        observation: 0,
        index: obs.index,
    })
}

/// Visiting order of the training entries for `epoch`.
pub fn epoch_order(len: usize, shuffle_seed: u64, epoch: usize) -> Vec<usize> {
    let mut order: Vec<usize> = (0..len).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(shuffle_seed);
    rng.set_stream(epoch as u64);
    order.shuffle(&mut rng);
    order
}

/// One pass over `train` using `config.scheme`. Returns the mean instance
/// objective: for `Stochastic` each term is measured just before its own
/// update, for `Batch` all terms are measured at the start of the epoch.
pub fn train_epoch(
    model: &mut NsftModel,
    train: &SparseTensor,
    epoch: usize,
    config: &TrainConfig,
) -> Result<f64> {
    train_epoch_with(model, train, epoch, config, Execution::default())
}

pub fn train_epoch_with(
    model: &mut NsftModel,
    train: &SparseTensor,
    epoch: usize,
    config: &TrainConfig,
    exec: Execution,
) -> Result<f64> {
    if train.is_empty() {
        return Err(Error::EmptyTensor);
    }
    if train.dims() != model.dims() {
        return Err(Error::DimensionMismatch {
            model: model.dims(),
            data: train.dims(),
        });
    }
    match config.scheme {
        UpdateScheme::Stochastic => stochastic_epoch(model, train, epoch, config),
        UpdateScheme::Batch => {
            batch_epoch(model, train, config, exec).map_err(|NonFinite| Error::Divergence {
                epoch,
                observation: 0,
                index: train.entries()[0].index,
            })
        }
    }
}

fn stochastic_epoch(
    model: &mut NsftModel,
    train: &SparseTensor,
    epoch: usize,
    config: &TrainConfig,
) -> Result<f64> {
    let entries = train.entries();
    let mut objective = ExactSum::new();
    for pos in epoch_order(entries.len(), config.shuffle_seed, epoch) {
        let obs = &entries[pos];
        let penalty = model.penalty(obs.index);
        let diverged = || Error::Divergence {
            epoch,
            observation: pos,
            index: obs.index,
        };
        let yhat = apply_update(model, obs, config).map_err(|_| diverged())?;
        let e = obs.value - yhat;
        let loss = e * e + penalty;
        if !loss.is_finite() {
            return Err(diverged());
        }
        objective.add(loss);
    }
    Ok(objective.value() / entries.len() as f64)
}

/// Per-parameter numerator and denominator sums over all entries, computed
/// over fixed chunks and merged in chunk order. `visit` returns a value to
/// be summed exactly alongside (used for the objective).
fn accumulate<F>(
    entries: &[Observation],
    exec: Execution,
    len: usize,
    visit: F,
) -> (Vec<f64>, Vec<f64>, f64)
where
    F: Fn(&Observation, &mut [f64], &mut [f64]) -> f64 + Sync + Send,
{
    let parts = par::map_chunks(entries, exec, |chunk| {
        let mut num = vec![0.0; len];
        let mut den = vec![0.0; len];
        let mut extra = ExactSum::new();
        for obs in chunk {
            extra.add(visit(obs, &mut num, &mut den));
        }
        (num, den, extra)
    });
    let mut num = vec![0.0; len];
    let mut den = vec![0.0; len];
    let mut extra = ExactSum::new();
    for (n, d, e) in &parts {
        num.iter_mut().zip(n).for_each(|(a, b)| *a += b);
        den.iter_mut().zip(d).for_each(|(a, b)| *a += b);
        extra.merge(e);
    }
    (num, den, extra.value())
}

/// `x * (num / (den + ε))`; parameters with no contributions are left alone.
#[inline]
fn aggregated_step(
    x: &mut f64,
    num: f64,
    den: f64,
    eps: f64,
) -> std::result::Result<(), NonFinite> {
    if num == 0.0 && den == 0.0 {
        return Ok(());
    }
    let v = *x * (num / (den + eps));
    if !v.is_finite() {
        return Err(NonFinite);
    }
    *x = v;
    Ok(())
}

fn batch_epoch(
    model: &mut NsftModel,
    train: &SparseTensor,
    config: &TrainConfig,
    exec: Execution,
) -> std::result::Result<f64, NonFinite> {
    let entries = train.entries();
    let eps = config.epsilon_denom;
    let gm = config.gradient_mode;
    let lam = model.lambdas;
    let rank = model.rank();

    // core block
    let slots: Vec<CoreSlot> = model.core.slots().collect();
    let coords: Vec<[usize; 3]> = slots
        .iter()
        .map(|&slot| {
            let c = slot_coordinate(slot, rank);
            [c.p - 1, c.q - 1, c.r - 1]
        })
        .collect();
    let (num, den, objective) = {
        let m = &*model;
        let values: Vec<f64> = slots.iter().map(|&s| m.core.slot_value(s)).collect();
        accumulate(entries, exec, slots.len(), |obs, num, den| {
            let yhat = m.predict_unchecked(obs.index);
            let (u, s, t) = m.rows(obs.index);
            for (n, (c, &g)) in coords.iter().zip(&values).enumerate() {
                let pi = u[c[0]] * s[c[1]] * t[c[2]];
                num[n] += obs.value * pi;
                den[n] += yhat * pi + lam.core * g;
            }
            let e = obs.value - yhat;
            e * e + m.penalty(obs.index)
        })
    };
    if !objective.is_finite() {
        return Err(NonFinite);
    }
    for (n, &slot) in slots.iter().enumerate() {
        aggregated_step(model.core.slot_value_mut(slot), num[n], den[n], eps)?;
    }

    for mode in [Mode::User, Mode::Service, Mode::Time] {
        let rows = match mode {
            Mode::User => model.factors.user.rows(),
            Mode::Service => model.factors.service.rows(),
            Mode::Time => model.factors.time.rows(),
        };
        let (num, den, _) = {
            let m = &*model;
            accumulate(entries, exec, rows * rank, |obs, num, den| {
                let yhat = m.predict_unchecked(obs.index);
                let (u, s, t) = m.rows(obs.index);
                let (own_row, own, a, b) = match mode {
                    Mode::User => (obs.index.i as usize, u, s, t),
                    Mode::Service => (obs.index.j as usize, s, u, t),
                    Mode::Time => (obs.index.k as usize, t, u, s),
                };
                let base = own_row * rank;
                for r in 1..=rank {
                    let coef = factor_coefficient(m, mode, r, a, b, gm);
                    num[base + r - 1] += obs.value * coef;
                    den[base + r - 1] += yhat * coef + lam.factor * own[r - 1];
                }
                0.0
            })
        };
        let data = match mode {
            Mode::User => model.factors.user.as_mut_slice(),
            Mode::Service => model.factors.service.as_mut_slice(),
            Mode::Time => model.factors.time.as_mut_slice(),
        };
        for (n, x) in data.iter_mut().enumerate() {
            aggregated_step(x, num[n], den[n], eps)?;
        }
    }

    if model.use_bias {
        let d = model.dims();
        let (off_s, off_t) = (d.users, d.users + d.services);
        let (num, den, _) = {
            let m = &*model;
            accumulate(entries, exec, off_t + d.slices, |obs, num, den| {
                let yhat = m.predict_unchecked(obs.index);
                let (i, j, k) = (
                    obs.index.i as usize,
                    obs.index.j as usize,
                    obs.index.k as usize,
                );
                for (slot, x) in [
                    (i, m.biases.user[i]),
                    (off_s + j, m.biases.service[j]),
                    (off_t + k, m.biases.time[k]),
                ] {
                    num[slot] += obs.value;
                    den[slot] += yhat + lam.bias * x;
                }
                0.0
            })
        };
        let b = &mut model.biases;
        for (n, x) in b
            .user
            .iter_mut()
            .chain(b.service.iter_mut())
            .chain(b.time.iter_mut())
            .enumerate()
        {
            aggregated_step(x, num[n], den[n], eps)?;
        }
    }
    Ok(objective / entries.len() as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_objective: f64,
    pub valid_mae: Option<f64>,
    pub valid_rmse: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Tolerance,
    MaxEpochs,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub epochs: Vec<EpochRecord>,
    pub converged_at: Option<usize>,
    pub stop_reason: StopReason,
}

impl TrainReport {
    pub fn last(&self) -> Option<&EpochRecord> {
        self.epochs.last()
    }
}

/// Runs epochs until the validation RMSE settles within `tol` or
/// `max_epochs` is reached. The model is left in its last-epoch state.
pub fn train(
    model: &mut NsftModel,
    split: &DataSplit,
    config: &TrainConfig,
) -> Result<TrainReport> {
    config.validate()?;
    if split.train.is_empty() {
        return Err(Error::EmptyTensor);
    }
    if config.tol > 0.0 && split.valid.is_empty() {
        return Err(Error::InvalidTrainConfig(
            "a positive tolerance needs a non-empty validation set".into(),
        ));
    }
    let mut epochs = Vec::new();
    let mut previous_rmse: Option<f64> = None;
    for epoch in 1..=config.max_epochs {
        let train_objective = train_epoch(model, &split.train, epoch, config)?;
        let valid: Option<EvalResult> = if split.valid.is_empty() {
            None
        } else {
            Some(metrics::evaluate(model, &split.valid)?)
        };
        epochs.push(EpochRecord {
            epoch,
            train_objective,
            valid_mae: valid.map(|v| v.mae),
            valid_rmse: valid.map(|v| v.rmse),
        });
        if let (Some(prev), Some(v)) = (previous_rmse, valid) {
            if (v.rmse - prev).abs() < config.tol {
                return Ok(TrainReport {
                    epochs,
                    converged_at: Some(epoch),
                    stop_reason: StopReason::Tolerance,
                });
            }
        }
        previous_rmse = valid.map(|v| v.rmse);
    }
    Ok(TrainReport {
        epochs,
        converged_at: None,
        stop_reason: StopReason::MaxEpochs,
    })
}
