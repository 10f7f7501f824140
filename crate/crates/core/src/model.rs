//! NSFT model state and the biased snowflake prediction.
//!
//! The core tensor is non-zero only on its superdiagonal `(r,r,r)` and on
//! "arms" that move exactly one of the three indices of a diagonal element
//! by `f = 1..=F` positions. Core algebra is 1-based; data indices are
//! 0-based and translated here.

use std::fmt;

use rand::distr::{Distribution, Uniform};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::tensor::{Dims, EntryIndex, Observation};

/// 1-based core coordinate `(p, q, r)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct CoreIndex {
    pub p: usize,
    pub q: usize,
    pub r: usize,
}

impl CoreIndex {
    pub const fn new(p: usize, q: usize, r: usize) -> Self {
        Self { p, q, r }
    }
}

impl fmt::Display for CoreIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.p, self.q, self.r)
    }
}

/// Tensor mode an arm displaces.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Mode {
    User,
    Service,
    Time,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Direction {
    Down,
    Up,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct ArmFamily {
    pub mode: Mode,
    pub direction: Direction,
}

/// The six arm families in accumulation order: the three `r-f`
/// displacements followed by the three `r+f` displacements.
pub const ARM_FAMILIES: [ArmFamily; 6] = [
    ArmFamily {
        mode: Mode::User,
        direction: Direction::Down,
    },
    ArmFamily {
        mode: Mode::Service,
        direction: Direction::Down,
    },
    ArmFamily {
        mode: Mode::Time,
        direction: Direction::Down,
    },
    ArmFamily {
        mode: Mode::User,
        direction: Direction::Up,
    },
    ArmFamily {
        mode: Mode::Service,
        direction: Direction::Up,
    },
    ArmFamily {
        mode: Mode::Time,
        direction: Direction::Up,
    },
];

impl ArmFamily {
    fn slot(self) -> usize {
        let m = match self.mode {
            Mode::User => 0,
            Mode::Service => 1,
            Mode::Time => 2,
        };
        match self.direction {
            Direction::Down => m,
            Direction::Up => m + 3,
        }
    }

    /// Core coordinate of the arm `f` of group `r`, if it lies in `1..=rank`.
    pub fn index(self, r: usize, f: usize, rank: usize) -> Option<CoreIndex> {
        let moved = match self.direction {
            Direction::Down => r.checked_sub(f).filter(|&x| x >= 1)?,
            Direction::Up => Some(r + f).filter(|&x| x <= rank)?,
        };
        Some(match self.mode {
            Mode::User => CoreIndex::new(moved, r, r),
            Mode::Service => CoreIndex::new(r, moved, r),
            Mode::Time => CoreIndex::new(r, r, moved),
        })
    }
}

/// Position of a core element inside the snowflake.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CoreSlot {
    Diagonal {
        r: usize,
    },
    Arm {
        r: usize,
        f: usize,
        family: ArmFamily,
    },
}

/// Support of the snowflake core in canonical order: for each group `r`
/// the diagonal element, then for each `f` the in-range arms in
/// [`ARM_FAMILIES`] order.
pub fn support(rank: usize, arm_width: usize) -> Result<Vec<CoreIndex>> {
    if rank < 1 {
        return Err(Error::InvalidModel("rank must be at least 1".into()));
    }
    Ok(slots(rank, arm_width).map(slot_index).collect())
}

/// Number of elements in the support with the given shape.
pub fn support_size(rank: usize, arm_width: usize) -> usize {
    (1..=rank)
        .map(|r| 1 + 3 * (arm_width.min(r - 1) + arm_width.min(rank - r)))
        .sum()
}

fn slots(rank: usize, arm_width: usize) -> impl Iterator<Item = CoreSlot> {
    (1..=rank).flat_map(move |r| {
        std::iter::once(CoreSlot::Diagonal { r }).chain(
            (1..=arm_width.min(rank.saturating_sub(1))).flat_map(move |f| {
                ARM_FAMILIES
                    .into_iter()
                    .filter(move |fam| fam.index(r, f, rank).is_some())
                    .map(move |family| CoreSlot::Arm { r, f, family })
            }),
        )
    })
}

fn slot_index(slot: CoreSlot) -> CoreIndex {
    match slot {
        CoreSlot::Diagonal { r } => CoreIndex::new(r, r, r),
        CoreSlot::Arm { r, f, family } => family
            .index(r, f, usize::MAX)
            .expect("slot generated in range"),
    }
}

/// Structured core: a diagonal of length `R` plus six `R × W` arm blocks,
/// where `W = min(F, R-1)`. Slots whose index would leave `1..=R` are never
/// read or written.
#[derive(Debug, Clone, PartialEq)]
pub struct SnowflakeCore {
    rank: usize,
    arm_width: usize,
    width: usize,
    diag: Vec<f64>,
    arms: Vec<f64>,
}

impl SnowflakeCore {
    pub fn zeros(rank: usize, arm_width: usize) -> Result<Self> {
        if rank < 1 {
            return Err(Error::InvalidModel("rank must be at least 1".into()));
        }
        let width = arm_width.min(rank - 1);
        Ok(Self {
            rank,
            arm_width,
            width,
            diag: vec![0.0; rank],
            arms: vec![0.0; rank * width * 6],
        })
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn arm_width(&self) -> usize {
        self.arm_width
    }

    /// Arm width that actually produces in-range elements.
    pub fn effective_width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        support_size(self.rank, self.arm_width)
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Classifies `index`, or `None` when it lies outside the support.
    pub fn slot_of(&self, index: CoreIndex) -> Option<CoreSlot> {
        let CoreIndex { p, q, r } = index;
        let range = 1..=self.rank;
        if !(range.contains(&p) && range.contains(&q) && range.contains(&r)) {
            return None;
        }
        let (group, moved, mode) = if p == q && q == r {
            return Some(CoreSlot::Diagonal { r });
        } else if q == r {
            (q, p, Mode::User)
        } else if p == r {
            (p, q, Mode::Service)
        } else if p == q {
            (p, r, Mode::Time)
        } else {
            return None;
        };
        let f = group.abs_diff(moved);
        if f > self.width {
            return None;
        }
        let direction = if moved < group {
            Direction::Down
        } else {
            Direction::Up
        };
        Some(CoreSlot::Arm {
            r: group,
            f,
            family: ArmFamily { mode, direction },
        })
    }

    #[inline]
    fn arm_offset(&self, r: usize, f: usize, family: ArmFamily) -> usize {
        ((r - 1) * self.width + (f - 1)) * 6 + family.slot()
    }

    pub fn slot_value(&self, slot: CoreSlot) -> f64 {
        match slot {
            CoreSlot::Diagonal { r } => self.diag[r - 1],
            CoreSlot::Arm { r, f, family } => self.arms[self.arm_offset(r, f, family)],
        }
    }

    pub fn slot_value_mut(&mut self, slot: CoreSlot) -> &mut f64 {
        match slot {
            CoreSlot::Diagonal { r } => &mut self.diag[r - 1],
            CoreSlot::Arm { r, f, family } => {
                let off = self.arm_offset(r, f, family);
                &mut self.arms[off]
            }
        }
    }

    pub fn get(&self, index: CoreIndex) -> Option<f64> {
        self.slot_of(index).map(|s| self.slot_value(s))
    }

    pub fn set(&mut self, index: CoreIndex, value: f64) -> Result<()> {
        let slot = self
            .slot_of(index)
            .ok_or_else(|| Error::InvalidModel(format!("{index} is outside the core support")))?;
        *self.slot_value_mut(slot) = value;
        Ok(())
    }

    /// Diagonal element `g_rrr` (1-based `r`).
    #[inline]
    pub fn diagonal(&self, r: usize) -> f64 {
        self.diag[r - 1]
    }

    /// Arm element `f` of group `r`; zero when the arm would leave the range.
    #[inline]
    pub fn arm(&self, r: usize, f: usize, family: ArmFamily) -> f64 {
        if f == 0 || f > self.width || family.index(r, f, self.rank).is_none() {
            return 0.0;
        }
        self.arms[self.arm_offset(r, f, family)]
    }

    pub fn slots(&self) -> impl Iterator<Item = CoreSlot> {
        slots(self.rank, self.width)
    }

    /// `(index, value)` pairs over the support in canonical order.
    pub fn iter(&self) -> impl Iterator<Item = (CoreIndex, f64)> + '_ {
        self.slots().map(|s| (slot_index(s), self.slot_value(s)))
    }

    pub fn sum_squares(&self) -> f64 {
        self.slots()
            .map(|s| {
                let g = self.slot_value(s);
                g * g
            })
            .sum()
    }
}

/// Dense row-major `rows × rank` matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrix {
    rows: usize,
    rank: usize,
    data: Vec<f64>,
}

impl FactorMatrix {
    pub fn zeros(rows: usize, rank: usize) -> Self {
        Self {
            rows,
            rank,
            data: vec![0.0; rows * rank],
        }
    }

    pub fn from_vec(rows: usize, rank: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * rank {
            return Err(Error::InvalidModel(format!(
                "factor data has {} values, expected {rows}x{rank}",
                data.len()
            )));
        }
        Ok(Self { rows, rank, data })
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.rank..(i + 1) * self.rank]
    }

    #[inline]
    pub fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.data[i * self.rank..(i + 1) * self.rank]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct FactorMatrices {
    pub user: FactorMatrix,
    pub service: FactorMatrix,
    pub time: FactorMatrix,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BiasVectors {
    pub user: Vec<f64>,
    pub service: Vec<f64>,
    pub time: Vec<f64>,
}

/// Regularisation weights: `core` on the snowflake core, `factor` on the
/// latent matrices, `bias` on the bias vectors.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct Lambdas {
    pub core: f64,
    pub factor: f64,
    pub bias: f64,
}

impl Lambdas {
    pub const ZERO: Lambdas = Lambdas {
        core: 0.0,
        factor: 0.0,
        bias: 0.0,
    };

    pub fn uniform(value: f64) -> Self {
        Self {
            core: value,
            factor: value,
            bias: value,
        }
    }

    fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("lambda_a", self.core),
            ("lambda_b", self.factor),
            ("lambda_c", self.bias),
        ] {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::InvalidModel(format!(
                    "{name} = {v} must be finite and >= 0"
                )));
            }
        }
        Ok(())
    }
}

impl Default for Lambdas {
    fn default() -> Self {
        Self::ZERO
    }
}

/// Shape and initialisation settings for [`NsftModel::init`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModelConfig {
    pub rank: usize,
    pub arm_width: usize,
    pub lambdas: Lambdas,
    pub use_bias: bool,
    pub init_low: f64,
    pub init_high: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            rank: 3,
            arm_width: 1,
            lambdas: Lambdas::ZERO,
            use_bias: true,
            init_low: 0.1,
            init_high: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NsftModel {
    pub(crate) dims: Dims,
    pub core: SnowflakeCore,
    pub factors: FactorMatrices,
    pub biases: BiasVectors,
    pub lambdas: Lambdas,
    pub use_bias: bool,
}

impl NsftModel {
    /// All-zero model; parameters are filled in by the caller.
    pub fn zeros(dims: Dims, rank: usize, arm_width: usize) -> Result<Self> {
        Ok(Self {
            dims,
            core: SnowflakeCore::zeros(rank, arm_width)?,
            factors: FactorMatrices {
                user: FactorMatrix::zeros(dims.users, rank),
                service: FactorMatrix::zeros(dims.services, rank),
                time: FactorMatrix::zeros(dims.slices, rank),
            },
            biases: BiasVectors {
                user: vec![0.0; dims.users],
                service: vec![0.0; dims.services],
                time: vec![0.0; dims.slices],
            },
            lambdas: Lambdas::ZERO,
            use_bias: true,
        })
    }

    /// Draws every parameter i.i.d. from `U[init_low, init_high]`, in the
    /// order: core (canonical support order), user, service and time
    /// factors row-major, then user, service and time biases.
    pub fn init(dims: Dims, config: &ModelConfig, seed: u64) -> Result<Self> {
        let ModelConfig {
            rank,
            arm_width,
            lambdas,
            use_bias,
            init_low,
            init_high,
        } = *config;
        if !(init_low.is_finite() && init_low > 0.0) {
            return Err(Error::InvalidModel(format!(
                "init_low = {init_low} must be > 0; zeros never move under multiplicative updates"
            )));
        }
        if !(init_high.is_finite() && init_high >= init_low) {
            return Err(Error::InvalidModel(format!(
                "init range [{init_low}, {init_high}] is empty"
            )));
        }
        lambdas.validate()?;
        let mut model = Self::zeros(dims, rank, arm_width)?;
        model.lambdas = lambdas;
        model.use_bias = use_bias;

        let dist = Uniform::new_inclusive(init_low, init_high)
            .map_err(|e| Error::InvalidModel(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let slots: Vec<CoreSlot> = model.core.slots().collect();
        for slot in slots {
            *model.core.slot_value_mut(slot) = dist.sample(&mut rng);
        }
        for m in [
            &mut model.factors.user,
            &mut model.factors.service,
            &mut model.factors.time,
        ] {
            m.as_mut_slice()
                .iter_mut()
                .for_each(|v| *v = dist.sample(&mut rng));
        }
        for b in [
            &mut model.biases.user,
            &mut model.biases.service,
            &mut model.biases.time,
        ] {
            b.iter_mut().for_each(|v| *v = dist.sample(&mut rng));
        }
        Ok(model)
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn rank(&self) -> usize {
        self.core.rank()
    }

    pub fn arm_width(&self) -> usize {
        self.core.arm_width()
    }

    /// Checks shapes, non-negativity and finiteness of every parameter.
    pub fn validate(&self) -> Result<()> {
        let rank = self.rank();
        let d = self.dims;
        let f = &self.factors;
        let shapes = [
            (f.user.rows(), f.user.rank(), d.users, "user"),
            (f.service.rows(), f.service.rank(), d.services, "service"),
            (f.time.rows(), f.time.rank(), d.slices, "time"),
        ];
        for (rows, cols, want, name) in shapes {
            if rows != want || cols != rank {
                return Err(Error::InvalidModel(format!(
                    "{name} factor is {rows}x{cols}, expected {want}x{rank}"
                )));
            }
        }
        let b = &self.biases;
        if b.user.len() != d.users || b.service.len() != d.services || b.time.len() != d.slices {
            return Err(Error::InvalidModel("bias lengths do not match dims".into()));
        }
        self.lambdas.validate()?;
        let bad = |v: &f64| !(v.is_finite() && *v >= 0.0);
        if self.core.iter().any(|(_, g)| bad(&g))
            || f.user.as_slice().iter().any(bad)
            || f.service.as_slice().iter().any(bad)
            || f.time.as_slice().iter().any(bad)
            || b.user.iter().chain(&b.service).chain(&b.time).any(bad)
        {
            return Err(Error::InvalidModel(
                "parameters must be finite and non-negative".into(),
            ));
        }
        Ok(())
    }

    pub fn check_index(&self, index: EntryIndex) -> Result<()> {
        if self.dims.contains(index) {
            Ok(())
        } else {
            Err(Error::IndexOutOfRange {
                index,
                dims: self.dims,
            })
        }
    }

    /// Latent factor rows `(u_i, s_j, t_k)` for `index`.
    #[inline]
    pub fn rows(&self, index: EntryIndex) -> (&[f64], &[f64], &[f64]) {
        (
            self.factors.user.row(index.i as usize),
            self.factors.service.row(index.j as usize),
            self.factors.time.row(index.k as usize),
        )
    }

    /// Snowflake (trilinear) part of the prediction, without biases.
    #[inline]
    pub fn interaction(&self, index: EntryIndex) -> f64 {
        let (u, s, t) = self.rows(index);
        let core = &self.core;
        let rank = core.rank;
        let width = core.width;
        let mut acc = 0.0;
        for r in 0..rank {
            acc += core.diag[r] * u[r] * s[r] * t[r];
            for f in 1..=width {
                let g = &core.arms[(r * width + f - 1) * 6..][..6];
                if f <= r {
                    let d = r - f;
                    acc += g[0] * u[d] * s[r] * t[r];
                    acc += g[1] * u[r] * s[d] * t[r];
                    acc += g[2] * u[r] * s[r] * t[d];
                }
                if r + f < rank {
                    let e = r + f;
                    acc += g[3] * u[e] * s[r] * t[r];
                    acc += g[4] * u[r] * s[e] * t[r];
                    acc += g[5] * u[r] * s[r] * t[e];
                }
            }
        }
        acc
    }

    #[inline]
    pub fn bias_sum(&self, index: EntryIndex) -> f64 {
        self.biases.user[index.i as usize]
            + self.biases.service[index.j as usize]
            + self.biases.time[index.k as usize]
    }

    /// Prediction without bounds checking; `index` must lie within dims.
    #[inline]
    pub fn predict_unchecked(&self, index: EntryIndex) -> f64 {
        let acc = self.interaction(index);
        if self.use_bias {
            acc + self.biases.user[index.i as usize]
                + self.biases.service[index.j as usize]
                + self.biases.time[index.k as usize]
        } else {
            acc
        }
    }

    pub fn predict(&self, index: EntryIndex) -> Result<f64> {
        self.check_index(index)?;
        Ok(self.predict_unchecked(index))
    }

    /// Regularisation term `H` of the instance objective at `index`.
    pub fn penalty(&self, index: EntryIndex) -> f64 {
        let (u, s, t) = self.rows(index);
        let l = self.lambdas;
        let factor_sq: f64 = (0..self.rank())
            .map(|r| u[r] * u[r] + s[r] * s[r] + t[r] * t[r])
            .sum();
        let mut h = l.core * self.core.sum_squares() + l.factor * factor_sq;
        if self.use_bias {
            let a = self.biases.user[index.i as usize];
            let b = self.biases.service[index.j as usize];
            let c = self.biases.time[index.k as usize];
            h += l.bias * (a * a + b * b + c * c);
        }
        h
    }

    /// Instance objective `(y - ŷ)² + H`.
    pub fn entry_loss(&self, obs: &Observation) -> Result<f64> {
        let yhat = self.predict(obs.index)?;
        let e = obs.value - yhat;
        Ok(e * e + self.penalty(obs.index))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::HashSet;

    fn brute_support(rank: usize, width: usize) -> HashSet<CoreIndex> {
        let mut out = HashSet::new();
        for p in 1..=rank {
            for q in 1..=rank {
                for r in 1..=rank {
                    let keep = if p == q && q == r {
                        true
                    } else if q == r {
                        p.abs_diff(q) <= width
                    } else if p == r {
                        q.abs_diff(p) <= width
                    } else if p == q {
                        r.abs_diff(p) <= width
                    } else {
                        false
                    };
                    if keep {
                        out.insert(CoreIndex::new(p, q, r));
                    }
                }
            }
        }
        out
    }

    #[test]
    fn small_supports() {
        assert_eq!(support(1, 0).unwrap(), vec![CoreIndex::new(1, 1, 1)]);
        assert_eq!(
            support(2, 0).unwrap(),
            vec![CoreIndex::new(1, 1, 1), CoreIndex::new(2, 2, 2)]
        );
        assert!(support(0, 1).is_err());
    }

    #[test]
    fn rank3_width1_support_matches_listing() {
        let listed: HashSet<CoreIndex> = [
            (1, 1, 1),
            (2, 2, 2),
            (3, 3, 3),
            (2, 1, 1),
            (1, 2, 1),
            (1, 1, 2),
            (1, 2, 2),
            (2, 1, 2),
            (2, 2, 1),
            (3, 2, 2),
            (2, 3, 2),
            (2, 2, 3),
            (2, 3, 3),
            (3, 2, 3),
            (3, 3, 2),
        ]
        .into_iter()
        .map(|(p, q, r)| CoreIndex::new(p, q, r))
        .collect();
        let got = support(3, 1).unwrap();
        assert_eq!(got.len(), 15);
        assert_eq!(got.into_iter().collect::<HashSet<_>>(), listed);
    }

    #[test]
    fn support_matches_brute_force_and_groups_are_disjoint() {
        for rank in 1..=8 {
            for width in 0..=4 {
                let got = support(rank, width).unwrap();
                let set: HashSet<_> = got.iter().copied().collect();
                assert_eq!(set.len(), got.len(), "duplicates at R={rank} F={width}");
                assert_eq!(set, brute_support(rank, width), "R={rank} F={width}");
                assert_eq!(got.len(), support_size(rank, width));
                let core = SnowflakeCore::zeros(rank, width).unwrap();
                for idx in &got {
                    let slot = core.slot_of(*idx).expect("in support");
                    assert_eq!(slot_index(slot), *idx);
                }
            }
        }
    }

    #[test]
    fn core_get_set() {
        let mut core = SnowflakeCore::zeros(3, 1).unwrap();
        core.set(CoreIndex::new(3, 2, 2), 0.7).unwrap();
        assert_eq!(core.get(CoreIndex::new(3, 2, 2)), Some(0.7));
        assert_eq!(
            core.arm(
                2,
                1,
                ArmFamily {
                    mode: Mode::User,
                    direction: Direction::Up
                }
            ),
            0.7
        );
        assert_eq!(core.get(CoreIndex::new(1, 2, 3)), None);
        assert_eq!(core.get(CoreIndex::new(3, 1, 1)), None);
        assert!(core.set(CoreIndex::new(3, 1, 1), 1.0).is_err());
        assert_eq!(core.iter().count(), 15);
    }

    #[test]
    fn init_degenerate_interval_and_determinism() {
        let dims = Dims::new(2, 2, 2).unwrap();
        let cfg = ModelConfig {
            rank: 1,
            arm_width: 0,
            init_low: 0.1,
            init_high: 0.1,
            ..ModelConfig::default()
        };
        let m = NsftModel::init(dims, &cfg, 42).unwrap();
        assert!(m.core.iter().all(|(_, g)| g == 0.1));
        assert!(m.factors.user.as_slice().iter().all(|&v| v == 0.1));
        assert!(m.biases.time.iter().all(|&v| v == 0.1));

        let cfg = ModelConfig {
            rank: 3,
            arm_width: 1,
            ..ModelConfig::default()
        };
        let a = NsftModel::init(dims, &cfg, 5).unwrap();
        let b = NsftModel::init(dims, &cfg, 5).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.core.iter().count(), 15);
        assert_ne!(a, NsftModel::init(dims, &cfg, 6).unwrap());
        a.validate().unwrap();
    }

    #[test]
    fn init_rejects_non_positive_low() {
        let dims = Dims::new(2, 2, 2).unwrap();
        for (lo, hi) in [(0.0, 1.0), (-0.1, 1.0), (0.5, 0.4)] {
            let cfg = ModelConfig {
                init_low: lo,
                init_high: hi,
                ..ModelConfig::default()
            };
            assert!(NsftModel::init(dims, &cfg, 0).is_err());
        }
    }

    #[test]
    fn unit_and_bias_only_predictions() {
        let dims = Dims::new(2, 3, 4).unwrap();
        let mut m = NsftModel::zeros(dims, 1, 0).unwrap();
        m.core.set(CoreIndex::new(1, 1, 1), 1.0).unwrap();
        for f in [
            &mut m.factors.user,
            &mut m.factors.service,
            &mut m.factors.time,
        ] {
            f.as_mut_slice().fill(1.0);
        }
        assert_eq!(m.predict(EntryIndex::new(0, 0, 0)).unwrap(), 1.0);

        let mut m = NsftModel::zeros(dims, 2, 1).unwrap();
        m.biases.user.fill(2.0);
        m.biases.service.fill(3.0);
        m.biases.time.fill(4.0);
        assert_eq!(m.predict(EntryIndex::new(1, 2, 3)).unwrap(), 9.0);
        m.use_bias = false;
        assert_eq!(m.predict(EntryIndex::new(1, 2, 3)).unwrap(), 0.0);
        assert!(m.predict(EntryIndex::new(2, 0, 0)).is_err());
    }

    #[test]
    fn entry_loss_examples() {
        let dims = Dims::new(1, 1, 1).unwrap();
        let mut m = NsftModel::zeros(dims, 1, 0).unwrap();
        m.biases.user[0] = 1.0;
        let idx = EntryIndex::new(0, 0, 0);
        assert_eq!(m.entry_loss(&Observation::new(idx, 1.0)).unwrap(), 0.0);
        assert_eq!(m.entry_loss(&Observation::new(idx, 3.0)).unwrap(), 4.0);
    }

    #[test]
    fn bias_shift_moves_prediction_exactly() {
        let dims = Dims::new(3, 3, 3).unwrap();
        let cfg = ModelConfig {
            rank: 2,
            arm_width: 1,
            init_low: 0.25,
            init_high: 0.25,
            ..ModelConfig::default()
        };
        let mut m = NsftModel::init(dims, &cfg, 1).unwrap();
        let idx = EntryIndex::new(1, 2, 0);
        let before = m.predict(idx).unwrap();
        m.biases.user[1] += 0.5;
        assert_eq!(m.predict(idx).unwrap(), before + 0.5);
    }
}
