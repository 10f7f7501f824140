//! Sparse QoS tensor storage, WS-DREAM text ingestion and seeded splitting.

use std::collections::HashSet;
use std::fmt;
use std::io::{BufRead, Write};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tensor shape: users × services × time slices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct Dims {
    pub users: usize,
    pub services: usize,
    pub slices: usize,
}

impl Dims {
    pub fn new(users: usize, services: usize, slices: usize) -> Result<Self> {
        if users == 0 || services == 0 || slices == 0 {
            return Err(Error::InvalidDims(format!(
                "{users}x{services}x{slices} has a zero extent"
            )));
        }
        if users > u32::MAX as usize || services > u32::MAX as usize || slices > u32::MAX as usize {
            return Err(Error::InvalidDims("extent exceeds u32 range".into()));
        }
        Ok(Self {
            users,
            services,
            slices,
        })
    }

    pub fn volume(&self) -> u128 {
        self.users as u128 * self.services as u128 * self.slices as u128
    }

    pub fn contains(&self, index: EntryIndex) -> bool {
        (index.i as usize) < self.users
            && (index.j as usize) < self.services
            && (index.k as usize) < self.slices
    }

    /// Row-major linear offset of `index`; callers check `contains` first.
    pub fn linear(&self, index: EntryIndex) -> u64 {
        (index.i as u64 * self.services as u64 + index.j as u64) * self.slices as u64
            + index.k as u64
    }

    pub fn unlinear(&self, offset: u64) -> EntryIndex {
        let k = offset % self.slices as u64;
        let rest = offset / self.slices as u64;
        let j = rest % self.services as u64;
        let i = rest / self.services as u64;
        EntryIndex::new(i as u32, j as u32, k as u32)
    }
}

impl fmt::Display for Dims {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.users, self.services, self.slices)
    }
}

/// 0-based (user, service, time slice) coordinate.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct EntryIndex {
    pub i: u32,
    pub j: u32,
    pub k: u32,
}

impl EntryIndex {
    pub const fn new(i: u32, j: u32, k: u32) -> Self {
        Self { i, j, k }
    }
}

impl fmt::Display for EntryIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({},{},{})", self.i, self.j, self.k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub index: EntryIndex,
    pub value: f64,
}

impl Observation {
    pub fn new(index: EntryIndex, value: f64) -> Self {
        Self { index, value }
    }
}

/// Observed entries of a QoS tensor in COO form, sorted by index.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseTensor {
    dims: Dims,
    entries: Vec<Observation>,
}

impl SparseTensor {
    pub fn empty(dims: Dims) -> Self {
        Self {
            dims,
            entries: Vec::new(),
        }
    }

    /// Validates and sorts `entries`. Values must be finite and positive.
    pub fn from_entries(dims: Dims, mut entries: Vec<Observation>) -> Result<Self> {
        for (n, obs) in entries.iter().enumerate() {
            if !dims.contains(obs.index) {
                return Err(Error::OutOfRange {
                    line: n + 1,
                    index: obs.index,
                    dims,
                });
            }
            if !(obs.value.is_finite() && obs.value > 0.0) {
                return Err(Error::Parse {
                    line: n + 1,
                    message: format!("value {} is not finite and positive", obs.value),
                });
            }
        }
        entries.sort_by_key(|o| o.index);
        if let Some(w) = entries.windows(2).find(|w| w[0].index == w[1].index) {
            return Err(Error::Duplicate {
                line: 0,
                index: w[0].index,
            });
        }
        Ok(Self { dims, entries })
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    pub fn entries(&self) -> &[Observation] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn get(&self, index: EntryIndex) -> Option<f64> {
        self.entries
            .binary_search_by_key(&index, |o| o.index)
            .ok()
            .map(|pos| self.entries[pos].value)
    }

    pub fn mean_value(&self) -> Option<f64> {
        if self.entries.is_empty() {
            return None;
        }
        let total = crate::sum::exact_sum(self.entries.iter().map(|o| o.value));
        Some(total / self.entries.len() as f64)
    }

    /// Writes the tensor in the WS-DREAM line format with a `# dims` header.
    pub fn write_text<W: Write>(&self, mut out: W) -> Result<()> {
        writeln!(
            out,
            "# dims {} {} {}",
            self.dims.users, self.dims.services, self.dims.slices
        )?;
        for o in &self.entries {
            writeln!(out, "{} {} {} {}", o.index.i, o.index.j, o.index.k, o.value)?;
        }
        Ok(())
    }
}

/// Fraction of cells of `tensor` that are observed.
pub fn density(tensor: &SparseTensor) -> f64 {
    tensor.len() as f64 / tensor.dims.volume() as f64
}

/// Result of [`parse_wsdream`]: the tensor plus line accounting.
#[derive(Debug, Clone)]
pub struct Ingested {
    pub tensor: SparseTensor,
    /// Data lines read (comments and blank lines excluded).
    pub records: usize,
    /// Lines dropped because their value was zero or negative.
    pub dropped: usize,
}

impl Ingested {
    /// Density counting every record, including the dropped ones.
    pub fn raw_density(&self) -> f64 {
        self.records as f64 / self.tensor.dims.volume() as f64
    }
}

/// Reads `user service slice value` lines.
///
/// Blank lines and lines starting with `#` are skipped. Non-positive values
/// are dropped and counted; non-finite values, wrong field counts and
/// out-of-range or repeated indices are errors carrying the 1-based line.
pub fn parse_wsdream<R: BufRead>(reader: R, dims: Dims) -> Result<Ingested> {
    let mut entries = Vec::new();
    let mut seen: HashSet<u64> = HashSet::new();
    let mut records = 0;
    let mut dropped = 0;
    for (n, line) in reader.lines().enumerate() {
        let line_no = n + 1;
        let line = line?;
        let trimmed = line.trim();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        records += 1;
        let obs = parse_line(trimmed, line_no)?;
        if !dims.contains(obs.index) {
            return Err(Error::OutOfRange {
                line: line_no,
                index: obs.index,
                dims,
            });
        }
        if !seen.insert(dims.linear(obs.index)) {
            return Err(Error::Duplicate {
                line: line_no,
                index: obs.index,
            });
        }
        if obs.value > 0.0 {
            entries.push(obs);
        } else {
            dropped += 1;
        }
    }
    entries.sort_by_key(|o| o.index);
    Ok(Ingested {
        tensor: SparseTensor { dims, entries },
        records,
        dropped,
    })
}

fn parse_line(line: &str, line_no: usize) -> Result<Observation> {
    let mut fields = line.split_whitespace();
    let mut next = || fields.next();
    let (Some(i), Some(j), Some(k), Some(v), None) = (next(), next(), next(), next(), next())
    else {
        return Err(Error::Parse {
            line: line_no,
            message: format!("expected 4 fields, got {}", line.split_whitespace().count()),
        });
    };
    let idx = |s: &str, what: &str| {
        s.parse::<u32>().map_err(|e| Error::Parse {
            line: line_no,
            message: format!("bad {what} `{s}`: {e}"),
        })
    };
    let index = EntryIndex::new(
        idx(i, "user id")?,
        idx(j, "service id")?,
        idx(k, "time slice")?,
    );
    let value: f64 = v.parse().map_err(|e| Error::Parse {
        line: line_no,
        message: format!("bad value `{v}`: {e}"),
    })?;
    if !value.is_finite() {
        return Err(Error::Parse {
            line: line_no,
            message: format!("value `{v}` is not finite"),
        });
    }
    Ok(Observation::new(index, value))
}

/// Reads the `# dims I J K` header written by [`SparseTensor::write_text`].
pub fn sniff_dims<R: BufRead>(reader: R) -> Result<Option<Dims>> {
    for line in reader.lines() {
        let line = line?;
        let t = line.trim();
        if t.is_empty() {
            continue;
        }
        let Some(rest) = t.strip_prefix('#') else {
            return Ok(None);
        };
        let parts: Vec<&str> = rest.split_whitespace().collect();
        if parts.len() == 4 && parts[0] == "dims" {
            let p = |s: &str| {
                s.parse::<usize>()
                    .map_err(|e| Error::InvalidDims(format!("bad dims header: {e}")))
            };
            return Dims::new(p(parts[1])?, p(parts[2])?, p(parts[3])?).map(Some);
        }
    }
    Ok(None)
}

/// Train/valid/test fractions.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitRatios {
    pub train: f64,
    pub valid: f64,
    pub test: f64,
}

impl SplitRatios {
    pub fn new(train: f64, valid: f64, test: f64) -> Result<Self> {
        for r in [train, valid, test] {
            if !(r.is_finite() && r > 0.0) {
                return Err(Error::InvalidRatios(format!("part {r} is not positive")));
            }
        }
        let total = train + valid + test;
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::InvalidRatios(format!("parts sum to {total}, not 1")));
        }
        Ok(Self { train, valid, test })
    }

    /// Parses `a:b:c` and normalises by the total, so `1:2:7` and
    /// `0.1:0.2:0.7` are equivalent.
    pub fn parse(text: &str) -> Result<Self> {
        let parts: Vec<f64> = text
            .split(':')
            .map(|p| {
                p.trim()
                    .parse::<f64>()
                    .map_err(|e| Error::InvalidRatios(format!("`{p}`: {e}")))
            })
            .collect::<Result<_>>()?;
        if parts.len() != 3 {
            return Err(Error::InvalidRatios(format!(
                "expected train:valid:test, got `{text}`"
            )));
        }
        if parts.iter().any(|p| !(p.is_finite() && *p > 0.0)) {
            return Err(Error::InvalidRatios(format!(
                "non-positive part in `{text}`"
            )));
        }
        let total: f64 = parts.iter().sum();
        Self::new(
            parts[0] / total,
            parts[1] / total,
            1.0 - (parts[0] + parts[1]) / total,
        )
    }

    /// Part sizes for `n` entries: train and valid rounded half-up, test
    /// takes the remainder.
    pub fn sizes(&self, n: usize) -> (usize, usize, usize) {
        let train = ((n as f64 * self.train).round() as usize).min(n);
        let valid = ((n as f64 * self.valid).round() as usize).min(n - train);
        (train, valid, n - train - valid)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DataSplit {
    pub train: SparseTensor,
    pub valid: SparseTensor,
    pub test: SparseTensor,
}

impl DataSplit {
    pub fn sizes(&self) -> (usize, usize, usize) {
        (self.train.len(), self.valid.len(), self.test.len())
    }

    /// Writes the sorted indices of each part, one `i j k` per line.
    pub fn write_manifest<W: Write>(&self, mut out: W) -> Result<()> {
        let d = self.train.dims;
        writeln!(out, "# nsft split manifest")?;
        writeln!(out, "dims {} {} {}", d.users, d.services, d.slices)?;
        for (name, part) in [
            ("train", &self.train),
            ("valid", &self.valid),
            ("test", &self.test),
        ] {
            writeln!(out, "part {name} {}", part.len())?;
            for o in &part.entries {
                writeln!(out, "{} {} {}", o.index.i, o.index.j, o.index.k)?;
            }
        }
        Ok(())
    }
}

/// Shuffles the entries with a permutation seeded by `seed` and cuts them
/// into train/valid/test. Each part is re-sorted by index.
pub fn split(tensor: &SparseTensor, ratios: SplitRatios, seed: u64) -> Result<DataSplit> {
    if tensor.is_empty() {
        return Err(Error::EmptyTensor);
    }
    SplitRatios::new(ratios.train, ratios.valid, ratios.test)?;
    let mut shuffled = tensor.entries.clone();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    shuffled.shuffle(&mut rng);

    let (n_train, n_valid, _) = ratios.sizes(shuffled.len());
    let mut test = shuffled.split_off(n_train + n_valid);
    let mut valid = shuffled.split_off(n_train);
    let mut train = shuffled;
    for part in [&mut train, &mut valid, &mut test] {
        part.sort_by_key(|o| o.index);
    }
    let dims = tensor.dims;
    Ok(DataSplit {
        train: SparseTensor {
            dims,
            entries: train,
        },
        valid: SparseTensor {
            dims,
            entries: valid,
        },
        test: SparseTensor {
            dims,
            entries: test,
        },
    })
}
