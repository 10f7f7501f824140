//! Text serialisation of models and training reports.
//!
//! Model files are line oriented:
//!
//! ```text
//! nsft-model 1
//! dims <I> <J> <K>
//! rank <R>
//! arm_width <F>
//! lambdas <lambda_a> <lambda_b> <lambda_c>
//! use_bias <true|false>
//! core <n>
//! <p> <q> <r> <value>        (n lines, canonical support order)
//! user <I> <R>
//! <R values>                 (I lines)
//! service <J> <R>
//! ...
//! time <K> <R>
//! ...
//! bias_user <I>
//! <I values>
//! bias_service <J>
//! <J values>
//! bias_time <K>
//! <K values>
//! ```
//!
//! Floats are written in Rust's shortest round-trip form, so a reload is
//! bit-exact. Reports are JSON lines: one `epoch` record per epoch and a
//! closing `summary` record.

use std::io::{BufRead, Write};

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{CoreIndex, FactorMatrix, Lambdas, NsftModel};
use crate::tensor::Dims;
use crate::training::{EpochRecord, StopReason, TrainReport};

const MAGIC: &str = "nsft-model";
const VERSION: u32 = 1;

fn join(values: &[f64]) -> String {
    values
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join(" ")
}

pub fn write_model<W: Write>(model: &NsftModel, mut out: W) -> Result<()> {
    let d = model.dims();
    let l = model.lambdas;
    writeln!(out, "{MAGIC} {VERSION}")?;
    writeln!(out, "dims {} {} {}", d.users, d.services, d.slices)?;
    writeln!(out, "rank {}", model.rank())?;
    writeln!(out, "arm_width {}", model.arm_width())?;
    writeln!(out, "lambdas {} {} {}", l.core, l.factor, l.bias)?;
    writeln!(out, "use_bias {}", model.use_bias)?;
    writeln!(out, "core {}", model.core.len())?;
    for (idx, g) in model.core.iter() {
        writeln!(out, "{} {} {} {}", idx.p, idx.q, idx.r, g)?;
    }
    for (name, m) in [
        ("user", &model.factors.user),
        ("service", &model.factors.service),
        ("time", &model.factors.time),
    ] {
        writeln!(out, "{name} {} {}", m.rows(), m.rank())?;
        for i in 0..m.rows() {
            writeln!(out, "{}", join(m.row(i)))?;
        }
    }
    for (name, b) in [
        ("bias_user", &model.biases.user),
        ("bias_service", &model.biases.service),
        ("bias_time", &model.biases.time),
    ] {
        writeln!(out, "{name} {}", b.len())?;
        writeln!(out, "{}", join(b))?;
    }
    Ok(())
}

struct Lines<R> {
    inner: std::io::Lines<R>,
    line: usize,
}

impl<R: BufRead> Lines<R> {
    fn next(&mut self) -> Result<String> {
        self.line += 1;
        match self.inner.next() {
            Some(l) => Ok(l?),
            None => Err(self.err("unexpected end of file")),
        }
    }

    fn err(&self, msg: impl std::fmt::Display) -> Error {
        Error::ModelFormat(format!("line {}: {msg}", self.line))
    }

    /// Reads `<key> <fields...>` and returns the fields.
    fn keyed(&mut self, key: &str, count: usize) -> Result<Vec<String>> {
        let line = self.next()?;
        let mut parts = line.split_whitespace();
        if parts.next() != Some(key) {
            return Err(self.err(format!("expected `{key}`")));
        }
        let rest: Vec<String> = parts.map(str::to_owned).collect();
        if rest.len() != count {
            return Err(self.err(format!("`{key}` takes {count} fields")));
        }
        Ok(rest)
    }

    fn parse<T: std::str::FromStr>(&self, s: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        s.parse().map_err(|e| self.err(format!("`{s}`: {e}")))
    }

    fn scalar<T: std::str::FromStr>(&mut self, key: &str) -> Result<T>
    where
        T::Err: std::fmt::Display,
    {
        let field = self.keyed(key, 1)?;
        self.parse(&field[0])
    }

    fn floats(&mut self, count: usize) -> Result<Vec<f64>> {
        let line = self.next()?;
        let vals: Vec<f64> = line
            .split_whitespace()
            .map(|s| self.parse(s))
            .collect::<Result<_>>()?;
        if vals.len() != count {
            return Err(self.err(format!("expected {count} values, got {}", vals.len())));
        }
        Ok(vals)
    }
}

pub fn read_model<R: BufRead>(reader: R) -> Result<NsftModel> {
    let mut lines = Lines {
        inner: reader.lines(),
        line: 0,
    };
    let header = lines.keyed(MAGIC, 1)?;
    let version: u32 = lines.parse(&header[0])?;
    if version != VERSION {
        return Err(lines.err(format!("unsupported version {version}")));
    }
    let d = lines.keyed("dims", 3)?;
    let dims = Dims::new(
        lines.parse(&d[0])?,
        lines.parse(&d[1])?,
        lines.parse(&d[2])?,
    )?;
    let rank: usize = lines.scalar("rank")?;
    let arm_width: usize = lines.scalar("arm_width")?;
    let l = lines.keyed("lambdas", 3)?;
    let lambdas = Lambdas {
        core: lines.parse(&l[0])?,
        factor: lines.parse(&l[1])?,
        bias: lines.parse(&l[2])?,
    };
    let use_bias: bool = lines.scalar("use_bias")?;

    let mut model = NsftModel::zeros(dims, rank, arm_width)?;
    model.lambdas = lambdas;
    model.use_bias = use_bias;

    let n: usize = lines.scalar("core")?;
    if n != model.core.len() {
        return Err(lines.err(format!(
            "core has {n} values, support has {}",
            model.core.len()
        )));
    }
    let mut seen = std::collections::HashSet::new();
    for _ in 0..n {
        let line = lines.next()?;
        let f: Vec<&str> = line.split_whitespace().collect();
        if f.len() != 4 {
            return Err(lines.err("core lines are `p q r value`"));
        }
        let idx = CoreIndex::new(lines.parse(f[0])?, lines.parse(f[1])?, lines.parse(f[2])?);
        if !seen.insert(idx) {
            return Err(lines.err(format!("core index {idx} repeated")));
        }
        let value: f64 = lines.parse(f[3])?;
        model.core.set(idx, value).map_err(|e| lines.err(e))?;
    }

    for (name, rows) in [
        ("user", dims.users),
        ("service", dims.services),
        ("time", dims.slices),
    ] {
        let h = lines.keyed(name, 2)?;
        let (r, c): (usize, usize) = (lines.parse(&h[0])?, lines.parse(&h[1])?);
        if r != rows || c != rank {
            return Err(lines.err(format!(
                "{name} factor shape {r}x{c}, expected {rows}x{rank}"
            )));
        }
        let mut data = Vec::with_capacity(rows * rank);
        for _ in 0..rows {
            data.extend(lines.floats(rank)?);
        }
        let m = FactorMatrix::from_vec(rows, rank, data)?;
        match name {
            "user" => model.factors.user = m,
            "service" => model.factors.service = m,
            _ => model.factors.time = m,
        }
    }
    for (name, len) in [
        ("bias_user", dims.users),
        ("bias_service", dims.services),
        ("bias_time", dims.slices),
    ] {
        let got: usize = lines.scalar(name)?;
        if got != len {
            return Err(lines.err(format!("{name} has length {got}, expected {len}")));
        }
        let v = lines.floats(len)?;
        match name {
            "bias_user" => model.biases.user = v,
            "bias_service" => model.biases.service = v,
            _ => model.biases.time = v,
        }
    }
    model
        .validate()
        .map_err(|e| Error::ModelFormat(e.to_string()))?;
    Ok(model)
}

#[derive(Serialize)]
#[serde(tag = "record", rename_all = "snake_case")]
enum ReportLine<'a> {
    Epoch(&'a EpochRecord),
    Summary {
        stop_reason: StopReason,
        converged_at: Option<usize>,
        epochs: usize,
    },
}

/// Writes one JSON object per epoch, then a summary line.
pub fn write_report<W: Write>(report: &TrainReport, mut out: W) -> Result<()> {
    for rec in &report.epochs {
        serde_json::to_writer(&mut out, &ReportLine::Epoch(rec)).map_err(std::io::Error::from)?;
        writeln!(out)?;
    }
    let summary = ReportLine::Summary {
        stop_reason: report.stop_reason,
        converged_at: report.converged_at,
        epochs: report.epochs.len(),
    };
    serde_json::to_writer(&mut out, &summary).map_err(std::io::Error::from)?;
    writeln!(out)?;
    Ok(())
}
