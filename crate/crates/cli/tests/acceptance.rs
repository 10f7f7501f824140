//! Acceptance suite. Each criterion prints one `PASS`/`FAIL`/`SKIP` line; the
//! process exits non-zero if any criterion fails.

use std::collections::BTreeSet;
use std::path::Path;
use std::process::Command;
use std::time::{Duration, Instant};

use nsft::io::write_model;
use nsft::metrics::from_residuals;
use nsft::model::{support, CoreIndex, Lambdas, ModelConfig, NsftModel};
use nsft::synthetic::{generate_ground_truth, sample_observations, SyntheticSpec};
use nsft::tensor::{
    parse_wsdream, split, Dims, EntryIndex, Observation, SparseTensor, SplitRatios,
};
use nsft::training::{
    entry_gradients, slf_nmut_update, train, train_epoch, GradientMode, TrainConfig, UpdateScheme,
};
use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<String, String>;
type Files = Vec<Vec<u8>>;

struct Criterion {
    id: &'static str,
    name: &'static str,
    budget: Duration,
    run: fn() -> Option<Outcome>,
}

fn rel_close(a: f64, b: f64, tol: f64, floor: f64) -> bool {
    (a - b).abs() <= tol * a.abs().max(b.abs()).max(floor)
}

fn random_model(rng: &mut ChaCha8Rng, rank: usize, width: usize, max_dim: usize) -> NsftModel {
    let dims = Dims::new(
        rng.random_range(1..=max_dim),
        rng.random_range(1..=max_dim),
        rng.random_range(1..=max_dim),
    )
    .unwrap();
    let cfg = ModelConfig {
        rank,
        arm_width: width,
        lambdas: Lambdas {
            core: rng.random_range(0.0..0.3),
            factor: rng.random_range(0.0..0.3),
            bias: rng.random_range(0.0..0.3),
        },
        use_bias: rng.random_bool(0.75),
        init_low: 0.05,
        init_high: 1.0,
    };
    NsftModel::init(dims, &cfg, rng.random()).unwrap()
}

fn random_index(rng: &mut ChaCha8Rng, dims: Dims) -> EntryIndex {
    EntryIndex::new(
        rng.random_range(0..dims.users as u32),
        rng.random_range(0..dims.services as u32),
        rng.random_range(0..dims.slices as u32),
    )
}

fn random_tensor(
    rng: &mut ChaCha8Rng,
    dims: Dims,
    count: usize,
    value: impl Fn(&mut ChaCha8Rng, EntryIndex) -> f64,
) -> SparseTensor {
    let mut cells: Vec<u64> = (0..dims.volume() as u64).collect();
    cells.shuffle(rng);
    let entries = cells[..count]
        .iter()
        .map(|&c| {
            let idx = dims.unlinear(c);
            Observation::new(idx, value(rng, idx))
        })
        .collect();
    SparseTensor::from_entries(dims, entries).unwrap()
}

fn model_text(m: &NsftModel) -> Vec<u8> {
    let mut out = Vec::new();
    write_model(m, &mut out).unwrap();
    out
}

/// Dense `R×R×R` core filled from the snowflake, contracted in full.
fn dense_predict(m: &NsftModel, idx: EntryIndex) -> f64 {
    let r = m.rank();
    let mut core = vec![0.0; r * r * r];
    for (c, g) in m.core.iter() {
        core[((c.p - 1) * r + (c.q - 1)) * r + (c.r - 1)] = g;
    }
    let u = m.factors.user.row(idx.i as usize);
    let s = m.factors.service.row(idx.j as usize);
    let t = m.factors.time.row(idx.k as usize);
    let mut acc = 0.0;
    for p in 0..r {
        for q in 0..r {
            for w in 0..r {
                acc += core[(p * r + q) * r + w] * u[p] * s[q] * t[w];
            }
        }
    }
    if m.use_bias {
        acc += m.biases.user[idx.i as usize]
            + m.biases.service[idx.j as usize]
            + m.biases.time[idx.k as usize];
    }
    acc
}

fn c1_dense_oracle() -> Option<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst = 0.0f64;
    for n in 0..100 {
        let rank = 1 + n % 6;
        let width = (n / 6) % 4;
        let m = random_model(&mut rng, rank, width, 6);
        for _ in 0..20 {
            let idx = random_index(&mut rng, m.dims());
            let got = m.predict(idx).unwrap();
            let want = dense_predict(&m, idx);
            if !rel_close(got, want, 1e-12, 0.0) {
                return Some(Err(format!("R={rank} F={width} {idx:?}: {got} vs {want}")));
            }
            worst = worst.max((got - want).abs() / want.abs());
        }
    }
    Some(Ok(format!(
        "100 models x 20 queries, worst rel err {worst:.2e}"
    )))
}

/// Weighted CP with biases, built from plain arrays copied out of the model.
struct Cp {
    rank: usize,
    weight: Vec<f64>,
    u: Vec<f64>,
    s: Vec<f64>,
    t: Vec<f64>,
    a: Vec<f64>,
    b: Vec<f64>,
    c: Vec<f64>,
    bias: bool,
}

impl Cp {
    fn from_model(m: &NsftModel) -> Self {
        let rank = m.rank();
        Cp {
            rank,
            weight: (1..=rank)
                .map(|r| m.core.get(CoreIndex::new(r, r, r)).unwrap())
                .collect(),
            u: m.factors.user.as_slice().to_vec(),
            s: m.factors.service.as_slice().to_vec(),
            t: m.factors.time.as_slice().to_vec(),
            a: m.biases.user.clone(),
            b: m.biases.service.clone(),
            c: m.biases.time.clone(),
            bias: m.use_bias,
        }
    }

    fn eval(&self, i: usize, j: usize, k: usize) -> f64 {
        let n = self.rank;
        let mut acc = 0.0;
        for r in 0..n {
            acc += self.weight[r] * self.u[i * n + r] * self.s[j * n + r] * self.t[k * n + r];
        }
        if self.bias {
            acc + self.a[i] + self.b[j] + self.c[k]
        } else {
            acc
        }
    }
}

fn c2_cp_degeneration() -> Option<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut queries = 0;
    for n in 0..100 {
        let m = random_model(&mut rng, 1 + n % 8, 0, 10);
        let cp = Cp::from_model(&m);
        for _ in 0..100 {
            let idx = random_index(&mut rng, m.dims());
            let got = m.predict(idx).unwrap();
            let want = cp.eval(idx.i as usize, idx.j as usize, idx.k as usize);
            if got.to_bits() != want.to_bits() {
                return Some(Err(format!("{idx:?}: {got:e} vs {want:e}")));
            }
            queries += 1;
        }
    }
    Some(Ok(format!("{queries} queries bitwise identical")))
}

fn brute_support(rank: usize, width: usize) -> BTreeSet<CoreIndex> {
    let mut out = BTreeSet::new();
    for p in 1..=rank {
        for q in 1..=rank {
            for r in 1..=rank {
                let diag = p == q && q == r;
                let arm = (q == r && p != q && p.abs_diff(q) <= width)
                    || (p == r && q != p && q.abs_diff(p) <= width)
                    || (p == q && r != p && r.abs_diff(p) <= width);
                if diag || arm {
                    out.insert(CoreIndex::new(p, q, r));
                }
            }
        }
    }
    out
}

fn c3_support() -> Option<Outcome> {
    for rank in 1..=8 {
        for width in 0..=4 {
            let got = support(rank, width).unwrap();
            let set: BTreeSet<_> = got.iter().copied().collect();
            if set.len() != got.len() || set != brute_support(rank, width) {
                return Some(Err(format!("R={rank} F={width} differs from enumeration")));
            }
        }
    }
    let listed: BTreeSet<CoreIndex> = [
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
    let s = support(3, 1).unwrap();
    if s.len() != 15 || s.iter().copied().collect::<BTreeSet<_>>() != listed {
        return Some(Err(format!(
            "(3,1) support has {} elements or wrong members",
            s.len()
        )));
    }
    Some(Ok(
        "R<=8, F<=4 match enumeration; (3,1) has the 15 listed indices".into(),
    ))
}

#[derive(Debug, Clone, Copy)]
enum Param {
    Core(CoreIndex),
    User(usize, usize),
    Service(usize, usize),
    Time(usize, usize),
    Bias(usize, usize),
}

fn nudged(m: &NsftModel, p: Param, delta: f64) -> NsftModel {
    let mut c = m.clone();
    match p {
        Param::Core(idx) => {
            let v = c.core.get(idx).unwrap();
            c.core.set(idx, v + delta).unwrap();
        }
        Param::User(i, r) => c.factors.user.row_mut(i)[r] += delta,
        Param::Service(j, r) => c.factors.service.row_mut(j)[r] += delta,
        Param::Time(k, r) => c.factors.time.row_mut(k)[r] += delta,
        Param::Bias(0, i) => c.biases.user[i] += delta,
        Param::Bias(1, j) => c.biases.service[j] += delta,
        Param::Bias(_, k) => c.biases.time[k] += delta,
    }
    c
}

/// Analytic components carry the loss gradient halved.
fn fd_check(m: &NsftModel, obs: &Observation, mode: GradientMode) -> Result<usize, String> {
    const H: f64 = 1e-6;
    let g = entry_gradients(m, obs, mode).unwrap();
    let (i, j, k) = (
        obs.index.i as usize,
        obs.index.j as usize,
        obs.index.k as usize,
    );
    let mut pairs: Vec<(Param, f64)> = g.core.iter().map(|&(c, v)| (Param::Core(c), v)).collect();
    for r in 0..m.rank() {
        pairs.push((Param::User(i, r), g.user[r]));
        pairs.push((Param::Service(j, r), g.service[r]));
        pairs.push((Param::Time(k, r), g.time[r]));
    }
    if m.use_bias {
        pairs.extend([
            (Param::Bias(0, i), g.bias[0]),
            (Param::Bias(1, j), g.bias[1]),
            (Param::Bias(2, k), g.bias[2]),
        ]);
    }
    for &(p, analytic) in &pairs {
        let up = nudged(m, p, H).entry_loss(obs).unwrap();
        let down = nudged(m, p, -H).entry_loss(obs).unwrap();
        let fd = (up - down) / (2.0 * H);
        if !rel_close(2.0 * analytic, fd, 1e-4, 1e-3) {
            return Err(format!("{p:?}: analytic {} vs fd {fd}", 2.0 * analytic));
        }
    }
    Ok(pairs.len())
}

fn c4_gradients() -> Option<Outcome> {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut components = 0;
    for (mode, widths) in [(GradientMode::Full, 0..=2), (GradientMode::Paper, 0..=0)] {
        for n in 0..100 {
            let rank = 1 + n % 5;
            let width = widths.start() + n % (widths.end() - widths.start() + 1);
            let m = random_model(&mut rng, rank, width, 5);
            let obs =
                Observation::new(random_index(&mut rng, m.dims()), rng.random_range(0.1..6.0));
            match fd_check(&m, &obs, mode) {
                Ok(c) => components += c,
                Err(e) => return Some(Err(format!("{mode} R={rank} F={width}: {e}"))),
            }
        }
    }
    Some(Ok(format!(
        "200 cases, {components} components within 1e-4"
    )))
}

fn c5_update_algebra() -> Option<Outcome> {
    let dims = Dims::new(20, 20, 10).unwrap();
    let mut violations = 0usize;
    for seed in 0..20u64 {
        let mut rng = ChaCha8Rng::seed_from_u64(500 + seed);
        let width = (seed % 3) as usize;
        let cfg = ModelConfig {
            rank: 3,
            arm_width: width,
            lambdas: Lambdas::ZERO,
            use_bias: true,
            init_low: 0.1,
            init_high: 0.9,
        };
        let base = NsftModel::init(dims, &cfg, seed).unwrap();
        let count = 1200;

        // data equal to the model's own predictions: nothing may move
        let own = random_tensor(&mut rng, dims, count, |_, idx| base.predict(idx).unwrap());
        let exact = TrainConfig {
            epsilon_denom: 0.0,
            gradient_mode: if seed % 2 == 0 {
                GradientMode::Paper
            } else {
                GradientMode::Full
            },
            ..TrainConfig::default()
        };
        let mut m = base.clone();
        for obs in own.entries() {
            slf_nmut_update(
                &mut m,
                obs,
                &TrainConfig {
                    scheme: UpdateScheme::Stochastic,
                    ..exact
                },
            )
            .unwrap();
        }
        if model_text(&m) != model_text(&base) {
            return Some(Err(format!(
                "seed {seed}: per-entry update moved a fixed point"
            )));
        }
        let mut m = base.clone();
        train_epoch(&mut m, &own, 1, &exact).unwrap();
        if model_text(&m) != model_text(&base) {
            return Some(Err(format!("seed {seed}: batch epoch moved a fixed point")));
        }

        // random positive data, with some parameters pinned to zero
        let data = random_tensor(&mut rng, dims, count, |r, _| r.random_range(0.05..5.0));
        let mut m = NsftModel::init(
            dims,
            &ModelConfig {
                lambdas: Lambdas::uniform(1e-3),
                ..cfg
            },
            seed + 1000,
        )
        .unwrap();
        m.factors.user.row_mut(3)[1] = 0.0;
        m.factors.time.row_mut(7)[2] = 0.0;
        m.core.set(CoreIndex::new(2, 2, 2), 0.0).unwrap();
        m.biases.service[5] = 0.0;
        let train_cfg = TrainConfig {
            shuffle_seed: seed,
            scheme: if seed < 10 {
                UpdateScheme::Batch
            } else {
                UpdateScheme::Stochastic
            },
            gradient_mode: if seed % 2 == 0 {
                GradientMode::Paper
            } else {
                GradientMode::Full
            },
            ..TrainConfig::default()
        };
        for epoch in 1..=200 {
            if let Err(e) = train_epoch(&mut m, &data, epoch, &train_cfg) {
                return Some(Err(format!("seed {seed}: {e}")));
            }
        }
        let all = m
            .core
            .iter()
            .map(|(_, v)| v)
            .chain(m.factors.user.as_slice().iter().copied())
            .chain(m.factors.service.as_slice().iter().copied())
            .chain(m.factors.time.as_slice().iter().copied())
            .chain(m.biases.user.iter().copied())
            .chain(m.biases.service.iter().copied())
            .chain(m.biases.time.iter().copied());
        violations += all.filter(|v| !(v.is_finite() && *v >= 0.0)).count();
        let pinned = [
            m.factors.user.row(3)[1],
            m.factors.time.row(7)[2],
            m.core.get(CoreIndex::new(2, 2, 2)).unwrap(),
            m.biases.service[5],
        ];
        violations += pinned.iter().filter(|&&v| v != 0.0).count();
    }
    if violations > 0 {
        return Some(Err(format!("{violations} violations")));
    }
    Some(Ok(
        "fixed point exact in both schemes; 0 violations over 20 seeds x 200 epochs".into(),
    ))
}

fn c6_recovery() -> Option<Outcome> {
    let dims = Dims::new(30, 25, 20).unwrap();
    let seed = 1;
    let spec = SyntheticSpec::new(dims, 3, 1, seed);
    let truth = generate_ground_truth(&spec).unwrap();
    let data = sample_observations(&truth, &spec).unwrap();
    let parts = split(&data, SplitRatios::parse("2:2:6").unwrap(), seed).unwrap();
    let mean = data.mean_value().unwrap();
    let mut notes = Vec::new();
    let mut ok = true;
    for mode in [GradientMode::Paper, GradientMode::Full] {
        let cfg = ModelConfig {
            rank: 3,
            arm_width: 1,
            lambdas: Lambdas::uniform(1e-4),
            use_bias: true,
            init_low: 0.1,
            init_high: 0.5,
        };
        let mut model = NsftModel::init(dims, &cfg, seed + 100).unwrap();
        let train_cfg = TrainConfig {
            max_epochs: 2000,
            tol: 1e-6,
            shuffle_seed: seed + 200,
            gradient_mode: mode,
            scheme: UpdateScheme::Batch,
            ..TrainConfig::default()
        };
        let report = match train(&mut model, &parts, &train_cfg) {
            Ok(r) => r,
            Err(e) => return Some(Err(format!("{mode}: {e}"))),
        };
        let test = nsft::metrics::evaluate(&model, &parts.test).unwrap();
        let ratio = test.rmse / mean;
        ok &= ratio <= 0.01;
        notes.push(format!(
            "{mode} rmse/mean {:.3}% ({} epochs)",
            100.0 * ratio,
            report.epochs.len()
        ));
    }
    let msg = notes.join(", ");
    Some(if ok { Ok(msg) } else { Err(msg) })
}

fn c7_metrics() -> Option<Outcome> {
    let e = from_residuals(&[1.0, 3.0]).unwrap();
    if !(rel_close(e.mae, 2.0, 1e-12, 0.0) && rel_close(e.rmse, 5f64.sqrt(), 1e-12, 0.0)) {
        return Some(Err(format!("{{1,3}} gave ({}, {})", e.mae, e.rmse)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(707);
    for n in 0..1000 {
        let len = rng.random_range(1..500);
        let scale = 10f64.powi(rng.random_range(-6..7));
        let mut res: Vec<f64> = (0..len)
            .map(|_| rng.random_range(-1.0..1.0) * scale)
            .collect();
        let a = from_residuals(&res).unwrap();
        if a.mae > a.rmse {
            return Some(Err(format!("set {n}: mae {} > rmse {}", a.mae, a.rmse)));
        }
        res.shuffle(&mut rng);
        let b = from_residuals(&res).unwrap();
        if a.mae.to_bits() != b.mae.to_bits() || a.rmse.to_bits() != b.rmse.to_bits() {
            return Some(Err(format!("set {n}: permutation changed the result")));
        }
    }
    Some(Ok(
        "(2, sqrt 5) exact; 1000 sets ordered and permutation invariant".into(),
    ))
}

fn nsft(dir: &Path, args: &[&str]) -> Result<(), String> {
    let out = Command::new(env!("CARGO_BIN_EXE_nsft"))
        .current_dir(dir)
        .args(args)
        .output()
        .map_err(|e| e.to_string())?;
    if out.status.success() {
        Ok(())
    } else {
        Err(format!(
            "{args:?}: {}",
            String::from_utf8_lossy(&out.stderr)
        ))
    }
}

fn cli_run(dir: &Path) -> Result<Files, String> {
    std::fs::write(
        dir.join("run.toml"),
        "rank = 3\narm_width = 1\nmax_epochs = 150\ngradient_mode = \"full\"\n",
    )
    .map_err(|e| e.to_string())?;
    nsft(
        dir,
        &[
            "synth", "--dims", "12,10,8", "--seed", "9", "--out", "data.txt",
        ],
    )?;
    nsft(
        dir,
        &[
            "train",
            "--input",
            "data.txt",
            "--config",
            "run.toml",
            "--seed-split",
            "4",
            "--seed-init",
            "5",
            "--model",
            "model.txt",
            "--report",
            "report.jsonl",
        ],
    )?;
    nsft(
        dir,
        &[
            "evaluate",
            "--model",
            "model.txt",
            "--input",
            "data.txt",
            "--part",
            "test",
            "--seed-split",
            "4",
            "--out",
            "metrics.json",
        ],
    )?;
    ["model.txt", "report.jsonl", "metrics.json"]
        .iter()
        .map(|f| std::fs::read(dir.join(f)).map_err(|e| e.to_string()))
        .collect()
}

fn c8_determinism() -> Option<Outcome> {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let run = || -> Result<(Files, Files), String> { Ok((cli_run(a.path())?, cli_run(b.path())?)) };
    match run() {
        Err(e) => Some(Err(e)),
        Ok((x, y)) if x == y => Some(Ok(format!(
            "model, report, metrics byte-identical ({} bytes)",
            x.iter().map(Vec::len).sum::<usize>()
        ))),
        Ok(_) => Some(Err("outputs differ between runs".into())),
    }
}

/// Runs only when `NSFT_WSDREAM_RT` names the raw response-time file.
fn c9_wsdream() -> Option<Outcome> {
    let path = std::env::var_os("NSFT_WSDREAM_RT")?;
    let dims = Dims::new(142, 4500, 64).unwrap();
    let file = std::fs::File::open(&path).map_err(|e| e.to_string());
    let ing = match file
        .and_then(|f| parse_wsdream(std::io::BufReader::new(f), dims).map_err(|e| e.to_string()))
    {
        Ok(i) => i,
        Err(e) => return Some(Err(e)),
    };
    let raw = 100.0 * ing.raw_density();
    if ing.records != 30_287_611 || (raw - 74.06).abs() > 0.1 {
        return Some(Err(format!(
            "{} records, raw density {raw:.3}%",
            ing.records
        )));
    }
    let parts = split(&ing.tensor, SplitRatios::parse("2:2:6").unwrap(), 0).unwrap();
    let mut model = NsftModel::init(
        dims,
        &ModelConfig {
            lambdas: Lambdas::uniform(1e-4),
            ..ModelConfig::default()
        },
        1,
    )
    .unwrap();
    let report = match train(&mut model, &parts, &TrainConfig::default()) {
        Ok(r) => r,
        Err(e) => return Some(Err(format!("training: {e}"))),
    };
    let test = nsft::metrics::evaluate(&model, &parts.test).unwrap();
    let near = (test.mae / 1.4293 - 1.0).abs() <= 0.15 && (test.rmse / 3.0704 - 1.0).abs() <= 0.15;
    Some(Ok(format!(
        "{} records, raw density {raw:.3}%, stop {:?} after {} epochs, test mae {:.4} rmse {:.4} (reference band {})",
        ing.records,
        report.stop_reason,
        report.epochs.len(),
        test.mae,
        test.rmse,
        if near { "met" } else { "missed" }
    )))
}

fn main() {
    let criteria = [
        Criterion {
            id: "1",
            name: "dense-oracle prediction",
            budget: Duration::from_secs(5),
            run: c1_dense_oracle,
        },
        Criterion {
            id: "2",
            name: "CP degeneration",
            budget: Duration::from_secs(5),
            run: c2_cp_degeneration,
        },
        Criterion {
            id: "3",
            name: "support set",
            budget: Duration::from_secs(1),
            run: c3_support,
        },
        Criterion {
            id: "4",
            name: "gradient check",
            budget: Duration::from_secs(10),
            run: c4_gradients,
        },
        Criterion {
            id: "5",
            name: "update algebra",
            budget: Duration::from_secs(30),
            run: c5_update_algebra,
        },
        Criterion {
            id: "6",
            name: "synthetic recovery",
            budget: Duration::from_secs(120),
            run: c6_recovery,
        },
        Criterion {
            id: "7",
            name: "metric identities",
            budget: Duration::from_secs(5),
            run: c7_metrics,
        },
        Criterion {
            id: "8",
            name: "CLI determinism",
            budget: Duration::from_secs(60),
            run: c8_determinism,
        },
        Criterion {
            id: "9",
            name: "WS-DREAM ingestion",
            budget: Duration::MAX,
            run: c9_wsdream,
        },
    ];
    let mut failed = 0;
    for c in &criteria {
        let start = Instant::now();
        let outcome = (c.run)();
        let took = start.elapsed();
        let line = match outcome {
            None => format!("SKIP [{}] {}: NSFT_WSDREAM_RT not set", c.id, c.name),
            Some(Ok(msg)) if took <= c.budget => {
                format!("PASS [{}] {} ({:.2?}): {msg}", c.id, c.name, took)
            }
            Some(Ok(msg)) => {
                failed += 1;
                format!(
                    "FAIL [{}] {} ({:.2?} over {:?} budget): {msg}",
                    c.id, c.name, took, c.budget
                )
            }
            Some(Err(msg)) => {
                failed += 1;
                format!("FAIL [{}] {} ({:.2?}): {msg}", c.id, c.name, took)
            }
        };
        println!("{line}");
    }
    if failed > 0 {
        eprintln!("{failed} acceptance criteria failed");
        std::process::exit(1);
    }
}
