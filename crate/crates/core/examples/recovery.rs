//! Synthetic recovery run: fit an NSFT model to noiseless data drawn from a
//! known ground truth and report test accuracy.
//!
//! `cargo run --release -p nsft --example recovery -- [paper|full] [init_low] [init_high] [seed]`

use nsft::prelude::*;

fn main() -> Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let mode: GradientMode = args
        .first()
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or_default();
    let low: f64 = args.get(1).and_then(|s| s.parse().ok()).unwrap_or(0.1);
    let high: f64 = args.get(2).and_then(|s| s.parse().ok()).unwrap_or(0.5);
    let seed: u64 = args.get(3).and_then(|s| s.parse().ok()).unwrap_or(1);

    let dims = Dims::new(30, 25, 20)?;
    let spec = SyntheticSpec::new(dims, 3, 1, seed);
    let truth = generate_ground_truth(&spec)?;
    let data = sample_observations(&truth, &spec)?;
    let parts = split(&data, SplitRatios::parse("2:2:6")?, seed)?;
    let cfg = ModelConfig {
        rank: 3,
        arm_width: 1,
        lambdas: Lambdas::uniform(1e-4),
        use_bias: true,
        init_low: low,
        init_high: high,
    };
    let mut model = NsftModel::init(dims, &cfg, seed + 100)?;
    let train_cfg = TrainConfig {
        max_epochs: 2000,
        tol: 1e-6,
        shuffle_seed: seed + 200,
        gradient_mode: mode,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &parts, &train_cfg)?;
    for rec in report.epochs.iter().step_by(100) {
        println!(
            "epoch {:5} objective {:.6e} valid rmse {:.6e}",
            rec.epoch,
            rec.train_objective,
            rec.valid_rmse.unwrap_or(f64::NAN)
        );
    }
    let test = evaluate(&model, &parts.test)?;
    let mean = data.mean_value().unwrap_or(0.0);
    println!(
        "mode {mode} stop {:?} after {} epochs; test mae {:.6e} rmse {:.6e}; mean {:.4}; ratio {:.4e}",
        report.stop_reason,
        report.epochs.len(),
        test.mae,
        test.rmse,
        mean,
        test.rmse / mean
    );
    Ok(())
}
