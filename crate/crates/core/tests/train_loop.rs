use nsft::prelude::*;
use nsft::training::{train_epoch_with, StopReason};

fn fixture(dims: Dims, seed: u64) -> (SparseTensor, NsftModel) {
    let spec = SyntheticSpec::new(dims, 2, 1, seed);
    let truth = generate_ground_truth(&spec).unwrap();
    let data = sample_observations(&truth, &spec).unwrap();
    let cfg = ModelConfig {
        rank: 2,
        lambdas: Lambdas::uniform(1e-4),
        ..ModelConfig::default()
    };
    let model = NsftModel::init(dims, &cfg, seed + 1).unwrap();
    (data, model)
}

#[test]
fn sequential_and_parallel_epochs_agree_bitwise() {
    // enough entries to span several chunks
    let (data, model) = fixture(Dims::new(80, 60, 30).unwrap(), 3);
    assert!(data.len() > 2 * nsft::par::CHUNK);
    for mode in [GradientMode::Paper, GradientMode::Full] {
        let cfg = TrainConfig {
            gradient_mode: mode,
            ..TrainConfig::default()
        };
        let mut a = model.clone();
        let mut b = model.clone();
        for epoch in 1..=3 {
            let oa = train_epoch_with(&mut a, &data, epoch, &cfg, Execution::Sequential).unwrap();
            let ob = train_epoch_with(&mut b, &data, epoch, &cfg, Execution::Parallel).unwrap();
            assert_eq!(oa.to_bits(), ob.to_bits());
        }
        assert_eq!(a, b);
        let ea = evaluate_with(&a, &data, Execution::Sequential).unwrap();
        let eb = evaluate_with(&a, &data, Execution::Parallel).unwrap();
        assert_eq!(ea, eb);
    }
}

#[test]
fn zero_tolerance_runs_every_epoch() {
    let (data, mut model) = fixture(Dims::new(8, 7, 6).unwrap(), 5);
    let parts = split(&data, SplitRatios::parse("2:2:6").unwrap(), 0).unwrap();
    let cfg = TrainConfig {
        max_epochs: 7,
        tol: 0.0,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &parts, &cfg).unwrap();
    assert_eq!(report.epochs.len(), 7);
    assert_eq!(report.stop_reason, StopReason::MaxEpochs);
    assert_eq!(report.converged_at, None);
    let numbers: Vec<usize> = report.epochs.iter().map(|e| e.epoch).collect();
    assert_eq!(numbers, (1..=7).collect::<Vec<_>>());
}

#[test]
fn loose_tolerance_stops_at_second_epoch() {
    let (data, mut model) = fixture(Dims::new(8, 7, 6).unwrap(), 6);
    let parts = split(&data, SplitRatios::parse("2:2:6").unwrap(), 0).unwrap();
    let cfg = TrainConfig {
        tol: 1e9,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &parts, &cfg).unwrap();
    assert_eq!(report.stop_reason, StopReason::Tolerance);
    assert_eq!(report.converged_at, Some(2));
    assert_eq!(report.epochs.len(), 2);
}

#[test]
fn training_is_reproducible() {
    let (data, model) = fixture(Dims::new(10, 9, 8).unwrap(), 7);
    let parts = split(&data, SplitRatios::parse("1:2:7").unwrap(), 4).unwrap();
    for scheme in [UpdateScheme::Batch, UpdateScheme::Stochastic] {
        let cfg = TrainConfig {
            max_epochs: 20,
            shuffle_seed: 9,
            scheme,
            ..TrainConfig::default()
        };
        let (mut a, mut b) = (model.clone(), model.clone());
        let ra = train(&mut a, &parts, &cfg).unwrap();
        let rb = train(&mut b, &parts, &cfg).unwrap();
        assert_eq!(ra, rb);
        assert_eq!(a, b);
    }
}

#[test]
fn positive_tolerance_needs_validation_data() {
    let (data, mut model) = fixture(Dims::new(6, 5, 4).unwrap(), 8);
    let parts = DataSplit {
        train: data.clone(),
        valid: SparseTensor::empty(data.dims()),
        test: SparseTensor::empty(data.dims()),
    };
    let err = train(&mut model, &parts, &TrainConfig::default()).unwrap_err();
    assert_eq!(err.kind(), nsft::ErrorKind::Config);
    let cfg = TrainConfig {
        tol: 0.0,
        max_epochs: 3,
        ..TrainConfig::default()
    };
    let report = train(&mut model, &parts, &cfg).unwrap();
    assert!(report.epochs.iter().all(|e| e.valid_rmse.is_none()));
}

#[test]
fn training_reduces_validation_error() {
    let (data, mut model) = fixture(Dims::new(20, 15, 10).unwrap(), 10);
    let parts = split(&data, SplitRatios::parse("2:2:6").unwrap(), 1).unwrap();
    let before = evaluate(&model, &parts.valid).unwrap();
    let cfg = TrainConfig {
        max_epochs: 200,
        tol: 0.0,
        ..TrainConfig::default()
    };
    train(&mut model, &parts, &cfg).unwrap();
    let after = evaluate(&model, &parts.valid).unwrap();
    assert!(
        after.rmse < 0.2 * before.rmse,
        "{} -> {}",
        before.rmse,
        after.rmse
    );
}
