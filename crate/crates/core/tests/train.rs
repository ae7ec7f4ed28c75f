use ttt_core::data::*;
use ttt_core::model::{ForecastModel, ModelConfig};
use ttt_core::numerics::{Matrix, RngState};
use ttt_core::stats::hour_dow;
use ttt_core::synth::{generate, ScenarioConfig};
use ttt_core::text::{extract_features, FeatureOptions, KeywordLexicon, TermFreqMode};
use ttt_core::train::*;

struct Tiny {
    traffic: TrafficTensor,
    tweets: TweetFeatureTensor,
    layout: Layout,
    split: SplitSpec,
}

fn tiny() -> Tiny {
    let mut cfg = ScenarioConfig::standard(4);
    cfg.segments = 2;
    cfg.days = 9;
    let sc = generate(&cfg).unwrap();
    let grid = sc.traffic.grid;
    let opts = FeatureOptions {
        mode: TermFreqMode::Raw,
        ..FeatureOptions::default()
    };
    let fs = extract_features(&sc.tweets, &sc.centers, None, &grid, &KeywordLexicon::default_accident(), &KeywordLexicon::default_culture(), &opts).unwrap();
    let ids = sc.traffic.segment_ids.clone();
    Tiny {
        tweets: TweetFeatureTensor::from_series(grid, &ids, &fs.series).unwrap(),
        layout: Layout::full(ids),
        traffic: sc.traffic,
        split: SplitSpec::from_days(7, 1, 1),
    }
}

fn quick_train() -> TrainConfig {
    TrainConfig {
        epochs: 3,
        patience: 3,
        batch_size: 16,
        train_stride: 16,
        val_stride: 8,
        ..TrainConfig::default()
    }
}

fn toy_model(t: &Tiny) -> ModelConfig {
    ModelConfig {
        input_len: 12,
        horizon: 12,
        ..ModelConfig::toy(t.layout.segments(), t.layout.features_per_segment())
    }
}

fn dataset(t: &Tiny) -> Dataset {
    Dataset::build(&t.traffic, &t.tweets, t.layout.clone(), WindowSpec::default(), t.split.train.clone()).unwrap()
}

#[test]
fn metrics_match_brute_force() {
    let mut rng = RngState::new(1);
    let floor = 1e-3;
    let windows: Vec<(Matrix, Matrix)> = (0..7)
        .map(|_| {
            let mut truth = rng.uniform_matrix(12, 5, 1.0).map(f64::abs);
            truth.set(0, 0, 0.0);
            (rng.uniform_matrix(12, 5, 1.0).map(f64::abs), truth)
        })
        .collect();
    let mut acc = MetricsAccumulator::new(12, floor).unwrap();
    for (p, y) in &windows {
        acc.add(p, y).unwrap();
    }
    let r = acc.finish();
    let brute = |rows: &[usize]| {
        let (mut se, mut ae, mut ape, mut n) = (0.0, 0.0, 0.0, 0.0);
        for (p, y) in &windows {
            for &row in rows {
                for m in 0..5 {
                    let e = p.get(row, m) - y.get(row, m);
                    se += e * e;
                    ae += e.abs();
                    ape += e.abs() / y.get(row, m).abs().max(floor);
                    n += 1.0;
                }
            }
        }
        (se / n, ae / n, 100.0 * ape / n)
    };
    let all: Vec<usize> = (0..12).collect();
    let (mse, mae, mape) = brute(&all);
    assert!((r.overall.mse - mse).abs() < 1e-12);
    assert!((r.overall.mae - mae).abs() < 1e-12);
    assert!((r.overall.mape - mape).abs() < 1e-12 * mape.max(1.0));
    for h in &r.per_horizon {
        let (mse, mae, mape) = brute(&[h.step - 1]);
        assert!((h.metrics.mse - mse).abs() < 1e-12);
        assert!((h.metrics.mae - mae).abs() < 1e-12);
        assert!((h.metrics.mape - mape).abs() < 1e-12 * mape.max(1.0));
        assert_eq!(h.minutes, 15 * h.step);
    }
    assert_eq!(r.windows, 7);
}

#[test]
fn oracle_stub_scores_zero() {
    let t = tiny();
    let ds = dataset(&t);
    let r = evaluate(&OracleStub, &ds, &t.split.test, 1, DEFAULT_MAPE_FLOOR).unwrap();
    assert_eq!(r.overall, Metrics { mse: 0.0, mae: 0.0, mape: 0.0 });
    assert_eq!(r.windows, 96 - 24 + 1);
}

#[test]
fn persistence_repeats_last_observation() {
    let t = tiny();
    let ds = dataset(&t);
    let s = ds.sample(100);
    let f = Persistence { horizon: 12 }.forecast(&s).unwrap();
    for r in 0..12 {
        for m in 0..2 {
            assert_eq!(f.get(r, m), t.traffic.tps(111, m));
        }
    }
}

#[test]
fn seasonal_mean_matches_group_by() {
    let t = tiny();
    let ds = dataset(&t);
    let sm = SeasonalMean::fit(&ds, &t.split.train).unwrap();
    let s = ds.sample(t.split.test.start);
    let f = sm.forecast(&s).unwrap();
    for (r, &ts) in s.target_ts.iter().enumerate() {
        let key = hour_dow(ts);
        for m in 0..2 {
            // Mean over training hours with the same (hour, weekday) of the
            // hourly means of the four bins.
            let mut vals = Vec::new();
            for hstart in (t.split.train.start..t.split.train.end).step_by(4) {
                if hour_dow(t.traffic.grid.bin_start(hstart)) == key {
                    let h: f64 = (0..4).map(|b| t.traffic.tps(hstart + b, m)).sum::<f64>() / 4.0;
                    vals.push(h);
                }
            }
            let want = vals.iter().sum::<f64>() / vals.len() as f64;
            assert!((f.get(r, m) - want).abs() < 1e-12);
        }
    }
}

#[test]
fn training_is_deterministic_and_keeps_best_epoch() {
    let t = tiny();
    let ds = dataset(&t);
    let model = ForecastModel::new(toy_model(&t)).unwrap();
    let cfg = quick_train();
    let a = train(&model, &ds, &t.split, &cfg).unwrap();
    let b = train(&model, &ds, &t.split, &cfg).unwrap();
    assert_eq!(a.history, b.history);
    assert_eq!(a.model.params(), b.model.params());

    let best = a.history.iter().map(|h| h.val_mse).fold(f64::INFINITY, f64::min);
    assert_eq!(a.history[a.best_epoch - 1].val_mse, best);
    let val = evaluate(&a.model, &ds, &t.split.validation, cfg.val_stride, cfg.mape_floor).unwrap();
    assert!((val.overall.mse - best).abs() < 1e-15);
    assert!(a.history.last().unwrap().train_mse < a.history[0].train_mse);
}

#[test]
fn zero_learning_rate_leaves_parameters() {
    let t = tiny();
    let ds = dataset(&t);
    let model = ForecastModel::new(toy_model(&t)).unwrap();
    let cfg = TrainConfig {
        learning_rate: 0.0,
        epochs: 1,
        ..quick_train()
    };
    let out = train(&model, &ds, &t.split, &cfg).unwrap();
    assert_eq!(out.model.params(), model.params());
}

#[test]
fn divergence_reports_epoch() {
    let t = tiny();
    let ds = dataset(&t);
    let model = ForecastModel::new(toy_model(&t)).unwrap();
    let cfg = TrainConfig {
        learning_rate: 1e300,
        ..quick_train()
    };
    match train(&model, &ds, &t.split, &cfg) {
        Err(ttt_core::Error::TrainingDiverged { epoch }) => assert!(epoch >= 1),
        other => panic!("expected divergence, got {:?}", other.map(|o| o.history)),
    }
}

#[test]
fn ablation_variants_train_with_reduced_inputs() {
    let t = tiny();
    let base = toy_model(&t);
    let cfg = TrainConfig {
        epochs: 1,
        ..quick_train()
    };
    for v in AblationVariant::ALL {
        let r = ablate(v, &t.traffic, &t.tweets, &t.layout, WindowSpec::default(), &t.split, &base, &cfg, 8).unwrap();
        let want = if v.dropped_channel().is_some() { 5 } else { 6 };
        assert_eq!(r.features, want);
        assert_eq!(r.model.config().time_encoder, v != AblationVariant::DropTimeEncoder);
        assert!(r.report.overall.mse.is_finite());
    }
}

#[test]
fn invalid_configs_are_rejected() {
    let bad = [
        TrainConfig { learning_rate: -1.0, ..TrainConfig::default() },
        TrainConfig { batch_size: 0, ..TrainConfig::default() },
        TrainConfig { mape_floor: 0.0, ..TrainConfig::default() },
    ];
    for c in bad {
        assert_eq!(c.validate().unwrap_err().kind(), "config");
    }
    let json = r#"{"learning_rate": 0.01, "momentum": 0.9}"#;
    assert!(serde_json::from_str::<TrainConfig>(json).is_err());
}
