//! One PASS/FAIL line per acceptance criterion. `ACCEPTANCE_ONLY=4,7` runs a subset.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, ExitCode};
use std::time::Instant;

use nalgebra::DMatrix;
use sha2::{Digest, Sha256};
use ttt_core::data::*;
use ttt_core::io::read_json;
use ttt_core::model::{load_checkpoint, save_checkpoint, ForecastModel, ModelConfig};
use ttt_core::numerics::{Matrix, RngState};
use ttt_core::stats::*;
use ttt_core::synth::{generate, Scenario, ScenarioConfig};
use ttt_core::text::{extract_features, truncated_svd, FeatureOptions, KeywordLexicon};
use ttt_core::train::*;

type Outcome = Result<String, String>;

fn check(ok: bool, detail: String) -> Outcome {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn repo(rel: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../..").join(rel)
}

fn config<T: serde::de::DeserializeOwned>(rel: &str) -> T {
    read_json(&repo(rel)).unwrap_or_else(|e| panic!("{rel}: {e}"))
}

fn random_sample(cfg: &ModelConfig, rng: &mut RngState) -> WindowedSample {
    let start = 1_590_969_600 + 900 * rng.below(5000) as i64;
    let input_ts: Vec<i64> = (0..cfg.input_len as i64).map(|i| start + 900 * i).collect();
    let target_ts: Vec<i64> = (0..cfg.horizon as i64).map(|i| start + 900 * (cfg.input_len as i64 + i)).collect();
    let target = Matrix::from_vec(cfg.horizon, cfg.segments, (0..cfg.horizon * cfg.segments).map(|_| rng.uniform()).collect()).unwrap();
    WindowedSample {
        offset: 0,
        input: rng.normal_matrix(cfg.input_len, cfg.input_width()),
        input_time: calendar_matrix(&input_ts).unwrap(),
        target,
        target_time: calendar_matrix(&target_ts).unwrap(),
        last_tps: (0..cfg.segments).map(|_| rng.uniform()).collect(),
        input_ts,
        target_ts,
    }
}

fn toy_config() -> ModelConfig {
    let mut cfg: ModelConfig = config("configs/toy_model.json");
    cfg.segments = 3;
    cfg.features = 6;
    cfg.seed = 7;
    cfg
}

// 1. Central differences on every parameter entry, scored by plain
// relative error. Entries whose gradient is below the difference noise
// floor are compared absolutely.
fn gradients() -> Outcome {
    let cfg = toy_config();
    let model = ForecastModel::new(cfg.clone()).map_err(|e| e.to_string())?;
    let sample = random_sample(&cfg, &mut RngState::new(1));
    let (mut g, _, loss) = model.loss_graph(&sample).map_err(|e| e.to_string())?;
    let analytic = g.backward(loss).map_err(|e| e.to_string())?;
    let step = 1e-5;
    let noise_floor = 1e-7;
    let (mut worst_rel, mut worst_abs, mut entries) = (0.0f64, 0.0f64, 0usize);
    for (pid, grad) in &analytic.params {
        let original = g.value(*pid).clone();
        for k in 0..original.data().len() {
            let mut f = [0.0; 2];
            for (i, sign) in [1.0, -1.0].into_iter().enumerate() {
                let mut p = original.clone();
                p.data_mut()[k] += sign * step;
                g.set_leaf_value(*pid, p).unwrap();
                g.recompute().unwrap();
                f[i] = g.value(loss).get(0, 0);
            }
            let numeric = (f[0] - f[1]) / (2.0 * step);
            let a = grad.data()[k];
            let scale = a.abs().max(numeric.abs());
            if scale > noise_floor {
                worst_rel = worst_rel.max((a - numeric).abs() / scale);
            } else {
                worst_abs = worst_abs.max((a - numeric).abs());
            }
            entries += 1;
        }
        g.set_leaf_value(*pid, original).unwrap();
    }
    check(
        worst_rel < 1e-4 && worst_abs < 1e-4 * noise_floor,
        format!("{entries} entries, max relative error {worst_rel:.2e}, max abs error below {noise_floor:.0e}: {worst_abs:.2e}"),
    )
}

// 2. Rewriting prefix rows p.. must not move decoder outputs 0..p at all.
fn causality() -> Outcome {
    let cfg = toy_config();
    let model = ForecastModel::new(cfg.clone()).unwrap();
    let mut rng = RngState::new(2);
    for trial in 0..100 {
        let s = random_sample(&cfg, &mut rng);
        let memory = model.encoder_forward(&s.input, &s.input_time).unwrap();
        let h = cfg.horizon;
        let prefix = Matrix::from_vec(h, 3, (0..h * 3).map(|_| rng.uniform()).collect()).unwrap();
        let p = 1 + rng.below(h - 1);
        let mut changed = prefix.clone();
        for r in p..h {
            for c in 0..3 {
                changed.set(r, c, rng.uniform());
            }
        }
        let a = model.decoder_outputs(&memory, &prefix, &s.target_time).unwrap();
        let b = model.decoder_outputs(&memory, &changed, &s.target_time).unwrap();
        for r in 0..p {
            if a.row(r).iter().zip(b.row(r)).any(|(x, y)| x.to_bits() != y.to_bits()) {
                return Err(format!("trial {trial}: output {r} moved after editing rows {p}.."));
            }
        }
    }
    Ok("100 trials, earlier outputs bit-identical".into())
}

fn bucket(ts: i64) -> (usize, usize) {
    let days = ts.div_euclid(86_400);
    ((ts.rem_euclid(86_400) / 3600) as usize, ((days + 3).rem_euclid(7)) as usize)
}

fn worst_bucket_mean(s: &HourlySeries) -> f64 {
    let r = detrend(s, &compute_trend(s).unwrap()).unwrap();
    let mut acc: BTreeMap<(usize, usize), (f64, usize)> = BTreeMap::new();
    for (i, v) in r.values.iter().enumerate() {
        let e = acc.entry(bucket(r.timestamp(i))).or_default();
        e.0 += v;
        e.1 += 1;
    }
    acc.values().map(|(s, n)| (s / *n as f64).abs()).fold(0.0, f64::max)
}

fn tweet_counts(sc: &Scenario) -> Vec<f64> {
    let grid = sc.traffic.grid;
    let mut counts = vec![0.0; grid.bins];
    for t in &sc.tweets {
        counts[grid.bin_of(t.ts).unwrap()] += 1.0;
    }
    counts
}

// 3. Every bucket of every detrended series averages to zero.
fn detrend_property() -> Outcome {
    let mut worst = 0.0f64;
    let mut n = 0;
    for seed in 0..4 {
        for mut cfg in [ScenarioConfig::standard(seed), ScenarioConfig::accident_planted(seed)] {
            cfg.segments = 3;
            cfg.days = 15 + 4 * seed as usize;
            let sc = generate(&cfg).unwrap();
            let grid = sc.traffic.grid;
            for bins in [sc.traffic.mean_tps(), tweet_counts(&sc), sc.traffic.tps_series(1)] {
                worst = worst.max(worst_bucket_mean(&aggregate_hourly(&grid, &bins).unwrap()));
                n += 1;
            }
        }
    }
    check(worst < 1e-9, format!("{n} series, worst bucket mean {worst:.2e}"))
}

// 4. Detrended network TPS against detrended hourly tweet counts.
fn correlation_recovery() -> Outcome {
    let base: ScenarioConfig = config("configs/correlation.json");
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 0..3 {
        let sc = generate(&ScenarioConfig { seed, ..base.clone() }).unwrap();
        let grid = sc.traffic.grid;
        let v = aggregate_hourly(&grid, &sc.traffic.mean_tps()).unwrap();
        let c = aggregate_hourly(&grid, &tweet_counts(&sc)).unwrap();
        let vd = detrend(&v, &compute_trend(&v).unwrap()).unwrap();
        let cd = detrend(&c, &compute_trend(&c).unwrap()).unwrap();
        let cc = cross_correlation(&vd.values, &cd.values, 24).unwrap();
        let lag = base.planted_lag_hours;
        let seed_ok = (cc[lag] - base.target_correlation).abs() < 0.1 && cc[..=lag].iter().all(|&r| r < 0.0);
        ok &= seed_ok;
        let max_early = cc[..=lag].iter().copied().fold(f64::NEG_INFINITY, f64::max);
        lines.push(format!("seed {seed}: r({lag})={:.3}, max over 0..={lag} {max_early:.3}", cc[lag]));
    }
    check(ok, lines.join("; "))
}

fn sf_oracle(t: f64, dof: f64) -> f64 {
    let f = |th: f64| th.cos().powf(dof - 1.0);
    let half = std::f64::consts::FRAC_PI_2;
    let lo = (t / dof.sqrt()).atan();
    integrate(&f, lo, half, 1e-14) / integrate(&f, -half, half, 1e-14)
}

fn integrate(f: &dyn Fn(f64) -> f64, a: f64, b: f64, tol: f64) -> f64 {
    fn simpson(f: &dyn Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        (b - a) / 6.0 * (f(a) + 4.0 * f((a + b) / 2.0) + f(b))
    }
    fn rec(f: &dyn Fn(f64) -> f64, a: f64, b: f64, whole: f64, tol: f64, depth: u32) -> f64 {
        let m = (a + b) / 2.0;
        let (l, r) = (simpson(f, a, m), simpson(f, m, b));
        if depth == 0 || (l + r - whole).abs() <= 15.0 * tol {
            return l + r + (l + r - whole) / 15.0;
        }
        rec(f, a, m, l, tol / 2.0, depth - 1) + rec(f, m, b, r, tol / 2.0, depth - 1)
    }
    rec(f, a, b, simpson(f, a, b), tol, 40)
}

// 5. Exact, noisy and p-value checks of the lagged regression.
fn ols() -> Outcome {
    let mut rng = RngState::new(5);
    let n = 200;
    let c: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
    let mut v = vec![0.3; n];
    let truth = [0.05, 0.8809, -0.0640, -0.0844];
    for t in 1..n {
        v[t] = truth[0] + truth[1] * v[t - 1] + truth[2] * c[t] + truth[3] * c[t - 1];
    }
    let (y, x) = lagged_design(&v, &c).unwrap();
    let r = ols_fit(&y, &x).unwrap();
    let exact = r.coefficients.iter().zip(truth).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);

    let mut worst_se = 0.0f64;
    for seed in 0..10 {
        let mut rng = RngState::new(100 + seed);
        let n = 2000;
        let c: Vec<f64> = (0..n).map(|_| rng.normal()).collect();
        let mut v = vec![0.0; n];
        for t in 1..n {
            v[t] = 0.8809 * v[t - 1] - 0.0640 * c[t] - 0.0844 * c[t - 1] + 0.1 * rng.normal();
        }
        let (y, x) = lagged_design(&v, &c).unwrap();
        let r = ols_fit(&y, &x).unwrap();
        for (i, want) in [0.0, 0.8809, -0.0640, -0.0844].iter().enumerate() {
            worst_se = worst_se.max((r.coefficients[i] - want).abs() / r.std_errors[i]);
        }
    }

    let mut worst_p = 0.0f64;
    for &dof in &[1.0, 2.0, 3.5, 10.0, 57.0, 496.0, 2155.0] {
        for &t in &[-4.0, -1.3, 0.0, 0.25, 1.0, 2.2, 6.0] {
            worst_p = worst_p.max((two_sided_p(t, dof) - 2.0 * sf_oracle(f64::abs(t), dof)).abs());
        }
    }
    check(
        exact < 1e-10 && worst_se < 3.0 && worst_p < 1e-6,
        format!("noiseless error {exact:.1e}, worst |error|/SE {worst_se:.2} over 10 seeds, p-value error {worst_p:.1e}"),
    )
}

fn dense(m: &Matrix) -> DMatrix<f64> {
    DMatrix::from_row_slice(m.rows(), m.cols(), m.data())
}

// 6. Randomized SVD against a dense oracle.
fn svd() -> Outcome {
    let mut rng = RngState::new(6);
    let mut worst_ratio = 0.0f64;
    for _ in 0..20 {
        let rows = 100 + rng.below(201);
        let cols = 100 + rng.below(201);
        let density = 0.02 + 0.08 * rng.uniform();
        let mut a = Matrix::zeros(rows, cols);
        for r in 0..rows {
            for c in 0..cols {
                if rng.uniform() < density {
                    a.set(r, c, (1 + rng.below(5)) as f64);
                }
            }
        }
        let f = truncated_svd(&a, 10, &mut rng).unwrap();
        let err = a.sub(&f.reconstruct()).unwrap().data().iter().map(|v| v * v).sum::<f64>().sqrt();
        let mut s: Vec<f64> = dense(&a).singular_values().iter().copied().collect();
        s.sort_by(|x, y| y.partial_cmp(x).unwrap());
        let optimal = s[10..].iter().map(|v| v * v).sum::<f64>().sqrt();
        worst_ratio = worst_ratio.max(err / optimal);
    }
    let mut worst_exact = 0.0f64;
    for trial in 0..5 {
        let rank = 3 + trial;
        let (u, w) = (rng.normal_matrix(150, rank), rng.normal_matrix(rank, 120));
        let a = ttt_core::numerics::matmul(&u, &w).unwrap();
        let f = truncated_svd(&a, 10, &mut rng).unwrap();
        let err = a.sub(&f.reconstruct()).unwrap().data().iter().fold(0.0f64, |m, v| m.max(v.abs()));
        worst_exact = worst_exact.max(err);
    }
    check(
        worst_ratio <= 1.05 && worst_exact < 1e-8,
        format!("worst error / optimal {worst_ratio:.4} over 20 matrices, exact-rank max error {worst_exact:.1e}"),
    )
}

struct Prepared {
    traffic: TrafficTensor,
    tweets: TweetFeatureTensor,
    layout: Layout,
    split: SplitSpec,
}

fn prepare(cfg: &ScenarioConfig) -> Prepared {
    let sc = generate(cfg).unwrap();
    let grid = sc.traffic.grid;
    let fs = extract_features(
        &sc.tweets,
        &sc.centers,
        None,
        &grid,
        &KeywordLexicon::default_accident(),
        &KeywordLexicon::default_culture(),
        &FeatureOptions { seed: cfg.seed, ..FeatureOptions::default() },
    )
    .unwrap();
    let ids = sc.traffic.segment_ids.clone();
    Prepared {
        tweets: TweetFeatureTensor::from_series(grid, &ids, &fs.series).unwrap(),
        layout: Layout::full(ids),
        traffic: sc.traffic,
        split: SplitSpec::from_days(60, 15, 15),
    }
}

fn experiment_configs(seed: u64) -> (ModelConfig, TrainConfig) {
    let mut model: ModelConfig = config("configs/model.json");
    let mut train: TrainConfig = config("configs/train.json");
    model.seed = seed;
    train.seed = seed;
    (model, train)
}

// 7. Trained model vs persistence and seasonal mean at step 12.
fn forecasting() -> Outcome {
    let scenario: ScenarioConfig = config("configs/standard.json");
    let mut lines = Vec::new();
    let mut ok = true;
    for seed in 0..3 {
        let p = prepare(&ScenarioConfig { seed, ..scenario.clone() });
        let (mut mc, tc) = experiment_configs(seed);
        mc.segments = p.layout.segments();
        mc.features = p.layout.features_per_segment();
        let ds = Dataset::build(&p.traffic, &p.tweets, p.layout.clone(), WindowSpec::default(), p.split.train.clone()).unwrap();
        let out = train(&ForecastModel::new(mc).unwrap(), &ds, &p.split, &tc).map_err(|e| e.to_string())?;
        let step12 = |f: &dyn Forecaster| evaluate(f, &ds, &p.split.test, 1, tc.mape_floor).unwrap().at_step(12).unwrap().mse;
        let model = step12(&out.model);
        let persistence = step12(&Persistence { horizon: 12 });
        let seasonal = step12(&SeasonalMean::fit(&ds, &p.split.train).unwrap());
        let seed_ok = model <= 0.8 * persistence && model <= seasonal;
        ok &= seed_ok;
        lines.push(format!(
            "seed {seed}: model {model:.5} persistence {persistence:.5} ({:+.1}%) seasonal {seasonal:.5}",
            100.0 * (model / persistence - 1.0)
        ));
    }
    check(ok, lines.join("; "))
}

// 8. Which tweet channel hurts most when removed.
fn ablation_direction() -> Outcome {
    let scenario: ScenarioConfig = config("configs/accident.json");
    let variants = [AblationVariant::DropTermFrequency, AblationVariant::DropAccident, AblationVariant::DropCulture];
    let mut wins = 0;
    let mut lines = Vec::new();
    for seed in 0..3 {
        let p = prepare(&ScenarioConfig { seed, ..scenario.clone() });
        let (mc, tc) = experiment_configs(seed);
        let mut mse = Vec::new();
        for v in variants {
            let r = ablate(v, &p.traffic, &p.tweets, &p.layout, WindowSpec::default(), &p.split, &mc, &tc, 1).map_err(|e| e.to_string())?;
            mse.push((v.name(), r.report.overall.mse));
        }
        let worst = mse.iter().copied().fold(("", f64::NEG_INFINITY), |a, b| if b.1 > a.1 { b } else { a });
        wins += (worst.0 == "drop_accident") as usize;
        let parts: Vec<String> = mse.iter().map(|(n, m)| format!("{n} {m:.5}")).collect();
        lines.push(format!("seed {seed}: {}", parts.join(", ")));
    }
    check(wins >= 2, format!("drop_accident worst in {wins}/3; {}", lines.join("; ")))
}

fn digest(p: &Path) -> String {
    Sha256::digest(fs::read(p).unwrap()).iter().map(|b| format!("{b:02x}")).collect()
}

/// Checksums of every file under `dir` except run manifests.
fn checksums(dir: &Path) -> BTreeMap<String, String> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if !p.file_name().unwrap().to_string_lossy().contains("run_manifest") {
                out.insert(p.strip_prefix(dir).unwrap().display().to_string(), digest(&p));
            }
        }
    }
    out
}

fn run_pipeline(root: &Path) -> Result<(), String> {
    let bin = env!("CARGO_BIN_EXE_ttt");
    let p = |rel: &str| root.join(rel).display().to_string();
    fs::create_dir_all(root).unwrap();
    fs::write(root.join("scenario.json"), r#"{"segments": 2, "days": 9, "seed": 3}"#).unwrap();
    fs::write(root.join("train.json"), r#"{"epochs": 2, "batch_size": 16, "train_stride": 32, "val_stride": 16}"#).unwrap();
    let toy = repo("configs/toy_model.json").display().to_string();
    let steps: Vec<Vec<String>> = vec![
        vec!["synth".into(), "--config".into(), p("scenario.json"), "--out".into(), p("data")],
        vec!["features".into(), "--tweets".into(), p("data/tweets.jsonl"), "--segments".into(), p("data/segments.csv"), "--traffic".into(), p("data/traffic.csv"), "--svd-k".into(), "8".into(), "--out".into(), p("data/features.csv")],
        vec!["features".into(), "--tweets".into(), p("data/tweets.jsonl"), "--segments".into(), p("data/segments.csv"), "--traffic".into(), p("data/traffic.csv"), "--term-freq-mode".into(), "raw".into(), "--out".into(), p("raw/features.csv")],
        vec!["correlate".into(), "--traffic".into(), p("data/traffic.csv"), "--features".into(), p("data/features.csv"), "--svg".into(), "--out".into(), p("corr")],
        vec!["train".into(), "--data".into(), p("data"), "--model-config".into(), toy.clone(), "--train-config".into(), p("train.json"), "--split".into(), "7,1,1".into(), "--test-stride".into(), "8".into(), "--out".into(), p("train")],
        vec!["evaluate".into(), "--data".into(), p("data"), "--checkpoint".into(), p("train/checkpoint.json"), "--test-stride".into(), "8".into(), "--out".into(), p("eval")],
        vec!["evaluate".into(), "--data".into(), p("data"), "--oracle-stub".into(), "--split".into(), "7,1,1".into(), "--out".into(), p("stub")],
        vec!["ablate".into(), "--data".into(), p("data"), "--model-config".into(), toy, "--train-config".into(), p("train.json"), "--split".into(), "7,1,1".into(), "--test-stride".into(), "8".into(), "--out".into(), p("ablate")],
    ];
    for args in steps {
        let out = Command::new(bin).args(&args).env_remove("FORECAST_SEED").output().unwrap();
        if !out.status.success() {
            return Err(format!("{} failed: {}", args[0], String::from_utf8_lossy(&out.stderr).trim()));
        }
    }
    Ok(())
}

// 9. Every command twice, identical bytes.
fn determinism() -> Outcome {
    let tmp = tempfile::TempDir::new().unwrap();
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    run_pipeline(&a)?;
    run_pipeline(&b)?;
    let (ca, cb) = (checksums(&a), checksums(&b));
    let differing: Vec<&String> = ca.keys().filter(|k| ca.get(*k) != cb.get(*k)).collect();
    check(
        differing.is_empty() && ca.len() == cb.len() && ca.len() > 20,
        format!("{} output files compared, {} differ {:?}", ca.len(), differing.len(), differing),
    )
}

// 10. Fuse/unfuse, checkpoint and metric round-trips.
fn round_trips() -> Outcome {
    let mut rng = RngState::new(10);
    let mut failures = Vec::new();
    for trial in 0..20 {
        let (m, n) = (1 + rng.below(6), 1 + rng.below(40));
        let grid = ttt_core::time::TimeGrid::new(1_583_107_200, n).unwrap();
        let ids: Vec<u32> = (0..m as u32).map(|i| 5 * i + 1).collect();
        let x: Vec<f64> = (0..n * m)
            .flat_map(|_| [rng.uniform(), rng.uniform_range(0.0, 200.0), rng.uniform_range(0.0, 70.0)])
            .collect();
        let c: Vec<f64> = (0..n * m)
            .flat_map(|_| [rng.normal(), rng.below(6) as f64, rng.below(3) as f64])
            .collect();
        let x = TrafficTensor::new(grid, ids.clone(), x).unwrap();
        let c = TweetFeatureTensor::new(grid, ids.clone(), c).unwrap();
        let layout = Layout::full(ids);
        let (x2, c2) = unfuse(&fuse(&x, &c, &layout).unwrap(), grid, &layout).unwrap();
        if x2 != x || c2 != c {
            failures.push(format!("fuse trial {trial}"));
        }
    }

    let cfg = toy_config();
    let model = ForecastModel::new(cfg.clone()).unwrap();
    let tmp = tempfile::TempDir::new().unwrap();
    let path = tmp.path().join("model.json");
    save_checkpoint(&path, &model, None).unwrap();
    let (back, _) = load_checkpoint(&path).unwrap();
    for _ in 0..10 {
        let s = random_sample(&cfg, &mut rng);
        let (a, b) = (model.predict(&s).unwrap(), back.predict(&s).unwrap());
        if a.data().iter().zip(b.data()).any(|(x, y)| x.to_bits() != y.to_bits()) {
            failures.push("checkpoint prediction".into());
        }
    }

    let floor = 1e-3;
    let windows: Vec<(Matrix, Matrix)> = (0..9)
        .map(|_| (rng.uniform_matrix(12, 4, 1.0).map(f64::abs), rng.uniform_matrix(12, 4, 1.0).map(f64::abs)))
        .collect();
    let mut acc = MetricsAccumulator::new(12, floor).unwrap();
    for (p, y) in &windows {
        acc.add(p, y).unwrap();
    }
    let r = acc.finish();
    let (mut se, mut ae, mut ape, mut cnt) = (0.0, 0.0, 0.0, 0.0);
    for (p, y) in &windows {
        for (a, b) in p.data().iter().zip(y.data()) {
            se += (a - b) * (a - b);
            ae += (a - b).abs();
            ape += (a - b).abs() / b.abs().max(floor);
            cnt += 1.0;
        }
    }
    let dm = [(r.overall.mse, se / cnt), (r.overall.mae, ae / cnt), (r.overall.mape, 100.0 * ape / cnt)]
        .iter()
        .map(|(a, b)| (a - b).abs() / b.abs().max(1.0))
        .fold(0.0, f64::max);
    if dm >= 1e-12 {
        failures.push(format!("metrics off by {dm:.1e}"));
    }
    check(failures.is_empty(), if failures.is_empty() { format!("fuse x20, checkpoint x10 bit-exact, metrics error {dm:.1e}") } else { failures.join(", ") })
}

fn main() -> ExitCode {
    let criteria: [(u32, &str, fn() -> Outcome); 10] = [
        (1, "gradient correctness", gradients),
        (2, "decoder causality", causality),
        (3, "detrend property", detrend_property),
        (4, "correlation recovery", correlation_recovery),
        (5, "OLS correctness", ols),
        (6, "truncated SVD", svd),
        (7, "end-to-end forecasting", forecasting),
        (8, "ablation direction", ablation_direction),
        (9, "CLI determinism", determinism),
        (10, "round-trips", round_trips),
    ];
    let only: Option<Vec<u32>> = std::env::var("ACCEPTANCE_ONLY")
        .ok()
        .map(|s| s.split(',').filter_map(|p| p.trim().parse().ok()).collect());
    let mut failed = 0;
    for (n, name, f) in criteria {
        if only.as_ref().is_some_and(|o| !o.contains(&n)) {
            continue;
        }
        let t = Instant::now();
        let result = std::panic::catch_unwind(f).unwrap_or_else(|e| {
            Err(e.downcast_ref::<String>().cloned().or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string())).unwrap_or_else(|| "panic".into()))
        });
        let secs = t.elapsed().as_secs_f64();
        match result {
            Ok(d) => println!("PASS criterion {n} ({name}, {secs:.1}s): {d}"),
            Err(d) => {
                failed += 1;
                println!("FAIL criterion {n} ({name}, {secs:.1}s): {d}");
            }
        }
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        ExitCode::FAILURE
    }
}
