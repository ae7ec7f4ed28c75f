use std::collections::HashMap;
use std::path::{Path, PathBuf};

use serde::Serialize;
use ttt_core::data::{Dataset, Layout, SplitSpec, TrafficTensor, TweetFeatureTensor, WindowSpec};
use ttt_core::io::{
    read_features_csv, read_json, read_segments_csv, read_site_map_csv, read_traffic_csv, read_tweets_jsonl, write_csv,
    write_features_csv, write_json, write_segments_csv, write_traffic_csv, write_tweets_jsonl,
};
use ttt_core::model::{load_checkpoint, save_checkpoint, ForecastModel, ModelConfig};
use ttt_core::stats::{
    aggregate_hourly, compute_trend, cross_correlation, detrend, lagged_design, ols_fit, pearson, LAGGED_TERMS,
};
use ttt_core::synth::{generate, ScenarioConfig};
use ttt_core::text::{extract_features, FeatureOptions, KeywordLexicon, TermFreqMode};
use ttt_core::time::{format_iso, parse_iso, TimeGrid, BIN_SECONDS};
use ttt_core::train::{
    evaluate as evaluate_on, train as fit, AblationVariant, EpochRecord, Forecaster, MetricsReport, OracleStub,
    Persistence, SeasonalMean, TrainConfig,
};
use ttt_core::Error;

use crate::report::{env_seed, line_chart, CliError, CliResult, Run};
use crate::{CorrelateArgs, EvaluateArgs, FeaturesArgs, Preset, SynthArgs, TermFreqArg, TrainArgs};

pub fn synth(a: &SynthArgs) -> CliResult<()> {
    let mut run = Run::start("synth");
    let mut cfg = match &a.config {
        Some(p) => {
            run.input(p);
            read_json::<ScenarioConfig>(p)?
        }
        None => match a.preset {
            Preset::Standard => ScenarioConfig::standard(0),
            Preset::Accident => ScenarioConfig::accident_planted(0),
        },
    };
    if let Some(s) = env_seed()? {
        cfg.seed = s;
    }
    run.seed = Some(cfg.seed);
    run.config("scenario", &cfg)?;
    let sc = generate(&cfg)?;
    let out = &a.out;
    write_traffic_csv(&run.output(&out.join("traffic.csv")), &sc.traffic)?;
    write_tweets_jsonl(&run.output(&out.join("tweets.jsonl")), &sc.tweets)?;
    write_segments_csv(&run.output(&out.join("segments.csv")), &sc.centers)?;
    write_json(&run.output(&out.join("manifest.json")), &sc.manifest)?;
    run.finish(&out.join("run_manifest.json"))
}

/// `dir/stem.csv` → `dir/stem_{suffix}`.
fn sibling(path: &Path, suffix: &str) -> PathBuf {
    let stem = path.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    path.with_file_name(format!("{stem}_{suffix}"))
}

pub fn features(a: &FeaturesArgs) -> CliResult<()> {
    let mut run = Run::start("features");
    run.input(&a.tweets);
    run.input(&a.segments);
    let centers = read_segments_csv(&a.segments)?;
    let tweets = read_tweets_jsonl(&a.tweets)?;
    let grid = match (&a.traffic, &a.start, &a.end) {
        (Some(t), _, _) => {
            run.input(t);
            read_traffic_csv(t)?.grid
        }
        (None, Some(s), Some(e)) => {
            let (s, e) = (parse_iso(s)?, parse_iso(e)?);
            if e <= s || (e - s) % BIN_SECONDS != 0 {
                return Err(CliError::Usage("--end must follow --start by a whole number of 15-minute bins".into()));
            }
            TimeGrid::new(s, ((e - s) / BIN_SECONDS) as usize)?
        }
        _ => return Err(CliError::Usage("give --traffic or both --start and --end".into())),
    };
    let (accident, culture) = match &a.lexicons {
        Some(dir) => {
            run.input(dir);
            KeywordLexicon::load_dir(dir)?
        }
        None => (KeywordLexicon::default_accident(), KeywordLexicon::default_culture()),
    };
    let site_map: Option<HashMap<String, u32>> = match &a.site_map {
        Some(p) => {
            run.input(p);
            Some(read_site_map_csv(p)?)
        }
        None => None,
    };
    let opts = FeatureOptions {
        min_count: a.min_count,
        svd_k: a.svd_k,
        radius_km: a.radius_km,
        mode: match a.term_freq_mode {
            TermFreqArg::Svd => TermFreqMode::Svd,
            TermFreqArg::Raw => TermFreqMode::Raw,
        },
        seed: env_seed()?.unwrap_or(a.seed),
    };
    run.seed = Some(opts.seed);
    run.config("features", &opts)?;
    run.config("grid", grid)?;
    let set = extract_features(&tweets, &centers, site_map.as_ref(), &grid, &accident, &culture, &opts)?;
    run.config("assigned_tweets", set.assigned)?;
    run.config("unassigned_tweets", set.unassigned)?;
    run.config("vocabulary", set.vocab_len)?;

    write_features_csv(&run.output(&a.out), &set.series)?;
    let rows = set.explained_variance.iter().enumerate().map(|(i, r)| {
        vec![(i + 1).to_string(), set.singular_values[i].to_string(), r.to_string()]
    });
    write_csv(
        &run.output(&sibling(&a.out, "explained_variance.csv")),
        &["k", "singular_value", "cumulative_ratio"],
        rows,
    )?;
    run.finish(&sibling(&a.out, "run_manifest.json"))
}

fn same_segments(traffic: &TrafficTensor, ids: &[u32], grid: &TimeGrid) -> CliResult<()> {
    if *grid != traffic.grid {
        return Err(Error::Alignment(format!(
            "feature grid {} ({} bins) differs from traffic grid {} ({} bins)",
            format_iso(grid.start),
            grid.bins,
            format_iso(traffic.grid.start),
            traffic.grid.bins
        ))
        .into());
    }
    let mut a = traffic.segment_ids.clone();
    let mut b = ids.to_vec();
    a.sort_unstable();
    b.sort_unstable();
    if a != b {
        return Err(Error::Alignment("feature and traffic files cover different segments".into()).into());
    }
    Ok(())
}

fn load_pair(traffic: &Path, features: &Path) -> CliResult<(TrafficTensor, TweetFeatureTensor)> {
    let x = read_traffic_csv(traffic)?;
    let series = read_features_csv(features)?;
    let ids: Vec<u32> = series.iter().map(|s| s.segment_id).collect();
    same_segments(&x, &ids, &series[0].grid)?;
    let c = TweetFeatureTensor::from_series(x.grid, &x.segment_ids, &series)?;
    Ok((x, c))
}

#[derive(Serialize)]
struct OlsTerm {
    coefficient: f64,
    std_error: f64,
    t_stat: f64,
    p_value: f64,
}

pub fn correlate(a: &CorrelateArgs) -> CliResult<()> {
    let mut run = Run::start("correlate");
    run.input(&a.traffic);
    run.input(&a.features);
    run.config("max_lag", a.max_lag)?;
    let (x, c) = load_pair(&a.traffic, &a.features)?;
    let grid = x.grid;
    let v_bins = x.mean_tps();
    let c_bins: Vec<f64> = (0..grid.bins)
        .map(|t| (0..x.segments()).map(|m| c.get(t, m, 0)).sum())
        .collect();
    let v = aggregate_hourly(&grid, &v_bins)?;
    let ch = aggregate_hourly(&grid, &c_bins)?;
    let vd = detrend(&v, &compute_trend(&v)?)?;
    let cd = detrend(&ch, &compute_trend(&ch)?)?;
    let lags = cross_correlation(&vd.values, &cd.values, a.max_lag)?;
    let (y, design) = lagged_design(&vd.values, &cd.values)?;
    let ols = ols_fit(&y, &design)?;

    let out = &a.out;
    let rows = (0..v.len()).map(|i| {
        vec![
            format_iso(v.timestamp(i)),
            v.values[i].to_string(),
            ch.values[i].to_string(),
            vd.values[i].to_string(),
            cd.values[i].to_string(),
        ]
    });
    write_csv(
        &run.output(&out.join("detrended.csv")),
        &["hour_start_iso8601", "tps", "term_freq", "tps_detrended", "term_freq_detrended"],
        rows,
    )?;
    write_csv(
        &run.output(&out.join("lag_correlation.csv")),
        &["lag_hours", "correlation"],
        lags.iter().enumerate().map(|(l, r)| vec![l.to_string(), r.to_string()]),
    )?;

    let mut doc = serde_json::Map::new();
    for (i, name) in LAGGED_TERMS.iter().enumerate() {
        let term = OlsTerm {
            coefficient: ols.coefficients[i],
            std_error: ols.std_errors[i],
            t_stat: ols.t_stats[i],
            p_value: ols.p_values[i],
        };
        doc.insert((*name).into(), serde_json::to_value(term).map_err(Error::from)?);
    }
    doc.insert("r_squared".into(), ols.r_squared.into());
    doc.insert("residual_variance".into(), ols.residual_variance.into());
    doc.insert("n".into(), ols.n.into());
    doc.insert("dof".into(), ols.dof.into());
    write_json(&run.output(&out.join("ols.json")), &doc)?;

    let (min_lag, min_corr) = lags
        .iter()
        .copied()
        .enumerate()
        .fold((0, f64::INFINITY), |best, (l, r)| if r < best.1 { (l, r) } else { best });
    let summary = serde_json::json!({
        "pearson_raw": pearson(&v.values, &ch.values)?,
        "pearson_detrended": lags[0],
        "min_lag_hours": min_lag,
        "min_correlation": min_corr,
        "hours": v.len(),
    });
    write_json(&run.output(&out.join("correlation_summary.json")), &summary)?;

    if a.svg {
        let svg = line_chart("Cross-correlation of detrended TPS and term frequency", "lag (hours)", &[("correlation", &lags)]);
        std::fs::write(run.output(&out.join("lag_correlation.svg")), svg)?;
        let scale = |s: &[f64]| {
            let sd = (s.iter().map(|x| x * x).sum::<f64>() / s.len() as f64).sqrt();
            s.iter().map(|x| if sd > 0.0 { x / sd } else { 0.0 }).collect::<Vec<_>>()
        };
        let (a1, b1) = (scale(&vd.values), scale(&cd.values));
        let svg = line_chart(
            "Detrended series (standardized)",
            "hour",
            &[("tps", &a1), ("term frequency", &b1)],
        );
        std::fs::write(run.output(&out.join("detrended.svg")), svg)?;
    }
    run.finish(&out.join("run_manifest.json"))
}

fn parse_split(s: &str) -> CliResult<SplitSpec> {
    let parts: Vec<usize> = s
        .split(',')
        .map(|p| p.trim().parse())
        .collect::<Result<_, _>>()
        .map_err(|_| CliError::Usage(format!("--split {s:?} must be three day counts like 60,15,15")))?;
    match parts[..] {
        [a, b, c] => Ok(SplitSpec::from_days(a, b, c)),
        _ => Err(CliError::Usage(format!("--split {s:?} must be three day counts like 60,15,15"))),
    }
}

struct Experiment {
    traffic: TrafficTensor,
    tweets: TweetFeatureTensor,
    layout: Layout,
    model: ModelConfig,
    train: TrainConfig,
}

fn load_experiment(a: &TrainArgs, run: &mut Run) -> CliResult<Experiment> {
    let (tp, fp) = (a.data.join("traffic.csv"), a.data.join("features.csv"));
    run.input(&tp);
    run.input(&fp);
    let mut model: ModelConfig = match &a.model_config {
        Some(p) => {
            run.input(p);
            read_json(p)?
        }
        None => ModelConfig::default(),
    };
    let mut train: TrainConfig = match &a.train_config {
        Some(p) => {
            run.input(p);
            read_json(p)?
        }
        None => TrainConfig::default(),
    };
    train.validate()?;
    if let Some(s) = env_seed()? {
        model.seed = s;
        train.seed = s;
    }
    let (traffic, tweets) = load_pair(&tp, &fp)?;
    let layout = Layout::full(traffic.segment_ids.clone());
    fill_dims(&mut model, &layout)?;
    model.validate()?;
    run.seed = Some(train.seed);
    run.config("model", &model)?;
    run.config("train", &train)?;
    run.config("split", &a.split)?;
    run.config("test_stride", a.test_stride)?;
    Ok(Experiment {
        traffic,
        tweets,
        layout,
        model,
        train,
    })
}

fn fill_dims(model: &mut ModelConfig, layout: &Layout) -> CliResult<()> {
    for (field, value, want) in [
        ("segments", &mut model.segments, layout.segments()),
        ("features", &mut model.features, layout.features_per_segment()),
    ] {
        if *value == 0 {
            *value = want;
        } else if *value != want {
            return Err(Error::Config(format!("model config has {field} = {value} but the data has {want}")).into());
        }
    }
    Ok(())
}

fn metrics_rows(name: &str, r: &MetricsReport) -> Vec<Vec<String>> {
    let mut rows: Vec<Vec<String>> = r
        .per_horizon
        .iter()
        .map(|h| {
            vec![
                name.to_string(),
                h.minutes.to_string(),
                h.metrics.mse.to_string(),
                h.metrics.mae.to_string(),
                h.metrics.mape.to_string(),
            ]
        })
        .collect();
    rows.push(vec![
        name.to_string(),
        "all".into(),
        r.overall.mse.to_string(),
        r.overall.mae.to_string(),
        r.overall.mape.to_string(),
    ]);
    rows
}

const METRICS_HEADER: [&str; 5] = ["model", "horizon", "mse", "mae", "mape"];

fn history_csv(path: &Path, history: &[EpochRecord]) -> CliResult<()> {
    let rows = history
        .iter()
        .map(|h| vec![h.epoch.to_string(), h.train_mse.to_string(), h.val_mse.to_string()]);
    write_csv(path, &["epoch", "train_mse", "val_mse"], rows)?;
    Ok(())
}

pub fn train(a: &TrainArgs) -> CliResult<()> {
    let mut run = Run::start("train");
    let ex = load_experiment(a, &mut run)?;
    let split = parse_split(&a.split)?;
    let window = WindowSpec {
        in_len: ex.model.input_len,
        out_len: ex.model.horizon,
    };
    let ds = Dataset::build(&ex.traffic, &ex.tweets, ex.layout.clone(), window, split.train.clone())?;
    let outcome = fit(&ForecastModel::new(ex.model.clone())?, &ds, &split, &ex.train)?;
    let floor = ex.train.mape_floor;
    let model = evaluate_on(&outcome.model, &ds, &split.test, a.test_stride, floor)?;
    let persistence = evaluate_on(&Persistence { horizon: window.out_len }, &ds, &split.test, a.test_stride, floor)?;
    let seasonal = evaluate_on(&SeasonalMean::fit(&ds, &split.train)?, &ds, &split.test, a.test_stride, floor)?;

    let out = &a.out;
    save_checkpoint(&run.output(&out.join("checkpoint.json")), &outcome.model, Some(ds.manifest(&split)))?;
    history_csv(&run.output(&out.join("loss_history.csv")), &outcome.history)?;
    let doc = serde_json::json!({
        "best_epoch": outcome.best_epoch,
        "epochs_run": outcome.history.len(),
        "model": model,
        "persistence": persistence,
        "seasonal_mean": seasonal,
    });
    write_json(&run.output(&out.join("metrics.json")), &doc)?;
    let rows = [("ttt", &model), ("persistence", &persistence), ("seasonal_mean", &seasonal)]
        .into_iter()
        .flat_map(|(n, r)| metrics_rows(n, r));
    write_csv(&run.output(&out.join("metrics.csv")), &METRICS_HEADER, rows)?;
    run.finish(&out.join("run_manifest.json"))
}

pub fn evaluate(a: &EvaluateArgs) -> CliResult<()> {
    let mut run = Run::start("evaluate");
    let (tp, fp) = (a.data.join("traffic.csv"), a.data.join("features.csv"));
    run.input(&tp);
    run.input(&fp);
    let (traffic, tweets) = load_pair(&tp, &fp)?;
    let floor = match &a.train_config {
        Some(p) => {
            run.input(p);
            let t: TrainConfig = read_json(p)?;
            t.validate()?;
            t.mape_floor
        }
        None => TrainConfig::default().mape_floor,
    };
    let (name, ds, split, forecaster): (&str, Dataset, SplitSpec, Box<dyn Forecaster>) = if a.oracle_stub {
        let cfg: ModelConfig = match &a.model_config {
            Some(p) => {
                run.input(p);
                read_json(p)?
            }
            None => ModelConfig::default(),
        };
        let split = parse_split(a.split.as_deref().unwrap_or("60,15,15"))?;
        let window = WindowSpec {
            in_len: cfg.input_len,
            out_len: cfg.horizon,
        };
        let layout = Layout::full(traffic.segment_ids.clone());
        let ds = Dataset::build(&traffic, &tweets, layout, window, split.train.clone())?;
        ("oracle_stub", ds, split, Box::new(OracleStub))
    } else {
        let path = a.checkpoint.as_ref().expect("clap requires --checkpoint");
        run.input(path);
        let (model, manifest) = load_checkpoint(path)?;
        let manifest =
            manifest.ok_or_else(|| Error::Config("checkpoint carries no dataset manifest".into()))?;
        if manifest.layout.segment_ids != traffic.segment_ids {
            return Err(Error::Alignment("checkpoint was trained on a different segment set".into()).into());
        }
        let split = match &a.split {
            Some(s) => parse_split(s)?,
            None => manifest.split.clone(),
        };
        let ds = Dataset::with_norm(
            &traffic,
            &tweets,
            manifest.layout.clone(),
            manifest.window.in_len,
            manifest.window.out_len,
            manifest.norm.clone(),
        )?;
        ("ttt", ds, split, Box::new(model))
    };
    split.validate(ds.steps())?;
    run.config("model", name)?;
    run.config("split", &split)?;
    run.config("test_stride", a.test_stride)?;
    let report = evaluate_on(forecaster.as_ref(), &ds, &split.test, a.test_stride, floor)?;
    let out = &a.out;
    write_json(&run.output(&out.join("metrics.json")), &serde_json::json!({ name: report }))?;
    write_csv(&run.output(&out.join("metrics.csv")), &METRICS_HEADER, metrics_rows(name, &report))?;
    run.finish(&out.join("run_manifest.json"))
}

#[derive(Serialize)]
struct AblationEntry<'a> {
    variant: &'a str,
    features_per_segment: usize,
    best_val_mse: f64,
    history: &'a [EpochRecord],
    test: &'a MetricsReport,
}

pub fn ablate(a: &TrainArgs) -> CliResult<()> {
    let mut run = Run::start("ablate");
    let ex = load_experiment(a, &mut run)?;
    let split = parse_split(&a.split)?;
    let window = WindowSpec {
        in_len: ex.model.input_len,
        out_len: ex.model.horizon,
    };
    let mut runs = Vec::new();
    for v in AblationVariant::ALL {
        runs.push(ttt_core::train::ablate(
            v,
            &ex.traffic,
            &ex.tweets,
            &ex.layout,
            window,
            &split,
            &ex.model,
            &ex.train,
            a.test_stride,
        )?);
    }
    let out = &a.out;
    write_csv(
        &run.output(&out.join("ablation.csv")),
        &["variant", "mse"],
        runs.iter().map(|r| vec![r.variant.name().to_string(), r.report.overall.mse.to_string()]),
    )?;
    let entries: Vec<AblationEntry> = runs
        .iter()
        .map(|r| AblationEntry {
            variant: r.variant.name(),
            features_per_segment: r.features,
            best_val_mse: r.history.iter().map(|h| h.val_mse).fold(f64::INFINITY, f64::min),
            history: &r.history,
            test: &r.report,
        })
        .collect();
    write_json(&run.output(&out.join("ablation.json")), &entries)?;
    run.finish(&out.join("run_manifest.json"))
}
