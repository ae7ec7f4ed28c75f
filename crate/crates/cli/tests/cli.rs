use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};
use tempfile::TempDir;

fn ttt(args: &[&str], seed: Option<&str>) -> Output {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_ttt"));
    cmd.args(args).env_remove("FORECAST_SEED");
    if let Some(s) = seed {
        cmd.env("FORECAST_SEED", s);
    }
    cmd.output().unwrap()
}

fn ok(args: &[&str]) {
    let out = ttt(args, None);
    assert!(out.status.success(), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
}

/// Parsed single-line error from a failed run.
fn fail(args: &[&str]) -> serde_json::Value {
    let out = ttt(args, None);
    assert!(!out.status.success(), "{args:?} should fail");
    let err = String::from_utf8(out.stderr).unwrap();
    assert_eq!(err.trim_end().lines().count(), 1, "{err}");
    serde_json::from_str(err.trim_end()).unwrap()
}

fn s(p: &Path) -> &str {
    p.to_str().unwrap()
}

fn digest(p: &Path) -> String {
    let bytes = fs::read(p).unwrap();
    Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect()
}

fn write_config(dir: &Path, name: &str, json: &str) -> PathBuf {
    let p = dir.join(name);
    fs::write(&p, json).unwrap();
    p
}

fn synth(dir: &Path, config: &str) -> PathBuf {
    let cfg = write_config(dir, "scenario.json", config);
    let out = dir.join("scenario");
    ok(&["synth", "--config", s(&cfg), "--out", s(&out)]);
    out
}

/// Scenario plus raw-mode features laid out as a training data directory.
fn data_dir(dir: &Path, config: &str) -> PathBuf {
    let sc = synth(dir, config);
    ok(&[
        "features",
        "--tweets", s(&sc.join("tweets.jsonl")),
        "--segments", s(&sc.join("segments.csv")),
        "--traffic", s(&sc.join("traffic.csv")),
        "--term-freq-mode", "raw",
        "--out", s(&sc.join("features.csv")),
    ]);
    sc
}

const TINY: &str = r#"{"segments": 2, "days": 9, "seed": 4}"#;
const TOY_MODEL: &str = r#"{"d_model": 8, "heads": 2, "encoder_layers": 1, "decoder_layers": 1}"#;
const QUICK_TRAIN: &str = r#"{"epochs": 2, "patience": 2, "batch_size": 16, "train_stride": 32, "val_stride": 16}"#;

fn csv_rows(p: &Path) -> Vec<Vec<String>> {
    fs::read_to_string(p)
        .unwrap()
        .lines()
        .map(|l| l.split(',').map(String::from).collect())
        .collect()
}

#[test]
fn synth_writes_the_file_contract() {
    let tmp = TempDir::new().unwrap();
    let out = synth(tmp.path(), r#"{"segments": 5, "days": 90}"#);
    for f in ["traffic.csv", "tweets.jsonl", "segments.csv", "manifest.json", "run_manifest.json"] {
        assert!(out.join(f).is_file(), "{f}");
    }
    let text = fs::read_to_string(out.join("traffic.csv")).unwrap();
    assert_eq!(text.lines().count(), 5 * 90 * 96 + 1);
    assert_eq!(text.lines().next().unwrap(), "segment_id,bin_start_iso8601,tps,volume,speed");
    let run: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(run["command"], "synth");
    assert_eq!(run["seed"], 0);
    assert_eq!(run["outputs"].as_array().unwrap().len(), 4);
}

#[test]
fn bad_scenario_config_fails_cleanly() {
    let tmp = TempDir::new().unwrap();
    let cfg = write_config(tmp.path(), "bad.json", r#"{"segments": 0}"#);
    let e = fail(&["synth", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(e["error"], "config");
    let cfg = write_config(tmp.path(), "typo.json", r#"{"segmnets": 3}"#);
    let e = fail(&["synth", "--config", s(&cfg), "--out", s(&tmp.path().join("o"))]);
    assert_eq!(e["error"], "parse");
}

#[test]
fn empty_corpus_gives_zero_features() {
    let tmp = TempDir::new().unwrap();
    let sc = synth(tmp.path(), TINY);
    let empty = tmp.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let out = tmp.path().join("f.csv");
    ok(&[
        "features", "--tweets", s(&empty), "--segments", s(&sc.join("segments.csv")),
        "--start", "2020-03-02T00:00:00Z", "--end", "2020-03-11T00:00:00Z", "--out", s(&out),
    ]);
    let rows = csv_rows(&out);
    assert_eq!(rows.len(), 2 * 9 * 96 + 1);
    for r in &rows[1..] {
        assert_eq!(&r[2..], ["0", "0", "0"]);
    }
}

#[test]
fn planted_counts_match_the_manifest() {
    let tmp = TempDir::new().unwrap();
    let sc = data_dir(tmp.path(), r#"{"segments": 3, "days": 9, "accident_rate_per_day": 0.7}"#);
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(sc.join("manifest.json")).unwrap()).unwrap();
    let mut want: BTreeMap<(String, String), [u64; 2]> = BTreeMap::new();
    let start = 1_583_107_200i64;
    for e in manifest["events"].as_array().unwrap() {
        let k = if e["kind"] == "accident" { 0 } else { 1 };
        for b in e["tweet_bins"].as_array().unwrap() {
            let bin = b[0].as_i64().unwrap();
            let iso = iso_oracle(start + 900 * bin);
            want.entry((e["segment_id"].to_string(), iso)).or_default()[k] += b[1].as_u64().unwrap();
        }
    }
    assert!(!want.is_empty());
    let mut seen = 0;
    for r in &csv_rows(&sc.join("features.csv"))[1..] {
        let got = [r[3].parse::<u64>().unwrap(), r[4].parse::<u64>().unwrap()];
        let w = want.get(&(r[0].clone(), r[1].clone())).copied().unwrap_or([0, 0]);
        assert_eq!(got, w, "{r:?}");
        seen += (w != [0, 0]) as usize;
    }
    assert_eq!(seen, want.len());
}

/// ISO-8601 UTC from epoch seconds (civil-from-days).
fn iso_oracle(ts: i64) -> String {
    let (days, secs) = (ts.div_euclid(86_400), ts.rem_euclid(86_400));
    let z = days + 719_468;
    let era = z.div_euclid(146_097);
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = yoe + era * 400 + (m <= 2) as i64;
    format!("{y:04}-{m:02}-{d:02}T{:02}:{:02}:{:02}Z", secs / 3600, secs % 3600 / 60, secs % 60)
}

#[test]
fn malformed_tweet_line_reports_line_number() {
    let tmp = TempDir::new().unwrap();
    let sc = synth(tmp.path(), TINY);
    let text = fs::read_to_string(sc.join("tweets.jsonl")).unwrap();
    let mut lines: Vec<&str> = text.lines().take(5).collect();
    lines[3] = "{\"ts\": oops";
    let bad = tmp.path().join("bad.jsonl");
    fs::write(&bad, lines.join("\n")).unwrap();
    let e = fail(&[
        "features", "--tweets", s(&bad), "--segments", s(&sc.join("segments.csv")),
        "--traffic", s(&sc.join("traffic.csv")), "--out", s(&tmp.path().join("f.csv")),
    ]);
    assert_eq!(e["error"], "parse");
    assert_eq!(e["line"], 4);
}

#[test]
fn constant_inputs_are_undefined_correlation() {
    let tmp = TempDir::new().unwrap();
    let sc = synth(
        tmp.path(),
        r#"{"segments": 2, "days": 14, "daily_amplitude": 0, "weekly_amplitude": 0, "noise_sd": 0,
            "factor_sd": 0, "segment_sd": 0, "accident_rate_per_day": 0, "culture_events": 0}"#,
    );
    let empty = tmp.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let f = tmp.path().join("f.csv");
    ok(&["features", "--tweets", s(&empty), "--segments", s(&sc.join("segments.csv")), "--traffic", s(&sc.join("traffic.csv")), "--out", s(&f)]);
    let e = fail(&["correlate", "--traffic", s(&sc.join("traffic.csv")), "--features", s(&f), "--out", s(&tmp.path().join("c"))]);
    assert_eq!(e["error"], "undefined_correlation");
}

#[test]
fn correlate_finds_the_planted_lag() {
    let tmp = TempDir::new().unwrap();
    let sc = data_dir(tmp.path(), r#"{"segments": 5, "days": 90}"#);
    let out = tmp.path().join("corr");
    ok(&["correlate", "--traffic", s(&sc.join("traffic.csv")), "--features", s(&sc.join("features.csv")), "--out", s(&out), "--svg"]);
    let lags = csv_rows(&out.join("lag_correlation.csv"));
    assert_eq!(lags.len(), 26);
    let vals: Vec<f64> = lags[1..].iter().map(|r| r[1].parse().unwrap()).collect();
    let argmin = (0..vals.len()).min_by(|&a, &b| vals[a].partial_cmp(&vals[b]).unwrap()).unwrap();
    assert_eq!(argmin, 10, "{vals:?}");
    assert!(vals[..=10].iter().all(|&r| r < 0.0));

    let ols: serde_json::Value = serde_json::from_str(&fs::read_to_string(out.join("ols.json")).unwrap()).unwrap();
    let terms: Vec<&String> = ols.as_object().unwrap().keys().filter(|k| ols[*k].is_object()).collect();
    assert_eq!(terms.len(), 4);
    for t in terms {
        for field in ["coefficient", "std_error", "t_stat", "p_value"] {
            assert!(ols[t][field].is_number(), "{t}.{field}");
        }
    }
    assert!(ols["r_squared"].is_number());
    let svg = fs::read_to_string(out.join("lag_correlation.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.contains("<polyline"));
    assert_eq!(csv_rows(&out.join("detrended.csv")).len(), 90 * 24 + 1);
}

#[test]
fn misaligned_grids_are_rejected() {
    let tmp = TempDir::new().unwrap();
    let sc = synth(tmp.path(), TINY);
    let empty = tmp.path().join("empty.jsonl");
    fs::write(&empty, "").unwrap();
    let f = tmp.path().join("f.csv");
    ok(&[
        "features", "--tweets", s(&empty), "--segments", s(&sc.join("segments.csv")),
        "--start", "2020-03-03T00:00:00Z", "--end", "2020-03-12T00:00:00Z", "--out", s(&f),
    ]);
    let e = fail(&["correlate", "--traffic", s(&sc.join("traffic.csv")), "--features", s(&f), "--out", s(&tmp.path().join("c"))]);
    assert_eq!(e["error"], "alignment");
}

#[test]
fn oracle_stub_scores_zero() {
    let tmp = TempDir::new().unwrap();
    let data = data_dir(tmp.path(), TINY);
    let out = tmp.path().join("eval");
    ok(&["evaluate", "--data", s(&data), "--oracle-stub", "--split", "7,1,1", "--out", s(&out)]);
    let rows = csv_rows(&out.join("metrics.csv"));
    assert_eq!(rows[0], ["model", "horizon", "mse", "mae", "mape"]);
    // 15, 60, 120 and 180 minutes plus the overall row.
    assert_eq!(rows.len(), 1 + 4 + 1);
    for r in &rows[1..] {
        assert_eq!(r[0], "oracle_stub");
        assert_eq!(&r[2..], ["0", "0", "0"]);
    }
}

fn train_args<'a>(cmd: &'a str, data: &'a Path, model: &'a Path, train: &'a Path, out: &'a Path) -> Vec<&'a str> {
    vec![
        cmd, "--data", s(data), "--model-config", s(model), "--train-config", s(train),
        "--split", "7,1,1", "--test-stride", "8", "--out", s(out),
    ]
}

#[test]
fn train_is_reproducible_and_evaluates() {
    let tmp = TempDir::new().unwrap();
    let data = data_dir(tmp.path(), TINY);
    let model = write_config(tmp.path(), "model.json", TOY_MODEL);
    let train = write_config(tmp.path(), "train.json", QUICK_TRAIN);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    ok(&train_args("train", &data, &model, &train, &a));
    ok(&train_args("train", &data, &model, &train, &b));
    for f in ["checkpoint.json", "loss_history.csv", "metrics.json", "metrics.csv"] {
        assert_eq!(digest(&a.join(f)), digest(&b.join(f)), "{f}");
    }
    let rows = csv_rows(&a.join("metrics.csv"));
    assert_eq!(rows.len(), 1 + 3 * 5);
    assert_eq!(csv_rows(&a.join("loss_history.csv"))[0], ["epoch", "train_mse", "val_mse"]);

    // Evaluating the checkpoint reproduces the training report.
    let ev = tmp.path().join("ev");
    ok(&["evaluate", "--data", s(&data), "--checkpoint", s(&a.join("checkpoint.json")), "--test-stride", "8", "--out", s(&ev)]);
    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(a.join("metrics.json")).unwrap()).unwrap();
    let e: serde_json::Value = serde_json::from_str(&fs::read_to_string(ev.join("metrics.json")).unwrap()).unwrap();
    assert_eq!(m["model"], e["ttt"]);
}

#[test]
fn forecast_seed_overrides_config() {
    let tmp = TempDir::new().unwrap();
    let data = data_dir(tmp.path(), TINY);
    let model = write_config(tmp.path(), "model.json", TOY_MODEL);
    let train = write_config(tmp.path(), "train.json", QUICK_TRAIN);
    let (a, b) = (tmp.path().join("a"), tmp.path().join("b"));
    let run = |out: &Path, seed| {
        let o = ttt(&train_args("train", &data, &model, &train, out), seed);
        assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    };
    run(&a, None);
    run(&b, Some("17"));
    assert_ne!(digest(&a.join("checkpoint.json")), digest(&b.join("checkpoint.json")));
    let manifest: serde_json::Value = serde_json::from_str(&fs::read_to_string(b.join("run_manifest.json")).unwrap()).unwrap();
    assert_eq!(manifest["seed"], 17);

    let bad = ttt(&["synth", "--out", s(&tmp.path().join("x"))], Some("seven"));
    assert!(!bad.status.success());
}

#[test]
fn divergence_exits_with_epoch() {
    let tmp = TempDir::new().unwrap();
    let data = data_dir(tmp.path(), TINY);
    let model = write_config(tmp.path(), "model.json", TOY_MODEL);
    let train = write_config(tmp.path(), "train.json", r#"{"epochs": 2, "learning_rate": 1e300, "train_stride": 32, "val_stride": 16}"#);
    let e = fail(&train_args("train", &data, &model, &train, &tmp.path().join("o")));
    assert_eq!(e["error"], "training_diverged");
    assert!(e["epoch"].as_u64().unwrap() >= 1);
}

#[test]
fn ablate_writes_five_variants() {
    let tmp = TempDir::new().unwrap();
    let data = data_dir(tmp.path(), TINY);
    let model = write_config(tmp.path(), "model.json", TOY_MODEL);
    let train = write_config(tmp.path(), "train.json", r#"{"epochs": 1, "batch_size": 16, "train_stride": 32, "val_stride": 16}"#);
    let out = tmp.path().join("abl");
    ok(&train_args("ablate", &data, &model, &train, &out));
    let rows = csv_rows(&out.join("ablation.csv"));
    assert_eq!(rows[0], ["variant", "mse"]);
    let mut names: Vec<&str> = rows[1..].iter().map(|r| r[0].as_str()).collect();
    names.sort();
    assert_eq!(names, ["drop_accident", "drop_culture", "drop_term_frequency", "drop_time_encoder", "full"]);
    assert!(rows[1..].iter().all(|r| r[1].parse::<f64>().unwrap().is_finite()));
}
