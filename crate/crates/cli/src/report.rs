use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] ttt_core::Error),
    #[error("{0}")]
    Usage(String),
}

pub type CliResult<T> = Result<T, CliError>;

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Core(e.into())
    }
}

/// One JSON object on one line.
pub fn error_line(e: &CliError) -> String {
    let mut obj = serde_json::Map::new();
    let kind = match e {
        CliError::Core(c) => c.kind(),
        CliError::Usage(_) => "usage",
    };
    obj.insert("error".into(), kind.into());
    obj.insert("message".into(), e.to_string().into());
    if let CliError::Core(ttt_core::Error::TrainingDiverged { epoch }) = e {
        obj.insert("epoch".into(), (*epoch).into());
    }
    if let CliError::Core(ttt_core::Error::Parse { line, .. }) = e {
        obj.insert("line".into(), (*line).into());
    }
    serde_json::Value::Object(obj).to_string()
}

#[derive(Serialize)]
struct RunManifest<'a> {
    command: &'a str,
    config: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<String>,
    outputs: Vec<String>,
    tool_version: &'static str,
    wall_clock_seconds: f64,
}

/// Collects what a command read and wrote, then writes the run manifest.
pub struct Run {
    command: &'static str,
    started: Instant,
    pub seed: Option<u64>,
    config: serde_json::Value,
    inputs: Vec<String>,
    outputs: Vec<String>,
}

impl Run {
    pub fn start(command: &'static str) -> Self {
        Self {
            command,
            started: Instant::now(),
            seed: None,
            config: serde_json::Value::Null,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn config(&mut self, key: &str, value: impl Serialize) -> CliResult<()> {
        if !self.config.is_object() {
            self.config = serde_json::Value::Object(Default::default());
        }
        let v = serde_json::to_value(value).map_err(ttt_core::Error::from)?;
        self.config.as_object_mut().expect("object").insert(key.into(), v);
        Ok(())
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.display().to_string());
    }

    pub fn output(&mut self, p: &Path) -> PathBuf {
        self.outputs.push(p.display().to_string());
        p.to_path_buf()
    }

    pub fn finish(self, path: &Path) -> CliResult<()> {
        let m = RunManifest {
            command: self.command,
            config: self.config,
            seed: self.seed,
            inputs: self.inputs,
            outputs: self.outputs,
            tool_version: env!("CARGO_PKG_VERSION"),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
        };
        ttt_core::io::write_json(path, &m)?;
        Ok(())
    }
}

/// `FORECAST_SEED`, when set, replaces every configured seed.
pub fn env_seed() -> CliResult<Option<u64>> {
    match std::env::var("FORECAST_SEED") {
        Ok(s) => s
            .trim()
            .parse()
            .map(Some)
            .map_err(|_| CliError::Usage(format!("FORECAST_SEED={s:?} is not an unsigned integer"))),
        Err(_) => Ok(None),
    }
}

const COLORS: [&str; 4] = ["#1f77b4", "#d62728", "#2ca02c", "#9467bd"];

/// Minimal SVG line chart; x is the sample index.
pub fn line_chart(title: &str, x_label: &str, series: &[(&str, &[f64])]) -> String {
    let (w, h, pad) = (720.0, 360.0, 48.0);
    let n = series.iter().map(|(_, v)| v.len()).max().unwrap_or(0);
    let finite = series.iter().flat_map(|(_, v)| v.iter().copied()).filter(|v| v.is_finite());
    let (mut lo, mut hi) = finite.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    if !lo.is_finite() {
        (lo, hi) = (0.0, 1.0);
    }
    if hi - lo < 1e-12 {
        (lo, hi) = (lo - 0.5, hi + 0.5);
    }
    let sx = |i: usize| pad + (w - 2.0 * pad) * i as f64 / (n.max(2) - 1) as f64;
    let sy = |v: f64| h - pad - (h - 2.0 * pad) * (v - lo) / (hi - lo);

    let mut s = String::new();
    let _ = writeln!(s, r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#);
    let _ = writeln!(s, r#"<rect width="100%" height="100%" fill="white"/>"#);
    let _ = writeln!(s, r#"<text x="{}" y="24" font-size="14" text-anchor="middle">{}</text>"#, w / 2.0, escape(title));
    let _ = writeln!(
        s,
        r#"<path d="M{pad} {pad} V{} H{}" stroke="black" fill="none"/>"#,
        h - pad,
        w - pad
    );
    let _ = writeln!(s, r#"<text x="4" y="{}" font-size="10">{hi:.3}</text>"#, pad);
    let _ = writeln!(s, r#"<text x="4" y="{}" font-size="10">{lo:.3}</text>"#, h - pad);
    let _ = writeln!(
        s,
        r#"<text x="{}" y="{}" font-size="11" text-anchor="middle">{}</text>"#,
        w / 2.0,
        h - 12.0,
        escape(x_label)
    );
    if lo < 0.0 && hi > 0.0 {
        let _ = writeln!(
            s,
            r##"<line x1="{pad}" x2="{}" y1="{y:.2}" y2="{y:.2}" stroke="#999" stroke-dasharray="4 3"/>"##,
            w - pad,
            y = sy(0.0)
        );
    }
    for (k, (name, vals)) in series.iter().enumerate() {
        let color = COLORS[k % COLORS.len()];
        let pts: Vec<String> = vals
            .iter()
            .enumerate()
            .filter(|(_, v)| v.is_finite())
            .map(|(i, &v)| format!("{:.2},{:.2}", sx(i), sy(v)))
            .collect();
        let _ = writeln!(
            s,
            r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.2"/>"#,
            pts.join(" ")
        );
        let _ = writeln!(
            s,
            r#"<text x="{}" y="{}" font-size="11" fill="{color}">{}</text>"#,
            w - pad - 150.0,
            pad + 14.0 * k as f64,
            escape(name)
        );
    }
    s.push_str("</svg>\n");
    s
}

fn escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}
