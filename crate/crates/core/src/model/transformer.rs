//! The time-encoded encoder-decoder forecaster.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use super::attention::{graph_multi_head, AttnNodes};
use super::config::ModelConfig;
use crate::data::{sinusoids_from, WindowedSample, CALENDAR_DIM};
use crate::error::{contract, Result};
use crate::numerics::{DiffGraph, Mask, Matrix, NodeId, RngState};

const LN_EPS: f64 = 1e-5;

#[derive(Debug, Clone, Copy)]
struct Lin {
    w: usize,
    b: usize,
}

#[derive(Debug, Clone, Copy)]
struct Attn {
    q: usize,
    k: usize,
    v: usize,
    o: usize,
}

#[derive(Debug, Clone, Copy)]
struct Norm {
    g: usize,
    b: usize,
}

#[derive(Debug, Clone)]
struct EncLayer {
    attn: Attn,
    n1: Norm,
    ff1: Lin,
    ff2: Lin,
    n2: Norm,
}

#[derive(Debug, Clone)]
struct DecLayer {
    self_attn: Attn,
    n1: Norm,
    cross: Attn,
    n2: Norm,
    ff1: Lin,
    ff2: Lin,
    n3: Norm,
}

#[derive(Debug, Clone)]
struct Index {
    input: Lin,
    token: Lin,
    time: Option<usize>,
    enc: Vec<EncLayer>,
    dec: Vec<DecLayer>,
    out: Lin,
}

#[derive(Debug, Clone, Copy)]
enum Init {
    Uniform(usize),
    Ones,
    Zeros,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ParamSpec {
    pub name: String,
    pub rows: usize,
    pub cols: usize,
}

struct Builder {
    specs: Vec<(ParamSpec, Init)>,
}

impl Builder {
    fn add(&mut self, name: String, rows: usize, cols: usize, init: Init) -> usize {
        self.specs.push((ParamSpec { name, rows, cols }, init));
        self.specs.len() - 1
    }

    fn lin(&mut self, name: &str, fan_in: usize, out: usize) -> Lin {
        Lin {
            w: self.add(format!("{name}.w"), fan_in, out, Init::Uniform(fan_in)),
            b: self.add(format!("{name}.b"), 1, out, Init::Uniform(fan_in)),
        }
    }

    fn attn(&mut self, name: &str, d: usize) -> Attn {
        let mut one = |p: &str| self.add(format!("{name}.{p}"), d, d, Init::Uniform(d));
        Attn {
            q: one("w_q"),
            k: one("w_k"),
            v: one("w_v"),
            o: one("w_o"),
        }
    }

    fn norm(&mut self, name: &str, d: usize) -> Norm {
        Norm {
            g: self.add(format!("{name}.gain"), 1, d, Init::Ones),
            b: self.add(format!("{name}.bias"), 1, d, Init::Zeros),
        }
    }
}

fn build_index(c: &ModelConfig) -> (Vec<(ParamSpec, Init)>, Index) {
    let (d, f, m) = (c.d_model, c.ff(), c.segments);
    let mut b = Builder { specs: Vec::new() };
    let input = b.lin("embed.input", c.input_width(), d);
    let token = b.lin("embed.token", m, d);
    let time = c
        .time_encoder
        .then(|| b.add("time.w".into(), d, 2 * d + CALENDAR_DIM, Init::Uniform(2 * d + CALENDAR_DIM)));
    let enc = (0..c.encoder_layers)
        .map(|l| {
            let p = format!("enc{l}");
            EncLayer {
                attn: b.attn(&format!("{p}.attn"), d),
                n1: b.norm(&format!("{p}.norm1"), d),
                ff1: b.lin(&format!("{p}.ff1"), d, f),
                ff2: b.lin(&format!("{p}.ff2"), f, d),
                n2: b.norm(&format!("{p}.norm2"), d),
            }
        })
        .collect();
    let dec = (0..c.decoder_layers)
        .map(|l| {
            let p = format!("dec{l}");
            DecLayer {
                self_attn: b.attn(&format!("{p}.self_attn"), d),
                n1: b.norm(&format!("{p}.norm1"), d),
                cross: b.attn(&format!("{p}.cross_attn"), d),
                n2: b.norm(&format!("{p}.norm2"), d),
                ff1: b.lin(&format!("{p}.ff1"), d, f),
                ff2: b.lin(&format!("{p}.ff2"), f, d),
                n3: b.norm(&format!("{p}.norm3"), d),
            }
        })
        .collect();
    let out = b.lin("head", d, m);
    (
        b.specs,
        Index {
            input,
            token,
            time,
            enc,
            dec,
            out,
        },
    )
}

/// Model parameters plus the configuration that fixes their layout.
#[derive(Debug, Clone)]
pub struct ForecastModel {
    config: ModelConfig,
    specs: Vec<ParamSpec>,
    params: Vec<Matrix>,
    index: Index,
}

impl PartialEq for ForecastModel {
    fn eq(&self, other: &Self) -> bool {
        self.config == other.config && self.params == other.params
    }
}

impl ForecastModel {
    /// Seeded initialization from `config.seed`.
    pub fn new(config: ModelConfig) -> Result<Self> {
        config.validate()?;
        let (specs, index) = build_index(&config);
        let mut rng = RngState::new(config.seed);
        let params = specs
            .iter()
            .map(|(s, init)| match *init {
                Init::Uniform(fan_in) => rng.uniform_matrix(s.rows, s.cols, (1.0 / fan_in as f64).sqrt()),
                Init::Ones => Matrix::filled(s.rows, s.cols, 1.0),
                Init::Zeros => Matrix::zeros(s.rows, s.cols),
            })
            .collect();
        Ok(Self {
            config,
            specs: specs.into_iter().map(|(s, _)| s).collect(),
            params,
            index,
        })
    }

    /// Rebuilds a model from stored parameters, checking every shape.
    pub fn from_parts(config: ModelConfig, params: Vec<Matrix>) -> Result<Self> {
        let mut m = Self::new(config)?;
        if params.len() != m.params.len() {
            return Err(contract(format!("{} parameter matrices, layout needs {}", params.len(), m.params.len())));
        }
        for (s, p) in m.specs.iter().zip(&params) {
            if p.shape() != (s.rows, s.cols) {
                return Err(contract(format!("parameter {} has shape {:?}, expected ({}, {})", s.name, p.shape(), s.rows, s.cols)));
            }
        }
        m.params = params;
        Ok(m)
    }

    /// Sets the fixed decoder-token scaling.
    pub fn set_token_scaling(&mut self, mean: f64, std: f64) -> Result<()> {
        let config = ModelConfig { token_mean: mean, token_std: std, ..self.config.clone() };
        config.validate()?;
        self.config = config;
        Ok(())
    }

    pub fn config(&self) -> &ModelConfig {
        &self.config
    }

    pub fn specs(&self) -> &[ParamSpec] {
        &self.specs
    }

    pub fn params(&self) -> &[Matrix] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [Matrix] {
        &mut self.params
    }

    pub fn parameter_count(&self) -> usize {
        self.params.iter().map(|p| p.rows() * p.cols()).sum()
    }

    /// Adds every parameter to `g`, trainable or as constants.
    pub fn bind(&self, g: &mut DiffGraph, trainable: bool) -> Vec<NodeId> {
        self.params
            .iter()
            .enumerate()
            .map(|(i, p)| if trainable { g.param(i, p.clone()) } else { g.constant(p.clone()) })
            .collect()
    }

    fn check_sample(&self, s: &WindowedSample) -> Result<()> {
        let c = &self.config;
        let ok = s.input.shape() == (c.input_len, c.input_width())
            && s.input_time.shape() == (c.input_len, CALENDAR_DIM)
            && s.target_time.rows() >= c.horizon
            && s.last_tps.len() == c.segments;
        if !ok {
            return Err(contract(format!(
                "window input {:?} does not fit the model ({} × {}, {} segments)",
                s.input.shape(),
                c.input_len,
                c.input_width(),
                c.segments
            )));
        }
        Ok(())
    }

    fn linear(&self, g: &mut DiffGraph, b: &[NodeId], x: NodeId, l: Lin) -> Result<NodeId> {
        let y = g.matmul(x, b[l.w])?;
        g.add_row(y, b[l.b])
    }

    fn norm(&self, g: &mut DiffGraph, b: &[NodeId], x: NodeId, n: Norm) -> Result<NodeId> {
        g.layer_norm(x, b[n.g], b[n.b], LN_EPS)
    }

    fn attn_nodes(b: &[NodeId], a: Attn) -> AttnNodes {
        AttnNodes {
            wq: b[a.q],
            wk: b[a.k],
            wv: b[a.v],
            wo: b[a.o],
        }
    }

    fn feed_forward(&self, g: &mut DiffGraph, b: &[NodeId], x: NodeId, f1: Lin, f2: Lin) -> Result<NodeId> {
        let h = self.linear(g, b, x, f1)?;
        let h = g.relu(h)?;
        self.linear(g, b, h, f2)
    }

    /// Adds position and calendar information to embedded rows starting at
    /// sequence position `first`.
    fn time_encode(&self, g: &mut DiffGraph, b: &[NodeId], e: NodeId, time: &Matrix, first: usize) -> Result<NodeId> {
        let rows = g.value(e).rows();
        let tau = g.constant(sinusoids_from(first, rows, self.config.d_model)?);
        match self.index.time {
            Some(w) => {
                let t = g.constant(time.slice_rows(0, rows)?);
                let cat = g.concat_cols(&[e, tau, t])?;
                g.matmul_nt(cat, b[w])
            }
            None => g.add(e, tau),
        }
    }

    fn encode(&self, g: &mut DiffGraph, b: &[NodeId], input: &Matrix, time: &Matrix) -> Result<NodeId> {
        let x = g.constant(input.clone());
        let e = self.linear(g, b, x, self.index.input)?;
        let mut x = self.time_encode(g, b, e, time, 0)?;
        for l in &self.index.enc {
            let a = graph_multi_head(g, x, x, Self::attn_nodes(b, l.attn), self.config.heads, None)?;
            let r = g.add(x, a)?;
            x = self.norm(g, b, r, l.n1)?;
            let f = self.feed_forward(g, b, x, l.ff1, l.ff2)?;
            let r = g.add(x, f)?;
            x = self.norm(g, b, r, l.n2)?;
        }
        Ok(x)
    }

    /// Decoder over `tokens` (p × M TPS rows); returns one prediction row per token.
    fn decode(&self, g: &mut DiffGraph, b: &[NodeId], memory: NodeId, tokens: NodeId, time: &Matrix) -> Result<NodeId> {
        let p = g.value(tokens).rows();
        let e = self.linear(g, b, tokens, self.index.token)?;
        let mut x = self.time_encode(g, b, e, time, self.config.input_len)?;
        let mask = Arc::new(Mask::causal(p));
        for l in &self.index.dec {
            let a = graph_multi_head(g, x, x, Self::attn_nodes(b, l.self_attn), self.config.heads, Some(mask.clone()))?;
            let r = g.add(x, a)?;
            x = self.norm(g, b, r, l.n1)?;
            let c = graph_multi_head(g, x, memory, Self::attn_nodes(b, l.cross), self.config.heads, None)?;
            let r = g.add(x, c)?;
            x = self.norm(g, b, r, l.n2)?;
            let f = self.feed_forward(g, b, x, l.ff1, l.ff2)?;
            let r = g.add(x, f)?;
            x = self.norm(g, b, r, l.n3)?;
        }
        // The head works in token units; map back to TPS.
        let y = self.linear(g, b, x, self.index.out)?;
        let (mu, sd) = (self.config.token_mean, self.config.token_std);
        if mu == 0.0 && sd == 1.0 {
            return Ok(y);
        }
        let y = g.scale(y, sd)?;
        let shift = g.constant(Matrix::from_rows(&[vec![mu; self.config.segments]])?);
        g.add_row(y, shift)
    }

    /// Memory sequence for one input window (`input_len × M·F`, normalized).
    pub fn encoder_forward(&self, input: &Matrix, input_time: &Matrix) -> Result<Matrix> {
        let c = &self.config;
        if input.shape() != (c.input_len, c.input_width()) || input_time.shape() != (c.input_len, CALENDAR_DIM) {
            return Err(contract(format!("encoder input {:?} / time {:?} do not match the model", input.shape(), input_time.shape())));
        }
        let mut g = DiffGraph::new();
        let b = self.bind(&mut g, false);
        let out = self.encode(&mut g, &b, input, input_time)?;
        Ok(g.value(out).clone())
    }

    /// Unclamped decoder outputs for every prefix position.
    /// `time` holds the calendar rows of the predicted steps.
    pub fn decoder_outputs(&self, memory: &Matrix, prefix: &Matrix, time: &Matrix) -> Result<Matrix> {
        let c = &self.config;
        if prefix.rows() == 0 {
            return Err(contract("decoder prefix is empty"));
        }
        if prefix.cols() != c.segments || memory.cols() != c.d_model || time.rows() < prefix.rows() || time.cols() != CALENDAR_DIM {
            return Err(contract(format!(
                "decoder inputs {:?} / memory {:?} / time {:?} do not match the model",
                prefix.shape(),
                memory.shape(),
                time.shape()
            )));
        }
        let mut g = DiffGraph::new();
        let b = self.bind(&mut g, false);
        let mem = g.constant(memory.clone());
        let tok = g.constant(self.scale_tokens(prefix.clone()));
        let out = self.decode(&mut g, &b, mem, tok, time)?;
        Ok(g.value(out).clone())
    }

    fn scale_tokens(&self, raw: Matrix) -> Matrix {
        let (mu, sd) = (self.config.token_mean, self.config.token_std);
        raw.map(|v| (v - mu) / sd)
    }

    /// Prediction following the last prefix token.
    pub fn decoder_step(&self, memory: &Matrix, prefix: &Matrix, time: &Matrix) -> Result<Vec<f64>> {
        let out = self.decoder_outputs(memory, prefix, time)?;
        Ok(out.row(out.rows() - 1).to_vec())
    }

    /// Autoregressive `horizon × M` forecast, clamped to [0, 1]. Each step's
    /// clamped prediction becomes the next decoder token.
    pub fn predict(&self, s: &WindowedSample) -> Result<Matrix> {
        self.check_sample(s)?;
        let h = self.config.horizon;
        let mut g = DiffGraph::new();
        let b = self.bind(&mut g, false);
        let mem = self.encode(&mut g, &b, &s.input, &s.input_time)?;
        let mut tokens = vec![s.last_tps.clone()];
        let mut out = Matrix::zeros(h, self.config.segments);
        for j in 0..h {
            let tok = g.constant(self.scale_tokens(Matrix::from_rows(&tokens)?));
            let y = self.decode(&mut g, &b, mem, tok, &s.target_time)?;
            let row: Vec<f64> = g.value(y).row(j).iter().map(|v| v.clamp(0.0, 1.0)).collect();
            out.row_mut(j).copy_from_slice(&row);
            tokens.push(row);
        }
        Ok(out)
    }

    /// Teacher-forced training graph: returns the graph, the prediction node
    /// (`horizon × M`, unclamped) and the MSE loss node.
    pub fn loss_graph(&self, s: &WindowedSample) -> Result<(DiffGraph, NodeId, NodeId)> {
        self.check_sample(s)?;
        let h = self.config.horizon;
        if s.target.shape() != (h, self.config.segments) {
            return Err(contract(format!("target {:?} does not match horizon {h}", s.target.shape())));
        }
        let mut tokens = vec![s.last_tps.clone()];
        for j in 0..h - 1 {
            tokens.push(s.target.row(j).to_vec());
        }
        let mut g = DiffGraph::new();
        let b = self.bind(&mut g, true);
        let mem = self.encode(&mut g, &b, &s.input, &s.input_time)?;
        let tok = g.constant(self.scale_tokens(Matrix::from_rows(&tokens)?));
        let pred = self.decode(&mut g, &b, mem, tok, &s.target_time)?;
        let target = g.constant(s.target.clone());
        let loss = g.mse(pred, target)?;
        Ok((g, pred, loss))
    }
}
