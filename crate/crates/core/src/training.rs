//! Adam optimisation loop and training telemetry.

use std::fs;
use std::io::Write as _;
use std::path::Path;
use std::time::Instant;

use ndarray::{Array2, Zip};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{fused_operator, normalized_adjacency, FeatureMatrix, Graph};
use crate::model::{self, init_params, Embedding, EncoderKind, ModelParams};
use crate::objective::{fastgae_sample, gradients, LossBreakdown, ObjectiveConfig};
use crate::prior::PriorOperator;
use crate::rng::{self, Stream};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPS: f64 = 1e-8;

/// Interval between telemetry records.
pub const LOG_EVERY: usize = 10;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub encoder: EncoderKind,
    pub variational: bool,
    /// Embedding dimension.
    pub dim: usize,
    /// Hidden width of the GCN encoder.
    pub hidden: usize,
    pub lambda: f64,
    pub beta: f64,
    pub gamma: f64,
    pub s: usize,
    pub lr: f64,
    pub iterations: usize,
    pub dropout: f64,
    pub fastgae_size: Option<usize>,
    pub seed: u64,
    /// Elementwise gradient clip, off unless set.
    pub clip: Option<f64>,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            encoder: EncoderKind::Linear,
            variational: false,
            dim: 16,
            hidden: 32,
            lambda: 0.0,
            beta: 0.0,
            gamma: 1.0,
            s: 1,
            lr: 0.01,
            iterations: 200,
            dropout: 0.0,
            fastgae_size: None,
            seed: 0,
            clip: None,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, n: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidArgument(msg));
        if self.dim == 0 || (self.encoder == EncoderKind::Gcn && self.hidden == 0) {
            return bad("embedding and hidden dimensions must be positive".into());
        }
        for (name, v) in [
            ("lambda", self.lambda),
            ("beta", self.beta),
            ("gamma", self.gamma),
        ] {
            if !(v >= 0.0 && v.is_finite()) {
                return bad(format!("{name} must be a non-negative number, got {v}"));
            }
        }
        if self.s == 0 {
            return bad("s must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad(format!("learning rate must be positive, got {}", self.lr));
        }
        if self.iterations == 0 {
            return bad("iterations must be positive".into());
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad(format!("dropout must lie in [0, 1), got {}", self.dropout));
        }
        if let Some(k) = self.fastgae_size {
            if k == 0 || k > n {
                return bad(format!("fastgae size {k} must lie in 1..={n}"));
            }
        }
        if let Some(c) = self.clip {
            if c.is_nan() || c <= 0.0 {
                return bad(format!("clip must be positive, got {c}"));
            }
        }
        Ok(())
    }

    /// The standard (prior-free, unregularised) autoencoder.
    pub fn is_standard(&self) -> bool {
        self.lambda == 0.0 && self.beta == 0.0
    }

    fn objective(&self) -> ObjectiveConfig {
        ObjectiveConfig {
            beta: self.beta,
            gamma: self.gamma,
            dropout: self.dropout,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Direction {
    Descent,
    Ascent,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    t: u64,
}

impl AdamState {
    pub fn new(params: &ModelParams) -> AdamState {
        let zeros: Vec<Array2<f64>> = params
            .tensors()
            .iter()
            .map(|(_, t)| Array2::zeros(t.raw_dim()))
            .collect();
        AdamState {
            m: zeros.clone(),
            v: zeros,
            t: 0,
        }
    }

    pub fn step_count(&self) -> u64 {
        self.t
    }
}

/// One bias-corrected Adam update. Nothing is written when any updated
/// value would be non-finite.
pub fn adam_step(
    params: &mut ModelParams,
    grads: &ModelParams,
    state: &mut AdamState,
    lr: f64,
    direction: Direction,
) -> Result<()> {
    let grads = grads.tensors();
    if grads.len() != state.m.len() {
        return Err(Error::DimensionMismatch(
            "gradient and optimiser state differ".into(),
        ));
    }
    let t = state.t + 1;
    let c1 = 1.0 - ADAM_BETA1.powi(t as i32);
    let c2 = 1.0 - ADAM_BETA2.powi(t as i32);
    let sign = match direction {
        Direction::Descent => -1.0,
        Direction::Ascent => 1.0,
    };

    let mut new_m = Vec::with_capacity(grads.len());
    let mut new_v = Vec::with_capacity(grads.len());
    let mut new_p = Vec::with_capacity(grads.len());
    for (k, ((_, p), (_, g))) in params.tensors().iter().zip(&grads).enumerate() {
        if p.raw_dim() != g.raw_dim() {
            return Err(Error::DimensionMismatch(
                "gradient shape differs from weights".into(),
            ));
        }
        let m = &state.m[k] * ADAM_BETA1 + &(*g * (1.0 - ADAM_BETA1));
        let v = &state.v[k] * ADAM_BETA2 + &(g.mapv(|x| x * x) * (1.0 - ADAM_BETA2));
        let mut next = (*p).clone();
        Zip::from(&mut next)
            .and(&m)
            .and(&v)
            .for_each(|w, &mi, &vi| {
                *w += sign * lr * (mi / c1) / ((vi / c2).sqrt() + ADAM_EPS);
            });
        if !next.iter().all(|x| x.is_finite()) {
            return Err(Error::NonFinite("Adam update"));
        }
        new_m.push(m);
        new_v.push(v);
        new_p.push(next);
    }
    for ((_, p), next) in params.tensors_mut().into_iter().zip(new_p) {
        *p = next;
    }
    state.m = new_m;
    state.v = new_v;
    state.t = t;
    Ok(())
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TelemetryRecord {
    pub iter: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
    pub wall_ms: f64,
}

pub fn write_telemetry(path: impl AsRef<Path>, records: &[TelemetryRecord]) -> Result<()> {
    let path = path.as_ref();
    let mut out = Vec::new();
    for r in records {
        serde_json::to_writer(&mut out, r)?;
        out.push(b'\n');
    }
    let mut f = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&out).map_err(|e| Error::io(path, e))
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub params: ModelParams,
    /// Eval-mode embedding on the full graph.
    pub embedding: Embedding,
    pub telemetry: Vec<TelemetryRecord>,
}

fn clip_in_place(grads: &mut ModelParams, c: f64) {
    for (_, t) in grads.tensors_mut() {
        t.mapv_inplace(|v| v.clamp(-c, c));
    }
}

/// Trains an encoder. With `prior = None` the propagation matrix is the
/// plain normalised adjacency; otherwise it is fused with the prior.
pub fn train(
    g: &Graph,
    x: &FeatureMatrix,
    prior: Option<&PriorOperator>,
    config: &TrainConfig,
) -> Result<TrainOutput> {
    config.validate(g.n())?;
    if x.rows() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "features have {} rows, graph has {} nodes",
            x.rows(),
            g.n()
        )));
    }
    let op = match prior {
        Some(p) => fused_operator(g, p)?,
        None => normalized_adjacency(g),
    };
    let mut params = init_params(
        config.encoder,
        config.variational,
        x.cols(),
        config.hidden,
        config.dim,
        rng::derive(config.seed, Stream::Init),
    )?;
    let mut state = AdamState::new(&params);
    let mut dropout_rng = rng::stream(config.seed, Stream::Dropout);
    let sampling_seed = rng::derive(config.seed, Stream::Sampling);
    let direction = if config.variational {
        Direction::Ascent
    } else {
        Direction::Descent
    };
    let objective = config.objective();
    let started = Instant::now();
    let mut telemetry = Vec::with_capacity(config.iterations / LOG_EVERY + 2);

    for iter in 0..config.iterations {
        let diverged = |reason: String, params: &ModelParams| Error::Divergence {
            iter,
            reason,
            last_finite: Box::new(params.clone()),
        };
        let sample = match config.fastgae_size {
            Some(k) => Some(fastgae_sample(
                g,
                k,
                rng::child(sampling_seed, iter as u64),
            )?),
            None => None,
        };
        let (mut grads, loss) = match gradients(
            &params,
            &op,
            x,
            g,
            &objective,
            sample.as_ref(),
            &mut dropout_rng,
        ) {
            Ok(v) => v,
            Err(e) if e.is_numeric() => return Err(diverged(e.to_string(), &params)),
            Err(e) => return Err(e),
        };
        if !loss.total.is_finite() {
            return Err(diverged("non-finite objective".into(), &params));
        }
        if iter % LOG_EVERY == 0 || iter + 1 == config.iterations {
            telemetry.push(TelemetryRecord {
                iter,
                loss,
                wall_ms: started.elapsed().as_secs_f64() * 1e3,
            });
            log::debug!("iter {iter}: total {:.6}", loss.total);
        }
        if let Some(c) = config.clip {
            clip_in_place(&mut grads, c);
        }
        if let Err(e) = adam_step(&mut params, &grads, &mut state, config.lr, direction) {
            return Err(diverged(e.to_string(), &params));
        }
    }

    let embedding = model::encode(&params, &op, x, &mut rng::rng(0), 0.0, false)?;
    Ok(TrainOutput {
        params,
        embedding,
        telemetry,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::Heads;
    use ndarray::array;

    fn params_with(w: Array2<f64>) -> ModelParams {
        ModelParams {
            kind: EncoderKind::Linear,
            w0: None,
            heads: Heads::Deterministic { w_out: w },
        }
    }

    #[test]
    fn zero_gradient_leaves_params() {
        let mut p = params_with(array![[1.0, -2.0]]);
        let start = p.clone();
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &start.zeros_like(), &mut s, 0.1, Direction::Descent).unwrap();
        assert_eq!(p, start);
        assert_eq!(s.step_count(), 1);
    }

    #[test]
    fn first_step_has_magnitude_lr() {
        let mut p = params_with(array![[0.0, 0.0, 0.0]]);
        let g = params_with(array![[3.0, -0.001, 1e4]]);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, 0.01, Direction::Descent).unwrap();
        let Heads::Deterministic { w_out } = &p.heads else {
            unreachable!()
        };
        for (&w, &gv) in w_out.iter().zip(array![3.0f64, -0.001, 1e4].iter()) {
            assert!((w + 0.01 * gv.signum()).abs() < 1e-6);
        }
    }

    #[test]
    fn descent_then_ascent_returns() {
        let mut p = params_with(array![[0.3, -0.7]]);
        let start = p.clone();
        let g = params_with(array![[0.5, 2.0]]);
        let mut s = AdamState::new(&p);
        adam_step(&mut p, &g, &mut s, 0.01, Direction::Descent).unwrap();
        adam_step(&mut p, &g, &mut s, 0.01, Direction::Ascent).unwrap();
        let (Heads::Deterministic { w_out: a }, Heads::Deterministic { w_out: b }) =
            (&p.heads, &start.heads)
        else {
            unreachable!()
        };
        assert!(a.iter().zip(b).all(|(x, y)| (x - y).abs() < 1e-12));
    }

    #[test]
    fn non_finite_update_is_rejected() {
        let mut p = params_with(array![[0.0]]);
        let start = p.clone();
        let mut s = AdamState::new(&p);
        let g = params_with(array![[f64::NAN]]);
        assert!(adam_step(&mut p, &g, &mut s, 0.1, Direction::Descent).is_err());
        assert_eq!(p, start);
        assert_eq!(s.step_count(), 0);
    }

    #[test]
    fn config_validation() {
        let mut c = TrainConfig::default();
        assert!(c.validate(10).is_ok());
        c.fastgae_size = Some(11);
        assert!(c.validate(10).is_err());
        c.fastgae_size = None;
        c.dropout = 1.0;
        assert!(c.validate(10).is_err());
    }

    #[test]
    fn config_json_roundtrip() {
        let c = TrainConfig {
            encoder: EncoderKind::Gcn,
            variational: true,
            fastgae_size: Some(4),
            ..TrainConfig::default()
        };
        let text = serde_json::to_string(&c).unwrap();
        assert_eq!(serde_json::from_str::<TrainConfig>(&text).unwrap(), c);
    }
}
