//! Encoders and the inner-product decoder.
//!
//! Two encoder families are supported, both operating on a normalised
//! propagation matrix `Ã`:
//!
//! * linear: `Z = Ã X W`
//! * two-layer GCN: `H = ReLU(Ã X W0)`, `Z = Ã H W`
//!
//! Variational encoders replace the single output head by a mean head and a
//! log-variance head (diagonal covariance). The GCN variant shares `W0`
//! between the two heads.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use ndarray::{Array2, ArrayView2, Axis, Zip};
use rand::Rng;
use rand_distr::{Distribution, StandardNormal, Uniform};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, SparseOperator};
use crate::rng;

/// Log-variances are clamped to this range before exponentiation.
pub const LOGVAR_BOUND: f64 = 10.0;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum EncoderKind {
    Linear,
    /// Two-layer graph convolutional encoder.
    Gcn,
}

impl std::str::FromStr for EncoderKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "linear" => Ok(EncoderKind::Linear),
            "gcn" | "gcn2" => Ok(EncoderKind::Gcn),
            other => Err(Error::InvalidArgument(format!("unknown encoder {other:?}"))),
        }
    }
}

/// Output layer weights.
#[derive(Debug, Clone, PartialEq)]
pub enum Heads {
    Deterministic {
        w_out: Array2<f64>,
    },
    Variational {
        w_mu: Array2<f64>,
        w_logvar: Array2<f64>,
    },
}

/// Encoder weights. The same type doubles as the gradient container.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelParams {
    pub kind: EncoderKind,
    /// First GCN layer, `f × h`; absent for the linear encoder.
    pub w0: Option<Array2<f64>>,
    pub heads: Heads,
}

impl ModelParams {
    pub fn is_variational(&self) -> bool {
        matches!(self.heads, Heads::Variational { .. })
    }

    /// Named weight matrices in a fixed order.
    pub fn tensors(&self) -> Vec<(&'static str, &Array2<f64>)> {
        let mut out = Vec::with_capacity(3);
        if let Some(w0) = &self.w0 {
            out.push(("w0", w0));
        }
        match &self.heads {
            Heads::Deterministic { w_out } => out.push(("w_out", w_out)),
            Heads::Variational { w_mu, w_logvar } => {
                out.push(("w_mu", w_mu));
                out.push(("w_logvar", w_logvar));
            }
        }
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(&'static str, &mut Array2<f64>)> {
        let mut out = Vec::with_capacity(3);
        if let Some(w0) = &mut self.w0 {
            out.push(("w0", w0));
        }
        match &mut self.heads {
            Heads::Deterministic { w_out } => out.push(("w_out", w_out)),
            Heads::Variational { w_mu, w_logvar } => {
                out.push(("w_mu", w_mu));
                out.push(("w_logvar", w_logvar));
            }
        }
        out
    }

    pub fn zeros_like(&self) -> ModelParams {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    pub fn scaled(&self, factor: f64) -> ModelParams {
        let mut z = self.clone();
        for (_, t) in z.tensors_mut() {
            t.mapv_inplace(|v| v * factor);
        }
        z
    }

    pub fn is_finite(&self) -> bool {
        self.tensors()
            .iter()
            .all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    fn input_dim(&self) -> usize {
        match (&self.w0, &self.heads) {
            (Some(w0), _) => w0.nrows(),
            (None, Heads::Deterministic { w_out }) => w_out.nrows(),
            (None, Heads::Variational { w_mu, .. }) => w_mu.nrows(),
        }
    }

    pub fn embedding_dim(&self) -> usize {
        match &self.heads {
            Heads::Deterministic { w_out } => w_out.ncols(),
            Heads::Variational { w_mu, .. } => w_mu.ncols(),
        }
    }

    /// Writes one CSV per matrix plus `manifest.json` into `dir`.
    pub fn write_checkpoint(&self, dir: impl AsRef<Path>, seed: u64) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let mut matrices = Vec::new();
        for (name, t) in self.tensors() {
            let file = format!("{name}.csv");
            write_matrix_csv(dir.join(&file), t.view())?;
            matrices.push(serde_json::json!({
                "name": name,
                "rows": t.nrows(),
                "cols": t.ncols(),
                "file": file,
            }));
        }
        let manifest = serde_json::json!({
            "kind": self.kind,
            "variational": self.is_variational(),
            "seed": seed,
            "matrices": matrices,
        });
        let path = dir.join("manifest.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
    }

    pub fn read_checkpoint(dir: impl AsRef<Path>) -> Result<ModelParams> {
        let dir = dir.as_ref();
        let path = dir.join("manifest.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: serde_json::Value = serde_json::from_str(&text)?;
        let kind: EncoderKind = serde_json::from_value(manifest["kind"].clone())?;
        let load = |name: &str| -> Result<Option<Array2<f64>>> {
            let entry = manifest["matrices"]
                .as_array()
                .and_then(|list| list.iter().find(|m| m["name"] == name));
            match entry {
                None => Ok(None),
                Some(m) => {
                    let file = m["file"].as_str().unwrap_or_default();
                    Ok(Some(read_matrix_csv(dir.join(file))?))
                }
            }
        };
        let w0 = load("w0")?;
        let missing = |name: &str| Error::InvalidArgument(format!("checkpoint lacks {name}"));
        let heads = if manifest["variational"].as_bool().unwrap_or(false) {
            Heads::Variational {
                w_mu: load("w_mu")?.ok_or_else(|| missing("w_mu"))?,
                w_logvar: load("w_logvar")?.ok_or_else(|| missing("w_logvar"))?,
            }
        } else {
            Heads::Deterministic {
                w_out: load("w_out")?.ok_or_else(|| missing("w_out"))?,
            }
        };
        Ok(ModelParams { kind, w0, heads })
    }
}

/// Glorot-uniform initialisation, `U(-r, r)` with `r = sqrt(6 / (fan_in + fan_out))`.
pub fn init_params(
    kind: EncoderKind,
    variational: bool,
    f: usize,
    h: usize,
    d: usize,
    seed: u64,
) -> Result<ModelParams> {
    if f == 0 || d == 0 || (kind == EncoderKind::Gcn && h == 0) {
        return Err(Error::InvalidArgument(format!(
            "encoder dimensions must be positive (f={f}, h={h}, d={d})"
        )));
    }
    let mut rng = rng::rng(seed);
    let mut glorot = |rows: usize, cols: usize| {
        let r = (6.0 / (rows + cols) as f64).sqrt();
        let dist = Uniform::new(-r, r).expect("valid Glorot bound");
        Array2::from_shape_simple_fn((rows, cols), || dist.sample(&mut rng))
    };
    let (w0, head_in) = match kind {
        EncoderKind::Linear => (None, f),
        EncoderKind::Gcn => (Some(glorot(f, h)), h),
    };
    let heads = if variational {
        let w_mu = glorot(head_in, d);
        let w_logvar = glorot(head_in, d);
        Heads::Variational { w_mu, w_logvar }
    } else {
        Heads::Deterministic {
            w_out: glorot(head_in, d),
        }
    };
    Ok(ModelParams { kind, w0, heads })
}

/// Node embeddings; `mu` and `logvar` are present for variational encoders.
#[derive(Debug, Clone, PartialEq)]
pub struct Embedding {
    pub z: Array2<f64>,
    pub mu: Option<Array2<f64>>,
    pub logvar: Option<Array2<f64>>,
}

impl Embedding {
    pub fn from_z(z: Array2<f64>) -> Embedding {
        Embedding {
            z,
            mu: None,
            logvar: None,
        }
    }

    pub fn n(&self) -> usize {
        self.z.nrows()
    }

    pub fn dim(&self) -> usize {
        self.z.ncols()
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        write_matrix_csv(path, self.z.view())
    }

    pub fn read_csv(path: impl AsRef<Path>) -> Result<Embedding> {
        Ok(Embedding::from_z(read_matrix_csv(path)?))
    }
}

pub(crate) fn write_matrix_csv(path: impl AsRef<Path>, m: ArrayView2<'_, f64>) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::with_capacity(m.len() * 20);
    for row in m.rows() {
        for (k, v) in row.iter().enumerate() {
            if k > 0 {
                out.push(',');
            }
            write!(out, "{v}").unwrap();
        }
        out.push('\n');
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

pub(crate) fn read_matrix_csv(path: impl AsRef<Path>) -> Result<Array2<f64>> {
    match FeatureMatrix::read_csv(path)? {
        FeatureMatrix::Dense(x) => Ok(x),
        FeatureMatrix::Identity(_) => unreachable!(),
    }
}

/// Numerically stable logistic function.
pub fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `σ(z_i · z_j)`.
pub fn decode_pair(e: &Embedding, i: usize, j: usize) -> Result<f64> {
    let n = e.n();
    for id in [i, j] {
        if id >= n {
            return Err(Error::NodeOutOfRange { id, n });
        }
    }
    Ok(sigmoid(e.z.row(i).dot(&e.z.row(j))))
}

/// Dropout mask on a layer input, stored as per-entry scale factors
/// (`0` or `1 / (1 - rate)`).
#[derive(Debug, Clone)]
enum InputMask {
    None,
    /// Diagonal of the implicit identity.
    Diagonal(Vec<f64>),
    Dense(Array2<f64>),
}

/// Intermediate values of a forward pass, kept for backpropagation.
#[derive(Debug, Clone)]
pub struct ForwardCache {
    input_mask: InputMask,
    /// GCN pre-activation `Ã X W0`.
    hidden_pre: Option<Array2<f64>>,
    /// Dropped-out hidden activations fed to the heads.
    hidden: Option<Array2<f64>>,
    hidden_mask: Option<Array2<f64>>,
    logvar_raw: Option<Array2<f64>>,
    epsilon: Option<Array2<f64>>,
}

fn dropout_scales<R: Rng>(rng: &mut R, len: usize, rate: f64) -> Vec<f64> {
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| {
            if rng.random::<f64>() < rate {
                0.0
            } else {
                keep
            }
        })
        .collect()
}

/// `X' · w` where `X'` is the (possibly dropped-out) input.
fn input_times(x: &FeatureMatrix, mask: &InputMask, w: &Array2<f64>) -> Array2<f64> {
    match (x, mask) {
        (FeatureMatrix::Identity(_), InputMask::None) => w.clone(),
        (FeatureMatrix::Identity(_), InputMask::Diagonal(scale)) => {
            let mut out = w.clone();
            for (mut row, &s) in out.rows_mut().into_iter().zip(scale) {
                row *= s;
            }
            out
        }
        (FeatureMatrix::Dense(x), InputMask::None) => x.dot(w),
        (FeatureMatrix::Dense(x), InputMask::Dense(mask)) => (x * mask).dot(w),
        _ => unreachable!("mask shape follows the feature kind"),
    }
}

/// `X'ᵀ · g`.
fn input_transpose_times(x: &FeatureMatrix, mask: &InputMask, g: &Array2<f64>) -> Array2<f64> {
    match (x, mask) {
        (FeatureMatrix::Identity(_), InputMask::None) => g.clone(),
        (FeatureMatrix::Identity(_), InputMask::Diagonal(_)) => input_times(x, mask, g),
        (FeatureMatrix::Dense(x), InputMask::None) => x.t().dot(g),
        (FeatureMatrix::Dense(x), InputMask::Dense(mask)) => (x * mask).t().dot(g),
        _ => unreachable!("mask shape follows the feature kind"),
    }
}

fn check_finite(m: &Array2<f64>, what: &'static str) -> Result<()> {
    if m.iter().all(|v| v.is_finite()) {
        Ok(())
    } else {
        Err(Error::NonFinite(what))
    }
}

/// Runs the encoder. In train mode, dropout (if `dropout > 0`) and the
/// reparameterisation noise are drawn from `rng`; eval mode consumes no
/// randomness and returns `Z = μ` for variational encoders.
pub fn encode<R: Rng>(
    params: &ModelParams,
    op: &SparseOperator,
    x: &FeatureMatrix,
    rng: &mut R,
    dropout: f64,
    train_mode: bool,
) -> Result<Embedding> {
    forward(params, op, x, rng, dropout, train_mode).map(|(e, _)| e)
}

/// Encoder forward pass that also returns what backpropagation needs.
pub fn forward<R: Rng>(
    params: &ModelParams,
    op: &SparseOperator,
    x: &FeatureMatrix,
    rng: &mut R,
    dropout: f64,
    train_mode: bool,
) -> Result<(Embedding, ForwardCache)> {
    if op.n() != x.rows() {
        return Err(Error::DimensionMismatch(format!(
            "operator is {0}×{0}, features have {1} rows",
            op.n(),
            x.rows()
        )));
    }
    if params.input_dim() != x.cols() {
        return Err(Error::DimensionMismatch(format!(
            "encoder expects {} input features, got {}",
            params.input_dim(),
            x.cols()
        )));
    }
    if !(0.0..1.0).contains(&dropout) {
        return Err(Error::InvalidArgument(format!(
            "dropout must lie in [0, 1), got {dropout}"
        )));
    }
    if !params.is_finite() {
        return Err(Error::NonFinite("encoder weights"));
    }
    let drop = train_mode && dropout > 0.0;
    let input_mask = match (drop, x) {
        (false, _) => InputMask::None,
        (true, FeatureMatrix::Identity(n)) => InputMask::Diagonal(dropout_scales(rng, *n, dropout)),
        (true, FeatureMatrix::Dense(m)) => InputMask::Dense(
            Array2::from_shape_vec(m.raw_dim(), dropout_scales(rng, m.len(), dropout)).unwrap(),
        ),
    };

    let mut cache = ForwardCache {
        input_mask,
        hidden_pre: None,
        hidden: None,
        hidden_mask: None,
        logvar_raw: None,
        epsilon: None,
    };

    if let Some(w0) = &params.w0 {
        let pre = op.matmul(input_times(x, &cache.input_mask, w0).view());
        let mut hidden = pre.mapv(|v| v.max(0.0));
        if drop {
            let mask = Array2::from_shape_vec(
                hidden.raw_dim(),
                dropout_scales(rng, hidden.len(), dropout),
            )
            .unwrap();
            hidden *= &mask;
            cache.hidden_mask = Some(mask);
        }
        cache.hidden_pre = Some(pre);
        cache.hidden = Some(hidden);
    }

    let head = |w: &Array2<f64>| -> Array2<f64> {
        match &cache.hidden {
            Some(h) => op.matmul(h.dot(w).view()),
            None => op.matmul(input_times(x, &cache.input_mask, w).view()),
        }
    };

    let embedding = match &params.heads {
        Heads::Deterministic { w_out } => Embedding::from_z(head(w_out)),
        Heads::Variational { w_mu, w_logvar } => {
            let mu = head(w_mu);
            let raw = head(w_logvar);
            let logvar = raw.mapv(|v| v.clamp(-LOGVAR_BOUND, LOGVAR_BOUND));
            let z = if train_mode {
                let eps = Array2::from_shape_simple_fn(mu.raw_dim(), || {
                    <StandardNormal as Distribution<f64>>::sample(&StandardNormal, rng)
                });
                let z = &mu + &(logvar.mapv(|v| (0.5 * v).exp()) * &eps);
                cache.epsilon = Some(eps);
                z
            } else {
                mu.clone()
            };
            cache.logvar_raw = Some(raw);
            Embedding {
                z,
                mu: Some(mu),
                logvar: Some(logvar),
            }
        }
    };
    check_finite(&embedding.z, "embedding")?;
    Ok((embedding, cache))
}

/// Gradients arriving at the encoder outputs.
#[derive(Debug, Clone)]
pub enum OutputGrad {
    Deterministic(Array2<f64>),
    /// Gradients with respect to `μ` and the clamped log-variance.
    Variational {
        mu: Array2<f64>,
        logvar: Array2<f64>,
    },
}

impl ForwardCache {
    /// Reparameterisation noise drawn in train mode.
    pub fn epsilon(&self) -> Option<&Array2<f64>> {
        self.epsilon.as_ref()
    }
}

/// Reverse-mode pass through the encoder. Relies on `op` being symmetric.
pub fn backward(
    params: &ModelParams,
    op: &SparseOperator,
    x: &FeatureMatrix,
    cache: &ForwardCache,
    grad: &OutputGrad,
) -> ModelParams {
    let mut grads = params.zeros_like();
    let head_input_t_times = |g: &Array2<f64>| -> Array2<f64> {
        match &cache.hidden {
            Some(h) => h.t().dot(g),
            None => input_transpose_times(x, &cache.input_mask, g),
        }
    };
    let mut d_hidden: Option<Array2<f64>> =
        cache.hidden.as_ref().map(|h| Array2::zeros(h.raw_dim()));
    let mut head_backward = |w: &Array2<f64>, d_out: &Array2<f64>| -> Array2<f64> {
        let d_pre = op.matmul(d_out.view());
        if let Some(dh) = d_hidden.as_mut() {
            *dh += &d_pre.dot(&w.t());
        }
        head_input_t_times(&d_pre)
    };

    match (&params.heads, grad, &mut grads.heads) {
        (
            Heads::Deterministic { w_out },
            OutputGrad::Deterministic(dz),
            Heads::Deterministic { w_out: g_out },
        ) => {
            *g_out = head_backward(w_out, dz);
        }
        (
            Heads::Variational { w_mu, w_logvar },
            OutputGrad::Variational {
                mu: dmu,
                logvar: dlv,
            },
            Heads::Variational {
                w_mu: g_mu,
                w_logvar: g_lv,
            },
        ) => {
            let raw = cache
                .logvar_raw
                .as_ref()
                .expect("variational forward cache");
            let mut dlv_raw = dlv.clone();
            Zip::from(&mut dlv_raw).and(raw).for_each(|d, &r| {
                if !(r > -LOGVAR_BOUND && r < LOGVAR_BOUND) {
                    *d = 0.0;
                }
            });
            *g_mu = head_backward(w_mu, dmu);
            *g_lv = head_backward(w_logvar, &dlv_raw);
        }
        _ => panic!("output gradient does not match the encoder heads"),
    }

    if let (Some(dh), Some(pre)) = (d_hidden, cache.hidden_pre.as_ref()) {
        let mut d_pre = dh;
        if let Some(mask) = &cache.hidden_mask {
            d_pre *= mask;
        }
        Zip::from(&mut d_pre).and(pre).for_each(|d, &p| {
            if p <= 0.0 {
                *d = 0.0;
            }
        });
        let d_t = op.matmul(d_pre.view());
        grads.w0 = Some(input_transpose_times(x, &cache.input_mask, &d_t));
    }
    grads
}

/// Rows of `m` listed in `rows`.
pub(crate) fn select_rows(m: &Array2<f64>, rows: &[usize]) -> Array2<f64> {
    m.select(Axis(0), rows)
}
