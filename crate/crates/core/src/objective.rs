//! Training objective: weighted cross-entropy reconstruction, KL term,
//! soft-modularity regularizer, degree-biased subgraph sampling, and the
//! analytic gradient of the total with respect to the encoder weights.

use ndarray::linalg::general_mat_mul;
use ndarray::{s, Array2, ArrayView2, Zip};
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{FeatureMatrix, Graph, SparseOperator};
use crate::model::{self, Embedding, ModelParams, OutputGrad};
use crate::rng;

/// Probability clamp used inside the cross-entropy.
pub const PROB_CLAMP: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossBreakdown {
    #[serde(rename = "recon")]
    pub reconstruction: f64,
    pub kl: f64,
    #[serde(rename = "reg")]
    pub regularizer: f64,
    /// `reconstruction − regularizer` for GAE (minimised),
    /// `−reconstruction − kl + regularizer` for VGAE (maximised).
    pub total: f64,
}

/// Node subset used by the sampled objective, together with its induced graph.
#[derive(Debug, Clone, PartialEq)]
pub struct SubgraphSample {
    pub nodes: Vec<usize>,
    pub graph: Graph,
}

/// Settings that shape the objective.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ObjectiveConfig {
    pub beta: f64,
    pub gamma: f64,
    pub dropout: f64,
}

/// Pairwise terms of the objective: loss values and the gradient of
/// `recon − reg` with respect to the rows of `z`.
struct PairTerms {
    recon: f64,
    reg: f64,
    dz: Option<Array2<f64>>,
}

fn ce_weights(n: usize, m: usize) -> Result<(f64, f64)> {
    let n2 = (n * n) as f64;
    let sum_t = (2 * m + n) as f64;
    let negatives = n2 - sum_t;
    if negatives <= 0.0 {
        return Err(Error::InvalidArgument(
            "reconstruction target has no negative pairs (complete graph)".into(),
        ));
    }
    Ok((negatives / sum_t, n2 / (2.0 * negatives)))
}

/// `σ(x)` and `σ(-x)` from a single exponential.
#[inline]
fn sigmoid_pair(x: f64) -> (f64, f64) {
    let e = (-x.abs()).exp();
    let inv = 1.0 / (1.0 + e);
    if x >= 0.0 {
        (inv, e * inv)
    } else {
        (e * inv, inv)
    }
}

#[inline]
fn inside_clamp(p: f64) -> bool {
    p > PROB_CLAMP && p < 1.0 - PROB_CLAMP
}

/// Loss and derivative in `x = z_i·z_j` of one cross-entropy term.
#[cfg(test)]
fn ce_term(x: f64, positive: bool) -> (f64, f64) {
    let (p, q) = sigmoid_pair(x);
    if positive {
        let d = if inside_clamp(p) { -q } else { 0.0 };
        (-p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln(), d)
    } else {
        let d = if inside_clamp(p) { p } else { 0.0 };
        (-q.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln(), d)
    }
}

/// Rows per block of the Gram matrix.
const BLOCK: usize = 64;

/// Blocks evaluated concurrently before their results are merged.
const BLOCKS_PER_ROUND: usize = 8;

/// What a call to [`pair_terms`] evaluates.
#[derive(Clone, Copy)]
struct Want {
    recon: bool,
    reg: bool,
    grad: bool,
}

struct BlockOut {
    recon: f64,
    reg: f64,
    /// Contribution `M Z` restricted to this block's upper-triangular part.
    dz: Option<Array2<f64>>,
    row_w: Vec<f64>,
}

/// Evaluates all `n²` ordered pairs from the upper triangle of `Z Zᵀ`, one
/// row block at a time, so memory stays at `BLOCK × n`. Every pair is first
/// scored as a non-edge; edges and the diagonal are then corrected from the
/// sparse adjacency.
///
/// The gradient is `dZ = M Z + 4cγ diag(Σ_j W_ij) Z` with the symmetric pair
/// matrix `M`. Only `j ≥ i` entries are formed: a block adds `M_blk Z_cols`
/// to its own rows and `M_blkᵀ Z_rows` to the columns, with the diagonal
/// halved to avoid counting it twice. Blocks are merged in a fixed order, so
/// results do not depend on the thread count.
fn pair_terms(
    z: ArrayView2<'_, f64>,
    g: &Graph,
    beta: f64,
    gamma: f64,
    want: Want,
) -> Result<PairTerms> {
    let n = z.nrows();
    let d = z.ncols();
    let (pos_weight, norm) = if want.recon {
        ce_weights(n, g.m())?
    } else {
        (0.0, 0.0)
    };
    let scale = norm / (n * n) as f64;
    let two_m = 2.0 * g.m() as f64;
    let with_reg = want.reg && g.m() > 0;
    let coef = if with_reg { beta / two_m } else { 0.0 };
    let reg_grad = 4.0 * coef * gamma;
    let sq: Vec<f64> = z.rows().into_iter().map(|r| r.dot(&r)).collect();
    let deg: Vec<f64> = (0..n).map(|i| g.degree(i) as f64).collect();
    let clamp_ln = |p: f64| p.clamp(PROB_CLAMP, 1.0 - PROB_CLAMP).ln();

    let block = |b: usize| -> BlockOut {
        let r0 = b * BLOCK;
        let r1 = (r0 + BLOCK).min(n);
        let cols = n - r0;
        let z_rows = z.slice(s![r0..r1, ..]);
        let z_cols = z.slice(s![r0.., ..]);
        let mut gram = Array2::<f64>::zeros((r1 - r0, cols));
        general_mat_mul(1.0, &z_rows, &z_cols.t(), 0.0, &mut gram);
        let mut weights = Array2::<f64>::zeros(if want.grad { gram.dim() } else { (0, 0) });
        let mut row_w = vec![0.0; if with_reg { n } else { 0 }];
        let mut recon = 0.0;
        let mut reg = 0.0;
        for (local, i) in (r0..r1).enumerate() {
            let srow = gram.row(local);
            let srow = srow.as_slice().expect("gram rows are contiguous");
            let (sq_i, d_i) = (sq[i], deg[i]);
            let mut m_row = if want.grad {
                Some(weights.row_mut(local))
            } else {
                None
            };
            for j in i..n {
                let c = j - r0;
                let x = srow[c];
                let twice = if j == i { 1.0 } else { 2.0 };
                let mut m = 0.0;
                if want.recon {
                    let (p, q) = sigmoid_pair(x);
                    recon -= twice * clamp_ln(q);
                    if inside_clamp(p) {
                        m = 2.0 * scale * p;
                    }
                }
                if with_reg {
                    let dist = (sq_i + sq[j] - 2.0 * x).max(0.0);
                    let w = -(d_i * deg[j] / two_m) * (-gamma * dist).exp();
                    reg += twice * w;
                    if j != i {
                        row_w[i] += w;
                        row_w[j] += w;
                        m -= reg_grad * w;
                    }
                }
                if let Some(row) = m_row.as_mut() {
                    row[c] = if j == i { 0.5 * m } else { m };
                }
            }
            // Edges above the diagonal, and the diagonal itself, are
            // positives of the target.
            let upper = g.neighbors(i).iter().copied().filter(|&j| j > i);
            for j in std::iter::once(i).chain(upper) {
                let c = j - r0;
                let x = srow[c];
                let twice = if j == i { 1.0 } else { 2.0 };
                let half = if j == i { 0.5 } else { 1.0 };
                if want.recon {
                    let (p, q) = sigmoid_pair(x);
                    recon += twice * (clamp_ln(q) - pos_weight * clamp_ln(p));
                    if inside_clamp(p) {
                        if let Some(row) = m_row.as_mut() {
                            row[c] -= half * 2.0 * scale * (pos_weight * q + p);
                        }
                    }
                }
                if with_reg && j != i {
                    let dist = (sq_i + sq[j] - 2.0 * x).max(0.0);
                    let w = (-gamma * dist).exp();
                    reg += twice * w;
                    row_w[i] += w;
                    row_w[j] += w;
                    if let Some(row) = m_row.as_mut() {
                        row[c] -= reg_grad * w;
                    }
                }
            }
        }
        let dz = want.grad.then(|| {
            let mut dz = Array2::<f64>::zeros((n, d));
            general_mat_mul(
                1.0,
                &weights,
                &z_cols,
                1.0,
                &mut dz.slice_mut(s![r0..r1, ..]),
            );
            general_mat_mul(
                1.0,
                &weights.t(),
                &z_rows,
                1.0,
                &mut dz.slice_mut(s![r0.., ..]),
            );
            dz
        });
        BlockOut {
            recon,
            reg,
            dz,
            row_w,
        }
    };

    let n_blocks = n.div_ceil(BLOCK);
    let mut terms = PairTerms {
        recon: 0.0,
        reg: 0.0,
        dz: want.grad.then(|| Array2::zeros((n, d))),
    };
    let mut row_w = vec![0.0; if with_reg { n } else { 0 }];
    for start in (0..n_blocks).step_by(BLOCKS_PER_ROUND) {
        let end = (start + BLOCKS_PER_ROUND).min(n_blocks);
        let outs: Vec<BlockOut> = (start..end).into_par_iter().map(block).collect();
        for out in outs {
            terms.recon += out.recon;
            terms.reg += out.reg;
            if let (Some(dz), Some(part)) = (terms.dz.as_mut(), out.dz) {
                *dz += &part;
            }
            for (acc, w) in row_w.iter_mut().zip(out.row_w) {
                *acc += w;
            }
        }
    }
    if let (Some(dz), true) = (terms.dz.as_mut(), with_reg) {
        for (i, mut row) in dz.rows_mut().into_iter().enumerate() {
            row.scaled_add(reg_grad * row_w[i], &z.row(i));
        }
    }
    terms.recon *= scale;
    terms.reg *= coef;
    Ok(terms)
}

fn check_rows(e: &Embedding, g: &Graph) -> Result<()> {
    if e.n() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "embedding has {} rows, graph has {} nodes",
            e.n(),
            g.n()
        )));
    }
    if !e.z.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("embedding"));
    }
    Ok(())
}

/// Weighted cross-entropy between `σ(Z Zᵀ)` and `A + I`.
pub fn reconstruction_loss(e: &Embedding, g: &Graph) -> Result<f64> {
    check_rows(e, g)?;
    Ok(pair_terms(
        e.z.view(),
        g,
        0.0,
        0.0,
        Want {
            recon: true,
            reg: false,
            grad: false,
        },
    )?
    .recon)
}

/// Per-node average KL divergence from the standard normal prior.
pub fn kl_divergence(e: &Embedding) -> Result<f64> {
    let (Some(mu), Some(lv)) = (&e.mu, &e.logvar) else {
        return Err(Error::InvalidArgument(
            "KL divergence needs a variational embedding".into(),
        ));
    };
    Ok(kl_rows(mu.view(), lv.view()))
}

fn kl_rows(mu: ArrayView2<'_, f64>, lv: ArrayView2<'_, f64>) -> f64 {
    let mut total = 0.0;
    Zip::from(mu)
        .and(lv)
        .for_each(|&m, &l| total += 0.5 * (m * m + l.exp() - 1.0 - l));
    total / mu.nrows() as f64
}

/// `(β / 2m) Σ_ij [A_ij − d_i d_j / 2m] exp(−γ ‖z_i − z_j‖²)` over all ordered
/// pairs, diagonal included.
pub fn modularity_regularizer(e: &Embedding, g: &Graph, beta: f64, gamma: f64) -> Result<f64> {
    check_rows(e, g)?;
    if g.m() == 0 {
        return Err(Error::EmptyGraph);
    }
    if !(beta >= 0.0 && gamma >= 0.0) {
        return Err(Error::InvalidArgument(format!(
            "β and γ must be non-negative (β={beta}, γ={gamma})"
        )));
    }
    if beta == 0.0 {
        return Ok(0.0);
    }
    regularizer_only(e.z.view(), g, beta, gamma)
}

fn regularizer_only(z: ArrayView2<'_, f64>, g: &Graph, beta: f64, gamma: f64) -> Result<f64> {
    Ok(pair_terms(
        z,
        g,
        beta,
        gamma,
        Want {
            recon: false,
            reg: true,
            grad: false,
        },
    )?
    .reg)
}

/// Draws `n_sub` distinct nodes, each successive draw picking a remaining node
/// with probability proportional to its degree. Once every positive-degree
/// node is taken, the rest is filled uniformly from isolated nodes.
pub fn fastgae_sample(g: &Graph, n_sub: usize, seed: u64) -> Result<SubgraphSample> {
    let n = g.n();
    if n_sub == 0 || n_sub > n {
        return Err(Error::InvalidArgument(format!(
            "sample size {n_sub} must lie in 1..={n}"
        )));
    }
    let nodes: Vec<usize> = if n_sub == n {
        (0..n).collect()
    } else {
        // Exponential-key formulation of successive weighted sampling:
        // the top-n_sub keys ln(u)/d_i follow the sequential draw distribution.
        let mut rng = rng::rng(seed);
        let mut keyed: Vec<(bool, f64, usize)> = (0..n)
            .map(|i| {
                let u: f64 = rng.random::<f64>();
                let d = g.degree(i);
                if d > 0 {
                    (true, (1.0 - u).ln() / d as f64, i)
                } else {
                    (false, u, i)
                }
            })
            .collect();
        keyed.sort_by(|a, b| b.0.cmp(&a.0).then(b.1.total_cmp(&a.1)).then(a.2.cmp(&b.2)));
        let mut nodes: Vec<usize> = keyed[..n_sub].iter().map(|k| k.2).collect();
        nodes.sort_unstable();
        nodes
    };
    let graph = g.induced(&nodes)?;
    Ok(SubgraphSample { nodes, graph })
}

/// Forward pass, objective, and reverse-mode gradient of the total.
///
/// The returned gradient is that of `LossBreakdown::total`; callers descend it
/// for deterministic encoders and ascend it for variational ones. When
/// `sample` is given, every loss term is evaluated on the sampled nodes and
/// their induced graph only.
pub fn gradients<R: Rng>(
    params: &ModelParams,
    op: &SparseOperator,
    x: &FeatureMatrix,
    g: &Graph,
    cfg: &ObjectiveConfig,
    sample: Option<&SubgraphSample>,
    rng: &mut R,
) -> Result<(ModelParams, LossBreakdown)> {
    if op.n() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "operator has {} nodes, graph has {}",
            op.n(),
            g.n()
        )));
    }
    let (emb, cache) = model::forward(params, op, x, rng, cfg.dropout, true)?;
    let n = g.n();
    let d = emb.dim();

    let (sub_z, sub_g) = match sample {
        Some(s) => (model::select_rows(&emb.z, &s.nodes), &s.graph),
        None => (emb.z.clone(), g),
    };
    let with_reg = cfg.beta != 0.0;
    let terms = pair_terms(
        sub_z.view(),
        sub_g,
        cfg.beta,
        cfg.gamma,
        Want {
            recon: true,
            reg: with_reg,
            grad: true,
        },
    )?;
    if !terms.recon.is_finite() {
        return Err(Error::NonFinite("reconstruction loss"));
    }
    if !terms.reg.is_finite() {
        return Err(Error::NonFinite("modularity regularizer"));
    }
    let local_dz = terms.dz.expect("gradient requested");
    if !local_dz.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("loss gradient"));
    }

    // Gradient of (recon − reg) with respect to the full Z.
    let dz = match sample {
        Some(s) => {
            let mut dz = Array2::<f64>::zeros((n, d));
            for (local, &global) in s.nodes.iter().enumerate() {
                dz.row_mut(global).assign(&local_dz.row(local));
            }
            dz
        }
        None => local_dz,
    };

    let (output_grad, loss) = match (&emb.mu, &emb.logvar) {
        (None, _) | (_, None) => (
            OutputGrad::Deterministic(dz),
            LossBreakdown {
                reconstruction: terms.recon,
                kl: 0.0,
                regularizer: terms.reg,
                total: terms.recon - terms.reg,
            },
        ),
        (Some(mu), Some(lv)) => {
            let eps = cache.epsilon().expect("train-mode forward draws noise");
            let rows: Vec<usize> = match sample {
                Some(s) => s.nodes.clone(),
                None => (0..n).collect(),
            };
            let kl = match sample {
                Some(s) => kl_rows(
                    model::select_rows(mu, &s.nodes).view(),
                    model::select_rows(lv, &s.nodes).view(),
                ),
                None => kl_rows(mu.view(), lv.view()),
            };
            if !kl.is_finite() {
                return Err(Error::NonFinite("KL divergence"));
            }
            let inv = 1.0 / rows.len() as f64;
            // total = −recon − kl + reg, so dtotal/dZ = −dz.
            let mut dmu = dz.mapv(|v| -v);
            let mut dlv = Array2::<f64>::zeros((n, d));
            Zip::from(&mut dlv)
                .and(&dmu)
                .and(lv)
                .and(eps)
                .for_each(|out, &gz, &l, &e| *out = gz * 0.5 * (0.5 * l).exp() * e);
            for &i in &rows {
                for k in 0..d {
                    dmu[[i, k]] -= mu[[i, k]] * inv;
                    dlv[[i, k]] -= 0.5 * (lv[[i, k]].exp() - 1.0) * inv;
                }
            }
            (
                OutputGrad::Variational {
                    mu: dmu,
                    logvar: dlv,
                },
                LossBreakdown {
                    reconstruction: terms.recon,
                    kl,
                    regularizer: terms.reg,
                    total: -terms.recon - kl + terms.reg,
                },
            )
        }
    };

    let grads = model::backward(params, op, x, &cache, &output_grad);
    if !grads.is_finite() {
        return Err(Error::NonFinite("weight gradient"));
    }
    Ok((grads, loss))
}
