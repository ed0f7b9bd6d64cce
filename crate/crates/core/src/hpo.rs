//! Grid search on the unsupervised criterion `(validation AUC + Q) / 2`.
//!
//! Only the training graph and the validation pairs are visible here; the
//! search cannot see test edges or ground-truth communities.

use std::fs;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clustering::kmeans;
use crate::error::{Error, Result};
use crate::evaluation::{validation_auc, ValidationView};
use crate::graph::FeatureMatrix;
use crate::prior::modularity;
use crate::protocol::{run_seed, train_run};
use crate::rng::{self, Stream};
use crate::training::TrainConfig;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub lr: Vec<f64>,
    pub iterations: Vec<usize>,
    pub dropout: Vec<f64>,
    pub lambda: Vec<f64>,
    pub beta: Vec<f64>,
    pub gamma: Vec<f64>,
    pub s: Vec<usize>,
    #[serde(default = "default_runs")]
    pub runs_per_point: usize,
    #[serde(default)]
    pub base: TrainConfig,
}

fn default_runs() -> usize {
    3
}

impl GridSpec {
    /// A grid holding only `base`.
    pub fn single(base: TrainConfig) -> GridSpec {
        GridSpec {
            lr: vec![base.lr],
            iterations: vec![base.iterations],
            dropout: vec![base.dropout],
            lambda: vec![base.lambda],
            beta: vec![base.beta],
            gamma: vec![base.gamma],
            s: vec![base.s],
            runs_per_point: default_runs(),
            base,
        }
    }

    /// The full published search space.
    pub fn full(base: TrainConfig) -> GridSpec {
        GridSpec {
            lr: vec![0.001, 0.005, 0.01, 0.05, 0.1, 0.2],
            iterations: (1..=8).map(|k| 100 * k).collect(),
            dropout: vec![base.dropout],
            lambda: vec![
                0.0, 0.01, 0.05, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0,
            ],
            beta: vec![0.0, 0.01, 0.05, 0.1, 0.25, 0.5, 1.0, 1.5, 2.0],
            gamma: vec![0.1, 0.2, 0.5, 1.0, 2.0, 5.0, 10.0],
            s: vec![1, 2, 5, 10],
            ..GridSpec::single(base)
        }
    }

    /// A small sub-grid around the prior and regularizer strengths.
    pub fn desk(base: TrainConfig) -> GridSpec {
        GridSpec {
            lambda: vec![0.0, 0.25, 0.5],
            beta: vec![0.0, 0.5, 1.0],
            gamma: vec![0.25, 1.0],
            s: vec![1, 5],
            ..GridSpec::single(base)
        }
    }

    pub fn validate(&self) -> Result<()> {
        let sizes = [
            ("lr", self.lr.len()),
            ("iterations", self.iterations.len()),
            ("dropout", self.dropout.len()),
            ("lambda", self.lambda.len()),
            ("beta", self.beta.len()),
            ("gamma", self.gamma.len()),
            ("s", self.s.len()),
        ];
        if let Some((name, _)) = sizes.iter().find(|(_, len)| *len == 0) {
            return Err(Error::InvalidArgument(format!("grid list {name} is empty")));
        }
        if self.runs_per_point == 0 {
            return Err(Error::InvalidArgument(
                "runs_per_point must be positive".into(),
            ));
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.lr.len()
            * self.iterations.len()
            * self.dropout.len()
            * self.lambda.len()
            * self.beta.len()
            * self.gamma.len()
            * self.s.len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Grid point `index` in row-major order, `lr` varying slowest.
    pub fn point(&self, mut index: usize) -> TrainConfig {
        let mut pick = |len: usize| {
            let i = index % len;
            index /= len;
            i
        };
        let s = self.s[pick(self.s.len())];
        let gamma = self.gamma[pick(self.gamma.len())];
        let beta = self.beta[pick(self.beta.len())];
        let lambda = self.lambda[pick(self.lambda.len())];
        let dropout = self.dropout[pick(self.dropout.len())];
        let iterations = self.iterations[pick(self.iterations.len())];
        let lr = self.lr[pick(self.lr.len())];
        TrainConfig {
            lr,
            iterations,
            dropout,
            lambda,
            beta,
            gamma,
            s,
            ..self.base.clone()
        }
    }

    /// Indices evaluated under a budget: evenly spaced over the grid order.
    pub fn selected(&self, budget: Option<usize>) -> Vec<usize> {
        let total = self.len();
        match budget {
            Some(b) if b < total => (0..b).map(|j| j * total / b).collect(),
            _ => (0..total).collect(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointResult {
    pub index: usize,
    pub config: TrainConfig,
    pub val_auc: f64,
    pub modularity: f64,
    /// `(val_auc + modularity) / 2`, or `-inf` when a run failed.
    pub criterion: f64,
    pub error: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResult {
    pub points: Vec<PointResult>,
    /// Position in `points` of the winner; ties go to the earlier point.
    pub best: usize,
}

impl GridResult {
    pub fn best_point(&self) -> &PointResult {
        &self.points[self.best]
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from(
            "index,lr,iterations,dropout,lambda,beta,gamma,s,val_auc,modularity,criterion,error\n",
        );
        for p in &self.points {
            let c = &p.config;
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{}\n",
                p.index,
                c.lr,
                c.iterations,
                c.dropout,
                c.lambda,
                c.beta,
                c.gamma,
                c.s,
                p.val_auc,
                p.modularity,
                p.criterion,
                p.error.as_deref().unwrap_or("").replace([',', '\n'], ";")
            ));
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

fn score_point(
    view: &ValidationView<'_>,
    x: &FeatureMatrix,
    k: usize,
    config: &TrainConfig,
    runs: usize,
    seed: u64,
) -> Result<(f64, f64)> {
    let (mut auc_sum, mut q_sum) = (0.0, 0.0);
    for r in 0..runs {
        let s = run_seed(seed, r);
        let config = TrainConfig {
            seed: s,
            ..config.clone()
        };
        let out = train_run(view.train_graph, x, &config)?;
        auc_sum += validation_auc(view, &out.embedding)?;
        let communities =
            kmeans(out.embedding.z.view(), k, rng::derive(s, Stream::KMeans))?.partition;
        q_sum += modularity(view.train_graph, &communities)?;
    }
    Ok((auc_sum / runs as f64, q_sum / runs as f64))
}

/// Evaluates the selected grid points; `k` is the community count used
/// for k-means. Runs in the current rayon pool.
pub fn grid_search(
    view: &ValidationView<'_>,
    x: &FeatureMatrix,
    k: usize,
    grid: &GridSpec,
    budget: Option<usize>,
    seed: u64,
) -> Result<GridResult> {
    grid.validate()?;
    let points: Vec<PointResult> = grid
        .selected(budget)
        .into_par_iter()
        .map(|index| {
            let config = grid.point(index);
            match score_point(view, x, k, &config, grid.runs_per_point, seed) {
                Ok((val_auc, q)) => PointResult {
                    index,
                    config,
                    val_auc,
                    modularity: q,
                    criterion: 0.5 * (val_auc + q),
                    error: None,
                },
                Err(e) => {
                    log::warn!("grid point {index} failed: {e}");
                    PointResult {
                        index,
                        config,
                        val_auc: f64::NAN,
                        modularity: f64::NAN,
                        criterion: f64::NEG_INFINITY,
                        error: Some(e.to_string()),
                    }
                }
            }
        })
        .collect();
    let mut best = 0;
    for (i, p) in points.iter().enumerate() {
        if p.criterion > points[best].criterion {
            best = i;
        }
    }
    Ok(GridResult { points, best })
}
