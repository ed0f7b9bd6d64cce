#![allow(dead_code)]

use modgae::graph::{fused_operator, FeatureMatrix, Graph};
use modgae::model::{init_params, EncoderKind};
use modgae::objective::{gradients, ObjectiveConfig};
use modgae::prior::{louvain, sparsify};
use modgae::rng;
use ndarray::{Array2, ArrayView2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Erdős–Rényi graph with at least one edge.
pub fn random_graph(n: usize, p: f64, seed: u64) -> Graph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut edges = Vec::new();
    for i in 0..n {
        for j in i + 1..n {
            if rng.random::<f64>() < p {
                edges.push((i, j));
            }
        }
    }
    if edges.is_empty() {
        edges.push((0, 1));
    }
    Graph::from_edges(n, edges).unwrap()
}

pub fn random_labels(n: usize, k: usize, rng: &mut impl Rng) -> Vec<usize> {
    (0..n).map(|_| rng.random_range(0..k)).collect()
}

/// Dense adjacency, for brute-force oracles.
pub fn dense(g: &Graph) -> Vec<Vec<f64>> {
    let mut a = vec![vec![0.0; g.n()]; g.n()];
    for (u, v) in g.edges() {
        a[u][v] = 1.0;
        a[v][u] = 1.0;
    }
    a
}

/// `(1/2m) Σ_ij [A_ij − d_i d_j / 2m] δ(c_i, c_j)` over all ordered pairs.
pub fn brute_modularity(g: &Graph, labels: &[usize]) -> f64 {
    let a = dense(g);
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let two_m: f64 = deg.iter().sum();
    let mut q = 0.0;
    for i in 0..g.n() {
        for j in 0..g.n() {
            if labels[i] == labels[j] {
                q += a[i][j] - deg[i] * deg[j] / two_m;
            }
        }
    }
    q / two_m
}

/// `(β/2m) Σ_ij [A_ij − d_i d_j / 2m] exp(−γ‖z_i − z_j‖²)` over all ordered pairs.
pub fn brute_regularizer(z: ArrayView2<'_, f64>, g: &Graph, beta: f64, gamma: f64) -> f64 {
    let a = dense(g);
    let deg: Vec<f64> = a.iter().map(|r| r.iter().sum()).collect();
    let two_m: f64 = deg.iter().sum();
    let mut total = 0.0;
    for i in 0..g.n() {
        for j in 0..g.n() {
            let dist: f64 = (0..z.ncols())
                .map(|k| (z[[i, k]] - z[[j, k]]).powi(2))
                .sum();
            total += (a[i][j] - deg[i] * deg[j] / two_m) * (-gamma * dist).exp();
        }
    }
    beta / two_m * total
}

/// Fraction of (positive, negative) pairs ordered correctly, ties counting half.
pub fn brute_auc(scores: &[f64], labels: &[bool]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &li) in labels.iter().enumerate() {
        for (j, &lj) in labels.iter().enumerate() {
            if li && !lj {
                pairs += 1.0;
                if scores[i] > scores[j] {
                    wins += 1.0;
                } else if scores[i] == scores[j] {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

/// Step integral `Σ_k (R_k − R_{k−1}) P_k`, with each item's rank found by
/// counting the items placed ahead of it.
pub fn curve_ap(scores: &[f64], labels: &[bool]) -> f64 {
    let n = scores.len();
    let ahead = |i: usize| {
        (0..n)
            .filter(|&j| scores[j] > scores[i] || (scores[j] == scores[i] && j < i))
            .count()
    };
    let positives = labels.iter().filter(|&&l| l).count() as f64;
    let mut area = 0.0;
    for i in (0..n).filter(|&i| labels[i]) {
        let rank = ahead(i) + 1;
        let hits = (0..n)
            .filter(|&j| labels[j] && (j == i || ahead(j) < rank - 1))
            .count();
        area += (1.0 / positives) * hits as f64 / rank as f64;
    }
    area
}

fn binomial(n: usize, k: usize) -> f64 {
    if k > n {
        return 0.0;
    }
    let k = k.min(n - k);
    let mut c = 1.0f64;
    for i in 0..k {
        c = c * (n - i) as f64 / (i + 1) as f64;
    }
    c
}

fn table(a: &[usize], b: &[usize]) -> (Vec<Vec<usize>>, Vec<usize>, Vec<usize>) {
    let ka = a.iter().max().unwrap() + 1;
    let kb = b.iter().max().unwrap() + 1;
    let mut t = vec![vec![0usize; kb]; ka];
    for (&x, &y) in a.iter().zip(b) {
        t[x][y] += 1;
    }
    let rows: Vec<usize> = t.iter().map(|r| r.iter().sum()).collect();
    let cols: Vec<usize> = (0..kb).map(|j| t.iter().map(|r| r[j]).sum()).collect();
    (t, rows, cols)
}

/// AMI from the contingency table, with the expected mutual information
/// summed over exact hypergeometric probabilities. Empty labels are dropped.
pub fn contingency_ami(a: &[usize], b: &[usize]) -> f64 {
    let (t, rows, cols) = table(a, b);
    let rows: Vec<usize> = rows.into_iter().filter(|&r| r > 0).collect();
    let cols: Vec<usize> = cols.into_iter().filter(|&c| c > 0).collect();
    if rows.len() == 1 && cols.len() == 1 {
        return 1.0;
    }
    let n = a.len();
    let nf = n as f64;
    let h = |sizes: &[usize]| -> f64 {
        sizes
            .iter()
            .map(|&s| s as f64 / nf)
            .map(|p| -p * p.ln())
            .sum()
    };
    let mut mi = 0.0;
    let row_sizes: Vec<usize> = t.iter().map(|r| r.iter().sum()).collect();
    for (i, r) in t.iter().enumerate() {
        for (j, &nij) in r.iter().enumerate() {
            if nij > 0 {
                let col: usize = t.iter().map(|r| r[j]).sum();
                let x = nij as f64;
                mi += x / nf * (nf * x / (row_sizes[i] * col) as f64).ln();
            }
        }
    }
    let mut emi = 0.0;
    for &ai in &rows {
        for &bj in &cols {
            for nij in 1..=ai.min(bj) {
                let p = binomial(ai, nij) * binomial(n - ai, bj - nij) / binomial(n, bj);
                if p > 0.0 {
                    let x = nij as f64;
                    emi += p * x / nf * (nf * x / (ai * bj) as f64).ln();
                }
            }
        }
    }
    let mean_h = 0.5 * (h(&rows) + h(&cols));
    (mi - emi) / (mean_h - emi)
}

/// ARI in its textbook form over unordered pair counts.
pub fn contingency_ari(a: &[usize], b: &[usize]) -> f64 {
    let (t, rows, cols) = table(a, b);
    let pairs = |x: usize| binomial(x, 2);
    let index: f64 = t.iter().flatten().map(|&x| pairs(x)).sum();
    let sum_a: f64 = rows.iter().map(|&x| pairs(x)).sum();
    let sum_b: f64 = cols.iter().map(|&x| pairs(x)).sum();
    let expected = sum_a * sum_b / pairs(a.len());
    let max = 0.5 * (sum_a + sum_b);
    if max == expected {
        return 1.0;
    }
    (index - expected) / (max - expected)
}

/// Sum of squared distances to cluster means.
pub fn inertia(z: ArrayView2<'_, f64>, labels: &[usize], k: usize) -> f64 {
    let d = z.ncols();
    let mut sums = vec![vec![0.0; d]; k];
    let mut counts = vec![0usize; k];
    for (i, &c) in labels.iter().enumerate() {
        counts[c] += 1;
        for t in 0..d {
            sums[c][t] += z[[i, t]];
        }
    }
    let mut total = 0.0;
    for (i, &c) in labels.iter().enumerate() {
        for t in 0..d {
            total += (z[[i, t]] - sums[c][t] / counts[c] as f64).powi(2);
        }
    }
    total
}

/// Smallest inertia over every assignment of the rows to `k` non-empty clusters.
pub fn brute_kmeans(z: ArrayView2<'_, f64>, k: usize) -> f64 {
    let n = z.nrows();
    let mut labels = vec![0usize; n];
    let mut best = f64::INFINITY;
    loop {
        let mut used = vec![false; k];
        labels.iter().for_each(|&c| used[c] = true);
        if used.iter().all(|&u| u) {
            best = best.min(inertia(z, &labels, k));
        }
        let mut pos = 0;
        loop {
            if pos == n {
                return best;
            }
            labels[pos] += 1;
            if labels[pos] < k {
                break;
            }
            labels[pos] = 0;
            pos += 1;
        }
    }
}

/// Largest relative error between analytic and central-difference gradients.
pub fn worst_fd_error(kind: EncoderKind, variational: bool, draw: u64) -> f64 {
    let g = random_graph(10, 0.3, 100 + draw);
    let prior = sparsify(&louvain(&g, draw), 2, 0.5, draw).unwrap();
    let op = fused_operator(&g, &prior).unwrap();
    let mut feat_rng = rng::rng(draw);
    let x = if draw.is_multiple_of(2) {
        FeatureMatrix::Identity(10)
    } else {
        FeatureMatrix::Dense(Array2::from_shape_simple_fn((10, 4), || {
            feat_rng.random_range(-1.0..1.0)
        }))
    };
    let cfg = ObjectiveConfig {
        beta: 0.8,
        gamma: 0.7,
        dropout: if kind == EncoderKind::Gcn { 0.2 } else { 0.0 },
    };
    let params = init_params(kind, variational, x.cols(), 6, 3, 7 * draw + 1).unwrap();
    let noise = rng::rng(999 + draw);
    let total = |p: &modgae::model::ModelParams| {
        gradients(p, &op, &x, &g, &cfg, None, &mut noise.clone())
            .unwrap()
            .1
            .total
    };
    let (analytic, _) = gradients(&params, &op, &x, &g, &cfg, None, &mut noise.clone()).unwrap();

    let h = 1e-5;
    let mut worst = 0.0f64;
    for t in 0..params.tensors().len() {
        let shape = params.tensors()[t].1.dim();
        for r in 0..shape.0 {
            for c in 0..shape.1 {
                let mut plus = params.clone();
                plus.tensors_mut()[t].1[[r, c]] += h;
                let mut minus = params.clone();
                minus.tensors_mut()[t].1[[r, c]] -= h;
                let numeric = (total(&plus) - total(&minus)) / (2.0 * h);
                let a = analytic.tensors()[t].1[[r, c]];
                let err = (a - numeric).abs() / a.abs().max(numeric.abs()).max(1e-6);
                worst = worst.max(err);
            }
        }
    }
    worst
}
