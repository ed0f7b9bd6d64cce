#![allow(clippy::needless_range_loop)]

mod common;

use modgae::graph::{normalized_adjacency, FeatureMatrix, Graph};
use modgae::model::{init_params, Embedding, EncoderKind};
use modgae::objective::{
    fastgae_sample, gradients, modularity_regularizer, reconstruction_loss, ObjectiveConfig,
    PROB_CLAMP,
};
use modgae::prior::{modularity, Partition};
use modgae::rng;
use ndarray::Array2;
use proptest::prelude::*;
use rand::Rng;

fn random_z(n: usize, d: usize, scale: f64, seed: u64) -> Array2<f64> {
    let mut r = rng::rng(seed);
    Array2::from_shape_simple_fn((n, d), || r.random_range(-scale..scale))
}

/// Weighted cross-entropy written out pair by pair.
fn brute_reconstruction(z: &Array2<f64>, g: &Graph) -> f64 {
    let n = g.n();
    let a = common::dense(g);
    let n2 = (n * n) as f64;
    let sum_t = 2.0 * g.m() as f64 + n as f64;
    let pos_weight = (n2 - sum_t) / sum_t;
    let norm = n2 / (2.0 * (n2 - sum_t));
    let mut total = 0.0;
    for i in 0..n {
        for j in 0..n {
            let t = if i == j { 1.0 } else { a[i][j] };
            let x = z.row(i).dot(&z.row(j));
            let p = (1.0 / (1.0 + (-x).exp())).clamp(PROB_CLAMP, 1.0 - PROB_CLAMP);
            total += -pos_weight * t * p.ln() - (1.0 - t) * (1.0 - p).ln();
        }
    }
    norm * total / n2
}

#[test]
fn reconstruction_matches_pair_sum() {
    for seed in 0..20 {
        let n = 5 + seed as usize * 4;
        let g = common::random_graph(n, 0.2, seed);
        let z = random_z(n, 4, 1.5, seed);
        let fast = reconstruction_loss(&Embedding::from_z(z.clone()), &g).unwrap();
        let slow = brute_reconstruction(&z, &g);
        assert!(
            (fast - slow).abs() <= 1e-10 * slow.abs().max(1.0),
            "seed {seed}: {fast} vs {slow}"
        );
    }
}

#[test]
fn regularizer_matches_double_sum() {
    let mut r = rng::rng(3);
    for case in 0..60 {
        let n = r.random_range(2..=50);
        let g = common::random_graph(n, r.random_range(0.05..0.4), case);
        let z = random_z(n, 3, 1.0, case);
        let beta = r.random_range(0.01..2.0);
        let gamma = r.random_range(0.05..5.0);
        let fast = modularity_regularizer(&Embedding::from_z(z.clone()), &g, beta, gamma).unwrap();
        let slow = common::brute_regularizer(z.view(), &g, beta, gamma);
        assert!((fast - slow).abs() < 1e-10, "case {case}: {fast} vs {slow}");
    }
}

#[test]
fn regularizer_vanishes_on_coincident_embeddings() {
    for seed in 0..10 {
        let g = common::random_graph(30, 0.2, seed);
        let row = random_z(1, 5, 3.0, seed);
        let z = Array2::from_shape_fn((30, 5), |(_, k)| row[[0, k]]);
        let value = modularity_regularizer(&Embedding::from_z(z), &g, 1.3, 0.9).unwrap();
        assert!(value.abs() < 1e-10, "{value}");
    }
}

#[test]
fn regularizer_is_linear_in_beta() {
    for seed in 0..10 {
        let g = common::random_graph(40, 0.1, seed);
        let e = Embedding::from_z(random_z(40, 4, 1.0, seed));
        let unit = modularity_regularizer(&e, &g, 1.0, 0.6).unwrap();
        for beta in [0.0, 0.01, 0.5, 1.5, 7.0] {
            let value = modularity_regularizer(&e, &g, beta, 0.6).unwrap();
            assert!((value - beta * unit).abs() < 1e-12, "β={beta}");
        }
    }
}

#[test]
fn regularizer_approaches_modularity_for_separated_clusters() {
    let g = common::random_graph(40, 0.12, 8);
    let labels: Vec<usize> = (0..40).map(|i| i % 4).collect();
    // Communities sit on distinct axis points, far enough apart that γ‖Δ‖² ≥ 30.
    let z = Array2::from_shape_fn((40, 4), |(i, k)| if labels[i] == k { 6.0 } else { 0.0 });
    let beta = 0.7;
    let value = modularity_regularizer(&Embedding::from_z(z), &g, beta, 1.0).unwrap();
    let q = modularity(&g, &Partition::from_labels(&labels)).unwrap();
    assert!((value - beta * q).abs() < 1e-9, "{value} vs {}", beta * q);
}

proptest! {
    #[test]
    fn losses_invariant_under_relabelling(seed in 0u64..1000, rot in 1usize..20) {
        let n = 20;
        let g = common::random_graph(n, 0.2, seed);
        let z = random_z(n, 3, 1.0, seed);
        let perm: Vec<usize> = (0..n).map(|i| (i * 7 + rot) % n).collect();
        let pg = Graph::from_edges(n, g.edges().map(|(u, v)| (perm[u], perm[v]))).unwrap();
        let mut pz = Array2::zeros((n, 3));
        for i in 0..n {
            pz.row_mut(perm[i]).assign(&z.row(i));
        }
        let (e, pe) = (Embedding::from_z(z), Embedding::from_z(pz));
        let a = reconstruction_loss(&e, &g).unwrap();
        let b = reconstruction_loss(&pe, &pg).unwrap();
        prop_assert!((a - b).abs() < 1e-10 * a.abs().max(1.0));
        let a = modularity_regularizer(&e, &g, 1.0, 0.5).unwrap();
        let b = modularity_regularizer(&pe, &pg, 1.0, 0.5).unwrap();
        prop_assert!((a - b).abs() < 1e-10);
    }
}

#[test]
fn full_sample_equals_unsampled_path() {
    let g = common::random_graph(25, 0.2, 4);
    let op = normalized_adjacency(&g);
    let x = FeatureMatrix::Identity(25);
    let cfg = ObjectiveConfig {
        beta: 0.9,
        gamma: 0.4,
        dropout: 0.1,
    };
    let sample = fastgae_sample(&g, 25, 17).unwrap();
    assert_eq!(sample.nodes, (0..25).collect::<Vec<_>>());
    assert_eq!(sample.graph, g);
    for kind in [EncoderKind::Linear, EncoderKind::Gcn] {
        for variational in [false, true] {
            let params = init_params(kind, variational, 25, 8, 4, 2).unwrap();
            let noise = rng::rng(5);
            let (g_full, l_full) =
                gradients(&params, &op, &x, &g, &cfg, None, &mut noise.clone()).unwrap();
            let (g_sub, l_sub) = gradients(
                &params,
                &op,
                &x,
                &g,
                &cfg,
                Some(&sample),
                &mut noise.clone(),
            )
            .unwrap();
            assert!((l_full.total - l_sub.total).abs() < 1e-10);
            for ((_, a), (_, b)) in g_full.tensors().into_iter().zip(g_sub.tensors()) {
                assert!(a.iter().zip(b.iter()).all(|(x, y)| (x - y).abs() < 1e-10));
            }
        }
    }
}

/// Probability that each node is among the first `k` draws of successive
/// sampling proportional to `w`, by enumerating every draw sequence.
fn exact_inclusion(w: &[f64], k: usize) -> Vec<f64> {
    fn walk(w: &[f64], taken: &mut Vec<bool>, left: usize, prob: f64, out: &mut [f64]) {
        if left == 0 {
            return;
        }
        let total: f64 = (0..w.len()).filter(|&i| !taken[i]).map(|i| w[i]).sum();
        for i in 0..w.len() {
            if taken[i] {
                continue;
            }
            let p = prob * w[i] / total;
            out[i] += p;
            taken[i] = true;
            walk(w, taken, left - 1, p, out);
            taken[i] = false;
        }
    }
    let mut out = vec![0.0; w.len()];
    walk(w, &mut vec![false; w.len()], k, 1.0, &mut out);
    out
}

#[test]
fn star_inclusion_frequencies_match_exact_probabilities() {
    let leaves = 5;
    let g = Graph::from_edges(leaves + 1, (1..=leaves).map(|j| (0, j))).unwrap();
    let weights: Vec<f64> = (0..=leaves).map(|i| g.degree(i) as f64).collect();
    let trials = 10_000;
    for k in [2, 3] {
        let exact = exact_inclusion(&weights, k);
        let mut counts = vec![0usize; leaves + 1];
        for t in 0..trials {
            for v in fastgae_sample(&g, k, t).unwrap().nodes {
                counts[v] += 1;
            }
        }
        for (v, &c) in counts.iter().enumerate() {
            let p = exact[v];
            let sigma = (p * (1.0 - p) / trials as f64).sqrt();
            let freq = c as f64 / trials as f64;
            assert!(
                (freq - p).abs() <= 3.0 * sigma,
                "k={k} node {v}: {freq} vs {p} (σ={sigma})"
            );
        }
    }
}

#[test]
fn isolated_nodes_fill_last() {
    let g = Graph::from_edges(8, [(0, 1), (1, 2), (2, 3)]).unwrap();
    for seed in 0..50 {
        let s = fastgae_sample(&g, 6, seed).unwrap();
        assert!((0..4).all(|v| s.nodes.contains(&v)));
        assert_eq!(s.nodes.len(), 6);
        assert_eq!(s.graph.n(), 6);
    }
}
