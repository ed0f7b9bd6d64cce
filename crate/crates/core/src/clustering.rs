//! k-means with k-means++ seeding.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::Rng;

use crate::error::{Error, Result};
use crate::prior::Partition;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KMeansOptions {
    pub restarts: usize,
    /// Convergence threshold on the largest centroid displacement.
    pub tolerance: f64,
    pub max_iterations: usize,
}

impl Default for KMeansOptions {
    fn default() -> Self {
        KMeansOptions {
            restarts: 10,
            tolerance: 1e-4,
            max_iterations: 300,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    /// Cluster ids follow first appearance in node order; row `c` of
    /// `centroids` belongs to cluster `c`.
    pub partition: Partition,
    pub centroids: Array2<f64>,
    pub inertia: f64,
    pub iterations_used: usize,
    /// Final inertia of every restart, in restart order.
    pub restart_inertia: Vec<f64>,
}

fn sq_dist(a: ArrayView1<'_, f64>, b: ArrayView1<'_, f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(point: ArrayView1<'_, f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (c, row) in centroids.rows().into_iter().enumerate() {
        let d = sq_dist(point, row);
        if d < best.1 {
            best = (c, d);
        }
    }
    best
}

fn plus_plus<R: Rng>(z: ArrayView2<'_, f64>, k: usize, rng: &mut R) -> Array2<f64> {
    let n = z.nrows();
    let mut centroids = Array2::zeros((k, z.ncols()));
    let mut chosen = vec![false; n];
    let first = rng.random_range(0..n);
    chosen[first] = true;
    centroids.row_mut(0).assign(&z.row(first));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(z.row(i), z.row(first))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut pick = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 && acc > target {
                    pick = Some(i);
                    break;
                }
            }
            pick.unwrap_or_else(|| d2.iter().rposition(|&d| d > 0.0).unwrap())
        } else {
            // Every remaining point coincides with a centroid.
            let free: Vec<usize> = (0..n).filter(|&i| !chosen[i]).collect();
            free[rng.random_range(0..free.len())]
        };
        chosen[pick] = true;
        centroids.row_mut(c).assign(&z.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(z.row(i), z.row(pick)));
        }
    }
    centroids
}

struct Run {
    labels: Vec<usize>,
    centroids: Array2<f64>,
    inertia: f64,
    iterations: usize,
}

fn assign(
    z: ArrayView2<'_, f64>,
    centroids: &Array2<f64>,
    labels: &mut [usize],
) -> (f64, Vec<f64>) {
    let mut inertia = 0.0;
    let mut dist = vec![0.0; labels.len()];
    for (i, point) in z.rows().into_iter().enumerate() {
        let (mut c, mut d) = nearest(point, centroids);
        let own = sq_dist(point, centroids.row(labels[i]));
        if own <= d {
            (c, d) = (labels[i], own);
        }
        labels[i] = c;
        dist[i] = d;
        inertia += d;
    }
    (inertia, dist)
}

fn lloyd<R: Rng>(z: ArrayView2<'_, f64>, k: usize, opts: &KMeansOptions, rng: &mut R) -> Run {
    let n = z.nrows();
    let mut centroids = plus_plus(z, k, rng);
    let mut labels = vec![0; n];
    let mut iterations = 0;
    while iterations < opts.max_iterations {
        iterations += 1;
        let (_, mut dist) = assign(z, &centroids, &mut labels);
        let mut counts = vec![0usize; k];
        let mut sums = Array2::<f64>::zeros(centroids.raw_dim());
        for (i, &c) in labels.iter().enumerate() {
            counts[c] += 1;
            let mut row = sums.row_mut(c);
            row += &z.row(i);
        }
        // Empty clusters take the point farthest from its own centroid.
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let donor = (0..n)
                .filter(|&i| counts[labels[i]] > 1)
                .max_by(|&a, &b| dist[a].total_cmp(&dist[b]).then(b.cmp(&a)))
                .expect("k ≤ n leaves a cluster with two or more points");
            let old = labels[donor];
            counts[old] -= 1;
            let mut row = sums.row_mut(old);
            row -= &z.row(donor);
            labels[donor] = c;
            counts[c] = 1;
            sums.row_mut(c).assign(&z.row(donor));
            dist[donor] = 0.0;
        }
        let mut shift = 0.0f64;
        for (c, &count) in counts.iter().enumerate() {
            let mean = &sums.row(c) / count as f64;
            shift = shift.max(sq_dist(mean.view(), centroids.row(c)).sqrt());
            centroids.row_mut(c).assign(&mean);
        }
        if shift < opts.tolerance {
            break;
        }
    }
    let (inertia, _) = assign(z, &centroids, &mut labels);
    Run {
        labels,
        centroids,
        inertia,
        iterations,
    }
}

pub fn kmeans(z: ArrayView2<'_, f64>, k: usize, seed: u64) -> Result<KMeansResult> {
    kmeans_with(z, k, seed, &KMeansOptions::default())
}

pub fn kmeans_with(
    z: ArrayView2<'_, f64>,
    k: usize,
    seed: u64,
    opts: &KMeansOptions,
) -> Result<KMeansResult> {
    let n = z.nrows();
    if k == 0 || k > n {
        return Err(Error::InvalidArgument(format!(
            "k = {k} must lie in 1..={n}"
        )));
    }
    if opts.restarts == 0 {
        return Err(Error::InvalidArgument(
            "at least one restart is required".into(),
        ));
    }
    if !z.iter().all(|v| v.is_finite()) {
        return Err(Error::NonFinite("k-means input"));
    }
    let mut best: Option<Run> = None;
    let mut restart_inertia = Vec::with_capacity(opts.restarts);
    for r in 0..opts.restarts {
        let mut rng = rng::rng(rng::child(seed, r as u64));
        let run = lloyd(z, k, opts, &mut rng);
        restart_inertia.push(run.inertia);
        if best.as_ref().is_none_or(|b| run.inertia < b.inertia) {
            best = Some(run);
        }
    }
    let run = best.expect("at least one restart");
    let partition = Partition::from_labels(&run.labels);
    // Reorder centroids to match the relabelled partition.
    let mut order = Vec::with_capacity(partition.k());
    for (i, &old) in run.labels.iter().enumerate() {
        if partition.community(i) == order.len() {
            order.push(old);
        }
    }
    Ok(KMeansResult {
        partition,
        centroids: run.centroids.select(Axis(0), &order),
        inertia: run.inertia,
        iterations_used: run.iterations,
        restart_inertia,
    })
}
