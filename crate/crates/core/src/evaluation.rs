//! Edge masking for link prediction and the evaluation metrics.

use std::collections::HashSet;
use std::fs;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::clustering::kmeans;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{decode_pair, Embedding};
use crate::prior::{modularity, Partition};
use crate::rng;

/// Percentages of edges masked for validation and test.
pub const VAL_PERCENT: usize = 5;
pub const TEST_PERCENT: usize = 10;

/// Smallest edge count `split_edges` accepts.
pub const MIN_SPLIT_EDGES: usize = 20;

pub type Pair = (usize, usize);

#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSplit {
    pub train_graph: Graph,
    pub val_pos: Vec<Pair>,
    pub val_neg: Vec<Pair>,
    pub test_pos: Vec<Pair>,
    pub test_neg: Vec<Pair>,
    pub seed: u64,
}

/// The parts of a split that model selection may look at.
#[derive(Debug, Clone, Copy)]
pub struct ValidationView<'a> {
    pub train_graph: &'a Graph,
    pub val_pos: &'a [Pair],
    pub val_neg: &'a [Pair],
}

#[derive(Serialize, Deserialize)]
struct SplitManifest {
    n: usize,
    seed: u64,
    train_edges: usize,
    val: usize,
    test: usize,
}

impl EdgeSplit {
    pub fn validation_view(&self) -> ValidationView<'_> {
        ValidationView {
            train_graph: &self.train_graph,
            val_pos: &self.val_pos,
            val_neg: &self.val_neg,
        }
    }

    /// Writes `train.edges`, the four pair files, and `split.json`, all in
    /// internal node ids.
    pub fn write_dir(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        self.train_graph.write_edge_list(dir.join("train.edges"))?;
        for (name, pairs) in [
            ("val_pos.csv", &self.val_pos),
            ("val_neg.csv", &self.val_neg),
            ("test_pos.csv", &self.test_pos),
            ("test_neg.csv", &self.test_neg),
        ] {
            write_pairs(dir.join(name), pairs)?;
        }
        let manifest = SplitManifest {
            n: self.train_graph.n(),
            seed: self.seed,
            train_edges: self.train_graph.m(),
            val: self.val_pos.len(),
            test: self.test_pos.len(),
        };
        let path = dir.join("split.json");
        fs::write(&path, serde_json::to_string_pretty(&manifest)?).map_err(|e| Error::io(&path, e))
    }

    pub fn read_dir(dir: impl AsRef<Path>) -> Result<EdgeSplit> {
        let dir = dir.as_ref();
        let path = dir.join("split.json");
        let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
        let manifest: SplitManifest = serde_json::from_str(&text)?;
        let train_pairs = read_edge_pairs(dir.join("train.edges"))?;
        let train_graph = Graph::from_edges(manifest.n, train_pairs)?;
        let read = |name: &str| read_pairs(dir.join(name), manifest.n);
        Ok(EdgeSplit {
            train_graph,
            val_pos: read("val_pos.csv")?,
            val_neg: read("val_neg.csv")?,
            test_pos: read("test_pos.csv")?,
            test_neg: read("test_neg.csv")?,
            seed: manifest.seed,
        })
    }
}

fn write_pairs(path: impl AsRef<Path>, pairs: &[Pair]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("u,v\n");
    for (u, v) in pairs {
        out.push_str(&format!("{u},{v}\n"));
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

fn parse_error(path: &Path, line: usize, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_edge_pairs(path: impl AsRef<Path>) -> Result<Vec<Pair>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (k, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let mut it = line.split_whitespace().map(str::parse::<usize>);
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(u)), Some(Ok(v)), None) => pairs.push((u, v)),
            _ => return Err(parse_error(path, k + 1, "expected two node ids")),
        }
    }
    Ok(pairs)
}

/// Reads a `u,v` pair file written by [`EdgeSplit::write_dir`].
pub fn read_pairs(path: impl AsRef<Path>, n: usize) -> Result<Vec<Pair>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (k, line) in text.lines().enumerate().skip(1) {
        if line.trim().is_empty() {
            continue;
        }
        let mut it = line.split(',').map(|t| t.trim().parse::<usize>());
        match (it.next(), it.next(), it.next()) {
            (Some(Ok(u)), Some(Ok(v)), None) if u < n && v < n => pairs.push((u, v)),
            _ => return Err(parse_error(path, k + 1, "expected `u,v` with ids below n")),
        }
    }
    Ok(pairs)
}

/// Masks 5% of edges for validation and 10% for test, and draws as many
/// non-edges of the original graph for each.
pub fn split_edges(g: &Graph, seed: u64) -> Result<EdgeSplit> {
    let m = g.m();
    if m < MIN_SPLIT_EDGES {
        return Err(Error::InvalidArgument(format!(
            "graph has {m} edges; splitting needs at least {MIN_SPLIT_EDGES}"
        )));
    }
    let n_test = m * TEST_PERCENT / 100;
    let n_val = m * VAL_PERCENT / 100;
    let mut rng = rng::rng(seed);
    let mut edges: Vec<Pair> = g.edges().collect();
    edges.shuffle(&mut rng);
    let test_pos = edges[..n_test].to_vec();
    let val_pos = edges[n_test..n_test + n_val].to_vec();
    let train_graph = Graph::from_edges(g.n(), edges[n_test + n_val..].iter().copied())?;

    let needed = n_test + n_val;
    let mut taken: HashSet<Pair> = HashSet::with_capacity(needed);
    let mut negatives = Vec::with_capacity(needed);
    let mut attempts = 0usize;
    let n = g.n();
    while negatives.len() < needed {
        if attempts >= 100 * needed {
            return Err(Error::InvalidArgument(format!(
                "graph too dense: found {} of {needed} non-edges after {attempts} draws",
                negatives.len()
            )));
        }
        attempts += 1;
        let i = rng.random_range(0..n);
        let j = rng.random_range(0..n);
        if i == j {
            continue;
        }
        let pair = (i.min(j), i.max(j));
        if g.has_edge(pair.0, pair.1) || !taken.insert(pair) {
            continue;
        }
        negatives.push(pair);
    }
    let val_neg = negatives.split_off(n_test);
    Ok(EdgeSplit {
        train_graph,
        val_pos,
        val_neg,
        test_pos,
        test_neg: negatives,
        seed,
    })
}

fn check_binary(scores: &[f64], labels: &[bool]) -> Result<(usize, usize)> {
    if scores.len() != labels.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} scores for {} labels",
            scores.len(),
            labels.len()
        )));
    }
    if !scores.iter().all(|s| s.is_finite()) {
        return Err(Error::NonFinite("scores"));
    }
    let pos = labels.iter().filter(|&&l| l).count();
    Ok((pos, labels.len() - pos))
}

/// Area under the ROC curve with midranks for ties.
pub fn auc(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, neg) = check_binary(scores, labels)?;
    if pos == 0 || neg == 0 {
        return Err(Error::InvalidArgument("AUC needs both classes".into()));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    let mut rank_sum = 0.0;
    let mut start = 0;
    while start < order.len() {
        let mut end = start + 1;
        while end < order.len() && scores[order[end]] == scores[order[start]] {
            end += 1;
        }
        // Ranks start..end (0-based) share the midrank.
        let midrank = (start + end + 1) as f64 / 2.0;
        let positives = order[start..end].iter().filter(|&&i| labels[i]).count();
        rank_sum += midrank * positives as f64;
        start = end;
    }
    let (p, q) = (pos as f64, neg as f64);
    Ok((rank_sum - p * (p + 1.0) / 2.0) / (p * q))
}

/// Average precision over the descending-score ranking; ties keep input order.
pub fn average_precision(scores: &[f64], labels: &[bool]) -> Result<f64> {
    let (pos, _) = check_binary(scores, labels)?;
    if pos == 0 {
        return Err(Error::InvalidArgument(
            "average precision needs a positive".into(),
        ));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[b].total_cmp(&scores[a]));
    let mut hits = 0usize;
    let mut sum = 0.0;
    for (rank, &i) in order.iter().enumerate() {
        if labels[i] {
            hits += 1;
            sum += hits as f64 / (rank + 1) as f64;
        }
    }
    Ok(sum / pos as f64)
}

struct Contingency {
    table: Vec<Vec<usize>>,
    rows: Vec<usize>,
    cols: Vec<usize>,
    n: usize,
}

fn contingency(a: &Partition, b: &Partition) -> Result<Contingency> {
    if a.len() != b.len() {
        return Err(Error::DimensionMismatch(format!(
            "partitions cover {} and {} nodes",
            a.len(),
            b.len()
        )));
    }
    let mut table = vec![vec![0usize; b.k()]; a.k()];
    for i in 0..a.len() {
        table[a.community(i)][b.community(i)] += 1;
    }
    Ok(Contingency {
        table,
        rows: a.sizes().to_vec(),
        cols: b.sizes().to_vec(),
        n: a.len(),
    })
}

fn entropy(sizes: &[usize], n: usize) -> f64 {
    let n = n as f64;
    sizes
        .iter()
        .filter(|&&s| s > 0)
        .map(|&s| {
            let p = s as f64 / n;
            -p * p.ln()
        })
        .sum()
}

fn expected_mutual_information(c: &Contingency) -> f64 {
    let n = c.n;
    let mut ln_fact = vec![0.0f64; n + 1];
    for k in 1..=n {
        ln_fact[k] = ln_fact[k - 1] + (k as f64).ln();
    }
    let nf = n as f64;
    let mut emi = 0.0;
    for &a in &c.rows {
        for &b in &c.cols {
            let lo = (a + b).saturating_sub(n).max(1);
            let hi = a.min(b);
            for nij in lo..=hi {
                let x = nij as f64;
                let term = x / nf * (nf * x / (a as f64 * b as f64)).ln();
                let ln_p = ln_fact[a] + ln_fact[b] + ln_fact[n - a] + ln_fact[n - b]
                    - ln_fact[n]
                    - ln_fact[nij]
                    - ln_fact[a - nij]
                    - ln_fact[b - nij]
                    - ln_fact[n + nij - a - b];
                emi += term * ln_p.exp();
            }
        }
    }
    emi
}

/// Adjusted mutual information, arithmetic-mean normalisation, natural log.
pub fn ami(a: &Partition, b: &Partition) -> Result<f64> {
    let c = contingency(a, b)?;
    if a.k() == 1 && b.k() == 1 {
        return Ok(1.0);
    }
    let nf = c.n as f64;
    let mut mi = 0.0;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            if nij > 0 {
                let x = nij as f64;
                mi += x / nf * (nf * x / (c.rows[i] as f64 * c.cols[j] as f64)).ln();
            }
        }
    }
    let emi = expected_mutual_information(&c);
    let normaliser = 0.5 * (entropy(&c.rows, c.n) + entropy(&c.cols, c.n));
    let mut denominator = normaliser - emi;
    denominator = if denominator < 0.0 {
        denominator.min(-f64::EPSILON)
    } else {
        denominator.max(f64::EPSILON)
    };
    Ok((mi - emi) / denominator)
}

/// Adjusted Rand index, evaluated from ordered pair counts in exact integers.
pub fn ari(a: &Partition, b: &Partition) -> Result<f64> {
    let c = contingency(a, b)?;
    let n = c.n as i128;
    let mut sum_squares = 0i128;
    let mut by_cols = 0i128;
    let mut by_rows = 0i128;
    for (i, row) in c.table.iter().enumerate() {
        for (j, &nij) in row.iter().enumerate() {
            let x = nij as i128;
            sum_squares += x * x;
            by_cols += x * c.cols[j] as i128;
            by_rows += x * c.rows[i] as i128;
        }
    }
    let tp = sum_squares - n;
    let fp = by_cols - sum_squares;
    let fn_ = by_rows - sum_squares;
    let tn = n * n - fp - fn_ - sum_squares;
    if fn_ == 0 && fp == 0 {
        return Ok(1.0);
    }
    let num = 2 * (tp * tn - fn_ * fp);
    let den = (tp + fn_) * (fn_ + tn) + (tp + fp) * (fp + tn);
    Ok(num as f64 / den as f64)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ami: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ari: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub auc: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ap: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub modularity: Option<f64>,
}

impl MetricsReport {
    fn fields(&self) -> [Option<f64>; 5] {
        [self.ami, self.ari, self.auc, self.ap, self.modularity]
    }

    fn from_fields(f: [Option<f64>; 5]) -> MetricsReport {
        MetricsReport {
            ami: f[0],
            ari: f[1],
            auc: f[2],
            ap: f[3],
            modularity: f[4],
        }
    }
}

/// Mean and sample standard deviation of each field over several runs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AggregateReport {
    pub runs: usize,
    pub mean: MetricsReport,
    pub std: MetricsReport,
}

pub fn aggregate(reports: &[MetricsReport]) -> Result<AggregateReport> {
    if reports.is_empty() {
        return Err(Error::InvalidArgument("nothing to aggregate".into()));
    }
    let mut mean = [None; 5];
    let mut std = [None; 5];
    for k in 0..5 {
        let values: Vec<f64> = reports.iter().filter_map(|r| r.fields()[k]).collect();
        if values.is_empty() {
            continue;
        }
        let len = values.len() as f64;
        let mu = values.iter().sum::<f64>() / len;
        let var = if values.len() > 1 {
            values.iter().map(|v| (v - mu) * (v - mu)).sum::<f64>() / (len - 1.0)
        } else {
            0.0
        };
        mean[k] = Some(mu);
        std[k] = Some(var.sqrt());
    }
    Ok(AggregateReport {
        runs: reports.len(),
        mean: MetricsReport::from_fields(mean),
        std: MetricsReport::from_fields(std),
    })
}

/// What Task 1 clusters: an embedding (via k-means) or a ready partition.
#[derive(Debug, Clone, Copy)]
pub enum CommunitySource<'a> {
    Embedding(&'a Embedding),
    Partition(&'a Partition),
}

fn communities(source: CommunitySource<'_>, k: usize, seed: u64) -> Result<Partition> {
    match source {
        CommunitySource::Embedding(e) => Ok(kmeans(e.z.view(), k, seed)?.partition),
        CommunitySource::Partition(p) => Ok(p.clone()),
    }
}

/// Community detection scores against the ground truth, plus modularity on `g`.
pub fn evaluate_task1(
    g: &Graph,
    source: CommunitySource<'_>,
    ground_truth: &Partition,
    seed: u64,
) -> Result<MetricsReport> {
    if ground_truth.len() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "ground truth covers {} of {} nodes",
            ground_truth.len(),
            g.n()
        )));
    }
    let found = communities(source, ground_truth.k(), seed)?;
    Ok(MetricsReport {
        ami: Some(ami(&found, ground_truth)?),
        ari: Some(ari(&found, ground_truth)?),
        modularity: Some(modularity(g, &found)?),
        ..MetricsReport::default()
    })
}

/// Scores and labels of `σ(z_i·z_j)` over positive then negative pairs.
pub fn link_scores(e: &Embedding, pos: &[Pair], neg: &[Pair]) -> Result<(Vec<f64>, Vec<bool>)> {
    let mut scores = Vec::with_capacity(pos.len() + neg.len());
    let mut labels = Vec::with_capacity(pos.len() + neg.len());
    for (pairs, label) in [(pos, true), (neg, false)] {
        for &(i, j) in pairs {
            scores.push(decode_pair(e, i, j)?);
            labels.push(label);
        }
    }
    Ok((scores, labels))
}

pub fn validation_auc(view: &ValidationView<'_>, e: &Embedding) -> Result<f64> {
    let (scores, labels) = link_scores(e, view.val_pos, view.val_neg)?;
    auc(&scores, &labels)
}

/// Joint link prediction and community detection scores.
pub fn evaluate_task2(
    split: &EdgeSplit,
    e: &Embedding,
    ground_truth: &Partition,
    seed: u64,
) -> Result<MetricsReport> {
    let (scores, labels) = link_scores(e, &split.test_pos, &split.test_neg)?;
    let cd = evaluate_task1(
        &split.train_graph,
        CommunitySource::Embedding(e),
        ground_truth,
        seed,
    )?;
    Ok(MetricsReport {
        auc: Some(auc(&scores, &labels)?),
        ap: Some(average_precision(&scores, &labels)?),
        ..cd
    })
}
