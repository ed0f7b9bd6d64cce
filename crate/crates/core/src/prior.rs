//! Prior communities: Louvain modularity maximisation, the modularity score
//! and the sparsified community matrix that dopes message passing.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::seq::{index, SliceRandom};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::rng;

/// Assignment of every node to one of `k` non-empty communities, with ids
/// contiguous in `0..k`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    assignment: Vec<usize>,
    sizes: Vec<usize>,
}

impl Partition {
    /// Relabels arbitrary labels to `0..k` in order of first appearance.
    pub fn from_labels<L>(labels: &[L]) -> Partition
    where
        L: Copy + Eq + std::hash::Hash,
    {
        let mut ids = std::collections::HashMap::new();
        let mut sizes = Vec::new();
        let assignment = labels
            .iter()
            .map(|l| {
                let next = ids.len();
                let c = *ids.entry(*l).or_insert(next);
                if c == sizes.len() {
                    sizes.push(0);
                }
                sizes[c] += 1;
                c
            })
            .collect();
        Partition { assignment, sizes }
    }

    pub fn singletons(n: usize) -> Partition {
        Partition {
            assignment: (0..n).collect(),
            sizes: vec![1; n],
        }
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn len(&self) -> usize {
        self.assignment.len()
    }

    pub fn is_empty(&self) -> bool {
        self.assignment.is_empty()
    }

    /// Number of communities.
    pub fn k(&self) -> usize {
        self.sizes.len()
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn community(&self, i: usize) -> usize {
        self.assignment[i]
    }

    /// Members of each community, in ascending node order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut members: Vec<Vec<usize>> =
            self.sizes.iter().map(|&s| Vec::with_capacity(s)).collect();
        for (i, &c) in self.assignment.iter().enumerate() {
            members[c].push(i);
        }
        members
    }

    /// Writes `node_id,community_id` rows.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut out = String::from("node_id,community_id\n");
        for (i, c) in self.assignment.iter().enumerate() {
            writeln!(out, "{i},{c}").unwrap();
        }
        fs::write(path, out).map_err(|e| Error::io(path, e))
    }
}

/// Reads `node_id,community_id` rows as raw id pairs. A header line is
/// skipped if present.
pub fn read_partition_csv(path: impl AsRef<Path>) -> Result<Vec<(u64, u64)>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut rows = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || (lineno == 0 && line.starts_with("node")) {
            continue;
        }
        let parsed = line
            .split_once(',')
            .and_then(|(a, b)| Some((a.trim().parse().ok()?, b.trim().parse().ok()?)));
        match parsed {
            Some(pair) => rows.push(pair),
            None => {
                return Err(Error::Parse {
                    path: path.to_path_buf(),
                    line: lineno + 1,
                    message: format!("expected node_id,community_id, got {line:?}"),
                })
            }
        }
    }
    Ok(rows)
}

/// Whether `i` and `j` are distinct members of one community, i.e. the
/// `(i, j)` entry of the community membership matrix.
pub fn same_community(p: &Partition, i: usize, j: usize) -> Result<bool> {
    let n = p.len();
    for id in [i, j] {
        if id >= n {
            return Err(Error::NodeOutOfRange { id, n });
        }
    }
    Ok(i != j && p.assignment[i] == p.assignment[j])
}

/// Newman modularity `Q = (1/2m) Σ_ij [A_ij - d_i d_j / 2m] δ(c_i, c_j)`,
/// evaluated from per-community edge counts and degree sums.
pub fn modularity(g: &Graph, p: &Partition) -> Result<f64> {
    if p.len() != g.n() {
        return Err(Error::DimensionMismatch(format!(
            "partition covers {} nodes, graph has {}",
            p.len(),
            g.n()
        )));
    }
    if g.m() == 0 {
        return Err(Error::UndefinedModularity);
    }
    let mut internal = vec![0usize; p.k()];
    let mut degree_sum = vec![0usize; p.k()];
    for i in 0..g.n() {
        let c = p.assignment[i];
        degree_sum[c] += g.degree(i);
        internal[c] += g
            .neighbors(i)
            .iter()
            .filter(|&&j| j > i && p.assignment[j] == c)
            .count();
    }
    let m = g.m() as f64;
    Ok(internal
        .iter()
        .zip(&degree_sum)
        .map(|(&l, &d)| {
            let share = d as f64 / (2.0 * m);
            l as f64 / m - share * share
        })
        .sum())
}

/// Weighted graph used between Louvain aggregation levels. `loops[i]` is the
/// diagonal entry of the weight matrix, so an internal edge of weight `w`
/// contributes `2w` once aggregated.
struct LevelGraph {
    adjacency: Vec<Vec<(usize, f64)>>,
    loops: Vec<f64>,
    strength: Vec<f64>,
    total: f64,
}

impl LevelGraph {
    fn from_graph(g: &Graph) -> LevelGraph {
        let adjacency: Vec<Vec<(usize, f64)>> = (0..g.n())
            .map(|i| g.neighbors(i).iter().map(|&j| (j, 1.0)).collect())
            .collect();
        Self::with_adjacency(adjacency, vec![0.0; g.n()])
    }

    fn with_adjacency(adjacency: Vec<Vec<(usize, f64)>>, loops: Vec<f64>) -> LevelGraph {
        let strength: Vec<f64> = adjacency
            .iter()
            .zip(&loops)
            .map(|(row, &l)| row.iter().map(|&(_, w)| w).sum::<f64>() + l)
            .collect();
        let total = strength.iter().sum();
        LevelGraph {
            adjacency,
            loops,
            strength,
            total,
        }
    }

    fn len(&self) -> usize {
        self.adjacency.len()
    }

    /// Greedy local moves until a full sweep changes nothing. Returns the
    /// community of each level node and whether anything moved.
    fn local_moves(&self, order: &[usize]) -> (Vec<usize>, bool) {
        let n = self.len();
        let mut community: Vec<usize> = (0..n).collect();
        let mut tot = self.strength.clone();
        let mut weight_to = vec![0.0f64; n];
        let mut is_touched = vec![false; n];
        let mut touched: Vec<usize> = Vec::new();
        let mut moved_any = false;
        loop {
            let mut moved = false;
            for &i in order {
                let k_i = self.strength[i];
                let own = community[i];
                tot[own] -= k_i;
                touched.clear();
                touched.push(own);
                is_touched[own] = true;
                for &(j, w) in &self.adjacency[i] {
                    let c = community[j];
                    if !is_touched[c] {
                        is_touched[c] = true;
                        touched.push(c);
                    }
                    weight_to[c] += w;
                }
                let gain = |c: usize| weight_to[c] - tot[c] * k_i / self.total;
                let own_gain = gain(own);
                let mut best = own;
                let mut best_gain = own_gain;
                for &c in &touched {
                    let g = gain(c);
                    if g > best_gain || (g == best_gain && c < best) {
                        best = c;
                        best_gain = g;
                    }
                }
                if best != own && best_gain - own_gain <= 1e-12 {
                    best = own;
                }
                for &c in &touched {
                    weight_to[c] = 0.0;
                    is_touched[c] = false;
                }
                tot[best] += k_i;
                if best != own {
                    community[i] = best;
                    moved = true;
                    moved_any = true;
                }
            }
            if !moved {
                break;
            }
        }
        (community, moved_any)
    }

    /// Collapses communities (contiguous ids `0..k`) into single nodes.
    fn aggregate(&self, community: &[usize], k: usize) -> LevelGraph {
        let mut rows: Vec<std::collections::BTreeMap<usize, f64>> = vec![Default::default(); k];
        let mut loops = vec![0.0; k];
        for i in 0..self.len() {
            let ci = community[i];
            loops[ci] += self.loops[i];
            for &(j, w) in &self.adjacency[i] {
                let cj = community[j];
                if ci == cj {
                    loops[ci] += w;
                } else {
                    *rows[ci].entry(cj).or_insert(0.0) += w;
                }
            }
        }
        let adjacency = rows.into_iter().map(|r| r.into_iter().collect()).collect();
        LevelGraph::with_adjacency(adjacency, loops)
    }
}

/// Louvain modularity maximisation; returns the partition after the last
/// aggregation level.
pub fn louvain(g: &Graph, seed: u64) -> Partition {
    louvain_levels(g, seed)
        .pop()
        .unwrap_or_else(|| Partition::singletons(g.n()))
}

/// Louvain, keeping the node partition reached after every level. Node scan
/// order is shuffled once per level; ties between equally good target
/// communities go to the lowest community id.
pub fn louvain_levels(g: &Graph, seed: u64) -> Vec<Partition> {
    let mut rng = rng::rng(seed);
    let mut level = LevelGraph::from_graph(g);
    let mut node_community: Vec<usize> = (0..g.n()).collect();
    let mut levels = Vec::new();
    if level.total == 0.0 {
        return levels;
    }
    loop {
        let mut order: Vec<usize> = (0..level.len()).collect();
        order.shuffle(&mut rng);
        let (community, moved) = level.local_moves(&order);
        if !moved {
            break;
        }
        let relabelled = Partition::from_labels(&community);
        for c in node_community.iter_mut() {
            *c = relabelled.assignment[*c];
        }
        levels.push(Partition::from_labels(&node_community));
        level = level.aggregate(relabelled.assignment(), relabelled.k());
    }
    levels
}

/// Sparsified community matrix `A_s` together with the doping weight λ.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorOperator {
    lambda: f64,
    s: usize,
    matrix: Graph,
}

impl PriorOperator {
    pub fn new(matrix: Graph, s: usize, lambda: f64) -> PriorOperator {
        PriorOperator { lambda, s, matrix }
    }

    pub fn n(&self) -> usize {
        self.matrix.n()
    }

    pub fn lambda(&self) -> f64 {
        self.lambda
    }

    pub fn s(&self) -> usize {
        self.s
    }

    /// `A_s` as a simple graph.
    pub fn matrix(&self) -> &Graph {
        &self.matrix
    }
}

/// Every node draws `min(s, c - 1)` distinct members of its own community
/// (`c` its community size) uniformly without replacement; `A_s` is the
/// symmetric union of all draws.
pub fn sparsify(p: &Partition, s: usize, lambda: f64, seed: u64) -> Result<PriorOperator> {
    if s == 0 {
        return Err(Error::InvalidArgument(
            "sparsification degree s must be >= 1".into(),
        ));
    }
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    let mut rng = rng::rng(seed);
    let members = p.members();
    let position: Vec<usize> = {
        let mut pos = vec![0; p.len()];
        for list in &members {
            for (k, &v) in list.iter().enumerate() {
                pos[v] = k;
            }
        }
        pos
    };
    let mut edges = Vec::new();
    for i in 0..p.len() {
        let list = &members[p.assignment[i]];
        let others = list.len() - 1;
        let draws = s.min(others);
        if draws == 0 {
            continue;
        }
        let own = position[i];
        for k in index::sample(&mut rng, others, draws) {
            let j = list[if k < own { k } else { k + 1 }];
            edges.push((i, j));
        }
    }
    let matrix = Graph::from_edges(p.len(), edges)?;
    Ok(PriorOperator { lambda, s, matrix })
}
