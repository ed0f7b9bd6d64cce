//! Sparse undirected graphs, node features and the normalised propagation
//! operator used by the encoders.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::io::{BufRead, BufReader};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::prior::PriorOperator;

/// Immutable simple undirected graph stored as a symmetric 0/1 matrix in
/// compressed sparse row form. Column indices within each row are sorted and
/// the diagonal is never stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    m: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
}

impl Graph {
    /// Builds a graph on nodes `0..n`. Self-loops and repeated edges (in
    /// either orientation) are dropped.
    pub fn from_edges<I>(n: usize, edges: I) -> Result<Graph>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        Ok(Self::build(n, edges)?.0)
    }

    fn build<I>(n: usize, edges: I) -> Result<(Graph, usize, usize)>
    where
        I: IntoIterator<Item = (usize, usize)>,
    {
        let mut canonical = Vec::new();
        let mut self_loops = 0;
        for (u, v) in edges {
            for id in [u, v] {
                if id >= n {
                    return Err(Error::NodeOutOfRange { id, n });
                }
            }
            if u == v {
                self_loops += 1;
            } else {
                canonical.push((u.min(v), u.max(v)));
            }
        }
        let total = canonical.len();
        canonical.sort_unstable();
        canonical.dedup();
        let duplicates = total - canonical.len();

        let mut degree = vec![0usize; n];
        for &(u, v) in &canonical {
            degree[u] += 1;
            degree[v] += 1;
        }
        let mut indptr = Vec::with_capacity(n + 1);
        indptr.push(0);
        for d in &degree {
            indptr.push(indptr.last().unwrap() + d);
        }
        let mut fill = indptr[..n].to_vec();
        let mut indices = vec![0usize; indptr[n]];
        // Row i = smaller neighbours from pairs (u, i), then larger ones from
        // pairs (i, v); both come out of `canonical` already sorted.
        let mut by_target: Vec<Vec<usize>> = vec![Vec::new(); n];
        for &(u, v) in &canonical {
            by_target[v].push(u);
        }
        for i in 0..n {
            for &u in &by_target[i] {
                indices[fill[i]] = u;
                fill[i] += 1;
            }
            let lo = canonical.partition_point(|&(a, _)| a < i);
            let hi = canonical.partition_point(|&(a, _)| a <= i);
            for &(_, v) in &canonical[lo..hi] {
                indices[fill[i]] = v;
                fill[i] += 1;
            }
        }
        let graph = Graph {
            n,
            m: canonical.len(),
            indptr,
            indices,
        };
        Ok((graph, duplicates, self_loops))
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Number of undirected edges.
    pub fn m(&self) -> usize {
        self.m
    }

    pub fn degree(&self, i: usize) -> usize {
        self.indptr[i + 1] - self.indptr[i]
    }

    /// Sorted neighbour list of `i`.
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.indices[self.indptr[i]..self.indptr[i + 1]]
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        i < self.n && j < self.n && self.neighbors(i).binary_search(&j).is_ok()
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        (0..self.n).flat_map(move |u| {
            self.neighbors(u)
                .iter()
                .copied()
                .filter(move |&v| v > u)
                .map(move |v| (u, v))
        })
    }

    /// Subgraph induced by `nodes`, relabelled by position in the slice.
    /// `nodes` must be sorted and distinct.
    pub fn induced(&self, nodes: &[usize]) -> Result<Graph> {
        debug_assert!(nodes.windows(2).all(|w| w[0] < w[1]));
        let mut position = vec![usize::MAX; self.n];
        for (p, &v) in nodes.iter().enumerate() {
            if v >= self.n {
                return Err(Error::NodeOutOfRange { id: v, n: self.n });
            }
            position[v] = p;
        }
        let mut edges = Vec::new();
        for (p, &u) in nodes.iter().enumerate() {
            for &v in self.neighbors(u) {
                let q = position[v];
                if q != usize::MAX && q > p {
                    edges.push((p, q));
                }
            }
        }
        Graph::from_edges(nodes.len(), edges)
    }

    /// Canonical text form: one `u v` line per edge, `u < v`, sorted.
    pub fn to_edge_list_string(&self) -> String {
        let mut out = String::with_capacity(self.m * 12);
        for (u, v) in self.edges() {
            writeln!(out, "{u} {v}").unwrap();
        }
        out
    }

    pub fn write_edge_list(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        fs::write(path, self.to_edge_list_string()).map_err(|e| Error::io(path, e))
    }
}

/// Degree of every node; sums to `2m`.
pub fn degrees(g: &Graph) -> Vec<usize> {
    (0..g.n()).map(|i| g.degree(i)).collect()
}

/// Result of reading an edge-list file.
#[derive(Debug, Clone)]
pub struct LoadedGraph {
    pub graph: Graph,
    /// Original id of each internal node.
    pub node_ids: Vec<u64>,
    pub duplicates_dropped: usize,
    pub self_loops_dropped: usize,
}

impl LoadedGraph {
    /// Internal id of an original node id, if it appeared in the file.
    pub fn internal_id(&self, original: u64) -> Option<usize> {
        self.node_ids.binary_search(&original).ok()
    }
}

/// Reads a whitespace separated edge list. Original ids are arbitrary
/// non-negative integers and are remapped to `0..n` in ascending order.
pub fn load_edge_list(path: impl AsRef<Path>) -> Result<LoadedGraph> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_edge_list(BufReader::new(file), path)
}

/// Parses edge-list text; `origin` is only used in error messages.
pub fn parse_edge_list<R: BufRead>(reader: R, origin: &Path) -> Result<LoadedGraph> {
    let raw = parse_raw_pairs(reader, origin)?;
    assemble_graph(&raw, std::iter::empty(), origin)
}

/// Reads the `(u, v)` pairs of an edge list in original ids, unvalidated.
pub fn read_raw_pairs(path: impl AsRef<Path>) -> Result<Vec<(u64, u64)>> {
    let path = path.as_ref();
    let file = fs::File::open(path).map_err(|e| Error::io(path, e))?;
    parse_raw_pairs(BufReader::new(file), path)
}

fn parse_raw_pairs<R: BufRead>(reader: R, origin: &Path) -> Result<Vec<(u64, u64)>> {
    let mut raw = Vec::new();
    for (lineno, line) in reader.lines().enumerate() {
        let line = line.map_err(|e| Error::io(origin, e))?;
        let content = line.split('#').next().unwrap_or("").trim();
        if content.is_empty() {
            continue;
        }
        let parse_err = |message: String| Error::Parse {
            path: origin.to_path_buf(),
            line: lineno + 1,
            message,
        };
        let mut tokens = content.split_whitespace();
        let (Some(a), Some(b), None) = (tokens.next(), tokens.next(), tokens.next()) else {
            return Err(parse_err(format!("expected two node ids, got {content:?}")));
        };
        let u: u64 = a
            .parse()
            .map_err(|_| parse_err(format!("invalid node id {a:?}")))?;
        let v: u64 = b
            .parse()
            .map_err(|_| parse_err(format!("invalid node id {b:?}")))?;
        raw.push((u, v));
    }
    Ok(raw)
}

/// Builds a graph from original-id pairs. `extra_ids` adds nodes that may
/// have no edges; all ids are remapped to `0..n` in ascending order.
pub fn assemble_graph(
    raw: &[(u64, u64)],
    extra_ids: impl IntoIterator<Item = u64>,
    origin: &Path,
) -> Result<LoadedGraph> {
    if raw.is_empty() {
        return Err(Error::EmptyGraph);
    }
    let mut ids: BTreeSet<u64> = raw.iter().flat_map(|&(u, v)| [u, v]).collect();
    ids.extend(extra_ids);
    let node_ids: Vec<u64> = ids.into_iter().collect();
    let index = |x: u64| node_ids.binary_search(&x).unwrap();
    let edges: Vec<(usize, usize)> = raw.iter().map(|&(u, v)| (index(u), index(v))).collect();
    let (graph, duplicates_dropped, self_loops_dropped) = Graph::build(node_ids.len(), edges)?;
    if graph.m() == 0 {
        return Err(Error::EmptyGraph);
    }
    if duplicates_dropped + self_loops_dropped > 0 {
        log::info!(
            "{}: dropped {duplicates_dropped} duplicate edges and {self_loops_dropped} self-loops",
            origin.display()
        );
    }
    Ok(LoadedGraph {
        graph,
        node_ids,
        duplicates_dropped,
        self_loops_dropped,
    })
}

/// Writes the `original_id,internal_id` mapping.
pub fn write_node_map(path: impl AsRef<Path>, node_ids: &[u64]) -> Result<()> {
    let path = path.as_ref();
    let mut out = String::from("original_id,internal_id\n");
    for (internal, original) in node_ids.iter().enumerate() {
        writeln!(out, "{original},{internal}").unwrap();
    }
    fs::write(path, out).map_err(|e| Error::io(path, e))
}

/// Reads an `original_id,internal_id` mapping back into an internal→original
/// table.
pub fn read_node_map(path: impl AsRef<Path>) -> Result<Vec<u64>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let mut pairs = Vec::new();
    for (lineno, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with("original_id") {
            continue;
        }
        let parsed = line.split_once(',').and_then(|(a, b)| {
            Some((
                a.trim().parse::<u64>().ok()?,
                b.trim().parse::<usize>().ok()?,
            ))
        });
        let Some(pair) = parsed else {
            return Err(Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message: format!("expected original_id,internal_id, got {line:?}"),
            });
        };
        pairs.push(pair);
    }
    let mut node_ids = vec![0u64; pairs.len()];
    let mut seen = vec![false; pairs.len()];
    for (original, internal) in pairs {
        if internal >= node_ids.len() || seen[internal] {
            return Err(Error::InvalidArgument(format!(
                "{}: internal ids are not a permutation of 0..{}",
                path.display(),
                node_ids.len()
            )));
        }
        seen[internal] = true;
        node_ids[internal] = original;
    }
    Ok(node_ids)
}

/// Node features. Featureless graphs use the implicit identity `I_n`, which
/// is never materialised.
#[derive(Debug, Clone, PartialEq)]
pub enum FeatureMatrix {
    Identity(usize),
    Dense(Array2<f64>),
}

impl FeatureMatrix {
    pub fn rows(&self) -> usize {
        match self {
            FeatureMatrix::Identity(n) => *n,
            FeatureMatrix::Dense(x) => x.nrows(),
        }
    }

    pub fn cols(&self) -> usize {
        match self {
            FeatureMatrix::Identity(n) => *n,
            FeatureMatrix::Dense(x) => x.ncols(),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, FeatureMatrix::Identity(_))
    }

    /// Reads a header-less CSV of `n` rows and `f` real columns.
    pub fn read_csv(path: impl AsRef<Path>) -> Result<FeatureMatrix> {
        let path = path.as_ref();
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut values = Vec::new();
        let mut cols = None;
        let mut rows = 0;
        for (lineno, line) in text.lines().enumerate() {
            if line.trim().is_empty() {
                continue;
            }
            let parse_err = |message: String| Error::Parse {
                path: path.to_path_buf(),
                line: lineno + 1,
                message,
            };
            let mut count = 0;
            for field in line.split(',') {
                let x: f64 = field
                    .trim()
                    .parse()
                    .map_err(|_| parse_err(format!("invalid number {field:?}")))?;
                values.push(x);
                count += 1;
            }
            match cols {
                None => cols = Some(count),
                Some(c) if c != count => {
                    return Err(parse_err(format!("expected {c} columns, found {count}")))
                }
                _ => {}
            }
            rows += 1;
        }
        let cols = cols.ok_or_else(|| {
            Error::InvalidArgument(format!("{}: empty feature file", path.display()))
        })?;
        let x = Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        Ok(FeatureMatrix::Dense(x))
    }

    /// Reorders rows from original-id order to internal-id order.
    pub fn select_rows(&self, rows: &[usize]) -> FeatureMatrix {
        match self {
            FeatureMatrix::Identity(_) => FeatureMatrix::Identity(rows.len()),
            FeatureMatrix::Dense(x) => FeatureMatrix::Dense(x.select(ndarray::Axis(0), rows)),
        }
    }
}

/// Real sparse square matrix in CSR form with sorted column indices.
#[derive(Debug, Clone, PartialEq)]
pub struct SparseOperator {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<f64>,
}

impl SparseOperator {
    pub fn identity(n: usize) -> SparseOperator {
        SparseOperator {
            n,
            indptr: (0..=n).collect(),
            indices: (0..n).collect(),
            values: vec![1.0; n],
        }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let span = self.indptr[i]..self.indptr[i + 1];
        (&self.indices[span.clone()], &self.values[span])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (cols, vals) = self.row(i);
        cols.binary_search(&j).map(|p| vals[p]).unwrap_or(0.0)
    }

    /// Largest `|a_ij - a_ji|` over stored entries.
    pub fn asymmetry(&self) -> f64 {
        let mut worst = 0.0f64;
        for i in 0..self.n {
            let (cols, vals) = self.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                worst = worst.max((v - self.get(j, i)).abs());
            }
        }
        worst
    }

    /// Dense product `self · rhs`.
    pub fn matmul(&self, rhs: ArrayView2<'_, f64>) -> Array2<f64> {
        assert_eq!(rhs.nrows(), self.n, "operator/rhs row mismatch");
        let width = rhs.ncols();
        let rhs = rhs.as_standard_layout();
        let src = rhs.as_slice().unwrap();
        let mut out = Array2::<f64>::zeros((self.n, width));
        let dst = out.as_slice_mut().unwrap();
        for i in 0..self.n {
            let row_out = &mut dst[i * width..(i + 1) * width];
            let (cols, vals) = self.row(i);
            for (&j, &a) in cols.iter().zip(vals) {
                let row_in = &src[j * width..(j + 1) * width];
                for (o, &x) in row_out.iter_mut().zip(row_in) {
                    *o += a * x;
                }
            }
        }
        out
    }

    /// Symmetric normalisation `D^{-1/2} M D^{-1/2}` with `D` the row sums
    /// of `M`, given as per-row sorted `(column, value)` lists.
    fn normalized_from_rows(n: usize, rows: Vec<Vec<(usize, f64)>>) -> SparseOperator {
        let sums: Vec<f64> = rows
            .iter()
            .map(|r| r.iter().map(|&(_, v)| v).sum())
            .collect();
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for (i, row) in rows.into_iter().enumerate() {
            for (j, v) in row {
                indices.push(j);
                values.push(v / (sums[i] * sums[j]).sqrt());
            }
            indptr.push(indices.len());
        }
        SparseOperator {
            n,
            indptr,
            indices,
            values,
        }
    }
}

/// `D̃^{-1/2} (A + I) D̃^{-1/2}`, the propagation matrix of a standard graph
/// autoencoder.
pub fn normalized_adjacency(g: &Graph) -> SparseOperator {
    let n = g.n();
    let degree: Vec<f64> = (0..n).map(|i| (g.degree(i) + 1) as f64).collect();
    let mut indptr = Vec::with_capacity(n + 1);
    let mut indices = Vec::with_capacity(2 * g.m() + n);
    let mut values = Vec::with_capacity(2 * g.m() + n);
    indptr.push(0);
    for i in 0..n {
        let nbrs = g.neighbors(i);
        let split = nbrs.partition_point(|&j| j < i);
        let cols = nbrs[..split]
            .iter()
            .copied()
            .chain(std::iter::once(i))
            .chain(nbrs[split..].iter().copied());
        for j in cols {
            indices.push(j);
            values.push(1.0 / (degree[i] * degree[j]).sqrt());
        }
        indptr.push(indices.len());
    }
    SparseOperator {
        n,
        indptr,
        indices,
        values,
    }
}

/// Normalised propagation matrix of the community-doped graph
/// `M = A + λ A_s + I`: entries `M_ij / sqrt(r_i r_j)` with `r` the row sums
/// of `M`. Self-loops are added after doping, and the prior edges count
/// towards the normalising degrees.
pub fn fused_operator(g: &Graph, prior: &PriorOperator) -> Result<SparseOperator> {
    let n = g.n();
    if prior.n() != n {
        return Err(Error::DimensionMismatch(format!(
            "prior has {} nodes, graph has {n}",
            prior.n()
        )));
    }
    let lambda = prior.lambda();
    if !(lambda >= 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "lambda must be non-negative, got {lambda}"
        )));
    }
    let sparse = prior.matrix();
    let rows = (0..n)
        .map(|i| {
            let a = g.neighbors(i);
            let s = sparse.neighbors(i);
            let mut row = Vec::with_capacity(a.len() + s.len() + 1);
            let (mut p, mut q) = (0, 0);
            let mut diagonal_done = false;
            loop {
                let next_a = a.get(p).copied().unwrap_or(usize::MAX);
                let next_s = s.get(q).copied().unwrap_or(usize::MAX);
                let j = next_a.min(next_s);
                if !diagonal_done && i <= j {
                    row.push((i, 1.0));
                    diagonal_done = true;
                }
                if j == usize::MAX {
                    break;
                }
                let mut value = 0.0;
                if next_a == j {
                    value += 1.0;
                    p += 1;
                }
                if next_s == j {
                    value += lambda;
                    q += 1;
                }
                if value != 0.0 {
                    row.push((j, value));
                }
            }
            row
        })
        .collect();
    Ok(SparseOperator::normalized_from_rows(n, rows))
}
