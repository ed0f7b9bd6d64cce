//! Benchmark loaders and the stochastic block model generator.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{assemble_graph, read_raw_pairs, FeatureMatrix, Graph};
use crate::prior::{read_partition_csv, Partition};
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SbmConfig {
    pub communities: usize,
    pub community_size: usize,
    pub p_in: f64,
    pub p_out: f64,
    pub seed: u64,
}

impl SbmConfig {
    /// 100 blocks of 1000 nodes.
    pub fn full_scale(seed: u64) -> SbmConfig {
        SbmConfig {
            communities: 100,
            community_size: 1000,
            p_in: 2e-2,
            p_out: 2e-4,
            seed,
        }
    }

    /// 10 blocks of 100 nodes with the full-scale edge probabilities.
    pub fn desk(seed: u64) -> SbmConfig {
        SbmConfig {
            communities: 10,
            community_size: 100,
            ..SbmConfig::full_scale(seed)
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.communities == 0 || self.community_size == 0 {
            return Err(Error::InvalidArgument(
                "SBM needs at least one non-empty block".into(),
            ));
        }
        if !(0.0 <= self.p_out && self.p_out <= self.p_in && self.p_in <= 1.0) {
            return Err(Error::InvalidArgument(format!(
                "SBM probabilities must satisfy 0 ≤ p_out ≤ p_in ≤ 1 (p_in={}, p_out={})",
                self.p_in, self.p_out
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub name: String,
    pub graph: Graph,
    pub features: Option<FeatureMatrix>,
    pub ground_truth: Option<Partition>,
    /// Original id of each internal node.
    pub node_ids: Vec<u64>,
    /// Mismatches against the built-in manifest.
    pub warnings: Vec<String>,
}

impl Dataset {
    /// Features, or the identity when the dataset is used featureless.
    pub fn features_or_identity(&self) -> FeatureMatrix {
        self.features
            .clone()
            .unwrap_or(FeatureMatrix::Identity(self.graph.n()))
    }
}

/// Calls `visit(t)` for every index `t < total` selected by independent
/// Bernoulli(p) trials, jumping over failures with geometric skips.
fn bernoulli_indices<R: Rng>(total: u64, p: f64, rng: &mut R, mut visit: impl FnMut(u64)) {
    if p <= 0.0 || total == 0 {
        return;
    }
    if p >= 1.0 {
        (0..total).for_each(visit);
        return;
    }
    let log_q = (1.0 - p).ln();
    let mut t = 0u64;
    loop {
        let u: f64 = rng.random();
        let skip = ((1.0 - u).ln() / log_q).floor();
        if skip >= (total - t) as f64 {
            return;
        }
        t += skip as u64;
        visit(t);
        t += 1;
        if t >= total {
            return;
        }
    }
}

pub fn generate_sbm(cfg: &SbmConfig) -> Result<Dataset> {
    cfg.validate()?;
    let (k, s) = (cfg.communities, cfg.community_size);
    let n = k * s;
    let mut rng = rng::rng(rng::derive(cfg.seed, rng::Stream::Sbm));
    let mut edges = Vec::new();
    for a in 0..k {
        // Pairs inside block a, enumerated row by row.
        let base = a * s;
        let (mut row, mut row_start) = (0usize, 0u64);
        let within = (s * (s - 1) / 2) as u64;
        bernoulli_indices(within, cfg.p_in, &mut rng, |t| {
            while t >= row_start + (s - 1 - row) as u64 {
                row_start += (s - 1 - row) as u64;
                row += 1;
            }
            let col = row + 1 + (t - row_start) as usize;
            edges.push((base + row, base + col));
        });
        for b in a + 1..k {
            let other = b * s;
            bernoulli_indices((s * s) as u64, cfg.p_out, &mut rng, |t| {
                let t = t as usize;
                edges.push((base + t / s, other + t % s));
            });
        }
    }
    let graph = Graph::from_edges(n, edges)?;
    let labels: Vec<usize> = (0..n).map(|i| i / s).collect();
    Ok(Dataset {
        name: format!("sbm-{k}x{s}"),
        graph,
        features: None,
        ground_truth: Some(Partition::from_labels(&labels)),
        node_ids: (0..n as u64).collect(),
        warnings: Vec::new(),
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub name: String,
    pub n: usize,
    pub m: usize,
    pub classes: usize,
    #[serde(default)]
    pub features: Option<usize>,
}

const MANIFEST: &str = r#"[
  {"name": "cora", "n": 2708, "m": 5429, "classes": 7, "features": 1433},
  {"name": "citeseer", "n": 3327, "m": 4732, "classes": 6, "features": 3703},
  {"name": "pubmed", "n": 19717, "m": 44338, "classes": 3, "features": 500},
  {"name": "cora-large", "n": 23166, "m": 91500, "classes": 70},
  {"name": "blogs", "n": 1224, "m": 19025, "classes": 2},
  {"name": "sbm", "n": 100000, "m": 1498844, "classes": 100}
]"#;

pub fn manifest() -> Vec<ManifestEntry> {
    serde_json::from_str(MANIFEST).expect("embedded manifest is valid JSON")
}

pub fn manifest_entry(name: &str) -> Option<ManifestEntry> {
    let key = name.to_ascii_lowercase();
    manifest().into_iter().find(|e| e.name == key)
}

/// Files that make up a dataset on disk.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct DatasetFiles {
    pub name: Option<String>,
    pub edges: PathBuf,
    /// Header-less CSV whose row `r` holds the features of original node `r`.
    pub features: Option<PathBuf>,
    /// `node_id,community_id` CSV.
    pub labels: Option<PathBuf>,
}

pub fn load_dataset(files: &DatasetFiles) -> Result<Dataset> {
    let raw = read_raw_pairs(&files.edges)?;
    let labels = files.labels.as_ref().map(read_partition_csv).transpose()?;
    let features = files
        .features
        .as_ref()
        .map(FeatureMatrix::read_csv)
        .transpose()?;

    let mut extra: Vec<u64> = Vec::new();
    if let Some(l) = &labels {
        extra.extend(l.iter().map(|&(id, _)| id));
    }
    if let Some(x) = &features {
        extra.extend(0..x.rows() as u64);
    }
    let loaded = assemble_graph(&raw, extra, &files.edges)?;
    let n = loaded.graph.n();

    let features = match features {
        None => None,
        Some(x) => {
            let rows: Vec<usize> = loaded.node_ids.iter().map(|&id| id as usize).collect();
            if let Some(&bad) = rows.iter().find(|&&r| r >= x.rows()) {
                return Err(Error::DimensionMismatch(format!(
                    "node {bad} has no feature row ({} rows)",
                    x.rows()
                )));
            }
            Some(x.select_rows(&rows))
        }
    };

    let ground_truth = match labels {
        None => None,
        Some(l) => {
            let by_id: HashMap<u64, u64> = l.into_iter().collect();
            let mut assignment = Vec::with_capacity(n);
            for &id in &loaded.node_ids {
                match by_id.get(&id) {
                    Some(&c) => assignment.push(c),
                    None => {
                        return Err(Error::InvalidArgument(format!("node {id} has no label")));
                    }
                }
            }
            Some(Partition::from_labels(&assignment))
        }
    };

    let name = files.name.clone().unwrap_or_else(|| {
        files
            .edges
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_default()
    });
    let mut warnings = Vec::new();
    if let Some(entry) = files.name.as_deref().and_then(manifest_entry) {
        let observed = [
            ("nodes", n, Some(entry.n)),
            ("edges", loaded.graph.m(), Some(entry.m)),
            (
                "classes",
                ground_truth.as_ref().map_or(entry.classes, Partition::k),
                Some(entry.classes),
            ),
            (
                "features",
                features.as_ref().map_or(0, FeatureMatrix::cols),
                features.as_ref().and(entry.features),
            ),
        ];
        for (what, got, expected) in observed {
            if let Some(expected) = expected {
                if got != expected {
                    let msg = format!("{name}: expected {expected} {what}, found {got}");
                    log::warn!("{msg}");
                    warnings.push(msg);
                }
            }
        }
    }

    Ok(Dataset {
        name,
        graph: loaded.graph,
        features,
        ground_truth,
        node_ids: loaded.node_ids,
        warnings,
    })
}

/// Conventional file names inside a dataset directory:
/// `<name>.edges`, `<name>.labels.csv` and `<name>.features.csv`.
pub fn dataset_files(dir: &Path, name: &str, with_features: bool) -> DatasetFiles {
    let features = dir.join(format!("{name}.features.csv"));
    DatasetFiles {
        name: Some(name.to_string()),
        edges: dir.join(format!("{name}.edges")),
        features: with_features.then_some(features),
        labels: Some(dir.join(format!("{name}.labels.csv"))),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::fs;

    #[test]
    fn cliques_when_p_out_is_zero() {
        let cfg = SbmConfig {
            communities: 3,
            community_size: 5,
            p_in: 1.0,
            p_out: 0.0,
            seed: 4,
        };
        let d = generate_sbm(&cfg).unwrap();
        assert_eq!(d.graph.m(), 3 * 10);
        for (u, v) in d.graph.edges() {
            assert_eq!(u / 5, v / 5);
        }
    }

    #[test]
    fn complete_between_blocks() {
        let cfg = SbmConfig {
            communities: 2,
            community_size: 4,
            p_in: 1.0,
            p_out: 1.0,
            seed: 0,
        };
        assert_eq!(generate_sbm(&cfg).unwrap().graph.m(), 28);
    }

    #[test]
    fn sbm_is_seeded() {
        let a = generate_sbm(&SbmConfig::desk(1)).unwrap();
        assert_eq!(a, generate_sbm(&SbmConfig::desk(1)).unwrap());
        assert_ne!(a.graph, generate_sbm(&SbmConfig::desk(2)).unwrap().graph);
    }

    #[test]
    fn invalid_probabilities() {
        let cfg = SbmConfig {
            p_in: 0.1,
            p_out: 0.2,
            ..SbmConfig::desk(0)
        };
        assert!(generate_sbm(&cfg).is_err());
    }

    #[test]
    fn manifest_entries() {
        let cora = manifest_entry("Cora").unwrap();
        assert_eq!(
            (cora.n, cora.m, cora.classes, cora.features),
            (2708, 5429, 7, Some(1433))
        );
        let blogs = manifest_entry("blogs").unwrap();
        assert_eq!((blogs.n, blogs.m, blogs.classes), (1224, 19025, 2));
    }

    #[test]
    fn loads_labels_features_and_isolated_nodes() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("toy.edges"), "0 1\n1 2\n").unwrap();
        fs::write(
            dir.path().join("toy.labels.csv"),
            "node_id,community_id\n0,5\n1,5\n2,7\n3,7\n",
        )
        .unwrap();
        fs::write(dir.path().join("toy.features.csv"), "0,1\n1,1\n2,1\n3,1\n").unwrap();
        let d = load_dataset(&dataset_files(dir.path(), "toy", true)).unwrap();
        assert_eq!(d.graph.n(), 4);
        assert_eq!(d.graph.degree(3), 0);
        assert_eq!(d.ground_truth.unwrap().assignment(), &[0, 0, 1, 1]);
        let FeatureMatrix::Dense(x) = d.features.unwrap() else {
            panic!()
        };
        assert_eq!(x[[3, 0]], 3.0);
    }

    #[test]
    fn missing_features_file_is_an_error() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("toy.edges"), "0 1\n").unwrap();
        fs::write(
            dir.path().join("toy.labels.csv"),
            "node_id,community_id\n0,0\n1,1\n",
        )
        .unwrap();
        assert!(matches!(
            load_dataset(&dataset_files(dir.path(), "toy", true)),
            Err(Error::Io { .. })
        ));
    }

    #[test]
    fn manifest_mismatch_warns() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("cora.edges"), "0 1\n").unwrap();
        let files = DatasetFiles {
            name: Some("cora".into()),
            edges: dir.path().join("cora.edges"),
            ..DatasetFiles::default()
        };
        let d = load_dataset(&files).unwrap();
        assert_eq!(d.warnings.len(), 2);
    }
}
