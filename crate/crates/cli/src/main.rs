mod manifest;

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};
use modgae::clustering::kmeans;
use modgae::datasets::{
    dataset_files, generate_sbm, load_dataset, Dataset, DatasetFiles, SbmConfig,
};
use modgae::evaluation::{
    aggregate, auc, average_precision, evaluate_task1, link_scores, split_edges, CommunitySource,
    EdgeSplit, MetricsReport,
};
use modgae::graph::{read_node_map, write_node_map, FeatureMatrix, Graph};
use modgae::hpo::{grid_search, GridSpec};
use modgae::model::{Embedding, EncoderKind};
use modgae::prior::{read_partition_csv, Partition};
use modgae::protocol::{reproduce, train_run, Experiment};
use modgae::rng::{self, Stream};
use modgae::training::{write_telemetry, TrainConfig};

use manifest::{absolute, fingerprint, RunManifest};

/// Modularity-aware graph autoencoders: split, train, evaluate, search,
/// generate and reproduce.
#[derive(Parser)]
#[command(name = "modgae", version)]
struct Cli {
    /// Worker threads for parallel runs and grid points.
    #[arg(long, global = true, env = "MODGAE_JOBS")]
    jobs: Option<usize>,

    /// Increase log verbosity (-v info, -vv debug).
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Mask 5% validation and 10% test edges, with matching non-edges.
    Split(SplitArgs),
    /// Build the prior, train one model and export its embedding.
    Train(TrainArgs),
    /// Score a run (or a partition) for community detection or link prediction.
    Eval(EvalArgs),
    /// Grid search on the mean of validation AUC and modularity.
    Search(SearchArgs),
    /// Generate a stochastic block model graph with planted communities.
    Sbm(SbmArgs),
    /// Run a published experiment end to end and compare with its scores.
    Reproduce(ReproduceArgs),
}

#[derive(Args)]
struct SplitArgs {
    /// Edge list with one `u v` pair per line.
    #[arg(long)]
    edges: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelKind {
    Gae,
    Vgae,
}

#[derive(Args)]
struct TrainArgs {
    /// Split directory from `modgae split`; trains on its training graph.
    #[arg(long, conflicts_with = "edges", required_unless_present = "edges")]
    split: Option<PathBuf>,
    /// Edge list; trains on the whole graph.
    #[arg(long)]
    edges: Option<PathBuf>,
    /// Header-less feature CSV, row r for original node id r. Omit for featureless.
    #[arg(long)]
    features: Option<PathBuf>,
    /// Start from the hyperparameters of a published experiment.
    #[arg(long)]
    preset: Option<Experiment>,
    /// JSON object of TrainConfig fields; overrides the preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum)]
    model: Option<ModelKind>,
    /// `linear` or `gcn`.
    #[arg(long)]
    encoder: Option<EncoderKind>,
    #[arg(long)]
    dim: Option<usize>,
    #[arg(long)]
    hidden: Option<usize>,
    /// Weight of the sparsified community prior in message passing.
    #[arg(long)]
    lambda: Option<f64>,
    /// Weight of the soft modularity regularizer.
    #[arg(long)]
    beta: Option<f64>,
    /// Kernel sharpness of the soft modularity regularizer.
    #[arg(long)]
    gamma: Option<f64>,
    /// Prior neighbours drawn per node.
    #[arg(long)]
    s: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    iters: Option<usize>,
    #[arg(long)]
    dropout: Option<f64>,
    /// Nodes per sampled subgraph (degree-biased). Omit to use every node.
    #[arg(long)]
    fastgae: Option<usize>,
    /// Elementwise gradient clip.
    #[arg(long)]
    clip: Option<f64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Task {
    /// Community detection.
    Cd,
    /// Link prediction on the test split plus community detection.
    Lpcd,
}

#[derive(Args)]
struct EvalArgs {
    /// Run directory from `modgae train`.
    #[arg(long, required_unless_present_any = ["runs", "partition"])]
    run: Option<PathBuf>,
    /// Glob over run directories; reports mean and standard deviation.
    #[arg(long, conflicts_with_all = ["run", "partition"])]
    runs: Option<String>,
    /// `node_id,community_id` partition to score instead of an embedding.
    #[arg(long, requires = "edges", conflicts_with = "run")]
    partition: Option<PathBuf>,
    /// Graph for `--partition`.
    #[arg(long)]
    edges: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "cd")]
    task: Task,
    /// Ground-truth `node_id,community_id` labels in original ids.
    #[arg(long)]
    labels: PathBuf,
    /// Clusters for k-means; defaults to the number of ground-truth classes.
    #[arg(long)]
    k: Option<usize>,
    /// Split directory for `lpcd`; defaults to the one the run trained on.
    #[arg(long)]
    split: Option<PathBuf>,
    /// Where to write the JSON report; defaults to `metrics-<task>.json`
    /// in the run directory.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SearchArgs {
    /// Grid JSON file, or `desk` / `full` for the built-in grids.
    #[arg(long)]
    grid: String,
    #[arg(long)]
    split: PathBuf,
    #[arg(long)]
    features: Option<PathBuf>,
    /// Base hyperparameters for the built-in grids.
    #[arg(long)]
    preset: Option<Experiment>,
    /// Number of communities for k-means.
    #[arg(long)]
    k: usize,
    /// Evaluate at most this many evenly spaced grid points.
    #[arg(long)]
    budget: Option<usize>,
    #[arg(long)]
    runs_per_point: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SbmArgs {
    #[arg(long, default_value_t = 10)]
    communities: usize,
    #[arg(long, default_value_t = 100)]
    size: usize,
    #[arg(long, default_value_t = 2e-2)]
    pin: f64,
    #[arg(long, default_value_t = 2e-4)]
    pout: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ReproduceArgs {
    #[arg(long)]
    experiment: Experiment,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Directory holding `<name>.edges`, `<name>.labels.csv` and
    /// `<name>.features.csv`.
    #[arg(long, env = "MODGAE_DATA_DIR", default_value = "data")]
    data_dir: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

/// Errors caused by how the command was invoked.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow::Error::new(Usage(msg.into()))
}

fn exit_code(err: &anyhow::Error) -> u8 {
    if err.chain().any(|e| e.is::<Usage>()) {
        return 2;
    }
    for cause in err.chain() {
        if let Some(e) = cause.downcast_ref::<modgae::Error>() {
            return match e {
                e if e.is_numeric() => 4,
                modgae::Error::InvalidArgument(_) => 2,
                _ => 3,
            };
        }
    }
    3
}

/// Writes to stdout; a reader that has gone away (e.g. `| head`) is not an error.
fn emit(text: &str) -> Result<()> {
    use std::io::Write;
    match std::io::stdout().lock().write_all(text.as_bytes()) {
        Err(e) if e.kind() != std::io::ErrorKind::BrokenPipe => Err(e.into()),
        _ => Ok(()),
    }
}

macro_rules! say {
    ($($arg:tt)*) => {
        emit(&(format!($($arg)*) + "\n"))?
    };
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    fs::write(path, serde_json::to_string_pretty(value)? + "\n")
        .with_context(|| format!("writing {}", path.display()))
}

fn cmd_split(a: &SplitArgs) -> Result<()> {
    let d = load_dataset(&DatasetFiles {
        edges: a.edges.clone(),
        ..DatasetFiles::default()
    })?;
    let split = split_edges(&d.graph, rng::derive(a.seed, Stream::Split))?;
    create_dir(&a.out)?;
    split.write_dir(&a.out)?;
    write_node_map(a.out.join("node_map.csv"), &d.node_ids)?;
    let mut m = RunManifest::new("split");
    m.config = serde_json::json!({ "val_percent": 5, "test_percent": 10 });
    m.dataset_fingerprint = Some(fingerprint(&d.graph));
    m.seeds = vec![a.seed];
    m.inputs = serde_json::json!({ "edges": absolute(&a.edges) });
    m.artifacts = [
        "train.edges",
        "val_pos.csv",
        "val_neg.csv",
        "test_pos.csv",
        "test_neg.csv",
        "split.json",
        "node_map.csv",
    ]
    .map(String::from)
    .to_vec();
    m.write(&a.out)?;
    say!(
        "train {} edges, validation {} pairs, test {} pairs → {}",
        split.train_graph.m(),
        split.val_pos.len(),
        split.test_pos.len(),
        a.out.display()
    );
    Ok(())
}

/// Graph, original node ids, and (optionally) features of a split or edge list.
fn training_input(
    split: Option<&Path>,
    edges: Option<&Path>,
    features: Option<&Path>,
) -> Result<(Graph, Vec<u64>, Option<FeatureMatrix>)> {
    match (split, edges) {
        (Some(dir), None) => {
            let s = EdgeSplit::read_dir(dir)?;
            let node_ids = read_node_map(dir.join("node_map.csv"))?;
            let features = match features {
                None => None,
                Some(p) => {
                    let x = FeatureMatrix::read_csv(p)?;
                    let rows: Vec<usize> = node_ids.iter().map(|&id| id as usize).collect();
                    if let Some(&bad) = rows.iter().find(|&&r| r >= x.rows()) {
                        bail!(modgae::Error::DimensionMismatch(format!(
                            "node {bad} has no feature row ({} rows)",
                            x.rows()
                        )));
                    }
                    Some(x.select_rows(&rows))
                }
            };
            Ok((s.train_graph, node_ids, features))
        }
        (None, Some(path)) => {
            let d = load_dataset(&DatasetFiles {
                edges: path.to_path_buf(),
                features: features.map(Path::to_path_buf),
                ..DatasetFiles::default()
            })?;
            Ok((d.graph, d.node_ids, d.features))
        }
        _ => Err(usage("give exactly one of --split or --edges")),
    }
}

/// Preset, then config file, then flags.
fn resolve_config(a: &TrainArgs) -> Result<TrainConfig> {
    let base = a.preset.map(|e| e.preset().config).unwrap_or_default();
    let mut value = serde_json::to_value(&base)?;
    if let Some(path) = &a.config {
        let text =
            fs::read_to_string(path).with_context(|| format!("reading {}", path.display()))?;
        let overlay: serde_json::Value =
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
        let Some(fields) = overlay.as_object() else {
            return Err(usage(format!("{} must hold a JSON object", path.display())));
        };
        for (k, v) in fields {
            value[k] = v.clone();
        }
    }
    let mut c: TrainConfig =
        serde_json::from_value(value).map_err(|e| usage(format!("config: {e}")))?;
    if let Some(m) = a.model {
        c.variational = matches!(m, ModelKind::Vgae);
    }
    macro_rules! flag {
        ($($field:ident <- $arg:expr),* $(,)?) => {
            $(if let Some(v) = $arg { c.$field = v; })*
        };
    }
    flag!(
        encoder <- a.encoder,
        dim <- a.dim,
        hidden <- a.hidden,
        lambda <- a.lambda,
        beta <- a.beta,
        gamma <- a.gamma,
        s <- a.s,
        lr <- a.lr,
        iterations <- a.iters,
        dropout <- a.dropout,
        seed <- a.seed,
    );
    if a.fastgae.is_some() {
        c.fastgae_size = a.fastgae;
    }
    if a.clip.is_some() {
        c.clip = a.clip;
    }
    Ok(c)
}

fn cmd_train(a: &TrainArgs) -> Result<()> {
    let config = resolve_config(a)?;
    let (g, node_ids, features) = training_input(
        a.split.as_deref(),
        a.edges.as_deref(),
        a.features.as_deref(),
    )?;
    let x = features.unwrap_or(FeatureMatrix::Identity(g.n()));
    create_dir(&a.out)?;
    write_json(&a.out.join("config.json"), &config)?;
    write_node_map(a.out.join("node_map.csv"), &node_ids)?;

    let mut m = RunManifest::new("train");
    m.config = serde_json::to_value(&config)?;
    m.dataset_fingerprint = Some(fingerprint(&g));
    m.seeds = vec![config.seed];
    m.inputs = serde_json::json!({
        "split": a.split.as_deref().map(absolute),
        "edges": a.edges.as_deref().map(absolute),
        "features": a.features.as_deref().map(absolute),
    });

    let out = match train_run(&g, &x, &config) {
        Ok(out) => out,
        Err(modgae::Error::Divergence {
            iter,
            reason,
            last_finite,
        }) => {
            last_finite.write_checkpoint(a.out.join("params"), config.seed)?;
            m.artifacts = vec![
                "config.json".into(),
                "node_map.csv".into(),
                "params/".into(),
            ];
            m.write(&a.out)?;
            return Err(modgae::Error::Divergence {
                iter,
                reason,
                last_finite,
            })
            .context("last finite parameters saved to params/");
        }
        Err(e) => return Err(e.into()),
    };
    write_telemetry(a.out.join("telemetry.jsonl"), &out.telemetry)?;
    out.embedding.write_csv(a.out.join("embedding.csv"))?;
    out.params
        .write_checkpoint(a.out.join("params"), config.seed)?;
    m.artifacts = [
        "config.json",
        "node_map.csv",
        "telemetry.jsonl",
        "embedding.csv",
        "params/",
    ]
    .map(String::from)
    .to_vec();
    m.write(&a.out)?;
    if let Some(last) = out.telemetry.last() {
        say!(
            "iteration {}: total {:.6} → {}",
            last.iter,
            last.loss.total,
            a.out.display()
        );
    }
    Ok(())
}

/// Maps `node_id,community_id` rows onto internal ids.
fn labels_for(path: &Path, node_ids: &[u64]) -> Result<Partition> {
    let by_id: std::collections::HashMap<u64, u64> =
        read_partition_csv(path)?.into_iter().collect();
    let labels = node_ids
        .iter()
        .map(|id| {
            by_id.get(id).copied().ok_or_else(|| {
                anyhow!(modgae::Error::InvalidArgument(format!(
                    "{}: node {id} has no label",
                    path.display()
                )))
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(Partition::from_labels(&labels))
}

fn eval_run(a: &EvalArgs, dir: &Path) -> Result<MetricsReport> {
    let m = RunManifest::read(dir)?;
    let node_ids = read_node_map(dir.join("node_map.csv"))?;
    let e = Embedding::read_csv(dir.join("embedding.csv"))?;
    let truth = labels_for(&a.labels, &node_ids)?;
    let seed = m.seeds.first().copied().unwrap_or(0);
    let k = a.k.unwrap_or(truth.k());
    let found = kmeans(e.z.view(), k, rng::derive(seed, Stream::KMeans))?.partition;
    let split_dir = a.split.clone().or_else(|| m.input("split"));
    let graph = match (&split_dir, m.input("edges")) {
        (Some(s), _) => EdgeSplit::read_dir(s)?.train_graph,
        (None, Some(edges)) => {
            load_dataset(&DatasetFiles {
                edges,
                ..DatasetFiles::default()
            })?
            .graph
        }
        (None, None) => bail!("{}: manifest records no input graph", dir.display()),
    };
    let mut report = evaluate_task1(&graph, CommunitySource::Partition(&found), &truth, 0)?;
    if a.task == Task::Lpcd {
        let Some(s) = split_dir else {
            return Err(usage(
                "lpcd needs a split: train with --split or pass --split",
            ));
        };
        let split = EdgeSplit::read_dir(s)?;
        let (scores, labels) = link_scores(&e, &split.test_pos, &split.test_neg)?;
        report.auc = Some(auc(&scores, &labels)?);
        report.ap = Some(average_precision(&scores, &labels)?);
    }
    Ok(report)
}

fn cmd_eval(a: &EvalArgs) -> Result<()> {
    let task = match a.task {
        Task::Cd => "cd",
        Task::Lpcd => "lpcd",
    };
    if let Some(pattern) = &a.runs {
        let dirs: Vec<PathBuf> = glob::glob(pattern)
            .map_err(|e| usage(format!("--runs: {e}")))?
            .filter_map(std::result::Result::ok)
            .filter(|p| p.join(manifest::FILE).is_file())
            .collect();
        if dirs.is_empty() {
            return Err(usage(format!(
                "--runs {pattern:?} matched no run directory"
            )));
        }
        let reports = dirs
            .iter()
            .map(|d| eval_run(a, d))
            .collect::<Result<Vec<_>>>()?;
        let summary = aggregate(&reports)?;
        let text = serde_json::to_string_pretty(&summary)?;
        say!("{text}");
        if let Some(out) = &a.out {
            fs::write(out, text + "\n").with_context(|| format!("writing {}", out.display()))?;
        }
        return Ok(());
    }
    let (report, default_out) = match (&a.run, &a.partition) {
        (Some(dir), _) => (
            eval_run(a, dir)?,
            Some(dir.join(format!("metrics-{task}.json"))),
        ),
        (None, Some(p)) => {
            if a.task == Task::Lpcd {
                return Err(usage("a partition has no link scores; use --task cd"));
            }
            let edges = a
                .edges
                .clone()
                .ok_or_else(|| usage("--partition needs --edges"))?;
            let d = load_dataset(&DatasetFiles {
                edges,
                ..DatasetFiles::default()
            })?;
            let found = labels_for(p, &d.node_ids)?;
            let truth = labels_for(&a.labels, &d.node_ids)?;
            (
                evaluate_task1(&d.graph, CommunitySource::Partition(&found), &truth, 0)?,
                None,
            )
        }
        (None, None) => return Err(usage("give --run, --runs or --partition")),
    };
    let text = serde_json::to_string_pretty(&report)?;
    say!("{text}");
    if let Some(out) = a.out.clone().or(default_out) {
        fs::write(&out, text + "\n").with_context(|| format!("writing {}", out.display()))?;
    }
    Ok(())
}

fn cmd_search(a: &SearchArgs) -> Result<()> {
    let base = a.preset.map(|e| e.preset().config).unwrap_or_default();
    let mut grid = match a.grid.as_str() {
        "desk" => GridSpec::desk(base),
        "full" => GridSpec::full(base),
        path => {
            let text = fs::read_to_string(path).with_context(|| format!("reading {path}"))?;
            serde_json::from_str(&text).map_err(|e| usage(format!("{path}: {e}")))?
        }
    };
    if let Some(r) = a.runs_per_point {
        grid.runs_per_point = r;
    }
    let (g, node_ids, features) = training_input(Some(&a.split), None, a.features.as_deref())?;
    let split = EdgeSplit::read_dir(&a.split)?;
    let x = features.unwrap_or(FeatureMatrix::Identity(g.n()));
    let result = grid_search(&split.validation_view(), &x, a.k, &grid, a.budget, a.seed)?;
    create_dir(&a.out)?;
    result.write_csv(a.out.join("grid.csv"))?;
    let best = result.best_point();
    write_json(&a.out.join("best.json"), best)?;
    write_json(&a.out.join("config.json"), &best.config)?;
    let mut m = RunManifest::new("search");
    m.config = serde_json::to_value(&grid)?;
    m.dataset_fingerprint = Some(fingerprint(&g));
    m.seeds = vec![a.seed];
    m.inputs = serde_json::json!({
        "split": absolute(&a.split),
        "features": a.features.as_deref().map(absolute),
        "k": a.k,
        "budget": a.budget,
        "nodes": node_ids.len(),
    });
    m.artifacts = ["grid.csv", "best.json", "config.json"]
        .map(String::from)
        .to_vec();
    m.write(&a.out)?;
    say!(
        "{} points evaluated; best #{}: criterion {:.4} (AUC {:.4}, Q {:.4})",
        result.points.len(),
        best.index,
        best.criterion,
        best.val_auc,
        best.modularity
    );
    Ok(())
}

fn cmd_sbm(a: &SbmArgs) -> Result<()> {
    let cfg = SbmConfig {
        communities: a.communities,
        community_size: a.size,
        p_in: a.pin,
        p_out: a.pout,
        seed: a.seed,
    };
    let d = generate_sbm(&cfg)?;
    create_dir(&a.out)?;
    d.graph.write_edge_list(a.out.join("sbm.edges"))?;
    d.ground_truth
        .as_ref()
        .expect("generated graphs carry their blocks")
        .write_csv(a.out.join("sbm.labels.csv"))?;
    let mut m = RunManifest::new("sbm");
    m.config = serde_json::to_value(cfg)?;
    m.dataset_fingerprint = Some(fingerprint(&d.graph));
    m.seeds = vec![a.seed];
    m.artifacts = vec!["sbm.edges".into(), "sbm.labels.csv".into()];
    m.write(&a.out)?;
    say!(
        "n = {}, m = {} → {}",
        d.graph.n(),
        d.graph.m(),
        a.out.display()
    );
    Ok(())
}

fn reproduction_dataset(a: &ReproduceArgs) -> Result<Dataset> {
    let preset = a.experiment.preset();
    if let Some(sbm) = preset.sbm {
        return Ok(generate_sbm(&SbmConfig {
            seed: a.seed,
            ..sbm
        })?);
    }
    let name = preset
        .dataset
        .expect("file-backed presets name their dataset");
    let files = dataset_files(&a.data_dir, name, preset.use_features);
    let d = load_dataset(&files).with_context(|| {
        format!(
            "loading {name} from {} (see scripts/fetch_datasets.py for the expected layout)",
            a.data_dir.display()
        )
    })?;
    for w in &d.warnings {
        eprintln!("warning: {w}");
    }
    Ok(d)
}

fn cmd_reproduce(a: &ReproduceArgs) -> Result<()> {
    if a.runs == 0 {
        return Err(usage("--runs must be positive"));
    }
    let preset = a.experiment.preset();
    let d = reproduction_dataset(a)?;
    let report = reproduce(&preset, &d, a.runs, a.seed)?;
    create_dir(&a.out)?;
    write_json(&a.out.join("report.json"), &report)?;
    let text = report.render();
    fs::write(a.out.join("report.txt"), &text)
        .with_context(|| format!("writing {}", a.out.display()))?;
    let mut m = RunManifest::new("reproduce");
    m.config = serde_json::json!({
        "experiment": a.experiment,
        "runs": a.runs,
        "train": preset.config,
    });
    m.dataset_fingerprint = Some(fingerprint(&d.graph));
    m.seeds = (0..a.runs)
        .map(|r| modgae::protocol::run_seed(a.seed, r))
        .collect();
    m.inputs = serde_json::json!({ "data_dir": absolute(&a.data_dir), "seed": a.seed });
    m.artifacts = vec!["report.json".into(), "report.txt".into()];
    m.write(&a.out)?;
    emit(&text)?;
    Ok(())
}

fn run(cli: Cli) -> Result<()> {
    if let Some(jobs) = cli.jobs {
        if jobs == 0 {
            return Err(usage("--jobs must be positive"));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(jobs)
            .build_global()
            .context("starting the worker pool")?;
    }
    match &cli.command {
        Command::Split(a) => cmd_split(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Search(a) => cmd_search(a),
        Command::Sbm(a) => cmd_sbm(a),
        Command::Reproduce(a) => cmd_reproduce(a),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = match cli.verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level)).init();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::from(exit_code(&e))
        }
    }
}
