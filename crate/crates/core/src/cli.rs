//! Command-line workflows: `synth`, `train`, `score`, `eval`, `oracle`.
//!
//! Every subcommand resolves its configuration from built-in defaults, an
//! optional JSON file (`--config`), dotted `--set key=value` overrides and
//! its own flags, in that order, and writes the resolved configuration to
//! `config.json` in the output directory.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::GramError;
use crate::eval::{build_split, run_experiment, ExperimentConfig, SplitSpec};
use crate::graph::{make_synthetic_dataset, parse_tudataset, write_tudataset, FeaturePolicy, GraphDataset, Wiring};
use crate::nn::Activation;
use crate::oracle::{
    monte_carlo_score, propagate_identity, reference_graphs, reproduce_table1_at, score_distribution, NoiseModel,
    TABLE1_EPSILON,
};
use crate::scorer::{sampled_mean_score, score, write_reports, NoiseMode};
use crate::vgae::{train, VgaeConfig, VgaeModel};

pub const EXIT_OK: i32 = 0;
pub const EXIT_USAGE: i32 = 1;
pub const EXIT_RUNTIME: i32 = 2;

#[derive(Debug)]
pub enum CliError {
    Usage(String),
    Runtime(GramError),
}

impl From<GramError> for CliError {
    fn from(e: GramError) -> Self {
        CliError::Runtime(e)
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Usage(m) => write!(f, "usage error: {m}"),
            CliError::Runtime(e) => write!(f, "{e}"),
        }
    }
}

type CliResult<T> = std::result::Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Parser, Debug)]
#[command(name = "gram", version, about = "Graph anomaly scoring with gradient attention maps")]
pub struct Cli {
    /// Seed for every random stream of the run.
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    /// JSON file with configuration values.
    #[arg(long, global = true)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    /// Dotted override such as `model.epochs=50`; the value is read as JSON
    /// when possible and as a string otherwise.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    pub overrides: Vec<String>,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Write a tree / double-ring corpus in TUDataset format.
    Synth(SynthArgs),
    /// Train a model on the normal class of a corpus.
    Train(TrainArgs),
    /// Score every graph of a corpus with a trained checkpoint.
    Score(ScoreArgs),
    /// Run the one-class evaluation protocol.
    Eval(EvalArgs),
    /// Closed-form score distributions of the reference graphs.
    Oracle(OracleArgs),
}

#[derive(Args, Debug)]
pub struct SynthArgs {
    #[arg(long)]
    pub count: Option<usize>,
    #[arg(long)]
    pub min_nodes: Option<usize>,
    #[arg(long)]
    pub max_nodes: Option<usize>,
    /// Heap-ordered trees and evenly split rings.
    #[arg(long)]
    pub canonical: bool,
}

#[derive(Args, Debug)]
pub struct DatasetArgs {
    /// Directory holding the corpus files.
    #[arg(long)]
    pub dataset: Option<PathBuf>,
    /// Corpus name (file prefix).
    #[arg(long)]
    pub name: Option<String>,
    /// Feature policy: `adjacency`, `degree_onehot[:CAP]`, `padded_adjacency:WIDTH` or `constant_one`.
    #[arg(long)]
    pub features: Option<String>,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    #[command(flatten)]
    pub data: DatasetArgs,
    #[arg(long)]
    pub epochs: Option<usize>,
    /// Untrained identity-weight model sized to the feature width.
    #[arg(long)]
    pub identity_debug: bool,
}

#[derive(Args, Debug)]
pub struct ScoreArgs {
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[command(flatten)]
    pub data: DatasetArgs,
    /// Adds a column with the mean score over this many noise draws.
    #[arg(long)]
    pub noise_samples: Option<usize>,
    #[arg(long)]
    pub phi: Option<String>,
}

#[derive(Args, Debug)]
pub struct EvalArgs {
    /// Comma-separated subset of gram, reconstruction_baseline.
    #[arg(long)]
    pub methods: Option<String>,
    #[arg(long)]
    pub epochs: Option<usize>,
}

#[derive(Args, Debug)]
pub struct OracleArgs {
    #[arg(long)]
    pub epsilon: Option<f64>,
    /// Monte-Carlo trials; 0 skips the simulation.
    #[arg(long)]
    pub trials: Option<usize>,
    /// Corpus directory of a graph to analyse instead of the reference pair.
    #[arg(long)]
    pub graph: Option<PathBuf>,
    #[arg(long)]
    pub name: Option<String>,
    /// Graph position within the corpus.
    #[arg(long)]
    pub index: Option<usize>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthConfig {
    pub name: String,
    pub count_per_class: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub wiring: Wiring,
    pub seed: u64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            name: "synthetic".into(),
            count_per_class: 100,
            min_nodes: 7,
            max_nodes: 15,
            wiring: Wiring::Random,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DatasetRef {
    pub path: Option<PathBuf>,
    pub name: String,
    pub features: Option<FeaturePolicy>,
}

impl DatasetRef {
    fn load(&self) -> CliResult<GraphDataset> {
        let path = self.path.as_ref().ok_or_else(|| usage("no dataset given (--dataset)"))?;
        if !path.is_dir() {
            return Err(usage(format!("dataset directory {} does not exist", path.display())));
        }
        let ds = parse_tudataset(path, &self.name)?;
        Ok(match self.features {
            Some(p) => ds.with_features(p),
            None => ds,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub dataset: DatasetRef,
    pub split: SplitSpec,
    pub model: VgaeConfig,
    pub identity_debug: bool,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            dataset: DatasetRef {
                name: "synthetic".into(),
                ..DatasetRef::default()
            },
            split: SplitSpec::default(),
            model: VgaeConfig::default(),
            identity_debug: false,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ScoreConfig {
    pub checkpoint: Option<PathBuf>,
    pub dataset: DatasetRef,
    pub phi: Activation,
    pub noise_samples: usize,
    pub noise_scale: f64,
    pub seed: u64,
}

impl Default for ScoreConfig {
    fn default() -> Self {
        ScoreConfig {
            checkpoint: None,
            dataset: DatasetRef {
                name: "synthetic".into(),
                ..DatasetRef::default()
            },
            phi: Activation::Relu,
            noise_samples: 0,
            noise_scale: 1.0,
            seed: 0,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OracleConfig {
    pub epsilon: f64,
    pub trials: usize,
    pub noise_model: NoiseModel,
    pub seed: u64,
    pub graph: Option<DatasetRef>,
    pub index: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            epsilon: TABLE1_EPSILON,
            trials: 0,
            noise_model: NoiseModel::AttentionPerturbation,
            seed: 0,
            graph: None,
            index: 0,
        }
    }
}

/// Recursively overlays `patch` onto `base`.
fn merge(base: &mut Value, patch: Value) {
    match (base, patch) {
        (Value::Object(b), Value::Object(p)) => {
            for (k, v) in p {
                merge(b.entry(k).or_insert(Value::Null), v);
            }
        }
        (b, p) => *b = p,
    }
}

fn set_dotted(root: &mut Value, key: &str, value: Value) -> CliResult<()> {
    let mut cur = root;
    let parts: Vec<&str> = key.split('.').collect();
    for (k, part) in parts.iter().enumerate() {
        if part.is_empty() {
            return Err(usage(format!("bad override key `{key}`")));
        }
        if cur.is_null() {
            *cur = Value::Object(Default::default());
        }
        let obj = cur
            .as_object_mut()
            .ok_or_else(|| usage(format!("override `{key}`: `{part}` is not inside an object")))?;
        if k + 1 == parts.len() {
            obj.insert((*part).to_string(), value);
            return Ok(());
        }
        cur = obj.entry((*part).to_string()).or_insert(Value::Null);
    }
    Ok(())
}

fn parse_override(s: &str) -> CliResult<(String, Value)> {
    let (k, v) = s
        .split_once('=')
        .ok_or_else(|| usage(format!("override `{s}` is not KEY=VALUE")))?;
    let value = serde_json::from_str(v).unwrap_or_else(|_| Value::String(v.to_string()));
    Ok((k.trim().to_string(), value))
}

/// Defaults, then the config file, then `--set`, then `flags`.
fn resolve<T: Serialize + DeserializeOwned + Default>(cli: &Cli, flags: Vec<(&str, Value)>) -> CliResult<T> {
    let mut v = serde_json::to_value(T::default()).map_err(GramError::from)?;
    if let Some(path) = &cli.config {
        let text = std::fs::read_to_string(path)
            .map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
        let file: Value =
            serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display())))?;
        merge(&mut v, file);
    }
    for s in &cli.overrides {
        let (k, val) = parse_override(s)?;
        set_dotted(&mut v, &k, val)?;
    }
    for (k, val) in flags {
        set_dotted(&mut v, k, val)?;
    }
    serde_json::from_value(v).map_err(|e| usage(format!("invalid configuration: {e}")))
}

fn out_dir(cli: &Cli, sub: &str) -> CliResult<PathBuf> {
    let dir = cli.out.clone().unwrap_or_else(|| PathBuf::from("gram-out").join(sub));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::Runtime(GramError::io(&dir, e)))?;
    Ok(dir)
}

fn write(dir: &Path, name: &str, text: &str) -> CliResult<()> {
    let p = dir.join(name);
    std::fs::write(&p, text).map_err(|e| CliError::Runtime(GramError::io(p, e)))
}

fn write_config<T: Serialize>(dir: &Path, cfg: &T) -> CliResult<()> {
    write(dir, "config.json", &serde_json::to_string_pretty(cfg).map_err(GramError::from)?)
}

fn json<T: Serialize>(v: T) -> Value {
    serde_json::to_value(v).expect("plain values serialize")
}

fn dataset_flags(d: &DatasetArgs, flags: &mut Vec<(&str, Value)>) -> CliResult<()> {
    if let Some(p) = &d.dataset {
        flags.push(("dataset.path", json(p)));
    }
    if let Some(n) = &d.name {
        flags.push(("dataset.name", json(n)));
    }
    if let Some(f) = &d.features {
        let policy: FeaturePolicy = f.parse().map_err(usage)?;
        flags.push(("dataset.features", json(policy)));
    }
    Ok(())
}

fn cmd_synth(cli: &Cli, a: &SynthArgs) -> CliResult<()> {
    let mut flags = Vec::new();
    if let Some(c) = a.count {
        flags.push(("count_per_class", json(c)));
    }
    if let Some(n) = a.min_nodes {
        flags.push(("min_nodes", json(n)));
    }
    if let Some(n) = a.max_nodes {
        flags.push(("max_nodes", json(n)));
    }
    if a.canonical {
        flags.push(("wiring", json(Wiring::Canonical)));
    }
    if let Some(s) = cli.seed {
        flags.push(("seed", json(s)));
    }
    let cfg: SynthConfig = resolve(cli, flags)?;
    if cfg.count_per_class == 0 {
        return Err(usage("count must be positive"));
    }
    if cfg.min_nodes < 5 || cfg.min_nodes > cfg.max_nodes {
        return Err(usage(format!(
            "node range [{}, {}] invalid (need 5 <= min <= max)",
            cfg.min_nodes, cfg.max_nodes
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let ds = make_synthetic_dataset(cfg.count_per_class, cfg.min_nodes, cfg.max_nodes, &mut rng, cfg.wiring)?;
    let dir = out_dir(cli, "synth")?;
    write_tudataset(&ds, &dir, &cfg.name)?;
    write_config(&dir, &cfg)?;
    println!("wrote {} graphs to {}", ds.len(), dir.display());
    Ok(())
}

fn cmd_train(cli: &Cli, a: &TrainArgs) -> CliResult<()> {
    let mut flags = Vec::new();
    dataset_flags(&a.data, &mut flags)?;
    if let Some(e) = a.epochs {
        flags.push(("model.epochs", json(e)));
    }
    if a.identity_debug {
        flags.push(("identity_debug", json(true)));
    }
    if let Some(s) = cli.seed {
        flags.push(("model.seed", json(s)));
        flags.push(("split.seed", json(s)));
    }
    let mut cfg: TrainConfig = resolve(cli, flags)?;
    let ds = cfg.dataset.load()?;
    let dim = ds
        .feature_dim()
        .ok_or_else(|| usage("graphs have different feature widths; choose a feature policy"))?;
    if cfg.identity_debug {
        cfg.model = VgaeConfig {
            seed: cfg.model.seed,
            ..VgaeConfig::identity_debug(dim)
        };
        cfg.model.epochs = 0;
    }
    let split = build_split(&ds, &cfg.split)?;
    let graphs: Vec<_> = split.train.iter().map(|&i| ds.graphs()[i].clone()).collect();
    let dir = out_dir(cli, "train")?;
    let (model, mut report) = train(&graphs, &cfg.model)?;
    let ck = dir.join("checkpoint.json");
    model.save(&ck)?;
    report.checkpoint_path = Some(ck.display().to_string());
    report.write_losses_csv(&dir.join("losses.csv"))?;
    write(&dir, "train_report.json", &serde_json::to_string_pretty(&report).map_err(GramError::from)?)?;
    write(&dir, "split.json", &serde_json::to_string_pretty(&split).map_err(GramError::from)?)?;
    write_config(&dir, &cfg)?;
    if let (Some(first), Some(last)) = (report.epochs.first(), report.epochs.last()) {
        println!("epoch 1 loss {:.6}, epoch {} loss {:.6}", first.total, last.epoch, last.total);
    }
    println!("checkpoint written to {}", ck.display());
    Ok(())
}

fn cmd_score(cli: &Cli, a: &ScoreArgs) -> CliResult<()> {
    let mut flags = Vec::new();
    dataset_flags(&a.data, &mut flags)?;
    if let Some(c) = &a.checkpoint {
        flags.push(("checkpoint", json(c)));
    }
    if let Some(k) = a.noise_samples {
        flags.push(("noise_samples", json(k)));
    }
    if let Some(p) = &a.phi {
        let phi: Activation = p.parse().map_err(usage)?;
        flags.push(("phi", json(phi)));
    }
    if let Some(s) = cli.seed {
        flags.push(("seed", json(s)));
    }
    let cfg: ScoreConfig = resolve(cli, flags)?;
    let ck = cfg.checkpoint.as_ref().ok_or_else(|| usage("no checkpoint given (--checkpoint)"))?;
    if !ck.is_file() {
        return Err(usage(format!("checkpoint {} does not exist", ck.display())));
    }
    let model = VgaeModel::load(ck)?;
    let ds = cfg.dataset.load()?;
    let mut reports = Vec::with_capacity(ds.len());
    let mut sampled = Vec::new();
    for (i, g) in ds.graphs().iter().enumerate() {
        reports.push(score(&model, g, cfg.phi, NoiseMode::Deterministic, i)?);
        if cfg.noise_samples > 0 {
            let seed = cfg.seed.wrapping_add(i as u64);
            sampled.push(sampled_mean_score(&model, g, cfg.phi, cfg.noise_samples, seed, cfg.noise_scale)?);
        }
    }
    let dir = out_dir(cli, "score")?;
    let extra = (cfg.noise_samples > 0).then_some(sampled.as_slice());
    write_reports(&reports, extra, &dir.join("scores.csv"), &dir.join("scores.json"))?;
    write_config(&dir, &cfg)?;
    for r in reports.iter().take(10) {
        println!("graph {:>4}  score {:.6}", r.graph_id, r.graph_score);
    }
    if reports.len() > 10 {
        println!("... {} graphs in {}", reports.len(), dir.join("scores.csv").display());
    }
    Ok(())
}

fn cmd_eval(cli: &Cli, a: &EvalArgs) -> CliResult<()> {
    let mut flags = Vec::new();
    if let Some(m) = &a.methods {
        let methods: Vec<Value> = m
            .split(',')
            .map(str::trim)
            .filter(|s| !s.is_empty())
            .map(|s| s.parse::<crate::eval::Method>().map(json).map_err(usage))
            .collect::<CliResult<_>>()?;
        flags.push(("methods", Value::Array(methods)));
    }
    if let Some(e) = a.epochs {
        flags.push(("model.epochs", json(e)));
    }
    let mut cfg: ExperimentConfig = resolve(cli, flags)?;
    if let Some(s) = cli.seed {
        let k = cfg.seeds.len() as u64;
        cfg.seeds = (0..k).map(|i| s.wrapping_add(i)).collect();
    }
    if cfg.methods.is_empty() || cfg.seeds.is_empty() || cfg.datasets.is_empty() {
        return Err(usage("experiment needs at least one dataset, method and seed"));
    }
    let out = run_experiment(&cfg)?;
    let dir = out_dir(cli, "eval")?;
    out.write(&dir)?;
    write_config(&dir, &cfg)?;
    print!("{}", out.table.to_text());
    for c in out.table.cells.iter().filter(|c| c.error.is_some()) {
        eprintln!(
            "cell {} / {} / seed {} failed: {}",
            c.dataset,
            c.method.name(),
            c.seed,
            c.error.as_deref().unwrap_or("")
        );
    }
    if out.table.all_failed() {
        return Err(CliError::Runtime(GramError::Domain("every experiment cell failed".into())));
    }
    Ok(())
}

fn cmd_oracle(cli: &Cli, a: &OracleArgs) -> CliResult<()> {
    let mut flags = Vec::new();
    if let Some(e) = a.epsilon {
        flags.push(("epsilon", json(e)));
    }
    if let Some(t) = a.trials {
        flags.push(("trials", json(t)));
    }
    if let Some(g) = &a.graph {
        flags.push(("graph.path", json(g)));
        flags.push(("graph.name", json(a.name.clone().unwrap_or_else(|| "synthetic".into()))));
    }
    if let Some(i) = a.index {
        flags.push(("index", json(i)));
    }
    if let Some(s) = cli.seed {
        flags.push(("seed", json(s)));
    }
    let cfg: OracleConfig = resolve(cli, flags)?;
    let dir = out_dir(cli, "oracle")?;
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);

    let graphs = match &cfg.graph {
        None => {
            let table = reproduce_table1_at(cfg.epsilon)?;
            let text = table.to_text();
            print!("{text}");
            write(&dir, "table1.txt", &text)?;
            write(&dir, "table1.json", &serde_json::to_string_pretty(&table).map_err(GramError::from)?)?;
            let (tree, ring) = reference_graphs();
            vec![("binary_tree".to_string(), tree), ("double_ring".to_string(), ring)]
        }
        Some(r) => {
            let ds = r.load()?;
            let g = ds
                .graphs()
                .get(cfg.index)
                .ok_or_else(|| usage(format!("graph index {} out of range ({} graphs)", cfg.index, ds.len())))?
                .clone();
            let rep = score_distribution(&propagate_identity(&g, 4)?, cfg.epsilon)?;
            for (k, s) in rep.nodes.iter().enumerate() {
                println!("node {:>3}  N({:.4}, {:.4})", k + 1, s.mean, s.std);
            }
            println!("score     N({:.4}, {:.4})", rep.graph.mean, rep.graph.std);
            write(&dir, "oracle.json", &serde_json::to_string_pretty(&rep).map_err(GramError::from)?)?;
            vec![(format!("graph_{}", cfg.index), g)]
        }
    };

    if cfg.trials > 0 {
        let mut reports = Vec::new();
        for (name, g) in &graphs {
            let analytic = score_distribution(&propagate_identity(g, 4)?, cfg.epsilon)?;
            let mc = monte_carlo_score(g, cfg.epsilon, cfg.trials, &mut rng, cfg.noise_model)?;
            let se = analytic.graph.std / (cfg.trials as f64).sqrt();
            println!(
                "{name}: monte carlo N({:.4}, {:.4}) over {} trials; analytic N({:.4}, {:.4}); mean within 3 SE: {}",
                mc.graph.mean,
                mc.graph.std,
                cfg.trials,
                analytic.graph.mean,
                analytic.graph.std,
                (mc.graph.mean - analytic.graph.mean).abs() <= 3.0 * se
            );
            reports.push(serde_json::json!({ "graph": name, "monte_carlo": mc, "analytic": analytic.graph }));
        }
        write(&dir, "monte_carlo.json", &serde_json::to_string_pretty(&reports).map_err(GramError::from)?)?;
    }
    write_config(&dir, &cfg)?;
    Ok(())
}

pub fn execute(cli: &Cli) -> CliResult<()> {
    match &cli.command {
        Command::Synth(a) => cmd_synth(cli, a),
        Command::Train(a) => cmd_train(cli, a),
        Command::Score(a) => cmd_score(cli, a),
        Command::Eval(a) => cmd_eval(cli, a),
        Command::Oracle(a) => cmd_oracle(cli, a),
    }
}

/// Parses `args` (including the program name) and runs the command,
/// returning the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_USAGE } else { EXIT_OK };
        }
    };
    match execute(&cli) {
        Ok(()) => EXIT_OK,
        Err(e @ CliError::Usage(_)) => {
            eprintln!("{e}");
            EXIT_USAGE
        }
        Err(e) => {
            eprintln!("error: {e}");
            EXIT_RUNTIME
        }
    }
}
