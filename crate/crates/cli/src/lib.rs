//! Command-line pipeline: generate a planted graph, train the generator,
//! augment, and evaluate. Each subcommand is a library function so the
//! pipeline can be driven from tests as well as from the binary.

use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use flashgan_core::augment::{
    flashgan_augment, oversample, reweight_weights, smote, Augmented, DEFAULT_IDLE_ATTEMPTS, DEFAULT_SMOTE_NEIGHBORS,
};
use flashgan_core::dataio::{generate, load_graph, save_graph, GraphStats, SynthConfig};
use flashgan_core::evalsuite::{run_experiment, ClassifierConfig, Variant};
use flashgan_core::neural::Checkpoint;
use flashgan_core::trainer::{restore, train_with, TrainConfig};
use flashgan_core::Error as CoreError;

pub const RUN_MANIFEST: &str = "run_manifest.json";
pub const GENERATOR_CKPT: &str = "generator.ckpt";
pub const DISCRIMINATOR_CKPT: &str = "discriminator.ckpt";
pub const HISTORY_CSV: &str = "history.csv";

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("{0}")]
    Usage(String),
    #[error("{0}")]
    Domain(String),
    #[error("{0}")]
    Stall(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Usage(_) => 2,
            CliError::Domain(_) => 3,
            CliError::Stall(_) => 4,
        }
    }
}

impl From<CoreError> for CliError {
    fn from(e: CoreError) -> Self {
        let msg = e.to_string();
        match e {
            CoreError::CollectionStall { .. } | CoreError::AugmentationStall { .. } => CliError::Stall(msg),
            CoreError::Config(_)
            | CoreError::Parse { .. }
            | CoreError::Io { .. }
            | CoreError::Json(_)
            | CoreError::Checkpoint(_)
            | CoreError::Schema(_) => CliError::Usage(msg),
            _ => CliError::Domain(msg),
        }
    }
}

pub type CliResult<T> = Result<T, CliError>;

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

#[derive(Parser, Debug)]
#[command(name = "flashgan", version, about = "Edge-aware GAN oversampling for imbalanced heterogeneous graphs")]
pub struct Cli {
    /// Base directory for every relative path.
    #[arg(long, global = true, default_value = ".")]
    pub workdir: PathBuf,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate a planted review graph.
    GenData(GenDataArgs),
    /// Train the generator and discriminators on a graph.
    Train(TrainArgs),
    /// Grow the minority class to a target ratio.
    Augment(AugmentArgs),
    /// Train and test the classifier on one or more graphs.
    Evaluate(EvaluateArgs),
}

#[derive(Args, Debug, Clone, Default)]
pub struct GenDataArgs {
    /// JSON or TOML file with generator settings.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub users: Option<usize>,
    #[arg(long)]
    pub products: Option<usize>,
    #[arg(long)]
    pub mu: Option<f64>,
}

#[derive(Args, Debug, Clone, Default)]
pub struct TrainArgs {
    #[arg(long)]
    pub graph: PathBuf,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub epochs: Option<u64>,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum MethodArg {
    Flashgan,
    Oversample,
    Smote,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentConfig {
    pub method: MethodArg,
    pub alpha: f64,
    pub seed: u64,
    pub smote_neighbors: usize,
    pub max_idle_attempts: usize,
    /// Per scored edge type; defaults to the thresholds saved in the checkpoint.
    pub eta: Option<Vec<f64>>,
}

impl Default for AugmentConfig {
    fn default() -> Self {
        AugmentConfig {
            method: MethodArg::Flashgan,
            alpha: 1.0,
            seed: 0,
            smote_neighbors: DEFAULT_SMOTE_NEIGHBORS,
            max_idle_attempts: DEFAULT_IDLE_ATTEMPTS,
            eta: None,
        }
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct AugmentArgs {
    #[arg(long)]
    pub graph: PathBuf,
    /// Generator checkpoint; required for `--method flashgan`.
    #[arg(long)]
    pub checkpoint: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub method: Option<MethodArg>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct EvaluateConfig {
    pub classifier: ClassifierConfig,
    pub seeds: Vec<u64>,
    pub jobs: usize,
    /// Also evaluate the first graph under class-reweighted loss.
    pub reweight: bool,
}

impl Default for EvaluateConfig {
    fn default() -> Self {
        EvaluateConfig { classifier: ClassifierConfig::default(), seeds: (0..10).collect(), jobs: 1, reweight: false }
    }
}

#[derive(Args, Debug, Clone, Default)]
pub struct EvaluateArgs {
    /// Graph directories; each becomes a variant named after its last path component.
    #[arg(required = true)]
    pub graphs: Vec<PathBuf>,
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: PathBuf,
    /// Seed range `a..b` (exclusive) or a comma list.
    #[arg(long)]
    pub seeds: Option<String>,
    #[arg(long)]
    pub jobs: Option<usize>,
    #[arg(long)]
    pub reweight: bool,
    #[arg(long)]
    pub epochs: Option<usize>,
}

/// Record written next to the outputs of every run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub tool_version: String,
    pub config_path: Option<String>,
    /// Fully resolved configuration after flag overrides.
    pub config: serde_json::Value,
    pub inputs: Vec<String>,
    pub output: String,
    pub seeds: Vec<u64>,
    /// SHA-256 over the relative names and bytes of every input file.
    pub input_hash: String,
}

impl RunManifest {
    pub fn load(path: &Path) -> CliResult<RunManifest> {
        let text = fs::read(path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
        serde_json::from_slice(&text).map_err(|e| usage(format!("bad manifest {}: {e}", path.display())))
    }
}

pub fn parse_seeds(s: &str) -> CliResult<Vec<u64>> {
    let bad = || usage(format!("invalid seed list `{s}`"));
    if let Some((a, b)) = s.split_once("..") {
        let (a, b): (u64, u64) = (a.trim().parse().map_err(|_| bad())?, b.trim().parse().map_err(|_| bad())?);
        if a >= b {
            return Err(bad());
        }
        return Ok((a..b).collect());
    }
    s.split(',').map(|x| x.trim().parse().map_err(|_| bad())).collect()
}

/// Reads a JSON or TOML config (by extension); missing keys keep defaults.
pub fn load_config<T: DeserializeOwned + Default>(path: Option<&Path>) -> CliResult<T> {
    let Some(path) = path else { return Ok(T::default()) };
    let text = fs::read_to_string(path).map_err(|e| usage(format!("cannot read config {}: {e}", path.display())))?;
    match path.extension().and_then(|e| e.to_str()) {
        Some("toml") => toml::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display()))),
        Some("json") => serde_json::from_str(&text).map_err(|e| usage(format!("config {}: {e}", path.display()))),
        _ => Err(usage(format!("config {} must end in .json or .toml", path.display()))),
    }
}

fn collect_files(root: &Path, dir: &Path, out: &mut Vec<(String, PathBuf)>) -> CliResult<()> {
    let entries = fs::read_dir(dir).map_err(|e| usage(format!("cannot list {}: {e}", dir.display())))?;
    for entry in entries {
        let path = entry.map_err(|e| usage(e.to_string()))?.path();
        if path.is_dir() {
            collect_files(root, &path, out)?;
        } else if path.file_name().is_some_and(|n| n != RUN_MANIFEST) {
            let rel = path.strip_prefix(root).unwrap_or(&path).to_string_lossy().replace('\\', "/");
            out.push((rel, path));
        }
    }
    Ok(())
}

/// Hex SHA-256 over every input file (directories are walked), in sorted
/// order of their names. Run manifests are skipped.
pub fn hash_inputs(inputs: &[PathBuf]) -> CliResult<String> {
    let mut h = Sha256::new();
    for (i, input) in inputs.iter().enumerate() {
        let mut files = Vec::new();
        if input.is_dir() {
            collect_files(input, input, &mut files)?;
        } else {
            let name = input.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
            files.push((name, input.clone()));
        }
        files.sort();
        for (rel, path) in files {
            let bytes = fs::read(&path).map_err(|e| usage(format!("cannot read {}: {e}", path.display())))?;
            h.update(format!("{i}:{rel}:{}\n", bytes.len()).as_bytes());
            h.update(&bytes);
        }
    }
    Ok(format!("{:x}", h.finalize()))
}

struct Ctx<'a> {
    workdir: &'a Path,
}

impl Ctx<'_> {
    fn path(&self, p: &Path) -> PathBuf {
        if p.is_absolute() { p.to_path_buf() } else { self.workdir.join(p) }
    }

    fn existing_dir(&self, p: &Path, what: &str) -> CliResult<PathBuf> {
        let full = self.path(p);
        if !full.is_dir() {
            return Err(usage(format!("{what} directory {} does not exist", full.display())));
        }
        Ok(full)
    }

    fn out_dir(&self, p: &Path) -> CliResult<PathBuf> {
        let full = self.path(p);
        fs::create_dir_all(&full).map_err(|e| usage(format!("cannot create {}: {e}", full.display())))?;
        Ok(full)
    }

    fn write_manifest(
        &self,
        subcommand: &str,
        config_path: Option<&Path>,
        config: &impl Serialize,
        inputs: &[PathBuf],
        out: &Path,
        seeds: Vec<u64>,
    ) -> CliResult<RunManifest> {
        let show = |p: &Path| p.strip_prefix(self.workdir).unwrap_or(p).to_string_lossy().into_owned();
        let manifest = RunManifest {
            subcommand: subcommand.into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            config_path: config_path.map(show),
            config: serde_json::to_value(config).map_err(|e| usage(e.to_string()))?,
            inputs: inputs.iter().map(|p| show(p)).collect(),
            output: show(out),
            seeds,
            input_hash: hash_inputs(inputs)?,
        };
        let path = out.join(RUN_MANIFEST);
        let text = serde_json::to_vec_pretty(&manifest).map_err(|e| usage(e.to_string()))?;
        fs::write(&path, text).map_err(|e| usage(format!("cannot write {}: {e}", path.display())))?;
        Ok(manifest)
    }
}

fn save_stats(g: &flashgan_core::HeteroGraph, out: &Path) -> CliResult<GraphStats> {
    let stats = GraphStats::of(g)?;
    stats.save(&out.join("stats.json"))?;
    Ok(stats)
}

pub fn cmd_gen_data(workdir: &Path, args: &GenDataArgs) -> CliResult<GraphStats> {
    let ctx = Ctx { workdir };
    let config_path = args.config.as_ref().map(|p| ctx.path(p));
    let mut cfg: SynthConfig = load_config(config_path.as_deref())?;
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.users {
        cfg.n_users = n;
    }
    if let Some(n) = args.products {
        cfg.n_products = n;
    }
    if let Some(mu) = args.mu {
        cfg.mu = mu;
    }
    cfg.validate()?;
    let g = generate(&cfg)?;
    let out = ctx.out_dir(&args.out)?;
    save_graph(&g, &out)?;
    let stats = save_stats(&g, &out)?;
    let inputs: Vec<PathBuf> = config_path.iter().cloned().collect();
    ctx.write_manifest("gen-data", config_path.as_deref(), &cfg, &inputs, &out, vec![cfg.seed])?;
    Ok(stats)
}

pub fn cmd_train(workdir: &Path, args: &TrainArgs) -> CliResult<flashgan_core::trainer::TrainHistory> {
    let ctx = Ctx { workdir };
    let graph_dir = ctx.existing_dir(&args.graph, "graph")?;
    let config_path = args.config.as_ref().map(|p| ctx.path(p));
    let mut cfg: TrainConfig = load_config(config_path.as_deref())?;
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    cfg.validate()?;
    let g = load_graph(&graph_dir)?;
    let out = ctx.out_dir(&args.out)?;
    let ckpt_dir = out.join("checkpoints");
    let outcome = train_with(&g, cfg.clone(), |epoch, gen, disc| {
        fs::create_dir_all(&ckpt_dir).map_err(|e| CoreError::Io { path: ckpt_dir.clone(), source: e })?;
        let id = format!("epoch_{epoch:04}");
        gen.save(&ckpt_dir.join(format!("{id}_generator.ckpt")))?;
        disc.save(&ckpt_dir.join(format!("{id}_discriminator.ckpt")))?;
        Ok(Some(id))
    })?;
    outcome.generator.save(&out.join(GENERATOR_CKPT))?;
    outcome.discriminator.save(&out.join(DISCRIMINATOR_CKPT))?;
    outcome.history.save_csv(&out.join(HISTORY_CSV))?;
    let mut inputs = vec![graph_dir];
    inputs.extend(config_path.iter().cloned());
    ctx.write_manifest("train", config_path.as_deref(), &cfg, &inputs, &out, vec![cfg.seed])?;
    Ok(outcome.history)
}

pub fn cmd_augment(workdir: &Path, args: &AugmentArgs) -> CliResult<(GraphStats, usize)> {
    let ctx = Ctx { workdir };
    let graph_dir = ctx.existing_dir(&args.graph, "graph")?;
    let config_path = args.config.as_ref().map(|p| ctx.path(p));
    let mut cfg: AugmentConfig = load_config(config_path.as_deref())?;
    if let Some(m) = args.method {
        cfg.method = m;
    }
    if let Some(a) = args.alpha {
        cfg.alpha = a;
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    let g = load_graph(&graph_dir)?;
    let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(cfg.seed);
    let mut inputs = vec![graph_dir];
    let out: Augmented = match cfg.method {
        MethodArg::Flashgan => {
            let ck = args.checkpoint.as_ref().ok_or_else(|| usage("--checkpoint is required for the flashgan method"))?;
            let ck = ctx.path(ck);
            let gen = Checkpoint::load(&ck)?;
            inputs.push(ck);
            let (net, thresholds) = restore(g.schema(), &gen, None)?;
            let eta = cfg.eta.clone().unwrap_or_else(|| thresholds.etas());
            flashgan_augment(&g, &net, &eta, cfg.alpha, &mut rng, cfg.max_idle_attempts)?
        }
        MethodArg::Oversample => oversample(&g, cfg.alpha, &mut rng)?,
        MethodArg::Smote => smote(&g, cfg.alpha, cfg.smote_neighbors, &mut rng)?,
    };
    inputs.extend(config_path.iter().cloned());
    let dir = ctx.out_dir(&args.out)?;
    save_graph(&out.graph, &dir)?;
    let stats = save_stats(&out.graph, &dir)?;
    let prov = dir.join("provenance.csv");
    fs::write(&prov, out.provenance_csv()).map_err(|e| usage(format!("cannot write {}: {e}", prov.display())))?;
    ctx.write_manifest("augment", config_path.as_deref(), &cfg, &inputs, &dir, vec![cfg.seed])?;
    Ok((stats, out.provenance.len()))
}

pub fn cmd_evaluate(workdir: &Path, args: &EvaluateArgs) -> CliResult<flashgan_core::evalsuite::EvalReport> {
    let ctx = Ctx { workdir };
    if args.graphs.is_empty() {
        return Err(usage("evaluate needs at least one graph directory"));
    }
    let config_path = args.config.as_ref().map(|p| ctx.path(p));
    let mut cfg: EvaluateConfig = load_config(config_path.as_deref())?;
    if let Some(s) = &args.seeds {
        cfg.seeds = parse_seeds(s)?;
    }
    if let Some(j) = args.jobs {
        cfg.jobs = j;
    }
    if let Some(e) = args.epochs {
        cfg.classifier.epochs = e;
    }
    cfg.reweight |= args.reweight;
    let mut inputs = Vec::new();
    let mut variants = Vec::new();
    for dir in &args.graphs {
        let full = ctx.existing_dir(dir, "graph")?;
        let name = full.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_else(|| "graph".into());
        if variants.iter().any(|v: &Variant| v.name == name) {
            return Err(usage(format!("two graph directories share the name `{name}`")));
        }
        variants.push(Variant { name, graph: load_graph(&full)?, class_weights: None });
        inputs.push(full);
    }
    if cfg.reweight {
        let g = variants[0].graph.clone();
        let w = reweight_weights(&g)?;
        variants.push(Variant { name: "reweight".into(), graph: g, class_weights: Some(w) });
    }
    inputs.extend(config_path.iter().cloned());
    let report = run_experiment(&variants, &cfg.seeds, &cfg.classifier, cfg.jobs)?;
    let out = ctx.out_dir(&args.out)?;
    report.save(&out)?;
    ctx.write_manifest("evaluate", config_path.as_deref(), &cfg, &inputs, &out, cfg.seeds.clone())?;
    Ok(report)
}

/// Runs a parsed command line, printing a short summary; returns the exit code.
pub fn run(cli: &Cli) -> i32 {
    let wd = &cli.workdir;
    let result: CliResult<String> = match &cli.command {
        Command::GenData(a) => cmd_gen_data(wd, a).map(|s| {
            format!("nodes {:?} edges {:?} classes {:?} bytes {}", s.nodes, s.edges, s.class_counts, s.bytes)
        }),
        Command::Train(a) => cmd_train(wd, a).map(|h| match h.rows.last() {
            Some(r) => format!("trained {} epochs; last loss_g {:.6} loss_d {:.6}", h.rows.len(), r.loss_g, r.loss_d),
            None => "trained 0 epochs".into(),
        }),
        Command::Augment(a) => cmd_augment(wd, a).map(|(s, n)| format!("added {n} nodes; graph now {} bytes", s.bytes)),
        Command::Evaluate(a) => cmd_evaluate(wd, a).map(|r| {
            r.variants
                .iter()
                .map(|v| match v.mean {
                    Some(m) => format!("{}: auc_prc {:.4} auc_roc {:.4}", v.name, m.auc_prc, m.auc_roc),
                    None => format!("{}: no completed seeds", v.name),
                })
                .collect::<Vec<_>>()
                .join("\n")
        }),
    };
    match result {
        Ok(summary) => {
            println!("{summary}");
            0
        }
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

/// Parses `args` (including the program name) and runs; clap usage errors
/// exit with code 2.
pub fn main_with<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    match Cli::try_parse_from(args) {
        Ok(cli) => run(&cli),
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            code
        }
    }
}
