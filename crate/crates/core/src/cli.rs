//! Command-line front end.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::fs;
use std::path::{Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::cam::{self, CamOptions, FeatureGrid};
use crate::error::{Error, Result};
use crate::eval::{self, AucReport, SuiteConfig};
use crate::model::{train, Activation, Dataset, Mlp, MlpConfig, Optimizer, TrainConfig};
use crate::planted::{self, PlantedConfig};
use crate::synth::{FunctionId, SynthFunction, ARITY};
use crate::tnid::{self, Representative, Task, TnidConfig};

#[derive(Parser, Debug)]
#[command(name = "xdiff", version, about = "Interaction detection and interaction saliency from cross derivatives")]
pub struct Cli {
    /// Seed for every random choice.
    #[arg(long, global = true, env = "XDIFF_SEED", default_value_t = 0)]
    pub seed: u64,

    /// Worker threads; results do not depend on this.
    #[arg(long, global = true, default_value_t = 1)]
    pub threads: usize,

    /// Directory for outputs and run.json.
    #[arg(long, global = true, default_value = ".")]
    pub out_dir: PathBuf,

    #[arg(long, global = true, value_enum, default_value_t = LogLevel::Warn)]
    pub log_level: LogLevel,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
pub enum LogLevel {
    Off,
    Error,
    Warn,
    Info,
    Debug,
    Trace,
}

impl LogLevel {
    fn filter(self) -> log::LevelFilter {
        match self {
            LogLevel::Off => log::LevelFilter::Off,
            LogLevel::Error => log::LevelFilter::Error,
            LogLevel::Warn => log::LevelFilter::Warn,
            LogLevel::Info => log::LevelFilter::Info,
            LogLevel::Debug => log::LevelFilter::Debug,
            LogLevel::Trace => log::LevelFilter::Trace,
        }
    }
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Sample a dataset from a synthetic test function.
    GenData(GenDataArgs),
    /// Train a network on a dataset.
    Train(TrainArgs),
    /// Rank interactions of a trained network.
    Detect(DetectArgs),
    /// Score every representative/aggregation combination against ground truth.
    Sweep(SweepArgs),
    /// Pairwise AUC benchmark over the synthetic functions.
    Suite(SuiteArgs),
    /// Interaction saliences over a grid of feature vectors.
    Cam(CamArgs),
    /// Planted-pair saliency experiment.
    CamDemo(CamDemoArgs),
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::GenData(_) => "gen-data",
            Command::Train(_) => "train",
            Command::Detect(_) => "detect",
            Command::Sweep(_) => "sweep",
            Command::Suite(_) => "suite",
            Command::Cam(_) => "cam",
            Command::CamDemo(_) => "cam-demo",
        }
    }

    fn config(&self) -> serde_json::Value {
        let v = match self {
            Command::GenData(a) => serde_json::to_value(a),
            Command::Train(a) => serde_json::to_value(a),
            Command::Detect(a) => serde_json::to_value(a),
            Command::Sweep(a) => serde_json::to_value(a),
            Command::Suite(a) => serde_json::to_value(a),
            Command::Cam(a) => serde_json::to_value(a),
            Command::CamDemo(a) => serde_json::to_value(a),
        };
        v.expect("arguments serialize")
    }
}

#[derive(Args, Debug, Serialize)]
pub struct GenDataArgs {
    #[arg(long, default_value = "F8")]
    pub function: FunctionId,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    /// `.csv` or `.json`.
    #[arg(long, default_value = "data.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct NetArgs {
    /// Hidden layer widths.
    #[arg(long, value_delimiter = ',', default_value = "140,100,60,20")]
    pub hidden: Vec<usize>,
    #[arg(long, value_enum, default_value_t = ActivationArg::Gelu)]
    pub activation: ActivationArg,
    #[arg(long, default_value_t = 0.003)]
    pub lr: f64,
    #[arg(long, default_value_t = 200)]
    pub max_epochs: usize,
    #[arg(long, default_value_t = 10)]
    pub patience: usize,
    #[arg(long, default_value_t = 100)]
    pub batch_size: usize,
    #[arg(long, default_value_t = 0.2)]
    pub val_fraction: f64,
    #[arg(long, value_enum, default_value_t = OptimizerArg::Adam)]
    pub optimizer: OptimizerArg,
}

impl NetArgs {
    fn train_config(&self, seed: u64) -> TrainConfig {
        TrainConfig {
            learning_rate: self.lr,
            max_epochs: self.max_epochs,
            patience: self.patience,
            batch_size: self.batch_size,
            val_fraction: self.val_fraction,
            optimizer: match self.optimizer {
                OptimizerArg::Adam => Optimizer::Adam,
                OptimizerArg::Sgd => Optimizer::Sgd,
            },
            seed,
        }
    }

    fn activation(&self) -> Activation {
        match self.activation {
            ActivationArg::Gelu => Activation::Gelu,
            ActivationArg::Relu => Activation::Relu,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum ActivationArg {
    Gelu,
    Relu,
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum OptimizerArg {
    Adam,
    Sgd,
}

#[derive(Args, Debug, Serialize)]
pub struct TrainArgs {
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub net: NetArgs,
    /// Subtract feature means before scaling.
    #[arg(long)]
    pub center: bool,
    #[arg(long, default_value = "model.json")]
    pub out: PathBuf,
    #[arg(long, default_value = "training.json")]
    pub report: PathBuf,
}

#[derive(Args, Debug, Serialize, Clone)]
pub struct TnidArgs {
    #[arg(long, default_value_t = 5)]
    pub max_order: usize,
    #[arg(long, default_value_t = 2)]
    pub full_order: usize,
    #[arg(long, default_value_t = 10)]
    pub top_k: usize,
    #[arg(long, default_value = "mean,min,mode,random")]
    pub reps: String,
    #[arg(long, default_value = "mean")]
    pub agg: String,
}

impl TnidArgs {
    fn config(&self, task: Task, seed: u64) -> Result<TnidConfig> {
        let cfg = TnidConfig {
            max_order: self.max_order,
            full_order: self.full_order,
            top_k: self.top_k,
            representatives: Representative::parse_list(&self.reps)?,
            aggregation: self.agg.parse()?,
            task,
            seed,
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Clone, Copy, Debug, ValueEnum, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TaskArg {
    Regression,
    Classification,
}

#[derive(Args, Debug, Serialize)]
pub struct DetectArgs {
    #[arg(long)]
    pub model: PathBuf,
    #[arg(long)]
    pub data: PathBuf,
    #[command(flatten)]
    pub tnid: TnidArgs,
    #[arg(long, value_enum, default_value_t = TaskArg::Regression)]
    pub task: TaskArg,
    #[arg(long, default_value_t = 0)]
    pub class_index: usize,
    /// Differentiate the class logit rather than its probability.
    #[arg(long)]
    pub logit: bool,
    /// Square classification cross partials.
    #[arg(long)]
    pub square: bool,
    #[arg(long, default_value = "ranking.json")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct SweepArgs {
    /// Synthetic function supplying the ground truth.
    #[arg(long, default_value = "F8")]
    pub function: FunctionId,
    /// Trained network; one is trained on sampled data when absent.
    #[arg(long, requires = "data")]
    pub model: Option<PathBuf>,
    #[arg(long)]
    pub data: Option<PathBuf>,
    /// Use the exact function instead of a network.
    #[arg(long, conflicts_with = "model")]
    pub oracle: bool,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[command(flatten)]
    pub tnid: TnidArgs,
    #[command(flatten)]
    pub net: NetArgs,
    #[arg(long, default_value = "sweep.csv")]
    pub out: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct SuiteArgs {
    /// `F1..F10` or a comma-separated list.
    #[arg(long, default_value = "F1..F10")]
    pub functions: String,
    #[arg(long, default_value_t = 3)]
    pub trials: usize,
    #[arg(long, default_value_t = 10_000)]
    pub samples: usize,
    #[command(flatten)]
    pub tnid: TnidArgs,
    #[command(flatten)]
    pub net: NetArgs,
    #[arg(long, default_value = "table.csv")]
    pub out: PathBuf,
    /// Per-trial AUCs and structural checks.
    #[arg(long, default_value = "trials.json")]
    pub details: PathBuf,
}

#[derive(Args, Debug, Serialize)]
pub struct CamArgs {
    #[arg(long)]
    pub model: PathBuf,
    /// Headerless CSV, one feature vector per line.
    #[arg(long)]
    pub grid: PathBuf,
    #[arg(long, default_value_t = 2)]
    pub order: usize,
    /// Restrict the importance sum to the vector itself (default).
    #[arg(long, overrides_with = "global_k")]
    pub local_k: bool,
    /// Sum the importance over every vector.
    #[arg(long, overrides_with = "local_k")]
    pub global_k: bool,
    #[arg(long)]
    pub no_square: bool,
    #[arg(long)]
    pub no_symmetrize: bool,
    #[arg(long)]
    pub symmetrize_before_square: bool,
    #[arg(long)]
    pub keep_diagonal: bool,
    #[arg(long)]
    pub rectify: bool,
    /// Output of the network to explain.
    #[arg(long, default_value_t = 0)]
    pub output: usize,
    #[arg(long, default_value_t = 4)]
    pub top: usize,
    /// Spatial layout `ROWSxCOLS` for drawing pairs.
    #[arg(long, value_parser = parse_layout)]
    pub layout: Option<(usize, usize)>,
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long, default_value = "cam.json")]
    pub out: PathBuf,
}

impl CamArgs {
    fn options(&self) -> CamOptions {
        CamOptions {
            local_k: !self.global_k,
            square: !self.no_square,
            symmetrize: !self.no_symmetrize,
            zero_diagonal: !self.keep_diagonal,
            symmetrize_before_square: self.symmetrize_before_square,
            rectify: self.rectify,
        }
    }
}

fn parse_layout(s: &str) -> std::result::Result<(usize, usize), String> {
    let (r, c) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected ROWSxCOLS, got `{s}`"))?;
    let r = r.trim().parse().map_err(|e| format!("rows: {e}"))?;
    let c = c.trim().parse().map_err(|e| format!("cols: {e}"))?;
    Ok((r, c))
}

#[derive(Args, Debug, Serialize)]
pub struct CamDemoArgs {
    #[arg(long, default_value_t = 20)]
    pub seeds: usize,
    #[arg(long, default_value_t = 4000)]
    pub samples: usize,
    #[arg(long, default_value_t = 8)]
    pub eval_grids: usize,
    #[arg(long, value_delimiter = ',', default_value = "64,32")]
    pub hidden: Vec<usize>,
    #[arg(long, default_value = "cam_demo.json")]
    pub out: PathBuf,
    /// Directory for one heatmap per seed.
    #[arg(long, default_value = "cam_demo")]
    pub svg_dir: PathBuf,
}

#[derive(Serialize)]
struct RunRecord {
    command: &'static str,
    seed: u64,
    config: serde_json::Value,
    status: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    error: Option<String>,
    artifacts: BTreeMap<String, String>,
    execution: Execution,
}

/// Settings that must not change any result.
#[derive(Serialize)]
struct Execution {
    threads: usize,
}

struct Run {
    out_dir: PathBuf,
    seed: u64,
    artifacts: BTreeMap<String, String>,
}

impl Run {
    fn output(&self, path: &Path) -> PathBuf {
        self.out_dir.join(path)
    }

    fn write(&mut self, path: &Path, bytes: impl AsRef<[u8]>) -> Result<()> {
        let full = self.output(path);
        if let Some(parent) = full.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
        fs::write(&full, bytes.as_ref()).map_err(|e| Error::io(&full, e))?;
        self.artifacts
            .insert(path.display().to_string(), hex::encode(Sha256::digest(bytes.as_ref())));
        Ok(())
    }
}

fn write_record(path: &Path, record: &RunRecord) -> Result<()> {
    let mut text = serde_json::to_string_pretty(record).expect("record serializes");
    text.push('\n');
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

/// Parses arguments, runs the command and returns the process exit code:
/// 0 on success, 1 for invalid input, 2 for filesystem failures.
pub fn main_with_args<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 1 } else { 0 };
        }
    };
    let _ = env_logger::Builder::new()
        .filter_level(cli.log_level.filter())
        .format_timestamp(None)
        .try_init();
    match run(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            if e.is_io() {
                2
            } else {
                1
            }
        }
    }
}

pub fn run(cli: Cli) -> Result<()> {
    if cli.threads == 0 {
        return Err(Error::Config("--threads must be at least 1".into()));
    }
    fs::create_dir_all(&cli.out_dir).map_err(|e| Error::io(&cli.out_dir, e))?;
    let record_path = cli.out_dir.join("run.json");
    let mut record = RunRecord {
        command: cli.command.name(),
        seed: cli.seed,
        config: cli.command.config(),
        status: "running",
        error: None,
        artifacts: BTreeMap::new(),
        execution: Execution { threads: cli.threads },
    };
    write_record(&record_path, &record)?;

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::Config(e.to_string()))?;
    let mut ctx = Run {
        out_dir: cli.out_dir.clone(),
        seed: cli.seed,
        artifacts: BTreeMap::new(),
    };
    let result = pool.install(|| dispatch(&cli.command, &mut ctx));

    record.artifacts = ctx.artifacts;
    match &result {
        Ok(()) => record.status = "ok",
        Err(e) => {
            record.status = "error";
            record.error = Some(e.to_string());
        }
    }
    write_record(&record_path, &record)?;
    result
}

fn dispatch(command: &Command, ctx: &mut Run) -> Result<()> {
    match command {
        Command::GenData(a) => gen_data(a, ctx),
        Command::Train(a) => train_cmd(a, ctx),
        Command::Detect(a) => detect_cmd(a, ctx),
        Command::Sweep(a) => sweep_cmd(a, ctx),
        Command::Suite(a) => suite_cmd(a, ctx),
        Command::Cam(a) => cam_cmd(a, ctx),
        Command::CamDemo(a) => cam_demo_cmd(a, ctx),
    }
}

fn gen_data(a: &GenDataArgs, ctx: &mut Run) -> Result<()> {
    let data = SynthFunction::new(a.function).sample_dataset(a.samples, ctx.seed)?;
    let text = match a.out.extension().and_then(|e| e.to_str()) {
        Some("json") => data.to_json_string(),
        _ => data.to_csv_string(),
    };
    ctx.write(&a.out, text)
}

fn train_on(data: &Dataset, net: &NetArgs, center: bool, seed: u64) -> Result<(Mlp, crate::model::TrainingReport)> {
    let data = if data.normalized {
        data.clone()
    } else {
        data.normalize(center)?
    };
    let mlp = MlpConfig {
        hidden: net.hidden.clone(),
        activation: net.activation(),
        seed,
        ..MlpConfig::new(data.n_features(), data.n_targets())
    };
    train(&data, &mlp, &net.train_config(seed))
}

fn to_json_line<T: Serialize>(value: &T) -> String {
    let mut s = serde_json::to_string_pretty(value).expect("serializable output");
    s.push('\n');
    s
}

fn train_cmd(a: &TrainArgs, ctx: &mut Run) -> Result<()> {
    let data = Dataset::load(&a.data)?;
    let (model, report) = train_on(&data, &a.net, a.center, ctx.seed)?;
    log::info!(
        "stopped after {} epochs, best validation loss {:.4e} at epoch {}",
        report.stopped_epoch,
        report.best_val_loss(),
        report.best_epoch
    );
    ctx.write(&a.out, to_json_line(&model))?;
    ctx.write(&a.report, to_json_line(&report))
}

fn detect_cmd(a: &DetectArgs, ctx: &mut Run) -> Result<()> {
    let model = Mlp::load(&a.model)?;
    let data = Dataset::load(&a.data)?;
    let task = match a.task {
        TaskArg::Regression => Task::Regression,
        TaskArg::Classification => Task::Classification {
            class_index: a.class_index,
            logit: a.logit,
            square: a.square,
        },
    };
    let cfg = a.tnid.config(task, ctx.seed)?;
    let ranking = tnid::detect_model(&model, &data, &cfg)?;
    let mut text = ranking.to_json();
    text.push('\n');
    ctx.write(&a.out, text)
}

fn sweep_cmd(a: &SweepArgs, ctx: &mut Run) -> Result<()> {
    let f = SynthFunction::new(a.function);
    let truth = f.ground_truth();
    let cfg = a.tnid.config(Task::Regression, ctx.seed)?;
    let score = |r: &tnid::InteractionRanking| eval::mean_auc_across_orders(r, &truth, ARITY);
    let rows = if a.oracle {
        let data = f.sample_dataset(a.samples, ctx.seed)?;
        tnid::aggregation_sweep(&f, &data, &cfg, score)?
    } else {
        let (model, data) = match (&a.model, &a.data) {
            (Some(m), Some(d)) => (Mlp::load(m)?, Dataset::load(d)?),
            _ => {
                let data = f.sample_dataset(a.samples, ctx.seed)?.normalize(false)?;
                let (model, _) = train_on(&data, &a.net, false, ctx.seed)?;
                (model, data)
            }
        };
        let data = match (&model.normalization, data.normalized) {
            (Some(stats), false) => data.normalize_with(stats)?,
            _ => data,
        };
        let out = tnid::ModelOutput::new(&model, Task::Regression)?;
        if !out.is_twice_differentiable() {
            return Err(Error::Activation("sweep needs a smooth network".into()));
        }
        tnid::aggregation_sweep(&out, &data, &cfg, score)?
    };
    let mut text = String::from("label,mean_auc\n");
    for r in &rows {
        let score = r.score.map_or_else(String::new, |s| format!("{s:.6}"));
        text.push_str(&format!("{},{score}\n", r.label));
    }
    ctx.write(&a.out, text)
}

#[derive(Serialize)]
struct TrialSummary {
    function: FunctionId,
    trial: usize,
    seed: u64,
    pairwise_auc: f64,
    epochs: usize,
    best_val_loss: f64,
    subsampling_violations: usize,
}

fn suite_cmd(a: &SuiteArgs, ctx: &mut Run) -> Result<()> {
    let cfg = SuiteConfig {
        functions: FunctionId::parse_list(&a.functions)?,
        trials: a.trials,
        samples: a.samples,
        seed: ctx.seed,
        hidden: a.net.hidden.clone(),
        train: a.net.train_config(ctx.seed),
        tnid: a.tnid.config(Task::Regression, ctx.seed)?,
    };
    if a.trials == 0 {
        return Err(Error::Config("--trials must be at least 1".into()));
    }
    let trials = eval::run_suite(&cfg)?;
    let violations: usize = trials.iter().map(|t| t.subsampling_violations).sum();
    if violations > 0 {
        log::error!("{violations} subsets were not extensions of a top-k parent");
    }
    let report = AucReport::from_trials(&trials);
    ctx.write(&a.out, report.to_csv())?;
    let summaries: Vec<TrialSummary> = trials
        .iter()
        .map(|t| TrialSummary {
            function: t.function,
            trial: t.trial,
            seed: t.seed,
            pairwise_auc: t.pairwise_auc,
            epochs: t.report.stopped_epoch,
            best_val_loss: t.report.best_val_loss(),
            subsampling_violations: t.subsampling_violations,
        })
        .collect();
    ctx.write(&a.details, to_json_line(&summaries))
}

#[derive(Serialize)]
struct CamOutput<'a> {
    order: usize,
    tuples: Vec<cam::RankedTuple>,
    options: &'a CamOptions,
}

fn cam_cmd(a: &CamArgs, ctx: &mut Run) -> Result<()> {
    let model = Mlp::load(&a.model)?;
    let mut grid = FeatureGrid::read_csv(&a.grid)?;
    if let Some((r, c)) = a.layout {
        grid = grid.with_layout(r, c)?;
    }
    if let Some(stats) = &model.normalization {
        let flat = stats.apply(&grid.flat());
        grid.x = ndarray::Array2::from_shape_vec(grid.x.raw_dim(), flat).expect("same shape");
    }
    let task = if model.output_dim() == 1 {
        Task::Regression
    } else {
        Task::Classification {
            class_index: a.output,
            logit: false,
            square: false,
        }
    };
    let f = tnid::ModelOutput::new(&model, task)?;
    if a.order >= 2 && !f.is_twice_differentiable() {
        return Err(Error::Activation(
            "piecewise-linear network has zero interaction salience; train with GELU".into(),
        ));
    }
    let opts = a.options();
    let s = cam::taylor_cam(&f, &grid, a.order, &opts)?;
    let out = CamOutput {
        order: a.order,
        tuples: cam::top_interactions(&s, a.top),
        options: &opts,
    };
    if let Some(svg) = &a.svg {
        ctx.write(svg, cam::heatmap_svg(&s, grid.layout, a.top)?)?;
    }
    ctx.write(&a.out, to_json_line(&out))
}

fn cam_demo_cmd(a: &CamDemoArgs, ctx: &mut Run) -> Result<()> {
    let cfg = PlantedConfig {
        samples: a.samples,
        eval_grids: a.eval_grids,
        hidden: a.hidden.clone(),
        ..PlantedConfig::default()
    };
    let seeds: Vec<u64> = (0..a.seeds as u64).map(|i| ctx.seed.wrapping_add(i)).collect();
    let (report, outcomes) = planted::run(&cfg, &seeds)?;
    for o in &outcomes {
        let path = a.svg_dir.join(format!("seed_{}.svg", o.seed));
        ctx.write(&path, cam::heatmap_svg(&o.salience, Some(cfg.layout), 1)?)?;
    }
    ctx.write(&a.out, to_json_line(&report))
}
