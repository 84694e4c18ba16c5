//! `igcnet` command line: dataset generation, training, evaluation,
//! CSI-robustness sweeps, ablations and timing.
//!
//! Exit status is 0 on success, 2 on usage errors and 1 on runtime errors.
//! Results go to files; diagnostics go to stderr.

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand, ValueEnum};

use igcnet::baselines::{calibrate_greedy, WmmseConfig};
use igcnet::channel::{
    gen_gaussian, gen_geometric, gen_geometric_var_distance, load_dataset, save_dataset, Dataset,
    GaussianConfig, GeometricConfig, VarDistanceConfig,
};
use igcnet::graph::NormalizationScheme;
use igcnet::harness::{
    ablate, benchmark_time, calibration_set, evaluate, fine_tune, robustness_curve,
    train_with_progress, write_ablation_csv, write_history_csv, write_instances_csv,
    write_robust_csv, write_summary_csv, write_timing_csv, AblationAxis, CsiMode, EpochRecord,
    EvalOptions, Method, NormalizationChoice, TrainConfig,
};
use igcnet::model::{load_model, save_model, Activation, IgcNetModel};

#[derive(Parser)]
#[command(
    name = "igcnet",
    version,
    about = "Learned power control for the K-user interference channel"
)]
struct Cli {
    /// Worker threads for data generation and evaluation [default: all cores]
    #[arg(long, global = true, env = "IGCNET_THREADS")]
    threads: Option<usize>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a dataset file
    Gen(GenArgs),
    /// Train a model and write a checkpoint plus loss history
    Train(TrainArgs),
    /// Evaluate methods on a dataset
    Eval(EvalArgs),
    /// Relative performance under partial or noisy CSI
    Robust(RobustArgs),
    /// Train one model per training-set size or depth
    Ablate(AblateArgs),
    /// Per-instance inference time against WMMSE
    Bench(BenchArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Setting {
    Gaussian,
    Geometric,
    GeometricVar,
}

#[derive(Args)]
struct GenArgs {
    #[arg(long, value_enum, default_value = "gaussian")]
    setting: Setting,
    /// Number of transmitter-receiver pairs
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    k: u64,
    /// Number of instances
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Uniform [0,1] weights (gaussian setting only)
    #[arg(long, default_value_t = false, action = clap::ArgAction::Set)]
    weighted: bool,
    /// Minimum link distance in meters (geometric settings)
    #[arg(long)]
    d_min: Option<f64>,
    /// Maximum link distance in meters (geometric settings)
    #[arg(long)]
    d_max: Option<f64>,
    #[arg(long)]
    out: PathBuf,
}

/// Training hyper-parameters. Unset flags fall back to `--config`, then to
/// the built-in defaults shown.
#[derive(Args, Clone)]
struct TrainFlags {
    /// TOML file with training settings
    #[arg(long)]
    config: Option<PathBuf>,
    /// Message-passing layers [default: 5]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    layers: Option<u64>,
    /// Hidden width of MLP layers [default: 32]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    hidden: Option<u64>,
    /// Vertex embedding width [default: 32]
    #[arg(long, value_parser = clap::value_parser!(u64).range(2..))]
    embed: Option<u64>,
    /// Output activation of the combine network [default: tanh]
    #[arg(long)]
    activation: Option<Activation>,
    /// Adam learning rate [default: 0.001]
    #[arg(long)]
    lr: Option<f64>,
    /// Maximum epochs [default: 200]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    epochs: Option<u64>,
    /// Mini-batch size [default: 64]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    batch_size: Option<u64>,
    /// Epochs without validation improvement before stopping [default: 20]
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    patience: Option<u64>,
    /// Held-out fraction of the training data [default: 0.1]
    #[arg(long)]
    val_fraction: Option<f64>,
    /// Input normalization: auto, identity, log-snr or scaled [default: auto]
    #[arg(long, value_enum)]
    normalization: Option<NormArg>,
    /// Training seed [default: 0]
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Clone, Copy, ValueEnum)]
enum NormArg {
    Auto,
    Identity,
    LogSnr,
    Scaled,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Loss history CSV [default: <out>.history.csv]
    #[arg(long)]
    history: Option<PathBuf>,
    /// Start from this checkpoint, keeping its architecture and
    /// normalization (e.g. adapting a K=10 model to K=30)
    #[arg(long)]
    init: Option<PathBuf>,
    #[command(flatten)]
    train: TrainFlags,
}

/// Greedy keep-fraction selection.
#[derive(Args, Clone)]
struct GreedyFlags {
    /// Fixed keep fraction; skips calibration
    #[arg(long)]
    greedy_fraction: Option<f64>,
    /// Dataset for calibrating the keep fraction [default: freshly generated
    /// set of the same kind]
    #[arg(long)]
    calibration: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    model: Option<PathBuf>,
    #[arg(long)]
    data: PathBuf,
    /// Comma-separated subset of wmmse, igcnet, greedy
    #[arg(long, default_value = "wmmse,igcnet,greedy")]
    methods: String,
    /// Per-instance CSV; the summary goes to <report stem>.summary.csv
    #[arg(long)]
    report: PathBuf,
    #[command(flatten)]
    greedy: GreedyFlags,
}

#[derive(Args)]
struct RobustArgs {
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Corruption levels [default: 0,0.1,...,0.7 partial; 0,0.02,...,0.1 noisy]
    #[arg(long, value_delimiter = ',')]
    sweep: Option<Vec<f64>>,
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    report: PathBuf,
    /// Seed for channel-estimation noise
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Partial,
    Noisy,
}

#[derive(Clone, Copy, ValueEnum)]
enum AxisArg {
    Samples,
    Layers,
}

#[derive(Args)]
struct AblateArgs {
    #[arg(long, value_enum)]
    axis: AxisArg,
    /// Comma-separated sample counts or layer counts
    #[arg(long, value_delimiter = ',', required = true, num_args = 1..)]
    values: Vec<u64>,
    /// Training dataset
    #[arg(long)]
    data: PathBuf,
    /// Test dataset
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    report: PathBuf,
    #[command(flatten)]
    train: TrainFlags,
    #[command(flatten)]
    greedy: GreedyFlags,
}

#[derive(Args)]
struct BenchArgs {
    /// Pair counts to time
    #[arg(long, value_delimiter = ',', default_value = "10,20,30")]
    k: Vec<u64>,
    /// Instances per pair count
    #[arg(long, default_value_t = 200, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,
    /// Seed of the generated timing instances
    #[arg(long, default_value_t = 0)]
    data_seed: u64,
    /// Checkpoint to time [default: untrained model built from training flags]
    #[arg(long)]
    model: Option<PathBuf>,
    /// Untimed warm-up instances per method
    #[arg(long, default_value_t = 20)]
    warmup: usize,
    #[arg(long)]
    report: PathBuf,
    #[command(flatten)]
    train: TrainFlags,
}

/// Errors detected before any work starts; reported with exit status 2.
#[derive(Debug)]
struct Usage(String);

impl std::fmt::Display for Usage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl std::error::Error for Usage {}

fn usage<T>(msg: impl Into<String>) -> Result<T> {
    Err(Usage(msg.into()).into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e:#}");
            if e.downcast_ref::<Usage>().is_some() {
                ExitCode::from(2)
            } else {
                ExitCode::from(1)
            }
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    if cli.threads == Some(0) {
        return usage("--threads must be at least 1");
    }
    let mut pool = rayon::ThreadPoolBuilder::new();
    if let Some(t) = cli.threads {
        pool = pool.num_threads(t);
    }
    pool.build_global().context("starting worker pool")?;
    match cli.command {
        Command::Gen(a) => gen(a),
        Command::Train(a) => train_cmd(a),
        Command::Eval(a) => eval_cmd(a),
        Command::Robust(a) => robust_cmd(a),
        Command::Ablate(a) => ablate_cmd(a),
        Command::Bench(a) => bench_cmd(a),
    }
}

fn create(path: &Path) -> Result<BufWriter<File>> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    }
    Ok(BufWriter::new(
        File::create(path).with_context(|| format!("creating {}", path.display()))?,
    ))
}

fn load(path: &Path) -> Result<Dataset> {
    load_dataset(path).with_context(|| format!("loading dataset {}", path.display()))
}

fn gen(a: GenArgs) -> Result<()> {
    let (k, n) = (a.k as usize, a.n as usize);
    if a.weighted && !matches!(a.setting, Setting::Gaussian) {
        return usage("--weighted applies to the gaussian setting only");
    }
    if matches!(a.setting, Setting::Gaussian) && (a.d_min.is_some() || a.d_max.is_some()) {
        return usage("--d-min/--d-max apply to geometric settings only");
    }
    let data = match a.setting {
        Setting::Gaussian => gen_gaussian(&GaussianConfig::new(k, n, a.seed, a.weighted))?,
        Setting::Geometric => {
            let mut cfg = GeometricConfig::new(k, n, a.seed);
            cfg.d_min = a.d_min.unwrap_or(cfg.d_min);
            cfg.d_max = a.d_max.unwrap_or(cfg.d_max);
            gen_geometric(&cfg)?
        }
        Setting::GeometricVar => {
            let mut cfg = VarDistanceConfig::new(k, n, a.seed);
            cfg.lo = a.d_min.unwrap_or(cfg.lo);
            cfg.hi = a.d_max.unwrap_or(cfg.hi);
            gen_geometric_var_distance(&cfg)?
        }
    };
    save_dataset(&data, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    eprintln!(
        "wrote {}: K={} n={} generator={} seed={}",
        a.out.display(),
        data.k(),
        data.len(),
        data.generator,
        data.seed
    );
    Ok(())
}

fn train_config(f: &TrainFlags) -> Result<TrainConfig> {
    let mut cfg = match &f.config {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            match toml::from_str::<TrainConfig>(&text) {
                Ok(c) => c,
                Err(e) => return usage(format!("{}: {e}", p.display())),
            }
        }
        None => TrainConfig::default(),
    };
    if let Some(v) = f.layers {
        cfg.model.num_layers = v as usize;
    }
    if let Some(v) = f.hidden {
        cfg.model.hidden_dim = v as usize;
    }
    if let Some(v) = f.embed {
        cfg.model.embed_dim = v as usize;
    }
    if let Some(v) = f.activation {
        cfg.model.combine_activation = v;
    }
    if let Some(v) = f.lr {
        cfg.lr = v;
    }
    if let Some(v) = f.epochs {
        cfg.epochs = v as usize;
    }
    if let Some(v) = f.batch_size {
        cfg.batch_size = v as usize;
    }
    if let Some(v) = f.patience {
        cfg.patience = v as usize;
    }
    if let Some(v) = f.val_fraction {
        cfg.val_fraction = v;
    }
    if let Some(v) = f.normalization {
        cfg.normalization = match v {
            NormArg::Auto => NormalizationChoice::Auto,
            NormArg::Identity => NormalizationChoice::Identity,
            NormArg::LogSnr => NormalizationChoice::LogSnr,
            NormArg::Scaled => NormalizationChoice::Scaled,
        };
    }
    if let Some(v) = f.seed {
        cfg.seed = v;
    }
    if let Err(e) = cfg.validate() {
        return usage(e.to_string());
    }
    Ok(cfg)
}

fn with_suffix(path: &Path, suffix: &str) -> PathBuf {
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    path.with_file_name(format!("{stem}.{suffix}"))
}

fn train_cmd(a: TrainArgs) -> Result<()> {
    let cfg = train_config(&a.train)?;
    let f = &a.train;
    if a.init.is_some()
        && (f.layers.is_some() || f.hidden.is_some() || f.embed.is_some() || f.activation.is_some())
    {
        return usage("architecture flags cannot be combined with --init");
    }
    let init = a
        .init
        .as_ref()
        .map(|p| load_model(p).with_context(|| format!("loading model {}", p.display())))
        .transpose()?;
    let data = load(&a.data)?;
    let progress = |r: &EpochRecord| {
        eprintln!(
            "epoch {:>3}  train {:.6}  val {:.6}",
            r.epoch, r.train_loss, r.val_loss
        )
    };
    let out = match init {
        Some(model) => fine_tune(model, &cfg, &data, progress)?,
        None => train_with_progress(&cfg, &data, progress)?,
    };
    save_model(&out.model, &a.out).with_context(|| format!("writing {}", a.out.display()))?;
    let history = a
        .history
        .unwrap_or_else(|| with_suffix(&a.out, "history.csv"));
    write_history_csv(&out.history, create(&history)?)?;
    eprintln!(
        "saved {} (best epoch {}, {} parameters); history in {}",
        a.out.display(),
        out.best_epoch,
        out.model.num_parameters(),
        history.display()
    );
    Ok(())
}

fn greedy_fraction(g: &GreedyFlags, data: &Dataset) -> Result<f64> {
    if let Some(f) = g.greedy_fraction {
        if !(f > 0.0 && f <= 1.0) {
            return usage("--greedy-fraction must lie in (0, 1]");
        }
        return Ok(f);
    }
    let val = match &g.calibration {
        Some(p) => load(p)?,
        None => calibration_set(data, 200)?,
    };
    if val.k() != data.k() {
        bail!("calibration set has K={}, data has K={}", val.k(), data.k());
    }
    let (f, _) = calibrate_greedy(&val)?;
    eprintln!(
        "greedy keep fraction {f} (calibrated on {} instances)",
        val.len()
    );
    Ok(f)
}

fn eval_cmd(a: EvalArgs) -> Result<()> {
    let methods = match Method::parse_list(&a.methods) {
        Ok(m) => m,
        Err(e) => return usage(e.to_string()),
    };
    if methods.contains(&Method::Igcnet) && a.model.is_none() {
        return usage("--model is required when igcnet is evaluated");
    }
    let model = a
        .model
        .as_ref()
        .map(|p| load_model(p).with_context(|| format!("loading model {}", p.display())))
        .transpose()?;
    let data = load(&a.data)?;
    let mut opts = EvalOptions::default();
    if methods.contains(&Method::Greedy) {
        opts.greedy_fraction = greedy_fraction(&a.greedy, &data)?;
    }
    let report = evaluate(model.as_ref(), &data, &methods, &opts)?;
    write_instances_csv(&report, create(&a.report)?)?;
    let summary = with_suffix(&a.report, "summary.csv");
    write_summary_csv(&report, create(&summary)?)?;
    for m in &report.methods {
        eprintln!(
            "{:<7} mean {:.4}  ratio {:.4}",
            m.method, m.mean_rate, m.ratio
        );
    }
    Ok(())
}

fn robust_cmd(a: RobustArgs) -> Result<()> {
    let mode = match a.mode {
        ModeArg::Partial => CsiMode::Partial,
        ModeArg::Noisy => CsiMode::Noisy,
    };
    let sweep = a.sweep.unwrap_or_else(|| match mode {
        CsiMode::Partial => (0..8).map(|i| i as f64 / 10.0).collect(),
        CsiMode::Noisy => (0..6).map(|i| i as f64 / 50.0).collect(),
    });
    if sweep.is_empty() {
        return usage("--sweep must not be empty");
    }
    let bad = sweep.iter().any(|&x| match mode {
        CsiMode::Partial => !(0.0..1.0).contains(&x),
        CsiMode::Noisy => !(x >= 0.0 && x.is_finite()),
    });
    if bad {
        return usage("--sweep levels out of range ([0,1) for partial, >= 0 for noisy)");
    }
    let model =
        load_model(&a.model).with_context(|| format!("loading model {}", a.model.display()))?;
    let data = load(&a.data)?;
    if mode == CsiMode::Partial && !data.has_geometry() {
        bail!(
            "partial CSI needs a geometric dataset; {} has no geometry",
            a.data.display()
        );
    }
    let rows = robustness_curve(&model, &data, mode, &sweep, a.seed)?;
    write_robust_csv(mode, &rows, create(&a.report)?)?;
    for r in &rows {
        eprintln!("{mode} {:<5} relative {:.4}", r.level, r.relative);
    }
    Ok(())
}

fn ablate_cmd(a: AblateArgs) -> Result<()> {
    let axis = match a.axis {
        AxisArg::Samples => AblationAxis::Samples,
        AxisArg::Layers => AblationAxis::Layers,
    };
    if a.values.contains(&0) {
        return usage("--values must be positive");
    }
    let cfg = train_config(&a.train)?;
    let train = load(&a.data)?;
    let test = load(&a.test)?;
    if axis == AblationAxis::Samples {
        if let Some(v) = a.values.iter().find(|&&v| v as usize > train.len()) {
            return usage(format!(
                "{v} samples requested, training set has {}",
                train.len()
            ));
        }
    }
    let opts = EvalOptions {
        greedy_fraction: greedy_fraction(&a.greedy, &train)?,
        ..Default::default()
    };
    let values: Vec<usize> = a.values.iter().map(|&v| v as usize).collect();
    let rows = ablate(axis, &values, &cfg, &train, &test, &opts)?;
    write_ablation_csv(&rows, create(&a.report)?)?;
    for r in &rows {
        eprintln!(
            "{axis} {:<5} ratio {:.4}  greedy {:.4}",
            r.value, r.ratio, r.greedy_ratio
        );
    }
    Ok(())
}

fn bench_cmd(a: BenchArgs) -> Result<()> {
    if a.k.is_empty() || a.k.iter().any(|&k| k < 2) {
        return usage("--k values must be at least 2");
    }
    let model = match &a.model {
        Some(p) => load_model(p).with_context(|| format!("loading model {}", p.display()))?,
        None => {
            let cfg = train_config(&a.train)?;
            IgcNetModel::new(cfg.model, NormalizationScheme::Identity, cfg.seed)?
        }
    };
    let mut rows = Vec::new();
    for &k in &a.k {
        let data = gen_gaussian(&GaussianConfig::new(
            k as usize,
            a.n as usize,
            a.data_seed,
            false,
        ))?;
        let row = benchmark_time(&model, &data, &WmmseConfig::default(), a.warmup)?;
        eprintln!(
            "K={:<3} igcnet {:.4} ms  wmmse {:.4} ms  speedup {:.2}",
            row.k, row.igcnet_ms, row.wmmse_ms, row.speedup
        );
        rows.push(row);
    }
    write_timing_csv(&rows, 1, create(&a.report)?)?;
    Ok(())
}
