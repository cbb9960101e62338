use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use qccnn::data::{self, Dataset, NormStats, SplitSpec, SynthKind};
use qccnn::gradcheck::{self, GradcheckOptions};
use qccnn::io::write_atomic;
use qccnn::qfilter::ShiftRule;
use qccnn::train::checkpoint::{CHECKPOINT_MAGIC, CHECKPOINT_VERSION};
use qccnn::train::config::{format_list, parse_list};
use qccnn::train::{evaluate, run_experiment, Architecture, Checkpoint, KeyValues, Model, TrainConfig};
use qccnn::Error;

#[derive(Parser)]
#[command(
    name = "qccnn",
    version,
    about = "Hybrid quantum-classical CNNs on an exact statevector simulator"
)]
struct Cli {
    /// Log progress (per-epoch metrics) to stderr.
    #[arg(short, long, global = true)]
    verbose: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Write a synthetic QTN1 dataset.
    Synth(SynthArgs),
    /// Train one model per seed and write metrics, checkpoints and a manifest.
    Train(TrainArgs),
    /// Evaluate a checkpoint on a dataset split.
    Eval(EvalArgs),
    /// Per-layer parameter audit of an architecture.
    Params(ParamsArgs),
    /// Finite-difference checks of every analytic gradient.
    Gradcheck(GradcheckArgs),
    /// Describe a dataset or checkpoint file.
    Inspect(InspectArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// stripes (1×28×28) or blob (1×16×16×16).
    #[arg(long)]
    kind: String,
    #[arg(short, long)]
    n: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args, Default)]
struct ArchArgs {
    /// classical2d, qccnn2d, classical3d or qccnn3d.
    #[arg(long)]
    arch: Option<String>,
    /// threshold, angle or higher-order.
    #[arg(long)]
    encoding: Option<String>,
    /// basic or strong.
    #[arg(long)]
    ansatz: Option<String>,
    /// Ansatz layers.
    #[arg(long)]
    layers: Option<usize>,
    /// Threshold t of the threshold encoding.
    #[arg(long, allow_negative_numbers = true)]
    threshold_t: Option<f64>,
    /// 3D pool placement: all, last or auto.
    #[arg(long)]
    pool3d: Option<String>,
    /// Stride of the fourth 3D convolution.
    #[arg(long)]
    fourth_stride: Option<usize>,
}

impl ArchArgs {
    fn overlay(&self, kv: &mut KeyValues) {
        let pairs: [(&str, Option<String>); 7] = [
            ("arch", self.arch.clone()),
            ("encoding", self.encoding.clone()),
            ("ansatz", self.ansatz.clone()),
            ("layers", self.layers.map(|v| v.to_string())),
            ("threshold_t", self.threshold_t.map(|v| v.to_string())),
            ("pool3d", self.pool3d.clone()),
            ("fourth_stride", self.fourth_stride.map(|v| v.to_string())),
        ];
        for (k, v) in pairs {
            if let Some(v) = v {
                kv.set(k, v);
            }
        }
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    arch: ArchArgs,
    /// Flat `key = value` file; flags take precedence.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    lr: Option<f64>,
    #[arg(long)]
    batch: Option<usize>,
    /// Comma-separated seeds.
    #[arg(long)]
    seeds: Option<String>,
    #[arg(long)]
    workers: Option<usize>,
    /// Training items (taken first); default all but the validation items.
    #[arg(long)]
    train: Option<usize>,
    /// Validation items (following the training items); default one fifth.
    #[arg(long)]
    val: Option<usize>,
    /// Check every quantum activation lies in [−1, 1]; exit 4 otherwise.
    #[arg(long)]
    range_check: bool,
}

const TRAIN_KEYS: &[&str] = &[
    "arch",
    "encoding",
    "threshold_t",
    "ansatz",
    "layers",
    "pool3d",
    "fourth_stride",
    "data",
    "out",
    "epochs",
    "lr",
    "batch",
    "seeds",
    "workers",
    "train",
    "val",
    "range_check",
];

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// train, val or all. Train/val use the split recorded in the checkpoint.
    #[arg(long, default_value = "val")]
    split: String,
    #[arg(long, default_value_t = 64)]
    batch: usize,
}

#[derive(Args)]
struct ParamsArgs {
    #[command(flatten)]
    arch: ArchArgs,
    /// Item shape, channels first, e.g. 1x28x28 or 1x16x32x32.
    #[arg(long)]
    input: Option<String>,
    #[arg(long)]
    classes: Option<usize>,
    #[arg(long)]
    csv: bool,
}

#[derive(Args)]
struct GradcheckArgs {
    #[command(flatten)]
    arch: ArchArgs,
    /// Item shape for the end-to-end model check (with --arch).
    #[arg(long)]
    input: Option<String>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Random configurations per encoding/ansatz pair.
    #[arg(long, default_value_t = 100)]
    cases: usize,
    /// Add this to the parameter-shift constant (negative control).
    #[arg(long, hide = true, allow_negative_numbers = true)]
    perturb_shift: Option<f64>,
}

#[derive(Args)]
struct InspectArgs {
    path: PathBuf,
}

/// Failure with its exit status.
struct Failure {
    code: u8,
    message: String,
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Usage(_) | Error::Config(_) => 2,
            Error::Format { .. } | Error::UnsupportedVersion { .. } | Error::Io(_) => 3,
            Error::Divergence { .. } => 4,
        };
        Failure {
            code,
            message: e.to_string(),
        }
    }
}

fn usage(msg: impl Into<String>) -> Failure {
    Failure {
        code: 2,
        message: msg.into(),
    }
}

fn check_failure(msg: impl Into<String>) -> Failure {
    Failure {
        code: 4,
        message: msg.into(),
    }
}

type CmdResult = Result<(), Failure>;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let level = if cli.verbose { "info" } else { "warn" };
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or(level))
        .format_timestamp(None)
        .init();
    let result = match cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Params(a) => cmd_params(a),
        Command::Gradcheck(a) => cmd_gradcheck(a),
        Command::Inspect(a) => cmd_inspect(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message);
            ExitCode::from(f.code)
        }
    }
}

fn shape_string(shape: &[usize]) -> String {
    shape.iter().map(ToString::to_string).collect::<Vec<_>>().join("x")
}

fn parse_shape(raw: &str) -> Result<Vec<usize>, Failure> {
    let shape: Vec<usize> = raw
        .split(['x', '×', ','])
        .map(|s| s.trim().parse::<usize>())
        .collect::<Result<_, _>>()
        .map_err(|_| usage(format!("invalid shape {raw:?} (expected e.g. 1x28x28)")))?;
    if shape.len() < 3 || shape.contains(&0) {
        return Err(usage(format!("invalid shape {raw:?}")));
    }
    Ok(shape)
}

fn load_dataset(path: &Path) -> Result<Dataset, Failure> {
    if !path.exists() {
        return Err(usage(format!("dataset {} does not exist", path.display())));
    }
    Ok(Dataset::load(path)?)
}

fn cmd_synth(a: SynthArgs) -> CmdResult {
    let kind: SynthKind = a.kind.parse()?;
    if a.n == 0 {
        return Err(usage("n must be at least 1"));
    }
    let ds = data::synthesize(kind, a.n, a.seed)?;
    ds.save(&a.out)?;
    println!(
        "wrote {} items of shape {} ({} classes) to {}",
        ds.len(),
        shape_string(ds.item_shape()),
        ds.n_classes(),
        a.out.display()
    );
    Ok(())
}

fn default_split(n: usize, train: Option<usize>, val: Option<usize>) -> Result<SplitSpec, Failure> {
    let spec = match (train, val) {
        (Some(t), Some(v)) => SplitSpec::new(t, v),
        (Some(t), None) => SplitSpec::new(t, n.saturating_sub(t)),
        (None, Some(v)) => SplitSpec::new(n.saturating_sub(v), v),
        (None, None) => SplitSpec::new(n - n / 5, n / 5),
    };
    if spec.train + spec.val > n {
        return Err(usage(format!(
            "split {}+{} exceeds the {n} items in the dataset",
            spec.train, spec.val
        )));
    }
    if spec.train == 0 {
        return Err(usage("training split is empty"));
    }
    Ok(spec)
}

fn cmd_train(a: TrainArgs) -> CmdResult {
    let mut kv = match &a.config {
        Some(p) => {
            let text =
                std::fs::read_to_string(p).map_err(|e| usage(format!("cannot read config {}: {e}", p.display())))?;
            KeyValues::parse(&text)?
        }
        None => KeyValues::new(),
    };
    kv.reject_unknown(TRAIN_KEYS)?;
    a.arch.overlay(&mut kv);
    let flags: [(&str, Option<String>); 9] = [
        ("data", a.data.as_ref().map(|p| p.display().to_string())),
        ("out", a.out.as_ref().map(|p| p.display().to_string())),
        ("epochs", a.epochs.map(|v| v.to_string())),
        ("lr", a.lr.map(|v| v.to_string())),
        ("batch", a.batch.map(|v| v.to_string())),
        ("seeds", a.seeds.clone()),
        ("workers", a.workers.map(|v| v.to_string())),
        ("train", a.train.map(|v| v.to_string())),
        ("val", a.val.map(|v| v.to_string())),
    ];
    for (k, v) in flags {
        if let Some(v) = v {
            kv.set(k, v);
        }
    }
    if a.range_check {
        kv.set("range_check", true);
    }

    let data_path = PathBuf::from(kv.get("data").ok_or_else(|| usage("missing dataset path (--data)"))?);
    if kv.get("arch").is_none() {
        kv.set("arch", "classical2d");
    }
    let arch = Architecture::from_config(&kv)?;
    let mut cfg = TrainConfig::new(arch, TrainConfig::default_batch(&arch));
    if let Some(v) = kv.parsed("epochs")? {
        cfg.epochs = v;
    }
    if let Some(v) = kv.parsed("lr")? {
        cfg.lr = v;
    }
    if let Some(v) = kv.parsed("batch")? {
        cfg.batch = v;
    }
    if let Some(v) = kv.get("seeds") {
        cfg.seeds = parse_list(v, "seed")?;
    }
    if let Some(v) = kv.parsed("workers")? {
        cfg.workers = v;
    }
    cfg.range_check = kv.parsed("range_check")?.unwrap_or(false);
    cfg.validate()?;
    let out = PathBuf::from(kv.get("out").unwrap_or("runs"));

    let all = load_dataset(&data_path)?;
    let split = default_split(all.len(), kv.parsed("train")?, kv.parsed("val")?)?;
    let (mut train, mut val) = split.apply(&all)?;
    let norm = data::normalize(&mut train, Some(&mut val))?;

    let start = Instant::now();
    let exp = run_experiment(&cfg, &train, &val)?;
    let wall = start.elapsed().as_secs_f64();
    exp.write_csvs(&out)?;

    let mut echo = arch.to_config();
    echo.set("data", data_path.display());
    echo.set("epochs", cfg.epochs);
    echo.set("lr", cfg.lr);
    echo.set("batch", cfg.batch);
    echo.set("seeds", format_list(&cfg.seeds));
    echo.set("workers", cfg.workers);
    echo.set("train", split.train);
    echo.set("val", split.val);
    echo.set("range_check", cfg.range_check);
    for run in &exp.runs {
        Checkpoint {
            model: run.model.clone(),
            optimizer: run.optimizer.clone(),
            norm: Some(norm),
            seed: run.seed,
            epochs_completed: run.epochs_completed,
            config: echo.clone(),
        }
        .save(out.join(format!("checkpoint_seed{}.qckp", run.seed)))?;
    }

    let mut manifest = echo.clone();
    manifest.set("norm_mean", norm.mean);
    manifest.set("norm_std", norm.std);
    manifest.set("n_classes", all.n_classes());
    manifest.set("item_shape", shape_string(all.item_shape()));
    manifest.set("qccnn_version", env!("CARGO_PKG_VERSION"));
    manifest.set("qtn_version", data::FORMAT_VERSION);
    manifest.set("checkpoint_version", CHECKPOINT_VERSION);
    manifest.set("wall_time_s", format!("{wall:.3}"));
    manifest.set("total_params", exp.runs[0].model.param_count());
    let diverged = exp.divergences();
    manifest.set(
        "diverged",
        if diverged.is_empty() {
            "none".to_string()
        } else {
            diverged
                .iter()
                .map(|d| format!("seed {} epoch {} batch {:?}", d.seed, d.epoch, d.batch))
                .collect::<Vec<_>>()
                .join("; ")
        },
    );
    if cfg.range_check {
        let checked: u64 = exp.runs.iter().map(|r| r.range.checked).sum();
        let bad: u64 = exp.runs.iter().map(|r| r.range.out_of_range).sum();
        manifest.set("range_checked", checked);
        manifest.set("range_violations", bad);
    }
    write_atomic(&out.join("manifest.txt"), manifest.to_text().as_bytes())?;

    for run in &exp.runs {
        if let Some(last) = run.rows.iter().rev().find(|r| r.split == qccnn::train::Split::Val) {
            println!(
                "seed {}: {} epochs, val loss {:.6}, val accuracy {:.4}",
                run.seed, run.epochs_completed, last.loss, last.accuracy
            );
        } else if let Some(last) = run.rows.last() {
            println!(
                "seed {}: {} epochs, train loss {:.6}, train accuracy {:.4}",
                run.seed, run.epochs_completed, last.loss, last.accuracy
            );
        }
    }
    println!("wrote results to {} ({wall:.1} s)", out.display());

    if !diverged.is_empty() {
        let d = diverged[0];
        return Err(check_failure(format!(
            "training diverged for {} seed(s); first: seed {}, epoch {}, batch {:?}",
            diverged.len(),
            d.seed,
            d.epoch,
            d.batch
        )));
    }
    if cfg.range_check {
        let bad: u64 = exp.runs.iter().map(|r| r.range.out_of_range).sum();
        if bad > 0 {
            return Err(check_failure(format!("{bad} quantum activations outside [-1, 1]")));
        }
    }
    Ok(())
}

fn cmd_eval(a: EvalArgs) -> CmdResult {
    if !a.checkpoint.exists() {
        return Err(usage(format!("checkpoint {} does not exist", a.checkpoint.display())));
    }
    let mut ckpt = Checkpoint::load(&a.checkpoint)?;
    let mut ds = load_dataset(&a.data)?;
    if ds.item_shape() != ckpt.model.input_shape.as_slice() {
        return Err(Error::Config(format!(
            "dataset items {} do not match the model input {}",
            shape_string(ds.item_shape()),
            shape_string(&ckpt.model.input_shape)
        ))
        .into());
    }
    if let Some(norm) = ckpt.norm {
        norm.apply(&mut ds);
    }
    let recorded = |key: &str| -> Result<Option<usize>, Failure> { Ok(ckpt.config.parsed(key)?) };
    let subset = match a.split.as_str() {
        "all" => ds,
        "train" | "val" => {
            let spec = default_split(ds.len(), recorded("train")?, recorded("val")?)?;
            let (train, val) = spec.apply(&ds)?;
            if a.split == "train" {
                train
            } else {
                val
            }
        }
        other => return Err(usage(format!("unknown split {other:?} (train, val, all)"))),
    };
    let e = evaluate(&mut ckpt.model, &subset, a.batch)?;
    println!("split = {}", a.split);
    println!("items = {}", subset.len());
    println!("loss = {}", e.loss);
    println!("accuracy = {}", e.accuracy);
    Ok(())
}

fn arch_from(args: &ArchArgs, default: &str) -> Result<Architecture, Failure> {
    let mut kv = KeyValues::new();
    kv.set("arch", default);
    args.overlay(&mut kv);
    Ok(Architecture::from_config(&kv)?)
}

fn default_input(arch: &Architecture) -> Vec<usize> {
    if arch.spatial_dims() == 2 {
        vec![1, 28, 28]
    } else {
        vec![1, 16, 32, 32]
    }
}

fn cmd_params(a: ParamsArgs) -> CmdResult {
    let arch = arch_from(&a.arch, "classical2d")?;
    let input = match &a.input {
        Some(s) => parse_shape(s)?,
        None => default_input(&arch),
    };
    let classes = a.classes.unwrap_or(if arch.spatial_dims() == 2 { 11 } else { 2 });
    let model = Model::build_uninit(arch, &input, classes)?;
    let audit = model.audit();
    if a.csv {
        println!("index,kind,layer,output_shape,params");
        for r in &audit {
            println!(
                "{},{},\"{}\",{},{}",
                r.index,
                r.kind,
                r.description,
                shape_string(&r.output_shape),
                r.params
            );
        }
        println!("total,,,,{}", model.param_count());
    } else {
        println!("{arch} on input {} with {classes} classes", shape_string(&input));
        let width = audit.iter().map(|r| r.description.chars().count()).max().unwrap_or(0);
        for r in &audit {
            println!(
                "{:>3}  {:<width$} {:>14} {:>8}",
                r.index,
                r.description,
                shape_string(&r.output_shape),
                r.params
            );
        }
        println!("total trainable parameters: {}", model.param_count());
    }
    Ok(())
}

fn cmd_gradcheck(a: GradcheckArgs) -> CmdResult {
    let mut opts = GradcheckOptions {
        seed: a.seed,
        filter_cases: a.cases,
        ..Default::default()
    };
    if a.cases == 0 {
        return Err(usage("cases must be at least 1"));
    }
    if let Some(delta) = a.perturb_shift {
        opts.shift = ShiftRule {
            shift: std::f64::consts::FRAC_PI_2 + delta,
        };
    }
    if a.arch.arch.is_some() {
        let arch = arch_from(&a.arch, "classical2d")?;
        let input = match &a.input {
            Some(s) => parse_shape(s)?,
            None => {
                if arch.spatial_dims() == 2 {
                    vec![1, 6, 6]
                } else {
                    vec![1, 16, 16, 16]
                }
            }
        };
        opts.model = Some((arch, input));
    }
    let report = gradcheck::run(&opts)?;
    for c in &report.components {
        println!(
            "{}  {:<36} checks {:>5}  worst relative error {:.3e}  (tolerance {:.0e})",
            if c.passed() { "PASS" } else { "FAIL" },
            c.component,
            c.checks,
            c.worst,
            c.tolerance
        );
    }
    println!(
        "{}  threshold-encoding input gradient {}",
        if report.threshold_inputs_zero { "PASS" } else { "FAIL" },
        if report.threshold_inputs_zero {
            "exactly 0"
        } else {
            "nonzero"
        }
    );
    if report.passed() {
        println!("all gradient checks passed");
        Ok(())
    } else {
        Err(check_failure("gradient check failed"))
    }
}

fn cmd_inspect(a: InspectArgs) -> CmdResult {
    if !a.path.exists() {
        return Err(usage(format!("{} does not exist", a.path.display())));
    }
    let bytes = std::fs::read(&a.path).map_err(Error::from)?;
    if bytes.starts_with(data::MAGIC) {
        let ds = Dataset::from_bytes(&bytes)?;
        println!("QTN1 dataset, version {}", data::FORMAT_VERSION);
        println!("items = {}", ds.len());
        println!("item_shape = {}", shape_string(ds.item_shape()));
        println!("classes = {}", ds.n_classes());
        let mut counts = vec![0usize; ds.n_classes()];
        for &l in ds.labels() {
            counts[l as usize] += 1;
        }
        println!("class_counts = {}", format_list(&counts));
        if let Ok(s) = NormStats::fit(&ds) {
            println!("mean = {}", s.mean);
            println!("std = {}", s.std);
        }
    } else if bytes.starts_with(CHECKPOINT_MAGIC) {
        let ckpt = Checkpoint::from_bytes(&bytes)?;
        println!("checkpoint, version {CHECKPOINT_VERSION}");
        println!("architecture = {}", ckpt.model.arch);
        println!("input_shape = {}", shape_string(&ckpt.model.input_shape));
        println!("classes = {}", ckpt.model.n_classes);
        println!("seed = {}", ckpt.seed);
        println!("epochs_completed = {}", ckpt.epochs_completed);
        if let Some(n) = ckpt.norm {
            println!("norm_mean = {}", n.mean);
            println!("norm_std = {}", n.std);
        }
        println!("params = {}", ckpt.model.param_count());
        print!("{}", ckpt.config.to_text());
    } else {
        return Err(Error::Format {
            offset: 0,
            message: "neither a QTN1 dataset nor a checkpoint".into(),
        }
        .into());
    }
    Ok(())
}
