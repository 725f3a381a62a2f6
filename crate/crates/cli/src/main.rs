use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use idrank_core::estimator::{estimate_from_neighbors, regression_curve, DEFAULT_DISCARD_FRACTION};
use idrank_core::planner::{DEFAULT_ALPHA_RATIO, DEFAULT_OFFSET};
use idrank_core::profile::DEFAULT_SAMPLE_CAP;
use idrank_core::{
    compute_profile, decimation_stability, generate, plan_from_profile, profile_diff, read_ghs,
    two_nearest, write_ghs, Error, EstimatorOptions, HiddenStateSet, LayerProfile, ManifoldKind,
    ManifoldSpec, Metadata, Method, ModelShape, PointCloud, Pooling, ProfileOptions, RankRule,
    Rounding, StabilityOptions,
};
use serde::Serialize;

#[derive(Parser, Debug)]
#[command(name = "idrank", version, about = "Intrinsic-dimension profiles and LoRA rank plans")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Append a JSON diagnostic with a stable error code to stderr on failure
    #[arg(long, global = true)]
    json_errors: bool,

    /// Print progress to stderr (repeat for more detail)
    #[arg(short, long, global = true, action = clap::ArgAction::Count)]
    verbose: u8,

    /// Suppress everything on stderr except errors
    #[arg(short, long, global = true, conflicts_with = "verbose")]
    quiet: bool,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Estimate the intrinsic dimension of one point cloud
    Estimate(EstimateArgs),
    /// Generate a synthetic cloud of known intrinsic dimension
    Synth(SynthArgs),
    /// Estimate the intrinsic dimension of every layer in a GHS1 file
    Profile(ProfileArgs),
    /// Estimate at decimated subset sizes and report the plateau
    Stability(StabilityArgs),
    /// Turn a layer profile into per-block ranks, alphas and a parameter budget
    Plan(PlanArgs),
    /// Per-layer differences between two profiles
    Diff(DiffArgs),
}

#[derive(Args, Debug)]
struct EstimatorArgs {
    /// Fitting method
    #[arg(long, value_enum, default_value_t = MethodArg::Regression)]
    method: MethodArg,

    /// Fraction of the largest ratios dropped before the regression fit
    #[arg(long, default_value_t = DEFAULT_DISCARD_FRACTION, value_parser = parse_fraction)]
    discard_fraction: f64,
}

impl EstimatorArgs {
    fn options(&self) -> EstimatorOptions {
        EstimatorOptions {
            method: self.method.into(),
            discard_fraction: self.discard_fraction,
        }
    }
}

#[derive(Args, Debug)]
struct InputArgs {
    /// Point cloud as CSV (one point per row) or a .ghs hidden-state file
    #[arg(long)]
    input: PathBuf,

    /// Layer to read when the input is a GHS1 file
    #[arg(long, default_value_t = 0)]
    layer: usize,
}

#[derive(Args, Debug)]
struct EstimateArgs {
    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    estimator: EstimatorArgs,

    /// Write the (ln mu, -ln(1 - F)) pairs used by the regression fit as CSV
    #[arg(long)]
    emit_curve: Option<PathBuf>,

    /// Output path (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct SynthArgs {
    #[arg(long, value_enum)]
    kind: KindArg,

    /// Number of points
    #[arg(long, default_value_t = 2000, value_parser = clap::value_parser!(u64).range(1..))]
    n: u64,

    /// Intrinsic dimension (hyperplane and hypercube)
    #[arg(long, default_value_t = 2, value_parser = clap::value_parser!(u64).range(1..))]
    dim: u64,

    /// Ambient dimension (hyperplane and hypercube)
    #[arg(long, default_value_t = 10, value_parser = clap::value_parser!(u64).range(1..))]
    ambient: u64,

    /// Standard deviation of isotropic Gaussian noise
    #[arg(long, default_value_t = 0.0)]
    noise: f64,

    #[arg(long, env = "IDRANK_SEED", default_value_t = 0)]
    seed: u64,

    /// Output format
    #[arg(long, value_enum, default_value_t = FormatArg::Csv)]
    format: FormatArg,

    /// Output path (stdout when absent; required for ghs)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct ProfileArgs {
    /// GHS1 file with one layer per hidden state
    #[arg(long)]
    input: PathBuf,

    #[command(flatten)]
    estimator: EstimatorArgs,

    /// Pooling the file must have been written with: mean, first-token, last-token or token-sample-<k>
    #[arg(long, default_value = "mean", value_parser = parse_pooling)]
    pooling: Pooling,

    /// Subsample layers with more points to this many (0 disables)
    #[arg(long, default_value_t = DEFAULT_SAMPLE_CAP)]
    sample_cap: usize,

    /// Use the decimation plateau as each layer's dimension
    #[arg(long)]
    stability: bool,

    #[command(flatten)]
    decimation: DecimationArgs,

    /// Output path (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DecimationArgs {
    /// Number of subset sizes N, N/2, N/4, ...
    #[arg(long, default_value_t = 4, value_parser = clap::value_parser!(u64).range(1..=32))]
    scales: u64,

    /// Random subsets drawn at each size
    #[arg(long, default_value_t = 5, value_parser = clap::value_parser!(u64).range(1..))]
    repeats: u64,

    #[arg(long, env = "IDRANK_SEED", default_value_t = 0)]
    seed: u64,
}

impl DecimationArgs {
    fn options(&self, estimator: EstimatorOptions) -> StabilityOptions {
        StabilityOptions {
            n_scales: self.scales as usize,
            repeats_per_scale: self.repeats as usize,
            seed: self.seed,
            estimator,
        }
    }
}

#[derive(Args, Debug)]
struct StabilityArgs {
    #[command(flatten)]
    input: InputArgs,

    #[command(flatten)]
    estimator: EstimatorArgs,

    #[command(flatten)]
    decimation: DecimationArgs,

    /// Output path (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct PlanArgs {
    /// Layer profile JSON as written by `profile`
    #[arg(long)]
    profile: PathBuf,

    /// Added to every rounded dimension increase
    #[arg(long, default_value_t = DEFAULT_OFFSET)]
    offset: u32,

    /// Constant alpha / rank ratio
    #[arg(long, default_value_t = DEFAULT_ALPHA_RATIO, value_parser = parse_positive)]
    alpha_ratio: f64,

    /// Rounding of dimension increases
    #[arg(long, value_enum, default_value_t = RoundingArg::Ceil)]
    rounding: RoundingArg,

    /// Transformer blocks (defaults to one fewer than the profile's states)
    #[arg(long, value_parser = clap::value_parser!(u64).range(1..))]
    blocks: Option<u64>,

    /// Hidden width of the square K, Q, V and O projections
    #[arg(long, default_value_t = 768, value_parser = clap::value_parser!(u64).range(1..))]
    d_model: u64,

    /// Output path (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args, Debug)]
struct DiffArgs {
    /// Profile before fine-tuning
    #[arg(long)]
    before: PathBuf,

    /// Profile after fine-tuning
    #[arg(long)]
    after: PathBuf,

    /// Output path (stdout when absent)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum MethodArg {
    Mle,
    Regression,
}

impl From<MethodArg> for Method {
    fn from(m: MethodArg) -> Self {
        match m {
            MethodArg::Mle => Method::Mle,
            MethodArg::Regression => Method::Regression,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum RoundingArg {
    Ceil,
    Nearest,
}

impl From<RoundingArg> for Rounding {
    fn from(r: RoundingArg) -> Self {
        match r {
            RoundingArg::Ceil => Rounding::Ceil,
            RoundingArg::Nearest => Rounding::Nearest,
        }
    }
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum KindArg {
    Helix,
    Hyperplane,
    Hypercube,
    Toy5,
}

impl From<KindArg> for ManifoldKind {
    fn from(k: KindArg) -> Self {
        match k {
            KindArg::Helix => ManifoldKind::Helix,
            KindArg::Hyperplane => ManifoldKind::Hyperplane,
            KindArg::Hypercube => ManifoldKind::Hypercube,
            KindArg::Toy5 => ManifoldKind::Toy5,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, ValueEnum)]
enum FormatArg {
    Csv,
    Ghs,
}

fn parse_fraction(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if (0.0..1.0).contains(&v) {
        Ok(v)
    } else {
        Err(format!("{v} is outside [0, 1)"))
    }
}

fn parse_positive(s: &str) -> Result<f64, String> {
    let v: f64 = s.parse().map_err(|e| format!("{e}"))?;
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(format!("{v} must be finite and > 0"))
    }
}

fn parse_pooling(s: &str) -> Result<Pooling, String> {
    s.parse().map_err(|e: Error| e.to_string())
}

struct Log {
    level: i8,
}

impl Log {
    fn info(&self, msg: impl FnOnce() -> String) {
        if self.level >= 1 {
            eprintln!("{}", msg());
        }
    }
}

fn open_out(out: Option<&Path>) -> Result<Box<dyn Write>, Error> {
    match out {
        Some(path) => {
            let file = File::create(path).map_err(|e| io_error(path, e))?;
            Ok(Box::new(BufWriter::new(file)))
        }
        None => Ok(Box::new(BufWriter::new(io::stdout().lock()))),
    }
}

fn io_error(path: &Path, source: io::Error) -> Error {
    Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

fn write_json<T: Serialize>(value: &T, out: Option<&Path>) -> Result<(), Error> {
    let mut w = open_out(out)?;
    let name = out.unwrap_or(Path::new("<stdout>"));
    serde_json::to_writer_pretty(&mut w, value)?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| io_error(name, e))
}

fn is_ghs(path: &Path) -> bool {
    path.extension().is_some_and(|e| e.eq_ignore_ascii_case("ghs"))
}

fn load_cloud(input: &InputArgs) -> Result<PointCloud, Error> {
    if is_ghs(&input.input) {
        let set = read_ghs(&input.input)?;
        if input.layer >= set.num_layers() {
            return Err(Error::InvalidArgument(format!(
                "--layer {} but the file has {} layers",
                input.layer,
                set.num_layers()
            )));
        }
        Ok(set.layer_cloud(input.layer))
    } else {
        PointCloud::read_csv_path(&input.input)
    }
}

fn estimate(args: &EstimateArgs, log: &Log) -> Result<(), Error> {
    let cloud = load_cloud(&args.input)?;
    log.info(|| format!("{} points in R^{}", cloud.n_points(), cloud.ambient_dim()));
    let start = Instant::now();
    let stats = two_nearest(&cloud)?;
    let options = args.estimator.options();
    let est = estimate_from_neighbors(&stats, &options)?;
    log.info(|| format!("estimated in {:.2?}", start.elapsed()));

    if let Some(path) = &args.emit_curve {
        let curve = regression_curve(&stats.mu, options.discard_fraction)?;
        let file = File::create(path).map_err(|e| io_error(path, e))?;
        let mut w = csv::Writer::from_writer(BufWriter::new(file));
        for p in &curve {
            w.serialize(p)?;
        }
        w.flush().map_err(|e| io_error(path, e))?;
    }
    write_json(&est, args.out.as_deref())
}

fn synth(args: &SynthArgs, log: &Log) -> Result<(), Error> {
    let (d, ambient, n) = (args.dim as usize, args.ambient as usize, args.n as usize);
    let spec = match args.kind {
        KindArg::Toy5 => ManifoldSpec::toy5(),
        KindArg::Helix => ManifoldSpec::helix(n, args.seed),
        KindArg::Hyperplane => ManifoldSpec::hyperplane(d, ambient, n, args.seed),
        KindArg::Hypercube => ManifoldSpec::hypercube(d, ambient, n, args.seed),
    }
    .with_noise(args.noise);
    let cloud = generate(&spec)?;
    log.info(|| {
        format!(
            "{} {} points in R^{}",
            ManifoldKind::from(args.kind),
            cloud.n_points(),
            cloud.ambient_dim()
        )
    });
    match args.format {
        FormatArg::Csv => {
            let mut w = open_out(args.out.as_deref())?;
            cloud.write_csv(&mut w)?;
            w.flush().map_err(|e| io_error(args.out.as_deref().unwrap_or(Path::new("<stdout>")), e))
        }
        FormatArg::Ghs => {
            let Some(out) = &args.out else {
                return Err(Error::InvalidArgument("--format ghs needs --out".into()));
            };
            let metadata = Metadata {
                dataset: format!("synth:{}", ManifoldKind::from(args.kind)),
                ..Metadata::default()
            };
            write_ghs(&HiddenStateSet::from_clouds(&[cloud], metadata)?, out)
        }
    }
}

fn profile(args: &ProfileArgs, log: &Log) -> Result<(), Error> {
    let states = read_ghs(&args.input)?;
    if let Some(found) = states.pooling()? {
        if found != args.pooling {
            return Err(Error::InvalidArgument(format!(
                "file was pooled with {found} but --pooling is {}",
                args.pooling
            )));
        }
    }
    log.info(|| format!("{} layers, {} points each", states.num_layers(), states.n_points()));
    let estimator = args.estimator.options();
    let options = ProfileOptions {
        estimator,
        sample_cap: (args.sample_cap > 0).then_some(args.sample_cap),
        seed: args.decimation.seed,
        stability: args.stability.then(|| args.decimation.options(estimator)),
    };
    let start = Instant::now();
    let profile = compute_profile(&states, &options)?;
    log.info(|| format!("profiled in {:.2?}", start.elapsed()));
    write_json(&profile, args.out.as_deref())
}

fn stability(args: &StabilityArgs, log: &Log) -> Result<(), Error> {
    let cloud = load_cloud(&args.input)?;
    let report = decimation_stability(&cloud, &args.decimation.options(args.estimator.options()))?;
    log.info(|| {
        format!(
            "selected d = {:.4} (plateau {})",
            report.selected_d,
            if report.plateau_found { "found" } else { "not found" }
        )
    });
    write_json(&report, args.out.as_deref())
}

fn plan(args: &PlanArgs, log: &Log) -> Result<(), Error> {
    let profile = LayerProfile::load(&args.profile)?;
    let blocks = match args.blocks {
        Some(b) => b as usize,
        None if profile.num_layers() >= 2 => profile.num_layers() - 1,
        None => {
            return Err(Error::InvalidArgument(
                "the profile needs at least two hidden states".into(),
            ))
        }
    };
    let rule = RankRule {
        offset: args.offset,
        rounding: args.rounding.into(),
    };
    let shape = ModelShape::square(blocks, args.d_model as usize);
    let plan = plan_from_profile(&profile, &shape, &rule, args.alpha_ratio)?;
    log.info(|| format!("{} trainable parameters", plan.total_trainable_params));
    write_json(&plan, args.out.as_deref())
}

fn diff(args: &DiffArgs) -> Result<(), Error> {
    let before = LayerProfile::load(&args.before)?;
    let after = LayerProfile::load(&args.after)?;
    write_json(&profile_diff(&before, &after)?, args.out.as_deref())
}

fn run(cli: &Cli) -> Result<(), Error> {
    let log = Log {
        level: if cli.quiet { -1 } else { cli.verbose as i8 },
    };
    match &cli.command {
        Command::Estimate(a) => estimate(a, &log),
        Command::Synth(a) => synth(a, &log),
        Command::Profile(a) => profile(a, &log),
        Command::Stability(a) => stability(a, &log),
        Command::Plan(a) => plan(a, &log),
        Command::Diff(a) => diff(a),
    }
}

fn diagnostic(code: &str, message: &str, exit_code: u8) -> String {
    serde_json::json!({
        "error": { "code": code, "message": message, "exit_code": exit_code }
    })
    .to_string()
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let usage = e.use_stderr();
            let _ = e.print();
            if usage && std::env::args().any(|a| a == "--json-errors") {
                let message = e.kind().to_string();
                eprintln!("{}", diagnostic("UsageError", &message, 2));
            }
            return ExitCode::from(if usage { 2 } else { 0 });
        }
    };
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            if cli.json_errors {
                eprintln!("{}", diagnostic(e.code(), &e.to_string(), 1));
            }
            ExitCode::from(1)
        }
    }
}
