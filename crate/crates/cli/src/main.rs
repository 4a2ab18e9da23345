use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use pixelveil::identity::approximate_identity;
use pixelveil::image::{load_image, save_image};
use pixelveil::metrics::{mse, ssim_full, SsimParams};
use pixelveil::pixel::{obfuscate, Mechanism, PixelMechanismConfig};
use pixelveil::sweep::{log_spaced, run_sweep, write_csv, SweepSpec};
use pixelveil::vector::{
    guarantee_table, intersection_attack, ksame_cluster, laplace_vector_obfuscate, VectorFile,
};
use pixelveil::Error;
use serde::Serialize;

const THREADS_ENV: &str = "PIXELVEIL_THREADS";

#[derive(Parser)]
#[command(
    name = "pixelveil",
    version,
    about = "Differentially private image and vector obfuscation"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Obfuscate an image and print the privacy accounting as JSON.
    Obfuscate(ObfuscateArgs),
    /// Compare two images.
    Metrics(MetricsArgs),
    /// Run a grid of obfuscations and write one CSV row per run.
    Sweep(SweepArgs),
    /// Feature-vector mechanisms.
    #[command(subcommand)]
    Vector(VectorCommand),
    /// Approximate a target vector as a weighted sum of gallery vectors.
    Approx(ApproxArgs),
}

#[derive(Args)]
struct MechanismArgs {
    /// Candidate level count k'.
    #[arg(long, default_value_t = 4, value_parser = at_least_two)]
    levels: usize,
    /// Exponential window side p, in blocks.
    #[arg(long, default_value_t = 3, value_parser = positive_usize)]
    window: usize,
    /// Pixels per channel an adjacent image may differ in (Laplace only);
    /// defaults to the whole image.
    #[arg(long, value_parser = positive_usize)]
    sensitive_pixels: Option<usize>,
}

#[derive(Args)]
struct ObfuscateArgs {
    #[arg(long)]
    mechanism: Mechanism,
    #[arg(long, value_parser = positive_f64)]
    epsilon: f64,
    /// Pixelization block side b.
    #[arg(long, value_parser = positive_usize)]
    pixelize: usize,
    /// Gaussian blur the release (post-processing).
    #[arg(long)]
    blur: bool,
    #[command(flatten)]
    mechanism_args: MechanismArgs,
    #[arg(long)]
    seed: u64,
    input: PathBuf,
    output: PathBuf,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("metric").required(true).multiple(true).args(["ssim", "mse"])))]
struct MetricsArgs {
    #[arg(long)]
    ssim: bool,
    #[arg(long)]
    mse: bool,
    a: PathBuf,
    b: PathBuf,
}

#[derive(Args)]
#[command(group(clap::ArgGroup::new("grid").required(true).args(["epsilons", "epsilon_range"])))]
struct SweepArgs {
    #[arg(long, value_delimiter = ',', default_value = "exp,laplace")]
    mechanisms: Vec<Mechanism>,
    /// Explicit privacy budgets.
    #[arg(long, value_delimiter = ',', value_parser = positive_f64)]
    epsilons: Vec<f64>,
    /// LO HI COUNT: COUNT log-spaced budgets from LO to HI.
    #[arg(long, num_args = 3, value_names = ["LO", "HI", "COUNT"])]
    epsilon_range: Option<Vec<String>>,
    /// Pixelization block sides.
    #[arg(long, value_delimiter = ',', default_value = "1", value_parser = positive_usize)]
    pixelize: Vec<usize>,
    /// Blur settings to run: off, on or both.
    #[arg(long, value_delimiter = ',', default_value = "off", value_parser = parse_switch)]
    blur: Vec<bool>,
    #[arg(long, default_value_t = 1, value_parser = positive_usize)]
    reps: usize,
    #[arg(long)]
    seed: u64,
    #[command(flatten)]
    mechanism_args: MechanismArgs,
    /// Leave the ms column empty so the CSV is byte-stable.
    #[arg(long)]
    no_timing: bool,
    /// CSV output path.
    #[arg(long)]
    out: PathBuf,
    #[arg(required = true)]
    images: Vec<PathBuf>,
}

#[derive(Subcommand)]
enum VectorCommand {
    /// Release every vector with range-normalized Laplace noise.
    Obfuscate {
        #[arg(long, value_parser = positive_f64)]
        epsilon: f64,
        #[arg(long)]
        seed: u64,
        input: PathBuf,
        output: PathBuf,
    },
    /// Replace every vector with its k-same cluster centroid.
    Ksame {
        #[arg(long, value_parser = positive_usize)]
        k: usize,
        input: PathBuf,
        output: PathBuf,
    },
    /// Intersect k-same clusters of two galleries over shared identities.
    Attack {
        #[arg(long, value_parser = positive_usize)]
        k: usize,
        a: PathBuf,
        b: PathBuf,
        /// JSON array of identity labels present in both galleries.
        ids: PathBuf,
    },
}

#[derive(Args)]
struct ApproxArgs {
    #[arg(long)]
    gallery: PathBuf,
    /// Vector file holding exactly one vector.
    #[arg(long)]
    target: PathBuf,
    output: PathBuf,
}

fn positive_f64(s: &str) -> Result<f64, String> {
    match s.parse::<f64>() {
        Ok(v) if v.is_finite() && v > 0.0 => Ok(v),
        Ok(_) => Err("must be positive and finite".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn positive_usize(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(0) => Err("must be at least 1".into()),
        Ok(v) => Ok(v),
        Err(e) => Err(e.to_string()),
    }
}

fn at_least_two(s: &str) -> Result<usize, String> {
    match s.parse::<usize>() {
        Ok(v) if v >= 2 => Ok(v),
        Ok(_) => Err("must be at least 2".into()),
        Err(e) => Err(e.to_string()),
    }
}

fn parse_switch(s: &str) -> Result<bool, String> {
    match s {
        "on" | "true" => Ok(true),
        "off" | "false" => Ok(false),
        _ => Err(format!("expected on or off, got `{s}`")),
    }
}

/// Exit status 2: bad flags, bad configuration or malformed input files.
/// Exit status 1: everything else.
enum Failure {
    Usage(String),
    Runtime(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 2,
            Failure::Runtime(_) => 1,
        }
    }
}

fn flag_name(param: &str) -> &str {
    match param {
        "epsilon" => "--epsilon",
        "b" => "--pixelize",
        "p" => "--window",
        "k_prime" => "--levels",
        "k_prime^(p^2)" => "--levels/--window",
        "sensitive_pixels" => "--sensitive-pixels",
        "k" => "--k",
        other => other,
    }
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::InvalidParameter { name, reason } => {
                Failure::Usage(format!("invalid {}: {reason}", flag_name(name)))
            }
            other => Failure::Runtime(other.to_string()),
        }
    }
}

type CliResult<T> = Result<T, Failure>;

fn read_vectors(path: &Path) -> CliResult<VectorFile> {
    let text = fs::read_to_string(path)
        .map_err(|e| Failure::Runtime(format!("reading {}: {e}", path.display())))?;
    let file: VectorFile = serde_json::from_str(&text)
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    file.validate()
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))?;
    Ok(file)
}

fn bounded(file: &VectorFile, path: &Path) -> CliResult<Vec<pixelveil::BoundedVector>> {
    file.bounded()
        .map_err(|e| Failure::Usage(format!("{}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CliResult<()> {
    let mut text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::Runtime(format!("encoding JSON: {e}")))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| Failure::Runtime(format!("writing {}: {e}", path.display())))
}

fn print_json<T: Serialize>(value: &T) -> CliResult<()> {
    let text = serde_json::to_string_pretty(value)
        .map_err(|e| Failure::Runtime(format!("encoding JSON: {e}")))?;
    println!("{text}");
    Ok(())
}

fn cmd_obfuscate(args: ObfuscateArgs) -> CliResult<()> {
    let config = PixelMechanismConfig {
        epsilon: args.epsilon,
        block: args.pixelize,
        window: args.mechanism_args.window,
        levels: args.mechanism_args.levels,
        sensitive_pixels: args.mechanism_args.sensitive_pixels,
        blur: args.blur,
        seed: args.seed,
    };
    config.validate()?;
    let img = load_image(&args.input)?;
    let result = obfuscate(&img, args.mechanism, &config)?;
    save_image(&result.image, &args.output)?;
    print_json(&result.accounting)
}

#[derive(Serialize)]
struct Scores {
    #[serde(skip_serializing_if = "Option::is_none")]
    ssim: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    mse: Option<f64>,
}

fn cmd_metrics(args: MetricsArgs) -> CliResult<()> {
    let a = load_image(&args.a)?;
    let b = load_image(&args.b)?;
    let scores = Scores {
        ssim: args
            .ssim
            .then(|| ssim_full(&a, &b, &SsimParams::default()))
            .transpose()?,
        mse: args.mse.then(|| mse(&a, &b)).transpose()?,
    };
    print_json(&scores)
}

fn cmd_sweep(args: SweepArgs) -> CliResult<()> {
    let epsilons = match &args.epsilon_range {
        Some(range) => {
            let lo = positive_f64(&range[0])
                .map_err(|e| Failure::Usage(format!("invalid --epsilon-range LO: {e}")))?;
            let hi = positive_f64(&range[1])
                .map_err(|e| Failure::Usage(format!("invalid --epsilon-range HI: {e}")))?;
            let count = positive_usize(&range[2])
                .map_err(|e| Failure::Usage(format!("invalid --epsilon-range COUNT: {e}")))?;
            log_spaced(lo, hi, count)
        }
        None => args.epsilons.clone(),
    };
    let spec = SweepSpec {
        images: args.images,
        mechanisms: args.mechanisms,
        epsilons,
        blocks: args.pixelize,
        blur: args.blur,
        repetitions: args.reps,
        seed: args.seed,
        window: args.mechanism_args.window,
        levels: args.mechanism_args.levels,
        sensitive_pixels: args.mechanism_args.sensitive_pixels,
        timing: !args.no_timing,
    };
    let outcome = run_sweep(&spec)?;
    let mut out = Vec::new();
    write_csv(&outcome.records, &mut out)?;
    fs::write(&args.out, out)
        .map_err(|e| Failure::Runtime(format!("writing {}: {e}", args.out.display())))?;
    if outcome.failures.is_empty() {
        return Ok(());
    }
    let mut stderr = std::io::stderr().lock();
    for (cell, message) in &outcome.failures {
        let _ = writeln!(stderr, "failed: {cell}: {message}");
    }
    Err(Failure::Runtime(format!(
        "{} of {} rows failed",
        outcome.records.iter().filter(|r| r.ssim.is_none()).count(),
        outcome.records.len()
    )))
}

#[derive(Serialize)]
struct Bound {
    d: f64,
    bound: f64,
}

#[derive(Serialize)]
struct VectorRelease {
    epsilon: f64,
    vectors: usize,
    /// `exp(epsilon * d)` for secrets at normalized distance `d`.
    guarantee: Vec<Bound>,
}

#[derive(Serialize)]
struct ClusterSummary {
    k: usize,
    clusters: Vec<Vec<u64>>,
}

#[derive(Serialize)]
struct AttackSummary {
    min: usize,
    mean: f64,
    violations: usize,
}

fn cmd_vector(command: VectorCommand) -> CliResult<()> {
    match command {
        VectorCommand::Obfuscate {
            epsilon,
            seed,
            input,
            output,
        } => {
            let file = read_vectors(&input)?;
            let vectors = bounded(&file, &input)?;
            let released = vectors
                .iter()
                .enumerate()
                .map(|(i, v)| laplace_vector_obfuscate(v, epsilon, seed ^ i as u64))
                .collect::<Result<Vec<_>, _>>()?;
            write_json(
                &output,
                &VectorFile::from_bounded(&released, file.ids.clone()),
            )?;
            print_json(&VectorRelease {
                epsilon,
                vectors: released.len(),
                guarantee: guarantee_table(epsilon, &[0.001, 0.01, 0.1, 1.0])
                    .into_iter()
                    .map(|(d, bound)| Bound { d, bound })
                    .collect(),
            })
        }
        VectorCommand::Ksame { k, input, output } => {
            let file = read_vectors(&input)?;
            let vectors = bounded(&file, &input)?;
            let assignment = ksame_cluster(&vectors, k)?;
            let released: Vec<_> = assignment
                .membership()
                .into_iter()
                .map(|c| assignment.centroids[c].clone())
                .collect();
            write_json(
                &output,
                &VectorFile::from_bounded(&released, file.ids.clone()),
            )?;
            let ids = file.identities();
            print_json(&ClusterSummary {
                k,
                clusters: assignment
                    .clusters
                    .iter()
                    .map(|c| c.iter().map(|&i| ids[i]).collect())
                    .collect(),
            })
        }
        VectorCommand::Attack { k, a, b, ids } => {
            let file_a = read_vectors(&a)?;
            let file_b = read_vectors(&b)?;
            let text = fs::read_to_string(&ids)
                .map_err(|e| Failure::Runtime(format!("reading {}: {e}", ids.display())))?;
            let shared: Vec<u64> = serde_json::from_str(&text).map_err(|e| {
                Failure::Usage(format!(
                    "{}: expected a JSON array of identity labels: {e}",
                    ids.display()
                ))
            })?;
            let clusters_a = ksame_cluster(&bounded(&file_a, &a)?, k)?;
            let clusters_b = ksame_cluster(&bounded(&file_b, &b)?, k)?;
            let report = intersection_attack(
                &clusters_a,
                &file_a.identities(),
                &clusters_b,
                &file_b.identities(),
                &shared,
            )?;
            print_json(&AttackSummary {
                min: report.min,
                mean: report.mean,
                violations: report.violations,
            })
        }
    }
}

fn cmd_approx(args: ApproxArgs) -> CliResult<()> {
    let gallery = read_vectors(&args.gallery)?;
    let target = read_vectors(&args.target)?;
    if target.vectors.len() != 1 {
        return Err(Failure::Usage(format!(
            "{}: `vectors` must hold exactly one target vector, found {}",
            args.target.display(),
            target.vectors.len()
        )));
    }
    if target.vectors[0].len() != gallery.vectors[0].len() {
        return Err(Failure::Usage(format!(
            "{}: `vectors[0]` has {} elements, gallery vectors have {}",
            args.target.display(),
            target.vectors[0].len(),
            gallery.vectors[0].len()
        )));
    }
    let approximation = approximate_identity(gallery.vectors, target.vectors[0].clone())?;
    write_json(&args.output, &approximation)?;
    print_json(&approximation)
}

fn configure_threads() -> CliResult<()> {
    let Ok(value) = std::env::var(THREADS_ENV) else {
        return Ok(());
    };
    let threads = positive_usize(value.trim())
        .map_err(|e| Failure::Usage(format!("invalid {THREADS_ENV}={value}: {e}")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(threads)
        .build_global()
        .map_err(|e| Failure::Runtime(format!("configuring thread pool: {e}")))
}

fn run(cli: Cli) -> CliResult<()> {
    configure_threads()?;
    match cli.command {
        Command::Obfuscate(args) => cmd_obfuscate(args),
        Command::Metrics(args) => cmd_metrics(args),
        Command::Sweep(args) => cmd_sweep(args),
        Command::Vector(command) => cmd_vector(command),
        Command::Approx(args) => cmd_approx(args),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(failure) => {
            let (Failure::Usage(message) | Failure::Runtime(message)) = &failure;
            eprintln!("error: {message}");
            ExitCode::from(failure.code())
        }
    }
}
