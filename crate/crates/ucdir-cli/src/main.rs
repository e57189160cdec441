//! `ucdir` — generate benchmark data, train, evaluate, cluster, and verify,
//! all from one binary. Exit codes: 0 success, 1 usage or config error,
//! 2 runtime failure, 3 failed property checks.

mod config;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand};

use ucdir::checkpoint::Checkpoint;
use ucdir::clustering::{kmeans, ClusterModel};
use ucdir::data::{generate, load_dataset, save_dataset, Domain};
use ucdir::encoder::{encode, init_params, EncoderParams};
use ucdir::evaluation::{evaluate, EvalReport};
use ucdir::losses::Variant;
use ucdir::seeding::derive_seed;
use ucdir::training::{resume, train};
use ucdir::verify::{run_all, CheckOptions};

use config::{parse_direction, resolve, Resolved};

#[derive(Parser)]
#[command(
    name = "ucdir",
    about = "Unsupervised cross-domain retrieval laboratory",
    version
)]
struct Cli {
    /// Cap the worker thread pool (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a two-domain benchmark dataset.
    Generate(GenerateArgs),
    /// Train the encoder on a generated dataset.
    Train(TrainArgs),
    /// Evaluate a checkpoint: cross-domain precision at k.
    Eval(EvalArgs),
    /// Cluster one domain's features and dump the model.
    Cluster(ClusterArgs),
    /// Run the numerical property suite.
    Check(CheckArgs),
}

#[derive(Args)]
struct GenerateArgs {
    /// TOML config; the [generator] section shapes the dataset.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Output dataset file (one record per line).
    #[arg(long)]
    out: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    config: Option<PathBuf>,
    /// Dataset file produced by `generate`.
    #[arg(long)]
    dataset: PathBuf,
    /// Output directory for metrics, checkpoints, and the effective config.
    #[arg(long)]
    out: PathBuf,
    /// Master seed override.
    #[arg(long)]
    seed: Option<u64>,
    /// Epoch-count override.
    #[arg(long)]
    epochs: Option<usize>,
    /// Ablation preset: v1 (instance only), v2 (+cluster), v3 (+entropy),
    /// full (+distance alignment).
    #[arg(long)]
    variant: Option<String>,
    /// Continue from the checkpoint in the output directory.
    #[arg(long)]
    resume: bool,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    checkpoint: PathBuf,
    #[arg(long)]
    dataset: PathBuf,
    /// TOML config; its [eval] section supplies defaults for the flags below.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Comma-separated k values, e.g. 1,5,15.
    #[arg(long)]
    k: Option<String>,
    /// a2b, b2a, or both (default).
    #[arg(long)]
    direction: Option<String>,
    /// Include each query's per-k precision in the report.
    #[arg(long)]
    per_query: bool,
    /// Write the report here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct ClusterArgs {
    #[arg(long)]
    dataset: PathBuf,
    /// Checkpoint whose momentum encoder embeds the samples; omitted, a
    /// fresh seeded encoder is used.
    #[arg(long)]
    checkpoint: Option<PathBuf>,
    #[arg(long)]
    config: Option<PathBuf>,
    /// Which domain to cluster: a or b.
    #[arg(long, default_value = "a")]
    domain: String,
    /// Cluster count override.
    #[arg(long)]
    k: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Write the cluster model here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct CheckArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Trial count for the invariance sweeps.
    #[arg(long, default_value_t = 1000)]
    trials: usize,
    /// Run only the finite-difference gradient checks.
    #[arg(long)]
    grad_only: bool,
}

/// A failure paired with its exit code.
enum Failure {
    Usage(String),
    Runtime(String),
    ChecksFailed(usize),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Runtime(_) => 2,
            Failure::ChecksFailed(_) => 3,
        }
    }

    fn report(self) -> ExitCode {
        let code = self.code();
        match self {
            Failure::Usage(msg) | Failure::Runtime(msg) => eprintln!("error: {msg}"),
            Failure::ChecksFailed(n) => eprintln!("error: {n} property check(s) failed"),
        }
        ExitCode::from(code)
    }
}

fn usage<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Usage(e.to_string())
}

fn runtime<E: std::fmt::Display>(e: E) -> Failure {
    Failure::Runtime(e.to_string())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    ExitCode::SUCCESS
                }
                _ => {
                    eprint!("{e}");
                    ExitCode::from(1)
                }
            };
        }
    };
    if let Some(n) = cli.threads {
        if n == 0 {
            return Failure::Usage("--threads must be at least 1".into()).report();
        }
        // Ignore the error if a pool already exists (tests call main twice).
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    }
    let result = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Train(args) => cmd_train(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Cluster(args) => cmd_cluster(args),
        Command::Check(args) => cmd_check(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => f.report(),
    }
}

fn cmd_generate(args: GenerateArgs) -> Result<(), Failure> {
    let mut resolved = resolve(args.config.as_deref()).map_err(usage)?;
    if let Some(seed) = args.seed {
        resolved.override_seed(seed);
    }
    let dataset = generate(&resolved.generator).map_err(runtime)?;
    save_dataset(&dataset, &args.out).map_err(runtime)?;
    echo_config(
        &resolved,
        dataset.input_dim,
        dataset.num_classes,
        &args.out.with_extension("config.toml"),
    )?;
    println!(
        "wrote {}: N={} M={} C={} d_in={}",
        args.out.display(),
        dataset.samples_a.len(),
        dataset.samples_b.len(),
        dataset.num_classes,
        dataset.input_dim,
    );
    Ok(())
}

fn cmd_train(args: TrainArgs) -> Result<(), Failure> {
    let mut resolved = resolve(args.config.as_deref()).map_err(usage)?;
    if let Some(seed) = args.seed {
        resolved.override_seed(seed);
    }
    if let Some(epochs) = args.epochs {
        resolved.override_epochs(epochs);
    }
    if let Some(name) = &args.variant {
        let variant = Variant::parse(name).map_err(usage)?;
        variant.apply(resolved.loss_mut());
    }
    let dataset = dataset_at(&args.dataset)?;
    let cfg = resolved.train_for_dataset(&dataset);
    cfg.validate().map_err(usage)?;
    std::fs::create_dir_all(&args.out).map_err(runtime)?;
    echo_config(
        &resolved,
        dataset.input_dim,
        dataset.num_classes,
        &args.out.join("config.toml"),
    )?;
    let summary = if args.resume {
        let ckpt = checkpoint_at(&args.out.join("checkpoint.json"))?;
        resume(&ckpt, &dataset, &cfg, &resolved.eval, &args.out).map_err(runtime)?
    } else {
        train(&dataset, &cfg, &resolved.eval, &args.out).map_err(runtime)?
    };
    print!(
        "trained {} epochs; metrics in {}",
        summary.epochs_done,
        summary.metrics.display()
    );
    if let Some(p) = &summary.final_precision {
        let cells: Vec<String> = p.iter().map(|(k, v)| format!("P@{k}={v:.4}")).collect();
        print!("; final cross-domain {}", cells.join(" "));
    }
    println!();
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), Failure> {
    let resolved = resolve(args.config.as_deref()).map_err(usage)?;
    let ks = match &args.k {
        None => resolved.eval.ks.clone(),
        Some(list) => list
            .split(',')
            .map(|p| p.trim().parse::<usize>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| usage(format!("--k: {e}")))?,
    };
    let directions = match args.direction.as_deref() {
        None => resolved.directions.clone(),
        Some("both") => vec![
            ucdir::evaluation::Direction::AToB,
            ucdir::evaluation::Direction::BToA,
        ],
        Some(name) => vec![parse_direction(name).map_err(usage)?],
    };
    let dataset = dataset_at(&args.dataset)?;
    let params = load_params(&args.checkpoint)?;
    let mut reports: Vec<EvalReport> = Vec::new();
    for direction in directions {
        reports
            .push(evaluate(&params, &dataset, direction, &ks, args.per_query).map_err(runtime)?);
    }
    let text = serde_json::to_string_pretty(&reports).map_err(runtime)?;
    match &args.out {
        Some(path) => std::fs::write(path, text).map_err(runtime)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_cluster(args: ClusterArgs) -> Result<(), Failure> {
    let resolved = resolve(args.config.as_deref()).map_err(usage)?;
    let domain = match args.domain.to_ascii_lowercase().as_str() {
        "a" => Domain::A,
        "b" => Domain::B,
        other => return Err(Failure::Usage(format!("unknown domain '{other}'"))),
    };
    let dataset = dataset_at(&args.dataset)?;
    let cfg = resolved.train_for_dataset(&dataset);
    let k = args.k.unwrap_or(cfg.k);
    let seed = args.seed.unwrap_or_else(|| resolved.seed());
    let params = match &args.checkpoint {
        Some(path) => {
            // Cluster what training clusters: the momentum encoder's view.
            let ckpt = checkpoint_at(path)?;
            let (_, theta_m, _) = ckpt.restore().map_err(runtime)?;
            theta_m.params
        }
        None => init_params(&cfg.layer_dims, derive_seed(seed, "encoder-init", 0))
            .map_err(runtime)?,
    };
    let samples = match domain {
        Domain::A => &dataset.samples_a,
        Domain::B => &dataset.samples_b,
    };
    let raws: Vec<Vec<f64>> = samples.iter().map(|s| s.raw.clone()).collect();
    let feats = encode(&params, &raws).map_err(runtime)?;
    let model = kmeans(&feats, k, derive_seed(seed, "cluster-cmd", 0))
        .map_err(runtime)?
        .tagged(domain);
    let text = cluster_document(&model).map_err(runtime)?;
    match &args.out {
        Some(path) => std::fs::write(path, text).map_err(runtime)?,
        None => println!("{text}"),
    }
    Ok(())
}

fn cmd_check(args: CheckArgs) -> Result<(), Failure> {
    if args.trials == 0 {
        return Err(Failure::Usage("--trials must be at least 1".into()));
    }
    let opts = CheckOptions {
        seed: args.seed,
        trials: args.trials,
        grad_only: args.grad_only,
    };
    let reports = run_all(&opts);
    let mut failed = 0;
    for r in &reports {
        println!("{r}");
        if !r.passed {
            failed += 1;
        }
    }
    println!(
        "{} of {} properties passed",
        reports.len() - failed,
        reports.len()
    );
    if failed > 0 {
        return Err(Failure::ChecksFailed(failed));
    }
    Ok(())
}

fn dataset_at(path: &Path) -> Result<ucdir::data::Dataset, Failure> {
    load_dataset(path).map_err(|e| Failure::Runtime(format!("dataset {}: {e}", path.display())))
}

fn checkpoint_at(path: &Path) -> Result<Checkpoint, Failure> {
    Checkpoint::load(path)
        .map_err(|e| Failure::Runtime(format!("checkpoint {}: {e}", path.display())))
}

fn load_params(path: &Path) -> Result<EncoderParams, Failure> {
    let (theta, _, _) = checkpoint_at(path)?.restore().map_err(runtime)?;
    Ok(theta)
}

fn echo_config(
    resolved: &Resolved,
    input_dim: usize,
    num_classes: usize,
    path: &Path,
) -> Result<(), Failure> {
    std::fs::write(path, resolved.echo_toml(input_dim, num_classes)).map_err(runtime)
}

/// The dump format for cluster models: cluster count up front, then the
/// model fields.
fn cluster_document(model: &ClusterModel) -> ucdir::Result<String> {
    #[derive(serde::Serialize)]
    struct Doc<'a> {
        k: usize,
        domain: Option<&'static str>,
        inertia: f64,
        centroids: &'a [Vec<f64>],
        assignments: &'a [usize],
    }
    let doc = Doc {
        k: model.centroids.len(),
        domain: model.domain_tag.as_ref().map(Domain::tag),
        inertia: model.inertia,
        centroids: &model.centroids,
        assignments: &model.assignments,
    };
    Ok(serde_json::to_string_pretty(&doc)?)
}

#[cfg(test)]
mod tests {
    use super::Failure;

    #[test]
    fn failures_map_to_their_documented_exit_codes() {
        assert_eq!(Failure::Usage(String::new()).code(), 1);
        assert_eq!(Failure::Runtime(String::new()).code(), 2);
        assert_eq!(Failure::ChecksFailed(2).code(), 3);
    }
}
