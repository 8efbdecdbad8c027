use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use pporpe::surrogate::Method;
use pporpe::trainer::{evaluate, TrainRecord, Trainer, TrainerConfig};
use pporpe_cli::config::{self, RunManifest};
use pporpe_cli::logs::{write_eval, write_file, write_timing, write_train_log};
use pporpe_cli::surface::{write_rows, SurfaceSpec};
use pporpe_cli::sweep::{aggregate, write_aggregate};
use pporpe_cli::weights::{self, SavedPolicy};
use pporpe_cli::CliError;

#[derive(Parser)]
#[command(name = "pporpe", version, about = "Train and inspect PPO-family policies regularized by relative Pearson divergence")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train one run and write log.csv, manifest.txt and weights.bin.
    Train(TrainArgs),
    /// Roll out a saved policy's mean action and report return quartiles.
    Eval(EvalArgs),
    /// Export the negative-loss curves of each surrogate over a ratio grid.
    Surface(SurfaceArgs),
    /// Train one run per seed and aggregate the logs.
    Sweep(SweepArgs),
}

#[derive(Clone, Copy, ValueEnum)]
#[value(rename_all = "snake_case")]
enum CliMethod {
    PpoClip,
    PpoRb,
    RpeFixed,
    RpeAdaptive,
}

impl From<CliMethod> for Method {
    fn from(m: CliMethod) -> Self {
        match m {
            CliMethod::PpoClip => Method::PpoClip,
            CliMethod::PpoRb => Method::PpoRb,
            CliMethod::RpeFixed => Method::RpeFixed,
            CliMethod::RpeAdaptive => Method::RpeAdaptive,
        }
    }
}

/// Training settings shared by `train` and `sweep`. Unset flags fall back to
/// the config file, then to the built-in defaults.
#[derive(Args)]
struct TrainingFlags {
    /// key = value file; flags override its entries
    #[arg(long)]
    config: Option<PathBuf>,
    /// cartpole, pendulum-swingup or double-integrator
    #[arg(long)]
    env: Option<String>,
    #[arg(long, value_enum)]
    method: Option<CliMethod>,
    #[arg(long)]
    epsilon: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    eta: Option<f64>,
    #[arg(long)]
    kappa: Option<f64>,
    #[arg(long)]
    lambda: Option<f64>,
    #[arg(long)]
    delta_lower: Option<f64>,
    #[arg(long)]
    episodes: Option<usize>,
    /// learning rate
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    gamma: Option<f64>,
    /// minibatch size
    #[arg(long)]
    batch: Option<usize>,
    /// replay buffer capacity
    #[arg(long)]
    capacity: Option<usize>,
    #[arg(long)]
    steps_per_update: Option<usize>,
    /// environment steps before the first update
    #[arg(long)]
    warmup: Option<usize>,
    /// hidden layer widths, comma separated
    #[arg(long)]
    hidden: Option<String>,
    /// tanh or swish
    #[arg(long)]
    activation: Option<String>,
    /// entropy bonus gain
    #[arg(long)]
    entropy: Option<f64>,
    #[arg(long)]
    actor_polyak: Option<f64>,
    #[arg(long)]
    critic_polyak: Option<f64>,
    /// update the adaptive threshold once per sample instead of per batch
    #[arg(long)]
    threshold_per_sample: bool,
}

impl TrainingFlags {
    fn pairs(&self) -> Vec<(String, String)> {
        let mut out = Vec::new();
        let mut put = |k: &str, v: Option<String>| {
            if let Some(v) = v {
                out.push((k.to_string(), v));
            }
        };
        let f = |v: Option<f64>| v.map(|x| format!("{x:?}"));
        let u = |v: Option<usize>| v.map(|x| x.to_string());
        put("env", self.env.clone());
        put("method", self.method.map(|m| Method::from(m).tag().to_string()));
        put("epsilon", f(self.epsilon));
        put("beta", f(self.beta));
        put("eta", f(self.eta));
        put("kappa", f(self.kappa));
        put("lambda", f(self.lambda));
        put("delta-lower", f(self.delta_lower));
        put("episodes", u(self.episodes));
        put("alpha", f(self.alpha));
        put("gamma", f(self.gamma));
        put("batch", u(self.batch));
        put("capacity", u(self.capacity));
        put("steps-per-update", u(self.steps_per_update));
        put("warmup", u(self.warmup));
        put("hidden", self.hidden.clone());
        put("activation", self.activation.clone());
        put("entropy", f(self.entropy));
        put("actor-polyak", f(self.actor_polyak));
        put("critic-polyak", f(self.critic_polyak));
        put("threshold-per-sample", self.threshold_per_sample.then(|| "true".into()));
        out
    }

    fn resolve(&self) -> Result<TrainerConfig, CliError> {
        let mut cfg = TrainerConfig::default();
        if let Some(path) = &self.config {
            cfg = config::apply_all(cfg, &config::read_pairs(path)?)?;
        }
        config::apply_all(cfg, &self.pairs())
    }
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    flags: TrainingFlags,
    #[arg(long)]
    seed: Option<u64>,
    /// output directory [default: $PPORPE_OUT or runs, then <env>/<method>/<seed>]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SweepArgs {
    #[command(flatten)]
    flags: TrainingFlags,
    /// comma-separated seed list
    #[arg(long, value_delimiter = ',', required = true)]
    seeds: Vec<u64>,
    /// output directory [default: $PPORPE_OUT or runs, then <env>/<method>/sweep]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    weights: PathBuf,
    /// defaults to the environment recorded in the weights file
    #[arg(long)]
    env: Option<String>,
    #[arg(long, default_value_t = 100)]
    episodes: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// directory for eval.csv [default: the weights file's directory]
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SurfaceArgs {
    #[arg(long, default_value_t = 0.05)]
    rho_min: f64,
    #[arg(long, default_value_t = 3.0)]
    rho_max: f64,
    #[arg(long, default_value_t = 1e-3)]
    step: f64,
    #[arg(long, default_value_t = 0.2)]
    epsilon: f64,
    #[arg(long, default_value_t = 0.5)]
    beta: f64,
    #[arg(long, default_value_t = 0.3)]
    eta: f64,
    #[arg(long, default_value_t = 1.0, allow_hyphen_values = true)]
    advantage: f64,
    /// CSV path [default: stdout]
    #[arg(long)]
    out: Option<PathBuf>,
}

fn output_root() -> PathBuf {
    std::env::var_os("PPORPE_OUT")
        .map(PathBuf::from)
        .unwrap_or_else(|| PathBuf::from("runs"))
}

fn create_dir(path: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(path).map_err(|e| CliError::io(path, e))
}

/// Trains one configuration into `dir`. The manifest is written first.
fn train_into(cfg: TrainerConfig, dir: &Path) -> Result<Vec<TrainRecord>, CliError> {
    let mut trainer = Trainer::new(cfg.clone())?;
    create_dir(dir)?;
    let manifest = RunManifest::new(cfg, dir.to_path_buf());
    let manifest_path = dir.join("manifest.txt");
    std::fs::write(&manifest_path, manifest.to_text()).map_err(|e| CliError::io(manifest_path, e))?;
    let records = trainer.run()?;
    write_file(&dir.join("log.csv"), |b| write_train_log(b, &records))?;
    write_file(&dir.join("timing.csv"), |b| write_timing(b, &records))?;
    let saved = SavedPolicy {
        env: trainer.config().env.clone(),
        actor: trainer.policy().actor.clone(),
    };
    weights::save(&dir.join("weights.bin"), &saved)?;
    Ok(records)
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    let mut cfg = args.flags.resolve()?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    let dir = args.out.unwrap_or_else(|| {
        output_root()
            .join(&cfg.env)
            .join(cfg.surrogate.method.tag())
            .join(cfg.seed.to_string())
    });
    let records = train_into(cfg, &dir)?;
    let tail = &records[records.len().saturating_sub(10)..];
    let mean = tail.iter().map(|r| r.episode_return).sum::<f64>() / tail.len().max(1) as f64;
    println!(
        "trained {} episodes into {} (mean return of last {}: {mean:.3})",
        records.len(),
        dir.display(),
        tail.len()
    );
    Ok(())
}

fn cmd_sweep(args: SweepArgs) -> Result<(), CliError> {
    let base = args.flags.resolve()?;
    let mut seeds = args.seeds;
    seeds.sort_unstable();
    seeds.dedup();
    let dir = args.out.unwrap_or_else(|| {
        output_root()
            .join(&base.env)
            .join(base.surrogate.method.tag())
            .join("sweep")
    });
    let configs: Vec<TrainerConfig> = seeds
        .iter()
        .map(|&seed| TrainerConfig { seed, ..base.clone() })
        .collect();
    // validate everything before spending time on any run
    for cfg in &configs {
        cfg.validate()?;
    }
    let workers = std::thread::available_parallelism().map_or(1, |n| n.get());
    let mut runs = Vec::with_capacity(configs.len());
    for chunk in configs.chunks(workers) {
        let results: Vec<Result<Vec<TrainRecord>, CliError>> = std::thread::scope(|s| {
            let handles: Vec<_> = chunk
                .iter()
                .map(|cfg| {
                    let seed_dir = dir.join(format!("seed-{}", cfg.seed));
                    s.spawn(move || train_into(cfg.clone(), &seed_dir))
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("training thread panicked"))
                .collect()
        });
        for r in results {
            runs.push(r?);
        }
    }
    let rows = aggregate(&runs)?;
    write_file(&dir.join("aggregate.csv"), |b| write_aggregate(b, &rows))?;
    println!("swept {} seeds into {}", seeds.len(), dir.display());
    Ok(())
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    let saved = weights::load(&args.weights)?;
    let env = args.env.unwrap_or(saved.env);
    if args.episodes == 0 {
        return Err(CliError::Usage("--episodes must be positive".into()));
    }
    let stats = evaluate(&env, &saved.actor, args.episodes, args.seed)?;
    let dir = args.out.unwrap_or_else(|| {
        args.weights
            .parent()
            .map(Path::to_path_buf)
            .unwrap_or_default()
    });
    if !dir.as_os_str().is_empty() {
        create_dir(&dir)?;
    }
    write_file(&dir.join("eval.csv"), |b| write_eval(b, &stats))?;
    println!(
        "median {:.6} lower_quartile {:.6} upper_quartile {:.6} over {} episodes",
        stats.median,
        stats.lower_quartile,
        stats.upper_quartile,
        stats.returns.len()
    );
    Ok(())
}

fn cmd_surface(args: SurfaceArgs) -> Result<(), CliError> {
    let spec = SurfaceSpec {
        rho_min: args.rho_min,
        rho_max: args.rho_max,
        step: args.step,
        epsilon: args.epsilon,
        beta: args.beta,
        eta: args.eta,
        advantage: args.advantage,
    };
    let rows = spec.rows()?;
    match args.out {
        Some(path) => write_file(&path, |b| write_rows(b, &rows)),
        None => write_rows(std::io::stdout().lock(), &rows),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(a) => cmd_train(a),
        Command::Eval(a) => cmd_eval(a),
        Command::Surface(a) => cmd_surface(a),
        Command::Sweep(a) => cmd_sweep(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
