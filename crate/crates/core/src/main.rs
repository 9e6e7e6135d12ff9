use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use bbai::harness::{run_experiment, Algorithm, ExperimentConfig, InstanceSpec, ParamProfile};
use bbai::oracle::solve_allocation;
use bbai::{BaiError, BanditInstance, Result, RewardFamily};

#[derive(Parser)]
#[command(name = "bbai", version, about = "Batched best arm identification simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Print the optimal allocation w*, T* and y* as one CSV row.
    Oracle {
        #[arg(long, default_value = "bernoulli")]
        family: RewardFamily,
        /// Comma separated arm means.
        #[arg(long, value_delimiter = ',', required = true)]
        means: Vec<f64>,
    },
    /// Run seeded trials of one algorithm and write trials.csv and summary.csv.
    Run(RunArgs),
    /// Run every algorithm on both generated instances for delta = 1e-1 .. 1e-10.
    Bench {
        #[arg(long, default_value_t = 1000)]
        trials: u64,
        #[arg(long, default_value = "bench")]
        out: PathBuf,
        #[arg(long, default_value_t = 1)]
        parallel: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long, value_delimiter = ',')]
        algos: Option<Vec<Algorithm>>,
    },
}

#[derive(Args)]
struct RunArgs {
    /// TOML file with experiment settings; flags given on the command line win.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    algo: Option<Algorithm>,
    #[arg(long)]
    family: Option<RewardFamily>,
    /// uniform10, normal10 or means=a,b,...
    #[arg(long)]
    instance: Option<InstanceSpec>,
    #[arg(long, value_delimiter = ',')]
    delta: Option<Vec<f64>>,
    #[arg(long)]
    trials: Option<u64>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    parallel: Option<usize>,
    #[arg(long)]
    profile: Option<ParamProfile>,
    #[arg(long)]
    force_elim: bool,
    /// Per-trial pull cap; 0 disables it.
    #[arg(long)]
    pull_cap: Option<u64>,
    /// Overrides the Stage II cap L2.
    #[arg(long)]
    l2: Option<u64>,
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Oracle { family, means } => {
            let instance = BanditInstance::new(family, means)?;
            let solution = solve_allocation(&instance)?;
            let mut row: Vec<String> = solution.weights.iter().map(|w| w.to_string()).collect();
            row.push(solution.characteristic_time.to_string());
            row.push(solution.multiplier.map_or_else(String::new, |y| y.to_string()));
            println!("{}", row.join(","));
            Ok(())
        }
        Command::Run(args) => {
            let config = build_config(args)?;
            let summary = run_experiment(&config)?;
            print_summary(&summary);
            Ok(())
        }
        Command::Bench {
            trials,
            out,
            parallel,
            seed,
            algos,
        } => {
            let deltas: Vec<f64> = (1..=10).map(|k| 10f64.powi(-k)).collect();
            let algos = algos.unwrap_or_else(|| Algorithm::ALL.to_vec());
            for instance in [InstanceSpec::Uniform10, InstanceSpec::Normal10] {
                for &algorithm in &algos {
                    let mut config = ExperimentConfig::new(algorithm, instance.clone(), deltas.clone(), trials);
                    config.base_seed = seed;
                    config.parallelism = parallel;
                    config.output_path = out.join(format!("{instance}_{algorithm}"));
                    print_summary(&run_experiment(&config)?);
                }
            }
            Ok(())
        }
    }
}

fn build_config(args: RunArgs) -> Result<ExperimentConfig> {
    let mut config = match &args.config {
        Some(path) => {
            let text = fs::read_to_string(path).map_err(|e| BaiError::Io {
                path: path.clone(),
                source: e,
            })?;
            toml::from_str(&text)
                .map_err(|e| BaiError::Config(format!("{}: {e}", path.display())))?
        }
        None => {
            let missing = |flag: &str| BaiError::Config(format!("--{flag} is required without --config"));
            ExperimentConfig::new(
                args.algo.ok_or_else(|| missing("algo"))?,
                args.instance.clone().ok_or_else(|| missing("instance"))?,
                args.delta.clone().ok_or_else(|| missing("delta"))?,
                args.trials.unwrap_or(1000),
            )
        }
    };
    if let Some(v) = args.algo {
        config.algorithm = v;
    }
    if let Some(v) = args.family {
        config.family = v;
    }
    if let Some(v) = args.instance {
        config.instance = v;
    }
    if let Some(v) = args.delta {
        config.deltas = v;
    }
    if let Some(v) = args.trials {
        config.trials = v;
    }
    if let Some(v) = args.seed {
        config.base_seed = v;
    }
    if let Some(v) = args.alpha {
        config.alpha = v;
    }
    if let Some(v) = args.out {
        config.output_path = v;
    }
    if let Some(v) = args.parallel {
        config.parallelism = v;
    }
    if let Some(v) = args.profile {
        config.profile = v;
    }
    if args.force_elim {
        config.force_elimination = true;
    }
    if let Some(v) = args.pull_cap {
        config.pull_cap = (v > 0).then_some(v);
    }
    if let Some(v) = args.l2 {
        config.l2 = Some(v);
    }
    config.validate()?;
    Ok(config)
}

fn print_summary(rows: &[bbai::harness::SummaryRow]) {
    for r in rows {
        println!(
            "{:<4} {:<10} delta={:<8e} samples {:.2} ± {:.2}  batches {:.2} ± {:.2}  recall {:.1}%  ({} trials)",
            r.algo,
            r.instance,
            r.delta,
            r.mean_samples,
            r.std_samples,
            r.mean_batches,
            r.std_batches,
            100.0 * r.recall,
            r.trials
        );
    }
}
