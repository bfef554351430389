use std::io::BufReader;
use std::path::PathBuf;

use clap::{Parser, Subcommand};
use discover::cli::{self, EvaluateArgs, EXIT_RUNTIME};
use discover::{BuiltinModel, Error};

#[derive(Parser)]
#[command(name = "discover", version, about = "Certified distributional counterfactuals for black-box tabular models")]
struct Args {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the solver from a JSON config.
    Solve {
        #[arg(long)]
        config: PathBuf,
        /// Worker threads (default: all cores); results do not depend on it.
        #[arg(long)]
        threads: Option<usize>,
        /// Overrides `solver.seed`.
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Compute metrics between a factual and a counterfactual cohort.
    Evaluate {
        #[arg(long)]
        factual: PathBuf,
        #[arg(long)]
        counterfactual: PathBuf,
        #[arg(long)]
        target: PathBuf,
        #[arg(long)]
        schema: PathBuf,
        /// Built-in model JSON used to score both cohorts.
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 100)]
        projections: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Write a bundled synthetic task.
    Synthesize {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Serve a built-in model over the line protocol on stdin/stdout.
    Serve {
        #[arg(long)]
        model: PathBuf,
    },
}

fn run(command: Command) -> Result<i32, Error> {
    match command {
        Command::Solve { config, threads, seed } => {
            let mut pool = rayon::ThreadPoolBuilder::new();
            if let Some(t) = threads {
                pool = pool.num_threads(t);
            }
            let pool = pool.build().map_err(|e| Error::Config(format!("thread pool: {e}")))?;
            pool.install(|| cli::cmd_solve(&config, seed))
        }
        Command::Evaluate { factual, counterfactual, target, schema, model, out, projections, seed } => {
            cli::cmd_evaluate(&EvaluateArgs { factual, counterfactual, target, schema, model, out, projections, seed })
        }
        Command::Synthesize { spec, out } => cli::cmd_synthesize(spec, out),
        Command::Serve { model } => {
            let model = BuiltinModel::load_json(model)?;
            let stdin = std::io::stdin();
            Ok(discover::predict::serve(&model, BufReader::new(stdin.lock()), std::io::stdout().lock())?)
        }
    }
}

fn main() {
    env_logger::Builder::from_env(env_logger::Env::default().filter_or("DISCOVER_LOG", "error")).init();
    let args = Args::parse();
    let code = match run(args.command) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            let code = cli::exit_code(&e);
            if code == EXIT_RUNTIME {
                log::debug!("{e:?}");
            }
            code
        }
    };
    std::process::exit(code);
}
