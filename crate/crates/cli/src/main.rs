use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use qsd_cli::{run, BackendChoice, Command, OutputFormat, QsdMethod, RunConfig};

/// Quasi-stationary distributions of perturbed semi-Markov processes.
#[derive(Parser)]
#[command(name = "qsd", version)]
struct Cli {
    #[command(subcommand)]
    command: Sub,

    /// Arithmetic backend.
    #[arg(long, global = true, value_enum, env = "QSD_BACKEND", default_value = "auto")]
    backend: BackendChoice,

    #[arg(long, global = true, value_enum, default_value = "text")]
    output: OutputFormat,
}

#[derive(Args)]
struct ModelArg {
    /// JSON model file; the bundled three-state example when omitted.
    #[arg(long, short)]
    model: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Sub {
    /// Check communication, aperiodicity and stochasticity.
    Validate(ModelArg),
    /// QSD at one fixed ε.
    Qsd {
        #[command(flatten)]
        model: ModelArg,
        /// Rational or decimal, e.g. `1/10` or `0.1`.
        #[arg(long, short, allow_hyphen_values = true)]
        epsilon: String,
        #[arg(long, value_enum, default_value = "formula")]
        method: QsdMethod,
        /// Steps for the iterative method.
        #[arg(long, default_value_t = 2000)]
        horizon: usize,
    },
    /// Power-series expansion of the QSD up to `order`.
    Expand {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, short = 'k')]
        order: usize,
        /// Reference state for the moment tables.
        #[arg(long, default_value_t = 1)]
        i_ref: usize,
    },
    /// Compare the expansion with the fixed-ε QSD along a grid.
    Check {
        #[command(flatten)]
        model: ModelArg,
        #[arg(long, short = 'k')]
        order: usize,
        #[arg(long, value_delimiter = ',', required = true, allow_hyphen_values = true)]
        eps_grid: Vec<String>,
    },
    /// Recompute the bundled example and compare every table.
    ReproduceExample,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut cfg = RunConfig::new(Command::ReproduceExample);
    match cli.command {
        Sub::Validate(m) => {
            cfg.command = Command::Validate;
            cfg.model_path = m.model;
        }
        Sub::Qsd { model, epsilon, method, horizon } => {
            cfg.command = Command::Qsd;
            cfg.model_path = model.model;
            cfg.epsilon = Some(epsilon);
            cfg.method = method;
            cfg.horizon = horizon;
        }
        Sub::Expand { model, order, i_ref } => {
            cfg.command = Command::Expand;
            cfg.model_path = model.model;
            cfg.order = Some(order);
            cfg.i_ref = i_ref;
        }
        Sub::Check { model, order, eps_grid } => {
            cfg.command = Command::Check;
            cfg.model_path = model.model;
            cfg.order = Some(order);
            cfg.eps_grid = eps_grid;
        }
        Sub::ReproduceExample => {}
    }
    cfg.backend = cli.backend;
    cfg.output = cli.output;

    let out = run(&cfg);
    let _ = std::io::stdout().write_all(out.stdout.as_bytes());
    let _ = std::io::stderr().write_all(out.stderr.as_bytes());
    ExitCode::from(out.exit_code as u8)
}
