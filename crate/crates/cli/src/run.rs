//! Command dispatch. [`run`] never panics on bad input and never prints;
//! it returns the exit code and both output streams.

use std::path::PathBuf;

use anyhow::anyhow;
use qsd_core::example::{perturbed_cycle, reproduce_example};
use qsd_core::model::validate_conditions;
use qsd_core::oracle::qsd_iterative;
use qsd_core::rootfind::DEFAULT_ROOT_TOL;
use qsd_core::{
    compute_qsd_expansion_with, detect_zero_root, qsd_direct, remainder_report, Error, ExpansionOptions,
    PerturbedSemiMarkovModel, Rational, Scalar,
};

use crate::model_file::{parse_rational, ModelFile};
use crate::render::{self, ExampleDoc, ExpansionDoc, QsdPointDoc, RemainderDoc, ValidationDoc};

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Command {
    Validate,
    Qsd,
    Expand,
    Check,
    ReproduceExample,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum BackendChoice {
    Rational,
    Float,
    /// Rational when the limiting root is exactly zero, float otherwise.
    #[default]
    Auto,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum OutputFormat {
    #[default]
    Text,
    Json,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, clap::ValueEnum)]
pub enum QsdMethod {
    /// Occupation transform at the root of the characteristic equation.
    #[default]
    Formula,
    /// Conditional law after `horizon` steps (float only).
    Iterative,
}

#[derive(Clone, Debug, PartialEq)]
pub struct RunConfig {
    pub command: Command,
    /// `None` selects the bundled three-state example.
    pub model_path: Option<PathBuf>,
    pub epsilon: Option<String>,
    pub order: Option<usize>,
    pub eps_grid: Vec<String>,
    pub backend: BackendChoice,
    pub output: OutputFormat,
    pub i_ref: usize,
    pub method: QsdMethod,
    pub horizon: usize,
    pub root_tol: f64,
}

impl RunConfig {
    pub fn new(command: Command) -> Self {
        Self {
            command,
            model_path: None,
            epsilon: None,
            order: None,
            eps_grid: Vec::new(),
            backend: BackendChoice::Auto,
            output: OutputFormat::Text,
            i_ref: 1,
            method: QsdMethod::Formula,
            horizon: 2000,
            root_tol: DEFAULT_ROOT_TOL,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Outcome {
    pub exit_code: i32,
    pub stdout: String,
    pub stderr: String,
}

/// Exit 2: the input is unusable (parse, schema, model conditions, flags).
/// Exit 1: the input is fine but the computation failed.
enum Failure {
    Invalid(anyhow::Error),
    Compute(anyhow::Error),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Model(_) | Error::Conditions(_) | Error::Usage(_) | Error::InsufficientOrder { .. } => {
                Failure::Invalid(e.into())
            }
            Error::Backend(_) => Failure::Compute(anyhow!(
                "{e}\nhint: the limiting root is not exactly zero; rerun with --backend float or --backend auto"
            )),
            _ => Failure::Compute(e.into()),
        }
    }
}

fn invalid(msg: impl Into<String>) -> Failure {
    Failure::Invalid(anyhow!(msg.into()))
}

/// Successful output with its exit code (a failed check still renders).
struct Report {
    code: i32,
    text: String,
}

pub fn run(cfg: &RunConfig) -> Outcome {
    match dispatch(cfg) {
        Ok(Report { code, text }) => Outcome { exit_code: code, stdout: text, stderr: String::new() },
        Err(Failure::Invalid(e)) => Outcome { exit_code: 2, stdout: String::new(), stderr: format!("error: {e:#}\n") },
        Err(Failure::Compute(e)) => Outcome { exit_code: 1, stdout: String::new(), stderr: format!("error: {e:#}\n") },
    }
}

fn dispatch(cfg: &RunConfig) -> Result<Report, Failure> {
    if cfg.command == Command::ReproduceExample {
        let report = match cfg.backend {
            BackendChoice::Float => reproduce_example::<f64>(),
            _ => reproduce_example::<Rational>(),
        };
        let text = match cfg.output {
            OutputFormat::Text => render::example_text(&report),
            OutputFormat::Json => render::json(&ExampleDoc::from(&report)),
        };
        return Ok(Report { code: if report.all_passed() { 0 } else { 2 }, text });
    }

    let model = load_model(cfg)?;
    match cfg.command {
        Command::Validate => {
            let doc = ValidationDoc::from(&validate_conditions(&model));
            Ok(Report { code: if doc.ok { 0 } else { 2 }, text: emit(cfg, &doc, ValidationDoc::text) })
        }
        Command::Qsd => qsd(cfg, &model),
        Command::Expand => {
            let k = order(cfg)?;
            if use_rational(cfg, &model)? {
                expand(cfg, &model, k)
            } else {
                expand(cfg, &model.to_float(), k)
            }
        }
        Command::Check => {
            let k = order(cfg)?;
            let grid = grid(cfg)?;
            let report = if use_rational(cfg, &model)? {
                remainder_report(&model, k, &grid, cfg.root_tol)?
            } else {
                remainder_report(&model.to_float(), k, &grid, cfg.root_tol)?
            };
            let doc = RemainderDoc::from(&report);
            Ok(Report { code: if doc.decaying { 0 } else { 2 }, text: emit(cfg, &doc, RemainderDoc::text) })
        }
        Command::ReproduceExample => unreachable!(),
    }
}

fn emit<T: serde::Serialize>(cfg: &RunConfig, doc: &T, text: impl Fn(&T) -> String) -> String {
    match cfg.output {
        OutputFormat::Text => text(doc),
        OutputFormat::Json => render::json(doc),
    }
}

fn load_model(cfg: &RunConfig) -> Result<PerturbedSemiMarkovModel<Rational>, Failure> {
    match &cfg.model_path {
        None => Ok(perturbed_cycle()),
        Some(path) => {
            let file = ModelFile::load(path).map_err(Failure::Invalid)?;
            file.to_model().map_err(|e| Failure::Invalid(e.context(format!("in {}", path.display()))))
        }
    }
}

fn order(cfg: &RunConfig) -> Result<usize, Failure> {
    cfg.order.ok_or_else(|| invalid("--order is required"))
}

fn grid(cfg: &RunConfig) -> Result<Vec<f64>, Failure> {
    if cfg.eps_grid.is_empty() {
        return Err(invalid("--eps-grid needs at least one value"));
    }
    cfg.eps_grid
        .iter()
        .map(|s| parse_rational(s).map(|q| Scalar::to_f64(&q)).map_err(Failure::Invalid))
        .collect()
}

/// Rational unless asked for float, or `auto` finds a nonzero limiting root.
/// An explicit rational request is honoured and fails later if the root is nonzero.
fn use_rational(cfg: &RunConfig, model: &PerturbedSemiMarkovModel<Rational>) -> Result<bool, Failure> {
    Ok(match cfg.backend {
        BackendChoice::Rational => true,
        BackendChoice::Float => false,
        BackendChoice::Auto => detect_zero_root(&model.evaluate_at(&Rational::from_integer(0.into()))?),
    })
}

fn expand<S: Scalar>(cfg: &RunConfig, model: &PerturbedSemiMarkovModel<S>, k: usize) -> Result<Report, Failure> {
    let options = ExpansionOptions { i_ref: cfg.i_ref, root_tol: cfg.root_tol, ..Default::default() };
    let x = compute_qsd_expansion_with(model, k, &options)?;
    Ok(Report { code: 0, text: emit(cfg, &ExpansionDoc::from(&x), ExpansionDoc::text) })
}

fn qsd(cfg: &RunConfig, model: &PerturbedSemiMarkovModel<Rational>) -> Result<Report, Failure> {
    let text = cfg.epsilon.as_deref().ok_or_else(|| invalid("--epsilon is required"))?;
    let eps = parse_rational(text).map_err(Failure::Invalid)?;
    let kernel = model.evaluate_at(&eps)?;
    let doc = match cfg.method {
        QsdMethod::Iterative => {
            if cfg.backend == BackendChoice::Rational {
                return Err(invalid("the iterative method needs --backend float or auto"));
            }
            QsdPointDoc::from(&qsd_iterative(&kernel.to_float(), cfg.horizon, cfg.i_ref)?)
        }
        QsdMethod::Formula => {
            let rational = match cfg.backend {
                BackendChoice::Rational => true,
                BackendChoice::Float => false,
                BackendChoice::Auto => detect_zero_root(&kernel),
            };
            if rational {
                QsdPointDoc::from(&qsd_direct(&kernel, cfg.root_tol)?)
            } else {
                QsdPointDoc::from(&qsd_direct(&kernel.to_float(), cfg.root_tol)?)
            }
        }
    };
    Ok(Report { code: 0, text: emit(cfg, &doc, QsdPointDoc::text) })
}
