//! Command implementations behind the `discover` binary.
//!
//! Each command returns a process exit code: [`EXIT_CERTIFIED`] (0),
//! [`EXIT_RUNTIME`] (1), [`EXIT_CONFIG`] (2) or [`EXIT_UNCERTIFIED`] (3).

use std::path::{Path, PathBuf};
use std::sync::Arc;
use std::time::Duration;

use log::{debug, info};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::metrics::{evaluate, export_cdf, MetricsReport};
use crate::predict::{checked_predict, BuiltinModel, ExternalPredictor, Predictor};
use crate::solver::{save_trajectory_csv, solve, FinalState, SolverConfig};
use crate::synth::{generate, SynthSpec};
use crate::tabular::{decode_csv, load_csv, load_values_csv, Schema};
use crate::transport::sample_projections;

pub const EXIT_CERTIFIED: i32 = 0;
pub const EXIT_RUNTIME: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_UNCERTIFIED: i32 = 3;

/// Exit code for a failed command.
pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::Config(_) => EXIT_CONFIG,
        _ => EXIT_RUNTIME,
    }
}

/// Prefixes I/O failures with the offending path.
fn at<T>(path: &Path, r: Result<T>) -> Result<T> {
    r.map_err(|e| match e {
        Error::Io(io) => Error::Io(std::io::Error::new(io.kind(), format!("{}: {io}", path.display()))),
        other => other,
    })
}

/// The `solve` configuration file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub data: DataSection,
    pub predictor: PredictorSpec,
    pub target: TargetSpec,
    #[serde(default)]
    pub solver: SolverConfig,
    pub output: OutputSection,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DataSection {
    pub factual: PathBuf,
    pub schema: PathBuf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", deny_unknown_fields)]
pub enum PredictorSpec {
    /// A built-in model saved as JSON.
    Builtin { model: PathBuf },
    /// A child process speaking the line protocol.
    External {
        command: Vec<String>,
        #[serde(default = "default_pool_size")]
        pool_size: usize,
        #[serde(default = "default_timeout_secs")]
        timeout_secs: f64,
    },
}

fn default_pool_size() -> usize {
    1
}

fn default_timeout_secs() -> f64 {
    ExternalPredictor::DEFAULT_TIMEOUT.as_secs_f64()
}

/// Explicit values win over a transform when both are given.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub values: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub transform: Option<TargetTransform>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum TargetTransform {
    /// `y* = y + by`
    Shift { by: f64 },
    /// `y* = y * mean / mean(y)`
    ScaleToMean { mean: f64 },
}

impl TargetTransform {
    pub fn apply(&self, outputs: &[f64]) -> Result<Vec<f64>> {
        match *self {
            TargetTransform::Shift { by } => Ok(outputs.iter().map(|y| y + by).collect()),
            TargetTransform::ScaleToMean { mean } => {
                let current = outputs.iter().sum::<f64>() / outputs.len() as f64;
                if current == 0.0 || !current.is_finite() {
                    return Err(Error::Config("scale_to_mean needs factual outputs with a non-zero mean".into()));
                }
                Ok(outputs.iter().map(|y| y * mean / current).collect())
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl RunConfig {
    /// Parses and validates a config file; relative paths are resolved
    /// against the file's directory.
    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = at(path, std::fs::read_to_string(path).map_err(Error::from))?;
        let mut cfg = Self::from_json_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })?;
        let base = path.parent().unwrap_or(Path::new("."));
        let base = if base.as_os_str().is_empty() { Path::new(".") } else { base };
        let base = std::fs::canonicalize(base)?;
        cfg.resolve_paths(&base);
        Ok(cfg)
    }

    /// Schema violations come back as config errors naming line and column.
    pub fn from_json_str(text: &str) -> Result<Self> {
        let cfg: RunConfig = serde_json::from_str(text)
            .map_err(|e| Error::Config(format!("line {}, column {}: {e}", e.line(), e.column())))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        self.solver.validate()?;
        if self.target.values.is_none() && self.target.transform.is_none() {
            return Err(Error::Config("target needs `values` or `transform`".into()));
        }
        if let PredictorSpec::External { command, pool_size, timeout_secs } = &self.predictor {
            if command.is_empty() {
                return Err(Error::Config("external predictor command is empty".into()));
            }
            if *pool_size == 0 {
                return Err(Error::Config("pool_size must be >= 1".into()));
            }
            if !(timeout_secs.is_finite() && *timeout_secs > 0.0) {
                return Err(Error::Config(format!("timeout_secs must be positive, got {timeout_secs}")));
            }
        }
        Ok(())
    }

    fn resolve_paths(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        fix(&mut self.data.factual);
        fix(&mut self.data.schema);
        if let PredictorSpec::Builtin { model } = &mut self.predictor {
            fix(model);
        }
        if let Some(v) = &mut self.target.values {
            fix(v);
        }
        fix(&mut self.output.dir);
    }

    pub fn build_predictor(&self) -> Result<Box<dyn Predictor>> {
        Ok(match &self.predictor {
            PredictorSpec::Builtin { model } => Box::new(at(model, BuiltinModel::load_json(model))?),
            PredictorSpec::External { command, pool_size, timeout_secs } => Box::new(ExternalPredictor::spawn_pool(
                command,
                *pool_size,
                Duration::from_secs_f64(*timeout_secs),
            )?),
        })
    }
}

/// `report.json`.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunReport {
    pub certified: bool,
    pub iterations_run: usize,
    /// Iteration whose starting iterate is in `counterfactual.csv`.
    pub returned_iterate: Option<usize>,
    /// State after the last iteration.
    #[serde(rename = "final")]
    pub final_state: FinalState,
    /// Metrics of the returned cohort, or of the last iterate when uncertified.
    pub metrics: MetricsReport,
    pub config: RunConfig,
}

/// Runs a full solve and writes its artifacts to the output directory.
pub fn cmd_solve(config_path: impl AsRef<Path>, seed: Option<u64>) -> Result<i32> {
    let mut cfg = RunConfig::load(config_path)?;
    if let Some(s) = seed {
        cfg.solver.seed = s;
    }
    let schema = Arc::new(at(&cfg.data.schema, Schema::load_json(&cfg.data.schema))?);
    let factual = at(&cfg.data.factual, load_csv(&cfg.data.factual, schema))?;
    info!("loaded {} rows x {} features", factual.n(), factual.d());
    let predictor = cfg.build_predictor()?;
    let ystar = match (&cfg.target.values, &cfg.target.transform) {
        (Some(p), _) => at(p, load_values_csv(p))?,
        (None, Some(t)) => t.apply(&checked_predict(predictor.as_ref(), factual.values(), factual.d())?)?,
        (None, None) => unreachable!("validated"),
    };

    let report = solve(&factual, &ystar, predictor.as_ref(), cfg.solver.clone())?;
    info!(
        "finished {} iterations, certified = {}",
        report.iterations_run, report.certified
    );

    let dir = &cfg.output.dir;
    std::fs::create_dir_all(dir)?;
    let (cohort, outputs) = match (&report.cohort, &report.outputs) {
        (Some(c), Some(o)) => (c, o),
        _ => (&report.last_iterate, &report.last_outputs),
    };
    let proj = sample_projections(factual.d(), cfg.solver.projections, cfg.solver.seed)?;
    let metrics = evaluate(&factual, cohort, outputs, &ystar, &proj)?;
    let counterfactual = dir.join("counterfactual.csv");
    if report.certified {
        decode_csv(cohort, &counterfactual)?;
    } else if counterfactual.exists() {
        std::fs::remove_file(&counterfactual)?;
    }
    metrics.save_json(dir.join("metrics.json"))?;
    save_trajectory_csv(&report.trajectory, dir.join("trajectory.csv"))?;
    let run = RunReport {
        certified: report.certified,
        iterations_run: report.iterations_run,
        returned_iterate: report.returned_iterate,
        final_state: report.final_state,
        metrics,
        config: RunConfig { solver: report.config, ..cfg.clone() },
    };
    std::fs::write(dir.join("report.json"), serde_json::to_string_pretty(&run)? + "\n")?;
    debug!("artifacts written to {}", dir.display());
    Ok(if report.certified { EXIT_CERTIFIED } else { EXIT_UNCERTIFIED })
}

/// Inputs of `evaluate`.
#[derive(Debug, Clone)]
pub struct EvaluateArgs {
    pub factual: PathBuf,
    pub counterfactual: PathBuf,
    pub target: PathBuf,
    pub schema: PathBuf,
    /// Built-in model used to score both cohorts.
    pub model: PathBuf,
    pub out: PathBuf,
    pub projections: usize,
    pub seed: u64,
}

/// Writes `metrics.json`, the per-row input cost profile and CDFs of the
/// factual outputs, counterfactual outputs and target.
pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<i32> {
    let schema = Arc::new(at(&args.schema, Schema::load_json(&args.schema))?);
    let factual = at(&args.factual, load_csv(&args.factual, schema.clone()))?;
    let counterfactual = at(&args.counterfactual, load_csv(&args.counterfactual, schema))?;
    let ystar = at(&args.target, load_values_csv(&args.target))?;
    if factual.n() != counterfactual.n() {
        return Err(Error::Argument(format!(
            "factual has {} rows but counterfactual has {}",
            factual.n(),
            counterfactual.n()
        )));
    }
    if ystar.len() != factual.n() {
        return Err(Error::Argument(format!(
            "target has {} values but the cohorts have {} rows",
            ystar.len(),
            factual.n()
        )));
    }
    let model = at(&args.model, BuiltinModel::load_json(&args.model))?;
    let d = factual.d();
    let y_factual = checked_predict(&model, factual.values(), d)?;
    let y_cf = checked_predict(&model, counterfactual.values(), d)?;
    let proj = sample_projections(d, args.projections, args.seed)?;
    let metrics = evaluate(&factual, &counterfactual, &y_cf, &ystar, &proj)?;
    std::fs::create_dir_all(&args.out)?;
    metrics.save_json(args.out.join("metrics.json"))?;
    metrics.export_profile(args.out.join("otx_profile.csv"))?;
    export_cdf(&y_factual, args.out.join("cdf_factual.csv"))?;
    export_cdf(&y_cf, args.out.join("cdf_counterfactual.csv"))?;
    export_cdf(&ystar, args.out.join("cdf_target.csv"))?;
    Ok(EXIT_CERTIFIED)
}

/// Generates a task plus a ready-to-run `config.json` next to it.
pub fn cmd_synthesize(spec_path: impl AsRef<Path>, out: impl AsRef<Path>) -> Result<i32> {
    let spec_path = spec_path.as_ref();
    let text = at(spec_path, std::fs::read_to_string(spec_path).map_err(Error::from))?;
    let spec: SynthSpec = serde_json::from_str(&text).map_err(|e| {
        Error::Config(format!("{}: line {}, column {}: {e}", spec_path.display(), e.line(), e.column()))
    })?;
    let task = generate(&spec)?;
    let out = out.as_ref();
    task.write(out)?;
    std::fs::write(out.join("config.json"), serde_json::to_string_pretty(&quickstart_config())? + "\n")?;
    info!("wrote {} rows to {}", task.factual.n(), out.display());
    Ok(EXIT_CERTIFIED)
}

/// Config pointing at the files written by [`cmd_synthesize`]. Its output
/// bound suits small target shifts (about 0.1).
pub fn quickstart_config() -> RunConfig {
    RunConfig {
        data: DataSection {
            factual: "data.csv".into(),
            schema: "schema.json".into(),
        },
        predictor: PredictorSpec::Builtin { model: "model.json".into() },
        target: TargetSpec {
            values: Some("target.csv".into()),
            transform: None,
        },
        solver: SolverConfig {
            u_y: 0.2,
            k: 10,
            max_iterations: 100,
            ..SolverConfig::default()
        },
        output: OutputSection { dir: "out".into() },
    }
}
