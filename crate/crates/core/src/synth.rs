//! Bundled synthetic recourse tasks.
//!
//! Each generator draws a factual cohort, trains a reference predictor on a
//! broad sample covering the whole feature domain (so that shifted outputs
//! stay reachable), and sets the target to the factual outputs shifted by a
//! constant.

use std::path::Path;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::predict::{fit_builtin, BuiltinModel, FitOptions, ModelKind, Predictor};
use crate::tabular::{decode_csv, project_in_place, save_values_csv, Cohort, Feature, Schema};

pub const TWO_GAUSSIANS_LINEAR: &str = "two-gaussians-linear";
pub const MIXED_TYPE_STUMPS: &str = "mixed-type-stumps";
pub const GENERATORS: [&str; 2] = [TWO_GAUSSIANS_LINEAR, MIXED_TYPE_STUMPS];

/// Generator settings, read from the `--spec` file of `synthesize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SynthSpec {
    pub generator: String,
    pub n: usize,
    #[serde(default)]
    pub seed: u64,
    /// Added to every factual output to form the target.
    #[serde(default = "default_shift")]
    pub shift: f64,
    /// Overrides the generator's default predictor kind.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub predictor: Option<ModelKind>,
    /// Rows of the broad training sample for the predictor.
    #[serde(default = "default_training_rows")]
    pub training_rows: usize,
}

fn default_shift() -> f64 {
    1.0
}

fn default_training_rows() -> usize {
    4000
}

impl SynthSpec {
    pub fn new(generator: &str, n: usize, seed: u64) -> Self {
        Self {
            generator: generator.to_string(),
            n,
            seed,
            shift: default_shift(),
            predictor: None,
            training_rows: default_training_rows(),
        }
    }

    pub fn with_predictor(mut self, kind: ModelKind) -> Self {
        self.predictor = Some(kind);
        self
    }
}

#[derive(Debug, Clone)]
pub struct SynthTask {
    pub factual: Cohort,
    pub model: BuiltinModel,
    pub factual_outputs: Vec<f64>,
    pub target: Vec<f64>,
}

impl SynthTask {
    pub fn schema(&self) -> &Arc<Schema> {
        self.factual.schema()
    }

    /// Writes `data.csv`, `schema.json`, `target.csv` and `model.json`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<()> {
        let dir = dir.as_ref();
        std::fs::create_dir_all(dir)?;
        decode_csv(&self.factual, dir.join("data.csv"))?;
        self.schema().save_json(dir.join("schema.json"))?;
        save_values_csv(&self.target, "target", dir.join("target.csv"))?;
        self.model.save_json(dir.join("model.json"))?;
        Ok(())
    }
}

/// Draws a task; fails with a config error for unknown generators or `n < 10`.
pub fn generate(spec: &SynthSpec) -> Result<SynthTask> {
    if spec.n < 10 {
        return Err(Error::Config(format!("generators need n >= 10, got {}", spec.n)));
    }
    if spec.training_rows < 50 {
        return Err(Error::Config(format!("training_rows must be >= 50, got {}", spec.training_rows)));
    }
    match spec.generator.as_str() {
        TWO_GAUSSIANS_LINEAR => two_gaussians_linear(spec),
        MIXED_TYPE_STUMPS => mixed_type_stumps(spec),
        other => Err(Error::Config(format!(
            "unknown generator `{other}` (expected one of: {})",
            GENERATORS.join(", ")
        ))),
    }
}

fn uniform_rows(schema: &Schema, rows: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows * schema.len());
    for _ in 0..rows {
        for f in schema.features() {
            match (f.span(), f.cardinality()) {
                (Some(_), _) => {
                    let crate::tabular::FeatureKind::Numerical { min, max } = f.kind else { unreachable!() };
                    out.push(rng.random_range(min..=max));
                }
                (None, Some(levels)) => out.push(rng.random_range(0..levels) as f64),
                _ => unreachable!(),
            }
        }
    }
    out
}

fn finish(spec: &SynthSpec, schema: Arc<Schema>, factual: Vec<f64>, truth: impl Fn(&[f64]) -> f64, default_kind: ModelKind, rng: &mut ChaCha8Rng) -> Result<SynthTask> {
    let d = schema.len();
    let train_x = uniform_rows(&schema, spec.training_rows, rng);
    let train_y: Vec<f64> = train_x.chunks_exact(d).map(&truth).collect();
    let kind = spec.predictor.unwrap_or(default_kind);
    let train_y = if kind == ModelKind::Logistic {
        let median = {
            let mut s = train_y.clone();
            s.sort_by(f64::total_cmp);
            s[s.len() / 2]
        };
        train_y.iter().map(|&v| if v > median { 1.0 } else { 0.0 }).collect()
    } else {
        train_y
    };
    let model = fit_builtin(kind, &train_x, d, &train_y, spec.seed, &FitOptions::default())?;
    let factual = Cohort::new(schema, factual)?;
    let factual_outputs = model.predict(factual.values(), d)?;
    let target = factual_outputs.iter().map(|y| y + spec.shift).collect();
    Ok(SynthTask {
        factual,
        model,
        factual_outputs,
        target,
    })
}

/// Four numerical features; the cohort is an equal mixture of two Gaussian
/// clusters that differ along the features the outcome ignores.
fn two_gaussians_linear(spec: &SynthSpec) -> Result<SynthTask> {
    let schema = Arc::new(Schema::new(
        (1..=4).map(|p| Feature::numerical(format!("x{p}"), -4.0, 4.0)).collect(),
    )?);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, 0.25).expect("valid sd");
    let centers = [[0.0, 0.0, -0.6, 0.6], [0.0, 0.0, 0.6, -0.6]];
    let mut values = Vec::with_capacity(spec.n * 4);
    for i in 0..spec.n {
        let c = &centers[i % 2];
        let mut row: Vec<f64> = c.iter().map(|m| m + noise.sample(&mut rng)).collect();
        project_in_place(&mut row, &schema);
        values.extend(row);
    }
    let truth = |r: &[f64]| 0.8 * r[0] + 0.6 * r[1];
    finish(spec, schema, values, truth, ModelKind::Linear, &mut rng)
}

/// Three numerical features and two categoricals, one of them immutable;
/// the outcome has threshold effects and a level-dependent offset.
fn mixed_type_stumps(spec: &SynthSpec) -> Result<SynthTask> {
    let schema = Arc::new(Schema::new(vec![
        Feature::numerical("income", -4.0, 4.0),
        Feature::numerical("tenure", -4.0, 4.0),
        Feature::numerical("debt", -4.0, 4.0),
        Feature::categorical("sector", ["retail", "industry", "services", "public"]),
        Feature::categorical("region", ["north", "south"]).immutable(),
    ])?);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let noise = Normal::new(0.0, 0.5).expect("valid sd");
    let sector_weights = [0.4, 0.3, 0.2, 0.1];
    let mut values = Vec::with_capacity(spec.n * 5);
    for i in 0..spec.n {
        let shift = if i % 2 == 0 { -0.4 } else { 0.4 };
        let mut row = vec![
            shift + noise.sample(&mut rng),
            noise.sample(&mut rng),
            -shift + noise.sample(&mut rng),
            pick(&sector_weights, &mut rng) as f64,
            (i % 2) as f64,
        ];
        project_in_place(&mut row, &schema);
        values.extend(row);
    }
    let sector_effect = [0.0, 0.3, 0.5, -0.2];
    let truth = move |r: &[f64]| {
        0.7 * r[0] + 0.4 * r[1] - 0.3 * r[2] + if r[0] > 1.0 { 0.3 } else { 0.0 } + sector_effect[r[3] as usize] + 0.2 * r[4]
    };
    finish(spec, schema, values, truth, ModelKind::StumpEnsemble, &mut rng)
}

fn pick(weights: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let mut u: f64 = rng.random();
    for (i, w) in weights.iter().enumerate() {
        if u < *w {
            return i;
        }
        u -= w;
    }
    weights.len() - 1
}
