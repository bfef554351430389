//! Black-box predictors.
//!
//! The solver only ever calls [`Predictor::predict`] on encoded rows: no
//! gradients, no parameter access. Three reference models are built in, and
//! any other model can be plugged in out of process through a newline-delimited
//! JSON protocol (see [`ExternalPredictor`] and [`serve`]).

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, Command, Stdio};
use std::sync::mpsc::{self, Receiver, RecvTimeoutError};
use std::sync::Mutex;
use std::time::Duration;

use nalgebra::{DMatrix, DVector};
use rand::seq::index::sample as sample_indices;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, PredictorError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredictorCapabilities {
    /// `predict` may be called from several threads at once.
    pub concurrent_safe: bool,
    /// Prefers one large call over many small ones.
    pub batch_preferred: bool,
}

pub trait Predictor: Send + Sync {
    /// Scores `rows.len() / d` encoded rows, one real per row.
    fn predict(&self, rows: &[f64], d: usize) -> std::result::Result<Vec<f64>, PredictorError>;

    fn capabilities(&self) -> PredictorCapabilities {
        PredictorCapabilities {
            concurrent_safe: true,
            batch_preferred: false,
        }
    }
}

/// Calls `predictor` and enforces the output contract (length and finiteness).
pub fn checked_predict(
    predictor: &dyn Predictor,
    rows: &[f64],
    d: usize,
) -> std::result::Result<Vec<f64>, PredictorError> {
    let m = if d == 0 { 0 } else { rows.len() / d };
    if m == 0 {
        return Ok(Vec::new());
    }
    let out = predictor.predict(rows, d)?;
    if out.len() != m {
        return Err(PredictorError::new(format!("predictor returned {} outputs for {m} rows", out.len())));
    }
    if let Some(bad) = out.iter().position(|v| !v.is_finite()) {
        return Err(PredictorError::new(format!("predictor returned non-finite output {}", out[bad])).with_rows(vec![bad]));
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Logistic,
    StumpEnsemble,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Stump {
    pub feature: usize,
    pub threshold: f64,
    /// Contribution when `x[feature] <= threshold`.
    pub left: f64,
    pub right: f64,
}

/// A fitted reference model; serializes as the predictor spec file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum BuiltinModel {
    Linear { weights: Vec<f64>, intercept: f64 },
    Logistic { weights: Vec<f64>, intercept: f64 },
    StumpEnsemble { base: f64, stumps: Vec<Stump> },
}

impl BuiltinModel {
    pub fn kind(&self) -> ModelKind {
        match self {
            BuiltinModel::Linear { .. } => ModelKind::Linear,
            BuiltinModel::Logistic { .. } => ModelKind::Logistic,
            BuiltinModel::StumpEnsemble { .. } => ModelKind::StumpEnsemble,
        }
    }

    pub fn predict_row(&self, row: &[f64]) -> f64 {
        match self {
            BuiltinModel::Linear { weights, intercept } => intercept + crate::transport::dot(weights, row),
            BuiltinModel::Logistic { weights, intercept } => sigmoid(intercept + crate::transport::dot(weights, row)),
            BuiltinModel::StumpEnsemble { base, stumps } => {
                base + stumps
                    .iter()
                    .map(|s| if row[s.feature] <= s.threshold { s.left } else { s.right })
                    .sum::<f64>()
            }
        }
    }

    fn input_dim(&self) -> Option<usize> {
        match self {
            BuiltinModel::Linear { weights, .. } | BuiltinModel::Logistic { weights, .. } => Some(weights.len()),
            BuiltinModel::StumpEnsemble { .. } => None,
        }
    }

    pub fn load_json(path: impl AsRef<std::path::Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }

    pub fn save_json(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }
}

impl Predictor for BuiltinModel {
    fn predict(&self, rows: &[f64], d: usize) -> std::result::Result<Vec<f64>, PredictorError> {
        if let Some(w) = self.input_dim() {
            if w != d {
                return Err(PredictorError::new(format!("model expects {w} features, rows have {d}")));
            }
        }
        if let BuiltinModel::StumpEnsemble { stumps, .. } = self {
            if let Some(s) = stumps.iter().find(|s| s.feature >= d) {
                return Err(PredictorError::new(format!("stump splits feature {} but rows have {d}", s.feature)));
            }
        }
        Ok(rows.chunks_exact(d).map(|r| self.predict_row(r)).collect())
    }
}

fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct FitOptions {
    pub n_stumps: usize,
    pub shrinkage: f64,
    /// Row fraction drawn (without replacement) for each stump; 1.0 uses all rows.
    pub subsample: f64,
    pub tolerance: f64,
    pub max_iterations: usize,
    /// L2 penalty on logistic weights; keeps separable problems bounded.
    pub ridge: f64,
}

impl Default for FitOptions {
    fn default() -> Self {
        Self {
            n_stumps: 200,
            shrinkage: 0.1,
            subsample: 1.0,
            tolerance: 1e-8,
            max_iterations: 100,
            ridge: 1e-6,
        }
    }
}

/// Fits a reference model on row-major `x` (width `d`) and targets `y`.
pub fn fit_builtin(kind: ModelKind, x: &[f64], d: usize, y: &[f64], seed: u64, opts: &FitOptions) -> Result<BuiltinModel> {
    if d == 0 || x.len() != y.len() * d || y.is_empty() {
        return Err(Error::Fit(format!(
            "inconsistent shapes: {} values, width {d}, {} targets",
            x.len(),
            y.len()
        )));
    }
    match kind {
        ModelKind::Linear => fit_linear(x, d, y),
        ModelKind::Logistic => fit_logistic(x, d, y, opts),
        ModelKind::StumpEnsemble => Ok(fit_stumps(x, d, y, seed, opts)),
    }
}

fn design(x: &[f64], d: usize) -> DMatrix<f64> {
    let n = x.len() / d;
    DMatrix::from_fn(n, d + 1, |i, j| if j < d { x[i * d + j] } else { 1.0 })
}

fn fit_linear(x: &[f64], d: usize, y: &[f64]) -> Result<BuiltinModel> {
    let a = design(x, d);
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.max();
    let smin = svd.singular_values.min();
    if y.len() < d + 1 || !(smin > 1e-10 * smax.max(1.0)) {
        return Err(Error::Fit("singular design matrix".into()));
    }
    let beta = svd
        .solve(&DVector::from_column_slice(y), 0.0)
        .map_err(|e| Error::Fit(e.to_string()))?;
    Ok(BuiltinModel::Linear {
        weights: beta.rows(0, d).iter().copied().collect(),
        intercept: beta[d],
    })
}

fn fit_logistic(x: &[f64], d: usize, y: &[f64], opts: &FitOptions) -> Result<BuiltinModel> {
    if y.iter().any(|&v| v != 0.0 && v != 1.0) {
        return Err(Error::Fit("logistic fit needs labels in {0, 1}".into()));
    }
    let a = design(x, d);
    let n = y.len();
    let yv = DVector::from_column_slice(y);
    let mut beta = DVector::zeros(d + 1);
    let mut penalty = DMatrix::<f64>::identity(d + 1, d + 1) * (opts.ridge * n as f64);
    penalty[(d, d)] = 0.0;
    for _ in 0..opts.max_iterations {
        let z = &a * &beta;
        let p = z.map(sigmoid);
        let w = p.map(|pi| (pi * (1.0 - pi)).max(1e-12));
        let grad = a.transpose() * (&p - &yv) + &penalty * &beta;
        let mut hess = &penalty + DMatrix::zeros(d + 1, d + 1);
        for i in 0..n {
            let row = a.row(i);
            hess += row.transpose() * row * w[i];
        }
        let step = hess
            .cholesky()
            .ok_or_else(|| Error::Fit("singular design matrix".into()))?
            .solve(&grad);
        beta -= &step;
        if step.amax() < opts.tolerance {
            break;
        }
    }
    if beta.iter().any(|b| !b.is_finite()) {
        return Err(Error::Fit("logistic fit diverged".into()));
    }
    Ok(BuiltinModel::Logistic {
        weights: beta.rows(0, d).iter().copied().collect(),
        intercept: beta[d],
    })
}

/// Least-squares gradient boosting with depth-1 trees.
fn fit_stumps(x: &[f64], d: usize, y: &[f64], seed: u64, opts: &FitOptions) -> BuiltinModel {
    let n = y.len();
    let base = y.iter().sum::<f64>() / n as f64;
    let mut pred = vec![base; n];
    let order: Vec<Vec<usize>> = (0..d)
        .map(|p| {
            let col: Vec<f64> = (0..n).map(|i| x[i * d + p]).collect();
            crate::transport::argsort(&col)
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut stumps = Vec::with_capacity(opts.n_stumps);
    let take = ((opts.subsample.clamp(0.0, 1.0) * n as f64).round() as usize).clamp(1, n);
    let mut active = vec![true; n];
    for _ in 0..opts.n_stumps {
        if take < n {
            active.iter_mut().for_each(|a| *a = false);
            for i in sample_indices(&mut rng, n, take) {
                active[i] = true;
            }
        }
        let resid: Vec<f64> = y.iter().zip(&pred).map(|(a, b)| a - b).collect();
        let Some(stump) = best_stump(x, d, &resid, &order, &active) else { break };
        let stump = Stump {
            left: stump.left * opts.shrinkage,
            right: stump.right * opts.shrinkage,
            ..stump
        };
        for (i, pi) in pred.iter_mut().enumerate() {
            *pi += if x[i * d + stump.feature] <= stump.threshold { stump.left } else { stump.right };
        }
        stumps.push(stump);
    }
    BuiltinModel::StumpEnsemble { base, stumps }
}

fn best_stump(x: &[f64], d: usize, resid: &[f64], order: &[Vec<usize>], active: &[bool]) -> Option<Stump> {
    let (total, count) = resid
        .iter()
        .zip(active)
        .filter(|(_, a)| **a)
        .fold((0.0, 0usize), |(s, c), (r, _)| (s + r, c + 1));
    let mut best: Option<(f64, Stump)> = None;
    for (p, idx) in order.iter().enumerate() {
        let rows: Vec<usize> = idx.iter().copied().filter(|&i| active[i]).collect();
        let mut left_sum = 0.0;
        for (pos, &i) in rows.iter().enumerate().take(rows.len().saturating_sub(1)) {
            left_sum += resid[i];
            let here = x[i * d + p];
            let next = x[rows[pos + 1] * d + p];
            if next <= here {
                continue;
            }
            let nl = (pos + 1) as f64;
            let nr = (count - pos - 1) as f64;
            let right_sum = total - left_sum;
            let gain = left_sum * left_sum / nl + right_sum * right_sum / nr;
            if best.as_ref().is_none_or(|(g, _)| gain > *g) {
                best = Some((
                    gain,
                    Stump {
                        feature: p,
                        threshold: 0.5 * (here + next),
                        left: left_sum / nl,
                        right: right_sum / nr,
                    },
                ));
            }
        }
    }
    best.map(|(_, s)| s)
}

#[derive(Debug, Serialize, Deserialize)]
struct Request {
    id: i64,
    rows: Vec<Vec<f64>>,
}

#[derive(Debug, Serialize, Deserialize)]
struct Response {
    id: i64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    outputs: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    error: Option<String>,
}

struct Worker {
    child: Child,
    stdin: BufWriter<ChildStdin>,
    lines: Receiver<std::io::Result<String>>,
    next_id: i64,
}

impl Worker {
    fn spawn(argv: &[String], timeout: Duration) -> std::result::Result<Self, PredictorError> {
        let (prog, args) = argv
            .split_first()
            .ok_or_else(|| PredictorError::new("external predictor command is empty"))?;
        let mut child = Command::new(prog)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| PredictorError::new(format!("failed to start `{prog}`: {e}")))?;
        let stdin = BufWriter::new(child.stdin.take().expect("piped stdin"));
        let stdout = child.stdout.take().expect("piped stdout");
        let (tx, rx) = mpsc::channel();
        std::thread::spawn(move || {
            for line in BufReader::new(stdout).lines() {
                if tx.send(line).is_err() {
                    break;
                }
            }
        });
        let mut w = Worker {
            child,
            stdin,
            lines: rx,
            next_id: 0,
        };
        let hello = w.round_trip(&[], 0, timeout)?;
        if !hello.is_empty() {
            return Err(PredictorError::new("handshake returned outputs for an empty request"));
        }
        Ok(w)
    }

    fn round_trip(&mut self, rows: &[f64], d: usize, timeout: Duration) -> std::result::Result<Vec<f64>, PredictorError> {
        let id = self.next_id;
        self.next_id += 1;
        let req = Request {
            id,
            rows: if d == 0 { Vec::new() } else { rows.chunks_exact(d).map(<[f64]>::to_vec).collect() },
        };
        let line = serde_json::to_string(&req).map_err(|e| PredictorError::new(e.to_string()))?;
        writeln!(self.stdin, "{line}")
            .and_then(|_| self.stdin.flush())
            .map_err(|e| PredictorError::new(format!("external predictor closed its input: {e}")))?;
        let reply = match self.lines.recv_timeout(timeout) {
            Ok(Ok(l)) => l,
            Ok(Err(e)) => return Err(PredictorError::new(format!("reading predictor output: {e}"))),
            Err(RecvTimeoutError::Timeout) => {
                return Err(PredictorError::new(format!("external predictor timed out after {timeout:?}")))
            }
            Err(RecvTimeoutError::Disconnected) => {
                let status = self.child.try_wait().ok().flatten();
                return Err(PredictorError::new(format!(
                    "external predictor exited{}",
                    status.map(|s| format!(" ({s})")).unwrap_or_default()
                )));
            }
        };
        let resp: Response = serde_json::from_str(&reply)
            .map_err(|e| PredictorError::new(format!("malformed response `{reply}`: {e}")))?;
        if let Some(msg) = resp.error {
            return Err(PredictorError::new(format!("external predictor reported: {msg}")));
        }
        if resp.id != id {
            return Err(PredictorError::new(format!("response id {} does not match request id {id}", resp.id)));
        }
        let outputs = resp
            .outputs
            .ok_or_else(|| PredictorError::new("response has no `outputs`"))?;
        if outputs.len() != req.rows.len() {
            return Err(PredictorError::new(format!(
                "response has {} outputs for {} rows",
                outputs.len(),
                req.rows.len()
            )));
        }
        Ok(outputs)
    }
}

impl Drop for Worker {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}

/// A model living in a child process, spoken to over stdin/stdout.
pub struct ExternalPredictor {
    workers: Vec<Mutex<Worker>>,
    timeout: Duration,
}

impl ExternalPredictor {
    pub const DEFAULT_TIMEOUT: Duration = Duration::from_secs(30);

    /// Starts one process and performs the handshake.
    pub fn spawn(argv: &[String]) -> std::result::Result<Self, PredictorError> {
        Self::spawn_pool(argv, 1, Self::DEFAULT_TIMEOUT)
    }

    /// Starts `size` identical processes; concurrent queries go to idle ones.
    pub fn spawn_pool(argv: &[String], size: usize, timeout: Duration) -> std::result::Result<Self, PredictorError> {
        let workers = (0..size.max(1))
            .map(|_| Worker::spawn(argv, timeout).map(Mutex::new))
            .collect::<std::result::Result<_, _>>()?;
        Ok(Self { workers, timeout })
    }

    /// OS process ids of the workers.
    pub fn process_ids(&self) -> Vec<u32> {
        self.workers.iter().map(|w| w.lock().unwrap_or_else(|e| e.into_inner()).child.id()).collect()
    }
}

impl Predictor for ExternalPredictor {
    fn predict(&self, rows: &[f64], d: usize) -> std::result::Result<Vec<f64>, PredictorError> {
        let mut guard = self
            .workers
            .iter()
            .find_map(|w| w.try_lock().ok())
            .unwrap_or_else(|| self.workers[0].lock().unwrap_or_else(|e| e.into_inner()));
        guard.round_trip(rows, d, self.timeout)
    }

    fn capabilities(&self) -> PredictorCapabilities {
        PredictorCapabilities {
            concurrent_safe: self.workers.len() > 1,
            batch_preferred: true,
        }
    }
}

/// Server side of the protocol: answers requests from `input` until it
/// closes. Returns the process exit code (0 on clean end of input, 1 after a
/// malformed request or a scoring failure, which is reported as
/// `{"id": ..., "error": ...}`).
pub fn serve<R: BufRead, W: Write>(predictor: &dyn Predictor, input: R, mut output: W) -> std::io::Result<i32> {
    for line in input.lines() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let req: Request = match serde_json::from_str(&line) {
            Ok(r) => r,
            Err(e) => {
                reply(&mut output, &Response { id: -1, outputs: None, error: Some(format!("malformed request: {e}")) })?;
                return Ok(1);
            }
        };
        let d = req.rows.first().map_or(0, Vec::len);
        if req.rows.iter().any(|r| r.len() != d) {
            reply(&mut output, &Response { id: req.id, outputs: None, error: Some("ragged rows".into()) })?;
            return Ok(1);
        }
        let flat = req.rows.concat();
        match checked_predict(predictor, &flat, d) {
            Ok(outputs) => reply(&mut output, &Response { id: req.id, outputs: Some(outputs), error: None })?,
            Err(e) => {
                reply(&mut output, &Response { id: req.id, outputs: None, error: Some(e.to_string()) })?;
                return Ok(1);
            }
        }
    }
    Ok(0)
}

fn reply<W: Write>(out: &mut W, resp: &Response) -> std::io::Result<()> {
    let line = serde_json::to_string(resp).map_err(std::io::Error::other)?;
    writeln!(out, "{line}")?;
    out.flush()
}
