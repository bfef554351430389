//! Budgeted propose-and-select outer loop.
//!
//! Each iteration evaluates the current cohort against the factual cohort and
//! the target outputs, updates the balance weight from the confidence-limit
//! gaps, gates the `k` most influential rows, and picks the best of `M`
//! guided proposals plus the no-op under the objective at that frozen weight.
//! Because the no-op always competes, the objective never increases within an
//! iteration.
//!
//! Candidate scoring is incremental: projections and predictor outputs of
//! unchanged rows are reused, only edited rows are re-projected and
//! re-queried, and every projection is re-sorted from scratch.

use std::io::Write;
use std::path::Path;
use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, PredictorError, Result};
use crate::guidance::guidance_sparse;
use crate::objective::{balance_eta, combine, combined, narrow_interval, row_scores_output, row_scores_projected, top_k, EtaState};
use crate::predict::{checked_predict, Predictor};
use crate::proposals::{build_embeddings, genetic_propose, monte_carlo_propose, Candidate, CandidateBatch, ConeParams, EmbeddingTables, Patch, ProposalContext};
use crate::tabular::Cohort;
use crate::transport::{dkw_halfwidth, monotone_plan, sample_projections, sorted_copy, sorted_sq_cost, trimmed_band_integral, ProjectionSet, UclParams};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    MonteCarlo,
    Genetic,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SolverConfig {
    /// Bound on the input-side confidence limit (squared transport units).
    pub u_x: f64,
    /// Bound on the output-side confidence limit (squared transport units).
    pub u_y: f64,
    pub alpha: f64,
    pub delta: f64,
    /// Number of slicing directions.
    pub projections: usize,
    /// Rows editable per iteration.
    pub k: usize,
    /// Features editable per selected row.
    pub h: usize,
    /// Proposals per iteration, not counting the no-op.
    pub candidates: usize,
    pub max_iterations: usize,
    pub optimizer: Optimizer,
    pub cone: ConeParams,
    /// Per-row mutation probability of the genetic optimizer.
    pub p_mut: f64,
    /// Candidates carried to the next generation by the genetic optimizer.
    pub elite_size: usize,
    pub kappa: f64,
    pub initial_eta: f64,
    pub seed: u64,
    pub grid_size: usize,
    pub square_integrand: bool,
    pub stop_when_certified: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            u_x: 0.5,
            u_y: 0.05,
            alpha: 0.1,
            delta: 0.05,
            projections: 100,
            k: 1,
            h: 3,
            candidates: 32,
            max_iterations: 100,
            optimizer: Optimizer::MonteCarlo,
            cone: ConeParams::default(),
            p_mut: 0.3,
            elite_size: 4,
            kappa: 0.1,
            initial_eta: 0.5,
            seed: 0,
            grid_size: 100,
            square_integrand: true,
            stop_when_certified: false,
        }
    }
}

impl SolverConfig {
    pub fn ucl_params(&self) -> UclParams {
        UclParams {
            delta: self.delta,
            alpha: self.alpha,
            grid_size: self.grid_size,
            square_integrand: self.square_integrand,
        }
    }

    /// Checks every invariant that does not depend on the data.
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(m));
        if !(self.u_x >= 0.0 && self.u_y >= 0.0) {
            return bad(format!("bounds must be non-negative, got u_x={}, u_y={}", self.u_x, self.u_y));
        }
        self.ucl_params().validate().map_err(|e| Error::Config(e.to_string()))?;
        self.cone.validate().map_err(|e| Error::Config(e.to_string()))?;
        if self.projections == 0 {
            return bad("projections must be >= 1".into());
        }
        if self.k == 0 {
            return bad("k must be >= 1".into());
        }
        if self.candidates == 0 {
            return bad("candidates must be >= 1".into());
        }
        if self.optimizer == Optimizer::Genetic && self.candidates < 2 {
            return bad("the genetic optimizer needs candidates >= 2".into());
        }
        if self.max_iterations == 0 {
            return bad("max_iterations must be >= 1".into());
        }
        if !(0.0..=1.0).contains(&self.p_mut) {
            return bad(format!("p_mut must lie in [0, 1], got {}", self.p_mut));
        }
        if self.elite_size == 0 {
            return bad("elite_size must be >= 1".into());
        }
        EtaState::new(self.initial_eta, 0.0, 1.0, self.kappa).map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }
}

/// One row of the optimisation trajectory. Quantities describe the iterate at
/// the start of the iteration; `q_selected` is the objective of the chosen
/// candidate at the same frozen `eta`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub q: f64,
    pub q_x: f64,
    pub q_y: f64,
    pub ucl_sw: f64,
    pub ucl_w: f64,
    pub eta: f64,
    pub lower: f64,
    pub upper: f64,
    pub feasible: bool,
    pub selected_rows: Vec<usize>,
    pub edited_rows: Vec<usize>,
    pub chosen_candidate: usize,
    pub q_selected: f64,
}

/// Objective value of one candidate at a fixed `eta`.
#[derive(Debug, Clone, PartialEq)]
pub struct CandidateScore {
    pub q: f64,
    pub q_x: f64,
    pub q_y: f64,
    /// Predictor outputs of the edited rows, in edit order.
    pub edited_outputs: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Certification {
    pub feasible: bool,
    pub ucl_sw: f64,
    pub ucl_w: f64,
}

/// Final state of a solve.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FinalState {
    pub q_x: f64,
    pub q_y: f64,
    pub ucl_sw: f64,
    pub ucl_w: f64,
    pub feasible: bool,
    pub eta: f64,
    pub lower: f64,
    pub upper: f64,
}

#[derive(Debug, Clone)]
pub struct SolveReport {
    pub certified: bool,
    /// Present exactly when certified.
    pub cohort: Option<Cohort>,
    /// Predictor outputs of `cohort`, when present.
    pub outputs: Option<Vec<f64>>,
    /// Iteration whose starting iterate was returned (`iterations_run` means the last iterate).
    pub returned_iterate: Option<usize>,
    pub last_iterate: Cohort,
    pub last_outputs: Vec<f64>,
    pub final_state: FinalState,
    pub trajectory: Vec<IterationRecord>,
    pub iterations_run: usize,
    pub config: SolverConfig,
}

struct StateEval {
    plans: Vec<Vec<usize>>,
    output_plan: Vec<usize>,
    q_x: f64,
    q_y: f64,
    ucl_sw: f64,
    ucl_w: f64,
}

/// Stateful solver; [`Solver::step`] runs one outer iteration.
pub struct Solver<'a> {
    factual: Cohort,
    ystar: Vec<f64>,
    predictor: &'a dyn Predictor,
    config: SolverConfig,
    ucl: UclParams,
    halfwidth: f64,
    proj: ProjectionSet,
    tables: EmbeddingTables,
    xp_proj: Vec<Vec<f64>>,
    xp_sorted: Vec<Vec<f64>>,
    ystar_sorted: Vec<f64>,
    values: Vec<f64>,
    outputs: Vec<f64>,
    x_proj: Vec<Vec<f64>>,
    eta: EtaState,
    elite: Vec<Patch>,
    iteration: usize,
}

impl<'a> Solver<'a> {
    /// Starts from `X = X'`. Fails with a config error if the configuration is
    /// inconsistent with the data.
    pub fn new(factual: &Cohort, ystar: &[f64], predictor: &'a dyn Predictor, config: SolverConfig) -> Result<Self> {
        config.validate()?;
        let n = factual.n();
        if n == 0 {
            return Err(Error::Config("factual cohort is empty".into()));
        }
        if ystar.len() != n {
            return Err(Error::Config(format!("target has {} values, factual cohort has {n} rows", ystar.len())));
        }
        if config.k > n {
            return Err(Error::Config(format!("k = {} exceeds the number of rows n = {n}", config.k)));
        }
        if let Some(bad) = ystar.iter().position(|v| !v.is_finite()) {
            return Err(Error::Config(format!("target value {} is not finite", bad + 1)));
        }
        let d = factual.d();
        let proj = sample_projections(d, config.projections, config.seed)?;
        let tables = build_embeddings(factual.schema(), config.seed);
        let xp_proj = proj.project(factual.values());
        let xp_sorted = xp_proj.iter().map(|v| sorted_copy(v)).collect();
        let outputs = checked_predict(predictor, factual.values(), d).map_err(|e| e.at_iteration(0))?;
        Ok(Self {
            ystar: ystar.to_vec(),
            ystar_sorted: sorted_copy(ystar),
            predictor,
            ucl: config.ucl_params(),
            halfwidth: dkw_halfwidth(n, config.alpha),
            tables,
            x_proj: xp_proj.clone(),
            xp_proj,
            xp_sorted,
            values: factual.values().to_vec(),
            outputs,
            eta: EtaState::new(config.initial_eta, 0.0, 1.0, config.kappa)?,
            elite: Vec::new(),
            iteration: 0,
            proj,
            config,
            factual: factual.clone(),
        })
    }

    pub fn config(&self) -> &SolverConfig {
        &self.config
    }

    pub fn projections(&self) -> &ProjectionSet {
        &self.proj
    }

    pub fn embeddings(&self) -> &EmbeddingTables {
        &self.tables
    }

    pub fn eta_state(&self) -> EtaState {
        self.eta
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    pub fn current(&self) -> Cohort {
        Cohort::from_trusted(Arc::clone(self.factual.schema()), self.values.clone())
    }

    pub fn current_values(&self) -> &[f64] {
        &self.values
    }

    pub fn outputs(&self) -> &[f64] {
        &self.outputs
    }

    fn d(&self) -> usize {
        self.factual.d()
    }

    fn evaluate(&self) -> StateEval {
        let per: Vec<(Vec<usize>, f64, f64)> = self
            .x_proj
            .par_iter()
            .zip(self.xp_proj.par_iter())
            .zip(self.xp_sorted.par_iter())
            .map(|((a, b), sb)| {
                let plan = monotone_plan(a, b);
                let sa = sorted_copy(a);
                (plan, sorted_sq_cost(&sa, sb), trimmed_band_integral(&sa, sb, self.halfwidth, &self.ucl))
            })
            .collect();
        let nproj = per.len() as f64;
        let q_x = per.iter().map(|p| p.1).sum::<f64>() / nproj;
        let ucl_sw = per.iter().map(|p| p.2).sum::<f64>() / nproj;
        let sy = sorted_copy(&self.outputs);
        StateEval {
            plans: per.into_iter().map(|p| p.0).collect(),
            output_plan: monotone_plan(&self.outputs, &self.ystar),
            q_x,
            q_y: sorted_sq_cost(&sy, &self.ystar_sorted),
            ucl_sw,
            ucl_w: trimmed_band_integral(&sy, &self.ystar_sorted, self.halfwidth, &self.ucl),
        }
    }

    /// Confidence limits of the current iterate against the bounds.
    pub fn certify_current(&self) -> Certification {
        let e = self.evaluate();
        self.certification(&e)
    }

    fn certification(&self, e: &StateEval) -> Certification {
        Certification {
            feasible: e.ucl_sw <= self.config.u_x && e.ucl_w <= self.config.u_y,
            ucl_sw: e.ucl_sw,
            ucl_w: e.ucl_w,
        }
    }

    /// Scores every candidate at weight `eta`, reusing cached projections and
    /// outputs for unchanged rows.
    pub fn score_candidates(&self, batch: &CandidateBatch, eta: f64) -> Result<Vec<CandidateScore>, PredictorError> {
        let d = self.d();
        let caps = self.predictor.capabilities();
        let edited_rows = |c: &Candidate| -> Vec<f64> { c.edits.iter().flat_map(|(_, r)| r.iter().copied()).collect() };
        let tag = |c: &Candidate, e: PredictorError| e.with_rows(c.edited_rows());

        let outputs: Vec<Vec<f64>> = if caps.batch_preferred || !caps.concurrent_safe {
            let all: Vec<f64> = batch.candidates.iter().flat_map(|c| edited_rows(c)).collect();
            let rows: Vec<usize> = batch.candidates.iter().flat_map(|c| c.edited_rows()).collect();
            let flat = checked_predict(self.predictor, &all, d).map_err(|e| e.with_rows(rows))?;
            let mut it = flat.into_iter();
            batch
                .candidates
                .iter()
                .map(|c| it.by_ref().take(c.edits.len()).collect())
                .collect()
        } else {
            batch
                .candidates
                .par_iter()
                .map(|c| checked_predict(self.predictor, &edited_rows(c), d).map_err(|e| tag(c, e)))
                .collect::<Result<_, _>>()?
        };

        Ok(batch
            .candidates
            .par_iter()
            .zip(outputs.into_par_iter())
            .map(|(c, out)| {
                let (q_x, q_y) = self.candidate_costs(c, &out);
                CandidateScore {
                    q: combined(q_x, q_y, eta),
                    q_x,
                    q_y,
                    edited_outputs: out,
                }
            })
            .collect())
    }

    fn candidate_costs(&self, c: &Candidate, edited_outputs: &[f64]) -> (f64, f64) {
        let edited_proj: Vec<(usize, Vec<f64>)> = c.edits.iter().map(|(i, r)| (*i, self.proj.project_row(r))).collect();
        let mut buf = Vec::with_capacity(self.outputs.len());
        let mut total = 0.0;
        for (k, (cur, sb)) in self.x_proj.iter().zip(&self.xp_sorted).enumerate() {
            buf.clear();
            buf.extend_from_slice(cur);
            for (i, pr) in &edited_proj {
                buf[*i] = pr[k];
            }
            buf.sort_unstable_by(f64::total_cmp);
            total += sorted_sq_cost(&buf, sb);
        }
        let q_x = total / self.x_proj.len() as f64;
        buf.clear();
        buf.extend_from_slice(&self.outputs);
        for ((i, _), y) in c.edits.iter().zip(edited_outputs) {
            buf[*i] = *y;
        }
        buf.sort_unstable_by(f64::total_cmp);
        (q_x, sorted_sq_cost(&buf, &self.ystar_sorted))
    }

    /// Runs one outer iteration and moves to the selected candidate.
    pub fn step(&mut self) -> Result<IterationRecord> {
        let t = self.iteration + 1;
        let eval = self.evaluate();
        let cert = self.certification(&eval);
        let a = self.config.u_x - eval.ucl_sw;
        let b = self.config.u_y - eval.ucl_w;
        let eta = balance_eta(a, b, &self.eta);
        let next_state = narrow_interval(eta, &self.eta);
        let q = combined(eval.q_x, eval.q_y, eta);

        let qx = row_scores_projected(&self.x_proj, &self.xp_proj, &eval.plans);
        let qy = row_scores_output(&self.outputs, &self.ystar, &eval.output_plan)?;
        let scores = combine(qx, qy, eta)?;
        let rows = top_k(&scores.q, self.config.k)?;
        let field = guidance_sparse(&self.values, &self.xp_proj, &self.proj, &eval.plans, &rows);

        let ctx = ProposalContext {
            schema: self.factual.schema(),
            values: &self.values,
            rows: &rows,
            guidance: &field,
            cone: &self.config.cone,
            h: self.config.h,
            tables: &self.tables,
            seed: self.config.seed,
            iteration: t,
        };
        let batch = match self.config.optimizer {
            Optimizer::MonteCarlo => monte_carlo_propose(&ctx, self.config.candidates),
            Optimizer::Genetic => genetic_propose(&ctx, self.config.candidates, self.config.p_mut, &self.elite),
        };
        let scored = self.score_candidates(&batch, eta).map_err(|e| e.at_iteration(t))?;

        let mut chosen = 0;
        for (m, s) in scored.iter().enumerate() {
            if s.q < scored[chosen].q {
                chosen = m;
            }
        }
        if self.config.optimizer == Optimizer::Genetic {
            let mut order: Vec<usize> = (1..scored.len()).collect();
            order.sort_by(|&i, &j| scored[i].q.total_cmp(&scored[j].q).then(i.cmp(&j)));
            let d = self.d();
            self.elite = order
                .into_iter()
                .take(self.config.elite_size)
                .map(|m| batch.candidates[m].to_patch(&self.values, d))
                .collect();
        }

        let winner = &batch.candidates[chosen];
        let d = self.d();
        winner.apply(&mut self.values, d);
        for ((i, r), y) in winner.edits.iter().zip(&scored[chosen].edited_outputs) {
            self.outputs[*i] = *y;
            let pr = self.proj.project_row(r);
            for (col, v) in self.x_proj.iter_mut().zip(pr) {
                col[*i] = v;
            }
        }
        self.eta = next_state;
        self.iteration = t;

        Ok(IterationRecord {
            iteration: t,
            q,
            q_x: eval.q_x,
            q_y: eval.q_y,
            ucl_sw: eval.ucl_sw,
            ucl_w: eval.ucl_w,
            eta,
            lower: next_state.lower,
            upper: next_state.upper,
            feasible: cert.feasible,
            selected_rows: rows,
            edited_rows: winner.edited_rows(),
            chosen_candidate: chosen,
            q_selected: scored[chosen].q,
        })
    }

    /// Runs up to `max_iterations` steps and certifies the result.
    pub fn run(mut self) -> Result<SolveReport> {
        let mut trajectory = Vec::with_capacity(self.config.max_iterations);
        // (violation, iteration, values, outputs) of the least-violating iterate seen.
        let mut best: Option<(f64, usize, Vec<f64>, Vec<f64>)> = None;
        let violation = |c: &Certification, cfg: &SolverConfig| {
            (c.ucl_sw - cfg.u_x).max(0.0) + (c.ucl_w - cfg.u_y).max(0.0)
        };
        for _ in 0..self.config.max_iterations {
            let start = self.certify_current();
            let v = violation(&start, &self.config);
            if best.as_ref().is_none_or(|b| v <= b.0) {
                best = Some((v, self.iteration, self.values.clone(), self.outputs.clone()));
            }
            if self.config.stop_when_certified && start.feasible {
                break;
            }
            trajectory.push(self.step()?);
        }
        let eval = self.evaluate();
        let cert = self.certification(&eval);
        let final_state = FinalState {
            q_x: eval.q_x,
            q_y: eval.q_y,
            ucl_sw: cert.ucl_sw,
            ucl_w: cert.ucl_w,
            feasible: cert.feasible,
            eta: self.eta.eta,
            lower: self.eta.lower,
            upper: self.eta.upper,
        };
        let schema = Arc::clone(self.factual.schema());
        let last_iterate = Cohort::from_trusted(Arc::clone(&schema), self.values.clone());
        let (certified, cohort, outputs, returned) = if cert.feasible {
            (true, Some(last_iterate.clone()), Some(self.outputs.clone()), Some(self.iteration))
        } else {
            match best {
                Some((v, it, vals, outs)) if v == 0.0 => (true, Some(Cohort::from_trusted(schema, vals)), Some(outs), Some(it)),
                _ => (false, None, None, None),
            }
        };
        Ok(SolveReport {
            certified,
            cohort,
            outputs,
            returned_iterate: returned,
            last_iterate,
            last_outputs: self.outputs,
            final_state,
            iterations_run: self.iteration,
            trajectory,
            config: self.config,
        })
    }
}

/// Runs the full loop from the factual cohort.
pub fn solve(factual: &Cohort, ystar: &[f64], predictor: &dyn Predictor, config: SolverConfig) -> Result<SolveReport> {
    Solver::new(factual, ystar, predictor, config)?.run()
}

/// Checks both confidence limits of `x` against the bounds.
#[allow(clippy::too_many_arguments)]
pub fn certify(
    x: &Cohort,
    xp: &Cohort,
    ystar: &[f64],
    predictor: &dyn Predictor,
    proj: &ProjectionSet,
    params: &UclParams,
    u_x: f64,
    u_y: f64,
) -> Result<Certification> {
    let y = checked_predict(predictor, x.values(), x.d())?;
    let ucl_sw = crate::transport::ucl_sw2(x, xp, proj, params)?.ucl;
    let ucl_w = crate::transport::ucl_w2(&y, ystar, params)?.ucl;
    Ok(Certification {
        feasible: ucl_sw <= u_x && ucl_w <= u_y,
        ucl_sw,
        ucl_w,
    })
}

/// `(Q, Q_x, Q_y)` of a full cohort, querying the predictor on every row.
pub fn objective_from_scratch(
    x: &Cohort,
    xp: &Cohort,
    ystar: &[f64],
    predictor: &dyn Predictor,
    proj: &ProjectionSet,
    eta: f64,
) -> Result<(f64, f64, f64)> {
    let (q_x, _) = crate::transport::sw2(x, xp, proj)?;
    let y = checked_predict(predictor, x.values(), x.d())?;
    let (q_y, _) = crate::transport::w2_1d(&y, ystar)?;
    Ok((combined(q_x, q_y, eta), q_x, q_y))
}

pub const TRAJECTORY_HEADER: &str = "iteration,Q,Q_x,Q_y,ucl_sw,ucl_w,eta,l,r,feasible,k_edited,chosen_candidate";

pub fn write_trajectory_csv<W: Write>(records: &[IterationRecord], w: &mut W) -> std::io::Result<()> {
    writeln!(w, "{TRAJECTORY_HEADER}")?;
    for r in records {
        writeln!(
            w,
            "{},{},{},{},{},{},{},{},{},{},{},{}",
            r.iteration,
            r.q,
            r.q_x,
            r.q_y,
            r.ucl_sw,
            r.ucl_w,
            r.eta,
            r.lower,
            r.upper,
            r.feasible,
            r.edited_rows.len(),
            r.chosen_candidate
        )?;
    }
    Ok(())
}

pub fn save_trajectory_csv(records: &[IterationRecord], path: impl AsRef<Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_trajectory_csv(records, &mut w)?;
    w.flush()?;
    Ok(())
}
