//! Acceptance suite. Prints one `PASS`/`FAIL` line per criterion and exits
//! non-zero when any criterion fails.

use std::panic::{catch_unwind, AssertUnwindSafe};
use std::path::Path;
use std::process::Command;
use std::sync::Arc;
use std::time::{Duration, Instant};

use discover::guidance::guidance;
use discover::objective::{combine, combined, row_scores_input, row_scores_output};
use discover::predict::{checked_predict, ModelKind};
use discover::proposals::{build_embeddings, cone_direction, decode_level, stream_rng, Candidate, CandidateBatch};
use discover::solver::{objective_from_scratch, Optimizer};
use discover::synth::{generate, SynthSpec, SynthTask, MIXED_TYPE_STUMPS, TWO_GAUSSIANS_LINEAR};
use discover::tabular::{Cohort, Feature, FeatureKind, Schema};
use discover::transport::{sample_projections, sw2, ucl_sw2, ucl_w2, w2_1d, UclParams};
use discover::{solve, Solver, SolverConfig};
use rand::seq::SliceRandom;
use rand::Rng;
use rand_distr::{Distribution, Exp, StandardNormal};
use serde_json::{json, Value};
use statrs::distribution::{ChiSquared, Continuous, ContinuousCDF, Normal};

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn within(elapsed: Duration, limit_secs: u64) -> bool {
    elapsed <= Duration::from_secs(limit_secs)
}

fn numeric_schema(d: usize, bound: f64) -> Arc<Schema> {
    Arc::new(Schema::new((0..d).map(|p| Feature::numerical(format!("f{p}"), -bound, bound)).collect()).unwrap())
}

fn normals(rng: &mut impl Rng, len: usize) -> Vec<f64> {
    (0..len).map(|_| rng.sample::<f64, _>(StandardNormal)).collect()
}

fn random_row(schema: &Schema, rng: &mut impl Rng) -> Vec<f64> {
    schema
        .features()
        .iter()
        .map(|f| match &f.kind {
            FeatureKind::Numerical { min, max } => rng.random_range(*min..=*max),
            FeatureKind::Categorical { levels, .. } => rng.random_range(0..levels.len()) as f64,
        })
        .collect()
}

fn decomposition() -> Outcome {
    let start = Instant::now();
    let mut worst: f64 = 0.0;
    for inst in 0..200u64 {
        let mut rng = stream_rng(&[inst, 1]);
        let n = rng.random_range(2..=50);
        let d = rng.random_range(1..=6);
        let big_n = rng.random_range(1..=20);
        let schema = numeric_schema(d, 1e3);
        let x = Cohort::new(schema.clone(), normals(&mut rng, n * d)).unwrap();
        let xp = Cohort::new(schema, normals(&mut rng, n * d).iter().map(|v| 2.0 * v + 0.5).collect()).unwrap();
        let y = normals(&mut rng, n);
        let ystar: Vec<f64> = normals(&mut rng, n).iter().map(|v| v + 1.0).collect();
        let proj = sample_projections(d, big_n, inst).unwrap();
        let (qx, plans) = sw2(&x, &xp, &proj).unwrap();
        let (qy, plan_y) = w2_1d(&y, &ystar).unwrap();
        for eta in [0.0, 0.37, 1.0] {
            let q = combined(qx, qy, eta);
            let rows = combine(
                row_scores_input(&x, &xp, &proj, &plans).unwrap(),
                row_scores_output(&y, &ystar, &plan_y).unwrap(),
                eta,
            )
            .unwrap();
            worst = worst.max((rows.total() - q).abs() / q.max(1e-12));
        }
    }
    let t = start.elapsed();
    outcome(worst <= 1e-10 && within(t, 5), format!("worst relative error {worst:.2e}, {t:.2?}"))
}

struct TrajectoryChecks {
    worst_increase: f64,
    steps: usize,
    sparsity_violations: Vec<String>,
    elapsed: Duration,
}

/// 20 seeded solves stepped one iteration at a time; checks descent of the
/// from-scratch objective and the edit budgets between consecutive iterates.
fn trajectory_checks() -> TrajectoryChecks {
    let start = Instant::now();
    let mut worst_increase = f64::NEG_INFINITY;
    let mut steps = 0;
    let mut violations = Vec::new();
    for generator in [TWO_GAUSSIANS_LINEAR, MIXED_TYPE_STUMPS] {
        for optimizer in [Optimizer::MonteCarlo, Optimizer::Genetic] {
            for seed in 0..5u64 {
                let task = generate(&SynthSpec::new(generator, 100, seed)).unwrap();
                let cfg = SolverConfig { k: 5, h: 2, max_iterations: 100, optimizer, seed, ..SolverConfig::default() };
                let (k, h) = (cfg.k, cfg.h);
                let schema = task.schema().clone();
                let mut solver = Solver::new(&task.factual, &task.target, &task.model, cfg).unwrap();
                for _ in 0..100 {
                    let before = solver.current();
                    let rec = solver.step().unwrap();
                    let after = solver.current();
                    let proj = solver.projections();
                    let q0 = objective_from_scratch(&before, &task.factual, &task.target, &task.model, proj, rec.eta).unwrap().0;
                    let q1 = objective_from_scratch(&after, &task.factual, &task.target, &task.model, proj, rec.eta).unwrap().0;
                    worst_increase = worst_increase.max(q1 - q0);
                    steps += 1;

                    let changed: Vec<usize> = (0..before.n()).filter(|&i| before.row(i) != after.row(i)).collect();
                    let tag = format!("{generator}/{optimizer:?}/seed {seed}/iteration {}", rec.iteration);
                    if changed.len() > k {
                        violations.push(format!("{tag}: {} rows changed", changed.len()));
                    }
                    for &i in &changed {
                        let feats: Vec<usize> = (0..before.d()).filter(|&p| before.row(i)[p] != after.row(i)[p]).collect();
                        if feats.len() > h {
                            violations.push(format!("{tag}: row {i} changed {} features", feats.len()));
                        }
                        if feats.iter().any(|&p| schema.feature(p).immutable) {
                            violations.push(format!("{tag}: row {i} changed an immutable feature"));
                        }
                        if !rec.selected_rows.contains(&i) {
                            violations.push(format!("{tag}: row {i} edited without being selected"));
                        }
                    }
                }
            }
        }
    }
    TrajectoryChecks { worst_increase, steps, sparsity_violations: violations, elapsed: start.elapsed() }
}

fn monotonicity(c: &TrajectoryChecks) -> Outcome {
    let pass = c.worst_increase <= 1e-12 && within(c.elapsed, 120);
    outcome(pass, format!("{} steps, largest increase {:.2e}, {:.2?}", c.steps, c.worst_increase, c.elapsed))
}

fn sparsity(c: &TrajectoryChecks) -> Outcome {
    match c.sparsity_violations.first() {
        None => outcome(true, format!("{} consecutive iterate pairs checked", c.steps)),
        Some(v) => outcome(false, format!("{} violations, first: {v}", c.sparsity_violations.len())),
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    if n == 0 {
        return vec![Vec::new()];
    }
    let mut out = Vec::new();
    for p in permutations(n - 1) {
        for pos in 0..=p.len() {
            let mut q = p.clone();
            q.insert(pos, n - 1);
            out.push(q);
        }
    }
    out
}

fn ot_oracle() -> Outcome {
    let start = Instant::now();
    let perms: Vec<Vec<Vec<usize>>> = (0..=8).map(permutations).collect();
    let mut worst: f64 = 0.0;
    for pair in 0..500u64 {
        let mut rng = stream_rng(&[pair, 3]);
        let n = rng.random_range(1..=8);
        let a: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        let mut b: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
        if pair % 5 == 0 {
            // ties
            b = b.iter().map(|v| v.round()).collect();
        }
        let brute = perms[n]
            .iter()
            .map(|p| a.iter().zip(p).map(|(x, &j)| (x - b[j]).powi(2)).sum::<f64>() / n as f64)
            .fold(f64::INFINITY, f64::min);
        let (fast, _) = w2_1d(&a, &b).unwrap();
        worst = worst.max((fast - brute).abs());
    }
    let t = start.elapsed();
    outcome(worst <= 1e-12 && within(t, 10), format!("worst absolute error {worst:.2e}, {t:.2?}"))
}

fn guidance_fd() -> Outcome {
    let step = 1e-5;
    let mut worst: f64 = 0.0;
    for inst in 0..100u64 {
        let mut rng = stream_rng(&[inst, 4]);
        let n = rng.random_range(2..=40);
        let d = rng.random_range(1..=6);
        let schema = numeric_schema(d, 1e3);
        let xv = normals(&mut rng, n * d);
        let xp = Cohort::new(schema.clone(), normals(&mut rng, n * d).iter().map(|v| 1.5 * v - 0.3).collect()).unwrap();
        let x = Cohort::new(schema.clone(), xv.clone()).unwrap();
        let proj = sample_projections(d, rng.random_range(1..=20), inst).unwrap();
        let (_, plans) = sw2(&x, &xp, &proj).unwrap();
        let mut rows: Vec<usize> = (0..n).collect();
        rows.shuffle(&mut rng);
        rows.truncate(rng.random_range(1..=n));
        rows.sort_unstable();
        let g = guidance(&x, &xp, &proj, &plans, &rows).unwrap();
        let frozen = |v: Vec<f64>| -> f64 {
            let c = Cohort::new(schema.clone(), v).unwrap();
            row_scores_input(&c, &xp, &proj, &plans).unwrap().iter().sum()
        };
        let (mut err, mut norm) = (0.0, 0.0);
        for &i in &rows {
            let gi = g.get(i).unwrap();
            for p in 0..d {
                let mut up = xv.clone();
                up[i * d + p] += step;
                let mut down = xv.clone();
                down[i * d + p] -= step;
                let fd = (frozen(up) - frozen(down)) / (2.0 * step);
                err += (fd - gi[p]).powi(2);
                norm += gi[p].powi(2);
            }
        }
        worst = worst.max(err.sqrt() / norm.sqrt().max(1e-12));
    }
    outcome(worst <= 1e-5, format!("worst relative error {worst:.2e} over 100 instances"))
}

/// Asymptotic Kolmogorov p-value with the usual small-sample correction.
fn ks_pvalue(stat: f64, n: usize) -> f64 {
    let en = (n as f64).sqrt();
    let lambda = (en + 0.12 + 0.11 / en) * stat;
    let mut sum = 0.0;
    for k in 1..=100 {
        let term = 2.0 * (-2.0 * (k as f64 * lambda).powi(2)).exp();
        sum += if k % 2 == 1 { term } else { -term };
    }
    sum.clamp(0.0, 1.0)
}

fn cone_law() -> Outcome {
    let phi = std::f64::consts::FRAC_PI_6;
    let mut rng = stream_rng(&[6]);
    let anchor: Vec<f64> = normals(&mut rng, 6);
    let an = anchor.iter().map(|a| a * a).sum::<f64>().sqrt();
    let mut angles: Vec<f64> = (0..10_000)
        .map(|_| {
            let v = cone_direction(&anchor, phi, &mut rng);
            let vn = v.iter().map(|a| a * a).sum::<f64>().sqrt();
            let cos = v.iter().zip(&anchor).map(|(a, b)| a * b).sum::<f64>() / (vn * an);
            cos.clamp(-1.0, 1.0).acos()
        })
        .collect();
    let outside = angles.iter().filter(|&&a| a > phi + 1e-9).count();
    angles.sort_by(f64::total_cmp);
    let m = angles.len() as f64;
    let stat = angles
        .iter()
        .enumerate()
        .map(|(i, a)| {
            let f = (a / phi).clamp(0.0, 1.0);
            (f - i as f64 / m).abs().max((i as f64 + 1.0) / m - f)
        })
        .fold(0.0, f64::max);
    let p = ks_pvalue(stat, angles.len());
    outcome(outside == 0 && p > 0.01, format!("{outside} of 10000 outside the cone, KS D = {stat:.4}, p = {p:.3}"))
}

fn decode_law() -> Outcome {
    let schema = Schema::new(vec![Feature::categorical("c", ["a", "b", "c", "d", "e", "f"])]).unwrap();
    let tables = build_embeddings(&schema, 17);
    let table = tables.get(0).unwrap();
    let levels: Vec<usize> = (0..table.levels()).collect();
    let r = table.dim();
    let mut rng = stream_rng(&[7]);
    let z: Vec<f64> = table.anchor().iter().map(|a| a + 0.1 * rng.sample::<f64, _>(StandardNormal)).collect();
    let sq = |v: usize| table.embedding(v).iter().zip(&z).map(|(a, b)| (a - b).powi(2)).sum::<f64>();
    let weights: Vec<f64> = levels.iter().map(|&v| (-sq(v)).exp()).collect();
    let total: f64 = weights.iter().sum();
    let draws = 10_000usize;
    let mut counts = vec![0usize; levels.len()];
    for _ in 0..draws {
        counts[decode_level(table, &z, &levels, 1.0, &mut rng)] += 1;
    }
    // Pool cells with expected count below 5.
    let (mut stat, mut cells, mut pooled_obs, mut pooled_exp) = (0.0, 0usize, 0.0, 0.0);
    for (c, w) in counts.iter().zip(&weights) {
        let e = draws as f64 * w / total;
        if e < 5.0 {
            pooled_obs += *c as f64;
            pooled_exp += e;
        } else {
            stat += (*c as f64 - e).powi(2) / e;
            cells += 1;
        }
    }
    if pooled_exp > 0.0 {
        stat += (pooled_obs - pooled_exp).powi(2) / pooled_exp.max(1e-300);
        cells += 1;
    }
    let p = 1.0 - ChiSquared::new((cells - 1) as f64).unwrap().cdf(stat);

    let mut greedy_misses = 0;
    for _ in 0..1000 {
        let z: Vec<f64> = (0..r).map(|_| 2.0 * rng.sample::<f64, _>(StandardNormal)).collect();
        let nearest = levels
            .iter()
            .copied()
            .min_by(|&a, &b| {
                let da: f64 = table.embedding(a).iter().zip(&z).map(|(x, y)| (x - y).powi(2)).sum();
                let db: f64 = table.embedding(b).iter().zip(&z).map(|(x, y)| (x - y).powi(2)).sum();
                da.total_cmp(&db)
            })
            .unwrap();
        if decode_level(table, &z, &levels, 1e-9, &mut rng) != nearest {
            greedy_misses += 1;
        }
    }
    outcome(
        p > 0.01 && greedy_misses == 0,
        format!("chi2 = {stat:.2} on {} dof, p = {p:.3}; tau=1e-9 misses {greedy_misses}/1000", cells - 1),
    )
}

fn ucl_soundness() -> Outcome {
    let start = Instant::now();
    let params = UclParams::default();
    let mut unsound = 0;
    for pair in 0..1000u64 {
        let mut rng = stream_rng(&[pair, 8]);
        let n = rng.random_range(5..=300);
        let draw = |rng: &mut rand_chacha::ChaCha8Rng, kind: u64| -> Vec<f64> {
            match kind {
                0 => normals(rng, n),
                1 => (0..n).map(|_| rng.random_range(-3.0..3.0)).collect(),
                _ => (0..n).map(|_| Exp::new(1.0).unwrap().sample(rng)).collect(),
            }
        };
        let a = draw(&mut rng, pair % 3);
        let shift = rng.random_range(-2.0..2.0);
        let scale = rng.random_range(0.2..3.0);
        let b: Vec<f64> = draw(&mut rng, (pair / 3) % 3).iter().map(|v| shift + scale * v).collect();
        let r = ucl_w2(&a, &b, &params).unwrap();
        if r.ucl < r.point_estimate {
            unsound += 1;
        }
        if pair % 4 == 0 {
            let d = rng.random_range(1..=5);
            let schema = numeric_schema(d, 1e6);
            let x = Cohort::new(schema.clone(), (0..n * d).map(|i| a[i % n] + 0.1 * i as f64 / n as f64).collect()).unwrap();
            let y = Cohort::new(schema, (0..n * d).map(|i| b[i % n]).collect()).unwrap();
            let proj = sample_projections(d, 10, pair).unwrap();
            let s = ucl_sw2(&x, &y, &proj, &params).unwrap();
            if s.ucl < s.point_estimate {
                unsound += 1;
            }
        }
    }

    // Coverage of the population cost between N(0, 1) and N(0.5, 1.5^2).
    let (mu, sigma) = (0.5, 1.5);
    let full = mu * mu + (sigma - 1.0f64).powi(2);
    let std = Normal::new(0.0, 1.0).unwrap();
    let c = std.inverse_cdf(1.0 - params.delta);
    let trimmed_m2 = 1.0 - 2.0 * c * std.pdf(c) / (1.0 - 2.0 * params.delta);
    let trimmed = mu * mu + (sigma - 1.0f64).powi(2) * trimmed_m2;
    let (mut cover_full, mut cover_trimmed) = (0, 0);
    for rep in 0..500u64 {
        let mut rng = stream_rng(&[rep, 9]);
        let a = normals(&mut rng, 200);
        let b: Vec<f64> = normals(&mut rng, 200).iter().map(|v| mu + sigma * v).collect();
        let u = ucl_w2(&a, &b, &params).unwrap().ucl;
        cover_full += usize::from(u >= full);
        cover_trimmed += usize::from(u >= trimmed);
    }
    let rate = cover_full as f64 / 500.0;
    let needed = 1.0 - params.alpha / 2.0 - 0.03;
    let t = start.elapsed();
    outcome(
        unsound == 0 && rate >= needed && within(t, 120),
        format!(
            "{unsound} unsound pairs; coverage of W2^2 = {full:.3}: {rate:.3} (need {needed:.3}), of the trimmed cost {trimmed:.3}: {:.3}; {t:.2?}",
            cover_trimmed as f64 / 500.0
        ),
    )
}

fn end_to_end_case(task: &SynthTask) -> (bool, String) {
    let cfg = SolverConfig {
        u_x: 0.5,
        u_y: 0.05,
        k: 10,
        h: 3,
        candidates: 32,
        max_iterations: 200,
        optimizer: Optimizer::MonteCarlo,
        ..SolverConfig::default()
    };
    let pool = rayon::ThreadPoolBuilder::new().num_threads(1).build().unwrap();
    let start = Instant::now();
    let report = pool.install(|| solve(&task.factual, &task.target, &task.model, cfg.clone())).unwrap();
    let t = start.elapsed();
    let initial = w2_1d(&task.factual_outputs, &task.target).unwrap().0;
    let outputs = report.outputs.as_ref().unwrap_or(&report.last_outputs);
    let last = w2_1d(outputs, &task.target).unwrap().0;
    let fs = &report.final_state;
    let pass = report.certified && last <= 0.2 * initial && fs.ucl_sw <= cfg.u_x && within(t, 60);
    (
        pass,
        format!(
            "certified={}, ot_y_sq {initial:.3} -> {last:.3}, ucl_sw {:.3}, ucl_w {:.3}, {t:.1?}",
            report.certified, fs.ucl_sw, fs.ucl_w
        ),
    )
}

fn end_to_end() -> Outcome {
    let linear = generate(&SynthSpec::new(TWO_GAUSSIANS_LINEAR, 500, 7)).unwrap();
    let stumps = generate(&SynthSpec::new(TWO_GAUSSIANS_LINEAR, 500, 7).with_predictor(ModelKind::StumpEnsemble)).unwrap();
    let (a, da) = end_to_end_case(&linear);
    let (b, db) = end_to_end_case(&stumps);
    outcome(a && b, format!("linear: {da}; stumps: {db}"))
}

fn guided_vs_unguided() -> Outcome {
    let run = |phi: f64| -> (f64, f64) {
        let (mut q, mut var) = (0.0, 0.0);
        for seed in 0..10u64 {
            let task = generate(&SynthSpec::new(MIXED_TYPE_STUMPS, 200, seed)).unwrap();
            let mut cfg = SolverConfig { k: 5, h: 3, candidates: 16, max_iterations: 100, seed, ..SolverConfig::default() };
            cfg.cone.phi = phi;
            let report = solve(&task.factual, &task.target, &task.model, cfg).unwrap();
            let fs = &report.final_state;
            q += combined(fs.q_x, fs.q_y, fs.eta);
            let qx: Vec<f64> = report.trajectory.iter().map(|r| r.q_x).collect();
            let mean = qx.iter().sum::<f64>() / qx.len() as f64;
            var += qx.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / qx.len() as f64;
        }
        (q / 10.0, var / 10.0)
    };
    let (gq, gv) = run(std::f64::consts::FRAC_PI_4);
    let (uq, uv) = run(std::f64::consts::PI);
    outcome(
        gq <= uq && gv < uv,
        format!("mean final Q guided {gq:.4} vs unguided {uq:.4}; mean Q_x variance {gv:.2e} vs {uv:.2e}"),
    )
}

fn cli(args: &[&str]) -> std::process::Output {
    Command::new(env!("CARGO_BIN_EXE_discover")).args(args).output().unwrap()
}

fn edit_config(path: &Path, f: impl FnOnce(&mut Value)) {
    let mut cfg: Value = serde_json::from_str(&std::fs::read_to_string(path).unwrap()).unwrap();
    f(&mut cfg);
    std::fs::write(path, serde_json::to_string_pretty(&cfg).unwrap()).unwrap();
}

fn determinism() -> Outcome {
    let dir = tempfile::TempDir::new().unwrap();
    let cases = [
        ("linear-mc", json!({"generator": TWO_GAUSSIANS_LINEAR, "n": 200, "seed": 1, "shift": 0.1}), None),
        ("stumps-genetic", json!({"generator": MIXED_TYPE_STUMPS, "n": 200, "seed": 2, "shift": 0.5}), Some("genetic")),
    ];
    let mut notes = Vec::new();
    let mut pass = true;
    for (name, spec, optimizer) in cases {
        let task = dir.path().join(name);
        let spec_path = dir.path().join(format!("{name}.json"));
        std::fs::write(&spec_path, spec.to_string()).unwrap();
        assert!(cli(&["synthesize", "--spec", spec_path.to_str().unwrap(), "--out", task.to_str().unwrap()]).status.success());
        let config = task.join("config.json");
        edit_config(&config, |cfg| {
            cfg["solver"]["max_iterations"] = json!(40);
            if let Some(o) = optimizer {
                cfg["solver"]["optimizer"] = json!(o);
            }
        });
        let mut runs = Vec::new();
        for threads in ["1", "2"] {
            let out = cli(&["solve", "--config", config.to_str().unwrap(), "--threads", threads, "--seed", "11"]);
            let code = out.status.code().unwrap();
            assert!(code == 0 || code == 3, "{}", String::from_utf8_lossy(&out.stderr));
            let read = |f: &str| std::fs::read(task.join("out").join(f)).unwrap();
            runs.push((read("trajectory.csv"), read("report.json")));
        }
        let same = runs[0] == runs[1];
        pass &= same;
        notes.push(format!("{name}: {}", if same { "identical" } else { "DIFFERENT" }));
    }
    outcome(pass, format!("{} (threads 1 vs 2)", notes.join(", ")))
}

fn incremental_equivalence() -> Outcome {
    let mut worst: f64 = 0.0;
    let mut steps = 0;
    for generator in [TWO_GAUSSIANS_LINEAR, MIXED_TYPE_STUMPS] {
        let task = generate(&SynthSpec::new(generator, 120, 5)).unwrap();
        let schema = task.schema().clone();
        let d = schema.len();
        let cfg = SolverConfig { k: 6, candidates: 8, seed: 5, ..SolverConfig::default() };
        let mut solver = Solver::new(&task.factual, &task.target, &task.model, cfg).unwrap();
        let mut rng = stream_rng(&[10]);
        for _ in 0..50 {
            let current = solver.current();
            let mut candidates = vec![Candidate::default()];
            for _ in 0..4 {
                let mut rows: Vec<usize> = (0..current.n()).collect();
                rows.shuffle(&mut rng);
                rows.truncate(rng.random_range(1..=8));
                rows.sort_unstable();
                let edits = rows
                    .into_iter()
                    .map(|i| {
                        let mut r = current.row(i).to_vec();
                        let fresh = random_row(&schema, &mut rng);
                        for p in schema.actionable() {
                            if rng.random_bool(0.5) {
                                r[p] = fresh[p];
                            }
                        }
                        (i, r)
                    })
                    .collect();
                candidates.push(Candidate { edits });
            }
            let batch = CandidateBatch { candidates };
            let eta = rng.random_range(0.0..=1.0);
            let scores = solver.score_candidates(&batch, eta).unwrap();
            for (c, s) in batch.candidates.iter().zip(&scores) {
                let mut values = current.values().to_vec();
                c.apply(&mut values, d);
                let x = Cohort::new(schema.clone(), values).unwrap();
                let (q, qx, qy) = objective_from_scratch(&x, &task.factual, &task.target, &task.model, solver.projections(), eta).unwrap();
                for (a, b) in [(s.q, q), (s.q_x, qx), (s.q_y, qy)] {
                    worst = worst.max((a - b).abs() / b.abs().max(1e-12));
                }
                let edited: Vec<f64> = c.edits.iter().flat_map(|(_, r)| r.iter().copied()).collect();
                let direct = checked_predict(&task.model, &edited, d).unwrap();
                assert_eq!(direct, s.edited_outputs);
            }
            steps += 1;
            solver.step().unwrap();
        }
    }
    outcome(worst <= 1e-10, format!("{steps} steps, worst relative error {worst:.2e}"))
}

fn report(name: &str, f: impl FnOnce() -> Outcome) -> bool {
    let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|e| {
        let msg = e
            .downcast_ref::<String>()
            .cloned()
            .or_else(|| e.downcast_ref::<&str>().map(|s| s.to_string()))
            .unwrap_or_default();
        outcome(false, format!("panicked: {msg}"))
    });
    println!("{} {name}: {}", if result.pass { "PASS" } else { "FAIL" }, result.detail);
    result.pass
}

fn main() {
    // `cargo test -- --list` and friends pass harness flags we do not use.
    if std::env::args().any(|a| a == "--list") {
        return;
    }
    let mut passed = Vec::new();
    passed.push(report("decomposition exactness", decomposition));
    let traj = catch_unwind(trajectory_checks).ok();
    let missing = || outcome(false, "trajectory run panicked");
    passed.push(report("monotonicity", || traj.as_ref().map_or_else(missing, monotonicity)));
    passed.push(report("1D transport oracle", ot_oracle));
    passed.push(report("guidance finite differences", guidance_fd));
    passed.push(report("cone containment and law", cone_law));
    passed.push(report("categorical decode law", decode_law));
    passed.push(report("confidence limit soundness and coverage", ucl_soundness));
    passed.push(report("sparsity budget", || traj.as_ref().map_or_else(missing, sparsity)));
    passed.push(report("end-to-end synthetic recourse", end_to_end));
    passed.push(report("guided vs unguided", guided_vs_unguided));
    passed.push(report("determinism across thread counts", determinism));
    passed.push(report("incremental evaluation equivalence", incremental_equivalence));
    let failed = passed.iter().filter(|p| !**p).count();
    println!("\nacceptance: {} passed, {failed} failed", passed.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
