//! Metrics between a factual and an edited cohort, plus the CSV exports.

use discover::metrics::{evaluate, export_cdf};
use discover::synth::{generate, SynthSpec, TWO_GAUSSIANS_LINEAR};
use discover::transport::sample_projections;
use discover::{solve, SolverConfig};

fn main() -> discover::Result<()> {
    let mut spec = SynthSpec::new(TWO_GAUSSIANS_LINEAR, 200, 2);
    spec.shift = 0.1;
    let task = generate(&spec)?;
    let config = SolverConfig { u_y: 0.2, k: 10, max_iterations: 60, ..SolverConfig::default() };
    let report = solve(&task.factual, &task.target, &task.model, config.clone())?;
    let outputs = report.outputs.as_ref().unwrap_or(&report.last_outputs);
    let cohort = report.cohort.as_ref().unwrap_or(&report.last_iterate);

    let proj = sample_projections(task.factual.d(), config.projections, config.seed)?;
    let m = evaluate(&task.factual, cohort, outputs, &task.target, &proj)?;
    // MMD is the unbiased estimate clipped at zero; with few rows edited it is usually 0.
    println!("certified {}: OT(x) {:.4}, OT(y) {:.4}, MMD {:.4}", report.certified, m.ot_x, m.ot_y, m.mmd);
    for (row, cost) in m.sorted_profile().into_iter().take(5) {
        println!("  row {row:3} carries {cost:.2e} of OT(x)^2");
    }

    let dir = std::env::temp_dir().join("discover-metrics-example");
    std::fs::create_dir_all(&dir)?;
    m.save_json(dir.join("metrics.json"))?;
    m.export_profile(dir.join("otx_profile.csv"))?;
    export_cdf(&task.factual_outputs, dir.join("cdf_factual.csv"))?;
    export_cdf(outputs, dir.join("cdf_counterfactual.csv"))?;
    export_cdf(&task.target, dir.join("cdf_target.csv"))?;
    println!("wrote metrics and CDFs to {}", dir.display());
    Ok(())
}
