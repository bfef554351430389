//! Stepping the solver by hand on the mixed-type task with the genetic optimizer.

use discover::solver::Optimizer;
use discover::synth::{generate, SynthSpec, MIXED_TYPE_STUMPS};
use discover::{Solver, SolverConfig};

fn main() -> discover::Result<()> {
    let mut spec = SynthSpec::new(MIXED_TYPE_STUMPS, 300, 1);
    spec.shift = 0.3;
    let task = generate(&spec)?;
    let config = SolverConfig {
        u_y: 0.3,
        k: 8,
        candidates: 24,
        optimizer: Optimizer::Genetic,
        p_mut: 0.3,
        elite_size: 4,
        ..SolverConfig::default()
    };
    let mut solver = Solver::new(&task.factual, &task.target, &task.model, config)?;
    for _ in 0..60 {
        let r = solver.step()?;
        if r.iteration % 10 == 0 {
            println!(
                "t={:2} Q={:.4} ucl_sw={:.4} ucl_w={:.4} eta={:.2} edited {:?} (candidate {})",
                r.iteration, r.q, r.ucl_sw, r.ucl_w, r.eta, r.edited_rows, r.chosen_candidate
            );
        }
    }
    let cert = solver.certify_current();
    println!("after {} iterations: certified = {} (ucl_sw {:.4}, ucl_w {:.4})", solver.iteration(), cert.feasible, cert.ucl_sw, cert.ucl_w);
    Ok(())
}
