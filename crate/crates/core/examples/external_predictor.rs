//! A predictor in a child process. The example re-runs itself with `--serve`
//! to act as the model server, then solves against it.

use std::io::BufReader;

use discover::predict::{serve, ExternalPredictor};
use discover::synth::{generate, SynthSpec, MIXED_TYPE_STUMPS};
use discover::{solve, SolverConfig};

fn task() -> discover::Result<discover::synth::SynthTask> {
    generate(&SynthSpec::new(MIXED_TYPE_STUMPS, 120, 3))
}

fn main() -> discover::Result<()> {
    if std::env::args().any(|a| a == "--serve") {
        let model = task()?.model;
        let code = serve(&model, BufReader::new(std::io::stdin().lock()), std::io::stdout().lock())?;
        std::process::exit(code);
    }
    let task = task()?;
    let me = std::env::current_exe()?.to_string_lossy().into_owned();
    let external = ExternalPredictor::spawn(&[me, "--serve".into()])?;
    println!("server pid {:?}", external.process_ids());

    let config = SolverConfig { k: 5, candidates: 16, max_iterations: 20, ..SolverConfig::default() };
    let remote = solve(&task.factual, &task.target, &external, config.clone())?;
    let local = solve(&task.factual, &task.target, &task.model, config)?;
    let same = remote.trajectory.iter().zip(&local.trajectory).all(|(a, b)| a.q == b.q && a.chosen_candidate == b.chosen_candidate);
    println!("final Q_y remote {:.5} local {:.5}; trajectories identical: {same}", remote.final_state.q_y, local.final_state.q_y);
    Ok(())
}
