//! Per-row impact scores, the top-k gate and the balance-weight schedule.

use std::sync::Arc;

use discover::objective::{balance_eta, combine, narrow_interval, row_scores_input, row_scores_output, top_k, EtaState};
use discover::tabular::{Cohort, Feature, Schema};
use discover::transport::{sample_projections, sw2, w2_1d};

fn main() -> discover::Result<()> {
    let schema = Arc::new(Schema::new(vec![Feature::numerical("a", -5.0, 5.0), Feature::numerical("b", -5.0, 5.0)])?);
    let xp = Cohort::from_rows(schema.clone(), &[vec![0.0, 0.0], vec![1.0, 1.0], vec![2.0, 0.0], vec![0.0, 2.0]])?;
    // Row 2 has moved far from the factual cohort.
    let x = Cohort::from_rows(schema, &[vec![0.0, 0.1], vec![1.0, 1.0], vec![4.5, -2.0], vec![0.0, 2.0]])?;
    let y = [0.1, 0.9, 2.5, 0.4];
    let ystar = [1.0, 1.0, 1.0, 1.0];

    let proj = sample_projections(2, 64, 3)?;
    let (qx, plans) = sw2(&x, &xp, &proj)?;
    let (qy, plan_y) = w2_1d(&y, &ystar)?;
    let scores = combine(row_scores_input(&x, &xp, &proj, &plans)?, row_scores_output(&y, &ystar, &plan_y)?, 0.4)?;
    println!("Q_x = {qx:.4}, Q_y = {qy:.4}, Q(eta=0.4) = {:.4}", 0.6 * qx + 0.4 * qy);
    println!("row scores {:?} sum to {:.4}", scores.q.iter().map(|v| (v * 1e4).round() / 1e4).collect::<Vec<_>>(), scores.total());
    println!("top-2 rows: {:?}", top_k(&scores.q, 2)?);

    // Input side inside its bound, output side violated: weight moves to the output side.
    let mut state = EtaState::default();
    for t in 1..=5 {
        let eta = balance_eta(0.3, -0.2, &state);
        state = narrow_interval(eta, &state);
        println!("iteration {t}: eta = {eta:.3}, interval [{:.3}, {:.3}]", state.lower, state.upper);
    }
    Ok(())
}
