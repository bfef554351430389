//! Exact 1D transport and the sliced cost between two cohorts.

use std::sync::Arc;

use discover::tabular::{Cohort, Feature, Schema};
use discover::transport::{sample_projections, sw2, w2_1d};

fn main() -> discover::Result<()> {
    let a = [3.0, -1.0, 0.5, 2.0];
    let b = [0.0, 1.0, 2.0, 3.0];
    let (cost, plan) = w2_1d(&a, &b)?;
    println!("W2^2 = {cost}; plan (a[i] -> b[plan[i]]) = {plan:?}");

    // A pure shift costs exactly the squared shift.
    let shifted: Vec<f64> = a.iter().map(|v| v + 0.3).collect();
    println!("shift by 0.3: {:.12}", w2_1d(&a, &shifted)?.0);

    let schema = Arc::new(Schema::new((0..3).map(|p| Feature::numerical(format!("x{p}"), -10.0, 10.0)).collect())?);
    let x = Cohort::from_rows(schema.clone(), &[vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 0.0], vec![0.0, 2.0, 1.0]])?;
    let xp = Cohort::from_rows(schema, &[vec![0.0, 0.0, 1.0], vec![1.0, 1.0, 0.0], vec![0.5, 2.0, 1.0]])?;
    for n_proj in [1, 10, 100, 1000] {
        let proj = sample_projections(3, n_proj, 0)?;
        let (cost, plans) = sw2(&x, &xp, &proj)?;
        println!("SW^2 with {n_proj:4} directions = {cost:.5} (first plan {:?})", plans[0]);
    }
    Ok(())
}
