//! Guidance field from the input-side transport and cone proposals around it.

use std::sync::Arc;

use discover::guidance::guidance;
use discover::proposals::{build_embeddings, cone_direction, monte_carlo_propose, stream_rng, ConeParams, ProposalContext};
use discover::tabular::{Cohort, Feature, Schema};
use discover::transport::{sample_projections, sw2};

fn main() -> discover::Result<()> {
    let mut rng = stream_rng(&[1]);
    let anchor = [1.0, 0.0, 0.0];
    for phi in [0.0, std::f64::consts::FRAC_PI_6, std::f64::consts::PI] {
        let v = cone_direction(&anchor, phi, &mut rng);
        println!("phi = {phi:.3}: direction {:?}, angle {:.3}", v.iter().map(|a| (a * 1e3).round() / 1e3).collect::<Vec<_>>(), v[0].clamp(-1.0, 1.0).acos());
    }

    let schema = Arc::new(Schema::new(vec![
        Feature::numerical("a", -5.0, 5.0),
        Feature::numerical("b", -5.0, 5.0),
        Feature::categorical("c", ["p", "q", "r"]),
    ])?);
    let xp = Cohort::from_rows(schema.clone(), &[vec![0.0, 0.0, 0.0], vec![1.0, 0.0, 1.0], vec![0.0, 1.0, 2.0]])?;
    let x = Cohort::from_rows(schema.clone(), &[vec![0.0, 0.0, 0.0], vec![3.0, 0.0, 1.0], vec![0.0, 1.0, 2.0]])?;
    let proj = sample_projections(3, 100, 0)?;
    let (_, plans) = sw2(&x, &xp, &proj)?;
    let rows = [1];
    let field = guidance(&x, &xp, &proj, &plans, &rows)?;
    println!("guidance on row 1: {:?} (moving along -g reduces the input cost)", field.get(1).unwrap());

    let tables = build_embeddings(&schema, 0);
    let cone = ConeParams::default();
    let ctx = ProposalContext { schema: &schema, values: x.values(), rows: &rows, guidance: &field, cone: &cone, h: 2, tables: &tables, seed: 0, iteration: 1 };
    for (m, c) in monte_carlo_propose(&ctx, 4).candidates.iter().enumerate() {
        println!("candidate {m}: {:?}", c.edits);
    }
    Ok(())
}
