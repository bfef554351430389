//! Soft-min decoding of a perturbed embedding back to a level.

use discover::proposals::{build_embeddings, decode_level, stream_rng};
use discover::tabular::{Feature, Schema};

fn main() -> discover::Result<()> {
    let schema = Schema::new(vec![Feature::categorical("sector", ["retail", "industry", "services", "public"])])?;
    let tables = build_embeddings(&schema, 42);
    let table = tables.get(0).unwrap();
    println!("{} levels embedded in {} dimensions", table.levels(), table.dim());

    // Halfway between retail and industry, nudged toward industry.
    let z: Vec<f64> = table.embedding(0).iter().zip(table.embedding(1)).map(|(a, b)| 0.45 * a + 0.55 * b).collect();
    let levels = [0, 1, 2, 3];
    let mut rng = stream_rng(&[9]);
    for tau in [1e-9, 0.1, 1.0, 100.0] {
        let mut counts = [0usize; 4];
        for _ in 0..10_000 {
            counts[decode_level(table, &z, &levels, tau, &mut rng)] += 1;
        }
        println!("tau = {tau:>6}: frequencies {:?}", counts.map(|c| c as f64 / 1e4));
    }
    Ok(())
}
