//! Confidence limits on the transport costs and how they tighten with n.

use std::sync::Arc;

use discover::proposals::stream_rng;
use discover::tabular::{Cohort, Feature, Schema};
use discover::transport::{dkw_halfwidth, sample_projections, ucl_sw2, ucl_w2, UclParams};
use rand::Rng;
use rand_distr::StandardNormal;

fn main() -> discover::Result<()> {
    let params = UclParams::default();
    println!("   n  band    W2^2 point  W2^2 ucl   SW^2 point  SW^2 ucl");
    for n in [50, 200, 1000, 5000] {
        let mut rng = stream_rng(&[n as u64]);
        let mut draw = |shift: f64| -> Vec<f64> { (0..n).map(|_| shift + rng.sample::<f64, _>(StandardNormal)).collect() };
        let (y, ystar) = (draw(0.0), draw(0.2));
        let w = ucl_w2(&y, &ystar, &params)?;

        let schema = Arc::new(Schema::new((0..2).map(|p| Feature::numerical(format!("x{p}"), -10.0, 10.0)).collect())?);
        let x = Cohort::new(schema.clone(), draw(0.0).into_iter().chain(draw(0.0)).collect())?;
        let xp = Cohort::new(schema, draw(0.1).into_iter().chain(draw(0.1)).collect())?;
        let proj = sample_projections(2, 50, 1)?;
        let s = ucl_sw2(&x, &xp, &proj, &params)?;
        println!(
            "{n:5}  {:.3}   {:.4}      {:.4}     {:.4}      {:.4}",
            dkw_halfwidth(n, params.alpha),
            w.point_estimate,
            w.ucl,
            s.point_estimate,
            s.ucl
        );
    }
    let bound = 0.05;
    let (y, ystar) = (vec![0.0; 4000], vec![0.0; 4000]);
    println!("identical samples of 4000 certify under {bound}: {}", ucl_w2(&y, &ystar, &params)?.ucl <= bound);
    Ok(())
}
