//! Evaluation metrics for a counterfactual cohort.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::objective::row_scores_input;
use crate::tabular::{Cohort, FeatureKind};
use crate::transport::{sw2, w2_1d, ProjectionSet};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub ot_x: f64,
    pub ot_x_sq: f64,
    pub ot_y: f64,
    pub ot_y_sq: f64,
    pub mmd: f64,
    pub n: usize,
    pub d: usize,
    #[serde(rename = "N_projections")]
    pub n_projections: usize,
    pub seed: u64,
    /// Input-side transport contribution of each row (sums to `ot_x_sq`).
    #[serde(skip)]
    pub per_sample_otx: Vec<f64>,
}

impl MetricsReport {
    pub fn save_json(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string_pretty(self)? + "\n")?;
        Ok(())
    }

    /// Per-row input-side costs sorted descending, with the original row index.
    pub fn sorted_profile(&self) -> Vec<(usize, f64)> {
        let mut v: Vec<(usize, f64)> = self.per_sample_otx.iter().copied().enumerate().collect();
        v.sort_by(|a, b| b.1.total_cmp(&a.1).then(a.0.cmp(&b.0)));
        v
    }

    /// Writes `rank,row,otx,top10` with rows sorted by decreasing cost.
    pub fn export_profile(&self, path: impl AsRef<Path>) -> Result<()> {
        let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
        writeln!(w, "rank,row,otx,top10")?;
        for (rank, (row, v)) in self.sorted_profile().into_iter().enumerate() {
            writeln!(w, "{},{},{},{}", rank + 1, row, v, rank < 10)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Input/output transport metrics plus MMD between `x` and `xp`.
///
/// `mmd` needs two rows per cohort; with fewer it is reported as 0.
pub fn evaluate(x: &Cohort, xp: &Cohort, y: &[f64], ystar: &[f64], proj: &ProjectionSet) -> Result<MetricsReport> {
    let (ot_x_sq, plans) = sw2(x, xp, proj)?;
    let per_sample_otx = row_scores_input(x, xp, proj, &plans)?;
    let (ot_y_sq, _) = w2_1d(y, ystar)?;
    let mmd_value = if x.n() >= 2 { mmd(x, xp)? } else { 0.0 };
    Ok(MetricsReport {
        ot_x: ot_x_sq.sqrt(),
        ot_x_sq,
        ot_y: ot_y_sq.sqrt(),
        ot_y_sq,
        mmd: mmd_value,
        n: x.n(),
        d: x.d(),
        n_projections: proj.len(),
        seed: proj.seed(),
        per_sample_otx,
    })
}

/// Feature map for the kernel: numerical columns standardized with pooled
/// statistics, categorical columns one-hot.
fn embed(a: &Cohort, b: &Cohort) -> (Vec<Vec<f64>>, Vec<Vec<f64>>) {
    let schema = a.schema();
    let total = (a.n() + b.n()) as f64;
    let mut stats = Vec::with_capacity(schema.len());
    for (p, f) in schema.features().iter().enumerate() {
        if let FeatureKind::Numerical { .. } = f.kind {
            // Sorted so the statistics do not depend on which cohort comes first.
            let mut col: Vec<f64> = a.rows().chain(b.rows()).map(|r| r[p]).collect();
            col.sort_unstable_by(f64::total_cmp);
            let mean = col.iter().sum::<f64>() / total;
            let var = col.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / total;
            let sd = var.sqrt();
            stats.push((mean, if sd > 0.0 { sd } else { 1.0 }));
        } else {
            stats.push((0.0, 1.0));
        }
    }
    let map = |c: &Cohort| -> Vec<Vec<f64>> {
        c.rows()
            .map(|r| {
                let mut out = Vec::new();
                for (p, f) in schema.features().iter().enumerate() {
                    match &f.kind {
                        FeatureKind::Numerical { .. } => out.push((r[p] - stats[p].0) / stats[p].1),
                        FeatureKind::Categorical { levels, .. } => {
                            out.extend((0..levels.len()).map(|l| if l == r[p] as usize { 1.0 } else { 0.0 }))
                        }
                    }
                }
                out
            })
            .collect()
    };
    (map(a), map(b))
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Unbiased MMD with a Gaussian kernel whose bandwidth is the median pairwise
/// distance of the pooled sample; the squared estimate is clipped at zero
/// before the square root.
pub fn mmd(a: &Cohort, b: &Cohort) -> Result<f64> {
    if a.schema().as_ref() != b.schema().as_ref() {
        return Err(Error::Argument("MMD needs cohorts with the same schema".into()));
    }
    if a.n() < 2 || b.n() < 2 {
        return Err(Error::Argument(format!("MMD needs at least 2 rows per cohort, got {} and {}", a.n(), b.n())));
    }
    let (ea, eb) = embed(a, b);
    let pooled: Vec<&Vec<f64>> = ea.iter().chain(&eb).collect();
    let mut dists = Vec::with_capacity(pooled.len() * (pooled.len() - 1) / 2);
    for i in 0..pooled.len() {
        for j in i + 1..pooled.len() {
            dists.push(sq_dist(pooled[i], pooled[j]).sqrt());
        }
    }
    let mid = dists.len() / 2;
    let (_, median, _) = dists.select_nth_unstable_by(mid, f64::total_cmp);
    let bandwidth = *median;
    if bandwidth == 0.0 {
        return Ok(0.0);
    }
    let gamma = 1.0 / (2.0 * bandwidth * bandwidth);
    let k = |x: &[f64], y: &[f64]| (-gamma * sq_dist(x, y)).exp();

    let within = |e: &[Vec<f64>]| {
        let mut s = 0.0;
        for i in 0..e.len() {
            for j in i + 1..e.len() {
                s += k(&e[i], &e[j]);
            }
        }
        2.0 * s / (e.len() * (e.len() - 1)) as f64
    };
    // Row sums in a fixed orientation so the estimate is symmetric in (a, b).
    let cross = |p: &[Vec<f64>], q: &[Vec<f64>]| {
        let mut terms: Vec<f64> = p.iter().flat_map(|x| q.iter().map(move |y| k(x, y))).collect();
        terms.sort_unstable_by(f64::total_cmp);
        terms.iter().sum::<f64>() / (p.len() * q.len()) as f64
    };
    let mmd2 = within(&ea) + within(&eb) - 2.0 * cross(&ea, &eb);
    Ok(mmd2.max(0.0).sqrt())
}

/// Two-column CSV `value,cdf` of the empirical distribution function.
pub fn export_cdf(values: &[f64], path: impl AsRef<Path>) -> Result<()> {
    let mut w = std::io::BufWriter::new(std::fs::File::create(path)?);
    write_cdf(values, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn write_cdf<W: Write>(values: &[f64], w: &mut W) -> Result<()> {
    if values.is_empty() {
        return Err(Error::Argument("CDF export needs at least one value".into()));
    }
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    let n = s.len() as f64;
    writeln!(w, "value,cdf")?;
    for (i, v) in s.iter().enumerate() {
        writeln!(w, "{},{}", v, (i + 1) as f64 / n)?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{Feature, Schema};
    use std::sync::Arc;

    #[test]
    fn cdf_rows() {
        let mut buf = Vec::new();
        write_cdf(&[3.0, 1.0, 2.0], &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "value,cdf");
        assert_eq!(lines[1], format!("1,{}", 1.0 / 3.0));
        assert_eq!(lines[3], "3,1");
        assert!(write_cdf(&[], &mut Vec::new()).is_err());
    }

    #[test]
    fn mmd_identity_and_symmetry() {
        let schema = Arc::new(
            Schema::new(vec![Feature::numerical("a", -10.0, 10.0), Feature::categorical("c", ["p", "q", "r"])]).unwrap(),
        );
        let a = Cohort::from_rows(schema.clone(), &(0..20).map(|i| vec![(i as f64).sin() * 3.0, (i % 3) as f64]).collect::<Vec<_>>()).unwrap();
        let b = Cohort::from_rows(schema.clone(), &(0..15).map(|i| vec![(i as f64).cos() + 2.0, (i % 2) as f64]).collect::<Vec<_>>()).unwrap();
        assert_eq!(mmd(&a, &a).unwrap(), 0.0);
        assert_eq!(mmd(&a, &b).unwrap(), mmd(&b, &a).unwrap());
        assert!(mmd(&a, &b).unwrap() > 0.0);
        let one = Cohort::from_rows(schema, &[vec![0.0, 0.0]]).unwrap();
        assert!(mmd(&one, &a).is_err());
    }
}
