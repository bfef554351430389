//! Input-side guidance: the gradient of the sliced transport cost to the
//! factual cohort with the per-projection plans held fixed, evaluated only on
//! the rows that may be edited.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::tabular::Cohort;
use crate::transport::ProjectionSet;

#[derive(Debug, Clone, PartialEq)]
pub struct GuidanceField {
    vectors: BTreeMap<usize, Vec<f64>>,
}

impl GuidanceField {
    pub fn rows(&self) -> impl Iterator<Item = usize> + '_ {
        self.vectors.keys().copied()
    }

    pub fn get(&self, row: usize) -> Option<&[f64]> {
        self.vectors.get(&row).map(Vec::as_slice)
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.vectors.values().all(|g| g.iter().all(|&v| v == 0.0))
    }
}

/// `g_i = 2/(N n) sum_k theta_k (theta_k . x_i - theta_k . x'_{sigma_k(i)})` for `i` in `rows`.
pub fn guidance(
    x: &Cohort,
    xp: &Cohort,
    proj: &ProjectionSet,
    plans: &[Vec<usize>],
    rows: &[usize],
) -> Result<GuidanceField> {
    if let Some(&bad) = rows.iter().find(|&&i| i >= x.n()) {
        return Err(Error::Argument(format!("guidance row {bad} out of range (n = {})", x.n())));
    }
    if plans.len() != proj.len() || plans.iter().any(|p| p.len() != x.n()) || xp.n() != x.n() {
        return Err(Error::Argument("guidance plans do not match cohorts".into()));
    }
    let xp_proj = proj.project(xp.values());
    Ok(guidance_sparse(x.values(), &xp_proj, proj, plans, rows))
}

/// Same field from row-major `x` values and cached factual projections; the
/// current rows are projected only for the requested indices.
pub(crate) fn guidance_sparse(
    x_values: &[f64],
    xp_proj: &[Vec<f64>],
    proj: &ProjectionSet,
    plans: &[Vec<usize>],
    rows: &[usize],
) -> GuidanceField {
    let d = proj.dim();
    let n = xp_proj.first().map_or(0, Vec::len);
    let scale = 2.0 / (proj.len() as f64 * n as f64);
    let mut vectors = BTreeMap::new();
    for &i in rows {
        let xi = &x_values[i * d..(i + 1) * d];
        let mut g = vec![0.0; d];
        for (k, th) in proj.directions().enumerate() {
            let resid = crate::transport::dot(th, xi) - xp_proj[k][plans[k][i]];
            for (gp, t) in g.iter_mut().zip(th) {
                *gp += t * resid;
            }
        }
        g.iter_mut().for_each(|v| *v *= scale);
        vectors.insert(i, g);
    }
    GuidanceField { vectors }
}
