//! Empirical one-dimensional and sliced squared Wasserstein costs, their
//! sorting-based transport plans, and trimmed quantile-band upper confidence
//! limits.
//!
//! Every cost here is a *squared* transport cost between two equal-size
//! empirical samples with uniform weights `1/n`. In one dimension the optimal
//! coupling is the monotone rearrangement, so a plan is just a permutation
//! obtained by sorting both samples.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::Cohort;

/// Random unit directions used to slice `d`-dimensional samples.
#[derive(Debug, Clone, PartialEq)]
pub struct ProjectionSet {
    directions: Vec<f64>,
    d: usize,
    seed: u64,
}

/// Draws `count` i.i.d. directions uniform on the unit sphere in `R^d`.
pub fn sample_projections(d: usize, count: usize, seed: u64) -> Result<ProjectionSet> {
    if d == 0 || count == 0 {
        return Err(Error::Argument(format!(
            "projection set needs d >= 1 and N >= 1, got d={d}, N={count}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut directions = Vec::with_capacity(d * count);
    let mut v = vec![0.0; d];
    for _ in 0..count {
        loop {
            for x in v.iter_mut() {
                *x = StandardNormal.sample(&mut rng);
            }
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            if norm > 1e-12 {
                directions.extend(v.iter().map(|x| x / norm));
                break;
            }
        }
    }
    Ok(ProjectionSet { directions, d, seed })
}

impl ProjectionSet {
    /// Builds a set from explicit directions, normalizing each one.
    pub fn from_directions(directions: &[Vec<f64>]) -> Result<Self> {
        let d = directions.first().map_or(0, Vec::len);
        if d == 0 {
            return Err(Error::Argument("projection set needs at least one non-empty direction".into()));
        }
        let mut flat = Vec::with_capacity(d * directions.len());
        for (k, dir) in directions.iter().enumerate() {
            if dir.len() != d {
                return Err(Error::Argument(format!("direction {k} has length {}, expected {d}", dir.len())));
            }
            let norm = dir.iter().map(|x| x * x).sum::<f64>().sqrt();
            if !(norm > 0.0 && norm.is_finite()) {
                return Err(Error::Argument(format!("direction {k} has zero or non-finite norm")));
            }
            flat.extend(dir.iter().map(|x| x / norm));
        }
        Ok(Self {
            directions: flat,
            d,
            seed: 0,
        })
    }

    pub fn len(&self) -> usize {
        self.directions.len() / self.d
    }

    pub fn is_empty(&self) -> bool {
        self.directions.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn direction(&self, k: usize) -> &[f64] {
        &self.directions[k * self.d..(k + 1) * self.d]
    }

    pub fn directions(&self) -> impl Iterator<Item = &[f64]> {
        self.directions.chunks_exact(self.d)
    }

    /// `theta_k . row` for every direction.
    pub fn project_row(&self, row: &[f64]) -> Vec<f64> {
        self.directions().map(|th| dot(th, row)).collect()
    }

    /// Projects row-major `values` (width `d`) onto every direction; returns
    /// one vector of `n` projected scalars per direction.
    pub fn project(&self, values: &[f64]) -> Vec<Vec<f64>> {
        let rows: Vec<&[f64]> = values.chunks_exact(self.d).collect();
        self.directions()
            .collect::<Vec<_>>()
            .par_iter()
            .map(|th| rows.iter().map(|r| dot(th, r)).collect())
            .collect()
    }
}

#[inline]
pub(crate) fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Stable ascending argsort; ties keep original index order.
pub fn argsort(v: &[f64]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..v.len()).collect();
    idx.sort_by(|&i, &j| v[i].total_cmp(&v[j]));
    idx
}

pub(crate) fn sorted_copy(v: &[f64]) -> Vec<f64> {
    let mut s = v.to_vec();
    s.sort_unstable_by(f64::total_cmp);
    s
}

/// `(1/n) sum (a_(i) - b_(i))^2` over already sorted samples.
pub(crate) fn sorted_sq_cost(sa: &[f64], sb: &[f64]) -> f64 {
    let s: f64 = sa.iter().zip(sb).map(|(x, y)| (x - y) * (x - y)).sum();
    s / sa.len() as f64
}

/// Monotone plan: `plan[i]` is the index in `b` matched to index `i` in `a`.
pub(crate) fn monotone_plan(a: &[f64], b: &[f64]) -> Vec<usize> {
    let oa = argsort(a);
    let ob = argsort(b);
    let mut plan = vec![0; a.len()];
    for (&i, &j) in oa.iter().zip(&ob) {
        plan[i] = j;
    }
    plan
}

/// Squared 1D Wasserstein cost between two equal-size samples, with the
/// optimal plan (`plan[i]` = index in `b` receiving `a[i]`).
pub fn w2_1d(a: &[f64], b: &[f64]) -> Result<(f64, Vec<usize>)> {
    if a.len() != b.len() {
        return Err(Error::Argument(format!(
            "1D transport needs equal sample counts, got {} and {}",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::Argument("1D transport needs at least one sample".into()));
    }
    let plan = monotone_plan(a, b);
    let cost = a.iter().zip(&plan).map(|(x, &j)| (x - b[j]) * (x - b[j])).sum::<f64>() / a.len() as f64;
    Ok((cost, plan))
}

/// Per-projection input plans plus the output-side plan.
#[derive(Debug, Clone, PartialEq)]
pub struct TransportBundle {
    pub input_plans: Vec<Vec<usize>>,
    pub output_plan: Vec<usize>,
}

fn check_pair(x: &Cohort, xp: &Cohort, proj: &ProjectionSet) -> Result<()> {
    if x.n() != xp.n() {
        return Err(Error::Argument(format!("cohort sizes differ: {} vs {}", x.n(), xp.n())));
    }
    if x.n() == 0 {
        return Err(Error::Argument("cohorts are empty".into()));
    }
    if x.d() != xp.d() || x.d() != proj.dim() {
        return Err(Error::Argument(format!(
            "dimension mismatch: cohorts {} and {}, projections {}",
            x.d(),
            xp.d(),
            proj.dim()
        )));
    }
    Ok(())
}

/// Monte Carlo sliced squared Wasserstein cost, `(1/N) sum_k W2^2(theta_k x, theta_k x')`,
/// with the per-projection plans.
pub fn sw2(x: &Cohort, xp: &Cohort, proj: &ProjectionSet) -> Result<(f64, Vec<Vec<usize>>)> {
    check_pair(x, xp, proj)?;
    let px = proj.project(x.values());
    let pxp = proj.project(xp.values());
    Ok(sw2_projected(&px, &pxp))
}

pub(crate) fn sw2_projected(px: &[Vec<f64>], pxp: &[Vec<f64>]) -> (f64, Vec<Vec<usize>>) {
    let per: Vec<(f64, Vec<usize>)> = px
        .par_iter()
        .zip(pxp.par_iter())
        .map(|(a, b)| {
            let plan = monotone_plan(a, b);
            let c = a.iter().zip(&plan).map(|(x, &j)| (x - b[j]) * (x - b[j])).sum::<f64>() / a.len() as f64;
            (c, plan)
        })
        .collect();
    let cost = per.iter().map(|(c, _)| c).sum::<f64>() / per.len() as f64;
    (cost, per.into_iter().map(|(_, p)| p).collect())
}

/// Half-width of the two-sided DKW band at per-side level `alpha/2`.
pub fn dkw_halfwidth(n: usize, alpha: f64) -> f64 {
    ((4.0 / alpha).ln() / (2.0 * n as f64)).sqrt()
}

/// Lower and upper quantile levels bracketing `u`.
pub fn quantile_band(u: f64, n: usize, alpha: f64) -> (f64, f64) {
    band_at(u, dkw_halfwidth(n, alpha))
}

#[inline]
fn band_at(u: f64, eps: f64) -> (f64, f64) {
    ((u - eps).max(0.0), (u + eps).min(1.0))
}

/// Right-continuous empirical quantile of a sorted sample.
#[inline]
pub(crate) fn empirical_quantile(sorted: &[f64], q: f64) -> f64 {
    let n = sorted.len();
    let idx = ((q * n as f64).floor() as usize).min(n - 1);
    sorted[idx]
}

/// Numerical settings of the confidence limits.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct UclParams {
    /// Trimming constant in `(0, 1/2)`.
    pub delta: f64,
    pub alpha: f64,
    /// Midpoint-rule nodes on `[delta, 1 - delta]`.
    pub grid_size: usize,
    /// Integrate `D(u)^2` (true) or `D(u)` (false).
    pub square_integrand: bool,
}

impl Default for UclParams {
    fn default() -> Self {
        Self {
            delta: 0.05,
            alpha: 0.1,
            grid_size: 100,
            square_integrand: true,
        }
    }
}

impl UclParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.delta > 0.0 && self.delta < 0.5) {
            return Err(Error::Argument(format!("delta must lie in (0, 0.5), got {}", self.delta)));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(Error::Argument(format!("alpha must lie in (0, 1), got {}", self.alpha)));
        }
        if self.grid_size == 0 {
            return Err(Error::Argument("grid_size must be >= 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UclResult {
    pub point_estimate: f64,
    pub ucl: f64,
    pub delta: f64,
    pub alpha: f64,
    pub grid_size: usize,
}

/// Trimmed band integral `1/(1-2 delta) int_delta^{1-delta} D(u)^2 du` for two
/// sorted samples with an explicit band half-width.
pub fn trimmed_band_integral(sa: &[f64], sb: &[f64], halfwidth: f64, params: &UclParams) -> f64 {
    let m = params.grid_size;
    let width = 1.0 - 2.0 * params.delta;
    let h = width / m as f64;
    let mut acc = 0.0;
    for j in 0..m {
        let u = params.delta + (j as f64 + 0.5) * h;
        let (lo, hi) = band_at(u, halfwidth);
        let d1 = empirical_quantile(sa, hi) - empirical_quantile(sb, lo);
        let d2 = empirical_quantile(sb, hi) - empirical_quantile(sa, lo);
        let dmax = d1.max(d2);
        acc += if params.square_integrand { dmax * dmax } else { dmax };
    }
    acc * h / width
}

/// Output-side confidence limit on the squared 1D Wasserstein cost.
pub fn ucl_w2(y: &[f64], ystar: &[f64], params: &UclParams) -> Result<UclResult> {
    params.validate()?;
    let (point, _) = w2_1d(y, ystar)?;
    let eps = dkw_halfwidth(y.len(), params.alpha);
    let ucl = trimmed_band_integral(&sorted_copy(y), &sorted_copy(ystar), eps, params);
    Ok(UclResult {
        point_estimate: point,
        ucl,
        delta: params.delta,
        alpha: params.alpha,
        grid_size: params.grid_size,
    })
}

/// Input-side confidence limit: per-projection band integrals averaged over
/// the projection set.
pub fn ucl_sw2(x: &Cohort, xp: &Cohort, proj: &ProjectionSet, params: &UclParams) -> Result<UclResult> {
    params.validate()?;
    check_pair(x, xp, proj)?;
    let px = proj.project(x.values());
    let pxp = proj.project(xp.values());
    let point = sw2_projected(&px, &pxp).0;
    let eps = dkw_halfwidth(x.n(), params.alpha);
    let sx: Vec<Vec<f64>> = px.iter().map(|v| sorted_copy(v)).collect();
    let sxp: Vec<Vec<f64>> = pxp.iter().map(|v| sorted_copy(v)).collect();
    Ok(UclResult {
        point_estimate: point,
        ucl: sliced_band_integral(&sx, &sxp, eps, params),
        delta: params.delta,
        alpha: params.alpha,
        grid_size: params.grid_size,
    })
}

/// Average of [`trimmed_band_integral`] over per-projection sorted samples.
pub fn sliced_band_integral(sx: &[Vec<f64>], sxp: &[Vec<f64>], halfwidth: f64, params: &UclParams) -> f64 {
    let per: Vec<f64> = sx
        .par_iter()
        .zip(sxp.par_iter())
        .map(|(a, b)| trimmed_band_integral(a, b, halfwidth, params))
        .collect();
    per.iter().sum::<f64>() / per.len() as f64
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tabular::{Feature, Schema};
    use std::sync::Arc;

    fn brute_force_w2(a: &[f64], b: &[f64]) -> f64 {
        fn rec(a: &[f64], b: &[f64], used: &mut Vec<bool>, i: usize, acc: f64, best: &mut f64) {
            if i == a.len() {
                *best = best.min(acc);
                return;
            }
            for j in 0..b.len() {
                if !used[j] {
                    used[j] = true;
                    rec(a, b, used, i + 1, acc + (a[i] - b[j]).powi(2), best);
                    used[j] = false;
                }
            }
        }
        let mut best = f64::INFINITY;
        rec(a, b, &mut vec![false; b.len()], 0, 0.0, &mut best);
        best / a.len() as f64
    }

    fn cohort(rows: &[Vec<f64>]) -> Cohort {
        let d = rows[0].len();
        let schema = Schema::new((0..d).map(|p| Feature::numerical(format!("f{p}"), -100.0, 100.0)).collect()).unwrap();
        Cohort::from_rows(Arc::new(schema), rows).unwrap()
    }

    #[test]
    fn w2_examples() {
        let (c, plan) = w2_1d(&[0.0, 1.0], &[1.0, 2.0]).unwrap();
        assert_eq!(c, 1.0);
        assert_eq!(plan, vec![0, 1]);
        assert_eq!(brute_force_w2(&[0.0, 1.0], &[1.0, 2.0]), 1.0);
        assert_eq!(w2_1d(&[0.0], &[3.0]).unwrap().0, 9.0);
        let (c, plan) = w2_1d(&[2.0, 2.0, 1.0], &[2.0, 2.0, 1.0]).unwrap();
        assert_eq!(c, 0.0);
        assert_eq!(plan, vec![0, 1, 2]);
        assert!(w2_1d(&[1.0], &[1.0, 2.0]).is_err());
    }

    #[test]
    fn plan_maps_order_statistics() {
        let (_, plan) = w2_1d(&[5.0, -1.0, 3.0], &[10.0, 30.0, 20.0]).unwrap();
        assert_eq!(plan, vec![1, 0, 2]);
    }

    #[test]
    fn projections_are_unit_and_deterministic() {
        let p = sample_projections(5, 50, 3).unwrap();
        for th in p.directions() {
            let n = th.iter().map(|x| x * x).sum::<f64>().sqrt();
            assert!((n - 1.0).abs() < 1e-12);
        }
        assert_eq!(p, sample_projections(5, 50, 3).unwrap());
        let p1 = sample_projections(1, 20, 9).unwrap();
        assert!(p1.directions().all(|th| th[0] == 1.0 || th[0] == -1.0));
        assert!(sample_projections(0, 2, 0).is_err());
        assert!(sample_projections(2, 0, 0).is_err());
    }

    #[test]
    fn projection_mean_is_near_zero() {
        let p = sample_projections(3, 10_000, 11).unwrap();
        let mut mean = [0.0; 3];
        for th in p.directions() {
            for (m, t) in mean.iter_mut().zip(th) {
                *m += t / 10_000.0;
            }
        }
        let norm = mean.iter().map(|x| x * x).sum::<f64>().sqrt();
        assert!(norm < 0.05, "{norm}");
    }

    #[test]
    fn sw2_single_axis_and_identity() {
        let x = cohort(&[vec![0.0, 5.0], vec![2.0, -1.0], vec![7.0, 0.5]]);
        let xp = cohort(&[vec![1.0, 0.0], vec![-3.0, 2.0], vec![4.0, 4.0]]);
        let axis = ProjectionSet::from_directions(&[vec![1.0, 0.0]]).unwrap();
        let (c, _) = sw2(&x, &xp, &axis).unwrap();
        let (c1, _) = w2_1d(&[0.0, 2.0, 7.0], &[1.0, -3.0, 4.0]).unwrap();
        assert_eq!(c, c1);
        let p = sample_projections(2, 30, 1).unwrap();
        assert_eq!(sw2(&x, &x, &p).unwrap().0, 0.0);
    }

    #[test]
    fn sw2_vertical_shift_matches_expectation() {
        let x = cohort(&[vec![0.0, 0.0], vec![1.0, 0.0]]);
        let xp = cohort(&[vec![0.0, 1.0], vec![1.0, 1.0]]);
        let p = sample_projections(2, 2000, 5).unwrap();
        let (c, _) = sw2(&x, &xp, &p).unwrap();
        assert!((c - 0.5).abs() < 0.05, "{c}");
    }

    #[test]
    fn band_values() {
        let eps = dkw_halfwidth(100, 0.1);
        assert!((eps - (40f64.ln() / 200.0).sqrt()).abs() < 1e-15);
        assert!((eps - 0.1358).abs() < 1e-4);
        assert!(dkw_halfwidth(1_000_000, 0.1) < 0.002);
        let (lo, hi) = quantile_band(0.0, 100, 0.1);
        assert_eq!(lo, 0.0);
        assert!((hi - eps).abs() < 1e-15);
        assert_eq!(quantile_band(1.0, 100, 0.1).1, 1.0);
    }

    #[test]
    fn empirical_quantile_is_right_continuous() {
        let s = [1.0, 2.0, 3.0, 4.0];
        assert_eq!(empirical_quantile(&s, 0.0), 1.0);
        assert_eq!(empirical_quantile(&s, 0.2499), 1.0);
        assert_eq!(empirical_quantile(&s, 0.25), 2.0);
        assert_eq!(empirical_quantile(&s, 1.0), 4.0);
    }

    #[test]
    fn ucl_rejects_bad_delta() {
        let p = UclParams {
            delta: 0.5,
            ..UclParams::default()
        };
        assert!(ucl_w2(&[1.0], &[1.0], &p).is_err());
        let p = UclParams {
            delta: 0.0,
            ..UclParams::default()
        };
        assert!(ucl_w2(&[1.0], &[1.0], &p).is_err());
    }

    #[test]
    fn ucl_coincident_samples() {
        let y: Vec<f64> = (0..500).map(|i| (i as f64 * 0.37).sin()).collect();
        let r = ucl_w2(&y, &y, &UclParams::default()).unwrap();
        assert_eq!(r.point_estimate, 0.0);
        assert!(r.ucl >= 0.0);
    }

    #[test]
    fn sliced_ucl_with_one_direction_reduces_to_1d() {
        let x = cohort(&[vec![0.0, 1.0], vec![2.0, -1.0], vec![3.0, 0.0], vec![-1.0, 2.0]]);
        let xp = cohort(&[vec![1.0, 0.0], vec![0.5, 2.0], vec![4.0, 4.0], vec![2.0, 1.0]]);
        let th = vec![0.6, 0.8];
        let proj = ProjectionSet::from_directions(&[th.clone()]).unwrap();
        let params = UclParams::default();
        let s = ucl_sw2(&x, &xp, &proj, &params).unwrap();
        let a: Vec<f64> = x.rows().map(|r| dot(&th, r)).collect();
        let b: Vec<f64> = xp.rows().map(|r| dot(&th, r)).collect();
        let o = ucl_w2(&a, &b, &params).unwrap();
        assert_eq!(s.ucl, o.ucl);
        assert_eq!(s.point_estimate, o.point_estimate);
    }
}
