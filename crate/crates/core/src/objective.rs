//! The certified objective `Q = (1 - eta) Q_x + eta Q_y`, its exact row-wise
//! decomposition under frozen plans, top-k gating and the eta schedule.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tabular::Cohort;
use crate::transport::ProjectionSet;

/// Per-row contributions to `Q_x`, `Q_y` and the combined `Q`.
#[derive(Debug, Clone, PartialEq)]
pub struct ImpactScores {
    pub qx: Vec<f64>,
    pub qy: Vec<f64>,
    pub q: Vec<f64>,
    pub eta: f64,
}

impl ImpactScores {
    pub fn total(&self) -> f64 {
        self.q.iter().sum()
    }
}

/// Input-side row scores
/// `qx_i = 1/(N n) sum_k (theta_k . x_i - theta_k . x'_{sigma_k(i)})^2`.
pub fn row_scores_input(x: &Cohort, xp: &Cohort, proj: &ProjectionSet, plans: &[Vec<usize>]) -> Result<Vec<f64>> {
    if plans.len() != proj.len() || x.n() != xp.n() || plans.iter().any(|p| p.len() != x.n()) {
        return Err(Error::Argument(format!(
            "plans do not match cohorts: {} plans for {} projections, n = {}",
            plans.len(),
            proj.len(),
            x.n()
        )));
    }
    let px = proj.project(x.values());
    let pxp = proj.project(xp.values());
    Ok(row_scores_projected(&px, &pxp, plans))
}

pub(crate) fn row_scores_projected(px: &[Vec<f64>], pxp: &[Vec<f64>], plans: &[Vec<usize>]) -> Vec<f64> {
    let n = px.first().map_or(0, Vec::len);
    let scale = 1.0 / (px.len() as f64 * n as f64);
    let mut q = vec![0.0; n];
    for ((a, b), plan) in px.iter().zip(pxp).zip(plans) {
        for (i, qi) in q.iter_mut().enumerate() {
            let diff = a[i] - b[plan[i]];
            *qi += diff * diff;
        }
    }
    q.iter_mut().for_each(|v| *v *= scale);
    q
}

/// Output-side row scores `qy_i = (1/n) (y_i - y*_{sigma_y(i)})^2`.
pub fn row_scores_output(y: &[f64], ystar: &[f64], output_plan: &[usize]) -> Result<Vec<f64>> {
    if y.len() != ystar.len() || output_plan.len() != y.len() {
        return Err(Error::Argument(format!(
            "output plan of length {} does not match outputs ({}) and targets ({})",
            output_plan.len(),
            y.len(),
            ystar.len()
        )));
    }
    let n = y.len() as f64;
    Ok(y.iter()
        .zip(output_plan)
        .map(|(yi, &j)| {
            let diff = yi - ystar[j];
            diff * diff / n
        })
        .collect())
}

pub fn combine(qx: Vec<f64>, qy: Vec<f64>, eta: f64) -> Result<ImpactScores> {
    if !(0.0..=1.0).contains(&eta) {
        return Err(Error::Argument(format!("eta must lie in [0, 1], got {eta}")));
    }
    if qx.len() != qy.len() {
        return Err(Error::Argument(format!("score lengths differ: {} vs {}", qx.len(), qy.len())));
    }
    let q = qx.iter().zip(&qy).map(|(a, b)| (1.0 - eta) * a + eta * b).collect();
    Ok(ImpactScores { qx, qy, q, eta })
}

/// `(1 - eta) qx + eta qy` on aggregate costs.
#[inline]
pub fn combined(qx: f64, qy: f64, eta: f64) -> f64 {
    (1.0 - eta) * qx + eta * qy
}

/// Indices of the `k` largest scores, ties to the smaller index, returned ascending.
pub fn top_k(q: &[f64], k: usize) -> Result<Vec<usize>> {
    if k == 0 || k > q.len() {
        return Err(Error::Argument(format!("top-k needs 1 <= k <= n, got k={k}, n={}", q.len())));
    }
    let mut idx: Vec<usize> = (0..q.len()).collect();
    idx.sort_by(|&i, &j| q[j].total_cmp(&q[i]).then(i.cmp(&j)));
    idx.truncate(k);
    idx.sort_unstable();
    Ok(idx)
}

/// Balance weight and its admissible interval, carried across iterations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EtaState {
    pub eta: f64,
    pub lower: f64,
    pub upper: f64,
    pub kappa: f64,
}

impl Default for EtaState {
    fn default() -> Self {
        Self {
            eta: 0.5,
            lower: 0.0,
            upper: 1.0,
            kappa: 0.1,
        }
    }
}

impl EtaState {
    pub fn new(eta: f64, lower: f64, upper: f64, kappa: f64) -> Result<Self> {
        let s = Self {
            eta,
            lower,
            upper,
            kappa,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(0.0 <= self.lower && self.lower <= self.upper && self.upper <= 1.0) {
            return Err(Error::Argument(format!(
                "eta interval must satisfy 0 <= l <= r <= 1, got [{}, {}]",
                self.lower, self.upper
            )));
        }
        if !(self.kappa > 0.0 && self.kappa < 1.0) {
            return Err(Error::Argument(format!("kappa must lie in (0, 1), got {}", self.kappa)));
        }
        if !(self.lower..=self.upper).contains(&self.eta) {
            return Err(Error::Argument(format!(
                "eta {} outside [{}, {}]",
                self.eta, self.lower, self.upper
            )));
        }
        Ok(())
    }

    pub fn width(&self) -> f64 {
        self.upper - self.lower
    }
}

/// Weight on the output side from the confidence-limit gaps
/// `a = U_x - ucl_sw` and `b = U_y - ucl_w`.
///
/// When exactly one side is violated the weight is pinned to the interval end
/// that favours that side. The result always lies in `[state.lower, state.upper]`.
pub fn balance_eta(a: f64, b: f64, state: &EtaState) -> f64 {
    let raw = if a == 0.0 && b == 0.0 {
        0.5
    } else if a < 0.0 && b < 0.0 {
        b / (a + b)
    } else if a >= 0.0 && b >= 0.0 {
        a / (a + b)
    } else if a < 0.0 {
        state.lower
    } else {
        state.upper
    };
    raw.clamp(state.lower, state.upper)
}

/// Shrinks `[l, r]` by `kappa` toward the half containing `eta`.
pub fn narrow_interval(eta: f64, state: &EtaState) -> EtaState {
    let (mut l, mut r) = (state.lower, state.upper);
    let step = state.kappa * (r - l);
    if eta > 0.5 * (l + r) {
        l += step;
    } else {
        r -= step;
    }
    if l > r {
        l = r;
    }
    EtaState {
        eta: eta.clamp(l, r),
        lower: l,
        upper: r,
        kappa: state.kappa,
    }
}
