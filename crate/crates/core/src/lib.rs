//! Certified distributional counterfactuals for tabular cohorts.
//!
//! Given a factual cohort `X'`, a black-box predictor `b` and target outputs
//! `y*`, the solver edits a few rows at a time so that the output distribution
//! of the edited cohort approaches `y*` while its input distribution stays
//! close to `X'` in sliced Wasserstein distance. Both distances are certified
//! by upper confidence limits before a cohort is returned.
//!
//! | module | role |
//! |--------|------|
//! | [`tabular`] | schema, CSV I/O, domain projection |
//! | [`transport`] | 1D and sliced squared Wasserstein costs, plans, confidence limits |
//! | [`objective`] | row-wise impact scores, top-k gate, balance weight schedule |
//! | [`guidance`] | input-side transport gradient on the editable rows |
//! | [`proposals`] | cone sampling, Monte Carlo and genetic candidate generators |
//! | [`solver`] | the propose-and-select loop and certification |
//! | [`predict`] | predictor trait, built-in models, external-process protocol |
//! | [`metrics`] | OT(x), OT(y), MMD and CDF exports |
//! | [`synth`] | bundled synthetic tasks |
//! | [`cli`] | run configuration files and the `solve` / `evaluate` / `synthesize` commands |

pub mod cli;
pub mod error;
pub mod guidance;
pub mod metrics;
pub mod objective;
pub mod predict;
pub mod proposals;
pub mod solver;
pub mod synth;
pub mod tabular;
pub mod transport;

pub use error::{Error, PredictorError, Result};
pub use predict::{BuiltinModel, ExternalPredictor, Predictor};
pub use solver::{solve, SolveReport, Solver, SolverConfig};
pub use tabular::{Cohort, Feature, Schema};
