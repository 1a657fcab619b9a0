//! Product-form discrete sojourn-time distributions.
//!
//! A sojourn time on `{1, ..., T}` is specified by a factor sequence
//! `rho(1), ..., rho(T)` with `rho(T) = 0`: the probability of lasting one
//! more time unit after `k` of them. The PMF is the product form
//! `f(k) = (1 - rho(k)) * prod_{t<k} rho(t)`, which reduces to the geometric
//! distribution when the factors are constant and supports exact moments,
//! CDFs and generating functions by finite sums.
//!
//! The crate provides:
//!
//! - [`dist`]: factor sequences, PMFs, moments, generating functions and a
//!   moment-existence classifier for infinite-support factor rules.
//! - [`families`]: the linear and simple polynomial factor models with their
//!   admissible coefficient intervals.
//! - [`sampling`]: seeded, reproducible samplers.
//! - [`estimation`]: maximum-likelihood fits with known or unknown support
//!   and shift, score/curvature diagnostics, and Fisher information.
//! - [`study`]: Monte-Carlo estimator studies against the information floor.
//! - [`smm`]: multi-state semi-Markov chains built from per-state factor
//!   sequences, solved by matrix-analytic blocks.
//! - [`data`]: duration-dataset ingestion and empirical diagnostics.
//!
//! Bulk work (study trials, support-grid cells) runs through [`ExecMode`]:
//! data-parallel when the `parallel` feature is enabled (the default), and
//! in index order otherwise, with bit-identical results either way.

pub mod data;
pub mod dist;
pub mod estimation;
pub mod families;
mod par;
pub mod sampling;
pub mod smm;
pub mod study;

pub use data::{DataError, DataFormat, DiagnosticsBundle, DurationDataset};
pub use dist::{
    classify_tail, DistError, MomentReport, RhoSequence, SojournPmf, TailClass, TailVerdict,
};
pub use estimation::{
    grid::{fit_grid, FamilyChoice, GridSearch, ShiftRange},
    EstError, FisherInfo, FitFamily, FitResult, SampleStats,
};
pub use families::{
    linear_bounds, poly_bounds, FamilyError, FamilyParams, LinearParams, ParamInterval, PolyParams,
};
pub use par::{init_thread_pool, ExecMode};
pub use sampling::{sample_inverse, sample_mechanism, trial_rng, SampleBatch};
pub use smm::{SmmError, SmmSpec, SolveMethod, StationaryResult};
pub use study::{
    expected_loglik_curve, l1_pmf_distance, run_study, ASolver, StudyConfig, StudyError,
    StudyResult, TSearch,
};
