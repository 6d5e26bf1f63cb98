//! Online handwriting analysis toolkit for dementia screening studies.
//!
//! The pipeline runs from raw digitizer recordings to classification reports:
//!
//! 1. [`ink_model`] loads and validates pen recordings (`t_ms,x,y,pressure[,status]`).
//! 2. [`kinematics`] estimates velocity, acceleration and jerk and cuts each
//!    recording into strokes at pen-up, pen-down and vertical-velocity zero
//!    crossings.
//! 3. [`features`] computes the 21 per-stroke features, averages them per task
//!    and assembles the in-air (A, 25), on-paper (P, 26) and merged (AL, 47)
//!    feature vectors.
//! 4. [`learners`] provides decision trees, random forests, an SMO-trained SVM,
//!    a one-hidden-layer MLP and logistic gradient boosting.
//! 5. [`evaluation`] runs stratified, participant-aware k-fold cross-validation
//!    over single-task and category-merged datasets.
//! 6. [`selection`] implements wrapper recursive feature elimination and the
//!    per-category feature occurrence histograms.
//! 7. [`synthcohort`] generates deterministic synthetic studies with injectable
//!    kinematic pathology.
//!
//! [`cli`] wires these stages together; the `inkscreen` binary is a thin
//! argument parser over it. See the crate's `examples/` directory for one
//! runnable program per capability.

pub mod cli;
pub mod error;
pub mod evaluation;
pub mod features;
pub mod ink_model;
pub mod kinematics;
pub mod learners;
pub mod report;
pub mod seed;
pub mod selection;
pub mod synthcohort;

pub use error::{Error, Result};
