//! Conditional-action reciprocity in partially observed temporal interaction
//! networks.
//!
//! * [`event_store`]: observation windows, report reconciliation, canonical logs.
//! * [`pedigree_geo`]: kinship from genealogies, household distances, kin classes.
//! * [`glmm`]: crossed random-intercept logistic regression (Laplace ML).
//! * [`reciprocity`]: windowed reciprocity estimator and class averages.
//! * [`nulls`]: three-level null hierarchy, reporting calibration, envelopes.
//! * [`synth`]: synthetic worlds with planted reciprocity for validation.

pub mod error;
pub mod event_store;
pub mod glmm;
pub mod nulls;
pub mod pedigree_geo;
pub mod reciprocity;
pub mod rng;
pub mod stats;
pub mod synth;

pub use error::{Error, Result};
