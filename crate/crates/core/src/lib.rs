//! Trial-level dosing-error risk estimation.
//!
//! The pipeline turns raw registry study documents into calibrated risk
//! estimates and stratification reports:
//!
//! 1. [`registry`] — parse and validate study documents, apply inclusion
//!    filters, extract feature and auxiliary columns.
//! 2. [`labeling`] — match adverse-event terms against a dosing-error
//!    concept list, aggregate to the trial level, and assign binary labels
//!    via the Wilson lower confidence bound.
//! 3. [`split`] — completion-date-ordered train/validation/test split with
//!    distribution-shift diagnostics.
//! 4. [`features`] — tabular design matrix and hashed n-gram text matrix.
//! 5. [`gbt`] / [`linear`] — gradient-boosted trees over the tabular matrix
//!    and an L2-regularized logistic model over the text matrix.
//! 6. [`calibrate`] — Platt scaling and isotonic regression fitted on the
//!    validation split only.
//! 7. [`metrics`] — late fusion, AUC/Brier/F1 metrics, threshold selection.
//! 8. [`stratify`] — calibrated probabilities mapped to risk groups with
//!    per-group and per-subgroup event-rate tables.
//! 9. [`pipeline`] — configuration-driven stage runner with content
//!    fingerprints guarding the validation-only fitting contracts.
//!
//! With the `parallel` feature (enabled by default) the per-document and
//! per-row inner loops fan out over rayon; without it every code path runs
//! sequentially with identical results up to floating-point summation order.

pub mod calibrate;
pub mod features;
pub mod gbt;
pub mod hashing;
pub mod labeling;
pub mod linear;
pub mod metrics;
pub mod par;
pub mod pipeline;
pub mod registry;
pub mod split;
pub mod stratify;
pub mod synthetic;
