//! Multi-level geocoding toolkit.
//!
//! Maps toponyms-in-context to points on Earth by classifying over a
//! hierarchical cell grid at several levels at once. The pieces:
//!
//! - [`cellgrid`]: hierarchical decomposition of the sphere into cells
//!   (cube faces subdivided along a Hilbert curve), levels 0-12.
//! - [`geodesy`]: great-circle distance.
//! - [`corpus`]: JSONL ingestion of training/eval records, context-window
//!   construction, coordinate unification patches.
//! - [`features`]: tokenization, vocabulary, the three input channels,
//!   ablation masks, embedding tables.
//! - [`model`]: the multi-level convolutional classifier with joint
//!   cross-entropy training (Adam) and combined multi-level inference.
//! - [`gazetteer`]: alias table with populations, population baseline and
//!   population-discounted constrained selection.
//! - [`metrics`]: accuracy@161, mean error, AUC of the sorted log-error
//!   curve, error-curve export.

pub mod cellgrid;
pub mod corpus;
pub mod error;
pub mod features;
pub mod gazetteer;
pub mod geodesy;
pub mod metrics;
pub mod model;

pub use cellgrid::{CellId, LatLng};
pub use error::{Error, Result};
