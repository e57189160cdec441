//! Desk-scale laboratory for unsupervised cross-domain retrieval on vector data.
//!
//! The pipeline trains a small MLP encoder with a momentum twin so that two
//! domains of the same underlying classes land in one shared embedding space:
//! instance-wise and cluster-wise contrastive losses tighten each domain,
//! while a distance-of-distance term plus an entropy sharpener align the
//! cluster structure across domains. Everything runs on CPU from a single
//! seed and is deterministic down to the metrics bytes.

pub mod bank;
pub mod checkpoint;
pub mod clustering;
pub mod data;
pub mod diffmath;
pub mod encoder;
pub mod error;
pub mod evaluation;
pub mod losses;
pub mod seeding;
pub mod training;
pub mod verify;

pub use error::{Error, Result};
