//! Minimal reverse-mode automatic differentiation over dense `f64` arrays.
//!
//! A [`Tape`] is an append-only arena of nodes. Every op evaluates eagerly
//! when recorded, so forward values are always available, and [`Tape::backward`]
//! walks the arena in reverse construction order to accumulate adjoints.
//! The op set is exactly what the contrastive losses need — nothing more.

mod array;
mod gradcheck;
mod tape;

pub use array::{DenseArray, Shape};
pub use gradcheck::{grad_check, GradCheckReport};
pub use tape::{Gradients, NodeId, Tape};
