//! Rich Component Analysis: recover cross-view linear maps and per-component
//! cumulants from multi-view data, then fit downstream models on a single
//! latent component.

pub mod contrastive;
pub mod cumulant;
pub mod error;
pub mod general;
pub mod gradient;
pub mod harness;
pub mod learners;
pub mod tensor;

pub use error::{RcaError, Result};
