//! Held-object synthesis for a fixed 3D hand.
//!
//! The pipeline computes compact object codes (bounding-box ratios normalized
//! by the hand's principal bone length), retrieves and rescales candidate
//! objects from a local catalog, fits the object pose and scale against the
//! static hand, and scores the resulting grasp.

pub mod catalog;
pub mod error;
pub mod eval;
pub mod fitting;
pub mod fixtures;
pub mod geometry;
pub mod hand;
pub mod pipeline;

pub use error::{Error, Result};

pub type Vec3 = nalgebra::Vector3<f64>;
