//! Mathematical morphology for images whose pixels are unit vectors.
//!
//! Pixels are ordered by their angular depth about a reference direction
//! `mu`: the closer a vector lies to `mu`, the larger it is. Flat operators
//! pick extremal pixels of a window under that order; multi-scale operators
//! rotate neighbours along great circles towards or away from `mu` by an
//! amount that grows with distance before picking.

pub mod flat_morph;
pub mod image;
pub mod multiscale;
pub mod pipeline;
pub mod scalar_morph;
pub mod sphere;
pub mod synth;
