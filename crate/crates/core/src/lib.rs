//! Kinetic theory of gas-surface interaction.
//!
//! The crate provides the Cercignani-Lampis (C-L) scattering kernel with its
//! exact sampling law, closed-form Gaussian/Rice integral identities paired
//! with independent quadrature oracles, stochastic back-time boundary cycles,
//! a hard-sphere collision operator, a damped fixed-point solver for the
//! Boltzmann equation in a slab, a free-molecular particle simulator, and the
//! admissibility/contraction constants of the underlying well-posedness
//! theory.
//!
//! Velocity conventions follow the half-space trace picture throughout: `n`
//! is the outward unit normal of the gas domain, a molecule striking the wall
//! has `n·u > 0` and a re-emitted one has `n·v < 0`.

pub mod analytics;
pub mod collision;
pub mod cycles;
pub mod geometry;
pub mod particle;
pub mod rng;
pub mod slab;
pub mod stats;
pub mod theorem;
pub mod wall;

mod error;
mod vec3;

pub use error::{Error, Result};
pub use vec3::Vec3;
