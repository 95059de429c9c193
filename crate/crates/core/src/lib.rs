//! Simulation and verification laboratory for the stochastic N-particle
//! approximation of 2D chemotaxis with a singular attractive kernel.
//!
//! The crate provides:
//!
//! - the interaction kernel, its regularization and the triple-proximity
//!   cutoff ([`kernels`]);
//! - explicit Euler–Maruyama drivers for the N-particle system, the
//!   regularized pair difference and the cubed pair process ([`integrator`]);
//! - exact-in-law squared Bessel transitions and a small statistical test
//!   kit used as an independent oracle ([`bessel`], [`stats`]);
//! - the functionals used to verify the dynamics: subset variances, Bessel
//!   dimensions, collision-regime classification, moment bounds and
//!   separation statistics ([`diagnostics`]);
//! - the supercritical mass-carrying cluster dynamics with sticky merges
//!   ([`clusters`]).
//!
//! Everything is driven by an explicit counter-based noise stream
//! ([`noise::NoiseStream`]) so that any run can be replayed bit-exactly from
//! its `(seed, replica_index)` pair.

pub mod bessel;
pub mod clusters;
pub mod diagnostics;
pub mod error;
pub mod integrator;
pub mod kernels;
pub mod noise;
pub mod params;
pub mod report;
pub mod stats;
pub mod vec2;

pub use error::{Error, Result};
pub use noise::NoiseStream;
pub use params::{InitialLaw, SimParams};
pub use vec2::Vec2;
