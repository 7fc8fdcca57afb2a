//! Harmonic approximation of Hölder-class boundary data in tube
//! neighborhoods of chord-arc curves in R^3.
//!
//! The pipeline: certify a polyline as chord-arc, place dyadic node families
//! on it, extend boundary data off the curve by iterated ball averaging
//! against a smoothed distance field, then correct the Newtonian potential of
//! the extension's Laplacian so that, scale by scale, the correction sources
//! balance the field sources. The result is a family of harmonic functions
//! converging to the boundary data at a rate governed by its modulus of
//! continuity, together with verification harnesses for the direct rate, the
//! gradient growth, the converse (recovering the modulus from the
//! approximation numbers), and the sharpness of the gradient-blowup tradeoff.
//!
//! Everything numeric is generic over [`scalar::Real`] (`f32` or `f64`);
//! the `*3d` aliases at the crate root fix `f64`, which is what the CLI and
//! the test suites use.

pub mod approximant;
pub mod extension;
pub mod geometry;
pub mod modulus;
pub mod quadrature;
pub mod scalar;
pub mod smooth_distance;
pub mod verify;

pub use geometry::{Curve, DyadicCover, Point3, Vec3};

/// `f64` aliases for the common geometric types.
pub type Point3d = Point3<f64>;
pub type Vec3d = Vec3<f64>;
pub type Curve3d = Curve<f64>;
pub type DyadicCover3d = DyadicCover<f64>;
