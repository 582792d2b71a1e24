//! caplift: a numerical laboratory for second-eigenvalue bounds of metrics
//! conformal to the round sphere.
//!
//! The crate builds the full certificate pipeline at desk scale:
//! closed-form constants and the dimensional factor K_n (`constants`),
//! Moebius maps and cap reflections (`geom`), discrete measures with Hersch
//! renormalization (`measure`), gram forms and sign-continuous lifts of
//! maximal directions (`quadform`), a spherical-harmonic Galerkin eigensolver
//! (`spectral`), the balanced-cap Rayleigh certificate (`bound`), and a
//! Brouwer degree checker for equivariant sphere maps (`topology`).

// index loops mirror the matrix algebra they implement
#![allow(clippy::needless_range_loop)]

pub mod bound;
pub mod constants;
pub mod error;
pub mod gamma;
pub mod geom;
pub mod grid;
pub mod harmonics;
pub mod linalg;
pub mod measure;
pub mod metric;
pub mod par;
pub mod quad1d;
pub mod quadform;
pub mod spectral;
pub mod topology;

pub use constants::Dimension;
pub use error::{Error, Result};
