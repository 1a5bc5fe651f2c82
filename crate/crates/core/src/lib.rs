//! Spherical harmonic climate emulator.
//!
//! The crate is organised around the stages of the emulator:
//!
//! - [`grid`]: equiangular grid geometry, field storage, the `SPHF` container,
//!   synthetic band-limited fields and spline upsampling.
//! - [`wigner`]: Wigner-d values at π/2 and the coupling tensor used by the transform.
//! - [`sht`]: exact forward/inverse spherical harmonic transforms.
//! - [`trend`]: per-location mean trend with distributed-lag forcing response.
//! - [`stochastic`]: diagonal VAR(P) on harmonic coefficients, innovation covariance,
//!   emulation sampling.
//! - [`mpchol`]: tile-based mixed-precision Cholesky with a dependency-graph scheduler.
//! - [`pipeline`]: train / emulate / validate orchestration and the model bundle.
//!
//! Data-parallel loops go through [`par`], which uses rayon when the `parallel`
//! feature is enabled (the default) and plain iterators otherwise.

pub mod error;
pub mod grid;
pub mod linalg;
pub mod mpchol;
pub mod par;
pub mod pipeline;
pub mod rng;
pub mod sht;
pub mod stochastic;
pub mod trend;
pub mod wigner;

mod binio;

pub use error::{Error, Result};
pub use grid::{EquiangularField, FieldSeries, GridSpec};
pub use sht::{HarmonicVector, ShtPlan};
pub use wigner::WignerTables;
