//! Spherical harmonic transforms of band-limited signals by generalized and
//! multi-pass iterative residual fitting.
//!
//! The band-limited subspace is split into blocks of harmonics
//! ([`partition`]); each block is fitted by least squares to the residual the
//! previous blocks left behind ([`irf`]). Sample sets come from [`sampling`],
//! harmonics from [`harmonics`], and [`experiment`] drives the convergence
//! studies behind the `sht-irf` binary.

pub mod experiment;
pub mod harmonics;
pub mod irf;
pub mod linalg;
pub mod partition;
pub mod rng;
pub mod sampling;

pub use harmonics::{CoefficientVector, HarmonicIndex, SpherePoint};
pub use irf::{multi_pass_irf, BlockSystems, FitReport, IrfConfig, IrfError};
pub use partition::{Partition, PartitionChoice};
pub use sampling::{SampleSet, SamplingScheme};
