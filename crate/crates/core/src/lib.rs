//! Numerical laboratory for Davies thermalization dynamics of local commuting
//! Hamiltonians on small hypercubic spin lattices.
//!
//! The crate is organised bottom-up:
//!
//! * [`lattice`]: sites, regions, boundaries and the leveled coarse-graining.
//! * [`opcore`]: dense operators on site registers, partial traces, entropies.
//! * [`models`]: commuting local Hamiltonians, Gibbs states, effective Hamiltonians.
//! * [`mcmi`]: matrix-valued conditional mutual information and its decay.
//! * [`davies`]: Davies generators, conditional expectations, gaps, dynamics.
//! * [`w1`]: quantum Wasserstein-1 distance and Lipschitz norm with certificates.
//! * [`lab`]: inequality checks, empirical rates and closed-form bound calculators.

pub mod error;
pub mod lattice;
pub mod opcore;
pub mod models;
pub mod mcmi;
pub mod davies;
pub mod w1;
pub mod lab;

pub use error::{LabError, Result};
pub use lattice::{CoarseGraining, CoarseGrainingParams, Lattice, Metric, Region};
pub use opcore::{CMat, Operator, Register, C64};
pub use models::{LocalHamiltonian, ModelSpec};
pub use mcmi::Partition4;
pub use davies::{build_davies, ConditionalExpectation, DaviesGenerator, WeightScheme};
