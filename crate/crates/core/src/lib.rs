//! Linear, decoupled, energy-stable time integration of a two-field
//! Cahn-Hilliard model for binary fluid-surfactant mixtures on periodic
//! rectangles.
//!
//! * [`spectral`]: grids, fields and the Fourier pseudo-spectral operators.
//! * [`model`]: parameters, state, energies and chemical potentials.
//! * [`schemes`]: the LS1/LS2 auxiliary-variable schemes and an implicit
//!   reference integrator.
//! * [`diagnostics`]: per-step observables.
//! * [`harness`]: configuration, initial data, snapshots and experiment
//!   drivers behind the `chsurf` binary.

pub mod diagnostics;
pub mod error;
pub mod harness;
pub mod model;
pub mod schemes;
pub mod spectral;

pub use error::{Error, Result};
pub use model::{ModelParams, SimState};
pub use schemes::{Scheme, SolverOptions, Stepper};
pub use spectral::{Field, Grid, Spectral};
