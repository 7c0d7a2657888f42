//! Dressed-state dephasing of `N` qubits coupled to a microwave cavity.
//!
//! The crate builds the Tavis–Cummings Hamiltonian, derives secular Lindblad
//! dephasing operators in its eigenbasis from a frequency-dependent bath,
//! solves for the weakly driven steady state, and extracts vacuum Rabi
//! linewidths from the transmitted amplitude `|⟨a⟩|`.
//!
//! Internally every frequency and rate is angular, in rad·MHz (rad/µs);
//! see [`units`].

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod bath;
pub mod dissipators;
pub mod error;
pub mod hilbert;
pub mod model;
pub mod spectra;
pub mod steadystate;
pub mod units;

pub use bath::{BathSpec, CouplingMode, SpectralFamily};
pub use dissipators::{Basis, Channel, DissipatorSet, JumpOperator};
pub use error::{Error, Result};
pub use hilbert::{Operator, SpaceLayout, C64};
pub use model::{EigenBasis, SystemSpec};
pub use spectra::{FitResult, SpectrumResult};
pub use steadystate::{DensityMatrix, DriveSpec, DrivenSystem, Superoperator, Truncation};
