//! Two-time density correlations of a Bose-Hubbard chain from pairs of
//! simulated weak measurements.
//!
//! The pipeline runs bottom-up:
//!
//! - [`fockspace`] enumerates the fixed-`N` Fock basis and holds state vectors.
//! - [`hamiltonian`] assembles the sparse Bose-Hubbard Hamiltonian and finds
//!   its ground state.
//! - [`evolution`] propagates states with `exp(-iHt)`.
//! - [`measurement`] draws weak density records and applies their backaction.
//! - [`trajectory`] runs the measure / evolve / read-out protocol over seeded
//!   ensembles.
//! - [`analysis`] turns ensembles into the Van Hove function, the dynamical
//!   structure factor and error diagnostics, and computes the exact values
//!   they converge to.
//!
//! ```
//! use std::sync::Arc;
//! use weakcorr::prelude::*;
//!
//! let basis = Arc::new(build_basis(LatticeSpec::unit_filling(4)?)?);
//! let h = Arc::new(build_hamiltonian(basis, BoseHubbardParams::new(2.0))?);
//! let gs = ground_state(&h)?;
//! let propagator = Propagator::new(h);
//!
//! let cfg = ProtocolConfig::new(0.05, uniform_grid(1.0, 0.1)?, 200, 7);
//! let ens = run_ensemble(&InitialState::from(gs.state.clone()), &propagator, &cfg)?;
//! let g = van_hove(&ens, VanHoveOptions::default())?;
//! let exact = oracle_correlations(&propagator, &gs.state, ens.times())?.van_hove(CorrelatorKind::Raw);
//! assert!((g.value(0, 5) - exact.value(0, 5)).abs() < 5.0 * g.sem_at(0, 5));
//! # Ok::<(), weakcorr::Error>(())
//! ```
//!
//! Units: `hbar = 1`, energies in units of the tunneling `J`, times in `1/J`,
//! momenta in radians per lattice site.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod error;
pub mod evolution;
pub mod fockspace;
pub mod hamiltonian;
pub mod io;
mod lanczos;
pub mod measurement;
pub mod stats;
pub mod streams;
pub mod trajectory;

pub use error::{Error, Result};

/// The names most programs need.
pub mod prelude {
    pub use crate::analysis::{
        apply_cutoff, cross_correlate, dsf, dsf_with_sem, fourier_cutoff, leggett_garg,
        noise_cross_correlate, oracle_correlations, oracle_two_time, van_hove, van_hove_samples,
        CorrelatorKind, DsfOptions, ReadoutKind, SpatialWindow, TimeWindow, VanHoveOptions,
    };
    pub use crate::error::{Error, Result};
    pub use crate::evolution::{PropagationMethod, Propagator, PropagatorOptions};
    pub use crate::fockspace::{build_basis, FockBasis, LatticeSpec, QuantumState};
    pub use crate::hamiltonian::{
        build_hamiltonian, ground_state, BoseHubbardParams, SparseHamiltonian,
    };
    pub use crate::measurement::{MeasurementMode, MeasurementStrength};
    pub use crate::stats::Estimate;
    pub use crate::trajectory::{
        run_ensemble, run_three_measurement_ensemble, uniform_grid, Ensemble, InitialState,
        ProtocolConfig, SecondNoise, ThreeMeasurementConfig,
    };
}
