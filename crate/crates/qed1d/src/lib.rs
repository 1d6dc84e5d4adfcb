//! Mode quantization and quantum emitter dynamics in open, lossy 1D
//! electromagnetic environments.
//!
//! The crate is organized as a pipeline:
//!
//! * [`fem`]: nodal finite elements for the 1D scalar Helmholtz equation with
//!   conductive segments, perfect-conductor planes, and perfectly matched
//!   layers; direct banded solves.
//! * [`modes`]: numerically exact boundary-assisted (plane-wave scattering)
//!   and medium-assisted (lossy-material point source) continuum modes,
//!   spectral response scans, adaptive frequency grids, and coarse graining
//!   into discrete modes carrying quadrature weights.
//! * [`quanta`]: truncated multimode emitter + field Fock basis (at most two
//!   total quanta), coupling strengths, and block Hamiltonians.
//! * [`dynamics`]: Crank-Nicolson and RK4 propagation of pure states and
//!   statistical mixtures.
//! * [`observables`]: populations, one-photon field profiles, decay fits,
//!   reduced two-emitter density matrices, concurrence.
//! * [`scenarios`]: configuration, presets, the end-to-end pipeline, file
//!   outputs, and the mode cache.
//!
//! Natural units are used throughout: hbar = c = eps0 = mu0 = 1, so vacuum
//! wavenumber and angular frequency coincide and an atomic transition at
//! omega_a has wavelength lambda_a = 2 pi / omega_a. The time convention is
//! exp(-i omega t).

pub mod dynamics;
pub mod fem;
pub mod modes;
pub mod observables;
pub mod quanta;
pub mod scenarios;

/// Complex scalar used across the crate.
pub type C64 = num_complex::Complex64;
