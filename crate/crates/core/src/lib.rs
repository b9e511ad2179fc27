//! Ballistic transport of ultracold atoms in a 1D optical lattice.
//!
//! Single-particle band theory for thermal clouds ([`bands`], [`transport`])
//! and a quasi-1D Gross–Pitaevskii solver for condensates ([`meanfield`]).
//! Everything is computed in the recoil unit system of [`units`].
//!
//! The crate is `no_std` and only needs `alloc`.

#![no_std]
// whenever std is in the crate graph (tests, or a dependency built with its
// std feature) its inherent float methods shadow `Float`
#![allow(unused_imports)]

extern crate alloc;
#[cfg(test)]
extern crate std;

pub mod bands;
pub mod crossover;
pub mod fft;
pub mod meanfield;
pub mod tridiag;
pub mod transport;
pub mod units;

pub use bands::{Band, BandStructure, BlochProblem, ZoneMapping};
pub use units::{LatticeParams, Quantity, RecoilUnits};
