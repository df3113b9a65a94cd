//! Non-local sloshing dynamics on (−1, 1).
//!
//! The free surface of a liquid between two rigid walls is governed by
//! `φ_tt + 𝓐φ = f`, where `𝓐` is a weighted singular-integral operator that is
//! diagonal in the Chebyshev basis. This crate provides the operator and its
//! norms ([`operator`]), the Galerkin resolvent and sloshing modes
//! ([`elliptic`]), an energy-conserving time integrator ([`evolution`]) and an
//! adjoint-based synthesizer for localized source controls ([`control`]).

pub mod chebyshev;
pub mod control;
pub mod elliptic;
pub mod error;
pub mod evolution;
pub mod exec;
pub mod io;
pub mod operator;
pub mod verify;

pub use chebyshev::{ChebCoeffs, ChebGrid, GridFunction};
pub use error::{Result, SloshError};
