//! Spectral computations for the random necklace: a chain of loops with
//! i.i.d. random half-arc-lengths joined by unit intervals.
//!
//! The crate is organised bottom-up:
//!
//! - [`distributions`] holds the arc-length law, seeded sampling and exact
//!   expectations of the loop-eigenvalue counting function.
//! - [`scattering`] gives single-loop amplitudes, transfer matrices, the
//!   spectral shift, the Hill discriminant and the magnetic variant.
//! - [`ensemble`] multiplies transfer matrices along sampled chains and
//!   estimates the Lyapunov exponent and the phase part of the IDS.
//! - [`ids`] assembles the full integrated density of states, enumerates its
//!   discontinuities and runs the Thouless and two-sided estimate checks.
//! - [`cli`] is the batch front-end used by the `necklace` binary.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // `!(x > 0.0)` also rejects NaN

pub mod cli;
pub mod distributions;
pub mod ensemble;
pub mod ids;
pub mod scattering;

mod energy;

pub use energy::{strict_floor, Energy, EnergyError};
