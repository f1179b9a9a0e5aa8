//! Numerics for the totally asymmetric simple exclusion process (TASEP) on
//! a finite one-dimensional lattice with open boundaries.
//!
//! The crate covers three descriptions of the same particle system and the
//! maps between them:
//!
//! - the exact master equation `dz/dt = A z` on all `2^n` occupation
//!   configurations ([`master`]),
//! - the equivalent exact ODE system on correlation functions
//!   (`l`-point functions) obtained by the marginal embedding
//!   ([`correlations`]),
//! - the order-`m` mean-field models obtained by closing that system with
//!   the cluster approximation, whose order-1 case is the Ribosome Flow
//!   Model ([`meanfield`]).
//!
//! [`dynamics`] integrates any of the three systems and solves for steady
//! states; [`ssa`] is an independent Gillespie simulator used as a Monte
//! Carlo oracle; [`validate`] bundles the property suites behind the
//! `validate` CLI subcommand; [`cli`] implements the command-line front
//! end.

#![deny(missing_docs)]

pub mod cli;
pub mod correlations;
pub mod dynamics;
pub mod error;
pub mod lattice;
pub mod linalg;
pub mod master;
pub mod meanfield;
pub mod ode;
pub mod ssa;
pub mod validate;

pub use error::{Error, Result};
pub use lattice::{BitPattern, IndexLayout, LatticeParams};
