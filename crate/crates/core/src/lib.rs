//! Desk-scale numerical laboratory for almost periodic actions of abelian
//! semigroups on compact metric spaces.
//!
//! The crate is organised bottom-up:
//!
//! - [`semigroup`]: semigroup families, finite windows, quasi-Haar measures.
//! - [`space`]: compact metric spaces, shipped actions, orbits and ε-nets.
//! - [`almost_periodicity`]: ε-period sets, syndeticity gauges, finite-resolution
//!   certificates, equicontinuity estimates and Cauchy-product checks.
//! - [`orbit_algebra`]: the induced commutative product on an orbit closure.
//! - [`ergodic`]: Følner sequences, empirical measures, Haar measures of finite
//!   semigroups and convergence probes.
//! - [`experiment`]: config-driven experiment runner behind the CLI.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod almost_periodicity;
pub mod ergodic;
pub mod experiment;
pub mod error;
pub mod numeric;
pub mod orbit_algebra;
mod orbit_table;
pub mod semigroup;
pub mod space;
pub mod tags;

pub use error::{Error, Result};
