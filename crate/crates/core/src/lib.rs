//! Collapse and revival of collective Rabi oscillations in Rydberg-blockaded
//! atomic ensembles.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod detection;
pub mod dynamics;
pub mod ensemble;
pub mod error;
pub mod io;
pub mod jc_reference;
pub mod ode;
pub mod open_system;
pub mod parallel;
pub mod statespace;
pub mod superatom;
pub mod units;

pub use error::{Error, Result};
