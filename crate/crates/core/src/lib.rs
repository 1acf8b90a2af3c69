//! Spin-dynamics simulation of an NV electron / 13C register, where a
//! conditional rotation of the nuclear spin is produced by free evolution
//! alone.

#![allow(clippy::neg_cmp_op_on_partial_ord)] // negated forms also reject NaN

pub mod dsl;
pub mod engine;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod model;

pub use error::{Error, Result};
