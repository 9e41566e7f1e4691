//! Desk-scale molecular dynamics for rigid multi-site molecules: adaptive
//! linked cells, leapfrog rigid-body integration and k-d tree load balancing
//! across message-passing workers.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod balance;
pub mod cells;
pub mod domain;
pub mod engine;
pub mod error;
pub mod field;
pub mod harness;
pub mod integrate;
pub mod math;
pub mod model;
pub mod potentials;
pub mod scenarios;
pub mod units;

pub use error::{Error, Result};
pub use math::{Quat, Vec3};
