//! Gaussian-process feed-forward control with variance-gated feedback for
//! segmented soft robots, plus the planar robot simulator and experiment
//! harness used to exercise it.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod controller;
pub mod error;
pub mod gp;
pub mod harness;
pub mod sim;

pub use error::{Error, Result};
