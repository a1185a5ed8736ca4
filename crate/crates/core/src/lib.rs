//! Audit harness for recorded trading-agent backtests.
//!
//! Replays decision logs through a friction-aware engine, computes gross and
//! net metrics with Sharpe uncertainty, calibration and counterfactual
//! diagnostics, and grades the evidence against six protocols to decide the
//! strongest claim tier it supports.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod backtest;
pub mod calibration;
pub mod counterfactual;
pub mod datamodel;
pub mod disaggregation;
mod error;
pub mod friction;
pub mod par;
pub mod protocol;
pub mod report;
pub mod sharpestats;

pub use error::{Error, Result};
