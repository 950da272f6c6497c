//! Reliability scores for feature attributions of tabular classifiers.
//!
//! A small feedforward network core ([`net`]), three attribution methods and
//! their ensemble ([`attribution`]), on-manifold neighbourhoods built from
//! validation medoids ([`neighbourhood`]) and rank-based robustness and
//! consistency scores ([`metrics`]). [`pipeline`] wires them into the
//! staged workflow driven by the command-line tool.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod attribution;
pub mod data;
pub mod error;
pub mod metrics;
pub mod neighbourhood;
pub mod net;
pub mod pipeline;
pub mod rng;

pub use error::{Error, Result};
