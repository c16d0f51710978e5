//! Throughput and delay analysis of selective-repeat ARQ protocols with tiny
//! codes over Gilbert-Elliott erasure channels with unreliable feedback.
//!
//! * [`matlib`]: small dense matrices (composite channels have at most four
//!   states).
//! * [`channel`]: Gilbert-Elliott links and the forward/reverse composite.
//! * [`gf`]: matrix generating functions, PGFs and their moments.
//! * [`protocols`]: analyzers for uncoded ARQ, Chase-combining HARQ,
//!   cumulative-feedback ARQ and coded ARQ, plus memoryless closed forms.
//! * [`sim`]: slot-accurate Monte Carlo simulation of the same protocols.
//! * [`stats`]: guaranteeable delay and sub-Gaussian tail fits.

// `!(x > 0.0)` and friends are used on purpose: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod channel;
pub mod gf;
pub mod matlib;
pub mod protocols;
pub mod sim;
pub mod stats;
