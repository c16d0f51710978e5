#![allow(dead_code)]

use tinyarq::channel::{composite, ge_from_target_erasure, memoryless, CompositeChannel};
use tinyarq::protocols::{AnalysisConfig, Protocol};

pub const EPS_GRID: [f64; 10] = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5];
pub const KT_GRID: [(u32, u32); 8] = [
    (5, 8),
    (5, 15),
    (5, 16),
    (5, 30),
    (10, 8),
    (10, 15),
    (10, 16),
    (10, 30),
];

/// Channel at stationary erasure `eps`: memoryless for `r = None`, otherwise
/// a Gilbert-Elliott chain with an error-free Good state and an always-erasing
/// Bad state.
pub fn channel(eps: f64, r: Option<f64>) -> CompositeChannel {
    match r {
        None => memoryless(eps).unwrap(),
        Some(r) => composite(&ge_from_target_erasure(r, 0.0, 1.0, eps).unwrap()),
    }
}

/// Admissible configurations of `protocol` over the (k, T) grid.
pub fn admissible(protocol: Protocol, eps: f64, r: Option<f64>) -> Vec<AnalysisConfig> {
    KT_GRID
        .iter()
        .filter_map(|&(k, t)| AnalysisConfig::new(protocol, k, t, channel(eps, r)).ok())
        .collect()
}

pub fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / b.abs().max(f64::MIN_POSITIVE)
}
