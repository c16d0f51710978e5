//! Delay-distribution post-processing: guaranteeable delay, sub-Gaussian
//! tail fits and reliability-targeted delay bounds.

use thiserror::Error;

/// Errors raised by the tail fit.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum StatsError {
    /// Fewer than two tail points with positive probability beyond the RTT.
    #[error("tail too short to fit: {points} usable point(s)")]
    InsufficientTail {
        /// Usable points found.
        points: usize,
    },
}

/// One-parameter dominating Gaussian tail `P(D > d) ≤ e^{−v d²}`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TailFit {
    /// Rate `v` in slots⁻² (0 when invalid).
    pub v: f64,
    /// Largest observed delay.
    pub support_max: u64,
    /// False when the tail was too short to fit.
    pub valid: bool,
}

impl TailFit {
    /// Placeholder for a tail that could not be fitted.
    pub fn invalid(support_max: u64) -> Self {
        TailFit {
            v: 0.0,
            support_max,
            valid: false,
        }
    }

    /// The bound `e^{−v d²}` (`None` when invalid).
    pub fn bound(&self, d: u64) -> Option<f64> {
        self.valid.then(|| (-self.v * (d as f64).powi(2)).exp())
    }
}

/// Guaranteeable delay `mean + 3·sqrt(variance)`.
pub fn guaranteeable_delay(mean: f64, variance: f64) -> f64 {
    mean + 3.0 * variance.max(0.0).sqrt()
}

/// Largest `v` such that `e^{−v d²}` dominates every CCDF point `(d, P(D>d))`
/// with `d > rtt` and `P(D>d) > 0`, i.e. `v = min −ln P(D>d) / d²`.
pub fn fit_subgaussian(ccdf: &[(u64, f64)], rtt: u64) -> Result<TailFit, StatsError> {
    let support_max = ccdf.iter().map(|&(d, _)| d).max().unwrap_or(0);
    let tail: Vec<(u64, f64)> = ccdf
        .iter()
        .copied()
        .filter(|&(d, p)| d > rtt && d > 0 && p > 0.0)
        .collect();
    if tail.len() < 2 {
        return Err(StatsError::InsufficientTail { points: tail.len() });
    }
    let v = tail
        .iter()
        .map(|&(d, p)| -p.ln() / (d as f64).powi(2))
        .fold(f64::INFINITY, f64::min);
    Ok(TailFit {
        v,
        support_max,
        valid: true,
    })
}

/// Smallest `d` with `e^{−v d²} ≤ 10^{target_log10_failure}`:
/// `sqrt(−target · ln 10 / v)`.
pub fn delay_for_reliability(v: f64, target_log10_failure: i32) -> f64 {
    (-f64::from(target_log10_failure) * std::f64::consts::LN_10 / v).sqrt()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fit_example() {
        let fit = fit_subgaussian(&[(10, (-1.0f64).exp()), (20, (-4.0f64).exp())], 0).unwrap();
        assert!((fit.v - 0.01).abs() < 1e-15);
        assert_eq!(fit.support_max, 20);
    }

    #[test]
    fn short_tail_rejected() {
        assert_eq!(
            fit_subgaussian(&[(10, 0.5), (11, 0.0)], 0),
            Err(StatsError::InsufficientTail { points: 1 })
        );
    }

    #[test]
    fn reliability_examples() {
        assert!((delay_for_reliability(3e-4, -9) - 262.826088488).abs() < 1e-8);
        assert!((delay_for_reliability(std::f64::consts::LN_10, -1) - 1.0).abs() < 1e-15);
        assert_eq!(guaranteeable_delay(10.0, 4.0), 16.0);
    }
}
