//! Uncoded ARQ with Chase combining.
//!
//! The state machine is the uncoded one. The difference is that the data
//! outcome of attempt `m` uses the schedule `ε_B(m) = 1 − e^{−α/m}` (Good
//! state error-free). The feedback link keeps the base erasure law. The loop
//! at state `A` therefore changes from attempt to attempt, and the MGF is the
//! attempt series
//!
//! `Φ = (entry) Σ_{j≥0} [Π_{m=1..j} L(m)] E(j+1)`,
//!
//! where `L(m)` is the failed-attempt loop gain and `E(m)` the exit through
//! a successful attempt `m`. The series is truncated once the accumulated
//! product, and both of its derivatives, fall below the tolerance.

use crate::channel::CompositeChannel;
use crate::gf::{Gain, GfError, MatrixGenFn};
use crate::matlib::matpow;

use super::uncoded::{ack_wait_delay, ack_wait_tau};
use super::{AnalysisConfig, AnalysisError, Protocol};

fn check(cfg: &AnalysisConfig) -> Result<(), AnalysisError> {
    cfg.validate()?;
    if cfg.protocol != Protocol::HarqChase {
        return Err(AnalysisError::Config(format!(
            "Chase-combining analyzer called for {}",
            cfg.protocol
        )));
    }
    Ok(())
}

/// Composite channel seen by attempt `m`.
pub(crate) fn attempt_channel(cfg: &AnalysisConfig, m: u32) -> CompositeChannel {
    let forward = cfg.schedule().forward_link(cfg.channel.forward(), m);
    CompositeChannel::from_links(forward, cfg.channel.reverse().clone())
}

fn attempt_series<L, E>(
    cfg: &AnalysisConfig,
    entry: Gain,
    mut loop_gain: L,
    mut exit: E,
) -> Result<Gain, GfError>
where
    L: FnMut(&CompositeChannel) -> Result<Gain, GfError>,
    E: FnMut(&CompositeChannel) -> Result<Gain, GfError>,
{
    let dim = cfg.channel.dim();
    let mut product = Gain::identity(dim);
    let mut total = Gain::zero(dim);
    for m in 1..=cfg.series_max_terms as u32 {
        let ch = attempt_channel(cfg, m);
        total = total + product * exit(&ch)?;
        product = product * loop_gain(&ch)?;
        let size = product
            .value
            .max_abs()
            .max(product.d1.max_abs())
            .max(product.d2.max_abs());
        if size < cfg.series_tol {
            return Ok(entry * total);
        }
    }
    Err(GfError::TruncationFailure {
        terms: cfg.series_max_terms,
    })
}

/// Transmission-count MGF of Chase-combining ARQ.
pub fn harq_mgf_tau(cfg: &AnalysisConfig) -> Result<MatrixGenFn, AnalysisError> {
    check(cfg)?;
    let cfg = cfg.clone();
    Ok(MatrixGenFn::new(move |z| {
        let (k, t) = (cfg.k, cfg.t);
        let send = Gain::monomial(z, 1, matpow(&cfg.channel.p, k - 1));
        let wait = matpow(&cfg.channel.p, t - k);
        let ack_wait = ack_wait_tau(&cfg.channel, z, t - k, t, 1)?;
        attempt_series(
            &cfg,
            send,
            |ch| Ok(Gain::constant(ch.p10 + ch.p11 * wait) * send),
            |ch| Ok(Gain::constant(ch.p00) + Gain::constant(ch.p01) * ack_wait),
        )
    }))
}

/// Delay MGF of Chase-combining ARQ.
pub fn harq_mgf_delay(cfg: &AnalysisConfig) -> Result<MatrixGenFn, AnalysisError> {
    check(cfg)?;
    let cfg = cfg.clone();
    Ok(MatrixGenFn::new(move |z| {
        let (k, t) = (cfg.k, cfg.t);
        let travel = Gain::slots(z, k - 1, &cfg.channel.p);
        let timer = Gain::slots(z, t - k, &cfg.channel.p) * travel;
        let ack_wait = ack_wait_delay(&cfg.channel, z)?;
        attempt_series(
            &cfg,
            travel,
            |ch| Ok(Gain::monomial(z, 1, ch.p10) * travel + Gain::monomial(z, 1, ch.p11) * timer),
            |ch| Ok(Gain::monomial(z, 1, ch.p00) + Gain::monomial(z, 1, ch.p01) * ack_wait),
        )
    }))
}
