//! Uncoded selective-repeat ARQ and the branch gains shared by all analyzers.
//!
//! State machine of one packet:
//!
//! * `I → A`: transmit, then `k − 1` idle slots; the packet's data outcome
//!   and its feedback are observed together in slot `k` (`P_xy`).
//! * `A`, data lost and NACK received (`P_10`): retransmit at once.
//! * `A`, data lost and NACK lost (`P_11`): wait `T − k` slots for the timer,
//!   then retransmit.
//! * `A`, data delivered and ACK received (`P_00`): done.
//! * `A`, data delivered and ACK lost (`P_01`): state `C`; every following slot
//!   carries a fresh acknowledgement (`P_x1` lost, `P_x0` received). Timer
//!   expiries cause spurious retransmissions that cost transmissions but not
//!   delay.

use crate::channel::CompositeChannel;
use crate::gf::{Gain, GfError, MatrixGenFn};
use crate::matlib::{geom_sum, matpow};

use super::{AnalysisConfig, AnalysisError, Protocol};

/// Delay gain of a C state: `(I − zP_x1)⁻¹ zP_x0`.
pub(crate) fn ack_wait_delay(ch: &CompositeChannel, z: f64) -> Result<Gain, GfError> {
    let lost = Gain::monomial(z, 1, ch.px1).loop_inverse()?;
    Ok(lost * Gain::monomial(z, 1, ch.px0))
}

/// Transmission gain of a C state entered with `wait` slots left on the
/// timer, retransmitting `burst` packets at every expiry (period `t`):
///
/// `Σ_{j<wait} P_x1^j P_x0 + P_x1^wait (I − z^burst P_x1^t)⁻¹ z^burst Σ_{j<t} P_x1^j P_x0`.
pub(crate) fn ack_wait_tau(
    ch: &CompositeChannel,
    z: f64,
    wait: u32,
    t: u32,
    burst: u32,
) -> Result<Gain, GfError> {
    let before = Gain::constant(geom_sum(&ch.px1, wait) * ch.px0);
    let cycle = Gain::monomial(z, burst, matpow(&ch.px1, t)).loop_inverse()?;
    let after = Gain::constant(matpow(&ch.px1, wait))
        * cycle
        * Gain::monomial(z, burst, geom_sum(&ch.px1, t) * ch.px0);
    Ok(before + after)
}

/// Delay gain of a single packet from its (re)transmission until the
/// clearing acknowledgement; timer `t`, RTT `k`.
pub(crate) fn single_packet_delay(
    ch: &CompositeChannel,
    z: f64,
    k: u32,
    t: u32,
) -> Result<Gain, GfError> {
    let travel = Gain::slots(z, k - 1, &ch.p);
    let nack = Gain::monomial(z, 1, ch.p10) * travel;
    let timeout = Gain::monomial(z, 1, ch.p11) * Gain::slots(z, t - k, &ch.p) * travel;
    let exit = Gain::monomial(z, 1, ch.p00) + Gain::monomial(z, 1, ch.p01) * ack_wait_delay(ch, z)?;
    Ok(travel * (nack + timeout).loop_inverse()? * exit)
}

/// Transmission gain of a single packet; same state machine as
/// [`single_packet_delay`], markers on transmissions.
pub(crate) fn single_packet_tau(
    ch: &CompositeChannel,
    z: f64,
    k: u32,
    t: u32,
) -> Result<Gain, GfError> {
    let send = Gain::monomial(z, 1, matpow(&ch.p, k - 1));
    let retry = Gain::constant(ch.p10 + ch.p11 * matpow(&ch.p, t - k)) * send;
    let exit = Gain::constant(ch.p00) + Gain::constant(ch.p01) * ack_wait_tau(ch, z, t - k, t, 1)?;
    Ok(send * retry.loop_inverse()? * exit)
}

fn check(cfg: &AnalysisConfig) -> Result<(), AnalysisError> {
    cfg.validate()?;
    if cfg.protocol != Protocol::Uncoded {
        return Err(AnalysisError::Config(format!(
            "uncoded analyzer called for {}",
            cfg.protocol
        )));
    }
    Ok(())
}

/// Transmission-count MGF of uncoded ARQ.
pub fn uncoded_mgf_tau(cfg: &AnalysisConfig) -> Result<MatrixGenFn, AnalysisError> {
    check(cfg)?;
    let (ch, k, t) = (cfg.channel.clone(), cfg.k, cfg.t);
    Ok(MatrixGenFn::new(move |z| single_packet_tau(&ch, z, k, t)))
}

/// Delay MGF of uncoded ARQ.
pub fn uncoded_mgf_delay(cfg: &AnalysisConfig) -> Result<MatrixGenFn, AnalysisError> {
    check(cfg)?;
    let (ch, k, t) = (cfg.channel.clone(), cfg.k, cfg.t);
    Ok(MatrixGenFn::new(move |z| single_packet_delay(&ch, z, k, t)))
}
