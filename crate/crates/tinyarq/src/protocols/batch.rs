//! Two-packet batch protocols: cumulative feedback (CF) and coded ARQ.
//!
//! A batch is sent in two consecutive slots. After `k − 1` idle slots its
//! two observation slots follow, and the cumulative feedback is received in
//! the second of them (RTT `k + 1`). How the observations are classified
//! differs between the two protocols. The follow-up states are shared:
//!
//! * `A₂` loop: both packets are retransmitted, either at once (feedback
//!   received) or after the `T − k − 1` remaining timer slots (feedback lost).
//! * `A₁`: exactly one packet is missing and the sender knows it. From here
//!   the single-packet uncoded state machine applies (RTT `k`, timer `T`).
//! * `C₂`: everything was delivered but the acknowledgement was lost. The
//!   sender waits for a later cumulative acknowledgement and retransmits both
//!   packets on every timer expiry.
//!
//! Cumulative feedback classifies the two slots `(x₁y₁)(x₂y₂)` with the
//! composite products `P_ab·P_cd` grouped as follows:
//!
//! * done: `P00P00`
//! * `C₂`: `P01P01 + P01P00 + P00P01`
//! * retransmit both now: `P10P10 + P10P01 + P01P10`
//! * retransmit both at timeout: `P11P11 + P11P10 + P10P11`
//! * `A₁`: `P00P10 + P10P00 + P11P01 + P01P11 + P00P11 + P11P00`
//!
//! Coded ARQ observes the data outcome `x₁` of the first coded packet, then
//! the data outcome `x₂` of the second together with the feedback `y`
//! (triples `P_{x₁x₂y}`).
//!
//! * `000` done; `001` → `C₂`; `110` → retransmit both now; `111` →
//!   retransmit both at timeout.
//! * `100`, `010`: one degree of freedom missing and known → `A₁`, send one
//!   packet.
//! * `011`, `101`: one degree of freedom missing but the feedback was lost.
//!   This goes through `G₃`: wait out the timer, then `A₃`, which resends two
//!   coded packets although one would do. At `A₃` the batch completes if
//!   either packet arrives (then done, or `C₂` if the feedback is lost).
//!   If both are lost it goes to `A₁` (feedback received) or back through the
//!   timer to `A₃` (feedback lost).

use crate::channel::CompositeChannel;
use crate::gf::{Gain, GfError, MatrixGenFn};
use crate::matlib::{matpow, Matrix};

use super::uncoded::{ack_wait_delay, ack_wait_tau, single_packet_delay, single_packet_tau};
use super::{AnalysisConfig, AnalysisError, Protocol};

/// Outcome classes of one two-slot batch observation.
#[derive(Debug, Clone, Copy)]
struct BatchClasses {
    /// Both packets delivered, acknowledgement received.
    done: Matrix,
    /// Both delivered, acknowledgement lost.
    ack_lost: Matrix,
    /// Retransmit both now.
    nack: Matrix,
    /// Retransmit both after the timer.
    nack_lost: Matrix,
    /// One packet missing, sender informed.
    one_missing: Matrix,
    /// One degree of freedom missing, feedback lost (coded only).
    one_missing_blind: Matrix,
}

fn cf_classes(ch: &CompositeChannel) -> BatchClasses {
    let (p00, p01, p10, p11) = (ch.p00, ch.p01, ch.p10, ch.p11);
    BatchClasses {
        done: p00 * p00,
        ack_lost: p01 * p01 + p01 * p00 + p00 * p01,
        nack: p10 * p10 + p10 * p01 + p01 * p10,
        nack_lost: p11 * p11 + p11 * p10 + p10 * p11,
        one_missing: p00 * p10 + p10 * p00 + p11 * p01 + p01 * p11 + p00 * p11 + p11 * p00,
        one_missing_blind: Matrix::zeros(ch.dim()),
    }
}

fn coded_classes(ch: &CompositeChannel) -> BatchClasses {
    let t = |x, y, z| ch.pxyz(x, y, z);
    BatchClasses {
        done: t(0, 0, 0),
        ack_lost: t(0, 0, 1),
        nack: t(1, 1, 0),
        nack_lost: t(1, 1, 1),
        one_missing: t(1, 0, 0) + t(0, 1, 0),
        one_missing_blind: t(0, 1, 1) + t(1, 0, 1),
    }
}

/// Classes of the `A₃` retransmission, where one of two coded packets suffices.
fn coded_resend_classes(ch: &CompositeChannel) -> BatchClasses {
    let t = |x, y, z| ch.pxyz(x, y, z);
    BatchClasses {
        done: t(0, 0, 0) + t(0, 1, 0) + t(1, 0, 0),
        ack_lost: t(0, 0, 1) + t(0, 1, 1) + t(1, 0, 1),
        nack: Matrix::zeros(ch.dim()),
        nack_lost: t(1, 1, 1),
        one_missing: t(1, 1, 0),
        one_missing_blind: Matrix::zeros(ch.dim()),
    }
}

struct Batch<'a> {
    ch: &'a CompositeChannel,
    k: u32,
    t: u32,
    z: f64,
}

impl Batch<'_> {
    fn wait(&self) -> u32 {
        self.t - self.k - 1
    }

    /// Delay gain from the (re)transmission of a two-packet burst to the end,
    /// for outcome classes `c`. `blind` is the gain after a blind
    /// one-missing outcome (timer wait included).
    fn delay(&self, c: &BatchClasses, blind: Gain) -> Result<Gain, GfError> {
        let (ch, z) = (self.ch, self.z);
        let travel = Gain::slots(z, self.k - 1, &ch.p);
        let timer = Gain::slots(z, self.wait(), &ch.p);
        let obs = |m: Matrix| Gain::monomial(z, 2, m);
        let again = obs(c.nack) * travel + obs(c.nack_lost) * timer * travel;
        let exit = obs(c.done)
            + obs(c.ack_lost) * ack_wait_delay(ch, z)?
            + obs(c.one_missing) * single_packet_delay(ch, z, self.k, self.t)?
            + obs(c.one_missing_blind) * blind;
        Ok(travel * again.loop_inverse()? * exit)
    }

    /// Transmission gain with the same structure as [`Batch::delay`].
    fn tau(&self, c: &BatchClasses, blind: Gain) -> Result<Gain, GfError> {
        let (ch, z) = (self.ch, self.z);
        let send = Gain::monomial(z, 2, matpow(&ch.p, self.k - 1));
        let timer = matpow(&ch.p, self.wait());
        let again = Gain::constant(c.nack + c.nack_lost * timer) * send;
        let exit = Gain::constant(c.done)
            + Gain::constant(c.ack_lost) * ack_wait_tau(ch, z, self.wait(), self.t, 2)?
            + Gain::constant(c.one_missing) * single_packet_tau(ch, z, self.k, self.t)?
            + Gain::constant(c.one_missing_blind) * blind;
        Ok(send * again.loop_inverse()? * exit)
    }
}

fn check(cfg: &AnalysisConfig, expected: Protocol) -> Result<(), AnalysisError> {
    cfg.validate()?;
    if cfg.protocol != expected {
        return Err(AnalysisError::Config(format!(
            "{expected} analyzer called for {}",
            cfg.protocol
        )));
    }
    Ok(())
}

/// Transmission-count MGF of cumulative-feedback ARQ (per two-packet batch).
pub fn cf_mgf_tau(cfg: &AnalysisConfig) -> Result<MatrixGenFn, AnalysisError> {
    check(cfg, Protocol::CumulativeFeedback)?;
    let (ch, k, t) = (cfg.channel.clone(), cfg.k, cfg.t);
    Ok(MatrixGenFn::new(move |z| {
        let b = Batch { ch: &ch, k, t, z };
        b.tau(&cf_classes(&ch), Gain::zero(ch.dim()))
    }))
}

/// Delay MGF of cumulative-feedback ARQ (per two-packet batch).
pub fn cf_mgf_delay(cfg: &AnalysisConfig) -> Result<MatrixGenFn, AnalysisError> {
    check(cfg, Protocol::CumulativeFeedback)?;
    let (ch, k, t) = (cfg.channel.clone(), cfg.k, cfg.t);
    Ok(MatrixGenFn::new(move |z| {
        let b = Batch { ch: &ch, k, t, z };
        b.delay(&cf_classes(&ch), Gain::zero(ch.dim()))
    }))
}

/// Transmission-count MGF of coded ARQ (per two-packet batch).
pub fn coded_mgf_tau(cfg: &AnalysisConfig) -> Result<MatrixGenFn, AnalysisError> {
    check(cfg, Protocol::Coded)?;
    let (ch, k, t) = (cfg.channel.clone(), cfg.k, cfg.t);
    Ok(MatrixGenFn::new(move |z| {
        let b = Batch { ch: &ch, k, t, z };
        let zero = Gain::zero(ch.dim());
        let resend = b.tau(&coded_resend_classes(&ch), zero)?;
        let blind = Gain::constant(matpow(&ch.p, b.wait())) * resend;
        b.tau(&coded_classes(&ch), blind)
    }))
}

/// Delay MGF of coded ARQ (per two-packet batch).
pub fn coded_mgf_delay(cfg: &AnalysisConfig) -> Result<MatrixGenFn, AnalysisError> {
    check(cfg, Protocol::Coded)?;
    let (ch, k, t) = (cfg.channel.clone(), cfg.k, cfg.t);
    Ok(MatrixGenFn::new(move |z| {
        let b = Batch { ch: &ch, k, t, z };
        let zero = Gain::zero(ch.dim());
        let resend = b.delay(&coded_resend_classes(&ch), zero)?;
        let blind = Gain::slots(z, b.wait(), &ch.p) * resend;
        b.delay(&coded_classes(&ch), blind)
    }))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::channel::memoryless;

    fn total(c: &BatchClasses) -> Matrix {
        c.done + c.ack_lost + c.nack + c.nack_lost + c.one_missing + c.one_missing_blind
    }

    #[test]
    fn classes_partition_two_slots() {
        let ch = memoryless(0.3).unwrap();
        for c in [
            cf_classes(&ch),
            coded_classes(&ch),
            coded_resend_classes(&ch),
        ] {
            assert!((total(&c).get(0, 0) - 1.0).abs() < 1e-15);
        }
    }
}
