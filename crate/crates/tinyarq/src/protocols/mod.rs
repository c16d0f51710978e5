//! Generating-function analyzers for the four ARQ variants.
//!
//! Every analyzer is built the same way. The protocol is a state machine
//! whose transitions consume channel slots. Each slot is a matrix: `P` when
//! nothing is observed, `P_xy` when a data packet (forward) and a feedback
//! packet (reverse) are observed, and `P_·y` when only feedback is observed.
//! Chaining the slots gives a matrix signal-flow graph. Reducing it gives two
//! matrix generating functions:
//!
//! * the delay MGF `Φ_D(z)`, where every slot carries one factor `z`, and
//! * the transmission MGF `Φ_τ(z)`, where every packet transmission carries
//!   one factor `z`.
//!
//! Both start from the new-unit state law `π_I = π·P_0x` (see
//! [`CompositeChannel::new_unit_vector`]) and end when the sender receives the
//! acknowledgement that clears the unit.
//!
//! # Slot conventions
//!
//! Slots are numbered from the first transmission of a unit (slot 1). A
//! packet sent in slot `s` has its feedback received in slot `s + k − 1`. The
//! forward chain is read with a lag of `k − 1` slots: the data outcome of a
//! packet is drawn in the slot that carries its feedback. The forward and
//! reverse chains are independent and stationary, so this shift leaves the
//! joint law of all observations unchanged. It also lets one composite slot
//! matrix `P_xy` describe "data outcome and feedback outcome".
//!
//! * Single packet (uncoded, Chase-combining HARQ, and the one-packet
//!   sub-protocol of the batch schemes): RTT `k`, post-feedback wait
//!   `T − k` before the timer fires.
//! * Two-packet batch (cumulative feedback, coded): packets in consecutive
//!   slots, one observation slot each, feedback in the second. RTT is `k + 1`
//!   and the post-feedback wait is `T − k − 1`.
//! * Lost positive feedback (C states): every following slot carries a fresh
//!   cumulative acknowledgement, observed on the reverse link only. If the
//!   timer fires first, the last burst (one or two packets) is retransmitted
//!   and the timer restarts with period `T`.

mod batch;
pub mod closed_forms;
mod harq;
mod uncoded;

use thiserror::Error;

use crate::channel::{CompositeChannel, Link};
use crate::gf::{metrics_from_pgfs, DiffMode, GfError, MatrixGenFn, Metrics, Pgf};

pub use batch::{cf_mgf_delay, cf_mgf_tau, coded_mgf_delay, coded_mgf_tau};
pub use harq::{harq_mgf_delay, harq_mgf_tau};
pub use uncoded::{uncoded_mgf_delay, uncoded_mgf_tau};

/// Errors raised by the analyzers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum AnalysisError {
    /// The configuration violates a protocol admissibility rule.
    #[error("invalid analysis configuration: {0}")]
    Config(String),
    /// Generating-function evaluation failed.
    #[error(transparent)]
    Gf(#[from] GfError),
}

/// The protocol variants.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Protocol {
    /// Selective-repeat ARQ, one packet at a time.
    Uncoded,
    /// Uncoded ARQ with Chase combining of data retransmissions.
    HarqChase,
    /// Two-packet batches with cumulative feedback, no coding.
    CumulativeFeedback,
    /// Two MDS-coded packets per batch with rate adaptation.
    Coded,
}

impl Protocol {
    /// All variants in canonical order.
    pub const ALL: [Protocol; 4] = [
        Protocol::Uncoded,
        Protocol::HarqChase,
        Protocol::CumulativeFeedback,
        Protocol::Coded,
    ];

    /// Short lowercase name used in files and on the command line.
    pub fn name(self) -> &'static str {
        match self {
            Protocol::Uncoded => "uncoded",
            Protocol::HarqChase => "harq",
            Protocol::CumulativeFeedback => "cf",
            Protocol::Coded => "coded",
        }
    }

    /// Parse a name produced by [`Protocol::name`].
    pub fn from_name(s: &str) -> Option<Protocol> {
        Protocol::ALL.into_iter().find(|p| p.name() == s)
    }

    /// Packets delivered by one renewal unit.
    pub fn packets_per_unit(self) -> u32 {
        match self {
            Protocol::Uncoded | Protocol::HarqChase => 1,
            Protocol::CumulativeFeedback | Protocol::Coded => 2,
        }
    }

    /// Round-trip time of a fresh unit, in slots.
    pub fn rtt(self, k: u32) -> u32 {
        match self {
            Protocol::Uncoded | Protocol::HarqChase => k,
            Protocol::CumulativeFeedback | Protocol::Coded => k + 1,
        }
    }

    /// Smallest admissible timeout for RTT parameter `k`.
    pub fn min_timeout(self, k: u32) -> u32 {
        self.rtt(k)
    }
}

impl std::fmt::Display for Protocol {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Chase-combining erasure schedule: `ε_B(m) = 1 − e^{−α/m}` on attempt `m`,
/// with the Good state error-free.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ErasureSchedule {
    /// Combined channel-quality parameter `α > 0`.
    pub alpha: f64,
}

impl ErasureSchedule {
    /// Bad-state (or memoryless) erasure probability on attempt `m ≥ 1`.
    pub fn eps_b(&self, m: u32) -> f64 {
        -(-self.alpha / f64::from(m)).exp_m1()
    }

    /// Per-state forward erasures on attempt `m` for a link with the given
    /// state count: `[ε(m)]` for a memoryless link, `[0, ε_B(m)]` otherwise.
    pub fn forward_erasures(&self, states: usize, m: u32) -> Vec<f64> {
        let e = self.eps_b(m);
        if states == 1 {
            vec![e]
        } else {
            vec![0.0, e]
        }
    }

    /// Forward link for attempt `m`, derived from the base link's chain.
    pub fn forward_link(&self, base: &Link, m: u32) -> Link {
        base.with_erasures(&self.forward_erasures(base.dim(), m))
    }
}

/// Default truncation tolerance for infinite attempt series.
pub const DEFAULT_SERIES_TOL: f64 = 1e-12;
/// Default cap on attempt-series terms.
pub const DEFAULT_SERIES_MAX_TERMS: usize = 500;

/// Everything an analyzer needs.
#[derive(Debug, Clone, PartialEq)]
pub struct AnalysisConfig {
    /// Protocol variant.
    pub protocol: Protocol,
    /// RTT parameter in slots.
    pub k: u32,
    /// Timeout in slots.
    pub t: u32,
    /// Composite channel law.
    pub channel: CompositeChannel,
    /// Chase-combining parameter α (ignored by the other protocols).
    pub harq_alpha: f64,
    /// Truncation tolerance of the attempt series.
    pub series_tol: f64,
    /// Term cap of the attempt series.
    pub series_max_terms: usize,
}

impl AnalysisConfig {
    /// Validated configuration with default series settings and α = 10ε
    /// (the smallest positive float when ε = 0, which erases nothing).
    pub fn new(
        protocol: Protocol,
        k: u32,
        t: u32,
        channel: CompositeChannel,
    ) -> Result<Self, AnalysisError> {
        let harq_alpha = (10.0 * channel.eps).max(f64::MIN_POSITIVE);
        let cfg = AnalysisConfig {
            protocol,
            k,
            t,
            channel,
            harq_alpha,
            series_tol: DEFAULT_SERIES_TOL,
            series_max_terms: DEFAULT_SERIES_MAX_TERMS,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Replace the Chase-combining parameter.
    pub fn with_harq_alpha(mut self, alpha: f64) -> Result<Self, AnalysisError> {
        self.harq_alpha = alpha;
        self.validate()?;
        Ok(self)
    }

    /// Check admissibility.
    pub fn validate(&self) -> Result<(), AnalysisError> {
        if self.k < 1 {
            return Err(AnalysisError::Config("k must be at least 1".into()));
        }
        let min_t = self.protocol.min_timeout(self.k);
        if self.t < min_t {
            return Err(AnalysisError::Config(format!(
                "{} needs T ≥ {min_t} for k = {}, got T = {}",
                self.protocol, self.k, self.t
            )));
        }
        if self.protocol == Protocol::HarqChase && !(self.harq_alpha > 0.0) {
            return Err(AnalysisError::Config(format!(
                "Chase combining needs α > 0, got {}",
                self.harq_alpha
            )));
        }
        if !(self.series_tol > 0.0) || self.series_max_terms == 0 {
            return Err(AnalysisError::Config(
                "series tolerance and term cap must be positive".into(),
            ));
        }
        Ok(())
    }

    /// Chase-combining schedule.
    pub fn schedule(&self) -> ErasureSchedule {
        ErasureSchedule {
            alpha: self.harq_alpha,
        }
    }

    /// Post-feedback wait of a fresh unit, `T − RTT`.
    pub fn wait(&self) -> u32 {
        self.t - self.protocol.rtt(self.k)
    }
}

/// Transmission-count MGF of the configured protocol.
pub fn mgf_tau(cfg: &AnalysisConfig) -> Result<MatrixGenFn, AnalysisError> {
    match cfg.protocol {
        Protocol::Uncoded => uncoded_mgf_tau(cfg),
        Protocol::HarqChase => harq_mgf_tau(cfg),
        Protocol::CumulativeFeedback => cf_mgf_tau(cfg),
        Protocol::Coded => coded_mgf_tau(cfg),
    }
}

/// Delay MGF of the configured protocol.
pub fn mgf_delay(cfg: &AnalysisConfig) -> Result<MatrixGenFn, AnalysisError> {
    match cfg.protocol {
        Protocol::Uncoded => uncoded_mgf_delay(cfg),
        Protocol::HarqChase => harq_mgf_delay(cfg),
        Protocol::CumulativeFeedback => cf_mgf_delay(cfg),
        Protocol::Coded => coded_mgf_delay(cfg),
    }
}

/// The scalar PGFs `(φ_τ, φ_D)`.
pub fn pgfs(cfg: &AnalysisConfig) -> Result<(Pgf, Pgf), AnalysisError> {
    let pi_i = cfg.channel.new_unit_vector();
    let tau = Pgf::new(mgf_tau(cfg)?, pi_i.clone())?;
    let delay = Pgf::new(mgf_delay(cfg)?, pi_i)?;
    Ok((tau, delay))
}

/// `(φ_τ(1), φ_D(1))`; both equal 1 for a correctly normalized analyzer.
pub fn normalization(cfg: &AnalysisConfig) -> Result<(f64, f64), AnalysisError> {
    let (tau, delay) = pgfs(cfg)?;
    Ok((tau.value(1.0)?, delay.value(1.0)?))
}

/// Throughput and delay metrics.
pub fn analyze(cfg: &AnalysisConfig, mode: DiffMode) -> Result<Metrics, AnalysisError> {
    let (tau, delay) = pgfs(cfg)?;
    Ok(metrics_from_pgfs(
        &tau,
        &delay,
        f64::from(cfg.protocol.packets_per_unit()),
        mode,
    )?)
}
