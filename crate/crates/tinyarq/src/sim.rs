//! Slot-accurate Monte Carlo simulation of the four protocols.
//!
//! The simulator walks the same state machines as the analyzers (see
//! [`crate::protocols`]), one renewal unit at a time: a packet for uncoded
//! ARQ and Chase combining, a two-packet batch for cumulative feedback and
//! coded ARQ. The forward and reverse Gilbert-Elliott chains advance once per
//! slot. Observations are drawn only when the protocol looks at a slot:
//!
//! * data outcome and feedback together in the slot that carries the
//!   feedback of a packet (forward chain read with a lag of `k − 1` slots),
//! * data only in the first observation slot of a coded batch,
//! * feedback only while waiting for a cumulative acknowledgement.
//!
//! Idle stretches (the `k − 1` travel slots and timer waits) are skipped by
//! sampling the chain state after `n` steps directly from `Pⁿ`.
//!
//! Every unit starts from a composite state drawn from the new-unit law
//! `π·P_0x` (normalized): the channel is stationary and the slot before the
//! unit delivered data. This is the start law used by the analyzers.
//!
//! # Random streams
//!
//! Replication `i` of a run with seed `s` uses
//! `ChaCha8Rng::seed_from_u64(s)` with `set_stream(i)`. Units are split
//! over replications as evenly as possible, with the first replications
//! taking the remainder. Replications run in parallel and are merged in
//! index order, so results do not depend on the thread count.

use std::io::{self, Write};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

use crate::channel::Link;
use crate::protocols::{AnalysisConfig, AnalysisError, ErasureSchedule, Protocol};

/// Smallest unit count accepted for a statistics-producing run.
pub const MIN_UNITS: u64 = 1000;

/// Histogram bins cover delays up to `HISTOGRAM_CAP_FACTOR · T` slots.
pub const HISTOGRAM_CAP_FACTOR: u64 = 100;

/// Errors raised by the simulator.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum SimError {
    /// Inconsistent simulation or protocol parameters.
    #[error("invalid simulation configuration: {0}")]
    Config(String),
    /// A CCDF was requested from a run without delay samples.
    #[error("no delay samples")]
    EmptySample,
}

impl From<AnalysisError> for SimError {
    fn from(e: AnalysisError) -> Self {
        SimError::Config(e.to_string())
    }
}

/// Simulation parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct SimConfig {
    /// Protocol, timing and channel.
    pub analysis: AnalysisConfig,
    /// Units over all replications (packets or two-packet batches).
    pub n_units: u64,
    /// Units simulated and discarded at the start of every replication.
    pub warmup_units: u64,
    /// Base seed.
    pub seed: u64,
    /// Number of independent replications.
    pub replications: u32,
}

impl SimConfig {
    /// Default replication count.
    pub const DEFAULT_REPLICATIONS: u32 = 8;

    /// Configuration with the default warmup (1% of `n_units`, at least 100)
    /// and [`SimConfig::DEFAULT_REPLICATIONS`] replications.
    pub fn new(analysis: AnalysisConfig, n_units: u64, seed: u64) -> Result<Self, SimError> {
        let cfg = SimConfig {
            analysis,
            n_units,
            warmup_units: (n_units / 100).max(100),
            seed,
            replications: Self::DEFAULT_REPLICATIONS,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    /// Replace the replication count.
    pub fn with_replications(mut self, replications: u32) -> Result<Self, SimError> {
        self.replications = replications;
        self.validate()?;
        Ok(self)
    }

    /// Check consistency.
    pub fn validate(&self) -> Result<(), SimError> {
        self.analysis.validate()?;
        if self.n_units < MIN_UNITS {
            return Err(SimError::Config(format!(
                "n_units = {} is below the minimum of {MIN_UNITS}",
                self.n_units
            )));
        }
        if self.replications == 0 || u64::from(self.replications) > self.n_units {
            return Err(SimError::Config(format!(
                "replications = {} must lie in [1, n_units]",
                self.replications
            )));
        }
        Ok(())
    }

    fn units_of(&self, replication: u32) -> u64 {
        let r = u64::from(self.replications);
        let base = self.n_units / r;
        base + u64::from(u64::from(replication) < self.n_units % r)
    }
}

/// Delay counts in unit-width bins, with the rare samples above the cap kept
/// individually.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DelayHistogram {
    counts: Vec<u64>,
    overflow: Vec<u64>,
}

impl DelayHistogram {
    /// Empty histogram with bins `0..=cap`.
    pub fn new(cap: u64) -> Self {
        DelayHistogram {
            counts: vec![0; cap as usize + 1],
            overflow: Vec::new(),
        }
    }

    /// Largest binned delay.
    pub fn cap(&self) -> u64 {
        self.counts.len() as u64 - 1
    }

    /// Record one sample.
    pub fn record(&mut self, d: u64) {
        match self.counts.get_mut(d as usize) {
            Some(c) => *c += 1,
            None => self.overflow.push(d),
        }
    }

    /// Number of samples.
    pub fn len(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.overflow.len() as u64
    }

    /// True when no sample was recorded.
    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Samples above the cap.
    pub fn overflow_count(&self) -> u64 {
        self.overflow.len() as u64
    }

    /// `(delay, count)` pairs with nonzero count, in increasing delay order.
    pub fn counts(&self) -> Vec<(u64, u64)> {
        let mut out: Vec<(u64, u64)> = self
            .counts
            .iter()
            .enumerate()
            .filter(|(_, &c)| c > 0)
            .map(|(d, &c)| (d as u64, c))
            .collect();
        let mut over = self.overflow.clone();
        over.sort_unstable();
        for d in over {
            match out.last_mut() {
                Some((last, c)) if *last == d => *c += 1,
                _ => out.push((d, 1)),
            }
        }
        out
    }

    /// Smallest and largest sample.
    pub fn range(&self) -> Option<(u64, u64)> {
        let c = self.counts();
        Some((c.first()?.0, c.last()?.0))
    }

    fn merge(&mut self, other: &DelayHistogram) {
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        self.overflow.extend_from_slice(&other.overflow);
    }
}

/// Aggregated outcome of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct SimResult {
    /// Protocol simulated.
    pub protocol: Protocol,
    /// RTT of a fresh unit for this protocol.
    pub rtt: u64,
    /// Delay samples, one per unit.
    pub delays: DelayHistogram,
    /// Units counted (warmup excluded).
    pub units: u64,
    /// Packet transmissions, including spurious retransmissions.
    pub total_transmission_slots: u64,
    /// Packets delivered.
    pub delivered_packets: u64,
    /// Forward erasures observed on data packets.
    pub observed_erasures: u64,
    /// `delivered_packets / total_transmission_slots`.
    pub empirical_throughput: f64,
    /// Standard error of the throughput (delta method).
    pub throughput_se: f64,
    /// Sample mean of the delay.
    pub delay_mean: f64,
    /// Unbiased sample variance of the delay.
    pub delay_variance: f64,
    /// Standard error of the mean delay.
    pub delay_mean_se: f64,
    /// Throughput of each replication.
    pub replication_throughputs: Vec<f64>,
    /// Mean delay of each replication.
    pub replication_mean_delays: Vec<f64>,
}

impl SimResult {
    /// Empirical guaranteeable delay `mean + 3·sd`.
    pub fn guaranteeable_delay(&self) -> f64 {
        self.delay_mean + 3.0 * self.delay_variance.sqrt()
    }

    /// Write every delay sample, one per line, in increasing order.
    pub fn write_samples<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (d, c) in self.delays.counts() {
            for _ in 0..c {
                writeln!(out, "{d}")?;
            }
        }
        Ok(())
    }
}

/// Per-replication accumulator.
#[derive(Debug, Clone)]
struct Tally {
    delays: DelayHistogram,
    units: u64,
    tx: u64,
    tx_sq: u128,
    delay_sum: u128,
    delay_sq: u128,
    erasures: u64,
}

impl Tally {
    fn new(cap: u64) -> Self {
        Tally {
            delays: DelayHistogram::new(cap),
            units: 0,
            tx: 0,
            tx_sq: 0,
            delay_sum: 0,
            delay_sq: 0,
            erasures: 0,
        }
    }

    fn record(&mut self, unit: &UnitOutcome) {
        self.delays.record(unit.delay);
        self.units += 1;
        self.tx += unit.tx;
        self.tx_sq += u128::from(unit.tx) * u128::from(unit.tx);
        self.delay_sum += u128::from(unit.delay);
        self.delay_sq += u128::from(unit.delay) * u128::from(unit.delay);
        self.erasures += unit.erasures;
    }

    fn merge(&mut self, other: &Tally) {
        self.delays.merge(&other.delays);
        self.units += other.units;
        self.tx += other.tx;
        self.tx_sq += other.tx_sq;
        self.delay_sum += other.delay_sum;
        self.delay_sq += other.delay_sq;
        self.erasures += other.erasures;
    }

    fn mean_delay(&self) -> f64 {
        self.delay_sum as f64 / self.units as f64
    }
}

/// One link's chain, sampled directly.
#[derive(Debug, Clone)]
struct LinkSampler {
    /// `P(G → B)`.
    q: f64,
    /// `P(B → G)`.
    r: f64,
    two_state: bool,
    erasures: Vec<f64>,
}

impl LinkSampler {
    fn new(link: &Link) -> Self {
        let two_state = link.dim() == 2;
        let (q, r) = if two_state {
            (link.transition().get(0, 1), link.transition().get(1, 0))
        } else {
            (0.0, 0.0)
        };
        LinkSampler {
            q,
            r,
            two_state,
            erasures: link.erasures().to_vec(),
        }
    }

    /// State after `n ≥ 1` steps from `s`: `Pⁿ = Π + λⁿ(I − Π)`, `λ = 1 − q − r`.
    fn advance<R: Rng>(&self, s: usize, n: u64, rng: &mut R) -> usize {
        if !self.two_state || n == 0 {
            return s;
        }
        let to_bad = if n == 1 {
            if s == 0 {
                self.q
            } else {
                1.0 - self.r
            }
        } else {
            let pi_b = self.q / (self.q + self.r);
            let lambda = 1.0 - self.q - self.r;
            let decay = lambda.powf(n as f64);
            pi_b + decay * (f64::from(u8::from(s == 1)) - pi_b)
        };
        usize::from(rng.random::<f64>() < to_bad)
    }
}

/// State of one unit walk.
struct Walk<'a, R: Rng> {
    rng: &'a mut R,
    fwd: &'a LinkSampler,
    rev: &'a LinkSampler,
    schedule: Option<ErasureSchedule>,
    fs: usize,
    rs: usize,
    delay: u64,
    tx: u64,
    erasures: u64,
}

#[derive(Debug, Clone, Copy)]
struct UnitOutcome {
    delay: u64,
    tx: u64,
    erasures: u64,
}

impl<R: Rng> Walk<'_, R> {
    /// `n` slots without observation.
    fn idle(&mut self, n: u32) {
        let n = u64::from(n);
        self.fs = self.fwd.advance(self.fs, n, self.rng);
        self.rs = self.rev.advance(self.rs, n, self.rng);
        self.delay += n;
    }

    fn forward_erased(&mut self, attempt: u32) -> bool {
        let p = match self.schedule {
            // Same law as `ErasureSchedule::forward_erasures`, without allocating.
            Some(_) if self.fwd.two_state && self.fs == 0 => 0.0,
            Some(s) => s.eps_b(attempt),
            None => self.fwd.erasures[self.fs],
        };
        let erased = self.rng.random::<f64>() < p;
        self.erasures += u64::from(erased);
        erased
    }

    fn reverse_erased(&mut self) -> bool {
        self.rng.random::<f64>() < self.rev.erasures[self.rs]
    }

    /// One slot observing data and feedback: `(data erased, feedback erased)`.
    fn observe_both(&mut self, attempt: u32) -> (bool, bool) {
        self.idle(1);
        let x = self.forward_erased(attempt);
        (x, self.reverse_erased())
    }

    /// One slot observing data only.
    fn observe_data(&mut self) -> bool {
        self.idle(1);
        self.forward_erased(1)
    }

    /// One slot observing feedback only.
    fn observe_feedback(&mut self) -> bool {
        self.idle(1);
        self.reverse_erased()
    }

    /// Wait for a cumulative acknowledgement after a lost one. The timer has
    /// `wait` slots left and then fires every `t` slots, each time
    /// retransmitting `burst` packets.
    fn ack_wait(&mut self, wait: u32, t: u32, burst: u64) {
        let mut lost = 0u32;
        loop {
            if lost >= wait && (lost - wait).is_multiple_of(t) {
                self.tx += burst;
            }
            if !self.observe_feedback() {
                return;
            }
            lost += 1;
        }
    }

    /// One packet until cleared (RTT `k`, timer `t`).
    fn single_packet(&mut self, k: u32, t: u32) {
        let mut attempt = 1;
        loop {
            self.tx += 1;
            self.idle(k - 1);
            match self.observe_both(attempt) {
                (false, false) => return,
                (false, true) => {
                    self.ack_wait(t - k, t, 1);
                    return;
                }
                (true, false) => {}
                (true, true) => self.idle(t - k),
            }
            attempt += 1;
        }
    }

    /// Cumulative-feedback batch.
    fn cf_batch(&mut self, k: u32, t: u32) {
        let wait = t - k - 1;
        loop {
            self.tx += 2;
            self.idle(k - 1);
            let (x1, y1) = self.observe_both(1);
            let (x2, y2) = self.observe_both(1);
            match cf_class(x1, y1, x2, y2) {
                BatchOutcome::Done => return,
                BatchOutcome::AckLost => {
                    self.ack_wait(wait, t, 2);
                    return;
                }
                BatchOutcome::Nack => {}
                BatchOutcome::NackLost => self.idle(wait),
                BatchOutcome::OneMissing => {
                    self.single_packet(k, t);
                    return;
                }
            }
        }
    }

    /// Coded batch.
    fn coded_batch(&mut self, k: u32, t: u32) {
        let wait = t - k - 1;
        loop {
            self.tx += 2;
            self.idle(k - 1);
            let x1 = self.observe_data();
            let (x2, y) = self.observe_both(1);
            match (x1, x2, y) {
                (false, false, false) => return,
                (false, false, true) => {
                    self.ack_wait(wait, t, 2);
                    return;
                }
                (true, true, false) => {}
                (true, true, true) => self.idle(wait),
                (true, false, false) | (false, true, false) => {
                    self.single_packet(k, t);
                    return;
                }
                (true, false, true) | (false, true, true) => {
                    self.idle(wait);
                    self.coded_resend(k, t);
                    return;
                }
            }
        }
    }

    /// Two coded packets sent when one degree of freedom is missing.
    fn coded_resend(&mut self, k: u32, t: u32) {
        let wait = t - k - 1;
        loop {
            self.tx += 2;
            self.idle(k - 1);
            let x1 = self.observe_data();
            let (x2, y) = self.observe_both(1);
            if !(x1 && x2) {
                if y {
                    self.ack_wait(wait, t, 2);
                }
                return;
            }
            if !y {
                self.single_packet(k, t);
                return;
            }
            self.idle(wait);
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum BatchOutcome {
    Done,
    AckLost,
    Nack,
    NackLost,
    OneMissing,
}

/// Classification of the two observation slots of a cumulative-feedback
/// batch, `(data₁, feedback₁)(data₂, feedback₂)`, `true` meaning erased.
fn cf_class(x1: bool, y1: bool, x2: bool, y2: bool) -> BatchOutcome {
    use BatchOutcome::*;
    match (x1, y1, x2, y2) {
        (false, false, false, false) => Done,
        (false, true, false, true) | (false, true, false, false) | (false, false, false, true) => {
            AckLost
        }
        (true, false, true, false) | (true, false, false, true) | (false, true, true, false) => {
            Nack
        }
        (true, true, true, true) | (true, true, true, false) | (true, false, true, true) => {
            NackLost
        }
        _ => OneMissing,
    }
}

/// Everything shared by the replications of a run.
struct Plan {
    protocol: Protocol,
    k: u32,
    t: u32,
    fwd: LinkSampler,
    rev: LinkSampler,
    schedule: Option<ErasureSchedule>,
    /// Cumulative new-unit law over composite states `f·dim + r`.
    start_cdf: Vec<f64>,
    rev_dim: usize,
    cap: u64,
}

impl Plan {
    fn new(cfg: &AnalysisConfig) -> Self {
        let ch = &cfg.channel;
        let start = ch.new_unit_vector();
        let total: f64 = start.iter().sum();
        let start_cdf = start
            .iter()
            .scan(0.0, |acc, p| {
                *acc += p / total;
                Some(*acc)
            })
            .collect();
        Plan {
            protocol: cfg.protocol,
            k: cfg.k,
            t: cfg.t,
            fwd: LinkSampler::new(ch.forward()),
            rev: LinkSampler::new(ch.reverse()),
            schedule: (cfg.protocol == Protocol::HarqChase).then(|| cfg.schedule()),
            start_cdf,
            rev_dim: ch.reverse().dim(),
            cap: HISTOGRAM_CAP_FACTOR * u64::from(cfg.t),
        }
    }

    fn unit<R: Rng>(&self, rng: &mut R) -> UnitOutcome {
        let u: f64 = rng.random();
        let state = self
            .start_cdf
            .iter()
            .position(|&c| u < c)
            .unwrap_or(self.start_cdf.len() - 1);
        let mut walk = Walk {
            rng,
            fwd: &self.fwd,
            rev: &self.rev,
            schedule: self.schedule,
            fs: state / self.rev_dim,
            rs: state % self.rev_dim,
            delay: 0,
            tx: 0,
            erasures: 0,
        };
        match self.protocol {
            Protocol::Uncoded | Protocol::HarqChase => walk.single_packet(self.k, self.t),
            Protocol::CumulativeFeedback => walk.cf_batch(self.k, self.t),
            Protocol::Coded => walk.coded_batch(self.k, self.t),
        }
        UnitOutcome {
            delay: walk.delay,
            tx: walk.tx,
            erasures: walk.erasures,
        }
    }

    fn replication(&self, cfg: &SimConfig, index: u32) -> Tally {
        let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
        rng.set_stream(u64::from(index));
        for _ in 0..cfg.warmup_units {
            self.unit(&mut rng);
        }
        let mut tally = Tally::new(self.cap);
        for _ in 0..cfg.units_of(index) {
            let outcome = self.unit(&mut rng);
            tally.record(&outcome);
        }
        tally
    }
}

/// Run the simulation.
pub fn simulate(cfg: &SimConfig) -> Result<SimResult, SimError> {
    cfg.validate()?;
    let plan = Plan::new(&cfg.analysis);
    let tallies: Vec<Tally> = (0..cfg.replications)
        .into_par_iter()
        .map(|i| plan.replication(cfg, i))
        .collect();
    let per_unit = u64::from(plan.protocol.packets_per_unit());
    let mut total = Tally::new(plan.cap);
    for t in &tallies {
        total.merge(t);
    }
    let n = total.units as f64;
    let tx_mean = total.tx as f64 / n;
    let tx_var = (total.tx_sq as f64 - n * tx_mean * tx_mean) / (n - 1.0);
    let throughput = per_unit as f64 / tx_mean;
    let delay_mean = total.mean_delay();
    let delay_variance =
        ((total.delay_sq as f64 - n * delay_mean * delay_mean) / (n - 1.0)).max(0.0);
    Ok(SimResult {
        protocol: plan.protocol,
        rtt: u64::from(plan.protocol.rtt(plan.k)),
        units: total.units,
        total_transmission_slots: total.tx,
        delivered_packets: total.units * per_unit,
        observed_erasures: total.erasures,
        empirical_throughput: throughput,
        throughput_se: throughput * (tx_var.max(0.0) / n).sqrt() / tx_mean,
        delay_mean,
        delay_variance,
        delay_mean_se: (delay_variance / n).sqrt(),
        replication_throughputs: tallies
            .iter()
            .map(|t| (t.units * per_unit) as f64 / t.tx as f64)
            .collect(),
        replication_mean_delays: tallies.iter().map(Tally::mean_delay).collect(),
        delays: total.delays,
    })
}

/// Empirical CCDF `P(D > d)` for every integer `d` from the smallest to the
/// largest sample (the last point is 0).
pub fn ccdf(result: &SimResult) -> Result<Vec<(u64, f64)>, SimError> {
    ccdf_from_counts(&result.delays.counts())
}

/// CCDF from raw samples.
pub fn ccdf_from_samples(samples: &[u64]) -> Result<Vec<(u64, f64)>, SimError> {
    let mut sorted = samples.to_vec();
    sorted.sort_unstable();
    let mut counts: Vec<(u64, u64)> = Vec::new();
    for d in sorted {
        match counts.last_mut() {
            Some((last, c)) if *last == d => *c += 1,
            _ => counts.push((d, 1)),
        }
    }
    ccdf_from_counts(&counts)
}

fn ccdf_from_counts(counts: &[(u64, u64)]) -> Result<Vec<(u64, f64)>, SimError> {
    let (lo, hi) = match (counts.first(), counts.last()) {
        (Some(a), Some(b)) => (a.0, b.0),
        _ => return Err(SimError::EmptySample),
    };
    let n: u64 = counts.iter().map(|(_, c)| c).sum();
    let mut out = Vec::with_capacity((hi - lo + 1) as usize);
    let mut above = n;
    let mut next = counts.iter().peekable();
    for d in lo..=hi {
        if let Some(&&(v, c)) = next.peek() {
            if v == d {
                above -= c;
                next.next();
            }
        }
        out.push((d, above as f64 / n as f64));
    }
    Ok(out)
}

/// Fraction of erased slots of a link run alone for `n_slots` slots from its
/// stationary law, with a batch-means standard error (32 batches).
pub fn chain_erasure_fraction(link: &Link, n_slots: u64, seed: u64) -> (f64, f64) {
    const BATCHES: u64 = 32;
    let sampler = LinkSampler::new(link);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let pi_b = link.stationary().get(1).copied().unwrap_or(0.0);
    let mut s = usize::from(sampler.two_state && rng.random::<f64>() < pi_b);
    let per_batch = (n_slots / BATCHES).max(1);
    let mut means = Vec::with_capacity(BATCHES as usize);
    for _ in 0..BATCHES {
        let mut erased = 0u64;
        for _ in 0..per_batch {
            s = sampler.advance(s, 1, &mut rng);
            erased += u64::from(rng.random::<f64>() < sampler.erasures[s]);
        }
        means.push(erased as f64 / per_batch as f64);
    }
    let b = BATCHES as f64;
    let mean = means.iter().sum::<f64>() / b;
    let var = means.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / (b - 1.0);
    (mean, (var / b).sqrt())
}
