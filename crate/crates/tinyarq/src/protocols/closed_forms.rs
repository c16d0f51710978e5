//! Memoryless closed forms, used as oracles for the matrix analyzers.
//!
//! Two families live here.
//!
//! * Renewal decompositions ([`uncoded_moments`], [`harq_moments`],
//!   [`cf_moments`], [`coded_moments`]). They follow the same protocol
//!   description as the analyzers, but only use scalar mean/variance algebra
//!   of independent pieces (sums, mixtures, geometric compounds). They share
//!   no code with the matrix path, so they work as independent oracles.
//! * Reference rational and series forms, reproduced term by term. Several
//!   of them are truncated series or contain slips. They are exposed so
//!   callers can compare them with the exact values; they are not used as
//!   ground truth.
//!
//! Throughputs are delivered packets per transmission. Delays are in slots.
//! For the two-packet protocols the delay is the delay of the batch.

use crate::gf::{GfError, Metrics};

/// Mean and variance of a non-negative random quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    /// Expectation.
    pub mean: f64,
    /// Variance.
    pub var: f64,
}

impl Moments {
    /// A deterministic quantity.
    pub fn constant(c: f64) -> Self {
        Moments { mean: c, var: 0.0 }
    }

    /// `E[X²]`.
    pub fn second_moment(&self) -> f64 {
        self.var + self.mean * self.mean
    }

    /// Sum of two independent quantities.
    pub fn plus(self, other: Moments) -> Self {
        Moments {
            mean: self.mean + other.mean,
            var: self.var + other.var,
        }
    }

    /// Add a constant.
    pub fn shift(self, c: f64) -> Self {
        self.plus(Moments::constant(c))
    }

    /// Mixture of branches `(weight, moments)`. Weights are normalized by their
    /// sum, which must be positive.
    pub fn mixture(branches: &[(f64, Moments)]) -> Self {
        let total: f64 = branches.iter().map(|(p, _)| p).sum();
        let mean = branches.iter().map(|(p, m)| p * m.mean).sum::<f64>() / total;
        let second = branches
            .iter()
            .map(|(p, m)| p * m.second_moment())
            .sum::<f64>()
            / total;
        Moments {
            mean,
            var: second - mean * mean,
        }
    }

    /// A loop-then-exit stage. Each round independently takes one of the loop
    /// branches or one of the exit branches with the given (unconditional)
    /// probabilities, which must sum to 1. The result is the sum of all loop
    /// lengths plus the exit length.
    pub fn renewal(loops: &[(f64, Moments)], exits: &[(f64, Moments)]) -> Self {
        let q: f64 = loops.iter().map(|(p, _)| p).sum();
        let exit = Moments::mixture(exits);
        if q == 0.0 {
            return exit;
        }
        let step = Moments::mixture(loops);
        let n_mean = q / (1.0 - q);
        let n_var = q / ((1.0 - q) * (1.0 - q));
        let looped = Moments {
            mean: n_mean * step.mean,
            var: n_mean * step.var + n_var * step.mean * step.mean,
        };
        looped.plus(exit)
    }
}

/// Slots spent in a lost-acknowledgement wait, including the slot of the
/// acknowledgement that finally arrives; `e` is the feedback erasure rate.
fn ack_wait_delay(e: f64) -> Moments {
    Moments {
        mean: 1.0 / (1.0 - e),
        var: e / ((1.0 - e) * (1.0 - e)),
    }
}

/// Spurious retransmissions during a lost-acknowledgement wait entered with
/// `wait` slots left on the timer (period `t`, `burst` packets per expiry).
fn ack_wait_retransmissions(e: f64, wait: u32, t: u32, burst: u32) -> Moments {
    let x = e.powi(t as i32);
    let reach = e.powi(wait as i32);
    let n_mean = reach / (1.0 - x);
    let n_second = reach * (1.0 + x) / ((1.0 - x) * (1.0 - x));
    let b = f64::from(burst);
    Moments {
        mean: b * n_mean,
        var: b * b * (n_second - n_mean * n_mean),
    }
}

/// Transmission-count and delay moments of one uncoded packet (RTT `k`,
/// timeout `t`).
pub fn uncoded_moments(eps: f64, k: u32, t: u32) -> (Moments, Moments) {
    let e = eps;
    let (kf, tf) = (f64::from(k), f64::from(t));
    let tau = Moments::renewal(
        &[(e, Moments::constant(1.0))],
        &[
            ((1.0 - e) * (1.0 - e), Moments::constant(0.0)),
            ((1.0 - e) * e, ack_wait_retransmissions(e, t - k, t, 1)),
        ],
    )
    .shift(1.0);
    let delay = Moments::renewal(
        &[
            (e * (1.0 - e), Moments::constant(kf)),
            (e * e, Moments::constant(tf)),
        ],
        &[
            ((1.0 - e) * (1.0 - e), Moments::constant(1.0)),
            ((1.0 - e) * e, ack_wait_delay(e).shift(1.0)),
        ],
    )
    .shift(kf - 1.0);
    (tau, delay)
}

/// Uncoded throughput `(1−ε)/(1+ε^{d+1}(1−ε)/(1−ε^T))`, `d = T − k`.
pub fn uncoded_throughput(eps: f64, k: u32, t: u32) -> f64 {
    let d = (t - k) as i32;
    (1.0 - eps) / (1.0 + eps.powi(d + 1) * (1.0 - eps) / (1.0 - eps.powi(t as i32)))
}

/// Uncoded mean delay `k + ε(1+Tε)/(1−ε) + kε`.
pub fn uncoded_mean_delay(eps: f64, k: u32, t: u32) -> f64 {
    let (kf, tf) = (f64::from(k), f64::from(t));
    kf + eps * (1.0 + tf * eps) / (1.0 - eps) + kf * eps
}

/// Exact uncoded delay variance:
/// `ε/(1−ε)² + ε²(T−k)² + ε(k(1−ε)+Tε)²/(1−ε)²`.
pub fn uncoded_delay_variance(eps: f64, k: u32, t: u32) -> f64 {
    let (kf, tf) = (f64::from(k), f64::from(t));
    let s = 1.0 - eps;
    let loop_mean = kf * s + tf * eps;
    eps / (s * s) + eps * eps * (tf - kf).powi(2) + eps * loop_mean * loop_mean / (s * s)
}

/// Uncoded metrics from the explicit formulas above.
pub fn uncoded_closed_forms(eps: f64, k: u32, t: u32) -> Metrics {
    Metrics::new(
        uncoded_throughput(eps, k, t),
        uncoded_mean_delay(eps, k, t),
        uncoded_delay_variance(eps, k, t),
    )
}

/// The reference expanded form of the uncoded delay variance.
/// It does not vanish at `ε = 0` (it gives `−k`), so it is kept only for
/// comparison.
pub fn uncoded_delay_variance_expanded(eps: f64, k: u32, t: u32) -> f64 {
    let (k, t, e) = (f64::from(k), f64::from(t), eps);
    let s = 1.0 - e;
    -3.0 * k + 2.0 - k * k * e * e
        + 2.0 * t * t * e.powi(4) / s.powi(3)
        + e / (s * s)
            * (2.0 + 4.0 * k * t * e * e + t * t * e + t * e
                - e
                - 2.0 * t * e * e
                - t * t * e.powi(3))
        + 1.0 / s
            * (k * k * e + 2.0 * k - 2.0 - k * e + e + 2.0 * t * e * e + 2.0 * k * k * e * e
                - 2.0 * k * t * e * e
                - 2.0 * k * e * e
                - 2.0 * t * k * e.powi(3))
}

/// Leading-order (in `k`) uncoded variance, without its `O(1)` remainder:
/// `k²(ε+ε²+ε³)/(1−ε) − k/(1−ε)·(1−2ε+2ε²+2Tε²(1−2ε−ε²)/(1−ε))`.
pub fn uncoded_delay_variance_leading(eps: f64, k: u32, t: u32) -> f64 {
    let (k, t, e) = (f64::from(k), f64::from(t), eps);
    let s = 1.0 - e;
    k * k * (e + e * e + e.powi(3)) / s
        - k / s * (1.0 - 2.0 * e + 2.0 * e * e + 2.0 * t * e * e * (1.0 - 2.0 * e - e * e) / s)
}

/// Chase-combining moments on a memoryless channel. Attempt `m` is erased
/// with probability `1 − e^{−α/m}`; feedback is erased with probability
/// `eps`. The attempt series is truncated once the probability of needing
/// more attempts drops below `tol`.
pub fn harq_moments(
    eps: f64,
    k: u32,
    t: u32,
    alpha: f64,
    tol: f64,
    max_terms: usize,
) -> Result<(Moments, Moments), GfError> {
    let e = eps;
    let (kf, tf) = (f64::from(k), f64::from(t));
    // Failed attempts F = J − 1: P(F ≥ j) = Π_{m ≤ j} ε(m).
    let (mut f_mean, mut f_second) = (0.0, 0.0);
    let mut survive = 1.0;
    let mut converged = false;
    for j in 1..=max_terms {
        survive *= -(-alpha / j as f64).exp_m1();
        f_mean += survive;
        f_second += (2.0 * j as f64 - 1.0) * survive;
        if survive < tol {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(GfError::TruncationFailure { terms: max_terms });
    }
    let failures = Moments {
        mean: f_mean,
        var: f_second - f_mean * f_mean,
    };
    let compound = |step: Moments| Moments {
        mean: failures.mean * step.mean,
        var: failures.mean * step.var + failures.var * step.mean * step.mean,
    };
    let tau = compound(Moments::constant(1.0)).plus(
        Moments::mixture(&[
            (1.0 - e, Moments::constant(0.0)),
            (e, ack_wait_retransmissions(e, t - k, t, 1)),
        ])
        .shift(1.0),
    );
    let step = Moments::mixture(&[(1.0 - e, Moments::constant(kf)), (e, Moments::constant(tf))]);
    let exit = Moments::mixture(&[
        (1.0 - e, Moments::constant(1.0)),
        (e, ack_wait_delay(e).shift(1.0)),
    ]);
    let delay = compound(step).plus(exit).shift(kf - 1.0);
    Ok((tau, delay))
}

/// Chase-combining metrics from [`harq_moments`].
pub fn harq_closed_forms(
    eps: f64,
    k: u32,
    t: u32,
    alpha: f64,
    tol: f64,
    max_terms: usize,
) -> Result<Metrics, GfError> {
    let (tau, delay) = harq_moments(eps, k, t, alpha, tol, max_terms)?;
    Ok(Metrics::new(1.0 / tau.mean, delay.mean, delay.var))
}

/// Cumulative-feedback moments per two-packet batch (RTT `k + 1`).
pub fn cf_moments(eps: f64, k: u32, t: u32) -> (Moments, Moments) {
    let e = eps;
    let (p00, p01, p10, p11) = ((1.0 - e) * (1.0 - e), (1.0 - e) * e, e * (1.0 - e), e * e);
    let done = p00 * p00;
    let ack_lost = p01 * p01 + 2.0 * p01 * p00;
    let nack = p10 * p10 + 2.0 * p10 * p01;
    let nack_lost = p11 * p11 + 2.0 * p11 * p10;
    let one_missing = 2.0 * (p00 * p10 + p11 * p01 + p00 * p11);
    let (u_tau, u_delay) = uncoded_moments(e, k, t);
    let wait = t - k - 1;
    let (kf, tf) = (f64::from(k), f64::from(t));

    let tau = Moments::renewal(
        &[(nack + nack_lost, Moments::constant(2.0))],
        &[
            (done, Moments::constant(0.0)),
            (ack_lost, ack_wait_retransmissions(e, wait, t, 2)),
            (one_missing, u_tau),
        ],
    )
    .shift(2.0);
    let delay = Moments::renewal(
        &[
            (nack, Moments::constant(kf + 1.0)),
            (nack_lost, Moments::constant(tf)),
        ],
        &[
            (done, Moments::constant(2.0)),
            (ack_lost, ack_wait_delay(e).shift(2.0)),
            (one_missing, u_delay.shift(2.0)),
        ],
    )
    .shift(kf - 1.0);
    (tau, delay)
}

/// Cumulative-feedback metrics from [`cf_moments`].
pub fn cf_closed_forms(eps: f64, k: u32, t: u32) -> Metrics {
    let (tau, delay) = cf_moments(eps, k, t);
    Metrics::new(2.0 / tau.mean, delay.mean, delay.var)
}

/// Exact cumulative-feedback throughput (packets per transmission).
pub fn cf_closed_form_throughput(eps: f64, k: u32, t: u32) -> f64 {
    2.0 / cf_moments(eps, k, t).0.mean
}

/// The reference cumulative-feedback coefficient `α_CF(ε)`.
pub fn cf_alpha(eps: f64) -> f64 {
    let e = eps;
    let num = 1.0 + 3.0 * e - 2.0 * e.powi(2) + 20.0 * e.powi(3) - 18.0 * e.powi(4)
        + 28.0 * e.powi(5)
        - 60.0 * e.powi(6)
        + 72.0 * e.powi(7)
        - 40.0 * e.powi(8)
        + 8.0 * e.powi(9);
    let den = 2.0
        * (2.0 - e)
        * (1.0 - e + 4.0 * e * e - 2.0 * e.powi(3))
        * (1.0 + e - 2.0 * e * e + 2.0 * e.powi(3));
    num / den
}

/// The reference approximate cumulative-feedback throughput
/// `2(1−ε)/(1 + α_CF⁻¹ ε^d (1−ε)/(1−ε^T))`, `d = T − k`. It counts two packets
/// per unit time and equals 2 at `ε = 0`.
pub fn cf_throughput_alpha(eps: f64, k: u32, t: u32) -> f64 {
    let d = (t - k) as i32;
    2.0 * (1.0 - eps)
        / (1.0 + eps.powi(d) * (1.0 - eps) / (cf_alpha(eps) * (1.0 - eps.powi(t as i32))))
}

/// The reference pre-approximation cumulative-feedback throughput
/// `((1+ε−2ε²+2ε³)/(2−ε)) / (α_CF − β_CF + ε^d(1−ε)/(1−ε^T))`, `d = T − k`.
pub fn cf_throughput_alpha_beta(eps: f64, k: u32, t: u32) -> f64 {
    let e = eps;
    let d = (t - k) as i32;
    let a = 2.0 - e;
    let b = 1.0 - 2.0 * e + 2.0 * e * e;
    let beta = (1.0 - e).powi(2)
        * (1.0 - 2.0 * e + 4.0 * e * e)
        * e.powi(d)
        * a.powi(d - 1)
        * b.powi(d - 1)
        / (2.0
            * (1.0 - e + 4.0 * e * e - 2.0 * e.powi(3))
            * (e.powi(t as i32) * a.powi(t as i32) * b.powi(t as i32) - 1.0));
    let lead = (1.0 + e - 2.0 * e * e + 2.0 * e.powi(3)) / a;
    lead / (cf_alpha(e) - beta + e.powi(d) * (1.0 - e) / (1.0 - e.powi(t as i32)))
}

/// The reference small-ε series for the cumulative-feedback mean delay,
/// truncated after the `ε^order` term (`order` is 2 or 3):
/// `k + 1 + (2k+8)ε − (3k+11)ε² + (6T+10k+26)ε³`.
pub fn cf_mean_delay_series(eps: f64, k: u32, t: u32, order: u32) -> f64 {
    let (k, t, e) = (f64::from(k), f64::from(t), eps);
    let mut d = k + 1.0 + (2.0 * k + 8.0) * e - (3.0 * k + 11.0) * e * e;
    if order >= 3 {
        d += (6.0 * t + 10.0 * k + 26.0) * e.powi(3);
    }
    d
}

/// Coded-ARQ moments per two-packet batch (RTT `k + 1`).
pub fn coded_moments(eps: f64, k: u32, t: u32) -> (Moments, Moments) {
    let e = eps;
    let s = 1.0 - e;
    let (u_tau, u_delay) = uncoded_moments(e, k, t);
    let wait = t - k - 1;
    let (kf, tf, wf) = (f64::from(k), f64::from(t), f64::from(wait));
    let ack_tau = ack_wait_retransmissions(e, wait, t, 2);

    // A₃: two coded packets, one degree of freedom missing.
    let resend_loop = e * e * e;
    let resend_done = (1.0 - e * e) * s;
    let resend_ack_lost = (1.0 - e * e) * e;
    let resend_one = e * e * s;
    let resend_tau = Moments::renewal(
        &[(resend_loop, Moments::constant(2.0))],
        &[
            (resend_done, Moments::constant(0.0)),
            (resend_ack_lost, ack_tau),
            (resend_one, u_tau),
        ],
    )
    .shift(2.0);
    let resend_delay = Moments::renewal(
        &[(resend_loop, Moments::constant(tf))],
        &[
            (resend_done, Moments::constant(2.0)),
            (resend_ack_lost, ack_wait_delay(e).shift(2.0)),
            (resend_one, u_delay.shift(2.0)),
        ],
    )
    .shift(kf - 1.0);

    // A₂: fresh batch.
    let nack = e * e * s;
    let nack_lost = e * e * e;
    let done = s * s * s;
    let ack_lost = s * s * e;
    let one_missing = 2.0 * e * s * s;
    let blind = 2.0 * e * e * s;
    let tau = Moments::renewal(
        &[(nack + nack_lost, Moments::constant(2.0))],
        &[
            (done, Moments::constant(0.0)),
            (ack_lost, ack_tau),
            (one_missing, u_tau),
            (blind, resend_tau),
        ],
    )
    .shift(2.0);
    let delay = Moments::renewal(
        &[
            (nack, Moments::constant(kf + 1.0)),
            (nack_lost, Moments::constant(tf)),
        ],
        &[
            (done, Moments::constant(2.0)),
            (ack_lost, ack_wait_delay(e).shift(2.0)),
            (one_missing, u_delay.shift(2.0)),
            (blind, resend_delay.shift(2.0 + wf)),
        ],
    )
    .shift(kf - 1.0);
    (tau, delay)
}

/// Coded-ARQ metrics from [`coded_moments`].
pub fn coded_closed_forms(eps: f64, k: u32, t: u32) -> Metrics {
    let (tau, delay) = coded_moments(eps, k, t);
    Metrics::new(2.0 / tau.mean, delay.mean, delay.var)
}

/// The reference coefficient
/// `α_C(ε) = (1+ε+7ε²/2−ε³/2−3ε⁴+ε⁶)/(1+ε)²`.
pub fn coded_alpha(eps: f64) -> f64 {
    let e = eps;
    (1.0 + e + 3.5 * e * e - 0.5 * e.powi(3) - 3.0 * e.powi(4) + e.powi(6)) / (1.0 + e).powi(2)
}

/// The reference coefficient `β_C(ε) = 1/2 + ε²(1−ε)`.
pub fn coded_beta(eps: f64) -> f64 {
    0.5 + eps * eps * (1.0 - eps)
}

/// The reference coded throughput
/// `(1−ε)/(α_C + ε^{d+1}(1−ε)β_C/(1−ε^T))`, `d = T − k`.
pub fn coded_throughput_alpha_beta(eps: f64, k: u32, t: u32) -> f64 {
    let d = (t - k) as i32;
    (1.0 - eps)
        / (coded_alpha(eps)
            + eps.powi(d + 1) * (1.0 - eps) * coded_beta(eps) / (1.0 - eps.powi(t as i32)))
}

/// The reference rational form of the coded mean delay.
pub fn coded_mean_delay_rational(eps: f64, k: u32, t: u32) -> f64 {
    let (k, t, e) = (f64::from(k), f64::from(t), eps);
    let p = |n: i32| e.powi(n);
    let num = 4.0 * e + k + e * k + 2.0 * t * p(2) + 3.0 * t * p(3) - t * p(4)
        + 4.0 * t * p(5)
        + 2.0 * t * p(6)
        - 4.0 * t * p(7)
        + 4.0 * p(2) * k
        - 3.0 * p(3) * k
        - p(4) * k
        - 4.0 * p(5) * k
        - 2.0 * p(6) * k
        + 4.0 * p(7) * k
        + 6.0 * p(2)
        + 5.0 * p(3)
        - 6.0 * p(4)
        - 4.0 * p(5)
        + 2.0 * p(6)
        + 1.0;
    num / ((1.0 - e) * (1.0 + e).powi(2))
}

/// The reference rational form of the coded delay variance.
pub fn coded_delay_variance_rational(eps: f64, k: u32, t: u32) -> f64 {
    let (k, t, e) = (f64::from(k), f64::from(t), eps);
    let p = |n: i32| e.powi(n);
    let (s, a) = (1.0 - e, 1.0 + e);
    let poly = |c: &[f64]| {
        c.iter()
            .enumerate()
            .map(|(i, ci)| ci * p(i as i32))
            .sum::<f64>()
    };
    p(2) * k * k / a.powi(4)
        * poly(&[
            1.0, 5.0, -6.0, -1.0, -5.0, 10.0, 28.0, 20.0, 12.0, -16.0, -16.0,
        ])
        - 2.0 * p(4) * t * k / (s * a.powi(3))
            * poly(&[2.0, 1.0, -5.0, 10.0, -16.0, 12.0, -12.0, -16.0, 16.0])
        + p(2) * k / (s * a.powi(4))
            * poly(&[
                5.0, -16.0, -40.0, -52.0, 3.0, 60.0, 96.0, 32.0, -72.0, -24.0, 16.0,
            ])
        + p(2) * t * t / (s * s * a * a)
            * poly(&[
                2.0, 1.0, -8.0, 13.0, 7.0, -30.0, 20.0, 20.0, -52.0, 48.0, -16.0,
            ])
        + p(2) * t / (s * s * a.powi(3))
            * poly(&[
                4.0, 5.0, -21.0, -3.0, 27.0, -24.0, -52.0, 104.0, 8.0, -56.0, 16.0,
            ])
        + e / (s * s * a.powi(4))
            * poly(&[
                3.0, 4.0, -4.0, -33.0, -29.0, 47.0, 100.0, -8.0, -72.0, 4.0, 16.0, -4.0,
            ])
}

/// The reference small-ε series for the coded mean delay, truncated after
/// the `ε^order` term (`order` is 2 or 3):
/// `k + 1 + 3ε + (2T+5k+4)ε² + (T−7k+5)ε³`.
pub fn coded_mean_delay_series(eps: f64, k: u32, t: u32, order: u32) -> f64 {
    let (k, t, e) = (f64::from(k), f64::from(t), eps);
    let mut d = k + 1.0 + 3.0 * e + (2.0 * t + 5.0 * k + 4.0) * e * e;
    if order >= 3 {
        d += (t - 7.0 * k + 5.0) * e.powi(3);
    }
    d
}

/// The reference leading-order coded delay variance, without its `O(1)`
/// remainder: `k²ε²(1+ε−16ε²) + kε²(5−31ε+43ε²−Tε²(4−6ε+2ε²))`.
pub fn coded_delay_variance_leading(eps: f64, k: u32, t: u32) -> f64 {
    let (k, t, e) = (f64::from(k), f64::from(t), eps);
    k * k * e * e * (1.0 + e - 16.0 * e * e)
        + k * e * e * (5.0 - 31.0 * e + 43.0 * e * e - t * e * e * (4.0 - 6.0 * e + 2.0 * e * e))
}
