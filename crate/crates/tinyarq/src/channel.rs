//! Gilbert-Elliott erasure channels and the composite forward × reverse law.
//!
//! A link is a Markov chain over channel states together with a per-state
//! erasure probability. One slot of a link is described by the pair of
//! matrices `P₀ = P·diag(1−ε)` (slot delivered) and `P₁ = P·diag(ε)` (slot
//! erased), whose entry `(i, j)` is the probability of moving from state `i`
//! to state `j` and then observing the given outcome in state `j`.
//!
//! The composite channel pairs an independent forward (data) link with a
//! reverse (feedback) link: `P_xy = P_x^(f) ⊗ P_y^(r)`, where the first index
//! is the forward outcome and the second the reverse outcome. An `x` in a
//! marginal name means "either outcome", e.g. `P_0x = P_00 + P_01`.

use thiserror::Error;

use crate::matlib::{kron, kron_vec, Matrix};

/// Errors raised while constructing channel laws.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChannelError {
    /// Parameters violate the Gilbert-Elliott invariants.
    #[error("invalid Gilbert-Elliott parameters: {0}")]
    InvalidParams(String),
    /// No valid chain reproduces the requested stationary erasure rate.
    #[error("invalid target erasure rate: {0}")]
    InvalidTarget(String),
}

/// Two-state (Good/Bad) Markov erasure channel law.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GilbertElliottParams {
    /// Bad → Good transition probability; `1/r` is the mean erasure burst.
    pub r: f64,
    /// Good → Bad transition probability.
    pub q: f64,
    /// Erasure probability in the Good state.
    pub eps_g: f64,
    /// Erasure probability in the Bad state.
    pub eps_b: f64,
}

fn is_prob(x: f64) -> bool {
    (0.0..=1.0).contains(&x)
}

impl GilbertElliottParams {
    /// Validated constructor.
    pub fn new(r: f64, q: f64, eps_g: f64, eps_b: f64) -> Result<Self, ChannelError> {
        for (name, v) in [("r", r), ("q", q), ("eps_G", eps_g), ("eps_B", eps_b)] {
            if !is_prob(v) {
                return Err(ChannelError::InvalidParams(format!(
                    "{name} = {v} is not a probability"
                )));
            }
        }
        if eps_g > eps_b {
            return Err(ChannelError::InvalidParams(format!(
                "eps_G = {eps_g} exceeds eps_B = {eps_b}"
            )));
        }
        if r + q <= 0.0 {
            return Err(ChannelError::InvalidParams(
                "r + q must be positive".to_string(),
            ));
        }
        Ok(GilbertElliottParams { r, q, eps_g, eps_b })
    }

    /// State transition matrix `[[1−q, q], [r, 1−r]]` (rows: from G, from B).
    pub fn transition_matrix(&self) -> Matrix {
        Matrix::from_rows(&[&[1.0 - self.q, self.q], &[self.r, 1.0 - self.r]])
            .expect("probabilities are finite")
    }

    /// Stationary vector `[π_G, π_B]`.
    pub fn stationary(&self) -> [f64; 2] {
        stationary(self)
    }

    /// Stationary erasure rate `π·[ε_G, ε_B]ᵀ`.
    pub fn erasure_rate(&self) -> f64 {
        let [pg, pb] = self.stationary();
        pg * self.eps_g + pb * self.eps_b
    }
}

/// Solve `q = r((ε_B − ε_G)/(ε_B − ε) − 1)` for a chain with stationary erasure `eps`.
pub fn ge_from_target_erasure(
    r: f64,
    eps_g: f64,
    eps_b: f64,
    eps: f64,
) -> Result<GilbertElliottParams, ChannelError> {
    if !(r > 0.0 && r <= 1.0) {
        return Err(ChannelError::InvalidTarget(format!(
            "r = {r} must lie in (0, 1]"
        )));
    }
    if !(eps >= eps_g && eps < eps_b) {
        return Err(ChannelError::InvalidTarget(format!(
            "eps = {eps} outside [eps_G, eps_B) = [{eps_g}, {eps_b})"
        )));
    }
    let q = r * ((eps_b - eps_g) / (eps_b - eps) - 1.0);
    if !is_prob(q) {
        return Err(ChannelError::InvalidTarget(format!(
            "required q = {q} is not a probability"
        )));
    }
    GilbertElliottParams::new(r, q, eps_g, eps_b)
        .map_err(|e| ChannelError::InvalidTarget(e.to_string()))
}

/// Stationary vector `[r/(r+q), q/(r+q)]`.
pub fn stationary(ge: &GilbertElliottParams) -> [f64; 2] {
    let s = ge.r + ge.q;
    [ge.r / s, ge.q / s]
}

/// One link: a Markov chain over its states plus per-state erasure probabilities.
#[derive(Debug, Clone, PartialEq)]
pub struct Link {
    transition: Matrix,
    erasures: Vec<f64>,
    stationary: Vec<f64>,
}

impl Link {
    /// Single-state link erasing every slot independently with probability `eps`.
    pub fn memoryless(eps: f64) -> Result<Self, ChannelError> {
        if !(0.0..1.0).contains(&eps) {
            return Err(ChannelError::InvalidParams(format!(
                "memoryless erasure rate {eps} outside [0, 1)"
            )));
        }
        Ok(Link {
            transition: Matrix::identity(1),
            erasures: vec![eps],
            stationary: vec![1.0],
        })
    }

    /// Two-state Gilbert-Elliott link.
    pub fn gilbert_elliott(ge: &GilbertElliottParams) -> Self {
        Link {
            transition: ge.transition_matrix(),
            erasures: vec![ge.eps_g, ge.eps_b],
            stationary: ge.stationary().to_vec(),
        }
    }

    /// Same chain with the per-state erasure probabilities replaced.
    ///
    /// # Panics
    /// If `erasures` does not have one entry per state.
    pub fn with_erasures(&self, erasures: &[f64]) -> Self {
        assert_eq!(erasures.len(), self.erasures.len(), "one erasure per state");
        Link {
            erasures: erasures.to_vec(),
            ..self.clone()
        }
    }

    /// Number of chain states.
    pub fn dim(&self) -> usize {
        self.transition.dim()
    }

    /// State transition matrix.
    pub fn transition(&self) -> &Matrix {
        &self.transition
    }

    /// Per-state erasure probabilities.
    pub fn erasures(&self) -> &[f64] {
        &self.erasures
    }

    /// Stationary distribution of the chain.
    pub fn stationary(&self) -> &[f64] {
        &self.stationary
    }

    /// Stationary erasure rate.
    pub fn erasure_rate(&self) -> f64 {
        self.stationary
            .iter()
            .zip(&self.erasures)
            .map(|(p, e)| p * e)
            .sum()
    }

    /// `P₀ = P·diag(1−ε)`: transition then successful slot.
    pub fn p0(&self) -> Matrix {
        let good: Vec<f64> = self.erasures.iter().map(|e| 1.0 - e).collect();
        self.transition * Matrix::diag(&good)
    }

    /// `P₁ = P·diag(ε)`: transition then erased slot.
    pub fn p1(&self) -> Matrix {
        self.transition * Matrix::diag(&self.erasures)
    }
}

/// Joint forward × reverse observation law, with marginals and Coded-ARQ triples.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositeChannel {
    /// Composite state transition `P ⊗ P`.
    pub p: Matrix,
    /// Forward delivered, reverse delivered.
    pub p00: Matrix,
    /// Forward delivered, reverse erased.
    pub p01: Matrix,
    /// Forward erased, reverse delivered.
    pub p10: Matrix,
    /// Forward erased, reverse erased.
    pub p11: Matrix,
    /// Forward delivered, reverse unobserved.
    pub p0x: Matrix,
    /// Forward erased, reverse unobserved.
    pub p1x: Matrix,
    /// Reverse delivered, forward unobserved.
    pub px0: Matrix,
    /// Reverse erased, forward unobserved.
    pub px1: Matrix,
    triples: [Matrix; 8],
    /// Stationary vector over composite states.
    pub stationary: Vec<f64>,
    /// Stationary forward erasure rate.
    pub eps: f64,
    forward: Link,
    reverse: Link,
}

impl CompositeChannel {
    /// Compose a forward and a reverse link.
    ///
    /// The public constructors [`composite`] and [`memoryless`] use one law for
    /// both directions; distinct links are used internally to give the forward
    /// direction attempt-dependent erasures under Chase combining.
    ///
    /// # Panics
    /// If the two links have different state counts or the composite would
    /// exceed the supported matrix dimension.
    pub fn from_links(forward: Link, reverse: Link) -> Self {
        assert_eq!(
            forward.dim(),
            reverse.dim(),
            "links must share a state space"
        );
        let p = kron(forward.transition(), reverse.transition());
        let (f0, f1) = (forward.p0(), forward.p1());
        let (r0, r1) = (reverse.p0(), reverse.p1());
        let p00 = kron(&f0, &r0);
        let p01 = kron(&f0, &r1);
        let p10 = kron(&f1, &r0);
        let p11 = kron(&f1, &r1);
        let p0x = p00 + p01;
        let p1x = p10 + p11;
        let px0 = p00 + p10;
        let px1 = p01 + p11;
        let first = [p0x, p1x];
        let second = [[p00, p01], [p10, p11]];
        let mut triples = [Matrix::zeros(p.dim()); 8];
        for (x, fx) in first.iter().enumerate() {
            for (y, row) in second.iter().enumerate() {
                for (zr, pyz) in row.iter().enumerate() {
                    triples[x * 4 + y * 2 + zr] = *fx * *pyz;
                }
            }
        }
        let stationary = kron_vec(forward.stationary(), reverse.stationary());
        let eps = forward.erasure_rate();
        CompositeChannel {
            p,
            p00,
            p01,
            p10,
            p11,
            p0x,
            p1x,
            px0,
            px1,
            triples,
            stationary,
            eps,
            forward,
            reverse,
        }
    }

    /// Joint observation matrix `P_xy` (`x` forward, `y` reverse, each 0 or 1).
    pub fn pxy(&self, x: u8, y: u8) -> Matrix {
        match (x, y) {
            (0, 0) => self.p00,
            (0, 1) => self.p01,
            (1, 0) => self.p10,
            (1, 1) => self.p11,
            _ => panic!("observation indices must be 0 or 1"),
        }
    }

    /// Two-slot triple `P_xyz = P_{x·}·P_yz`: forward outcome `x` in one slot,
    /// then forward outcome `y` and reverse outcome `z` in the next.
    pub fn pxyz(&self, x: u8, y: u8, z: u8) -> Matrix {
        assert!(
            x <= 1 && y <= 1 && z <= 1,
            "observation indices must be 0 or 1"
        );
        self.triples[usize::from(x) * 4 + usize::from(y) * 2 + usize::from(z)]
    }

    /// Composite state dimension (1 or 4).
    pub fn dim(&self) -> usize {
        self.p.dim()
    }

    /// True for the single-state channel.
    pub fn is_memoryless(&self) -> bool {
        self.dim() == 1
    }

    /// Forward link.
    pub fn forward(&self) -> &Link {
        &self.forward
    }

    /// Reverse link.
    pub fn reverse(&self) -> &Link {
        &self.reverse
    }

    /// Unnormalized state law at the start of a new unit, `π_I = π·P_0x`:
    /// the chain is stationary and the slot before the start delivered data.
    pub fn new_unit_vector(&self) -> Vec<f64> {
        self.p0x.left_mul(&self.stationary)
    }
}

/// Composite channel with the same Gilbert-Elliott law in both directions.
pub fn composite(ge: &GilbertElliottParams) -> CompositeChannel {
    let link = Link::gilbert_elliott(ge);
    CompositeChannel::from_links(link.clone(), link)
}

/// Composite channel for a memoryless link with erasure rate `eps` (all matrices 1×1).
pub fn memoryless(eps: f64) -> Result<CompositeChannel, ChannelError> {
    let link = Link::memoryless(eps)?;
    Ok(CompositeChannel::from_links(link.clone(), link))
}
