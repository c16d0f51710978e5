//! Probability-generating-function machinery for matrix signal-flow graphs.
//!
//! A branch gain of a matrix signal-flow graph is a matrix-valued function of
//! the marker variable `z`. [`Gain`] carries such a function's value together
//! with its first and second `z`-derivatives at one point. Series, parallel
//! and self-loop reductions propagate all three by the product rule and by
//! `d(I−A)⁻¹ = (I−A)⁻¹ dA (I−A)⁻¹`. This gives exact ("analytic") derivatives
//! of every protocol's generating function. A central-difference
//! Richardson scheme on the value alone gives an independent numeric check.
//!
//! A scalar PGF is obtained from a matrix generating function `Φ(z)` by the
//! sandwich `φ(z) = π_I Φ(z) 1 / (π_I 1)`, where `π_I` is the (unnormalized)
//! channel-state law at the start of a unit.

use std::ops::{Add, Mul};
use std::sync::Arc;

use thiserror::Error;

use crate::matlib::{inverse, matpow, Matrix, MatrixError};

/// Errors raised while evaluating generating functions and moments.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum GfError {
    /// A self-loop gain `I − A` could not be inverted.
    #[error(transparent)]
    Matrix(#[from] MatrixError),
    /// The start-state vector has zero mass.
    #[error("start-state vector has zero total mass")]
    DegenerateInput,
    /// Richardson estimates of a numeric derivative disagree.
    #[error("numeric derivative did not converge: estimates {coarse} and {fine}")]
    NumericalInstability { coarse: f64, fine: f64 },
    /// The moments imply a negative variance beyond rounding.
    #[error("inconsistent moments: variance {variance} is negative")]
    InconsistentMoments { variance: f64 },
    /// A truncated infinite series hit its term cap before converging.
    #[error("series did not converge within {terms} terms")]
    TruncationFailure { terms: usize },
    /// A derived quantity is outside its admissible range.
    #[error("invalid moment: {0}")]
    InvalidMoment(String),
}

/// A matrix-valued function of `z` together with its first two derivatives at one point.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Gain {
    /// `G(z)`.
    pub value: Matrix,
    /// `G'(z)`.
    pub d1: Matrix,
    /// `G''(z)`.
    pub d2: Matrix,
}

impl Gain {
    /// A gain that does not depend on `z`.
    pub fn constant(m: Matrix) -> Self {
        let zero = Matrix::zeros(m.dim());
        Gain {
            value: m,
            d1: zero,
            d2: zero,
        }
    }

    /// The identity gain.
    pub fn identity(dim: usize) -> Self {
        Self::constant(Matrix::identity(dim))
    }

    /// The zero gain.
    pub fn zero(dim: usize) -> Self {
        Self::constant(Matrix::zeros(dim))
    }

    /// `zⁿ·M` evaluated at `z`.
    pub fn monomial(z: f64, n: u32, m: Matrix) -> Self {
        let nf = f64::from(n);
        let (v, d1, d2) = match n {
            0 => (1.0, 0.0, 0.0),
            1 => (z, 1.0, 0.0),
            _ => (
                z.powi(n as i32),
                nf * z.powi(n as i32 - 1),
                nf * (nf - 1.0) * z.powi(n as i32 - 2),
            ),
        };
        Gain {
            value: m * v,
            d1: m * d1,
            d2: m * d2,
        }
    }

    /// `(z·P)ⁿ` evaluated at `z`: `n` idle slots, each counted once.
    pub fn slots(z: f64, n: u32, p: &Matrix) -> Self {
        Self::monomial(z, n, matpow(p, n))
    }

    /// Self-loop reduction `(I − self)⁻¹`.
    pub fn loop_inverse(&self) -> Result<Gain, GfError> {
        let n = self.value.dim();
        let r = inverse(&(Matrix::identity(n) - self.value))?;
        let ra1 = r * self.d1;
        let d1 = ra1 * r;
        let d2 = r * self.d2 * r + (ra1 * ra1 * r).scale(2.0);
        Ok(Gain { value: r, d1, d2 })
    }

    /// Scalar sandwich `v·G·1` of value and derivatives.
    pub fn sandwich(&self, v: &[f64]) -> [f64; 3] {
        [
            self.value.sandwich(v),
            self.d1.sandwich(v),
            self.d2.sandwich(v),
        ]
    }

    /// Multiply value and derivatives by a scalar constant.
    pub fn scale(&self, s: f64) -> Gain {
        Gain {
            value: self.value * s,
            d1: self.d1 * s,
            d2: self.d2 * s,
        }
    }
}

impl Add for Gain {
    type Output = Gain;
    fn add(self, rhs: Gain) -> Gain {
        Gain {
            value: self.value + rhs.value,
            d1: self.d1 + rhs.d1,
            d2: self.d2 + rhs.d2,
        }
    }
}

impl Mul for Gain {
    type Output = Gain;
    fn mul(self, rhs: Gain) -> Gain {
        Gain {
            value: self.value * rhs.value,
            d1: self.d1 * rhs.value + self.value * rhs.d1,
            d2: self.d2 * rhs.value + (self.d1 * rhs.d1).scale(2.0) + self.value * rhs.d2,
        }
    }
}

impl Mul<Matrix> for Gain {
    type Output = Gain;
    fn mul(self, rhs: Matrix) -> Gain {
        Gain {
            value: self.value * rhs,
            d1: self.d1 * rhs,
            d2: self.d2 * rhs,
        }
    }
}

impl Mul<Gain> for Matrix {
    type Output = Gain;
    fn mul(self, rhs: Gain) -> Gain {
        Gain {
            value: self * rhs.value,
            d1: self * rhs.d1,
            d2: self * rhs.d2,
        }
    }
}

type GainFn = dyn Fn(f64) -> Result<Gain, GfError> + Send + Sync;

/// A matrix generating function `Φ(z)` with analytic first and second derivatives.
#[derive(Clone)]
pub struct MatrixGenFn {
    f: Arc<GainFn>,
}

impl MatrixGenFn {
    /// Wrap a function returning the gain (value and derivatives) at `z`.
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(f64) -> Result<Gain, GfError> + Send + Sync + 'static,
    {
        MatrixGenFn { f: Arc::new(f) }
    }

    /// Value and derivatives at `z`.
    pub fn gain(&self, z: f64) -> Result<Gain, GfError> {
        (self.f)(z)
    }

    /// `Φ(z)`.
    pub fn eval(&self, z: f64) -> Result<Matrix, GfError> {
        Ok(self.gain(z)?.value)
    }

    /// `Φ'(z)`.
    pub fn analytic_d1(&self, z: f64) -> Result<Matrix, GfError> {
        Ok(self.gain(z)?.d1)
    }

    /// `Φ''(z)`.
    pub fn analytic_d2(&self, z: f64) -> Result<Matrix, GfError> {
        Ok(self.gain(z)?.d2)
    }
}

impl std::fmt::Debug for MatrixGenFn {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str("MatrixGenFn")
    }
}

/// `φ(z) = π_I Φ(z) 1 / (π_I 1)`.
pub fn pgf(mgf: &MatrixGenFn, pi_i: &[f64], z: f64) -> Result<f64, GfError> {
    Pgf::new(mgf.clone(), pi_i.to_vec())?.value(z)
}

/// How a derivative at `z = 1` is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiffMode {
    /// Propagated exactly through the branch-gain algebra.
    Analytic,
    /// Central differences with one Richardson extrapolation level.
    Numeric,
}

/// Step sizes for numeric differentiation.
pub const NUMERIC_STEPS: [f64; 3] = [1e-3, 5e-4, 2.5e-4];

/// Relative disagreement between Richardson estimates that signals instability.
pub const RICHARDSON_TOLERANCE: f64 = 1e-4;

/// A scalar PGF: a matrix generating function sandwiched by a start-state law.
#[derive(Debug, Clone)]
pub struct Pgf {
    mgf: MatrixGenFn,
    pi_i: Vec<f64>,
}

impl Pgf {
    /// Normalizes `pi_i` to a probability vector.
    pub fn new(mgf: MatrixGenFn, pi_i: Vec<f64>) -> Result<Self, GfError> {
        let mass: f64 = pi_i.iter().sum();
        if !(mass > 0.0) {
            return Err(GfError::DegenerateInput);
        }
        let pi_i = pi_i.iter().map(|p| p / mass).collect();
        Ok(Pgf { mgf, pi_i })
    }

    /// `φ(z)`.
    pub fn value(&self, z: f64) -> Result<f64, GfError> {
        Ok(self.mgf.eval(z)?.sandwich(&self.pi_i))
    }

    /// `[φ(z), φ'(z), φ''(z)]` from the analytic derivatives.
    pub fn jet(&self, z: f64) -> Result<[f64; 3], GfError> {
        Ok(self.mgf.gain(z)?.sandwich(&self.pi_i))
    }

    /// `φ⁽ⁿ⁾(1)` for `order` 1 or 2.
    ///
    /// # Panics
    /// If `order` is not 1 or 2.
    pub fn derivative_at_one(&self, order: u8, mode: DiffMode) -> Result<f64, GfError> {
        assert!(
            order == 1 || order == 2,
            "only first and second derivatives"
        );
        match mode {
            DiffMode::Analytic => Ok(self.jet(1.0)?[usize::from(order)]),
            DiffMode::Numeric => numeric_derivative(|z| self.value(z), order),
        }
    }
}

/// Derivative at 1 of `f` by central differences and Richardson extrapolation.
pub fn numeric_derivative<F>(f: F, order: u8) -> Result<f64, GfError>
where
    F: Fn(f64) -> Result<f64, GfError>,
{
    let f1 = if order == 2 { f(1.0)? } else { 0.0 };
    let mut estimates = [0.0; 3];
    for (slot, &h) in estimates.iter_mut().zip(NUMERIC_STEPS.iter()) {
        let (fp, fm) = (f(1.0 + h)?, f(1.0 - h)?);
        *slot = match order {
            1 => (fp - fm) / (2.0 * h),
            2 => (fp - 2.0 * f1 + fm) / (h * h),
            _ => panic!("only first and second derivatives"),
        };
    }
    // Each step halves h, so one Richardson level cancels the h² error term.
    let coarse = (4.0 * estimates[1] - estimates[0]) / 3.0;
    let fine = (4.0 * estimates[2] - estimates[1]) / 3.0;
    if (coarse - fine).abs() > RICHARDSON_TOLERANCE * fine.abs() + 1e-9 {
        return Err(GfError::NumericalInstability { coarse, fine });
    }
    Ok(fine)
}

/// Throughput, delay moments and guaranteeable delay of one protocol configuration.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Metrics {
    /// Packets delivered per packet transmission.
    pub throughput: f64,
    /// Mean delay in slots.
    pub mean_delay: f64,
    /// Delay variance in slots².
    pub delay_variance: f64,
    /// `mean_delay + 3·sqrt(delay_variance)`.
    pub guaranteeable_delay: f64,
}

impl Metrics {
    /// Assemble from throughput and the first two delay moments.
    pub fn new(throughput: f64, mean_delay: f64, delay_variance: f64) -> Self {
        Metrics {
            throughput,
            mean_delay,
            delay_variance,
            guaranteeable_delay: mean_delay + 3.0 * delay_variance.sqrt(),
        }
    }
}

/// Variance below this magnitude is treated as rounding and clamped to zero.
pub const VARIANCE_CLAMP: f64 = 1e-9;

/// Metrics from the transmission-count PGF `φ_τ` and the delay PGF `φ_D`.
///
/// `packets_per_unit` is the number of packets each renewal unit delivers
/// (1 for single-packet protocols, 2 for batch protocols), so throughput is
/// delivered packets per packet transmission.
pub fn metrics_from_pgfs(
    tau: &Pgf,
    delay: &Pgf,
    packets_per_unit: f64,
    mode: DiffMode,
) -> Result<Metrics, GfError> {
    let mean_tau = tau.derivative_at_one(1, mode)?;
    if !(mean_tau >= packets_per_unit * (1.0 - 1e-12)) {
        return Err(GfError::InvalidMoment(format!(
            "mean transmissions per unit {mean_tau} below {packets_per_unit}"
        )));
    }
    let mean = delay.derivative_at_one(1, mode)?;
    let second = delay.derivative_at_one(2, mode)?;
    let mut variance = second + mean - mean * mean;
    if variance < 0.0 {
        if variance < -VARIANCE_CLAMP * mean.max(1.0).powi(2) {
            return Err(GfError::InconsistentMoments { variance });
        }
        variance = 0.0;
    }
    Ok(Metrics::new(packets_per_unit / mean_tau, mean, variance))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn scalar_fn(f: impl Fn(f64) -> Gain + Send + Sync + 'static) -> MatrixGenFn {
        MatrixGenFn::new(move |z| Ok(f(z)))
    }

    #[test]
    fn monomial_derivatives() {
        let pgf = Pgf::new(
            scalar_fn(|z| Gain::monomial(z, 7, Matrix::scalar(1.0))),
            vec![1.0],
        )
        .unwrap();
        for mode in [DiffMode::Analytic, DiffMode::Numeric] {
            assert!((pgf.derivative_at_one(1, mode).unwrap() - 7.0).abs() < 1e-9);
            assert!((pgf.derivative_at_one(2, mode).unwrap() - 42.0).abs() < 1e-6);
        }
    }

    #[test]
    fn constant_and_square() {
        let c = Pgf::new(scalar_fn(|_| Gain::identity(1)), vec![0.3]).unwrap();
        assert_eq!(c.value(0.7).unwrap(), 1.0);
        for mode in [DiffMode::Analytic, DiffMode::Numeric] {
            assert_eq!(c.derivative_at_one(1, mode).unwrap(), 0.0);
        }
        let sq = Pgf::new(
            scalar_fn(|z| Gain::monomial(z, 2, Matrix::scalar(1.0))),
            vec![1.0],
        )
        .unwrap();
        assert!((sq.derivative_at_one(2, DiffMode::Numeric).unwrap() - 2.0).abs() < 1e-6);
        assert_eq!(sq.derivative_at_one(2, DiffMode::Analytic).unwrap(), 2.0);
    }

    #[test]
    fn loop_inverse_matches_geometric_pgf() {
        // Geometric number of failures: φ(z) = (1−p) / (1 − p z).
        let p = 0.3;
        let pgf = Pgf::new(
            scalar_fn(move |z| {
                Gain::monomial(z, 1, Matrix::scalar(p))
                    .loop_inverse()
                    .unwrap()
                    .scale(1.0 - p)
            }),
            vec![1.0],
        )
        .unwrap();
        let mean = p / (1.0 - p);
        let second = 2.0 * p * p / ((1.0 - p) * (1.0 - p));
        assert!((pgf.value(1.0).unwrap() - 1.0).abs() < 1e-15);
        assert!((pgf.derivative_at_one(1, DiffMode::Analytic).unwrap() - mean).abs() < 1e-14);
        assert!((pgf.derivative_at_one(2, DiffMode::Analytic).unwrap() - second).abs() < 1e-14);
        assert!((pgf.derivative_at_one(1, DiffMode::Numeric).unwrap() - mean).abs() < 1e-9);
    }

    #[test]
    fn degenerate_start_vector() {
        assert!(matches!(
            Pgf::new(scalar_fn(|_| Gain::identity(1)), vec![0.0]),
            Err(GfError::DegenerateInput)
        ));
    }

    #[test]
    fn metrics_arithmetic() {
        let m = Metrics::new(1.0, 10.0, 4.0);
        assert_eq!(m.guaranteeable_delay, 16.0);
    }

    #[test]
    fn unstable_numeric_derivative_detected() {
        // A kink at 1 makes the one-sided slopes disagree with each other.
        let r = numeric_derivative(|z| Ok(if z > 1.0 { (z - 1.0).sqrt() } else { 0.0 }), 1);
        assert!(matches!(r, Err(GfError::NumericalInstability { .. })));
    }
}
