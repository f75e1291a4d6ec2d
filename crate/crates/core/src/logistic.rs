//! The fixed-parameter logistic betting strategy.
//!
//! The skeptic models the log-odds of `x_n = 1` as `logit(p_n) + theta' c_n`,
//! which gives
//!
//! ```text
//! p_hat = p e^y / (1 + p (e^y - 1)),    y = theta' c
//! nu    = (p_hat - p) / (p (1 - p))  = (e^y - 1) / (1 + p (e^y - 1))
//! log K_n^theta = theta' T_n - psi(theta),   psi = sum log(1 + p_i (e^{theta' c_i} - 1))
//! ```
//!
//! `psi` is the cumulant generating function of an exponential family with
//! natural parameter `theta`, so it is convex and `log K^theta` is concave.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::game::{check_probability, Round};

/// Natural parameter of the logistic model.
#[derive(Debug, Clone, PartialEq)]
pub struct Theta(pub DVector<f64>);

impl Theta {
    pub fn new(coefficients: DVector<f64>) -> Result<Self> {
        if coefficients.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if coefficients.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("theta"));
        }
        Ok(Self(coefficients))
    }

    pub fn from_slice(coefficients: &[f64]) -> Result<Self> {
        Self::new(DVector::from_column_slice(coefficients))
    }

    pub fn zeros(d: usize) -> Self {
        Self(DVector::zeros(d))
    }

    pub fn dim(&self) -> usize {
        self.0.len()
    }

    /// The exponent `theta' c`.
    pub fn exponent(&self, c: &DVector<f64>) -> Result<f64> {
        if c.len() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: c.len(),
            });
        }
        let y = self.0.dot(c);
        if y.is_finite() {
            Ok(y)
        } else {
            Err(Error::NonFinite("theta' c"))
        }
    }
}

/// Everything the strategy needs about one round at exponent `y`.
///
/// Evaluated without forming `e^y` for positive `y`, so it stays accurate
/// for `|y|` in the hundreds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Tilt {
    /// `log(1 + p (e^y - 1))`.
    pub log_norm: f64,
    /// Skeptic's probability of `x = 1`.
    pub phat: f64,
    /// `1 - phat`, computed directly.
    pub phat_c: f64,
    /// Kelly bet ratio `(phat - p) / (p (1 - p))`.
    pub nu: f64,
}

impl Tilt {
    #[inline]
    pub fn new(p: f64, y: f64) -> Self {
        if y <= 0.0 {
            let em1 = y.exp_m1();
            let denom = 1.0 + p * em1;
            Self {
                log_norm: (p * em1).ln_1p(),
                phat: p * y.exp() / denom,
                phat_c: (1.0 - p) / denom,
                nu: em1 / denom,
            }
        } else {
            let tm1 = (-y).exp_m1();
            let t = (-y).exp();
            let scaled = 1.0 + (1.0 - p) * tm1;
            Self {
                log_norm: y + ((1.0 - p) * tm1).ln_1p(),
                phat: p / scaled,
                phat_c: (1.0 - p) * t / scaled,
                nu: -tm1 / scaled,
            }
        }
    }

    /// Log capital factor `x y - log(1 + p (e^y - 1))`.
    #[inline]
    pub fn log_factor(&self, y: f64, x: bool) -> f64 {
        if x {
            y - self.log_norm
        } else {
            -self.log_norm
        }
    }

    /// Curvature weight `p (1 - p) e^y / (1 + p (e^y - 1))^2 = phat (1 - phat)`.
    #[inline]
    pub fn weight(&self) -> f64 {
        self.phat * self.phat_c
    }
}

/// Skeptic's probability `p_hat` for forecast `p` and side information `c`.
pub fn predict(theta: &Theta, p: f64, c: &DVector<f64>) -> Result<f64> {
    check_probability(p)?;
    let y = theta.exponent(c)?;
    Ok(Tilt::new(p, y).phat)
}

/// Kelly bet ratio maximising `E_{p_hat} log(1 + nu (x - p))`.
pub fn kelly_ratio(phat: f64, p: f64) -> Result<f64> {
    check_probability(phat)?;
    check_probability(p)?;
    Ok((phat - p) / (p * (1.0 - p)))
}

/// Log of the per-round capital factor of the fixed-theta strategy.
pub fn log_capital_factor(theta: &Theta, round: &Round) -> Result<f64> {
    let y = theta.exponent(&round.c)?;
    Ok(Tilt::new(round.p, y).log_factor(y, round.x))
}

/// `psi(theta)` with gradient and Hessian.
#[derive(Debug, Clone, PartialEq)]
pub struct PotentialEval {
    pub value: f64,
    pub grad: DVector<f64>,
    pub hess: DMatrix<f64>,
}

/// Evaluates the potential over a round sequence.
pub fn potential(theta: &Theta, rounds: &[Round]) -> Result<PotentialEval> {
    if rounds.is_empty() {
        return Err(Error::EmptyData);
    }
    let d = theta.dim();
    let mut value = 0.0;
    let mut grad = DVector::zeros(d);
    let mut hess = DMatrix::zeros(d, d);
    for r in rounds {
        let y = theta.exponent(&r.c)?;
        let t = Tilt::new(r.p, y);
        value += t.log_norm;
        grad.axpy(t.phat, &r.c, 1.0);
        hess.ger(t.weight(), &r.c, &r.c, 1.0);
    }
    Ok(PotentialEval { value, grad, hess })
}

/// `log K_n^theta = theta' T_n - psi(theta)`, summed per round.
pub fn log_capital(theta: &Theta, rounds: &[Round]) -> Result<f64> {
    rounds
        .iter()
        .map(|r| log_capital_factor(theta, r))
        .sum()
}
