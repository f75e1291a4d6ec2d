//! Protocol bookkeeping for binary probability forecasting with side
//! information.
//!
//! Each round the forecaster announces `p` and a side-information vector `c`,
//! the skeptic announces a bet ratio `nu`, and reality reveals `x`. The state
//! tracks the log-capital together with the drift `S_n = sum c_i (x_i - p_i)`
//! and the information matrix `V_n = sum c_i c_i' p_i (1 - p_i)`.

use nalgebra::{DMatrix, DVector, SymmetricEigen};

use crate::error::{Error, Result};

/// Relative eigenvalue floor below which `V` is treated as singular.
const SINGULAR_RTOL: f64 = 1e-12;

/// One step of the game.
#[derive(Debug, Clone, PartialEq)]
pub struct Round {
    pub p: f64,
    pub c: DVector<f64>,
    pub x: bool,
}

impl Round {
    pub fn new(p: f64, c: DVector<f64>, x: bool) -> Result<Self> {
        check_probability(p)?;
        if c.is_empty() {
            return Err(Error::ZeroDimension);
        }
        if c.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("side information"));
        }
        Ok(Self { p, c, x })
    }

    pub fn from_slice(p: f64, c: &[f64], x: bool) -> Result<Self> {
        Self::new(p, DVector::from_column_slice(c), x)
    }

    pub fn dim(&self) -> usize {
        self.c.len()
    }

    /// The outcome as 0.0 or 1.0.
    pub fn outcome(&self) -> f64 {
        if self.x {
            1.0
        } else {
            0.0
        }
    }
}

pub(crate) fn check_probability(p: f64) -> Result<()> {
    if p > 0.0 && p < 1.0 {
        Ok(())
    } else {
        Err(Error::InvalidProbability(p))
    }
}

/// Whether `1 + nu (x - p)` is strictly positive for both outcomes.
pub fn is_admissible(nu: f64, p: f64) -> bool {
    nu.is_finite() && 1.0 + nu * (1.0 - p) > 0.0 && 1.0 - nu * p > 0.0
}

/// Running capital, drift and information of one game.
#[derive(Debug, Clone, PartialEq)]
pub struct GameState {
    pub n: usize,
    /// Natural log of the capital `K_n`.
    pub log_capital: f64,
    /// Drift vector `S_n`.
    pub drift: DVector<f64>,
    /// Information matrix `V_n`.
    pub info: DMatrix<f64>,
}

impl GameState {
    /// Zero state: `K_0 = 1`, `S_0 = 0`, `V_0 = 0`.
    pub fn new(d: usize) -> Result<Self> {
        if d == 0 {
            return Err(Error::ZeroDimension);
        }
        Ok(Self {
            n: 0,
            log_capital: 0.0,
            drift: DVector::zeros(d),
            info: DMatrix::zeros(d, d),
        })
    }

    pub fn dim(&self) -> usize {
        self.drift.len()
    }

    pub fn capital(&self) -> f64 {
        self.log_capital.exp()
    }

    /// Plays one round with bet ratio `nu` (the fraction of current capital
    /// staked, `M_n = nu K_{n-1}`). The state is left untouched on error.
    pub fn play_round(&mut self, round: &Round, nu: f64) -> Result<()> {
        if round.dim() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: round.dim(),
            });
        }
        if !is_admissible(nu, round.p) {
            return Err(Error::Inadmissible { nu, p: round.p });
        }
        let resid = round.outcome() - round.p;
        self.log_capital += (nu * resid).ln_1p();
        self.drift.axpy(resid, &round.c, 1.0);
        let w = round.p * (1.0 - round.p);
        self.info.ger(w, &round.c, &round.c, 1.0);
        self.n += 1;
        Ok(())
    }

    /// The sum statistic `T_n = S_n + sum c_i p_i` is not stored; see
    /// [`crate::hindsight`] for its reconstruction from rounds.
    pub fn diagnostics(&self) -> Diagnostics {
        Diagnostics::compute(&self.drift, &self.info)
    }
}

/// Eigen-extremes of `V`, the normalised drift `V^{-1} S`, and the ratio
/// `S' V^{-1} S / log det V`.
///
/// When `V` is singular, `degenerate` is set, `lambda_min` is 0 and every
/// quantity that needs `V^{-1}` is `None`. `ratio` is `None` until
/// `log det V > 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostics {
    pub lambda_min: f64,
    pub lambda_max: f64,
    pub degenerate: bool,
    pub vinv_s: Option<DVector<f64>>,
    pub svs: Option<f64>,
    pub log_det_v: Option<f64>,
    pub ratio: Option<f64>,
}

impl Diagnostics {
    pub fn compute(drift: &DVector<f64>, info: &DMatrix<f64>) -> Self {
        let eig = SymmetricEigen::new(info.clone());
        let lambda_max = eig.eigenvalues.max();
        let lambda_min = eig.eigenvalues.min();
        if lambda_max <= 0.0 || lambda_min <= SINGULAR_RTOL * lambda_max {
            return Self {
                lambda_min: 0.0,
                lambda_max: lambda_max.max(0.0),
                degenerate: true,
                vinv_s: None,
                svs: None,
                log_det_v: None,
                ratio: None,
            };
        }
        let proj = eig.eigenvectors.tr_mul(drift);
        let scaled = proj.component_div(&eig.eigenvalues);
        let vinv_s = &eig.eigenvectors * &scaled;
        let svs = proj.dot(&scaled);
        let log_det_v: f64 = eig.eigenvalues.iter().map(|l| l.ln()).sum();
        let ratio = (log_det_v > 0.0).then(|| svs / log_det_v);
        Self {
            lambda_min,
            lambda_max,
            degenerate: false,
            vinv_s: Some(vinv_s),
            svs: Some(svs),
            log_det_v: Some(log_det_v),
            ratio,
        }
    }

    /// Condition number `lambda_max / lambda_min`.
    pub fn condition(&self) -> Option<f64> {
        (!self.degenerate).then(|| self.lambda_max / self.lambda_min)
    }
}
