//! The hindsight strategy: the single best constant parameter in retrospect.
//!
//! `log K_n^theta = theta' T_n - psi(theta)` is concave, so its maximiser
//! `theta*` solves the likelihood equation `T_n = grad psi(theta*)`. It is
//! finite unless the signed side-information vectors (`c_i` for `x_i = 1`,
//! `-c_i` for `x_i = 0`) lie in a closed half-space, in which case the
//! capital grows without bound along a recession direction.
//!
//! Also here: the Laplace approximation of the mixture capital around
//! `theta*`, and the small-MLE bound relating `||theta*||` to `||V^{-1} S||`.

use std::f64::consts::PI;

use nalgebra::{Cholesky, DMatrix, DVector, Dyn};

use crate::error::{Error, Result};
use crate::game::{Diagnostics, GameState, Round};
use crate::logistic::{Theta, Tilt};
use crate::mixture::PriorSpec;

/// `||theta||` beyond which the solve is declared divergent.
pub const DIVERGENCE_RADIUS: f64 = 50.0;

/// Newton steps below this (relative to `1 + ||theta||`) count as settled.
const STEP_RTOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MleOptions {
    /// Relative tolerance on `||T_n - grad psi||`, scaled by `1 + ||T_n||`.
    pub tol: f64,
    pub max_iter: usize,
}

impl Default for MleOptions {
    fn default() -> Self {
        Self {
            tol: 1e-10,
            max_iter: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MleResult {
    pub theta_star: Theta,
    /// `log K_n^{theta*}`.
    pub log_capital: f64,
    /// Hessian of `psi` at `theta*`.
    pub hess: DMatrix<f64>,
    /// Norm of the gradient of `log K^theta` at `theta*`.
    pub grad_norm: f64,
    pub converged: bool,
    pub iterations: usize,
}

/// `T_n = sum c_i x_i`.
pub fn sufficient_statistic(rounds: &[Round]) -> Result<DVector<f64>> {
    let d = common_dim(rounds)?;
    let mut t = DVector::zeros(d);
    for r in rounds.iter().filter(|r| r.x) {
        t += &r.c;
    }
    Ok(t)
}

fn common_dim(rounds: &[Round]) -> Result<usize> {
    let d = rounds.first().ok_or(Error::EmptyData)?.dim();
    if let Some(bad) = rounds.iter().find(|r| r.dim() != d) {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: bad.dim(),
        });
    }
    Ok(d)
}

/// Objective, gradient and Hessian of `theta' t - psi(theta)`.
struct Eval {
    value: f64,
    grad: DVector<f64>,
    hess: DMatrix<f64>,
}

fn evaluate(theta: &DVector<f64>, rounds: &[Round], shift: &DVector<f64>) -> Eval {
    let d = theta.len();
    let mut value = theta.dot(shift);
    let mut grad = shift.clone();
    let mut hess = DMatrix::zeros(d, d);
    for r in rounds {
        let y = theta.dot(&r.c);
        let t = Tilt::new(r.p, y);
        value += t.log_factor(y, r.x);
        // x - phat without cancellation.
        let resid = if r.x { t.phat_c } else { -t.phat };
        grad.axpy(resid, &r.c, 1.0);
        hess.ger(t.weight(), &r.c, &r.c, 1.0);
    }
    Eval { value, grad, hess }
}

fn objective(theta: &DVector<f64>, rounds: &[Round], shift: &DVector<f64>) -> f64 {
    let mut value = theta.dot(shift);
    for r in rounds {
        let y = theta.dot(&r.c);
        value += Tilt::new(r.p, y).log_factor(y, r.x);
    }
    value
}

/// Maximum likelihood `theta*` by damped Newton iteration.
///
/// Each Newton step `H^{-1} (T_n - grad psi)` is halved until the log
/// capital does not decrease. Convergence requires both a small relative
/// gradient and a settled Newton step; on separated data the gradient
/// vanishes at infinity while the steps stay of order one, and the solve is
/// reported as [`Error::Separated`] once `||theta||` passes
/// [`DIVERGENCE_RADIUS`].
pub fn mle(rounds: &[Round], init: &Theta, opts: &MleOptions) -> Result<MleResult> {
    let t = sufficient_statistic(rounds)?;
    solve(rounds, &t, init, opts)
}

/// Solves `grad psi(theta) = t` for an arbitrary statistic `t`; the map
/// `t -> theta*(t)` is the inverse of the gradient of `psi`.
pub fn mle_at_statistic(
    rounds: &[Round],
    t: &DVector<f64>,
    init: &Theta,
    opts: &MleOptions,
) -> Result<MleResult> {
    solve(rounds, t, init, opts)
}

fn solve(
    rounds: &[Round],
    target: &DVector<f64>,
    init: &Theta,
    opts: &MleOptions,
) -> Result<MleResult> {
    let d = common_dim(rounds)?;
    for len in [init.dim(), target.len()] {
        if len != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                found: len,
            });
        }
    }
    let mut info = DMatrix::zeros(d, d);
    for r in rounds {
        info.ger(r.p * (1.0 - r.p), &r.c, &r.c, 1.0);
    }
    if Cholesky::new(info).is_none() {
        return Err(Error::NotIdentifiable);
    }

    let shift = target - sufficient_statistic(rounds)?;
    let scale = 1.0 + target.norm();
    let mut theta = init.0.clone();
    let mut ev = evaluate(&theta, rounds, &shift);
    let mut converged = false;
    let mut iterations = 0;

    while iterations < opts.max_iter {
        let Some(chol) = Cholesky::<f64, Dyn>::new(ev.hess.clone()) else {
            break;
        };
        let step = chol.solve(&ev.grad);
        let grad_ok = ev.grad.norm() <= opts.tol * scale;
        let step_ok = step.norm() <= STEP_RTOL * (1.0 + theta.norm());
        if grad_ok && step_ok {
            converged = true;
            break;
        }
        iterations += 1;

        let mut alpha = 1.0;
        let mut candidate = &theta + &step;
        let mut value = objective(&candidate, rounds, &shift);
        let mut halvings = 0;
        // Gains below rounding noise cannot be resolved by comparing values.
        let noise = 1e-12 * (1.0 + ev.value.abs());
        let resolvable = 0.5 * ev.grad.dot(&step) > noise;
        let ascends = |v: f64| v >= ev.value;
        while resolvable && !ascends(value) && halvings < 60 {
            alpha *= 0.5;
            candidate = &theta + alpha * &step;
            value = objective(&candidate, rounds, &shift);
            halvings += 1;
        }
        if resolvable && !ascends(value) {
            // No ascent along the Newton direction: numerically at the top.
            converged = grad_ok;
            break;
        }
        theta = candidate;
        ev = evaluate(&theta, rounds, &shift);

        let norm = theta.norm();
        if norm > DIVERGENCE_RADIUS {
            return Err(Error::Separated {
                direction: (theta / norm).iter().copied().collect(),
                iterations,
            });
        }
    }

    Ok(MleResult {
        theta_star: Theta(theta),
        log_capital: ev.value,
        grad_norm: ev.grad.norm(),
        hess: ev.hess,
        converged,
        iterations,
    })
}

/// Laplace approximation of the mixture log capital around `theta*`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LaplaceApprox {
    pub log_capital: f64,
    /// False when `theta*` is not strictly inside the prior box, where the
    /// approximation does not apply.
    pub in_support: bool,
}

/// `log K^{theta*} + log pi(theta*) + (d/2) log 2 pi - (1/2) log det H_psi(theta*)`.
pub fn laplace_log_capital(mle: &MleResult, prior: &PriorSpec) -> Result<LaplaceApprox> {
    if !mle.converged {
        return Err(Error::NotConverged);
    }
    let d = mle.theta_star.dim();
    if prior.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: prior.dim(),
        });
    }
    let chol = Cholesky::new(mle.hess.clone()).ok_or(Error::NotIdentifiable)?;
    let log_det: f64 = 2.0 * chol.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
    let log_capital =
        mle.log_capital + prior.log_density() + 0.5 * d as f64 * (2.0 * PI).ln() - 0.5 * log_det;
    Ok(LaplaceApprox {
        log_capital,
        in_support: prior.contains_interior(&mle.theta_star),
    })
}

/// Quantities of the small-MLE bound `||theta*|| <= 3 L_lambda ||V^{-1} S||`,
/// valid when `||V^{-1} S|| <= 1 / (3 L_c L_lambda)`.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundReport {
    /// `max_i ||c_i||`.
    pub l_c: f64,
    /// `lambda_max / lambda_min` of `V_n`.
    pub l_lambda: f64,
    pub vinv_s_norm: f64,
    pub premise_holds: bool,
    pub mle_norm: f64,
    /// `3 L_lambda ||V^{-1} S||`.
    pub bound: f64,
    /// Only meaningful when the premise holds.
    pub conclusion_holds: bool,
    /// Capital sandwich around `S' V^{-1} S / 2`; present when the premise
    /// holds and `S != 0`.
    pub sandwich: Option<Sandwich>,
}

/// `e^{-C ||V^{-1}S||} <= log K^{theta*} / (S'V^{-1}S / 2) <= e^{C ||V^{-1}S||}`
/// with `C = 3 L_c L_lambda`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sandwich {
    pub lower: f64,
    pub ratio: f64,
    pub upper: f64,
    pub holds: bool,
}

/// Relative slack for floating-point noise in the bound comparisons.
const BOUND_RTOL: f64 = 1e-9;

pub fn small_mle_bound(rounds: &[Round], state: &GameState, mle: &MleResult) -> Result<BoundReport> {
    let diag = state.diagnostics();
    let vinv_s = diag.vinv_s.as_ref().ok_or(Error::NotIdentifiable)?;
    let svs = diag.svs.unwrap_or(0.0);
    let l_c = rounds
        .iter()
        .map(|r| r.c.norm())
        .fold(0.0, f64::max);
    let l_lambda = diag.lambda_max / diag.lambda_min;
    let vinv_s_norm = vinv_s.norm();
    let premise_holds = vinv_s_norm <= 1.0 / (3.0 * l_c * l_lambda);
    let mle_norm = mle.theta_star.0.norm();
    let bound = 3.0 * l_lambda * vinv_s_norm;
    let conclusion_holds = mle_norm <= bound * (1.0 + BOUND_RTOL) + 1e-12;

    let sandwich = (premise_holds && svs > 0.0).then(|| {
        let spread = 3.0 * l_c * l_lambda * vinv_s_norm;
        let (lower, upper) = ((-spread).exp(), spread.exp());
        let ratio = mle.log_capital / (svs / 2.0);
        Sandwich {
            lower,
            ratio,
            upper,
            holds: ratio >= lower * (1.0 - BOUND_RTOL) && ratio <= upper * (1.0 + BOUND_RTOL),
        }
    });

    Ok(BoundReport {
        l_c,
        l_lambda,
        vinv_s_norm,
        premise_holds,
        mle_norm,
        bound,
        conclusion_holds,
        sandwich,
    })
}

/// `S' V^{-1} S / log det V`, or `None` while `log det V <= 0`.
pub fn info_ratio(diag: &Diagnostics) -> Option<f64> {
    diag.ratio
}
