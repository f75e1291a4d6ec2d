//! The Bayesian logistic strategy.
//!
//! The mixture capital `K_n^pi = integral K_n^theta pi(theta) d theta` is
//! approximated by a tensor-product Gauss–Legendre rule over a uniform box
//! prior. Because `K_n^pi` is linear in the node capitals, the mixture is
//! itself a strategy: each round it bets the capital-weighted average of the
//! per-node Kelly ratios, and its capital equals the weighted node sum
//! exactly (not just approximately).
//!
//! Node capitals are accumulated in log space. A linear-scale copy relative
//! to a running offset is kept alongside so that each round costs two
//! transcendental evaluations per node; it is resynchronised from the log
//! accumulators every [`RESYNC_EVERY`] rounds.

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::game::{check_probability, Round};
use crate::logistic::{Theta, Tilt};
use crate::quadrature::gauss_legendre_on;

/// Largest admissible quadrature grid.
pub const MAX_NODES: usize = 1_000_000;

const RESYNC_EVERY: usize = 32;

/// Uniform product prior on a box, with its quadrature resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct PriorSpec {
    bounds: Vec<(f64, f64)>,
    nodes_per_dim: usize,
}

impl PriorSpec {
    pub fn uniform(bounds: Vec<(f64, f64)>, nodes_per_dim: usize) -> Result<Self> {
        if bounds.is_empty() {
            return Err(Error::ZeroDimension);
        }
        for &(lo, hi) in &bounds {
            if !(lo.is_finite() && hi.is_finite() && lo < hi) {
                return Err(Error::InvalidPrior(format!("interval [{lo}, {hi}] is empty")));
            }
        }
        if nodes_per_dim < 2 {
            return Err(Error::InvalidPrior(format!(
                "{nodes_per_dim} nodes per dimension (need at least 2)"
            )));
        }
        let total = nodes_per_dim
            .checked_pow(bounds.len() as u32)
            .filter(|&t| t <= MAX_NODES)
            .ok_or(Error::TooManyNodes {
                nodes: nodes_per_dim.saturating_pow(bounds.len() as u32),
                cap: MAX_NODES,
            })?;
        debug_assert!(total >= 2);
        Ok(Self {
            bounds,
            nodes_per_dim,
        })
    }

    /// Box prior at the default resolution for its dimension.
    pub fn with_default_nodes(bounds: Vec<(f64, f64)>) -> Result<Self> {
        let m = default_nodes_per_dim(bounds.len());
        Self::uniform(bounds, m)
    }

    /// Box prior where each `ForecastLogit` coordinate is given as an
    /// interval on `beta` and stored shifted to `beta - 1`.
    pub fn from_beta_box(
        features: &FeatureSpec,
        mut bounds: Vec<(f64, f64)>,
        nodes_per_dim: Option<usize>,
    ) -> Result<Self> {
        if bounds.len() != features.dim() {
            return Err(Error::DimensionMismatch {
                expected: features.dim(),
                found: bounds.len(),
            });
        }
        for i in features.logit_coordinates() {
            bounds[i].0 -= 1.0;
            bounds[i].1 -= 1.0;
        }
        let m = nodes_per_dim.unwrap_or_else(|| default_nodes_per_dim(bounds.len()));
        Self::uniform(bounds, m)
    }

    /// Every coordinate uniform on `[0, 1]` (on `beta` for logit terms).
    pub fn unit_box(features: &FeatureSpec, nodes_per_dim: Option<usize>) -> Result<Self> {
        Self::from_beta_box(features, vec![(0.0, 1.0); features.dim()], nodes_per_dim)
    }

    pub fn dim(&self) -> usize {
        self.bounds.len()
    }

    pub fn bounds(&self) -> &[(f64, f64)] {
        &self.bounds
    }

    pub fn nodes_per_dim(&self) -> usize {
        self.nodes_per_dim
    }

    pub fn total_nodes(&self) -> usize {
        self.nodes_per_dim.pow(self.dim() as u32)
    }

    /// Whether the box contains a neighbourhood of the origin.
    pub fn supports_origin(&self) -> bool {
        self.bounds.iter().all(|&(lo, hi)| lo < 0.0 && 0.0 < hi)
    }

    /// Log of the constant prior density.
    pub fn log_density(&self) -> f64 {
        -self.bounds.iter().map(|(lo, hi)| (hi - lo).ln()).sum::<f64>()
    }

    /// Whether `theta` lies strictly inside the box.
    pub fn contains_interior(&self, theta: &Theta) -> bool {
        theta.dim() == self.dim()
            && theta
                .0
                .iter()
                .zip(&self.bounds)
                .all(|(t, (lo, hi))| lo < t && t < hi)
    }
}

/// 65 nodes per dimension up to `d = 2`, 33 for `d = 3`, and the largest
/// count within [`MAX_NODES`] beyond that.
pub fn default_nodes_per_dim(d: usize) -> usize {
    match d {
        0..=2 => 65,
        3 => 33,
        _ => {
            let mut m = (MAX_NODES as f64).powf(1.0 / d as f64).floor() as usize;
            while m.checked_pow(d as u32).is_none_or(|t| t > MAX_NODES) {
                m -= 1;
            }
            m.max(2)
        }
    }
}

/// Quadrature nodes with their accumulated log capitals.
#[derive(Debug, Clone)]
pub struct MixtureState {
    d: usize,
    /// Flattened `N x d` node coordinates, last coordinate fastest.
    nodes: Vec<f64>,
    log_node_capital: Vec<f64>,
    log_quad_weight: Vec<f64>,
    n: usize,
    scaled: Vec<f64>,
    offset: f64,
    since_sync: usize,
}

impl MixtureState {
    pub fn new(prior: &PriorSpec) -> Result<Self> {
        let d = prior.dim();
        let m = prior.nodes_per_dim();
        let total = prior.total_nodes();
        let axes: Vec<(Vec<f64>, Vec<f64>)> = prior
            .bounds()
            .iter()
            .map(|&(lo, hi)| {
                let (x, w) = gauss_legendre_on(m, lo, hi);
                let lw = w.iter().map(|w| (w / (hi - lo)).ln()).collect();
                (x, lw)
            })
            .collect();

        let mut nodes = Vec::with_capacity(total * d);
        let mut log_quad_weight = Vec::with_capacity(total);
        let mut idx = vec![0usize; d];
        for _ in 0..total {
            let mut lw = 0.0;
            for (k, &i) in idx.iter().enumerate() {
                nodes.push(axes[k].0[i]);
                lw += axes[k].1[i];
            }
            log_quad_weight.push(lw);
            for k in (0..d).rev() {
                idx[k] += 1;
                if idx[k] < m {
                    break;
                }
                idx[k] = 0;
            }
        }
        let norm = log_sum_exp(&log_quad_weight);
        log_quad_weight.iter_mut().for_each(|w| *w -= norm);

        let mut state = Self {
            d,
            nodes,
            log_node_capital: vec![0.0; total],
            log_quad_weight,
            n: 0,
            scaled: Vec::new(),
            offset: 0.0,
            since_sync: 0,
        };
        state.resync();
        Ok(state)
    }

    pub fn dim(&self) -> usize {
        self.d
    }

    pub fn len(&self) -> usize {
        self.log_node_capital.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_node_capital.is_empty()
    }

    /// Rounds absorbed so far.
    pub fn rounds(&self) -> usize {
        self.n
    }

    pub fn node(&self, j: usize) -> &[f64] {
        &self.nodes[j * self.d..(j + 1) * self.d]
    }

    pub fn log_node_capital(&self) -> &[f64] {
        &self.log_node_capital
    }

    pub fn log_quad_weight(&self) -> &[f64] {
        &self.log_quad_weight
    }

    /// `log K_n^pi`: log-sum-exp of node capital plus quadrature weight.
    pub fn log_capital(&self) -> f64 {
        let terms: Vec<f64> = self
            .log_node_capital
            .iter()
            .zip(&self.log_quad_weight)
            .map(|(a, b)| a + b)
            .collect();
        log_sum_exp(&terms)
    }

    /// Same quantity from the linear-scale cache; O(N) without
    /// transcendental calls per node.
    pub fn log_capital_fast(&self) -> f64 {
        self.offset + self.scaled.iter().sum::<f64>().ln()
    }

    fn check_dim(&self, c: &DVector<f64>) -> Result<()> {
        if c.len() != self.d {
            return Err(Error::DimensionMismatch {
                expected: self.d,
                found: c.len(),
            });
        }
        Ok(())
    }

    #[inline]
    fn exponent(&self, j: usize, c: &[f64]) -> f64 {
        self.node(j).iter().zip(c).map(|(t, c)| t * c).sum()
    }

    /// Capital-weighted average of the per-node Kelly ratios for the
    /// coming round.
    pub fn bet_ratio(&self, p: f64, c: &DVector<f64>) -> Result<f64> {
        check_probability(p)?;
        self.check_dim(c)?;
        let c = c.as_slice();
        let (mut num, mut den) = (0.0, 0.0);
        for (j, &r) in self.scaled.iter().enumerate() {
            let y = self.exponent(j, c);
            num += r * Tilt::new(p, y).nu;
            den += r;
        }
        Ok(num / den)
    }

    /// Absorbs a revealed round into every node accumulator.
    pub fn update(&mut self, round: &Round) -> Result<()> {
        self.step(round).map(|_| ())
    }

    /// Computes the bet ratio for `round` from the current state and then
    /// absorbs the round. Equivalent to [`bet_ratio`](Self::bet_ratio)
    /// followed by [`update`](Self::update) in a single pass.
    pub fn step(&mut self, round: &Round) -> Result<f64> {
        self.check_dim(&round.c)?;
        let p = round.p;
        let c = round.c.as_slice();
        let (inv_p, inv_q) = (1.0 / p, 1.0 / (1.0 - p));
        let (mut num, mut den, mut top) = (0.0, 0.0, 0.0f64);
        for j in 0..self.scaled.len() {
            let y = self.exponent(j, c);
            let t = Tilt::new(p, y);
            let r = self.scaled[j];
            num += r * t.nu;
            den += r;
            self.log_node_capital[j] += t.log_factor(y, round.x);
            let factor = if round.x { t.phat * inv_p } else { t.phat_c * inv_q };
            let r = r * factor;
            self.scaled[j] = r;
            top = top.max(r);
        }
        self.n += 1;
        self.since_sync += 1;
        if self.since_sync >= RESYNC_EVERY || !(1e-100..=1e100).contains(&top) {
            self.resync();
        }
        Ok(num / den)
    }

    fn resync(&mut self) {
        let top = self
            .log_node_capital
            .iter()
            .zip(&self.log_quad_weight)
            .map(|(a, b)| a + b)
            .fold(f64::NEG_INFINITY, f64::max);
        self.offset = top;
        self.scaled = self
            .log_node_capital
            .iter()
            .zip(&self.log_quad_weight)
            .map(|(a, b)| (a + b - top).exp())
            .collect();
        self.since_sync = 0;
    }
}

/// Checks the prior against the game dimension and builds the grid.
pub fn init_mixture(prior: &PriorSpec, d: usize) -> Result<MixtureState> {
    if prior.dim() != d {
        return Err(Error::DimensionMismatch {
            expected: d,
            found: prior.dim(),
        });
    }
    MixtureState::new(prior)
}

/// Stable `log sum exp(v)`.
pub fn log_sum_exp(values: &[f64]) -> f64 {
    let top = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !top.is_finite() {
        return top;
    }
    top + values.iter().map(|v| (v - top).exp()).sum::<f64>().ln()
}
