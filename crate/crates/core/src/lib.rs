//! Bayesian logistic betting strategies for auditing binary probability
//! forecasts.
//!
//! A forecaster announces `p_n`, a skeptic bets a fraction `nu_n` of its
//! capital on the binary outcome `x_n`, and the resulting capital process is
//! a nonnegative martingale whenever the forecasts are honest. Large capital
//! is therefore evidence against the forecaster (Ville's inequality).
//!
//! The crate is organised bottom-up:
//!
//! - [`game`]: protocol bookkeeping (capital, drift `S_n`, information `V_n`).
//! - [`logistic`]: the fixed-parameter logistic strategy and its potential.
//! - [`features`]: side-information builders and the three strategy presets.
//! - [`quadrature`] and [`mixture`]: the Bayesian mixture strategy over a
//!   uniform box prior.
//! - [`hindsight`]: maximum likelihood, Laplace comparison and the
//!   small-MLE bound.
//! - [`sim`] and [`ingest`]: scenario generators and real-data loading.
//! - [`audit`]: plays a strategy over a series and produces the trace.
//! - [`cli`]: the `betting` command-line front end.

pub mod audit;
pub mod cli;
pub mod error;
pub mod features;
pub mod game;
pub mod hindsight;
pub mod ingest;
pub mod logistic;
pub mod mixture;
pub mod quadrature;
pub mod sim;

pub use error::{Error, Result};
pub use features::{Feature, FeatureSpec};
pub use game::{Diagnostics, GameState, Round};
pub use hindsight::{BoundReport, LaplaceApprox, MleResult};
pub use logistic::{PotentialEval, Theta};
pub use mixture::{MixtureState, PriorSpec};
pub use sim::{ForecasterModel, Observation, RealityModel, Scenario};
