//! Plays a Bayesian logistic strategy over a forecast series and records the
//! per-round trace.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::features::FeatureSpec;
use crate::game::{GameState, Round};
use crate::hindsight::{self, laplace_log_capital, MleOptions, MleResult};
use crate::logistic::Theta;
use crate::mixture::{MixtureState, PriorSpec};
use crate::sim::Observation;

pub const TRACE_HEADER: &str = "n,p,x,nu,logK_pi,logK_mle,svs_half,logdetV,ratio";

/// Side-information features together with the prior over their
/// coefficients.
#[derive(Debug, Clone, PartialEq)]
pub struct Strategy {
    pub features: FeatureSpec,
    pub prior: PriorSpec,
}

impl Strategy {
    pub fn new(features: FeatureSpec, prior: PriorSpec) -> Result<Self> {
        if features.dim() != prior.dim() {
            return Err(Error::DimensionMismatch {
                expected: features.dim(),
                found: prior.dim(),
            });
        }
        Ok(Self { features, prior })
    }

    /// A named preset with every coefficient (`beta` for logit terms)
    /// uniform on `[0, 1]`.
    pub fn preset(name: &str, nodes_per_dim: Option<usize>) -> Result<Self> {
        let features = FeatureSpec::preset(name)?;
        let prior = PriorSpec::unit_box(&features, nodes_per_dim)?;
        Ok(Self { features, prior })
    }

    pub fn dim(&self) -> usize {
        self.features.dim()
    }
}

/// One trace line. Hindsight and diagnostic columns are filled only on
/// sampled rounds, and left empty where undefined.
#[derive(Debug, Clone, PartialEq)]
pub struct TraceRow {
    pub n: usize,
    pub p: f64,
    pub x: bool,
    pub nu: f64,
    pub log_k_pi: f64,
    pub log_k_mle: Option<f64>,
    pub svs_half: Option<f64>,
    pub log_det_v: Option<f64>,
    pub ratio: Option<f64>,
}

impl TraceRow {
    pub fn to_csv_line(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|v| v.to_string()).unwrap_or_default()
        }
        format!(
            "{},{},{},{},{},{},{},{},{}",
            self.n,
            self.p,
            u8::from(self.x),
            self.nu,
            self.log_k_pi,
            opt(self.log_k_mle),
            opt(self.svs_half),
            opt(self.log_det_v),
            opt(self.ratio),
        )
    }
}

pub fn trace_to_csv(rows: &[TraceRow]) -> String {
    let mut out = String::with_capacity(64 * (rows.len() + 1));
    out.push_str(TRACE_HEADER);
    out.push('\n');
    for r in rows {
        let _ = writeln!(out, "{}", r.to_csv_line());
    }
    out
}

/// Incremental player: builds `c_n`, bets the mixture ratio, and keeps the
/// protocol state in step with the mixture.
#[derive(Debug, Clone)]
pub struct Player {
    strategy: Strategy,
    state: GameState,
    mixture: MixtureState,
    rounds: Vec<Round>,
    history: Vec<bool>,
    max_log_capital: f64,
}

impl Player {
    pub fn new(strategy: Strategy) -> Result<Self> {
        let d = strategy.dim();
        Ok(Self {
            state: GameState::new(d)?,
            mixture: MixtureState::new(&strategy.prior)?,
            strategy,
            rounds: Vec::new(),
            history: Vec::new(),
            max_log_capital: 0.0,
        })
    }

    /// Plays one observation and returns the round's bet ratio.
    pub fn play(&mut self, obs: Observation, exo: Option<&BTreeMap<String, f64>>) -> Result<f64> {
        let c = self.strategy.features.build(&self.history, obs.p, exo)?;
        let round = Round::new(obs.p, c, obs.x)?;
        let nu = self.mixture.step(&round)?;
        self.state.play_round(&round, nu)?;
        self.history.push(obs.x);
        self.rounds.push(round);
        self.max_log_capital = self.max_log_capital.max(self.state.log_capital);
        Ok(nu)
    }

    pub fn strategy(&self) -> &Strategy {
        &self.strategy
    }

    pub fn state(&self) -> &GameState {
        &self.state
    }

    pub fn mixture(&self) -> &MixtureState {
        &self.mixture
    }

    pub fn rounds(&self) -> &[Round] {
        &self.rounds
    }

    /// `log K_n` of the mixture strategy as played.
    pub fn log_capital(&self) -> f64 {
        self.state.log_capital
    }

    /// `max_{k <= n} log K_k`, including `log K_0 = 0`.
    pub fn max_log_capital(&self) -> f64 {
        self.max_log_capital
    }

    /// Hindsight solve over the rounds so far, warm-started from `init`.
    pub fn hindsight(&self, init: Option<&Theta>) -> Result<MleResult> {
        let zero = Theta::zeros(self.strategy.dim());
        hindsight::mle(&self.rounds, init.unwrap_or(&zero), &MleOptions::default())
    }
}

/// Final numbers of a run.
#[derive(Debug, Clone, PartialEq)]
pub struct Summary {
    pub rounds: usize,
    pub log_k_pi: f64,
    pub max_log_k_pi: f64,
    pub theta_star: Option<Vec<f64>>,
    /// `theta*` coefficient plus one, for each logit feature.
    pub beta_star: Vec<f64>,
    pub log_k_mle: Option<f64>,
    pub svs_half: Option<f64>,
    pub log_det_v: Option<f64>,
    pub info_ratio: Option<f64>,
    /// `laplace - log K^pi`.
    pub laplace_gap: Option<f64>,
    /// `laplace_gap / ((1/2) log det V)`.
    pub laplace_gap_ratio: Option<f64>,
    pub laplace_in_support: Option<bool>,
    pub hindsight_error: Option<String>,
}

impl Summary {
    pub fn to_text(&self) -> String {
        fn opt(v: Option<f64>) -> String {
            v.map(|v| format!("{v:.6}")).unwrap_or_else(|| "undefined".into())
        }
        let mut out = String::new();
        let _ = writeln!(out, "rounds:          {}", self.rounds);
        let _ = writeln!(out, "log_K_pi:        {:.6}", self.log_k_pi);
        let _ = writeln!(out, "max_log_K_pi:    {:.6}", self.max_log_k_pi);
        match &self.theta_star {
            Some(t) => {
                let parts: Vec<String> = t.iter().map(|v| format!("{v:.6}")).collect();
                let _ = writeln!(out, "theta_star:      [{}]", parts.join(", "));
            }
            None => {
                let _ = writeln!(out, "theta_star:      undefined");
            }
        }
        for b in &self.beta_star {
            let _ = writeln!(out, "beta_star:       {b:.6}");
        }
        let _ = writeln!(out, "log_K_mle:       {}", opt(self.log_k_mle));
        let _ = writeln!(out, "svs_half:        {}", opt(self.svs_half));
        let _ = writeln!(out, "logdetV:         {}", opt(self.log_det_v));
        let _ = writeln!(out, "info_ratio:      {}", opt(self.info_ratio));
        let _ = writeln!(out, "laplace_gap:     {}", opt(self.laplace_gap));
        let _ = writeln!(out, "laplace_gap_rel: {}", opt(self.laplace_gap_ratio));
        if let Some(inside) = self.laplace_in_support {
            let _ = writeln!(out, "laplace_valid:   {inside}");
        }
        if let Some(e) = &self.hindsight_error {
            let _ = writeln!(out, "hindsight:       {e}");
        }
        out
    }
}

/// A finished run.
#[derive(Debug, Clone)]
pub struct Run {
    pub player: Player,
    pub trace: Vec<TraceRow>,
    pub last_mle: Option<MleResult>,
}

impl Run {
    pub fn summary(&self) -> Summary {
        let player = &self.player;
        let diag = player.state().diagnostics();
        let mut summary = Summary {
            rounds: player.state().n,
            log_k_pi: player.log_capital(),
            max_log_k_pi: player.max_log_capital(),
            theta_star: None,
            beta_star: Vec::new(),
            log_k_mle: None,
            svs_half: diag.svs.map(|s| s / 2.0),
            log_det_v: diag.log_det_v,
            info_ratio: hindsight::info_ratio(&diag),
            laplace_gap: None,
            laplace_gap_ratio: None,
            laplace_in_support: None,
            hindsight_error: None,
        };
        let mle = match &self.last_mle {
            Some(m) => Ok(m.clone()),
            None => player.hindsight(None),
        };
        match mle {
            Ok(m) if m.converged => {
                summary.theta_star = Some(m.theta_star.0.iter().copied().collect());
                summary.beta_star = player
                    .strategy()
                    .features
                    .logit_coordinates()
                    .map(|i| m.theta_star.0[i] + 1.0)
                    .collect();
                summary.log_k_mle = Some(m.log_capital);
                if let Ok(lap) = laplace_log_capital(&m, &player.strategy().prior) {
                    let gap = lap.log_capital - player.log_capital();
                    summary.laplace_gap = Some(gap);
                    summary.laplace_gap_ratio = diag
                        .log_det_v
                        .filter(|l| *l > 0.0)
                        .map(|l| gap / (0.5 * l));
                    summary.laplace_in_support = Some(lap.in_support);
                }
            }
            Ok(_) => summary.hindsight_error = Some(Error::NotConverged.to_string()),
            Err(e) => summary.hindsight_error = Some(e.to_string()),
        }
        summary
    }
}

/// Trace sampling. Hindsight and diagnostic columns are computed every
/// `every` rounds and always on the final round; `every = 0` samples only
/// the final round.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct TraceOptions {
    pub every: usize,
}

impl Default for TraceOptions {
    fn default() -> Self {
        Self { every: 10 }
    }
}

/// Plays `strategy` over the observations. `exo`, when given, holds one map
/// of exogenous values per observation.
pub fn run(
    strategy: &Strategy,
    observations: &[Observation],
    exo: Option<&[BTreeMap<String, f64>]>,
    opts: TraceOptions,
) -> Result<Run> {
    if observations.is_empty() {
        return Err(Error::EmptyData);
    }
    if let Some(e) = exo {
        if e.len() != observations.len() {
            return Err(Error::DimensionMismatch {
                expected: observations.len(),
                found: e.len(),
            });
        }
    }
    let mut player = Player::new(strategy.clone())?;
    let mut trace = Vec::with_capacity(observations.len());
    let mut last_mle: Option<MleResult> = None;
    let total = observations.len();
    for (i, obs) in observations.iter().enumerate() {
        let nu = player.play(*obs, exo.map(|e| &e[i]))?;
        let n = i + 1;
        let mut row = TraceRow {
            n,
            p: obs.p,
            x: obs.x,
            nu,
            log_k_pi: player.log_capital(),
            log_k_mle: None,
            svs_half: None,
            log_det_v: None,
            ratio: None,
        };
        let sampled = n == total || (opts.every > 0 && n % opts.every == 0);
        if sampled {
            let diag = player.state().diagnostics();
            row.svs_half = diag.svs.map(|s| s / 2.0);
            row.log_det_v = diag.log_det_v;
            row.ratio = diag.ratio;
            if !diag.degenerate {
                let init = last_mle.as_ref().map(|m| &m.theta_star);
                match player.hindsight(init) {
                    Ok(m) if m.converged => {
                        row.log_k_mle = Some(m.log_capital);
                        last_mle = Some(m);
                    }
                    _ => {
                        if n == total {
                            last_mle = None;
                        }
                    }
                }
            }
        }
        trace.push(row);
    }
    Ok(Run {
        player,
        trace,
        last_mle,
    })
}
