//! Forecaster and Reality generators for simulated games.
//!
//! Randomness comes from ChaCha8 seeded with a `u64`, so a scenario and seed
//! reproduce the same sequence on every platform. Exactly one uniform draw is
//! consumed per round.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// A forecast and the outcome that followed; side information is attached
/// later from a [`crate::FeatureSpec`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub p: f64,
    pub x: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub enum RealityModel {
    /// `x_n ~ Bernoulli(q)` independently of the forecast.
    Bernoulli { q: f64 },
    /// Two-state chain: `p11 = P(x_n = 1 | x_{n-1} = 1)`,
    /// `p10 = P(x_n = 1 | x_{n-1} = 0)`, and `P(x_1 = 1) = initial`.
    MarkovChain { p11: f64, p10: f64, initial: f64 },
    /// `x_n ~ Bernoulli(p_n)`: the forecaster is exactly right.
    Honest,
}

#[derive(Debug, Clone, PartialEq)]
pub enum ForecasterModel {
    /// Cycles through the listed values.
    Alternating(Vec<f64>),
    Constant(f64),
    /// Replays a recorded series, wrapping around if it is shorter than `n`.
    FromData(Vec<f64>),
}

impl ForecasterModel {
    fn values(&self) -> &[f64] {
        match self {
            ForecasterModel::Alternating(v) | ForecasterModel::FromData(v) => v,
            ForecasterModel::Constant(p) => std::slice::from_ref(p),
        }
    }

    pub fn forecast(&self, n: usize) -> f64 {
        let v = self.values();
        v[n % v.len()]
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    pub forecaster: ForecasterModel,
    pub reality: RealityModel,
    pub n: usize,
    pub seed: u64,
}

impl Scenario {
    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidScenario("n must be at least 1".into()));
        }
        let v = self.forecaster.values();
        if v.is_empty() {
            return Err(Error::InvalidScenario("forecaster has no values".into()));
        }
        if let Some(bad) = v.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(Error::InvalidScenario(format!("forecast {bad} is not in (0, 1)")));
        }
        let probs: &[f64] = match &self.reality {
            RealityModel::Bernoulli { q } => &[*q],
            RealityModel::MarkovChain { p11, p10, initial } => &[*p11, *p10, *initial],
            RealityModel::Honest => &[],
        };
        if let Some(bad) = probs.iter().find(|q| !(0.0..=1.0).contains(*q)) {
            return Err(Error::InvalidScenario(format!("probability {bad} is not in [0, 1]")));
        }
        Ok(())
    }

    /// Template for a named case: `case-1`, `case-2`, `case-3` or `honest`.
    ///
    /// Cases 1 and 2 pit a forecaster alternating 0.4/0.6 against
    /// Bernoulli(0.7) and Bernoulli(0.5) outcomes. Case 3 has a constant 0.5
    /// forecaster against a persistent Markov chain (default `p11 = 0.7`,
    /// `p10 = 0.3`). `honest` defaults to a constant 0.5 forecaster.
    pub fn preset(name: &str, n: usize, seed: u64) -> Result<Self> {
        let alternating = ForecasterModel::Alternating(vec![0.4, 0.6]);
        let (forecaster, reality) = match name {
            "case-1" => (alternating, RealityModel::Bernoulli { q: 0.7 }),
            "case-2" => (alternating, RealityModel::Bernoulli { q: 0.5 }),
            "case-3" => (
                ForecasterModel::Constant(0.5),
                RealityModel::MarkovChain {
                    p11: 0.7,
                    p10: 0.3,
                    initial: 0.5,
                },
            ),
            "honest" => (ForecasterModel::Constant(0.5), RealityModel::Honest),
            other => return Err(Error::UnknownPreset(other.to_string())),
        };
        Ok(Self {
            forecaster,
            reality,
            n,
            seed,
        })
    }

    pub fn generate(&self) -> Result<Vec<Observation>> {
        generate(self)
    }
}

pub fn generate(scenario: &Scenario) -> Result<Vec<Observation>> {
    scenario.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let mut out = Vec::with_capacity(scenario.n);
    let mut prev: Option<bool> = None;
    for i in 0..scenario.n {
        let p = scenario.forecaster.forecast(i);
        let prob = match scenario.reality {
            RealityModel::Bernoulli { q } => q,
            RealityModel::Honest => p,
            RealityModel::MarkovChain { p11, p10, initial } => match prev {
                None => initial,
                Some(true) => p11,
                Some(false) => p10,
            },
        };
        let x = rng.gen::<f64>() < prob;
        prev = Some(x);
        out.push(Observation { p, x });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn case_one_alternates() {
        let obs = Scenario::preset("case-1", 6, 1).unwrap().generate().unwrap();
        let ps: Vec<f64> = obs.iter().map(|o| o.p).collect();
        assert_eq!(ps, vec![0.4, 0.6, 0.4, 0.6, 0.4, 0.6]);
    }

    #[test]
    fn case_two_and_three_templates() {
        let s = Scenario::preset("case-2", 10, 0).unwrap();
        assert_eq!(s.reality, RealityModel::Bernoulli { q: 0.5 });
        assert_eq!(s.forecaster, ForecasterModel::Alternating(vec![0.4, 0.6]));
        let s = Scenario::preset("case-3", 10, 0).unwrap();
        assert!(matches!(s.reality, RealityModel::MarkovChain { p11, p10, .. } if p11 == 0.7 && p10 == 0.3));
        assert!(Scenario::preset("case-4", 10, 0).is_err());
    }

    #[test]
    fn honest_mean_concentrates() {
        let n = 10_000;
        let s = Scenario::preset("honest", n, 42).unwrap();
        let obs = s.generate().unwrap();
        let mean = obs.iter().filter(|o| o.x).count() as f64 / n as f64;
        let sigma = (0.25 / n as f64).sqrt();
        assert!((mean - 0.5).abs() < 3.0 * sigma, "mean {mean}");

        let mut s = Scenario::preset("honest", n, 3).unwrap();
        s.forecaster = ForecasterModel::Constant(0.3);
        let obs = s.generate().unwrap();
        let mean = obs.iter().filter(|o| o.x).count() as f64 / n as f64;
        assert!((mean - 0.3).abs() < 3.0 * (0.21 / n as f64).sqrt());
    }

    #[test]
    fn absorbing_chain() {
        let s = Scenario {
            forecaster: ForecasterModel::Constant(0.5),
            reality: RealityModel::MarkovChain {
                p11: 1.0,
                p10: 0.0,
                initial: 1.0,
            },
            n: 500,
            seed: 9,
        };
        assert!(s.generate().unwrap().iter().all(|o| o.x));
    }

    #[test]
    fn seeds_are_deterministic() {
        let a = Scenario::preset("case-3", 300, 5).unwrap().generate().unwrap();
        let b = Scenario::preset("case-3", 300, 5).unwrap().generate().unwrap();
        let c = Scenario::preset("case-3", 300, 6).unwrap().generate().unwrap();
        assert_eq!(a, b);
        assert_ne!(a, c);
    }

    #[test]
    fn invalid_scenarios() {
        let mut s = Scenario::preset("case-1", 0, 0).unwrap();
        assert!(s.generate().is_err());
        s.n = 5;
        s.forecaster = ForecasterModel::Constant(1.0);
        assert!(s.generate().is_err());
        s.forecaster = ForecasterModel::Constant(0.5);
        s.reality = RealityModel::Bernoulli { q: 1.5 };
        assert!(s.generate().is_err());
    }
}
