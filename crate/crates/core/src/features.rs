//! Side-information builders.
//!
//! A [`FeatureSpec`] turns the game history, the current forecast and any
//! exogenous columns into the vector `c_n`. The coefficient on
//! [`Feature::ForecastLogit`] is `beta - 1`, so that
//! `logit(p_hat) = beta logit(p) + tau` where `tau` collects the other terms.

use std::collections::BTreeMap;
use std::fmt;
use std::str::FromStr;

use nalgebra::DVector;

use crate::error::{Error, Result};
use crate::game::check_probability;

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub enum Feature {
    /// Always 1.
    Constant,
    /// `log(p / (1 - p))` of the current forecast.
    ForecastLogit,
    /// Outcome `k` rounds back, 0 before the first round.
    LagOutcome(usize),
    /// Named column supplied alongside the data.
    Exogenous(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureSpec {
    features: Vec<Feature>,
}

impl FeatureSpec {
    pub fn new(features: Vec<Feature>) -> Result<Self> {
        if features.is_empty() {
            return Err(Error::InvalidFeatureSpec("no features".into()));
        }
        if features.iter().any(|f| matches!(f, Feature::LagOutcome(0))) {
            return Err(Error::InvalidFeatureSpec("lag must be at least 1".into()));
        }
        Ok(Self { features })
    }

    /// The three built-in strategies: intercept only; intercept and
    /// forecast logit; intercept, forecast logit and previous outcome.
    pub fn preset(name: &str) -> Result<Self> {
        use Feature::*;
        let features = match name {
            "strategy-1" => vec![Constant],
            "strategy-2" => vec![Constant, ForecastLogit],
            "strategy-3" => vec![Constant, ForecastLogit, LagOutcome(1)],
            other => return Err(Error::UnknownPreset(other.to_string())),
        };
        Self::new(features)
    }

    pub fn dim(&self) -> usize {
        self.features.len()
    }

    pub fn features(&self) -> &[Feature] {
        &self.features
    }

    /// Coordinates whose coefficient is `beta - 1`.
    pub fn logit_coordinates(&self) -> impl Iterator<Item = usize> + '_ {
        self.features
            .iter()
            .enumerate()
            .filter(|(_, f)| matches!(f, Feature::ForecastLogit))
            .map(|(i, _)| i)
    }

    /// Builds `c_n`. `history` holds the outcomes of rounds `1..n-1` in order.
    pub fn build(
        &self,
        history: &[bool],
        p: f64,
        exo: Option<&BTreeMap<String, f64>>,
    ) -> Result<DVector<f64>> {
        check_probability(p)?;
        let mut c = DVector::zeros(self.dim());
        for (slot, feature) in c.iter_mut().zip(&self.features) {
            *slot = match feature {
                Feature::Constant => 1.0,
                Feature::ForecastLogit => (p / (1.0 - p)).ln(),
                Feature::LagOutcome(k) => match history.len().checked_sub(*k) {
                    Some(i) if history[i] => 1.0,
                    _ => 0.0,
                },
                Feature::Exogenous(name) => *exo
                    .and_then(|m| m.get(name))
                    .ok_or_else(|| Error::MissingExogenous(name.clone()))?,
            };
        }
        Ok(c)
    }
}

/// Free-function form of [`FeatureSpec::build`].
pub fn build_features(
    spec: &FeatureSpec,
    history: &[bool],
    p: f64,
    exo: Option<&BTreeMap<String, f64>>,
) -> Result<DVector<f64>> {
    spec.build(history, p, exo)
}

impl fmt::Display for Feature {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Feature::Constant => write!(f, "const"),
            Feature::ForecastLogit => write!(f, "logit"),
            Feature::LagOutcome(k) => write!(f, "lag:{k}"),
            Feature::Exogenous(name) => write!(f, "exo:{name}"),
        }
    }
}

impl FromStr for Feature {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        match s {
            "const" | "1" => return Ok(Feature::Constant),
            "logit" => return Ok(Feature::ForecastLogit),
            "lag" => return Ok(Feature::LagOutcome(1)),
            _ => {}
        }
        if let Some(k) = s.strip_prefix("lag:") {
            let k = k
                .parse::<usize>()
                .map_err(|_| Error::InvalidFeatureSpec(format!("bad lag `{s}`")))?;
            return Ok(Feature::LagOutcome(k));
        }
        if let Some(name) = s.strip_prefix("exo:") {
            if !name.is_empty() {
                return Ok(Feature::Exogenous(name.to_string()));
            }
        }
        Err(Error::InvalidFeatureSpec(format!("unknown feature `{s}`")))
    }
}

impl fmt::Display for FeatureSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for (i, feat) in self.features.iter().enumerate() {
            if i > 0 {
                f.write_str(",")?;
            }
            write!(f, "{feat}")?;
        }
        Ok(())
    }
}

/// Textual form: comma-separated `const`, `logit`, `lag:K`, `exo:NAME`.
impl FromStr for FeatureSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let features = s
            .split(',')
            .map(str::parse)
            .collect::<Result<Vec<Feature>>>()?;
        Self::new(features)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets() {
        let s1 = FeatureSpec::preset("strategy-1").unwrap();
        assert_eq!(s1.dim(), 1);
        assert_eq!(s1.build(&[], 0.83, None).unwrap().as_slice(), &[1.0]);

        let s2 = FeatureSpec::preset("strategy-2").unwrap();
        assert_eq!(s2.build(&[true], 0.5, None).unwrap().as_slice(), &[1.0, 0.0]);

        let s3 = FeatureSpec::preset("strategy-3").unwrap();
        assert_eq!(s3.dim(), 3);
        let c = s3.build(&[false, true], 0.4, None).unwrap();
        assert_eq!(c[0], 1.0);
        assert!((c[1] - (2.0f64 / 3.0).ln()).abs() < 1e-15);
        assert_eq!(c[2], 1.0);

        assert!(matches!(
            FeatureSpec::preset("strategy-9"),
            Err(Error::UnknownPreset(_))
        ));
    }

    #[test]
    fn first_round_lag_is_zero() {
        let s3 = FeatureSpec::preset("strategy-3").unwrap();
        assert_eq!(s3.build(&[], 0.5, None).unwrap()[2], 0.0);
        let lag2: FeatureSpec = "lag:2".parse().unwrap();
        assert_eq!(lag2.build(&[true], 0.5, None).unwrap()[0], 0.0);
        assert_eq!(lag2.build(&[true, false], 0.5, None).unwrap()[0], 1.0);
    }

    #[test]
    fn exogenous_columns() {
        let spec: FeatureSpec = "const,exo:humidity".parse().unwrap();
        let mut exo = BTreeMap::new();
        exo.insert("humidity".to_string(), 0.64);
        assert_eq!(spec.build(&[], 0.5, Some(&exo)).unwrap()[1], 0.64);
        assert!(matches!(
            spec.build(&[], 0.5, None),
            Err(Error::MissingExogenous(name)) if name == "humidity"
        ));
    }

    #[test]
    fn logit_times_coefficient_gives_beta_model() {
        // theta' c = (beta - 1) logit p + tau, so logit(p_hat) = beta logit(p) + tau.
        let spec = FeatureSpec::preset("strategy-2").unwrap();
        let (beta, tau, p) = (1.5, -0.3, 0.2);
        let c = spec.build(&[], p, None).unwrap();
        let theta = crate::logistic::Theta::from_slice(&[tau, beta - 1.0]).unwrap();
        let phat = crate::logistic::predict(&theta, p, &c).unwrap();
        let lp = (p / (1.0 - p)).ln();
        assert!(((phat / (1.0 - phat)).ln() - (beta * lp + tau)).abs() < 1e-12);
    }

    #[test]
    fn textual_form() {
        let spec: FeatureSpec = "const, logit ,lag:1".parse().unwrap();
        assert_eq!(spec, FeatureSpec::preset("strategy-3").unwrap());
        assert_eq!(spec.to_string(), "const,logit,lag:1");
        assert_eq!(spec.logit_coordinates().collect::<Vec<_>>(), vec![1]);
        assert!("".parse::<FeatureSpec>().is_err());
        assert!("lag:0".parse::<FeatureSpec>().is_err());
        assert!("const,cubic".parse::<FeatureSpec>().is_err());
    }

    #[test]
    fn rejects_boundary_forecast() {
        let s = FeatureSpec::preset("strategy-2").unwrap();
        assert!(s.build(&[], 1.0, None).is_err());
    }
}
