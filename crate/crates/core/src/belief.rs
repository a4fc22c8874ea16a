use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the total mass of a probability vector.
pub const MASS_TOLERANCE: f64 = 1e-9;

/// Probability mass function over the states `0..len`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(try_from = "Vec<f64>", into = "Vec<f64>")]
pub struct Belief {
    probs: Vec<f64>,
}

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(Error::InvalidBelief("empty probability vector".into()));
        }
        if let Some(p) = probs.iter().find(|p| !p.is_finite() || **p < 0.0) {
            return Err(Error::InvalidBelief(format!("entry {p} is not a probability")));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > MASS_TOLERANCE {
            return Err(Error::InvalidBelief(format!("entries sum to {sum}")));
        }
        Ok(Self { probs })
    }

    /// Normalizes nonnegative weights into a belief.
    pub fn from_weights(weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(Error::InvalidBelief("weights must be finite and nonnegative".into()));
        }
        let sum: f64 = weights.iter().sum();
        if sum <= 0.0 {
            return Err(Error::ZeroLikelihood("weights have zero total mass".into()));
        }
        Ok(Self {
            probs: weights.into_iter().map(|w| w / sum).collect(),
        })
    }

    pub fn uniform(states: usize) -> Self {
        assert!(states > 0, "belief needs at least one state");
        Self {
            probs: vec![1.0 / states as f64; states],
        }
    }

    /// Point mass on `state`.
    pub fn certain(states: usize, state: usize) -> Self {
        let mut probs = vec![0.0; states];
        probs[state] = 1.0;
        Self { probs }
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn get(&self, state: usize) -> f64 {
        self.probs[state]
    }

    /// Posterior mean of the 1-based state label.
    pub fn conditional_mean(&self) -> f64 {
        self.probs
            .iter()
            .enumerate()
            .map(|(i, p)| (i + 1) as f64 * p)
            .sum()
    }

    /// Most probable state; ties go to the lowest index.
    pub fn map_state(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.probs.iter().enumerate() {
            if p > self.probs[best] {
                best = i;
            }
        }
        best
    }

    pub fn total_variation(&self, other: &Belief) -> f64 {
        0.5 * self
            .probs
            .iter()
            .zip(&other.probs)
            .map(|(a, b)| (a - b).abs())
            .sum::<f64>()
    }

    pub fn to_log(&self) -> LogBelief {
        LogBelief::from_belief(self)
    }
}

impl TryFrom<Vec<f64>> for Belief {
    type Error = Error;

    fn try_from(v: Vec<f64>) -> Result<Self> {
        Belief::new(v)
    }
}

impl From<Belief> for Vec<f64> {
    fn from(b: Belief) -> Self {
        b.probs
    }
}

/// Unnormalized log belief kept in canonical form: the largest entry is 0.
///
/// Entries may be `-inf` for states outside the support.
#[derive(Debug, Clone, PartialEq)]
pub struct LogBelief {
    logs: Vec<f64>,
}

impl LogBelief {
    /// Canonicalizes arbitrary log weights.
    pub fn from_logs(mut logs: Vec<f64>) -> Result<Self> {
        if logs.is_empty() {
            return Err(Error::InvalidBelief("empty log vector".into()));
        }
        if logs.iter().any(|l| l.is_nan() || *l == f64::INFINITY) {
            return Err(Error::InvalidBelief("log weights must be finite or -inf".into()));
        }
        let max = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        if max == f64::NEG_INFINITY {
            return Err(Error::ZeroLikelihood("every state has zero weight".into()));
        }
        for l in logs.iter_mut() {
            *l -= max;
        }
        Ok(Self { logs })
    }

    /// Uniform belief: all entries zero.
    pub fn uniform(states: usize) -> Self {
        assert!(states > 0, "belief needs at least one state");
        Self {
            logs: vec![0.0; states],
        }
    }

    pub fn from_belief(b: &Belief) -> Self {
        Self::from_logs(b.probs().iter().map(|p| p.ln()).collect())
            .expect("a valid belief has positive mass")
    }

    pub fn logs(&self) -> &[f64] {
        &self.logs
    }

    pub fn len(&self) -> usize {
        self.logs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.logs.is_empty()
    }

    /// Exponentiates and normalizes (log-sum-exp, stable since max is 0).
    pub fn to_belief(&self) -> Belief {
        let weights: Vec<f64> = self.logs.iter().map(|l| l.exp()).collect();
        let sum: f64 = weights.iter().sum();
        Belief {
            probs: weights.into_iter().map(|w| w / sum).collect(),
        }
    }

    /// Adds a per-state log likelihood and re-canonicalizes.
    pub fn update(&self, log_likelihood: &[f64]) -> Result<Self> {
        debug_assert_eq!(self.logs.len(), log_likelihood.len());
        Self::from_logs(
            self.logs
                .iter()
                .zip(log_likelihood)
                .map(|(a, b)| a + b)
                .collect(),
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn rejects_bad_vectors() {
        assert!(Belief::new(vec![]).is_err());
        assert!(Belief::new(vec![0.5, 0.6]).is_err());
        assert!(Belief::new(vec![-0.1, 1.1]).is_err());
        assert!(Belief::new(vec![f64::NAN, 1.0]).is_err());
        assert!(Belief::from_weights(vec![0.0, 0.0]).is_err());
        assert!(LogBelief::from_logs(vec![f64::NEG_INFINITY; 2]).is_err());
        assert!(LogBelief::from_logs(vec![f64::INFINITY, 0.0]).is_err());
    }

    #[test]
    fn canonical_form_and_round_trip() {
        let l = LogBelief::from_logs(vec![-3.0, -1.0, f64::NEG_INFINITY]).unwrap();
        assert_eq!(l.logs(), &[-2.0, 0.0, f64::NEG_INFINITY]);
        let b = Belief::new(vec![0.2, 0.3, 0.5]).unwrap();
        let back = b.to_log().to_belief();
        assert!(b.total_variation(&back) < 1e-15);
    }

    #[test]
    fn conditional_mean_uses_one_based_labels() {
        let b = Belief::new(vec![0.25, 0.75]).unwrap();
        assert!((b.conditional_mean() - 1.75).abs() < 1e-15);
        assert_eq!(b.map_state(), 1);
        assert_eq!(Belief::uniform(3).map_state(), 0);
    }

    #[test]
    fn serde_validates() {
        let b: Belief = serde_json::from_str("[0.4, 0.6]").unwrap();
        assert_eq!(b.probs(), &[0.4, 0.6]);
        assert!(serde_json::from_str::<Belief>("[0.4, 0.7]").is_err());
    }

    proptest! {
        #[test]
        fn scaling_invariance(v in proptest::collection::vec(-20.0f64..20.0, 1..6), shift in -50.0f64..50.0) {
            let a = LogBelief::from_logs(v.clone()).unwrap();
            let b = LogBelief::from_logs(v.iter().map(|x| x + shift).collect()).unwrap();
            for (x, y) in a.logs().iter().zip(b.logs()) {
                prop_assert!((x - y).abs() < 1e-9);
            }
            let p = a.to_belief();
            prop_assert!((p.probs().iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }
}
