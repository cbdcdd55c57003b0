//! Finite distributions in log space.
//!
//! Every agent in the engine produces a [`Categorical`]. Intermediate
//! quantities are carried as natural-log weights ([`LogWeights`]) and only
//! exponentiated at normalization boundaries, using a max-shift so deep
//! recursions do not underflow. Information quantities are in nats.

use crate::error::{Result, RsaError};

/// Tolerance on `Σ p = 1` accepted when constructing a [`Categorical`].
pub const NORMALIZATION_TOLERANCE: f64 = 1e-9;

/// A probability distribution over an ordered list of unique labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Categorical {
    labels: Vec<String>,
    probs: Vec<f64>,
}

impl Categorical {
    /// Builds a distribution, checking every invariant.
    pub fn new(labels: Vec<String>, probs: Vec<f64>) -> Result<Self> {
        if labels.len() != probs.len() {
            return Err(RsaError::InvalidArgument(format!(
                "{} labels but {} probabilities",
                labels.len(),
                probs.len()
            )));
        }
        for (i, l) in labels.iter().enumerate() {
            if labels[..i].contains(l) {
                return Err(RsaError::InvalidArgument(format!("duplicate label `{l}`")));
            }
        }
        if probs.iter().any(|p| !p.is_finite() || *p < 0.0) {
            return Err(RsaError::InvalidArgument(
                "probabilities must be finite and non-negative".into(),
            ));
        }
        let total: f64 = probs.iter().sum();
        if total == 0.0 {
            return Err(RsaError::AllZeroSupport);
        }
        if (total - 1.0).abs() > NORMALIZATION_TOLERANCE {
            return Err(RsaError::InvalidArgument(format!(
                "probabilities sum to {total}, not 1"
            )));
        }
        Ok(Self { labels, probs })
    }

    /// Builds from non-negative weights, dividing by their sum.
    pub fn from_weights(labels: Vec<String>, weights: Vec<f64>) -> Result<Self> {
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
            return Err(RsaError::InvalidArgument(
                "weights must be finite and non-negative".into(),
            ));
        }
        let total: f64 = weights.iter().sum();
        if total <= 0.0 {
            return Err(RsaError::AllZeroSupport);
        }
        let probs = weights.into_iter().map(|w| w / total).collect();
        Self::new(labels, probs)
    }

    pub fn uniform(labels: Vec<String>) -> Result<Self> {
        let n = labels.len();
        Self::from_weights(labels, vec![1.0; n])
    }

    /// Internal constructor for vectors that are already normalized.
    pub(crate) fn from_parts_unchecked(labels: Vec<String>, probs: Vec<f64>) -> Self {
        debug_assert_eq!(labels.len(), probs.len());
        Self { labels, probs }
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == label)
    }

    /// Probability of `label`; unknown labels have probability 0.
    pub fn prob(&self, label: &str) -> f64 {
        self.index_of(label).map_or(0.0, |i| self.probs[i])
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, f64)> {
        self.labels
            .iter()
            .map(String::as_str)
            .zip(self.probs.iter().copied())
    }

    /// Labels with positive probability, in declaration order.
    pub fn support(&self) -> Vec<&str> {
        self.iter().filter(|(_, p)| *p > 0.0).map(|(l, _)| l).collect()
    }

    /// Most probable label; ties go to the earliest declared label.
    pub fn mode(&self) -> (&str, f64) {
        let mut best = 0;
        for (i, p) in self.probs.iter().enumerate() {
            if *p > self.probs[best] {
                best = i;
            }
        }
        (&self.labels[best], self.probs[best])
    }

    /// Natural-log weights of this distribution.
    pub fn to_log_weights(&self) -> LogWeights {
        LogWeights {
            labels: self.labels.clone(),
            values: self.probs.iter().map(|p| p.ln()).collect(),
        }
    }

    /// Total-variation distance to another distribution on the same labels.
    pub fn total_variation(&self, other: &Categorical) -> Result<f64> {
        if self.labels != other.labels {
            return Err(RsaError::LabelMismatch);
        }
        Ok(0.5
            * self
                .probs
                .iter()
                .zip(&other.probs)
                .map(|(a, b)| (a - b).abs())
                .sum::<f64>())
    }
}

/// Label → natural-log weight (possibly `-inf`). Also used as a label →
/// utility table for [`softmax_decision`].
#[derive(Debug, Clone, PartialEq)]
pub struct LogWeights {
    labels: Vec<String>,
    values: Vec<f64>,
}

/// A label → utility table; same representation as [`LogWeights`].
pub type Utilities = LogWeights;

impl LogWeights {
    pub fn new(labels: Vec<String>, values: Vec<f64>) -> Result<Self> {
        if labels.len() != values.len() {
            return Err(RsaError::InvalidArgument(format!(
                "{} labels but {} values",
                labels.len(),
                values.len()
            )));
        }
        if values.iter().any(|v| v.is_nan() || *v == f64::INFINITY) {
            return Err(RsaError::InvalidArgument(
                "log-weights must be finite or negative infinity".into(),
            ));
        }
        Ok(Self { labels, values })
    }

    pub fn from_pairs<S: Into<String>>(pairs: impl IntoIterator<Item = (S, f64)>) -> Result<Self> {
        let (labels, values) = pairs.into_iter().map(|(l, v)| (l.into(), v)).unzip();
        Self::new(labels, values)
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }
}

/// `log Σ exp(x)`, computed with a max-shift. Returns `-inf` for an empty
/// slice or when every entry is `-inf`.
pub fn log_sum_exp(xs: &[f64]) -> f64 {
    let max = xs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return f64::NEG_INFINITY;
    }
    max + xs.iter().map(|x| (x - max).exp()).sum::<f64>().ln()
}

/// Exponentiates and renormalizes a vector of log-weights. `None` when no
/// entry is finite.
pub(crate) fn normalize_log(values: &[f64]) -> Option<Vec<f64>> {
    let max = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if max == f64::NEG_INFINITY {
        return None;
    }
    let mut out: Vec<f64> = values.iter().map(|v| (v - max).exp()).collect();
    let total: f64 = out.iter().sum();
    for p in &mut out {
        *p /= total;
    }
    Some(out)
}

/// Renormalizes non-negative weights. `None` when they sum to zero.
pub(crate) fn normalize_weights(weights: &[f64]) -> Option<Vec<f64>> {
    let total: f64 = weights.iter().sum();
    if total.is_nan() || total <= 0.0 {
        return None;
    }
    Some(weights.iter().map(|w| w / total).collect())
}

/// Turns log-weights into a distribution proportional to `exp(w)`.
pub fn normalize(w: &LogWeights) -> Result<Categorical> {
    let probs = normalize_log(&w.values).ok_or(RsaError::AllZeroSupport)?;
    Ok(Categorical::from_parts_unchecked(w.labels.clone(), probs))
}

/// `α · u` with the convention that a `-inf` utility stays `-inf` even when
/// `α = 0`.
#[inline]
pub(crate) fn scale_utility(alpha: f64, utility: f64) -> f64 {
    if utility == f64::NEG_INFINITY {
        f64::NEG_INFINITY
    } else {
        alpha * utility
    }
}

/// Soft-max choice rule: `P(label) ∝ exp(α · U(label))`.
///
/// `α = 0` gives the uniform distribution over labels with finite utility.
pub fn softmax_decision(utilities: &Utilities, alpha: f64) -> Result<Categorical> {
    if !alpha.is_finite() || alpha < 0.0 {
        return Err(RsaError::InvalidArgument(format!(
            "alpha must be finite and >= 0, got {alpha}"
        )));
    }
    let scaled: Vec<f64> = utilities
        .values
        .iter()
        .map(|u| scale_utility(alpha, *u))
        .collect();
    let probs = normalize_log(&scaled).ok_or(RsaError::AllZeroSupport)?;
    Ok(Categorical::from_parts_unchecked(utilities.labels.clone(), probs))
}

/// Standard Kullback-Leibler divergence `Σ p log(p/q)` in nats.
///
/// The result is non-negative. A utility that rewards alignment with `p`
/// is `-kl_divergence(p, q)`.
pub fn kl_divergence(p: &Categorical, q: &Categorical) -> Result<f64> {
    if p.labels != q.labels {
        return Err(RsaError::LabelMismatch);
    }
    let mut total = 0.0;
    for ((label, pi), qi) in p.iter().zip(&q.probs) {
        if pi == 0.0 {
            continue;
        }
        if *qi == 0.0 {
            return Err(RsaError::AbsoluteContinuityViolation {
                label: label.to_string(),
            });
        }
        total += pi * (pi / qi).ln();
    }
    // Rounding can push an exact zero slightly negative.
    Ok(total.max(0.0))
}

/// `Σ p(x) f(x)` over the labels of `p`. Labels with zero probability are
/// skipped, so `f` only needs to be defined on the support.
pub fn expectation(p: &Categorical, f: impl Fn(&str) -> f64) -> f64 {
    p.iter()
        .filter(|(_, pi)| *pi > 0.0)
        .map(|(l, pi)| pi * f(l))
        .sum()
}
