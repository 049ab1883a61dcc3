//! Arms, loss curves and the convergence envelope.
//!
//! A hyperparameter configuration is treated as a bandit arm: pulling arm `i`
//! with `t` resource units reveals the loss `loss(t)`, which converges to a
//! limit `nu` as `t` grows. An [`Envelope`] bounds how far any arm of an
//! instance can be from its limit after `t` units.

use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

/// Identifier of a sampled configuration.
///
/// Ids are handed out in sampling order within a run lineage, so comparing ids
/// compares sampling order. Selection uses this for deterministic tie-breaking.
#[derive(
    Copy, Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize, Default,
)]
#[serde(transparent)]
pub struct ConfigId(pub u64);

impl fmt::Display for ConfigId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

impl From<u64> for ConfigId {
    fn from(v: u64) -> Self {
        ConfigId(v)
    }
}

/// Deterministic loss sequence of a single arm.
pub trait LossCurve {
    /// Loss observed after `t >= 1` resource units.
    fn loss(&self, t: u64) -> f64;
    /// Limit of `loss(t)` as `t` grows.
    fn limit(&self) -> f64;
}

/// Errors raised when asking an oracle for a loss.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum EvalError {
    #[error("unknown configuration {0}")]
    UnknownConfig(ConfigId),
    #[error("level {level} is not on the fidelity grid of configuration {config}")]
    LevelOffGrid { config: ConfigId, level: u64 },
    #[error("level must be at least 1, got {0}")]
    ZeroLevel(u64),
    #[error("oracle returned a non-finite loss for configuration {config} at level {level}")]
    NonFinite { config: ConfigId, level: u64 },
}

/// Source of losses for every configuration a sampler can produce.
///
/// Oracles are immutable once built and may be shared between threads.
pub trait LossOracle: Send + Sync {
    /// Loss of `config` after `level` resource units.
    fn loss(&self, config: ConfigId, level: u64) -> Result<f64, EvalError>;

    /// Limit loss of `config`, when the oracle knows it.
    fn limit(&self, _config: ConfigId) -> Option<f64> {
        None
    }

    /// Number of distinct configurations the oracle can serve, `None` if unbounded.
    fn capacity(&self) -> Option<u64> {
        None
    }
}

/// Nonincreasing bound `gamma(j) >= sup_i |loss_i(j) - nu_i|`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Envelope {
    /// `gamma(j) = c_max * j^(-p)`.
    Power { c_max: f64, p: f64 },
    /// `gamma(j) = values[j - 1]`, holding the last value beyond the table.
    Tabulated { values: Vec<f64> },
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum EnvelopeError {
    #[error("envelope argument must be positive, got {0}")]
    NonPositive(f64),
    #[error("cap must be at least 1")]
    ZeroCap,
    #[error("envelope is not nonincreasing at j = {0}")]
    NotMonotone(u64),
}

impl Envelope {
    pub fn power(c_max: f64, p: f64) -> Self {
        Envelope::Power { c_max, p }
    }

    /// Builds a tabulated envelope, rejecting tables that increase anywhere.
    pub fn tabulated(values: Vec<f64>) -> Result<Self, EnvelopeError> {
        for (j, w) in values.windows(2).enumerate() {
            if w[1] > w[0] {
                return Err(EnvelopeError::NotMonotone(j as u64 + 2));
            }
        }
        Ok(Envelope::Tabulated { values })
    }

    /// Value of the envelope at `j >= 1` (`j = 0` is treated as `1`).
    pub fn gamma(&self, j: u64) -> f64 {
        let j = j.max(1);
        match self {
            Envelope::Power { c_max, p } => {
                if *c_max == 0.0 {
                    0.0
                } else {
                    c_max / (j as f64).powf(*p)
                }
            }
            Envelope::Tabulated { values } => match values.len() {
                0 => 0.0,
                len => values[(j as usize).min(len) - 1],
            },
        }
    }

    /// Generalized inverse, see [`envelope_inverse`].
    pub fn inverse(&self, y: f64, cap: u64) -> Result<u64, EnvelopeError> {
        envelope_inverse(self, y, cap)
    }
}

/// Smallest `j >= 1` with `gamma(j) <= y`, or `cap` when no such `j <= cap` exists.
///
/// This realizes `min{cap, gamma^-1(y)}`. The envelope is monotone, so the
/// search is a binary search over `[1, cap]`.
pub fn envelope_inverse(env: &Envelope, y: f64, cap: u64) -> Result<u64, EnvelopeError> {
    if y.is_nan() || y <= 0.0 {
        return Err(EnvelopeError::NonPositive(y));
    }
    if cap == 0 {
        return Err(EnvelopeError::ZeroCap);
    }
    if env.gamma(cap) > y {
        return Ok(cap);
    }
    let (mut lo, mut hi) = (1u64, cap);
    while lo < hi {
        let mid = lo + (hi - lo) / 2;
        if env.gamma(mid) <= y {
            hi = mid;
        } else {
            lo = mid + 1;
        }
    }
    Ok(lo)
}
