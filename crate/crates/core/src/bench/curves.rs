//! Analytic loss curves and fixed curve sets.

use serde::{Deserialize, Serialize};

use crate::arm::{ConfigId, Envelope, EvalError, LossCurve, LossOracle};

/// `loss(t) = nu + c * t^(-p)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PowerCurve {
    pub nu: f64,
    pub c: f64,
    pub p: f64,
}

impl LossCurve for PowerCurve {
    fn loss(&self, t: u64) -> f64 {
        if self.c == 0.0 {
            self.nu
        } else {
            self.nu + self.c / (t as f64).powf(self.p)
        }
    }

    fn limit(&self) -> f64 {
        self.nu
    }
}

/// Step curve: `early` below the crossover level, `late` from it on.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CrossingCurve {
    pub early: f64,
    pub late: f64,
    pub crossover: u64,
}

impl LossCurve for CrossingCurve {
    fn loss(&self, t: u64) -> f64 {
        if t < self.crossover {
            self.early
        } else {
            self.late
        }
    }

    fn limit(&self) -> f64 {
        self.late
    }
}

/// Envelope `gamma(j) = c_max * j^(-p_min)` of a power-curve family with
/// `c <= c_max` and `p >= p_min`.
pub fn envelope_for(c_max: f64, p_min: f64) -> Envelope {
    Envelope::power(c_max, p_min)
}

/// Oracle over an explicit list of curves; configuration `i` is `curves[i]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CurveSet<C> {
    pub curves: Vec<C>,
}

impl<C> CurveSet<C> {
    pub fn new(curves: Vec<C>) -> Self {
        Self { curves }
    }
}

impl<C: LossCurve + Send + Sync> LossOracle for CurveSet<C> {
    fn loss(&self, config: ConfigId, level: u64) -> Result<f64, EvalError> {
        self.curves
            .get(config.0 as usize)
            .map(|c| c.loss(level))
            .ok_or(EvalError::UnknownConfig(config))
    }

    fn limit(&self, config: ConfigId) -> Option<f64> {
        self.curves.get(config.0 as usize).map(LossCurve::limit)
    }

    fn capacity(&self) -> Option<u64> {
        Some(self.curves.len() as u64)
    }
}
