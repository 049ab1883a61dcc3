//! Seeded synthetic power-curve benchmarks.
//!
//! Configuration `i` of a benchmark with seed `seed` draws its curve from a
//! ChaCha8 generator seeded with `seed` on stream `i`, so any configuration
//! can be generated on demand without materializing the ones before it.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::curves::{envelope_for, PowerCurve};
use super::tabular::TabularBenchmark;
use crate::arm::{ConfigId, Envelope, EvalError, LossCurve, LossOracle};

pub const DEFAULT_ALPHA: f64 = 0.5;
pub const DEFAULT_EPS: f64 = 0.1;

/// Limits are `nu_star + U[0, eps)` with probability `alpha`, otherwise
/// `nu_star + U[eps, worse_upper]`. Curves are `nu + c * t^(-p)` with
/// `c ~ U[0, c_max]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SamplerSpec {
    pub alpha: f64,
    pub nu_star: f64,
    pub eps: f64,
    pub worse_upper: f64,
    pub c_max: f64,
    pub p: f64,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum SamplerError {
    #[error("alpha must lie in (0, 1), got {0}")]
    Alpha(f64),
    #[error("eps must be positive and below worse_upper = {worse_upper}, got {eps}")]
    Eps { eps: f64, worse_upper: f64 },
    #[error("curve parameters must be finite with c_max >= 0 and p > 0")]
    Curve,
}

impl SamplerSpec {
    pub fn new(alpha: f64, eps: f64, seed: u64) -> Self {
        Self {
            alpha,
            nu_star: 0.0,
            eps,
            worse_upper: 1.0,
            c_max: 1.0,
            p: 1.0,
            seed,
        }
    }

    pub fn with_defaults(seed: u64) -> Self {
        Self::new(DEFAULT_ALPHA, DEFAULT_EPS, seed)
    }

    pub fn validate(&self) -> Result<(), SamplerError> {
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(SamplerError::Alpha(self.alpha));
        }
        if !(self.eps > 0.0 && self.eps < self.worse_upper) {
            return Err(SamplerError::Eps {
                eps: self.eps,
                worse_upper: self.worse_upper,
            });
        }
        if !(self.c_max >= 0.0 && self.c_max.is_finite() && self.p > 0.0 && self.p.is_finite())
            || !self.nu_star.is_finite()
        {
            return Err(SamplerError::Curve);
        }
        Ok(())
    }

    /// Curve of configuration `id`.
    pub fn curve(&self, id: u64) -> PowerCurve {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(id);
        let good = rng.random::<f64>() < self.alpha;
        let u = rng.random::<f64>();
        let nu = if good {
            self.nu_star + self.eps * u
        } else {
            self.nu_star + self.eps + (self.worse_upper - self.eps) * u
        };
        let c = self.c_max * rng.random::<f64>();
        PowerCurve { nu, c, p: self.p }
    }

    /// `gamma(j) = c_max * j^(-p)`.
    pub fn envelope(&self) -> Envelope {
        envelope_for(self.c_max, self.p)
    }

    /// Whether a limit counts as near-optimal, `nu <= nu_star + eps`.
    pub fn is_eps_optimal(&self, nu: f64) -> bool {
        nu <= self.nu_star + self.eps
    }
}

/// The first `count` configurations of the family.
pub fn sample_configs(
    spec: &SamplerSpec,
    count: usize,
) -> Result<Vec<(ConfigId, PowerCurve)>, SamplerError> {
    spec.validate()?;
    Ok((0..count as u64)
        .map(|i| (ConfigId(i), spec.curve(i)))
        .collect())
}

/// Unbounded oracle over a synthetic family.
#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticBenchmark {
    spec: SamplerSpec,
}

impl SyntheticBenchmark {
    pub fn new(spec: SamplerSpec) -> Result<Self, SamplerError> {
        spec.validate()?;
        Ok(Self { spec })
    }

    pub fn spec(&self) -> &SamplerSpec {
        &self.spec
    }

    /// Materializes configurations `0..n` at fidelities `1..=r_cap`.
    pub fn to_tabular(&self, n: u64, r_cap: u64) -> TabularBenchmark {
        let mut cells = Vec::with_capacity((n * r_cap) as usize);
        for id in 0..n {
            let curve = self.spec.curve(id);
            for f in 1..=r_cap {
                cells.push((id, f, curve.loss(f)));
            }
        }
        TabularBenchmark::from_cells(cells).expect("generated grid is rectangular")
    }
}

impl LossOracle for SyntheticBenchmark {
    fn loss(&self, config: ConfigId, level: u64) -> Result<f64, EvalError> {
        if level == 0 {
            return Err(EvalError::ZeroLevel(level));
        }
        Ok(self.spec.curve(config.0).loss(level))
    }

    fn limit(&self, config: ConfigId) -> Option<f64> {
        Some(self.spec.curve(config.0).nu)
    }
}
