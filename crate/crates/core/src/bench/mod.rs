//! Loss oracles: synthetic power-curve families, tabular grids and a small
//! crossing-curve instance that separates the deepening policies.

pub mod curves;
pub mod synthetic;
pub mod tabular;

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use thiserror::Error;

use crate::arm::{ConfigId, LossOracle};
pub use curves::{envelope_for, CrossingCurve, CurveSet, PowerCurve};
pub use synthetic::{sample_configs, SamplerError, SamplerSpec, SyntheticBenchmark};
pub use tabular::{TabularBenchmark, TabularError, TabularOracle};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum BenchError {
    #[error("budget {r} is not in 1..={max_size}")]
    Fraction { r: u64, max_size: u64 },
    #[error("cannot parse benchmark descriptor {0:?}")]
    Descriptor(String),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Tabular(#[from] TabularError),
}

/// Budget `r` as a fraction of the maximum size `R_t`.
pub fn budget_to_fraction(r: u64, max_size: u64) -> Result<f64, BenchError> {
    if r == 0 || r > max_size {
        return Err(BenchError::Fraction { r, max_size });
    }
    Ok(r as f64 / max_size as f64)
}

/// Where the losses of a run come from. The seed is supplied when the
/// oracle is built.
#[derive(Debug, Clone, PartialEq)]
pub enum BenchmarkSource {
    Synthetic(SamplerSpec),
    Crossing,
    Tabular(PathBuf),
}

impl BenchmarkSource {
    pub fn build(&self, seed: u64) -> Result<Arc<dyn LossOracle>, BenchError> {
        Ok(match self {
            BenchmarkSource::Synthetic(spec) => {
                Arc::new(SyntheticBenchmark::new(SamplerSpec { seed, ..*spec })?)
            }
            BenchmarkSource::Crossing => Arc::new(crossing_witness().oracle),
            BenchmarkSource::Tabular(path) => {
                let bench = Arc::new(TabularBenchmark::load(path)?);
                Arc::new(TabularOracle::shuffled(bench, seed))
            }
        })
    }
}

impl fmt::Display for BenchmarkSource {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BenchmarkSource::Synthetic(s) => write!(
                f,
                "synthetic:alpha={},eps={},nu_star={},worse={},cmax={},p={}",
                s.alpha, s.eps, s.nu_star, s.worse_upper, s.c_max, s.p
            ),
            BenchmarkSource::Crossing => f.write_str("crossing"),
            BenchmarkSource::Tabular(p) => write!(f, "tabular:{}", p.display()),
        }
    }
}

impl FromStr for BenchmarkSource {
    type Err = BenchError;

    /// Accepts `synthetic`, `synthetic:key=value,...` (keys `alpha`, `eps`,
    /// `nu_star`, `worse`, `cmax`, `p`), `crossing`, `tabular:<path>` or a
    /// bare path to a tabular CSV file.
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let bad = || BenchError::Descriptor(s.to_string());
        if s == "crossing" {
            return Ok(BenchmarkSource::Crossing);
        }
        if let Some(path) = s.strip_prefix("tabular:") {
            return Ok(BenchmarkSource::Tabular(PathBuf::from(path)));
        }
        let Some(rest) = s.strip_prefix("synthetic") else {
            if s.is_empty() {
                return Err(bad());
            }
            return Ok(BenchmarkSource::Tabular(PathBuf::from(s)));
        };
        let mut spec = SamplerSpec::with_defaults(0);
        let rest = match rest.strip_prefix(':') {
            Some(r) => r,
            None if rest.is_empty() => "",
            None => return Err(bad()),
        };
        for kv in rest.split(',').filter(|kv| !kv.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(bad)?;
            let v: f64 = v.parse().map_err(|_| bad())?;
            match k {
                "alpha" => spec.alpha = v,
                "eps" => spec.eps = v,
                "nu_star" => spec.nu_star = v,
                "worse" => spec.worse_upper = v,
                "cmax" => spec.c_max = v,
                "p" => spec.p = v,
                _ => return Err(bad()),
            }
        }
        spec.validate()?;
        Ok(BenchmarkSource::Synthetic(spec))
    }
}

/// Four step curves on which the three deepening policies disagree.
///
/// An old halving run with `r = 1, eta = 2, s = 1` on arms `{0, 1}` promotes
/// arm 0. Continuing it with fresh arms `{2, 3}` at the same levels gives:
///
/// | policy     | winner | pulls |
/// |------------|--------|-------|
/// | efficient  | 0      | 4     |
/// | preserving | 0      | 6     |
/// | discarding | 3      | 6     |
///
/// and a fresh run on all four arms returns 3 for 8 pulls.
pub struct CrossingWitness {
    pub oracle: CurveSet<CrossingCurve>,
    pub old_arms: Vec<ConfigId>,
    pub fresh_arms: Vec<ConfigId>,
    pub r: u64,
    pub eta: u64,
    pub rounds: u32,
}

pub fn crossing_witness() -> CrossingWitness {
    let step = |early, late| CrossingCurve {
        early,
        late,
        crossover: 2,
    };
    CrossingWitness {
        oracle: CurveSet::new(vec![
            step(0.30, 0.05),
            step(0.40, 0.40),
            step(0.10, 0.30),
            step(0.20, 0.20),
        ]),
        old_arms: vec![ConfigId(0), ConfigId(1)],
        fresh_arms: vec![ConfigId(2), ConfigId(3)],
        r: 1,
        eta: 2,
        rounds: 1,
    }
}
