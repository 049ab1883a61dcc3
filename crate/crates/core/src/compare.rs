//! Multi-seed comparison of deepening against restarting.
//!
//! For every seed a fresh run at `R0` is deepened once with each requested
//! mode, and the restart baseline `ih` runs Hyperband from scratch at
//! `eta * R0`. With replay on, the baseline draws the same configurations as
//! the deepened runs (old ones first, then the fresh ones), so rows of one
//! seed are paired.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;
use std::sync::Arc;

use rayon::prelude::*;
use thiserror::Error;

use crate::arm::LossOracle;
use crate::bench::{BenchError, BenchmarkSource};
use crate::hyperband::{deepen, incumbent, run_hb, DeepenMode, HbError, HbParams, RunState};
use crate::sampler::ConfigStream;

pub const CSV_HEADER: &str = "seed,mode,incumbent_loss,budget_deepen,budget_lineage,reused_evals";

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum CompareMode {
    /// Restart from scratch at the larger maximum size.
    Restart,
    Deepen(DeepenMode),
}

impl From<DeepenMode> for CompareMode {
    fn from(m: DeepenMode) -> Self {
        CompareMode::Deepen(m)
    }
}

impl CompareMode {
    pub fn all() -> Vec<CompareMode> {
        std::iter::once(CompareMode::Restart)
            .chain(DeepenMode::ALL.iter().map(|&m| m.into()))
            .collect()
    }
}

impl fmt::Display for CompareMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CompareMode::Restart => f.write_str("ih"),
            CompareMode::Deepen(m) => write!(f, "{m}"),
        }
    }
}

impl FromStr for CompareMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        if s == "ih" {
            return Ok(CompareMode::Restart);
        }
        s.parse::<DeepenMode>()
            .map(Into::into)
            .map_err(|_| format!("unknown mode {s:?}, expected ih, e, p or d"))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CompareConfig {
    pub source: BenchmarkSource,
    pub r0: u64,
    pub eta: u64,
    pub seeds: Vec<u64>,
    pub modes: Vec<CompareMode>,
    pub replay: bool,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ComparisonRow {
    pub seed: u64,
    pub mode: CompareMode,
    pub incumbent_loss: f64,
    /// Units charged by the deepening step, or by the whole restart run.
    pub budget_deepen: u64,
    /// Units charged since the fresh run at `R0`, inclusive.
    pub budget_lineage: u64,
    pub reused_evals: usize,
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum CompareError {
    #[error("seed {0} appears twice")]
    DuplicateSeed(u64),
    #[error("mode {0} appears twice")]
    DuplicateMode(String),
    #[error(transparent)]
    Bench(#[from] BenchError),
    #[error("seed {seed}: {source}")]
    Run { seed: u64, source: HbError },
}

/// Fresh run at `R0` for one seed.
pub fn base_run(
    source: &BenchmarkSource,
    params: HbParams,
    seed: u64,
) -> Result<(RunState, Arc<dyn LossOracle>), CompareError> {
    let oracle = source.build(seed)?;
    let mut stream = ConfigStream::new(seed).with_capacity(oracle.capacity());
    let mut state = run_hb(params, &mut stream, oracle.as_ref())
        .map_err(|e| CompareError::Run { seed, source: e })?;
    state.benchmark = Some(source.to_string());
    Ok((state, oracle))
}

/// Restart baseline at `eta * R` after `base`. With `replay`, the
/// configurations of `reference` (any deepening of `base`) are drawn first.
pub fn restart_run(
    base: &RunState,
    reference: Option<&RunState>,
    oracle: &dyn LossOracle,
) -> Result<RunState, HbError> {
    let params = base.params.deepened()?;
    let mut stream = match reference {
        Some(r) => ConfigStream::from_state(&r.rng)?.with_replay(r.replay_ids()),
        None => ConfigStream::from_state(&base.rng)?,
    }
    .with_capacity(oracle.capacity());
    run_hb(params, &mut stream, oracle)
}

fn rows_for_seed(
    cfg: &CompareConfig,
    params: HbParams,
    seed: u64,
) -> Result<Vec<ComparisonRow>, CompareError> {
    let run_err = |e| CompareError::Run { seed, source: e };
    let (base, oracle) = base_run(&cfg.source, params, seed)?;
    let mut rows = Vec::new();
    let mut reference = None;
    for &mode in &cfg.modes {
        let CompareMode::Deepen(m) = mode else {
            continue;
        };
        let st = deepen(&base, m, oracle.as_ref()).map_err(run_err)?;
        rows.push(ComparisonRow {
            seed,
            mode,
            incumbent_loss: incumbent(&st).map_err(run_err)?.loss,
            budget_deepen: st.phase_budget(),
            budget_lineage: st.lineage_budget(),
            reused_evals: st.reused_evals(),
        });
        reference.get_or_insert(st);
    }
    if cfg.modes.contains(&CompareMode::Restart) {
        let reference = match (cfg.replay, reference) {
            (false, _) => None,
            (true, Some(r)) => Some(r),
            (true, None) => {
                Some(deepen(&base, DeepenMode::Discarding, oracle.as_ref()).map_err(run_err)?)
            }
        };
        let ih = restart_run(&base, reference.as_ref(), oracle.as_ref()).map_err(run_err)?;
        rows.push(ComparisonRow {
            seed,
            mode: CompareMode::Restart,
            incumbent_loss: incumbent(&ih).map_err(run_err)?.loss,
            budget_deepen: ih.lineage_budget(),
            budget_lineage: base.lineage_budget() + ih.lineage_budget(),
            reused_evals: 0,
        });
    }
    Ok(rows)
}

/// Runs all seeds in parallel; rows are ordered by `(seed, mode)`.
pub fn compare(cfg: &CompareConfig) -> Result<Vec<ComparisonRow>, CompareError> {
    let mut seen = HashSet::new();
    for &s in &cfg.seeds {
        if !seen.insert(s) {
            return Err(CompareError::DuplicateSeed(s));
        }
    }
    let mut modes = HashSet::new();
    for m in &cfg.modes {
        if !modes.insert(*m) {
            return Err(CompareError::DuplicateMode(m.to_string()));
        }
    }
    let params = HbParams::new(cfg.r0, cfg.eta).map_err(|e| CompareError::Run {
        seed: cfg.seeds.first().copied().unwrap_or(0),
        source: e,
    })?;
    let per_seed: Vec<Vec<ComparisonRow>> = cfg
        .seeds
        .par_iter()
        .map(|&seed| rows_for_seed(cfg, params, seed))
        .collect::<Result<_, _>>()?;
    let mut rows: Vec<ComparisonRow> = per_seed.into_iter().flatten().collect();
    rows.sort_by(|a, b| a.seed.cmp(&b.seed).then(a.mode.cmp(&b.mode)));
    Ok(rows)
}

pub fn render_csv(rows: &[ComparisonRow]) -> String {
    let mut out = String::from(CSV_HEADER);
    out.push('\n');
    for r in rows {
        out.push_str(&format!(
            "{},{},{},{},{},{}\n",
            r.seed, r.mode, r.incumbent_loss, r.budget_deepen, r.budget_lineage, r.reused_evals
        ));
    }
    out
}

/// Per-mode means against the restart baseline of the same seed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ModeSummary {
    pub mode: CompareMode,
    pub seeds: usize,
    /// Mean of `|incumbent(mode) - incumbent(ih)|`.
    pub mean_incumbent_gap: f64,
    /// Mean of `budget_deepen(mode) / budget_deepen(ih)`.
    pub mean_budget_ratio: f64,
    pub max_budget_ratio: f64,
    pub mean_reused: f64,
}

/// Summaries for every non-baseline mode; empty without `ih` rows.
pub fn summarize(rows: &[ComparisonRow]) -> Vec<ModeSummary> {
    let baseline: HashMap<u64, &ComparisonRow> = rows
        .iter()
        .filter(|r| r.mode == CompareMode::Restart)
        .map(|r| (r.seed, r))
        .collect();
    let mut modes: Vec<CompareMode> = rows
        .iter()
        .map(|r| r.mode)
        .filter(|m| *m != CompareMode::Restart)
        .collect();
    modes.sort();
    modes.dedup();
    modes
        .into_iter()
        .filter_map(|mode| {
            let paired: Vec<(&ComparisonRow, &ComparisonRow)> = rows
                .iter()
                .filter(|r| r.mode == mode)
                .filter_map(|r| baseline.get(&r.seed).map(|b| (r, *b)))
                .collect();
            if paired.is_empty() {
                return None;
            }
            let k = paired.len() as f64;
            let ratios: Vec<f64> = paired
                .iter()
                .map(|(r, b)| r.budget_deepen as f64 / b.budget_deepen as f64)
                .collect();
            Some(ModeSummary {
                mode,
                seeds: paired.len(),
                mean_incumbent_gap: paired
                    .iter()
                    .map(|(r, b)| (r.incumbent_loss - b.incumbent_loss).abs())
                    .sum::<f64>()
                    / k,
                mean_budget_ratio: ratios.iter().sum::<f64>() / k,
                max_budget_ratio: ratios.iter().copied().fold(0.0, f64::max),
                mean_reused: paired
                    .iter()
                    .map(|(r, _)| r.reused_evals as f64)
                    .sum::<f64>()
                    / k,
            })
        })
        .collect()
}
