//! Hyperband brackets, fresh runs and iterative deepening.
//!
//! A run with maximum size `R` executes the brackets `s = s_max..=0`, each a
//! Successive Halving call on `n_s` configurations starting at level
//! `r_s = R / eta^s`. Deepening multiplies `R` by `eta`: new bracket `s`
//! starts at the same level as old bracket `s - 1`, inherits that bracket's
//! configurations and promotion chain, and tops its pool up with fresh
//! configurations.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arm::{ConfigId, LossOracle};
use crate::eval::{EvaluationCache, Evaluator, PullLedger};
use crate::sampler::{ConfigStream, RngState, SampleError};
use crate::sh::{self, OldShState, Policy, ShError, ShInputs, ShTrace};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum HbError {
    #[error("eta must be at least 2, got {0}")]
    InvalidEta(u64),
    #[error("maximum size must be at least 1")]
    ZeroMaxSize,
    #[error("maximum size {max_size} is not a multiple of eta^s_max = {eta}^{s_max}")]
    UnalignedMaxSize { max_size: u64, eta: u64, s_max: u32 },
    #[error("bracket arithmetic overflows")]
    Overflow,
    #[error("run state is incomplete: {0}")]
    Incomplete(String),
    #[error("old bracket {s} has {found} configurations, expected {expected}")]
    PoolMismatch { s: u32, expected: u64, found: u64 },
    #[error("target maximum size {target} is not {current} times a power of {eta}")]
    UnreachableTarget { current: u64, target: u64, eta: u64 },
    #[error("no evaluations recorded")]
    NoEvaluations,
    #[error(transparent)]
    Sample(#[from] SampleError),
    #[error(transparent)]
    Sh(#[from] ShError),
}

/// Maximum size `R` and halving factor `eta`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct HbParams {
    max_size: u64,
    eta: u64,
    s_max: u32,
}

impl HbParams {
    /// Requires `R` to be a multiple of `eta^s_max` so every bracket starts
    /// at an integer level.
    pub fn new(max_size: u64, eta: u64) -> Result<Self, HbError> {
        if eta < 2 {
            return Err(HbError::InvalidEta(eta));
        }
        if max_size == 0 {
            return Err(HbError::ZeroMaxSize);
        }
        let mut s_max = 0u32;
        let mut p = 1u64;
        while let Some(next) = p.checked_mul(eta) {
            if next > max_size {
                break;
            }
            p = next;
            s_max += 1;
        }
        if !max_size.is_multiple_of(p) {
            return Err(HbError::UnalignedMaxSize {
                max_size,
                eta,
                s_max,
            });
        }
        // n_s for s = s_max needs (s_max + 1) * eta^s_max
        p.checked_mul(s_max as u64 + 1).ok_or(HbError::Overflow)?;
        max_size
            .checked_mul(s_max as u64 + 1)
            .ok_or(HbError::Overflow)?;
        Ok(Self {
            max_size,
            eta,
            s_max,
        })
    }

    pub fn max_size(&self) -> u64 {
        self.max_size
    }

    pub fn eta(&self) -> u64 {
        self.eta
    }

    /// `floor(log_eta R)`.
    pub fn s_max(&self) -> u32 {
        self.s_max
    }

    /// Per-bracket budget `B = (s_max + 1) * R`.
    pub fn budget(&self) -> u64 {
        (self.s_max as u64 + 1) * self.max_size
    }

    /// Start pool size `ceil((s_max + 1) * eta^s / (s + 1))`.
    pub fn n_s(&self, s: u32) -> u64 {
        let num = (self.s_max as u64 + 1) * self.eta.pow(s);
        num.div_ceil(s as u64 + 1)
    }

    /// Start level `R / eta^s`.
    pub fn r_s(&self, s: u32) -> u64 {
        self.max_size / self.eta.pow(s)
    }

    /// Size of the inherited pool of bracket `s` after a deepening to these
    /// parameters: `ceil(eta^(s-1) * s_max / s)`, and 0 for `s = 0`.
    pub fn inherited_n(&self, s: u32) -> u64 {
        if s == 0 {
            return 0;
        }
        (self.eta.pow(s - 1) * self.s_max as u64).div_ceil(s as u64)
    }

    /// Parameters after one deepening step.
    pub fn deepened(&self) -> Result<Self, HbError> {
        let r = self
            .max_size
            .checked_mul(self.eta)
            .ok_or(HbError::Overflow)?;
        Self::new(r, self.eta)
    }
}

/// Deepening mode.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum DeepenMode {
    Efficient,
    Preserving,
    Discarding,
}

impl DeepenMode {
    pub const ALL: [DeepenMode; 3] = [
        DeepenMode::Efficient,
        DeepenMode::Preserving,
        DeepenMode::Discarding,
    ];

    pub fn policy(self) -> Policy {
        match self {
            DeepenMode::Efficient => Policy::Efficient,
            DeepenMode::Preserving => Policy::Preserving,
            DeepenMode::Discarding => Policy::Discarding,
        }
    }

    pub fn letter(self) -> &'static str {
        self.policy().short_name()
    }
}

impl fmt::Display for DeepenMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.letter())
    }
}

impl FromStr for DeepenMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "e" => Ok(DeepenMode::Efficient),
            "p" => Ok(DeepenMode::Preserving),
            "d" => Ok(DeepenMode::Discarding),
            other => Err(format!(
                "unknown deepening mode {other:?}, expected e, p or d"
            )),
        }
    }
}

/// One Successive Halving iteration of a bracket.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub r_i: u64,
    pub losses: Vec<(ConfigId, f64)>,
    pub promoted: Vec<ConfigId>,
    pub discarded: Vec<ConfigId>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BracketState {
    pub s: u32,
    pub n_s: u64,
    pub r_s: u64,
    pub iterations: Vec<IterationRecord>,
}

impl BracketState {
    fn from_trace(s: u32, n_s: u64, r_s: u64, trace: &ShTrace) -> Self {
        let iterations = trace
            .rounds
            .iter()
            .map(|r| IterationRecord {
                r_i: r.level,
                losses: r.losses.clone(),
                promoted: r.promoted.clone(),
                discarded: r.discarded.clone(),
            })
            .collect();
        Self {
            s,
            n_s,
            r_s,
            iterations,
        }
    }

    pub fn is_complete(&self) -> bool {
        self.iterations.len() == self.s as usize + 1
    }

    /// Configurations holding a slot in iteration `k`; `k = s + 1` is the
    /// final remaining set.
    pub fn survivors(&self, k: usize) -> Vec<ConfigId> {
        if k == 0 {
            self.iterations
                .first()
                .map(|it| it.losses.iter().map(|&(c, _)| c).collect())
                .unwrap_or_default()
        } else {
            self.iterations
                .get(k - 1)
                .map(|it| it.promoted.clone())
                .unwrap_or_default()
        }
    }

    /// Start pool of the bracket, in candidate order.
    pub fn start_pool(&self) -> Vec<ConfigId> {
        self.survivors(0)
    }

    pub fn winner(&self) -> Option<ConfigId> {
        self.iterations.last()?.promoted.first().copied()
    }

    /// `sum_i |survivors_i| * r_i`.
    pub fn slot_budget(&self) -> u64 {
        (0..self.iterations.len())
            .map(|i| self.survivors(i).len() as u64 * self.iterations[i].r_i)
            .sum()
    }

    /// Promotion chain handed to the next deepening.
    pub fn old_pools(&self) -> OldShState {
        let mut pools = vec![self.start_pool()];
        pools.extend(self.iterations.iter().map(|it| it.promoted.clone()));
        OldShState::new(pools)
    }
}

/// Complete state of one lineage step.
#[derive(Debug, Clone, PartialEq)]
pub struct RunState {
    /// Number of deepenings since the fresh run.
    pub t: u32,
    pub params: HbParams,
    /// Brackets in execution order, `s = s_max` first.
    pub brackets: Vec<BracketState>,
    pub cache: EvaluationCache,
    pub rng: RngState,
    /// Cumulative over the whole lineage.
    pub ledger: PullLedger,
    pub next_config_id: u64,
    /// Ledger length when the step producing this state began.
    pub phase_start: usize,
    /// Free-form benchmark descriptor carried through deepenings.
    pub benchmark: Option<String>,
}

/// Best configuration of a run.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Incumbent {
    pub config: ConfigId,
    pub loss: f64,
    pub bracket: u32,
    pub level: u64,
}

impl RunState {
    pub fn bracket(&self, s: u32) -> Option<&BracketState> {
        self.brackets.iter().find(|b| b.s == s)
    }

    pub fn is_complete(&self) -> bool {
        self.brackets.len() == self.params.s_max() as usize + 1
            && (0..=self.params.s_max()).all(|s| self.bracket(s).is_some_and(|b| b.is_complete()))
    }

    /// Units charged by the step that produced this state.
    pub fn phase_budget(&self) -> u64 {
        self.ledger.total_since(self.phase_start)
    }

    /// Units charged over the whole lineage.
    pub fn lineage_budget(&self) -> u64 {
        self.ledger.total()
    }

    /// Distinct `(config, level)` pairs used by this step's brackets that
    /// were paid for by an earlier step.
    pub fn reused_evals(&self) -> usize {
        let earlier: HashSet<(ConfigId, u64)> = self.ledger.entries()[..self.phase_start]
            .iter()
            .copied()
            .collect();
        let mut used = HashSet::new();
        for b in &self.brackets {
            for it in &b.iterations {
                for &(c, _) in &it.losses {
                    used.insert((c, it.r_i));
                }
            }
        }
        used.intersection(&earlier).count()
    }

    /// Start pools of all brackets in execution order. Feeding these to a
    /// fresh run at the same parameters reproduces the candidate sets.
    pub fn replay_ids(&self) -> Vec<ConfigId> {
        self.brackets.iter().flat_map(|b| b.start_pool()).collect()
    }

    pub fn winners(&self) -> Vec<(u32, ConfigId)> {
        self.brackets
            .iter()
            .filter_map(|b| b.winner().map(|w| (b.s, w)))
            .collect()
    }
}

/// Fresh Hyperband run.
pub fn run_hb(
    params: HbParams,
    sampler: &mut ConfigStream,
    oracle: &dyn LossOracle,
) -> Result<RunState, HbError> {
    let mut cache = EvaluationCache::new();
    let mut ledger = PullLedger::new();
    let mut brackets = Vec::new();
    for s in (0..=params.s_max()).rev() {
        let n = params.n_s(s);
        let r = params.r_s(s);
        let fresh = sampler.take(n as usize)?;
        let mut ev = Evaluator::new(oracle, &mut cache, &mut ledger);
        let trace = sh::run_sh(&ShInputs::new(fresh, r, params.eta(), s), &mut ev)?;
        brackets.push(BracketState::from_trace(s, n, r, &trace));
    }
    Ok(RunState {
        t: 0,
        params,
        brackets,
        cache,
        rng: sampler.state(),
        ledger,
        next_config_id: sampler.position(),
        phase_start: 0,
        benchmark: None,
    })
}

/// One deepening step `R -> eta * R`, continuing the configuration stream
/// recorded in `prev`.
pub fn deepen(
    prev: &RunState,
    mode: DeepenMode,
    oracle: &dyn LossOracle,
) -> Result<RunState, HbError> {
    if !prev.is_complete() {
        return Err(HbError::Incomplete(format!(
            "expected {} finished brackets",
            prev.params.s_max() + 1
        )));
    }
    let params = prev.params.deepened()?;
    debug_assert_eq!(params.s_max(), prev.params.s_max() + 1);
    let mut sampler = ConfigStream::from_state(&prev.rng)?.with_capacity(oracle.capacity());
    let mut cache = prev.cache.clone();
    let mut ledger = prev.ledger.clone();
    let phase_start = ledger.len();
    let mut brackets = Vec::new();

    for s in (0..=params.s_max()).rev() {
        let n = params.n_s(s);
        let r = params.r_s(s);
        let inherited = params.inherited_n(s);
        let old = if s == 0 {
            OldShState::empty()
        } else {
            let ob = prev
                .bracket(s - 1)
                .ok_or_else(|| HbError::Incomplete(format!("missing bracket {}", s - 1)))?;
            let found = ob.start_pool().len() as u64;
            if ob.n_s != inherited || found != inherited {
                return Err(HbError::PoolMismatch {
                    s: s - 1,
                    expected: inherited,
                    found,
                });
            }
            if ob.r_s != r {
                return Err(HbError::Incomplete(format!(
                    "old bracket {} starts at level {}, expected {r}",
                    s - 1,
                    ob.r_s
                )));
            }
            ob.old_pools()
        };
        let fresh = sampler.take((n - inherited) as usize)?;
        let inputs = ShInputs::new(fresh, r, params.eta(), s);
        let mut ev = Evaluator::new(oracle, &mut cache, &mut ledger);
        let policy = if s == 0 { Policy::Fresh } else { mode.policy() };
        let trace = sh::run(policy, &inputs, &old, &mut ev)?;
        brackets.push(BracketState::from_trace(s, n, r, &trace));
    }
    Ok(RunState {
        t: prev.t + 1,
        params,
        brackets,
        cache,
        rng: sampler.state(),
        ledger,
        next_config_id: sampler.position(),
        phase_start,
        benchmark: prev.benchmark.clone(),
    })
}

/// Repeated deepening until the maximum size reaches `target`.
pub fn deepen_to(
    prev: &RunState,
    target: u64,
    mode: DeepenMode,
    oracle: &dyn LossOracle,
) -> Result<RunState, HbError> {
    let current = prev.params.max_size();
    let eta = prev.params.eta();
    let unreachable = HbError::UnreachableTarget {
        current,
        target,
        eta,
    };
    if target <= current || !target.is_multiple_of(current) {
        return Err(unreachable);
    }
    let mut factor = target / current;
    let mut steps = 0;
    while factor > 1 {
        if !factor.is_multiple_of(eta) {
            return Err(unreachable);
        }
        factor /= eta;
        steps += 1;
    }
    let mut state = deepen(prev, mode, oracle)?;
    for _ in 1..steps {
        state = deepen(&state, mode, oracle)?;
    }
    Ok(state)
}

/// Configuration with the smallest loss at its highest recorded level.
pub fn incumbent(state: &RunState) -> Result<Incumbent, HbError> {
    // config -> (level, loss, bracket)
    let mut best_level: BTreeMap<ConfigId, (u64, f64, u32)> = BTreeMap::new();
    for b in &state.brackets {
        for it in &b.iterations {
            for &(c, loss) in &it.losses {
                let e = best_level.entry(c).or_insert((it.r_i, loss, b.s));
                if it.r_i > e.0 {
                    *e = (it.r_i, loss, b.s);
                }
            }
        }
    }
    best_level
        .into_iter()
        .min_by(|a, b| a.1 .1.total_cmp(&b.1 .1).then(a.0.cmp(&b.0)))
        .map(|(config, (level, loss, bracket))| Incumbent {
            config,
            loss,
            bracket,
            level,
        })
        .ok_or(HbError::NoEvaluations)
}

/// Old promotions missing from the new promoted sets of an efficient
/// deepening, as `(s, i, config)`.
///
/// Only promotions covered by the inherited quota `floor(ñ / eta^(i+1))` are
/// audited; a final-round winner kept only because a run must return an arm
/// is not protected.
pub fn efficient_promotion_violations(
    prev: &RunState,
    next: &RunState,
) -> Vec<(u32, usize, ConfigId)> {
    let eta = next.params.eta();
    let mut out = Vec::new();
    for nb in &next.brackets {
        if nb.s == 0 {
            continue;
        }
        let Some(ob) = prev.bracket(nb.s - 1) else {
            continue;
        };
        let n_old = ob.start_pool().len() as u64;
        for (i, oit) in ob.iterations.iter().enumerate() {
            let quota = eta.checked_pow(i as u32 + 1).map_or(0, |p| n_old / p);
            if oit.promoted.len() as u64 > quota {
                continue;
            }
            let new: HashSet<ConfigId> = nb
                .iterations
                .get(i)
                .map(|it| it.promoted.iter().copied().collect())
                .unwrap_or_default();
            out.extend(
                oit.promoted
                    .iter()
                    .filter(|c| !new.contains(c))
                    .map(|&c| (nb.s, i, c)),
            );
        }
    }
    out
}

/// Brackets whose slot budget exceeds `B`, as `(s, slot_budget)`.
pub fn budget_cap_violations(state: &RunState) -> Vec<(u32, u64)> {
    let b = state.params.budget();
    state
        .brackets
        .iter()
        .map(|br| (br.s, br.slot_budget()))
        .filter(|&(_, used)| used > b)
        .collect()
}

/// Cached loss lookup by config for a state's bracket records.
pub fn recorded_losses(state: &RunState) -> HashMap<(ConfigId, u64), f64> {
    let mut m = HashMap::new();
    for b in &state.brackets {
        for it in &b.iterations {
            for &(c, l) in &it.losses {
                m.insert((c, it.r_i), l);
            }
        }
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm::EvalError;

    /// Pseudo-random limit per id plus a `1 / level` term.
    struct Toy;
    impl LossOracle for Toy {
        fn loss(&self, c: ConfigId, level: u64) -> Result<f64, EvalError> {
            let x = ((c.0 * 7919) % 101) as f64 / 101.0;
            Ok(x + 1.0 / level as f64)
        }
    }

    fn ceil_div(a: u64, b: u64) -> u64 {
        a.div_ceil(b)
    }

    #[test]
    fn bracket_table_r16() {
        let p = HbParams::new(16, 2).unwrap();
        assert_eq!(p.s_max(), 4);
        assert_eq!(p.budget(), 80);
        let got: Vec<_> = (0..=4).rev().map(|s| (p.n_s(s), p.r_s(s))).collect();
        assert_eq!(got, vec![(16, 1), (10, 2), (7, 4), (5, 8), (5, 16)]);
        // independent arithmetic: 5 * 2^s / (s + 1) rounded up
        for s in 0..=4u32 {
            assert_eq!(p.n_s(s), ceil_div(5 * (1 << s), s as u64 + 1));
        }
    }

    #[test]
    fn bracket_tables_other_sizes() {
        let p = HbParams::new(1, 2).unwrap();
        assert_eq!((p.s_max(), p.n_s(0), p.r_s(0), p.budget()), (0, 1, 1, 1));
        let p = HbParams::new(32, 2).unwrap();
        let n: Vec<_> = (0..=5).rev().map(|s| p.n_s(s)).collect();
        let r: Vec<_> = (0..=5).rev().map(|s| p.r_s(s)).collect();
        assert_eq!(n, vec![32, 20, 12, 8, 6, 6]);
        assert_eq!(r, vec![1, 2, 4, 8, 16, 32]);
        let inh: Vec<_> = (0..=5).rev().map(|s| p.inherited_n(s)).collect();
        assert_eq!(inh, vec![16, 10, 7, 5, 5, 0]);
        let p = HbParams::new(27, 3).unwrap();
        assert_eq!((p.s_max(), p.budget()), (3, 108));
        let n: Vec<_> = (0..=3).rev().map(|s| p.n_s(s)).collect();
        assert_eq!(n, vec![27, 12, 6, 4]);
        let old = HbParams::new(9, 3).unwrap();
        for s in 1..=3 {
            assert_eq!(p.inherited_n(s), old.n_s(s - 1));
        }
    }

    #[test]
    fn params_validation() {
        assert_eq!(HbParams::new(16, 1), Err(HbError::InvalidEta(1)));
        assert_eq!(HbParams::new(0, 2), Err(HbError::ZeroMaxSize));
        assert!(matches!(
            HbParams::new(20, 2),
            Err(HbError::UnalignedMaxSize { .. })
        ));
        assert!(HbParams::new(18, 3).is_ok());
    }

    #[test]
    fn fresh_run_layout() {
        let p = HbParams::new(16, 2).unwrap();
        let st = run_hb(p, &mut ConfigStream::new(3), &Toy).unwrap();
        assert!(st.is_complete());
        assert_eq!(st.next_config_id, 16 + 10 + 7 + 5 + 5);
        assert_eq!(st.brackets[0].start_pool()[0], ConfigId(0));
        assert!(budget_cap_violations(&st).is_empty());
        for b in &st.brackets {
            for it in &b.iterations {
                let d: HashSet<_> = it.discarded.iter().collect();
                assert!(it.promoted.iter().all(|c| !d.contains(c)));
            }
        }
        assert!(incumbent(&st).is_ok());
    }

    #[test]
    fn deepen_layout_and_reuse() {
        let p = HbParams::new(16, 2).unwrap();
        let st = run_hb(p, &mut ConfigStream::new(3), &Toy).unwrap();
        for mode in DeepenMode::ALL {
            let d = deepen(&st, mode, &Toy).unwrap();
            assert_eq!(d.params.max_size(), 32);
            assert_eq!(d.t, 1);
            let fresh = d.next_config_id - st.next_config_id;
            assert_eq!(fresh, 16 + 10 + 5 + 3 + 1 + 6);
            assert!(budget_cap_violations(&d).is_empty(), "{mode}");
            assert!(d.reused_evals() > 0);
            assert!(
                d.phase_budget()
                    < run_hb(d.params, &mut ConfigStream::new(3), &Toy)
                        .unwrap()
                        .lineage_budget()
            );
            if mode == DeepenMode::Efficient {
                assert!(efficient_promotion_violations(&st, &d).is_empty());
            }
        }
    }

    #[test]
    fn discarding_matches_replayed_fresh_run() {
        let p = HbParams::new(16, 2).unwrap();
        let st = run_hb(p, &mut ConfigStream::new(3), &Toy).unwrap();
        let d = deepen(&st, DeepenMode::Discarding, &Toy).unwrap();
        let mut replay = ConfigStream::new(3).with_replay(d.replay_ids());
        let ih = run_hb(d.params, &mut replay, &Toy).unwrap();
        assert_eq!(incumbent(&d).unwrap(), incumbent(&ih).unwrap());
        for (a, b) in d.brackets.iter().zip(&ih.brackets) {
            for k in 0..=a.s as usize + 1 {
                assert_eq!(a.survivors(k), b.survivors(k));
            }
        }
        let cached: u64 = st.ledger.total();
        assert!(d.phase_budget() + cached >= ih.lineage_budget());
    }

    #[test]
    fn deepen_to_rejects_non_powers() {
        let p = HbParams::new(16, 2).unwrap();
        let st = run_hb(p, &mut ConfigStream::new(3), &Toy).unwrap();
        assert!(matches!(
            deepen_to(&st, 48, DeepenMode::Efficient, &Toy),
            Err(HbError::UnreachableTarget { .. })
        ));
        let d = deepen_to(&st, 64, DeepenMode::Efficient, &Toy).unwrap();
        assert_eq!((d.t, d.params.max_size()), (2, 64));
    }

    #[test]
    fn incumbent_ties_and_levels() {
        let mk = |iters: Vec<IterationRecord>| RunState {
            t: 0,
            params: HbParams::new(2, 2).unwrap(),
            brackets: vec![BracketState {
                s: 1,
                n_s: 3,
                r_s: 1,
                iterations: iters,
            }],
            cache: EvaluationCache::new(),
            rng: ConfigStream::new(0).state(),
            ledger: PullLedger::new(),
            next_config_id: 0,
            phase_start: 0,
            benchmark: None,
        };
        let it = |r_i, losses: Vec<(u64, f64)>| IterationRecord {
            r_i,
            losses: losses.into_iter().map(|(c, l)| (ConfigId(c), l)).collect(),
            promoted: vec![],
            discarded: vec![],
        };
        let st = mk(vec![it(1, vec![(0, 0.3)])]);
        let inc = incumbent(&st).unwrap();
        assert_eq!((inc.config, inc.loss), (ConfigId(0), 0.3));
        // arm 2 had 0.05 at level 1 but 0.2 at level 2; arm 1 only 0.1 at level 1
        let st = mk(vec![
            it(1, vec![(1, 0.1), (2, 0.05), (3, 0.1)]),
            it(2, vec![(2, 0.2)]),
        ]);
        let inc = incumbent(&st).unwrap();
        assert_eq!((inc.config, inc.level), (ConfigId(1), 1));
        assert_eq!(incumbent(&mk(vec![])), Err(HbError::NoEvaluations));
    }

    #[test]
    fn deepen_rejects_incomplete_state() {
        let p = HbParams::new(4, 2).unwrap();
        let mut st = run_hb(p, &mut ConfigStream::new(1), &Toy).unwrap();
        st.brackets.pop();
        assert!(matches!(
            deepen(&st, DeepenMode::Discarding, &Toy),
            Err(HbError::Incomplete(_))
        ));
    }
}
