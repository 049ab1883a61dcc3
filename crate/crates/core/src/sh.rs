//! Successive Halving and its iterative-deepening variants.
//!
//! All variants share the level schedule `r_k = r * eta^k` for `k = 0..=s`
//! and differ only in which arms compete for the slots of the next round:
//!
//! * [`Policy::Fresh`] is classic Successive Halving on the fresh arms.
//! * [`Policy::Discarding`] merges the old arms into the start pool and
//!   reruns the halving from scratch, reading old losses from the cache. Its
//!   decisions equal a fresh run on the merged pool.
//! * [`Policy::Preserving`] behaves like `Discarding`, but every old arm that
//!   was promoted to level `r_k` in the previous run and already has a loss
//!   there re-enters the selection pool of round `k`.
//! * [`Policy::Efficient`] never revokes an old promotion: the old arms
//!   promoted into round `k` keep their slots and only the remaining slots
//!   are filled from the fresh side and the previously discarded old arms.
//!
//! Every loss is requested through the [`Evaluator`], so an evaluation is
//! charged exactly when its `(config, level)` pair was not observed before.

use std::collections::{HashMap, HashSet};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arm::{ConfigId, EvalError};
use crate::eval::{top_k, Evaluator, SelectError};

/// Inputs shared by all variants. The maximum level is `r * eta^rounds`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShInputs {
    /// Freshly sampled arms, in sampling order.
    pub fresh: Vec<ConfigId>,
    /// Base level `r`.
    pub r: u64,
    pub eta: u64,
    /// Index `s` of the last round.
    pub rounds: u32,
}

impl ShInputs {
    pub fn new(fresh: Vec<ConfigId>, r: u64, eta: u64, rounds: u32) -> Self {
        Self {
            fresh,
            r,
            eta,
            rounds,
        }
    }

    /// Level of round `k`, `None` on overflow.
    pub fn level(&self, k: u32) -> Option<u64> {
        self.eta.checked_pow(k)?.checked_mul(self.r)
    }

    /// `R = r * eta^s`.
    pub fn max_level(&self) -> Option<u64> {
        self.level(self.rounds)
    }
}

/// Promotion chain left behind by a previous run at the same levels.
///
/// `pools[k]` holds the arms that were promoted into round `k` of the old
/// run (`pools[0]` is the whole old start pool). Pools for rounds before the
/// last one must have cached losses at their level; the pool for the last
/// round may lack them, in which case the arms are evaluated when used.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct OldShState {
    pub pools: Vec<Vec<ConfigId>>,
}

impl OldShState {
    pub fn empty() -> Self {
        Self::default()
    }

    pub fn new(pools: Vec<Vec<ConfigId>>) -> Self {
        Self { pools }
    }

    /// Number of old arms, `ñ = |C_0|`.
    pub fn n_old(&self) -> usize {
        self.pools.first().map_or(0, Vec::len)
    }

    pub fn pool(&self, k: usize) -> &[ConfigId] {
        self.pools.get(k).map_or(&[], Vec::as_slice)
    }

    /// Chain recorded by a finished run: its start pool followed by the set
    /// promoted out of every round.
    pub fn from_trace(trace: &ShTrace) -> Self {
        let mut pools = Vec::with_capacity(trace.rounds.len() + 1);
        if let Some(first) = trace.rounds.first() {
            pools.push(first.entering.clone());
        }
        pools.extend(trace.rounds.iter().map(|r| r.promoted.clone()));
        Self { pools }
    }
}

/// Promotion policy of a halving run.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Policy {
    Fresh,
    Efficient,
    Preserving,
    Discarding,
}

impl Policy {
    pub fn short_name(self) -> &'static str {
        match self {
            Policy::Fresh => "sh",
            Policy::Efficient => "e",
            Policy::Preserving => "p",
            Policy::Discarding => "d",
        }
    }
}

/// One round of a halving run.
#[derive(Debug, Clone, PartialEq)]
pub struct RoundRecord {
    pub level: u64,
    /// Arms holding a slot at this level.
    pub entering: Vec<ConfigId>,
    /// Losses at this level of every arm that took part in the round.
    pub losses: Vec<(ConfigId, f64)>,
    /// Arms holding a slot in the next round; after the last round, the
    /// remaining configurations, best first.
    pub promoted: Vec<ConfigId>,
    /// Arms that took part in the round but were not promoted.
    pub discarded: Vec<ConfigId>,
    /// Resource units charged during the round.
    pub charged: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ShTrace {
    pub policy: Policy,
    pub rounds: Vec<RoundRecord>,
    pub winner: ConfigId,
}

impl ShTrace {
    /// Survivor set of round `k`; `k = s + 1` is the final remaining set.
    pub fn survivors(&self, k: usize) -> &[ConfigId] {
        if k < self.rounds.len() {
            &self.rounds[k].entering
        } else {
            &self.rounds[k - 1].promoted
        }
    }

    pub fn charged(&self) -> u64 {
        self.rounds.iter().map(|r| r.charged).sum()
    }

    /// `sum_k |survivors_k| * r_k`, the budget claimed by the slot schedule.
    pub fn slot_budget(&self) -> u64 {
        self.rounds
            .iter()
            .map(|r| r.entering.len() as u64 * r.level)
            .sum()
    }

    /// Loss of the winner at the last level.
    pub fn winner_loss(&self) -> f64 {
        let last = self.rounds.last().expect("trace has at least one round");
        last.losses
            .iter()
            .find(|(c, _)| *c == self.winner)
            .map(|&(_, l)| l)
            .expect("winner took part in the last round")
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum ShError {
    #[error("no arms to run on")]
    EmptyArms,
    #[error("eta must be at least 2, got {0}")]
    InvalidEta(u64),
    #[error("base level must be at least 1")]
    ZeroBase,
    #[error("level schedule overflows")]
    LevelOverflow,
    #[error("arm {0} appears twice")]
    DuplicateArm(ConfigId),
    #[error("fresh arm {0} is also an old arm")]
    FreshOverlapsOld(ConfigId),
    #[error("old state has {given} pools but the run has only {max} rounds")]
    TooManyPools { given: usize, max: usize },
    #[error("arm {config} of old pool {round} is not in the old start pool")]
    NotInOldPool { config: ConfigId, round: usize },
    #[error("old arm {config} has no cached loss at level {level}")]
    Misaligned { config: ConfigId, level: u64 },
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error(transparent)]
    Select(#[from] SelectError),
}

/// Classic Successive Halving on `inputs.fresh`.
pub fn run_sh(inputs: &ShInputs, ev: &mut Evaluator<'_>) -> Result<ShTrace, ShError> {
    run(Policy::Fresh, inputs, &OldShState::empty(), ev)
}

/// Efficient deepening: old promotions are never displaced.
pub fn run_eid_sh(
    inputs: &ShInputs,
    old: &OldShState,
    ev: &mut Evaluator<'_>,
) -> Result<ShTrace, ShError> {
    run(Policy::Efficient, inputs, old, ev)
}

/// Discarding deepening: old decisions are fully revisable.
pub fn run_did_sh(
    inputs: &ShInputs,
    old: &OldShState,
    ev: &mut Evaluator<'_>,
) -> Result<ShTrace, ShError> {
    run(Policy::Discarding, inputs, old, ev)
}

/// Preserving deepening: previously evaluated old arms may return.
pub fn run_pid_sh(
    inputs: &ShInputs,
    old: &OldShState,
    ev: &mut Evaluator<'_>,
) -> Result<ShTrace, ShError> {
    run(Policy::Preserving, inputs, old, ev)
}

/// Runs `policy`. [`Policy::Fresh`] ignores `old`.
pub fn run(
    policy: Policy,
    inputs: &ShInputs,
    old: &OldShState,
    ev: &mut Evaluator<'_>,
) -> Result<ShTrace, ShError> {
    let empty = OldShState::empty();
    let old = if policy == Policy::Fresh { &empty } else { old };
    let levels = validate(inputs, old, ev)?;
    match policy {
        Policy::Efficient => run_efficient(inputs, old, &levels, ev),
        _ => run_halving(policy, inputs, old, &levels, ev),
    }
}

fn validate(inputs: &ShInputs, old: &OldShState, ev: &Evaluator<'_>) -> Result<Vec<u64>, ShError> {
    if inputs.eta < 2 {
        return Err(ShError::InvalidEta(inputs.eta));
    }
    if inputs.r == 0 {
        return Err(ShError::ZeroBase);
    }
    let levels = (0..=inputs.rounds)
        .map(|k| inputs.level(k).ok_or(ShError::LevelOverflow))
        .collect::<Result<Vec<_>, _>>()?;
    // eta^(s+1) is used for the final keep count
    if inputs.eta.checked_pow(inputs.rounds + 1).is_none() {
        return Err(ShError::LevelOverflow);
    }
    if inputs.fresh.is_empty() && old.n_old() == 0 {
        return Err(ShError::EmptyArms);
    }
    if old.pools.len() > levels.len() {
        return Err(ShError::TooManyPools {
            given: old.pools.len(),
            max: levels.len(),
        });
    }
    let mut seen = HashSet::new();
    for &c in old.pool(0).iter() {
        if !seen.insert(c) {
            return Err(ShError::DuplicateArm(c));
        }
    }
    for &c in &inputs.fresh {
        if old.pool(0).contains(&c) {
            return Err(ShError::FreshOverlapsOld(c));
        }
        if !seen.insert(c) {
            return Err(ShError::DuplicateArm(c));
        }
    }
    let start: HashSet<ConfigId> = old.pool(0).iter().copied().collect();
    let last = levels.len() - 1;
    for (k, pool) in old.pools.iter().enumerate() {
        for &c in pool {
            if !start.contains(&c) {
                return Err(ShError::NotInOldPool {
                    config: c,
                    round: k,
                });
            }
            if k < last && !ev.is_cached(c, levels[k]) {
                return Err(ShError::Misaligned {
                    config: c,
                    level: levels[k],
                });
            }
        }
    }
    Ok(levels)
}

fn floor_div_pow(n: usize, eta: u64, k: u32) -> usize {
    match eta.checked_pow(k) {
        Some(p) => (n as u64 / p) as usize,
        None => 0,
    }
}

/// Evaluates `arms` at `level` and returns their losses in the given order.
fn observe(
    arms: &[ConfigId],
    level: u64,
    ev: &mut Evaluator<'_>,
) -> Result<Vec<(ConfigId, f64)>, ShError> {
    arms.iter()
        .map(|&c| Ok((c, ev.evaluate(c, level)?)))
        .collect()
}

fn push_unique(into: &mut Vec<ConfigId>, seen: &mut HashSet<ConfigId>, from: &[ConfigId]) {
    for &c in from {
        if seen.insert(c) {
            into.push(c);
        }
    }
}

fn discarded(considered: &[(ConfigId, f64)], promoted: &[ConfigId]) -> Vec<ConfigId> {
    let kept: HashSet<ConfigId> = promoted.iter().copied().collect();
    considered
        .iter()
        .map(|&(c, _)| c)
        .filter(|c| !kept.contains(c))
        .collect()
}

/// Fresh, discarding and preserving policies.
fn run_halving(
    policy: Policy,
    inputs: &ShInputs,
    old: &OldShState,
    levels: &[u64],
    ev: &mut Evaluator<'_>,
) -> Result<ShTrace, ShError> {
    let mut current: Vec<ConfigId> = old.pool(0).to_vec();
    current.extend_from_slice(&inputs.fresh);
    let n = current.len();
    let mut rounds = Vec::with_capacity(levels.len());

    for (k, &level) in levels.iter().enumerate() {
        let mut pool = current.clone();
        if policy == Policy::Preserving {
            let mut seen: HashSet<ConfigId> = pool.iter().copied().collect();
            let returning: Vec<ConfigId> = old
                .pool(k)
                .iter()
                .copied()
                .filter(|&c| ev.is_cached(c, level))
                .collect();
            push_unique(&mut pool, &mut seen, &returning);
        }
        let before = ev.ledger.total();
        let losses = observe(&pool, level, ev)?;
        let charged = ev.ledger.total() - before;
        let keep = floor_div_pow(n, inputs.eta, k as u32 + 1).max(1);
        let map: HashMap<ConfigId, f64> = losses.iter().copied().collect();
        let promoted = top_k(&pool, &map, keep)?;
        rounds.push(RoundRecord {
            level,
            entering: current,
            discarded: discarded(&losses, &promoted),
            losses,
            promoted: promoted.clone(),
            charged,
        });
        current = promoted;
    }
    Ok(ShTrace {
        policy,
        winner: current[0],
        rounds,
    })
}

fn run_efficient(
    inputs: &ShInputs,
    old: &OldShState,
    levels: &[u64],
    ev: &mut Evaluator<'_>,
) -> Result<ShTrace, ShError> {
    let eta = inputs.eta;
    let s = levels.len() - 1;
    let n_old = old.n_old();
    let n = inputs.fresh.len() + n_old;

    // carried[k]: old arms holding a slot in round k. Only floor(ñ / eta^k)
    // old promotions are accounted for; a larger old pool is cut down by its
    // losses one level below.
    let mut carried: Vec<Vec<ConfigId>> = vec![old.pool(0).to_vec()];
    for k in 1..=s {
        let cap = floor_div_pow(n_old, eta, k as u32);
        let pool = old.pool(k);
        if pool.len() <= cap {
            carried.push(pool.to_vec());
        } else {
            let below = observe(pool, levels[k - 1], ev)?;
            let map: HashMap<ConfigId, f64> = below.into_iter().collect();
            carried.push(top_k(pool, &map, cap)?);
        }
    }

    let mut selected: Vec<ConfigId> = inputs.fresh.clone();
    let mut rounds = Vec::with_capacity(levels.len());
    let mut winner = None;

    for (k, &level) in levels.iter().enumerate() {
        let mut entering = Vec::new();
        let mut seen = HashSet::new();
        push_unique(&mut entering, &mut seen, &carried[k]);
        push_unique(&mut entering, &mut seen, &selected);

        let before = ev.ledger.total();
        let losses = observe(&entering, level, ev)?;
        let map: HashMap<ConfigId, f64> = losses.iter().copied().collect();

        let promoted = if k < s {
            let next: HashSet<ConfigId> = carried[k + 1].iter().copied().collect();
            let mut pool = selected.clone();
            let mut pseen: HashSet<ConfigId> = pool.iter().copied().collect();
            let returning: Vec<ConfigId> = carried[k]
                .iter()
                .copied()
                .filter(|c| !next.contains(c))
                .collect();
            push_unique(&mut pool, &mut pseen, &returning);
            let target = floor_div_pow(n, eta, k as u32 + 1).max(1);
            let quota = target.saturating_sub(carried[k + 1].len());
            selected = top_k(&pool, &map, quota)?;
            let mut promoted = carried[k + 1].clone();
            promoted.extend_from_slice(&selected);
            promoted
        } else {
            let keep = floor_div_pow(n, eta, k as u32 + 1).max(1);
            let fin = top_k(&entering, &map, keep)?;
            winner = fin.first().copied();
            fin
        };
        let charged = ev.ledger.total() - before;
        rounds.push(RoundRecord {
            level,
            entering,
            discarded: discarded(&losses, &promoted),
            losses,
            promoted,
            charged,
        });
    }
    Ok(ShTrace {
        policy: Policy::Efficient,
        winner: winner.ok_or(ShError::EmptyArms)?,
        rounds,
    })
}
