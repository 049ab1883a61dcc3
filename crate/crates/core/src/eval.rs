//! Cached evaluation, pull accounting and top-k selection.

use std::collections::{BTreeMap, HashMap};

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::arm::{ConfigId, EvalError, LossOracle};

/// Losses already observed, keyed by `(config, level)`.
///
/// A key is bound at most once; the oracle is deterministic, so a second
/// binding would carry the same value anyway.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct EvaluationCache {
    map: BTreeMap<(ConfigId, u64), f64>,
}

impl EvaluationCache {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn get(&self, config: ConfigId, level: u64) -> Option<f64> {
        self.map.get(&(config, level)).copied()
    }

    pub fn contains(&self, config: ConfigId, level: u64) -> bool {
        self.map.contains_key(&(config, level))
    }

    /// Binds `(config, level)`. Returns `false` if the key already held a
    /// different value, leaving the original binding in place.
    pub fn insert(&mut self, config: ConfigId, level: u64, loss: f64) -> bool {
        match self.map.get(&(config, level)) {
            Some(&old) => old.to_bits() == loss.to_bits(),
            None => {
                self.map.insert((config, level), loss);
                true
            }
        }
    }

    pub fn len(&self) -> usize {
        self.map.len()
    }

    pub fn is_empty(&self) -> bool {
        self.map.is_empty()
    }

    /// Entries in `(config, level)` order.
    pub fn iter(&self) -> impl Iterator<Item = (ConfigId, u64, f64)> + '_ {
        self.map.iter().map(|(&(c, l), &v)| (c, l, v))
    }
}

/// Append-only record of every charged evaluation.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct PullLedger {
    entries: Vec<(ConfigId, u64)>,
    total: u64,
}

impl PullLedger {
    pub fn new() -> Self {
        Self::default()
    }

    /// Rebuilds a ledger from its entries, recomputing the total.
    pub fn from_entries(entries: Vec<(ConfigId, u64)>) -> Self {
        let total = entries.iter().map(|&(_, l)| l).sum();
        Self { entries, total }
    }

    pub fn charge(&mut self, config: ConfigId, level: u64) {
        self.entries.push((config, level));
        self.total += level;
    }

    pub fn total(&self) -> u64 {
        self.total
    }

    pub fn entries(&self) -> &[(ConfigId, u64)] {
        &self.entries
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Sum of levels charged from entry `start` onwards.
    pub fn total_since(&self, start: usize) -> u64 {
        self.entries[start.min(self.entries.len())..]
            .iter()
            .map(|&(_, l)| l)
            .sum()
    }
}

/// Borrowed (oracle, cache, ledger) triple belonging to one run.
pub struct Evaluator<'a> {
    pub oracle: &'a dyn LossOracle,
    pub cache: &'a mut EvaluationCache,
    pub ledger: &'a mut PullLedger,
}

impl<'a> Evaluator<'a> {
    pub fn new(
        oracle: &'a dyn LossOracle,
        cache: &'a mut EvaluationCache,
        ledger: &'a mut PullLedger,
    ) -> Self {
        Self {
            oracle,
            cache,
            ledger,
        }
    }

    /// See [`evaluate`].
    pub fn evaluate(&mut self, config: ConfigId, level: u64) -> Result<f64, EvalError> {
        evaluate(config, level, self.oracle, self.cache, self.ledger)
    }

    pub fn is_cached(&self, config: ConfigId, level: u64) -> bool {
        self.cache.contains(config, level)
    }
}

/// Loss of `config` at `level`.
///
/// A cache hit is free. A miss queries the oracle, charges `level` units to
/// the ledger and caches the result.
pub fn evaluate(
    config: ConfigId,
    level: u64,
    oracle: &dyn LossOracle,
    cache: &mut EvaluationCache,
    ledger: &mut PullLedger,
) -> Result<f64, EvalError> {
    if level == 0 {
        return Err(EvalError::ZeroLevel(level));
    }
    if let Some(v) = cache.get(config, level) {
        return Ok(v);
    }
    let v = oracle.loss(config, level)?;
    if !v.is_finite() {
        return Err(EvalError::NonFinite { config, level });
    }
    cache.insert(config, level, v);
    ledger.charge(config, level);
    Ok(v)
}

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SelectError {
    #[error("no loss recorded for candidate {0}")]
    MissingLoss(ConfigId),
}

/// The `k` candidates with the smallest loss, sorted by (loss, id).
///
/// Ties are broken by the smaller id. Losses are compared exactly.
pub fn top_k(
    candidates: &[ConfigId],
    losses: &HashMap<ConfigId, f64>,
    k: usize,
) -> Result<Vec<ConfigId>, SelectError> {
    let mut ranked = Vec::with_capacity(candidates.len());
    for &c in candidates {
        let l = *losses.get(&c).ok_or(SelectError::MissingLoss(c))?;
        ranked.push((l, c));
    }
    ranked.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
    ranked.dedup_by_key(|e| e.1);
    Ok(ranked.into_iter().take(k).map(|(_, c)| c).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::arm::LossCurve;
    use proptest::prelude::*;

    struct Curves(Vec<Box<dyn Fn(u64) -> f64 + Send + Sync>>);

    impl LossOracle for Curves {
        fn loss(&self, config: ConfigId, level: u64) -> Result<f64, EvalError> {
            self.0
                .get(config.0 as usize)
                .map(|f| f(level))
                .ok_or(EvalError::UnknownConfig(config))
        }
    }

    struct Hyperbolic;
    impl LossCurve for Hyperbolic {
        fn loss(&self, t: u64) -> f64 {
            0.5 + 1.0 / t as f64
        }
        fn limit(&self) -> f64 {
            0.5
        }
    }

    fn oracle() -> Curves {
        Curves(vec![Box::new(|t| Hyperbolic.loss(t)), Box::new(|_| 0.2)])
    }

    #[test]
    fn evaluate_charges_once() {
        let o = oracle();
        let mut cache = EvaluationCache::new();
        let mut ledger = PullLedger::new();
        let v = evaluate(ConfigId(0), 4, &o, &mut cache, &mut ledger).unwrap();
        assert_eq!(v, 0.75);
        assert_eq!(ledger.total(), 4);
        let v = evaluate(ConfigId(0), 4, &o, &mut cache, &mut ledger).unwrap();
        assert_eq!(v, 0.75);
        assert_eq!(ledger.total(), 4);
        assert_eq!(ledger.len(), 1);

        let v = evaluate(ConfigId(1), 16, &o, &mut cache, &mut ledger).unwrap();
        assert_eq!(v, 0.2);
        assert_eq!(ledger.total(), 20);
    }

    #[test]
    fn evaluate_errors() {
        let o = oracle();
        let mut cache = EvaluationCache::new();
        let mut ledger = PullLedger::new();
        assert_eq!(
            evaluate(ConfigId(9), 1, &o, &mut cache, &mut ledger),
            Err(EvalError::UnknownConfig(ConfigId(9)))
        );
        assert_eq!(
            evaluate(ConfigId(0), 0, &o, &mut cache, &mut ledger),
            Err(EvalError::ZeroLevel(0))
        );
        assert!(ledger.is_empty());
        assert!(cache.is_empty());
    }

    #[test]
    fn cache_never_rebinds() {
        let mut cache = EvaluationCache::new();
        assert!(cache.insert(ConfigId(1), 2, 0.5));
        assert!(cache.insert(ConfigId(1), 2, 0.5));
        assert!(!cache.insert(ConfigId(1), 2, 0.25));
        assert_eq!(cache.get(ConfigId(1), 2), Some(0.5));
    }

    fn losses(pairs: &[(u64, f64)]) -> HashMap<ConfigId, f64> {
        pairs.iter().map(|&(c, l)| (ConfigId(c), l)).collect()
    }

    #[test]
    fn top_k_examples() {
        // a=0, b=1, c=2
        let l = losses(&[(0, 0.3), (1, 0.1), (2, 0.2)]);
        let ids = [ConfigId(0), ConfigId(1), ConfigId(2)];
        assert_eq!(top_k(&ids, &l, 2).unwrap(), vec![ConfigId(1), ConfigId(2)]);
        assert!(top_k(&ids, &l, 0).unwrap().is_empty());
        assert_eq!(top_k(&ids, &l, 10).unwrap().len(), 3);

        let l = losses(&[(1, 0.1), (2, 0.1)]);
        assert_eq!(
            top_k(&[ConfigId(2), ConfigId(1)], &l, 1).unwrap(),
            vec![ConfigId(1)]
        );
        assert_eq!(
            top_k(&[ConfigId(5)], &l, 1),
            Err(SelectError::MissingLoss(ConfigId(5)))
        );
    }

    /// Exhaustive oracle: a candidate is selected iff fewer than `k` others
    /// beat it under the (loss, id) order.
    fn brute_top_k(c: &[ConfigId], l: &HashMap<ConfigId, f64>, k: usize) -> Vec<ConfigId> {
        let beats = |a: ConfigId, b: ConfigId| l[&a] < l[&b] || (l[&a] == l[&b] && a < b);
        let mut out: Vec<ConfigId> = c
            .iter()
            .copied()
            .filter(|&x| c.iter().filter(|&&y| beats(y, x)).count() < k)
            .collect();
        out.sort_by(|a, b| l[a].total_cmp(&l[b]).then(a.cmp(b)));
        out
    }

    fn arb_instance() -> impl Strategy<Value = (Vec<ConfigId>, HashMap<ConfigId, f64>, usize)> {
        (1usize..24, 0usize..30).prop_flat_map(|(n, k)| {
            // few distinct loss values so ties are common
            prop::collection::vec(0u8..6, n).prop_map(move |vals| {
                let ids: Vec<ConfigId> = (0..n as u64).rev().map(ConfigId).collect();
                let l = ids
                    .iter()
                    .zip(&vals)
                    .map(|(&c, &v)| (c, v as f64 / 8.0))
                    .collect();
                (ids, l, k)
            })
        })
    }

    proptest! {
        #[test]
        fn top_k_matches_brute_force((ids, l, k) in arb_instance()) {
            let got = top_k(&ids, &l, k).unwrap();
            prop_assert_eq!(got.len(), k.min(ids.len()));
            prop_assert_eq!(got, brute_top_k(&ids, &l, k));
        }

        #[test]
        fn top_k_is_idempotent((ids, l, k) in arb_instance()) {
            let once = top_k(&ids, &l, k).unwrap();
            let twice = top_k(&once, &l, k).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn top_k_is_a_monotone_filter((ids, l, k) in arb_instance()) {
            let sel = top_k(&ids, &l, k).unwrap();
            for s in &sel {
                for o in ids.iter().filter(|o| !sel.contains(o)) {
                    prop_assert!(l[s] < l[o] || (l[s] == l[o] && s < o));
                }
            }
        }

        #[test]
        fn ledger_conservation(calls in prop::collection::vec((0u64..2, 1u64..20), 0..60)) {
            let o = oracle();
            let mut cache = EvaluationCache::new();
            let mut ledger = PullLedger::new();
            let mut distinct = std::collections::BTreeSet::new();
            for (c, lvl) in calls {
                let v = evaluate(ConfigId(c), lvl, &o, &mut cache, &mut ledger).unwrap();
                prop_assert_eq!(v.to_bits(), o.loss(ConfigId(c), lvl).unwrap().to_bits());
                distinct.insert((c, lvl));
            }
            prop_assert_eq!(ledger.total(), distinct.iter().map(|&(_, l)| l).sum::<u64>());
            prop_assert_eq!(ledger.total(), PullLedger::from_entries(ledger.entries().to_vec()).total());
            for (c, l, v) in cache.iter() {
                prop_assert_eq!(v.to_bits(), o.loss(c, l).unwrap().to_bits());
            }
        }
    }
}
