use idhb::arm::ConfigId;
use idhb::bench::{CurveSet, PowerCurve, SamplerSpec, SyntheticBenchmark};
use idhb::eval::{EvaluationCache, Evaluator, PullLedger};
use idhb::hyperband::{budget_cap_violations, deepen, run_hb, DeepenMode, HbParams};
use idhb::referee::{deepening_case, pull_count_case};
use idhb::sampler::ConfigStream;
use idhb::sh::{self, OldShState, Policy, ShInputs};
use idhb::state::{load_state, save_state};
use idhb::theory::{sh_pull_lower_bound, Rational};
use proptest::prelude::*;

fn curves() -> impl Strategy<Value = Vec<PowerCurve>> {
    prop::collection::vec(
        (0.0..1.0f64, 0.0..1.0f64, 0.5..2.0f64).prop_map(|(nu, c, p)| PowerCurve { nu, c, p }),
        2..40,
    )
}

/// Old halving pass on the first `n_old` arms, evaluated into `cache`.
fn old_pass(
    oracle: &CurveSet<PowerCurve>,
    cache: &mut EvaluationCache,
    n_old: usize,
    r: u64,
    eta: u64,
    s: u32,
) -> OldShState {
    if n_old == 0 {
        return OldShState::empty();
    }
    let ids: Vec<ConfigId> = (0..n_old as u64).map(ConfigId).collect();
    let mut ledger = PullLedger::new();
    let t = sh::run_sh(
        &ShInputs::new(ids, r, eta, s),
        &mut Evaluator::new(oracle, cache, &mut ledger),
    )
    .unwrap();
    let mut old = OldShState::from_trace(&t);
    old.pools.truncate(s as usize + 1);
    old
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn discarding_equals_halving_on_the_merged_set(
        cs in curves(), split in 0.0..1.0f64, eta in 2..=3u64, r in 1..=4u64, s in 0..=3u32,
    ) {
        let n = cs.len();
        let n_old = (split * n as f64) as usize;
        let oracle = CurveSet::new(cs);
        let mut cache = EvaluationCache::new();
        let old = old_pass(&oracle, &mut cache, n_old, r, eta, s);
        let fresh: Vec<ConfigId> = (n_old as u64..n as u64).map(ConfigId).collect();
        let all: Vec<ConfigId> = (0..n as u64).map(ConfigId).collect();

        let mut ledger = PullLedger::new();
        let d = sh::run_did_sh(
            &ShInputs::new(fresh, r, eta, s),
            &old,
            &mut Evaluator::new(&oracle, &mut cache, &mut ledger),
        ).unwrap();
        let (mut c2, mut l2) = (EvaluationCache::new(), PullLedger::new());
        let f = sh::run_sh(&ShInputs::new(all, r, eta, s), &mut Evaluator::new(&oracle, &mut c2, &mut l2)).unwrap();
        prop_assert_eq!(d.winner, f.winner);
        for k in 0..=s as usize + 1 {
            prop_assert_eq!(d.survivors(k), f.survivors(k));
        }
        prop_assert!(ledger.total() <= l2.total());
    }

    #[test]
    fn deepening_never_costs_more_than_halving(
        cs in curves(), split in 0.0..1.0f64, eta in 2..=3u64, r in 1..=4u64, s in 0..=3u32,
    ) {
        let n = cs.len();
        let n_old = (split * n as f64) as usize;
        let oracle = CurveSet::new(cs);
        let mut cache = EvaluationCache::new();
        let old = old_pass(&oracle, &mut cache, n_old, r, eta, s);
        let fresh: Vec<ConfigId> = (n_old as u64..n as u64).map(ConfigId).collect();
        let all: Vec<ConfigId> = (0..n as u64).map(ConfigId).collect();
        let (mut c0, mut l0) = (EvaluationCache::new(), PullLedger::new());
        sh::run_sh(&ShInputs::new(all, r, eta, s), &mut Evaluator::new(&oracle, &mut c0, &mut l0)).unwrap();
        let lower = sh_pull_lower_bound(n as u64, s, r * eta.pow(s), eta).unwrap();
        prop_assert!(Rational::from_integer(l0.total() as i128) >= lower);
        for p in [Policy::Efficient, Policy::Preserving, Policy::Discarding] {
            let mut cache = cache.clone();
            let mut ledger = PullLedger::new();
            let t = sh::run(p, &ShInputs::new(fresh.clone(), r, eta, s), &old, &mut Evaluator::new(&oracle, &mut cache, &mut ledger)).unwrap();
            prop_assert!(ledger.total() <= l0.total(), "{:?}: {} > {}", p, ledger.total(), l0.total());
            prop_assert_eq!(t.charged(), ledger.total());
        }
    }

    #[test]
    fn pull_counts_respect_the_ratio_bounds(seed in any::<u64>()) {
        let v = pull_count_case(seed).violations();
        prop_assert!(v.is_empty(), "{:?}", v);
    }

    #[test]
    fn efficient_keeps_old_promotions(
        cs in curves(), split in 0.0..1.0f64, eta in 2..=3u64, r in 1..=4u64, s in 1..=3u32,
    ) {
        let n = cs.len();
        let n_old = (split * n as f64) as usize;
        let oracle = CurveSet::new(cs);
        let mut cache = EvaluationCache::new();
        let old = old_pass(&oracle, &mut cache, n_old, r, eta, s);
        let fresh: Vec<ConfigId> = (n_old as u64..n as u64).map(ConfigId).collect();
        let mut ledger = PullLedger::new();
        let t = sh::run_eid_sh(&ShInputs::new(fresh, r, eta, s), &old, &mut Evaluator::new(&oracle, &mut cache, &mut ledger)).unwrap();
        for k in 1..=s as usize {
            let cap = n_old / eta.pow(k as u32) as usize;
            if old.pool(k).len() > cap {
                continue;
            }
            for c in old.pool(k) {
                prop_assert!(t.survivors(k).contains(c), "round {} lost old promotion {}", k, c);
            }
        }
    }

    #[test]
    fn deepening_suite_is_clean(seed in any::<u64>()) {
        let c = deepening_case(seed);
        prop_assert!(c.equivalence.is_empty(), "{:?}", c.equivalence);
        prop_assert!(c.budget.is_empty(), "{:?}", c.budget);
        prop_assert!(c.ledger_identity.is_empty(), "{:?}", c.ledger_identity);
        prop_assert!(c.promotion.is_empty(), "{:?}", c.promotion);
    }

    #[test]
    fn reload_then_deepen_matches(seed in 0..1000u64, eta in 2..=3u64, m in 1..=3u32) {
        let oracle = SyntheticBenchmark::new(SamplerSpec::with_defaults(seed)).unwrap();
        let base = run_hb(HbParams::new(eta.pow(m), eta).unwrap(), &mut ConfigStream::new(seed), &oracle).unwrap();
        let text = save_state(&base);
        let back = load_state(&text).unwrap();
        prop_assert_eq!(save_state(&back), text);
        for mode in DeepenMode::ALL {
            let a = deepen(&base, mode, &oracle).unwrap();
            let b = deepen(&back, mode, &oracle).unwrap();
            prop_assert!(budget_cap_violations(&a).is_empty());
            prop_assert_eq!(save_state(&a), save_state(&b));
        }
    }
}

#[test]
fn generated_table_matches_analytic_curves() {
    let bench = SyntheticBenchmark::new(SamplerSpec::with_defaults(3)).unwrap();
    let text = bench.to_tabular(12, 8).export(&[]);
    let table = idhb::bench::TabularBenchmark::parse(&text).unwrap();
    assert_eq!(table.len(), 12 * 8);
    for c in 0..12 {
        for j in 1..=8 {
            let expected = idhb::arm::LossOracle::loss(&bench, ConfigId(c), j).unwrap();
            assert_eq!(table.get(c, j), Some(expected));
        }
    }
}
