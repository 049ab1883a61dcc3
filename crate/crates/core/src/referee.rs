//! Randomized checks of measured behavior against the bounds in [`theory`]
//! and the structural guarantees of deepening.
//!
//! Every case is generated from a single `u64` seed so a failing case can be
//! replayed in isolation.
//!
//! [`theory`]: crate::theory

use std::collections::HashSet;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::arm::{ConfigId, Envelope, LossOracle};
use crate::bench::{crossing_witness, CurveSet, PowerCurve, SamplerSpec, SyntheticBenchmark};
use crate::compare::restart_run;
use crate::eval::{EvaluationCache, Evaluator, PullLedger};
use crate::hyperband::{
    budget_cap_violations, deepen, efficient_promotion_violations, incumbent, run_hb, DeepenMode,
    HbParams, RunState,
};
use crate::sampler::ConfigStream;
use crate::sh::{self, OldShState, Policy, ShInputs};
use crate::theory::{
    ceil_log, eid_pull_bound, pdid_pull_bound, sh_pull_lower_bound, thm3_condition, z_id_sh,
    InstanceSpec, Rational, Thm3Inputs,
};

const DEEPENING_STREAM: u64 = 0x5eed_0001;
const NEAR_OPT_STREAM: u64 = 0x5eed_0002;
const PULL_COUNT_STREAM: u64 = 0x5eed_0003;

fn case_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Outcome of one deepening case.
#[derive(Debug, Clone, Default)]
pub struct DeepeningOutcome {
    pub eta: u64,
    pub r_prev: u64,
    /// Incumbent or survivor-set mismatches between discarding deepening
    /// and the replayed restart.
    pub equivalence: Vec<String>,
    /// Brackets over their budget `B`, for every run of the case.
    pub budget: Vec<String>,
    /// Discarding deepening charged something other than the restart minus
    /// the evaluations it found in the cache.
    pub ledger_identity: Vec<String>,
    /// Old promotions revoked by efficient deepening.
    pub promotion: Vec<String>,
}

/// Random synthetic instance with `eta` in {2, 3} and `R_t <= 64`; deepens
/// the fresh run with every mode and compares against a replayed restart.
pub fn deepening_case(seed: u64) -> DeepeningOutcome {
    let mut rng = case_rng(seed, DEEPENING_STREAM);
    let (eta, r_prev) = if rng.random_bool(0.5) {
        (2, [1u64, 2, 4, 8, 16, 32][rng.random_range(0..6)])
    } else {
        (3, [1u64, 3, 6, 9, 18][rng.random_range(0..5)])
    };
    let spec = SamplerSpec {
        alpha: rng.random_range(0.1..0.9),
        nu_star: 0.0,
        eps: rng.random_range(0.02..0.5),
        worse_upper: 1.0,
        c_max: rng.random_range(0.0..1.5),
        p: rng.random_range(0.5..2.0),
        seed,
    };
    let oracle = SyntheticBenchmark::new(spec).expect("valid family");
    let mut out = DeepeningOutcome {
        eta,
        r_prev,
        ..Default::default()
    };
    let params = HbParams::new(r_prev, eta).expect("aligned size");
    let base = run_hb(params, &mut ConfigStream::new(seed), &oracle).expect("fresh run");
    let mut audit = |name: &str, st: &RunState| {
        for (s, used) in budget_cap_violations(st) {
            out.budget.push(format!(
                "seed {seed} {name}: bracket {s} uses {used} > B = {}",
                st.params.budget()
            ));
        }
    };
    audit("fresh", &base);
    let mut deepened = Vec::new();
    for mode in DeepenMode::ALL {
        let st = deepen(&base, mode, &oracle).expect("deepening");
        audit(mode.letter(), &st);
        deepened.push((mode, st));
    }
    let (_, d) = deepened
        .iter()
        .find(|(m, _)| *m == DeepenMode::Discarding)
        .expect("discarding run");
    let ih = restart_run(&base, Some(d), &oracle).expect("restart");
    audit("ih", &ih);

    if incumbent(d).ok() != incumbent(&ih).ok() {
        out.equivalence.push(format!(
            "seed {seed}: incumbent {:?} vs restart {:?}",
            incumbent(d).ok(),
            incumbent(&ih).ok()
        ));
    }
    for (a, b) in d.brackets.iter().zip(&ih.brackets) {
        for k in 0..=a.s as usize + 1 {
            if a.survivors(k) != b.survivors(k) {
                out.equivalence.push(format!(
                    "seed {seed}: bracket {} survivor set {k} differs",
                    a.s
                ));
            }
        }
    }
    let cached: u64 = ih
        .ledger
        .entries()
        .iter()
        .filter(|&&(c, l)| base.cache.contains(c, l))
        .map(|&(_, l)| l)
        .sum();
    if d.phase_budget() + cached != ih.lineage_budget() {
        out.ledger_identity.push(format!(
            "seed {seed}: deepening charged {} but restart {} minus cached {cached}",
            d.phase_budget(),
            ih.lineage_budget()
        ));
    }
    let (_, e) = &deepened[0];
    for (s, i, c) in efficient_promotion_violations(&base, e) {
        out.promotion.push(format!(
            "seed {seed}: bracket {s} iteration {i} dropped old promotion {c}"
        ));
    }
    out
}

/// Deepening policies exercised by the halving-level suites.
pub const ID_POLICIES: [Policy; 3] = [Policy::Efficient, Policy::Preserving, Policy::Discarding];

/// Outcome of one near-optimality case.
#[derive(Debug, Clone)]
pub struct NearOptimalityOutcome {
    pub n: usize,
    pub n_old: usize,
    pub eta: u64,
    pub eps: f64,
    pub z: u64,
    /// `(s + 1) * min_k |S_k| r_k`: every round receives at least a
    /// `1 / (s + 1)` share of it.
    pub budget: u64,
    /// `nu(winner) - min nu` per policy.
    pub gaps: Vec<(Policy, f64)>,
    /// The best arm is fresh and some round before the last leaves fresh
    /// arms no slot, because the old promotions already fill
    /// `floor(n / eta^(k+1))`. Efficient deepening cannot recover such an
    /// arm at any budget.
    pub fresh_best_starved: bool,
}

impl NearOptimalityOutcome {
    pub fn applicable(&self) -> bool {
        self.budget >= self.z
    }

    pub fn violations(&self) -> Vec<(Policy, f64)> {
        self.gaps
            .iter()
            .copied()
            .filter(|&(_, g)| g > self.eps / 2.0)
            .collect()
    }
}

fn slot_counts(n: usize, eta: u64, s: u32) -> Vec<u64> {
    (0..=s).map(|k| (n as u64 / eta.pow(k)).max(1)).collect()
}

/// Random arms with known limits and envelope `1/j`. The base level is the
/// smallest one giving every round at least `z / (s + 1)` units, or 1 when
/// `below_z` is set.
pub fn near_optimality_case(seed: u64, below_z: bool) -> NearOptimalityOutcome {
    let mut rng = case_rng(seed, NEAR_OPT_STREAM);
    let eta = rng.random_range(2..=3u64);
    let n = rng.random_range(2..=32usize);
    let n_old = rng.random_range(0..=n);
    let eps = rng.random_range(0.05..0.5);
    let curves: Vec<PowerCurve> = (0..n)
        .map(|_| PowerCurve {
            nu: rng.random_range(0.0..1.0),
            c: rng.random_range(0.0..1.0),
            p: 1.0,
        })
        .collect();
    let mut limits: Vec<f64> = curves.iter().map(|c| c.nu).collect();
    limits.sort_by(f64::total_cmp);
    let s = ceil_log(n as u64, eta) - 1;
    let counts = slot_counts(n, eta, s);
    let spec_with = |cap: u64| InstanceSpec {
        limits: limits.clone(),
        envelope: Envelope::power(1.0, 1.0),
        eta,
        max_size: cap,
        rounds: s,
        n_old: n_old as u64,
        eps,
    };
    let r = if below_z {
        1
    } else {
        let z_uncapped = z_id_sh(&spec_with(1 << 30)).expect("valid instance");
        (0..=s)
            .map(|k| z_uncapped.div_ceil((s as u64 + 1) * counts[k as usize] * eta.pow(k)))
            .max()
            .unwrap_or(1)
            .max(1)
    };
    let max_size = r * eta.pow(s);
    let z = z_id_sh(&spec_with(max_size)).expect("valid instance");
    let budget = (s as u64 + 1)
        * (0..=s)
            .map(|k| counts[k as usize] * r * eta.pow(k))
            .min()
            .unwrap_or(0);

    let oracle = CurveSet::new(curves);
    let ids: Vec<ConfigId> = (0..n as u64).map(ConfigId).collect();
    let (old_ids, fresh) = ids.split_at(n_old);
    let mut cache = EvaluationCache::new();
    let old = old_state(&oracle, &mut cache, old_ids, r, eta, s);
    let best = limits[0];
    let best_is_fresh = curves_best(&oracle.curves) >= n_old;
    let zero_quota = (0..s).any(|k| n as u64 / eta.pow(k + 1) == n_old as u64 / eta.pow(k + 1));
    let gaps = ID_POLICIES
        .iter()
        .map(|&p| {
            let mut cache = cache.clone();
            let mut ledger = PullLedger::new();
            let mut ev = Evaluator::new(&oracle, &mut cache, &mut ledger);
            let t = sh::run(p, &ShInputs::new(fresh.to_vec(), r, eta, s), &old, &mut ev)
                .expect("halving run");
            (p, oracle.curves[t.winner.0 as usize].nu - best)
        })
        .collect();
    NearOptimalityOutcome {
        n,
        n_old,
        eta,
        eps,
        z,
        budget,
        gaps,
        fresh_best_starved: best_is_fresh && zero_quota,
    }
}

fn curves_best(curves: &[PowerCurve]) -> usize {
    (0..curves.len())
        .min_by(|&a, &b| curves[a].nu.total_cmp(&curves[b].nu).then(a.cmp(&b)))
        .unwrap_or(0)
}

/// Runs a halving pass on `old_ids` at the given levels and returns its
/// promotion chain for rounds `0..=s`.
fn old_state(
    oracle: &dyn LossOracle,
    cache: &mut EvaluationCache,
    old_ids: &[ConfigId],
    r: u64,
    eta: u64,
    s: u32,
) -> OldShState {
    if old_ids.is_empty() {
        return OldShState::empty();
    }
    let mut ledger = PullLedger::new();
    let mut ev = Evaluator::new(oracle, cache, &mut ledger);
    let t = sh::run_sh(&ShInputs::new(old_ids.to_vec(), r, eta, s), &mut ev).expect("old run");
    let mut old = OldShState::from_trace(&t);
    old.pools.truncate(s as usize + 1);
    old
}

/// Outcome of one pull-count case.
#[derive(Debug, Clone)]
pub struct PullCountOutcome {
    pub n: u64,
    pub n_old: u64,
    pub s: u32,
    pub r: u64,
    pub eta: u64,
    pub sh_pulls: u64,
    pub pulls: Vec<(Policy, u64)>,
    /// `None` when the fresh-run lower bound is not positive.
    pub eid_bound: Option<Rational>,
    pub pdid_bound: Option<Rational>,
    pub sh_lower: Rational,
}

impl PullCountOutcome {
    pub fn violations(&self) -> Vec<String> {
        let mut v = Vec::new();
        let sh = Rational::from_integer(self.sh_pulls as i128);
        if sh < self.sh_lower {
            v.push(format!(
                "fresh run pulls {} below lower bound {}",
                self.sh_pulls, self.sh_lower
            ));
        }
        for &(p, pulls) in &self.pulls {
            if pulls > self.sh_pulls {
                v.push(format!(
                    "{p:?} pulls {pulls} exceed fresh run {}",
                    self.sh_pulls
                ));
            }
            let bound = match p {
                Policy::Efficient => self.eid_bound,
                _ => self.pdid_bound,
            };
            if let Some(b) = bound {
                if Rational::from_integer(pulls as i128) > b * sh {
                    v.push(format!(
                        "{p:?} pulls {pulls} exceed {b} x {}",
                        self.sh_pulls
                    ));
                }
            }
        }
        v
    }
}

/// Random synthetic instance: an old halving pass on the first `ñ` arms,
/// then every deepening policy and a fresh run on all arms.
pub fn pull_count_case(seed: u64) -> PullCountOutcome {
    let mut rng = case_rng(seed, PULL_COUNT_STREAM);
    let eta = rng.random_range(2..=3u64);
    let n = rng.random_range(2..=64u64);
    let n_old = rng.random_range(0..=n);
    let s = rng.random_range(0..=4u32);
    let r = rng.random_range(1..=8u64);
    let oracle = SyntheticBenchmark::new(SamplerSpec::new(0.5, 0.1, seed)).expect("valid family");
    let ids: Vec<ConfigId> = (0..n).map(ConfigId).collect();
    let (old_ids, fresh) = ids.split_at(n_old as usize);

    let mut cache = EvaluationCache::new();
    let old = old_state(&oracle, &mut cache, old_ids, r, eta, s);
    let pulls = ID_POLICIES
        .iter()
        .map(|&p| {
            let mut cache = cache.clone();
            let mut ledger = PullLedger::new();
            let mut ev = Evaluator::new(&oracle, &mut cache, &mut ledger);
            sh::run(p, &ShInputs::new(fresh.to_vec(), r, eta, s), &old, &mut ev)
                .expect("halving run");
            (p, ledger.total())
        })
        .collect();
    let mut fresh_cache = EvaluationCache::new();
    let mut sh_ledger = PullLedger::new();
    sh::run_sh(
        &ShInputs::new(ids.clone(), r, eta, s),
        &mut Evaluator::new(&oracle, &mut fresh_cache, &mut sh_ledger),
    )
    .expect("fresh run");

    let max_size = r * eta.pow(s);
    let sh_lower = sh_pull_lower_bound(n, s, max_size, eta).expect("small parameters");
    let positive = sh_lower > Rational::from_integer(0);
    let bound =
        |b: Result<crate::theory::PullBound, _>| b.ok().filter(|_| positive).map(|b| b.clamped);
    PullCountOutcome {
        n,
        n_old,
        s,
        r,
        eta,
        sh_pulls: sh_ledger.total(),
        pulls,
        eid_bound: bound(eid_pull_bound(n, n_old, s, max_size, eta)),
        pdid_bound: bound(pdid_pull_bound(n, n_old, s, max_size, eta)),
        sh_lower,
    }
}

/// One deepened lineage for the whole-run guarantee.
#[derive(Debug, Clone)]
pub struct WholeRunTrial {
    pub seed: u64,
    pub mode: DeepenMode,
    pub incumbent_limit: f64,
    pub eps_optimal: bool,
    pub condition_holds: bool,
    pub sampling_branch: f64,
    pub budget_branch: f64,
}

/// Fresh run at `r0` on the synthetic family with the given `alpha, eps`,
/// deepened once with `mode`.
pub fn whole_run_trial(
    seed: u64,
    r0: u64,
    eta: u64,
    alpha: f64,
    delta: f64,
    eps: f64,
    mode: DeepenMode,
) -> WholeRunTrial {
    let spec = SamplerSpec::new(alpha, eps, seed);
    let oracle = SyntheticBenchmark::new(spec).expect("valid family");
    let base = run_hb(
        HbParams::new(r0, eta).expect("aligned size"),
        &mut ConfigStream::new(seed),
        &oracle,
    )
    .expect("fresh run");
    let st = deepen(&base, mode, &oracle).expect("deepening");
    let inc = incumbent(&st).expect("evaluations recorded");
    let incumbent_limit = oracle.limit(inc.config).expect("synthetic limits known");
    let bracket_limits = st
        .brackets
        .iter()
        .map(|b| {
            let mut v: Vec<f64> = b
                .start_pool()
                .iter()
                .map(|&c| oracle.limit(c).expect("synthetic limits known"))
                .collect();
            v.sort_by(f64::total_cmp);
            v
        })
        .collect();
    let rep = thm3_condition(&Thm3Inputs {
        eta,
        max_size: st.params.max_size(),
        alpha,
        delta,
        eps,
        bracket_limits,
        envelope: spec.envelope(),
    })
    .expect("valid inputs");
    WholeRunTrial {
        seed,
        mode,
        incumbent_limit,
        eps_optimal: spec.is_eps_optimal(incumbent_limit),
        condition_holds: rep.holds,
        sampling_branch: rep.sampling_branch,
        budget_branch: rep.budget_branch,
    }
}

/// Lower edge of a two-sided 95% normal band around `1 - delta` for `runs`
/// Bernoulli trials.
pub fn binomial_floor(delta: f64, runs: usize) -> f64 {
    (1.0 - delta) - 1.96 * (delta * (1.0 - delta) / runs as f64).sqrt()
}

/// Winner and pulls of each policy on the crossing instance, followed by a
/// fresh run on all four arms.
pub fn witness_outcomes() -> Vec<(Policy, ConfigId, u64)> {
    let w = crossing_witness();
    let mut cache = EvaluationCache::new();
    let old = old_state(&w.oracle, &mut cache, &w.old_arms, w.r, w.eta, w.rounds);
    let mut out: Vec<(Policy, ConfigId, u64)> = ID_POLICIES
        .iter()
        .map(|&p| {
            let mut cache = cache.clone();
            let mut ledger = PullLedger::new();
            let mut ev = Evaluator::new(&w.oracle, &mut cache, &mut ledger);
            let t = sh::run(
                p,
                &ShInputs::new(w.fresh_arms.clone(), w.r, w.eta, w.rounds),
                &old,
                &mut ev,
            )
            .expect("witness run");
            (p, t.winner, ledger.total())
        })
        .collect();
    let all: Vec<ConfigId> = w.old_arms.iter().chain(&w.fresh_arms).copied().collect();
    let (mut cache, mut ledger) = (EvaluationCache::new(), PullLedger::new());
    let t = sh::run_sh(
        &ShInputs::new(all, w.r, w.eta, w.rounds),
        &mut Evaluator::new(&w.oracle, &mut cache, &mut ledger),
    )
    .expect("witness run");
    out.push((Policy::Fresh, t.winner, ledger.total()));
    out
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Pass,
    Fail,
    NotApplicable,
}

impl fmt::Display for Status {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Status::Pass => "pass",
            Status::Fail => "fail",
            Status::NotApplicable => "not-applicable",
        })
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PropertyResult {
    pub name: &'static str,
    pub status: Status,
    pub checked: usize,
    pub violations: usize,
    pub detail: String,
}

impl fmt::Display for PropertyResult {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "property={} status={} checked={} violations={} detail=\"{}\"",
            self.name, self.status, self.checked, self.violations, self.detail
        )
    }
}

fn judged(name: &'static str, checked: usize, violations: &[String]) -> PropertyResult {
    PropertyResult {
        name,
        status: if violations.is_empty() {
            Status::Pass
        } else {
            Status::Fail
        },
        checked,
        violations: violations.len(),
        detail: violations.first().cloned().unwrap_or_default(),
    }
}

pub const SUITES: [&str; 2] = ["default", "below-z"];

/// Runs a named suite with `runs` cases per randomized property.
pub fn verify_suite(suite: &str, runs: usize) -> Result<Vec<PropertyResult>, String> {
    match suite {
        "default" => Ok(default_suite(runs)),
        "below-z" => Ok(vec![near_optimality_property(runs, true)]),
        other => Err(format!(
            "unknown suite {other:?}; known suites: {}",
            SUITES.join(", ")
        )),
    }
}

fn default_suite(runs: usize) -> Vec<PropertyResult> {
    let cases: Vec<DeepeningOutcome> = (0..runs as u64).map(deepening_case).collect();
    let collect = |f: fn(&DeepeningOutcome) -> &Vec<String>| -> Vec<String> {
        cases.iter().flat_map(|c| f(c).iter().cloned()).collect()
    };
    let mut out = vec![
        judged("discarding-equivalence", runs, &collect(|c| &c.equivalence)),
        judged("bracket-budget-cap", runs, &collect(|c| &c.budget)),
        judged(
            "deepening-ledger-identity",
            runs,
            &collect(|c| &c.ledger_identity),
        ),
        judged("efficient-promotion", runs, &collect(|c| &c.promotion)),
        near_optimality_property(runs, false),
    ];
    let pull_violations: Vec<String> = (0..runs as u64)
        .flat_map(|s| {
            pull_count_case(s)
                .violations()
                .into_iter()
                .map(move |v| format!("seed {s}: {v}"))
        })
        .collect();
    out.push(judged("pull-ratio-bounds", runs, &pull_violations));
    out.push(whole_run_property(runs.max(1)));
    out.push(witness_property());
    out
}

fn near_optimality_property(runs: usize, below_z: bool) -> PropertyResult {
    let mut applicable = 0;
    let mut violations = Vec::new();
    let mut starved = 0;
    for seed in 0..runs as u64 {
        let o = near_optimality_case(seed, below_z);
        if !o.applicable() {
            continue;
        }
        applicable += 1;
        for (p, g) in o.violations() {
            starved += usize::from(p == Policy::Efficient && o.fresh_best_starved);
            violations.push(format!(
                "seed {seed}: {p:?} gap {g} > eps/2 = {}",
                o.eps / 2.0
            ));
        }
    }
    let total = violations.len();
    if let Some(first) = violations.first_mut() {
        first.push_str(&format!(
            "; {starved} of {} violations are efficient runs whose best arm is fresh and gets no slot",
            total
        ));
    }
    if applicable == 0 {
        return PropertyResult {
            name: "near-optimal-winner",
            status: Status::NotApplicable,
            checked: 0,
            violations: 0,
            detail: format!("budget below z on all {runs} instances; guarantee not applicable"),
        };
    }
    judged("near-optimal-winner", applicable, &violations)
}

fn whole_run_property(runs: usize) -> PropertyResult {
    let (alpha, delta, eps) = (0.5, 0.1, 0.1);
    let results: Vec<WholeRunTrial> = (0..runs as u64)
        .map(|s| whole_run_trial(s, 16, 2, alpha, delta, eps, DeepenMode::ALL[s as usize % 3]))
        .collect();
    let held: Vec<&WholeRunTrial> = results.iter().filter(|r| r.condition_holds).collect();
    let freq = |rs: &[&WholeRunTrial]| {
        rs.iter().filter(|r| r.eps_optimal).count() as f64 / rs.len().max(1) as f64
    };
    let all: Vec<&WholeRunTrial> = results.iter().collect();
    if held.is_empty() {
        return PropertyResult {
            name: "whole-run-guarantee",
            status: Status::NotApplicable,
            checked: 0,
            violations: 0,
            detail: format!(
                "R condition held in 0 of {runs} runs (budget branch >= {:.0}); near-optimal frequency without it {:.3}",
                results.iter().map(|r| r.budget_branch).fold(f64::INFINITY, f64::min),
                freq(&all)
            ),
        };
    }
    let f = freq(&held);
    let floor = binomial_floor(delta, held.len());
    let violations = if f < floor {
        vec![format!("frequency {f:.3} below {floor:.3}")]
    } else {
        vec![]
    };
    judged("whole-run-guarantee", held.len(), &violations)
}

fn witness_property() -> PropertyResult {
    let o = witness_outcomes();
    let ids: Vec<(ConfigId, u64)> = o.iter().take(3).map(|&(_, w, p)| (w, p)).collect();
    let distinct: HashSet<(ConfigId, u64)> = ids.iter().copied().collect();
    let v = if distinct.len() == 3 {
        vec![]
    } else {
        vec![format!("outcomes collapse: {o:?}")]
    };
    judged("policy-distinction", 1, &v)
}
