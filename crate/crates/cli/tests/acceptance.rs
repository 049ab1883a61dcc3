//! Acceptance run: one line per criterion, nonzero exit on any unexpected
//! result.
//!
//! Two criteria cannot pass as stated and are reported as FAIL. The run
//! still succeeds when the failure has exactly the documented shape, and
//! fails if it has any other shape:
//! * near-optimality of efficient deepening fails whenever the best arm is
//!   fresh and the old promotions fill every slot of some round;
//! * the whole-run guarantee's R condition never holds, because the
//!   largest bracket alone pushes its budget branch above R.

use std::fs;
use std::process::{Command, ExitCode};
use std::time::{Duration, Instant};

use idhb::arm::ConfigId;
use idhb::bench::{SamplerSpec, SyntheticBenchmark};
use idhb::hyperband::{deepen, run_hb, DeepenMode, HbParams, RunState};
use idhb::referee::{
    binomial_floor, deepening_case, near_optimality_case, pull_count_case, whole_run_trial,
    witness_outcomes,
};
use idhb::sampler::ConfigStream;
use idhb::sh::Policy;
use idhb::state::{load_state, save_state};
use idhb::theory::{eid_pull_bound, pdid_pull_bound};

enum Verdict {
    Pass,
    Fail,
    /// Fails as stated, for the reason recorded in the module docs.
    KnownFail,
}

struct Line {
    id: u32,
    name: &'static str,
    verdict: Verdict,
    elapsed: Duration,
    detail: String,
}

fn timed(
    id: u32,
    name: &'static str,
    limit: Duration,
    f: impl FnOnce() -> (Verdict, String),
) -> Line {
    let start = Instant::now();
    let (mut verdict, mut detail) = f();
    let elapsed = start.elapsed();
    if elapsed > limit {
        verdict = Verdict::Fail;
        detail.push_str(&format!("; over time limit {limit:?}"));
    }
    Line {
        id,
        name,
        verdict,
        elapsed,
        detail,
    }
}

fn verdict(ok: bool) -> Verdict {
    if ok {
        Verdict::Pass
    } else {
        Verdict::Fail
    }
}

fn oracle(seed: u64) -> SyntheticBenchmark {
    SyntheticBenchmark::new(SamplerSpec::with_defaults(seed)).unwrap()
}

fn base(seed: u64, r: u64, eta: u64) -> (RunState, SyntheticBenchmark) {
    let o = oracle(seed);
    let st = run_hb(
        HbParams::new(r, eta).unwrap(),
        &mut ConfigStream::new(seed),
        &o,
    )
    .unwrap();
    (st, o)
}

fn criterion_1() -> (Verdict, String) {
    let (st, o) = base(0, 16, 2);
    let fresh: Vec<(u64, u64)> = st.brackets.iter().map(|b| (b.n_s, b.r_s)).collect();
    let mut ok = fresh == [(16, 1), (10, 2), (7, 4), (5, 8), (5, 16)];
    let mut detail = format!("R=16 {fresh:?}");
    for mode in DeepenMode::ALL {
        let d = deepen(&st, mode, &o).unwrap();
        let n: Vec<u64> = d.brackets.iter().map(|b| b.n_s).collect();
        let old: Vec<u64> = d
            .brackets
            .iter()
            .map(|b| {
                b.start_pool()
                    .iter()
                    .filter(|c| c.0 < st.next_config_id)
                    .count() as u64
            })
            .collect();
        let delta: Vec<u64> = n.iter().zip(&old).map(|(a, b)| a - b).collect();
        ok &= n == [32, 20, 12, 8, 6, 6]
            && old == [16, 10, 7, 5, 5, 0]
            && delta == [16, 10, 5, 3, 1, 6];
        if mode == DeepenMode::Efficient {
            detail.push_str(&format!("; R=32 n={n:?} old={old:?} fresh={delta:?}"));
        }
    }
    (verdict(ok), detail)
}

fn criteria_2_3() -> (Line, Line) {
    let start = Instant::now();
    let cases: Vec<_> = (0..100).map(deepening_case).collect();
    let elapsed = start.elapsed();
    let eq: Vec<&String> = cases.iter().flat_map(|c| &c.equivalence).collect();
    let budget: Vec<&String> = cases.iter().flat_map(|c| &c.budget).collect();
    let ledger: usize = cases.iter().map(|c| c.ledger_identity.len()).sum();
    let eta3 = cases.iter().filter(|c| c.eta == 3).count();
    let mk = |id, name, v: &[&String], extra: String| Line {
        id,
        name,
        verdict: verdict(v.is_empty() && elapsed < Duration::from_secs(30)),
        elapsed,
        detail: format!(
            "100 instances ({eta3} with eta=3), {} violations{extra}{}",
            v.len(),
            v.first()
                .map(|s| format!("; first: {s}"))
                .unwrap_or_default()
        ),
    };
    (
        mk(
            2,
            "discarding deepening equals replayed restart",
            &eq,
            format!(", ledger identity violations {ledger}"),
        ),
        mk(3, "bracket budget cap", &budget, String::new()),
    )
}

fn criterion_4() -> (Verdict, String) {
    let mut per_policy = [0usize; 3];
    let mut unexplained = Vec::new();
    let mut applicable = 0;
    for seed in 0..100 {
        let o = near_optimality_case(seed, false);
        applicable += usize::from(o.applicable());
        for (p, g) in o.violations() {
            let i = match p {
                Policy::Efficient => 0,
                Policy::Preserving => 1,
                _ => 2,
            };
            per_policy[i] += 1;
            if p != Policy::Efficient || !o.fresh_best_starved {
                unexplained.push(format!("seed {seed} {p:?} gap {g}"));
            }
        }
    }
    let detail = format!(
        "{applicable}/100 instances with B >= z; violations e={} p={} d={}{}",
        per_policy[0],
        per_policy[1],
        per_policy[2],
        unexplained
            .first()
            .map(|u| format!("; unexplained: {u}"))
            .unwrap_or_default()
    );
    if applicable != 100 || !unexplained.is_empty() {
        (Verdict::Fail, detail)
    } else if per_policy[0] > 0 {
        (
            Verdict::KnownFail,
            format!("{detail}; every efficient violation has a fresh best arm with no slot"),
        )
    } else {
        (Verdict::Pass, detail)
    }
}

fn criterion_5() -> (Verdict, String) {
    let bad: Vec<String> = (0..100)
        .flat_map(|s| pull_count_case(s).violations())
        .collect();
    let e = eid_pull_bound(16, 10, 2, 100, 2).unwrap().clamped_f64();
    let p = pdid_pull_bound(16, 10, 2, 100, 2).unwrap().clamped_f64();
    let spots = (e - 0.625).abs() <= 1e-9 && (p - 0.95).abs() <= 1e-9;
    (
        verdict(bad.is_empty() && spots),
        format!(
            "100 instances, {} violations; eid(16,10,2,100,2)={e} pdid={p}",
            bad.len()
        ),
    )
}

fn criterion_6() -> (Verdict, String) {
    let (alpha, delta, eps, runs) = (0.5, 0.1, 0.1, 200usize);
    let results: Vec<_> = (0..runs as u64)
        .map(|s| whole_run_trial(s, 16, 2, alpha, delta, eps, DeepenMode::ALL[s as usize % 3]))
        .collect();
    let sampling_ok = results.iter().all(|r| r.sampling_branch == 5.0);
    let held = results.iter().filter(|r| r.condition_holds).count();
    let hits = results.iter().filter(|r| r.eps_optimal).count();
    let freq = hits as f64 / runs as f64;
    let floor = binomial_floor(delta, runs);
    let min_ratio = results
        .iter()
        .map(|r| r.budget_branch / 32.0)
        .fold(f64::INFINITY, f64::min);
    let detail = format!(
        "sampling branch 5: {sampling_ok}; condition held in {held}/{runs} runs \
         (budget branch >= {min_ratio:.1} R); eps-optimal frequency {freq:.3} vs floor {floor:.3}"
    );
    if !sampling_ok || freq < floor {
        (Verdict::Fail, detail)
    } else if held == 0 && min_ratio > 1.0 {
        (Verdict::KnownFail, detail)
    } else if held > 0 {
        let f = results
            .iter()
            .filter(|r| r.condition_holds && r.eps_optimal)
            .count() as f64
            / held as f64;
        (verdict(f >= binomial_floor(delta, held)), detail)
    } else {
        (Verdict::Fail, detail)
    }
}

fn criterion_7() -> (Verdict, String) {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_idhb"))
        .args([
            "compare", "--R0", "16", "--eta", "2", "--seeds", "30", "--modes", "ih,e,p,d",
            "--replay", "on", "--out",
        ])
        .arg(dir.path())
        .output()
        .unwrap();
    if !out.status.success() {
        return (
            Verdict::Fail,
            String::from_utf8_lossy(&out.stderr).into_owned(),
        );
    }
    let csv = fs::read_to_string(dir.path().join("comparison.csv")).unwrap();
    // (seed, mode) -> (incumbent, deepen budget)
    let rows: Vec<(u64, String, f64, f64)> = csv
        .lines()
        .skip(1)
        .map(|l| {
            let f: Vec<&str> = l.split(',').collect();
            (
                f[0].parse().unwrap(),
                f[1].to_string(),
                f[2].parse().unwrap(),
                f[3].parse().unwrap(),
            )
        })
        .collect();
    let ih = |seed: u64| {
        rows.iter()
            .find(|r| r.0 == seed && r.1 == "ih")
            .map(|r| (r.2, r.3))
            .unwrap()
    };
    let mut gaps = Vec::new();
    let mut ratios = Vec::new();
    for mode in ["e", "p", "d"] {
        let mine: Vec<_> = rows.iter().filter(|r| r.1 == mode).collect();
        let n = mine.len() as f64;
        gaps.push(mine.iter().map(|r| (r.2 - ih(r.0).0).abs()).sum::<f64>() / n);
        ratios.push(mine.iter().map(|r| r.3 / ih(r.0).1).sum::<f64>() / n);
    }
    let ok = rows.len() == 120
        && gaps.iter().all(|&g| g <= 0.01)
        && ratios.iter().all(|&r| r < 1.0)
        && ratios[0] <= ratios[1]
        && ratios[1] <= ratios[2];
    (
        verdict(ok),
        format!(
            "mean gap e/p/d = {:.4}/{:.4}/{:.4}; mean budget ratio e/p/d = {:.3}/{:.3}/{:.3} \
             (reduction {:.0}%/{:.0}%/{:.0}%)",
            gaps[0],
            gaps[1],
            gaps[2],
            ratios[0],
            ratios[1],
            ratios[2],
            100.0 * (1.0 - ratios[0]),
            100.0 * (1.0 - ratios[1]),
            100.0 * (1.0 - ratios[2])
        ),
    )
}

fn criterion_8() -> (Verdict, String) {
    let mut bad = Vec::new();
    for seed in 0..20 {
        let (st, o) = base(seed, 16, 2);
        let text = save_state(&st);
        let back = load_state(&text).unwrap();
        if save_state(&back) != text {
            bad.push(format!("seed {seed}: round trip"));
        }
        for mode in DeepenMode::ALL {
            let a = save_state(&deepen(&st, mode, &o).unwrap());
            let b = save_state(&deepen(&back, mode, &o).unwrap());
            if a != b {
                bad.push(format!("seed {seed} mode {mode}: reload changes deepening"));
            }
            if save_state(&load_state(&a).unwrap()) != a {
                bad.push(format!("seed {seed} mode {mode}: deepened round trip"));
            }
        }
    }
    (
        verdict(bad.is_empty()),
        format!("20 seeds x 3 modes, {} violations", bad.len()),
    )
}

fn criterion_9() -> (Verdict, String) {
    let o = witness_outcomes();
    let expected = [
        (Policy::Efficient, ConfigId(0), 4),
        (Policy::Preserving, ConfigId(0), 6),
        (Policy::Discarding, ConfigId(3), 6),
        (Policy::Fresh, ConfigId(3), 8),
    ];
    let distinct = (0..3).all(|i| (i + 1..3).all(|j| (o[i].1, o[i].2) != (o[j].1, o[j].2)));
    (
        verdict(o == expected && distinct),
        format!(
            "(winner, pulls) e=({}, {}) p=({}, {}) d=({}, {}) fresh=({}, {})",
            o[0].1, o[0].2, o[1].1, o[1].2, o[2].1, o[2].2, o[3].1, o[3].2
        ),
    )
}

fn main() -> ExitCode {
    let mut lines = vec![timed(
        1,
        "bracket arithmetic",
        Duration::from_secs(1),
        criterion_1,
    )];
    let (l2, l3) = criteria_2_3();
    lines.push(l2);
    lines.push(l3);
    lines.push(timed(
        4,
        "near-optimal winner above z",
        Duration::from_secs(30),
        criterion_4,
    ));
    lines.push(timed(
        5,
        "pull-count bounds",
        Duration::from_secs(30),
        criterion_5,
    ));
    lines.push(timed(
        6,
        "whole-run guarantee",
        Duration::from_secs(120),
        criterion_6,
    ));
    lines.push(timed(
        7,
        "comparison on the default suite",
        Duration::from_secs(120),
        criterion_7,
    ));
    lines.push(timed(
        8,
        "persistence",
        Duration::from_secs(60),
        criterion_8,
    ));
    lines.push(timed(
        9,
        "policy distinction witness",
        Duration::from_secs(1),
        criterion_9,
    ));

    let mut unexpected = false;
    for l in &lines {
        let tag = match l.verdict {
            Verdict::Pass => "PASS",
            Verdict::Fail => {
                unexpected = true;
                "FAIL"
            }
            Verdict::KnownFail => "FAIL (documented)",
        };
        println!(
            "criterion {} [{}]: {tag} in {:.2?} - {}",
            l.id, l.name, l.elapsed, l.detail
        );
    }
    if unexpected {
        ExitCode::FAILURE
    } else {
        ExitCode::SUCCESS
    }
}
