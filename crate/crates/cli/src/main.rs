//! `idhb`: fresh Hyperband runs, budget deepening, strategy comparisons,
//! bound verification and benchmark generation.
//!
//! Exit codes: 0 success, 2 invalid arguments, 3 I/O or parse failure,
//! 4 a referee property failed.

use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{anyhow, Context};
use clap::{Parser, Subcommand};
use idhb::bench::{BenchmarkSource, SamplerSpec, SyntheticBenchmark};
use idhb::compare::{
    base_run, compare, render_csv, summarize, CompareConfig, CompareError, CompareMode,
};
use idhb::hyperband::{
    deepen, efficient_promotion_violations, incumbent, DeepenMode, HbParams, RunState,
};
use idhb::referee::{verify_suite, Status};
use idhb::state::{read_state, write_state};

#[derive(Parser)]
#[command(name = "idhb", version, about = "Iterative-deepening Hyperband")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fresh Hyperband run; writes `state_t0.json` into the output directory.
    Run {
        /// `synthetic[:key=value,...]`, `crossing`, `tabular:<path>` or a CSV path.
        #[arg(long, default_value = "synthetic")]
        benchmark: String,
        #[arg(long = "R")]
        r: u64,
        #[arg(long, default_value_t = 2)]
        eta: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Deepens a saved run once; writes `state_t<t>.json`.
    Deepen {
        #[arg(long)]
        state: PathBuf,
        #[arg(long)]
        mode: DeepenMode,
        #[arg(long)]
        out: PathBuf,
    },
    /// Restart baseline against every deepening mode over seeds `0..n`.
    Compare {
        #[arg(long, default_value = "synthetic")]
        benchmark: String,
        #[arg(long = "R0", default_value_t = 16)]
        r0: u64,
        #[arg(long, default_value_t = 2)]
        eta: u64,
        #[arg(long, default_value_t = 30)]
        seeds: u64,
        /// Comma-separated subset of `ih,e,p,d`.
        #[arg(long, default_value = "ih,e,p,d", value_delimiter = ',')]
        modes: Vec<CompareMode>,
        #[arg(long, default_value = "on")]
        replay: Toggle,
        #[arg(long)]
        out: PathBuf,
    },
    /// Checks measured runs against the theoretical guarantees.
    Verify {
        /// `default` or `below-z`.
        #[arg(long, default_value = "default")]
        suite: String,
        #[arg(long, default_value_t = 100)]
        runs: usize,
    },
    /// Materializes the synthetic family as a tabular CSV file.
    GenBench {
        #[arg(long, default_value_t = idhb::bench::synthetic::DEFAULT_ALPHA)]
        alpha: f64,
        #[arg(long, default_value_t = idhb::bench::synthetic::DEFAULT_EPS)]
        eps: f64,
        #[arg(long)]
        n: u64,
        #[arg(long = "Rcap")]
        r_cap: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        force: bool,
    },
}

#[derive(Clone, Copy, clap::ValueEnum)]
enum Toggle {
    On,
    Off,
}

struct Failure {
    code: u8,
    error: anyhow::Error,
}

fn usage(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 2,
        error: e.into(),
    }
}

fn io(e: impl Into<anyhow::Error>) -> Failure {
    Failure {
        code: 3,
        error: e.into(),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {:#}", f.error);
            ExitCode::from(f.code)
        }
    }
}

fn dispatch(cmd: Command) -> Result<(), Failure> {
    match cmd {
        Command::Run {
            benchmark,
            r,
            eta,
            seed,
            out,
        } => cmd_run(&benchmark, r, eta, seed, &out),
        Command::Deepen { state, mode, out } => cmd_deepen(&state, mode, &out),
        Command::Compare {
            benchmark,
            r0,
            eta,
            seeds,
            modes,
            replay,
            out,
        } => {
            let cfg = CompareConfig {
                source: benchmark.parse().map_err(usage)?,
                r0,
                eta,
                seeds: (0..seeds).collect(),
                modes,
                replay: matches!(replay, Toggle::On),
            };
            cmd_compare(&cfg, &out)
        }
        Command::Verify { suite, runs } => cmd_verify(&suite, runs),
        Command::GenBench {
            alpha,
            eps,
            n,
            r_cap,
            seed,
            out,
            force,
        } => cmd_gen_bench(SamplerSpec::new(alpha, eps, seed), n, r_cap, &out, force),
    }
}

fn create_dir(dir: &Path) -> Result<(), Failure> {
    fs::create_dir_all(dir)
        .with_context(|| format!("cannot create {}", dir.display()))
        .map_err(io)
}

fn summary(state: &RunState) -> String {
    let inc = incumbent(state).ok();
    format!(
        "t={} R_t={} eta={} incumbent={} loss={} budget_phase={} budget_lineage={} B={}",
        state.t,
        state.params.max_size(),
        state.params.eta(),
        inc.as_ref().map_or("none".into(), |i| i.config.to_string()),
        inc.as_ref().map_or("nan".into(), |i| i.loss.to_string()),
        state.phase_budget(),
        state.lineage_budget(),
        state.params.budget(),
    )
}

fn cmd_run(benchmark: &str, r: u64, eta: u64, seed: u64, out: &Path) -> Result<(), Failure> {
    let source: BenchmarkSource = benchmark.parse().map_err(usage)?;
    let params = HbParams::new(r, eta).map_err(usage)?;
    let (state, _) = base_run(&source, params, seed).map_err(io)?;
    create_dir(out)?;
    let path = out.join("state_t0.json");
    write_state(&path, &state).map_err(io)?;
    println!("{} state={}", summary(&state), path.display());
    Ok(())
}

fn cmd_deepen(path: &Path, mode: DeepenMode, out: &Path) -> Result<(), Failure> {
    let prev = read_state(path).map_err(io)?;
    let descriptor = prev
        .benchmark
        .as_deref()
        .ok_or_else(|| io(anyhow!("{} does not name its benchmark", path.display())))?;
    let source: BenchmarkSource = descriptor
        .parse()
        .with_context(|| format!("benchmark {descriptor:?} in {}", path.display()))
        .map_err(io)?;
    let oracle = source.build(prev.rng.seed).map_err(io)?;
    let mut next = deepen(&prev, mode, oracle.as_ref()).map_err(io)?;
    next.benchmark = prev.benchmark.clone();
    if mode == DeepenMode::Efficient {
        let bad = efficient_promotion_violations(&prev, &next);
        if let Some((s, i, c)) = bad.first() {
            return Err(Failure {
                code: 4,
                error: anyhow!("bracket {s} iteration {i} dropped old promotion {c}"),
            });
        }
    }
    create_dir(out)?;
    let target = out.join(format!("state_t{}.json", next.t));
    write_state(&target, &next).map_err(io)?;
    println!(
        "{} mode={mode} reused_evals={} state={}",
        summary(&next),
        next.reused_evals(),
        target.display()
    );
    Ok(())
}

fn cmd_compare(cfg: &CompareConfig, out: &Path) -> Result<(), Failure> {
    HbParams::new(cfg.r0, cfg.eta).map_err(usage)?;
    let rows = compare(cfg).map_err(|e| match e {
        CompareError::DuplicateSeed(_) | CompareError::DuplicateMode(_) => usage(e),
        _ => io(e),
    })?;
    create_dir(out)?;
    let csv = out.join("comparison.csv");
    fs::write(&csv, render_csv(&rows))
        .with_context(|| format!("cannot write {}", csv.display()))
        .map_err(io)?;
    let mut table = String::from(
        "mode,seeds,mean_incumbent_gap,mean_budget_ratio,max_budget_ratio,mean_reused\n",
    );
    for s in summarize(&rows) {
        table.push_str(&format!(
            "{},{},{},{},{},{}\n",
            s.mode,
            s.seeds,
            s.mean_incumbent_gap,
            s.mean_budget_ratio,
            s.max_budget_ratio,
            s.mean_reused
        ));
    }
    let agg = out.join("summary.csv");
    fs::write(&agg, &table)
        .with_context(|| format!("cannot write {}", agg.display()))
        .map_err(io)?;
    print!("{table}");
    println!("rows={} csv={}", rows.len(), csv.display());
    Ok(())
}

fn cmd_verify(suite: &str, runs: usize) -> Result<(), Failure> {
    let results = verify_suite(suite, runs).map_err(|e| usage(anyhow!(e)))?;
    let mut failed = false;
    for r in &results {
        println!("{r}");
        failed |= r.status == Status::Fail;
    }
    println!(
        "suite={suite} runs={runs} status={}",
        if failed { "fail" } else { "pass" }
    );
    if failed {
        return Err(Failure {
            code: 4,
            error: anyhow!("referee properties failed"),
        });
    }
    Ok(())
}

fn cmd_gen_bench(
    spec: SamplerSpec,
    n: u64,
    r_cap: u64,
    out: &Path,
    force: bool,
) -> Result<(), Failure> {
    let bench = SyntheticBenchmark::new(spec).map_err(usage)?;
    if r_cap == 0 {
        return Err(usage(anyhow!("--Rcap must be at least 1")));
    }
    if out.exists() && !force {
        return Err(io(anyhow!(
            "{} exists; pass --force to overwrite",
            out.display()
        )));
    }
    let table = bench.to_tabular(n, r_cap);
    let comments = vec![format!(
        "synthetic alpha={} eps={} seed={} n={n} Rcap={r_cap}",
        spec.alpha, spec.eps, spec.seed
    )];
    fs::write(out, table.export(&comments))
        .with_context(|| format!("cannot write {}", out.display()))
        .map_err(io)?;
    println!("cells={} file={}", table.len(), out.display());
    Ok(())
}
