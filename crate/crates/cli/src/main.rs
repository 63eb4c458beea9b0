//! `cdkit` — command-line harness for the coordinate-descent toolkit.
//!
//! Subcommands: `gen` (emit problem files), `run` (single solve to a trace
//! CSV), `verify` (traces + envelope to PASS/FAIL), `grid` (the six-variant
//! experiment), `kaczmarz`, and `async`. Every command takes a JSON config
//! or flags, writes under `--out`, and drops a manifest recording the config
//! hash and tool version.

use anyhow::{anyhow, bail, Context, Result};
use clap::{Parser, Subcommand};
use std::path::{Path, PathBuf};

use cdkit::asynchronous::{run_async_threads, simulate_async_cd, AsyncConfig, DelayPolicy};
use cdkit::bench::{
    bound_envelope, grid_summary_csv, reference_optimum_composite, reference_optimum_quadratic,
    run_experiment_grid, verify_envelope, EnvelopeParams, ExperimentGrid, TheoremId,
};
use cdkit::io::{
    build_problem, read_matrix_market_file, read_vector_file, write_manifest,
    write_matrix_market_file, write_vector_file, BuiltProblem, ProblemDescriptor,
};
use cdkit::kaczmarz::{
    accel_kaczmarz_sigma, run_accel_kaczmarz_dense, run_accel_kaczmarz_sparse,
    run_randomized_kaczmarz, KaczmarzConfig, SolutionProjector,
};
use cdkit::matrix::QuadMatrix;
use cdkit::problem::{
    lipschitz_profile, LinearSystemProblem, LipschitzProfile, SmoothProblem,
};
use cdkit::rng::{standard_normal_vec, SplitRng};
use cdkit::schedule::{IndexSchedule, StepRule};
use cdkit::serial::{run_cd, run_prox_cd, RunConfig};
use cdkit::trace::ConvergenceTrace;
use serde::Deserialize;

#[derive(Parser)]
#[command(name = "cdkit", version, about = "coordinate descent toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate problem files from a JSON descriptor.
    Gen {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Run one solver configuration and write its trace CSV.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's schedule seed.
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Check recorded traces against a theorem envelope (exit 0 PASS / 1 FAIL).
    Verify {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the six-variant experiment grid and write the comparison table.
    Grid {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Kaczmarz solvers on a MatrixMarket system.
    Kaczmarz {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        rhs: PathBuf,
        /// plain | accel-dense | accel-sparse
        #[arg(long)]
        algo: String,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        iters: u64,
        #[arg(long, default_value_t = 0)]
        stride: u64,
        /// Strong-convexity modulus for the accelerated variants:
        /// "auto" (lambda_min_nz of AA^T when m <= 256) or a number.
        #[arg(long, default_value = "auto")]
        sigma: String,
        /// zeros | normal:SEED
        #[arg(long, default_value = "zeros")]
        w0: String,
        #[arg(long)]
        trace: PathBuf,
    },
    /// Asynchronous CD: lock-free threads (policy "real") or the
    /// deterministic delay simulator.
    Async {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 1)]
        threads: usize,
        #[arg(long, default_value_t = 0.5)]
        gamma: f64,
        /// real | noDelay | fixedAge:T | random:T | worst:T
        #[arg(long)]
        policy: String,
        #[arg(long)]
        iters: u64,
        #[arg(long, default_value_t = 0)]
        stride: u64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// zeros | normal:SEED
        #[arg(long, default_value = "normal:1")]
        x0: String,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Debug, Deserialize)]
struct RunSpec {
    problem: ProblemDescriptor,
    schedule: String,
    step: String,
    budget: u64,
    #[serde(default)]
    checkpoint_stride: u64,
    #[serde(default = "default_seed")]
    seed: u64,
    #[serde(default = "default_x0")]
    x0: String,
    #[serde(default)]
    target_gap: Option<f64>,
    #[serde(default)]
    target_objective: Option<f64>,
    /// Compute a certified reference optimum for the gap column.
    #[serde(default = "default_true")]
    reference: bool,
}

fn default_seed() -> u64 {
    0
}

fn default_x0() -> String {
    "normal:1".into()
}

fn default_true() -> bool {
    true
}

#[derive(Debug, Deserialize)]
struct VerifySpec {
    theorem: TheoremId,
    problem: ProblemDescriptor,
    #[serde(default = "default_x0")]
    x0: String,
    #[serde(default = "default_slack")]
    slack: f64,
    /// Directory of trace CSVs, or explicit list of files.
    traces: TraceSource,
}

fn default_slack() -> f64 {
    1.1
}

#[derive(Debug, Deserialize)]
#[serde(untagged)]
enum TraceSource {
    Dir(String),
    Files(Vec<String>),
}

fn parse_x0(spec: &str, n: usize) -> Result<Vec<f64>> {
    if spec == "zeros" {
        return Ok(vec![0.0; n]);
    }
    if let Some(seed) = spec.strip_prefix("normal:") {
        let seed: u64 = seed.parse().context("bad x0 seed")?;
        return Ok(standard_normal_vec(&mut SplitRng::new(seed), n));
    }
    bail!("unrecognized x0 spec {spec:?} (use \"zeros\" or \"normal:<seed>\")")
}

fn parse_step(spec: &str) -> Result<StepRule> {
    Ok(match spec {
        "fixed_lmax" => StepRule::FixedLmax,
        "per_coord" => StepRule::PerCoordinate,
        "exact" => StepRule::ExactLineSearch,
        other => {
            if let Some(omega) = other.strip_prefix("sor:") {
                StepRule::over_relaxed(omega.parse().context("bad sor omega")?)?
            } else if let Some(gamma) = other.strip_prefix("fraction:") {
                StepRule::fixed_fraction(gamma.parse().context("bad fraction gamma")?)?
            } else {
                bail!("unrecognized step rule {other:?}")
            }
        }
    })
}

fn parse_schedule(spec: &str, n: usize, seed: u64) -> Result<IndexSchedule> {
    Ok(match spec {
        "cyclic" => IndexSchedule::cyclic(n),
        "iid" => IndexSchedule::uniform(n, seed),
        "epochs" => IndexSchedule::epoch_shuffle(n, seed),
        other => bail!("unrecognized schedule {other:?}"),
    })
}

fn parse_policy(spec: &str) -> Result<Option<DelayPolicy>> {
    let tail = |s: &str| -> Result<usize> { s.parse().context("bad tau") };
    Ok(match spec {
        "real" => None,
        "noDelay" => Some(DelayPolicy::NoDelay),
        other => {
            if let Some(t) = other.strip_prefix("fixedAge:") {
                Some(DelayPolicy::FixedAge { tau: tail(t)? })
            } else if let Some(t) = other.strip_prefix("random:") {
                Some(DelayPolicy::RandomSubset { tau: tail(t)?, seed: 0x5EED })
            } else if let Some(t) = other.strip_prefix("worst:") {
                Some(DelayPolicy::WorstCase { tau: tail(t)? })
            } else {
                bail!("unrecognized policy {other:?}")
            }
        }
    })
}

fn load_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<(T, Vec<u8>)> {
    let bytes =
        std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
    let value = serde_json::from_slice(&bytes)
        .with_context(|| format!("cannot parse {}", path.display()))?;
    Ok((value, bytes))
}

fn cmd_gen(config: &Path, out: &Path) -> Result<()> {
    let (descriptor, bytes): (ProblemDescriptor, _) = load_json(config)?;
    std::fs::create_dir_all(out)?;
    match build_problem(&descriptor)? {
        BuiltProblem::Quadratic(p) => {
            let csr = match p.matrix() {
                QuadMatrix::Sparse(m) => m.clone(),
                QuadMatrix::Dense(d) => {
                    let mut triplets = Vec::new();
                    for i in 0..d.n() {
                        for (j, &v) in d.row(i).iter().enumerate() {
                            if v != 0.0 {
                                triplets.push((i, j, v));
                            }
                        }
                    }
                    cdkit::matrix::CsrMatrix::from_triplets(d.n(), d.n(), triplets)?
                }
            };
            write_matrix_market_file(&csr, &out.join("Q.mtx"))?;
            if p.linear_term().iter().any(|&v| v != 0.0) {
                write_vector_file(p.linear_term(), &out.join("b.vec"))?;
            }
        }
        BuiltProblem::Composite(p) => {
            bail!(
                "gen emits smooth problem files; generate the smooth part instead \
                 (lambda = {} is a solver-side setting)",
                p.lambda
            )
        }
        BuiltProblem::LinearSystem(sys) => {
            write_matrix_market_file(sys.matrix(), &out.join("A.mtx"))?;
            write_vector_file(sys.rhs(), &out.join("b.vec"))?;
            if let Some(w) = sys.w_true() {
                write_vector_file(w, &out.join("w_true.vec"))?;
            }
        }
        BuiltProblem::Powell(_) => bail!("the three-dimensional test function needs no files"),
    }
    std::fs::write(out.join("problem.json"), &bytes)?;
    write_manifest(out, "gen", &bytes, None)?;
    println!("wrote problem files to {}", out.display());
    Ok(())
}

fn cmd_run(config: &Path, seed_override: Option<u64>, out: &Path) -> Result<()> {
    let (spec, bytes): (RunSpec, _) = load_json(config)?;
    let seed = seed_override.unwrap_or(spec.seed);
    let problem = build_problem(&spec.problem)?;
    let n = problem.dim();
    let x0 = parse_x0(&spec.x0, n)?;
    let rule = parse_step(&spec.step)?;
    let stride =
        if spec.checkpoint_stride == 0 { (n as u64).max(1) } else { spec.checkpoint_stride };

    let mut cfg = RunConfig::new(spec.budget, stride)
        .with_seed(seed)
        .with_variant(format!("{}-{}", spec.schedule, spec.step.replace(':', "-")));
    cfg.target_gap = spec.target_gap;
    cfg.target_objective = spec.target_objective;

    let trace = match &problem {
        BuiltProblem::Quadratic(p) => {
            if spec.reference {
                cfg.reference_value = Some(reference_optimum_quadratic(p)?.0);
            }
            let profile = lipschitz_profile(p, false)?;
            let mut sched = parse_schedule(&spec.schedule, n, seed)?;
            run_cd(SmoothProblem::Quadratic(p), &mut sched, &rule, &profile, &x0, &cfg)?
        }
        BuiltProblem::Composite(p) => {
            if spec.reference {
                cfg.reference_value = Some(reference_optimum_composite(p)?.0);
            }
            let profile = lipschitz_profile(&p.smooth, false)?;
            let mut sched = parse_schedule(&spec.schedule, n, seed)?;
            run_prox_cd(p, &mut sched, &rule, &profile, &x0, &cfg)?
        }
        BuiltProblem::Powell(p) => {
            let mut sched = parse_schedule(&spec.schedule, n, seed)?;
            run_cd(
                SmoothProblem::Powell(p),
                &mut sched,
                &rule,
                &LipschitzProfile::powell(),
                &x0,
                &cfg,
            )?
        }
        BuiltProblem::LinearSystem(_) => {
            bail!("linear systems are solved by the `kaczmarz` subcommand")
        }
    };

    std::fs::create_dir_all(out)?;
    let path = out.join(trace.file_name());
    trace.write_csv_file(&path)?;
    write_manifest(out, "run", &bytes, seed_override)?;
    println!(
        "wrote {} ({} checkpoints, final objective {:.6e})",
        path.display(),
        trace.checkpoints.len(),
        trace.final_objective()
    );
    Ok(())
}

fn collect_traces(source: &TraceSource, base: &Path) -> Result<Vec<ConvergenceTrace>> {
    let mut paths: Vec<PathBuf> = match source {
        TraceSource::Dir(d) => {
            let dir = base.join(d);
            let mut v = Vec::new();
            for entry in
                std::fs::read_dir(&dir).with_context(|| format!("cannot read {}", dir.display()))?
            {
                let p = entry?.path();
                if p.extension().is_some_and(|e| e == "csv") {
                    v.push(p);
                }
            }
            v
        }
        TraceSource::Files(files) => files.iter().map(|f| base.join(f)).collect(),
    };
    paths.sort();
    if paths.is_empty() {
        bail!("no trace files found");
    }
    paths
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let name = p.file_stem().and_then(|s| s.to_str()).unwrap_or("trace").to_string();
            let seed =
                name.rsplit("seed").next().and_then(|s| s.parse().ok()).unwrap_or(i as u64);
            ConvergenceTrace::read_csv_file(p, name.clone(), seed)
                .map_err(|e| anyhow!("{}: {e}", p.display()))
        })
        .collect()
}

fn envelope_for(
    spec: &VerifySpec,
    problem: &BuiltProblem,
    ks: &[u64],
) -> Result<cdkit::bench::BoundEnvelope> {
    let params = match problem {
        BuiltProblem::Quadratic(p) => {
            let profile = lipschitz_profile(p, true)?;
            let (fstar, xstar) = reference_optimum_quadratic(p)?;
            let x0 = parse_x0(&spec.x0, p.dim())?;
            EnvelopeParams::for_quadratic(p, &profile, &x0, fstar, &xstar)?
        }
        BuiltProblem::Composite(p) => {
            let profile = lipschitz_profile(&p.smooth, true)?;
            let (hstar, xstar) = reference_optimum_composite(p)?;
            let x0 = parse_x0(&spec.x0, p.dim())?;
            let h0 = p.objective(&x0)?;
            EnvelopeParams {
                n: p.dim(),
                l_max: profile.l_max,
                l_std: profile.l_std,
                sigma: profile.sigma,
                gap0: h0 - hstar,
                dist0_sq: cdkit::matrix::dist2_sq(&x0, &xstar),
                ..Default::default()
            }
        }
        BuiltProblem::LinearSystem(sys) => {
            let projector = SolutionProjector::new(sys).map_err(|e| anyhow!("projector: {e}"))?;
            let lambda = projector
                .lambda_min_nz()
                .ok_or_else(|| anyhow!("lambda_min_nz needs m <= 256"))?;
            let w0 = parse_x0(&spec.x0, sys.ncols())?;
            EnvelopeParams {
                n: sys.ncols(),
                m: sys.nrows(),
                lambda_min_nz: lambda,
                dist0_sq: projector.distance_sq(&w0)?,
                ..Default::default()
            }
        }
        BuiltProblem::Powell(_) => bail!("no envelope is defined for the test function"),
    };
    Ok(bound_envelope(spec.theorem, &params, ks)?)
}

fn cmd_verify(config: &Path, out: Option<&Path>) -> Result<bool> {
    let (spec, bytes): (VerifySpec, _) = load_json(config)?;
    let base = config.parent().unwrap_or(Path::new("."));
    let traces = collect_traces(&spec.traces, base)?;
    // envelope on the checkpoint grid shared by all traces (sublinear
    // envelopes skip k = 0)
    let mut ks: Vec<u64> = traces[0].checkpoints.iter().map(|c| c.k).collect();
    for t in &traces[1..] {
        let set: std::collections::BTreeSet<u64> = t.checkpoints.iter().map(|c| c.k).collect();
        ks.retain(|k| set.contains(k));
    }
    let skip_zero = matches!(
        spec.theorem,
        TheoremId::T1Sublinear | TheoremId::T3Cyclic | TheoremId::FgBaseline
    );
    if skip_zero {
        ks.retain(|&k| k > 0);
    }
    let problem = build_problem(&spec.problem)?;
    if matches!(spec.theorem, TheoremId::T3Cyclic) {
        let n = problem.dim() as u64;
        ks.retain(|&k| k % n == 0);
    }
    if ks.is_empty() {
        bail!("traces share no usable checkpoints");
    }
    let envelope = envelope_for(&spec, &problem, &ks)?;
    let report = verify_envelope(&traces, &envelope, spec.slack)?;
    println!("{}", report.summary_line());
    for row in &report.rows {
        println!(
            "  k={:<10} mean={:<14.6e} bound={:<14.6e} ratio={:.4}",
            row.k, row.mean_gap, row.bound, row.ratio
        );
    }
    if let Some(dir) = out {
        std::fs::create_dir_all(dir)?;
        let lines: Vec<String> = report
            .rows
            .iter()
            .map(|r| format!("{},{:.17e},{:.17e},{:.6}", r.k, r.mean_gap, r.bound, r.ratio))
            .collect();
        std::fs::write(
            dir.join("verify_report.csv"),
            format!("k,mean_gap,bound,ratio\n{}\n", lines.join("\n")),
        )?;
        write_manifest(dir, "verify", &bytes, None)?;
    }
    Ok(report.pass)
}

fn cmd_grid(config: &Path, out: &Path) -> Result<()> {
    let (grid, bytes): (ExperimentGrid, _) = load_json(config)?;
    let rows = run_experiment_grid(&grid)?;
    std::fs::create_dir_all(out)?;
    let csv = grid_summary_csv(&rows);
    std::fs::write(out.join("grid_summary.csv"), &csv)?;
    write_manifest(out, "grid", &bytes, None)?;
    println!("wrote {} ({} rows)", out.join("grid_summary.csv").display(), rows.len());
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_kaczmarz(
    matrix: &Path,
    rhs: &Path,
    algo: &str,
    seed: u64,
    iters: u64,
    stride: u64,
    sigma: &str,
    w0: &str,
    trace_path: &Path,
) -> Result<()> {
    let a = read_matrix_market_file(matrix)?;
    let b = read_vector_file(rhs)?;
    let sys = LinearSystemProblem::normalize_rows(&a, &b)?;
    let stride = if stride == 0 { (iters / 100).max(1) } else { stride };
    let w0 = parse_x0(w0, sys.ncols())?;
    let mut cfg = KaczmarzConfig::new(iters, stride, seed).with_variant(algo.to_string());
    cfg.compute_distance_gap = sys.nrows() <= 256;
    let sigma_value = match sigma {
        "auto" => accel_kaczmarz_sigma(&sys)?,
        v => v.parse::<f64>().context("bad sigma")?,
    };
    let run = match algo {
        "plain" => run_randomized_kaczmarz(&sys, &w0, &cfg)?,
        "accel-dense" => run_accel_kaczmarz_dense(&sys, &w0, sigma_value, &cfg)?,
        "accel-sparse" => run_accel_kaczmarz_sparse(&sys, &w0, sigma_value, &cfg)?,
        other => bail!("unknown algorithm {other:?} (plain | accel-dense | accel-sparse)"),
    };
    if let Some(dir) = trace_path.parent() {
        if !dir.as_os_str().is_empty() {
            std::fs::create_dir_all(dir)?;
        }
    }
    run.trace.write_csv_file(trace_path)?;
    println!(
        "wrote {} (final residual objective {:.6e}, gap {:.6e})",
        trace_path.display(),
        run.trace.final_objective(),
        run.trace.final_gap()
    );
    Ok(())
}

#[allow(clippy::too_many_arguments)]
fn cmd_async(
    config: &Path,
    threads: usize,
    gamma: f64,
    policy: &str,
    iters: u64,
    stride: u64,
    seed: u64,
    x0_spec: &str,
    out: &Path,
) -> Result<()> {
    let (descriptor, bytes): (ProblemDescriptor, _) = load_json(config)?;
    let problem = match build_problem(&descriptor)? {
        BuiltProblem::Quadratic(p) => p,
        _ => bail!("the asynchronous runners work on smooth quadratics"),
    };
    let n = problem.dim();
    let profile = lipschitz_profile(&problem, false)?;
    let x0 = parse_x0(x0_spec, n)?;
    let stride = if stride == 0 { (n as u64).max(1) } else { stride };
    let (fstar, _) = reference_optimum_quadratic(&problem)?;

    let trace = match parse_policy(policy)? {
        None => {
            let mut cfg = AsyncConfig::new(threads, gamma, iters, stride, seed);
            cfg.reference_value = Some(fstar);
            run_async_threads(&problem, &profile, &x0, &cfg)?
        }
        Some(delay) => {
            let cfg = RunConfig::new(iters, stride)
                .with_seed(seed)
                .with_reference(Some(fstar))
                .with_variant(format!("async-{}", delay.label().replace(':', "-")));
            simulate_async_cd(&problem, &profile, &delay, gamma, &x0, &cfg)?
        }
    };
    std::fs::create_dir_all(out)?;
    let path = out.join(trace.file_name());
    trace.write_csv_file(&path)?;
    write_manifest(out, "async", &bytes, Some(seed))?;
    println!(
        "wrote {} (final gap {:.6e}, {} global updates)",
        path.display(),
        trace.final_gap(),
        trace.final_k()
    );
    Ok(())
}

fn main() {
    let cli = Cli::parse();
    let outcome = match &cli.command {
        Command::Gen { config, out } => cmd_gen(config, out).map(|_| true),
        Command::Run { config, seed, out } => cmd_run(config, *seed, out).map(|_| true),
        Command::Verify { config, out } => cmd_verify(config, out.as_deref()),
        Command::Grid { config, out } => cmd_grid(config, out).map(|_| true),
        Command::Kaczmarz { matrix, rhs, algo, seed, iters, stride, sigma, w0, trace } => {
            cmd_kaczmarz(matrix, rhs, algo, *seed, *iters, *stride, sigma, w0, trace).map(|_| true)
        }
        Command::Async { config, threads, gamma, policy, iters, stride, seed, x0, out } => {
            cmd_async(config, *threads, *gamma, policy, *iters, *stride, *seed, x0, out)
                .map(|_| true)
        }
    };
    match outcome {
        Ok(true) => {}
        Ok(false) => std::process::exit(1),
        Err(e) => {
            eprintln!("error: {e:#}");
            std::process::exit(2);
        }
    }
}
