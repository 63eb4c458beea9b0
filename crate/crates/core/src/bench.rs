//! Verification layer: theoretical rate envelopes, multi-seed envelope
//! checks, certified reference optima, and the six-variant experiment grid.

use crate::error::{CdError, Result};
use crate::matrix::{dist2_sq, dot, norm2};
use crate::problem::{
    generate_synthetic, lipschitz_profile, shrink, CompositeProblem, LipschitzProfile,
    QuadraticProblem, SmoothProblem,
};
use crate::rng::{standard_normal_vec, SplitRng};
use crate::schedule::{IndexSchedule, StepRule};
use crate::serial::{run_cd, RunConfig};
use crate::trace::ConvergenceTrace;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Which convergence theorem an envelope instantiates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TheoremId {
    /// Randomized CD, sublinear: `2 n L_max R0^2 / k`.
    T1Sublinear,
    /// Randomized CD, strongly convex: `(1 - sigma/(n L_max))^k gap0`.
    T1Linear,
    /// Accelerated randomized CD: both the strongly convex form and the
    /// sublinear `S0 (n / (k+1))^2`, combined pointwise.
    T2Accel,
    /// Cyclic CD at epoch boundaries: sublinear and (when sigma > 0) linear
    /// forms, combined pointwise.
    T3Cyclic,
    /// Proximal randomized CD, strongly convex composite.
    T4ProxLinear,
    /// Randomized Kaczmarz: `(1 - lambda_min_nz / m)^k dist0^2`.
    RkLinear,
    /// Asynchronous CD, sublinear in expectation.
    T6Sublinear,
    /// Asynchronous CD under optimal strong convexity.
    T6Linear,
    /// Full-gradient descent baseline: `2 L R0^2 / k`.
    FgBaseline,
}

impl TheoremId {
    fn is_sublinear_only_at_positive_k(self) -> bool {
        matches!(self, TheoremId::T1Sublinear | TheoremId::FgBaseline | TheoremId::T3Cyclic)
    }

    /// Expectation envelopes need a seed population; the cyclic bound is
    /// deterministic and is checked on a single trace.
    pub fn min_traces(self) -> usize {
        match self {
            TheoremId::T3Cyclic => 1,
            _ => 100,
        }
    }
}

/// Everything an envelope formula can ask for. Fill what the instance
/// provides; `bound_envelope` errors when a required field is missing.
#[derive(Debug, Clone, Default)]
pub struct EnvelopeParams {
    pub n: usize,
    /// Row count of the Kaczmarz system (dual dimension).
    pub m: usize,
    pub l_max: f64,
    /// Standard Lipschitz constant L (largest eigenvalue).
    pub l_std: f64,
    pub sigma: f64,
    /// Level-set radius bound; for strongly convex instances the certified
    /// over-bound `R0^2 = 2 gap0 / sigma` applies.
    pub r0_sq: f64,
    /// `S0 = L_max ||x0 - x*||^2 + gap0 / n^2` (unique minimizer).
    pub s0: f64,
    /// Initial optimality gap `f(x0) - f*` (or `h(x0) - h*`).
    pub gap0: f64,
    /// `||x0 - P_S(x0)||^2`.
    pub dist0_sq: f64,
    pub lambda_min_nz: f64,
}

impl EnvelopeParams {
    /// Assemble parameters for a quadratic with certified optimum. The
    /// level-set radius uses the strong-convexity over-bound, so `sigma > 0`
    /// is required for the sublinear envelopes too.
    pub fn for_quadratic(
        problem: &QuadraticProblem,
        profile: &LipschitzProfile,
        x0: &[f64],
        fstar: f64,
        xstar: &[f64],
    ) -> Result<Self> {
        let f0 = problem.objective(x0)?;
        let gap0 = f0 - fstar;
        let dist0_sq = dist2_sq(x0, xstar);
        let n = problem.dim();
        let r0_sq = if profile.sigma > 0.0 { 2.0 * gap0 / profile.sigma } else { f64::NAN };
        Ok(EnvelopeParams {
            n,
            m: 0,
            l_max: profile.l_max,
            l_std: profile.l_std,
            sigma: profile.sigma,
            r0_sq,
            s0: profile.l_max * dist0_sq + gap0 / ((n * n) as f64),
            gap0,
            dist0_sq,
            lambda_min_nz: 0.0,
        })
    }
}

/// An instantiated bound: `values[j]` upper-bounds the (expected) gap at
/// iteration `k_values[j]`.
#[derive(Debug, Clone)]
pub struct BoundEnvelope {
    pub theorem: TheoremId,
    pub k_values: Vec<u64>,
    pub values: Vec<f64>,
}

fn require_positive(name: &str, v: f64) -> Result<f64> {
    if v.is_finite() && v > 0.0 {
        Ok(v)
    } else {
        Err(CdError::InvalidParameter(format!("envelope requires {name} > 0, got {v}")))
    }
}

/// Evaluate a theorem's bound at the requested iteration counts.
pub fn bound_envelope(
    theorem: TheoremId,
    p: &EnvelopeParams,
    k_values: &[u64],
) -> Result<BoundEnvelope> {
    if k_values.is_empty() {
        return Err(CdError::InvalidParameter("no iteration counts requested".into()));
    }
    for w in k_values.windows(2) {
        if w[1] <= w[0] {
            return Err(CdError::InvalidParameter("k values must increase".into()));
        }
    }
    if theorem.is_sublinear_only_at_positive_k() && k_values[0] == 0 {
        return Err(CdError::InvalidParameter(format!(
            "{theorem:?} is undefined at k = 0"
        )));
    }
    let n = p.n as f64;
    let values: Vec<f64> = match theorem {
        TheoremId::T1Sublinear => {
            let r0 = require_positive("R0^2", p.r0_sq)?;
            let lmax = require_positive("L_max", p.l_max)?;
            k_values.iter().map(|&k| 2.0 * n * lmax * r0 / k as f64).collect()
        }
        TheoremId::FgBaseline => {
            let r0 = require_positive("R0^2", p.r0_sq)?;
            let l = require_positive("L", p.l_std)?;
            k_values.iter().map(|&k| 2.0 * l * r0 / k as f64).collect()
        }
        TheoremId::T1Linear | TheoremId::T4ProxLinear => {
            let sigma = require_positive("sigma", p.sigma)?;
            let lmax = require_positive("L_max", p.l_max)?;
            let rate = 1.0 - sigma / (n * lmax);
            k_values.iter().map(|&k| rate.powi(k as i32) * p.gap0).collect()
        }
        TheoremId::T2Accel => {
            let s0 = require_positive("S0", p.s0)?;
            let lmax = require_positive("L_max", p.l_max)?;
            k_values
                .iter()
                .map(|&k| {
                    let sub = s0 * (n / (k as f64 + 1.0)).powi(2);
                    if p.sigma > 0.0 {
                        let root = (p.sigma / lmax).sqrt() / (2.0 * n);
                        let up = (1.0 + root).powi(k as i32 + 1);
                        let dn = (1.0 - root).powi(k as i32 + 1);
                        let denom = (up - dn).powi(2);
                        if denom > 0.0 {
                            sub.min(s0 * (p.sigma / lmax) / denom)
                        } else {
                            sub
                        }
                    } else {
                        sub
                    }
                })
                .collect()
        }
        TheoremId::T3Cyclic => {
            let r0 = require_positive("R0^2", p.r0_sq)?;
            let lmax = require_positive("L_max", p.l_max)?;
            let l = require_positive("L", p.l_std)?;
            if k_values.iter().any(|&k| k % p.n as u64 != 0) {
                return Err(CdError::InvalidParameter(
                    "the cyclic bound holds at k = n, 2n, ... only".into(),
                ));
            }
            let coupling = 1.0 + n * (l / lmax).powi(2);
            k_values
                .iter()
                .map(|&k| {
                    let sub = 4.0 * n * lmax * coupling * r0 / (k as f64 + 8.0);
                    if p.sigma > 0.0 {
                        let rate = 1.0 - p.sigma / (2.0 * lmax * coupling);
                        sub.min(rate.powi((k / p.n as u64) as i32) * p.gap0)
                    } else {
                        sub
                    }
                })
                .collect()
        }
        TheoremId::RkLinear => {
            let lam = require_positive("lambda_min_nz", p.lambda_min_nz)?;
            let m = require_positive("m", p.m as f64)?;
            let rate = 1.0 - lam / m;
            k_values.iter().map(|&k| rate.powi(k as i32) * p.dist0_sq).collect()
        }
        TheoremId::T6Sublinear => {
            let lmax = require_positive("L_max", p.l_max)?;
            let numer = n * (lmax * p.dist0_sq + p.gap0);
            k_values.iter().map(|&k| numer / (n + k as f64)).collect()
        }
        TheoremId::T6Linear => {
            let sigma = require_positive("sigma", p.sigma)?;
            let lmax = require_positive("L_max", p.l_max)?;
            let rate = 1.0 - sigma / (n * (sigma + 2.0 * lmax));
            let init = lmax * p.dist0_sq + p.gap0;
            k_values.iter().map(|&k| rate.powi(k as i32) * init).collect()
        }
    };
    for &v in &values {
        if !v.is_finite() || v < 0.0 {
            return Err(CdError::InvalidParameter(format!(
                "{theorem:?} produced a non-finite or negative bound"
            )));
        }
    }
    Ok(BoundEnvelope { theorem, k_values: k_values.to_vec(), values })
}

/// One row of an envelope-verification report.
#[derive(Debug, Clone)]
pub struct VerifyRow {
    pub k: u64,
    pub mean_gap: f64,
    pub bound: f64,
    pub ratio: f64,
}

#[derive(Debug, Clone)]
pub struct VerifyReport {
    pub theorem: TheoremId,
    pub slack: f64,
    pub traces: usize,
    pub pass: bool,
    pub worst_ratio: f64,
    pub worst_k: u64,
    pub rows: Vec<VerifyRow>,
}

impl VerifyReport {
    pub fn summary_line(&self) -> String {
        format!(
            "{:?}: {} (worst mean/bound = {:.4} at k = {}, slack {}, {} traces)",
            self.theorem,
            if self.pass { "PASS" } else { "FAIL" },
            self.worst_ratio,
            self.worst_k,
            self.slack,
            self.traces
        )
    }
}

/// Check the per-checkpoint mean gap of a trace population against an
/// envelope: PASS iff `mean <= slack * bound` at every envelope iteration.
/// Expectation envelopes require at least 100 traces (the deterministic
/// cyclic bound accepts one). Any non-finite gap fails with a diagnostic.
pub fn verify_envelope(
    traces: &[ConvergenceTrace],
    envelope: &BoundEnvelope,
    slack: f64,
) -> Result<VerifyReport> {
    if traces.len() < envelope.theorem.min_traces() {
        return Err(CdError::InvalidParameter(format!(
            "{:?} needs at least {} traces, got {}",
            envelope.theorem,
            envelope.theorem.min_traces(),
            traces.len()
        )));
    }
    let mut rows = Vec::with_capacity(envelope.k_values.len());
    let mut pass = true;
    let mut worst_ratio = 0.0f64;
    let mut worst_k = 0u64;
    for (&k, &bound) in envelope.k_values.iter().zip(&envelope.values) {
        let mut sum = 0.0;
        for t in traces {
            let gap = t.gap_at(k).ok_or_else(|| {
                CdError::InvalidParameter(format!(
                    "trace (variant {}, seed {}) has no checkpoint at k = {k}",
                    t.variant, t.seed
                ))
            })?;
            if !gap.is_finite() {
                return Err(CdError::Diverged { k, objective: gap });
            }
            sum += gap;
        }
        let mean = sum / traces.len() as f64;
        let ratio = if bound > 0.0 { mean / bound } else if mean <= 0.0 { 0.0 } else { f64::INFINITY };
        if ratio > worst_ratio {
            worst_ratio = ratio;
            worst_k = k;
        }
        if mean > slack * bound {
            pass = false;
        }
        rows.push(VerifyRow { k, mean_gap: mean, bound, ratio });
    }
    Ok(VerifyReport {
        theorem: envelope.theorem,
        slack,
        traces: traces.len(),
        pass,
        worst_ratio,
        worst_k,
        rows,
    })
}

/// Certified reference optimum of a quadratic.
///
/// Strongly convex (or any consistent) case: conjugate gradients from zero
/// to relative residual 1e-13; starting from zero keeps the iterates in the
/// range of Q, so consistent singular systems converge to the min-norm
/// solution. Certification: `||Q x* - b|| <= 1e-10 (1 + ||b||)`.
pub fn reference_optimum_quadratic(p: &QuadraticProblem) -> Result<(f64, Vec<f64>)> {
    let n = p.dim();
    let b = p.linear_term();
    if b.iter().all(|&v| v == 0.0) {
        return Ok((0.0, vec![0.0; n]));
    }
    let q = p.matrix();
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut dir = r.clone();
    let mut qd = vec![0.0; n];
    let bnorm = norm2(b).max(f64::MIN_POSITIVE);
    let mut rs = dot(&r, &r);
    for _ in 0..40 * n {
        if rs.sqrt() <= 1e-13 * bnorm {
            break;
        }
        q.mul_vec(&dir, &mut qd);
        let dqd = dot(&dir, &qd);
        if dqd <= 0.0 {
            break;
        }
        let alpha = rs / dqd;
        for j in 0..n {
            x[j] += alpha * dir[j];
            r[j] -= alpha * qd[j];
        }
        let rs_new = dot(&r, &r);
        let beta = rs_new / rs;
        rs = rs_new;
        for j in 0..n {
            dir[j] = r[j] + beta * dir[j];
        }
    }
    let mut qx = vec![0.0; n];
    q.mul_vec(&x, &mut qx);
    let res = (0..n).map(|j| (qx[j] - b[j]).powi(2)).sum::<f64>().sqrt();
    if res > 1e-10 * (1.0 + norm2(b)) {
        return Err(CdError::Certification(format!(
            "stationarity residual {res:e} exceeds 1e-10 (1 + ||b||)"
        )));
    }
    Ok((p.objective(&x)?, x))
}

/// Certified reference optimum of a separable composite: proximal CD with
/// exact coordinate steps until a full epoch moves nothing beyond 1e-13,
/// then certification of the proximal fixed point at `alpha = 1/L_max`
/// (per-coordinate residual <= 1e-10).
pub fn reference_optimum_composite(p: &CompositeProblem) -> Result<(f64, Vec<f64>)> {
    let n = p.dim();
    let profile = lipschitz_profile(&p.smooth, false)?;
    if profile.has_zero_curvature {
        return Err(CdError::InvalidProblem(
            "composite oracle needs positive diagonal curvature".into(),
        ));
    }
    let mut x = vec![0.0; n];
    let q = p.smooth.matrix();
    let b = p.smooth.linear_term();
    let mut residual = vec![0.0; n];
    q.mul_vec(&x, &mut residual);
    for (r, bi) in residual.iter_mut().zip(b) {
        *r -= bi;
    }
    let max_epochs = 200_000usize;
    let mut settled = false;
    for _ in 0..max_epochs {
        let mut max_move = 0.0f64;
        for i in 0..n {
            let alpha = 1.0 / q.diag(i);
            let tau = x[i] - alpha * residual[i];
            let z = shrink(p.lambda * alpha, tau, &p.reg, i)?;
            let delta = z - x[i];
            if delta != 0.0 {
                x[i] = z;
                q.add_scaled_col_into(i, delta, &mut residual);
                max_move = max_move.max(delta.abs());
            }
        }
        if max_move <= 1e-13 {
            settled = true;
            break;
        }
    }
    if !settled {
        return Err(CdError::InnerSolve("composite oracle did not settle".into()));
    }
    // certify the fixed point at the fixed steplength
    let alpha = 1.0 / profile.l_max;
    q.mul_vec(&x, &mut residual);
    for (r, bi) in residual.iter_mut().zip(b) {
        *r -= bi;
    }
    for i in 0..n {
        let z = shrink(p.lambda * alpha, x[i] - alpha * residual[i], &p.reg, i)?;
        if (z - x[i]).abs() > 1e-10 {
            return Err(CdError::Certification(format!(
                "proximal fixed-point residual {:e} at coordinate {i}",
                (z - x[i]).abs()
            )));
        }
    }
    Ok((p.objective(&x)?, x))
}

/// One cell of the experiment grid.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct GridCell {
    pub n: usize,
    pub r: usize,
    pub cond: f64,
    pub eta: f64,
    pub zeta: f64,
}

/// The six-variant experiment protocol: {cyclic, iid, epochs} x
/// {fixed 1/L_max, exact 1/Q_ii} on each synthetic cell, several seeds per
/// cell, terminating when the objective falls below
/// `termination_factor * f(x0)` (components of x0 standard normal).
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentGrid {
    pub cells: Vec<GridCell>,
    pub seeds_per_cell: u64,
    pub master_seed: u64,
    #[serde(default = "default_termination")]
    pub termination_factor: f64,
    #[serde(default = "default_cap")]
    pub iteration_cap: u64,
}

fn default_termination() -> f64 {
    1e-6
}

fn default_cap() -> u64 {
    10_000_000
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum ScheduleVariant {
    Cyclic,
    Iid,
    Epochs,
}

impl ScheduleVariant {
    pub const ALL: [ScheduleVariant; 3] =
        [ScheduleVariant::Cyclic, ScheduleVariant::Iid, ScheduleVariant::Epochs];

    fn build(self, n: usize, seed: u64) -> IndexSchedule {
        match self {
            ScheduleVariant::Cyclic => IndexSchedule::cyclic(n),
            ScheduleVariant::Iid => IndexSchedule::uniform(n, seed),
            ScheduleVariant::Epochs => IndexSchedule::epoch_shuffle(n, seed),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            ScheduleVariant::Cyclic => "CYCLIC",
            ScheduleVariant::Iid => "IID",
            ScheduleVariant::Epochs => "EPOCHS",
        }
    }
}

/// Iterations-to-termination statistics for one (cell, step rule, schedule).
#[derive(Debug, Clone, Serialize)]
pub struct VariantStats {
    pub schedule: String,
    pub mean_iterations: f64,
    pub median_iterations: f64,
    pub censored: u64,
}

/// Summary of one (cell, step rule) with the schedule comparison ratios.
#[derive(Debug, Clone, Serialize)]
pub struct GridSummaryRow {
    pub cell: GridCell,
    pub step: String,
    pub stats: Vec<VariantStats>,
    /// mean(IID) / mean(EPOCHS)
    pub ratio_iid_epochs: f64,
    /// mean(CYCLIC) / mean(IID)
    pub ratio_cyclic_iid: f64,
}

fn median(sorted: &[f64]) -> f64 {
    let n = sorted.len();
    if n == 0 {
        return f64::NAN;
    }
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

/// Run the grid. Cells fan out over a worker pool; each (cell, seed, variant)
/// job is pure and reproducible from the master seed. A run that exceeds the
/// iteration cap is recorded as censored (its cap value enters the
/// statistics as a lower bound), not as a failure.
pub fn run_experiment_grid(grid: &ExperimentGrid) -> Result<Vec<GridSummaryRow>> {
    if grid.cells.is_empty() {
        return Err(CdError::InvalidParameter("empty grid".into()));
    }
    let root = SplitRng::new(grid.master_seed);
    let jobs: Vec<(usize, &GridCell)> = grid.cells.iter().enumerate().collect();
    let results: Result<Vec<Vec<GridSummaryRow>>> = jobs
        .par_iter()
        .map(|&(cell_idx, cell)| {
            let cell_rng = root.split(cell_idx as u64);
            let problem =
                generate_synthetic(cell.n, cell.r, cell.cond, cell.eta, cell.zeta, cell_rng.key())?;
            let profile = lipschitz_profile(&problem, false)?;
            let mut rows = Vec::new();
            for (step_name, rule) in
                [("fixed", StepRule::FixedLmax), ("optimal", StepRule::ExactLineSearch)]
            {
                let mut stats = Vec::new();
                for schedule in ScheduleVariant::ALL {
                    let iters: Result<Vec<(f64, bool)>> = (0..grid.seeds_per_cell)
                        .into_par_iter()
                        .map(|seed_idx| {
                            let seed_rng = cell_rng.split(1000 + seed_idx);
                            let x0 = standard_normal_vec(&mut seed_rng.clone(), cell.n);
                            let f0 = problem.objective(&x0)?;
                            let mut sched = schedule.build(cell.n, seed_rng.key());
                            let mut cfg =
                                RunConfig::new(grid.iteration_cap, grid.iteration_cap.max(1))
                                    .with_seed(seed_rng.key());
                            cfg.target_objective = Some(grid.termination_factor * f0);
                            cfg.reference_value = problem.known_fstar();
                            let trace = run_cd(
                                SmoothProblem::Quadratic(&problem),
                                &mut sched,
                                &rule,
                                &profile,
                                &x0,
                                &cfg,
                            )?;
                            let hit =
                                trace.final_objective() <= grid.termination_factor * f0;
                            Ok((trace.final_k() as f64, !hit))
                        })
                        .collect();
                    let iters = iters?;
                    let censored = iters.iter().filter(|(_, c)| *c).count() as u64;
                    let mut counts: Vec<f64> = iters.iter().map(|(k, _)| *k).collect();
                    counts.sort_by(|a, b| a.partial_cmp(b).unwrap());
                    stats.push(VariantStats {
                        schedule: schedule.name().into(),
                        mean_iterations: counts.iter().sum::<f64>() / counts.len() as f64,
                        median_iterations: median(&counts),
                        censored,
                    });
                }
                let mean_of = |name: &str| {
                    stats
                        .iter()
                        .find(|s| s.schedule == name)
                        .map(|s| s.mean_iterations)
                        .unwrap_or(f64::NAN)
                };
                rows.push(GridSummaryRow {
                    cell: cell.clone(),
                    step: step_name.into(),
                    ratio_iid_epochs: mean_of("IID") / mean_of("EPOCHS"),
                    ratio_cyclic_iid: mean_of("CYCLIC") / mean_of("IID"),
                    stats,
                });
            }
            Ok(rows)
        })
        .collect();
    Ok(results?.into_iter().flatten().collect())
}

/// Render the grid summary as the comparison CSV.
pub fn grid_summary_csv(rows: &[GridSummaryRow]) -> String {
    let mut out = String::from(
        "n,r,cond,eta,zeta,step,\
         cyclic_mean,cyclic_median,cyclic_censored,\
         iid_mean,iid_median,iid_censored,\
         epochs_mean,epochs_median,epochs_censored,\
         ratio_iid_epochs,ratio_cyclic_iid\n",
    );
    for row in rows {
        let by = |name: &str| row.stats.iter().find(|s| s.schedule == name).unwrap();
        let (c, i, e) = (by("CYCLIC"), by("IID"), by("EPOCHS"));
        out.push_str(&format!(
            "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{:.6},{:.6}\n",
            row.cell.n,
            row.cell.r,
            row.cell.cond,
            row.cell.eta,
            row.cell.zeta,
            row.step,
            c.mean_iterations,
            c.median_iterations,
            c.censored,
            i.mean_iterations,
            i.median_iterations,
            i.censored,
            e.mean_iterations,
            e.median_iterations,
            e.censored,
            row.ratio_iid_epochs,
            row.ratio_cyclic_iid,
        ));
    }
    out
}
