//! The Kaczmarz family for consistent systems `Aw = b` with unit-norm rows:
//! plain randomized projections, the accelerated variant in a dense
//! reference form, and the sparse-efficient accelerated variant that tracks
//! the momentum pair through a 2x2 change of variables so one iteration
//! costs O(|A_i|) instead of O(n).

use crate::accel::CoefficientStream;
use crate::error::{CdError, Result};
use crate::matrix::{dist2_sq, dot, norm2};
use crate::problem::LinearSystemProblem;
use crate::schedule::IndexSchedule;
use crate::trace::{Checkpoint, ConvergenceTrace};
use std::time::Instant;

const ROW_NORM_TOL: f64 = 1e-8;
const DET_BAND_LO: f64 = 1e-12;
const DET_BAND_HI: f64 = 1e12;

/// Options shared by the Kaczmarz runners.
#[derive(Debug, Clone)]
pub struct KaczmarzConfig {
    pub budget: u64,
    pub checkpoint_stride: u64,
    pub seed: u64,
    pub variant: String,
    /// Record the primal iterate at every checkpoint (used by the
    /// dense/sparse equivalence checks).
    pub capture_states: bool,
    /// Sparse runner only: fold the 2x2 basis into the vectors at every
    /// iteration instead of waiting for the determinant band.
    pub force_renormalize: bool,
    /// Record `||w - P(w)||^2` as the gap column. Requires an extra solve
    /// per checkpoint; disable for runs that only compare iterates.
    pub compute_distance_gap: bool,
    /// Stop once the distance-squared gap reaches this value (checkpoints).
    pub target_dist_sq: Option<f64>,
}

impl KaczmarzConfig {
    pub fn new(budget: u64, checkpoint_stride: u64, seed: u64) -> Self {
        KaczmarzConfig {
            budget,
            checkpoint_stride: checkpoint_stride.max(1),
            seed,
            variant: "kaczmarz".into(),
            capture_states: false,
            force_renormalize: false,
            compute_distance_gap: true,
            target_dist_sq: None,
        }
    }

    pub fn with_variant(mut self, v: impl Into<String>) -> Self {
        self.variant = v.into();
        self
    }
}

/// A trace plus optional per-checkpoint iterate snapshots and the final
/// momentum vector (for cross-implementation agreement checks).
#[derive(Debug, Clone)]
pub struct KaczmarzRun {
    pub trace: ConvergenceTrace,
    pub states: Vec<Vec<f64>>,
    pub final_v_tilde: Option<Vec<f64>>,
}

/// One Kaczmarz projection: `w' = w - (A_i w - b_i) A_i^T`, after which
/// equation `i` holds exactly. Errors if row `i` is not unit-norm to 1e-8.
pub fn kaczmarz_step(sys: &LinearSystemProblem, w: &[f64], i: usize) -> Result<Vec<f64>> {
    if i >= sys.nrows() {
        return Err(CdError::IndexOutOfRange { index: i, dim: sys.nrows() });
    }
    if w.len() != sys.ncols() {
        return Err(CdError::DimensionMismatch { expected: sys.ncols(), got: w.len() });
    }
    let nrm = sys.matrix().row_norm2(i);
    if (nrm - 1.0).abs() > ROW_NORM_TOL {
        return Err(CdError::InvalidProblem(format!("row {i} has norm {nrm}, expected 1")));
    }
    let mut out = w.to_vec();
    let resid = sys.matrix().row_dot(i, w) - sys.rhs()[i];
    sys.matrix().add_scaled_row_into(i, -resid, &mut out);
    Ok(out)
}

/// Projection onto the solution set of a consistent system:
/// `P(w) = w - A^T (A A^T)^+ (A w - b)`.
///
/// For m <= 256 the pseudoinverse comes from a dense symmetric
/// eigendecomposition of `A A^T`; larger systems solve the Gram system
/// iteratively (conjugate gradients from zero, which stays in the range and
/// so converges to the pseudoinverse solution) to relative tolerance 1e-12.
pub struct SolutionProjector<'a> {
    sys: &'a LinearSystemProblem,
    dense: Option<DenseGram>,
}

struct DenseGram {
    vectors: nalgebra::DMatrix<f64>,
    eigenvalues: Vec<f64>,
    lambda_min_nz: f64,
    nonzero_tol: f64,
}

impl<'a> SolutionProjector<'a> {
    pub fn new(sys: &'a LinearSystemProblem) -> Result<Self> {
        let m = sys.nrows();
        let dense = if m <= 256 {
            let ad = sys.matrix().to_dense();
            let gram = &ad * ad.transpose();
            let eig = nalgebra::SymmetricEigen::new(gram);
            let eigenvalues: Vec<f64> = eig.eigenvalues.iter().cloned().collect();
            let lam_max = eigenvalues.iter().cloned().fold(0.0, f64::max);
            let nonzero_tol = 1e-10 * lam_max.max(f64::MIN_POSITIVE);
            let lambda_min_nz = eigenvalues
                .iter()
                .cloned()
                .filter(|l| *l > nonzero_tol)
                .fold(f64::INFINITY, f64::min);
            Some(DenseGram { vectors: eig.eigenvectors, eigenvalues, lambda_min_nz, nonzero_tol })
        } else {
            None
        };
        Ok(SolutionProjector { sys, dense })
    }

    /// Minimum nonzero eigenvalue of `A A^T` (dense path only).
    pub fn lambda_min_nz(&self) -> Option<f64> {
        self.dense.as_ref().map(|d| d.lambda_min_nz)
    }

    pub fn project(&self, w: &[f64]) -> Result<Vec<f64>> {
        let (m, n) = (self.sys.nrows(), self.sys.ncols());
        if w.len() != n {
            return Err(CdError::DimensionMismatch { expected: n, got: w.len() });
        }
        let mut res = vec![0.0; m];
        for i in 0..m {
            res[i] = self.sys.matrix().row_dot(i, w) - self.sys.rhs()[i];
        }
        let u = match &self.dense {
            Some(g) => {
                let rv = nalgebra::DVector::from_column_slice(&res);
                let mut t = g.vectors.transpose() * rv;
                for (ti, lam) in t.iter_mut().zip(&g.eigenvalues) {
                    if *lam > g.nonzero_tol {
                        *ti /= *lam;
                    } else {
                        *ti = 0.0;
                    }
                }
                (&g.vectors * t).iter().cloned().collect::<Vec<f64>>()
            }
            None => self.solve_gram_cg(&res)?,
        };
        let mut out = w.to_vec();
        let mut atu = vec![0.0; n];
        self.sys.matrix().mul_transpose_vec(&u, &mut atu);
        for (o, a) in out.iter_mut().zip(&atu) {
            *o -= a;
        }
        Ok(out)
    }

    pub fn distance_sq(&self, w: &[f64]) -> Result<f64> {
        Ok(dist2_sq(w, &self.project(w)?))
    }

    fn solve_gram_cg(&self, rhs: &[f64]) -> Result<Vec<f64>> {
        let m = self.sys.nrows();
        let n = self.sys.ncols();
        let matvec = |x: &[f64], out: &mut [f64], tmp: &mut [f64]| {
            self.sys.matrix().mul_transpose_vec(x, tmp);
            for i in 0..m {
                out[i] = self.sys.matrix().row_dot(i, tmp);
            }
        };
        let mut x = vec![0.0; m];
        let mut r = rhs.to_vec();
        let mut p = r.clone();
        let mut ap = vec![0.0; m];
        let mut tmp = vec![0.0; n];
        let rhs_norm = norm2(rhs).max(f64::MIN_POSITIVE);
        let mut rs = dot(&r, &r);
        for _ in 0..50 * m {
            if rs.sqrt() <= 1e-12 * rhs_norm {
                return Ok(x);
            }
            matvec(&p, &mut ap, &mut tmp);
            let pap = dot(&p, &ap);
            if pap <= 0.0 {
                break;
            }
            let alpha = rs / pap;
            for j in 0..m {
                x[j] += alpha * p[j];
                r[j] -= alpha * ap[j];
            }
            let rs_new = dot(&r, &r);
            let beta = rs_new / rs;
            rs = rs_new;
            for j in 0..m {
                p[j] = r[j] + beta * p[j];
            }
        }
        if rs.sqrt() <= 1e-12 * rhs_norm {
            Ok(x)
        } else {
            Err(CdError::InnerSolve(format!(
                "gram CG stalled at relative residual {:e}",
                rs.sqrt() / rhs_norm
            )))
        }
    }
}

/// One-shot projection; builds the apparatus per call. Runners keep a
/// [`SolutionProjector`] instead.
pub fn projection_to_solution_set(sys: &LinearSystemProblem, w: &[f64]) -> Result<Vec<f64>> {
    SolutionProjector::new(sys)?.project(w)
}

/// Default strong-convexity modulus for the accelerated runners:
/// `lambda_min_nz(A A^T)` when the dense spectrum is available and is a
/// valid input for the coefficient schedule, else the conservative 0.
pub fn accel_kaczmarz_sigma(sys: &LinearSystemProblem) -> Result<f64> {
    let m = sys.nrows();
    if m <= 1 {
        return Ok(0.0);
    }
    let proj = SolutionProjector::new(sys)?;
    match proj.lambda_min_nz() {
        Some(lam) if lam.is_finite() && lam < (m * m) as f64 => Ok(lam),
        _ => Ok(0.0),
    }
}

struct KaczmarzRecorder<'c> {
    cfg: &'c KaczmarzConfig,
    projector: Option<SolutionProjector<'c>>,
    started: Instant,
    guard: Option<f64>,
    run: KaczmarzRun,
    last_k: Option<u64>,
}

impl<'c> KaczmarzRecorder<'c> {
    fn new(cfg: &'c KaczmarzConfig, sys: &'c LinearSystemProblem) -> Result<Self> {
        let projector =
            if cfg.compute_distance_gap { Some(SolutionProjector::new(sys)?) } else { None };
        Ok(KaczmarzRecorder {
            cfg,
            projector,
            started: Instant::now(),
            guard: None,
            run: KaczmarzRun {
                trace: ConvergenceTrace::new(cfg.variant.clone(), cfg.seed),
                states: Vec::new(),
                final_v_tilde: None,
            },
            last_k: None,
        })
    }

    /// Record state `k`; returns true when the run should stop.
    fn record(&mut self, k: u64, w: &[f64], objective: f64, flops: u64) -> Result<bool> {
        if self.last_k == Some(k) {
            return Ok(false);
        }
        let gap = match &self.projector {
            Some(p) => p.distance_sq(w)?,
            None => f64::NAN,
        };
        let watched = if gap.is_nan() { objective } else { gap };
        match self.guard {
            None => self.guard = Some(1e8 * (1.0 + watched.abs())),
            Some(g) => {
                if !watched.is_finite() || watched > g {
                    return Err(CdError::Diverged { k, objective: watched });
                }
            }
        }
        self.run.trace.checkpoints.push(Checkpoint {
            k,
            objective,
            gap,
            wall_ns: self.started.elapsed().as_nanos() as u64,
            flops,
        });
        if self.cfg.capture_states {
            self.run.states.push(w.to_vec());
        }
        self.last_k = Some(k);
        Ok(matches!(self.cfg.target_dist_sq, Some(t) if gap <= t))
    }
}

fn check_system(sys: &LinearSystemProblem, w0: &[f64]) -> Result<()> {
    if w0.len() != sys.ncols() {
        return Err(CdError::DimensionMismatch { expected: sys.ncols(), got: w0.len() });
    }
    for i in 0..sys.nrows() {
        let nrm = sys.matrix().row_norm2(i);
        if (nrm - 1.0).abs() > ROW_NORM_TOL {
            return Err(CdError::InvalidProblem(format!("row {i} has norm {nrm}, expected 1")));
        }
    }
    Ok(())
}

fn half_residual_sq(sys: &LinearSystemProblem, w: &[f64]) -> f64 {
    let r = sys.primal_residual(w);
    0.5 * r * r
}

/// Plain randomized Kaczmarz: a uniformly random row projection per
/// iteration. The trace's gap column is `||w - P(w)||^2`.
pub fn run_randomized_kaczmarz(
    sys: &LinearSystemProblem,
    w0: &[f64],
    cfg: &KaczmarzConfig,
) -> Result<KaczmarzRun> {
    check_system(sys, w0)?;
    let m = sys.nrows();
    let a = sys.matrix();
    let mut schedule = IndexSchedule::uniform(m, cfg.seed);
    let mut rec = KaczmarzRecorder::new(cfg, sys)?;
    let mut w = w0.to_vec();
    let mut flops = 0u64;
    let mut k = 0u64;
    while k < cfg.budget {
        if k % cfg.checkpoint_stride == 0
            && rec.record(k, &w, half_residual_sq(sys, &w), flops)?
        {
            break;
        }
        let i = schedule.next(k)?;
        let resid = a.row_dot(i, &w) - sys.rhs()[i];
        a.add_scaled_row_into(i, -resid, &mut w);
        flops += 4 * a.row_nnz(i) as u64 + 1;
        k += 1;
    }
    rec.record(k, &w, half_residual_sq(sys, &w), flops)?;
    rec.run.trace.final_x = w;
    rec.run.trace.validate()?;
    Ok(rec.run)
}

/// Accelerated randomized Kaczmarz, dense reference form.
///
/// Runs the momentum recursion directly on the primal vectors
/// `(w, v~, y~)`; every iteration manipulates dense vectors, so the cost is
/// O(n) regardless of row sparsity. The coefficient recursion is driven by
/// the dual dimension m (the sampled index set), with `sigma` a lower bound
/// on the minimum nonzero eigenvalue of `A A^T` (0 is always valid).
pub fn run_accel_kaczmarz_dense(
    sys: &LinearSystemProblem,
    w0: &[f64],
    sigma: f64,
    cfg: &KaczmarzConfig,
) -> Result<KaczmarzRun> {
    check_system(sys, w0)?;
    let (m, n) = (sys.nrows(), sys.ncols());
    let a = sys.matrix();
    let mut schedule = IndexSchedule::uniform(m, cfg.seed);
    let mut coeffs = CoefficientStream::new(sigma, m);
    let mut rec = KaczmarzRecorder::new(cfg, sys)?;

    let mut w = w0.to_vec();
    let mut v = w0.to_vec();
    let mut y = vec![0.0; n];
    let mut flops = 0u64;
    let mut k = 0u64;
    while k < cfg.budget {
        if k % cfg.checkpoint_stride == 0
            && rec.record(k, &w, half_residual_sq(sys, &w), flops)?
        {
            break;
        }
        let c = coeffs.advance()?;
        for j in 0..n {
            y[j] = c.alpha * v[j] + (1.0 - c.alpha) * w[j];
        }
        let i = schedule.next(k)?;
        let resid = a.row_dot(i, &y) - sys.rhs()[i];
        if !resid.is_finite() {
            return Err(CdError::Diverged { k, objective: f64::NAN });
        }
        for j in 0..n {
            v[j] = c.beta * v[j] + (1.0 - c.beta) * y[j];
        }
        a.add_scaled_row_into(i, -c.gamma * resid, &mut v);
        // w^{k+1} = y~ - d~: reuse the y buffer and swap it into w
        a.add_scaled_row_into(i, -resid, &mut y);
        std::mem::swap(&mut w, &mut y);
        flops += 6 * n as u64 + 6 * a.row_nnz(i) as u64 + 8;
        k += 1;
    }
    rec.record(k, &w, half_residual_sq(sys, &w), flops)?;
    rec.run.trace.final_x = w;
    rec.run.final_v_tilde = Some(v);
    rec.run.trace.validate()?;
    Ok(rec.run)
}

#[derive(Clone, Copy, Debug)]
struct Mat2 {
    a11: f64,
    a12: f64,
    a21: f64,
    a22: f64,
}

impl Mat2 {
    const IDENTITY: Mat2 = Mat2 { a11: 1.0, a12: 0.0, a21: 0.0, a22: 1.0 };

    fn mul(self, o: Mat2) -> Mat2 {
        Mat2 {
            a11: self.a11 * o.a11 + self.a12 * o.a21,
            a12: self.a11 * o.a12 + self.a12 * o.a22,
            a21: self.a21 * o.a11 + self.a22 * o.a21,
            a22: self.a21 * o.a12 + self.a22 * o.a22,
        }
    }

    fn det(self) -> f64 {
        self.a11 * self.a22 - self.a12 * self.a21
    }

    fn inverse(self) -> Option<Mat2> {
        let d = self.det();
        if d == 0.0 || !d.is_finite() {
            return None;
        }
        Some(Mat2 { a11: self.a22 / d, a12: -self.a12 / d, a21: -self.a21 / d, a22: self.a11 / d })
    }
}

/// Accelerated randomized Kaczmarz, sparse-efficient form.
///
/// Maintains `(v^, y^, B)` with `[v~ y~] = [v^ y^] B`, `B_0 = I`. One
/// iteration multiplies `B` by the 2x2 coefficient matrix and subtracts a
/// rank-one correction supported on the sampled row, so the work is
/// O(|A_i|) plus constants. The residual `A_i y~` is evaluated through the
/// representation as `(A_i v^) B_12 + (A_i y^) B_22`. When `|det B|` leaves
/// the [1e-12, 1e12] band the basis is folded into the vectors and reset to
/// the identity; the primal iterate is materialized only at checkpoints.
pub fn run_accel_kaczmarz_sparse(
    sys: &LinearSystemProblem,
    w0: &[f64],
    sigma: f64,
    cfg: &KaczmarzConfig,
) -> Result<KaczmarzRun> {
    check_system(sys, w0)?;
    let (m, n) = (sys.nrows(), sys.ncols());
    let a = sys.matrix();
    let mut schedule = IndexSchedule::uniform(m, cfg.seed);
    let mut coeffs = CoefficientStream::new(sigma, m);
    let mut rec = KaczmarzRecorder::new(cfg, sys)?;

    let mut cur = coeffs.advance()?;
    let mut nxt = coeffs.advance()?;

    // v^0 = v~0 = w0; y^0 = y~0 computed exactly as the dense form does.
    let mut v_hat = w0.to_vec();
    let mut y_hat: Vec<f64> =
        w0.iter().map(|&wj| cur.alpha * wj + (1.0 - cur.alpha) * wj).collect();
    let mut basis = Mat2::IDENTITY;
    let mut flops = 0u64;

    let mut w_checkpoint = w0.to_vec();
    let mut k = 0u64;
    let mut stopped = false;
    if rec.record(0, &w_checkpoint, half_residual_sq(sys, &w_checkpoint), flops)? {
        stopped = true;
    }
    while !stopped && k < cfg.budget {
        // Renormalize when the accumulated basis is drifting toward a
        // conditioning cliff (or on every iteration when forced, for the
        // transparency check).
        let det = basis.det().abs();
        if cfg.force_renormalize || !(DET_BAND_LO..=DET_BAND_HI).contains(&det) {
            for j in 0..n {
                let (vh, yh) = (v_hat[j], y_hat[j]);
                v_hat[j] = vh * basis.a11 + yh * basis.a21;
                y_hat[j] = vh * basis.a12 + yh * basis.a22;
            }
            basis = Mat2::IDENTITY;
            flops += 6 * n as u64;
            if v_hat.iter().chain(y_hat.iter()).any(|t| !t.is_finite()) {
                return Err(CdError::Renormalization(format!(
                    "non-finite state after folding basis at iteration {k}"
                )));
            }
        }

        let i = schedule.next(k)?;
        let (cols, vals) = a.row(i);
        let mut av = 0.0;
        let mut ay = 0.0;
        for (&j, &aij) in cols.iter().zip(vals) {
            av += aij * v_hat[j];
            ay += aij * y_hat[j];
        }
        let a_ytilde = av * basis.a12 + ay * basis.a22;
        let resid = a_ytilde - sys.rhs()[i];
        if !resid.is_finite() {
            return Err(CdError::Diverged { k, objective: f64::NAN });
        }

        // Materialize w^{k+1} = y~^k - resid * A_i^T at checkpoint boundaries,
        // before the basis moves on (O(n), checkpoint instrumentation only).
        let next_k = k + 1;
        let is_checkpoint = next_k % cfg.checkpoint_stride == 0 || next_k == cfg.budget;
        if is_checkpoint {
            for j in 0..n {
                w_checkpoint[j] = v_hat[j] * basis.a12 + y_hat[j] * basis.a22;
            }
            for (&j, &aij) in cols.iter().zip(vals) {
                w_checkpoint[j] -= resid * aij;
            }
        }

        let r_k = Mat2 {
            a11: cur.beta,
            a12: nxt.alpha * cur.beta,
            a21: 1.0 - cur.beta,
            a22: 1.0 - nxt.alpha * cur.beta,
        };
        basis = basis.mul(r_k);
        let inv = basis.inverse().ok_or_else(|| {
            CdError::Renormalization(format!("singular basis at iteration {k}"))
        })?;
        let s1 = cur.gamma;
        let s2 = 1.0 - nxt.alpha + nxt.alpha * cur.gamma;
        let u1 = s1 * inv.a11 + s2 * inv.a21;
        let u2 = s1 * inv.a12 + s2 * inv.a22;
        for (&j, &aij) in cols.iter().zip(vals) {
            let t = resid * aij;
            v_hat[j] -= t * u1;
            y_hat[j] -= t * u2;
        }
        flops += 8 * cols.len() as u64 + 32;

        cur = nxt;
        nxt = coeffs.advance()?;
        k = next_k;
        if is_checkpoint
            && rec.record(k, &w_checkpoint, half_residual_sq(sys, &w_checkpoint), flops)?
        {
            stopped = true;
        }
    }
    // final materialized iterate (already current when the loop ended on a
    // checkpoint, which it always does: budget and stride boundaries are
    // checkpoints)
    rec.record(k, &w_checkpoint, half_residual_sq(sys, &w_checkpoint), flops)?;
    let mut v_tilde = vec![0.0; n];
    for j in 0..n {
        v_tilde[j] = v_hat[j] * basis.a11 + y_hat[j] * basis.a21;
    }
    rec.run.trace.final_x = w_checkpoint;
    rec.run.final_v_tilde = Some(v_tilde);
    rec.run.trace.validate()?;
    Ok(rec.run)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::matrix::CsrMatrix;
    use crate::problem::generate_linear_system;
    use crate::rng::{standard_normal_vec, SplitRng};
    use approx::assert_relative_eq;

    fn identity_system(b: Vec<f64>) -> LinearSystemProblem {
        let n = b.len();
        let a = CsrMatrix::from_triplets(n, n, (0..n).map(|i| (i, i, 1.0))).unwrap();
        LinearSystemProblem::new(a, b).unwrap()
    }

    #[test]
    fn kaczmarz_step_examples() {
        let sys = identity_system(vec![3.0, 4.0]);
        assert_eq!(kaczmarz_step(&sys, &[0.0, 0.0], 0).unwrap(), vec![3.0, 0.0]);
        // already satisfied row: no movement
        assert_eq!(kaczmarz_step(&sys, &[3.0, 9.0], 0).unwrap(), vec![3.0, 9.0]);

        let s = 1.0 / 2f64.sqrt();
        let a = CsrMatrix::from_triplets(1, 2, vec![(0, 0, s), (0, 1, s)]).unwrap();
        let sys = LinearSystemProblem::new(a, vec![2f64.sqrt()]).unwrap();
        let w = kaczmarz_step(&sys, &[0.0, 0.0], 0).unwrap();
        assert_relative_eq!(w[0], 1.0, max_relative = 1e-15);
        assert_relative_eq!(w[1], 1.0, max_relative = 1e-15);
    }

    #[test]
    fn unnormalized_rows_are_rejected_at_construction() {
        let a = CsrMatrix::from_triplets(1, 1, vec![(0, 0, 2.0)]).unwrap();
        assert!(LinearSystemProblem::new(a.clone(), vec![1.0]).is_err());
        // normalize_rows rescales the equation instead
        let sys = LinearSystemProblem::normalize_rows(&a, &[4.0]).unwrap();
        assert_eq!(sys.matrix().get(0, 0), 1.0);
        assert_eq!(sys.rhs()[0], 2.0);
    }

    #[test]
    fn post_step_row_satisfaction_and_distance_monotonicity() {
        let sys = generate_linear_system(15, 10, 0.6, 42).unwrap();
        let proj = SolutionProjector::new(&sys).unwrap();
        let mut w = standard_normal_vec(&mut SplitRng::new(1), 10);
        let mut sched = IndexSchedule::uniform(15, 2);
        let mut dist = proj.distance_sq(&w).unwrap();
        for k in 0..1000 {
            let i = sched.next(k).unwrap();
            w = kaczmarz_step(&sys, &w, i).unwrap();
            let row_res = sys.matrix().row_dot(i, &w) - sys.rhs()[i];
            assert!(row_res.abs() <= 1e-10, "row residual {row_res}");
            let d = proj.distance_sq(&w).unwrap();
            assert!(d.sqrt() <= dist.sqrt() + 1e-12, "distance increased");
            dist = d;
        }
    }

    #[test]
    fn projector_examples() {
        let sys = generate_linear_system(8, 5, 1.0, 7).unwrap();
        let proj = SolutionProjector::new(&sys).unwrap();
        let w_true = sys.w_true().unwrap();
        let p = proj.project(w_true).unwrap();
        for (a, b) in p.iter().zip(w_true) {
            assert!((a - b).abs() <= 1e-12);
        }

        let sys = identity_system(vec![1.0, -2.0]);
        let p = projection_to_solution_set(&sys, &[5.0, 5.0]).unwrap();
        assert_relative_eq!(p[0], 1.0, max_relative = 1e-12);
        assert_relative_eq!(p[1], -2.0, max_relative = 1e-12);

        // A = (1, 0): project onto the line x1 = 1
        let a = CsrMatrix::from_triplets(1, 2, vec![(0, 0, 1.0)]).unwrap();
        let sys = LinearSystemProblem::new(a, vec![1.0]).unwrap();
        let p = projection_to_solution_set(&sys, &[0.0, 5.0]).unwrap();
        assert_relative_eq!(p[0], 1.0, max_relative = 1e-12);
        assert_eq!(p[1], 5.0);
    }

    #[test]
    fn single_equation_solves_in_one_iteration() {
        let sys = identity_system(vec![4.5]);
        let cfg = KaczmarzConfig::new(3, 1, 9);
        let run = run_randomized_kaczmarz(&sys, &[0.0], &cfg).unwrap();
        assert!(run.trace.gap_at(1).unwrap() <= 1e-28);

        let beta = -2.75;
        let sys = identity_system(vec![beta]);
        let run = run_accel_kaczmarz_dense(&sys, &[0.0], 0.0, &cfg).unwrap();
        assert!((run.trace.final_x[0] - beta).abs() <= 1e-15);
        assert!(run.trace.final_gap() <= 1e-20);
    }

    #[test]
    fn sparse_and_dense_accel_agree() {
        for (mi, ni, dens, sigma_from_spectrum) in
            [(30, 20, 0.5, true), (25, 40, 0.3, true), (18, 12, 1.0, false)]
        {
            let sys = generate_linear_system(mi, ni, dens, 1000 + mi as u64).unwrap();
            let sigma =
                if sigma_from_spectrum { accel_kaczmarz_sigma(&sys).unwrap() } else { 0.0 };
            let w0 = standard_normal_vec(&mut SplitRng::new(5), ni);
            let mut cfg = KaczmarzConfig::new(4000, 250, 77);
            cfg.capture_states = true;
            let dense = run_accel_kaczmarz_dense(&sys, &w0, sigma, &cfg).unwrap();
            let sparse = run_accel_kaczmarz_sparse(&sys, &w0, sigma, &cfg).unwrap();
            assert_eq!(dense.states.len(), sparse.states.len());
            for (wd, ws) in dense.states.iter().zip(&sparse.states) {
                let scale = norm2(wd).max(1.0);
                let diff = dist2_sq(wd, ws).sqrt();
                assert!(diff <= 1e-8 * scale, "state divergence {diff:e} (scale {scale:e})");
            }
            let vd = dense.final_v_tilde.unwrap();
            let vs = sparse.final_v_tilde.unwrap();
            let diff = dist2_sq(&vd, &vs).sqrt();
            assert!(diff <= 1e-8 * norm2(&vd).max(1.0), "momentum divergence {diff:e}");
        }
    }

    #[test]
    fn renormalization_is_transparent() {
        let sys = generate_linear_system(20, 15, 0.7, 3).unwrap();
        let w0 = standard_normal_vec(&mut SplitRng::new(8), 15);
        let mut base = KaczmarzConfig::new(2000, 200, 5);
        base.capture_states = true;
        let lazy = run_accel_kaczmarz_sparse(&sys, &w0, 0.0, &base).unwrap();
        let mut forced = base.clone();
        forced.force_renormalize = true;
        let eager = run_accel_kaczmarz_sparse(&sys, &w0, 0.0, &forced).unwrap();
        for (a, b) in lazy.states.iter().zip(&eager.states) {
            let diff = dist2_sq(a, b).sqrt();
            assert!(diff <= 1e-10 * norm2(a).max(1.0), "renormalization shifted iterates {diff:e}");
        }
    }

    #[test]
    fn sparse_flops_scale_with_row_support_dense_with_dimension() {
        let n = 600;
        let sys = generate_linear_system(400, n, 0.02, 12).unwrap();
        let w0 = vec![0.0; n];
        let iters = 2000u64;
        let mut cfg = KaczmarzConfig::new(iters, iters, 3);
        cfg.compute_distance_gap = false;
        let dense = run_accel_kaczmarz_dense(&sys, &w0, 0.0, &cfg).unwrap();
        let sparse = run_accel_kaczmarz_sparse(&sys, &w0, 0.0, &cfg).unwrap();
        let dense_per = dense.trace.checkpoints.last().unwrap().flops as f64 / iters as f64;
        let sparse_per = sparse.trace.checkpoints.last().unwrap().flops as f64 / iters as f64;
        let max_nnz = sys.matrix().max_row_nnz() as f64;
        assert!(dense_per >= n as f64, "dense per-iteration {dense_per}");
        assert!(sparse_per <= 16.0 * max_nnz + 48.0, "sparse per-iteration {sparse_per}");
    }
}
