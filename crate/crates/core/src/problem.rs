//! Objective families, their gradients, proximal maps, Lipschitz profiles,
//! and the synthetic instance generators.
//!
//! Four families are built in: smooth quadratics `f(x) = x^T Q x / 2 - b^T x`
//! (dense or sparse `Q`), the linear-system dual `f(x) = ||A^T x||^2 / 2 -
//! b^T x` behind the Kaczmarz iteration, separable-regularized composites
//! `h = f + lambda * Omega`, and Powell's three-dimensional cycling example.

use crate::error::{CdError, Result};
use crate::matrix::{
    dot, ensure_finite, norm2, power_iteration_lmax, CsrMatrix, DenseSymMatrix, DenseVector,
    QuadMatrix,
};
use crate::rng::{standard_normal_vec, SplitRng};

const SYMMETRY_REL_TOL: f64 = 1e-12;

/// Smooth quadratic objective `f(x) = x^T Q x / 2 - b^T x`.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    q: QuadMatrix,
    linear_term: DenseVector,
    known_fstar: Option<f64>,
    known_xstar: Option<DenseVector>,
}

impl QuadraticProblem {
    pub fn new(
        q: QuadMatrix,
        linear_term: Option<DenseVector>,
        known_fstar: Option<f64>,
        known_xstar: Option<DenseVector>,
    ) -> Result<Self> {
        let n = q.dim();
        let b = linear_term.unwrap_or_else(|| vec![0.0; n]);
        if b.len() != n {
            return Err(CdError::DimensionMismatch { expected: n, got: b.len() });
        }
        if !q.is_symmetric(SYMMETRY_REL_TOL) {
            return Err(CdError::InvalidProblem("Q is not symmetric to 1e-12 relative".into()));
        }
        for i in 0..n {
            if q.diag(i) < 0.0 {
                return Err(CdError::InvalidProblem(format!(
                    "diagonal entry {i} is negative; Q cannot be positive semidefinite"
                )));
            }
        }
        if let Some(xs) = &known_xstar {
            if xs.len() != n {
                return Err(CdError::DimensionMismatch { expected: n, got: xs.len() });
            }
            let mut qx = vec![0.0; n];
            q.mul_vec(xs, &mut qx);
            for (qi, bi) in qx.iter_mut().zip(&b) {
                *qi -= bi;
            }
            let res = norm2(&qx);
            if res > 1e-8 * norm2(&b) + 1e-12 {
                return Err(CdError::InvalidProblem(format!(
                    "known_xstar has stationarity residual {res:e}"
                )));
            }
        }
        Ok(QuadraticProblem { q, linear_term: b, known_fstar, known_xstar })
    }

    pub fn dim(&self) -> usize {
        self.q.dim()
    }

    pub fn matrix(&self) -> &QuadMatrix {
        &self.q
    }

    pub fn linear_term(&self) -> &[f64] {
        &self.linear_term
    }

    pub fn known_fstar(&self) -> Option<f64> {
        self.known_fstar
    }

    pub fn known_xstar(&self) -> Option<&DenseVector> {
        self.known_xstar.as_ref()
    }

    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        self.check_dim(x)?;
        Ok(self.q.quadratic_value(x, &self.linear_term))
    }

    pub fn grad_component(&self, x: &[f64], i: usize) -> Result<f64> {
        self.check_dim(x)?;
        self.check_index(i)?;
        Ok(self.q.row_dot(i, x) - self.linear_term[i])
    }

    pub fn grad_full(&self, x: &[f64]) -> Result<DenseVector> {
        self.check_dim(x)?;
        Ok((0..self.dim()).map(|i| self.q.row_dot(i, x) - self.linear_term[i]).collect())
    }

    /// The normal-equation quadratic `min_w ||Aw - b||^2 / 2`, i.e.
    /// `Q = A^T A`, linear term `A^T b`, stored densely.
    pub fn normal_equations(a: &CsrMatrix, b: &[f64]) -> Result<Self> {
        if b.len() != a.nrows() {
            return Err(CdError::DimensionMismatch { expected: a.nrows(), got: b.len() });
        }
        let ad = a.to_dense();
        let mut q = ad.transpose() * &ad;
        let qt = q.transpose();
        q = (q + qt) * 0.5;
        let mut atb = vec![0.0; a.ncols()];
        a.mul_transpose_vec(b, &mut atb);
        QuadraticProblem::new(
            QuadMatrix::Dense(DenseSymMatrix::from_nalgebra(&q)?),
            Some(atb),
            None,
            None,
        )
    }

    fn check_dim(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.dim() {
            Err(CdError::DimensionMismatch { expected: self.dim(), got: x.len() })
        } else {
            Ok(())
        }
    }

    fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.dim() {
            Err(CdError::IndexOutOfRange { index: i, dim: self.dim() })
        } else {
            Ok(())
        }
    }
}

/// Row-normalized linear system `Aw = b` for the Kaczmarz family.
#[derive(Debug, Clone)]
pub struct LinearSystemProblem {
    a: CsrMatrix,
    b: DenseVector,
    w_true: Option<DenseVector>,
}

impl LinearSystemProblem {
    /// Rows must have unit 2-norm to within 1e-12.
    pub fn new(a: CsrMatrix, b: DenseVector) -> Result<Self> {
        if b.len() != a.nrows() {
            return Err(CdError::DimensionMismatch { expected: a.nrows(), got: b.len() });
        }
        for i in 0..a.nrows() {
            let nrm = a.row_norm2(i);
            if (nrm - 1.0).abs() > 1e-12 {
                return Err(CdError::InvalidProblem(format!(
                    "row {i} has 2-norm {nrm}, expected 1"
                )));
            }
        }
        Ok(LinearSystemProblem { a, b, w_true: None })
    }

    /// Rescale each row (and the matching right-hand side entry) to unit
    /// norm. The solution set is unchanged; zero rows are rejected.
    pub fn normalize_rows(a: &CsrMatrix, b: &[f64]) -> Result<Self> {
        if b.len() != a.nrows() {
            return Err(CdError::DimensionMismatch { expected: a.nrows(), got: b.len() });
        }
        let mut triplets = Vec::with_capacity(a.nnz());
        let mut b_scaled = vec![0.0; a.nrows()];
        for i in 0..a.nrows() {
            let nrm = a.row_norm2(i);
            if nrm < 1e-300 {
                return Err(CdError::InvalidProblem(format!("row {i} is zero")));
            }
            let (cols, vals) = a.row(i);
            for (&j, &v) in cols.iter().zip(vals) {
                triplets.push((i, j, v / nrm));
            }
            b_scaled[i] = b[i] / nrm;
        }
        LinearSystemProblem::new(
            CsrMatrix::from_triplets(a.nrows(), a.ncols(), triplets)?,
            b_scaled,
        )
    }

    pub fn nrows(&self) -> usize {
        self.a.nrows()
    }

    pub fn ncols(&self) -> usize {
        self.a.ncols()
    }

    pub fn matrix(&self) -> &CsrMatrix {
        &self.a
    }

    pub fn rhs(&self) -> &[f64] {
        &self.b
    }

    /// Generator certificate: a primal point with `A w_true = b`.
    pub fn w_true(&self) -> Option<&DenseVector> {
        self.w_true.as_ref()
    }

    /// Dual objective `f(x) = ||A^T x||^2 / 2 - b^T x` (x lives in R^m).
    pub fn dual_objective(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.nrows() {
            return Err(CdError::DimensionMismatch { expected: self.nrows(), got: x.len() });
        }
        let mut w = vec![0.0; self.ncols()];
        self.a.mul_transpose_vec(x, &mut w);
        Ok(0.5 * dot(&w, &w) - dot(&self.b, x))
    }

    /// `[grad f(x)]_i = A_i (A^T x) - b_i`.
    pub fn dual_grad_component(&self, x: &[f64], i: usize) -> Result<f64> {
        if x.len() != self.nrows() {
            return Err(CdError::DimensionMismatch { expected: self.nrows(), got: x.len() });
        }
        if i >= self.nrows() {
            return Err(CdError::IndexOutOfRange { index: i, dim: self.nrows() });
        }
        let mut w = vec![0.0; self.ncols()];
        self.a.mul_transpose_vec(x, &mut w);
        Ok(self.a.row_dot(i, &w) - self.b[i])
    }

    /// Least-squares residual `||A w - b||`.
    pub fn primal_residual(&self, w: &[f64]) -> f64 {
        (0..self.nrows())
            .map(|i| {
                let r = self.a.row_dot(i, w) - self.b[i];
                r * r
            })
            .sum::<f64>()
            .sqrt()
    }
}

/// Separable regularizer `Omega(x) = sum_i Omega_i(x_i)`.
#[derive(Debug, Clone, PartialEq)]
pub enum SeparableRegularizer {
    None,
    /// `Omega_i(t) = weight * |t|`.
    L1 { weight: f64 },
    /// Indicator of `[lower_i, upper_i]` per coordinate.
    Box { lower: DenseVector, upper: DenseVector },
}

impl SeparableRegularizer {
    pub fn l1(weight: f64) -> Result<Self> {
        if weight <= 0.0 {
            return Err(CdError::InvalidParameter("L1 weight must be positive".into()));
        }
        Ok(SeparableRegularizer::L1 { weight })
    }

    pub fn boxed(lower: DenseVector, upper: DenseVector) -> Result<Self> {
        if lower.len() != upper.len() {
            return Err(CdError::DimensionMismatch { expected: lower.len(), got: upper.len() });
        }
        if lower.iter().zip(&upper).any(|(l, u)| l > u) {
            return Err(CdError::InvalidParameter("box bounds require l_i <= u_i".into()));
        }
        Ok(SeparableRegularizer::Box { lower, upper })
    }

    /// `Omega(x)`; infinite outside a box.
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            SeparableRegularizer::None => 0.0,
            SeparableRegularizer::L1 { weight } => {
                weight * x.iter().map(|t| t.abs()).sum::<f64>()
            }
            SeparableRegularizer::Box { lower, upper } => {
                let inside = x
                    .iter()
                    .zip(lower.iter().zip(upper))
                    .all(|(t, (l, u))| *t >= *l && *t <= *u);
                if inside {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
        }
    }
}

/// Proximal map of `Omega_i` with damping `beta`:
/// `argmin_c (c - tau)^2 / (2 beta) + Omega_i(c)`.
///
/// Closed forms: soft threshold for L1 (threshold `beta * weight`; callers
/// following the proximal CD update pass `beta = lambda * alpha`), clamping
/// for a box, identity otherwise. `beta = 0` degenerates to the identity for
/// L1 and to the clamp for a box.
pub fn shrink(beta: f64, tau: f64, reg: &SeparableRegularizer, i: usize) -> Result<f64> {
    if beta < 0.0 {
        return Err(CdError::InvalidParameter("shrink requires beta >= 0".into()));
    }
    Ok(match reg {
        SeparableRegularizer::None => tau,
        SeparableRegularizer::L1 { weight } => {
            let t = beta * weight;
            if t == 0.0 {
                tau
            } else {
                tau.signum() * (tau.abs() - t).max(0.0)
            }
        }
        SeparableRegularizer::Box { lower, upper } => {
            if i >= lower.len() {
                return Err(CdError::IndexOutOfRange { index: i, dim: lower.len() });
            }
            tau.clamp(lower[i], upper[i])
        }
    })
}

/// Composite objective `h(x) = f(x) + lambda * Omega(x)`.
#[derive(Debug, Clone)]
pub struct CompositeProblem {
    pub smooth: QuadraticProblem,
    pub reg: SeparableRegularizer,
    pub lambda: f64,
    pub known_hstar: Option<f64>,
}

impl CompositeProblem {
    pub fn new(
        smooth: QuadraticProblem,
        reg: SeparableRegularizer,
        lambda: f64,
        known_hstar: Option<f64>,
    ) -> Result<Self> {
        if lambda < 0.0 {
            return Err(CdError::InvalidParameter("lambda must be >= 0".into()));
        }
        if let SeparableRegularizer::Box { lower, .. } = &reg {
            if lower.len() != smooth.dim() {
                return Err(CdError::DimensionMismatch {
                    expected: smooth.dim(),
                    got: lower.len(),
                });
            }
        }
        Ok(CompositeProblem { smooth, reg, lambda, known_hstar })
    }

    pub fn dim(&self) -> usize {
        self.smooth.dim()
    }

    /// `h(x)`. The regularizer term is skipped entirely when `lambda == 0`
    /// or the regularizer is `None`, so that case reproduces the smooth
    /// objective bit for bit.
    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        let f = self.smooth.objective(x)?;
        if self.lambda == 0.0 || matches!(self.reg, SeparableRegularizer::None) {
            return Ok(f);
        }
        Ok(f + self.lambda * self.reg.value(x))
    }
}

/// Powell's nonconvex example on R^3:
/// `f(x) = -(x1 x2 + x2 x3 + x1 x3) + sum_i (|x_i| - 1)_+^2`,
/// minimized at (1,1,1) and (-1,-1,-1) with value -3. Cyclic exact-step CD
/// started just outside a non-optimal vertex cycles forever.
#[derive(Debug, Clone, Default)]
pub struct PowellProblem;

impl PowellProblem {
    pub const DIM: usize = 3;
    pub const MINIMIZERS: [[f64; 3]; 2] = [[1.0, 1.0, 1.0], [-1.0, -1.0, -1.0]];
    pub const MIN_VALUE: f64 = -3.0;

    pub fn objective(&self, x: &[f64]) -> Result<f64> {
        if x.len() != Self::DIM {
            return Err(CdError::DimensionMismatch { expected: Self::DIM, got: x.len() });
        }
        let cross = x[0] * x[1] + x[1] * x[2] + x[0] * x[2];
        let penalty: f64 = x.iter().map(|t| (t.abs() - 1.0).max(0.0).powi(2)).sum();
        Ok(-cross + penalty)
    }

    pub fn grad_component(&self, x: &[f64], i: usize) -> Result<f64> {
        if x.len() != Self::DIM {
            return Err(CdError::DimensionMismatch { expected: Self::DIM, got: x.len() });
        }
        if i >= Self::DIM {
            return Err(CdError::IndexOutOfRange { index: i, dim: Self::DIM });
        }
        let others: f64 = x.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, t)| t).sum();
        let hinge = (x[i].abs() - 1.0).max(0.0);
        Ok(-others + 2.0 * hinge * sign(x[i]))
    }
}

fn sign(t: f64) -> f64 {
    if t > 0.0 {
        1.0
    } else if t < 0.0 {
        -1.0
    } else {
        0.0
    }
}

/// Exact coordinate minimizer of Powell's function.
///
/// With `s` the sum of the other two coordinates, the minimizer over
/// coordinate `i` is `sign(s) * (1 + |s| / 2)`; at the tie `s = 0` the whole
/// interval `[-1, 1]` is optimal and the midpoint 0 is returned.
pub fn powell_coordinate_min(x: &[f64], i: usize) -> Result<f64> {
    if x.len() != PowellProblem::DIM {
        return Err(CdError::DimensionMismatch { expected: PowellProblem::DIM, got: x.len() });
    }
    if i >= PowellProblem::DIM {
        return Err(CdError::IndexOutOfRange { index: i, dim: PowellProblem::DIM });
    }
    let s: f64 = x.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, t)| t).sum();
    if s == 0.0 {
        Ok(0.0)
    } else {
        Ok(sign(s) * (1.0 + s.abs() / 2.0))
    }
}

/// A smooth problem a coordinate-descent driver can run on.
#[derive(Debug, Clone, Copy)]
pub enum SmoothProblem<'a> {
    Quadratic(&'a QuadraticProblem),
    /// CD on the dual of `Aw = b`; iterates live in R^m.
    KaczmarzDual(&'a LinearSystemProblem),
    Powell(&'a PowellProblem),
}

impl<'a> SmoothProblem<'a> {
    pub fn dim(&self) -> usize {
        match self {
            SmoothProblem::Quadratic(p) => p.dim(),
            SmoothProblem::KaczmarzDual(p) => p.nrows(),
            SmoothProblem::Powell(_) => PowellProblem::DIM,
        }
    }

    pub fn objective_value(&self, x: &[f64]) -> Result<f64> {
        match self {
            SmoothProblem::Quadratic(p) => p.objective(x),
            SmoothProblem::KaczmarzDual(p) => p.dual_objective(x),
            SmoothProblem::Powell(p) => p.objective(x),
        }
    }

    pub fn component_gradient(&self, x: &[f64], i: usize) -> Result<f64> {
        match self {
            SmoothProblem::Quadratic(p) => p.grad_component(x, i),
            SmoothProblem::KaczmarzDual(p) => p.dual_grad_component(x, i),
            SmoothProblem::Powell(p) => p.grad_component(x, i),
        }
    }

    /// Vector whose i-th entry is exactly `component_gradient(x, i)`.
    pub fn full_gradient(&self, x: &[f64]) -> Result<DenseVector> {
        (0..self.dim()).map(|i| self.component_gradient(x, i)).collect()
    }

    /// Curvature along coordinate `i` (the diagonal Hessian entry), when the
    /// problem exposes one; exact-step rules divide by it. Rows of the
    /// Kaczmarz system are unit-norm, so the dual curvature is identically 1.
    pub fn coordinate_curvature(&self, i: usize) -> Option<f64> {
        match self {
            SmoothProblem::Quadratic(p) => Some(p.matrix().diag(i)),
            SmoothProblem::KaczmarzDual(_) => Some(1.0),
            SmoothProblem::Powell(_) => None,
        }
    }
}

/// Per-coordinate and global Lipschitz data for a quadratic.
///
/// `l_max` drives fixed steplengths, `l_std` the full-gradient baseline,
/// `l_res / l_max = lambda_ratio` the asynchronous delay bound, and `sigma`
/// every linear-rate envelope.
#[derive(Debug, Clone)]
pub struct LipschitzProfile {
    pub per_coordinate: DenseVector,
    pub l_max: f64,
    pub l_std: f64,
    pub l_res: f64,
    pub lambda_ratio: f64,
    /// Modulus of strong convexity; 0 when unknown, not requested, or Q is
    /// singular.
    pub sigma: f64,
    /// Some coordinate has `L_i = 0`; steplength rules that divide by `L_i`
    /// must reject such coordinates.
    pub has_zero_curvature: bool,
}

impl LipschitzProfile {
    /// Profile with `L_i = l` for all coordinates (used for the Kaczmarz
    /// dual, where normalized rows give `L_i = 1`).
    pub fn uniform(n: usize, l: f64, sigma: f64) -> Self {
        LipschitzProfile {
            per_coordinate: vec![l; n],
            l_max: l,
            l_std: l,
            l_res: l,
            lambda_ratio: 1.0,
            sigma,
            has_zero_curvature: l == 0.0,
        }
    }

    /// Powell's objective has component Lipschitz constant 2 along every
    /// coordinate (the hinge term contributes second derivative 2 outside
    /// the unit interval, the coupling term is linear).
    pub fn powell() -> Self {
        LipschitzProfile {
            per_coordinate: vec![2.0; PowellProblem::DIM],
            l_max: 2.0,
            l_std: 2.0,
            l_res: 2.0,
            lambda_ratio: 1.0,
            sigma: 0.0,
            has_zero_curvature: false,
        }
    }
}

/// Threshold below which the smallest eigenvalue is reported as 0 (singular).
const SIGMA_SINGULAR_REL: f64 = 1e-12;
/// Dimension up to which `L` comes from a full symmetric eigendecomposition.
const DENSE_EIG_LMAX: usize = 64;
/// Dimension up to which `sigma` comes from a full eigendecomposition;
/// beyond it a shifted power iteration is used (approximate).
const DENSE_EIG_SIGMA: usize = 2048;

/// Compute the Lipschitz profile of a quadratic: `L_i = Q_ii`,
/// `L_max = max_i Q_ii`, `L_res = max_j ||Q e_j||`, `L = lambda_max(Q)`
/// (dense eigendecomposition for n <= 64, else power iteration to relative
/// tolerance 1e-10), and optionally `sigma = lambda_min(Q)`.
pub fn lipschitz_profile(p: &QuadraticProblem, compute_sigma: bool) -> Result<LipschitzProfile> {
    let n = p.dim();
    let q = p.matrix();
    let per_coordinate: Vec<f64> = (0..n).map(|i| q.diag(i)).collect();
    let l_max = per_coordinate.iter().cloned().fold(0.0, f64::max);
    let has_zero_curvature = per_coordinate.iter().any(|&l| l == 0.0);
    let l_res = q.col_norms().iter().cloned().fold(0.0, f64::max);

    let mut eig_cache: Option<Vec<f64>> = None;
    let l_std = if n <= DENSE_EIG_LMAX {
        let eig = symmetric_eigenvalues(q);
        let l = eig.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        eig_cache = Some(eig);
        l
    } else {
        power_iteration_lmax(q, 1e-10, 10_000)
    };

    let sigma = if compute_sigma {
        let lam_min = match &eig_cache {
            Some(eig) => eig.iter().cloned().fold(f64::INFINITY, f64::min),
            None if n <= DENSE_EIG_SIGMA => {
                let eig = symmetric_eigenvalues(q);
                eig.iter().cloned().fold(f64::INFINITY, f64::min)
            }
            // Shifted power iteration: lambda_min = s - lambda_max(s I - Q).
            // Approximate for very large instances; exact spectra should be
            // assembled blockwise where certified values are needed.
            None => l_std - shifted_power_iteration(q, l_std),
        };
        if lam_min <= SIGMA_SINGULAR_REL * l_std.max(0.0) {
            0.0
        } else {
            lam_min
        }
    } else {
        0.0
    };

    let lambda_ratio = if l_max > 0.0 { l_res / l_max } else { 0.0 };
    Ok(LipschitzProfile {
        per_coordinate,
        l_max,
        l_std,
        l_res,
        lambda_ratio,
        sigma,
        has_zero_curvature,
    })
}

fn symmetric_eigenvalues(q: &QuadMatrix) -> Vec<f64> {
    let m = q.to_dense_nalgebra();
    nalgebra::SymmetricEigen::new(m).eigenvalues.iter().cloned().collect()
}

fn shifted_power_iteration(q: &QuadMatrix, shift: f64) -> f64 {
    let n = q.dim();
    let mut rng = SplitRng::new(0x5851_f42d_4c95_7f2d);
    let mut v = standard_normal_vec(&mut rng, n);
    let nv = norm2(&v);
    v.iter_mut().for_each(|x| *x /= nv);
    let mut qv = vec![0.0; n];
    let mut lambda_prev = 0.0;
    for _ in 0..10_000 {
        q.mul_vec(&v, &mut qv);
        // u = shift * v - Q v
        let mut lambda = 0.0;
        let mut nrm_sq = 0.0;
        for j in 0..n {
            let uj = shift * v[j] - qv[j];
            lambda += v[j] * uj;
            nrm_sq += uj * uj;
            qv[j] = uj;
        }
        let nrm = nrm_sq.sqrt();
        if nrm == 0.0 {
            return 0.0;
        }
        for (vj, uj) in v.iter_mut().zip(&qv) {
            *vj = uj / nrm;
        }
        if (lambda - lambda_prev).abs() <= 1e-10 * lambda.abs().max(f64::MIN_POSITIVE) {
            return lambda;
        }
        lambda_prev = lambda;
    }
    lambda_prev
}

/// Synthetic quadratic of the experiment protocol:
/// `Q = V_{r,eta} Sigma V_{r,eta}^T + zeta * 11^T`, where `V_{r,eta} =
/// eta V + (1 - eta) E_r`, `V` has `r` orthonormal columns (QR of a
/// standard-normal matrix), and `Sigma` is log-uniform with condition number
/// exactly `cond_sigma` and maximum entry 1. `Q` is rescaled afterwards so
/// its maximum diagonal (hence `L_max`) is 1. Deterministic per seed.
pub fn generate_synthetic(
    n: usize,
    r: usize,
    cond_sigma: f64,
    eta: f64,
    zeta: f64,
    seed: u64,
) -> Result<QuadraticProblem> {
    if n == 0 || r == 0 || r > n {
        return Err(CdError::InvalidParameter(format!(
            "require 1 <= r <= n, got r={r}, n={n}"
        )));
    }
    if !(1.0..).contains(&cond_sigma) {
        return Err(CdError::InvalidParameter("cond_sigma must be >= 1".into()));
    }
    if !(0.0..=1.0).contains(&eta) {
        return Err(CdError::InvalidParameter("eta must lie in [0, 1]".into()));
    }
    if zeta < 0.0 {
        return Err(CdError::InvalidParameter("zeta must be >= 0".into()));
    }

    let mut rng = SplitRng::new(seed);
    let gauss = nalgebra::DMatrix::from_vec(n, r, standard_normal_vec(&mut rng, n * r));
    let qr = gauss.qr();
    let mut v = qr.q();
    let rmat = qr.r();
    // Canonical sign convention: positive diagonal of R.
    for j in 0..r {
        if rmat[(j, j)] < 0.0 {
            for i in 0..n {
                v[(i, j)] = -v[(i, j)];
            }
        }
    }

    // Log-uniform diagonal with the extremes pinned, so the condition number
    // of Sigma is exactly cond_sigma and its maximum entry exactly 1.
    let mut sigma_diag = vec![1.0; r];
    if r >= 2 {
        sigma_diag[r - 1] = 1.0 / cond_sigma;
        for d in sigma_diag.iter_mut().take(r - 1).skip(1) {
            use rand::Rng;
            let u: f64 = rng.random_range(0.0..1.0);
            *d = ((u - 1.0) * cond_sigma.ln()).exp();
        }
    }

    let mut v_eta = v * eta;
    let one_minus = 1.0 - eta;
    for j in 0..r {
        v_eta[(j, j)] += one_minus;
    }

    let mut scaled = v_eta.clone();
    for j in 0..r {
        for i in 0..n {
            scaled[(i, j)] *= sigma_diag[j];
        }
    }
    let mut qmat = scaled * v_eta.transpose();
    if zeta > 0.0 {
        qmat += nalgebra::DMatrix::from_element(n, n, zeta);
    }
    // Exact symmetry (matrix products round asymmetrically).
    let qt = qmat.transpose();
    qmat = (qmat + qt) * 0.5;

    let max_diag = (0..n).map(|i| qmat[(i, i)]).fold(f64::NEG_INFINITY, f64::max);
    if !(max_diag > 0.0) {
        return Err(CdError::InvalidProblem("generated Q has nonpositive diagonal".into()));
    }
    qmat /= max_diag;

    QuadraticProblem::new(
        QuadMatrix::Dense(DenseSymMatrix::from_nalgebra(&qmat)?),
        None,
        Some(0.0),
        Some(vec![0.0; n]),
    )
}

/// Direct sum of independently generated synthetic blocks, assembled as a
/// sparse quadratic. Keeps large instances tractable while every block
/// retains the generator's structure; the exact profile (including `sigma`)
/// is computed blockwise and returned alongside the problem.
pub fn generate_synthetic_block_diagonal(
    blocks: usize,
    block_n: usize,
    r: usize,
    cond_sigma: f64,
    eta: f64,
    zeta: f64,
    seed: u64,
) -> Result<(QuadraticProblem, LipschitzProfile)> {
    if blocks == 0 {
        return Err(CdError::InvalidParameter("need at least one block".into()));
    }
    if block_n > DENSE_EIG_LMAX {
        return Err(CdError::InvalidParameter(format!(
            "block_n must be <= {DENSE_EIG_LMAX} for exact blockwise spectra"
        )));
    }
    let root = SplitRng::new(seed);
    let n = blocks * block_n;
    let mut triplets = Vec::with_capacity(blocks * block_n * block_n);
    let mut per_coordinate = Vec::with_capacity(n);
    let mut sigma = f64::INFINITY;
    let mut l_std = 0.0f64;
    let mut l_res = 0.0f64;
    for bidx in 0..blocks {
        let block = generate_synthetic(block_n, r, cond_sigma, eta, zeta, root.split(bidx as u64).key())?;
        let prof = lipschitz_profile(&block, true)?;
        sigma = sigma.min(prof.sigma);
        l_std = l_std.max(prof.l_std);
        l_res = l_res.max(prof.l_res);
        per_coordinate.extend_from_slice(&prof.per_coordinate);
        let off = bidx * block_n;
        let q = block.matrix();
        for i in 0..block_n {
            for j in 0..block_n {
                let v = q.get(i, j);
                if v != 0.0 {
                    triplets.push((off + i, off + j, v));
                }
            }
        }
    }
    let csr = CsrMatrix::from_triplets(n, n, triplets)?;
    let problem = QuadraticProblem::new(
        QuadMatrix::Sparse(csr),
        None,
        Some(0.0),
        Some(vec![0.0; n]),
    )?;
    let l_max = per_coordinate.iter().cloned().fold(0.0, f64::max);
    let has_zero_curvature = per_coordinate.iter().any(|&l| l == 0.0);
    let profile = LipschitzProfile {
        per_coordinate,
        l_max,
        l_std,
        l_res,
        lambda_ratio: if l_max > 0.0 { l_res / l_max } else { 0.0 },
        sigma: if sigma.is_finite() { sigma } else { 0.0 },
        has_zero_curvature,
    };
    Ok((problem, profile))
}

/// Sparse consistent system: ~`density * n` nonzeros per row, rows rescaled
/// to unit norm, `b = A w_true` for a stored standard-normal `w_true`.
/// Deterministic per seed; a row that comes out all-zero is resampled, with
/// failure after 100 attempts reported as an error.
pub fn generate_linear_system(
    m: usize,
    n: usize,
    density: f64,
    seed: u64,
) -> Result<LinearSystemProblem> {
    
    if m == 0 || n == 0 {
        return Err(CdError::InvalidParameter("m and n must be >= 1".into()));
    }
    if !(density > 0.0 && density <= 1.0) {
        return Err(CdError::InvalidParameter("density must lie in (0, 1]".into()));
    }
    let mut rng = SplitRng::new(seed);
    let per_row = ((density * n as f64).round() as usize).clamp(1, n);
    let mut triplets = Vec::with_capacity(m * per_row);
    for i in 0..m {
        let mut attempts = 0;
        loop {
            attempts += 1;
            if attempts > 100 {
                return Err(CdError::InvalidProblem(format!(
                    "row {i} resampled 100 times without becoming nonzero"
                )));
            }
            let mut cols: Vec<usize> = if per_row == n {
                (0..n).collect()
            } else {
                rand::seq::index::sample(&mut rng, n, per_row).into_vec()
            };
            cols.sort_unstable();
            let vals = standard_normal_vec(&mut rng, per_row);
            let nrm = norm2(&vals);
            if nrm < 1e-12 {
                continue;
            }
            for (&j, &v) in cols.iter().zip(&vals) {
                triplets.push((i, j, v / nrm));
            }
            break;
        }
    }
    let a = CsrMatrix::from_triplets(m, n, triplets)?;
    let w_true = standard_normal_vec(&mut rng, n);
    let mut b = vec![0.0; m];
    a.mul_vec(&w_true, &mut b);
    ensure_finite(&b)?;
    let mut sys = LinearSystemProblem::new(a, b)?;
    sys.w_true = Some(w_true);
    Ok(sys)
}
