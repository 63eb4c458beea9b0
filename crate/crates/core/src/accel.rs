//! Accelerated randomized coordinate descent (Nesterov-style momentum over
//! coordinates), driven by the gamma root recursion and the (alpha, beta)
//! coefficient schedule.

use crate::error::{CdError, Result};
use crate::problem::{LipschitzProfile, QuadraticProblem};
use crate::schedule::IndexSchedule;
use crate::serial::{CheckpointRecorder, RunConfig};
use crate::trace::ConvergenceTrace;

/// One iteration's coefficient triple.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AccelCoefficients {
    pub gamma: f64,
    pub alpha: f64,
    pub beta: f64,
}

/// Larger root of `gamma^2 - gamma/n = (1 - gamma sigma / n) gamma_prev^2`.
///
/// Written as `gamma^2 + b gamma + c = 0` with
/// `b = (sigma gamma_prev^2 - 1)/n` and `c = -gamma_prev^2`. When `b > 0`
/// the subtraction `-b + sqrt(b^2 - 4c)` would cancel, so the equivalent
/// `-2c / (b + sqrt(b^2 - 4c))` is used instead; the recursion runs for
/// thousands of iterations and gamma must not lose digits.
pub fn gamma_next(gamma_prev: f64, sigma: f64, n: usize) -> f64 {
    let nf = n as f64;
    let b = (sigma * gamma_prev * gamma_prev - 1.0) / nf;
    let c = -(gamma_prev * gamma_prev);
    let disc = (b * b - 4.0 * c).sqrt();
    if b <= 0.0 {
        (-b + disc) / 2.0
    } else {
        -2.0 * c / (b + disc)
    }
}

/// Coefficients `alpha = (n - gamma sigma) / (gamma (n^2 - sigma))` and
/// `beta = 1 - gamma sigma / n` for the current gamma.
pub fn alpha_beta(gamma: f64, sigma: f64, n: usize) -> Result<AccelCoefficients> {
    let nf = n as f64;
    if nf * nf <= sigma {
        return Err(CdError::InvalidParameter(format!(
            "alpha undefined: need n^2 > sigma, got n={n}, sigma={sigma}"
        )));
    }
    if gamma <= 0.0 {
        return Err(CdError::InvalidParameter("gamma must be positive".into()));
    }
    if gamma * sigma > nf {
        return Err(CdError::InvalidParameter(format!(
            "gamma*sigma = {} exceeds n = {n}; sigma is overstated",
            gamma * sigma
        )));
    }
    let alpha = (nf - gamma * sigma) / (gamma * (nf * nf - sigma));
    let beta = 1.0 - gamma * sigma / nf;
    Ok(AccelCoefficients { gamma, alpha, beta })
}

/// Deterministic stream of (gamma_k, alpha_k, beta_k), shared by the
/// accelerated CD and accelerated Kaczmarz drivers.
#[derive(Debug, Clone)]
pub struct CoefficientStream {
    gamma_prev: f64,
    sigma: f64,
    n: usize,
}

impl CoefficientStream {
    pub fn new(sigma: f64, n: usize) -> Self {
        CoefficientStream { gamma_prev: 0.0, sigma, n }
    }

    pub fn advance(&mut self) -> Result<AccelCoefficients> {
        let gamma = gamma_next(self.gamma_prev, self.sigma, self.n);
        self.gamma_prev = gamma;
        alpha_beta(gamma, self.sigma, self.n)
    }
}

/// Accelerated randomized CD on a quadratic.
///
/// Per iteration: `y = alpha v + (1 - alpha) x`, a uniformly random
/// coordinate gradient `d = [grad f(y)]_i e_i`, then
/// `x' = y - d / L_i` and `v' = beta v + (1 - beta) y - (gamma / L_i) d`.
/// Per-coordinate constants are used unless `force_lmax` is set. `sigma`
/// must lower-bound the true modulus of strong convexity (0 is always
/// valid); an overstated sigma silently degrades convergence and is not
/// detected here.
///
/// The dense `y`/`v` updates make each iteration O(n) on top of the gradient
/// cost; that is inherent to the method in its general form.
pub fn run_accel_cd(
    problem: &QuadraticProblem,
    profile: &LipschitzProfile,
    x0: &[f64],
    sigma: f64,
    force_lmax: bool,
    cfg: &RunConfig,
) -> Result<ConvergenceTrace> {
    let n = problem.dim();
    if x0.len() != n {
        return Err(CdError::DimensionMismatch { expected: n, got: x0.len() });
    }
    if sigma < 0.0 {
        return Err(CdError::InvalidParameter("sigma must be >= 0".into()));
    }
    let q = problem.matrix();
    let b = problem.linear_term();

    let mut x = x0.to_vec();
    let mut v = x0.to_vec();
    let mut y = vec![0.0; n];
    let mut coeffs = CoefficientStream::new(sigma, n);
    let mut schedule = IndexSchedule::uniform(n, cfg.seed);
    let mut flops: u64 = 0;

    let f0 = problem.objective(&x)?;
    let mut rec = CheckpointRecorder::new(cfg, f0);

    let mut k = 0u64;
    while k < cfg.budget {
        if k % cfg.checkpoint_stride == 0 && rec.record(k, problem.objective(&x)?, flops)? {
            break;
        }
        let c = coeffs.advance()?;
        debug_assert!(c.alpha > 0.0 && c.alpha <= 1.0 + 1e-12, "alpha out of range: {}", c.alpha);
        debug_assert!((0.0..=1.0 + 1e-12).contains(&c.beta), "beta out of range: {}", c.beta);

        for j in 0..n {
            y[j] = c.alpha * v[j] + (1.0 - c.alpha) * x[j];
        }
        let i = schedule.next(k)?;
        let g = q.row_dot(i, &y) - b[i];
        if !g.is_finite() {
            return Err(CdError::Diverged { k, objective: f64::NAN });
        }
        let l_i = if force_lmax { profile.l_max } else { profile.per_coordinate[i] };
        if l_i <= 0.0 {
            return Err(CdError::ZeroCurvature { i });
        }
        for j in 0..n {
            v[j] = c.beta * v[j] + (1.0 - c.beta) * y[j];
        }
        v[i] -= (c.gamma / l_i) * g;
        std::mem::swap(&mut x, &mut y);
        x[i] -= g / l_i;
        flops += 2 * q.col_nnz(i) as u64 + 6 * n as u64 + 6;
        k += 1;
    }
    rec.record(k, problem.objective(&x)?, flops)?;
    rec.trace.final_x = x;
    rec.trace.validate()?;
    Ok(rec.trace)
}
