//! Index-selection rules and steplength rules — the two free choices in a
//! coordinate-descent iteration.

use crate::error::{CdError, Result};
use crate::problem::LipschitzProfile;
use crate::rng::SplitRng;
use rand::seq::SliceRandom;
use rand::Rng;

/// How the update coordinate is chosen at each iteration.
///
/// Indices are 0-based internally; the cyclic rule is the textbook 1-based
/// `i_{k+1} = (i_k mod n) + 1` shifted down by one.
#[derive(Debug, Clone)]
pub enum IndexSchedule {
    /// 0, 1, ..., n-1, 0, 1, ...
    Cyclic { n: usize },
    /// Independent uniform draws ("sampling with replacement").
    UniformIid { n: usize, rng: SplitRng },
    /// A fresh uniform permutation every n iterations ("sampling without
    /// replacement"); Fisher-Yates shuffle at each epoch boundary.
    EpochShuffle { n: usize, rng: SplitRng, perm: Vec<usize> },
    /// A user-supplied pattern, repeated cyclically and validated at run
    /// time against the essentially-cyclic condition with window `t`:
    /// every window of t+1 consecutive iterations must touch all of
    /// {0, ..., n-1}.
    EssentiallyCyclic { n: usize, t: usize, pattern: Vec<usize>, window: WindowState },
}

/// Rolling multiset of the last T+1 emitted indices.
#[derive(Debug, Clone)]
pub struct WindowState {
    counts: Vec<usize>,
    buf: Vec<usize>,
    distinct: usize,
    pos: usize,
    filled: usize,
}

impl WindowState {
    fn new(n: usize, window_len: usize) -> Self {
        WindowState {
            counts: vec![0; n],
            buf: vec![0; window_len],
            distinct: 0,
            pos: 0,
            filled: 0,
        }
    }

    fn push(&mut self, i: usize) {
        if self.filled == self.buf.len() {
            let old = self.buf[self.pos];
            self.counts[old] -= 1;
            if self.counts[old] == 0 {
                self.distinct -= 1;
            }
        } else {
            self.filled += 1;
        }
        self.buf[self.pos] = i;
        if self.counts[i] == 0 {
            self.distinct += 1;
        }
        self.counts[i] += 1;
        self.pos = (self.pos + 1) % self.buf.len();
    }

    fn covers_all(&self) -> bool {
        self.distinct == self.counts.len()
    }

    fn full(&self) -> bool {
        self.filled == self.buf.len()
    }
}

impl IndexSchedule {
    pub fn cyclic(n: usize) -> Self {
        IndexSchedule::Cyclic { n }
    }

    pub fn uniform(n: usize, seed: u64) -> Self {
        IndexSchedule::UniformIid { n, rng: SplitRng::new(seed) }
    }

    pub fn epoch_shuffle(n: usize, seed: u64) -> Self {
        IndexSchedule::EpochShuffle { n, rng: SplitRng::new(seed), perm: (0..n).collect() }
    }

    /// Wrap a user pattern; rejects windows that cannot possibly cover all
    /// coordinates (T < n-1) at construction and violations at run time.
    pub fn essentially_cyclic(n: usize, t: usize, pattern: Vec<usize>) -> Result<Self> {
        if t + 1 < n {
            return Err(CdError::InvalidParameter(format!(
                "essentially-cyclic window T={t} cannot cover {n} coordinates"
            )));
        }
        if pattern.is_empty() {
            return Err(CdError::InvalidParameter("empty index pattern".into()));
        }
        if let Some(&bad) = pattern.iter().find(|&&i| i >= n) {
            return Err(CdError::IndexOutOfRange { index: bad, dim: n });
        }
        Ok(IndexSchedule::EssentiallyCyclic { n, t, pattern, window: WindowState::new(n, t + 1) })
    }

    pub fn dim(&self) -> usize {
        match self {
            IndexSchedule::Cyclic { n }
            | IndexSchedule::UniformIid { n, .. }
            | IndexSchedule::EpochShuffle { n, .. }
            | IndexSchedule::EssentiallyCyclic { n, .. } => *n,
        }
    }

    pub fn label(&self) -> &'static str {
        match self {
            IndexSchedule::Cyclic { .. } => "cyclic",
            IndexSchedule::UniformIid { .. } => "iid",
            IndexSchedule::EpochShuffle { .. } => "epochs",
            IndexSchedule::EssentiallyCyclic { .. } => "ess-cyclic",
        }
    }

    /// Index for iteration `k`. Cyclic and essentially-cyclic schedules are
    /// functions of `k`; the randomized schedules advance their own state and
    /// must be called with consecutive `k`.
    pub fn next(&mut self, k: u64) -> Result<usize> {
        match self {
            IndexSchedule::Cyclic { n } => Ok((k % *n as u64) as usize),
            IndexSchedule::UniformIid { n, rng } => Ok(rng.random_range(0..*n)),
            IndexSchedule::EpochShuffle { n, rng, perm } => {
                let pos = (k % *n as u64) as usize;
                if pos == 0 {
                    perm.shuffle(rng);
                }
                Ok(perm[pos])
            }
            IndexSchedule::EssentiallyCyclic { t, pattern, window, .. } => {
                let i = pattern[(k % pattern.len() as u64) as usize];
                window.push(i);
                if window.full() && !window.covers_all() {
                    return Err(CdError::EssentiallyCyclicViolation { k, t: *t });
                }
                Ok(i)
            }
        }
    }
}

/// Check the essentially-cyclic condition on a recorded index history:
/// for every position k >= T, the window {i_{k-T}, ..., i_k} must equal
/// {0, ..., n-1}.
pub fn essentially_cyclic_check(history: &[usize], t: usize, n: usize) -> Result<bool> {
    if t + 1 < n {
        return Err(CdError::InvalidParameter(format!(
            "window T={t} can never cover {n} coordinates (need T >= n-1)"
        )));
    }
    if history.len() < t + 1 {
        return Err(CdError::InvalidParameter(format!(
            "history of length {} is shorter than the window T+1={}",
            history.len(),
            t + 1
        )));
    }
    if let Some(&bad) = history.iter().find(|&&i| i >= n) {
        return Err(CdError::IndexOutOfRange { index: bad, dim: n });
    }
    let mut window = WindowState::new(n, t + 1);
    for &i in history {
        window.push(i);
        if window.full() && !window.covers_all() {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Steplength rules for the coordinate update.
#[derive(Debug, Clone, PartialEq)]
pub enum StepRule {
    /// `alpha = 1 / L_max`.
    FixedLmax,
    /// `alpha = 1 / L_i`.
    PerCoordinate,
    /// Exact minimization along the coordinate (quadratics: `alpha = 1/Q_ii`;
    /// Powell's problem uses its closed-form coordinate minimizer).
    ExactLineSearch,
    /// Successive over-relaxation: `(1 + omega)` times the exact step.
    OverRelaxedExact { omega: f64 },
    /// `alpha = gamma / L_max`.
    FixedFraction { gamma: f64 },
}

impl StepRule {
    pub fn over_relaxed(omega: f64) -> Result<Self> {
        if !(0.0..1.0).contains(&omega) {
            return Err(CdError::InvalidParameter("omega must lie in [0, 1)".into()));
        }
        Ok(StepRule::OverRelaxedExact { omega })
    }

    pub fn fixed_fraction(gamma: f64) -> Result<Self> {
        if gamma <= 0.0 {
            return Err(CdError::InvalidParameter("gamma must be positive".into()));
        }
        Ok(StepRule::FixedFraction { gamma })
    }

    pub fn label(&self) -> String {
        match self {
            StepRule::FixedLmax => "fixed_lmax".into(),
            StepRule::PerCoordinate => "per_coord".into(),
            StepRule::ExactLineSearch => "exact".into(),
            StepRule::OverRelaxedExact { omega } => format!("sor:{omega}"),
            StepRule::FixedFraction { gamma } => format!("fraction:{gamma}"),
        }
    }

    /// The steplength for coordinate `i`. `curvature` is the diagonal
    /// Hessian entry when the problem exposes one (required by the exact
    /// rules).
    pub fn steplength(
        &self,
        profile: &LipschitzProfile,
        curvature: Option<f64>,
        i: usize,
    ) -> Result<f64> {
        let positive = |v: f64| -> Result<f64> {
            if v > 0.0 {
                Ok(v)
            } else {
                Err(CdError::ZeroCurvature { i })
            }
        };
        match self {
            StepRule::FixedLmax => Ok(1.0 / positive(profile.l_max)?),
            StepRule::PerCoordinate => Ok(1.0 / positive(profile.per_coordinate[i])?),
            StepRule::ExactLineSearch => Ok(1.0 / positive(curvature.unwrap_or(0.0))?),
            StepRule::OverRelaxedExact { omega } => {
                Ok((1.0 + omega) / positive(curvature.unwrap_or(0.0))?)
            }
            StepRule::FixedFraction { gamma } => Ok(gamma / positive(profile.l_max)?),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::LipschitzProfile;

    #[test]
    fn cyclic_wraparound() {
        let mut s = IndexSchedule::cyclic(3);
        let seq: Vec<usize> = (0..6).map(|k| s.next(k).unwrap()).collect();
        // 0-based image of the 1-based sequence 1,2,3,1,2,3
        assert_eq!(seq, vec![0, 1, 2, 0, 1, 2]);
    }

    #[test]
    fn epoch_shuffle_is_a_permutation_each_epoch() {
        let n = 4;
        let mut s = IndexSchedule::epoch_shuffle(n, 99);
        let mut counts = vec![0usize; n];
        for k in 0..(5 * n as u64) {
            counts[s.next(k).unwrap()] += 1;
        }
        assert!(counts.iter().all(|&c| c == 5));
    }

    #[test]
    fn uniform_frequencies_concentrate() {
        let mut s = IndexSchedule::uniform(2, 7);
        let draws = 100_000;
        let mut zero = 0usize;
        for k in 0..draws {
            if s.next(k).unwrap() == 0 {
                zero += 1;
            }
        }
        let freq = zero as f64 / draws as f64;
        assert!((freq - 0.5).abs() < 0.01, "frequency {freq}");
    }

    #[test]
    fn schedules_are_reproducible() {
        let mut a = IndexSchedule::uniform(17, 5);
        let mut b = IndexSchedule::uniform(17, 5);
        for k in 0..1000 {
            assert_eq!(a.next(k).unwrap(), b.next(k).unwrap());
        }
        let mut a = IndexSchedule::epoch_shuffle(9, 5);
        let mut b = IndexSchedule::epoch_shuffle(9, 5);
        for k in 0..1000 {
            assert_eq!(a.next(k).unwrap(), b.next(k).unwrap());
        }
    }

    #[test]
    fn essentially_cyclic_validator() {
        let n = 3;
        let cyc: Vec<usize> = (0..30).map(|k| k % n).collect();
        assert!(essentially_cyclic_check(&cyc, n - 1, n).unwrap());

        let constant = vec![1usize; 20];
        assert!(!essentially_cyclic_check(&constant, 5, 2).unwrap());

        // two consecutive shuffled epochs always cover every index
        let mut s = IndexSchedule::epoch_shuffle(4, 3);
        let hist: Vec<usize> = (0..200).map(|k| s.next(k).unwrap()).collect();
        assert!(essentially_cyclic_check(&hist, 2 * 4 - 1, 4).unwrap());

        assert!(matches!(
            essentially_cyclic_check(&cyc, 1, n),
            Err(CdError::InvalidParameter(_))
        ));
    }

    #[test]
    fn essentially_cyclic_wrapper_rejects_violations() {
        // pattern covers both coordinates: fine
        let mut ok = IndexSchedule::essentially_cyclic(2, 1, vec![0, 1]).unwrap();
        for k in 0..10 {
            ok.next(k).unwrap();
        }
        // stuck on coordinate 0: violation reported as soon as the window fills
        let mut bad = IndexSchedule::essentially_cyclic(2, 2, vec![0]).unwrap();
        let mut saw_err = false;
        for k in 0..5 {
            if bad.next(k).is_err() {
                saw_err = true;
                break;
            }
        }
        assert!(saw_err);
        assert!(IndexSchedule::essentially_cyclic(4, 2, vec![0, 1, 2, 3]).is_err());
    }

    #[test]
    fn steplengths() {
        let prof = LipschitzProfile {
            per_coordinate: vec![1.0, 2.0],
            l_max: 2.0,
            l_std: 2.6,
            l_res: 2.2,
            lambda_ratio: 1.1,
            sigma: 0.3,
            has_zero_curvature: false,
        };
        assert_eq!(StepRule::FixedLmax.steplength(&prof, None, 0).unwrap(), 0.5);
        assert_eq!(StepRule::PerCoordinate.steplength(&prof, None, 1).unwrap(), 0.5);
        assert_eq!(StepRule::ExactLineSearch.steplength(&prof, Some(2.0), 1).unwrap(), 0.5);
        assert_eq!(
            StepRule::over_relaxed(0.0).unwrap().steplength(&prof, Some(2.0), 1).unwrap(),
            StepRule::ExactLineSearch.steplength(&prof, Some(2.0), 1).unwrap()
        );
        assert_eq!(
            StepRule::fixed_fraction(0.5).unwrap().steplength(&prof, None, 0).unwrap(),
            0.25
        );
        assert!(StepRule::ExactLineSearch.steplength(&prof, Some(0.0), 0).is_err());
        let zero = LipschitzProfile::uniform(2, 0.0, 0.0);
        assert!(StepRule::FixedLmax.steplength(&zero, None, 0).is_err());
    }
}
