use super::{DelayedProblem, Trajectory};
use crate::error::{Error, Result};

const ALIGN_TOL: f64 = 1e-9;

/// Uniform grid on `[t1 - tau, t2]` with `tau = delay_steps * h` and
/// `t2 - t1 = steps * h`.
///
/// Node `delay_steps` sits at `t1`, node `steps` at `t2 - tau`, and the last
/// node at `t2`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Grid {
    pub t1: f64,
    pub h: f64,
    pub delay_steps: usize,
    pub steps: usize,
}

impl Grid {
    /// Grid with `steps` intervals on `[t1, t2]`; fails unless the delay is
    /// a whole number of steps.
    pub fn new(problem: &DelayedProblem, steps: usize) -> Result<Self> {
        if steps < 2 {
            return Err(Error::Settings("need at least two intervals".into()));
        }
        let h = (problem.t2() - problem.t1()) / steps as f64;
        let m = delay_steps(problem.tau(), h)?;
        if steps < m {
            return Err(Error::Settings("grid shorter than the delay".into()));
        }
        Ok(Grid {
            t1: problem.t1(),
            h,
            delay_steps: m,
            steps,
        })
    }

    /// Recovers the grid a trajectory lives on and checks that it spans
    /// `[t1 - tau, t2]` with a commensurate step.
    pub fn of(problem: &DelayedProblem, traj: &Trajectory) -> Result<Self> {
        let h = traj.step();
        let m = delay_steps(problem.tau(), h)?;
        let scale = 1.0 + problem.t1().abs().max(problem.t2().abs());
        let expected_start = problem.t1() - problem.tau();
        if (traj.t_start() - expected_start).abs() > ALIGN_TOL * scale {
            return Err(Error::GridMismatch(format!(
                "trajectory starts at {} but the problem needs {}",
                traj.t_start(),
                expected_start
            )));
        }
        let total = traj.nodes() - 1;
        if total <= m {
            return Err(Error::GridMismatch("trajectory does not reach t1".into()));
        }
        let steps = total - m;
        let end = problem.t1() + steps as f64 * h;
        if (end - problem.t2()).abs() > 1e-7 * scale {
            return Err(Error::GridMismatch(format!(
                "trajectory ends at {end} but t2 = {}",
                problem.t2()
            )));
        }
        if traj.dim() != problem.n() {
            return Err(Error::Dimension(format!(
                "trajectory has dimension {} but the problem has n = {}",
                traj.dim(),
                problem.n()
            )));
        }
        Ok(Grid {
            t1: problem.t1(),
            h,
            delay_steps: m,
            steps,
        })
    }

    pub fn nodes(&self) -> usize {
        self.delay_steps + self.steps + 1
    }

    pub fn time(&self, i: usize) -> f64 {
        self.t1 + (i as f64 - self.delay_steps as f64) * self.h
    }

    /// Index of `t1`.
    pub fn first(&self) -> usize {
        self.delay_steps
    }

    /// Index of `t2`.
    pub fn last(&self) -> usize {
        self.delay_steps + self.steps
    }

    /// Index of `t2 - tau`, the last node of the delay-coupled regime.
    pub fn boundary(&self) -> usize {
        self.steps
    }

    pub fn t_start(&self) -> f64 {
        self.time(0)
    }
}

pub(crate) fn delay_steps(tau: f64, h: f64) -> Result<usize> {
    let ratio = tau / h;
    let m = ratio.round();
    if m < 1.0 || (ratio - m).abs() > ALIGN_TOL * ratio.max(1.0) * 1e3 {
        return Err(Error::NonCommensurate { tau, h });
    }
    Ok(m as usize)
}
