//! Euler–Maruyama simulation, shared-noise couplings and a least-squares
//! Monte Carlo value oracle.
//!
//! Every path draws its normals from its own ChaCha stream, selected by the
//! path index under the master seed; the `k`-th normal of a path is therefore
//! a pure function of `(seed, path, k)`, and bundles are bit-identical for any
//! thread count.

mod coupling;
mod lsmc;

use std::io::{self, Write};

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;

use crate::field::FieldError;
use crate::problem::{StateSpace, ValidatedProblem};
use crate::scalar::Real;
use crate::solver::pole_offset;

pub use coupling::{
    comparison_report, region_exit_time, simulate_coupled, CoupledBundle, OrderStatistic, Region,
};
pub use lsmc::{value_lsmc, LsmcEstimate};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SimError {
    #[error("invalid simulation request: {0}")]
    InvalidRequest(String),
    #[error(transparent)]
    Field(#[from] FieldError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    Euler,
    /// Euler on `log X`; keeps half-line paths strictly positive.
    LogEuler,
}

/// `n_paths` trajectories on the time grid `t0 + kΔ`, `k = 0..=n_steps`.
#[derive(Debug, Clone, PartialEq)]
pub struct PathBundle<S> {
    pub t0: S,
    pub dt: S,
    pub scheme: Scheme,
    pub seed: u64,
    /// Row-major: path `i` occupies `states[i * (n_steps + 1)..(i + 1) * (n_steps + 1)]`.
    states: Vec<S>,
    n_steps: usize,
    /// First step at which the path became non-finite or hit an evaluation error.
    poisoned: Vec<Option<usize>>,
}

impl<S: Real> PathBundle<S> {
    pub fn n_paths(&self) -> usize {
        self.poisoned.len()
    }

    pub fn n_steps(&self) -> usize {
        self.n_steps
    }

    pub fn path(&self, i: usize) -> &[S] {
        let w = self.n_steps + 1;
        &self.states[i * w..(i + 1) * w]
    }

    pub fn time(&self, k: usize) -> S {
        self.t0 + self.dt * S::from_usize_lossy(k)
    }

    pub fn poisoned(&self, i: usize) -> Option<usize> {
        self.poisoned[i]
    }

    pub fn n_poisoned(&self) -> usize {
        self.poisoned.iter().filter(|p| p.is_some()).count()
    }

    /// Sample mean and (unbiased) variance at step `k` over healthy paths.
    pub fn moments(&self, k: usize) -> (S, S) {
        let xs: Vec<S> = (0..self.n_paths())
            .filter(|&i| self.poisoned[i].is_none())
            .map(|i| self.path(i)[k])
            .collect();
        let n = S::from_usize_lossy(xs.len());
        let mean = xs.iter().copied().sum::<S>() / n;
        let var = xs.iter().map(|&x| (x - mean) * (x - mean)).sum::<S>() / (n - S::one());
        (mean, var)
    }

    /// Writes `path,step,time,state` rows; poisoned steps are written as `nan`.
    pub fn write_csv<W: Write>(&self, mut w: W) -> io::Result<()> {
        writeln!(w, "path,step,time,state")?;
        for i in 0..self.n_paths() {
            for (k, x) in self.path(i).iter().enumerate() {
                writeln!(
                    w,
                    "{i},{k},{:.16e},{:.16e}",
                    self.time(k).as_f64(),
                    x.as_f64()
                )?;
            }
        }
        Ok(())
    }
}

/// Per-path normal stream.
pub(crate) fn path_rng(seed: u64, path: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(path as u64);
    rng
}

/// Step size and number of steps actually taken from `t`.
///
/// With a drift pole at `T` the grid stops at the last node at least
/// `max(Δ, 1e-6 T)` before the horizon.
pub(crate) fn step_plan<S: Real>(
    problem: &ValidatedProblem<S>,
    t: S,
    n_steps: usize,
) -> Result<(S, usize), SimError> {
    let horizon = problem.spec().horizon();
    if n_steps == 0 {
        return Err(SimError::InvalidRequest(
            "n_steps must be at least 1".into(),
        ));
    }
    if !(t >= S::zero() && t < horizon) {
        return Err(SimError::InvalidRequest(format!(
            "start time {t} outside [0, {horizon})"
        )));
    }
    let dt = (horizon - t) / S::from_usize_lossy(n_steps);
    if !problem.pole_at_horizon() {
        return Ok((dt, n_steps));
    }
    let eps = pole_offset(horizon, dt);
    let room = (horizon - eps - t) / dt;
    let taken = (room + S::lit(1e-9))
        .floor()
        .to_usize()
        .unwrap_or(0)
        .min(n_steps);
    if taken == 0 {
        return Err(SimError::InvalidRequest(format!(
            "no step fits before the pole at {horizon}"
        )));
    }
    Ok((dt, taken))
}

/// Advances one path by `taken` steps of size `dt` from `(t0, x0)`, writing
/// into `out`; returns the step at which it was poisoned, if any.
pub(crate) fn integrate<S: Real>(
    problem: &ValidatedProblem<S>,
    t0: S,
    x0: S,
    dt: S,
    normals: &[S],
    out: &mut [S],
) -> Option<usize> {
    let spec = problem.spec();
    let log_space = spec.state_space() == StateSpace::PositiveHalfLine;
    let sq = dt.sqrt();
    let half = S::lit(0.5);
    out[0] = x0;
    let mut x = x0;
    for (k, &z) in normals.iter().enumerate() {
        let t = t0 + dt * S::from_usize_lossy(k);
        let step = (|| -> Result<S, FieldError> {
            let mu = spec.drift().eval(t, x)?;
            let sigma = spec.diffusion().eval(t, x)?;
            Ok(if log_space {
                let (a, b) = (mu / x, sigma / x);
                (x.ln() + (a - half * b * b) * dt + b * sq * z).exp()
            } else {
                x + mu * dt + sigma * sq * z
            })
        })();
        match step {
            Ok(next) if next.is_finite() && (!log_space || next > S::zero()) => {
                x = next;
                out[k + 1] = x;
            }
            _ => {
                out[k + 1..].iter_mut().for_each(|v| *v = S::nan());
                return Some(k + 1);
            }
        }
    }
    None
}

pub(crate) fn normals<S: Real>(seed: u64, path: usize, n: usize) -> Vec<S> {
    let mut rng = path_rng(seed, path);
    (0..n)
        .map(|_| {
            let z: f64 = StandardNormal.sample(&mut rng);
            S::lit(z)
        })
        .collect()
}

pub(crate) fn scheme_for<S: Real>(problem: &ValidatedProblem<S>) -> Scheme {
    match problem.spec().state_space() {
        StateSpace::RealLine => Scheme::Euler,
        StateSpace::PositiveHalfLine => Scheme::LogEuler,
    }
}

pub(crate) fn check_start<S: Real>(problem: &ValidatedProblem<S>, x: S) -> Result<(), SimError> {
    if !x.is_finite()
        || (problem.spec().state_space() == StateSpace::PositiveHalfLine && x <= S::zero())
    {
        return Err(SimError::InvalidRequest(format!(
            "start state {x} outside the state space"
        )));
    }
    Ok(())
}

/// Simulates `n_paths` paths from `(t, x)` with step `(T − t) / n_steps`.
///
/// Half-line problems use [`Scheme::LogEuler`]. Paths that leave the finite
/// reals are flagged rather than aborting the run.
pub fn simulate_paths<S: Real>(
    problem: &ValidatedProblem<S>,
    t: S,
    x: S,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<PathBundle<S>, SimError> {
    check_start(problem, x)?;
    let (dt, taken) = step_plan(problem, t, n_steps)?;
    let width = taken + 1;
    let mut states = vec![S::zero(); n_paths * width];
    let poisoned: Vec<Option<usize>> = states
        .par_chunks_mut(width)
        .enumerate()
        .map(|(i, out)| integrate(problem, t, x, dt, &normals(seed, i, taken), out))
        .collect();
    Ok(PathBundle {
        t0: t,
        dt,
        scheme: scheme_for(problem),
        seed,
        states,
        n_steps: taken,
        poisoned,
    })
}
