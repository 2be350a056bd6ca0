use std::fmt;
use std::sync::Arc;

use rayon::prelude::*;

use super::{check_start, integrate, normals, step_plan, PathBundle, SimError};
use crate::field::ScalarField;
use crate::problem::ValidatedProblem;
use crate::report::{CheckReport, Witness};
use crate::scalar::Real;

type Indicator<S> = dyn Fn(S, S) -> bool + Send + Sync;

/// A set of `(t, x)` points, given by its indicator.
#[derive(Clone)]
pub struct Region<S> {
    indicator: Arc<Indicator<S>>,
    pub description: String,
}

impl<S> fmt::Debug for Region<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "Region({})", self.description)
    }
}

impl<S: Real> Region<S> {
    pub fn new<F>(description: impl Into<String>, f: F) -> Self
    where
        F: Fn(S, S) -> bool + Send + Sync + 'static,
    {
        Region {
            indicator: Arc::new(f),
            description: description.into(),
        }
    }

    pub fn everything() -> Self {
        Self::new("everything", |_, _| true)
    }

    /// `M = {μ < −tol_zero}`; points where the drift cannot be evaluated are outside.
    pub fn negative_drift(drift: &ScalarField<S>, tol_zero: S) -> Self {
        let drift = drift.clone();
        Self::new(
            format!("mu < -{tol_zero}"),
            move |t, x| matches!(drift.eval(t, x), Ok(m) if m.is_finite() && m < -tol_zero),
        )
    }

    #[inline]
    pub fn contains(&self, t: S, x: S) -> bool {
        (self.indicator)(t, x)
    }
}

/// First step `k` with `(t0 + kΔ, path[k])` outside `region`; the last step
/// index when the path never leaves.
pub fn region_exit_time<S: Real>(path: &[S], region: &Region<S>, t0: S, dt: S) -> usize {
    path.iter()
        .enumerate()
        .position(|(k, &x)| !region.contains(t0 + dt * S::from_usize_lossy(k), x))
        .unwrap_or(path.len() - 1)
}

/// Two bundles from the same state, started at `u ≤ t`, driven by identical
/// normals, with exit indices of the late bundle from the region.
#[derive(Debug, Clone)]
pub struct CoupledBundle<S> {
    pub u: S,
    pub t: S,
    pub x: S,
    pub region: Region<S>,
    pub late: PathBundle<S>,
    pub early: PathBundle<S>,
    pub exit: Vec<usize>,
}

/// Largest step-wise mean of `(X^{t,x} − X^{u,x})⁺` stopped at the exit index.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OrderStatistic<S> {
    pub value: S,
    pub step: usize,
    /// Path with the largest positive part at `step`, when that part is positive.
    pub path: Option<usize>,
    pub healthy_pairs: usize,
}

impl<S: Real> CoupledBundle<S> {
    pub fn dt(&self) -> S {
        self.late.dt
    }

    fn healthy(&self) -> Vec<usize> {
        (0..self.late.n_paths())
            .filter(|&i| self.late.poisoned(i).is_none() && self.early.poisoned(i).is_none())
            .collect()
    }

    pub fn order_statistic(&self) -> OrderStatistic<S> {
        let healthy = self.healthy();
        let n = S::from_usize_lossy(healthy.len().max(1));
        let gap = |i: usize, k: usize| {
            let j = k.min(self.exit[i]);
            (self.late.path(i)[j] - self.early.path(i)[j]).max(S::zero())
        };
        let mut best = OrderStatistic {
            value: S::zero(),
            step: 0,
            path: None,
            healthy_pairs: healthy.len(),
        };
        for k in 0..=self.late.n_steps() {
            let mean = healthy.iter().map(|&i| gap(i, k)).sum::<S>() / n;
            if mean > best.value {
                best.value = mean;
                best.step = k;
            }
        }
        if best.value > S::zero() {
            best.path = healthy.iter().copied().max_by(|&a, &b| {
                gap(a, best.step)
                    .partial_cmp(&gap(b, best.step))
                    .unwrap_or(std::cmp::Ordering::Equal)
            });
        }
        best
    }
}

/// Builds the shared-noise coupling. Both bundles take the late start's steps
/// of size `(T − t) / n_steps`.
#[allow(clippy::too_many_arguments)]
pub fn simulate_coupled<S: Real>(
    problem: &ValidatedProblem<S>,
    t: S,
    u: S,
    x: S,
    region: Region<S>,
    n_paths: usize,
    n_steps: usize,
    seed: u64,
) -> Result<CoupledBundle<S>, SimError> {
    if !(u >= S::zero() && u <= t) {
        return Err(SimError::InvalidRequest(format!(
            "coupling needs 0 <= u <= t, got u={u}, t={t}"
        )));
    }
    check_start(problem, x)?;
    let (dt, taken) = step_plan(problem, t, n_steps)?;
    let width = taken + 1;
    let mut late = vec![S::zero(); n_paths * width];
    let mut early = vec![S::zero(); n_paths * width];
    let flags: Vec<(Option<usize>, Option<usize>)> = late
        .par_chunks_mut(width)
        .zip(early.par_chunks_mut(width))
        .enumerate()
        .map(|(i, (lo, eo))| {
            let z = normals(seed, i, taken);
            (
                integrate(problem, t, x, dt, &z, lo),
                integrate(problem, u, x, dt, &z, eo),
            )
        })
        .collect();
    let scheme = super::scheme_for(problem);
    let bundle = |t0: S, states: Vec<S>, poisoned: Vec<Option<usize>>| PathBundle {
        t0,
        dt,
        scheme,
        seed,
        states,
        n_steps: taken,
        poisoned,
    };
    let late = bundle(t, late, flags.iter().map(|f| f.0).collect());
    let early = bundle(u, early, flags.iter().map(|f| f.1).collect());
    let exit = (0..n_paths)
        .map(|i| region_exit_time(late.path(i), &region, t, dt))
        .collect();
    Ok(CoupledBundle {
        u,
        t,
        x,
        region,
        late,
        early,
        exit,
    })
}

/// PASS iff the order statistic is at most `c_ord · Δ`.
pub fn comparison_report<S: Real>(cb: &CoupledBundle<S>, c_ord: f64) -> CheckReport {
    let stat = cb.order_statistic();
    let tol = c_ord * cb.dt().as_f64();
    let witness = stat.path.map(|i| {
        let j = stat.step.min(cb.exit[i]);
        Witness {
            t: cb.late.time(j).as_f64(),
            x: Some(cb.late.path(i)[j].as_f64()),
        }
    });
    let witness = witness.or(Some(Witness {
        t: cb.late.time(stat.step).as_f64(),
        x: None,
    }));
    let poisoned = cb.late.n_paths() - stat.healthy_pairs;
    let location = match stat.path {
        Some(i) => format!("worst path {i} at step {}", stat.step),
        None => "no positive gap on any path".to_string(),
    };
    CheckReport::judge("comparison_order", stat.value.as_f64(), tol, witness).with_notes(format!(
        "u={}, t={}, x={}, region {}, dt={}; {location}; {poisoned} poisoned pairs",
        cb.u,
        cb.t,
        cb.x,
        cb.region.description,
        cb.dt()
    ))
}
