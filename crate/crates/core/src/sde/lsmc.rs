use nalgebra::{DMatrix, DVector};
use rand::Rng;

use super::{path_rng, simulate_paths, SimError};
use crate::problem::ValidatedProblem;
use crate::scalar::Real;

/// Bootstrap replicates behind the standard error.
const BOOTSTRAP: usize = 200;
/// Singular-value ratio below which a regression is treated as singular.
const RANK_TOL: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct LsmcEstimate {
    pub estimate: f64,
    pub standard_error: f64,
    /// Smallest regression degree actually used across exercise dates.
    pub degree_used: usize,
    pub n_steps: usize,
    pub warnings: Vec<String>,
}

/// Least-squares fit of `y` on `1, z, …, z^degree` with `z` the standardised
/// state. Lowers the degree while the normal matrix is numerically singular.
fn regress(x: &[f64], y: &[f64], degree: usize) -> (Vec<f64>, usize, f64, f64) {
    let n = x.len() as f64;
    let mean = x.iter().sum::<f64>() / n;
    let sd = (x.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt();
    let scale = if sd > 0.0 { sd } else { 1.0 };
    let mut d = if sd > 0.0 { degree } else { 0 };
    loop {
        let m = d + 1;
        let mut a = DMatrix::<f64>::zeros(m, m);
        let mut b = DVector::<f64>::zeros(m);
        let mut phi = vec![0.0; m];
        for (&xi, &yi) in x.iter().zip(y) {
            let z = (xi - mean) / scale;
            phi[0] = 1.0;
            for p in 1..m {
                phi[p] = phi[p - 1] * z;
            }
            for r in 0..m {
                b[r] += phi[r] * yi;
                for c in r..m {
                    a[(r, c)] += phi[r] * phi[c];
                }
            }
        }
        for r in 0..m {
            for c in 0..r {
                a[(r, c)] = a[(c, r)];
            }
        }
        let svd = a.svd(true, true);
        let (hi, lo) = svd
            .singular_values
            .iter()
            .fold((0.0f64, f64::INFINITY), |(h, l), &s| (h.max(s), l.min(s)));
        if d > 0 && !(lo > RANK_TOL * hi) {
            d -= 1;
            continue;
        }
        let beta = svd
            .solve(&b, RANK_TOL * hi)
            .map(|v| v.iter().copied().collect())
            .unwrap_or_else(|_| vec![0.0; m]);
        return (beta, d, mean, scale);
    }
}

fn predict(beta: &[f64], mean: f64, scale: f64, x: f64) -> f64 {
    let z = (x - mean) / scale;
    beta.iter().rev().fold(0.0, |acc, &c| acc * z + c)
}

/// Longstaff–Schwartz estimate of the value at `(t, x)`.
///
/// Exercise is allowed at every simulation step. The continuation value is
/// regressed on all healthy paths, the running reward is integrated with the
/// left-endpoint rule, and the standard error is a bootstrap over paths.
#[allow(clippy::too_many_arguments)]
pub fn value_lsmc<S: Real>(
    problem: &ValidatedProblem<S>,
    t: S,
    x: S,
    n_paths: usize,
    n_steps: usize,
    basis_degree: usize,
    seed: u64,
) -> Result<LsmcEstimate, SimError> {
    let bundle = simulate_paths(problem, t, x, n_paths, n_steps, seed)?;
    let spec = problem.spec();
    let g = spec.terminal_reward();
    let dt = bundle.dt.as_f64();
    let steps = bundle.n_steps();
    let healthy: Vec<usize> = (0..bundle.n_paths())
        .filter(|&i| bundle.poisoned(i).is_none())
        .collect();
    let mut warnings = Vec::new();
    if healthy.len() < bundle.n_paths() {
        warnings.push(format!(
            "{} poisoned paths excluded",
            bundle.n_paths() - healthy.len()
        ));
    }
    if healthy.len() < 2 {
        return Err(SimError::InvalidRequest(
            "fewer than two healthy paths".into(),
        ));
    }
    let reward = |k: usize, i: usize| -> Result<f64, SimError> {
        Ok(g.eval_finite(bundle.time(k), bundle.path(i)[k])?.as_f64())
    };
    let running = |k: usize, i: usize| -> Result<f64, SimError> {
        Ok(match spec.running_reward() {
            Some(_) => spec.running(bundle.time(k), bundle.path(i)[k])?.as_f64() * dt,
            None => 0.0,
        })
    };

    let mut cash: Vec<f64> = healthy
        .iter()
        .map(|&i| reward(steps, i))
        .collect::<Result<_, _>>()?;
    let mut degree_used = basis_degree;
    for k in (1..steps).rev() {
        let states: Vec<f64> = healthy
            .iter()
            .map(|&i| bundle.path(i)[k].as_f64())
            .collect();
        for (c, &i) in cash.iter_mut().zip(&healthy) {
            *c += running(k, i)?;
        }
        let (beta, d, mean, scale) = regress(&states, &cash, basis_degree);
        if d < basis_degree && d < degree_used {
            warnings.push(format!(
                "regression singular at step {k}; degree reduced to {d}"
            ));
        }
        degree_used = degree_used.min(d);
        for (j, &i) in healthy.iter().enumerate() {
            let stop = reward(k, i)?;
            if stop > predict(&beta, mean, scale, states[j]) {
                cash[j] = stop;
            }
        }
    }
    for (c, &i) in cash.iter_mut().zip(&healthy) {
        *c += running(0, i)?;
    }

    let n = cash.len();
    let continuation = cash.iter().sum::<f64>() / n as f64;
    let immediate = g.eval_finite(t, x)?.as_f64();
    let estimate = continuation.max(immediate);

    let mut rng = path_rng(seed ^ 0x9e37_79b9_7f4a_7c15, usize::MAX);
    let means: Vec<f64> = (0..BOOTSTRAP)
        .map(|_| {
            let s: f64 = (0..n).map(|_| cash[rng.random_range(0..n)]).sum();
            (s / n as f64).max(immediate)
        })
        .collect();
    let mb = means.iter().sum::<f64>() / BOOTSTRAP as f64;
    let standard_error =
        (means.iter().map(|m| (m - mb) * (m - mb)).sum::<f64>() / (BOOTSTRAP - 1) as f64).sqrt();
    Ok(LsmcEstimate {
        estimate,
        standard_error,
        degree_used,
        n_steps: steps,
        warnings,
    })
}
