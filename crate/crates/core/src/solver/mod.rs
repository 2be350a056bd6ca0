//! Backward finite-difference solver for the obstacle problem
//! `min(v - g, -(∂_t + μ∂_x + ½σ²∂_xx)v - f) = 0`.
//!
//! Time stepping is a θ-scheme (Crank–Nicolson by default, preceded by two
//! fully implicit steps). The drift term is centrally differenced while the
//! cell Péclet number `|μ| dx / σ²` stays at or below 2 and upwinded beyond.
//! Each step's linear complementarity problem is solved by projected SOR.
//!
//! Edges: where the drift points into the domain the edge node follows the
//! implicit one-sided transport equation `v_t + μ v_x + f = 0`, which needs no
//! outside data; otherwise the excess `v - g` is given zero slope.

mod boundary;
mod grid;
mod surface;

pub use boundary::{extract_boundary, Boundary, BoundaryValue};
pub use grid::{build_grid, pole_offset, Grid, GridError};
pub use surface::ValueSurface;

use crate::field::FieldError;
use crate::problem::{ProblemSpec, ValidatedProblem};
use crate::report::{CheckReport, WorstTracker};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SolverError {
    #[error("PSOR did not converge at t={t} after {sweeps} sweeps (residual {residual:e})")]
    PsorNotConverged {
        t: f64,
        sweeps: usize,
        residual: f64,
    },
    #[error("non-finite coefficient at node t={t}, x={x}: {reason}")]
    NonFinite { t: f64, x: f64, reason: String },
    #[error("invalid scheme weight theta={0}")]
    InvalidTheta(f64),
}

impl From<FieldError> for SolverError {
    fn from(e: FieldError) -> Self {
        SolverError::NonFinite {
            t: e.t,
            x: e.x,
            reason: e.reason,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolverOptions<S> {
    /// 1 is fully implicit, ½ is Crank–Nicolson.
    pub theta: S,
    /// Fully implicit steps taken first from the terminal time.
    pub startup_steps: usize,
    /// Stop PSOR once the complementarity residual is below this.
    pub psor_tol: S,
    pub max_sweeps: usize,
}

impl<S: Real> Default for SolverOptions<S> {
    fn default() -> Self {
        // 1e-10 in double precision; single precision cannot resolve that.
        let psor_tol = S::lit(1e-10).max(S::lit(1e3) * S::epsilon());
        SolverOptions {
            theta: S::lit(0.5),
            startup_steps: 2,
            psor_tol,
            max_sweeps: 10_000,
        }
    }
}

impl<S: Real> SolverOptions<S> {
    pub fn with_theta(theta: S) -> Self {
        SolverOptions {
            theta,
            ..Self::default()
        }
    }

    fn theta_for_step(&self, steps_from_terminal: usize) -> S {
        if steps_from_terminal < self.startup_steps {
            S::one()
        } else {
            self.theta
        }
    }
}

/// Bookkeeping from a solve.
#[derive(Debug, Clone, PartialEq)]
pub struct SchemeMeta<S> {
    pub theta: S,
    pub startup_steps: usize,
    pub total_sweeps: usize,
    pub max_sweeps_per_step: usize,
    pub max_residual: S,
    pub upwind_nodes: usize,
}

/// Spatial operator row `l v_{j-1} + c v_j + u v_{j+1} + f` at one node.
#[derive(Debug, Clone, Copy, Default)]
pub(crate) struct Stencil<S> {
    pub lower: S,
    pub center: S,
    pub upper: S,
    pub source: S,
}

/// Operator rows at time `t` for every interior node (index 0 and N are unused).
pub(crate) fn operator_rows<S: Real>(
    spec: &ProblemSpec<S>,
    t: S,
    x_nodes: &[S],
    sigma2: &[S],
    dx: S,
    rows: &mut [Stencil<S>],
) -> Result<usize, SolverError> {
    let n = x_nodes.len() - 1;
    let two = S::lit(2.0);
    let half = S::lit(0.5);
    let mut upwinded = 0;
    for j in 1..n {
        let x = x_nodes[j];
        let mu = spec.drift().eval(t, x)?;
        let f = spec.running(t, x)?;
        if !mu.is_finite() || !f.is_finite() {
            return Err(SolverError::NonFinite {
                t: t.as_f64(),
                x: x.as_f64(),
                reason: format!("drift {mu}, running reward {f}"),
            });
        }
        let s2 = sigma2[j];
        let d = half * s2 / (dx * dx);
        // Central differencing stays monotone while |mu| dx <= sigma^2, i.e. cell
        // Peclet number |mu| dx / (sigma^2 / 2) <= 2.
        let row = if mu.abs() * dx <= s2 {
            let m = mu / (two * dx);
            Stencil {
                lower: d - m,
                center: -(d + d),
                upper: d + m,
                source: f,
            }
        } else {
            upwinded += 1;
            let m = mu.abs() / dx;
            if mu > S::zero() {
                Stencil {
                    lower: d,
                    center: -(d + d) - m,
                    upper: d + m,
                    source: f,
                }
            } else {
                Stencil {
                    lower: d + m,
                    center: -(d + d) - m,
                    upper: d,
                    source: f,
                }
            }
        };
        rows[j] = row;
    }
    Ok(upwinded)
}

/// Row used at a spatial edge node.
#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum EdgeRule<S> {
    /// `v_e - g_e = v_i - g_i` with the inner neighbour `i`.
    FlatExcess,
    /// `(1 + k) v_e - k v_i = v_e^{next} + dt f`, `k = dt |μ| / dx`.
    Transport { k: S, source: S },
}

pub(crate) fn edge_rules<S: Real>(
    spec: &ProblemSpec<S>,
    t: S,
    x_nodes: &[S],
    dx: S,
    dt: S,
) -> Result<(EdgeRule<S>, EdgeRule<S>), SolverError> {
    let n = x_nodes.len() - 1;
    let rule = |x: S, inward: bool| -> Result<EdgeRule<S>, SolverError> {
        let mu = spec.drift().eval(t, x)?;
        let f = spec.running(t, x)?;
        if !mu.is_finite() || !f.is_finite() {
            return Err(SolverError::NonFinite {
                t: t.as_f64(),
                x: x.as_f64(),
                reason: format!("drift {mu}, running reward {f} at edge"),
            });
        }
        let points_in = if inward {
            mu > S::zero()
        } else {
            mu < S::zero()
        };
        Ok(if points_in {
            EdgeRule::Transport {
                k: dt * mu.abs() / dx,
                source: dt * f,
            }
        } else {
            EdgeRule::FlatExcess
        })
    };
    Ok((rule(x_nodes[0], true)?, rule(x_nodes[n], false)?))
}

#[inline]
fn edge_update<S: Real>(rule: EdgeRule<S>, g_edge: S, v_inner: S, g_inner: S, rhs: S) -> S {
    match rule {
        EdgeRule::FlatExcess => g_edge + (v_inner - g_inner).max(S::zero()),
        EdgeRule::Transport { k, .. } => ((rhs + k * v_inner) / (S::one() + k)).max(g_edge),
    }
}

#[inline]
fn edge_residual<S: Real>(
    rule: EdgeRule<S>,
    v_edge: S,
    g_edge: S,
    v_inner: S,
    g_inner: S,
    rhs: S,
) -> S {
    let lin = match rule {
        EdgeRule::FlatExcess => (v_edge - g_edge) - (v_inner - g_inner),
        EdgeRule::Transport { k, .. } => (S::one() + k) * v_edge - k * v_inner - rhs,
    };
    lin.min(v_edge - g_edge).abs()
}

fn sigma_squared<S: Real>(spec: &ProblemSpec<S>, x_nodes: &[S]) -> Result<Vec<S>, SolverError> {
    x_nodes
        .iter()
        .map(|&x| {
            let s = spec.diffusion().eval(S::zero(), x)?;
            if s.is_finite() {
                Ok(s * s)
            } else {
                Err(SolverError::NonFinite {
                    t: 0.0,
                    x: x.as_f64(),
                    reason: "diffusion".into(),
                })
            }
        })
        .collect()
}

fn obstacle_row<S: Real>(
    spec: &ProblemSpec<S>,
    t: S,
    x_nodes: &[S],
) -> Result<Vec<S>, SolverError> {
    x_nodes
        .iter()
        .map(|&x| {
            let g = spec.terminal_reward().eval(t, x)?;
            if g.is_finite() {
                Ok(g)
            } else {
                Err(SolverError::NonFinite {
                    t: t.as_f64(),
                    x: x.as_f64(),
                    reason: "reward".into(),
                })
            }
        })
        .collect()
}

/// Right-hand side `v + (1-θ) dt L v + dt (θ f_new + (1-θ) f_old)` for interior rows.
pub(crate) fn step_rhs<S: Real>(
    v_next: &[S],
    rows_next: &[Stencil<S>],
    rows_now: &[Stencil<S>],
    theta: S,
    dt: S,
    rhs: &mut [S],
) {
    let n = v_next.len() - 1;
    let expl = (S::one() - theta) * dt;
    for j in 1..n {
        let r = rows_next[j];
        let lv = r.lower * v_next[j - 1] + r.center * v_next[j] + r.upper * v_next[j + 1];
        rhs[j] = v_next[j] + expl * (lv + r.source) + theta * dt * rows_now[j].source;
    }
}

/// Implicit matrix row `(a, b, c)` of `I - θ dt L`.
#[inline]
pub(crate) fn implicit_row<S: Real>(r: Stencil<S>, theta: S, dt: S) -> (S, S, S) {
    let k = theta * dt;
    (-k * r.lower, S::one() - k * r.center, -k * r.upper)
}

/// Edge right-hand sides from the next time level.
pub(crate) fn edge_rhs<S: Real>(edges: (EdgeRule<S>, EdgeRule<S>), v_next: &[S], rhs: &mut [S]) {
    let n = v_next.len() - 1;
    for (rule, j) in [(edges.0, 0), (edges.1, n)] {
        rhs[j] = match rule {
            EdgeRule::FlatExcess => S::zero(),
            EdgeRule::Transport { source, .. } => v_next[j] + source,
        };
    }
}

/// Complementarity residual of one step, edges included.
pub(crate) fn step_residual<S: Real>(
    v: &[S],
    g: &[S],
    rows: &[Stencil<S>],
    edges: (EdgeRule<S>, EdgeRule<S>),
    rhs: &[S],
    theta: S,
    dt: S,
) -> S {
    let n = v.len() - 1;
    let mut worst = S::zero();
    for j in 1..n {
        let (a, b, c) = implicit_row(rows[j], theta, dt);
        let lin = a * v[j - 1] + b * v[j] + c * v[j + 1] - rhs[j];
        worst = worst.max(lin.min(v[j] - g[j]).abs());
    }
    worst
        .max(edge_residual(edges.0, v[0], g[0], v[1], g[1], rhs[0]))
        .max(edge_residual(
            edges.1,
            v[n],
            g[n],
            v[n - 1],
            g[n - 1],
            rhs[n],
        ))
}

/// Projected symmetric SOR: each iteration sweeps forward then backward.
///
/// The relaxation factor comes from the Jacobi spectral radius of the
/// interior block and is scaled per row by `2 sqrt(ac) / (|a| + |c|)`, so
/// one-sided (convection-dominated) rows are relaxed with plain Gauss–Seidel.
#[allow(clippy::too_many_arguments)]
fn psor<S: Real>(
    v: &mut [S],
    g: &[S],
    rows: &[Stencil<S>],
    edges: (EdgeRule<S>, EdgeRule<S>),
    rhs: &[S],
    theta: S,
    dt: S,
    opts: &SolverOptions<S>,
    t: S,
) -> Result<(usize, S), SolverError> {
    let n = v.len() - 1;
    let two = S::lit(2.0);
    let mut rho = S::zero();
    let mut coeffs = Vec::with_capacity(n + 1);
    coeffs.push((S::zero(), S::one(), S::zero(), S::one()));
    for r in rows.iter().take(n).skip(1) {
        let (a, b, c) = implicit_row(*r, theta, dt);
        let geo = two * (a * c).abs().sqrt();
        rho = rho.max(geo / b);
        let sym = if a.abs() + c.abs() > S::zero() {
            geo / (a.abs() + c.abs())
        } else {
            S::one()
        };
        coeffs.push((a, b, c, sym));
    }
    let rho = (rho * (S::PI() / S::from_usize_lossy(n)).cos()).min(S::lit(0.999_999));
    let omega = (two / (S::one() + (S::one() - rho * rho).sqrt())).clamp(S::one(), S::lit(1.9));

    let relax = |v: &mut [S], j: usize| {
        let (a, b, c, sym) = coeffs[j];
        let w = S::one() + (omega - S::one()) * sym;
        let gs = (rhs[j] - a * v[j - 1] - c * v[j + 1]) / b;
        v[j] = (v[j] + w * (gs - v[j])).max(g[j]);
    };

    let mut residual = S::infinity();
    for sweep in 1..=opts.max_sweeps {
        v[0] = edge_update(edges.0, g[0], v[1], g[1], rhs[0]);
        for j in 1..n {
            relax(v, j);
        }
        v[n] = edge_update(edges.1, g[n], v[n - 1], g[n - 1], rhs[n]);
        for j in (1..n).rev() {
            relax(v, j);
        }
        v[0] = edge_update(edges.0, g[0], v[1], g[1], rhs[0]);
        residual = step_residual(v, g, rows, edges, rhs, theta, dt);
        if !residual.is_finite() {
            break;
        }
        if residual <= opts.psor_tol {
            return Ok((sweep, residual));
        }
    }
    Err(SolverError::PsorNotConverged {
        t: t.as_f64(),
        sweeps: opts.max_sweeps,
        residual: residual.as_f64(),
    })
}

/// Solves backward from `v(t_eff, ·) = g(t_eff, ·)` with weight `theta`.
pub fn solve_backward<S: Real>(
    problem: &ValidatedProblem<S>,
    grid: &Grid<S>,
    theta: S,
) -> Result<ValueSurface<S>, SolverError> {
    solve_backward_with(problem, grid, &SolverOptions::with_theta(theta))
}

pub fn solve_backward_with<S: Real>(
    problem: &ValidatedProblem<S>,
    grid: &Grid<S>,
    opts: &SolverOptions<S>,
) -> Result<ValueSurface<S>, SolverError> {
    if !(opts.theta >= S::zero() && opts.theta <= S::one()) {
        return Err(SolverError::InvalidTheta(opts.theta.as_f64()));
    }
    let spec = problem.spec();
    let xs = grid.x_nodes();
    let ts = grid.t_nodes();
    let nt = grid.nt();
    let nx = grid.nx();
    let dt = grid.dt();
    let dx = grid.dx();
    let sigma2 = sigma_squared(spec, xs)?;

    let mut obstacle: Vec<Vec<S>> = Vec::with_capacity(nt + 1);
    for &t in ts {
        obstacle.push(obstacle_row(spec, t, xs)?);
    }
    let mut v = vec![vec![S::zero(); nx + 1]; nt + 1];
    v[nt].clone_from(&obstacle[nt]);

    let mut rows_next = vec![Stencil::default(); nx + 1];
    let mut rows_now = vec![Stencil::default(); nx + 1];
    let mut rhs = vec![S::zero(); nx + 1];
    let mut upwind_nodes = operator_rows(spec, ts[nt], xs, &sigma2, dx, &mut rows_next)?;
    let mut meta = SchemeMeta {
        theta: opts.theta,
        startup_steps: opts.startup_steps,
        total_sweeps: 0,
        max_sweeps_per_step: 0,
        max_residual: S::zero(),
        upwind_nodes: 0,
    };

    for k in (0..nt).rev() {
        let theta = opts.theta_for_step(nt - 1 - k);
        upwind_nodes += operator_rows(spec, ts[k], xs, &sigma2, dx, &mut rows_now)?;
        let edges = edge_rules(spec, ts[k], xs, dx, dt)?;
        step_rhs(&v[k + 1], &rows_next, &rows_now, theta, dt, &mut rhs);
        edge_rhs(edges, &v[k + 1], &mut rhs);
        let g = &obstacle[k];
        let mut cur: Vec<S> = v[k + 1].iter().zip(g).map(|(&a, &b)| a.max(b)).collect();
        let (sweeps, res) = psor(&mut cur, g, &rows_now, edges, &rhs, theta, dt, opts, ts[k])?;
        meta.total_sweeps += sweeps;
        meta.max_sweeps_per_step = meta.max_sweeps_per_step.max(sweeps);
        meta.max_residual = meta.max_residual.max(res);
        v[k] = cur;
        std::mem::swap(&mut rows_next, &mut rows_now);
    }
    meta.upwind_nodes = upwind_nodes;

    Ok(ValueSurface::solved(
        grid.clone(),
        v,
        obstacle,
        meta,
        spec.clone(),
        *opts,
    ))
}

/// Discrete residual of the solved scheme on interior continuation nodes
/// (in PDE units, i.e. divided by `dt`) and `v - g` on interior stopping nodes.
///
/// PASS iff the PDE residual stays below `10 (dt + dx²) max|coefficient|`
/// and no stopping node sits more than `tol_contact` above the obstacle.
pub fn residual_complementarity<S: Real>(surface: &ValueSurface<S>) -> CheckReport {
    const NAME: &str = "residual_complementarity";
    let Some((spec, opts)) = surface.solver_context() else {
        return CheckReport::inconclusive(NAME, "surface was not produced by the solver");
    };
    let grid = surface.grid();
    let xs = grid.x_nodes();
    let ts = grid.t_nodes();
    let (nt, nx, dt, dx) = (grid.nt(), grid.nx(), grid.dt(), grid.dx());
    let sigma2 = match sigma_squared(spec, xs) {
        Ok(s) => s,
        Err(e) => return CheckReport::inconclusive(NAME, e.to_string()),
    };
    let mut rows_next = vec![Stencil::default(); nx + 1];
    let mut rows_now = vec![Stencil::default(); nx + 1];
    let mut rhs = vec![S::zero(); nx + 1];
    if let Err(e) = operator_rows(spec, ts[nt], xs, &sigma2, dx, &mut rows_next) {
        return CheckReport::inconclusive(NAME, e.to_string());
    }
    let mut coeff = S::zero();
    let mut pde = WorstTracker::new();
    let mut contact = WorstTracker::new();
    for k in (0..nt).rev() {
        let theta = opts.theta_for_step(nt - 1 - k);
        if let Err(e) = operator_rows(spec, ts[k], xs, &sigma2, dx, &mut rows_now) {
            return CheckReport::inconclusive(NAME, e.to_string());
        }
        step_rhs(
            &surface.v()[k + 1],
            &rows_next,
            &rows_now,
            theta,
            dt,
            &mut rhs,
        );
        let v = &surface.v()[k];
        for j in 1..nx {
            let x = xs[j];
            if let Ok(mu) = spec.drift().eval(ts[k], x) {
                coeff = coeff
                    .max(mu.abs())
                    .max(S::lit(0.5) * sigma2[j])
                    .max(rows_now[j].source.abs());
            }
            if surface.exercise()[k][j] {
                contact.offer(
                    (v[j] - surface.obstacle()[k][j]).as_f64(),
                    ts[k].as_f64(),
                    Some(x.as_f64()),
                );
            } else {
                let (a, b, c) = implicit_row(rows_now[j], theta, dt);
                let r = (a * v[j - 1] + b * v[j] + c * v[j + 1] - rhs[j]) / dt;
                pde.offer(r.abs().as_f64(), ts[k].as_f64(), Some(x.as_f64()));
            }
        }
        std::mem::swap(&mut rows_next, &mut rows_now);
    }
    let tol_pde = (S::lit(10.0) * (dt + dx * dx) * coeff).as_f64();
    let tol_contact = surface.tol_contact().as_f64();
    if contact.value() > tol_contact {
        return CheckReport::judge(NAME, contact.value(), tol_contact, contact.witness)
            .with_notes("stopping node above obstacle by more than tol_contact");
    }
    CheckReport::judge(NAME, pde.value(), tol_pde, pde.witness).with_notes(format!(
        "max PDE residual on continuation nodes; max(v - g) on stopping nodes = {:e}",
        contact.value()
    ))
}
