//! Run orchestration: validate → flip → reduce → solve → boundary →
//! simulations → checks.

use std::fmt;

use serde::Serialize;
use stopbound::expr::parse;
use stopbound::*;

use crate::config::{CheckName, FamilyConfig, RegionChoice, RunConfig};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Stage {
    Config,
    Problem,
    Validate,
    Flip,
    Reduce,
    Grid,
    Solve,
    Simulate,
    Export,
}

impl fmt::Display for Stage {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            Stage::Config => "config",
            Stage::Problem => "problem",
            Stage::Validate => "validate",
            Stage::Flip => "flip",
            Stage::Reduce => "reduce",
            Stage::Grid => "grid",
            Stage::Solve => "solve",
            Stage::Simulate => "simulate",
            Stage::Export => "export",
        };
        f.write_str(s)
    }
}

#[derive(Debug, thiserror::Error)]
#[error("{stage} stage failed: {message}")]
pub struct RunError {
    pub stage: Stage,
    pub message: String,
}

fn at<E: fmt::Display>(stage: Stage) -> impl FnOnce(E) -> RunError {
    move |e| RunError {
        stage,
        message: e.to_string(),
    }
}

/// Deterministic work counters, recorded instead of wall-clock time so that
/// reports stay byte-identical across runs.
#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct WorkCounters {
    pub grid_nodes: usize,
    pub psor_sweeps: usize,
    pub psor_max_sweeps_per_step: usize,
    pub upwind_nodes: usize,
    pub path_steps: usize,
    pub coupled_path_steps: usize,
    pub lsmc_path_steps: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CouplingSummary {
    pub u: f64,
    pub t: f64,
    pub x: f64,
    pub region: String,
    pub dt: f64,
    pub statistic: f64,
    pub step: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct LsmcSummary {
    pub t: f64,
    pub x: f64,
    pub estimate: f64,
    pub standard_error: f64,
    pub degree_used: usize,
    pub fd_value: f64,
    pub warnings: Vec<String>,
}

/// Path statistics; the only outputs that depend on the seed.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SimulationSummary {
    pub seed: u64,
    pub scheme: Scheme,
    pub n_paths: usize,
    pub n_steps: usize,
    pub dt: f64,
    pub terminal_time: f64,
    pub terminal_mean: f64,
    pub terminal_var: f64,
    pub poisoned: usize,
    pub couplings: Vec<CouplingSummary>,
    pub lsmc: Option<LsmcSummary>,
}

#[derive(Debug, Clone)]
pub struct RunArtifacts {
    pub config: RunConfig,
    pub run_id: String,
    pub config_digest: String,
    /// Solved surface in original coordinates (`w = v − g` when reduced).
    pub surface: Surface64,
    /// Boundary in original coordinates and orientation.
    pub boundary: Boundary64,
    pub checks: Vec<CheckReport>,
    pub counters: WorkCounters,
    pub simulation: SimulationSummary,
    pub paths: PathBundle<f64>,
    pub warnings: Vec<String>,
}

impl RunArtifacts {
    /// Exit status contract: zero iff no requested check failed.
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| !c.failed())
    }
}

fn expr_field(text: &str, horizon: f64) -> Result<Field64, RunError> {
    Ok(ScalarField::from_expr(
        parse(text).map_err(at(Stage::Problem))?,
        horizon,
    ))
}

fn drift_of(cfg: &RunConfig) -> Result<Field64, RunError> {
    let p = &cfg.problem;
    let h = p.horizon;
    if let Some(text) = &p.drift {
        return expr_field(text, h);
    }
    let e = |s: &str| parse(s).map_err(at(Stage::Problem));
    let family = match p
        .drift_family
        .as_ref()
        .expect("validated config has a drift")
    {
        FamilyConfig::BmTimeDrift { mu } => DriftFamily::BmTimeDrift { mu: e(mu)? },
        FamilyConfig::Gbm { gamma } => DriftFamily::Gbm { gamma: e(gamma)? },
        FamilyConfig::BrownianBridge { pin, pin_time } => DriftFamily::BrownianBridge {
            pin: *pin,
            pin_time: *pin_time,
        },
        FamilyConfig::OuTimeMean { theta, m } => DriftFamily::OuTimeMean {
            theta: *theta,
            m: e(m)?,
        },
        FamilyConfig::TwoPoint { p, l, r } => DriftFamily::Filtering {
            prior: Prior::two_point(*p, *l, *r).map_err(at(Stage::Problem))?,
        },
        FamilyConfig::Gaussian { mean, var } => DriftFamily::Filtering {
            prior: Prior::gaussian(*mean, *var).map_err(at(Stage::Problem))?,
        },
        FamilyConfig::Discrete { weights, locations } => {
            let atoms = weights
                .iter()
                .copied()
                .zip(locations.iter().copied())
                .collect();
            DriftFamily::Filtering {
                prior: Prior::discrete(atoms).map_err(at(Stage::Problem))?,
            }
        }
    };
    make_drift(&family, h).map_err(at(Stage::Problem))
}

/// The problem exactly as configured, in original coordinates.
pub fn build_problem(cfg: &RunConfig) -> Result<Problem64, RunError> {
    let p = &cfg.problem;
    let h = p.horizon;
    let pole = matches!(p.drift_family, Some(FamilyConfig::BrownianBridge { pin_time, .. }) if pin_time == h);
    let mut spec = ProblemSpec::new(
        drift_of(cfg)?,
        expr_field(&p.sigma, h)?,
        expr_field(&p.reward, h)?,
        h,
    )
    .map_err(at(Stage::Problem))?
    .with_state_space(p.state_space)
    .with_orientation(p.orientation)
    .with_pole_at_horizon(pole);
    if let Some(f) = &p.running_reward {
        spec = spec.with_running_reward(expr_field(f, h)?);
    }
    Ok(spec)
}

/// Coarse grid used to probe coefficients before the solver grid exists.
fn probe_grid(cfg: &RunConfig, x_ref: f64) -> Grid64 {
    let h = cfg.problem.horizon;
    let (lo, hi) = match cfg.problem.state_space {
        StateSpace::RealLine => (x_ref - 1.0, x_ref + 1.0),
        StateSpace::PositiveHalfLine => (0.5 * x_ref, 2.0 * x_ref),
    };
    Grid::new(h, 0.99 * h, lo, hi, 8, 8).expect("probe grid is valid")
}

/// The problem handed to the solver: flipped when the boundary is upper,
/// reduced when requested. Returns it with the solver-coordinate `x_ref`.
struct Prepared {
    original: Validated64,
    solved: Validated64,
    flipped: bool,
    x_ref: f64,
}

fn prepare(cfg: &RunConfig) -> Result<Prepared, RunError> {
    let spec = build_problem(cfg)?;
    let x_ref = cfg.problem.x_ref;
    let original =
        validate_problem(spec.clone(), &probe_grid(cfg, x_ref)).map_err(at(Stage::Validate))?;
    let flipped = spec.orientation() == Orientation::Upper;
    let (mut target, x_solve) = if flipped {
        (flip_orientation(&spec).map_err(at(Stage::Flip))?, -x_ref)
    } else {
        (spec, x_ref)
    };
    let probe = probe_grid(cfg, x_solve);
    if cfg.problem.reduce {
        target = reduce_to_running_reward(&target, &probe).map_err(at(Stage::Reduce))?;
    }
    let solved = validate_problem(target, &probe).map_err(at(Stage::Validate))?;
    Ok(Prepared {
        original,
        solved,
        flipped,
        x_ref: x_solve,
    })
}

fn solver_grid(cfg: &RunConfig, prep: &Prepared) -> Result<Grid64, RunError> {
    let g = &cfg.grid;
    build_grid(&prep.solved, prep.x_ref, g.x_pad, g.nt, g.nx).map_err(at(Stage::Grid))
}

fn hypothesis_reports(
    cfg: &RunConfig,
    spec: &Problem64,
    grid: &Grid64,
    out: &mut Vec<CheckReport>,
) -> Result<(), RunError> {
    for name in &cfg.checks {
        match name {
            CheckName::GMonotone => out.push(check_g_monotone(spec.terminal_reward(), grid)),
            CheckName::MuTimeMonotoneEverywhere => out.push(check_mu_time_monotone(
                spec.drift(),
                grid,
                Scope::Everywhere,
            )),
            CheckName::MuTimeMonotoneRegion => {
                out.push(check_mu_time_monotone(spec.drift(), grid, Scope::Region))
            }
            CheckName::HMonotone => {
                let reduced = reduce_to_running_reward(spec, grid).map_err(at(Stage::Reduce))?;
                let h = reduced
                    .running_reward()
                    .expect("reduction sets a running reward");
                let r = check_h_monotone(h, grid);
                out.extend([r.overall, r.in_x, r.in_t]);
            }
            _ => {}
        }
    }
    Ok(())
}

/// Hypothesis checks only, on the grid a solve would use.
pub fn check_hypotheses(cfg: &RunConfig) -> Result<Vec<CheckReport>, RunError> {
    let prep = prepare(cfg)?;
    let grid = solver_grid(cfg, &prep)?;
    let grid = if prep.flipped { grid.reflected() } else { grid };
    let mut out = Vec::new();
    hypothesis_reports(cfg, prep.original.spec(), &grid, &mut out)?;
    Ok(out)
}

/// `v = w + g` on the nodes of a reduced solve, with the obstacle `g`.
fn unreduced(w: &Surface64, g: &Field64) -> Result<Surface64, RunError> {
    let grid = w.grid().clone();
    let obstacle: Vec<Vec<f64>> = grid
        .t_nodes()
        .iter()
        .map(|&t| {
            grid.x_nodes()
                .iter()
                .map(|&x| g.eval_finite(t, x))
                .collect::<Result<_, _>>()
        })
        .collect::<Result<_, _>>()
        .map_err(at(Stage::Solve))?;
    let v = w
        .v()
        .iter()
        .zip(&obstacle)
        .map(|(wr, gr)| wr.iter().zip(gr).map(|(a, b)| a + b).collect())
        .collect();
    Ok(ValueSurface::from_parts(grid, v, obstacle))
}

pub fn run_problem(cfg: &RunConfig) -> Result<RunArtifacts, RunError> {
    cfg.validate().map_err(at(Stage::Config))?;
    let prep = prepare(cfg)?;
    let grid = solver_grid(cfg, &prep)?;
    let opts = SolverOptions::with_theta(cfg.grid.theta);
    let solved = solve_backward_with(&prep.solved, &grid, &opts).map_err(at(Stage::Solve))?;
    let lower = extract_boundary(&solved);
    let (surface, boundary) = if prep.flipped {
        (solved.reflected(), lower.reflected())
    } else {
        (solved.clone(), lower)
    };
    let spec = prep.original.spec();
    let value_surface = if cfg.problem.reduce {
        unreduced(&surface, spec.terminal_reward())?
    } else {
        surface.clone()
    };

    let mut counters = WorkCounters {
        grid_nodes: (grid.nt() + 1) * (grid.nx() + 1),
        ..WorkCounters::default()
    };
    if let Some(m) = solved.meta() {
        counters.psor_sweeps = m.total_sweeps;
        counters.psor_max_sweeps_per_step = m.max_sweeps_per_step;
        counters.upwind_nodes = m.upwind_nodes;
    }

    let sim = &cfg.simulation;
    let x0 = cfg.problem.x_ref;
    let paths = simulate_paths(&prep.original, 0.0, x0, sim.n_paths, sim.n_steps, sim.seed)
        .map_err(at(Stage::Simulate))?;
    counters.path_steps = paths.n_paths() * paths.n_steps();
    let (terminal_mean, terminal_var) = paths.moments(paths.n_steps());

    let mut checks = Vec::new();
    let mut couplings = Vec::new();
    for (i, c) in sim.coupling.iter().enumerate() {
        let region = match c.region {
            RegionChoice::Everywhere => Region::everything(),
            RegionChoice::M => Region::negative_drift(spec.drift(), stopbound::verify::TOL_ZERO),
        };
        // Each pair gets its own stream family under the run seed.
        let seed = sim.seed.wrapping_add(1 + i as u64);
        let cb = simulate_coupled(
            &prep.original,
            c.t,
            c.u,
            c.x,
            region,
            sim.n_paths,
            sim.n_steps,
            seed,
        )
        .map_err(at(Stage::Simulate))?;
        counters.coupled_path_steps += 2 * cb.late.n_paths() * cb.late.n_steps();
        let stat = cb.order_statistic();
        couplings.push(CouplingSummary {
            u: c.u,
            t: c.t,
            x: c.x,
            region: cb.region.description.clone(),
            dt: cb.dt(),
            statistic: stat.value,
            step: stat.step,
        });
        if cfg.checks.contains(&CheckName::ComparisonOrder) {
            checks.push(comparison_report(&cb, c.c_ord));
        }
    }

    let mut lsmc = None;
    if let Some(l) = &sim.lsmc {
        let est = value_lsmc(
            &prep.original,
            l.t,
            l.x,
            l.n_paths,
            l.n_steps,
            l.basis_degree,
            sim.seed,
        )
        .map_err(at(Stage::Simulate))?;
        counters.lsmc_path_steps = l.n_paths * est.n_steps;
        let k = value_surface.grid().nearest_t(l.t);
        let fd_value = value_surface.value_at(k, l.x);
        if cfg.checks.contains(&CheckName::LsmcAgreement) {
            let tol = (3.0 * est.standard_error).max(5e-3);
            checks.push(
                CheckReport::judge(
                    "lsmc_agreement",
                    (fd_value - est.estimate).abs(),
                    tol,
                    Some(Witness {
                        t: l.t,
                        x: Some(l.x),
                    }),
                )
                .with_notes(format!(
                    "FD {fd_value:.6} vs LSMC {:.6} ± {:.6} ({} paths, {} steps)",
                    est.estimate, est.standard_error, l.n_paths, est.n_steps
                )),
            );
        }
        lsmc = Some(LsmcSummary {
            t: l.t,
            x: l.x,
            estimate: est.estimate,
            standard_error: est.standard_error,
            degree_used: est.degree_used,
            fd_value,
            warnings: est.warnings,
        });
    }

    let hgrid = surface.grid().clone();
    let mut hypotheses = Vec::new();
    hypothesis_reports(cfg, spec, &hgrid, &mut hypotheses)?;
    let mut ordered = hypotheses;
    for name in &cfg.checks {
        match name {
            CheckName::ConditionIii => ordered.push(check_condition_iii(
                &value_surface,
                spec.drift(),
                spec.diffusion(),
            )),
            CheckName::ValueTimeMonotone => ordered.push(verify_value_time_monotone(&surface)),
            CheckName::BoundaryMonotone => ordered.push(verify_boundary_monotone(&boundary)),
            CheckName::ResidualComplementarity => ordered.push(residual_complementarity(&solved)),
            CheckName::ContinuityHeuristic => ordered.push(check_continuity(&value_surface)),
            _ => {}
        }
    }
    ordered.extend(checks);

    let mut warnings: Vec<String> = prep.original.warnings().to_vec();
    if !boundary.separation_warnings.is_empty() {
        warnings.push(format!(
            "stop set is not a single interval at {} time nodes",
            boundary.separation_warnings.len()
        ));
    }
    let config_digest = cfg.digest();
    let run_id = format!("{}-{}", cfg.name, &config_digest[..12]);
    let simulation = SimulationSummary {
        seed: sim.seed,
        scheme: paths.scheme,
        n_paths: paths.n_paths(),
        n_steps: paths.n_steps(),
        dt: paths.dt,
        terminal_time: paths.time(paths.n_steps()),
        terminal_mean,
        terminal_var,
        poisoned: paths.n_poisoned(),
        couplings,
        lsmc,
    };
    Ok(RunArtifacts {
        config: cfg.clone(),
        run_id,
        config_digest,
        surface,
        boundary,
        checks: ordered,
        counters,
        simulation,
        paths,
        warnings,
    })
}
