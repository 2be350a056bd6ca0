//! Numerical laboratory for one-dimensional, time-inhomogeneous optimal
//! stopping problems.
//!
//! * [`problem`]: problem definitions, validation, reflection and reduction.
//! * [`expr`]: the small expression language used by config files.
//! * [`filtering`]: posterior-mean drifts from priors on an unknown drift.
//! * [`solver`]: finite-difference obstacle solver and boundary extraction.
//! * [`sde`]: Euler–Maruyama paths, shared-noise couplings and an LSMC oracle.
//! * [`verify`]: grid-scale checks of hypotheses and monotonicity conclusions.
//!
//! Everything numerical is generic over [`Real`] (`f32`/`f64`); the aliases
//! below fix the scalar to `f64`.

pub mod expr;
pub mod field;
pub mod filtering;
pub mod problem;
pub mod report;
pub mod scalar;
pub mod sde;
pub mod solver;
pub mod verify;

pub use field::{FieldError, ScalarField};
pub use filtering::{
    gaussian_drift, make_drift, posterior_drift, two_point_drift, two_point_drift_dt, DriftFamily,
    FilterError, Link, Prior, PriorKind,
};
pub use problem::{
    flip_orientation, reduce_to_running_reward, validate_problem, Orientation, ProblemError,
    ProblemSpec, StateSpace, ValidatedProblem,
};
pub use report::{CheckReport, Verdict, Witness};
pub use scalar::Real;
pub use sde::{
    comparison_report, region_exit_time, simulate_coupled, simulate_paths, value_lsmc,
    CoupledBundle, LsmcEstimate, PathBundle, Region, Scheme, SimError,
};
pub use solver::{
    build_grid, extract_boundary, residual_complementarity, solve_backward, solve_backward_with,
    Boundary, BoundaryValue, Grid, SolverError, SolverOptions, ValueSurface,
};
pub use verify::{
    check_condition_iii, check_continuity, check_g_monotone, check_h_monotone,
    check_mu_time_monotone, classify_regions, verify_boundary_monotone, verify_value_time_monotone,
    HMonotoneReport, RegionMasks, Scope,
};

pub type Field64 = ScalarField<f64>;
pub type Problem64 = ProblemSpec<f64>;
pub type Validated64 = ValidatedProblem<f64>;
pub type Grid64 = Grid<f64>;
pub type Surface64 = ValueSurface<f64>;
pub type Boundary64 = Boundary<f64>;

pub type Prior64 = Prior<f64>;

pub type Field32 = ScalarField<f32>;
pub type Problem32 = ProblemSpec<f32>;
pub type Surface32 = ValueSurface<f32>;
