use crate::field::FieldError;
use crate::problem::{StateSpace, ValidatedProblem};
use crate::scalar::{linspace, Real};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum GridError {
    #[error("grid needs at least 2 intervals per axis (got nt={nt}, nx={nx})")]
    TooFewNodes { nt: usize, nx: usize },
    #[error("degenerate state range [{x_min}, {x_max}]")]
    DegenerateRange { x_min: f64, x_max: f64 },
    #[error("invalid time range: end {t_end} for horizon {horizon}")]
    BadTimeRange { t_end: f64, horizon: f64 },
    #[error("probing diffusion scale: {0}")]
    Field(#[from] FieldError),
}

/// Uniform tensor grid over `[0, t_end] x [x_min, x_max]`.
///
/// `t_end` equals the horizon unless the drift has a pole there, in which
/// case it stops short by `epsilon_pole`.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<S> {
    t_nodes: Vec<S>,
    x_nodes: Vec<S>,
    dt: S,
    dx: S,
    horizon: S,
}

impl<S: Real> Grid<S> {
    pub fn new(
        horizon: S,
        t_end: S,
        x_min: S,
        x_max: S,
        nt: usize,
        nx: usize,
    ) -> Result<Self, GridError> {
        if nt < 2 || nx < 2 {
            return Err(GridError::TooFewNodes { nt, nx });
        }
        if !(x_min < x_max) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(GridError::DegenerateRange {
                x_min: x_min.as_f64(),
                x_max: x_max.as_f64(),
            });
        }
        if !(t_end > S::zero()) || t_end > horizon || !t_end.is_finite() {
            return Err(GridError::BadTimeRange {
                t_end: t_end.as_f64(),
                horizon: horizon.as_f64(),
            });
        }
        let t_nodes = linspace(S::zero(), t_end, nt);
        let x_nodes = linspace(x_min, x_max, nx);
        Ok(Grid {
            dt: t_end / S::from_usize_lossy(nt),
            dx: (x_max - x_min) / S::from_usize_lossy(nx),
            t_nodes,
            x_nodes,
            horizon,
        })
    }

    pub fn t_nodes(&self) -> &[S] {
        &self.t_nodes
    }

    pub fn x_nodes(&self) -> &[S] {
        &self.x_nodes
    }

    /// Number of time intervals.
    pub fn nt(&self) -> usize {
        self.t_nodes.len() - 1
    }

    /// Number of state intervals.
    pub fn nx(&self) -> usize {
        self.x_nodes.len() - 1
    }

    pub fn dt(&self) -> S {
        self.dt
    }

    pub fn dx(&self) -> S {
        self.dx
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    /// Last time node; the terminal condition is imposed here.
    pub fn t_eff(&self) -> S {
        *self.t_nodes.last().expect("grid has nodes")
    }

    pub fn x_min(&self) -> S {
        self.x_nodes[0]
    }

    pub fn x_max(&self) -> S {
        *self.x_nodes.last().expect("grid has nodes")
    }

    /// Same ranges with `dt` and `dx` halved `k` times.
    pub fn refined(&self, k: u32) -> Self {
        let f = 1usize << k;
        Grid::new(
            self.horizon,
            self.t_eff(),
            self.x_min(),
            self.x_max(),
            self.nt() * f,
            self.nx() * f,
        )
        .expect("refining a valid grid stays valid")
    }

    /// Grid over `[-x_max, -x_min]` whose nodes are the negated nodes in reverse order.
    pub fn reflected(&self) -> Self {
        Grid {
            t_nodes: self.t_nodes.clone(),
            x_nodes: self.x_nodes.iter().rev().map(|&x| -x).collect(),
            dt: self.dt,
            dx: self.dx,
            horizon: self.horizon,
        }
    }

    /// Index of the x-node closest to `x`.
    pub fn nearest_x(&self, x: S) -> usize {
        let j = ((x - self.x_min()) / self.dx).round();
        j.max(S::zero())
            .min(S::from_usize_lossy(self.nx()))
            .to_usize()
            .unwrap_or(0)
    }

    /// Index of the t-node closest to `t`.
    pub fn nearest_t(&self, t: S) -> usize {
        let k = (t / self.dt).round();
        k.max(S::zero())
            .min(S::from_usize_lossy(self.nt()))
            .to_usize()
            .unwrap_or(0)
    }
}

/// Pole offset used when the drift blows up at the horizon: `max(step, 1e-6 * T)`.
pub fn pole_offset<S: Real>(horizon: S, step: S) -> S {
    step.max(S::lit(1e-6) * horizon)
}

/// Builds the solver grid around `x_ref`.
///
/// The state range is `x_ref ± x_pad * s` with `s = sqrt(T) * max σ` over the
/// probes `x_ref` and `x_ref ± σ(x_ref) sqrt(T)`. On the positive half-line the
/// lower end is clipped to `dx`.
pub fn build_grid<S: Real>(
    problem: &ValidatedProblem<S>,
    x_ref: S,
    x_pad: S,
    nt: usize,
    nx: usize,
) -> Result<Grid<S>, GridError> {
    if nt < 2 || nx < 2 {
        return Err(GridError::TooFewNodes { nt, nx });
    }
    let spec = problem.spec();
    let horizon = spec.horizon();
    let sigma = spec.diffusion();
    let root_t = horizon.sqrt();
    let s0 = sigma.eval_finite(S::zero(), x_ref)?.abs();
    let mut scale = s0;
    for probe in [x_ref - s0 * root_t, x_ref + s0 * root_t] {
        if spec.state_space() == StateSpace::PositiveHalfLine && probe <= S::zero() {
            continue;
        }
        scale = scale.max(sigma.eval_finite(S::zero(), probe)?.abs());
    }
    let half = x_pad * scale * root_t;
    let mut x_min = x_ref - half;
    let x_max = x_ref + half;
    if spec.state_space() == StateSpace::PositiveHalfLine && x_min <= S::zero() {
        x_min = x_max / S::from_usize_lossy(nx + 1);
    }
    if !(half > S::zero()) || !(x_min < x_max) {
        return Err(GridError::DegenerateRange {
            x_min: x_min.as_f64(),
            x_max: x_max.as_f64(),
        });
    }
    let t_end = if problem.pole_at_horizon() {
        horizon - pole_offset(horizon, horizon / S::from_usize_lossy(nt))
    } else {
        horizon
    };
    Grid::new(horizon, t_end, x_min, x_max, nt, nx)
}
