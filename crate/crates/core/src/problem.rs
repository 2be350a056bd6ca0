//! Stopping problem definitions: validation, orientation flips and the
//! reduction of time-dependent rewards to a pure running reward.

use crate::field::{FieldError, ScalarField};
use crate::scalar::Real;
use crate::solver::Grid;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StateSpace {
    RealLine,
    PositiveHalfLine,
}

/// Side of the state space on which stopping happens.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Orientation {
    /// Stop at or below `b(t)`, continue above.
    Lower,
    /// Stop at or above `b(t)`, continue below.
    Upper,
}

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ProblemError {
    #[error("horizon must be finite and positive, got {0}")]
    InvalidHorizon(f64),
    #[error("sigma must not depend on t")]
    DiffusionDependsOnTime,
    #[error("{field} is not finite at t={t}, x={x}: {reason}")]
    NonFinite {
        field: &'static str,
        t: f64,
        x: f64,
        reason: String,
    },
    #[error("sigma is negative at x={x} (value {value})")]
    NegativeDiffusion { x: f64, value: f64 },
    #[error("probe grid leaves the state space at x={x}")]
    ProbeOutsideDomain { x: f64 },
    #[error("orientation flip needs an upper-boundary problem on the real line")]
    UnsupportedOrientation,
    #[error("reduction failed: partial of the reward is not finite at t={t}, x={x}: {reason}")]
    Reduction { t: f64, x: f64, reason: String },
}

/// One optimal stopping problem `sup_τ E[g(t+τ, X_{t+τ}) + ∫ f ds]` driven by
/// `dX = μ(t, X) dt + σ(X) dW` on `[0, T]`.
#[derive(Debug, Clone)]
pub struct ProblemSpec<S> {
    drift: ScalarField<S>,
    diffusion: ScalarField<S>,
    terminal_reward: ScalarField<S>,
    running_reward: Option<ScalarField<S>>,
    horizon: S,
    state_space: StateSpace,
    orientation: Orientation,
    pole_at_horizon: bool,
}

impl<S: Real> ProblemSpec<S> {
    /// Real-line, lower-boundary problem with no running reward.
    pub fn new(
        drift: ScalarField<S>,
        diffusion: ScalarField<S>,
        terminal_reward: ScalarField<S>,
        horizon: S,
    ) -> Result<Self, ProblemError> {
        if !(horizon > S::zero()) || !horizon.is_finite() {
            return Err(ProblemError::InvalidHorizon(horizon.as_f64()));
        }
        if diffusion.is_time_dependent() {
            return Err(ProblemError::DiffusionDependsOnTime);
        }
        Ok(ProblemSpec {
            drift,
            diffusion,
            terminal_reward,
            running_reward: None,
            horizon,
            state_space: StateSpace::RealLine,
            orientation: Orientation::Lower,
            pole_at_horizon: false,
        })
    }

    pub fn with_running_reward(mut self, f: ScalarField<S>) -> Self {
        self.running_reward = Some(f);
        self
    }

    pub fn with_state_space(mut self, s: StateSpace) -> Self {
        self.state_space = s;
        self
    }

    pub fn with_orientation(mut self, o: Orientation) -> Self {
        self.orientation = o;
        self
    }

    /// Declares that the drift is singular at `t = T` (bridge-type drifts).
    pub fn with_pole_at_horizon(mut self, pole: bool) -> Self {
        self.pole_at_horizon = pole;
        self
    }

    pub fn drift(&self) -> &ScalarField<S> {
        &self.drift
    }

    pub fn diffusion(&self) -> &ScalarField<S> {
        &self.diffusion
    }

    pub fn terminal_reward(&self) -> &ScalarField<S> {
        &self.terminal_reward
    }

    pub fn running_reward(&self) -> Option<&ScalarField<S>> {
        self.running_reward.as_ref()
    }

    pub fn horizon(&self) -> S {
        self.horizon
    }

    pub fn state_space(&self) -> StateSpace {
        self.state_space
    }

    pub fn orientation(&self) -> Orientation {
        self.orientation
    }

    pub fn declares_pole(&self) -> bool {
        self.pole_at_horizon
    }

    #[inline]
    pub fn running(&self, t: S, x: S) -> Result<S, FieldError> {
        match &self.running_reward {
            Some(f) => f.eval(t, x),
            None => Ok(S::zero()),
        }
    }

    /// Applies `x -> -x` to every coefficient and toggles the orientation.
    pub fn reflect(&self) -> Result<Self, ProblemError> {
        if self.state_space != StateSpace::RealLine {
            return Err(ProblemError::UnsupportedOrientation);
        }
        let one = S::one();
        Ok(ProblemSpec {
            drift: self.drift.reflected(-one),
            diffusion: self.diffusion.reflected(one),
            terminal_reward: self.terminal_reward.reflected(one),
            running_reward: self.running_reward.as_ref().map(|f| f.reflected(one)),
            horizon: self.horizon,
            state_space: self.state_space,
            orientation: match self.orientation {
                Orientation::Lower => Orientation::Upper,
                Orientation::Upper => Orientation::Lower,
            },
            pole_at_horizon: self.pole_at_horizon,
        })
    }
}

/// Reflects an upper-boundary problem into the equivalent lower-boundary one.
///
/// Solving the result and negating its boundary recovers the original upper
/// boundary.
pub fn flip_orientation<S: Real>(spec: &ProblemSpec<S>) -> Result<ProblemSpec<S>, ProblemError> {
    if spec.orientation != Orientation::Upper {
        return Err(ProblemError::UnsupportedOrientation);
    }
    spec.reflect()
}

/// Rewrites the problem for `w = v - g`: zero terminal reward and running
/// reward `h = f + (∂_t + μ ∂_x + ½σ² ∂_xx) g`.
///
/// The partials of `g` are probed on `probe` so that an unusable reward is
/// rejected up front rather than deep inside a solve.
pub fn reduce_to_running_reward<S: Real>(
    spec: &ProblemSpec<S>,
    probe: &Grid<S>,
) -> Result<ProblemSpec<S>, ProblemError> {
    let g = spec.terminal_reward.clone();
    let mu = spec.drift.clone();
    let sigma = spec.diffusion.clone();
    let f = spec.running_reward.clone();
    let generator = move |t: S, x: S| -> Result<S, FieldError> {
        let s = sigma.eval(t, x)?;
        let mut h =
            g.dt(t, x)? + mu.eval(t, x)? * g.dx(t, x)? + S::lit(0.5) * s * s * g.dxx(t, x)?;
        if let Some(f) = &f {
            h += f.eval(t, x)?;
        }
        if h.is_finite() {
            Ok(h)
        } else {
            Err(FieldError::at(t, x, "non-finite f + Lg"))
        }
    };
    for &t in probe.t_nodes() {
        for &x in probe.x_nodes() {
            let partials = [
                spec.terminal_reward.dt(t, x),
                spec.terminal_reward.dx(t, x),
                spec.terminal_reward.dxx(t, x),
            ];
            for p in partials {
                match p {
                    Ok(v) if v.is_finite() => {}
                    Ok(_) => {
                        return Err(ProblemError::Reduction {
                            t: t.as_f64(),
                            x: x.as_f64(),
                            reason: "non-finite partial".into(),
                        })
                    }
                    Err(e) => {
                        return Err(ProblemError::Reduction {
                            t: t.as_f64(),
                            x: x.as_f64(),
                            reason: e.reason,
                        })
                    }
                }
            }
        }
    }
    let mut h = ScalarField::new(generator).with_regularity("f + Lg");
    if !spec.drift.is_time_dependent()
        && !spec.terminal_reward.is_time_dependent()
        && spec
            .running_reward
            .as_ref()
            .is_none_or(|f| !f.is_time_dependent())
    {
        h = h.time_independent();
    }
    Ok(ProblemSpec {
        drift: spec.drift.clone(),
        diffusion: spec.diffusion.clone(),
        terminal_reward: ScalarField::constant(S::zero()),
        running_reward: Some(h),
        horizon: spec.horizon,
        state_space: spec.state_space,
        orientation: spec.orientation,
        pole_at_horizon: spec.pole_at_horizon,
    })
}

/// A problem that passed probing, with its sampled drift Lipschitz constant.
#[derive(Debug, Clone)]
pub struct ValidatedProblem<S> {
    spec: ProblemSpec<S>,
    lipschitz_estimate: S,
    pole_at_horizon: bool,
    warnings: Vec<String>,
}

pub const POLE_WARNING: &str = "drift magnitude grows unboundedly as t→T";

impl<S: Real> ValidatedProblem<S> {
    pub fn spec(&self) -> &ProblemSpec<S> {
        &self.spec
    }

    pub fn lipschitz_estimate(&self) -> S {
        self.lipschitz_estimate
    }

    /// Declared by the spec or detected by probing the drift at `t = T`.
    pub fn pole_at_horizon(&self) -> bool {
        self.pole_at_horizon
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn into_spec(self) -> ProblemSpec<S> {
        self.spec
    }
}

fn non_finite<S: Real>(field: &'static str, t: S, x: S, reason: String) -> ProblemError {
    ProblemError::NonFinite {
        field,
        t: t.as_f64(),
        x: x.as_f64(),
        reason,
    }
}

/// Probes every coefficient on `probe_grid` and samples the Lipschitz
/// constant of `x -> μ(t, x)` over neighbouring probe pairs.
pub fn validate_problem<S: Real>(
    spec: ProblemSpec<S>,
    probe_grid: &Grid<S>,
) -> Result<ValidatedProblem<S>, ProblemError> {
    let mut warnings = Vec::new();
    if spec.state_space == StateSpace::PositiveHalfLine {
        if let Some(&x) = probe_grid.x_nodes().iter().find(|&&x| x <= S::zero()) {
            return Err(ProblemError::ProbeOutsideDomain { x: x.as_f64() });
        }
    }

    let check =
        |field: &'static str, r: Result<S, FieldError>, t: S, x: S| -> Result<S, ProblemError> {
            match r {
                Ok(v) if v.is_finite() => Ok(v),
                Ok(v) => Err(non_finite(field, t, x, format!("value {v}"))),
                Err(e) => Err(non_finite(field, t, x, e.reason)),
            }
        };

    let mut zero_sigma = None;
    for &x in probe_grid.x_nodes() {
        let s = check("sigma", spec.diffusion.eval(S::zero(), x), S::zero(), x)?;
        if s < S::zero() {
            return Err(ProblemError::NegativeDiffusion {
                x: x.as_f64(),
                value: s.as_f64(),
            });
        }
        if s == S::zero() && zero_sigma.is_none() {
            zero_sigma = Some(x);
        }
    }
    if let Some(x) = zero_sigma {
        warnings.push(format!(
            "sigma vanishes at x={x}; the diffusion is degenerate there"
        ));
    }

    let mut lipschitz = S::zero();
    let dx = probe_grid.dx();
    for &t in probe_grid.t_nodes() {
        let mut prev: Option<S> = None;
        for &x in probe_grid.x_nodes() {
            let mu = check("drift", spec.drift.eval(t, x), t, x)?;
            check("terminal reward", spec.terminal_reward.eval(t, x), t, x)?;
            check("running reward", spec.running(t, x), t, x)?;
            if let Some(p) = prev {
                lipschitz = lipschitz.max((mu - p).abs() / dx);
            }
            prev = Some(mu);
        }
    }

    let horizon = spec.horizon;
    let detected = probe_grid
        .x_nodes()
        .iter()
        .any(|&x| match spec.drift.eval(horizon, x) {
            Ok(v) => !v.is_finite(),
            Err(_) => true,
        });
    let pole = spec.pole_at_horizon || detected;
    if pole {
        warnings.push(POLE_WARNING.to_string());
    }

    Ok(ValidatedProblem {
        spec,
        lipschitz_estimate: lipschitz,
        pole_at_horizon: pole,
        warnings,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    fn expr(src: &str, horizon: f64) -> ScalarField<f64> {
        ScalarField::from_expr(parse(src).unwrap(), horizon)
    }

    fn probe(t_end: f64) -> Grid<f64> {
        Grid::new(1.0, t_end, -2.0, 2.0, 10, 20).unwrap()
    }

    #[test]
    fn constant_drift_has_zero_lipschitz() {
        let spec = ProblemSpec::new(expr("0.5", 1.0), expr("1", 1.0), expr("x", 1.0), 1.0).unwrap();
        let v = validate_problem(spec, &probe(1.0)).unwrap();
        assert_eq!(v.lipschitz_estimate(), 0.0);
        assert!(v.warnings().is_empty());
        assert!(!v.pole_at_horizon());
    }

    #[test]
    fn bridge_drift_warns_about_pole() {
        let spec =
            ProblemSpec::new(expr("-x/(T-t)", 1.0), expr("1", 1.0), expr("x", 1.0), 1.0).unwrap();
        let v = validate_problem(spec, &probe(0.99)).unwrap();
        assert!(v.pole_at_horizon());
        assert!(v.warnings().iter().any(|w| w == POLE_WARNING));
        // K(t) = 1/(T - t) peaks at the last probe time
        assert!((v.lipschitz_estimate() - 100.0).abs() < 1e-6);
    }

    #[test]
    fn negative_sigma_is_rejected_at_first_probe() {
        let spec = ProblemSpec::new(expr("0", 1.0), expr("-1", 1.0), expr("x", 1.0), 1.0).unwrap();
        match validate_problem(spec, &probe(1.0)) {
            Err(ProblemError::NegativeDiffusion { x, value }) => {
                assert_eq!(x, -2.0);
                assert_eq!(value, -1.0);
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn zero_sigma_only_warns() {
        let spec =
            ProblemSpec::new(expr("0", 1.0), expr("abs(x)", 1.0), expr("x", 1.0), 1.0).unwrap();
        let v = validate_problem(spec, &probe(1.0)).unwrap();
        assert_eq!(v.warnings().len(), 1);
    }

    #[test]
    fn time_dependent_sigma_rejected() {
        let err =
            ProblemSpec::new(expr("0", 1.0), expr("t*x", 1.0), expr("x", 1.0), 1.0).unwrap_err();
        assert_eq!(err.to_string(), "sigma must not depend on t");
    }

    #[test]
    fn non_finite_probe_names_point() {
        let spec =
            ProblemSpec::new(expr("log(x)", 1.0), expr("1", 1.0), expr("x", 1.0), 1.0).unwrap();
        match validate_problem(spec, &probe(1.0)) {
            Err(ProblemError::NonFinite { field, t, x, .. }) => {
                assert_eq!(field, "drift");
                assert_eq!((t, x), (0.0, -2.0));
            }
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn half_line_probe_must_be_positive() {
        let spec = ProblemSpec::new(expr("x", 1.0), expr("x", 1.0), expr("x", 1.0), 1.0)
            .unwrap()
            .with_state_space(StateSpace::PositiveHalfLine);
        assert!(matches!(
            validate_problem(spec, &probe(1.0)),
            Err(ProblemError::ProbeOutsideDomain { .. })
        ));
    }

    #[test]
    fn flip_bridge_and_constant() {
        let bridge = ProblemSpec::new(expr("-x/(T-t)", 1.0), expr("1", 1.0), expr("x", 1.0), 1.0)
            .unwrap()
            .with_orientation(Orientation::Upper);
        let flipped = flip_orientation(&bridge).unwrap();
        assert_eq!(flipped.orientation(), Orientation::Lower);
        for &(t, x) in &[(0.0, 1.0), (0.5, -0.3), (0.9, 2.0)] {
            assert_eq!(flipped.drift().eval(t, x).unwrap(), -x / (1.0 - t));
            assert_eq!(flipped.terminal_reward().eval(t, x).unwrap(), -x);
        }
        let c = ProblemSpec::new(expr("0.7", 1.0), expr("1", 1.0), expr("x", 1.0), 1.0)
            .unwrap()
            .with_orientation(Orientation::Upper);
        assert_eq!(
            flip_orientation(&c)
                .unwrap()
                .drift()
                .eval(0.2, 3.0)
                .unwrap(),
            -0.7
        );
    }

    #[test]
    fn flip_requires_upper_real_line() {
        let lower = ProblemSpec::new(expr("0", 1.0), expr("1", 1.0), expr("x", 1.0), 1.0).unwrap();
        assert_eq!(
            flip_orientation(&lower).unwrap_err(),
            ProblemError::UnsupportedOrientation
        );
        let half = lower
            .with_orientation(Orientation::Upper)
            .with_state_space(StateSpace::PositiveHalfLine);
        assert_eq!(
            flip_orientation(&half).unwrap_err(),
            ProblemError::UnsupportedOrientation
        );
    }

    #[test]
    fn double_reflection_is_identity() {
        let spec = ProblemSpec::new(
            expr("exp(x/3) - t", 1.0),
            expr("1 + abs(x)", 1.0),
            expr("max(x, 0) + t", 1.0),
            1.0,
        )
        .unwrap()
        .with_running_reward(expr("x*t - 1", 1.0))
        .with_orientation(Orientation::Upper);
        let back = spec.reflect().unwrap().reflect().unwrap();
        assert_eq!(back.orientation(), Orientation::Upper);
        let grid = probe(1.0);
        for &t in grid.t_nodes() {
            for &x in grid.x_nodes() {
                assert_eq!(back.drift().eval(t, x), spec.drift().eval(t, x));
                assert_eq!(back.diffusion().eval(t, x), spec.diffusion().eval(t, x));
                assert_eq!(
                    back.terminal_reward().eval(t, x),
                    spec.terminal_reward().eval(t, x)
                );
                assert_eq!(back.running(t, x), spec.running(t, x));
            }
        }
    }

    #[test]
    fn reduction_examples() {
        let grid = probe(1.0);
        // g = x: h = mu
        let mu = expr("1 - t + 0.3*x", 1.0);
        let spec = ProblemSpec::new(mu.clone(), expr("2", 1.0), expr("x", 1.0), 1.0).unwrap();
        let red = reduce_to_running_reward(&spec, &grid).unwrap();
        for &(t, x) in &[(0.0, 0.0), (0.5, 1.5), (1.0, -2.0)] {
            let h = red.running(t, x).unwrap();
            // g'' comes from a central difference here, exact only up to round-off
            assert!((h - mu.eval(t, x).unwrap()).abs() < 1e-4);
            assert_eq!(red.terminal_reward().eval(t, x).unwrap(), 0.0);
        }

        // g = x^2 with declared partials, mu = 0, sigma = 1: h = 1 exactly
        let g =
            ScalarField::of_x(|x: f64| x * x).with_partials(|_, _| 0.0, |_, x| 2.0 * x, |_, _| 2.0);
        let spec = ProblemSpec::new(
            ScalarField::constant(0.0),
            ScalarField::constant(1.0),
            g,
            1.0,
        )
        .unwrap();
        let red = reduce_to_running_reward(&spec, &grid).unwrap();
        for &t in grid.t_nodes() {
            for &x in grid.x_nodes() {
                assert_eq!(red.running(t, x).unwrap(), 1.0);
            }
        }

        // g = e^x under a bridge drift
        let sigma = 0.8;
        let g =
            ScalarField::of_x(f64::exp).with_partials(|_, _| 0.0, |_, x| x.exp(), |_, x| x.exp());
        let spec =
            ProblemSpec::new(expr("-x/(T-t)", 1.0), ScalarField::constant(sigma), g, 1.0).unwrap();
        let red = reduce_to_running_reward(&spec, &probe(0.9)).unwrap();
        let (t, x) = (0.5f64, 0.7f64);
        let expected = x.exp() * (-x / (1.0 - t) + 0.5 * sigma * sigma);
        assert!((red.running(t, x).unwrap() - expected).abs() < 1e-12);
    }

    #[test]
    fn reduction_rejects_bad_reward() {
        let spec =
            ProblemSpec::new(expr("0", 1.0), expr("1", 1.0), expr("sqrt(x)", 1.0), 1.0).unwrap();
        assert!(matches!(
            reduce_to_running_reward(&spec, &probe(1.0)),
            Err(ProblemError::Reduction { .. })
        ));
    }
}
