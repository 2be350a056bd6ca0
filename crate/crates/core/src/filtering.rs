//! Posterior-mean drifts for a Brownian motion with an unknown drift `h(Y)`.
//!
//! Observing `X_t = h(Y) t + W_t` with prior `Y ~ ν`, the drift seen in the
//! observation filtration is
//!
//! ```text
//! f(t, x) = ∫ h(y) e^{xy − y²t/2} ν(dy) / ∫ e^{xy − y²t/2} ν(dy).
//! ```
//!
//! All likelihood ratios are computed in log space with the largest exponent
//! subtracted, so large `x·y` never overflows.

use std::fmt;
use std::sync::Arc;

use crate::expr::{Expr, Var};
use crate::field::{FieldError, ScalarField};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum FilterError {
    #[error("invalid prior: {0}")]
    InvalidPrior(String),
    #[error("invalid drift family: {0}")]
    InvalidFamily(String),
    #[error("posterior normaliser underflowed at t={t}, x={x}")]
    Underflow { t: f64, x: f64 },
}

type LinkFn<S> = dyn Fn(S) -> S + Send + Sync;

/// Function applied to the unknown before it acts as a drift.
#[derive(Clone, Default)]
pub enum Link<S> {
    #[default]
    Identity,
    Custom {
        name: String,
        f: Arc<LinkFn<S>>,
    },
}

impl<S: Real> Link<S> {
    pub fn custom<F>(name: impl Into<String>, f: F) -> Self
    where
        F: Fn(S) -> S + Send + Sync + 'static,
    {
        Link::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    #[inline]
    pub fn apply(&self, y: S) -> S {
        match self {
            Link::Identity => y,
            Link::Custom { f, .. } => f(y),
        }
    }

    pub fn is_identity(&self) -> bool {
        matches!(self, Link::Identity)
    }
}

impl<S> fmt::Debug for Link<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Link::Identity => f.write_str("Identity"),
            Link::Custom { name, .. } => write!(f, "Custom({name})"),
        }
    }
}

/// Shape of the prior. Atoms and nodes are `(weight, location)` pairs.
#[derive(Debug, Clone, PartialEq)]
pub enum PriorKind<S> {
    TwoPoint {
        p: S,
        l: S,
        r: S,
    },
    Gaussian {
        mean: S,
        var: S,
    },
    Discrete {
        atoms: Vec<(S, S)>,
    },
    /// Quadrature rule for a density; weights are normalised on construction.
    Density {
        nodes: Vec<(S, S)>,
    },
}

#[derive(Debug, Clone)]
pub struct Prior<S> {
    kind: PriorKind<S>,
    link: Link<S>,
}

/// Nodes of the trapezoid rule used for Gaussian priors, per side.
const GAUSS_HALF_NODES: usize = 1024;
/// Half-width of the Gaussian quadrature window in posterior standard deviations.
const GAUSS_WINDOW: f64 = 12.0;

impl<S: Real> Prior<S> {
    pub fn two_point(p: S, l: S, r: S) -> Result<Self, FilterError> {
        check_two_point(p, l, r)?;
        Ok(Prior {
            kind: PriorKind::TwoPoint { p, l, r },
            link: Link::Identity,
        })
    }

    pub fn gaussian(mean: S, var: S) -> Result<Self, FilterError> {
        if !(var > S::zero()) || !var.is_finite() || !mean.is_finite() {
            return Err(FilterError::InvalidPrior(format!(
                "gaussian needs finite mean and var > 0, got var={var}"
            )));
        }
        Ok(Prior {
            kind: PriorKind::Gaussian { mean, var },
            link: Link::Identity,
        })
    }

    /// Weights must be nonnegative and sum to one within `1e-12`.
    pub fn discrete(atoms: Vec<(S, S)>) -> Result<Self, FilterError> {
        check_atoms(&atoms)?;
        let total: f64 = atoms.iter().map(|a| a.0.as_f64()).sum();
        if (total - 1.0).abs() > 1e-12 {
            return Err(FilterError::InvalidPrior(format!(
                "weights sum to {total}, expected 1"
            )));
        }
        Ok(Prior {
            kind: PriorKind::Discrete { atoms },
            link: Link::Identity,
        })
    }

    pub fn density(nodes: Vec<(S, S)>) -> Result<Self, FilterError> {
        check_atoms(&nodes)?;
        let total: S = nodes.iter().map(|a| a.0).sum();
        if !(total > S::zero()) {
            return Err(FilterError::InvalidPrior(
                "density weights have zero mass".into(),
            ));
        }
        let nodes = nodes.into_iter().map(|(w, y)| (w / total, y)).collect();
        Ok(Prior {
            kind: PriorKind::Density { nodes },
            link: Link::Identity,
        })
    }

    pub fn with_link(mut self, link: Link<S>) -> Self {
        self.link = link;
        self
    }

    pub fn kind(&self) -> &PriorKind<S> {
        &self.kind
    }

    pub fn link(&self) -> &Link<S> {
        &self.link
    }

    /// Atoms of the represented support; empty for Gaussian priors.
    pub fn atoms(&self) -> Vec<(S, S)> {
        match &self.kind {
            PriorKind::TwoPoint { p, l, r } => vec![(*p, *l), (S::one() - *p, *r)],
            PriorKind::Gaussian { .. } => Vec::new(),
            PriorKind::Discrete { atoms } => atoms.clone(),
            PriorKind::Density { nodes } => nodes.clone(),
        }
    }

    /// `(inf h, sup h)` over the support with positive weight.
    pub fn link_range(&self) -> (S, S) {
        if let PriorKind::Gaussian { .. } = self.kind {
            // Unbounded support: no finite a-priori range for any link.
            return (S::neg_infinity(), S::infinity());
        }
        self.atoms()
            .iter()
            .filter(|a| a.0 > S::zero())
            .map(|a| self.link.apply(a.1))
            .fold((S::infinity(), S::neg_infinity()), |(lo, hi), v| {
                (lo.min(v), hi.max(v))
            })
    }

    /// Diagnostics about priors the quadrature path may represent poorly.
    pub fn warnings(&self) -> Vec<String> {
        let atoms = self.atoms();
        if atoms.len() < 3 {
            return Vec::new();
        }
        let mean_abs: S = atoms
            .iter()
            .map(|(w, y)| *w * self.link.apply(*y).abs())
            .sum();
        let max_abs = atoms
            .iter()
            .map(|(_, y)| self.link.apply(*y).abs())
            .fold(S::zero(), S::max);
        if max_abs > S::lit(20.0) * mean_abs {
            vec![format!(
                "heavy-tailed prior: largest |h(y)| = {max_abs} exceeds 20x the mean |h(Y)| = {mean_abs}; posterior drift may be inaccurate"
            )]
        } else {
            Vec::new()
        }
    }
}

fn check_two_point<S: Real>(p: S, l: S, r: S) -> Result<(), FilterError> {
    if !(p > S::zero() && p < S::one()) {
        return Err(FilterError::InvalidPrior(format!(
            "two-point prior needs p in (0,1), got {p}"
        )));
    }
    if !(l < r) || !l.is_finite() || !r.is_finite() {
        return Err(FilterError::InvalidPrior(format!(
            "two-point prior needs finite l < r, got l={l}, r={r}"
        )));
    }
    Ok(())
}

fn check_atoms<S: Real>(atoms: &[(S, S)]) -> Result<(), FilterError> {
    if atoms.is_empty() {
        return Err(FilterError::InvalidPrior("no atoms".into()));
    }
    for &(w, y) in atoms {
        if !(w >= S::zero()) || !w.is_finite() || !y.is_finite() {
            return Err(FilterError::InvalidPrior(format!(
                "bad atom (weight {w}, location {y})"
            )));
        }
    }
    Ok(())
}

/// Posterior mean of `h(Y)` given `X_t = x`.
pub fn posterior_drift<S: Real>(prior: &Prior<S>, t: S, x: S) -> Result<S, FilterError> {
    match &prior.kind {
        PriorKind::Gaussian { mean, var } => gaussian_quadrature(*mean, *var, &prior.link, t, x),
        _ => {
            let atoms = prior.atoms();
            let terms = atoms.iter().filter(|a| a.0 > S::zero()).map(|&(w, y)| {
                let log_w = w.ln() + x * y - S::lit(0.5) * y * y * t;
                (log_w, prior.link.apply(y))
            });
            weighted_mean(terms, t, x)
        }
    }
}

/// Log-sum-exp weighted mean of `(log weight, value)` pairs.
fn weighted_mean<S: Real>(
    terms: impl Iterator<Item = (S, S)> + Clone,
    t: S,
    x: S,
) -> Result<S, FilterError> {
    let underflow = || FilterError::Underflow {
        t: t.as_f64(),
        x: x.as_f64(),
    };
    let top = terms
        .clone()
        .map(|(lw, _)| lw)
        .fold(S::neg_infinity(), S::max);
    if !top.is_finite() {
        return Err(underflow());
    }
    let (mut num, mut den) = (S::zero(), S::zero());
    for (lw, h) in terms {
        let w = (lw - top).exp();
        num += w * h;
        den += w;
    }
    let f = num / den;
    if den > S::zero() && f.is_finite() {
        Ok(f)
    } else {
        Err(underflow())
    }
}

/// Trapezoid rule for the Gaussian prior, centred on the peak of the
/// integrand `exp(-(y-m)²/2γ² + xy - y²t/2)` and spanning 12 of its widths.
fn gaussian_quadrature<S: Real>(
    mean: S,
    var: S,
    link: &Link<S>,
    t: S,
    x: S,
) -> Result<S, FilterError> {
    let precision = S::one() / var + t;
    let centre = (mean / var + x) / precision;
    let width = precision.recip().sqrt();
    let n = GAUSS_HALF_NODES;
    let step = S::lit(GAUSS_WINDOW) * width / S::from_usize_lossy(n);
    let half = S::lit(0.5);
    let terms = (0..=2 * n).map(move |i| {
        let y = centre + step * (S::from_usize_lossy(i) - S::from_usize_lossy(n));
        let d = y - mean;
        let log_w = -half * d * d / var + x * y - half * y * y * t;
        (log_w, link.apply(y))
    });
    weighted_mean(terms, t, x)
}

/// Logit of the posterior probability of the right atom.
#[inline]
fn two_point_logit<S: Real>(p: S, l: S, r: S, t: S, x: S) -> S {
    ((S::one() - p) / p).ln() + (r - l) * x - S::lit(0.5) * (r * r - l * l) * t
}

/// Closed-form drift under the prior `p δ_l + (1 − p) δ_r`.
pub fn two_point_drift<S: Real>(p: S, l: S, r: S, t: S, x: S) -> Result<S, FilterError> {
    check_two_point(p, l, r)?;
    let z = two_point_logit(p, l, r, t, x);
    let q = if z >= S::zero() {
        S::one() / (S::one() + (-z).exp())
    } else {
        let e = z.exp();
        e / (S::one() + e)
    };
    Ok(l + (r - l) * q)
}

/// `∂_t` of [`two_point_drift`]; its sign is `-sign(r + l)`.
pub fn two_point_drift_dt<S: Real>(p: S, l: S, r: S, t: S, x: S) -> Result<S, FilterError> {
    check_two_point(p, l, r)?;
    let z = two_point_logit(p, l, r, t, x);
    // q(1 - q) for q = logistic(z), written to avoid overflow.
    let e = (-z.abs()).exp();
    let q1q = e / ((S::one() + e) * (S::one() + e));
    let d = r - l;
    Ok(-S::lit(0.5) * d * d * (r + l) * q1q)
}

/// Closed form for the Gaussian prior `N(m, var)` with identity link.
pub fn gaussian_drift<S: Real>(m: S, var: S, t: S, x: S) -> S {
    (m + var * x) / (S::one() + var * t)
}

/// Built-in drift families.
#[derive(Debug, Clone)]
pub enum DriftFamily<S> {
    /// `μ(t, x) = mu(t)`.
    BmTimeDrift {
        mu: Expr,
    },
    /// `μ(t, x) = x γ(t)`.
    Gbm {
        gamma: Expr,
    },
    /// `μ(t, x) = (pin − x) / (pin_time − t)`.
    BrownianBridge {
        pin: S,
        pin_time: S,
    },
    /// `μ(t, x) = θ (m(t) − x)`.
    OuTimeMean {
        theta: S,
        m: Expr,
    },
    Filtering {
        prior: Prior<S>,
    },
}

fn time_only(name: &str, e: &Expr) -> Result<(), FilterError> {
    if e.depends_on(Var::State) {
        return Err(FilterError::InvalidFamily(format!(
            "{name} must be a function of t only, got {e}"
        )));
    }
    Ok(())
}

/// Realises a drift family as a field; `horizon` binds `T` inside expressions.
pub fn make_drift<S: Real>(
    family: &DriftFamily<S>,
    horizon: S,
) -> Result<ScalarField<S>, FilterError> {
    Ok(match family {
        DriftFamily::BmTimeDrift { mu } => {
            time_only("mu", mu)?;
            ScalarField::from_expr(mu.clone(), horizon)
        }
        DriftFamily::Gbm { gamma } => {
            time_only("gamma", gamma)?;
            let gamma = ScalarField::<S>::from_expr(gamma.clone(), horizon);
            let time_dependent = gamma.is_time_dependent();
            let field = ScalarField::new(move |t, x| Ok(x * gamma.eval(t, x)?));
            if time_dependent {
                field
            } else {
                field.time_independent()
            }
        }
        DriftFamily::BrownianBridge { pin, pin_time } => {
            let (pin, pin_time) = (*pin, *pin_time);
            if !(pin_time > S::zero()) || !pin.is_finite() {
                return Err(FilterError::InvalidFamily(format!(
                    "bridge needs pin_time > 0, got {pin_time}"
                )));
            }
            ScalarField::new(move |t, x| {
                if t >= pin_time {
                    return Err(FieldError::at(
                        t,
                        x,
                        "bridge drift undefined at or after the pin time",
                    ));
                }
                Ok((pin - x) / (pin_time - t))
            })
            .with_regularity("Lipschitz in x with constant 1/(T - t)")
        }
        DriftFamily::OuTimeMean { theta, m } => {
            time_only("m", m)?;
            let theta = *theta;
            let m = ScalarField::<S>::from_expr(m.clone(), horizon);
            let time_dependent = m.is_time_dependent();
            let field = ScalarField::new(move |t, x| Ok(theta * (m.eval(t, x)? - x)));
            if time_dependent {
                field
            } else {
                field.time_independent()
            }
        }
        DriftFamily::Filtering { prior } => filtering_field(prior.clone()),
    })
}

fn filtering_field<S: Real>(prior: Prior<S>) -> ScalarField<S> {
    let closed_dt: Option<Box<dyn Fn(S, S) -> S + Send + Sync>> =
        match (prior.kind.clone(), prior.link.is_identity()) {
            (PriorKind::TwoPoint { p, l, r }, true) => Some(Box::new(move |t, x| {
                two_point_drift_dt(p, l, r, t, x).unwrap_or(S::nan())
            })),
            (PriorKind::Gaussian { mean, var }, true) => Some(Box::new(move |t, x| {
                let den = S::one() + var * t;
                -var * (mean + var * x) / (den * den)
            })),
            _ => None,
        };
    let field = ScalarField::new(move |t, x| {
        posterior_drift(&prior, t, x).map_err(|e| FieldError::at(t, x, e.to_string()))
    })
    .with_regularity("posterior mean; Lipschitz in x on compacts");
    match closed_dt {
        Some(dt) => field.with_time_partial(dt),
        None => field,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn documented_values() {
        let sym = Prior::two_point(0.5, -1.0, 1.0).unwrap();
        assert_eq!(posterior_drift(&sym, 0.0, 0.0).unwrap(), 0.0);
        let atom = Prior::discrete(vec![(1.0, 0.7)]).unwrap();
        for (t, x) in [(0.0, 0.0), (2.0, -30.0), (0.1, 500.0)] {
            assert_eq!(posterior_drift(&atom, t, x).unwrap(), 0.7);
        }
        assert_eq!(two_point_drift(0.5, 0.0, 1.0, 0.0, 0.0).unwrap(), 0.5);
        assert!((two_point_drift(0.5f64, 0.0, 1.0, 1.0, 1e3).unwrap() - 1.0).abs() < 1e-6);
        assert_eq!(gaussian_drift(0.3, 2.0, 0.0, 1.5), 0.3 + 3.0);
        assert_eq!(gaussian_drift(0.0, 1.0, 1.0, 1.0), 0.5);
    }

    #[test]
    fn two_point_extremes_do_not_overflow() {
        for x in [-1e6f64, -800.0, 800.0, 1e6] {
            let f = two_point_drift(0.3, -1.0, 2.0, 0.5, x).unwrap();
            assert!(f.is_finite() && (-1.0..=2.0).contains(&f));
            let d = two_point_drift_dt(0.3, -1.0, 2.0, 0.5, x).unwrap();
            assert!(d.is_finite() && d <= 0.0);
            let g = posterior_drift(&Prior::two_point(0.3, -1.0, 2.0).unwrap(), 0.5, x).unwrap();
            assert!(g.is_finite());
        }
    }

    #[test]
    fn invalid_priors_are_rejected() {
        assert!(Prior::two_point(0.0, -1.0, 1.0).is_err());
        assert!(Prior::two_point(0.5, 1.0, 1.0).is_err());
        assert!(Prior::gaussian(0.0, 0.0).is_err());
        assert!(Prior::discrete(vec![(0.5, 1.0), (0.4, 2.0)]).is_err());
        assert!(Prior::discrete(vec![(-0.5, 1.0), (1.5, 2.0)]).is_err());
        assert!(Prior::<f64>::density(vec![]).is_err());
    }

    #[test]
    fn custom_link_bounds_posterior() {
        let prior = Prior::discrete(vec![(0.25, -1.0), (0.5, 0.5), (0.25, 2.0)])
            .unwrap()
            .with_link(Link::custom("square", |y: f64| y * y));
        let (lo, hi) = prior.link_range();
        assert_eq!((lo, hi), (0.25, 4.0));
        for x in [-3.0, 0.0, 3.0] {
            let f = posterior_drift(&prior, 0.5, x).unwrap();
            assert!(f >= lo && f <= hi);
        }
    }

    #[test]
    fn heavy_tail_is_flagged() {
        let light = Prior::discrete(vec![(0.5, -1.0), (0.25, 0.0), (0.25, 1.0)]).unwrap();
        assert!(light.warnings().is_empty());
        let heavy = Prior::discrete(vec![(0.4995, -1.0), (0.4995, 1.0), (0.001, 1e5)]).unwrap();
        assert_eq!(heavy.warnings().len(), 1);
    }

    #[test]
    fn families_realise_closed_forms() {
        let bridge = make_drift(
            &DriftFamily::BrownianBridge {
                pin: 0.0,
                pin_time: 1.0,
            },
            1.0,
        )
        .unwrap();
        assert_eq!(bridge.eval(0.5, 1.0).unwrap(), -2.0);
        assert!(bridge.eval(1.0, 1.0).is_err());
        assert!(bridge.eval(1.5, 1.0).is_err());

        let gbm = make_drift(
            &DriftFamily::<f64>::Gbm {
                gamma: parse("1 - t").unwrap(),
            },
            2.0,
        )
        .unwrap();
        assert_eq!(gbm.eval(0.5, 2.0).unwrap(), 1.0);

        let ou = DriftFamily::<f64>::OuTimeMean {
            theta: 1.0,
            m: parse("0").unwrap(),
        };
        let ou = make_drift(&ou, 1.0).unwrap();
        for t in [0.0, 0.4, 0.9] {
            assert_eq!(ou.eval(t, 3.0).unwrap(), -3.0);
        }
        assert!(!ou.is_time_dependent());

        let bm = make_drift(
            &DriftFamily::<f64>::BmTimeDrift {
                mu: parse("1 - t").unwrap(),
            },
            2.0,
        )
        .unwrap();
        assert_eq!(bm.eval(0.25, -7.0).unwrap(), 0.75);
        assert!(make_drift(
            &DriftFamily::<f64>::BmTimeDrift {
                mu: parse("x").unwrap()
            },
            1.0
        )
        .is_err());

        let prior = Prior::two_point(0.5, -1.0, 2.0).unwrap();
        let filt = make_drift(&DriftFamily::Filtering { prior }, 1.0).unwrap();
        assert_eq!(
            filt.eval(0.3, 0.2).unwrap(),
            posterior_drift(&Prior::two_point(0.5, -1.0, 2.0).unwrap(), 0.3, 0.2).unwrap()
        );
        let exact = two_point_drift_dt(0.5, -1.0, 2.0, 0.3, 0.2).unwrap();
        assert_eq!(filt.dt(0.3, 0.2).unwrap(), exact);
    }

    #[test]
    fn single_precision_two_point() {
        let f = two_point_drift(0.5f32, -1.0, 2.0, 0.5, 0.25).unwrap();
        let g = two_point_drift(0.5f64, -1.0, 2.0, 0.5, 0.25).unwrap();
        assert!((f as f64 - g).abs() < 1e-6);
    }
}
