//! Black-box scalar fields `(t, x) -> value` with optional declared partials.

use std::fmt;
use std::sync::Arc;

use crate::expr::{Expr, ExprError, Var};
use crate::scalar::Real;

/// Evaluation failure of a field at a point.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
#[error("{reason} at t={t}, x={x}")]
pub struct FieldError {
    pub t: f64,
    pub x: f64,
    pub reason: String,
}

impl FieldError {
    pub fn at<S: Real>(t: S, x: S, reason: impl Into<String>) -> Self {
        FieldError {
            t: t.as_f64(),
            x: x.as_f64(),
            reason: reason.into(),
        }
    }
}

impl From<ExprError> for FieldError {
    fn from(e: ExprError) -> Self {
        match e {
            ExprError::Domain { t, x, .. } => FieldError {
                t,
                x,
                reason: e.to_string(),
            },
            other => FieldError {
                t: f64::NAN,
                x: f64::NAN,
                reason: other.to_string(),
            },
        }
    }
}

type EvalFn<S> = dyn Fn(S, S) -> Result<S, FieldError> + Send + Sync;

#[derive(Clone, Default)]
struct Partials<S> {
    dt: Option<Arc<EvalFn<S>>>,
    dx: Option<Arc<EvalFn<S>>>,
    dxx: Option<Arc<EvalFn<S>>>,
}

/// A pure function of `(t, x)`.
///
/// Partials that are not declared are approximated by central differences
/// with step `1e-5 * (1 + |x|)` (and `1e-5 * (1 + |t|)` in time).
#[derive(Clone)]
pub struct ScalarField<S> {
    eval: Arc<EvalFn<S>>,
    partials: Partials<S>,
    time_dependent: bool,
    regularity: String,
}

impl<S> fmt::Debug for ScalarField<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("ScalarField")
            .field("time_dependent", &self.time_dependent)
            .field("declared_partials", &self.partials.dx.is_some())
            .field("regularity", &self.regularity)
            .finish()
    }
}

impl<S: Real> ScalarField<S> {
    /// Wraps a fallible evaluator. The field is assumed to depend on time.
    pub fn new<F>(f: F) -> Self
    where
        F: Fn(S, S) -> Result<S, FieldError> + Send + Sync + 'static,
    {
        ScalarField {
            eval: Arc::new(f),
            partials: Partials {
                dt: None,
                dx: None,
                dxx: None,
            },
            time_dependent: true,
            regularity: String::new(),
        }
    }

    /// Wraps an infallible evaluator of `(t, x)`.
    pub fn from_fn<F>(f: F) -> Self
    where
        F: Fn(S, S) -> S + Send + Sync + 'static,
    {
        Self::new(move |t, x| Ok(f(t, x)))
    }

    /// A field of the state only.
    pub fn of_x<F>(f: F) -> Self
    where
        F: Fn(S) -> S + Send + Sync + 'static,
    {
        let mut field = Self::new(move |_, x| Ok(f(x)));
        field.time_dependent = false;
        field
    }

    pub fn constant(c: S) -> Self {
        Self::of_x(move |_| c).with_partials(|_, _| S::zero(), |_, _| S::zero(), |_, _| S::zero())
    }

    /// Field backed by a parsed expression; `horizon` binds the variable `T`.
    ///
    /// Partials are symbolic where the expression is smooth.
    pub fn from_expr(expr: Expr, horizon: S) -> Self {
        let time_dependent = expr.depends_on(Var::Time);
        let expr = Arc::new(expr);
        let symbolic = |e: Option<Expr>| -> Option<Arc<EvalFn<S>>> {
            let e = e?;
            Some(Arc::new(move |t, x| {
                e.eval(t, x, horizon).map_err(FieldError::from)
            }))
        };
        let dx = expr.derivative(Var::State);
        let dxx = dx.as_ref().and_then(|d| d.derivative(Var::State));
        let partials = Partials {
            dt: symbolic(expr.derivative(Var::Time)),
            dx: symbolic(dx),
            dxx: symbolic(dxx),
        };
        let mut field = Self::new(move |t, x| expr.eval(t, x, horizon).map_err(FieldError::from));
        field.time_dependent = time_dependent;
        field.partials = partials;
        field
    }

    /// Declares exact partials `∂_t`, `∂_x`, `∂_xx`.
    pub fn with_partials<A, B, C>(mut self, dt: A, dx: B, dxx: C) -> Self
    where
        A: Fn(S, S) -> S + Send + Sync + 'static,
        B: Fn(S, S) -> S + Send + Sync + 'static,
        C: Fn(S, S) -> S + Send + Sync + 'static,
    {
        self.partials = Partials {
            dt: Some(Arc::new(move |t, x| Ok(dt(t, x)))),
            dx: Some(Arc::new(move |t, x| Ok(dx(t, x)))),
            dxx: Some(Arc::new(move |t, x| Ok(dxx(t, x)))),
        };
        self
    }

    /// Declares an exact `∂_t` only; the spatial partials stay finite differences.
    pub fn with_time_partial<A>(mut self, dt: A) -> Self
    where
        A: Fn(S, S) -> S + Send + Sync + 'static,
    {
        self.partials.dt = Some(Arc::new(move |t, x| Ok(dt(t, x))));
        self
    }

    pub fn with_regularity(mut self, note: impl Into<String>) -> Self {
        self.regularity = note.into();
        self
    }

    /// Marks the field as independent of `t`; the caller vouches for it.
    pub fn time_independent(mut self) -> Self {
        self.time_dependent = false;
        self
    }

    pub fn is_time_dependent(&self) -> bool {
        self.time_dependent
    }

    pub fn has_declared_partials(&self) -> bool {
        self.partials.dt.is_some() && self.partials.dx.is_some() && self.partials.dxx.is_some()
    }

    pub fn regularity(&self) -> &str {
        &self.regularity
    }

    #[inline]
    pub fn eval(&self, t: S, x: S) -> Result<S, FieldError> {
        (self.eval)(t, x)
    }

    /// Evaluates and rejects non-finite output.
    #[inline]
    pub fn eval_finite(&self, t: S, x: S) -> Result<S, FieldError> {
        let v = self.eval(t, x)?;
        if v.is_finite() {
            Ok(v)
        } else {
            Err(FieldError::at(t, x, "non-finite value"))
        }
    }

    pub fn dt(&self, t: S, x: S) -> Result<S, FieldError> {
        if !self.time_dependent {
            return Ok(S::zero());
        }
        if let Some(d) = &self.partials.dt {
            return d(t, x);
        }
        let h = fd_step(t);
        let up = self.eval_finite(t + h, x)?;
        let dn = self.eval_finite(t - h, x)?;
        Ok((up - dn) / (h + h))
    }

    pub fn dx(&self, t: S, x: S) -> Result<S, FieldError> {
        if let Some(d) = &self.partials.dx {
            return d(t, x);
        }
        let h = fd_step(x);
        let up = self.eval_finite(t, x + h)?;
        let dn = self.eval_finite(t, x - h)?;
        Ok((up - dn) / (h + h))
    }

    pub fn dxx(&self, t: S, x: S) -> Result<S, FieldError> {
        if let Some(d) = &self.partials.dxx {
            return d(t, x);
        }
        let h = fd_step(x);
        let up = self.eval_finite(t, x + h)?;
        let mid = self.eval_finite(t, x)?;
        let dn = self.eval_finite(t, x - h)?;
        Ok((up - mid - mid + dn) / (h * h))
    }

    /// `(t, x) -> sign * F(t, -x)`, carrying declared partials through the reflection.
    pub fn reflected(&self, sign: S) -> Self {
        let inner = self.clone();
        let mut out = Self::new(move |t, x| Ok(sign * inner.eval(t, -x)?));
        out.time_dependent = self.time_dependent;
        out.regularity = self.regularity.clone();
        if self.partials.dt.is_some() {
            let a = self.clone();
            out.partials.dt = Some(Arc::new(move |t, x| Ok(sign * a.dt(t, -x)?)));
        }
        if self.partials.dx.is_some() {
            let b = self.clone();
            out.partials.dx = Some(Arc::new(move |t, x| Ok(-sign * b.dx(t, -x)?)));
        }
        if self.partials.dxx.is_some() {
            let c = self.clone();
            out.partials.dxx = Some(Arc::new(move |t, x| Ok(sign * c.dxx(t, -x)?)));
        }
        out
    }
}

fn fd_step<S: Real>(at: S) -> S {
    S::lit(1e-5) * (S::one() + at.abs())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::expr::parse;

    #[test]
    fn finite_difference_partials_are_close() {
        let g = ScalarField::<f64>::from_fn(|t, x| x.exp() * (1.0 + t));
        let (t, x) = (0.3f64, 0.7f64);
        let exact = x.exp() * (1.0 + t);
        assert!((g.dx(t, x).unwrap() - exact).abs() < 1e-8);
        assert!((g.dxx(t, x).unwrap() - exact).abs() < 1e-4);
        assert!((g.dt(t, x).unwrap() - x.exp()).abs() < 1e-8);
    }

    #[test]
    fn expression_fields_track_time_dependence() {
        let s = ScalarField::<f64>::from_expr(parse("2*x").unwrap(), 1.0);
        assert!(!s.is_time_dependent());
        let m = ScalarField::<f64>::from_expr(parse("-x/(T-t)").unwrap(), 1.0);
        assert!(m.is_time_dependent());
        assert!(m.eval(1.0, 0.5).is_err());
        assert_eq!(m.eval(0.5, 1.0).unwrap(), -2.0);
    }

    #[test]
    fn expression_partials_are_symbolic() {
        let g = ScalarField::<f64>::from_expr(parse("x^2").unwrap(), 1.0);
        assert!(g.has_declared_partials());
        assert_eq!(g.dx(0.0, 0.1).unwrap(), 0.2);
        assert_eq!(g.dxx(0.0, 0.1).unwrap(), 2.0);
        let k = ScalarField::<f64>::from_expr(parse("max(x,0)").unwrap(), 1.0);
        assert!((k.dx(0.0, 1.0).unwrap() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn reflection_carries_partials() {
        let g = ScalarField::<f64>::of_x(|x| x * x * x).with_partials(
            |_, _| 0.0,
            |_, x| 3.0 * x * x,
            |_, x| 6.0 * x,
        );
        let r = g.reflected(1.0);
        // r(x) = -x^3
        assert_eq!(r.eval(0.0, 2.0).unwrap(), -8.0);
        assert_eq!(r.dx(0.0, 2.0).unwrap(), -12.0);
        assert_eq!(r.dxx(0.0, 2.0).unwrap(), -12.0);
    }
}
