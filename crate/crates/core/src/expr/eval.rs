use super::{BinOp, Expr, ExprError, ExprKind, Func, Var};
use crate::scalar::Real;

impl Expr {
    /// Evaluates the expression at `(t, x)` with horizon `horizon`.
    ///
    /// Division by zero, `log`/`sqrt` outside their domain and any other
    /// non-finite intermediate are reported as [`ExprError::Domain`].
    pub fn eval<S: Real>(&self, t: S, x: S, horizon: S) -> Result<S, ExprError> {
        let v = match &self.kind {
            ExprKind::Num(v) => S::lit(*v),
            ExprKind::Var(Var::Time) => t,
            ExprKind::Var(Var::State) => x,
            ExprKind::Var(Var::Horizon) => horizon,
            ExprKind::Neg(e) => -e.eval(t, x, horizon)?,
            ExprKind::Binary(op, l, r) => {
                let a = l.eval(t, x, horizon)?;
                let b = r.eval(t, x, horizon)?;
                match op {
                    BinOp::Add => a + b,
                    BinOp::Sub => a - b,
                    BinOp::Mul => a * b,
                    BinOp::Div => {
                        if b == S::zero() {
                            return Err(self.domain("division", t, x));
                        }
                        a / b
                    }
                    BinOp::Pow => a.powf(b),
                }
            }
            ExprKind::Call(func, args) => {
                let a = args[0].eval(t, x, horizon)?;
                match func {
                    Func::Exp => a.exp(),
                    Func::Log => {
                        if a <= S::zero() {
                            return Err(self.domain("log", t, x));
                        }
                        a.ln()
                    }
                    Func::Sqrt => {
                        if a < S::zero() {
                            return Err(self.domain("sqrt", t, x));
                        }
                        a.sqrt()
                    }
                    Func::Abs => a.abs(),
                    Func::Max | Func::Min | Func::Pow => {
                        let b = args[1].eval(t, x, horizon)?;
                        match func {
                            Func::Max => a.max(b),
                            Func::Min => a.min(b),
                            _ => a.powf(b),
                        }
                    }
                }
            }
        };
        if v.is_finite() {
            Ok(v)
        } else {
            Err(self.domain(self.op_name(), t, x))
        }
    }

    fn op_name(&self) -> &'static str {
        match &self.kind {
            ExprKind::Num(_) => "literal",
            ExprKind::Var(_) => "variable",
            ExprKind::Neg(_) => "negation",
            ExprKind::Binary(BinOp::Add, ..) => "addition",
            ExprKind::Binary(BinOp::Sub, ..) => "subtraction",
            ExprKind::Binary(BinOp::Mul, ..) => "multiplication",
            ExprKind::Binary(BinOp::Div, ..) => "division",
            ExprKind::Binary(BinOp::Pow, ..) => "power",
            ExprKind::Call(f, _) => f.name(),
        }
    }

    fn domain<S: Real>(&self, op: &'static str, t: S, x: S) -> ExprError {
        ExprError::Domain {
            op,
            offset: self.offset,
            t: t.as_f64(),
            x: x.as_f64(),
        }
    }
}
