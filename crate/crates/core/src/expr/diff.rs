use super::{BinOp, Expr, ExprKind, Func};
use crate::expr::Var;

fn num(v: f64) -> Expr {
    Expr::num(v)
}

fn is_num(e: &Expr, v: f64) -> bool {
    matches!(e.kind, ExprKind::Num(n) if n == v)
}

fn add(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        b
    } else if is_num(&b, 0.0) {
        a
    } else {
        Expr::binary(BinOp::Add, a, b)
    }
}

fn sub(a: Expr, b: Expr) -> Expr {
    if is_num(&b, 0.0) {
        a
    } else if is_num(&a, 0.0) {
        Expr::neg(b)
    } else {
        Expr::binary(BinOp::Sub, a, b)
    }
}

fn mul(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) || is_num(&b, 0.0) {
        num(0.0)
    } else if is_num(&a, 1.0) {
        b
    } else if is_num(&b, 1.0) {
        a
    } else {
        Expr::binary(BinOp::Mul, a, b)
    }
}

fn div(a: Expr, b: Expr) -> Expr {
    if is_num(&a, 0.0) {
        num(0.0)
    } else if is_num(&b, 1.0) {
        a
    } else {
        Expr::binary(BinOp::Div, a, b)
    }
}

impl Expr {
    /// Symbolic partial derivative with respect to `v`, lightly simplified.
    ///
    /// `None` for constructs without a derivative everywhere (`abs`, `max`,
    /// `min`) and for powers whose exponent depends on a variable.
    pub fn derivative(&self, v: Var) -> Option<Expr> {
        if !self.depends_on(v) {
            return Some(num(0.0));
        }
        Some(match &self.kind {
            ExprKind::Num(_) => num(0.0),
            ExprKind::Var(w) => num(if *w == v { 1.0 } else { 0.0 }),
            ExprKind::Neg(e) => {
                let d = e.derivative(v)?;
                if is_num(&d, 0.0) {
                    d
                } else {
                    Expr::neg(d)
                }
            }
            ExprKind::Binary(op, l, r) => {
                let (a, b) = ((**l).clone(), (**r).clone());
                match op {
                    BinOp::Add => add(l.derivative(v)?, r.derivative(v)?),
                    BinOp::Sub => sub(l.derivative(v)?, r.derivative(v)?),
                    BinOp::Mul => add(mul(l.derivative(v)?, b), mul(a, r.derivative(v)?)),
                    BinOp::Div => {
                        // (a' b - a b') / b²
                        let top = sub(mul(l.derivative(v)?, b.clone()), mul(a, r.derivative(v)?));
                        div(top, mul(b.clone(), b))
                    }
                    BinOp::Pow => power_rule(a, b, v)?,
                }
            }
            ExprKind::Call(func, args) => {
                let a = args[0].clone();
                match func {
                    Func::Exp => mul(a.derivative(v)?, self.clone()),
                    Func::Log => div(a.derivative(v)?, a),
                    Func::Sqrt => div(a.derivative(v)?, mul(num(2.0), self.clone())),
                    Func::Pow => power_rule(a, args[1].clone(), v)?,
                    Func::Abs | Func::Max | Func::Min => return None,
                }
            }
        })
    }
}

/// `d(a^b) = b a^(b-1) a'` for an exponent free of variables.
fn power_rule(a: Expr, b: Expr, v: Var) -> Option<Expr> {
    if !b.free_variables().is_empty() {
        return None;
    }
    let da = a.derivative(v)?;
    let lowered = match b.kind {
        ExprKind::Num(n) => num(n - 1.0),
        _ => sub(b.clone(), num(1.0)),
    };
    let base = if is_num(&lowered, 1.0) {
        a
    } else {
        Expr::binary(BinOp::Pow, a, lowered)
    };
    Some(mul(mul(b, base), da))
}
