//! Arithmetic expressions over `t`, `x` and the horizon `T`.
//!
//! Config files describe drifts, diffusions and rewards as strings such as
//! `"-x/(T - t)"`. Precedence from tightest to loosest is `^` (right
//! associative), unary `-`, `* /`, `+ -`. Functions: `exp log sqrt abs`
//! (one argument) and `max min pow` (two arguments).

mod diff;
mod eval;
mod parse;

use std::collections::BTreeSet;
use std::fmt;

pub use parse::parse;

/// Byte offset into the source text.
pub type Offset = usize;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum ExprError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: Offset, message: String },
    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: Offset },
    #[error("domain error in {op} (expression offset {offset}) at t={t}, x={x}")]
    Domain {
        op: &'static str,
        offset: Offset,
        t: f64,
        x: f64,
    },
}

impl ExprError {
    /// Source offset the error points at.
    pub fn offset(&self) -> Offset {
        match self {
            ExprError::Syntax { offset, .. }
            | ExprError::UnknownIdentifier { offset, .. }
            | ExprError::Domain { offset, .. } => *offset,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum Var {
    Time,
    State,
    Horizon,
}

impl Var {
    pub fn name(self) -> &'static str {
        match self {
            Var::Time => "t",
            Var::State => "x",
            Var::Horizon => "T",
        }
    }
}

impl fmt::Display for Var {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BinOp {
    Add,
    Sub,
    Mul,
    Div,
    Pow,
}

impl BinOp {
    fn symbol(self) -> &'static str {
        match self {
            BinOp::Add => "+",
            BinOp::Sub => "-",
            BinOp::Mul => "*",
            BinOp::Div => "/",
            BinOp::Pow => "^",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Func {
    Exp,
    Log,
    Sqrt,
    Abs,
    Max,
    Min,
    Pow,
}

impl Func {
    pub fn name(self) -> &'static str {
        match self {
            Func::Exp => "exp",
            Func::Log => "log",
            Func::Sqrt => "sqrt",
            Func::Abs => "abs",
            Func::Max => "max",
            Func::Min => "min",
            Func::Pow => "pow",
        }
    }

    pub fn arity(self) -> usize {
        match self {
            Func::Exp | Func::Log | Func::Sqrt | Func::Abs => 1,
            Func::Max | Func::Min | Func::Pow => 2,
        }
    }

    pub(crate) fn lookup(name: &str) -> Option<Func> {
        Some(match name {
            "exp" => Func::Exp,
            "log" => Func::Log,
            "sqrt" => Func::Sqrt,
            "abs" => Func::Abs,
            "max" => Func::Max,
            "min" => Func::Min,
            "pow" => Func::Pow,
            _ => return None,
        })
    }
}

#[derive(Debug, Clone)]
pub enum ExprKind {
    Num(f64),
    Var(Var),
    Neg(Box<Expr>),
    Binary(BinOp, Box<Expr>, Box<Expr>),
    Call(Func, Vec<Expr>),
}

/// Parsed expression node; `offset` locates the node in the source text.
#[derive(Debug, Clone)]
pub struct Expr {
    pub kind: ExprKind,
    pub offset: Offset,
}

impl Expr {
    pub fn new(kind: ExprKind) -> Self {
        Expr { kind, offset: 0 }
    }

    pub fn num(v: f64) -> Self {
        Expr::new(ExprKind::Num(v))
    }

    pub fn var(v: Var) -> Self {
        Expr::new(ExprKind::Var(v))
    }

    pub fn neg(e: Expr) -> Self {
        Expr::new(ExprKind::Neg(Box::new(e)))
    }

    pub fn binary(op: BinOp, l: Expr, r: Expr) -> Self {
        Expr::new(ExprKind::Binary(op, Box::new(l), Box::new(r)))
    }

    pub fn call(f: Func, args: Vec<Expr>) -> Self {
        Expr::new(ExprKind::Call(f, args))
    }

    /// Structural equality, ignoring source offsets. Literals compare bitwise.
    pub fn same_structure(&self, other: &Expr) -> bool {
        match (&self.kind, &other.kind) {
            (ExprKind::Num(a), ExprKind::Num(b)) => a.to_bits() == b.to_bits(),
            (ExprKind::Var(a), ExprKind::Var(b)) => a == b,
            (ExprKind::Neg(a), ExprKind::Neg(b)) => a.same_structure(b),
            (ExprKind::Binary(o1, l1, r1), ExprKind::Binary(o2, l2, r2)) => {
                o1 == o2 && l1.same_structure(l2) && r1.same_structure(r2)
            }
            (ExprKind::Call(f1, a1), ExprKind::Call(f2, a2)) => {
                f1 == f2
                    && a1.len() == a2.len()
                    && a1.iter().zip(a2).all(|(a, b)| a.same_structure(b))
            }
            _ => false,
        }
    }

    pub fn free_variables(&self) -> BTreeSet<Var> {
        let mut out = BTreeSet::new();
        self.collect_vars(&mut out);
        out
    }

    fn collect_vars(&self, out: &mut BTreeSet<Var>) {
        match &self.kind {
            ExprKind::Num(_) => {}
            ExprKind::Var(v) => {
                out.insert(*v);
            }
            ExprKind::Neg(e) => e.collect_vars(out),
            ExprKind::Binary(_, l, r) => {
                l.collect_vars(out);
                r.collect_vars(out);
            }
            ExprKind::Call(_, args) => args.iter().for_each(|a| a.collect_vars(out)),
        }
    }

    pub fn depends_on(&self, v: Var) -> bool {
        self.free_variables().contains(&v)
    }

    pub fn depth(&self) -> usize {
        match &self.kind {
            ExprKind::Num(_) | ExprKind::Var(_) => 1,
            ExprKind::Neg(e) => 1 + e.depth(),
            ExprKind::Binary(_, l, r) => 1 + l.depth().max(r.depth()),
            ExprKind::Call(_, args) => 1 + args.iter().map(Expr::depth).max().unwrap_or(0),
        }
    }
}

/// Fully parenthesised rendering; `parse` of the output rebuilds the same tree.
impl fmt::Display for Expr {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            ExprKind::Num(v) => write!(f, "{v}"),
            ExprKind::Var(v) => write!(f, "{v}"),
            ExprKind::Neg(e) => write!(f, "(-{e})"),
            ExprKind::Binary(op, l, r) => write!(f, "({l} {} {r})", op.symbol()),
            ExprKind::Call(func, args) => {
                write!(f, "{}(", func.name())?;
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        f.write_str(", ")?;
                    }
                    write!(f, "{a}")?;
                }
                f.write_str(")")
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn vars(src: &str) -> Vec<&'static str> {
        parse(src)
            .unwrap()
            .free_variables()
            .into_iter()
            .map(Var::name)
            .collect()
    }

    #[test]
    fn free_variable_sets() {
        assert_eq!(vars("x*x"), vec!["x"]);
        assert_eq!(vars("-x/(T-t)"), vec!["t", "x", "T"]);
        assert!(vars("3.14").is_empty());
    }

    #[test]
    fn printing_round_trips() {
        for src in [
            "-x/(T - t)",
            "2^3^2",
            "-x^2",
            "max(x, 0) + exp(-t) * 1e-7",
            "pow(x, 0.5) - -3",
        ] {
            let e = parse(src).unwrap();
            let again = parse(&e.to_string()).unwrap();
            assert!(e.same_structure(&again), "{src} -> {e}");
        }
    }
}
