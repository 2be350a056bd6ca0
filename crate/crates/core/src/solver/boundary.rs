use std::fmt;

use super::ValueSurface;
use crate::problem::Orientation;
use crate::scalar::Real;

/// Boundary location at one time node.
///
/// For a lower boundary `NegInf` means the whole section continues and
/// `PosInf` means it stops everywhere; an upper boundary swaps the two.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum BoundaryValue<S> {
    NegInf,
    Finite(S),
    PosInf,
}

impl<S: Real> BoundaryValue<S> {
    pub fn finite(self) -> Option<S> {
        match self {
            BoundaryValue::Finite(b) => Some(b),
            _ => None,
        }
    }

    /// Sentinels mapped to ±∞.
    pub fn as_scalar(self) -> S {
        match self {
            BoundaryValue::NegInf => S::neg_infinity(),
            BoundaryValue::Finite(b) => b,
            BoundaryValue::PosInf => S::infinity(),
        }
    }

    pub fn negated(self) -> Self {
        match self {
            BoundaryValue::NegInf => BoundaryValue::PosInf,
            BoundaryValue::Finite(b) => BoundaryValue::Finite(-b),
            BoundaryValue::PosInf => BoundaryValue::NegInf,
        }
    }
}

impl<S: Real> fmt::Display for BoundaryValue<S> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            BoundaryValue::NegInf => f.write_str("-inf"),
            BoundaryValue::PosInf => f.write_str("+inf"),
            BoundaryValue::Finite(b) => write!(f, "{b}"),
        }
    }
}

/// Stopping boundary per time node, at grid resolution.
#[derive(Debug, Clone, PartialEq)]
pub struct Boundary<S> {
    pub t_nodes: Vec<S>,
    pub values: Vec<BoundaryValue<S>>,
    pub orientation: Orientation,
    /// Grid spacing the boundary was read off at.
    pub dx: S,
    /// Time-node indices whose section is not a single stop-then-continue split.
    pub separation_warnings: Vec<usize>,
}

impl<S: Real> Boundary<S> {
    /// Boundary of the problem in the coordinate `-x`.
    pub fn reflected(&self) -> Self {
        Boundary {
            t_nodes: self.t_nodes.clone(),
            values: self.values.iter().map(|b| b.negated()).collect(),
            orientation: match self.orientation {
                Orientation::Lower => Orientation::Upper,
                Orientation::Upper => Orientation::Lower,
            },
            dx: self.dx,
            separation_warnings: self.separation_warnings.clone(),
        }
    }
}

/// Reads a lower boundary off the stop mask.
///
/// Only interior nodes are used; the edge nodes carry the artificial edge
/// condition. At each time node `b` is the largest interior node in the stop
/// set, `NegInf` when none stops and `PosInf` when all do.
pub fn extract_boundary<S: Real>(surface: &ValueSurface<S>) -> Boundary<S> {
    let grid = surface.grid();
    let xs = grid.x_nodes();
    let n = grid.nx();
    let mut values = Vec::with_capacity(grid.nt() + 1);
    let mut warnings = Vec::new();
    for (k, row) in surface.exercise().iter().enumerate() {
        let interior = &row[1..n];
        let stops = interior.iter().filter(|&&m| m).count();
        let value = if stops == 0 {
            BoundaryValue::NegInf
        } else if stops == interior.len() {
            BoundaryValue::PosInf
        } else {
            let last = interior.iter().rposition(|&m| m).expect("some node stops");
            if stops != last + 1 {
                warnings.push(k);
            }
            BoundaryValue::Finite(xs[last + 1])
        };
        values.push(value);
    }
    Boundary {
        t_nodes: grid.t_nodes().to_vec(),
        values,
        orientation: Orientation::Lower,
        dx: grid.dx(),
        separation_warnings: warnings,
    }
}
