//! Grid-scale checks of the monotonicity hypotheses and conclusions.
//!
//! Every check samples fields on a grid; verdicts hold at grid scale only.
//! Tolerances: `tol_mono = 1e-12 (1 + max|F|)` for field monotonicity,
//! `10 · tol_contact` for value monotonicity and one cell for boundaries.

use crate::field::ScalarField;
use crate::problem::Orientation;
use crate::report::{CheckReport, WorstTracker};
use crate::scalar::Real;
use crate::solver::{Boundary, BoundaryValue, Grid, ValueSurface};

/// Threshold defining `M = {μ < −TOL_ZERO}`.
pub const TOL_ZERO: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scope {
    Everywhere,
    /// Only pairs whose later point lies in `M`.
    Region,
}

fn eval_failure(check: &str, e: impl std::fmt::Display) -> CheckReport {
    CheckReport::judge(check, f64::INFINITY, 0.0, None)
        .with_notes(format!("evaluation failed: {e}"))
}

/// Samples `F` on the grid: rows are time nodes (a single row at `t = 0` for
/// time-independent fields).
fn sample<S: Real>(
    f: &ScalarField<S>,
    grid: &Grid<S>,
) -> Result<(Vec<S>, Vec<Vec<f64>>), crate::FieldError> {
    let ts: Vec<S> = if f.is_time_dependent() {
        grid.t_nodes().to_vec()
    } else {
        vec![S::zero()]
    };
    let rows = ts
        .iter()
        .map(|&t| {
            grid.x_nodes()
                .iter()
                .map(|&x| f.eval_finite(t, x).map(|v| v.as_f64()))
                .collect()
        })
        .collect::<Result<Vec<Vec<f64>>, _>>()?;
    Ok((ts, rows))
}

fn mono_tol(rows: &[Vec<f64>]) -> f64 {
    1e-12 * (1.0 + rows.iter().flatten().fold(0.0f64, |m, v| m.max(v.abs())))
}

/// Worst drop of `x ↦ F(t, x)` across neighbouring nodes.
fn x_monotone<S: Real>(check: &str, f: &ScalarField<S>, grid: &Grid<S>) -> CheckReport {
    let (ts, rows) = match sample(f, grid) {
        Ok(s) => s,
        Err(e) => return eval_failure(check, e),
    };
    let xs = grid.x_nodes();
    let mut worst = WorstTracker::new();
    for (t, row) in ts.iter().zip(&rows) {
        for j in 0..row.len() - 1 {
            worst.offer(row[j] - row[j + 1], t.as_f64(), Some(xs[j].as_f64()));
        }
    }
    CheckReport::judge(check, worst.value(), mono_tol(&rows), worst.witness)
}

/// `x ↦ g(t, x)` nondecreasing.
pub fn check_g_monotone<S: Real>(g: &ScalarField<S>, grid: &Grid<S>) -> CheckReport {
    x_monotone("g_monotone", g, grid)
}

/// `t ↦ μ(t, x)` nonincreasing, everywhere or on pairs ending in `M`.
pub fn check_mu_time_monotone<S: Real>(
    mu: &ScalarField<S>,
    grid: &Grid<S>,
    scope: Scope,
) -> CheckReport {
    let check = match scope {
        Scope::Everywhere => "mu_time_monotone_everywhere",
        Scope::Region => "mu_time_monotone_region",
    };
    let ts = grid.t_nodes();
    let xs = grid.x_nodes();
    let rows = match ts
        .iter()
        .map(|&t| {
            xs.iter()
                .map(|&x| mu.eval_finite(t, x).map(|v| v.as_f64()))
                .collect()
        })
        .collect::<Result<Vec<Vec<f64>>, _>>()
    {
        Ok(r) => r,
        Err(e) => return eval_failure(check, e),
    };
    let mut worst = WorstTracker::new();
    let mut pairs = 0usize;
    for k in 0..ts.len() - 1 {
        for j in 0..xs.len() {
            let (early, late) = (rows[k][j], rows[k + 1][j]);
            if scope == Scope::Region && !(late < -TOL_ZERO) {
                continue;
            }
            pairs += 1;
            worst.offer(late - early, ts[k + 1].as_f64(), Some(xs[j].as_f64()));
        }
    }
    if pairs == 0 {
        return CheckReport::inconclusive(check, "region M is empty on the grid");
    }
    CheckReport::judge(check, worst.value(), mono_tol(&rows), worst.witness)
        .with_notes(format!("{pairs} pairs"))
}

/// Boolean node masks: continuation `c`, stopping `d`, `m = {μ < −tol_zero}`, `mc`.
#[derive(Debug, Clone, PartialEq)]
pub struct RegionMasks {
    pub c: Vec<Vec<bool>>,
    pub d: Vec<Vec<bool>>,
    pub m: Vec<Vec<bool>>,
    pub mc: Vec<Vec<bool>>,
}

/// Classifies every node; a drift that cannot be evaluated counts as `M^c`.
pub fn classify_regions<S: Real>(surface: &ValueSurface<S>, drift: &ScalarField<S>) -> RegionMasks {
    let grid = surface.grid();
    let d: Vec<Vec<bool>> = surface.exercise().to_vec();
    let c = d.iter().map(|r| r.iter().map(|&s| !s).collect()).collect();
    let m: Vec<Vec<bool>> = grid
        .t_nodes()
        .iter()
        .map(|&t| {
            grid.x_nodes()
                .iter()
                .map(|&x| matches!(drift.eval(t, x), Ok(v) if v.as_f64() < -TOL_ZERO))
                .collect()
        })
        .collect();
    let mc = m.iter().map(|r| r.iter().map(|&s| !s).collect()).collect();
    RegionMasks { c, d, m, mc }
}

/// `σ² v_xx + 2 μ v_x ≥ 0` on continuation nodes outside `M`.
///
/// Derivatives are central differences. Nodes next to a change of the stop
/// mask are skipped, as are the edge columns and the terminal row. The
/// tolerance `10 dx max(σ², 2|μ|)` is taken node by node, so the reported
/// `worst` is the left-hand side divided by the local coefficient scale.
pub fn check_condition_iii<S: Real>(
    surface: &ValueSurface<S>,
    mu: &ScalarField<S>,
    sigma: &ScalarField<S>,
) -> CheckReport {
    let check = "condition_iii";
    let grid = surface.grid();
    let (ts, xs) = (grid.t_nodes(), grid.x_nodes());
    let dx = grid.dx().as_f64();
    let v = surface.v();
    let stop = surface.exercise();
    let mut worst = WorstTracker::new();
    let mut nodes = 0usize;
    for k in 0..grid.nt() {
        for j in 1..grid.nx() {
            if stop[k][j - 1] || stop[k][j] || stop[k][j + 1] {
                continue;
            }
            let (t, x) = (ts[k], xs[j]);
            let (m, s) = match (mu.eval_finite(t, x), sigma.eval_finite(t, x)) {
                (Ok(m), Ok(s)) => (m.as_f64(), s.as_f64()),
                (Err(e), _) | (_, Err(e)) => return eval_failure(check, e),
            };
            if m < -TOL_ZERO {
                continue;
            }
            let (a, b, c) = (v[k][j - 1].as_f64(), v[k][j].as_f64(), v[k][j + 1].as_f64());
            let vx = (c - a) / (2.0 * dx);
            let vxx = (c - 2.0 * b + a) / (dx * dx);
            let lhs = s * s * vxx + 2.0 * m * vx;
            let scale = (s * s).max(2.0 * m.abs());
            nodes += 1;
            if scale > 0.0 {
                worst.offer(-lhs / scale, t.as_f64(), Some(x.as_f64()));
            } else if lhs < 0.0 {
                worst.offer(f64::INFINITY, t.as_f64(), Some(x.as_f64()));
            }
        }
    }
    if nodes == 0 {
        return CheckReport::inconclusive(check, "C ∩ M^c has no node away from the stop mask");
    }
    CheckReport::judge(check, worst.value(), 10.0 * dx, worst.witness).with_notes(format!(
        "{nodes} nodes; worst is (σ² v_xx + 2μ v_x) / max(σ², 2|μ|), negated"
    ))
}

/// Two sub-verdicts for `h`: nondecreasing in `x`, nonincreasing in `t`.
#[derive(Debug, Clone, PartialEq)]
pub struct HMonotoneReport {
    pub overall: CheckReport,
    pub in_x: CheckReport,
    pub in_t: CheckReport,
}

pub fn check_h_monotone<S: Real>(h: &ScalarField<S>, grid: &Grid<S>) -> HMonotoneReport {
    let in_x = x_monotone("h_monotone_x", h, grid);
    let mut in_t = check_mu_time_monotone(h, grid, Scope::Everywhere);
    in_t.check = "h_monotone_t".into();
    in_t.notes.clear();
    let (worst, tol, witness) = if in_x.worst - in_x.tol >= in_t.worst - in_t.tol {
        (in_x.worst, in_x.tol, in_x.witness)
    } else {
        (in_t.worst, in_t.tol, in_t.witness)
    };
    let mut overall = CheckReport::judge("h_monotone", worst, tol, witness);
    if in_x.failed() || in_t.failed() {
        overall.verdict = crate::report::Verdict::Fail;
    } else {
        overall.verdict = crate::report::Verdict::Pass;
    }
    overall.notes = format!("x: {:?}, t: {:?}", in_x.verdict, in_t.verdict);
    HMonotoneReport {
        overall,
        in_x,
        in_t,
    }
}

/// `t ↦ v(t, x)` nonincreasing at every node, within `10 · tol_contact`.
pub fn verify_value_time_monotone<S: Real>(surface: &ValueSurface<S>) -> CheckReport {
    let grid = surface.grid();
    let (ts, xs) = (grid.t_nodes(), grid.x_nodes());
    let v = surface.v();
    let mut worst = WorstTracker::new();
    for k in 0..grid.nt() {
        for j in 0..=grid.nx() {
            worst.offer(
                (v[k + 1][j] - v[k][j]).as_f64(),
                ts[k + 1].as_f64(),
                Some(xs[j].as_f64()),
            );
        }
    }
    CheckReport::judge(
        "value_time_monotone",
        worst.value(),
        10.0 * surface.tol_contact().as_f64(),
        worst.witness,
    )
}

fn sentinel_rank<S>(b: &BoundaryValue<S>) -> u8 {
    match b {
        BoundaryValue::NegInf => 0,
        BoundaryValue::Finite(_) => 1,
        BoundaryValue::PosInf => 2,
    }
}

/// Lower boundaries must be nondecreasing and upper ones nonincreasing, up to
/// one cell; sentinels may only move in the same direction
/// (`-inf → finite → +inf` for lower boundaries).
pub fn verify_boundary_monotone<S: Real>(boundary: &Boundary<S>) -> CheckReport {
    let lower = match boundary.orientation {
        Orientation::Lower => boundary.clone(),
        Orientation::Upper => boundary.reflected(),
    };
    let dx = lower.dx.as_f64();
    let flip = if boundary.orientation == Orientation::Upper {
        -1.0
    } else {
        1.0
    };
    let mut worst = WorstTracker::new();
    let mut sentinel_breaks = Vec::new();
    for k in 0..lower.values.len().saturating_sub(1) {
        let (a, b) = (lower.values[k], lower.values[k + 1]);
        let t = lower.t_nodes[k + 1].as_f64();
        match (a, b) {
            (BoundaryValue::Finite(a), BoundaryValue::Finite(b)) => {
                worst.offer((a - b).as_f64(), t, Some(flip * b.as_f64()));
            }
            _ if sentinel_rank(&b) < sentinel_rank(&a) => {
                sentinel_breaks.push(k + 1);
                worst.offer(f64::INFINITY, t, None);
            }
            _ => {}
        }
    }
    let report = CheckReport::judge("boundary_monotone", worst.value(), dx, worst.witness);
    let order = if boundary.orientation == Orientation::Upper {
        "nonincreasing"
    } else {
        "nondecreasing"
    };
    if sentinel_breaks.is_empty() {
        report.with_notes(format!("{order}, one-cell slack"))
    } else {
        report.with_notes(format!(
            "{order}; sentinel order broken at t-nodes {sentinel_breaks:?}"
        ))
    }
}

/// Heuristic continuity scan: largest jump of `v` between neighbouring
/// x-nodes, against ten times the obstacle's largest jump (or the contact
/// tolerance if larger).
pub fn check_continuity<S: Real>(surface: &ValueSurface<S>) -> CheckReport {
    let grid = surface.grid();
    let (ts, xs) = (grid.t_nodes(), grid.x_nodes());
    let mut worst = WorstTracker::new();
    let mut g_jump = 0.0f64;
    for (k, (vr, gr)) in surface.v().iter().zip(surface.obstacle()).enumerate() {
        for j in 0..grid.nx() {
            g_jump = g_jump.max((gr[j + 1] - gr[j]).abs().as_f64());
            worst.offer(
                (vr[j + 1] - vr[j]).abs().as_f64(),
                ts[k].as_f64(),
                Some(xs[j].as_f64()),
            );
        }
    }
    let tol = 10.0 * g_jump.max(surface.tol_contact().as_f64());
    CheckReport::judge("continuity_heuristic", worst.value(), tol, worst.witness)
        .with_notes("max |v(t,x_{j+1}) - v(t,x_j)|; heuristic only")
}
