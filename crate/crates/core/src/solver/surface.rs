use super::{Grid, SchemeMeta, SolverOptions};
use crate::problem::ProblemSpec;
use crate::scalar::Real;

/// Value matrix `v[k][j]` on a grid, with the obstacle and the stop mask.
#[derive(Debug, Clone)]
pub struct ValueSurface<S> {
    grid: Grid<S>,
    v: Vec<Vec<S>>,
    obstacle: Vec<Vec<S>>,
    exercise: Vec<Vec<bool>>,
    tol_contact: S,
    meta: Option<SchemeMeta<S>>,
    context: Option<(ProblemSpec<S>, SolverOptions<S>)>,
}

/// `1e-7 * (1 + max|g|)`.
pub(crate) fn contact_tolerance<S: Real>(obstacle: &[Vec<S>]) -> S {
    let gmax = obstacle
        .iter()
        .flatten()
        .fold(S::zero(), |m, &g| m.max(g.abs()));
    S::lit(1e-7) * (S::one() + gmax)
}

fn mask<S: Real>(v: &[Vec<S>], obstacle: &[Vec<S>], tol: S) -> Vec<Vec<bool>> {
    v.iter()
        .zip(obstacle)
        .map(|(vr, gr)| vr.iter().zip(gr).map(|(&a, &b)| a - b <= tol).collect())
        .collect()
}

impl<S: Real> ValueSurface<S> {
    pub(crate) fn solved(
        grid: Grid<S>,
        v: Vec<Vec<S>>,
        obstacle: Vec<Vec<S>>,
        meta: SchemeMeta<S>,
        spec: ProblemSpec<S>,
        opts: SolverOptions<S>,
    ) -> Self {
        let tol_contact = contact_tolerance(&obstacle);
        let exercise = mask(&v, &obstacle, tol_contact);
        ValueSurface {
            grid,
            v,
            obstacle,
            exercise,
            tol_contact,
            meta: Some(meta),
            context: Some((spec, opts)),
        }
    }

    /// Surface from precomputed values; the mask uses the default contact tolerance.
    ///
    /// # Panics
    /// If the matrices do not match the grid shape.
    pub fn from_parts(grid: Grid<S>, v: Vec<Vec<S>>, obstacle: Vec<Vec<S>>) -> Self {
        let shape_ok = |m: &Vec<Vec<S>>| {
            m.len() == grid.nt() + 1 && m.iter().all(|r| r.len() == grid.nx() + 1)
        };
        assert!(
            shape_ok(&v) && shape_ok(&obstacle),
            "surface shape does not match grid"
        );
        let tol_contact = contact_tolerance(&obstacle);
        let exercise = mask(&v, &obstacle, tol_contact);
        ValueSurface {
            grid,
            v,
            obstacle,
            exercise,
            tol_contact,
            meta: None,
            context: None,
        }
    }

    pub fn grid(&self) -> &Grid<S> {
        &self.grid
    }

    pub fn v(&self) -> &[Vec<S>] {
        &self.v
    }

    pub fn obstacle(&self) -> &[Vec<S>] {
        &self.obstacle
    }

    pub fn exercise(&self) -> &[Vec<bool>] {
        &self.exercise
    }

    pub fn tol_contact(&self) -> S {
        self.tol_contact
    }

    pub fn meta(&self) -> Option<&SchemeMeta<S>> {
        self.meta.as_ref()
    }

    pub(crate) fn solver_context(&self) -> Option<(&ProblemSpec<S>, &SolverOptions<S>)> {
        self.context.as_ref().map(|(p, o)| (p, o))
    }

    /// Problem the surface was solved for, if any.
    pub fn problem(&self) -> Option<&ProblemSpec<S>> {
        self.context.as_ref().map(|(p, _)| p)
    }

    /// Linear interpolation of `v(t_k, ·)` at `x`.
    pub fn value_at(&self, k: usize, x: S) -> S {
        let xs = self.grid.x_nodes();
        let n = self.grid.nx();
        let pos = ((x - xs[0]) / self.grid.dx())
            .max(S::zero())
            .min(S::from_usize_lossy(n));
        let j = pos.floor().to_usize().unwrap_or(0).min(n - 1);
        let w = pos - S::from_usize_lossy(j);
        self.v[k][j] * (S::one() - w) + self.v[k][j + 1] * w
    }

    /// The same surface expressed in the coordinate `-x`.
    pub fn reflected(&self) -> Self {
        let rev = |m: &Vec<Vec<S>>| {
            m.iter()
                .map(|r| r.iter().rev().copied().collect())
                .collect()
        };
        let exercise = self
            .exercise
            .iter()
            .map(|r| r.iter().rev().copied().collect())
            .collect();
        let context = self
            .context
            .as_ref()
            .and_then(|(p, o)| p.reflect().ok().map(|r| (r, *o)));
        ValueSurface {
            grid: self.grid.reflected(),
            v: rev(&self.v),
            obstacle: rev(&self.obstacle),
            exercise,
            tol_contact: self.tol_contact,
            meta: self.meta.clone(),
            context,
        }
    }
}
