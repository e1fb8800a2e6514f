//! The limit triple `(u₀, u₁, u₂)` and the two-scale corrector ansatz
//! `u₀(x) + ε u₁(x, x/ε) + ε² u₂(x, x/ε, x/ε²)`.

use std::sync::OnceLock;

use rayon::prelude::*;

use crate::cell::{solve_inner_cell, solve_outer_cell, CellSolution};
use crate::error::{Error, Result};
use crate::flux::FluxCoefficient;
use crate::grid::{Boundary, Point, ScalarField, TensorGrid};

use super::fine::scale;
use super::SolveOptions;

/// Correctors at one node of the Ω grid.
#[derive(Clone, Debug)]
pub struct NodeCorrectors {
    /// Geometric node index on Ω.
    pub node: (usize, usize),
    /// `(u₀, Du₀)` at the node.
    pub r: f64,
    pub xi: Point,
    /// `π₁(r, ξ)` on Y.
    pub outer: CellSolution,
    /// `π₂(y_k, r, ξ + D_yπ₁(y_k))` at every dof `y_k` of the Y grid.
    pub inner: Vec<CellSolution>,
}

/// `u₀` with lazily computed correctors `u₁ = π₁(u₀, Du₀)` and
/// `u₂ = π₂(·, u₀, Du₀ + D_yu₁)`, evaluated at the nodes of `u₀`'s grid and
/// interpolated in between.
pub struct HomogTriple<'a> {
    pub u0: ScalarField,
    a: &'a FluxCoefficient,
    grid_y: TensorGrid,
    grid_z: TensorGrid,
    opts: SolveOptions,
    nodes: OnceLock<Vec<NodeCorrectors>>,
}

fn wrap(t: f64) -> f64 {
    t - (t + 0.5).floor()
}

fn wrap_point(p: &Point) -> Point {
    [wrap(p[0]), wrap(p[1])]
}

/// Nodal gradient of a Q1 field: central differences inside, one-sided at
/// the box boundary (periodic grids wrap).
pub(crate) fn nodal_gradient(u: &ScalarField, i: usize, j: usize) -> Point {
    let g = &u.grid;
    let n = g.n();
    let h = g.spacing();
    let periodic = g.bc() == Boundary::Periodic;
    let diff = |plus: (usize, usize), minus: (usize, usize), span: f64| {
        (u.node_value(plus.0, plus.1) - u.node_value(minus.0, minus.1)) / span
    };
    let axis = |k: usize, idx: usize| -> f64 {
        let at = |m: usize| if k == 0 { (m, j) } else { (i, m) };
        if periodic {
            diff(at((idx + 1) % n), at((idx + n - 1) % n), 2.0 * h[k])
        } else if idx == 0 {
            diff(at(1), at(0), h[k])
        } else if idx == n {
            diff(at(n), at(n - 1), h[k])
        } else {
            diff(at(idx + 1), at(idx - 1), 2.0 * h[k])
        }
    };
    let gx = axis(0, i);
    let gy = if g.dim() == 2 { axis(1, j) } else { 0.0 };
    [gx, gy]
}

/// Geometric nodes of a grid: every `(i, j)` with `i, j ≤ n` for Dirichlet
/// grids, `< n` for periodic ones.
fn all_nodes(g: &TensorGrid) -> Vec<(usize, usize)> {
    let m = if g.is_periodic() { g.n() } else { g.n() + 1 };
    let mj = if g.dim() == 1 { 1 } else { m };
    (0..mj).flat_map(|j| (0..m).map(move |i| (i, j))).collect()
}

/// Bilinear weights of the geometric nodes around `x` on a Dirichlet grid.
fn node_weights(g: &TensorGrid, x: &Point) -> Vec<((usize, usize), f64)> {
    let n = g.n();
    let h = g.spacing();
    let o = g.domain().origin;
    let loc = |k: usize| -> (usize, f64) {
        let rel = ((x[k] - o[k]) / h[k]).clamp(0.0, n as f64);
        let c = (rel.floor() as usize).min(n - 1);
        (c, rel - c as f64)
    };
    let (ci, sx) = loc(0);
    if g.dim() == 1 {
        return vec![((ci, 0), 1.0 - sx), ((ci + 1, 0), sx)];
    }
    let (cj, sy) = loc(1);
    vec![
        ((ci, cj), (1.0 - sx) * (1.0 - sy)),
        ((ci + 1, cj), sx * (1.0 - sy)),
        ((ci, cj + 1), (1.0 - sx) * sy),
        ((ci + 1, cj + 1), sx * sy),
    ]
}

impl<'a> HomogTriple<'a> {
    pub fn new(
        u0: ScalarField,
        a: &'a FluxCoefficient,
        grid_y: TensorGrid,
        grid_z: TensorGrid,
        opts: SolveOptions,
    ) -> Result<Self> {
        if u0.grid.is_periodic() {
            return Err(Error::Usage("u0 must live on a Dirichlet grid over Ω".into()));
        }
        if !grid_y.is_periodic() || !grid_z.is_periodic() {
            return Err(Error::Usage("corrector grids must be periodic".into()));
        }
        Ok(HomogTriple { u0, a, grid_y, grid_z, opts, nodes: OnceLock::new() })
    }

    pub fn grid_y(&self) -> &TensorGrid {
        &self.grid_y
    }

    pub fn grid_z(&self) -> &TensorGrid {
        &self.grid_z
    }

    fn solve_node(&self, node: (usize, usize)) -> Result<NodeCorrectors> {
        let r = self.u0.node_value(node.0, node.1);
        let xi = nodal_gradient(&self.u0, node.0, node.1);
        let outer = solve_outer_cell(self.a, r, xi, &self.grid_y, &self.grid_z, &self.opts)?;
        let inner = (0..self.grid_y.n_dofs())
            .map(|d| {
                let (i, j) = self.grid_y.dof_node(d);
                let y = self.grid_y.node_coord(i, j);
                let gy = nodal_gradient(&outer.corrector, i, j);
                solve_inner_cell(self.a, y, r, [xi[0] + gy[0], xi[1] + gy[1]], &self.grid_z, &self.opts)
            })
            .collect::<Result<Vec<_>>>()?;
        Ok(NodeCorrectors { node, r, xi, outer, inner })
    }

    /// Correctors at every node of `u₀`'s grid, computed on first use.
    pub fn correctors(&self) -> Result<&[NodeCorrectors]> {
        if let Some(v) = self.nodes.get() {
            return Ok(v);
        }
        let nodes = all_nodes(&self.u0.grid);
        let v: Vec<NodeCorrectors> = nodes.par_iter().map(|&n| self.solve_node(n)).collect::<Result<_>>()?;
        let _ = self.nodes.set(v);
        Ok(self.nodes.get().expect("just set"))
    }

    fn node_index(&self, node: (usize, usize)) -> usize {
        let m = self.u0.grid.n() + 1;
        node.0 + m * node.1
    }

    /// `u₁(x, y)`: `π₁` interpolated between the nodes around `x`.
    pub fn u1(&self, x: &Point, y: &Point) -> Result<f64> {
        let c = self.correctors()?;
        let y = wrap_point(y);
        Ok(node_weights(&self.u0.grid, x)
            .iter()
            .map(|&(n, w)| w * c[self.node_index(n)].outer.corrector.value_at(&y))
            .sum())
    }

    /// `u₂(x, y, z)`: `π₂` interpolated in `x` over Ω nodes and in `y` over
    /// Y nodes.
    pub fn u2(&self, x: &Point, y: &Point, z: &Point) -> Result<f64> {
        let c = self.correctors()?;
        let (y, z) = (wrap_point(y), wrap_point(z));
        let by = self.grid_y.basis_at(&y);
        let mut acc = 0.0;
        for (n, w) in node_weights(&self.u0.grid, x) {
            let nc = &c[self.node_index(n)];
            for (d, s, _) in &by {
                let d = d.expect("periodic grids have no boundary dofs");
                acc += w * s * nc.inner[d].corrector.value_at(&z);
            }
        }
        Ok(acc)
    }

    /// Largest residual over the three decoupled systems: the homogenized
    /// equation (`macro_residual`, supplied by the caller), every outer cell
    /// problem and every inner cell problem.
    pub fn three_system_residuals(&self, macro_residual: f64) -> Result<[f64; 3]> {
        let c = self.correctors()?;
        let outer = c.iter().map(|n| n.outer.residual_norm).fold(0.0, f64::max);
        let inner = c.iter().flat_map(|n| n.inner.iter().map(|s| s.residual_norm)).fold(0.0, f64::max);
        Ok([macro_residual, outer, inner])
    }
}

/// `min(1, dist(x, ∂Ω)/ε)`: ramps the correctors to zero over a layer of
/// width `ε`, since the periodic correctors ignore the boundary condition.
fn boundary_cutoff(g: &TensorGrid, x: &Point, eps: f64) -> f64 {
    let d = g.domain();
    let dist = (0..g.dim())
        .map(|k| (x[k] - d.origin[k]).min(d.origin[k] + d.length[k] - x[k]))
        .fold(f64::INFINITY, f64::min);
    (dist / eps).clamp(0.0, 1.0)
}

/// Nodal values on `target` of `u₀ + m(ε u₁(x, x/ε) + ε² u₂(x, x/ε, x/ε²))`,
/// `m` a cutoff vanishing on ∂Ω and equal to 1 at distance `≥ ε`.
pub fn reconstruct_on(triple: &HomogTriple<'_>, eps: f64, target: &TensorGrid) -> Result<ScalarField> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Usage(format!("eps must lie in (0, 1], got {eps}")));
    }
    if target.is_periodic() || target.domain() != triple.u0.grid.domain() {
        return Err(Error::Usage("reconstruction target must be a Dirichlet grid over u0's domain".into()));
    }
    triple.correctors()?;
    let values: Vec<f64> = (0..target.n_dofs())
        .into_par_iter()
        .map(|d| {
            let x = target.dof_coord(d);
            let y = scale(&x, eps);
            let z = scale(&x, eps * eps);
            let m = boundary_cutoff(target, &x, eps);
            Ok(triple.u0.value_at(&x) + m * (eps * triple.u1(&x, &y)? + eps * eps * triple.u2(&x, &y, &z)?))
        })
        .collect::<Result<_>>()?;
    ScalarField::new(target, values)
}

/// Corrector reconstruction of `u0` for the flux `a` at scale `eps`,
/// sampled on `target`.
pub fn reconstruct(
    u0: &ScalarField,
    a: &FluxCoefficient,
    eps: f64,
    grid_y: &TensorGrid,
    grid_z: &TensorGrid,
    opts: &SolveOptions,
    target: &TensorGrid,
) -> Result<ScalarField> {
    let t = HomogTriple::new(u0.clone(), a, grid_y.clone(), grid_z.clone(), opts.clone())?;
    reconstruct_on(&t, eps, target)
}
