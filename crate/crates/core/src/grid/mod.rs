//! Uniform tensor grids with multilinear (Q1) elements on the periodic unit
//! cell `(-1/2, 1/2)ᵈ` or on a Dirichlet box, together with nodal fields,
//! element gradients and Gauss quadrature.

mod io;
mod norms;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::pairwise_sum;

pub use io::GridMeta;
pub use norms::{luxemburg_norm, luxemburg_norm_samples, luxemburg_norm_vector, orlicz_sobolev_norm};

pub type Point = [f64; 2];

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Boundary {
    Periodic,
    DirichletZero,
}

/// Axis-aligned box `origin + [0, length]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Domain {
    pub origin: Point,
    pub length: Point,
}

impl Domain {
    /// The reference cell `(-1/2, 1/2)ᵈ`.
    pub fn unit_cell() -> Self {
        Domain { origin: [-0.5, -0.5], length: [1.0, 1.0] }
    }

    /// `Ω = (0, 1)ᵈ`.
    pub fn unit_square() -> Self {
        Domain { origin: [0.0, 0.0], length: [1.0, 1.0] }
    }
}

/// One Gauss point with the local element data needed for assembly.
#[derive(Clone, Debug)]
pub struct QuadPoint {
    pub x: Point,
    pub weight: f64,
    pub cell: usize,
    /// Local node dofs; `None` for Dirichlet boundary nodes. Only the first
    /// `2^dim` entries are meaningful.
    pub dofs: [Option<usize>; 4],
    pub shape: [f64; 4],
    pub grads: [Point; 4],
    /// Reference coordinates inside the cell.
    pub local: Point,
}

#[derive(Clone, Debug)]
pub struct TensorGrid {
    dim: usize,
    n: usize,
    domain: Domain,
    bc: Boundary,
    h: Point,
    quad: Arc<Vec<QuadPoint>>,
}

impl PartialEq for TensorGrid {
    fn eq(&self, other: &Self) -> bool {
        self.dim == other.dim && self.n == other.n && self.domain == other.domain && self.bc == other.bc
    }
}

const GAUSS: [f64; 2] = [0.211_324_865_405_187_1, 0.788_675_134_594_812_9];

/// Builds a grid with `n` cells per axis and 2-point Gauss quadrature per
/// axis per cell.
pub fn make_grid(dim: usize, n: usize, domain: Domain, bc: Boundary) -> Result<TensorGrid> {
    TensorGrid::new(dim, n, domain, bc)
}

impl TensorGrid {
    pub fn new(dim: usize, n: usize, domain: Domain, bc: Boundary) -> Result<Self> {
        if dim != 1 && dim != 2 {
            return Err(Error::Usage(format!("unsupported dimension {dim}; only 1 and 2")));
        }
        if n < 2 {
            return Err(Error::Usage(format!("need at least 2 cells per axis, got {n}")));
        }
        if domain.length[0] <= 0.0 || (dim == 2 && domain.length[1] <= 0.0) {
            return Err(Error::Usage("domain lengths must be positive".into()));
        }
        let h = [domain.length[0] / n as f64, domain.length[1] / n as f64];
        let mut g = TensorGrid { dim, n, domain, bc, h, quad: Arc::new(Vec::new()) };
        g.quad = Arc::new(g.build_quadrature());
        Ok(g)
    }

    /// Periodic grid on the unit cell.
    pub fn cell(dim: usize, n: usize) -> Result<Self> {
        Self::new(dim, n, Domain::unit_cell(), Boundary::Periodic)
    }

    /// Dirichlet grid on `(0, 1)ᵈ`.
    pub fn unit_dirichlet(dim: usize, n: usize) -> Result<Self> {
        Self::new(dim, n, Domain::unit_square(), Boundary::DirichletZero)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn domain(&self) -> Domain {
        self.domain
    }

    pub fn bc(&self) -> Boundary {
        self.bc
    }

    pub fn is_periodic(&self) -> bool {
        self.bc == Boundary::Periodic
    }

    pub fn spacing(&self) -> Point {
        self.h
    }

    pub fn cell_volume(&self) -> f64 {
        if self.dim == 1 {
            self.h[0]
        } else {
            self.h[0] * self.h[1]
        }
    }

    pub fn cell_count(&self) -> usize {
        self.n.pow(self.dim as u32)
    }

    pub fn volume(&self) -> f64 {
        if self.dim == 1 {
            self.domain.length[0]
        } else {
            self.domain.length[0] * self.domain.length[1]
        }
    }

    /// Local nodes per cell.
    pub fn nloc(&self) -> usize {
        1 << self.dim
    }

    pub fn n_dofs(&self) -> usize {
        let per_axis = match self.bc {
            Boundary::Periodic => self.n,
            Boundary::DirichletZero => self.n - 1,
        };
        per_axis.pow(self.dim as u32)
    }

    pub fn quadrature(&self) -> &[QuadPoint] {
        &self.quad
    }

    /// Geometric node indices per axis run over `0..=n`.
    pub fn node_dof(&self, i: usize, j: usize) -> Option<usize> {
        let n = self.n;
        match self.bc {
            Boundary::Periodic => {
                let (a, b) = (i % n, j % n);
                Some(if self.dim == 1 { a } else { a + n * b })
            }
            Boundary::DirichletZero => {
                if i == 0 || i >= n || (self.dim == 2 && (j == 0 || j >= n)) {
                    None
                } else if self.dim == 1 {
                    Some(i - 1)
                } else {
                    Some((i - 1) + (n - 1) * (j - 1))
                }
            }
        }
    }

    /// Geometric node index of a dof.
    pub fn dof_node(&self, dof: usize) -> (usize, usize) {
        match (self.bc, self.dim) {
            (Boundary::Periodic, 1) => (dof, 0),
            (Boundary::Periodic, _) => (dof % self.n, dof / self.n),
            (Boundary::DirichletZero, 1) => (dof + 1, 0),
            (Boundary::DirichletZero, _) => (dof % (self.n - 1) + 1, dof / (self.n - 1) + 1),
        }
    }

    pub fn node_coord(&self, i: usize, j: usize) -> Point {
        let x = self.domain.origin[0] + i as f64 * self.h[0];
        let y = if self.dim == 2 { self.domain.origin[1] + j as f64 * self.h[1] } else { 0.0 };
        [x, y]
    }

    pub fn dof_coord(&self, dof: usize) -> Point {
        let (i, j) = self.dof_node(dof);
        self.node_coord(i, j)
    }

    fn cell_nodes(&self, ci: usize, cj: usize) -> [(usize, usize); 4] {
        [(ci, cj), (ci + 1, cj), (ci, cj + 1), (ci + 1, cj + 1)]
    }

    fn build_quadrature(&self) -> Vec<QuadPoint> {
        let n = self.n;
        let ncj = if self.dim == 1 { 1 } else { n };
        let w = self.cell_volume() / self.nloc() as f64;
        let mut out = Vec::with_capacity(self.cell_count() * self.nloc());
        for cj in 0..ncj {
            for ci in 0..n {
                let cell = ci + n * cj;
                let nodes = self.cell_nodes(ci, cj);
                let mut dofs = [None; 4];
                for (k, &(i, j)) in nodes.iter().take(self.nloc()).enumerate() {
                    dofs[k] = self.node_dof(i, j);
                }
                let base = self.node_coord(ci, cj);
                let gy: &[f64] = if self.dim == 1 { &[0.0] } else { &GAUSS };
                for &sy in gy {
                    for &sx in &GAUSS {
                        let x = [
                            base[0] + sx * self.h[0],
                            if self.dim == 1 { 0.0 } else { base[1] + sy * self.h[1] },
                        ];
                        let (shape, grads) = self.shape_at(sx, sy);
                        out.push(QuadPoint { x, weight: w, cell, dofs, shape, grads, local: [sx, sy] });
                    }
                }
            }
        }
        out
    }

    /// Shape values and physical gradients at reference coordinates.
    fn shape_at(&self, sx: f64, sy: f64) -> ([f64; 4], [Point; 4]) {
        let (hx, hy) = (self.h[0], self.h[1]);
        if self.dim == 1 {
            (
                [1.0 - sx, sx, 0.0, 0.0],
                [[-1.0 / hx, 0.0], [1.0 / hx, 0.0], [0.0; 2], [0.0; 2]],
            )
        } else {
            (
                [(1.0 - sx) * (1.0 - sy), sx * (1.0 - sy), (1.0 - sx) * sy, sx * sy],
                [
                    [-(1.0 - sy) / hx, -(1.0 - sx) / hy],
                    [(1.0 - sy) / hx, -sx / hy],
                    [-sy / hx, (1.0 - sx) / hy],
                    [sy / hx, sx / hy],
                ],
            )
        }
    }

    /// Cell indices and reference coordinates of an arbitrary point.
    /// Periodic grids wrap; Dirichlet grids clamp to the box.
    fn locate(&self, x: &Point) -> ((usize, usize), (f64, f64)) {
        let axis = |a: usize| -> (usize, f64) {
            let rel = (x[a] - self.domain.origin[a]) / self.h[a];
            let n = self.n as f64;
            let rel = match self.bc {
                Boundary::Periodic => rel - (rel / n).floor() * n,
                Boundary::DirichletZero => rel.clamp(0.0, n),
            };
            let c = (rel.floor() as usize).min(self.n - 1);
            (c, rel - c as f64)
        };
        let (ci, sx) = axis(0);
        let (cj, sy) = if self.dim == 2 { axis(1) } else { (0, 0.0) };
        ((ci, cj), (sx, sy))
    }

    /// Basis functions that are nonzero at `x`: `(dof, value, gradient)`.
    pub fn basis_at(&self, x: &Point) -> Vec<(Option<usize>, f64, Point)> {
        let ((ci, cj), (sx, sy)) = self.locate(x);
        let (shape, grads) = self.shape_at(sx, sy);
        let nodes = self.cell_nodes(ci, cj);
        (0..self.nloc())
            .map(|k| (self.node_dof(nodes[k].0, nodes[k].1), shape[k], grads[k]))
            .collect()
    }
}

/// Nodal values of a Q1 function; Dirichlet fields store interior dofs only.
#[derive(Clone, Debug, PartialEq)]
pub struct ScalarField {
    pub grid: TensorGrid,
    pub values: Vec<f64>,
}

/// A d-vector per quadrature point.
#[derive(Clone, Debug, PartialEq)]
pub struct VectorField {
    pub grid: TensorGrid,
    pub values: Vec<Point>,
}

impl ScalarField {
    pub fn zeros(grid: &TensorGrid) -> Self {
        ScalarField { grid: grid.clone(), values: vec![0.0; grid.n_dofs()] }
    }

    pub fn new(grid: &TensorGrid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.n_dofs() {
            return Err(Error::Usage(format!(
                "field has {} values, grid has {} dofs",
                values.len(),
                grid.n_dofs()
            )));
        }
        Ok(ScalarField { grid: grid.clone(), values })
    }

    /// Samples `f` at the dof nodes.
    pub fn from_fn<F: FnMut(&Point) -> f64>(grid: &TensorGrid, mut f: F) -> Self {
        let values = (0..grid.n_dofs()).map(|d| f(&grid.dof_coord(d))).collect();
        ScalarField { grid: grid.clone(), values }
    }

    pub fn value_at_qp(&self, q: &QuadPoint) -> f64 {
        let mut v = 0.0;
        for k in 0..self.grid.nloc() {
            if let Some(d) = q.dofs[k] {
                v += q.shape[k] * self.values[d];
            }
        }
        v
    }

    /// Element gradient written as differences of nodal values, so constant
    /// fields have an exactly zero gradient.
    pub fn grad_at_qp(&self, q: &QuadPoint) -> Point {
        let v = |k: usize| q.dofs[k].map(|d| self.values[d]).unwrap_or(0.0);
        let h = self.grid.spacing();
        if self.grid.dim() == 1 {
            [(v(1) - v(0)) / h[0], 0.0]
        } else {
            let [sx, sy] = q.local;
            [
                ((v(1) - v(0)) * (1.0 - sy) + (v(3) - v(2)) * sy) / h[0],
                ((v(2) - v(0)) * (1.0 - sx) + (v(3) - v(1)) * sx) / h[1],
            ]
        }
    }

    pub fn value_at(&self, x: &Point) -> f64 {
        self.grid
            .basis_at(x)
            .iter()
            .filter_map(|(d, s, _)| d.map(|d| s * self.values[d]))
            .sum()
    }

    pub fn gradient_at(&self, x: &Point) -> Point {
        let mut g = [0.0; 2];
        for (d, _, gr) in self.grid.basis_at(x) {
            if let Some(d) = d {
                g[0] += gr[0] * self.values[d];
                g[1] += gr[1] * self.values[d];
            }
        }
        g
    }

    /// Value at geometric node `(i, j)`, zero on Dirichlet boundary nodes.
    pub fn node_value(&self, i: usize, j: usize) -> f64 {
        self.grid.node_dof(i, j).map(|d| self.values[d]).unwrap_or(0.0)
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().fold(0.0f64, |m, v| m.max(v.abs()))
    }

    pub fn scaled(&self, c: f64) -> Self {
        ScalarField { grid: self.grid.clone(), values: self.values.iter().map(|v| c * v).collect() }
    }

    pub fn sub(&self, other: &ScalarField) -> Result<Self> {
        if self.grid != other.grid {
            return Err(Error::Usage("fields live on different grids".into()));
        }
        let values = self.values.iter().zip(&other.values).map(|(a, b)| a - b).collect();
        Ok(ScalarField { grid: self.grid.clone(), values })
    }

    pub fn add(&self, other: &ScalarField) -> Result<Self> {
        Ok(self.sub(&other.scaled(-1.0))?)
    }
}

/// Element gradients at every quadrature point.
pub fn gradient(u: &ScalarField) -> VectorField {
    let values = u.grid.quadrature().iter().map(|q| u.grad_at_qp(q)).collect();
    VectorField { grid: u.grid.clone(), values }
}

/// `∫ u` by Gauss quadrature.
pub fn integrate(u: &ScalarField) -> f64 {
    let terms: Vec<f64> = u.grid.quadrature().iter().map(|q| q.weight * u.value_at_qp(q)).collect();
    pairwise_sum(&terms)
}

/// `∫ f` over the grid's box by the grid's Gauss rule.
pub fn integrate_fn<F: Fn(&Point) -> f64>(grid: &TensorGrid, f: F) -> f64 {
    let terms: Vec<f64> = grid.quadrature().iter().map(|q| q.weight * f(&q.x)).collect();
    pairwise_sum(&terms)
}

/// `∫` of values given per quadrature point.
pub fn integrate_qp(grid: &TensorGrid, values: &[f64]) -> f64 {
    let terms: Vec<f64> = grid.quadrature().iter().zip(values).map(|(q, v)| q.weight * v).collect();
    pairwise_sum(&terms)
}

/// Subtracts the cell mean of a periodic field.
pub fn zero_mean_project(u: &ScalarField) -> Result<ScalarField> {
    if !u.grid.is_periodic() {
        return Err(Error::Usage("zero-mean projection needs a periodic grid".into()));
    }
    let mean = integrate(u) / u.grid.volume();
    let values = u.values.iter().map(|v| v - mean).collect();
    Ok(ScalarField { grid: u.grid.clone(), values })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn dof_counts() {
        assert_eq!(TensorGrid::cell(1, 8).unwrap().n_dofs(), 8);
        assert_eq!(TensorGrid::unit_dirichlet(2, 4).unwrap().n_dofs(), 9);
        let g = TensorGrid::cell(1, 2).unwrap();
        assert_eq!(g.n_dofs(), 2);
        assert_eq!(g.cell_volume(), 0.5);
        assert_eq!(TensorGrid::cell(2, 4).unwrap().n_dofs(), 16);
    }

    #[test]
    fn bad_grids_are_usage_errors() {
        assert!(matches!(TensorGrid::cell(3, 4), Err(Error::Usage(_))));
        assert!(matches!(TensorGrid::cell(1, 1), Err(Error::Usage(_))));
    }

    #[test]
    fn partition_of_unity() {
        for g in [
            TensorGrid::cell(1, 7).unwrap(),
            TensorGrid::cell(2, 5).unwrap(),
            TensorGrid::unit_dirichlet(2, 6).unwrap(),
            TensorGrid::new(2, 3, Domain { origin: [1.0, 2.0], length: [2.0, 0.5] }, Boundary::Periodic)
                .unwrap(),
        ] {
            assert!((integrate_fn(&g, |_| 1.0) - g.volume()).abs() < 1e-13);
            assert!((g.cell_volume() * g.cell_count() as f64 - g.volume()).abs() < 1e-13);
        }
    }

    #[test]
    fn integrate_examples() {
        let g = TensorGrid::cell(1, 64).unwrap();
        let one = ScalarField::from_fn(&g, |_| 1.0);
        assert!((integrate(&one) - 1.0).abs() < 1e-13);
        let s = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin());
        assert!(integrate(&s).abs() < 1e-12);
        let y2 = integrate_fn(&g, |x| x[0] * x[0]);
        assert!((y2 - 1.0 / 12.0).abs() < 1e-4);
    }

    #[test]
    fn gradient_examples() {
        let g = TensorGrid::cell(2, 6).unwrap();
        let c = ScalarField::from_fn(&g, |_| 4.2);
        assert!(gradient(&c).values.iter().all(|v| v[0] == 0.0 && v[1] == 0.0));

        let d = TensorGrid::unit_dirichlet(1, 10).unwrap();
        let x = ScalarField::from_fn(&d, |p| p[0]);
        // boundary value at x = 1 is not stored, so test the interior cells
        let gr = gradient(&x);
        for (q, v) in d.quadrature().iter().zip(&gr.values) {
            if q.cell < 9 {
                assert!((v[0] - 1.0).abs() < 1e-13);
            }
        }

        let g = TensorGrid::cell(1, 64).unwrap();
        let s = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin());
        let gr = gradient(&s);
        let err = g
            .quadrature()
            .iter()
            .zip(&gr.values)
            .map(|(q, v)| (v[0] - 2.0 * PI * (2.0 * PI * q.x[0]).cos()).abs())
            .fold(0.0, f64::max);
        // Gauss points sit away from cell midpoints, so the difference
        // quotient carries an O(h) term here
        assert!(err < 0.2, "max gradient error {err}");
        let mid_err = (0..64)
            .map(|c| {
                let xm = -0.5 + (c as f64 + 0.5) / 64.0;
                (s.gradient_at(&[xm, 0.0])[0] - 2.0 * PI * (2.0 * PI * xm).cos()).abs()
            })
            .fold(0.0, f64::max);
        assert!(mid_err < 0.01, "midpoint gradient error {mid_err}");
    }

    #[test]
    fn affine_dirichlet_interpolant_has_exact_gradient() {
        let d = TensorGrid::unit_dirichlet(2, 8).unwrap();
        let u = ScalarField::from_fn(&d, |p| 2.0 * p[0] - 3.0 * p[1] + 0.5);
        // interior cells only: boundary nodes carry zero
        for q in d.quadrature() {
            if q.dofs.iter().take(4).all(|d| d.is_some()) {
                let g = u.grad_at_qp(q);
                assert!((g[0] - 2.0).abs() < 1e-12 && (g[1] + 3.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn zero_mean_projection() {
        let g = TensorGrid::cell(1, 32).unwrap();
        let five = ScalarField::from_fn(&g, |_| 5.0);
        assert!(zero_mean_project(&five).unwrap().max_abs() < 1e-13);
        let s = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).sin());
        let p = zero_mean_project(&s).unwrap();
        assert!(p.values.iter().zip(&s.values).all(|(a, b)| (a - b).abs() < 1e-15));
        let s1 = ScalarField::from_fn(&g, |x| 1.0 + (2.0 * PI * x[0]).sin());
        let p = zero_mean_project(&s1).unwrap();
        assert!(p.values.iter().zip(&s.values).all(|(a, b)| (a - b).abs() < 1e-13));
        assert!(integrate(&p).abs() < 1e-13);
        let d = TensorGrid::unit_dirichlet(1, 8).unwrap();
        assert!(matches!(zero_mean_project(&ScalarField::zeros(&d)), Err(Error::Usage(_))));
    }

    #[test]
    fn periodic_wrap_in_point_evaluation() {
        let g = TensorGrid::cell(2, 8).unwrap();
        let u = ScalarField::from_fn(&g, |x| (2.0 * PI * x[0]).cos() * (2.0 * PI * x[1]).sin());
        let a = u.value_at(&[0.13, -0.27]);
        let b = u.value_at(&[1.13, 2.73]);
        assert!((a - b).abs() < 1e-12);
    }
}
