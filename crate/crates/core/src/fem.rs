//! Q1 finite-element residuals `R_i = Σ_q w (F(q)·∇N_i − f(q) N_i)` for
//! fluxes `F(q) = F(x_q, u_q, ∇u_q)`, with Jacobians, secant matrices and the
//! homogenized tangent of a periodic cell problem.

use std::sync::{Arc, Mutex};

use rayon::prelude::*;

use crate::error::Result;
use crate::flux::Mat2;
use crate::grid::{Point, QuadPoint, TensorGrid};
use crate::linalg::{CsrMatrix, Factorization, LinearSolverKind};
use crate::numeric::pairwise_sum;
use crate::solver::MonotoneSystem;

/// Flux value and derivatives at one quadrature point.
#[derive(Clone, Copy, Debug, Default)]
pub struct FluxSample {
    pub flux: Point,
    /// `∂F/∂(∇u)`.
    pub d_grad: Mat2,
    /// `∂F/∂ζ`: the solution value for Dirichlet problems, the frozen
    /// parameter `r` for cell problems.
    pub d_zeta: Point,
}

/// Flux evaluated at quadrature point `q`.
pub trait PointFlux: Sync {
    fn eval(&self, q: usize, qp: &QuadPoint, u: f64, grad: &Point) -> Result<FluxSample>;
}

pub struct FeSystem<'a, P: PointFlux> {
    pub grid: &'a TensorGrid,
    pub flux: &'a P,
    /// Source per quadrature point.
    pub source: Option<Vec<f64>>,
    /// Whether the flux depends on `u` itself (adds `∂F/∂ζ` to the Jacobian).
    pub couple_u: bool,
    pub linear_solver: LinearSolverKind,
    cache: Mutex<Option<(Vec<f64>, Arc<Vec<FluxSample>>)>>,
}

fn mat_vec(m: &Mat2, v: &Point) -> Point {
    [m[0][0] * v[0] + m[0][1] * v[1], m[1][0] * v[0] + m[1][1] * v[1]]
}

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

impl<'a, P: PointFlux> FeSystem<'a, P> {
    pub fn new(grid: &'a TensorGrid, flux: &'a P) -> Self {
        FeSystem {
            grid,
            flux,
            source: None,
            couple_u: false,
            linear_solver: LinearSolverKind::Auto,
            cache: Mutex::new(None),
        }
    }

    pub fn with_source(mut self, f: Vec<f64>) -> Self {
        self.source = Some(f);
        self
    }

    pub fn coupled(mut self, couple: bool) -> Self {
        self.couple_u = couple;
        self
    }

    fn nloc(&self) -> usize {
        self.grid.nloc()
    }

    fn value(&self, q: &QuadPoint, u: &[f64]) -> f64 {
        (0..self.nloc()).filter_map(|k| q.dofs[k].map(|d| q.shape[k] * u[d])).sum()
    }

    fn grad(&self, q: &QuadPoint, u: &[f64]) -> Point {
        let v = |k: usize| q.dofs[k].map(|d| u[d]).unwrap_or(0.0);
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

    /// Flux samples at every quadrature point, cached for the last `u`.
    pub fn samples(&self, u: &[f64]) -> Result<Arc<Vec<FluxSample>>> {
        if let Some((cu, s)) = self.cache.lock().unwrap().as_ref() {
            if cu.as_slice() == u {
                return Ok(s.clone());
            }
        }
        let qps = self.grid.quadrature();
        let s: Vec<FluxSample> = qps
            .par_iter()
            .enumerate()
            .with_min_len(64)
            .map(|(i, q)| self.flux.eval(i, q, self.value(q, u), &self.grad(q, u)))
            .collect::<Result<_>>()?;
        let s = Arc::new(s);
        *self.cache.lock().unwrap() = Some((u.to_vec(), s.clone()));
        Ok(s)
    }

    fn assemble_residual(&self, samples: &[FluxSample]) -> Vec<f64> {
        let mut r = vec![0.0; self.grid.n_dofs()];
        for (i, q) in self.grid.quadrature().iter().enumerate() {
            let f = self.source.as_ref().map_or(0.0, |s| s[i]);
            for k in 0..self.nloc() {
                if let Some(d) = q.dofs[k] {
                    r[d] += q.weight * (dot(&samples[i].flux, &q.grads[k]) - f * q.shape[k]);
                }
            }
        }
        r
    }

    fn assemble_matrix(&self, couple: bool, coef: impl Fn(usize) -> (Mat2, Point)) -> CsrMatrix {
        let nl = self.nloc();
        let mut trip = Vec::with_capacity(self.grid.quadrature().len() * nl * nl);
        for (i, q) in self.grid.quadrature().iter().enumerate() {
            let (d, du) = coef(i);
            for a in 0..nl {
                let Some(row) = q.dofs[a] else { continue };
                for b in 0..nl {
                    let Some(col) = q.dofs[b] else { continue };
                    let dg = mat_vec(&d, &q.grads[b]);
                    let mut v = dot(&q.grads[a], &dg);
                    if couple {
                        v += dot(&q.grads[a], &du) * q.shape[b];
                    }
                    trip.push((row, col, q.weight * v));
                }
            }
        }
        CsrMatrix::from_triplets(self.grid.n_dofs(), trip)
    }

    /// `∫ F`, the averaged flux over the grid's box (divided by its volume).
    pub fn average_flux(&self, u: &[f64]) -> Result<Point> {
        let s = self.samples(u)?;
        let q = self.grid.quadrature();
        let vol = self.grid.volume();
        let c = |k: usize| -> f64 {
            let t: Vec<f64> = q.iter().zip(s.iter()).map(|(q, s)| q.weight * s.flux[k]).collect();
            pairwise_sum(&t) / vol
        };
        Ok([c(0), c(1)])
    }

    /// `∫ F·∇u − ∫ f u` for the current `u`.
    pub fn energy_gap(&self, u: &[f64]) -> Result<(f64, f64)> {
        let s = self.samples(u)?;
        let mut lhs = Vec::new();
        let mut rhs = Vec::new();
        for (i, q) in self.grid.quadrature().iter().enumerate() {
            lhs.push(q.weight * dot(&s[i].flux, &self.grad(q, u)));
            let f = self.source.as_ref().map_or(0.0, |f| f[i]);
            rhs.push(q.weight * f * self.value(q, u));
        }
        Ok((pairwise_sum(&lhs), pairwise_sum(&rhs)))
    }

    /// Derivatives of the averaged flux of a periodic cell problem with
    /// respect to the macroscopic gradient and the frozen parameter, by the
    /// sensitivity systems `J χ = −b` at the converged corrector.
    pub fn homogenized_tangent(&self, u: &[f64]) -> Result<(Mat2, Point)> {
        let s = self.samples(u)?;
        let dim = self.grid.dim();
        let mut j = self.assemble_matrix(false, |i| (s[i].d_grad, [0.0; 2]));
        let pinned = self.pinned();
        if let Some(k) = pinned {
            j.pin(k);
        }
        // a vanishing linearization (degenerate flux at zero gradient) has
        // a zero tangent; the shift keeps the sensitivity solve defined
        let fact = Factorization::new_shifted(&j, self.linear_solver)?;
        let qps = self.grid.quadrature();
        let vol = self.grid.volume();
        let rhs_for = |v: &dyn Fn(usize) -> Point| -> Vec<f64> {
            let mut b = vec![0.0; self.grid.n_dofs()];
            for (i, q) in qps.iter().enumerate() {
                let vi = v(i);
                for k in 0..self.nloc() {
                    if let Some(d) = q.dofs[k] {
                        b[d] -= q.weight * dot(&q.grads[k], &vi);
                    }
                }
            }
            if let Some(k) = pinned {
                b[k] = 0.0;
            }
            b
        };
        let mut d_xi = [[0.0; 2]; 2];
        for k in 0..dim {
            let mut e = [0.0; 2];
            e[k] = 1.0;
            let chi = fact.solve(&rhs_for(&|i| mat_vec(&s[i].d_grad, &e)))?;
            for m in 0..dim {
                let t: Vec<f64> = qps
                    .iter()
                    .enumerate()
                    .map(|(i, q)| {
                        let g = self.grad(q, &chi);
                        q.weight * mat_vec(&s[i].d_grad, &[e[0] + g[0], e[1] + g[1]])[m]
                    })
                    .collect();
                d_xi[m][k] = pairwise_sum(&t) / vol;
            }
        }
        let chi = fact.solve(&rhs_for(&|i| s[i].d_zeta))?;
        let mut d_r = [0.0; 2];
        for m in 0..dim {
            let t: Vec<f64> = qps
                .iter()
                .enumerate()
                .map(|(i, q)| {
                    let g = self.grad(q, &chi);
                    q.weight * (s[i].d_zeta[m] + mat_vec(&s[i].d_grad, &g)[m])
                })
                .collect();
            d_r[m] = pairwise_sum(&t) / vol;
        }
        Ok((d_xi, d_r))
    }
}

impl<P: PointFlux> MonotoneSystem for FeSystem<'_, P> {
    fn len(&self) -> usize {
        self.grid.n_dofs()
    }

    fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        let s = self.samples(u)?;
        Ok(self.assemble_residual(&s))
    }

    fn jacobian(&self, u: &[f64]) -> Result<Option<CsrMatrix>> {
        let s = self.samples(u)?;
        Ok(Some(self.assemble_matrix(self.couple_u, |i| (s[i].d_grad, s[i].d_zeta))))
    }

    /// Isotropic secant `κ = F·g/|g|²`, falling back to the mean diagonal of
    /// the tangent where the gradient vanishes. Values are floored at `1e-3`
    /// of the largest one (or set to 1 when all vanish, as for a degenerate
    /// flux at `u = 0`), so the matrix stays definite.
    fn picard_matrix(&self, u: &[f64]) -> Result<Option<CsrMatrix>> {
        let s = self.samples(u)?;
        let qps = self.grid.quadrature();
        let dim = self.grid.dim();
        let mut kappa: Vec<f64> = qps
            .iter()
            .enumerate()
            .map(|(i, q)| {
                let g = self.grad(q, u);
                let g2 = dot(&g, &g);
                if g2 > 1e-24 {
                    dot(&s[i].flux, &g) / g2
                } else {
                    (0..dim).map(|k| s[i].d_grad[k][k]).sum::<f64>() / dim as f64
                }
            })
            .collect();
        let top = kappa.iter().fold(0.0f64, |m, k| m.max(*k));
        let floor = if top > 1e-300 { 1e-3 * top } else { 1.0 };
        kappa.iter_mut().for_each(|k| *k = if k.is_finite() { k.max(floor) } else { floor });
        let m = self.assemble_matrix(false, |i| ([[kappa[i], 0.0], [0.0, kappa[i]]], [0.0; 2]));
        Ok(Some(m))
    }

    fn pinned(&self) -> Option<usize> {
        self.grid.is_periodic().then_some(0)
    }

    /// Periodic fields are shifted to zero mean; on a uniform periodic Q1
    /// grid the mean is the average of the nodal values.
    fn project(&self, u: &mut [f64]) {
        if self.grid.is_periodic() {
            let mean = pairwise_sum(u) / u.len() as f64;
            u.iter_mut().for_each(|v| *v -= mean);
        }
    }

    fn linear_solver(&self) -> LinearSolverKind {
        self.linear_solver
    }
}
