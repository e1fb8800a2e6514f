//! The homogenized problem `−div q(u₀, Du₀) = f` on Ω with `u₀ = 0` on ∂Ω.

use std::sync::Mutex;

use crate::cell::{interp_q_with_gradient, solve_outer_cell, EffectiveFluxTable};
use crate::error::{Error, Result};
use crate::fem::{FeSystem, FluxSample, PointFlux};
use crate::flux::{FluxCoefficient, Mat2};
use crate::grid::{Point, QuadPoint, ScalarField, TensorGrid};

use super::{solve_system, SolveOptions};

/// A source of `q(r, ξ)` together with `∂q/∂ξ` and `∂q/∂r`.
pub trait EffectiveFlux: Sync {
    fn dim(&self) -> usize;
    fn eval(&self, r: f64, xi: &Point) -> Result<(Point, Mat2, Point)>;
}

impl EffectiveFlux for EffectiveFluxTable {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, r: f64, xi: &Point) -> Result<(Point, Mat2, Point)> {
        interp_q_with_gradient(self, r, xi)
    }
}

/// `q(r, ξ) = κ ξ`.
#[derive(Clone, Copy, Debug)]
pub struct LinearFlux {
    pub dim: usize,
    pub kappa: f64,
}

impl EffectiveFlux for LinearFlux {
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, _r: f64, xi: &Point) -> Result<(Point, Mat2, Point)> {
        let k = self.kappa;
        let mut d = [[k, 0.0], [0.0, k]];
        if self.dim == 1 {
            d[1][1] = 0.0;
        }
        Ok(([k * xi[0], if self.dim == 1 { 0.0 } else { k * xi[1] }], d, [0.0; 2]))
    }
}

/// `q` by nested cell solves at every evaluation. Exact but expensive; meant
/// for verification runs on coarse grids.
pub struct DirectFlux<'a> {
    pub a: &'a FluxCoefficient,
    pub grid_y: &'a TensorGrid,
    pub grid_z: &'a TensorGrid,
    pub opts: &'a SolveOptions,
}

impl EffectiveFlux for DirectFlux<'_> {
    fn dim(&self) -> usize {
        self.a.dim
    }

    fn eval(&self, r: f64, xi: &Point) -> Result<(Point, Mat2, Point)> {
        let s = solve_outer_cell(self.a, r, *xi, self.grid_y, self.grid_z, self.opts)?;
        Ok((s.averaged_flux, s.tangent.d_xi, s.tangent.d_r))
    }
}

/// Effective flux from a closure.
pub struct FnFlux<F> {
    pub dim: usize,
    pub f: F,
}

impl<F> EffectiveFlux for FnFlux<F>
where
    F: Fn(f64, &Point) -> Result<(Point, Mat2, Point)> + Sync,
{
    fn dim(&self) -> usize {
        self.dim
    }

    fn eval(&self, r: f64, xi: &Point) -> Result<(Point, Mat2, Point)> {
        (self.f)(r, xi)
    }
}

/// A converged solution on Ω with its energy check `∫ a·Du` vs `∫ f u`.
#[derive(Clone, Debug)]
pub struct FieldSolution {
    pub u: ScalarField,
    pub residual_norm: f64,
    pub iterations: usize,
    pub flux_work: f64,
    pub source_work: f64,
}

impl FieldSolution {
    /// `|∫ a·Du − ∫ f u|`.
    pub fn energy_gap(&self) -> f64 {
        (self.flux_work - self.source_work).abs()
    }
}

struct MacroFlux<'a> {
    q: &'a dyn EffectiveFlux,
    range_hit: Mutex<Option<String>>,
}

impl PointFlux for MacroFlux<'_> {
    fn eval(&self, _q: usize, _qp: &QuadPoint, u: f64, grad: &Point) -> Result<FluxSample> {
        match self.q.eval(u, grad) {
            Ok((flux, d_grad, d_zeta)) => Ok(FluxSample { flux, d_grad, d_zeta }),
            Err(Error::Range(m)) => {
                *self.range_hit.lock().unwrap() = Some(m.clone());
                Err(Error::Range(m))
            }
            Err(e) => Err(e),
        }
    }
}

pub(crate) fn source_at_qps(grid: &TensorGrid, f: &dyn Fn(&Point) -> f64) -> Result<Vec<f64>> {
    let v: Vec<f64> = grid.quadrature().iter().map(|q| f(&q.x)).collect();
    if let Some(bad) = v.iter().position(|x| !x.is_finite()) {
        let x = grid.quadrature()[bad].x;
        return Err(Error::Domain(format!("source is not finite at ({}, {})", x[0], x[1])));
    }
    Ok(v)
}

pub(crate) fn check_omega_grid(grid: &TensorGrid, dim: usize) -> Result<()> {
    if grid.is_periodic() {
        return Err(Error::Usage("problems on Ω need a Dirichlet grid".into()));
    }
    if grid.dim() != dim {
        return Err(Error::Usage(format!("grid has dimension {}, flux has dimension {dim}", grid.dim())));
    }
    Ok(())
}

pub(crate) fn initial_values(grid: &TensorGrid, init: Option<&ScalarField>) -> Result<Vec<f64>> {
    match init {
        None => Ok(vec![0.0; grid.n_dofs()]),
        Some(u) if &u.grid == grid => Ok(u.values.clone()),
        Some(_) => Err(Error::Usage("initial guess lives on a different grid".into())),
    }
}

/// Solves `∫_Ω q(u₀, Du₀)·Dv = ∫_Ω f v` for all discrete `v`. A table whose
/// hull the iterates leave yields a range error asking for re-tabulation.
pub fn solve_macro(
    q: &dyn EffectiveFlux,
    f: &dyn Fn(&Point) -> f64,
    grid: &TensorGrid,
    opts: &SolveOptions,
    init: Option<&ScalarField>,
) -> Result<FieldSolution> {
    check_omega_grid(grid, q.dim())?;
    let flux = MacroFlux { q, range_hit: Mutex::new(None) };
    let mut sys = FeSystem::new(grid, &flux).with_source(source_at_qps(grid, f)?).coupled(true);
    sys.linear_solver = opts.linear_solver;
    let init = initial_values(grid, init)?;
    let sol = match solve_system(&sys, &init, opts) {
        Ok(s) => s,
        Err(e @ Error::Convergence { .. }) => {
            return Err(match flux.range_hit.lock().unwrap().take() {
                Some(m) => Error::Range(format!("macroscopic iterates left the effective-flux table: {m}")),
                None => e,
            })
        }
        Err(e) => return Err(e),
    };
    let (flux_work, source_work) = sys.energy_gap(&sol.solution)?;
    Ok(FieldSolution {
        u: ScalarField::new(grid, sol.solution)?,
        residual_norm: sol.residual_norm,
        iterations: sol.iterations,
        flux_work,
        source_work,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::solver::solve_monotone_system;

    #[test]
    fn constant_kappa_parabola() {
        let g = TensorGrid::unit_dirichlet(1, 128).unwrap();
        let s = solve_macro(&LinearFlux { dim: 1, kappa: 3.0 }, &|_| 1.0, &g, &SolveOptions::default(), None).unwrap();
        let err = (0..g.n_dofs())
            .map(|d| {
                let x = g.dof_coord(d)[0];
                (s.u.values[d] - x * (1.0 - x) / 6.0).abs()
            })
            .fold(0.0, f64::max);
        assert!(err <= 1e-4, "{err}");
        assert!(s.energy_gap() <= 1e-9);
    }

    #[test]
    fn zero_source_gives_zero() {
        let g = TensorGrid::unit_dirichlet(2, 8).unwrap();
        let s = solve_macro(&LinearFlux { dim: 2, kappa: 2.0 }, &|_| 0.0, &g, &SolveOptions::default(), None).unwrap();
        assert_eq!(s.u.max_abs(), 0.0);
    }

    #[test]
    fn linear_q_scales_with_source() {
        let g = TensorGrid::unit_dirichlet(2, 8).unwrap();
        let q = LinearFlux { dim: 2, kappa: 1.5 };
        let o = SolveOptions { tol: 1e-13, ..SolveOptions::default() };
        let f = |x: &Point| 1.0 + x[0] * x[1];
        let s1 = solve_macro(&q, &f, &g, &o, None).unwrap();
        let s2 = solve_macro(&q, &|x| 2.0 * f(x), &g, &o, None).unwrap();
        for (a, b) in s1.u.values.iter().zip(&s2.u.values) {
            assert!((2.0 * a - b).abs() < 1e-9);
        }
    }

    #[test]
    fn leaving_the_table_is_a_range_error() {
        use crate::cell::TableProvenance;
        let mut t = EffectiveFluxTable {
            dim: 1,
            r_grid: vec![-0.01, 0.01],
            xi_axes: vec![vec![-0.01, 0.0, 0.01]],
            values: vec![],
            residuals: vec![],
            provenance: TableProvenance { flux: "linear".into(), n_y: 0, n_z: 0, options: SolveOptions::default() },
        };
        for i in 0..t.len() {
            let (_, xi) = t.node(i);
            t.values.push([xi[0], 0.0]);
            t.residuals.push(0.0);
        }
        let g = TensorGrid::unit_dirichlet(1, 16).unwrap();
        let e = solve_macro(&t, &|_| 1.0, &g, &SolveOptions::default(), None).unwrap_err();
        assert!(matches!(e, Error::Range(_)), "{e:?}");
    }

    /// Discrete 1D p = 3 Laplacian `−(|u'|u')' = 1`. Its discrete first
    /// integral makes the cell flux `F₀ − k h`; `F₀` is found by bisection
    /// on `u(1) = 0` and the nodal values follow by summation.
    #[test]
    fn p_laplacian_first_integral() {
        let n = 256;
        let h = 1.0 / n as f64;
        let g = TensorGrid::unit_dirichlet(1, n).unwrap();
        let q = FnFlux {
            dim: 1,
            f: |_r: f64, xi: &Point| Ok(([xi[0].abs() * xi[0], 0.0], [[2.0 * xi[0].abs(), 0.0], [0.0; 2]], [0.0; 2])),
        };
        let s = solve_macro(&q, &|_| 1.0, &g, &SolveOptions::default(), None).unwrap();
        let slope = |f: f64| f.signum() * f.abs().sqrt();
        let end = |f0: f64| (0..n).map(|k| h * slope(f0 - k as f64 * h)).sum::<f64>();
        let f0 = crate::numeric::bisect(|f| Ok(end(f)), -2.0, 2.0).unwrap();
        let mut u = 0.0;
        let mut worst: f64 = 0.0;
        let mut worst_cont: f64 = 0.0;
        for k in 0..n - 1 {
            u += h * slope(f0 - k as f64 * h);
            worst = worst.max((s.u.values[k] - u).abs());
            // continuum solution (2/3)((1/2)^{3/2} − |1/2 − x|^{3/2})
            let x = (k + 1) as f64 * h;
            let exact = 2.0 / 3.0 * (0.5f64.powf(1.5) - (0.5 - x).abs().powf(1.5));
            worst_cont = worst_cont.max((s.u.values[k] - exact).abs());
        }
        assert!(worst < 1e-6, "{worst}");
        // O(h^{3/2}) near the kink of u' at x = 1/2
        assert!(worst_cont < 2e-5, "{worst_cont}");
        // the same system through the closure interface
        let r = |u: &[f64]| -> Result<Vec<f64>> {
            let h = 1.0 / n as f64;
            let v = |i: isize| if i < 0 || i as usize >= u.len() { 0.0 } else { u[i as usize] };
            Ok((0..u.len() as isize)
                .map(|i| {
                    let (dl, dr) = ((v(i) - v(i - 1)) / h, (v(i + 1) - v(i)) / h);
                    dl.abs() * dl - dr.abs() * dr - h
                })
                .collect())
        };
        let j: Option<fn(&[f64]) -> Result<crate::linalg::CsrMatrix>> = None;
        let s2 = solve_monotone_system(r, j, &vec![0.0; n - 1], &SolveOptions::default()).unwrap();
        for (a, b) in s.u.values.iter().zip(&s2.solution) {
            assert!((a - b).abs() < 1e-8);
        }
    }

    #[test]
    fn initial_guess_independent() {
        use rand::{Rng, SeedableRng};
        let g = TensorGrid::unit_dirichlet(2, 8).unwrap();
        let q = FnFlux {
            dim: 2,
            f: |_r: f64, xi: &Point| {
                let m = xi[0].hypot(xi[1]);
                let c = 1.0 + m;
                let mut d = [[c, 0.0], [0.0, c]];
                if m > 0.0 {
                    for i in 0..2 {
                        for k in 0..2 {
                            d[i][k] += xi[i] * xi[k] / m;
                        }
                    }
                }
                Ok(([c * xi[0], c * xi[1]], d, [0.0; 2]))
            },
        };
        let o = SolveOptions { tol: 1e-12, ..SolveOptions::default() };
        let s1 = solve_macro(&q, &|_| 4.0, &g, &o, None).unwrap();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let init = ScalarField::new(&g, (0..g.n_dofs()).map(|_| rng.gen_range(-1.0..1.0)).collect()).unwrap();
        let s2 = solve_macro(&q, &|_| 4.0, &g, &o, Some(&init)).unwrap();
        let d = s1.u.sub(&s2.u).unwrap().max_abs();
        assert!(d < 1e-8, "{d}");
    }
}
