//! Direct solve of the oscillating problem
//! `−div a(x/ε, x/ε², u_ε, Du_ε) = f` on Ω with `u_ε = 0` on ∂Ω.

use crate::error::{Error, Result};
use crate::fem::{FeSystem, FluxSample, PointFlux};
use crate::flux::FluxCoefficient;
use crate::grid::{Point, QuadPoint, ScalarField, TensorGrid};

use super::macroscopic::{check_omega_grid, initial_values, source_at_qps, FieldSolution};
use super::{solve_system, JacobianMode, SolveOptions};

/// Finest-scale cells per period `ε²` the grid must provide.
pub const CELLS_PER_FINE_PERIOD: f64 = 8.0;

/// Usage error unless every axis has spacing `≤ ε²/8`.
pub fn check_resolution(grid: &TensorGrid, eps: f64) -> Result<()> {
    if !(eps > 0.0 && eps <= 1.0) {
        return Err(Error::Usage(format!("eps must lie in (0, 1], got {eps}")));
    }
    let need = eps * eps / CELLS_PER_FINE_PERIOD;
    let h = grid.spacing();
    for k in 0..grid.dim() {
        if h[k] > need * (1.0 + 1e-12) {
            return Err(Error::Usage(format!(
                "grid spacing {} does not resolve eps = {eps}: need at most eps²/8 = {need} (n ≥ {})",
                h[k],
                (grid.domain().length[k] / need).ceil()
            )));
        }
    }
    Ok(())
}

/// Smallest power-of-two cell count per axis resolving `eps` on a box of
/// side `length`.
pub fn resolving_cells(eps: f64, length: f64) -> usize {
    let need = (length * CELLS_PER_FINE_PERIOD / (eps * eps) * (1.0 - 1e-12)).ceil() as usize;
    need.max(2).next_power_of_two()
}

pub(crate) fn scale(x: &Point, s: f64) -> Point {
    [x[0] / s, x[1] / s]
}

struct FineFlux<'a> {
    a: &'a FluxCoefficient,
    eps: f64,
    fd: bool,
}

impl PointFlux for FineFlux<'_> {
    fn eval(&self, _q: usize, qp: &QuadPoint, u: f64, grad: &Point) -> Result<FluxSample> {
        let y = scale(&qp.x, self.eps);
        let z = scale(&qp.x, self.eps * self.eps);
        let d_grad = if self.fd { self.a.d_lambda_fd(&y, &z, u, grad) } else { self.a.d_lambda(&y, &z, u, grad) };
        Ok(FluxSample { flux: self.a.eval(&y, &z, u, grad), d_grad, d_zeta: self.a.d_zeta(&y, &z, u, grad) })
    }
}

/// Solves `∫_Ω a(x/ε, x/ε², u_ε, Du_ε)·Dv = ∫_Ω f v` on a grid resolving
/// the finest period.
pub fn solve_fine(
    a: &FluxCoefficient,
    eps: f64,
    f: &dyn Fn(&Point) -> f64,
    grid: &TensorGrid,
    opts: &SolveOptions,
    init: Option<&ScalarField>,
) -> Result<FieldSolution> {
    check_omega_grid(grid, a.dim)?;
    check_resolution(grid, eps)?;
    let flux = FineFlux { a, eps, fd: opts.jacobian == JacobianMode::FiniteDifference };
    let mut sys = FeSystem::new(grid, &flux).with_source(source_at_qps(grid, f)?).coupled(true);
    sys.linear_solver = opts.linear_solver;
    let sol = solve_system(&sys, &initial_values(grid, init)?, opts)?;
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
    use crate::flux::{make_linear_separable, ScalarMap};
    use crate::grid::integrate_fn;
    use crate::solver::{solve_macro, LinearFlux};

    fn sin_flux() -> FluxCoefficient {
        make_linear_separable(
            1,
            ScalarMap::parse_y("2+sin(2*pi*y1)").unwrap(),
            ScalarMap::parse_z("2+sin(2*pi*z1)").unwrap(),
        )
        .unwrap()
    }

    #[test]
    fn identity_flux_ignores_eps() {
        let a = make_linear_separable(1, ScalarMap::constant(1.0), ScalarMap::constant(1.0)).unwrap();
        let g = TensorGrid::unit_dirichlet(1, 128).unwrap();
        for eps in [0.5, 0.25] {
            let s = solve_fine(&a, eps, &|_| 1.0, &g, &SolveOptions::default(), None).unwrap();
            for d in 0..g.n_dofs() {
                let x = g.dof_coord(d)[0];
                assert!((s.u.values[d] - x * (1.0 - x) / 2.0).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn under_resolved_grid_is_refused() {
        let g = TensorGrid::unit_dirichlet(1, 64).unwrap();
        let e = solve_fine(&sin_flux(), 0.25, &|_| 1.0, &g, &SolveOptions::default(), None).unwrap_err();
        assert!(matches!(e, Error::Usage(_)));
        assert_eq!(resolving_cells(0.25, 1.0), 128);
        assert!(check_resolution(&TensorGrid::unit_dirichlet(1, 128).unwrap(), 0.25).is_ok());
    }

    #[test]
    fn energy_identity_and_convergence() {
        let a = sin_flux();
        let o = SolveOptions::default();
        let mut errs = vec![];
        for eps in [0.25, 0.125] {
            let g = TensorGrid::unit_dirichlet(1, resolving_cells(eps, 1.0)).unwrap();
            let s = solve_fine(&a, eps, &|_| 1.0, &g, &o, None).unwrap();
            assert!(s.energy_gap() <= 1e-8, "{}", s.energy_gap());
            let u0 = solve_macro(&LinearFlux { dim: 1, kappa: 3.0 }, &|_| 1.0, &g, &o, None).unwrap();
            let d = s.u.sub(&u0.u).unwrap();
            errs.push(integrate_fn(&g, |x| d.value_at(x).powi(2)).sqrt());
        }
        assert!(errs[1] < errs[0], "{errs:?}");
    }
}
