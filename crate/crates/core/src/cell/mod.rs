//! Periodic cell problems: the inner corrector `π₂` on Z, the nested outer
//! corrector `π₁` on Y, and the effective fluxes `h` and `q` they define.

mod table;

use std::sync::Mutex;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{FeSystem, FluxSample, PointFlux};
use crate::flux::{FluxCoefficient, Mat2};
use crate::grid::{Point, QuadPoint, ScalarField, TensorGrid};
use crate::solver::{solve_system, JacobianMode, SolveOptions};

pub use table::{interp_q, interp_q_with_gradient, tabulate_q, EffectiveFluxTable, TableProvenance};

/// The macroscopic state a corrector is computed for.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Frozen {
    pub y: Option<Point>,
    pub r: f64,
    pub xi: Point,
}

/// Derivatives of the averaged flux with respect to `ξ` and `r`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Tangent {
    pub d_xi: Mat2,
    pub d_r: Point,
}

#[derive(Clone, Debug)]
pub struct CellSolution {
    /// Zero-mean periodic corrector.
    pub corrector: ScalarField,
    pub frozen: Frozen,
    /// `h(y, r, ξ)` for the inner problem, `q(r, ξ)` for the outer one.
    pub averaged_flux: Point,
    pub residual_norm: f64,
    pub iterations: usize,
    pub tangent: Tangent,
}

fn check_cell_grid(a: &FluxCoefficient, grid: &TensorGrid, what: &str) -> Result<()> {
    if !grid.is_periodic() {
        return Err(Error::Usage(format!("{what} cell problem needs a periodic grid")));
    }
    if grid.dim() != a.dim {
        return Err(Error::Usage(format!(
            "{what} grid has dimension {}, flux '{}' has dimension {}",
            grid.dim(),
            a.name,
            a.dim
        )));
    }
    if !a.periodic {
        return Err(Error::Usage(format!("flux '{}' is not periodic in its fast variables", a.name)));
    }
    Ok(())
}

fn shift(xi: &Point, g: &Point) -> Point {
    [xi[0] + g[0], xi[1] + g[1]]
}

struct InnerFlux<'a> {
    a: &'a FluxCoefficient,
    y: Point,
    r: f64,
    xi: Point,
    fd: bool,
}

impl PointFlux for InnerFlux<'_> {
    fn eval(&self, _q: usize, qp: &QuadPoint, _u: f64, grad: &Point) -> Result<FluxSample> {
        let lambda = shift(&self.xi, grad);
        let z = qp.x;
        let d_grad = if self.fd {
            self.a.d_lambda_fd(&self.y, &z, self.r, &lambda)
        } else {
            self.a.d_lambda(&self.y, &z, self.r, &lambda)
        };
        Ok(FluxSample {
            flux: self.a.eval(&self.y, &z, self.r, &lambda),
            d_grad,
            d_zeta: self.a.d_zeta(&self.y, &z, self.r, &lambda),
        })
    }
}

/// Solves `∫_Z a(y, z, r, ξ + D_zπ₂)·D_zθ dz = 0` for the zero-mean `π₂`;
/// the averaged flux is `h(y, r, ξ)`.
pub fn solve_inner_cell(
    a: &FluxCoefficient,
    y: Point,
    r: f64,
    xi: Point,
    grid_z: &TensorGrid,
    opts: &SolveOptions,
) -> Result<CellSolution> {
    solve_inner_cell_from(a, y, r, xi, grid_z, opts, None)
}

/// As [`solve_inner_cell`], warm-started from `init`.
pub fn solve_inner_cell_from(
    a: &FluxCoefficient,
    y: Point,
    r: f64,
    xi: Point,
    grid_z: &TensorGrid,
    opts: &SolveOptions,
    init: Option<&[f64]>,
) -> Result<CellSolution> {
    check_cell_grid(a, grid_z, "inner")?;
    let flux = InnerFlux { a, y, r, xi, fd: opts.jacobian == JacobianMode::FiniteDifference };
    let mut sys = FeSystem::new(grid_z, &flux);
    sys.linear_solver = opts.linear_solver;
    let zero = vec![0.0; grid_z.n_dofs()];
    let sol = solve_system(&sys, init.unwrap_or(&zero), opts)?;
    let averaged_flux = sys.average_flux(&sol.solution)?;
    let (d_xi, d_r) = sys.homogenized_tangent(&sol.solution)?;
    Ok(CellSolution {
        corrector: ScalarField::new(grid_z, sol.solution)?,
        frozen: Frozen { y: Some(y), r, xi },
        averaged_flux,
        residual_norm: sol.residual_norm,
        iterations: sol.iterations,
        tangent: Tangent { d_xi, d_r },
    })
}

/// `h(y, r, ξ)`.
pub fn eval_h(
    a: &FluxCoefficient,
    y: Point,
    r: f64,
    xi: Point,
    grid_z: &TensorGrid,
    opts: &SolveOptions,
) -> Result<Point> {
    Ok(solve_inner_cell(a, y, r, xi, grid_z, opts)?.averaged_flux)
}

fn at_y(e: Error, y: &Point) -> Error {
    match e {
        Error::Convergence { message, residual } => Error::Convergence {
            message: format!("inner cell at y = ({}, {}): {message}", y[0], y[1]),
            residual,
        },
        Error::Range(m) => Error::Range(format!("inner cell at y = ({}, {}): {m}", y[0], y[1])),
        Error::Domain(m) => Error::Domain(format!("inner cell at y = ({}, {}): {m}", y[0], y[1])),
        e => e,
    }
}

/// Outer flux `h(y, r, ξ + D_yπ₁)`, each evaluation a fresh inner solve
/// warm-started from the last corrector computed at the same point.
struct OuterFlux<'a> {
    a: &'a FluxCoefficient,
    r: f64,
    xi: Point,
    grid_z: &'a TensorGrid,
    opts: &'a SolveOptions,
    warm: Vec<Mutex<Option<Vec<f64>>>>,
}

impl PointFlux for OuterFlux<'_> {
    fn eval(&self, q: usize, qp: &QuadPoint, _u: f64, grad: &Point) -> Result<FluxSample> {
        let y = qp.x;
        let xi = shift(&self.xi, grad);
        let init = self.warm[q].lock().unwrap().clone();
        let s = solve_inner_cell_from(self.a, y, self.r, xi, self.grid_z, self.opts, init.as_deref())
            .map_err(|e| at_y(e, &y))?;
        let out = FluxSample { flux: s.averaged_flux, d_grad: s.tangent.d_xi, d_zeta: s.tangent.d_r };
        *self.warm[q].lock().unwrap() = Some(s.corrector.values);
        Ok(out)
    }
}

/// Solves `∫_Y h(y, r, ξ + D_yπ₁)·D_yθ dy = 0` for the zero-mean `π₁`; the
/// averaged flux is `q(r, ξ)`.
pub fn solve_outer_cell(
    a: &FluxCoefficient,
    r: f64,
    xi: Point,
    grid_y: &TensorGrid,
    grid_z: &TensorGrid,
    opts: &SolveOptions,
) -> Result<CellSolution> {
    solve_outer_cell_from(a, r, xi, grid_y, grid_z, opts, None)
}

pub fn solve_outer_cell_from(
    a: &FluxCoefficient,
    r: f64,
    xi: Point,
    grid_y: &TensorGrid,
    grid_z: &TensorGrid,
    opts: &SolveOptions,
    init: Option<&[f64]>,
) -> Result<CellSolution> {
    check_cell_grid(a, grid_y, "outer")?;
    check_cell_grid(a, grid_z, "inner")?;
    let flux = OuterFlux {
        a,
        r,
        xi,
        grid_z,
        opts,
        warm: (0..grid_y.quadrature().len()).map(|_| Mutex::new(None)).collect(),
    };
    let mut sys = FeSystem::new(grid_y, &flux);
    sys.linear_solver = opts.linear_solver;
    let zero = vec![0.0; grid_y.n_dofs()];
    let sol = solve_system(&sys, init.unwrap_or(&zero), opts)?;
    let averaged_flux = sys.average_flux(&sol.solution)?;
    let (d_xi, d_r) = sys.homogenized_tangent(&sol.solution)?;
    Ok(CellSolution {
        corrector: ScalarField::new(grid_y, sol.solution)?,
        frozen: Frozen { y: None, r, xi },
        averaged_flux,
        residual_norm: sol.residual_norm,
        iterations: sol.iterations,
        tangent: Tangent { d_xi, d_r },
    })
}

/// `q(r, ξ)`.
pub fn eval_q(
    a: &FluxCoefficient,
    r: f64,
    xi: Point,
    grid_y: &TensorGrid,
    grid_z: &TensorGrid,
    opts: &SolveOptions,
) -> Result<Point> {
    Ok(solve_outer_cell(a, r, xi, grid_y, grid_z, opts)?.averaged_flux)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flux::{make_linear_separable, make_phi_laplacian, ScalarMap};
    use crate::grid::integrate;
    use crate::nfunction::NFunction;

    fn sin_map() -> ScalarMap {
        ScalarMap::parse_z("2+sin(2*pi*z1)").unwrap()
    }

    #[test]
    fn harmonic_mean_inner() {
        let a = make_linear_separable(1, ScalarMap::constant(1.0), sin_map()).unwrap();
        let g = TensorGrid::cell(1, 256).unwrap();
        let s = solve_inner_cell(&a, [0.0; 2], 0.0, [1.0, 0.0], &g, &SolveOptions::default()).unwrap();
        assert!((s.averaged_flux[0] - 3f64.sqrt()).abs() < 1e-3, "{:?}", s.averaged_flux);
        assert!(integrate(&s.corrector).abs() < 1e-12);
        assert!(s.residual_norm <= 1e-10);
        // linear problem: tangent equals the effective coefficient
        assert!((s.tangent.d_xi[0][0] - s.averaged_flux[0]).abs() < 1e-9);
    }

    #[test]
    fn inner_mesh_convergence() {
        let a = make_linear_separable(1, ScalarMap::constant(1.0), sin_map()).unwrap();
        let errs: Vec<f64> = [32, 64, 128, 256]
            .iter()
            .map(|&n| {
                let g = TensorGrid::cell(1, n).unwrap();
                let h = eval_h(&a, [0.0; 2], 0.0, [1.0, 0.0], &g, &SolveOptions::default()).unwrap();
                (h[0] - 3f64.sqrt()).abs()
            })
            .collect();
        for w in errs.windows(2) {
            assert!(w[1] < w[0], "{errs:?}");
            assert!((w[0] / w[1]).log2() >= 1.5, "{errs:?}");
        }
    }

    #[test]
    fn linearity_and_zero() {
        let a = make_linear_separable(1, ScalarMap::constant(1.0), sin_map()).unwrap();
        let g = TensorGrid::cell(1, 64).unwrap();
        let o = SolveOptions::default();
        let h1 = eval_h(&a, [0.3, 0.0], 0.5, [1.0, 0.0], &g, &o).unwrap();
        let h2 = eval_h(&a, [0.3, 0.0], 0.5, [2.0, 0.0], &g, &o).unwrap();
        assert!((h2[0] - 2.0 * h1[0]).abs() < 1e-9);
        let h0 = eval_h(&a, [0.3, 0.0], 0.5, [0.0, 0.0], &g, &o).unwrap();
        assert_eq!(h0, [0.0, 0.0]);
    }

    #[test]
    fn z_independent_flux_has_zero_corrector() {
        let a = make_phi_laplacian(2, NFunction::power(3.0).unwrap(), ScalarMap::parse_y("2+sin(2*pi*y1)").unwrap(), ScalarMap::constant(1.0)).unwrap();
        let g = TensorGrid::cell(2, 8).unwrap();
        let xi = [0.7, -0.4];
        let y = [0.1, 0.2];
        let s = solve_inner_cell(&a, y, 0.0, xi, &g, &SolveOptions::default()).unwrap();
        assert!(s.corrector.max_abs() <= 1e-10);
        let direct = a.eval(&y, &[0.0; 2], 0.0, &xi);
        assert!((s.averaged_flux[0] - direct[0]).abs() < 1e-12);
        assert!((s.averaged_flux[1] - direct[1]).abs() < 1e-12);
    }

    #[test]
    fn p_laplacian_piecewise() {
        let c = ScalarMap::parse_z("piecewise:[1,4]").unwrap();
        // t³/3 gives the flux c|λ|λ
        let a = make_phi_laplacian(1, NFunction::scaled_power(3.0).unwrap(), ScalarMap::constant(1.0), c).unwrap();
        let g = TensorGrid::cell(1, 256).unwrap();
        let h = eval_h(&a, [0.0; 2], 0.0, [1.0, 0.0], &g, &SolveOptions::default()).unwrap();
        assert!((h[0] - 16.0 / 9.0).abs() < 1e-3, "{h:?}");
    }

    #[test]
    fn reiterated_harmonic_mean() {
        let cy = ScalarMap::parse_y("2+sin(2*pi*y1)").unwrap();
        let a = make_linear_separable(1, cy, sin_map()).unwrap();
        let gy = TensorGrid::cell(1, 64).unwrap();
        let gz = TensorGrid::cell(1, 64).unwrap();
        let s = solve_outer_cell(&a, 0.0, [1.0, 0.0], &gy, &gz, &SolveOptions::default()).unwrap();
        assert!((s.averaged_flux[0] - 3.0).abs() < 1e-2, "{:?}", s.averaged_flux);
        assert!(integrate(&s.corrector).abs() < 1e-12);
    }

    #[test]
    fn outer_with_constant_inner() {
        let cy = ScalarMap::parse_y("2+sin(2*pi*y1)").unwrap();
        let a = make_linear_separable(1, cy, ScalarMap::constant(1.0)).unwrap();
        let gy = TensorGrid::cell(1, 128).unwrap();
        let gz = TensorGrid::cell(1, 8).unwrap();
        let q = eval_q(&a, 0.0, [1.0, 0.0], &gy, &gz, &SolveOptions::default()).unwrap();
        assert!((q[0] - 3f64.sqrt()).abs() < 1e-3);
    }

    #[test]
    fn rejects_dirichlet_grid() {
        let a = make_linear_separable(1, ScalarMap::constant(1.0), sin_map()).unwrap();
        let g = TensorGrid::unit_dirichlet(1, 8).unwrap();
        let e = solve_inner_cell(&a, [0.0; 2], 0.0, [1.0, 0.0], &g, &SolveOptions::default()).unwrap_err();
        assert!(matches!(e, Error::Usage(_)));
    }
}
