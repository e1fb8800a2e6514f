//! Reiterated two-scale pairings `∫_Ω u(x) f(x, x/ε, x/ε²) dx` and their
//! limits `∭_{Ω×Y×Z} u₀ f`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Var, Vars};
use crate::grid::{Boundary, Domain, Point, ScalarField, TensorGrid};
use crate::numeric::pairwise_sum;
use crate::solver::{check_resolution, resolving_cells};

/// What a test function is paired against.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairingKind {
    /// `u_ε` itself; the limit side uses `u₀`.
    #[default]
    Value,
    /// `∂₁u_ε`; the limit side uses `∂₁u₀ + ∂_{y₁}u₁ + ∂_{z₁}u₂`.
    Gradient,
}

fn one() -> String {
    "1".into()
}

/// Separable test function `φ(x)·g(y)·w(z)` as three expressions.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TestFunctionSpec {
    #[serde(default = "one")]
    pub x: String,
    #[serde(default = "one")]
    pub y: String,
    #[serde(default = "one")]
    pub z: String,
    #[serde(default)]
    pub kind: PairingKind,
}

impl TestFunctionSpec {
    pub fn new(x: &str, y: &str, z: &str) -> Self {
        TestFunctionSpec { x: x.into(), y: y.into(), z: z.into(), kind: PairingKind::Value }
    }

    pub fn gradient(mut self) -> Self {
        self.kind = PairingKind::Gradient;
        self
    }

    pub fn build(&self) -> Result<TestFunction> {
        TestFunction::new(&self.x, &self.y, &self.z, self.kind)
    }
}

#[derive(Clone, Debug)]
pub struct TestFunction {
    fx: Expr,
    gy: Expr,
    wz: Expr,
    pub kind: PairingKind,
}

fn only(e: &Expr, allowed: [Var; 2], what: &str) -> Result<()> {
    for v in [Var::X1, Var::X2, Var::Y1, Var::Y2, Var::Z1, Var::Z2, Var::T] {
        if e.uses(v) && !allowed.contains(&v) {
            return Err(Error::Usage(format!("{what} factor '{}' uses a foreign variable", e.source())));
        }
    }
    Ok(())
}

impl TestFunction {
    pub fn new(x: &str, y: &str, z: &str, kind: PairingKind) -> Result<Self> {
        let fx = Expr::parse_with_default(x, Var::X1)?;
        let gy = Expr::parse_with_default(y, Var::Y1)?;
        let wz = Expr::parse_with_default(z, Var::Z1)?;
        only(&fx, [Var::X1, Var::X2], "x")?;
        only(&gy, [Var::Y1, Var::Y2], "y")?;
        only(&wz, [Var::Z1, Var::Z2], "z")?;
        Ok(TestFunction { fx, gy, wz, kind })
    }

    pub fn label(&self) -> String {
        format!("({})*({})*({})", self.fx.source(), self.gy.source(), self.wz.source())
    }

    pub fn eval(&self, x: &Point, y: &Point, z: &Point) -> f64 {
        self.fx.eval(&Vars::at_x(*x)) * self.gy.eval(&Vars::at_y(*y)) * self.wz.eval(&Vars::at_z(*z))
    }

    pub fn eval_x(&self, x: &Point) -> f64 {
        self.fx.eval(&Vars::at_x(*x))
    }

    pub fn eval_y(&self, y: &Point) -> f64 {
        self.gy.eval(&Vars::at_y(*y))
    }

    pub fn eval_z(&self, z: &Point) -> f64 {
        self.wz.eval(&Vars::at_z(*z))
    }
}

/// Quadrature grid on Ω for scale `eps`: a multiple of `base_n` cells per
/// axis with at least 8 cells per period `ε²`.
pub fn pairing_grid(dim: usize, eps: f64, base_n: usize) -> Result<TensorGrid> {
    let need = resolving_cells(eps, 1.0);
    let k = need.div_ceil(base_n).max(2);
    TensorGrid::new(dim, base_n * k, Domain::unit_square(), Boundary::DirichletZero)
}

/// `∫_Ω u(x) f(x, x/ε, x/ε²) dx` by Gauss quadrature on `quad`, which must
/// resolve `ε²`.
pub fn twoscale_pairing_on(
    u: &(dyn Fn(&Point) -> f64 + Sync),
    f: &TestFunction,
    eps: f64,
    quad: &TensorGrid,
) -> Result<f64> {
    check_resolution(quad, eps)?;
    let terms: Vec<f64> = quad
        .quadrature()
        .par_iter()
        .with_min_len(1024)
        .map(|q| {
            let x = q.x;
            let y = [x[0] / eps, x[1] / eps];
            let z = [x[0] / (eps * eps), x[1] / (eps * eps)];
            q.weight * u(&x) * f.eval(&x, &y, &z)
        })
        .collect();
    Ok(pairwise_sum(&terms))
}

/// Pairing of a field on Ω, integrated on a refinement of its own grid.
pub fn twoscale_pairing(u: &ScalarField, f: &TestFunction, eps: f64) -> Result<f64> {
    let quad = pairing_grid(u.grid.dim(), eps, u.grid.n())?;
    twoscale_pairing_on(&|x| u.value_at(x), f, eps, &quad)
}

/// Pairing of `∂₁u` for a field on Ω.
pub fn twoscale_pairing_gradient(u: &ScalarField, f: &TestFunction, eps: f64) -> Result<f64> {
    let quad = pairing_grid(u.grid.dim(), eps, u.grid.n())?;
    twoscale_pairing_on(&|x| u.gradient_at(x)[0], f, eps, &quad)
}

/// `∭_{Ω×Y×Z} g(x, y, z)` by tensor-product Gauss quadrature over the three
/// grids' boxes.
pub fn triple_integral(
    g: &(dyn Fn(&Point, &Point, &Point) -> f64 + Sync),
    omega: &TensorGrid,
    grid_y: &TensorGrid,
    grid_z: &TensorGrid,
) -> f64 {
    let qy = grid_y.quadrature();
    let qz = grid_z.quadrature();
    let outer: Vec<f64> = omega
        .quadrature()
        .par_iter()
        .map(|qx| {
            let over_y: Vec<f64> = qy
                .iter()
                .map(|py| {
                    let over_z: Vec<f64> = qz.iter().map(|pz| pz.weight * g(&qx.x, &py.x, &pz.x)).collect();
                    py.weight * pairwise_sum(&over_z)
                })
                .collect();
            qx.weight * pairwise_sum(&over_y)
        })
        .collect();
    pairwise_sum(&outer)
}
