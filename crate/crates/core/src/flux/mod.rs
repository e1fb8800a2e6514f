//! Coefficients `a(y, z, ζ, λ)`: built-in families, custom closures and the
//! sampling verifier for the structural hypotheses.

mod verify;

use std::fmt;
use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::expr::{Expr, Var, Vars};
use crate::grid::Point;
use crate::nfunction::{MonotoneCubic, NFunction, NfSpec};
use crate::numeric::linspace;

pub use verify::{verify_hypotheses, HypothesisEntry, HypothesisReport, Sampler, Witness};

pub type Mat2 = [[f64; 2]; 2];

type EvalFn = dyn Fn(&Point, &Point, f64, &Point) -> Point + Send + Sync;
type JacFn = dyn Fn(&Point, &Point, f64, &Point) -> Mat2 + Send + Sync;
type PieceFn = dyn Fn(&Point, &Point, &Point, &Point) -> bool + Send + Sync;

/// A periodic scalar coefficient on the unit cell, from an expression or a
/// closure.
#[derive(Clone)]
pub struct ScalarMap {
    f: Arc<dyn Fn(&Point) -> f64 + Send + Sync>,
    expr: Option<Expr>,
    label: String,
}

impl fmt::Debug for ScalarMap {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ScalarMap({})", self.label)
    }
}

impl ScalarMap {
    pub fn constant(c: f64) -> Self {
        ScalarMap { f: Arc::new(move |_| c), expr: Some(Expr::constant(c)), label: format!("{c}") }
    }

    pub fn from_fn(label: &str, f: impl Fn(&Point) -> f64 + Send + Sync + 'static) -> Self {
        ScalarMap { f: Arc::new(f), expr: None, label: label.to_string() }
    }

    /// Coefficient in the `y` variables (`y1`, `y2`).
    pub fn parse_y(src: &str) -> Result<Self> {
        Self::parse(src, Var::Y1)
    }

    /// Coefficient in the `z` variables (`z1`, `z2`).
    pub fn parse_z(src: &str) -> Result<Self> {
        Self::parse(src, Var::Z1)
    }

    fn parse(src: &str, axis: Var) -> Result<Self> {
        let e = Expr::parse_with_default(src, axis)?;
        let foreign = match axis {
            Var::Y1 => [Var::X1, Var::X2, Var::Z1, Var::Z2, Var::T],
            _ => [Var::X1, Var::X2, Var::Y1, Var::Y2, Var::T],
        };
        if let Some(v) = foreign.iter().find(|v| e.uses(**v)) {
            return Err(Error::Construction(format!("coefficient '{src}' may not use {v:?}")));
        }
        let ee = e.clone();
        let f: Arc<dyn Fn(&Point) -> f64 + Send + Sync> = if axis == Var::Y1 {
            Arc::new(move |p| ee.eval(&Vars::at_y(*p)))
        } else {
            Arc::new(move |p| ee.eval(&Vars::at_z(*p)))
        };
        Ok(ScalarMap { f, expr: Some(e), label: src.to_string() })
    }

    pub fn eval(&self, p: &Point) -> f64 {
        (self.f)(p)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// Whether `a` and `b` lie in the same piece of every piecewise part.
    pub fn same_piece(&self, a: &Point, b: &Point) -> bool {
        match &self.expr {
            Some(e) if e.has_piecewise() => {
                let va = Vars { y: *a, z: *a, ..Default::default() };
                let vb = Vars { y: *b, z: *b, ..Default::default() };
                e.same_piece(&va, &vb)
            }
            _ => true,
        }
    }

    pub fn is_piecewise(&self) -> bool {
        self.expr.as_ref().is_some_and(|e| e.has_piecewise())
    }

    /// Sampled `(min, max)` over the unit cell; errors on a nonpositive or
    /// non-finite value.
    fn check_positive(&self, dim: usize) -> Result<(f64, f64)> {
        let axis = linspace(-0.5, 0.5, 65);
        let ys: &[f64] = if dim == 1 { &[0.0] } else { &axis };
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &b in ys {
            for &a in &axis {
                let v = self.eval(&[a, b]);
                if !(v > 0.0) || !v.is_finite() {
                    return Err(Error::Construction(format!(
                        "coefficient '{}' is {v} at ({a}, {b}); must be positive",
                        self.label
                    )));
                }
                lo = lo.min(v);
                hi = hi.max(v);
            }
        }
        Ok((lo, hi))
    }
}

/// Continuous nonincreasing `h : [0, ∞) → (0, 1)` with a positive lower bound.
#[derive(Clone)]
pub struct DegenerateWeight {
    h: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    pub h_min: f64,
    label: String,
}

impl fmt::Debug for DegenerateWeight {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "DegenerateWeight({}, h_min = {})", self.label, self.h_min)
    }
}

impl DegenerateWeight {
    pub fn new(label: &str, h: impl Fn(f64) -> f64 + Send + Sync + 'static, h_min: f64) -> Result<Self> {
        let w = DegenerateWeight { h: Arc::new(h), h_min, label: label.to_string() };
        w.validate()?;
        Ok(w)
    }

    pub fn constant(h0: f64) -> Result<Self> {
        Self::new(&format!("{h0}"), move |_| h0, h0)
    }

    /// Weight from an expression in `t`.
    pub fn parse(src: &str, h_min: f64) -> Result<Self> {
        let e = Expr::parse_with_default(src, Var::T)?;
        Self::new(src, move |t| e.eval(&Vars::at_t(t)), h_min)
    }

    pub fn eval(&self, t: f64) -> f64 {
        (self.h)(t)
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    /// `h(0) < 1`, nonincreasing and `≥ h_min > 0` on `[0, 1e3]`.
    pub fn validate(&self) -> Result<()> {
        if !(self.h_min > 0.0) {
            return Err(Error::Construction("weight lower bound must be positive".into()));
        }
        let mut grid = vec![0.0];
        grid.extend(crate::numeric::logspace(1e-4, 1e3, 400));
        let mut prev = f64::INFINITY;
        for &t in &grid {
            let v = self.eval(t);
            if !v.is_finite() || v >= 1.0 {
                return Err(Error::Construction(format!("weight h({t}) = {v} must lie in (0, 1)")));
            }
            if v < self.h_min * (1.0 - 1e-12) {
                return Err(Error::Construction(format!("weight h({t}) = {v} is below h_min")));
            }
            if v > prev * (1.0 + 1e-12) {
                return Err(Error::Construction(format!("weight increases at t = {t}")));
            }
            prev = v;
        }
        Ok(())
    }
}

/// `a(y, z, ζ, λ) ∈ ℝᵈ` with optional analytic derivatives and metadata.
#[derive(Clone)]
pub struct FluxCoefficient {
    pub dim: usize,
    pub name: String,
    eval: Arc<EvalFn>,
    d_lambda: Option<Arc<JacFn>>,
    d_zeta: Option<Arc<EvalFn>>,
    /// Declares Y×Z periodicity.
    pub periodic: bool,
    /// `(Φ, Ψ)` governing the growth.
    pub nf_pair: Option<(NFunction, NFunction)>,
    /// Coercivity weight; `None` means the flux is checked against the
    /// constant weight `1/2`.
    pub weight: Option<DegenerateWeight>,
    same_piece: Option<Arc<PieceFn>>,
}

impl fmt::Debug for FluxCoefficient {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FluxCoefficient")
            .field("dim", &self.dim)
            .field("name", &self.name)
            .field("periodic", &self.periodic)
            .field("analytic_jacobian", &self.d_lambda.is_some())
            .field("weight", &self.weight)
            .finish()
    }
}

/// Weight assumed for families without an explicit degenerate weight.
pub const IMPLIED_WEIGHT: f64 = 0.5;

fn norm(v: &Point, dim: usize) -> f64 {
    if dim == 1 {
        v[0].abs()
    } else {
        v[0].hypot(v[1])
    }
}

impl FluxCoefficient {
    /// Arbitrary flux from a closure. No derivatives, not periodic-declared,
    /// no growth pair until set.
    pub fn custom(
        dim: usize,
        name: &str,
        eval: impl Fn(&Point, &Point, f64, &Point) -> Point + Send + Sync + 'static,
    ) -> Self {
        FluxCoefficient {
            dim,
            name: name.to_string(),
            eval: Arc::new(eval),
            d_lambda: None,
            d_zeta: None,
            periodic: false,
            nf_pair: None,
            weight: None,
            same_piece: None,
        }
    }

    pub fn with_d_lambda(mut self, j: impl Fn(&Point, &Point, f64, &Point) -> Mat2 + Send + Sync + 'static) -> Self {
        self.d_lambda = Some(Arc::new(j));
        self
    }

    pub fn with_d_zeta(mut self, j: impl Fn(&Point, &Point, f64, &Point) -> Point + Send + Sync + 'static) -> Self {
        self.d_zeta = Some(Arc::new(j));
        self
    }

    pub fn with_nf_pair(mut self, phi: NFunction, psi: NFunction) -> Self {
        self.nf_pair = Some((phi, psi));
        self
    }

    pub fn with_periodic(mut self, periodic: bool) -> Self {
        self.periodic = periodic;
        self
    }

    pub fn with_weight(mut self, w: DegenerateWeight) -> Self {
        self.weight = Some(w);
        self
    }

    pub fn has_analytic_jacobian(&self) -> bool {
        self.d_lambda.is_some()
    }

    pub fn eval(&self, y: &Point, z: &Point, zeta: f64, lambda: &Point) -> Point {
        let mut a = (self.eval)(y, z, zeta, lambda);
        if self.dim == 1 {
            a[1] = 0.0;
        }
        a
    }

    /// `∂a/∂λ`, analytic when available, else central differences.
    pub fn d_lambda(&self, y: &Point, z: &Point, zeta: f64, lambda: &Point) -> Mat2 {
        match &self.d_lambda {
            Some(j) => {
                let mut m = j(y, z, zeta, lambda);
                if self.dim == 1 {
                    m[0][1] = 0.0;
                    m[1] = [0.0; 2];
                }
                m
            }
            None => self.d_lambda_fd(y, z, zeta, lambda),
        }
    }

    /// Central-difference `∂a/∂λ` (column `k` is the derivative along `e_k`).
    pub fn d_lambda_fd(&self, y: &Point, z: &Point, zeta: f64, lambda: &Point) -> Mat2 {
        let mut m = [[0.0; 2]; 2];
        for k in 0..self.dim {
            let h = 1e-6 * lambda[k].abs().max(1.0);
            let (mut lp, mut lm) = (*lambda, *lambda);
            lp[k] += h;
            lm[k] -= h;
            let (ap, am) = (self.eval(y, z, zeta, &lp), self.eval(y, z, zeta, &lm));
            for i in 0..self.dim {
                m[i][k] = (ap[i] - am[i]) / (2.0 * h);
            }
        }
        m
    }

    /// `∂a/∂ζ`.
    pub fn d_zeta(&self, y: &Point, z: &Point, zeta: f64, lambda: &Point) -> Point {
        if let Some(j) = &self.d_zeta {
            let mut v = j(y, z, zeta, lambda);
            if self.dim == 1 {
                v[1] = 0.0;
            }
            return v;
        }
        let h = 1e-6 * zeta.abs().max(1.0);
        let (ap, am) = (self.eval(y, z, zeta + h, lambda), self.eval(y, z, zeta - h, lambda));
        [(ap[0] - am[0]) / (2.0 * h), (ap[1] - am[1]) / (2.0 * h)]
    }

    /// True when `(y, z)` and `(y′, z′)` lie in the same smooth piece.
    pub fn same_piece(&self, y: &Point, z: &Point, y2: &Point, z2: &Point) -> bool {
        self.same_piece.as_ref().map_or(true, |f| f(y, z, y2, z2))
    }

    /// Coercivity weight `θ(ζ) = Φ̃⁻¹(Φ(h(|ζ|)))` used by the H3 check.
    pub(crate) fn weight_at(&self, zeta: f64) -> f64 {
        match &self.weight {
            Some(w) => w.eval(zeta.abs()),
            None => IMPLIED_WEIGHT,
        }
    }

    pub(crate) fn h_min(&self) -> f64 {
        self.weight.as_ref().map_or(IMPLIED_WEIGHT, |w| w.h_min)
    }
}

fn piece_fn(c_y: &ScalarMap, c_z: &ScalarMap) -> Option<Arc<PieceFn>> {
    if !c_y.is_piecewise() && !c_z.is_piecewise() {
        return None;
    }
    let (cy, cz) = (c_y.clone(), c_z.clone());
    Some(Arc::new(move |y, z, y2, z2| cy.same_piece(y, y2) && cz.same_piece(z, z2)))
}

/// `a = c_y(y) c_z(z) λ`, growth pair `Φ = Ψ = t²/2`.
pub fn make_linear_separable(dim: usize, c_y: ScalarMap, c_z: ScalarMap) -> Result<FluxCoefficient> {
    c_y.check_positive(dim)?;
    c_z.check_positive(dim)?;
    let (cy, cz) = (c_y.clone(), c_z.clone());
    let (jy, jz) = (c_y.clone(), c_z.clone());
    let nf = NFunction::scaled_power(2.0)?;
    let mut f = FluxCoefficient::custom(dim, "linear_separable", move |y, z, _, l| {
        let c = cy.eval(y) * cz.eval(z);
        [c * l[0], c * l[1]]
    })
    .with_d_lambda(move |y, z, _, _| {
        let c = jy.eval(y) * jz.eval(z);
        [[c, 0.0], [0.0, c]]
    })
    .with_d_zeta(|_, _, _, _| [0.0; 2])
    .with_nf_pair(nf.clone(), nf)
    .with_periodic(true);
    f.same_piece = piece_fn(&c_y, &c_z);
    Ok(f)
}

/// Isotropic `φ(|λ|) λ/|λ|` with the Jacobian
/// `φ(r)/r · I + (φ′(r) − φ(r)/r) λλᵀ/r²`, `r = |λ|`.
#[derive(Clone)]
struct IsoFlux {
    nf: NFunction,
    dim: usize,
}

impl IsoFlux {
    fn flux(&self, l: &Point) -> Point {
        let r = norm(l, self.dim);
        if r == 0.0 {
            return [0.0; 2];
        }
        let s = self.nf.density(r).unwrap_or(f64::NAN) / r;
        [s * l[0], s * l[1]]
    }

    fn jac(&self, l: &Point) -> Mat2 {
        let r = norm(l, self.dim);
        let d2 = |t: f64| self.nf.second_derivative(t).unwrap_or(f64::NAN);
        if r == 0.0 {
            let s = d2(0.0);
            return [[s, 0.0], [0.0, s]];
        }
        let phi = self.nf.density(r).unwrap_or(f64::NAN);
        let a = phi / r;
        let b = (d2(r) - a) / (r * r);
        [[a + b * l[0] * l[0], b * l[0] * l[1]], [b * l[1] * l[0], a + b * l[1] * l[1]]]
    }
}

/// `a = c_y(y) c_z(z) φ(|λ|) λ/|λ|`.
pub fn make_phi_laplacian(dim: usize, nf: NFunction, c_y: ScalarMap, c_z: ScalarMap) -> Result<FluxCoefficient> {
    c_y.check_positive(dim)?;
    c_z.check_positive(dim)?;
    check_growth(&nf)?;
    let iso = IsoFlux { nf: nf.clone(), dim };
    let (cy, cz, f1) = (c_y.clone(), c_z.clone(), iso.clone());
    let (jy, jz) = (c_y.clone(), c_z.clone());
    let mut f = FluxCoefficient::custom(dim, "phi_laplacian", move |y, z, _, l| {
        let c = cy.eval(y) * cz.eval(z);
        let a = f1.flux(l);
        [c * a[0], c * a[1]]
    })
    .with_d_zeta(|_, _, _, _| [0.0; 2])
    .with_nf_pair(nf.clone(), nf)
    .with_periodic(true);
    f = f.with_d_lambda(move |y, z, _, l| scale(jy.eval(y) * jz.eval(z), iso.jac(l)));
    f.same_piece = piece_fn(&c_y, &c_z);
    Ok(f)
}

/// `a = c_y(y) c_z(z) g(h(|ζ|)) φ(|λ|) λ/|λ|` with `g(s) = Φ̃⁻¹(Φ(s))`.
pub fn make_degenerate(
    dim: usize,
    nf: NFunction,
    c_y: ScalarMap,
    c_z: ScalarMap,
    w: DegenerateWeight,
) -> Result<FluxCoefficient> {
    c_y.check_positive(dim)?;
    c_z.check_positive(dim)?;
    check_growth(&nf)?;
    w.validate()?;
    let g = Arc::new(GrowthMatch::new(&nf)?);
    let iso = IsoFlux { nf: nf.clone(), dim };
    let weight = {
        let (g, w) = (g.clone(), w.clone());
        Arc::new(move |zeta: f64| g.eval(w.eval(zeta.abs())))
    };
    let (cy, cz, f1, wt) = (c_y.clone(), c_z.clone(), iso.clone(), weight.clone());
    let mut f = FluxCoefficient::custom(dim, "degenerate", move |y, z, zeta, l| {
        let c = cy.eval(y) * cz.eval(z) * wt(zeta);
        let a = f1.flux(l);
        [c * a[0], c * a[1]]
    });
    let (jy, jz, wj) = (c_y.clone(), c_z.clone(), weight.clone());
    let (zy, zz, zi, wz) = (c_y.clone(), c_z.clone(), iso.clone(), weight);
    f = f
        .with_d_lambda(move |y, z, zeta, l| scale(jy.eval(y) * jz.eval(z) * wj(zeta), iso.jac(l)))
        .with_d_zeta(move |y, z, zeta, l| {
            let h = 1e-6 * zeta.abs().max(1.0);
            let dw = (wz(zeta + h) - wz(zeta - h)) / (2.0 * h);
            let c = zy.eval(y) * zz.eval(z) * dw;
            let a = zi.flux(l);
            [c * a[0], c * a[1]]
        })
        .with_nf_pair(nf.clone(), nf)
        .with_periodic(true)
        .with_weight(w);
    f.same_piece = piece_fn(&c_y, &c_z);
    Ok(f)
}

fn scale(c: f64, m: Mat2) -> Mat2 {
    [[c * m[0][0], c * m[0][1]], [c * m[1][0], c * m[1][1]]]
}

fn check_growth(nf: &NFunction) -> Result<()> {
    let grid = crate::numeric::logspace(1e-3, 1e3, 61);
    let gi = crate::nfunction::simonenko_indices(nf, &grid)?;
    if !(gi.lower > 1.0) || !gi.upper.is_finite() {
        return Err(Error::Construction(format!(
            "growth indices ({}, {}) of {} are not inside (1, ∞)",
            gi.lower,
            gi.upper,
            nf.describe()
        )));
    }
    Ok(())
}

/// `g(s) = Φ̃⁻¹(Φ(s))` on `[0, 1]`: closed form for monomials, otherwise a
/// monotone cubic table.
enum GrowthMatch {
    Exact(NFunction),
    Table(MonotoneCubic),
}

impl GrowthMatch {
    fn new(nf: &NFunction) -> Result<Self> {
        if nf.is_closed_form() {
            return Ok(GrowthMatch::Exact(nf.clone()));
        }
        let s = linspace(0.0, 1.0, 257);
        let v: Vec<f64> = s.iter().map(|&s| nf.conjugate_inverse_of_value(s)).collect::<Result<_>>()?;
        Ok(GrowthMatch::Table(MonotoneCubic::new(s, v)?))
    }

    fn eval(&self, s: f64) -> f64 {
        match self {
            GrowthMatch::Exact(nf) => nf.conjugate_inverse_of_value(s).unwrap_or(f64::NAN),
            GrowthMatch::Table(t) => t.eval(s),
        }
    }
}

fn default_one() -> String {
    "1".into()
}

/// Config description of a coefficient family.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum FluxSpec {
    LinearSeparable {
        #[serde(default = "default_one")]
        c_y: String,
        #[serde(default = "default_one")]
        c_z: String,
    },
    PhiLaplacian {
        #[serde(default)]
        nf: Option<NfSpec>,
        #[serde(default = "default_one")]
        c_y: String,
        #[serde(default = "default_one")]
        c_z: String,
    },
    Degenerate {
        #[serde(default)]
        nf: Option<NfSpec>,
        #[serde(default = "default_one")]
        c_y: String,
        #[serde(default = "default_one")]
        c_z: String,
        /// Weight expression in `t`.
        h: String,
        h_min: f64,
    },
}

impl FluxSpec {
    /// Builds the coefficient; `fallback_nf` is used when the family carries
    /// no N-function of its own.
    pub fn build(&self, dim: usize, fallback_nf: Option<&NfSpec>, base_dir: Option<&Path>) -> Result<FluxCoefficient> {
        let nf_of = |nf: &Option<NfSpec>| -> Result<NFunction> {
            match nf.as_ref().or(fallback_nf) {
                Some(s) => s.build(base_dir),
                None => Err(Error::Usage("flux family needs an N-function ('nf')".into())),
            }
        };
        match self {
            FluxSpec::LinearSeparable { c_y, c_z } => {
                make_linear_separable(dim, ScalarMap::parse_y(c_y)?, ScalarMap::parse_z(c_z)?)
            }
            FluxSpec::PhiLaplacian { nf, c_y, c_z } => {
                make_phi_laplacian(dim, nf_of(nf)?, ScalarMap::parse_y(c_y)?, ScalarMap::parse_z(c_z)?)
            }
            FluxSpec::Degenerate { nf, c_y, c_z, h, h_min } => make_degenerate(
                dim,
                nf_of(nf)?,
                ScalarMap::parse_y(c_y)?,
                ScalarMap::parse_z(c_z)?,
                DegenerateWeight::parse(h, *h_min)?,
            ),
        }
    }
}
