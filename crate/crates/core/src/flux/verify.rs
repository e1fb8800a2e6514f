//! Sampling verifier for the structural hypotheses H1–H6.
//!
//! Every check is evaluated on pseudo-random tuples `(y, z, ζ, ζ′, λ, λ′)`
//! drawn from a seeded generator. Samples are evaluated in parallel and
//! merged in sample order, so reports are reproducible.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::FluxCoefficient;
use crate::error::{Error, Result};
use crate::grid::Point;
use crate::nfunction::{check_domination, NFunction};
use crate::numeric::logspace;

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
pub struct Sampler {
    pub n_points: usize,
    pub seed: u64,
    /// `ζ` is drawn from `[-zeta_range, zeta_range]`.
    pub zeta_range: f64,
    /// Components of `λ` are drawn from `[-lambda_range, lambda_range]`.
    pub lambda_range: f64,
}

impl Default for Sampler {
    fn default() -> Self {
        Sampler { n_points: 256, seed: 0, zeta_range: 2.0, lambda_range: 3.0 }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Witness {
    pub y: Point,
    pub z: Point,
    pub zeta: f64,
    pub zeta2: f64,
    pub lambda: Point,
    pub lambda2: Point,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypothesisEntry {
    pub name: String,
    pub passed: bool,
    /// Smallest (relative) margin over the samples; negative means violated.
    pub worst_margin: f64,
    pub witness: Option<Witness>,
}

/// Constants fitted from the samples (`c2 = c4 = 1` in the growth bound).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
pub struct FittedConstants {
    pub c1: f64,
    pub c2: f64,
    pub c3: f64,
    pub c4: f64,
    pub c5: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HypothesisReport {
    pub entries: Vec<HypothesisEntry>,
    /// `Φ̃⁻¹(Φ(h_min))`.
    pub theta: f64,
    pub constants: FittedConstants,
    /// Largest excess of `|∂a/∂λ − FD|` over `max(1e-5, 1e-4|a|)`; `None`
    /// without an analytic Jacobian.
    pub jacobian_excess: Option<f64>,
    /// Smallest `k` with `Φ(t) ≤ Ψ(kt)` on the check grid, if any.
    pub domination_k: Option<f64>,
}

impl HypothesisReport {
    pub fn entry(&self, name: &str) -> Option<&HypothesisEntry> {
        self.entries.iter().find(|e| e.name == name)
    }

    pub fn passed(&self, name: &str) -> bool {
        self.entry(name).is_some_and(|e| e.passed)
    }

    pub fn all_passed(&self) -> bool {
        self.entries.iter().all(|e| e.passed)
    }

    pub fn failed(&self) -> Vec<&str> {
        self.entries.iter().filter(|e| !e.passed).map(|e| e.name.as_str()).collect()
    }
}

const MARGIN_TOL: f64 = 1e-9;
const SHIFT_TOL: f64 = 1e-12;
const HALVINGS: i32 = 10;
const NEAR_STEP: f64 = 1e-2;

struct Sample {
    w: Witness,
    dir: Point,
    shift_y: Point,
    shift_z: Point,
}

/// Per-sample margins; `NaN` marks a skipped check.
#[derive(Default)]
struct Margins {
    h1: f64,
    h3: f64,
    h4: f64,
    h5i: f64,
    h5ii: f64,
    c1: f64,
    c3: f64,
    c5: f64,
    jac: f64,
}

fn dot(a: &Point, b: &Point) -> f64 {
    a[0] * b[0] + a[1] * b[1]
}

fn sub(a: &Point, b: &Point) -> Point {
    [a[0] - b[0], a[1] - b[1]]
}

fn len(a: &Point) -> f64 {
    a[0].hypot(a[1])
}

fn draw(rng: &mut ChaCha8Rng, dim: usize, s: &Sampler) -> Sample {
    let mut pt = |r: f64| -> Point {
        let a = rng.gen_range(-r..r);
        let b = if dim == 2 { rng.gen_range(-r..r) } else { 0.0 };
        [a, b]
    };
    let y = pt(0.5);
    let z = pt(0.5);
    let lambda = pt(s.lambda_range);
    let lambda2 = pt(s.lambda_range);
    let mut dir = pt(1.0);
    let n = len(&dir).max(1e-3);
    dir = [dir[0] / n, dir[1] / n];
    let mut ints = || -> Point {
        let a = rng.gen_range(-3i32..=3) as f64;
        let b = if dim == 2 { rng.gen_range(-3i32..=3) as f64 } else { 0.0 };
        [a, b]
    };
    let shift_y = ints();
    let shift_z = ints();
    let zeta = rng.gen_range(-s.zeta_range..s.zeta_range);
    let zeta2 = rng.gen_range(-s.zeta_range..s.zeta_range);
    Sample { w: Witness { y, z, zeta, zeta2, lambda, lambda2 }, dir, shift_y, shift_z }
}

/// Ratio test for continuity: the difference over a shrinking step must
/// shrink. Returns `NaN` when the largest step crosses a declared interface.
fn continuity_margin(a: &FluxCoefficient, s: &Sample, in_y: bool) -> f64 {
    let w = &s.w;
    let moved = |d: f64| -> (Point, Point) {
        let step = [d * s.dir[0], d * s.dir[1]];
        if in_y {
            ([w.y[0] + step[0], w.y[1] + step[1]], w.z)
        } else {
            (w.y, [w.z[0] + step[0], w.z[1] + step[1]])
        }
    };
    let d0 = 1e-3;
    let (y0, z0) = moved(d0);
    if !a.same_piece(&w.y, &w.z, &y0, &z0) {
        return f64::NAN;
    }
    let base = a.eval(&w.y, &w.z, w.zeta, &w.lambda);
    let diff = |d: f64| {
        let (y, z) = moved(d);
        len(&sub(&a.eval(&y, &z, w.zeta, &w.lambda), &base))
    };
    let first = diff(d0);
    let last = diff(d0 * 2f64.powi(-HALVINGS));
    (1e-12 + 0.5 * first - last) / (1.0 + len(&base))
}

fn evaluate(a: &FluxCoefficient, s: &Sample, phi: &NFunction, phi_dual: &NFunction, psi_dual: &NFunction) -> Result<Margins> {
    let w = &s.w;
    let (y, z) = (&w.y, &w.z);
    let a1 = a.eval(y, z, w.zeta, &w.lambda);
    let a2 = a.eval(y, z, w.zeta, &w.lambda2);
    let dl = sub(&w.lambda, &w.lambda2);
    let da = sub(&a1, &a2);
    let rl = len(&dl);
    let mut m = Margins { h1: continuity_margin(a, s, false), h5ii: continuity_margin(a, s, true), ..Default::default() };

    // coercivity against the (implied) weight
    let g = phi.conjugate_inverse_of_value(a.weight_at(w.zeta))?;
    let al = dot(&a1, &w.lambda);
    m.h3 = (al - g * phi.value(len(&w.lambda))?) / (1.0 + al.abs());

    m.h4 = dot(&da, &dl) / (1.0 + len(&da) * rl);

    let ys = [y[0] + s.shift_y[0], y[1] + s.shift_y[1]];
    let zs = [z[0] + s.shift_z[0], z[1] + s.shift_z[1]];
    m.h5i = -len(&sub(&a.eval(&ys, &zs, w.zeta, &w.lambda), &a1)) / (1.0 + len(&a1));

    // growth constants with c2 = c4 = 1
    let den3 = phi_dual.inverse(phi.value(rl)?)?;
    m.c3 = if den3 > 0.0 { len(&da) / den3 } else { 0.0 };
    let a_z = a.eval(y, z, w.zeta2, &w.lambda);
    let den1 = psi_dual.inverse(phi.value((w.zeta - w.zeta2).abs())?)?;
    m.c1 = if den1 > 0.0 { len(&sub(&a1, &a_z)) / den1 } else { 0.0 };

    // strong monotonicity across different ζ
    let a_mixed = a.eval(y, z, w.zeta2, &w.lambda2);
    let pr = phi.value(rl)?;
    let far = if pr > 0.0 { dot(&sub(&a1, &a_mixed), &dl) / pr } else { f64::NAN };
    // nearby λ′ = λ + δ·dir: a ζ-dependence shows up at first order in δ
    // while Φ(δ) is of higher order
    let delta = NEAR_STEP;
    let lam_near = [w.lambda[0] + delta * s.dir[0], w.lambda[1] + delta * s.dir[1]];
    let pn = phi.value(delta * len(&s.dir))?;
    let near = if pn > 0.0 {
        dot(&sub(&a1, &a.eval(y, z, w.zeta2, &lam_near)), &sub(&w.lambda, &lam_near)) / pn
    } else {
        f64::NAN
    };
    m.c5 = far.min(near);

    m.jac = if a.has_analytic_jacobian() {
        let (ja, jf) = (a.d_lambda(y, z, w.zeta, &w.lambda), a.d_lambda_fd(y, z, w.zeta, &w.lambda));
        let tol = (1e-4 * len(&a1)).max(1e-5);
        let mut worst = f64::NEG_INFINITY;
        for i in 0..a.dim {
            for k in 0..a.dim {
                worst = worst.max((ja[i][k] - jf[i][k]).abs() - tol);
            }
        }
        worst
    } else {
        f64::NAN
    };
    Ok(m)
}

/// Samples H1–H6 for `a`.
///
/// H1: continuity in `z` by a ratio test. H2: growth constants fitted from
/// pairs. H3: coercivity margin against `Φ̃⁻¹(Φ(h(|ζ|)))Φ(|λ|)`. H4:
/// monotonicity in `λ` at fixed `ζ`. H5: integer-shift invariance and
/// continuity in `y`. H6: fitted `c₅ = min (Δa·Δλ)/Φ(|Δλ|)` over pairs with
/// independent `ζ, ζ′`, both far apart and at distance `1e-2` in `λ`,
/// passed iff positive.
pub fn verify_hypotheses(a: &FluxCoefficient, sampler: &Sampler) -> Result<HypothesisReport> {
    let (phi, psi) = a
        .nf_pair
        .clone()
        .ok_or_else(|| Error::Usage(format!("flux '{}' has no N-function pair", a.name)))?;
    if sampler.n_points == 0 {
        return Err(Error::Usage("sampler needs at least one point".into()));
    }
    let phi_dual = phi.conjugate().dual;
    let psi_dual = psi.conjugate().dual;
    let mut rng = ChaCha8Rng::seed_from_u64(sampler.seed);
    let samples: Vec<Sample> = (0..sampler.n_points).map(|_| draw(&mut rng, a.dim, sampler)).collect();
    let margins: Vec<Margins> = samples
        .par_iter()
        .map(|s| evaluate(a, s, &phi, &phi_dual, &psi_dual))
        .collect::<Result<_>>()?;

    // smallest value with the lowest sample index as tie-break
    let worst = |f: &dyn Fn(&Margins) -> f64| -> (f64, Option<Witness>) {
        let mut best: Option<(f64, usize)> = None;
        for (i, m) in margins.iter().enumerate() {
            let v = f(m);
            if v.is_nan() {
                continue;
            }
            if best.map_or(true, |(b, _)| v < b) {
                best = Some((v, i));
            }
        }
        match best {
            Some((v, i)) => (v, Some(samples[i].w.clone())),
            None => (f64::INFINITY, None),
        }
    };
    let sup = |f: &dyn Fn(&Margins) -> f64| margins.iter().map(f).filter(|v| !v.is_nan()).fold(0.0f64, f64::max);

    let mut entries = Vec::new();
    let mut push = |name: &str, (v, wit): (f64, Option<Witness>), passed: bool| {
        entries.push(HypothesisEntry { name: name.into(), passed, worst_margin: v, witness: wit });
    };
    let h1 = worst(&|m| m.h1);
    let h1_ok = h1.0 >= -MARGIN_TOL;
    push("H1", h1, h1_ok);

    let c1 = sup(&|m| m.c1);
    let c3 = sup(&|m| m.c3);
    let growth_ok = c1.is_finite() && c3.is_finite();
    push("H2", (if growth_ok { 0.0 } else { f64::NEG_INFINITY }, None), growth_ok);

    let h3 = worst(&|m| m.h3);
    let h3_ok = h3.0 >= -MARGIN_TOL;
    push("H3", h3, h3_ok);
    let h4 = worst(&|m| m.h4);
    let h4_ok = h4.0 >= -MARGIN_TOL;
    push("H4", h4, h4_ok);

    let h5i = worst(&|m| m.h5i);
    let h5ii = worst(&|m| m.h5ii);
    let h5_ok = h5i.0 >= -SHIFT_TOL && h5ii.0 >= -MARGIN_TOL;
    let h5 = if h5i.0 < -SHIFT_TOL || h5ii.0 >= h5i.0 { h5i } else { h5ii };
    push("H5", h5, h5_ok);

    let h6 = worst(&|m| m.c5);
    let c5 = h6.0;
    push("H6", h6, c5 > 0.0 && c5.is_finite());

    let jacobian_excess = a
        .has_analytic_jacobian()
        .then(|| margins.iter().map(|m| m.jac).fold(f64::NEG_INFINITY, f64::max));
    let theta = phi.conjugate_inverse_of_value(a.h_min())?;
    let grid = logspace(1e-3, 1e3, 121);
    let domination_k = check_domination(&phi, &psi, &logspace(0.1, 10.0, 41), &grid)?.k;

    Ok(HypothesisReport {
        entries,
        theta,
        constants: FittedConstants { c1, c2: 1.0, c3, c4: 1.0, c5 },
        jacobian_excess,
        domination_k,
    })
}
