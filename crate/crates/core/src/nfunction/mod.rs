//! N-functions: evaluation, density, complementary function, inverses and the
//! growth/domination checks used to qualify a coefficient's growth law.
//!
//! An N-function `Φ(t) = ∫₀ᵗ φ(s) ds` is built from a nondecreasing density
//! `φ` with `φ(0) = 0`. Closed-form families are evaluated exactly; tabulated
//! densities are interpolated with a monotone cubic and integrated exactly.
//! Complementary functions are either closed form (monomials) or evaluated
//! by a numerical Legendre transform at the maximizer `φ(t*) = s`.

mod checks;
mod table;

use std::path::Path;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{bisect, expand_upper, logspace};

pub use checks::{
    check_delta2, check_delta_prime, check_domination, default_index_grid, simonenko_indices,
    Delta2Report, DeltaPrimeReport, DominationReport, GrowthIndices,
};
pub use table::MonotoneCubic;

/// Closed-form family tag, tabulated density or a derived complementary
/// function.
#[derive(Clone, Debug)]
pub enum NfKind {
    /// `tᵖ`
    Power { p: f64 },
    /// `tᵖ / p`
    ScaledPower { p: f64 },
    /// `tᵖ · log(1 + t)`
    PowerLog { p: f64 },
    /// `c · tᵖ`; closed form of the complement of the power families.
    Monomial { coef: f64, p: f64 },
    /// Density sampled on an increasing abscissa starting at 0.
    Tabulated(Arc<MonotoneCubic>),
    /// Numerical complementary function of the wrapped N-function.
    Legendre(Arc<NFunction>),
}

#[derive(Clone, Debug)]
pub struct NFunction {
    kind: NfKind,
}

/// How the dual of a [`ConjugatePair`] was obtained.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Construction {
    ClosedForm,
    NumericalLegendre,
}

/// An N-function together with its complementary function.
#[derive(Clone, Debug)]
pub struct ConjugatePair {
    pub primal: NFunction,
    pub dual: NFunction,
    pub construction: Construction,
}

fn check_arg(t: f64) -> Result<()> {
    if !t.is_finite() || t < 0.0 {
        Err(Error::Domain(format!("N-function argument must be finite and >= 0, got {t}")))
    } else {
        Ok(())
    }
}

impl NFunction {
    pub fn power(p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::Construction(format!("power family needs p > 1, got {p}")));
        }
        Ok(Self { kind: NfKind::Power { p } })
    }

    pub fn scaled_power(p: f64) -> Result<Self> {
        if !(p > 1.0) || !p.is_finite() {
            return Err(Error::Construction(format!("scaled power family needs p > 1, got {p}")));
        }
        Ok(Self { kind: NfKind::ScaledPower { p } })
    }

    pub fn power_log(p: f64) -> Result<Self> {
        if !(p >= 1.0) || !p.is_finite() {
            return Err(Error::Construction(format!("power-log family needs p >= 1, got {p}")));
        }
        Ok(Self { kind: NfKind::PowerLog { p } })
    }

    pub fn monomial(coef: f64, p: f64) -> Result<Self> {
        if !(coef > 0.0) || !(p > 1.0) || !coef.is_finite() || !p.is_finite() {
            return Err(Error::Construction(format!(
                "monomial needs coef > 0 and p > 1, got coef={coef}, p={p}"
            )));
        }
        Ok(Self { kind: NfKind::Monomial { coef, p } })
    }

    /// Density table `(t, φ(t))`. A leading `(0, 0)` knot is inserted when the
    /// table starts above zero.
    pub fn tabulated(mut t: Vec<f64>, mut phi: Vec<f64>) -> Result<Self> {
        if t.len() != phi.len() || t.is_empty() {
            return Err(Error::Construction("density table columns differ in length".into()));
        }
        if t[0] < 0.0 {
            return Err(Error::Construction("density table starts below t = 0".into()));
        }
        if t[0] > 0.0 {
            t.insert(0, 0.0);
            phi.insert(0, 0.0);
        } else if phi[0] != 0.0 {
            return Err(Error::Construction("tabulated density must vanish at t = 0".into()));
        }
        if phi.windows(2).any(|w| w[1] < w[0]) {
            return Err(Error::Construction("tabulated density must be nondecreasing".into()));
        }
        if phi.iter().skip(1).any(|v| *v <= 0.0) {
            return Err(Error::Construction(
                "tabulated density must be positive for t > 0".into(),
            ));
        }
        let spline = MonotoneCubic::new(t, phi)?;
        Ok(Self { kind: NfKind::Tabulated(Arc::new(spline)) })
    }

    /// Samples `density` at `0` and `n − 1` log-spaced points in
    /// `[t_max·1e-8, t_max]`.
    pub fn tabulate_density<F: Fn(f64) -> f64>(density: F, t_max: f64, n: usize) -> Result<Self> {
        if !(t_max > 0.0) || n < 3 {
            return Err(Error::Construction("tabulation needs t_max > 0 and n >= 3".into()));
        }
        let mut t = vec![0.0];
        t.extend(logspace(t_max * 1e-8, t_max, n - 1));
        let phi = t.iter().map(|&s| if s == 0.0 { 0.0 } else { density(s) }).collect();
        Self::tabulated(t, phi)
    }

    /// `exp(t) − t − 1`, tabulated up to `t_max`. Not of class Δ₂.
    pub fn exp_minus_linear(t_max: f64) -> Result<Self> {
        Self::tabulate_density(|t| t.exp_m1(), t_max, 4097)
    }

    /// Two-column CSV `(t, φ(t))` with strictly increasing `t`. A header row
    /// is accepted when it does not parse as numbers.
    pub fn from_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mut rdr = csv::ReaderBuilder::new()
            .has_headers(false)
            .trim(csv::Trim::All)
            .comment(Some(b'#'))
            .from_path(path)
            .map_err(|e| match e.into_kind() {
                csv::ErrorKind::Io(io) => Error::io(path, io),
                other => Error::Format(format!("{other:?}")),
            })?;
        let (mut t, mut phi) = (Vec::new(), Vec::new());
        for (row, rec) in rdr.records().enumerate() {
            let rec = rec?;
            if rec.len() < 2 {
                return Err(Error::Format(format!("{}: row {row} has < 2 columns", path.display())));
            }
            match (rec[0].parse::<f64>(), rec[1].parse::<f64>()) {
                (Ok(a), Ok(b)) => {
                    t.push(a);
                    phi.push(b);
                }
                _ if row == 0 => continue,
                _ => {
                    return Err(Error::Format(format!(
                        "{}: row {row} is not numeric",
                        path.display()
                    )))
                }
            }
        }
        Self::tabulated(t, phi)
    }

    pub fn kind(&self) -> &NfKind {
        &self.kind
    }

    /// True when value, density and inverses are available in closed form.
    pub fn is_closed_form(&self) -> bool {
        matches!(
            self.kind,
            NfKind::Power { .. } | NfKind::ScaledPower { .. } | NfKind::Monomial { .. }
        )
    }

    /// `(coef, p)` when `Φ(t) = coef · tᵖ`.
    fn as_monomial(&self) -> Option<(f64, f64)> {
        match self.kind {
            NfKind::Power { p } => Some((1.0, p)),
            NfKind::ScaledPower { p } => Some((1.0 / p, p)),
            NfKind::Monomial { coef, p } => Some((coef, p)),
            _ => None,
        }
    }

    pub fn describe(&self) -> String {
        match &self.kind {
            NfKind::Power { p } => format!("t^{p}"),
            NfKind::ScaledPower { p } => format!("t^{p}/{p}"),
            NfKind::PowerLog { p } => format!("t^{p}·log(1+t)"),
            NfKind::Monomial { coef, p } => format!("{coef}·t^{p}"),
            NfKind::Tabulated(s) => format!("tabulated({} knots)", s.x().len()),
            NfKind::Legendre(inner) => format!("conj[{}]", inner.describe()),
        }
    }

    /// `Φ(t)`.
    pub fn value(&self, t: f64) -> Result<f64> {
        check_arg(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        if let Some((c, p)) = self.as_monomial() {
            return Ok(c * t.powf(p));
        }
        match &self.kind {
            NfKind::PowerLog { p } => Ok(t.powf(*p) * t.ln_1p()),
            NfKind::Tabulated(s) => Ok(s.integral(t)),
            NfKind::Legendre(inner) => {
                let ts = inner.density_inverse(t)?;
                Ok((t * ts - inner.value(ts)?).max(0.0))
            }
            _ => unreachable!(),
        }
    }

    /// `φ(t) = Φ′(t)`.
    pub fn density(&self, t: f64) -> Result<f64> {
        check_arg(t)?;
        if t == 0.0 {
            return Ok(0.0);
        }
        if let Some((c, p)) = self.as_monomial() {
            return Ok(c * p * t.powf(p - 1.0));
        }
        match &self.kind {
            NfKind::PowerLog { p } => {
                Ok(p * t.powf(p - 1.0) * t.ln_1p() + t.powf(*p) / (1.0 + t))
            }
            NfKind::Tabulated(s) => Ok(s.eval(t).max(0.0)),
            NfKind::Legendre(inner) => inner.density_inverse(t),
            _ => unreachable!(),
        }
    }

    /// `φ′(t)`.
    pub fn second_derivative(&self, t: f64) -> Result<f64> {
        check_arg(t)?;
        if let Some((c, p)) = self.as_monomial() {
            if t == 0.0 {
                return Ok(if p > 2.0 {
                    0.0
                } else if p == 2.0 {
                    2.0 * c
                } else {
                    f64::INFINITY
                });
            }
            return Ok(c * p * (p - 1.0) * t.powf(p - 2.0));
        }
        match &self.kind {
            NfKind::PowerLog { p } => {
                if t == 0.0 {
                    // t^{p-1}·(p(p-1)+2p-1)·... behaves like t^{p-1}
                    return Ok(if *p > 1.0 { 0.0 } else { 2.0 });
                }
                let l = t.ln_1p();
                Ok(p * (p - 1.0) * t.powf(p - 2.0) * l + 2.0 * p * t.powf(p - 1.0) / (1.0 + t)
                    - t.powf(*p) / ((1.0 + t) * (1.0 + t)))
            }
            NfKind::Tabulated(s) => Ok(s.derivative(t)),
            NfKind::Legendre(inner) => {
                let ts = inner.density_inverse(t)?;
                Ok(1.0 / inner.second_derivative(ts)?)
            }
            _ => unreachable!(),
        }
    }

    /// `φ⁻¹(s)`: the `t` with `φ(t) = s`, by closed form or monotone bisection.
    pub fn density_inverse(&self, s: f64) -> Result<f64> {
        check_arg(s)?;
        if s == 0.0 {
            return Ok(0.0);
        }
        if let Some((c, p)) = self.as_monomial() {
            return Ok((s / (c * p)).powf(1.0 / (p - 1.0)));
        }
        let hi = match &self.kind {
            NfKind::Tabulated(spline) => {
                if s > spline.y_max() {
                    return Err(Error::Range(format!(
                        "s = {s} exceeds the tabulated density range (max {})",
                        spline.y_max()
                    )));
                }
                spline.x_max()
            }
            _ => expand_upper(|t| Ok(self.density(t)? - s), 1.0)?,
        };
        bisect(|t| Ok(self.density(t)? - s), 0.0, hi)
    }

    /// `Φ⁻¹(v)`.
    pub fn inverse(&self, v: f64) -> Result<f64> {
        if !v.is_finite() || v < 0.0 {
            return Err(Error::Domain(format!("inverse needs finite v >= 0, got {v}")));
        }
        if v == 0.0 {
            return Ok(0.0);
        }
        if let Some((c, p)) = self.as_monomial() {
            return Ok((v / c).powf(1.0 / p));
        }
        let hi = expand_upper(|t| Ok(self.value(t)? - v), 1.0)?;
        bisect(|t| Ok(self.value(t)? - v), 0.0, hi)
    }

    /// Numerical complementary function `Φ̃(s) = sup_t (st − Φ(t))`,
    /// regardless of whether a closed form exists.
    pub fn legendre(&self) -> NFunction {
        NFunction { kind: NfKind::Legendre(Arc::new(self.clone())) }
    }

    /// Complementary pair; closed form for monomial families, numerical
    /// Legendre transform otherwise.
    pub fn conjugate(&self) -> ConjugatePair {
        if let Some((c, p)) = self.as_monomial() {
            let q = p / (p - 1.0);
            let dual = match self.kind {
                NfKind::ScaledPower { .. } => NFunction { kind: NfKind::ScaledPower { p: q } },
                _ => {
                    let coef = (1.0 - 1.0 / p) * (c * p).powf(-1.0 / (p - 1.0));
                    NFunction { kind: NfKind::Monomial { coef, p: q } }
                }
            };
            return ConjugatePair {
                primal: self.clone(),
                dual,
                construction: Construction::ClosedForm,
            };
        }
        if let NfKind::Legendre(inner) = &self.kind {
            return ConjugatePair {
                primal: self.clone(),
                dual: (**inner).clone(),
                construction: Construction::ClosedForm,
            };
        }
        ConjugatePair {
            primal: self.clone(),
            dual: self.legendre(),
            construction: Construction::NumericalLegendre,
        }
    }

    /// `Φ̃⁻¹(Φ(s))`, the growth-matching map appearing in the coercivity and
    /// continuity bounds.
    pub fn conjugate_inverse_of_value(&self, s: f64) -> Result<f64> {
        let v = self.value(s)?;
        self.conjugate().dual.inverse(v)
    }

    /// Checks the N-function invariants on `grid` (positive, increasing).
    pub fn validate(&self, grid: &[f64]) -> Result<()> {
        if grid.len() < 2 {
            return Err(Error::Usage("validation grid needs at least two points".into()));
        }
        if self.value(0.0)? != 0.0 {
            return Err(Error::Construction("Φ(0) != 0".into()));
        }
        let mut prev_v = 0.0;
        let mut prev_d = 0.0;
        for w in grid.windows(2) {
            let (s, t) = (w[0], w[1]);
            let (vs, vt) = (self.value(s)?, self.value(t)?);
            let mid = self.value(0.5 * (s + t))?;
            let slack = 1e-12 * (vs + vt).max(f64::MIN_POSITIVE);
            if mid > 0.5 * (vs + vt) + slack {
                return Err(Error::Construction(format!("convexity fails on [{s}, {t}]")));
            }
            if vs <= prev_v && s > grid[0] {
                return Err(Error::Construction(format!("Φ not strictly increasing at {s}")));
            }
            prev_v = vs;
            let ds = self.density(s)?;
            if ds < prev_d * (1.0 - 1e-12) {
                return Err(Error::Construction(format!("density decreases at {s}")));
            }
            prev_d = ds;
        }
        let (a, b) = (grid[0], *grid.last().unwrap());
        let (ra, rb) = (self.value(a)? / a, self.value(b)? / b);
        if !(ra < 1.0 && rb > 1.0 && ra < rb) {
            return Err(Error::Construction(format!(
                "Φ(t)/t does not move from below 1 to above 1 on the grid ({ra:e} .. {rb:e})"
            )));
        }
        Ok(())
    }

    pub fn spec(&self) -> Option<NfSpec> {
        match self.kind {
            NfKind::Power { p } => Some(NfSpec::Power { p }),
            NfKind::ScaledPower { p } => Some(NfSpec::ScaledPower { p }),
            NfKind::PowerLog { p } => Some(NfSpec::PowerLog { p }),
            _ => None,
        }
    }
}

impl ConjugatePair {
    /// Smallest `Φ(t) + Φ̃(s) − st` over the sampled pairs; nonnegative by
    /// Young's inequality.
    pub fn young_gap(&self, s_grid: &[f64], t_grid: &[f64]) -> Result<f64> {
        let mut worst = f64::INFINITY;
        let dual: Vec<f64> = s_grid.iter().map(|&s| self.dual.value(s)).collect::<Result<_>>()?;
        for &t in t_grid {
            let pt = self.primal.value(t)?;
            for (&s, &ds) in s_grid.iter().zip(&dual) {
                worst = worst.min(pt + ds - s * t);
            }
        }
        Ok(worst)
    }

    /// Largest violation of `Φ̃(φ(t)) ≤ tφ(t) ≤ Φ(2t)` on the grid (≤ 0 means
    /// both inequalities hold).
    pub fn sandwich_violation(&self, t_grid: &[f64]) -> Result<f64> {
        let mut worst = f64::NEG_INFINITY;
        for &t in t_grid {
            let d = self.primal.density(t)?;
            let left = self.dual.value(d)?;
            let mid = t * d;
            let right = self.primal.value(2.0 * t)?;
            let tol = 1e-12 * mid.max(1.0);
            worst = worst.max(left - mid - tol).max(mid - right - tol);
        }
        Ok(worst)
    }
}

/// Config-file description of an N-function.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum NfSpec {
    Power { p: f64 },
    ScaledPower { p: f64 },
    PowerLog { p: f64 },
    /// `exp(t) − t − 1` tabulated up to `t_max`.
    Exp {
        #[serde(default = "default_exp_tmax")]
        t_max: f64,
    },
    /// Two-column `(t, φ(t))` CSV; relative paths resolve against the config
    /// file's directory.
    Tabulated { path: String },
}

fn default_exp_tmax() -> f64 {
    100.0
}

impl NfSpec {
    pub fn build(&self, base_dir: Option<&Path>) -> Result<NFunction> {
        match self {
            NfSpec::Power { p } => NFunction::power(*p),
            NfSpec::ScaledPower { p } => NFunction::scaled_power(*p),
            NfSpec::PowerLog { p } => NFunction::power_log(*p),
            NfSpec::Exp { t_max } => NFunction::exp_minus_linear(*t_max),
            NfSpec::Tabulated { path } => {
                let p = Path::new(path);
                match base_dir {
                    Some(dir) if p.is_relative() => NFunction::from_csv(dir.join(p)),
                    _ => NFunction::from_csv(p),
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn close(a: f64, b: f64, tol: f64) -> bool {
        (a - b).abs() <= tol
    }

    #[test]
    fn eval_examples() {
        assert_eq!(NFunction::power(2.0).unwrap().value(3.0).unwrap(), 9.0);
        assert_eq!(NFunction::scaled_power(2.0).unwrap().value(0.0).unwrap(), 0.0);
        let pl = NFunction::power_log(2.0).unwrap();
        assert!(close(pl.value(1.0).unwrap(), 2f64.ln(), 1e-15));
    }

    #[test]
    fn eval_rejects_bad_arguments() {
        let nf = NFunction::power(2.0).unwrap();
        assert!(matches!(nf.value(-1.0), Err(Error::Domain(_))));
        assert!(matches!(nf.value(f64::NAN), Err(Error::Domain(_))));
        assert!(matches!(nf.density(f64::INFINITY), Err(Error::Domain(_))));
        assert!(matches!(nf.inverse(f64::NAN), Err(Error::Domain(_))));
    }

    #[test]
    fn density_examples() {
        assert_eq!(NFunction::power(2.0).unwrap().density(3.0).unwrap(), 6.0);
        assert!(close(NFunction::scaled_power(3.0).unwrap().density(2.0).unwrap(), 4.0, 1e-14));
        let pl = NFunction::power_log(2.0).unwrap();
        let d = pl.density(1.0).unwrap();
        // 2·log 2 + 1/2
        assert!(close(d, 1.886_294_361_119_890_6, 1e-12));
        let h = 1e-5;
        let fd = (pl.value(1.0 + h).unwrap() - pl.value(1.0 - h).unwrap()) / (2.0 * h);
        assert!(close(fd, d, 1e-8));
    }

    #[test]
    fn constructors_reject_non_nfunctions() {
        assert!(NFunction::power(1.0).is_err());
        assert!(NFunction::scaled_power(0.5).is_err());
        assert!(NFunction::power_log(0.9).is_err());
        assert!(NFunction::tabulated(vec![0.0, 1.0, 2.0], vec![0.0, 2.0, 1.0]).is_err());
        assert!(NFunction::tabulated(vec![0.0, 1.0], vec![0.5, 1.0]).is_err());
    }

    #[test]
    fn conjugate_closed_forms() {
        let c2 = NFunction::scaled_power(2.0).unwrap().conjugate();
        assert_eq!(c2.construction, Construction::ClosedForm);
        assert!(close(c2.dual.value(1.0).unwrap(), 0.5, 1e-15));
        let c4 = NFunction::scaled_power(4.0).unwrap().conjugate();
        assert!(close(c4.dual.value(1.0).unwrap(), 0.75, 1e-15));
        // t² has complement s²/4
        let p2 = NFunction::power(2.0).unwrap().conjugate();
        assert!(close(p2.dual.value(3.0).unwrap(), 2.25, 1e-14));
    }

    #[test]
    fn conjugate_power_log_matches_grid_search() {
        let pl = NFunction::power_log(2.0).unwrap();
        let pair = pl.conjugate();
        assert_eq!(pair.construction, Construction::NumericalLegendre);
        let s = 1.0;
        // brute-force oracle: maximize st − Φ(t) on a dense grid, then refine
        // around the best cell with a finer grid
        let mut best = (0.0, f64::NEG_INFINITY);
        let n = 200_000;
        for i in 0..=n {
            let t = 2.0 * i as f64 / n as f64;
            let v = s * t - pl.value(t).unwrap();
            if v > best.1 {
                best = (t, v);
            }
        }
        let (t0, dt) = (best.0, 2.0 / n as f64);
        for i in 0..=20_000 {
            let t = t0 - dt + 2.0 * dt * i as f64 / 20_000.0;
            let v = s * t - pl.value(t).unwrap();
            if v > best.1 {
                best = (t, v);
            }
        }
        assert!(close(pair.dual.value(s).unwrap(), best.1, 1e-8));
    }

    #[test]
    fn inverse_examples() {
        assert!(close(NFunction::power(2.0).unwrap().inverse(9.0).unwrap(), 3.0, 1e-15));
        assert_eq!(NFunction::power_log(2.0).unwrap().inverse(0.0).unwrap(), 0.0);
        let pl = NFunction::power_log(2.0).unwrap();
        let t = pl.inverse(1.0).unwrap();
        // independent bisection oracle on t²·log(1+t) = 1
        let (mut lo, mut hi) = (0.0f64, 4.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if mid * mid * (1.0 + mid).ln() < 1.0 {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        assert!(close(t, 0.5 * (lo + hi), 1e-10));
    }

    #[test]
    fn legendre_equality_case_of_young() {
        for nf in [NFunction::power_log(2.0).unwrap(), NFunction::scaled_power(3.0).unwrap()] {
            let pair = ConjugatePair {
                primal: nf.clone(),
                dual: nf.legendre(),
                construction: Construction::NumericalLegendre,
            };
            for &t in &[0.1, 0.5, 1.0, 2.0, 5.0] {
                let s = nf.density(t).unwrap();
                let gap = nf.value(t).unwrap() + pair.dual.value(s).unwrap() - s * t;
                assert!(gap.abs() < 1e-8, "gap {gap} at t={t}");
            }
        }
    }

    #[test]
    fn young_and_sandwich_hold() {
        let grid: Vec<f64> = (1..40).map(|i| i as f64 * 0.25).collect();
        for nf in [
            NFunction::power_log(2.0).unwrap(),
            NFunction::scaled_power(3.0).unwrap(),
            NFunction::power(1.5).unwrap(),
        ] {
            let pair = nf.conjugate();
            assert!(pair.young_gap(&grid, &grid).unwrap() >= -1e-10);
            assert!(pair.sandwich_violation(&grid).unwrap() <= 0.0);
        }
    }

    #[test]
    fn tabulated_power_matches_closed_form() {
        let tab = NFunction::tabulate_density(|t| t, 50.0, 2001).unwrap();
        for &t in &[0.01, 0.3, 1.0, 7.5, 49.0] {
            assert!(close(tab.value(t).unwrap(), 0.5 * t * t, 1e-6 * (1.0 + t * t)));
        }
        // beyond the density range the complement cannot bracket
        let pair = tab.conjugate();
        assert!(matches!(pair.dual.value(1e3), Err(Error::Range(_))));
        assert!(matches!(pair.dual.value(-1.0), Err(Error::Domain(_))));
    }

    #[test]
    fn validate_built_in_families() {
        let grid = logspace(1e-3, 1e3, 200);
        for nf in [
            NFunction::power(1.5).unwrap(),
            NFunction::scaled_power(2.0).unwrap(),
            NFunction::power_log(2.0).unwrap(),
            NFunction::exp_minus_linear(30.0).unwrap(),
        ] {
            let g: Vec<f64> = grid.iter().copied().filter(|t| *t <= 25.0).collect();
            nf.validate(&g).unwrap();
        }
    }

    #[test]
    fn csv_loader_reads_header_and_rows() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("phi.csv");
        let mut body = String::from("t,phi\n");
        for i in 1..=100 {
            let t = i as f64 * 0.1;
            body.push_str(&format!("{t},{}\n", t * t));
        }
        std::fs::write(&path, body).unwrap();
        let nf = NfSpec::Tabulated { path: "phi.csv".into() }.build(Some(dir.path())).unwrap();
        assert!(close(nf.value(3.0).unwrap(), 9.0, 1e-3));
        assert!(NFunction::from_csv(dir.path().join("missing.csv")).is_err());
    }

    #[test]
    fn nf_spec_json_shape() {
        let s: NfSpec = serde_json::from_str(r#"{"family":"scaled_power","p":2.0}"#).unwrap();
        assert_eq!(s, NfSpec::ScaledPower { p: 2.0 });
        assert!(matches!(
            s.build(None).unwrap().kind(),
            NfKind::ScaledPower { p } if *p == 2.0
        ));
    }
}
