//! Damped Newton for discrete monotone systems `R(u) = 0`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{CsrMatrix, Factorization, LinearSolverKind};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Armijo {
    /// Sufficient-decrease constant on the Euclidean residual norm.
    pub c: f64,
    /// Step reduction factor.
    pub factor: f64,
    pub max_halvings: usize,
}

impl Default for Armijo {
    fn default() -> Self {
        Armijo { c: 1e-4, factor: 0.5, max_halvings: 30 }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum JacobianMode {
    /// Use the coefficient's analytic `∂a/∂λ` when it has one.
    #[default]
    Analytic,
    FiniteDifference,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolveOptions {
    /// Max-norm tolerance on the discrete residual.
    pub tol: f64,
    pub max_iter: usize,
    pub armijo: Armijo,
    pub jacobian: JacobianMode,
    pub linear_solver: LinearSolverKind,
}

impl Default for SolveOptions {
    fn default() -> Self {
        SolveOptions {
            tol: 1e-10,
            max_iter: 60,
            armijo: Armijo::default(),
            jacobian: JacobianMode::Analytic,
            linear_solver: LinearSolverKind::Auto,
        }
    }
}

impl SolveOptions {
    pub fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || self.max_iter < 1 {
            return Err(Error::Usage(format!(
                "solver options need tol > 0 and max_iter >= 1 (got {}, {})",
                self.tol, self.max_iter
            )));
        }
        if !(self.armijo.factor > 0.0 && self.armijo.factor < 1.0) {
            return Err(Error::Usage("Armijo factor must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

/// A square nonlinear system with optional derivative information.
pub trait MonotoneSystem {
    fn len(&self) -> usize;
    fn residual(&self, u: &[f64]) -> Result<Vec<f64>>;
    /// Jacobian at `u`; `None` selects dense finite differences.
    fn jacobian(&self, _u: &[f64]) -> Result<Option<CsrMatrix>> {
        Ok(None)
    }
    /// Frozen-coefficient (secant) matrix used by the Picard restart.
    fn picard_matrix(&self, _u: &[f64]) -> Result<Option<CsrMatrix>> {
        Ok(None)
    }
    /// Dof fixed to remove a constant kernel, if any.
    fn pinned(&self) -> Option<usize> {
        None
    }
    /// Maps an iterate back onto the constrained subspace (e.g. zero mean).
    fn project(&self, _u: &mut [f64]) {}
    fn linear_solver(&self) -> LinearSolverKind {
        LinearSolverKind::Auto
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SystemSolution {
    pub solution: Vec<f64>,
    /// Max-norm of the final residual.
    pub residual_norm: f64,
    pub iterations: usize,
    /// Residual max-norm after each iteration, starting with the initial guess.
    pub trace: Vec<f64>,
}

pub(crate) fn max_norm(v: &[f64]) -> f64 {
    v.iter().fold(0.0f64, |m, x| if x.is_nan() { f64::NAN } else { m.max(x.abs()) })
}

fn l2(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

fn dense_fd_jacobian<S: MonotoneSystem + ?Sized>(sys: &S, u: &[f64]) -> Result<CsrMatrix> {
    let n = sys.len();
    let mut trip = Vec::new();
    let mut w = u.to_vec();
    for j in 0..n {
        let h = 1e-6 * u[j].abs().max(1.0);
        w[j] = u[j] + h;
        let rp = sys.residual(&w)?;
        w[j] = u[j] - h;
        let rm = sys.residual(&w)?;
        w[j] = u[j];
        for i in 0..n {
            let d = (rp[i] - rm[i]) / (2.0 * h);
            if d != 0.0 {
                trip.push((i, j, d));
            }
        }
    }
    Ok(CsrMatrix::from_triplets(n, trip))
}

/// Solves `M δ = −r` honoring the pinned dof. A singular matrix gets one
/// `1e-12` relative diagonal shift before giving up.
fn linear_step<S: MonotoneSystem + ?Sized>(sys: &S, mut m: CsrMatrix, r: &[f64], kind: LinearSolverKind) -> Result<Vec<f64>> {
    let mut rhs: Vec<f64> = r.iter().map(|x| -x).collect();
    if let Some(k) = sys.pinned() {
        m.pin(k);
        rhs[k] = 0.0;
    }
    Factorization::new_shifted(&m, kind)?.solve(&rhs)
}

fn axpy(u: &[f64], a: f64, d: &[f64]) -> Vec<f64> {
    u.iter().zip(d).map(|(x, y)| x + a * y).collect()
}

/// Damped Newton with Armijo backtracking on `‖R‖₂`; converged when
/// `‖R‖∞ ≤ tol`. On a failed linearization or line search it performs one
/// Picard pass with the frozen-coefficient matrix and resumes.
pub fn solve_system<S: MonotoneSystem + ?Sized>(sys: &S, init: &[f64], opts: &SolveOptions) -> Result<SystemSolution> {
    opts.validate()?;
    if init.len() != sys.len() {
        return Err(Error::Usage(format!("initial guess has {} entries, system has {}", init.len(), sys.len())));
    }
    if init.iter().any(|v| !v.is_finite()) {
        return Err(Error::Domain("initial guess is not finite".into()));
    }
    let kind = match opts.linear_solver {
        LinearSolverKind::Auto => sys.linear_solver(),
        k => k,
    };
    let mut u = init.to_vec();
    sys.project(&mut u);
    let mut r = sys.residual(&u)?;
    let mut rn = max_norm(&r);
    let mut trace = vec![rn];
    let mut restarted = false;
    for it in 1..=opts.max_iter {
        if rn <= opts.tol {
            return Ok(SystemSolution { solution: u, residual_norm: rn, iterations: it - 1, trace });
        }
        if !rn.is_finite() {
            return Err(Error::convergence("residual is not finite", rn));
        }
        let jac = match sys.jacobian(&u)? {
            Some(j) => j,
            None => dense_fd_jacobian(sys, &u)?,
        };
        let accepted = match linear_step(sys, jac, &r, kind) {
            Ok(delta) => line_search(sys, &u, &r, &delta, opts)?,
            Err(_) => None,
        };
        match accepted {
            Some((un, rnew)) => {
                u = un;
                r = rnew;
            }
            None if !restarted => {
                restarted = true;
                let (un, rnew) = picard_pass(sys, &u, &r, kind)?;
                u = un;
                r = rnew;
            }
            None => {
                return Err(Error::convergence(
                    format!("Newton line search failed after {it} iterations"),
                    rn,
                ))
            }
        }
        rn = max_norm(&r);
        trace.push(rn);
    }
    if rn <= opts.tol {
        return Ok(SystemSolution { solution: u, residual_norm: rn, iterations: opts.max_iter, trace });
    }
    Err(Error::convergence(format!("no convergence in {} Newton iterations", opts.max_iter), rn))
}

fn line_search<S: MonotoneSystem + ?Sized>(
    sys: &S,
    u: &[f64],
    r: &[f64],
    delta: &[f64],
    opts: &SolveOptions,
) -> Result<Option<(Vec<f64>, Vec<f64>)>> {
    let r0 = l2(r);
    let mut alpha = 1.0;
    for _ in 0..=opts.armijo.max_halvings {
        let mut trial = axpy(u, alpha, delta);
        sys.project(&mut trial);
        match sys.residual(&trial) {
            Ok(rt) => {
                let rt_n = l2(&rt);
                if rt_n.is_finite() && rt_n <= (1.0 - opts.armijo.c * alpha) * r0 {
                    return Ok(Some((trial, rt)));
                }
            }
            // leaving a table's hull or an inner failure rejects the step
            Err(Error::Range(_)) | Err(Error::Convergence { .. }) | Err(Error::Domain(_)) => {}
            Err(e) => return Err(e),
        }
        alpha *= opts.armijo.factor;
    }
    Ok(None)
}

/// Up to ten frozen-coefficient steps, keeping the best iterate.
fn picard_pass<S: MonotoneSystem + ?Sized>(
    sys: &S,
    u: &[f64],
    r: &[f64],
    kind: LinearSolverKind,
) -> Result<(Vec<f64>, Vec<f64>)> {
    let mut best = (u.to_vec(), r.to_vec());
    let mut best_n = l2(r);
    let (mut cur, mut cr) = (u.to_vec(), r.to_vec());
    for _ in 0..10 {
        let m = match sys.picard_matrix(&cur)? {
            Some(m) => m,
            None => break,
        };
        let delta = match linear_step(sys, m, &cr, kind) {
            Ok(d) => d,
            Err(_) => break,
        };
        let mut next = axpy(&cur, 1.0, &delta);
        sys.project(&mut next);
        let rn = match sys.residual(&next) {
            Ok(rn) => rn,
            Err(_) => break,
        };
        let n = l2(&rn);
        if !n.is_finite() {
            break;
        }
        if n < best_n {
            best_n = n;
            best = (next.clone(), rn.clone());
        }
        cur = next;
        cr = rn;
    }
    Ok(best)
}

/// Closure-backed system for [`solve_monotone_system`].
pub struct FnSystem<R, J> {
    n: usize,
    residual: R,
    jacobian: Option<J>,
}

impl<R, J> MonotoneSystem for FnSystem<R, J>
where
    R: Fn(&[f64]) -> Result<Vec<f64>>,
    J: Fn(&[f64]) -> Result<CsrMatrix>,
{
    fn len(&self) -> usize {
        self.n
    }

    fn residual(&self, u: &[f64]) -> Result<Vec<f64>> {
        (self.residual)(u)
    }

    fn jacobian(&self, u: &[f64]) -> Result<Option<CsrMatrix>> {
        self.jacobian.as_ref().map(|j| j(u)).transpose()
    }
}

/// Solves `residual(u) = 0` from `init`; without a Jacobian closure the
/// Jacobian is formed by central differences.
pub fn solve_monotone_system<R, J>(residual: R, jacobian: Option<J>, init: &[f64], opts: &SolveOptions) -> Result<SystemSolution>
where
    R: Fn(&[f64]) -> Result<Vec<f64>>,
    J: Fn(&[f64]) -> Result<CsrMatrix>,
{
    let sys = FnSystem { n: init.len(), residual, jacobian };
    solve_system(&sys, init, opts)
}

#[cfg(test)]
mod tests {
    use super::*;

    type NoJac = fn(&[f64]) -> Result<CsrMatrix>;

    #[test]
    fn linear_spd_in_one_step() {
        let a = CsrMatrix::from_dense(&[vec![4.0, 1.0, 0.0], vec![1.0, 3.0, 1.0], vec![0.0, 1.0, 2.0]]);
        let b = [1.0, 2.0, 3.0];
        let aa = a.clone();
        let res = move |u: &[f64]| Ok(aa.matvec(u).iter().zip(&b).map(|(x, y)| x - y).collect());
        let jac = move |_: &[f64]| Ok(a.clone());
        let s = solve_monotone_system(res, Some(jac), &[0.0; 3], &SolveOptions::default()).unwrap();
        assert_eq!(s.iterations, 1);
        assert!(s.residual_norm <= 1e-14);
    }

    #[test]
    fn scalar_cubic() {
        let res = |u: &[f64]| Ok(vec![u[0].powi(3) - 8.0]);
        let s = solve_monotone_system(res, None::<NoJac>, &[1.0], &SolveOptions::default()).unwrap();
        assert!((s.solution[0] - 2.0).abs() < 1e-10);
    }

    #[test]
    fn steep_residual_needs_damping() {
        // arctan overshoots without a line search from far away
        let res = |u: &[f64]| Ok(vec![u[0].atan()]);
        let jac = |u: &[f64]| Ok(CsrMatrix::from_dense(&[vec![1.0 / (1.0 + u[0] * u[0])]]));
        let s = solve_monotone_system(res, Some(jac), &[10.0], &SolveOptions::default()).unwrap();
        assert!(s.solution[0].abs() < 1e-10);
    }

    #[test]
    fn bad_options_and_guesses() {
        let res = |u: &[f64]| Ok(vec![u[0]]);
        let o = SolveOptions { tol: 0.0, ..Default::default() };
        assert!(matches!(solve_monotone_system(res, None::<NoJac>, &[1.0], &o), Err(Error::Usage(_))));
        assert!(matches!(
            solve_monotone_system(res, None::<NoJac>, &[f64::NAN], &SolveOptions::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn divergence_reports_residual() {
        // no real root
        let res = |u: &[f64]| Ok(vec![u[0] * u[0] + 1.0]);
        let o = SolveOptions { max_iter: 5, ..Default::default() };
        match solve_monotone_system(res, None::<NoJac>, &[0.5], &o) {
            Err(Error::Convergence { residual, .. }) => assert!(residual >= 1.0),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn deterministic() {
        let res = |u: &[f64]| Ok(vec![u[0].powi(3) + u[1] - 1.0, u[1].powi(3) - u[0] + 2.0]);
        let a = solve_monotone_system(res, None::<NoJac>, &[0.3, 0.1], &SolveOptions::default()).unwrap();
        let b = solve_monotone_system(res, None::<NoJac>, &[0.3, 0.1], &SolveOptions::default()).unwrap();
        assert_eq!(a.solution, b.solution);
    }
}
