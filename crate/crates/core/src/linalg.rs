//! Sparse matrices and the linear solvers used inside Newton iterations:
//! banded LU with partial pivoting, and ILU(0)-preconditioned CG / GMRES.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LinearSolverKind {
    /// Banded LU when the bandwidth is small, otherwise CG for symmetric and
    /// GMRES for nonsymmetric matrices.
    #[default]
    Auto,
    DirectBanded,
    ConjugateGradientIlu,
    Gmres,
}

/// Compressed sparse row matrix with sorted column indices and an explicit
/// diagonal entry in every row.
#[derive(Clone, Debug)]
pub struct CsrMatrix {
    n: usize,
    row_ptr: Vec<usize>,
    cols: Vec<usize>,
    vals: Vec<f64>,
}

impl CsrMatrix {
    /// Assembles from `(row, col, value)` triplets; duplicates are summed.
    pub fn from_triplets(n: usize, mut trip: Vec<(usize, usize, f64)>) -> Self {
        trip.extend((0..n).map(|i| (i, i, 0.0)));
        trip.sort_by(|a, b| (a.0, a.1).cmp(&(b.0, b.1)));
        let mut row_ptr = vec![0usize; n + 1];
        let mut cols = Vec::with_capacity(trip.len());
        let mut vals: Vec<f64> = Vec::with_capacity(trip.len());
        let mut last: Option<(usize, usize)> = None;
        for (r, c, v) in trip {
            if last == Some((r, c)) {
                *vals.last_mut().unwrap() += v;
            } else {
                cols.push(c);
                vals.push(v);
                row_ptr[r + 1] += 1;
                last = Some((r, c));
            }
        }
        for i in 0..n {
            row_ptr[i + 1] += row_ptr[i];
        }
        CsrMatrix { n, row_ptr, cols, vals }
    }

    pub fn from_dense(rows: &[Vec<f64>]) -> Self {
        let n = rows.len();
        let mut t = Vec::new();
        for (i, r) in rows.iter().enumerate() {
            for (j, &v) in r.iter().enumerate() {
                if v != 0.0 {
                    t.push((i, j, v));
                }
            }
        }
        Self::from_triplets(n, t)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    fn row(&self, i: usize) -> (&[usize], &[f64]) {
        let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
        (&self.cols[a..b], &self.vals[a..b])
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        let (c, v) = self.row(i);
        c.binary_search(&j).map(|k| v[k]).unwrap_or(0.0)
    }

    pub fn matvec(&self, x: &[f64]) -> Vec<f64> {
        (0..self.n)
            .map(|i| {
                let (c, v) = self.row(i);
                c.iter().zip(v).map(|(&j, a)| a * x[j]).sum()
            })
            .collect()
    }

    /// Replaces row and column `k` by the unit vector, decoupling that dof.
    pub fn pin(&mut self, k: usize) {
        for i in 0..self.n {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            for p in a..b {
                let j = self.cols[p];
                if i == k || j == k {
                    self.vals[p] = if i == j { 1.0 } else { 0.0 };
                }
            }
        }
    }

    pub fn add_diagonal(&mut self, shift: f64) {
        for i in 0..self.n {
            let (a, b) = (self.row_ptr[i], self.row_ptr[i + 1]);
            for p in a..b {
                if self.cols[p] == i {
                    self.vals[p] += shift;
                }
            }
        }
    }

    /// Largest `|i − j|` over stored nonzeros.
    pub fn bandwidth(&self) -> (usize, usize) {
        let (mut lower, mut upper) = (0, 0);
        for i in 0..self.n {
            let (c, v) = self.row(i);
            for (&j, &a) in c.iter().zip(v) {
                if a != 0.0 {
                    if j < i {
                        lower = lower.max(i - j);
                    } else {
                        upper = upper.max(j - i);
                    }
                }
            }
        }
        (lower, upper)
    }

    pub fn is_symmetric(&self, rel_tol: f64) -> bool {
        let scale = self.vals.iter().fold(0.0f64, |m, v| m.max(v.abs())).max(f64::MIN_POSITIVE);
        (0..self.n).all(|i| {
            let (c, v) = self.row(i);
            c.iter().zip(v).all(|(&j, &a)| (a - self.get(j, i)).abs() <= rel_tol * scale)
        })
    }
}

/// Band LU factors `PA = LU` stored column-wise as in LAPACK `gbtrf`.
#[derive(Clone, Debug)]
struct BandLu {
    n: usize,
    kl: usize,
    ku: usize,
    ab: Vec<f64>,
    piv: Vec<usize>,
}

impl BandLu {
    fn ld(&self) -> usize {
        2 * self.kl + self.ku + 1
    }

    #[inline]
    fn idx(&self, i: usize, j: usize) -> usize {
        (self.kl + self.ku + i - j) + self.ld() * j
    }

    fn factor(a: &CsrMatrix) -> Result<Self> {
        let n = a.n;
        let (kl, ku) = a.bandwidth();
        let mut lu = BandLu { n, kl, ku, ab: vec![0.0; (2 * kl + ku + 1) * n], piv: vec![0; n] };
        for i in 0..n {
            let (c, v) = a.row(i);
            for (&j, &x) in c.iter().zip(v) {
                if x != 0.0 {
                    let k = lu.idx(i, j);
                    lu.ab[k] = x;
                }
            }
        }
        let kv = kl + ku;
        let mut ju = 0usize;
        for j in 0..n {
            let km = kl.min(n - 1 - j);
            let mut p = j;
            let mut best = lu.ab[lu.idx(j, j)].abs();
            for r in j + 1..=j + km {
                let v = lu.ab[lu.idx(r, j)].abs();
                if v > best {
                    best = v;
                    p = r;
                }
            }
            lu.piv[j] = p;
            if best == 0.0 || !best.is_finite() {
                return Err(Error::convergence(format!("singular matrix at column {j}"), f64::NAN));
            }
            ju = ju.max((j + ku + (p - j)).min(n - 1));
            if p != j {
                for c in j..=ju.min(j + kv) {
                    let (x, y) = (lu.idx(j, c), lu.idx(p, c));
                    lu.ab.swap(x, y);
                }
            }
            let d = lu.ab[lu.idx(j, j)];
            for r in j + 1..=j + km {
                let k = lu.idx(r, j);
                lu.ab[k] /= d;
            }
            for c in j + 1..=ju.min(j + kv) {
                let u = lu.ab[lu.idx(j, c)];
                if u != 0.0 {
                    for r in j + 1..=j + km {
                        let l = lu.ab[lu.idx(r, j)];
                        let k = lu.idx(r, c);
                        lu.ab[k] -= l * u;
                    }
                }
            }
        }
        Ok(lu)
    }

    fn solve(&self, b: &[f64]) -> Vec<f64> {
        let n = self.n;
        let mut x = b.to_vec();
        for j in 0..n {
            let p = self.piv[j];
            if p != j {
                x.swap(j, p);
            }
            let km = self.kl.min(n - 1 - j);
            let xj = x[j];
            for r in j + 1..=j + km {
                x[r] -= self.ab[self.idx(r, j)] * xj;
            }
        }
        let kv = self.kl + self.ku;
        for j in (0..n).rev() {
            let mut s = x[j];
            for c in j + 1..=(j + kv).min(n - 1) {
                s -= self.ab[self.idx(j, c)] * x[c];
            }
            x[j] = s / self.ab[self.idx(j, j)];
        }
        x
    }
}

/// Incomplete LU with the sparsity pattern of the matrix.
#[derive(Clone, Debug)]
struct Ilu0 {
    lu: CsrMatrix,
    diag: Vec<usize>,
}

impl Ilu0 {
    fn new(a: &CsrMatrix) -> Result<Self> {
        let mut lu = a.clone();
        let n = a.n;
        let diag: Vec<usize> = (0..n)
            .map(|i| {
                let (c, _) = a.row(i);
                a.row_ptr[i] + c.binary_search(&i).expect("diagonal is always stored")
            })
            .collect();
        for i in 1..n {
            let (a0, a1) = (lu.row_ptr[i], lu.row_ptr[i + 1]);
            for p in a0..a1 {
                let k = lu.cols[p];
                if k >= i {
                    break;
                }
                let dk = lu.vals[diag[k]];
                if dk == 0.0 {
                    return Err(Error::convergence("zero pivot in ILU(0)", f64::NAN));
                }
                lu.vals[p] /= dk;
                let lik = lu.vals[p];
                // row_i(j) -= l_ik * u_kj for j > k in the pattern of row i
                let (k0, k1) = (diag[k] + 1, lu.row_ptr[k + 1]);
                let mut q = p + 1;
                for r in k0..k1 {
                    let j = lu.cols[r];
                    while q < a1 && lu.cols[q] < j {
                        q += 1;
                    }
                    if q < a1 && lu.cols[q] == j {
                        lu.vals[q] -= lik * lu.vals[r];
                    }
                }
            }
            if lu.vals[diag[i]] == 0.0 {
                return Err(Error::convergence("zero pivot in ILU(0)", f64::NAN));
            }
        }
        Ok(Ilu0 { lu, diag })
    }

    fn apply(&self, b: &[f64]) -> Vec<f64> {
        let n = self.lu.n;
        let mut x = b.to_vec();
        for i in 0..n {
            let (a0, d) = (self.lu.row_ptr[i], self.diag[i]);
            let mut s = x[i];
            for p in a0..d {
                s -= self.lu.vals[p] * x[self.lu.cols[p]];
            }
            x[i] = s;
        }
        for i in (0..n).rev() {
            let (d, a1) = (self.diag[i], self.lu.row_ptr[i + 1]);
            let mut s = x[i];
            for p in d + 1..a1 {
                s -= self.lu.vals[p] * x[self.lu.cols[p]];
            }
            x[i] = s / self.lu.vals[d];
        }
        x
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

fn norm(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

const ITER_RTOL: f64 = 1e-13;

fn pcg(a: &CsrMatrix, m: &Ilu0, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.n;
    let bn = norm(b);
    if bn == 0.0 {
        return Some(vec![0.0; n]);
    }
    let mut x = vec![0.0; n];
    let mut r = b.to_vec();
    let mut z = m.apply(&r);
    let mut p = z.clone();
    let mut rz = dot(&r, &z);
    for _ in 0..(10 * n).max(100) {
        let ap = a.matvec(&p);
        let pap = dot(&p, &ap);
        if !(pap > 0.0) {
            return None;
        }
        let alpha = rz / pap;
        for i in 0..n {
            x[i] += alpha * p[i];
            r[i] -= alpha * ap[i];
        }
        if norm(&r) <= ITER_RTOL * bn {
            return Some(x);
        }
        z = m.apply(&r);
        let rz_new = dot(&r, &z);
        let beta = rz_new / rz;
        rz = rz_new;
        for i in 0..n {
            p[i] = z[i] + beta * p[i];
        }
    }
    None
}

/// Right-preconditioned restarted GMRES(m).
fn gmres(a: &CsrMatrix, m: &Ilu0, b: &[f64]) -> Option<Vec<f64>> {
    let n = a.n;
    let restart = 60.min(n.max(1));
    let bn = norm(b);
    if bn == 0.0 {
        return Some(vec![0.0; n]);
    }
    let mut x = vec![0.0; n];
    for _cycle in 0..(20 * n / restart + 20) {
        let ax = a.matvec(&x);
        let r: Vec<f64> = b.iter().zip(&ax).map(|(b, a)| b - a).collect();
        let beta = norm(&r);
        if beta <= ITER_RTOL * bn {
            return Some(x);
        }
        let mut v: Vec<Vec<f64>> = vec![r.iter().map(|x| x / beta).collect()];
        let mut h = vec![vec![0.0; restart]; restart + 1];
        let (mut cs, mut sn) = (vec![0.0; restart], vec![0.0; restart]);
        let mut g = vec![0.0; restart + 1];
        g[0] = beta;
        let mut k_used = 0;
        for k in 0..restart {
            let z = m.apply(&v[k]);
            let mut w = a.matvec(&z);
            for (i, vi) in v.iter().enumerate() {
                h[i][k] = dot(&w, vi);
                for (wj, vj) in w.iter_mut().zip(vi) {
                    *wj -= h[i][k] * vj;
                }
            }
            h[k + 1][k] = norm(&w);
            for i in 0..k {
                let t = cs[i] * h[i][k] + sn[i] * h[i + 1][k];
                h[i + 1][k] = -sn[i] * h[i][k] + cs[i] * h[i + 1][k];
                h[i][k] = t;
            }
            let den = h[k][k].hypot(h[k + 1][k]);
            if den == 0.0 {
                return None;
            }
            cs[k] = h[k][k] / den;
            sn[k] = h[k + 1][k] / den;
            h[k][k] = den;
            let hk1 = h[k + 1][k];
            h[k + 1][k] = 0.0;
            g[k + 1] = -sn[k] * g[k];
            g[k] *= cs[k];
            k_used = k + 1;
            if g[k + 1].abs() <= ITER_RTOL * bn || hk1 == 0.0 {
                break;
            }
            v.push(w.iter().map(|x| x / hk1).collect());
        }
        let mut y = vec![0.0; k_used];
        for i in (0..k_used).rev() {
            let s: f64 = (i + 1..k_used).map(|j| h[i][j] * y[j]).sum();
            y[i] = (g[i] - s) / h[i][i];
        }
        let mut upd = vec![0.0; n];
        for (j, yj) in y.iter().enumerate() {
            for (u, vj) in upd.iter_mut().zip(&v[j]) {
                *u += yj * vj;
            }
        }
        let upd = m.apply(&upd);
        for (xi, u) in x.iter_mut().zip(&upd) {
            *xi += u;
        }
    }
    let ax = a.matvec(&x);
    let r: f64 = norm(&b.iter().zip(&ax).map(|(b, a)| b - a).collect::<Vec<_>>());
    (r <= 1e-10 * bn).then_some(x)
}

enum Method {
    Banded(BandLu),
    Iterative { a: CsrMatrix, ilu: Ilu0, symmetric: bool },
}

/// A prepared linear solver that can be applied to many right-hand sides.
pub struct Factorization {
    method: Method,
}

/// Largest band storage (entries) used by `Auto` before switching to an
/// iterative method.
const BAND_BUDGET: usize = 8_000_000;

impl Factorization {
    pub fn new(a: &CsrMatrix, kind: LinearSolverKind) -> Result<Self> {
        let (kl, ku) = a.bandwidth();
        let band_cost = (2 * kl + ku + 1) * a.n;
        let use_band = match kind {
            LinearSolverKind::DirectBanded => true,
            LinearSolverKind::Auto => band_cost <= BAND_BUDGET,
            _ => false,
        };
        let method = if use_band {
            Method::Banded(BandLu::factor(a)?)
        } else {
            let symmetric = match kind {
                LinearSolverKind::Gmres => false,
                _ => a.is_symmetric(1e-12),
            };
            Method::Iterative { a: a.clone(), ilu: Ilu0::new(a)?, symmetric }
        };
        Ok(Factorization { method })
    }

    /// As [`Factorization::new`], retrying once with a `1e-12` relative
    /// diagonal shift when the matrix is singular.
    pub fn new_shifted(a: &CsrMatrix, kind: LinearSolverKind) -> Result<Self> {
        Factorization::new(a, kind).or_else(|_| {
            let mut m = a.clone();
            let scale = (0..m.n()).map(|i| m.get(i, i).abs()).fold(0.0f64, f64::max).max(1.0);
            m.add_diagonal(1e-12 * scale);
            Factorization::new(&m, kind)
        })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let x = match &self.method {
            Method::Banded(lu) => Some(lu.solve(b)),
            Method::Iterative { a, ilu, symmetric } => {
                let first = if *symmetric { pcg(a, ilu, b) } else { None };
                first.or_else(|| gmres(a, ilu, b))
            }
        };
        match x {
            Some(x) if x.iter().all(|v| v.is_finite()) => Ok(x),
            _ => Err(Error::convergence("linear solve failed", f64::NAN)),
        }
    }
}

/// One-shot solve of `Ax = b`.
pub fn solve(a: &CsrMatrix, b: &[f64], kind: LinearSolverKind) -> Result<Vec<f64>> {
    Factorization::new(a, kind)?.solve(b)
}
