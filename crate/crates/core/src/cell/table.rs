//! Tabulated effective flux `q(r, ξ)` with multilinear interpolation.

use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::solve_outer_cell;
use crate::error::{Error, Result};
use crate::flux::{FluxCoefficient, Mat2};
use crate::grid::{Point, TensorGrid};
use crate::numeric::linspace;
use crate::solver::SolveOptions;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableProvenance {
    pub flux: String,
    pub n_y: usize,
    pub n_z: usize,
    pub options: SolveOptions,
}

/// `q` at every node of `r_grid × xi_axes[0] (× xi_axes[1])`, stored with
/// `r` slowest and the last `ξ` axis fastest.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EffectiveFluxTable {
    pub dim: usize,
    pub r_grid: Vec<f64>,
    pub xi_axes: Vec<Vec<f64>>,
    #[serde(skip)]
    pub values: Vec<Point>,
    #[serde(skip)]
    pub residuals: Vec<f64>,
    pub provenance: TableProvenance,
}

fn check_axis(name: &str, a: &[f64]) -> Result<()> {
    if a.len() < 2 {
        return Err(Error::Usage(format!("table axis {name} needs at least 2 nodes")));
    }
    if a.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::Usage(format!("table axis {name} must be strictly increasing")));
    }
    Ok(())
}

impl EffectiveFluxTable {
    fn axes(&self) -> Vec<&[f64]> {
        let mut v: Vec<&[f64]> = vec![&self.r_grid];
        v.extend(self.xi_axes.iter().map(|a| a.as_slice()));
        v
    }

    fn strides(&self) -> Vec<usize> {
        let axes = self.axes();
        let mut s = vec![1; axes.len()];
        for k in (0..axes.len() - 1).rev() {
            s[k] = s[k + 1] * axes[k + 1].len();
        }
        s
    }

    /// Node coordinates `(r, ξ)` of flat index `idx`.
    pub fn node(&self, idx: usize) -> (f64, Point) {
        let axes = self.axes();
        let st = self.strides();
        let c: Vec<f64> = (0..axes.len()).map(|k| axes[k][(idx / st[k]) % axes[k].len()]).collect();
        (c[0], [c[1], c.get(2).copied().unwrap_or(0.0)])
    }

    pub fn len(&self) -> usize {
        self.axes().iter().map(|a| a.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Largest `|ξ|` box the table covers, as `(lo, hi)` per axis.
    pub fn xi_hull(&self) -> Vec<(f64, f64)> {
        self.xi_axes.iter().map(|a| (a[0], a[a.len() - 1])).collect()
    }

    /// Writes the node CSV (`r, xi1[, xi2], q1[, q2], residual`) and a
    /// sibling `.json` with axes and provenance.
    pub fn write(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut w = csv::Writer::from_path(path).map_err(|e| csv_io(path, e))?;
        let mut head = vec!["r".to_string()];
        head.extend((1..=self.dim).map(|k| format!("xi{k}")));
        head.extend((1..=self.dim).map(|k| format!("q{k}")));
        head.push("residual".into());
        w.write_record(&head)?;
        for i in 0..self.len() {
            let (r, xi) = self.node(i);
            let mut rec = vec![r.to_string()];
            rec.extend(xi[..self.dim].iter().map(|v| v.to_string()));
            rec.extend(self.values[i][..self.dim].iter().map(|v| v.to_string()));
            rec.push(self.residuals[i].to_string());
            w.write_record(&rec)?;
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        let mp = meta_path(path);
        fs::write(&mp, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(&mp, e))
    }

    pub fn read(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let mp = meta_path(path);
        let text = fs::read_to_string(&mp).map_err(|e| Error::io(&mp, e))?;
        let mut t: EffectiveFluxTable = serde_json::from_str(&text)?;
        if !(1..=2).contains(&t.dim) || t.xi_axes.len() != t.dim {
            return Err(Error::Format(format!("{}: inconsistent table dimension", mp.display())));
        }
        let mut rd = csv::Reader::from_path(path).map_err(|e| csv_io(path, e))?;
        let parse = |s: &str| -> Result<f64> {
            s.trim().parse().map_err(|_| Error::Format(format!("{}: bad number '{s}'", path.display())))
        };
        for rec in rd.records() {
            let rec = rec?;
            if rec.len() != 2 * t.dim + 2 {
                return Err(Error::Format(format!("{}: expected {} columns", path.display(), 2 * t.dim + 2)));
            }
            let mut q = [0.0; 2];
            for k in 0..t.dim {
                q[k] = parse(&rec[1 + t.dim + k])?;
            }
            t.values.push(q);
            t.residuals.push(parse(&rec[1 + 2 * t.dim])?);
        }
        if t.values.len() != t.len() {
            return Err(Error::Format(format!(
                "{}: {} rows for a table of {} nodes",
                path.display(),
                t.values.len(),
                t.len()
            )));
        }
        Ok(t)
    }
}

fn meta_path(p: &Path) -> PathBuf {
    p.with_extension("json")
}

fn csv_io(path: &Path, e: csv::Error) -> Error {
    match e.into_kind() {
        csv::ErrorKind::Io(io) => Error::io(path, io),
        other => Error::Format(format!("{other:?}")),
    }
}

/// Evaluates `q` at every node of `r_grid × [lo, hi]^d` (`xi_n` nodes per
/// axis). Nodes are independent and solved concurrently from a zero
/// initial guess, so the table does not depend on the schedule.
pub fn tabulate_q(
    a: &FluxCoefficient,
    r_grid: &[f64],
    xi_box: (f64, f64),
    xi_n: usize,
    grid_y: &TensorGrid,
    grid_z: &TensorGrid,
    opts: &SolveOptions,
) -> Result<EffectiveFluxTable> {
    check_axis("r", r_grid)?;
    let (lo, hi) = xi_box;
    if !(lo < 0.0 && hi > 0.0) {
        return Err(Error::Usage(format!("ξ box [{lo}, {hi}] must contain 0 in its interior")));
    }
    let xi_axis = linspace(lo, hi, xi_n);
    check_axis("xi", &xi_axis)?;
    let mut t = EffectiveFluxTable {
        dim: a.dim,
        r_grid: r_grid.to_vec(),
        xi_axes: vec![xi_axis; a.dim],
        values: vec![],
        residuals: vec![],
        provenance: TableProvenance {
            flux: a.name.clone(),
            n_y: grid_y.n(),
            n_z: grid_z.n(),
            options: opts.clone(),
        },
    };
    let nodes: Vec<(f64, Point)> = (0..t.len()).map(|i| t.node(i)).collect();
    let out: Vec<(Point, f64)> = nodes
        .par_iter()
        .map(|&(r, xi)| {
            solve_outer_cell(a, r, xi, grid_y, grid_z, opts)
                .map(|s| (s.averaged_flux, s.residual_norm))
                .map_err(|e| node_error(e, r, &xi))
        })
        .collect::<Result<_>>()?;
    (t.values, t.residuals) = out.into_iter().unzip();
    Ok(t)
}

fn node_error(e: Error, r: f64, xi: &Point) -> Error {
    let at = format!("table node r = {r}, ξ = ({}, {})", xi[0], xi[1]);
    match e {
        Error::Convergence { message, residual } => Error::Convergence { message: format!("{at}: {message}"), residual },
        Error::Range(m) => Error::Range(format!("{at}: {m}")),
        Error::Domain(m) => Error::Domain(format!("{at}: {m}")),
        e => e,
    }
}

/// Cell index and local coordinate of `x` on `axis`, or `None` outside.
fn locate(axis: &[f64], x: f64) -> Option<(usize, f64)> {
    let n = axis.len();
    let (lo, hi) = (axis[0], axis[n - 1]);
    let slack = 1e-12 * (hi - lo);
    if !(x >= lo - slack && x <= hi + slack) {
        return None;
    }
    let x = x.clamp(lo, hi);
    let i = axis.partition_point(|&a| a <= x).saturating_sub(1).min(n - 2);
    Some((i, (x - axis[i]) / (axis[i + 1] - axis[i])))
}

/// Multilinear interpolant of `q` and its derivatives `(q, ∂q/∂ξ, ∂q/∂r)`.
pub fn interp_q_with_gradient(t: &EffectiveFluxTable, r: f64, xi: &Point) -> Result<(Point, Mat2, Point)> {
    let axes = t.axes();
    let coords: Vec<f64> = std::iter::once(r).chain(xi[..t.dim].iter().copied()).collect();
    let mut loc = Vec::with_capacity(axes.len());
    for (k, (&ax, &x)) in axes.iter().zip(&coords).enumerate() {
        match locate(ax, x) {
            Some(l) => loc.push(l),
            None => {
                let name = if k == 0 { "r".to_string() } else { format!("xi{k}") };
                return Err(Error::Range(format!(
                    "{name} = {x} lies outside the tabulated range [{}, {}]; re-tabulate with a wider box",
                    ax[0],
                    ax[ax.len() - 1]
                )));
            }
        }
    }
    let st = t.strides();
    let m = axes.len();
    let mut val = [0.0; 2];
    // derivative w.r.t. each table coordinate (r, ξ1, ξ2)
    let mut der = [[0.0; 2]; 3];
    for corner in 0..(1usize << m) {
        let mut idx = 0;
        let mut w = 1.0;
        let mut dw = [1.0; 3];
        for k in 0..m {
            let bit = (corner >> k) & 1;
            let (i, s) = loc[k];
            idx += (i + bit) * st[k];
            let f = if bit == 1 { s } else { 1.0 - s };
            let h = axes[k][i + 1] - axes[k][i];
            let df = if bit == 1 { 1.0 / h } else { -1.0 / h };
            for (j, d) in dw.iter_mut().enumerate().take(m) {
                *d *= if j == k { df } else { f };
            }
            w *= f;
        }
        let v = t.values[idx];
        for c in 0..t.dim {
            val[c] += w * v[c];
            for j in 0..m {
                der[j][c] += dw[j] * v[c];
            }
        }
    }
    let mut d_xi = [[0.0; 2]; 2];
    for c in 0..t.dim {
        for k in 0..t.dim {
            d_xi[c][k] = der[k + 1][c];
        }
    }
    Ok((val, d_xi, der[0]))
}

/// Multilinear interpolation of `q` at `(r, ξ)`; no extrapolation.
pub fn interp_q(t: &EffectiveFluxTable, r: f64, xi: &Point) -> Result<Point> {
    Ok(interp_q_with_gradient(t, r, xi)?.0)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cell::eval_q;
    use crate::flux::{make_linear_separable, ScalarMap};

    fn linear_table() -> (FluxCoefficient, EffectiveFluxTable, TensorGrid, TensorGrid) {
        let a = make_linear_separable(
            1,
            ScalarMap::parse_y("2+sin(2*pi*y1)").unwrap(),
            ScalarMap::parse_z("2+sin(2*pi*z1)").unwrap(),
        )
        .unwrap();
        let gy = TensorGrid::cell(1, 16).unwrap();
        let gz = TensorGrid::cell(1, 16).unwrap();
        let t = tabulate_q(&a, &[-1.0, 0.0, 1.0], (-2.0, 2.0), 5, &gy, &gz, &SolveOptions::default()).unwrap();
        (a, t, gy, gz)
    }

    #[test]
    fn linear_table_interpolates_exactly() {
        let (a, t, gy, gz) = linear_table();
        // zero at zero, r-slices identical bitwise
        for i in 0..t.len() {
            let (r, xi) = t.node(i);
            if xi[0] == 0.0 {
                assert_eq!(t.values[i], [0.0, 0.0]);
            }
            assert_eq!(interp_q(&t, r, &xi).unwrap(), t.values[i]);
        }
        assert_eq!(t.values[0..5], t.values[5..10]);
        let direct = eval_q(&a, 0.5, [0.5, 0.0], &gy, &gz, &SolveOptions::default()).unwrap();
        let q = interp_q(&t, 0.5, &[0.5, 0.0]).unwrap();
        assert!((q[0] - direct[0]).abs() < 1e-6);
        let (_, d, dr) = interp_q_with_gradient(&t, 0.5, &[0.5, 0.0]).unwrap();
        assert!((d[0][0] - direct[0] / 0.5).abs() < 1e-6);
        assert!(dr[0].abs() < 1e-12);
    }

    #[test]
    fn out_of_hull_is_range_error() {
        let (_, t, _, _) = linear_table();
        assert!(matches!(interp_q(&t, 0.0, &[2.5, 0.0]), Err(Error::Range(_))));
        assert!(matches!(interp_q(&t, -1.5, &[0.0, 0.0]), Err(Error::Range(_))));
    }

    #[test]
    fn two_dim_affine_data_is_reproduced() {
        let f = |r: f64, x: f64, y: f64| [1.0 + 2.0 * r - x + 0.5 * y, 3.0 * x - y];
        let mut t = EffectiveFluxTable {
            dim: 2,
            r_grid: vec![0.0, 1.0, 3.0],
            xi_axes: vec![linspace(-1.0, 1.0, 3), linspace(-2.0, 2.0, 5)],
            values: vec![],
            residuals: vec![],
            provenance: TableProvenance { flux: "affine".into(), n_y: 0, n_z: 0, options: SolveOptions::default() },
        };
        for i in 0..t.len() {
            let (r, xi) = t.node(i);
            t.values.push(f(r, xi[0], xi[1]));
            t.residuals.push(0.0);
        }
        let (q, d, dr) = interp_q_with_gradient(&t, 2.2, &[0.3, -1.7]).unwrap();
        let e = f(2.2, 0.3, -1.7);
        assert!((q[0] - e[0]).abs() < 1e-13 && (q[1] - e[1]).abs() < 1e-13);
        assert!((d[0][0] + 1.0).abs() < 1e-13 && (d[0][1] - 0.5).abs() < 1e-13);
        assert!((d[1][0] - 3.0).abs() < 1e-13 && (d[1][1] + 1.0).abs() < 1e-13);
        assert!((dr[0] - 2.0).abs() < 1e-13 && dr[1].abs() < 1e-13);
    }

    #[test]
    fn csv_round_trip() {
        let (_, t, _, _) = linear_table();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("q.csv");
        t.write(&p).unwrap();
        let back = EffectiveFluxTable::read(&p).unwrap();
        assert_eq!(back, t);
    }
}
