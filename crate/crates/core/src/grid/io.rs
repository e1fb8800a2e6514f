//! Field serialization: a CSV with one dof per row plus a JSON grid header.
//! Floats are written in shortest round-trip form, so reading back is exact.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use super::{Boundary, Domain, ScalarField, TensorGrid};
use crate::error::{Error, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridMeta {
    pub dim: usize,
    pub n: usize,
    pub domain: Domain,
    pub bc: Boundary,
}

impl From<&TensorGrid> for GridMeta {
    fn from(g: &TensorGrid) -> Self {
        GridMeta { dim: g.dim(), n: g.n(), domain: g.domain(), bc: g.bc() }
    }
}

impl GridMeta {
    pub fn build(&self) -> Result<TensorGrid> {
        TensorGrid::new(self.dim, self.n, self.domain, self.bc)
    }
}

fn header_path(csv: &Path) -> PathBuf {
    csv.with_extension("json")
}

impl ScalarField {
    /// Writes `path` (CSV) and a sibling `.json` grid header.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let g = &self.grid;
        let mut w = csv::Writer::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Format(format!("{other:?}")),
        })?;
        if g.dim() == 1 {
            w.write_record(["i", "x1", "value"])?;
        } else {
            w.write_record(["i", "j", "x1", "x2", "value"])?;
        }
        for (d, v) in self.values.iter().enumerate() {
            let (i, j) = g.dof_node(d);
            let x = g.node_coord(i, j);
            if g.dim() == 1 {
                w.write_record([i.to_string(), x[0].to_string(), v.to_string()])?;
            } else {
                w.write_record([
                    i.to_string(),
                    j.to_string(),
                    x[0].to_string(),
                    x[1].to_string(),
                    v.to_string(),
                ])?;
            }
        }
        w.flush().map_err(|e| Error::io(path, e))?;
        let meta = serde_json::to_string_pretty(&GridMeta::from(g))?;
        let hp = header_path(path);
        fs::write(&hp, meta).map_err(|e| Error::io(&hp, e))
    }

    /// Reads a field written by [`ScalarField::write_csv`].
    pub fn read_csv(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let hp = header_path(path);
        let text = fs::read_to_string(&hp).map_err(|e| Error::io(&hp, e))?;
        let meta: GridMeta = serde_json::from_str(&text)?;
        let grid = meta.build()?;
        let mut r = csv::Reader::from_path(path).map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::io(path, io),
            other => Error::Format(format!("{other:?}")),
        })?;
        let mut values = vec![f64::NAN; grid.n_dofs()];
        let ncol = if grid.dim() == 1 { 3 } else { 5 };
        for rec in r.records() {
            let rec = rec?;
            if rec.len() != ncol {
                return Err(Error::Format(format!("expected {ncol} columns, got {}", rec.len())));
            }
            let num = |k: usize| -> Result<usize> {
                rec[k].parse().map_err(|_| Error::Format(format!("bad index '{}'", &rec[k])))
            };
            let i = num(0)?;
            let j = if grid.dim() == 2 { num(1)? } else { 0 };
            let v: f64 = rec[ncol - 1]
                .parse()
                .map_err(|_| Error::Format(format!("bad value '{}'", &rec[ncol - 1])))?;
            let d = grid
                .node_dof(i, j)
                .ok_or_else(|| Error::Format(format!("node ({i},{j}) is not a dof")))?;
            values[d] = v;
        }
        if values.iter().any(|v| v.is_nan()) {
            return Err(Error::Format("field CSV does not cover every dof".into()));
        }
        ScalarField::new(&grid, values)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn csv_round_trip_is_exact() {
        let dir = tempfile::tempdir().unwrap();
        for g in [TensorGrid::cell(1, 8).unwrap(), TensorGrid::unit_dirichlet(2, 5).unwrap()] {
            let u = ScalarField::from_fn(&g, |x| (x[0] * 7.1).sin() / 3.0 + x[1].exp() * 1e-17);
            let p = dir.path().join("u.csv");
            u.write_csv(&p).unwrap();
            let back = ScalarField::read_csv(&p).unwrap();
            assert_eq!(back, u);
        }
    }

    #[test]
    fn missing_file_reports_path() {
        let err = ScalarField::read_csv("/nonexistent/u.csv").unwrap_err();
        assert!(err.to_string().contains("/nonexistent/u.json"));
    }
}
