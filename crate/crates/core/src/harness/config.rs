//! JSON run and study configuration. Every field and default is listed in
//! `docs/config.md`.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::cell::{tabulate_q, EffectiveFluxTable};
use crate::error::{Error, Result};
use crate::expr::{Expr, Var, Vars};
use crate::flux::{FluxCoefficient, FluxSpec};
use crate::grid::{Boundary, Domain, Point, TensorGrid};
use crate::nfunction::{NFunction, NfSpec};
use crate::numeric::linspace;
use crate::solver::SolveOptions;

use super::pairing::TestFunctionSpec;

fn one() -> String {
    "1".into()
}
fn dim1() -> usize {
    1
}
fn n64() -> usize {
    64
}

/// Parameter box of an effective-flux table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TableConfig {
    pub r_range: (f64, f64),
    pub r_n: usize,
    pub xi_range: (f64, f64),
    pub xi_n: usize,
}

impl Default for TableConfig {
    fn default() -> Self {
        TableConfig { r_range: (-2.0, 2.0), r_n: 9, xi_range: (-2.0, 2.0), xi_n: 17 }
    }
}

/// How the homogenized problem obtains `q`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QSource {
    /// Tabulate once, interpolate afterwards.
    #[default]
    Table,
    /// Nested cell solves at every evaluation (verification only).
    Direct,
}

/// One problem: flux, growth function, source and discretization.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    #[serde(default = "dim1")]
    pub dim: usize,
    pub flux: FluxSpec,
    /// Growth function for families without their own and for the norms.
    #[serde(default)]
    pub nf: Option<NfSpec>,
    /// Source `f(x)`.
    #[serde(default = "one")]
    pub f: String,
    #[serde(default)]
    pub eps: Option<f64>,
    /// Cells per axis of the Ω grid for the homogenized problem.
    #[serde(default = "n64")]
    pub omega_n: usize,
    /// Cells per axis of the fine grid; `None` picks the smallest power of
    /// two with spacing `≤ ε²/8`.
    #[serde(default)]
    pub fine_n: Option<usize>,
    #[serde(default = "n64")]
    pub cell_n_y: usize,
    #[serde(default = "n64")]
    pub cell_n_z: usize,
    #[serde(default)]
    pub table: TableConfig,
    #[serde(default)]
    pub q_source: QSource,
    #[serde(default)]
    pub solver: SolveOptions,
}

/// A convergence study over a list of scales.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    #[serde(flatten)]
    pub problem: ProblemConfig,
    pub eps_list: Vec<f64>,
    #[serde(default = "default_norms")]
    pub norms: Vec<NormKind>,
    #[serde(default)]
    pub pairing: Vec<TestFunctionSpec>,
    #[serde(default)]
    pub output: OutputConfig,
    /// When false, `wall_ms` is written as 0 so outputs are byte-stable.
    #[serde(default)]
    pub record_timing: bool,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NormKind {
    /// Luxemburg norm in `L^Φ(Ω)` → `err_lux`.
    Luxemburg,
    /// `L²(Ω)` → `err_l2`.
    L2,
    /// `W¹L^Φ(Ω)` norm of `u_ε − reconstruction` → `err_corrector`.
    W1Luxemburg,
}

fn default_norms() -> Vec<NormKind> {
    vec![NormKind::Luxemburg, NormKind::L2, NormKind::W1Luxemburg]
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OutputConfig {
    pub csv: Option<PathBuf>,
    pub json: Option<PathBuf>,
    /// Directory for two-column `eps value` files, one per error column.
    pub gnuplot_dir: Option<PathBuf>,
}

/// Reads a JSON config; missing files are usage errors.
pub fn load_json<T: serde::de::DeserializeOwned>(path: impl AsRef<Path>) -> Result<T> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            Error::Usage(format!("config file {} not found", path.display()))
        } else {
            Error::io(path, e)
        }
    })?;
    serde_json::from_str(&text).map_err(|e| Error::Usage(format!("{}: {e}", path.display())))
}

impl ProblemConfig {
    pub fn validate(&self) -> Result<()> {
        if !(1..=2).contains(&self.dim) {
            return Err(Error::Usage(format!("dim must be 1 or 2, got {}", self.dim)));
        }
        self.solver.validate()?;
        if let Some(e) = self.eps {
            if !(e > 0.0 && e <= 1.0) {
                return Err(Error::Usage(format!("eps must lie in (0, 1], got {e}")));
            }
        }
        Ok(())
    }

    pub fn build_flux(&self, base_dir: Option<&Path>) -> Result<FluxCoefficient> {
        self.flux.build(self.dim, self.nf.as_ref(), base_dir)
    }

    /// Growth function for norms: the config's `nf`, else the flux's own.
    pub fn norm_nf(&self, a: &FluxCoefficient, base_dir: Option<&Path>) -> Result<NFunction> {
        match (&self.nf, &a.nf_pair) {
            (Some(s), _) => s.build(base_dir),
            (None, Some((phi, _))) => Ok(phi.clone()),
            (None, None) => Err(Error::Usage("no N-function configured for norms".into())),
        }
    }

    pub fn source(&self) -> Result<impl Fn(&Point) -> f64> {
        let e = Expr::parse(&self.f)?;
        for v in [Var::Y1, Var::Y2, Var::Z1, Var::Z2, Var::T] {
            if e.uses(v) {
                return Err(Error::Usage(format!("source '{}' may only depend on x1, x2", self.f)));
            }
        }
        Ok(move |x: &Point| e.eval(&Vars::at_x(*x)))
    }

    pub fn omega_grid(&self) -> Result<TensorGrid> {
        TensorGrid::new(self.dim, self.omega_n, Domain::unit_square(), Boundary::DirichletZero)
    }

    pub fn fine_grid(&self, eps: f64) -> Result<TensorGrid> {
        let n = self.fine_n.unwrap_or_else(|| crate::solver::resolving_cells(eps, 1.0));
        TensorGrid::new(self.dim, n, Domain::unit_square(), Boundary::DirichletZero)
    }

    pub fn cell_grids(&self) -> Result<(TensorGrid, TensorGrid)> {
        Ok((TensorGrid::cell(self.dim, self.cell_n_y)?, TensorGrid::cell(self.dim, self.cell_n_z)?))
    }

    pub fn tabulate(&self, a: &FluxCoefficient) -> Result<EffectiveFluxTable> {
        let (gy, gz) = self.cell_grids()?;
        let t = &self.table;
        let r = linspace(t.r_range.0, t.r_range.1, t.r_n);
        tabulate_q(a, &r, t.xi_range, t.xi_n, &gy, &gz, &self.solver)
    }
}

impl StudyConfig {
    pub fn validate(&self) -> Result<()> {
        self.problem.validate()?;
        if self.eps_list.is_empty() {
            return Err(Error::Usage("eps_list is empty".into()));
        }
        if self.eps_list.iter().any(|e| !(*e > 0.0 && *e <= 1.0)) {
            return Err(Error::Usage("every eps must lie in (0, 1]".into()));
        }
        if self.eps_list.windows(2).any(|w| !(w[1] < w[0])) {
            return Err(Error::Usage("eps_list must be strictly decreasing".into()));
        }
        for &e in &self.eps_list {
            crate::solver::check_resolution(&self.problem.fine_grid(e)?, e)?;
        }
        Ok(())
    }
}
