//! Command-line front end. Exit codes: 0 success, 1 other failure, 2 usage,
//! 3 convergence, 4 hypothesis failure under `--strict`.

use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use crate::cell::{solve_inner_cell, solve_outer_cell, TableProvenance};
use crate::error::{Error, Result};
use crate::flux::{verify_hypotheses, Sampler};
use crate::grid::Point;
use crate::harness::{convergence_study, load_json, write_outputs, ProblemConfig, QSource, StudyConfig};
use crate::nfunction::{check_delta2, default_index_grid, simonenko_indices, NFunction};
use crate::numeric::logspace;
use crate::solver::{solve_fine, solve_macro, DirectFlux, EffectiveFlux, FieldSolution};

#[derive(Parser, Debug)]
#[command(name = "homog", version, about = "Reiterated homogenization of monotone operators with Orlicz growth")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
#[value(rename_all = "snake_case")]
enum Family {
    Power,
    ScaledPower,
    PowerLog,
    Exp,
}

#[derive(Clone, Copy, Debug, ValueEnum)]
enum Level {
    Inner,
    Outer,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Growth indices, Δ₂ constant and conjugate spot checks of an N-function.
    NfCheck {
        #[arg(long, value_enum)]
        family: Family,
        #[arg(long, default_value_t = 2.0)]
        p: f64,
        /// Tabulation end for `exp`.
        #[arg(long, default_value_t = 100.0)]
        t_max: f64,
    },
    /// Samples the structural hypotheses of a configured flux.
    VerifyFlux {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value_t = 256)]
        samples: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Exit with status 4 if any hypothesis fails.
        #[arg(long)]
        strict: bool,
    },
    /// Solves one cell problem and prints its averaged flux.
    SolveCell {
        #[arg(long, value_enum)]
        level: Level,
        #[arg(long)]
        config: PathBuf,
        /// Macroscopic gradient, comma-separated.
        #[arg(long, value_delimiter = ',', required = true)]
        xi: Vec<f64>,
        /// Slow cell point for the inner problem, comma-separated.
        #[arg(long, value_delimiter = ',')]
        y: Option<Vec<f64>>,
        #[arg(long, default_value_t = 0.0)]
        r: f64,
        /// Corrector CSV (grid header written next to it as .json).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulates the effective flux over the configured parameter box.
    Tabulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solves the homogenized problem.
    Macro {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Solves the oscillating problem at one scale.
    Fine {
        #[arg(long)]
        config: PathBuf,
        /// Overrides the config's `eps`.
        #[arg(long)]
        eps: Option<f64>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Runs a convergence study.
    Study {
        #[arg(long)]
        config: PathBuf,
        /// Overrides `output.csv`.
        #[arg(long)]
        csv: Option<PathBuf>,
        /// Overrides `output.json`.
        #[arg(long)]
        json: Option<PathBuf>,
    },
}

enum Failure {
    Error(Error),
    Strict(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        Failure::Error(e)
    }
}

pub fn exit_code(e: &Error) -> i32 {
    match e {
        Error::Usage(_) | Error::Parse { .. } => 2,
        Error::Convergence { .. } => 3,
        _ => 1,
    }
}

/// Runs the CLI on `argv` (including the program name) and returns the exit
/// code.
pub fn cli_main<I, T>(argv: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { 2 } else { 0 };
        }
    };
    match run(cli.cmd) {
        Ok(()) => 0,
        Err(Failure::Strict(msg)) => {
            eprintln!("hypothesis check failed: {msg}");
            4
        }
        Err(Failure::Error(e)) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn point(v: &[f64], dim: usize, what: &str) -> Result<Point> {
    if v.len() != dim {
        return Err(Error::Usage(format!("--{what} needs {dim} component(s), got {}", v.len())));
    }
    let mut p = [0.0; 2];
    p[..dim].copy_from_slice(v);
    Ok(p)
}

fn fmt_point(p: &Point, dim: usize) -> String {
    p[..dim].iter().map(|v| format!("{v:.10}")).collect::<Vec<_>>().join(" ")
}

fn problem(path: &Path) -> Result<ProblemConfig> {
    let c: ProblemConfig = load_json(path)?;
    c.validate()?;
    Ok(c)
}

fn base_dir(path: &Path) -> Option<&Path> {
    path.parent().filter(|d| !d.as_os_str().is_empty())
}

#[derive(Serialize)]
struct SolveManifest<'a> {
    version: &'static str,
    command: &'static str,
    config: &'a ProblemConfig,
    eps: Option<f64>,
    n: usize,
    residual_norm: f64,
    iterations: usize,
    energy_gap: f64,
    table: Option<TableProvenance>,
    wall_ms: u64,
}

fn manifest_path(out: &Path) -> PathBuf {
    out.with_extension("manifest.json")
}

fn write_manifest(out: &Path, m: &SolveManifest<'_>) -> Result<()> {
    let p = manifest_path(out);
    std::fs::write(&p, serde_json::to_string_pretty(m)? + "\n").map_err(|e| Error::io(&p, e))
}

fn report_solution(what: &str, s: &FieldSolution, out: &Path) {
    println!("{what}: {} Newton steps, residual {:.3e}, energy gap {:.3e}", s.iterations, s.residual_norm, s.energy_gap());
    println!("max |u| = {:.10}", s.u.max_abs());
    println!("wrote {} and {}", out.display(), manifest_path(out).display());
}

fn nf_of(family: Family, p: f64, t_max: f64) -> Result<NFunction> {
    match family {
        Family::Power => NFunction::power(p),
        Family::ScaledPower => NFunction::scaled_power(p),
        Family::PowerLog => NFunction::power_log(p),
        Family::Exp => NFunction::exp_minus_linear(t_max),
    }
}

fn run(cmd: Cmd) -> std::result::Result<(), Failure> {
    match cmd {
        Cmd::NfCheck { family, p, t_max } => {
            let nf = nf_of(family, p, t_max)?;
            println!("{}", nf.describe());
            let grid = match family {
                Family::Exp => logspace(1e-3, 0.45 * t_max, 512),
                _ => default_index_grid(),
            };
            let ix = simonenko_indices(&nf, &grid)?;
            println!("indices: lower {:.12} upper {:.12}", ix.lower, ix.upper);
            let d2_grid: Vec<f64> = grid.iter().cloned().filter(|t| *t >= 1.0).collect();
            let d2 = check_delta2(&nf, 1.0, &d2_grid)?;
            println!("delta2: {} alpha {:.12}", if d2.passes { "holds" } else { "fails" }, d2.alpha);
            let pair = nf.conjugate();
            println!("conjugate: {:?}", pair.construction);
            for t in [0.5, 1.0, 2.0] {
                let d = nf.density(t)?;
                let young = nf.value(t)? + pair.dual.value(d)? - t * d;
                println!("  t = {t}: Phi = {:.12e}, Phi~(phi(t)) = {:.12e}, Young gap = {young:.3e}", nf.value(t)?, pair.dual.value(d)?);
            }
        }
        Cmd::VerifyFlux { config, samples, seed, strict } => {
            let c = problem(&config)?;
            let a = c.build_flux(base_dir(&config))?;
            let rep = verify_hypotheses(&a, &Sampler { n_points: samples, seed, ..Sampler::default() })?;
            for e in &rep.entries {
                println!("{:<4} {} margin {:+.3e}", e.name, if e.passed { "pass" } else { "FAIL" }, e.worst_margin);
            }
            let k = &rep.constants;
            println!("constants: c1 {:.4e} c2 {:.4e} c3 {:.4e} c4 {:.4e} c5 {:.4e}", k.c1, k.c2, k.c3, k.c4, k.c5);
            if strict && !rep.all_passed() {
                return Err(Failure::Strict(rep.failed().join(", ")));
            }
        }
        Cmd::SolveCell { level, config, xi, y, r, out } => {
            let c = problem(&config)?;
            let a = c.build_flux(base_dir(&config))?;
            let (gy, gz) = c.cell_grids()?;
            let xi = point(&xi, c.dim, "xi")?;
            let sol = match level {
                Level::Inner => {
                    let y = point(y.as_deref().unwrap_or(&[0.0; 2][..c.dim]), c.dim, "y")?;
                    solve_inner_cell(&a, y, r, xi, &gz, &c.solver)?
                }
                Level::Outer => solve_outer_cell(&a, r, xi, &gy, &gz, &c.solver)?,
            };
            println!("averaged flux: {}", fmt_point(&sol.averaged_flux, c.dim));
            println!("{} Newton steps, residual {:.3e}", sol.iterations, sol.residual_norm);
            if let Some(out) = out {
                sol.corrector.write_csv(&out)?;
                println!("wrote {}", out.display());
            }
        }
        Cmd::Tabulate { config, out } => {
            let c = problem(&config)?;
            let a = c.build_flux(base_dir(&config))?;
            let t = c.tabulate(&a)?;
            t.write(&out)?;
            let worst = t.residuals.iter().cloned().fold(0.0, f64::max);
            println!("{} nodes, worst cell residual {worst:.3e}", t.len());
            println!("wrote {}", out.display());
        }
        Cmd::Macro { config, out } => {
            let clock = Instant::now();
            let c = problem(&config)?;
            let a = c.build_flux(base_dir(&config))?;
            let f = c.source()?;
            let omega = c.omega_grid()?;
            let (s, prov) = match c.q_source {
                QSource::Table => {
                    let t = c.tabulate(&a)?;
                    (solve_macro(&t, &f, &omega, &c.solver, None)?, Some(t.provenance))
                }
                QSource::Direct => {
                    let (gy, gz) = c.cell_grids()?;
                    let q = DirectFlux { a: &a, grid_y: &gy, grid_z: &gz, opts: &c.solver };
                    (solve_macro(&q as &dyn EffectiveFlux, &f, &omega, &c.solver, None)?, None)
                }
            };
            s.u.write_csv(&out)?;
            write_manifest(&out, &manifest(&c, "macro", None, &s, prov, clock))?;
            report_solution("homogenized solve", &s, &out);
        }
        Cmd::Fine { config, eps, out } => {
            let clock = Instant::now();
            let c = problem(&config)?;
            let eps = eps.or(c.eps).ok_or_else(|| Error::Usage("fine needs eps (config or --eps)".into()))?;
            let a = c.build_flux(base_dir(&config))?;
            let f = c.source()?;
            let g = c.fine_grid(eps)?;
            let s = solve_fine(&a, eps, &f, &g, &c.solver, None)?;
            s.u.write_csv(&out)?;
            write_manifest(&out, &manifest(&c, "fine", Some(eps), &s, None, clock))?;
            report_solution(&format!("fine solve at eps = {eps}"), &s, &out);
        }
        Cmd::Study { config, csv, json } => {
            let mut c: StudyConfig = load_json(&config)?;
            if csv.is_some() {
                c.output.csv = csv;
            }
            if json.is_some() {
                c.output.json = json;
            }
            let rep = convergence_study(&c, base_dir(&config))?;
            println!("{:>10} {:>12} {:>12} {:>12}  status", "eps", "err_lux", "err_l2", "err_corr");
            for r in &rep.rows {
                let status = r.failed.as_deref().unwrap_or("ok");
                println!("{:>10.6} {:>12.4e} {:>12.4e} {:>12.4e}  {status}", r.eps, r.err_lux, r.err_l2, r.err_corrector);
            }
            write_outputs(&rep)?;
        }
    }
    Ok(())
}

fn manifest<'a>(
    c: &'a ProblemConfig,
    command: &'static str,
    eps: Option<f64>,
    s: &FieldSolution,
    table: Option<TableProvenance>,
    clock: Instant,
) -> SolveManifest<'a> {
    SolveManifest {
        version: env!("CARGO_PKG_VERSION"),
        command,
        config: c,
        eps,
        n: s.u.grid.n(),
        residual_norm: s.residual_norm,
        iterations: s.iterations,
        energy_gap: s.energy_gap(),
        table,
        wall_ms: clock.elapsed().as_millis() as u64,
    }
}
