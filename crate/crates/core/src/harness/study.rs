//! Convergence studies: fine solves over a list of scales compared with the
//! homogenized solution and its corrector reconstruction.

use std::collections::BTreeMap;
use std::path::Path;
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cell::TableProvenance;
use crate::error::{Error, Result};
use crate::flux::FluxCoefficient;
use crate::grid::{integrate_fn, luxemburg_norm, orlicz_sobolev_norm, Point, ScalarField, TensorGrid};
use crate::nfunction::NFunction;
use crate::numeric::pairwise_sum;
use crate::solver::{reconstruct_on, solve_fine, solve_macro, DirectFlux, EffectiveFlux, FieldSolution, HomogTriple};

use super::config::{NormKind, QSource, StudyConfig};
use super::pairing::{twoscale_pairing, twoscale_pairing_gradient, PairingKind, TestFunction, TestFunctionSpec};

/// Serde helpers writing non-finite numbers as `null` and reading `null`
/// back as NaN.
pub(crate) mod nan_null {
    use serde::{Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_finite() {
            s.serialize_f64(*v)
        } else {
            s.serialize_none()
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        Ok(Option::<f64>::deserialize(d)?.unwrap_or(f64::NAN))
    }

    pub mod vec {
        use serde::{Deserialize, Deserializer, Serialize, Serializer};

        pub fn serialize<S: Serializer>(v: &[f64], s: S) -> Result<S::Ok, S::Error> {
            let o: Vec<Option<f64>> = v.iter().map(|x| x.is_finite().then_some(*x)).collect();
            o.serialize(s)
        }

        pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
            Ok(Vec::<Option<f64>>::deserialize(d)?.into_iter().map(|x| x.unwrap_or(f64::NAN)).collect())
        }
    }
}

/// One scale of a study. Unconfigured norms and failed rows hold NaN.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyRow {
    pub eps: f64,
    /// `‖u_ε − u₀‖` in `L^Φ(Ω)`.
    #[serde(with = "nan_null")]
    pub err_lux: f64,
    #[serde(with = "nan_null")]
    pub err_l2: f64,
    /// `‖u_ε − reconstruction‖` in `W¹L^Φ(Ω)`.
    #[serde(with = "nan_null")]
    pub err_corrector: f64,
    #[serde(with = "nan_null::vec")]
    pub pairing_gap: Vec<f64>,
    /// `∫ a(x/ε, x/ε², u_ε, Du_ε)·Du_ε`.
    #[serde(with = "nan_null")]
    pub energy: f64,
    pub iterations: usize,
    pub wall_ms: u64,
    /// `|∫ a·Du_ε − ∫ f u_ε|`.
    #[serde(with = "nan_null")]
    pub energy_gap: f64,
    #[serde(with = "nan_null")]
    pub residual_norm: f64,
    /// `‖u_ε‖` in `W¹L^Φ(Ω)`.
    #[serde(with = "nan_null")]
    pub solution_norm: f64,
    pub failed: Option<String>,
}

impl StudyRow {
    fn failed(eps: f64, k: usize, msg: String, wall_ms: u64) -> Self {
        StudyRow {
            eps,
            err_lux: f64::NAN,
            err_l2: f64::NAN,
            err_corrector: f64::NAN,
            pairing_gap: vec![f64::NAN; k],
            energy: f64::NAN,
            iterations: 0,
            wall_ms,
            energy_gap: f64::NAN,
            residual_norm: f64::NAN,
            solution_norm: f64::NAN,
            failed: Some(msg),
        }
    }

    pub fn is_ok(&self) -> bool {
        self.failed.is_none()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudySummary {
    /// `log(err_i/err_{i+1}) / log(ε_i/ε_{i+1})` per error column between
    /// consecutive rows (`log₂` of the error ratio when ε halves).
    pub rates: BTreeMap<String, Vec<Option<f64>>>,
    #[serde(with = "nan_null")]
    pub macro_residual: f64,
    pub macro_iterations: usize,
    #[serde(with = "nan_null")]
    pub macro_energy_gap: f64,
    /// Limit-side pairing values, one per test function.
    #[serde(with = "nan_null::vec")]
    pub pairing_limits: Vec<f64>,
    /// Residuals of the homogenized, outer-cell and inner-cell systems, when
    /// correctors were computed.
    pub three_system_residuals: Option<[f64; 3]>,
    /// `max/min` of `solution_norm` over successful rows.
    #[serde(with = "nan_null")]
    pub solution_norm_ratio: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub config: StudyConfig,
    pub table: Option<TableProvenance>,
    pub wall_ms: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyReport {
    pub manifest: RunManifest,
    pub rows: Vec<StudyRow>,
    pub summary: StudySummary,
}

/// The fixed test-function dictionary used when a study lists none.
pub fn default_dictionary() -> Vec<TestFunctionSpec> {
    vec![
        TestFunctionSpec::new("1", "1", "1"),
        TestFunctionSpec::new("x1", "cos(2*pi*y1)", "1"),
        TestFunctionSpec::new("sin(pi*x1)", "1", "cos(2*pi*z1)"),
        TestFunctionSpec::new("1", "sin(2*pi*y1)", "sin(2*pi*z1)").gradient(),
    ]
}

fn timer(on: bool) -> impl Fn() -> u64 {
    let t = Instant::now();
    move || if on { t.elapsed().as_millis() as u64 } else { 0 }
}

/// Cap from `HOMOG_THREADS`, if set to a positive integer.
pub fn thread_cap() -> Option<usize> {
    std::env::var("HOMOG_THREADS").ok()?.trim().parse().ok().filter(|n| *n > 0)
}

/// Runs `f` on a pool capped by `HOMOG_THREADS`, or on the global pool.
pub fn with_thread_cap<T: Send>(f: impl FnOnce() -> T + Send) -> Result<T> {
    match thread_cap() {
        Some(n) => {
            let pool = rayon::ThreadPoolBuilder::new()
                .num_threads(n)
                .build()
                .map_err(|e| Error::Usage(format!("thread pool: {e}")))?;
            Ok(pool.install(f))
        }
        None => Ok(f()),
    }
}

/// Limit side of a pairing: `∭ u₀ f` for value pairings,
/// `∭ (∂₁u₀ + ∂_{y₁}u₁ + ∂_{z₁}u₂) f` for gradient pairings. Both exploit
/// the separable form of `f` and the nodal interpolation of the correctors.
fn pairing_limit(t: &TestFunction, triple: &HomogTriple<'_>) -> Result<f64> {
    let u0 = &triple.u0;
    let (gy, gz) = (triple.grid_y(), triple.grid_z());
    let mean = |g: &TensorGrid, f: &dyn Fn(&Point) -> f64| integrate_fn(g, f);
    let my = mean(gy, &|y| t.eval_y(y));
    let mz = mean(gz, &|z| t.eval_z(z));
    let omega = &u0.grid;
    match t.kind {
        PairingKind::Value => Ok(integrate_fn(omega, |x| u0.value_at(x) * t.eval_x(x)) * my * mz),
        PairingKind::Gradient => {
            let c = triple.correctors()?;
            let base = integrate_fn(omega, |x| u0.gradient_at(x)[0] * t.eval_x(x)) * my * mz;
            // per node: ∫_Y g ∂_{y₁}π₁ · ∫_Z w  +  ∫_Y g Σ_k N_k ∫_Z w ∂_{z₁}π₂ₖ
            let per_node: Vec<f64> = c
                .iter()
                .map(|n| {
                    let k1 = mean(gy, &|y| t.eval_y(y) * n.outer.corrector.gradient_at(y)[0]) * mz;
                    let iz: Vec<f64> =
                        n.inner.iter().map(|s| mean(gz, &|z| t.eval_z(z) * s.corrector.gradient_at(z)[0])).collect();
                    let k2 = mean(gy, &|y| {
                        t.eval_y(y)
                            * gy.basis_at(y).iter().map(|(d, s, _)| s * iz[d.expect("periodic")]).sum::<f64>()
                    });
                    k1 + k2
                })
                .collect();
            let m = omega.n() + 1;
            let h = omega.spacing();
            let locate = |t: f64, k: usize| {
                let rel = (t / h[k]).clamp(0.0, omega.n() as f64);
                let c = (rel.floor() as usize).min(omega.n() - 1);
                (c, rel - c as f64)
            };
            // Ω = (0, 1)^d, so node (i, j) sits at (i h, j h)
            let interp = |x: &Point| -> f64 {
                let (ci, sx) = locate(x[0], 0);
                if omega.dim() == 1 {
                    return (1.0 - sx) * per_node[ci] + sx * per_node[ci + 1];
                }
                let (cj, sy) = locate(x[1], 1);
                let at = |i: usize, j: usize| per_node[i + m * j];
                (1.0 - sx) * (1.0 - sy) * at(ci, cj)
                    + sx * (1.0 - sy) * at(ci + 1, cj)
                    + (1.0 - sx) * sy * at(ci, cj + 1)
                    + sx * sy * at(ci + 1, cj + 1)
            };
            Ok(base + integrate_fn(omega, |x| t.eval_x(x) * interp(x)))
        }
    }
}

fn l2_norm(d: &ScalarField) -> f64 {
    let t: Vec<f64> = d.grid.quadrature().iter().map(|q| q.weight * d.value_at_qp(q).powi(2)).collect();
    pairwise_sum(&t).sqrt()
}

struct RowContext<'a> {
    cfg: &'a StudyConfig,
    a: &'a FluxCoefficient,
    nf: &'a NFunction,
    f: &'a (dyn Fn(&Point) -> f64 + Sync),
    u0: &'a ScalarField,
    triple: &'a HomogTriple<'a>,
    tests: &'a [TestFunction],
    limits: &'a [f64],
}

fn solve_row(ctx: &RowContext<'_>, eps: f64) -> Result<StudyRow> {
    let cfg = ctx.cfg;
    let clock = timer(cfg.record_timing);
    let grid = cfg.problem.fine_grid(eps)?;
    let sol: FieldSolution = solve_fine(ctx.a, eps, ctx.f, &grid, &cfg.problem.solver, None)?;
    let ue = &sol.u;
    let u0f = ScalarField::from_fn(&grid, |x| ctx.u0.value_at(x));
    let d = ue.sub(&u0f)?;
    let has = |k: NormKind| cfg.norms.contains(&k);
    let err_lux = if has(NormKind::Luxemburg) { luxemburg_norm(&d, ctx.nf)? } else { f64::NAN };
    let err_l2 = if has(NormKind::L2) { l2_norm(&d) } else { f64::NAN };
    let err_corrector = if has(NormKind::W1Luxemburg) {
        let rec = reconstruct_on(ctx.triple, eps, &grid)?;
        orlicz_sobolev_norm(&ue.sub(&rec)?, ctx.nf)?
    } else {
        f64::NAN
    };
    let mut pairing_gap = Vec::with_capacity(ctx.tests.len());
    for (t, lim) in ctx.tests.iter().zip(ctx.limits) {
        let v = match t.kind {
            PairingKind::Value => twoscale_pairing(ue, t, eps)?,
            PairingKind::Gradient => twoscale_pairing_gradient(ue, t, eps)?,
        };
        pairing_gap.push((v - lim).abs());
    }
    Ok(StudyRow {
        eps,
        err_lux,
        err_l2,
        err_corrector,
        pairing_gap,
        energy: sol.flux_work,
        iterations: sol.iterations,
        wall_ms: clock(),
        energy_gap: sol.energy_gap(),
        residual_norm: sol.residual_norm,
        solution_norm: orlicz_sobolev_norm(ue, ctx.nf)?,
        failed: None,
    })
}

fn rates(rows: &[StudyRow]) -> BTreeMap<String, Vec<Option<f64>>> {
    let mut cols: Vec<(String, Box<dyn Fn(&StudyRow) -> f64>)> = vec![
        ("err_lux".into(), Box::new(|r| r.err_lux)),
        ("err_l2".into(), Box::new(|r| r.err_l2)),
        ("err_corrector".into(), Box::new(|r| r.err_corrector)),
    ];
    let k = rows.first().map_or(0, |r| r.pairing_gap.len());
    for i in 0..k {
        cols.push((format!("pairing_gap_{}", i + 1), Box::new(move |r| r.pairing_gap[i])));
    }
    cols.into_iter()
        .map(|(name, get)| {
            let v = rows
                .windows(2)
                .map(|w| {
                    let r = (get(&w[0]) / get(&w[1])).ln() / (w[0].eps / w[1].eps).ln();
                    r.is_finite().then_some(r)
                })
                .collect();
            (name, v)
        })
        .collect()
}

/// Runs the study: one homogenized solve, then every scale of `eps_list`
/// concurrently. A failing scale yields a failed row; the others proceed.
pub fn convergence_study(cfg: &StudyConfig, base_dir: Option<&Path>) -> Result<StudyReport> {
    with_thread_cap(|| run_study(cfg, base_dir))?
}

fn run_study(cfg: &StudyConfig, base_dir: Option<&Path>) -> Result<StudyReport> {
    cfg.validate()?;
    let clock = timer(cfg.record_timing);
    let p = &cfg.problem;
    let a = p.build_flux(base_dir)?;
    let nf = p.norm_nf(&a, base_dir)?;
    let f = p.source()?;
    let omega = p.omega_grid()?;
    let (gy, gz) = p.cell_grids()?;
    let (table, macro_sol) = match p.q_source {
        QSource::Table => {
            let t = p.tabulate(&a)?;
            let s = solve_macro(&t, &f, &omega, &p.solver, None)?;
            (Some(t), s)
        }
        QSource::Direct => {
            let q = DirectFlux { a: &a, grid_y: &gy, grid_z: &gz, opts: &p.solver };
            (None, solve_macro(&q as &dyn EffectiveFlux, &f, &omega, &p.solver, None)?)
        }
    };
    let specs = if cfg.pairing.is_empty() { default_dictionary() } else { cfg.pairing.clone() };
    let tests: Vec<TestFunction> = specs.iter().map(|s| s.build()).collect::<Result<_>>()?;
    let triple = HomogTriple::new(macro_sol.u.clone(), &a, gy.clone(), gz.clone(), p.solver.clone())?;
    let needs_correctors =
        cfg.norms.contains(&NormKind::W1Luxemburg) || tests.iter().any(|t| t.kind == PairingKind::Gradient);
    if needs_correctors {
        triple.correctors()?;
    }
    let limits: Vec<f64> = tests.iter().map(|t| pairing_limit(t, &triple)).collect::<Result<_>>()?;
    let ctx = RowContext { cfg, a: &a, nf: &nf, f: &f, u0: &macro_sol.u, triple: &triple, tests: &tests, limits: &limits };
    let mut rows: Vec<StudyRow> = cfg
        .eps_list
        .par_iter()
        .map(|&eps| {
            let row_clock = timer(cfg.record_timing);
            solve_row(&ctx, eps).unwrap_or_else(|e| StudyRow::failed(eps, tests.len(), e.to_string(), row_clock()))
        })
        .collect();
    rows.sort_by(|x, y| y.eps.total_cmp(&x.eps));
    let norms: Vec<f64> = rows.iter().filter(|r| r.is_ok()).map(|r| r.solution_norm).collect();
    let ratio = if norms.is_empty() {
        f64::NAN
    } else {
        norms.iter().cloned().fold(f64::NEG_INFINITY, f64::max) / norms.iter().cloned().fold(f64::INFINITY, f64::min)
    };
    let summary = StudySummary {
        rates: rates(&rows),
        macro_residual: macro_sol.residual_norm,
        macro_iterations: macro_sol.iterations,
        macro_energy_gap: macro_sol.energy_gap(),
        pairing_limits: limits,
        three_system_residuals: if needs_correctors {
            Some(triple.three_system_residuals(macro_sol.residual_norm)?)
        } else {
            None
        },
        solution_norm_ratio: ratio,
    };
    Ok(StudyReport {
        manifest: RunManifest {
            version: env!("CARGO_PKG_VERSION").into(),
            config: cfg.clone(),
            table: table.map(|t| t.provenance),
            wall_ms: clock(),
        },
        rows,
        summary,
    })
}
