use serde::{Deserialize, Serialize};

use super::NFunction;
use crate::error::{Error, Result};
use crate::numeric::logspace;

/// Default abscissa for index checks: 4096 log-spaced points on `[1e-6, 1e6]`.
pub fn default_index_grid() -> Vec<f64> {
    logspace(1e-6, 1e6, 4096)
}

/// Simonenko-type bounds `inf`/`sup` of `tφ(t)/Φ(t)` over a grid.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GrowthIndices {
    pub lower: f64,
    pub upper: f64,
    pub grid: Vec<f64>,
}

impl GrowthIndices {
    /// Admissible growth requires the lower index to exceed one.
    pub fn is_admissible(&self) -> bool {
        self.lower > 1.0
    }
}

pub fn simonenko_indices(nf: &NFunction, t_grid: &[f64]) -> Result<GrowthIndices> {
    if t_grid.is_empty() {
        return Err(Error::Usage("index grid is empty".into()));
    }
    if t_grid.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Usage("index grid entries must be > 0".into()));
    }
    let (mut lower, mut upper) = (f64::INFINITY, f64::NEG_INFINITY);
    for &t in t_grid {
        let r = t * nf.density(t)? / nf.value(t)?;
        lower = lower.min(r);
        upper = upper.max(r);
    }
    Ok(GrowthIndices { lower, upper, grid: t_grid.to_vec() })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct Delta2Report {
    pub passes: bool,
    /// `sup Φ(2t)/Φ(t)` over the grid.
    pub alpha: f64,
    /// Same supremum with the last decade of the grid removed.
    pub alpha_previous_decade: f64,
}

/// Numerical Δ₂-near-infinity check.
///
/// `alpha` is the supremum of `Φ(2t)/Φ(t)` over the grid points `t ≥ t0`.
/// The function is declared not-Δ₂ when that supremum grows by more than 10%
/// over the last decade of the grid, which separates polynomial from
/// exponential growth.
pub fn check_delta2(nf: &NFunction, t0: f64, t_grid: &[f64]) -> Result<Delta2Report> {
    if !(t0 > 0.0) {
        return Err(Error::Usage("Δ₂ check needs t0 > 0".into()));
    }
    if t_grid.is_empty() || t_grid.iter().any(|t| *t < t0) {
        return Err(Error::Usage("Δ₂ grid must be nonempty with entries >= t0".into()));
    }
    let mut grid = t_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let t_end = *grid.last().unwrap();
    let mut cut = t_end / 10.0;
    if grid[0] > cut {
        cut = grid[grid.len() / 2];
    }
    let (mut alpha, mut prev) = (0.0f64, 0.0f64);
    for &t in &grid {
        let ratio = nf.value(2.0 * t)? / nf.value(t)?;
        alpha = alpha.max(ratio);
        if t <= cut {
            prev = prev.max(ratio);
        }
    }
    let passes = alpha.is_finite() && alpha <= 1.1 * prev;
    Ok(Delta2Report { passes, alpha, alpha_previous_decade: prev })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DominationReport {
    pub dominates: bool,
    /// Smallest `k` on the k-grid with `C(t) ≤ B(kt)` for all grid `t`.
    pub k: Option<f64>,
}

/// Checks `C ≺ B`: some `k` with `C(t) ≤ B(kt)` on the whole `t_grid`.
pub fn check_domination(
    c: &NFunction,
    b: &NFunction,
    k_grid: &[f64],
    t_grid: &[f64],
) -> Result<DominationReport> {
    if k_grid.is_empty() || t_grid.is_empty() {
        return Err(Error::Usage("domination check needs nonempty grids".into()));
    }
    let mut ks = k_grid.to_vec();
    ks.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let cv: Vec<f64> = t_grid.iter().map(|&t| c.value(t)).collect::<Result<_>>()?;
    'k: for &k in &ks {
        for (&t, &ct) in t_grid.iter().zip(&cv) {
            if ct > b.value(k * t)? * (1.0 + 1e-12) {
                continue 'k;
            }
        }
        return Ok(DominationReport { dominates: true, k: Some(k) });
    }
    Ok(DominationReport { dominates: false, k: None })
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DeltaPrimeReport {
    pub passes: bool,
    /// `sup B(ts) / (B(t)B(s))` over grid pairs.
    pub c: f64,
}

/// Δ′ check `B(ts) ≤ C·B(t)B(s)`: the supremum over all grid pairs is
/// compared against the supremum with one decade trimmed from both ends.
pub fn check_delta_prime(nf: &NFunction, t_grid: &[f64]) -> Result<DeltaPrimeReport> {
    if t_grid.len() < 2 || t_grid.iter().any(|t| !(*t > 0.0)) {
        return Err(Error::Usage("Δ′ grid needs >= 2 positive entries".into()));
    }
    let mut grid = t_grid.to_vec();
    grid.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let (lo, hi) = (grid[0] * 10.0, grid[grid.len() - 1] / 10.0);
    let vals: Vec<f64> = grid.iter().map(|&t| nf.value(t)).collect::<Result<_>>()?;
    let (mut c, mut inner) = (0.0f64, 0.0f64);
    for (i, &t) in grid.iter().enumerate() {
        for (j, &s) in grid.iter().enumerate().skip(i) {
            let r = nf.value(t * s)? / (vals[i] * vals[j]);
            c = c.max(r);
            if t >= lo && s <= hi {
                inner = inner.max(r);
            }
        }
    }
    Ok(DeltaPrimeReport { passes: c.is_finite() && c <= 1.1 * inner, c })
}
