//! Two-level cell problems: the reiterated harmonic mean for a linear flux
//! and the closed form for a weighted p-Laplacian.

use homog::cell::{solve_inner_cell, solve_outer_cell};
use homog::flux::{make_linear_separable, make_phi_laplacian, ScalarMap};
use homog::grid::TensorGrid;
use homog::nfunction::NFunction;
use homog::solver::SolveOptions;

fn main() -> homog::Result<()> {
    let opts = SolveOptions::default();
    let g = TensorGrid::cell(1, 256)?;
    let a = make_linear_separable(1, ScalarMap::parse_y("2+sin(2*pi*y1)")?, ScalarMap::parse_z("2+sin(2*pi*z1)")?)?;
    let q = solve_outer_cell(&a, 0.0, [1.0, 0.0], &g, &g, &opts)?;
    println!("linear:      q(1) = {:.6}   (harmonic mean of √3(2 + sin) = 3)", q.averaged_flux[0]);

    // (⨍ c^{-1/(p-1)})^{-(p-1)} with c ∈ {1, 4}, p = 3
    let p = make_phi_laplacian(1, NFunction::scaled_power(3.0)?, ScalarMap::constant(1.0), ScalarMap::parse_z("piecewise:[1,4]")?)?;
    let h = solve_inner_cell(&p, [0.0; 2], 0.0, [1.0, 0.0], &g, &opts)?;
    println!("p-Laplacian: h(1) = {:.6}   (closed form 16/9 = {:.6})", h.averaged_flux[0], 16.0 / 9.0);
    let h2 = solve_inner_cell(&p, [0.0; 2], 0.0, [2.0, 0.0], &g, &opts)?;
    println!("p-Laplacian: h(2)/h(1) = {:.6} (homogeneous of degree 2)", h2.averaged_flux[0] / h.averaged_flux[0]);
    Ok(())
}
