//! Inner cell problem in 1D: the effective coefficient of `2 + sin(2πz)` is
//! its harmonic mean √3.

use homog::cell::solve_inner_cell;
use homog::flux::{make_linear_separable, ScalarMap};
use homog::grid::TensorGrid;
use homog::solver::SolveOptions;

fn main() -> homog::Result<()> {
    let a = make_linear_separable(1, ScalarMap::constant(1.0), ScalarMap::parse_z("2+sin(2*pi*z1)")?)?;
    let opts = SolveOptions::default();
    for n in [16, 64, 256] {
        let gz = TensorGrid::cell(1, n)?;
        let s = solve_inner_cell(&a, [0.0; 2], 0.0, [1.0, 0.0], &gz, &opts)?;
        println!("n = {n:>3}: h = {:.9}  error {:.2e}", s.averaged_flux[0], (s.averaged_flux[0] - 3f64.sqrt()).abs());
    }
    Ok(())
}
