//! Oscillating problem at several scales compared with the homogenized
//! solution x(1−x)/6.

use homog::flux::{make_linear_separable, ScalarMap};
use homog::grid::TensorGrid;
use homog::solver::{resolving_cells, solve_fine, SolveOptions};

fn main() -> homog::Result<()> {
    let a = make_linear_separable(1, ScalarMap::parse_y("2+sin(2*pi*y1)")?, ScalarMap::parse_z("2+sin(2*pi*z1)")?)?;
    for eps in [0.5, 0.25, 0.125] {
        let g = TensorGrid::unit_dirichlet(1, resolving_cells(eps, 1.0))?;
        let s = solve_fine(&a, eps, &|_| 1.0, &g, &SolveOptions::default(), None)?;
        let err = (0..=g.n()).map(|i| i as f64 / g.n() as f64).map(|x| (s.u.value_at(&[x, 0.0]) - x * (1.0 - x) / 6.0).abs()).fold(0.0, f64::max);
        println!("eps = {eps:<6} n = {:>4}  max |u_eps - u0| = {err:.3e}", g.n());
    }
    Ok(())
}
