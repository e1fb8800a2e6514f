//! Homogenized problem with a tabulated effective flux; for the reiterated
//! linear coefficient the solution is x(1−x)/6.

use homog::cell::tabulate_q;
use homog::flux::{make_linear_separable, ScalarMap};
use homog::grid::TensorGrid;
use homog::numeric::linspace;
use homog::solver::{solve_macro, SolveOptions};

fn main() -> homog::Result<()> {
    let a = make_linear_separable(1, ScalarMap::parse_y("2+sin(2*pi*y1)")?, ScalarMap::parse_z("2+sin(2*pi*z1)")?)?;
    let opts = SolveOptions::default();
    let cell = TensorGrid::cell(1, 128)?;
    let table = tabulate_q(&a, &linspace(-1.0, 1.0, 2), (-1.0, 1.0), 5, &cell, &cell, &opts)?;
    let omega = TensorGrid::unit_dirichlet(1, 64)?;
    let s = solve_macro(&table, &|_| 1.0, &omega, &opts, None)?;
    let err = (0..=64).map(|i| i as f64 / 64.0).map(|x| (s.u.value_at(&[x, 0.0]) - x * (1.0 - x) / 6.0).abs()).fold(0.0, f64::max);
    println!("{} Newton steps, max nodal error against x(1-x)/6: {err:.2e}", s.iterations);
    println!("energy identity gap {:.2e}", s.energy_gap());
    Ok(())
}
