//! Tabulates the effective flux over a parameter box, writes it to disk and
//! interpolates it between nodes.

use homog::cell::{interp_q, tabulate_q, EffectiveFluxTable};
use homog::flux::{make_phi_laplacian, ScalarMap};
use homog::grid::TensorGrid;
use homog::nfunction::NFunction;
use homog::numeric::linspace;
use homog::solver::SolveOptions;

fn main() -> homog::Result<()> {
    let a = make_phi_laplacian(
        1,
        NFunction::scaled_power(3.0)?,
        ScalarMap::parse_y("2+sin(2*pi*y1)")?,
        ScalarMap::parse_z("piecewise:[1,4]")?,
    )?;
    let g = TensorGrid::cell(1, 64)?;
    let t = tabulate_q(&a, &linspace(-1.0, 1.0, 2), (-2.0, 2.0), 9, &g, &g, &SolveOptions::default())?;
    println!("{} nodes, worst residual {:.2e}", t.len(), t.residuals.iter().cloned().fold(0.0, f64::max));
    let path = std::env::temp_dir().join("homog_q_table.csv");
    t.write(&path)?;
    let back = EffectiveFluxTable::read(&path)?;
    for xi in [-1.75, 0.3, 1.2] {
        println!("q(0, {xi:>5}) ≈ {:.6}", interp_q(&back, 0.0, &[xi, 0.0])?[0]);
    }
    println!("outside the box: {}", interp_q(&back, 0.0, &[3.0, 0.0]).unwrap_err());
    Ok(())
}
