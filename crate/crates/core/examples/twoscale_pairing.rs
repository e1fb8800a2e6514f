//! Reiterated two-scale pairings of an oscillating function against test
//! functions, compared with the triple-integral limit.

use homog::grid::{Boundary, Domain, TensorGrid};
use homog::harness::{pairing_grid, triple_integral, twoscale_pairing_on, PairingKind, TestFunction};

fn main() -> homog::Result<()> {
    use std::f64::consts::PI;
    // g(x, y, z) = x(1-x)(1 + cos 2πy)(2 + sin 2πz), traced at y = x/ε, z = x/ε²
    let g = |x: f64, y: f64, z: f64| x * (1.0 - x) * (1.0 + (2.0 * PI * y).cos()) * (2.0 + (2.0 * PI * z).sin());
    let tests = [
        TestFunction::new("1", "1", "1", PairingKind::Value)?,
        TestFunction::new("x1", "cos(2*pi*y1)", "1", PairingKind::Value)?,
        TestFunction::new("1", "1", "sin(2*pi*z1)", PairingKind::Value)?,
    ];
    let omega = TensorGrid::new(1, 64, Domain::unit_square(), Boundary::DirichletZero)?;
    let cell = TensorGrid::cell(1, 64)?;
    for t in &tests {
        let limit = triple_integral(&|x, y, z| g(x[0], y[0], z[0]) * t.eval(x, y, z), &omega, &cell, &cell);
        print!("{:<32} limit {limit:+.6}  gaps:", t.label());
        for eps in [0.5, 0.25, 0.125] {
            let quad = pairing_grid(1, eps, 64)?;
            let ue = |x: &homog::grid::Point| g(x[0], x[0] / eps, x[0] / (eps * eps));
            print!(" {:.2e}", (twoscale_pairing_on(&ue, t, eps, &quad)? - limit).abs());
        }
        println!();
    }
    Ok(())
}
