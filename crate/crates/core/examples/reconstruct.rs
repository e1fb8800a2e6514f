//! First-order corrector reconstruction: u₀ + ε u₁ + ε² u₂ is closer to
//! u_ε in W¹L² than u₀ alone.

use homog::flux::{make_linear_separable, ScalarMap};
use homog::grid::{orlicz_sobolev_norm, ScalarField, TensorGrid};
use homog::nfunction::NFunction;
use homog::solver::{reconstruct, resolving_cells, solve_fine, solve_macro, LinearFlux, SolveOptions};

fn main() -> homog::Result<()> {
    let a = make_linear_separable(1, ScalarMap::parse_y("2+sin(2*pi*y1)")?, ScalarMap::parse_z("2+sin(2*pi*z1)")?)?;
    let opts = SolveOptions::default();
    let nf = NFunction::power(2.0)?;
    let eps = 0.125;
    let omega = TensorGrid::unit_dirichlet(1, 64)?;
    let u0 = solve_macro(&LinearFlux { dim: 1, kappa: 3.0 }, &|_| 1.0, &omega, &opts, None)?.u;
    let fine = TensorGrid::unit_dirichlet(1, resolving_cells(eps, 1.0))?;
    let ue = solve_fine(&a, eps, &|_| 1.0, &fine, &opts, None)?.u;
    let cell = TensorGrid::cell(1, 64)?;
    let rec = reconstruct(&u0, &a, eps, &cell, &cell, &opts, &fine)?;
    let u0f = ScalarField::from_fn(&fine, |x| u0.value_at(x));
    println!("‖u_eps - u0‖          = {:.4e}", orlicz_sobolev_norm(&ue.sub(&u0f)?, &nf)?);
    println!("‖u_eps - reconstruct‖ = {:.4e}", orlicz_sobolev_norm(&ue.sub(&rec)?, &nf)?);
    Ok(())
}
