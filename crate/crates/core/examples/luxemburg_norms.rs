//! Luxemburg and Orlicz–Sobolev norms of fields on the unit square.

use homog::grid::{luxemburg_norm, orlicz_sobolev_norm, ScalarField, TensorGrid};
use homog::nfunction::NFunction;

fn main() -> homog::Result<()> {
    let g = TensorGrid::cell(2, 32)?;
    let three = ScalarField::from_fn(&g, |_| 3.0);
    println!("‖3‖ with t²      = {:.10}", luxemburg_norm(&three, &NFunction::power(2.0)?)?);
    let one = ScalarField::from_fn(&g, |_| 1.0);
    println!("‖1‖ with t²/2    = {:.10}", luxemburg_norm(&one, &NFunction::scaled_power(2.0)?)?);

    let d = TensorGrid::unit_dirichlet(1, 128)?;
    let u = ScalarField::from_fn(&d, |x| x[0] * (1.0 - x[0]));
    let exact = (1.0f64 / 30.0).sqrt() + (1.0f64 / 3.0).sqrt();
    println!("W¹L² norm of x(1-x) = {:.6} (exact {exact:.6})", orlicz_sobolev_norm(&u, &NFunction::power(2.0)?)?);
    for nf in [NFunction::power(1.5)?, NFunction::power_log(2.0)?, NFunction::exp_minus_linear(50.0)?] {
        println!("{:<20} ‖x(1-x)‖ = {:.6}", nf.describe(), luxemburg_norm(&u, &nf)?);
    }
    Ok(())
}
