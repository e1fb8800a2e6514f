//! Growth indices, Δ₂ behaviour and complementary functions of the built-in
//! N-functions.

use homog::nfunction::{check_delta2, default_index_grid, simonenko_indices, NFunction};
use homog::numeric::logspace;

fn main() -> homog::Result<()> {
    let grid = default_index_grid();
    let d2_grid: Vec<f64> = grid.iter().cloned().filter(|t| *t >= 1.0).collect();
    for nf in [NFunction::power(1.5)?, NFunction::scaled_power(3.0)?, NFunction::power_log(2.0)?] {
        let ix = simonenko_indices(&nf, &grid)?;
        let d2 = check_delta2(&nf, 1.0, &d2_grid)?;
        println!("{:<22} indices [{:.4}, {:.4}]  Δ₂ alpha {:.4}", nf.describe(), ix.lower, ix.upper, d2.alpha);
    }

    // exp(t) - t - 1 grows too fast for Δ₂
    let e = NFunction::exp_minus_linear(60.0)?;
    let d2 = check_delta2(&e, 1.0, &logspace(1.0, 25.0, 200))?;
    println!("{:<22} Δ₂ holds: {} (alpha {:.3e})", e.describe(), d2.passes, d2.alpha);

    // numerical Legendre transform of t²/2 is s²/2
    let half = NFunction::scaled_power(2.0)?;
    let num = half.legendre();
    for s in [0.5, 2.0, 7.0] {
        println!("Φ̃({s}) = {:.12} (exact {:.12})", num.value(s)?, s * s / 2.0);
    }
    let pair = e.conjugate();
    let t = logspace(1e-2, 10.0, 40);
    println!("exp family: Young gap min {:.3e}, sandwich violation {:.3e}", pair.young_gap(&t, &t)?, pair.sandwich_violation(&t)?);
    Ok(())
}
