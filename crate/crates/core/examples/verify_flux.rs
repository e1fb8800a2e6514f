//! Samples the structural hypotheses of each built-in flux family and of an
//! anti-monotone flux that must be rejected.

use homog::flux::{
    make_degenerate, make_linear_separable, make_phi_laplacian, verify_hypotheses, DegenerateWeight, FluxCoefficient,
    Sampler, ScalarMap,
};
use homog::nfunction::NFunction;

fn show(a: &FluxCoefficient) -> homog::Result<()> {
    let rep = verify_hypotheses(a, &Sampler::default())?;
    let line: Vec<String> =
        rep.entries.iter().map(|e| format!("{} {}", e.name, if e.passed { "ok" } else { "FAIL" })).collect();
    println!("{:<18} {}", a.name, line.join("  "));
    Ok(())
}

fn main() -> homog::Result<()> {
    let cy = || ScalarMap::parse_y("2+sin(2*pi*y1)");
    let cz = || ScalarMap::parse_z("2+cos(2*pi*z2)");
    let nf = NFunction::scaled_power(3.0)?;
    show(&make_linear_separable(2, cy()?, cz()?)?)?;
    show(&make_phi_laplacian(2, nf.clone(), cy()?, cz()?)?)?;
    show(&make_degenerate(2, nf.clone(), cy()?, cz()?, DegenerateWeight::parse("(t+2)/(2*t+3)", 0.5)?)?)?;

    let minus = FluxCoefficient::custom(2, "minus_identity", |_, _, _, l| [-l[0], -l[1]]).with_nf_pair(nf.clone(), nf);
    let rep = verify_hypotheses(&minus, &Sampler::default())?;
    let h4 = rep.entry("H4").expect("H4 is always checked");
    println!("{:<18} H4 passed: {}, worst margin {:.3e}, witness {:?}", minus.name, h4.passed, h4.worst_margin, h4.witness);
    Ok(())
}
