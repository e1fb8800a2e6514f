//! Convergence study from a JSON config: errors against the homogenized
//! solution, pairing gaps and empirical rates.
//!
//! Runs `configs/study_reiterated.json` by default, or the config given as
//! first argument.

use std::path::PathBuf;

use homog::harness::{convergence_study, load_json, rows_to_csv, StudyConfig};

fn main() -> homog::Result<()> {
    let path = std::env::args().nth(1).map(PathBuf::from).unwrap_or_else(|| {
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../configs/study_reiterated.json")
    });
    let mut cfg: StudyConfig = load_json(&path)?;
    cfg.output = Default::default();
    let rep = convergence_study(&cfg, path.parent())?;
    print!("{}", rows_to_csv(&rep.rows, rep.summary.pairing_limits.len())?);
    for (k, v) in &rep.summary.rates {
        let s: Vec<String> = v.iter().map(|r| r.map_or("-".into(), |r| format!("{r:.2}"))).collect();
        println!("rate {k:<16} {}", s.join(" "));
    }
    if let Some(r) = rep.summary.three_system_residuals {
        println!("residuals of the three decoupled systems: {:.2e} {:.2e} {:.2e}", r[0], r[1], r[2]);
    }
    Ok(())
}
