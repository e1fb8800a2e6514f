//! Convergence studies, two-scale pairings and result export.

mod config;
mod export;
mod pairing;
mod study;

pub use config::{load_json, NormKind, OutputConfig, ProblemConfig, QSource, StudyConfig, TableConfig};
pub use export::{csv_header, export, export_gnuplot, read_report, rows_to_csv, write_outputs, ExportFormat};
pub use pairing::{
    pairing_grid, triple_integral, twoscale_pairing, twoscale_pairing_gradient, twoscale_pairing_on, PairingKind,
    TestFunction, TestFunctionSpec,
};
pub use study::{
    convergence_study, default_dictionary, thread_cap, with_thread_cap, RunManifest, StudyReport, StudyRow,
    StudySummary,
};
