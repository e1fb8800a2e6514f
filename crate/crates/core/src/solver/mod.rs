//! Nonlinear solvers: the damped Newton engine, the homogenized problem, the
//! oscillating problem and corrector reconstruction.

mod fine;
mod macroscopic;
mod newton;
mod reconstruct;

pub use fine::{check_resolution, resolving_cells, solve_fine, CELLS_PER_FINE_PERIOD};
pub use macroscopic::{solve_macro, DirectFlux, EffectiveFlux, FieldSolution, FnFlux, LinearFlux};
pub use newton::{
    solve_monotone_system, solve_system, Armijo, FnSystem, JacobianMode, MonotoneSystem, SolveOptions,
    SystemSolution,
};
pub use reconstruct::{reconstruct, reconstruct_on, HomogTriple, NodeCorrectors};
