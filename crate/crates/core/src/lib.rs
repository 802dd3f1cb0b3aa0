//! Minimizers of `F_beta(phi) = ½‖∇phi‖_2^2 + beta ‖phi‖_1` on the unit L2
//! sphere for radial fields on R^3.
//!
//! The minimizer is known in closed form ([`closed_form`]); [`direct`]
//! reaches it independently by projected proximal gradient descent, and
//! [`analysis`] checks the identities that tie the two together.

pub mod analysis;
pub mod closed_form;
pub mod direct;
pub mod error;
pub mod grid;
pub mod radial;
pub mod rearrangement;
pub mod roots;

pub use analysis::{
    nash_ratio, rescale_unitary, scaling_scan, virial_check, ScalingReport, ScanConfig, Source,
    VirialCheck,
};
pub use closed_form::{
    boundary_report, eval_minimizer, geometry_constant, helmholtz_residual, sample,
    solve_parameters, BoundaryReport, ClosedFormReport, MinimizerParams,
};
pub use direct::{minimize, minimize_from, MinimizeOutput, SolverOptions, SolverTrace};
pub use error::{Error, Result};
pub use grid::{RadialGrid, RadialProfile};
pub use radial::{evaluate_functional, kinetic_energy, l1_norm, l2_norm, EnergyBreakdown};
pub use rearrangement::{check_lemma1, rearrange, to_shells, Lemma1Report, ShellDecomposition};
pub use roots::find_root;
