//! Curvature maps, the Paneitz operator on spheres, radial Liouville
//! solutions on the plane, the Kazdan–Warner guard and the scan for the
//! critical inverse temperature `β = -2n`.

mod curvature;
mod kazdan_warner;
mod paneitz;
mod radial;
mod scan;

pub use curvature::{
    conformal_factor, critical_total_curvature, curvature_from_f, gauss_bonnet_integral, CurvatureSign,
    CurvatureSpec, CRITICAL_BETA_TOL,
};
pub use kazdan_warner::{kazdan_warner_check, KazdanWarnerReport, KazdanWarnerVerdict};
pub use paneitz::{
    nirenberg_residual, paneitz_apply, paneitz_apply_coefficients, paneitz_multiplier, paneitz_multipliers,
    NirenbergResidual,
};
pub use radial::{
    kappa_beta_consistency, radial_liouville_solve, KappaBetaReport, RadialCurvature, RadialMode, RadialOptions,
    RadialSolution,
};
pub use scan::{scan_beta_target, ScanReport, ScanResult};
