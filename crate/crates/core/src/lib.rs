//! Two-candidate spatial competition on a left-right axis with voter
//! abstention.
//!
//! Candidates climb the gradient of their own vote share. With full turnout
//! they always meet in the middle; once voters abstain when no candidate is
//! close to them, the final positions can jump discontinuously as loyalty
//! wanes, through a saddle-node (blue sky) bifurcation of the one-candidate
//! dynamics.

pub mod bifurcation;
pub mod density;
pub mod dynamics;
pub mod error;
pub mod fmt;
pub mod loyalty;
pub mod quadrature;
pub mod share;
pub mod sweep;

pub use density::{GaussianComponent, VoterDensity, Winner};
pub use error::{Error, Result};
pub use loyalty::{BaseKernel, Gamma, KernelReport, KernelViolation, LoyaltyKernel};
pub use quadrature::{integrate, Integral, QuadratureConfig};
pub use share::{Abstention, ShareModel};
pub use dynamics::{
    conserved_quantity, l_infinity_clamped, rhs, simulate, CandidateState, IntegratorConfig,
    RateConstants, Sample, Status, Trajectory, TrajectorySummary,
};
pub use bifurcation::{
    critical_gamma, find_fixed_points, l_infinity_curve, scan, velocity, BifurcationScan,
    CriticalGamma, FixedPoint, FixedPointSearch, Stability,
};
pub use sweep::{
    run_sweep, BetaIndependence, CellStatus, ColumnKind, Discontinuity, StationarityResidual,
    SweepCell, SweepGrid, SweepResult, SweepSummary,
};
