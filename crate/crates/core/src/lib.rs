//! Flight-model and control building blocks for close-proximity surface
//! work with a quadrotor.
//!
//! The crate is `no_std` (it needs `alloc`) and contains only pure
//! computation:
//!
//! - [`dynamics`]: rotor mixing and its inverse, rigid-body equations of
//!   motion and a fixed-step RK4 integrator.
//! - [`ground_effect`]: the in-ground-effect thrust model, per-rotor plant
//!   amplification, clipped compensation and least-squares identification of
//!   the model coefficient.
//! - [`surface`]: planar surfaces with a convex boundary, vertical height
//!   queries and rotor-disk overlap fractions.
//! - [`control`]: the cascaded position / attitude / rate controller together
//!   with the ground-effect and dispensed-mass compensation layers.
//! - [`panel`]: RANSAC plane fitting, corner extraction and frame transforms
//!   for detected panels.
//! - [`coverage`]: boustrophedon sweep plans over a panel.
//!
//! File formats, scenario handling and the command line live in the
//! `pvcoat-sim` crate.
#![no_std]
#![forbid(unsafe_code)]
// `!(a > b)` is used deliberately so NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

extern crate alloc;

pub mod control;
pub mod coverage;
pub mod dynamics;
pub mod ground_effect;
pub mod panel;
pub mod surface;

pub(crate) mod hull;

pub use control::{
    CascadedController, CompensationToggles, ControlError, ControlOutput, ControllerGains,
    MassEstimator, TrajectorySample,
};
pub use coverage::{CoverageError, CoverageParams, CoveragePlan};
pub use dynamics::{
    DynamicsError, PlantInput, RigidBodyState, RotorSpeeds, VehicleParams, WrenchCommand,
};
pub use ground_effect::{GroundEffectError, GroundEffectModel, HoverSample};
pub use panel::{CornerMethod, PanelCorners, PanelError, PlaneModel, PointCloud};
pub use surface::{SurfaceError, SurfaceModel};

/// Re-exported so downstream crates use the same linear-algebra types.
pub use nalgebra;
