//! Trajectory transfer for deformable linear objects.
//!
//! A demonstrated manipulation on one rope/cloth-edge configuration is
//! replayed on a new one by registering the two shapes with coherent point
//! drift and warping the demonstration. Registration can run directly on
//! Cartesian node positions, or on the tangent-space representation
//! (per-segment angles), which conserves object length by construction.

pub mod cpd;
pub mod error;
pub mod geometry;
pub mod io;
pub mod pipeline;
pub mod scenario;

pub use cpd::{cpd_register, RegistrationConfig, RegistrationResult};
pub use error::{Error, Result};
pub use geometry::{
    curve_length, from_tangent, resample_uniform, segment_deviation, to_tangent, Curve, Point,
    TangentPointSet, TangentProfile,
};
pub use pipeline::{
    correspondence, generate_step_trajectory, map_grasp_node, place_target, register_cartesian,
    warp_tangent_scene, warp_trajectory_cartesian, CorrespondenceMatrix, GripperStatus, Keyframe,
    Trajectory, WarpOutput,
};
pub use scenario::{
    fixture_names, make_fixture, replay_rope, run_task, validate_physical, Fixture, StepDemo,
    StepResult, TaskConfig, TaskDemo, ValidationReport, DEFAULT_DEVIATION_THRESHOLD,
};
