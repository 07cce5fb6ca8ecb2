//! Near-field 5D pose estimation of a multi-antenna user through a
//! reconfigurable intelligent surface.
//!
//! The crate synthesizes the RIS-assisted uplink (UE → RIS → BS), recovers the
//! UE-RIS channel from stacked observations, and estimates the UE range,
//! azimuth, elevation and array orientation in closed form. A Monte Carlo
//! harness aggregates normalized mean-square errors over parameter sweeps.

pub mod channel;
pub mod cli;
pub mod config;
pub mod estimator;
pub mod geometry;
pub mod montecarlo;
pub mod recovery;
pub mod validate;

pub use channel::{ChannelMode, ComplexMatrix};
pub use estimator::{estimate_pose, EstimationFailure, PoseEstimate};
pub use geometry::{Pose, SystemConfig};
