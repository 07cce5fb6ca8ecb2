//! Closed-form 5D pose estimation from the recovered UE-RIS channel.
//!
//! Pipeline, all on `Ä = pinv(H̄) Y pinv(S)`:
//!
//! 1. `B̈ = Ä ⊙ (Ä F_K)` isolates the range; adjacent columns differ by
//!    `δ_{r,k}`, which gives `r̂`.
//! 2. `C̈ = Ä ⊙ (F_N Ä* F_K)` isolates the direction; adjacent rows differ by
//!    `δ_ex` / `δ_ey`, which give `θ̂, φ̂`.
//! 3. `D̈ = Ä ⊙ (F_N Ä*)` mixes direction and orientation; dividing its row
//!    ratios by `δ̂_ex` / `δ̂_ey` and scaling by `r̂` gives `ψ̂, γ̂`.
//!
//! Every ratio is a two-column TLS fit ([`tls_phase_ratio`]).

mod direction;
mod distance;
mod orientation;
mod tls;
mod transforms;

use std::f64::consts::PI;

use num_complex::Complex64;
use thiserror::Error;

use crate::channel::ComplexMatrix;
use crate::geometry::{Pose, SystemConfig};
use crate::recovery::{RecoveryError, RecoveryOperator};

pub use direction::{estimate_direction, x_shift, y_shift, DirectionEstimate};
pub use distance::{distance_phase, distance_shift, estimate_distance, DistanceEstimate};
pub use orientation::{estimate_orientation, orientation_x_shift, orientation_y_shift, OrientationEstimate};
pub use tls::tls_phase_ratio;
pub use transforms::{transform_b, transform_c, transform_d, Axis, ShiftPairs};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EstimatorError {
    #[error("invalid TLS input: {0}")]
    TlsInput(String),
    #[error("degenerate TLS fit (V22 = 0)")]
    DegenerateTls,
    #[error("no usable column pair for the range estimate")]
    NoDistancePairs,
    #[error("range estimate {0} is not positive")]
    NonPositiveRange(f64),
    #[error("both RIS-axis phases are zero; azimuth undefined")]
    DegenerateDirection,
    #[error("unexpected matrix shape: {0}")]
    Shape(String),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
}

/// Pipeline stage, used to label failures.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    Recovery,
    Distance,
    Direction,
    Orientation,
}

impl Stage {
    pub fn as_str(&self) -> &'static str {
        match self {
            Stage::Recovery => "recovery",
            Stage::Distance => "distance",
            Stage::Direction => "direction",
            Stage::Orientation => "orientation",
        }
    }
}

impl std::fmt::Display for Stage {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Results of the stages that completed before a failure.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct PartialEstimate {
    pub distance: Option<DistanceEstimate>,
    pub direction: Option<DirectionEstimate>,
}

#[derive(Debug, Error, Clone, PartialEq)]
#[error("{stage} stage failed: {error}")]
pub struct EstimationFailure {
    pub stage: Stage,
    pub error: EstimatorError,
    pub partial: Box<PartialEstimate>,
}

/// Estimated pose plus the intermediate quantities it was built from.
#[derive(Debug, Clone, PartialEq)]
pub struct PoseEstimate {
    pub r_hat: f64,
    pub theta_hat: f64,
    pub phi_hat: f64,
    pub psi_hat: f64,
    pub gamma_hat: f64,
    pub per_k_distance: Vec<f64>,
    pub delta_ex_hat: Complex64,
    pub delta_ey_hat: Complex64,
    pub distance: DistanceEstimate,
    pub direction: DirectionEstimate,
    pub orientation: OrientationEstimate,
}

impl PoseEstimate {
    pub fn pose(&self) -> Pose {
        Pose::new(self.r_hat, self.theta_hat, self.phi_hat, self.psi_hat, self.gamma_hat)
    }

    pub fn is_finite(&self) -> bool {
        self.pose().as_array().iter().all(|v| v.is_finite())
    }

    /// True if any arccos argument had to be clipped into `[0, 1]`.
    pub fn clipped(&self) -> bool {
        let out = |c: f64| !(0.0..=1.0).contains(&c);
        out(self.direction.cos_phi_unclipped) || self.orientation.cos_gamma_unclipped.iter().any(|&c| out(c))
    }
}

/// Runs the three estimation stages on a recovered channel `Ä`.
pub fn estimate_from_channel(addot: &ComplexMatrix, cfg: &SystemConfig) -> Result<PoseEstimate, EstimationFailure> {
    let fail = |stage, error, partial: &PartialEstimate| EstimationFailure {
        stage,
        error,
        partial: Box::new(partial.clone()),
    };
    let mut partial = PartialEstimate::default();
    if addot.shape() != (cfg.ris_elements(), cfg.ue_antennas) {
        let err = EstimatorError::Shape(format!(
            "Ä is {}x{}, expected {}x{}",
            addot.nrows(),
            addot.ncols(),
            cfg.ris_elements(),
            cfg.ue_antennas
        ));
        return Err(fail(Stage::Recovery, err, &partial));
    }

    let bddot = transform_b(addot);
    let distance = estimate_distance(&bddot, cfg).map_err(|e| fail(Stage::Distance, e, &partial))?;
    partial.distance = Some(distance.clone());

    let cddot = transform_c(addot);
    let direction = estimate_direction(&cddot, cfg).map_err(|e| fail(Stage::Direction, e, &partial))?;
    partial.direction = Some(direction.clone());

    let dddot = transform_d(addot);
    let orientation = estimate_orientation(&dddot, direction.delta_ex, direction.delta_ey, distance.r_hat, cfg)
        .map_err(|e| fail(Stage::Orientation, e, &partial))?;

    Ok(PoseEstimate {
        r_hat: distance.r_hat,
        theta_hat: direction.theta,
        phi_hat: direction.phi,
        psi_hat: orientation.psi,
        gamma_hat: orientation.gamma,
        per_k_distance: distance.per_k.clone(),
        delta_ex_hat: direction.delta_ex,
        delta_ey_hat: direction.delta_ey,
        distance,
        direction,
        orientation,
    })
}

/// Full pipeline from stacked observations: recover `Ä`, then estimate the
/// range, direction and orientation in that order.
pub fn estimate_pose(
    y: &ComplexMatrix,
    hbar: &ComplexMatrix,
    s: &ComplexMatrix,
    cfg: &SystemConfig,
) -> Result<PoseEstimate, EstimationFailure> {
    let recovery_failure = |error: RecoveryError| EstimationFailure {
        stage: Stage::Recovery,
        error: error.into(),
        partial: Box::default(),
    };
    let op = RecoveryOperator::new(hbar, s, true).map_err(recovery_failure)?;
    let recovered = op.recover(y).map_err(recovery_failure)?;
    estimate_from_channel(&recovered.addot, cfg)
}

/// Maps `angle` into `[lower, lower + 2π)`.
pub(crate) fn wrap_to(angle: f64, lower: f64) -> f64 {
    let two_pi = 2.0 * PI;
    let wrapped = angle - two_pi * ((angle - lower) / two_pi).floor();
    // floor() rounding can land exactly on the upper edge
    if wrapped >= lower + two_pi {
        wrapped - two_pi
    } else {
        wrapped
    }
}

pub(crate) fn clipped_arccos(x: f64) -> f64 {
    x.clamp(0.0, 1.0).acos()
}
