//! Location azimuth and elevation from the row shifts of `C̈`.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use super::{clipped_arccos, tls::tls_phase_ratio, transforms::ShiftPairs, wrap_to, EstimatorError};
use crate::channel::ComplexMatrix;
use crate::geometry::SystemConfig;

/// `cos φ̂` below this is treated as the zenith.
const ZENITH_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub struct DirectionEstimate {
    pub theta: f64,
    pub phi: f64,
    /// Column-averaged `δ̂_ex`.
    pub delta_ex: Complex64,
    /// Column-averaged `δ̂_ey`.
    pub delta_ey: Complex64,
    /// Argument of the elevation arccos before clipping to `[0, 1]`.
    pub cos_phi_unclipped: f64,
}

/// `δ_ex = exp(j 4π d_x cosθ cosφ / λ)`.
pub fn x_shift(theta: f64, phi: f64, cfg: &SystemConfig) -> Complex64 {
    Complex64::from_polar(
        1.0,
        4.0 * PI * cfg.ris_spacing_x * theta.cos() * phi.cos() / cfg.wavelength,
    )
}

/// `δ_ey = exp(j 4π d_y sinθ cosφ / λ)`.
pub fn y_shift(theta: f64, phi: f64, cfg: &SystemConfig) -> Complex64 {
    Complex64::from_polar(
        1.0,
        4.0 * PI * cfg.ris_spacing_y * theta.sin() * phi.cos() / cfg.wavelength,
    )
}

/// Mean of the per-column TLS ratios over the given pairs.
pub(crate) fn mean_column_ratio(m: &ComplexMatrix, pairs: &ShiftPairs) -> Option<Complex64> {
    let ratios: Vec<Complex64> = (0..m.ncols())
        .filter_map(|c| {
            let (u, v) = pairs.slices(m, c);
            tls_phase_ratio(&u, &v).ok()
        })
        .collect();
    if ratios.is_empty() {
        return None;
    }
    Some(ratios.iter().sum::<Complex64>() / ratios.len() as f64)
}

/// `θ̂ = atan2(∠δ̂_ey / d_y, ∠δ̂_ex / d_x)`, reported in `[-π/2, 3π/2)`, and
/// `φ̂ = arccos(λ/(4π) · sqrt((∠δ̂_ex/d_x)² + (∠δ̂_ey/d_y)²))`.
pub fn estimate_direction(cddot: &ComplexMatrix, cfg: &SystemConfig) -> Result<DirectionEstimate, EstimatorError> {
    if cddot.nrows() != cfg.ris_elements() {
        return Err(EstimatorError::Shape(format!(
            "C̈ has {} rows, expected N = {}",
            cddot.nrows(),
            cfg.ris_elements()
        )));
    }
    let x_pairs = ShiftPairs::x_axis(cfg.ris_x, cfg.ris_y);
    let y_pairs = ShiftPairs::y_axis(cfg.ris_x, cfg.ris_y);
    let delta_ex = mean_column_ratio(cddot, &x_pairs).ok_or(EstimatorError::DegenerateTls)?;
    let delta_ey = mean_column_ratio(cddot, &y_pairs).ok_or(EstimatorError::DegenerateTls)?;

    let fx = delta_ex.arg() / cfg.ris_spacing_x;
    let fy = delta_ey.arg() / cfg.ris_spacing_y;
    let cos_phi = cfg.wavelength / (4.0 * PI) * fx.hypot(fy);
    // At the zenith both phases vanish and the azimuth is undefined.
    if cos_phi < ZENITH_TOLERANCE {
        return Err(EstimatorError::DegenerateDirection);
    }
    let theta = wrap_to(fy.atan2(fx), -FRAC_PI_2);
    Ok(DirectionEstimate {
        theta,
        phi: clipped_arccos(cos_phi),
        delta_ex,
        delta_ey,
        cos_phi_unclipped: cos_phi,
    })
}
