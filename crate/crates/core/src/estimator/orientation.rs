//! Array orientation from the row shifts of `D̈`, given the location
//! estimates.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;

use super::{clipped_arccos, tls::tls_phase_ratio, transforms::ShiftPairs, wrap_to, EstimatorError};
use crate::channel::ComplexMatrix;
use crate::geometry::SystemConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct OrientationEstimate {
    pub psi: f64,
    pub gamma: f64,
    /// Antenna indices `k ≠ 0` that produced an estimate.
    pub used_k: Vec<i64>,
    pub per_k_psi: Vec<f64>,
    pub per_k_gamma: Vec<f64>,
    /// Per-k elevation arccos arguments before clipping.
    pub cos_gamma_unclipped: Vec<f64>,
}

/// `δ_{gx,k} = δ_ex exp(j 4π k d_u d_x cosψ cosγ / (λ r))`.
pub fn orientation_x_shift(
    k: i64,
    r: f64,
    theta: f64,
    phi: f64,
    psi: f64,
    gamma: f64,
    cfg: &SystemConfig,
) -> Complex64 {
    let extra =
        4.0 * PI * k as f64 * cfg.ue_spacing * cfg.ris_spacing_x * psi.cos() * gamma.cos() / (cfg.wavelength * r);
    super::direction::x_shift(theta, phi, cfg) * Complex64::from_polar(1.0, extra)
}

/// `δ_{gy,k} = δ_ey exp(j 4π k d_u d_y sinψ cosγ / (λ r))`.
pub fn orientation_y_shift(
    k: i64,
    r: f64,
    theta: f64,
    phi: f64,
    psi: f64,
    gamma: f64,
    cfg: &SystemConfig,
) -> Complex64 {
    let extra =
        4.0 * PI * k as f64 * cfg.ue_spacing * cfg.ris_spacing_y * psi.sin() * gamma.cos() / (cfg.wavelength * r);
    super::direction::y_shift(theta, phi, cfg) * Complex64::from_polar(1.0, extra)
}

/// Per-k residual phases `α_k = ∠(δ̂_{g,k} / δ̂_e)` along one axis.
///
/// `α_k` is linear in `k`; when it exceeds π for the outer antennas each value
/// is moved to the 2π branch nearest `k α₁`, with `α₁` taken from `k = ±1`.
fn residual_phases(ratios: &[(i64, Complex64)], reference: Complex64) -> Vec<f64> {
    let raw: Vec<(i64, f64)> = ratios.iter().map(|&(k, d)| (k, (d / reference).arg())).collect();
    let unit: Vec<f64> = raw
        .iter()
        .filter(|(k, _)| k.abs() == 1)
        .map(|&(k, a)| a * k as f64)
        .collect();
    if unit.is_empty() {
        return raw.into_iter().map(|(_, a)| a).collect();
    }
    let slope = unit.iter().sum::<f64>() / unit.len() as f64;
    raw.into_iter()
        .map(|(k, a)| wrap_to(a, k as f64 * slope - PI))
        .collect()
}

/// Per-k azimuth `atan2(sgn(k) α_{y,k}/d_y, sgn(k) α_{x,k}/d_x)` in
/// `[-π/2, 3π/2)` and elevation
/// `arccos(λ r̂ / (4π |k| d_u) · sqrt((α_{x,k}/d_x)² + (α_{y,k}/d_y)²))`,
/// each averaged over `k ≠ 0`.
pub fn estimate_orientation(
    dddot: &ComplexMatrix,
    delta_ex: Complex64,
    delta_ey: Complex64,
    r_hat: f64,
    cfg: &SystemConfig,
) -> Result<OrientationEstimate, EstimatorError> {
    let k_half = cfg.k_half();
    if dddot.ncols() != cfg.ue_antennas || dddot.nrows() != cfg.ris_elements() || k_half < 1 {
        return Err(EstimatorError::Shape(format!(
            "D̈ is {}x{}, expected {}x{} with K >= 3",
            dddot.nrows(),
            dddot.ncols(),
            cfg.ris_elements(),
            cfg.ue_antennas
        )));
    }
    if !(r_hat.is_finite() && r_hat > 0.0) {
        return Err(EstimatorError::NonPositiveRange(r_hat));
    }
    if delta_ex.norm() == 0.0 || delta_ey.norm() == 0.0 {
        return Err(EstimatorError::DegenerateDirection);
    }
    let x_pairs = ShiftPairs::x_axis(cfg.ris_x, cfg.ris_y);
    let y_pairs = ShiftPairs::y_axis(cfg.ris_x, cfg.ris_y);

    let mut gx = Vec::new();
    let mut gy = Vec::new();
    for k in (-k_half..=k_half).filter(|&k| k != 0) {
        let c = (k + k_half) as usize;
        let (ux, vx) = x_pairs.slices(dddot, c);
        let (uy, vy) = y_pairs.slices(dddot, c);
        if let (Ok(dx), Ok(dy)) = (tls_phase_ratio(&ux, &vx), tls_phase_ratio(&uy, &vy)) {
            gx.push((k, dx));
            gy.push((k, dy));
        }
    }
    if gx.is_empty() {
        return Err(EstimatorError::DegenerateTls);
    }
    let alpha_x = residual_phases(&gx, delta_ex);
    let alpha_y = residual_phases(&gy, delta_ey);

    let used_k: Vec<i64> = gx.iter().map(|&(k, _)| k).collect();
    let mut per_k_psi = Vec::with_capacity(used_k.len());
    let mut per_k_gamma = Vec::with_capacity(used_k.len());
    let mut cos_gamma_unclipped = Vec::with_capacity(used_k.len());
    for ((&k, ax), ay) in used_k.iter().zip(&alpha_x).zip(&alpha_y) {
        let sign = k.signum() as f64;
        let fx = ax / cfg.ris_spacing_x;
        let fy = ay / cfg.ris_spacing_y;
        per_k_psi.push(wrap_to((sign * fy).atan2(sign * fx), -FRAC_PI_2));
        let cos_gamma = cfg.wavelength * r_hat / (4.0 * PI * k.abs() as f64 * cfg.ue_spacing) * fx.hypot(fy);
        cos_gamma_unclipped.push(cos_gamma);
        per_k_gamma.push(clipped_arccos(cos_gamma));
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    Ok(OrientationEstimate {
        psi: mean(&per_k_psi),
        gamma: mean(&per_k_gamma),
        used_k,
        per_k_psi,
        per_k_gamma,
        cos_gamma_unclipped,
    })
}
