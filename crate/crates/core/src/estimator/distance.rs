//! Range from the column shifts of `B̈`.

use std::f64::consts::PI;

use num_complex::Complex64;

use super::{tls::tls_phase_ratio, wrap_to, EstimatorError};
use crate::channel::ComplexMatrix;
use crate::geometry::SystemConfig;

#[derive(Debug, Clone, PartialEq)]
pub struct DistanceEstimate {
    pub r_hat: f64,
    /// Range estimate from each usable pair `(k, k + 1)`.
    pub per_k: Vec<f64>,
    /// Pairs `k` left out of the mean: degenerate TLS or zero phase.
    pub excluded: Vec<i64>,
    /// `δ̂_{r,k}` for `k = -K̃ .. K̃-1`, `None` where TLS failed.
    pub ratios: Vec<Option<Complex64>>,
    /// Range from the `|2k + 1| = 1` pairs, used to unwrap the rest.
    pub coarse_r: f64,
}

/// `δ_{r,k} = exp(-j 2π (2k + 1) d_u² / (λ r))`.
pub fn distance_shift(k: i64, r: f64, cfg: &SystemConfig) -> Complex64 {
    Complex64::from_polar(1.0, distance_phase(k, r, cfg))
}

/// Unwrapped phase of [`distance_shift`].
pub fn distance_phase(k: i64, r: f64, cfg: &SystemConfig) -> f64 {
    -2.0 * PI * (2 * k + 1) as f64 * cfg.ue_spacing.powi(2) / (cfg.wavelength * r)
}

fn range_from_phase(k: i64, phase: f64, cfg: &SystemConfig) -> f64 {
    -2.0 * PI * (2 * k + 1) as f64 * cfg.ue_spacing.powi(2) / (cfg.wavelength * phase)
}

/// Range estimate: TLS ratio of each adjacent column pair of `B̈`, mapped to a
/// range and averaged over the `K - 1` pairs.
///
/// Phases of pairs with `|2k + 1| > 1` can exceed π near the lower
/// near-field bound. Each one is moved to the 2π branch nearest the phase
/// predicted by the range from the two centre pairs `k ∈ {-1, 0}`, which stay
/// unambiguous for `r > 2 d_u² / λ`.
pub fn estimate_distance(bddot: &ComplexMatrix, cfg: &SystemConfig) -> Result<DistanceEstimate, EstimatorError> {
    let k_half = cfg.k_half();
    if bddot.ncols() != cfg.ue_antennas || k_half < 1 {
        return Err(EstimatorError::Shape(format!(
            "B̈ has {} columns, expected K = {} >= 3",
            bddot.ncols(),
            cfg.ue_antennas
        )));
    }
    let ratios: Vec<Option<Complex64>> = (-k_half..k_half)
        .map(|k| {
            let c = (k + k_half) as usize;
            let u: Vec<_> = bddot.column(c).iter().copied().collect();
            let v: Vec<_> = bddot.column(c + 1).iter().copied().collect();
            tls_phase_ratio(&u, &v).ok()
        })
        .collect();
    let ratio = |k: i64| ratios[(k + k_half) as usize];

    let centre: Vec<f64> = [-1, 0]
        .into_iter()
        .filter_map(|k| {
            let phase = ratio(k)?.arg();
            (phase != 0.0).then(|| range_from_phase(k, phase, cfg))
        })
        .collect();
    if centre.is_empty() {
        return Err(EstimatorError::NoDistancePairs);
    }
    let coarse_r = centre.iter().sum::<f64>() / centre.len() as f64;
    if !(coarse_r.is_finite() && coarse_r > 0.0) {
        return Err(EstimatorError::NonPositiveRange(coarse_r));
    }

    let mut per_k = Vec::with_capacity(ratios.len());
    let mut excluded = Vec::new();
    for k in -k_half..k_half {
        let Some(delta) = ratio(k) else {
            excluded.push(k);
            continue;
        };
        let predicted = distance_phase(k, coarse_r, cfg);
        let measured = delta.arg();
        let phase = wrap_to(measured, predicted - PI);
        if phase == 0.0 {
            excluded.push(k);
            continue;
        }
        per_k.push(range_from_phase(k, phase, cfg));
    }
    if per_k.is_empty() {
        return Err(EstimatorError::NoDistancePairs);
    }
    let r_hat = per_k.iter().sum::<f64>() / per_k.len() as f64;
    if !(r_hat.is_finite() && r_hat > 0.0) {
        return Err(EstimatorError::NonPositiveRange(r_hat));
    }
    Ok(DistanceEstimate {
        r_hat,
        per_k,
        excluded,
        ratios,
        coarse_r,
    })
}
