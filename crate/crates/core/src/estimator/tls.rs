//! Two-column total least squares phase ratio.

use nalgebra::DMatrix;
use num_complex::Complex64;

use super::EstimatorError;

/// Below this magnitude the TLS denominator `V₂₂` is treated as zero.
const DEGENERATE_DENOMINATOR: f64 = 1e-12;

/// TLS estimate of `δ` in `v ≈ u δ`, with errors allowed in both `u` and `v`.
///
/// Forms `Δ = [u | v]` (len x 2), takes its SVD `Δ = U Σ Vᴴ` and reads the
/// ratio off the right singular vector of the smallest singular value:
/// `δ = -V₁₂ / V₂₂`.
pub fn tls_phase_ratio(u: &[Complex64], v: &[Complex64]) -> Result<Complex64, EstimatorError> {
    if u.len() != v.len() || u.len() < 2 {
        return Err(EstimatorError::TlsInput(format!(
            "need two equal-length vectors of length >= 2, got {} and {}",
            u.len(),
            v.len()
        )));
    }
    let norm = |x: &[Complex64]| x.iter().map(|z| z.norm_sqr()).sum::<f64>();
    if norm(u) == 0.0 || norm(v) == 0.0 {
        return Err(EstimatorError::TlsInput("zero-norm input vector".into()));
    }
    let delta = DMatrix::from_fn(u.len(), 2, |i, j| if j == 0 { u[i] } else { v[i] });
    let svd = delta.svd(false, true);
    let v_t = svd.v_t.ok_or(EstimatorError::DegenerateTls)?;
    let smallest = if svd.singular_values[0] <= svd.singular_values[1] {
        0
    } else {
        1
    };
    // Column `smallest` of V is the conjugate of row `smallest` of Vᴴ.
    let v12 = v_t[(smallest, 0)].conj();
    let v22 = v_t[(smallest, 1)].conj();
    if v22.norm() < DEGENERATE_DENOMINATOR {
        return Err(EstimatorError::DegenerateTls);
    }
    let ratio = -v12 / v22;
    if !(ratio.re.is_finite() && ratio.im.is_finite()) {
        return Err(EstimatorError::DegenerateTls);
    }
    Ok(ratio)
}
