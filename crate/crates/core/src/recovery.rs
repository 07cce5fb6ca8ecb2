//! Inversion of the known measurement operator: `Ä = pinv(H̄) Y pinv(S)`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use thiserror::Error;

use crate::channel::ComplexMatrix;

/// Singular values below this fraction of the largest are treated as zero.
pub const PINV_RELATIVE_THRESHOLD: f64 = 1e-12;

/// Tolerance on `H̄ᴴH̄ = (PM) I` for the closed-form left inverse.
const ORTHOGONALITY_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum RecoveryError {
    #[error("{what} has rank {rank}, needs full rank {needed}")]
    RankDeficient {
        what: &'static str,
        rank: usize,
        needed: usize,
    },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("SVD did not produce singular vectors")]
    SvdFailed,
}

/// Moore-Penrose pseudo-inverse via SVD, requiring full rank
/// `min(rows, cols)`.
pub fn pinv_full_rank(a: &ComplexMatrix, what: &'static str) -> Result<ComplexMatrix, RecoveryError> {
    let needed = a.nrows().min(a.ncols());
    let svd = a.clone().svd(true, true);
    let largest = svd.singular_values.iter().cloned().fold(0.0, f64::max);
    let cutoff = PINV_RELATIVE_THRESHOLD * largest;
    let rank = svd.singular_values.iter().filter(|&&s| s > cutoff).count();
    if rank < needed || largest == 0.0 {
        return Err(RecoveryError::RankDeficient { what, rank, needed });
    }
    let u = svd.u.ok_or(RecoveryError::SvdFailed)?;
    let v_t = svd.v_t.ok_or(RecoveryError::SvdFailed)?;
    // pinv = V Σ⁻¹ Uᴴ
    let mut v_scaled = v_t.adjoint();
    for (mut col, &s) in v_scaled.column_iter_mut().zip(svd.singular_values.iter()) {
        col /= Complex64::new(s, 0.0);
    }
    Ok(v_scaled * u.adjoint())
}

/// Left inverse of `H̄` (N x MP).
///
/// With `structured` set, first tries the closed form `H̄ᴴ / (PM)`, which is
/// exact when `ΦᴴΦ = P I` and `H` has unit-modulus entries (P a multiple of
/// N). If `H̄` is not column-orthogonal with equal column norms, falls back to
/// the SVD route.
pub fn pinv_hbar(hbar: &ComplexMatrix, structured: bool) -> Result<ComplexMatrix, RecoveryError> {
    if hbar.nrows() < hbar.ncols() {
        return Err(RecoveryError::RankDeficient {
            what: "H̄",
            rank: hbar.nrows(),
            needed: hbar.ncols(),
        });
    }
    if structured {
        if let Some(inv) = structured_left_inverse(hbar) {
            return Ok(inv);
        }
    }
    pinv_full_rank(hbar, "H̄")
}

fn structured_left_inverse(hbar: &ComplexMatrix) -> Option<ComplexMatrix> {
    let gram = hbar.adjoint() * hbar;
    let scale = gram[(0, 0)].re;
    if scale <= 0.0 {
        return None;
    }
    let n = gram.nrows();
    for j in 0..n {
        for i in 0..n {
            let target = if i == j { scale } else { 0.0 };
            if (gram[(i, j)] - Complex64::new(target, 0.0)).norm() > ORTHOGONALITY_TOLERANCE * scale {
                return None;
            }
        }
    }
    Some(hbar.adjoint() / Complex64::new(scale, 0.0))
}

/// Right inverse of the pilot matrix `S` (L x K).
pub fn pinv_pilot(s: &ComplexMatrix) -> Result<ComplexMatrix, RecoveryError> {
    if s.nrows() > s.ncols() {
        return Err(RecoveryError::RankDeficient {
            what: "S",
            rank: s.ncols(),
            needed: s.nrows(),
        });
    }
    pinv_full_rank(s, "S")
}

/// Noisy UE-RIS channel estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct RecoveredChannel {
    /// `Ä = A + W̃` (N x K).
    pub addot: ComplexMatrix,
    /// RMS gain from observation noise to `W̃`: the per-entry standard
    /// deviation of `W̃` is `residual_noise_scale * σ` on average.
    pub residual_noise_scale: f64,
}

/// Precomputed left/right inverses for a fixed `(H̄, S)` pair.
#[derive(Debug, Clone)]
pub struct RecoveryOperator {
    left: ComplexMatrix,
    right: ComplexMatrix,
    noise_scale: f64,
}

impl RecoveryOperator {
    pub fn new(hbar: &ComplexMatrix, s: &ComplexMatrix, structured: bool) -> Result<Self, RecoveryError> {
        let left = pinv_hbar(hbar, structured)?;
        let right = pinv_pilot(s)?;
        let (n, k) = (left.nrows(), right.ncols());
        // E|W̃_ik|² = σ² ‖left_i,:‖² ‖right_:,k‖², averaged over all entries.
        let noise_scale = (left.norm_squared() * right.norm_squared() / (n * k) as f64).sqrt();
        Ok(Self {
            left,
            right,
            noise_scale,
        })
    }

    pub fn left_inverse(&self) -> &ComplexMatrix {
        &self.left
    }

    pub fn right_inverse(&self) -> &ComplexMatrix {
        &self.right
    }

    pub fn recover(&self, y: &ComplexMatrix) -> Result<RecoveredChannel, RecoveryError> {
        if y.nrows() != self.left.ncols() || y.ncols() != self.right.nrows() {
            return Err(RecoveryError::DimensionMismatch(format!(
                "Y is {}x{}, operator expects {}x{}",
                y.nrows(),
                y.ncols(),
                self.left.ncols(),
                self.right.nrows()
            )));
        }
        let addot: DMatrix<Complex64> = (&self.left * y) * &self.right;
        Ok(RecoveredChannel {
            addot,
            residual_noise_scale: self.noise_scale,
        })
    }
}

/// `Ä = pinv(H̄) Y pinv(S)` using the SVD route for both inverses.
pub fn recover_channel(
    y: &ComplexMatrix,
    hbar: &ComplexMatrix,
    s: &ComplexMatrix,
) -> Result<RecoveredChannel, RecoveryError> {
    RecoveryOperator::new(hbar, s, false)?.recover(y)
}
