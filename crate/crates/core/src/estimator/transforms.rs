//! Flip-and-multiply transforms that decouple the pose parameters, and the
//! row selections that pair adjacent RIS elements.
//!
//! With `F_Z` the anti-diagonal flip, column `c` of an N x K matrix holds
//! antenna `k = c - K̃` and row `i` holds element `(n, m)`; the flipped row
//! `N - 1 - i` holds `(-n, -m)` and the flipped column `K - 1 - c` holds `-k`.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::ComplexMatrix;

/// `B = A ⊙ (A F_K)`: `[B]_{i,k} = [A]_{i,k} [A]_{i,-k}`. Depends on the
/// range only.
pub fn transform_b(a: &ComplexMatrix) -> ComplexMatrix {
    let k = a.ncols();
    DMatrix::from_fn(a.nrows(), k, |i, c| a[(i, c)] * a[(i, k - 1 - c)])
}

/// `C = A ⊙ (F_N A* F_K)`: `[C]_{i,k} = [A]_{i,k} conj([A]_{i_f,-k})`.
/// Depends on the direction only, up to a per-column phase.
pub fn transform_c(a: &ComplexMatrix) -> ComplexMatrix {
    let (n, k) = a.shape();
    DMatrix::from_fn(n, k, |i, c| a[(i, c)] * a[(n - 1 - i, k - 1 - c)].conj())
}

/// `D = A ⊙ (F_N A*)`: `[D]_{i,k} = [A]_{i,k} conj([A]_{i_f,k})`.
pub fn transform_d(a: &ComplexMatrix) -> ComplexMatrix {
    let n = a.nrows();
    DMatrix::from_fn(n, a.ncols(), |i, c| a[(i, c)] * a[(n - 1 - i, c)].conj())
}

/// RIS axis along which adjacent elements are paired.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Axis {
    X,
    Y,
}

/// Row pairs `(i, i_x = i + N_y)` or `(i, i_y = i + 1)` of adjacent RIS
/// elements, as zero-based row indices.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ShiftPairs {
    pub axis: Axis,
    pub kept_rows: Vec<usize>,
    pub shifted_rows: Vec<usize>,
}

impl ShiftPairs {
    /// `(N_x - 1) N_y` pairs: element `(n, m)` against `(n + 1, m)`.
    pub fn x_axis(ris_x: usize, ris_y: usize) -> Self {
        let kept_rows: Vec<usize> = (0..(ris_x - 1) * ris_y).collect();
        let shifted_rows = kept_rows.iter().map(|i| i + ris_y).collect();
        Self {
            axis: Axis::X,
            kept_rows,
            shifted_rows,
        }
    }

    /// `N_x (N_y - 1)` pairs: element `(n, m)` against `(n, m + 1)`.
    pub fn y_axis(ris_x: usize, ris_y: usize) -> Self {
        let kept_rows: Vec<usize> = (0..ris_x)
            .flat_map(|block| (0..ris_y - 1).map(move |j| block * ris_y + j))
            .collect();
        let shifted_rows = kept_rows.iter().map(|i| i + 1).collect();
        Self {
            axis: Axis::Y,
            kept_rows,
            shifted_rows,
        }
    }

    pub fn len(&self) -> usize {
        self.kept_rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.kept_rows.is_empty()
    }

    /// `(J₁ x, J₂ x)` for column `col` of `m`.
    pub fn slices(&self, m: &ComplexMatrix, col: usize) -> (Vec<Complex64>, Vec<Complex64>) {
        let pick = |rows: &[usize]| rows.iter().map(|&i| m[(i, col)]).collect();
        (pick(&self.kept_rows), pick(&self.shifted_rows))
    }
}
