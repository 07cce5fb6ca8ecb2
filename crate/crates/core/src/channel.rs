//! Deterministic channel synthesis and noisy observations.
//!
//! Matrices produced here:
//!
//! | symbol | shape    | meaning                                   |
//! |--------|----------|-------------------------------------------|
//! | `A`    | N x K    | near-field LoS channel UE → RIS           |
//! | `H`    | M x N    | far-field LoS channel RIS → BS (rank one) |
//! | `Φ`    | P x N    | RIS phase configurations (DFT rows)       |
//! | `S`    | K x L    | pilot sequence with `S Sᴴ = (P_T/K) I`    |
//! | `H̄`    | MP x N   | stacked operator `Φ ∘ H`                  |
//! | `Y`    | MP x L   | stacked observations `H̄ A S + W̄`          |

use std::f64::consts::PI;

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::Rng;
use rand_distr::StandardNormal;
use thiserror::Error;

use crate::geometry::{element_position_unchecked, grid, Pose, SystemConfig};

/// Dense complex matrix used for every channel quantity.
pub type ComplexMatrix = DMatrix<Complex64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ChannelError {
    #[error("P = {configurations} RIS configurations cannot resolve N = {elements} elements")]
    TooFewConfigurations { configurations: usize, elements: usize },
    #[error("L = {transmissions} transmissions cannot carry K = {antennas} orthogonal pilots")]
    PilotTooShort { transmissions: usize, antennas: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("noiseless signal H̄AS is identically zero; SNR is undefined")]
    ZeroSignal,
}

/// How the UE-RIS path lengths are evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum ChannelMode {
    /// Euclidean element-to-antenna distances.
    #[default]
    Exact,
    /// Second-order (Fresnel) expansion of the distances. The estimator's
    /// shift identities hold exactly on this model.
    Fresnel,
}

impl ChannelMode {
    pub fn as_str(&self) -> &'static str {
        match self {
            ChannelMode::Exact => "exact",
            ChannelMode::Fresnel => "fresnel",
        }
    }
}

impl std::str::FromStr for ChannelMode {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "exact" => Ok(ChannelMode::Exact),
            "fresnel" => Ok(ChannelMode::Fresnel),
            other => Err(format!("unknown channel mode '{other}' (expected exact|fresnel)")),
        }
    }
}

impl std::fmt::Display for ChannelMode {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Path-length excess `r^k_{n,m} - r` for every (element, antenna) pair,
/// laid out like `A`.
pub fn path_length_excess(pose: &Pose, cfg: &SystemConfig, mode: ChannelMode) -> DMatrix<f64> {
    let e = pose.location() / pose.r;
    let g = pose.orientation();
    let e_dot_g = e.dot(&g);
    let k_half = cfg.k_half();
    let n = cfg.ris_elements();
    let mut excess = DMatrix::zeros(n, cfg.ue_antennas);
    for (row, idx) in grid(cfg).enumerate() {
        let s = element_position_unchecked(idx, cfg);
        for k in -k_half..=k_half {
            let col = (k + k_half) as usize;
            let kd = k as f64 * cfg.ue_spacing;
            excess[(row, col)] = match mode {
                ChannelMode::Exact => {
                    let q = pose.location() + g * kd;
                    (q - s).norm() - pose.r
                }
                ChannelMode::Fresnel => {
                    (kd * kd + s.norm_squared()) / (2.0 * pose.r) + kd * (e_dot_g - g.dot(&s) / pose.r) - e.dot(&s)
                }
            };
        }
    }
    excess
}

/// UE → RIS channel `A` (N x K): `[A]_{i,k} = exp(-j 2π (r^k_{n,m} - r) / λ)`.
pub fn ris_ue_channel(pose: &Pose, cfg: &SystemConfig, mode: ChannelMode) -> ComplexMatrix {
    let scale = -2.0 * PI / cfg.wavelength;
    path_length_excess(pose, cfg, mode).map(|d| Complex64::from_polar(1.0, scale * d))
}

/// Far-field steering vector `h(T, ζ)` with entries `exp(j 2π (T̃ - t) ζ / λ)`.
pub fn far_field_steering(len: usize, zeta: f64, wavelength: f64) -> Vec<Complex64> {
    let half = (len as f64 - 1.0) / 2.0;
    (0..len)
        .map(|t| Complex64::from_polar(1.0, 2.0 * PI * (half - t as f64) * zeta / wavelength))
        .collect()
}

/// RIS → BS channel `H = h_b (h_rx ⊗ h_ry)ᴴ` (M x N).
pub fn ris_bs_channel(cfg: &SystemConfig) -> ComplexMatrix {
    let (theta_r, phi_r) = (cfg.ris_departure_azimuth, cfg.ris_departure_elevation);
    let h_b = far_field_steering(cfg.bs_antennas, cfg.bs_spacing * cfg.bs_arrival.sin(), cfg.wavelength);
    let h_rx = far_field_steering(
        cfg.ris_x,
        cfg.ris_spacing_x * theta_r.cos() * phi_r.cos(),
        cfg.wavelength,
    );
    let h_ry = far_field_steering(
        cfg.ris_y,
        cfg.ris_spacing_y * theta_r.sin() * phi_r.cos(),
        cfg.wavelength,
    );
    let h_r: Vec<Complex64> = h_rx.iter().flat_map(|x| h_ry.iter().map(move |y| x * y)).collect();
    DMatrix::from_fn(cfg.bs_antennas, cfg.ris_elements(), |b, i| h_b[b] * h_r[i].conj())
}

/// RIS configuration matrix `[Φ]_{p,i} = exp(-j 2π (p-1)(i-1) / N)` (P x N).
pub fn ris_profiles(cfg: &SystemConfig) -> Result<ComplexMatrix, ChannelError> {
    let n = cfg.ris_elements();
    let p = cfg.configurations;
    if p < n {
        return Err(ChannelError::TooFewConfigurations {
            configurations: p,
            elements: n,
        });
    }
    Ok(DMatrix::from_fn(p, n, |row, col| {
        // Reduce the exponent mod N before scaling to keep the phase exact.
        let turns = ((row * col) % n) as f64 / n as f64;
        Complex64::from_polar(1.0, -2.0 * PI * turns)
    }))
}

/// Pilot matrix `S = sqrt(P_T / (K L))` times the first K rows of the L-point
/// DFT matrix (K x L).
pub fn pilot_matrix(cfg: &SystemConfig) -> Result<ComplexMatrix, ChannelError> {
    let (k, l) = (cfg.ue_antennas, cfg.transmissions);
    if l < k {
        return Err(ChannelError::PilotTooShort {
            transmissions: l,
            antennas: k,
        });
    }
    let amp = (cfg.transmit_power / (k * l) as f64).sqrt();
    Ok(DMatrix::from_fn(k, l, |row, col| {
        let turns = ((row * col) % l) as f64 / l as f64;
        Complex64::from_polar(amp, -2.0 * PI * turns)
    }))
}

/// Column-wise Kronecker product `Φ ∘ H` (MP x N). Block row `p` equals
/// `H diag([Φ]_{p,:})`.
pub fn khatri_rao(phi: &ComplexMatrix, h: &ComplexMatrix) -> Result<ComplexMatrix, ChannelError> {
    if phi.ncols() != h.ncols() {
        return Err(ChannelError::DimensionMismatch(format!(
            "Khatri-Rao factors have {} and {} columns",
            phi.ncols(),
            h.ncols()
        )));
    }
    let m = h.nrows();
    Ok(DMatrix::from_fn(phi.nrows() * m, h.ncols(), |row, col| {
        phi[(row / m, col)] * h[(row % m, col)]
    }))
}

/// Noise standard deviation for a target SNR.
///
/// SNR is the mean received signal power per scalar observation,
/// `‖H̄AS‖²_F / (M P L)`, divided by the per-entry noise variance `σ²`.
/// `snr_db = +∞` yields `σ = 0`.
pub fn noise_sigma_for_snr(
    hbar: &ComplexMatrix,
    a: &ComplexMatrix,
    s: &ComplexMatrix,
    snr_db: f64,
) -> Result<f64, ChannelError> {
    check_signal_dims(hbar, a, s)?;
    let signal = hbar * (a * s);
    noise_sigma_for_signal(&signal, snr_db)
}

pub(crate) fn noise_sigma_for_signal(signal: &ComplexMatrix, snr_db: f64) -> Result<f64, ChannelError> {
    let power = signal.norm_squared();
    if power == 0.0 {
        return Err(ChannelError::ZeroSignal);
    }
    if snr_db == f64::INFINITY {
        return Ok(0.0);
    }
    let per_entry = power / signal.len() as f64;
    Ok((per_entry / 10f64.powf(snr_db / 10.0)).sqrt())
}

fn check_signal_dims(hbar: &ComplexMatrix, a: &ComplexMatrix, s: &ComplexMatrix) -> Result<(), ChannelError> {
    if hbar.ncols() != a.nrows() || a.ncols() != s.nrows() {
        return Err(ChannelError::DimensionMismatch(format!(
            "H̄ is {}x{}, A is {}x{}, S is {}x{}",
            hbar.nrows(),
            hbar.ncols(),
            a.nrows(),
            a.ncols(),
            s.nrows(),
            s.ncols()
        )));
    }
    Ok(())
}

/// Zero-mean circularly-symmetric complex Gaussian matrix with per-entry
/// variance `σ²` (each of the real and imaginary parts has variance `σ²/2`).
pub fn complex_gaussian<R: Rng + ?Sized>(rows: usize, cols: usize, sigma: f64, rng: &mut R) -> ComplexMatrix {
    let part = sigma / std::f64::consts::SQRT_2;
    let mut w = DMatrix::zeros(rows, cols);
    // Explicit column-major fill so the draw order is part of the contract.
    for col in 0..cols {
        for row in 0..rows {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            w[(row, col)] = Complex64::new(part * re, part * im);
        }
    }
    w
}

/// Stacked observations `Y = (Φ ∘ H) A S + W̄` (MP x L).
pub fn observe<R: Rng + ?Sized>(
    a: &ComplexMatrix,
    h: &ComplexMatrix,
    phi: &ComplexMatrix,
    s: &ComplexMatrix,
    sigma: f64,
    rng: &mut R,
) -> Result<ComplexMatrix, ChannelError> {
    let hbar = khatri_rao(phi, h)?;
    observe_stacked(&hbar, a, s, sigma, rng)
}

/// [`observe`] with a prebuilt `H̄`.
pub fn observe_stacked<R: Rng + ?Sized>(
    hbar: &ComplexMatrix,
    a: &ComplexMatrix,
    s: &ComplexMatrix,
    sigma: f64,
    rng: &mut R,
) -> Result<ComplexMatrix, ChannelError> {
    check_signal_dims(hbar, a, s)?;
    let signal = hbar * (a * s);
    Ok(add_noise(signal, sigma, rng))
}

pub(crate) fn add_noise<R: Rng + ?Sized>(signal: ComplexMatrix, sigma: f64, rng: &mut R) -> ComplexMatrix {
    if sigma == 0.0 {
        return signal;
    }
    let (rows, cols) = signal.shape();
    signal + complex_gaussian(rows, cols, sigma, rng)
}
