//! Array geometry: RIS grid indexing, UE antenna placement, near-field range
//! bounds and random pose sampling.
//!
//! The RIS is a UPA in the `xy` plane centred at the origin with
//! `N = N_x * N_y` elements, `N_x = 2*Ñ_x + 1` and `N_y = 2*Ñ_y + 1`. Element
//! `(n, m)` sits at `[n*d_x, m*d_y, 0]`. The UE carries a ULA of
//! `K = 2*K̃ + 1` antennas centred on its location `r*e(θ, φ)` and oriented
//! along `g(ψ, γ)`.
//!
//! All angles are radians. Conversion from degrees happens at the CLI boundary.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::Vector3;
use rand::Rng;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("RIS grid index ({n}, {m}) outside [-{nx_half}, {nx_half}] x [-{ny_half}, {ny_half}]")]
    GridIndexOutOfRange { n: i64, m: i64, nx_half: i64, ny_half: i64 },
    #[error("RIS linear index {index} outside [1, {count}]")]
    LinearIndexOutOfRange { index: usize, count: usize },
    #[error("UE antenna index {k} outside [-{k_half}, {k_half}]")]
    AntennaIndexOutOfRange { k: i64, k_half: i64 },
    #[error("invalid system configuration: {0}")]
    InvalidConfig(String),
}

/// Array and waveform constants shared by every stage of the pipeline.
#[derive(Debug, Clone, PartialEq)]
pub struct SystemConfig {
    /// BS antenna count `M`.
    pub bs_antennas: usize,
    /// UE antenna count `K` (odd, at least 3).
    pub ue_antennas: usize,
    /// RIS elements along x, `N_x` (odd).
    pub ris_x: usize,
    /// RIS elements along y, `N_y` (odd).
    pub ris_y: usize,
    /// Number of RIS phase configurations `P`.
    pub configurations: usize,
    /// Transmissions per configuration `L`.
    pub transmissions: usize,
    /// Carrier wavelength in meters.
    pub wavelength: f64,
    /// UE element spacing `d_u` in meters.
    pub ue_spacing: f64,
    /// BS element spacing `d_b` in meters.
    pub bs_spacing: f64,
    /// RIS x spacing `d_x` in meters.
    pub ris_spacing_x: f64,
    /// RIS y spacing `d_y` in meters.
    pub ris_spacing_y: f64,
    /// Total transmit power `P_T` in watts.
    pub transmit_power: f64,
    /// Arrival angle at the BS, `θ_B`.
    pub bs_arrival: f64,
    /// Departure azimuth from the RIS towards the BS, `θ_R`.
    pub ris_departure_azimuth: f64,
    /// Departure elevation from the RIS towards the BS, `φ_R`.
    pub ris_departure_elevation: f64,
}

impl Default for SystemConfig {
    /// M = 9, K = 11, N = 11 x 11, P = N, L = 50, λ = 0.33 m, d_u = d_b = λ/2,
    /// d_x = d_y = λ/4, P_T = 40 dBm; far-field angles 30°, 40°, 50°.
    fn default() -> Self {
        let wavelength = 0.33;
        Self {
            bs_antennas: 9,
            ue_antennas: 11,
            ris_x: 11,
            ris_y: 11,
            configurations: 121,
            transmissions: 50,
            wavelength,
            ue_spacing: wavelength / 2.0,
            bs_spacing: wavelength / 2.0,
            ris_spacing_x: wavelength / 4.0,
            ris_spacing_y: wavelength / 4.0,
            transmit_power: dbm_to_watts(40.0),
            bs_arrival: 30f64.to_radians(),
            ris_departure_azimuth: 40f64.to_radians(),
            ris_departure_elevation: 50f64.to_radians(),
        }
    }
}

impl SystemConfig {
    /// Default configuration with a square `side x side` RIS and `P = N`.
    pub fn with_square_ris(side: usize) -> Self {
        Self {
            ris_x: side,
            ris_y: side,
            configurations: side * side,
            ..Self::default()
        }
    }

    /// Total RIS element count `N`.
    pub fn ris_elements(&self) -> usize {
        self.ris_x * self.ris_y
    }

    pub fn k_half(&self) -> i64 {
        (self.ue_antennas as i64 - 1) / 2
    }

    pub fn nx_half(&self) -> i64 {
        (self.ris_x as i64 - 1) / 2
    }

    pub fn ny_half(&self) -> i64 {
        (self.ris_y as i64 - 1) / 2
    }

    /// Column of `A` holding UE antenna `k`.
    ///
    /// Every N x K matrix in this crate stores antenna `k ∈ [-K̃, K̃]` in
    /// zero-based column `k + K̃`, so antenna `-k` lives in column
    /// `K - 1 - (k + K̃)`.
    pub fn antenna_column(&self, k: i64) -> Result<usize, GeometryError> {
        let k_half = self.k_half();
        if k.abs() > k_half {
            return Err(GeometryError::AntennaIndexOutOfRange { k, k_half });
        }
        Ok((k + k_half) as usize)
    }

    /// Checks every structural invariant the estimator relies on.
    pub fn validate(&self) -> Result<(), GeometryError> {
        let bad = |msg: String| Err(GeometryError::InvalidConfig(msg));
        if self.bs_antennas == 0 {
            return bad("M must be positive".into());
        }
        if self.ue_antennas < 3 || self.ue_antennas.is_multiple_of(2) {
            return bad(format!("K must be odd and >= 3, got {}", self.ue_antennas));
        }
        for (name, v) in [("N_x", self.ris_x), ("N_y", self.ris_y)] {
            if v < 3 || v.is_multiple_of(2) {
                return bad(format!("{name} must be odd and >= 3, got {v}"));
            }
        }
        if self.configurations < self.ris_elements() {
            return bad(format!(
                "P = {} is smaller than N = {}; the measurement operator is not left-invertible",
                self.configurations,
                self.ris_elements()
            ));
        }
        if self.transmissions < self.ue_antennas {
            return bad(format!(
                "L = {} is smaller than K = {}; the pilot matrix is not right-invertible",
                self.transmissions, self.ue_antennas
            ));
        }
        let positive = [
            ("lambda", self.wavelength),
            ("d_u", self.ue_spacing),
            ("d_b", self.bs_spacing),
            ("d_x", self.ris_spacing_x),
            ("d_y", self.ris_spacing_y),
            ("P_T", self.transmit_power),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be finite and positive, got {v}"));
            }
        }
        // Beyond λ/4 the x/y row ratios of C wrap past ±π.
        let quarter = self.wavelength / 4.0 * (1.0 + 1e-12);
        if self.ris_spacing_x > quarter || self.ris_spacing_y > quarter {
            return bad(format!(
                "RIS spacing ({}, {}) exceeds lambda/4 = {}",
                self.ris_spacing_x,
                self.ris_spacing_y,
                self.wavelength / 4.0
            ));
        }
        for (name, v) in [
            ("theta_B", self.bs_arrival),
            ("theta_R", self.ris_departure_azimuth),
            ("phi_R", self.ris_departure_elevation),
        ] {
            if !v.is_finite() {
                return bad(format!("{name} must be finite"));
            }
        }
        Ok(())
    }
}

pub fn dbm_to_watts(dbm: f64) -> f64 {
    10f64.powf((dbm - 30.0) / 10.0)
}

pub fn watts_to_dbm(watts: f64) -> f64 {
    10.0 * watts.log10() + 30.0
}

/// UE location and array orientation. Angles in radians, range in meters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Pose {
    pub r: f64,
    /// Azimuth of the location.
    pub theta: f64,
    /// Elevation of the location.
    pub phi: f64,
    /// Azimuth of the array orientation.
    pub psi: f64,
    /// Elevation of the array orientation.
    pub gamma: f64,
}

impl Pose {
    pub fn new(r: f64, theta: f64, phi: f64, psi: f64, gamma: f64) -> Self {
        Self {
            r,
            theta,
            phi,
            psi,
            gamma,
        }
    }

    pub fn from_degrees(r: f64, theta: f64, phi: f64, psi: f64, gamma: f64) -> Self {
        Self::new(
            r,
            theta.to_radians(),
            phi.to_radians(),
            psi.to_radians(),
            gamma.to_radians(),
        )
    }

    /// `[r, θ, φ, ψ, γ]`, the order used by every per-parameter report.
    pub fn as_array(&self) -> [f64; 5] {
        [self.r, self.theta, self.phi, self.psi, self.gamma]
    }

    /// True when `r > 0`, `θ, ψ ∈ (0, π)` and `φ, γ ∈ (0, π/2)`.
    pub fn is_valid(&self) -> bool {
        let open = |v: f64, hi: f64| v > 0.0 && v < hi;
        self.r > 0.0
            && self.r.is_finite()
            && open(self.theta, PI)
            && open(self.psi, PI)
            && open(self.phi, FRAC_PI_2)
            && open(self.gamma, FRAC_PI_2)
    }

    /// Location of the UE array centre, `r * e(θ, φ)`.
    pub fn location(&self) -> Vector3<f64> {
        unit_direction(self.theta, self.phi) * self.r
    }

    /// Array axis `g(ψ, γ)`.
    pub fn orientation(&self) -> Vector3<f64> {
        unit_direction(self.psi, self.gamma)
    }
}

/// Names of the pose parameters in report order.
pub const POSE_PARAMETERS: [&str; 5] = ["r", "theta", "phi", "psi", "gamma"];

/// `[cosθ cosφ, sinθ cosφ, sinφ]`; serves both `e(θ, φ)` and `g(ψ, γ)`.
pub fn unit_direction(azimuth: f64, elevation: f64) -> Vector3<f64> {
    let (sa, ca) = azimuth.sin_cos();
    let (se, ce) = elevation.sin_cos();
    Vector3::new(ca * ce, sa * ce, se)
}

/// Position of RIS element `(n, m)` on the grid.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub struct GridIndex {
    pub n: i64,
    pub m: i64,
}

impl GridIndex {
    pub fn new(n: i64, m: i64) -> Self {
        Self { n, m }
    }

    pub fn check(&self, cfg: &SystemConfig) -> Result<(), GeometryError> {
        let (nx_half, ny_half) = (cfg.nx_half(), cfg.ny_half());
        if self.n.abs() > nx_half || self.m.abs() > ny_half {
            return Err(GeometryError::GridIndexOutOfRange {
                n: self.n,
                m: self.m,
                nx_half,
                ny_half,
            });
        }
        Ok(())
    }

    /// Mirror image `(-n, -m)` through the RIS centre.
    pub fn flipped(&self) -> Self {
        Self::new(-self.n, -self.m)
    }
}

/// `s_{n,m} = [n d_x, m d_y, 0]`.
pub fn ris_element_position(g: GridIndex, cfg: &SystemConfig) -> Result<Vector3<f64>, GeometryError> {
    g.check(cfg)?;
    Ok(element_position_unchecked(g, cfg))
}

pub(crate) fn element_position_unchecked(g: GridIndex, cfg: &SystemConfig) -> Vector3<f64> {
    Vector3::new(g.n as f64 * cfg.ris_spacing_x, g.m as f64 * cfg.ris_spacing_y, 0.0)
}

/// `q_k = r e(θ, φ) + k d_u g(ψ, γ)` for `k ∈ [-K̃, K̃]`.
pub fn ue_antenna_position(pose: &Pose, k: i64, cfg: &SystemConfig) -> Result<Vector3<f64>, GeometryError> {
    cfg.antenna_column(k)?;
    Ok(pose.location() + pose.orientation() * (k as f64 * cfg.ue_spacing))
}

/// One-based linear index `i = (n + Ñ_x) N_y + (m + Ñ_y) + 1`.
pub fn linear_index(g: GridIndex, cfg: &SystemConfig) -> Result<usize, GeometryError> {
    g.check(cfg)?;
    Ok(((g.n + cfg.nx_half()) * cfg.ris_y as i64 + (g.m + cfg.ny_half()) + 1) as usize)
}

/// Linear index of the mirrored element `(-n, -m)`, computed as `N - i + 1`.
pub fn flipped_index(g: GridIndex, cfg: &SystemConfig) -> Result<usize, GeometryError> {
    let i = linear_index(g, cfg)?;
    Ok(cfg.ris_elements() - i + 1)
}

/// Inverse of [`linear_index`].
pub fn grid_index(i: usize, cfg: &SystemConfig) -> Result<GridIndex, GeometryError> {
    let count = cfg.ris_elements();
    if i == 0 || i > count {
        return Err(GeometryError::LinearIndexOutOfRange { index: i, count });
    }
    let zero = (i - 1) as i64;
    let ny = cfg.ris_y as i64;
    Ok(GridIndex::new(zero / ny - cfg.nx_half(), zero % ny - cfg.ny_half()))
}

/// Iterates all RIS elements in linear-index order.
pub fn grid(cfg: &SystemConfig) -> impl Iterator<Item = GridIndex> {
    let (nx_half, ny_half) = (cfg.nx_half(), cfg.ny_half());
    (-nx_half..=nx_half).flat_map(move |n| (-ny_half..=ny_half).map(move |m| GridIndex::new(n, m)))
}

/// Near-field range `[0.62 λ^{-1/2} D^{3/2}, 2 D² / λ]` with `D² = a_R² + b_R²`.
pub fn near_field_bounds(cfg: &SystemConfig) -> (f64, f64) {
    let a = 2.0 * cfg.nx_half() as f64 * cfg.ris_spacing_x;
    let b = 2.0 * cfg.ny_half() as f64 * cfg.ris_spacing_y;
    let diag_sq = a * a + b * b;
    let r_min = 0.62 * cfg.wavelength.powf(-0.5) * diag_sq.powf(0.75);
    let r_max = 2.0 * diag_sq / cfg.wavelength;
    (r_min, r_max)
}

/// Angular sampling ranges in degrees: θ, φ, ψ, γ.
pub const THETA_RANGE_DEG: (f64, f64) = (10.0, 170.0);
pub const PHI_RANGE_DEG: (f64, f64) = (10.0, 80.0);
pub const PSI_RANGE_DEG: (f64, f64) = (15.0, 170.0);
pub const GAMMA_RANGE_DEG: (f64, f64) = (15.0, 80.0);

/// Draws a pose uniformly over the near-field range and the angular sampling
/// ranges. Draw order is `θ, φ, ψ, γ, r`.
pub fn sample_pose<R: Rng + ?Sized>(rng: &mut R, cfg: &SystemConfig) -> Pose {
    let mut deg = |(lo, hi): (f64, f64)| rng.random_range(lo..=hi).to_radians();
    let theta = deg(THETA_RANGE_DEG);
    let phi = deg(PHI_RANGE_DEG);
    let psi = deg(PSI_RANGE_DEG);
    let gamma = deg(GAMMA_RANGE_DEG);
    let (r_min, r_max) = near_field_bounds(cfg);
    let r = rng.random_range(r_min..=r_max);
    Pose::new(r, theta, phi, psi, gamma)
}
