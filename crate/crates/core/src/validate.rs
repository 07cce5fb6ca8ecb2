//! Self-check of the model and estimator invariants at small dimensions.

use nalgebra::DMatrix;
use num_complex::Complex64;

use crate::channel::{
    khatri_rao, pilot_matrix, ris_bs_channel, ris_profiles, ris_ue_channel, ChannelMode, ComplexMatrix,
};
use crate::estimator::{
    distance_shift, estimate_from_channel, orientation_x_shift, orientation_y_shift, tls_phase_ratio, transform_b,
    transform_c, transform_d, x_shift, y_shift, ShiftPairs,
};
use crate::geometry::{Pose, SystemConfig};
use crate::recovery::{pinv_full_rank, pinv_hbar, RecoveryOperator};

pub const IDENTITY_TOLERANCE: f64 = 1e-12;
pub const PINV_TOLERANCE: f64 = 1e-10;
pub const ORACLE_TOLERANCE: f64 = 1e-6;

/// Deliberate faults for checking that the suite detects errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct FaultInjection {
    /// Flip the sign of the phase of the predicted `δ_{r,k}`.
    pub distance_sign: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CheckResult {
    pub name: String,
    pub passed: bool,
    /// Largest observed deviation.
    pub deviation: f64,
    pub tolerance: f64,
}

impl std::fmt::Display for CheckResult {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(
            f,
            "[{}] {} (max deviation {:.3e}, tolerance {:.0e})",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.deviation,
            self.tolerance
        )
    }
}

fn check(name: String, deviation: f64, tolerance: f64) -> CheckResult {
    CheckResult {
        name,
        passed: deviation.is_finite() && deviation <= tolerance,
        deviation,
        tolerance,
    }
}

fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn flip_rows(m: &ComplexMatrix) -> ComplexMatrix {
    let n = m.nrows();
    DMatrix::from_fn(n, m.ncols(), |i, c| m[(n - 1 - i, c)])
}

fn flip_cols(m: &ComplexMatrix) -> ComplexMatrix {
    let k = m.ncols();
    DMatrix::from_fn(m.nrows(), k, |i, c| m[(i, k - 1 - c)])
}

/// `max |shifted - kept · δ(k)|` over all columns and pairs.
fn row_shift_deviation(m: &ComplexMatrix, pairs: &ShiftPairs, k_half: i64, delta: impl Fn(i64) -> Complex64) -> f64 {
    let mut worst: f64 = 0.0;
    for c in 0..m.ncols() {
        let d = delta(c as i64 - k_half);
        let (kept, shifted) = pairs.slices(m, c);
        for (u, v) in kept.iter().zip(&shifted) {
            worst = worst.max((v - u * d).norm());
        }
    }
    worst
}

fn validation_configs() -> Vec<SystemConfig> {
    [(7, 7), (11, 11)]
        .into_iter()
        .map(|(side, k)| SystemConfig {
            ue_antennas: k,
            ..SystemConfig::with_square_ris(side)
        })
        .collect()
}

fn validation_poses() -> [Pose; 3] {
    [
        Pose::from_degrees(3.0, 60.0, 40.0, 120.0, 30.0),
        Pose::from_degrees(1.5, 150.0, 70.0, 20.0, 75.0),
        Pose::from_degrees(7.5, 20.0, 15.0, 160.0, 50.0),
    ]
}

fn transform_checks(cfg: &SystemConfig, faults: FaultInjection, out: &mut Vec<CheckResult>) {
    let tag = format!("N={} K={}", cfg.ris_elements(), cfg.ue_antennas);
    let k_half = cfg.k_half();
    let x_pairs = ShiftPairs::x_axis(cfg.ris_x, cfg.ris_y);
    let y_pairs = ShiftPairs::y_axis(cfg.ris_x, cfg.ris_y);
    let (mut dist, mut bsym, mut cshift, mut csym, mut dshift, mut dsym) = (0f64, 0f64, 0f64, 0f64, 0f64, 0f64);
    for pose in validation_poses() {
        let a = ris_ue_channel(&pose, cfg, ChannelMode::Fresnel);
        let b = transform_b(&a);
        let c = transform_c(&a);
        let d = transform_d(&a);

        for k in -k_half..k_half {
            let col = (k + k_half) as usize;
            let mut delta = distance_shift(k, pose.r, cfg);
            if faults.distance_sign {
                delta = delta.conj();
            }
            for i in 0..b.nrows() {
                dist = dist.max((b[(i, col + 1)] - b[(i, col)] * delta).norm());
            }
        }
        bsym = bsym.max(max_abs_diff(&flip_cols(&b), &b));

        let (ex, ey) = (x_shift(pose.theta, pose.phi, cfg), y_shift(pose.theta, pose.phi, cfg));
        cshift = cshift.max(row_shift_deviation(&c, &x_pairs, k_half, |_| ex));
        cshift = cshift.max(row_shift_deviation(&c, &y_pairs, k_half, |_| ey));
        csym = csym.max(max_abs_diff(&flip_cols(&flip_rows(&c.conjugate())), &c));

        let (r, th, ph, ps, ga) = (pose.r, pose.theta, pose.phi, pose.psi, pose.gamma);
        dshift = dshift.max(row_shift_deviation(&d, &x_pairs, k_half, |k| {
            orientation_x_shift(k, r, th, ph, ps, ga, cfg)
        }));
        dshift = dshift.max(row_shift_deviation(&d, &y_pairs, k_half, |k| {
            orientation_y_shift(k, r, th, ph, ps, ga, cfg)
        }));
        dsym = dsym.max(max_abs_diff(&flip_rows(&d.conjugate()), &d));
    }
    out.push(check(
        format!("distance shift identity b_(k+1) = b_k delta_r,k ({tag})"),
        dist,
        IDENTITY_TOLERANCE,
    ));
    out.push(check(
        format!("B column-flip symmetry ({tag})"),
        bsym,
        IDENTITY_TOLERANCE,
    ));
    out.push(check(
        format!("C row-shift identities delta_ex, delta_ey ({tag})"),
        cshift,
        IDENTITY_TOLERANCE,
    ));
    out.push(check(
        format!("C conjugate centrosymmetry ({tag})"),
        csym,
        IDENTITY_TOLERANCE,
    ));
    out.push(check(
        format!("D row-shift identities delta_gx,k, delta_gy,k ({tag})"),
        dshift,
        IDENTITY_TOLERANCE,
    ));
    out.push(check(
        format!("D conjugate row-flip symmetry ({tag})"),
        dsym,
        IDENTITY_TOLERANCE,
    ));
}

fn operator_checks(cfg: &SystemConfig, out: &mut Vec<CheckResult>) {
    let n = cfg.ris_elements();
    let tag = format!("N={n}");
    let h = ris_bs_channel(cfg);
    for mult in [1, 2] {
        let c = SystemConfig {
            configurations: mult * n,
            ..cfg.clone()
        };
        let phi = ris_profiles(&c).expect("P >= N");
        let gram = phi.adjoint() * &phi;
        let target = ComplexMatrix::identity(n, n) * Complex64::new(c.configurations as f64, 0.0);
        out.push(check(
            format!("Phi^H Phi = P I (P={}, {tag})", c.configurations),
            max_abs_diff(&gram, &target) / c.configurations as f64,
            IDENTITY_TOLERANCE,
        ));
        let hbar = khatri_rao(&phi, &h).expect("shapes agree");
        let dev = match (pinv_hbar(&hbar, true), pinv_full_rank(&hbar, "H̄")) {
            (Ok(s), Ok(g)) => max_abs_diff(&s, &g),
            _ => f64::INFINITY,
        };
        out.push(check(
            format!("structured vs SVD pinv(H_bar) (P={}, {tag})", c.configurations),
            dev,
            PINV_TOLERANCE,
        ));
    }

    let s = pilot_matrix(cfg).expect("L >= K");
    let gram = &s * s.adjoint();
    let target = ComplexMatrix::identity(cfg.ue_antennas, cfg.ue_antennas)
        * Complex64::new(cfg.transmit_power / cfg.ue_antennas as f64, 0.0);
    out.push(check(
        format!("S S^H = (P_T/K) I (K={})", cfg.ue_antennas),
        max_abs_diff(&gram, &target) / target[(0, 0)].re,
        IDENTITY_TOLERANCE,
    ));

    let hbar = khatri_rao(&ris_profiles(cfg).expect("P >= N"), &h).expect("shapes agree");
    let op = RecoveryOperator::new(&hbar, &s, true);
    let mut worst: f64 = 0.0;
    for mode in [ChannelMode::Exact, ChannelMode::Fresnel] {
        for pose in validation_poses() {
            let a = ris_ue_channel(&pose, cfg, mode);
            let y = &hbar * &a * &s;
            worst = worst.max(match op.as_ref().map(|o| o.recover(&y)) {
                Ok(Ok(rec)) => max_abs_diff(&rec.addot, &a),
                _ => f64::INFINITY,
            });
        }
    }
    out.push(check(
        format!("noiseless channel recovery ({tag})"),
        worst,
        PINV_TOLERANCE,
    ));
}

fn oracle_checks(cfg: &SystemConfig, out: &mut Vec<CheckResult>) {
    let tag = format!("N={} K={}", cfg.ris_elements(), cfg.ue_antennas);
    let mut worst: f64 = 0.0;
    for pose in validation_poses() {
        let a = ris_ue_channel(&pose, cfg, ChannelMode::Fresnel);
        worst = worst.max(match estimate_from_channel(&a, cfg) {
            Ok(est) => {
                let got = est.pose().as_array();
                let truth = pose.as_array();
                let range = ((got[0] - truth[0]) / truth[0]).abs();
                (1..5).map(|i| (got[i] - truth[i]).abs()).fold(range, f64::max)
            }
            Err(_) => f64::INFINITY,
        });
    }
    out.push(check(
        format!("zero-noise pose oracle ({tag})"),
        worst,
        ORACLE_TOLERANCE,
    ));
}

fn tls_check(out: &mut Vec<CheckResult>) {
    let ratio = Complex64::from_polar(1.0, 0.7);
    let u: Vec<Complex64> = (0..16)
        .map(|i| Complex64::from_polar(1.0 + i as f64 * 0.1, i as f64))
        .collect();
    let scale = Complex64::new(-0.3, 2.0);
    let v: Vec<Complex64> = u.iter().map(|x| x * ratio).collect();
    let us: Vec<Complex64> = u.iter().map(|x| x * scale).collect();
    let vs: Vec<Complex64> = v.iter().map(|x| x * scale).collect();
    let dev = match (tls_phase_ratio(&u, &v), tls_phase_ratio(&us, &vs)) {
        (Ok(a), Ok(b)) => (a - ratio).norm().max((b - ratio).norm()),
        _ => f64::INFINITY,
    };
    out.push(check("TLS ratio on exact rank-1 pair".into(), dev, IDENTITY_TOLERANCE));
}

/// Runs every invariant at N ∈ {49, 121}, K ∈ {7, 11}.
pub fn run_invariants(faults: FaultInjection) -> Vec<CheckResult> {
    let mut out = Vec::new();
    tls_check(&mut out);
    for cfg in validation_configs() {
        transform_checks(&cfg, faults, &mut out);
        operator_checks(&cfg, &mut out);
        oracle_checks(&cfg, &mut out);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clean_build_passes() {
        let results = run_invariants(FaultInjection::default());
        for r in &results {
            assert!(r.passed, "{r}");
        }
    }

    #[test]
    fn injected_distance_fault_is_detected() {
        let results = run_invariants(FaultInjection { distance_sign: true });
        let failed: Vec<_> = results.iter().filter(|r| !r.passed).collect();
        assert!(!failed.is_empty());
        assert!(failed.iter().all(|r| r.name.starts_with("distance shift identity")));
    }
}
