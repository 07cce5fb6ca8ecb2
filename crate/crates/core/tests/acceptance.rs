//! Acceptance suite. Prints one PASS/FAIL line per criterion and exits
//! non-zero if any criterion fails.
//!
//! Closed-form predictions are evaluated here from scratch rather than through
//! the library's own shift helpers.

use std::f64::consts::PI;
use std::panic::{catch_unwind, AssertUnwindSafe};
use std::time::{Duration, Instant};

use nalgebra::{DMatrix, Vector3};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use nfpose::channel::{khatri_rao, observe, pilot_matrix, ris_bs_channel, ris_profiles, ris_ue_channel};
use nfpose::cli::{run, Cli, Command, SweepArgs};
use nfpose::estimator::{estimate_from_channel, transform_b, transform_c, transform_d};
use nfpose::geometry::{near_field_bounds, sample_pose};
use nfpose::montecarlo::{run_sweep, NmseTable, SweepGrid, SweepSettings};
use nfpose::recovery::{pinv_hbar, recover_channel};
use nfpose::{estimate_pose, ChannelMode, ComplexMatrix, Pose, SystemConfig};

struct Outcome {
    passed: bool,
    detail: String,
}

fn outcome(passed: bool, detail: impl Into<String>) -> Outcome {
    Outcome {
        passed,
        detail: detail.into(),
    }
}

fn max_abs_diff(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    (a - b).iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn dir(az: f64, el: f64) -> Vector3<f64> {
    Vector3::new(az.cos() * el.cos(), az.sin() * el.cos(), el.sin())
}

/// Element position of row `i`, rows ordered `n`-major from `(-Ñx, -Ñy)`.
fn element(i: usize, cfg: &SystemConfig) -> Vector3<f64> {
    let n = (i / cfg.ris_y) as f64 - ((cfg.ris_x - 1) / 2) as f64;
    let m = (i % cfg.ris_y) as f64 - ((cfg.ris_y - 1) / 2) as f64;
    Vector3::new(n * cfg.ris_spacing_x, m * cfg.ris_spacing_y, 0.0)
}

fn cis(phase: f64) -> Complex64 {
    Complex64::from_polar(1.0, phase)
}

fn poses(count: usize, seed: u64, cfg: &SystemConfig) -> Vec<Pose> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..count).map(|_| sample_pose(&mut rng, cfg)).collect()
}

fn criterion_zero_noise() -> Outcome {
    let cfg = SystemConfig::default();
    let start = Instant::now();
    let h = ris_bs_channel(&cfg);
    let phi = ris_profiles(&cfg).unwrap();
    let hbar = khatri_rao(&phi, &h).unwrap();
    let s = pilot_matrix(&cfg).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(0);
    let (mut worst_r, mut worst_angle) = (0f64, 0f64);
    let mut failures = 0;
    for pose in poses(100, 2024, &cfg) {
        let a = ris_ue_channel(&pose, &cfg, ChannelMode::Fresnel);
        let y = observe(&a, &h, &phi, &s, 0.0, &mut rng).unwrap();
        match estimate_pose(&y, &hbar, &s, &cfg) {
            Ok(est) => {
                let got = est.pose().as_array();
                let truth = pose.as_array();
                worst_r = worst_r.max(((got[0] - truth[0]) / truth[0]).abs());
                for i in 1..5 {
                    worst_angle = worst_angle.max((got[i] - truth[i]).abs());
                }
            }
            Err(_) => failures += 1,
        }
    }
    let elapsed = start.elapsed();
    outcome(
        failures == 0 && worst_r < 1e-6 && worst_angle < 1e-6 && elapsed < Duration::from_secs(120),
        format!(
            "100 poses, max rel err r {worst_r:.2e}, max abs angle err {worst_angle:.2e} rad, {failures} failures, {:.1}s",
            elapsed.as_secs_f64()
        ),
    )
}

fn criterion_identities() -> Outcome {
    let mut worst = [0f64; 6];
    for (side, k) in [(7, 7), (7, 11), (11, 7), (11, 11)] {
        let cfg = SystemConfig {
            ue_antennas: k,
            ..SystemConfig::with_square_ris(side)
        };
        let k_half = (k - 1) as i64 / 2;
        let (lambda, du) = (cfg.wavelength, cfg.ue_spacing);
        let n = cfg.ris_elements();
        for pose in poses(5, 77 + side as u64 * 100 + k as u64, &cfg) {
            let a = ris_ue_channel(&pose, &cfg, ChannelMode::Fresnel);
            let (b, c, d) = (transform_b(&a), transform_c(&a), transform_d(&a));
            let e = dir(pose.theta, pose.phi);
            let g = dir(pose.psi, pose.gamma);
            let r = pose.r;

            for i in 0..n {
                let s = element(i, &cfg);
                for col in 0..k {
                    let kk = col as i64 - k_half;
                    let kd = kk as f64 * du;
                    // closed forms of the three transforms
                    let b_pred = cis(-4.0 * PI / lambda * ((kd * kd + s.norm_squared()) / (2.0 * r) - e.dot(&s)));
                    let c_pred = cis(4.0 * PI / lambda * (e.dot(&s) - kd * e.dot(&g)));
                    let d_pred = cis(4.0 * PI / lambda * (e.dot(&s) + kd * g.dot(&s) / r));
                    worst[0] = worst[0].max((b[(i, col)] - b_pred).norm());
                    worst[1] = worst[1].max((c[(i, col)] - c_pred).norm());
                    worst[2] = worst[2].max((d[(i, col)] - d_pred).norm());

                    // column shift of B
                    if col + 1 < k {
                        let delta_r = cis(-2.0 * PI * (2 * kk + 1) as f64 * du * du / (lambda * r));
                        worst[0] = worst[0].max((b[(i, col + 1)] - b[(i, col)] * delta_r).norm());
                    }
                    // row shifts of C and D
                    let ix = i + cfg.ris_y;
                    if ix < n {
                        let ex = cis(4.0 * PI * cfg.ris_spacing_x * pose.theta.cos() * pose.phi.cos() / lambda);
                        let gx = ex
                            * cis(
                                4.0 * PI * kk as f64 * du * cfg.ris_spacing_x * pose.psi.cos() * pose.gamma.cos()
                                    / (lambda * r),
                            );
                        worst[1] = worst[1].max((c[(ix, col)] - c[(i, col)] * ex).norm());
                        worst[2] = worst[2].max((d[(ix, col)] - d[(i, col)] * gx).norm());
                    }
                    if i % cfg.ris_y + 1 < cfg.ris_y {
                        let ey = cis(4.0 * PI * cfg.ris_spacing_y * pose.theta.sin() * pose.phi.cos() / lambda);
                        let gy = ey
                            * cis(
                                4.0 * PI * kk as f64 * du * cfg.ris_spacing_y * pose.psi.sin() * pose.gamma.cos()
                                    / (lambda * r),
                            );
                        worst[1] = worst[1].max((c[(i + 1, col)] - c[(i, col)] * ey).norm());
                        worst[2] = worst[2].max((d[(i + 1, col)] - d[(i, col)] * gy).norm());
                    }

                    // flip symmetries
                    let (fi, fc) = (n - 1 - i, k - 1 - col);
                    worst[3] = worst[3].max((b[(i, fc)] - b[(i, col)]).norm());
                    worst[4] = worst[4].max((c[(fi, fc)].conj() - c[(i, col)]).norm());
                    worst[5] = worst[5].max((d[(fi, col)].conj() - d[(i, col)]).norm());
                }
            }
        }
    }
    let max = worst.iter().cloned().fold(0.0, f64::max);
    outcome(
        max < 1e-12,
        format!(
            "N in {{49,121}}, K in {{7,11}}: B shift {:.1e}, C shift {:.1e}, D shift {:.1e}, B F_K {:.1e}, F_N C* F_K {:.1e}, F_N D* {:.1e}",
            worst[0], worst[1], worst[2], worst[3], worst[4], worst[5]
        ),
    )
}

fn criterion_operators() -> Outcome {
    let base = SystemConfig::default();
    let n = base.ris_elements();
    let h = ris_bs_channel(&base);
    let (mut gram_dev, mut closed_dev, mut svd_dev) = (0f64, 0f64, 0f64);
    for p in [n, 2 * n] {
        let cfg = SystemConfig {
            configurations: p,
            ..base.clone()
        };
        let phi = ris_profiles(&cfg).unwrap();
        let target = DMatrix::<Complex64>::identity(n, n) * Complex64::new(p as f64, 0.0);
        gram_dev = gram_dev.max(max_abs_diff(&(phi.adjoint() * &phi), &target));

        let hbar = khatri_rao(&phi, &h).unwrap();
        let structured = pinv_hbar(&hbar, true).unwrap();
        let closed = hbar.adjoint() / Complex64::new((p * cfg.bs_antennas) as f64, 0.0);
        closed_dev = closed_dev.max(max_abs_diff(&structured, &closed));
        let svd = hbar.clone().pseudo_inverse(1e-12).unwrap();
        svd_dev = svd_dev.max(max_abs_diff(&structured, &svd));
    }

    let s = pilot_matrix(&base).unwrap();
    let k = base.ue_antennas;
    let ssh_target = DMatrix::<Complex64>::identity(k, k) * Complex64::new(base.transmit_power / k as f64, 0.0);
    let ssh_dev = max_abs_diff(&(&s * s.adjoint()), &ssh_target);

    let hbar = khatri_rao(&ris_profiles(&base).unwrap(), &h).unwrap();
    let mut rec_dev: f64 = 0.0;
    for mode in [ChannelMode::Exact, ChannelMode::Fresnel] {
        for pose in poses(5, 5, &base) {
            let a = ris_ue_channel(&pose, &base, mode);
            let y = &hbar * &a * &s;
            rec_dev = rec_dev.max(max_abs_diff(&recover_channel(&y, &hbar, &s).unwrap().addot, &a));
        }
    }
    outcome(
        gram_dev < 1e-12 && ssh_dev < 1e-12 && closed_dev < 1e-12 && svd_dev < 1e-10 && rec_dev < 1e-10,
        format!(
            "Phi^H Phi - P I {gram_dev:.1e}, S S^H - (P_T/K) I {ssh_dev:.1e}, structured vs H^H/(PM) {closed_dev:.1e}, \
             structured vs SVD pinv {svd_dev:.1e}, noiseless recovery {rec_dev:.1e}"
        ),
    )
}

const TREND_SEED: u64 = 20_240_601;
const TREND_TRIALS: usize = 500;

fn sweep(base: &SystemConfig, grid: SweepGrid, trials: usize, snr_db: f64) -> NmseTable {
    let settings = SweepSettings {
        trials,
        master_seed: TREND_SEED,
        mode: ChannelMode::Fresnel,
        snr_db,
        fixed_pose: None,
    };
    run_sweep(base, &grid, &settings).unwrap()
}

/// Non-increasing, allowing `allowed` adjacent increases of at most 10%.
fn non_increasing(series: &[f64], allowed: usize) -> bool {
    let mut inversions = 0;
    for w in series.windows(2) {
        if !(w[1].is_finite() && w[0].is_finite()) {
            return false;
        }
        if w[1] > w[0] {
            if w[1] > 1.1 * w[0] {
                return false;
            }
            inversions += 1;
        }
    }
    inversions <= allowed
}

fn fmt_series(values: &[f64]) -> String {
    values.iter().map(|v| format!("{v:.2e}")).collect::<Vec<_>>().join(" ")
}

const PARAMS: [&str; 5] = ["r", "theta", "phi", "psi", "gamma"];

fn criterion_snr_trend() -> Outcome {
    let base = SystemConfig::with_square_ris(15);
    let table = sweep(
        &base,
        SweepGrid {
            snr_db: vec![0.0, 10.0, 20.0, 30.0],
            ..Default::default()
        },
        TREND_TRIALS,
        15.0,
    );
    let mut ok = true;
    let mut parts = Vec::new();
    for p in PARAMS {
        let series = table.series(p);
        ok &= non_increasing(&series, 1);
        parts.push(format!("{p}: {}", fmt_series(&series)));
    }
    outcome(
        ok,
        format!(
            "N=225, {TREND_TRIALS} trials/pt, SNR 0/10/20/30 dB; {}",
            parts.join("; ")
        ),
    )
}

fn criterion_parameter_ordering() -> Outcome {
    let base = SystemConfig::with_square_ris(15);
    let table = sweep(
        &base,
        SweepGrid {
            snr_db: vec![15.0],
            ..Default::default()
        },
        500,
        15.0,
    );
    let v: Vec<f64> = PARAMS.iter().map(|p| table.series(p)[0]).collect();
    let (theta, phi, psi, gamma) = (v[1], v[2], v[3], v[4]);
    outcome(
        psi < gamma && theta < psi && phi < psi,
        format!("N=225, 15 dB, 500 trials: theta {theta:.2e}, phi {phi:.2e}, psi {psi:.2e}, gamma {gamma:.2e}"),
    )
}

fn criterion_size_trends() -> Outcome {
    let base = SystemConfig::default();
    let by_n = sweep(
        &base,
        SweepGrid {
            ris_elements: vec![81, 121, 225],
            ..Default::default()
        },
        TREND_TRIALS,
        15.0,
    );
    let by_k = sweep(
        &base,
        SweepGrid {
            ue_antennas: vec![7, 11, 15],
            ..Default::default()
        },
        TREND_TRIALS,
        15.0,
    );
    let mut ok = true;
    let mut parts = Vec::new();
    for p in ["theta", "phi"] {
        let n_series = by_n.series(p);
        ok &= n_series.windows(2).all(|w| w[1] < w[0]);
        let k_series = by_k.series(p);
        let spread =
            k_series.iter().cloned().fold(0.0, f64::max) / k_series.iter().cloned().fold(f64::INFINITY, f64::min);
        ok &= spread < 3.0;
        parts.push(format!(
            "{p}: N 81/121/225 {} | K 7/11/15 {} (spread {spread:.2}x)",
            fmt_series(&n_series),
            fmt_series(&k_series)
        ));
    }
    outcome(ok, format!("15 dB, {TREND_TRIALS} trials/pt; {}", parts.join("; ")))
}

fn criterion_configuration_trend() -> Outcome {
    let base = SystemConfig::default();
    let table = sweep(
        &base,
        SweepGrid {
            configurations: vec![121, 242, 363],
            ..Default::default()
        },
        TREND_TRIALS,
        15.0,
    );
    let mut ok = true;
    let mut parts = Vec::new();
    for p in PARAMS {
        let series = table.series(p);
        ok &= non_increasing(&series, 0);
        parts.push(format!("{p}: {}", fmt_series(&series)));
    }
    outcome(
        ok,
        format!(
            "N=121, 15 dB, P=N/2N/3N, {TREND_TRIALS} trials/pt; {}",
            parts.join("; ")
        ),
    )
}

fn criterion_model_mismatch() -> Outcome {
    let cfg = SystemConfig::default();
    let (r_min, r_max) = near_field_bounds(&cfg);
    let mut worst_far = [0f64; 5];
    let (mut mean_near_r, mut mean_far_r) = (0.0, 0.0);
    let mut near_exceeds = 0;
    let mut failures = 0;
    let sample = poses(20, 55, &cfg);
    for base_pose in &sample {
        let mut rel = Vec::new();
        for r in [r_min, r_max] {
            let pose = Pose { r, ..*base_pose };
            let a = ris_ue_channel(&pose, &cfg, ChannelMode::Exact);
            match estimate_from_channel(&a, &cfg) {
                Ok(est) => {
                    let got = est.pose().as_array();
                    let truth = pose.as_array();
                    rel.push(
                        (0..5)
                            .map(|i| ((got[i] - truth[i]) / truth[i]).abs())
                            .collect::<Vec<_>>(),
                    );
                }
                Err(_) => {
                    failures += 1;
                    rel.push(vec![f64::INFINITY; 5]);
                }
            }
        }
        for (w, e) in worst_far.iter_mut().zip(&rel[1]) {
            *w = w.max(*e);
        }
        mean_near_r += rel[0][0] / sample.len() as f64;
        mean_far_r += rel[1][0] / sample.len() as f64;
        if rel[0][0] > rel[1][0] {
            near_exceeds += 1;
        }
    }
    let far_ok = worst_far.iter().all(|&e| e < 1e-2);
    outcome(
        far_ok && mean_near_r > mean_far_r && failures == 0,
        format!(
            "Exact mode, 20 poses: max rel err at r_max={r_max:.3} m [r {:.2e}, theta {:.2e}, phi {:.2e}, psi {:.2e}, gamma {:.2e}]; \
             mean rel r err r_min={r_min:.3} m {mean_near_r:.2e} vs r_max {mean_far_r:.2e} (r_min worse in {near_exceeds}/20); {failures} failures",
            worst_far[0], worst_far[1], worst_far[2], worst_far[3], worst_far[4]
        ),
    )
}

fn criterion_determinism() -> Outcome {
    let dir = tempfile::tempdir().unwrap();
    let config = dir.path().join("sweep.cfg");
    std::fs::write(&config, "sweep_snr_db = 0, 10, 20, 30\ntrials = 40\nmaster_seed = 99\n").unwrap();
    let run_once = |name: &str| {
        let out = dir.path().join(name);
        let cli = Cli {
            command: Command::Sweep(SweepArgs {
                config: Some(config.clone()),
                snr_db: None,
                seed: None,
                trials: None,
                mode: None,
                out: Some(out.clone()),
                format: None,
            }),
        };
        let code = run(cli, &mut Vec::new(), &mut Vec::new());
        (code, std::fs::read(out).unwrap_or_default())
    };
    let (c1, first) = run_once("a.csv");
    let (c2, second) = run_once("b.csv");
    let rows = String::from_utf8_lossy(&first).lines().count();
    outcome(
        c1 == 0 && c2 == 0 && !first.is_empty() && first == second,
        format!(
            "two CLI sweeps with seed 99: {} bytes, {rows} lines, identical: {}",
            first.len(),
            first == second
        ),
    )
}

type Criterion = (&'static str, &'static str, fn() -> Outcome);

fn main() {
    let filter: Vec<String> = std::env::args().skip(1).filter(|a| !a.starts_with('-')).collect();
    let criteria: [Criterion; 9] = [
        ("1", "zero-noise exactness (Fresnel)", criterion_zero_noise),
        ("2", "shift identities and flip symmetries", criterion_identities),
        ("3", "measurement operator checks", criterion_operators),
        ("4a", "NMSE non-increasing in SNR", criterion_snr_trend),
        ("4b", "parameter ordering at 15 dB", criterion_parameter_ordering),
        ("4c", "direction NMSE vs N and K", criterion_size_trends),
        ("4d", "NMSE non-increasing in P", criterion_configuration_trend),
        ("5", "Exact-mode mismatch bound", criterion_model_mismatch),
        ("6", "sweep CSV determinism", criterion_determinism),
    ];
    let mut failed = 0;
    let mut ran = 0;
    for (id, name, f) in criteria {
        let label = format!("criterion {id} {name}");
        if !filter.is_empty() && !filter.iter().any(|pat| label.contains(pat.as_str())) {
            continue;
        }
        ran += 1;
        let start = Instant::now();
        let result = catch_unwind(AssertUnwindSafe(f)).unwrap_or_else(|_| outcome(false, "panicked"));
        if !result.passed {
            failed += 1;
        }
        println!(
            "[{}] {label}: {} ({:.1}s)",
            if result.passed { "PASS" } else { "FAIL" },
            result.detail,
            start.elapsed().as_secs_f64()
        );
    }
    println!("acceptance: {}/{ran} criteria passed", ran - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
