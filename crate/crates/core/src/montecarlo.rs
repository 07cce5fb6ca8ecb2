//! Monte Carlo NMSE evaluation over SNR / RIS size / UE array size /
//! configuration-count grids.
//!
//! NMSE of parameter `x` is `mean_t ((x̂_t - x_t) / x_t)²` over the trials that
//! produced an estimate, angles in radians. Failed trials are counted, never
//! folded into the mean.
//!
//! Determinism: each trial draws its pose from a stream keyed by
//! `(master_seed, trial)` and its noise from a stream keyed by
//! `(master_seed, grid point, trial)`. Results do not depend on thread count
//! or on the order in which grid points are visited, and every grid point
//! sees the same pose realizations (common random numbers).

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;
use thiserror::Error;

use crate::channel::{
    add_noise, khatri_rao, noise_sigma_for_signal, pilot_matrix, ris_bs_channel, ris_profiles, ris_ue_channel,
    ChannelError, ChannelMode, ComplexMatrix,
};
use crate::estimator::{estimate_from_channel, PoseEstimate};
use crate::geometry::{sample_pose, GeometryError, Pose, SystemConfig, POSE_PARAMETERS};
use crate::recovery::{RecoveryError, RecoveryOperator};

pub const NMSE_DEFINITION: &str = "mean over non-failed trials of ((estimate - truth) / truth)^2, angles in radians";
pub const SNR_DEFINITION: &str =
    "mean received signal power per scalar observation ||H_bar A S||_F^2 / (M P L) over per-entry noise variance";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SetupError {
    #[error(transparent)]
    Config(#[from] GeometryError),
    #[error(transparent)]
    Channel(#[from] ChannelError),
    #[error(transparent)]
    Recovery(#[from] RecoveryError),
    #[error("empty sweep grid")]
    EmptyGrid,
    #[error("N = {0} is not the square of an odd integer >= 3")]
    NonSquareRis(usize),
    #[error("trial count must be positive")]
    NoTrials,
}

/// Why a trial produced no usable estimate.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialFailure {
    /// Pipeline stage label (`recovery`, `distance`, ..., or `output`).
    pub stage: String,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialResult {
    pub pose: Pose,
    pub snr_db: f64,
    pub sigma: f64,
    pub estimate: Option<PoseEstimate>,
    /// `((x̂ - x) / x)²` for `r, θ, φ, ψ, γ`; `None` iff the trial failed.
    pub squared_relative_error: Option<[f64; 5]>,
    pub failure: Option<TrialFailure>,
}

impl TrialResult {
    pub fn failed(&self) -> bool {
        self.failure.is_some()
    }
}

/// Pose-independent matrices for one system configuration, shared by all
/// trials at a grid point.
#[derive(Debug, Clone)]
pub struct TrialContext {
    cfg: SystemConfig,
    hbar: ComplexMatrix,
    pilot: ComplexMatrix,
    recovery: RecoveryOperator,
}

impl TrialContext {
    pub fn new(cfg: &SystemConfig) -> Result<Self, SetupError> {
        cfg.validate()?;
        let h = ris_bs_channel(cfg);
        let phi = ris_profiles(cfg)?;
        let hbar = khatri_rao(&phi, &h)?;
        let pilot = pilot_matrix(cfg)?;
        let recovery = RecoveryOperator::new(&hbar, &pilot, true)?;
        Ok(Self {
            cfg: cfg.clone(),
            hbar,
            pilot,
            recovery,
        })
    }

    pub fn config(&self) -> &SystemConfig {
        &self.cfg
    }

    pub fn hbar(&self) -> &ComplexMatrix {
        &self.hbar
    }

    pub fn pilot(&self) -> &ComplexMatrix {
        &self.pilot
    }

    /// Synthesizes `A` for `pose`, observes it at `snr_db` (`+∞` for no
    /// noise) and estimates the pose. Estimation failures are recorded in the
    /// result.
    pub fn run(&self, pose: &Pose, snr_db: f64, mode: ChannelMode, rng: &mut ChaCha8Rng) -> TrialResult {
        let a = ris_ue_channel(pose, &self.cfg, mode);
        let signal = &self.hbar * (&a * &self.pilot);
        let fail = |stage: &str, message: String, sigma: f64| TrialResult {
            pose: *pose,
            snr_db,
            sigma,
            estimate: None,
            squared_relative_error: None,
            failure: Some(TrialFailure {
                stage: stage.to_string(),
                message,
            }),
        };
        let sigma = match noise_sigma_for_signal(&signal, snr_db) {
            Ok(s) => s,
            Err(e) => return fail("channel", e.to_string(), f64::NAN),
        };
        let y = add_noise(signal, sigma, rng);
        let recovered = match self.recovery.recover(&y) {
            Ok(r) => r,
            Err(e) => return fail("recovery", e.to_string(), sigma),
        };
        let estimate = match estimate_from_channel(&recovered.addot, &self.cfg) {
            Ok(e) => e,
            Err(f) => return fail(f.stage.as_str(), f.error.to_string(), sigma),
        };
        let truth = pose.as_array();
        let got = estimate.pose().as_array();
        let mut errors = [0.0; 5];
        for (slot, (x_hat, x)) in errors.iter_mut().zip(got.iter().zip(truth)) {
            *slot = ((x_hat - x) / x).powi(2);
        }
        if !errors.iter().all(|e| e.is_finite()) {
            return fail("output", format!("non-finite error for estimate {got:?}"), sigma);
        }
        TrialResult {
            pose: *pose,
            snr_db,
            sigma,
            estimate: Some(estimate),
            squared_relative_error: Some(errors),
            failure: None,
        }
    }
}

/// One trial with freshly built matrices.
pub fn run_trial(
    cfg: &SystemConfig,
    pose: &Pose,
    snr_db: f64,
    mode: ChannelMode,
    rng: &mut ChaCha8Rng,
) -> Result<TrialResult, SetupError> {
    Ok(TrialContext::new(cfg)?.run(pose, snr_db, mode, rng))
}

/// Per-parameter aggregate over a batch of trials.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ParameterSummary {
    /// NaN when every trial failed.
    pub nmse: f64,
    pub trials: usize,
    pub failures: usize,
}

/// NMSE per parameter (`r, θ, φ, ψ, γ`) over `results`.
pub fn summarize(results: &[TrialResult]) -> [ParameterSummary; 5] {
    let mut sums = [0.0; 5];
    let mut ok = 0usize;
    for errors in results.iter().filter_map(|t| t.squared_relative_error) {
        ok += 1;
        for (s, e) in sums.iter_mut().zip(errors) {
            *s += e;
        }
    }
    let failures = results.len() - ok;
    sums.map(|s| ParameterSummary {
        nmse: if ok == 0 { f64::NAN } else { s / ok as f64 },
        trials: results.len(),
        failures,
    })
}

/// Grid axes. An empty list keeps the base value and is not reported as a
/// sweep variable; the grid is the Cartesian product of the non-empty lists.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SweepGrid {
    pub snr_db: Vec<f64>,
    /// RIS sizes `N`; each must be an odd square, the RIS is `√N x √N`.
    pub ris_elements: Vec<usize>,
    pub ue_antennas: Vec<usize>,
    pub configurations: Vec<usize>,
}

impl SweepGrid {
    pub fn is_empty(&self) -> bool {
        self.snr_db.is_empty()
            && self.ris_elements.is_empty()
            && self.ue_antennas.is_empty()
            && self.configurations.is_empty()
    }
}

/// Settings shared by every grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepSettings {
    pub trials: usize,
    pub master_seed: u64,
    pub mode: ChannelMode,
    /// SNR used when the SNR axis is not swept.
    pub snr_db: f64,
    /// Evaluate every trial at this pose instead of sampling one.
    pub fixed_pose: Option<Pose>,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            trials: 200,
            master_seed: 0,
            mode: ChannelMode::Exact,
            snr_db: 15.0,
            fixed_pose: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NmseRow {
    pub sweep_var: String,
    pub sweep_value: String,
    pub param: String,
    pub nmse: f64,
    pub trials: usize,
    pub failures: usize,
    /// Seed of the grid point's noise streams.
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NmseMetadata {
    pub nmse_definition: &'static str,
    pub snr_definition: &'static str,
    pub mode: String,
    pub master_seed: u64,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct NmseTable {
    pub metadata: NmseMetadata,
    pub rows: Vec<NmseRow>,
}

pub const CSV_HEADER: [&str; 7] = [
    "sweep_var",
    "sweep_value",
    "param",
    "nmse",
    "trials",
    "failures",
    "seed",
];

impl NmseTable {
    /// Rows for one grid point and parameter, if present.
    pub fn get(&self, sweep_value: &str, param: &str) -> Option<&NmseRow> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == sweep_value && r.param == param)
    }

    /// NMSE values of `param` in grid order.
    pub fn series(&self, param: &str) -> Vec<f64> {
        self.rows.iter().filter(|r| r.param == param).map(|r| r.nmse).collect()
    }

    /// Comma-separated, LF-terminated, header first.
    pub fn write_csv<W: std::io::Write>(&self, out: W) -> csv::Result<()> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(out);
        w.write_record(CSV_HEADER)?;
        for row in &self.rows {
            w.write_record([
                row.sweep_var.clone(),
                row.sweep_value.clone(),
                row.param.clone(),
                format!("{:e}", row.nmse),
                row.trials.to_string(),
                row.failures.to_string(),
                row.seed.to_string(),
            ])?;
        }
        w.flush()?;
        Ok(())
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("CSV is UTF-8")
    }
}

/// Fully resolved grid point.
#[derive(Debug, Clone, PartialEq)]
pub struct GridPoint {
    pub cfg: SystemConfig,
    pub snr_db: f64,
    pub sweep_var: String,
    pub sweep_value: String,
    pub seed: u64,
}

/// SplitMix64 finalizer.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Derives a seed from a master seed and a list of coordinates.
pub fn derive_seed(master: u64, words: &[u64]) -> u64 {
    words.iter().fold(mix(master), |acc, &w| mix(acc ^ mix(w)))
}

const POSE_STREAM_TAG: u64 = 0x706f_7365; // "pose"

fn trial_rng(seed: u64, trial: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(trial as u64);
    rng
}

fn odd_square_side(n: usize) -> Result<usize, SetupError> {
    let side = (n as f64).sqrt().round() as usize;
    if side * side != n || side < 3 || side.is_multiple_of(2) {
        return Err(SetupError::NonSquareRis(n));
    }
    Ok(side)
}

fn format_value(v: f64) -> String {
    format!("{v}")
}

/// Expands a grid into resolved points, in SNR-major, then N, K, P order.
///
/// When `N` is swept and `P` is not, `P` follows `N` with the base ratio
/// `⌊P / N⌋` (so the default `P = N` stays `P = N`).
pub fn expand_grid(
    base: &SystemConfig,
    grid: &SweepGrid,
    settings: &SweepSettings,
) -> Result<Vec<GridPoint>, SetupError> {
    if grid.is_empty() {
        return Err(SetupError::EmptyGrid);
    }
    fn axis<T: Copy>(values: &[T]) -> Vec<Option<T>> {
        if values.is_empty() {
            vec![None]
        } else {
            values.iter().map(|&v| Some(v)).collect()
        }
    }
    let p_ratio = (base.configurations / base.ris_elements()).max(1);

    let mut points = Vec::new();
    for snr in axis(&grid.snr_db) {
        for n in axis(&grid.ris_elements) {
            for k in axis(&grid.ue_antennas) {
                for p in axis(&grid.configurations) {
                    let mut cfg = base.clone();
                    let mut names = Vec::new();
                    let mut values = Vec::new();
                    if let Some(snr) = snr {
                        names.push("snr_db");
                        values.push(format_value(snr));
                    }
                    if let Some(n) = n {
                        let side = odd_square_side(n)?;
                        cfg.ris_x = side;
                        cfg.ris_y = side;
                        cfg.configurations = p_ratio * n;
                        names.push("N");
                        values.push(n.to_string());
                    }
                    if let Some(k) = k {
                        cfg.ue_antennas = k;
                        names.push("K");
                        values.push(k.to_string());
                    }
                    if let Some(p) = p {
                        cfg.configurations = p;
                        names.push("P");
                        values.push(p.to_string());
                    }
                    cfg.validate()?;
                    let snr_db = snr.unwrap_or(settings.snr_db);
                    let seed = derive_seed(
                        settings.master_seed,
                        &[
                            snr_db.to_bits(),
                            cfg.ris_x as u64,
                            cfg.ris_y as u64,
                            cfg.ue_antennas as u64,
                            cfg.configurations as u64,
                        ],
                    );
                    points.push(GridPoint {
                        cfg,
                        snr_db,
                        sweep_var: names.join("/"),
                        sweep_value: values.join("/"),
                        seed,
                    });
                }
            }
        }
    }
    Ok(points)
}

/// Runs `settings.trials` trials at one grid point.
pub fn run_point(point: &GridPoint, settings: &SweepSettings) -> Result<Vec<TrialResult>, SetupError> {
    if settings.trials == 0 {
        return Err(SetupError::NoTrials);
    }
    let ctx = TrialContext::new(&point.cfg)?;
    let pose_seed = derive_seed(settings.master_seed, &[POSE_STREAM_TAG]);
    Ok((0..settings.trials)
        .into_par_iter()
        .map(|t| {
            let pose = match settings.fixed_pose {
                Some(p) => p,
                None => sample_pose(&mut trial_rng(pose_seed, t), &point.cfg),
            };
            let mut noise_rng = trial_rng(point.seed, t);
            ctx.run(&pose, point.snr_db, settings.mode, &mut noise_rng)
        })
        .collect())
}

/// Evaluates every grid point and aggregates NMSE per parameter.
pub fn run_sweep(base: &SystemConfig, grid: &SweepGrid, settings: &SweepSettings) -> Result<NmseTable, SetupError> {
    let points = expand_grid(base, grid, settings)?;
    let mut rows = Vec::with_capacity(points.len() * POSE_PARAMETERS.len());
    for point in &points {
        let results = run_point(point, settings)?;
        for (param, summary) in POSE_PARAMETERS.iter().zip(summarize(&results)) {
            rows.push(NmseRow {
                sweep_var: point.sweep_var.clone(),
                sweep_value: point.sweep_value.clone(),
                param: param.to_string(),
                nmse: summary.nmse,
                trials: summary.trials,
                failures: summary.failures,
                seed: point.seed,
            });
        }
    }
    Ok(NmseTable {
        metadata: NmseMetadata {
            nmse_definition: NMSE_DEFINITION,
            snr_definition: SNR_DEFINITION,
            mode: settings.mode.to_string(),
            master_seed: settings.master_seed,
            trials: settings.trials,
        },
        rows,
    })
}
