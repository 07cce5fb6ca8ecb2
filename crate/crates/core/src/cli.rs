//! Command-line front end: `estimate`, `sweep` and `validate`.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::PathBuf;

use clap::{Args, Parser, Subcommand};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde_json::{json, Map, Value};

use crate::channel::ChannelMode;
use crate::config::{OutputFormat, RunConfig};
use crate::geometry::{near_field_bounds, sample_pose, Pose, POSE_PARAMETERS};
use crate::montecarlo::{run_sweep, NmseTable, TrialContext};
use crate::validate::{run_invariants, FaultInjection};

pub const EXIT_OK: i32 = 0;
/// Estimation or validation failure.
pub const EXIT_FAILURE: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_OUTPUT: i32 = 3;

#[derive(Debug, Parser)]
#[command(
    name = "nfpose",
    version,
    about = "Near-field 5D pose estimation through a reconfigurable surface"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one trial and print the true and estimated pose as JSON.
    Estimate(EstimateArgs),
    /// Run a Monte Carlo sweep and write the NMSE table.
    Sweep(SweepArgs),
    /// Check model and estimator invariants at small dimensions.
    Validate(ValidateArgs),
}

#[derive(Debug, Args)]
pub struct EstimateArgs {
    /// Config file; built-in defaults when omitted.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// `r,theta,phi,psi,gamma` in meters and degrees; sampled when omitted.
    #[arg(long, allow_hyphen_values = true)]
    pub pose: Option<String>,
    /// Per-observation SNR in dB (`inf` for no noise).
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// exact | fresnel
    #[arg(long)]
    pub mode: Option<ChannelMode>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// SNR for grids that do not sweep SNR.
    #[arg(long, allow_hyphen_values = true)]
    pub snr_db: Option<f64>,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub trials: Option<usize>,
    #[arg(long)]
    pub mode: Option<ChannelMode>,
    /// Output file; standard output when omitted.
    #[arg(long)]
    pub out: Option<PathBuf>,
    #[arg(long, value_enum)]
    pub format: Option<OutputFormat>,
}

#[derive(Debug, Args)]
pub struct ValidateArgs {
    /// Test hook: flip the sign of the predicted distance shift.
    #[arg(long, hide = true)]
    pub inject_distance_fault: bool,
}

/// Runs a parsed command line, returning the process exit status.
pub fn run(cli: Cli, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    match cli.command {
        Command::Estimate(args) => cmd_estimate(&args, stdout, stderr),
        Command::Sweep(args) => cmd_sweep(&args, stdout, stderr),
        Command::Validate(args) => cmd_validate(&args, stdout),
    }
}

fn load_config(path: Option<&PathBuf>, stderr: &mut dyn Write) -> Option<RunConfig> {
    let loaded = match path {
        Some(p) => RunConfig::load(p),
        None => Ok(RunConfig::default()),
    };
    match loaded {
        Ok(cfg) => Some(cfg),
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            None
        }
    }
}

/// Parses `r,theta,phi,psi,gamma` (meters, degrees).
pub fn parse_pose(text: &str) -> Result<Pose, String> {
    let values: Vec<f64> = text
        .split(',')
        .map(|v| v.trim().parse::<f64>().map_err(|e| format!("`{}`: {e}", v.trim())))
        .collect::<Result<_, _>>()?;
    match values[..] {
        [r, theta, phi, psi, gamma] if values.iter().all(|v| v.is_finite()) && r > 0.0 => {
            Ok(Pose::from_degrees(r, theta, phi, psi, gamma))
        }
        _ => Err(format!(
            "expected five finite values r,theta,phi,psi,gamma with r > 0, got `{text}`"
        )),
    }
}

fn report_value(param: usize, x: f64) -> f64 {
    if param == 0 {
        x
    } else {
        x.to_degrees()
    }
}

pub fn cmd_estimate(args: &EstimateArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let Some(mut cfg) = load_config(args.config.as_ref(), stderr) else {
        return EXIT_CONFIG;
    };
    if let Some(mode) = args.mode {
        cfg.mode = mode;
    }
    if let Some(snr) = args.snr_db {
        cfg.snr_db = snr;
    }
    let seed = args.seed.unwrap_or(cfg.master_seed);
    let system = cfg.system();
    let pose = match &args.pose {
        Some(text) => match parse_pose(text) {
            Ok(p) => p,
            Err(e) => {
                let _ = writeln!(stderr, "error: --pose: {e}");
                return EXIT_CONFIG;
            }
        },
        None => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(1);
            sample_pose(&mut rng, &system)
        }
    };
    let (r_min, r_max) = near_field_bounds(&system);
    if pose.r < r_min || pose.r > r_max {
        let _ = writeln!(
            stderr,
            "warning: r = {} m is outside the near-field range [{r_min:.4}, {r_max:.4}] m",
            pose.r
        );
    }
    if !pose.is_valid() {
        let _ = writeln!(stderr, "warning: pose angles outside the sampled ranges");
    }

    let ctx = match TrialContext::new(&system) {
        Ok(c) => c,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let trial = ctx.run(&pose, cfg.snr_db, cfg.mode, &mut rng);
    let (Some(estimate), Some(errors)) = (&trial.estimate, trial.squared_relative_error) else {
        let failure = trial.failure.as_ref().expect("failed trial carries a failure");
        let _ = writeln!(
            stderr,
            "error: estimation failed at stage {}: {}",
            failure.stage, failure.message
        );
        return EXIT_FAILURE;
    };
    let truth = pose.as_array();
    let got = estimate.pose().as_array();
    let mut report = Map::new();
    for (i, name) in POSE_PARAMETERS.iter().enumerate() {
        report.insert(
            name.to_string(),
            json!({
                "true": report_value(i, truth[i]),
                "estimate": report_value(i, got[i]),
                "sq_rel_err": errors[i],
            }),
        );
    }
    let text = serde_json::to_string_pretty(&Value::Object(report)).expect("plain JSON values");
    if writeln!(stdout, "{text}").is_err() {
        return EXIT_OUTPUT;
    }
    EXIT_OK
}

fn write_table(table: &NmseTable, format: OutputFormat, out: &mut dyn Write) -> std::io::Result<()> {
    match format {
        OutputFormat::Csv => table.write_csv(&mut *out).map_err(std::io::Error::other)?,
        OutputFormat::Json => {
            serde_json::to_writer_pretty(&mut *out, table).map_err(std::io::Error::other)?;
            writeln!(out)?;
        }
    }
    out.flush()
}

pub fn cmd_sweep(args: &SweepArgs, stdout: &mut dyn Write, stderr: &mut dyn Write) -> i32 {
    let Some(mut cfg) = load_config(args.config.as_ref(), stderr) else {
        return EXIT_CONFIG;
    };
    if let Some(snr) = args.snr_db {
        cfg.snr_db = snr;
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if let Some(trials) = args.trials {
        cfg.trials = trials;
    }
    if let Some(mode) = args.mode {
        cfg.mode = mode;
    }
    if let Some(out) = &args.out {
        cfg.out = Some(out.clone());
    }
    if let Some(format) = args.format {
        cfg.format = format;
    }
    let grid = cfg.grid();
    if grid.is_empty() {
        let _ = writeln!(
            stderr,
            "error: no sweep axis configured (set sweep_snr_db, sweep_n, sweep_k or sweep_p)"
        );
        return EXIT_CONFIG;
    }

    // Open the output before the run so an unwritable path fails fast.
    let mut sink: Box<dyn Write + '_> = match &cfg.out {
        Some(path) => match File::create(path) {
            Ok(f) => Box::new(BufWriter::new(f)),
            Err(e) => {
                let _ = writeln!(stderr, "error: cannot write {}: {e}", path.display());
                return EXIT_OUTPUT;
            }
        },
        None => Box::new(&mut *stdout),
    };

    let table = match run_sweep(&cfg.system(), &grid, &cfg.sweep_settings()) {
        Ok(t) => t,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            return EXIT_CONFIG;
        }
    };
    if let Err(e) = write_table(&table, cfg.format, &mut sink) {
        let _ = writeln!(stderr, "error: writing output: {e}");
        return EXIT_OUTPUT;
    }
    let failures: usize = table
        .rows
        .iter()
        .step_by(POSE_PARAMETERS.len())
        .map(|r| r.failures)
        .sum();
    let points = table.rows.len() / POSE_PARAMETERS.len();
    let _ = writeln!(
        stderr,
        "{points} grid points x {} trials, {failures} failed trials",
        cfg.trials
    );
    EXIT_OK
}

pub fn cmd_validate(args: &ValidateArgs, stdout: &mut dyn Write) -> i32 {
    let faults = FaultInjection {
        distance_sign: args.inject_distance_fault,
    };
    let results = run_invariants(faults);
    let failed = results.iter().filter(|r| !r.passed).count();
    for r in &results {
        let _ = writeln!(stdout, "{r}");
    }
    let _ = writeln!(stdout, "{} checks, {failed} failed", results.len());
    if failed == 0 {
        EXIT_OK
    } else {
        EXIT_FAILURE
    }
}
