//! Run configuration: flat `key = value` text, one entry per line, `#`
//! comments. Angles are in degrees and transmit power in dBm; both are
//! converted once when building the [`SystemConfig`].
//!
//! ```text
//! # Sweep SNR at N = 225
//! nx = 15
//! ny = 15
//! p = 225
//! mode = fresnel
//! trials = 300
//! sweep_snr_db = 0, 10, 20, 30
//! out = snr.csv
//! ```
//!
//! Spacings not given in the file default to `d_u = d_b = λ/2` and
//! `d_x = d_y = λ/4` for the configured `λ`.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use thiserror::Error;

use crate::channel::ChannelMode;
use crate::geometry::{dbm_to_watts, GeometryError, SystemConfig};
use crate::montecarlo::{SweepGrid, SweepSettings};

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: expected `key = value`, got `{text}`")]
    Syntax { line: usize, text: String },
    #[error("line {line}: unknown key `{key}`")]
    UnknownKey { line: usize, key: String },
    #[error("line {line}: duplicate key `{key}`")]
    DuplicateKey { line: usize, key: String },
    #[error("line {line}: key `{key}`: {message}")]
    Value { line: usize, key: String, message: String },
    #[error("invalid configuration: {0}")]
    Invalid(#[from] GeometryError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, clap::ValueEnum)]
pub enum OutputFormat {
    #[default]
    Csv,
    Json,
}

impl OutputFormat {
    pub fn as_str(&self) -> &'static str {
        match self {
            OutputFormat::Csv => "csv",
            OutputFormat::Json => "json",
        }
    }
}

impl FromStr for OutputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "csv" => Ok(OutputFormat::Csv),
            "json" => Ok(OutputFormat::Json),
            other => Err(format!("unknown output format '{other}' (expected csv|json)")),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub bs_antennas: usize,
    pub ue_antennas: usize,
    pub ris_x: usize,
    pub ris_y: usize,
    pub configurations: usize,
    pub transmissions: usize,
    pub wavelength: f64,
    pub ue_spacing: f64,
    pub bs_spacing: f64,
    pub ris_spacing_x: f64,
    pub ris_spacing_y: f64,
    pub transmit_power_dbm: f64,
    pub bs_arrival_deg: f64,
    pub ris_departure_azimuth_deg: f64,
    pub ris_departure_elevation_deg: f64,
    pub mode: ChannelMode,
    pub trials: usize,
    pub master_seed: u64,
    /// SNR for single runs and for sweeps that do not vary SNR; `inf` means
    /// no noise.
    pub snr_db: f64,
    pub sweep_snr_db: Vec<f64>,
    pub sweep_n: Vec<usize>,
    pub sweep_k: Vec<usize>,
    pub sweep_p: Vec<usize>,
    pub out: Option<PathBuf>,
    pub format: OutputFormat,
}

impl Default for RunConfig {
    fn default() -> Self {
        let base = SystemConfig::default();
        Self {
            bs_antennas: base.bs_antennas,
            ue_antennas: base.ue_antennas,
            ris_x: base.ris_x,
            ris_y: base.ris_y,
            configurations: base.configurations,
            transmissions: base.transmissions,
            wavelength: base.wavelength,
            ue_spacing: base.ue_spacing,
            bs_spacing: base.bs_spacing,
            ris_spacing_x: base.ris_spacing_x,
            ris_spacing_y: base.ris_spacing_y,
            transmit_power_dbm: 40.0,
            bs_arrival_deg: 30.0,
            ris_departure_azimuth_deg: 40.0,
            ris_departure_elevation_deg: 50.0,
            mode: ChannelMode::default(),
            trials: 200,
            master_seed: 0,
            snr_db: 15.0,
            sweep_snr_db: Vec::new(),
            sweep_n: Vec::new(),
            sweep_k: Vec::new(),
            sweep_p: Vec::new(),
            out: None,
            format: OutputFormat::Csv,
        }
    }
}

const KEYS: [&str; 26] = [
    "m",
    "k",
    "nx",
    "ny",
    "p",
    "l",
    "lambda",
    "d_u",
    "d_b",
    "d_x",
    "d_y",
    "p_t_dbm",
    "theta_b_deg",
    "theta_r_deg",
    "phi_r_deg",
    "mode",
    "trials",
    "master_seed",
    "snr_db",
    "sweep_snr_db",
    "sweep_n",
    "sweep_k",
    "sweep_p",
    "out",
    "format",
    "seed",
];

fn parse_scalar<T: FromStr>(line: usize, key: &str, value: &str) -> Result<T, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value.parse().map_err(|e: T::Err| ConfigError::Value {
        line,
        key: key.to_string(),
        message: format!("`{value}`: {e}"),
    })
}

fn parse_list<T: FromStr>(line: usize, key: &str, value: &str) -> Result<Vec<T>, ConfigError>
where
    T::Err: std::fmt::Display,
{
    value
        .split(',')
        .map(str::trim)
        .filter(|v| !v.is_empty())
        .map(|v| parse_scalar(line, key, v))
        .collect()
}

fn join<T: std::fmt::Display>(values: &[T]) -> String {
    values.iter().map(|v| v.to_string()).collect::<Vec<_>>().join(", ")
}

impl RunConfig {
    /// Parses config text and validates the resulting system configuration.
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut cfg = RunConfig::default();
        let mut seen = HashSet::new();
        let (mut ue_spacing, mut bs_spacing, mut dx, mut dy) = (None, None, None, None);
        for (idx, raw) in text.lines().enumerate() {
            let line = idx + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            let Some((key, value)) = content.split_once('=') else {
                return Err(ConfigError::Syntax {
                    line,
                    text: content.to_string(),
                });
            };
            let (key, value) = (key.trim(), value.trim());
            if !KEYS.contains(&key) {
                return Err(ConfigError::UnknownKey {
                    line,
                    key: key.to_string(),
                });
            }
            // `seed` is an alias of `master_seed`
            let canonical = if key == "seed" { "master_seed" } else { key };
            if !seen.insert(canonical) {
                return Err(ConfigError::DuplicateKey {
                    line,
                    key: key.to_string(),
                });
            }
            match canonical {
                "m" => cfg.bs_antennas = parse_scalar(line, key, value)?,
                "k" => cfg.ue_antennas = parse_scalar(line, key, value)?,
                "nx" => cfg.ris_x = parse_scalar(line, key, value)?,
                "ny" => cfg.ris_y = parse_scalar(line, key, value)?,
                "p" => cfg.configurations = parse_scalar(line, key, value)?,
                "l" => cfg.transmissions = parse_scalar(line, key, value)?,
                "lambda" => cfg.wavelength = parse_scalar(line, key, value)?,
                "d_u" => ue_spacing = Some(parse_scalar(line, key, value)?),
                "d_b" => bs_spacing = Some(parse_scalar(line, key, value)?),
                "d_x" => dx = Some(parse_scalar(line, key, value)?),
                "d_y" => dy = Some(parse_scalar(line, key, value)?),
                "p_t_dbm" => cfg.transmit_power_dbm = parse_scalar(line, key, value)?,
                "theta_b_deg" => cfg.bs_arrival_deg = parse_scalar(line, key, value)?,
                "theta_r_deg" => cfg.ris_departure_azimuth_deg = parse_scalar(line, key, value)?,
                "phi_r_deg" => cfg.ris_departure_elevation_deg = parse_scalar(line, key, value)?,
                "mode" => cfg.mode = parse_scalar(line, key, value)?,
                "trials" => cfg.trials = parse_scalar(line, key, value)?,
                "master_seed" => cfg.master_seed = parse_scalar(line, key, value)?,
                "snr_db" => cfg.snr_db = parse_scalar(line, key, value)?,
                "sweep_snr_db" => cfg.sweep_snr_db = parse_list(line, key, value)?,
                "sweep_n" => cfg.sweep_n = parse_list(line, key, value)?,
                "sweep_k" => cfg.sweep_k = parse_list(line, key, value)?,
                "sweep_p" => cfg.sweep_p = parse_list(line, key, value)?,
                "out" => cfg.out = (!value.is_empty()).then(|| PathBuf::from(value)),
                "format" => cfg.format = parse_scalar(line, key, value)?,
                _ => unreachable!("key list and match arms disagree"),
            }
        }
        let lambda = cfg.wavelength;
        cfg.ue_spacing = ue_spacing.unwrap_or(lambda / 2.0);
        cfg.bs_spacing = bs_spacing.unwrap_or(lambda / 2.0);
        cfg.ris_spacing_x = dx.unwrap_or(lambda / 4.0);
        cfg.ris_spacing_y = dy.unwrap_or(lambda / 4.0);
        if cfg.snr_db.is_nan() {
            return Err(ConfigError::Value {
                line: 0,
                key: "snr_db".into(),
                message: "NaN".into(),
            });
        }
        cfg.system().validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::parse(&text)
    }

    /// Writes every key explicitly; `parse(serialize(c)) == c`.
    pub fn serialize(&self) -> String {
        let mut s = String::new();
        let mut put = |k: &str, v: String| {
            let _ = writeln!(s, "{k} = {v}");
        };
        put("m", self.bs_antennas.to_string());
        put("k", self.ue_antennas.to_string());
        put("nx", self.ris_x.to_string());
        put("ny", self.ris_y.to_string());
        put("p", self.configurations.to_string());
        put("l", self.transmissions.to_string());
        put("lambda", self.wavelength.to_string());
        put("d_u", self.ue_spacing.to_string());
        put("d_b", self.bs_spacing.to_string());
        put("d_x", self.ris_spacing_x.to_string());
        put("d_y", self.ris_spacing_y.to_string());
        put("p_t_dbm", self.transmit_power_dbm.to_string());
        put("theta_b_deg", self.bs_arrival_deg.to_string());
        put("theta_r_deg", self.ris_departure_azimuth_deg.to_string());
        put("phi_r_deg", self.ris_departure_elevation_deg.to_string());
        put("mode", self.mode.to_string());
        put("trials", self.trials.to_string());
        put("master_seed", self.master_seed.to_string());
        put("snr_db", self.snr_db.to_string());
        put("sweep_snr_db", join(&self.sweep_snr_db));
        put("sweep_n", join(&self.sweep_n));
        put("sweep_k", join(&self.sweep_k));
        put("sweep_p", join(&self.sweep_p));
        put(
            "out",
            self.out.as_ref().map(|p| p.display().to_string()).unwrap_or_default(),
        );
        put("format", self.format.as_str().to_string());
        s
    }

    pub fn system(&self) -> SystemConfig {
        SystemConfig {
            bs_antennas: self.bs_antennas,
            ue_antennas: self.ue_antennas,
            ris_x: self.ris_x,
            ris_y: self.ris_y,
            configurations: self.configurations,
            transmissions: self.transmissions,
            wavelength: self.wavelength,
            ue_spacing: self.ue_spacing,
            bs_spacing: self.bs_spacing,
            ris_spacing_x: self.ris_spacing_x,
            ris_spacing_y: self.ris_spacing_y,
            transmit_power: dbm_to_watts(self.transmit_power_dbm),
            bs_arrival: self.bs_arrival_deg.to_radians(),
            ris_departure_azimuth: self.ris_departure_azimuth_deg.to_radians(),
            ris_departure_elevation: self.ris_departure_elevation_deg.to_radians(),
        }
    }

    pub fn grid(&self) -> SweepGrid {
        SweepGrid {
            snr_db: self.sweep_snr_db.clone(),
            ris_elements: self.sweep_n.clone(),
            ue_antennas: self.sweep_k.clone(),
            configurations: self.sweep_p.clone(),
        }
    }

    pub fn sweep_settings(&self) -> SweepSettings {
        SweepSettings {
            trials: self.trials,
            master_seed: self.master_seed,
            mode: self.mode,
            snr_db: self.snr_db,
            fixed_pose: None,
        }
    }
}
