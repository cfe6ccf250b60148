//! Experiment specification: a flat TOML file plus command-line overrides.
//!
//! Precedence, lowest to highest: built-in defaults, the config file, CLI flags.

use std::path::{Path, PathBuf};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::detectors::DetectorKind;
use crate::eigen::DEFAULT_MULTIPLICITY_TOL;
use crate::error::{Result, SenseError};
use crate::evaluation::TracyWidomInput;
use crate::matrix::ComplexMatrix;
use crate::rmt::ConvolutionForm;
use crate::signal::{scale_channel_to_snr, Scenario, ScenarioConfig, ValueCase};

/// Seed used when none is given.
pub const DEFAULT_SEED: u64 = 271_828;
pub const DEFAULT_RUNS: usize = 10_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Experiment {
    Cdf,
    Threshold,
    Detection,
    Sweep,
}

impl Experiment {
    pub fn as_str(self) -> &'static str {
        match self {
            Experiment::Cdf => "cdf",
            Experiment::Threshold => "threshold",
            Experiment::Detection => "detection",
            Experiment::Sweep => "sweep",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Emit {
    #[default]
    Csv,
    Json,
}

impl std::str::FromStr for Emit {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "csv" => Ok(Emit::Csv),
            "json" => Ok(Emit::Json),
            _ => Err(format!("unknown format `{s}` (csv|json)")),
        }
    }
}

/// Where detection thresholds come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Calibration {
    /// Empirical `(1 − P̄_f)`-quantile of noise-only runs.
    #[default]
    Simulated,
    /// Fixed-K theory threshold.
    Theory,
}

impl std::str::FromStr for Calibration {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s {
            "simulated" => Ok(Calibration::Simulated),
            "theory" => Ok(Calibration::Theory),
            _ => Err(format!("unknown calibration `{s}` (simulated|theory)")),
        }
    }
}

fn d_k() -> usize {
    2
}
fn d_n() -> usize {
    1000
}
fn d_case() -> ValueCase {
    ValueCase::Real
}
fn d_detector() -> DetectorKind {
    DetectorKind::Cnd
}
fn d_runs() -> usize {
    DEFAULT_RUNS
}
fn d_one() -> f64 {
    1.0
}
fn d_seed() -> u64 {
    DEFAULT_SEED
}
fn d_rel_tol() -> f64 {
    DEFAULT_MULTIPLICITY_TOL
}

/// Ten evenly spaced false-alarm targets `0.02, 0.04, …, 0.2`.
pub fn default_pfa_grid() -> Vec<f64> {
    (1..=10).map(|i| f64::from(i) / 50.0).collect()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentSpec {
    pub experiment: Experiment,
    #[serde(default = "d_k", alias = "K")]
    pub k: usize,
    #[serde(default = "d_n", alias = "N")]
    pub n: usize,
    #[serde(default = "d_case")]
    pub case: ValueCase,
    /// Defaults to S0 for `cdf`/`threshold` and S1 for `detection`/`sweep`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scenario: Option<Scenario>,
    #[serde(default = "d_detector")]
    pub detector: DetectorKind,
    #[serde(default = "d_runs")]
    pub n_runs: usize,
    #[serde(default = "default_pfa_grid")]
    pub pfa_grid: Vec<f64>,
    /// Target SNR; the channel is rescaled to reach it.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub snr_db: Option<f64>,
    /// SNR values visited by `sweep`.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub snr_grid_db: Vec<f64>,
    #[serde(default = "d_one")]
    pub sigma_s2: f64,
    #[serde(default = "d_one")]
    pub sigma_u2: f64,
    /// `K` rows of `t` real parts; a single all-ones column when absent.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel: Option<Vec<Vec<f64>>>,
    /// Imaginary parts, same shape as `channel`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_im: Option<Vec<Vec<f64>>>,
    #[serde(default = "d_seed")]
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub workers: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output_path: Option<PathBuf>,
    #[serde(default)]
    pub emit: Emit,
    /// `gamma:<shape>:<scale>:<shift>` or `table:<path>`.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tw_source: Option<String>,
    /// Free-text origin of the Tracy–Widom numbers.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tw_provenance: Option<String>,
    #[serde(default)]
    pub calibration: Calibration,
    #[serde(default)]
    pub convolution: ConvolutionForm,
    #[serde(default = "d_rel_tol")]
    pub rel_tol: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cache_dir: Option<PathBuf>,
}

impl ExperimentSpec {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            k: d_k(),
            n: d_n(),
            case: d_case(),
            scenario: None,
            detector: d_detector(),
            n_runs: d_runs(),
            pfa_grid: default_pfa_grid(),
            snr_db: None,
            snr_grid_db: Vec::new(),
            sigma_s2: 1.0,
            sigma_u2: 1.0,
            channel: None,
            channel_im: None,
            seed: DEFAULT_SEED,
            workers: None,
            output_path: None,
            emit: Emit::Csv,
            tw_source: None,
            tw_provenance: None,
            calibration: Calibration::Simulated,
            convolution: ConvolutionForm::General,
            rel_tol: DEFAULT_MULTIPLICITY_TOL,
            cache_dir: None,
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| SenseError::Parse { path: PathBuf::from("<config>"), reason: e.to_string() })
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| SenseError::Io { path: path.to_path_buf(), source })?;
        toml::from_str(&text).map_err(|e| SenseError::Parse { path: path.to_path_buf(), reason: e.to_string() })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| SenseError::arg(format!("cannot serialize spec: {e}")))
    }

    pub fn scenario(&self) -> Scenario {
        self.scenario.unwrap_or(match self.experiment {
            Experiment::Cdf | Experiment::Threshold => Scenario::S0,
            Experiment::Detection | Experiment::Sweep => Scenario::S1,
        })
    }

    /// Field-level validation; every failure is a [`SenseError::Config`].
    pub fn validate(&self) -> Result<()> {
        let bad = SenseError::config;
        if self.k == 0 {
            return Err(bad("K", "antenna count must be at least 1"));
        }
        if self.detector == DetectorKind::Cnd && self.k < 2 {
            return Err(bad("K", "the condition-number detector needs K >= 2"));
        }
        if self.n < 2 {
            return Err(bad("N", "sample count must be at least 2"));
        }
        if self.n_runs == 0 {
            return Err(bad("n_runs", "must be at least 1"));
        }
        if self.pfa_grid.is_empty() {
            return Err(bad("pfa_grid", "must contain at least one probability"));
        }
        if let Some(p) = self.pfa_grid.iter().find(|p| !(**p > 0.0 && **p < 1.0)) {
            return Err(SenseError::config("pfa_grid", format!("{p} is outside (0, 1)")));
        }
        if self.pfa_grid.windows(2).any(|w| w[1] <= w[0]) {
            return Err(bad("pfa_grid", "values must be strictly increasing"));
        }
        if !(self.sigma_u2 > 0.0 && self.sigma_u2.is_finite()) {
            return Err(bad("sigma_u2", "noise variance must be positive and finite"));
        }
        if !(self.rel_tol > 0.0 && self.rel_tol < 1.0) {
            return Err(bad("rel_tol", "must lie in (0, 1)"));
        }
        if self.workers == Some(0) {
            return Err(bad("workers", "must be at least 1"));
        }
        if let Some(snr) = self.snr_db {
            if !snr.is_finite() {
                return Err(bad("snr_db", "must be finite"));
            }
        }
        match (self.experiment, self.scenario()) {
            (Experiment::Threshold, Scenario::S1) => return Err(bad("scenario", "threshold experiments run under s0")),
            (Experiment::Detection | Experiment::Sweep, Scenario::S0) => {
                return Err(bad("scenario", "detection experiments need s1"))
            }
            _ => {}
        }
        if self.scenario() == Scenario::S1 {
            if !(self.sigma_s2 > 0.0 && self.sigma_s2.is_finite()) {
                return Err(bad("sigma_s2", "signal variance must be positive under s1"));
            }
            self.base_channel()?;
        }
        if self.experiment == Experiment::Sweep {
            if self.snr_grid_db.is_empty() {
                return Err(bad("snr_grid_db", "sweep needs at least one SNR value"));
            }
            if self.snr_grid_db.iter().any(|s| !s.is_finite()) {
                return Err(bad("snr_grid_db", "values must be finite"));
            }
        }
        self.tracy_widom()?;
        Ok(())
    }

    /// Parsed Tracy–Widom input, if any.
    pub fn tracy_widom(&self) -> Result<Option<TracyWidomInput>> {
        self.tw_source.as_deref().map(TracyWidomInput::parse).transpose()
    }

    fn base_channel(&self) -> Result<ComplexMatrix> {
        let bad = SenseError::config;
        let Some(re) = &self.channel else {
            if self.channel_im.is_some() {
                return Err(bad("channel_im", "given without channel"));
            }
            return Ok(ComplexMatrix::from_vec(self.k, 1, vec![Complex64::new(1.0, 0.0); self.k]));
        };
        let t = re.first().map_or(0, Vec::len);
        if re.len() != self.k || t == 0 || re.iter().any(|r| r.len() != t) {
            return Err(SenseError::config("channel", format!("expected {} rows of equal nonzero length", self.k)));
        }
        let im = match &self.channel_im {
            None => vec![vec![0.0; t]; self.k],
            Some(im) => {
                if im.len() != self.k || im.iter().any(|r| r.len() != t) {
                    return Err(bad("channel_im", "must have the same shape as channel"));
                }
                if self.case == ValueCase::Real && im.iter().flatten().any(|v| *v != 0.0) {
                    return Err(bad("channel_im", "real-valued case requires real channel gains"));
                }
                im.clone()
            }
        };
        let data: Vec<Complex64> =
            re.iter().zip(&im).flat_map(|(r, i)| r.iter().zip(i).map(|(a, b)| Complex64::new(*a, *b))).collect();
        if data.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(bad("channel", "gains must be finite"));
        }
        let h = ComplexMatrix::from_vec(self.k, t, data);
        if h.is_zero() {
            return Err(bad("channel", "channel must have at least one nonzero entry"));
        }
        Ok(h)
    }

    /// Channel after rescaling to `snr_db` (the argument, else the spec's).
    pub fn channel_matrix(&self, snr_db: Option<f64>) -> Result<ComplexMatrix> {
        let h = self.base_channel()?;
        match snr_db.or(self.snr_db) {
            Some(db) => scale_channel_to_snr(&h, self.sigma_s2, self.sigma_u2, self.k, db),
            None => Ok(h),
        }
    }

    pub fn noise_config(&self) -> ScenarioConfig {
        ScenarioConfig::noise_only(self.k, self.n, self.case, self.sigma_u2, self.seed)
    }

    pub fn signal_config(&self, snr_db: Option<f64>) -> Result<ScenarioConfig> {
        let h = self.channel_matrix(snr_db)?;
        Ok(ScenarioConfig::with_signal(self.k, self.n, self.case, h, self.sigma_s2, self.sigma_u2, self.seed))
    }

    /// The spec as echoed in results: scheduling and output location removed
    /// so that outputs do not depend on them.
    pub fn echo(&self) -> Self {
        Self { workers: None, output_path: None, ..self.clone() }
    }
}

/// Values supplied on the command line; `None` leaves the spec untouched.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub seed: Option<u64>,
    pub workers: Option<usize>,
    pub out: Option<PathBuf>,
    pub format: Option<Emit>,
    pub k: Option<usize>,
    pub n: Option<usize>,
    pub case: Option<ValueCase>,
    pub scenario: Option<Scenario>,
    pub detector: Option<DetectorKind>,
    pub snr_db: Option<f64>,
    pub pfa: Option<Vec<f64>>,
    pub runs: Option<usize>,
    pub tw_source: Option<String>,
    pub calibration: Option<Calibration>,
    pub cache_dir: Option<PathBuf>,
}

impl Overrides {
    pub fn apply(self, spec: &mut ExperimentSpec) {
        macro_rules! set {
            ($src:ident => $dst:ident) => {
                if let Some(v) = self.$src {
                    spec.$dst = v;
                }
            };
            ($src:ident => some $dst:ident) => {
                if let Some(v) = self.$src {
                    spec.$dst = Some(v);
                }
            };
        }
        set!(seed => seed);
        set!(workers => some workers);
        set!(out => some output_path);
        set!(format => emit);
        set!(k => k);
        set!(n => n);
        set!(case => case);
        set!(scenario => some scenario);
        set!(detector => detector);
        set!(snr_db => some snr_db);
        set!(pfa => pfa_grid);
        set!(runs => n_runs);
        set!(tw_source => some tw_source);
        set!(calibration => calibration);
        set!(cache_dir => some cache_dir);
    }
}
