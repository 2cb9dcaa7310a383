//! TOML experiment description.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::{SignalModel, Waveform};
use crate::error::{Error, Result};
use crate::estimators::{EstimatorKind, IgssConfig, PriConfig};
use crate::geometry::{ArrayConfig, GlobalDirection};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SweepAxis {
    Snr,
    Theta,
    Q,
    Iteration,
}

impl SweepAxis {
    pub fn name(&self) -> &'static str {
        match self {
            Self::Snr => "snr",
            Self::Theta => "theta",
            Self::Q => "q",
            Self::Iteration => "iteration",
        }
    }

    /// Grid used when a config omits `values`.
    pub fn default_values(&self) -> Vec<f64> {
        match self {
            Self::Snr => vec![-15.0, -5.0, 5.0, 15.0, 25.0, 35.0],
            Self::Theta => vec![5.0, 25.0, 45.0, 65.0, 85.0, 105.0, 125.0, 145.0, 165.0, 175.0],
            Self::Q => vec![1.0, 2.0, 3.0, 4.0],
            Self::Iteration => (1..=20).map(f64::from).collect(),
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// An estimator, optionally with its own pre-rotation grid size.
///
/// Written `pri-igss` or `pri-igss@q4`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct EstimatorSpec {
    pub kind: EstimatorKind,
    pub q: Option<usize>,
}

impl EstimatorSpec {
    pub fn new(kind: EstimatorKind) -> Self {
        Self { kind, q: None }
    }

    pub fn with_q(kind: EstimatorKind, q: usize) -> Self {
        Self { kind, q: Some(q) }
    }

    pub fn label(&self) -> String {
        match self.q {
            Some(q) => format!("{}@q{q}", self.kind),
            None => self.kind.to_string(),
        }
    }
}

impl fmt::Display for EstimatorSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.label())
    }
}

impl FromStr for EstimatorSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let Some((kind, q)) = s.split_once("@q") else {
            return Ok(Self::new(kind_from(s)?));
        };
        let kind = kind_from(kind)?;
        if !matches!(kind, EstimatorKind::Pri | EstimatorKind::PriIgss) {
            return Err(Error::InvalidConfig(format!("{s:?}: only pri and pri-igss take a q suffix")));
        }
        let q = q
            .parse::<usize>()
            .ok()
            .filter(|q| *q >= 1)
            .ok_or_else(|| Error::InvalidConfig(format!("{s:?}: bad q suffix")))?;
        Ok(Self::with_q(kind, q))
    }
}

fn kind_from(s: &str) -> Result<EstimatorKind> {
    s.parse()
}

impl Serialize for EstimatorSpec {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.label())
    }
}

impl<'de> Deserialize<'de> for EstimatorSpec {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct IgssSettings {
    pub decay_gamma: f64,
    pub delta_max_deg: f64,
    pub eps_rad: f64,
    pub max_iterations: usize,
    pub max_refinement: usize,
}

impl Default for IgssSettings {
    fn default() -> Self {
        let d = IgssConfig::default();
        Self {
            decay_gamma: d.decay_gamma,
            delta_max_deg: d.delta_max.to_degrees(),
            eps_rad: d.eps,
            max_iterations: d.max_iterations,
            max_refinement: d.max_refinement,
        }
    }
}

/// One Monte Carlo experiment. Angles are in degrees, SNR in dB.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub array: ArrayConfig,
    /// Transmit power, linear.
    pub pt: f64,
    /// `Pt / σ²`; the swept quantity for `snr` sweeps.
    pub snr_db: f64,
    pub waveform: Waveform,
    pub theta_deg: f64,
    pub phi_deg: f64,
    pub estimators: Vec<EstimatorSpec>,
    pub trials: usize,
    pub seed: u64,
    /// Snapshots per collection (per orientation, per rotation, per greedy iteration).
    pub snapshots: usize,
    /// Pre-rotation candidates per axis, for estimators without their own.
    pub q: usize,
    pub rr_iterations: usize,
    pub igss: IgssSettings,
    pub sweep: SweepAxis,
    /// Sorted sweep grid; the axis default when left empty.
    pub values: Vec<f64>,
    pub output: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            array: ArrayConfig::default(),
            pt: 1.0,
            snr_db: -5.0,
            waveform: Waveform::Gaussian,
            theta_deg: 85.0,
            phi_deg: 45.0,
            estimators: EstimatorKind::ALL.into_iter().map(EstimatorSpec::new).collect(),
            trials: 200,
            seed: 1,
            snapshots: 512,
            q: 3,
            rr_iterations: 10,
            igss: IgssSettings::default(),
            sweep: SweepAxis::Theta,
            values: Vec::new(),
            output: None,
        }
    }
}

fn in_file(path: &Path, e: Error) -> Error {
    match e {
        Error::InvalidConfig(msg) => Error::InvalidConfig(format!("{}: {msg}", path.display())),
        other => other,
    }
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        let cfg = Self::parse_unchecked(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Parses without validating, for callers that adjust fields first.
    pub fn parse_unchecked(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::InvalidConfig(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let cfg = Self::load_unchecked(path)?.0;
        cfg.validate().map_err(|e| in_file(path, e))?;
        Ok(cfg)
    }

    /// Reads and parses a file without validating. The flag is true when the
    /// file names a `sweep` axis itself.
    pub fn load_unchecked(path: &Path) -> Result<(Self, bool)> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        let cfg = Self::parse_unchecked(&text).map_err(|e| in_file(path, e))?;
        let names_sweep = text.parse::<toml::Table>().is_ok_and(|t| t.contains_key("sweep"));
        Ok((cfg, names_sweep))
    }

    /// Sweep grid, falling back to the axis default.
    pub fn sweep_values(&self) -> Vec<f64> {
        if self.values.is_empty() {
            self.sweep.default_values()
        } else {
            self.values.clone()
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.check().map_err(|e| match e {
            Error::InvalidInput(m) => Error::InvalidConfig(m),
            other => other,
        })
    }

    fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidConfig(m));
        self.array.validate()?;
        self.signal_model(self.snr_db)?;
        GlobalDirection::from_degrees(self.theta_deg, self.phi_deg)?;
        if self.trials == 0 {
            return bad("trials must be at least 1".into());
        }
        if self.snapshots == 0 || self.rr_iterations == 0 || self.q == 0 {
            return bad("snapshots, rr_iterations and q must be at least 1".into());
        }
        if self.estimators.is_empty() {
            return bad("estimators must not be empty".into());
        }
        let mut labels: Vec<String> = self.estimators.iter().map(|e| e.label()).collect();
        labels.sort();
        if labels.windows(2).any(|w| w[0] == w[1]) {
            return bad("estimators contain duplicates".into());
        }
        self.igss_config()?;
        let values = self.sweep_values();
        if values.iter().any(|v| !v.is_finite()) {
            return bad("sweep values must be finite".into());
        }
        if values.windows(2).any(|w| w[0] >= w[1]) {
            return bad("sweep values must be strictly increasing".into());
        }
        for &v in &values {
            match self.sweep {
                SweepAxis::Snr => {
                    self.signal_model(v)?;
                }
                SweepAxis::Theta => {
                    GlobalDirection::from_degrees(v, self.phi_deg)?;
                }
                SweepAxis::Q | SweepAxis::Iteration => {
                    if v < 1.0 || v.fract() != 0.0 {
                        return bad(format!("{} values must be positive integers, got {v}", self.sweep));
                    }
                }
            }
        }
        Ok(())
    }

    pub fn signal_model(&self, snr_db: f64) -> Result<SignalModel> {
        SignalModel::from_snr_db(self.pt, snr_db, self.waveform)
    }

    pub fn igss_config(&self) -> Result<IgssConfig> {
        let c = IgssConfig {
            decay_gamma: self.igss.decay_gamma,
            delta_max: self.igss.delta_max_deg.to_radians(),
            eps: self.igss.eps_rad,
            max_iterations: self.igss.max_iterations,
            max_refinement: self.igss.max_refinement,
            snapshots: self.snapshots,
        };
        c.validate()?;
        Ok(c)
    }

    pub fn pri_config(&self, q: usize) -> Result<PriConfig> {
        PriConfig::equispaced(q, self.snapshots)
    }
}
