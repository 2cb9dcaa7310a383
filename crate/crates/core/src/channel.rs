//! Directive element gain and synthetic snapshot generation for one
//! narrowband emitter.

use std::f64::consts::{FRAC_PI_2, PI};

use nalgebra::DMatrix;
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{boresight_deflection, steering_vector, to_local, ArrayConfig, RotationMatrix, UnitVector3};

/// Deterministic generator used for every simulated collection.
pub type SimRng = ChaCha8Rng;

pub fn sim_rng(seed: u64) -> SimRng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Statistics of the emitted symbols.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Waveform {
    /// Circular complex Gaussian, `s ~ CN(0, Pt)`.
    #[default]
    Gaussian,
    /// `|s|² = Pt` exactly with uniform random phase.
    ConstantModulus,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SignalModel {
    /// Transmit power, linear.
    pub pt: f64,
    /// Noise power per element, linear.
    pub sigma2: f64,
    pub waveform: Waveform,
}

impl SignalModel {
    pub fn new(pt: f64, sigma2: f64, waveform: Waveform) -> Result<Self> {
        let model = Self { pt, sigma2, waveform };
        model.validate()?;
        Ok(model)
    }

    /// Model with `Pt / σ² = snr_db` and the given transmit power.
    pub fn from_snr_db(pt: f64, snr_db: f64, waveform: Waveform) -> Result<Self> {
        Self::new(pt, pt / 10f64.powf(snr_db / 10.0), waveform)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.pt.is_finite() && self.pt > 0.0) {
            return Err(Error::InvalidConfig(format!("pt must be positive, got {}", self.pt)));
        }
        if !(self.sigma2.is_finite() && self.sigma2 > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "sigma2 must be positive, got {}",
                self.sigma2
            )));
        }
        Ok(())
    }

    pub fn snr_db(&self) -> f64 {
        10.0 * (self.pt / self.sigma2).log10()
    }
}

/// MN x K block of received samples, one column per snapshot.
#[derive(Debug, Clone, PartialEq)]
pub struct SnapshotBlock {
    data: DMatrix<Complex64>,
}

impl SnapshotBlock {
    pub fn new(data: DMatrix<Complex64>) -> Result<Self> {
        if data.ncols() == 0 || data.nrows() == 0 {
            return Err(Error::InvalidInput("snapshot block must be non-empty".into()));
        }
        Ok(Self { data })
    }

    pub fn data(&self) -> &DMatrix<Complex64> {
        &self.data
    }

    pub fn elements(&self) -> usize {
        self.data.nrows()
    }

    pub fn snapshots(&self) -> usize {
        self.data.ncols()
    }
}

/// Amplitude pattern `g0 cos^p(φ)` on the front half-space, zero elsewhere.
pub fn element_gain(p: f64, g0: f64, deflection: f64) -> f64 {
    if (0.0..FRAC_PI_2).contains(&deflection) {
        g0 * deflection.cos().powf(p)
    } else {
        0.0
    }
}

pub fn generate_snapshots(
    cfg: &ArrayConfig,
    rotation: &RotationMatrix,
    u_global: &UnitVector3,
    model: &SignalModel,
    snapshots: usize,
    seed: u64,
) -> Result<SnapshotBlock> {
    generate_snapshots_with(cfg, rotation, u_global, model, snapshots, &mut sim_rng(seed))
}

/// Same as [`generate_snapshots`], drawing from a caller-owned generator so
/// consecutive collections within one run stay independent.
pub fn generate_snapshots_with<R: Rng + ?Sized>(
    cfg: &ArrayConfig,
    rotation: &RotationMatrix,
    u_global: &UnitVector3,
    model: &SignalModel,
    snapshots: usize,
    rng: &mut R,
) -> Result<SnapshotBlock> {
    if snapshots == 0 {
        return Err(Error::InvalidInput("snapshot count must be at least 1".into()));
    }
    let u_local = to_local(rotation, u_global);
    let gain = element_gain(cfg.p, cfg.g0, boresight_deflection(&u_local));
    let response = steering_vector(cfg, &u_local) * Complex64::new(gain, 0.0);
    let noise_scale = (model.sigma2 / 2.0).sqrt();
    let rows = cfg.element_count();

    let mut data = DMatrix::<Complex64>::zeros(rows, snapshots);
    for k in 0..snapshots {
        let s = draw_symbol(model, rng);
        let mut col = data.column_mut(k);
        for (i, out) in col.iter_mut().enumerate() {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            *out = s * response[i] + Complex64::new(re, im) * noise_scale;
        }
    }
    Ok(SnapshotBlock { data })
}

fn draw_symbol<R: Rng + ?Sized>(model: &SignalModel, rng: &mut R) -> Complex64 {
    match model.waveform {
        Waveform::Gaussian => {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            Complex64::new(re, im) * (model.pt / 2.0).sqrt()
        }
        Waveform::ConstantModulus => {
            let phase = rng.random_range(0.0..2.0 * PI);
            Complex64::from_polar(model.pt.sqrt(), phase)
        }
    }
}

/// Total received energy `Σ_k ‖y[k]‖²`.
pub fn received_power(block: &SnapshotBlock) -> f64 {
    block.data.norm_squared()
}
