//! Seeded Monte Carlo sweeps over the estimators, with CSV output.

mod config;

use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;

pub use config::{EstimatorSpec, ExperimentConfig, IgssSettings, SweepAxis};

use crate::channel::SignalModel;
use crate::crlb::{crlb_closed_form, Bound, CrlbPair};
use crate::error::{Error, Result};
use crate::estimators::{fa_root_music, pri_estimate, pri_igss, rr_root_music, EstimateTrace, EstimatorKind};
use crate::geometry::GlobalDirection;

pub const CSV_HEADER: [&str; 11] = [
    "sweep_name",
    "sweep_value",
    "estimator",
    "rmse_theta_rad",
    "rmse_phi_rad",
    "crlb_theta_rad2",
    "crlb_phi_rad2",
    "mean_iterations",
    "mean_rotations",
    "trials",
    "failures",
];

/// Largest tolerated share of failed trials at one sweep point.
pub const MAX_FAILURE_RATE: f64 = 0.10;

#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub sweep_value: f64,
    pub estimator: String,
    pub rmse_theta: f64,
    pub rmse_phi: f64,
    pub crlb_theta: Bound,
    pub crlb_phi: Bound,
    pub mean_iterations: f64,
    pub mean_rotations: f64,
    pub trials: usize,
    pub failures: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SweepResult {
    pub sweep: SweepAxis,
    /// Sorted by sweep value, then estimator label.
    pub rows: Vec<SweepRow>,
}

impl SweepResult {
    pub fn empty(sweep: SweepAxis) -> Self {
        Self { sweep, rows: Vec::new() }
    }

    pub fn row(&self, value: f64, estimator: &str) -> Option<&SweepRow> {
        self.rows
            .iter()
            .find(|r| r.sweep_value == value && r.estimator == estimator)
    }

    /// Rows of one estimator in sweep order.
    pub fn series(&self, estimator: &str) -> Vec<&SweepRow> {
        self.rows.iter().filter(|r| r.estimator == estimator).collect()
    }

    fn sort(&mut self) {
        self.rows.sort_by(|a, b| {
            a.sweep_value
                .total_cmp(&b.sweep_value)
                .then_with(|| a.estimator.cmp(&b.estimator))
        });
    }
}

/// Wrap to (-π, π].
pub fn wrap_angle(x: f64) -> f64 {
    let y = x.rem_euclid(2.0 * PI);
    if y > PI {
        y - 2.0 * PI
    } else {
        y
    }
}

/// Root-mean-square of wrapped angle errors.
pub fn rmse(estimates: &[f64], truth: f64) -> Result<f64> {
    if estimates.is_empty() {
        return Err(Error::InvalidInput("rmse of an empty list".into()));
    }
    let sum: f64 = estimates.iter().map(|e| wrap_angle(e - truth).powi(2)).sum();
    Ok((sum / estimates.len() as f64).sqrt())
}

fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Seed for one trial at one sweep point. Estimators at the same point and
/// trial share it, so their errors are paired.
pub fn trial_seed(base: u64, sweep_value: f64, trial: usize) -> u64 {
    base ^ mix(mix(sweep_value.to_bits()).wrapping_add(trial as u64))
}

/// Truth, signal model and grid size at one sweep point.
#[derive(Debug, Clone, Copy)]
struct Point {
    value: f64,
    truth: GlobalDirection,
    model: SignalModel,
    q: Option<usize>,
}

fn point(cfg: &ExperimentConfig, value: f64) -> Result<Point> {
    let (mut theta, mut snr, mut q) = (cfg.theta_deg, cfg.snr_db, None);
    match cfg.sweep {
        SweepAxis::Snr => snr = value,
        SweepAxis::Theta => theta = value,
        SweepAxis::Q => q = Some(value as usize),
        SweepAxis::Iteration => {}
    }
    Ok(Point {
        value,
        truth: GlobalDirection::from_degrees(theta, cfg.phi_deg)?,
        model: cfg.signal_model(snr)?,
        q,
    })
}

fn run_one(
    cfg: &ExperimentConfig,
    spec: &EstimatorSpec,
    pt: &Point,
    rr_iterations: usize,
    seed: u64,
) -> Result<EstimateTrace> {
    let q = pt.q.or(spec.q).unwrap_or(cfg.q);
    match spec.kind {
        EstimatorKind::Fa => fa_root_music(&cfg.array, &pt.truth, &pt.model, cfg.snapshots, seed),
        EstimatorKind::Rr => rr_root_music(&cfg.array, &pt.truth, &pt.model, cfg.snapshots, rr_iterations, seed),
        EstimatorKind::Pri => Ok(pri_estimate(&cfg.array, &cfg.pri_config(q)?, &pt.truth, &pt.model, seed)?.trace),
        EstimatorKind::PriIgss => pri_igss(
            &cfg.array,
            &cfg.pri_config(q)?,
            &cfg.igss_config()?,
            &pt.truth,
            &pt.model,
            seed,
        ),
    }
}

/// Reference bound for one row.
///
/// The fixed array is bounded at the true direction. The rotating estimators
/// are bounded at the direction an ideally aligned array would see, which is
/// its boresight; there the azimuth bound is unbounded. A true direction
/// behind the fixed array has no finite bound either.
pub fn reference_crlb(
    cfg: &ExperimentConfig,
    kind: EstimatorKind,
    truth: &GlobalDirection,
    model: &SignalModel,
    snapshots: usize,
) -> CrlbPair {
    let theta = if kind == EstimatorKind::Fa { truth.theta() } else { 0.0 };
    crlb_closed_form(&cfg.array, theta, truth.phi(), snapshots, model.pt, model.sigma2).unwrap_or(CrlbPair {
        crlb_theta: Bound::Unbounded,
        crlb_phi: Bound::Unbounded,
    })
}

struct Aggregate {
    rmse_theta: f64,
    rmse_phi: f64,
    mean_iterations: f64,
    mean_rotations: f64,
    failures: usize,
}

fn aggregate(
    cfg: &ExperimentConfig,
    pt: &Point,
    outcomes: &[Result<EstimateTrace>],
    estimate: impl Fn(&EstimateTrace) -> (GlobalDirection, f64, f64),
) -> Result<Aggregate> {
    let ok: Vec<(GlobalDirection, f64, f64)> = outcomes.iter().flatten().map(estimate).collect();
    let failures = outcomes.len() - ok.len();
    if failures as f64 > MAX_FAILURE_RATE * outcomes.len() as f64 || ok.is_empty() {
        return Err(Error::TooManyFailures {
            sweep: cfg.sweep.to_string(),
            value: pt.value,
            failures,
            trials: outcomes.len(),
        });
    }
    let thetas: Vec<f64> = ok.iter().map(|(d, _, _)| d.theta()).collect();
    let phis: Vec<f64> = ok.iter().map(|(d, _, _)| d.phi()).collect();
    let n = ok.len() as f64;
    Ok(Aggregate {
        rmse_theta: rmse(&thetas, pt.truth.theta())?,
        rmse_phi: rmse(&phis, pt.truth.phi())?,
        mean_iterations: ok.iter().map(|(_, i, _)| i).sum::<f64>() / n,
        mean_rotations: ok.iter().map(|(_, _, r)| r).sum::<f64>() / n,
        failures,
    })
}

fn run_trials(
    cfg: &ExperimentConfig,
    spec: &EstimatorSpec,
    pt: &Point,
    rr_iterations: usize,
    seed_value: f64,
) -> Vec<Result<EstimateTrace>> {
    (0..cfg.trials)
        .into_par_iter()
        .map(|t| run_one(cfg, spec, pt, rr_iterations, trial_seed(cfg.seed, seed_value, t)))
        .collect()
}

fn row(cfg: &ExperimentConfig, spec: &EstimatorSpec, pt: &Point, agg: Aggregate, snapshots: usize) -> SweepRow {
    let bound = reference_crlb(cfg, spec.kind, &pt.truth, &pt.model, snapshots);
    SweepRow {
        sweep_value: pt.value,
        estimator: spec.label(),
        rmse_theta: agg.rmse_theta,
        rmse_phi: agg.rmse_phi,
        crlb_theta: bound.crlb_theta,
        crlb_phi: bound.crlb_phi,
        mean_iterations: agg.mean_iterations,
        mean_rotations: agg.mean_rotations,
        trials: cfg.trials,
        failures: agg.failures,
    }
}

/// Runs every estimator at every sweep point.
///
/// For the `iteration` axis each trial is run once and its estimate is read
/// off after each listed iteration; the curve of a trial that stopped early
/// holds its final value.
pub fn run_monte_carlo(cfg: &ExperimentConfig) -> Result<SweepResult> {
    cfg.validate()?;
    let values = cfg.sweep_values();
    let mut result = SweepResult::empty(cfg.sweep);

    if cfg.sweep == SweepAxis::Iteration {
        let last = values.last().copied().unwrap_or(1.0) as usize;
        let pt = point(cfg, 0.0)?;
        for spec in &cfg.estimators {
            let outcomes = run_trials(cfg, spec, &pt, last, 0.0);
            for &v in &values {
                let i = v as usize;
                let at = Point { value: v, ..pt };
                let agg = aggregate(cfg, &at, &outcomes, |t| {
                    let rotations = match spec.kind {
                        EstimatorKind::Rr => i.min(t.rotation_count),
                        _ => t.rotation_count,
                    };
                    (t.estimate_at(i), i.min(t.iterations()) as f64, rotations as f64)
                })?;
                let snapshots = match spec.kind {
                    EstimatorKind::PriIgss => i * cfg.snapshots,
                    _ => cfg.snapshots,
                };
                result.rows.push(row(cfg, spec, &at, agg, snapshots));
            }
        }
    } else {
        for &v in &values {
            let pt = point(cfg, v)?;
            for spec in &cfg.estimators {
                let outcomes = run_trials(cfg, spec, &pt, cfg.rr_iterations, v);
                let agg = aggregate(cfg, &pt, &outcomes, |t| {
                    (t.final_estimate, t.iterations() as f64, t.rotation_count as f64)
                })?;
                let snapshots = match spec.kind {
                    EstimatorKind::PriIgss => (agg.mean_iterations.round() as usize).max(1) * cfg.snapshots,
                    _ => cfg.snapshots,
                };
                result.rows.push(row(cfg, spec, &pt, agg, snapshots));
            }
        }
    }
    result.sort();
    Ok(result)
}

fn with_axis(cfg: &ExperimentConfig, axis: SweepAxis) -> ExperimentConfig {
    let mut c = cfg.clone();
    if c.sweep != axis {
        c.sweep = axis;
        c.values.clear();
    }
    c
}

/// RMSE against SNR at the configured direction.
pub fn sweep_snr(cfg: &ExperimentConfig) -> Result<SweepResult> {
    run_monte_carlo(&with_axis(cfg, SweepAxis::Snr))
}

/// RMSE against elevation at the configured SNR.
pub fn sweep_theta(cfg: &ExperimentConfig) -> Result<SweepResult> {
    run_monte_carlo(&with_axis(cfg, SweepAxis::Theta))
}

/// RMSE against the pre-rotation grid size.
pub fn sweep_q(cfg: &ExperimentConfig) -> Result<SweepResult> {
    run_monte_carlo(&with_axis(cfg, SweepAxis::Q))
}

/// Per-iteration RMSE at elevation `theta_deg`.
pub fn convergence_curve(cfg: &ExperimentConfig, theta_deg: f64) -> Result<SweepResult> {
    let mut c = with_axis(cfg, SweepAxis::Iteration);
    c.theta_deg = theta_deg;
    run_monte_carlo(&c)
}

/// `x` with nine significant digits.
pub fn format_float(x: f64) -> String {
    if x.is_nan() {
        "nan".into()
    } else if x.is_infinite() {
        if x > 0.0 { "inf" } else { "-inf" }.into()
    } else {
        format!("{x:.8e}")
    }
}

fn format_bound(b: &Bound) -> String {
    format_float(b.value().unwrap_or(f64::INFINITY))
}

/// Serialize to any writer; unbounded CRLB cells are written as `inf`.
pub fn write_csv_to<W: Write>(result: &SweepResult, out: W) -> csv::Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    let mut rows: Vec<&SweepRow> = result.rows.iter().collect();
    rows.sort_by(|a, b| {
        a.sweep_value
            .total_cmp(&b.sweep_value)
            .then_with(|| a.estimator.cmp(&b.estimator))
    });
    for r in rows {
        w.write_record([
            result.sweep.name().to_string(),
            format_float(r.sweep_value),
            r.estimator.clone(),
            format_float(r.rmse_theta),
            format_float(r.rmse_phi),
            format_bound(&r.crlb_theta),
            format_bound(&r.crlb_phi),
            format_float(r.mean_iterations),
            format_float(r.mean_rotations),
            r.trials.to_string(),
            r.failures.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_csv(result: &SweepResult, path: &Path) -> Result<()> {
    let file = std::fs::File::create(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    write_csv_to(result, std::io::BufWriter::new(file)).map_err(|source| Error::Csv {
        path: path.to_path_buf(),
        source,
    })
}
