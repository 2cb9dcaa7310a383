//! Fisher information and Cramer-Rao bounds for (elevation, azimuth) under the
//! directive-gain planar-array model.
//!
//! Angles here are always in the array's own (local) frame. The single-snapshot
//! information matrix is `(2 Pt / σ²) [[P, Q], [Q, R]]`; with K snapshots the
//! prefactor becomes the received SNR `snr_gamma = 2 K Pt / σ²`.

use std::f64::consts::FRAC_PI_2;
use std::fmt;

use nalgebra::Matrix2;
use num_complex::Complex64;
use serde::Serialize;

use crate::channel::element_gain;
use crate::error::{Error, Result};
use crate::geometry::{element_positions, ArrayConfig};

/// Information components with the SNR prefactor removed.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FimEntries {
    pub p: f64,
    pub q: f64,
    pub r: f64,
}

impl FimEntries {
    pub fn determinant(&self) -> f64 {
        self.p * self.r - self.q * self.q
    }

    pub fn matrix(&self, snr_gamma: f64) -> Matrix2<f64> {
        Matrix2::new(self.p, self.q, self.q, self.r) * snr_gamma
    }
}

/// A variance bound that may be infinite (parameter unidentifiable).
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Bound {
    Finite(f64),
    Unbounded,
}

impl Bound {
    pub fn value(&self) -> Option<f64> {
        match *self {
            Bound::Finite(v) => Some(v),
            Bound::Unbounded => None,
        }
    }

    /// Square root of the bound (a standard-deviation floor).
    pub fn sqrt(&self) -> Option<f64> {
        self.value().map(f64::sqrt)
    }

    pub fn is_finite(&self) -> bool {
        matches!(self, Bound::Finite(_))
    }
}

impl fmt::Display for Bound {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Bound::Finite(v) => write!(f, "{v:e}"),
            Bound::Unbounded => f.write_str("unbounded"),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CrlbPair {
    pub crlb_theta: Bound,
    pub crlb_phi: Bound,
}

/// `2 K Pt / σ²`.
pub fn snr_gamma(snapshots: f64, pt: f64, sigma2: f64) -> f64 {
    2.0 * snapshots * pt / sigma2
}

fn check_elevation(theta: f64) -> Result<()> {
    if !theta.is_finite() || theta < 0.0 {
        return Err(Error::InvalidInput(format!("elevation {theta} rad must be in [0, π/2)")));
    }
    if theta >= FRAC_PI_2 {
        return Err(Error::OutsideFrontHalfSpace { theta });
    }
    Ok(())
}

pub fn fim_entries(cfg: &ArrayConfig, theta: f64, phi: f64) -> Result<FimEntries> {
    cfg.validate()?;
    check_elevation(theta)?;
    let (mm, nn) = (cfg.m as f64, cfg.n as f64);
    let (sm, sn) = (cfg.s_m(), cfg.s_n());
    let k = cfg.wavenumber();
    let (g0, p) = (cfg.g0, cfg.p);
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();

    let dg = g0 * p * ct.powf(p - 1.0) * st;
    let p_entry = mm * nn * dg * dg
        + (k * g0 * ct.powf(p + 1.0)).powi(2) * (mm * sn * sp * sp + nn * sm * cp * cp);
    let q_entry = (k * g0 * ct.powf(p)).powi(2) * st * ct * sp * cp * (mm * sn - nn * sm);
    let r_entry = (k * g0 * ct.powf(p) * st).powi(2) * (mm * sn * cp * cp + nn * sm * sp * sp);
    Ok(FimEntries {
        p: p_entry,
        q: q_entry,
        r: r_entry,
    })
}

/// Full K-snapshot information matrix assembled from [`fim_entries`].
pub fn fim_analytic(
    cfg: &ArrayConfig,
    theta: f64,
    phi: f64,
    snapshots: usize,
    pt: f64,
    sigma2: f64,
) -> Result<Matrix2<f64>> {
    Ok(fim_entries(cfg, theta, phi)?.matrix(snr_gamma(snapshots as f64, pt, sigma2)))
}

pub fn crlb_closed_form(
    cfg: &ArrayConfig,
    theta: f64,
    phi: f64,
    snapshots: usize,
    pt: f64,
    sigma2: f64,
) -> Result<CrlbPair> {
    if snapshots == 0 {
        return Err(Error::InvalidInput("snapshot count must be at least 1".into()));
    }
    if !(pt > 0.0 && sigma2 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "powers must be positive (pt = {pt}, sigma2 = {sigma2})"
        )));
    }
    crlb_for_snr(cfg, theta, phi, snr_gamma(snapshots as f64, pt, sigma2))
}

/// Closed-form bounds for a given received SNR `snr_gamma`.
///
/// At exact boresight the azimuth is unidentifiable: the elevation bound is
/// the finite limit and the azimuth bound is [`Bound::Unbounded`].
pub fn crlb_for_snr(cfg: &ArrayConfig, theta: f64, phi: f64, snr_gamma: f64) -> Result<CrlbPair> {
    cfg.validate()?;
    check_elevation(theta)?;
    if !(snr_gamma.is_finite() && snr_gamma > 0.0) {
        return Err(Error::InvalidInput(format!("snr_gamma must be positive, got {snr_gamma}")));
    }
    let (mm, nn) = (cfg.m as f64, cfg.n as f64);
    let (sm, sn) = (cfg.s_m(), cfg.s_n());
    let k = cfg.wavenumber();
    let (g0, p) = (cfg.g0, cfg.p);
    let (st, ct) = theta.sin_cos();
    let (sp, cp) = phi.sin_cos();

    let b = mm * sn * cp * cp + nn * sm * sp * sp;
    let a = mm * sn * sp * sp + nn * sm * cp * cp;
    let pattern = p * p * ct.powf(2.0 * p - 2.0) * st * st;
    let bracket = pattern * b + k * k * ct.powf(2.0 * p + 2.0) * sm * sn;
    let base = mm * nn * g0 * g0 * bracket;
    if !(base.is_finite() && base > 0.0) {
        return Err(Error::DegenerateGeometry(format!(
            "singular Fisher information at theta = {theta}, phi = {phi}"
        )));
    }
    let crlb_theta = b / (snr_gamma * base);

    let crlb_phi = if st == 0.0 {
        Bound::Unbounded
    } else {
        let num = mm * nn * pattern + k * k * ct.powf(2.0 * p + 2.0) * a;
        let den = k * k * ct.powf(2.0 * p) * st * st * base;
        let v = num / (snr_gamma * den);
        if v.is_finite() && den > 0.0 {
            Bound::Finite(v)
        } else {
            Bound::Unbounded
        }
    };
    Ok(CrlbPair {
        crlb_theta: Bound::Finite(crlb_theta),
        crlb_phi,
    })
}

/// Central-difference Fisher information, built directly from the
/// per-element mean `g(θ) exp(j ψ_mn(θ, φ))`.
pub fn fim_numeric(
    cfg: &ArrayConfig,
    theta: f64,
    phi: f64,
    pt: f64,
    sigma2: f64,
    snapshots: usize,
) -> Result<Matrix2<f64>> {
    cfg.validate()?;
    let h = 1e-6 * theta.abs().max(1.0);
    if !(theta > h && theta < FRAC_PI_2 - h) {
        return Err(Error::InvalidInput(format!(
            "elevation {theta} rad too close to the edge of (0, π/2) for step {h}"
        )));
    }
    let positions = element_positions(cfg);
    let k = cfg.wavenumber();
    let mean = |t: f64, f: f64, idx: usize| -> Complex64 {
        let pos = &positions[idx];
        let psi = k * (pos.x * t.sin() * f.cos() + pos.z * t.sin() * f.sin());
        Complex64::from_polar(element_gain(cfg.p, cfg.g0, t), psi)
    };
    let mut fim = Matrix2::zeros();
    for idx in 0..positions.len() {
        let d_theta = (mean(theta + h, phi, idx) - mean(theta - h, phi, idx)) / (2.0 * h);
        let d_phi = (mean(theta, phi + h, idx) - mean(theta, phi - h, idx)) / (2.0 * h);
        let grads = [d_theta, d_phi];
        for i in 0..2 {
            for j in 0..2 {
                fim[(i, j)] += (grads[i] * grads[j].conj()).re;
            }
        }
    }
    Ok(fim * snr_gamma(snapshots as f64, pt, sigma2))
}
