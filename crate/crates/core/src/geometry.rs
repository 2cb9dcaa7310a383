//! Array layout, direction-vector algebra and the mechanical rotation model.
//!
//! The planar array lies in the x-z plane with its boresight along +y. Elements
//! are indexed x-fastest, `index = n * M + m`, so the full manifold is the
//! Kronecker product `a_z ⊗ a_x`.

use std::f64::consts::PI;

use nalgebra::{DVector, Matrix3, Vector3};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Tolerance on the norm of vectors handed to [`UnitVector3::new`].
pub const UNIT_TOLERANCE: f64 = 1e-9;

/// Squared sine below which azimuth (or the gimbal yaw) is treated as undefined.
const POLE_EPS: f64 = 1e-24;

/// Uniform planar array with directive elements.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArrayConfig {
    /// Elements along x (odd).
    pub m: usize,
    /// Elements along z (odd).
    pub n: usize,
    /// Spacing along x, meters.
    pub d_x: f64,
    /// Spacing along z, meters.
    pub d_z: f64,
    /// Carrier wavelength, meters.
    pub lambda: f64,
    /// Directivity exponent of the element pattern.
    pub p: f64,
    /// Channel amplitude gain at boresight.
    pub g0: f64,
}

impl Default for ArrayConfig {
    /// 7 x 7 half-wavelength array at lambda = 0.125 m, p = 1, g0 = 1.
    fn default() -> Self {
        Self {
            m: 7,
            n: 7,
            d_x: 0.0625,
            d_z: 0.0625,
            lambda: 0.125,
            p: 1.0,
            g0: 1.0,
        }
    }
}

impl ArrayConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidConfig(msg));
        if self.m == 0 || self.m % 2 == 0 {
            return bad(format!("m must be a positive odd integer, got {}", self.m));
        }
        if self.n == 0 || self.n % 2 == 0 {
            return bad(format!("n must be a positive odd integer, got {}", self.n));
        }
        for (name, v) in [
            ("d_x", self.d_x),
            ("d_z", self.d_z),
            ("lambda", self.lambda),
            ("p", self.p),
            ("g0", self.g0),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be finite and positive, got {v}"));
            }
        }
        Ok(())
    }

    pub fn element_count(&self) -> usize {
        self.m * self.n
    }

    /// Wavenumber `2π/λ`.
    pub fn wavenumber(&self) -> f64 {
        2.0 * PI / self.lambda
    }

    /// `Σ x_m²` over one row of the array.
    pub fn s_m(&self) -> f64 {
        let m = self.m as f64;
        m * (m * m - 1.0) / 12.0 * self.d_x * self.d_x
    }

    /// `Σ z_n²` over one column of the array.
    pub fn s_n(&self) -> f64 {
        let n = self.n as f64;
        n * (n * n - 1.0) / 12.0 * self.d_z * self.d_z
    }

    /// Centered coordinate of the m-th element along x.
    pub fn x_coord(&self, m: usize) -> f64 {
        centered(m, self.m, self.d_x)
    }

    /// Centered coordinate of the n-th element along z.
    pub fn z_coord(&self, n: usize) -> f64 {
        centered(n, self.n, self.d_z)
    }
}

fn centered(i: usize, count: usize, spacing: f64) -> f64 {
    (i as f64 - (count as f64 - 1.0) / 2.0) * spacing
}

/// Emitter direction as (elevation from +y, azimuth in the x-z plane from +x).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GlobalDirection {
    theta: f64,
    phi: f64,
}

impl GlobalDirection {
    pub fn new(theta: f64, phi: f64) -> Result<Self> {
        if !(theta.is_finite() && (0.0..=PI).contains(&theta)) {
            return Err(Error::InvalidInput(format!(
                "elevation {theta} rad outside [0, π]"
            )));
        }
        if !(phi.is_finite() && (-PI..=PI).contains(&phi)) {
            return Err(Error::InvalidInput(format!(
                "azimuth {phi} rad outside [-π, π]"
            )));
        }
        Ok(Self { theta, phi })
    }

    pub fn from_degrees(theta_deg: f64, phi_deg: f64) -> Result<Self> {
        Self::new(theta_deg.to_radians(), phi_deg.to_radians())
    }

    pub fn theta(&self) -> f64 {
        self.theta
    }

    pub fn phi(&self) -> f64 {
        self.phi
    }
}

/// Unit-norm direction vector `[u_x, u_y, u_z]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UnitVector3 {
    x: f64,
    y: f64,
    z: f64,
}

impl UnitVector3 {
    /// Accepts a vector whose norm is within [`UNIT_TOLERANCE`] of one and
    /// re-normalizes it.
    pub fn new(x: f64, y: f64, z: f64) -> Result<Self> {
        let norm = (x * x + y * y + z * z).sqrt();
        if !norm.is_finite() || (norm - 1.0).abs() > UNIT_TOLERANCE {
            return Err(Error::InvalidInput(format!(
                "vector [{x}, {y}, {z}] is not unit length (norm {norm})"
            )));
        }
        Ok(Self {
            x: x / norm,
            y: y / norm,
            z: z / norm,
        })
    }

    /// Projects any finite nonzero vector onto the unit sphere.
    pub fn normalize(v: Vector3<f64>) -> Result<Self> {
        let norm = v.norm();
        if !(norm.is_finite() && norm > 0.0) {
            return Err(Error::InvalidInput(format!(
                "cannot normalize vector with norm {norm}"
            )));
        }
        Ok(Self {
            x: v.x / norm,
            y: v.y / norm,
            z: v.z / norm,
        })
    }

    /// `[sinθ cosφ, cosθ, sinθ sinφ]` for any real angles, including negative
    /// elevations used by local search parametrizations.
    pub fn from_spherical(theta: f64, phi: f64) -> Self {
        let (st, ct) = theta.sin_cos();
        let (sp, cp) = phi.sin_cos();
        Self {
            x: st * cp,
            y: ct,
            z: st * sp,
        }
    }

    pub fn boresight() -> Self {
        Self {
            x: 0.0,
            y: 1.0,
            z: 0.0,
        }
    }

    pub fn x(&self) -> f64 {
        self.x
    }

    pub fn y(&self) -> f64 {
        self.y
    }

    pub fn z(&self) -> f64 {
        self.z
    }

    pub fn as_vector(&self) -> Vector3<f64> {
        Vector3::new(self.x, self.y, self.z)
    }

    /// Angle between two unit vectors, radians.
    pub fn angle_to(&self, other: &UnitVector3) -> f64 {
        let cross = self.as_vector().cross(&other.as_vector()).norm();
        let dot = self.as_vector().dot(&other.as_vector());
        cross.atan2(dot)
    }
}

/// Proper 3x3 rotation describing the mechanical orientation of the array.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RotationMatrix(Matrix3<f64>);

impl RotationMatrix {
    pub fn identity() -> Self {
        Self(Matrix3::identity())
    }

    /// Wraps an arbitrary matrix after checking `RᵀR = I` and `det R = 1`.
    pub fn from_matrix(m: Matrix3<f64>, tol: f64) -> Result<Self> {
        let orth = (m.transpose() * m - Matrix3::identity()).abs().max();
        let det = m.determinant();
        if orth > tol || (det - 1.0).abs() > tol {
            return Err(Error::InvalidInput(format!(
                "not a proper rotation: |RᵀR - I| = {orth:e}, det = {det}"
            )));
        }
        Ok(Self(m))
    }

    pub fn matrix(&self) -> &Matrix3<f64> {
        &self.0
    }

    /// Array normal `R·[0,1,0]ᵀ` in the global frame.
    pub fn boresight(&self) -> UnitVector3 {
        let c = self.0.column(1);
        UnitVector3 {
            x: c[0],
            y: c[1],
            z: c[2],
        }
    }

    /// Maps a local-frame direction back to the global frame, `R·u_l`.
    pub fn to_global(&self, u_local: &UnitVector3) -> UnitVector3 {
        let v = self.0 * u_local.as_vector();
        UnitVector3 {
            x: v.x,
            y: v.y,
            z: v.z,
        }
    }

    pub fn compose(&self, rhs: &RotationMatrix) -> RotationMatrix {
        RotationMatrix(self.0 * rhs.0)
    }

    pub fn transpose(&self) -> RotationMatrix {
        RotationMatrix(self.0.transpose())
    }
}

/// Rotation by `alpha` about the z-axis.
pub fn rot_z(alpha: f64) -> RotationMatrix {
    let (s, c) = alpha.sin_cos();
    RotationMatrix(Matrix3::new(c, -s, 0.0, s, c, 0.0, 0.0, 0.0, 1.0))
}

/// Rotation by `beta` about the x-axis.
pub fn rot_x(beta: f64) -> RotationMatrix {
    let (s, c) = beta.sin_cos();
    RotationMatrix(Matrix3::new(1.0, 0.0, 0.0, 0.0, c, -s, 0.0, s, c))
}

/// `R_z(alpha) · R_x(beta)`.
pub fn compose_rotation(alpha: f64, beta: f64) -> RotationMatrix {
    rot_z(alpha).compose(&rot_x(beta))
}

/// Emitter direction expressed in the rotated array frame, `Rᵀ·u`.
pub fn to_local(r: &RotationMatrix, u: &UnitVector3) -> UnitVector3 {
    let v = r.0.transpose() * u.as_vector();
    UnitVector3 {
        x: v.x,
        y: v.y,
        z: v.z,
    }
}

/// Deflection of a local direction from the array normal, `arccos(u_l,y)`.
pub fn boresight_deflection(u_local: &UnitVector3) -> f64 {
    u_local.y.clamp(-1.0, 1.0).acos()
}

pub fn direction_to_unit(d: &GlobalDirection) -> UnitVector3 {
    UnitVector3::from_spherical(d.theta, d.phi)
}

/// Result of inverting a unit vector to angles.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DirectionReconstruction {
    pub direction: GlobalDirection,
    /// Set at the poles, where azimuth is undefined and reported as 0.
    pub degenerate: bool,
}

pub fn unit_to_direction(u: &UnitVector3) -> DirectionReconstruction {
    let theta = u.y.clamp(-1.0, 1.0).acos();
    let degenerate = u.x * u.x + u.z * u.z < POLE_EPS;
    let phi = if degenerate { 0.0 } else { u.z.atan2(u.x) };
    DirectionReconstruction {
        direction: GlobalDirection { theta, phi },
        degenerate,
    }
}

/// Mechanical angles that point the array normal along a given direction.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoresightAngles {
    pub alpha: f64,
    pub beta: f64,
    /// Set when `u = [0, 0, ±1]`; alpha is then reported as 0.
    pub gimbal_degenerate: bool,
}

impl BoresightAngles {
    pub fn rotation(&self) -> RotationMatrix {
        compose_rotation(self.alpha, self.beta)
    }
}

pub fn boresight_angles_for(u: &UnitVector3) -> BoresightAngles {
    let gimbal_degenerate = u.x * u.x + u.y * u.y < POLE_EPS;
    let alpha = if gimbal_degenerate {
        0.0
    } else {
        (-u.x).atan2(u.y)
    };
    BoresightAngles {
        alpha,
        beta: u.z.clamp(-1.0, 1.0).asin(),
        gimbal_degenerate,
    }
}

/// Element positions `[x_m, 0, z_n]`, x-fastest.
pub fn element_positions(cfg: &ArrayConfig) -> Vec<Vector3<f64>> {
    let mut out = Vec::with_capacity(cfg.element_count());
    for n in 0..cfg.n {
        for m in 0..cfg.m {
            out.push(Vector3::new(cfg.x_coord(m), 0.0, cfg.z_coord(n)));
        }
    }
    out
}

/// Response of a centered uniform line of `count` elements to direction
/// cosine `cosine` along that line.
pub fn axis_manifold(count: usize, spacing: f64, lambda: f64, cosine: f64) -> DVector<Complex64> {
    let k = 2.0 * PI / lambda;
    DVector::from_fn(count, |i, _| {
        Complex64::from_polar(1.0, k * centered(i, count, spacing) * cosine)
    })
}

/// Planar-array steering vector for a local direction, x-fastest ordering.
pub fn steering_vector(cfg: &ArrayConfig, u_local: &UnitVector3) -> DVector<Complex64> {
    let a_x = axis_manifold(cfg.m, cfg.d_x, cfg.lambda, u_local.x);
    let a_z = axis_manifold(cfg.n, cfg.d_z, cfg.lambda, u_local.z);
    DVector::from_fn(cfg.element_count(), |idx, _| {
        a_z[idx / cfg.m] * a_x[idx % cfg.m]
    })
}
