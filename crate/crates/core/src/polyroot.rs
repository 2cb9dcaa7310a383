//! Roots of complex polynomials by Aberth-Ehrlich simultaneous iteration.

use std::f64::consts::PI;

use num_complex::Complex64;

use crate::error::{Error, Result};

const MAX_ITER: usize = 2000;

fn horner(coeffs: &[Complex64], z: Complex64) -> (Complex64, Complex64) {
    // coeffs ascending; returns p(z), p'(z)
    let mut p = Complex64::new(0.0, 0.0);
    let mut dp = Complex64::new(0.0, 0.0);
    for c in coeffs.iter().rev() {
        dp = dp * z + p;
        p = p * z + c;
    }
    (p, dp)
}

/// All roots of `Σ coeffs[i] z^i`, coefficients in ascending order.
///
/// Leading coefficients that are negligible relative to the largest one are
/// dropped (those roots sit at infinity); trailing zero coefficients give
/// exact roots at the origin.
pub fn roots(coeffs: &[Complex64]) -> Result<Vec<Complex64>> {
    let scale = coeffs.iter().map(|c| c.norm()).fold(0.0, f64::max);
    if !(scale.is_finite() && scale > 0.0) {
        return Err(Error::Rooting("polynomial has no finite nonzero coefficient".into()));
    }
    let mut hi = coeffs.len() - 1;
    while hi > 0 && coeffs[hi].norm() <= 1e-14 * scale {
        hi -= 1;
    }
    let mut lo = 0;
    while lo < hi && coeffs[lo].norm() == 0.0 {
        lo += 1;
    }
    let mut out = vec![Complex64::new(0.0, 0.0); lo];
    let poly: Vec<Complex64> = coeffs[lo..=hi].iter().map(|c| c / coeffs[hi]).collect();
    let degree = poly.len() - 1;
    if degree == 0 {
        return Ok(out);
    }

    // Start on a circle at the geometric mean root radius, offset off the axes.
    let radius = poly[0].norm().powf(1.0 / degree as f64).max(1e-3);
    let mut z: Vec<Complex64> = (0..degree)
        .map(|i| Complex64::from_polar(radius, 2.0 * PI * i as f64 / degree as f64 + 0.4))
        .collect();

    for _ in 0..MAX_ITER {
        let mut max_step: f64 = 0.0;
        for i in 0..degree {
            let (p, dp) = horner(&poly, z[i]);
            if p == Complex64::new(0.0, 0.0) {
                continue;
            }
            let ratio = p / dp;
            let repulsion: Complex64 = (0..degree)
                .filter(|&j| j != i)
                .map(|j| {
                    let diff = z[i] - z[j];
                    if diff.norm() == 0.0 {
                        Complex64::new(0.0, 0.0)
                    } else {
                        diff.inv()
                    }
                })
                .sum();
            let step = ratio / (Complex64::new(1.0, 0.0) - ratio * repulsion);
            if step.is_finite() {
                z[i] -= step;
                max_step = max_step.max(step.norm() / z[i].norm().max(1.0));
            }
        }
        if max_step <= 4.0 * f64::EPSILON {
            break;
        }
    }
    if z.iter().any(|r| !r.is_finite()) {
        return Err(Error::Rooting("iteration diverged".into()));
    }
    out.extend(z);
    Ok(out)
}
