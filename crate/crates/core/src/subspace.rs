//! Covariance estimation, noise-subspace extraction, decoupled Root-MUSIC and
//! the beamforming spatial spectrum.

use std::f64::consts::PI;

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use num_complex::Complex64;

use crate::channel::SnapshotBlock;
use crate::error::{Error, Result};
use crate::polyroot;

/// Roots with modulus up to `1 + ROOT_INSIDE_TOL` count as inside the unit
/// circle. Noiseless data put double roots on the circle, which rounding
/// can split tangentially.
pub const ROOT_INSIDE_TOL: f64 = 1e-6;

/// Running sample covariance `R̂ = (1/(iK)) Σ Y_j Y_jᴴ` over `i` equal-width
/// blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct CovarianceAccumulator {
    r_hat: DMatrix<Complex64>,
    total_snapshots: usize,
    blocks: usize,
}

/// `Y Yᴴ`, exploiting Hermitian symmetry.
fn gram(y: &DMatrix<Complex64>) -> DMatrix<Complex64> {
    let n = y.nrows();
    let mut out = DMatrix::<Complex64>::zeros(n, n);
    for col in y.column_iter() {
        let col = col.as_slice();
        for b in 0..n {
            let yb = col[b].conj();
            let dst = &mut out.as_mut_slice()[b * n..(b + 1) * n];
            for a in b..n {
                dst[a] += col[a] * yb;
            }
        }
    }
    for b in 0..n {
        out[(b, b)].im = 0.0;
        for a in (b + 1)..n {
            out[(b, a)] = out[(a, b)].conj();
        }
    }
    out
}

impl CovarianceAccumulator {
    pub fn empty(dim: usize) -> Self {
        Self {
            r_hat: DMatrix::zeros(dim, dim),
            total_snapshots: 0,
            blocks: 0,
        }
    }

    pub fn matrix(&self) -> &DMatrix<Complex64> {
        &self.r_hat
    }

    pub fn dim(&self) -> usize {
        self.r_hat.nrows()
    }

    pub fn total_snapshots(&self) -> usize {
        self.total_snapshots
    }

    pub fn blocks(&self) -> usize {
        self.blocks
    }

    /// Folds in one more block:
    /// `R̂⁽ⁱ⁾ = ((i-1)/i) R̂⁽ⁱ⁻¹⁾ + (1/(iK)) Y_i Y_iᴴ`.
    pub fn accumulate(self, block: &SnapshotBlock) -> Result<Self> {
        if block.elements() != self.dim() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} rows", self.dim()),
                found: format!("{} rows", block.elements()),
            });
        }
        let k = block.snapshots();
        if self.blocks > 0 && self.total_snapshots != self.blocks * k {
            return Err(Error::DimensionMismatch {
                expected: format!("{} snapshots per block", self.total_snapshots / self.blocks),
                found: format!("{k} snapshots"),
            });
        }
        let i = (self.blocks + 1) as f64;
        let keep = Complex64::new((i - 1.0) / i, 0.0);
        let fresh = Complex64::new(1.0 / (i * k as f64), 0.0);
        let r_hat = self.r_hat * keep + gram(block.data()) * fresh;
        Ok(Self {
            r_hat,
            total_snapshots: self.total_snapshots + k,
            blocks: self.blocks + 1,
        })
    }
}

/// `(1/K) Y Yᴴ` for a single block.
pub fn sample_covariance(block: &SnapshotBlock) -> CovarianceAccumulator {
    let k = block.snapshots();
    CovarianceAccumulator {
        r_hat: gram(block.data()) * Complex64::new(1.0 / k as f64, 0.0),
        total_snapshots: k,
        blocks: 1,
    }
}

/// Eigenvectors of all but the dominant eigenvalue (single-source model).
#[derive(Debug, Clone)]
pub struct NoiseSubspace {
    vectors: DMatrix<Complex64>,
    signal: DVector<Complex64>,
    eigenvalues: Vec<f64>,
}

impl NoiseSubspace {
    /// MN x (MN-1) orthonormal basis.
    pub fn vectors(&self) -> &DMatrix<Complex64> {
        &self.vectors
    }

    /// Dominant eigenvector.
    pub fn signal_vector(&self) -> &DVector<Complex64> {
        &self.signal
    }

    /// All eigenvalues, descending.
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }
}

pub fn noise_subspace(acc: &CovarianceAccumulator) -> Result<NoiseSubspace> {
    let n = acc.dim();
    if n < 2 {
        return Err(Error::InvalidInput("noise subspace needs at least two elements".into()));
    }
    let trace: f64 = acc.r_hat.diagonal().iter().map(|c| c.re).sum();
    if !(trace.is_finite() && trace > 0.0) {
        return Err(Error::InvalidInput(format!("covariance trace is {trace}")));
    }
    let eig = SymmetricEigen::try_new(acc.r_hat.clone(), f64::EPSILON, 0)
        .ok_or_else(|| Error::Eigen(format!("Hermitian QR iteration did not converge ({n}x{n})")))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
    let eigenvalues: Vec<f64> = order.iter().map(|&i| eig.eigenvalues[i]).collect();
    if eigenvalues.iter().any(|v| !v.is_finite()) {
        return Err(Error::Eigen(format!("non-finite eigenvalues {eigenvalues:?}")));
    }
    let signal = eig.eigenvectors.column(order[0]).into_owned();
    let vectors = DMatrix::from_fn(n, n - 1, |r, c| eig.eigenvectors[(r, order[c + 1])]);

    let ortho = (vectors.adjoint() * &vectors - DMatrix::<Complex64>::identity(n - 1, n - 1))
        .iter()
        .map(|c| c.norm())
        .fold(0.0, f64::max);
    let leak = (vectors.adjoint() * &signal).norm();
    if ortho > 1e-10 || leak > 1e-10 {
        return Err(Error::Eigen(format!(
            "eigenvectors not orthonormal: |UᴴU - I| = {ortho:e}, |Uᴴu1| = {leak:e}"
        )));
    }
    Ok(NoiseSubspace {
        vectors,
        signal,
        eigenvalues,
    })
}

/// Per-axis noise matrices of the decoupled cost functions.
///
/// With each noise eigenvector reshaped to `N̂[m, n] = û[n·M + m]`,
/// `C_x = Σ N̂ N̂ᴴ` (M x M) and `C_z = Σ N̂ᵀ (N̂ᵀ)ᴴ` (N x N).
pub fn decoupled_noise_matrices(
    noise: &NoiseSubspace,
    m: usize,
    n: usize,
) -> Result<(DMatrix<Complex64>, DMatrix<Complex64>)> {
    let u = noise.vectors();
    if u.nrows() != m * n {
        return Err(Error::DimensionMismatch {
            expected: format!("{} rows (M = {m}, N = {n})", m * n),
            found: format!("{} rows", u.nrows()),
        });
    }
    let mut cx = DMatrix::<Complex64>::zeros(m, m);
    let mut cz = DMatrix::<Complex64>::zeros(n, n);
    for col in u.column_iter() {
        for a in 0..m {
            for b in 0..m {
                let mut acc = Complex64::new(0.0, 0.0);
                for row in 0..n {
                    acc += col[row * m + a] * col[row * m + b].conj();
                }
                cx[(a, b)] += acc;
            }
        }
        for a in 0..n {
            for b in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for x in 0..m {
                    acc += col[a * m + x] * col[b * m + x].conj();
                }
                cz[(a, b)] += acc;
            }
        }
    }
    Ok((cx, cz))
}

/// Ascending coefficients of `z^(L-1) · aᴴ(z) C a(z)`, i.e. the diagonal sums
/// of `C` from offset `-(L-1)` to `L-1`.
pub fn root_music_polynomial(c: &DMatrix<Complex64>) -> Vec<Complex64> {
    let l = c.nrows() as isize;
    (-(l - 1)..l)
        .map(|d| {
            (0..l)
                .filter(|&r| (0..l).contains(&(r + d)))
                .map(|r| c[(r as usize, (r + d) as usize)])
                .sum()
        })
        .collect()
}

#[derive(Debug, Clone)]
pub struct RootMusicEstimate {
    /// Estimated direction cosine along the line.
    pub cosine: f64,
    /// Selected root.
    pub root: Complex64,
    /// Every root of the polynomial.
    pub roots: Vec<Complex64>,
}

/// Direction cosine from the noise matrix of a centered uniform line.
pub fn root_music_1d(c: &DMatrix<Complex64>, spacing: f64, lambda: f64) -> Result<RootMusicEstimate> {
    let l = c.nrows();
    if l < 2 || c.ncols() != l {
        return Err(Error::InvalidInput(format!(
            "Root-MUSIC needs a square matrix with at least 2 rows, got {}x{}",
            c.nrows(),
            c.ncols()
        )));
    }
    if !(spacing > 0.0 && lambda > 0.0) {
        return Err(Error::InvalidInput("spacing and wavelength must be positive".into()));
    }
    let roots = polyroot::roots(&root_music_polynomial(c))?;
    let root = roots
        .iter()
        .copied()
        .filter(|z| z.norm() <= 1.0 + ROOT_INSIDE_TOL)
        .min_by(|a, b| {
            let da = (1.0 - a.norm()).abs();
            let db = (1.0 - b.norm()).abs();
            da.total_cmp(&db).then(b.norm().total_cmp(&a.norm()))
        })
        .ok_or_else(|| Error::Rooting(format!("no root inside the unit circle among {roots:?}")))?;
    let kd = 2.0 * PI / lambda * spacing;
    let cosine = (root.arg() / kd).clamp(-1.0, 1.0);
    Ok(RootMusicEstimate { cosine, root, roots })
}

/// Beamformer output power `aᴴ R̂ a`.
pub fn spatial_spectrum(acc: &CovarianceAccumulator, a: &DVector<Complex64>) -> Result<f64> {
    if a.len() != acc.dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("steering vector of length {}", acc.dim()),
            found: format!("length {}", a.len()),
        });
    }
    Ok(a.dotc(&(&acc.r_hat * a)).re)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geometry::{axis_manifold, steering_vector, ArrayConfig, UnitVector3};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rows: usize, cols: usize, rng: &mut ChaCha8Rng) -> DMatrix<Complex64> {
        DMatrix::from_fn(rows, cols, |_, _| {
            Complex64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        })
    }

    fn max_diff(a: &DMatrix<Complex64>, b: &DMatrix<Complex64>) -> f64 {
        (a - b).iter().map(|c| c.norm()).fold(0.0, f64::max)
    }

    fn block(m: DMatrix<Complex64>) -> SnapshotBlock {
        SnapshotBlock::new(m).unwrap()
    }

    fn rank_one(a: &DVector<Complex64>) -> CovarianceAccumulator {
        sample_covariance(&block(DMatrix::from_column_slice(a.len(), 1, a.as_slice())))
    }

    #[test]
    fn single_snapshot_outer_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let y = random_matrix(6, 1, &mut rng);
        let acc = sample_covariance(&block(y.clone()));
        assert!(max_diff(acc.matrix(), &(&y * y.adjoint())) < 1e-14);
        assert_eq!(acc.total_snapshots(), 1);
    }

    #[test]
    fn identity_columns() {
        let k = 5;
        let acc = sample_covariance(&block(DMatrix::identity(k, k)));
        let expected = DMatrix::<Complex64>::identity(k, k) / Complex64::new(k as f64, 0.0);
        assert!(max_diff(acc.matrix(), &expected) < 1e-15);
    }

    #[test]
    fn gram_matches_nalgebra_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let y = random_matrix(9, 17, &mut rng);
        assert!(max_diff(&gram(&y), &(&y * y.adjoint())) < 1e-12);
    }

    #[test]
    fn recursion_equals_batch() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let blocks: Vec<_> = (0..3).map(|_| random_matrix(8, 11, &mut rng)).collect();
        let mut acc = CovarianceAccumulator::empty(8);
        for b in &blocks {
            acc = acc.accumulate(&block(b.clone())).unwrap();
        }
        let mut all = DMatrix::zeros(8, 33);
        for (i, b) in blocks.iter().enumerate() {
            all.columns_mut(i * 11, 11).copy_from(b);
        }
        let batch = &all * all.adjoint() / Complex64::new(33.0, 0.0);
        assert!(max_diff(acc.matrix(), &batch) < 1e-10);
        assert_eq!(acc.total_snapshots(), 33);
        assert_eq!(acc.blocks(), 3);
    }

    #[test]
    fn accumulation_base_case_and_repetition() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let y = block(random_matrix(4, 6, &mut rng));
        let first = CovarianceAccumulator::empty(4).accumulate(&y).unwrap();
        assert!(max_diff(first.matrix(), sample_covariance(&y).matrix()) < 1e-15);
        let mut acc = first.clone();
        for _ in 0..4 {
            acc = acc.accumulate(&y).unwrap();
        }
        assert!(max_diff(acc.matrix(), first.matrix()) < 1e-14);
    }

    #[test]
    fn accumulation_rejects_mismatch() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let acc = CovarianceAccumulator::empty(4);
        assert!(acc.clone().accumulate(&block(random_matrix(5, 3, &mut rng))).is_err());
        let acc = acc.accumulate(&block(random_matrix(4, 3, &mut rng))).unwrap();
        assert!(acc.accumulate(&block(random_matrix(4, 2, &mut rng))).is_err());
    }

    #[test]
    fn identity_covariance_subspace_is_orthonormal() {
        let acc = sample_covariance(&block(DMatrix::identity(6, 6)));
        let ns = noise_subspace(&acc).unwrap();
        assert_eq!(ns.vectors().shape(), (6, 5));
        let g = ns.vectors().adjoint() * ns.vectors();
        assert!(max_diff(&g, &DMatrix::identity(5, 5)) < 1e-10);
    }

    #[test]
    fn noise_subspace_is_orthogonal_to_steering() {
        let cfg = ArrayConfig::default();
        let a = steering_vector(&cfg, &UnitVector3::from_spherical(0.4, -1.0));
        let ns = noise_subspace(&rank_one(&a)).unwrap();
        assert!((ns.vectors().adjoint() * &a).norm() < 1e-8);
        assert!((ns.eigenvalues()[0] - 49.0).abs() < 1e-9);
    }

    #[test]
    fn subspace_is_shift_invariant() {
        let cfg = ArrayConfig {
            m: 3,
            n: 5,
            ..ArrayConfig::default()
        };
        let a = steering_vector(&cfg, &UnitVector3::from_spherical(0.9, 2.0));
        let clean = rank_one(&a);
        let shifted = CovarianceAccumulator {
            r_hat: clean.matrix() + DMatrix::<Complex64>::identity(15, 15) * Complex64::new(0.3, 0.0),
            ..clean.clone()
        };
        let p1 = {
            let u = noise_subspace(&clean).unwrap().vectors().clone();
            &u * u.adjoint()
        };
        let p2 = {
            let u = noise_subspace(&shifted).unwrap().vectors().clone();
            &u * u.adjoint()
        };
        assert!(max_diff(&p1, &p2) < 1e-10);
    }

    #[test]
    fn zero_covariance_rejected() {
        assert!(noise_subspace(&CovarianceAccumulator::empty(4)).is_err());
    }

    /// `|ûᴴ (a_z ⊗ a_x)|²` versus the reshaped bilinear form `|a_xᴴ N̂ conj(a_z)|²`.
    #[test]
    fn reshape_identity_is_exact() {
        let (m, n) = (5, 3);
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        for _ in 0..100 {
            let u = random_matrix(m * n, 1, &mut rng);
            let (ux, uz) = (rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0));
            let a_x = axis_manifold(m, 0.0625, 0.125, ux);
            let a_z = axis_manifold(n, 0.0625, 0.125, uz);
            let direct = u.column(0).dotc(&a_z.kronecker(&a_x)).norm_sqr();
            let reshaped = DMatrix::from_fn(m, n, |r, c| u[(c * m + r, 0)]);
            let bilinear = a_x.dotc(&(&reshaped * a_z.conjugate())).norm_sqr();
            assert!((direct - bilinear).abs() < 1e-10 * direct.max(1.0));
        }
    }

    #[test]
    fn decoupled_traces() {
        let cfg = ArrayConfig {
            m: 5,
            n: 3,
            ..ArrayConfig::default()
        };
        let a = steering_vector(&cfg, &UnitVector3::from_spherical(0.3, 0.3));
        let ns = noise_subspace(&rank_one(&a)).unwrap();
        let (cx, cz) = decoupled_noise_matrices(&ns, 5, 3).unwrap();
        assert_eq!(cx.shape(), (5, 5));
        assert_eq!(cz.shape(), (3, 3));
        assert!((cx.trace().re - 14.0).abs() < 1e-10);
        assert!((cz.trace().re - 14.0).abs() < 1e-10);
        assert!(max_diff(&cx, &cx.adjoint()) < 1e-12);
        assert!(max_diff(&cz, &cz.adjoint()) < 1e-12);
        assert!(decoupled_noise_matrices(&ns, 3, 3).is_err());
    }

    #[test]
    fn decoupled_scalar_case() {
        // M = N = 1 has an empty noise subspace; the reshape of any vector of
        // length 1 is the vector itself, so both matrices hold Σ|û|².
        let ns = NoiseSubspace {
            vectors: DMatrix::from_row_slice(1, 2, &[Complex64::new(0.6, 0.0), Complex64::new(0.0, 0.8)]),
            signal: DVector::zeros(1),
            eigenvalues: vec![],
        };
        let (cx, cz) = decoupled_noise_matrices(&ns, 1, 1).unwrap();
        assert!((cx[(0, 0)].re - 1.0).abs() < 1e-15);
        assert!((cz[(0, 0)].re - 1.0).abs() < 1e-15);
    }

    fn line_noise_matrix(l: usize, cosine: f64) -> DMatrix<Complex64> {
        let a = axis_manifold(l, 0.0625, 0.125, cosine);
        let p = &a * a.adjoint() / Complex64::new(l as f64, 0.0);
        DMatrix::<Complex64>::identity(l, l) - p
    }

    #[test]
    fn root_music_recovers_noiseless_cosines() {
        for l in [3, 5, 7] {
            for u in [-0.9, -0.5, 0.0, 0.3, 0.5, 0.9] {
                let est = root_music_1d(&line_noise_matrix(l, u), 0.0625, 0.125).unwrap();
                assert!((est.cosine - u).abs() < 1e-6, "L={l} u={u} got {}", est.cosine);
            }
        }
        let est = root_music_1d(&line_noise_matrix(7, 0.0), 0.0625, 0.125).unwrap();
        assert!(est.cosine.abs() < 1e-8);
    }

    #[test]
    fn root_music_roots_pair_up() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let x = random_matrix(7, 20, &mut rng);
        let c = &x * x.adjoint();
        let est = root_music_1d(&c, 0.0625, 0.125).unwrap();
        assert_eq!(est.roots.len(), 12);
        for z in &est.roots {
            let mirror = z.conj().inv();
            let best = est.roots.iter().map(|w| (w - mirror).norm()).fold(f64::INFINITY, f64::min);
            assert!(best < 1e-6 * mirror.norm().max(1.0));
        }
    }

    #[test]
    fn root_music_input_checks() {
        assert!(root_music_1d(&DMatrix::identity(1, 1), 0.06, 0.125).is_err());
        assert!(root_music_1d(&DMatrix::identity(3, 2), 0.06, 0.125).is_err());
    }

    #[test]
    fn spectrum_examples() {
        let cfg = ArrayConfig::default();
        let eye = CovarianceAccumulator {
            r_hat: DMatrix::identity(49, 49),
            total_snapshots: 1,
            blocks: 1,
        };
        let a = steering_vector(&cfg, &UnitVector3::from_spherical(0.7, 0.1));
        assert!((spatial_spectrum(&eye, &a).unwrap() - 49.0).abs() < 1e-12);

        let a0 = steering_vector(&cfg, &UnitVector3::from_spherical(0.2, 0.5));
        let acc = rank_one(&a0);
        let peak = spatial_spectrum(&acc, &a0).unwrap();
        for (t, f) in [(0.21, 0.5), (0.2, 0.52), (0.0, 0.0), (1.0, -2.0)] {
            let other = steering_vector(&cfg, &UnitVector3::from_spherical(t, f));
            assert!(spatial_spectrum(&acc, &other).unwrap() <= peak);
        }
        assert!(spatial_spectrum(&acc, &DVector::zeros(3)).is_err());
    }

    #[test]
    fn spectrum_matches_eigen_expansion_and_unitary_invariance() {
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let x = random_matrix(6, 9, &mut rng);
        let acc = sample_covariance(&block(x));
        let a = random_matrix(6, 1, &mut rng).column(0).into_owned();
        let s = spatial_spectrum(&acc, &a).unwrap();
        let eig = SymmetricEigen::new(acc.matrix().clone());
        let expansion: f64 = (0..6)
            .map(|i| eig.eigenvalues[i] * eig.eigenvectors.column(i).dotc(&a).norm_sqr())
            .sum();
        assert!((s - expansion).abs() < 1e-8 * s.abs().max(1.0));

        let h = random_matrix(6, 6, &mut rng);
        let q = SymmetricEigen::new(&h + h.adjoint()).eigenvectors;
        let rotated = CovarianceAccumulator {
            r_hat: &q * acc.matrix() * q.adjoint(),
            ..acc.clone()
        };
        let s2 = spatial_spectrum(&rotated, &(&q * &a)).unwrap();
        assert!((s - s2).abs() < 1e-10 * s.abs().max(1.0));
    }
}
