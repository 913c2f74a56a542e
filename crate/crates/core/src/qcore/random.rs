//! Seeded random matrices and states for tests, restarts and benchmarks.

use faer::Mat;
use rand::Rng;
use rand_distr::StandardNormal;

use super::{c, hermitian_part, trace, ComplexMatrix, DensityMatrix, ZERO};

/// Matrix with i.i.d. standard complex Gaussian entries.
pub fn gaussian_matrix<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    let mut m = Mat::zeros(rows, cols);
    for i in 0..rows {
        for j in 0..cols {
            let re: f64 = rng.sample(StandardNormal);
            let im: f64 = rng.sample(StandardNormal);
            m[(i, j)] = c(re, im) * std::f64::consts::FRAC_1_SQRT_2;
        }
    }
    m
}

/// Orthonormalizes the columns in place (modified Gram–Schmidt, two passes).
pub fn orthonormalize_columns(m: &mut ComplexMatrix) {
    for _ in 0..2 {
        for j in 0..m.ncols() {
            for k in 0..j {
                let mut proj = ZERO;
                for i in 0..m.nrows() {
                    proj += m[(i, k)].conj() * m[(i, j)];
                }
                for i in 0..m.nrows() {
                    let v = m[(i, k)];
                    m[(i, j)] -= proj * v;
                }
            }
            let norm: f64 = (0..m.nrows()).map(|i| m[(i, j)].norm_sqr()).sum::<f64>().sqrt();
            for i in 0..m.nrows() {
                m[(i, j)] /= norm;
            }
        }
    }
}

/// Haar-distributed isometry (`rows` ≥ `cols`), via QR of a Gaussian matrix.
pub fn haar_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    assert!(rows >= cols);
    let mut m = gaussian_matrix(rows, cols, rng);
    orthonormalize_columns(&mut m);
    m
}

/// Random isometry with real entries (orthonormalized real Gaussian columns).
pub fn real_isometry<R: Rng + ?Sized>(rows: usize, cols: usize, rng: &mut R) -> ComplexMatrix {
    assert!(rows >= cols);
    let mut m = Mat::from_fn(rows, cols, |_, _| c(rng.sample(StandardNormal), 0.0));
    orthonormalize_columns(&mut m);
    m
}

/// Random full-rank density matrix G G† / Tr(G G†).
pub fn random_density<R: Rng + ?Sized>(dim: usize, rng: &mut R) -> DensityMatrix {
    let g = gaussian_matrix(dim, dim, rng);
    let m = &g * g.adjoint();
    let tr = trace(&m).re;
    DensityMatrix::from_raw(hermitian_part(&Mat::from_fn(dim, dim, |i, j| m[(i, j)] / tr)))
}

/// Independent generator for restart `index` of a run seeded with `seed`.
pub fn restart_rng(seed: u64, index: usize) -> rand_chacha::ChaCha8Rng {
    use rand::SeedableRng;
    let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index as u64);
    rng
}
