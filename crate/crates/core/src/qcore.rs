//! Dense complex linear algebra and multi-qubit operator construction.
//!
//! Matrices are [`faer::Mat`] over `Complex64`. Everything here is dense; the
//! largest operators in the crate are 256×256 Choi matrices.

use faer::{Mat, Side};
use num_complex::Complex64;

use crate::{Error, Result};

pub mod random;

pub type ComplexMatrix = Mat<Complex64>;

pub const ZERO: Complex64 = Complex64::new(0.0, 0.0);
pub const ONE: Complex64 = Complex64::new(1.0, 0.0);
pub const I: Complex64 = Complex64::new(0.0, 1.0);

#[inline]
pub fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

pub fn zeros(rows: usize, cols: usize) -> ComplexMatrix {
    Mat::zeros(rows, cols)
}

pub fn identity(dim: usize) -> ComplexMatrix {
    Mat::identity(dim, dim)
}

/// Builds a matrix from row-major real entries.
pub fn from_real(rows: usize, cols: usize, entries: &[f64]) -> ComplexMatrix {
    assert_eq!(entries.len(), rows * cols);
    Mat::from_fn(rows, cols, |i, j| c(entries[i * cols + j], 0.0))
}

/// Builds a matrix from row-major complex entries.
pub fn from_complex(rows: usize, cols: usize, entries: &[Complex64]) -> ComplexMatrix {
    assert_eq!(entries.len(), rows * cols);
    Mat::from_fn(rows, cols, |i, j| entries[i * cols + j])
}

pub fn diag(entries: &[Complex64]) -> ComplexMatrix {
    let n = entries.len();
    Mat::from_fn(n, n, |i, j| if i == j { entries[i] } else { ZERO })
}

pub fn adjoint(m: &ComplexMatrix) -> ComplexMatrix {
    m.adjoint().to_owned()
}

pub fn scale(m: &ComplexMatrix, s: Complex64) -> ComplexMatrix {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

pub fn scale_real(m: &ComplexMatrix, s: f64) -> ComplexMatrix {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)] * s)
}

pub fn trace(m: &ComplexMatrix) -> Complex64 {
    (0..m.nrows().min(m.ncols())).map(|i| m[(i, i)]).sum()
}

/// Tr(a·b) without forming the product.
pub fn trace_product(a: &ComplexMatrix, b: &ComplexMatrix) -> Complex64 {
    debug_assert_eq!(a.ncols(), b.nrows());
    debug_assert_eq!(a.nrows(), b.ncols());
    let mut acc = ZERO;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += a[(i, j)] * b[(j, i)];
        }
    }
    acc
}

/// Real part of Tr(a·b) for Hermitian a, b.
pub fn hermitian_inner(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += (a[(i, j)].conj() * b[(i, j)]).re;
        }
    }
    acc
}

pub fn frobenius(m: &ComplexMatrix) -> f64 {
    m.norm_l2()
}

pub fn frobenius_distance(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    assert_eq!((a.nrows(), a.ncols()), (b.nrows(), b.ncols()));
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            acc += (a[(i, j)] - b[(i, j)]).norm_sqr();
        }
    }
    acc.sqrt()
}

/// Largest entrywise |m - m†|.
pub fn hermitian_deviation(m: &ComplexMatrix) -> f64 {
    if m.nrows() != m.ncols() {
        return f64::INFINITY;
    }
    let mut worst: f64 = 0.0;
    for j in 0..m.ncols() {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}

/// (m + m†)/2.
pub fn hermitian_part(m: &ComplexMatrix) -> ComplexMatrix {
    Mat::from_fn(m.nrows(), m.ncols(), |i, j| (m[(i, j)] + m[(j, i)].conj()) * 0.5)
}

pub fn is_finite(m: &ComplexMatrix) -> bool {
    (0..m.ncols()).all(|j| (0..m.nrows()).all(|i| m[(i, j)].re.is_finite() && m[(i, j)].im.is_finite()))
}

/// Kronecker product `a ⊗ b`.
pub fn tensor(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    let (ar, ac) = (a.nrows(), a.ncols());
    let (br, bc) = (b.nrows(), b.ncols());
    let mut out = zeros(ar * br, ac * bc);
    for ja in 0..ac {
        for ia in 0..ar {
            let s = a[(ia, ja)];
            if s == ZERO {
                continue;
            }
            for jb in 0..bc {
                for ib in 0..br {
                    out[(ia * br + ib, ja * bc + jb)] = s * b[(ib, jb)];
                }
            }
        }
    }
    out
}

pub fn tensor_all<'a>(parts: impl IntoIterator<Item = &'a ComplexMatrix>) -> ComplexMatrix {
    parts
        .into_iter()
        .fold(identity(1), |acc, m| tensor(&acc, m))
}

/// Reduced operator on the subsystems listed in `keep`.
///
/// `subsystem_dims` lists the factor dimensions, most significant first.
pub fn partial_trace(m: &ComplexMatrix, subsystem_dims: &[usize], keep: &[usize]) -> Result<ComplexMatrix> {
    let total: usize = subsystem_dims.iter().product();
    if m.nrows() != m.ncols() || m.nrows() != total {
        return Err(Error::DimensionMismatch(format!(
            "partial trace of a {}x{} matrix over subsystems {:?}",
            m.nrows(),
            m.ncols(),
            subsystem_dims
        )));
    }
    if let Some(&bad) = keep.iter().find(|&&k| k >= subsystem_dims.len()) {
        return Err(Error::InvalidArgument(format!("subsystem index {bad} out of range")));
    }
    let nsub = subsystem_dims.len();
    let mut strides = vec![1usize; nsub];
    for s in (0..nsub.saturating_sub(1)).rev() {
        strides[s] = strides[s + 1] * subsystem_dims[s + 1];
    }
    let kept: Vec<usize> = (0..nsub).filter(|s| keep.contains(s)).collect();
    let traced: Vec<usize> = (0..nsub).filter(|s| !keep.contains(s)).collect();

    // Offsets into the full index contributed by each kept / traced multi-index.
    let offsets = |subs: &[usize]| -> Vec<usize> {
        let mut out = vec![0usize];
        for &s in subs {
            let mut next = Vec::with_capacity(out.len() * subsystem_dims[s]);
            for &base in &out {
                for v in 0..subsystem_dims[s] {
                    next.push(base + v * strides[s]);
                }
            }
            out = next;
        }
        out
    };
    let keep_off = offsets(&kept);
    let trace_off = offsets(&traced);

    let dk = keep_off.len();
    let mut out = zeros(dk, dk);
    for (jk, &cj) in keep_off.iter().enumerate() {
        for (ik, &ci) in keep_off.iter().enumerate() {
            let mut acc = ZERO;
            for &t in &trace_off {
                acc += m[(ci + t, cj + t)];
            }
            out[(ik, jk)] = acc;
        }
    }
    Ok(out)
}

/// Eigen-decomposition of a Hermitian matrix, eigenvalues ascending.
#[derive(Debug, Clone)]
pub struct HermitianEig {
    pub values: Vec<f64>,
    /// Columns are the orthonormal eigenvectors, in the order of `values`.
    pub vectors: ComplexMatrix,
}

impl HermitianEig {
    /// V f(Λ) V†.
    pub fn reconstruct_with(&self, f: impl Fn(f64) -> f64) -> ComplexMatrix {
        let n = self.values.len();
        let mut scaled = self.vectors.clone();
        for (j, &lam) in self.values.iter().enumerate() {
            let w = f(lam);
            for i in 0..n {
                scaled[(i, j)] *= w;
            }
        }
        &scaled * self.vectors.adjoint()
    }

    pub fn reconstruct(&self) -> ComplexMatrix {
        self.reconstruct_with(|x| x)
    }
}

/// Hermitian eigensolver; rejects inputs whose Hermitian deviation exceeds 1e-10
/// (relative to the largest entry when that exceeds one).
pub fn hermitian_eig(m: &ComplexMatrix) -> Result<HermitianEig> {
    if m.nrows() != m.ncols() {
        return Err(Error::DimensionMismatch(format!("eigendecomposition of {}x{} matrix", m.nrows(), m.ncols())));
    }
    let dev = hermitian_deviation(m);
    let scale = m.norm_max().max(1.0);
    if dev > 1e-10 * scale {
        return Err(Error::NotHermitian(dev));
    }
    eig_of_hermitian_part(m)
}

/// Eigen-decomposition of (m + m†)/2 without the Hermiticity check.
/// Real part as a real matrix when every imaginary part is exactly zero.
fn as_real(m: &ComplexMatrix) -> Option<Mat<f64>> {
    for j in 0..m.ncols() {
        for i in 0..m.nrows() {
            if m[(i, j)].im != 0.0 {
                return None;
            }
        }
    }
    Some(Mat::from_fn(m.nrows(), m.ncols(), |i, j| m[(i, j)].re))
}

pub(crate) fn eig_of_hermitian_part(m: &ComplexMatrix) -> Result<HermitianEig> {
    let h = hermitian_part(m);
    if let Some(r) = as_real(&h) {
        let evd = r.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen)?;
        let s = evd.S().column_vector();
        let u = evd.U();
        return Ok(HermitianEig {
            values: (0..r.nrows()).map(|i| s[i]).collect(),
            vectors: Mat::from_fn(r.nrows(), r.ncols(), |i, j| c(u[(i, j)], 0.0)),
        });
    }
    let evd = h.self_adjoint_eigen(Side::Lower).map_err(|_| Error::Eigen)?;
    let s = evd.S().column_vector();
    let values = (0..h.nrows()).map(|i| s[i].re).collect();
    Ok(HermitianEig { values, vectors: evd.U().to_owned() })
}

/// Applies `f` to the spectrum of a Hermitian matrix.
pub fn hermitian_function(m: &ComplexMatrix, f: impl Fn(f64) -> f64) -> Result<ComplexMatrix> {
    Ok(eig_of_hermitian_part(m)?.reconstruct_with(f))
}

/// Square root of a PSD matrix; eigenvalues below zero are clipped.
pub fn psd_sqrt(m: &ComplexMatrix) -> Result<ComplexMatrix> {
    hermitian_function(m, |x| x.max(0.0).sqrt())
}

/// Pseudo-inverse square root on the support (eigenvalues ≤ `cutoff` dropped).
pub fn psd_inv_sqrt(m: &ComplexMatrix, cutoff: f64) -> Result<ComplexMatrix> {
    hermitian_function(m, |x| if x > cutoff { 1.0 / x.sqrt() } else { 0.0 })
}

/// Ascending spectrum of the Hermitian part.
fn hermitian_eigenvalues(m: &ComplexMatrix) -> Result<Vec<f64>> {
    let h = hermitian_part(m);
    match as_real(&h) {
        Some(r) => r.self_adjoint_eigenvalues(Side::Lower),
        None => h.self_adjoint_eigenvalues(Side::Lower),
    }
    .map_err(|_| Error::Eigen)
}

pub fn min_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    let vals = hermitian_eigenvalues(m)?;
    Ok(vals.first().copied().unwrap_or(0.0))
}

pub fn max_eigenvalue(m: &ComplexMatrix) -> Result<f64> {
    let vals = hermitian_eigenvalues(m)?;
    Ok(vals.last().copied().unwrap_or(0.0))
}

/// Single-qubit Pauli matrix for `I`, `X`, `Y` or `Z`.
pub fn pauli(letter: char) -> Result<ComplexMatrix> {
    Ok(match letter {
        'I' => identity(2),
        'X' => from_real(2, 2, &[0.0, 1.0, 1.0, 0.0]),
        'Y' => from_complex(2, 2, &[ZERO, -I, I, ZERO]),
        'Z' => from_real(2, 2, &[1.0, 0.0, 0.0, -1.0]),
        other => return Err(Error::InvalidPauli(other)),
    })
}

/// Tensor product of single-qubit Paulis, qubit 0 leftmost.
pub fn pauli_string(spec: &str, n: usize) -> Result<ComplexMatrix> {
    let letters: Vec<char> = spec.chars().collect();
    if letters.len() != n {
        return Err(Error::DimensionMismatch(format!("Pauli string {spec:?} has {} letters, expected {n}", letters.len())));
    }
    let factors = letters.iter().map(|&l| pauli(l)).collect::<Result<Vec<_>>>()?;
    Ok(tensor_all(&factors))
}

/// Pauli operator on `n` qubits with the given (qubit, letter) factors.
pub fn pauli_on(n: usize, factors: &[(usize, char)]) -> Result<ComplexMatrix> {
    let mut letters = vec!['I'; n];
    for &(q, l) in factors {
        if q >= n {
            return Err(Error::InvalidArgument(format!("qubit {q} out of range for {n} qubits")));
        }
        letters[q] = l;
    }
    pauli_string(&letters.iter().collect::<String>(), n)
}

/// Row offsets of the 2^t basis states of `targets` inside a register of `nq` qubits.
pub(crate) fn local_offsets(targets: &[usize], nq: usize) -> (Vec<usize>, usize) {
    let bits: Vec<usize> = targets.iter().map(|&q| 1usize << (nq - 1 - q)).collect();
    let t = bits.len();
    let offsets = (0..1usize << t)
        .map(|j| (0..t).filter(|&b| j >> (t - 1 - b) & 1 == 1).map(|b| bits[b]).sum())
        .collect();
    (offsets, bits.iter().sum())
}

/// Left-multiplies `m` by `op` acting on `targets` of an `nq`-qubit register
/// (the identity elsewhere). `m` must have 2^nq rows; any column count.
pub fn apply_local(op: &ComplexMatrix, targets: &[usize], nq: usize, m: &mut ComplexMatrix) {
    let dim = 1usize << targets.len();
    assert_eq!(op.nrows(), dim);
    assert_eq!(op.ncols(), dim);
    assert_eq!(m.nrows(), 1usize << nq);
    let (offsets, mask) = local_offsets(targets, nq);
    let opv: Vec<Complex64> = (0..dim * dim).map(|k| op[(k / dim, k % dim)]).collect();
    let mut buf = vec![ZERO; dim];
    for col in 0..m.ncols() {
        let v = m.col_as_slice_mut(col);
        for base in (0..v.len()).filter(|b| b & mask == 0) {
            for (k, &o) in offsets.iter().enumerate() {
                buf[k] = v[base + o];
            }
            for (r, &o) in offsets.iter().enumerate() {
                let row = &opv[r * dim..(r + 1) * dim];
                v[base + o] = row.iter().zip(&buf).map(|(a, b)| a * b).sum();
            }
        }
    }
}

/// Conjugates `m` by a local operator: (op ⊗ I) m (op ⊗ I)†.
pub fn conjugate_local(op: &ComplexMatrix, targets: &[usize], nq: usize, m: &ComplexMatrix) -> ComplexMatrix {
    let mut left = m.clone();
    apply_local(op, targets, nq, &mut left);
    let mut right = adjoint(&left);
    apply_local(op, targets, nq, &mut right);
    adjoint(&right)
}

/// Normalized pure state on a 2^n-dimensional space.
#[derive(Debug, Clone, PartialEq)]
pub struct PureState {
    amplitudes: Vec<Complex64>,
}

impl PureState {
    pub fn new(amplitudes: Vec<Complex64>) -> Result<Self> {
        if amplitudes.is_empty() || !amplitudes.len().is_power_of_two() {
            return Err(Error::DimensionMismatch(format!("state dimension {} is not a power of two", amplitudes.len())));
        }
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum();
        if (norm - 1.0).abs() > 1e-12 {
            return Err(Error::InvalidArgument(format!("state norm² = {norm}")));
        }
        Ok(Self { amplitudes })
    }

    /// Normalizes an arbitrary nonzero vector.
    pub fn normalized(amplitudes: Vec<Complex64>) -> Result<Self> {
        let norm: f64 = amplitudes.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt();
        if norm == 0.0 {
            return Err(Error::InvalidArgument("zero vector".into()));
        }
        Self::new(amplitudes.into_iter().map(|a| a / norm).collect())
    }

    pub fn basis(n_qubits: usize, index: usize) -> Self {
        let mut amplitudes = vec![ZERO; 1 << n_qubits];
        amplitudes[index] = ONE;
        Self { amplitudes }
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amplitudes
    }

    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn as_column(&self) -> ComplexMatrix {
        Mat::from_fn(self.amplitudes.len(), 1, |i, _| self.amplitudes[i])
    }

    pub fn inner(&self, other: &PureState) -> Complex64 {
        self.amplitudes.iter().zip(&other.amplitudes).map(|(a, b)| a.conj() * b).sum()
    }

    pub fn density(&self) -> DensityMatrix {
        let v = &self.amplitudes;
        DensityMatrix { matrix: Mat::from_fn(v.len(), v.len(), |i, j| v[i] * v[j].conj()) }
    }

    /// ⟨ψ|m|ψ⟩.
    pub fn expectation(&self, m: &ComplexMatrix) -> Complex64 {
        let v = &self.amplitudes;
        let mut acc = ZERO;
        for j in 0..v.len() {
            for i in 0..v.len() {
                acc += v[i].conj() * m[(i, j)] * v[j];
            }
        }
        acc
    }
}

/// Density operator: Hermitian, unit trace, positive semidefinite.
#[derive(Debug, Clone)]
pub struct DensityMatrix {
    matrix: ComplexMatrix,
}

impl DensityMatrix {
    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        if matrix.nrows() != matrix.ncols() || !matrix.nrows().is_power_of_two() {
            return Err(Error::DimensionMismatch(format!("density matrix of shape {}x{}", matrix.nrows(), matrix.ncols())));
        }
        let dev = hermitian_deviation(&matrix);
        if dev > 1e-12 {
            return Err(Error::NotHermitian(dev));
        }
        let tr = trace(&matrix);
        if (tr - ONE).norm() > 1e-12 {
            return Err(Error::InvalidArgument(format!("density matrix trace {tr}")));
        }
        let min = min_eigenvalue(&matrix)?;
        if min < -1e-10 {
            return Err(Error::NotPsd(min));
        }
        Ok(Self { matrix })
    }

    /// Wraps the Hermitian part of a matrix known to be a state up to rounding.
    pub(crate) fn from_raw(matrix: ComplexMatrix) -> Self {
        Self { matrix: hermitian_part(&matrix) }
    }

    pub fn maximally_mixed(dim: usize) -> Self {
        Self { matrix: scale_real(&identity(dim), 1.0 / dim as f64) }
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.matrix
    }

    pub fn into_matrix(self) -> ComplexMatrix {
        self.matrix
    }

    pub fn dimension(&self) -> usize {
        self.matrix.nrows()
    }
}
