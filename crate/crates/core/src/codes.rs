//! Encoders, code projectors, the Knill–Laflamme check and syndrome decoders.

use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_2};
use std::fmt;
use std::str::FromStr;

use faer::Mat;

use crate::ansatz::k5_circuit;
use crate::channels::KrausChannel;
use crate::qcore::{
    self, adjoint, c, frobenius, frobenius_distance, identity, pauli_on, pauli_string, trace, ComplexMatrix,
    DensityMatrix, PureState, I, ONE, ZERO,
};
use crate::{Error, Result};

/// Isometry V from k logical qubits into n physical qubits.
#[derive(Debug, Clone)]
pub struct Encoder {
    isometry: ComplexMatrix,
    n: usize,
    k: usize,
    label: String,
}

/// Tolerance on V†V = I.
pub const ISOMETRY_TOL: f64 = 1e-10;

impl Encoder {
    pub fn new(isometry: ComplexMatrix, label: impl Into<String>) -> Result<Self> {
        let (rows, cols) = (isometry.nrows(), isometry.ncols());
        if !rows.is_power_of_two() || !cols.is_power_of_two() || cols > rows {
            return Err(Error::DimensionMismatch(format!("{rows}x{cols} is not a qubit isometry shape")));
        }
        let dev = frobenius_distance(&(isometry.adjoint() * &isometry), &identity(cols));
        if dev > ISOMETRY_TOL {
            return Err(Error::InvalidArgument(format!("V†V deviates from identity by {dev:.3e}")));
        }
        Ok(Self {
            isometry,
            n: rows.trailing_zeros() as usize,
            k: cols.trailing_zeros() as usize,
            label: label.into(),
        })
    }

    pub fn isometry(&self) -> &ComplexMatrix {
        &self.isometry
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn physical_dim(&self) -> usize {
        1 << self.n
    }

    pub fn logical_dim(&self) -> usize {
        1 << self.k
    }

    pub fn codeword(&self, logical: usize) -> PureState {
        PureState::new(self.isometry.col(logical).iter().copied().collect()).expect("isometry columns are unit vectors")
    }

    pub fn encode_state(&self, psi: &PureState) -> Result<PureState> {
        if psi.dimension() != self.logical_dim() {
            return Err(Error::DimensionMismatch(format!("{}-dim state into a k={} code", psi.dimension(), self.k)));
        }
        let out = &self.isometry * psi.as_column();
        PureState::normalized(out.col(0).iter().copied().collect())
    }

    pub fn encode(&self, rho: &DensityMatrix) -> Result<DensityMatrix> {
        if rho.dimension() != self.logical_dim() {
            return Err(Error::DimensionMismatch(format!("{}-dim state into a k={} code", rho.dimension(), self.k)));
        }
        Ok(DensityMatrix::from_raw(&self.isometry * rho.matrix() * self.isometry.adjoint()))
    }

    /// The encoding as a one-Kraus channel.
    pub fn channel(&self) -> KrausChannel {
        KrausChannel::new(vec![self.isometry.clone()]).expect("validated isometry")
    }

    pub fn projector(&self) -> ComplexMatrix {
        &self.isometry * self.isometry.adjoint()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Basis {
    X,
    Z,
}

/// Z basis: |b⟩ ↦ |b…b⟩. X basis: |0⟩ ↦ |+…+⟩, |1⟩ ↦ |−…−⟩.
pub fn repetition_encoder(n: usize, basis: Basis) -> Result<Encoder> {
    if n != 3 && n != 5 {
        return Err(Error::InvalidArgument(format!("repetition code on {n} qubits (supported: 3, 5)")));
    }
    let d = 1usize << n;
    let v = match basis {
        Basis::Z => Mat::from_fn(d, 2, |i, j| if i == j * (d - 1) { ONE } else { ZERO }),
        Basis::X => {
            let amp = (d as f64).sqrt().recip();
            Mat::from_fn(d, 2, |i, j| {
                let sign = if j == 1 && i.count_ones() % 2 == 1 { -1.0 } else { 1.0 };
                c(sign * amp, 0.0)
            })
        }
    };
    let label = match basis {
        Basis::Z => format!("rep{n}Z"),
        Basis::X => format!("rep{n}X"),
    };
    Encoder::new(v, label)
}

/// Five-qubit VGQEC family: CNOT fan-out from qubit 1, H on all qubits, then
/// R_ZZ(α₅) on (1,5) and R_ZZ(α₁..α₄) along the chain.
pub fn vgqec_k5_encoder(alpha: &[f64; 5]) -> Encoder {
    let circuit = k5_circuit();
    let mut v = Mat::from_fn(32, 2, |i, j| if i == j * 16 { ONE } else { ZERO });
    circuit.apply(alpha, &mut v).expect("five parameters");
    Encoder::new(v, "vgqec5").expect("unitary circuit")
}

/// The K₅ circuit with all ring angles −π/2.
pub fn five_one_three_encoder() -> Encoder {
    let mut e = vgqec_k5_encoder(&[-FRAC_PI_2; 5]);
    e.label = "fiveonethree".into();
    e
}

/// |0_L⟩ = (|000⟩ + i|110⟩)/√2, |1_L⟩ = (i|001⟩ + |111⟩)/√2.
pub fn discovered_three_qubit_encoder() -> Encoder {
    let s = FRAC_1_SQRT_2;
    let mut v = qcore::zeros(8, 2);
    v[(0b000, 0)] = c(s, 0.0);
    v[(0b110, 0)] = I * s;
    v[(0b001, 1)] = I * s;
    v[(0b111, 1)] = c(s, 0.0);
    Encoder::new(v, "discovered3").expect("orthonormal codewords")
}

pub fn code_projector(e: &Encoder) -> ComplexMatrix {
    e.projector()
}

/// Generators X₂Z₃Z₄X₅, X₁X₃Z₄Z₅, Z₁X₂X₄Z₅, Z₁Z₂X₃X₅ as Pauli strings.
pub const FIVE_ONE_THREE_GENERATORS: [&str; 4] = ["IXZZX", "XIXZZ", "ZXIXZ", "ZZXIX"];

/// Π_g (I + s_g G_g)/2 for signs s_g ∈ {+1, −1}.
pub fn stabilizer_projector(generators: &[&str], signs: &[i8]) -> Result<ComplexMatrix> {
    if generators.len() != signs.len() {
        return Err(Error::DimensionMismatch(format!("{} generators, {} signs", generators.len(), signs.len())));
    }
    let n = generators.first().ok_or(Error::Empty("generator list"))?.len();
    let d = 1usize << n;
    let mut p = identity(d);
    for (g, &s) in generators.iter().zip(signs) {
        if s != 1 && s != -1 {
            return Err(Error::InvalidArgument(format!("stabilizer sign {s}")));
        }
        let half = qcore::scale_real(&(identity(d) + qcore::scale_real(&pauli_string(g, n)?, s as f64)), 0.5);
        p = &p * half;
    }
    Ok(p)
}

/// Sign pattern of the generators on a code space, or `None` if the space is
/// not a joint ±1 eigenspace of all of them.
pub fn stabilizer_signs(projector: &ComplexMatrix, generators: &[&str], tol: f64) -> Result<Option<Vec<i8>>> {
    let n = projector.nrows().trailing_zeros() as usize;
    let mut signs = Vec::with_capacity(generators.len());
    for g in generators {
        let pg = projector * pauli_string(g, n)?;
        let sign: i8 = if frobenius_distance(&pg, projector) <= tol {
            1
        } else if frobenius(&(&pg + projector)) <= tol {
            -1
        } else {
            return Ok(None);
        };
        signs.push(sign);
    }
    Ok(Some(signs))
}

/// {I} ∪ {X_q, Y_q, Z_q}: the identity followed by all 3n weight-1 Paulis.
pub fn weight_one_paulis(n: usize) -> Vec<ComplexMatrix> {
    let mut errors = vec![identity(1 << n)];
    for q in 0..n {
        for p in ['X', 'Y', 'Z'] {
            errors.push(pauli_on(n, &[(q, p)]).expect("valid qubit and letter"));
        }
    }
    errors
}

/// λ normalized to unit trace, with the largest violation of P Eᵢ†Eⱼ P = λᵢⱼ P.
#[derive(Debug, Clone)]
pub struct KLReport {
    pub lambda: ComplexMatrix,
    pub residual: f64,
}

pub fn kl_check(projector: &ComplexMatrix, errors: &[ComplexMatrix], tol: f64) -> Result<KLReport> {
    if errors.is_empty() {
        return Err(Error::Empty("error set"));
    }
    let d = projector.nrows();
    if projector.ncols() != d || errors.iter().any(|e| e.nrows() != d || e.ncols() != d) {
        return Err(Error::DimensionMismatch(format!("errors must be {d}x{d} like the projector")));
    }
    let idem = frobenius_distance(&(projector * projector), projector);
    let herm = qcore::hermitian_deviation(projector);
    if idem.max(herm) > tol.max(1e-12) {
        return Err(Error::InvalidArgument(format!("not a projector (deviation {:.3e})", idem.max(herm))));
    }
    let tr_p = trace(projector).re;
    let ep: Vec<ComplexMatrix> = errors.iter().map(|e| e * projector).collect();
    let m = errors.len();
    let mut lambda = qcore::zeros(m, m);
    let mut residual: f64 = 0.0;
    for i in 0..m {
        let left = adjoint(&ep[i]);
        for j in i..m {
            let block = &left * &ep[j];
            let l = trace(&block) * (1.0 / tr_p);
            residual = residual.max(frobenius_distance(&block, &qcore::scale(projector, l)));
            lambda[(i, j)] = l;
            lambda[(j, i)] = l.conj();
        }
    }
    let tr = trace(&lambda).re;
    if tr > 0.0 {
        lambda = qcore::scale_real(&lambda, 1.0 / tr);
    }
    Ok(KLReport { lambda, residual })
}

/// Which syndrome decoder to build.
#[derive(Debug, Clone)]
pub enum DecoderSpec {
    /// Corrects single bit flips on the Z-basis 3-qubit repetition code.
    Rep3Z,
    /// Corrects up to two phase flips on the X-basis 5-qubit repetition code.
    Rep5X,
    /// Corrects every weight-1 Pauli on the [[5,1,3]] code.
    FiveOneThree,
    /// Corrections for an arbitrary encoder; the images of the code space
    /// under the corrections must be mutually orthogonal.
    Custom { encoder: Encoder, corrections: Vec<ComplexMatrix> },
}

impl DecoderSpec {
    pub fn label(&self) -> &str {
        match self {
            DecoderSpec::Rep3Z => "rep3Z",
            DecoderSpec::Rep5X => "rep5X",
            DecoderSpec::FiveOneThree => "fiveonethree",
            DecoderSpec::Custom { .. } => "custom",
        }
    }

    pub fn encoder(&self) -> Encoder {
        match self {
            DecoderSpec::Rep3Z => repetition_encoder(3, Basis::Z).expect("n = 3"),
            DecoderSpec::Rep5X => repetition_encoder(5, Basis::X).expect("n = 5"),
            DecoderSpec::FiveOneThree => five_one_three_encoder(),
            DecoderSpec::Custom { encoder, .. } => encoder.clone(),
        }
    }

    pub fn corrections(&self) -> Vec<ComplexMatrix> {
        let paulis = |n: usize, terms: &[&[(usize, char)]]| -> Vec<ComplexMatrix> {
            terms.iter().map(|t| pauli_on(n, t).expect("valid Pauli")).collect()
        };
        match self {
            DecoderSpec::Rep3Z => paulis(3, &[&[], &[(0, 'X')], &[(1, 'X')], &[(2, 'X')]]),
            DecoderSpec::Rep5X => {
                let mut out = vec![identity(32)];
                out.extend((0..5).map(|i| pauli_on(5, &[(i, 'Z')]).expect("valid")));
                for i in 0..5 {
                    for j in i + 1..5 {
                        out.push(pauli_on(5, &[(i, 'Z'), (j, 'Z')]).expect("valid"));
                    }
                }
                out
            }
            DecoderSpec::FiveOneThree => {
                let mut out = vec![identity(32)];
                for q in 0..5 {
                    for p in ['X', 'Y', 'Z'] {
                        out.push(pauli_on(5, &[(q, p)]).expect("valid"));
                    }
                }
                out
            }
            DecoderSpec::Custom { corrections, .. } => corrections.clone(),
        }
    }
}

impl FromStr for DecoderSpec {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "rep3Z" => Ok(DecoderSpec::Rep3Z),
            "rep5X" => Ok(DecoderSpec::Rep5X),
            "fiveonethree" | "513" => Ok(DecoderSpec::FiveOneThree),
            other => Err(Error::UnknownCode(other.to_string())),
        }
    }
}

impl fmt::Display for DecoderSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

/// Syndrome decoder {V† C_s†} over the correction set, completed on the
/// uncovered subspace by mapping it to |0⟩.
pub fn standard_decoder(spec: &DecoderSpec) -> Result<KrausChannel> {
    decoder_for(&spec.encoder(), &spec.corrections())
}

/// Decoder for an encoder and unitary corrections C_s whose images C_s·Im(V)
/// are mutually orthogonal.
pub fn decoder_for(encoder: &Encoder, corrections: &[ComplexMatrix]) -> Result<KrausChannel> {
    if corrections.is_empty() {
        return Err(Error::Empty("correction table"));
    }
    let v = encoder.isometry();
    let (d, kd) = (v.nrows(), v.ncols());
    let images: Vec<ComplexMatrix> = corrections.iter().map(|cs| cs * v).collect();
    for (s, img) in images.iter().enumerate() {
        if frobenius_distance(&(img.adjoint() * img), &identity(kd)) > 1e-10 {
            return Err(Error::InvalidArgument(format!("correction {s} is not unitary on the code space")));
        }
        for (t, other) in images.iter().enumerate().take(s) {
            let overlap = frobenius(&(img.adjoint() * other));
            if overlap > 1e-10 {
                return Err(Error::InvalidArgument(format!(
                    "syndrome spaces {t} and {s} overlap ({overlap:.3e})"
                )));
            }
        }
    }
    let mut ops: Vec<ComplexMatrix> = images.iter().map(adjoint).collect();
    // Orthonormal basis of the uncovered subspace, grouped into partial isometries onto the logical space.
    let mut covered = qcore::zeros(d, 0);
    for img in &images {
        covered = concat_columns(&covered, img);
    }
    let complement = orthogonal_complement(&covered);
    for chunk_start in (0..complement.ncols()).step_by(kd) {
        let width = kd.min(complement.ncols() - chunk_start);
        let mut k = qcore::zeros(kd, d);
        for l in 0..width {
            for x in 0..d {
                k[(l, x)] = complement[(x, chunk_start + l)].conj();
            }
        }
        ops.push(k);
    }
    KrausChannel::new(ops)
}

fn concat_columns(a: &ComplexMatrix, b: &ComplexMatrix) -> ComplexMatrix {
    Mat::from_fn(a.nrows(), a.ncols() + b.ncols(), |i, j| if j < a.ncols() { a[(i, j)] } else { b[(i, j - a.ncols())] })
}

/// Orthonormal basis of the complement of the column span of an orthonormal set.
fn orthogonal_complement(q: &ComplexMatrix) -> ComplexMatrix {
    let d = q.nrows();
    if q.ncols() >= d {
        return qcore::zeros(d, 0);
    }
    let proj = identity(d) - q * q.adjoint();
    let eig = qcore::eig_of_hermitian_part(&proj).expect("finite projector");
    let cols: Vec<usize> = (0..d).filter(|&i| eig.values[i] > 0.5).collect();
    Mat::from_fn(d, cols.len(), |i, j| eig.vectors[(i, cols[j])])
}
