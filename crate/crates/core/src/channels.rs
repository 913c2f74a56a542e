//! CPTP channels in Kraus and Choi form, fidelity metrics and noise models.
//!
//! Choi convention: `C = Σ_ab |a⟩⟨b| ⊗ N(|a⟩⟨b|)`, input factor first. A
//! channel is CPTP iff its Choi matrix is PSD with `Tr_out C = I_in`.

use faer::Mat;
use num_complex::Complex64;
use rand::Rng;

use crate::qcore::{
    self, adjoint, eig_of_hermitian_part, frobenius_distance, hermitian_part, identity, partial_trace,
    pauli, random, scale_real, tensor, trace, trace_product, ComplexMatrix, DensityMatrix, ONE, ZERO,
};
use crate::{Error, Result};

mod layered;

pub use layered::{LayeredChannel, NoiseLayer};

/// Tolerance on Σ K†K = I for constructed channels.
pub const TP_TOL: f64 = 1e-10;

/// Common interface of channel representations.
///
/// The `_trailing` maps act on the last tensor factor of an operator on
/// `lead ⊗ dim_in`, leaving the leading factor untouched. That is the only
/// primitive needed to build Choi matrices of compositions.
pub trait Channel: Sync {
    fn dim_in(&self) -> usize;
    fn dim_out(&self) -> usize;

    /// (id_lead ⊗ N)(m) for `m` on `lead · dim_in`.
    fn apply_trailing(&self, m: &ComplexMatrix, lead: usize) -> ComplexMatrix;

    /// (id_lead ⊗ N†)(m) for `m` on `lead · dim_out`, with N† the adjoint (Heisenberg) map.
    fn apply_adjoint_trailing(&self, m: &ComplexMatrix, lead: usize) -> ComplexMatrix;

    /// An equivalent Kraus representation.
    fn to_kraus(&self) -> Result<KrausChannel>;

    fn apply_operator(&self, m: &ComplexMatrix) -> ComplexMatrix {
        self.apply_trailing(m, 1)
    }

    fn choi(&self) -> ChoiMatrix {
        let d = self.dim_in();
        let omega = maximally_entangled_projector(d);
        ChoiMatrix { matrix: self.apply_trailing(&omega, d), dim_in: d, dim_out: self.dim_out() }
    }
}

/// Unnormalized |Ω⟩⟨Ω| with |Ω⟩ = Σ_a |a⟩|a⟩.
pub fn maximally_entangled_projector(d: usize) -> ComplexMatrix {
    Mat::from_fn(d * d, d * d, |i, j| if i % (d + 1) == 0 && j % (d + 1) == 0 { ONE } else { ZERO })
}

/// Channel given by Kraus operators (each `dim_out × dim_in`).
#[derive(Debug, Clone)]
pub struct KrausChannel {
    ops: Vec<ComplexMatrix>,
    dim_in: usize,
    dim_out: usize,
}

impl KrausChannel {
    /// Validates shapes and trace preservation (Σ K†K = I within 1e-10).
    pub fn new(ops: Vec<ComplexMatrix>) -> Result<Self> {
        let ch = Self::from_ops_unchecked(ops)?;
        let dev = ch.tp_deviation();
        if dev > TP_TOL {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(ch)
    }

    /// Shape-checked but not trace-checked.
    pub(crate) fn from_ops_unchecked(ops: Vec<ComplexMatrix>) -> Result<Self> {
        let first = ops.first().ok_or(Error::Empty("Kraus set"))?;
        let (dim_out, dim_in) = (first.nrows(), first.ncols());
        if let Some(bad) = ops.iter().find(|k| k.nrows() != dim_out || k.ncols() != dim_in) {
            return Err(Error::DimensionMismatch(format!(
                "Kraus operator of shape {}x{} in a {}x{} set",
                bad.nrows(),
                bad.ncols(),
                dim_out,
                dim_in
            )));
        }
        Ok(Self { ops, dim_in, dim_out })
    }

    pub fn identity(dim: usize) -> Self {
        Self { ops: vec![identity(dim)], dim_in: dim, dim_out: dim }
    }

    pub fn ops(&self) -> &[ComplexMatrix] {
        &self.ops
    }

    pub fn into_ops(self) -> Vec<ComplexMatrix> {
        self.ops
    }

    pub fn len(&self) -> usize {
        self.ops.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ops.is_empty()
    }

    /// ‖Σ K†K − I‖_F.
    pub fn tp_deviation(&self) -> f64 {
        let mut sum = qcore::zeros(self.dim_in, self.dim_in);
        for k in &self.ops {
            sum += k.adjoint() * k;
        }
        frobenius_distance(&sum, &identity(self.dim_in))
    }

    /// Kraus set of the adjoint map (operators K†).
    pub fn adjoint_ops(&self) -> Vec<ComplexMatrix> {
        self.ops.iter().map(adjoint).collect()
    }
}

impl Channel for KrausChannel {
    fn dim_in(&self) -> usize {
        self.dim_in
    }

    fn dim_out(&self) -> usize {
        self.dim_out
    }

    fn apply_trailing(&self, m: &ComplexMatrix, lead: usize) -> ComplexMatrix {
        assert_eq!(m.nrows(), lead * self.dim_in);
        let mut out = qcore::zeros(lead * self.dim_out, lead * self.dim_out);
        for k in &self.ops {
            let big = if lead == 1 { k.clone() } else { tensor(&identity(lead), k) };
            out += &big * m * big.adjoint();
        }
        out
    }

    fn apply_adjoint_trailing(&self, m: &ComplexMatrix, lead: usize) -> ComplexMatrix {
        assert_eq!(m.nrows(), lead * self.dim_out);
        let mut out = qcore::zeros(lead * self.dim_in, lead * self.dim_in);
        for k in &self.ops {
            let big = if lead == 1 { k.clone() } else { tensor(&identity(lead), k) };
            out += big.adjoint() * m * &big;
        }
        out
    }

    fn to_kraus(&self) -> Result<KrausChannel> {
        Ok(self.clone())
    }
}

/// Choi matrix with input factor first.
#[derive(Debug, Clone)]
pub struct ChoiMatrix {
    pub matrix: ComplexMatrix,
    pub dim_in: usize,
    pub dim_out: usize,
}

impl ChoiMatrix {
    /// Validates PSD (≥ −1e-10) and Tr_out = I (≤ 1e-10).
    pub fn new(matrix: ComplexMatrix, dim_in: usize, dim_out: usize) -> Result<Self> {
        let choi = Self { matrix, dim_in, dim_out };
        choi.validate(1e-10)?;
        Ok(choi)
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let d = self.dim_in * self.dim_out;
        if self.matrix.nrows() != d || self.matrix.ncols() != d {
            return Err(Error::DimensionMismatch(format!(
                "Choi matrix {}x{} for a {}→{} channel",
                self.matrix.nrows(),
                self.matrix.ncols(),
                self.dim_in,
                self.dim_out
            )));
        }
        let min = qcore::min_eigenvalue(&self.matrix)?;
        if min < -tol {
            return Err(Error::NotPsd(min));
        }
        let dev = self.tp_deviation();
        if dev > tol {
            return Err(Error::NotTracePreserving(dev));
        }
        Ok(())
    }

    /// ‖Tr_out C − I‖_F.
    pub fn tp_deviation(&self) -> f64 {
        let red = partial_trace(&self.matrix, &[self.dim_in, self.dim_out], &[0]).expect("Choi shape checked");
        frobenius_distance(&red, &identity(self.dim_in))
    }

    /// Composition with `next` applied after this channel.
    pub fn then(&self, next: &impl Channel) -> ChoiMatrix {
        assert_eq!(next.dim_in(), self.dim_out);
        ChoiMatrix { matrix: next.apply_trailing(&self.matrix, self.dim_in), dim_in: self.dim_in, dim_out: next.dim_out() }
    }

    /// Channel fidelity ⟨Ω|C|Ω⟩/d² of a square channel.
    pub fn channel_fidelity(&self) -> f64 {
        let d = self.dim_in;
        assert_eq!(d, self.dim_out);
        let mut acc = ZERO;
        for a in 0..d {
            for b in 0..d {
                acc += self.matrix[(a * d + a, b * d + b)];
            }
        }
        acc.re / (d * d) as f64
    }
}

pub fn kraus_to_choi(ch: &KrausChannel) -> ChoiMatrix {
    let (din, dout) = (ch.dim_in, ch.dim_out);
    let n = din * dout;
    let mut m = qcore::zeros(n, n);
    for k in &ch.ops {
        let v: Vec<Complex64> = (0..n).map(|idx| k[(idx % dout, idx / dout)]).collect();
        for j in 0..n {
            let vj = v[j].conj();
            if vj == ZERO {
                continue;
            }
            for i in 0..n {
                m[(i, j)] += v[i] * vj;
            }
        }
    }
    ChoiMatrix { matrix: m, dim_in: din, dim_out: dout }
}

/// Eigenvalue cutoff used when extracting Kraus operators from a Choi matrix.
pub const CHOI_CUTOFF: f64 = 1e-12;

/// Minimal Kraus set from the spectral decomposition of a Choi matrix.
pub fn choi_to_kraus(choi: &ChoiMatrix) -> Result<KrausChannel> {
    choi.validate(1e-10)?;
    choi_to_kraus_unchecked(choi)
}

pub(crate) fn choi_to_kraus_unchecked(choi: &ChoiMatrix) -> Result<KrausChannel> {
    let (din, dout) = (choi.dim_in, choi.dim_out);
    let eig = eig_of_hermitian_part(&choi.matrix)?;
    let ops: Vec<ComplexMatrix> = eig
        .values
        .iter()
        .enumerate()
        .rev()
        .filter(|(_, &lam)| lam > CHOI_CUTOFF)
        .map(|(col, &lam)| {
            let s = lam.sqrt();
            Mat::from_fn(dout, din, |b, a| eig.vectors[(a * dout + b, col)] * s)
        })
        .collect();
    if ops.is_empty() {
        return Err(Error::Empty("Choi matrix spectrum"));
    }
    KrausChannel::from_ops_unchecked(ops)
}

/// ρ ↦ Σ K ρ K†.
pub fn apply(ch: &KrausChannel, rho: &DensityMatrix) -> Result<DensityMatrix> {
    if rho.dimension() != ch.dim_in {
        return Err(Error::DimensionMismatch(format!(
            "channel input {} vs state dimension {}",
            ch.dim_in,
            rho.dimension()
        )));
    }
    Ok(DensityMatrix::from_raw(ch.apply_operator(rho.matrix())))
}

/// Kraus set {S_j F_i} of `second ∘ first`.
pub fn compose(second: &KrausChannel, first: &KrausChannel) -> Result<KrausChannel> {
    if first.dim_out != second.dim_in {
        return Err(Error::DimensionMismatch(format!(
            "composing {}→{} after {}→{}",
            second.dim_in, second.dim_out, first.dim_in, first.dim_out
        )));
    }
    let ops = second.ops.iter().flat_map(|s| first.ops.iter().map(move |f| s * f)).collect();
    KrausChannel::from_ops_unchecked(ops)
}

/// Kraus operators are all tensor products of the component operators.
pub fn tensor_channels(parts: &[KrausChannel]) -> Result<KrausChannel> {
    if parts.is_empty() {
        return Err(Error::Empty("channel sequence"));
    }
    let mut ops = vec![identity(1)];
    for part in parts {
        ops = ops.iter().flat_map(|a| part.ops.iter().map(move |b| tensor(a, b))).collect();
    }
    KrausChannel::from_ops_unchecked(ops)
}

/// F_C = (1/d²) Σ_j |Tr M_j|².
pub fn channel_fidelity(ch: &KrausChannel) -> Result<f64> {
    if ch.dim_in != ch.dim_out {
        return Err(Error::DimensionMismatch(format!("channel fidelity of a {}→{} channel", ch.dim_in, ch.dim_out)));
    }
    let d = ch.dim_in as f64;
    Ok(ch.ops.iter().map(|m| trace(m).norm_sqr()).sum::<f64>() / (d * d))
}

/// F_e(ρ, M) = Σ_j |Tr(ρ M_j)|².
pub fn entanglement_fidelity(rho: &DensityMatrix, ch: &KrausChannel) -> Result<f64> {
    if ch.dim_in != ch.dim_out || rho.dimension() != ch.dim_in {
        return Err(Error::DimensionMismatch(format!(
            "entanglement fidelity of a {}→{} channel on a {}-dimensional state",
            ch.dim_in,
            ch.dim_out,
            rho.dimension()
        )));
    }
    Ok(ch.ops.iter().map(|m| trace_product(rho.matrix(), m).norm_sqr()).sum())
}

fn check_probability(name: &'static str, value: f64) -> Result<()> {
    if !(0.0..=1.0).contains(&value) || value.is_nan() {
        return Err(Error::OutOfRange { name, value });
    }
    Ok(())
}

/// E₀ = diag(1, √(1−γ)), E₁ = √γ |0⟩⟨1|.
pub fn amplitude_damping(gamma: f64) -> Result<KrausChannel> {
    check_probability("gamma", gamma)?;
    let e0 = qcore::from_real(2, 2, &[1.0, 0.0, 0.0, (1.0 - gamma).sqrt()]);
    let e1 = qcore::from_real(2, 2, &[0.0, gamma.sqrt(), 0.0, 0.0]);
    Ok(KrausChannel { ops: vec![e0, e1], dim_in: 2, dim_out: 2 })
}

/// Phase–amplitude damping for a wait `t` on a qubit with coherence times T1, T2.
///
/// Kraus operators A₁ = diag(1, √(1−γ−λ)), A₂ = √γ|0⟩⟨1|, A₃ = √λ|1⟩⟨1| with
/// γ = 1 − e^{−t/T1} and λ = e^{−t/T1} − e^{−2t/T2}, so that coherences decay
/// as e^{−t/T2} and populations relax as e^{−t/T1}.
pub fn thermal_relaxation(t: f64, t1: f64, t2: f64) -> Result<KrausChannel> {
    if t.is_nan() || t < 0.0 {
        return Err(Error::OutOfRange { name: "t", value: t });
    }
    if t1.is_nan() || t1 <= 0.0 {
        return Err(Error::OutOfRange { name: "T1", value: t1 });
    }
    if t2.is_nan() || t2 <= 0.0 || t2 > 2.0 * t1 {
        return Err(Error::OutOfRange { name: "T2", value: t2 });
    }
    let decay = (-t / t1).exp();
    let coherence = (-t / t2).exp();
    let gamma = 1.0 - decay;
    let lambda = (decay - coherence * coherence).max(0.0);
    let a1 = qcore::from_real(2, 2, &[1.0, 0.0, 0.0, coherence]);
    let a2 = qcore::from_real(2, 2, &[0.0, gamma.sqrt(), 0.0, 0.0]);
    let a3 = qcore::from_real(2, 2, &[0.0, 0.0, 0.0, lambda.sqrt()]);
    Ok(KrausChannel { ops: vec![a1, a2, a3], dim_in: 2, dim_out: 2 })
}

/// Mixture of unitaries: ρ ↦ Σ p_i U_i ρ U_i†.
pub fn unitary_mixture(terms: &[(f64, ComplexMatrix)]) -> Result<KrausChannel> {
    let ops = terms
        .iter()
        .filter(|(p, _)| *p > 0.0)
        .map(|(p, u)| scale_real(u, p.sqrt()))
        .collect::<Vec<_>>();
    if ops.is_empty() {
        return Err(Error::Empty("unitary mixture"));
    }
    KrausChannel::new(ops)
}

/// ρ ↦ 0.05(ZρZ + ηXρX + ηYρY) + (0.95 − 0.1η)ρ.
pub fn interpolated_pauli(eta: f64) -> Result<KrausChannel> {
    interpolated_pauli_with(eta, 0.05)
}

/// Dephasing-to-depolarizing interpolation with Pauli weight `p`:
/// ρ ↦ p(ZρZ + ηXρX + ηYρY) + (1 − p − 2pη)ρ.
pub fn interpolated_pauli_with(eta: f64, p: f64) -> Result<KrausChannel> {
    check_probability("eta", eta)?;
    check_probability("p", p)?;
    let weights = [1.0 - p - 2.0 * p * eta, p * eta, p * eta, p];
    if weights[0] < 0.0 {
        return Err(Error::OutOfRange { name: "p", value: p });
    }
    let ops = ['I', 'X', 'Y', 'Z']
        .iter()
        .zip(weights)
        .map(|(&l, w)| scale_real(&pauli(l).expect("valid letter"), w.sqrt()))
        .collect();
    Ok(KrausChannel { ops, dim_in: 2, dim_out: 2 })
}

/// ρ ↦ (1−p)ρ + p XᵢXᵢ₊₁ ρ XᵢXᵢ₊₁ on `n` qubits; `i` is 1-based in 1..n−1.
pub fn correlated_xx(p_xx: f64, i: usize, n: usize) -> Result<KrausChannel> {
    check_probability("p_xx", p_xx)?;
    if i < 1 || i + 1 > n {
        return Err(Error::InvalidArgument(format!("qubit pair ({i}, {}) outside 1..={n}", i + 1)));
    }
    let xx = qcore::pauli_on(n, &[(i - 1, 'X'), (i, 'X')])?;
    let d = 1 << n;
    let ops = vec![scale_real(&identity(d), (1.0 - p_xx).sqrt()), scale_real(&xx, p_xx.sqrt())];
    Ok(KrausChannel { ops, dim_in: d, dim_out: d })
}

/// Five-qubit composite N₃∘N₂∘N₁^η as an explicit (compressed) Kraus channel.
///
/// The full product has 2^15 · 16 Kraus terms, so the set is reduced to at most
/// 1024 operators via the Choi spectrum. Use [`LayeredChannel::interpolation_noise`]
/// for the factorized form, which the experiments use directly.
pub fn interpolation_noise(eta: f64) -> Result<KrausChannel> {
    LayeredChannel::interpolation_noise(eta)?.to_kraus()
}

/// ρ ↦ (1−p)ρ + p·I/2 on one qubit, as four Pauli Kraus operators.
pub fn depolarizing(p: f64) -> Result<KrausChannel> {
    check_probability("p", p)?;
    let w = [1.0 - 0.75 * p, p / 4.0, p / 4.0, p / 4.0];
    let ops = ['I', 'X', 'Y', 'Z']
        .iter()
        .zip(w)
        .map(|(&l, w)| scale_real(&pauli(l).expect("valid letter"), w.sqrt()))
        .collect();
    Ok(KrausChannel { ops, dim_in: 2, dim_out: 2 })
}

/// ρ ↦ (1−p)ρ + pXρX.
pub fn bit_flip(p: f64) -> Result<KrausChannel> {
    check_probability("p", p)?;
    unitary_mixture(&[(1.0 - p, identity(2)), (p, pauli('X')?)])
}

/// Random CPTP map from a Haar-random Stinespring isometry.
pub fn random_channel<R: Rng + ?Sized>(dim_in: usize, dim_out: usize, kraus_count: usize, rng: &mut R) -> KrausChannel {
    let v = random::haar_isometry(dim_out * kraus_count, dim_in, rng);
    let ops = (0..kraus_count)
        .map(|k| Mat::from_fn(dim_out, dim_in, |i, j| v[(k * dim_out + i, j)]))
        .collect();
    KrausChannel { ops, dim_in, dim_out }
}

/// Action difference max_ab ‖A(|a⟩⟨b|) − B(|a⟩⟨b|)‖_F over matrix units.
pub fn action_distance(a: &impl Channel, b: &impl Channel) -> f64 {
    assert_eq!(a.dim_in(), b.dim_in());
    let d = a.dim_in();
    let mut worst: f64 = 0.0;
    for i in 0..d {
        for j in 0..d {
            let mut unit = qcore::zeros(d, d);
            unit[(i, j)] = ONE;
            worst = worst.max(frobenius_distance(&a.apply_operator(&unit), &b.apply_operator(&unit)));
        }
    }
    worst
}

/// Output of a channel on a state, symmetrized.
pub fn apply_channel(ch: &impl Channel, rho: &DensityMatrix) -> DensityMatrix {
    DensityMatrix::from_raw(hermitian_part(&ch.apply_operator(rho.matrix())))
}
