//! Noise on an n-qubit register as a sequence of local channels.
//!
//! Product noise such as AD(γ)^⊗5 or the interpolation composite has far too
//! many Kraus terms to expand, but each layer touches one or two qubits, so it
//! can be applied to Choi matrices and states locally.

use super::{
    amplitude_damping, choi_to_kraus_unchecked, correlated_xx, interpolated_pauli_with, kraus_to_choi,
    thermal_relaxation, Channel, ChoiMatrix, KrausChannel,
};
use crate::qcore::{self, adjoint, apply_local, conjugate_local, identity, ComplexMatrix};
use crate::{Error, Result};

/// One local channel and the qubits it acts on (0-based, most significant first).
#[derive(Debug, Clone)]
pub struct NoiseLayer {
    pub channel: KrausChannel,
    pub targets: Vec<usize>,
}

#[derive(Debug, Clone)]
pub struct LayeredChannel {
    n_qubits: usize,
    layers: Vec<NoiseLayer>,
}

/// Expanding beyond this many Kraus terms goes through the Choi spectrum instead.
const MAX_EXPANDED_KRAUS: usize = 4096;

impl LayeredChannel {
    /// Identity on `n_qubits`; add layers with [`push`](Self::push).
    pub fn new(n_qubits: usize) -> Self {
        Self { n_qubits, layers: Vec::new() }
    }

    pub fn push(&mut self, channel: KrausChannel, targets: Vec<usize>) -> Result<()> {
        let d = 1usize << targets.len();
        if channel.dim_in() != d || channel.dim_out() != d {
            return Err(Error::DimensionMismatch(format!(
                "{}→{} channel on {} target qubits",
                channel.dim_in(),
                channel.dim_out(),
                targets.len()
            )));
        }
        if targets.iter().any(|&q| q >= self.n_qubits) {
            return Err(Error::InvalidArgument(format!("targets {targets:?} outside {} qubits", self.n_qubits)));
        }
        let mut sorted = targets.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != targets.len() {
            return Err(Error::InvalidArgument(format!("repeated target in {targets:?}")));
        }
        self.layers.push(NoiseLayer { channel, targets });
        Ok(())
    }

    /// `parts[q]` acts on qubit q.
    pub fn product(parts: Vec<KrausChannel>) -> Result<Self> {
        let mut out = Self::new(parts.len());
        for (q, ch) in parts.into_iter().enumerate() {
            out.push(ch, vec![q])?;
        }
        Ok(out)
    }

    /// The same single-qubit channel on each of `n` qubits.
    pub fn uniform(channel: &KrausChannel, n: usize) -> Result<Self> {
        Self::product(vec![channel.clone(); n])
    }

    pub fn amplitude_damping(gamma: f64, n: usize) -> Result<Self> {
        Self::uniform(&amplitude_damping(gamma)?, n)
    }

    /// Independent thermal relaxation with per-qubit (T1, T2).
    pub fn thermal(t: f64, t1: &[f64], t2: &[f64]) -> Result<Self> {
        if t1.len() != t2.len() || t1.is_empty() {
            return Err(Error::DimensionMismatch(format!("{} T1 values vs {} T2 values", t1.len(), t2.len())));
        }
        Self::product(t1.iter().zip(t2).map(|(&a, &b)| thermal_relaxation(t, a, b)).collect::<Result<_>>()?)
    }

    /// Five-qubit interpolation composite with the standard constants
    /// (Pauli weight 0.05, p_xx = 0.05, γ = 0.05).
    pub fn interpolation_noise(eta: f64) -> Result<Self> {
        Self::interpolation_noise_with(eta, 0.05, 0.05, 0.05, 5)
    }

    /// N₃∘N₂∘N₁^η: Pauli interpolation on every qubit, then correlated XX on each
    /// neighbouring pair in ascending order, then amplitude damping on every qubit.
    pub fn interpolation_noise_with(eta: f64, pauli_weight: f64, p_xx: f64, gamma: f64, n: usize) -> Result<Self> {
        let mut out = Self::new(n);
        let single = interpolated_pauli_with(eta, pauli_weight)?;
        for q in 0..n {
            out.push(single.clone(), vec![q])?;
        }
        let pair = correlated_xx(p_xx, 1, 2)?;
        for q in 0..n.saturating_sub(1) {
            out.push(pair.clone(), vec![q, q + 1])?;
        }
        let ad = amplitude_damping(gamma)?;
        for q in 0..n {
            out.push(ad.clone(), vec![q])?;
        }
        Ok(out)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn layers(&self) -> &[NoiseLayer] {
        &self.layers
    }

    /// Number of Kraus terms of the fully expanded product.
    pub fn expanded_kraus_count(&self) -> usize {
        self.layers.iter().map(|l| l.channel.len()).product()
    }

    fn lead_qubits(lead: usize) -> usize {
        assert!(lead.is_power_of_two(), "leading dimension {lead} must be a power of two");
        lead.trailing_zeros() as usize
    }
}

impl Channel for LayeredChannel {
    fn dim_in(&self) -> usize {
        1 << self.n_qubits
    }

    fn dim_out(&self) -> usize {
        1 << self.n_qubits
    }

    fn apply_trailing(&self, m: &ComplexMatrix, lead: usize) -> ComplexMatrix {
        let lq = Self::lead_qubits(lead);
        let nq = lq + self.n_qubits;
        let mut cur = m.clone();
        for layer in &self.layers {
            let targets: Vec<usize> = layer.targets.iter().map(|q| q + lq).collect();
            let mut next = qcore::zeros(cur.nrows(), cur.ncols());
            for k in layer.channel.ops() {
                next += conjugate_local(k, &targets, nq, &cur);
            }
            cur = next;
        }
        cur
    }

    fn apply_adjoint_trailing(&self, m: &ComplexMatrix, lead: usize) -> ComplexMatrix {
        let lq = Self::lead_qubits(lead);
        let nq = lq + self.n_qubits;
        let mut cur = m.clone();
        for layer in self.layers.iter().rev() {
            let targets: Vec<usize> = layer.targets.iter().map(|q| q + lq).collect();
            let mut next = qcore::zeros(cur.nrows(), cur.ncols());
            for k in layer.channel.ops() {
                next += conjugate_local(&adjoint(k), &targets, nq, &cur);
            }
            cur = next;
        }
        cur
    }

    fn to_kraus(&self) -> Result<KrausChannel> {
        let d = self.dim_in();
        if self.expanded_kraus_count() <= MAX_EXPANDED_KRAUS {
            let mut ops = vec![identity(d)];
            for layer in &self.layers {
                let mut next = Vec::with_capacity(ops.len() * layer.channel.len());
                for k in layer.channel.ops() {
                    for prev in &ops {
                        let mut m = prev.clone();
                        apply_local(k, &layer.targets, self.n_qubits, &mut m);
                        next.push(m);
                    }
                }
                ops = next;
            }
            let expanded = KrausChannel::from_ops_unchecked(ops)?;
            if expanded.len() <= d * d {
                return Ok(expanded);
            }
            return choi_to_kraus_unchecked(&kraus_to_choi(&expanded));
        }
        let choi: ChoiMatrix = self.choi();
        choi_to_kraus_unchecked(&choi)
    }
}

impl From<&KrausChannel> for LayeredChannel {
    /// Single-layer wrapper around a channel on a whole register.
    fn from(ch: &KrausChannel) -> Self {
        let n = ch.dim_in().trailing_zeros() as usize;
        assert_eq!(1 << n, ch.dim_in());
        let mut out = Self::new(n);
        out.push(ch.clone(), (0..n).collect()).expect("whole-register layer");
        out
    }
}
