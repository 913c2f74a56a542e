//! Gate-level circuits with free parameter slots, the U_E and U_R ansatz
//! builders, and assembly of variational encode/recover maps.
//!
//! Rotations: R_X(x) = exp(−i x/2 X), R_Z(x) = exp(−i x/2 Z),
//! R_ZZ(x) = exp(−i x/2 Z⊗Z). Qubit 0 is the most significant factor.

use std::f64::consts::FRAC_1_SQRT_2;

use faer::Mat;

use crate::channels::KrausChannel;
use crate::codes::Encoder;
use crate::qcore::{c, ComplexMatrix, ZERO};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum GateKind {
    H,
    Cnot,
    Rx,
    Rz,
    Rzz,
}

impl GateKind {
    pub fn arity(self) -> usize {
        match self {
            GateKind::H | GateKind::Rx | GateKind::Rz => 1,
            GateKind::Cnot | GateKind::Rzz => 2,
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::Rx | GateKind::Rz | GateKind::Rzz)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Angle {
    Fixed(f64),
    Slot(usize),
}

#[derive(Debug, Clone, PartialEq)]
pub struct Gate {
    pub kind: GateKind,
    /// One or two qubits; for CNOT the control comes first.
    pub targets: Vec<usize>,
    /// Present exactly for rotations.
    pub angle: Option<Angle>,
}

impl Gate {
    pub fn h(q: usize) -> Self {
        Self { kind: GateKind::H, targets: vec![q], angle: None }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Self { kind: GateKind::Cnot, targets: vec![control, target], angle: None }
    }

    pub fn rx(q: usize, angle: Angle) -> Self {
        Self { kind: GateKind::Rx, targets: vec![q], angle: Some(angle) }
    }

    pub fn rz(q: usize, angle: Angle) -> Self {
        Self { kind: GateKind::Rz, targets: vec![q], angle: Some(angle) }
    }

    pub fn rzz(a: usize, b: usize, angle: Angle) -> Self {
        Self { kind: GateKind::Rzz, targets: vec![a, b], angle: Some(angle) }
    }

    fn check(&self, qubit_count: usize) -> Result<()> {
        if self.targets.len() != self.kind.arity() {
            return Err(Error::InvalidArgument(format!("{:?} needs {} target(s)", self.kind, self.kind.arity())));
        }
        if self.targets.iter().any(|&q| q >= qubit_count) {
            return Err(Error::InvalidArgument(format!("targets {:?} outside {qubit_count} qubits", self.targets)));
        }
        if self.targets.len() == 2 && self.targets[0] == self.targets[1] {
            return Err(Error::InvalidArgument(format!("{:?} on a repeated qubit", self.kind)));
        }
        if self.kind.is_rotation() != self.angle.is_some() {
            return Err(Error::InvalidArgument(format!("{:?} with angle {:?}", self.kind, self.angle)));
        }
        Ok(())
    }

    fn resolved_angle(&self, params: &[f64]) -> f64 {
        match self.angle {
            Some(Angle::Fixed(x)) => x,
            Some(Angle::Slot(s)) => params[s],
            None => 0.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    qubit_count: usize,
    gates: Vec<Gate>,
    parameter_count: usize,
}

impl Circuit {
    pub fn new(qubit_count: usize) -> Self {
        Self { qubit_count, gates: Vec::new(), parameter_count: 0 }
    }

    /// Appends a gate; slot indices extend the parameter count as needed.
    pub fn push(&mut self, gate: Gate) -> Result<()> {
        gate.check(self.qubit_count)?;
        if let Some(Angle::Slot(s)) = gate.angle {
            self.parameter_count = self.parameter_count.max(s + 1);
        }
        self.gates.push(gate);
        Ok(())
    }

    /// Appends a rotation with a new parameter slot.
    pub fn push_free(&mut self, kind: GateKind, targets: &[usize]) -> Result<usize> {
        let slot = self.parameter_count;
        self.push(Gate { kind, targets: targets.to_vec(), angle: Some(Angle::Slot(slot)) })?;
        Ok(slot)
    }

    /// Checks every slot below `parameter_count` is referenced.
    pub fn validate(&self) -> Result<()> {
        let mut used = vec![false; self.parameter_count];
        for g in &self.gates {
            g.check(self.qubit_count)?;
            if let Some(Angle::Slot(s)) = g.angle {
                used[s] = true;
            }
        }
        match used.iter().position(|u| !u) {
            Some(s) => Err(Error::InvalidArgument(format!("parameter slot {s} is never used"))),
            None => Ok(()),
        }
    }

    pub fn qubit_count(&self) -> usize {
        self.qubit_count
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn parameter_count(&self) -> usize {
        self.parameter_count
    }

    pub fn dimension(&self) -> usize {
        1 << self.qubit_count
    }

    fn check_params(&self, params: &[f64]) -> Result<()> {
        if params.len() != self.parameter_count {
            return Err(Error::DimensionMismatch(format!(
                "{} parameters for a circuit with {} slots",
                params.len(),
                self.parameter_count
            )));
        }
        Ok(())
    }

    /// Left-multiplies every column of `m` (2ⁿ rows) by the circuit unitary.
    pub fn apply(&self, params: &[f64], m: &mut ComplexMatrix) -> Result<()> {
        self.check_params(params)?;
        if m.nrows() != self.dimension() {
            return Err(Error::DimensionMismatch(format!("{} rows for a {}-qubit circuit", m.nrows(), self.qubit_count)));
        }
        for j in 0..m.ncols() {
            let col = m.col_as_slice_mut(j);
            for g in &self.gates {
                apply_gate(g, g.resolved_angle(params), self.qubit_count, col);
            }
        }
        Ok(())
    }

    pub fn unitary(&self, params: &[f64]) -> Result<ComplexMatrix> {
        let mut u = crate::qcore::identity(self.dimension());
        self.apply(params, &mut u)?;
        Ok(u)
    }
}

fn bit(q: usize, nq: usize) -> usize {
    1 << (nq - 1 - q)
}

/// Applies one gate in place to a state vector.
fn apply_gate(g: &Gate, x: f64, nq: usize, v: &mut [num_complex::Complex64]) {
    match g.kind {
        GateKind::H => {
            let b = bit(g.targets[0], nq);
            for i in (0..v.len()).filter(|i| i & b == 0) {
                let (p, q) = (v[i], v[i | b]);
                v[i] = (p + q) * FRAC_1_SQRT_2;
                v[i | b] = (p - q) * FRAC_1_SQRT_2;
            }
        }
        GateKind::Cnot => {
            let (bc, bt) = (bit(g.targets[0], nq), bit(g.targets[1], nq));
            for i in (0..v.len()).filter(|i| i & bc != 0 && i & bt == 0) {
                v.swap(i, i | bt);
            }
        }
        GateKind::Rx => {
            let b = bit(g.targets[0], nq);
            let (co, si) = ((x / 2.0).cos(), (x / 2.0).sin());
            let mis = c(0.0, -si);
            for i in (0..v.len()).filter(|i| i & b == 0) {
                let (p, q) = (v[i], v[i | b]);
                v[i] = p * co + q * mis;
                v[i | b] = p * mis + q * co;
            }
        }
        GateKind::Rz => {
            let b = bit(g.targets[0], nq);
            let (lo, hi) = (c((x / 2.0).cos(), -(x / 2.0).sin()), c((x / 2.0).cos(), (x / 2.0).sin()));
            for (i, a) in v.iter_mut().enumerate() {
                *a *= if i & b == 0 { lo } else { hi };
            }
        }
        GateKind::Rzz => {
            let (b1, b2) = (bit(g.targets[0], nq), bit(g.targets[1], nq));
            let (even, odd) = (c((x / 2.0).cos(), -(x / 2.0).sin()), c((x / 2.0).cos(), (x / 2.0).sin()));
            for (i, a) in v.iter_mut().enumerate() {
                let parity = ((i & b1 != 0) as u8) ^ ((i & b2 != 0) as u8);
                *a *= if parity == 0 { even } else { odd };
            }
        }
    }
}

pub fn circuit_unitary(circuit: &Circuit, params: &[f64]) -> Result<ComplexMatrix> {
    circuit.unitary(params)
}

fn push_layer(circuit: &mut Circuit, kind: GateKind) -> Result<()> {
    for q in 0..circuit.qubit_count {
        circuit.push_free(kind, &[q])?;
    }
    Ok(())
}

/// Adjacent transpositions (0-based positions) of the bubble-sort reduced word
/// for the reversal of `m` strands.
pub fn reversal_word(m: usize) -> Vec<usize> {
    let mut word = Vec::with_capacity(m * m.saturating_sub(1) / 2);
    for pass in 0..m.saturating_sub(1) {
        for j in 0..m - 1 - pass {
            word.push(j);
        }
    }
    word
}

/// Encoder ansatz: R_Z layer, the M_u crossing block, R_Z layer.
///
/// Strands 2i, 2i+1 (0-based) belong to qubit i. A crossing inside a qubit's
/// pair compiles to R_X on that qubit; a crossing between neighbouring pairs
/// compiles to R_ZZ on the two qubits.
pub fn build_u_e(n: usize) -> Result<Circuit> {
    if n < 2 {
        return Err(Error::InvalidArgument(format!("encoder ansatz needs n ≥ 2, got {n}")));
    }
    let mut circuit = Circuit::new(n);
    push_layer(&mut circuit, GateKind::Rz)?;
    for pos in reversal_word(2 * n) {
        if pos % 2 == 0 {
            circuit.push_free(GateKind::Rx, &[pos / 2])?;
        } else {
            circuit.push_free(GateKind::Rzz, &[pos / 2, pos / 2 + 1])?;
        }
    }
    push_layer(&mut circuit, GateKind::Rz)?;
    Ok(circuit)
}

/// Recovery ansatz on `m` qubits with `blocks` entangling blocks.
pub fn build_u_r(m: usize, blocks: usize) -> Result<Circuit> {
    if m < 1 {
        return Err(Error::InvalidArgument("recovery ansatz needs at least one qubit".into()));
    }
    let mut circuit = Circuit::new(m);
    push_layer(&mut circuit, GateKind::Rz)?;
    for _ in 0..blocks {
        push_layer(&mut circuit, GateKind::Rx)?;
        push_layer(&mut circuit, GateKind::Rz)?;
        for a in 0..m {
            for b in a + 1..m {
                circuit.push_free(GateKind::Rzz, &[a, b])?;
            }
        }
    }
    push_layer(&mut circuit, GateKind::Rx)?;
    push_layer(&mut circuit, GateKind::Rz)?;
    Ok(circuit)
}

/// The five-qubit VGQEC encoding circuit with its ring angles as slots
/// α₁..α₅ (slot i ↔ αᵢ₊₁).
pub fn k5_circuit() -> Circuit {
    let mut circuit = Circuit::new(5);
    let gates = (1..5)
        .map(|t| Gate::cnot(0, t))
        .chain((0..5).map(Gate::h))
        .chain([
            Gate::rzz(0, 4, Angle::Slot(4)),
            Gate::rzz(0, 1, Angle::Slot(0)),
            Gate::rzz(1, 2, Angle::Slot(1)),
            Gate::rzz(2, 3, Angle::Slot(2)),
            Gate::rzz(3, 4, Angle::Slot(3)),
        ]);
    for g in gates {
        circuit.push(g).expect("static circuit");
    }
    circuit
}

/// U_E(α)·V for a base encoder V.
pub fn vgqec_encoder(base: &Encoder, u_e: &Circuit, alpha: &[f64]) -> Result<Encoder> {
    if u_e.qubit_count() != base.n() {
        return Err(Error::DimensionMismatch(format!(
            "{}-qubit ansatz on a {}-qubit code",
            u_e.qubit_count(),
            base.n()
        )));
    }
    let mut v = base.isometry().clone();
    u_e.apply(alpha, &mut v)?;
    Encoder::new(v, format!("vgqec({})", base.label()))
}

/// ρ ↦ R( Tr_anc[ U (ρ ⊗ |0…0⟩⟨0…0|) U† ] ) with 2k ancillas appended last.
pub fn vgqec_recovery(u_r: &Circuit, beta: &[f64], r_orig: &KrausChannel) -> Result<KrausChannel> {
    let (din, dout) = (r_orig.ops()[0].ncols(), r_orig.ops()[0].nrows());
    if !din.is_power_of_two() || !dout.is_power_of_two() {
        return Err(Error::DimensionMismatch(format!("recovery {din}→{dout} is not between qubit registers")));
    }
    let anc_dim = dout * dout;
    if u_r.dimension() != din * anc_dim {
        return Err(Error::DimensionMismatch(format!(
            "{}-qubit ansatz for a {din}→{dout} recovery (expected {} qubits)",
            u_r.qubit_count(),
            (din * anc_dim).trailing_zeros()
        )));
    }
    // Columns of U (I ⊗ |0…0⟩).
    let mut w = Mat::from_fn(din * anc_dim, din, |i, j| if i == j * anc_dim { c(1.0, 0.0) } else { ZERO });
    u_r.apply(beta, &mut w)?;
    let mut ops = Vec::with_capacity(r_orig.len() * anc_dim);
    for r in r_orig.ops() {
        for a in 0..anc_dim {
            let block = Mat::from_fn(din, din, |x, j| w[(x * anc_dim + a, j)]);
            ops.push(r * block);
        }
    }
    KrausChannel::new(ops)
}

#[cfg(test)]
mod tests;
