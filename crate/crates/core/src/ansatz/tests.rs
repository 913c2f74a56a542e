use super::*;
use crate::channels::{action_distance, apply, random_channel, Channel};
use crate::codes::{five_one_three_encoder, repetition_encoder, standard_decoder, Basis, DecoderSpec};
use crate::qcore::{self, frobenius_distance, from_real, identity, pauli, random, tensor_all};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// exp(−i x/2 P) = cos(x/2) I − i sin(x/2) P for an involutory P.
fn rotation(p: &ComplexMatrix, x: f64) -> ComplexMatrix {
    let d = p.nrows();
    qcore::scale_real(&identity(d), (x / 2.0).cos()) + qcore::scale(p, c(0.0, -(x / 2.0).sin()))
}

/// Explicit embedding of single-qubit `op` on qubit q.
fn embed(op: &ComplexMatrix, q: usize, n: usize) -> ComplexMatrix {
    let parts: Vec<ComplexMatrix> = (0..n).map(|i| if i == q { op.clone() } else { identity(2) }).collect();
    tensor_all(&parts)
}

fn cnot_matrix(control: usize, target: usize, n: usize) -> ComplexMatrix {
    let d = 1 << n;
    let (bc, bt) = (1 << (n - 1 - control), 1 << (n - 1 - target));
    Mat::from_fn(d, d, |i, j| {
        let image = if j & bc != 0 { j ^ bt } else { j };
        if i == image {
            c(1.0, 0.0)
        } else {
            ZERO
        }
    })
}

fn gate_oracle(g: &Gate, x: f64, n: usize) -> ComplexMatrix {
    match g.kind {
        GateKind::H => qcore::scale_real(&embed(&from_real(2, 2, &[1.0, 1.0, 1.0, -1.0]), g.targets[0], n), FRAC_1_SQRT_2),
        GateKind::Cnot => cnot_matrix(g.targets[0], g.targets[1], n),
        GateKind::Rx => rotation(&embed(&pauli('X').unwrap(), g.targets[0], n), x),
        GateKind::Rz => rotation(&embed(&pauli('Z').unwrap(), g.targets[0], n), x),
        GateKind::Rzz => {
            let z = pauli('Z').unwrap();
            rotation(&(embed(&z, g.targets[0], n) * embed(&z, g.targets[1], n)), x)
        }
    }
}

fn random_params(count: usize, rng: &mut ChaCha8Rng) -> Vec<f64> {
    (0..count).map(|_| rng.gen_range(0.0..std::f64::consts::TAU)).collect()
}

fn unitarity_defect(u: &ComplexMatrix) -> f64 {
    frobenius_distance(&(u.adjoint() * u), &identity(u.nrows()))
}

#[test]
fn empty_circuit_is_identity() {
    let u = Circuit::new(3).unitary(&[]).unwrap();
    assert!(frobenius_distance(&u, &identity(8)) == 0.0);
}

#[test]
fn single_rzz_is_diagonal_phase() {
    let mut circ = Circuit::new(2);
    circ.push_free(GateKind::Rzz, &[0, 1]).unwrap();
    let x = 0.77;
    let u = circ.unitary(&[x]).unwrap();
    let (m, p) = (c((x / 2.0).cos(), -(x / 2.0).sin()), c((x / 2.0).cos(), (x / 2.0).sin()));
    assert!(frobenius_distance(&u, &qcore::diag(&[m, p, p, m])) < 1e-15);
}

#[test]
fn each_gate_matches_explicit_matrix() {
    let gates = [
        Gate::h(1),
        Gate::cnot(2, 0),
        Gate::cnot(0, 1),
        Gate::rx(2, Angle::Fixed(0.4)),
        Gate::rz(0, Angle::Fixed(-1.1)),
        Gate::rzz(2, 0, Angle::Fixed(2.3)),
    ];
    for g in gates {
        let mut circ = Circuit::new(3);
        circ.push(g.clone()).unwrap();
        let x = g.resolved_angle(&[]);
        assert!(frobenius_distance(&circ.unitary(&[]).unwrap(), &gate_oracle(&g, x, 3)) < 1e-14, "{g:?}");
    }
}

#[test]
fn random_circuit_equals_explicit_product() {
    let mut rng = ChaCha8Rng::seed_from_u64(20);
    let kinds = [GateKind::H, GateKind::Cnot, GateKind::Rx, GateKind::Rz, GateKind::Rzz];
    for _ in 0..20 {
        let mut circ = Circuit::new(3);
        for _ in 0..3 {
            let kind = kinds[rng.gen_range(0..kinds.len())];
            let a = rng.gen_range(0..3);
            let b = (a + rng.gen_range(1..3)) % 3;
            let targets = if kind.arity() == 1 { vec![a] } else { vec![a, b] };
            if kind.is_rotation() {
                circ.push_free(kind, &targets).unwrap();
            } else {
                circ.push(Gate { kind, targets, angle: None }).unwrap();
            }
        }
        let theta = random_params(circ.parameter_count(), &mut rng);
        let mut oracle = identity(8);
        for g in circ.gates() {
            oracle = gate_oracle(g, g.resolved_angle(&theta), 3) * oracle;
        }
        assert!(frobenius_distance(&circ.unitary(&theta).unwrap(), &oracle) < 1e-13);
    }
}

#[test]
fn gate_validation() {
    let mut circ = Circuit::new(2);
    assert!(circ.push(Gate::cnot(1, 1)).is_err());
    assert!(circ.push(Gate::h(2)).is_err());
    assert!(circ.push(Gate { kind: GateKind::Rx, targets: vec![0], angle: None }).is_err());
    assert!(circ.push(Gate { kind: GateKind::H, targets: vec![0, 1], angle: None }).is_err());
    circ.push(Gate::rx(0, Angle::Slot(1))).unwrap();
    assert_eq!(circ.parameter_count(), 2);
    assert!(circ.validate().is_err());
    circ.push(Gate::rz(1, Angle::Slot(0))).unwrap();
    assert!(circ.validate().is_ok());
    assert!(matches!(circ.unitary(&[0.1]), Err(Error::DimensionMismatch(_))));
}

#[test]
fn reversal_word_is_reduced() {
    for m in 2..9 {
        let word = reversal_word(m);
        assert_eq!(word.len(), m * (m - 1) / 2);
        let mut strands: Vec<usize> = (0..m).collect();
        for &p in &word {
            strands.swap(p, p + 1);
        }
        assert_eq!(strands, (0..m).rev().collect::<Vec<_>>());
    }
}

#[test]
fn encoder_ansatz_slot_counts() {
    assert_eq!(build_u_e(5).unwrap().parameter_count(), 55);
    assert_eq!(build_u_e(3).unwrap().parameter_count(), 21);
    for n in 2..7 {
        let circ = build_u_e(n).unwrap();
        assert_eq!(circ.parameter_count(), n * (2 * n - 1) + 2 * n);
        assert_eq!(circ.gates().len(), circ.parameter_count());
        circ.validate().unwrap();
    }
    assert!(build_u_e(1).is_err());
}

#[test]
fn two_qubit_crossing_block_classification() {
    let circ = build_u_e(2).unwrap();
    let block = &circ.gates()[2..circ.gates().len() - 2];
    assert_eq!(block.len(), 6);
    // Count within-pair and between-pair crossings by tracking strand positions.
    let (mut within, mut between) = (0, 0);
    for p in reversal_word(4) {
        if p / 2 == (p + 1) / 2 {
            within += 1;
        } else {
            between += 1;
        }
    }
    assert_eq!(block.iter().filter(|g| g.kind == GateKind::Rx).count(), within);
    assert_eq!(block.iter().filter(|g| g.kind == GateKind::Rzz).count(), between);
    assert_eq!((within, between), (4, 2));
}

#[test]
fn recovery_ansatz_slot_counts() {
    assert_eq!(build_u_r(7, 3).unwrap().parameter_count(), 126);
    assert_eq!(build_u_r(3, 1).unwrap().parameter_count(), 18);
    assert_eq!(build_u_r(4, 0).unwrap().parameter_count(), 12);
    for (m, l) in [(1, 2), (3, 2), (5, 1)] {
        let circ = build_u_r(m, l).unwrap();
        assert_eq!(circ.parameter_count(), 3 * m + l * (2 * m + m * (m - 1) / 2));
        circ.validate().unwrap();
    }
    assert!(build_u_r(0, 1).is_err());
}

#[test]
fn zero_parameters_give_identity() {
    for circ in [build_u_e(3).unwrap(), build_u_r(4, 2).unwrap()] {
        let u = circ.unitary(&vec![0.0; circ.parameter_count()]).unwrap();
        assert!(frobenius_distance(&u, &identity(circ.dimension())) < 1e-15);
    }
}

#[test]
fn vgqec_encoder_cases() {
    let base = five_one_three_encoder();
    let u_e = build_u_e(5).unwrap();
    let same = vgqec_encoder(&base, &u_e, &vec![0.0; 55]).unwrap();
    assert!(frobenius_distance(same.isometry(), base.isometry()) < 1e-14);
    let mut rng = ChaCha8Rng::seed_from_u64(21);
    let moved = vgqec_encoder(&base, &u_e, &random_params(55, &mut rng)).unwrap();
    assert!(frobenius_distance(&moved.projector(), &base.projector()) > 0.1);
    assert!(vgqec_encoder(&base, &build_u_e(3).unwrap(), &[0.0; 21]).is_err());
}

#[test]
fn vgqec_recovery_at_zero_matches_original() {
    let r = standard_decoder(&DecoderSpec::Rep3Z).unwrap();
    let u_r = build_u_r(5, 1).unwrap();
    let wrapped = vgqec_recovery(&u_r, &vec![0.0; u_r.parameter_count()], &r).unwrap();
    assert_eq!((wrapped.dim_in(), wrapped.dim_out()), (8, 2));
    let mut rng = ChaCha8Rng::seed_from_u64(22);
    for _ in 0..20 {
        let rho = random::random_density(8, &mut rng);
        let a = apply(&wrapped, &rho).unwrap();
        let b = apply(&r, &rho).unwrap();
        assert!(frobenius_distance(a.matrix(), b.matrix()) <= 1e-12);
    }
    let beta = random_params(u_r.parameter_count(), &mut rng);
    let moved = vgqec_recovery(&u_r, &beta, &r).unwrap();
    assert!(moved.tp_deviation() <= 1e-10);
    assert!(action_distance(&moved, &r) > 1e-3);
}

#[test]
fn vgqec_recovery_matches_partial_trace_definition() {
    let mut rng = ChaCha8Rng::seed_from_u64(23);
    let r = random_channel(4, 2, 2, &mut rng);
    let u_r = build_u_r(4, 1).unwrap();
    let beta = random_params(u_r.parameter_count(), &mut rng);
    let u = u_r.unitary(&beta).unwrap();
    let rec = vgqec_recovery(&u_r, &beta, &r).unwrap();
    let anc0 = qcore::zeros(4, 4);
    let mut anc0 = anc0;
    anc0[(0, 0)] = c(1.0, 0.0);
    for _ in 0..5 {
        let rho = random::random_density(4, &mut rng);
        let big = &u * qcore::tensor(rho.matrix(), &anc0) * u.adjoint();
        let reduced = qcore::partial_trace(&big, &[4, 4], &[0]).unwrap();
        let expect = r.apply_operator(&reduced);
        assert!(frobenius_distance(&rec.apply_operator(rho.matrix()), &expect) < 1e-13);
    }
    assert!(vgqec_recovery(&build_u_r(3, 1).unwrap(), &[0.0; 18], &r).is_err());
}

#[test]
fn k5_circuit_reaches_repetition_code_at_zero() {
    let mut v = Mat::from_fn(32, 2, |i, j| if i == 16 * j { c(1.0, 0.0) } else { ZERO });
    k5_circuit().apply(&[0.0; 5], &mut v).unwrap();
    let rep = repetition_encoder(5, Basis::X).unwrap();
    assert!(frobenius_distance(&v, rep.isometry()) < 1e-14);
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn builders_are_unitary(seed in any::<u64>(), n in 2usize..5, l in 0usize..3) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let ue = build_u_e(n).unwrap();
        let u = ue.unitary(&random_params(ue.parameter_count(), &mut rng)).unwrap();
        prop_assert!(unitarity_defect(&u) <= 1e-12);
        let ur = build_u_r(n + 1, l).unwrap();
        let u = ur.unitary(&random_params(ur.parameter_count(), &mut rng)).unwrap();
        prop_assert!(unitarity_defect(&u) <= 1e-12);
    }
}
