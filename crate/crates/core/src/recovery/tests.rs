use super::*;
use crate::channels::{
    amplitude_damping, bit_flip, channel_fidelity, compose, depolarizing, random_channel, tensor_channels,
    LayeredChannel,
};
use crate::codes::{
    five_one_three_encoder, repetition_encoder, standard_decoder, Basis, DecoderSpec,
};
use crate::qcore::{min_eigenvalue, partial_trace, pauli_on};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn bit_flips(p: f64) -> KrausChannel {
    tensor_channels(&[bit_flip(p).unwrap(), bit_flip(p).unwrap(), bit_flip(p).unwrap()]).unwrap()
}

/// F_C of R∘N∘E straight from Kraus operators.
fn pipeline_fidelity(r: &KrausChannel, noise: &KrausChannel, e: &Encoder) -> f64 {
    channel_fidelity(&compose(r, &compose(noise, &e.channel()).unwrap()).unwrap()).unwrap()
}

fn assert_feasible(choi: &ChoiMatrix) {
    assert!(min_eigenvalue(&choi.matrix).unwrap() >= -1e-8);
    let red = partial_trace(&choi.matrix, &[choi.dim_in, choi.dim_out], &[0]).unwrap();
    assert!(qcore::frobenius_distance(&red, &identity(choi.dim_in)) <= 1e-8);
}

#[test]
fn linear_form_of_identity_pre_channel() {
    let a = fidelity_linear_form(&KrausChannel::identity(2)).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(30);
    for _ in 0..20 {
        let r = random_channel(2, 2, rng.gen_range(1..5), &mut rng);
        let lin = trace_product(&kraus_to_choi(&r).matrix, &a).re;
        assert!((lin - channel_fidelity(&r).unwrap()).abs() <= 1e-12);
    }
}

#[test]
fn linear_form_matches_composition() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    let m = random_channel(2, 8, 3, &mut rng);
    let a = fidelity_linear_form(&m).unwrap();
    assert!(qcore::hermitian_deviation(&a) < 1e-15);
    assert!(min_eigenvalue(&a).unwrap() >= -1e-14);
    let r1 = random_channel(8, 2, 4, &mut rng);
    let r2 = random_channel(8, 2, 5, &mut rng);
    let f = |r: &KrausChannel| trace_product(&kraus_to_choi(r).matrix, &a).re;
    for r in [&r1, &r2] {
        assert!((f(r) - channel_fidelity(&compose(r, &m).unwrap()).unwrap()).abs() <= 1e-12);
    }
    // Convex mixture of recoveries.
    let mix = KrausChannel::new(
        r1.ops().iter().map(|k| qcore::scale_real(k, 0.3f64.sqrt()))
            .chain(r2.ops().iter().map(|k| qcore::scale_real(k, 0.7f64.sqrt())))
            .collect(),
    )
    .unwrap();
    assert!((f(&mix) - (0.3 * f(&r1) + 0.7 * f(&r2))).abs() <= 1e-12);
    assert!(fidelity_linear_form(&random_channel(8, 2, 4, &mut rng)).is_err());
}

#[test]
fn encoder_form_matches_composition() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let noise = random_channel(8, 8, 3, &mut rng);
    let r = random_channel(8, 2, 4, &mut rng);
    let a = encoder_linear_form(&r, &noise).unwrap();
    for _ in 0..5 {
        let e = random_channel(2, 8, 2, &mut rng);
        let direct = channel_fidelity(&compose(&r, &compose(&noise, &e).unwrap()).unwrap()).unwrap();
        assert!((trace_product(&kraus_to_choi(&e).matrix, &a).re - direct).abs() <= 1e-12);
    }
    let layered = LayeredChannel::amplitude_damping(0.3, 3).unwrap();
    let a_layered = encoder_linear_form(&r, &layered).unwrap();
    let a_kraus = encoder_linear_form(&r, &layered.to_kraus().unwrap()).unwrap();
    assert!(qcore::frobenius_distance(&a_layered, &a_kraus) < 1e-13);
}

#[test]
fn identity_noise_is_perfectly_recoverable() {
    let e = repetition_encoder(3, Basis::Z).unwrap();
    let res = optimal_recovery(&e, &KrausChannel::identity(8), &SdpOptions::default()).unwrap();
    assert!((res.fidelity - 1.0).abs() <= 1e-8);
    assert_feasible(&res.choi);
}

#[test]
fn bit_flip_repetition_optimum() {
    let p: f64 = 0.1;
    let e = repetition_encoder(3, Basis::Z).unwrap();
    let noise = bit_flips(p);
    let res = optimal_recovery(&e, &noise, &SdpOptions::default()).unwrap();
    let closed = 1.0 - 3.0 * p * p + 2.0 * p.powi(3);
    assert!((res.fidelity - closed).abs() <= 1e-4);
    assert!((res.fidelity - 0.972).abs() <= 1e-4);
    assert!(res.residuals.gap <= 1e-9);
    assert_feasible(&res.choi);
    let recomputed = pipeline_fidelity(&res.recovery, &noise, &e);
    assert!((recomputed - res.fidelity).abs() <= 1e-8);
    assert!(res.recovery.tp_deviation() <= 1e-8);
}

#[test]
fn kl_correctable_noise_reaches_unit_fidelity() {
    // Single-qubit depolarizing on qubit 3 of the five-qubit code: Kraus
    // operators lie in the span of the weight-1 Paulis.
    let e = five_one_three_encoder();
    let local = depolarizing(0.6).unwrap();
    let noise = KrausChannel::new(local.ops().iter().map(|k| {
        let mut m = identity(32);
        qcore::apply_local(k, &[2], 5, &mut m);
        m
    }).collect()).unwrap();
    let res = optimal_recovery(&e, &noise, &SdpOptions::default()).unwrap();
    assert!(res.fidelity >= 1.0 - 1e-6);
    // Mixture of single bit flips on the repetition code.
    let rep = repetition_encoder(3, Basis::Z).unwrap();
    let flips = KrausChannel::new(
        DecoderSpec::Rep3Z.corrections().iter().map(|k| qcore::scale_real(k, 0.5)).collect(),
    )
    .unwrap();
    let res = optimal_recovery(&rep, &flips, &SdpOptions::default()).unwrap();
    assert!(res.fidelity >= 1.0 - 1e-6);
}

#[test]
fn sdp_dominates_constructed_recoveries() {
    let mut rng = ChaCha8Rng::seed_from_u64(33);
    let e = repetition_encoder(3, Basis::Z).unwrap();
    let dec = standard_decoder(&DecoderSpec::Rep3Z).unwrap();
    for _ in 0..4 {
        let noise = random_channel(8, 8, 2, &mut rng);
        let res = optimal_recovery(&e, &noise, &SdpOptions::default()).unwrap();
        let petz = petz_recovery(&e, &noise).unwrap();
        let f_petz = pipeline_fidelity(&petz, &noise, &e);
        assert!(f_petz >= 0.0);
        assert!(res.fidelity >= f_petz - 1e-6);
        assert!(res.fidelity >= pipeline_fidelity(&dec, &noise, &e) - 1e-6);
        assert!(res.fidelity <= res.fidelity + res.residuals.gap);
    }
}

#[test]
fn petz_cases() {
    let e = repetition_encoder(3, Basis::Z).unwrap();
    let id = petz_recovery(&e, &KrausChannel::identity(8)).unwrap();
    assert!(id.tp_deviation() <= 1e-10);
    assert!((pipeline_fidelity(&id, &KrausChannel::identity(8), &e) - 1.0).abs() < 1e-12);
    let flips = KrausChannel::new(
        DecoderSpec::Rep3Z.corrections().iter().map(|k| qcore::scale_real(k, 0.5)).collect(),
    )
    .unwrap();
    let petz = petz_recovery(&e, &flips).unwrap();
    assert!(pipeline_fidelity(&petz, &flips, &e) >= 1.0 - 1e-8);
    let ad = LayeredChannel::amplitude_damping(0.2, 3).unwrap();
    let ad_kraus = ad.to_kraus().unwrap();
    let petz = petz_recovery(&e, &ad).unwrap();
    assert!(petz.tp_deviation() <= 1e-10);
    let opt = optimal_recovery(&e, &ad, &SdpOptions::default()).unwrap();
    assert!(pipeline_fidelity(&petz, &ad_kraus, &e) <= opt.fidelity + 1e-6);
}

#[test]
fn certificate_brackets_the_optimum() {
    let e = repetition_encoder(3, Basis::Z).unwrap();
    let a = linear_form_from_choi(&kraus_to_choi(&e.channel()).then(&LayeredChannel::amplitude_damping(0.3, 3).unwrap()));
    let sol = solve_fidelity_sdp(&a, 8, 2, &SdpOptions::default(), None).unwrap();
    assert!(sol.converged);
    assert!(sol.upper_bound >= sol.objective);
    assert!(sol.upper_bound - sol.objective <= 1e-9);
    // Warm start from the solution converges at the first certificate round.
    let again = solve_fidelity_sdp(&a, 8, 2, &SdpOptions::default(), Some(&sol.state)).unwrap();
    assert!(again.iterations <= sol.iterations);
    assert!((again.objective - sol.objective).abs() <= 2e-9);
}

#[test]
fn non_convergence_is_reported() {
    let e = five_one_three_encoder();
    let opts = SdpOptions { max_iterations: 3, ..SdpOptions::default() };
    let err = optimal_recovery(&e, &LayeredChannel::interpolation_noise(0.5).unwrap(), &opts).unwrap_err();
    assert!(matches!(err, Error::NonConvergence { iterations: 3, .. }));
    let bad = SdpOptions { dual_tol: 0.0, ..SdpOptions::default() };
    assert!(bad.validate().is_err());
}

#[test]
fn biconvex_is_monotone_and_beats_fixed_code() {
    let noise = LayeredChannel::amplitude_damping(0.1, 3).unwrap();
    let opts = SdpOptions { max_iterations: 20_000, primal_tol: 1e-9, dual_tol: 1e-9, penalty: 1.0 };
    let res = iterated_biconvex(&noise, None, 7, 4, 30, &opts).unwrap();
    for w in res.trace.windows(2) {
        assert!(w[1] >= w[0] - 1e-9);
    }
    let rep = optimal_recovery(&repetition_encoder(3, Basis::Z).unwrap(), &noise, &SdpOptions::default()).unwrap();
    assert!(res.fidelity >= rep.fidelity - 1e-6, "{} vs {}", res.fidelity, rep.fidelity);
    assert_feasible(&res.encoder);
    let again = iterated_biconvex(&noise, None, 7, 4, 30, &opts).unwrap();
    assert_eq!(again.restart_fidelities, res.restart_fidelities);
}

#[test]
fn biconvex_start_code_seeds_restart_zero() {
    let noise = LayeredChannel::amplitude_damping(0.2, 3).unwrap();
    let rep = repetition_encoder(3, Basis::Z).unwrap();
    let opts = SdpOptions { max_iterations: 20_000, primal_tol: 1e-9, dual_tol: 1e-9, penalty: 1.0 };
    let fixed = optimal_recovery(&rep, &noise, &opts).unwrap();
    let res = iterated_biconvex(&noise, Some(&rep), 3, 1, 1, &opts).unwrap();
    assert!((res.trace[0] - fixed.fidelity).abs() <= 1e-6, "{} vs {}", res.trace[0], fixed.fidelity);
    assert!(res.fidelity >= fixed.fidelity - 1e-9);
    let five = five_one_three_encoder();
    assert!(iterated_biconvex(&noise, Some(&five), 3, 1, 1, &opts).is_err());
}

#[test]
fn biconvex_identity_noise() {
    let res = iterated_biconvex(&KrausChannel::identity(4), None, 1, 2, 3, &SdpOptions::default()).unwrap();
    assert!((res.fidelity - 1.0).abs() <= 1e-8);
    assert!(iterated_biconvex(&KrausChannel::identity(4), None, 1, 0, 3, &SdpOptions::default()).is_err());
}

#[test]
fn optimal_recovery_for_amplitude_damped_codes() {
    // Pauli noise sanity: a Z error on a Z-basis repetition code is uncorrectable.
    let e = repetition_encoder(3, Basis::Z).unwrap();
    let z = KrausChannel::new(vec![pauli_on(3, &[(0, 'Z')]).unwrap()]).unwrap();
    let res = optimal_recovery(&e, &z, &SdpOptions::default()).unwrap();
    assert!((res.fidelity - 1.0).abs() < 1e-8, "a unitary error is undone by its inverse");
    let ad = amplitude_damping(0.2).unwrap();
    let single = optimal_recovery(&Encoder::new(identity(2), "bare").unwrap(), &ad, &SdpOptions::default()).unwrap();
    assert!(single.fidelity >= channel_fidelity(&ad).unwrap() - 1e-9);
}
