//! Recovery maps: SDP-optimal recovery, Petz recovery and the alternating
//! encoder/recovery optimization.
//!
//! Channel fidelity of R∘M is linear in Choi(R): F = Tr[Choi(R)·A]. Maximizing
//! it over CPTP maps is the SDP
//!
//! ```text
//! maximize Tr[X A]  subject to  X ⪰ 0,  Tr_out X = I_in
//! ```
//!
//! solved here by Douglas–Rachford splitting between the PSD cone and the
//! affine set, with a dual certificate bounding the distance to the optimum.

use std::collections::VecDeque;

use faer::linalg::solvers::Solve;
use faer::Mat;
use rayon::prelude::*;

use crate::channels::{choi_to_kraus_unchecked, kraus_to_choi, Channel, ChoiMatrix, KrausChannel};
use crate::codes::Encoder;
use crate::qcore::{
    self, eig_of_hermitian_part, hermitian_part, identity, max_eigenvalue, random, trace_product, ComplexMatrix,
    ZERO,
};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpOptions {
    pub max_iterations: usize,
    /// Bound on ‖X − Y‖_F between the affine and PSD iterates.
    pub primal_tol: f64,
    /// Bound on the certified optimality gap, in fidelity units.
    pub dual_tol: f64,
    /// Multiplier on the Douglas–Rachford step, which is otherwise set from
    /// the input dimension and the current fidelity estimate.
    pub penalty: f64,
}

impl Default for SdpOptions {
    fn default() -> Self {
        Self { max_iterations: 100_000, primal_tol: 1e-9, dual_tol: 1e-9, penalty: 1.0 }
    }
}

impl SdpOptions {
    /// Looser settings for objective evaluations inside training loops.
    pub fn training() -> Self {
        Self { max_iterations: 5_000, primal_tol: 1e-7, dual_tol: 1e-7, penalty: 1.0 }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [("primal_tol", self.primal_tol), ("dual_tol", self.dual_tol), ("penalty", self.penalty)] {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::OutOfRange { name, value: v });
            }
        }
        if self.max_iterations == 0 {
            return Err(Error::InvalidArgument("max_iterations must be positive".into()));
        }
        Ok(())
    }
}

/// Splitting variable carried between related solves.
#[derive(Debug, Clone)]
pub struct SdpState {
    z: ComplexMatrix,
    penalty: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SdpResiduals {
    pub primal: f64,
    pub dual: f64,
    /// Dual bound minus achieved objective.
    pub gap: f64,
}

#[derive(Debug, Clone)]
pub struct SdpSolution {
    /// Feasible point: PSD with Tr_out = I up to rounding.
    pub choi: ChoiMatrix,
    pub objective: f64,
    pub upper_bound: f64,
    pub iterations: usize,
    pub residuals: SdpResiduals,
    pub converged: bool,
    pub state: SdpState,
}

fn partial_trace_out(m: &ComplexMatrix, din: usize, dout: usize) -> ComplexMatrix {
    Mat::from_fn(din, din, |a, b| (0..dout).map(|c| m[(a * dout + c, b * dout + c)]).sum())
}

/// m += s ⊗ I_dout · factor.
fn add_kron_identity(m: &mut ComplexMatrix, s: &ComplexMatrix, dout: usize, factor: f64) {
    for a in 0..s.nrows() {
        for b in 0..s.ncols() {
            let v = s[(a, b)] * factor;
            for c in 0..dout {
                m[(a * dout + c, b * dout + c)] += v;
            }
        }
    }
}

fn project_affine_in_place(y: &mut ComplexMatrix, din: usize, dout: usize) {
    let mut s = partial_trace_out(y, din, dout);
    s -= identity(din);
    add_kron_identity(y, &s, dout, -1.0 / dout as f64);
}

fn add_scaled(m: &mut ComplexMatrix, a: &ComplexMatrix, factor: f64) {
    for j in 0..m.ncols() {
        for (x, y) in m.col_as_slice_mut(j).iter_mut().zip(a.col_as_slice(j)) {
            *x += y * factor;
        }
    }
}

const ANDERSON_MEMORY: usize = 8;
const STEP_GAIN: f64 = 3.0;

fn real_dot(a: &ComplexMatrix, b: &ComplexMatrix) -> f64 {
    let mut acc = 0.0;
    for j in 0..a.ncols() {
        for (u, v) in a.col_as_slice(j).iter().zip(b.col_as_slice(j)) {
            acc += u.re * v.re + u.im * v.im;
        }
    }
    acc
}

/// Type-II Anderson acceleration of the fixed-point map z ↦ z + g(z).
struct Anderson {
    memory: usize,
    dz: VecDeque<ComplexMatrix>,
    dg: VecDeque<ComplexMatrix>,
    /// Gram matrix of `dg`, updated one row at a time.
    gram: VecDeque<VecDeque<f64>>,
    last: Option<(ComplexMatrix, ComplexMatrix)>,
}

impl Anderson {
    fn new(memory: usize) -> Self {
        Self { memory, dz: VecDeque::new(), dg: VecDeque::new(), gram: VecDeque::new(), last: None }
    }

    fn reset(&mut self) {
        self.dz.clear();
        self.dg.clear();
        self.gram.clear();
        self.last = None;
    }

    fn push(&mut self, dz: ComplexMatrix, dg: ComplexMatrix) {
        if self.dz.len() == self.memory {
            self.dz.pop_front();
            self.dg.pop_front();
            self.gram.pop_front();
            for row in &mut self.gram {
                row.pop_front();
            }
        }
        let dots: VecDeque<f64> = self.dg.iter().map(|d| real_dot(d, &dg)).collect();
        for (row, &x) in self.gram.iter_mut().zip(&dots) {
            row.push_back(x);
        }
        let mut own = dots;
        own.push_back(real_dot(&dg, &dg));
        self.gram.push_back(own);
        self.dz.push_back(dz);
        self.dg.push_back(dg);
    }

    fn next(&mut self, z: &ComplexMatrix, g: &ComplexMatrix) -> ComplexMatrix {
        if let Some((zp, gp)) = self.last.take() {
            self.push(z - zp, g - gp);
        }
        self.last = Some((z.clone(), g.clone()));
        let mut out = z + g;
        let m = self.dg.len();
        if m == 0 {
            return out;
        }
        let mut gram = Mat::<f64>::from_fn(m, m, |i, j| self.gram[i][j]);
        let reg = 1e-10 * (0..m).map(|i| gram[(i, i)]).fold(0.0, f64::max) + f64::MIN_POSITIVE;
        for i in 0..m {
            gram[(i, i)] += reg;
        }
        let rhs = Mat::<f64>::from_fn(m, 1, |i, _| real_dot(&self.dg[i], g));
        let gamma = gram.partial_piv_lu().solve(&rhs);
        if (0..m).any(|i| !gamma[(i, 0)].is_finite()) {
            self.reset();
            return out;
        }
        for i in 0..m {
            let c = gamma[(i, 0)];
            add_scaled(&mut out, &self.dz[i], -c);
            add_scaled(&mut out, &self.dg[i], -c);
        }
        out
    }
}

fn project_psd(w: &ComplexMatrix) -> Result<ComplexMatrix> {
    let eig = eig_of_hermitian_part(w)?;
    let pos: Vec<usize> = (0..eig.values.len()).filter(|&i| eig.values[i] > 0.0).collect();
    let b = Mat::from_fn(w.nrows(), pos.len(), |i, j| eig.vectors[(i, pos[j])] * eig.values[pos[j]].sqrt());
    Ok(&b * b.adjoint())
}

/// Congruence (S^{-1/2} ⊗ I) Y (S^{-1/2} ⊗ I) with S = Tr_out Y, which keeps Y
/// PSD and makes Tr_out exact.
fn polish(y: &ComplexMatrix, din: usize, dout: usize) -> Result<ComplexMatrix> {
    let mut y = hermitian_part(y);
    let mut s = partial_trace_out(&y, din, dout);
    let eig = eig_of_hermitian_part(&s)?;
    let floor = 1e-8;
    if eig.values[0] < floor {
        add_kron_identity(&mut y, &identity(din), dout, (floor - eig.values[0]) / dout as f64);
        s = partial_trace_out(&y, din, dout);
    }
    let inv_sqrt = eig_of_hermitian_part(&s)?.reconstruct_with(|x| 1.0 / x.sqrt());
    let big = qcore::tensor(&inv_sqrt, &identity(dout));
    Ok(hermitian_part(&(&big * y * &big)))
}

/// Dual certificate: the candidate Λ shifted until Λ ⊗ I ⪰ A. Returns Tr Λ.
fn dual_bound(a: &ComplexMatrix, lambda: &ComplexMatrix, din: usize, dout: usize) -> Result<f64> {
    let lambda = hermitian_part(lambda);
    let mut slack = a.clone();
    add_kron_identity(&mut slack, &lambda, dout, -1.0);
    let shift = max_eigenvalue(&slack)?.max(0.0);
    Ok(qcore::trace(&lambda).re + din as f64 * shift)
}

/// Maximizes Tr[X A] over Choi matrices of CPTP maps `dim_in → dim_out`.
///
/// Always returns a feasible point; `converged` reports whether the
/// certified gap and residuals met `opts` within the iteration budget.
pub fn solve_fidelity_sdp(
    a: &ComplexMatrix,
    dim_in: usize,
    dim_out: usize,
    opts: &SdpOptions,
    warm: Option<&SdpState>,
) -> Result<SdpSolution> {
    opts.validate()?;
    let n = dim_in * dim_out;
    if a.nrows() != n || a.ncols() != n {
        return Err(Error::DimensionMismatch(format!("{}x{} objective for a {dim_in}→{dim_out} map", a.nrows(), a.ncols())));
    }
    let a = hermitian_part(a);
    let scale = max_eigenvalue(&a)?.abs().max(qcore::frobenius(&a) / n as f64).max(f64::MIN_POSITIVE);
    let an = qcore::scale_real(&a, 1.0 / scale);

    // Step size in normalized units from an estimate of the attainable
    // fidelity; the best DR step grows like d_in / (1 − F).
    let step_for = |fidelity: f64| opts.penalty * STEP_GAIN * dim_in as f64 * scale / (1.0 - fidelity).max(1e-6);
    let (mut z, mut t) = match warm {
        Some(s) if s.z.nrows() == n => (s.z.clone(), s.penalty),
        _ => (qcore::scale_real(&identity(n), 1.0 / dim_out as f64), step_for(qcore::trace(&a).re / dim_out as f64)),
    };
    let mut y_prev = z.clone();
    let (mut r_p, mut r_d) = (f64::INFINITY, f64::INFINITY);
    let mut best: Option<(ComplexMatrix, f64)> = None;
    let mut best_bound = f64::INFINITY;
    let mut iterations = 0;
    let mut converged = false;
    let check_every = 10;
    let mut accel = Anderson::new(ANDERSON_MEMORY);
    // Plain DR point and residual norm at the last accepted iterate, used to
    // reject accelerated steps that increase the fixed-point residual.
    let mut fallback: Option<(ComplexMatrix, f64)> = None;
    let mut w = ComplexMatrix::zeros(n, n);

    while iterations < opts.max_iterations {
        iterations += 1;
        // x = Π_aff(z + t·A), w = 2x − z, y = Π_psd(w); the DR map is z + (y − x).
        let mut x = z.clone();
        add_scaled(&mut x, &an, t);
        project_affine_in_place(&mut x, dim_in, dim_out);
        for j in 0..n {
            for i in 0..n {
                w[(i, j)] = x[(i, j)] * 2.0 - z[(i, j)];
            }
        }
        let y = project_psd(&w)?;
        let g = &y - &x;
        r_p = qcore::frobenius(&g);
        r_d = qcore::frobenius_distance(&y, &y_prev) / t;
        y_prev = y;

        match fallback.take() {
            Some((plain, norm)) if r_p > norm => {
                z = plain;
                accel.reset();
                continue;
            }
            _ => {}
        }
        fallback = Some((&z + &g, r_p));
        z = accel.next(&z, &g);

        if iterations % check_every == 0 || iterations == opts.max_iterations {
            let xp = polish(&y_prev, dim_in, dim_out)?;
            let obj = trace_product(&xp, &an).re;
            let lambda = partial_trace_out(&(&an * &xp), dim_in, dim_out);
            best_bound = best_bound.min(dual_bound(&an, &lambda, dim_in, dim_out)?);
            if best.as_ref().map_or(true, |(_, o)| obj > *o) {
                best = Some((xp, obj));
            }
            let gap = (best_bound - best.as_ref().map_or(obj, |b| b.1)).max(0.0) * scale;
            if gap <= opts.dual_tol || (r_p <= opts.primal_tol && r_d * scale <= opts.dual_tol) {
                converged = true;
                break;
            }
            let target = step_for(best.as_ref().map_or(obj, |b| b.1) * scale);
            let ratio = target / t;
            if !(0.5..=2.0).contains(&ratio) {
                // Rescaling z about the affine point keeps the fixed point.
                let mut anchor = z.clone();
                add_scaled(&mut anchor, &an, t);
                project_affine_in_place(&mut anchor, dim_in, dim_out);
                for j in 0..n {
                    for i in 0..n {
                        z[(i, j)] = anchor[(i, j)] + (z[(i, j)] - anchor[(i, j)]) * ratio;
                    }
                }
                t = target;
                accel.reset();
                fallback = None;
            }
        }
    }

    let (choi, obj) = best.expect("at least one certificate round");
    let bound = best_bound.max(obj);
    let gap = (bound - obj) * scale;
    Ok(SdpSolution {
        choi: ChoiMatrix { matrix: choi, dim_in, dim_out },
        objective: obj * scale,
        upper_bound: bound * scale,
        iterations,
        residuals: SdpResiduals { primal: r_p, dual: r_d * scale, gap },
        converged,
        state: SdpState { z, penalty: t },
    })
}

/// A with F_C(R ∘ M) = Tr[Choi(R)·A], from the Choi matrix of M (`d → D`):
/// A[(a,c),(a',c')] = conj(C_M[(c,a),(c',a')]) / d².
pub fn linear_form_from_choi(choi: &ChoiMatrix) -> ComplexMatrix {
    let (d, big) = (choi.dim_in, choi.dim_out);
    let norm = 1.0 / (d * d) as f64;
    Mat::from_fn(big * d, big * d, |i, j| {
        let (a, c) = (i / d, i % d);
        let (a2, c2) = (j / d, j % d);
        choi.matrix[(c * big + a, c2 * big + a2)].conj() * norm
    })
}

/// Coefficient matrix of channel fidelity as a linear function of the recovery's Choi matrix.
pub fn fidelity_linear_form(pre_channel: &impl Channel) -> Result<ComplexMatrix> {
    if pre_channel.dim_in() > pre_channel.dim_out() {
        return Err(Error::DimensionMismatch(format!(
            "pre-recovery channel {}→{} must not shrink the space",
            pre_channel.dim_in(),
            pre_channel.dim_out()
        )));
    }
    Ok(linear_form_from_choi(&pre_channel.choi()))
}

/// A_enc with F_C(R ∘ N ∘ E) = Tr[Choi(E)·A_enc] for fixed R and N:
/// A_enc = (id ⊗ N†)(T)/d², T[(a,x),(a',x')] = Σ_r conj(R_r[a,x]) R_r[a',x'].
pub fn encoder_linear_form(recovery: &KrausChannel, noise: &impl Channel) -> Result<ComplexMatrix> {
    let (d, big) = (recovery.dim_out(), recovery.dim_in());
    if noise.dim_out() != big {
        return Err(Error::DimensionMismatch(format!("recovery input {big} vs noise output {}", noise.dim_out())));
    }
    let n = d * big;
    let mut t = qcore::zeros(n, n);
    for r in recovery.ops() {
        let v: Vec<_> = (0..n).map(|i| r[(i / big, i % big)]).collect();
        for j in 0..n {
            for i in 0..n {
                t[(i, j)] += v[i].conj() * v[j];
            }
        }
    }
    let pulled = noise.apply_adjoint_trailing(&t, d);
    Ok(qcore::scale_real(&pulled, 1.0 / (d * d) as f64))
}

#[derive(Debug, Clone)]
pub struct RecoveryResult {
    pub recovery: KrausChannel,
    pub fidelity: f64,
    pub iterations: usize,
    pub residuals: SdpResiduals,
    pub choi: ChoiMatrix,
}

fn encoded_noise_choi(encoder: &Encoder, noise: &impl Channel) -> Result<ChoiMatrix> {
    if noise.dim_in() != encoder.physical_dim() || noise.dim_out() != encoder.physical_dim() {
        return Err(Error::DimensionMismatch(format!(
            "noise {}→{} on a {}-qubit code",
            noise.dim_in(),
            noise.dim_out(),
            encoder.n()
        )));
    }
    Ok(kraus_to_choi(&encoder.channel()).then(noise))
}

/// Recovery maximizing F_C(R ∘ N ∘ E). Fails with `NonConvergence` if the
/// certificate does not reach the tolerances within the iteration budget.
pub fn optimal_recovery(encoder: &Encoder, noise: &impl Channel, opts: &SdpOptions) -> Result<RecoveryResult> {
    let a = linear_form_from_choi(&encoded_noise_choi(encoder, noise)?);
    let sol = solve_fidelity_sdp(&a, encoder.physical_dim(), encoder.logical_dim(), opts, None)?;
    if !sol.converged {
        return Err(Error::NonConvergence { iterations: sol.iterations, residual: sol.residuals.gap });
    }
    let recovery = choi_to_kraus_unchecked(&sol.choi)?;
    Ok(RecoveryResult {
        recovery,
        fidelity: sol.objective,
        iterations: sol.iterations,
        residuals: sol.residuals,
        choi: sol.choi,
    })
}

/// Achievable optimal-recovery fidelity for use as a training objective; the
/// value is always attained by a feasible recovery even when not converged.
pub fn optimal_recovery_fidelity(
    encoder: &Encoder,
    noise: &impl Channel,
    opts: &SdpOptions,
    warm: Option<&SdpState>,
) -> Result<(f64, SdpState)> {
    let a = linear_form_from_choi(&encoded_noise_choi(encoder, noise)?);
    let sol = solve_fidelity_sdp(&a, encoder.physical_dim(), encoder.logical_dim(), opts, warm)?;
    Ok((sol.objective, sol.state))
}

/// Kraus operators Σ_l |l⟩⟨q_{j+l}| mapping an orthonormal set onto the first
/// `width` basis states, `width` columns at a time.
pub(crate) fn completion_ops(basis: &ComplexMatrix, width: usize) -> Vec<ComplexMatrix> {
    let d = basis.nrows();
    (0..basis.ncols())
        .step_by(width)
        .map(|start| {
            let w = width.min(basis.ncols() - start);
            Mat::from_fn(width, d, |l, x| if l < w { basis[(x, start + l)].conj() } else { ZERO })
        })
        .collect()
}

/// Transpose channel of N with respect to the encoded maximally mixed state:
/// R_j = d^{-1/2} V† N_j† σ^{-1/2}, σ = N(VV†/d), completed on ker σ.
pub fn petz_recovery(encoder: &Encoder, noise: &impl Channel) -> Result<KrausChannel> {
    let v = encoder.isometry();
    let d = encoder.logical_dim() as f64;
    let rho_c = qcore::scale_real(&(v * v.adjoint()), 1.0 / d);
    let sigma = noise.apply_operator(&rho_c);
    let eig = eig_of_hermitian_part(&sigma)?;
    let cutoff = 1e-12;
    let inv_sqrt = eig.reconstruct_with(|x| if x > cutoff { 1.0 / x.sqrt() } else { 0.0 });
    let left = qcore::scale_real(&qcore::adjoint(v), d.sqrt().recip());
    let kraus = noise.to_kraus()?;
    let mut ops: Vec<ComplexMatrix> = kraus.ops().iter().map(|nj| &left * nj.adjoint() * &inv_sqrt).collect();
    let kernel: Vec<usize> = (0..eig.values.len()).filter(|&i| eig.values[i] <= cutoff).collect();
    let basis = Mat::from_fn(sigma.nrows(), kernel.len(), |i, j| eig.vectors[(i, kernel[j])]);
    ops.extend(completion_ops(&basis, encoder.logical_dim()));
    KrausChannel::new(ops)
}

#[derive(Debug, Clone)]
pub struct BiconvexResult {
    /// Choi matrix of the best encoding (2 → 2ⁿ).
    pub encoder: ChoiMatrix,
    pub recovery: KrausChannel,
    pub fidelity: f64,
    /// Fidelity after every half-step of the best restart.
    pub trace: Vec<f64>,
    pub restart_fidelities: Vec<f64>,
    /// Half-steps, over all restarts, that hit the iteration cap.
    pub unconverged_steps: usize,
}

struct BiconvexRun {
    encoder: ChoiMatrix,
    recovery: KrausChannel,
    trace: Vec<f64>,
    unconverged: usize,
}

fn biconvex_run(
    noise: &impl Channel,
    start: Option<&Encoder>,
    seed: u64,
    index: usize,
    iterations: usize,
    opts: &SdpOptions,
) -> Result<BiconvexRun> {
    let big = noise.dim_in();
    let v = match start {
        Some(e) if index == 0 => e.isometry().clone(),
        _ => random::real_isometry(big, 2, &mut random::restart_rng(seed, index)),
    };
    let mut encoder = kraus_to_choi(&KrausChannel::new(vec![v])?);
    let mut recovery: Option<KrausChannel> = None;
    let mut trace = Vec::with_capacity(2 * iterations);
    let mut incumbent = f64::NEG_INFINITY;
    let mut unconverged = 0;
    // Both half-steps start cold: the previous iterate is a poor warm start
    // once the other block has moved.
    for _ in 0..iterations {
        let a = linear_form_from_choi(&encoder.then(noise));
        let sol = solve_fidelity_sdp(&a, big, 2, opts, None)?;
        unconverged += usize::from(!sol.converged);
        if sol.objective >= incumbent || recovery.is_none() {
            incumbent = incumbent.max(sol.objective);
            recovery = Some(choi_to_kraus_unchecked(&sol.choi)?);
        }
        trace.push(incumbent);

        let r = recovery.as_ref().expect("set above");
        let a = encoder_linear_form(r, noise)?;
        let sol = solve_fidelity_sdp(&a, 2, big, opts, None)?;
        unconverged += usize::from(!sol.converged);
        if sol.objective >= incumbent {
            incumbent = sol.objective;
            encoder = sol.choi;
        }
        trace.push(incumbent);
    }
    Ok(BiconvexRun { encoder, recovery: recovery.ok_or(Error::Empty("biconvex iterations"))?, trace, unconverged })
}

/// Alternates recovery and encoder SDPs from random isometric encodings of one
/// logical qubit; returns the best restart. With `start`, restart 0 begins at
/// that code instead.
pub fn iterated_biconvex(
    noise: &(impl Channel + Sync),
    start: Option<&Encoder>,
    seed: u64,
    restarts: usize,
    iterations: usize,
    opts: &SdpOptions,
) -> Result<BiconvexResult> {
    if restarts == 0 || iterations == 0 {
        return Err(Error::InvalidArgument("biconvex needs at least one restart and one iteration".into()));
    }
    if let Some(e) = start {
        if e.physical_dim() != noise.dim_in() || e.logical_dim() != 2 {
            return Err(Error::DimensionMismatch(format!(
                "biconvex start code is {}→{}, noise acts on dimension {}",
                e.logical_dim(),
                e.physical_dim(),
                noise.dim_in()
            )));
        }
    }
    let runs: Vec<BiconvexRun> =
        (0..restarts).into_par_iter().map(|i| biconvex_run(noise, start, seed, i, iterations, opts)).collect::<Result<_>>()?;
    let restart_fidelities: Vec<f64> = runs.iter().map(|r| *r.trace.last().expect("non-empty")).collect();
    let unconverged_steps = runs.iter().map(|r| r.unconverged).sum();
    let best = (0..runs.len())
        .fold(0, |b, i| if restart_fidelities[i] > restart_fidelities[b] { i } else { b });
    let run = runs.into_iter().nth(best).expect("index in range");
    Ok(BiconvexResult {
        fidelity: restart_fidelities[best],
        encoder: run.encoder,
        recovery: run.recovery,
        trace: run.trace,
        restart_fidelities,
        unconverged_steps,
    })
}

#[cfg(test)]
mod tests;
