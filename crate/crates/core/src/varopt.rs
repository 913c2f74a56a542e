//! Variational objectives, derivative-free optimizers and the two training
//! protocols: the K₅ family under optimal recovery, and the full
//! encoder/recovery ansatz under the 2-design average fidelity.
//!
//! All optimizers maximize. Parameters live on angles, so restarts draw
//! uniformly from [0, 2π) and restart 0 always starts at the zero vector,
//! which reproduces the untrained base code.

use std::f64::consts::{PI, TAU};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ansatz::{vgqec_encoder, vgqec_recovery, Circuit};
use crate::channels::{choi_to_kraus, kraus_to_choi, Channel, KrausChannel};
use crate::codes::{vgqec_k5_encoder, Encoder};
use crate::qcore::{c, random, PureState};
use crate::recovery::{linear_form_from_choi, optimal_recovery_fidelity, SdpOptions};
use crate::{ComplexMatrix, Error, Result};

/// The four single-qubit states of the tetrahedral (SIC) 2-design.
pub fn two_design_states() -> [PureState; 4] {
    let (a, b) = ((1.0f64 / 3.0).sqrt(), (2.0f64 / 3.0).sqrt());
    let tilted = |phase: f64| {
        PureState::new(vec![c(a, 0.0), c(b * phase.cos(), b * phase.sin())]).expect("normalized by construction")
    };
    [PureState::basis(1, 0), tilted(0.0), tilted(2.0 * PI / 3.0), tilted(4.0 * PI / 3.0)]
}

fn check_single_qubit(ch: &KrausChannel) -> Result<()> {
    let op = &ch.ops()[0];
    if op.nrows() != 2 || op.ncols() != 2 {
        return Err(Error::DimensionMismatch(format!("expected a single-qubit channel, got {}→{}", op.ncols(), op.nrows())));
    }
    Ok(())
}

/// ⟨ψ|N(|ψ⟩⟨ψ|)|ψ⟩ for each 2-design state.
fn survival_probabilities(ch: &KrausChannel) -> [f64; 4] {
    two_design_states().map(|psi| ch.ops().iter().map(|k| psi.expectation(k).norm_sqr()).sum())
}

/// Mean survival probability over the 2-design; equals (2·F_C + 1)/3.
pub fn avg_fidelity_2design(ch: &KrausChannel) -> Result<f64> {
    check_single_qubit(ch)?;
    Ok(survival_probabilities(ch).iter().sum::<f64>() / 4.0)
}

/// Shot-based estimate: each shot prepares a uniformly chosen 2-design
/// state and records whether it survives.
pub fn shot_estimator(ch: &KrausChannel, shots: usize, seed: u64) -> Result<f64> {
    check_single_qubit(ch)?;
    if shots == 0 {
        return Err(Error::InvalidArgument("shot count must be positive".into()));
    }
    let probs = survival_probabilities(ch);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let hits = (0..shots)
        .filter(|_| {
            let p = probs[rng.gen_range(0..4)];
            rng.gen::<f64>() < p
        })
        .count();
    Ok(hits as f64 / shots as f64)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimizerKind {
    #[serde(rename = "NelderMead", alias = "nelder_mead")]
    NelderMead,
    #[serde(rename = "SPSA", alias = "spsa")]
    Spsa,
    #[serde(rename = "LBFGS_FD", alias = "lbfgs_fd")]
    LbfgsFd,
}

/// Missing keys take the [`Default`] values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub restarts: usize,
    /// Objective evaluations allowed per restart.
    pub max_evals: usize,
    pub seed: u64,
    /// Convergence threshold: simplex spread for Nelder–Mead, step length for
    /// SPSA, gradient norm for L-BFGS.
    pub tolerance: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self { kind: OptimizerKind::LbfgsFd, restarts: 1, max_evals: 2000, seed: 0, tolerance: 1e-8 }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.restarts == 0 {
            return Err(Error::InvalidArgument("optimizer needs at least one restart".into()));
        }
        if self.max_evals == 0 {
            return Err(Error::InvalidArgument("max_evals must be positive".into()));
        }
        if !(self.tolerance > 0.0 && self.tolerance.is_finite()) {
            return Err(Error::OutOfRange { name: "tolerance", value: self.tolerance });
        }
        Ok(())
    }
}

/// Best point seen by an optimizer run.
#[derive(Debug, Clone, PartialEq)]
pub struct Optimum {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    /// The evaluation budget ran out before the convergence test passed.
    pub exhausted: bool,
}

/// Counts evaluations against the budget and keeps the incumbent.
struct Budget<F> {
    f: F,
    used: usize,
    max: usize,
    best: Option<(Vec<f64>, f64)>,
}

impl<F: FnMut(&[f64]) -> f64> Budget<F> {
    fn new(f: F, max: usize) -> Self {
        Self { f, used: 0, max, best: None }
    }

    fn remaining(&self) -> usize {
        self.max - self.used
    }

    /// −f(x), or `None` once the budget is spent.
    fn cost(&mut self, x: &[f64]) -> Option<f64> {
        if self.used >= self.max {
            return None;
        }
        self.used += 1;
        let v = (self.f)(x);
        let v = if v.is_nan() { f64::NEG_INFINITY } else { v };
        if self.best.as_ref().map_or(true, |(_, b)| v > *b) {
            self.best = Some((x.to_vec(), v));
        }
        Some(-v)
    }

    fn finish(self, exhausted: bool) -> Optimum {
        let (x, value) = self.best.expect("at least one evaluation");
        Optimum { x, value, evaluations: self.used, exhausted }
    }
}

fn axpy(a: f64, x: &[f64], y: &[f64]) -> Vec<f64> {
    x.iter().zip(y).map(|(xi, yi)| a * xi + yi).collect()
}

fn dot(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| a * b).sum()
}

/// Nelder–Mead with reflection 1, expansion 2, contraction 0.5, shrink 0.5
/// and an initial simplex step of 0.25 per coordinate.
pub fn nelder_mead(f: impl FnMut(&[f64]) -> f64, x0: &[f64], cfg: &OptimizerConfig) -> Optimum {
    let n = x0.len();
    let mut budget = Budget::new(f, cfg.max_evals);
    let Some(h0) = budget.cost(x0) else { unreachable!("max_evals is positive") };
    let mut simplex: Vec<(Vec<f64>, f64)> = vec![(x0.to_vec(), h0)];
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += 0.25;
        let Some(h) = budget.cost(&x) else { return budget.finish(true) };
        simplex.push((x, h));
    }
    if n == 0 {
        return budget.finish(false);
    }
    loop {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let spread = simplex[n].1 - simplex[0].1;
        let size = simplex[1..]
            .iter()
            .flat_map(|(x, _)| x.iter().zip(&simplex[0].0).map(|(a, b)| (a - b).abs()))
            .fold(0.0, f64::max);
        if spread <= cfg.tolerance && size <= cfg.tolerance {
            return budget.finish(false);
        }
        let centroid: Vec<f64> =
            (0..n).map(|i| simplex[..n].iter().map(|(x, _)| x[i]).sum::<f64>() / n as f64).collect();
        let worst = simplex[n].clone();
        let toward = |coef: f64| -> Vec<f64> {
            centroid.iter().zip(&worst.0).map(|(c, w)| c + coef * (c - w)).collect()
        };
        let xr = toward(1.0);
        let Some(hr) = budget.cost(&xr) else { return budget.finish(true) };
        if hr < simplex[0].1 {
            let xe = toward(2.0);
            let Some(he) = budget.cost(&xe) else { return budget.finish(true) };
            simplex[n] = if he < hr { (xe, he) } else { (xr, hr) };
            continue;
        }
        if hr < simplex[n - 1].1 {
            simplex[n] = (xr, hr);
            continue;
        }
        let (xc, limit) = if hr < worst.1 { (toward(0.5), hr) } else { (toward(-0.5), worst.1) };
        let Some(hc) = budget.cost(&xc) else { return budget.finish(true) };
        if hc < limit || (hr < worst.1 && hc <= limit) {
            simplex[n] = (xc, hc);
            continue;
        }
        let best = simplex[0].0.clone();
        for vertex in simplex.iter_mut().skip(1) {
            let x: Vec<f64> = vertex.0.iter().zip(&best).map(|(v, b)| b + 0.5 * (v - b)).collect();
            let Some(h) = budget.cost(&x) else { return budget.finish(true) };
            *vertex = (x, h);
        }
    }
}

/// Simultaneous-perturbation stochastic approximation with gains
/// a_k = a/(k + A)^0.602 and c_k = c/k^0.101, a = 0.2, c = 0.1, A = max_evals/10.
pub fn spsa(f: impl FnMut(&[f64]) -> f64, x0: &[f64], cfg: &OptimizerConfig) -> Optimum {
    let (a, c0, big_a) = (0.2, 0.1, 0.1 * cfg.max_evals as f64);
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut budget = Budget::new(f, cfg.max_evals);
    let mut x = x0.to_vec();
    let mut k = 1usize;
    let mut converged = false;
    // Two evaluations per step, one reserved for the final iterate.
    while budget.remaining() >= 3 {
        let ak = a / (k as f64 + big_a).powf(0.602);
        let ck = c0 / (k as f64).powf(0.101);
        let delta: Vec<f64> = (0..x.len()).map(|_| if rng.gen::<bool>() { 1.0 } else { -1.0 }).collect();
        let plus = axpy(ck, &delta, &x);
        let minus = axpy(-ck, &delta, &x);
        let hp = budget.cost(&plus).expect("budget checked");
        let hm = budget.cost(&minus).expect("budget checked");
        let diff = (hp - hm) / (2.0 * ck);
        let mut step = 0.0f64;
        if diff.is_finite() {
            for (xi, di) in x.iter_mut().zip(&delta) {
                let s = ak * diff / di;
                *xi -= s;
                step = step.max(s.abs());
            }
        }
        k += 1;
        if step <= cfg.tolerance {
            converged = true;
            break;
        }
    }
    budget.cost(&x);
    budget.finish(!converged)
}

const FD_STEP: f64 = 1e-6;
const LBFGS_MEMORY: usize = 10;

/// Central-difference gradient of the cost; `None` when the budget is short.
fn fd_gradient<F: FnMut(&[f64]) -> f64>(budget: &mut Budget<F>, x: &[f64]) -> Option<Vec<f64>> {
    if budget.remaining() < 2 * x.len() {
        return None;
    }
    let mut probe = x.to_vec();
    let mut g = Vec::with_capacity(x.len());
    for i in 0..x.len() {
        probe[i] = x[i] + FD_STEP;
        let hp = budget.cost(&probe)?;
        probe[i] = x[i] - FD_STEP;
        let hm = budget.cost(&probe)?;
        probe[i] = x[i];
        g.push((hp - hm) / (2.0 * FD_STEP));
    }
    Some(g)
}

/// L-BFGS on central-difference gradients (step 1e−6) with Armijo
/// backtracking.
pub fn lbfgs_fd(f: impl FnMut(&[f64]) -> f64, x0: &[f64], cfg: &OptimizerConfig) -> Optimum {
    let mut budget = Budget::new(f, cfg.max_evals);
    let mut x = x0.to_vec();
    let Some(mut hx) = budget.cost(&x) else { unreachable!("max_evals is positive") };
    let Some(mut g) = fd_gradient(&mut budget, &x) else { return budget.finish(true) };
    let mut history: Vec<(Vec<f64>, Vec<f64>, f64)> = Vec::new();
    loop {
        let gnorm = g.iter().fold(0.0f64, |m, v| m.max(v.abs()));
        if !gnorm.is_finite() || gnorm <= cfg.tolerance {
            return budget.finish(false);
        }
        // Two-loop recursion for d = −H g.
        let mut q = g.clone();
        let mut alphas = Vec::with_capacity(history.len());
        for (s, y, rho) in history.iter().rev() {
            let alpha = rho * dot(s, &q);
            q = axpy(-alpha, y, &q);
            alphas.push(alpha);
        }
        let gamma = history.last().map_or(1.0 / gnorm.max(1.0), |(s, y, _)| dot(s, y) / dot(y, y));
        let mut r: Vec<f64> = q.iter().map(|v| v * gamma).collect();
        for ((s, y, rho), alpha) in history.iter().zip(alphas.iter().rev()) {
            let beta = rho * dot(y, &r);
            r = axpy(alpha - beta, s, &r);
        }
        let mut d: Vec<f64> = r.iter().map(|v| -v).collect();
        let mut slope = dot(&g, &d);
        if slope >= 0.0 {
            history.clear();
            d = g.iter().map(|v| -v / gnorm.max(1.0)).collect();
            slope = dot(&g, &d);
        }
        let mut step = 1.0;
        let accepted = loop {
            let trial = axpy(step, &d, &x);
            let Some(ht) = budget.cost(&trial) else { return budget.finish(true) };
            if ht <= hx + 1e-4 * step * slope {
                break Some((trial, ht));
            }
            step *= 0.5;
            if step < 1e-12 {
                break None;
            }
        };
        let Some((x_new, h_new)) = accepted else { return budget.finish(false) };
        let Some(g_new) = fd_gradient(&mut budget, &x_new) else { return budget.finish(true) };
        let s: Vec<f64> = x_new.iter().zip(&x).map(|(a, b)| a - b).collect();
        let y: Vec<f64> = g_new.iter().zip(&g).map(|(a, b)| a - b).collect();
        let sy = dot(&s, &y);
        if sy > 1e-12 {
            history.push((s, y, 1.0 / sy));
            if history.len() > LBFGS_MEMORY {
                history.remove(0);
            }
        }
        let improvement = hx - h_new;
        x = x_new;
        hx = h_new;
        g = g_new;
        if improvement <= cfg.tolerance * cfg.tolerance * hx.abs().max(1.0) {
            return budget.finish(false);
        }
    }
}

/// Runs the configured optimizer once.
pub fn optimize(f: impl FnMut(&[f64]) -> f64, x0: &[f64], cfg: &OptimizerConfig) -> Optimum {
    match cfg.kind {
        OptimizerKind::NelderMead => nelder_mead(f, x0, cfg),
        OptimizerKind::Spsa => spsa(f, x0, cfg),
        OptimizerKind::LbfgsFd => lbfgs_fd(f, x0, cfg),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainResult {
    pub best_params: Vec<f64>,
    pub best_fidelity: f64,
    pub restart_fidelities: Vec<f64>,
    /// Objective evaluations summed over restarts.
    pub evaluations: usize,
    /// Restarts that stopped on the evaluation budget.
    pub exhausted_restarts: usize,
}

/// Multistart maximization of a fallible objective. Restart 0 starts at the
/// origin, the others uniformly in [0, 2π)ⁿ from `restart_rng(seed, i)`.
pub fn multistart(objective: impl Fn(&[f64]) -> Result<f64> + Sync, dim: usize, cfg: &OptimizerConfig) -> Result<TrainResult> {
    multistart_with(|| &objective, dim, cfg)
}

/// [`multistart`] with a fresh objective per restart, for objectives that
/// carry state (such as a solver warm start) from one evaluation to the next.
pub fn multistart_with<F>(make: impl Fn() -> F + Sync, dim: usize, cfg: &OptimizerConfig) -> Result<TrainResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    cfg.validate()?;
    let runs: Vec<Optimum> = (0..cfg.restarts)
        .into_par_iter()
        .map(|i| {
            let mut rng = random::restart_rng(cfg.seed, i);
            let x0: Vec<f64> = if i == 0 { vec![0.0; dim] } else { (0..dim).map(|_| rng.gen_range(0.0..TAU)).collect() };
            let local = OptimizerConfig { seed: rng.gen(), ..*cfg };
            let mut objective = make();
            let mut failure = None;
            let run = optimize(
                |x| match objective(x) {
                    Ok(v) => v,
                    Err(e) => {
                        failure.get_or_insert(e);
                        f64::NEG_INFINITY
                    }
                },
                &x0,
                &local,
            );
            failure.map_or(Ok(run), Err)
        })
        .collect::<Result<_>>()?;
    let restart_fidelities: Vec<f64> = runs.iter().map(|r| r.value).collect();
    let best = (0..runs.len()).fold(0, |b, i| if restart_fidelities[i] > restart_fidelities[b] { i } else { b });
    Ok(TrainResult {
        best_params: runs[best].x.clone(),
        best_fidelity: restart_fidelities[best],
        evaluations: runs.iter().map(|r| r.evaluations).sum(),
        exhausted_restarts: runs.iter().filter(|r| r.exhausted).count(),
        restart_fidelities,
    })
}

/// Trains the five angles of the K₅ family against `noise`, scoring each
/// code by its optimal-recovery channel fidelity.
pub fn train_alpha_sdp(noise: &(impl Channel + Sync), cfg: &OptimizerConfig) -> Result<TrainResult> {
    if noise.dim_in() != 32 || noise.dim_out() != 32 {
        return Err(Error::DimensionMismatch(format!("K5 training needs 5-qubit noise, got {}→{}", noise.dim_in(), noise.dim_out())));
    }
    let opts = SdpOptions::training();
    multistart(
        |alpha| {
            let alpha: [f64; 5] = alpha.try_into().expect("five angles");
            Ok(optimal_recovery_fidelity(&vgqec_k5_encoder(&alpha), noise, &opts, None)?.0)
        },
        5,
        cfg,
    )
}

#[derive(Debug, Clone)]
pub struct FullTrainResult {
    pub result: TrainResult,
    /// U_E(α*)·E_c.
    pub encoder: Encoder,
    /// The recovery at β*, including ancillas and the original decoder.
    pub recovery: KrausChannel,
}

/// Σ_r vec(R_r)† A vec(R_r) = Tr[Choi(R) A] without forming Choi(R).
fn linear_form_value(a: &ComplexMatrix, recovery: &KrausChannel) -> f64 {
    let mut acc = 0.0;
    for k in recovery.ops() {
        let (dout, din) = (k.nrows(), k.ncols());
        let v: Vec<_> = (0..din * dout).map(|i| k[(i % dout, i / dout)]).collect();
        for (i, vi) in v.iter().enumerate() {
            let row: num_complex::Complex64 = v.iter().enumerate().map(|(j, vj)| a[(i, j)] * vj).sum();
            acc += (vi.conj() * row).re;
        }
    }
    acc
}

/// The 2-design average fidelity of R(β) ∘ N ∘ E(α), through the identity
/// F = (2·F_C + 1)/3.
pub fn full_objective(
    noise: &impl Channel,
    base: &Encoder,
    u_e: &Circuit,
    u_r: &Circuit,
    r_orig: &KrausChannel,
    params: &[f64],
) -> Result<f64> {
    let (alpha, beta) = params.split_at(u_e.parameter_count());
    let encoder = vgqec_encoder(base, u_e, alpha)?;
    let a = linear_form_from_choi(&kraus_to_choi(&encoder.channel()).then(noise));
    let recovery = vgqec_recovery(u_r, beta, r_orig)?;
    let d = base.logical_dim() as f64;
    Ok((d * linear_form_value(&a, &recovery) + 1.0) / (d + 1.0))
}

/// Trains encoder angles α (on U_E) and recovery angles β (on U_R) jointly.
pub fn train_full(
    noise: &(impl Channel + Sync),
    base: &Encoder,
    u_e: &Circuit,
    u_r: &Circuit,
    r_orig: &KrausChannel,
    cfg: &OptimizerConfig,
) -> Result<FullTrainResult> {
    if noise.dim_in() != base.physical_dim() || noise.dim_out() != base.physical_dim() {
        return Err(Error::DimensionMismatch(format!(
            "{}→{} noise on a {}-qubit code",
            noise.dim_in(),
            noise.dim_out(),
            base.n()
        )));
    }
    let dim = u_e.parameter_count() + u_r.parameter_count();
    let result = multistart(|p| full_objective(noise, base, u_e, u_r, r_orig, p), dim, cfg)?;
    let (alpha, beta) = result.best_params.split_at(u_e.parameter_count());
    let encoder = vgqec_encoder(base, u_e, alpha)?;
    let recovery = vgqec_recovery(u_r, beta, r_orig)?;
    Ok(FullTrainResult { result, encoder, recovery })
}

/// R ∘ N ∘ E as a Kraus channel on the logical space, built through Choi
/// matrices so layered noise is never expanded into Kraus form.
pub fn pipeline(recovery: &KrausChannel, noise: &impl Channel, encoder: &Encoder) -> Result<KrausChannel> {
    choi_to_kraus(&kraus_to_choi(&encoder.channel()).then(noise).then(recovery))
}
