//! JSON-configured experiment sweeps with CSV output.
//!
//! An [`ExperimentConfig`] names an experiment kind, a parameter grid, the
//! codes to evaluate and the recovery modes. [`run`] evaluates every grid point
//! (in parallel) and returns a [`Report`] whose rows are sorted by
//! (param, code, recovery). Every channel fidelity in a row is recomputed from
//! the final encode–noise–recover pipeline.

use std::fmt::{self, Write as _};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::de::{self, Deserializer, MapAccess, SeqAccess, Visitor};
use serde::Deserialize;

use crate::ansatz::{build_u_e, build_u_r};
use crate::channels::{
    bit_flip, channel_fidelity, choi_to_kraus, depolarizing, Channel, KrausChannel, LayeredChannel,
};
use crate::codes::{
    discovered_three_qubit_encoder, five_one_three_encoder, kl_check, repetition_encoder, standard_decoder,
    vgqec_k5_encoder, weight_one_paulis, Basis, DecoderSpec, Encoder,
};
use crate::qcore::{frobenius_distance, identity};
use crate::recovery::{iterated_biconvex, optimal_recovery, petz_recovery, SdpOptions};
use crate::varopt::{avg_fidelity_2design, pipeline, train_alpha_sdp, train_full, OptimizerConfig, OptimizerKind};
use crate::{Error, Result};

mod output;
pub use output::{format_sig, kl_csv, sweep_csv, sweep_svg, CSV_HEADER, KL_HEADER};

/// IBMQ-LIMA T1 per qubit, μs.
pub const TABLE1_T1: [f64; 5] = [97.51, 127.61, 92.68, 79.36, 19.76];
/// IBMQ-LIMA T2 per qubit, μs.
pub const TABLE1_T2: [f64; 5] = [178.3, 109.28, 120.95, 35.71, 19.4];

/// Largest Kraus set the Petz construction and the KL check will expand.
const MAX_EXPANDED_KRAUS: usize = 4096;
/// Allowed gap between a claimed fidelity and the recomputed one.
const RECOMPUTE_TOL: f64 = 1e-8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ExperimentKind {
    Interpolation,
    AmplitudeDamping,
    Thermal,
    VerifyCode,
    KlCheck,
    OptimalRecovery,
}

impl fmt::Display for ExperimentKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Interpolation => "interpolation",
            Self::AmplitudeDamping => "amplitude_damping",
            Self::Thermal => "thermal",
            Self::VerifyCode => "verify_code",
            Self::KlCheck => "kl_check",
            Self::OptimalRecovery => "optimal_recovery",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RecoveryMode {
    Sdp,
    Petz,
    Standard,
    Variational,
}

impl fmt::Display for RecoveryMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Self::Sdp => "sdp",
            Self::Petz => "petz",
            Self::Standard => "standard",
            Self::Variational => "variational",
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    AmplitudeDamping,
    Thermal,
    Interpolation,
    BitFlip,
    Depolarizing,
}

/// Noise family; the grid value supplies γ, t (μs), η or p.
#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct NoiseConfig {
    pub model: NoiseModel,
    #[serde(default = "table1_t1")]
    pub t1: Vec<f64>,
    #[serde(default = "table1_t2")]
    pub t2: Vec<f64>,
    /// Interpolation constants.
    #[serde(default = "five_percent")]
    pub pauli_weight: f64,
    #[serde(default = "five_percent")]
    pub p_xx: f64,
    #[serde(default = "five_percent")]
    pub gamma: f64,
}

fn table1_t1() -> Vec<f64> {
    TABLE1_T1.to_vec()
}

fn table1_t2() -> Vec<f64> {
    TABLE1_T2.to_vec()
}

fn five_percent() -> f64 {
    0.05
}

impl NoiseConfig {
    pub fn new(model: NoiseModel) -> Self {
        Self { model, t1: table1_t1(), t2: table1_t2(), pauli_weight: 0.05, p_xx: 0.05, gamma: 0.05 }
    }

    /// The noise at grid value `param` on `n` qubits. Thermal noise uses the
    /// first `n` coherence-time pairs.
    pub fn build(&self, param: f64, n: usize) -> Result<LayeredChannel> {
        match self.model {
            NoiseModel::AmplitudeDamping => LayeredChannel::amplitude_damping(param, n),
            NoiseModel::Thermal => {
                if self.t1.len() < n || self.t2.len() < n {
                    return Err(Error::Config(format!(
                        "thermal noise on {n} qubits needs {n} t1/t2 values, got {}/{}",
                        self.t1.len(),
                        self.t2.len()
                    )));
                }
                LayeredChannel::thermal(param, &self.t1[..n], &self.t2[..n])
            }
            NoiseModel::Interpolation => {
                LayeredChannel::interpolation_noise_with(param, self.pauli_weight, self.p_xx, self.gamma, n)
            }
            NoiseModel::BitFlip => LayeredChannel::uniform(&bit_flip(param)?, n),
            NoiseModel::Depolarizing => LayeredChannel::uniform(&depolarizing(param)?, n),
        }
    }
}

/// A code label with optional parameters. In JSON either a bare label or an
/// object with a `label` key.
///
/// Labels: `rep3Z`, `rep5X`, `513`, `discovered3`, `k5` (needs `alpha`),
/// `unprotected` / `Q0`, `vgqec` (K₅ family trained under SDP recovery),
/// `vgqec3` / `vgqec5` (full ansatz on the repetition / [[5,1,3]] base code,
/// `blocks` recovery blocks), `biconvex` (`qubits`, `restarts`, `iterations`,
/// `start`).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CodeEntry {
    pub label: String,
    pub alpha: Option<Vec<f64>>,
    pub blocks: Option<usize>,
    pub restarts: Option<usize>,
    pub iterations: Option<usize>,
    pub qubits: Option<usize>,
    /// Fixed code that seeds restart 0 of `biconvex`.
    pub start: Option<String>,
}

impl CodeEntry {
    pub fn new(label: impl Into<String>) -> Self {
        Self { label: label.into(), ..Self::default() }
    }
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct CodeFields {
    label: String,
    alpha: Option<Vec<f64>>,
    blocks: Option<usize>,
    restarts: Option<usize>,
    iterations: Option<usize>,
    qubits: Option<usize>,
    start: Option<String>,
}

impl<'de> Deserialize<'de> for CodeEntry {
    fn deserialize<D: Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        struct EntryVisitor;
        impl<'de> Visitor<'de> for EntryVisitor {
            type Value = CodeEntry;

            fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str("a code label or an object with a `label` key")
            }

            fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<CodeEntry, E> {
                Ok(CodeEntry::new(s))
            }

            fn visit_map<A: MapAccess<'de>>(self, map: A) -> std::result::Result<CodeEntry, A::Error> {
                let f = CodeFields::deserialize(de::value::MapAccessDeserializer::new(map))?;
                Ok(CodeEntry {
                    label: f.label,
                    alpha: f.alpha,
                    blocks: f.blocks,
                    restarts: f.restarts,
                    iterations: f.iterations,
                    qubits: f.qubits,
                    start: f.start,
                })
            }
        }
        d.deserialize_any(EntryVisitor)
    }
}

/// Accepts `"sdp"` as well as `["sdp", "standard"]`.
fn one_or_many<'de, D: Deserializer<'de>>(d: D) -> std::result::Result<Vec<RecoveryMode>, D::Error> {
    struct ModesVisitor;
    impl<'de> Visitor<'de> for ModesVisitor {
        type Value = Vec<RecoveryMode>;

        fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
            f.write_str("a recovery mode or a list of them")
        }

        fn visit_str<E: de::Error>(self, s: &str) -> std::result::Result<Self::Value, E> {
            RecoveryMode::deserialize(de::value::StrDeserializer::new(s)).map(|m| vec![m])
        }

        fn visit_seq<A: SeqAccess<'de>>(self, seq: A) -> std::result::Result<Self::Value, A::Error> {
            Vec::deserialize(de::value::SeqAccessDeserializer::new(seq))
        }
    }
    d.deserialize_any(ModesVisitor)
}

#[derive(Debug, Clone, PartialEq, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentKind,
    pub grid: Vec<f64>,
    /// Empty selects the experiment's default code set.
    #[serde(default)]
    pub codes: Vec<CodeEntry>,
    /// Recovery modes for fixed codes; empty selects the experiment default.
    #[serde(default, deserialize_with = "one_or_many")]
    pub recovery: Vec<RecoveryMode>,
    #[serde(default)]
    pub optimizer: OptimizerConfig,
    #[serde(default)]
    pub noise: Option<NoiseConfig>,
    #[serde(default)]
    pub output: Option<PathBuf>,
    /// Overrides `optimizer.seed` when present.
    #[serde(default)]
    pub seed: Option<u64>,
}

const FIXED_CODES: [&str; 5] = ["rep3Z", "rep5X", "513", "discovered3", "k5"];
const SWEEP_CODES: [&str; 6] = ["unprotected", "Q0", "vgqec", "vgqec3", "vgqec5", "biconvex"];

impl ExperimentConfig {
    /// Desk-scale defaults for each experiment.
    pub fn desk(kind: ExperimentKind) -> Self {
        let base = Self {
            experiment: kind,
            grid: vec![0.0],
            codes: Vec::new(),
            recovery: Vec::new(),
            optimizer: OptimizerConfig { seed: 7, ..OptimizerConfig::default() },
            noise: None,
            output: None,
            seed: None,
        };
        let lbfgs = |restarts, max_evals| OptimizerConfig {
            kind: OptimizerKind::LbfgsFd,
            restarts,
            max_evals,
            seed: 7,
            tolerance: 1e-8,
        };
        match kind {
            ExperimentKind::Interpolation => Self {
                grid: vec![0.0, 0.2, 0.4, 0.6, 0.8, 1.0],
                optimizer: OptimizerConfig {
                    kind: OptimizerKind::NelderMead,
                    restarts: 5,
                    max_evals: 300,
                    seed: 7,
                    tolerance: 1e-6,
                },
                ..base
            },
            ExperimentKind::AmplitudeDamping => {
                Self { grid: vec![0.0, 0.1, 0.2, 0.3, 0.4], optimizer: lbfgs(8, 3000), ..base }
            }
            ExperimentKind::Thermal => {
                Self { grid: vec![0.5, 1.0, 1.5, 2.0, 2.5, 3.0], optimizer: lbfgs(2, 3000), ..base }
            }
            ExperimentKind::VerifyCode => Self { grid: vec![0.0, 0.1, 0.2, 0.3], ..base },
            ExperimentKind::KlCheck => base,
            ExperimentKind::OptimalRecovery => Self { grid: vec![0.1], ..base },
        }
    }

    /// Parses and validates; errors name the offending key.
    pub fn from_json(text: &str) -> Result<Self> {
        let de = &mut serde_json::Deserializer::from_str(text);
        let cfg: Self = serde_path_to_error::deserialize(de).map_err(|e| {
            let path = e.path().to_string();
            if path == "." {
                Error::Config(e.inner().to_string())
            } else {
                Error::Config(format!("`{path}`: {}", e.inner()))
            }
        })?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn from_file(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(self.optimizer.seed)
    }

    pub fn validate(&self) -> Result<()> {
        if self.grid.is_empty() {
            return Err(Error::Config("`grid`: must not be empty".into()));
        }
        if self.grid.iter().any(|x| !x.is_finite()) || self.grid.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::Config("`grid`: values must be finite and strictly ascending".into()));
        }
        self.optimizer.validate().map_err(|e| Error::Config(format!("`optimizer`: {e}")))?;
        for (i, code) in self.codes().iter().enumerate() {
            let known = FIXED_CODES.contains(&code.label.as_str())
                || (self.experiment != ExperimentKind::KlCheck && SWEEP_CODES.contains(&code.label.as_str()));
            if !known {
                return Err(Error::Config(format!(
                    "`codes[{i}]`: unknown code label {:?} for {}",
                    code.label, self.experiment
                )));
            }
            if code.label == "k5" && code.alpha.as_ref().map_or(true, |a| a.len() != 5) {
                return Err(Error::Config(format!("`codes[{i}].alpha`: k5 needs five angles")));
            }
            if let Some(start) = &code.start {
                let n = code.qubits.unwrap_or(5);
                let fits = code.label == "biconvex"
                    && fixed_code(&CodeEntry::new(start.as_str())).is_ok_and(|(e, _)| e.n() == n);
                if !fits {
                    return Err(Error::Config(format!(
                        "`codes[{i}].start`: needs a biconvex entry and a fixed {n}-qubit code, got {start:?}"
                    )));
                }
            }
            if code.restarts == Some(0) || code.iterations == Some(0) {
                return Err(Error::Config(format!("`codes[{i}]`: restarts and iterations must be positive")));
            }
        }
        let required = match self.experiment {
            ExperimentKind::Interpolation => Some(NoiseModel::Interpolation),
            ExperimentKind::AmplitudeDamping => Some(NoiseModel::AmplitudeDamping),
            ExperimentKind::Thermal => Some(NoiseModel::Thermal),
            _ => None,
        };
        if let (Some(model), Some(noise)) = (required, &self.noise) {
            if noise.model != model {
                return Err(Error::Config(format!("`noise.model`: {} needs {model:?} noise", self.experiment)));
            }
        }
        if let Some(noise) = &self.noise {
            if noise.t1.len() != noise.t2.len() {
                return Err(Error::Config("`noise.t2`: needs as many entries as `noise.t1`".into()));
            }
        }
        Ok(())
    }

    /// Codes to evaluate, with the experiment default when none are listed.
    pub fn codes(&self) -> Vec<CodeEntry> {
        if !self.codes.is_empty() {
            return self.codes.clone();
        }
        let labels: &[&str] = match self.experiment {
            ExperimentKind::Interpolation => &["rep5X", "513", "vgqec"],
            ExperimentKind::AmplitudeDamping => &["unprotected", "rep3Z", "513", "discovered3", "vgqec3", "vgqec5"],
            ExperimentKind::Thermal => &["Q0", "513", "vgqec5", "biconvex"],
            ExperimentKind::VerifyCode => &["discovered3", "rep3Z"],
            ExperimentKind::KlCheck => &["513"],
            ExperimentKind::OptimalRecovery => &["rep3Z"],
        };
        let mut entries: Vec<CodeEntry> = labels.iter().map(|&l| CodeEntry::new(l)).collect();
        if self.experiment == ExperimentKind::Thermal {
            if let Some(bi) = entries.iter_mut().find(|e| e.label == "biconvex") {
                bi.start = Some("513".into());
            }
        }
        entries
    }

    pub fn recovery_modes(&self) -> Vec<RecoveryMode> {
        if !self.recovery.is_empty() {
            return self.recovery.clone();
        }
        match self.experiment {
            ExperimentKind::AmplitudeDamping | ExperimentKind::Thermal => vec![RecoveryMode::Standard, RecoveryMode::Sdp],
            _ => vec![RecoveryMode::Sdp],
        }
    }

    /// Noise model, with the experiment default when none is given. `None`
    /// only for a KL check against weight-≤1 Paulis.
    pub fn noise(&self) -> Option<NoiseConfig> {
        if self.noise.is_some() {
            return self.noise.clone();
        }
        match self.experiment {
            ExperimentKind::Interpolation => Some(NoiseConfig::new(NoiseModel::Interpolation)),
            ExperimentKind::Thermal => Some(NoiseConfig::new(NoiseModel::Thermal)),
            ExperimentKind::KlCheck => None,
            _ => Some(NoiseConfig::new(NoiseModel::AmplitudeDamping)),
        }
    }
}

/// One CSV row.
#[derive(Debug, Clone, PartialEq)]
pub struct SweepRow {
    pub param: f64,
    pub code: String,
    pub recovery: String,
    pub channel_fidelity: f64,
    pub avg_fidelity: f64,
    pub restarts: usize,
    pub evaluations: usize,
    pub seed: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct KlRow {
    pub param: f64,
    pub code: String,
    pub errors: usize,
    pub residual: f64,
    /// Largest off-diagonal |λᵢⱼ| of the trace-normalized KL matrix.
    pub lambda_offdiag: f64,
}

/// Per-half-step fidelity sequence of the best biconvex restart.
#[derive(Debug, Clone, PartialEq)]
pub struct BiconvexTrace {
    pub param: f64,
    pub trace: Vec<f64>,
    pub unconverged_steps: usize,
}

#[derive(Debug, Clone)]
pub struct Report {
    pub kind: ExperimentKind,
    pub seed: u64,
    pub rows: Vec<SweepRow>,
    pub kl_rows: Vec<KlRow>,
    pub traces: Vec<BiconvexTrace>,
    pub notes: Vec<String>,
}

impl Report {
    pub fn csv(&self) -> String {
        match self.kind {
            ExperimentKind::KlCheck => kl_csv(&self.kl_rows),
            _ => sweep_csv(&self.rows),
        }
    }

    pub fn svg(&self) -> Option<String> {
        let label = match self.kind {
            ExperimentKind::Interpolation => "η",
            ExperimentKind::AmplitudeDamping | ExperimentKind::VerifyCode => "γ",
            ExperimentKind::Thermal => "t (μs)",
            ExperimentKind::OptimalRecovery => "noise parameter",
            ExperimentKind::KlCheck => return None,
        };
        Some(sweep_svg(&self.rows, label))
    }

    pub fn row(&self, param: f64, code: &str, recovery: &str) -> Option<&SweepRow> {
        self.rows.iter().find(|r| r.param == param && r.code == code && r.recovery == recovery)
    }

    pub fn summary(&self) -> String {
        let mut out = format!("experiment {} (seed {})\n", self.kind, self.seed);
        if self.kind == ExperimentKind::KlCheck {
            let _ = writeln!(out, "{:>8}  {:<12} {:>6} {:>12} {:>12}", "param", "code", "errors", "residual", "offdiag");
            for r in &self.kl_rows {
                let _ = writeln!(
                    out,
                    "{:>8}  {:<12} {:>6} {:>12.3e} {:>12.3e}",
                    format_sig(r.param, 6),
                    r.code,
                    r.errors,
                    r.residual,
                    r.lambda_offdiag
                );
            }
        } else {
            let _ = writeln!(out, "{:>8}  {:<12} {:<12} {:>14} {:>14}", "param", "code", "recovery", "F_C", "F_avg");
            for r in &self.rows {
                let _ = writeln!(
                    out,
                    "{:>8}  {:<12} {:<12} {:>14.10} {:>14.10}",
                    format_sig(r.param, 6),
                    r.code,
                    r.recovery,
                    r.channel_fidelity,
                    r.avg_fidelity
                );
            }
        }
        for note in &self.notes {
            let _ = writeln!(out, "{note}");
        }
        out
    }
}

/// Runs the experiment, capping rayon at `VGQEC_THREADS` workers when set.
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    match thread_cap()? {
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(|| run_inner(cfg)),
        None => run_inner(cfg),
    }
}

fn thread_cap() -> Result<Option<usize>> {
    parse_thread_cap(std::env::var("VGQEC_THREADS").ok().as_deref())
}

fn parse_thread_cap(value: Option<&str>) -> Result<Option<usize>> {
    match value {
        None => Ok(None),
        Some(v) => match v.trim().parse::<usize>() {
            Ok(n) if n > 0 => Ok(Some(n)),
            _ => Err(Error::Config(format!("VGQEC_THREADS must be a positive integer, got {v:?}"))),
        },
    }
}

fn run_inner(cfg: &ExperimentConfig) -> Result<Report> {
    let mut report =
        Report { kind: cfg.experiment, seed: cfg.seed(), rows: Vec::new(), kl_rows: Vec::new(), traces: Vec::new(), notes: Vec::new() };
    if cfg.experiment == ExperimentKind::KlCheck {
        report.kl_rows = run_kl(cfg)?;
        return Ok(report);
    }
    let points: Vec<(Vec<SweepRow>, Option<BiconvexTrace>)> =
        cfg.grid.par_iter().map(|&p| sweep_point(cfg, p)).collect::<Result<_>>()?;
    for (rows, trace) in points {
        report.rows.extend(rows);
        report.traces.extend(trace);
    }
    report.rows.sort_by(|a, b| {
        a.param.total_cmp(&b.param).then_with(|| a.code.cmp(&b.code)).then_with(|| a.recovery.cmp(&b.recovery))
    });
    report.notes = match cfg.experiment {
        ExperimentKind::AmplitudeDamping => damping_notes(&report),
        ExperimentKind::Thermal => thermal_notes(&report),
        ExperimentKind::VerifyCode => verify_notes(cfg)?,
        _ => Vec::new(),
    };
    Ok(report)
}

/// Encoder and (if it has one) syndrome decoder for a fixed code label.
pub fn fixed_code(entry: &CodeEntry) -> Result<(Encoder, Option<DecoderSpec>)> {
    Ok(match entry.label.as_str() {
        "rep3Z" => (repetition_encoder(3, Basis::Z)?, Some(DecoderSpec::Rep3Z)),
        "rep5X" => (repetition_encoder(5, Basis::X)?, Some(DecoderSpec::Rep5X)),
        "513" => (five_one_three_encoder(), Some(DecoderSpec::FiveOneThree)),
        "discovered3" => (discovered_three_qubit_encoder(), None),
        "k5" => {
            let alpha: [f64; 5] = entry
                .alpha
                .as_deref()
                .and_then(|a| a.try_into().ok())
                .ok_or_else(|| Error::Config("k5 needs five angles in `alpha`".into()))?;
            (vgqec_k5_encoder(&alpha), None)
        }
        other => return Err(Error::UnknownCode(other.to_string())),
    })
}

struct Candidate {
    code: String,
    recovery: String,
    /// The full logical-qubit map R∘N∘E.
    pipeline: KrausChannel,
    /// Channel fidelity reported by the solver or optimizer, if any.
    claimed: Option<f64>,
    restarts: usize,
    evaluations: usize,
}

impl Candidate {
    fn plain(code: &str, recovery: impl fmt::Display, pipeline: KrausChannel) -> Self {
        Self { code: code.into(), recovery: recovery.to_string(), pipeline, claimed: None, restarts: 0, evaluations: 0 }
    }

    fn into_row(self, param: f64, seed: u64) -> Result<SweepRow> {
        let f = channel_fidelity(&self.pipeline)?;
        if let Some(claimed) = self.claimed {
            if (f - claimed).abs() > RECOMPUTE_TOL {
                return Err(Error::Internal(format!(
                    "{} ({}) at {param}: reported F_C {claimed} but the final maps give {f}",
                    self.code, self.recovery
                )));
            }
        }
        let avg = avg_fidelity_2design(&self.pipeline)?;
        for v in [f, avg] {
            if !(-1e-9..=1.0 + 1e-9).contains(&v) {
                return Err(Error::Internal(format!("{} at {param}: fidelity {v} outside [0, 1]", self.code)));
            }
        }
        Ok(SweepRow {
            param,
            code: self.code,
            recovery: self.recovery,
            channel_fidelity: f,
            avg_fidelity: avg,
            restarts: self.restarts,
            evaluations: self.evaluations,
            seed,
        })
    }
}

fn noise_for(cfg: &ExperimentConfig) -> NoiseConfig {
    cfg.noise().expect("sweeps always have a noise model")
}

fn sweep_point(cfg: &ExperimentConfig, param: f64) -> Result<(Vec<SweepRow>, Option<BiconvexTrace>)> {
    let noise_cfg = noise_for(cfg);
    let seed = cfg.seed();
    let optimizer = OptimizerConfig { seed, ..cfg.optimizer };
    let mut candidates = Vec::new();
    let mut trace = None;
    for entry in cfg.codes() {
        let label = entry.label.as_str();
        match label {
            "unprotected" | "Q0" => {
                let ch = noise_cfg.build(param, 1)?.to_kraus()?;
                candidates.push(Candidate::plain(label, "none", ch));
            }
            "vgqec" => {
                let noise = noise_cfg.build(param, 5)?;
                let opt = OptimizerConfig { restarts: entry.restarts.unwrap_or(optimizer.restarts), ..optimizer };
                let trained = train_alpha_sdp(&noise, &opt)?;
                let alpha: [f64; 5] = trained.best_params.as_slice().try_into().expect("five angles");
                let encoder = vgqec_k5_encoder(&alpha);
                let res = optimal_recovery(&encoder, &noise, &SdpOptions::default())?;
                candidates.push(Candidate {
                    claimed: Some(res.fidelity),
                    restarts: opt.restarts,
                    evaluations: trained.evaluations,
                    ..Candidate::plain(label, RecoveryMode::Sdp, pipeline(&res.recovery, &noise, &encoder)?)
                });
            }
            "vgqec3" | "vgqec5" => {
                let (base, spec, n) = if label == "vgqec3" {
                    (repetition_encoder(3, Basis::Z)?, DecoderSpec::Rep3Z, 3)
                } else {
                    (five_one_three_encoder(), DecoderSpec::FiveOneThree, 5)
                };
                let noise = noise_cfg.build(param, n)?;
                let u_e = build_u_e(n)?;
                let u_r = build_u_r(n + 2, entry.blocks.unwrap_or(1))?;
                let opt = OptimizerConfig { restarts: entry.restarts.unwrap_or(optimizer.restarts), ..optimizer };
                let trained = train_full(&noise, &base, &u_e, &u_r, &standard_decoder(&spec)?, &opt)?;
                candidates.push(Candidate {
                    claimed: Some((3.0 * trained.result.best_fidelity - 1.0) / 2.0),
                    restarts: opt.restarts,
                    evaluations: trained.result.evaluations,
                    ..Candidate::plain(
                        label,
                        RecoveryMode::Variational,
                        pipeline(&trained.recovery, &noise, &trained.encoder)?,
                    )
                });
            }
            "biconvex" => {
                let noise = noise_cfg.build(param, entry.qubits.unwrap_or(5))?;
                let restarts = entry.restarts.unwrap_or(5);
                let iterations = entry.iterations.unwrap_or(300);
                let opts = SdpOptions { primal_tol: 1e-6, dual_tol: 1e-6, ..SdpOptions::training() };
                let start = entry.start.as_deref().map(|l| fixed_code(&CodeEntry::new(l))).transpose()?;
                let res = iterated_biconvex(&noise, start.as_ref().map(|(e, _)| e), seed, restarts, iterations, &opts)?;
                let full = choi_to_kraus(&res.encoder.then(&noise).then(&res.recovery))?;
                trace = Some(BiconvexTrace { param, trace: res.trace.clone(), unconverged_steps: res.unconverged_steps });
                candidates.push(Candidate {
                    claimed: Some(res.fidelity),
                    restarts,
                    evaluations: 2 * restarts * iterations,
                    ..Candidate::plain(label, RecoveryMode::Sdp, full)
                });
            }
            _ => {
                let (encoder, decoder) = fixed_code(&entry)?;
                let noise = noise_cfg.build(param, encoder.n())?;
                for mode in cfg.recovery_modes() {
                    if let Some(c) = fixed_candidate(label, &encoder, decoder.as_ref(), &noise, mode)? {
                        candidates.push(c);
                    }
                }
            }
        }
    }
    let rows = candidates.into_iter().map(|c| c.into_row(param, seed)).collect::<Result<_>>()?;
    Ok((rows, trace))
}

/// `None` when the mode does not apply (no syndrome table, or a variational
/// mode requested for a fixed code).
fn fixed_candidate(
    label: &str,
    encoder: &Encoder,
    decoder: Option<&DecoderSpec>,
    noise: &LayeredChannel,
    mode: RecoveryMode,
) -> Result<Option<Candidate>> {
    Ok(match mode {
        RecoveryMode::Sdp => {
            let res = optimal_recovery(encoder, noise, &SdpOptions::default())?;
            Some(Candidate { claimed: Some(res.fidelity), ..Candidate::plain(label, mode, pipeline(&res.recovery, noise, encoder)?) })
        }
        RecoveryMode::Petz => {
            if noise.expanded_kraus_count() > MAX_EXPANDED_KRAUS {
                return Err(Error::Config(format!(
                    "petz recovery needs the expanded Kraus set ({} operators, limit {MAX_EXPANDED_KRAUS})",
                    noise.expanded_kraus_count()
                )));
            }
            Some(Candidate::plain(label, mode, pipeline(&petz_recovery(encoder, noise)?, noise, encoder)?))
        }
        RecoveryMode::Standard => match decoder {
            Some(spec) => Some(Candidate::plain(label, mode, pipeline(&standard_decoder(spec)?, noise, encoder)?)),
            None => None,
        },
        RecoveryMode::Variational => None,
    })
}

fn run_kl(cfg: &ExperimentConfig) -> Result<Vec<KlRow>> {
    let noise = cfg.noise();
    let mut rows = Vec::new();
    for &param in &cfg.grid {
        for entry in cfg.codes() {
            let (encoder, _) = fixed_code(&entry)?;
            let errors = match &noise {
                None => weight_one_paulis(encoder.n()),
                Some(nc) => {
                    let ch = nc.build(param, encoder.n())?;
                    if ch.expanded_kraus_count() > MAX_EXPANDED_KRAUS {
                        return Err(Error::Config(format!(
                            "KL check needs the expanded Kraus set ({} operators, limit {MAX_EXPANDED_KRAUS})",
                            ch.expanded_kraus_count()
                        )));
                    }
                    ch.to_kraus()?.into_ops()
                }
            };
            let report = kl_check(&encoder.projector(), &errors, 1e-10)?;
            let m = errors.len();
            let offdiag = (0..m)
                .flat_map(|i| (0..m).filter(move |&j| j != i).map(move |j| (i, j)))
                .map(|(i, j)| report.lambda[(i, j)].norm())
                .fold(0.0, f64::max);
            rows.push(KlRow { param, code: entry.label.clone(), errors: m, residual: report.residual, lambda_offdiag: offdiag });
        }
    }
    Ok(rows)
}

fn channel_value(report: &Report, param: f64, code: &str, recovery: &str) -> Option<f64> {
    report.row(param, code, recovery).map(|r| r.channel_fidelity)
}

fn grid_of(report: &Report) -> Vec<f64> {
    let mut grid: Vec<f64> = report.rows.iter().map(|r| r.param).collect();
    grid.dedup();
    grid
}

/// Smallest grid value from which `a` stays above `b` for the rest of the grid.
fn crossover(report: &Report, a: (&str, &str), b: (&str, &str)) -> Option<f64> {
    let mut from = None;
    for p in grid_of(report) {
        match (channel_value(report, p, a.0, a.1), channel_value(report, p, b.0, b.1)) {
            (Some(x), Some(y)) if x > y => {
                from.get_or_insert(p);
            }
            (Some(_), Some(_)) => from = None,
            _ => {}
        }
    }
    from
}

fn describe(at: Option<f64>, what: &str) -> String {
    match at {
        Some(p) => format!("{what} from {} on the grid", format_sig(p, 6)),
        None => format!("{what}: never on the grid"),
    }
}

fn damping_notes(report: &Report) -> Vec<String> {
    ["standard", "sdp"]
        .iter()
        .filter(|rec| report.rows.iter().any(|r| r.code == "513" && r.recovery == **rec))
        .map(|rec| {
            describe(
                crossover(report, ("discovered3", "sdp"), ("513", rec)),
                &format!("discovered3 (sdp) above 513 ({rec})"),
            )
        })
        .collect()
}

fn thermal_notes(report: &Report) -> Vec<String> {
    let mut notes = vec![describe(crossover(report, ("Q0", "none"), ("513", "standard")), "Q0 above 513 (standard)")];
    for t in &report.traces {
        let monotone = t.trace.windows(2).all(|w| w[1] >= w[0] - 1e-9);
        notes.push(format!(
            "biconvex at {}: {} half-steps, monotone: {monotone}, unconverged half-steps: {}",
            format_sig(t.param, 6),
            t.trace.len(),
            t.unconverged_steps
        ));
    }
    notes
}

fn verify_notes(cfg: &ExperimentConfig) -> Result<Vec<String>> {
    let mut notes = Vec::new();
    let noise_cfg = noise_for(cfg);
    for entry in cfg.codes() {
        if !FIXED_CODES.contains(&entry.label.as_str()) {
            continue;
        }
        let (encoder, _) = fixed_code(&entry)?;
        let v = encoder.isometry();
        notes.push(format!("{} codewords:", entry.label));
        for j in 0..v.ncols() {
            let terms: Vec<String> = (0..v.nrows())
                .filter(|&i| v[(i, j)].norm() > 1e-12)
                .map(|i| format!("({:+.6}{:+.6}i)|{:0width$b}⟩", v[(i, j)].re, v[(i, j)].im, i, width = encoder.n()))
                .collect();
            notes.push(format!("  |{j}_L⟩ = {}", terms.join(" + ")));
        }
        let iso = frobenius_distance(&(v.adjoint() * v), &identity(v.ncols()));
        notes.push(format!("  isometry deviation ‖V†V − I‖ = {iso:.3e}"));
        for &p in &cfg.grid {
            let ch = noise_cfg.build(p, encoder.n())?;
            if ch.expanded_kraus_count() > MAX_EXPANDED_KRAUS {
                continue;
            }
            let kl = kl_check(&encoder.projector(), ch.to_kraus()?.ops(), 1e-10)?;
            notes.push(format!("  KL residual under the noise Kraus set at {}: {:.3e}", format_sig(p, 6), kl.residual));
        }
    }
    Ok(notes)
}

/// Codeword table for `encode`: one line per computational basis state with
/// the real and imaginary amplitudes of each logical codeword.
pub fn codeword_csv(entry: &CodeEntry) -> Result<String> {
    let (encoder, _) = fixed_code(entry)?;
    let v = encoder.isometry();
    let mut out = String::from("basis");
    for j in 0..v.ncols() {
        let _ = write!(out, ",re{j},im{j}");
    }
    out.push('\n');
    for i in 0..v.nrows() {
        let _ = write!(out, "{:0width$b}", i, width = encoder.n());
        for j in 0..v.ncols() {
            let _ = write!(out, ",{},{}", format_sig(v[(i, j)].re, 12), format_sig(v[(i, j)].im, 12));
        }
        out.push('\n');
    }
    Ok(out)
}

#[cfg(test)]
mod tests;
