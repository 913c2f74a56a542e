use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use serde_json::{json, Value};
use vgqec::experiments::{self, codeword_csv, CodeEntry, ExperimentConfig, Report};
use vgqec::Error;

#[derive(Parser)]
#[command(name = "vgqec", version, about = "Simulate, recover and train small quantum error-correcting codes")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        config: PathBuf,
        /// Write the CSV here instead of the config's `output` (use `-` for stdout).
        #[arg(short, long)]
        output: Option<PathBuf>,
        /// Also write an SVG plot next to the CSV.
        #[arg(long)]
        svg: bool,
    },
    /// Knill–Laflamme check of a code against weight-one Paulis or a noise Kraus set.
    KlCheck {
        #[arg(long, default_value = "513")]
        code: String,
        /// Noise model whose Kraus operators replace the weight-one Paulis.
        #[arg(long)]
        noise: Option<String>,
        #[arg(long, default_value_t = 0.0)]
        param: f64,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Fidelity of a fixed code under SDP, Petz or syndrome-table recovery.
    OptimalRecovery {
        #[arg(long, default_value = "rep3Z")]
        code: String,
        #[arg(long, default_value = "bit_flip")]
        noise: String,
        /// Noise parameters; repeat or separate with commas.
        #[arg(long, value_delimiter = ',', default_value = "0.1")]
        param: Vec<f64>,
        #[arg(long, value_delimiter = ',', default_value = "sdp")]
        recovery: Vec<String>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Codewords, isometry and KL report, and the fidelity table of a code.
    VerifyCode {
        #[arg(long, value_delimiter = ',', default_values_t = [String::from("discovered3"), String::from("rep3Z")])]
        code: Vec<String>,
        #[arg(long, value_delimiter = ',', default_value = "0,0.1,0.2,0.3")]
        param: Vec<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
    /// Print the codewords of a fixed code as CSV.
    Encode {
        #[arg(long)]
        code: String,
        /// Five angles for the `k5` family.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
        alpha: Vec<f64>,
        #[arg(short, long)]
        output: Option<PathBuf>,
    },
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::NonConvergence { .. } => 2,
        _ => 1,
    }
}

fn dispatch(command: Command) -> Result<(), Error> {
    match command {
        Command::Run { config, output, svg } => {
            let cfg = ExperimentConfig::from_file(&config)?;
            let target = output.or_else(|| cfg.output.clone());
            let report = experiments::run(&cfg)?;
            emit_report(&report, target.as_deref(), svg)
        }
        Command::KlCheck { code, noise, param, output } => {
            let mut cfg = json!({ "experiment": "kl_check", "grid": [param], "codes": [code] });
            if let Some(model) = noise {
                cfg["noise"] = json!({ "model": model });
            }
            run_value(cfg, output.as_deref())
        }
        Command::OptimalRecovery { code, noise, param, recovery, output } => {
            let cfg = json!({
                "experiment": "optimal_recovery",
                "grid": param,
                "codes": [code],
                "recovery": recovery,
                "noise": { "model": noise },
            });
            run_value(cfg, output.as_deref())
        }
        Command::VerifyCode { code, param, output } => {
            let cfg = json!({
                "experiment": "verify_code",
                "grid": param,
                "codes": code,
                "noise": { "model": "amplitude_damping" },
            });
            run_value(cfg, output.as_deref())
        }
        Command::Encode { code, alpha, output } => {
            let entry = CodeEntry { alpha: (!alpha.is_empty()).then_some(alpha), ..CodeEntry::new(code) };
            let csv = codeword_csv(&entry)?;
            write_csv(&csv, output.as_deref())?;
            Ok(())
        }
    }
}

fn run_value(value: Value, output: Option<&Path>) -> Result<(), Error> {
    let cfg = ExperimentConfig::from_json(&value.to_string())?;
    let report = experiments::run(&cfg)?;
    emit_report(&report, output, false)
}

/// CSV goes to `target` (stdout when absent or `-`); the summary goes to
/// whichever stream the CSV did not take.
fn emit_report(report: &Report, target: Option<&Path>, svg: bool) -> Result<(), Error> {
    let to_file = write_csv(&report.csv(), target)?;
    let summary = report.summary();
    match &to_file {
        Some(path) => {
            print!("{summary}");
            println!("wrote {}", path.display());
        }
        None => eprint!("{summary}"),
    }
    if svg {
        let Some(plot) = report.svg() else {
            eprintln!("no plot for {} experiments", report.kind);
            return Ok(());
        };
        let path = to_file.map_or_else(|| PathBuf::from(format!("{}.svg", report.kind)), |p| p.with_extension("svg"));
        fs::write(&path, plot)?;
        eprintln!("wrote {}", path.display());
    }
    Ok(())
}

fn write_csv(csv: &str, target: Option<&Path>) -> Result<Option<PathBuf>, Error> {
    match target {
        Some(path) if path != Path::new("-") => {
            if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
                fs::create_dir_all(dir)?;
            }
            fs::write(path, csv)?;
            Ok(Some(path.to_path_buf()))
        }
        _ => {
            print!("{csv}");
            Ok(None)
        }
    }
}
