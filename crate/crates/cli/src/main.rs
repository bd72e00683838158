use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use gibbsum::experiment::{run_experiment, ExperimentConfig, RunRecord};
use gibbsum::models::{ModelSpec, DEFAULT_ENUMERATION_CAP};
use gibbsum::qsim::{AeMode, QUANTUM_C2};
use gibbsum::schedule::{verify_schedule, CoolingSchedule};
use gibbsum::Error;

const EXIT_VALIDATION: u8 = 2;
const EXIT_PIPELINE: u8 = 3;

#[derive(Parser)]
#[command(name = "gibbsum", version, about = "Estimate ratios of Gibbs partition functions")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Backend {
    Analytic,
    Statevector,
}

#[derive(Subcommand)]
enum Command {
    /// Run an experiment described by a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        /// Write the JSON report here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Also write one CSV row per trial.
        #[arg(long)]
        csv: Option<PathBuf>,
        #[arg(long)]
        trials: Option<u32>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum)]
        ae_backend: Option<Backend>,
        #[arg(long)]
        phase_bits: Option<u32>,
    },
    /// Check a cooling schedule against the exact partition function.
    VerifySchedule {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        schedule: PathBuf,
        #[arg(long, default_value_t = QUANTUM_C2)]
        c2: f64,
        #[arg(long, default_value_t = 1.0)]
        c1: f64,
        #[arg(long, default_value_t = DEFAULT_ENUMERATION_CAP)]
        enumeration_cap: u64,
    },
}

enum Failure {
    Validation(String),
    Pipeline(String),
}

impl From<Error> for Failure {
    fn from(e: Error) -> Self {
        match e {
            Error::Config { .. } | Error::Json(_) | Error::Io(_) | Error::InvalidModel(_) | Error::InvalidArgument(_) => {
                Failure::Validation(e.to_string())
            }
            other => Failure::Pipeline(other.to_string()),
        }
    }
}

fn read(path: &Path) -> Result<String, Failure> {
    fs::read_to_string(path).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn write(path: &Path, contents: &str) -> Result<(), Failure> {
    fs::write(path, contents).map_err(|e| Failure::Pipeline(format!("{}: {e}", path.display())))
}

fn parse<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T, Failure> {
    serde_json::from_str(&read(path)?).map_err(|e| Failure::Validation(format!("{}: {e}", path.display())))
}

fn write_csv(record: &RunRecord, path: &Path) -> Result<(), Failure> {
    let fail = |e: csv::Error| Failure::Pipeline(format!("{}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(fail)?;
    for row in record.csv_rows() {
        w.serialize(row).map_err(fail)?;
    }
    w.flush().map_err(|e| Failure::Pipeline(format!("{}: {e}", path.display())))
}

fn summary_line(record: &RunRecord) -> String {
    let s = &record.summary;
    let mut line = format!(
        "task={} trials={} failures={} seed={}",
        serde_json::to_value(record.config.task).unwrap_or_default().as_str().unwrap_or("?"),
        s.trials,
        s.failures,
        record.seed
    );
    if let Some(e) = &record.exact {
        line += &format!(" exact_q={:.6e}", e.q);
    }
    if let (Some(ok), Some(tol)) = (s.successes, s.success_tolerance) {
        line += &format!(" within_{tol}={ok}/{}", s.trials);
    }
    if let Some(m) = s.median_relative_error {
        line += &format!(" median_rel_err={m:.4}");
    }
    let r = &record.resources;
    line += &format!(" gibbs_samples={}", r.gibbs_samples);
    if r.reflections_invoked > 0 {
        line += &format!(" reflections={} copies={}", r.reflections_invoked, r.qsample_copies_consumed);
    }
    line
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Run {
            config,
            out,
            csv,
            trials,
            seed,
            ae_backend,
            phase_bits,
        } => {
            let mut cfg = ExperimentConfig::from_json(&read(&config)?)?;
            if let Some(t) = trials {
                cfg.trials = t;
            }
            if let Some(s) = seed {
                cfg.seed = s;
            }
            if let Some(b) = ae_backend {
                cfg.ae.mode = match b {
                    Backend::Analytic => AeMode::Analytic,
                    Backend::Statevector => AeMode::Statevector,
                };
            }
            if phase_bits.is_some() {
                cfg.ae.phase_bits = phase_bits;
            }
            let record = run_experiment(&cfg)?;
            let json = record.to_json()?;
            match &out {
                Some(path) => write(path, &json)?,
                None => println!("{json}"),
            }
            if let Some(path) = &csv {
                write_csv(&record, path)?;
            }
            eprintln!("{}", summary_line(&record));
            if record.any_failed() {
                return Err(Failure::Pipeline("one or more trials failed".into()));
            }
            Ok(())
        }
        Command::VerifySchedule {
            model,
            schedule,
            c2,
            c1,
            enumeration_cap,
        } => {
            let spec: ModelSpec = parse(&model)?;
            let h = spec.build()?;
            let schedule: CoolingSchedule = parse(&schedule)?;
            schedule.validate()?;
            let report = verify_schedule(&h, &schedule, c1, c2, enumeration_cap)?;
            println!("{}", serde_json::to_string_pretty(&report).map_err(Error::from)?);
            eprintln!(
                "length={} max_ratio={:.4} c2={c2} violations={}",
                report.length,
                report.max_ratio,
                report.upper_violations.len()
            );
            if report.slowly_varying() {
                Ok(())
            } else {
                Err(Failure::Pipeline(format!("schedule is not {c2}-slowly-varying")))
            }
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Validation(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_VALIDATION)
        }
        Err(Failure::Pipeline(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(EXIT_PIPELINE)
        }
    }
}
