//! Seeded, reproducible experiment runs driven by a JSON configuration.

use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::sync::Arc;
use std::time::Instant;

use crate::error::{Error, Result};
use crate::estimator::{estimate_ratio_classical, ClassicalOptions, EstimateReport};
use crate::models::{Hamiltonian, Model, ModelSpec, Spectrum, DEFAULT_ENUMERATION_CAP};
use crate::numeric::serde_beta;
use crate::qsim::{
    estimate_ratio_quantum, generate_schedule_quantum, AeBackend, QuantumOptions, QuantumScheduleOptions,
    ResourceLedger, QUANTUM_C2,
};
use crate::sampling::{stream_rng, SamplerConfig, SamplerFactory};
use crate::schedule::{
    generate_schedule_classical, verify_schedule_with, ClassicalScheduleOptions, CoolingSchedule, ScheduleReport,
    CLASSICAL_C2,
};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Task {
    Exact,
    ScheduleClassical,
    ScheduleQuantum,
    EstimateClassical,
    EstimateQuantum,
    CountColorings,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    #[default]
    Classical,
    Quantum,
}

fn default_epsilon() -> f64 {
    0.2
}
fn default_eta() -> f64 {
    0.05
}
fn default_delta() -> f64 {
    0.1
}
fn default_trials() -> u32 {
    1
}
fn default_cap() -> u64 {
    DEFAULT_ENUMERATION_CAP
}
fn default_beta_max() -> f64 {
    1.0
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub model: ModelSpec,
    pub task: Task,
    #[serde(default, with = "serde_beta")]
    pub beta_min: f64,
    #[serde(default = "default_beta_max", with = "serde_beta")]
    pub beta_max: f64,
    #[serde(default = "default_epsilon")]
    pub epsilon: f64,
    /// Failure probability of each classical product estimate.
    #[serde(default = "default_eta")]
    pub eta: f64,
    /// Failure probability of schedule generation.
    #[serde(default = "default_delta")]
    pub delta: f64,
    #[serde(default)]
    pub sampler: SamplerConfig,
    #[serde(default)]
    pub ae: AeBackend,
    /// Estimator used by `count-colorings`.
    #[serde(default)]
    pub method: Method,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_trials")]
    pub trials: u32,
    /// Overrides the planned classical samples per stage.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples_per_stage: Option<u64>,
    #[serde(default = "default_cap")]
    pub enumeration_cap: u64,
    /// Adds wall-clock time to the report (which then differs between runs).
    #[serde(default)]
    pub record_timing: bool,
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::config("<config>", e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::config(name, format!("must lie in (0, 1), got {v}")))
            }
        };
        unit("epsilon", self.epsilon)?;
        unit("eta", self.eta)?;
        unit("delta", self.delta)?;
        if self.trials == 0 {
            return Err(Error::config("trials", "must be at least 1"));
        }
        if self.beta_min.is_nan() || self.beta_min < 0.0 || self.beta_min.is_infinite() {
            return Err(Error::config("beta_min", "must be a finite nonnegative number"));
        }
        if self.beta_max.is_nan() || self.beta_max < self.beta_min {
            return Err(Error::config("beta_max", "must be at least beta_min"));
        }
        if self.samples_per_stage == Some(0) {
            return Err(Error::config("samples_per_stage", "must be at least 1"));
        }
        self.model.build().map_err(|e| Error::config("model", e.to_string()))?;
        self.sampler.validate()?;
        self.ae.validate()?;
        if self.task == Task::CountColorings && !matches!(self.model, ModelSpec::Potts { .. }) {
            return Err(Error::config("task", "count-colorings needs a potts model"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExactReference {
    #[serde(with = "serde_beta")]
    pub beta_min: f64,
    #[serde(with = "serde_beta")]
    pub beta_max: f64,
    pub log_z_min: f64,
    pub log_z_max: f64,
    pub z_min: f64,
    pub z_max: f64,
    /// `Z(β_max)/Z(β_min)`.
    pub q: f64,
    pub log_q: f64,
}

impl ExactReference {
    pub fn from_spectrum(spectrum: &Spectrum, beta_min: f64, beta_max: f64) -> Self {
        let (log_z_min, log_z_max) = (spectrum.log_partition(beta_min), spectrum.log_partition(beta_max));
        Self {
            beta_min,
            beta_max,
            log_z_min,
            log_z_max,
            z_min: log_z_min.exp(),
            z_max: log_z_max.exp(),
            q: (log_z_max - log_z_min).exp(),
            log_q: log_z_max - log_z_min,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ColoringCount {
    pub estimate: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub exact: Option<u64>,
    pub colors: u32,
    pub vertices: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum TrialOutcome {
    Estimate {
        q_hat: f64,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        relative_error: Option<f64>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        colorings: Option<ColoringCount>,
        report: Box<EstimateReport>,
    },
    Schedule {
        schedule: CoolingSchedule,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        verification: Option<ScheduleReport>,
        #[serde(skip_serializing_if = "Option::is_none", default)]
        ledger: Option<ResourceLedger>,
    },
    Failed {
        error: String,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialRecord {
    pub trial: u32,
    pub seed: u64,
    pub outcome: TrialOutcome,
}

impl TrialRecord {
    pub fn failed(&self) -> bool {
        matches!(self.outcome, TrialOutcome::Failed { .. })
    }

    pub fn relative_error(&self) -> Option<f64> {
        match &self.outcome {
            TrialOutcome::Estimate { relative_error, .. } => *relative_error,
            _ => None,
        }
    }

    fn gibbs_samples(&self) -> u64 {
        match &self.outcome {
            TrialOutcome::Estimate { report, .. } if report.ledger.is_none() => {
                report.samples_used + report.schedule_samples
            }
            TrialOutcome::Schedule { schedule, .. } => schedule.samples_used,
            _ => 0,
        }
    }

    fn ledger(&self) -> Option<&ResourceLedger> {
        match &self.outcome {
            TrialOutcome::Estimate { report, .. } => report.ledger.as_ref(),
            TrialOutcome::Schedule { ledger, .. } => ledger.as_ref(),
            TrialOutcome::Failed { .. } => None,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ResourceTotals {
    pub gibbs_samples: u64,
    pub reflections_invoked: u64,
    pub qsample_copies_consumed: u64,
    pub qsample_copies_restored: u64,
    pub qsample_copies_reprepared: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub trials: u32,
    pub failures: u32,
    /// Trials whose relative error is at most the success tolerance.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub successes: Option<u32>,
    /// `ε` for classical estimates, `2ε` for quantum ones.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub success_tolerance: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub median_relative_error: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub config: ExperimentConfig,
    pub seed: u64,
    /// Null when the state space exceeds the enumeration cap.
    pub exact: Option<ExactReference>,
    pub trials: Vec<TrialRecord>,
    pub summary: RunSummary,
    pub resources: ResourceTotals,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub wall_clock_seconds: Option<f64>,
}

impl RunRecord {
    pub fn any_failed(&self) -> bool {
        self.trials.iter().any(TrialRecord::failed)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn csv_rows(&self) -> Vec<CsvRow> {
        self.trials
            .iter()
            .map(|t| {
                let (status, q_hat, length) = match &t.outcome {
                    TrialOutcome::Estimate { q_hat, report, .. } => ("ok", Some(*q_hat), Some(report.schedule_length)),
                    TrialOutcome::Schedule { schedule, .. } => ("ok", None, Some(schedule.length())),
                    TrialOutcome::Failed { .. } => ("failed", None, None),
                };
                CsvRow {
                    trial: t.trial,
                    seed: t.seed,
                    status,
                    q_hat,
                    exact_q: self.exact.as_ref().map(|e| e.q),
                    relative_error: t.relative_error(),
                    schedule_length: length,
                    gibbs_samples: t.gibbs_samples(),
                    reflections: t.ledger().map_or(0, |l| l.reflections_invoked),
                }
            })
            .collect()
    }
}

/// One row of the per-trial CSV summary.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CsvRow {
    pub trial: u32,
    pub seed: u64,
    pub status: &'static str,
    pub q_hat: Option<f64>,
    pub exact_q: Option<f64>,
    pub relative_error: Option<f64>,
    pub schedule_length: Option<usize>,
    pub gibbs_samples: u64,
    pub reflections: u64,
}

/// Seed of trial `trial`, derived from the master seed.
pub fn trial_seed(seed: u64, trial: u32) -> u64 {
    stream_rng(seed, u64::MAX - u64::from(trial)).random()
}

/// Exact count of proper colorings (zero-energy Potts states) when enumerable.
pub fn exact_coloring_count<H: Hamiltonian + ?Sized>(h: &H, cap: u64) -> Result<u64> {
    Ok(Spectrum::enumerate(h, cap)?.degeneracies()[0])
}

/// Estimates the number of proper colorings as `Q̂·k^{|V|}` with `Q = Z(∞)/Z(0)`.
///
/// A Hamiltonian with `n = 0` (no edges) has every state proper, so the count is
/// `k^{|V|}` exactly and no schedule is built.
pub fn count_colorings(
    model: &Arc<Model>,
    epsilon: f64,
    method: Method,
    sampler: SamplerConfig,
    ae: AeBackend,
    cap: u64,
) -> Result<(ColoringCount, EstimateReport)> {
    let Model::Potts(potts) = model.as_ref() else {
        return Err(Error::InvalidModel("coloring counts need a Potts model".into()));
    };
    let colors = potts.colors();
    let vertices = potts.graph().vertex_count();
    let log_total = model.log_state_count();
    let exact = exact_coloring_count(model.as_ref(), cap).ok();
    if model.max_energy() == 0 {
        let count = f64::from(colors).powi(vertices as i32);
        let report = EstimateReport::identity(0.0, epsilon, 0.0, 1.0);
        return Ok((
            ColoringCount {
                estimate: count,
                exact,
                colors,
                vertices,
            },
            report,
        ));
    }
    let report = match method {
        Method::Classical => {
            let factory = SamplerFactory::new(model.clone(), sampler, cap)?;
            estimate_ratio_classical(&factory, 0.0, f64::INFINITY, epsilon, &ClassicalOptions::default())?
        }
        Method::Quantum => {
            let spectrum = Spectrum::enumerate(model.as_ref(), cap)?;
            let options = QuantumOptions {
                schedule: QuantumScheduleOptions {
                    backend: ae,
                    ..Default::default()
                },
                ..Default::default()
            };
            estimate_ratio_quantum(&spectrum, 0.0, f64::INFINITY, epsilon, &options, sampler.seed)?
        }
    };
    Ok((
        ColoringCount {
            estimate: (report.log_q_hat + log_total).exp(),
            exact,
            colors,
            vertices,
        },
        report,
    ))
}

struct Prepared {
    model: Arc<Model>,
    spectrum: Option<Arc<Spectrum>>,
}

fn run_trial(config: &ExperimentConfig, prepared: &Prepared, seed: u64, exact: Option<&ExactReference>) -> Result<TrialOutcome> {
    let model = &prepared.model;
    let sampler = SamplerConfig { seed, ..config.sampler };
    let factory = || -> Result<SamplerFactory<Model>> {
        match &prepared.spectrum {
            Some(sp) if sampler.mode == crate::sampling::SamplerMode::Exact => {
                SamplerFactory::with_spectrum(model.clone(), sp.clone(), sampler)
            }
            _ => SamplerFactory::new(model.clone(), sampler, config.enumeration_cap),
        }
    };
    let spectrum = || -> Result<Arc<Spectrum>> {
        match &prepared.spectrum {
            Some(sp) => Ok(sp.clone()),
            None => Ok(Arc::new(Spectrum::enumerate(model.as_ref(), config.enumeration_cap)?)),
        }
    };
    let quantum_options = QuantumOptions {
        delta: config.delta,
        schedule: QuantumScheduleOptions {
            backend: config.ae,
            ..Default::default()
        },
        ..Default::default()
    };
    let relative = |q_hat: f64| exact.map(|e| (q_hat / e.q - 1.0).abs());
    match config.task {
        Task::Exact => unreachable!("exact task has no trials"),
        Task::ScheduleClassical => {
            let f = factory()?;
            let mut s = f.sampler(0)?;
            let mut schedule = generate_schedule_classical(
                model.as_ref(),
                config.beta_min,
                config.beta_max,
                config.delta,
                s.as_mut(),
                &ClassicalScheduleOptions::default(),
            )?;
            schedule.seed = Some(seed);
            let verification = prepared
                .spectrum
                .as_ref()
                .map(|sp| verify_schedule_with(sp, &schedule, 1.0, CLASSICAL_C2));
            Ok(TrialOutcome::Schedule {
                schedule,
                verification,
                ledger: None,
            })
        }
        Task::ScheduleQuantum => {
            let sp = spectrum()?;
            let mut rng = stream_rng(seed, 0);
            let mut ledger = ResourceLedger::default();
            let mut schedule = generate_schedule_quantum(
                &sp,
                config.beta_min,
                config.beta_max,
                config.delta,
                &quantum_options.schedule,
                &mut rng,
                &mut ledger,
            )?;
            schedule.seed = Some(seed);
            Ok(TrialOutcome::Schedule {
                verification: Some(verify_schedule_with(&sp, &schedule, 1.0, QUANTUM_C2)),
                schedule,
                ledger: Some(ledger),
            })
        }
        Task::EstimateClassical => {
            let options = ClassicalOptions {
                delta: config.delta,
                eta: config.eta,
                samples_per_stage: config.samples_per_stage,
                ..Default::default()
            };
            let report = estimate_ratio_classical(&factory()?, config.beta_min, config.beta_max, config.epsilon, &options)?;
            Ok(TrialOutcome::Estimate {
                q_hat: report.q_hat,
                relative_error: relative(report.q_hat),
                colorings: None,
                report: Box::new(report),
            })
        }
        Task::EstimateQuantum => {
            let sp = spectrum()?;
            let report =
                estimate_ratio_quantum(&sp, config.beta_min, config.beta_max, config.epsilon, &quantum_options, seed)?;
            Ok(TrialOutcome::Estimate {
                q_hat: report.q_hat,
                relative_error: relative(report.q_hat),
                colorings: None,
                report: Box::new(report),
            })
        }
        Task::CountColorings => {
            let (count, report) =
                count_colorings(model, config.epsilon, config.method, sampler, config.ae, config.enumeration_cap)?;
            let relative_error = count.exact.map(|e| (count.estimate / e as f64 - 1.0).abs());
            Ok(TrialOutcome::Estimate {
                q_hat: report.q_hat,
                relative_error,
                colorings: Some(count),
                report: Box::new(report),
            })
        }
    }
}

/// Runs every trial of a validated configuration.
///
/// Trials run in parallel but each one only depends on its derived seed, so the
/// record is identical across runs unless `record_timing` is set.
pub fn run_experiment(config: &ExperimentConfig) -> Result<RunRecord> {
    config.validate()?;
    let start = Instant::now();
    let model = Arc::new(config.model.build()?);
    let fits = model
        .state_count()
        .is_some_and(|c| c <= config.enumeration_cap);
    let spectrum = if fits {
        Some(Arc::new(Spectrum::enumerate(model.as_ref(), config.enumeration_cap)?))
    } else {
        None
    };
    let (beta_min, beta_max) = match config.task {
        Task::CountColorings => (0.0, f64::INFINITY),
        _ => (config.beta_min, config.beta_max),
    };
    let exact = spectrum
        .as_ref()
        .map(|sp| ExactReference::from_spectrum(sp, beta_min, beta_max));
    let prepared = Prepared { model, spectrum };

    let trials: Vec<TrialRecord> = if config.task == Task::Exact {
        Vec::new()
    } else {
        (0..config.trials)
            .into_par_iter()
            .map(|trial| {
                let seed = trial_seed(config.seed, trial);
                let outcome = run_trial(config, &prepared, seed, exact.as_ref()).unwrap_or_else(|e| TrialOutcome::Failed {
                    error: e.to_string(),
                });
                TrialRecord { trial, seed, outcome }
            })
            .collect()
    };

    let tolerance = match (config.task, config.method) {
        (Task::EstimateClassical, _) | (Task::CountColorings, Method::Classical) => Some(config.epsilon),
        (Task::EstimateQuantum, _) | (Task::CountColorings, Method::Quantum) => Some(2.0 * config.epsilon),
        _ => None,
    };
    let errors: Vec<f64> = trials.iter().filter_map(TrialRecord::relative_error).collect();
    let summary = RunSummary {
        trials: trials.len() as u32,
        failures: trials.iter().filter(|t| t.failed()).count() as u32,
        successes: tolerance
            .filter(|_| !errors.is_empty() || trials.iter().all(|t| t.failed()))
            .map(|tol| errors.iter().filter(|&&e| e <= tol).count() as u32),
        success_tolerance: tolerance,
        median_relative_error: (!errors.is_empty()).then(|| crate::numeric::median(&errors)),
    };
    let mut resources = ResourceTotals::default();
    for t in &trials {
        resources.gibbs_samples += t.gibbs_samples();
        if let Some(l) = t.ledger() {
            resources.reflections_invoked += l.reflections_invoked;
            resources.qsample_copies_consumed += l.qsample_copies_consumed;
            resources.qsample_copies_restored += l.qsample_copies_restored;
            resources.qsample_copies_reprepared += l.qsample_copies_reprepared;
        }
    }
    Ok(RunRecord {
        config: config.clone(),
        seed: config.seed,
        exact,
        trials,
        summary,
        resources,
        wall_clock_seconds: config.record_timing.then(|| start.elapsed().as_secs_f64()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn config(json: &str) -> ExperimentConfig {
        ExperimentConfig::from_json(json).unwrap()
    }

    #[test]
    fn exact_task_single_edge() {
        let c = config(r#"{"model":{"type":"ising","vertices":2,"edges":[[0,1]]},"task":"exact","beta_max":1}"#);
        let r = run_experiment(&c).unwrap();
        let e = r.exact.unwrap();
        assert!((e.z_max - (2.0 + 2.0 * (-1f64).exp())).abs() < 1e-12);
        assert!(r.trials.is_empty());
    }

    #[test]
    fn validation_reports_field_paths() {
        let bad = |json: &str, path: &str| {
            let err = config(json).validate().unwrap_err();
            match err {
                Error::Config { path: p, .. } => assert_eq!(p, path),
                other => panic!("{other}"),
            }
        };
        let m = r#""model":{"type":"ising","vertices":2,"edges":[[0,1]]}"#;
        bad(&format!(r#"{{{m},"task":"exact","epsilon":1.5}}"#), "epsilon");
        bad(&format!(r#"{{{m},"task":"exact","trials":0}}"#), "trials");
        bad(&format!(r#"{{{m},"task":"exact","beta_min":2,"beta_max":1}}"#), "beta_max");
        bad(&format!(r#"{{{m},"task":"count-colorings"}}"#), "task");
        bad(
            r#"{"model":{"type":"ising","vertices":2,"edges":[[0,0]]},"task":"exact"}"#,
            "model",
        );
        assert!(ExperimentConfig::from_json(r#"{"task":"exact"}"#).is_err());
    }

    #[test]
    fn infinite_beta_round_trips() {
        let c = config(
            r#"{"model":{"type":"potts","vertices":3,"edges":[[0,1],[1,2],[0,2]],"k":3},"task":"count-colorings","beta_max":"inf"}"#,
        );
        assert!(c.beta_max.is_infinite());
        let back: ExperimentConfig = serde_json::from_str(&serde_json::to_string(&c).unwrap()).unwrap();
        assert_eq!(back, c);
    }

    #[test]
    fn colorings_of_small_graphs() {
        let run = |json: &str| run_experiment(&config(json)).unwrap();
        let r = run(r#"{"model":{"type":"potts","vertices":3,"edges":[[0,1],[1,2],[0,2]],"k":3},"task":"count-colorings","epsilon":0.25}"#);
        let TrialOutcome::Estimate { colorings: Some(c), .. } = &r.trials[0].outcome else {
            panic!("{:?}", r.trials[0].outcome)
        };
        assert_eq!(c.exact, Some(6));
        assert!((c.estimate - 6.0).abs() <= 0.25 * 6.0);

        let r = run(r#"{"model":{"type":"potts","vertices":4,"k":3},"task":"count-colorings"}"#);
        let TrialOutcome::Estimate { colorings: Some(c), report, .. } = &r.trials[0].outcome else {
            panic!()
        };
        assert_eq!(c.estimate, 81.0);
        assert_eq!(report.schedule_length, 0);

        let path = Arc::new(config(r#"{"model":{"type":"potts","vertices":3,"edges":[[0,1],[1,2]],"k":2},"task":"exact"}"#).model.build().unwrap());
        assert_eq!(exact_coloring_count(path.as_ref(), 1 << 10).unwrap(), 2);
    }

    #[test]
    fn trial_seeds_differ() {
        assert_ne!(trial_seed(0, 0), trial_seed(0, 1));
        assert_eq!(trial_seed(5, 3), trial_seed(5, 3));
    }
}
