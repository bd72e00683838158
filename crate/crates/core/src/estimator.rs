//! Classical estimation of `Q = Z(β_max)/Z(β_min)` with the paired-product estimator.
//!
//! For a stage `β_i < β_{i+1}` with midpoint `β̄` and semi-distance `d`:
//! `V_i = e^{−d·H(x)}` with `x ∼ μ_{β_i}` has mean `Z(β̄)/Z(β_i)`, and
//! `W_i = e^{+d·H(y)}` with `y ∼ μ_{β_{i+1}}` has mean `Z(β̄)/Z(β_{i+1})`.
//! Hence `∏E[V_i] / ∏E[W_i] = Z(β_max)/Z(β_min)`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Hamiltonian, Spectrum};
use crate::numeric::{log_sum_exp, midpoint, scaled_energy, serde_beta};
use crate::qsim::ResourceLedger;
use crate::sampling::{GibbsSampler, SamplerFactory};
use crate::schedule::{generate_schedule_classical, ClassicalScheduleOptions, CoolingSchedule};

/// Second-moment bound used for every paired stage of a `2·10⁵`-slowly-varying schedule.
pub const CLASSICAL_STAGE_BOUND: f64 = 2.0e5;

/// `Z(2β_max − β_min)·Z(β_min)/Z(β_max)²`: relative variance of the one-shot estimator.
pub fn relative_variance_naive<H: Hamiltonian + ?Sized>(
    h: &H,
    beta_min: f64,
    beta_max: f64,
    cap: u64,
) -> Result<f64> {
    let far = 2.0 * beta_max - beta_min;
    if !far.is_finite() || beta_min > beta_max || beta_min < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "naive relative variance needs finite 0 <= beta_min <= beta_max, got [{beta_min}, {beta_max}]"
        )));
    }
    let spectrum = Spectrum::enumerate(h, cap)?;
    Ok(
        (spectrum.log_partition(far) + spectrum.log_partition(beta_min)
            - 2.0 * spectrum.log_partition(beta_max))
        .exp(),
    )
}

/// One stage of the paired estimator.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedStage {
    #[serde(with = "serde_beta")]
    pub beta_lo: f64,
    #[serde(with = "serde_beta")]
    pub beta_hi: f64,
    #[serde(with = "serde_beta")]
    pub midpoint: f64,
    #[serde(with = "serde_beta")]
    pub semi_distance: f64,
}

impl PairedStage {
    pub fn new(beta_lo: f64, beta_hi: f64) -> Self {
        let semi_distance = if beta_hi.is_infinite() {
            f64::INFINITY
        } else {
            0.5 * (beta_hi - beta_lo)
        };
        Self {
            beta_lo,
            beta_hi,
            midpoint: midpoint(beta_lo, beta_hi),
            semi_distance,
        }
    }

    /// `ln V = −d·E`.
    pub fn log_v(&self, energy: u32) -> f64 {
        -scaled_energy(self.semi_distance, energy)
    }

    /// `ln W = +d·E`.
    pub fn log_w(&self, energy: u32) -> f64 {
        scaled_energy(self.semi_distance, energy)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedSampleSpec {
    pub schedule: CoolingSchedule,
    pub stages: Vec<PairedStage>,
}

impl PairedSampleSpec {
    pub fn new(schedule: &CoolingSchedule) -> Result<Self> {
        schedule.validate()?;
        let stages = schedule
            .betas
            .windows(2)
            .map(|w| PairedStage::new(w[0], w[1]))
            .collect();
        Ok(Self {
            schedule: schedule.clone(),
            stages,
        })
    }
}

/// Multiset of log sample values, stored as `(ln value, multiplicity)` pairs.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LogSampleSet {
    entries: Vec<(f64, u64)>,
}

impl LogSampleSet {
    pub fn from_values(values: &[f64]) -> Self {
        Self::from_log_values(values.iter().map(|v| v.ln()))
    }

    pub fn from_log_values(values: impl IntoIterator<Item = f64>) -> Self {
        Self {
            entries: values.into_iter().map(|v| (v, 1)).collect(),
        }
    }

    /// Applies `log_value` to every occupied level of an energy histogram.
    pub fn from_histogram(histogram: &[u64], log_value: impl Fn(u32) -> f64) -> Self {
        Self {
            entries: histogram
                .iter()
                .enumerate()
                .filter(|(_, &c)| c > 0)
                .map(|(e, &c)| (log_value(e as u32), c))
                .collect(),
        }
    }

    pub fn len(&self) -> u64 {
        self.entries.iter().map(|e| e.1).sum()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn entries(&self) -> &[(f64, u64)] {
        &self.entries
    }

    /// Log of the arithmetic mean.
    pub fn log_mean(&self) -> f64 {
        let total = self.len();
        if total == 0 {
            return f64::NAN;
        }
        log_sum_exp(self.entries.iter().map(|&(v, c)| v + (c as f64).ln())) - (total as f64).ln()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairedStageSamples {
    pub v: LogSampleSet,
    pub w: LogSampleSet,
}

/// Draws `m_per_stage` values of `V_i` (at `β_i`) and of `W_i` (at `β_{i+1}`) for every stage.
pub fn draw_paired_samples(
    spec: &PairedSampleSpec,
    sampler: &mut dyn GibbsSampler,
    m_per_stage: u64,
) -> Result<Vec<PairedStageSamples>> {
    spec.stages
        .iter()
        .map(|stage| draw_stage(stage, sampler, m_per_stage, m_per_stage))
        .collect()
}

fn draw_stage(
    stage: &PairedStage,
    sampler: &mut dyn GibbsSampler,
    m_v: u64,
    m_w: u64,
) -> Result<PairedStageSamples> {
    let hv = sampler.energy_histogram(stage.beta_lo, m_v)?;
    let hw = sampler.energy_histogram(stage.beta_hi, m_w)?;
    Ok(PairedStageSamples {
        v: LogSampleSet::from_histogram(&hv, |e| stage.log_v(e)),
        w: LogSampleSet::from_histogram(&hw, |e| stage.log_w(e)),
    })
}

/// `m = ⌈2Bℓ/(ηε²)⌉`.
pub fn dyer_frieze_plan(b: f64, ell: usize, eta: f64, epsilon: f64) -> u64 {
    assert!(b > 0.0, "B must be positive");
    assert!(eta > 0.0 && eta <= 1.0 && epsilon > 0.0 && epsilon <= 1.0);
    (2.0 * b * ell as f64 / (eta * epsilon * epsilon)).ceil() as u64
}

/// Log of the product of stage sample means.
pub fn log_product_mean_estimate(stages: &[LogSampleSet]) -> Result<f64> {
    let mut total = 0.0;
    for (i, s) in stages.iter().enumerate() {
        if s.is_empty() {
            return Err(Error::InvalidArgument(format!("stage {i} has no samples")));
        }
        let m = s.log_mean();
        if m == f64::NEG_INFINITY {
            return Err(Error::DegenerateStage { stage: i });
        }
        total += m;
    }
    Ok(total)
}

pub fn product_mean_estimate(stages: &[LogSampleSet]) -> Result<f64> {
    Ok(log_product_mean_estimate(stages)?.exp())
}

/// Exact stage quantities computed from an enumerated spectrum.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ExactStage {
    /// `ln E[V_i] = ln Z(β̄) − ln Z(β_i)`.
    pub log_mean_v: f64,
    /// `ln E[W_i] = ln Z(β̄) − ln Z(β_{i+1})`.
    pub log_mean_w: f64,
    pub relvar_v: f64,
    pub relvar_w: f64,
    /// Relative variance of the one-sided `X_i = e^{−(β_{i+1}−β_i)H}` at `β_i`.
    pub relvar_x: f64,
}

/// Relative variances from explicit first and second moments over the energy levels.
pub fn exact_stage(spectrum: &Spectrum, beta_lo: f64, beta_hi: f64) -> ExactStage {
    let stage = PairedStage::new(beta_lo, beta_hi);
    let at_lo = spectrum.energy_distribution(beta_lo);
    let at_hi = spectrum.energy_distribution(beta_hi);
    let full = if beta_hi.is_infinite() {
        f64::INFINITY
    } else {
        beta_hi - beta_lo
    };
    let moments = |dist: &[f64], log_f: &dyn Fn(u32) -> f64| -> (f64, f64) {
        let lm = log_sum_exp(
            dist.iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(e, &p)| p.ln() + log_f(e as u32)),
        );
        let l2 = log_sum_exp(
            dist.iter()
                .enumerate()
                .filter(|(_, &p)| p > 0.0)
                .map(|(e, &p)| p.ln() + 2.0 * log_f(e as u32)),
        );
        (lm, (l2 - 2.0 * lm).exp())
    };
    let (log_mean_v, relvar_v) = moments(&at_lo, &|e| stage.log_v(e));
    let (log_mean_w, relvar_w) = moments(&at_hi, &|e| stage.log_w(e));
    let (_, relvar_x) = moments(&at_lo, &|e| -scaled_energy(full, e));
    ExactStage {
        log_mean_v,
        log_mean_w,
        relvar_v,
        relvar_w,
        relvar_x,
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageDiagnostics {
    #[serde(with = "serde_beta")]
    pub beta_lo: f64,
    #[serde(with = "serde_beta")]
    pub beta_hi: f64,
    pub log_mean_v: f64,
    pub log_mean_w: f64,
    pub mean_v: f64,
    pub mean_w: f64,
}

impl StageDiagnostics {
    fn new(stage: &PairedStage, log_mean_v: f64, log_mean_w: f64) -> Self {
        Self {
            beta_lo: stage.beta_lo,
            beta_hi: stage.beta_hi,
            log_mean_v,
            log_mean_w,
            mean_v: log_mean_v.exp(),
            mean_w: log_mean_w.exp(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub q_hat: f64,
    pub log_q_hat: f64,
    pub epsilon: f64,
    pub eta: f64,
    /// Gibbs samples drawn by the estimation phase.
    pub samples_used: u64,
    /// Gibbs samples drawn while building the schedule.
    pub schedule_samples: u64,
    pub samples_per_stage: u64,
    pub schedule_length: usize,
    pub schedule: CoolingSchedule,
    pub stages: Vec<StageDiagnostics>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub ledger: Option<ResourceLedger>,
}

impl EstimateReport {
    pub(crate) fn identity(beta: f64, epsilon: f64, eta: f64, c2: f64) -> Self {
        Self {
            q_hat: 1.0,
            log_q_hat: 0.0,
            epsilon,
            eta,
            samples_used: 0,
            schedule_samples: 0,
            samples_per_stage: 0,
            schedule_length: 0,
            schedule: CoolingSchedule {
                betas: vec![beta],
                moves: Vec::new(),
                c2,
                seed: None,
                samples_used: 0,
            },
            stages: Vec::new(),
            ledger: None,
        }
    }

    pub fn relative_error(&self, exact: f64) -> f64 {
        (self.q_hat / exact - 1.0).abs()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ClassicalOptions {
    /// Failure probability of schedule generation.
    pub delta: f64,
    /// Failure probability of each of the two product estimates.
    pub eta: f64,
    pub stage_bound: f64,
    /// Overrides the planned number of samples per stage.
    pub samples_per_stage: Option<u64>,
    pub schedule: ClassicalScheduleOptions,
}

impl Default for ClassicalOptions {
    fn default() -> Self {
        Self {
            delta: 0.1,
            eta: 0.05,
            stage_bound: CLASSICAL_STAGE_BOUND,
            samples_per_stage: None,
            schedule: ClassicalScheduleOptions::default(),
        }
    }
}

/// Estimates the ratio on a fixed schedule with `m` samples per stage and product.
///
/// Stage `i` draws its `V` samples from sampler stream `2i+1` and its `W` samples
/// from stream `2i+2`, in parallel.
pub fn estimate_on_schedule<H: Hamiltonian + 'static>(
    factory: &SamplerFactory<H>,
    schedule: &CoolingSchedule,
    m: u64,
) -> Result<(f64, Vec<StageDiagnostics>)> {
    let spec = PairedSampleSpec::new(schedule)?;
    let means: Vec<(f64, f64)> = spec
        .stages
        .par_iter()
        .enumerate()
        .map(|(i, stage)| -> Result<(f64, f64)> {
            let mut sv = factory.sampler(2 * i as u64 + 1)?;
            let mut sw = factory.sampler(2 * i as u64 + 2)?;
            let v = LogSampleSet::from_histogram(&sv.energy_histogram(stage.beta_lo, m)?, |e| stage.log_v(e));
            let w = LogSampleSet::from_histogram(&sw.energy_histogram(stage.beta_hi, m)?, |e| stage.log_w(e));
            let (lv, lw) = (v.log_mean(), w.log_mean());
            if lv == f64::NEG_INFINITY {
                return Err(Error::DegenerateStage { stage: i });
            }
            Ok((lv, lw))
        })
        .collect::<Result<_>>()?;
    let log_q: f64 = means.iter().map(|(v, w)| v - w).sum();
    let diagnostics = spec
        .stages
        .iter()
        .zip(&means)
        .map(|(s, &(v, w))| StageDiagnostics::new(s, v, w))
        .collect();
    Ok((log_q, diagnostics))
}

/// Full classical pipeline: adaptive schedule, then paired-product estimation with
/// `ε̄ = ε/3` and the Dyer–Frieze sample count for each of the two products.
pub fn estimate_ratio_classical<H: Hamiltonian + 'static>(
    factory: &SamplerFactory<H>,
    beta_min: f64,
    beta_max: f64,
    epsilon: f64,
    options: &ClassicalOptions,
) -> Result<EstimateReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if beta_min == beta_max {
        return Ok(EstimateReport::identity(beta_max, epsilon, options.eta, options.stage_bound));
    }
    let h = factory.hamiltonian();
    let mut schedule_sampler = factory.sampler(0)?;
    let mut schedule = generate_schedule_classical(
        h.as_ref(),
        beta_min,
        beta_max,
        options.delta,
        schedule_sampler.as_mut(),
        &options.schedule,
    )?;
    schedule.seed = Some(factory.config().seed);
    let ell = schedule.length();
    let m = options
        .samples_per_stage
        .unwrap_or_else(|| dyer_frieze_plan(options.stage_bound, ell, options.eta, epsilon / 3.0));
    let (log_q, stages) = estimate_on_schedule(factory, &schedule, m)?;
    Ok(EstimateReport {
        q_hat: log_q.exp(),
        log_q_hat: log_q,
        epsilon,
        eta: options.eta,
        samples_used: 2 * ell as u64 * m,
        schedule_samples: schedule.samples_used,
        samples_per_stage: m,
        schedule_length: ell,
        schedule,
        stages,
        ledger: None,
    })
}

/// Baseline: telescoping product of one-sided ratios `X_i = e^{−(β_{i+1}−β_i)H}` at `β_i`.
pub fn estimate_ratio_product(
    schedule: &CoolingSchedule,
    sampler: &mut dyn GibbsSampler,
    m_per_stage: u64,
) -> Result<f64> {
    schedule.validate()?;
    let mut sets = Vec::with_capacity(schedule.length());
    for w in schedule.betas.windows(2) {
        let full = if w[1].is_infinite() { f64::INFINITY } else { w[1] - w[0] };
        let hist = sampler.energy_histogram(w[0], m_per_stage)?;
        sets.push(LogSampleSet::from_histogram(&hist, |e| -scaled_energy(full, e)));
    }
    product_mean_estimate(&sets)
}

/// Baseline: single-stage estimate of `Z(β_max)/Z(β_min)` from samples at `β_min`.
pub fn estimate_ratio_naive(
    beta_min: f64,
    beta_max: f64,
    sampler: &mut dyn GibbsSampler,
    m: u64,
) -> Result<f64> {
    let schedule = CoolingSchedule {
        betas: vec![beta_min, beta_max],
        moves: Vec::new(),
        c2: f64::INFINITY,
        seed: None,
        samples_used: 0,
    };
    estimate_ratio_product(&schedule, sampler, m)
}
