use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::jump::{jump_with_rounds, rounds_for};
use super::mean::{quantum_log_mean_relative, relative_mean_copies};
use super::qsample::{overlap_squared_exact, ResourceLedger};
use super::schedule::{generate_schedule_quantum, QuantumScheduleOptions, QUANTUM_C2};
use crate::error::{Error, Result};
use crate::estimator::{EstimateReport, PairedStage, StageDiagnostics};
use crate::models::Spectrum;
use crate::sampling::stream_rng;
use crate::schedule::CoolingSchedule;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantumOptions {
    pub delta: f64,
    /// Relative-variance bound used for every stage mean.
    pub stage_bound: f64,
    pub schedule: QuantumScheduleOptions,
}

impl Default for QuantumOptions {
    fn default() -> Self {
        Self {
            delta: 0.1,
            stage_bound: QUANTUM_C2,
            schedule: QuantumScheduleOptions::default(),
        }
    }
}

/// Prepares one copy of `|μ_{β_j}⟩` by walking `μ_{β_0} → … → μ_{β_j}` with
/// jumps, starting over from `μ_{β_0}` whenever a jump fails.
fn prepare_copy(
    overlaps: &[f64],
    rounds: &[u64],
    j: usize,
    rng: &mut ChaCha8Rng,
    ledger: &mut ResourceLedger,
) {
    'restart: loop {
        for s in 0..j {
            if !jump_with_rounds(overlaps[s], rounds[s], rng, ledger).success {
                continue 'restart;
            }
        }
        return;
    }
}

/// Quantum pipeline: overlap-driven schedule, then relative-error quantum
/// estimates of every `E[V_i]` and `E[W_i]` with error `ε/(2ℓ)` and failure `1/(20ℓ)`.
///
/// The result is a `2ε`-relative estimate of `Z(β_max)/Z(β_min)` with probability at
/// least 4/5. Stage `i` uses RNG streams `2i+1` (for `V_i`) and `2i+2` (for `W_i`).
pub fn estimate_ratio_quantum(
    spectrum: &Spectrum,
    beta_min: f64,
    beta_max: f64,
    epsilon: f64,
    options: &QuantumOptions,
    seed: u64,
) -> Result<EstimateReport> {
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    let stage_eta = |ell: usize| 1.0 / (20.0 * ell as f64);
    if beta_min == beta_max {
        let mut r = EstimateReport::identity(beta_max, epsilon, 0.0, QUANTUM_C2);
        r.ledger = Some(ResourceLedger::default());
        return Ok(r);
    }
    let mut ledger = ResourceLedger::default();
    let mut rng = stream_rng(seed, 0);
    let mut schedule = generate_schedule_quantum(
        spectrum,
        beta_min,
        beta_max,
        options.delta,
        &options.schedule,
        &mut rng,
        &mut ledger,
    )?;
    schedule.seed = Some(seed);
    let (log_q, stages, stage_ledger) = estimate_on_schedule_quantum(spectrum, &schedule, epsilon, options, seed)?;
    ledger.absorb(&stage_ledger);
    let ell = schedule.length();
    Ok(EstimateReport {
        q_hat: log_q.exp(),
        log_q_hat: log_q,
        epsilon,
        eta: stage_eta(ell),
        samples_used: ledger.qsample_copies_consumed,
        schedule_samples: 0,
        samples_per_stage: relative_mean_copies(options.stage_bound, stage_eta(ell)),
        schedule_length: ell,
        schedule,
        stages,
        ledger: Some(ledger),
    })
}

/// Stage estimation of the quantum pipeline on a given schedule.
pub fn estimate_on_schedule_quantum(
    spectrum: &Spectrum,
    schedule: &CoolingSchedule,
    epsilon: f64,
    options: &QuantumOptions,
    seed: u64,
) -> Result<(f64, Vec<StageDiagnostics>, ResourceLedger)> {
    schedule.validate()?;
    let ell = schedule.length();
    if ell == 0 {
        return Ok((0.0, Vec::new(), ResourceLedger::default()));
    }
    let stage_eps = epsilon / (2.0 * ell as f64);
    let stage_eta = 1.0 / (20.0 * ell as f64);
    let betas = &schedule.betas;
    let overlaps: Vec<f64> = betas
        .windows(2)
        .map(|w| overlap_squared_exact(spectrum, w[0], w[1]))
        .collect();
    let transitions = (ell * ell) as f64 * (ell as f64).ln().max(1.0);
    let prep_eta = (1.0 / (20.0 * transitions)).min(0.5);
    let rounds: Vec<u64> = overlaps
        .iter()
        .map(|&a| rounds_for(a.max(1e-12), prep_eta))
        .collect::<Result<_>>()?;
    let copies = relative_mean_copies(options.stage_bound, stage_eta);
    let backend = options.schedule.backend;

    let estimate = |stage_index: usize, at: usize, log_f: &dyn Fn(u32) -> f64, stream: u64| -> Result<(f64, ResourceLedger)> {
        let mut rng = stream_rng(seed, stream);
        let mut ledger = ResourceLedger::default();
        for _ in 0..copies {
            prepare_copy(&overlaps, &rounds, at, &mut rng, &mut ledger);
        }
        let dist = spectrum.energy_distribution(betas[at]);
        let lf: Vec<f64> = (0..dist.len() as u32).map(log_f).collect();
        let v = quantum_log_mean_relative(
            &dist,
            &lf,
            options.stage_bound,
            stage_eps,
            stage_eta,
            &backend,
            &mut rng,
            &mut ledger,
        )
        .map_err(|e| e.at_stage(stage_index))?;
        Ok((v, ledger))
    };

    let results: Vec<((f64, ResourceLedger), (f64, ResourceLedger))> = (0..ell)
        .into_par_iter()
        .map(|i| {
            let stage = PairedStage::new(betas[i], betas[i + 1]);
            let v = estimate(i, i, &|e| stage.log_v(e), 2 * i as u64 + 1)?;
            let w = estimate(i, i + 1, &|e| stage.log_w(e), 2 * i as u64 + 2)?;
            Ok((v, w))
        })
        .collect::<Result<_>>()?;

    let mut ledger = ResourceLedger::default();
    let mut log_q = 0.0;
    let mut stages = Vec::with_capacity(ell);
    for (i, ((lv, lv_ledger), (lw, lw_ledger))) in results.into_iter().enumerate() {
        if lv == f64::NEG_INFINITY || lw == f64::NEG_INFINITY || lv.is_nan() || lw.is_nan() {
            return Err(Error::DegenerateStage { stage: i });
        }
        ledger.absorb(&lv_ledger);
        ledger.absorb(&lw_ledger);
        log_q += lv - lw;
        let stage = PairedStage::new(betas[i], betas[i + 1]);
        stages.push(StageDiagnostics {
            beta_lo: stage.beta_lo,
            beta_hi: stage.beta_hi,
            log_mean_v: lv,
            log_mean_w: lw,
            mean_v: lv.exp(),
            mean_w: lw.exp(),
        });
    }
    Ok((log_q, stages, ledger))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{Graph, IsingModel};

    #[test]
    fn identity_range() {
        let sp = Spectrum::enumerate(&IsingModel::new(Graph::grid(3, 3)), 1 << 10).unwrap();
        let r = estimate_ratio_quantum(&sp, 1.0, 1.0, 0.2, &Default::default(), 0).unwrap();
        assert_eq!(r.q_hat, 1.0);
        assert_eq!(r.ledger.unwrap().reflections_invoked, 0);
    }

    #[test]
    fn grid_estimate_is_close() {
        let sp = Spectrum::enumerate(&IsingModel::new(Graph::grid(3, 3)), 1 << 10).unwrap();
        let q = (512f64).ln();
        let exact = (sp.log_partition(q) - sp.log_partition(0.0)).exp();
        let r = estimate_ratio_quantum(&sp, 0.0, q, 0.2, &Default::default(), 3).unwrap();
        assert!(r.relative_error(exact) <= 0.4, "{} vs {exact}", r.q_hat);
    }
}
