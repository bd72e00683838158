use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::ae::{amplitude_estimate_nondestructive, t_for_additive_error, AeBackend, AeInput, AeMode};
use super::jump::{jump_with_overlap, DEFAULT_MIN_OVERLAP};
use super::qsample::{overlap_squared_exact, prepare_qsample_from_spectrum, Projector, ResourceLedger};
use crate::error::{Error, Result};
use crate::models::Spectrum;
use crate::schedule::{
    balanced_length_bound, binary_search, push_extension, trivial_schedule, AssumptionGates, CoolingSchedule,
    MoveRecord, MoveTag,
};

/// Slowly-varying constant guaranteed by the quantum generator.
pub const QUANTUM_C2: f64 = 15.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct QuantumScheduleOptions {
    pub backend: AeBackend,
    /// Overlap threshold of the binary-search predicate.
    pub overlap_threshold: f64,
    /// Additive error of each overlap estimate.
    pub additive_error: f64,
    /// Smallest overlap a jump accepts.
    pub min_overlap: f64,
    pub strict_gates: bool,
}

impl Default for QuantumScheduleOptions {
    fn default() -> Self {
        Self {
            backend: AeBackend::default(),
            overlap_threshold: 0.075,
            additive_error: 0.005,
            min_overlap: DEFAULT_MIN_OVERLAP,
            strict_gates: false,
        }
    }
}

/// Overlap-driven schedule generator.
///
/// From `β_k`, bisects on `f_o(β) ≥ 0.075` over `[β_k, min(β_max, q)]` where `f_o`
/// is an amplitude estimate of `|⟨μ_{β_k}|μ_β⟩|²`, then jumps the qsample to the
/// chosen temperature. Every amplitude estimation gets failure
/// `δ/(4√(q ln n)(ln β_max + ln n))`; every jump gets `(δ/2)/√(q ln n)`.
pub fn generate_schedule_quantum(
    spectrum: &Spectrum,
    beta_min: f64,
    beta_max: f64,
    delta: f64,
    options: &QuantumScheduleOptions,
    rng: &mut ChaCha8Rng,
    ledger: &mut ResourceLedger,
) -> Result<CoolingSchedule> {
    if !(delta > 0.0 && delta < 1.0) {
        return Err(Error::InvalidArgument(format!("delta must lie in (0, 1), got {delta}")));
    }
    let n = spectrum.max_energy();
    let q = (spectrum.state_count() as f64).ln();
    if let Some(s) = trivial_schedule(beta_min, beta_max, q, QUANTUM_C2)? {
        return Ok(s);
    }
    AssumptionGates::evaluate(n, q).enforce(options.strict_gates)?;

    let target = beta_max.min(q);
    let ln_n = f64::from(n).ln();
    let length_bound = balanced_length_bound(n, q);
    let ae_eta = (delta / (4.0 * length_bound * (target.ln() + ln_n)).max(1.0)).min(0.5);
    let jump_eta = ((delta / 2.0) / length_bound.max(1.0)).min(0.5);
    let t = t_for_additive_error(options.additive_error);
    let alpha = 1.0 / (2.0 * f64::from(n));

    let mut betas = vec![beta_min];
    let mut moves: Vec<MoveRecord> = Vec::new();
    let mut current = beta_min;
    while current < target {
        let from = current;
        let from_state = (options.backend.mode == AeMode::Statevector)
            .then(|| prepare_qsample_from_spectrum(spectrum, from));
        let search = binary_search(
            |beta| {
                let p_hat = match &from_state {
                    None => {
                        let p = overlap_squared_exact(spectrum, from, beta);
                        amplitude_estimate_nondestructive(
                            AeInput::Probability(p),
                            t,
                            ae_eta,
                            &options.backend,
                            rng,
                            ledger,
                        )?
                        .p_hat
                    }
                    Some(psi) => {
                        let other = prepare_qsample_from_spectrum(spectrum, beta);
                        let projector = Projector::RankOne(other.amplitudes().to_vec());
                        amplitude_estimate_nondestructive(
                            AeInput::State {
                                psi: psi.amplitudes(),
                                projector: &projector,
                            },
                            t,
                            ae_eta,
                            &options.backend,
                            rng,
                            ledger,
                        )?
                        .p_hat
                    }
                };
                Ok(p_hat >= options.overlap_threshold)
            },
            from,
            target,
            alpha,
        );
        let next = match search {
            Ok(o) => o.value,
            Err(e) => {
                return Err(Error::ScheduleFailure {
                    reason: format!("overlap search from β = {from}: {e}"),
                    move_log: moves,
                })
            }
        };
        if next <= from {
            return Err(Error::ScheduleFailure {
                reason: format!("step from β = {from} made no progress"),
                move_log: moves,
            });
        }
        let a = overlap_squared_exact(spectrum, from, next);
        jump_with_overlap(a, jump_eta, options.min_overlap, rng, ledger)?;
        moves.push(MoveRecord {
            tag: if next < target {
                MoveTag::OverlapCapped
            } else {
                MoveTag::Long
            },
            interval: None,
            from,
            to: next,
        });
        betas.push(next);
        current = next;
    }

    let length = betas.len() - 1;
    if length as f64 > length_bound {
        return Err(Error::ScheduleFailure {
            reason: format!("length {length} exceeds √(q ln n) = {length_bound:.3}"),
            move_log: moves,
        });
    }
    let mut schedule = CoolingSchedule {
        betas,
        moves,
        c2: QUANTUM_C2,
        seed: None,
        samples_used: 0,
    };
    push_extension(&mut schedule, beta_max);
    Ok(schedule)
}
