//! Quantum mean estimation for functions with bounded relative second moment.

use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand_chacha::ChaCha8Rng;
use std::f64::consts::PI;

use super::ae::{amplitude_estimate_nondestructive, AeBackend, AeInput, AeMode};
use super::qsample::{rotated_state, ResourceLedger};
use crate::error::{Error, Result};
use crate::numeric::{log_sum_exp, median};

/// Level count `k` and phase-estimation parameter `t` for second-moment bound `B` and error `ε`.
///
/// `k` starts at `⌈ln(2B/ε)⌉` and grows until the dropped tail `B/2^k` is at most `ε/2`.
pub fn second_moment_parameters(b: f64, epsilon: f64) -> (u32, u64) {
    let log_term = (2.0 * b / epsilon).ln();
    let mut k = log_term.ceil().max(0.0) as u32;
    while b / 2f64.powi(k as i32) > epsilon / 2.0 {
        k += 1;
    }
    let t1 = 4.0 * PI * b.sqrt() / epsilon;
    let t2 = 8.0 * PI * (b.sqrt() * log_term.max(0.0).sqrt() + 1.0) / epsilon;
    (k, t1.max(t2).ceil() as u64)
}

/// Level of a value: 0 for `f < 1`, `ℓ` for `2^{ℓ−1} ≤ f < 2^ℓ`; `None` above level `k`.
pub fn level_of(f: f64, k: u32) -> Option<u32> {
    if f < 1.0 {
        return Some(0);
    }
    let mut level = f.log2().floor().max(0.0) as i32 + 1;
    while level > 1 && 2f64.powi(level - 1) > f {
        level -= 1;
    }
    while f >= 2f64.powi(level) {
        level += 1;
    }
    let level = level as u32;
    (level <= k).then_some(level)
}

fn check_args(dist: &[f64], len: usize, epsilon: f64, eta: f64) -> Result<()> {
    if dist.len() != len {
        return Err(Error::InvalidArgument("distribution and function lengths differ".into()));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(Error::InvalidArgument(format!("epsilon must lie in (0, 1), got {epsilon}")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!("eta must lie in (0, 1), got {eta}")));
    }
    Ok(())
}

/// Additive `ε` estimate of `Σ D(x)f(x)` when `Σ D(x)f(x)² ≤ B`.
///
/// Splits the domain into dyadic levels of `f`, estimates each rescaled level mean
/// with amplitude estimation (failure `η/(k+1)` each) and recombines them. Uses one
/// copy of the qsample, which is restored unless an amplitude estimation fails to
/// hand it back.
#[allow(clippy::too_many_arguments)]
pub fn quantum_mean_bounded_second_moment(
    dist: &[f64],
    f: &[f64],
    b: f64,
    epsilon: f64,
    eta: f64,
    backend: &AeBackend,
    rng: &mut ChaCha8Rng,
    ledger: &mut ResourceLedger,
) -> Result<f64> {
    check_args(dist, f.len(), epsilon, eta)?;
    if b.is_nan() || b <= 0.0 {
        return Err(Error::InvalidArgument(format!("B must be positive, got {b}")));
    }
    if f.iter().any(|v| v.is_nan() || *v < 0.0) {
        return Err(Error::InvalidArgument("function values must be nonnegative".into()));
    }
    let (k, t) = second_moment_parameters(b, epsilon);
    let levels: Vec<Option<u32>> = f.iter().map(|&v| level_of(v, k)).collect();
    let level_eta = eta / f64::from(k + 1);
    ledger.charge_copies(1);
    let mut restored = true;
    let mut estimate = 0.0;
    for level in 0..=k {
        let scale = 2f64.powi(level as i32);
        let fl: Vec<f64> = f
            .iter()
            .zip(&levels)
            .map(|(&v, &l)| if l == Some(level) { (v / scale).min(1.0) } else { 0.0 })
            .collect();
        let outcome = match backend.mode {
            AeMode::Analytic => {
                let p: f64 = dist.iter().zip(&fl).map(|(d, v)| d * v).sum();
                amplitude_estimate_nondestructive(AeInput::Probability(p), t, level_eta, backend, rng, ledger)?
            }
            AeMode::Statevector => {
                let (psi, projector) = rotated_state(dist, &fl)?;
                amplitude_estimate_nondestructive(
                    AeInput::State {
                        psi: &psi,
                        projector: &projector,
                    },
                    t,
                    level_eta,
                    backend,
                    rng,
                    ledger,
                )?
            }
        };
        restored &= outcome.restored;
        estimate += scale * outcome.p_hat;
    }
    if restored {
        ledger.record_restored();
    }
    Ok(estimate)
}

/// `⌊16B·ln(2/η)⌋ + 1`: measured copies for the rough estimate plus the one used coherently.
pub fn relative_mean_copies(b: f64, eta: f64) -> u64 {
    measured_copies(b, eta) + 1
}

fn measured_copies(b: f64, eta: f64) -> u64 {
    (16.0 * b * (2.0 / eta).ln()).floor() as u64
}

/// Number of median batches for the rough estimate, `⌈ln(2/η)⌉`.
pub fn rough_batches(eta: f64) -> u64 {
    ((2.0 / eta).ln().ceil() as u64).max(1)
}

/// Log of the median-of-batch-means rough estimate from measured copies.
pub fn rough_log_estimate(dist: &[f64], log_f: &[f64], b: f64, eta: f64, rng: &mut ChaCha8Rng) -> Result<f64> {
    let sampler = WeightedIndex::new(dist)
        .map_err(|e| Error::InvalidArgument(format!("invalid distribution: {e}")))?;
    let total = measured_copies(b, eta);
    let batches = rough_batches(eta).min(total.max(1));
    let (base, extra) = (total / batches, total % batches);
    let mut batch_logs = Vec::with_capacity(batches as usize);
    for batch in 0..batches {
        let size = base + u64::from(batch < extra);
        if size == 0 {
            continue;
        }
        let draws: Vec<f64> = (0..size).map(|_| log_f[sampler.sample(rng)]).collect();
        batch_logs.push(log_sum_exp(draws.iter().copied()) - (size as f64).ln());
    }
    Ok(median(&batch_logs))
}

/// Log of an `ε`-relative estimate of `μ = Σ D(x)e^{log_f(x)}` when `E[f²]/μ² ≤ B`.
///
/// Stage one measures `⌊16B·ln(2/η)⌋` copies for a constant-factor estimate `μ̃`;
/// stage two runs [`quantum_mean_bounded_second_moment`] on `f/μ̃` with bound `4B`,
/// error `ε/2` and failure `η/2`.
#[allow(clippy::too_many_arguments)]
pub fn quantum_log_mean_relative(
    dist: &[f64],
    log_f: &[f64],
    b: f64,
    epsilon: f64,
    eta: f64,
    backend: &AeBackend,
    rng: &mut ChaCha8Rng,
    ledger: &mut ResourceLedger,
) -> Result<f64> {
    check_args(dist, log_f.len(), epsilon, eta)?;
    if b.is_nan() || b < 1.0 {
        return Err(Error::InvalidArgument(format!("B must be at least 1, got {b}")));
    }
    let log_rough = rough_log_estimate(dist, log_f, b, eta, rng)?;
    ledger.charge_copies(measured_copies(b, eta));
    if log_rough == f64::NEG_INFINITY {
        return Err(Error::DegenerateFunction);
    }
    let f_res: Vec<f64> = dist
        .iter()
        .zip(log_f)
        .map(|(&d, &lf)| if d > 0.0 { (lf - log_rough).exp() } else { 0.0 })
        .collect();
    let mu_res =
        quantum_mean_bounded_second_moment(dist, &f_res, 4.0 * b, epsilon / 2.0, eta / 2.0, backend, rng, ledger)?;
    Ok(log_rough + mu_res.ln())
}

#[allow(clippy::too_many_arguments)]
pub fn quantum_mean_relative(
    dist: &[f64],
    f: &[f64],
    b: f64,
    epsilon: f64,
    eta: f64,
    backend: &AeBackend,
    rng: &mut ChaCha8Rng,
    ledger: &mut ResourceLedger,
) -> Result<f64> {
    let log_f: Vec<f64> = f.iter().map(|v| v.ln()).collect();
    Ok(quantum_log_mean_relative(dist, &log_f, b, epsilon, eta, backend, rng, ledger)?.exp())
}
