//! Preparing one qsample from another by alternating projective measurements.
//!
//! Everything happens in the plane spanned by the two states, so the process is
//! a four-state Markov chain over `{φ, φ⊥, ψ, ψ⊥}` driven by `a = |⟨φ|ψ⟩|²`.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use super::qsample::{overlap_squared, QSample, ResourceLedger};
use crate::error::{Error, Result};

/// Default lower bound on the overlap accepted by [`jump_by_measurement`].
pub const DEFAULT_MIN_OVERLAP: f64 = 1.0 / 15.0;

/// Reflections charged per projective measurement.
pub const REFLECTIONS_PER_MEASUREMENT: u64 = 2;

/// Probability of still missing the target after `2k+1` measurements:
/// `(1−a)(a² + (1−a)²)^k`.
pub fn jump_failure_probability(a: f64, k: u64) -> f64 {
    let a = a.clamp(0.0, 1.0);
    (1.0 - a) * (a * a + (1.0 - a) * (1.0 - a)).powf(k as f64)
}

/// Smallest `k` whose failure probability is at most `eta`.
pub fn rounds_for(a: f64, eta: f64) -> Result<u64> {
    if a.is_nan() || a <= 0.0 {
        return Err(Error::Precondition(format!("overlap {a} must be positive")));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!("eta must lie in (0, 1), got {eta}")));
    }
    if jump_failure_probability(a, 0) <= eta {
        return Ok(0);
    }
    let factor = a * a + (1.0 - a) * (1.0 - a);
    let mut k = ((eta / (1.0 - a)).ln() / factor.ln()).ceil().max(0.0) as u64;
    while k > 0 && jump_failure_probability(a, k - 1) <= eta {
        k -= 1;
    }
    while jump_failure_probability(a, k) > eta {
        k += 1;
    }
    Ok(k)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct JumpOutcome {
    pub success: bool,
    pub measurements: u64,
}

/// Simulates at most `2k+1` measurements starting from `φ`, stopping at the first
/// `ψ` outcome.
pub fn jump_with_rounds(a: f64, k: u64, rng: &mut ChaCha8Rng, ledger: &mut ResourceLedger) -> JumpOutcome {
    let a = a.clamp(0.0, 1.0);
    let mut measurements = 1;
    let mut success = rng.random::<f64>() < a;
    let mut round = 0;
    while !success && round < k {
        // From ψ⊥, measuring {P_φ, P_φ⊥} lands on φ with probability 1−a.
        let on_phi = rng.random::<f64>() < 1.0 - a;
        // Then {P_ψ, P_ψ⊥}: from φ success is a, from φ⊥ it is 1−a.
        let p = if on_phi { a } else { 1.0 - a };
        success = rng.random::<f64>() < p;
        measurements += 2;
        round += 1;
    }
    ledger.charge_reflections(REFLECTIONS_PER_MEASUREMENT * measurements);
    JumpOutcome {
        success,
        measurements,
    }
}

/// Moves from `current` to `target` with failure probability at most `eta`.
pub fn jump_by_measurement(
    current: &QSample,
    target: &QSample,
    eta: f64,
    min_overlap: f64,
    rng: &mut ChaCha8Rng,
    ledger: &mut ResourceLedger,
) -> Result<QSample> {
    let a = overlap_squared(current, target);
    jump_with_overlap(a, eta, min_overlap, rng, ledger)?;
    Ok(target.clone())
}

/// [`jump_by_measurement`] when only the overlap is needed.
pub fn jump_with_overlap(
    a: f64,
    eta: f64,
    min_overlap: f64,
    rng: &mut ChaCha8Rng,
    ledger: &mut ResourceLedger,
) -> Result<JumpOutcome> {
    if a < min_overlap {
        return Err(Error::Precondition(format!(
            "overlap {a:.4} is below the jump threshold {min_overlap:.4}"
        )));
    }
    let k = rounds_for(a, eta)?;
    let out = jump_with_rounds(a, k, rng, ledger);
    if out.success {
        Ok(out)
    } else {
        Err(Error::JumpFailure {
            measurements: out.measurements,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::stream_rng;

    #[test]
    fn identical_states_jump_immediately() {
        let mut rng = stream_rng(0, 0);
        let mut ledger = ResourceLedger::default();
        let out = jump_with_overlap(1.0, 0.01, DEFAULT_MIN_OVERLAP, &mut rng, &mut ledger).unwrap();
        assert_eq!(out.measurements, 1);
        assert_eq!(rounds_for(1.0, 0.01).unwrap(), 0);
        assert_eq!(ledger.reflections_invoked, REFLECTIONS_PER_MEASUREMENT);
    }

    #[test]
    fn failure_law_values() {
        let a = 1.0 / 15.0;
        let direct = (14.0 / 15.0) * ((1.0f64 / 15.0).powi(2) + (14.0f64 / 15.0).powi(2)).powi(3);
        assert!((jump_failure_probability(a, 3) - direct).abs() < 1e-15);
        assert!((direct - 0.626452).abs() < 1e-6);
        for k in 0..20 {
            assert!(jump_failure_probability(a, k + 1) < jump_failure_probability(a, k));
        }
    }

    #[test]
    fn rounds_are_minimal() {
        for &a in &[0.07, 0.2, 0.5, 0.9] {
            for &eta in &[0.3, 0.05, 1e-4] {
                let k = rounds_for(a, eta).unwrap();
                assert!(jump_failure_probability(a, k) <= eta);
                if k > 0 {
                    assert!(jump_failure_probability(a, k - 1) > eta);
                }
            }
        }
    }

    #[test]
    fn below_threshold_is_rejected() {
        let mut rng = stream_rng(0, 1);
        let mut ledger = ResourceLedger::default();
        assert!(matches!(
            jump_with_overlap(0.01, 0.1, DEFAULT_MIN_OVERLAP, &mut rng, &mut ledger),
            Err(Error::Precondition(_))
        ));
    }
}
