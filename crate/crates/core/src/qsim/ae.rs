//! Non-destructive amplitude estimation.
//!
//! Phase estimation on the Grover operator `G = R_ψ(I − 2P)` with `M` grid
//! points, whose eigenphases are `±θ/π` for `sin²θ = ⟨ψ|P|ψ⟩`. The analytic
//! backend samples the known outcome law
//! `P(y) = ½F(θ/π − y/M) + ½F(−θ/π − y/M)`, `F(x) = sin²(Mπx)/(M² sin²(πx))`;
//! the statevector backend builds the register explicitly.

use num_complex::Complex64;
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use super::qsample::{inner, reflect_about, Projector, ResourceLedger};
use crate::error::{Error, Result};
use crate::numeric::median;

/// Largest `dimension · 2^b` the statevector backend accepts by default.
pub const DEFAULT_SIMULATION_CAP: u64 = 1 << 22;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AeMode {
    #[default]
    Analytic,
    Statevector,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AeBackend {
    pub mode: AeMode,
    /// Phase register size for the statevector backend; `⌈log₂ t⌉` when absent.
    pub phase_bits: Option<u32>,
    pub simulation_cap: u64,
}

impl Default for AeBackend {
    fn default() -> Self {
        Self {
            mode: AeMode::Analytic,
            phase_bits: None,
            simulation_cap: DEFAULT_SIMULATION_CAP,
        }
    }
}

impl AeBackend {
    pub fn analytic() -> Self {
        Self::default()
    }

    pub fn statevector(phase_bits: Option<u32>) -> Self {
        Self {
            mode: AeMode::Statevector,
            phase_bits,
            ..Self::default()
        }
    }

    /// Number of phase grid points used for parameter `t`.
    pub fn grid_points(&self, t: u64) -> u64 {
        match self.mode {
            AeMode::Analytic => t.max(1),
            AeMode::Statevector => 1u64 << self.phase_bits_for(t),
        }
    }

    fn phase_bits_for(&self, t: u64) -> u32 {
        self.phase_bits
            .unwrap_or_else(|| 64 - t.max(1).saturating_sub(1).leading_zeros())
    }

    pub fn validate(&self) -> Result<()> {
        if self.phase_bits == Some(0) || self.phase_bits.is_some_and(|b| b > 30) {
            return Err(Error::config("ae.phase_bits", "must lie in 1..=30"));
        }
        Ok(())
    }
}

/// What amplitude estimation acts on.
#[derive(Debug, Clone, Copy)]
pub enum AeInput<'a> {
    /// Only `p = ⟨ψ|P|ψ⟩` is known; enough for the analytic backend.
    Probability(f64),
    State { psi: &'a [f64], projector: &'a Projector },
}

impl AeInput<'_> {
    pub fn probability(&self) -> f64 {
        match *self {
            AeInput::Probability(p) => p,
            AeInput::State { psi, projector } => projector.expectation(psi),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AeOutcome {
    pub p_hat: f64,
    pub restored: bool,
    pub runs: u64,
}

/// `2π√(p(1−p))/t + π²/t²`.
pub fn additive_error_bound(p: f64, t: f64) -> f64 {
    2.0 * PI * (p * (1.0 - p)).max(0.0).sqrt() / t + PI * PI / (t * t)
}

/// Smallest integer `t` with `π/t + π²/t² ≤ ε`, which bounds the error for every `p`.
pub fn t_for_additive_error(epsilon: f64) -> u64 {
    assert!(epsilon > 0.0);
    (PI * (1.0 + (1.0 + 4.0 * epsilon).sqrt()) / (2.0 * epsilon)).ceil() as u64
}

/// Odd `r ≥ ln(1/η)/(2(8/π² − 1/2)²)`, the number of runs whose median fails with probability `≤ η`.
pub fn median_repetitions(eta: f64) -> u64 {
    assert!(eta > 0.0 && eta < 1.0);
    let gap = 8.0 / (PI * PI) - 0.5;
    let r = ((1.0 / eta).ln() / (2.0 * gap * gap)).ceil().max(1.0) as u64;
    if r.is_multiple_of(2) {
        r + 1
    } else {
        r
    }
}

/// Fejér kernel `sin²(Mπx)/(M² sin²(πx))`, equal to 1 at integers.
pub fn fejer(x: f64, m: u64) -> f64 {
    let m = m as f64;
    let s = (PI * x).sin();
    if s.abs() < 1e-15 {
        return 1.0;
    }
    let num = (m * PI * x).sin();
    (num * num) / (m * m * s * s)
}

/// Exact probability of phase outcome `y` for amplitude `θ` on an `M`-point grid.
pub fn outcome_probability(theta: f64, m: u64, y: u64) -> f64 {
    let yf = y as f64 / m as f64;
    0.5 * fejer(theta / PI - yf, m) + 0.5 * fejer(-theta / PI - yf, m)
}

pub fn estimate_from_outcome(y: u64, m: u64) -> f64 {
    let s = (PI * y as f64 / m as f64).sin();
    (s * s).clamp(0.0, 1.0)
}

/// One phase-estimation outcome drawn from the analytic law.
pub fn sample_outcome_analytic(p: f64, m: u64, rng: &mut ChaCha8Rng) -> u64 {
    let theta = p.clamp(0.0, 1.0).sqrt().asin();
    let phase = if rng.random::<bool>() {
        theta / PI
    } else {
        1.0 - theta / PI
    };
    let x = phase * m as f64;
    let base = x.floor();
    let frac = x - base;
    let wrap = |y: f64| (y.rem_euclid(m as f64)) as u64 % m;
    if frac == 0.0 {
        return wrap(base);
    }
    // Walk outward from the nearest grid points until the cumulative mass passes u.
    let u: f64 = rng.random();
    let s2 = (PI * frac).sin().powi(2);
    let mf = m as f64;
    let mut cumulative = 0.0;
    let mut last = base;
    for step in 0..m {
        let d = if step % 2 == 0 {
            -((step / 2) as f64)
        } else {
            step.div_ceil(2) as f64
        };
        let y = base + d;
        let s = (PI * (x - y) / mf).sin();
        cumulative += s2 / (mf * mf * s * s);
        last = y;
        if u < cumulative {
            break;
        }
    }
    wrap(last)
}

/// Result of one explicit phase-estimation run.
#[derive(Debug, Clone)]
pub struct StatevectorRun {
    pub outcome: u64,
    /// Post-measurement system state (complex, normalized).
    pub post_state: Vec<Complex64>,
}

fn grover_apply(v: &[f64], psi: &[f64], projector: &Projector) -> Vec<f64> {
    let pv = projector.apply(v);
    let flipped: Vec<f64> = v.iter().zip(&pv).map(|(x, p)| x - 2.0 * p).collect();
    reflect_about(&flipped, psi)
}

/// Explicit phase estimation: builds `Σ_y |y⟩ G^y|ψ⟩/√M`, applies the inverse
/// Fourier transform to the phase register and measures it.
pub fn sample_outcome_statevector(
    psi: &[f64],
    projector: &Projector,
    phase_bits: u32,
    cap: u64,
    rng: &mut ChaCha8Rng,
) -> Result<StatevectorRun> {
    let dim = psi.len();
    if projector.dimension() != dim {
        return Err(Error::InvalidArgument("projector dimension mismatch".into()));
    }
    let m = 1usize << phase_bits;
    let total = (dim as u64).saturating_mul(m as u64);
    if total > cap {
        return Err(Error::SimulationTooLarge { dimension: total, cap });
    }
    let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
    rows.push(psi.to_vec());
    for y in 1..m {
        let next = grover_apply(&rows[y - 1], psi, projector);
        rows.push(next);
    }
    let fft = FftPlanner::<f64>::new().plan_fft_forward(m);
    let scale = 1.0 / m as f64;
    // amplitudes[k][j]
    let mut amplitudes = vec![vec![Complex64::new(0.0, 0.0); dim]; m];
    let mut column = vec![Complex64::new(0.0, 0.0); m];
    for j in 0..dim {
        for (y, row) in rows.iter().enumerate() {
            column[y] = Complex64::new(row[j], 0.0);
        }
        fft.process(&mut column);
        for (k, c) in column.iter().enumerate() {
            amplitudes[k][j] = c * scale;
        }
    }
    let probs: Vec<f64> = amplitudes
        .iter()
        .map(|row| row.iter().map(|c| c.norm_sqr()).sum())
        .collect();
    let u: f64 = rng.random::<f64>() * probs.iter().sum::<f64>();
    let mut acc = 0.0;
    let mut outcome = m - 1;
    for (k, p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            outcome = k;
            break;
        }
    }
    let norm = probs[outcome].sqrt();
    let post_state = amplitudes[outcome].iter().map(|c| c / norm).collect();
    Ok(StatevectorRun {
        outcome: outcome as u64,
        post_state,
    })
}

fn cinner(a: &[Complex64], b: &[Complex64]) -> Complex64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

/// Restores `ψ` from a post-measurement state inside `span{Pψ, (I−P)ψ}` by
/// alternating `{P_ψ, I−P_ψ}` measurements with projections onto the eigenbasis of `G`.
fn restore_statevector(
    state: Vec<Complex64>,
    psi: &[f64],
    projector: &Projector,
    grid_points: u64,
    eta: f64,
    rng: &mut ChaCha8Rng,
    ledger: &mut ResourceLedger,
) -> bool {
    let p = projector.expectation(psi);
    let psi_c: Vec<Complex64> = psi.iter().map(|&x| Complex64::new(x, 0.0)).collect();
    if p <= 1e-15 || p >= 1.0 - 1e-15 {
        // ψ is itself an eigenvector of G, so phase estimation left it intact.
        ledger.charge_reflections(1);
        return true;
    }
    let good = projector.apply(psi);
    let bad: Vec<f64> = psi.iter().zip(&good).map(|(a, g)| a - g).collect();
    let (ng, nb) = (inner(&good, &good).sqrt(), inner(&bad, &bad).sqrt());
    let eig = |sign: f64| -> Vec<Complex64> {
        bad.iter()
            .zip(&good)
            .map(|(b, g)| Complex64::new(b / nb, sign * g / ng) / 2f64.sqrt())
            .collect()
    };
    let (plus, minus) = (eig(1.0), eig(-1.0));
    let rounds = ((1.0 / eta).log2().ceil() as u64).max(1) + 1;
    let mut state = state;
    for _ in 0..rounds {
        ledger.charge_reflections(1);
        let c = cinner(&psi_c, &state);
        if rng.random::<f64>() < c.norm_sqr() {
            return true;
        }
        let rest: Vec<Complex64> = state.iter().zip(&psi_c).map(|(s, a)| s - c * a).collect();
        let norm = cinner(&rest, &rest).re.sqrt();
        let rest: Vec<Complex64> = rest.iter().map(|x| x / norm).collect();
        ledger.charge_reflections(grid_points);
        let pp = cinner(&plus, &rest).norm_sqr();
        let pm = cinner(&minus, &rest).norm_sqr();
        state = if rng.random::<f64>() * (pp + pm) < pp {
            plus.clone()
        } else {
            minus.clone()
        };
    }
    false
}

/// Median-of-runs amplitude estimation that also tries to hand `ψ` back.
///
/// Charges `M` reflections per run. A failed restoration charges one
/// re-prepared copy; recording successful restorations is left to the caller.
pub fn amplitude_estimate_nondestructive(
    input: AeInput<'_>,
    t: u64,
    eta: f64,
    backend: &AeBackend,
    rng: &mut ChaCha8Rng,
    ledger: &mut ResourceLedger,
) -> Result<AeOutcome> {
    if t == 0 {
        return Err(Error::InvalidArgument("t must be at least 1".into()));
    }
    if !(eta > 0.0 && eta < 1.0) {
        return Err(Error::InvalidArgument(format!("eta must lie in (0, 1), got {eta}")));
    }
    let runs = median_repetitions(eta);
    let m = backend.grid_points(t);
    let mut estimates = Vec::with_capacity(runs as usize);
    let restored = match backend.mode {
        AeMode::Analytic => {
            let p = input.probability();
            for _ in 0..runs {
                let y = sample_outcome_analytic(p, m, rng);
                estimates.push(estimate_from_outcome(y, m));
            }
            ledger.charge_reflections(runs * m);
            rng.random::<f64>() >= eta
        }
        AeMode::Statevector => {
            let AeInput::State { psi, projector } = input else {
                return Err(Error::InvalidArgument(
                    "statevector amplitude estimation needs the state and projector".into(),
                ));
            };
            let bits = backend.phase_bits_for(t);
            let mut all_restored = true;
            for _ in 0..runs {
                let run = sample_outcome_statevector(psi, projector, bits, backend.simulation_cap, rng)?;
                ledger.charge_reflections(m);
                estimates.push(estimate_from_outcome(run.outcome, m));
                if !restore_statevector(run.post_state, psi, projector, m, eta / runs as f64, rng, ledger) {
                    ledger.charge_repreparation();
                    all_restored = false;
                }
            }
            all_restored
        }
    };
    if !restored && backend.mode == AeMode::Analytic {
        ledger.charge_repreparation();
    }
    Ok(AeOutcome {
        p_hat: median(&estimates),
        restored,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::sampling::stream_rng;

    #[test]
    fn outcome_law_sums_to_one() {
        for &m in &[8u64, 32, 100] {
            for &p in &[0.0, 0.1, 0.37, 0.5, 1.0] {
                let theta = f64::sqrt(p).asin();
                let s: f64 = (0..m).map(|y| outcome_probability(theta, m, y)).sum();
                assert!((s - 1.0).abs() < 1e-10, "m={m} p={p} sum={s}");
            }
        }
    }

    #[test]
    fn zero_probability_is_exact() {
        let mut rng = stream_rng(1, 0);
        let mut ledger = ResourceLedger::default();
        for _ in 0..20 {
            let out = amplitude_estimate_nondestructive(
                AeInput::Probability(0.0),
                64,
                0.1,
                &AeBackend::analytic(),
                &mut rng,
                &mut ledger,
            )
            .unwrap();
            assert_eq!(out.p_hat, 0.0);
        }
        assert!(ledger.reflections_invoked > 0);
    }

    #[test]
    fn analytic_sampler_matches_law() {
        let (m, p) = (16u64, 0.3);
        let theta = f64::sqrt(p).asin();
        let mut rng = stream_rng(2, 0);
        let n = 200_000;
        let mut counts = vec![0u64; m as usize];
        for _ in 0..n {
            counts[sample_outcome_analytic(p, m, &mut rng) as usize] += 1;
        }
        for y in 0..m {
            let want = outcome_probability(theta, m, y);
            let got = counts[y as usize] as f64 / n as f64;
            let se = (want * (1.0 - want) / n as f64).sqrt();
            assert!((got - want).abs() <= 5.0 * se + 1e-9, "y={y} got={got} want={want}");
        }
    }

    #[test]
    fn repetitions_are_odd() {
        for &eta in &[0.5, 0.1, 0.05, 1e-3, 1e-6] {
            assert_eq!(median_repetitions(eta) % 2, 1);
        }
        assert_eq!(median_repetitions(0.05), 17);
    }

    #[test]
    fn additive_error_target() {
        let t = t_for_additive_error(0.005);
        assert!(additive_error_bound(0.5, t as f64) <= 0.005);
        assert!(additive_error_bound(0.5, (t - 1) as f64) > 0.005);
        assert!((additive_error_bound(0.5, 100.0) - 0.032403).abs() < 1e-5);
    }

    #[test]
    fn statevector_cap() {
        let psi = vec![0.5; 4];
        let proj = Projector::Diagonal(vec![true, false, false, false]);
        let mut rng = stream_rng(3, 0);
        assert!(matches!(
            sample_outcome_statevector(&psi, &proj, 10, 1024, &mut rng),
            Err(Error::SimulationTooLarge { .. })
        ));
    }

    #[test]
    fn statevector_outcome_law_matches_analytic() {
        let psi = vec![0.5; 4];
        let proj = Projector::Diagonal(vec![true, false, false, false]);
        let p = proj.expectation(&psi);
        let theta = p.sqrt().asin();
        // Outcome probabilities from a full simulation equal the closed form.
        let m = 8u64;
        let mut rng = stream_rng(4, 0);
        let n = 20_000;
        let mut counts = vec![0u64; m as usize];
        for _ in 0..n {
            let run = sample_outcome_statevector(&psi, &proj, 3, 1 << 20, &mut rng).unwrap();
            counts[run.outcome as usize] += 1;
        }
        for y in 0..m {
            let want = outcome_probability(theta, m, y);
            let got = counts[y as usize] as f64 / n as f64;
            assert!((got - want).abs() < 0.02, "y={y} got={got} want={want}");
        }
    }

    #[test]
    fn statevector_restores_state() {
        let psi = vec![0.5; 4];
        let proj = Projector::Diagonal(vec![true, true, false, false]);
        let mut rng = stream_rng(5, 0);
        let mut ledger = ResourceLedger::default();
        let mut restored = 0;
        for _ in 0..50 {
            let out = amplitude_estimate_nondestructive(
                AeInput::State {
                    psi: &psi,
                    projector: &proj,
                },
                16,
                0.01,
                &AeBackend::statevector(None),
                &mut rng,
                &mut ledger,
            )
            .unwrap();
            assert!((out.p_hat - 0.5).abs() <= additive_error_bound(0.5, 16.0));
            restored += out.restored as u32;
        }
        assert!(restored >= 40, "{restored}");
    }
}
