use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Hamiltonian, Spectrum};
use crate::numeric::log_boltzmann;

/// Reflection, copy and measurement counters for one simulated run.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct ResourceLedger {
    pub reflections_invoked: u64,
    pub qsample_copies_consumed: u64,
    pub qsample_copies_restored: u64,
    /// Extra copies prepared because a restoration failed.
    #[serde(default)]
    pub qsample_copies_reprepared: u64,
}

impl ResourceLedger {
    pub fn charge_reflections(&mut self, count: u64) {
        self.reflections_invoked += count;
    }

    pub fn charge_copies(&mut self, count: u64) {
        self.qsample_copies_consumed += count;
    }

    pub fn charge_repreparation(&mut self) {
        self.qsample_copies_reprepared += 1;
    }

    pub fn record_restored(&mut self) {
        self.qsample_copies_restored += 1;
    }

    pub fn absorb(&mut self, other: &ResourceLedger) {
        self.reflections_invoked += other.reflections_invoked;
        self.qsample_copies_consumed += other.qsample_copies_consumed;
        self.qsample_copies_restored += other.qsample_copies_restored;
        self.qsample_copies_reprepared += other.qsample_copies_reprepared;
    }
}

/// Real amplitude vector `√μ_β(x)` over the enumerated state space.
#[derive(Debug, Clone, PartialEq)]
pub struct QSample {
    amplitudes: Vec<f64>,
    beta: f64,
}

impl QSample {
    pub fn amplitudes(&self) -> &[f64] {
        &self.amplitudes
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn dimension(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.iter().map(|a| a * a).sum::<f64>().sqrt()
    }
}

pub fn prepare_qsample_from_spectrum(spectrum: &Spectrum, beta: f64) -> QSample {
    let log_z = spectrum.log_partition(beta);
    let amplitudes = spectrum
        .energies()
        .iter()
        .map(|&e| (0.5 * (log_boltzmann(beta, e) - log_z)).exp())
        .collect();
    QSample { amplitudes, beta }
}

pub fn prepare_qsample<H: Hamiltonian + ?Sized>(h: &H, beta: f64, cap: u64) -> Result<QSample> {
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::InvalidArgument(format!("invalid inverse temperature {beta}")));
    }
    let spectrum = Spectrum::enumerate(h, cap)?;
    Ok(prepare_qsample_from_spectrum(&spectrum, beta))
}

pub fn inner(a: &[f64], b: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len(), "dimension mismatch");
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `⟨a|b⟩²`, clamped to `[0, 1]`.
pub fn overlap_squared(a: &QSample, b: &QSample) -> f64 {
    let s = inner(&a.amplitudes, &b.amplitudes);
    (s * s).clamp(0.0, 1.0)
}

/// `Z(β̄)²/(Z(β_a)Z(β_b))` computed from the spectrum without building vectors.
pub fn overlap_squared_exact(spectrum: &Spectrum, beta_a: f64, beta_b: f64) -> f64 {
    let mid = crate::numeric::midpoint(beta_a, beta_b);
    (2.0 * spectrum.log_partition(mid) - spectrum.log_partition(beta_a) - spectrum.log_partition(beta_b))
        .exp()
        .clamp(0.0, 1.0)
}

/// `R_ψ v = 2⟨ψ|v⟩ψ − v`.
pub fn reflect(state: &[f64], about: &QSample, ledger: &mut ResourceLedger) -> Vec<f64> {
    ledger.charge_reflections(1);
    reflect_about(state, &about.amplitudes)
}

pub(crate) fn reflect_about(state: &[f64], about: &[f64]) -> Vec<f64> {
    let c = 2.0 * inner(about, state);
    about.iter().zip(state).map(|(a, s)| c * a - s).collect()
}

/// Projector over the simulated space.
#[derive(Debug, Clone, PartialEq)]
pub enum Projector {
    /// Projects onto the coordinates marked `true`.
    Diagonal(Vec<bool>),
    /// `|φ⟩⟨φ|` for a unit vector `φ`.
    RankOne(Vec<f64>),
}

impl Projector {
    pub fn dimension(&self) -> usize {
        match self {
            Projector::Diagonal(m) => m.len(),
            Projector::RankOne(v) => v.len(),
        }
    }

    pub fn apply(&self, v: &[f64]) -> Vec<f64> {
        match self {
            Projector::Diagonal(mask) => v
                .iter()
                .zip(mask)
                .map(|(&x, &m)| if m { x } else { 0.0 })
                .collect(),
            Projector::RankOne(phi) => {
                let c = inner(phi, v);
                phi.iter().map(|p| c * p).collect()
            }
        }
    }

    /// `⟨ψ|P|ψ⟩`.
    pub fn expectation(&self, psi: &[f64]) -> f64 {
        match self {
            Projector::Diagonal(mask) => psi
                .iter()
                .zip(mask)
                .filter(|(_, &m)| m)
                .map(|(x, _)| x * x)
                .sum::<f64>()
                .clamp(0.0, 1.0),
            Projector::RankOne(phi) => {
                let c = inner(phi, psi);
                (c * c).clamp(0.0, 1.0)
            }
        }
    }
}

/// `Σ_x √D(x) |x⟩ ⊗ (√(1−f(x)) |0⟩ + √f(x) |1⟩)` and the projector onto the `|1⟩` half.
///
/// `f` must map into `[0, 1]`.
pub fn rotated_state(dist: &[f64], f: &[f64]) -> Result<(Vec<f64>, Projector)> {
    if dist.len() != f.len() {
        return Err(Error::InvalidArgument("distribution and function lengths differ".into()));
    }
    let mut psi = Vec::with_capacity(2 * dist.len());
    let mut mask = Vec::with_capacity(2 * dist.len());
    for (&d, &v) in dist.iter().zip(f) {
        if !(0.0..=1.0).contains(&v) {
            return Err(Error::InvalidArgument(format!(
                "rotated function value {v} lies outside [0, 1]"
            )));
        }
        let a = d.max(0.0).sqrt();
        psi.push(a * (1.0 - v).sqrt());
        psi.push(a * v.sqrt());
        mask.push(false);
        mask.push(true);
    }
    Ok((psi, Projector::Diagonal(mask)))
}
