//! Samplers for the Gibbs distribution `μ_β`.
//!
//! [`ExactSampler`] inverts the cumulative distribution over energy levels of an
//! enumerated [`Spectrum`] and is the default whenever enumeration is feasible.
//! [`GlauberSampler`] runs heat-bath single-site dynamics for instances that are
//! too large to enumerate; converting sweeps into effectively independent samples
//! is left to the caller through `mixing_sweeps`.

use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::models::{Hamiltonian, Spectrum};
use crate::numeric::log_boltzmann;

/// Independent deterministic stream `stream` derived from a master seed.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SamplerMode {
    Exact,
    Glauber,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SamplerConfig {
    pub mode: SamplerMode,
    /// Full sweeps discarded between reported samples (glauber mode).
    pub mixing_sweeps: u32,
    /// Sweeps run whenever the chain moves to a new temperature (glauber mode).
    pub burn_in_sweeps: u32,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        Self {
            mode: SamplerMode::Exact,
            mixing_sweeps: 10,
            burn_in_sweeps: 100,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<()> {
        if self.mode == SamplerMode::Glauber && self.mixing_sweeps == 0 {
            return Err(Error::config(
                "sampler.mixing_sweeps",
                "must be at least 1 in glauber mode",
            ));
        }
        Ok(())
    }
}

/// Source of Gibbs samples at arbitrary inverse temperatures.
///
/// Every consumer in this crate only needs the energies of the samples, so the
/// bulk interface is a histogram over energy levels `0..=n`.
pub trait GibbsSampler: Send {
    /// Draws one state from `μ_β`.
    fn draw(&mut self, beta: f64) -> Result<u64>;

    fn energy(&self, state: u64) -> u32;

    fn max_energy(&self) -> u32;

    /// Total number of Gibbs samples produced so far.
    fn samples_drawn(&self) -> u64;

    /// Energy histogram of `count` draws from `μ_β`.
    fn energy_histogram(&mut self, beta: f64, count: u64) -> Result<Vec<u64>> {
        let mut hist = vec![0u64; self.max_energy() as usize + 1];
        for _ in 0..count {
            let x = self.draw(beta)?;
            hist[self.energy(x) as usize] += 1;
        }
        Ok(hist)
    }
}

/// Exact sampler over an enumerated state space.
#[derive(Debug, Clone)]
pub struct ExactSampler {
    spectrum: Arc<Spectrum>,
    rng: ChaCha8Rng,
    cached: Option<(f64, Vec<f64>)>,
    drawn: u64,
}

impl ExactSampler {
    pub fn new(spectrum: Arc<Spectrum>, rng: ChaCha8Rng) -> Self {
        Self {
            spectrum,
            rng,
            cached: None,
            drawn: 0,
        }
    }

    pub fn spectrum(&self) -> &Spectrum {
        &self.spectrum
    }

    fn level_probabilities(&mut self, beta: f64) -> &[f64] {
        let stale = match &self.cached {
            Some((b, _)) => b.to_bits() != beta.to_bits(),
            None => true,
        };
        if stale {
            self.cached = Some((beta, self.spectrum.energy_distribution(beta)));
        }
        &self.cached.as_ref().expect("filled above").1
    }
}

impl GibbsSampler for ExactSampler {
    fn draw(&mut self, beta: f64) -> Result<u64> {
        let u: f64 = self.rng.random();
        let probs = self.level_probabilities(beta);
        let mut acc = 0.0;
        let mut level = probs.len() - 1;
        for (e, &p) in probs.iter().enumerate() {
            acc += p;
            if u < acc {
                level = e;
                break;
            }
        }
        // Guard against rounding landing past the last occupied level.
        while self.spectrum.states_with_energy(level as u32).is_empty() {
            level -= 1;
        }
        let states = self.spectrum.states_with_energy(level as u32);
        let pick = self.rng.random_range(0..states.len());
        self.drawn += 1;
        Ok(states[pick])
    }

    fn energy(&self, state: u64) -> u32 {
        self.spectrum.energy(state)
    }

    fn max_energy(&self) -> u32 {
        self.spectrum.max_energy()
    }

    fn samples_drawn(&self) -> u64 {
        self.drawn
    }

    /// Multinomial draw over energy levels, equal in law to `count` independent
    /// samples but O(n) regardless of `count`.
    fn energy_histogram(&mut self, beta: f64, count: u64) -> Result<Vec<u64>> {
        let probs = self.level_probabilities(beta).to_vec();
        let mut hist = vec![0u64; probs.len()];
        let mut remaining = count;
        let mut mass_left = 1.0;
        for (e, &p) in probs.iter().enumerate() {
            if remaining == 0 {
                break;
            }
            if p <= 0.0 {
                continue;
            }
            let cond = (p / mass_left).clamp(0.0, 1.0);
            let k = if cond >= 1.0 || e + 1 == probs.len() {
                remaining
            } else {
                Binomial::new(remaining, cond)
                    .map_err(|err| Error::InvalidArgument(err.to_string()))?
                    .sample(&mut self.rng)
            };
            hist[e] = k;
            remaining -= k;
            mass_left -= p;
        }
        if remaining > 0 {
            // Rounding left residual mass past the last level; give it to the
            // highest occupied level.
            let last = (0..probs.len()).rev().find(|&e| probs[e] > 0.0).unwrap_or(0);
            hist[last] += remaining;
        }
        self.drawn += count;
        Ok(hist)
    }
}

/// Configuration of a single-site Gibbs chain.
#[derive(Debug, Clone)]
pub struct ChainState {
    pub config: Vec<u32>,
    pub energy: u32,
    pub beta: f64,
    pub rng: ChaCha8Rng,
}

impl ChainState {
    pub fn new<H: Hamiltonian + ?Sized>(h: &H, config: Vec<u32>, beta: f64, rng: ChaCha8Rng) -> Self {
        let energy = h.config_energy(&config);
        Self {
            config,
            energy,
            beta,
            rng,
        }
    }

    /// Ground state (all sites equal to zero) for Ising and Potts models.
    pub fn ground<H: Hamiltonian + ?Sized>(h: &H, beta: f64, rng: ChaCha8Rng) -> Self {
        Self::new(h, vec![0; h.site_count()], beta, rng)
    }

    pub fn is_consistent<H: Hamiltonian + ?Sized>(&self, h: &H) -> bool {
        self.energy == h.config_energy(&self.config)
    }
}

/// Conditional distribution of `site` given the rest of `config` under `μ_β`.
pub fn site_conditional<H: Hamiltonian + ?Sized>(
    h: &H,
    config: &[u32],
    site: usize,
    beta: f64,
) -> Vec<f64> {
    let local: Vec<u32> = (0..h.site_arity())
        .map(|v| h.local_energy(config, site, v))
        .collect();
    let min = *local.iter().min().expect("arity >= 1");
    let weights: Vec<f64> = local
        .iter()
        .map(|&e| log_boltzmann(beta, e - min).exp())
        .collect();
    let total: f64 = weights.iter().sum();
    weights.into_iter().map(|w| w / total).collect()
}

/// One heat-bath update: a uniformly chosen site is resampled from its
/// conditional distribution; the energy is updated incrementally.
pub fn glauber_step<H: Hamiltonian + ?Sized>(state: &mut ChainState, h: &H) {
    let site = state.rng.random_range(0..h.site_count());
    let probs = site_conditional(h, &state.config, site, state.beta);
    let u: f64 = state.rng.random();
    let mut acc = 0.0;
    let mut value = probs.len() as u32 - 1;
    for (v, &p) in probs.iter().enumerate() {
        acc += p;
        if u < acc {
            value = v as u32;
            break;
        }
    }
    let old = state.config[site];
    if value != old {
        let before = h.local_energy(&state.config, site, old);
        let after = h.local_energy(&state.config, site, value);
        state.config[site] = value;
        state.energy = state.energy + after - before;
    }
    debug_assert!(state.is_consistent(h));
}

/// Full transition matrix of one [`glauber_step`], row-stochastic over
/// enumerated states. Intended for small verification instances.
pub fn glauber_kernel<H: Hamiltonian + ?Sized>(h: &H, beta: f64, cap: u64) -> Result<Vec<Vec<f64>>> {
    let count = match h.state_count() {
        Some(c) if c <= cap => c as usize,
        _ => {
            return Err(Error::EnumerationInfeasible {
                states: format!("{}^{}", h.site_arity(), h.site_count()),
                cap,
            })
        }
    };
    let sites = h.site_count();
    let mut kernel = vec![vec![0.0; count]; count];
    let mut config = vec![0u32; sites];
    for (x, row) in kernel.iter_mut().enumerate() {
        h.decode(x as u64, &mut config);
        for site in 0..sites {
            let probs = site_conditional(h, &config, site, beta);
            let old = config[site];
            for (v, p) in probs.into_iter().enumerate() {
                config[site] = v as u32;
                row[h.encode(&config) as usize] += p / sites as f64;
            }
            config[site] = old;
        }
    }
    Ok(kernel)
}

/// Glauber-dynamics sampler. Whenever the requested temperature changes the
/// chain is re-tempered with `burn_in_sweeps` sweeps; `mixing_sweeps` sweeps
/// separate consecutive reported samples.
#[derive(Debug, Clone)]
pub struct GlauberSampler<H> {
    h: Arc<H>,
    chain: ChainState,
    mixing_sweeps: u32,
    burn_in_sweeps: u32,
    tempered: bool,
    drawn: u64,
}

impl<H: Hamiltonian> GlauberSampler<H> {
    pub fn new(h: Arc<H>, config: &SamplerConfig, rng: ChaCha8Rng) -> Result<Self> {
        config.validate()?;
        let chain = ChainState::ground(h.as_ref(), 0.0, rng);
        Ok(Self {
            h,
            chain,
            mixing_sweeps: config.mixing_sweeps,
            burn_in_sweeps: config.burn_in_sweeps,
            tempered: false,
            drawn: 0,
        })
    }

    pub fn chain(&self) -> &ChainState {
        &self.chain
    }

    fn sweeps(&mut self, count: u32) {
        let steps = count as usize * self.h.site_count();
        for _ in 0..steps {
            glauber_step(&mut self.chain, self.h.as_ref());
        }
    }
}

impl<H: Hamiltonian> GibbsSampler for GlauberSampler<H> {
    fn draw(&mut self, beta: f64) -> Result<u64> {
        if !self.tempered || self.chain.beta.to_bits() != beta.to_bits() {
            self.chain.beta = beta;
            self.sweeps(self.burn_in_sweeps);
            self.tempered = true;
        }
        self.sweeps(self.mixing_sweeps);
        self.drawn += 1;
        Ok(self.h.encode(&self.chain.config))
    }

    fn energy(&self, state: u64) -> u32 {
        self.h.energy(state)
    }

    fn max_energy(&self) -> u32 {
        self.h.max_energy()
    }

    fn samples_drawn(&self) -> u64 {
        self.drawn
    }

    fn energy_histogram(&mut self, beta: f64, count: u64) -> Result<Vec<u64>> {
        let mut hist = vec![0u64; self.h.max_energy() as usize + 1];
        for _ in 0..count {
            self.draw(beta)?;
            hist[self.chain.energy as usize] += 1;
        }
        Ok(hist)
    }
}

/// Builds samplers for one Hamiltonian; each call to [`SamplerFactory::sampler`]
/// gets its own RNG stream split from the configured seed.
#[derive(Debug, Clone)]
pub struct SamplerFactory<H> {
    h: Arc<H>,
    spectrum: Option<Arc<Spectrum>>,
    config: SamplerConfig,
}

impl<H: Hamiltonian + 'static> SamplerFactory<H> {
    pub fn new(h: Arc<H>, config: SamplerConfig, cap: u64) -> Result<Self> {
        config.validate()?;
        let spectrum = match config.mode {
            SamplerMode::Exact => Some(Arc::new(Spectrum::enumerate(h.as_ref(), cap)?)),
            SamplerMode::Glauber => None,
        };
        Ok(Self {
            h,
            spectrum,
            config,
        })
    }

    /// Reuses an already enumerated spectrum for exact mode.
    pub fn with_spectrum(h: Arc<H>, spectrum: Arc<Spectrum>, config: SamplerConfig) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            h,
            spectrum: Some(spectrum),
            config,
        })
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.config
    }

    pub fn hamiltonian(&self) -> &Arc<H> {
        &self.h
    }

    pub fn sampler(&self, stream: u64) -> Result<Box<dyn GibbsSampler>> {
        let rng = stream_rng(self.config.seed, stream);
        Ok(match self.config.mode {
            SamplerMode::Exact => Box::new(ExactSampler::new(
                self.spectrum.clone().expect("exact mode has a spectrum"),
                rng,
            )),
            SamplerMode::Glauber => Box::new(GlauberSampler::new(self.h.clone(), &self.config, rng)?),
        })
    }
}

/// One draw from `μ_β` with a freshly built sampler.
pub fn draw_sample<H: Hamiltonian + 'static>(
    config: &SamplerConfig,
    h: Arc<H>,
    beta: f64,
    cap: u64,
) -> Result<u64> {
    SamplerFactory::new(h, *config, cap)?.sampler(0)?.draw(beta)
}
