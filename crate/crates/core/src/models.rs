//! Hamiltonians over finite state spaces and exact enumeration oracles.
//!
//! States are mixed-radix integers: site `s` holds a digit in `0..arity` and
//! the state index is `Σ digit_s · arity^s`. Energies are integers in `0..=n`.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numeric::{log_boltzmann, log_sum_exp};

/// Default upper bound on `|Ω|` for brute-force oracles.
pub const DEFAULT_ENUMERATION_CAP: u64 = 1 << 22;

/// An integer-valued classical Hamiltonian with single-site structure.
pub trait Hamiltonian: Send + Sync + std::fmt::Debug {
    fn site_count(&self) -> usize;

    /// Number of values each site can take.
    fn site_arity(&self) -> u32;

    /// Upper bound `n` on the energy.
    fn max_energy(&self) -> u32;

    fn config_energy(&self, config: &[u32]) -> u32;

    /// Energy of the terms that involve `site`, evaluated as if `site` held `value`.
    fn local_energy(&self, config: &[u32], site: usize, value: u32) -> u32;

    /// `q = ln |Ω|`.
    fn log_state_count(&self) -> f64 {
        self.site_count() as f64 * f64::from(self.site_arity()).ln()
    }

    /// `|Ω|`, or `None` when it does not fit in a `u64`.
    fn state_count(&self) -> Option<u64> {
        u64::from(self.site_arity()).checked_pow(u32::try_from(self.site_count()).ok()?)
    }

    fn decode(&self, state: u64, config: &mut [u32]) {
        let arity = u64::from(self.site_arity());
        let mut rest = state;
        for digit in config.iter_mut() {
            *digit = (rest % arity) as u32;
            rest /= arity;
        }
    }

    fn encode(&self, config: &[u32]) -> u64 {
        let arity = u64::from(self.site_arity());
        config
            .iter()
            .rev()
            .fold(0u64, |acc, &d| acc * arity + u64::from(d))
    }

    fn energy(&self, state: u64) -> u32 {
        let mut config = vec![0; self.site_count()];
        self.decode(state, &mut config);
        self.config_energy(&config)
    }
}

/// Simple undirected graph without self-loops or parallel edges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    vertex_count: usize,
    edges: Vec<(usize, usize)>,
    adjacency: Vec<Vec<usize>>,
}

impl Graph {
    pub fn new(vertex_count: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if vertex_count == 0 {
            return Err(Error::InvalidModel("graph needs at least one vertex".into()));
        }
        let mut adjacency = vec![Vec::new(); vertex_count];
        let mut seen = std::collections::HashSet::new();
        for &(u, v) in &edges {
            if u >= vertex_count || v >= vertex_count {
                return Err(Error::InvalidModel(format!(
                    "edge ({u}, {v}) references a vertex outside 0..{vertex_count}"
                )));
            }
            if u == v {
                return Err(Error::InvalidModel(format!("self-loop at vertex {u}")));
            }
            if !seen.insert((u.min(v), u.max(v))) {
                return Err(Error::InvalidModel(format!("duplicate edge ({u}, {v})")));
            }
            adjacency[u].push(v);
            adjacency[v].push(u);
        }
        Ok(Self {
            vertex_count,
            edges,
            adjacency,
        })
    }

    pub fn grid(rows: usize, cols: usize) -> Self {
        let mut edges = Vec::new();
        for r in 0..rows {
            for c in 0..cols {
                let v = r * cols + c;
                if c + 1 < cols {
                    edges.push((v, v + 1));
                }
                if r + 1 < rows {
                    edges.push((v, v + cols));
                }
            }
        }
        Self::new(rows * cols, edges).expect("grid graph is simple")
    }

    pub fn cycle(n: usize) -> Self {
        assert!(n >= 3, "cycle needs at least three vertices");
        Self::new(n, (0..n).map(|v| (v, (v + 1) % n)).collect()).expect("cycle graph is simple")
    }

    pub fn path(n: usize) -> Self {
        Self::new(n, (1..n).map(|v| (v - 1, v)).collect()).expect("path graph is simple")
    }

    pub fn complete(n: usize) -> Self {
        let edges = (0..n)
            .flat_map(|u| (u + 1..n).map(move |v| (u, v)))
            .collect();
        Self::new(n, edges).expect("complete graph is simple")
    }

    pub fn edgeless(n: usize) -> Self {
        Self::new(n, Vec::new()).expect("edgeless graph is simple")
    }

    pub fn vertex_count(&self) -> usize {
        self.vertex_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, v: usize) -> &[usize] {
        &self.adjacency[v]
    }
}

/// Ferromagnetic Ising model: energy counts edges whose endpoints disagree.
#[derive(Debug, Clone)]
pub struct IsingModel {
    graph: Graph,
}

impl IsingModel {
    pub fn new(graph: Graph) -> Self {
        Self { graph }
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }
}

impl Hamiltonian for IsingModel {
    fn site_count(&self) -> usize {
        self.graph.vertex_count
    }

    fn site_arity(&self) -> u32 {
        2
    }

    fn max_energy(&self) -> u32 {
        self.graph.edges.len() as u32
    }

    fn config_energy(&self, config: &[u32]) -> u32 {
        self.graph
            .edges
            .iter()
            .filter(|&&(u, v)| config[u] != config[v])
            .count() as u32
    }

    fn local_energy(&self, config: &[u32], site: usize, value: u32) -> u32 {
        self.graph.adjacency[site]
            .iter()
            .filter(|&&w| config[w] != value)
            .count() as u32
    }
}

/// Potts model with `k` colors: energy counts monochromatic edges, so
/// `Z(∞)` is the number of proper `k`-colorings.
#[derive(Debug, Clone)]
pub struct PottsModel {
    graph: Graph,
    colors: u32,
}

impl PottsModel {
    pub fn new(graph: Graph, colors: u32) -> Result<Self> {
        if colors < 2 {
            return Err(Error::InvalidModel(format!(
                "Potts model needs k >= 2 colors, got {colors}"
            )));
        }
        Ok(Self { graph, colors })
    }

    pub fn graph(&self) -> &Graph {
        &self.graph
    }

    pub fn colors(&self) -> u32 {
        self.colors
    }
}

impl Hamiltonian for PottsModel {
    fn site_count(&self) -> usize {
        self.graph.vertex_count
    }

    fn site_arity(&self) -> u32 {
        self.colors
    }

    fn max_energy(&self) -> u32 {
        self.graph.edges.len() as u32
    }

    fn config_energy(&self, config: &[u32]) -> u32 {
        self.graph
            .edges
            .iter()
            .filter(|&&(u, v)| config[u] == config[v])
            .count() as u32
    }

    fn local_energy(&self, config: &[u32], site: usize, value: u32) -> u32 {
        self.graph.adjacency[site]
            .iter()
            .filter(|&&w| config[w] == value)
            .count() as u32
    }
}

/// Explicit energy table; one site whose value is the state index.
#[derive(Debug, Clone)]
pub struct LookupHamiltonian {
    energies: Vec<u32>,
    max_energy: u32,
}

impl LookupHamiltonian {
    pub fn new(energies: Vec<u32>) -> Result<Self> {
        if energies.is_empty() {
            return Err(Error::InvalidModel("energy table is empty".into()));
        }
        if u32::try_from(energies.len()).is_err() {
            return Err(Error::InvalidModel("energy table too large".into()));
        }
        if !energies.contains(&0) {
            return Err(Error::InvalidModel(
                "energy table has no zero-energy ground state".into(),
            ));
        }
        let max_energy = *energies.iter().max().expect("nonempty");
        Ok(Self {
            energies,
            max_energy,
        })
    }

    pub fn energies(&self) -> &[u32] {
        &self.energies
    }
}

impl Hamiltonian for LookupHamiltonian {
    fn site_count(&self) -> usize {
        1
    }

    fn site_arity(&self) -> u32 {
        self.energies.len() as u32
    }

    fn max_energy(&self) -> u32 {
        self.max_energy
    }

    fn config_energy(&self, config: &[u32]) -> u32 {
        self.energies[config[0] as usize]
    }

    fn local_energy(&self, _config: &[u32], _site: usize, value: u32) -> u32 {
        self.energies[value as usize]
    }

    fn energy(&self, state: u64) -> u32 {
        self.energies[state as usize]
    }
}

/// JSON model description.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "lowercase")]
pub enum ModelSpec {
    Ising {
        vertices: usize,
        #[serde(default)]
        edges: Vec<[usize; 2]>,
    },
    Potts {
        vertices: usize,
        #[serde(default)]
        edges: Vec<[usize; 2]>,
        k: u32,
    },
    Lookup {
        energies: Vec<u32>,
    },
}

impl ModelSpec {
    pub fn build(&self) -> Result<Model> {
        let graph = |vertices: usize, edges: &[[usize; 2]]| {
            Graph::new(vertices, edges.iter().map(|e| (e[0], e[1])).collect())
        };
        Ok(match self {
            ModelSpec::Ising { vertices, edges } => {
                Model::Ising(IsingModel::new(graph(*vertices, edges)?))
            }
            ModelSpec::Potts { vertices, edges, k } => {
                Model::Potts(PottsModel::new(graph(*vertices, edges)?, *k)?)
            }
            ModelSpec::Lookup { energies } => {
                Model::Lookup(LookupHamiltonian::new(energies.clone())?)
            }
        })
    }
}

/// Any of the supported Hamiltonians.
#[derive(Debug, Clone)]
pub enum Model {
    Ising(IsingModel),
    Potts(PottsModel),
    Lookup(LookupHamiltonian),
}

impl Model {
    fn inner(&self) -> &dyn Hamiltonian {
        match self {
            Model::Ising(m) => m,
            Model::Potts(m) => m,
            Model::Lookup(m) => m,
        }
    }
}

impl Hamiltonian for Model {
    fn site_count(&self) -> usize {
        self.inner().site_count()
    }
    fn site_arity(&self) -> u32 {
        self.inner().site_arity()
    }
    fn max_energy(&self) -> u32 {
        self.inner().max_energy()
    }
    fn config_energy(&self, config: &[u32]) -> u32 {
        self.inner().config_energy(config)
    }
    fn local_energy(&self, config: &[u32], site: usize, value: u32) -> u32 {
        self.inner().local_energy(config, site, value)
    }
    fn energy(&self, state: u64) -> u32 {
        self.inner().energy(state)
    }
}

/// Fully enumerated state space: the energy of every state plus the
/// density of states. Backs every exact oracle and the exact sampler.
#[derive(Debug, Clone)]
pub struct Spectrum {
    max_energy: u32,
    energies: Vec<u32>,
    states_by_energy: Vec<Vec<u64>>,
}

impl Spectrum {
    pub fn enumerate<H: Hamiltonian + ?Sized>(h: &H, cap: u64) -> Result<Self> {
        let count = checked_state_count(h, cap)?;
        let n = h.max_energy();
        let arity = h.site_arity();
        let mut config = vec![0u32; h.site_count()];
        let mut energies = Vec::with_capacity(count as usize);
        let mut states_by_energy = vec![Vec::new(); n as usize + 1];
        for state in 0..count {
            let e = h.config_energy(&config);
            debug_assert!(e <= n, "energy {e} above declared maximum {n}");
            energies.push(e);
            states_by_energy[e as usize].push(state);
            // Mixed-radix increment.
            for digit in config.iter_mut() {
                *digit += 1;
                if *digit < arity {
                    break;
                }
                *digit = 0;
            }
        }
        if states_by_energy[0].is_empty() {
            return Err(Error::InvalidModel("no zero-energy ground state".into()));
        }
        Ok(Self {
            max_energy: n,
            energies,
            states_by_energy,
        })
    }

    pub fn state_count(&self) -> u64 {
        self.energies.len() as u64
    }

    pub fn max_energy(&self) -> u32 {
        self.max_energy
    }

    pub fn energies(&self) -> &[u32] {
        &self.energies
    }

    pub fn energy(&self, state: u64) -> u32 {
        self.energies[state as usize]
    }

    /// Number of states at each energy `0..=n`.
    pub fn degeneracies(&self) -> Vec<u64> {
        self.states_by_energy
            .iter()
            .map(|s| s.len() as u64)
            .collect()
    }

    pub fn states_with_energy(&self, energy: u32) -> &[u64] {
        &self.states_by_energy[energy as usize]
    }

    /// `ln Z(β)`; `β = ∞` gives the log ground-state count.
    pub fn log_partition(&self, beta: f64) -> f64 {
        log_sum_exp(
            self.states_by_energy
                .iter()
                .enumerate()
                .filter(|(_, s)| !s.is_empty())
                .map(|(e, s)| (s.len() as f64).ln() + log_boltzmann(beta, e as u32)),
        )
    }

    /// Probability of each energy level under `μ_β`.
    pub fn energy_distribution(&self, beta: f64) -> Vec<f64> {
        let log_z = self.log_partition(beta);
        self.states_by_energy
            .iter()
            .enumerate()
            .map(|(e, s)| {
                if s.is_empty() {
                    0.0
                } else {
                    ((s.len() as f64).ln() + log_boltzmann(beta, e as u32) - log_z).exp()
                }
            })
            .collect()
    }

    /// `μ_β` over states, in enumeration order.
    pub fn gibbs_distribution(&self, beta: f64) -> Vec<f64> {
        let log_z = self.log_partition(beta);
        self.energies
            .iter()
            .map(|&e| (log_boltzmann(beta, e) - log_z).exp())
            .collect()
    }
}

fn checked_state_count<H: Hamiltonian + ?Sized>(h: &H, cap: u64) -> Result<u64> {
    match h.state_count() {
        Some(c) if c <= cap => Ok(c),
        Some(c) => Err(Error::EnumerationInfeasible {
            states: c.to_string(),
            cap,
        }),
        None => Err(Error::EnumerationInfeasible {
            states: format!("{}^{}", h.site_arity(), h.site_count()),
            cap,
        }),
    }
}

/// Partition function value kept in log form.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PartitionFunction {
    pub ln_z: f64,
}

impl PartitionFunction {
    pub fn value(&self) -> f64 {
        self.ln_z.exp()
    }
}

pub fn exact_partition_function<H: Hamiltonian + ?Sized>(
    h: &H,
    beta: f64,
    cap: u64,
) -> Result<PartitionFunction> {
    check_beta(beta)?;
    let spectrum = Spectrum::enumerate(h, cap)?;
    Ok(PartitionFunction {
        ln_z: spectrum.log_partition(beta),
    })
}

pub fn exact_gibbs_distribution<H: Hamiltonian + ?Sized>(
    h: &H,
    beta: f64,
    cap: u64,
) -> Result<Vec<f64>> {
    check_beta(beta)?;
    Ok(Spectrum::enumerate(h, cap)?.gibbs_distribution(beta))
}

/// Mean and second moment of a nonnegative function under a distribution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Moments {
    pub mean: f64,
    pub second_moment: f64,
}

impl Moments {
    /// `φ/μ²`.
    pub fn relative_variance(&self) -> f64 {
        self.second_moment / (self.mean * self.mean)
    }
}

/// Moments of `f` under an explicit distribution over states.
pub fn moments_under<F: Fn(u64) -> f64>(distribution: &[f64], f: F) -> Result<Moments> {
    let (mut mean, mut second_moment) = (0.0, 0.0);
    for (x, &p) in distribution.iter().enumerate() {
        if p == 0.0 {
            continue;
        }
        let v = f(x as u64);
        mean += p * v;
        second_moment += p * v * v;
    }
    if mean == 0.0 {
        return Err(Error::DegenerateFunction);
    }
    Ok(Moments {
        mean,
        second_moment,
    })
}

pub fn exact_moments<H, F>(h: &H, beta: f64, f: F, cap: u64) -> Result<Moments>
where
    H: Hamiltonian + ?Sized,
    F: Fn(u64) -> f64,
{
    let dist = exact_gibbs_distribution(h, beta, cap)?;
    moments_under(&dist, f)
}

fn check_beta(beta: f64) -> Result<()> {
    if beta.is_nan() || beta < 0.0 {
        return Err(Error::InvalidArgument(format!(
            "inverse temperature must be nonnegative, got {beta}"
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    const E: f64 = std::f64::consts::E;

    fn single_edge() -> IsingModel {
        IsingModel::new(Graph::path(2))
    }

    fn triangle_potts() -> PottsModel {
        PottsModel::new(Graph::complete(3), 3).unwrap()
    }

    #[test]
    fn z_at_zero_is_state_count() {
        let z = exact_partition_function(&triangle_potts(), 0.0, DEFAULT_ENUMERATION_CAP).unwrap();
        assert!((z.value() - 27.0).abs() < 1e-12);
        let z = exact_partition_function(&IsingModel::new(Graph::grid(3, 3)), 0.0, 1 << 22).unwrap();
        assert!((z.value() - 512.0).abs() < 1e-9);
    }

    #[test]
    fn single_edge_closed_form() {
        let z = exact_partition_function(&single_edge(), 1.0, DEFAULT_ENUMERATION_CAP).unwrap();
        assert!((z.value() - (2.0 + 2.0 / E)).abs() < 1e-12);
        assert!((z.value() - 2.735_758_882_342_885).abs() < 1e-12);
    }

    #[test]
    fn potts_triangle_counts_proper_colorings() {
        let z = exact_partition_function(&triangle_potts(), f64::INFINITY, DEFAULT_ENUMERATION_CAP)
            .unwrap();
        assert!((z.value() - 6.0).abs() < 1e-12);
    }

    #[test]
    fn gibbs_distribution_cases() {
        let h = single_edge();
        let uniform = exact_gibbs_distribution(&h, 0.0, 16).unwrap();
        assert!(uniform.iter().all(|&p| (p - 0.25).abs() < 1e-15));

        let frozen = exact_gibbs_distribution(&h, f64::INFINITY, 16).unwrap();
        assert_eq!(frozen, vec![0.5, 0.0, 0.0, 0.5]);

        let z = 2.0 + 2.0 / E;
        let expected = [1.0 / z, E.recip() / z, E.recip() / z, 1.0 / z];
        let got = exact_gibbs_distribution(&h, 1.0, 16).unwrap();
        for (g, e) in got.iter().zip(expected) {
            assert!((g - e).abs() < 1e-15);
        }
        assert!((got.iter().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cap_exceeded_is_reported() {
        let h = IsingModel::new(Graph::grid(3, 3));
        let err = exact_partition_function(&h, 1.0, 100).unwrap_err();
        assert!(matches!(err, Error::EnumerationInfeasible { .. }));
        let big = IsingModel::new(Graph::path(70));
        assert!(matches!(
            Spectrum::enumerate(&big, DEFAULT_ENUMERATION_CAP),
            Err(Error::EnumerationInfeasible { .. })
        ));
    }

    #[test]
    fn moments_examples() {
        let h = single_edge();
        let m = exact_moments(&h, 0.7, |_| 1.0, 16).unwrap();
        assert!((m.mean - 1.0).abs() < 1e-15 && (m.second_moment - 1.0).abs() < 1e-15);
        assert!((m.relative_variance() - 1.0).abs() < 1e-15);

        let m = exact_moments(&h, 0.0, |x| (-0.5 * f64::from(h.energy(x))).exp(), 16).unwrap();
        assert!((m.mean - (2.0 + 2.0 * (-0.5f64).exp()) / 4.0).abs() < 1e-15);

        // E[V] = Z(β/2)/Z(0) for d = β/2.
        let beta = 1.3;
        let d = beta / 2.0;
        let m = exact_moments(&h, 0.0, |x| (-d * f64::from(h.energy(x))).exp(), 16).unwrap();
        let ratio = exact_partition_function(&h, beta / 2.0, 16).unwrap().value() / 4.0;
        assert!((m.mean - ratio).abs() < 1e-14);

        assert!(matches!(
            exact_moments(&h, 0.0, |_| 0.0, 16),
            Err(Error::DegenerateFunction)
        ));
    }

    #[test]
    fn invalid_models_rejected() {
        assert!(Graph::new(2, vec![(0, 0)]).is_err());
        assert!(Graph::new(2, vec![(0, 1), (1, 0)]).is_err());
        assert!(Graph::new(2, vec![(0, 2)]).is_err());
        assert!(PottsModel::new(Graph::path(2), 1).is_err());
        assert!(LookupHamiltonian::new(vec![1, 2]).is_err());
        assert!(LookupHamiltonian::new(vec![]).is_err());
    }

    #[test]
    fn model_spec_json() {
        let spec: ModelSpec =
            serde_json::from_str(r#"{"type":"potts","vertices":3,"edges":[[0,1],[1,2],[0,2]],"k":3}"#)
                .unwrap();
        let model = spec.build().unwrap();
        assert_eq!(model.state_count(), Some(27));
        assert_eq!(model.max_energy(), 3);

        let spec: ModelSpec = serde_json::from_str(r#"{"type":"lookup","energies":[0,2,1]}"#).unwrap();
        let model = spec.build().unwrap();
        assert_eq!(model.energy(1), 2);
        assert_eq!(model.max_energy(), 2);
    }

    #[test]
    fn mixed_radix_round_trip() {
        let h = triangle_potts();
        let mut config = vec![0; 3];
        for s in 0..27 {
            h.decode(s, &mut config);
            assert_eq!(h.encode(&config), s);
        }
    }

    #[test]
    fn local_energy_accounts_for_neighbor_terms() {
        let h = IsingModel::new(Graph::grid(3, 3));
        let mut config = vec![0; 9];
        h.decode(0b101_100_011, &mut config);
        let total = h.config_energy(&config);
        for site in 0..9 {
            let old = config[site];
            let before = h.local_energy(&config, site, old);
            let after = h.local_energy(&config, site, 1 - old);
            config[site] = 1 - old;
            assert_eq!(h.config_energy(&config) + before, total + after);
            config[site] = old;
        }
    }
}
