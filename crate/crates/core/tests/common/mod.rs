//! Brute-force oracles that share no code with the library.

#![allow(dead_code)]

/// Vertex count and edge list of the 3×3 grid.
pub fn grid3() -> (usize, Vec<(usize, usize)>) {
    let mut edges = Vec::new();
    for r in 0..3 {
        for c in 0..3 {
            let v = 3 * r + c;
            if c + 1 < 3 {
                edges.push((v, v + 1));
            }
            if r + 1 < 3 {
                edges.push((v, v + 3));
            }
        }
    }
    (9, edges)
}

pub fn cycle(n: usize) -> Vec<(usize, usize)> {
    (0..n).map(|i| (i, (i + 1) % n)).collect()
}

/// Potts energies of every `k`-coloring: the number of monochromatic edges.
pub fn brute_energies(vertices: usize, edges: &[(usize, usize)], k: usize) -> Vec<u32> {
    let total = k.pow(vertices as u32);
    (0..total)
        .map(|mut x| {
            let mut spins = vec![0; vertices];
            for s in spins.iter_mut() {
                *s = x % k;
                x /= k;
            }
            edges.iter().filter(|&&(u, v)| spins[u] == spins[v]).count() as u32
        })
        .collect()
}

/// `Z(β) = Σ e^{−βE}` by direct summation, with `e^{−∞·0} = 1`.
/// Ising energies: the number of edges whose endpoints disagree.
pub fn brute_ising_energies(vertices: usize, edges: &[(usize, usize)]) -> Vec<u32> {
    (0..1usize << vertices)
        .map(|x| edges.iter().filter(|&&(u, v)| (x >> u) & 1 != (x >> v) & 1).count() as u32)
        .collect()
}

pub fn brute_z(energies: &[u32], beta: f64) -> f64 {
    energies
        .iter()
        .map(|&e| if e == 0 { 1.0 } else { (-beta * f64::from(e)).exp() })
        .sum()
}

/// `E_{μ_β}[f(E)]` by direct summation.
pub fn brute_mean(energies: &[u32], beta: f64, f: impl Fn(f64) -> f64) -> f64 {
    let z = brute_z(energies, beta);
    energies
        .iter()
        .map(|&e| (-beta * f64::from(e)).exp() / z * f(f64::from(e)))
        .sum()
}

pub fn proper_colorings(vertices: usize, edges: &[(usize, usize)], k: usize) -> u64 {
    brute_energies(vertices, edges, k).iter().filter(|&&e| e == 0).count() as u64
}

pub fn rel(a: f64, b: f64) -> f64 {
    ((a - b) / b).abs()
}
