mod common;

use common::{brute_energies, brute_z};
use gibbsum::estimator::exact_stage;
use gibbsum::models::{LookupHamiltonian, Spectrum};
use gibbsum::numeric::log_sum_exp;
use gibbsum::qsim::jump::jump_failure_probability;
use gibbsum::qsim::qsample::{overlap_squared_exact, prepare_qsample_from_spectrum};
use gibbsum::qsim::{reflect, ResourceLedger};
use gibbsum::sampling::{stream_rng, ExactSampler};
use gibbsum::schedule::{binary_search, build_partition, find_heavy, pick_heaviest};
use proptest::prelude::*;
use std::sync::Arc;

fn lookup() -> impl Strategy<Value = Vec<u32>> {
    prop::collection::vec(0u32..12, 2..40).prop_map(|mut e| {
        e[0] = 0;
        e
    })
}

fn random_graph() -> impl Strategy<Value = (usize, Vec<(usize, usize)>)> {
    (2usize..7).prop_flat_map(|v| {
        let pairs: Vec<(usize, usize)> = (0..v).flat_map(|a| (a + 1..v).map(move |b| (a, b))).collect();
        let count = pairs.len();
        (Just(v), prop::sample::subsequence(pairs, 1..=count))
    })
}

proptest! {
    #[test]
    fn partition_covers_energy_range(n in 1u32..5000, q in 0.1f64..200.0) {
        let p = build_partition(n, q);
        let iv = p.intervals();
        prop_assert_eq!(iv[0].lo, 0);
        prop_assert_eq!(iv.last().unwrap().hi, n);
        for w in iv.windows(2) {
            prop_assert_eq!(w[0].hi + 1, w[1].lo);
        }
        for i in &iv[..iv.len() - 1] {
            prop_assert_eq!(i.hi - i.lo, (f64::from(i.lo) / q.sqrt()).floor() as u32);
        }
    }

    #[test]
    fn binary_search_is_certified(c in 0.0f64..10.0, alpha in 0.001f64..1.0) {
        let out = binary_search(|x| Ok(x <= c), 0.0, 10.0, alpha).unwrap();
        prop_assert!(out.value <= c);
        prop_assert!(out.value == 10.0 || out.value + alpha > c);
        prop_assert!(out.is_certified(10.0, alpha));
    }

    #[test]
    fn log_sum_exp_matches_direct_sum(xs in prop::collection::vec(-30.0f64..30.0, 1..30), shift in -500.0f64..500.0) {
        let direct = xs.iter().map(|x| x.exp()).sum::<f64>().ln();
        let l = log_sum_exp(xs.iter().copied());
        prop_assert!((l - direct).abs() <= 1e-12 * direct.abs().max(1.0));
        let shifted = log_sum_exp(xs.iter().map(|x| x + shift));
        prop_assert!((shifted - (l + shift)).abs() <= 1e-9 * (l + shift).abs().max(1.0));
    }

    #[test]
    fn qsamples_are_unit_vectors(energies in lookup(), beta in 0.0f64..20.0) {
        let sp = Spectrum::enumerate(&LookupHamiltonian::new(energies).unwrap(), 1 << 10).unwrap();
        let q = prepare_qsample_from_spectrum(&sp, beta);
        prop_assert!((q.norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reflection_is_an_involution(energies in lookup(), beta in 0.0f64..5.0, seed in prop::collection::vec(-1.0f64..1.0, 40)) {
        let sp = Spectrum::enumerate(&LookupHamiltonian::new(energies).unwrap(), 1 << 10).unwrap();
        let q = prepare_qsample_from_spectrum(&sp, beta);
        let v: Vec<f64> = seed[..q.dimension()].to_vec();
        let mut ledger = ResourceLedger::default();
        let back = reflect(&reflect(&v, &q, &mut ledger), &q, &mut ledger);
        for (a, b) in back.iter().zip(&v) {
            prop_assert!((a - b).abs() < 1e-12);
        }
        prop_assert_eq!(ledger.reflections_invoked, 2);
    }

    #[test]
    fn overlap_decreases_with_distance(energies in lookup(), a in 0.0f64..3.0, d1 in 0.0f64..3.0, d2 in 0.0f64..3.0) {
        let sp = Spectrum::enumerate(&LookupHamiltonian::new(energies).unwrap(), 1 << 10).unwrap();
        let (near, far) = (a + d1.min(d2), a + d1.max(d2));
        prop_assert!(overlap_squared_exact(&sp, a, far) <= overlap_squared_exact(&sp, a, near) + 1e-12);
    }

    #[test]
    fn overlap_is_reciprocal_relative_variance(energies in lookup(), a in 0.0f64..3.0, d in 0.01f64..3.0) {
        let sp = Spectrum::enumerate(&LookupHamiltonian::new(energies).unwrap(), 1 << 10).unwrap();
        let st = exact_stage(&sp, a, a + d);
        let o = overlap_squared_exact(&sp, a, a + d);
        prop_assert!((o * st.relvar_v - 1.0).abs() < 1e-9);
        prop_assert!((o * st.relvar_w - 1.0).abs() < 1e-9);
        prop_assert!(st.relvar_v <= st.relvar_x * (1.0 + 1e-9));
    }

    #[test]
    fn telescoping_recovers_ratio(energies in lookup(), mut betas in prop::collection::vec(0.0f64..6.0, 2..6)) {
        betas.sort_by(f64::total_cmp);
        betas.dedup();
        let sp = Spectrum::enumerate(&LookupHamiltonian::new(energies.clone()).unwrap(), 1 << 10).unwrap();
        let log_q: f64 = betas.windows(2).map(|w| {
            let st = exact_stage(&sp, w[0], w[1]);
            st.log_mean_v - st.log_mean_w
        }).sum();
        let exact = (brute_z(&energies, *betas.last().unwrap()) / brute_z(&energies, betas[0])).ln();
        prop_assert!((log_q - exact).abs() < 1e-10);
    }

    #[test]
    fn z_shift_bound((v, edges) in random_graph(), k in 2usize..4, beta in 0.0f64..5.0, eps in 0.0f64..3.0) {
        let energies = brute_energies(v, &edges, k);
        let n = edges.len() as f64;
        prop_assert!((-n * eps).exp() * brute_z(&energies, beta) <= brute_z(&energies, beta + eps) * (1.0 + 1e-12));
        prop_assert!(brute_z(&energies, beta + eps) <= brute_z(&energies, beta) * (1.0 + 1e-12));
    }

    #[test]
    fn jump_failure_is_monotone(a in 0.01f64..0.5, k in 0u64..50) {
        prop_assert!(jump_failure_probability(a, k + 1) <= jump_failure_probability(a, k));
        prop_assert!(jump_failure_probability(a + 0.01, k) <= jump_failure_probability(a, k));
    }

    #[test]
    fn log_z_is_bounded_decreasing_and_convex(energies in lookup(), beta in 0.0f64..8.0) {
        let sp = Spectrum::enumerate(&LookupHamiltonian::new(energies.clone()).unwrap(), 1 << 10).unwrap();
        let h = 1e-3;
        let (a, b, c) = (sp.log_partition(beta), sp.log_partition(beta + h), sp.log_partition(beta + 2.0 * h));
        prop_assert!(a >= -1e-12 && a <= (energies.len() as f64).ln() + 1e-12);
        prop_assert!(b <= a);
        if energies.iter().any(|&e| e > 0) {
            prop_assert!(sp.log_partition(beta + 1.0) < sp.log_partition(beta) || beta > 2.0);
        }
        prop_assert!(a - 2.0 * b + c >= -1e-9);
    }

    #[test]
    fn heavy_interval_is_never_forbidden(
        energies in lookup(),
        beta in 0.0f64..4.0,
        mask in prop::collection::vec(any::<bool>(), 64),
        seed in any::<u64>(),
    ) {
        let sp = Arc::new(Spectrum::enumerate(&LookupHamiltonian::new(energies).unwrap(), 1 << 10).unwrap());
        let n = sp.max_energy().max(1);
        let partition = build_partition(n, 2.0);
        let forbidden: Vec<bool> = mask[..partition.len()].to_vec();
        let mut sampler = ExactSampler::new(sp.clone(), stream_rng(seed, 0));
        match find_heavy(&partition, &forbidden, beta, 0.1, 0.1, &mut sampler) {
            Ok(i) => prop_assert!(!forbidden[i]),
            Err(_) => prop_assert!(forbidden.iter().all(|&f| f)),
        }
        let hits: Vec<u64> = (0..partition.len() as u64).collect();
        if let Ok(i) = pick_heaviest(&hits, &forbidden) {
            prop_assert!(!forbidden[i]);
        }
    }
}
