use proptest::prelude::*;

use infoselect::functions::{FunctionKind, FunctionParams, InfoFunction};
use infoselect::greedy::{greedy_select, partition_quotas, split_chunks, GreedyConfig, Variant};
use infoselect::harness::{paired_t, penalty_matrix};
use infoselect::scenarios::{BlobConfig, RedundantConfig, ScenarioConfig, StandardConfig};
use infoselect::verify::random_joint;

const MONOTONE: [FunctionKind; 7] = [
    FunctionKind::Fl,
    FunctionKind::Flvmi,
    FunctionKind::Flqmi,
    FunctionKind::Gcmi,
    FunctionKind::Flcg,
    FunctionKind::Flcmi,
    FunctionKind::DivGcmi,
];

const SUBMODULAR: [FunctionKind; 5] = [
    FunctionKind::Fl,
    FunctionKind::Flvmi,
    FunctionKind::Flqmi,
    FunctionKind::Gcmi,
    FunctionKind::DivGcmi,
];

fn instance(kind: FunctionKind, seed: u64, nu: usize) -> InfoFunction {
    let (nq, np) = (3, 2);
    let joint = random_joint(seed, nu, nq, np, 0.0).unwrap();
    let u: Vec<usize> = (0..nu).collect();
    let q: Vec<usize> = (nu..nu + nq).collect();
    let p: Vec<usize> = (nu + nq..nu + nq + np).collect();
    InfoFunction::from_joint(kind, &joint, &u, &q, &p, FunctionParams::default()).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn monotone_gains_are_nonnegative(k in 0..MONOTONE.len(), seed in any::<u64>(), order in Just(()).prop_perturb(|_, mut r| {
        let mut v: Vec<usize> = (0..12).collect();
        for i in (1..v.len()).rev() { v.swap(i, r.random_range(0..=i)); }
        v
    })) {
        let f = instance(MONOTONE[k], seed, 12);
        let mut state = f.new_state();
        for &x in &order[..6] {
            for y in 0..12 {
                if !state.contains(y) {
                    prop_assert!(f.gain(&state, y).unwrap() >= -1e-9);
                }
            }
            f.commit(&mut state, x).unwrap();
        }
    }

    #[test]
    fn gains_diminish_as_the_set_grows(k in 0..SUBMODULAR.len(), seed in any::<u64>(), extra in 1usize..11) {
        let f = instance(SUBMODULAR[k], seed, 12);
        let mut small = f.new_state();
        f.commit(&mut small, 0).unwrap();
        let mut large = small.clone();
        f.commit(&mut large, extra).unwrap();
        for x in (1..12).filter(|&x| x != extra) {
            let (a, b) = (f.gain(&small, x).unwrap(), f.gain(&large, x).unwrap());
            prop_assert!(a >= b - 1e-9, "{:?}: {a} < {b}", SUBMODULAR[k]);
        }
    }

    #[test]
    fn lazy_greedy_matches_naive(k in 0..MONOTONE.len(), seed in any::<u64>(), budget in 1usize..10) {
        let f = instance(MONOTONE[k], seed, 15);
        let naive = greedy_select(&f, &GreedyConfig::new(budget).with_variant(Variant::Naive)).unwrap();
        let lazy = greedy_select(&f, &GreedyConfig::new(budget).with_variant(Variant::Lazy)).unwrap();
        prop_assert_eq!(&naive.chosen, &lazy.chosen);
        prop_assert_eq!(naive.value.to_bits(), lazy.value.to_bits());
    }

    #[test]
    fn partitions_cover_ground_and_budget(n in 1usize..500, p in 1usize..20, b in 1usize..200, seed in any::<u64>()) {
        let p = p.min(n);
        let quotas = partition_quotas(b, p);
        prop_assert_eq!(quotas.len(), p);
        prop_assert_eq!(quotas.iter().sum::<usize>(), b);
        prop_assert!(quotas.iter().max().unwrap() - quotas.iter().min().unwrap() <= 1);
        let chunks = split_chunks(n, p, seed);
        let mut all: Vec<usize> = chunks.concat();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }

    #[test]
    fn penalty_is_antisymmetric(seed in any::<u64>()) {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let traces: Vec<Vec<Vec<f64>>> = (0..3)
            .map(|m| (0..4).map(|_| (0..5).map(|_| 0.5 + 0.05 * m as f64 + 0.02 * rng.random::<f64>()).collect()).collect())
            .collect();
        let names: Vec<String> = ["a", "b", "c"].iter().map(|s| s.to_string()).collect();
        let pm = penalty_matrix(&names, &traces, 0.05).unwrap();
        for i in 0..3 {
            prop_assert_eq!(pm.wins(i, i), 0);
            for j in 0..3 {
                prop_assert!(pm.wins(i, j) + pm.wins(j, i) <= pm.rounds());
                prop_assert!(pm.cell(i, j) >= 0.0 && pm.cell(i, j) <= 1.0);
            }
        }
        let (a, b) = (&traces[0][0], &traces[1][0]);
        prop_assert_eq!(paired_t(a, b), -paired_t(b, a));
    }
}

fn small_standard() -> ScenarioConfig {
    ScenarioConfig::Standard(StandardConfig {
        blobs: BlobConfig { test_per_class: 5, ..Default::default() },
        unlabeled_per_class: 40,
        ..Default::default()
    })
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn reveal_conserves_the_pool(seed in any::<u64>(), take in 1usize..50) {
        let mut split = small_standard().build(seed).unwrap();
        let (l, u, n) = (split.labeled().len(), split.unlabeled().len(), split.len());
        let chosen: Vec<usize> = split.unlabeled().iter().copied().step_by(3).take(take).collect();
        split.reveal(&chosen).unwrap();
        prop_assert_eq!(split.labeled().len(), l + chosen.len());
        prop_assert_eq!(split.unlabeled().len(), u - chosen.len());
        prop_assert_eq!(split.len(), n);
        for &i in &chosen {
            prop_assert!(split.labeled().contains(&i));
            prop_assert!(!split.unlabeled().contains(&i));
        }
        prop_assert!(split.reveal(&chosen[..1]).is_err());
        prop_assert_eq!(split.unlabeled_label_reads(), 0);
    }

    #[test]
    fn redundant_copies_are_exact(seed in any::<u64>()) {
        let cfg = ScenarioConfig::Redundant(RedundantConfig {
            blobs: BlobConfig { test_per_class: 5, ..Default::default() },
            unique: 200,
            labeled_per_class: 5,
            ..Default::default()
        });
        let split = cfg.build(seed).unwrap();
        let map = split.duplication_map();
        let features = split.features();
        let mut copies = 0;
        for &i in split.unlabeled() {
            let o = map[i];
            if o != i {
                copies += 1;
                prop_assert_eq!(features.row(i), features.row(o));
            }
        }
        prop_assert_eq!(copies, 40 * 9);
    }
}
