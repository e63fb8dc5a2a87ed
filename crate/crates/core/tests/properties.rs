mod oracles;

use oracles::*;
use proptest::prelude::*;
use tame_core::attention::{attention_context, attention_weights};
use tame_core::linalg::{matmul, sqrtm_psd};
use tame_core::metrics::auroc;
use tame_core::replay::{ReplayBuffer, ReplayEntry};
use tame_core::similarity::{cosine_similarity, feature_stats, fid, FeatureStats};
use tame_core::task::{Task, TaskRole};
use tame_core::Tensor;

fn stats(mean: Vec<f64>, covariance: Vec<f64>) -> FeatureStats {
    FeatureStats {
        mean,
        covariance,
        n_samples: 10_000,
    }
}

fn random_stats(seed: u64, d: usize) -> FeatureStats {
    let mut r = oracles::rng(seed);
    let mean = uniform_vec(&mut r, d, -2.0, 2.0);
    stats(mean, random_spd(&mut r, d))
}

#[test]
fn feature_stats_match_two_pass_oracle() {
    let mut r = oracles::rng(500);
    let data = uniform_vec(&mut r, 500 * 8, -3.0, 5.0);
    let rows: Vec<Vec<f64>> = data.chunks(8).map(<[f64]>::to_vec).collect();
    let (mean, cov) = two_pass_covariance(&rows);
    let got = feature_stats(&Tensor::from_vec(&[500, 8], data).unwrap()).unwrap();
    for (a, b) in got.mean.iter().zip(&mean) {
        assert!(rel_err(*a, *b) <= 1e-10);
    }
    for (a, b) in got.covariance.iter().zip(&cov) {
        assert!((a - b).abs() <= 1e-10 * b.abs().max(1e-3));
    }
}

#[test]
fn fid_matches_eigen_oracle() {
    for seed in 0..40 {
        let d = 1 + (seed as usize % 12);
        let (a, b) = (random_stats(2 * seed, d), random_stats(2 * seed + 1, d));
        let want = fid_oracle(&a.mean, &a.covariance, &b.mean, &b.covariance);
        let got = fid(&a, &b).unwrap();
        assert!(rel_err(got, want) <= 1e-6, "d={d}: {got} vs {want}");
    }
}

#[test]
fn psd_square_root_reconstructs_its_argument() {
    for d in [1, 3, 7, 16] {
        let s = random_spd(&mut oracles::rng(d as u64), d);
        let root = sqrtm_psd(&s, d);
        let back = matmul(&root, &root, d);
        for (x, y) in back.iter().zip(&s) {
            assert!((x - y).abs() <= 1e-10);
        }
    }
}

#[test]
fn synthetic_archetypes_separate_under_a_random_extractor() {
    use tame_core::nn::{CnnConfig, ExpertCnn};
    use tame_core::task::make_synthetic_task;
    let net = ExpertCnn::<f64>::new(CnnConfig::default().with_image_size(16), &mut tame_core::rng::stream(4, &[])).unwrap();
    let feats = |archetype, seed| {
        let t = make_synthetic_task(archetype, 100, seed, 16).unwrap();
        feature_stats(&net.features(&t.images::<f64>()).unwrap()).unwrap()
    };
    let (a1, a2, other) = (feats(0, 1), feats(0, 2), feats(3, 1));
    assert!(fid(&a1, &a2).unwrap() < fid(&a1, &other).unwrap());
}

fn vec_strategy(d: usize) -> impl Strategy<Value = Vec<f64>> {
    prop::collection::vec(-10.0f64..10.0, d)
}

fn entry(id: u64, n: usize) -> ReplayEntry<f64> {
    let task = Task {
        task_id: format!("t{id}"),
        role: TaskRole::Lifelong,
        height: 1,
        width: 1,
        pixels: vec![0; 3 * n],
        labels: vec![0; n],
        class_pair: (0, 1),
        archetype: None,
    };
    ReplayEntry::new(&task, Tensor::zeros(&[n, 1])).unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn fid_is_symmetric_nonnegative_and_zero_on_itself(seed in 0u64..10_000, d in 1usize..10) {
        let (a, b) = (random_stats(seed, d), random_stats(seed + 77_777, d));
        let ab = fid(&a, &b).unwrap();
        prop_assert!(ab >= 0.0);
        prop_assert!((ab - fid(&b, &a).unwrap()).abs() <= 1e-8 * ab.max(1.0));
        prop_assert!(fid(&a, &a).unwrap() <= 1e-8);
    }

    #[test]
    fn cosine_is_scale_invariant(a in vec_strategy(6), b in vec_strategy(6), c in 0.01f64..100.0) {
        prop_assume!(a.iter().any(|v| v.abs() > 1e-3) && b.iter().any(|v| v.abs() > 1e-3));
        let scaled: Vec<f64> = a.iter().map(|v| v * c).collect();
        let s = cosine_similarity(&a, &b).unwrap();
        prop_assert!((s - cosine_similarity(&scaled, &b).unwrap()).abs() <= 1e-12);
        prop_assert!((-1.0..=1.0).contains(&s));
    }

    #[test]
    fn attention_is_a_distribution_and_shift_invariant(
        q in vec_strategy(4),
        keys in prop::collection::vec(vec_strategy(4), 1..8),
        t in -3.0f64..3.0,
    ) {
        let w = attention_weights(&q, &keys, 4).unwrap();
        prop_assert!(w.iter().all(|&x| x >= 0.0));
        prop_assert!((w.iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        // adding t*q to every key adds t*|q|^2/sqrt(d_k) to every logit
        let shifted: Vec<Vec<f64>> = keys.iter().map(|k| k.iter().zip(&q).map(|(a, b)| a + t * b).collect()).collect();
        let w2 = attention_weights(&q, &shifted, 4).unwrap();
        for (a, b) in w.iter().zip(&w2) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
    }

    #[test]
    fn attention_ordering_follows_logits(q in vec_strategy(3), keys in prop::collection::vec(vec_strategy(3), 2..6)) {
        let w = attention_weights(&q, &keys, 3).unwrap();
        let dot = |k: &Vec<f64>| q.iter().zip(k).map(|(a, b)| a * b).sum::<f64>();
        for i in 0..keys.len() {
            for j in 0..keys.len() {
                if dot(&keys[i]) > dot(&keys[j]) + 1e-9 && w[j] > 1e-300 {
                    prop_assert!(w[i] > w[j]);
                }
            }
        }
    }

    #[test]
    fn attention_context_is_linear_and_matches_loops(
        raw in prop::collection::vec(0.01f64..1.0, 1..6),
        seed in 0u64..1000,
    ) {
        let total: f64 = raw.iter().sum();
        let alpha: Vec<f64> = raw.iter().map(|v| v / total).collect();
        let mut r = oracles::rng(seed);
        let v: Vec<Vec<f64>> = (0..alpha.len()).map(|_| uniform_vec(&mut r, 5, -4.0, 4.0)).collect();
        let w: Vec<Vec<f64>> = (0..alpha.len()).map(|_| uniform_vec(&mut r, 5, -4.0, 4.0)).collect();
        let sum: Vec<Vec<f64>> = v.iter().zip(&w).map(|(a, b)| a.iter().zip(b).map(|(x, y)| x + y).collect()).collect();
        let cv = attention_context(&alpha, &v).unwrap();
        let cw = attention_context(&alpha, &w).unwrap();
        let cs = attention_context(&alpha, &sum).unwrap();
        for k in 0..5 {
            prop_assert!((cs[k] - cv[k] - cw[k]).abs() <= 1e-12);
            let naive: f64 = (0..alpha.len()).map(|j| alpha[j] * v[j][k]).sum();
            prop_assert!((cv[k] - naive).abs() <= 1e-12);
        }
    }

    #[test]
    fn auroc_matches_pairs_complements_and_ignores_monotone_maps(
        pts in prop::collection::vec((0u8..20, any::<bool>()), 2..120),
    ) {
        let scores: Vec<f64> = pts.iter().map(|p| p.0 as f64 / 20.0).collect();
        let labels: Vec<u8> = pts.iter().map(|p| p.1 as u8).collect();
        prop_assume!(labels.contains(&0) && labels.contains(&1));
        let a = auroc(&scores, &labels).unwrap();
        prop_assert!((a - auroc_oracle(&scores, &labels)).abs() <= 1e-12);
        let flipped: Vec<u8> = labels.iter().map(|l| 1 - l).collect();
        prop_assert!((auroc(&scores, &flipped).unwrap() - (1.0 - a)).abs() <= 1e-12);
        let mapped: Vec<f64> = scores.iter().map(|s| (3.0 * s).exp() - 1.0).collect();
        prop_assert!((auroc(&mapped, &labels).unwrap() - a).abs() <= 1e-12);
    }

    #[test]
    fn buffer_agrees_with_queue_model(ops in prop::collection::vec((0usize..4, 1usize..450, any::<bool>()), 1..300)) {
        let mut buf = ReplayBuffer::<f64>::new(1000);
        let mut model = QueueModel::new(1000);
        for (i, (expert, size, store)) in ops.into_iter().enumerate() {
            if store {
                let report = buf.store(expert, entry(i as u64, size)).unwrap();
                let evicted = model.store(expert, size);
                prop_assert_eq!(report.evicted.len(), evicted.len());
            }
            prop_assert!(buf.total() <= 1000);
            prop_assert_eq!(buf.total(), model.total());
            let got: Vec<u64> = buf.retrieve(expert).iter().map(|e| e.insertion_step).collect();
            prop_assert_eq!(got, model.retrieve(expert));
        }
    }
}
