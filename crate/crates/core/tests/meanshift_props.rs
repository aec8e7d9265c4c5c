use hyperseg::meanshift::{estimate_bandwidth, mean_shift, ClusterModel, Points};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

fn mixture(n_per: usize, centers: &[Vec<f64>], spread: f64, seed: u64) -> Points {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let noise = Normal::new(0.0, spread).unwrap();
    let dim = centers[0].len();
    let mut data = Vec::new();
    for c in centers {
        for _ in 0..n_per {
            data.extend(c.iter().map(|&v| v + noise.sample(&mut rng)));
        }
    }
    Points::new(data, dim).unwrap()
}

fn uniform(n: usize, dim: usize, seed: u64) -> Points {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    Points::new((0..n * dim).map(|_| rng.random::<f64>()).collect(), dim).unwrap()
}

fn check_model(points: &Points, model: &ClusterModel) {
    let bw = model.bandwidth();
    let centers = model.centers();
    for i in 0..centers.len() {
        for j in i + 1..centers.len() {
            let d: f64 = centers[i]
                .iter()
                .zip(&centers[j])
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            assert!(d >= bw / 2.0, "centers {i} and {j} only {d} apart");
        }
    }
    for d in 0..points.dim() {
        let lo = points.rows().map(|r| r[d]).fold(f64::INFINITY, f64::min);
        let hi = points.rows().map(|r| r[d]).fold(f64::NEG_INFINITY, f64::max);
        for c in centers {
            assert!(c[d] >= lo - 1e-12 && c[d] <= hi + 1e-12);
        }
    }
    assert!(model.counts().windows(2).all(|w| w[0] >= w[1]));
    assert_eq!(model.assignment().len(), points.len());
    // nearest-center assignment
    for (row, &a) in points.rows().zip(model.assignment()) {
        let dist = |c: &[f64]| -> f64 { c.iter().zip(row).map(|(x, y)| (x - y).powi(2)).sum() };
        let own = dist(&centers[a]);
        assert!(centers.iter().all(|c| dist(c) >= own));
    }
}

#[test]
fn one_dimensional_two_modes() {
    let points = Points::new(vec![0.0, 0.01, 1.0, 1.01], 1).unwrap();
    let model = mean_shift(&points, 0.1, 0).unwrap();
    assert_eq!(model.n_clusters(), 2);
    let mut c: Vec<f64> = model.centers().iter().map(|c| c[0]).collect();
    c.sort_by(f64::total_cmp);
    assert!((c[0] - 0.005).abs() < 1e-3 && (c[1] - 1.005).abs() < 1e-3);
}

#[test]
fn separated_blobs_are_found() {
    let centers = vec![vec![0.0, 0.0, 0.0], vec![3.0, 0.0, 0.0], vec![0.0, 3.0, 1.0]];
    let points = mixture(150, &centers, 0.2, 5);
    let model = mean_shift(&points, 1.0, 1).unwrap();
    assert_eq!(model.n_clusters(), 3);
    check_model(&points, &model);
    for (k, chunk) in model.assignment().chunks(150).enumerate() {
        assert!(chunk.iter().all(|&a| a == chunk[0]), "blob {k} split");
    }
}

#[test]
fn translation_equivariance() {
    for seed in 0..5 {
        let points = uniform(300, 4, seed);
        let shift = [3.25, -1.5, 10.0, 0.125];
        let moved = Points::new(
            points
                .rows()
                .flat_map(|r| r.iter().zip(&shift).map(|(a, b)| a + b).collect::<Vec<_>>())
                .collect(),
            4,
        )
        .unwrap();
        let a = mean_shift(&points, 0.3, seed).unwrap();
        let b = mean_shift(&moved, 0.3, seed).unwrap();
        assert_eq!(a.assignment(), b.assignment());
        for (ca, cb) in a.centers().iter().zip(b.centers()) {
            for d in 0..4 {
                assert!((ca[d] + shift[d] - cb[d]).abs() < 1e-9);
            }
        }
    }
}

#[test]
fn deterministic_across_thread_counts() {
    let points = uniform(6000, 5, 11);
    let run = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| mean_shift(&points, 0.35, 3).unwrap())
    };
    let one = run(1);
    assert_eq!(one, run(4));
    assert_eq!(one, run(3));
    let bw = |threads: usize| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| estimate_bandwidth(&points, 0.3, 200, 9).unwrap())
    };
    assert_eq!(bw(1), bw(4));
}

#[test]
fn cluster_count_is_monotone_on_mixtures() {
    let ladder = [0.25, 0.35, 0.5, 0.7, 1.0, 1.4, 2.0, 2.8, 4.0, 8.0];
    for seed in 0..4 {
        let centers = vec![vec![0.0, 0.0], vec![2.0, 0.0], vec![0.0, 2.0], vec![2.5, 2.5]];
        let points = mixture(100, &centers, 0.3, seed);
        let counts: Vec<usize> = ladder
            .iter()
            .map(|&bw| mean_shift(&points, bw, seed).unwrap().n_clusters())
            .collect();
        assert!(counts.windows(2).all(|w| w[1] <= w[0]), "seed {seed}: {counts:?}");
        assert_eq!(*counts.last().unwrap(), 1);
    }
}

/// k-th nearest distance with the query counted as its own first neighbour.
fn exhaustive_bandwidth(points: &Points, quantile: f64) -> f64 {
    let n = points.len();
    let k = (quantile * n as f64).floor() as usize;
    let mut total = 0.0;
    for q in points.rows() {
        let mut d: Vec<f64> = points
            .rows()
            .map(|r| r.iter().zip(q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt())
            .collect();
        d.sort_by(f64::total_cmp);
        total += d[k - 1];
    }
    total / n as f64
}

#[test]
fn bandwidth_matches_exhaustive_knn() {
    for seed in 0..4 {
        let points = uniform(60, 3, seed);
        for q in [0.1, 0.3, 0.5, 1.0] {
            let est = estimate_bandwidth(&points, q, 60, seed).unwrap();
            assert!((est - exhaustive_bandwidth(&points, q)).abs() < 1e-12);
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn models_satisfy_invariants(
        data in proptest::collection::vec(-5.0f64..5.0, 2..120),
        bw in 0.05f64..6.0,
        seed in any::<u64>(),
    ) {
        let dim = 2;
        let n = data.len() / dim;
        prop_assume!(n >= 1);
        let points = Points::new(data[..n * dim].to_vec(), dim).unwrap();
        let model = mean_shift(&points, bw, seed).unwrap();
        check_model(&points, &model);
        prop_assert_eq!(&model, &mean_shift(&points, bw, seed).unwrap());
    }
}
