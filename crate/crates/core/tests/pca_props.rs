use hyperseg::pca::{apply_pca, fit_pca, fit_pca_rows};
use hyperseg::HyperCube;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn covariance(rows: &[f32], dim: usize) -> (Vec<f64>, Vec<Vec<f64>>) {
    let n = rows.len() / dim;
    let mut mean = vec![0.0; dim];
    for row in rows.chunks(dim) {
        for (m, &x) in mean.iter_mut().zip(row) {
            *m += f64::from(x) / n as f64;
        }
    }
    let mut cov = vec![vec![0.0; dim]; dim];
    for row in rows.chunks(dim) {
        for a in 0..dim {
            for b in 0..dim {
                cov[a][b] += (f64::from(row[a]) - mean[a]) * (f64::from(row[b]) - mean[b]);
            }
        }
    }
    let denom = n as f64;
    cov.iter_mut().flatten().for_each(|v| *v /= denom);
    (mean, cov)
}

/// Rows on a `rank`-dimensional affine subspace plus small isotropic noise.
fn low_rank_rows(n: usize, dim: usize, rank: usize, noise: f32, seed: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let basis: Vec<Vec<f32>> = (0..rank)
        .map(|_| (0..dim).map(|_| rng.random_range(-1.0..1.0)).collect())
        .collect();
    let offset: Vec<f32> = (0..dim).map(|_| rng.random_range(0.3..0.6)).collect();
    let mut out = Vec::with_capacity(n * dim);
    for _ in 0..n {
        let coef: Vec<f32> = (0..rank).map(|k| rng.random_range(-0.2..0.2) / (k + 1) as f32).collect();
        for d in 0..dim {
            let v: f32 = offset[d]
                + coef.iter().zip(&basis).map(|(c, b)| c * b[d]).sum::<f32>()
                + noise * rng.random_range(-1.0..1.0);
            out.push(v);
        }
    }
    out
}

#[test]
fn components_are_covariance_eigenvectors() {
    let dim = 7;
    let rows = low_rank_rows(3000, dim, 4, 0.01, 1);
    let model = fit_pca_rows(&rows, dim, 1.0).unwrap();
    let (mean, cov) = covariance(&rows, dim);
    for (a, b) in model.mean().iter().zip(&mean) {
        assert!((a - b).abs() < 1e-9);
    }
    assert_eq!(model.n_components(), dim);
    let ev = model.explained_variance();
    assert!(ev.windows(2).all(|w| w[0] >= w[1]));
    let trace: f64 = (0..dim).map(|d| cov[d][d]).sum();
    assert!((ev.iter().sum::<f64>() - trace).abs() < 1e-9 * trace.max(1.0));
    for (i, v) in model.components().iter().enumerate() {
        let cv: Vec<f64> = cov.iter().map(|r| r.iter().zip(v).map(|(a, b)| a * b).sum()).collect();
        for (x, y) in cv.iter().zip(v) {
            assert!((x - ev[i] * y).abs() < 1e-8, "component {i}");
        }
        for (j, u) in model.components().iter().enumerate() {
            let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
            let want = if i == j { 1.0 } else { 0.0 };
            assert!((dot - want).abs() < 1e-9);
        }
        let largest = v.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap();
        assert!(largest > 0.0);
    }
}

#[test]
fn exact_low_rank_data_keeps_its_rank() {
    let rows = low_rank_rows(500, 9, 3, 0.0, 4);
    let model = fit_pca_rows(&rows, 9, 0.999).unwrap();
    assert_eq!(model.n_components(), 3);
    let proj = model.project_rows(&rows).unwrap();
    for (row, p) in rows.chunks(9).zip(proj.chunks(3)) {
        let p: Vec<f64> = p.iter().map(|&v| f64::from(v)).collect();
        for (a, &b) in model.reconstruct(&p).iter().zip(row) {
            assert!((a - f64::from(b)).abs() < 1e-5);
        }
    }
}

#[test]
fn cube_projection_is_centered() {
    let rows = low_rank_rows(20 * 15, 12, 5, 0.02, 9);
    let cube = HyperCube::new_normalized(20, 15, 12, rows).unwrap();
    let model = fit_pca(&cube, 0.99).unwrap();
    let reduced = apply_pca(&cube, &model).unwrap();
    assert_eq!(reduced.shape(), (20, 15, model.n_components()));
    for b in 0..model.n_components() {
        let mean: f64 = reduced.spectra().map(|s| f64::from(s[b])).sum::<f64>() / 300.0;
        assert!(mean.abs() < 1e-5);
    }
    let raw = HyperCube::new(1, 1, 2, vec![1.0, 2.0]).unwrap();
    assert!(fit_pca(&raw, 0.9).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(40))]

    #[test]
    fn smallest_sufficient_component_count(seed in any::<u64>(), thr in 0.5f64..1.0, dim in 2usize..8) {
        let rows = low_rank_rows(200, dim, dim, 0.05, seed);
        let model = fit_pca_rows(&rows, dim, thr).unwrap();
        let ev = model.explained_variance();
        let total: f64 = ev.iter().sum();
        let r = model.n_components();
        let kept: f64 = ev[..r].iter().sum::<f64>() / total;
        prop_assert!(kept >= thr - 1e-12);
        prop_assert!((kept - model.retained_variance()).abs() < 1e-12);
        if r > 1 {
            prop_assert!(ev[..r - 1].iter().sum::<f64>() / total < thr);
        }
    }
}
