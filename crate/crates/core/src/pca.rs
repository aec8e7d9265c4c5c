//! Principal component analysis over spectral bands.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::cube::HyperCube;
use crate::error::{Error, Result};

const ROWS_PER_CHUNK: usize = 1024;

/// Fitted projection onto the leading principal components.
#[derive(Debug, Clone, PartialEq)]
pub struct PcaModel {
    mean: Vec<f64>,
    /// `R x L`, one unit-norm component per row.
    components: Vec<Vec<f64>>,
    /// All `L` eigenvalues of the covariance, descending.
    explained_variance: Vec<f64>,
    retained: f64,
}

impl PcaModel {
    pub fn input_dim(&self) -> usize {
        self.mean.len()
    }

    /// Number of retained components `R`.
    pub fn n_components(&self) -> usize {
        self.components.len()
    }

    pub fn mean(&self) -> &[f64] {
        &self.mean
    }

    pub fn components(&self) -> &[Vec<f64>] {
        &self.components
    }

    pub fn explained_variance(&self) -> &[f64] {
        &self.explained_variance
    }

    /// Fraction of total variance captured by the retained components.
    pub fn retained_variance(&self) -> f64 {
        self.retained
    }

    pub fn project(&self, row: &[f32], out: &mut [f64]) {
        for (o, comp) in out.iter_mut().zip(&self.components) {
            *o = comp
                .iter()
                .zip(row.iter().zip(&self.mean))
                .map(|(c, (&x, m))| c * (f64::from(x) - m))
                .sum();
        }
    }

    /// Maps projected coordinates back to the input space.
    pub fn reconstruct(&self, projected: &[f64]) -> Vec<f64> {
        let mut out = self.mean.clone();
        for (coef, comp) in projected.iter().zip(&self.components) {
            for (o, c) in out.iter_mut().zip(comp) {
                *o += coef * c;
            }
        }
        out
    }

    /// Projects a row-major `n x L` block into an `n x R` block.
    pub fn project_rows(&self, rows: &[f32]) -> Result<Vec<f32>> {
        let dim = self.input_dim();
        if rows.len() % dim != 0 {
            return Err(Error::DimensionMismatch {
                expected: format!("rows of {dim} values"),
                found: format!("{} values", rows.len()),
            });
        }
        let r = self.n_components();
        let mut out = vec![0f32; rows.len() / dim * r];
        out.par_chunks_mut(r)
            .zip(rows.par_chunks(dim))
            .for_each_init(
                || vec![0f64; r],
                |buf, (dst, src)| {
                    self.project(src, buf);
                    for (d, v) in dst.iter_mut().zip(buf.iter()) {
                        *d = *v as f32;
                    }
                },
            );
        Ok(out)
    }
}

/// Fits PCA on every pixel spectrum of a normalized cube, keeping the
/// smallest number of components whose cumulative explained variance reaches
/// `variance_threshold`.
pub fn fit_pca(cube: &HyperCube, variance_threshold: f64) -> Result<PcaModel> {
    if !cube.is_normalized() {
        return Err(Error::NotNormalized);
    }
    fit_pca_rows(cube.data(), cube.bands(), variance_threshold)
}

/// Same as [`fit_pca`] over an arbitrary row-major `n x dim` block.
pub fn fit_pca_rows(rows: &[f32], dim: usize, variance_threshold: f64) -> Result<PcaModel> {
    if !(variance_threshold > 0.0 && variance_threshold <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "variance threshold must be in (0, 1], got {variance_threshold}"
        )));
    }
    if dim == 0 || rows.is_empty() || rows.len() % dim != 0 {
        return Err(Error::InvalidShape(format!(
            "{} values cannot form rows of {dim}",
            rows.len()
        )));
    }
    if rows.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let n = rows.len() / dim;

    let mean = chunked_sum(rows, dim, |acc, row| {
        for (a, &x) in acc.iter_mut().zip(row) {
            *a += f64::from(x);
        }
    }, dim)
    .into_iter()
    .map(|s| s / n as f64)
    .collect::<Vec<_>>();

    if dim == 1 {
        let var = rows
            .iter()
            .map(|&x| (f64::from(x) - mean[0]).powi(2))
            .sum::<f64>()
            / n as f64;
        return Ok(PcaModel {
            mean,
            components: vec![vec![1.0]],
            explained_variance: vec![var],
            retained: 1.0,
        });
    }

    // upper triangle of the scatter matrix, accumulated per fixed-size chunk
    // and summed in chunk order so the result does not depend on thread count
    let upper = chunked_sum(rows, dim, |acc, row| {
        let mut k = 0;
        for i in 0..dim {
            let di = f64::from(row[i]) - mean[i];
            for j in i..dim {
                acc[k] += di * (f64::from(row[j]) - mean[j]);
                k += 1;
            }
        }
    }, dim * (dim + 1) / 2);

    let mut cov = DMatrix::<f64>::zeros(dim, dim);
    let mut k = 0;
    for i in 0..dim {
        for j in i..dim {
            let v = upper[k] / n as f64;
            cov[(i, j)] = v;
            cov[(j, i)] = v;
            k += 1;
        }
    }

    let eigen = SymmetricEigen::new(cov);
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| eigen.eigenvalues[b].total_cmp(&eigen.eigenvalues[a]));
    let explained_variance: Vec<f64> = order
        .iter()
        .map(|&i| eigen.eigenvalues[i].max(0.0))
        .collect();
    let total: f64 = explained_variance.iter().sum();

    let (r, retained) = if total <= 0.0 {
        (1, 1.0)
    } else {
        let mut cumulative = 0.0;
        let mut chosen = dim;
        for (idx, v) in explained_variance.iter().enumerate() {
            cumulative += v;
            if cumulative / total >= variance_threshold {
                chosen = idx + 1;
                break;
            }
        }
        let kept: f64 = explained_variance[..chosen].iter().sum();
        (chosen, (kept / total).min(1.0))
    };

    let components = order[..r]
        .iter()
        .map(|&col| {
            let mut v: Vec<f64> = eigen.eigenvectors.column(col).iter().copied().collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            let pivot = v
                .iter()
                .copied()
                .fold(0.0f64, |best, x| if x.abs() > best.abs() { x } else { best });
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            for x in &mut v {
                *x *= sign / norm;
            }
            v
        })
        .collect();

    Ok(PcaModel {
        mean,
        components,
        explained_variance,
        retained,
    })
}

fn chunked_sum<F>(rows: &[f32], dim: usize, accumulate: F, width: usize) -> Vec<f64>
where
    F: Fn(&mut [f64], &[f32]) + Sync,
{
    let partials: Vec<Vec<f64>> = rows
        .par_chunks(dim * ROWS_PER_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0f64; width];
            for row in chunk.chunks_exact(dim) {
                accumulate(&mut acc, row);
            }
            acc
        })
        .collect();
    let mut total = vec![0f64; width];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Projects every pixel of `cube` onto the model's components.
pub fn apply_pca(cube: &HyperCube, model: &PcaModel) -> Result<HyperCube> {
    if cube.bands() != model.input_dim() {
        return Err(Error::DimensionMismatch {
            expected: format!("{} bands", model.input_dim()),
            found: format!("{} bands", cube.bands()),
        });
    }
    let data = model.project_rows(cube.data())?;
    HyperCube::new(cube.height(), cube.width(), model.n_components(), data)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn rank_one_cube() -> HyperCube {
        let base = [0.2f32, 0.5, 0.9, 0.4, 0.1];
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let data = (0..6 * 7)
            .flat_map(|_| {
                let s: f32 = rng.random_range(0.1..1.0);
                base.iter().map(move |b| b * s).collect::<Vec<_>>()
            })
            .collect();
        HyperCube::new_normalized(6, 7, 5, data).unwrap()
    }

    #[test]
    fn rank_one_cube_keeps_one_component() {
        let model = fit_pca(&rank_one_cube(), 0.999).unwrap();
        assert_eq!(model.n_components(), 1);
        assert!(model.retained_variance() >= 0.999);
    }

    #[test]
    fn rank_one_reconstruction_is_exact() {
        let cube = rank_one_cube();
        let model = fit_pca(&cube, 0.999).unwrap();
        let reduced = apply_pca(&cube, &model).unwrap();
        assert_eq!(reduced.bands(), 1);
        for (i, spectrum) in cube.spectra().enumerate() {
            let mut coef = [0.0];
            model.project(spectrum, &mut coef);
            let back = model.reconstruct(&coef);
            for (a, b) in back.iter().zip(spectrum) {
                assert!((a - f64::from(*b)).abs() < 1e-6, "pixel {i}");
            }
        }
    }

    #[test]
    fn mean_spectrum_projects_to_origin() {
        let cube = rank_one_cube();
        let model = fit_pca(&cube, 0.999).unwrap();
        let mean: Vec<f32> = model.mean().iter().map(|&v| v as f32).collect();
        let mut out = vec![0.0; model.n_components()];
        model.project(&mean, &mut out);
        assert!(out.iter().all(|v| v.abs() < 1e-6));
    }

    #[test]
    fn band_count_mismatch_is_rejected() {
        let model = fit_pca(&rank_one_cube(), 0.9).unwrap();
        let other = HyperCube::new_normalized(1, 1, 3, vec![0.0; 3]).unwrap();
        assert!(matches!(
            apply_pca(&other, &model),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn single_band_is_a_noop_model() {
        let cube = HyperCube::new_normalized(1, 3, 1, vec![0.1, 0.2, 0.6]).unwrap();
        let model = fit_pca(&cube, 0.5).unwrap();
        assert_eq!(model.n_components(), 1);
        assert_eq!(model.components()[0], vec![1.0]);
    }

    #[test]
    fn threshold_and_normalization_preconditions() {
        let cube = rank_one_cube();
        assert!(fit_pca(&cube, 0.0).is_err());
        assert!(fit_pca(&cube, 1.5).is_err());
        let raw = HyperCube::new(1, 1, 2, vec![1.0, 2.0]).unwrap();
        assert!(matches!(fit_pca(&raw, 0.9), Err(Error::NotNormalized)));
        assert!(matches!(
            fit_pca_rows(&[f32::INFINITY, 1.0], 2, 0.9),
            Err(Error::NonFinite)
        ));
    }

    #[test]
    fn components_are_orthonormal_and_sorted() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let data: Vec<f32> = (0..200 * 6).map(|_| rng.random::<f32>()).collect();
        let cube = HyperCube::new_normalized(10, 20, 6, data).unwrap();
        let model = fit_pca(&cube, 1.0).unwrap();
        assert_eq!(model.n_components(), 6);
        for (i, a) in model.components().iter().enumerate() {
            for (j, b) in model.components().iter().enumerate() {
                let dot: f64 = a.iter().zip(b).map(|(x, y)| x * y).sum();
                let want = if i == j { 1.0 } else { 0.0 };
                assert!((dot - want).abs() < 1e-9);
            }
            let pivot = a.iter().copied().fold(0.0f64, |m, x| if x.abs() > m.abs() { x } else { m });
            assert!(pivot > 0.0);
        }
        let ev = model.explained_variance();
        assert!(ev.windows(2).all(|w| w[0] >= w[1]));
    }

    #[test]
    fn cutoff_is_the_smallest_sufficient_count() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let data: Vec<f32> = (0..300 * 8)
            .map(|i| {
                let band = i % 8;
                rng.random::<f32>() / (1 + band * band) as f32
            })
            .collect();
        let cube = HyperCube::new_normalized(15, 20, 8, data).unwrap();
        for threshold in [0.5, 0.8, 0.9, 0.99] {
            let model = fit_pca(&cube, threshold).unwrap();
            let ev = model.explained_variance();
            let total: f64 = ev.iter().sum();
            let r = model.n_components();
            let at_r: f64 = ev[..r].iter().sum::<f64>() / total;
            let before: f64 = ev[..r - 1].iter().sum::<f64>() / total;
            assert!(at_r >= threshold);
            assert!(before < threshold);
        }
    }
}
