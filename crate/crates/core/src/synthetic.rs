//! Seeded synthetic scenes with known ground truth.
//!
//! A scene is a set of agricultural-style field strips, each with its own
//! smooth class spectrum, plus an optional background region labelled `0`.
//! Pixels get per-pixel brightness jitter and per-band Gaussian noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::cube::{HyperCube, LabelMap};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SceneParams {
    pub height: usize,
    pub width: usize,
    pub bands: usize,
    pub classes: usize,
    /// Fraction of columns, from the left edge, kept as background.
    pub background_fraction: f64,
    /// Per-band noise standard deviation, in reflectance units.
    pub noise: f64,
    /// Per-pixel multiplicative brightness jitter.
    pub brightness_jitter: f64,
    /// Scale of the class-specific spectral features over a shared base.
    pub contrast: f64,
    pub seed: u64,
}

impl SceneParams {
    /// Field scene with the shape of the small Salinas subscene.
    pub fn field(seed: u64) -> Self {
        Self {
            height: 86,
            width: 83,
            bands: 204,
            classes: 6,
            background_fraction: 0.1,
            noise: 0.03,
            brightness_jitter: 0.05,
            contrast: 0.5,
            seed,
        }
    }
}

fn bumps(rng: &mut ChaCha8Rng) -> Vec<(f64, f64, f64)> {
    (0..3)
        .map(|_| {
            (
                rng.random_range(0.0..1.0),
                rng.random_range(0.05..0.2),
                rng.random_range(-0.15..0.35),
            )
        })
        .collect()
}

fn class_spectrum(
    bands: usize,
    shared: &[(f64, f64, f64)],
    contrast: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<f64> {
    let base = 0.25 + contrast * rng.random_range(-0.1..0.1);
    let own: Vec<(f64, f64, f64)> = bumps(rng)
        .into_iter()
        .map(|(c, w, a)| (c, w, a * contrast))
        .chain(shared.iter().copied())
        .collect();
    (0..bands)
        .map(|b| {
            let t = b as f64 / bands.max(2) as f64;
            let v = own.iter().fold(base, |acc, &(c, w, a)| {
                acc + a * (-((t - c) / w).powi(2)).exp()
            });
            v.clamp(0.02, 0.95)
        })
        .collect()
}

/// Raw (not normalized) cube and its ground truth.
///
/// Columns right of the background band are split into `classes` slanted
/// strips of near-equal width; labels are `1..=classes`.
pub fn field_scene(params: &SceneParams) -> Result<(HyperCube, LabelMap)> {
    let SceneParams {
        height,
        width,
        bands,
        classes,
        background_fraction,
        noise,
        brightness_jitter,
        contrast,
        seed,
    } = *params;
    if classes == 0 || !(0.0..1.0).contains(&background_fraction) {
        return Err(Error::InvalidParameter(
            "scene needs at least one class and a background fraction in [0, 1)".into(),
        ));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let shared = bumps(&mut rng);
    let spectra: Vec<Vec<f64>> = (0..=classes)
        .map(|_| class_spectrum(bands, &shared, contrast, &mut rng))
        .collect();
    let offset = (background_fraction * width as f64).round() as usize;
    let field_width = (width - offset).max(1) as f64;
    let mut gt = Vec::with_capacity(height * width);
    for y in 0..height {
        for x in 0..width {
            if x < offset {
                gt.push(0u32);
                continue;
            }
            // strips lean by a quarter strip width over the scene height
            let lean = 0.25 * (y as f64 / height as f64);
            let u = (x - offset) as f64 / field_width * classes as f64 + lean;
            gt.push((u.floor() as usize).min(classes - 1) as u32 + 1);
        }
    }
    let jitter = Normal::new(1.0, brightness_jitter.max(0.0)).expect("valid jitter");
    let band_noise = Normal::new(0.0, noise.max(0.0)).expect("valid noise");
    let mut data = Vec::with_capacity(height * width * bands);
    for &label in &gt {
        let s = &spectra[label as usize];
        let g: f64 = jitter.sample(&mut rng);
        for &v in s {
            data.push((v * g + band_noise.sample(&mut rng)).max(0.0) as f32);
        }
    }
    Ok((
        HyperCube::new(height, width, bands, data)?,
        LabelMap::new(height, width, gt)?,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scene_shape_and_labels() {
        let (cube, gt) = field_scene(&SceneParams::field(1)).unwrap();
        assert_eq!(cube.shape(), (86, 83, 204));
        assert_eq!(gt.distinct_foreground(), 6);
        assert!(gt.labels().contains(&0));
        assert_eq!(field_scene(&SceneParams::field(1)).unwrap().0, cube);
    }
}
