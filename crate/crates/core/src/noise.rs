//! Seeded noise injection on normalized cubes.
//!
//! All generators draw sequentially from one ChaCha stream, so results depend
//! only on the seed. Outputs are clipped to `[0, 1]` and pixels that were not
//! selected are left bit-identical.

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, Poisson};
use serde::{Deserialize, Serialize};

use crate::cube::HyperCube;
use crate::error::{Error, Result};

/// Expected photon count per unit intensity used by default.
pub const DEFAULT_POISSON_LAMBDA: f64 = 5.5;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoissonMode {
    /// `Poisson(v * lambda) / lambda`, preserving the expected value.
    Scaled,
    /// `v + Poisson(lambda)` added to every band.
    Additive,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum NoiseSpec {
    Gaussian { sigma: f64, pixel_fraction: f64, seed: u64 },
    Impulsive { density: f64, seed: u64 },
    Poisson { lambda: f64, mode: PoissonMode, seed: u64 },
}

impl NoiseSpec {
    pub fn apply(&self, cube: &HyperCube) -> Result<HyperCube> {
        match *self {
            NoiseSpec::Gaussian {
                sigma,
                pixel_fraction,
                seed,
            } => add_gaussian(cube, sigma, pixel_fraction, seed),
            NoiseSpec::Impulsive { density, seed } => add_impulsive(cube, density, seed),
            NoiseSpec::Poisson { lambda, mode, seed } => add_poisson(cube, lambda, mode, seed),
        }
    }
}

fn check_normalized(cube: &HyperCube) -> Result<()> {
    if cube.is_normalized() {
        Ok(())
    } else {
        Err(Error::NotNormalized)
    }
}

fn check_fraction(name: &str, f: f64) -> Result<()> {
    if (0.0..=1.0).contains(&f) {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{name} must lie in [0, 1], got {f}")))
    }
}

/// Pixel indices selected for a fraction, in selection order.
fn select(n: usize, fraction: f64, rng: &mut ChaCha8Rng) -> Vec<usize> {
    let count = ((fraction * n as f64).floor() as usize).min(n);
    sample(rng, n, count).into_vec()
}

fn rebuild(cube: &HyperCube, data: Vec<f32>) -> Result<HyperCube> {
    HyperCube::new_normalized(cube.height(), cube.width(), cube.bands(), data)
}

fn clip(v: f64) -> f32 {
    v.clamp(0.0, 1.0) as f32
}

/// Adds `Normal(0, sigma)` to every band of `floor(pixel_fraction * N)`
/// randomly chosen pixels.
pub fn add_gaussian(cube: &HyperCube, sigma: f64, pixel_fraction: f64, seed: u64) -> Result<HyperCube> {
    check_normalized(cube)?;
    if !(sigma >= 0.0 && sigma.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "sigma must be finite and non-negative, got {sigma}"
        )));
    }
    check_fraction("pixel_fraction", pixel_fraction)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let normal = Normal::new(0.0, sigma).expect("sigma validated");
    let mut data = cube.data().to_vec();
    let l = cube.bands();
    for p in select(cube.pixels(), pixel_fraction, &mut rng) {
        for v in &mut data[p * l..(p + 1) * l] {
            *v = clip(f64::from(*v) + normal.sample(&mut rng));
        }
    }
    rebuild(cube, data)
}

/// Saturates `floor(density * N)` random pixels to all ones or all zeros with
/// equal probability.
pub fn add_impulsive(cube: &HyperCube, density: f64, seed: u64) -> Result<HyperCube> {
    check_normalized(cube)?;
    check_fraction("density", density)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut data = cube.data().to_vec();
    let l = cube.bands();
    for p in select(cube.pixels(), density, &mut rng) {
        let value = if rng.random_bool(0.5) { 1.0 } else { 0.0 };
        data[p * l..(p + 1) * l].fill(value);
    }
    rebuild(cube, data)
}

/// Signal-dependent photon noise on every value.
pub fn add_poisson(cube: &HyperCube, lambda: f64, mode: PoissonMode, seed: u64) -> Result<HyperCube> {
    check_normalized(cube)?;
    if !(lambda > 0.0 && lambda.is_finite()) {
        return Err(Error::InvalidParameter(format!(
            "lambda must be finite and positive, got {lambda}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let data = match mode {
        PoissonMode::Scaled => cube
            .data()
            .iter()
            .map(|&v| {
                let rate = f64::from(v) * lambda;
                if rate <= 0.0 {
                    return v;
                }
                let count: f64 = Poisson::new(rate).expect("positive rate").sample(&mut rng);
                clip(count / lambda)
            })
            .collect(),
        PoissonMode::Additive => {
            let poisson = Poisson::new(lambda).expect("positive lambda");
            cube.data()
                .iter()
                .map(|&v| clip(f64::from(v) + poisson.sample(&mut rng)))
                .collect()
        }
    };
    rebuild(cube, data)
}
