//! Hyperspectral cube and label-map data model.
//!
//! A [`HyperCube`] stores `H x W x L` reflectance values in row-major order
//! (`(y * W + x) * L + band`). Pixel index `i = y * W + x` is used throughout
//! the crate; `x` is the column and `y` the row.

use crate::error::{Error, Result};

/// Percentile used to pick the clipping value during normalization.
pub const NORMALIZATION_PERCENTILE: u64 = 95;

#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    height: usize,
    width: usize,
    bands: usize,
    data: Vec<f32>,
    normalized: bool,
    scale: Option<f64>,
}

impl HyperCube {
    pub fn new(height: usize, width: usize, bands: usize, data: Vec<f32>) -> Result<Self> {
        if height == 0 || width == 0 || bands == 0 {
            return Err(Error::InvalidShape(format!(
                "cube dimensions must be positive, got {height}x{width}x{bands}"
            )));
        }
        let expected = height * width * bands;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected: format!("{expected} values"),
                found: format!("{} values", data.len()),
            });
        }
        Ok(Self {
            height,
            width,
            bands,
            data,
            normalized: false,
            scale: None,
        })
    }

    /// Builds a cube that is already in `[0, 1]` and flags it as normalized.
    pub fn new_normalized(
        height: usize,
        width: usize,
        bands: usize,
        data: Vec<f32>,
    ) -> Result<Self> {
        let mut cube = Self::new(height, width, bands, data)?;
        if let Some(bad) = cube.data.iter().find(|v| !(0.0..=1.0).contains(*v)) {
            return Err(Error::InvalidParameter(format!(
                "normalized cube value {bad} outside [0, 1]"
            )));
        }
        cube.normalized = true;
        cube.scale = Some(1.0);
        Ok(cube)
    }

    /// Builds a cube by evaluating `f(x, y)` for every pixel.
    pub fn from_fn<F>(height: usize, width: usize, bands: usize, mut f: F) -> Result<Self>
    where
        F: FnMut(usize, usize) -> Vec<f32>,
    {
        let mut data = Vec::with_capacity(height * width * bands);
        for y in 0..height {
            for x in 0..width {
                let spectrum = f(x, y);
                if spectrum.len() != bands {
                    return Err(Error::DimensionMismatch {
                        expected: format!("{bands} bands"),
                        found: format!("{} bands at ({x}, {y})", spectrum.len()),
                    });
                }
                data.extend_from_slice(&spectrum);
            }
        }
        Self::new(height, width, bands, data)
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn bands(&self) -> usize {
        self.bands
    }

    /// Number of pixels `N = H * W`.
    pub fn pixels(&self) -> usize {
        self.height * self.width
    }

    pub fn shape(&self) -> (usize, usize, usize) {
        (self.height, self.width, self.bands)
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    /// Clipping value `V` used by [`normalize`], if the cube went through it.
    pub fn scale(&self) -> Option<f64> {
        self.scale
    }

    pub fn spectrum(&self, pixel: usize) -> &[f32] {
        &self.data[pixel * self.bands..(pixel + 1) * self.bands]
    }

    pub fn spectrum_at(&self, x: usize, y: usize) -> &[f32] {
        self.spectrum(y * self.width + x)
    }

    pub fn spectra(&self) -> std::slice::ChunksExact<'_, f32> {
        self.data.chunks_exact(self.bands)
    }

    /// Mean over bands for every pixel, used for grayscale previews.
    pub fn band_mean(&self) -> Vec<f64> {
        self.spectra()
            .map(|s| s.iter().map(|&v| f64::from(v)).sum::<f64>() / self.bands as f64)
            .collect()
    }
}

/// Clips the cube to `[0, V]` and divides by `V`, where `V` is the
/// nearest-rank 95th percentile of all `H * W * L` values.
pub fn normalize(cube: &HyperCube) -> Result<HyperCube> {
    if cube.normalized {
        return Err(Error::AlreadyNormalized);
    }
    if cube.data.iter().any(|v| !v.is_finite()) {
        return Err(Error::NonFinite);
    }
    let v = nearest_rank_percentile(&cube.data, NORMALIZATION_PERCENTILE);
    if v <= 0.0 {
        return Err(Error::Degenerate(format!(
            "95th percentile is {v}; cube has no positive signal"
        )));
    }
    let data = cube
        .data
        .iter()
        .map(|&x| (f64::from(x).clamp(0.0, v) / v) as f32)
        .collect();
    Ok(HyperCube {
        height: cube.height,
        width: cube.width,
        bands: cube.bands,
        data,
        normalized: true,
        scale: Some(v),
    })
}

/// Value at ascending index `ceil(p/100 * n) - 1`.
pub(crate) fn nearest_rank_percentile(values: &[f32], percent: u64) -> f64 {
    let n = values.len() as u64;
    let rank = ((percent * n + 99) / 100).max(1);
    let mut sorted = values.to_vec();
    let (_, nth, _) = sorted.select_nth_unstable_by((rank - 1) as usize, f32::total_cmp);
    f64::from(*nth)
}

/// Per-pixel integer labels; `0` is background.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LabelMap {
    height: usize,
    width: usize,
    labels: Vec<u32>,
}

impl LabelMap {
    pub const BACKGROUND: u32 = 0;

    pub fn new(height: usize, width: usize, labels: Vec<u32>) -> Result<Self> {
        if height == 0 || width == 0 {
            return Err(Error::InvalidShape(format!(
                "label map dimensions must be positive, got {height}x{width}"
            )));
        }
        if labels.len() != height * width {
            return Err(Error::DimensionMismatch {
                expected: format!("{} labels", height * width),
                found: format!("{} labels", labels.len()),
            });
        }
        Ok(Self {
            height,
            width,
            labels,
        })
    }

    pub fn filled(height: usize, width: usize, label: u32) -> Result<Self> {
        Self::new(height, width, vec![label; height * width])
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u32> {
        self.labels
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    /// Largest label present, `0` for an all-background map.
    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Number of distinct non-background labels.
    pub fn distinct_foreground(&self) -> usize {
        let mut seen: Vec<u32> = self.labels.iter().copied().filter(|&l| l != 0).collect();
        seen.sort_unstable();
        seen.dedup();
        seen.len()
    }

    pub fn same_shape(&self, other: &LabelMap) -> bool {
        self.height == other.height && self.width == other.width
    }

    pub fn ensure_same_shape(&self, other: &LabelMap) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                expected: format!("{}x{}", self.height, self.width),
                found: format!("{}x{}", other.height, other.width),
            })
        }
    }

    pub fn matches_cube(&self, cube: &HyperCube) -> bool {
        self.height == cube.height() && self.width == cube.width()
    }
}
