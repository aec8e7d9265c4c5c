//! Region segmentation over superpixel-augmented pixel features.
//!
//! Stage one pre-clusters the pixel spectra with mean-shift and builds
//! augmented SLIC superpixels. Stage two clusters the per-pixel features
//! `<P_i, C_k, x_k, y_k>` with mean-shift, gives every superpixel its modal
//! cluster label, absorbs small connected regions into their neighbourhood and
//! renumbers the result by area.

use serde::{Deserialize, Serialize};

use crate::cube::{HyperCube, LabelMap};
use crate::error::{Error, Result};
use crate::meanshift::{estimate_bandwidth, mean_shift, ClusterModel, Points};
use crate::metrics::nmi;
use crate::pca::{fit_pca, fit_pca_rows};
use crate::regions::{merge_small_regions, relabel_by_area};
use crate::superpixel::{build_augmented_image, slic, SlicParams, SuperpixelSet};

pub const AUTO_K_MIN: usize = 300;
pub const AUTO_K_MAX: usize = 2000;
pub const DEFAULT_ALPHA: f64 = 60.0;
pub const DEFAULT_QUANTILE: f64 = 0.3;
pub const DEFAULT_BANDWIDTH_SAMPLE: usize = 500;
pub const DEFAULT_VARIANCE_THRESHOLD: f64 = 0.999;

/// `ceil(min(H, W) / alpha) * 100`, clamped to `[300, 2000]`.
pub fn auto_k(height: usize, width: usize, alpha: f64) -> usize {
    let ratio = (height.min(width) as f64 / alpha).ceil() as usize;
    (ratio * 100).clamp(AUTO_K_MIN, AUTO_K_MAX)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KChoice {
    Auto { alpha: f64 },
    Fixed(usize),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum BandwidthChoice {
    Auto { quantile: f64, sample_size: usize },
    Fixed(f64),
}

/// Which per-pixel features the second stage clusters.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FeatureSet {
    /// `<P_i>` only; no superpixels and no voting.
    Spectral,
    /// `<P_i, C_k, x_k, y_k>` followed by per-superpixel voting.
    SpectralSuperpixel,
}

/// Scaling of the superpixel coordinates in the second-stage features.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SpatialScaling {
    /// Divide by `max(H, W)` so coordinates lie in `[0, 1]`.
    MaxDimension,
    /// Raw pixel coordinates.
    Pixels,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SegmentationConfig {
    pub k: KChoice,
    pub m: f64,
    pub m_clust: f64,
    pub pre_bandwidth: f64,
    pub seg_bandwidth: BandwidthChoice,
    /// Minimum region area; `None` uses `ceil(S^2 / 4)`.
    pub small_region_threshold: Option<usize>,
    pub seed: u64,
    pub use_pca: bool,
    pub variance_threshold: f64,
    pub features: FeatureSet,
    pub spatial_scaling: SpatialScaling,
}

impl Default for SegmentationConfig {
    fn default() -> Self {
        Self {
            k: KChoice::Auto {
                alpha: DEFAULT_ALPHA,
            },
            m: 0.4,
            m_clust: 0.8,
            pre_bandwidth: 0.1,
            seg_bandwidth: BandwidthChoice::Auto {
                quantile: DEFAULT_QUANTILE,
                sample_size: DEFAULT_BANDWIDTH_SAMPLE,
            },
            small_region_threshold: None,
            seed: 0,
            use_pca: false,
            variance_threshold: DEFAULT_VARIANCE_THRESHOLD,
            features: FeatureSet::SpectralSuperpixel,
            spatial_scaling: SpatialScaling::MaxDimension,
        }
    }
}

impl SegmentationConfig {
    pub fn validate(&self, pixels: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParameter(msg));
        match self.k {
            KChoice::Fixed(k) if k == 0 || k > pixels => {
                return bad(format!("K = {k} outside [1, {pixels}]"));
            }
            KChoice::Auto { alpha } if !(alpha > 0.0 && alpha.is_finite()) => {
                return bad(format!("alpha must be positive, got {alpha}"));
            }
            _ => {}
        }
        if !(self.m >= 0.0 && self.m.is_finite() && self.m_clust >= 0.0 && self.m_clust.is_finite())
        {
            return bad(format!(
                "weights must be non-negative (m = {}, m_clust = {})",
                self.m, self.m_clust
            ));
        }
        if !(self.pre_bandwidth > 0.0 && self.pre_bandwidth.is_finite()) {
            return bad(format!("pre-bandwidth must be positive, got {}", self.pre_bandwidth));
        }
        match self.seg_bandwidth {
            BandwidthChoice::Fixed(b) if !(b > 0.0 && b.is_finite()) => {
                return bad(format!("bandwidth must be positive, got {b}"));
            }
            BandwidthChoice::Auto {
                quantile,
                sample_size,
            } if !(quantile > 0.0 && quantile <= 1.0) || sample_size == 0 => {
                return bad(format!(
                    "auto bandwidth needs quantile in (0, 1] and a positive sample, got {quantile} / {sample_size}"
                ));
            }
            _ => {}
        }
        if self.use_pca && !(self.variance_threshold > 0.0 && self.variance_threshold <= 1.0) {
            return bad(format!(
                "variance threshold must lie in (0, 1], got {}",
                self.variance_threshold
            ));
        }
        Ok(())
    }

    pub fn resolve_k(&self, height: usize, width: usize) -> usize {
        match self.k {
            KChoice::Fixed(k) => k,
            KChoice::Auto { alpha } => auto_k(height, width, alpha).min(height * width),
        }
    }
}

/// Values decided while running, echoed into run reports.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Resolved {
    pub k: usize,
    pub interval: f64,
    pub pre_clusters: Option<usize>,
    pub superpixels: Option<usize>,
    pub feature_dim: usize,
    pub spectral_dims: usize,
    pub center_dims: Option<usize>,
    pub seg_bandwidth: f64,
    pub seg_clusters: usize,
    pub small_region_threshold: usize,
    pub n_labels: usize,
}

/// Output of [`segment`].
#[derive(Debug, Clone)]
pub struct Segmentation {
    pub labels: LabelMap,
    pub resolved: Resolved,
    pub superpixels: Option<SuperpixelSet>,
    pub pre_clusters: Option<ClusterModel>,
}

/// First-stage products shared by every second-stage bandwidth.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub height: usize,
    pub width: usize,
    pub k: usize,
    pub interval: f64,
    pub pre_clusters: Option<ClusterModel>,
    pub superpixels: Option<SuperpixelSet>,
    pub features: Points,
    pub spectral_dims: usize,
    pub center_dims: Option<usize>,
}

fn spatial_divisor(cube: &HyperCube, scaling: SpatialScaling) -> f64 {
    match scaling {
        SpatialScaling::MaxDimension => cube.height().max(cube.width()) as f64,
        SpatialScaling::Pixels => 1.0,
    }
}

fn check_partition(cube: &HyperCube, sp: &SuperpixelSet) -> Result<()> {
    if sp.height() != cube.height() || sp.width() != cube.width() {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{} superpixel map", cube.height(), cube.width()),
            found: format!("{}x{}", sp.height(), sp.width()),
        });
    }
    if let Some(s) = sp.superpixels().first() {
        if s.mean_spectrum.len() != cube.bands() {
            return Err(Error::DimensionMismatch {
                expected: format!("{} bands", cube.bands()),
                found: format!("{} bands", s.mean_spectrum.len()),
            });
        }
    }
    Ok(())
}

/// Per-pixel features `<P_i, C_k, x_k / max(H, W), y_k / max(H, W)>`.
pub fn assemble_features(cube: &HyperCube, sp: &SuperpixelSet) -> Result<Points> {
    assemble_features_scaled(cube, sp, SpatialScaling::MaxDimension)
}

pub fn assemble_features_scaled(
    cube: &HyperCube,
    sp: &SuperpixelSet,
    scaling: SpatialScaling,
) -> Result<Points> {
    if !cube.is_normalized() {
        return Err(Error::NotNormalized);
    }
    check_partition(cube, sp)?;
    let spectral: Vec<f64> = cube.data().iter().map(|&v| f64::from(v)).collect();
    let centers: Vec<Vec<f64>> = sp.superpixels().iter().map(|s| s.mean_spectrum.clone()).collect();
    join_blocks(
        &spectral,
        cube.bands(),
        &centers,
        sp,
        spatial_divisor(cube, scaling),
    )
}

fn join_blocks(
    spectral: &[f64],
    spectral_dim: usize,
    centers: &[Vec<f64>],
    sp: &SuperpixelSet,
    divisor: f64,
) -> Result<Points> {
    let center_dim = centers.first().map_or(0, Vec::len);
    let dim = spectral_dim + center_dim + 2;
    let mut data = Vec::with_capacity(sp.assignment().len() * dim);
    for (i, &k) in sp.assignment().iter().enumerate() {
        let s = &sp.superpixels()[k as usize];
        data.extend_from_slice(&spectral[i * spectral_dim..(i + 1) * spectral_dim]);
        data.extend_from_slice(&centers[k as usize]);
        data.push(s.centroid.0 / divisor);
        data.push(s.centroid.1 / divisor);
    }
    Points::new(data, dim)
}

/// Modal second-stage label of every superpixel, ties to the smaller label.
pub fn majority_vote(labels: &[u32], sp: &SuperpixelSet) -> Vec<u32> {
    let mut out = labels.to_vec();
    for s in sp.superpixels() {
        let mut votes: Vec<u32> = s.members.iter().map(|&p| labels[p]).collect();
        votes.sort_unstable();
        let mut best = (0usize, u32::MAX);
        let mut run = 0;
        for (j, &v) in votes.iter().enumerate() {
            run += 1;
            if j + 1 == votes.len() || votes[j + 1] != v {
                if run > best.0 {
                    best = (run, v);
                }
                run = 0;
            }
        }
        for &p in &s.members {
            out[p] = best.1;
        }
    }
    out
}

fn spectra_points(cube: &HyperCube) -> Result<Points> {
    Points::new(
        cube.data().iter().map(|&v| f64::from(v)).collect(),
        cube.bands(),
    )
}

/// Runs pre-clustering, superpixels and feature assembly.
pub fn prepare(cube: &HyperCube, config: &SegmentationConfig) -> Result<Prepared> {
    if !cube.is_normalized() {
        return Err(Error::NotNormalized);
    }
    config.validate(cube.pixels())?;
    let k = config.resolve_k(cube.height(), cube.width());
    let interval = (cube.pixels() as f64 / k as f64).sqrt();

    let (spectral, spectral_dims) = if config.use_pca {
        let model = fit_pca(cube, config.variance_threshold)?;
        let projected = model.project_rows(cube.data())?;
        (
            projected.into_iter().map(f64::from).collect::<Vec<_>>(),
            model.n_components(),
        )
    } else {
        (
            cube.data().iter().map(|&v| f64::from(v)).collect(),
            cube.bands(),
        )
    };

    if config.features == FeatureSet::Spectral {
        return Ok(Prepared {
            height: cube.height(),
            width: cube.width(),
            k,
            interval,
            pre_clusters: None,
            superpixels: None,
            features: Points::new(spectral, spectral_dims)?,
            spectral_dims,
            center_dims: None,
        });
    }

    let pre = mean_shift(&spectra_points(cube)?, config.pre_bandwidth, config.seed)?;
    let aug = build_augmented_image(cube, &pre)?;
    let sp = slic(&aug, SlicParams::new(k, config.m, config.m_clust))?;

    let mut centers: Vec<Vec<f64>> = sp.superpixels().iter().map(|s| s.mean_spectrum.clone()).collect();
    let mut center_dims = cube.bands();
    if config.use_pca {
        let l = cube.bands();
        let mut rows = Vec::with_capacity(cube.pixels() * l);
        for &k in sp.assignment() {
            rows.extend(centers[k as usize].iter().map(|&v| v as f32));
        }
        let model = fit_pca_rows(&rows, l, config.variance_threshold)?;
        let flat: Vec<f32> = centers.iter().flatten().map(|&v| v as f32).collect();
        let projected = model.project_rows(&flat)?;
        center_dims = model.n_components();
        centers = projected
            .chunks_exact(center_dims)
            .map(|c| c.iter().map(|&v| f64::from(v)).collect())
            .collect();
    }
    let features = join_blocks(
        &spectral,
        spectral_dims,
        &centers,
        &sp,
        spatial_divisor(cube, config.spatial_scaling),
    )?;
    Ok(Prepared {
        height: cube.height(),
        width: cube.width(),
        k,
        interval,
        pre_clusters: Some(pre),
        superpixels: Some(sp),
        features,
        spectral_dims,
        center_dims: Some(center_dims),
    })
}

impl Prepared {
    /// Minimum region area: the configured value or `ceil(S^2 / 4)`.
    pub fn small_region_threshold(&self, config: &SegmentationConfig) -> usize {
        config.small_region_threshold.unwrap_or_else(|| {
            let n = self.height * self.width;
            n.div_ceil(4 * self.k)
        })
    }

    /// Bandwidth the configuration resolves to on these features.
    pub fn resolve_bandwidth(&self, config: &SegmentationConfig) -> Result<f64> {
        match config.seg_bandwidth {
            BandwidthChoice::Fixed(b) => Ok(b),
            BandwidthChoice::Auto {
                quantile,
                sample_size,
            } => {
                let b = estimate_bandwidth(&self.features, quantile, sample_size, config.seed)?;
                if b > 0.0 {
                    Ok(b)
                } else {
                    Err(Error::Degenerate(
                        "estimated bandwidth is zero; features are all identical".into(),
                    ))
                }
            }
        }
    }

    /// Second stage at a given bandwidth.
    pub fn finish(&self, config: &SegmentationConfig, bandwidth: f64) -> Result<Segmentation> {
        let model = mean_shift(&self.features, bandwidth, config.seed)?;
        let mut labels: Vec<u32> = model.assignment().iter().map(|&a| a as u32 + 1).collect();
        if let Some(sp) = &self.superpixels {
            labels = majority_vote(&labels, sp);
        }
        let threshold = self.small_region_threshold(config);
        merge_small_regions(&mut labels, self.width, self.height, threshold);
        let labels = relabel_by_area(&labels);
        let n_labels = labels.iter().copied().max().unwrap_or(0) as usize;
        Ok(Segmentation {
            labels: LabelMap::new(self.height, self.width, labels)?,
            resolved: Resolved {
                k: self.k,
                interval: self.interval,
                pre_clusters: self.pre_clusters.as_ref().map(ClusterModel::n_clusters),
                superpixels: self.superpixels.as_ref().map(SuperpixelSet::len),
                feature_dim: self.features.dim(),
                spectral_dims: self.spectral_dims,
                center_dims: self.center_dims,
                seg_bandwidth: bandwidth,
                seg_clusters: model.n_clusters(),
                small_region_threshold: threshold,
                n_labels,
            },
            superpixels: self.superpixels.clone(),
            pre_clusters: self.pre_clusters.clone(),
        })
    }
}

/// Full pipeline on a normalized cube.
pub fn segment(cube: &HyperCube, config: &SegmentationConfig) -> Result<Segmentation> {
    let prepared = prepare(cube, config)?;
    let bandwidth = prepared.resolve_bandwidth(config)?;
    prepared.finish(config, bandwidth)
}

/// NMI obtained at one ladder bandwidth during an oracle search.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct OraclePoint {
    pub bandwidth: f64,
    pub nmi: f64,
    pub n_labels: usize,
}

/// Eight bandwidths `anchor * 2^((i - 5) / 2)`, `i = 0..8`, spanning about
/// `0.18x` to `2x` the anchor.
pub fn bandwidth_ladder(anchor: f64) -> Vec<f64> {
    (0..8)
        .map(|i| anchor * 2f64.powf((i as f64 - 5.0) / 2.0))
        .collect()
}

/// Ground-truth-tuned pipeline: runs the second stage over `ladder` (default:
/// [`bandwidth_ladder`] around the auto estimate) and keeps the best NMI. Ties
/// go to the earlier bandwidth.
pub fn segment_oracle(
    cube: &HyperCube,
    config: &SegmentationConfig,
    gt: &LabelMap,
    ladder: Option<&[f64]>,
) -> Result<(Segmentation, Vec<OraclePoint>)> {
    if !gt.matches_cube(cube) {
        return Err(Error::DimensionMismatch {
            expected: format!("{}x{} ground truth", cube.height(), cube.width()),
            found: format!("{}x{}", gt.height(), gt.width()),
        });
    }
    let prepared = prepare(cube, config)?;
    let ladder = match ladder {
        Some(l) => l.to_vec(),
        None => {
            let auto = SegmentationConfig {
                seg_bandwidth: BandwidthChoice::Auto {
                    quantile: DEFAULT_QUANTILE,
                    sample_size: DEFAULT_BANDWIDTH_SAMPLE,
                },
                ..config.clone()
            };
            bandwidth_ladder(prepared.resolve_bandwidth(&auto)?)
        }
    };
    if ladder.is_empty() {
        return Err(Error::InvalidParameter("bandwidth ladder is empty".into()));
    }
    let mut best: Option<(f64, Segmentation)> = None;
    let mut points = Vec::with_capacity(ladder.len());
    for &b in &ladder {
        let seg = prepared.finish(config, b)?;
        let score = nmi(&seg.labels, gt)?;
        points.push(OraclePoint {
            bandwidth: b,
            nmi: score,
            n_labels: seg.resolved.n_labels,
        });
        if best.as_ref().is_none_or(|(s, _)| score > *s) {
            best = Some((score, seg));
        }
    }
    let (_, seg) = best.expect("ladder is non-empty");
    Ok((seg, points))
}
