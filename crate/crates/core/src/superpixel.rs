//! Augmented hyperspectral SLIC superpixels.
//!
//! Every pixel carries its spectrum `P_i`, the spectrum `Q_u` of the
//! mean-shift cluster it was pre-assigned to, and its position. Superpixel
//! centers start on a regular grid with interval `S = sqrt(N / K)` and are
//! refined k-means style, each pixel only competing among the centers whose
//! `2S x 2S` window contains it. The assignment distance is
//!
//! ```text
//! D = d_spec / sqrt(L) + m_clust * d_clust / sqrt(L) + m * d_xy / (S * sqrt(2))
//! ```
//!
//! where `d_spec`, `d_clust` and `d_xy` are Euclidean distances between the
//! pixel and the center in the spectral, cluster-spectral and spatial
//! components. With bands in `[0, 1]` each normalized term is at most one
//! inside the search window.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::cube::{HyperCube, LabelMap};
use crate::error::{Error, Result};
use crate::meanshift::ClusterModel;
use crate::regions::enforce_connectivity;

/// Parameters of the augmented SLIC.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SlicParams {
    /// Requested number of superpixels `K`.
    pub k: usize,
    /// Spatial weight `m`.
    pub m: f64,
    /// Cluster-spectrum weight `m_clust`.
    pub m_clust: f64,
    pub max_iters: usize,
    /// Mean center displacement, in distance units, below which iteration
    /// stops.
    pub conv_tol: f64,
}

impl SlicParams {
    pub const DEFAULT_MAX_ITERS: usize = 10;
    pub const DEFAULT_CONV_TOL: f64 = 1e-3;

    pub fn new(k: usize, m: f64, m_clust: f64) -> Self {
        Self {
            k,
            m,
            m_clust,
            max_iters: Self::DEFAULT_MAX_ITERS,
            conv_tol: Self::DEFAULT_CONV_TOL,
        }
    }

    fn validate(&self, n: usize) -> Result<()> {
        if self.k == 0 {
            return Err(Error::InvalidParameter("K must be at least 1".into()));
        }
        if self.k > n {
            return Err(Error::InvalidParameter(format!(
                "K = {} exceeds the pixel count {n}",
                self.k
            )));
        }
        if !(self.m >= 0.0 && self.m.is_finite()) || !(self.m_clust >= 0.0 && self.m_clust.is_finite())
        {
            return Err(Error::InvalidParameter(format!(
                "weights must be finite and non-negative (m = {}, m_clust = {})",
                self.m, self.m_clust
            )));
        }
        if self.max_iters == 0 {
            return Err(Error::InvalidParameter("max_iters must be at least 1".into()));
        }
        Ok(())
    }
}

impl Default for SlicParams {
    fn default() -> Self {
        Self::new(300, 0.4, 0.8)
    }
}

/// One pixel of the augmented image: `<P_i, Q_u, x_i, y_i>`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AugmentedPixel<'a> {
    pub spectrum: &'a [f32],
    pub cluster_spectrum: &'a [f64],
    pub x: usize,
    pub y: usize,
}

impl AugmentedPixel<'_> {
    /// Concatenated feature vector of length `2L + 2`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.spectrum
            .iter()
            .map(|&v| f64::from(v))
            .chain(self.cluster_spectrum.iter().copied())
            .chain([self.x as f64, self.y as f64])
            .collect()
    }
}

/// Normalized cube paired with a pre-clustering of its pixel spectra.
#[derive(Debug, Clone, Copy)]
pub struct AugmentedImage<'a> {
    cube: &'a HyperCube,
    clusters: &'a ClusterModel,
}

pub fn build_augmented_image<'a>(
    cube: &'a HyperCube,
    clusters: &'a ClusterModel,
) -> Result<AugmentedImage<'a>> {
    if !cube.is_normalized() {
        return Err(Error::NotNormalized);
    }
    if clusters.assignment().len() != cube.pixels() {
        return Err(Error::DimensionMismatch {
            expected: format!("assignment for {} pixels", cube.pixels()),
            found: format!("{} assignments", clusters.assignment().len()),
        });
    }
    if clusters.dim() != cube.bands() {
        return Err(Error::DimensionMismatch {
            expected: format!("cluster centers with {} bands", cube.bands()),
            found: format!("{} bands", clusters.dim()),
        });
    }
    Ok(AugmentedImage { cube, clusters })
}

impl<'a> AugmentedImage<'a> {
    pub fn cube(&self) -> &'a HyperCube {
        self.cube
    }

    pub fn clusters(&self) -> &'a ClusterModel {
        self.clusters
    }

    pub fn len(&self) -> usize {
        self.cube.pixels()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Length of each augmented feature, `2L + 2`.
    pub fn feature_len(&self) -> usize {
        2 * self.cube.bands() + 2
    }

    pub fn pixel(&self, i: usize) -> AugmentedPixel<'a> {
        let w = self.cube.width();
        AugmentedPixel {
            spectrum: self.cube.spectrum(i),
            cluster_spectrum: self.clusters.center(self.clusters.assignment()[i]),
            x: i % w,
            y: i / w,
        }
    }

    pub fn pixels(&self) -> impl Iterator<Item = AugmentedPixel<'a>> + '_ {
        (0..self.len()).map(|i| self.pixel(i))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Superpixel {
    pub mean_spectrum: Vec<f64>,
    pub mean_cluster_spectrum: Vec<f64>,
    /// Centroid `(x, y)` of the member positions.
    pub centroid: (f64, f64),
    /// Member pixel indices, ascending.
    pub members: Vec<usize>,
}

/// Superpixels partitioning an image.
#[derive(Debug, Clone, PartialEq)]
pub struct SuperpixelSet {
    height: usize,
    width: usize,
    interval: f64,
    labels: Vec<u32>,
    superpixels: Vec<Superpixel>,
}

impl SuperpixelSet {
    pub fn height(&self) -> usize {
        self.height
    }

    pub fn width(&self) -> usize {
        self.width
    }

    /// Grid interval `S = sqrt(N / K)` used at initialization.
    pub fn interval(&self) -> f64 {
        self.interval
    }

    pub fn len(&self) -> usize {
        self.superpixels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.superpixels.is_empty()
    }

    pub fn superpixels(&self) -> &[Superpixel] {
        &self.superpixels
    }

    /// Superpixel index (`0..len`) of every pixel.
    pub fn assignment(&self) -> &[u32] {
        &self.labels
    }

    /// Superpixel map with labels `1..=len` (no background).
    pub fn label_map(&self) -> LabelMap {
        LabelMap::new(
            self.height,
            self.width,
            self.labels.iter().map(|&l| l + 1).collect(),
        )
        .expect("superpixel labels match image shape")
    }

    /// Builds the set from a per-pixel assignment, computing member lists,
    /// means and centroids. Empty labels are dropped and the rest renumbered
    /// in ascending order.
    pub fn from_assignment(
        cube: &HyperCube,
        cluster_spectra: Option<&ClusterModel>,
        assignment: &[u32],
        interval: f64,
    ) -> Result<Self> {
        let n = cube.pixels();
        if assignment.len() != n {
            return Err(Error::DimensionMismatch {
                expected: format!("{n} labels"),
                found: format!("{} labels", assignment.len()),
            });
        }
        let max = assignment.iter().copied().max().unwrap_or(0) as usize;
        let mut members = vec![Vec::new(); max + 1];
        for (i, &l) in assignment.iter().enumerate() {
            members[l as usize].push(i);
        }
        let mut remap = vec![u32::MAX; max + 1];
        let mut next = 0;
        for (l, m) in members.iter().enumerate() {
            if !m.is_empty() {
                remap[l] = next;
                next += 1;
            }
        }
        let bands = cube.bands();
        let w = cube.width();
        let superpixels = members
            .into_iter()
            .filter(|m| !m.is_empty())
            .map(|members| {
                let count = members.len() as f64;
                let mut spec = vec![0.0; bands];
                let mut clust = vec![0.0; bands];
                let (mut sx, mut sy) = (0.0, 0.0);
                for &p in &members {
                    for (a, &v) in spec.iter_mut().zip(cube.spectrum(p)) {
                        *a += f64::from(v);
                    }
                    if let Some(model) = cluster_spectra {
                        for (a, v) in clust.iter_mut().zip(model.center(model.assignment()[p])) {
                            *a += v;
                        }
                    }
                    sx += (p % w) as f64;
                    sy += (p / w) as f64;
                }
                spec.iter_mut().for_each(|v| *v /= count);
                clust.iter_mut().for_each(|v| *v /= count);
                if cluster_spectra.is_none() {
                    clust.clone_from(&spec);
                }
                Superpixel {
                    mean_spectrum: spec,
                    mean_cluster_spectrum: clust,
                    centroid: (sx / count, sy / count),
                    members,
                }
            })
            .collect();
        Ok(Self {
            height: cube.height(),
            width: cube.width(),
            interval,
            labels: assignment.iter().map(|&l| remap[l as usize]).collect(),
            superpixels,
        })
    }
}

/// Per-iteration diagnostics of a SLIC run.
#[derive(Debug, Clone, PartialEq)]
pub struct SlicTrace {
    /// Total assigned distance after each assignment step.
    pub objective: Vec<f64>,
    /// Center positions `(x, y)` used by the last assignment step.
    pub last_centers: Vec<(f64, f64)>,
    /// Assignment from the last step, before connectivity enforcement.
    pub last_assignment: Vec<u32>,
    /// Pixels no window covered in the last step (they kept their label).
    pub uncovered: usize,
    pub iterations: usize,
    pub converged: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Distance {
    Augmented,
    /// Hyperspectral SLIC without the cluster-spectrum term.
    Spectral,
}

#[derive(Debug, Clone)]
struct Center {
    spec: Vec<f64>,
    clust: Vec<f64>,
    x: f64,
    y: f64,
}

/// Read-only view used by the assignment step.
struct Problem<'a> {
    cube: &'a HyperCube,
    clusters: Option<&'a ClusterModel>,
    params: SlicParams,
    distance: Distance,
    interval: f64,
    inv_sqrt_l: f64,
    spatial_norm: f64,
}

impl Problem<'_> {
    fn terms(&self, i: usize, c: &Center) -> (f64, f64) {
        let w = self.cube.width();
        let (x, y) = ((i % w) as f64, (i / w) as f64);
        let d_xy = ((x - c.x).powi(2) + (y - c.y).powi(2)).sqrt();
        let d_spec = self
            .cube
            .spectrum(i)
            .iter()
            .zip(&c.spec)
            .map(|(&p, q)| (f64::from(p) - q).powi(2))
            .sum::<f64>()
            .sqrt();
        let mut d = d_spec * self.inv_sqrt_l + self.params.m * d_xy * self.spatial_norm;
        if self.distance == Distance::Augmented {
            let model = self.clusters.expect("augmented distance needs clusters");
            let q = model.center(model.assignment()[i]);
            let d_clust = q
                .iter()
                .zip(&c.clust)
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
                .sqrt();
            d += self.params.m_clust * d_clust * self.inv_sqrt_l;
        }
        (d, d_xy)
    }

    fn window(&self, c: &Center) -> (usize, usize, usize, usize) {
        let s = self.interval;
        let (w, h) = (self.cube.width() as f64, self.cube.height() as f64);
        let x0 = (c.x - s).ceil().max(0.0) as usize;
        let x1 = (c.x + s).floor().min(w - 1.0);
        let y0 = (c.y - s).ceil().max(0.0) as usize;
        let y1 = (c.y + s).floor().min(h - 1.0);
        // empty window when the center drifted out of range on one axis
        if x1 < x0 as f64 || y1 < y0 as f64 {
            return (1, 0, 1, 0);
        }
        (x0, x1 as usize, y0, y1 as usize)
    }

    /// Assigns every covered pixel to its best center. Returns the total
    /// distance and the number of uncovered pixels.
    fn assign(&self, centers: &[Center], labels: &mut [u32]) -> (f64, usize) {
        let (w, h) = (self.cube.width(), self.cube.height());
        let windows: Vec<_> = centers.iter().map(|c| self.window(c)).collect();
        let mut by_row: Vec<Vec<u32>> = vec![Vec::new(); h];
        for (k, &(_, _, y0, y1)) in windows.iter().enumerate() {
            for row in by_row.iter_mut().take(y1 + 1).skip(y0) {
                row.push(k as u32);
            }
        }
        let per_row: Vec<(f64, usize)> = labels
            .par_chunks_mut(w)
            .enumerate()
            .map(|(y, row_labels)| {
                let mut best = vec![(f64::INFINITY, f64::INFINITY); w];
                for &k in &by_row[y] {
                    let (x0, x1, _, _) = windows[k as usize];
                    for x in x0..=x1 {
                        let (d, d_xy) = self.terms(y * w + x, &centers[k as usize]);
                        let b = &mut best[x];
                        // equal distance: nearer center, then lower index
                        if d < b.0 || (d == b.0 && d_xy < b.1) {
                            *b = (d, d_xy);
                            row_labels[x] = k;
                        }
                    }
                }
                let mut total = 0.0;
                let mut uncovered = 0;
                for (x, b) in best.iter().enumerate() {
                    if b.0.is_finite() {
                        total += b.0;
                    } else {
                        uncovered += 1;
                        total += self.terms(y * w + x, &centers[row_labels[x] as usize]).0;
                    }
                }
                (total, uncovered)
            })
            .collect();
        per_row
            .into_iter()
            .fold((0.0, 0), |(t, u), (rt, ru)| (t + rt, u + ru))
    }

    fn update(&self, centers: &mut [Center], labels: &[u32]) {
        let bands = self.cube.bands();
        let w = self.cube.width();
        let mut sums: Vec<Center> = centers
            .iter()
            .map(|_| Center {
                spec: vec![0.0; bands],
                clust: vec![0.0; bands],
                x: 0.0,
                y: 0.0,
            })
            .collect();
        let mut counts = vec![0usize; centers.len()];
        for (i, &l) in labels.iter().enumerate() {
            let s = &mut sums[l as usize];
            counts[l as usize] += 1;
            for (a, &v) in s.spec.iter_mut().zip(self.cube.spectrum(i)) {
                *a += f64::from(v);
            }
            if let Some(model) = self.clusters {
                for (a, v) in s.clust.iter_mut().zip(model.center(model.assignment()[i])) {
                    *a += v;
                }
            }
            s.x += (i % w) as f64;
            s.y += (i / w) as f64;
        }
        for ((c, s), &n) in centers.iter_mut().zip(sums).zip(&counts) {
            if n == 0 {
                continue;
            }
            let n = n as f64;
            c.spec = s.spec.into_iter().map(|v| v / n).collect();
            c.clust = s.clust.into_iter().map(|v| v / n).collect();
            c.x = s.x / n;
            c.y = s.y / n;
        }
    }

    /// Displacement between center states, each component scaled and
    /// weighted as in the distance.
    fn displacement(&self, a: &Center, b: &Center) -> f64 {
        let spec: f64 = a.spec.iter().zip(&b.spec).map(|(x, y)| (x - y).powi(2)).sum();
        let xy = (a.x - b.x).powi(2) + (a.y - b.y).powi(2);
        let l = self.cube.bands() as f64;
        let m = self.params.m;
        let mut total = spec / l + m * m * xy * self.spatial_norm.powi(2);
        if self.distance == Distance::Augmented {
            let clust: f64 = a.clust.iter().zip(&b.clust).map(|(x, y)| (x - y).powi(2)).sum();
            total += self.params.m_clust.powi(2) * clust / l;
        }
        total.sqrt()
    }

    fn initial_centers(&self) -> (Vec<Center>, Vec<u32>) {
        let (w, h) = (self.cube.width(), self.cube.height());
        let s = self.interval;
        let nx = ((w as f64 / s).floor() as usize).max(1);
        let ny = ((h as f64 / s).floor() as usize).max(1);
        let step_x = w as f64 / nx as f64;
        let step_y = h as f64 / ny as f64;
        let mut centers = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let x = (i as f64 + 0.5) * step_x - 0.5;
                let y = (j as f64 + 0.5) * step_y - 0.5;
                // seed features from the pixel nearest the grid point
                let p = (y.round() as usize).min(h - 1) * w + (x.round() as usize).min(w - 1);
                let spec = self.cube.spectrum(p).iter().map(|&v| f64::from(v)).collect();
                let clust = match self.clusters {
                    Some(model) => model.center(model.assignment()[p]).to_vec(),
                    None => vec![0.0; self.cube.bands()],
                };
                centers.push(Center { spec, clust, x, y });
            }
        }
        // provisional labels: nearest grid cell
        let labels = (0..w * h)
            .map(|p| {
                let i = (((p % w) as f64 + 0.5) / step_x).floor().min((nx - 1) as f64) as usize;
                let j = (((p / w) as f64 + 0.5) / step_y).floor().min((ny - 1) as f64) as usize;
                (j * nx + i) as u32
            })
            .collect();
        (centers, labels)
    }
}

fn run(
    cube: &HyperCube,
    clusters: Option<&ClusterModel>,
    params: SlicParams,
    distance: Distance,
) -> Result<(SuperpixelSet, SlicTrace)> {
    if !cube.is_normalized() {
        return Err(Error::NotNormalized);
    }
    let n = cube.pixels();
    params.validate(n)?;
    let interval = (n as f64 / params.k as f64).sqrt();
    let problem = Problem {
        cube,
        clusters,
        params,
        distance,
        interval,
        inv_sqrt_l: 1.0 / (cube.bands() as f64).sqrt(),
        spatial_norm: 1.0 / (interval * std::f64::consts::SQRT_2),
    };

    let (mut centers, mut labels) = problem.initial_centers();
    let mut trace = SlicTrace {
        objective: Vec::new(),
        last_centers: Vec::new(),
        last_assignment: Vec::new(),
        uncovered: 0,
        iterations: 0,
        converged: false,
    };
    for iter in 0..params.max_iters {
        let (total, uncovered) = problem.assign(&centers, &mut labels);
        if iter == 0 && uncovered > 0 {
            return Err(Error::Internal(format!(
                "{uncovered} pixels outside every initial search window"
            )));
        }
        trace.objective.push(total);
        trace.uncovered = uncovered;
        trace.iterations = iter + 1;
        let previous = centers.clone();
        problem.update(&mut centers, &labels);
        let moved = previous
            .iter()
            .zip(&centers)
            .map(|(a, b)| problem.displacement(a, b))
            .sum::<f64>()
            / centers.len() as f64;
        trace.last_centers = previous.iter().map(|c| (c.x, c.y)).collect();
        if moved < params.conv_tol {
            trace.converged = true;
            break;
        }
    }
    trace.last_assignment = labels.clone();

    enforce_connectivity(&mut labels, cube.width(), cube.height());
    let set = SuperpixelSet::from_assignment(cube, clusters, &labels, interval)?;
    Ok((set, trace))
}

/// Augmented hyperspectral SLIC over a pre-clustered cube.
pub fn slic(aug: &AugmentedImage<'_>, params: SlicParams) -> Result<SuperpixelSet> {
    slic_traced(aug, params).map(|(set, _)| set)
}

/// [`slic`] together with its per-iteration trace.
pub fn slic_traced(
    aug: &AugmentedImage<'_>,
    params: SlicParams,
) -> Result<(SuperpixelSet, SlicTrace)> {
    run(aug.cube, Some(aug.clusters), params, Distance::Augmented)
}

/// Plain hyperspectral SLIC: spectral and spatial terms only. `m_clust` is
/// ignored.
pub fn slic_spectral(cube: &HyperCube, params: SlicParams) -> Result<(SuperpixelSet, SlicTrace)> {
    run(cube, None, params, Distance::Spectral)
}

/// Per superpixel the `L + 2` center vector `(mean bands..., x, y)`.
pub fn superpixel_features(sp: &SuperpixelSet) -> Vec<Vec<f64>> {
    sp.superpixels
        .iter()
        .map(|s| {
            s.mean_spectrum
                .iter()
                .copied()
                .chain([s.centroid.0, s.centroid.1])
                .collect()
        })
        .collect()
}

/// Mean boundary-length to area ratio over superpixels; lower means more
/// compact. Boundary length counts 4-neighbour edges to other superpixels or
/// the image border.
pub fn mean_perimeter_ratio(sp: &SuperpixelSet) -> f64 {
    let (w, h) = (sp.width, sp.height);
    let mut perimeter = vec![0usize; sp.len()];
    for (i, &l) in sp.labels.iter().enumerate() {
        let (x, y) = (i % w, i / w);
        let edges = [
            x == 0 || sp.labels[i - 1] != l,
            x + 1 == w || sp.labels[i + 1] != l,
            y == 0 || sp.labels[i - w] != l,
            y + 1 == h || sp.labels[i + w] != l,
        ];
        perimeter[l as usize] += edges.iter().filter(|&&e| e).count();
    }
    perimeter
        .iter()
        .zip(&sp.superpixels)
        .map(|(&p, s)| p as f64 / s.members.len() as f64)
        .sum::<f64>()
        / sp.len() as f64
}
