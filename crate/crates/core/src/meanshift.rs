//! Flat-kernel mean-shift clustering and automatic bandwidth estimation.
//!
//! The climb follows the classic flat-kernel procedure: start from a random
//! unvisited point, move to the mean of every point strictly within
//! `bandwidth`, mark those points visited, and stop once the shift is shorter
//! than `bandwidth * 1e-3`. A converged mode within `bandwidth / 2` of an
//! existing center is averaged into it; otherwise it opens a new cluster.
//! Points are finally assigned to their nearest center.
//!
//! Range and nearest-center queries go through [`ProjectedIndex`], which sorts
//! points along their leading principal axes. Projections onto unit vectors
//! never exceed the Euclidean distance, so pruning on them is exact.

use rand::seq::index::sample;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};

/// Relative shift below which a climb is considered converged.
pub const CONVERGENCE_FRACTION: f64 = 1e-3;
const MAX_CLIMB_STEPS: usize = 1000;
const PROJECTION_AXES: usize = 3;
const PAR_THRESHOLD: usize = 4096;
const SUM_CHUNK: usize = 2048;

/// Dense row-major point matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Points {
    data: Vec<f64>,
    dim: usize,
}

impl Points {
    pub fn new(data: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || data.len() % dim != 0 {
            return Err(Error::InvalidShape(format!(
                "{} values cannot form points of dimension {dim}",
                data.len()
            )));
        }
        Ok(Self { data, dim })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let dim = rows.first().map(|r| r.as_ref().len()).unwrap_or(0);
        let mut data = Vec::with_capacity(rows.len() * dim);
        for row in rows {
            if row.as_ref().len() != dim {
                return Err(Error::InvalidShape("rows have differing lengths".into()));
            }
            data.extend_from_slice(row.as_ref());
        }
        Self::new(data, dim.max(1))
    }

    pub fn len(&self) -> usize {
        self.data.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.dim)
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    fn ensure_finite(&self) -> Result<()> {
        if self.data.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::NonFinite)
        }
    }
}

pub(crate) fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Result of [`mean_shift`], with clusters in canonical order: descending
/// member count, ties broken by the first point assigned to each cluster.
#[derive(Debug, Clone, PartialEq)]
pub struct ClusterModel {
    centers: Vec<Vec<f64>>,
    assignment: Vec<usize>,
    counts: Vec<usize>,
    bandwidth: f64,
}

impl ClusterModel {
    pub fn centers(&self) -> &[Vec<f64>] {
        &self.centers
    }

    pub fn center(&self, cluster: usize) -> &[f64] {
        &self.centers[cluster]
    }

    pub fn assignment(&self) -> &[usize] {
        &self.assignment
    }

    pub fn counts(&self) -> &[usize] {
        &self.counts
    }

    pub fn n_clusters(&self) -> usize {
        self.centers.len()
    }

    pub fn dim(&self) -> usize {
        self.centers.first().map_or(0, Vec::len)
    }

    pub fn bandwidth(&self) -> f64 {
        self.bandwidth
    }

    /// Builds a model directly from centers and an assignment; mainly useful
    /// for tests and for callers that cluster by other means.
    pub fn from_parts(centers: Vec<Vec<f64>>, assignment: Vec<usize>, bandwidth: f64) -> Result<Self> {
        if let Some(&bad) = assignment.iter().find(|&&a| a >= centers.len()) {
            return Err(Error::InvalidParameter(format!(
                "assignment {bad} out of range for {} centers",
                centers.len()
            )));
        }
        let mut counts = vec![0; centers.len()];
        for &a in &assignment {
            counts[a] += 1;
        }
        Ok(Self {
            centers,
            assignment,
            counts,
            bandwidth,
        })
    }
}

/// Points sorted along their leading principal axes.
pub(crate) struct ProjectedIndex<'a> {
    points: &'a Points,
    axes: Vec<Vec<f64>>,
    /// Point indices ordered by their projection on `axes[0]`.
    order: Vec<usize>,
    /// `proj[a][k]` = projection of `points[order[k]]` on axis `a`.
    proj: Vec<Vec<f64>>,
}

impl<'a> ProjectedIndex<'a> {
    pub(crate) fn new(points: &'a Points) -> Self {
        let axes = principal_axes(points, PROJECTION_AXES.min(points.dim()));
        let raw: Vec<Vec<f64>> = axes
            .iter()
            .map(|axis| points.rows().map(|r| dot(r, axis)).collect())
            .collect();
        let mut order: Vec<usize> = (0..points.len()).collect();
        order.sort_by(|&a, &b| raw[0][a].total_cmp(&raw[0][b]).then(a.cmp(&b)));
        let proj = raw
            .iter()
            .map(|p| order.iter().map(|&i| p[i]).collect())
            .collect();
        Self {
            points,
            axes,
            order,
            proj,
        }
    }

    fn project(&self, q: &[f64]) -> Vec<f64> {
        self.axes.iter().map(|a| dot(q, a)).collect()
    }

    /// Indices (ascending) of points strictly within `radius` of `q`.
    pub(crate) fn within(&self, q: &[f64], radius: f64) -> Vec<usize> {
        let pq = self.project(q);
        // slack covers rounding in the axes' unit norm
        let slack = radius * (1.0 + 1e-9) + 1e-12;
        let lo = self.proj[0].partition_point(|&p| p < pq[0] - slack);
        let hi = self.proj[0].partition_point(|&p| p <= pq[0] + slack);
        let r2 = radius * radius;
        let test = |k: usize| -> Option<usize> {
            for (a, p) in self.proj.iter().enumerate().skip(1) {
                if (p[k] - pq[a]).abs() > slack {
                    return None;
                }
            }
            let i = self.order[k];
            (sq_dist(self.points.row(i), q) < r2).then_some(i)
        };
        let mut hits: Vec<usize> = if hi - lo >= PAR_THRESHOLD {
            (lo..hi).into_par_iter().filter_map(test).collect()
        } else {
            (lo..hi).filter_map(test).collect()
        };
        hits.sort_unstable();
        hits
    }
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Leading principal axes by power iteration with deflation. Only used to
/// order points for pruning, so approximate axes are fine as long as they
/// are unit length.
fn principal_axes(points: &Points, count: usize) -> Vec<Vec<f64>> {
    let dim = points.dim();
    let n = points.len().max(1);
    let mean = chunked_row_sum(points, |acc, row| {
        for (a, v) in acc.iter_mut().zip(row) {
            *a += v;
        }
    })
    .into_iter()
    .map(|s| s / n as f64)
    .collect::<Vec<_>>();

    let mut axes: Vec<Vec<f64>> = Vec::with_capacity(count);
    for a in 0..count {
        let mut v: Vec<f64> = (0..dim)
            .map(|j| 1.0 + ((j * 7 + a * 13) % 11) as f64 / 11.0)
            .collect();
        orthonormalize(&mut v, &axes);
        for _ in 0..30 {
            let mut next = chunked_row_sum(points, |acc, row| {
                let c: f64 = row.iter().zip(&mean).zip(&v).map(|((x, m), w)| (x - m) * w).sum();
                for ((o, x), m) in acc.iter_mut().zip(row).zip(&mean) {
                    *o += c * (x - m);
                }
            });
            if !orthonormalize(&mut next, &axes) {
                break;
            }
            v = next;
        }
        if !orthonormalize(&mut v, &axes) {
            // no variance left; any unit vector orthogonal to the others works
            v = (0..dim).map(|j| if j == a { 1.0 } else { 0.0 }).collect();
            if !orthonormalize(&mut v, &axes) {
                break;
            }
        }
        axes.push(v);
    }
    if axes.is_empty() {
        let mut e = vec![0.0; dim];
        e[0] = 1.0;
        axes.push(e);
    }
    axes
}

fn orthonormalize(v: &mut [f64], basis: &[Vec<f64>]) -> bool {
    for b in basis {
        let c = dot(v, b);
        for (x, y) in v.iter_mut().zip(b) {
            *x -= c * y;
        }
    }
    let norm = dot(v, v).sqrt();
    if norm < 1e-12 || !norm.is_finite() {
        return false;
    }
    for x in v.iter_mut() {
        *x /= norm;
    }
    true
}

fn chunked_row_sum<F>(points: &Points, f: F) -> Vec<f64>
where
    F: Fn(&mut [f64], &[f64]) + Sync,
{
    let dim = points.dim();
    let partials: Vec<Vec<f64>> = points
        .data()
        .par_chunks(dim * SUM_CHUNK)
        .map(|chunk| {
            let mut acc = vec![0.0; dim];
            for row in chunk.chunks_exact(dim) {
                f(&mut acc, row);
            }
            acc
        })
        .collect();
    let mut total = vec![0.0; dim];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    total
}

/// Mean of the given rows, summed in fixed-size chunks in index order.
fn mean_of(points: &Points, indices: &[usize]) -> Vec<f64> {
    let dim = points.dim();
    let sum_chunk = |chunk: &[usize]| {
        let mut acc = vec![0.0; dim];
        for &i in chunk {
            for (a, v) in acc.iter_mut().zip(points.row(i)) {
                *a += v;
            }
        }
        acc
    };
    let partials: Vec<Vec<f64>> = if indices.len() >= PAR_THRESHOLD {
        indices.par_chunks(SUM_CHUNK).map(sum_chunk).collect()
    } else {
        indices.chunks(SUM_CHUNK).map(sum_chunk).collect()
    };
    let mut total = vec![0.0; dim];
    for p in partials {
        for (t, v) in total.iter_mut().zip(p) {
            *t += v;
        }
    }
    let n = indices.len() as f64;
    total.iter_mut().for_each(|t| *t /= n);
    total
}

/// Flat-kernel mean-shift over `points`.
pub fn mean_shift(points: &Points, bandwidth: f64, seed: u64) -> Result<ClusterModel> {
    if !(bandwidth > 0.0) || !bandwidth.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "bandwidth must be positive and finite, got {bandwidth}"
        )));
    }
    if points.is_empty() {
        return Err(Error::InvalidParameter("mean-shift needs at least one point".into()));
    }
    points.ensure_finite()?;

    let n = points.len();
    let index = ProjectedIndex::new(points);
    let stop = bandwidth * CONVERGENCE_FRACTION;
    let merge_sq = (bandwidth / 2.0).powi(2);

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut seeds: Vec<usize> = (0..n).collect();
    seeds.shuffle(&mut rng);

    let mut visited = vec![false; n];
    let mut centers: Vec<Vec<f64>> = Vec::new();

    for &start in &seeds {
        if visited[start] {
            continue;
        }
        let mut mode = points.row(start).to_vec();
        for _ in 0..MAX_CLIMB_STEPS {
            let members = index.within(&mode, bandwidth);
            for &i in &members {
                visited[i] = true;
            }
            let next = mean_of(points, &members);
            let shift = sq_dist(&next, &mode).sqrt();
            mode = next;
            if shift < stop {
                break;
            }
        }
        match centers.iter_mut().find(|c| sq_dist(c, &mode) < merge_sq) {
            Some(c) => c.iter_mut().zip(&mode).for_each(|(a, b)| *a = 0.5 * (*a + b)),
            None => centers.push(mode),
        }
    }

    merge_close_centers(&mut centers, merge_sq);
    let assignment = nearest_centers(points, &centers);
    Ok(canonicalize(centers, assignment, bandwidth))
}

/// Averaging during merges can pull two centers closer than the merge radius;
/// fold such pairs until none remain.
fn merge_close_centers(centers: &mut Vec<Vec<f64>>, merge_sq: f64) {
    loop {
        let mut pair = None;
        'outer: for i in 0..centers.len() {
            for j in i + 1..centers.len() {
                if sq_dist(&centers[i], &centers[j]) < merge_sq {
                    pair = Some((i, j));
                    break 'outer;
                }
            }
        }
        let Some((i, j)) = pair else { break };
        let other = centers.remove(j);
        centers[i].iter_mut().zip(&other).for_each(|(a, b)| *a = 0.5 * (*a + b));
    }
}

/// Nearest center per point; equal distances go to the lower center index.
pub(crate) fn nearest_centers(points: &Points, centers: &[Vec<f64>]) -> Vec<usize> {
    if centers.len() == 1 {
        return vec![0; points.len()];
    }
    let center_points = Points::from_rows(centers).expect("centers share one dimension");
    let index = ProjectedIndex::new(&center_points);
    let query = |i: usize| nearest_in(&index, points.row(i));
    if points.len() >= PAR_THRESHOLD {
        (0..points.len()).into_par_iter().map(query).collect()
    } else {
        (0..points.len()).map(query).collect()
    }
}

fn nearest_in(index: &ProjectedIndex<'_>, q: &[f64]) -> usize {
    let pq = index.project(q);
    let p0 = &index.proj[0];
    let start = p0.partition_point(|&p| p < pq[0]);
    let mut best = (f64::INFINITY, usize::MAX);
    let consider = |k: usize, best: &mut (f64, usize)| {
        let i = index.order[k];
        let d = sq_dist(index.points.row(i), q);
        if d < best.0 || (d == best.0 && i < best.1) {
            *best = (d, i);
        }
    };
    let bound = |best: &(f64, usize)| best.0.sqrt() * (1.0 + 1e-9) + 1e-12;
    let (mut up, mut down) = (start, start);
    loop {
        let up_ok = up < p0.len() && (p0[up] - pq[0]).abs() <= bound(&best);
        let down_ok = down > 0 && (pq[0] - p0[down - 1]).abs() <= bound(&best);
        if !up_ok && !down_ok {
            break;
        }
        if up_ok {
            consider(up, &mut best);
            up += 1;
        }
        if down_ok {
            down -= 1;
            consider(down, &mut best);
        }
    }
    best.1
}

fn canonicalize(centers: Vec<Vec<f64>>, assignment: Vec<usize>, bandwidth: f64) -> ClusterModel {
    let u = centers.len();
    let mut counts = vec![0usize; u];
    let mut first = vec![usize::MAX; u];
    for (i, &a) in assignment.iter().enumerate() {
        counts[a] += 1;
        first[a] = first[a].min(i);
    }
    let mut order: Vec<usize> = (0..u).filter(|&c| counts[c] > 0).collect();
    order.sort_by(|&a, &b| counts[b].cmp(&counts[a]).then(first[a].cmp(&first[b])));
    let mut remap = vec![usize::MAX; u];
    for (new, &old) in order.iter().enumerate() {
        remap[old] = new;
    }
    let mut centers = centers;
    let new_centers = order.iter().map(|&c| std::mem::take(&mut centers[c])).collect();
    ClusterModel {
        centers: new_centers,
        assignment: assignment.iter().map(|&a| remap[a]).collect(),
        counts: order.iter().map(|&c| counts[c]).collect(),
        bandwidth,
    }
}

/// Mean distance from `sample_size` randomly chosen points to their
/// `floor(quantile * n)`-th nearest neighbour, the query point itself
/// counting as the first neighbour.
pub fn estimate_bandwidth(points: &Points, quantile: f64, sample_size: usize, seed: u64) -> Result<f64> {
    if !(quantile > 0.0 && quantile <= 1.0) {
        return Err(Error::InvalidParameter(format!(
            "quantile must be in (0, 1], got {quantile}"
        )));
    }
    let n = points.len();
    if n < 2 {
        return Err(Error::InvalidParameter(
            "bandwidth estimation needs at least two points".into(),
        ));
    }
    if sample_size == 0 {
        return Err(Error::InvalidParameter("sample size must be positive".into()));
    }
    points.ensure_finite()?;
    let k = (quantile * n as f64).floor() as usize;
    if k == 0 {
        return Err(Error::InvalidParameter(format!(
            "quantile {quantile} selects zero neighbours out of {n} points"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let chosen = sample(&mut rng, n, sample_size.min(n)).into_vec();
    let kth: Vec<f64> = chosen
        .par_iter()
        .map(|&i| {
            let q = points.row(i);
            let mut d: Vec<f64> = points.rows().map(|r| sq_dist(r, q)).collect();
            let (_, v, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
            v.sqrt()
        })
        .collect();
    Ok(kth.iter().sum::<f64>() / kth.len() as f64)
}
