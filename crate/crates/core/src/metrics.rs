//! Clustering evaluation against a ground-truth map.
//!
//! All scores only look at foreground pixels (ground truth not `0`).

use std::collections::HashMap;

use serde::Serialize;

use crate::cube::LabelMap;
use crate::error::{Error, Result};

/// Default overlap fraction for [`undersegmentation_error`].
pub const DEFAULT_B_FRACTION: f64 = 0.15;

/// Counts `n_ij` of foreground pixels with predicted label `i` and true
/// class `j`. Rows and columns follow ascending label order.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct ContingencyTable {
    pub clusters: Vec<u32>,
    pub classes: Vec<u32>,
    pub counts: Vec<Vec<u64>>,
    pub row_sums: Vec<u64>,
    pub col_sums: Vec<u64>,
    pub total: u64,
}

impl ContingencyTable {
    pub fn new(pred: &LabelMap, gt: &LabelMap) -> Result<Self> {
        pred.ensure_same_shape(gt)?;
        let pairs: Vec<(u32, u32)> = pred
            .labels()
            .iter()
            .zip(gt.labels())
            .filter(|(_, &g)| g != LabelMap::BACKGROUND)
            .map(|(&p, &g)| (p, g))
            .collect();
        if pairs.is_empty() {
            return Err(Error::Degenerate("ground truth has no foreground pixels".into()));
        }
        let index = |values: Vec<u32>| {
            let mut v = values;
            v.sort_unstable();
            v.dedup();
            let map: HashMap<u32, usize> = v.iter().enumerate().map(|(i, &l)| (l, i)).collect();
            (v, map)
        };
        let (clusters, row) = index(pairs.iter().map(|p| p.0).collect());
        let (classes, col) = index(pairs.iter().map(|p| p.1).collect());
        let mut counts = vec![vec![0u64; classes.len()]; clusters.len()];
        for (p, g) in &pairs {
            counts[row[p]][col[g]] += 1;
        }
        let row_sums = counts.iter().map(|r| r.iter().sum()).collect();
        let col_sums = (0..classes.len())
            .map(|j| counts.iter().map(|r| r[j]).sum())
            .collect();
        Ok(Self {
            clusters,
            classes,
            counts,
            row_sums,
            col_sums,
            total: pairs.len() as u64,
        })
    }

    pub fn n_clusters(&self) -> usize {
        self.clusters.len()
    }

    pub fn n_classes(&self) -> usize {
        self.classes.len()
    }
}

/// Sum in ascending order, so the result does not depend on label order.
fn ordered_sum(mut terms: Vec<f64>) -> f64 {
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Entropy term `p ln(n / c)`, written to match the mutual-information terms
/// bit for bit when a cell equals its margin.
fn entropy(sums: &[u64], n: f64) -> f64 {
    ordered_sum(
        sums.iter()
            .filter(|&&c| c > 0)
            .map(|&c| {
                let c = c as f64;
                c / n * (n * c / (c * c)).ln()
            })
            .collect(),
    )
}

fn pairs(k: u64) -> u128 {
    let k = u128::from(k);
    k * k.saturating_sub(1) / 2
}

/// Undersegmentation error with overlap threshold `b_fraction * |S_j|`.
///
/// `sp_labels` holds one label per superpixel. Each ground-truth segment adds
/// the foreground size of every superpixel overlapping it by more than the
/// threshold; the result is that total minus `N`, over `N`.
pub fn undersegmentation_error(sp_labels: &LabelMap, gt: &LabelMap, b_fraction: f64) -> Result<f64> {
    if !(0.0..1.0).contains(&b_fraction) {
        return Err(Error::InvalidParameter(format!(
            "b_fraction must lie in [0, 1), got {b_fraction}"
        )));
    }
    let table = ContingencyTable::new(sp_labels, gt)?;
    let mut covered = 0.0;
    for (row, &size) in table.counts.iter().zip(&table.row_sums) {
        let threshold = b_fraction * size as f64;
        let hits = row.iter().filter(|&&c| c as f64 > threshold).count();
        covered += (hits as u64 * size) as f64;
    }
    let n = table.total as f64;
    Ok((covered - n) / n)
}

fn nmi_of(table: &ContingencyTable) -> f64 {
    let n = table.total as f64;
    let h_pred = entropy(&table.row_sums, n);
    let h_gt = entropy(&table.col_sums, n);
    if h_pred == 0.0 || h_gt == 0.0 {
        return if table.n_clusters() == 1 && table.n_classes() == 1 {
            1.0
        } else {
            0.0
        };
    }
    let mut terms = Vec::new();
    for (i, row) in table.counts.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let c = c as f64;
                terms.push(c / n * (n * c / (table.row_sums[i] as f64 * table.col_sums[j] as f64)).ln());
            }
        }
    }
    (ordered_sum(terms) / (h_pred * h_gt).sqrt()).clamp(0.0, 1.0)
}

fn ari_of(table: &ContingencyTable) -> f64 {
    // integer pair counts keep the sums exact
    let index = table.counts.iter().flatten().map(|&c| pairs(c)).sum::<u128>() as f64;
    let a = table.row_sums.iter().map(|&c| pairs(c)).sum::<u128>() as f64;
    let b = table.col_sums.iter().map(|&c| pairs(c)).sum::<u128>() as f64;
    let total = pairs(table.total) as f64;
    let expected = if total > 0.0 { a * b / total } else { 0.0 };
    let max = 0.5 * (a + b);
    if max == expected {
        // both partitions all singletons or all one cluster
        return if a == b { 1.0 } else { 0.0 };
    }
    (index - expected) / (max - expected)
}

fn f1_of(table: &ContingencyTable) -> (f64, f64, f64) {
    let n = table.total as f64;
    let precision = table
        .counts
        .iter()
        .map(|r| *r.iter().max().unwrap_or(&0))
        .sum::<u64>() as f64
        / n;
    let recall = (0..table.n_classes())
        .map(|j| table.counts.iter().map(|r| r[j]).max().unwrap_or(0))
        .sum::<u64>() as f64
        / n;
    let f1 = if precision + recall > 0.0 {
        2.0 * precision * recall / (precision + recall)
    } else {
        0.0
    };
    (precision, recall, f1)
}

/// Normalized mutual information, natural logarithms, geometric-mean
/// normalization.
pub fn nmi(pred: &LabelMap, gt: &LabelMap) -> Result<f64> {
    ContingencyTable::new(pred, gt).map(|t| nmi_of(&t))
}

/// Adjusted Rand index from pair counts.
pub fn ari(pred: &LabelMap, gt: &LabelMap) -> Result<f64> {
    ContingencyTable::new(pred, gt).map(|t| ari_of(&t))
}

/// Unsupervised `(precision, recall, f1)` from row and column maxima.
pub fn unsupervised_f1(pred: &LabelMap, gt: &LabelMap) -> Result<(f64, f64, f64)> {
    ContingencyTable::new(pred, gt).map(|t| f1_of(&t))
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct MetricsReport {
    pub ue: Option<f64>,
    pub nmi: f64,
    pub ari: f64,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub n_clusters: usize,
    pub n_classes: usize,
    #[serde(skip)]
    pub table: ContingencyTable,
}

impl MetricsReport {
    /// Scores a segmentation; `ue` is filled when a superpixel map is given.
    pub fn evaluate(
        pred: &LabelMap,
        gt: &LabelMap,
        superpixels: Option<(&LabelMap, f64)>,
    ) -> Result<Self> {
        let table = ContingencyTable::new(pred, gt)?;
        let ue = superpixels
            .map(|(sp, b)| undersegmentation_error(sp, gt, b))
            .transpose()?;
        let (precision, recall, f1) = f1_of(&table);
        Ok(Self {
            ue,
            nmi: nmi_of(&table),
            ari: ari_of(&table),
            precision,
            recall,
            f1,
            n_clusters: table.n_clusters(),
            n_classes: table.n_classes(),
            table,
        })
    }
}
