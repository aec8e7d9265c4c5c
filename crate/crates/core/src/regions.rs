//! 4-connected component labeling and region merging on label grids.

use std::collections::{HashMap, VecDeque};

/// 4-connected components of equal-label pixels.
#[derive(Debug, Clone)]
pub struct Components {
    /// Component id per pixel, ids numbered in order of first pixel.
    pub id: Vec<usize>,
    /// Label carried by each component.
    pub label: Vec<u32>,
    pub size: Vec<usize>,
    /// Smallest pixel index in each component.
    pub first: Vec<usize>,
}

impl Components {
    pub fn len(&self) -> usize {
        self.label.len()
    }

    pub fn is_empty(&self) -> bool {
        self.label.is_empty()
    }
}

pub(crate) fn neighbors4(
    i: usize,
    width: usize,
    height: usize,
) -> impl Iterator<Item = usize> {
    let (x, y) = (i % width, i / width);
    [
        (x > 0).then(|| i - 1),
        (x + 1 < width).then(|| i + 1),
        (y > 0).then(|| i - width),
        (y + 1 < height).then(|| i + width),
    ]
    .into_iter()
    .flatten()
}

pub fn label_components(labels: &[u32], width: usize, height: usize) -> Components {
    let n = labels.len();
    debug_assert_eq!(n, width * height);
    let mut id = vec![usize::MAX; n];
    let mut comps = Components {
        id: Vec::new(),
        label: Vec::new(),
        size: Vec::new(),
        first: Vec::new(),
    };
    let mut queue = VecDeque::new();
    for start in 0..n {
        if id[start] != usize::MAX {
            continue;
        }
        let c = comps.label.len();
        let label = labels[start];
        id[start] = c;
        queue.push_back(start);
        let mut size = 0;
        while let Some(p) = queue.pop_front() {
            size += 1;
            for q in neighbors4(p, width, height) {
                if id[q] == usize::MAX && labels[q] == label {
                    id[q] = c;
                    queue.push_back(q);
                }
            }
        }
        comps.label.push(label);
        comps.size.push(size);
        comps.first.push(start);
    }
    comps.id = id;
    comps
}

/// Pixels of every component, in ascending pixel order.
pub(crate) fn component_members(comps: &Components) -> Vec<Vec<usize>> {
    let mut members = vec![Vec::new(); comps.len()];
    for (p, &c) in comps.id.iter().enumerate() {
        members[c].push(p);
    }
    members
}

/// Counts, per outside label, the 4-adjacent pixel edges leaving `pixels`.
pub(crate) fn boundary_label_counts(
    pixels: &[usize],
    labels: &[u32],
    own: u32,
    width: usize,
    height: usize,
) -> HashMap<u32, usize> {
    let mut counts = HashMap::new();
    for &p in pixels {
        for q in neighbors4(p, width, height) {
            if labels[q] != own {
                *counts.entry(labels[q]).or_insert(0) += 1;
            }
        }
    }
    counts
}

/// Most frequent key; ties go to the smaller label.
pub(crate) fn modal_label(counts: &HashMap<u32, usize>) -> Option<u32> {
    counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&l, _)| l)
}

/// Makes every label 4-connected: each component that is not its label's
/// largest component is relabeled to the neighbouring label sharing the most
/// boundary with it. Repeats until each label forms a single component.
pub fn enforce_connectivity(labels: &mut [u32], width: usize, height: usize) {
    loop {
        let comps = label_components(labels, width, height);
        let mut largest: HashMap<u32, usize> = HashMap::new();
        for c in 0..comps.len() {
            let entry = largest.entry(comps.label[c]).or_insert(c);
            if comps.size[c] > comps.size[*entry] {
                *entry = c;
            }
        }
        let mut orphans: Vec<usize> = (0..comps.len())
            .filter(|&c| largest[&comps.label[c]] != c)
            .collect();
        if orphans.is_empty() {
            return;
        }
        orphans.sort_by_key(|&c| (comps.size[c], comps.first[c]));
        let members = component_members(&comps);
        for c in orphans {
            let own = labels[comps.first[c]];
            let counts = boundary_label_counts(&members[c], labels, own, width, height);
            if let Some(target) = modal_label(&counts) {
                for &p in &members[c] {
                    labels[p] = target;
                }
            }
        }
    }
}

/// Relabels 4-connected components smaller than `min_area` to the most
/// frequent label among their outside 4-neighbours, smallest first, until no
/// undersized component remains or a pass changes nothing.
pub fn merge_small_regions(labels: &mut [u32], width: usize, height: usize, min_area: usize) {
    loop {
        let comps = label_components(labels, width, height);
        if comps.len() <= 1 {
            return;
        }
        let mut small: Vec<usize> = (0..comps.len())
            .filter(|&c| comps.size[c] < min_area)
            .collect();
        if small.is_empty() {
            return;
        }
        small.sort_by_key(|&c| (comps.size[c], comps.first[c]));
        let members = component_members(&comps);
        let mut changed = false;
        let mut touched = vec![false; comps.len()];
        for c in small {
            // a neighbour merged into this component earlier in the pass has
            // altered its extent; revisit it on the next pass
            if touched[c] {
                continue;
            }
            let own = labels[comps.first[c]];
            let counts = boundary_label_counts(&members[c], labels, own, width, height);
            if let Some(target) = modal_label(&counts) {
                for &p in &members[c] {
                    labels[p] = target;
                }
                for &p in &members[c] {
                    for q in neighbors4(p, width, height) {
                        if labels[q] == target {
                            touched[comps.id[q]] = true;
                        }
                    }
                }
                changed = true;
            }
        }
        if !changed {
            return;
        }
    }
}

/// Renumbers labels to `1..=C` by descending area, ties by first occurrence.
pub fn relabel_by_area(labels: &[u32]) -> Vec<u32> {
    let mut stats: HashMap<u32, (usize, usize)> = HashMap::new();
    for (i, &l) in labels.iter().enumerate() {
        stats.entry(l).or_insert((0, i)).0 += 1;
    }
    let mut order: Vec<(u32, usize, usize)> =
        stats.into_iter().map(|(l, (n, f))| (l, n, f)).collect();
    order.sort_by(|a, b| b.1.cmp(&a.1).then(a.2.cmp(&b.2)));
    let remap: HashMap<u32, u32> = order
        .iter()
        .enumerate()
        .map(|(i, &(l, _, _))| (l, i as u32 + 1))
        .collect();
    labels.iter().map(|l| remap[l]).collect()
}
