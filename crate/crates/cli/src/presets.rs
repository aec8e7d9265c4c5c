//! Per-scene parameter presets.

use crate::args::Preset;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SegmentPreset {
    pub k: usize,
    pub m: f64,
    pub m_clust: f64,
    pub pre_bandwidth: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SuperpixelPreset {
    pub k: usize,
    pub m: f64,
    pub m_clust: f64,
    pub pre_bandwidth: f64,
}

pub const DEFAULT_M: f64 = 0.4;
pub const DEFAULT_M_CLUST: f64 = 0.8;
pub const DEFAULT_PRE_BANDWIDTH: f64 = 0.1;
pub const DEFAULT_SUPERPIXEL_M: f64 = 0.2;

/// Segmentation presets. K is fixed per scene because the image-size
/// heuristic does not yield these values.
pub fn segment_preset(preset: Preset) -> SegmentPreset {
    let k = match preset {
        Preset::Salinas => 800,
        Preset::SalinasA => 300,
        Preset::PaviaC | Preset::PaviaU => 2000,
    };
    SegmentPreset {
        k,
        m: DEFAULT_M,
        m_clust: DEFAULT_M_CLUST,
        pre_bandwidth: DEFAULT_PRE_BANDWIDTH,
    }
}

/// Superpixel-evaluation presets; only the Salinas scenes have one.
pub fn superpixel_preset(preset: Preset) -> Option<SuperpixelPreset> {
    let k = match preset {
        Preset::Salinas => 1000,
        Preset::SalinasA => 500,
        Preset::PaviaC | Preset::PaviaU => return None,
    };
    Some(SuperpixelPreset {
        k,
        m: DEFAULT_SUPERPIXEL_M,
        m_clust: DEFAULT_M_CLUST,
        pre_bandwidth: DEFAULT_PRE_BANDWIDTH,
    })
}

/// Grid of the superpixel sweep: `m` rows by `m_clust` columns.
pub const SWEEP_M: [f64; 5] = [0.2, 0.4, 0.6, 0.8, 1.0];
pub const SWEEP_M_CLUST: [f64; 6] = [0.0, 0.2, 0.4, 0.6, 0.8, 1.0];
