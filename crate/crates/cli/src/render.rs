//! Label-map and superpixel-boundary rendering to 8-bit RGB PNG.

use std::io::BufWriter;
use std::path::Path;

use hyperseg::{HyperCube, LabelMap};

use crate::error::CliError;

/// RGB for hue `h` in turns, saturation `s` and value `v` in `[0, 1]`.
pub fn hsv_to_rgb(h: f64, s: f64, v: f64) -> [u8; 3] {
    let h = h.rem_euclid(1.0) * 6.0;
    let sector = h.floor();
    let f = h - sector;
    let p = v * (1.0 - s);
    let q = v * (1.0 - s * f);
    let t = v * (1.0 - s * (1.0 - f));
    let (r, g, b) = match sector as u32 {
        0 => (v, t, p),
        1 => (q, v, p),
        2 => (p, v, t),
        3 => (p, q, v),
        4 => (t, p, v),
        _ => (v, p, q),
    };
    [r, g, b].map(|c| (c * 255.0).round() as u8)
}

/// Background is black; label `i` of `count` gets hue `i / count` at full
/// saturation and value.
pub fn label_color(label: u32, count: u32) -> [u8; 3] {
    if label == LabelMap::BACKGROUND || count == 0 {
        return [0, 0, 0];
    }
    hsv_to_rgb(f64::from(label) / f64::from(count), 1.0, 1.0)
}

/// Row-major RGB bytes of a label map, colours relative to its largest label.
pub fn colorize(map: &LabelMap) -> Vec<u8> {
    let count = map.max_label();
    map.labels()
        .iter()
        .flat_map(|&l| label_color(l, count))
        .collect()
}

/// Band-mean grayscale of a normalized cube with superpixel boundaries in red.
/// A pixel is on a boundary when a 4-neighbour carries a different label.
pub fn boundary_overlay(cube: &HyperCube, sp: &LabelMap) -> Vec<u8> {
    let (w, h) = (cube.width(), cube.height());
    let labels = sp.labels();
    let mean = cube.band_mean();
    let mut rgb = Vec::with_capacity(w * h * 3);
    for (i, &g) in mean.iter().enumerate() {
        let (x, y) = (i % w, i / w);
        let l = labels[i];
        let edge = (x > 0 && labels[i - 1] != l)
            || (x + 1 < w && labels[i + 1] != l)
            || (y > 0 && labels[i - w] != l)
            || (y + 1 < h && labels[i + w] != l);
        if edge {
            rgb.extend_from_slice(&[255, 0, 0]);
        } else {
            let v = (g.clamp(0.0, 1.0) * 255.0).round() as u8;
            rgb.extend_from_slice(&[v, v, v]);
        }
    }
    rgb
}

pub fn encode_png(width: usize, height: usize, rgb: &[u8]) -> Result<Vec<u8>, png::EncodingError> {
    let mut out = Vec::new();
    {
        let mut encoder = png::Encoder::new(&mut out, width as u32, height as u32);
        encoder.set_color(png::ColorType::Rgb);
        encoder.set_depth(png::BitDepth::Eight);
        let mut writer = encoder.write_header()?;
        writer.write_image_data(rgb)?;
    }
    Ok(out)
}

pub fn write_png(path: &Path, width: usize, height: usize, rgb: &[u8]) -> Result<(), CliError> {
    let bytes = encode_png(width, height, rgb)
        .map_err(|e| CliError::output(path, std::io::Error::other(e)))?;
    let file = std::fs::File::create(path).map_err(|e| CliError::output(path, e))?;
    std::io::Write::write_all(&mut BufWriter::new(file), &bytes).map_err(|e| CliError::output(path, e))
}
