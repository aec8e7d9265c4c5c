//! Reader and writer for the `.npy` array format.
//!
//! Files are written as version 1.0 with a little-endian `<f4` (cubes) or
//! `<i4` (label maps) payload in C order. The header is padded with spaces and
//! a trailing newline so the payload starts on a 64-byte boundary. The reader
//! also accepts versions 2.0/3.0 and widens other little-endian numeric dtypes,
//! which is what most dataset conversions produce.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use crate::cube::{HyperCube, LabelMap};
use crate::error::{Error, Result};

const MAGIC: &[u8; 6] = b"\x93NUMPY";
const ALIGN: usize = 64;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Dtype {
    F4,
    F8,
    I1,
    U1,
    I2,
    U2,
    I4,
    U4,
    I8,
    U8,
}

impl Dtype {
    fn parse(descr: &str) -> Option<Self> {
        let (order, kind) = descr.split_at(1);
        let little = matches!(order, "<" | "|" | "=");
        if !little {
            return None;
        }
        Some(match kind {
            "f4" => Self::F4,
            "f8" => Self::F8,
            "i1" => Self::I1,
            "u1" | "b1" => Self::U1,
            "i2" => Self::I2,
            "u2" => Self::U2,
            "i4" => Self::I4,
            "u4" => Self::U4,
            "i8" => Self::I8,
            "u8" => Self::U8,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Self::I1 | Self::U1 => 1,
            Self::I2 | Self::U2 => 2,
            Self::F4 | Self::I4 | Self::U4 => 4,
            Self::F8 | Self::I8 | Self::U8 => 8,
        }
    }

    fn is_integer(self) -> bool {
        !matches!(self, Self::F4 | Self::F8)
    }

    fn read_f64(self, b: &[u8]) -> f64 {
        match self {
            Self::F4 => f64::from(f32::from_le_bytes(b.try_into().unwrap())),
            Self::F8 => f64::from_le_bytes(b.try_into().unwrap()),
            _ => self.read_i128(b) as f64,
        }
    }

    fn read_i128(self, b: &[u8]) -> i128 {
        match self {
            Self::I1 => i128::from(b[0] as i8),
            Self::U1 => i128::from(b[0]),
            Self::I2 => i128::from(i16::from_le_bytes(b.try_into().unwrap())),
            Self::U2 => i128::from(u16::from_le_bytes(b.try_into().unwrap())),
            Self::I4 => i128::from(i32::from_le_bytes(b.try_into().unwrap())),
            Self::U4 => i128::from(u32::from_le_bytes(b.try_into().unwrap())),
            Self::I8 => i128::from(i64::from_le_bytes(b.try_into().unwrap())),
            Self::U8 => i128::from(u64::from_le_bytes(b.try_into().unwrap())),
            Self::F4 | Self::F8 => unreachable!("float dtype read as integer"),
        }
    }
}

/// Parsed header plus the raw payload bytes.
#[derive(Debug)]
struct RawArray {
    dtype: Dtype,
    shape: Vec<usize>,
    payload: Vec<u8>,
}

fn format_err(path: &Path, reason: impl Into<String>) -> Error {
    Error::Format {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: PathBuf::from(path),
        source,
    }
}

fn parse(path: &Path, bytes: &[u8]) -> Result<RawArray> {
    if bytes.len() < 10 || &bytes[..6] != MAGIC {
        return Err(format_err(path, "missing magic string"));
    }
    let major = bytes[6];
    let (header_len, header_start) = match major {
        1 => (usize::from(u16::from_le_bytes([bytes[8], bytes[9]])), 10),
        2 | 3 => {
            if bytes.len() < 12 {
                return Err(format_err(path, "truncated header length"));
            }
            let len = u32::from_le_bytes([bytes[8], bytes[9], bytes[10], bytes[11]]);
            (len as usize, 12)
        }
        v => return Err(format_err(path, format!("unsupported format version {v}"))),
    };
    let header_end = header_start + header_len;
    if bytes.len() < header_end {
        return Err(format_err(path, "truncated header"));
    }
    let header = std::str::from_utf8(&bytes[header_start..header_end])
        .map_err(|_| format_err(path, "header is not valid text"))?;
    let descr = dict_value(header, "descr")
        .and_then(|v| quoted(v))
        .ok_or_else(|| format_err(path, "header lacks 'descr'"))?;
    let fortran = dict_value(header, "fortran_order")
        .ok_or_else(|| format_err(path, "header lacks 'fortran_order'"))?;
    let shape_text =
        dict_value(header, "shape").ok_or_else(|| format_err(path, "header lacks 'shape'"))?;
    if fortran.starts_with("True") {
        return Err(format_err(path, "fortran_order arrays are not supported"));
    }
    if !fortran.starts_with("False") {
        return Err(format_err(path, "malformed 'fortran_order'"));
    }
    let dtype = Dtype::parse(descr)
        .ok_or_else(|| format_err(path, format!("unsupported dtype '{descr}'")))?;
    let shape = parse_shape(shape_text).ok_or_else(|| format_err(path, "malformed 'shape'"))?;
    let count: usize = shape.iter().product();
    let expected = count * dtype.size();
    let payload = &bytes[header_end..];
    if payload.len() < expected {
        return Err(format_err(
            path,
            format!("truncated payload: {} of {expected} bytes", payload.len()),
        ));
    }
    if payload.len() > expected {
        return Err(format_err(
            path,
            format!("trailing data: {} bytes beyond payload", payload.len() - expected),
        ));
    }
    Ok(RawArray {
        dtype,
        shape,
        payload: payload.to_vec(),
    })
}

/// Returns the text following `'key':` up to the end of the header.
fn dict_value<'a>(header: &'a str, key: &str) -> Option<&'a str> {
    for quote in ['\'', '"'] {
        let needle = format!("{quote}{key}{quote}");
        if let Some(pos) = header.find(&needle) {
            let rest = header[pos + needle.len()..].trim_start();
            return rest.strip_prefix(':').map(str::trim_start);
        }
    }
    None
}

fn quoted(text: &str) -> Option<&str> {
    let q = text.chars().next().filter(|c| *c == '\'' || *c == '"')?;
    let end = text[1..].find(q)?;
    Some(&text[1..1 + end])
}

fn parse_shape(text: &str) -> Option<Vec<usize>> {
    let inner = text.strip_prefix('(')?;
    let inner = &inner[..inner.find(')')?];
    inner
        .split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|s| s.trim_end_matches('L').parse().ok())
        .collect()
}

fn header_bytes(descr: &str, shape: &[usize]) -> Vec<u8> {
    let dims = match shape {
        [one] => format!("({one},)"),
        _ => format!(
            "({})",
            shape.iter().map(usize::to_string).collect::<Vec<_>>().join(", ")
        ),
    };
    let mut dict = format!("{{'descr': '{descr}', 'fortran_order': False, 'shape': {dims}, }}");
    let unpadded = MAGIC.len() + 4 + dict.len() + 1;
    let padding = (ALIGN - unpadded % ALIGN) % ALIGN;
    dict.extend(std::iter::repeat_n(' ', padding));
    dict.push('\n');

    let mut out = Vec::with_capacity(10 + dict.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&[1, 0]);
    out.extend_from_slice(&(dict.len() as u16).to_le_bytes());
    out.extend_from_slice(dict.as_bytes());
    out
}

fn read_file(path: &Path) -> Result<RawArray> {
    let bytes = fs::read(path).map_err(io_err(path))?;
    parse(path, &bytes)
}

fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    let mut file = fs::File::create(path).map_err(io_err(path))?;
    file.write_all(bytes).map_err(io_err(path))
}

/// Serializes a cube to `.npy` bytes (`<f4`, shape `(H, W, L)`).
pub fn cube_to_bytes(cube: &HyperCube) -> Vec<u8> {
    let mut out = header_bytes("<f4", &[cube.height(), cube.width(), cube.bands()]);
    out.reserve(cube.data().len() * 4);
    for v in cube.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

/// Serializes a label map to `.npy` bytes (`<i4`, shape `(H, W)`).
pub fn labels_to_bytes(labels: &LabelMap) -> Result<Vec<u8>> {
    let mut out = header_bytes("<i4", &[labels.height(), labels.width()]);
    out.reserve(labels.len() * 4);
    for &l in labels.labels() {
        let v = i32::try_from(l)
            .map_err(|_| Error::InvalidParameter(format!("label {l} exceeds int32 range")))?;
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn cube_from_bytes(path: &Path, bytes: &[u8]) -> Result<HyperCube> {
    raw_to_cube(path, parse(path, bytes)?)
}

pub fn labels_from_bytes(path: &Path, bytes: &[u8]) -> Result<LabelMap> {
    raw_to_labels(path, parse(path, bytes)?)
}

fn raw_to_cube(path: &Path, raw: RawArray) -> Result<HyperCube> {
    let (h, w, l) = match raw.shape[..] {
        [h, w, l] => (h, w, l),
        [h, w] => (h, w, 1),
        _ => {
            return Err(format_err(
                path,
                format!("cube must be 3-D (H, W, L), got shape {:?}", raw.shape),
            ))
        }
    };
    let size = raw.dtype.size();
    let data: Vec<f32> = if raw.dtype == Dtype::F4 {
        raw.payload
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
            .collect()
    } else {
        raw.payload
            .chunks_exact(size)
            .map(|b| raw.dtype.read_f64(b) as f32)
            .collect()
    };
    HyperCube::new(h, w, l, data).map_err(|e| format_err(path, e.to_string()))
}

fn raw_to_labels(path: &Path, raw: RawArray) -> Result<LabelMap> {
    let [h, w] = raw.shape[..] else {
        return Err(format_err(
            path,
            format!("label map must be 2-D (H, W), got shape {:?}", raw.shape),
        ));
    };
    if !raw.dtype.is_integer() {
        return Err(format_err(path, "label map must have an integer dtype"));
    }
    let labels = raw
        .payload
        .chunks_exact(raw.dtype.size())
        .map(|b| {
            let v = raw.dtype.read_i128(b);
            u32::try_from(v).map_err(|_| format_err(path, format!("invalid label value {v}")))
        })
        .collect::<Result<Vec<u32>>>()?;
    LabelMap::new(h, w, labels).map_err(|e| format_err(path, e.to_string()))
}

pub fn load_cube(path: impl AsRef<Path>) -> Result<HyperCube> {
    let path = path.as_ref();
    raw_to_cube(path, read_file(path)?)
}

pub fn save_cube(path: impl AsRef<Path>, cube: &HyperCube) -> Result<()> {
    write_file(path.as_ref(), &cube_to_bytes(cube))
}

pub fn load_labels(path: impl AsRef<Path>) -> Result<LabelMap> {
    let path = path.as_ref();
    raw_to_labels(path, read_file(path)?)
}

pub fn save_labels(path: impl AsRef<Path>, labels: &LabelMap) -> Result<()> {
    write_file(path.as_ref(), &labels_to_bytes(labels)?)
}
