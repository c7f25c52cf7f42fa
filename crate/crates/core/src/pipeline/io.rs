//! HYP1 cubes, PNG/PGM exports and PNG stack import.
//!
//! HYP1 layout: the bytes `HYP1`, a little-endian `u32` header length, a
//! JSON header, then the pixel-major payload.

use std::fs;
use std::path::{Path, PathBuf};

use image::{GrayImage, ImageBuffer, Luma, Rgb, RgbImage};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{HyperCube, LabelImage, ScalarImage};

const MAGIC: &[u8; 4] = b"HYP1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Dtype {
    F32,
    U16,
}

impl Dtype {
    fn size(self) -> usize {
        match self {
            Dtype::F32 => 4,
            Dtype::U16 => 2,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Hyp1Header {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub dtype: Dtype,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub channel_labels: Option<Vec<String>>,
    pub byte_order: String,
}

impl Hyp1Header {
    fn payload_len(&self) -> usize {
        self.width * self.height * self.channels * self.dtype.size()
    }
}

fn encode(header: &Hyp1Header, payload: &[u8]) -> Result<Vec<u8>> {
    let json = serde_json::to_vec(header)?;
    let len = u32::try_from(json.len()).map_err(|_| Error::Format("header too large".into()))?;
    let mut out = Vec::with_capacity(8 + json.len() + payload.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&len.to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(payload);
    Ok(out)
}

/// Parses a HYP1 buffer into its header and values.
pub fn decode(bytes: &[u8]) -> Result<(Hyp1Header, Vec<f64>)> {
    if bytes.len() < 8 || &bytes[..4] != MAGIC {
        return Err(Error::Format("missing HYP1 magic".into()));
    }
    let len = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes")) as usize;
    let body = &bytes[8..];
    if body.len() < len {
        return Err(Error::Format(format!(
            "header declares {len} bytes but only {} remain",
            body.len()
        )));
    }
    let header: Hyp1Header = serde_json::from_slice(&body[..len])
        .map_err(|e| Error::Format(format!("bad header: {e}")))?;
    if header.byte_order != "little" {
        return Err(Error::Format(format!("unsupported byte order {:?}", header.byte_order)));
    }
    if header.width == 0 || header.height == 0 || header.channels == 0 {
        return Err(Error::Format("empty dimensions".into()));
    }
    let payload = &body[len..];
    let expected = header.payload_len();
    if payload.len() != expected {
        return Err(Error::TruncatedPayload {
            expected,
            actual: payload.len(),
        });
    }
    let values = match header.dtype {
        Dtype::F32 => payload
            .chunks_exact(4)
            .map(|c| f64::from(f32::from_le_bytes(c.try_into().expect("4 bytes"))))
            .collect(),
        Dtype::U16 => payload
            .chunks_exact(2)
            .map(|c| f64::from(u16::from_le_bytes(c.try_into().expect("2 bytes"))))
            .collect(),
    };
    Ok((header, values))
}

/// Cube as HYP1 bytes with `f32` samples.
pub fn encode_cube(cube: &HyperCube) -> Result<Vec<u8>> {
    let header = Hyp1Header {
        width: cube.width(),
        height: cube.height(),
        channels: cube.channels(),
        dtype: Dtype::F32,
        channel_labels: cube.channel_labels().map(<[String]>::to_vec),
        byte_order: "little".into(),
    };
    let payload: Vec<u8> = cube.data().iter().flat_map(|&v| (v as f32).to_le_bytes()).collect();
    encode(&header, &payload)
}

pub fn decode_cube(bytes: &[u8]) -> Result<HyperCube> {
    let (header, values) = decode(bytes)?;
    let cube = HyperCube::new(header.width, header.height, header.channels, values)?;
    match header.channel_labels {
        Some(labels) => cube.with_channel_labels(labels),
        None => Ok(cube),
    }
}

/// Labels as a single-channel `u16` HYP1 buffer.
pub fn encode_labels(labels: &LabelImage) -> Result<Vec<u8>> {
    let max = labels.max_label();
    if max > u32::from(u16::MAX) {
        return Err(Error::Format(format!("label {max} does not fit in u16")));
    }
    let header = Hyp1Header {
        width: labels.width(),
        height: labels.height(),
        channels: 1,
        dtype: Dtype::U16,
        channel_labels: None,
        byte_order: "little".into(),
    };
    let payload: Vec<u8> = labels.labels().iter().flat_map(|&l| (l as u16).to_le_bytes()).collect();
    encode(&header, &payload)
}

pub fn decode_labels(bytes: &[u8]) -> Result<LabelImage> {
    let (header, values) = decode(bytes)?;
    if header.channels != 1 {
        return Err(Error::Format(format!(
            "label file has {} channels, expected 1",
            header.channels
        )));
    }
    if values.iter().any(|&v| v < 0.0 || v.fract() != 0.0 || v > f64::from(u32::MAX)) {
        return Err(Error::Format("label values must be non-negative integers".into()));
    }
    LabelImage::new(header.width, header.height, values.iter().map(|&v| v as u32).collect())
}

pub fn read_cube(path: &Path) -> Result<HyperCube> {
    decode_cube(&fs::read(path)?)
}

pub fn write_cube(path: &Path, cube: &HyperCube) -> Result<()> {
    Ok(fs::write(path, encode_cube(cube)?)?)
}

pub fn read_labels(path: &Path) -> Result<LabelImage> {
    decode_labels(&fs::read(path)?)
}

pub fn write_labels(path: &Path, labels: &LabelImage) -> Result<()> {
    Ok(fs::write(path, encode_labels(labels)?)?)
}

/// Single scalar image as a one-channel cube.
pub fn write_scalar(path: &Path, img: &ScalarImage) -> Result<()> {
    write_cube(path, &HyperCube::from_channels(std::slice::from_ref(img))?)
}

/// 8-bit grayscale rendering, min-max stretched. The format follows the
/// extension (`.png`, `.pgm`).
pub fn write_gray(path: &Path, img: &ScalarImage) -> Result<()> {
    let (lo, hi) = img.min_max();
    let range = hi - lo;
    let pixels = img
        .data()
        .iter()
        .map(|&v| if range > 0.0 { ((v - lo) / range * 255.0).round() as u8 } else { 0 })
        .collect();
    let buf = GrayImage::from_raw(img.width() as u32, img.height() as u32, pixels)
        .expect("buffer matches dimensions");
    Ok(buf.save(path)?)
}

const PALETTE: [[u8; 3]; 12] = [
    [230, 25, 75],
    [60, 180, 75],
    [0, 130, 200],
    [255, 225, 25],
    [245, 130, 48],
    [145, 30, 180],
    [70, 240, 240],
    [240, 50, 230],
    [210, 245, 60],
    [250, 190, 212],
    [0, 128, 128],
    [170, 110, 40],
];

/// Color of a label: black for 0, then a fixed cycling table.
pub fn label_color(label: u32) -> [u8; 3] {
    if label == 0 {
        [0, 0, 0]
    } else {
        PALETTE[(label as usize - 1) % PALETTE.len()]
    }
}

pub fn write_label_png(path: &Path, labels: &LabelImage) -> Result<()> {
    let (w, h) = labels.dims();
    let buf: RgbImage = ImageBuffer::from_fn(w as u32, h as u32, |x, y| {
        Rgb(label_color(labels.get(x as usize, y as usize)))
    });
    Ok(buf.save(path)?)
}

/// Image files of a directory in lexicographic order.
fn stack_files(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.extension()
                .and_then(|e| e.to_str())
                .is_some_and(|e| matches!(e.to_ascii_lowercase().as_str(), "png" | "pgm" | "pnm"))
        })
        .collect();
    files.sort();
    Ok(files)
}

/// One channel per grayscale image file, in lexicographic filename order.
pub fn read_png_stack(dir: &Path) -> Result<HyperCube> {
    let files = stack_files(dir)?;
    if files.is_empty() {
        return Err(Error::Format(format!("no png/pgm files in {}", dir.display())));
    }
    let mut channels = Vec::with_capacity(files.len());
    for f in &files {
        let img: ImageBuffer<Luma<u16>, Vec<u16>> = image::open(f)?.into_luma16();
        let (w, h) = img.dimensions();
        let data = img.into_raw().into_iter().map(f64::from).collect();
        channels.push(ScalarImage::new(w as usize, h as usize, data)?);
    }
    let labels = files
        .iter()
        .map(|f| f.file_stem().map_or_else(String::new, |s| s.to_string_lossy().into_owned()))
        .collect();
    HyperCube::from_channels(&channels)?.with_channel_labels(labels)
}
