//! Grid-aligned rasters shared by every stage of the pipeline.
//!
//! All containers store `f64` (or `u32` labels) in row-major pixel order:
//! pixel `i = y * width + x`. A [`HyperCube`] is pixel-major, so the `L`
//! channel values of one pixel are contiguous in memory.

use std::collections::VecDeque;
use std::fmt;
use std::str::FromStr;

use crate::error::{Error, Result};

/// Multivariate image: `width * height` pixels, each an `L`-vector.
#[derive(Debug, Clone, PartialEq)]
pub struct HyperCube {
    width: usize,
    height: usize,
    channels: usize,
    data: Vec<f64>,
    channel_labels: Option<Vec<String>>,
}

impl HyperCube {
    pub fn new(width: usize, height: usize, channels: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "cube grid must be non-empty, got {width}x{height}"
            )));
        }
        if channels == 0 {
            return Err(Error::InvalidParameter("cube needs at least one channel".into()));
        }
        let expected = width * height * channels;
        if data.len() != expected {
            return Err(Error::DimensionMismatch {
                expected,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
            channel_labels: None,
        })
    }

    /// Builds a cube from a function of `(x, y, channel)`.
    pub fn from_fn(
        width: usize,
        height: usize,
        channels: usize,
        mut f: impl FnMut(usize, usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height * channels);
        for y in 0..height {
            for x in 0..width {
                for j in 0..channels {
                    data.push(f(x, y, j));
                }
            }
        }
        Self::new(width, height, channels, data)
    }

    pub fn with_channel_labels(mut self, labels: Vec<String>) -> Result<Self> {
        if labels.len() != self.channels {
            return Err(Error::DimensionMismatch {
                expected: self.channels,
                actual: labels.len(),
            });
        }
        self.channel_labels = Some(labels);
        Ok(self)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn channels(&self) -> usize {
        self.channels
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn channel_labels(&self) -> Option<&[String]> {
        self.channel_labels.as_deref()
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    pub fn get(&self, x: usize, y: usize, j: usize) -> f64 {
        self.data[(y * self.width + x) * self.channels + j]
    }

    /// Spectrum of pixel `i` (row-major index).
    pub fn pixel(&self, i: usize) -> &[f64] {
        &self.data[i * self.channels..(i + 1) * self.channels]
    }

    pub fn pixels(&self) -> std::slice::ChunksExact<'_, f64> {
        self.data.chunks_exact(self.channels)
    }

    /// Extracts channel `j` as a scalar image.
    pub fn channel(&self, j: usize) -> Result<ScalarImage> {
        if j >= self.channels {
            return Err(Error::ChannelOutOfRange {
                index: j,
                channels: self.channels,
            });
        }
        let data = self.pixels().map(|p| p[j]).collect();
        ScalarImage::new(self.width, self.height, data)
    }

    pub fn channel_images(&self) -> Vec<ScalarImage> {
        (0..self.channels)
            .map(|j| self.channel(j).expect("index in range"))
            .collect()
    }

    /// Stacks scalar images on a common grid into a cube, one channel each.
    pub fn from_channels(channels: &[ScalarImage]) -> Result<Self> {
        let first = channels
            .first()
            .ok_or_else(|| Error::InvalidParameter("no channels to assemble".into()))?;
        let (w, h) = first.dims();
        for c in channels {
            first.check_grid(c)?;
        }
        let l = channels.len();
        let mut data = vec![0.0; w * h * l];
        for (j, c) in channels.iter().enumerate() {
            for (i, &v) in c.data().iter().enumerate() {
                data[i * l + j] = v;
            }
        }
        Self::new(w, h, l, data)
    }

    /// Keeps only the listed channels, in the given order.
    pub fn select_channels(&self, indices: &[usize]) -> Result<Self> {
        for &j in indices {
            if j >= self.channels {
                return Err(Error::ChannelOutOfRange {
                    index: j,
                    channels: self.channels,
                });
            }
        }
        let mut data = Vec::with_capacity(self.pixel_count() * indices.len());
        for p in self.pixels() {
            data.extend(indices.iter().map(|&j| p[j]));
        }
        let mut out = Self::new(self.width, self.height, indices.len(), data)?;
        if let Some(labels) = &self.channel_labels {
            out.channel_labels = Some(indices.iter().map(|&j| labels[j].clone()).collect());
        }
        Ok(out)
    }

    pub fn map_values(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            data: self.data.iter().map(|&v| f(v)).collect(),
            ..self.clone()
        }
    }
}

/// Single-valued image on the same grid as a cube.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarImage {
    width: usize,
    height: usize,
    data: Vec<f64>,
}

impl ScalarImage {
    pub fn new(width: usize, height: usize, data: Vec<f64>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "image grid must be non-empty, got {width}x{height}"
            )));
        }
        if data.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::new(width, height, vec![value; width * height])
    }

    pub fn from_fn(
        width: usize,
        height: usize,
        mut f: impl FnMut(usize, usize) -> f64,
    ) -> Result<Self> {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Self::new(width, height, data)
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn get(&self, x: usize, y: usize) -> f64 {
        self.data[y * self.width + x]
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn into_data(self) -> Vec<f64> {
        self.data
    }

    /// Returns `(min, max)` over all pixels.
    pub fn min_max(&self) -> (f64, f64) {
        self.data
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| {
                (lo.min(v), hi.max(v))
            })
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(|&v| f(v)).collect(),
        }
    }

    /// Pointwise combination of two images on the same grid.
    pub fn zip_with(&self, other: &ScalarImage, f: impl Fn(f64, f64) -> f64) -> Result<Self> {
        self.check_grid(other)?;
        Ok(Self {
            width: self.width,
            height: self.height,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| f(a, b))
                .collect(),
        })
    }

    pub(crate) fn check_grid(&self, other: &ScalarImage) -> Result<()> {
        if self.dims() != other.dims() {
            return Err(Error::GridMismatch {
                expected: self.dims(),
                actual: other.dims(),
            });
        }
        Ok(())
    }
}

/// Integer region map. Label 0 means unassigned.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LabelImage {
    width: usize,
    height: usize,
    labels: Vec<u32>,
}

impl LabelImage {
    pub fn new(width: usize, height: usize, labels: Vec<u32>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter(format!(
                "label grid must be non-empty, got {width}x{height}"
            )));
        }
        if labels.len() != width * height {
            return Err(Error::DimensionMismatch {
                expected: width * height,
                actual: labels.len(),
            });
        }
        Ok(Self {
            width,
            height,
            labels,
        })
    }

    pub fn zeros(width: usize, height: usize) -> Result<Self> {
        Self::new(width, height, vec![0; width * height])
    }

    /// Binary 0/1 label image from a boolean mask.
    pub fn from_mask(width: usize, height: usize, mask: &[bool]) -> Result<Self> {
        Self::new(width, height, mask.iter().map(|&m| u32::from(m)).collect())
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    pub fn get(&self, x: usize, y: usize) -> u32 {
        self.labels[y * self.width + x]
    }

    pub fn labels(&self) -> &[u32] {
        &self.labels
    }

    pub fn into_labels(self) -> Vec<u32> {
        self.labels
    }

    pub fn max_label(&self) -> u32 {
        self.labels.iter().copied().max().unwrap_or(0)
    }

    /// Sorted distinct positive labels.
    pub fn distinct_labels(&self) -> Vec<u32> {
        let mut v: Vec<u32> = self.labels.iter().copied().filter(|&l| l > 0).collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    pub fn mask_of(&self, label: u32) -> Vec<bool> {
        self.labels.iter().map(|&l| l == label).collect()
    }

    pub fn foreground(&self) -> Vec<bool> {
        self.labels.iter().map(|&l| l > 0).collect()
    }
}

/// Flat neighborhood as a set of `(dx, dy)` offsets.
///
/// Always contains the origin and is symmetric under negation, so erosion and
/// dilation over it are adjoint. Offsets are kept sorted by `(dy, dx)`; this
/// order is also the neighbor visiting order used by flooding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StructuringElement {
    name: String,
    offsets: Vec<(isize, isize)>,
}

impl StructuringElement {
    pub fn from_offsets(name: impl Into<String>, offsets: &[(isize, isize)]) -> Result<Self> {
        let name = name.into();
        if offsets.is_empty() {
            return Err(Error::InvalidStructuringElement(format!("{name}: empty")));
        }
        let mut offsets = offsets.to_vec();
        offsets.sort_by_key(|&(dx, dy)| (dy, dx));
        offsets.dedup();
        if offsets.binary_search_by_key(&(0, 0), |&(dx, dy)| (dy, dx)).is_err() {
            return Err(Error::InvalidStructuringElement(format!(
                "{name}: origin missing"
            )));
        }
        for &(dx, dy) in &offsets {
            if !offsets.contains(&(-dx, -dy)) {
                return Err(Error::InvalidStructuringElement(format!(
                    "{name}: not symmetric, ({dx}, {dy}) has no mirror"
                )));
            }
        }
        Ok(Self { name, offsets })
    }

    /// 4-connected unit cross.
    pub fn cross4() -> Self {
        Self::from_offsets("cross4", &[(0, -1), (-1, 0), (0, 0), (1, 0), (0, 1)])
            .expect("valid element")
    }

    /// 8-connected unit square.
    pub fn square8() -> Self {
        let mut offsets = Vec::with_capacity(9);
        for dy in -1..=1 {
            for dx in -1..=1 {
                offsets.push((dx, dy));
            }
        }
        Self::from_offsets("square8", &offsets).expect("valid element")
    }

    /// Discrete disk `dx² + dy² <= r²`; stands in for the hexagon on a square grid.
    pub fn disk(radius: usize) -> Self {
        let r = radius as isize;
        let mut offsets = Vec::new();
        for dy in -r..=r {
            for dx in -r..=r {
                if dx * dx + dy * dy <= r * r {
                    offsets.push((dx, dy));
                }
            }
        }
        Self::from_offsets(format!("disk:{radius}"), &offsets).expect("valid element")
    }

    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn offsets(&self) -> &[(isize, isize)] {
        &self.offsets
    }

    /// Offsets other than the origin.
    pub fn neighbor_offsets(&self) -> impl Iterator<Item = (isize, isize)> + '_ {
        self.offsets.iter().copied().filter(|&o| o != (0, 0))
    }

    /// In-bounds pixel indices of the window centered on `(x, y)`, origin included.
    pub fn window(
        &self,
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    ) -> impl Iterator<Item = usize> + '_ {
        self.offsets
            .iter()
            .filter_map(move |&(dx, dy)| shift(x, y, dx, dy, width, height))
    }

    /// In-bounds neighbor indices of `(x, y)`, origin excluded.
    pub fn neighbors(
        &self,
        x: usize,
        y: usize,
        width: usize,
        height: usize,
    ) -> impl Iterator<Item = usize> + '_ {
        self.neighbor_offsets()
            .filter_map(move |(dx, dy)| shift(x, y, dx, dy, width, height))
    }
}

#[inline]
fn shift(x: usize, y: usize, dx: isize, dy: isize, width: usize, height: usize) -> Option<usize> {
    let nx = x as isize + dx;
    let ny = y as isize + dy;
    if nx < 0 || ny < 0 || nx >= width as isize || ny >= height as isize {
        None
    } else {
        Some(ny as usize * width + nx as usize)
    }
}

impl fmt::Display for StructuringElement {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.name)
    }
}

impl FromStr for StructuringElement {
    type Err = Error;

    /// Accepts `cross4`, `square8` or `disk:<radius>`.
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "cross4" => Ok(Self::cross4()),
            "square8" => Ok(Self::square8()),
            _ => {
                let radius = s
                    .strip_prefix("disk:")
                    .and_then(|r| r.parse::<usize>().ok())
                    .ok_or_else(|| {
                        Error::InvalidStructuringElement(format!(
                            "unknown element {s:?} (expected cross4, square8 or disk:<r>)"
                        ))
                    })?;
                Ok(Self::disk(radius))
            }
        }
    }
}

impl serde::Serialize for StructuringElement {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(&self.name)
    }
}

impl<'de> serde::Deserialize<'de> for StructuringElement {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let s = String::deserialize(d)?;
        s.parse().map_err(serde::de::Error::custom)
    }
}

/// Labels the connected components of a binary mask.
///
/// Any nonzero pixel counts as foreground. Components are numbered `1..=n`
/// in raster order of their first pixel.
pub fn connected_components(mask: &LabelImage, se: &StructuringElement) -> LabelImage {
    let (w, h) = mask.dims();
    let fg = mask.labels();
    let mut out = vec![0u32; w * h];
    let mut next = 0u32;
    let mut queue = VecDeque::new();
    for start in 0..w * h {
        if fg[start] == 0 || out[start] != 0 {
            continue;
        }
        next += 1;
        out[start] = next;
        queue.push_back(start);
        while let Some(p) = queue.pop_front() {
            for q in se.neighbors(p % w, p / w, w, h) {
                if fg[q] != 0 && out[q] == 0 {
                    out[q] = next;
                    queue.push_back(q);
                }
            }
        }
    }
    LabelImage::new(w, h, out).expect("same grid")
}
