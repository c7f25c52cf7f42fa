//! Flat grayscale morphology on scalar images.
//!
//! Neighborhoods are restricted to in-bounds pixels at the frame edge; no
//! padding value is invented. The gaussian prefilter is the exception and
//! reflects at the border.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{HyperCube, ScalarImage, StructuringElement};

fn rank_filter(img: &ScalarImage, se: &StructuringElement, pick: fn(f64, f64) -> f64) -> ScalarImage {
    let (w, h) = img.dims();
    let src = img.data();
    let mut out = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let v = se
                .window(x, y, w, h)
                .map(|i| src[i])
                .reduce(pick)
                .expect("window contains the origin");
            out.push(v);
        }
    }
    ScalarImage::new(w, h, out).expect("same grid")
}

/// Minimum over the structuring element.
pub fn erode(img: &ScalarImage, se: &StructuringElement) -> ScalarImage {
    rank_filter(img, se, f64::min)
}

/// Maximum over the structuring element.
pub fn dilate(img: &ScalarImage, se: &StructuringElement) -> ScalarImage {
    rank_filter(img, se, f64::max)
}

/// Dilation minus erosion; nonnegative everywhere.
pub fn morph_gradient(img: &ScalarImage, se: &StructuringElement) -> ScalarImage {
    let d = dilate(img, se);
    let e = erode(img, se);
    d.zip_with(&e, |a, b| a - b).expect("same grid")
}

pub fn opening(img: &ScalarImage, se: &StructuringElement) -> ScalarImage {
    dilate(&erode(img, se), se)
}

pub fn closing(img: &ScalarImage, se: &StructuringElement) -> ScalarImage {
    erode(&dilate(img, se), se)
}

/// Binary opening of a boolean mask.
pub fn open_mask(mask: &[bool], width: usize, height: usize, se: &StructuringElement) -> Vec<bool> {
    let img = mask_to_image(mask, width, height);
    opening(&img, se).data().iter().map(|&v| v > 0.5).collect()
}

/// Binary erosion of a boolean mask.
pub fn erode_mask(mask: &[bool], width: usize, height: usize, se: &StructuringElement) -> Vec<bool> {
    let img = mask_to_image(mask, width, height);
    erode(&img, se).data().iter().map(|&v| v > 0.5).collect()
}

fn mask_to_image(mask: &[bool], width: usize, height: usize) -> ScalarImage {
    ScalarImage::new(width, height, mask.iter().map(|&m| f64::from(u8::from(m))).collect())
        .expect("mask matches grid")
}

/// Sampled gaussian of odd `size` with `sigma = (size - 1) / 6`, normalized to sum 1.
pub fn gaussian_kernel(size: usize) -> Result<Vec<f64>> {
    if size < 3 || size.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "gaussian size must be odd and >= 3, got {size}"
        )));
    }
    let sigma = (size - 1) as f64 / 6.0;
    let r = (size / 2) as f64;
    let mut k: Vec<f64> = (0..size)
        .map(|i| {
            let t = i as f64 - r;
            (-0.5 * t * t / (sigma * sigma)).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|v| *v /= s);
    Ok(k)
}

/// Half-sample symmetric reflection (`d c b a | a b c d | d c b a`).
fn reflect(i: isize, n: usize) -> usize {
    let n = n as isize;
    let m = i.rem_euclid(2 * n);
    (if m < n { m } else { 2 * n - 1 - m }) as usize
}

/// Separable gaussian smoothing with reflected borders.
pub fn gaussian_filter(img: &ScalarImage, size: usize) -> Result<ScalarImage> {
    let k = gaussian_kernel(size)?;
    let r = (size / 2) as isize;
    let (w, h) = img.dims();
    let src = img.data();

    let mut rows = vec![0.0; w * h];
    for y in 0..h {
        let line = &src[y * w..(y + 1) * w];
        for x in 0..w {
            rows[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(t, &kv)| kv * line[reflect(x as isize + t as isize - r, w)])
                .sum();
        }
    }
    let mut out = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            out[y * w + x] = k
                .iter()
                .enumerate()
                .map(|(t, &kv)| kv * rows[reflect(y as isize + t as isize - r, h) * w + x])
                .sum();
        }
    }
    ScalarImage::new(w, h, out)
}

/// How the leveling marker is derived from each channel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MarkerSource {
    Gaussian { size: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct LevelingSpec {
    pub marker_source: MarkerSource,
    pub se: StructuringElement,
    /// `None` means `width * height`.
    pub max_iters: Option<usize>,
    pub tolerance: f64,
}

impl Default for LevelingSpec {
    fn default() -> Self {
        Self {
            marker_source: MarkerSource::Gaussian { size: 11 },
            se: StructuringElement::square8(),
            max_iters: None,
            tolerance: 1e-9,
        }
    }
}

impl LevelingSpec {
    pub fn validate(&self) -> Result<()> {
        let MarkerSource::Gaussian { size } = self.marker_source;
        gaussian_kernel(size)?;
        if self.max_iters == Some(0) {
            return Err(Error::InvalidParameter("leveling max_iters must be >= 1".into()));
        }
        if !(self.tolerance >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "leveling tolerance must be >= 0, got {}",
                self.tolerance
            )));
        }
        Ok(())
    }
}

/// Leveling of `reference` driven by `marker`.
///
/// Iterates `g <- (reference ∧ δg) ∨ εg` from `g = marker` until the largest
/// pointwise change is at most `tolerance`. Every value produced is one of the
/// input values, so the iteration reaches an exact fixpoint.
pub fn leveling(
    reference: &ScalarImage,
    marker: &ScalarImage,
    se: &StructuringElement,
    max_iters: Option<usize>,
    tolerance: f64,
) -> Result<ScalarImage> {
    reference.check_grid(marker)?;
    let max_iters = max_iters.unwrap_or(reference.width() * reference.height());
    let mut g = marker.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..max_iters {
        let d = dilate(&g, se);
        let e = erode(&g, se);
        let next: Vec<f64> = reference
            .data()
            .iter()
            .zip(d.data())
            .zip(e.data())
            .map(|((&f, &dv), &ev)| f.min(dv).max(ev))
            .collect();
        residual = next
            .iter()
            .zip(g.data())
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max);
        g = ScalarImage::new(g.width(), g.height(), next)?;
        if residual <= tolerance {
            return Ok(g);
        }
    }
    Err(Error::NotConverged {
        iterations: max_iters,
        residual,
    })
}

/// Levels every channel against its own gaussian-smoothed version.
pub fn level_cube(cube: &HyperCube, spec: &LevelingSpec) -> Result<HyperCube> {
    spec.validate()?;
    let MarkerSource::Gaussian { size } = spec.marker_source;
    let leveled = cube
        .channel_images()
        .par_iter()
        .map(|c| {
            let marker = gaussian_filter(c, size)?;
            leveling(c, &marker, &spec.se, spec.max_iters, spec.tolerance)
        })
        .collect::<Result<Vec<_>>>()?;
    let out = HyperCube::from_channels(&leveled)?;
    match cube.channel_labels() {
        Some(l) => out.with_channel_labels(l.to_vec()),
        None => Ok(out),
    }
}
