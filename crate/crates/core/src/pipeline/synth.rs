//! Synthetic thermography-like cubes with ground truth.
//!
//! Each material follows a transitory rise on the leading channels and then
//! the line `a * j + b`. Regions may nest inside earlier regions (painted
//! over them) but may not partially overlap.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{HyperCube, LabelImage};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "shape", rename_all = "snake_case")]
pub enum Shape {
    Disk { cx: f64, cy: f64, r: f64 },
    /// Half-open pixel box `[x0, x1) x [y0, y1)`.
    Rect { x0: usize, y0: usize, x1: usize, y1: usize },
    Ellipse { cx: f64, cy: f64, rx: f64, ry: f64 },
}

impl Shape {
    pub fn contains(&self, x: usize, y: usize) -> bool {
        let (xf, yf) = (x as f64, y as f64);
        match *self {
            Shape::Disk { cx, cy, r } => (xf - cx).powi(2) + (yf - cy).powi(2) <= r * r,
            Shape::Rect { x0, y0, x1, y1 } => (x0..x1).contains(&x) && (y0..y1).contains(&y),
            Shape::Ellipse { cx, cy, rx, ry } => {
                ((xf - cx) / rx).powi(2) + ((yf - cy) / ry).powi(2) <= 1.0
            }
        }
    }

    fn mask(&self, width: usize, height: usize) -> Vec<bool> {
        (0..width * height).map(|i| self.contains(i % width, i / width)).collect()
    }
}

/// Spectral law of a material.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Material {
    pub slope: f64,
    pub intercept: f64,
    pub rise: f64,
}

impl Material {
    /// Channel values: a linear climb of height `rise` over channels `0..T`
    /// ending at `a*T + b`, then `a*j + b`.
    pub fn spectrum(&self, channels: usize, transitory_end: usize) -> Vec<f64> {
        let t = transitory_end;
        let start = self.slope * t as f64 + self.intercept;
        (0..channels)
            .map(|j| {
                if j >= t {
                    self.slope * j as f64 + self.intercept
                } else if t == 1 {
                    start
                } else {
                    start - self.rise + self.rise * j as f64 / (t - 1) as f64
                }
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Region {
    #[serde(flatten)]
    pub shape: Shape,
    pub material: Material,
    pub label: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticSpec {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub transitory_end: usize,
    pub background: Material,
    #[serde(default = "default_background_label")]
    pub background_label: u32,
    #[serde(default)]
    pub regions: Vec<Region>,
    #[serde(default)]
    pub noise_sigma: f64,
    #[serde(default = "default_seed")]
    pub seed: u64,
}

fn default_background_label() -> u32 {
    1
}

fn default_seed() -> u64 {
    42
}

impl SyntheticSpec {
    /// Lid-like scene: a disk of lid material on a background, with three
    /// glue blobs inside the lid. Background and lid share truth label 1,
    /// glue is label 2. Noise is `noise_fraction` of the RMS difference
    /// between the glue and lid spectra.
    pub fn lid(size: usize, channels: usize, transitory_end: usize, noise_fraction: f64, seed: u64) -> Self {
        let s = size as f64;
        let c = (s - 1.0) / 2.0;
        let lid = Material {
            slope: -1.0,
            intercept: 100.0,
            rise: 20.0,
        };
        let glue = Material {
            slope: -0.6,
            intercept: 92.0,
            rise: 32.0,
        };
        let blob = |dx: f64, dy: f64| Region {
            shape: Shape::Disk {
                cx: c + dx * s,
                cy: c + dy * s,
                r: 0.08 * s,
            },
            material: glue,
            label: 2,
        };
        let mut spec = Self {
            width: size,
            height: size,
            channels,
            transitory_end,
            background: Material {
                slope: -0.2,
                intercept: 45.0,
                rise: 6.0,
            },
            background_label: 1,
            regions: vec![
                Region {
                    shape: Shape::Disk { cx: c, cy: c, r: 0.39 * s },
                    material: lid,
                    label: 1,
                },
                blob(-0.17, -0.12),
                blob(0.18, -0.05),
                blob(-0.02, 0.2),
            ],
            noise_sigma: 0.0,
            seed,
        };
        spec.noise_sigma = noise_fraction * spec.contrast(&lid, &glue);
        spec
    }

    /// RMS difference between the spectra of two materials.
    pub fn contrast(&self, a: &Material, b: &Material) -> f64 {
        let sa = a.spectrum(self.channels, self.transitory_end);
        let sb = b.spectrum(self.channels, self.transitory_end);
        let ss: f64 = sa.iter().zip(&sb).map(|(x, y)| (x - y).powi(2)).sum();
        (ss / self.channels as f64).sqrt()
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 || self.channels == 0 {
            return Err(Error::InvalidParameter("synthetic cube must be non-empty".into()));
        }
        if self.transitory_end > self.channels {
            return Err(Error::InvalidParameter(format!(
                "transitory_end {} exceeds {} channels",
                self.transitory_end, self.channels
            )));
        }
        if !(self.noise_sigma >= 0.0) {
            return Err(Error::InvalidParameter("noise_sigma must be >= 0".into()));
        }
        Ok(())
    }
}

/// Renders the cube and its truth labels. Deterministic for a given spec.
pub fn generate(spec: &SyntheticSpec) -> Result<(HyperCube, LabelImage)> {
    spec.validate()?;
    let (w, h, l) = (spec.width, spec.height, spec.channels);
    let masks: Vec<Vec<bool>> = spec.regions.iter().map(|r| r.shape.mask(w, h)).collect();
    for (j, later) in masks.iter().enumerate() {
        for (i, earlier) in masks[..j].iter().enumerate() {
            let overlap = earlier.iter().zip(later).any(|(&a, &b)| a && b);
            let nested = later.iter().zip(earlier).all(|(&b, &a)| !b || a);
            if overlap && !nested {
                return Err(Error::InvalidParameter(format!(
                    "region {j} partially overlaps region {i}; later regions must nest inside earlier ones"
                )));
            }
        }
    }

    let mut owner: Vec<Option<usize>> = vec![None; w * h];
    for (r, mask) in masks.iter().enumerate() {
        owner.iter_mut().zip(mask).filter(|(_, &m)| m).for_each(|(o, _)| *o = Some(r));
    }
    let spectra: Vec<Vec<f64>> = spec
        .regions
        .iter()
        .map(|r| r.material.spectrum(l, spec.transitory_end))
        .collect();
    let background = spec.background.spectrum(l, spec.transitory_end);

    let mut data = Vec::with_capacity(w * h * l);
    for o in &owner {
        data.extend_from_slice(o.map_or(&background, |r| &spectra[r]));
    }
    if spec.noise_sigma > 0.0 {
        let normal = Normal::new(0.0, spec.noise_sigma)
            .map_err(|e| Error::InvalidParameter(e.to_string()))?;
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        data.iter_mut().for_each(|v| *v += normal.sample(&mut rng));
    }

    let truth = owner
        .iter()
        .map(|o| o.map_or(spec.background_label, |r| spec.regions[r].label))
        .collect();
    let labels = (0..l).map(|j| format!("t{j}")).collect();
    Ok((
        HyperCube::new(w, h, l, data)?.with_channel_labels(labels)?,
        LabelImage::new(w, h, truth)?,
    ))
}
