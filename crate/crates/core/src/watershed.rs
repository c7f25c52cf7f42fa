//! Marker-controlled watershed by hierarchical-queue flooding.
//!
//! Markers are the only minima: every marker pixel enters the queue at level
//! 0 in raster order. Within a level the queue is FIFO and neighbors are
//! visited in the structuring element's offset order, so the output is a pure
//! function of the quantized gradient, the markers and the connectivity.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gradient::{gradient, GradientSpec};
use crate::image::{HyperCube, LabelImage, ScalarImage, StructuringElement};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FloodSpec {
    pub levels: usize,
    pub connectivity: StructuringElement,
    /// Label contested pixels 0 instead of producing a full partition.
    pub emit_lines: bool,
}

impl Default for FloodSpec {
    fn default() -> Self {
        Self {
            levels: 256,
            connectivity: StructuringElement::square8(),
            emit_lines: false,
        }
    }
}

impl FloodSpec {
    pub fn validate(&self) -> Result<()> {
        if self.levels < 2 {
            return Err(Error::InvalidParameter(format!(
                "flood levels must be >= 2, got {}",
                self.levels
            )));
        }
        Ok(())
    }
}

/// Level of each pixel, `round(g * (levels - 1))`.
pub fn quantize(gradient: &ScalarImage, levels: usize) -> Result<Vec<usize>> {
    gradient
        .data()
        .iter()
        .enumerate()
        .map(|(pixel, &value)| {
            if !(0.0..=1.0).contains(&value) {
                return Err(Error::GradientOutOfRange { pixel, value });
            }
            Ok((value * (levels - 1) as f64).round() as usize)
        })
        .collect()
}

struct HierarchicalQueue {
    levels: Vec<VecDeque<usize>>,
    current: usize,
}

impl HierarchicalQueue {
    fn new(levels: usize) -> Self {
        Self {
            levels: vec![VecDeque::new(); levels],
            current: 0,
        }
    }

    fn push(&mut self, level: usize, pixel: usize) {
        self.levels[level.max(self.current)].push_back(pixel);
    }

    fn pop(&mut self) -> Option<(usize, usize)> {
        while self.current < self.levels.len() {
            if let Some(p) = self.levels[self.current].pop_front() {
                return Some((self.current, p));
            }
            self.current += 1;
        }
        None
    }
}

/// Floods `gradient` (values in `[0, 1]`) from the positive labels of `markers`.
pub fn watershed(gradient: &ScalarImage, markers: &LabelImage, spec: &FloodSpec) -> Result<LabelImage> {
    spec.validate()?;
    let (w, h) = gradient.dims();
    if markers.dims() != (w, h) {
        return Err(Error::GridMismatch {
            expected: (w, h),
            actual: markers.dims(),
        });
    }
    let level = quantize(gradient, spec.levels)?;
    if markers.labels().iter().all(|&l| l == 0) {
        return Err(Error::NoMarkers);
    }
    let se = &spec.connectivity;
    let mut label = markers.labels().to_vec();
    let mut queue = HierarchicalQueue::new(spec.levels);

    if !spec.emit_lines {
        // A pixel takes its label when first reached.
        for (i, _) in label.iter().enumerate().filter(|(_, &l)| l > 0) {
            queue.push(0, i);
        }
        while let Some((_, p)) = queue.pop() {
            for n in se.neighbors(p % w, p / w, w, h) {
                if label[n] == 0 {
                    label[n] = label[p];
                    queue.push(level[n], n);
                }
            }
        }
        return LabelImage::new(w, h, label);
    }

    // With lines, a pixel is decided when popped: one neighboring label
    // claims it, several make it a line pixel that does not propagate.
    let mut queued: Vec<bool> = label.iter().map(|&l| l > 0).collect();
    for p in 0..w * h {
        if label[p] > 0 {
            for n in se.neighbors(p % w, p / w, w, h) {
                if !queued[n] {
                    queued[n] = true;
                    queue.push(level[n], n);
                }
            }
        }
    }
    let mut decided: Vec<bool> = label.iter().map(|&l| l > 0).collect();
    while let Some((_, p)) = queue.pop() {
        let mut claim = 0;
        let mut contested = false;
        for n in se.neighbors(p % w, p / w, w, h) {
            let l = label[n];
            if decided[n] && l > 0 {
                if claim == 0 {
                    claim = l;
                } else if claim != l {
                    contested = true;
                }
            }
        }
        decided[p] = true;
        if contested {
            continue;
        }
        label[p] = claim;
        for n in se.neighbors(p % w, p / w, w, h) {
            if !queued[n] {
                queued[n] = true;
                queue.push(level[n], n);
            }
        }
    }
    LabelImage::new(w, h, label)
}

/// Gradient of `space` flooded from `markers`.
pub fn segment(
    space: &HyperCube,
    markers: &LabelImage,
    gspec: &GradientSpec,
    fspec: &FloodSpec,
) -> Result<LabelImage> {
    watershed(&gradient(space, gspec)?, markers, fspec)
}

/// Pixels with a differently labeled neighbor, for display.
pub fn boundaries(labels: &LabelImage, se: &StructuringElement) -> Vec<bool> {
    let (w, h) = labels.dims();
    let l = labels.labels();
    (0..w * h)
        .map(|p| l[p] == 0 || se.neighbors(p % w, p / w, w, h).any(|n| l[n] != l[p]))
        .collect()
}
