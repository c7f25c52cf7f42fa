//! Per-pixel agreement between a segmentation and a truth labeling.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::LabelImage;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelScore {
    pub truth_label: u32,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub truth_pixels: usize,
    pub predicted_pixels: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Metrics {
    /// Pixel count per predicted label, 0 included when present.
    pub region_sizes: BTreeMap<u32, usize>,
    /// Truth label each predicted region was matched to.
    pub region_to_truth: BTreeMap<u32, u32>,
    pub per_label: Vec<LabelScore>,
    /// Mean F1 over truth labels.
    pub f1: f64,
    pub accuracy: f64,
}

/// Scores `predicted` against `truth`.
///
/// Each predicted region maps to the truth label it overlaps most (lowest
/// label on ties), so over-segmentation is not penalized. Pixels with truth 0
/// are ignored; predicted 0 (watershed lines) counts as a miss.
pub fn evaluate(predicted: &LabelImage, truth: &LabelImage) -> Result<Metrics> {
    if predicted.dims() != truth.dims() {
        return Err(Error::GridMismatch {
            expected: truth.dims(),
            actual: predicted.dims(),
        });
    }
    let mut region_sizes = BTreeMap::new();
    let mut overlap: BTreeMap<u32, BTreeMap<u32, usize>> = BTreeMap::new();
    for (&p, &t) in predicted.labels().iter().zip(truth.labels()) {
        *region_sizes.entry(p).or_insert(0) += 1;
        if p > 0 && t > 0 {
            *overlap.entry(p).or_default().entry(t).or_insert(0) += 1;
        }
    }
    let region_to_truth: BTreeMap<u32, u32> = overlap
        .iter()
        .map(|(&p, counts)| {
            let best = counts
                .iter()
                .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
                .map(|(&t, _)| t)
                .expect("non-empty overlap");
            (p, best)
        })
        .collect();

    let truth_labels = truth.distinct_labels();
    let mut tp: BTreeMap<u32, usize> = BTreeMap::new();
    let mut pred_count: BTreeMap<u32, usize> = BTreeMap::new();
    let mut truth_count: BTreeMap<u32, usize> = BTreeMap::new();
    let mut correct = 0;
    let mut scored = 0;
    for (&p, &t) in predicted.labels().iter().zip(truth.labels()) {
        if t == 0 {
            continue;
        }
        scored += 1;
        *truth_count.entry(t).or_insert(0) += 1;
        if let Some(&m) = region_to_truth.get(&p) {
            *pred_count.entry(m).or_insert(0) += 1;
            if m == t {
                *tp.entry(t).or_insert(0) += 1;
                correct += 1;
            }
        }
    }

    let per_label: Vec<LabelScore> = truth_labels
        .iter()
        .map(|&t| {
            let hits = tp.get(&t).copied().unwrap_or(0) as f64;
            let n_pred = pred_count.get(&t).copied().unwrap_or(0);
            let n_truth = truth_count.get(&t).copied().unwrap_or(0);
            let ratio = |den: usize| if den == 0 { 0.0 } else { hits / den as f64 };
            let (precision, recall) = (ratio(n_pred), ratio(n_truth));
            let f1 = if n_pred + n_truth == 0 {
                0.0
            } else {
                2.0 * hits / (n_pred + n_truth) as f64
            };
            LabelScore {
                truth_label: t,
                precision,
                recall,
                f1,
                truth_pixels: n_truth,
                predicted_pixels: n_pred,
            }
        })
        .collect();
    let f1 = if per_label.is_empty() {
        0.0
    } else {
        per_label.iter().map(|s| s.f1).sum::<f64>() / per_label.len() as f64
    };
    Ok(Metrics {
        region_sizes,
        region_to_truth,
        per_label,
        f1,
        accuracy: if scored == 0 { 0.0 } else { correct as f64 / scored as f64 },
    })
}
