//! Vector-pixel distances and the scalar reliefs that get flooded.
//!
//! Every gradient is min-max normalized to `[0, 1]`. A constant relief maps to
//! all zeros so it floods as a single basin.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::factor::covariance;
use crate::image::{HyperCube, ScalarImage, StructuringElement};
use crate::morphology::morph_gradient;

/// Distance selection as written in a configuration; statistics are
/// estimated from the cube the distance is applied to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    /// Full sample covariance.
    Mahalanobis,
    /// Channel variances only; channels assumed uncorrelated.
    MahalanobisDiagonal,
    ChiSquared,
}

/// A distance between `L`-vectors, with any statistics it needs.
#[derive(Debug, Clone, PartialEq)]
pub enum DistanceKind {
    Euclidean,
    /// Holds the inverse of a symmetric positive-definite covariance.
    Mahalanobis { inverse: DMatrix<f64> },
    MahalanobisDiagonal { variances: Vec<f64> },
    /// Channel totals `f_.j` and grand total `N` of the reference cube.
    ChiSquared { col_sums: Vec<f64>, total: f64 },
}

impl DistanceKind {
    pub fn mahalanobis(cov: &DMatrix<f64>) -> Result<Self> {
        if !cov.is_square() {
            return Err(Error::SingularCovariance);
        }
        let chol = cov.clone().cholesky().ok_or(Error::SingularCovariance)?;
        Ok(DistanceKind::Mahalanobis {
            inverse: chol.inverse(),
        })
    }

    pub fn mahalanobis_diagonal(variances: Vec<f64>) -> Result<Self> {
        if variances.iter().any(|&v| !(v > 0.0)) {
            return Err(Error::SingularCovariance);
        }
        Ok(DistanceKind::MahalanobisDiagonal { variances })
    }

    pub fn chi_squared(col_sums: Vec<f64>, total: f64) -> Result<Self> {
        if !(total > 0.0) {
            return Err(Error::InvalidParameter("chi-squared total must be positive".into()));
        }
        if let Some(j) = col_sums.iter().position(|&c| !(c > 0.0)) {
            return Err(Error::ZeroColumn(j));
        }
        Ok(DistanceKind::ChiSquared { col_sums, total })
    }

    /// Resolves a configured metric against the statistics of `cube`.
    pub fn estimate(metric: Metric, cube: &HyperCube) -> Result<Self> {
        match metric {
            Metric::Euclidean => Ok(DistanceKind::Euclidean),
            Metric::Mahalanobis => {
                let (_, cov) = covariance(cube);
                Self::mahalanobis(&cov)
            }
            Metric::MahalanobisDiagonal => {
                let (_, cov) = covariance(cube);
                Self::mahalanobis_diagonal(cov.diagonal().iter().copied().collect())
            }
            Metric::ChiSquared => {
                let mut col = vec![0.0; cube.channels()];
                for px in cube.pixels() {
                    col.iter_mut().zip(px).for_each(|(c, v)| *c += v);
                }
                let total = col.iter().sum();
                Self::chi_squared(col, total)
            }
        }
    }

    fn dims(&self) -> Option<usize> {
        match self {
            DistanceKind::Euclidean => None,
            DistanceKind::Mahalanobis { inverse } => Some(inverse.nrows()),
            DistanceKind::MahalanobisDiagonal { variances } => Some(variances.len()),
            DistanceKind::ChiSquared { col_sums, .. } => Some(col_sums.len()),
        }
    }

    pub(crate) fn check_dims(&self, n: usize) -> Result<()> {
        match self.dims() {
            Some(d) if d != n => Err(Error::DimensionMismatch {
                expected: d,
                actual: n,
            }),
            _ => Ok(()),
        }
    }

    /// Unchecked evaluation; callers validate dimensions and row sums.
    pub(crate) fn eval(&self, u: &[f64], v: &[f64]) -> f64 {
        match self {
            DistanceKind::Euclidean => u
                .iter()
                .zip(v)
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt(),
            DistanceKind::Mahalanobis { inverse } => {
                let n = u.len();
                let mut acc = 0.0;
                for a in 0..n {
                    let da = u[a] - v[a];
                    for b in 0..n {
                        acc += da * inverse[(a, b)] * (u[b] - v[b]);
                    }
                }
                acc.max(0.0).sqrt()
            }
            DistanceKind::MahalanobisDiagonal { variances } => u
                .iter()
                .zip(v)
                .zip(variances)
                .map(|((a, b), s2)| (a - b) * (a - b) / s2)
                .sum::<f64>()
                .sqrt(),
            DistanceKind::ChiSquared { col_sums, total } => {
                let su: f64 = u.iter().sum();
                let sv: f64 = v.iter().sum();
                u.iter()
                    .zip(v)
                    .zip(col_sums)
                    .map(|((a, b), c)| {
                        let d = a / su - b / sv;
                        total / c * d * d
                    })
                    .sum::<f64>()
                    .sqrt()
            }
        }
    }

    pub(crate) fn check_row(&self, index: usize, u: &[f64]) -> Result<()> {
        if matches!(self, DistanceKind::ChiSquared { .. }) && !(u.iter().sum::<f64>() > 0.0) {
            return Err(Error::ZeroRow(index));
        }
        Ok(())
    }
}

/// Distance between two pixel vectors.
pub fn distance(u: &[f64], v: &[f64], kind: &DistanceKind) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::DimensionMismatch {
            expected: u.len(),
            actual: v.len(),
        });
    }
    kind.check_dims(u.len())?;
    kind.check_row(0, u)?;
    kind.check_row(1, v)?;
    Ok(kind.eval(u, v))
}

/// Affine rescale to `[0, 1]`; a constant image becomes all zeros.
pub fn normalize01(img: &ScalarImage) -> ScalarImage {
    let (lo, hi) = img.min_max();
    let range = hi - lo;
    if !(range > 0.0) {
        return img.map(|_| 0.0);
    }
    img.map(|v| ((v - lo) / range).clamp(0.0, 1.0))
}

/// Normalized morphological gradient of one channel.
pub fn gradient_marginal(cube: &HyperCube, channel: usize, se: &StructuringElement) -> Result<ScalarImage> {
    Ok(normalize01(&morph_gradient(&cube.channel(channel)?, se)))
}

fn marginal_gradients(cube: &HyperCube, se: &StructuringElement) -> Vec<ScalarImage> {
    cube.channel_images()
        .par_iter()
        .map(|c| normalize01(&morph_gradient(c, se)))
        .collect()
}

/// Pointwise supremum of the normalized channel gradients.
pub fn gradient_sup(cube: &HyperCube, se: &StructuringElement) -> ScalarImage {
    marginal_gradients(cube, se)
        .into_iter()
        .reduce(|acc, g| acc.zip_with(&g, f64::max).expect("same grid"))
        .expect("cube has at least one channel")
}

/// Normalized weighted sum of the normalized channel gradients.
pub fn gradient_weighted_sum(
    cube: &HyperCube,
    se: &StructuringElement,
    weights: &[f64],
) -> Result<ScalarImage> {
    if weights.len() != cube.channels() {
        return Err(Error::DimensionMismatch {
            expected: cube.channels(),
            actual: weights.len(),
        });
    }
    if weights.iter().any(|&w| !(w >= 0.0)) || !weights.iter().any(|&w| w > 0.0) {
        return Err(Error::InvalidParameter(
            "gradient weights must be >= 0 with at least one positive".into(),
        ));
    }
    let (w, h) = cube.dims();
    let mut acc = vec![0.0; w * h];
    for (g, &wt) in marginal_gradients(cube, se).iter().zip(weights) {
        acc.iter_mut().zip(g.data()).for_each(|(a, v)| *a += wt * v);
    }
    Ok(normalize01(&ScalarImage::new(w, h, acc)?))
}

/// Metric-based gradient: spread `max - min` of the distances from a pixel to
/// its neighbors, normalized.
///
/// The neighborhood excludes the center pixel; including it would pin the
/// minimum to zero and reduce the gradient to a maximum distance.
pub fn gradient_metric(
    cube: &HyperCube,
    se: &StructuringElement,
    kind: &DistanceKind,
) -> Result<ScalarImage> {
    kind.check_dims(cube.channels())?;
    for (i, px) in cube.pixels().enumerate() {
        kind.check_row(i, px)?;
    }
    let (w, h) = cube.dims();
    let data: Vec<f64> = (0..w * h)
        .into_par_iter()
        .map(|i| {
            let center = cube.pixel(i);
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for n in se.neighbors(i % w, i / w, w, h) {
                let d = kind.eval(center, cube.pixel(n));
                lo = lo.min(d);
                hi = hi.max(d);
            }
            if hi.is_finite() {
                hi - lo
            } else {
                0.0
            }
        })
        .collect();
    Ok(normalize01(&ScalarImage::new(w, h, data)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GradientKind {
    Marginal { channel: usize },
    Supremum,
    WeightedSum { weights: Vec<f64> },
    /// Weighted sum with the inertia share of each factor axis as weights;
    /// resolved by the pipeline, which knows the factor model.
    InertiaWeighted,
    Metric { metric: Metric },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GradientSpec {
    pub kind: GradientKind,
    pub se: StructuringElement,
}

impl Default for GradientSpec {
    fn default() -> Self {
        Self {
            kind: GradientKind::Supremum,
            se: StructuringElement::square8(),
        }
    }
}

/// Computes the gradient described by `spec`.
pub fn gradient(cube: &HyperCube, spec: &GradientSpec) -> Result<ScalarImage> {
    match &spec.kind {
        GradientKind::Marginal { channel } => gradient_marginal(cube, *channel, &spec.se),
        GradientKind::Supremum => Ok(gradient_sup(cube, &spec.se)),
        GradientKind::WeightedSum { weights } => gradient_weighted_sum(cube, &spec.se, weights),
        GradientKind::InertiaWeighted => Err(Error::InvalidParameter(
            "inertia weights are only defined on a factor space".into(),
        )),
        GradientKind::Metric { metric } => {
            let kind = DistanceKind::estimate(*metric, cube)?;
            gradient_metric(cube, &spec.se, &kind)
        }
    }
}
