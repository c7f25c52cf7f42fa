//! Marker-controlled watershed segmentation of hyperspectral image cubes.
//!
//! The crate is organized by stage:
//!
//! - [`image`]: cube, scalar and label rasters, structuring elements, connected components
//! - [`morphology`]: erosion, dilation, gradients, gaussian prefilter and levelings
//! - [`factor`]: correspondence analysis (denoising, reduction) and PCA
//! - [`model`]: per-pixel linear fit and rise maps
//! - [`gradient`]: vector distances and multivariate gradients normalized to `[0, 1]`
//! - [`cluster`]: PAM / CLARA k-medoids and marker extraction
//! - [`watershed`]: hierarchical-queue flooding from markers
//! - [`pipeline`]: configuration, file formats, synthetic data and metrics

// `!(x > 0.0)` also rejects NaN, which is the point wherever it appears.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod cluster;
pub mod error;
pub mod factor;
pub mod gradient;
pub mod image;
pub mod model;
pub mod morphology;
pub mod pipeline;
pub mod watershed;

pub use error::{Error, ErrorClass, Result};
pub use image::{connected_components, HyperCube, LabelImage, ScalarImage, StructuringElement};
