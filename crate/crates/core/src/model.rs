//! Per-pixel parametric reduction of a temporal series.
//!
//! The leading `transitory_end` channels form the transitory range, summarized
//! by the rise `m = max - min`. A line `y = a x + b` is fitted by ordinary
//! least squares on the remaining channels.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::image::{HyperCube, ScalarImage};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelSpec {
    /// Number of leading transitory channels `T`; the fit covers channels `T..L`.
    pub transitory_end: usize,
    /// Abscissa per channel. Defaults to the 0-based channel index.
    pub x_values: Option<Vec<f64>>,
}

impl Default for ModelSpec {
    fn default() -> Self {
        Self {
            transitory_end: 10,
            x_values: None,
        }
    }
}

impl ModelSpec {
    pub fn new(transitory_end: usize) -> Self {
        Self {
            transitory_end,
            x_values: None,
        }
    }

    fn abscissa(&self, channels: usize) -> Result<Vec<f64>> {
        match &self.x_values {
            Some(x) if x.len() != channels => Err(Error::DimensionMismatch {
                expected: channels,
                actual: x.len(),
            }),
            Some(x) => Ok(x.clone()),
            None => Ok((0..channels).map(|j| j as f64).collect()),
        }
    }

    pub fn validate(&self, channels: usize) -> Result<()> {
        if self.transitory_end + 2 > channels {
            return Err(Error::InvalidParameter(format!(
                "transitory_end {} leaves fewer than 2 of {channels} channels to fit",
                self.transitory_end
            )));
        }
        self.abscissa(channels).map(|_| ())
    }
}

/// Per-pixel least-squares slope and intercept over the fit range.
pub fn fit_linear(cube: &HyperCube, spec: &ModelSpec) -> Result<(ScalarImage, ScalarImage)> {
    spec.validate(cube.channels())?;
    let xs = &spec.abscissa(cube.channels())?[spec.transitory_end..];
    let n = xs.len() as f64;
    let x_mean = xs.iter().sum::<f64>() / n;
    let sxx: f64 = xs.iter().map(|x| (x - x_mean).powi(2)).sum();
    if !(sxx > 0.0) {
        return Err(Error::DegenerateAbscissa);
    }
    let mut slope = Vec::with_capacity(cube.pixel_count());
    let mut intercept = Vec::with_capacity(cube.pixel_count());
    for px in cube.pixels() {
        let ys = &px[spec.transitory_end..];
        let y_mean = ys.iter().sum::<f64>() / n;
        let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - x_mean) * (y - y_mean)).sum();
        let a = sxy / sxx;
        slope.push(a);
        intercept.push(y_mean - a * x_mean);
    }
    let (w, h) = cube.dims();
    Ok((ScalarImage::new(w, h, slope)?, ScalarImage::new(w, h, intercept)?))
}

/// Amplitude `max - min` over the transitory channels.
pub fn rise(cube: &HyperCube, spec: &ModelSpec) -> Result<ScalarImage> {
    let t = spec.transitory_end;
    if t == 0 || t > cube.channels() {
        return Err(Error::InvalidParameter(format!(
            "transitory range 0..{t} is empty or exceeds {} channels",
            cube.channels()
        )));
    }
    let data = cube
        .pixels()
        .map(|px| {
            let (lo, hi) = px[..t]
                .iter()
                .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)));
            hi - lo
        })
        .collect();
    ScalarImage::new(cube.width(), cube.height(), data)
}

/// Parameter cube `p(x)` with channels `a`, `b` and, when `T > 0`, `m`.
pub fn build_parameters(cube: &HyperCube, spec: &ModelSpec) -> Result<HyperCube> {
    let (a, b) = fit_linear(cube, spec)?;
    let mut maps = vec![a, b];
    let mut names = vec!["a".to_string(), "b".to_string()];
    if spec.transitory_end > 0 {
        maps.push(rise(cube, spec)?);
        names.push("m".to_string());
    }
    HyperCube::from_channels(&maps)?.with_channel_labels(names)
}
