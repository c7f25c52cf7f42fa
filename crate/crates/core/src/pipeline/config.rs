use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::cluster::MarkerSpec;
use crate::error::{Error, Result};
use crate::gradient::GradientSpec;
use crate::model::ModelSpec;
use crate::morphology::LevelingSpec;
use crate::watershed::FloodSpec;

use super::synth::SyntheticSpec;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum InputSpec {
    Hyp1 {
        path: PathBuf,
        /// Optional HYP1 label file scored against the result.
        #[serde(default)]
        truth: Option<PathBuf>,
    },
    PngStack {
        dir: PathBuf,
        #[serde(default)]
        truth: Option<PathBuf>,
    },
    Synthetic(SyntheticSpec),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FcaStage {
    pub enabled: bool,
    pub axes: usize,
    /// Added to every value before the fit, so all-zero spectra get a mass.
    /// Zero leaves the data untouched.
    pub offset: f64,
}

impl Default for FcaStage {
    fn default() -> Self {
        Self {
            enabled: true,
            axes: 2,
            offset: 0.0,
        }
    }
}

/// The pixel-vector space that is clustered and flooded.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    FilteredImage,
    FcaFactors,
    Parameters,
    PcaParameters,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct ModelStage {
    #[serde(flatten)]
    pub spec: ModelSpec,
    /// Fit the model on the raw cube instead of the FCA-filtered one.
    pub fit_raw: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct PcaStage {
    /// Axes kept; all when absent.
    pub axes: Option<usize>,
    pub whiten: bool,
}

/// Files written after a run. Every entry is optional.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(default)]
pub struct Outputs {
    pub labels: Option<PathBuf>,
    pub labels_png: Option<PathBuf>,
    pub boundaries_png: Option<PathBuf>,
    pub gradient: Option<PathBuf>,
    pub gradient_png: Option<PathBuf>,
    pub markers: Option<PathBuf>,
    pub markers_png: Option<PathBuf>,
    pub clusters_png: Option<PathBuf>,
    pub filtered: Option<PathBuf>,
    pub factors: Option<PathBuf>,
    /// FCA model as JSON.
    pub fca_model: Option<PathBuf>,
    pub space: Option<PathBuf>,
    /// One grayscale PNG per space channel.
    pub space_png_dir: Option<PathBuf>,
    pub truth: Option<PathBuf>,
    pub metrics: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PipelineConfig {
    pub input: InputSpec,
    #[serde(default)]
    pub fca: FcaStage,
    #[serde(default = "default_space")]
    pub space: Space,
    #[serde(default)]
    pub model: ModelStage,
    #[serde(default)]
    pub pca: PcaStage,
    /// Leveling of every space channel before markers and gradient; `null` disables it.
    #[serde(default = "default_leveling")]
    pub leveling: Option<LevelingSpec>,
    #[serde(default)]
    pub markers: MarkerSpec,
    #[serde(default)]
    pub gradient: GradientSpec,
    #[serde(default)]
    pub flood: FloodSpec,
    #[serde(default)]
    pub outputs: Outputs,
}

fn default_space() -> Space {
    Space::Parameters
}

fn default_leveling() -> Option<LevelingSpec> {
    Some(LevelingSpec::default())
}

impl PipelineConfig {
    pub fn new(input: InputSpec) -> Self {
        Self {
            input,
            fca: FcaStage::default(),
            space: default_space(),
            model: ModelStage::default(),
            pca: PcaStage::default(),
            leveling: default_leveling(),
            markers: MarkerSpec::default(),
            gradient: GradientSpec::default(),
            flood: FloodSpec::default(),
            outputs: Outputs::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Self::from_json_with_overrides(text, &[])
    }

    /// Parses a config after applying `path=value` overrides, where `path`
    /// is dot-separated and `value` is JSON (bare words are taken as strings).
    pub fn from_json_with_overrides(text: &str, overrides: &[String]) -> Result<Self> {
        let mut value: Value = serde_json::from_str(text)?;
        for o in overrides {
            apply_override(&mut value, o)?;
        }
        let config: Self = serde_json::from_value(value)?;
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path, overrides: &[String]) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| {
            Error::InvalidParameter(format!("cannot read config {}: {e}", path.display()))
        })?;
        Self::from_json_with_overrides(&text, overrides)
    }

    /// Checks that need no data: stage parameters and input paths.
    pub fn validate(&self) -> Result<()> {
        if self.fca.enabled && self.fca.axes == 0 && self.space == Space::FcaFactors {
            return Err(Error::InvalidParameter("fca_factors space needs fca.axes >= 1".into()));
        }
        if !self.fca.enabled && self.space == Space::FcaFactors {
            return Err(Error::InvalidParameter("fca_factors space needs fca.enabled".into()));
        }
        if !(self.fca.offset >= 0.0 && self.fca.offset.is_finite()) {
            return Err(Error::InvalidParameter("fca.offset must be finite and >= 0".into()));
        }
        if let Some(l) = &self.leveling {
            l.validate()?;
        }
        self.flood.validate()?;
        let missing = |p: &Path| {
            Error::InvalidParameter(format!("input path {} does not exist", p.display()))
        };
        match &self.input {
            InputSpec::Hyp1 { path, truth } | InputSpec::PngStack { dir: path, truth } => {
                if !path.exists() {
                    return Err(missing(path));
                }
                if let Some(t) = truth.as_deref().filter(|t| !t.exists()) {
                    return Err(missing(t));
                }
            }
            InputSpec::Synthetic(spec) => spec.validate()?,
        }
        Ok(())
    }
}

fn apply_override(root: &mut Value, assignment: &str) -> Result<()> {
    let (path, raw) = assignment
        .split_once('=')
        .ok_or_else(|| Error::InvalidParameter(format!("override {assignment:?} is not path=value")))?;
    let new: Value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
    let mut node = root;
    let keys: Vec<&str> = path.split('.').collect();
    for (i, key) in keys.iter().enumerate() {
        if !node.is_object() {
            *node = Value::Object(Default::default());
        }
        let map = node.as_object_mut().expect("object");
        if i + 1 == keys.len() {
            map.insert((*key).to_string(), new);
            return Ok(());
        }
        node = map.entry(*key).or_insert(Value::Object(Default::default()));
    }
    Err(Error::InvalidParameter(format!("empty override path in {assignment:?}")))
}
