//! Configuration-driven runs over the four segmentation spaces.
//!
//! A run chains: FCA filtering, space construction, channel leveling,
//! marker extraction, gradient and flooding. Errors carry the stage name.

pub mod config;
pub mod io;
pub mod metrics;
pub mod synth;

use std::fs;
use std::path::{Path, PathBuf};

use crate::cluster::{extract_markers, Markers};
use crate::error::{Error, Result, StageExt};
use crate::factor::{fca_filter, pca_fit, pca_project, FcaModel, PcaModel};
use crate::gradient::{gradient, GradientKind, GradientSpec, Metric};
use crate::image::{HyperCube, LabelImage, ScalarImage};
use crate::model::build_parameters;
use crate::morphology::level_cube;
use crate::watershed::{boundaries, watershed, FloodSpec};

pub use config::{FcaStage, InputSpec, ModelStage, Outputs, PcaStage, PipelineConfig, Space};
pub use metrics::{evaluate, Metrics};
pub use synth::{generate, SyntheticSpec};

/// Everything a run produces.
#[derive(Debug, Clone)]
pub struct PipelineOutput {
    pub labels: LabelImage,
    pub gradient: ScalarImage,
    pub markers: Markers,
    /// Space after leveling, as clustered and flooded.
    pub space: HyperCube,
    pub filtered: HyperCube,
    pub factors: Option<HyperCube>,
    pub fca: Option<FcaModel>,
    pub pca: Option<PcaModel>,
    pub truth: Option<LabelImage>,
    pub metrics: Option<Metrics>,
}

/// Reads or generates the input cube, with truth labels when available.
pub fn load_input(input: &InputSpec) -> Result<(HyperCube, Option<LabelImage>)> {
    let truth = |t: &Option<PathBuf>| t.as_deref().map(io::read_labels).transpose();
    match input {
        InputSpec::Hyp1 { path, truth: t } => Ok((io::read_cube(path)?, truth(t)?)),
        InputSpec::PngStack { dir, truth: t } => Ok((io::read_png_stack(dir)?, truth(t)?)),
        InputSpec::Synthetic(spec) => {
            let (cube, labels) = generate(spec)?;
            Ok((cube, Some(labels)))
        }
    }
}

/// Factor model, factor cube and filtered cube; the cube is passed through
/// when FCA is disabled.
pub fn filter_stage(
    cube: &HyperCube,
    fca: &FcaStage,
) -> Result<(Option<FcaModel>, Option<HyperCube>, HyperCube)> {
    if !fca.enabled {
        return Ok((None, None, cube.clone()));
    }
    let (model, factors, filtered) = if fca.offset > 0.0 {
        fca_filter(&cube.map_values(|v| v + fca.offset), fca.axes)?
    } else {
        fca_filter(cube, fca.axes)?
    };
    Ok((Some(model), factors, filtered))
}

/// Builds the requested space from the raw and filtered cubes.
pub fn build_space(
    config: &PipelineConfig,
    raw: &HyperCube,
    filtered: &HyperCube,
    factors: Option<&HyperCube>,
) -> Result<(HyperCube, Option<PcaModel>)> {
    match config.space {
        Space::FilteredImage => Ok((filtered.clone(), None)),
        Space::FcaFactors => factors
            .cloned()
            .map(|f| (f, None))
            .ok_or_else(|| Error::InvalidParameter("fca_factors space needs FCA axes".into())),
        Space::Parameters | Space::PcaParameters => {
            let source = if config.model.fit_raw { raw } else { filtered };
            let params = build_parameters(source, &config.model.spec)?;
            if config.space == Space::Parameters {
                return Ok((params, None));
            }
            let model = pca_fit(&params)?;
            let axes = config.pca.axes.unwrap_or(model.dims());
            let scores = pca_project(&model, &params, axes, config.pca.whiten)?;
            Ok((scores, Some(model)))
        }
    }
}

/// Replaces `InertiaWeighted` with explicit weights and checks the metric
/// against the space.
pub fn resolve_gradient(
    spec: &GradientSpec,
    space: &HyperCube,
    fca: Option<&FcaModel>,
    pca: Option<&PcaModel>,
    space_kind: Space,
) -> Result<GradientSpec> {
    let mut spec = spec.clone();
    match &spec.kind {
        GradientKind::InertiaWeighted => {
            let ratios = match space_kind {
                Space::FcaFactors => fca.map(FcaModel::inertia_ratios),
                Space::PcaParameters => pca.map(PcaModel::inertia_ratios),
                _ => None,
            }
            .ok_or_else(|| {
                Error::InvalidParameter("inertia weights need the fca_factors or pca_parameters space".into())
            })?;
            spec.kind = GradientKind::WeightedSum {
                weights: ratios.into_iter().take(space.channels()).collect(),
            };
        }
        GradientKind::Metric {
            metric: Metric::ChiSquared,
        } => {
            if space.data().iter().any(|&v| v < 0.0) {
                return Err(Error::InvalidParameter(
                    "chi-squared gradient needs a nonnegative space".into(),
                ));
            }
        }
        GradientKind::Metric {
            metric: Metric::Mahalanobis | Metric::MahalanobisDiagonal,
        } if space.channels() < 2 => {
            return Err(Error::InvalidParameter(
                "Mahalanobis gradient needs at least 2 channels".into(),
            ));
        }
        _ => {}
    }
    Ok(spec)
}

/// Runs every stage without writing anything.
pub fn run(config: &PipelineConfig) -> Result<PipelineOutput> {
    config.validate().stage("config")?;
    let (raw, truth) = load_input(&config.input).stage("input")?;
    let (fca, factors, filtered) = filter_stage(&raw, &config.fca).stage("fca")?;
    let (space, pca) = build_space(config, &raw, &filtered, factors.as_ref()).stage("space")?;
    let space = match &config.leveling {
        Some(spec) => level_cube(&space, spec).stage("leveling")?,
        None => space,
    };
    let markers = extract_markers(&space, &config.markers).stage("markers")?;
    let gspec = resolve_gradient(&config.gradient, &space, fca.as_ref(), pca.as_ref(), config.space)
        .stage("gradient")?;
    let grad = gradient(&space, &gspec).stage("gradient")?;
    let labels = watershed(&grad, &markers.labels, &config.flood).stage("watershed")?;
    let metrics = truth.as_ref().map(|t| evaluate(&labels, t)).transpose().stage("metrics")?;
    Ok(PipelineOutput {
        labels,
        gradient: grad,
        markers,
        space,
        filtered,
        factors,
        fca,
        pca,
        truth,
        metrics,
    })
}

/// Writes the outputs requested in `outputs`.
pub fn write_outputs(out: &PipelineOutput, outputs: &Outputs, flood: &FloodSpec) -> Result<()> {
    let (w, h) = out.labels.dims();
    if let Some(p) = target(&outputs.labels)? {
        io::write_labels(p, &out.labels)?;
    }
    if let Some(p) = target(&outputs.labels_png)? {
        io::write_label_png(p, &out.labels)?;
    }
    if let Some(p) = target(&outputs.boundaries_png)? {
        let mask = boundaries(&out.labels, &flood.connectivity);
        io::write_label_png(p, &LabelImage::from_mask(w, h, &mask)?)?;
    }
    if let Some(p) = target(&outputs.gradient)? {
        io::write_scalar(p, &out.gradient)?;
    }
    if let Some(p) = target(&outputs.gradient_png)? {
        io::write_gray(p, &out.gradient)?;
    }
    if let Some(p) = target(&outputs.markers)? {
        io::write_labels(p, &out.markers.labels)?;
    }
    if let Some(p) = target(&outputs.markers_png)? {
        io::write_label_png(p, &out.markers.labels)?;
    }
    if let Some(p) = target(&outputs.clusters_png)? {
        io::write_label_png(p, &out.markers.stage1)?;
    }
    if let Some(p) = target(&outputs.filtered)? {
        io::write_cube(p, &out.filtered)?;
    }
    if let (Some(p), Some(f)) = (target(&outputs.factors)?, &out.factors) {
        io::write_cube(p, f)?;
    }
    if let (Some(p), Some(m)) = (target(&outputs.fca_model)?, &out.fca) {
        fs::write(p, serde_json::to_vec_pretty(m)?)?;
    }
    if let Some(p) = target(&outputs.space)? {
        io::write_cube(p, &out.space)?;
    }
    if let Some(dir) = &outputs.space_png_dir {
        fs::create_dir_all(dir)?;
        for (j, channel) in out.space.channel_images().iter().enumerate() {
            let name = out
                .space
                .channel_labels()
                .map_or_else(|| format!("c{j}"), |l| l[j].clone());
            io::write_gray(&dir.join(format!("{j:02}_{name}.png")), channel)?;
        }
    }
    if let (Some(p), Some(t)) = (target(&outputs.truth)?, &out.truth) {
        io::write_labels(p, t)?;
    }
    if let (Some(p), Some(m)) = (target(&outputs.metrics)?, &out.metrics) {
        fs::write(p, serde_json::to_vec_pretty(m)?)?;
    }
    Ok(())
}

/// The requested path, with its parent directory created.
fn target(path: &Option<PathBuf>) -> Result<Option<&Path>> {
    let Some(path) = path.as_deref() else {
        return Ok(None);
    };
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent)?;
    }
    Ok(Some(path))
}

/// Runs the pipeline and writes its outputs.
pub fn run_and_write(config: &PipelineConfig) -> Result<PipelineOutput> {
    let out = run(config)?;
    write_outputs(&out, &config.outputs, &config.flood).stage("output")?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cluster::{ClusterSelect, ClusteringSpec, StageSpec};
    use crate::image::StructuringElement;
    use synth::{Material, Region, Shape};

    fn small_scene() -> SyntheticSpec {
        SyntheticSpec {
            width: 32,
            height: 32,
            channels: 16,
            transitory_end: 6,
            background: Material {
                slope: -0.5,
                intercept: 40.0,
                rise: 4.0,
            },
            background_label: 1,
            regions: vec![Region {
                shape: Shape::Disk {
                    cx: 16.0,
                    cy: 15.0,
                    r: 6.0,
                },
                material: Material {
                    slope: -0.2,
                    intercept: 35.0,
                    rise: 12.0,
                },
                label: 2,
            }],
            noise_sigma: 0.05,
            seed: 3,
        }
    }

    fn small_config(space: Space) -> PipelineConfig {
        let mut c = PipelineConfig::new(InputSpec::Synthetic(small_scene()));
        c.space = space;
        c.model.spec.transitory_end = 6;
        c.markers.stage1 = StageSpec::new(ClusteringSpec::with_k(2), ClusterSelect::Smallest);
        c.markers.opening_radius = 1;
        c
    }

    #[test]
    fn every_space_segments_the_disk() {
        for (space, kind) in [
            (Space::FilteredImage, GradientKind::Metric { metric: Metric::ChiSquared }),
            (Space::FcaFactors, GradientKind::Metric { metric: Metric::Euclidean }),
            (Space::Parameters, GradientKind::Metric { metric: Metric::MahalanobisDiagonal }),
            (Space::PcaParameters, GradientKind::InertiaWeighted),
        ] {
            let mut c = small_config(space);
            c.gradient.kind = kind;
            let out = run(&c).unwrap();
            let f1 = out.metrics.unwrap().f1;
            assert!(f1 > 0.9, "{space:?}: {f1}");
        }
    }

    #[test]
    fn stage_errors_name_the_stage() {
        let mut c = small_config(Space::Parameters);
        c.model.spec.transitory_end = 15;
        let err = run(&c).unwrap_err();
        assert!(err.to_string().starts_with("space:"), "{err}");
        assert_eq!(err.exit_code(), 2);

        let mut c = small_config(Space::PcaParameters);
        c.gradient.kind = GradientKind::Metric { metric: Metric::ChiSquared };
        assert!(run(&c).unwrap_err().to_string().starts_with("gradient:"));

        let mut c = small_config(Space::Parameters);
        c.markers.opening_radius = 20;
        let err = run(&c).unwrap_err();
        assert!(err.to_string().starts_with("markers:"));
        assert_eq!(err.exit_code(), 3);
    }

    #[test]
    fn outputs_are_written_and_deterministic() {
        let dir = tempfile::tempdir().unwrap();
        let mut c = small_config(Space::Parameters);
        c.flood.connectivity = StructuringElement::cross4();
        let path = |n: &str| Some(dir.path().join(n));
        c.outputs = Outputs {
            labels: path("out/labels.hyp1"),
            labels_png: path("out/labels.png"),
            boundaries_png: path("out/bounds.png"),
            gradient: path("out/gradient.hyp1"),
            gradient_png: path("out/gradient.png"),
            markers: path("out/markers.hyp1"),
            markers_png: path("out/markers.png"),
            clusters_png: path("out/clusters.png"),
            filtered: path("out/filtered.hyp1"),
            factors: path("out/factors.hyp1"),
            fca_model: path("out/fca.json"),
            space: path("out/space.hyp1"),
            space_png_dir: path("out/space"),
            truth: path("out/truth.hyp1"),
            metrics: path("out/metrics.json"),
        };
        let out = run_and_write(&c).unwrap();
        let labels = io::read_labels(&dir.path().join("out/labels.hyp1")).unwrap();
        assert_eq!(labels, out.labels);
        let first = fs::read(dir.path().join("out/labels.hyp1")).unwrap();
        run_and_write(&c).unwrap();
        assert_eq!(fs::read(dir.path().join("out/labels.hyp1")).unwrap(), first);
        assert_eq!(fs::read_dir(dir.path().join("out/space")).unwrap().count(), 3);
        let metrics: serde_json::Value =
            serde_json::from_slice(&fs::read(dir.path().join("out/metrics.json")).unwrap()).unwrap();
        assert!(metrics["f1"].as_f64().unwrap() > 0.9);
        let model: FcaModel =
            serde_json::from_slice(&fs::read(dir.path().join("out/fca.json")).unwrap()).unwrap();
        assert_eq!(Some(model), out.fca);
        assert_eq!(io::read_cube(&dir.path().join("out/factors.hyp1")).unwrap().channels(), 2);
    }

    #[test]
    fn offset_admits_zero_spectra() {
        let mut spec = small_scene();
        spec.noise_sigma = 0.0;
        let (cube, _) = generate(&spec).unwrap();
        let mut data = cube.data().to_vec();
        data[..cube.channels()].fill(0.0);
        let cube = HyperCube::new(cube.width(), cube.height(), cube.channels(), data).unwrap();
        let mut fca = FcaStage::default();
        assert!(filter_stage(&cube, &fca).is_err());
        fca.offset = 1.0;
        let (_, _, filtered) = filter_stage(&cube, &fca).unwrap();
        assert!(filtered.pixel(0).iter().all(|v| v.is_finite()));
    }
}
