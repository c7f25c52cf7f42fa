use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use serde_json::{json, Value};

use hyperseg::cluster::extract_markers;
use hyperseg::error::Error;
use hyperseg::gradient::gradient;
use hyperseg::image::{HyperCube, LabelImage, ScalarImage};
use hyperseg::morphology::level_cube;
use hyperseg::pipeline::{
    build_space, evaluate, filter_stage, generate, io, resolve_gradient, run_and_write, PipelineConfig,
    Space, SyntheticSpec,
};
use hyperseg::watershed::{boundaries, watershed};

/// Marker-controlled watershed segmentation of hyperspectral cubes.
#[derive(Parser)]
#[command(name = "hyperseg", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the whole pipeline from a JSON config.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// FCA filtering of a raw cube.
    Filter {
        #[command(flatten)]
        stage: StageArgs,
        /// Factor cube (one channel per retained axis).
        #[arg(long)]
        factors: Option<PathBuf>,
        /// Fitted FCA model as JSON.
        #[arg(long)]
        model: Option<PathBuf>,
    },
    /// Builds the configured space from a filtered cube and levels it.
    Reduce {
        #[command(flatten)]
        stage: StageArgs,
        /// Fit the model on this raw cube instead of the input.
        #[arg(long)]
        raw: Option<PathBuf>,
        /// Fitted PCA model as JSON (pca_parameters space only).
        #[arg(long)]
        pca_model: Option<PathBuf>,
    },
    /// Marker extraction on a space cube.
    Markers {
        #[command(flatten)]
        stage: StageArgs,
        #[arg(long)]
        png: Option<PathBuf>,
        /// Stage-1 cluster map as PNG.
        #[arg(long)]
        clusters_png: Option<PathBuf>,
    },
    /// Gradient of a space cube, written as a one-channel cube.
    Gradient {
        #[command(flatten)]
        stage: StageArgs,
        #[arg(long)]
        png: Option<PathBuf>,
    },
    /// Flooding of a gradient from markers.
    Watershed {
        /// One-channel gradient cube with values in [0, 1].
        #[arg(long)]
        gradient: PathBuf,
        #[arg(long)]
        markers: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        png: Option<PathBuf>,
        #[arg(long)]
        boundaries_png: Option<PathBuf>,
        #[arg(long)]
        config: Option<PathBuf>,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Synthetic cube with ground truth.
    Synth {
        /// JSON scene description; the built-in lid scene when absent.
        #[arg(long)]
        spec: Option<PathBuf>,
        #[arg(long, default_value_t = 128)]
        size: usize,
        #[arg(long, default_value_t = 30)]
        channels: usize,
        #[arg(long, default_value_t = 10)]
        transitory_end: usize,
        /// Noise as a fraction of the glue/lid contrast.
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        truth: Option<PathBuf>,
        #[arg(long)]
        truth_png: Option<PathBuf>,
    },
    /// Scores a label image against truth and prints the metrics.
    Eval {
        #[arg(long)]
        labels: PathBuf,
        #[arg(long)]
        truth: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args)]
struct Overrides {
    /// Config override as dotted.path=value; repeatable.
    #[arg(long = "set", value_name = "PATH=VALUE")]
    set: Vec<String>,
}

#[derive(Args)]
struct StageArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    /// Pipeline config supplying the stage parameters; its input is ignored.
    #[arg(long)]
    config: Option<PathBuf>,
    #[command(flatten)]
    overrides: Overrides,
}

impl StageArgs {
    fn config(&self) -> Result<PipelineConfig> {
        stage_config(self.config.as_deref(), &self.input, &self.overrides.set)
    }

    fn read_input(&self) -> Result<HyperCube> {
        read_cube(&self.input)
    }
}

/// A pipeline config whose input is the given HYP1 file.
fn stage_config(path: Option<&Path>, input: &Path, overrides: &[String]) -> Result<PipelineConfig> {
    let mut value: Value = match path {
        Some(p) => {
            let text = fs::read_to_string(p).map_err(|e| {
                Error::InvalidParameter(format!("cannot read config {}: {e}", p.display()))
            })?;
            serde_json::from_str(&text).map_err(Error::from).with_context(|| p.display().to_string())?
        }
        None => json!({}),
    };
    let root = value
        .as_object_mut()
        .ok_or_else(|| Error::InvalidParameter("config must be a JSON object".into()))?;
    root.insert("input".into(), json!({"type": "hyp1", "path": input}));
    Ok(PipelineConfig::from_json_with_overrides(&value.to_string(), overrides)?)
}

fn read_cube(path: &Path) -> Result<HyperCube> {
    io::read_cube(path).with_context(|| format!("reading {}", path.display()))
}

fn read_labels(path: &Path) -> Result<LabelImage> {
    io::read_labels(path).with_context(|| format!("reading {}", path.display()))
}

fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(value).map_err(Error::from)?;
    fs::write(path, bytes).map_err(Error::from)?;
    Ok(())
}

fn single_channel(cube: HyperCube) -> Result<ScalarImage> {
    if cube.channels() != 1 {
        return Err(Error::DimensionMismatch {
            expected: 1,
            actual: cube.channels(),
        }
        .into());
    }
    Ok(cube.channel(0)?)
}

fn execute(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Run { config, overrides } => {
            let config = PipelineConfig::load(&config, &overrides.set)
                .with_context(|| format!("loading {}", config.display()))?;
            let out = run_and_write(&config)?;
            let summary = json!({
                "width": out.labels.width(),
                "height": out.labels.height(),
                "regions": out.labels.distinct_labels().into_iter().filter(|&l| l > 0).count(),
                "seeds": out.markers.seed_count,
                "f1": out.metrics.as_ref().map(|m| m.f1),
                "accuracy": out.metrics.as_ref().map(|m| m.accuracy),
            });
            println!("{summary}");
        }
        Command::Filter { stage, factors, model } => {
            let config = stage.config()?;
            let cube = stage.read_input()?;
            let (fca, fcube, filtered) = filter_stage(&cube, &config.fca)?;
            io::write_cube(&stage.out, &filtered)?;
            if let (Some(p), Some(f)) = (&factors, &fcube) {
                io::write_cube(p, f)?;
            }
            if let (Some(p), Some(m)) = (&model, &fca) {
                write_json(p, m)?;
            }
            if let Some(m) = &fca {
                eprintln!("inertia ratios: {:?}", m.inertia_ratios());
            }
        }
        Command::Reduce { stage, raw, pca_model } => {
            let mut config = stage.config()?;
            if config.space == Space::FcaFactors {
                return Err(Error::InvalidParameter(
                    "fca_factors comes from `filter --factors`, not `reduce`".into(),
                )
                .into());
            }
            let filtered = stage.read_input()?;
            let raw = match &raw {
                Some(p) => {
                    config.model.fit_raw = true;
                    read_cube(p)?
                }
                None => filtered.clone(),
            };
            let (space, pca) = build_space(&config, &raw, &filtered, None)?;
            let space = match &config.leveling {
                Some(spec) => level_cube(&space, spec)?,
                None => space,
            };
            io::write_cube(&stage.out, &space)?;
            if let (Some(p), Some(m)) = (&pca_model, &pca) {
                write_json(p, m)?;
            }
        }
        Command::Markers { stage, png, clusters_png } => {
            let config = stage.config()?;
            let space = stage.read_input()?;
            let markers = extract_markers(&space, &config.markers)?;
            io::write_labels(&stage.out, &markers.labels)?;
            if let Some(p) = &png {
                io::write_label_png(p, &markers.labels)?;
            }
            if let Some(p) = &clusters_png {
                io::write_label_png(p, &markers.stage1)?;
            }
            eprintln!(
                "{} seeds, background label {:?}",
                markers.seed_count, markers.background_label
            );
        }
        Command::Gradient { stage, png } => {
            let config = stage.config()?;
            let space = stage.read_input()?;
            let spec = resolve_gradient(&config.gradient, &space, None, None, config.space)?;
            let g = gradient(&space, &spec)?;
            io::write_scalar(&stage.out, &g)?;
            if let Some(p) = &png {
                io::write_gray(p, &g)?;
            }
        }
        Command::Watershed {
            gradient,
            markers,
            out,
            png,
            boundaries_png,
            config,
            overrides,
        } => {
            let config = stage_config(config.as_deref(), &gradient, &overrides.set)?;
            let g = single_channel(read_cube(&gradient)?)?;
            let m = read_labels(&markers)?;
            let labels = watershed(&g, &m, &config.flood)?;
            io::write_labels(&out, &labels)?;
            if let Some(p) = &png {
                io::write_label_png(p, &labels)?;
            }
            if let Some(p) = &boundaries_png {
                let mask = boundaries(&labels, &config.flood.connectivity);
                io::write_label_png(p, &LabelImage::from_mask(labels.width(), labels.height(), &mask)?)?;
            }
        }
        Command::Synth {
            spec,
            size,
            channels,
            transitory_end,
            noise,
            seed,
            out,
            truth,
            truth_png,
        } => {
            let spec: SyntheticSpec = match &spec {
                Some(p) => {
                    let text = fs::read_to_string(p).map_err(Error::from)?;
                    serde_json::from_str(&text)
                        .map_err(Error::from)
                        .with_context(|| p.display().to_string())?
                }
                None => SyntheticSpec::lid(size, channels, transitory_end, noise, seed),
            };
            let (cube, labels) = generate(&spec)?;
            io::write_cube(&out, &cube)?;
            if let Some(p) = &truth {
                io::write_labels(p, &labels)?;
            }
            if let Some(p) = &truth_png {
                io::write_label_png(p, &labels)?;
            }
        }
        Command::Eval { labels, truth, out } => {
            let metrics = evaluate(&read_labels(&labels)?, &read_labels(&truth)?)?;
            if let Some(p) = &out {
                write_json(p, &metrics)?;
            }
            println!("{}", serde_json::to_string_pretty(&metrics).map_err(Error::from)?);
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match execute(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(err) => {
            // Library errors already render their causes.
            let mut parts = Vec::new();
            for cause in err.chain() {
                parts.push(cause.to_string());
                if cause.is::<Error>() {
                    break;
                }
            }
            eprintln!("error: {}", parts.join(": "));
            let code = err.downcast_ref::<Error>().map_or(1, Error::exit_code);
            ExitCode::from(code as u8)
        }
    }
}
