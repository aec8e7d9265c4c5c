//! Command implementations. Each returns a JSON summary and human-readable
//! lines; `main` prints one or the other.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use hyperseg::meanshift::{mean_shift, Points};
use hyperseg::metrics::{undersegmentation_error, MetricsReport};
use hyperseg::noise::{NoiseSpec, PoissonMode};
use hyperseg::npy::{load_cube, load_labels, save_cube, save_labels};
use hyperseg::regionseg::{
    segment, segment_oracle, BandwidthChoice, FeatureSet, KChoice, SegmentationConfig,
    SpatialScaling,
};
use hyperseg::superpixel::{build_augmented_image, slic, SlicParams};
use hyperseg::{normalize, HyperCube, LabelMap};

use crate::args::{
    AutoOr, Command, EvaluateArgs, Features, InputArgs, Mode, NoiseArgs, NoiseKind,
    PoissonModeArg, Scaling, SegmentArgs, SuperpixelArgs,
};
use crate::error::CliError;
use crate::presets::{self, segment_preset, superpixel_preset};
use crate::render::{boundary_overlay, colorize, write_png};

#[derive(Debug, Clone, PartialEq)]
pub struct Outcome {
    pub json: Value,
    pub lines: Vec<String>,
}

pub fn run(command: &Command) -> Result<Outcome, CliError> {
    match command {
        Command::Segment(a) => cmd_segment(a),
        Command::Superpixels(a) => cmd_superpixels(a),
        Command::Noise(a) => cmd_noise(a),
        Command::Evaluate(a) => cmd_evaluate(a),
    }
}

/// Whether the command asked for JSON-only output.
pub fn wants_json(command: &Command) -> bool {
    match command {
        Command::Segment(a) => a.common.json,
        Command::Superpixels(a) => a.common.json,
        Command::Noise(a) => a.common.json,
        Command::Evaluate(a) => a.json,
    }
}

struct Input {
    cube: HyperCube,
    /// Clipping value applied during normalization, if it happened here.
    scale: Option<f64>,
}

fn load_input(args: &InputArgs) -> Result<Input, CliError> {
    let raw = load_cube(&args.input).map_err(CliError::Input)?;
    if args.normalized {
        let (h, w, l) = raw.shape();
        let cube = HyperCube::new_normalized(h, w, l, raw.into_data()).map_err(CliError::Input)?;
        Ok(Input { cube, scale: None })
    } else {
        let cube = normalize(&raw).map_err(CliError::Input)?;
        let scale = cube.scale();
        Ok(Input { cube, scale })
    }
}

fn load_gt(path: &Path, cube: &HyperCube) -> Result<LabelMap, CliError> {
    let gt = load_labels(path).map_err(CliError::Input)?;
    if !gt.matches_cube(cube) {
        return Err(CliError::InputMessage(format!(
            "{} is {}x{} but the cube is {}x{}",
            path.display(),
            gt.height(),
            gt.width(),
            cube.height(),
            cube.width()
        )));
    }
    Ok(gt)
}

fn save_error(path: &Path, err: hyperseg::Error) -> CliError {
    match err {
        hyperseg::Error::Io { source, .. } => CliError::output(path, source),
        other => CliError::Pipeline(other),
    }
}

fn create_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::output(dir, e))
}

fn write_json(path: &Path, value: &Value) -> Result<(), CliError> {
    let text = serde_json::to_string_pretty(value).expect("JSON values serialize");
    fs::write(path, text + "\n").map_err(|e| CliError::output(path, e))
}

fn write_labels(path: &Path, labels: &LabelMap) -> Result<(), CliError> {
    save_labels(path, labels).map_err(|e| save_error(path, e))
}

fn check_fraction(b: f64) -> Result<(), CliError> {
    if (0.0..1.0).contains(&b) {
        Ok(())
    } else {
        Err(CliError::Usage(format!("--b-fraction must lie in [0, 1), got {b}")))
    }
}

fn path_str(p: &Path) -> String {
    p.display().to_string()
}

fn input_json(common: &InputArgs, input: &Input) -> Value {
    json!({
        "path": path_str(&common.input),
        "shape": [input.cube.height(), input.cube.width(), input.cube.bands()],
        "normalized_input": common.normalized,
        "scale": input.scale,
    })
}

fn segmentation_config(args: &SegmentArgs) -> Result<SegmentationConfig, CliError> {
    let preset = args.preset.map(segment_preset);
    let k = match args.k {
        Some(AutoOr::Auto) => KChoice::Auto { alpha: args.alpha },
        Some(AutoOr::Value(k)) => KChoice::Fixed(k),
        None => match preset {
            Some(p) => KChoice::Fixed(p.k),
            None => KChoice::Auto { alpha: args.alpha },
        },
    };
    let seg_bandwidth = match (args.mode, args.bandwidth) {
        (Mode::Oracle, Some(AutoOr::Value(_))) => {
            return Err(CliError::Usage(
                "--bandwidth cannot be fixed in oracle mode; use --ladder".into(),
            ));
        }
        (_, Some(AutoOr::Value(b))) => BandwidthChoice::Fixed(b),
        _ => BandwidthChoice::Auto {
            quantile: args.quantile,
            sample_size: args.bandwidth_sample,
        },
    };
    if args.mode == Mode::Oracle && args.gt.is_none() {
        return Err(CliError::Usage("oracle mode needs --gt".into()));
    }
    if args.ladder.is_some() && args.mode != Mode::Oracle {
        return Err(CliError::Usage("--ladder only applies to --mode oracle".into()));
    }
    check_fraction(args.b_fraction)?;
    Ok(SegmentationConfig {
        k,
        m: args.m.or(preset.map(|p| p.m)).unwrap_or(presets::DEFAULT_M),
        m_clust: args
            .mclust
            .or(preset.map(|p| p.m_clust))
            .unwrap_or(presets::DEFAULT_M_CLUST),
        pre_bandwidth: args
            .pre_bandwidth
            .or(preset.map(|p| p.pre_bandwidth))
            .unwrap_or(presets::DEFAULT_PRE_BANDWIDTH),
        seg_bandwidth,
        small_region_threshold: args.min_region,
        seed: args.common.seed,
        use_pca: args.pca,
        variance_threshold: args.variance,
        features: match args.features {
            Features::Combined => FeatureSet::SpectralSuperpixel,
            Features::Spectral => FeatureSet::Spectral,
        },
        spatial_scaling: match args.spatial_scaling {
            Scaling::MaxDimension => SpatialScaling::MaxDimension,
            Scaling::Pixels => SpatialScaling::Pixels,
        },
    })
}

fn metrics_json(report: &MetricsReport, b_fraction: f64) -> Value {
    let mut v = serde_json::to_value(report).expect("report serializes");
    if report.ue.is_some() {
        v["b_fraction"] = json!(b_fraction);
    }
    v
}

fn metrics_lines(report: &MetricsReport) -> Vec<String> {
    let mut line = format!(
        "nmi {:.4}  ari {:.4}  precision {:.4}  recall {:.4}  f1 {:.4}  ({} clusters, {} classes)",
        report.nmi,
        report.ari,
        report.precision,
        report.recall,
        report.f1,
        report.n_clusters,
        report.n_classes
    );
    if let Some(ue) = report.ue {
        let _ = write!(line, "  ue {ue:.4}");
    }
    vec![line]
}

pub fn cmd_segment(args: &SegmentArgs) -> Result<Outcome, CliError> {
    let config = segmentation_config(args)?;
    let input = load_input(&args.common)?;
    let gt = args.gt.as_deref().map(|p| load_gt(p, &input.cube)).transpose()?;
    config
        .validate(input.cube.pixels())
        .map_err(CliError::pipeline)?;
    create_dir(&args.out)?;

    let mut lines = Vec::new();
    let (seg, oracle) = match (args.mode, &gt) {
        (Mode::Oracle, Some(gt)) => {
            let (seg, points) = segment_oracle(&input.cube, &config, gt, args.ladder.as_deref())
                .map_err(CliError::pipeline)?;
            for p in &points {
                let msg = format!(
                    "oracle bandwidth {:.6}: nmi {:.4} ({} labels)",
                    p.bandwidth, p.nmi, p.n_labels
                );
                if args.common.json {
                    eprintln!("{msg}");
                } else {
                    lines.push(msg);
                }
            }
            (seg, Some(points))
        }
        _ => (
            segment(&input.cube, &config).map_err(CliError::pipeline)?,
            None,
        ),
    };

    let labels_path = args.out.join("labels.npy");
    write_labels(&labels_path, &seg.labels)?;
    write_png(
        &args.out.join("labels.png"),
        seg.labels.width(),
        seg.labels.height(),
        &colorize(&seg.labels),
    )?;
    let sp_map = seg.superpixels.as_ref().map(|sp| sp.label_map());
    if let Some(map) = &sp_map {
        write_labels(&args.out.join("superpixels.npy"), map)?;
    }

    let metrics = match &gt {
        Some(gt) => {
            let report = MetricsReport::evaluate(
                &seg.labels,
                gt,
                sp_map.as_ref().map(|m| (m, args.b_fraction)),
            )
            .map_err(CliError::Input)?;
            let v = metrics_json(&report, args.b_fraction);
            write_json(&args.out.join("metrics.json"), &v)?;
            lines.extend(metrics_lines(&report));
            Some(v)
        }
        None => None,
    };

    let run = json!({
        "command": "segment",
        "version": env!("CARGO_PKG_VERSION"),
        "input": input_json(&args.common, &input),
        "gt": args.gt.as_deref().map(path_str),
        "preset": args.preset.map(|p| p.name()),
        "mode": match args.mode { Mode::Auto => "auto", Mode::Oracle => "oracle" },
        "config": config,
        "resolved": seg.resolved,
        "oracle": oracle,
    });
    write_json(&args.out.join("run.json"), &run)?;

    lines.insert(
        0,
        format!(
            "{} regions (K = {}, bandwidth {:.6}) written to {}",
            seg.resolved.n_labels,
            seg.resolved.k,
            seg.resolved.seg_bandwidth,
            args.out.display()
        ),
    );
    Ok(Outcome {
        json: json!({ "run": run, "metrics": metrics }),
        lines,
    })
}

pub fn cmd_superpixels(args: &SuperpixelArgs) -> Result<Outcome, CliError> {
    let preset = match args.preset {
        Some(p) => Some(superpixel_preset(p).ok_or_else(|| {
            CliError::Usage(format!("no superpixel preset for {}", p.name()))
        })?),
        None => None,
    };
    let k = args
        .k
        .or(preset.map(|p| p.k))
        .ok_or_else(|| CliError::Usage("--k or --preset is required".into()))?;
    let m = args.m.or(preset.map(|p| p.m)).unwrap_or(presets::DEFAULT_SUPERPIXEL_M);
    let m_clust = args
        .mclust
        .or(preset.map(|p| p.m_clust))
        .unwrap_or(presets::DEFAULT_M_CLUST);
    let pre_bandwidth = args
        .pre_bandwidth
        .or(preset.map(|p| p.pre_bandwidth))
        .unwrap_or(presets::DEFAULT_PRE_BANDWIDTH);
    check_fraction(args.b_fraction)?;

    let input = load_input(&args.common)?;
    let gt = args.gt.as_deref().map(|p| load_gt(p, &input.cube)).transpose()?;
    let cube = &input.cube;
    let params = SlicParams::new(k, m, m_clust);
    if !(pre_bandwidth > 0.0) {
        return Err(CliError::Usage(format!(
            "--pre-bandwidth must be positive, got {pre_bandwidth}"
        )));
    }
    create_dir(&args.out)?;

    let points = Points::new(
        cube.data().iter().map(|&v| f64::from(v)).collect(),
        cube.bands(),
    )
    .map_err(CliError::pipeline)?;
    let pre = mean_shift(&points, pre_bandwidth, args.common.seed).map_err(CliError::pipeline)?;
    let aug = build_augmented_image(cube, &pre).map_err(CliError::pipeline)?;
    let sp = slic(&aug, params).map_err(CliError::pipeline)?;
    let map = sp.label_map();
    write_labels(&args.out.join("superpixels.npy"), &map)?;
    write_png(
        &args.out.join("superpixels.png"),
        cube.width(),
        cube.height(),
        &boundary_overlay(cube, &map),
    )?;

    let mut lines = vec![format!(
        "{} superpixels (K = {k}, m = {m}, m_clust = {m_clust}, {} pre-clusters) written to {}",
        sp.len(),
        pre.n_clusters(),
        args.out.display()
    )];
    let mut ue = None;
    let mut sweep = None;
    if let Some(gt) = &gt {
        let value = undersegmentation_error(&map, gt, args.b_fraction).map_err(CliError::Input)?;
        write_json(
            &args.out.join("metrics.json"),
            &json!({ "ue": value, "b_fraction": args.b_fraction, "n_superpixels": sp.len() }),
        )?;
        lines.push(format!("ue {value:.4} (b_fraction {})", args.b_fraction));
        ue = Some(value);

        if args.sweep {
            let mut csv = String::from("m");
            for mc in presets::SWEEP_M_CLUST {
                let _ = write!(csv, ",m_clust={mc:.1}");
            }
            csv.push('\n');
            let mut table = Vec::new();
            for m in presets::SWEEP_M {
                let _ = write!(csv, "{m:.1}");
                let mut row = Vec::new();
                for mc in presets::SWEEP_M_CLUST {
                    let set = slic(&aug, SlicParams::new(k, m, mc)).map_err(CliError::pipeline)?;
                    let v = undersegmentation_error(&set.label_map(), gt, args.b_fraction)
                        .map_err(CliError::Input)?;
                    let _ = write!(csv, ",{v:.4}");
                    row.push(v);
                }
                csv.push('\n');
                table.push(row);
            }
            let path = args.out.join("ue_sweep.csv");
            fs::write(&path, &csv).map_err(|e| CliError::output(&path, e))?;
            lines.push(format!("sweep written to {}", path.display()));
            sweep = Some(json!({
                "m": presets::SWEEP_M,
                "m_clust": presets::SWEEP_M_CLUST,
                "ue": table,
            }));
        }
    }

    let run = json!({
        "command": "superpixels",
        "version": env!("CARGO_PKG_VERSION"),
        "input": input_json(&args.common, &input),
        "gt": args.gt.as_deref().map(path_str),
        "preset": args.preset.map(|p| p.name()),
        "seed": args.common.seed,
        "pre_bandwidth": pre_bandwidth,
        "slic": params,
        "resolved": {
            "pre_clusters": pre.n_clusters(),
            "superpixels": sp.len(),
            "interval": sp.interval(),
        },
    });
    write_json(&args.out.join("run.json"), &run)?;
    Ok(Outcome {
        json: json!({ "run": run, "ue": ue, "sweep": sweep }),
        lines,
    })
}

pub fn cmd_noise(args: &NoiseArgs) -> Result<Outcome, CliError> {
    let seed = args.common.seed;
    let spec = match args.kind {
        NoiseKind::Gaussian => NoiseSpec::Gaussian {
            sigma: args.sigma,
            pixel_fraction: args.fraction,
            seed,
        },
        NoiseKind::Impulsive => NoiseSpec::Impulsive {
            density: args.density,
            seed,
        },
        NoiseKind::Poisson => NoiseSpec::Poisson {
            lambda: args.lambda,
            mode: match args.poisson_mode {
                PoissonModeArg::Scaled => PoissonMode::Scaled,
                PoissonModeArg::Additive => PoissonMode::Additive,
            },
            seed,
        },
    };
    let input = load_input(&args.common)?;
    let noisy = spec.apply(&input.cube).map_err(CliError::pipeline)?;
    if let Some(dir) = args.out.parent().filter(|d| !d.as_os_str().is_empty()) {
        create_dir(dir)?;
    }
    save_cube(&args.out, &noisy).map_err(|e| save_error(&args.out, e))?;
    let provenance_path: PathBuf = args.out.with_extension("json");
    let provenance = json!({
        "command": "noise",
        "version": env!("CARGO_PKG_VERSION"),
        "input": input_json(&args.common, &input),
        "output": path_str(&args.out),
        "output_normalized": true,
        "noise": spec,
    });
    write_json(&provenance_path, &provenance)?;
    Ok(Outcome {
        lines: vec![format!(
            "noisy cube written to {} (normalized; pass --normalized when reading it back)",
            args.out.display()
        )],
        json: provenance,
    })
}

pub fn cmd_evaluate(args: &EvaluateArgs) -> Result<Outcome, CliError> {
    check_fraction(args.b_fraction)?;
    let pred = load_labels(&args.pred).map_err(CliError::Input)?;
    let gt = load_labels(&args.gt).map_err(CliError::Input)?;
    if !pred.same_shape(&gt) {
        return Err(CliError::InputMessage(format!(
            "prediction is {}x{} but ground truth is {}x{}",
            pred.height(),
            pred.width(),
            gt.height(),
            gt.width()
        )));
    }
    let report = MetricsReport::evaluate(&pred, &gt, args.ue.then_some((&pred, args.b_fraction)))
        .map_err(CliError::Input)?;
    let v = metrics_json(&report, args.b_fraction);
    if let Some(out) = &args.out {
        write_json(out, &v)?;
    }
    Ok(Outcome {
        json: v,
        lines: metrics_lines(&report),
    })
}
