use std::collections::BTreeMap;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use elgauss_core::align::{apply_shifts, optimal_shifts, threshold_align, to_grayscale};
use elgauss_core::dataset::{
    generate_crops, import_via, load_annotation_dir, load_annotations, save_annotation, split_with_ratios,
    write_crops,
};
use elgauss_core::fit::{fit_ellipse, StopReason};
use elgauss_core::iou::{aggregate, iou_grid, iou_oracle, match_and_score, MeanIoU};
use elgauss_core::raster::{image_dimensions, load_rgb, save_png, write_atomic};
use elgauss_core::{
    AlignConfig, AnnotatedImage, CropPolicy, Ellipse, Error, FitConfig, FitMetric, IoUResult, MatchReport, NormOrder,
    Result, ShiftProfile,
};

use crate::args::*;
use crate::render::{render_overlay, OverlayGroup, OverlaySpec, BASELINE, GROUND_TRUTH, PREDICTION};

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::Align(a) => align(a),
        Command::Dataset(DatasetCommand::Crop(a)) => crop(a, cli.seed),
        Command::Dataset(DatasetCommand::Split(a)) => split(a, cli.seed),
        Command::Dataset(DatasetCommand::ImportVia(a)) => import(a),
        Command::Iou(a) => iou(a),
        Command::Eval(a) => eval(a),
        Command::Fit(a) => fit(a),
        Command::Render(a) => render(a),
    }
}

fn write_json<T: Serialize>(value: &T, path: &Path) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| Error::json(path, e))?;
    text.push('\n');
    write_atomic(path, text.as_bytes())
}

fn print_json<T: Serialize>(value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value).map_err(|e| Error::json("<stdout>", e))?;
    println!("{text}");
    Ok(())
}

fn create_dir(dir: &Path) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.to_path_buf(),
        source,
    })
}

/// Annotations from a single file or every `*.json` in a directory, each
/// paired with the directory its image paths are relative to.
pub fn collect_annotations(path: &Path) -> Result<Vec<(PathBuf, AnnotatedImage)>> {
    if path.is_dir() {
        return load_annotation_dir(path);
    }
    let base = path.parent().unwrap_or(Path::new(".")).to_path_buf();
    Ok(load_annotations(path)?.into_iter().map(|a| (base.clone(), a)).collect())
}

// align

fn align(a: &AlignArgs) -> Result<()> {
    let cfg = AlignConfig {
        n: a.n,
        p: a.p,
        k: NormOrder::from_order(a.k)?,
        max_shift: a.max_shift,
        pad_value: a.pad,
        overlap_only: a.overlap_only,
    };
    cfg.validate()?;
    if !a.input.is_dir() {
        return align_one(a, &cfg, &a.input, &a.output, a.emit_shifts.as_deref());
    }

    let mut inputs: Vec<PathBuf> = std::fs::read_dir(&a.input)
        .map_err(|source| Error::Io {
            path: a.input.clone(),
            source,
        })?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x.eq_ignore_ascii_case("png")))
        .collect();
    inputs.sort();
    create_dir(&a.output)?;
    if let Some(dir) = &a.emit_shifts {
        create_dir(dir)?;
    }
    inputs.par_iter().try_for_each(|input| {
        let name = input.file_name().expect("listed files have names");
        let shifts = a.emit_shifts.as_ref().map(|d| d.join(Path::new(name).with_extension("json")));
        align_one(a, &cfg, input, &a.output.join(name), shifts.as_deref())
    })
}

fn align_one(a: &AlignArgs, cfg: &AlignConfig, input: &Path, output: &Path, shifts_out: Option<&Path>) -> Result<()> {
    let img = load_rgb(input)?;
    let gray = to_grayscale(&img);
    let profile = match a.method {
        AlignMethod::Eq1 => optimal_shifts(&gray, cfg)?,
        AlignMethod::Threshold => threshold_align(&gray, a.threshold)?,
    };
    let out = apply_shifts(&img, &profile, [a.pad; 3])?;
    save_png(&out, output)?;
    if let Some(path) = shifts_out {
        write_json(&profile, path)?;
    }
    let largest = profile.shifts.iter().map(|s| s.abs()).max().unwrap_or(0);
    log::info!("{}: aligned {} columns, largest shift {largest}", input.display(), profile.shifts.len());
    Ok(())
}

pub fn read_shift_profile(path: &Path) -> Result<ShiftProfile> {
    let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })?;
    serde_json::from_str(&text).map_err(|e| Error::json(path, e))
}

// dataset

fn crop(a: &CropArgs, seed: u64) -> Result<()> {
    let policy = CropPolicy {
        out_size: a.out_size,
        min_side: a.min_side,
        max_side: a.max_side,
    };
    let images = load_annotation_dir(&a.input)?;
    create_dir(&a.out)?;
    let written: Vec<usize> = images
        .par_iter()
        .map(|(base, img)| {
            let crops = generate_crops(img, a.count_per_image, seed, &policy)?;
            let files = write_crops(base, img, &crops, &a.out)?;
            log::info!("{}: {} crops", img.image_path, files.len());
            Ok(files.len())
        })
        .collect::<Result<_>>()?;
    println!(
        "wrote {} crops from {} images to {}",
        written.iter().sum::<usize>(),
        images.len(),
        a.out.display()
    );
    Ok(())
}

fn split(a: &SplitArgs, seed: u64) -> Result<()> {
    let boards: Vec<String> = match &a.input {
        Some(path) => collect_annotations(path)?
            .into_iter()
            .map(|(_, img)| img.board_id)
            .collect(),
        None => std::io::stdin()
            .lock()
            .lines()
            .map(|l| {
                l.map_err(|source| Error::Io {
                    path: "<stdin>".into(),
                    source,
                })
            })
            .collect::<Result<Vec<_>>>()?
            .into_iter()
            .map(|l| l.trim().to_string())
            .filter(|l| !l.is_empty())
            .collect(),
    };
    let ratios: [f64; 3] = a
        .ratios
        .as_slice()
        .try_into()
        .map_err(|_| Error::InvalidInput("--ratios takes exactly three values".into()))?;
    let s = split_with_ratios(&boards, ratios, seed)?;
    log::info!("split {} boards into {}/{}/{}", s.train.len() + s.val.len() + s.test.len(), s.train.len(), s.val.len(), s.test.len());
    match &a.out {
        Some(path) => write_json(&s, path),
        None => print_json(&s),
    }
}

fn import(a: &ImportViaArgs) -> Result<()> {
    let text = std::fs::read_to_string(&a.via).map_err(|source| Error::Io {
        path: a.via.clone(),
        source,
    })?;
    let images = import_via(&text, &a.via, |name| image_dimensions(&a.images.join(name)).ok())?;
    create_dir(&a.out)?;
    let same_dir = match (a.images.canonicalize(), a.out.canonicalize()) {
        (Ok(x), Ok(y)) => x == y,
        _ => false,
    };
    for mut img in images {
        let stem = Path::new(&img.image_path)
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| img.board_id.clone());
        if !same_dir {
            let full = a.images.join(&img.image_path);
            let full = full.canonicalize().unwrap_or(full);
            img.image_path = full.to_string_lossy().into_owned();
        }
        save_annotation(&img, &a.out.join(format!("{stem}.json")))?;
    }
    Ok(())
}

// iou

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IouOutput {
    #[serde(flatten)]
    pub grid: IoUResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub oracle: Option<f64>,
}

fn iou(a: &IouArgs) -> Result<()> {
    let ea = Ellipse::parse_csv(&a.a)?;
    let eb = Ellipse::parse_csv(&a.b)?;
    let grid = iou_grid(&ea, &eb)?;
    let oracle = a.oracle.map(|n| iou_oracle(&ea, &eb, n)).transpose()?;
    print_json(&IouOutput { grid, oracle })
}

// eval

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ImageReport {
    pub image: String,
    pub detections: usize,
    pub ground_truths: usize,
    #[serde(flatten)]
    pub report: MatchReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub min_iou: f64,
    pub images: Vec<ImageReport>,
    pub summary: MeanIoU,
}

/// Pairs detection and ground-truth entries by their `image` field. Images
/// present on only one side are scored against an empty list.
pub fn evaluate(predictions: &[AnnotatedImage], truth: &[AnnotatedImage], min_iou: f64) -> Result<EvalReport> {
    let mut by_image: BTreeMap<&str, (Vec<Ellipse>, Vec<Ellipse>)> = BTreeMap::new();
    for p in predictions {
        by_image.entry(&p.image_path).or_default().0.extend(&p.knots);
    }
    for t in truth {
        by_image.entry(&t.image_path).or_default().1.extend(&t.knots);
    }
    let entries: Vec<_> = by_image.into_iter().collect();
    let images = entries
        .par_iter()
        .map(|(image, (dets, gts))| {
            let report = match_and_score(dets, gts, min_iou)?;
            Ok(ImageReport {
                image: image.to_string(),
                detections: dets.len(),
                ground_truths: gts.len(),
                report,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    let summary = aggregate(images.iter().map(|r| &r.report));
    Ok(EvalReport {
        min_iou,
        images,
        summary,
    })
}

fn eval(a: &EvalArgs) -> Result<()> {
    let preds: Vec<_> = collect_annotations(&a.predictions)?.into_iter().map(|(_, i)| i).collect();
    let truth: Vec<_> = collect_annotations(&a.ground_truth)?.into_iter().map(|(_, i)| i).collect();
    let report = evaluate(&preds, &truth, a.min_iou)?;
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let stdout_err = |source| Error::Io {
        path: "<stdout>".into(),
        source,
    };
    for r in &report.images {
        writeln!(
            out,
            "{}: {} matched of {} detections / {} ground truths, mean IoU {:.4} (penalized {:.4})",
            r.image,
            r.report.pairs.len(),
            r.detections,
            r.ground_truths,
            r.report.mean_iou_matched,
            r.report.mean_iou_penalized
        )
        .map_err(stdout_err)?;
    }
    let s = &report.summary;
    writeln!(
        out,
        "dataset: {} images, {} matched pairs, mean IoU {:.4} (penalized {:.4})",
        s.images, s.matched_pairs, s.mean_iou_matched, s.mean_iou_penalized
    )
    .map_err(stdout_err)?;
    if let Some(path) = &a.report {
        write_json(&report, path)?;
    }
    Ok(())
}

// fit

fn fit(a: &FitArgs) -> Result<()> {
    let target = Ellipse::parse_csv(&a.target)?;
    let init = Ellipse::parse_csv(&a.init)?;
    let metric = match a.metric {
        FitMetricArg::W2 => FitMetric::W2Squared,
        FitMetricArg::Kl => FitMetric::Kl,
        FitMetricArg::L2 => FitMetric::L2Params,
    };
    let cfg = FitConfig {
        metric,
        step_size: a.step_size,
        max_iters: a.max_iters,
        grad_tolerance: a.grad_tolerance,
    };
    let trace = fit_ellipse(&init, &target, &cfg)?;
    let iou = iou_grid(&trace.final_params, &target)?.iou;
    let f = &trace.final_params;
    let stop = match trace.stop {
        StopReason::GradientTolerance => "gradient tolerance reached",
        StopReason::MaxIterations => "iteration limit reached",
        StopReason::LineSearchStalled => "line search stalled",
    };
    println!(
        "{} iterations ({stop}); final {},{},{},{},{} loss {:e} IoU {:.4}",
        trace.iterations, f.cx, f.cy, f.rx, f.ry, f.theta, trace.final_loss, iou
    );
    if let Some(path) = &a.trace {
        write_json(&trace, path)?;
    }
    Ok(())
}

// render

/// Knots from an annotation file that belong to `image`: entries whose file
/// name matches, or the only entry if the file holds just one.
fn ellipses_for(annotations: &Path, image: &Path) -> Result<Vec<Ellipse>> {
    let entries = collect_annotations(annotations)?;
    let name = image.file_name();
    let matching: Vec<&AnnotatedImage> = entries
        .iter()
        .map(|(_, a)| a)
        .filter(|a| Path::new(&a.image_path).file_name() == name)
        .collect();
    let chosen = match (matching.is_empty(), entries.as_slice()) {
        (false, _) => matching,
        (true, [(_, only)]) => vec![only],
        (true, _) => {
            log::warn!("{}: no entry for {}", annotations.display(), image.display());
            Vec::new()
        }
    };
    Ok(chosen.into_iter().flat_map(|a| a.knots.iter().copied()).collect())
}

fn render(a: &RenderArgs) -> Result<()> {
    let mut groups = Vec::new();
    for (label, color, path) in [
        ("baseline", BASELINE, &a.baseline),
        ("ground truth", GROUND_TRUTH, &a.ground_truth),
        ("predictions", PREDICTION, &a.predictions),
    ] {
        if let Some(path) = path {
            groups.push(OverlayGroup {
                label: label.into(),
                color,
                ellipses: ellipses_for(path, &a.image)?,
            });
        }
    }
    let spec = OverlaySpec {
        image_path: a.image.clone(),
        groups,
        stroke_width: a.stroke_width,
    };
    let img = render_overlay(&spec)?;
    save_png(&img, &a.output)
}
