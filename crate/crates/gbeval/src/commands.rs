//! Subcommand implementations. Each takes its parsed flags plus the shared
//! seed and returns the files it wrote.

use std::path::{Path, PathBuf};

use clap::{Args, ValueEnum};
use gbeval_core::chac::{analyze, ChacConfig, Grain, GrainSet};
use gbeval_core::cm2::{blend_with_gray, cm2_census, render_cm2, Cm2Palette};
use gbeval_core::dataprep::{augment_d4, augment_d4_probability, Augmentation};
use gbeval_core::metrics::{
    binarize, confusion, histogram, ConfidenceConfig, ConfidenceTally, ConfusionCounts, Histogram,
    MetricBundle,
};
use gbeval_core::raster::SampleDepth;
use gbeval_core::synth::{degrade_annotation, grid_grains, soften, voronoi_grains, SynthSpec};
use gbeval_core::toynet::{train, AdamParams, LayerId, ToyNet, TrainConfig};
use gbeval_core::xval::{aggregate, best_by, relative_improvement, KeyField, Metric, RunRecord};
use gbeval_core::{BinaryMask, Grid, ProbabilityMap, Rgb};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::checkpoint::{toy_fixture, Checkpoint, NetSpec};
use crate::inputs::{files_or_dir, pair_paths};
use crate::manifest::{load_manifest, manifest_dir, prep, PrepOptions};
use crate::pngio::{read_mask, read_probability, write_mask, write_probability, write_rgb};
use crate::report::{
    write_grains_csv, write_histogram_csv, write_json, write_metrics_csv, write_summary_csv,
    write_text,
};
use crate::svg::{errorbar_svg, histogram_svg, XAxis};
use crate::{Error, Result};

/// What a command produced.
#[derive(Debug, Default)]
pub struct Outcome {
    pub outputs: Vec<PathBuf>,
    /// Human-readable summary for stdout.
    pub message: String,
}

// ---------------------------------------------------------------- prep

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AugmentationArg {
    None,
    D4,
}

#[derive(Debug, Args)]
pub struct PrepArgs {
    /// Directory of grayscale images.
    #[arg(long)]
    pub images: PathBuf,
    /// Directory of annotation masks with matching file stems.
    #[arg(long)]
    pub annotations: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub k: usize,
    /// Manifest path; quarters are written beside it under `quarters/`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum, default_value = "d4")]
    pub augmentation: AugmentationArg,
    /// Threshold masks at 128 instead of requiring 0/255.
    #[arg(long)]
    pub lenient: bool,
}

pub fn cmd_prep(a: &PrepArgs, seed: u64) -> Result<Outcome> {
    let m = prep(&PrepOptions {
        images: a.images.clone(),
        annotations: a.annotations.clone(),
        k: a.k,
        seed,
        out: a.out.clone(),
        augmentation: match a.augmentation {
            AugmentationArg::None => Augmentation::None,
            AugmentationArg::D4 => Augmentation::D4,
        },
        lenient: a.lenient,
    })?;
    let sizes: Vec<String> = m
        .folds
        .iter()
        .map(|f| f.validation_ids.len().to_string())
        .collect();
    let mut outputs = vec![a.out.clone()];
    let root = manifest_dir(&a.out);
    for p in &m.pairs {
        outputs.push(root.join(&p.image));
        outputs.push(root.join(&p.annotation));
    }
    Ok(Outcome {
        outputs,
        message: format!(
            "{} pairs, {} folds (validation sizes {})",
            m.pairs.len(),
            m.k,
            sizes.join(",")
        ),
    })
}

// ---------------------------------------------------------------- eval

#[derive(Debug, Args)]
pub struct EvalArgs {
    /// Prediction PNG or directory of them (8- or 16-bit grayscale).
    #[arg(long)]
    pub pred: PathBuf,
    /// Annotation PNG or directory, paired with predictions by stem.
    #[arg(long)]
    pub gt: PathBuf,
    /// Confidence threshold.
    #[arg(long, default_value_t = gbeval_core::metrics::DEFAULT_CONFIDENCE_T)]
    pub t: f64,
    /// Binarization threshold.
    #[arg(long, default_value_t = gbeval_core::metrics::DEFAULT_BINARIZE_THRESHOLD)]
    pub threshold: f64,
    #[arg(long)]
    pub out: PathBuf,
    /// Write only the pooled row.
    #[arg(long)]
    pub pooled: bool,
    #[arg(long, default_value_t = gbeval_core::metrics::DEFAULT_BIN_COUNT)]
    pub bins: usize,
    /// Pooled probability histogram as CSV.
    #[arg(long)]
    pub hist: Option<PathBuf>,
    #[arg(long)]
    pub hist_svg: Option<PathBuf>,
    #[arg(long)]
    pub lenient: bool,
}

pub const POOLED_ID: &str = "pooled";

struct EvalPart {
    id: String,
    counts: ConfusionCounts,
    tally: ConfidenceTally,
    hist: Histogram,
}

pub fn cmd_eval(a: &EvalArgs) -> Result<Outcome> {
    let cfg = ConfidenceConfig::new(a.t).map_err(Error::core("--t"))?;
    if !(a.threshold > 0.0 && a.threshold < 1.0) {
        return Err(Error::Config(format!(
            "--threshold must lie in (0, 1), got {}",
            a.threshold
        )));
    }
    Histogram::empty(a.bins).map_err(Error::core("--bins"))?;
    let pairs = pair_paths(&a.pred, &a.gt)?;
    let parts: Vec<EvalPart> = pairs
        .par_iter()
        .map(|p| {
            let pred = read_probability(&p.left)?;
            let gt = read_mask(&p.right, a.lenient)?;
            if !pred.grid().same_shape(&gt) {
                return Err(Error::Data(format!(
                    "pair {}: prediction is {}x{} but annotation is {}x{}",
                    p.id,
                    pred.width(),
                    pred.height(),
                    gt.width(),
                    gt.height()
                )));
            }
            let bin = binarize(&pred, a.threshold).map_err(Error::core(&p.id))?;
            Ok(EvalPart {
                id: p.id.clone(),
                counts: confusion(&bin, &gt).map_err(Error::core(&p.id))?,
                tally: ConfidenceTally::of(&pred, &cfg),
                hist: histogram(&pred, a.bins).map_err(Error::core(&p.id))?,
            })
        })
        .collect::<Result<_>>()?;

    let counts: ConfusionCounts = parts.iter().map(|p| p.counts).sum();
    let tally: ConfidenceTally = parts.iter().map(|p| p.tally).sum();
    let mut hist = Histogram::empty(a.bins).expect("checked above");
    for p in &parts {
        hist.merge(&p.hist).expect("same binning");
    }
    let pooled = MetricBundle::from_parts(&counts, &tally);

    let mut rows: Vec<(String, MetricBundle)> = Vec::new();
    if !a.pooled {
        rows.extend(
            parts
                .iter()
                .map(|p| (p.id.clone(), MetricBundle::from_parts(&p.counts, &p.tally))),
        );
    }
    rows.push((POOLED_ID.into(), pooled));
    write_metrics_csv(&a.out, &rows)?;
    let mut outputs = vec![a.out.clone()];
    if let Some(h) = &a.hist {
        write_histogram_csv(h, &hist)?;
        outputs.push(h.clone());
    }
    if let Some(h) = &a.hist_svg {
        write_text(h, &histogram_svg(&hist, a.t))?;
        outputs.push(h.clone());
    }
    Ok(Outcome {
        outputs,
        message: format!(
            "{} images; pooled f1={} certainty={} abundance={}",
            parts.len(),
            crate::report::fmt_opt(pooled.f1),
            crate::report::fmt_opt(pooled.certainty),
            crate::report::fmt_opt(pooled.abundance)
        ),
    })
}

// ---------------------------------------------------------------- chac

#[derive(Debug, Args)]
pub struct ChacArgs {
    /// Prediction PNG or directory of them.
    #[arg(long)]
    pub pred: PathBuf,
    /// JSON detector configuration; defaults apply to omitted fields.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Grain table.
    #[arg(long)]
    pub out: PathBuf,
    /// Summary JSON; defaults to `<out stem>_summary.json` beside `--out`.
    #[arg(long)]
    pub summary: Option<PathBuf>,
    /// Write a colored overlay per image into this directory.
    #[arg(long)]
    pub overlay_dir: Option<PathBuf>,
}

#[derive(Serialize)]
struct ImageSummary {
    image_id: String,
    grain_count: usize,
    candidates: usize,
    mean_area_px: Option<f64>,
}

#[derive(Serialize)]
struct ChacSummary {
    total_grains: usize,
    images: Vec<ImageSummary>,
    config: ChacConfig,
}

pub fn load_chac_config(path: Option<&Path>) -> Result<ChacConfig> {
    let cfg: ChacConfig = match path {
        None => ChacConfig::default(),
        Some(p) => {
            let text = std::fs::read_to_string(p).map_err(Error::io(p))?;
            serde_json::from_str(&text)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
        }
    };
    cfg.validate().map_err(|e| {
        Error::Config(format!(
            "{}: {e}",
            path.map_or("default config".into(), |p| p.display().to_string())
        ))
    })?;
    Ok(cfg)
}

fn overlay(labels: &Grid<u32>, candidates: &[Grain], accepted: &[bool], seed: u64) -> Grid<Rgb> {
    let mut colors: Vec<Rgb> = vec![[0, 0, 0]];
    for (g, &ok) in candidates.iter().zip(accepted) {
        colors.push(if ok {
            let mut rng = ChaCha8Rng::seed_from_u64(
                seed ^ u64::from(g.label).wrapping_mul(0x9e37_79b9_7f4a_7c15),
            );
            [
                rng.gen_range(40..=255),
                rng.gen_range(40..=255),
                rng.gen_range(40..=255),
            ]
        } else {
            [96, 96, 96]
        });
    }
    labels.map(|&l| colors[l as usize])
}

pub fn cmd_chac(a: &ChacArgs, seed: u64) -> Result<Outcome> {
    let cfg = load_chac_config(a.config.as_deref())?;
    let files = files_or_dir(&a.pred)?;
    let results: Vec<(GrainSet, usize, Option<PathBuf>)> = files
        .par_iter()
        .map(|(id, path)| {
            let map = read_probability(path)?;
            let boundary = binarize(&map, cfg.binarize_threshold).map_err(Error::core(id))?;
            let an = analyze(&boundary, &cfg).map_err(Error::core(id))?;
            let mut written = None;
            if let Some(dir) = &a.overlay_dir {
                let p = dir.join(format!("{id}_grains.png"));
                write_rgb(
                    &p,
                    &overlay(an.labels.grid(), &an.candidates, &an.accepted, seed),
                )?;
                written = Some(p);
            }
            let n_candidates = an.candidates.len();
            let grains = an
                .candidates
                .into_iter()
                .zip(an.accepted)
                .filter_map(|(g, ok)| ok.then_some(g))
                .collect();
            Ok((
                GrainSet {
                    image_id: id.clone(),
                    grains,
                    config: cfg,
                },
                n_candidates,
                written,
            ))
        })
        .collect::<Result<_>>()?;

    let sets: Vec<GrainSet> = results.iter().map(|r| r.0.clone()).collect();
    write_grains_csv(&a.out, &sets)?;
    let summary_path = a.summary.clone().unwrap_or_else(|| {
        let stem = a.out.file_stem().unwrap_or_default().to_string_lossy();
        a.out.with_file_name(format!("{stem}_summary.json"))
    });
    let summary = ChacSummary {
        total_grains: sets.iter().map(GrainSet::count).sum(),
        images: results
            .iter()
            .map(|(s, n, _)| ImageSummary {
                image_id: s.image_id.clone(),
                grain_count: s.count(),
                candidates: *n,
                mean_area_px: gbeval_core::chac::grain_stats(s).mean_area,
            })
            .collect(),
        config: cfg,
    };
    write_json(&summary_path, &summary)?;
    let mut outputs = vec![a.out.clone(), summary_path];
    outputs.extend(results.into_iter().filter_map(|r| r.2));
    Ok(Outcome {
        outputs,
        message: format!(
            "{} grains in {} images",
            summary.total_grains,
            summary.images.len()
        ),
    })
}

// ---------------------------------------------------------------- cm2

pub fn parse_rgb(s: &str) -> std::result::Result<Rgb, String> {
    let parts: Vec<&str> = s.split(',').map(str::trim).collect();
    if parts.len() != 3 {
        return Err(format!("expected R,G,B, got {s:?}"));
    }
    let mut out = [0u8; 3];
    for (o, p) in out.iter_mut().zip(parts) {
        *o = p
            .parse()
            .map_err(|_| format!("{p:?} is not a value in 0..=255"))?;
    }
    Ok(out)
}

#[derive(Debug, Args)]
pub struct Cm2Args {
    #[arg(long)]
    pub pred: PathBuf,
    #[arg(long)]
    pub gt: PathBuf,
    /// One `<id>_cm2.png` per pair is written here.
    #[arg(long)]
    pub out_dir: PathBuf,
    #[arg(long, default_value_t = gbeval_core::metrics::DEFAULT_BINARIZE_THRESHOLD)]
    pub threshold: f64,
    #[arg(long, value_parser = parse_rgb)]
    pub tp: Option<Rgb>,
    #[arg(long, value_parser = parse_rgb)]
    pub fp: Option<Rgb>,
    #[arg(long = "fn", value_parser = parse_rgb)]
    pub fn_: Option<Rgb>,
    #[arg(long, value_parser = parse_rgb)]
    pub tn: Option<Rgb>,
    /// Grayscale images (file or directory, matched by stem) to blend under
    /// the overlay at 50%.
    #[arg(long)]
    pub backdrop: Option<PathBuf>,
    #[arg(long)]
    pub lenient: bool,
}

pub fn cmd_cm2(a: &Cm2Args) -> Result<Outcome> {
    let d = Cm2Palette::default();
    let palette = Cm2Palette::new(
        a.tp.unwrap_or(d.tp()),
        a.fp.unwrap_or(d.fp()),
        a.fn_.unwrap_or(d.fn_()),
        a.tn.unwrap_or(d.tn()),
    )
    .map_err(Error::core("palette"))?;
    if !(a.threshold > 0.0 && a.threshold < 1.0) {
        return Err(Error::Config(format!(
            "--threshold must lie in (0, 1), got {}",
            a.threshold
        )));
    }
    let pairs = pair_paths(&a.pred, &a.gt)?;
    let backdrops = match &a.backdrop {
        Some(b) => Some(
            files_or_dir(b)?
                .into_iter()
                .collect::<std::collections::BTreeMap<_, _>>(),
        ),
        None => None,
    };
    let written: Vec<(PathBuf, ConfusionCounts)> = pairs
        .par_iter()
        .map(|p| {
            let pred =
                binarize(&read_probability(&p.left)?, a.threshold).map_err(Error::core(&p.id))?;
            let gt = read_mask(&p.right, a.lenient)?;
            let mut img = render_cm2(&pred, &gt, &palette).map_err(Error::core(&p.id))?;
            let counts = cm2_census(&img, &palette).expect("rendered with this palette");
            if let Some(bd) = &backdrops {
                let path = bd
                    .get(&p.id)
                    .or_else(|| (bd.len() == 1).then(|| bd.values().next()).flatten())
                    .ok_or_else(|| Error::Input(format!("no backdrop for {}", p.id)))?;
                img =
                    blend_with_gray(&img, &read_probability(path)?).map_err(Error::core(&p.id))?;
            }
            let out = a.out_dir.join(format!("{}_cm2.png", p.id));
            write_rgb(&out, &img)?;
            Ok((out, counts))
        })
        .collect::<Result<_>>()?;
    let total: ConfusionCounts = written.iter().map(|w| w.1).sum();
    Ok(Outcome {
        outputs: written.into_iter().map(|w| w.0).collect(),
        message: format!(
            "tp={} fp={} fn={} tn={}",
            total.tp, total.fp, total.fn_, total.tn
        ),
    })
}

// ---------------------------------------------------------------- synth

#[derive(Debug, Args)]
pub struct SynthArgs {
    #[arg(long, default_value_t = 512)]
    pub width: usize,
    #[arg(long, default_value_t = 512)]
    pub height: usize,
    #[arg(long, default_value_t = 30)]
    pub n_seeds: usize,
    #[arg(long, default_value_t = gbeval_core::synth::DEFAULT_BOUNDARY_THICKNESS)]
    pub thickness: usize,
    /// Number of fixtures; fixture `i` uses seed `seed + i`.
    #[arg(long, default_value_t = 1)]
    pub count: usize,
    /// Regular `CELLS`×`CELLS` grid instead of random seeds (square images only).
    #[arg(long)]
    pub grid: Option<usize>,
    #[arg(long)]
    pub no_frame: bool,
    /// Fraction of cell edges erased in the degraded annotation.
    #[arg(long, default_value_t = 0.0)]
    pub drop: f64,
    /// Share of confident pixels in the softened map.
    #[arg(long, default_value_t = 1.0)]
    pub confident_fraction: f64,
    #[arg(long, default_value_t = gbeval_core::metrics::DEFAULT_CONFIDENCE_T)]
    pub t: f64,
    /// Detector minimum area used for the density warning.
    #[arg(long, default_value_t = 50)]
    pub min_area: usize,
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Serialize)]
struct Sidecar {
    n_seeds: usize,
    seed_points: Vec<(f64, f64)>,
    cell_areas: Vec<usize>,
    rng_seed: u64,
    width: usize,
    height: usize,
    boundary_thickness: usize,
    drop_fraction: f64,
    confident_fraction: f64,
    t: f64,
}

const DEGRADE_STREAM: u64 = 0x6a09_e667_f3bc_c909;
const SOFTEN_STREAM: u64 = 0xbb67_ae85_84ca_a73b;

pub fn cmd_synth(a: &SynthArgs, seed: u64) -> Result<Outcome> {
    if a.count == 0 {
        return Err(Error::Config("--count must be at least 1".into()));
    }
    if a.grid.is_some() && a.width != a.height {
        return Err(Error::Config(
            "--grid needs --width equal to --height".into(),
        ));
    }
    let spec0 = SynthSpec {
        boundary_thickness: a.thickness,
        draw_frame: !a.no_frame,
        ..SynthSpec::new(a.width, a.height, a.n_seeds, seed)
    };
    spec0.validate().map_err(Error::core("synth"))?;
    if a.grid.is_none() && spec0.is_dense_for(a.min_area) {
        let warn = format!(
            "warning: {} seeds on {}x{} give cells of about {:.0} px, under 4x the minimum grain area {}",
            a.n_seeds,
            a.width,
            a.height,
            spec0.expected_cell_area(),
            a.min_area
        );
        eprintln!("{warn}");
    }
    let files: Vec<Vec<PathBuf>> = (0..a.count)
        .into_par_iter()
        .map(|i| {
            let rng_seed = seed.wrapping_add(i as u64);
            let truth = match a.grid {
                Some(cells) => grid_grains(a.width, cells, a.thickness),
                None => voronoi_grains(&SynthSpec {
                    rng_seed,
                    ..spec0.clone()
                }),
            }
            .map_err(Error::core("synth"))?;
            let degraded = degrade_annotation(&truth, a.drop, rng_seed ^ DEGRADE_STREAM)
                .map_err(Error::core("--drop"))?;
            let soft = soften(
                &truth.annotation,
                a.confident_fraction,
                a.t,
                rng_seed ^ SOFTEN_STREAM,
            )
            .map_err(Error::core("soften"))?;
            let name = format!("synth_{i:03}");
            let ann = a.out.join("annotation").join(format!("{name}.png"));
            let deg = a.out.join("degraded").join(format!("{name}.png"));
            let sof = a.out.join("softened").join(format!("{name}.png"));
            let side = a.out.join(format!("{name}.json"));
            write_mask(&ann, &truth.annotation)?;
            write_mask(&deg, &degraded)?;
            write_probability(&sof, &soft, SampleDepth::Sixteen)?;
            write_json(
                &side,
                &Sidecar {
                    n_seeds: truth.cell_count,
                    seed_points: truth.seed_points.clone(),
                    cell_areas: truth.cell_areas.clone(),
                    rng_seed,
                    width: a.width,
                    height: a.height,
                    boundary_thickness: a.thickness,
                    drop_fraction: a.drop,
                    confident_fraction: a.confident_fraction,
                    t: a.t,
                },
            )?;
            Ok(vec![ann, deg, sof, side])
        })
        .collect::<Result<_>>()?;
    Ok(Outcome {
        outputs: files.into_iter().flatten().collect(),
        message: format!("{} fixtures in {}", a.count, a.out.display()),
    })
}

// ---------------------------------------------------------------- aggregate

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum XAxisArg {
    Lambda,
    FinetuneLevel,
}

#[derive(Debug, Args)]
pub struct AggregateArgs {
    /// JSON-lines file, one run record per line.
    #[arg(long)]
    pub records: PathBuf,
    /// Summary table `group,metric,mean,std,n`.
    #[arg(long)]
    pub out: PathBuf,
    /// Error-bar chart of `--metric`.
    #[arg(long)]
    pub svg: Option<PathBuf>,
    #[arg(long, default_value = "f1")]
    pub metric: String,
    #[arg(long, value_enum, default_value = "lambda")]
    pub x: XAxisArg,
    /// Category order for a finetune-level axis.
    #[arg(long, value_delimiter = ',')]
    pub x_order: Option<Vec<String>>,
    #[arg(
        long,
        value_delimiter = ',',
        default_value = "architecture,lambda,finetune_level"
    )]
    pub group_by: Vec<String>,
    /// Reject records whose fold_index is not below K.
    #[arg(long)]
    pub k: Option<usize>,
}

pub fn read_records(path: &Path) -> Result<Vec<RunRecord>> {
    let text = std::fs::read_to_string(path).map_err(Error::io(path))?;
    let mut out = Vec::new();
    for (n, line) in text.lines().enumerate() {
        if line.trim().is_empty() {
            continue;
        }
        let r: RunRecord = serde_json::from_str(line)
            .map_err(|e| Error::Data(format!("{}:{}: {e}", path.display(), n + 1)))?;
        out.push(r);
    }
    Ok(out)
}

pub fn cmd_aggregate(a: &AggregateArgs) -> Result<Outcome> {
    let metric = Metric::from_name(&a.metric)
        .ok_or_else(|| Error::Config(format!("unknown metric {:?}", a.metric)))?;
    let group_by = a
        .group_by
        .iter()
        .map(|s| {
            KeyField::from_name(s).ok_or_else(|| Error::Config(format!("unknown group key {s:?}")))
        })
        .collect::<Result<Vec<_>>>()?;
    let records = read_records(&a.records)?;
    for (i, r) in records.iter().enumerate() {
        r.validate(a.k)
            .map_err(|e| Error::Data(format!("record {}: {e}", i + 1)))?;
    }
    let groups = aggregate(&records, &group_by).map_err(|e| match e {
        gbeval_core::Error::Empty(_) => {
            Error::Input(format!("{}: no records", a.records.display()))
        }
        other => Error::core(a.records.display())(other),
    })?;
    write_summary_csv(&a.out, &groups)?;
    let mut outputs = vec![a.out.clone()];
    if let Some(svg) = &a.svg {
        let axis = match a.x {
            XAxisArg::Lambda => XAxis::Lambda,
            XAxisArg::FinetuneLevel => XAxis::FinetuneLevel,
        };
        write_text(
            svg,
            &errorbar_svg(&groups, metric, axis, a.x_order.as_deref())?,
        )?;
        outputs.push(svg.clone());
    }
    let mut message = format!("{} records in {} groups", records.len(), groups.len());
    if let Ok(best) = best_by(&groups, metric) {
        let mean = |k: &gbeval_core::xval::GroupKey| {
            groups
                .iter()
                .find(|g| g.key == *k)
                .and_then(|g| g.get(metric))
                .map(|s| s.mean)
        };
        let b = mean(&best).expect("best group defines the metric");
        message.push_str(&format!("\nbest {metric}: {best} (mean {b})"));
        if best.lambda.is_some_and(|l| l > 0.0) {
            let base = gbeval_core::xval::GroupKey {
                lambda: Some(0.0),
                ..best.clone()
            };
            if let Some(r) = mean(&base).and_then(|a0| relative_improvement(a0, b)) {
                message.push_str(&format!(" vs lambda=0: {:+.1}%", 100.0 * r));
            }
        }
    }
    Ok(Outcome { outputs, message })
}

// ---------------------------------------------------------------- toytrain

#[derive(Debug, Args)]
pub struct ToytrainArgs {
    /// Training images; pair with `--annotations`. Without data flags a
    /// built-in synthetic fixture is used.
    #[arg(long, requires = "annotations")]
    pub images: Option<PathBuf>,
    #[arg(long, requires = "images")]
    pub annotations: Option<PathBuf>,
    /// Train on one fold of a prepared manifest.
    #[arg(long, conflicts_with = "images", requires = "fold")]
    pub manifest: Option<PathBuf>,
    #[arg(long)]
    pub fold: Option<usize>,
    #[arg(long, default_value_t = 0.0)]
    pub lambda: f64,
    #[arg(long, default_value_t = 100)]
    pub steps: usize,
    #[arg(long, default_value_t = 1e-4)]
    pub lr: f64,
    #[arg(long, default_value_t = 4)]
    pub batch: usize,
    /// Layers to freeze: enc1, enc2, dec1, head.
    #[arg(long, value_delimiter = ',')]
    pub freeze: Vec<String>,
    /// Start from these weights instead of a random network.
    #[arg(long)]
    pub init: Option<PathBuf>,
    /// Also continue the optimizer state stored in `--init`.
    #[arg(long, requires = "init")]
    pub resume: bool,
    /// Image side of the synthetic fixture.
    #[arg(long, default_value_t = 16)]
    pub fixture_size: usize,
    #[arg(long, default_value_t = 8)]
    pub fixture_count: usize,
    /// Receives `checkpoint.json` and `loss.csv`.
    #[arg(long)]
    pub out_dir: PathBuf,
}

fn training_data(a: &ToytrainArgs, seed: u64) -> Result<Vec<(ProbabilityMap, BinaryMask)>> {
    if let Some(mpath) = &a.manifest {
        let m = load_manifest(mpath)?;
        let fold = a.fold.expect("clap requires --fold");
        if fold >= m.k {
            return Err(Error::Config(format!("--fold {fold} outside 0..{}", m.k)));
        }
        let root = manifest_dir(mpath);
        let mut data = Vec::new();
        for &id in &m.folds[fold].training_ids {
            let p = &m.pairs[id];
            let img = read_probability(&root.join(&p.image))?;
            let gt = read_mask(&root.join(&p.annotation), false)?;
            match m.augmentation {
                Augmentation::None => data.push((img, gt)),
                Augmentation::D4 => {
                    let imgs = augment_d4_probability(&img).map_err(Error::core(&p.image))?;
                    let gts = augment_d4(&gt).map_err(Error::core(&p.annotation))?;
                    data.extend(imgs.into_iter().zip(gts));
                }
            }
        }
        return Ok(data);
    }
    if let (Some(i), Some(g)) = (&a.images, &a.annotations) {
        return pair_paths(i, g)?
            .iter()
            .map(|p| Ok((read_probability(&p.left)?, read_mask(&p.right, false)?)))
            .collect();
    }
    toy_fixture(a.fixture_count, a.fixture_size, seed)
}

pub fn cmd_toytrain(a: &ToytrainArgs, seed: u64) -> Result<Outcome> {
    let mut frozen = Vec::new();
    for name in &a.freeze {
        frozen.push(
            LayerId::from_name(name)
                .ok_or_else(|| Error::Config(format!("unknown layer {name:?}")))?,
        );
    }
    let cfg = TrainConfig {
        batch_size: a.batch,
        lambda: a.lambda,
        steps: a.steps,
        rng_seed: seed,
        adam: AdamParams {
            learning_rate: a.lr,
            ..AdamParams::default()
        },
    };
    cfg.validate().map_err(Error::core("training flags"))?;

    let (mut net, state, start) = match &a.init {
        Some(p) => {
            let ck = Checkpoint::load(p)?;
            let state = a.resume.then_some(ck.adam);
            let start = if a.resume { ck.step } else { 0 };
            (ck.net, state, start)
        }
        None => (ToyNet::random(seed), None, 0),
    };
    for id in LayerId::ALL {
        net.set_trainable(id, !frozen.contains(&id));
    }
    let data = training_data(a, seed)?;
    let out = train(net, state, &data, &cfg).map_err(Error::core("training"))?;

    let ck_path = a.out_dir.join("checkpoint.json");
    let loss_path = a.out_dir.join("loss.csv");
    Checkpoint {
        spec: NetSpec::current(),
        net: out.net,
        adam: out.state.clone(),
        step: start + a.steps as u64,
        train: cfg,
    }
    .save(&ck_path)?;
    let mut csv = String::from("step,bce,penalty,total\n");
    for r in &out.trace {
        csv.push_str(&format!(
            "{},{},{},{}\n",
            start as usize + r.step,
            r.bce,
            r.penalty,
            r.total
        ));
    }
    write_text(&loss_path, &csv)?;
    let last = out.trace.last();
    Ok(Outcome {
        outputs: vec![ck_path, loss_path],
        message: format!(
            "{} steps on {} samples; final total loss {}",
            a.steps,
            data.len(),
            last.map_or("NA".into(), |r| r.total.to_string())
        ),
    })
}
