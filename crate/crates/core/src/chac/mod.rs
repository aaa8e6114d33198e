//! Convex Hull Approximate Contour (CHAC) grain detection.
//!
//! A grain is a closed region of non-boundary pixels whose outer contour is
//! close to convex. The pipeline binarizes the prediction, optionally closes
//! small gaps in the boundary class, labels the interiors, and keeps the
//! components that are large enough, convex enough (by solidity) and, unless
//! configured otherwise, clear of the image border.

mod components;
mod contour;
mod hull;

use alloc::format;
use alloc::string::String;
use alloc::vec;
use alloc::vec::Vec;

pub use components::{connected_components, Connectivity};
pub use contour::{trace_contour, Contour, Pixel};
pub use hull::{convex_hull, polygon_area, signed_area};

use crate::metrics::binarize;
use crate::raster::{BinaryMask, Grid, LabelMap, ProbabilityMap};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(default, deny_unknown_fields))]
pub struct ChacConfig {
    pub binarize_threshold: f64,
    /// Adjacency for grain interiors.
    pub connectivity: Connectivity,
    pub min_area_px: usize,
    pub solidity_threshold: f64,
    pub include_border_grains: bool,
    /// Rounds of 3×3 closing applied to the boundary class.
    pub closing_iterations: usize,
}

impl Default for ChacConfig {
    fn default() -> Self {
        Self {
            binarize_threshold: 0.5,
            connectivity: Connectivity::Four,
            min_area_px: 50,
            solidity_threshold: 0.90,
            include_border_grains: false,
            closing_iterations: 0,
        }
    }
}

impl ChacConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidParameter(m));
        if !(self.binarize_threshold > 0.0 && self.binarize_threshold < 1.0) {
            return bad(format!(
                "binarize_threshold must lie in (0, 1), got {}",
                self.binarize_threshold
            ));
        }
        if !(self.solidity_threshold > 0.0 && self.solidity_threshold <= 1.0) {
            return bad(format!(
                "solidity_threshold must lie in (0, 1], got {}",
                self.solidity_threshold
            ));
        }
        if self.min_area_px < 1 {
            return bad("min_area_px must be at least 1".into());
        }
        Ok(())
    }

    pub fn accepts(&self, g: &Grain) -> bool {
        g.area_px >= self.min_area_px
            && g.solidity >= self.solidity_threshold
            && (self.include_border_grains || !g.touches_border)
    }
}

/// One interior component with its shape measurements.
#[derive(Debug, Clone, PartialEq)]
pub struct Grain {
    pub label: u32,
    pub area_px: usize,
    pub contour: Contour,
    pub hull: Vec<Pixel>,
    pub hull_area: f64,
    pub contour_area: f64,
    /// `contour_area / hull_area`, clamped to at most 1. Degenerate shapes
    /// with zero hull area (single pixels, straight runs) count as 1.
    pub solidity: f64,
    pub centroid: (f64, f64),
    pub touches_border: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrainSet {
    pub image_id: String,
    pub grains: Vec<Grain>,
    pub config: ChacConfig,
}

impl GrainSet {
    pub fn count(&self) -> usize {
        self.grains.len()
    }
}

/// Everything CHAC computed for one image, including rejected components.
#[derive(Debug, Clone)]
pub struct ChacAnalysis {
    pub labels: LabelMap,
    pub candidates: Vec<Grain>,
    pub accepted: Vec<bool>,
}

pub enum ChacInput<'a> {
    Probability(&'a ProbabilityMap),
    Mask(&'a BinaryMask),
}

impl<'a> From<&'a ProbabilityMap> for ChacInput<'a> {
    fn from(m: &'a ProbabilityMap) -> Self {
        Self::Probability(m)
    }
}

impl<'a> From<&'a BinaryMask> for ChacInput<'a> {
    fn from(m: &'a BinaryMask) -> Self {
        Self::Mask(m)
    }
}

fn dilate(mask: &BinaryMask) -> BinaryMask {
    morph(mask, true)
}

fn erode(mask: &BinaryMask) -> BinaryMask {
    morph(mask, false)
}

/// 3×3 max (dilate) or min (erode) over in-bounds neighbours.
fn morph(mask: &BinaryMask, dilate: bool) -> BinaryMask {
    let (w, h) = (mask.width(), mask.height());
    Grid::from_fn(w, h, |r, c| {
        let rows = r.saturating_sub(1)..=(r + 1).min(h - 1);
        let mut hit = !dilate;
        for nr in rows {
            for nc in c.saturating_sub(1)..=(c + 1).min(w - 1) {
                if *mask.get(nr, nc) == dilate {
                    hit = dilate;
                }
            }
        }
        hit
    })
}

/// Morphological closing with a 3×3 square element, `iterations` times.
pub fn close_boundaries(mask: &BinaryMask, iterations: usize) -> BinaryMask {
    let mut out = mask.clone();
    for _ in 0..iterations {
        out = dilate(&out);
    }
    for _ in 0..iterations {
        out = erode(&out);
    }
    out
}

/// Measures every interior component of a boundary mask.
pub fn analyze(boundary: &BinaryMask, cfg: &ChacConfig) -> Result<ChacAnalysis> {
    cfg.validate()?;
    let closed = close_boundaries(boundary, cfg.closing_iterations);
    let labels = connected_components(&closed.inverted(), cfg.connectivity);
    let (w, h) = (labels.width(), labels.height());

    struct Acc {
        area: usize,
        sum_r: u64,
        sum_c: u64,
        border: bool,
        start: Pixel,
    }
    let k = labels.count() as usize;
    let mut acc: Vec<Option<Acc>> = (0..=k).map(|_| None).collect();
    for r in 0..h {
        for c in 0..w {
            let l = labels.get(r, c) as usize;
            if l == 0 {
                continue;
            }
            let on_border = r == 0 || c == 0 || r + 1 == h || c + 1 == w;
            let a = acc[l].get_or_insert(Acc {
                area: 0,
                sum_r: 0,
                sum_c: 0,
                border: false,
                start: (r, c),
            });
            a.area += 1;
            a.sum_r += r as u64;
            a.sum_c += c as u64;
            a.border |= on_border;
        }
    }

    let mut candidates = Vec::with_capacity(k);
    for (label, a) in acc.into_iter().enumerate().skip(1) {
        let a = a.expect("labels are dense");
        let contour = contour::trace_from(&labels, label as u32, a.start, 4 * a.area + 8);
        let hull = convex_hull(&contour);
        let hull_area = polygon_area(&hull);
        let contour_area = polygon_area(&contour);
        let solidity = if hull_area > 0.0 {
            (contour_area / hull_area).min(1.0)
        } else {
            1.0
        };
        candidates.push(Grain {
            label: label as u32,
            area_px: a.area,
            contour,
            hull,
            hull_area,
            contour_area,
            solidity,
            centroid: (
                a.sum_r as f64 / a.area as f64,
                a.sum_c as f64 / a.area as f64,
            ),
            touches_border: a.border,
        });
    }
    let accepted = candidates.iter().map(|g| cfg.accepts(g)).collect();
    Ok(ChacAnalysis {
        labels,
        candidates,
        accepted,
    })
}

/// Detects closed convex grains in a prediction or boundary mask.
pub fn detect_grains<'a>(
    image_id: &str,
    input: impl Into<ChacInput<'a>>,
    cfg: &ChacConfig,
) -> Result<GrainSet> {
    cfg.validate()?;
    let binarized;
    let boundary = match input.into() {
        ChacInput::Probability(map) => {
            binarized = binarize(map, cfg.binarize_threshold)?;
            &binarized
        }
        ChacInput::Mask(mask) => mask,
    };
    let analysis = analyze(boundary, cfg)?;
    let grains = analysis
        .candidates
        .into_iter()
        .zip(analysis.accepted)
        .filter_map(|(g, ok)| ok.then_some(g))
        .collect();
    Ok(GrainSet {
        image_id: image_id.into(),
        grains,
        config: *cfg,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct GrainStats {
    pub count: usize,
    pub mean_area: Option<f64>,
    /// Power-of-two area bins `[2^i, 2^(i+1))` as `(lo, hi, count)`.
    pub area_histogram: Vec<(usize, usize, usize)>,
}

pub fn grain_stats(gs: &GrainSet) -> GrainStats {
    let count = gs.grains.len();
    let total: usize = gs.grains.iter().map(|g| g.area_px).sum();
    let mean_area = (count > 0).then(|| total as f64 / count as f64);
    let mut bins: Vec<usize> = vec![];
    for g in &gs.grains {
        let b = (usize::BITS - 1 - g.area_px.leading_zeros()) as usize;
        if bins.len() <= b {
            bins.resize(b + 1, 0);
        }
        bins[b] += 1;
    }
    let area_histogram = bins
        .into_iter()
        .enumerate()
        .map(|(i, n)| (1usize << i, 1usize << (i + 1), n))
        .collect();
    GrainStats {
        count,
        mean_area,
        area_histogram,
    }
}
