//! Synthetic ground truth: Voronoi grain maps, whole-edge annotation dropout
//! and probability maps with prescribed confidence.
//!
//! Voronoi cells are convex, so every cell that survives the boundary band is
//! a grain CHAC should find. That makes these maps an oracle bed for both the
//! detector and the confidence metrics.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::vec;
use alloc::vec::Vec;

use rand::distributions::{Distribution, Open01};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::raster::{BinaryMask, Grid, ProbabilityMap};
use crate::{Error, Result};

/// Default annotation stroke width in pixels.
pub const DEFAULT_BOUNDARY_THICKNESS: usize = 5;

const ATTEMPTS_PER_SEED: usize = 1000;

#[derive(Debug, Clone, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct SynthSpec {
    pub width: usize,
    pub height: usize,
    pub n_seeds: usize,
    pub boundary_thickness: usize,
    pub rng_seed: u64,
    pub draw_frame: bool,
}

impl SynthSpec {
    pub fn new(width: usize, height: usize, n_seeds: usize, rng_seed: u64) -> Self {
        Self {
            width,
            height,
            n_seeds,
            boundary_thickness: DEFAULT_BOUNDARY_THICKNESS,
            rng_seed,
            draw_frame: true,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.width == 0 || self.height == 0 {
            return Err(Error::EmptyImage {
                width: self.width,
                height: self.height,
            });
        }
        if self.n_seeds < 1 {
            return Err(Error::InvalidParameter("n_seeds must be at least 1".into()));
        }
        if self.boundary_thickness < 1 {
            return Err(Error::InvalidParameter(
                "boundary_thickness must be at least 1".into(),
            ));
        }
        Ok(())
    }

    pub fn expected_cell_area(&self) -> f64 {
        (self.width * self.height) as f64 / self.n_seeds as f64
    }

    /// True when cells are expected to be smaller than four times
    /// `min_area_px`, i.e. too dense for reliable detection.
    pub fn is_dense_for(&self, min_area_px: usize) -> bool {
        self.expected_cell_area() < 4.0 * min_area_px as f64
    }
}

/// Unordered pair of seed indices, smaller first.
pub type EdgeKey = (u32, u32);

#[derive(Debug, Clone, PartialEq)]
pub struct SynthTruth {
    pub annotation: BinaryMask,
    pub cell_count: usize,
    /// Pixels assigned to each seed, boundary pixels included.
    pub cell_areas: Vec<usize>,
    /// Seed positions as `(row, col)` in pixel-center coordinates.
    pub seed_points: Vec<(f64, f64)>,
    /// Nearest-seed index of every pixel.
    pub assignment: Grid<u32>,
    /// Cell pair owning each frontier pixel.
    pub edge_of: Grid<Option<EdgeKey>>,
    pub frame: BinaryMask,
}

impl SynthTruth {
    /// Distinct cell-pair edges in ascending order.
    pub fn edges(&self) -> Vec<EdgeKey> {
        let set: BTreeSet<EdgeKey> = self.edge_of.as_slice().iter().flatten().copied().collect();
        set.into_iter().collect()
    }
}

#[inline]
fn dist2(a: (f64, f64), b: (f64, f64)) -> f64 {
    let (dr, dc) = (a.0 - b.0, a.1 - b.1);
    dr * dr + dc * dc
}

fn sample_seeds(spec: &SynthSpec) -> Result<Vec<(f64, f64)>> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.rng_seed);
    let min_d = 2.0 * spec.boundary_thickness as f64;
    let limit = ATTEMPTS_PER_SEED * spec.n_seeds;
    let mut seeds: Vec<(f64, f64)> = Vec::with_capacity(spec.n_seeds);
    let mut attempts = 0;
    while seeds.len() < spec.n_seeds {
        if attempts == limit {
            return Err(Error::SeedPlacement {
                requested: spec.n_seeds,
                min_distance: min_d,
                attempts,
            });
        }
        attempts += 1;
        let p = (
            rng.gen::<f64>() * spec.height as f64,
            rng.gen::<f64>() * spec.width as f64,
        );
        if seeds.iter().all(|&s| dist2(s, p) >= min_d * min_d) {
            seeds.push(p);
        }
    }
    Ok(seeds)
}

/// Random Voronoi grain map.
///
/// Seeds are sampled uniformly with a minimum spacing of twice the boundary
/// thickness.
pub fn voronoi_grains(spec: &SynthSpec) -> Result<SynthTruth> {
    spec.validate()?;
    let seeds = sample_seeds(spec)?;
    voronoi_from_seeds(
        spec.width,
        spec.height,
        &seeds,
        spec.boundary_thickness,
        spec.draw_frame,
    )
}

/// Square grid of `cells`×`cells` grains on a `size`×`size` image, with
/// boundaries along every cell edge and the frame.
pub fn grid_grains(size: usize, cells: usize, thickness: usize) -> Result<SynthTruth> {
    if cells == 0 {
        return Err(Error::InvalidParameter("cells must be at least 1".into()));
    }
    let pitch = size as f64 / cells as f64;
    let seeds: Vec<(f64, f64)> = (0..cells)
        .flat_map(|i| (0..cells).map(move |j| ((i as f64 + 0.5) * pitch, (j as f64 + 0.5) * pitch)))
        .collect();
    voronoi_from_seeds(size, size, &seeds, thickness, true)
}

/// Voronoi map for explicit seeds.
///
/// Each pixel goes to its nearest seed (ties to the lower index). A pixel is
/// boundary when its center lies within `thickness / 2` of the bisector
/// separating its seed from some other seed; that other seed (the one with
/// the closest bisector) names the edge. With `draw_frame`, the outermost
/// `thickness` rows and columns are boundary too.
pub fn voronoi_from_seeds(
    width: usize,
    height: usize,
    seeds: &[(f64, f64)],
    thickness: usize,
    draw_frame: bool,
) -> Result<SynthTruth> {
    if seeds.is_empty() {
        return Err(Error::InvalidParameter(
            "at least one seed is required".into(),
        ));
    }
    if width == 0 || height == 0 {
        return Err(Error::EmptyImage { width, height });
    }
    let half = thickness as f64 / 2.0;
    let n = seeds.len();
    let mut assignment = Grid::filled(width, height, 0u32);
    let mut edge_of: Grid<Option<EdgeKey>> = Grid::filled(width, height, None);
    let mut cell_areas = vec![0usize; n];
    let mut d2 = vec![0.0f64; n];

    for r in 0..height {
        for c in 0..width {
            let p = (r as f64, c as f64);
            let mut nearest = 0;
            for (i, &s) in seeds.iter().enumerate() {
                d2[i] = dist2(p, s);
                if d2[i] < d2[nearest] {
                    nearest = i;
                }
            }
            assignment.set(r, c, nearest as u32);
            cell_areas[nearest] += 1;

            let a = seeds[nearest];
            let mut best: Option<(f64, usize)> = None;
            for (j, &b) in seeds.iter().enumerate() {
                if j == nearest {
                    continue;
                }
                let sep = libm::sqrt(dist2(a, b));
                if sep == 0.0 {
                    continue;
                }
                let to_bisector = (d2[j] - d2[nearest]) / (2.0 * sep);
                if best.is_none_or(|(d, _)| to_bisector < d) {
                    best = Some((to_bisector, j));
                }
            }
            if let Some((d, j)) = best {
                if d <= half {
                    let (lo, hi) = if nearest < j {
                        (nearest, j)
                    } else {
                        (j, nearest)
                    };
                    edge_of.set(r, c, Some((lo as u32, hi as u32)));
                }
            }
        }
    }

    let frame = Grid::from_fn(width, height, |r, c| {
        draw_frame && r.min(c).min(height - 1 - r).min(width - 1 - c) < thickness
    });
    let annotation = Grid::from_fn(width, height, |r, c| {
        *frame.get(r, c) || edge_of.get(r, c).is_some()
    });
    Ok(SynthTruth {
        annotation,
        cell_count: n,
        cell_areas,
        seed_points: seeds.to_vec(),
        assignment,
        edge_of,
        frame,
    })
}

/// Simulates an annotator missing whole boundaries.
///
/// Every cell-pair edge draws one uniform number from the seeded stream (in
/// ascending edge order) and is erased when that number is below
/// `drop_fraction`. For a fixed seed the erased set therefore grows with
/// `drop_fraction`. Frame pixels are never erased.
pub fn degrade_annotation(
    truth: &SynthTruth,
    drop_fraction: f64,
    rng_seed: u64,
) -> Result<BinaryMask> {
    if !(0.0..=1.0).contains(&drop_fraction) {
        return Err(Error::InvalidParameter(format!(
            "drop_fraction must lie in [0, 1], got {drop_fraction}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    let dropped: BTreeSet<EdgeKey> = truth
        .edges()
        .into_iter()
        .filter(|_| rng.gen::<f64>() < drop_fraction)
        .collect();
    let mut out = truth.annotation.clone();
    for (i, edge) in truth.edge_of.as_slice().iter().enumerate() {
        if let Some(e) = edge {
            if dropped.contains(e) && !truth.frame.as_slice()[i] {
                out.as_mut_slice()[i] = false;
            }
        }
    }
    Ok(out)
}

/// Turns a mask into a probability map with an exact confident share.
///
/// Exactly `round(confident_fraction · N)` pixels become confident: `1 − t/2`
/// on boundary pixels and `t/2` elsewhere. Of these, `round(f · P)` are drawn
/// uniformly from the `P` boundary pixels and the rest from the interior. All other
/// pixels are drawn uniformly from the open interval `(t, 1 − t)`.
pub fn soften(
    mask: &BinaryMask,
    confident_fraction: f64,
    t: f64,
    rng_seed: u64,
) -> Result<ProbabilityMap> {
    if !(0.0..=1.0).contains(&confident_fraction) {
        return Err(Error::InvalidParameter(format!(
            "confident_fraction must lie in [0, 1], got {confident_fraction}"
        )));
    }
    if !(t > 0.0 && t < 0.5) {
        return Err(Error::InvalidParameter(format!(
            "t must lie in (0, 0.5), got {t}"
        )));
    }
    let n = mask.len();
    let k = libm::round(confident_fraction * n as f64) as usize;
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    // Sample positives and negatives separately so the confident subset
    // keeps the mask's class ratio whenever f·P is a whole number.
    let (pos, neg): (Vec<usize>, Vec<usize>) = (0..n).partition(|&i| mask.as_slice()[i]);
    let kp = (libm::round(confident_fraction * pos.len() as f64) as usize)
        .min(pos.len())
        .min(k)
        .max(k.saturating_sub(neg.len()));
    let mut confident = vec![false; n];
    for (class, take) in [(&pos, kp), (&neg, k - kp)] {
        for i in rand::seq::index::sample(&mut rng, class.len(), take) {
            confident[class[i]] = true;
        }
    }
    let (lo, hi) = (t, 1.0 - t);
    let values = mask
        .as_slice()
        .iter()
        .zip(&confident)
        .map(|(&boundary, &sure)| match (sure, boundary) {
            (true, true) => 1.0 - t / 2.0,
            (true, false) => t / 2.0,
            (false, _) => loop {
                let u: f64 = Open01.sample(&mut rng);
                let v = lo + (hi - lo) * u;
                if v > lo && v < hi {
                    break v;
                }
            },
        })
        .collect();
    ProbabilityMap::new(mask.width(), mask.height(), values)
}
