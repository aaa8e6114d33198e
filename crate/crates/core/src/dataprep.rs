//! Dataset preparation: quartering, dihedral augmentation and k-fold splits.
//!
//! Folds are drawn over quarter images, so the four quarters of one source
//! image can land in different folds. Callers that need source-level
//! isolation should group by [`ImagePair::origin_id`] before splitting.

use alloc::collections::BTreeSet;
use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::raster::{Grid, ProbabilityMap};
use crate::{Error, Result};

/// Current manifest schema version.
pub const MANIFEST_VERSION: u32 = 1;

/// Number of images produced by [`augment_d4`].
pub const D4_ORDER: usize = 8;

/// Splits an image into four equal tiles ordered TL, TR, BL, BR.
pub fn quarter<T: Clone>(image: &Grid<T>) -> Result<[Grid<T>; 4]> {
    let (w, h) = (image.width(), image.height());
    if w % 2 != 0 || h % 2 != 0 || w == 0 || h == 0 {
        return Err(Error::OddDimensions {
            width: w,
            height: h,
        });
    }
    let (hw, hh) = (w / 2, h / 2);
    Ok([
        image.crop(0, 0, hw, hh),
        image.crop(0, hw, hw, hh),
        image.crop(hh, 0, hw, hh),
        image.crop(hh, hw, hw, hh),
    ])
}

/// Inverse of [`quarter`].
pub fn reassemble<T: Clone>(tiles: &[Grid<T>; 4]) -> Result<Grid<T>> {
    let (hw, hh) = (tiles[0].width(), tiles[0].height());
    if tiles.iter().any(|t| t.width() != hw || t.height() != hh) {
        return Err(Error::Shape("quarter tiles differ in size".into()));
    }
    Ok(Grid::from_fn(hw * 2, hh * 2, |r, c| {
        let tile = &tiles[(r / hh) * 2 + c / hw];
        tile.get(r % hh, c % hw).clone()
    }))
}

pub fn quarter_probability(map: &ProbabilityMap) -> Result<[ProbabilityMap; 4]> {
    let [a, b, c, d] = quarter(map.grid())?;
    let wrap = |g: Grid<f64>| map.rearranged(|_| g);
    Ok([wrap(a), wrap(b), wrap(c), wrap(d)])
}

/// The eight symmetries of the square.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum D4 {
    Identity,
    /// Quarter turn clockwise.
    Rot90,
    Rot180,
    Rot270,
    /// Mirror across the vertical axis (left-right swap).
    FlipHorizontal,
    /// Mirror across the horizontal axis (top-bottom swap).
    FlipVertical,
    /// Mirror across the main diagonal.
    Transpose,
    /// Mirror across the anti-diagonal.
    AntiTranspose,
}

impl D4 {
    pub const ALL: [D4; D4_ORDER] = [
        D4::Identity,
        D4::Rot90,
        D4::Rot180,
        D4::Rot270,
        D4::FlipHorizontal,
        D4::FlipVertical,
        D4::Transpose,
        D4::AntiTranspose,
    ];

    /// Source pixel for output pixel `(r, c)` of an `n`×`n` image.
    #[inline]
    fn source(self, n: usize, r: usize, c: usize) -> (usize, usize) {
        let m = n - 1;
        match self {
            D4::Identity => (r, c),
            D4::Rot90 => (m - c, r),
            D4::Rot180 => (m - r, m - c),
            D4::Rot270 => (c, m - r),
            D4::FlipHorizontal => (r, m - c),
            D4::FlipVertical => (m - r, c),
            D4::Transpose => (c, r),
            D4::AntiTranspose => (m - c, m - r),
        }
    }

    pub fn apply<T: Clone>(self, image: &Grid<T>) -> Result<Grid<T>> {
        let n = image.width();
        if n != image.height() {
            return Err(Error::NotSquare {
                width: image.width(),
                height: image.height(),
            });
        }
        Ok(Grid::from_fn(n, n, |r, c| {
            let (sr, sc) = self.source(n, r, c);
            image.get(sr, sc).clone()
        }))
    }
}

/// All eight dihedral images of a square raster, in [`D4::ALL`] order.
///
/// Apply the same call to an image and its annotation to keep them paired.
pub fn augment_d4<T: Clone>(image: &Grid<T>) -> Result<Vec<Grid<T>>> {
    D4::ALL.iter().map(|t| t.apply(image)).collect()
}

pub fn augment_d4_probability(map: &ProbabilityMap) -> Result<Vec<ProbabilityMap>> {
    Ok(augment_d4(map.grid())?
        .into_iter()
        .map(|g| map.rearranged(|_| g))
        .collect())
}

/// One cross-validation fold over pair indices.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct FoldSpec {
    pub fold_index: usize,
    pub validation_ids: Vec<usize>,
    /// Complement of `validation_ids`; derived, never stored.
    #[cfg_attr(feature = "serde", serde(skip))]
    pub training_ids: Vec<usize>,
}

/// Shuffles `0..pair_count` with `rng_seed` and cuts it into `k` contiguous folds.
///
/// The first `pair_count % k` folds receive one extra pair. Ids inside each
/// fold are sorted.
pub fn build_folds(pair_count: usize, k: usize, rng_seed: u64) -> Result<Vec<FoldSpec>> {
    if k < 2 {
        return Err(Error::InvalidParameter(format!(
            "k must be at least 2 (got {k})"
        )));
    }
    if pair_count < k {
        return Err(Error::InvalidParameter(format!(
            "cannot split {pair_count} pairs into {k} folds"
        )));
    }
    let mut order: Vec<usize> = (0..pair_count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(rng_seed);
    order.shuffle(&mut rng);

    let base = pair_count / k;
    let extra = pair_count % k;
    let mut folds = Vec::with_capacity(k);
    let mut start = 0;
    for fold_index in 0..k {
        let size = base + usize::from(fold_index < extra);
        let mut validation_ids = order[start..start + size].to_vec();
        validation_ids.sort_unstable();
        start += size;
        folds.push(FoldSpec {
            fold_index,
            training_ids: complement(&validation_ids, pair_count),
            validation_ids,
        });
    }
    Ok(folds)
}

fn complement(ids: &[usize], pair_count: usize) -> Vec<usize> {
    let set: BTreeSet<usize> = ids.iter().copied().collect();
    (0..pair_count).filter(|i| !set.contains(i)).collect()
}

/// An image and its annotation.
#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ImagePair {
    pub image: String,
    pub annotation: String,
    pub origin_id: String,
    /// Set iff the pair was produced by quartering (0 = TL .. 3 = BR).
    pub quadrant: Option<u8>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(rename_all = "snake_case"))]
pub enum Augmentation {
    None,
    #[default]
    D4,
}

impl Augmentation {
    pub fn multiplier(self) -> usize {
        match self {
            Augmentation::None => 1,
            Augmentation::D4 => D4_ORDER,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct DatasetManifest {
    pub version: u32,
    pub rng_seed: u64,
    pub k: usize,
    #[cfg_attr(feature = "serde", serde(default))]
    pub augmentation: Augmentation,
    pub pairs: Vec<ImagePair>,
    pub folds: Vec<FoldSpec>,
}

impl DatasetManifest {
    pub fn new(
        pairs: Vec<ImagePair>,
        k: usize,
        rng_seed: u64,
        augmentation: Augmentation,
    ) -> Result<Self> {
        let folds = build_folds(pairs.len(), k, rng_seed)?;
        Ok(Self {
            version: MANIFEST_VERSION,
            rng_seed,
            k,
            augmentation,
            pairs,
            folds,
        })
    }

    /// Checks every structural invariant and re-derives training ids.
    ///
    /// File existence is the caller's concern.
    pub fn validate(&mut self) -> Result<()> {
        let bad = |msg: String| Err(Error::Manifest(msg));
        if self.version != MANIFEST_VERSION {
            return bad(format!("unsupported version {}", self.version));
        }
        if self.k < 2 {
            return bad(format!("k must be at least 2 (got {})", self.k));
        }
        if self.folds.len() != self.k {
            return bad(format!(
                "expected {} folds, found {}",
                self.k,
                self.folds.len()
            ));
        }
        let n = self.pairs.len();
        if n < self.k {
            return bad(format!("{} pairs cannot fill {} folds", n, self.k));
        }
        for (i, p) in self.pairs.iter().enumerate() {
            if matches!(p.quadrant, Some(q) if q > 3) {
                return bad(format!("pair {i} has quadrant outside 0..=3"));
            }
        }
        let mut owner: Vec<Option<usize>> = alloc::vec![None; n];
        for (pos, fold) in self.folds.iter().enumerate() {
            if fold.fold_index != pos {
                return bad(format!(
                    "fold at position {pos} has fold_index {}",
                    fold.fold_index
                ));
            }
            for &id in &fold.validation_ids {
                if id >= n {
                    return bad(format!("fold {pos} references unknown pair {id}"));
                }
                if let Some(prev) = owner[id] {
                    return bad(format!(
                        "pair {id} appears in validation sets of folds {prev} and {pos}"
                    ));
                }
                owner[id] = Some(pos);
            }
        }
        if let Some(id) = owner.iter().position(Option::is_none) {
            return bad(format!("pair {id} is in no validation set"));
        }
        let sizes = self.folds.iter().map(|f| f.validation_ids.len());
        let (min, max) = sizes.fold((usize::MAX, 0), |(lo, hi), s| (lo.min(s), hi.max(s)));
        if max - min > 1 {
            return bad(format!("fold sizes range from {min} to {max}"));
        }
        for fold in &mut self.folds {
            fold.validation_ids.sort_unstable();
            fold.training_ids = complement(&fold.validation_ids, n);
        }
        Ok(())
    }

    /// Training images seen by `fold`'s model after augmentation.
    pub fn training_image_count(&self, fold: usize) -> usize {
        let f = &self.folds[fold];
        (self.pairs.len() - f.validation_ids.len()) * self.augmentation.multiplier()
    }
}
