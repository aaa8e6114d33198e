//! Pixel classification metrics and the ground-truth-free confidence metrics.
//!
//! Certainty is the share of pixels predicted with a probability at most `t`
//! or at least `1 - t`. Abundance is the share of those confident pixels that
//! are confident positives. Neither needs an annotation.

use alloc::format;
use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Add, AddAssign};

use crate::raster::{BinaryMask, ProbabilityMap};
use crate::{Error, Result};

/// Threshold used to binarize predictions for classification metrics.
pub const DEFAULT_BINARIZE_THRESHOLD: f64 = 0.5;
/// Confidence threshold `t`.
pub const DEFAULT_CONFIDENCE_T: f64 = 0.15;
/// With 20 bins the default `t` falls on a bin edge.
pub const DEFAULT_BIN_COUNT: usize = 20;
/// Probability clamp applied inside the cross-entropy logarithms.
pub const BCE_EPSILON: f64 = 1e-7;

/// Pixel tallies of a binary comparison; the positive class is boundary.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct ConfusionCounts {
    pub tp: u64,
    pub fp: u64,
    #[cfg_attr(feature = "serde", serde(rename = "fn"))]
    pub fn_: u64,
    pub tn: u64,
}

impl ConfusionCounts {
    pub fn total(&self) -> u64 {
        self.tp + self.fp + self.fn_ + self.tn
    }

    pub fn precision(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fp)
    }

    pub fn recall(&self) -> Option<f64> {
        ratio(self.tp, self.tp + self.fn_)
    }

    /// Harmonic mean of precision and recall; absent when either is absent
    /// or both are zero.
    pub fn f1(&self) -> Option<f64> {
        let p = self.precision()?;
        let r = self.recall()?;
        if p + r == 0.0 {
            return None;
        }
        Some(2.0 * p * r / (p + r))
    }
}

impl Add for ConfusionCounts {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            tp: self.tp + o.tp,
            fp: self.fp + o.fp,
            fn_: self.fn_ + o.fn_,
            tn: self.tn + o.tn,
        }
    }
}

impl AddAssign for ConfusionCounts {
    fn add_assign(&mut self, o: Self) {
        *self = *self + o;
    }
}

impl core::iter::Sum for ConfusionCounts {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

fn ratio(num: u64, den: u64) -> Option<f64> {
    (den != 0).then(|| num as f64 / den as f64)
}

pub fn precision(c: &ConfusionCounts) -> Option<f64> {
    c.precision()
}

pub fn recall(c: &ConfusionCounts) -> Option<f64> {
    c.recall()
}

pub fn f1(c: &ConfusionCounts) -> Option<f64> {
    c.f1()
}

/// Marks pixels with `p >= threshold` as boundary.
pub fn binarize(map: &ProbabilityMap, threshold: f64) -> Result<BinaryMask> {
    if !(threshold > 0.0 && threshold < 1.0) {
        return Err(Error::InvalidParameter(format!(
            "binarization threshold must lie in (0, 1), got {threshold}"
        )));
    }
    Ok(map.grid().map(|&p| p >= threshold))
}

pub fn confusion(pred: &BinaryMask, gt: &BinaryMask) -> Result<ConfusionCounts> {
    pred.check_same_shape(gt)?;
    // Index by (pred, gt) to keep the inner loop branch-free.
    let mut tally = [0u64; 4];
    for (&p, &g) in pred.as_slice().iter().zip(gt.as_slice()) {
        tally[(usize::from(p) << 1) | usize::from(g)] += 1;
    }
    Ok(ConfusionCounts {
        tn: tally[0b00],
        fn_: tally[0b01],
        fp: tally[0b10],
        tp: tally[0b11],
    })
}

/// Confidence threshold `t`, restricted to `(0, 0.5)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ConfidenceConfig {
    t: f64,
}

impl ConfidenceConfig {
    pub fn new(t: f64) -> Result<Self> {
        if !(t > 0.0 && t < 0.5) {
            return Err(Error::InvalidParameter(format!(
                "confidence threshold must lie in (0, 0.5), got {t}"
            )));
        }
        Ok(Self { t })
    }

    pub fn t(&self) -> f64 {
        self.t
    }

    /// Lower edge of the confident-positive tail.
    pub fn upper(&self) -> f64 {
        1.0 - self.t
    }

    #[inline]
    pub fn is_confident(&self, p: f64) -> bool {
        p <= self.t || p >= self.upper()
    }

    #[inline]
    pub fn is_confident_positive(&self, p: f64) -> bool {
        p >= self.upper()
    }
}

impl Default for ConfidenceConfig {
    fn default() -> Self {
        Self {
            t: DEFAULT_CONFIDENCE_T,
        }
    }
}

/// Confident and confident-positive pixel counts.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ConfidenceTally {
    pub total: u64,
    pub confident: u64,
    pub confident_positive: u64,
}

impl ConfidenceTally {
    pub fn of(map: &ProbabilityMap, cfg: &ConfidenceConfig) -> Self {
        let mut tally = Self {
            total: map.len() as u64,
            ..Self::default()
        };
        for &p in map.values() {
            if cfg.is_confident_positive(p) {
                tally.confident += 1;
                tally.confident_positive += 1;
            } else if p <= cfg.t() {
                tally.confident += 1;
            }
        }
        tally
    }

    pub fn certainty(&self) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.confident as f64 / self.total as f64
    }

    pub fn abundance(&self) -> Option<f64> {
        ratio(self.confident_positive, self.confident)
    }
}

impl Add for ConfidenceTally {
    type Output = Self;
    fn add(self, o: Self) -> Self {
        Self {
            total: self.total + o.total,
            confident: self.confident + o.confident,
            confident_positive: self.confident_positive + o.confident_positive,
        }
    }
}

impl core::iter::Sum for ConfidenceTally {
    fn sum<I: Iterator<Item = Self>>(iter: I) -> Self {
        iter.fold(Self::default(), Add::add)
    }
}

pub fn certainty(map: &ProbabilityMap, cfg: &ConfidenceConfig) -> f64 {
    ConfidenceTally::of(map, cfg).certainty()
}

pub fn abundance(map: &ProbabilityMap, cfg: &ConfidenceConfig) -> Option<f64> {
    ConfidenceTally::of(map, cfg).abundance()
}

/// Uniform histogram over `[0, 1]`.
///
/// Bins are `[lo, hi)` except the last, which is closed at 1.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram {
    edges: Vec<f64>,
    counts: Vec<u64>,
}

impl Histogram {
    pub fn empty(bin_count: usize) -> Result<Self> {
        if bin_count < 2 {
            return Err(Error::InvalidParameter(format!(
                "histogram needs at least 2 bins, got {bin_count}"
            )));
        }
        let edges = (0..=bin_count)
            .map(|i| i as f64 / bin_count as f64)
            .collect();
        Ok(Self {
            edges,
            counts: vec![0; bin_count],
        })
    }

    pub fn bin_count(&self) -> usize {
        self.counts.len()
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Bin holding `p`, decided by comparison against the stored edges so
    /// that membership agrees exactly with `p >= edge` tests.
    pub fn bin_of(&self, p: f64) -> usize {
        let n = self.bin_count();
        let mut i = ((p * n as f64) as usize).min(n - 1);
        while i > 0 && p < self.edges[i] {
            i -= 1;
        }
        while i + 1 < n && p >= self.edges[i + 1] {
            i += 1;
        }
        i
    }

    pub fn add(&mut self, p: f64) {
        let i = self.bin_of(p);
        self.counts[i] += 1;
    }

    /// Merges another histogram with identical binning.
    pub fn merge(&mut self, other: &Histogram) -> Result<()> {
        if self.bin_count() != other.bin_count() {
            return Err(Error::Shape(format!(
                "cannot merge {}-bin and {}-bin histograms",
                self.bin_count(),
                other.bin_count()
            )));
        }
        for (a, b) in self.counts.iter_mut().zip(&other.counts) {
            *a += b;
        }
        Ok(())
    }

    fn edge_index(&self, value: f64) -> Option<usize> {
        self.edges.iter().position(|&e| e == value)
    }
}

pub fn histogram(map: &ProbabilityMap, bin_count: usize) -> Result<Histogram> {
    let mut h = Histogram::empty(bin_count)?;
    for &p in map.values() {
        h.add(p);
    }
    Ok(h)
}

/// Certainty and abundance from a histogram whose edges include `t` and `1 - t`.
///
/// Agrees with [`certainty`] and [`abundance`] for every pixel value except
/// one exactly equal to `t`, which the histogram files in the bin above.
pub fn confidence_from_histogram(
    h: &Histogram,
    cfg: &ConfidenceConfig,
) -> Result<(f64, Option<f64>)> {
    let (lo, hi) = match (h.edge_index(cfg.t()), h.edge_index(cfg.upper())) {
        (Some(lo), Some(hi)) => (lo, hi),
        _ => {
            return Err(Error::InvalidParameter(format!(
                "confidence threshold {} is not on a bin edge of a {}-bin histogram",
                cfg.t(),
                h.bin_count()
            )))
        }
    };
    let negatives: u64 = h.counts[..lo].iter().sum();
    let positives: u64 = h.counts[hi..].iter().sum();
    let tally = ConfidenceTally {
        total: h.total(),
        confident: negatives + positives,
        confident_positive: positives,
    };
    Ok((tally.certainty(), tally.abundance()))
}

/// Mean binary cross-entropy with probabilities clamped to `[ε, 1 − ε]`.
pub fn bce(map: &ProbabilityMap, gt: &BinaryMask) -> Result<f64> {
    map.grid().check_same_shape(gt)?;
    Ok(bce_sum(map.values(), gt.as_slice()) / map.len() as f64)
}

pub(crate) fn bce_sum(probs: &[f64], gt: &[bool]) -> f64 {
    probs
        .iter()
        .zip(gt)
        .map(|(&p, &y)| {
            let pc = p.clamp(BCE_EPSILON, 1.0 - BCE_EPSILON);
            if y {
                -libm::log(pc)
            } else {
                -libm::log(1.0 - pc)
            }
        })
        .sum()
}

/// Metric values for one image or one pooled set; `None` means undefined.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct MetricBundle {
    #[cfg_attr(
        feature = "serde",
        serde(default, deserialize_with = "crate::xval::na::opt_f64")
    )]
    pub precision: Option<f64>,
    #[cfg_attr(
        feature = "serde",
        serde(default, deserialize_with = "crate::xval::na::opt_f64")
    )]
    pub recall: Option<f64>,
    #[cfg_attr(
        feature = "serde",
        serde(default, deserialize_with = "crate::xval::na::opt_f64")
    )]
    pub f1: Option<f64>,
    #[cfg_attr(
        feature = "serde",
        serde(default, deserialize_with = "crate::xval::na::opt_f64")
    )]
    pub certainty: Option<f64>,
    #[cfg_attr(
        feature = "serde",
        serde(default, deserialize_with = "crate::xval::na::opt_f64")
    )]
    pub abundance: Option<f64>,
    #[cfg_attr(
        feature = "serde",
        serde(default, deserialize_with = "crate::xval::na::opt_u64")
    )]
    pub grain_count: Option<u64>,
}

impl MetricBundle {
    pub fn from_parts(counts: &ConfusionCounts, confidence: &ConfidenceTally) -> Self {
        Self {
            precision: counts.precision(),
            recall: counts.recall(),
            f1: counts.f1(),
            certainty: (confidence.total > 0).then(|| confidence.certainty()),
            abundance: confidence.abundance(),
            grain_count: None,
        }
    }

    /// Evaluates a raw prediction against its annotation.
    pub fn evaluate(
        pred: &ProbabilityMap,
        gt: &BinaryMask,
        threshold: f64,
        cfg: &ConfidenceConfig,
    ) -> Result<Self> {
        let counts = confusion(&binarize(pred, threshold)?, gt)?;
        Ok(Self::from_parts(&counts, &ConfidenceTally::of(pred, cfg)))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Grid;

    fn map(values: &[f64]) -> ProbabilityMap {
        ProbabilityMap::new(values.len(), 1, values.to_vec()).unwrap()
    }

    fn mask(values: &[bool]) -> BinaryMask {
        Grid::from_vec(values.len(), 1, values.to_vec()).unwrap()
    }

    fn counts(tp: u64, fp: u64, fn_: u64) -> ConfusionCounts {
        ConfusionCounts { tp, fp, fn_, tn: 0 }
    }

    #[test]
    fn binarize_ties_are_positive() {
        let m = ProbabilityMap::filled(3, 3, 0.5).unwrap();
        assert_eq!(binarize(&m, 0.5).unwrap().count_true(), 9);
        let b = binarize(&map(&[0.2, 0.5, 0.8]), 0.5).unwrap();
        assert_eq!(b.as_slice(), &[false, true, true]);
        assert!(binarize(&m, 0.0).is_err());
        assert!(binarize(&m, 1.0).is_err());
    }

    #[test]
    fn confusion_examples() {
        let t = mask(&[true; 4]);
        let f = mask(&[false; 4]);
        assert_eq!(
            confusion(&t, &t).unwrap(),
            ConfusionCounts {
                tp: 4,
                ..Default::default()
            }
        );
        assert_eq!(
            confusion(&t, &f).unwrap(),
            ConfusionCounts {
                fp: 4,
                ..Default::default()
            }
        );
        let c = confusion(
            &mask(&[true, true, false, false]),
            &mask(&[true, false, true, false]),
        )
        .unwrap();
        assert_eq!(
            c,
            ConfusionCounts {
                tp: 1,
                fp: 1,
                fn_: 1,
                tn: 1
            }
        );
        assert!(confusion(&t, &mask(&[true; 3])).is_err());
    }

    #[test]
    fn classification_metrics() {
        let perfect = counts(4, 0, 0);
        assert_eq!(perfect.precision(), Some(1.0));
        assert_eq!(perfect.recall(), Some(1.0));
        assert_eq!(perfect.f1(), Some(1.0));

        let c = counts(2, 1, 1);
        for v in [c.precision(), c.recall(), c.f1()] {
            assert!((v.unwrap() - 2.0 / 3.0).abs() < 1e-15);
        }

        let empty = counts(0, 0, 5);
        assert_eq!(empty.precision(), None);
        assert_eq!(empty.recall(), Some(0.0));
        assert_eq!(empty.f1(), None);
    }

    #[test]
    fn certainty_and_abundance() {
        let cfg = ConfidenceConfig::new(0.15).unwrap();
        let m = map(&[0.0, 0.05, 0.5, 0.95]);
        assert_eq!(certainty(&m, &cfg), 0.75);
        assert_eq!(abundance(&m, &cfg), Some(1.0 / 3.0));

        let half = ProbabilityMap::filled(4, 4, 0.5).unwrap();
        assert_eq!(certainty(&half, &ConfidenceConfig::new(0.49).unwrap()), 0.0);
        assert_eq!(abundance(&half, &cfg), None);

        let ones = ProbabilityMap::filled(4, 4, 1.0).unwrap();
        assert_eq!(certainty(&ones, &cfg), 1.0);

        let hi = ProbabilityMap::filled(4, 4, 0.95).unwrap();
        assert_eq!(abundance(&hi, &cfg), Some(1.0));
    }

    #[test]
    fn confidence_config_range() {
        assert!(ConfidenceConfig::new(0.0).is_err());
        assert!(ConfidenceConfig::new(0.5).is_err());
        assert!(ConfidenceConfig::new(0.15).is_ok());
    }

    #[test]
    fn histogram_bins() {
        let zeros = ProbabilityMap::filled(5, 2, 0.0).unwrap();
        let h = histogram(&zeros, 10).unwrap();
        assert_eq!(h.counts()[0], 10);
        assert_eq!(h.counts()[1..].iter().sum::<u64>(), 0);

        let h = histogram(&map(&[1.0]), 10).unwrap();
        assert_eq!(h.counts()[9], 1);

        let h = histogram(&map(&[0.04, 0.14, 0.5, 0.96]), 20).unwrap();
        let occupied: Vec<usize> = (0..20).filter(|&i| h.counts()[i] > 0).collect();
        assert_eq!(occupied, [0, 2, 10, 19]);

        assert!(histogram(&zeros, 1).is_err());
        assert_eq!(h.edges().len(), 21);
        assert_eq!(h.edges()[0], 0.0);
        assert_eq!(h.edges()[20], 1.0);
    }

    #[test]
    fn histogram_route() {
        let cfg = ConfidenceConfig::new(0.15).unwrap();
        let m = map(&[0.0, 0.05, 0.5, 0.95, 0.86, 0.849, 0.1499]);
        let h = histogram(&m, 20).unwrap();
        let (c, a) = confidence_from_histogram(&h, &cfg).unwrap();
        assert_eq!(c, certainty(&m, &cfg));
        assert_eq!(a, abundance(&m, &cfg));

        let half = ProbabilityMap::filled(2, 2, 0.5).unwrap();
        let (c, a) = confidence_from_histogram(&histogram(&half, 20).unwrap(), &cfg).unwrap();
        assert_eq!((c, a), (0.0, None));

        let off = ConfidenceConfig::new(0.13).unwrap();
        assert!(confidence_from_histogram(&h, &off).is_err());
    }

    #[test]
    fn bce_values() {
        let gt = mask(&[true, false, true, false]);
        let perfect = map(&[1.0, 0.0, 1.0, 0.0]);
        let eps = BCE_EPSILON;
        let v = bce(&perfect, &gt).unwrap();
        assert!(v >= 0.0 && v <= 1.1 * eps * libm::fabs(libm::log(eps)));

        let half = map(&[0.5; 4]);
        assert!((bce(&half, &gt).unwrap() - core::f64::consts::LN_2).abs() < 1e-15);

        let single = bce(&map(&[0.25]), &mask(&[true])).unwrap();
        assert!((single - libm::log(4.0)).abs() < 1e-15);
        assert!((single - 1.386294).abs() < 1e-6);

        assert!(bce(&half, &mask(&[true])).is_err());
    }
}
