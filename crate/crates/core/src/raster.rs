//! Raster containers and the sample quantization rules shared by every stage.
//!
//! All rasters are row-major with the origin at the top-left corner and are
//! indexed as `(row, col)`.

use alloc::vec;
use alloc::vec::Vec;

use crate::{Error, Result};

/// A dense row-major raster.
#[derive(Debug, Clone, PartialEq)]
pub struct Grid<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T> Grid<T> {
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Result<Self> {
        let expected = width
            .checked_mul(height)
            .ok_or(Error::EmptyImage { width, height })?;
        if data.len() != expected {
            return Err(Error::ValueCount {
                expected,
                found: data.len(),
            });
        }
        Ok(Self {
            width,
            height,
            data,
        })
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for r in 0..height {
            for c in 0..width {
                data.push(f(r, c));
            }
        }
        Self {
            width,
            height,
            data,
        }
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.width
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.height
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.data.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    #[inline]
    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<T> {
        self.data
    }

    #[inline]
    pub fn index_of(&self, row: usize, col: usize) -> usize {
        debug_assert!(row < self.height && col < self.width);
        row * self.width + col
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> &T {
        &self.data[self.index_of(row, col)]
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: T) {
        let i = self.index_of(row, col);
        self.data[i] = value;
    }

    pub fn same_shape<U>(&self, other: &Grid<U>) -> bool {
        self.width == other.width && self.height == other.height
    }

    pub(crate) fn check_same_shape<U>(&self, other: &Grid<U>) -> Result<()> {
        if self.same_shape(other) {
            Ok(())
        } else {
            Err(Error::DimensionMismatch {
                left_width: self.width,
                left_height: self.height,
                right_width: other.width,
                right_height: other.height,
            })
        }
    }

    pub fn map<U>(&self, f: impl FnMut(&T) -> U) -> Grid<U> {
        Grid {
            width: self.width,
            height: self.height,
            data: self.data.iter().map(f).collect(),
        }
    }

    /// Copy of the `height`×`width` window whose top-left corner is `(row, col)`.
    pub fn crop(&self, row: usize, col: usize, width: usize, height: usize) -> Grid<T>
    where
        T: Clone,
    {
        assert!(row + height <= self.height && col + width <= self.width);
        Grid::from_fn(width, height, |r, c| self.get(row + r, col + c).clone())
    }
}

impl<T: Clone> Grid<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Self {
            width,
            height,
            data: vec![value; width * height],
        }
    }
}

/// Binary raster; `true` marks a grain-boundary pixel.
pub type BinaryMask = Grid<bool>;

/// 8-bit RGB triplet.
pub type Rgb = [u8; 3];

pub type RgbImage = Grid<Rgb>;

impl BinaryMask {
    pub fn count_true(&self) -> usize {
        self.as_slice().iter().filter(|&&b| b).count()
    }

    pub fn inverted(&self) -> BinaryMask {
        self.map(|&b| !b)
    }

    /// Fraction of pixels marked `true`.
    pub fn positive_fraction(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        self.count_true() as f64 / self.len() as f64
    }
}

/// Per-pixel class probabilities in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct ProbabilityMap(Grid<f64>);

impl ProbabilityMap {
    pub fn new(width: usize, height: usize, values: Vec<f64>) -> Result<Self> {
        Self::from_grid(Grid::from_vec(width, height, values)?)
    }

    pub fn from_grid(grid: Grid<f64>) -> Result<Self> {
        if grid.width() == 0 || grid.height() == 0 {
            return Err(Error::EmptyImage {
                width: grid.width(),
                height: grid.height(),
            });
        }
        if let Some((index, &value)) = grid
            .as_slice()
            .iter()
            .enumerate()
            .find(|(_, v)| !(0.0..=1.0).contains(*v))
        {
            return Err(Error::ProbabilityRange { index, value });
        }
        Ok(Self(grid))
    }

    pub fn filled(width: usize, height: usize, value: f64) -> Result<Self> {
        Self::from_grid(Grid::filled(width, height, value))
    }

    #[inline]
    pub fn width(&self) -> usize {
        self.0.width()
    }

    #[inline]
    pub fn height(&self) -> usize {
        self.0.height()
    }

    #[inline]
    pub fn len(&self) -> usize {
        self.0.len()
    }

    #[inline]
    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    #[inline]
    pub fn values(&self) -> &[f64] {
        self.0.as_slice()
    }

    #[inline]
    pub fn grid(&self) -> &Grid<f64> {
        &self.0
    }

    pub fn into_grid(self) -> Grid<f64> {
        self.0
    }

    /// Rearranges pixels without changing their values; the range invariant
    /// is preserved by construction.
    pub(crate) fn rearranged(&self, f: impl FnOnce(&Grid<f64>) -> Grid<f64>) -> ProbabilityMap {
        ProbabilityMap(f(&self.0))
    }
}

/// Connected-component labels; 0 is background and components are `1..=count`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabelMap {
    labels: Grid<u32>,
    count: u32,
}

impl LabelMap {
    /// Wraps a label raster, checking that the labels are exactly `{0} ∪ 1..=K`.
    pub fn new(labels: Grid<u32>) -> Result<Self> {
        let max = labels.as_slice().iter().copied().max().unwrap_or(0);
        let mut seen = vec![false; max as usize + 1];
        for &l in labels.as_slice() {
            seen[l as usize] = true;
        }
        if seen.iter().skip(1).any(|s| !s) {
            return Err(Error::InvalidParameter(alloc::format!(
                "labels must be dense in 1..={max}"
            )));
        }
        Ok(Self { labels, count: max })
    }

    pub(crate) fn from_parts(labels: Grid<u32>, count: u32) -> Self {
        Self { labels, count }
    }

    /// Number of components `K`.
    pub fn count(&self) -> u32 {
        self.count
    }

    pub fn grid(&self) -> &Grid<u32> {
        &self.labels
    }

    pub fn width(&self) -> usize {
        self.labels.width()
    }

    pub fn height(&self) -> usize {
        self.labels.height()
    }

    #[inline]
    pub fn get(&self, row: usize, col: usize) -> u32 {
        *self.labels.get(row, col)
    }

    /// Pixel count of every label, indexed by label (entry 0 is background).
    pub fn areas(&self) -> Vec<usize> {
        let mut areas = vec![0usize; self.count as usize + 1];
        for &l in self.labels.as_slice() {
            areas[l as usize] += 1;
        }
        areas
    }
}

/// Bit depth of stored grayscale samples.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub enum SampleDepth {
    Eight,
    Sixteen,
}

impl SampleDepth {
    pub fn from_bits(bits: u8) -> Result<Self> {
        match bits {
            8 => Ok(Self::Eight),
            16 => Ok(Self::Sixteen),
            other => Err(Error::SampleDepth(other)),
        }
    }

    pub fn bits(self) -> u8 {
        match self {
            Self::Eight => 8,
            Self::Sixteen => 16,
        }
    }

    /// Full-scale sample value.
    pub fn max_sample(self) -> u16 {
        match self {
            Self::Eight => u8::MAX as u16,
            Self::Sixteen => u16::MAX,
        }
    }

    /// Worst-case round-trip error of [`quantize`] followed by [`dequantize`].
    pub fn max_roundtrip_error(self) -> f64 {
        0.5 / self.max_sample() as f64
    }
}

/// Nearest stored sample for a probability.
pub fn quantize(p: f64, depth: SampleDepth) -> u16 {
    let max = depth.max_sample() as f64;
    libm::round(p.clamp(0.0, 1.0) * max) as u16
}

/// Linear decoding `s / s_max`.
pub fn dequantize(sample: u16, depth: SampleDepth) -> f64 {
    let max = depth.max_sample();
    (sample.min(max)) as f64 / max as f64
}

/// Decodes grayscale samples into a probability map.
pub fn probability_from_samples(
    width: usize,
    height: usize,
    samples: &[u16],
    depth: SampleDepth,
) -> Result<ProbabilityMap> {
    let max = depth.max_sample();
    if let Some((index, &s)) = samples.iter().enumerate().find(|(_, &s)| s > max) {
        return Err(Error::InvalidParameter(alloc::format!(
            "sample {s} at index {index} exceeds {}-bit range",
            depth.bits()
        )));
    }
    let values = samples.iter().map(|&s| dequantize(s, depth)).collect();
    ProbabilityMap::new(width, height, values)
}

/// Encodes a probability map as grayscale samples.
pub fn probability_to_samples(map: &ProbabilityMap, depth: SampleDepth) -> Vec<u16> {
    map.values().iter().map(|&p| quantize(p, depth)).collect()
}

/// Decodes 8-bit samples into a mask.
///
/// Strict decoding accepts only 0 and 255. Lenient decoding thresholds at 128.
pub fn mask_from_samples(
    width: usize,
    height: usize,
    samples: &[u8],
    lenient: bool,
) -> Result<BinaryMask> {
    let values = if lenient {
        samples.iter().map(|&s| s >= 128).collect()
    } else {
        samples
            .iter()
            .enumerate()
            .map(|(index, &s)| match s {
                0 => Ok(false),
                255 => Ok(true),
                other => Err(Error::NonBinarySample {
                    index,
                    value: other as u16,
                }),
            })
            .collect::<Result<Vec<_>>>()?
    };
    Grid::from_vec(width, height, values)
}

pub fn mask_to_samples(mask: &BinaryMask) -> Vec<u8> {
    mask.as_slice()
        .iter()
        .map(|&b| if b { 255 } else { 0 })
        .collect()
}
