//! Confusion Matrix Color Mapping: one color per pixel classification outcome.

use alloc::format;

use crate::metrics::ConfusionCounts;
use crate::raster::{BinaryMask, Grid, ProbabilityMap, Rgb, RgbImage};
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Cm2Palette {
    tp: Rgb,
    fp: Rgb,
    fn_: Rgb,
    tn: Rgb,
}

impl Default for Cm2Palette {
    /// Green true positives, blue false positives, red false negatives and
    /// white true negatives.
    fn default() -> Self {
        Self {
            tp: [0, 255, 0],
            fp: [0, 0, 255],
            fn_: [255, 0, 0],
            tn: [255, 255, 255],
        }
    }
}

impl Cm2Palette {
    pub fn new(tp: Rgb, fp: Rgb, fn_: Rgb, tn: Rgb) -> Result<Self> {
        let colors = [tp, fp, fn_, tn];
        for i in 0..4 {
            for j in i + 1..4 {
                if colors[i] == colors[j] {
                    return Err(Error::InvalidParameter(format!(
                        "palette colors must be distinct, {:?} is repeated",
                        colors[i]
                    )));
                }
            }
        }
        Ok(Self { tp, fp, fn_, tn })
    }

    pub fn tp(&self) -> Rgb {
        self.tp
    }
    pub fn fp(&self) -> Rgb {
        self.fp
    }
    pub fn fn_(&self) -> Rgb {
        self.fn_
    }
    pub fn tn(&self) -> Rgb {
        self.tn
    }

    #[inline]
    pub fn color(&self, pred: bool, gt: bool) -> Rgb {
        match (pred, gt) {
            (true, true) => self.tp,
            (true, false) => self.fp,
            (false, true) => self.fn_,
            (false, false) => self.tn,
        }
    }
}

pub fn render_cm2(pred: &BinaryMask, gt: &BinaryMask, palette: &Cm2Palette) -> Result<RgbImage> {
    pred.check_same_shape(gt)?;
    let data = pred
        .as_slice()
        .iter()
        .zip(gt.as_slice())
        .map(|(&p, &g)| palette.color(p, g))
        .collect();
    Grid::from_vec(pred.width(), pred.height(), data)
}

/// Counts palette colors back into confusion tallies.
pub fn cm2_census(img: &RgbImage, palette: &Cm2Palette) -> Result<ConfusionCounts> {
    let mut c = ConfusionCounts::default();
    for (index, &px) in img.as_slice().iter().enumerate() {
        if px == palette.tp {
            c.tp += 1;
        } else if px == palette.fp {
            c.fp += 1;
        } else if px == palette.fn_ {
            c.fn_ += 1;
        } else if px == palette.tn {
            c.tn += 1;
        } else {
            return Err(Error::NotInPalette {
                index,
                r: px[0],
                g: px[1],
                b: px[2],
            });
        }
    }
    Ok(c)
}

/// Averages each overlay pixel with a grayscale backdrop, for inspection
/// only; the result no longer round-trips through [`cm2_census`].
pub fn blend_with_gray(overlay: &RgbImage, backdrop: &ProbabilityMap) -> Result<RgbImage> {
    overlay.check_same_shape(backdrop.grid())?;
    let data = overlay
        .as_slice()
        .iter()
        .zip(backdrop.values())
        .map(|(px, &g)| {
            let g = libm::round(g * 255.0) as u16;
            px.map(|ch| (ch as u16 + g).div_ceil(2) as u8)
        })
        .collect();
    Grid::from_vec(overlay.width(), overlay.height(), data)
}
