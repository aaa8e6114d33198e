use alloc::vec;
use alloc::vec::Vec;

use crate::raster::{BinaryMask, Grid, LabelMap};

/// Pixel adjacency used when grouping pixels into components.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
#[cfg_attr(feature = "serde", serde(try_from = "u8", into = "u8"))]
pub enum Connectivity {
    #[default]
    Four,
    Eight,
}

impl TryFrom<u8> for Connectivity {
    type Error = alloc::string::String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            4 => Ok(Self::Four),
            8 => Ok(Self::Eight),
            other => Err(alloc::format!("connectivity must be 4 or 8, got {other}")),
        }
    }
}

impl From<Connectivity> for u8 {
    fn from(c: Connectivity) -> u8 {
        match c {
            Connectivity::Four => 4,
            Connectivity::Eight => 8,
        }
    }
}

const FOUR: [(isize, isize); 4] = [(-1, 0), (0, -1), (0, 1), (1, 0)];
const EIGHT: [(isize, isize); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, -1),
    (0, 1),
    (1, -1),
    (1, 0),
    (1, 1),
];

impl Connectivity {
    fn offsets(self) -> &'static [(isize, isize)] {
        match self {
            Self::Four => &FOUR,
            Self::Eight => &EIGHT,
        }
    }
}

/// Labels the connected components of `true` pixels.
///
/// Labels are assigned in raster order of each component's first pixel, so
/// label 1 holds the topmost-leftmost foreground pixel.
pub fn connected_components(mask: &BinaryMask, connectivity: Connectivity) -> LabelMap {
    let (w, h) = (mask.width(), mask.height());
    let mut labels = Grid::filled(w, h, 0u32);
    let mut next = 0u32;
    let mut stack: Vec<(usize, usize)> = vec![];
    for r in 0..h {
        for c in 0..w {
            if !*mask.get(r, c) || *labels.get(r, c) != 0 {
                continue;
            }
            next += 1;
            labels.set(r, c, next);
            stack.push((r, c));
            while let Some((pr, pc)) = stack.pop() {
                for &(dr, dc) in connectivity.offsets() {
                    let (Some(nr), Some(nc)) =
                        (pr.checked_add_signed(dr), pc.checked_add_signed(dc))
                    else {
                        continue;
                    };
                    if nr < h && nc < w && *mask.get(nr, nc) && *labels.get(nr, nc) == 0 {
                        labels.set(nr, nc, next);
                        stack.push((nr, nc));
                    }
                }
            }
        }
    }
    LabelMap::from_parts(labels, next)
}
