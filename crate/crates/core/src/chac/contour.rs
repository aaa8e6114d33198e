use alloc::vec;
use alloc::vec::Vec;

use crate::raster::LabelMap;
use crate::{Error, Result};

/// Pixel coordinate `(row, col)`.
pub type Pixel = (usize, usize);

/// Closed outer boundary of a component; the closing edge back to the first
/// point is implicit.
pub type Contour = Vec<Pixel>;

/// Moore neighbourhood, counter-clockwise on screen starting from west.
const RING: [(isize, isize); 8] = [
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
    (-1, -1),
];

fn ring_index(dr: isize, dc: isize) -> usize {
    RING.iter()
        .position(|&d| d == (dr, dc))
        .expect("backtrack pixel must neighbour the current pixel")
}

/// Traces the outer boundary of `label` by Moore-neighbour tracing.
///
/// The contour starts at the component's topmost-leftmost pixel and runs
/// counter-clockwise on screen. Tracing stops when the first move out of the
/// start pixel is about to be repeated (Jacob's criterion).
pub fn trace_contour(labels: &LabelMap, label: u32) -> Result<Contour> {
    if label == 0 || label > labels.count() {
        return Err(Error::UnknownLabel(label));
    }
    let start = labels
        .grid()
        .as_slice()
        .iter()
        .position(|&l| l == label)
        .map(|i| (i / labels.width(), i % labels.width()))
        .ok_or(Error::UnknownLabel(label))?;
    Ok(trace_from(labels, label, start, usize::MAX))
}

/// Tracing from a known topmost-leftmost pixel. `max_steps` bounds the walk.
pub(crate) fn trace_from(labels: &LabelMap, label: u32, start: Pixel, max_steps: usize) -> Contour {
    let (h, w) = (labels.height() as isize, labels.width() as isize);
    let inside = |r: isize, c: isize| {
        r >= 0 && c >= 0 && r < h && c < w && labels.get(r as usize, c as usize) == label
    };

    // Moves one step from `cur` given the ring index of the backtrack pixel.
    let step = |cur: (isize, isize), back: usize| -> Option<((isize, isize), usize)> {
        for i in 1..=8 {
            let d = (back + i) % 8;
            let (nr, nc) = (cur.0 + RING[d].0, cur.1 + RING[d].1);
            if inside(nr, nc) {
                let prev = (back + i - 1) % 8;
                let (br, bc) = (cur.0 + RING[prev].0, cur.1 + RING[prev].1);
                return Some(((nr, nc), ring_index(br - nr, bc - nc)));
            }
        }
        None
    };

    let s = (start.0 as isize, start.1 as isize);
    // West of the topmost-leftmost pixel is never part of the component.
    let Some((first, mut back)) = step(s, 0) else {
        return vec![start];
    };
    let mut contour = vec![start];
    let mut cur = first;
    let mut steps = 0usize;
    loop {
        if cur == s {
            match step(cur, back) {
                Some((next, _)) if next == first => break,
                _ => {}
            }
        }
        contour.push((cur.0 as usize, cur.1 as usize));
        steps += 1;
        if steps >= max_steps {
            break;
        }
        let (next, nb) = step(cur, back).expect("a traced pixel always has a neighbour");
        cur = next;
        back = nb;
    }
    contour
}
