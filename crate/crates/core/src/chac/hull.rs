use alloc::vec::Vec;

use super::contour::Pixel;

/// Cross product of `a - o` and `b - o` in screen orientation, with `x = col`
/// and `y` pointing up, so a positive value is a counter-clockwise turn.
fn cross(o: Pixel, a: Pixel, b: Pixel) -> i64 {
    let (ox, oy) = (o.1 as i64, -(o.0 as i64));
    let (ax, ay) = (a.1 as i64 - ox, -(a.0 as i64) - oy);
    let (bx, by) = (b.1 as i64 - ox, -(b.0 as i64) - oy);
    ax * by - ay * bx
}

/// Convex hull by Andrew's monotone chain, counter-clockwise on screen.
///
/// Collinear boundary points are dropped; a fully collinear input yields its
/// two extreme points.
pub fn convex_hull(points: &[Pixel]) -> Vec<Pixel> {
    let mut pts: Vec<Pixel> = points.to_vec();
    pts.sort_unstable_by_key(|&(r, c)| (c, core::cmp::Reverse(r)));
    pts.dedup();
    if pts.len() < 3 {
        return pts;
    }
    let mut hull: Vec<Pixel> = Vec::with_capacity(pts.len() * 2);
    for &p in &pts {
        while hull.len() >= 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    let lower = hull.len() + 1;
    for &p in pts.iter().rev().skip(1) {
        while hull.len() >= lower && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
            hull.pop();
        }
        hull.push(p);
    }
    hull.pop();
    hull
}

/// Shoelace area, positive for counter-clockwise (on screen) vertex order.
pub fn signed_area(vertices: &[Pixel]) -> f64 {
    if vertices.len() < 3 {
        return 0.0;
    }
    let mut twice = 0i64;
    for i in 0..vertices.len() {
        let (r0, c0) = vertices[i];
        let (r1, c1) = vertices[(i + 1) % vertices.len()];
        // x = col, y = -row
        twice += (c0 as i64) * -(r1 as i64) - (c1 as i64) * -(r0 as i64);
    }
    twice as f64 / 2.0
}

/// Unsigned shoelace area; zero for fewer than three vertices.
pub fn polygon_area(vertices: &[Pixel]) -> f64 {
    libm::fabs(signed_area(vertices))
}
