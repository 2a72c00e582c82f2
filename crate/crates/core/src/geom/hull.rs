#[allow(unused_imports)]
use num_traits::Float;

use alloc::vec::Vec;

/// A point in continuous pixel coordinates.
pub type Point = (f64, f64);

fn cross(o: Point, a: Point, b: Point) -> f64 {
    (a.0 - o.0) * (b.1 - o.1) - (a.1 - o.1) * (b.0 - o.0)
}

/// Convex hull by Andrew's monotone chain. Counter-clockwise (y-up), no collinear points.
pub fn convex_hull(points: &[Point]) -> Vec<Point> {
    let mut pts: Vec<Point> = points.to_vec();
    pts.sort_by(|a, b| a.partial_cmp(b).unwrap_or(core::cmp::Ordering::Equal));
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut lower: Vec<Point> = Vec::new();
    for &p in &pts {
        while lower.len() >= 2 && cross(lower[lower.len() - 2], lower[lower.len() - 1], p) <= 0.0 {
            lower.pop();
        }
        lower.push(p);
    }
    let mut upper: Vec<Point> = Vec::new();
    for &p in pts.iter().rev() {
        while upper.len() >= 2 && cross(upper[upper.len() - 2], upper[upper.len() - 1], p) <= 0.0 {
            upper.pop();
        }
        upper.push(p);
    }
    lower.pop();
    upper.pop();
    lower.extend(upper);
    lower
}

/// Minimum-area enclosing rectangle of a convex polygon by rotating calipers.
///
/// Returns `(center, edge_angle, extent_along_edge, extent_across_edge)`; one side of
/// the optimum is collinear with a hull edge. `None` for hulls with fewer than 3 points.
pub fn min_area_rect(hull: &[Point]) -> Option<(Point, f64, f64, f64)> {
    let n = hull.len();
    if n < 3 {
        return None;
    }
    let at = |i: usize| hull[i % n];
    let dot = |a: Point, b: Point| a.0 * b.0 + a.1 * b.1;
    let sub = |a: Point, b: Point| (a.0 - b.0, a.1 - b.1);
    const EPS: f64 = 1e-12;

    let mut best: Option<(f64, Point, f64, f64, f64)> = None;
    // j: max projection along the edge, k: max distance from the edge, l: min projection
    let (mut j, mut k, mut l) = (1usize, 1usize, 0usize);
    for i in 0..n {
        let (p, q) = (at(i), at(i + 1));
        let len = dot(sub(q, p), sub(q, p)).sqrt();
        if len == 0.0 {
            continue;
        }
        let e = ((q.0 - p.0) / len, (q.1 - p.1) / len);
        let nrm = (-e.1, e.0);
        if i == 0 {
            j = 1;
        }
        while dot(sub(at(j + 1), at(j)), e) > EPS {
            j += 1;
        }
        if i == 0 {
            k = j;
        }
        while dot(sub(at(k + 1), at(k)), nrm) > EPS {
            k += 1;
        }
        if i == 0 {
            l = k;
        }
        while dot(sub(at(l + 1), at(l)), e) < -EPS {
            l += 1;
        }
        let hi = dot(sub(at(j), p), e);
        let lo = dot(sub(at(l), p), e);
        let height = dot(sub(at(k), p), nrm);
        let width = hi - lo;
        let area = width * height;
        if best.is_none_or(|b| area < b.0 - 1e-9 * b.0.max(1.0)) {
            let mid = (lo + hi) / 2.0;
            let c = (
                p.0 + e.0 * mid + nrm.0 * height / 2.0,
                p.1 + e.1 * mid + nrm.1 * height / 2.0,
            );
            best = Some((area, c, e.1.atan2(e.0), width, height));
        }
    }
    best.map(|(_, c, a, w, h)| (c, a, w, h))
}
