use super::contour::Contour;
use crate::segmentation::Spot;

/// Major and minor axis of a spot.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AxisPair {
    pub major_p1: (i32, i32),
    pub major_p2: (i32, i32),
    pub major_length: f64,
    pub minor_length: f64,
    /// Direction of the major segment in degrees, `[0, 180)`, measured
    /// counterclockwise from the +x axis with screen-up as positive.
    pub orientation: f64,
}

/// Farthest pair of contour points, ties broken by the lexicographically
/// smallest `(p1, p2)` with `p1 < p2`. Returns the pair and its squared length.
pub fn farthest_pair(points: &[(i32, i32)]) -> ((i32, i32), (i32, i32), i64) {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    let mut best = (pts[0], pts[0], 0i64);
    for i in 0..pts.len() {
        for j in i + 1..pts.len() {
            let (dx, dy) = ((pts[j].0 - pts[i].0) as i64, (pts[j].1 - pts[i].1) as i64);
            let d2 = dx * dx + dy * dy;
            // pairs arrive in lexicographic order, so only a strictly longer one replaces
            if d2 > best.2 {
                best = (pts[i], pts[j], d2);
            }
        }
    }
    best
}

/// Major axis from the farthest contour pair; minor axis as the pixel set's
/// extent perpendicular to it plus one pixel of thickness, capped at the
/// major length. A single pixel has both lengths 1.
pub fn compute_axes(spot: &Spot, contour: &Contour) -> AxisPair {
    let (p1, p2, d2) = farthest_pair(&contour.points);
    if d2 == 0 {
        return AxisPair { major_p1: p1, major_p2: p2, major_length: 1.0, minor_length: 1.0, orientation: 0.0 };
    }
    let (dx, dy) = ((p2.0 - p1.0) as i64, (p2.1 - p1.1) as i64);
    let major = (d2 as f64).sqrt();

    // projection onto (-dy, dx), scaled by the major length
    let (mut lo, mut hi) = (i64::MAX, i64::MIN);
    for &(x, y) in spot.pixels() {
        let proj = -dy * x as i64 + dx * y as i64;
        lo = lo.min(proj);
        hi = hi.max(proj);
    }
    let width = (hi - lo) as f64 / major;
    let minor = (width + 1.0).min(major);

    let mut angle = (-(dy as f64)).atan2(dx as f64).to_degrees();
    if angle < 0.0 {
        angle += 180.0;
    }
    if angle >= 180.0 {
        angle -= 180.0;
    }
    AxisPair { major_p1: p1, major_p2: p2, major_length: major, minor_length: minor, orientation: angle + 0.0 }
}

/// Oriented box product `major * minor`.
pub fn bounding_box_area(axes: &AxisPair) -> f64 {
    axes.major_length * axes.minor_length
}

/// `minor / major`, clamped into `(0, 1]`.
pub fn eccentricity(axes: &AxisPair) -> f64 {
    (axes.minor_length / axes.major_length).clamp(f64::MIN_POSITIVE, 1.0)
}
