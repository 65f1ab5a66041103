use crate::segmentation::Spot;

/// Moore neighborhood in scan order, starting west. With `y` growing
/// downward this runs clockwise on screen.
const DIRS: [(i32, i32); 8] = [(-1, 0), (-1, -1), (0, -1), (1, -1), (1, 0), (1, 1), (0, 1), (-1, 1)];

/// Outer boundary of a spot as visited by a Moore-neighbor trace. Pixels on
/// one-pixel-wide parts appear once per pass.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Contour {
    pub points: Vec<(i32, i32)>,
    pub closed: bool,
}

impl Contour {
    /// Distinct boundary pixels, sorted.
    pub fn distinct_points(&self) -> Vec<(i32, i32)> {
        let mut pts = self.points.clone();
        pts.sort_unstable();
        pts.dedup();
        pts
    }

    /// Number of axis-aligned and diagonal steps around the closed trace.
    pub fn step_counts(&self) -> (usize, usize) {
        let n = self.points.len();
        if n < 2 {
            return (0, 0);
        }
        let (mut axis, mut diag) = (0, 0);
        for i in 0..n {
            let (a, b) = (self.points[i], self.points[(i + 1) % n]);
            if a.0 != b.0 && a.1 != b.1 {
                diag += 1;
            } else {
                axis += 1;
            }
        }
        (axis, diag)
    }
}

fn dir_index(d: (i32, i32)) -> usize {
    DIRS.iter().position(|&e| e == d).expect("backtrack is an 8-neighbor")
}

/// Traces the outer boundary starting from the spot's first row-major pixel.
/// Stops when the trace would repeat its first move.
pub fn trace_contour(spot: &Spot) -> Contour {
    let (mask, (ox, oy)) = spot.local_mask();
    let (w, h) = (mask.width() as i32, mask.height() as i32);
    let inside = |(x, y): (i32, i32)| {
        let (lx, ly) = (x - ox, y - oy);
        lx >= 0 && ly >= 0 && lx < w && ly < h && mask.get(lx as usize, ly as usize)
    };
    let start = spot.pixels()[0];
    if spot.area() == 1 {
        return Contour { points: vec![start], closed: true };
    }

    let step = |p: (i32, i32), b: (i32, i32)| {
        let d = dir_index((b.0 - p.0, b.1 - p.1));
        for i in 1..=8 {
            let k = (d + i) % 8;
            let q = (p.0 + DIRS[k].0, p.1 + DIRS[k].1);
            if inside(q) {
                let prev = DIRS[(k + 7) % 8];
                return (q, (p.0 + prev.0, p.1 + prev.1));
            }
        }
        unreachable!("a connected spot with two or more pixels has a neighbor")
    };

    let first = step(start, (start.0 - 1, start.1));
    let mut points = vec![start];
    let (mut p, mut b) = first;
    let limit = 8 * spot.area() + 8;
    loop {
        if p == start && step(p, b) == first {
            break;
        }
        points.push(p);
        (p, b) = step(p, b);
        assert!(points.len() <= limit, "contour trace did not close");
    }
    Contour { points, closed: true }
}

/// Chain-code length: 1 per axis step, sqrt(2) per diagonal step.
pub fn perimeter(contour: &Contour) -> f64 {
    let (axis, diag) = contour.step_counts();
    axis as f64 + diag as f64 * std::f64::consts::SQRT_2
}
