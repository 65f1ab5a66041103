//! Brute-force reference implementations. These deliberately share no code
//! with the library beyond its public types.
#![allow(dead_code)]

use std::collections::VecDeque;

use leafdx_core::classifier::{forward, DiseaseClass, MlpModel};
use leafdx_core::segmentation::{BinaryMask, Spot};
use rand::Rng;

pub type Px = (i32, i32);

/// Row-major grid, `grid[y][x]`.
pub type Grid = Vec<Vec<bool>>;

pub fn random_grid<R: Rng>(rng: &mut R, w: usize, h: usize, density: f64) -> Grid {
    (0..h).map(|_| (0..w).map(|_| rng.random_bool(density)).collect()).collect()
}

pub fn grid_to_mask(g: &Grid) -> BinaryMask {
    let h = g.len();
    let w = g.first().map_or(0, |r| r.len());
    BinaryMask::from_fn(w, h, |x, y| g[y][x])
}

const N4: [Px; 4] = [(1, 0), (-1, 0), (0, 1), (0, -1)];
const N8: [Px; 8] = [(1, 0), (-1, 0), (0, 1), (0, -1), (1, 1), (1, -1), (-1, 1), (-1, -1)];

/// Breadth-first flood fill. Components are listed by their first pixel in
/// row-major order.
pub fn flood_components(g: &Grid, eight: bool) -> Vec<Vec<Px>> {
    let h = g.len() as i32;
    let w = g.first().map_or(0, |r| r.len()) as i32;
    let mut seen = vec![vec![false; w as usize]; h as usize];
    let offsets: &[Px] = if eight { &N8 } else { &N4 };
    let mut comps = Vec::new();
    for y in 0..h {
        for x in 0..w {
            if !g[y as usize][x as usize] || seen[y as usize][x as usize] {
                continue;
            }
            seen[y as usize][x as usize] = true;
            let mut comp = vec![];
            let mut queue = VecDeque::from([(x, y)]);
            while let Some((cx, cy)) = queue.pop_front() {
                comp.push((cx, cy));
                for (dx, dy) in offsets {
                    let (nx, ny) = (cx + dx, cy + dy);
                    if nx >= 0 && ny >= 0 && nx < w && ny < h && g[ny as usize][nx as usize] && !seen[ny as usize][nx as usize] {
                        seen[ny as usize][nx as usize] = true;
                        queue.push_back((nx, ny));
                    }
                }
            }
            comps.push(comp);
        }
    }
    comps
}

/// Largest 8-connected component of a random mask of at most
/// `max_side x max_side`.
pub fn random_spot<R: Rng>(rng: &mut R, max_side: usize) -> Spot {
    loop {
        let (w, h) = (rng.random_range(1..=max_side), rng.random_range(1..=max_side));
        let density = rng.random_range(0.3..0.95);
        let g = random_grid(rng, w, h, density);
        if let Some(best) = flood_components(&g, true).into_iter().max_by_key(|c| c.len()) {
            return Spot::from_pixels(1, best).unwrap();
        }
    }
}

fn bbox(px: &[Px]) -> (i32, i32, i32, i32) {
    let x0 = px.iter().map(|p| p.0).min().unwrap();
    let x1 = px.iter().map(|p| p.0).max().unwrap();
    let y0 = px.iter().map(|p| p.1).min().unwrap();
    let y1 = px.iter().map(|p| p.1).max().unwrap();
    (x0, y0, x1, y1)
}

/// Spot rasterized into its bounding box with a one-pixel empty margin.
fn padded(px: &[Px]) -> (Grid, i32, i32) {
    let (x0, y0, x1, y1) = bbox(px);
    let mut g = vec![vec![false; (x1 - x0 + 3) as usize]; (y1 - y0 + 3) as usize];
    for &(x, y) in px {
        g[(y - y0 + 1) as usize][(x - x0 + 1) as usize] = true;
    }
    (g, x0 - 1, y0 - 1)
}

/// Farthest pair over all pixel pairs; ties go to the smallest `(p, q)` with
/// `p < q` in `(x, y)` order.
pub fn major_axis(px: &[Px]) -> (Px, Px, f64) {
    if px.len() == 1 {
        return (px[0], px[0], 1.0);
    }
    let mut best: Option<(i64, Px, Px)> = None;
    for &a in px {
        for &b in px {
            if a >= b {
                continue;
            }
            let d2 = ((b.0 - a.0) as i64).pow(2) + ((b.1 - a.1) as i64).pow(2);
            let better = match best {
                None => true,
                Some((bd, bp, bq)) => d2 > bd || (d2 == bd && (a, b) < (bp, bq)),
            };
            if better {
                best = Some((d2, a, b));
            }
        }
    }
    let (d2, a, b) = best.unwrap();
    (a, b, (d2 as f64).sqrt())
}

/// Width across the major axis plus one pixel, capped at the major length.
pub fn minor_axis(px: &[Px], p: Px, q: Px, major: f64) -> f64 {
    if p == q {
        return 1.0;
    }
    let (ux, uy) = ((q.0 - p.0) as f64 / major, (q.1 - p.1) as f64 / major);
    let proj: Vec<f64> = px.iter().map(|&(x, y)| -uy * x as f64 + ux * y as f64).collect();
    let lo = proj.iter().cloned().fold(f64::INFINITY, f64::min);
    let hi = proj.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    (hi - lo + 1.0).min(major)
}

/// Degrees in `[0, 180)`, counterclockwise with screen-up positive.
pub fn orientation(p: Px, q: Px) -> f64 {
    if p == q {
        return 0.0;
    }
    ((p.1 - q.1) as f64).atan2((q.0 - p.0) as f64).to_degrees().rem_euclid(180.0)
}

/// Smallest angular difference modulo 180 degrees.
pub fn angle_gap(a: f64, b: f64) -> f64 {
    let d = (a - b).rem_euclid(180.0);
    d.min(180.0 - d)
}

/// Chain directions, clockwise on screen starting east.
const CHAIN: [Px; 8] = [(1, 0), (1, 1), (0, 1), (-1, 1), (-1, 0), (-1, -1), (0, -1), (1, -1)];

/// Outer boundary as 8-direction chain codes. Starts at the first row-major
/// pixel and stops when the first move from the start would repeat.
pub fn chain_code(px: &[Px]) -> Vec<usize> {
    if px.len() == 1 {
        return vec![];
    }
    let inside = |p: Px| px.contains(&p);
    let start = *px.iter().min_by_key(|&&(x, y)| (y, x)).unwrap();
    let next = |p: Px, from: usize| -> usize {
        (0..8).map(|i| (from + i) % 8).find(|&d| inside((p.0 + CHAIN[d].0, p.1 + CHAIN[d].1))).unwrap()
    };
    // the pixel west of the start is background; the search begins just past it
    let first = next(start, 5);
    let mut codes = vec![first];
    let mut p = (start.0 + CHAIN[first].0, start.1 + CHAIN[first].1);
    let mut last = first;
    loop {
        let from = if last % 2 == 0 { (last + 7) % 8 } else { (last + 6) % 8 };
        let d = next(p, from);
        if p == start && d == first {
            return codes;
        }
        codes.push(d);
        p = (p.0 + CHAIN[d].0, p.1 + CHAIN[d].1);
        last = d;
        assert!(codes.len() <= 8 * px.len() + 8);
    }
}

pub fn chain_perimeter(codes: &[usize]) -> f64 {
    codes.iter().map(|d| if d % 2 == 0 { 1.0 } else { std::f64::consts::SQRT_2 }).sum()
}

/// Pixels on the chain, start included.
pub fn chain_pixels(px: &[Px]) -> Vec<Px> {
    let start = *px.iter().min_by_key(|&&(x, y)| (y, x)).unwrap();
    let mut out = vec![start];
    let mut p = start;
    for d in chain_code(px) {
        p = (p.0 + CHAIN[d].0, p.1 + CHAIN[d].1);
        out.push(p);
    }
    out.sort_unstable();
    out.dedup();
    out
}

/// Holes: 4-connected background components of the bounding box that do not
/// touch its border.
pub fn holes(px: &[Px]) -> usize {
    let (x0, y0, x1, y1) = bbox(px);
    let (w, h) = ((x1 - x0 + 1) as usize, (y1 - y0 + 1) as usize);
    let mut bg = vec![vec![true; w]; h];
    for &(x, y) in px {
        bg[(y - y0) as usize][(x - x0) as usize] = false;
    }
    flood_components(&bg, false)
        .iter()
        .filter(|c| c.iter().all(|&(x, y)| x > 0 && y > 0 && x < w as i32 - 1 && y < h as i32 - 1))
        .count()
}

/// The spot with its holes filled.
pub fn fill_holes(px: &[Px]) -> Vec<Px> {
    let (g, ox, oy) = padded(px);
    let outside = flood_components(&g.iter().map(|r| r.iter().map(|b| !b).collect()).collect(), false);
    let reach = outside.iter().find(|c| c.contains(&(0, 0))).unwrap();
    let mut out = vec![];
    for (y, row) in g.iter().enumerate() {
        for x in 0..row.len() {
            if !reach.contains(&(x as i32, y as i32)) {
                out.push((x as i32 + ox, y as i32 + oy));
            }
        }
    }
    out
}

/// Pixels with a 4-neighbor outside the spot.
pub fn boundary_pixels(px: &[Px]) -> Vec<Px> {
    let mut out: Vec<Px> = px.iter().copied().filter(|&(x, y)| N4.iter().any(|(dx, dy)| !px.contains(&(x + dx, y + dy)))).collect();
    out.sort_unstable();
    out
}

fn cross(o: Px, a: Px, b: Px) -> i64 {
    (a.0 - o.0) as i64 * (b.1 - o.1) as i64 - (a.1 - o.1) as i64 * (b.0 - o.0) as i64
}

/// Strict hull vertices: `p` qualifies iff every other point lies in an open
/// half-plane through `p`, i.e. some direction `u` from `p` has all other
/// directions strictly counterclockwise of it within 180 degrees (or on `u`
/// itself). Candidates are restricted to boundary pixels, which contain every
/// extreme point of a pixel set.
pub fn hull_vertices(points: &[Px]) -> Vec<Px> {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() == 1 {
        return pts;
    }
    let mut out = vec![];
    for &p in &pts {
        let dirs: Vec<Px> = pts.iter().filter(|&&q| q != p).map(|&q| (q.0 - p.0, q.1 - p.1)).collect();
        let extreme = dirs.iter().any(|&u| {
            dirs.iter().all(|&v| {
                let c = u.0 as i64 * v.1 as i64 - u.1 as i64 * v.0 as i64;
                let dot = u.0 as i64 * v.0 as i64 + u.1 as i64 * v.1 as i64;
                c > 0 || (c == 0 && dot > 0)
            })
        });
        if extreme {
            out.push(p);
        }
    }
    out
}

/// Hull vertices in cyclic order around their centroid.
fn hull_ring(vertices: &[Px]) -> Vec<Px> {
    let (cx, cy) = (
        vertices.iter().map(|v| v.0 as f64).sum::<f64>() / vertices.len() as f64,
        vertices.iter().map(|v| v.1 as f64).sum::<f64>() / vertices.len() as f64,
    );
    let mut ring = vertices.to_vec();
    ring.sort_by(|a, b| {
        let ta = (a.1 as f64 - cy).atan2(a.0 as f64 - cx);
        let tb = (b.1 as f64 - cy).atan2(b.0 as f64 - cx);
        ta.partial_cmp(&tb).unwrap()
    });
    ring
}

fn inside_ring(ring: &[Px], p: Px) -> bool {
    let cs: Vec<i64> = (0..ring.len()).map(|i| cross(ring[i], ring[(i + 1) % ring.len()], p)).collect();
    cs.iter().all(|&c| c >= 0) || cs.iter().all(|&c| c <= 0)
}

/// Lattice points inside or on the convex polygon with these (three or
/// more) vertices.
pub fn lattice_points_in_hull(vertices: &[Px]) -> Vec<Px> {
    let ring = hull_ring(vertices);
    let (x0, y0, x1, y1) = bbox(vertices);
    (y0..=y1).flat_map(|y| (x0..=x1).map(move |x| (x, y))).filter(|&p| inside_ring(&ring, p)).collect()
}

pub fn rasterized_hull_count(vertices: &[Px]) -> usize {
    lattice_points_in_hull(vertices).len()
}

/// Every field of the feature vector, computed independently.
#[derive(Debug, Clone, PartialEq)]
pub struct Expected {
    pub area: usize,
    pub major: f64,
    pub minor: f64,
    pub bbox_area: f64,
    pub eccentricity: f64,
    pub perimeter: f64,
    pub solidity: f64,
    pub euler: i64,
    pub orientation: f64,
    pub extent: f64,
    pub diameter: f64,
    pub hull_vertices: usize,
}

pub fn expected_features(px: &[Px]) -> Expected {
    let area = px.len();
    let (p, q, major) = major_axis(px);
    let minor = minor_axis(px, p, q, major);
    let verts = hull_vertices(&boundary_pixels(px));
    let solidity = if verts.len() < 3 { 1.0 } else { area as f64 / rasterized_hull_count(&verts) as f64 };
    let (x0, y0, x1, y1) = bbox(px);
    Expected {
        area,
        major,
        minor,
        bbox_area: major * minor,
        eccentricity: minor / major,
        perimeter: chain_perimeter(&chain_code(px)),
        solidity,
        euler: 1 - holes(px) as i64,
        orientation: orientation(p, q),
        extent: area as f64 / ((x1 - x0 + 1) * (y1 - y0 + 1)) as f64,
        diameter: 2.0 * (area as f64 / std::f64::consts::PI).sqrt(),
        hull_vertices: verts.len(),
    }
}

/// Between-class variance of every cut `t` (lower class `0..t`) as an exact
/// fraction `w0 * w1 * (mu0 - mu1)^2`, scaled by `n^2`:
/// `(s0 * n1 - s1 * n0)^2 / (n0 * n1)`. Cuts with an empty class are `None`.
pub fn otsu_variances(counts: &[u64]) -> Vec<Option<(u128, u128)>> {
    let mut out = vec![None];
    for t in 1..counts.len() {
        let (lo, hi) = counts.split_at(t);
        let n0: u128 = lo.iter().map(|&c| c as u128).sum();
        let n1: u128 = hi.iter().map(|&c| c as u128).sum();
        let s0: u128 = lo.iter().enumerate().map(|(i, &c)| i as u128 * c as u128).sum();
        let s1: u128 = hi.iter().enumerate().map(|(i, &c)| (i + t) as u128 * c as u128).sum();
        if n0 == 0 || n1 == 0 {
            out.push(None);
            continue;
        }
        let diff = (s0 * n1).abs_diff(s1 * n0);
        out.push(Some((diff * diff, n0 * n1)));
    }
    out
}

/// Lowest cut attaining the exhaustive maximum.
pub fn otsu_best_cut(counts: &[u64]) -> Option<usize> {
    let vars = otsu_variances(counts);
    let mut best: Option<(usize, (u128, u128))> = None;
    for (t, v) in vars.iter().enumerate() {
        let Some((num, den)) = *v else { continue };
        // num/den > bn/bd without division; both sides stay below 2^127 for the sizes tested
        if best.is_none_or(|(_, (bn, bd))| num * bd > bn * den) {
            best = Some((t, (num, den)));
        }
    }
    best.map(|(t, _)| t)
}

/// Floating-point textbook criterion for a cut.
pub fn otsu_variance_f64(counts: &[u64], t: usize) -> f64 {
    let n: f64 = counts.iter().sum::<u64>() as f64;
    let (lo, hi) = counts.split_at(t);
    let w0 = lo.iter().sum::<u64>() as f64 / n;
    let w1 = hi.iter().sum::<u64>() as f64 / n;
    let mu0 = lo.iter().enumerate().map(|(i, &c)| i as f64 * c as f64).sum::<f64>() / (w0 * n);
    let mu1 = hi.iter().enumerate().map(|(i, &c)| (i + t) as f64 * c as f64).sum::<f64>() / (w1 * n);
    w0 * w1 * (mu0 - mu1).powi(2)
}

pub fn cross_entropy(m: &MlpModel<f64>, x: &[f64], target: DiseaseClass) -> f64 {
    -forward(m, x).unwrap().probabilities[target.index()].ln()
}

/// Central-difference derivative of the loss with respect to every weight
/// and bias, layer by layer, weights first.
pub fn numeric_gradient(m: &MlpModel<f64>, x: &[f64], target: DiseaseClass, h: f64) -> Vec<f64> {
    let mut probe = m.clone();
    let mut out = vec![];
    for li in 0..m.layers().len() {
        for wi in 0..m.layers()[li].weights.len() {
            let orig = probe.layers()[li].weights[wi];
            probe.layers_mut()[li].weights[wi] = orig + h;
            let up = cross_entropy(&probe, x, target);
            probe.layers_mut()[li].weights[wi] = orig - h;
            let down = cross_entropy(&probe, x, target);
            probe.layers_mut()[li].weights[wi] = orig;
            out.push((up - down) / (2.0 * h));
        }
        for bi in 0..m.layers()[li].biases.len() {
            let orig = probe.layers()[li].biases[bi];
            probe.layers_mut()[li].biases[bi] = orig + h;
            let up = cross_entropy(&probe, x, target);
            probe.layers_mut()[li].biases[bi] = orig - h;
            let down = cross_entropy(&probe, x, target);
            probe.layers_mut()[li].biases[bi] = orig;
            out.push((up - down) / (2.0 * h));
        }
    }
    out
}

/// `|a - b| / max(|a|, |b|)`, zero when both vanish.
pub fn relative_error(a: f64, b: f64) -> f64 {
    let scale = a.abs().max(b.abs());
    if scale == 0.0 { 0.0 } else { (a - b).abs() / scale }
}
