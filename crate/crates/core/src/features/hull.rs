use crate::segmentation::Spot;

/// Convex hull of pixel centers. Vertices are strictly convex and run
/// counterclockwise under the usual cross-product sign in `(x, y)`.
#[derive(Debug, Clone, PartialEq)]
pub struct HullPolygon {
    pub vertices: Vec<(i32, i32)>,
    /// Shoelace area of the polygon through pixel centers.
    pub area: f64,
}

fn cross(o: (i32, i32), a: (i32, i32), b: (i32, i32)) -> i64 {
    (a.0 - o.0) as i64 * (b.1 - o.1) as i64 - (a.1 - o.1) as i64 * (b.0 - o.0) as i64
}

fn gcd(mut a: i64, mut b: i64) -> i64 {
    while b != 0 {
        (a, b) = (b, a % b);
    }
    a.abs()
}

/// Andrew's monotone chain. Collinear input yields the two extreme points;
/// a single point yields itself.
pub fn monotone_chain(points: &[(i32, i32)]) -> Vec<(i32, i32)> {
    let mut pts = points.to_vec();
    pts.sort_unstable();
    pts.dedup();
    if pts.len() <= 2 {
        return pts;
    }
    let mut hull: Vec<(i32, i32)> = Vec::with_capacity(2 * pts.len());
    for pass in 0..2 {
        let floor = hull.len();
        let iter: Box<dyn Iterator<Item = &(i32, i32)>> =
            if pass == 0 { Box::new(pts.iter()) } else { Box::new(pts.iter().rev()) };
        for &p in iter {
            while hull.len() >= floor + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    if hull.len() == 2 && hull[0] == hull[1] {
        hull.pop();
    }
    hull
}

/// Twice the signed shoelace area.
pub fn doubled_area(vertices: &[(i32, i32)]) -> i64 {
    let n = vertices.len();
    if n < 3 {
        return 0;
    }
    (0..n)
        .map(|i| {
            let (a, b) = (vertices[i], vertices[(i + 1) % n]);
            a.0 as i64 * b.1 as i64 - b.0 as i64 * a.1 as i64
        })
        .sum()
}

impl HullPolygon {
    pub fn is_degenerate(&self) -> bool {
        self.vertices.len() < 3
    }

    /// Lattice points on the boundary, by edge gcds.
    pub fn boundary_lattice_points(&self) -> i64 {
        let n = self.vertices.len();
        match n {
            0 => 0,
            1 => 1,
            2 => {
                let (a, b) = (self.vertices[0], self.vertices[1]);
                gcd((b.0 - a.0) as i64, (b.1 - a.1) as i64) + 1
            }
            _ => (0..n)
                .map(|i| {
                    let (a, b) = (self.vertices[i], self.vertices[(i + 1) % n]);
                    gcd((b.0 - a.0) as i64, (b.1 - a.1) as i64)
                })
                .sum(),
        }
    }

    /// Pixels whose centers lie inside or on the hull. By Pick's theorem this
    /// is `A + B/2 + 1`, i.e. the shoelace area grown by the half-pixel band.
    pub fn pixel_area(&self) -> i64 {
        if self.is_degenerate() {
            return self.boundary_lattice_points();
        }
        (doubled_area(&self.vertices) + self.boundary_lattice_points() + 2) / 2
    }

    pub fn perimeter(&self) -> f64 {
        let n = self.vertices.len();
        if n < 2 {
            return 0.0;
        }
        let edge = |a: (i32, i32), b: (i32, i32)| (((b.0 - a.0) as f64).powi(2) + ((b.1 - a.1) as f64).powi(2)).sqrt();
        if n == 2 {
            return 2.0 * edge(self.vertices[0], self.vertices[1]);
        }
        (0..n).map(|i| edge(self.vertices[i], self.vertices[(i + 1) % n])).sum()
    }
}

pub fn convex_hull(spot: &Spot) -> HullPolygon {
    hull_of_points(spot.pixels())
}

pub fn hull_of_points(points: &[(i32, i32)]) -> HullPolygon {
    let vertices = monotone_chain(points);
    let area = doubled_area(&vertices) as f64 / 2.0;
    HullPolygon { vertices, area }
}

/// `area / hull pixel area`; 1 for degenerate hulls.
pub fn solidity(spot: &Spot, hull: &HullPolygon) -> f64 {
    if hull.is_degenerate() {
        return 1.0;
    }
    spot.area() as f64 / hull.pixel_area() as f64
}
