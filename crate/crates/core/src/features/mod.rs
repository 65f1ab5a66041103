//! Twelve morphological descriptors per spot.
//!
//! Reported values and the boxes they use:
//!
//! | field | definition |
//! |---|---|
//! | `area` | pixel count |
//! | `major_axis_length` | longest distance between two boundary pixels |
//! | `minor_axis_length` | pixel-set width perpendicular to the major axis, plus one |
//! | `bounding_box_area` | `major * minor` (oriented box) |
//! | `eccentricity` | `minor / major`, in `(0, 1]` |
//! | `perimeter` | chain-code length of the outer trace |
//! | `solidity` | `area / convex pixel area` |
//! | `euler_number` | `1 - holes` |
//! | `orientation` | major-axis angle, degrees in `[0, 180)` |
//! | `extent` | `area / axis-aligned box area` |
//! | `equivalent_diameter` | `sqrt(4 * area / pi)` |
//! | `hull_vertex_count` | vertices of the convex hull |
//!
//! `extent` deliberately uses the axis-aligned box so that a solid upright
//! rectangle scores exactly 1; `bounding_box_area` keeps the oriented product.

mod axes;
mod contour;
mod euler;
mod hull;

pub use axes::{bounding_box_area, compute_axes, eccentricity, farthest_pair, AxisPair};
pub use contour::{perimeter, trace_contour, Contour};
pub use euler::{euler_number, hole_count};
pub use hull::{convex_hull, doubled_area, hull_of_points, monotone_chain, solidity, HullPolygon};

use crate::scalar::Scalar;
use crate::segmentation::Spot;

pub const FEATURE_COUNT: usize = 12;

pub const FEATURE_NAMES: [&str; FEATURE_COUNT] = [
    "area", "major", "minor", "bbox", "ecc", "perim", "solidity", "euler", "orient", "extent", "diam", "hullv",
];

/// Header line of the feature CSV export.
pub const CSV_HEADER: &str = "class,area,major,minor,bbox,ecc,perim,solidity,euler,orient,extent,diam,hullv";

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct FeatureVector<T> {
    pub area: usize,
    pub major_axis_length: T,
    pub minor_axis_length: T,
    pub bounding_box_area: T,
    pub eccentricity: T,
    pub perimeter: T,
    pub solidity: T,
    pub euler_number: i64,
    pub orientation: T,
    pub extent: T,
    pub equivalent_diameter: T,
    pub hull_vertex_count: usize,
}

impl<T: Scalar> FeatureVector<T> {
    /// Values in `FEATURE_NAMES` order.
    pub fn to_array(&self) -> [T; FEATURE_COUNT] {
        [
            T::of_usize(self.area),
            self.major_axis_length,
            self.minor_axis_length,
            self.bounding_box_area,
            self.eccentricity,
            self.perimeter,
            self.solidity,
            T::of(self.euler_number as f64),
            self.orientation,
            self.extent,
            self.equivalent_diameter,
            T::of_usize(self.hull_vertex_count),
        ]
    }

    pub fn to_csv_row(&self, class: &str) -> String {
        let mut row = class.to_string();
        for v in self.to_array() {
            row.push(',');
            row.push_str(&v.to_string());
        }
        row
    }
}

/// Axis-aligned extent, `area / (box width * box height)`.
pub fn extent(spot: &Spot) -> f64 {
    let b = spot.aabb();
    spot.area() as f64 / (b.width() * b.height()) as f64
}

/// Diameter of the circle with the spot's area.
pub fn equivalent_diameter(spot: &Spot) -> f64 {
    (4.0 * spot.area() as f64 / std::f64::consts::PI).sqrt()
}

pub fn extract_features<T: Scalar>(spot: &Spot) -> FeatureVector<T> {
    let contour = trace_contour(spot);
    let axes = compute_axes(spot, &contour);
    let hull = convex_hull(spot);
    FeatureVector {
        area: spot.area(),
        major_axis_length: T::of(axes.major_length),
        minor_axis_length: T::of(axes.minor_length),
        bounding_box_area: T::of(bounding_box_area(&axes)),
        eccentricity: T::of(eccentricity(&axes)),
        perimeter: T::of(perimeter(&contour)),
        solidity: T::of(solidity(spot, &hull)),
        euler_number: euler_number(spot),
        orientation: T::of(axes.orientation),
        extent: T::of(extent(spot)),
        equivalent_diameter: T::of(equivalent_diameter(spot)),
        hull_vertex_count: hull.vertices.len(),
    }
}
