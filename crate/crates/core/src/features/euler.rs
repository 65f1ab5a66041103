use crate::segmentation::{label_components, BinaryMask, Connectivity, Spot};

/// Holes of a connected spot: 4-connected background components inside its
/// bounding box that never reach the box border.
pub fn hole_count(spot: &Spot) -> usize {
    let (mask, _) = spot.local_mask();
    let (w, h) = (mask.width() + 2, mask.height() + 2);
    // one ring of padding joins every border-touching background run into one component
    let background = BinaryMask::from_fn(w, h, |x, y| {
        x == 0 || y == 0 || x == w - 1 || y == h - 1 || !mask.get(x - 1, y - 1)
    });
    label_components(&background, Connectivity::Four).region_count() - 1
}

/// `E = C - H` with `C = 1` for a single spot.
pub fn euler_number(spot: &Spot) -> i64 {
    1 - hole_count(spot) as i64
}
