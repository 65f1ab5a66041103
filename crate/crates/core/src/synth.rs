//! Seeded synthetic leaf images with ground-truth spot masks.
//!
//! A scene is a pale, nearly gray backdrop with a horizontal green leaf band
//! across the middle. Elliptical lesions are stamped inside the band. The
//! leaf is only mildly saturated while lesions are strongly saturated and
//! orange-brown, so the saturation mask keeps the leaf and its lesions and
//! the hue split then isolates the lesions.

use std::fs;
use std::path::{Path, PathBuf};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use thiserror::Error;

use crate::classifier::DiseaseClass;
use crate::features::extract_features;
use crate::imaging::{RgbImage, NORMALIZED_SIZE};
use crate::segmentation::{label_components, BinaryMask, Connectivity, Spot};

pub const NOISE_SIGMA: f64 = 0.01;
/// Spots per image drawn by [`generate_sample`] and the corpus writer.
pub const SPOT_COUNT_RANGE: (usize, usize) = (8, 25);
pub const PLACEMENT_ATTEMPTS: usize = 1000;

/// Rows `[LEAF_TOP, LEAF_BOTTOM)` hold the leaf.
pub const LEAF_TOP: usize = 50;
pub const LEAF_BOTTOM: usize = 150;
const LEAF_MARGIN: i32 = 3;

const AREA_SLACK: f64 = 0.1;
const ECC_SLACK: f64 = 0.1;

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("spot_count must be at least 1")]
    NoSpots,
    #[error("placed {placed} of {requested} spots before running out of attempts")]
    PlacementFailure { placed: usize, requested: usize },
    #[error("corpus counts must be at least 1")]
    EmptyCorpus,
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
    #[error("manifest error: {0}")]
    Manifest(String),
}

impl From<csv::Error> for SynthError {
    fn from(e: csv::Error) -> Self {
        SynthError::Manifest(e.to_string())
    }
}

/// Shape and color distribution of one disease's lesions.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpotArchetype {
    pub class: DiseaseClass,
    /// Inclusive pixel-count range.
    pub area_range: (usize, usize),
    /// `minor / major` range.
    pub eccentricity_range: (f64, f64),
    pub hue_range: (f64, f64),
    pub saturation_range: (f64, f64),
    pub intensity_range: (f64, f64),
}

impl SpotArchetype {
    pub fn for_class(class: DiseaseClass) -> Self {
        match class {
            // small, elongated, grayish brown
            DiseaseClass::LeafBlast => SpotArchetype {
                class,
                area_range: (4, 30),
                eccentricity_range: (0.2, 0.6),
                hue_range: (25.0, 45.0),
                saturation_range: (0.6, 0.7),
                intensity_range: (0.42, 0.5),
            },
            // larger, rounder, darker brown
            DiseaseClass::BrownSpot => SpotArchetype {
                class,
                area_range: (10, 80),
                eccentricity_range: (0.5, 0.95),
                hue_range: (15.0, 35.0),
                saturation_range: (0.72, 0.88),
                intensity_range: (0.3, 0.38),
            },
        }
    }

    /// Rasterized areas accepted by the generator.
    pub fn accepted_area(&self) -> (usize, usize) {
        let (lo, hi) = self.area_range;
        (((lo as f64) * (1.0 - AREA_SLACK)).ceil() as usize, ((hi as f64) * (1.0 + AREA_SLACK)).floor() as usize)
    }

    /// Measured eccentricities accepted by the generator.
    pub fn accepted_eccentricity(&self) -> (f64, f64) {
        let (lo, hi) = self.eccentricity_range;
        ((lo - ECC_SLACK).max(0.0), (hi + ECC_SLACK).min(1.0))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpotTruth {
    /// Image coordinates, row-major order.
    pub pixels: Vec<(i32, i32)>,
    pub class: DiseaseClass,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroundTruth {
    pub image: RgbImage<f64>,
    pub spot_mask: BinaryMask,
    pub spots: Vec<SpotTruth>,
    pub image_class: DiseaseClass,
}

/// Pixels whose centers fall inside the ellipse with semi-axes `a >= b`,
/// major axis at `theta` radians, centered at `(cx, cy)`.
pub fn rasterize_ellipse(cx: f64, cy: f64, a: f64, b: f64, theta: f64) -> Vec<(i32, i32)> {
    let (s, c) = theta.sin_cos();
    let r = a.max(b).ceil() as i32 + 1;
    let (x0, y0) = (cx.round() as i32, cy.round() as i32);
    let mut out = Vec::new();
    for y in y0 - r..=y0 + r {
        for x in x0 - r..=x0 + r {
            let (dx, dy) = (x as f64 - cx, y as f64 - cy);
            let u = (dx * c + dy * s) / a;
            let v = (-dx * s + dy * c) / b;
            if u * u + v * v <= 1.0 {
                out.push((x, y));
            }
        }
    }
    out
}

/// Inverse of the arccos-based HSI conversion; hue in degrees.
fn hsi_to_rgb(h: f64, s: f64, i: f64) -> [f64; 3] {
    let h = h.rem_euclid(360.0);
    let sector = (h / 120.0).floor() as usize;
    let hh = (h - 120.0 * sector as f64).to_radians();
    let low = i * (1.0 - s);
    let high = i * (1.0 + s * hh.cos() / (std::f64::consts::FRAC_PI_3 - hh).cos());
    let rest = 3.0 * i - low - high;
    match sector {
        0 => [high, rest, low],
        1 => [low, high, rest],
        _ => [rest, low, high],
    }
}

fn uniform(rng: &mut ChaCha8Rng, (lo, hi): (f64, f64)) -> f64 {
    if hi > lo { rng.random_range(lo..hi) } else { lo }
}

/// Draws lesion shapes at the origin until one rasterizes to an accepted
/// area and eccentricity as a single hole-free 8-connected blob.
fn sample_shape(arch: &SpotArchetype, rng: &mut ChaCha8Rng) -> Vec<(i32, i32)> {
    let (amin, amax) = arch.accepted_area();
    let (emin, emax) = arch.accepted_eccentricity();
    loop {
        let area = uniform(rng, (arch.area_range.0 as f64, arch.area_range.1 as f64));
        let ecc = uniform(rng, arch.eccentricity_range);
        let theta = rng.random_range(0.0..std::f64::consts::PI);
        let (ox, oy) = (rng.random_range(0.0..1.0), rng.random_range(0.0..1.0));
        // measured major runs between pixel centers, about one pixel short of 2a
        let a = (area / (std::f64::consts::PI * ecc)).sqrt();
        let b = a * ecc;
        let px = rasterize_ellipse(ox, oy, a, b, theta);
        if px.len() < amin || px.len() > amax {
            continue;
        }
        let Some(spot) = Spot::from_pixels(1, px) else { continue };
        let f = extract_features::<f64>(&spot);
        if f.eccentricity < emin || f.eccentricity > emax || f.euler_number != 1 {
            continue;
        }
        let (mask, _) = spot.local_mask();
        if label_components(&mask, Connectivity::Eight).region_count() != 1 {
            continue;
        }
        return spot.pixels().to_vec();
    }
}

struct Scene {
    image: Vec<[f64; 3]>,
    spots: Vec<SpotTruth>,
}

fn paint_scene(class: DiseaseClass, spot_count: usize, seed: u64) -> Result<Scene, SynthError> {
    let n = NORMALIZED_SIZE;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let backdrop = hsi_to_rgb(uniform(&mut rng, (40.0, 80.0)), 0.03, uniform(&mut rng, (0.78, 0.82)));
    let leaf = hsi_to_rgb(uniform(&mut rng, (100.0, 115.0)), uniform(&mut rng, (0.26, 0.3)), uniform(&mut rng, (0.4, 0.45)));
    let mut image: Vec<[f64; 3]> =
        (0..n * n).map(|k| if (LEAF_TOP..LEAF_BOTTOM).contains(&(k / n)) { leaf } else { backdrop }).collect();

    let arch = SpotArchetype::for_class(class);
    // occupied pixels grown by one so that spots never touch, even diagonally
    let mut blocked = vec![false; n * n];
    let mut spots = Vec::with_capacity(spot_count);
    for placed in 0..spot_count {
        let shape = sample_shape(&arch, &mut rng);
        let (xmin, xmax) = (shape.iter().map(|p| p.0).min().unwrap(), shape.iter().map(|p| p.0).max().unwrap());
        let (ymin, ymax) = (shape.iter().map(|p| p.1).min().unwrap(), shape.iter().map(|p| p.1).max().unwrap());
        let x_range = (LEAF_MARGIN - xmin, n as i32 - LEAF_MARGIN - xmax);
        let y_range = (LEAF_TOP as i32 + LEAF_MARGIN - ymin, LEAF_BOTTOM as i32 - LEAF_MARGIN - ymax);
        let mut position = None;
        for _ in 0..PLACEMENT_ATTEMPTS {
            let tx = rng.random_range(x_range.0..x_range.1);
            let ty = rng.random_range(y_range.0..y_range.1);
            if shape.iter().all(|&(x, y)| !blocked[(y + ty) as usize * n + (x + tx) as usize]) {
                position = Some((tx, ty));
                break;
            }
        }
        let (tx, ty) = position.ok_or(SynthError::PlacementFailure { placed, requested: spot_count })?;
        let color = hsi_to_rgb(uniform(&mut rng, arch.hue_range), uniform(&mut rng, arch.saturation_range), uniform(&mut rng, arch.intensity_range));
        let mut pixels: Vec<(i32, i32)> = shape.iter().map(|&(x, y)| (x + tx, y + ty)).collect();
        pixels.sort_unstable_by_key(|&(x, y)| (y, x));
        for &(x, y) in &pixels {
            image[y as usize * n + x as usize] = color;
            for (dx, dy) in [(-1, -1), (0, -1), (1, -1), (-1, 0), (0, 0), (1, 0), (-1, 1), (0, 1), (1, 1)] {
                let (bx, by) = (x + dx, y + dy);
                if (0..n as i32).contains(&bx) && (0..n as i32).contains(&by) {
                    blocked[by as usize * n + bx as usize] = true;
                }
            }
        }
        spots.push(SpotTruth { pixels, class });
    }

    // Truncated at three sigma so the saturation margin holds for every pixel.
    let normal = Normal::new(0.0, NOISE_SIGMA).expect("valid sigma");
    for px in image.iter_mut() {
        for c in px.iter_mut() {
            let e = loop {
                let e: f64 = normal.sample(&mut rng);
                if e.abs() <= 3.0 * NOISE_SIGMA {
                    break e;
                }
            };
            *c = (*c + e).clamp(0.0, 1.0);
        }
    }
    Ok(Scene { image, spots })
}

/// A 200x200 leaf with `spot_count` lesions of the class archetype.
pub fn generate_leaf(class: DiseaseClass, spot_count: usize, seed: u64) -> Result<GroundTruth, SynthError> {
    if spot_count == 0 {
        return Err(SynthError::NoSpots);
    }
    let scene = paint_scene(class, spot_count, seed)?;
    let n = NORMALIZED_SIZE;
    let mut spot_mask = BinaryMask::empty(n, n);
    for s in &scene.spots {
        for &(x, y) in &s.pixels {
            spot_mask.set(x as usize, y as usize, true);
        }
    }
    let image = RgbImage::new(n, n, scene.image).expect("clamped pixels");
    Ok(GroundTruth { image, spot_mask, spots: scene.spots, image_class: class })
}

/// The same scene without lesions.
pub fn blank_leaf(seed: u64) -> RgbImage<f64> {
    let scene = paint_scene(DiseaseClass::LeafBlast, 0, seed).expect("nothing to place");
    RgbImage::new(NORMALIZED_SIZE, NORMALIZED_SIZE, scene.image).expect("clamped pixels")
}

/// Spot count the corpus uses for an image seed.
pub fn spot_count_for_seed(seed: u64) -> usize {
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed_c0de_5eed_c0de);
    rng.random_range(SPOT_COUNT_RANGE.0..=SPOT_COUNT_RANGE.1)
}

/// [`generate_leaf`] with the corpus spot count for `seed`.
pub fn generate_sample(class: DiseaseClass, seed: u64) -> Result<GroundTruth, SynthError> {
    generate_leaf(class, spot_count_for_seed(seed), seed)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct ManifestEntry {
    /// Relative to the corpus root, `/`-separated.
    pub path: String,
    pub split: Split,
    #[serde(with = "class_slug")]
    pub class: DiseaseClass,
    pub seed: u64,
}

mod class_slug {
    use super::DiseaseClass;
    use serde::{de::Error, Deserialize, Deserializer, Serializer};

    pub fn serialize<S: Serializer>(c: &DiseaseClass, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(c.slug())
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<DiseaseClass, D::Error> {
        let s = String::deserialize(d)?;
        DiseaseClass::from_slug(&s).ok_or_else(|| D::Error::custom(format!("unknown class {s:?}")))
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct CorpusManifest {
    pub entries: Vec<ManifestEntry>,
}

pub const MANIFEST_FILE: &str = "manifest.csv";

impl CorpusManifest {
    pub fn to_csv(&self) -> Result<Vec<u8>, SynthError> {
        let mut w = csv::Writer::from_writer(Vec::new());
        for e in &self.entries {
            w.serialize(e)?;
        }
        w.into_inner().map_err(|e| SynthError::Manifest(e.to_string()))
    }

    pub fn from_csv(bytes: &[u8]) -> Result<Self, SynthError> {
        let mut r = csv::Reader::from_reader(bytes);
        let entries = r.deserialize().collect::<Result<Vec<ManifestEntry>, _>>()?;
        Ok(CorpusManifest { entries })
    }

    pub fn read(root: &Path) -> Result<Self, SynthError> {
        Self::from_csv(&fs::read(root.join(MANIFEST_FILE))?)
    }

    pub fn split(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == split)
    }
}

/// Sidecar mask path for an image path: `img_007.ppm -> img_007.truth.pgm`.
pub fn truth_path(image: &Path) -> PathBuf {
    image.with_extension("truth.pgm")
}

/// Writes `{train,test}/{leafblast,brownspot}/img_NNN.ppm`, a truth mask next
/// to each image, and `manifest.csv` under `root`. Image `k` in write order
/// gets seed `seed * 1_000_003 + k` (wrapping).
pub fn generate_corpus(
    train_per_class: usize,
    test_per_class: usize,
    seed: u64,
    root: &Path,
) -> Result<CorpusManifest, SynthError> {
    if train_per_class == 0 || test_per_class == 0 {
        return Err(SynthError::EmptyCorpus);
    }
    let mut manifest = CorpusManifest::default();
    let mut k = 0u64;
    for (split, count) in [(Split::Train, train_per_class), (Split::Test, test_per_class)] {
        for class in DiseaseClass::ALL {
            let dir = root.join(split.as_str()).join(class.slug());
            fs::create_dir_all(&dir)?;
            for i in 0..count {
                let image_seed = seed.wrapping_mul(1_000_003).wrapping_add(k);
                k += 1;
                let truth = generate_sample(class, image_seed)?;
                let name = format!("img_{i:03}.ppm");
                let file = dir.join(&name);
                fs::write(&file, truth.image.to_ppm())?;
                fs::write(truth_path(&file), truth.spot_mask.to_pgm())?;
                let path = format!("{}/{}/{name}", split.as_str(), class.slug());
                manifest.entries.push(ManifestEntry { path, split, class, seed: image_seed });
            }
        }
    }
    fs::write(root.join(MANIFEST_FILE), manifest.to_csv()?)?;
    Ok(manifest)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::imaging::hsi_pixel;

    #[test]
    fn hsi_round_trip() {
        for (h, s, i) in [(110.0, 0.28, 0.42), (20.0, 0.88, 0.38), (200.0, 0.5, 0.5), (300.0, 0.3, 0.6), (0.0, 0.4, 0.5)] {
            let rgb = hsi_to_rgb(h, s, i);
            let (h2, s2, i2, d) = hsi_pixel(rgb);
            assert!(d);
            assert!((h2 - h).abs() < 1e-9 && (s2 - s).abs() < 1e-12 && (i2 - i).abs() < 1e-12, "{h} {s} {i}");
        }
    }

    #[test]
    fn archetype_colors_stay_in_gamut() {
        for c in DiseaseClass::ALL {
            let a = SpotArchetype::for_class(c);
            for h in [a.hue_range.0, a.hue_range.1] {
                for s in [a.saturation_range.0, a.saturation_range.1] {
                    for i in [a.intensity_range.0, a.intensity_range.1] {
                        assert!(hsi_to_rgb(h, s, i).iter().all(|v| (0.0..=1.0).contains(v)));
                    }
                }
            }
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let a = generate_leaf(DiseaseClass::BrownSpot, 10, 3).unwrap();
        let b = generate_leaf(DiseaseClass::BrownSpot, 10, 3).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.image.to_ppm(), b.image.to_ppm());
        assert_ne!(generate_leaf(DiseaseClass::BrownSpot, 10, 4).unwrap().image, a.image);
    }

    #[test]
    fn single_spot_area_within_slack() {
        for class in DiseaseClass::ALL {
            let (lo, hi) = SpotArchetype::for_class(class).area_range;
            for seed in 0..20 {
                let g = generate_leaf(class, 1, seed).unwrap();
                let n = g.spot_mask.count() as f64;
                assert!(n >= lo as f64 * 0.8 && n <= hi as f64 * 1.2, "{class} seed {seed}: {n}");
            }
        }
    }

    #[test]
    fn too_many_spots_fail() {
        for class in DiseaseClass::ALL {
            assert!(matches!(generate_leaf(class, 500, 1), Err(SynthError::PlacementFailure { requested: 500, .. })));
        }
        assert!(matches!(generate_leaf(DiseaseClass::LeafBlast, 0, 1), Err(SynthError::NoSpots)));
    }

    #[test]
    fn mask_is_union_of_disjoint_separated_spots() {
        let g = generate_leaf(DiseaseClass::LeafBlast, 25, 11).unwrap();
        let total: usize = g.spots.iter().map(|s| s.pixels.len()).sum();
        assert_eq!(g.spot_mask.count(), total);
        assert!(g.spots.iter().all(|s| s.class == g.image_class));
        let lr = label_components(&g.spot_mask, Connectivity::Eight);
        assert_eq!(lr.region_count(), 25);
    }

    #[test]
    fn eccentricity_within_archetype_tolerance() {
        for class in DiseaseClass::ALL {
            let (lo, hi) = SpotArchetype::for_class(class).eccentricity_range;
            for seed in 0..4 {
                for s in generate_leaf(class, 20, seed).unwrap().spots {
                    let f = extract_features::<f64>(&Spot::from_pixels(1, s.pixels).unwrap());
                    assert!(f.eccentricity >= lo - 0.15 && f.eccentricity <= hi + 0.15);
                }
            }
        }
    }

    #[test]
    fn elliptical_stamp_with_axes_six_and_three() {
        let spot = Spot::from_pixels(1, rasterize_ellipse(0.0, 0.0, 6.0, 3.0, 0.0)).unwrap();
        let f = extract_features::<f64>(&spot);
        assert!((f.eccentricity - 0.5).abs() <= 0.15, "{}", f.eccentricity);
    }

    #[test]
    fn background_saturation_margin() {
        for (class, seed) in [(DiseaseClass::LeafBlast, 1), (DiseaseClass::BrownSpot, 2), (DiseaseClass::LeafBlast, 42)] {
            let g = generate_sample(class, seed).unwrap();
            let (mut bg_max, mut spot_min) = (0.0f64, 1.0f64);
            for y in 0..NORMALIZED_SIZE {
                for x in 0..NORMALIZED_SIZE {
                    let (_, s, _, _) = hsi_pixel(g.image.get(x, y));
                    if g.spot_mask.get(x, y) {
                        spot_min = spot_min.min(s);
                    } else {
                        bg_max = bg_max.max(s);
                    }
                }
            }
            assert!(spot_min - bg_max >= 0.1, "margin {}", spot_min - bg_max);
        }
    }

    #[test]
    fn spot_counts_cover_range() {
        let counts: Vec<usize> = (0..200).map(spot_count_for_seed).collect();
        assert!(counts.iter().all(|&c| (8..=25).contains(&c)));
        assert!(counts.contains(&8) && counts.contains(&25));
    }

    #[test]
    fn manifest_round_trip() {
        let m = CorpusManifest {
            entries: vec![ManifestEntry { path: "train/leafblast/img_000.ppm".into(), split: Split::Train, class: DiseaseClass::LeafBlast, seed: 9 }],
        };
        let bytes = m.to_csv().unwrap();
        assert_eq!(String::from_utf8(bytes.clone()).unwrap(), "path,split,class,seed\ntrain/leafblast/img_000.ppm,train,leafblast,9\n");
        assert_eq!(CorpusManifest::from_csv(&bytes).unwrap(), m);
    }

    #[test]
    fn tiny_corpus_layout() {
        let dir = tempfile::tempdir().unwrap();
        let m = generate_corpus(1, 1, 5, dir.path()).unwrap();
        assert_eq!(m.entries.len(), 4);
        for e in &m.entries {
            let p = dir.path().join(&e.path);
            assert!(p.exists() && truth_path(&p).exists());
        }
        assert_eq!(CorpusManifest::read(dir.path()).unwrap(), m);
        let seeds: std::collections::HashSet<_> = m.entries.iter().map(|e| e.seed).collect();
        assert_eq!(seeds.len(), 4);
        assert!(generate_corpus(0, 1, 5, dir.path()).is_err());
    }
}
