//! Saturation mask, hue masking, histograms, thresholding and component labeling.

use num_bigint::BigUint;
use thiserror::Error;

use crate::imaging::Plane;
use crate::pnm;
use crate::scalar::Scalar;

pub const DEFAULT_LEVELS: usize = 256;
pub const DEFAULT_MIN_SPOT_AREA: usize = 3;
pub const HUE_DOMAIN: (f64, f64) = (0.0, 360.0);
pub const SATURATION_DOMAIN: (f64, f64) = (0.0, 1.0);

#[derive(Debug, Error, PartialEq)]
pub enum SegmentationError {
    #[error("histogram needs at least 2 levels, got {0}")]
    InvalidBinCount(usize),
    #[error("histogram domain ({lo}, {hi}) is empty or not finite")]
    InvalidDomain { lo: f64, hi: f64 },
    #[error("all histogram mass lies in one bin; its upper edge is {fallback}")]
    DegenerateHistogram { fallback: f64 },
    #[error("histogram has no mass")]
    EmptyHistogram,
    #[error("fixed threshold {value} outside domain ({lo}, {hi})")]
    ThresholdOutOfDomain { value: f64, lo: f64, hi: f64 },
    #[error("plane is {got:?}, mask is {expected:?}")]
    DimensionMismatch { expected: (usize, usize), got: (usize, usize) },
}

/// Foreground/background raster.
#[derive(Debug, Clone, PartialEq)]
pub struct BinaryMask {
    bits: Plane<bool>,
}

impl BinaryMask {
    pub fn empty(width: usize, height: usize) -> Self {
        BinaryMask { bits: Plane::filled(width, height, false) }
    }

    pub fn from_plane(bits: Plane<bool>) -> Self {
        BinaryMask { bits }
    }

    pub fn from_fn(width: usize, height: usize, f: impl FnMut(usize, usize) -> bool) -> Self {
        BinaryMask { bits: Plane::from_fn(width, height, f) }
    }

    pub fn width(&self) -> usize {
        self.bits.width()
    }

    pub fn height(&self) -> usize {
        self.bits.height()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.bits.dims()
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> bool {
        self.bits.get(x, y)
    }

    pub fn set(&mut self, x: usize, y: usize, v: bool) {
        self.bits.set(x, y, v)
    }

    pub fn bits(&self) -> &Plane<bool> {
        &self.bits
    }

    pub fn count(&self) -> usize {
        self.bits.as_slice().iter().filter(|b| **b).count()
    }

    /// Foreground pixels as `(x, y)` in row-major order.
    pub fn foreground(&self) -> Vec<(i32, i32)> {
        let w = self.width();
        self.bits
            .as_slice()
            .iter()
            .enumerate()
            .filter(|(_, b)| **b)
            .map(|(i, _)| ((i % w) as i32, (i / w) as i32))
            .collect()
    }

    /// P5 dump, foreground 255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let gray: Vec<u8> = self.bits.as_slice().iter().map(|&b| if b { 255 } else { 0 }).collect();
        pnm::encode_pgm(self.width(), self.height(), &gray)
    }
}

/// `h(r_k) = n_k` over a real domain split into `levels` equal bins.
#[derive(Debug, Clone, PartialEq)]
pub struct Histogram<T> {
    counts: Vec<u64>,
    lo: T,
    hi: T,
}

impl<T: Scalar> Histogram<T> {
    pub fn from_counts(counts: Vec<u64>, lo: T, hi: T) -> Result<Self, SegmentationError> {
        if counts.len() < 2 {
            return Err(SegmentationError::InvalidBinCount(counts.len()));
        }
        if !(lo < hi) || !lo.is_finite() || !hi.is_finite() {
            return Err(SegmentationError::InvalidDomain { lo: lo.as_f64(), hi: hi.as_f64() });
        }
        Ok(Histogram { counts, lo, hi })
    }

    pub fn levels(&self) -> usize {
        self.counts.len()
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn domain(&self) -> (T, T) {
        (self.lo, self.hi)
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    /// Lower edge of bin `k`; `edge(levels)` is the domain top.
    pub fn edge(&self, k: usize) -> T {
        self.lo + (self.hi - self.lo) * T::of_usize(k) / T::of_usize(self.levels())
    }

    /// Values outside the domain land in the end bins.
    pub fn bin_of(&self, v: T) -> usize {
        let l = self.levels();
        let pos = ((v - self.lo) / (self.hi - self.lo) * T::of_usize(l)).floor();
        if !(pos > T::zero()) {
            0
        } else {
            pos.to_usize().unwrap_or(l - 1).min(l - 1)
        }
    }
}

/// Histogram of a plane; pixels whose `valid` entry is false are skipped.
pub fn histogram<T: Scalar>(
    plane: &Plane<T>,
    valid: Option<&Plane<bool>>,
    levels: usize,
    (lo, hi): (T, T),
) -> Result<Histogram<T>, SegmentationError> {
    let mut h = Histogram::from_counts(vec![0; levels], lo, hi)?;
    if let Some(v) = valid {
        check_dims(plane.dims(), v.dims())?;
    }
    for (i, &value) in plane.as_slice().iter().enumerate() {
        if valid.is_none_or(|v| v.as_slice()[i]) {
            let k = h.bin_of(value);
            h.counts[k] += 1;
        }
    }
    Ok(h)
}

fn check_dims(expected: (usize, usize), got: (usize, usize)) -> Result<(), SegmentationError> {
    if expected != got {
        return Err(SegmentationError::DimensionMismatch { expected, got });
    }
    Ok(())
}

/// Outcome of the between-class variance search.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OtsuCut<T> {
    /// Cut index `t`: bins `0..t` form the lower class.
    pub cut: usize,
    pub threshold: T,
    pub lower_mean: T,
    pub upper_mean: T,
}

/// Exhaustive search for the bin boundary maximizing between-class variance.
///
/// Variance is compared exactly: for a cut with lower-class weight `w0` and
/// index sum `s0` (totals `n`, `s`) the criterion is
/// `(n*s0 - w0*s)^2 / (w0 * (n - w0))`, evaluated as big-integer cross
/// products so equal variances tie exactly and the lowest cut wins.
pub fn otsu<T: Scalar>(h: &Histogram<T>) -> Result<OtsuCut<T>, SegmentationError> {
    let n: u64 = h.total();
    if n == 0 {
        return Err(SegmentationError::EmptyHistogram);
    }
    let occupied: Vec<usize> = (0..h.levels()).filter(|&k| h.counts[k] > 0).collect();
    if occupied.len() == 1 {
        return Err(SegmentationError::DegenerateHistogram { fallback: h.edge(occupied[0] + 1).as_f64() });
    }
    let s: u128 = h.counts.iter().enumerate().map(|(i, &c)| i as u128 * c as u128).sum();
    let (n_big, s_big) = (BigUint::from(n), BigUint::from(s));

    let mut best: Option<(usize, BigUint, BigUint)> = None;
    let (mut w0, mut s0) = (0u64, 0u128);
    for t in 1..h.levels() {
        w0 += h.counts[t - 1];
        s0 += (t - 1) as u128 * h.counts[t - 1] as u128;
        if w0 == 0 || w0 == n {
            continue;
        }
        let a = &n_big * BigUint::from(s0);
        let b = BigUint::from(w0) * &s_big;
        let diff = if a >= b { a - b } else { b - a };
        let num = &diff * &diff;
        let den = BigUint::from(w0) * BigUint::from(n - w0);
        let better = match &best {
            None => true,
            Some((_, bn, bd)) => &num * bd > bn * &den,
        };
        if better {
            best = Some((t, num, den));
        }
    }
    let (cut, ..) = best.expect("two occupied bins give at least one proper cut");
    Ok(class_means(h, cut))
}

fn class_means<T: Scalar>(h: &Histogram<T>, cut: usize) -> OtsuCut<T> {
    let half = T::of(0.5);
    let center = |k: usize| (h.edge(k) + h.edge(k + 1)) * half;
    let mean = |range: std::ops::Range<usize>| {
        let (mut w, mut m) = (0u64, T::zero());
        for k in range {
            w += h.counts[k];
            m = m + T::of(h.counts[k] as f64) * center(k);
        }
        m / T::of(w as f64)
    };
    OtsuCut {
        cut,
        threshold: h.edge(cut),
        lower_mean: mean(0..cut),
        upper_mean: mean(cut..h.levels()),
    }
}

/// The threshold value of [`otsu`].
pub fn otsu_threshold<T: Scalar>(h: &Histogram<T>) -> Result<T, SegmentationError> {
    otsu(h).map(|c| c.threshold)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Polarity {
    /// Foreground where `value > T`.
    Above,
    /// Foreground where `value <= T`.
    Below,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum ThresholdMode<T> {
    Fixed(T),
    Otsu,
}

/// How a plane is cut into foreground and background.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ThresholdSpec<T> {
    pub mode: ThresholdMode<T>,
    pub polarity: Polarity,
    pub levels: usize,
    /// Otsu cuts whose class means are closer than this yield no foreground.
    /// Zero disables the check.
    pub min_mode_gap: T,
}

impl<T: Scalar> ThresholdSpec<T> {
    pub fn fixed(value: T, polarity: Polarity) -> Self {
        ThresholdSpec { mode: ThresholdMode::Fixed(value), polarity, levels: DEFAULT_LEVELS, min_mode_gap: T::zero() }
    }

    pub fn otsu(polarity: Polarity) -> Self {
        ThresholdSpec { mode: ThresholdMode::Otsu, polarity, levels: DEFAULT_LEVELS, min_mode_gap: T::zero() }
    }

    pub fn with_min_mode_gap(mut self, gap: T) -> Self {
        self.min_mode_gap = gap;
        self
    }

    /// Default for the saturation stage: Otsu, saturated side is foreground.
    pub fn saturation_default() -> Self {
        Self::otsu(Polarity::Above)
    }

    /// Default for the hue stage: Otsu, low (brown/yellow) hues are foreground,
    /// and the two hue modes must sit at least 30 degrees apart.
    pub fn hue_default() -> Self {
        Self::otsu(Polarity::Below).with_min_mode_gap(T::of(30.0))
    }

    fn passes(&self, v: T, t: T) -> bool {
        match self.polarity {
            Polarity::Above => v > t,
            Polarity::Below => v <= t,
        }
    }
}

/// Resolves a `ThresholdSpec` to a threshold; `None` means the histogram shows no
/// second mode and nothing is foreground.
fn resolve_threshold<T: Scalar>(
    spec: &ThresholdSpec<T>,
    domain: (T, T),
    hist: impl FnOnce() -> Result<Histogram<T>, SegmentationError>,
) -> Result<Option<T>, SegmentationError> {
    match spec.mode {
        ThresholdMode::Fixed(v) => {
            if !(v >= domain.0 && v <= domain.1) {
                return Err(SegmentationError::ThresholdOutOfDomain {
                    value: v.as_f64(),
                    lo: domain.0.as_f64(),
                    hi: domain.1.as_f64(),
                });
            }
            Ok(Some(v))
        }
        ThresholdMode::Otsu => {
            let h = hist()?;
            let cut = otsu(&h)?;
            if (cut.upper_mean - cut.lower_mean).abs() < spec.min_mode_gap {
                return Ok(None);
            }
            Ok(Some(cut.threshold))
        }
    }
}

/// Thresholds the saturation plane into the binary saturated mask.
pub fn binary_saturation_mask<T: Scalar>(
    saturation: &Plane<T>,
    spec: &ThresholdSpec<T>,
) -> Result<BinaryMask, SegmentationError> {
    let domain = (T::of(SATURATION_DOMAIN.0), T::of(SATURATION_DOMAIN.1));
    let t = resolve_threshold(spec, domain, || histogram(saturation, None, spec.levels, domain))?;
    let (w, h) = saturation.dims();
    Ok(match t {
        Some(t) => BinaryMask { bits: saturation.map(|&v| spec.passes(v, t)) },
        None => BinaryMask::empty(w, h),
    })
}

/// A plane restricted to the pixels a mask lets through.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskedPlane<T> {
    pub values: Plane<T>,
    pub valid: Plane<bool>,
}

impl<T: Copy> MaskedPlane<T> {
    pub fn valid_count(&self) -> usize {
        self.valid.as_slice().iter().filter(|b| **b).count()
    }

    pub fn dims(&self) -> (usize, usize) {
        self.values.dims()
    }
}

pub fn mask_hue<T: Scalar>(hue: &Plane<T>, mask: &BinaryMask) -> Result<MaskedPlane<T>, SegmentationError> {
    check_dims(mask.dims(), hue.dims())?;
    Ok(MaskedPlane { values: hue.clone(), valid: mask.bits.clone() })
}

/// Histogram of the valid pixels of a masked hue plane.
pub fn masked_hue_histogram<T: Scalar>(mp: &MaskedPlane<T>, levels: usize) -> Result<Histogram<T>, SegmentationError> {
    histogram(&mp.values, Some(&mp.valid), levels, (T::of(HUE_DOMAIN.0), T::of(HUE_DOMAIN.1)))
}

/// Thresholds the valid hue pixels; invalid pixels are always background.
pub fn threshold_segment<T: Scalar>(mp: &MaskedPlane<T>, spec: &ThresholdSpec<T>) -> Result<BinaryMask, SegmentationError> {
    segment_impl(mp, spec, None)
}

/// As [`threshold_segment`], reusing a histogram already built from `mp`.
pub fn threshold_segment_with_histogram<T: Scalar>(
    mp: &MaskedPlane<T>,
    spec: &ThresholdSpec<T>,
    hist: &Histogram<T>,
) -> Result<BinaryMask, SegmentationError> {
    segment_impl(mp, spec, Some(hist))
}

fn segment_impl<T: Scalar>(
    mp: &MaskedPlane<T>,
    spec: &ThresholdSpec<T>,
    hist: Option<&Histogram<T>>,
) -> Result<BinaryMask, SegmentationError> {
    check_dims(mp.values.dims(), mp.valid.dims())?;
    let (w, h) = mp.dims();
    if mp.valid_count() == 0 {
        return Ok(BinaryMask::empty(w, h));
    }
    let domain = (T::of(HUE_DOMAIN.0), T::of(HUE_DOMAIN.1));
    let t = resolve_threshold(spec, domain, || match hist {
        Some(h) => Ok(h.clone()),
        None => masked_hue_histogram(mp, spec.levels),
    })?;
    let Some(t) = t else {
        return Ok(BinaryMask::empty(w, h));
    };
    let values = mp.values.as_slice();
    let valid = mp.valid.as_slice();
    let bits = Plane::from_fn(w, h, |x, y| {
        let i = y * w + x;
        valid[i] && spec.passes(values[i], t)
    });
    Ok(BinaryMask { bits })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, serde::Serialize, serde::Deserialize)]
pub enum Connectivity {
    #[serde(rename = "4")]
    Four,
    #[default]
    #[serde(rename = "8")]
    Eight,
}

impl Connectivity {
    /// Neighbors already visited in a row-major scan, as `(dx, dy)`.
    fn causal_offsets(self) -> &'static [(i32, i32)] {
        match self {
            Connectivity::Four => &[(-1, 0), (0, -1)],
            Connectivity::Eight => &[(-1, 0), (-1, -1), (0, -1), (1, -1)],
        }
    }
}

impl TryFrom<u8> for Connectivity {
    type Error = String;

    fn try_from(v: u8) -> Result<Self, Self::Error> {
        match v {
            4 => Ok(Connectivity::Four),
            8 => Ok(Connectivity::Eight),
            other => Err(format!("connectivity must be 4 or 8, got {other}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize)]
pub struct Aabb {
    pub min_x: i32,
    pub min_y: i32,
    pub max_x: i32,
    pub max_y: i32,
}

impl Aabb {
    pub fn width(&self) -> i64 {
        (self.max_x - self.min_x) as i64 + 1
    }

    pub fn height(&self) -> i64 {
        (self.max_y - self.min_y) as i64 + 1
    }
}

/// One connected region. Pixels are `(x, y)` sorted row-major, no duplicates.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Spot {
    pub label: u32,
    pixels: Vec<(i32, i32)>,
    aabb: Aabb,
}

impl Spot {
    /// `None` for an empty pixel set.
    pub fn from_pixels(label: u32, mut pixels: Vec<(i32, i32)>) -> Option<Spot> {
        if pixels.is_empty() {
            return None;
        }
        pixels.sort_unstable_by_key(|&(x, y)| (y, x));
        pixels.dedup();
        let mut aabb = Aabb { min_x: i32::MAX, min_y: i32::MAX, max_x: i32::MIN, max_y: i32::MIN };
        for &(x, y) in &pixels {
            aabb.min_x = aabb.min_x.min(x);
            aabb.min_y = aabb.min_y.min(y);
            aabb.max_x = aabb.max_x.max(x);
            aabb.max_y = aabb.max_y.max(y);
        }
        Some(Spot { label, pixels, aabb })
    }

    pub fn pixels(&self) -> &[(i32, i32)] {
        &self.pixels
    }

    pub fn area(&self) -> usize {
        self.pixels.len()
    }

    pub fn aabb(&self) -> Aabb {
        self.aabb
    }

    pub fn contains(&self, p: (i32, i32)) -> bool {
        self.pixels.binary_search_by_key(&(p.1, p.0), |&(x, y)| (y, x)).is_ok()
    }

    /// The spot rasterized into its bounding box; `(ox, oy)` is the box origin.
    pub fn local_mask(&self) -> (BinaryMask, (i32, i32)) {
        let b = self.aabb;
        let mut m = BinaryMask::empty(b.width() as usize, b.height() as usize);
        for &(x, y) in &self.pixels {
            m.set((x - b.min_x) as usize, (y - b.min_y) as usize, true);
        }
        (m, (b.min_x, b.min_y))
    }
}

/// Label plane plus the spots it encodes; label `k` is `regions[k - 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledRegions {
    pub labels: Plane<u32>,
    pub regions: Vec<Spot>,
}

impl LabeledRegions {
    pub fn region_count(&self) -> usize {
        self.regions.len()
    }

    /// P5 dump; background 0, labels cycle through 1..=255.
    pub fn to_pgm(&self) -> Vec<u8> {
        let gray: Vec<u8> = self
            .labels
            .as_slice()
            .iter()
            .map(|&l| if l == 0 { 0 } else { (1 + (l - 1) % 255) as u8 })
            .collect();
        pnm::encode_pgm(self.labels.width(), self.labels.height(), &gray)
    }
}

struct DisjointSet {
    parent: Vec<u32>,
}

impl DisjointSet {
    fn make(&mut self) -> u32 {
        let id = self.parent.len() as u32;
        self.parent.push(id);
        id
    }

    fn find(&mut self, mut a: u32) -> u32 {
        while self.parent[a as usize] != a {
            let grand = self.parent[self.parent[a as usize] as usize];
            self.parent[a as usize] = grand;
            a = grand;
        }
        a
    }

    fn union(&mut self, a: u32, b: u32) -> u32 {
        let (ra, rb) = (self.find(a), self.find(b));
        let (lo, hi) = if ra < rb { (ra, rb) } else { (rb, ra) };
        self.parent[hi as usize] = lo;
        lo
    }
}

/// Two-pass labeling with union-find equivalences. Final labels are dense
/// and numbered by each region's first pixel in row-major order.
pub fn label_components(mask: &BinaryMask, connectivity: Connectivity) -> LabeledRegions {
    let (w, h) = mask.dims();
    const NONE: u32 = u32::MAX;
    let mut provisional = vec![NONE; w * h];
    let mut sets = DisjointSet { parent: Vec::new() };

    for y in 0..h {
        for x in 0..w {
            if !mask.get(x, y) {
                continue;
            }
            let mut current = NONE;
            for &(dx, dy) in connectivity.causal_offsets() {
                let (nx, ny) = (x as i32 + dx, y as i32 + dy);
                if nx < 0 || ny < 0 || nx >= w as i32 {
                    continue;
                }
                let l = provisional[ny as usize * w + nx as usize];
                if l == NONE {
                    continue;
                }
                current = if current == NONE { sets.find(l) } else { sets.union(current, l) };
            }
            provisional[y * w + x] = if current == NONE { sets.make() } else { current };
        }
    }

    let mut final_of_root = vec![0u32; sets.parent.len()];
    let mut members: Vec<Vec<(i32, i32)>> = Vec::new();
    let mut labels = Plane::filled(w, h, 0u32);
    for y in 0..h {
        for x in 0..w {
            let p = provisional[y * w + x];
            if p == NONE {
                continue;
            }
            let root = sets.find(p) as usize;
            if final_of_root[root] == 0 {
                members.push(Vec::new());
                final_of_root[root] = members.len() as u32;
            }
            let label = final_of_root[root];
            labels.set(x, y, label);
            members[label as usize - 1].push((x as i32, y as i32));
        }
    }
    let regions = members
        .into_iter()
        .enumerate()
        .map(|(i, px)| Spot::from_pixels(i as u32 + 1, px).expect("labeled region is nonempty"))
        .collect();
    LabeledRegions { labels, regions }
}

/// Drops regions smaller than `min_area` and renumbers the rest `1..=k` in order.
pub fn min_spot_filter(lr: &LabeledRegions, min_area: usize) -> LabeledRegions {
    let mut remap = vec![0u32; lr.regions.len() + 1];
    let mut regions = Vec::new();
    for spot in &lr.regions {
        if spot.area() >= min_area.max(1) {
            let mut kept = spot.clone();
            kept.label = regions.len() as u32 + 1;
            remap[spot.label as usize] = kept.label;
            regions.push(kept);
        }
    }
    LabeledRegions { labels: lr.labels.map(|&l| remap[l as usize]), regions }
}
