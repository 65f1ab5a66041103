//! Raster types, decoding, size normalization, enhancement and RGB to HSI.

use thiserror::Error;

use crate::pnm;
use crate::scalar::Scalar;

/// Side length every image is resampled to before analysis.
pub const NORMALIZED_SIZE: usize = 200;

#[derive(Debug, Error, PartialEq)]
pub enum ImagingError {
    #[error("decode error: {0}")]
    Decode(String),
    #[error("unsupported image format: {0}")]
    UnsupportedFormat(&'static str),
    #[error("image has a zero dimension")]
    EmptyImage,
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("pixel buffer holds {got} pixels, expected {expected}")]
    BadPixelCount { expected: usize, got: usize },
    #[error("channel value {0} outside [0, 1]")]
    ChannelRange(f64),
}

/// A single-channel raster in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Plane<T> {
    width: usize,
    height: usize,
    data: Vec<T>,
}

impl<T: Copy> Plane<T> {
    pub fn filled(width: usize, height: usize, value: T) -> Self {
        Plane { width, height, data: vec![value; width * height] }
    }

    /// Panics if `data.len() != width * height`.
    pub fn from_vec(width: usize, height: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), width * height, "plane buffer size");
        Plane { width, height, data }
    }

    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> T) -> Self {
        let mut data = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                data.push(f(x, y));
            }
        }
        Plane { width, height, data }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dims(&self) -> (usize, usize) {
        (self.width, self.height)
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> T {
        self.data[y * self.width + x]
    }

    #[inline]
    pub fn set(&mut self, x: usize, y: usize, v: T) {
        self.data[y * self.width + x] = v;
    }

    pub fn as_slice(&self) -> &[T] {
        &self.data
    }

    pub fn map<U: Copy>(&self, f: impl FnMut(&T) -> U) -> Plane<U> {
        Plane { width: self.width, height: self.height, data: self.data.iter().map(f).collect() }
    }
}

/// RGB raster with channels in `[0, 1]`.
#[derive(Debug, Clone, PartialEq)]
pub struct RgbImage<T> {
    width: usize,
    height: usize,
    pixels: Vec<[T; 3]>,
}

impl<T: Scalar> RgbImage<T> {
    pub fn new(width: usize, height: usize, pixels: Vec<[T; 3]>) -> Result<Self, ImagingError> {
        if pixels.len() != width * height {
            return Err(ImagingError::BadPixelCount { expected: width * height, got: pixels.len() });
        }
        for c in pixels.iter().flatten() {
            if !(*c >= T::zero() && *c <= T::one()) {
                return Err(ImagingError::ChannelRange(c.as_f64()));
            }
        }
        Ok(RgbImage { width, height, pixels })
    }

    /// Builds an image from a per-pixel function; channels are clamped to `[0, 1]`.
    pub fn from_fn(width: usize, height: usize, mut f: impl FnMut(usize, usize) -> [T; 3]) -> Self {
        let mut pixels = Vec::with_capacity(width * height);
        for y in 0..height {
            for x in 0..width {
                pixels.push(f(x, y).map(clamp_unit));
            }
        }
        RgbImage { width, height, pixels }
    }

    /// 8-bit interleaved RGB, e.g. from a decoder.
    pub fn from_rgb8(width: usize, height: usize, bytes: &[u8]) -> Result<Self, ImagingError> {
        if bytes.len() != 3 * width * height {
            return Err(ImagingError::BadPixelCount { expected: width * height, got: bytes.len() / 3 });
        }
        let scale = T::of(255.0);
        let pixels = bytes
            .chunks_exact(3)
            .map(|p| [0, 1, 2].map(|i| T::of(p[i] as f64) / scale))
            .collect();
        Ok(RgbImage { width, height, pixels })
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn pixels(&self) -> &[[T; 3]] {
        &self.pixels
    }

    #[inline]
    pub fn get(&self, x: usize, y: usize) -> [T; 3] {
        self.pixels[y * self.width + x]
    }

    /// Rounds every channel to the nearest of 256 levels.
    pub fn to_rgb8(&self) -> Vec<u8> {
        self.pixels
            .iter()
            .flatten()
            .map(|c| (c.as_f64() * 255.0).round().clamp(0.0, 255.0) as u8)
            .collect()
    }

    pub fn to_ppm(&self) -> Vec<u8> {
        pnm::encode_ppm(self.width, self.height, &self.to_rgb8())
    }
}

fn clamp_unit<T: Scalar>(v: T) -> T {
    v.max(T::zero()).min(T::one())
}

/// The three HSI planes of an image. Hue is in degrees.
#[derive(Debug, Clone, PartialEq)]
pub struct HsiPlanes<T> {
    pub hue: Plane<T>,
    pub saturation: Plane<T>,
    pub intensity: Plane<T>,
    /// False where the pixel is achromatic and hue carries no information.
    pub hue_defined: Plane<bool>,
}

impl<T: Copy> HsiPlanes<T> {
    pub fn dims(&self) -> (usize, usize) {
        self.hue.dims()
    }
}

/// Brightness shift and contrast gain about mid-gray.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EnhanceParams<T> {
    pub brightness_delta: T,
    pub contrast_gain: T,
}

impl<T: Scalar> Default for EnhanceParams<T> {
    fn default() -> Self {
        EnhanceParams { brightness_delta: T::of(0.05), contrast_gain: T::of(1.2) }
    }
}

impl<T: Scalar> EnhanceParams<T> {
    pub fn identity() -> Self {
        EnhanceParams { brightness_delta: T::zero(), contrast_gain: T::one() }
    }
}

const PNG_SIGNATURE: [u8; 8] = [0x89, b'P', b'N', b'G', 0x0d, 0x0a, 0x1a, 0x0a];

fn foreign_format(bytes: &[u8]) -> Option<&'static str> {
    let starts = |p: &[u8]| bytes.starts_with(p);
    if starts(&[0xff, 0xd8, 0xff]) {
        Some("JPEG")
    } else if starts(b"GIF87a") || starts(b"GIF89a") {
        Some("GIF")
    } else if starts(b"BM") {
        Some("BMP")
    } else if starts(b"II*\0") || starts(b"MM\0*") {
        Some("TIFF")
    } else if starts(b"RIFF") && bytes.len() >= 12 && &bytes[8..12] == b"WEBP" {
        Some("WebP")
    } else if starts(b"P1") || starts(b"P4") {
        Some("PBM")
    } else if starts(b"P7") {
        Some("PAM")
    } else {
        None
    }
}

/// Decodes a PNG or Netpbm (P2/P3/P5/P6) stream. Alpha is dropped.
pub fn load_image<T: Scalar>(bytes: &[u8]) -> Result<RgbImage<T>, ImagingError> {
    if bytes.is_empty() {
        return Err(ImagingError::Decode("empty input".into()));
    }
    if bytes.starts_with(&PNG_SIGNATURE) {
        return decode_png(bytes);
    }
    if pnm::sniff(bytes) {
        let r = pnm::decode(bytes).map_err(|e| ImagingError::Decode(e.to_string()))?;
        let scale = T::of(r.maxval as f64);
        let px = |s: u16| T::of(s as f64) / scale;
        let pixels = if r.channels == 3 {
            r.samples.chunks_exact(3).map(|p| [px(p[0]), px(p[1]), px(p[2])]).collect()
        } else {
            r.samples.iter().map(|&g| [px(g); 3]).collect()
        };
        return Ok(RgbImage { width: r.width, height: r.height, pixels });
    }
    match foreign_format(bytes) {
        Some(name) => Err(ImagingError::UnsupportedFormat(name)),
        None => Err(ImagingError::Decode("unrecognized image signature".into())),
    }
}

fn decode_png<T: Scalar>(bytes: &[u8]) -> Result<RgbImage<T>, ImagingError> {
    let derr = |e: png::DecodingError| ImagingError::Decode(e.to_string());
    let mut decoder = png::Decoder::new(std::io::Cursor::new(bytes));
    decoder.set_transformations(png::Transformations::normalize_to_color8());
    let mut reader = decoder.read_info().map_err(derr)?;
    let size = reader
        .output_buffer_size()
        .ok_or_else(|| ImagingError::Decode("image too large".into()))?;
    let mut buf = vec![0u8; size];
    let info = reader.next_frame(&mut buf).map_err(derr)?;
    let (w, h) = (info.width as usize, info.height as usize);
    let data = &buf[..info.buffer_size()];
    let channels = match info.color_type {
        png::ColorType::Grayscale => 1,
        png::ColorType::GrayscaleAlpha => 2,
        png::ColorType::Rgb => 3,
        png::ColorType::Rgba => 4,
        png::ColorType::Indexed => return Err(ImagingError::Decode("palette not expanded".into())),
    };
    let scale = T::of(255.0);
    let px = |s: u8| T::of(s as f64) / scale;
    let pixels = data
        .chunks_exact(channels)
        .map(|p| if channels < 3 { [px(p[0]); 3] } else { [px(p[0]), px(p[1]), px(p[2])] })
        .collect::<Vec<_>>();
    if pixels.len() != w * h {
        return Err(ImagingError::Decode("frame size mismatch".into()));
    }
    Ok(RgbImage { width: w, height: h, pixels })
}

/// Bilinear resampling to `NORMALIZED_SIZE` square; aspect ratio is not kept.
pub fn normalize_size<T: Scalar>(img: &RgbImage<T>) -> Result<RgbImage<T>, ImagingError> {
    resize_bilinear(img, NORMALIZED_SIZE, NORMALIZED_SIZE)
}

/// Pixel-center aligned bilinear resampling. At equal sizes every sample lands
/// on a source center, so the output equals the input.
pub fn resize_bilinear<T: Scalar>(
    img: &RgbImage<T>,
    out_w: usize,
    out_h: usize,
) -> Result<RgbImage<T>, ImagingError> {
    if img.width == 0 || img.height == 0 || out_w == 0 || out_h == 0 {
        return Err(ImagingError::EmptyImage);
    }
    let half = T::of(0.5);
    let sx = T::of_usize(img.width) / T::of_usize(out_w);
    let sy = T::of_usize(img.height) / T::of_usize(out_h);
    let max_x = T::of_usize(img.width - 1);
    let max_y = T::of_usize(img.height - 1);

    let axis = |i: usize, scale: T, max: T, len: usize| {
        let s = ((T::of_usize(i) + half) * scale - half).max(T::zero()).min(max);
        let i0 = s.floor().to_usize().unwrap_or(0).min(len - 1);
        let i1 = (i0 + 1).min(len - 1);
        (i0, i1, s - T::of_usize(i0))
    };

    let mut pixels = Vec::with_capacity(out_w * out_h);
    for y in 0..out_h {
        let (y0, y1, fy) = axis(y, sy, max_y, img.height);
        for x in 0..out_w {
            let (x0, x1, fx) = axis(x, sx, max_x, img.width);
            let (a, b) = (img.get(x0, y0), img.get(x1, y0));
            let (c, d) = (img.get(x0, y1), img.get(x1, y1));
            let mut p = [T::zero(); 3];
            for k in 0..3 {
                let top = a[k] * (T::one() - fx) + b[k] * fx;
                let bottom = c[k] * (T::one() - fx) + d[k] * fx;
                p[k] = clamp_unit(top * (T::one() - fy) + bottom * fy);
            }
            pixels.push(p);
        }
    }
    Ok(RgbImage { width: out_w, height: out_h, pixels })
}

/// `c -> clamp(0.5 + gain * (c - 0.5) + delta, 0, 1)` on every channel.
pub fn enhance<T: Scalar>(img: &RgbImage<T>, p: &EnhanceParams<T>) -> Result<RgbImage<T>, ImagingError> {
    if !(p.contrast_gain > T::zero()) {
        return Err(ImagingError::InvalidParams(format!(
            "contrast_gain must be > 0, got {}",
            p.contrast_gain
        )));
    }
    if !p.brightness_delta.is_finite() || !p.contrast_gain.is_finite() {
        return Err(ImagingError::InvalidParams("non-finite enhancement parameter".into()));
    }
    // Folded into one offset so that gain 1 and delta 0 reproduce the input exactly.
    let offset = T::of(0.5) * (T::one() - p.contrast_gain) + p.brightness_delta;
    let pixels = img
        .pixels
        .iter()
        .map(|px| px.map(|c| clamp_unit(p.contrast_gain * c + offset)))
        .collect();
    Ok(RgbImage { width: img.width, height: img.height, pixels })
}

/// Converts one pixel; returns `(hue_degrees, saturation, intensity, hue_defined)`.
///
/// Intensity is the channel mean. Saturation is `1 - min / mean`. Hue is the
/// arccos angle measured from red, reflected to `360 - theta` when blue
/// exceeds green. Gray and black pixels get `S = 0`, `H = 0`, undefined hue.
pub fn hsi_pixel<T: Scalar>([r, g, b]: [T; 3]) -> (T, T, T, bool) {
    let sum = r + g + b;
    let intensity = sum / T::of(3.0);
    if sum <= T::zero() || (r == g && g == b) {
        return (T::zero(), T::zero(), intensity, false);
    }
    let min = r.min(g).min(b);
    let saturation = clamp_unit(T::one() - T::of(3.0) * min / sum);

    let num = T::of(0.5) * ((r - g) + (r - b));
    let den = ((r - g) * (r - g) + (r - b) * (g - b)).sqrt();
    if !(den > T::zero()) {
        return (T::zero(), saturation, intensity, false);
    }
    let cos = (num / den).max(-T::one()).min(T::one());
    let theta = cos.acos().to_degrees();
    let full = T::of(360.0);
    let mut hue = if b > g { full - theta } else { theta };
    if hue >= full {
        hue = hue - full;
    }
    (hue, saturation, intensity, true)
}

pub fn rgb_to_hsi<T: Scalar>(img: &RgbImage<T>) -> HsiPlanes<T> {
    let (w, h) = (img.width, img.height);
    let mut hue = Vec::with_capacity(w * h);
    let mut sat = Vec::with_capacity(w * h);
    let mut int = Vec::with_capacity(w * h);
    let mut defined = Vec::with_capacity(w * h);
    for &px in &img.pixels {
        let (hh, s, i, d) = hsi_pixel(px);
        hue.push(hh);
        sat.push(s);
        int.push(i);
        defined.push(d);
    }
    HsiPlanes {
        hue: Plane::from_vec(w, h, hue),
        saturation: Plane::from_vec(w, h, sat),
        intensity: Plane::from_vec(w, h, int),
        hue_defined: Plane::from_vec(w, h, defined),
    }
}
