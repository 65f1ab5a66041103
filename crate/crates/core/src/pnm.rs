//! Minimal Netpbm codec: reads P2/P3/P5/P6, writes binary P5/P6 at 8 bits.

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum PnmError {
    #[error("not a netpbm stream")]
    BadMagic,
    #[error("truncated or malformed header: {0}")]
    Header(&'static str),
    #[error("raster holds {got} samples, expected {expected}")]
    Truncated { expected: usize, got: usize },
    #[error("sample value {value} exceeds maxval {maxval}")]
    SampleRange { value: u32, maxval: u32 },
}

/// Decoded raster: `channels` is 1 (gray) or 3 (RGB); samples are row-major.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PnmRaster {
    pub width: usize,
    pub height: usize,
    pub channels: usize,
    pub maxval: u32,
    pub samples: Vec<u16>,
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn skip_space_and_comments(&mut self) {
        while self.pos < self.buf.len() {
            let c = self.buf[self.pos];
            if c == b'#' {
                while self.pos < self.buf.len() && self.buf[self.pos] != b'\n' {
                    self.pos += 1;
                }
            } else if c.is_ascii_whitespace() {
                self.pos += 1;
            } else {
                break;
            }
        }
    }

    fn number(&mut self, what: &'static str) -> Result<u32, PnmError> {
        self.skip_space_and_comments();
        let start = self.pos;
        while self.pos < self.buf.len() && self.buf[self.pos].is_ascii_digit() {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(PnmError::Header(what));
        }
        std::str::from_utf8(&self.buf[start..self.pos])
            .ok()
            .and_then(|s| s.parse().ok())
            .ok_or(PnmError::Header(what))
    }
}

/// True when the stream starts with a netpbm magic this codec reads.
pub fn sniff(bytes: &[u8]) -> bool {
    bytes.len() >= 2 && bytes[0] == b'P' && matches!(bytes[1], b'2' | b'3' | b'5' | b'6')
}

pub fn decode(bytes: &[u8]) -> Result<PnmRaster, PnmError> {
    if !sniff(bytes) {
        return Err(PnmError::BadMagic);
    }
    let (channels, binary) = match bytes[1] {
        b'2' => (1, false),
        b'3' => (3, false),
        b'5' => (1, true),
        _ => (3, true),
    };
    let mut cur = Cursor { buf: bytes, pos: 2 };
    let width = cur.number("width")? as usize;
    let height = cur.number("height")? as usize;
    let maxval = cur.number("maxval")?;
    if width == 0 || height == 0 {
        return Err(PnmError::Header("zero dimension"));
    }
    if maxval == 0 || maxval > 65535 {
        return Err(PnmError::Header("maxval out of range"));
    }
    let expected = width
        .checked_mul(height)
        .and_then(|n| n.checked_mul(channels))
        .ok_or(PnmError::Header("dimensions overflow"))?;

    let mut samples = Vec::with_capacity(expected.min(1 << 24));
    if binary {
        // exactly one whitespace byte separates the header from the raster
        if cur.pos >= bytes.len() || !bytes[cur.pos].is_ascii_whitespace() {
            return Err(PnmError::Header("missing raster separator"));
        }
        let raster = &bytes[cur.pos + 1..];
        let wide = maxval > 255;
        let step = if wide { 2 } else { 1 };
        let got = raster.len() / step;
        if got < expected {
            return Err(PnmError::Truncated { expected, got });
        }
        for i in 0..expected {
            let v = if wide {
                u16::from_be_bytes([raster[2 * i], raster[2 * i + 1]])
            } else {
                raster[i] as u16
            };
            if v as u32 > maxval {
                return Err(PnmError::SampleRange { value: v as u32, maxval });
            }
            samples.push(v);
        }
    } else {
        for got in 0..expected {
            let v = match cur.number("sample") {
                Ok(v) => v,
                Err(_) => return Err(PnmError::Truncated { expected, got }),
            };
            if v > maxval {
                return Err(PnmError::SampleRange { value: v, maxval });
            }
            samples.push(v as u16);
        }
    }
    Ok(PnmRaster { width, height, channels, maxval, samples })
}

fn encode(magic: &str, width: usize, height: usize, data: &[u8]) -> Vec<u8> {
    let header = format!("{magic}\n{width} {height}\n255\n");
    let mut out = Vec::with_capacity(header.len() + data.len());
    out.extend_from_slice(header.as_bytes());
    out.extend_from_slice(data);
    out
}

/// Binary P6; `rgb` holds `3 * width * height` bytes.
pub fn encode_ppm(width: usize, height: usize, rgb: &[u8]) -> Vec<u8> {
    assert_eq!(rgb.len(), 3 * width * height, "rgb buffer size");
    encode("P6", width, height, rgb)
}

/// Binary P5; `gray` holds `width * height` bytes.
pub fn encode_pgm(width: usize, height: usize, gray: &[u8]) -> Vec<u8> {
    assert_eq!(gray.len(), width * height, "gray buffer size");
    encode("P5", width, height, gray)
}
