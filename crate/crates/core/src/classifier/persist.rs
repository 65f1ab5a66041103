//! Binary model files.
//!
//! Layout: `CSGT`, one version byte, `u32` layer count, then `count + 1` `u32`
//! sizes. Each layer follows as its row-major weights and then its biases, and
//! the file ends with the feature means and standard deviations. Integers and
//! `f64` values are little-endian.

use super::mlp::{FeatureStats, Layer, MlpModel};
use super::ClassifierError;
use crate::scalar::Scalar;

pub const MODEL_MAGIC: &[u8; 4] = b"CSGT";
pub const MODEL_VERSION: u8 = 1;

const MAX_WIDTH: u32 = 1 << 16;

pub fn save_model<T: Scalar>(m: &MlpModel<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MODEL_MAGIC);
    out.push(MODEL_VERSION);
    let sizes = m.layer_sizes();
    out.extend_from_slice(&(m.layers().len() as u32).to_le_bytes());
    for s in sizes {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    let mut put = |vals: &[T]| {
        for v in vals {
            out.extend_from_slice(&v.as_f64().to_le_bytes());
        }
    };
    for l in m.layers() {
        put(&l.weights);
        put(&l.biases);
    }
    let stats = m.feature_stats();
    put(&stats.mean);
    put(&stats.stddev);
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ClassifierError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| corrupt(format!("truncated at byte {}", self.bytes.len())))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ClassifierError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn floats<T: Scalar>(&mut self, n: usize) -> Result<Vec<T>, ClassifierError> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| corrupt("size overflow".into()))?)?;
        raw.chunks_exact(8)
            .map(|c| {
                let v = f64::from_le_bytes(c.try_into().unwrap());
                if v.is_finite() { Ok(T::of(v)) } else { Err(corrupt("non-finite parameter".into())) }
            })
            .collect()
    }
}

fn corrupt(msg: String) -> ClassifierError {
    ClassifierError::CorruptModel(msg)
}

pub fn load_model<T: Scalar>(bytes: &[u8]) -> Result<MlpModel<T>, ClassifierError> {
    let mut c = Cursor { bytes, pos: 0 };
    if c.take(4).ok() != Some(MODEL_MAGIC.as_slice()) {
        return Err(corrupt("bad magic".into()));
    }
    let version = c.take(1)?[0];
    if version != MODEL_VERSION {
        return Err(corrupt(format!("unsupported version {version}, expected {MODEL_VERSION}")));
    }
    let count = c.u32()?;
    if count != 3 {
        return Err(corrupt(format!("expected 3 layers, found {count}")));
    }
    let mut sizes = Vec::with_capacity(4);
    for _ in 0..=count {
        let s = c.u32()?;
        if s == 0 || s > MAX_WIDTH {
            return Err(corrupt(format!("layer width {s} out of range")));
        }
        sizes.push(s as usize);
    }
    let mut layers = Vec::with_capacity(3);
    for w in sizes.windows(2) {
        let (inputs, outputs) = (w[0], w[1]);
        let weights = c.floats(inputs * outputs)?;
        let biases = c.floats(outputs)?;
        layers.push(Layer { inputs, outputs, weights, biases });
    }
    let mean = c.floats(sizes[0])?;
    let stddev = c.floats(sizes[0])?;
    if c.pos != bytes.len() {
        return Err(corrupt(format!("{} trailing bytes", bytes.len() - c.pos)));
    }
    MlpModel::from_parts(layers, FeatureStats { mean, stddev }).map_err(|e| corrupt(e.to_string()))
}
