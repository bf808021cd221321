//! Binary model files: magic, layout version, activation, dims, then θ as
//! little-endian f64 in block order.

use std::path::Path;

use super::{Activation, FlatParams, NetSpec};
use crate::error::{Error, Result};

pub const MODEL_LAYOUT_VERSION: u32 = 1;
const MAGIC: &[u8; 8] = b"CNONET\0\0";

pub fn write_model(spec: &NetSpec, params: &FlatParams) -> Vec<u8> {
    let mut out = Vec::with_capacity(32 + 8 * (spec.dims().len() + params.len()));
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&MODEL_LAYOUT_VERSION.to_le_bytes());
    let act: u32 = match spec.activation() {
        Activation::Relu => 0,
        Activation::Prelu => 1,
    };
    out.extend_from_slice(&act.to_le_bytes());
    out.extend_from_slice(&(spec.dims().len() as u64).to_le_bytes());
    for &d in spec.dims() {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for &v in params.as_slice() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub(crate) struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    pub(crate) fn new(buf: &'a [u8]) -> Self {
        Self { buf, pos: 0 }
    }

    pub(crate) fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len());
        let end = end.ok_or_else(|| Error::Format(format!("truncated input at byte {}", self.pos)))?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    pub(crate) fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    pub(crate) fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub(crate) fn usize(&mut self) -> Result<usize> {
        usize::try_from(self.u64()?).map_err(|_| Error::Format("length does not fit usize".into()))
    }

    pub(crate) fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    pub(crate) fn f64s(&mut self, n: usize) -> Result<Vec<f64>> {
        let raw = self.take(n.checked_mul(8).ok_or_else(|| Error::Format("length overflow".into()))?)?;
        Ok(raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect())
    }

    pub(crate) fn finished(&self) -> bool {
        self.pos == self.buf.len()
    }
}

pub fn read_model(bytes: &[u8]) -> Result<(NetSpec, FlatParams)> {
    let mut cur = Cursor::new(bytes);
    let (spec, params) = read_model_from(&mut cur)?;
    if !cur.finished() {
        return Err(Error::Format("trailing bytes after model".into()));
    }
    Ok((spec, params))
}

pub(crate) fn read_model_from(cur: &mut Cursor<'_>) -> Result<(NetSpec, FlatParams)> {
    if cur.take(8)? != MAGIC {
        return Err(Error::Format("not a model file (bad magic)".into()));
    }
    let version = cur.u32()?;
    if version != MODEL_LAYOUT_VERSION {
        return Err(Error::Format(format!("unknown model layout version {version}")));
    }
    let activation = match cur.u32()? {
        0 => Activation::Relu,
        1 => Activation::Prelu,
        other => return Err(Error::Format(format!("unknown activation tag {other}"))),
    };
    let n_dims = cur.usize()?;
    if n_dims > 1 << 20 {
        return Err(Error::Format("implausible dim count".into()));
    }
    let dims = (0..n_dims).map(|_| cur.usize()).collect::<Result<Vec<_>>>()?;
    let spec = NetSpec::new(dims, activation).map_err(|e| Error::Format(e.to_string()))?;
    let len = cur.usize()?;
    if len != spec.param_count() {
        return Err(Error::Format(format!("stored {len} params, spec needs {}", spec.param_count())));
    }
    let theta = cur.f64s(len)?;
    let params = FlatParams::new(&spec, theta).map_err(|e| Error::Format(e.to_string()))?;
    Ok((spec, params))
}

pub fn write_model_file(path: &Path, spec: &NetSpec, params: &FlatParams) -> Result<()> {
    std::fs::write(path, write_model(spec, params)).map_err(|e| Error::io(path, e))
}

pub fn read_model_file(path: &Path) -> Result<(NetSpec, FlatParams)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_model(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_is_bit_exact() {
        let spec = NetSpec::prelu(vec![2, 3, 1]).unwrap();
        let theta: Vec<f64> = (0..17).map(|i| (i as f64).sin() * 1e-3 + f64::EPSILON).collect();
        let p = FlatParams::new(&spec, theta).unwrap();
        let bytes = write_model(&spec, &p);
        let (s2, p2) = read_model(&bytes).unwrap();
        assert_eq!(s2, spec);
        assert!(p.as_slice().iter().zip(p2.as_slice()).all(|(a, b)| a.to_bits() == b.to_bits()));
    }

    #[test]
    fn truncation_is_a_format_error() {
        let spec = NetSpec::relu(vec![1, 1]).unwrap();
        let bytes = write_model(&spec, &FlatParams::zeros(&spec));
        assert!(read_model(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(read_model(&bad).is_err());
    }
}
