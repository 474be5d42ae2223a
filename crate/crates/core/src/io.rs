//! The `ECT1` binary tensor format.
//!
//! Layout: the 4 magic bytes `ECT1`, a newline-terminated JSON header
//! `{"order":p,"shape":[...],"dtype":"f64","layout":"first-index-fastest"}`,
//! then `prod(shape)` little-endian `f64` values in layout order.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{Matrix, Tensor};

const MAGIC: &[u8; 4] = b"ECT1";
const LAYOUT: &str = "first-index-fastest";

#[derive(Serialize, Deserialize)]
struct Header {
    order: usize,
    shape: Vec<usize>,
    dtype: String,
    layout: String,
}

pub fn write_tensor<W: Write>(mut w: W, t: &Tensor) -> Result<()> {
    let header = Header {
        order: t.order(),
        shape: t.shape().to_vec(),
        dtype: "f64".into(),
        layout: LAYOUT.into(),
    };
    w.write_all(MAGIC)?;
    serde_json::to_writer(&mut w, &header)?;
    w.write_all(b"\n")?;
    let mut buf = Vec::with_capacity(8 * t.numel());
    for v in t.data() {
        buf.extend_from_slice(&v.to_le_bytes());
    }
    w.write_all(&buf)?;
    Ok(())
}

pub fn read_tensor<R: Read>(mut r: R) -> Result<Tensor> {
    let mut bytes = Vec::new();
    r.read_to_end(&mut bytes)?;
    parse_tensor(&bytes)
}

pub fn parse_tensor(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(Error::Format("bad magic (expected ECT1)".into()));
    }
    let rest = &bytes[4..];
    let nl = rest
        .iter()
        .position(|&b| b == b'\n')
        .ok_or_else(|| Error::Format("header is not newline-terminated".into()))?;
    let header: Header = serde_json::from_slice(&rest[..nl])
        .map_err(|e| Error::Format(format!("bad header: {e}")))?;
    if header.dtype != "f64" {
        return Err(Error::Format(format!("unsupported dtype {:?}", header.dtype)));
    }
    if header.layout != LAYOUT {
        return Err(Error::Format(format!("unsupported layout {:?}", header.layout)));
    }
    if header.order != header.shape.len() {
        return Err(Error::Format(format!(
            "order {} disagrees with shape {:?}",
            header.order, header.shape
        )));
    }
    let payload = &rest[nl + 1..];
    let numel = header
        .shape
        .iter()
        .try_fold(1usize, |acc, &m| acc.checked_mul(m))
        .ok_or_else(|| Error::Format("shape overflows".into()))?;
    if payload.len() != numel.saturating_mul(8) {
        return Err(Error::Format(format!(
            "expected {} data bytes, found {}",
            numel * 8,
            payload.len()
        )));
    }
    let data = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("chunk of 8")))
        .collect();
    Tensor::new(header.shape, data).map_err(|e| Error::Format(e.to_string()))
}

pub fn save_tensor(path: impl AsRef<Path>, t: &Tensor) -> Result<()> {
    let mut buf = Vec::new();
    write_tensor(&mut buf, t)?;
    fs::write(path, buf)?;
    Ok(())
}

pub fn load_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = fs::read(path)?;
    parse_tensor(&bytes).map_err(|e| match e {
        Error::Format(msg) => Error::Format(format!("{}: {msg}", path.display())),
        other => other,
    })
}

pub fn save_matrix(path: impl AsRef<Path>, m: &Matrix) -> Result<()> {
    save_tensor(path, &Tensor::from_matrix(m))
}

pub fn load_matrix(path: impl AsRef<Path>) -> Result<Matrix> {
    let t = load_tensor(path)?;
    if t.order() != 2 {
        return Err(Error::Format(format!("expected a matrix, got shape {:?}", t.shape())));
    }
    Ok(Matrix::from_column_slice(t.shape()[0], t.shape()[1], t.data()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip_in_memory() {
        let t = Tensor::from_fn(&[2, 3, 2], |i| (i[0] + 10 * i[1] + 100 * i[2]) as f64 - 0.5);
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();
        assert_eq!(&buf[..4], b"ECT1");
        assert_eq!(read_tensor(&buf[..]).unwrap(), t);
    }

    #[test]
    fn rejects_bad_inputs() {
        let t = Tensor::filled(&[2], 1.0);
        let mut buf = Vec::new();
        write_tensor(&mut buf, &t).unwrap();

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(matches!(parse_tensor(&bad_magic), Err(Error::Format(_))));

        let truncated = &buf[..buf.len() - 1];
        assert!(matches!(parse_tensor(truncated), Err(Error::Format(_))));

        let s = String::from_utf8_lossy(&buf[..buf.len() - 16]).replace("f64", "f32");
        let mut bad_dtype = s.into_bytes();
        bad_dtype.extend_from_slice(&buf[buf.len() - 16..]);
        assert!(matches!(parse_tensor(&bad_dtype), Err(Error::Format(_))));
    }
}
