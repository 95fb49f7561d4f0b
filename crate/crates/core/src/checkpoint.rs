//! Binary parameter container.
//!
//! Layout: magic `PDRF`, u32 format version, then records until EOF. Each
//! record is `u32 name_len, name bytes, u32 rank, rank × u32 dims,
//! prod(dims) × f32`, all little-endian.

use std::io::{Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::real::Real;
use crate::tensor::ParamTensor;

pub const MAGIC: &[u8; 4] = b"PDRF";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct Record {
    pub name: String,
    pub dims: Vec<usize>,
    pub values: Vec<f32>,
}

impl Record {
    pub fn new(name: impl Into<String>, dims: &[usize], values: Vec<f32>) -> Self {
        Self {
            name: name.into(),
            dims: dims.to_vec(),
            values,
        }
    }

    pub fn from_param<F: Real>(p: &ParamTensor<F>) -> Self {
        Self {
            name: p.name.clone(),
            dims: p.shape.clone(),
            values: p.values.iter().map(|v| v.as_f32()).collect(),
        }
    }
}

pub fn write_records<W: Write>(mut w: W, records: &[Record]) -> Result<()> {
    w.write_all(MAGIC)?;
    w.write_all(&FORMAT_VERSION.to_le_bytes())?;
    for r in records {
        let n: usize = r.dims.iter().product();
        if n != r.values.len() {
            return Err(Error::Checkpoint(format!(
                "record `{}` has {} values for dims {:?}",
                r.name,
                r.values.len(),
                r.dims
            )));
        }
        w.write_all(&(r.name.len() as u32).to_le_bytes())?;
        w.write_all(r.name.as_bytes())?;
        w.write_all(&(r.dims.len() as u32).to_le_bytes())?;
        for d in &r.dims {
            w.write_all(&(*d as u32).to_le_bytes())?;
        }
        for v in &r.values {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

fn take<'a>(buf: &'a [u8], pos: &mut usize, n: usize) -> Result<&'a [u8]> {
    let end = pos
        .checked_add(n)
        .filter(|e| *e <= buf.len())
        .ok_or_else(|| Error::Checkpoint("truncated record".into()))?;
    let s = &buf[*pos..end];
    *pos = end;
    Ok(s)
}

fn take_u32(buf: &[u8], pos: &mut usize) -> Result<u32> {
    let b = take(buf, pos, 4)?;
    Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
}

pub fn read_records<R: Read>(mut r: R) -> Result<Vec<Record>> {
    let mut buf = Vec::new();
    r.read_to_end(&mut buf)?;
    if buf.len() < 8 || &buf[..4] != MAGIC {
        return Err(Error::Checkpoint("missing PDRF magic".into()));
    }
    let mut pos = 4;
    let version = take_u32(&buf, &mut pos)?;
    if version != FORMAT_VERSION {
        return Err(Error::Checkpoint(format!(
            "format version {version} (this build reads {FORMAT_VERSION})"
        )));
    }
    let mut records = Vec::new();
    while pos < buf.len() {
        let name_len = take_u32(&buf, &mut pos)? as usize;
        let name = String::from_utf8(take(&buf, &mut pos, name_len)?.to_vec())
            .map_err(|_| Error::Checkpoint("record name is not utf-8".into()))?;
        let rank = take_u32(&buf, &mut pos)? as usize;
        let dims = (0..rank)
            .map(|_| take_u32(&buf, &mut pos).map(|d| d as usize))
            .collect::<Result<Vec<_>>>()?;
        let n: usize = dims.iter().product();
        let raw = take(&buf, &mut pos, n * 4)?;
        let values = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        records.push(Record { name, dims, values });
    }
    Ok(records)
}

pub fn save(path: &Path, records: &[Record]) -> Result<()> {
    let mut bytes = Vec::new();
    write_records(&mut bytes, records)?;
    std::fs::write(path, bytes)?;
    Ok(())
}

pub fn load(path: &Path) -> Result<Vec<Record>> {
    let f = std::fs::File::open(path).map_err(|e| match e.kind() {
        std::io::ErrorKind::NotFound => Error::MissingFile(path.to_path_buf()),
        _ => e.into(),
    })?;
    read_records(std::io::BufReader::new(f))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn header_layout() {
        let mut bytes = Vec::new();
        write_records(&mut bytes, &[Record::new("a", &[2], vec![1.0, 2.0])]).unwrap();
        assert_eq!(&bytes[..4], b"PDRF");
        assert_eq!(&bytes[4..8], &1u32.to_le_bytes());
        assert_eq!(&bytes[8..12], &1u32.to_le_bytes());
        assert_eq!(bytes[12], b'a');
        assert_eq!(bytes.len(), 8 + 4 + 1 + 4 + 4 + 8);
    }

    #[test]
    fn version_mismatch_errors() {
        let mut bytes = Vec::new();
        write_records(&mut bytes, &[]).unwrap();
        bytes[4] = 9;
        assert!(read_records(&bytes[..]).is_err());
    }

    #[test]
    fn truncated_errors() {
        let mut bytes = Vec::new();
        write_records(&mut bytes, &[Record::new("abc", &[3], vec![1.0; 3])]).unwrap();
        bytes.pop();
        assert!(read_records(&bytes[..]).is_err());
    }

    proptest! {
        #[test]
        fn round_trip_bit_exact(
            recs in proptest::collection::vec(
                ("[a-z.]{1,12}", proptest::collection::vec(any::<u32>(), 0..20)),
                0..5,
            )
        ) {
            let records: Vec<Record> = recs
                .into_iter()
                .map(|(name, bits)| {
                    let values: Vec<f32> = bits.into_iter().map(f32::from_bits).collect();
                    Record::new(name, &[values.len()], values)
                })
                .collect();
            let mut a = Vec::new();
            write_records(&mut a, &records).unwrap();
            let back = read_records(&a[..]).unwrap();
            let mut b = Vec::new();
            write_records(&mut b, &back).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
