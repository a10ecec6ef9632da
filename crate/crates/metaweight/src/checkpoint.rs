//! Binary checkpoint files: named parameter segments with shapes,
//! little-endian float64, behind a version header.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::tensor::{DenseMatrix, ParamVector};

const MAGIC: &[u8; 4] = b"MWCK";
const VERSION: u32 = 1;

pub fn save(params: &ParamVector, path: &Path) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    w.write_all(MAGIC)?;
    w.write_all(&VERSION.to_le_bytes())?;
    w.write_all(&(params.segments().len() as u32).to_le_bytes())?;
    for seg in params.segments() {
        let name = seg.name.as_bytes();
        w.write_all(&(name.len() as u32).to_le_bytes())?;
        w.write_all(name)?;
        w.write_all(&(seg.values.rows() as u32).to_le_bytes())?;
        w.write_all(&(seg.values.cols() as u32).to_le_bytes())?;
        for v in seg.values.data() {
            w.write_all(&v.to_le_bytes())?;
        }
    }
    Ok(())
}

pub fn load(path: &Path) -> Result<ParamVector> {
    let mut r = BufReader::new(File::open(path)?);
    let mut magic = [0u8; 4];
    r.read_exact(&mut magic)?;
    if &magic != MAGIC {
        return Err(Error::BadMagic {
            expected: u32::from_be_bytes(*MAGIC),
            got: u32::from_be_bytes(magic),
        });
    }
    let mut buf4 = [0u8; 4];
    r.read_exact(&mut buf4)?;
    let version = u32::from_le_bytes(buf4);
    if version != VERSION {
        return Err(Error::Parse {
            line: 0,
            message: format!("unsupported checkpoint version {version}"),
        });
    }
    r.read_exact(&mut buf4)?;
    let n_segments = u32::from_le_bytes(buf4) as usize;
    let mut segments = Vec::with_capacity(n_segments);
    let mut names = Vec::with_capacity(n_segments);
    for _ in 0..n_segments {
        r.read_exact(&mut buf4)?;
        let name_len = u32::from_le_bytes(buf4) as usize;
        let mut name = vec![0u8; name_len];
        r.read_exact(&mut name)?;
        let name = String::from_utf8(name).map_err(|e| Error::Parse {
            line: 0,
            message: format!("segment name not utf-8: {e}"),
        })?;
        r.read_exact(&mut buf4)?;
        let rows = u32::from_le_bytes(buf4) as usize;
        r.read_exact(&mut buf4)?;
        let cols = u32::from_le_bytes(buf4) as usize;
        let mut data = vec![0.0f64; rows * cols];
        let mut buf8 = [0u8; 8];
        for d in data.iter_mut() {
            r.read_exact(&mut buf8)?;
            *d = f64::from_le_bytes(buf8);
        }
        names.push(name);
        segments.push(DenseMatrix::from_vec(rows, cols, data)?);
    }
    ParamVector::new(
        names
            .iter()
            .map(|n| n.as_str())
            .zip(segments)
            .collect::<Vec<_>>(),
    )
}
