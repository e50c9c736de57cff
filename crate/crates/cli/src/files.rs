//! File formats owned by the CLI. All integers and floats little-endian.
//!
//! Ternary dump: `"QMOETERN"`, rows `u64`, cols `u64`, per row min and max
//! as bf16 bits (`u16` each), then `rows * cols` codes, one byte each.
//! Vectors: raw `f32` with no header.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;

use anyhow::{bail, Context, Result};
use qmoe::codec::{read_checkpoint, write_checkpoint, CompressedMatrix};
use qmoe::dict::{read_dictionary, write_dictionary, Dictionary};
use qmoe::quant::TernaryMatrix;

pub const DUMP_MAGIC: &[u8; 8] = b"QMOETERN";

pub fn load_dictionary(path: &Path) -> Result<Dictionary> {
    let f = File::open(path).with_context(|| format!("opening dictionary {}", path.display()))?;
    read_dictionary(BufReader::new(f))
        .with_context(|| format!("reading dictionary {}", path.display()))
}

pub fn save_dictionary(dict: &Dictionary, path: &Path) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    write_dictionary(dict, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<CompressedMatrix> {
    let f = File::open(path).with_context(|| format!("opening checkpoint {}", path.display()))?;
    read_checkpoint(BufReader::new(f))
        .with_context(|| format!("reading checkpoint {}", path.display()))
}

pub fn save_checkpoint(c: &CompressedMatrix, path: &Path) -> Result<()> {
    let f = File::create(path).with_context(|| format!("creating {}", path.display()))?;
    let mut w = BufWriter::new(f);
    write_checkpoint(c, &mut w)?;
    w.flush()?;
    Ok(())
}

pub fn ternary_dump(t: &TernaryMatrix) -> Vec<u8> {
    let mut out = Vec::with_capacity(24 + 4 * t.rows() + t.codes().len());
    out.extend_from_slice(DUMP_MAGIC);
    out.extend_from_slice(&(t.rows() as u64).to_le_bytes());
    out.extend_from_slice(&(t.cols() as u64).to_le_bytes());
    for mm in t.row_minmax() {
        out.extend_from_slice(&mm.min.to_bits().to_le_bytes());
        out.extend_from_slice(&mm.max.to_bits().to_le_bytes());
    }
    out.extend_from_slice(t.codes());
    out
}

pub fn read_vector(path: &Path) -> Result<Vec<f32>> {
    let bytes = fs::read(path).with_context(|| format!("reading vector {}", path.display()))?;
    if bytes.len() % 4 != 0 {
        bail!(
            "{}: {} bytes is not a whole number of f32 values",
            path.display(),
            bytes.len()
        );
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|b| f32::from_le_bytes(b.try_into().unwrap()))
        .collect())
}

pub fn write_vector(path: &Path, v: &[f32]) -> Result<()> {
    let bytes: Vec<u8> = v.iter().flat_map(|x| x.to_le_bytes()).collect();
    fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}
