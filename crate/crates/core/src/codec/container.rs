//! Compressed checkpoint container, all integers little-endian, sections
//! back to back:
//!
//! ```text
//! "QMOE0001" | rows u64 | cols u64 | dictionary hash u64
//! | row_off (rows + 1) x u32 | row_minmax rows x (min, max) bf16 bits
//! | codewords row_off[rows] x u16
//! ```

use std::io::{Read, Write};

use half::bf16;

use super::compressed::CompressedMatrix;
use crate::quant::MinMax;
use crate::{Error, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"QMOE0001";

pub fn write_checkpoint<W: Write>(c: &CompressedMatrix, mut out: W) -> Result<()> {
    c.check_layout()?;
    let mut buf = Vec::with_capacity(32 + 4 * (c.rows + 1) + 4 * c.rows + 2 * c.codewords.len());
    buf.extend_from_slice(CHECKPOINT_MAGIC);
    buf.extend_from_slice(&(c.rows as u64).to_le_bytes());
    buf.extend_from_slice(&(c.cols as u64).to_le_bytes());
    buf.extend_from_slice(&c.dict_hash.to_le_bytes());
    for off in &c.row_off {
        buf.extend_from_slice(&off.to_le_bytes());
    }
    for mm in &c.row_minmax {
        buf.extend_from_slice(&mm.min.to_bits().to_le_bytes());
        buf.extend_from_slice(&mm.max.to_bits().to_le_bytes());
    }
    for cw in &c.codewords {
        buf.extend_from_slice(&cw.to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> Result<&'a [u8]> {
        if self.buf.len() - self.pos < n {
            return Err(Error::corrupt(format!("checkpoint truncated in {what}")));
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u64(&mut self, what: &str) -> Result<u64> {
        Ok(u64::from_le_bytes(
            self.take(8, what)?.try_into().expect("8 bytes"),
        ))
    }

    /// Byte length of `count` items of `width` bytes, if it fits the input.
    fn section(&mut self, count: u64, width: usize, what: &str) -> Result<&'a [u8]> {
        let n = usize::try_from(count)
            .ok()
            .and_then(|c| c.checked_mul(width))
            .ok_or_else(|| Error::corrupt(format!("{what} length overflows")))?;
        self.take(n, what)
    }
}

pub fn read_checkpoint<R: Read>(mut input: R) -> Result<CompressedMatrix> {
    let mut buf = Vec::new();
    input.read_to_end(&mut buf)?;
    CompressedMatrix::from_bytes(&buf)
}

impl CompressedMatrix {
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut buf = Vec::new();
        write_checkpoint(self, &mut buf)?;
        Ok(buf)
    }

    pub fn from_bytes(buf: &[u8]) -> Result<Self> {
        let mut rd = Reader { buf, pos: 0 };
        if rd.take(8, "magic")? != CHECKPOINT_MAGIC {
            return Err(Error::corrupt("not a compressed checkpoint"));
        }
        let rows = rd.u64("header")?;
        let cols = rd.u64("header")?;
        let dict_hash = rd.u64("header")?;
        let row_off: Vec<u32> = rd
            .section(rows.saturating_add(1), 4, "row offsets")?
            .chunks_exact(4)
            .map(|b| u32::from_le_bytes(b.try_into().expect("4 bytes")))
            .collect();
        let row_minmax = rd
            .section(rows, 4, "row min/max")?
            .chunks_exact(4)
            .map(|b| {
                MinMax::new(
                    bf16::from_bits(u16::from_le_bytes([b[0], b[1]])),
                    bf16::from_bits(u16::from_le_bytes([b[2], b[3]])),
                )
            })
            .collect();
        let n_codewords = *row_off.last().expect("rows + 1 offsets") as u64;
        let codewords = rd
            .section(n_codewords, 2, "codewords")?
            .chunks_exact(2)
            .map(|b| u16::from_le_bytes([b[0], b[1]]))
            .collect();
        if rd.pos != buf.len() {
            return Err(Error::corrupt(format!(
                "{} trailing bytes after codewords",
                buf.len() - rd.pos
            )));
        }
        let c = CompressedMatrix {
            rows: rows as usize,
            cols: usize::try_from(cols).map_err(|_| Error::corrupt("column count overflows"))?,
            codewords,
            row_off,
            row_minmax,
            dict_hash,
        };
        c.check_layout()?;
        Ok(c)
    }
}
