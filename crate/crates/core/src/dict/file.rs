//! Dictionary file: `"QMOEDICT"`, a version byte, `p0` as little-endian
//! `f64`, then 2^16 entries of two little-endian `u32` decode words. The
//! trie is rebuilt on load.

use std::io::{self, Read, Write};

use super::dictionary::{Dictionary, DICT_SIZE};
use super::words::DecodeWords;
use crate::{Error, Result};

pub const DICT_MAGIC: &[u8; 8] = b"QMOEDICT";
pub const DICT_VERSION: u8 = 1;
pub const DICT_FILE_LEN: usize = 8 + 1 + 8 + DICT_SIZE * 8;

pub fn write_dictionary<W: Write>(dict: &Dictionary, mut out: W) -> Result<()> {
    let mut buf = Vec::with_capacity(DICT_FILE_LEN);
    buf.extend_from_slice(DICT_MAGIC);
    buf.push(DICT_VERSION);
    buf.extend_from_slice(&dict.p0().to_le_bytes());
    for w in dict.words() {
        buf.extend_from_slice(&w.0[0].to_le_bytes());
        buf.extend_from_slice(&w.0[1].to_le_bytes());
    }
    out.write_all(&buf)?;
    Ok(())
}

pub fn read_dictionary<R: Read>(mut input: R) -> Result<Dictionary> {
    let mut buf = Vec::with_capacity(DICT_FILE_LEN);
    input.read_to_end(&mut buf)?;
    if buf.len() < 17 || &buf[..8] != DICT_MAGIC {
        return Err(Error::corrupt("not a dictionary file"));
    }
    if buf[8] != DICT_VERSION {
        return Err(Error::corrupt(format!(
            "unsupported dictionary version {}",
            buf[8]
        )));
    }
    if buf.len() != DICT_FILE_LEN {
        return Err(Error::corrupt(format!(
            "dictionary file is {} bytes, expected {DICT_FILE_LEN}",
            buf.len()
        )));
    }
    let p0 = f64::from_le_bytes(buf[9..17].try_into().expect("8 bytes"));
    let words = buf[17..]
        .chunks_exact(8)
        .map(|c| {
            DecodeWords([
                u32::from_le_bytes(c[..4].try_into().expect("4 bytes")),
                u32::from_le_bytes(c[4..].try_into().expect("4 bytes")),
            ])
        })
        .collect();
    Dictionary::from_words(p0, words)
}

impl Dictionary {
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut buf = Vec::with_capacity(DICT_FILE_LEN);
        write_dictionary(self, &mut buf).expect("writing to a Vec cannot fail");
        buf
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        read_dictionary(io::Cursor::new(bytes))
    }
}
