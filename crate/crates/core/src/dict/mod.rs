//! The shared static decoding dictionary.
//!
//! Ternary values are grouped into pairs; a pair `(a, b)` is the symbol
//! `3a + b` in `0..9`. The dictionary holds the 2^16 most probable pair
//! sequences of length 1 to [`MAX_PAIRS`] under an i.i.d. model where
//! value 0 has probability `p0` and the two non-zero values split the rest.

mod dictionary;
mod distribution;
mod file;
mod generate;
mod trie;
mod words;

pub use dictionary::{Dictionary, DICT_SIZE};
pub use distribution::{PairDistribution, DEFAULT_P0};
pub use file::{read_dictionary, write_dictionary, DICT_FILE_LEN, DICT_MAGIC, DICT_VERSION};
pub use generate::generate_dictionary;
pub use trie::Trie;
pub use words::{pack_decode_words, unpack_decode_words, DecodeWords, MAX_PAIRS};

/// Number of distinct pair symbols.
pub const PAIR_SYMBOLS: usize = 9;

pub fn pair_symbol(a: u8, b: u8) -> u8 {
    debug_assert!(a < 3 && b < 3);
    3 * a + b
}

pub fn pair_values(symbol: u8) -> (u8, u8) {
    (symbol / 3, symbol % 3)
}
