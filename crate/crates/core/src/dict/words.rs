use crate::{Error, Result};

/// Longest sequence a dictionary entry can hold, in pairs.
pub const MAX_PAIRS: usize = 14;

const VALUES_PER_WORD: usize = 14;
const COUNT_MASK: u32 = 0xf;

/// The two 32-bit decode words of one dictionary entry.
///
/// Bits `0..4` of both words hold the pair count `n`. Word 0 carries ternary
/// values `0..14` of the sequence at bits `4 + 2i`, word 1 carries values
/// `14..28` the same way. Slots past `2n` values are zero.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Default)]
pub struct DecodeWords(pub [u32; 2]);

impl DecodeWords {
    pub fn pair_count(&self) -> usize {
        (self.0[0] & COUNT_MASK) as usize
    }

    pub fn value_count(&self) -> usize {
        2 * self.pair_count()
    }

    /// Ternary value slot `i` in `0..28`, as a lane of the decoding warp
    /// would extract it.
    pub fn value(&self, i: usize) -> u8 {
        let word = self.0[i / VALUES_PER_WORD];
        ((word >> (4 + 2 * (i % VALUES_PER_WORD))) & 0b11) as u8
    }
}

/// Packs a sequence of pair symbols into decode words.
pub fn pack_decode_words(pairs: &[u8]) -> Result<DecodeWords> {
    let n = pairs.len();
    if n == 0 || n > MAX_PAIRS {
        return Err(Error::invalid(format!(
            "entry must hold 1..={MAX_PAIRS} pairs, got {n}"
        )));
    }
    let mut words = [n as u32, n as u32];
    for (p, &sym) in pairs.iter().enumerate() {
        if sym >= 9 {
            return Err(Error::invalid(format!("pair symbol out of range: {sym}")));
        }
        for (k, v) in [sym / 3, sym % 3].into_iter().enumerate() {
            let i = 2 * p + k;
            words[i / VALUES_PER_WORD] |= (v as u32) << (4 + 2 * (i % VALUES_PER_WORD));
        }
    }
    Ok(DecodeWords(words))
}

/// Inverse of [`pack_decode_words`], rejecting malformed words.
pub fn unpack_decode_words(words: DecodeWords) -> Result<Vec<u8>> {
    let n = words.pair_count();
    if n == 0 || n > MAX_PAIRS {
        return Err(Error::corrupt(format!("decode words carry pair count {n}")));
    }
    if (words.0[1] & COUNT_MASK) as usize != n {
        return Err(Error::corrupt("decode words disagree on the pair count"));
    }
    let mut pairs = Vec::with_capacity(n);
    for i in 0..2 * VALUES_PER_WORD {
        let v = words.value(i);
        if i >= 2 * n {
            if v != 0 {
                return Err(Error::corrupt("non-zero padding in decode words"));
            }
            continue;
        }
        if v > 2 {
            return Err(Error::corrupt("decode word value out of ternary range"));
        }
        if i % 2 == 1 {
            pairs.push(3 * words.value(i - 1) + v);
        }
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dict::pair_symbol;
    use proptest::prelude::*;

    #[test]
    fn single_zero_pair_is_count_only() {
        let w = pack_decode_words(&[pair_symbol(0, 0)]).unwrap();
        assert_eq!(w.0, [1, 1]);
    }

    #[test]
    fn hand_packed_example() {
        let w = pack_decode_words(&[pair_symbol(0, 0), pair_symbol(1, 2)]).unwrap();
        assert_eq!(w.0, [2306, 2]);
        assert_eq!(2306, 2 | (1 << 8) | (2 << 10));
    }

    #[test]
    fn second_word_starts_at_value_fourteen() {
        let mut pairs = vec![0u8; 7];
        pairs.push(pair_symbol(2, 1));
        let w = pack_decode_words(&pairs).unwrap();
        assert_eq!(w.0[0], 8);
        assert_eq!(w.0[1], 8 | (2 << 4) | (1 << 6));
        assert_eq!(w.value(14), 2);
        assert_eq!(w.value(15), 1);
    }

    #[test]
    fn length_bounds() {
        assert!(pack_decode_words(&[]).is_err());
        assert!(pack_decode_words(&[0; 15]).is_err());
        assert!(pack_decode_words(&[9]).is_err());
        assert!(pack_decode_words(&[8; 14]).is_ok());
    }

    #[test]
    fn malformed_words_are_rejected() {
        assert!(unpack_decode_words(DecodeWords([0, 0])).is_err());
        assert!(unpack_decode_words(DecodeWords([15, 15])).is_err());
        assert!(unpack_decode_words(DecodeWords([1, 2])).is_err());
        assert!(unpack_decode_words(DecodeWords([1 | (3 << 4), 1])).is_err());
        assert!(unpack_decode_words(DecodeWords([1 | (1 << 8), 1])).is_err());
    }

    proptest! {
        #[test]
        fn pack_unpack_round_trip(pairs in prop::collection::vec(0u8..9, 1..=MAX_PAIRS)) {
            let w = pack_decode_words(&pairs).unwrap();
            prop_assert_eq!(w.0[0] & 0xf, w.0[1] & 0xf);
            prop_assert_eq!(unpack_decode_words(w).unwrap(), pairs);
        }
    }
}
