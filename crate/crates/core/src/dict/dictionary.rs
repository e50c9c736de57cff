use std::collections::HashSet;

use sha2::{Digest, Sha256};

use super::distribution::PairDistribution;
use super::trie::Trie;
use super::words::{unpack_decode_words, DecodeWords};
use super::{pair_values, PAIR_SYMBOLS};
use crate::{Error, Result};

/// Number of codewords: every `u16` is a valid codeword.
pub const DICT_SIZE: usize = 1 << 16;

/// Immutable decoding dictionary with its encoding trie.
#[derive(Debug, Clone)]
pub struct Dictionary {
    p0: f64,
    words: Vec<DecodeWords>,
    trie: Trie,
    hash: u64,
}

impl Dictionary {
    /// Validates a decode-word table and builds the trie for it.
    pub fn from_words(p0: f64, words: Vec<DecodeWords>) -> Result<Self> {
        if words.len() != DICT_SIZE {
            return Err(Error::corrupt(format!(
                "dictionary needs {DICT_SIZE} entries, got {}",
                words.len()
            )));
        }
        let mut trie = Trie::new();
        let mut seen = HashSet::with_capacity(DICT_SIZE);
        for (cw, w) in words.iter().enumerate() {
            let pairs = unpack_decode_words(*w)
                .map_err(|e| Error::corrupt(format!("dictionary entry {cw}: {e}")))?;
            if !seen.insert(*w) {
                return Err(Error::corrupt(format!("duplicate dictionary entry {cw}")));
            }
            trie.insert(&pairs, cw as u16);
        }
        for sym in 0..PAIR_SYMBOLS as u8 {
            if trie.get(&[sym]).is_none() {
                return Err(Error::corrupt(format!(
                    "dictionary lacks the single pair {:?}",
                    pair_values(sym)
                )));
            }
        }
        let hash = hash_words(&words);
        Ok(Self {
            p0,
            words,
            trie,
            hash,
        })
    }

    pub fn p0(&self) -> f64 {
        self.p0
    }

    pub fn len(&self) -> usize {
        self.words.len()
    }

    pub fn is_empty(&self) -> bool {
        self.words.is_empty()
    }

    pub fn words(&self) -> &[DecodeWords] {
        &self.words
    }

    pub fn decode_words(&self, codeword: u16) -> DecodeWords {
        self.words[codeword as usize]
    }

    /// Pair symbols of an entry.
    pub fn entry(&self, codeword: u16) -> Vec<u8> {
        unpack_decode_words(self.words[codeword as usize]).expect("validated on construction")
    }

    pub fn trie(&self) -> &Trie {
        &self.trie
    }

    /// Longest entry matching a prefix of `pairs[start..]`. Always consumes
    /// at least one pair since every single pair is an entry.
    pub fn longest_prefix(&self, pairs: &[u8], start: usize) -> (u16, usize) {
        self.trie
            .longest_prefix(pairs, start)
            .expect("every single pair is a dictionary entry")
    }

    /// Content hash of the decode-word table, used to tie compressed data
    /// to the dictionary it was encoded with.
    pub fn hash(&self) -> u64 {
        self.hash
    }

    /// Size of the decode-word table in bytes.
    pub fn table_bytes(&self) -> usize {
        self.words.len() * 8
    }

    /// Natural log probability of an entry under `dist`.
    pub fn entry_log_probability(&self, codeword: u16, dist: &PairDistribution) -> f64 {
        let (zeros, nonzeros) = value_counts(self.decode_words(codeword));
        dist.log_probability(zeros, nonzeros)
    }
}

/// `(zeros, nonzeros)` among the values of an entry.
pub(crate) fn value_counts(w: DecodeWords) -> (u32, u32) {
    let n = w.value_count();
    let zeros = (0..n).filter(|&i| w.value(i) == 0).count() as u32;
    (zeros, n as u32 - zeros)
}

fn hash_words(words: &[DecodeWords]) -> u64 {
    let mut hasher = Sha256::new();
    for w in words {
        hasher.update(w.0[0].to_le_bytes());
        hasher.update(w.0[1].to_le_bytes());
    }
    let digest = hasher.finalize();
    u64::from_le_bytes(digest[..8].try_into().expect("sha256 is 32 bytes"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dict::{pair_symbol, MAX_PAIRS};
    use crate::test_support::default_dictionary;

    #[test]
    fn size_and_storage() {
        let d = default_dictionary();
        assert_eq!(d.len(), DICT_SIZE);
        assert_eq!(d.table_bytes(), 512 * 1024);
        // Prefix-closed: one trie node per entry plus the root.
        assert_eq!(d.trie().node_count(), DICT_SIZE + 1);
    }

    #[test]
    fn leading_entries_are_zero_runs() {
        let d = default_dictionary();
        assert_eq!(d.entry(0), vec![pair_symbol(0, 0)]);
        for k in 1..=12 {
            assert_eq!(d.entry(k as u16 - 1), vec![0u8; k], "entry {}", k - 1);
        }
        let longest = d
            .trie()
            .get(&[0u8; MAX_PAIRS])
            .expect("14 zero pairs present");
        assert!(longest < 30, "max zero run at index {longest}");
    }

    #[test]
    fn probabilities_never_increase() {
        let d = default_dictionary();
        let dist = PairDistribution::default();
        let lp: Vec<f64> = (0..DICT_SIZE)
            .map(|i| d.entry_log_probability(i as u16, &dist))
            .collect();
        for (i, w) in lp.windows(2).enumerate() {
            assert!(w[0] >= w[1], "entry {i}: {} < {}", w[0], w[1]);
        }
    }

    #[test]
    fn ties_are_ordered_shorter_then_lexicographic() {
        let d = default_dictionary();
        for i in 0..DICT_SIZE - 1 {
            let (a, b) = (d.words()[i], d.words()[i + 1]);
            if value_counts(a) == value_counts(b) {
                assert!(d.entry(i as u16) < d.entry(i as u16 + 1), "entry {i}");
            }
        }
    }

    #[test]
    fn lengths_in_bounds_and_singles_present() {
        let d = default_dictionary();
        for i in 0..DICT_SIZE {
            let n = d.entry(i as u16).len();
            assert!((1..=MAX_PAIRS).contains(&n));
        }
        for sym in 0..9u8 {
            assert!(d.trie().get(&[sym]).is_some());
        }
    }

    #[test]
    fn rejects_broken_tables() {
        let d = default_dictionary();
        let mut words = d.words().to_vec();
        words[5] = words[6];
        assert!(Dictionary::from_words(d.p0(), words).is_err());
        assert!(Dictionary::from_words(d.p0(), d.words()[..10].to_vec()).is_err());
    }

    #[test]
    fn file_round_trip() {
        let d = default_dictionary();
        let bytes = d.to_bytes();
        assert_eq!(bytes.len(), crate::dict::DICT_FILE_LEN);
        assert_eq!(&bytes[..8], b"QMOEDICT");
        let back = Dictionary::from_bytes(&bytes).unwrap();
        assert_eq!(back.hash(), d.hash());
        assert_eq!(back.words(), d.words());
        assert_eq!(back.p0(), d.p0());

        assert!(Dictionary::from_bytes(&bytes[..bytes.len() - 3]).is_err());
        let mut bad = bytes.clone();
        bad[8] = 9;
        assert!(Dictionary::from_bytes(&bad).is_err());
        let mut bad = bytes;
        bad[0] = b'X';
        assert!(Dictionary::from_bytes(&bad).is_err());
    }

    #[test]
    fn longest_prefix_progress() {
        let d = default_dictionary();
        assert_eq!(d.longest_prefix(&[0u8; MAX_PAIRS], 0).1, MAX_PAIRS);
        let (cw, n) = d.longest_prefix(&[pair_symbol(1, 1)], 0);
        assert_eq!(n, 1);
        assert_eq!(d.entry(cw), vec![pair_symbol(1, 1)]);
        // Alternating rare pairs still make progress on every call.
        let stream: Vec<u8> = (0..200).map(|i| if i % 2 == 0 { 4 } else { 8 }).collect();
        let mut pos = 0;
        let mut calls = 0;
        while pos < stream.len() {
            let (cw, n) = d.longest_prefix(&stream, pos);
            assert!(n >= 1);
            assert_eq!(d.entry(cw), stream[pos..pos + n]);
            pos += n;
            calls += 1;
        }
        assert!(calls <= stream.len());
    }
}
