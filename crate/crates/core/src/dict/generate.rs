use std::cmp::Ordering;
use std::collections::BinaryHeap;

use super::dictionary::{Dictionary, DICT_SIZE};
use super::distribution::PairDistribution;
use super::words::{pack_decode_words, MAX_PAIRS};
use super::PAIR_SYMBOLS;
use crate::Result;

/// A queued pair sequence. Pairs are packed as nibbles, first pair in the
/// most significant slot, so that equal-length sequences compare
/// lexicographically as integers.
#[derive(Debug, Clone, Copy)]
struct Candidate {
    log_p: f64,
    zeros: u8,
    nonzeros: u8,
    len: u8,
    packed: u64,
}

impl Candidate {
    fn root() -> Self {
        Self {
            log_p: 0.0,
            zeros: 0,
            nonzeros: 0,
            len: 0,
            packed: 0,
        }
    }

    fn child(&self, sym: u8, dist: &PairDistribution) -> Self {
        let z = (sym / 3 == 0) as u8 + sym.is_multiple_of(3) as u8;
        let zeros = self.zeros + z;
        let nonzeros = self.nonzeros + (2 - z);
        Self {
            log_p: dist.log_probability(zeros as u32, nonzeros as u32),
            zeros,
            nonzeros,
            len: self.len + 1,
            packed: self.packed | (sym as u64) << (4 * (MAX_PAIRS - 1 - self.len as usize)),
        }
    }

    fn pairs(&self) -> Vec<u8> {
        (0..self.len as usize)
            .map(|i| ((self.packed >> (4 * (MAX_PAIRS - 1 - i))) & 0xf) as u8)
            .collect()
    }

    /// Equal-probability order: shorter first, then lexicographic.
    fn tie_break(&self, other: &Self) -> Ordering {
        other
            .len
            .cmp(&self.len)
            .then(other.packed.cmp(&self.packed))
    }
}

// `Greater` pops first.
impl Ord for Candidate {
    fn cmp(&self, other: &Self) -> Ordering {
        if (self.zeros, self.nonzeros) == (other.zeros, other.nonzeros) {
            return self.tie_break(other);
        }
        match self.log_p.partial_cmp(&other.log_p) {
            Some(Ordering::Equal) | None => self.tie_break(other),
            Some(ord) => ord,
        }
    }
}

impl PartialOrd for Candidate {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl PartialEq for Candidate {
    fn eq(&self, other: &Self) -> bool {
        self.cmp(other) == Ordering::Equal
    }
}

impl Eq for Candidate {}

/// Builds the dictionary by best-first expansion of pair sequences.
///
/// Every popped sequence is at least as probable as anything still queued,
/// so entries come out in non-increasing probability order. Sequences that
/// already hold [`MAX_PAIRS`] pairs are not expanded further.
pub fn generate_dictionary(dist: &PairDistribution) -> Result<Dictionary> {
    dist.check_for_dictionary()?;
    let mut queue = BinaryHeap::with_capacity(PAIR_SYMBOLS * DICT_SIZE + 1);
    queue.push(Candidate::root());
    let mut words = Vec::with_capacity(DICT_SIZE);
    while words.len() < DICT_SIZE {
        let cand = queue
            .pop()
            .expect("queue never drains before the dictionary fills");
        if cand.len > 0 {
            words.push(pack_decode_words(&cand.pairs())?);
        }
        if (cand.len as usize) < MAX_PAIRS {
            for sym in 0..PAIR_SYMBOLS as u8 {
                queue.push(cand.child(sym, dist));
            }
        }
    }
    Dictionary::from_words(dist.p0(), words)
}
