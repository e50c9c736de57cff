use crate::quant::TokenBlock;
use crate::{Error, Result};

use super::list_buffer::ListBuffer;

/// Token traffic between the bulk and fast tiers. Totals and per-token
/// tallies only ever grow.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct TransferCounters {
    pub bulk_to_fast: u64,
    pub fast_to_bulk: u64,
    pub reads_per_token: Vec<u32>,
    pub writes_per_token: Vec<u32>,
}

impl TransferCounters {
    fn new(tokens: usize) -> Self {
        Self {
            bulk_to_fast: 0,
            fast_to_bulk: 0,
            reads_per_token: vec![0; tokens],
            writes_per_token: vec![0; tokens],
        }
    }

    /// Traffic since `earlier`.
    pub fn since(&self, earlier: &TransferCounters) -> TransferCounters {
        let diff = |now: &[u32], then: &[u32]| now.iter().zip(then).map(|(a, b)| a - b).collect();
        TransferCounters {
            bulk_to_fast: self.bulk_to_fast - earlier.bulk_to_fast,
            fast_to_bulk: self.fast_to_bulk - earlier.fast_to_bulk,
            reads_per_token: diff(&self.reads_per_token, &earlier.reads_per_token),
            writes_per_token: diff(&self.writes_per_token, &earlier.writes_per_token),
        }
    }
}

/// Tokens resident in the fast tier. Hand back with
/// [`TierStore::write_back`] or [`TierStore::discard`].
#[derive(Debug)]
#[must_use]
pub struct Staged {
    pub positions: Vec<usize>,
    pub tokens: TokenBlock,
    pub special: Vec<bool>,
}

impl Staged {
    pub fn len(&self) -> usize {
        self.positions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.positions.is_empty()
    }
}

/// Bulk tier holding the [`ListBuffer`] plus a capacity-limited fast tier.
#[derive(Debug)]
pub struct TierStore {
    bulk: ListBuffer,
    fast_capacity: usize,
    occupancy: usize,
    peak_occupancy: usize,
    counters: TransferCounters,
}

impl TierStore {
    pub fn new(bulk: ListBuffer, fast_capacity: usize) -> Result<Self> {
        if fast_capacity == 0 {
            return Err(Error::invalid("fast tier capacity must be positive"));
        }
        let counters = TransferCounters::new(bulk.num_tokens());
        Ok(Self {
            bulk,
            fast_capacity,
            occupancy: 0,
            peak_occupancy: 0,
            counters,
        })
    }

    pub fn buffer(&self) -> &ListBuffer {
        &self.bulk
    }

    pub(crate) fn buffer_mut(&mut self) -> &mut ListBuffer {
        &mut self.bulk
    }

    pub fn into_buffer(self) -> ListBuffer {
        self.bulk
    }

    pub fn fast_capacity(&self) -> usize {
        self.fast_capacity
    }

    pub fn occupancy(&self) -> usize {
        self.occupancy
    }

    pub fn free(&self) -> usize {
        self.fast_capacity - self.occupancy
    }

    pub fn peak_occupancy(&self) -> usize {
        self.peak_occupancy
    }

    pub fn counters(&self) -> &TransferCounters {
        &self.counters
    }

    /// Copies the tokens at `positions` into the fast tier.
    pub fn fetch(&mut self, positions: &[usize]) -> Result<Staged> {
        if positions.len() > self.free() {
            return Err(Error::CapacityExceeded {
                capacity: self.fast_capacity,
                requested: self.occupancy + positions.len(),
            });
        }
        let g = self.bulk.collect(positions);
        self.occupancy += positions.len();
        self.peak_occupancy = self.peak_occupancy.max(self.occupancy);
        self.counters.bulk_to_fast += positions.len() as u64;
        for &p in positions {
            self.counters.reads_per_token[p] += 1;
        }
        Ok(Staged {
            positions: g.positions,
            tokens: g.tokens,
            special: g.special,
        })
    }

    /// Writes `outputs` over the staged tokens' slots and frees the space.
    pub fn write_back(&mut self, staged: Staged, outputs: &TokenBlock) -> Result<()> {
        self.occupancy -= staged.len();
        self.bulk
            .scatter_expert_outputs(&staged.positions, outputs)?;
        self.counters.fast_to_bulk += staged.len() as u64;
        for &p in &staged.positions {
            self.counters.writes_per_token[p] += 1;
        }
        Ok(())
    }

    /// Frees the space of staged tokens without writing anything.
    pub fn discard(&mut self, staged: Staged) {
        self.occupancy -= staged.len();
    }
}
