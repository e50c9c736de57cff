use super::PAIR_SYMBOLS;

const NONE: u32 = u32::MAX;

#[derive(Debug, Clone)]
struct Node {
    children: [u32; PAIR_SYMBOLS],
    codeword: u32,
}

impl Node {
    fn new() -> Self {
        Self {
            children: [NONE; PAIR_SYMBOLS],
            codeword: NONE,
        }
    }
}

/// Prefix tree over pair symbols mapping dictionary sequences to codewords.
#[derive(Debug, Clone)]
pub struct Trie {
    nodes: Vec<Node>,
}

impl Default for Trie {
    fn default() -> Self {
        Self::new()
    }
}

impl Trie {
    pub fn new() -> Self {
        Self {
            nodes: vec![Node::new()],
        }
    }

    pub fn insert(&mut self, pairs: &[u8], codeword: u16) {
        let mut node = 0usize;
        for &sym in pairs {
            let next = self.nodes[node].children[sym as usize];
            node = if next == NONE {
                self.nodes.push(Node::new());
                let id = (self.nodes.len() - 1) as u32;
                self.nodes[node].children[sym as usize] = id;
                id as usize
            } else {
                next as usize
            };
        }
        self.nodes[node].codeword = codeword as u32;
    }

    pub fn get(&self, pairs: &[u8]) -> Option<u16> {
        let mut node = 0usize;
        for &sym in pairs {
            let next = self.nodes[node].children[sym as usize];
            if next == NONE {
                return None;
            }
            node = next as usize;
        }
        let cw = self.nodes[node].codeword;
        (cw != NONE).then_some(cw as u16)
    }

    /// Longest entry that is a prefix of `pairs[start..]`, as
    /// `(codeword, pairs consumed)`. `None` only if not even the first pair
    /// is an entry, which a valid dictionary rules out.
    pub fn longest_prefix(&self, pairs: &[u8], start: usize) -> Option<(u16, usize)> {
        let mut node = 0usize;
        let mut best = None;
        for (i, &sym) in pairs[start..].iter().enumerate() {
            let next = self.nodes[node].children[sym as usize];
            if next == NONE {
                break;
            }
            node = next as usize;
            let cw = self.nodes[node].codeword;
            if cw != NONE {
                best = Some((cw as u16, i + 1));
            }
        }
        best
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}
