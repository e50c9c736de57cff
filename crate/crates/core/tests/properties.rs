use std::cmp::Ordering;
use std::sync::OnceLock;

use qmoe::bf16;
use qmoe::codec::{decompress, encode, fused_matvec};
use qmoe::dict::{
    generate_dictionary, pair_values, Dictionary, PairDistribution, DICT_SIZE, MAX_PAIRS,
};
use qmoe::quant::{MinMax, TernaryMatrix};
use qmoe::stats::{compression_rate, sample_ternary};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn dict() -> &'static Dictionary {
    static D: OnceLock<Dictionary> = OnceLock::new();
    D.get_or_init(|| generate_dictionary(&PairDistribution::default()).unwrap())
}

fn counts(seq: &[u8]) -> (u32, u32) {
    let mut zeros = 0;
    for &s in seq {
        let (a, b) = pair_values(s);
        zeros += (a == 0) as u32 + (b == 0) as u32;
    }
    (zeros, 2 * seq.len() as u32 - zeros)
}

// Independent of the heap: enumerate every sequence at least as likely as
// the least likely entry, sort by probability, then length, then symbols.
#[test]
fn dictionary_is_the_most_probable_prefix_of_a_full_sort() {
    let p0: f64 = 0.885;
    let (lz, ln) = (p0.ln(), ((1.0 - p0) / 2.0).ln());
    let logp = |(z, n): (u32, u32)| z as f64 * lz + n as f64 * ln;
    let d = dict();
    let threshold = logp(counts(&d.entry((DICT_SIZE - 1) as u16)));

    let mut all: Vec<Vec<u8>> = Vec::new();
    let mut stack: Vec<Vec<u8>> = vec![Vec::new()];
    while let Some(seq) = stack.pop() {
        if seq.len() == MAX_PAIRS {
            continue;
        }
        for s in 0..9u8 {
            let mut next = seq.clone();
            next.push(s);
            if logp(counts(&next)) >= threshold {
                all.push(next.clone());
                stack.push(next);
            }
        }
    }
    assert!(all.len() >= DICT_SIZE);
    all.sort_by(|a, b| {
        logp(counts(b))
            .partial_cmp(&logp(counts(a)))
            .unwrap_or(Ordering::Equal)
            .then(a.len().cmp(&b.len()))
            .then(a.cmp(b))
    });
    for (cw, expected) in all.iter().take(DICT_SIZE).enumerate() {
        assert_eq!(&d.entry(cw as u16), expected, "codeword {cw}");
    }
}

#[test]
fn row_permutation_preserves_size() {
    let t = sample_ternary(&PairDistribution::default(), 64, 512, 1);
    let mut order: Vec<usize> = (0..64).collect();
    order.reverse();
    order.swap(3, 40);
    let codes: Vec<u8> = order
        .iter()
        .flat_map(|&r| t.row_codes(r).to_vec())
        .collect();
    let p = TernaryMatrix::with_unit_grid(64, 512, codes).unwrap();
    let (a, b) = (encode(&t, dict()).unwrap(), encode(&p, dict()).unwrap());
    assert_eq!(a.codewords.len(), b.codewords.len());
    for (i, &r) in order.iter().enumerate() {
        assert_eq!(b.row_codewords(i), a.row_codewords(r));
    }
}

#[test]
fn zero_padding_leaves_products_unchanged() {
    let mut rng = ChaCha8Rng::seed_from_u64(2);
    let (rows, cols, pad) = (20, 101, 27);
    let codes: Vec<u8> = (0..rows * cols).map(|_| rng.random_range(0..3)).collect();
    let minmax = vec![MinMax::new(bf16::from_f32(-0.03), bf16::from_f32(0.02)); rows];
    let x: Vec<f32> = (0..cols).map(|_| rng.random_range(-1.0..1.0)).collect();

    let padded_cols = cols + pad;
    let mut padded = Vec::new();
    for r in 0..rows {
        padded.extend_from_slice(&codes[r * cols..(r + 1) * cols]);
        padded.extend(std::iter::repeat_n(0, pad));
    }
    let t = TernaryMatrix::new(rows, padded_cols, padded, minmax.clone()).unwrap();
    let mut xp = x.clone();
    xp.resize(padded_cols, 0.0);
    let c = encode(&t, dict()).unwrap();
    let mut y = vec![bf16::ZERO; rows];
    fused_matvec(&c, &xp, dict(), &mut y).unwrap();

    for r in 0..rows {
        let dot: f64 = (0..cols)
            .map(|j| {
                let v = match codes[r * cols + j] {
                    0 => 0.0,
                    1 => minmax[r].min.to_f64(),
                    _ => minmax[r].max.to_f64(),
                };
                v * x[j] as f64
            })
            .sum();
        assert!((y[r].to_f64() - dot).abs() < 1e-2);
    }
    assert_eq!(decompress(&c, dict()).unwrap(), t);
}

#[test]
fn rate_increases_with_sparsity() {
    let mut last = 0.0;
    for p0 in [0.5, 0.7, 0.8, 0.885, 0.95] {
        let t = sample_ternary(&PairDistribution::new(p0).unwrap(), 64, 4096, 3);
        let rate = compression_rate(&encode(&t, dict()).unwrap()).moe_only_rate;
        assert!(rate > last, "rate {rate} at p0 {p0} not above {last}");
        last = rate;
    }
}
