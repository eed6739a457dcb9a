//! Bit-packed joint-typicality decoder.
//!
//! Each codeword is stored as one-hot bit planes, so the joint symbol
//! counts `N(a, b)` against a received block are popcounts of plane
//! intersections. Codewords that fail the `x` condition can never be
//! decoded and are dropped up front; a block failing the `y` condition
//! decodes to 0 without a scan.
//!
//! For binary alphabets with `n <= 128` the joint counts are fixed by
//! `(|x|, |y|, N(1,1))`, so the verdict for every count triple is tabulated
//! once and codewords are grouped by weight. Within a group the accepted
//! `N(1,1)` values form a window and the scan is a single AND + popcount +
//! range compare per codeword.

use super::typical::TypicalityParams;
use super::{Codebook, CodebookError};

const BINARY_TABLE_MAX_N: usize = 128;
const SCAN_CHUNK: usize = 256;

#[derive(Clone, Debug)]
pub struct Decoder {
    params: TypicalityParams,
    n: usize,
    words_per_row: usize,
    num_words: usize,
    index: Index,
}

#[derive(Clone, Debug)]
enum Index {
    Binary(BinaryIndex),
    General(GeneralIndex),
}

#[derive(Clone, Debug)]
struct BinaryIndex {
    /// `ones` plane of every row, `words_per_row` words each.
    row_bits: Vec<u64>,
    row_weight: Vec<u32>,
    row_x_typical: Vec<bool>,
    /// x-typical rows grouped by weight.
    groups: Vec<Group>,
    /// `verdict[(py * (n+1) + px) * (n+1) + n11]`.
    verdict: Vec<bool>,
    /// `windows[py * (n+1) + px]`.
    windows: Vec<Window>,
}

#[derive(Clone, Debug)]
struct Group {
    weight: u32,
    rows: Vec<u32>,
    bits: Vec<u64>,
}

#[derive(Clone, Copy, Debug)]
enum Window {
    Empty,
    Range { lo: u32, span: u32 },
    /// Accepted counts are not contiguous; fall back to the verdict table.
    Table,
}

#[derive(Clone, Debug)]
struct GeneralIndex {
    /// Row-major `[row][symbol][word]` one-hot planes.
    planes: Vec<u64>,
    typical_rows: Vec<u32>,
    row_x_typical: Vec<bool>,
}

fn pack_plane(block: &[usize], symbol: usize, out: &mut [u64]) {
    out.fill(0);
    for (i, &s) in block.iter().enumerate() {
        if s == symbol {
            out[i / 64] |= 1u64 << (i % 64);
        }
    }
}

#[inline(always)]
fn range_hits_generic(chunk: &[u64], yw: u64, lo: u32, span: u32) -> u32 {
    chunk
        .iter()
        .map(|&xw| ((xw & yw).count_ones().wrapping_sub(lo) <= span) as u32)
        .sum()
}

#[cfg(target_arch = "x86_64")]
#[target_feature(enable = "popcnt,avx2")]
unsafe fn range_hits_avx2(chunk: &[u64], yw: u64, lo: u32, span: u32) -> u32 {
    range_hits_generic(chunk, yw, lo, span)
}

/// Number of words whose overlap with `yw` falls in `lo..=lo + span`.
fn range_hits(chunk: &[u64], yw: u64, lo: u32, span: u32) -> u32 {
    #[cfg(target_arch = "x86_64")]
    if std::arch::is_x86_feature_detected!("avx2") && std::arch::is_x86_feature_detected!("popcnt") {
        // SAFETY: both features were just detected on this CPU.
        return unsafe { range_hits_avx2(chunk, yw, lo, span) };
    }
    range_hits_generic(chunk, yw, lo, span)
}

impl Decoder {
    pub fn new(codebook: &Codebook, params: &TypicalityParams) -> Result<Self, CodebookError> {
        let n = params.n();
        if codebook.n() != n {
            return Err(CodebookError::LengthMismatch {
                got: codebook.n(),
                expected: n,
            });
        }
        let (nx, ny) = (params.inputs(), params.outputs());
        for row in codebook.rows() {
            params.check_block(row, nx)?;
        }
        let words_per_row = n.div_ceil(64);
        let row_x_typical: Vec<bool> = codebook
            .rows()
            .map(|r| params.x_typical(&TypicalityParams::symbol_counts(r, nx)))
            .collect();
        let index = if nx == 2 && ny == 2 && n <= BINARY_TABLE_MAX_N {
            Index::Binary(Self::binary_index(codebook, params, words_per_row, row_x_typical))
        } else {
            let mut planes = vec![0u64; codebook.num_words() * nx * words_per_row];
            for (r, row) in codebook.rows().enumerate() {
                for a in 0..nx {
                    let at = (r * nx + a) * words_per_row;
                    pack_plane(row, a, &mut planes[at..at + words_per_row]);
                }
            }
            let typical_rows = (0..codebook.num_words() as u32)
                .filter(|&r| row_x_typical[r as usize])
                .collect();
            Index::General(GeneralIndex {
                planes,
                typical_rows,
                row_x_typical,
            })
        };
        Ok(Self {
            params: params.clone(),
            n,
            words_per_row,
            num_words: codebook.num_words(),
            index,
        })
    }

    fn binary_index(
        codebook: &Codebook,
        params: &TypicalityParams,
        wpr: usize,
        row_x_typical: Vec<bool>,
    ) -> BinaryIndex {
        let n = params.n();
        let side = n + 1;
        let mut row_bits = vec![0u64; codebook.num_words() * wpr];
        let mut row_weight = Vec::with_capacity(codebook.num_words());
        for (r, row) in codebook.rows().enumerate() {
            let plane = &mut row_bits[r * wpr..(r + 1) * wpr];
            pack_plane(row, 1, plane);
            row_weight.push(plane.iter().map(|w| w.count_ones()).sum::<u32>());
        }
        let mut groups: Vec<Group> = (0..=n as u32)
            .map(|weight| Group {
                weight,
                rows: Vec::new(),
                bits: Vec::new(),
            })
            .collect();
        for r in 0..codebook.num_words() {
            if row_x_typical[r] {
                let g = &mut groups[row_weight[r] as usize];
                g.rows.push(r as u32);
                g.bits.extend_from_slice(&row_bits[r * wpr..(r + 1) * wpr]);
            }
        }
        groups.retain(|g| !g.rows.is_empty());

        let mut verdict = vec![false; side * side * side];
        let mut windows = vec![Window::Empty; side * side];
        for py in 0..=n {
            for px in 0..=n {
                let lo = (px + py).saturating_sub(n);
                let hi = px.min(py);
                let mut accepted = Vec::new();
                for n11 in lo..=hi {
                    let n10 = px - n11;
                    let n01 = py - n11;
                    let n00 = n + n11 - px - py;
                    let counts = [n00 as u32, n01 as u32, n10 as u32, n11 as u32];
                    if params.xy_typical(&counts) {
                        verdict[(py * side + px) * side + n11] = true;
                        accepted.push(n11 as u32);
                    }
                }
                windows[py * side + px] = match (accepted.first(), accepted.last()) {
                    (Some(&a), Some(&b)) if (b - a) as usize + 1 == accepted.len() => Window::Range {
                        lo: a,
                        span: b - a,
                    },
                    (Some(_), Some(_)) => Window::Table,
                    _ => Window::Empty,
                };
            }
        }
        BinaryIndex {
            row_bits,
            row_weight,
            row_x_typical,
            groups,
            verdict,
            windows,
        }
    }

    pub fn num_words(&self) -> usize {
        self.num_words
    }

    pub fn params(&self) -> &TypicalityParams {
        &self.params
    }

    /// `Some(planes)` for a received block passing the `y` condition.
    fn prepare(&self, y: &[usize]) -> Result<Option<Received>, CodebookError> {
        let ny = self.params.outputs();
        self.params.check_block(y, ny)?;
        if !self
            .params
            .y_typical(&TypicalityParams::symbol_counts(y, ny))
        {
            return Ok(None);
        }
        let wpr = self.words_per_row;
        Ok(Some(match &self.index {
            Index::Binary(_) => {
                let mut ones = vec![0u64; wpr];
                pack_plane(y, 1, &mut ones);
                let weight = ones.iter().map(|w| w.count_ones()).sum();
                Received::Binary { ones, weight }
            }
            Index::General(_) => {
                let mut planes = vec![0u64; ny * wpr];
                for b in 0..ny {
                    pack_plane(y, b, &mut planes[b * wpr..(b + 1) * wpr]);
                }
                Received::General { planes }
            }
        }))
    }

    /// Counts typical codewords, stopping once `limit` are found. Returns
    /// the count and the 0-based index of the last one seen.
    fn scan(&self, rx: &Received, limit: usize) -> (usize, usize) {
        let wpr = self.words_per_row;
        let mut count = 0usize;
        let mut last = 0usize;
        match (&self.index, rx) {
            (Index::Binary(ix), Received::Binary { ones, weight }) => {
                let side = self.n + 1;
                let base = *weight as usize * side;
                for g in &ix.groups {
                    let window = ix.windows[base + g.weight as usize];
                    let (lo, span) = match window {
                        Window::Empty => continue,
                        Window::Range { lo, span } => (lo, span),
                        Window::Table => (0, u32::MAX),
                    };
                    let table = &ix.verdict[(base + g.weight as usize) * side..][..side];
                    let accept = |c: u32| match window {
                        Window::Table => table[c as usize],
                        _ => c.wrapping_sub(lo) <= span,
                    };
                    if wpr == 1 && !matches!(window, Window::Table) {
                        // Count hits per chunk without branching; only a
                        // chunk with a hit is walked again for its rows.
                        let yw = ones[0];
                        for (c, chunk) in g.bits.chunks(SCAN_CHUNK).enumerate() {
                            if range_hits(chunk, yw, lo, span) == 0 {
                                continue;
                            }
                            for (j, &xw) in chunk.iter().enumerate() {
                                if (xw & yw).count_ones().wrapping_sub(lo) <= span {
                                    count += 1;
                                    last = g.rows[c * SCAN_CHUNK + j] as usize;
                                    if count >= limit {
                                        return (count, last);
                                    }
                                }
                            }
                        }
                    } else if wpr == 1 {
                        let yw = ones[0];
                        for (j, &xw) in g.bits.iter().enumerate() {
                            if accept((xw & yw).count_ones()) {
                                count += 1;
                                last = g.rows[j] as usize;
                                if count >= limit {
                                    return (count, last);
                                }
                            }
                        }
                    } else {
                        for (j, xr) in g.bits.chunks_exact(wpr).enumerate() {
                            let c: u32 = xr.iter().zip(ones).map(|(a, b)| (a & b).count_ones()).sum();
                            if accept(c) {
                                count += 1;
                                last = g.rows[j] as usize;
                                if count >= limit {
                                    return (count, last);
                                }
                            }
                        }
                    }
                }
            }
            (Index::General(ix), Received::General { planes }) => {
                let mut counts = vec![0u32; self.params.inputs() * self.params.outputs()];
                for &r in &ix.typical_rows {
                    if self.general_row_typical(ix, r as usize, planes, &mut counts) {
                        count += 1;
                        last = r as usize;
                        if count >= limit {
                            return (count, last);
                        }
                    }
                }
            }
            _ => unreachable!("received block prepared for another index"),
        }
        (count, last)
    }

    fn general_row_typical(
        &self,
        ix: &GeneralIndex,
        row: usize,
        y_planes: &[u64],
        counts: &mut [u32],
    ) -> bool {
        let (nx, ny, wpr) = (self.params.inputs(), self.params.outputs(), self.words_per_row);
        let x_planes = &ix.planes[row * nx * wpr..(row + 1) * nx * wpr];
        for a in 0..nx {
            let xa = &x_planes[a * wpr..(a + 1) * wpr];
            for b in 0..ny {
                let yb = &y_planes[b * wpr..(b + 1) * wpr];
                counts[a * ny + b] = xa.iter().zip(yb).map(|(p, q)| (p & q).count_ones()).sum();
            }
        }
        self.params.xy_typical(counts)
    }

    fn row_typical(&self, rx: &Received, row: usize) -> bool {
        let wpr = self.words_per_row;
        match (&self.index, rx) {
            (Index::Binary(ix), Received::Binary { ones, weight }) => {
                if !ix.row_x_typical[row] {
                    return false;
                }
                let side = self.n + 1;
                let px = ix.row_weight[row] as usize;
                let bits = &ix.row_bits[row * wpr..(row + 1) * wpr];
                let c: u32 = bits.iter().zip(ones).map(|(a, b)| (a & b).count_ones()).sum();
                ix.verdict[(*weight as usize * side + px) * side + c as usize]
            }
            (Index::General(ix), Received::General { planes }) => {
                if !ix.row_x_typical[row] {
                    return false;
                }
                let mut counts = vec![0u32; self.params.inputs() * self.params.outputs()];
                self.general_row_typical(ix, row, planes, &mut counts)
            }
            _ => unreachable!("received block prepared for another index"),
        }
    }

    /// The unique jointly typical message, or 0.
    pub fn decode(&self, y: &[usize]) -> Result<usize, CodebookError> {
        let Some(rx) = self.prepare(y)? else {
            return Ok(0);
        };
        Ok(match self.scan(&rx, 2) {
            (1, row) => row + 1,
            _ => 0,
        })
    }

    /// Same as `decode(y) == message`, without a full scan when the sent
    /// codeword is not typical with `y`.
    pub fn decodes_to(&self, y: &[usize], message: usize) -> Result<bool, CodebookError> {
        if message == 0 || message > self.num_words {
            return Ok(false);
        }
        let Some(rx) = self.prepare(y)? else {
            return Ok(false);
        };
        if !self.row_typical(&rx, message - 1) {
            return Ok(false);
        }
        Ok(self.scan(&rx, 2).0 == 1)
    }
}

enum Received {
    Binary { ones: Vec<u64>, weight: u32 },
    General { planes: Vec<u64> },
}

#[cfg(test)]
mod tests {
    use super::super::{decode, generate_codebook, is_jointly_typical};
    use super::*;
    use crate::bits::BitString;
    use crate::channel::{Channel, Distribution};
    use crate::rng::{Categorical, StreamKey};
    use proptest::prelude::*;

    fn random_block(len: usize, alphabet: usize, seed: u64) -> Vec<usize> {
        let c = Categorical::new(&vec![1.0; alphabet].iter().map(|v| v / alphabet as f64).collect::<Vec<_>>());
        let mut rng = StreamKey::from_u64(seed).rng();
        (0..len).map(|_| c.sample(&mut rng)).collect()
    }

    #[test]
    fn identity_channel_recovers_rows() {
        let rows: Vec<Vec<usize>> = (0u64..8).map(|v| (0..3).map(|i| ((v >> (2 - i)) & 1) as usize).collect()).collect();
        let cb = Codebook::from_rows(rows).unwrap();
        let params = TypicalityParams::for_channel(&Channel::identity(2), &Distribution::uniform(2), 3, 0.01).unwrap();
        let dec = Decoder::new(&cb, &params).unwrap();
        for w in 1..=8 {
            assert_eq!(dec.decode(cb.row(w - 1)).unwrap(), w);
            assert!(dec.decodes_to(cb.row(w - 1), w).unwrap());
        }
        assert_eq!(dec.decode(cb.row(2)).unwrap(), 3);
    }

    #[test]
    fn duplicate_rows_are_ambiguous() {
        let cb = Codebook::from_rows(vec![vec![0, 1, 1, 0], vec![1, 1, 0, 0], vec![0, 1, 1, 0]]).unwrap();
        let params = TypicalityParams::for_channel(&Channel::identity(2), &Distribution::uniform(2), 4, 0.1).unwrap();
        let dec = Decoder::new(&cb, &params).unwrap();
        assert_eq!(dec.decode(&[0, 1, 1, 0]).unwrap(), 0);
        assert_eq!(decode(&cb, &[0, 1, 1, 0], &params).unwrap(), 0);
        assert_eq!(dec.decode(&[1, 1, 0, 0]).unwrap(), 2);
    }

    #[test]
    fn zero_epsilon_never_decodes() {
        let cb = generate_codebook(&Distribution::uniform(2), 12, 0.5, &BitString::from_u64(3, 8)).unwrap();
        let params = TypicalityParams::for_channel(&Channel::bsc(0.1).unwrap(), &Distribution::uniform(2), 12, 0.0).unwrap();
        let dec = Decoder::new(&cb, &params).unwrap();
        for seed in 0..20 {
            assert_eq!(dec.decode(&random_block(12, 2, seed)).unwrap(), 0);
        }
    }

    #[test]
    fn rejects_mismatched_codebook() {
        let cb = Codebook::from_rows(vec![vec![0, 1, 2]]).unwrap();
        let params = TypicalityParams::for_channel(&Channel::identity(2), &Distribution::uniform(2), 3, 0.1).unwrap();
        assert!(matches!(Decoder::new(&cb, &params), Err(CodebookError::SymbolOutOfRange { .. })));
        let params4 = TypicalityParams::for_channel(&Channel::identity(2), &Distribution::uniform(2), 4, 0.1).unwrap();
        assert!(matches!(Decoder::new(&cb, &params4), Err(CodebookError::LengthMismatch { .. })));
    }

    fn channel_for(kind: u8) -> (Channel, Distribution) {
        match kind {
            0 => (Channel::bsc(0.1).unwrap(), Distribution::uniform(2)),
            1 => (Channel::bsc(0.2).unwrap(), Distribution::new(vec![0.7, 0.3]).unwrap()),
            2 => (
                Channel::new(vec![vec![0.8, 0.2, 0.0], vec![0.1, 0.6, 0.3], vec![0.0, 0.25, 0.75]]).unwrap(),
                Distribution::new(vec![0.5, 0.3, 0.2]).unwrap(),
            ),
            _ => (
                Channel::new(vec![vec![0.9, 0.1], vec![0.0, 1.0]]).unwrap(),
                Distribution::uniform(2),
            ),
        }
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(64))]

        /// The packed decoder agrees with the direct definition.
        #[test]
        fn packed_matches_reference(
            kind in 0u8..4,
            n in prop_oneof![1usize..20, 60usize..70, 125usize..135],
            eps in 0.0f64..0.6,
            seed in any::<u64>(),
        ) {
            let (channel, q) = channel_for(kind);
            let params = TypicalityParams::for_channel(&channel, &q, n, eps).unwrap();
            let rate = (3.0 / n as f64).min(1.0);
            let cb = generate_codebook(&q, n, rate, &BitString::from_u64(seed, 64)).unwrap();
            let dec = Decoder::new(&cb, &params).unwrap();
            let mut rng = StreamKey::from_u64(seed).rng();
            for t in 0..6 {
                let y = if t % 2 == 0 {
                    channel.transmit(cb.row(t % cb.num_words()), &mut rng).unwrap()
                } else {
                    random_block(n, channel.outputs(), seed ^ t as u64)
                };
                let expected = decode(&cb, &y, &params).unwrap();
                prop_assert_eq!(dec.decode(&y).unwrap(), expected);
                for w in 1..=cb.num_words() {
                    prop_assert_eq!(dec.decodes_to(&y, w).unwrap(), expected == w);
                }
                let direct: Vec<bool> = cb.rows().map(|r| is_jointly_typical(r, &y, &params).unwrap()).collect();
                let hits = direct.iter().filter(|&&b| b).count();
                prop_assert_eq!(expected != 0, hits == 1);
            }
        }

        #[test]
        fn decode_is_deterministic(seed in any::<u64>()) {
            let (channel, q) = channel_for(0);
            let params = TypicalityParams::for_channel(&channel, &q, 16, 0.3).unwrap();
            let cb = generate_codebook(&q, 16, 0.25, &BitString::from_u64(seed, 64)).unwrap();
            let dec = Decoder::new(&cb, &params).unwrap();
            let y = random_block(16, 2, seed);
            prop_assert_eq!(dec.decode(&y).unwrap(), dec.decode(&y).unwrap());
        }
    }
}
