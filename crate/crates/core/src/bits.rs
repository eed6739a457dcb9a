//! Packed bit strings.
//!
//! Bits are stored most-significant-first inside each byte, so the hex form
//! of a string whose length is a multiple of eight reads left to right.

use std::fmt;

use thiserror::Error;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum BitsError {
    #[error("invalid hex: {0}")]
    InvalidHex(String),
    #[error("bit length {bits} does not fit in {bytes} bytes")]
    LengthMismatch { bits: usize, bytes: usize },
}

#[derive(Clone, PartialEq, Eq, Hash, Default)]
pub struct BitString {
    len: usize,
    bytes: Vec<u8>,
}

impl BitString {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn zeros(len: usize) -> Self {
        Self {
            len,
            bytes: vec![0; len.div_ceil(8)],
        }
    }

    pub fn from_bools(bits: &[bool]) -> Self {
        let mut out = Self::zeros(bits.len());
        for (i, &b) in bits.iter().enumerate() {
            out.set(i, b);
        }
        out
    }

    /// Takes the first `len` bits of `bytes`; trailing bits are cleared.
    pub fn from_bytes(bytes: &[u8], len: usize) -> Result<Self, BitsError> {
        if len > bytes.len() * 8 || bytes.len() > len.div_ceil(8) {
            return Err(BitsError::LengthMismatch {
                bits: len,
                bytes: bytes.len(),
            });
        }
        let mut out = Self {
            len,
            bytes: bytes.to_vec(),
        };
        out.clear_tail();
        Ok(out)
    }

    /// The `len` low-order bits of `value`, most significant first.
    pub fn from_u64(value: u64, len: usize) -> Self {
        assert!(len <= 64);
        let mut out = Self::zeros(len);
        for i in 0..len {
            out.set(i, (value >> (len - 1 - i)) & 1 == 1);
        }
        out
    }

    /// Parses hex digits; the bit length defaults to four bits per digit.
    pub fn from_hex(hex_str: &str, len: Option<usize>) -> Result<Self, BitsError> {
        let s = hex_str.trim().trim_start_matches("0x");
        let padded;
        let s = if s.len() % 2 == 1 {
            padded = format!("{s}0");
            padded.as_str()
        } else {
            s
        };
        let bytes = hex::decode(s).map_err(|e| BitsError::InvalidHex(e.to_string()))?;
        let len = len.unwrap_or(hex_str.trim().trim_start_matches("0x").len() * 4);
        Self::from_bytes(&bytes, len)
    }

    pub fn to_hex(&self) -> String {
        hex::encode(&self.bytes)
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn as_bytes(&self) -> &[u8] {
        &self.bytes
    }

    pub fn get(&self, i: usize) -> bool {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        self.bytes[i / 8] >> (7 - i % 8) & 1 == 1
    }

    pub fn set(&mut self, i: usize, bit: bool) {
        assert!(i < self.len, "bit index {i} out of range {}", self.len);
        let mask = 1u8 << (7 - i % 8);
        if bit {
            self.bytes[i / 8] |= mask;
        } else {
            self.bytes[i / 8] &= !mask;
        }
    }

    pub fn push(&mut self, bit: bool) {
        if self.len % 8 == 0 {
            self.bytes.push(0);
        }
        self.len += 1;
        self.set(self.len - 1, bit);
    }

    pub fn extend_from(&mut self, other: &BitString) {
        for b in other.iter() {
            self.push(b);
        }
    }

    /// Appends the `width` low-order bits of `value`, most significant first.
    pub fn push_uint(&mut self, value: u64, width: usize) {
        assert!(width <= 64);
        for i in (0..width).rev() {
            self.push((value >> i) & 1 == 1);
        }
    }

    /// Reads `width` bits starting at `start` as an unsigned integer.
    pub fn read_uint(&self, start: usize, width: usize) -> u64 {
        assert!(width <= 64);
        (start..start + width).fold(0u64, |acc, i| (acc << 1) | self.get(i) as u64)
    }

    pub fn slice(&self, start: usize, end: usize) -> BitString {
        let mut out = BitString::zeros(end - start);
        for i in start..end {
            out.set(i - start, self.get(i));
        }
        out
    }

    pub fn count_ones(&self) -> usize {
        self.bytes.iter().map(|b| b.count_ones() as usize).sum()
    }

    pub fn iter(&self) -> impl Iterator<Item = bool> + '_ {
        (0..self.len).map(move |i| self.get(i))
    }

    fn clear_tail(&mut self) {
        let rem = self.len % 8;
        if rem != 0 {
            if let Some(last) = self.bytes.last_mut() {
                *last &= 0xffu8 << (8 - rem);
            }
        }
    }
}

impl fmt::Debug for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "BitString({self})")
    }
}

impl fmt::Display for BitString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for b in self.iter() {
            f.write_str(if b { "1" } else { "0" })?;
        }
        Ok(())
    }
}
