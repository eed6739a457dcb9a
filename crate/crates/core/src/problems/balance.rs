use rand_core::RngCore;

use super::ProblemError;
use crate::bits::BitString;

/// Square 0/1 matrix, row-major.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BinaryMatrix {
    n: usize,
    entries: Vec<u8>,
}

impl BinaryMatrix {
    pub fn new(rows: Vec<Vec<u8>>) -> Result<Self, ProblemError> {
        let n = rows.len();
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.len() != n) {
            return Err(ProblemError::InvalidInstance(format!(
                "row {i} has {} entries, expected {n}",
                r.len()
            )));
        }
        if rows.iter().flatten().any(|&x| x > 1) {
            return Err(ProblemError::InvalidInstance("entries must be 0 or 1".into()));
        }
        Ok(Self {
            n,
            entries: rows.concat(),
        })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn row(&self, i: usize) -> &[u8] {
        &self.entries[i * self.n..(i + 1) * self.n]
    }

    /// First line `n`, then `n` rows of space-separated 0/1.
    pub fn to_text(&self) -> String {
        let mut s = format!("{}\n", self.n);
        for i in 0..self.n {
            let row: Vec<&str> = self.row(i).iter().map(|&x| if x == 1 { "1" } else { "0" }).collect();
            s.push_str(&row.join(" "));
            s.push('\n');
        }
        s
    }

    /// Accepts rows written with or without separators.
    pub fn from_text(text: &str) -> Result<Self, ProblemError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| ProblemError::parse(1, "missing header"))?;
        let n: usize = header
            .trim()
            .parse()
            .map_err(|_| ProblemError::parse(1, "header must be `n`"))?;
        let mut rows = Vec::with_capacity(n);
        for (i, line) in lines {
            let row = line
                .chars()
                .filter(|c| !c.is_whitespace() && *c != ',')
                .map(|c| match c {
                    '0' => Ok(0u8),
                    '1' => Ok(1u8),
                    _ => Err(ProblemError::parse(i + 1, &format!("unexpected `{c}`"))),
                })
                .collect::<Result<Vec<_>, _>>()?;
            rows.push(row);
        }
        if rows.len() != n {
            return Err(ProblemError::InvalidInstance(format!(
                "header declares {n} rows, found {}",
                rows.len()
            )));
        }
        Self::new(rows)
    }
}

pub fn gen_binary_matrix<R: RngCore + ?Sized>(n: usize, rng: &mut R) -> BinaryMatrix {
    let mut entries = Vec::with_capacity(n * n);
    while entries.len() < n * n {
        let word = rng.next_u64();
        let take = (n * n - entries.len()).min(64);
        entries.extend((0..take).map(|i| ((word >> i) & 1) as u8));
    }
    BinaryMatrix { n, entries }
}

/// Entries in `{-1, +1}`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SignVector(Vec<i8>);

impl SignVector {
    pub fn new(signs: Vec<i8>) -> Result<Self, ProblemError> {
        if signs.iter().any(|&s| s != 1 && s != -1) {
            return Err(ProblemError::InvalidInstance("signs must be -1 or +1".into()));
        }
        Ok(Self(signs))
    }

    /// Bit 1 is `+1`, bit 0 is `-1`.
    pub fn from_bits(bits: &BitString) -> Self {
        Self(bits.iter().map(|b| if b { 1 } else { -1 }).collect())
    }

    pub fn to_bits(&self) -> BitString {
        BitString::from_bools(&self.0.iter().map(|&s| s == 1).collect::<Vec<_>>())
    }

    pub fn signs(&self) -> &[i8] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

/// `4 sqrt(n ln n)`.
pub fn balancing_threshold(n: usize) -> f64 {
    let n = n as f64;
    4.0 * (n * n.ln()).sqrt()
}

/// `max_i |sum_j M_ij b_j|`, accumulated in integers.
pub fn max_discrepancy(m: &BinaryMatrix, b: &SignVector) -> Result<i64, ProblemError> {
    if b.len() != m.n {
        return Err(ProblemError::DimensionMismatch {
            expected: m.n,
            got: b.len(),
        });
    }
    Ok((0..m.n)
        .map(|i| {
            m.row(i)
                .iter()
                .zip(&b.0)
                .map(|(&x, &s)| x as i64 * s as i64)
                .sum::<i64>()
                .abs()
        })
        .max()
        .unwrap_or(0))
}

/// `||M b||_inf <= 4 sqrt(n ln n)`; ties accepted.
pub fn verify_balancing(m: &BinaryMatrix, b: &SignVector) -> Result<bool, ProblemError> {
    Ok(max_discrepancy(m, b)? as f64 <= balancing_threshold(m.n))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::StreamKey;
    use proptest::prelude::*;

    fn all_ones(n: usize) -> BinaryMatrix {
        BinaryMatrix::new(vec![vec![1; n]; n]).unwrap()
    }

    fn alternating(n: usize) -> SignVector {
        SignVector::new((0..n).map(|i| if i % 2 == 0 { 1 } else { -1 }).collect()).unwrap()
    }

    #[test]
    fn small_n_always_balanced() {
        assert!((balancing_threshold(4) - 9.42).abs() < 0.01);
        let m = all_ones(4);
        for mask in 0..16u64 {
            let b = SignVector::from_bits(&BitString::from_u64(mask, 4));
            assert!(verify_balancing(&m, &b).unwrap());
        }
    }

    #[test]
    fn threshold_at_128() {
        assert!((balancing_threshold(128) - 99.68).abs() < 0.01);
        assert!(verify_balancing(&all_ones(128), &alternating(128)).unwrap());
        let plus = SignVector::new(vec![1; 128]).unwrap();
        assert_eq!(max_discrepancy(&all_ones(128), &plus).unwrap(), 128);
        assert!(!verify_balancing(&all_ones(128), &plus).unwrap());
    }

    #[test]
    fn dimension_checked() {
        assert!(matches!(
            verify_balancing(&all_ones(4), &alternating(5)),
            Err(ProblemError::DimensionMismatch { .. })
        ));
        assert!(BinaryMatrix::new(vec![vec![0, 2], vec![1, 1]]).is_err());
        assert!(SignVector::new(vec![0]).is_err());
    }

    #[test]
    fn text_and_bits_roundtrip() {
        let m = gen_binary_matrix(13, &mut StreamKey::from_u64(2).rng());
        assert_eq!(BinaryMatrix::from_text(&m.to_text()).unwrap(), m);
        assert_eq!(BinaryMatrix::from_text("2\n01\n1 1\n").unwrap().row(0), &[0, 1]);
        let b = alternating(9);
        assert_eq!(SignVector::from_bits(&b.to_bits()), b);
    }

    proptest! {
        #[test]
        fn cancelling_vector_always_balanced(n in 4usize..=256) {
            prop_assert!(verify_balancing(&all_ones(n), &alternating(n)).unwrap());
        }
    }
}
