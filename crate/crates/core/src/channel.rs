//! Discrete memoryless channels and the entropy quantities built on them.
//!
//! All logarithms are base 2.

use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::rng::Categorical;

/// Absolute tolerance for "sums to one".
pub const PROB_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum ChannelError {
    #[error("transition matrix is empty")]
    Empty,
    #[error("row {row} has {found} entries, expected {expected}")]
    Ragged {
        row: usize,
        found: usize,
        expected: usize,
    },
    #[error("row {row} sums to {sum}, not 1")]
    NonStochasticRow { row: usize, sum: f64 },
    #[error("entry ({row}, {col}) is negative: {value}")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("entry ({row}, {col}) is not finite")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("distribution has {found} entries, expected {expected}")]
    DimensionMismatch { expected: usize, found: usize },
    #[error("symbol {symbol} at position {position} is outside alphabet of size {alphabet}")]
    SymbolOutOfRange {
        position: usize,
        symbol: usize,
        alphabet: usize,
    },
    #[error("invalid distribution: {0}")]
    InvalidDistribution(String),
    #[error("declared {what} size {declared} but rows give {actual}")]
    DeclaredSize {
        what: &'static str,
        declared: usize,
        actual: usize,
    },
}

/// A probability vector over a finite alphabet.
#[derive(Clone, Debug, PartialEq)]
pub struct Distribution {
    probs: Vec<f64>,
}

impl Distribution {
    pub fn new(probs: Vec<f64>) -> Result<Self, ChannelError> {
        if probs.is_empty() {
            return Err(ChannelError::InvalidDistribution("empty".into()));
        }
        let mut sum = 0.0;
        for (i, &p) in probs.iter().enumerate() {
            if !p.is_finite() {
                return Err(ChannelError::InvalidDistribution(format!(
                    "entry {i} is not finite"
                )));
            }
            if p < 0.0 {
                return Err(ChannelError::InvalidDistribution(format!(
                    "entry {i} is negative"
                )));
            }
            sum += p;
        }
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(ChannelError::InvalidDistribution(format!(
                "sums to {sum}"
            )));
        }
        Ok(Self {
            probs: renormalize(probs, sum),
        })
    }

    pub fn uniform(size: usize) -> Self {
        assert!(size > 0);
        Self {
            probs: vec![1.0 / size as f64; size],
        }
    }

    pub fn point_mass(size: usize, at: usize) -> Self {
        assert!(at < size);
        let mut probs = vec![0.0; size];
        probs[at] = 1.0;
        Self { probs }
    }

    /// Parses `uniform` (needs `size`) or comma-separated probabilities.
    pub fn parse(spec: &str, size: usize) -> Result<Self, ChannelError> {
        let spec = spec.trim();
        if spec.eq_ignore_ascii_case("uniform") {
            if size == 0 {
                return Err(ChannelError::InvalidDistribution("empty alphabet".into()));
            }
            return Ok(Self::uniform(size));
        }
        let probs = spec
            .split(',')
            .map(|t| {
                t.trim()
                    .parse::<f64>()
                    .map_err(|e| ChannelError::InvalidDistribution(format!("{t:?}: {e}")))
            })
            .collect::<Result<Vec<_>, _>>()?;
        if probs.len() != size {
            return Err(ChannelError::DimensionMismatch {
                expected: size,
                found: probs.len(),
            });
        }
        Self::new(probs)
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    pub fn len(&self) -> usize {
        self.probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.probs.is_empty()
    }

    pub fn sampler(&self) -> Categorical {
        Categorical::new(&self.probs)
    }
}

fn renormalize(mut probs: Vec<f64>, sum: f64) -> Vec<f64> {
    if sum != 1.0 {
        for p in &mut probs {
            *p /= sum;
        }
    }
    probs
}

/// Shannon entropy in bits of a probability vector, with `0 log 0 = 0`.
pub fn entropy_of(probs: &[f64]) -> f64 {
    let h: f64 = probs
        .iter()
        .filter(|&&p| p > 0.0)
        .map(|&p| -p * p.log2())
        .sum();
    h.max(0.0)
}

pub fn entropy(dist: &Distribution) -> f64 {
    entropy_of(dist.probs())
}

/// A discrete memoryless channel `p(y|x)`.
#[derive(Clone, Debug)]
pub struct Channel {
    inputs: usize,
    outputs: usize,
    rows: Vec<Vec<f64>>,
    samplers: Vec<Categorical>,
}

impl PartialEq for Channel {
    fn eq(&self, other: &Self) -> bool {
        self.rows == other.rows
    }
}

/// On-disk form: `{"inputs": k, "outputs": m, "rows": [[...], ...]}`.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ChannelFile {
    pub inputs: usize,
    pub outputs: usize,
    pub rows: Vec<Vec<f64>>,
}

impl Channel {
    /// Validates a row-stochastic matrix. Rows within [`PROB_TOLERANCE`] of
    /// summing to one are renormalised.
    pub fn new(matrix: Vec<Vec<f64>>) -> Result<Self, ChannelError> {
        let outputs = matrix.first().map(Vec::len).unwrap_or(0);
        if matrix.is_empty() || outputs == 0 {
            return Err(ChannelError::Empty);
        }
        let mut rows = Vec::with_capacity(matrix.len());
        for (r, row) in matrix.into_iter().enumerate() {
            if row.len() != outputs {
                return Err(ChannelError::Ragged {
                    row: r,
                    found: row.len(),
                    expected: outputs,
                });
            }
            let mut sum = 0.0;
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(ChannelError::NonFiniteEntry { row: r, col: c });
                }
                if v < 0.0 {
                    return Err(ChannelError::NegativeEntry {
                        row: r,
                        col: c,
                        value: v,
                    });
                }
                sum += v;
            }
            if (sum - 1.0).abs() > PROB_TOLERANCE {
                return Err(ChannelError::NonStochasticRow { row: r, sum });
            }
            rows.push(renormalize(row, sum));
        }
        let samplers = rows.iter().map(|r| Categorical::new(r)).collect();
        Ok(Self {
            inputs: rows.len(),
            outputs,
            rows,
            samplers,
        })
    }

    /// Binary symmetric channel with crossover probability `p`.
    pub fn bsc(p: f64) -> Result<Self, ChannelError> {
        Self::new(vec![vec![1.0 - p, p], vec![p, 1.0 - p]])
    }

    pub fn identity(size: usize) -> Self {
        let rows = (0..size)
            .map(|i| (0..size).map(|j| if i == j { 1.0 } else { 0.0 }).collect())
            .collect();
        Self::new(rows).expect("identity is stochastic")
    }

    pub fn from_file(file: ChannelFile) -> Result<Self, ChannelError> {
        let channel = Self::new(file.rows)?;
        if channel.inputs != file.inputs {
            return Err(ChannelError::DeclaredSize {
                what: "input",
                declared: file.inputs,
                actual: channel.inputs,
            });
        }
        if channel.outputs != file.outputs {
            return Err(ChannelError::DeclaredSize {
                what: "output",
                declared: file.outputs,
                actual: channel.outputs,
            });
        }
        Ok(channel)
    }

    pub fn to_file(&self) -> ChannelFile {
        ChannelFile {
            inputs: self.inputs,
            outputs: self.outputs,
            rows: self.rows.clone(),
        }
    }

    pub fn inputs(&self) -> usize {
        self.inputs
    }

    pub fn outputs(&self) -> usize {
        self.outputs
    }

    pub fn row(&self, x: usize) -> &[f64] {
        &self.rows[x]
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.rows[x][y]
    }

    fn check_input(&self, q: &Distribution) -> Result<(), ChannelError> {
        if q.len() != self.inputs {
            return Err(ChannelError::DimensionMismatch {
                expected: self.inputs,
                found: q.len(),
            });
        }
        Ok(())
    }

    /// Output marginal `sum_x q(x) p(y|x)`.
    pub fn output_distribution(&self, q: &Distribution) -> Result<Vec<f64>, ChannelError> {
        self.check_input(q)?;
        let mut out = vec![0.0; self.outputs];
        for (x, &qx) in q.probs().iter().enumerate() {
            for (o, &p) in out.iter_mut().zip(&self.rows[x]) {
                *o += qx * p;
            }
        }
        Ok(out)
    }

    /// `H(Y|X) = sum_x q(x) H(p(.|x))`.
    pub fn conditional_entropy(&self, q: &Distribution) -> Result<f64, ChannelError> {
        self.check_input(q)?;
        Ok(q.probs()
            .iter()
            .zip(&self.rows)
            .filter(|(&qx, _)| qx > 0.0)
            .map(|(&qx, row)| qx * entropy_of(row))
            .sum())
    }

    /// Joint law `Q(x) p(y|x)` as an `inputs x outputs` table.
    pub fn joint(&self, q: &Distribution) -> Result<JointDistribution, ChannelError> {
        self.check_input(q)?;
        let table = q
            .probs()
            .iter()
            .zip(&self.rows)
            .map(|(&qx, row)| row.iter().map(|&p| qx * p).collect())
            .collect();
        JointDistribution::new(table)
    }

    /// Sends `x_block` through the channel, one stream draw per symbol.
    pub fn transmit<R: RngCore + ?Sized>(
        &self,
        x_block: &[usize],
        rng: &mut R,
    ) -> Result<Vec<usize>, ChannelError> {
        let mut out = Vec::with_capacity(x_block.len());
        self.transmit_into(x_block, rng, &mut out)?;
        Ok(out)
    }

    pub fn transmit_into<R: RngCore + ?Sized>(
        &self,
        x_block: &[usize],
        rng: &mut R,
        out: &mut Vec<usize>,
    ) -> Result<(), ChannelError> {
        out.clear();
        for (position, &x) in x_block.iter().enumerate() {
            let sampler = self.samplers.get(x).ok_or(ChannelError::SymbolOutOfRange {
                position,
                symbol: x,
                alphabet: self.inputs,
            })?;
            out.push(sampler.sample(rng));
        }
        Ok(())
    }
}

/// `C_Q = I(X;Y) = H(Y) - H(Y|X)` for `X ~ q`.
pub fn capacity_for_input(channel: &Channel, q: &Distribution) -> Result<f64, ChannelError> {
    let py = channel.output_distribution(q)?;
    // Identical rows over the support carry no information; report an exact
    // zero rather than a rounding residue.
    let mut support = q
        .probs()
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 0.0)
        .map(|(x, _)| channel.row(x));
    if let Some(first) = support.next() {
        if support.all(|r| r == first) {
            return Ok(0.0);
        }
    }
    let i = entropy_of(&py) - channel.conditional_entropy(q)?;
    Ok(i.max(0.0))
}

/// A joint law over `X x Y` with cached marginals and entropies.
#[derive(Clone, Debug, PartialEq)]
pub struct JointDistribution {
    table: Vec<Vec<f64>>,
    px: Vec<f64>,
    py: Vec<f64>,
}

impl JointDistribution {
    pub fn new(table: Vec<Vec<f64>>) -> Result<Self, ChannelError> {
        let cols = table.first().map(Vec::len).unwrap_or(0);
        if table.is_empty() || cols == 0 {
            return Err(ChannelError::Empty);
        }
        let mut sum = 0.0;
        for (r, row) in table.iter().enumerate() {
            if row.len() != cols {
                return Err(ChannelError::Ragged {
                    row: r,
                    found: row.len(),
                    expected: cols,
                });
            }
            for (c, &v) in row.iter().enumerate() {
                if !v.is_finite() {
                    return Err(ChannelError::NonFiniteEntry { row: r, col: c });
                }
                if v < 0.0 {
                    return Err(ChannelError::NegativeEntry {
                        row: r,
                        col: c,
                        value: v,
                    });
                }
                sum += v;
            }
        }
        if (sum - 1.0).abs() > PROB_TOLERANCE {
            return Err(ChannelError::InvalidDistribution(format!(
                "joint sums to {sum}"
            )));
        }
        let px = table.iter().map(|r| r.iter().sum()).collect();
        let py = (0..cols).map(|c| table.iter().map(|r| r[c]).sum()).collect();
        Ok(Self { table, px, py })
    }

    pub fn inputs(&self) -> usize {
        self.px.len()
    }

    pub fn outputs(&self) -> usize {
        self.py.len()
    }

    pub fn prob(&self, x: usize, y: usize) -> f64 {
        self.table[x][y]
    }

    pub fn marginal_x(&self) -> &[f64] {
        &self.px
    }

    pub fn marginal_y(&self) -> &[f64] {
        &self.py
    }

    pub fn entropy_x(&self) -> f64 {
        entropy_of(&self.px)
    }

    pub fn entropy_y(&self) -> f64 {
        entropy_of(&self.py)
    }

    pub fn entropy_xy(&self) -> f64 {
        entropy_of(&self.table.concat())
    }

    pub fn mutual_information(&self) -> f64 {
        (self.entropy_x() + self.entropy_y() - self.entropy_xy()).max(0.0)
    }
}
