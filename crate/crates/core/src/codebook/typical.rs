use super::CodebookError;
use crate::channel::{Channel, Distribution, JointDistribution};

/// The jointly typical set `A_eps^(n)` for a joint law `p(x, y)`.
///
/// Sample log-probabilities are evaluated from symbol counts: a block's
/// `-log2 p(x^n)` is `sum_a N(a) * -log2 p(a)`, summed in symbol order, so
/// every decoder that counts the same symbols reaches the same verdict
/// bit for bit. A zero-probability symbol makes its condition fail.
#[derive(Clone, Debug)]
pub struct TypicalityParams {
    epsilon: f64,
    n: usize,
    joint: JointDistribution,
    cost_x: Vec<f64>,
    cost_y: Vec<f64>,
    cost_xy: Vec<f64>,
    h_x: f64,
    h_y: f64,
    h_xy: f64,
}

fn cost(p: f64) -> f64 {
    if p > 0.0 {
        -p.log2()
    } else {
        f64::INFINITY
    }
}

impl TypicalityParams {
    pub fn new(joint: JointDistribution, n: usize, epsilon: f64) -> Result<Self, CodebookError> {
        if n == 0 {
            return Err(CodebookError::EmptyBlock);
        }
        if !(epsilon >= 0.0) {
            return Err(CodebookError::InvalidEpsilon(epsilon));
        }
        let (nx, ny) = (joint.inputs(), joint.outputs());
        let cost_xy = (0..nx)
            .flat_map(|a| (0..ny).map(move |b| (a, b)))
            .map(|(a, b)| cost(joint.prob(a, b)))
            .collect();
        Ok(Self {
            epsilon,
            n,
            cost_x: joint.marginal_x().iter().map(|&p| cost(p)).collect(),
            cost_y: joint.marginal_y().iter().map(|&p| cost(p)).collect(),
            cost_xy,
            h_x: joint.entropy_x(),
            h_y: joint.entropy_y(),
            h_xy: joint.entropy_xy(),
            joint,
        })
    }

    /// `p(x, y) = q(x) p(y|x)`.
    pub fn for_channel(
        channel: &Channel,
        q: &Distribution,
        n: usize,
        epsilon: f64,
    ) -> Result<Self, CodebookError> {
        Self::new(channel.joint(q)?, n, epsilon)
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn joint(&self) -> &JointDistribution {
        &self.joint
    }

    pub fn inputs(&self) -> usize {
        self.cost_x.len()
    }

    pub fn outputs(&self) -> usize {
        self.cost_y.len()
    }

    fn within(&self, costs: &[f64], counts: &[u32], entropy: f64) -> bool {
        let mut total = 0.0;
        for (&c, &k) in costs.iter().zip(counts) {
            if k == 0 {
                continue;
            }
            if c.is_infinite() {
                return false;
            }
            total += k as f64 * c;
        }
        (total / self.n as f64 - entropy).abs() < self.epsilon
    }

    pub(crate) fn x_typical(&self, counts: &[u32]) -> bool {
        self.within(&self.cost_x, counts, self.h_x)
    }

    pub(crate) fn y_typical(&self, counts: &[u32]) -> bool {
        self.within(&self.cost_y, counts, self.h_y)
    }

    /// `counts` is indexed `a * outputs + b`.
    pub(crate) fn xy_typical(&self, counts: &[u32]) -> bool {
        self.within(&self.cost_xy, counts, self.h_xy)
    }

    pub(crate) fn check_block(&self, block: &[usize], alphabet: usize) -> Result<(), CodebookError> {
        if block.len() != self.n {
            return Err(CodebookError::LengthMismatch {
                got: block.len(),
                expected: self.n,
            });
        }
        if let Some(&s) = block.iter().find(|&&s| s >= alphabet) {
            return Err(CodebookError::SymbolOutOfRange {
                symbol: s,
                alphabet,
            });
        }
        Ok(())
    }

    pub(crate) fn symbol_counts(block: &[usize], alphabet: usize) -> Vec<u32> {
        let mut counts = vec![0u32; alphabet];
        for &s in block {
            counts[s] += 1;
        }
        counts
    }
}

/// All three conditions of joint typicality.
pub fn is_jointly_typical(
    x_block: &[usize],
    y_block: &[usize],
    params: &TypicalityParams,
) -> Result<bool, CodebookError> {
    let (nx, ny) = (params.inputs(), params.outputs());
    params.check_block(x_block, nx)?;
    params.check_block(y_block, ny)?;
    if !params.x_typical(&TypicalityParams::symbol_counts(x_block, nx)) {
        return Ok(false);
    }
    if !params.y_typical(&TypicalityParams::symbol_counts(y_block, ny)) {
        return Ok(false);
    }
    let mut joint = vec![0u32; nx * ny];
    for (&a, &b) in x_block.iter().zip(y_block) {
        joint[a * ny + b] += 1;
    }
    Ok(params.xy_typical(&joint))
}
