use std::fmt::Write as _;

use rand_core::RngCore;

use super::ProblemError;
use crate::lll::{BadEvent, ConstraintSystem};
use crate::rng::unit_f64;

/// Restarts of the clause builder before giving up.
pub const MAX_KSAT_ATTEMPTS: u32 = 1000;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Literal {
    pub var: usize,
    pub negated: bool,
}

impl Literal {
    pub fn eval(self, assignment: &[bool]) -> bool {
        assignment[self.var] != self.negated
    }

    /// 1-based DIMACS form.
    pub fn to_dimacs(self) -> i64 {
        let v = self.var as i64 + 1;
        if self.negated {
            -v
        } else {
            v
        }
    }
}

/// `floor(2^k / (k e)) - 1`, the per-variable occurrence cap. Negative
/// values mean no bounded instance exists.
pub fn occurrence_cap(k: usize) -> i64 {
    if k == 0 {
        return -1;
    }
    (2f64.powi(k as i32) / (k as f64 * std::f64::consts::E)).floor() as i64 - 1
}

/// A CNF formula whose clauses all have `k` distinct variables.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct BoundedKSatFormula {
    n: usize,
    k: usize,
    clauses: Vec<Vec<Literal>>,
}

impl BoundedKSatFormula {
    /// Checks clause width and distinct in-range variables. The
    /// occurrence bound is reported by [`Self::within_occurrence_bound`].
    pub fn new(n: usize, k: usize, clauses: Vec<Vec<Literal>>) -> Result<Self, ProblemError> {
        for (i, c) in clauses.iter().enumerate() {
            if c.len() != k {
                return Err(ProblemError::InvalidInstance(format!(
                    "clause {i} has {} literals, expected {k}",
                    c.len()
                )));
            }
            for (j, l) in c.iter().enumerate() {
                if l.var >= n {
                    return Err(ProblemError::InvalidInstance(format!(
                        "clause {i} names variable {} of {n}",
                        l.var + 1
                    )));
                }
                if c[..j].iter().any(|o| o.var == l.var) {
                    return Err(ProblemError::InvalidInstance(format!(
                        "clause {i} repeats variable {}",
                        l.var + 1
                    )));
                }
            }
        }
        Ok(Self { n, k, clauses })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn m(&self) -> usize {
        self.clauses.len()
    }

    pub fn clauses(&self) -> &[Vec<Literal>] {
        &self.clauses
    }

    pub fn occurrences(&self) -> Vec<usize> {
        let mut occ = vec![0; self.n];
        for l in self.clauses.iter().flatten() {
            occ[l.var] += 1;
        }
        occ
    }

    pub fn within_occurrence_bound(&self) -> bool {
        let cap = occurrence_cap(self.k);
        self.occurrences().iter().all(|&o| o as i64 <= cap)
    }

    pub fn to_dimacs(&self) -> String {
        let mut s = format!("p cnf {} {}\n", self.n, self.clauses.len());
        for c in &self.clauses {
            for l in c {
                let _ = write!(s, "{} ", l.to_dimacs());
            }
            s.push_str("0\n");
        }
        s
    }

    /// Reads DIMACS CNF. Clause width is taken from the first clause and
    /// must be uniform.
    pub fn from_dimacs(text: &str) -> Result<Self, ProblemError> {
        let mut header: Option<(usize, usize)> = None;
        let mut clauses = Vec::new();
        let mut current = Vec::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() || line.starts_with('c') || line.starts_with('%') {
                continue;
            }
            if line.starts_with('p') {
                let parts: Vec<&str> = line.split_whitespace().collect();
                match parts[..] {
                    ["p", "cnf", n, m] => {
                        let n = n.parse().map_err(|_| ProblemError::parse(i + 1, "bad variable count"))?;
                        let m = m.parse().map_err(|_| ProblemError::parse(i + 1, "bad clause count"))?;
                        header = Some((n, m));
                    }
                    _ => return Err(ProblemError::parse(i + 1, "header must be `p cnf n m`")),
                }
                continue;
            }
            let (n, _) = header.ok_or_else(|| ProblemError::parse(i + 1, "clause before header"))?;
            for tok in line.split_whitespace() {
                let v: i64 = tok
                    .parse()
                    .map_err(|_| ProblemError::parse(i + 1, &format!("bad literal `{tok}`")))?;
                if v == 0 {
                    clauses.push(std::mem::take(&mut current));
                    continue;
                }
                let var = v.unsigned_abs() as usize - 1;
                if var >= n {
                    return Err(ProblemError::parse(i + 1, &format!("variable {v} exceeds {n}")));
                }
                current.push(Literal { var, negated: v < 0 });
            }
        }
        if !current.is_empty() {
            clauses.push(current);
        }
        let (n, m) = header.ok_or_else(|| ProblemError::parse(1, "missing `p cnf` header"))?;
        if clauses.len() != m {
            return Err(ProblemError::InvalidInstance(format!(
                "header declares {m} clauses, found {}",
                clauses.len()
            )));
        }
        let k = clauses.first().map(Vec::len).unwrap_or(0);
        Self::new(n, k, clauses)
    }
}

pub fn verify_ksat(f: &BoundedKSatFormula, assignment: &[bool]) -> Result<bool, ProblemError> {
    if assignment.len() != f.n {
        return Err(ProblemError::LengthMismatch {
            got: assignment.len(),
            expected: f.n,
        });
    }
    Ok(f.clauses.iter().all(|c| c.iter().any(|l| l.eval(assignment))))
}

/// `m` clauses of `k` distinct variables with uniform polarities. Each
/// variable is picked with probability proportional to its remaining
/// capacity under the occurrence cap; a clause that cannot be completed
/// restarts the whole formula.
pub fn gen_bounded_ksat<R: RngCore + ?Sized>(
    n: usize,
    k: usize,
    m: usize,
    rng: &mut R,
) -> Result<BoundedKSatFormula, ProblemError> {
    let cap = occurrence_cap(k);
    if cap < 1 || k > n || (m * k) as i64 > n as i64 * cap {
        return Err(ProblemError::InfeasibleOccurrenceBound { n, k, m, cap });
    }
    for _ in 0..MAX_KSAT_ATTEMPTS {
        if let Some(clauses) = try_build(n, k, m, cap as usize, rng) {
            let f = BoundedKSatFormula::new(n, k, clauses)?;
            assert!(f.within_occurrence_bound(), "generator broke the occurrence cap");
            return Ok(f);
        }
    }
    Err(ProblemError::RejectionBudgetExhausted {
        attempts: MAX_KSAT_ATTEMPTS,
    })
}

fn try_build<R: RngCore + ?Sized>(n: usize, k: usize, m: usize, cap: usize, rng: &mut R) -> Option<Vec<Vec<Literal>>> {
    let mut remaining = vec![cap; n];
    let mut clauses = Vec::with_capacity(m);
    for _ in 0..m {
        let mut weights: Vec<usize> = remaining.clone();
        let mut clause = Vec::with_capacity(k);
        for _ in 0..k {
            let total: usize = weights.iter().sum();
            if total == 0 {
                return None;
            }
            let target = (unit_f64(rng) * total as f64) as usize;
            let mut acc = 0;
            let var = weights
                .iter()
                .position(|&w| {
                    acc += w;
                    acc > target
                })
                .expect("target below total");
            weights[var] = 0;
            let negated = rng.next_u32() & 1 == 1;
            clause.push(Literal { var, negated });
        }
        for l in &clause {
            remaining[l.var] -= 1;
        }
        clauses.push(clause);
    }
    Some(clauses)
}

/// One bad event per clause: every literal false. Variables are fair coins,
/// value 1 meaning true.
pub fn ksat_constraint_system(f: &BoundedKSatFormula) -> ConstraintSystem {
    let p = 2f64.powi(-(f.k as i32));
    let events = f
        .clauses
        .iter()
        .map(|c| {
            let polarity: Vec<bool> = c.iter().map(|l| l.negated).collect();
            BadEvent::new(c.iter().map(|l| l.var).collect(), move |x| {
                x.iter().zip(&polarity).all(|(&v, &neg)| (v == 1) == neg)
            })
            .with_prob_bound(p)
        })
        .collect();
    ConstraintSystem::uniform(f.n, 2, events).expect("formula variables are in range")
}
