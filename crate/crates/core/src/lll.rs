//! The symmetric Lovász Local Lemma: condition checks, dependency degrees
//! from shared variables, and a resampling solver.

use std::collections::BTreeSet;
use std::fmt;

use rand_core::RngCore;
use thiserror::Error;

use crate::channel::Distribution;
use crate::rng::{below, Categorical, StreamKey};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

/// Largest number of joint assignments [`exact_success_probability`] will
/// enumerate.
pub const MAX_EXACT_ASSIGNMENTS: u64 = 1 << 20;

/// Samples used to estimate a missing `prob_bound`.
pub const PROB_ESTIMATE_SAMPLES: u64 = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum LllError {
    #[error("event {event} has an empty scope")]
    EmptyScope { event: usize },
    #[error("event {event} names variable {var}, but there are only {num_vars}")]
    VariableOutOfRange {
        event: usize,
        var: usize,
        num_vars: usize,
    },
    #[error("event {event} lists variable {var} twice")]
    DuplicateVariable { event: usize, var: usize },
    #[error("probability must lie in [0, 1], got {0}")]
    InvalidProbability(f64),
    #[error("dependency degree must be finite and nonnegative, got {0}")]
    InvalidDegree(f64),
    #[error("still violated after {resamples} resamples")]
    Timeout { resamples: u64 },
    #[error("{assignments} joint assignments exceed the enumeration limit of {MAX_EXACT_ASSIGNMENTS}")]
    TooLarge { assignments: u128 },
    #[error("trial count must be at least 1")]
    NoTrials,
}

type Predicate = Box<dyn Fn(&[usize]) -> bool + Send + Sync>;

/// An event determined by the variables in `scope`. The predicate sees
/// their values in scope order.
pub struct BadEvent {
    scope: Vec<usize>,
    violated: Predicate,
    prob_bound: Option<f64>,
}

impl fmt::Debug for BadEvent {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("BadEvent")
            .field("scope", &self.scope)
            .field("prob_bound", &self.prob_bound)
            .finish_non_exhaustive()
    }
}

impl BadEvent {
    pub fn new(scope: Vec<usize>, violated: impl Fn(&[usize]) -> bool + Send + Sync + 'static) -> Self {
        Self {
            scope,
            violated: Box::new(violated),
            prob_bound: None,
        }
    }

    pub fn with_prob_bound(mut self, p: f64) -> Self {
        self.prob_bound = Some(p);
        self
    }

    pub fn scope(&self) -> &[usize] {
        &self.scope
    }

    pub fn prob_bound(&self) -> Option<f64> {
        self.prob_bound
    }

    /// Evaluates the event on a full assignment, gathering scope values
    /// into `buf`.
    pub fn holds_with(&self, assignment: &[usize], buf: &mut Vec<usize>) -> bool {
        buf.clear();
        buf.extend(self.scope.iter().map(|&v| assignment[v]));
        (self.violated)(buf)
    }

    pub fn holds(&self, assignment: &[usize]) -> bool {
        self.holds_with(assignment, &mut Vec::with_capacity(self.scope.len()))
    }
}

/// Independent variables with finite domains plus the bad events over them.
#[derive(Debug)]
pub struct ConstraintSystem {
    domains: Vec<Categorical>,
    sizes: Vec<usize>,
    probs: Vec<Vec<f64>>,
    events: Vec<BadEvent>,
    /// Events mentioning each variable.
    var_events: Vec<Vec<usize>>,
}

impl ConstraintSystem {
    pub fn new(domains: Vec<Distribution>, events: Vec<BadEvent>) -> Result<Self, LllError> {
        let num_vars = domains.len();
        let mut var_events = vec![Vec::new(); num_vars];
        let mut seen = vec![usize::MAX; num_vars];
        for (i, e) in events.iter().enumerate() {
            if e.scope.is_empty() {
                return Err(LllError::EmptyScope { event: i });
            }
            if let Some(p) = e.prob_bound {
                if !(0.0..=1.0).contains(&p) {
                    return Err(LllError::InvalidProbability(p));
                }
            }
            for &v in &e.scope {
                if v >= num_vars {
                    return Err(LllError::VariableOutOfRange {
                        event: i,
                        var: v,
                        num_vars,
                    });
                }
                if seen[v] == i {
                    return Err(LllError::DuplicateVariable { event: i, var: v });
                }
                seen[v] = i;
                var_events[v].push(i);
            }
        }
        Ok(Self {
            sizes: domains.iter().map(Distribution::len).collect(),
            probs: domains.iter().map(|d| d.probs().to_vec()).collect(),
            domains: domains.iter().map(Distribution::sampler).collect(),
            events,
            var_events,
        })
    }

    /// `n` variables, each uniform over `size` values.
    pub fn uniform(num_vars: usize, size: usize, events: Vec<BadEvent>) -> Result<Self, LllError> {
        Self::new(vec![Distribution::uniform(size); num_vars], events)
    }

    pub fn num_vars(&self) -> usize {
        self.domains.len()
    }

    pub fn events(&self) -> &[BadEvent] {
        &self.events
    }

    pub fn domain_size(&self, var: usize) -> usize {
        self.sizes[var]
    }

    pub fn sample_assignment<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        self.domains.iter().map(|d| d.sample(rng)).collect()
    }

    /// Indices of the events that hold under `assignment`.
    pub fn violated_events(&self, assignment: &[usize]) -> Vec<usize> {
        let mut buf = Vec::new();
        (0..self.events.len())
            .filter(|&i| self.events[i].holds_with(assignment, &mut buf))
            .collect()
    }

    pub fn is_satisfied(&self, assignment: &[usize]) -> bool {
        let mut buf = Vec::new();
        !self.events.iter().any(|e| e.holds_with(assignment, &mut buf))
    }

    /// Events sharing at least one variable with event `i`, excluding `i`.
    pub fn neighbours(&self, i: usize) -> Vec<usize> {
        let mut out: BTreeSet<usize> = BTreeSet::new();
        for &v in &self.events[i].scope {
            out.extend(self.var_events[v].iter().copied().filter(|&j| j != i));
        }
        out.into_iter().collect()
    }

    /// The event's `prob_bound`, or a Monte Carlo estimate of its
    /// probability over the scope distribution when none was given.
    pub fn event_probability(&self, i: usize, key: &StreamKey) -> f64 {
        let e = &self.events[i];
        if let Some(p) = e.prob_bound {
            return p;
        }
        let mut rng = key.derive("event-probability").stream(i as u64, 0);
        let mut values = Vec::with_capacity(e.scope.len());
        let mut hits = 0u64;
        for _ in 0..PROB_ESTIMATE_SAMPLES {
            values.clear();
            values.extend(e.scope.iter().map(|&v| self.domains[v].sample(&mut rng)));
            hits += (e.violated)(&values) as u64;
        }
        hits as f64 / PROB_ESTIMATE_SAMPLES as f64
    }
}

/// Largest number of other events any event shares a variable with.
pub fn dependency_degree(system: &ConstraintSystem) -> usize {
    let m = system.events.len();
    let mut stamp = vec![usize::MAX; m];
    let mut best = 0;
    for i in 0..m {
        stamp[i] = i;
        let mut deg = 0;
        for &v in &system.events[i].scope {
            for &j in &system.var_events[v] {
                if stamp[j] != i {
                    stamp[j] = i;
                    deg += 1;
                }
            }
        }
        best = best.max(deg);
    }
    best
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LllCheck {
    pub holds: bool,
    /// `e p (d + 1)`.
    pub product: f64,
    /// `(1 - 1/(d+1))^n`, the guaranteed probability that no event occurs.
    pub lower_bound: f64,
}

/// Checks `e p (d + 1) <= 1`. The degree is real so that parameterizations
/// like `d = 2^k / e - 1` can be passed as written.
pub fn check_lll(p: f64, d: f64, n_events: u64) -> Result<LllCheck, LllError> {
    if !(0.0..=1.0).contains(&p) {
        return Err(LllError::InvalidProbability(p));
    }
    if !(d >= 0.0 && d.is_finite()) {
        return Err(LllError::InvalidDegree(d));
    }
    let product = std::f64::consts::E * p * (d + 1.0);
    let lower_bound = if n_events == 0 {
        1.0
    } else {
        (1.0 - 1.0 / (d + 1.0)).powf(n_events as f64)
    };
    Ok(LllCheck {
        holds: product <= 1.0,
        product,
        lower_bound,
    })
}

// e lies strictly between these two fractions over 10^18.
const E_LOWER: u128 = 2_718_281_828_459_045_235;
const E_UPPER: u128 = 2_718_281_828_459_045_236;
const E_SCALE: u128 = 1_000_000_000_000_000_000;

/// Decides `e * (p_num / p_den) * d_plus_one <= 1` in integer arithmetic,
/// with `e` bracketed by two rationals. `None` when the bracket is too
/// coarse to decide or the products overflow.
pub fn lll_condition_exact(p_num: u128, p_den: u128, d_plus_one: u128) -> Option<bool> {
    let lhs = p_num.checked_mul(d_plus_one)?;
    let rhs = p_den.checked_mul(E_SCALE)?;
    if lhs.checked_mul(E_UPPER)? <= rhs {
        Some(true)
    } else if lhs.checked_mul(E_LOWER)? > rhs {
        Some(false)
    } else {
        None
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub enum Selection {
    /// Always resample the lowest-indexed violated event.
    #[default]
    LowestIndex,
    /// Pick a violated event uniformly at random from the same stream.
    Random,
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Solution {
    pub assignment: Vec<usize>,
    pub resamples: u64,
}

/// `100 * m` for a system of `m` events.
pub fn default_max_resamples(system: &ConstraintSystem) -> u64 {
    100 * system.events.len() as u64
}

/// Samples every variable, then redraws the scope of a violated event
/// until none is violated or `max_resamples` redraws have been spent.
pub fn resample_solve<R: RngCore + ?Sized>(
    system: &ConstraintSystem,
    rng: &mut R,
    max_resamples: u64,
    selection: Selection,
) -> Result<Solution, LllError> {
    let mut assignment = system.sample_assignment(rng);
    let m = system.events.len();
    let mut buf = Vec::new();
    let mut violated: BTreeSet<usize> = (0..m)
        .filter(|&i| system.events[i].holds_with(&assignment, &mut buf))
        .collect();
    let mut stamp = vec![u64::MAX; m];
    let mut resamples = 0u64;
    while !violated.is_empty() {
        if resamples >= max_resamples {
            return Err(LllError::Timeout { resamples });
        }
        let i = match selection {
            Selection::LowestIndex => *violated.first().expect("nonempty"),
            Selection::Random => {
                let at = below(rng, violated.len() as u64) as usize;
                *violated.iter().nth(at).expect("in range")
            }
        };
        for &v in &system.events[i].scope {
            assignment[v] = system.domains[v].sample(rng);
        }
        for &v in &system.events[i].scope {
            for &j in &system.var_events[v] {
                if stamp[j] == resamples {
                    continue;
                }
                stamp[j] = resamples;
                if system.events[j].holds_with(&assignment, &mut buf) {
                    violated.insert(j);
                } else {
                    violated.remove(&j);
                }
            }
        }
        resamples += 1;
    }
    assert!(system.is_satisfied(&assignment), "solver returned a violating assignment");
    Ok(Solution {
        assignment,
        resamples,
    })
}

/// Fraction of independent full samples violating no event. Trial `t`
/// uses `key.stream(0, t)`.
pub fn estimate_success_probability(
    system: &ConstraintSystem,
    trials: u64,
    key: &StreamKey,
) -> Result<f64, LllError> {
    if trials == 0 {
        return Err(LllError::NoTrials);
    }
    let trial = |t: u64| {
        let mut rng = key.stream(0, t);
        system.is_satisfied(&system.sample_assignment(&mut rng)) as u64
    };
    #[cfg(feature = "parallel")]
    let hits: u64 = (0..trials).into_par_iter().map(trial).sum();
    #[cfg(not(feature = "parallel"))]
    let hits: u64 = (0..trials).map(trial).sum();
    Ok(hits as f64 / trials as f64)
}

/// Probability that no event occurs, by enumerating every assignment.
pub fn exact_success_probability(system: &ConstraintSystem) -> Result<f64, LllError> {
    let total = system
        .sizes
        .iter()
        .try_fold(1u128, |acc, &s| acc.checked_mul(s as u128))
        .unwrap_or(u128::MAX);
    if total > MAX_EXACT_ASSIGNMENTS as u128 {
        return Err(LllError::TooLarge { assignments: total });
    }
    if system.sizes.contains(&0) {
        return Ok(0.0);
    }
    let n = system.num_vars();
    let mut assignment = vec![0usize; n];
    let mut sum = 0.0;
    loop {
        if system.is_satisfied(&assignment) {
            sum += (0..n).map(|v| system.probs[v][assignment[v]]).product::<f64>();
        }
        // Odometer step; the last variable moves fastest.
        let mut v = n;
        loop {
            if v == 0 {
                return Ok(sum);
            }
            v -= 1;
            assignment[v] += 1;
            if assignment[v] < system.sizes[v] {
                break;
            }
            assignment[v] = 0;
        }
    }
}
