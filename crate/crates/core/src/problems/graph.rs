use std::collections::BTreeMap;
use std::fmt::Write as _;

use rand_core::RngCore;

use super::numeric::k_over_3lnk;
use super::ProblemError;
use crate::bits::BitString;
use crate::elsearch::ceil_log2;
use crate::lll::{BadEvent, ConstraintSystem};
use crate::rng::shuffle;

/// Restarts of the pairing procedure before giving up.
pub const MAX_PAIRING_ATTEMPTS: u32 = 1000;

/// `floor(k / (3 ln k))`, the number of components in the cycle partition.
pub fn component_count(k: usize) -> Result<usize, ProblemError> {
    if k < 5 {
        return Err(ProblemError::DegreeTooSmall { k });
    }
    let x = k as f64 / (3.0 * (k as f64).ln());
    if (x - x.round()).abs() < 1e-9 {
        return Ok(k_over_3lnk(k as u64).floor() as usize);
    }
    Ok(x.floor() as usize)
}

/// A simple undirected `k`-regular graph.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct RegularGraph {
    n: usize,
    k: usize,
    adj: Vec<Vec<usize>>,
}

impl RegularGraph {
    /// Sorts each neighbour list and checks regularity, symmetry and the
    /// absence of loops and repeated edges.
    pub fn new(k: usize, mut adj: Vec<Vec<usize>>) -> Result<Self, ProblemError> {
        let n = adj.len();
        for (v, nb) in adj.iter_mut().enumerate() {
            nb.sort_unstable();
            if nb.len() != k {
                return Err(ProblemError::InvalidInstance(format!(
                    "vertex {v} has degree {}, expected {k}",
                    nb.len()
                )));
            }
            if nb.windows(2).any(|w| w[0] == w[1]) {
                return Err(ProblemError::InvalidInstance(format!("vertex {v} has a repeated edge")));
            }
            if let Some(&u) = nb.iter().find(|&&u| u >= n || u == v) {
                return Err(ProblemError::InvalidInstance(format!("vertex {v} has bad neighbour {u}")));
            }
        }
        for v in 0..n {
            for &u in &adj[v] {
                if adj[u].binary_search(&v).is_err() {
                    return Err(ProblemError::InvalidInstance(format!("edge {v}-{u} is one-sided")));
                }
            }
        }
        Ok(Self { n, k, adj })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn k(&self) -> usize {
        self.k
    }

    pub fn neighbours(&self, v: usize) -> &[usize] {
        &self.adj[v]
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.adj[u].binary_search(&v).is_ok()
    }

    /// Each edge once, as `(u, v)` with `u < v`.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        self.adj
            .iter()
            .enumerate()
            .flat_map(|(u, nb)| nb.iter().filter(move |&&v| u < v).map(move |&v| (u, v)))
    }

    /// First line `n k`, then one line of neighbour indices per vertex.
    pub fn to_text(&self) -> String {
        let mut s = format!("{} {}\n", self.n, self.k);
        for nb in &self.adj {
            let line: Vec<String> = nb.iter().map(usize::to_string).collect();
            let _ = writeln!(s, "{}", line.join(" "));
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self, ProblemError> {
        let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
        let (_, header) = lines.next().ok_or_else(|| ProblemError::parse(1, "missing header"))?;
        let head = parse_numbers(header, 1)?;
        let [n, k] = head[..] else {
            return Err(ProblemError::parse(1, "header must be `n k`"));
        };
        let mut adj = Vec::with_capacity(n);
        for (i, line) in lines {
            adj.push(parse_numbers(line, i + 1)?);
        }
        if adj.len() != n {
            return Err(ProblemError::InvalidInstance(format!(
                "header declares {n} vertices, found {} lines",
                adj.len()
            )));
        }
        Self::new(k, adj)
    }
}

pub(crate) fn parse_numbers(line: &str, lineno: usize) -> Result<Vec<usize>, ProblemError> {
    line.split_whitespace()
        .map(|t| t.parse().map_err(|_| ProblemError::parse(lineno, &format!("bad number `{t}`"))))
        .collect()
}

/// Bits per vertex label in the graph encoding.
fn vertex_width(n: usize) -> usize {
    ceil_log2(n as u64)
}

/// `k n ceil(log2 n)` bits: each vertex's sorted neighbour list.
pub fn encode_graph(g: &RegularGraph) -> BitString {
    let w = vertex_width(g.n);
    let mut out = BitString::new();
    for nb in &g.adj {
        for &u in nb {
            out.push_uint(u as u64, w);
        }
    }
    out
}

pub fn decode_graph(bits: &BitString, n: usize, k: usize) -> Result<RegularGraph, ProblemError> {
    let w = vertex_width(n);
    if bits.len() != n * k * w {
        return Err(ProblemError::LengthMismatch {
            got: bits.len(),
            expected: n * k * w,
        });
    }
    let adj = (0..n)
        .map(|v| (0..k).map(|j| bits.read_uint((v * k + j) * w, w) as usize).collect())
        .collect();
    RegularGraph::new(k, adj)
}

/// Uniform pairing of `n k` half-edges. Pairs that would form a loop or a
/// repeated edge go back into the pool and are re-paired among themselves;
/// when the pool can no longer be completed the attempt restarts.
pub fn gen_regular_graph<R: RngCore + ?Sized>(
    n: usize,
    k: usize,
    rng: &mut R,
) -> Result<RegularGraph, ProblemError> {
    if k >= n.max(1) || (n * k) % 2 == 1 {
        return Err(ProblemError::InfeasibleDegreeSequence { n, k });
    }
    for _ in 0..MAX_PAIRING_ATTEMPTS {
        if let Some(adj) = try_pairing(n, k, rng) {
            return RegularGraph::new(k, adj);
        }
    }
    Err(ProblemError::RejectionBudgetExhausted {
        attempts: MAX_PAIRING_ATTEMPTS,
    })
}

fn try_pairing<R: RngCore + ?Sized>(n: usize, k: usize, rng: &mut R) -> Option<Vec<Vec<usize>>> {
    let mut adj: Vec<Vec<usize>> = vec![Vec::with_capacity(k); n];
    let mut stubs: Vec<usize> = (0..n).flat_map(|v| std::iter::repeat_n(v, k)).collect();
    while !stubs.is_empty() {
        let mut leftover: BTreeMap<usize, usize> = BTreeMap::new();
        shuffle(rng, &mut stubs);
        for pair in stubs.chunks_exact(2) {
            let (u, v) = (pair[0].min(pair[1]), pair[0].max(pair[1]));
            if u != v && !adj[u].contains(&v) {
                adj[u].push(v);
                adj[v].push(u);
            } else {
                *leftover.entry(u).or_default() += 1;
                *leftover.entry(v).or_default() += 1;
            }
        }
        if !completable(&adj, &leftover) {
            return None;
        }
        stubs = leftover
            .iter()
            .flat_map(|(&v, &c)| std::iter::repeat_n(v, c))
            .collect();
    }
    Some(adj)
}

/// Whether some two distinct leftover vertices are still non-adjacent.
fn completable(adj: &[Vec<usize>], leftover: &BTreeMap<usize, usize>) -> bool {
    if leftover.is_empty() {
        return true;
    }
    let vs: Vec<usize> = leftover.keys().copied().collect();
    vs.iter()
        .enumerate()
        .any(|(i, &u)| vs[i + 1..].iter().any(|v| !adj[u].contains(v)))
}

/// Assignment of every vertex to one of `c` components.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Partition {
    component_of: Vec<usize>,
    c: usize,
}

impl Partition {
    pub fn new(component_of: Vec<usize>, c: usize) -> Result<Self, ProblemError> {
        if let Some(&bad) = component_of.iter().find(|&&x| x >= c) {
            return Err(ProblemError::InvalidInstance(format!(
                "component {bad} outside 0..{c}"
            )));
        }
        Ok(Self { component_of, c })
    }

    pub fn component_of(&self) -> &[usize] {
        &self.component_of
    }

    pub fn c(&self) -> usize {
        self.c
    }

    pub fn len(&self) -> usize {
        self.component_of.len()
    }

    pub fn is_empty(&self) -> bool {
        self.component_of.is_empty()
    }

    pub fn random<R: RngCore + ?Sized>(n: usize, c: usize, rng: &mut R) -> Self {
        let component_of = (0..n).map(|_| crate::rng::below(rng, c as u64) as usize).collect();
        Self { component_of, c }
    }
}

/// Bits per vertex in the partition encoding, `ceil(log2 k)`.
pub fn partition_width(k: usize) -> usize {
    ceil_log2(k as u64)
}

/// `n ceil(log2 k)` bits, each chunk the vertex's component.
pub fn encode_partition(part: &Partition, k: usize) -> BitString {
    let w = partition_width(k);
    let mut out = BitString::new();
    for &x in &part.component_of {
        out.push_uint(x as u64, w);
    }
    out
}

/// Reads each chunk modulo `c`, so every bit string of the right length
/// names a partition.
pub fn decode_partition(bits: &BitString, n: usize, k: usize, c: usize) -> Result<Partition, ProblemError> {
    let w = partition_width(k);
    if bits.len() != n * w || c == 0 {
        return Err(ProblemError::LengthMismatch {
            got: bits.len(),
            expected: n * w,
        });
    }
    let component_of = (0..n)
        .map(|v| (bits.read_uint(v * w, w) % c as u64) as usize)
        .collect();
    Ok(Partition { component_of, c })
}

fn check_len(g: &RegularGraph, part: &Partition) -> Result<(), ProblemError> {
    if part.len() != g.n {
        return Err(ProblemError::LengthMismatch {
            got: part.len(),
            expected: g.n,
        });
    }
    Ok(())
}

fn find(parent: &mut [usize], mut v: usize) -> usize {
    while parent[v] != v {
        parent[v] = parent[parent[v]];
        v = parent[v];
    }
    v
}

/// Whether each of the `c` induced subgraphs contains a cycle; an edge
/// inside a component closing a loop in the union-find forest is a witness.
fn cycle_in_every_component(g: &RegularGraph, part: &Partition) -> bool {
    let mut parent: Vec<usize> = (0..g.n).collect();
    let mut has_cycle = vec![false; part.c];
    for (u, v) in g.edges() {
        let cu = part.component_of[u];
        if cu != part.component_of[v] {
            continue;
        }
        let (ru, rv) = (find(&mut parent, u), find(&mut parent, v));
        if ru == rv {
            has_cycle[cu] = true;
        } else {
            parent[ru] = rv;
        }
    }
    has_cycle.iter().all(|&h| h)
}

pub fn verify_cycle_partition(g: &RegularGraph, part: &Partition) -> Result<bool, ProblemError> {
    check_len(g, part)?;
    let expected = component_count(g.k)?;
    if part.c != expected {
        return Err(ProblemError::ComponentCountMismatch {
            expected,
            got: part.c,
        });
    }
    Ok(cycle_in_every_component(g, part))
}

/// No vertex lacks a neighbour in its own component.
///
/// The component count is not checked against the degree. This condition
/// does not by itself force a cycle: a component whose induced edges form
/// a perfect matching satisfies it and is acyclic.
pub fn stronger_neighbor_condition(g: &RegularGraph, part: &Partition) -> Result<bool, ProblemError> {
    check_len(g, part)?;
    Ok((0..g.n).all(|v| {
        let cv = part.component_of[v];
        g.adj[v].iter().any(|&u| part.component_of[u] == cv)
    }))
}

/// Bad events `A_v`: vertex `v` has no neighbour in its component. The
/// scope of `A_v` is `v` followed by its neighbours.
pub fn cycles_constraint_system(g: &RegularGraph, c: usize) -> Result<ConstraintSystem, ProblemError> {
    let p = (1.0 - 1.0 / c as f64).powi(g.k as i32);
    let events = (0..g.n)
        .map(|v| {
            let mut scope = vec![v];
            scope.extend_from_slice(&g.adj[v]);
            BadEvent::new(scope, |x| x[1..].iter().all(|&u| u != x[0])).with_prob_bound(p)
        })
        .collect();
    ConstraintSystem::uniform(g.n, c, events).map_err(|e| ProblemError::InvalidInstance(e.to_string()))
}
