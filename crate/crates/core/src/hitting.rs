//! Hitting sets for a family of large sets, and the four-part description
//! that names one of their members by index.

use std::collections::HashMap;

use rand_core::RngCore;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bits::BitString;
use crate::elsearch::ceil_log2;
use crate::rng::{Categorical, StreamKey};

/// Largest family [`miss_measure`] will enumerate.
pub const MAX_FAMILY: usize = 1 << 20;
pub const DEFAULT_MAX_RETRIES: u32 = 64;
/// Slack on `P(D) >= gamma` so sums like `0.125 + 0.125` count at `0.25`.
pub const MEASURE_SLACK: f64 = 1e-12;

#[derive(Debug, Error, PartialEq)]
pub enum HittingError {
    #[error("invalid instance: {0}")]
    InvalidInstance(String),
    #[error("no draw met the bound in {attempts} attempts")]
    RetriesExhausted { attempts: u32 },
    #[error("family of {size} sets exceeds the enumeration limit of {MAX_FAMILY}")]
    FamilyTooLarge { size: usize },
    #[error("index {index} outside a set of {size}")]
    IndexOutOfRange { index: usize, size: usize },
    #[error("malformed description: {0}")]
    Malformed(String),
}

#[derive(Clone, Debug, PartialEq)]
struct Member {
    set: Vec<usize>,
    q: f64,
    /// `P(D)`.
    weight: f64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct HittingInstance {
    universe: Vec<String>,
    p: Vec<f64>,
    gamma: f64,
    beta: f64,
    family: Vec<Member>,
}

/// On-disk form `{universe, P, gamma, beta, family: [{set, q}]}`; sets list
/// universe elements.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct HittingInstanceFile {
    pub universe: Vec<String>,
    #[serde(rename = "P")]
    pub p: Vec<f64>,
    pub gamma: f64,
    pub beta: f64,
    pub family: Vec<FamilyEntry>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct FamilyEntry {
    pub set: Vec<String>,
    pub q: f64,
}

fn check_distribution(what: &str, probs: impl Iterator<Item = f64>) -> Result<(), HittingError> {
    let mut sum = 0.0;
    for p in probs {
        if !(p >= 0.0 && p.is_finite()) {
            return Err(HittingError::InvalidInstance(format!("{what} has entry {p}")));
        }
        sum += p;
    }
    if (sum - 1.0).abs() > 1e-9 {
        return Err(HittingError::InvalidInstance(format!("{what} sums to {sum}")));
    }
    Ok(())
}

impl HittingInstance {
    /// `family` lists each set as universe indices with its `Q` weight.
    pub fn new(
        universe: Vec<String>,
        p: Vec<f64>,
        gamma: f64,
        beta: f64,
        family: Vec<(Vec<usize>, f64)>,
    ) -> Result<Self, HittingError> {
        if p.len() != universe.len() || universe.is_empty() {
            return Err(HittingError::InvalidInstance(format!(
                "{} elements but {} probabilities",
                universe.len(),
                p.len()
            )));
        }
        check_distribution("P", p.iter().copied())?;
        check_distribution("family Q", family.iter().map(|(_, q)| *q))?;
        if !(gamma > 0.0 && gamma <= 1.0) {
            return Err(HittingError::InvalidInstance(format!("gamma {gamma} outside (0, 1]")));
        }
        if !(beta > 0.0 && beta.is_finite()) {
            return Err(HittingError::InvalidInstance(format!("beta {beta} must be positive")));
        }
        let family = family
            .into_iter()
            .map(|(mut set, q)| {
                set.sort_unstable();
                set.dedup();
                if let Some(&bad) = set.iter().find(|&&x| x >= universe.len()) {
                    return Err(HittingError::InvalidInstance(format!("set names element {bad}")));
                }
                let weight = set.iter().map(|&x| p[x]).sum();
                Ok(Member { set, q, weight })
            })
            .collect::<Result<_, _>>()?;
        Ok(Self {
            universe,
            p,
            gamma,
            beta,
            family,
        })
    }

    /// Uniform `P` on `n` elements named `0..n`, with `Q` uniform over every
    /// subset of measure at least `gamma`.
    pub fn uniform_power_set(n: usize, gamma: f64, beta: f64) -> Result<Self, HittingError> {
        if n > 20 {
            return Err(HittingError::FamilyTooLarge { size: 1 << n.min(63) });
        }
        let sets: Vec<Vec<usize>> = (0..1usize << n)
            .map(|mask| (0..n).filter(|&i| mask >> i & 1 == 1).collect::<Vec<_>>())
            .filter(|s| s.len() as f64 / n as f64 >= gamma - MEASURE_SLACK)
            .collect();
        let q = 1.0 / sets.len() as f64;
        Self::new(
            (0..n).map(|i| i.to_string()).collect(),
            vec![1.0 / n as f64; n],
            gamma,
            beta,
            sets.into_iter().map(|s| (s, q)).collect(),
        )
    }

    pub fn from_file(file: HittingInstanceFile) -> Result<Self, HittingError> {
        let index: HashMap<&str, usize> = file.universe.iter().enumerate().map(|(i, s)| (s.as_str(), i)).collect();
        if index.len() != file.universe.len() {
            return Err(HittingError::InvalidInstance("universe has repeated elements".into()));
        }
        let family = file
            .family
            .iter()
            .map(|e| {
                let set = e
                    .set
                    .iter()
                    .map(|x| {
                        index
                            .get(x.as_str())
                            .copied()
                            .ok_or_else(|| HittingError::InvalidInstance(format!("`{x}` is not in the universe")))
                    })
                    .collect::<Result<Vec<_>, _>>()?;
                Ok((set, e.q))
            })
            .collect::<Result<Vec<_>, _>>()?;
        Self::new(file.universe, file.p, file.gamma, file.beta, family)
    }

    pub fn to_file(&self) -> HittingInstanceFile {
        HittingInstanceFile {
            universe: self.universe.clone(),
            p: self.p.clone(),
            gamma: self.gamma,
            beta: self.beta,
            family: self
                .family
                .iter()
                .map(|m| FamilyEntry {
                    set: m.set.iter().map(|&i| self.universe[i].clone()).collect(),
                    q: m.q,
                })
                .collect(),
        }
    }

    pub fn universe(&self) -> &[String] {
        &self.universe
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn family_len(&self) -> usize {
        self.family.len()
    }

    /// `ceil(beta / gamma)`, tolerant of quotients landing just above an
    /// integer.
    pub fn set_size(&self) -> usize {
        (self.beta / self.gamma - 1e-9).ceil().max(1.0) as usize
    }

    /// `exp(-beta)`.
    pub fn bound(&self) -> f64 {
        (-self.beta).exp()
    }

    /// `ceil(beta / gamma)` i.i.d. draws from `P`.
    pub fn draw<R: RngCore + ?Sized>(&self, rng: &mut R) -> Vec<usize> {
        let sampler = Categorical::new(&self.p);
        (0..self.set_size()).map(|_| sampler.sample(rng)).collect()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct HittingSet {
    /// Universe indices in draw order; repeats are kept.
    pub members: Vec<usize>,
    #[serde(serialize_with = "ser_hex")]
    pub draw_seed: BitString,
    /// 0 for the first draw.
    pub attempt: u32,
    pub miss_measure: f64,
}

fn ser_hex<S: serde::Serializer>(b: &BitString, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&b.to_hex())
}

/// `Q({D : P(D) >= gamma, D disjoint from members})`, by enumeration.
pub fn miss_measure(members: &[usize], inst: &HittingInstance) -> Result<f64, HittingError> {
    if inst.family.len() > MAX_FAMILY {
        return Err(HittingError::FamilyTooLarge {
            size: inst.family.len(),
        });
    }
    let mut hit = vec![false; inst.universe.len()];
    for &m in members {
        hit[m] = true;
    }
    Ok(inst
        .family
        .iter()
        .filter(|d| d.weight >= inst.gamma - MEASURE_SLACK && !d.set.iter().any(|&x| hit[x]))
        .fold(0.0, |acc, d| acc + d.q))
}

/// Draws `S` until its miss measure is at most `exp(-beta)`. Attempt `a`
/// draws from stream `a` of a key derived from `seed`; at most
/// `max_retries` redraws follow the first.
pub fn build_hitting_set(
    inst: &HittingInstance,
    seed: &BitString,
    max_retries: u32,
) -> Result<HittingSet, HittingError> {
    let key = StreamKey::from_bits(seed).derive("hitting-set");
    for attempt in 0..=max_retries {
        let members = inst.draw(&mut key.stream(attempt as u64, 0));
        let miss = miss_measure(&members, inst)?;
        if miss <= inst.bound() {
            return Ok(HittingSet {
                members,
                draw_seed: seed.clone(),
                attempt,
                miss_measure: miss,
            });
        }
    }
    Err(HittingError::RetriesExhausted {
        attempts: max_retries + 1,
    })
}

/// Length of the self-delimiting code for `v`: the value in
/// `w = ceil(log2(v + 2))` bits, preceded by `w` written with each bit
/// followed by a continuation flag.
pub fn prefix_len(v: u64) -> usize {
    let w = ceil_log2(v + 2);
    w + 2 * ceil_log2(w as u64 + 1)
}

pub fn encode_prefix(v: u64, out: &mut BitString) {
    let w = ceil_log2(v + 2);
    let l = ceil_log2(w as u64 + 1);
    for i in (0..l).rev() {
        out.push((w >> i) & 1 == 1);
        out.push(i != 0);
    }
    out.push_uint(v, w);
}

/// Reads one prefix code at `*pos`, advancing it.
pub fn decode_prefix(bits: &BitString, pos: &mut usize) -> Result<u64, HittingError> {
    let mut w = 0usize;
    loop {
        if *pos + 2 > bits.len() {
            return Err(HittingError::Malformed("truncated length header".into()));
        }
        w = (w << 1) | bits.get(*pos) as usize;
        let more = bits.get(*pos + 1);
        *pos += 2;
        if !more {
            break;
        }
        if w > 64 {
            return Err(HittingError::Malformed("length header too long".into()));
        }
    }
    if w > 64 || *pos + w > bits.len() {
        return Err(HittingError::Malformed("truncated value".into()));
    }
    let v = bits.read_uint(*pos, w);
    *pos += w;
    Ok(v)
}

/// `ceil(log2 ceil(beta / gamma))` with `beta = 2^log_beta`, `gamma = 2^-s`.
pub fn index_width(log_beta: u32, s: u32) -> usize {
    (log_beta + s) as usize
}

/// Bit length of the description of member `index`: the `Q` part, then
/// prefix codes for `log2 beta` and `s`, then the index.
pub fn four_part_description(
    set_size: usize,
    index: usize,
    alpha_bits: usize,
    log_beta: u32,
    s: u32,
) -> Result<usize, HittingError> {
    if index >= set_size {
        return Err(HittingError::IndexOutOfRange { index, size: set_size });
    }
    Ok(alpha_bits + prefix_len(log_beta as u64) + prefix_len(s as u64) + index_width(log_beta, s))
}

/// Concatenates the four parts. `q_description` is taken as already
/// prefix-free.
pub fn encode_four_part(
    q_description: &BitString,
    log_beta: u32,
    s: u32,
    index: usize,
) -> Result<BitString, HittingError> {
    let width = index_width(log_beta, s);
    if width > 63 || index as u64 >= 1u64 << width {
        return Err(HittingError::IndexOutOfRange {
            index,
            size: 1usize.checked_shl(width as u32).unwrap_or(usize::MAX),
        });
    }
    let mut out = q_description.clone();
    encode_prefix(log_beta as u64, &mut out);
    encode_prefix(s as u64, &mut out);
    out.push_uint(index as u64, width);
    Ok(out)
}

/// Parses a four-part string and returns the indexed member of the set
/// that `search(q_description, log_beta, s)` rebuilds.
pub fn decode_four_part<T: Clone>(
    code: &BitString,
    alpha_bits: usize,
    search: impl Fn(&BitString, u32, u32) -> Vec<T>,
) -> Result<T, HittingError> {
    if code.len() < alpha_bits {
        return Err(HittingError::Malformed("shorter than the Q part".into()));
    }
    let q = code.slice(0, alpha_bits);
    let mut pos = alpha_bits;
    let log_beta = decode_prefix(code, &mut pos)? as u32;
    let s = decode_prefix(code, &mut pos)? as u32;
    let width = index_width(log_beta, s);
    if pos + width != code.len() {
        return Err(HittingError::Malformed(format!(
            "{} bits left for a {width}-bit index",
            code.len() - pos
        )));
    }
    let index = code.read_uint(pos, width) as usize;
    let set = search(&q, log_beta, s);
    set.get(index)
        .cloned()
        .ok_or(HittingError::IndexOutOfRange { index, size: set.len() })
}
