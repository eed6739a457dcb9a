use rand_core::RngCore;
use serde::Serialize;

use super::{ElError, ExpansionFunction, MAX_SEED_BITS};
use crate::bits::BitString;
use crate::rng::StreamKey;

pub const MAX_EXHAUSTIVE_SEED_BITS: usize = 32;
/// Multiplier on `ceil(log2 n)` in the predicted budget.
pub const DEFAULT_LOG_CONSTANT: usize = 2;

/// Accepts or rejects a candidate proof for one fixed instance.
pub trait ProofVerifier: Sync {
    fn proof_len(&self) -> usize;
    fn verify(&self, proof: &BitString) -> bool;
    fn verifier_id(&self) -> String;
}

/// Maps raw strings to candidate proofs. Output length depends only on the
/// input length.
pub trait Sampler: Sync {
    fn output_len(&self, input_len: usize) -> usize;
    fn sample(&self, raw: &BitString) -> BitString;
}

#[derive(Clone, Copy, Debug, Default)]
pub struct IdentitySampler;

impl Sampler for IdentitySampler {
    fn output_len(&self, input_len: usize) -> usize {
        input_len
    }

    fn sample(&self, raw: &BitString) -> BitString {
        raw.clone()
    }
}

/// A verifier from a closure, mostly for tests and ad-hoc use.
pub struct FnVerifier<F> {
    pub len: usize,
    pub id: String,
    pub f: F,
}

impl<F: Fn(&BitString) -> bool + Sync> ProofVerifier for FnVerifier<F> {
    fn proof_len(&self) -> usize {
        self.len
    }

    fn verify(&self, proof: &BitString) -> bool {
        (self.f)(proof)
    }

    fn verifier_id(&self) -> String {
        self.id.clone()
    }
}

#[derive(Clone, Debug)]
pub enum SearchStrategy {
    /// Shorter seeds first, then lexicographic.
    Exhaustive,
    /// `budget` uniform seeds of exactly `max_seed_len` bits.
    Random(StreamKey),
}

#[derive(Clone, Debug)]
pub struct SearchConfig {
    pub max_seed_len: usize,
    pub strategy: SearchStrategy,
    pub budget: u64,
}

impl SearchConfig {
    pub fn exhaustive(max_seed_len: usize) -> Self {
        Self {
            max_seed_len,
            strategy: SearchStrategy::Exhaustive,
            budget: u64::MAX,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize)]
pub struct SeedCertificate {
    #[serde(serialize_with = "ser_hex")]
    pub seed: BitString,
    pub output_len: usize,
    pub verifier_id: String,
    pub kp_proxy: usize,
    pub algorithm_id: String,
    /// Seeds tried before this one was accepted, inclusive.
    pub tried: u64,
}

fn ser_hex<S: serde::Serializer>(b: &BitString, s: S) -> Result<S::Ok, S::Error> {
    s.serialize_str(&b.to_hex())
}

impl SeedCertificate {
    /// Re-expands the seed and re-runs the verifier.
    pub fn reverify(
        &self,
        expansion: &ExpansionFunction,
        verifier: &dyn ProofVerifier,
        sampler: &dyn Sampler,
    ) -> bool {
        match expansion.expand(&self.seed, self.output_len) {
            Ok(raw) => verifier.verify(&sampler.sample(&raw)),
            Err(_) => false,
        }
    }
}

/// `ceil(log2 n)`, with `ceil_log2(0) = ceil_log2(1) = 0`.
pub fn ceil_log2(n: u64) -> usize {
    if n <= 1 {
        0
    } else {
        (64 - (n - 1).leading_zeros()) as usize
    }
}

/// `ceil(delta_log) + c * ceil(log2 n)` bits.
pub fn predicted_seed_budget(delta_log: f64, n: u64, c: usize) -> usize {
    assert!(delta_log >= 0.0, "delta_log must be nonnegative");
    delta_log.ceil() as usize + c * ceil_log2(n)
}

fn accepts(
    expansion: &ExpansionFunction,
    verifier: &dyn ProofVerifier,
    sampler: &dyn Sampler,
    seed: &BitString,
    raw_len: usize,
) -> bool {
    let raw = expansion
        .expand(seed, raw_len)
        .expect("seed and output lengths checked up front");
    verifier.verify(&sampler.sample(&raw))
}

pub fn seed_search(
    expansion: &ExpansionFunction,
    verifier: &dyn ProofVerifier,
    sampler: &dyn Sampler,
    config: &SearchConfig,
) -> Result<SeedCertificate, ElError> {
    let raw_len = verifier.proof_len();
    let got = sampler.output_len(raw_len);
    if got != raw_len {
        return Err(ElError::SamplerLength {
            raw: raw_len,
            got,
            expected: verifier.proof_len(),
        });
    }
    if raw_len > expansion.max_output_bits() {
        return Err(ElError::OutputTooLong {
            bits: raw_len,
            max: expansion.max_output_bits(),
        });
    }
    let certify = |seed: BitString, tried: u64| SeedCertificate {
        kp_proxy: seed.len(),
        seed,
        output_len: raw_len,
        verifier_id: verifier.verifier_id(),
        algorithm_id: expansion.algorithm_id().to_string(),
        tried,
    };
    match &config.strategy {
        SearchStrategy::Exhaustive => {
            if config.max_seed_len > MAX_EXHAUSTIVE_SEED_BITS {
                return Err(ElError::ExhaustiveTooLong {
                    bits: config.max_seed_len,
                    max: MAX_EXHAUSTIVE_SEED_BITS,
                });
            }
            let mut tried = 0u64;
            for len in 0..=config.max_seed_len {
                let remaining = config.budget - tried;
                let count = (1u64 << len).min(remaining);
                let hit = find_first(count, |v| {
                    accepts(
                        expansion,
                        verifier,
                        sampler,
                        &BitString::from_u64(v, len),
                        raw_len,
                    )
                });
                if let Some(v) = hit {
                    return Ok(certify(BitString::from_u64(v, len), tried + v + 1));
                }
                tried += count;
                if tried >= config.budget {
                    break;
                }
            }
            Err(ElError::NotFound {
                tried,
                max_seed_len: config.max_seed_len,
            })
        }
        SearchStrategy::Random(key) => {
            if config.max_seed_len > MAX_SEED_BITS {
                return Err(ElError::SeedTooLong {
                    bits: config.max_seed_len,
                    max: MAX_SEED_BITS,
                });
            }
            let mut rng = key.derive("seed-search/random").rng();
            let mut bytes = vec![0u8; config.max_seed_len.div_ceil(8)];
            for t in 0..config.budget {
                rng.fill_bytes(&mut bytes);
                let seed = BitString::from_bytes(&bytes, config.max_seed_len)
                    .expect("sized to fit");
                if accepts(expansion, verifier, sampler, &seed, raw_len) {
                    return Ok(certify(seed, t + 1));
                }
            }
            Err(ElError::NotFound {
                tried: config.budget,
                max_seed_len: config.max_seed_len,
            })
        }
    }
}

/// Smallest `v < count` with `pred(v)`; the parallel version reduces to the
/// same answer as the serial scan.
#[cfg(feature = "parallel")]
fn find_first(count: u64, pred: impl Fn(u64) -> bool + Sync) -> Option<u64> {
    use rayon::prelude::*;
    if count < 64 {
        return (0..count).find(|&v| pred(v));
    }
    (0..count).into_par_iter().find_first(|&v| pred(v))
}

#[cfg(not(feature = "parallel"))]
fn find_first(count: u64, pred: impl Fn(u64) -> bool) -> Option<u64> {
    (0..count).find(|&v| pred(v))
}

/// Monte Carlo estimate of the probability that a uniform raw string is
/// accepted after sampling.
pub fn estimate_acceptance(
    verifier: &dyn ProofVerifier,
    sampler: &dyn Sampler,
    trials: u64,
    key: &StreamKey,
) -> f64 {
    assert!(trials > 0);
    let len = verifier.proof_len();
    let mut bytes = vec![0u8; len.div_ceil(8)];
    let mut rng = key.derive("acceptance").rng();
    let mut hits = 0u64;
    for _ in 0..trials {
        rng.fill_bytes(&mut bytes);
        let raw = BitString::from_bytes(&bytes, len).expect("sized to fit");
        if verifier.verify(&sampler.sample(&raw)) {
            hits += 1;
        }
    }
    hits as f64 / trials as f64
}

/// A length-preserving-per-length map from `n` bits to fewer bits.
pub trait CompressingMap: Sync {
    fn input_len(&self) -> usize;
    fn output_len(&self) -> usize;
    fn apply(&self, y: &BitString) -> BitString;
    fn name(&self) -> String;
}

/// Truncation: drops the last `k` of `n` bits.
#[derive(Clone, Copy, Debug)]
pub struct DropLastBits {
    pub n: usize,
    pub k: usize,
}

impl CompressingMap for DropLastBits {
    fn input_len(&self) -> usize {
        self.n
    }

    fn output_len(&self) -> usize {
        self.n - self.k
    }

    fn apply(&self, y: &BitString) -> BitString {
        y.slice(0, self.n - self.k)
    }

    fn name(&self) -> String {
        format!("drop-last-{}-of-{}", self.k, self.n)
    }
}

/// XOR of the two halves of an even-length string.
#[derive(Clone, Copy, Debug)]
pub struct XorFold {
    pub n: usize,
}

impl CompressingMap for XorFold {
    fn input_len(&self) -> usize {
        self.n
    }

    fn output_len(&self) -> usize {
        self.n / 2
    }

    fn apply(&self, y: &BitString) -> BitString {
        let h = self.n / 2;
        let bits: Vec<bool> = (0..h).map(|i| y.get(i) ^ y.get(i + h)).collect();
        BitString::from_bools(&bits)
    }

    fn name(&self) -> String {
        format!("xor-fold-{}", self.n)
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct PreimageReport {
    pub certificate: SeedCertificate,
    /// `|f^{-1}(x)|` when `n <= 20`.
    pub preimage_count: Option<u64>,
    /// `n - log2 |D| + c * ceil(log2 n)` when the count is known.
    pub predicted_bits: Option<f64>,
}

struct PreimageVerifier<'a> {
    f: &'a dyn CompressingMap,
    target: &'a BitString,
}

impl ProofVerifier for PreimageVerifier<'_> {
    fn proof_len(&self) -> usize {
        self.f.input_len()
    }

    fn verify(&self, proof: &BitString) -> bool {
        self.f.apply(proof) == *self.target
    }

    fn verifier_id(&self) -> String {
        format!("preimage:{}:{}", self.f.name(), self.target.to_hex())
    }
}

const BRUTE_FORCE_MAX_BITS: usize = 20;

pub fn hash_preimage_search(
    expansion: &ExpansionFunction,
    f: &dyn CompressingMap,
    target: &BitString,
    max_seed_len: usize,
    c: usize,
) -> Result<PreimageReport, ElError> {
    if target.len() != f.output_len() {
        return Err(ElError::TargetLength {
            got: target.len(),
            expected: f.output_len(),
        });
    }
    let n = f.input_len();
    let preimage_count = (n <= BRUTE_FORCE_MAX_BITS).then(|| {
        (0..1u64 << n)
            .filter(|&v| f.apply(&BitString::from_u64(v, n)) == *target)
            .count() as u64
    });
    if preimage_count == Some(0) {
        return Err(ElError::NotFound {
            tried: 0,
            max_seed_len,
        });
    }
    let verifier = PreimageVerifier { f, target };
    let certificate = seed_search(
        expansion,
        &verifier,
        &IdentitySampler,
        &SearchConfig::exhaustive(max_seed_len),
    )?;
    let predicted_bits =
        preimage_count.map(|d| n as f64 - (d as f64).log2() + (c * ceil_log2(n as u64)) as f64);
    Ok(PreimageReport {
        certificate,
        preimage_count,
        predicted_bits,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn always(len: usize, answer: bool) -> FnVerifier<impl Fn(&BitString) -> bool + Sync> {
        FnVerifier {
            len,
            id: format!("const-{answer}"),
            f: move |_: &BitString| answer,
        }
    }

    #[test]
    fn accept_all_gives_empty_seed() {
        let g = ExpansionFunction::default();
        let cert = seed_search(&g, &always(32, true), &IdentitySampler, &SearchConfig::exhaustive(8))
            .unwrap();
        assert_eq!(cert.kp_proxy, 0);
        assert!(cert.seed.is_empty());
        assert_eq!(cert.tried, 1);
    }

    #[test]
    fn accept_none_is_not_found() {
        let g = ExpansionFunction::default();
        let err = seed_search(&g, &always(32, false), &IdentitySampler, &SearchConfig::exhaustive(6))
            .unwrap_err();
        assert_eq!(
            err,
            ElError::NotFound {
                tried: 127,
                max_seed_len: 6
            }
        );
        let random = SearchConfig {
            max_seed_len: 40,
            strategy: SearchStrategy::Random(StreamKey::from_u64(1)),
            budget: 50,
        };
        assert!(matches!(
            seed_search(&g, &always(8, false), &IdentitySampler, &random),
            Err(ElError::NotFound { tried: 50, .. })
        ));
    }

    #[test]
    fn exhaustive_guard() {
        let g = ExpansionFunction::default();
        assert!(matches!(
            seed_search(&g, &always(8, true), &IdentitySampler, &SearchConfig::exhaustive(33)),
            Err(ElError::ExhaustiveTooLong { .. })
        ));
    }

    /// Brute-force oracle: the first accepted seed in (length, value) order.
    fn serial_oracle(g: &ExpansionFunction, v: &dyn ProofVerifier, max: usize) -> Option<BitString> {
        for len in 0..=max {
            for x in 0..1u64 << len {
                let s = BitString::from_u64(x, len);
                if v.verify(&g.expand(&s, v.proof_len()).unwrap()) {
                    return Some(s);
                }
            }
        }
        None
    }

    #[test]
    fn exhaustive_is_canonical_and_monotone() {
        let g = ExpansionFunction::default();
        // Accepts when the first 6 bits are all ones: probability 1/64.
        let v = FnVerifier {
            len: 24,
            id: "six-ones".into(),
            f: |p: &BitString| (0..6).all(|i| p.get(i)),
        };
        let expected = serial_oracle(&g, &v, 12).unwrap();
        let a = seed_search(&g, &v, &IdentitySampler, &SearchConfig::exhaustive(12)).unwrap();
        let b = seed_search(&g, &v, &IdentitySampler, &SearchConfig::exhaustive(12)).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.seed, expected);
        assert!(a.reverify(&g, &v, &IdentitySampler));
        for max in a.kp_proxy..=12 {
            let c = seed_search(&g, &v, &IdentitySampler, &SearchConfig::exhaustive(max)).unwrap();
            assert!(c.kp_proxy <= a.kp_proxy);
        }
        let short = SearchConfig {
            budget: a.tried - 1,
            ..SearchConfig::exhaustive(12)
        };
        assert!(seed_search(&g, &v, &IdentitySampler, &short).is_err());
    }

    #[test]
    fn random_strategy_uses_full_length_seeds() {
        let g = ExpansionFunction::default();
        let v = FnVerifier {
            len: 16,
            id: "first-bit".into(),
            f: |p: &BitString| p.get(0),
        };
        let cfg = SearchConfig {
            max_seed_len: 20,
            strategy: SearchStrategy::Random(StreamKey::from_u64(4)),
            budget: 100,
        };
        let cert = seed_search(&g, &v, &IdentitySampler, &cfg).unwrap();
        assert_eq!(cert.kp_proxy, 20);
        assert!(cert.reverify(&g, &v, &IdentitySampler));
        assert_eq!(cert, seed_search(&g, &v, &IdentitySampler, &cfg).unwrap());
    }

    #[test]
    fn identity_sampler_is_length_preserving() {
        for n in 0..20 {
            assert_eq!(IdentitySampler.output_len(n), n);
            assert_eq!(IdentitySampler.sample(&BitString::zeros(n)).len(), n);
        }
    }

    #[test]
    fn predicted_budget_examples() {
        assert_eq!(ceil_log2(100), 7);
        assert_eq!(ceil_log2(128), 7);
        assert_eq!(ceil_log2(129), 8);
        assert_eq!(predicted_seed_budget(0.5, 100, 2), 15);
        assert_eq!(predicted_seed_budget(8.49, 100, 2), 23);
        assert_eq!(predicted_seed_budget(0.0, 100, 2), 14);
    }

    #[test]
    fn preimage_drop_last_bit() {
        let g = ExpansionFunction::default();
        let n = 16;
        let f = DropLastBits { n, k: 1 };
        let x = BitString::from_u64(0x1234, n - 1);
        let report = hash_preimage_search(&g, &f, &x, 24, 2).unwrap();
        assert_eq!(report.preimage_count, Some(2));
        assert!(report.certificate.kp_proxy <= n - 1 + 2 * ceil_log2(n as u64));
        let y = g.expand(&report.certificate.seed, n).unwrap();
        assert_eq!(f.apply(&y), x);
    }

    #[test]
    fn preimage_xor_fold() {
        let g = ExpansionFunction::default();
        let f = XorFold { n: 16 };
        let x = BitString::zeros(8);
        let report = hash_preimage_search(&g, &f, &x, 20, 2).unwrap();
        assert_eq!(report.preimage_count, Some(256));
        assert!(report.certificate.kp_proxy <= 8 + 2 * 4);
        assert_eq!(report.predicted_bits, Some(16.0 - 8.0 + 8.0));
    }

    struct ConstMap;
    impl CompressingMap for ConstMap {
        fn input_len(&self) -> usize {
            8
        }
        fn output_len(&self) -> usize {
            4
        }
        fn apply(&self, _: &BitString) -> BitString {
            BitString::zeros(4)
        }
        fn name(&self) -> String {
            "zero".into()
        }
    }

    #[test]
    fn preimage_empty_is_not_found() {
        let g = ExpansionFunction::default();
        let x = BitString::from_u64(1, 4);
        assert!(matches!(
            hash_preimage_search(&g, &ConstMap, &x, 8, 2),
            Err(ElError::NotFound { .. })
        ));
        assert!(matches!(
            hash_preimage_search(&g, &ConstMap, &BitString::zeros(3), 8, 2),
            Err(ElError::TargetLength { .. })
        ));
    }
}
