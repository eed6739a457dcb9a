//! Acceptance criteria. Each test prints one PASS/FAIL line to stdout,
//! bypassing libtest capture, then asserts. Criteria run one at a time so
//! the runtime limits are measured without contention.

use std::io::Write;
use std::sync::{Mutex, OnceLock};
use std::time::{Duration, Instant};

use derand_lab::bits::BitString;
use derand_lab::channel::{capacity_for_input, Channel, Distribution};
use derand_lab::codebook::{empirical_joint_aep, tradeoff_experiment, TypicalityParams};
use derand_lab::elsearch::{ceil_log2, seed_search, ExpansionFunction, IdentitySampler, ProofVerifier, SearchConfig};
use derand_lab::hitting::{
    build_hitting_set, decode_four_part, encode_four_part, four_part_description, index_width, miss_measure,
    HittingInstance, DEFAULT_MAX_RETRIES,
};
use derand_lab::lll::{check_lll, default_max_resamples, lll_condition_exact, resample_solve, Selection};
use derand_lab::problems::{
    balancing_failure_rate, gen_binary_matrix, gen_bounded_ksat, gen_regular_graph, ksat_constraint_system,
    ksat_random_satisfaction_rate, partition_pass_rate, verify_ksat, BalanceVerifier, CyclesVerifier,
    KSatVerifier,
};
use derand_lab::rng::StreamKey;

const CRITERIA: usize = 11;

#[derive(Clone, Debug)]
struct Outcome {
    pass: bool,
    detail: String,
    /// Bit-exact rendering of every result value.
    record: Vec<String>,
    /// Headline estimates reused by later criteria.
    values: Vec<f64>,
    elapsed: Duration,
}

static LOCK: Mutex<()> = Mutex::new(());
static MEMO: [OnceLock<Outcome>; CRITERIA] = [const { OnceLock::new() }; CRITERIA];

fn root() -> StreamKey {
    StreamKey::from_u64(0x5eed)
}

fn bits(x: f64) -> String {
    format!("{:016x}", x.to_bits())
}

fn report(n: usize, pass: bool, text: &str) {
    let mut out = std::io::stdout().lock();
    let tag = if pass { "PASS" } else { "FAIL" };
    writeln!(out, "[{tag}] criterion {n:>2}: {text}").unwrap();
    out.flush().unwrap();
}

fn limit(o: &mut Outcome, secs: u64) {
    let ok = o.elapsed < Duration::from_secs(secs);
    o.pass &= ok;
    o.detail += &format!("; runtime {:.2} s (limit {secs} s)", o.elapsed.as_secs_f64());
}

fn compute(n: usize) -> Outcome {
    let deps: Vec<f64> = if n == 9 {
        [6, 7, 8].iter().map(|&c| memo(c).values[0]).collect()
    } else {
        Vec::new()
    };
    let _guard = LOCK.lock().unwrap_or_else(|e| e.into_inner());
    let start = Instant::now();
    let (pass, detail, record, values) = match n {
        1 => c1(),
        2 => c2(),
        3 => c3(),
        4 => c4(),
        5 => c5(),
        6 => c6(),
        7 => c7(),
        8 => c8(),
        9 => c9(&deps),
        10 => c10(),
        _ => unreachable!(),
    };
    let mut o = Outcome {
        pass,
        detail,
        record,
        values,
        elapsed: start.elapsed(),
    };
    let secs = [1, 30, 60, 300, 1, 120, 120, 60, 600, 10][n - 1];
    limit(&mut o, secs);
    o
}

fn memo(n: usize) -> &'static Outcome {
    MEMO[n - 1].get_or_init(|| compute(n))
}

fn check(n: usize) {
    let o = memo(n);
    report(n, o.pass, &o.detail);
    assert!(o.pass, "criterion {n}: {}", o.detail);
}

type Parts = (bool, String, Vec<String>, Vec<f64>);

fn h2(p: f64) -> f64 {
    let t = |x: f64| if x == 0.0 { 0.0 } else { -x * x.log2() };
    t(p) + t(1.0 - p)
}

fn c1() -> Parts {
    let q = Distribution::uniform(2);
    let mut worst: f64 = 0.0;
    let mut record = Vec::new();
    for p in [0.0, 0.05, 0.1, 0.25, 0.5] {
        let c = capacity_for_input(&Channel::bsc(p).unwrap(), &q).unwrap();
        worst = worst.max((c - (1.0 - h2(p))).abs());
        record.push(bits(c));
    }
    (
        worst <= 1e-9,
        format!("BSC capacity vs 1 - H2(p): max deviation {worst:.2e} (tolerance 1e-9)"),
        record,
        vec![worst],
    )
}

fn aep(n: usize, epsilon: f64, trials: u64, label: &str) -> derand_lab::codebook::AepReport {
    let ch = Channel::bsc(0.1).unwrap();
    let q = Distribution::uniform(2);
    let params = TypicalityParams::for_channel(&ch, &q, n, epsilon).unwrap();
    empirical_joint_aep(&params, &ch, &q, trials, &root().derive(label)).unwrap()
}

fn c2() -> Parts {
    let a = aep(200, 0.1, 10_000, "acceptance/2/200");
    let b = aep(500, 0.1, 10_000, "acceptance/2/500");
    (
        a.frac_typical >= 0.90 && b.frac_typical >= 0.99,
        format!(
            "typical fraction n=200: {:.4} (need >= 0.90), n=500: {:.4} (need >= 0.99)",
            a.frac_typical, b.frac_typical
        ),
        vec![bits(a.frac_typical), bits(b.frac_typical)],
        vec![a.frac_typical, b.frac_typical],
    )
}

fn c3() -> Parts {
    let n = 30;
    let eps = 0.05;
    let r = aep(n, eps, 100_000, "acceptance/3");
    let info = capacity_for_input(&Channel::bsc(0.1).unwrap(), &Distribution::uniform(2)).unwrap();
    let bound = 2.0 * (-(n as f64) * (info - 3.0 * eps)).exp2();
    (
        r.frac_independent_typical <= bound,
        format!(
            "independent-pair typical fraction {:.3e} vs bound 2*2^(-n(I-3eps)) = {bound:.3e}",
            r.frac_independent_typical
        ),
        vec![bits(r.frac_independent_typical), bits(r.frac_typical)],
        vec![r.frac_independent_typical],
    )
}

fn c4() -> Parts {
    let ch = Channel::bsc(0.1).unwrap();
    let q = Distribution::uniform(2);
    let ns = [10, 20, 40];
    let mut decreasing = 0;
    let mut at40 = Vec::new();
    let mut record = Vec::new();
    let mut curves = Vec::new();
    for r in 0..5 {
        let key = root().derive("acceptance/4").child(r);
        let rows = tradeoff_experiment(&ch, &q, &[0.3], &ns, &[128], 2000, 0.25, &key).unwrap();
        let errs: Vec<f64> = rows.iter().map(|row| row.error).collect();
        if errs.windows(2).all(|w| w[1] < w[0]) {
            decreasing += 1;
        }
        at40.push(errs[2]);
        record.extend(errs.iter().map(|&e| bits(e)));
        curves.push(format!("[{}]", errs.iter().map(|e| format!("{e:.4}")).collect::<Vec<_>>().join(", ")));
    }
    let mean40 = at40.iter().sum::<f64>() / at40.len() as f64;
    (
        decreasing >= 4 && mean40 <= 0.1,
        format!(
            "strictly decreasing in {decreasing}/5 replications (need >= 4); mean P_e at n=40 {mean40:.4} (need <= 0.1); errors by n {}",
            curves.join(" ")
        ),
        record,
        vec![decreasing as f64, mean40],
    )
}

fn c5() -> Parts {
    let mut ok = true;
    let mut record = Vec::new();
    for k in 7..=12 {
        let p = 2f64.powi(-k);
        let d = 2f64.powi(k) / std::f64::consts::E - 1.0;
        let c = check_lll(p, d, 1000).unwrap();
        // Largest integer d + 1 allowed by the same parameterization.
        let d_plus_one = (1u128 << k) * 1_000_000_000_000_000_000 / 2_718_281_828_459_045_236;
        ok &= c.holds && c.product <= 1.0 && lll_condition_exact(1, 1 << k, d_plus_one) == Some(true);
        record.push(bits(c.product));
    }
    let mut cycles = Vec::new();
    for k in 4u128..=40 {
        let float = check_lll(1.0 / (k * k * k) as f64, ((k + 1) * (k + 1)) as f64, 1000).unwrap();
        let exact = lll_condition_exact(1, k * k * k, (k + 1) * (k + 1) + 1);
        ok &= exact == Some(k >= 5) && float.holds == (k >= 5);
        cycles.push(exact == Some(true));
        record.push(bits(float.product));
    }
    (
        ok,
        format!(
            "k-SAT products <= 1 for k=7..12; cycles condition holds for k=5..40: {}, fails at k=4: {}",
            cycles[1..].iter().all(|&c| c),
            !cycles[0]
        ),
        record,
        vec![],
    )
}

fn c6() -> Parts {
    let key = root().derive("acceptance/6");
    let g = gen_regular_graph(100, 20, &mut key.derive("graph").rng()).unwrap();
    let r = partition_pass_rate(&g, 100_000, &key.derive("partitions")).unwrap();
    let target = (1.0 - 1.0 / 400.0f64).powi(100) - 3.0 * r.std_error;
    (
        r.rate >= target,
        format!("pass rate {:.4} (sigma {:.4}) vs (1-1/400)^100 - 3 sigma = {target:.4}", r.rate, r.std_error),
        vec![r.successes.to_string()],
        vec![r.rate],
    )
}

fn c7() -> Parts {
    let key = root().derive("acceptance/7");
    let f = gen_bounded_ksat(100, 8, 120, &mut key.derive("formula").rng()).unwrap();
    let r = ksat_random_satisfaction_rate(&f, 100_000, &key.derive("assignments"));
    let target = (1.0 - std::f64::consts::E / 256.0).powi(120) - 3.0 * r.std_error;
    let sys = ksat_constraint_system(&f);
    let budget = default_max_resamples(&sys);
    let mut solved = 0;
    let mut record = vec![r.successes.to_string()];
    for run in 0..20 {
        if let Ok(sol) = resample_solve(&sys, &mut key.derive("solve").child(run).rng(), budget, Selection::LowestIndex) {
            let a: Vec<bool> = sol.assignment.iter().map(|&v| v == 1).collect();
            if verify_ksat(&f, &a).unwrap() {
                solved += 1;
            }
            record.push(sol.resamples.to_string());
        }
    }
    (
        r.rate >= target && solved == 20,
        format!(
            "satisfaction rate {:.4} (sigma {:.4}) vs (1-e/256)^120 - 3 sigma = {target:.4}; resampling solved {solved}/20 within {budget} resamples",
            r.rate, r.std_error
        ),
        record,
        vec![r.rate],
    )
}

fn c8() -> Parts {
    let key = root().derive("acceptance/8");
    let m = gen_binary_matrix(128, &mut key.derive("matrix").rng());
    let r = balancing_failure_rate(&m, 100_000, &key.derive("signs"));
    let target = 2.0 * 128f64.powi(-7) + 3.0 * r.std_error;
    (
        r.rate <= target,
        format!("{} failures in {} sign vectors; rate {:.3e} vs 2*128^-7 + 3 sigma = {target:.3e}", r.successes, r.trials, r.rate),
        vec![r.successes.to_string()],
        vec![1.0 - r.rate],
    )
}

fn c9(deltas: &[f64]) -> Parts {
    let key = root().derive("acceptance/9");
    let ex = ExpansionFunction::default();
    let mut ok = true;
    let mut record = Vec::new();
    let mut summary = Vec::new();
    for (fi, name) in ["cycles", "balance", "ksat"].iter().enumerate() {
        let (delta, n) = match fi {
            0 => (deltas[0], 100u64),
            1 => (deltas[2], 128),
            _ => (deltas[1], 100),
        };
        let budget = (-delta.log2()).max(0.0).ceil() as usize + 2 * ceil_log2(n);
        let mut worst = 0;
        let mut all = true;
        for i in 0..30 {
            let mut rng = key.derive(name).child(i).rng();
            let v: Box<dyn ProofVerifier> = match fi {
                0 => Box::new(CyclesVerifier::new(gen_regular_graph(100, 20, &mut rng).unwrap()).unwrap()),
                1 => Box::new(BalanceVerifier::new(gen_binary_matrix(128, &mut rng))),
                _ => Box::new(KSatVerifier::new(gen_bounded_ksat(100, 8, 120, &mut rng).unwrap())),
            };
            match seed_search(&ex, v.as_ref(), &IdentitySampler, &SearchConfig::exhaustive(budget)) {
                Ok(cert) => {
                    let good = cert.reverify(&ex, v.as_ref(), &IdentitySampler) && cert.kp_proxy <= budget;
                    all &= good;
                    worst = worst.max(cert.kp_proxy);
                    record.push(cert.seed.to_hex() + "/" + &cert.kp_proxy.to_string());
                }
                Err(e) => {
                    all = false;
                    record.push(e.to_string());
                }
            }
        }
        ok &= all;
        summary.push(format!("{name}: longest seed {worst} bits, budget {budget}, all verified {all}"));
    }
    (ok, summary.join("; "), record, vec![])
}

fn c10() -> Parts {
    let inst = HittingInstance::uniform_power_set(8, 0.25, 2.0).unwrap();
    let bound = (-2f64).exp();
    let hs = build_hitting_set(&inst, &BitString::from_u64(0x5eed, 16), DEFAULT_MAX_RETRIES).unwrap();
    let key = root().derive("acceptance/10");
    let misses: Vec<f64> = (0..200)
        .map(|t| miss_measure(&inst.draw(&mut key.stream(0, t)), &inst).unwrap())
        .collect();
    let mean = misses.iter().sum::<f64>() / 200.0;
    let sd = (misses.iter().map(|m| (m - mean).powi(2)).sum::<f64>() / 199.0).sqrt();
    let sigma = sd / 200f64.sqrt();

    // gamma = 2^-2, beta = 2^1; the decoder's search redraws nothing and
    // returns the set built above.
    let q_desc = BitString::from_u64(0b101, 3);
    let roundtrip = (0..hs.members.len()).all(|i| {
        let code = encode_four_part(&q_desc, 1, 2, i).unwrap();
        code.len() == four_part_description(hs.members.len(), i, 3, 1, 2).unwrap()
            && decode_four_part(&code, 3, |_, _, _| hs.members.clone()).unwrap() == hs.members[i]
    });
    let width_ok = index_width(1, 2) == ceil_log2(inst.set_size() as u64);
    let mut record: Vec<String> = hs.members.iter().map(|m| m.to_string()).collect();
    record.extend(misses.iter().map(|&m| bits(m)));
    (
        hs.miss_measure <= bound && mean <= bound + 3.0 * sigma && roundtrip && width_ok,
        format!(
            "built set of {} with miss {:.4} (bound e^-2 = {bound:.4}); mean over 200 draws {mean:.4} + 3 sigma limit {:.4}; four-part round trip {roundtrip}",
            hs.members.len(),
            hs.miss_measure,
            bound + 3.0 * sigma
        ),
        record,
        vec![mean],
    )
}

#[test]
fn criterion_01_capacity_oracle() {
    check(1);
}

#[test]
fn criterion_02_typical_fraction_grows() {
    check(2);
}

#[test]
fn criterion_03_independent_pairs_rarely_typical() {
    check(3);
}

#[test]
fn criterion_04_error_falls_with_block_length() {
    check(4);
}

#[test]
fn criterion_05_local_lemma_arithmetic() {
    check(5);
}

#[test]
fn criterion_06_partition_pass_rate() {
    check(6);
}

#[test]
fn criterion_07_ksat_rate_and_resampling() {
    check(7);
}

#[test]
fn criterion_08_balancing_failures() {
    check(8);
}

#[test]
fn criterion_09_seed_lengths() {
    check(9);
}

#[test]
fn criterion_10_hitting_set() {
    check(10);
}

#[test]
fn criterion_11_reproducible() {
    let mut differing = Vec::new();
    for n in 1..CRITERIA {
        let first = memo(n);
        let again = compute(n);
        if first.record != again.record {
            differing.push(n);
        }
    }
    let pass = differing.is_empty();
    report(
        11,
        pass,
        &format!("re-running criteria 1-10 with the same root seed; differing: {differing:?}"),
    );
    assert!(pass);
}
