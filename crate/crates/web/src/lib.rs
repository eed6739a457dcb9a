//! Three browser operations over derand-lab. Each returns a JSON string
//! for the page to plot; errors come back as JS strings.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use derand_lab::bits::BitString;
use derand_lab::channel::{capacity_for_input, Channel, Distribution};
use derand_lab::codebook::{empirical_joint_aep, TypicalityParams};
use derand_lab::elsearch::{
    estimate_acceptance, predicted_seed_budget, seed_search, ExpansionFunction, IdentitySampler, ProofVerifier,
    SearchConfig, DEFAULT_LOG_CONSTANT,
};
use derand_lab::lll::{default_max_resamples, resample_solve, Selection};
use derand_lab::problems::{gen_bounded_ksat, ksat_constraint_system, verify_ksat, KSatVerifier};
use derand_lab::rng::StreamKey;

/// Seed-search lengths the page may ask for; larger spaces stall the tab.
pub const MAX_DEMO_SEED_BITS: usize = 20;

fn key(seed_hex: &str) -> Result<StreamKey, String> {
    let s = seed_hex.trim().trim_start_matches("0x");
    let bits = if s.is_empty() {
        BitString::new()
    } else {
        BitString::from_hex(s, None).map_err(|e| format!("seed: {e}"))?
    };
    Ok(StreamKey::from_bits(&bits))
}

/// `C_Q` of BSC(p) under uniform input at `points` evenly spaced `p`.
pub fn capacity_curve(points: u32) -> Result<Value, String> {
    if points < 2 {
        return Err("need at least two points".into());
    }
    let q = Distribution::uniform(2);
    let rows = (0..points)
        .map(|i| {
            let p = i as f64 / (points - 1) as f64;
            let ch = Channel::bsc(p).map_err(|e| e.to_string())?;
            let c = capacity_for_input(&ch, &q).map_err(|e| e.to_string())?;
            Ok(json!({"p": p, "capacity": c}))
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(json!({ "rows": rows }))
}

/// Typical-set fractions over BSC(p) for each block length in `ns`.
pub fn aep_curve(p: f64, epsilon: f64, ns: &[u32], trials: u32, seed_hex: &str) -> Result<Value, String> {
    let ch = Channel::bsc(p).map_err(|e| e.to_string())?;
    let q = Distribution::uniform(2);
    let root = key(seed_hex)?;
    let info = capacity_for_input(&ch, &q).map_err(|e| e.to_string())?;
    let rows = ns
        .iter()
        .map(|&n| {
            let params = TypicalityParams::for_channel(&ch, &q, n as usize, epsilon).map_err(|e| e.to_string())?;
            let r = empirical_joint_aep(&params, &ch, &q, trials as u64, &root.child(n as u64))
                .map_err(|e| e.to_string())?;
            Ok(json!({
                "n": n,
                "typical": r.frac_typical,
                "independent": r.frac_independent_typical,
                "independent_bound": 2.0 * (-(n as f64) * (info - 3.0 * epsilon)).exp2(),
            }))
        })
        .collect::<Result<Vec<_>, String>>()?;
    Ok(json!({ "mutual_information": info, "rows": rows }))
}

/// Generates a bounded k-SAT formula, solves it by resampling, then finds
/// the shortest seed whose expansion satisfies it.
pub fn ksat_demo(n: u32, k: u32, m: u32, max_seed_bits: u32, seed_hex: &str) -> Result<Value, String> {
    let max_seed_bits = max_seed_bits as usize;
    if max_seed_bits > MAX_DEMO_SEED_BITS {
        return Err(format!("seed search is capped at {MAX_DEMO_SEED_BITS} bits here"));
    }
    let root = key(seed_hex)?;
    let f = gen_bounded_ksat(n as usize, k as usize, m as usize, &mut root.derive("formula").rng())
        .map_err(|e| e.to_string())?;
    let sys = ksat_constraint_system(&f);
    let sol = resample_solve(
        &sys,
        &mut root.derive("solve").rng(),
        default_max_resamples(&sys),
        Selection::LowestIndex,
    )
    .map_err(|e| e.to_string())?;
    let assignment: Vec<bool> = sol.assignment.iter().map(|&v| v == 1).collect();
    let solved = verify_ksat(&f, &assignment).map_err(|e| e.to_string())?;

    let v = KSatVerifier::new(f.clone());
    let trials = 2000;
    let delta = estimate_acceptance(&v, &IdentitySampler, trials, &root.derive("acceptance"));
    let delta_log = 0.0 - delta.max(1.0 / trials as f64).log2();
    let ex = ExpansionFunction::default();
    let search = seed_search(&ex, &v, &IdentitySampler, &SearchConfig::exhaustive(max_seed_bits));
    let certificate = match search {
        Ok(cert) => json!({
            "seed_hex": cert.seed.to_hex(),
            "bits": cert.kp_proxy,
            "tried": cert.tried,
            "verified": cert.reverify(&ex, &v, &IdentitySampler),
        }),
        Err(e) => json!({ "error": e.to_string() }),
    };
    Ok(json!({
        "verifier_id": v.verifier_id(),
        "max_occurrences": f.occurrences().into_iter().max().unwrap_or(0),
        "resamples": sol.resamples,
        "solved": solved,
        "acceptance_estimate": delta,
        "delta_log_bits": delta_log,
        "predicted_budget_bits": predicted_seed_budget(delta_log, n as u64, DEFAULT_LOG_CONSTANT),
        "certificate": certificate,
    }))
}

fn to_js(r: Result<Value, String>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e))
}

#[wasm_bindgen(js_name = capacityCurve)]
pub fn capacity_curve_js(points: u32) -> Result<String, JsValue> {
    to_js(capacity_curve(points))
}

#[wasm_bindgen(js_name = aepCurve)]
pub fn aep_curve_js(p: f64, epsilon: f64, ns: Vec<u32>, trials: u32, seed_hex: &str) -> Result<String, JsValue> {
    to_js(aep_curve(p, epsilon, &ns, trials, seed_hex))
}

#[wasm_bindgen(js_name = ksatDemo)]
pub fn ksat_demo_js(n: u32, k: u32, m: u32, max_seed_bits: u32, seed_hex: &str) -> Result<String, JsValue> {
    to_js(ksat_demo(n, k, m, max_seed_bits, seed_hex))
}
