use serde::Serialize;

use super::{generate_codebook, Codebook, CodebookError, Decoder, TypicalityParams};
use crate::bits::BitString;
use crate::channel::{capacity_for_input, Channel, ChannelError, Distribution};
use crate::rng::{Categorical, StreamKey};

#[cfg(feature = "parallel")]
use rayon::prelude::*;

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct ErrorReport {
    /// `lambda_w` estimate for message `w = index + 1`.
    pub per_word_error: Vec<f64>,
    pub average_error: f64,
    /// Total channel uses, `M * trials_per_word`.
    pub trials: u64,
    pub confidence_halfwidth: f64,
}

fn halfwidth(p: f64, trials: u64) -> f64 {
    1.96 * (p * (1.0 - p) / trials as f64).sqrt()
}

fn map_indices<T: Send>(count: u64, f: impl Fn(u64) -> T + Sync + Send) -> Vec<T> {
    #[cfg(feature = "parallel")]
    {
        (0..count).into_par_iter().map(f).collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        (0..count).map(f).collect()
    }
}

fn check_marginals(params: &TypicalityParams, channel: &Channel, q: &Distribution) -> Result<(), CodebookError> {
    let joint = channel.joint(q)?;
    let (nx, ny) = (joint.inputs(), joint.outputs());
    if params.inputs() != nx || params.outputs() != ny {
        return Err(ChannelError::DimensionMismatch {
            expected: nx,
            found: params.inputs(),
        }
        .into());
    }
    for a in 0..nx {
        for b in 0..ny {
            if (params.joint().prob(a, b) - joint.prob(a, b)).abs() > 1e-12 {
                return Err(CodebookError::Malformed(format!(
                    "typicality law disagrees with channel at ({a}, {b})"
                )));
            }
        }
    }
    Ok(())
}

/// Sends every codeword `trials_per_word` times. Trial `t` of message `w`
/// draws its noise from `key.stream(w, t)`, so the report does not depend
/// on scheduling.
pub fn estimate_error(
    codebook: &Codebook,
    channel: &Channel,
    params: &TypicalityParams,
    trials_per_word: u64,
    key: &StreamKey,
) -> Result<ErrorReport, CodebookError> {
    if trials_per_word == 0 {
        return Err(CodebookError::Malformed("trials_per_word must be at least 1".into()));
    }
    if channel.inputs() != params.inputs() || channel.outputs() != params.outputs() {
        return Err(ChannelError::DimensionMismatch {
            expected: params.inputs(),
            found: channel.inputs(),
        }
        .into());
    }
    let decoder = Decoder::new(codebook, params)?;
    let errors = map_indices(codebook.num_words() as u64, |w| -> Result<u64, CodebookError> {
        let row = codebook.row(w as usize);
        let mut y = Vec::with_capacity(row.len());
        let mut errors = 0;
        for t in 0..trials_per_word {
            let mut rng = key.stream(w, t);
            channel.transmit_into(row, &mut rng, &mut y)?;
            if !decoder.decodes_to(&y, w as usize + 1)? {
                errors += 1;
            }
        }
        Ok(errors)
    });
    let errors = errors.into_iter().collect::<Result<Vec<_>, _>>()?;
    let per_word_error: Vec<f64> = errors
        .iter()
        .map(|&e| e as f64 / trials_per_word as f64)
        .collect();
    let total_errors: u64 = errors.iter().sum();
    let trials = trials_per_word * codebook.num_words() as u64;
    let average_error = per_word_error.iter().sum::<f64>() / per_word_error.len() as f64;
    Ok(ErrorReport {
        confidence_halfwidth: halfwidth(total_errors as f64 / trials as f64, trials),
        per_word_error,
        average_error,
        trials,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct AepReport {
    pub frac_typical: f64,
    pub frac_independent_typical: f64,
    pub trials: u64,
}

fn draw(sampler: &Categorical, n: usize, rng: &mut crate::rng::Stream, out: &mut Vec<usize>) {
    out.clear();
    out.extend((0..n).map(|_| sampler.sample(rng)));
}

/// Fraction of channel pairs, and of independent pairs with the same
/// marginals, that land in the jointly typical set.
pub fn empirical_joint_aep(
    params: &TypicalityParams,
    channel: &Channel,
    q: &Distribution,
    trials: u64,
    key: &StreamKey,
) -> Result<AepReport, CodebookError> {
    if trials == 0 {
        return Err(CodebookError::Malformed("trials must be at least 1".into()));
    }
    check_marginals(params, channel, q)?;
    let n = params.n();
    let qx = q.sampler();
    let qy = Categorical::new(params.joint().marginal_y());
    let dependent = key.derive("aep/dependent");
    let independent = key.derive("aep/independent");
    let hits = map_indices(trials, |t| -> Result<(u64, u64), CodebookError> {
        let (mut x, mut y) = (Vec::with_capacity(n), Vec::with_capacity(n));
        let mut rng = dependent.stream(0, t);
        draw(&qx, n, &mut rng, &mut x);
        channel.transmit_into(&x, &mut rng, &mut y)?;
        let a = super::is_jointly_typical(&x, &y, params)? as u64;
        let mut rng = independent.stream(0, t);
        draw(&qx, n, &mut rng, &mut x);
        draw(&qy, n, &mut rng, &mut y);
        let b = super::is_jointly_typical(&x, &y, params)? as u64;
        Ok((a, b))
    });
    let (mut a, mut b) = (0u64, 0u64);
    for h in hits {
        let (x, y) = h?;
        a += x;
        b += y;
    }
    Ok(AepReport {
        frac_typical: a as f64 / trials as f64,
        frac_independent_typical: b as f64 / trials as f64,
        trials,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct TradeoffRow {
    pub rate: f64,
    pub n: usize,
    pub seed_length: usize,
    pub num_words: usize,
    pub error: f64,
    pub halfwidth: f64,
    /// `rate < C_Q`.
    pub achievable: bool,
}

/// The first `len` bits of a stream derived from `key`.
pub(crate) fn derived_bits(key: &StreamKey, len: usize) -> BitString {
    use rand_core::RngCore;
    let mut bytes = vec![0u8; len.div_ceil(8)];
    key.rng().fill_bytes(&mut bytes);
    BitString::from_bytes(&bytes, len).expect("length fits the buffer")
}

/// One row per `(rate, n, seed_length)`: a codebook expanded from a seed of
/// exactly `seed_length` bits, then its Monte Carlo error.
#[allow(clippy::too_many_arguments)]
pub fn tradeoff_experiment(
    channel: &Channel,
    q: &Distribution,
    rates: &[f64],
    block_lengths: &[usize],
    seed_lengths: &[usize],
    trials_per_word: u64,
    epsilon: f64,
    key: &StreamKey,
) -> Result<Vec<TradeoffRow>, CodebookError> {
    let capacity = capacity_for_input(channel, q)?;
    let joint = channel.joint(q)?;
    let mut table = Vec::new();
    for (ri, &rate) in rates.iter().enumerate() {
        for &n in block_lengths {
            for &seed_length in seed_lengths {
                let cell = key.derive(&format!("tradeoff/{ri}/{n}/{seed_length}"));
                let seed = derived_bits(&cell.derive("seed"), seed_length);
                let codebook = generate_codebook(q, n, rate, &seed)?;
                let params = TypicalityParams::new(joint.clone(), n, epsilon)?;
                let report =
                    estimate_error(&codebook, channel, &params, trials_per_word, &cell.derive("noise"))?;
                table.push(TradeoffRow {
                    rate,
                    n,
                    seed_length,
                    num_words: codebook.num_words(),
                    error: report.average_error,
                    halfwidth: report.confidence_halfwidth,
                    achievable: rate < capacity,
                });
            }
        }
    }
    Ok(table)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codebook::decode;

    fn bsc_params(p: f64, n: usize, eps: f64) -> (Channel, Distribution, TypicalityParams) {
        let ch = Channel::bsc(p).unwrap();
        let q = Distribution::uniform(2);
        let params = TypicalityParams::for_channel(&ch, &q, n, eps).unwrap();
        (ch, q, params)
    }

    #[test]
    fn noiseless_distinct_rows_never_err() {
        let ch = Channel::identity(2);
        let q = Distribution::uniform(2);
        let rows = vec![vec![0, 0, 1, 1], vec![0, 1, 0, 1], vec![1, 1, 0, 0], vec![1, 0, 1, 0]];
        let cb = Codebook::from_rows(rows).unwrap();
        let params = TypicalityParams::for_channel(&ch, &q, 4, 1e-6).unwrap();
        let r = estimate_error(&cb, &ch, &params, 50, &StreamKey::from_u64(1)).unwrap();
        assert_eq!(r.average_error, 0.0);
        assert_eq!(r.trials, 200);
        assert_eq!(r.confidence_halfwidth, 0.0);
    }

    #[test]
    fn single_word_error_shrinks_with_n() {
        let q = Distribution::uniform(2);
        let err = |n: usize| {
            let (ch, _, params) = bsc_params(0.1, n, 0.1);
            let cb = generate_codebook(&q, n, 1e-6, &BitString::from_u64(3, 8)).unwrap();
            assert_eq!(cb.num_words(), 2);
            // Rate 1e-6 still gives M = 2; keep only the first row.
            let cb = Codebook::from_rows(vec![cb.row(0).to_vec()]).unwrap();
            estimate_error(&cb, &ch, &params, 4000, &StreamKey::from_u64(n as u64))
                .unwrap()
                .average_error
        };
        let (e10, e100) = (err(10), err(100));
        assert!(e100 < e10, "{e10} vs {e100}");
    }

    /// Exact `P_e` of a fixed codebook by enumerating every output block.
    fn exact_error(cb: &Codebook, ch: &Channel, params: &TypicalityParams) -> f64 {
        let n = cb.n();
        let mut total = 0.0;
        for (w, row) in cb.rows().enumerate() {
            for mask in 0..1usize << n {
                let y: Vec<usize> = (0..n).map(|i| (mask >> i) & 1).collect();
                let p: f64 = row.iter().zip(&y).map(|(&a, &b)| ch.prob(a, b)).product();
                if decode(cb, &y, params).unwrap() != w + 1 {
                    total += p;
                }
            }
        }
        total / cb.num_words() as f64
    }

    #[test]
    fn useless_channel_errs_at_least_chance() {
        let (ch, _, params) = bsc_params(0.5, 4, 0.2);
        for rows in [
            vec![vec![0, 1, 0, 1], vec![1, 1, 0, 0]],
            vec![vec![0, 0, 0, 0], vec![1, 1, 1, 1]],
            vec![vec![0, 1, 1, 0], vec![0, 1, 1, 0]],
        ] {
            let cb = Codebook::from_rows(rows).unwrap();
            let exact = exact_error(&cb, &ch, &params);
            assert!(exact >= 0.5 - 1e-12, "{exact}");
            let mc = estimate_error(&cb, &ch, &params, 5000, &StreamKey::from_u64(9)).unwrap();
            assert!((mc.average_error - exact).abs() < 4.0 * mc.confidence_halfwidth.max(0.01));
        }
        let (ch, q, params) = bsc_params(0.5, 20, 0.1);
        let cb = generate_codebook(&q, 20, 0.05, &BitString::from_u64(11, 16)).unwrap();
        let r = estimate_error(&cb, &ch, &params, 5000, &StreamKey::from_u64(4)).unwrap();
        assert!(r.average_error >= 0.4, "{}", r.average_error);
    }

    #[test]
    fn average_is_mean_of_words_and_deterministic() {
        let (ch, q, params) = bsc_params(0.1, 12, 0.2);
        let cb = generate_codebook(&q, 12, 0.25, &BitString::from_u64(77, 12)).unwrap();
        let key = StreamKey::from_u64(5);
        let a = estimate_error(&cb, &ch, &params, 300, &key).unwrap();
        let b = estimate_error(&cb, &ch, &params, 300, &key).unwrap();
        assert_eq!(a, b);
        let mean = a.per_word_error.iter().sum::<f64>() / a.per_word_error.len() as f64;
        assert!((a.average_error - mean).abs() < 1e-12);
        assert!((0.0..=1.0).contains(&a.average_error));
    }

    #[test]
    fn halfwidth_scales_inverse_sqrt() {
        let (ch, q, params) = bsc_params(0.1, 10, 0.25);
        let cb = generate_codebook(&q, 10, 0.3, &BitString::from_u64(1, 8)).unwrap();
        let key = StreamKey::from_u64(8);
        let small = estimate_error(&cb, &ch, &params, 500, &key).unwrap();
        let large = estimate_error(&cb, &ch, &params, 8000, &key).unwrap();
        let ratio = small.confidence_halfwidth / large.confidence_halfwidth;
        assert!((ratio - 4.0).abs() < 0.6, "{ratio}");
    }

    #[test]
    fn ensemble_symmetry_across_words() {
        // Mean of lambda_1 and of lambda_w over 200 random codebooks agree
        // within three combined standard errors.
        let (ch, q, params) = bsc_params(0.1, 10, 0.25);
        let key = StreamKey::from_u64(2024);
        let (mut first, mut last) = (Vec::new(), Vec::new());
        for c in 0..200u64 {
            let seed = derived_bits(&key.child(c), 64);
            let cb = generate_codebook(&q, 10, 0.3, &seed).unwrap();
            let r = estimate_error(&cb, &ch, &params, 40, &key.child(c).derive("noise")).unwrap();
            first.push(r.per_word_error[0]);
            last.push(r.per_word_error[cb.num_words() - 1]);
        }
        let stats = |v: &[f64]| {
            let m = v.iter().sum::<f64>() / v.len() as f64;
            let var = v.iter().map(|x| (x - m).powi(2)).sum::<f64>() / (v.len() - 1) as f64;
            (m, var / v.len() as f64)
        };
        let ((m1, s1), (m2, s2)) = (stats(&first), stats(&last));
        assert!((m1 - m2).abs() <= 3.0 * (s1 + s2).sqrt(), "{m1} vs {m2}");
    }

    #[test]
    fn aep_vacuous_threshold() {
        let ch = Channel::identity(3);
        let q = Distribution::new(vec![0.5, 0.3, 0.2]).unwrap();
        let params = TypicalityParams::for_channel(&ch, &q, 15, 100.0).unwrap();
        let r = empirical_joint_aep(&params, &ch, &q, 200, &StreamKey::from_u64(0)).unwrap();
        assert_eq!(r.frac_typical, 1.0);
        // Independent pairs hit zero-probability off-diagonal symbols.
        assert!(r.frac_independent_typical < 1.0);

        let ch = Channel::bsc(0.2).unwrap();
        let params = TypicalityParams::for_channel(&ch, &q_bin(), 15, 100.0).unwrap();
        let r = empirical_joint_aep(&params, &ch, &q_bin(), 200, &StreamKey::from_u64(0)).unwrap();
        assert_eq!((r.frac_typical, r.frac_independent_typical), (1.0, 1.0));
    }

    fn q_bin() -> Distribution {
        Distribution::uniform(2)
    }

    #[test]
    fn aep_rejects_inconsistent_law() {
        let (ch, _, _) = bsc_params(0.1, 10, 0.1);
        let other = TypicalityParams::for_channel(&Channel::bsc(0.2).unwrap(), &q_bin(), 10, 0.1).unwrap();
        assert!(empirical_joint_aep(&other, &ch, &q_bin(), 10, &StreamKey::from_u64(0)).is_err());
    }

    #[test]
    fn tradeoff_table_shape_and_flags() {
        let ch = Channel::bsc(0.1).unwrap();
        let rows = tradeoff_experiment(
            &ch,
            &q_bin(),
            &[0.3, 0.9],
            &[8],
            &[0, 16],
            50,
            0.25,
            &StreamKey::from_u64(1),
        )
        .unwrap();
        assert_eq!(rows.len(), 4);
        assert!(rows[0].achievable && !rows[2].achievable);
        assert_eq!(rows[1].seed_length, 16);
        assert_eq!(rows[2].num_words, 256);
    }
}
