use std::path::Path;

use derand_lab::bits::BitString;
use derand_lab::channel::{capacity_for_input, entropy, Channel, ChannelFile, Distribution};
use derand_lab::codebook::{
    decode, empirical_joint_aep, estimate_error, generate_codebook, tradeoff_experiment, Codebook, CodebookFile,
    TypicalityParams,
};
use derand_lab::elsearch::{
    estimate_acceptance, predicted_seed_budget, seed_search, ExpansionFunction, IdentitySampler, ProofVerifier,
    SearchConfig, SearchStrategy, DEFAULT_LOG_CONSTANT,
};
use derand_lab::hitting::{build_hitting_set, miss_measure, HittingError, HittingInstance};
use derand_lab::lll::{check_lll, default_max_resamples, resample_solve, LllError, Selection};
use derand_lab::problems::{
    balancing_failure_rate, component_count, cycles_constraint_system, encode_partition, gen_binary_matrix,
    gen_bounded_ksat, gen_regular_graph, ksat_constraint_system, ksat_random_satisfaction_rate, partition_pass_rate,
    BalanceVerifier, BinaryMatrix, BoundedKSatFormula, CyclesVerifier, KSatVerifier, Partition, RegularGraph,
};
use derand_lab::rng::StreamKey;

use crate::{
    ChannelArgs, ChannelCmd, CliError, CodeCmd, Command, ElCmd, ExperimentConfig, Family, HittingCmd, LllCmd,
    Outcome, ProblemCmd, ResultTable, SelectionArg, StrategyArg,
};

type Res<T> = Result<T, CliError>;

fn module<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Module(format!("{context}: {e}"))
}

fn config<E: std::fmt::Display>(context: &str) -> impl FnOnce(E) -> CliError + '_ {
    move |e| CliError::Config(format!("{context}: {e}"))
}

fn read(path: &Path) -> Res<String> {
    std::fs::read_to_string(path).map_err(config(&path.display().to_string()))
}

fn load_channel(spec: &str) -> Res<Channel> {
    if let Some(p) = spec.strip_prefix("bsc:") {
        let p: f64 = p.parse().map_err(config("bsc crossover"))?;
        return Channel::bsc(p).map_err(config("bsc channel"));
    }
    let text = read(Path::new(spec))?;
    let file: ChannelFile = serde_json::from_str(&text).map_err(config(spec))?;
    Channel::from_file(file).map_err(config(spec))
}

fn load_channel_args(a: &ChannelArgs) -> Res<(Channel, Distribution)> {
    let ch = load_channel(&a.channel)?;
    let q = Distribution::parse(&a.q, ch.inputs()).map_err(config("--q"))?;
    Ok((ch, q))
}

fn load_codebook(path: &Path) -> Res<Codebook> {
    let text = read(path)?;
    let file: CodebookFile = serde_json::from_str(&text).map_err(config(&path.display().to_string()))?;
    Codebook::from_file(file).map_err(config(&path.display().to_string()))
}

struct Instance {
    verifier: Box<dyn ProofVerifier>,
    /// Size parameter in the predicted seed budget.
    n: usize,
}

fn load_graph(path: &Path) -> Res<RegularGraph> {
    RegularGraph::from_text(&read(path)?).map_err(config(&path.display().to_string()))
}

fn load_matrix(path: &Path) -> Res<BinaryMatrix> {
    BinaryMatrix::from_text(&read(path)?).map_err(config(&path.display().to_string()))
}

fn load_formula(path: &Path) -> Res<BoundedKSatFormula> {
    BoundedKSatFormula::from_dimacs(&read(path)?).map_err(config(&path.display().to_string()))
}

fn load_instance(family: Family, path: &Path) -> Res<Instance> {
    Ok(match family {
        Family::Cycles => {
            let g = load_graph(path)?;
            let n = g.n();
            Instance {
                verifier: Box::new(CyclesVerifier::new(g).map_err(config("cycles instance"))?),
                n,
            }
        }
        Family::Balance => {
            let m = load_matrix(path)?;
            let n = m.n();
            Instance {
                verifier: Box::new(BalanceVerifier::new(m)),
                n,
            }
        }
        Family::Ksat => {
            let f = load_formula(path)?;
            let n = f.n();
            Instance {
                verifier: Box::new(KSatVerifier::new(f)),
                n,
            }
        }
    })
}

fn family_name(f: Family) -> &'static str {
    match f {
        Family::Cycles => "cycles",
        Family::Balance => "balance",
        Family::Ksat => "ksat",
    }
}

pub(crate) fn dispatch(cfg: &ExperimentConfig) -> Res<Outcome> {
    let root = cfg.root_key();
    match &cfg.command {
        Command::Channel(ChannelCmd::Info { channel, q }) => channel_info(channel, q).map(Outcome::Table),
        Command::Code(c) => code(c, cfg, &root),
        Command::Lll(LllCmd::Check { p, d, n }) => {
            let r = check_lll(*p, *d, *n).map_err(config("lll check"))?;
            let mut t = ResultTable::new("lll check", &["p", "d", "n_events", "product", "holds", "lower_bound"]);
            t.push(vec![(*p).into(), (*d).into(), (*n).into(), r.product.into(), r.holds.into(), r.lower_bound.into()]);
            Ok(Outcome::Table(t))
        }
        Command::Problem(p) => problem(p, &root),
        Command::El(ElCmd::Search {
            family,
            instance,
            max_seed_bits,
            strategy,
            budget,
            acceptance_trials,
        }) => {
            if *acceptance_trials == 0 {
                return Err(CliError::Config("--acceptance-trials must be at least 1".into()));
            }
            let inst = load_instance(*family, instance)?;
            let v = inst.verifier.as_ref();
            let delta_hat = estimate_acceptance(v, &IdentitySampler, *acceptance_trials, &root.derive("el/acceptance"));
            // One pseudo-success keeps the estimate finite when nothing was accepted.
            let delta_log = 0.0 - delta_hat.max(1.0 / *acceptance_trials as f64).log2();
            let predicted = predicted_seed_budget(delta_log, inst.n as u64, DEFAULT_LOG_CONSTANT);
            let search = SearchConfig {
                max_seed_len: *max_seed_bits,
                strategy: match strategy {
                    StrategyArg::Exhaustive => SearchStrategy::Exhaustive,
                    StrategyArg::Random => SearchStrategy::Random(root.derive("el/random")),
                },
                budget: budget.unwrap_or(match strategy {
                    StrategyArg::Exhaustive => u64::MAX,
                    StrategyArg::Random => 1 << 16,
                }),
            };
            let ex = ExpansionFunction::default();
            let cert = seed_search(&ex, v, &IdentitySampler, &search).map_err(|e| match e {
                derand_lab::elsearch::ElError::NotFound { .. } => CliError::NotFound(e.to_string()),
                e => CliError::Config(e.to_string()),
            })?;
            let verified = cert.reverify(&ex, v, &IdentitySampler);
            let mut t = ResultTable::new(
                "seed certificate",
                &[
                    "seed_hex",
                    "bits",
                    "verified",
                    "predicted_budget_bits",
                    "delta_log_bits",
                    "acceptance_estimate",
                    "output_len",
                    "tried",
                    "verifier_id",
                    "algorithm_id",
                ],
            );
            t.push(vec![
                cert.seed.to_hex().into(),
                cert.kp_proxy.into(),
                verified.into(),
                predicted.into(),
                delta_log.into(),
                delta_hat.into(),
                cert.output_len.into(),
                cert.tried.into(),
                cert.verifier_id.into(),
                cert.algorithm_id.into(),
            ]);
            Ok(Outcome::Table(t))
        }
        Command::Hitting(h) => hitting(h, cfg, &root),
    }
}

fn channel_info(channel: &str, q: &str) -> Res<ResultTable> {
    let ch = load_channel(channel)?;
    let q = Distribution::parse(q, ch.inputs()).map_err(config("--q"))?;
    let joint = ch.joint(&q).map_err(module("channel"))?;
    let mut t = ResultTable::new(
        "channel info",
        &["inputs", "outputs", "h_x", "h_y", "h_y_given_x", "capacity"],
    );
    t.push(vec![
        ch.inputs().into(),
        ch.outputs().into(),
        entropy(&q).into(),
        joint.entropy_y().into(),
        ch.conditional_entropy(&q).map_err(module("channel"))?.into(),
        capacity_for_input(&ch, &q).map_err(module("channel"))?.into(),
    ]);
    Ok(t)
}

fn parse_symbols(s: &str) -> Res<Vec<usize>> {
    s.split(',')
        .map(|t| t.trim().parse::<usize>().map_err(config("--y")))
        .collect()
}

fn code(c: &CodeCmd, cfg: &ExperimentConfig, root: &StreamKey) -> Res<Outcome> {
    match c {
        CodeCmd::Gen { chan, rate, n } => {
            let (_, q) = load_channel_args(chan)?;
            let cb = generate_codebook(&q, *n, *rate, &cfg.seed()).map_err(config("code gen"))?;
            let text = serde_json::to_string(&cb.to_file()).expect("codebook serializes");
            Ok(Outcome::Artifact(text + "\n"))
        }
        CodeCmd::Decode { chan, codebook, epsilon, y } => {
            let (ch, q) = load_channel_args(chan)?;
            let cb = load_codebook(codebook)?;
            let params = TypicalityParams::for_channel(&ch, &q, cb.n(), *epsilon).map_err(config("typicality"))?;
            let message = decode(&cb, &parse_symbols(y)?, &params).map_err(config("code decode"))?;
            let mut t = ResultTable::new("decode", &["n", "num_words", "epsilon", "message"]);
            t.push(vec![cb.n().into(), cb.num_words().into(), (*epsilon).into(), message.into()]);
            Ok(Outcome::Table(t))
        }
        CodeCmd::Error {
            chan,
            rate,
            n,
            codebook,
            epsilon,
            trials,
        } => {
            let (ch, q) = load_channel_args(chan)?;
            let cb = match (codebook, rate, n) {
                (Some(path), None, None) => load_codebook(path)?,
                (None, Some(rate), Some(n)) => generate_codebook(&q, *n, *rate, &cfg.seed()).map_err(config("code error"))?,
                _ => return Err(CliError::Config("give either --codebook or both --rate and --n".into())),
            };
            let params = TypicalityParams::for_channel(&ch, &q, cb.n(), *epsilon).map_err(config("typicality"))?;
            let r = estimate_error(&cb, &ch, &params, *trials, &root.derive("code/error")).map_err(config("code error"))?;
            let mut t = ResultTable::new(
                "block error",
                &["n", "rate", "num_words", "epsilon", "trials_per_word", "error", "halfwidth", "capacity"],
            );
            t.push(vec![
                cb.n().into(),
                cb.rate().into(),
                cb.num_words().into(),
                (*epsilon).into(),
                (*trials).into(),
                r.average_error.into(),
                r.confidence_halfwidth.into(),
                capacity_for_input(&ch, &q).map_err(module("channel"))?.into(),
            ]);
            Ok(Outcome::Table(t))
        }
        CodeCmd::Aep { chan, n, epsilon, trials } => {
            let (ch, q) = load_channel_args(chan)?;
            let params = TypicalityParams::for_channel(&ch, &q, *n, *epsilon).map_err(config("typicality"))?;
            let r = empirical_joint_aep(&params, &ch, &q, *trials, &root.derive("code/aep")).map_err(config("code aep"))?;
            let info = params.joint().mutual_information();
            let bound = 2.0 * (-(*n as f64) * (info - 3.0 * epsilon)).exp2();
            let mut t = ResultTable::new(
                "joint aep",
                &["n", "epsilon", "trials", "frac_typical", "frac_independent_typical", "independent_bound"],
            );
            t.push(vec![
                (*n).into(),
                (*epsilon).into(),
                (*trials).into(),
                r.frac_typical.into(),
                r.frac_independent_typical.into(),
                bound.into(),
            ]);
            Ok(Outcome::Table(t))
        }
        CodeCmd::Tradeoff {
            chan,
            rates,
            ns,
            seed_lengths,
            trials,
            epsilon,
        } => {
            let (ch, q) = load_channel_args(chan)?;
            let rows = tradeoff_experiment(&ch, &q, rates, ns, seed_lengths, *trials, *epsilon, &root.derive("code/tradeoff"))
                .map_err(config("code tradeoff"))?;
            let mut t = ResultTable::new(
                "tradeoff",
                &["rate", "n", "seed_length", "num_words", "error", "halfwidth", "achievable"],
            );
            for r in rows {
                t.push(vec![
                    r.rate.into(),
                    r.n.into(),
                    r.seed_length.into(),
                    r.num_words.into(),
                    r.error.into(),
                    r.halfwidth.into(),
                    r.achievable.into(),
                ]);
            }
            Ok(Outcome::Table(t))
        }
    }
}

fn problem(p: &ProblemCmd, root: &StreamKey) -> Res<Outcome> {
    match p {
        ProblemCmd::Gen { family, n, k, m } => {
            let mut rng = root.derive("problem/gen").rng();
            let need = |v: &Option<usize>, flag: &str| v.ok_or_else(|| CliError::Config(format!("{flag} is required")));
            let text = match family {
                Family::Cycles => gen_regular_graph(*n, need(k, "--k")?, &mut rng)
                    .map_err(config("problem gen"))?
                    .to_text(),
                Family::Balance => gen_binary_matrix(*n, &mut rng).to_text(),
                Family::Ksat => gen_bounded_ksat(*n, need(k, "--k")?, need(m, "--m")?, &mut rng)
                    .map_err(config("problem gen"))?
                    .to_dimacs(),
            };
            Ok(Outcome::Artifact(text))
        }
        ProblemCmd::Verify { family, instance, proof } => {
            let inst = load_instance(*family, instance)?;
            let len = inst.verifier.proof_len();
            let bits = crate::parse_seed(proof)
                .and_then(|b| {
                    if b.len() < len {
                        return Err(CliError::Config(format!("proof has {} bits, need {len}", b.len())));
                    }
                    Ok(b.slice(0, len))
                })
                .map_err(|e| CliError::Config(format!("--proof: {e}")))?;
            let mut t = ResultTable::new("verify", &["family", "verifier_id", "proof_bits", "verified"]);
            t.push(vec![
                family_name(*family).into(),
                inst.verifier.verifier_id().into(),
                len.into(),
                inst.verifier.verify(&bits).into(),
            ]);
            Ok(Outcome::Table(t))
        }
        ProblemCmd::Solve {
            family,
            instance,
            max_resamples,
            selection,
        } => {
            let selection = match selection {
                SelectionArg::Lowest => Selection::LowestIndex,
                SelectionArg::Random => Selection::Random,
            };
            let mut rng = root.derive("problem/solve").rng();
            let timeout = |e: LllError| match e {
                LllError::Timeout { .. } => CliError::Timeout(e.to_string()),
                e => CliError::Module(e.to_string()),
            };
            let (proof, resamples, verifier): (BitString, u64, Box<dyn ProofVerifier>) = match family {
                Family::Cycles => {
                    let g = load_graph(instance)?;
                    let c = component_count(g.k()).map_err(config("cycles instance"))?;
                    let sys = cycles_constraint_system(&g, c).map_err(config("cycles instance"))?;
                    let budget = max_resamples.unwrap_or_else(|| default_max_resamples(&sys));
                    let sol = resample_solve(&sys, &mut rng, budget, selection).map_err(timeout)?;
                    let part = Partition::new(sol.assignment, c).expect("solver values are components");
                    let bits = encode_partition(&part, g.k());
                    (bits, sol.resamples, Box::new(CyclesVerifier::new(g).expect("degree checked")))
                }
                Family::Ksat => {
                    let f = load_formula(instance)?;
                    let sys = ksat_constraint_system(&f);
                    let budget = max_resamples.unwrap_or_else(|| default_max_resamples(&sys));
                    let sol = resample_solve(&sys, &mut rng, budget, selection).map_err(timeout)?;
                    let bools: Vec<bool> = sol.assignment.iter().map(|&v| v == 1).collect();
                    (BitString::from_bools(&bools), sol.resamples, Box::new(KSatVerifier::new(f)))
                }
                Family::Balance => {
                    return Err(CliError::Config(
                        "balance has no local-lemma system; use `el search` or `problem rate`".into(),
                    ))
                }
            };
            let mut t = ResultTable::new("solve", &["family", "resamples", "proof_bits", "proof_hex", "verified"]);
            t.push(vec![
                family_name(*family).into(),
                resamples.into(),
                proof.len().into(),
                proof.to_hex().into(),
                verifier.verify(&proof).into(),
            ]);
            Ok(Outcome::Table(t))
        }
        ProblemCmd::Rate { family, instance, trials } => {
            if *trials == 0 {
                return Err(CliError::Config("--trials must be at least 1".into()));
            }
            let key = root.derive("problem/rate");
            let (est, reference, successes) = match family {
                Family::Cycles => {
                    let g = load_graph(instance)?;
                    let e = partition_pass_rate(&g, *trials, &key).map_err(config("cycles instance"))?;
                    let k = g.k() as f64;
                    (e, (1.0 - 1.0 / (k * k)).powi(g.n() as i32), e.successes)
                }
                Family::Ksat => {
                    let f = load_formula(instance)?;
                    let e = ksat_random_satisfaction_rate(&f, *trials, &key);
                    let p = std::f64::consts::E * 2f64.powi(-(f.k() as i32));
                    (e, (1.0 - p).powi(f.m() as i32), e.successes)
                }
                Family::Balance => {
                    let m = load_matrix(instance)?;
                    let e = balancing_failure_rate(&m, *trials, &key);
                    (e, 1.0 - 2.0 * (m.n() as f64).powi(-7), e.trials - e.successes)
                }
            };
            let rate = successes as f64 / est.trials as f64;
            let mut t = ResultTable::new(
                "success rate",
                &["family", "trials", "successes", "rate", "std_error", "reference"],
            );
            t.push(vec![
                family_name(*family).into(),
                est.trials.into(),
                successes.into(),
                rate.into(),
                est.std_error.into(),
                reference.into(),
            ]);
            Ok(Outcome::Table(t))
        }
    }
}

fn load_hitting(path: &Path) -> Res<HittingInstance> {
    let text = read(path)?;
    let file = serde_json::from_str(&text).map_err(config(&path.display().to_string()))?;
    HittingInstance::from_file(file).map_err(config(&path.display().to_string()))
}

fn hitting(h: &HittingCmd, cfg: &ExperimentConfig, root: &StreamKey) -> Res<Outcome> {
    let names = |inst: &HittingInstance, members: &[usize]| {
        members
            .iter()
            .map(|&i| inst.universe()[i].as_str())
            .collect::<Vec<_>>()
            .join(" ")
    };
    match h {
        HittingCmd::Build { instance, max_retries } => {
            let inst = load_hitting(instance)?;
            let hs = build_hitting_set(&inst, &cfg.seed(), *max_retries).map_err(|e| match e {
                HittingError::RetriesExhausted { .. } => CliError::NotFound(e.to_string()),
                e => CliError::Config(e.to_string()),
            })?;
            let mut t = ResultTable::new(
                "hitting set",
                &["attempt", "set_size", "miss_measure", "bound", "members", "seed_hex"],
            );
            t.push(vec![
                hs.attempt.into(),
                hs.members.len().into(),
                hs.miss_measure.into(),
                inst.bound().into(),
                names(&inst, &hs.members).into(),
                hs.draw_seed.to_hex().into(),
            ]);
            Ok(Outcome::Table(t))
        }
        HittingCmd::Measure {
            instance,
            members,
            draws,
        } => {
            let inst = load_hitting(instance)?;
            let sets: Vec<(String, Vec<usize>)> = match members {
                Some(list) => {
                    let set = list
                        .split(',')
                        .map(|m| {
                            let m = m.trim();
                            inst.universe()
                                .iter()
                                .position(|u| u == m)
                                .ok_or_else(|| CliError::Config(format!("`{m}` is not in the universe")))
                        })
                        .collect::<Res<Vec<_>>>()?;
                    vec![("given".to_string(), set)]
                }
                None => {
                    let key = root.derive("hitting/measure");
                    (0..*draws)
                        .map(|d| (d.to_string(), inst.draw(&mut key.stream(0, d))))
                        .collect()
                }
            };
            let mut t = ResultTable::new(
                "miss measure",
                &["draw", "set_size", "miss_measure", "bound", "within_bound", "members"],
            );
            for (label, set) in sets {
                let miss = miss_measure(&set, &inst).map_err(config("hitting measure"))?;
                t.push(vec![
                    label.into(),
                    set.len().into(),
                    miss.into(),
                    inst.bound().into(),
                    (miss <= inst.bound()).into(),
                    names(&inst, &set).into(),
                ]);
            }
            Ok(Outcome::Table(t))
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bsc_spec_parses() {
        let ch = load_channel("bsc:0.25").unwrap();
        assert_eq!(ch.prob(0, 1), 0.25);
        assert!(matches!(load_channel("bsc:x"), Err(CliError::Config(_))));
        assert!(matches!(load_channel("/nonexistent.json"), Err(CliError::Config(_))));
    }

    #[test]
    fn symbols_parse() {
        assert_eq!(parse_symbols("0, 1,2").unwrap(), vec![0, 1, 2]);
        assert!(parse_symbols("0,a").is_err());
    }
}
