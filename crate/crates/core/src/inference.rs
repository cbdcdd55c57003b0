//! Evaluation backends behind a single query type: exact enumeration and
//! seeded likelihood-weighted sampling.
//!
//! Sampling uses ChaCha20 (`rand_chacha`). A run of `n` samples is split
//! into at most ten batches; batch `b` draws from stream `b` of the
//! generator seeded with `seed`, so the estimate depends only on
//! `(n, seed)` and not on how many threads run the batches.

use rand::distributions::{Distribution, WeightedIndex};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;

use crate::agents::{AgentChain, JointPosterior};
use crate::dist::Categorical;
use crate::error::{Result, RsaError};
use crate::par;
use crate::scenario::{Assignment, LatentKind, Scenario, SpeakerKind};

/// Default bound on `|S| · |latent assignments| · |U|`.
pub const DEFAULT_BUDGET: u128 = 10_000_000;

/// Number of batches used for batch-means standard errors.
pub const BATCHES: usize = 10;

#[derive(Debug, Clone, PartialEq)]
pub enum Query {
    /// `L0(· | utterance)` under a latent assignment.
    Literal {
        utterance: String,
        assignment: Assignment,
    },
    /// `S_level(· | input)`; `input` is a state, or an observation value for
    /// epistemic speakers.
    Speaker {
        input: String,
        assignment: Assignment,
        level: usize,
    },
    /// `L_depth(·, latents | utterance)`, restricted to `condition`.
    Listener {
        utterance: String,
        depth: usize,
        condition: Assignment,
    },
}

impl Query {
    fn levels(&self) -> usize {
        match self {
            Query::Literal { .. } => 0,
            Query::Speaker { level, .. } => *level,
            Query::Listener { depth, .. } => *depth,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum QueryResult {
    Distribution(Categorical),
    Joint(JointPosterior),
}

impl QueryResult {
    /// The state marginal for joint results, the distribution otherwise.
    pub fn distribution(&self) -> Categorical {
        match self {
            QueryResult::Distribution(c) => c.clone(),
            QueryResult::Joint(j) => j.state_marginal(),
        }
    }
}

/// `|S| · |latent assignments| · |U|`.
pub fn product_space(scn: &Scenario) -> u128 {
    scn.states().len() as u128 * scn.latent_space_size() * scn.utterances().len() as u128
}

pub fn check_budget(scn: &Scenario, budget: u128) -> Result<()> {
    let size = product_space(scn);
    if size > budget {
        return Err(RsaError::BudgetExceeded { size, budget });
    }
    Ok(())
}

/// Exact answer to `query`.
pub fn enumerate(scn: &Scenario, query: &Query, budget: u128) -> Result<QueryResult> {
    check_budget(scn, budget)?;
    let chain = AgentChain::new(scn, query.levels())?;
    match query {
        Query::Literal {
            utterance,
            assignment,
        } => chain
            .literal_listener(utterance, assignment)
            .map(QueryResult::Distribution),
        Query::Speaker {
            input,
            assignment,
            level,
        } => chain
            .speaker(input, assignment, *level)
            .map(QueryResult::Distribution),
        Query::Listener {
            utterance,
            depth,
            condition,
        } => chain
            .listener(utterance, *depth, condition)
            .map(QueryResult::Joint),
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SampleEstimate {
    pub estimate: Categorical,
    pub n: usize,
    /// Seed actually used (never 0).
    pub seed: u64,
    /// Batch-means standard error per label.
    pub stderr: Vec<f64>,
}

/// Seed 0 asks for a fresh seed from the operating system.
pub fn resolve_seed(seed: u64) -> u64 {
    if seed != 0 {
        return seed;
    }
    loop {
        let s: u64 = rand::random();
        if s != 0 {
            return s;
        }
    }
}

fn stream(seed: u64, index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}

fn batch_sizes(n: usize) -> Vec<usize> {
    let b = BATCHES.min(n);
    (0..b).map(|i| n / b + usize::from(i < n % b)).collect()
}

fn weighted_index(weights: &[f64]) -> Result<WeightedIndex<f64>> {
    WeightedIndex::new(weights).map_err(|_| RsaError::DegenerateSampler)
}

/// Draws one scored sample: `(label index, weight)`.
type Scorer<'a> = Box<dyn Fn(&mut ChaCha20Rng) -> Result<(usize, f64)> + Sync + 'a>;

/// Sample-then-score estimate of `query`'s distribution (state marginal for
/// listener queries).
pub fn sample(scn: &Scenario, query: &Query, n: usize, seed: u64) -> Result<SampleEstimate> {
    if n == 0 {
        return Err(RsaError::InvalidArgument("sample count must be >= 1".into()));
    }
    let seed = resolve_seed(seed);
    let chain = AgentChain::new(scn, query.levels())?;
    let (labels, scorer) = scorer(&chain, query)?;
    let k = labels.len();

    let sizes = batch_sizes(n);
    let jobs: Vec<(usize, usize)> = sizes.into_iter().enumerate().collect();
    let batches = par::map(&jobs, |&(b, size)| -> Result<(Vec<f64>, f64)> {
        let mut rng = stream(seed, b as u64);
        let mut sums = vec![0.0; k];
        let mut total = 0.0;
        for _ in 0..size {
            let (i, w) = scorer(&mut rng)?;
            sums[i] += w;
            total += w;
        }
        Ok((sums, total))
    });
    let batches: Vec<(Vec<f64>, f64)> = batches.into_iter().collect::<Result<_>>()?;

    let mut sums = vec![0.0; k];
    let mut total = 0.0;
    for (s, t) in &batches {
        for (a, b) in sums.iter_mut().zip(s) {
            *a += b;
        }
        total += t;
    }
    if total.is_nan() || total <= 0.0 {
        return Err(RsaError::DegenerateSampler);
    }
    let probs: Vec<f64> = sums.iter().map(|s| s / total).collect();

    let usable: Vec<&(Vec<f64>, f64)> = batches.iter().filter(|(_, t)| *t > 0.0).collect();
    let stderr = (0..k)
        .map(|i| {
            let m = usable.len();
            if m < 2 {
                return 0.0;
            }
            let ratios: Vec<f64> = usable.iter().map(|(s, t)| s[i] / t).collect();
            let mean = ratios.iter().sum::<f64>() / m as f64;
            let var = ratios.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / (m - 1) as f64;
            (var / m as f64).sqrt()
        })
        .collect();

    Ok(SampleEstimate {
        estimate: Categorical::from_parts_unchecked(labels, probs),
        n,
        seed,
        stderr,
    })
}

/// Draws a value of latent `li`, respecting a binding in `a`.
fn draw_latent(scn: &Scenario, li: usize, a: &mut Assignment, rng: &mut ChaCha20Rng) -> Result<()> {
    if a.is_bound(li) {
        return Ok(());
    }
    let v = weighted_index(&scn.latents()[li].prior)?.sample(rng);
    a.set(li, Some(v));
    Ok(())
}

fn draw_state(scn: &Scenario, a: &Assignment, rng: &mut ChaCha20Rng) -> Result<usize> {
    let obs = scn.latent_of_kind(LatentKind::Observation);
    let prior = match obs.and_then(|li| a.get(li).map(|v| (li, v))) {
        Some((li, v)) => {
            let label = scn.latents()[li].values[v].label();
            scn.belief(&label)
                .ok_or_else(|| RsaError::Schema(format!("no belief for `{label}`")))?
                .to_vec()
        }
        None => scn.state_prior(a)?,
    };
    Ok(weighted_index(&prior)?.sample(rng))
}

fn scorer<'a>(chain: &'a AgentChain<'a>, query: &'a Query) -> Result<(Vec<String>, Scorer<'a>)> {
    let scn = chain.scenario();
    match query {
        Query::Literal {
            utterance,
            assignment,
        } => {
            let u = scn.require_utterance(utterance)?;
            let literal: Vec<usize> = scn
                .latents()
                .iter()
                .enumerate()
                .filter(|(_, l)| {
                    l.kind == LatentKind::LexiconParameter && l.scope == crate::scenario::Scope::Literal
                })
                .map(|(i, _)| i)
                .collect();
            let context = scn.latent_of_kind(LatentKind::Context);
            let f = move |rng: &mut ChaCha20Rng| -> Result<(usize, f64)> {
                let mut a = assignment.clone();
                for &li in &literal {
                    draw_latent(scn, li, &mut a, rng)?;
                }
                if let Some(ci) = context {
                    draw_latent(scn, ci, &mut a, rng)?;
                }
                let s = weighted_index(&scn.literal_state_prior(&a)?)?.sample(rng);
                Ok((s, scn.meaning(u, s, &a)?))
            };
            Ok((scn.state_ids(), Box::new(f)))
        }
        Query::Speaker {
            input,
            assignment,
            level,
        } => {
            let proposal: Vec<f64> = if scn.speaker().uses_salience() {
                scn.utterances().iter().map(|u| u.salience).collect()
            } else {
                vec![1.0; scn.utterances().len()]
            };
            let q_total: f64 = proposal.iter().sum();
            let q: Vec<f64> = proposal.iter().map(|w| w / q_total).collect();
            let pick = weighted_index(&q)?;

            if scn.speaker() == SpeakerKind::EpistemicSampling && *level == 1 {
                // Sample a world from the belief, an utterance from the
                // proposal, and score by truth, informativity and salience.
                let li = scn.latent_of_kind(LatentKind::Observation).ok_or_else(|| {
                    RsaError::Schema("epistemic speaker without an observation latent".into())
                })?;
                let belief = scn.belief(input).ok_or_else(|| RsaError::UnknownLabel {
                    kind: "observation",
                    name: input.clone(),
                })?;
                let states = weighted_index(belief)?;
                let mut base = assignment.clone();
                base.set(li, scn.latents()[li].value_index(input));
                let semantic: Vec<usize> = scn
                    .latents()
                    .iter()
                    .enumerate()
                    .filter(|(_, l)| l.kind != LatentKind::Observation)
                    .map(|(i, _)| i)
                    .collect();
                let alpha = scn.alpha();
                let f = move |rng: &mut ChaCha20Rng| -> Result<(usize, f64)> {
                    let mut a = base.clone();
                    for &li in &semantic {
                        draw_latent(scn, li, &mut a, rng)?;
                    }
                    let s = states.sample(rng);
                    let u = pick.sample(rng);
                    let utt = &scn.utterances()[u];
                    let informativity = match chain.l0_cached(u, &a) {
                        Ok(l0) => l0[s],
                        Err(RsaError::ZeroSemanticSupport { .. }) => 0.0,
                        Err(e) => return Err(e),
                    };
                    let mut score = if informativity > 0.0 {
                        informativity.powf(alpha) * utt.salience
                    } else {
                        0.0
                    };
                    if scn.include_cost() {
                        score *= (-alpha * utt.cost).exp();
                    }
                    Ok((u, score / q[u]))
                };
                return Ok((scn.utterance_ids(), Box::new(f)));
            }

            // Other speakers: sample latents the query leaves open from
            // their prior and an utterance from the proposal, then score by
            // the exact speaker row.
            let mut base = assignment.clone();
            let s = if scn.speaker().is_epistemic() {
                let li = scn.latent_of_kind(LatentKind::Observation).ok_or_else(|| {
                    RsaError::Schema("epistemic speaker without an observation latent".into())
                })?;
                let vi = scn.latents()[li]
                    .value_index(input)
                    .ok_or_else(|| RsaError::UnknownLabel {
                        kind: "observation",
                        name: input.clone(),
                    })?;
                base.set(li, Some(vi));
                0
            } else {
                scn.require_state(input)?
            };
            let open: Vec<usize> = scn
                .latents()
                .iter()
                .enumerate()
                .filter(|(i, l)| {
                    !base.is_bound(*i)
                        && l.kind != LatentKind::Observation
                        && (*level == 1 || l.kind.is_speaker_side())
                        && !(l.kind == LatentKind::LexiconParameter
                            && l.scope == crate::scenario::Scope::Literal)
                })
                .map(|(i, _)| i)
                .collect();
            let level = *level;
            let f = move |rng: &mut ChaCha20Rng| -> Result<(usize, f64)> {
                let mut a = base.clone();
                for &li in &open {
                    draw_latent(scn, li, &mut a, rng)?;
                }
                let u = pick.sample(rng);
                let row = match chain.speaker_probs(s, &a, level) {
                    Ok(r) => r[u],
                    Err(RsaError::NoUsableUtterance { .. }) => 0.0,
                    Err(e) => return Err(e),
                };
                Ok((u, row / q[u]))
            };
            Ok((scn.utterance_ids(), Box::new(f)))
        }
        Query::Listener {
            utterance,
            depth,
            condition,
        } => {
            let u = scn.require_utterance(utterance)?;
            let depth = *depth;
            let inferred: Vec<usize> = chain
                .inferred_latents(depth)
                .iter()
                .map(|n| scn.latent_index(n).expect("inferred latents are declared"))
                .collect();
            for (li, v) in condition.indices().iter().enumerate() {
                if v.is_some() && !inferred.contains(&li) {
                    return Err(RsaError::InvalidArgument(format!(
                        "latent `{}` is not inferred by this listener",
                        scn.latents()[li].name
                    )));
                }
            }
            let f = move |rng: &mut ChaCha20Rng| -> Result<(usize, f64)> {
                let mut a = condition.clone();
                for &li in &inferred {
                    draw_latent(scn, li, &mut a, rng)?;
                }
                let s = draw_state(scn, &a, rng)?;
                let input = if scn.speaker().is_epistemic() { 0 } else { s };
                let w = match chain.speaker_probs(input, &a, depth) {
                    Ok(r) => r[u],
                    Err(RsaError::NoUsableUtterance { .. }) => 0.0,
                    Err(e) => return Err(e),
                };
                Ok((s, w))
            };
            Ok((scn.state_ids(), Box::new(f)))
        }
    }
}

/// One draw of the Bates sampler: the mean of `n` uniforms on `[a, b]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatesSample {
    pub n: usize,
    pub a: f64,
    pub b: f64,
    pub value: f64,
}

fn check_bates(n: usize, a: f64, b: f64) -> Result<()> {
    if n == 0 || !a.is_finite() || !b.is_finite() || a >= b {
        return Err(RsaError::InvalidArgument(format!(
            "Bates sampler needs n >= 1 and a < b, got n = {n}, [{a}, {b}]"
        )));
    }
    Ok(())
}

fn bates_draw(n: usize, a: f64, b: f64, rng: &mut ChaCha20Rng) -> f64 {
    let mut sum = 0.0;
    for _ in 0..n {
        sum += rng.gen_range(a..b);
    }
    sum / n as f64
}

pub fn bates_sample(n: usize, a: f64, b: f64, seed: u64) -> Result<BatesSample> {
    check_bates(n, a, b)?;
    let mut rng = stream(resolve_seed(seed), 0);
    Ok(BatesSample {
        n,
        a,
        b,
        value: bates_draw(n, a, b, &mut rng),
    })
}

/// Empirical moments of `m` Bates draws, with standard errors.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BatesSummary {
    pub draws: usize,
    pub mean: f64,
    pub variance: f64,
    pub mean_stderr: f64,
    pub variance_stderr: f64,
}

/// Draws are split across fixed chunks on separate streams.
const BATES_CHUNKS: usize = 16;

pub fn bates_mean_test(n: usize, a: f64, b: f64, draws: usize, seed: u64) -> Result<BatesSummary> {
    check_bates(n, a, b)?;
    if draws < 2 {
        return Err(RsaError::InvalidArgument("need at least 2 draws".into()));
    }
    let seed = resolve_seed(seed);
    let chunks: Vec<(usize, usize)> = (0..BATES_CHUNKS)
        .map(|i| (i, draws / BATES_CHUNKS + usize::from(i < draws % BATES_CHUNKS)))
        .collect();
    let values: Vec<Vec<f64>> = par::map(&chunks, |&(i, size)| {
        let mut rng = stream(seed, i as u64);
        (0..size).map(|_| bates_draw(n, a, b, &mut rng)).collect()
    });
    let xs: Vec<f64> = values.into_iter().flatten().collect();
    let m = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / m;
    let m2 = xs.iter().map(|x| (x - mean).powi(2)).sum::<f64>() / m;
    let m4 = xs.iter().map(|x| (x - mean).powi(4)).sum::<f64>() / m;
    let variance = m2 * m / (m - 1.0);
    Ok(BatesSummary {
        draws,
        mean,
        variance,
        mean_stderr: (variance / m).sqrt(),
        variance_stderr: ((m4 - m2 * m2) / m).sqrt(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::builtin;
    use approx::assert_abs_diff_eq;

    fn refgame() -> Scenario {
        builtin::scenario("refgame").unwrap()
    }

    #[test]
    fn enumerate_refgame_listener() {
        let scn = refgame();
        let q = Query::Listener {
            utterance: "blue".into(),
            depth: 1,
            condition: Assignment::empty(&scn),
        };
        let m = enumerate(&scn, &q, DEFAULT_BUDGET).unwrap().distribution();
        assert_abs_diff_eq!(m.prob("blue-square"), 0.6, epsilon = 1e-12);
        assert_abs_diff_eq!(m.prob("blue-circle"), 0.4, epsilon = 1e-12);
    }

    #[test]
    fn single_state_listener_is_point_mass() {
        let doc = r#"{"states": [{"id": "only"}], "utterances": [{"id": "u"}, {"id": "v"}],
                      "lexicon": {"kind": "explicit", "matrix": {"u": {"only": 1}, "v": {"only": 1}}}}"#;
        let scn = crate::scenario::load_scenario(doc).unwrap();
        let q = Query::Listener {
            utterance: "v".into(),
            depth: 1,
            condition: Assignment::empty(&scn),
        };
        assert_eq!(
            enumerate(&scn, &q, DEFAULT_BUDGET)
                .unwrap()
                .distribution()
                .probs(),
            &[1.0]
        );
    }

    #[test]
    fn budget_exceeded_reports_size() {
        let states: Vec<String> = (0..500).map(|i| format!(r#"{{"id": "s{i}"}}"#)).collect();
        let utts: Vec<String> = (0..300).map(|i| format!(r#"{{"id": "u{i}"}}"#)).collect();
        let values: Vec<String> = (0..100).map(|i| i.to_string()).collect();
        let doc = format!(
            r#"{{"states": [{}], "utterances": [{}],
                "latents": [{{"name": "q", "kind": "context", "values": [{}]}}],
                "lexicon": {{"kind": "explicit", "matrix": {{}}}}}}"#,
            states.join(","),
            utts.join(","),
            values.join(",")
        );
        let scn = crate::scenario::parse_scenario(&doc).unwrap();
        let q = Query::Literal {
            utterance: "u0".into(),
            assignment: Assignment::empty(&scn),
        };
        assert_eq!(
            enumerate(&scn, &q, DEFAULT_BUDGET),
            Err(RsaError::BudgetExceeded {
                size: 15_000_000,
                budget: DEFAULT_BUDGET
            })
        );
    }

    #[test]
    fn sampled_speaker_converges() {
        let scn = refgame();
        let q = Query::Speaker {
            input: "blue-circle".into(),
            assignment: Assignment::empty(&scn),
            level: 1,
        };
        let est = sample(&scn, &q, 100_000, 7).unwrap();
        for (i, (label, exact)) in [("circle", 2.0 / 3.0), ("blue", 1.0 / 3.0)].iter().enumerate() {
            let _ = i;
            let j = est.estimate.index_of(label).unwrap();
            assert!((est.estimate.probs()[j] - exact).abs() <= 3.0 * est.stderr[j]);
        }
    }

    #[test]
    fn one_sample_is_point_mass() {
        let scn = refgame();
        let q = Query::Listener {
            utterance: "blue".into(),
            depth: 1,
            condition: Assignment::empty(&scn),
        };
        let est = sample(&scn, &q, 1, 3).unwrap();
        assert_eq!(est.estimate.mode().1, 1.0);
        assert_eq!(est.stderr, vec![0.0; 3]);
    }

    #[test]
    fn sampling_is_reproducible() {
        let scn = builtin::scenario("hyperbole").unwrap();
        let q = Query::Listener {
            utterance: "$1,000,000".into(),
            depth: 1,
            condition: Assignment::empty(&scn),
        };
        assert_eq!(
            sample(&scn, &q, 5_000, 99).unwrap(),
            sample(&scn, &q, 5_000, 99).unwrap()
        );
    }

    #[test]
    fn all_zero_samples_are_degenerate() {
        let scn = refgame().with_state_prior(&[("green-square", 1.0)]).unwrap();
        let q = Query::Literal {
            utterance: "circle".into(),
            assignment: Assignment::empty(&scn),
        };
        assert_eq!(sample(&scn, &q, 50, 1), Err(RsaError::DegenerateSampler));
    }

    #[test]
    fn bates_fixed_seed_repeats() {
        assert_eq!(
            bates_sample(12, 0.0, 1.0, 5).unwrap(),
            bates_sample(12, 0.0, 1.0, 5).unwrap()
        );
        let v = bates_sample(1, 2.0, 3.0, 9).unwrap().value;
        assert!((2.0..=3.0).contains(&v));
        assert!(bates_sample(1, 1.0, 1.0, 1).is_err());
    }
}
