//! Random scenario generators shared by the integration tests.

#![allow(dead_code)]

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rsa_core::{load_scenario, Scenario};
use serde_json::{json, Map, Value};

pub fn rng(seed: u64) -> ChaCha20Rng {
    ChaCha20Rng::seed_from_u64(seed)
}

pub fn state_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("s{i}")).collect()
}

pub fn utterance_ids(n: usize) -> Vec<String> {
    (0..n).map(|i| format!("u{i}")).collect()
}

/// A random non-empty subset of `0..n`.
fn true_set(rng: &mut impl Rng, n: usize) -> Vec<bool> {
    loop {
        let set: Vec<bool> = (0..n).map(|_| rng.gen_bool(0.5)).collect();
        if set.iter().any(|b| *b) {
            return set;
        }
    }
}

fn row(states: &[String], values: &[f64]) -> Value {
    let mut m = Map::new();
    for (s, v) in states.iter().zip(values) {
        m.insert(s.clone(), json!(v));
    }
    Value::Object(m)
}

/// Random positive weights with a few zeros, normalized.
fn random_prior(rng: &mut impl Rng, n: usize, allow_zero: bool) -> Vec<f64> {
    loop {
        let w: Vec<f64> = (0..n)
            .map(|_| {
                if allow_zero && rng.gen_bool(0.2) {
                    0.0
                } else {
                    rng.gen_range(0.05..1.0)
                }
            })
            .collect();
        let z: f64 = w.iter().sum();
        if z > 0.0 {
            return w.iter().map(|x| x / z).collect();
        }
    }
}

pub struct Shape {
    pub states: usize,
    pub utterances: usize,
}

pub fn random_shape(rng: &mut impl Rng, max_states: usize, max_utterances: usize) -> Shape {
    Shape {
        states: rng.gen_range(1..=max_states),
        utterances: rng.gen_range(1..=max_utterances),
    }
}

/// Truth sets with every utterance true somewhere and every state
/// described by some utterance.
fn covering_sets(rng: &mut impl Rng, shape: &Shape) -> Vec<Vec<bool>> {
    let mut sets: Vec<Vec<bool>> = (0..shape.utterances)
        .map(|_| true_set(rng, shape.states))
        .collect();
    for s in 0..shape.states {
        if !sets.iter().any(|row| row[s]) {
            let u = rng.gen_range(0..shape.utterances);
            sets[u][s] = true;
        }
    }
    sets
}

/// Boolean lexicon matrix.
pub fn boolean_matrix(rng: &mut impl Rng, shape: &Shape) -> Vec<Vec<f64>> {
    covering_sets(rng, shape)
        .into_iter()
        .map(|row| row.into_iter().map(|b| if b { 1.0 } else { 0.0 }).collect())
        .collect()
}

/// Graded lexicon matrix with the same support guarantees.
pub fn graded_matrix(rng: &mut impl Rng, shape: &Shape) -> Vec<Vec<f64>> {
    covering_sets(rng, shape)
        .into_iter()
        .map(|row| {
            row.into_iter()
                .map(|b| if b { rng.gen_range(0.05..=1.0) } else { 0.0 })
                .collect()
        })
        .collect()
}

fn base_document(matrix: &[Vec<f64>], alpha: f64) -> Map<String, Value> {
    let states = state_ids(matrix[0].len());
    let utts = utterance_ids(matrix.len());
    let mut lex = Map::new();
    for (u, r) in utts.iter().zip(matrix) {
        lex.insert(u.clone(), row(&states, r));
    }
    let mut doc = Map::new();
    doc.insert(
        "states".into(),
        Value::Array(
            states
                .iter()
                .enumerate()
                .map(|(i, s)| json!({"id": s, "attributes": {"id": i}}))
                .collect(),
        ),
    );
    doc.insert(
        "utterances".into(),
        Value::Array(utts.iter().map(|u| json!({"id": u})).collect()),
    );
    doc.insert("lexicon".into(), json!({"kind": "explicit", "matrix": lex}));
    doc.insert("alpha".into(), json!(alpha));
    doc
}

fn load(doc: Map<String, Value>) -> Scenario {
    let text = serde_json::to_string_pretty(&Value::Object(doc)).unwrap();
    load_scenario(&text).unwrap_or_else(|e| panic!("generated scenario rejected: {e}\n{text}"))
}

/// Vanilla scenario with a flat prior and zero costs.
pub fn vanilla(matrix: &[Vec<f64>], alpha: f64) -> Scenario {
    load(base_document(matrix, alpha))
}

/// Vanilla scenario with a random prior and random costs.
pub fn vanilla_with_prior(rng: &mut impl Rng, matrix: &[Vec<f64>], alpha: f64) -> Scenario {
    let states = state_ids(matrix[0].len());
    let mut doc = base_document(matrix, alpha);
    let prior = random_prior(rng, states.len(), false);
    doc.insert("prior".into(), row(&states, &prior));
    let utts: Vec<Value> = utterance_ids(matrix.len())
        .iter()
        .map(|u| json!({"id": u, "cost": rng.gen_range(0.0..2.0), "salience": rng.gen_range(0.1..3.0)}))
        .collect();
    doc.insert("utterances".into(), Value::Array(utts));
    load(doc)
}

/// Epistemic scenario: one observation per belief, beliefs drawn at random
/// (some point masses, some spread over several states).
pub fn epistemic(
    rng: &mut impl Rng,
    matrix: &[Vec<f64>],
    alpha: f64,
    speaker: &str,
    observations: usize,
) -> Scenario {
    let states = state_ids(matrix[0].len());
    let mut doc = base_document(matrix, alpha);
    let obs: Vec<String> = (0..observations).map(|i| format!("o{i}")).collect();
    let mut beliefs = Map::new();
    for o in &obs {
        let b = random_prior(rng, states.len(), true);
        beliefs.insert(o.clone(), row(&states, &b));
    }
    doc.insert(
        "latents".into(),
        json!([{"name": "obs", "kind": "observation", "values": obs}]),
    );
    doc.insert("beliefs".into(), Value::Object(beliefs));
    doc.insert("speaker".into(), json!(speaker));
    load(doc)
}

/// Epistemic scenario whose every belief is a point mass, one per state.
pub fn epistemic_point_mass(matrix: &[Vec<f64>], alpha: f64) -> Scenario {
    let states = state_ids(matrix[0].len());
    let mut doc = base_document(matrix, alpha);
    let obs: Vec<String> = states.iter().map(|s| format!("saw-{s}")).collect();
    let mut beliefs = Map::new();
    for (i, o) in obs.iter().enumerate() {
        let b: Vec<f64> = (0..states.len())
            .map(|j| if i == j { 1.0 } else { 0.0 })
            .collect();
        beliefs.insert(o.clone(), row(&states, &b));
    }
    doc.insert(
        "latents".into(),
        json!([{"name": "obs", "kind": "observation", "values": obs}]),
    );
    doc.insert("beliefs".into(), Value::Object(beliefs));
    doc.insert("speaker".into(), json!("epistemic"));
    load(doc)
}

/// QUD scenario whose only QUD projects onto the unique `id` attribute.
pub fn injective_qud(matrix: &[Vec<f64>], alpha: f64) -> Scenario {
    let mut doc = base_document(matrix, alpha);
    doc.insert(
        "latents".into(),
        json!([{"name": "q", "kind": "qud", "values": ["which"], "projections": {"which": ["id"]}}]),
    );
    doc.insert("speaker".into(), json!("qud"));
    load(doc)
}

/// Politeness scenario with random subjective values and a goal weight.
pub fn polite(rng: &mut impl Rng, matrix: &[Vec<f64>], alpha: f64) -> Scenario {
    let states = state_ids(matrix[0].len());
    let mut doc = base_document(matrix, alpha);
    let values: Vec<f64> = (0..states.len()).map(|_| rng.gen_range(0.0..5.0)).collect();
    doc.insert("values".into(), row(&states, &values));
    doc.insert(
        "latents".into(),
        json!([{"name": "phi", "kind": "goal-weight", "values": [0.0, 0.5, 1.0]}]),
    );
    doc.insert("speaker".into(), json!("polite"));
    load(doc)
}

/// Threshold scenario over a numeric attribute with a listener-scope
/// parameter. Every threshold keeps `tall` true of the largest height.
pub fn threshold(rng: &mut impl Rng, n_states: usize, n_thresholds: usize) -> Scenario {
    let mut heights: Vec<i64> = (0..n_states as i64)
        .map(|i| i * 2 + rng.gen_range(0..2))
        .collect();
    heights.shuffle(rng);
    let max = *heights.iter().max().unwrap();
    let mut thresholds: Vec<i64> = (0..n_thresholds as i64)
        .map(|i| (i * max) / n_thresholds as i64 - 1)
        .collect();
    thresholds.dedup();
    let states = state_ids(n_states);
    let doc = json!({
        "states": states.iter().zip(&heights).map(|(s, h)| json!({"id": s, "attributes": {"height": h}})).collect::<Vec<_>>(),
        "utterances": [{"id": "tall", "cost": 0.5}, {"id": "null"}],
        "lexicon": {
            "kind": "threshold",
            "rules": {"tall": {"attribute": "height", "direction": "greater", "parameter": "x"}},
            "matrix": {"null": row(&states, &vec![1.0; n_states])}
        },
        "latents": [{"name": "x", "kind": "lexicon-parameter", "values": thresholds}],
        "alpha": 2
    });
    load(doc.as_object().unwrap().clone())
}

const REFGAME_STATES: [&str; 3] = ["blue-square", "blue-circle", "green-square"];
const REFGAME_UTTERANCES: [&str; 4] = ["blue", "green", "square", "circle"];
const REFGAME_TRUTH: [[f64; 3]; 4] = [[1.0, 1.0, 0.0], [0.0, 0.0, 1.0], [1.0, 0.0, 1.0], [0.0, 1.0, 0.0]];

/// Reference-game `L1(s | u)` written out directly from the truth table.
pub fn refgame_l1(alpha: f64) -> [[f64; 3]; 4] {
    let mut l0 = [[0.0; 3]; 4];
    for (u, row) in REFGAME_TRUTH.iter().enumerate() {
        let z: f64 = row.iter().sum();
        for s in 0..3 {
            l0[u][s] = row[s] / z;
        }
    }
    let mut s1 = [[0.0; 4]; 3];
    for s in 0..3 {
        let w: Vec<f64> = (0..4)
            .map(|u| if l0[u][s] > 0.0 { l0[u][s].powf(alpha) } else { 0.0 })
            .collect();
        let z: f64 = w.iter().sum();
        for u in 0..4 {
            s1[s][u] = w[u] / z;
        }
    }
    let mut l1 = [[0.0; 3]; 4];
    for u in 0..4 {
        let z: f64 = (0..3).map(|s| s1[s][u]).sum();
        for s in 0..3 {
            l1[u][s] = s1[s][u] / z;
        }
    }
    l1
}

/// `n` forced-choice listener trials: the utterance uniformly at random,
/// the chosen referent from `refgame_l1(alpha)`.
pub fn refgame_trials(alpha: f64, n: usize, seed: u64) -> rsa_core::analysis::BehavioralDataset {
    use rsa_core::analysis::{BehavioralDataset, QueryKind, Trial};
    let l1 = refgame_l1(alpha);
    let mut r = rng(seed);
    let mut counts = [[0u64; 3]; 4];
    for _ in 0..n {
        let u = r.gen_range(0..4);
        let x: f64 = r.gen();
        let mut acc = 0.0;
        let mut pick = 2;
        for (s, p) in l1[u].iter().enumerate() {
            acc += p;
            if x < acc {
                pick = s;
                break;
            }
        }
        // Never pick a zero-probability referent through rounding.
        while l1[u][pick] == 0.0 {
            pick -= 1;
        }
        counts[u][pick] += 1;
    }
    let mut trials = Vec::new();
    for u in 0..4 {
        for s in 0..3 {
            if counts[u][s] > 0 {
                trials.push(Trial {
                    scenario: "refgame".into(),
                    condition: String::new(),
                    query_kind: QueryKind::ListenerChoice,
                    stimulus: REFGAME_UTTERANCES[u].into(),
                    response: REFGAME_STATES[s].into(),
                    count: counts[u][s],
                });
            }
        }
    }
    BehavioralDataset { trials }
}
