//! Recursive speaker and listener agents.
//!
//! Level 0 is the literal listener. A speaker at level `k` soft-maximizes a
//! utility computed against the listener at level `k - 1`, and the listener
//! at level `k` inverts that speaker by Bayes' rule, jointly inferring any
//! latent variables it is uncertain about.
//!
//! Latents play one of three roles:
//! - *semantic* (listener-scope lexicon parameters and contexts) change the
//!   literal listener and are resolved by `L1`;
//! - *literal* (literal-scope lexicon parameters) are marginalized inside
//!   `L0` itself;
//! - *speaker-side* (QUDs, goal weights, observations) shape the speaker's
//!   utility and are inferred at every listener level.
//!
//! From level 2 up, the speaker reasons about `L_{k-1}`'s state marginal,
//! so semantic latents are only resolved once, at level 1.

use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::{Arc, OnceLock};

use crate::dist::{normalize_log, normalize_weights, scale_utility, Categorical};
use crate::error::{Result, RsaError};
use crate::scenario::{Assignment, LatentKind, Scenario, Scope, SpeakerKind};

/// Mixed-radix index over a subset of a scenario's latents; the first
/// latent is the most significant digit.
#[derive(Debug, Clone)]
struct Space {
    latents: Vec<usize>,
    radices: Vec<usize>,
    size: usize,
}

impl Space {
    fn new(scn: &Scenario, latents: Vec<usize>) -> Self {
        let radices: Vec<usize> = latents.iter().map(|&i| scn.latents()[i].values.len()).collect();
        let size = radices.iter().product();
        Self {
            latents,
            radices,
            size,
        }
    }

    fn decode_into(&self, idx: usize, a: &mut Assignment) {
        let mut rem = idx;
        for j in (0..self.latents.len()).rev() {
            a.set(self.latents[j], Some(rem % self.radices[j]));
            rem /= self.radices[j];
        }
    }

    fn decode(&self, scn: &Scenario, idx: usize) -> Assignment {
        let mut a = Assignment::empty(scn);
        self.decode_into(idx, &mut a);
        a
    }

    fn encode(&self, a: &Assignment) -> Option<usize> {
        let mut idx = 0;
        for (j, &li) in self.latents.iter().enumerate() {
            idx = idx * self.radices[j] + a.get(li)?;
        }
        Some(idx)
    }

    /// Indices consistent with every latent `a` binds in this space.
    fn completions(&self, scn: &Scenario, a: &Assignment) -> Vec<usize> {
        if let Some(i) = self.encode(a) {
            return vec![i];
        }
        (0..self.size)
            .filter(|&i| {
                let d = self.decode(scn, i);
                self.latents
                    .iter()
                    .all(|&li| a.get(li).is_none_or(|v| d.get(li) == Some(v)))
            })
            .collect()
    }

    fn prior(&self, scn: &Scenario, a: &Assignment) -> f64 {
        self.latents
            .iter()
            .map(|&li| scn.latents()[li].prior[a.get(li).expect("bound by decode")])
            .product()
    }
}

/// One posterior cell: state, `(latent, value)` bindings, probability.
pub type Tuple = (String, Vec<(String, String)>, f64);

/// Posterior over `(state, latent assignment)` tuples, ordered
/// state-major and then lexicographically over latents in declaration
/// order.
#[derive(Debug, Clone, PartialEq)]
pub struct JointPosterior {
    utterance: String,
    states: Vec<String>,
    latent_ids: Vec<usize>,
    latent_names: Vec<String>,
    latent_labels: Vec<Vec<String>>,
    radices: Vec<usize>,
    probs: Vec<f64>,
}

impl JointPosterior {
    pub fn utterance(&self) -> &str {
        &self.utterance
    }

    pub fn states(&self) -> &[String] {
        &self.states
    }

    /// Names of the latents inferred jointly with the state.
    pub fn latent_names(&self) -> &[String] {
        &self.latent_names
    }

    pub fn probs(&self) -> &[f64] {
        &self.probs
    }

    fn assignments(&self) -> usize {
        self.radices.iter().product()
    }

    fn digits(&self, idx: usize) -> Vec<usize> {
        let mut rem = idx % self.assignments();
        let mut out = vec![0; self.radices.len()];
        for j in (0..self.radices.len()).rev() {
            out[j] = rem % self.radices[j];
            rem /= self.radices[j];
        }
        out
    }

    /// Every tuple as `(state, [(latent, value)], probability)`.
    pub fn tuples(&self) -> Vec<Tuple> {
        let n = self.assignments();
        self.probs
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let latents = self
                    .digits(i)
                    .into_iter()
                    .enumerate()
                    .map(|(j, v)| (self.latent_names[j].clone(), self.latent_labels[j][v].clone()))
                    .collect();
                (self.states[i / n].clone(), latents, p)
            })
            .collect()
    }

    pub fn state_marginal(&self) -> Categorical {
        let n = self.assignments();
        let probs = self.probs.chunks(n).map(|c| c.iter().sum()).collect();
        Categorical::from_parts_unchecked(self.states.clone(), probs)
    }

    pub fn latent_marginal(&self, name: &str) -> Result<Categorical> {
        let j = self
            .latent_names
            .iter()
            .position(|n| n == name)
            .ok_or_else(|| RsaError::UnknownLabel {
                kind: "inferred latent",
                name: name.to_string(),
            })?;
        let mut probs = vec![0.0; self.radices[j]];
        for (i, p) in self.probs.iter().enumerate() {
            probs[self.digits(i)[j]] += p;
        }
        Ok(Categorical::from_parts_unchecked(
            self.latent_labels[j].clone(),
            probs,
        ))
    }

    /// Flattened view with labels `state` or `state|name=value;...`.
    pub fn to_categorical(&self) -> Categorical {
        let labels = self
            .tuples()
            .into_iter()
            .map(|(s, l, _)| {
                if l.is_empty() {
                    s
                } else {
                    let parts: Vec<String> = l.into_iter().map(|(n, v)| format!("{n}={v}")).collect();
                    format!("{s}|{}", parts.join(";"))
                }
            })
            .collect();
        Categorical::from_parts_unchecked(labels, self.probs.clone())
    }

    /// Restricts to tuples matching every latent bound in `condition` and
    /// renormalizes.
    pub fn condition(&self, scn: &Scenario, condition: &Assignment) -> Result<JointPosterior> {
        let mut fixed = Vec::new();
        for (li, v) in condition.indices().iter().enumerate() {
            if let Some(v) = v {
                let j = self.latent_ids.iter().position(|&x| x == li).ok_or_else(|| {
                    RsaError::InvalidArgument(format!(
                        "latent `{}` is not inferred by this listener",
                        scn.latents()[li].name
                    ))
                })?;
                fixed.push((j, *v));
            }
        }
        if fixed.is_empty() {
            return Ok(self.clone());
        }
        let weights: Vec<f64> = self
            .probs
            .iter()
            .enumerate()
            .map(|(i, &p)| {
                let d = self.digits(i);
                if fixed.iter().all(|&(j, v)| d[j] == v) {
                    p
                } else {
                    0.0
                }
            })
            .collect();
        let probs = normalize_weights(&weights).ok_or_else(|| RsaError::ZeroPosterior {
            utterance: self.utterance.clone(),
        })?;
        Ok(JointPosterior {
            probs,
            ..self.clone()
        })
    }
}

struct Heard {
    joint: JointPosterior,
    marginal: Arc<Vec<f64>>,
}

type Cell<T> = OnceLock<Result<Arc<T>>>;

fn cells<T>(n: usize) -> Vec<Cell<T>> {
    (0..n).map(|_| OnceLock::new()).collect()
}

/// A lazily evaluated tower `L0, S1, L1, …, S_depth, L_depth` over one
/// scenario. Every `(level, input)` result is computed at most once.
pub struct AgentChain<'s> {
    scn: &'s Scenario,
    depth: usize,
    memo: bool,
    semantic: Space,
    literal: Space,
    level_one: Space,
    speaker_side: Space,
    qud_cells: Vec<Option<Vec<usize>>>,
    l0: Vec<Cell<Vec<f64>>>,
    speakers: Vec<Vec<Cell<Vec<f64>>>>,
    listeners: Vec<Vec<Cell<Heard>>>,
    speaker_cells: AtomicU64,
}

impl<'s> AgentChain<'s> {
    pub fn new(scn: &'s Scenario, depth: usize) -> Result<Self> {
        let roles = |pred: &dyn Fn(LatentKind, Scope) -> bool| -> Vec<usize> {
            scn.latents()
                .iter()
                .enumerate()
                .filter(|(_, l)| pred(l.kind, l.scope))
                .map(|(i, _)| i)
                .collect()
        };
        let is_literal = |k: LatentKind, s: Scope| k == LatentKind::LexiconParameter && s == Scope::Literal;
        let semantic = Space::new(
            scn,
            roles(&|k, s| {
                k == LatentKind::Context || (k == LatentKind::LexiconParameter && s == Scope::Listener)
            }),
        );
        let literal = Space::new(scn, roles(&is_literal));
        let level_one = Space::new(scn, roles(&|k, s| !is_literal(k, s)));
        let speaker_side = Space::new(scn, roles(&|k, _| k.is_speaker_side()));

        let mut qud_cells = Vec::new();
        if let Some(qi) = scn.latent_of_kind(LatentKind::Qud) {
            for p in &scn.latents()[qi].projections {
                qud_cells.push(match p {
                    Some(p) => Some(scn.qud_cells(p)?),
                    None => None,
                });
            }
        }

        let n_s = scn.states().len();
        let n_u = scn.utterances().len();
        let speakers = (1..=depth)
            .map(|k| {
                let size = if k == 1 { level_one.size } else { speaker_side.size };
                cells(n_s * size)
            })
            .collect();
        let listeners = (1..=depth).map(|_| cells(n_u)).collect();
        Ok(Self {
            scn,
            depth,
            memo: true,
            l0: cells(n_u * semantic.size),
            semantic,
            literal,
            level_one,
            speaker_side,
            qud_cells,
            speakers,
            listeners,
            speaker_cells: AtomicU64::new(0),
        })
    }

    /// Disables every cache. Results are bit-identical; only slower.
    pub fn without_memo(mut self) -> Self {
        self.memo = false;
        self
    }

    pub fn depth(&self) -> usize {
        self.depth
    }

    pub fn scenario(&self) -> &Scenario {
        self.scn
    }

    /// Number of `(state, assignment, utterance)` speaker cells evaluated
    /// so far.
    pub fn speaker_cells(&self) -> u64 {
        self.speaker_cells.load(Ordering::Relaxed)
    }

    fn cached<T>(&self, cell: &Cell<T>, f: impl FnOnce() -> Result<T>) -> Result<Arc<T>> {
        if self.memo {
            cell.get_or_init(|| f().map(Arc::new)).clone()
        } else {
            f().map(Arc::new)
        }
    }

    fn space(&self, level: usize) -> &Space {
        if level == 1 {
            &self.level_one
        } else {
            &self.speaker_side
        }
    }

    fn check_level(&self, level: usize) -> Result<()> {
        if level == 0 || level > self.depth {
            return Err(RsaError::InvalidArgument(format!(
                "level {level} is outside this chain (1..={})",
                self.depth
            )));
        }
        Ok(())
    }

    /// Unnormalized `P(s) [[u]](s)`, summed over literal-scope latents.
    fn literal_weights(&self, u: usize, a: &Assignment) -> Result<Vec<f64>> {
        let scn = self.scn;
        let prior = scn.literal_state_prior(a)?;
        let mut w = vec![0.0; prior.len()];
        for xi in self.literal.completions(scn, a) {
            let mut b = a.clone();
            self.literal.decode_into(xi, &mut b);
            let px = self.literal.prior(scn, &b);
            if px == 0.0 {
                continue;
            }
            for (s, ws) in w.iter_mut().enumerate() {
                if prior[s] > 0.0 {
                    *ws += px * prior[s] * scn.meaning(u, s, &b)?;
                }
            }
        }
        Ok(w)
    }

    fn literal_probs(&self, u: usize, a: &Assignment) -> Result<Vec<f64>> {
        let w = self.literal_weights(u, a)?;
        normalize_weights(&w).ok_or_else(|| RsaError::ZeroSemanticSupport {
            utterance: self.scn.utterances()[u].id.clone(),
        })
    }

    pub(crate) fn l0_cached(&self, u: usize, a: &Assignment) -> Result<Arc<Vec<f64>>> {
        let key = self
            .semantic
            .encode(a)
            .expect("level-one assignments bind every semantic latent");
        self.cached(&self.l0[u * self.semantic.size + key], || {
            self.literal_probs(u, a)
        })
    }

    /// Literal listener `L0(· | u)` under a (possibly partial) assignment.
    pub fn literal_listener(&self, utterance: &str, a: &Assignment) -> Result<Categorical> {
        let u = self.scn.require_utterance(utterance)?;
        let probs = self.literal_probs(u, a)?;
        Ok(Categorical::from_parts_unchecked(self.scn.state_ids(), probs))
    }

    /// Listener distribution the level-`k` speaker reasons about, or `None`
    /// when `u` is unusable for it.
    fn target(&self, k: usize, u: usize, a: &Assignment) -> Result<Option<Arc<Vec<f64>>>> {
        let r = if k == 1 {
            self.l0_cached(u, a)
        } else {
            self.heard(k - 1, u).map(|h| h.marginal.clone())
        };
        match r {
            Ok(t) => Ok(Some(t)),
            Err(RsaError::ZeroSemanticSupport { .. } | RsaError::ZeroPosterior { .. }) => Ok(None),
            Err(e) => Err(e),
        }
    }

    fn describe_input(&self, s: usize, a: &Assignment) -> String {
        let scn = self.scn;
        let mut out = if scn.speaker().is_epistemic() {
            String::from("observation")
        } else {
            format!("state `{}`", scn.states()[s].id)
        };
        let desc = a.describe(scn);
        if !desc.is_empty() {
            out.push_str(&format!(" ({desc})"));
        }
        out
    }

    fn observation<'a>(&'a self, a: &Assignment) -> Result<&'a [f64]> {
        let scn = self.scn;
        let li = scn
            .latent_of_kind(LatentKind::Observation)
            .ok_or_else(|| RsaError::Schema("epistemic speaker without an observation latent".into()))?;
        let vi = a
            .get(li)
            .ok_or_else(|| RsaError::UnboundParameter(scn.latents()[li].name.clone()))?;
        let label = scn.latents()[li].values[vi].label();
        scn.belief(&label)
            .ok_or_else(|| RsaError::Schema(format!("no belief for observation `{label}`")))
    }

    /// Speaker row `S_k(· | s, a)` for a fully bound level-`k` assignment.
    fn speaker_row_compute(&self, k: usize, s: usize, a: &Assignment) -> Result<Vec<f64>> {
        let scn = self.scn;
        let alpha = scn.alpha();
        let kind = scn.speaker();
        let utterances = scn.utterances();
        let cells = match kind {
            SpeakerKind::Qud => {
                let qi = scn
                    .latent_of_kind(LatentKind::Qud)
                    .ok_or_else(|| RsaError::Schema("qud speaker without a qud latent".into()))?;
                let qv = a
                    .get(qi)
                    .ok_or_else(|| RsaError::UnboundParameter(scn.latents()[qi].name.clone()))?;
                Some(self.qud_cells[qv].as_ref().ok_or_else(|| {
                    RsaError::Schema(format!(
                        "QUD `{}` has no projection",
                        scn.latents()[qi].values[qv].label()
                    ))
                })?)
            }
            _ => None,
        };
        let phi = match kind {
            SpeakerKind::Polite => {
                let gi = scn
                    .latent_of_kind(LatentKind::GoalWeight)
                    .ok_or_else(|| RsaError::Schema("polite speaker without a goal-weight latent".into()))?;
                let gv = a
                    .get(gi)
                    .ok_or_else(|| RsaError::UnboundParameter(scn.latents()[gi].name.clone()))?;
                scn.latents()[gi].values[gv].as_number().unwrap_or(1.0)
            }
            _ => 1.0,
        };
        let belief = if kind.is_epistemic() {
            Some(self.observation(a)?)
        } else {
            None
        };
        let values = match kind {
            SpeakerKind::Polite => Some(
                scn.values()
                    .ok_or_else(|| RsaError::Schema("polite speaker without state values".into()))?,
            ),
            _ => None,
        };

        let mut utility = vec![f64::NEG_INFINITY; utterances.len()];
        for (u, utt) in utterances.iter().enumerate() {
            self.speaker_cells.fetch_add(1, Ordering::Relaxed);
            let Some(t) = self.target(k, u, a)? else {
                continue;
            };
            let info = t[s].ln();
            let cost = utt.cost;
            let extra_cost = if scn.include_cost() { alpha * cost } else { 0.0 };
            utility[u] = match kind {
                SpeakerKind::Vanilla | SpeakerKind::Context => scale_utility(alpha, info - cost),
                SpeakerKind::Salience => {
                    if info == f64::NEG_INFINITY {
                        f64::NEG_INFINITY
                    } else {
                        alpha * info + utt.salience.ln() - extra_cost
                    }
                }
                SpeakerKind::Qud => {
                    let cells = cells.expect("set for qud speakers");
                    let mass: f64 = (0..t.len())
                        .filter(|&s2| cells[s2] == cells[s])
                        .map(|s2| t[s2])
                        .sum();
                    scale_utility(alpha, mass.ln() - cost)
                }
                SpeakerKind::Polite => {
                    let values = values.expect("set for polite speakers");
                    let social: f64 = t.iter().zip(values).map(|(p, v)| p * v).sum();
                    let inner = if phi == 0.0 {
                        social - cost
                    } else {
                        phi * info + (1.0 - phi) * social - cost
                    };
                    scale_utility(alpha, inner)
                }
                SpeakerKind::Epistemic => {
                    let b = belief.expect("set for epistemic speakers");
                    let mut e = 0.0;
                    for (bs, ts) in b.iter().zip(t.iter()) {
                        if *bs > 0.0 {
                            e += bs * ts.ln();
                        }
                    }
                    scale_utility(alpha, e - cost)
                }
                SpeakerKind::EpistemicSampling => {
                    let b = belief.expect("set for epistemic speakers");
                    let mut m = 0.0;
                    for (bs, ts) in b.iter().zip(t.iter()) {
                        if *bs > 0.0 && *ts > 0.0 {
                            m += bs * ts.powf(alpha);
                        }
                    }
                    if m == 0.0 {
                        f64::NEG_INFINITY
                    } else {
                        utt.salience.ln() + m.ln() - extra_cost
                    }
                }
            };
        }
        normalize_log(&utility).ok_or_else(|| RsaError::NoUsableUtterance {
            input: self.describe_input(s, a),
        })
    }

    fn speaker_row(&self, k: usize, s: usize, ai: usize) -> Result<Arc<Vec<f64>>> {
        let space = self.space(k);
        let cell = &self.speakers[k - 1][s * space.size + ai];
        self.cached(cell, || {
            let a = space.decode(self.scn, ai);
            self.speaker_row_compute(k, s, &a)
        })
    }

    /// Level-`k` speaker. `input` is a state id, or an observation value
    /// for epistemic speakers. Latents `a` leaves unbound are marginalized
    /// under their prior.
    pub fn speaker(&self, input: &str, a: &Assignment, level: usize) -> Result<Categorical> {
        self.check_level(level)?;
        let scn = self.scn;
        let mut a = a.clone();
        let s = if scn.speaker().is_epistemic() {
            let li = scn
                .latent_of_kind(LatentKind::Observation)
                .ok_or_else(|| RsaError::Schema("epistemic speaker without an observation latent".into()))?;
            let vi = scn.latents()[li]
                .value_index(input)
                .ok_or_else(|| RsaError::UnknownLabel {
                    kind: "observation",
                    name: input.to_string(),
                })?;
            a.set(li, Some(vi));
            0
        } else {
            scn.require_state(input)?
        };
        let probs = self.speaker_probs(s, &a, level)?;
        Ok(Categorical::from_parts_unchecked(scn.utterance_ids(), probs))
    }

    /// Unlabelled speaker row for state index `s` (0 for epistemic
    /// speakers, whose observation is bound in `a`).
    pub(crate) fn speaker_probs(&self, s: usize, a: &Assignment, level: usize) -> Result<Vec<f64>> {
        self.check_level(level)?;
        let scn = self.scn;
        let space = self.space(level);
        for (li, v) in a.indices().iter().enumerate() {
            if v.is_some() && !space.latents.contains(&li) {
                return Err(RsaError::InvalidArgument(format!(
                    "latent `{}` is not visible to the level-{level} speaker",
                    scn.latents()[li].name
                )));
            }
        }
        let completions = space.completions(scn, a);
        if let [ai] = completions[..] {
            Ok(self.speaker_row(level, s, ai)?.as_ref().clone())
        } else {
            let mut acc = vec![0.0; scn.utterances().len()];
            let mut used = 0.0;
            for ai in completions {
                let p = space.prior(scn, &space.decode(scn, ai));
                if p == 0.0 {
                    continue;
                }
                match self.speaker_row(level, s, ai) {
                    Ok(row) => {
                        used += p;
                        for (x, r) in acc.iter_mut().zip(row.iter()) {
                            *x += p * r;
                        }
                    }
                    Err(RsaError::NoUsableUtterance { .. }) => {}
                    Err(e) => return Err(e),
                }
            }
            if used == 0.0 {
                return Err(RsaError::NoUsableUtterance {
                    input: self.describe_input(s, a),
                });
            }
            Ok(acc.into_iter().map(|x| x / used).collect())
        }
    }

    /// Prior weight of every `(state, assignment)` tuple at level `k`.
    fn base_weights(&self, k: usize) -> Result<Vec<f64>> {
        let scn = self.scn;
        let space = self.space(k);
        let n_s = scn.states().len();
        let obs = scn.latent_of_kind(LatentKind::Observation);
        let mut w = vec![0.0; n_s * space.size];
        for ai in 0..space.size {
            let a = space.decode(scn, ai);
            let pa = space.prior(scn, &a);
            let ps = match obs {
                Some(li) if a.is_bound(li) => {
                    let label = scn.latents()[li].values[a.get(li).unwrap()].label();
                    scn.belief(&label)
                        .ok_or_else(|| RsaError::Schema(format!("no belief for observation `{label}`")))?
                        .to_vec()
                }
                _ => scn.state_prior(&a)?,
            };
            for s in 0..n_s {
                w[s * space.size + ai] = pa * ps[s];
            }
        }
        Ok(w)
    }

    fn heard_compute(&self, k: usize, u: usize) -> Result<Heard> {
        let scn = self.scn;
        let space = self.space(k);
        let mut w = self.base_weights(k)?;
        for s in 0..scn.states().len() {
            for ai in 0..space.size {
                let i = s * space.size + ai;
                match self.speaker_row(k, s, ai) {
                    Ok(row) => w[i] *= row[u],
                    Err(RsaError::NoUsableUtterance { .. }) => w[i] = 0.0,
                    Err(e) => return Err(e),
                }
            }
        }
        let utterance = scn.utterances()[u].id.clone();
        let probs = normalize_weights(&w).ok_or_else(|| RsaError::ZeroPosterior {
            utterance: utterance.clone(),
        })?;
        let marginal: Vec<f64> = probs.chunks(space.size).map(|c| c.iter().sum()).collect();
        let joint = JointPosterior {
            utterance,
            states: scn.state_ids(),
            latent_ids: space.latents.clone(),
            latent_names: space
                .latents
                .iter()
                .map(|&i| scn.latents()[i].name.clone())
                .collect(),
            latent_labels: space.latents.iter().map(|&i| scn.latents()[i].labels()).collect(),
            radices: space.radices.clone(),
            probs,
        };
        Ok(Heard {
            joint,
            marginal: Arc::new(marginal),
        })
    }

    fn heard(&self, k: usize, u: usize) -> Result<Arc<Heard>> {
        self.cached(&self.listeners[k - 1][u], || self.heard_compute(k, u))
    }

    /// Level-`k` pragmatic listener, optionally conditioned on latent values.
    pub fn listener(&self, utterance: &str, level: usize, condition: &Assignment) -> Result<JointPosterior> {
        self.check_level(level)?;
        let u = self.scn.require_utterance(utterance)?;
        self.heard(level, u)?.joint.condition(self.scn, condition)
    }

    /// Names of the latents the level-`k` listener infers.
    pub fn inferred_latents(&self, level: usize) -> Vec<String> {
        self.space(level)
            .latents
            .iter()
            .map(|&i| self.scn.latents()[i].name.clone())
            .collect()
    }

    /// Size of the `(state, assignment)` product the level-`k` listener sums over.
    pub fn joint_size(&self, level: usize) -> usize {
        self.scn.states().len() * self.space(level).size
    }
}

pub fn build_chain(scn: &Scenario, depth: usize) -> Result<AgentChain<'_>> {
    AgentChain::new(scn, depth)
}

pub fn literal_listener(scn: &Scenario, utterance: &str, a: &Assignment) -> Result<Categorical> {
    AgentChain::new(scn, 0)?.literal_listener(utterance, a)
}

/// Speaker of the given kind reasoning about the listener at level `target`
/// (0 is the literal listener).
pub fn speaker(
    scn: &Scenario,
    state: &str,
    a: &Assignment,
    kind: SpeakerKind,
    target: usize,
) -> Result<Categorical> {
    let scn = scn.with_speaker(kind);
    AgentChain::new(&scn, target + 1)?.speaker(state, a, target + 1)
}

/// Expected-accuracy speaker given an observation value.
pub fn epistemic_speaker(scn: &Scenario, observation: &str, target: usize) -> Result<Categorical> {
    let scn = scn.with_speaker(SpeakerKind::Epistemic);
    AgentChain::new(&scn, target + 1)?.speaker(observation, &Assignment::empty(&scn), target + 1)
}

pub fn pragmatic_listener(scn: &Scenario, utterance: &str, depth: usize) -> Result<JointPosterior> {
    AgentChain::new(scn, depth)?.listener(utterance, depth, &Assignment::empty(scn))
}

/// Speaker written as a product of truthfulness, informativity and economy:
/// `Truth(u,s) · |[[u]]|^-α · Economy(u)^α` with `Economy(u) = exp(-C(u))`.
/// Equals the vanilla speaker for 0/1 meanings under a flat prior.
pub fn three_factor_speaker(scn: &Scenario, state: &str) -> Result<Categorical> {
    let s = scn.require_state(state)?;
    let a = Assignment::empty(scn);
    let alpha = scn.alpha();
    let n_s = scn.states().len();
    let mut weights = Vec::with_capacity(scn.utterances().len());
    for (u, utt) in scn.utterances().iter().enumerate() {
        let truth = if scn.meaning(u, s, &a)? > 0.0 { 1.0 } else { 0.0 };
        let mut size = 0usize;
        for s2 in 0..n_s {
            if scn.meaning(u, s2, &a)? > 0.0 {
                size += 1;
            }
        }
        let informativity = if size == 0 {
            0.0
        } else {
            (size as f64).powf(-alpha)
        };
        let economy = (-utt.cost).exp();
        weights.push(truth * informativity * economy.powf(alpha));
    }
    Categorical::from_weights(scn.utterance_ids(), weights).map_err(|_| RsaError::NoUsableUtterance {
        input: format!("state `{state}`"),
    })
}

/// State marginal of the listener's prior: `Σ_x P(x) P(s | x)` when the
/// speaker's observation is latent, else the (context-marginal) state prior.
pub fn marginal_state_prior(scn: &Scenario) -> Result<Vec<f64>> {
    match scn.latent_of_kind(LatentKind::Observation) {
        Some(li) => {
            let lat = &scn.latents()[li];
            let mut out = vec![0.0; scn.states().len()];
            for (v, p) in lat.values.iter().zip(&lat.prior) {
                let b = scn
                    .belief(&v.label())
                    .ok_or_else(|| RsaError::Schema(format!("no belief for `{}`", v.label())))?;
                for (o, bs) in out.iter_mut().zip(b) {
                    *o += p * bs;
                }
            }
            Ok(out)
        }
        None => scn.state_prior(&Assignment::empty(scn)),
    }
}
