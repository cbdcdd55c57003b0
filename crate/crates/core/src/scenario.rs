//! Declarative communication scenarios: states, utterances, meanings,
//! priors and latent variables, plus the JSON file format and validation.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::Deserialize;
use serde_json::{json, Map, Value};

use crate::dist::Categorical;
use crate::error::{Result, RsaError};

/// Attribute value attached to a state.
#[derive(Debug, Clone, PartialEq)]
pub enum AttrValue {
    Number(f64),
    Text(String),
    Bool(bool),
}

impl AttrValue {
    pub fn as_number(&self) -> Option<f64> {
        match self {
            AttrValue::Number(x) => Some(*x),
            _ => None,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            AttrValue::Number(x) => json!(x),
            AttrValue::Text(s) => json!(s),
            AttrValue::Bool(b) => json!(b),
        }
    }

    /// Key used for QUD cell membership; numbers compare as `f64` bits.
    fn cell_key(&self) -> String {
        match self {
            AttrValue::Number(x) => format!("n:{:016x}", canonical_bits(*x)),
            AttrValue::Text(s) => format!("t:{s}"),
            AttrValue::Bool(b) => format!("b:{b}"),
        }
    }
}

fn canonical_bits(x: f64) -> u64 {
    // -0.0 and 0.0 are the same attribute value.
    if x == 0.0 {
        0
    } else {
        x.to_bits()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct State {
    pub id: String,
    pub attributes: BTreeMap<String, AttrValue>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Utterance {
    pub id: String,
    /// Production cost `C(u)`, in utility units.
    pub cost: f64,
    /// Utterance-prior weight; only used by the salience speakers.
    pub salience: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Direction {
    Greater,
    Less,
}

impl Direction {
    fn as_str(self) -> &'static str {
        match self {
            Direction::Greater => "greater",
            Direction::Less => "less",
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum ThresholdParam {
    /// A lexicon-parameter latent, by name and declaration index.
    Latent {
        name: String,
        index: usize,
    },
    Constant(f64),
}

/// `[[u]]^x(s) = attribute(s) > x` (or `<` for [`Direction::Less`]).
#[derive(Debug, Clone, PartialEq)]
pub struct ThresholdRule {
    pub attribute: String,
    pub direction: Direction,
    pub parameter: ThresholdParam,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LexiconRow {
    /// Truth value per state, in state declaration order.
    Explicit(Vec<f64>),
    Threshold(ThresholdRule),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LexiconKind {
    Explicit,
    Threshold,
}

/// Meaning function, one row per utterance.
#[derive(Debug, Clone, PartialEq)]
pub struct Lexicon {
    pub kind: LexiconKind,
    pub rows: Vec<LexiconRow>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum LatentKind {
    LexiconParameter,
    Qud,
    Context,
    Observation,
    GoalWeight,
}

impl LatentKind {
    pub fn as_str(self) -> &'static str {
        match self {
            LatentKind::LexiconParameter => "lexicon-parameter",
            LatentKind::Qud => "qud",
            LatentKind::Context => "context",
            LatentKind::Observation => "observation",
            LatentKind::GoalWeight => "goal-weight",
        }
    }

    /// Whether the latent shapes the speaker's goal or knowledge rather than
    /// the literal semantics or the state prior.
    pub fn is_speaker_side(self) -> bool {
        matches!(
            self,
            LatentKind::Qud | LatentKind::Observation | LatentKind::GoalWeight
        )
    }
}

/// Where a lexicon-parameter latent is resolved.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scope {
    /// Inferred jointly with the state by the pragmatic listener.
    #[default]
    Listener,
    /// Marginalized inside the literal listener.
    Literal,
}

#[derive(Debug, Clone, PartialEq)]
pub enum LatentValue {
    Number(f64),
    Text(String),
}

impl LatentValue {
    pub fn label(&self) -> String {
        match self {
            LatentValue::Number(x) => format_number(*x),
            LatentValue::Text(s) => s.clone(),
        }
    }

    pub fn as_number(&self) -> Option<f64> {
        match self {
            LatentValue::Number(x) => Some(*x),
            LatentValue::Text(_) => None,
        }
    }

    fn to_json(&self) -> Value {
        match self {
            LatentValue::Number(x) => json!(x),
            LatentValue::Text(s) => json!(s),
        }
    }
}

/// Shortest decimal that round-trips, without a trailing `.0`.
pub fn format_number(x: f64) -> String {
    format!("{x}")
}

/// A question under discussion: states are grouped by equal values of the
/// projected attributes.
#[derive(Debug, Clone, PartialEq)]
pub struct Qud {
    pub name: String,
    pub projection: Vec<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LatentVariable {
    pub name: String,
    pub kind: LatentKind,
    pub values: Vec<LatentValue>,
    /// Prior over `values`, same order.
    pub prior: Vec<f64>,
    pub scope: Scope,
    /// For QUD latents, the partition named by each value (same order).
    /// `None` marks a value with no declared projection.
    pub projections: Vec<Option<Vec<String>>>,
}

impl LatentVariable {
    pub fn value_index(&self, label: &str) -> Option<usize> {
        self.values.iter().position(|v| v.label() == label)
    }

    pub fn labels(&self) -> Vec<String> {
        self.values.iter().map(LatentValue::label).collect()
    }

    pub fn prior_distribution(&self) -> Categorical {
        Categorical::from_parts_unchecked(self.labels(), self.prior.clone())
    }

    pub fn quds(&self) -> Vec<Qud> {
        self.values
            .iter()
            .zip(&self.projections)
            .filter_map(|(v, p)| {
                p.as_ref().map(|projection| Qud {
                    name: v.label(),
                    projection: projection.clone(),
                })
            })
            .collect()
    }
}

/// Prior the literal listener updates.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LiteralPrior {
    /// The scenario's state prior (conditioned on context when declared).
    #[default]
    Shared,
    /// A flat prior; only pragmatic listeners are biased.
    Uniform,
}

/// State prior, either fixed or conditioned on a context latent.
#[derive(Debug, Clone, PartialEq)]
pub enum StatePrior {
    Fixed(Vec<f64>),
    Conditional {
        latent: String,
        latent_index: usize,
        /// Keyed by context value label; each entry is over states.
        table: BTreeMap<String, Vec<f64>>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SpeakerKind {
    Vanilla,
    Salience,
    Qud,
    Context,
    Epistemic,
    EpistemicSampling,
    Polite,
}

impl SpeakerKind {
    pub const ALL: [SpeakerKind; 7] = [
        SpeakerKind::Vanilla,
        SpeakerKind::Salience,
        SpeakerKind::Qud,
        SpeakerKind::Context,
        SpeakerKind::Epistemic,
        SpeakerKind::EpistemicSampling,
        SpeakerKind::Polite,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            SpeakerKind::Vanilla => "vanilla",
            SpeakerKind::Salience => "salience",
            SpeakerKind::Qud => "qud",
            SpeakerKind::Context => "context",
            SpeakerKind::Epistemic => "epistemic",
            SpeakerKind::EpistemicSampling => "epistemic-sampling",
            SpeakerKind::Polite => "polite",
        }
    }

    pub fn parse(name: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|k| k.as_str() == name)
    }

    /// Speakers whose input is an observation rather than a known state.
    pub fn is_epistemic(self) -> bool {
        matches!(self, SpeakerKind::Epistemic | SpeakerKind::EpistemicSampling)
    }

    pub fn uses_salience(self) -> bool {
        matches!(self, SpeakerKind::Salience | SpeakerKind::EpistemicSampling)
    }

    /// Latent kind the speaker cannot run without.
    pub fn required_latent(self) -> Option<LatentKind> {
        match self {
            SpeakerKind::Qud => Some(LatentKind::Qud),
            SpeakerKind::Context => Some(LatentKind::Context),
            SpeakerKind::Epistemic | SpeakerKind::EpistemicSampling => Some(LatentKind::Observation),
            SpeakerKind::Polite => Some(LatentKind::GoalWeight),
            SpeakerKind::Vanilla | SpeakerKind::Salience => None,
        }
    }
}

impl fmt::Display for SpeakerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A partial assignment of latent values, indexed like
/// [`Scenario::latents`]. Each entry is an index into that latent's domain.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Assignment(Vec<Option<usize>>);

impl Assignment {
    pub fn empty(scn: &Scenario) -> Self {
        Self(vec![None; scn.latents.len()])
    }

    pub fn from_indices(indices: Vec<Option<usize>>) -> Self {
        Self(indices)
    }

    /// Builds from `(latent name, value label)` pairs.
    pub fn from_pairs<'a>(
        scn: &Scenario,
        pairs: impl IntoIterator<Item = (&'a str, &'a str)>,
    ) -> Result<Self> {
        let mut a = Self::empty(scn);
        for (name, value) in pairs {
            let li = scn.latent_index(name).ok_or_else(|| RsaError::UnknownLabel {
                kind: "latent variable",
                name: name.to_string(),
            })?;
            let vi = scn.latents[li]
                .value_index(value)
                .ok_or_else(|| RsaError::UnknownLabel {
                    kind: "latent value",
                    name: format!("{name}={value}"),
                })?;
            a.0[li] = Some(vi);
        }
        Ok(a)
    }

    /// Parses `name=value;name=value` (empty allowed).
    pub fn parse(scn: &Scenario, text: &str) -> Result<Self> {
        let mut pairs = Vec::new();
        for part in text.split(';').map(str::trim).filter(|p| !p.is_empty()) {
            let (name, value) = part
                .split_once('=')
                .ok_or_else(|| RsaError::InvalidArgument(format!("expected name=value, got `{part}`")))?;
            pairs.push((name.trim(), value.trim()));
        }
        Self::from_pairs(scn, pairs)
    }

    pub fn get(&self, latent: usize) -> Option<usize> {
        self.0.get(latent).copied().flatten()
    }

    pub fn set(&mut self, latent: usize, value: Option<usize>) {
        self.0[latent] = value;
    }

    pub fn indices(&self) -> &[Option<usize>] {
        &self.0
    }

    pub fn is_bound(&self, latent: usize) -> bool {
        self.get(latent).is_some()
    }

    /// `name=value` pairs of bound latents, `;`-separated.
    pub fn describe(&self, scn: &Scenario) -> String {
        self.0
            .iter()
            .enumerate()
            .filter_map(|(i, v)| {
                v.map(|v| format!("{}={}", scn.latents[i].name, scn.latents[i].values[v].label()))
            })
            .collect::<Vec<_>>()
            .join(";")
    }
}

/// A complete communication scenario. Immutable once built; the `with_*`
/// methods return modified copies.
#[derive(Debug, Clone, PartialEq)]
pub struct Scenario {
    states: Vec<State>,
    utterances: Vec<Utterance>,
    lexicon: Lexicon,
    prior: StatePrior,
    literal_prior: LiteralPrior,
    latents: Vec<LatentVariable>,
    beliefs: Option<BTreeMap<String, Vec<f64>>>,
    values: Option<Vec<f64>>,
    alpha: f64,
    listener_depth: usize,
    speaker: SpeakerKind,
    include_cost: bool,
}

impl Scenario {
    pub fn states(&self) -> &[State] {
        &self.states
    }

    pub fn utterances(&self) -> &[Utterance] {
        &self.utterances
    }

    pub fn lexicon(&self) -> &Lexicon {
        &self.lexicon
    }

    pub fn prior(&self) -> &StatePrior {
        &self.prior
    }

    pub fn literal_prior(&self) -> LiteralPrior {
        self.literal_prior
    }

    pub fn latents(&self) -> &[LatentVariable] {
        &self.latents
    }

    pub fn beliefs(&self) -> Option<&BTreeMap<String, Vec<f64>>> {
        self.beliefs.as_ref()
    }

    /// Subjective value `V(s)` per state, if declared.
    pub fn values(&self) -> Option<&[f64]> {
        self.values.as_deref()
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn listener_depth(&self) -> usize {
        self.listener_depth
    }

    pub fn speaker(&self) -> SpeakerKind {
        self.speaker
    }

    /// Whether salience speakers also pay `exp(-α C(u))`.
    pub fn include_cost(&self) -> bool {
        self.include_cost
    }

    pub fn state_ids(&self) -> Vec<String> {
        self.states.iter().map(|s| s.id.clone()).collect()
    }

    pub fn utterance_ids(&self) -> Vec<String> {
        self.utterances.iter().map(|u| u.id.clone()).collect()
    }

    pub fn state_index(&self, id: &str) -> Option<usize> {
        self.states.iter().position(|s| s.id == id)
    }

    pub fn utterance_index(&self, id: &str) -> Option<usize> {
        self.utterances.iter().position(|u| u.id == id)
    }

    pub fn latent_index(&self, name: &str) -> Option<usize> {
        self.latents.iter().position(|l| l.name == name)
    }

    /// First latent of the given kind.
    pub fn latent_of_kind(&self, kind: LatentKind) -> Option<usize> {
        self.latents.iter().position(|l| l.kind == kind)
    }

    pub fn require_state(&self, id: &str) -> Result<usize> {
        self.state_index(id).ok_or_else(|| RsaError::UnknownLabel {
            kind: "state",
            name: id.to_string(),
        })
    }

    pub fn require_utterance(&self, id: &str) -> Result<usize> {
        self.utterance_index(id).ok_or_else(|| RsaError::UnknownLabel {
            kind: "utterance",
            name: id.to_string(),
        })
    }

    /// Number of joint assignments over every declared latent.
    pub fn latent_space_size(&self) -> u128 {
        self.latents.iter().map(|l| l.values.len() as u128).product()
    }

    /// Speaker belief `P(s | obs)` for an observation value label.
    pub fn belief(&self, observation: &str) -> Option<&[f64]> {
        self.beliefs.as_ref()?.get(observation).map(Vec::as_slice)
    }

    /// State prior under the context fixed by `assignment`. For a
    /// conditional prior with the context unbound, the context is
    /// marginalized under its own prior.
    pub fn state_prior(&self, assignment: &Assignment) -> Result<Vec<f64>> {
        match &self.prior {
            StatePrior::Fixed(p) => Ok(p.clone()),
            StatePrior::Conditional {
                latent_index,
                table,
                latent,
            } => {
                let lat = &self.latents[*latent_index];
                let lookup = |vi: usize| {
                    let label = lat.values[vi].label();
                    table
                        .get(&label)
                        .ok_or_else(|| RsaError::Schema(format!("no state prior for {latent}={label}")))
                };
                match assignment.get(*latent_index) {
                    Some(vi) => Ok(lookup(vi)?.clone()),
                    None => {
                        let mut out = vec![0.0; self.states.len()];
                        for (vi, w) in lat.prior.iter().enumerate() {
                            if *w == 0.0 {
                                continue;
                            }
                            for (o, p) in out.iter_mut().zip(lookup(vi)?) {
                                *o += w * p;
                            }
                        }
                        Ok(out)
                    }
                }
            }
        }
    }

    /// Prior of the literal listener under `assignment`.
    pub fn literal_state_prior(&self, assignment: &Assignment) -> Result<Vec<f64>> {
        match self.literal_prior {
            LiteralPrior::Shared => self.state_prior(assignment),
            LiteralPrior::Uniform => Ok(vec![1.0 / self.states.len() as f64; self.states.len()]),
        }
    }

    /// Literal meaning `[[u]](s)` under `assignment`.
    pub fn meaning(&self, utterance: usize, state: usize, assignment: &Assignment) -> Result<f64> {
        match &self.lexicon.rows[utterance] {
            LexiconRow::Explicit(row) => Ok(row[state]),
            LexiconRow::Threshold(rule) => {
                let threshold = match &rule.parameter {
                    ThresholdParam::Constant(x) => *x,
                    ThresholdParam::Latent { name, index } => {
                        let vi = assignment
                            .get(*index)
                            .ok_or_else(|| RsaError::UnboundParameter(name.clone()))?;
                        self.latents[*index].values[vi]
                            .as_number()
                            .ok_or_else(|| RsaError::Schema(format!("latent `{name}` is not numeric")))?
                    }
                };
                let value = self.states[state]
                    .attributes
                    .get(&rule.attribute)
                    .and_then(AttrValue::as_number)
                    .ok_or_else(|| {
                        RsaError::Schema(format!(
                            "state `{}` has no numeric attribute `{}`",
                            self.states[state].id, rule.attribute
                        ))
                    })?;
                let holds = match rule.direction {
                    Direction::Greater => value > threshold,
                    Direction::Less => value < threshold,
                };
                Ok(if holds { 1.0 } else { 0.0 })
            }
        }
    }

    /// Cell index of every state under a QUD projection. States with equal
    /// projected attribute tuples share a cell; cells are numbered in order
    /// of first appearance.
    pub fn qud_cells(&self, projection: &[String]) -> Result<Vec<usize>> {
        let mut keys: Vec<Vec<String>> = Vec::new();
        let mut cells = Vec::with_capacity(self.states.len());
        for s in &self.states {
            let key = projection
                .iter()
                .map(|a| {
                    s.attributes
                        .get(a)
                        .map(AttrValue::cell_key)
                        .ok_or_else(|| RsaError::Schema(format!("unknown attribute `{a}`")))
                })
                .collect::<Result<Vec<_>>>()?;
            let cell = match keys.iter().position(|k| *k == key) {
                Some(c) => c,
                None => {
                    keys.push(key);
                    keys.len() - 1
                }
            };
            cells.push(cell);
        }
        Ok(cells)
    }

    /// Partition of state ids induced by a QUD, one `Vec` per cell.
    pub fn qud_partition(&self, qud: &Qud) -> Result<Vec<Vec<String>>> {
        let cells = self.qud_cells(&qud.projection)?;
        let n = cells.iter().copied().max().map_or(0, |m| m + 1);
        let mut out = vec![Vec::new(); n];
        for (s, c) in cells.into_iter().enumerate() {
            out[c].push(self.states[s].id.clone());
        }
        Ok(out)
    }

    pub fn with_alpha(&self, alpha: f64) -> Result<Self> {
        if !alpha.is_finite() || alpha < 0.0 {
            return Err(RsaError::InvalidArgument(format!(
                "alpha must be finite and >= 0, got {alpha}"
            )));
        }
        let mut out = self.clone();
        out.alpha = alpha;
        Ok(out)
    }

    pub fn with_literal_prior(&self, literal_prior: LiteralPrior) -> Self {
        let mut out = self.clone();
        out.literal_prior = literal_prior;
        out
    }

    pub fn with_speaker(&self, kind: SpeakerKind) -> Self {
        let mut out = self.clone();
        out.speaker = kind;
        out
    }

    pub fn with_listener_depth(&self, depth: usize) -> Result<Self> {
        if depth == 0 {
            return Err(RsaError::InvalidArgument("listener depth must be >= 1".into()));
        }
        let mut out = self.clone();
        out.listener_depth = depth;
        Ok(out)
    }

    pub fn with_cost(&self, utterance: &str, cost: f64) -> Result<Self> {
        if !cost.is_finite() || cost < 0.0 {
            return Err(RsaError::InvalidArgument(format!(
                "cost must be finite and >= 0, got {cost}"
            )));
        }
        let ui = self.require_utterance(utterance)?;
        let mut out = self.clone();
        out.utterances[ui].cost = cost;
        Ok(out)
    }

    /// Replaces the fixed state prior with the given weights (renormalized).
    pub fn with_state_prior(&self, weights: &[(&str, f64)]) -> Result<Self> {
        let mut p = vec![0.0; self.states.len()];
        for (id, w) in weights {
            p[self.require_state(id)?] = *w;
        }
        let p = normalize_prob_vector(p, "state prior")?;
        let mut out = self.clone();
        out.prior = StatePrior::Fixed(p);
        Ok(out)
    }

    /// Pins a latent to a single value. Numeric latents accept values outside
    /// their declared domain; the domain is replaced by that one value.
    pub fn with_latent_fixed(&self, name: &str, value: &str) -> Result<Self> {
        let li = self.latent_index(name).ok_or_else(|| RsaError::UnknownLabel {
            kind: "latent variable",
            name: name.to_string(),
        })?;
        let mut out = self.clone();
        let lat = &mut out.latents[li];
        let (val, projection) = match lat.value_index(value) {
            Some(vi) => (lat.values[vi].clone(), lat.projections.get(vi).cloned().flatten()),
            None => match (&lat.kind, value.parse::<f64>()) {
                (LatentKind::LexiconParameter, Ok(x)) if x.is_finite() => (LatentValue::Number(x), None),
                (LatentKind::GoalWeight, Ok(x)) if (0.0..=1.0).contains(&x) => (LatentValue::Number(x), None),
                _ => {
                    return Err(RsaError::UnknownLabel {
                        kind: "latent value",
                        name: format!("{name}={value}"),
                    })
                }
            },
        };
        lat.values = vec![val];
        lat.prior = vec![1.0];
        if lat.kind == LatentKind::Qud {
            lat.projections = vec![projection];
        } else {
            lat.projections.clear();
        }
        Ok(out)
    }

    /// Canonical JSON document: keys sorted, every default made explicit.
    pub fn to_json_value(&self) -> Value {
        let mut doc = Map::new();
        doc.insert("alpha".into(), json!(self.alpha));
        if let Some(b) = &self.beliefs {
            let mut m = Map::new();
            for (obs, dist) in b {
                m.insert(obs.clone(), self.state_map(dist));
            }
            doc.insert("beliefs".into(), Value::Object(m));
        }
        doc.insert(
            "latents".into(),
            Value::Array(self.latents.iter().map(|l| self.latent_json(l)).collect()),
        );
        doc.insert("lexicon".into(), self.lexicon_json());
        doc.insert("listener_depth".into(), json!(self.listener_depth));
        doc.insert(
            "literal_prior".into(),
            json!(match self.literal_prior {
                LiteralPrior::Shared => "shared",
                LiteralPrior::Uniform => "uniform",
            }),
        );
        doc.insert(
            "prior".into(),
            match &self.prior {
                StatePrior::Fixed(p) => self.state_map(p),
                StatePrior::Conditional { latent, table, .. } => {
                    let mut t = Map::new();
                    for (k, v) in table {
                        t.insert(k.clone(), self.state_map(v));
                    }
                    json!({"given": latent, "table": Value::Object(t)})
                }
            },
        );
        doc.insert(
            "speaker".into(),
            if self.include_cost {
                json!({"include_cost": true, "kind": self.speaker.as_str()})
            } else {
                json!(self.speaker.as_str())
            },
        );
        doc.insert(
            "states".into(),
            Value::Array(
                self.states
                    .iter()
                    .map(|s| {
                        let attrs: Map<String, Value> = s
                            .attributes
                            .iter()
                            .map(|(k, v)| (k.clone(), v.to_json()))
                            .collect();
                        json!({"attributes": Value::Object(attrs), "id": s.id})
                    })
                    .collect(),
            ),
        );
        doc.insert(
            "utterances".into(),
            Value::Array(
                self.utterances
                    .iter()
                    .map(|u| json!({"cost": u.cost, "id": u.id, "salience": u.salience}))
                    .collect(),
            ),
        );
        if let Some(v) = &self.values {
            doc.insert("values".into(), self.state_map(v));
        }
        Value::Object(doc)
    }

    pub fn to_canonical_json(&self) -> String {
        let mut s =
            serde_json::to_string_pretty(&self.to_json_value()).expect("scenario documents always serialize");
        s.push('\n');
        s
    }

    fn state_map(&self, values: &[f64]) -> Value {
        let m: Map<String, Value> = self
            .states
            .iter()
            .zip(values)
            .map(|(s, v)| (s.id.clone(), json!(v)))
            .collect();
        Value::Object(m)
    }

    fn latent_json(&self, l: &LatentVariable) -> Value {
        let mut m = Map::new();
        m.insert("kind".into(), json!(l.kind.as_str()));
        m.insert("name".into(), json!(l.name));
        m.insert("prior".into(), json!(l.prior));
        m.insert(
            "values".into(),
            Value::Array(l.values.iter().map(LatentValue::to_json).collect()),
        );
        if l.kind == LatentKind::LexiconParameter {
            let scope = match l.scope {
                Scope::Listener => "listener",
                Scope::Literal => "literal",
            };
            m.insert("scope".into(), json!(scope));
        }
        if l.kind == LatentKind::Qud {
            let p: Map<String, Value> = l
                .values
                .iter()
                .zip(&l.projections)
                .filter_map(|(v, p)| p.as_ref().map(|p| (v.label(), json!(p))))
                .collect();
            m.insert("projections".into(), Value::Object(p));
        }
        Value::Object(m)
    }

    fn lexicon_json(&self) -> Value {
        let mut matrix = Map::new();
        let mut rules = Map::new();
        for (u, row) in self.utterances.iter().zip(&self.lexicon.rows) {
            match row {
                LexiconRow::Explicit(r) => {
                    matrix.insert(u.id.clone(), self.state_map(r));
                }
                LexiconRow::Threshold(rule) => {
                    let param = match &rule.parameter {
                        ThresholdParam::Latent { name, .. } => json!(name),
                        ThresholdParam::Constant(x) => json!(x),
                    };
                    rules.insert(
                        u.id.clone(),
                        json!({
                            "attribute": rule.attribute,
                            "direction": rule.direction.as_str(),
                            "parameter": param,
                        }),
                    );
                }
            }
        }
        match self.lexicon.kind {
            LexiconKind::Explicit => json!({"kind": "explicit", "matrix": Value::Object(matrix)}),
            LexiconKind::Threshold => json!({
                "kind": "threshold",
                "matrix": Value::Object(matrix),
                "rules": Value::Object(rules),
            }),
        }
    }
}

// ---------------------------------------------------------------------------
// Document parsing

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawScenario {
    states: Vec<RawState>,
    utterances: Vec<RawUtterance>,
    lexicon: RawLexicon,
    #[serde(default)]
    prior: Option<RawPrior>,
    #[serde(default)]
    literal_prior: Option<LiteralPrior>,
    #[serde(default)]
    latents: Vec<RawLatent>,
    #[serde(default)]
    beliefs: Option<BTreeMap<String, BTreeMap<String, f64>>>,
    #[serde(default)]
    values: Option<BTreeMap<String, f64>>,
    #[serde(default)]
    alpha: Option<f64>,
    #[serde(default)]
    listener_depth: Option<u64>,
    #[serde(default)]
    speaker: Option<RawSpeaker>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawState {
    id: String,
    #[serde(default)]
    attributes: BTreeMap<String, RawAttr>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawAttr {
    Bool(bool),
    Number(f64),
    Text(String),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawUtterance {
    id: String,
    #[serde(default)]
    cost: Option<f64>,
    #[serde(default)]
    salience: Option<f64>,
}

type RawMatrix = BTreeMap<String, BTreeMap<String, f64>>;

#[derive(Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase", deny_unknown_fields)]
enum RawLexicon {
    Explicit {
        matrix: RawMatrix,
    },
    Threshold {
        rules: BTreeMap<String, RawRule>,
        #[serde(default)]
        matrix: RawMatrix,
    },
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    attribute: String,
    direction: Direction,
    parameter: RawParam,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawParam {
    Constant(f64),
    Latent(String),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawPrior {
    Conditional(RawConditionalPrior),
    Fixed(BTreeMap<String, f64>),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawConditionalPrior {
    given: String,
    table: RawMatrix,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawLatent {
    name: String,
    kind: LatentKind,
    values: Vec<RawLatentValue>,
    #[serde(default)]
    prior: Option<Vec<f64>>,
    #[serde(default)]
    scope: Option<Scope>,
    #[serde(default)]
    projections: Option<BTreeMap<String, Vec<String>>>,
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawLatentValue {
    Number(f64),
    Text(String),
}

#[derive(Deserialize)]
#[serde(untagged)]
enum RawSpeaker {
    Name(SpeakerKind),
    Detailed(RawSpeakerDetail),
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawSpeakerDetail {
    kind: SpeakerKind,
    #[serde(default)]
    include_cost: bool,
}

fn schema<T>(msg: impl Into<String>) -> Result<T> {
    Err(RsaError::Schema(msg.into()))
}

/// Normalizes a weight vector. Vectors already summing to 1 within 1e-12
/// are kept bit-for-bit so canonical documents re-parse identically.
fn normalize_prob_vector(weights: Vec<f64>, what: &str) -> Result<Vec<f64>> {
    if weights.iter().any(|w| !w.is_finite() || *w < 0.0) {
        return schema(format!("{what}: weights must be finite and >= 0"));
    }
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return schema(format!("{what}: weights sum to zero"));
    }
    if (total - 1.0).abs() <= 1e-12 {
        return Ok(weights);
    }
    Ok(weights.into_iter().map(|w| w / total).collect())
}

/// Parses a scenario document, applying every default.
pub fn parse_scenario(document: &str) -> Result<Scenario> {
    let raw: RawScenario = serde_json::from_str(document).map_err(|e| {
        use serde_json::error::Category;
        match e.classify() {
            Category::Data => RsaError::Schema(e.to_string()),
            _ => RsaError::Parse {
                line: e.line(),
                column: e.column(),
                message: e.to_string(),
            },
        }
    })?;
    build(raw)
}

fn build(raw: RawScenario) -> Result<Scenario> {
    // States
    if raw.states.is_empty() {
        return schema("`states` must not be empty");
    }
    let mut states = Vec::with_capacity(raw.states.len());
    for s in raw.states {
        if states.iter().any(|t: &State| t.id == s.id) {
            return schema(format!("duplicate state id `{}`", s.id));
        }
        let attributes = s
            .attributes
            .into_iter()
            .map(|(k, v)| {
                let v = match v {
                    RawAttr::Bool(b) => AttrValue::Bool(b),
                    RawAttr::Number(x) => AttrValue::Number(x),
                    RawAttr::Text(t) => AttrValue::Text(t),
                };
                (k, v)
            })
            .collect();
        states.push(State { id: s.id, attributes });
    }
    let attr_names: BTreeSet<&String> = states[0].attributes.keys().collect();
    for s in &states {
        if s.attributes.keys().collect::<BTreeSet<_>>() != attr_names {
            return schema(format!(
                "state `{}` does not carry the same attribute names as `{}`",
                s.id, states[0].id
            ));
        }
    }
    let state_idx = |id: &str| states.iter().position(|s| s.id == id);
    let state_vector = |m: &BTreeMap<String, f64>, what: &str| -> Result<Vec<f64>> {
        let mut v = vec![0.0; states.len()];
        for (id, w) in m {
            match state_idx(id) {
                Some(i) => v[i] = *w,
                None => return schema(format!("{what}: unknown state `{id}`")),
            }
        }
        Ok(v)
    };

    // Utterances
    if raw.utterances.is_empty() {
        return schema("`utterances` must not be empty");
    }
    let mut utterances: Vec<Utterance> = Vec::with_capacity(raw.utterances.len());
    for u in raw.utterances {
        if utterances.iter().any(|t| t.id == u.id) {
            return schema(format!("duplicate utterance id `{}`", u.id));
        }
        let cost = u.cost.unwrap_or(0.0);
        if !cost.is_finite() || cost < 0.0 {
            return schema(format!("utterance `{}`: cost must be finite and >= 0", u.id));
        }
        let salience = u.salience.unwrap_or(1.0);
        if !salience.is_finite() || salience <= 0.0 {
            return schema(format!("utterance `{}`: salience must be finite and > 0", u.id));
        }
        utterances.push(Utterance {
            id: u.id,
            cost,
            salience,
        });
    }

    // Latents
    let mut latents: Vec<LatentVariable> = Vec::with_capacity(raw.latents.len());
    for l in raw.latents {
        if latents.iter().any(|t| t.name == l.name) {
            return schema(format!("latent `{}` declared twice", l.name));
        }
        if l.values.is_empty() {
            return schema(format!("latent `{}` has an empty domain", l.name));
        }
        let values: Vec<LatentValue> = l
            .values
            .into_iter()
            .map(|v| match v {
                RawLatentValue::Number(x) => LatentValue::Number(x),
                RawLatentValue::Text(s) => LatentValue::Text(s),
            })
            .collect();
        let labels: Vec<String> = values.iter().map(LatentValue::label).collect();
        if labels.iter().collect::<BTreeSet<_>>().len() != labels.len() {
            return schema(format!("latent `{}` has duplicate values", l.name));
        }
        match l.kind {
            LatentKind::LexiconParameter => {
                if values
                    .iter()
                    .any(|v| v.as_number().is_none_or(|x| !x.is_finite()))
                {
                    return schema(format!("lexicon-parameter `{}` needs numeric values", l.name));
                }
            }
            LatentKind::GoalWeight
                if values
                    .iter()
                    .any(|v| v.as_number().is_none_or(|x| !(0.0..=1.0).contains(&x))) =>
            {
                return schema(format!("goal-weight `{}` values must lie in [0, 1]", l.name));
            }
            _ => {}
        }
        if l.scope.is_some() && l.kind != LatentKind::LexiconParameter {
            return schema(format!(
                "latent `{}`: `scope` only applies to lexicon-parameter",
                l.name
            ));
        }
        if l.projections.is_some() && l.kind != LatentKind::Qud {
            return schema(format!("latent `{}`: `projections` only applies to qud", l.name));
        }
        let prior = match l.prior {
            None => vec![1.0 / values.len() as f64; values.len()],
            Some(p) => {
                if p.len() != values.len() {
                    return schema(format!(
                        "latent `{}`: prior has {} entries for {} values",
                        l.name,
                        p.len(),
                        values.len()
                    ));
                }
                normalize_prob_vector(p, &format!("latent `{}` prior", l.name))?
            }
        };
        let projections = match (l.kind, l.projections) {
            (LatentKind::Qud, Some(mut p)) => {
                let out = labels.iter().map(|lab| p.remove(lab)).collect();
                if let Some(extra) = p.keys().next() {
                    return schema(format!(
                        "latent `{}`: projection for undeclared value `{extra}`",
                        l.name
                    ));
                }
                out
            }
            (LatentKind::Qud, None) => vec![None; values.len()],
            _ => Vec::new(),
        };
        latents.push(LatentVariable {
            name: l.name,
            kind: l.kind,
            values,
            prior,
            scope: l.scope.unwrap_or_default(),
            projections,
        });
    }

    // Lexicon
    let utt_idx = |id: &str| utterances.iter().position(|u| u.id == id);
    let explicit_rows = |matrix: RawMatrix| -> Result<Vec<Option<Vec<f64>>>> {
        let mut rows = vec![None; utterances.len()];
        for (u, cells) in matrix {
            let ui =
                utt_idx(&u).ok_or_else(|| RsaError::Schema(format!("lexicon: unknown utterance `{u}`")))?;
            let row = state_vector(&cells, "lexicon")?;
            if row.iter().any(|x| !(0.0..=1.0).contains(x)) {
                return schema(format!("lexicon row `{u}`: entries must lie in [0, 1]"));
            }
            rows[ui] = Some(row);
        }
        Ok(rows)
    };
    let lexicon = match raw.lexicon {
        RawLexicon::Explicit { matrix } => {
            let rows = explicit_rows(matrix)?
                .into_iter()
                .map(|r| LexiconRow::Explicit(r.unwrap_or_else(|| vec![0.0; states.len()])))
                .collect();
            Lexicon {
                kind: LexiconKind::Explicit,
                rows,
            }
        }
        RawLexicon::Threshold { rules, matrix } => {
            let mut rows: Vec<Option<LexiconRow>> = explicit_rows(matrix)?
                .into_iter()
                .map(|r| r.map(LexiconRow::Explicit))
                .collect();
            for (u, rule) in rules {
                let ui = utt_idx(&u)
                    .ok_or_else(|| RsaError::Schema(format!("lexicon: unknown utterance `{u}`")))?;
                if rows[ui].is_some() {
                    return schema(format!("utterance `{u}` has both a rule and a matrix row"));
                }
                let parameter = match rule.parameter {
                    RawParam::Constant(x) => ThresholdParam::Constant(x),
                    RawParam::Latent(name) => {
                        let index = latents.iter().position(|l| l.name == name).ok_or_else(|| {
                            RsaError::Schema(format!("rule `{u}`: unknown latent `{name}`"))
                        })?;
                        if latents[index].kind != LatentKind::LexiconParameter {
                            return schema(format!("rule `{u}`: latent `{name}` is not a lexicon-parameter"));
                        }
                        ThresholdParam::Latent { name, index }
                    }
                };
                rows[ui] = Some(LexiconRow::Threshold(ThresholdRule {
                    attribute: rule.attribute,
                    direction: rule.direction,
                    parameter,
                }));
            }
            Lexicon {
                kind: LexiconKind::Threshold,
                rows: rows
                    .into_iter()
                    .map(|r| r.unwrap_or_else(|| LexiconRow::Explicit(vec![0.0; states.len()])))
                    .collect(),
            }
        }
    };

    // Prior
    let prior = match raw.prior {
        None => StatePrior::Fixed(vec![1.0 / states.len() as f64; states.len()]),
        Some(RawPrior::Fixed(m)) => {
            StatePrior::Fixed(normalize_prob_vector(state_vector(&m, "prior")?, "state prior")?)
        }
        Some(RawPrior::Conditional(c)) => {
            let latent_index = latents
                .iter()
                .position(|l| l.name == c.given)
                .ok_or_else(|| RsaError::Schema(format!("prior: unknown latent `{}`", c.given)))?;
            if latents[latent_index].kind != LatentKind::Context {
                return schema(format!("prior: latent `{}` is not a context latent", c.given));
            }
            let labels = latents[latent_index].labels();
            let mut table = BTreeMap::new();
            for (k, m) in c.table {
                if !labels.contains(&k) {
                    return schema(format!("prior: `{}` has no value `{k}`", c.given));
                }
                let v = state_vector(&m, "prior")?;
                table.insert(k.clone(), normalize_prob_vector(v, &format!("prior given {k}"))?);
            }
            StatePrior::Conditional {
                latent: c.given,
                latent_index,
                table,
            }
        }
    };

    let beliefs = match raw.beliefs {
        None => None,
        Some(b) => {
            let mut out = BTreeMap::new();
            for (obs, m) in b {
                let v = state_vector(&m, "beliefs")?;
                out.insert(obs.clone(), normalize_prob_vector(v, &format!("belief `{obs}`"))?);
            }
            Some(out)
        }
    };

    let values = match raw.values {
        None => None,
        Some(m) => {
            for s in &states {
                if !m.contains_key(&s.id) {
                    return schema(format!("values: missing state `{}`", s.id));
                }
            }
            let v = state_vector(&m, "values")?;
            if v.iter().any(|x| !x.is_finite()) {
                return schema("values must be finite");
            }
            Some(v)
        }
    };

    let alpha = raw.alpha.unwrap_or(1.0);
    if !alpha.is_finite() || alpha < 0.0 {
        return schema(format!("alpha must be finite and >= 0, got {alpha}"));
    }
    let listener_depth = raw.listener_depth.unwrap_or(1);
    if listener_depth == 0 {
        return schema("listener_depth must be >= 1");
    }
    let (speaker, include_cost) = match raw.speaker {
        None => (SpeakerKind::Vanilla, false),
        Some(RawSpeaker::Name(k)) => (k, false),
        Some(RawSpeaker::Detailed(d)) => (d.kind, d.include_cost),
    };

    Ok(Scenario {
        states,
        utterances,
        lexicon,
        prior,
        literal_prior: raw.literal_prior.unwrap_or_default(),
        latents,
        beliefs,
        values,
        alpha,
        listener_depth: listener_depth as usize,
        speaker,
        include_cost,
    })
}

// ---------------------------------------------------------------------------
// Validation

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DiagnosticCode {
    TrivialUtterance,
    MissingBelief,
    DanglingAttribute,
    PartitionGap,
    MissingPrior,
    MissingValues,
    MissingLatent,
    DuplicateLatentKind,
    ConflictingLatents,
    UnusedField,
    UnusedLatent,
    UnreachableState,
}

impl DiagnosticCode {
    pub fn as_str(self) -> &'static str {
        match self {
            DiagnosticCode::TrivialUtterance => "TrivialUtterance",
            DiagnosticCode::MissingBelief => "MissingBelief",
            DiagnosticCode::DanglingAttribute => "DanglingAttribute",
            DiagnosticCode::PartitionGap => "PartitionGap",
            DiagnosticCode::MissingPrior => "MissingPrior",
            DiagnosticCode::MissingValues => "MissingValues",
            DiagnosticCode::MissingLatent => "MissingLatent",
            DiagnosticCode::DuplicateLatentKind => "DuplicateLatentKind",
            DiagnosticCode::ConflictingLatents => "ConflictingLatents",
            DiagnosticCode::UnusedField => "UnusedField",
            DiagnosticCode::UnusedLatent => "UnusedLatent",
            DiagnosticCode::UnreachableState => "UnreachableState",
        }
    }
}

/// A validation finding. Displays as `Code("subject")`; the alternate form
/// (`{:#}`) appends the explanation.
#[derive(Debug, Clone, PartialEq)]
pub struct Diagnostic {
    pub severity: Severity,
    pub code: DiagnosticCode,
    pub subject: String,
    pub message: String,
}

impl Diagnostic {
    fn error(code: DiagnosticCode, subject: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Error,
            code,
            subject: subject.into(),
            message: message.into(),
        }
    }

    fn warning(code: DiagnosticCode, subject: impl Into<String>, message: impl Into<String>) -> Self {
        Self {
            severity: Severity::Warning,
            code,
            subject: subject.into(),
            message: message.into(),
        }
    }

    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}({:?})", self.code.as_str(), self.subject)?;
        if f.alternate() {
            let sev = match self.severity {
                Severity::Error => "error",
                Severity::Warning => "warning",
            };
            write!(f, " [{sev}] {}", self.message)?;
        }
        Ok(())
    }
}

/// Every assignment of the lexicon-parameter latents, as full
/// [`Assignment`]s with the other latents unbound.
fn lexicon_assignments(scn: &Scenario) -> Vec<Assignment> {
    let params: Vec<usize> = scn
        .latents
        .iter()
        .enumerate()
        .filter(|(_, l)| l.kind == LatentKind::LexiconParameter)
        .map(|(i, _)| i)
        .collect();
    let mut out = vec![Assignment::empty(scn)];
    for li in params {
        let n = scn.latents[li].values.len();
        out = out
            .into_iter()
            .flat_map(|a| {
                (0..n).map(move |vi| {
                    let mut b = a.clone();
                    b.set(li, Some(vi));
                    b
                })
            })
            .collect();
    }
    out
}

/// Checks cross-field consistency. An empty result (or warnings only)
/// means the scenario is runnable.
pub fn validate_scenario(scn: &Scenario) -> Vec<Diagnostic> {
    use DiagnosticCode as C;
    let mut out = Vec::new();
    let attr = |name: &str| scn.states[0].attributes.contains_key(name);

    // Threshold rules need a numeric attribute on every state.
    let mut dangling = false;
    for row in &scn.lexicon.rows {
        if let LexiconRow::Threshold(rule) = row {
            let numeric = scn.states.iter().all(|s| {
                s.attributes
                    .get(&rule.attribute)
                    .and_then(AttrValue::as_number)
                    .is_some()
            });
            if !numeric {
                dangling = true;
                let what = if attr(&rule.attribute) {
                    "is not numeric on every state"
                } else {
                    "does not exist"
                };
                out.push(Diagnostic::error(
                    C::DanglingAttribute,
                    &rule.attribute,
                    format!("threshold attribute `{}` {what}", rule.attribute),
                ));
            }
        }
    }

    // Latent kinds: at most one of each goal/knowledge/context kind.
    for kind in [
        LatentKind::Qud,
        LatentKind::Context,
        LatentKind::Observation,
        LatentKind::GoalWeight,
    ] {
        if scn.latents.iter().filter(|l| l.kind == kind).count() > 1 {
            out.push(Diagnostic::error(
                C::DuplicateLatentKind,
                kind.as_str(),
                format!("at most one {} latent may be declared", kind.as_str()),
            ));
        }
    }
    let has = |k: LatentKind| scn.latent_of_kind(k).is_some();
    if has(LatentKind::Observation) && has(LatentKind::Context) {
        out.push(Diagnostic::error(
            C::ConflictingLatents,
            "observation+context",
            "an observation latent fixes the state distribution; it cannot be combined with a context prior",
        ));
    }
    if let Some(required) = scn.speaker.required_latent() {
        if !has(required) {
            out.push(Diagnostic::error(
                C::MissingLatent,
                required.as_str(),
                format!("speaker `{}` needs a {} latent", scn.speaker, required.as_str()),
            ));
        }
    }
    for l in &scn.latents {
        let used = match l.kind {
            LatentKind::LexiconParameter => scn.lexicon.rows.iter().any(|r| {
                matches!(r, LexiconRow::Threshold(ThresholdRule {
                    parameter: ThresholdParam::Latent { name, .. }, ..
                }) if *name == l.name)
            }),
            LatentKind::Qud => scn.speaker == SpeakerKind::Qud,
            LatentKind::GoalWeight => scn.speaker == SpeakerKind::Polite,
            LatentKind::Observation => scn.speaker.is_epistemic(),
            LatentKind::Context => true,
        };
        if !used {
            out.push(Diagnostic::warning(
                C::UnusedLatent,
                &l.name,
                format!(
                    "latent `{}` has no effect under speaker `{}`",
                    l.name, scn.speaker
                ),
            ));
        }
    }

    // QUD partitions.
    for l in scn.latents.iter().filter(|l| l.kind == LatentKind::Qud) {
        for (v, p) in l.values.iter().zip(&l.projections) {
            match p {
                None => out.push(Diagnostic::error(
                    C::PartitionGap,
                    v.label(),
                    format!("QUD `{}` declares no projection", v.label()),
                )),
                Some(p) => {
                    for a in p.iter().filter(|a| !attr(a)) {
                        out.push(Diagnostic::error(
                            C::DanglingAttribute,
                            a,
                            format!("QUD `{}` projects onto unknown attribute `{a}`", v.label()),
                        ));
                    }
                }
            }
        }
    }

    // Observation latents and beliefs.
    match scn.latent_of_kind(LatentKind::Observation) {
        Some(li) => {
            for v in &scn.latents[li].values {
                if scn.belief(&v.label()).is_none() {
                    out.push(Diagnostic::error(
                        C::MissingBelief,
                        v.label(),
                        format!("no speaker belief for observation `{}`", v.label()),
                    ));
                }
            }
        }
        None => {
            if scn.beliefs.is_some() && !scn.speaker.is_epistemic() {
                out.push(Diagnostic::warning(
                    C::UnusedField,
                    "beliefs",
                    "beliefs are declared without an observation latent",
                ));
            }
        }
    }

    // Context latents and conditional priors.
    match (scn.latent_of_kind(LatentKind::Context), &scn.prior) {
        (Some(li), StatePrior::Conditional { table, .. }) => {
            for v in &scn.latents[li].values {
                if !table.contains_key(&v.label()) {
                    out.push(Diagnostic::error(
                        C::MissingPrior,
                        v.label(),
                        format!("no state prior given context `{}`", v.label()),
                    ));
                }
            }
        }
        (Some(li), StatePrior::Fixed(_)) => out.push(Diagnostic::error(
            C::MissingPrior,
            &scn.latents[li].name,
            "a context latent needs a conditional state prior",
        )),
        _ => {}
    }

    // Subjective values.
    let needs_values = scn.speaker == SpeakerKind::Polite || has(LatentKind::GoalWeight);
    if needs_values && scn.values.is_none() {
        out.push(Diagnostic::error(
            C::MissingValues,
            "values",
            "a politeness speaker needs subjective state values",
        ));
    }
    if !needs_values && scn.values.is_some() {
        out.push(Diagnostic::warning(
            C::UnusedField,
            "values",
            "state values are declared but no politeness speaker uses them",
        ));
    }

    // Every utterance must be true somewhere under every lexicon assignment.
    if !dangling {
        let assignments = lexicon_assignments(scn);
        let mut reachable = vec![false; scn.states.len()];
        for (ui, u) in scn.utterances.iter().enumerate() {
            let mut trivial = false;
            for a in &assignments {
                let mut any = false;
                for (si, r) in reachable.iter_mut().enumerate() {
                    if scn.meaning(ui, si, a).is_ok_and(|m| m > 0.0) {
                        any = true;
                        *r = true;
                    }
                }
                if !any {
                    trivial = true;
                }
            }
            if trivial {
                out.push(Diagnostic::error(
                    C::TrivialUtterance,
                    &u.id,
                    format!("utterance `{}` is false in every state", u.id),
                ));
            }
        }
        for (s, r) in scn.states.iter().zip(reachable) {
            if !r {
                out.push(Diagnostic::warning(
                    C::UnreachableState,
                    &s.id,
                    format!("no utterance is true of state `{}`", s.id),
                ));
            }
        }
    }
    out
}

/// Parses and validates; fails on any error-severity diagnostic.
pub fn load_scenario(document: &str) -> Result<Scenario> {
    let scn = parse_scenario(document)?;
    let errors: Vec<Diagnostic> = validate_scenario(&scn)
        .into_iter()
        .filter(Diagnostic::is_error)
        .collect();
    if errors.is_empty() {
        Ok(scn)
    } else {
        Err(RsaError::Validation(errors))
    }
}
