//! Pragmatic content of utterances and Bayesian fitting of model
//! parameters to forced-choice data.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use serde_json::json;

use crate::agents::{marginal_state_prior, AgentChain};
use crate::dist::log_sum_exp;
use crate::error::{Result, RsaError};
use crate::par;
use crate::scenario::{format_number, Assignment, LatentKind, LexiconRow, Scenario, ThresholdParam};

/// Default threshold below which an information difference counts as zero.
pub const INFO_EPSILON: f64 = 1e-9;

/// Default bound on the number of grid points.
pub const DEFAULT_GRID_BUDGET: usize = 1_000_000;

#[derive(Debug, Clone, PartialEq)]
pub struct InfoProfile {
    pub utterance: String,
    pub states: Vec<String>,
    /// `P_L(s | u) - P(s | [[u]])` per state.
    pub info: Vec<f64>,
    pub pragmatic_content: Vec<String>,
    pub implicated_false: Vec<String>,
}

/// Compares the level-`depth` listener with the prior conditioned on the
/// literal true set of `utterance`.
pub fn info_profile(scn: &Scenario, utterance: &str, depth: usize, epsilon: f64) -> Result<InfoProfile> {
    let u = scn.require_utterance(utterance)?;
    let chain = AgentChain::new(scn, depth)?;
    let pragmatic = chain
        .listener(utterance, depth, &Assignment::empty(scn))?
        .state_marginal();

    // True somewhere under a lexicon assignment with positive prior.
    let params: Vec<usize> = scn
        .latents()
        .iter()
        .enumerate()
        .filter(|(_, l)| l.kind == LatentKind::LexiconParameter)
        .map(|(i, _)| i)
        .collect();
    let mut assignments = vec![Assignment::empty(scn)];
    for &li in &params {
        let lat = &scn.latents()[li];
        assignments = assignments
            .into_iter()
            .flat_map(|a| {
                (0..lat.values.len())
                    .filter(|&v| lat.prior[v] > 0.0)
                    .map(move |v| {
                        let mut b = a.clone();
                        b.set(li, Some(v));
                        b
                    })
            })
            .collect();
    }
    let prior = marginal_state_prior(scn)?;
    let mut literal = vec![0.0; prior.len()];
    for (s, l) in literal.iter_mut().enumerate() {
        for a in &assignments {
            if scn.meaning(u, s, a)? > 0.0 {
                *l = prior[s];
                break;
            }
        }
    }
    let z: f64 = literal.iter().sum();
    if z == 0.0 {
        return Err(RsaError::ZeroSemanticSupport {
            utterance: utterance.to_string(),
        });
    }

    let info: Vec<f64> = pragmatic
        .probs()
        .iter()
        .zip(&literal)
        .map(|(p, l)| p - l / z)
        .collect();
    let states = scn.state_ids();
    let pick = |pred: &dyn Fn(f64) -> bool| {
        states
            .iter()
            .zip(&info)
            .filter(|(_, i)| pred(**i))
            .map(|(s, _)| s.clone())
            .collect()
    };
    Ok(InfoProfile {
        utterance: utterance.to_string(),
        pragmatic_content: pick(&|i| i > epsilon),
        implicated_false: pick(&|i| i < -epsilon),
        states,
        info,
    })
}

// ---------------------------------------------------------------------------
// Behavioral data

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum QueryKind {
    /// The participant saw an utterance and chose a state.
    ListenerChoice,
    /// The participant saw a state (or observation) and chose an utterance.
    SpeakerChoice,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trial {
    pub scenario: String,
    /// `name=value;...`, possibly empty.
    #[serde(default)]
    pub condition: String,
    pub query_kind: QueryKind,
    pub stimulus: String,
    pub response: String,
    pub count: u64,
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct BehavioralDataset {
    pub trials: Vec<Trial>,
}

impl BehavioralDataset {
    pub fn from_csv(text: &str) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = reader
            .headers()
            .map_err(|e| RsaError::Schema(format!("dataset: {e}")))?
            .clone();
        let expected = [
            "scenario",
            "condition",
            "query_kind",
            "stimulus",
            "response",
            "count",
        ];
        if headers.iter().collect::<Vec<_>>() != expected {
            return Err(RsaError::Schema(format!(
                "dataset header must be `{}`",
                expected.join(",")
            )));
        }
        let mut trials = Vec::new();
        for (i, row) in reader.deserialize::<Trial>().enumerate() {
            let t = row.map_err(|e| RsaError::Schema(format!("dataset row {}: {e}", i + 1)))?;
            if t.count == 0 {
                return Err(RsaError::Schema(format!(
                    "dataset row {}: count must be >= 1",
                    i + 1
                )));
            }
            trials.push(t);
        }
        Ok(Self { trials })
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_csv(&std::fs::read_to_string(path)?)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        if self.trials.is_empty() {
            w.write_record([
                "scenario",
                "condition",
                "query_kind",
                "stimulus",
                "response",
                "count",
            ])
            .expect("in-memory write");
        }
        for t in &self.trials {
            w.serialize(t).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv is utf-8")
    }

    pub fn total_count(&self) -> u64 {
        self.trials.iter().map(|t| t.count).sum()
    }
}

// ---------------------------------------------------------------------------
// Parameter grids

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Param {
    Alpha,
    Cost(String),
    /// Pins a lexicon-parameter latent.
    Threshold(String),
    /// Pins the goal-weight latent.
    Phi,
}

impl Param {
    pub fn parse(name: &str) -> Result<Self> {
        match name.split_once(':') {
            None if name == "alpha" => Ok(Param::Alpha),
            None if name == "phi" => Ok(Param::Phi),
            Some(("cost", u)) if !u.is_empty() => Ok(Param::Cost(u.to_string())),
            Some(("threshold", x)) if !x.is_empty() => Ok(Param::Threshold(x.to_string())),
            _ => Err(RsaError::InvalidArgument(format!(
                "unknown parameter `{name}` (expected alpha, phi, cost:<utterance> or threshold:<latent>)"
            ))),
        }
    }
}

impl fmt::Display for Param {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Param::Alpha => f.write_str("alpha"),
            Param::Phi => f.write_str("phi"),
            Param::Cost(u) => write!(f, "cost:{u}"),
            Param::Threshold(x) => write!(f, "threshold:{x}"),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ParamGrid {
    axes: Vec<(Param, Vec<f64>)>,
    /// Prior weight per point; uniform when `None`.
    prior: Option<Vec<f64>>,
}

impl ParamGrid {
    pub fn new(axes: Vec<(Param, Vec<f64>)>) -> Result<Self> {
        if axes.is_empty() {
            return Err(RsaError::InvalidArgument("grid needs at least one axis".into()));
        }
        for (i, (p, values)) in axes.iter().enumerate() {
            if values.is_empty() {
                return Err(RsaError::InvalidArgument(format!("grid axis `{p}` is empty")));
            }
            if values.iter().any(|v| !v.is_finite()) {
                return Err(RsaError::InvalidArgument(format!(
                    "grid axis `{p}` has a non-finite value"
                )));
            }
            if axes[..i].iter().any(|(q, _)| q == p) {
                return Err(RsaError::InvalidArgument(format!("grid axis `{p}` repeated")));
            }
            let bad = match p {
                Param::Alpha | Param::Cost(_) => values.iter().any(|v| *v < 0.0),
                Param::Phi => values.iter().any(|v| !(0.0..=1.0).contains(v)),
                Param::Threshold(_) => false,
            };
            if bad {
                return Err(RsaError::InvalidArgument(format!("grid axis `{p}` out of range")));
            }
        }
        Ok(Self { axes, prior: None })
    }

    /// Evenly spaced `start, start + step, …` up to `stop` inclusive.
    pub fn range(start: f64, stop: f64, step: f64) -> Result<Vec<f64>> {
        if !(step > 0.0 && stop >= start) {
            return Err(RsaError::InvalidArgument(format!(
                "bad range {start}:{stop}:{step}"
            )));
        }
        let n = ((stop - start) / step + 1e-9).floor() as usize;
        Ok((0..=n).map(|i| start + i as f64 * step).collect())
    }

    /// Parses `name=v1,v2,...` or `name=start:stop:step`.
    pub fn parse_axis(text: &str) -> Result<(Param, Vec<f64>)> {
        let (name, values_text) = text
            .split_once('=')
            .ok_or_else(|| RsaError::InvalidArgument(format!("expected name=values, got `{text}`")))?;
        let param = Param::parse(name.trim())?;
        let num = |s: &str| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| RsaError::InvalidArgument(format!("not a number: `{s}`")))
        };
        let values = if values_text.contains(':') {
            let parts: Vec<&str> = values_text.split(':').collect();
            if parts.len() != 3 {
                return Err(RsaError::InvalidArgument(format!(
                    "expected start:stop:step, got `{values_text}`"
                )));
            }
            Self::range(num(parts[0])?, num(parts[1])?, num(parts[2])?)?
        } else {
            values_text.split(',').map(num).collect::<Result<_>>()?
        };
        Ok((param, values))
    }

    pub fn with_prior(mut self, weights: Vec<f64>) -> Result<Self> {
        if weights.len() != self.len() {
            return Err(RsaError::InvalidArgument(format!(
                "grid prior has {} weights for {} points",
                weights.len(),
                self.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite() || *w < 0.0) || weights.iter().sum::<f64>() <= 0.0 {
            return Err(RsaError::InvalidArgument(
                "grid prior must be non-negative with positive mass".into(),
            ));
        }
        self.prior = Some(weights);
        Ok(self)
    }

    pub fn axes(&self) -> &[(Param, Vec<f64>)] {
        &self.axes
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|(_, v)| v.len()).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Every point, first axis most significant.
    pub fn points(&self) -> Vec<Vec<f64>> {
        let mut out = vec![Vec::new()];
        for (_, values) in &self.axes {
            out = out
                .into_iter()
                .flat_map(|p| {
                    values.iter().map(move |v| {
                        let mut q = p.clone();
                        q.push(*v);
                        q
                    })
                })
                .collect();
        }
        out
    }

    fn log_prior(&self) -> Vec<f64> {
        match &self.prior {
            None => vec![-(self.len() as f64).ln(); self.len()],
            Some(w) => {
                let z: f64 = w.iter().sum();
                w.iter().map(|x| (x / z).ln()).collect()
            }
        }
    }
}

/// Applies one grid point to a scenario.
pub fn apply_point(scn: &Scenario, params: &[Param], point: &[f64]) -> Result<Scenario> {
    let mut out = scn.clone();
    for (p, v) in params.iter().zip(point) {
        out = match p {
            Param::Alpha => out.with_alpha(*v)?,
            Param::Cost(u) => out.with_cost(u, *v)?,
            Param::Threshold(name) => {
                let li = out
                    .latent_index(name)
                    .ok_or_else(|| RsaError::UnboundParameter(name.clone()))?;
                if out.latents()[li].kind != LatentKind::LexiconParameter {
                    return Err(RsaError::InvalidArgument(format!(
                        "`{name}` is not a lexicon-parameter latent"
                    )));
                }
                out.with_latent_fixed(name, &format_number(*v))?
            }
            Param::Phi => {
                let li = out
                    .latent_of_kind(LatentKind::GoalWeight)
                    .ok_or_else(|| RsaError::UnboundParameter("phi".into()))?;
                let name = out.latents()[li].name.clone();
                out.with_latent_fixed(&name, &format_number(*v))?
            }
        };
    }
    Ok(out)
}

/// Scenarios addressed by the `scenario` column of a dataset.
pub type ModelSet = BTreeMap<String, Scenario>;

#[derive(Debug, Clone, PartialEq)]
pub struct LogLikelihood {
    pub value: f64,
    /// Indices of trials whose response has model probability 0.
    pub impossible: Vec<usize>,
}

fn threshold_latents(scn: &Scenario) -> Vec<String> {
    scn.lexicon()
        .rows
        .iter()
        .filter_map(|r| match r {
            LexiconRow::Threshold(rule) => match &rule.parameter {
                ThresholdParam::Latent { name, .. } => Some(name.clone()),
                ThresholdParam::Constant(_) => None,
            },
            LexiconRow::Explicit(_) => None,
        })
        .collect()
}

/// `Σ count · log P(response | stimulus, condition)` at one grid point.
pub fn log_likelihood(
    models: &ModelSet,
    data: &BehavioralDataset,
    params: &[Param],
    point: &[f64],
) -> Result<LogLikelihood> {
    if params.len() != point.len() {
        return Err(RsaError::InvalidArgument(
            "point does not match parameters".into(),
        ));
    }
    let mut applied = BTreeMap::new();
    for (name, scn) in models {
        let relevant: Vec<(Param, f64)> = params
            .iter()
            .zip(point)
            .filter(|(p, _)| match p {
                Param::Cost(u) => scn.utterance_index(u).is_some(),
                Param::Threshold(x) => threshold_latents(scn).contains(x),
                Param::Phi => scn.latent_of_kind(LatentKind::GoalWeight).is_some(),
                Param::Alpha => true,
            })
            .map(|(p, v)| (p.clone(), *v))
            .collect();
        let (ps, vs): (Vec<Param>, Vec<f64>) = relevant.into_iter().unzip();
        applied.insert(name.clone(), apply_point(scn, &ps, &vs)?);
    }
    let chains = applied
        .iter()
        .map(|(name, scn)| Ok((name.as_str(), AgentChain::new(scn, scn.listener_depth())?)))
        .collect::<Result<BTreeMap<_, _>>>()?;

    let mut total = 0.0;
    let mut impossible = Vec::new();
    for (i, t) in data.trials.iter().enumerate() {
        let chain = chains
            .get(t.scenario.as_str())
            .ok_or_else(|| RsaError::UnknownLabel {
                kind: "scenario",
                name: t.scenario.clone(),
            })?;
        let scn = chain.scenario();
        let depth = scn.listener_depth();
        let condition = Assignment::parse(scn, &t.condition)?;
        let p = match t.query_kind {
            QueryKind::ListenerChoice => {
                scn.require_state(&t.response)?;
                match chain.listener(&t.stimulus, depth, &condition) {
                    Ok(j) => j.state_marginal().prob(&t.response),
                    Err(RsaError::ZeroPosterior { .. }) => 0.0,
                    Err(e) => return Err(e),
                }
            }
            QueryKind::SpeakerChoice => {
                scn.require_utterance(&t.response)?;
                match chain.speaker(&t.stimulus, &condition, depth) {
                    Ok(d) => d.prob(&t.response),
                    Err(RsaError::NoUsableUtterance { .. }) => 0.0,
                    Err(e) => return Err(e),
                }
            }
        };
        if p > 0.0 {
            total += t.count as f64 * p.ln();
        } else {
            impossible.push(i);
        }
    }
    Ok(LogLikelihood {
        value: if impossible.is_empty() {
            total
        } else {
            f64::NEG_INFINITY
        },
        impossible,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct PosteriorGrid {
    pub params: Vec<Param>,
    pub points: Vec<Vec<f64>>,
    pub log_prior: Vec<f64>,
    pub log_likelihood: Vec<f64>,
    pub posterior: Vec<f64>,
    /// `logsumexp(log prior + log likelihood)`, in nats.
    pub log_marginal: f64,
}

impl PosteriorGrid {
    /// Point with the highest posterior (earliest on ties).
    pub fn mode(&self) -> &[f64] {
        let mut best = 0;
        for (i, p) in self.posterior.iter().enumerate() {
            if *p > self.posterior[best] {
                best = i;
            }
        }
        &self.points[best]
    }

    /// Posterior marginal of one parameter, as `(value, probability)` pairs.
    pub fn marginal(&self, param: &Param) -> Option<Vec<(f64, f64)>> {
        let j = self.params.iter().position(|p| p == param)?;
        let mut out: Vec<(f64, f64)> = Vec::new();
        for (pt, p) in self.points.iter().zip(&self.posterior) {
            match out.iter_mut().find(|(v, _)| *v == pt[j]) {
                Some(e) => e.1 += p,
                None => out.push((pt[j], *p)),
            }
        }
        Some(out)
    }

    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header: Vec<String> = self.params.iter().map(|p| p.to_string()).collect();
        header.push("posterior".into());
        header.push("log_likelihood".into());
        w.write_record(&header).expect("in-memory write");
        for ((pt, post), ll) in self.points.iter().zip(&self.posterior).zip(&self.log_likelihood) {
            let mut row: Vec<String> = pt.iter().map(|v| v.to_string()).collect();
            row.push(post.to_string());
            row.push(ll.to_string());
            w.write_record(&row).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv is utf-8")
    }

    /// Sidecar metadata: log marginal likelihood and the grid axes.
    pub fn metadata_json(&self, axes: &[(Param, Vec<f64>)]) -> String {
        let axes: Vec<serde_json::Value> = axes
            .iter()
            .map(|(p, v)| json!({"name": p.to_string(), "values": v}))
            .collect();
        let doc = json!({
            "axes": axes,
            "log_marginal_likelihood": self.log_marginal,
            "mode": self.mode(),
            "points": self.points.len(),
        });
        let mut s = serde_json::to_string_pretty(&doc).expect("metadata serializes");
        s.push('\n');
        s
    }

    /// Writes `path` (CSV) and `path` with a `.json` extension.
    pub fn export(&self, axes: &[(Param, Vec<f64>)], path: &Path) -> Result<()> {
        std::fs::write(path, self.to_csv())?;
        std::fs::write(path.with_extension("json"), self.metadata_json(axes))?;
        Ok(())
    }
}

/// Posterior over grid points given the data.
pub fn grid_posterior(
    models: &ModelSet,
    data: &BehavioralDataset,
    grid: &ParamGrid,
) -> Result<PosteriorGrid> {
    grid_posterior_with_budget(models, data, grid, DEFAULT_GRID_BUDGET)
}

pub fn grid_posterior_with_budget(
    models: &ModelSet,
    data: &BehavioralDataset,
    grid: &ParamGrid,
    budget: usize,
) -> Result<PosteriorGrid> {
    if grid.len() > budget {
        return Err(RsaError::BudgetExceeded {
            size: grid.len() as u128,
            budget: budget as u128,
        });
    }
    let params: Vec<Param> = grid.axes.iter().map(|(p, _)| p.clone()).collect();
    let points = grid.points();
    let lls: Vec<f64> = par::map(&points, |pt| {
        log_likelihood(models, data, &params, pt).map(|l| l.value)
    })
    .into_iter()
    .collect::<Result<_>>()?;
    let log_prior = grid.log_prior();
    let joint: Vec<f64> = log_prior.iter().zip(&lls).map(|(p, l)| p + l).collect();
    let log_marginal = log_sum_exp(&joint);
    if log_marginal == f64::NEG_INFINITY {
        return Err(RsaError::AllPointsImpossible);
    }
    let posterior = joint.iter().map(|j| (j - log_marginal).exp()).collect();
    Ok(PosteriorGrid {
        params,
        points,
        log_prior,
        log_likelihood: lls,
        posterior,
        log_marginal,
    })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BayesFactor {
    /// `exp(log_z_a - log_z_b)`; may overflow to infinity.
    pub bf: f64,
    pub log_bf: f64,
    pub log_z_a: f64,
    pub log_z_b: f64,
}

pub fn bayes_factor(
    model_a: (&ModelSet, &ParamGrid),
    model_b: (&ModelSet, &ParamGrid),
    data: &BehavioralDataset,
) -> Result<BayesFactor> {
    let a = grid_posterior(model_a.0, data, model_a.1)?;
    let b = grid_posterior(model_b.0, data, model_b.1)?;
    let log_bf = a.log_marginal - b.log_marginal;
    Ok(BayesFactor {
        bf: log_bf.exp(),
        log_bf,
        log_z_a: a.log_marginal,
        log_z_b: b.log_marginal,
    })
}
