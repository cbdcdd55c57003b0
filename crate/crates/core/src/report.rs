//! Labelled tables and the reference-game figure.

use crate::agents::AgentChain;
use crate::builtin;
use crate::error::Result;
use crate::scenario::Assignment;

/// A matrix of probabilities with row and column labels.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub corner: String,
    pub columns: Vec<String>,
    pub rows: Vec<(String, Vec<f64>)>,
}

impl Table {
    pub fn row(&self, label: &str) -> Option<&[f64]> {
        self.rows
            .iter()
            .find(|(l, _)| l == label)
            .map(|(_, v)| v.as_slice())
    }

    /// CSV with shortest round-trip numbers.
    pub fn to_csv(&self) -> String {
        let mut w = csv::Writer::from_writer(Vec::new());
        let mut header = vec![self.corner.clone()];
        header.extend(self.columns.iter().cloned());
        w.write_record(&header).expect("in-memory write");
        for (label, values) in &self.rows {
            let mut rec = vec![label.clone()];
            rec.extend(values.iter().map(|v| v.to_string()));
            w.write_record(&rec).expect("in-memory write");
        }
        String::from_utf8(w.into_inner().expect("in-memory write")).expect("csv is utf-8")
    }
}

/// The three computed panels of the reference-game figure.
#[derive(Debug, Clone, PartialEq)]
pub struct Figure1 {
    /// `L0(s | u)`, one row per utterance.
    pub panel_b: Table,
    /// `S1(u | s)` at α = 1, one row per state.
    pub panel_c: Table,
    /// `L1(s | u)`, one row per utterance.
    pub panel_d: Table,
}

impl Figure1 {
    pub fn panels(&self) -> [(&'static str, &Table); 3] {
        [("B", &self.panel_b), ("C", &self.panel_c), ("D", &self.panel_d)]
    }
}

/// Evaluates the built-in reference game with flat priors and α = 1.
/// Utterances that no listener can interpret get an all-zero row.
pub fn reproduce_figure1() -> Result<Figure1> {
    let scn = builtin::scenario("refgame")?.with_alpha(1.0)?;
    let chain = AgentChain::new(&scn, 1)?;
    let none = Assignment::empty(&scn);
    let states = scn.state_ids();
    let utterances = scn.utterance_ids();

    let mut b = Vec::new();
    let mut d = Vec::new();
    for u in &utterances {
        b.push((u.clone(), chain.literal_listener(u, &none)?.probs().to_vec()));
        let l1 = chain.listener(u, 1, &none)?.state_marginal();
        d.push((u.clone(), l1.probs().to_vec()));
    }
    let mut c = Vec::new();
    for s in &states {
        c.push((s.clone(), chain.speaker(s, &none, 1)?.probs().to_vec()));
    }
    Ok(Figure1 {
        panel_b: Table {
            corner: "utterance".into(),
            columns: states.clone(),
            rows: b,
        },
        panel_c: Table {
            corner: "state".into(),
            columns: utterances,
            rows: c,
        },
        panel_d: Table {
            corner: "utterance".into(),
            columns: states,
            rows: d,
        },
    })
}
