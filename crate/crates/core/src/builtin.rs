//! Scenarios compiled into the library. The same files ship in the
//! repository's `scenarios/` directory.

use crate::error::{Result, RsaError};
use crate::scenario::{load_scenario, Scenario};

const BUILTIN: &[(&str, &str)] = &[
    ("refgame", include_str!("../../../scenarios/refgame.json")),
    (
        "scalar-some-all",
        include_str!("../../../scenarios/scalar-some-all.json"),
    ),
    (
        "scalar-some-all-partial",
        include_str!("../../../scenarios/scalar-some-all-partial.json"),
    ),
    ("hyperbole", include_str!("../../../scenarios/hyperbole.json")),
    (
        "adjective-threshold",
        include_str!("../../../scenarios/adjective-threshold.json"),
    ),
    ("politeness", include_str!("../../../scenarios/politeness.json")),
    ("wonky-some", include_str!("../../../scenarios/wonky-some.json")),
];

pub fn names() -> impl Iterator<Item = &'static str> {
    BUILTIN.iter().map(|(n, _)| *n)
}

/// Raw document text of a built-in scenario.
pub fn source(name: &str) -> Option<&'static str> {
    BUILTIN.iter().find(|(n, _)| *n == name).map(|(_, s)| *s)
}

/// Parses and validates a built-in scenario.
pub fn scenario(name: &str) -> Result<Scenario> {
    let text = source(name).ok_or_else(|| RsaError::UnknownLabel {
        kind: "built-in scenario",
        name: name.to_string(),
    })?;
    load_scenario(text)
}
