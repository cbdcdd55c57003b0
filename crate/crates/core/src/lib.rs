//! Rational Speech Act inference.
//!
//! Scenarios are declared as data ([`scenario`]), evaluated by a tower of
//! recursive speaker and listener agents ([`agents`]) either exactly or by
//! seeded sampling ([`inference`]), and fitted to forced-choice data
//! ([`analysis`]).

pub mod agents;
pub mod analysis;
pub mod builtin;
pub mod dist;
pub mod error;
pub mod inference;
mod par;
pub mod report;
pub mod scenario;

pub use agents::{AgentChain, JointPosterior};
pub use dist::{Categorical, LogWeights};
pub use error::{ErrorClass, Result, RsaError};
pub use par::is_parallel;
pub use scenario::{
    load_scenario, parse_scenario, validate_scenario, Assignment, Diagnostic, Scenario, SpeakerKind,
};
