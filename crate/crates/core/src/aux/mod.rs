//! Attacks outside the regression framework: the time-memory trade-off and the attack on
//! structured sketches.

pub mod rotation;
pub mod tmto;

pub use rotation::{rotation_attack, structured_sketch, StructuredSketch};
pub use tmto::{tmto_attack, tmto_cost, TmtoConfig, TmtoCost, TmtoOutcome};
