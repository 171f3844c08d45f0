//! Event-level simulation and statistical analysis of energy-time
//! entanglement (Franson-type) Bell tests.
//!
//! The crate covers the whole chain from hidden variables and quantum
//! predictions to time-tagged detections, coincidence postselection, Bell
//! statistics with model-class dependent bounds, and numerical checks of
//! those bounds over local strategy spaces.
//!
//! | module | contents |
//! |---|---|
//! | [`setting`], [`chain`], [`random`] | shared value types, settings chains, counter-based randomness |
//! | [`quantum`] | closed-form predictions and an exact event sampler |
//! | [`lhv`] | local strategies, the delay-based postselection model, quadrature |
//! | [`timing`] | timestamps, coincidence window, apparent efficiency |
//! | [`inequalities`] | correlation tables, Bell statistics, bounds, verdicts |
//! | [`experiment`] | batch runners producing correlation tables |
//! | [`strategyopt`] | vertex enumeration and mixed-strategy optimization |
//! | [`spacetime`] | causal-ordering checks for the emission-time premise |
//! | [`setups`] | modified interferometer layouts |

// `!(x > 0.0)` style checks also reject NaN
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod chain;
pub mod error;
pub mod experiment;
pub mod inequalities;
pub mod lhv;
pub mod quantum;
pub mod random;
pub mod setting;
pub mod setups;
pub mod spacetime;
pub mod strategyopt;
pub mod tally;
pub mod timing;

pub use chain::{chain_settings, ChainTerm, SettingsChain, TermSign};
pub use error::{Error, Result};
pub use random::RandomSource;
pub use setting::{DelayClass, HiddenVariable, OutcomeValue, Setting, Site};
