//! Stochastic SIR epidemics on graphs.
//!
//! The crate is `no_std` and only needs `alloc`. It contains:
//!
//! * [`graph`]: immutable simple graphs, random regular generation, distance
//!   balls, bridge detection and local tree diagnostics.
//! * [`sir`]: exact samplers for the SIR continuous-time Markov chain on finite
//!   graphs (event-queue and aggregate-rate engines) and on lazily grown
//!   infinite trees.
//! * [`estimator`]: the truncated cross-infection law, its closed-form
//!   statistics and the bridge-based estimator of the infection and recovery
//!   rates from observed infection times.
//! * [`branching`]: the Galton–Watson offspring law induced by SIR on trees,
//!   extinction probabilities and bounds, and a first-passage experiment.
//! * [`meanfield`]: the mean-field ODE on the complete graph, early-time
//!   exponential fitting and the confounding of rates it implies.
//!
//! All randomness flows through [`rng::SimRng`] streams derived from a master
//! seed, so results never depend on how trials are scheduled.
#![no_std]

extern crate alloc;

pub mod branching;
pub mod estimator;
pub mod graph;
pub mod meanfield;
pub mod rng;
pub mod sir;

pub use estimator::{BreakReason, CiParams, EstimateOutcome};
pub use graph::{Graph, Radius, SubgraphView};
pub use rng::SimRng;
pub use sir::{SirParams, Stamp, Trajectory};
