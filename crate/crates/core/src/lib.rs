//! Bayesian adaptive clinical trial engine.
//!
//! Models are written in a JAGS-subset language ([`dsl`]), unrolled against a
//! dataset into a directed graphical model ([`graph`]), sampled with adaptive
//! Metropolis-within-Gibbs ([`inference`]), and driven through multi-stage
//! trial simulations ([`design`], [`simulator`]).

pub mod design;
pub mod distributions;
pub mod dsl;
pub mod graph;
pub mod inference;
pub mod rng;
pub mod simulator;
