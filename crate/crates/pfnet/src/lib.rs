//! Analysis of product-form stochastic Petri nets.
//!
//! The crate handles layered ("Π³") nets in their closed form and in their
//! open form, where one top-layer place is deleted and acts as an implicit
//! source and sink of tokens. For such nets it
//!
//! * validates the structural class (bag graph, witnesses, layers),
//! * decides liveness, reachability, boundedness and ergodicity through
//!   linear invariants and threshold conditions,
//! * computes the exact normalizing constant and steady-state probabilities
//!   by dynamic programming over exact rationals,
//! * and cross-checks everything against brute-force oracles (state-space
//!   enumeration, direct stationary solves, certified truncation brackets and
//!   Gillespie simulation).
//!
//! Every quantitative value is an exact [`rational::Q`].

pub mod bags;
pub mod ergodicity;
pub mod fixtures;
pub mod linalg;
pub mod model;
pub mod net;
pub mod normalizer;
pub mod oracle;
pub mod qualitative;
pub mod rational;
pub mod stochastic;

pub use bags::{BagGraph, Pi3Structure, WitnessTable};
pub use model::Model;
pub use net::{Marking, Mode, NetFile, PetriNet, RateTable};
pub use rational::Q;
