//! Protocol DSL, exhaustive safety checking and runtime attestation for a
//! simulated high-bay warehouse (HBW).
//!
//! - [`protocol`]: the generic protocol language and its big-step evaluators.
//! - [`hbw`]: the warehouse instance (state, commands, propositions, spec term).
//! - [`verifier`]: exhaustive check of the protocol term over every warehouse state.
//! - [`attest`]: the trace decider, the streaming session monitor and trace files.
//! - [`schema`]: interface specs and Cap'n Proto generation.
//! - [`sim`]: TCP services for client, controller, driver and attestation proxy.
//! - [`bench`]: closed-loop latency benchmark.
//!
//! The `examples/` directory has one runnable program per capability.

pub mod attest;
pub mod bench;
pub mod hbw;
pub mod protocol;
pub mod schema;
pub mod sim;
pub mod verifier;
