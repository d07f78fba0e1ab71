//! Infer IPv6 address assignment from activity logs and anonymize the
//! addresses behind k-anonymous prefix aggregates.
//!
//! Standard server logs show *activity* — an address at a timestamp — but
//! operators and researchers usually want *assignment*: how many addresses
//! or /64 prefixes were in use simultaneously, and how to publish logs
//! without exposing individual hosts. This crate closes that gap in three
//! moves:
//!
//! 1. [`classify`] decides which interface identifiers are plausibly
//!    pseudorandom (SLAAC privacy addresses), the precondition for any
//!    inference.
//! 2. [`activity`] bins activity into an interval matrix, bridges each
//!    plausible address from its first to its last observation, and turns
//!    the marks into provable lower bounds on simultaneous assignment —
//!    per interval and at the "fencepost" instants between intervals.
//! 3. [`aggregate`] merges the per-/64 assignment series up a binary
//!    prefix trie until every emitted prefix covers at least `k`
//!    simultaneously assigned /64s (or addresses); [`anonymize`] then
//!    truncates addresses to their longest matching aggregate.
//!
//! [`pipeline`] wires the steps together, [`render`] draws the matrices,
//! [`report`] produces summaries and length-distribution tables, and
//! [`synth`] generates ground-truth scenarios with a brute-force oracle so
//! the "lower bound" claim is machine-checked rather than asserted.
//!
//! The `kip` binary exposes the same steps as subcommands; the `examples/`
//! directory shows each capability on small, fully worked data.

pub mod activity;
pub mod addr;
pub mod aggregate;
pub mod anonymize;
pub mod classify;
pub mod error;
pub mod ingest;
pub mod pipeline;
pub mod render;
pub mod report;
pub mod synth;

pub use addr::{Address128, Prefix, TimeGrid};
pub use error::{Error, Result};
