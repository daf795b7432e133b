//! Compliance test-case synthesis and grading for tool-calling agents.
//!
//! The pipeline has three stages, each also exposed as a `complygen` CLI
//! subcommand:
//!
//! 1. **Oracle construction** ([`ingest`]): policy text plus the API schema
//!    go through a text-completion client (offline replay supported); the
//!    structured reply is filtered by scope alignment, deduplication, and a
//!    deterministic signature validator into grounded [`ltl::SafetyOracle`]s.
//! 2. **Trace synthesis** ([`fuzzer`]): a seeded depth-first search with
//!    dual-constraint pruning (schema preconditions + an incremental LTL
//!    monitor) produces ground-truth traces that are executable and
//!    compliant by construction.
//! 3. **Test-case generation and grading** ([`testgen`], [`evaluator`]):
//!    safety-critical steps are masked out of each trace, instructions are
//!    synthesized from the remaining business actions, and candidate call
//!    scripts are graded by a dual oracle — functional state equivalence
//!    plus LTL satisfaction — into a four-class outcome taxonomy.
//!
//! [`coverage`] adds the two diversity metrics used to compare trace sets,
//! and [`schema`] and [`ltl`] hold the underlying models.

pub mod coverage;
pub mod evaluator;
pub mod fixtures;
pub mod fuzzer;
pub mod ingest;
pub mod ltl;
pub mod schema;
pub mod testgen;

pub mod cli;
