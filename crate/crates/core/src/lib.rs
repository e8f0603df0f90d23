//! Procedural graph toolkit.
//!
//! The crate models optimal procedural graphs (actions, paired gateways,
//! data/action constraints and the flows between them), converts them to and
//! from the line-oriented `Element -> (condition) Element` text that language
//! models read and write, turns graphs into documents through a
//! decompose / group / order / aggregate / smooth pipeline, scores extracted
//! graphs with BLEU-based soft matching, and verifies gateways for the
//! self-refine loop.
//!
//! Everything here is `no_std` + `alloc`. Model services (chat, NLI, NER,
//! predicate/object parsing) are reached through the traits in [`backends`];
//! the `procgraph` crate supplies HTTP and fixture-replay implementations.

#![no_std]
#![forbid(unsafe_code)]

extern crate alloc;

#[cfg(test)]
extern crate std;

pub mod assemble;
pub mod assign;
pub mod backends;
pub mod decompose;
pub mod dotlang;
pub mod graph;
pub mod metrics;
pub mod refine;
mod text;

#[cfg(any(test, feature = "testgen"))]
pub mod testgen;

pub use graph::{
    Edge, EdgeKind, GatewayRole, GatewayType, Node, NodeId, NodeKind, ProceduralGraph,
    ValidationReport, Violation,
};
