//! Engine for executable scientific XML documents.
//!
//! A document in this system carries its own data (molecules in CML), its own
//! mathematics (content MathML), and the wiring between them (a small `sem:`
//! control vocabulary for transclusion, symbol substitution, edits,
//! computations, assertions and outputs). The crate provides:
//!
//! - [`xml`]: a minimal XML DOM with stable node identity and a canonical
//!   serializer (sorted attributes, two-space indent, byte-stable round-trip);
//! - [`mathml`]: a content-MathML subset compiled to an AST and evaluated
//!   against immutable contexts with dimension-checked arithmetic;
//! - [`selector`]: a compiled XPath-like subset used everywhere a document
//!   points at nodes;
//! - [`chem`]: CML molecule I/O, geometry, and interaction-set enumeration;
//! - [`forcefield`]: an AMBER-style energy function with parameter files in
//!   CML property lists;
//! - [`optimizer`]: deterministic derivative-free pattern search;
//! - [`docpipe`]: the document pipeline that ties the above together;
//! - [`cli`]: the `mathdoc` command-line front end.

pub mod chem;
pub mod cli;
pub mod docpipe;
pub mod forcefield;
pub mod mathml;
pub mod optimizer;
pub mod selector;
pub mod xml;
