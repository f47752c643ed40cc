//! Computational documents: load, prepare, execute, serialize.
//!
//! A computational document is an XML file whose root is
//! `sem:computationalDocument`. It mixes data (CML molecules, forcefield
//! tables, dictionaries), mathematics (Content MathML under
//! `sem:functionalForm`) and control elements (`sem:variable`, `sem:editor`,
//! `sem:computation`, `sem:assert`, `sem:writer`). The pipeline runs fixed
//! stages in order:
//!
//! 1. `resolve_symbols` - `${name}` substitution from `sem:variable`
//! 2. `transclude` - splice `@href` references, recording provenance
//! 3. `resolve_symbols` again - variables arriving with transcluded content
//! 4. `apply_edits` - `sem:editor` copy/move/delete/transform operations
//! 5. `decorate` - promote molecules, forcefields, dictionaries to objects
//! 6. `check_integrity` - static findings (selectors, bindings, dimensions)
//! 7. `run_computations` - evaluate each `sem:computation`, attach results
//! 8. `run_asserts` - compare against expected scalars or golden files
//! 9. `write_outputs` - serialize `sem:writer` targets to files
//!
//! Every stage is deterministic and the preparation stages are idempotent,
//! so the serialized result of a run is a complete, re-runnable record of
//! the computation.

mod objects;
mod prepare;
mod run;

pub use objects::{base_context, DocObj};
pub use prepare::{
    apply_edits, resolve_symbols, transclude, Fetched, FileResolver, HrefResolver,
};
pub use run::{
    check_integrity, run_asserts, run_computations, write_outputs, AssertReport, AssertResult,
    ComputationRecord, IntegrityReport, OptOverrides, OptimizeTrace, RunLog,
};

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use crate::chem::{Molecule, CML_NS};
use crate::forcefield::ForcefieldParams;
use crate::mathml::{DictionarySet, EvalError, ObjectHandle, MATHML_NS};
use crate::optimizer::OptError;
use crate::xml::{parse_document, Document, NodeId};

/// Namespace of the control vocabulary.
pub const SEM_NS: &str = "urn:mathdoc:semantics";

/// Fixed prefixes available inside every selector in a document, regardless
/// of the prefixes the document itself declares.
pub fn selector_prefixes() -> HashMap<String, String> {
    HashMap::from([
        ("sem".to_string(), SEM_NS.to_string()),
        ("cml".to_string(), CML_NS.to_string()),
        ("m".to_string(), MATHML_NS.to_string()),
    ])
}

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error("cannot read {path}: {detail}")]
    Io { path: String, detail: String },
    #[error("cannot parse {path}: {detail}")]
    Parse { path: String, detail: String },
    #[error("{path} is not a computational document (root is {found})")]
    NotComputational { path: String, found: String },
    #[error("undefined variable `{name}` referenced at {location}")]
    UndefinedVariable { name: String, location: String },
    #[error("variable definitions form a cycle: {chain}")]
    VariableCycle { chain: String },
    #[error("variable `{name}` is defined more than once")]
    DuplicateVariable { name: String },
    #[error("unterminated `${{` in {location}")]
    UnterminatedVariable { location: String },
    #[error("sem:variable at {location} needs name and value attributes")]
    BadVariable { location: String },
    #[error("@href on a document root is not supported ({location})")]
    RootHref { location: String },
    #[error("cannot fetch {href}: {detail}")]
    Fetch { href: String, detail: String },
    #[error("remote reference {href} requires --allow-remote")]
    RemoteDisabled { href: String },
    #[error("inclusion cycle: {chain}")]
    IncludeCycle { chain: String },
    #[error("inclusion depth exceeds {limit}")]
    IncludeDepth { limit: usize },
    #[error("editor operation failed: {0}")]
    Edit(String),
    #[error("selector `{source_text}`: {detail}")]
    Selector { source_text: String, detail: String },
    #[error("cannot decorate {location}: {detail}")]
    Decorate { location: String, detail: String },
    #[error("cannot parse MathML at {location}: {detail}")]
    Math { location: String, detail: String },
    #[error("{label}: {detail}")]
    Computation { label: String, detail: String },
    #[error("{label} on {target}: {source}")]
    Eval { label: String, target: String, source: EvalError },
    #[error("{label}: result is not finite ({value:?}); refusing to attach it")]
    NonFinite { label: String, value: f64 },
    #[error("{label}: {source}")]
    Optimizer { label: String, source: OptError },
    #[error("assert at {location}: {detail}")]
    Assert { location: String, detail: String },
    #[error("cannot write {path}: {detail}")]
    Write { path: String, detail: String },
}

/// A decorated node: the domain object promoted from an XML subtree.
#[derive(Debug, Clone)]
pub enum Decoration {
    Molecule(Arc<Molecule>),
    Forcefield(Arc<ForcefieldParams>),
}

impl Decoration {
    /// Evaluation-facing handle for this object.
    pub fn handle(&self) -> ObjectHandle {
        match self {
            Decoration::Molecule(m) => ObjectHandle::new(DocObj::Molecule(m.clone())),
            Decoration::Forcefield(p) => ObjectHandle::new(DocObj::Forcefield(p.clone())),
        }
    }

    pub fn as_molecule(&self) -> Option<&Arc<Molecule>> {
        match self {
            Decoration::Molecule(m) => Some(m),
            Decoration::Forcefield(_) => None,
        }
    }
}

/// A loaded computational document plus everything derived from it.
pub struct CompDoc {
    pub doc: Document,
    /// Absolute location of the source file; base for relative hrefs and
    /// golden-file paths.
    pub path: PathBuf,
    /// Built-in dictionaries plus any the document carries.
    pub dicts: Arc<DictionarySet>,
    /// Populated by `decorate`.
    pub decorations: HashMap<NodeId, Decoration>,
}

impl CompDoc {
    /// Wraps an already-parsed tree; `path` anchors relative references.
    pub fn new(doc: Document, path: PathBuf) -> Result<CompDoc, PipelineError> {
        let root = doc.root();
        let name = doc.name(root).expect("root is an element");
        if !name.matches(Some(SEM_NS), "computationalDocument") {
            return Err(PipelineError::NotComputational {
                path: path.display().to_string(),
                found: name.as_str(),
            });
        }
        Ok(CompDoc {
            doc,
            path,
            dicts: Arc::new(DictionarySet::core()),
            decorations: HashMap::new(),
        })
    }

    pub fn serialize(&self) -> String {
        crate::xml::serialize_document(&self.doc)
    }
}

pub fn load_document(path: &Path) -> Result<CompDoc, PipelineError> {
    let display = path.display().to_string();
    let content = std::fs::read_to_string(path)
        .map_err(|e| PipelineError::Io { path: display.clone(), detail: e.to_string() })?;
    let abs = std::fs::canonicalize(path)
        .map_err(|e| PipelineError::Io { path: display.clone(), detail: e.to_string() })?;
    let doc = parse_document(&content)
        .map_err(|e| PipelineError::Parse { path: display, detail: e.to_string() })?;
    CompDoc::new(doc, abs)
}

/// Parses a document from a string, anchored at `path` for relative
/// references (the file itself need not exist).
pub fn load_document_str(content: &str, path: &Path) -> Result<CompDoc, PipelineError> {
    let doc = parse_document(content).map_err(|e| PipelineError::Parse {
        path: path.display().to_string(),
        detail: e.to_string(),
    })?;
    CompDoc::new(doc, path.to_path_buf())
}

/// Promotes every molecule, forcefield and dictionary subtree to a live
/// object. Dictionaries load first so forcefield units can resolve through
/// document-local entries. Rebuilds the decoration map from scratch, so the
/// stage is idempotent.
pub fn decorate(cd: &mut CompDoc) -> Result<(), PipelineError> {
    let mut dicts = DictionarySet::core();
    let root = cd.doc.root();
    for el in cd.doc.element_descendants_or_self(root) {
        let name = cd.doc.name(el).unwrap();
        if name.matches(Some(CML_NS), "dictionary") {
            let d = crate::mathml::dict::dictionary_from_node(&cd.doc, el).map_err(|e| {
                PipelineError::Decorate {
                    location: cd.doc.node_path(el),
                    detail: e.to_string(),
                }
            })?;
            dicts.add(d).map_err(|e| PipelineError::Decorate {
                location: cd.doc.node_path(el),
                detail: e.to_string(),
            })?;
        }
    }
    let dicts = Arc::new(dicts);

    let mut decorations = HashMap::new();
    for el in cd.doc.element_descendants_or_self(root) {
        let name = cd.doc.name(el).unwrap();
        if name.matches(Some(CML_NS), "molecule") && !inside_molecule(&cd.doc, el) {
            let m = crate::chem::molecule_from_node(&cd.doc, el).map_err(|e| {
                PipelineError::Decorate {
                    location: cd.doc.node_path(el),
                    detail: e.to_string(),
                }
            })?;
            decorations.insert(el, Decoration::Molecule(Arc::new(m)));
        } else if name.matches(Some(CML_NS), "cml")
            && cd.doc.attr(el, "convention") == Some("forcefield")
        {
            let p = crate::forcefield::forcefield_from_node(&cd.doc, el, &dicts).map_err(
                |e| PipelineError::Decorate {
                    location: cd.doc.node_path(el),
                    detail: e.to_string(),
                },
            )?;
            decorations.insert(el, Decoration::Forcefield(Arc::new(p)));
        }
    }
    cd.dicts = dicts;
    cd.decorations = decorations;
    Ok(())
}

fn inside_molecule(doc: &Document, el: NodeId) -> bool {
    let mut cur = doc.parent(el);
    while let Some(p) = cur {
        if doc.name(p).is_some_and(|n| n.matches(Some(CML_NS), "molecule")) {
            return true;
        }
        cur = doc.parent(p);
    }
    false
}

/// Runs the preparation stages in order: symbols, transclusion, symbols
/// again (for variables that arrived with included content), edits,
/// decoration.
pub fn prepare(cd: &mut CompDoc, resolver: &dyn HrefResolver) -> Result<(), PipelineError> {
    prepare::resolve_symbols_deferring(cd)?;
    transclude(cd, resolver)?;
    resolve_symbols(cd)?;
    apply_edits(cd)?;
    decorate(cd)
}
