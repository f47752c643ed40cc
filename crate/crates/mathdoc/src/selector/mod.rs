//! A small XPath-like path language for selecting nodes and values.
//!
//! The grammar covers what the documents actually use and nothing more:
//!
//! ```text
//! selector  := ('.' | '//' | '/')? step (('/' | '//') step)*
//! step      := nametest predicate*  |  '@' qname        (terminal only)
//! nametest  := qname
//! predicate := '[' term (' and ' term)* ']'
//! term      := '@' qname '=' quoted  |  nametest predicate*
//! ```
//!
//! A leading `.` (or nothing) anchors at the given node, `/` at the document
//! root, `//` at the root searching the whole tree. `a//b` takes descendants.
//! Name tests resolve their prefixes against a namespace map at compile
//! time, so an unbound prefix fails before any document is touched. There
//! are no positional predicates, no functions and no parent axis.

use crate::xml::{Document, NodeId};
use std::collections::HashMap;

#[derive(Debug, Clone, thiserror::Error)]
#[error("selector syntax error at offset {offset}: {msg}")]
pub struct SelectorError {
    pub msg: String,
    pub offset: usize,
}

fn err<T>(msg: impl Into<String>, offset: usize) -> Result<T, SelectorError> {
    Err(SelectorError { msg: msg.into(), offset })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Axis {
    /// Name-test the context node itself (first step of an absolute path).
    SelfNode,
    Child,
    /// `a//b`: proper descendants of the context.
    Descendant,
    /// Leading `//`: the context node and everything below it.
    DescendantOrSelf,
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct NameTest {
    ns: Option<String>,
    local: String,
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Pred {
    AttrEquals { ns: Option<String>, local: String, value: String },
    /// `[m:sin]` and friends: a child element matching test and predicates.
    HasChild { test: NameTest, preds: Vec<Pred> },
}

#[derive(Debug, Clone, PartialEq, Eq)]
struct Step {
    axis: Axis,
    test: NameTest,
    preds: Vec<Pred>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Anchor {
    Here,
    Root,
    RootSubtree,
}

/// A compiled selector. Compiling is pure; applying one never mutates the
/// tree, so a selector can be reused across documents and runs.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Selector {
    anchor: Anchor,
    steps: Vec<Step>,
    attr: Option<NameTest>,
    source: String,
}

pub fn compile_selector(
    path: &str,
    ns: &HashMap<String, String>,
) -> Result<Selector, SelectorError> {
    Parser { src: path, pos: 0, ns }.selector()
}

impl Selector {
    /// The text this selector was compiled from.
    pub fn source(&self) -> &str {
        &self.source
    }

    /// True when the selector ends in `@attr` and therefore selects strings.
    pub fn is_attribute(&self) -> bool {
        self.attr.is_some()
    }

    /// Matching element nodes in document order, without duplicates. For an
    /// attribute selector these are the elements carrying the attribute.
    pub fn select(&self, doc: &Document, start: NodeId) -> Vec<NodeId> {
        let mut contexts = match self.anchor {
            Anchor::Here => vec![start],
            Anchor::Root | Anchor::RootSubtree => vec![doc.root()],
        };
        for step in &self.steps {
            contexts = apply_step(doc, &contexts, step);
            if contexts.is_empty() {
                break;
            }
        }
        if let Some(a) = &self.attr {
            contexts.retain(|n| doc.attr_ns(*n, a.ns.as_deref(), &a.local).is_some());
        }
        let order = doc.order_index();
        contexts.sort_by_key(|n| order[n]);
        contexts.dedup();
        contexts
    }

    /// String results: attribute values for `@attr` selectors, otherwise the
    /// text content of each selected element.
    pub fn select_values(&self, doc: &Document, start: NodeId) -> Vec<String> {
        let nodes = self.select(doc, start);
        match &self.attr {
            Some(a) => nodes
                .iter()
                .map(|n| doc.attr_ns(*n, a.ns.as_deref(), &a.local).unwrap().to_owned())
                .collect(),
            None => nodes.iter().map(|n| doc.text_content(*n)).collect(),
        }
    }
}

fn apply_step(doc: &Document, contexts: &[NodeId], step: &Step) -> Vec<NodeId> {
    let mut out = Vec::new();
    for &c in contexts {
        match step.axis {
            Axis::SelfNode => {
                if node_matches(doc, c, &step.test, &step.preds) {
                    out.push(c);
                }
            }
            Axis::Child => {
                out.extend(
                    doc.child_elements(c)
                        .filter(|n| node_matches(doc, *n, &step.test, &step.preds)),
                );
            }
            Axis::Descendant => {
                out.extend(
                    doc.element_descendants_or_self(c)
                        .into_iter()
                        .filter(|n| *n != c)
                        .filter(|n| node_matches(doc, *n, &step.test, &step.preds)),
                );
            }
            Axis::DescendantOrSelf => {
                out.extend(
                    doc.element_descendants_or_self(c)
                        .into_iter()
                        .filter(|n| node_matches(doc, *n, &step.test, &step.preds)),
                );
            }
        }
    }
    out
}

fn node_matches(doc: &Document, node: NodeId, test: &NameTest, preds: &[Pred]) -> bool {
    let Some(name) = doc.name(node) else { return false };
    if name.local != test.local || name.ns.as_deref() != test.ns.as_deref() {
        return false;
    }
    preds.iter().all(|p| pred_holds(doc, node, p))
}

fn pred_holds(doc: &Document, node: NodeId, pred: &Pred) -> bool {
    match pred {
        Pred::AttrEquals { ns, local, value } => {
            doc.attr_ns(node, ns.as_deref(), local) == Some(value.as_str())
        }
        Pred::HasChild { test, preds } => doc
            .child_elements(node)
            .any(|c| node_matches(doc, c, test, preds)),
    }
}

struct Parser<'a> {
    src: &'a str,
    pos: usize,
    ns: &'a HashMap<String, String>,
}

impl<'a> Parser<'a> {
    fn selector(mut self) -> Result<Selector, SelectorError> {
        if self.src.is_empty() {
            return err("empty selector", 0);
        }
        let anchor = if self.eat("//") {
            Anchor::RootSubtree
        } else if self.eat("/") {
            Anchor::Root
        } else if self.eat("./") {
            Anchor::Here
        } else if self.src == "." {
            self.pos = 1;
            return Ok(Selector {
                anchor: Anchor::Here,
                steps: vec![],
                attr: None,
                source: self.src.to_owned(),
            });
        } else {
            Anchor::Here
        };

        let mut steps = Vec::new();
        let mut attr = None;
        let mut first = true;
        loop {
            if self.peek() == Some('@') {
                self.pos += 1;
                let at = self.pos;
                let (ns, local) = self.qname()?;
                if !self.at_end() {
                    return err("`@attribute` must be the last step", self.pos);
                }
                if steps.is_empty() && anchor != Anchor::Here {
                    return err("`@attribute` needs an element step before it", at);
                }
                attr = Some(NameTest { ns, local });
                break;
            }

            let axis = if first {
                match anchor {
                    Anchor::Here => Axis::Child,
                    Anchor::Root => Axis::SelfNode,
                    Anchor::RootSubtree => Axis::DescendantOrSelf,
                }
            } else if self.eat("//") {
                Axis::Descendant
            } else if self.eat("/") {
                Axis::Child
            } else {
                return err(
                    format!("expected `/` or end of selector, found `{}`", self.rest_head()),
                    self.pos,
                );
            };
            first = false;

            // a separator may be followed by the attribute step
            if self.peek() == Some('@') {
                if axis != Axis::Child {
                    return err("`@attribute` only follows `/`", self.pos);
                }
                continue;
            }

            let (ns, local) = self.qname()?;
            let preds = self.predicates()?;
            steps.push(Step { axis, test: NameTest { ns, local }, preds });

            if self.at_end() {
                break;
            }
        }
        Ok(Selector { anchor, steps, attr, source: self.src.to_owned() })
    }

    fn predicates(&mut self) -> Result<Vec<Pred>, SelectorError> {
        let mut preds = Vec::new();
        while self.peek() == Some('[') {
            let open = self.pos;
            self.pos += 1;
            let mut terms = vec![self.term(open)?];
            loop {
                self.skip_ws();
                if self.eat("]") {
                    break;
                }
                if self.eat("and ") {
                    self.skip_ws();
                    terms.push(self.term(open)?);
                } else if self.at_end() {
                    return err("unterminated predicate", open);
                } else {
                    return err(
                        format!("expected `and` or `]`, found `{}`", self.rest_head()),
                        self.pos,
                    );
                }
            }
            // conjunction is just several predicates on the same node
            preds.extend(terms);
        }
        Ok(preds)
    }

    fn term(&mut self, open: usize) -> Result<Pred, SelectorError> {
        if self.at_end() {
            return err("unterminated predicate", open);
        }
        if self.eat("@") {
            let (ns, local) = self.qname()?;
            if !self.eat("=") {
                return err("attribute predicate needs `='value'`", self.pos);
            }
            let value = self.quoted()?;
            Ok(Pred::AttrEquals { ns, local, value })
        } else {
            let (ns, local) = self.qname()?;
            let preds = self.predicates()?;
            Ok(Pred::HasChild { test: NameTest { ns, local }, preds })
        }
    }

    fn quoted(&mut self) -> Result<String, SelectorError> {
        let quote = match self.peek() {
            Some(q @ ('\'' | '"')) => q,
            _ => return err("expected a quoted string", self.pos),
        };
        let start = self.pos;
        self.pos += 1;
        let body_start = self.pos;
        while let Some(c) = self.peek() {
            if c == quote {
                let value = self.src[body_start..self.pos].to_owned();
                self.pos += 1;
                return Ok(value);
            }
            self.pos += c.len_utf8();
        }
        err("unterminated string", start)
    }

    fn qname(&mut self) -> Result<(Option<String>, String), SelectorError> {
        let first = self.name()?;
        if self.peek() == Some(':') {
            self.pos += 1;
            let local = self.name()?;
            let uri = self.ns.get(&first).ok_or_else(|| SelectorError {
                msg: format!("unknown namespace prefix `{first}`"),
                offset: self.pos - first.len() - local.len() - 1,
            })?;
            Ok((Some(uri.clone()), local))
        } else {
            Ok((None, first))
        }
    }

    fn name(&mut self) -> Result<String, SelectorError> {
        let start = self.pos;
        let mut chars = self.src[self.pos..].char_indices();
        match chars.next() {
            Some((_, c)) if c.is_alphabetic() || c == '_' => {}
            _ => {
                return err(
                    format!("expected a name, found `{}`", self.rest_head()),
                    self.pos,
                )
            }
        }
        let mut end = self.src.len();
        for (i, c) in chars {
            if !(c.is_alphanumeric() || matches!(c, '_' | '-' | '.')) {
                end = start + i;
                break;
            }
        }
        self.pos = end;
        Ok(self.src[start..end].to_owned())
    }

    fn skip_ws(&mut self) {
        while self.peek() == Some(' ') {
            self.pos += 1;
        }
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.src[self.pos..].starts_with(s) {
            self.pos += s.len();
            true
        } else {
            false
        }
    }

    fn peek(&self) -> Option<char> {
        self.src[self.pos..].chars().next()
    }

    fn at_end(&self) -> bool {
        self.pos == self.src.len()
    }

    fn rest_head(&self) -> &str {
        let rest = &self.src[self.pos..];
        match rest.char_indices().nth(8) {
            Some((i, _)) => &rest[..i],
            None => rest,
        }
    }
}
