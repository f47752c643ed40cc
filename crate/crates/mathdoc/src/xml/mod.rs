//! Minimal XML document model.
//!
//! The rest of the crate works on trees, not strings: node identity is a
//! stable [`NodeId`] into an arena that is never compacted, so handles stay
//! valid across mutations (detached subtrees simply become unreachable).
//!
//! The model is deliberately small: elements, text, attributes, namespaces.
//! Comments and the XML declaration are dropped at parse time; text nodes
//! consisting only of whitespace are dropped as well. Together with the
//! canonical serializer in [`ser`] (attributes sorted by name, two-space
//! indent, fixed escaping) this makes `serialize -> parse -> serialize`
//! byte-stable, which the document pipeline relies on for reproducibility.

mod parse;
mod ser;

pub use parse::parse_document;
pub use ser::{serialize_document, serialize_fragment};

use std::fmt;

/// Namespace URI implicitly bound to the `xml` prefix.
pub const XML_NS: &str = "http://www.w3.org/XML/1998/namespace";

/// Parse or well-formedness error with a 1-based source position.
#[derive(Debug, Clone, thiserror::Error)]
#[error("{line}:{col}: {msg}")]
pub struct XmlError {
    pub msg: String,
    pub line: u32,
    pub col: u32,
}

impl XmlError {
    pub(crate) fn new(msg: impl Into<String>, line: u32, col: u32) -> Self {
        XmlError { msg: msg.into(), line, col }
    }
}

/// Qualified name. Matching is on `(ns, local)`; `prefix` is kept so the
/// serializer can reproduce the document as written.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct QName {
    pub prefix: Option<String>,
    pub local: String,
    /// Resolved namespace URI, `None` for no namespace.
    pub ns: Option<String>,
}

impl QName {
    pub fn new(ns: Option<&str>, prefix: Option<&str>, local: &str) -> Self {
        QName {
            prefix: prefix.map(str::to_owned),
            local: local.to_owned(),
            ns: ns.map(str::to_owned),
        }
    }

    /// Name with no prefix and no namespace.
    pub fn plain(local: &str) -> Self {
        QName { prefix: None, local: local.to_owned(), ns: None }
    }

    pub fn matches(&self, ns: Option<&str>, local: &str) -> bool {
        self.ns.as_deref() == ns && self.local == local
    }

    /// Name as it appears in markup (`prefix:local` or `local`).
    pub fn as_str(&self) -> String {
        match &self.prefix {
            Some(p) => format!("{}:{}", p, self.local),
            None => self.local.clone(),
        }
    }
}

impl fmt::Display for QName {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.prefix {
            Some(p) => write!(f, "{}:{}", p, self.local),
            None => f.write_str(&self.local),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Attr {
    pub name: QName,
    pub value: String,
}

/// Stable handle to a node. Valid for the lifetime of its `Document`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct NodeId(u32);

impl NodeId {
    fn index(self) -> usize {
        self.0 as usize
    }
}

#[derive(Debug, Clone)]
pub struct ElementData {
    pub name: QName,
    attrs: Vec<Attr>,
    children: Vec<NodeId>,
    /// Start-tag position in the source this element was parsed from.
    pub pos: Option<(u32, u32)>,
}

#[derive(Debug, Clone)]
enum NodeKind {
    Element(ElementData),
    Text(String),
}

#[derive(Debug, Clone)]
struct Node {
    parent: Option<NodeId>,
    kind: NodeKind,
}

/// An XML document: an arena of nodes plus a root element.
#[derive(Debug, Clone)]
pub struct Document {
    nodes: Vec<Node>,
    root: NodeId,
}

impl Document {
    /// Fresh document with an empty root element.
    pub fn with_root(name: QName) -> Document {
        let root = Node {
            parent: None,
            kind: NodeKind::Element(ElementData {
                name,
                attrs: Vec::new(),
                children: Vec::new(),
                pos: None,
            }),
        };
        Document { nodes: vec![root], root: NodeId(0) }
    }

    pub fn root(&self) -> NodeId {
        self.root
    }

    /// Parser-internal: repoints the document root. The previous root (the
    /// parse placeholder) becomes unreachable, which the arena tolerates.
    pub(crate) fn set_root(&mut self, id: NodeId) {
        assert!(self.is_element(id) && self.parent(id).is_none());
        self.root = id;
    }

    /// Parser-internal: installs attributes and source position in one go.
    pub(crate) fn set_element_parts(
        &mut self,
        id: NodeId,
        attrs: Vec<Attr>,
        pos: (u32, u32),
    ) {
        let el = self.element_mut(id);
        el.attrs = attrs;
        el.pos = Some(pos);
    }

    fn node(&self, id: NodeId) -> &Node {
        &self.nodes[id.index()]
    }

    fn node_mut(&mut self, id: NodeId) -> &mut Node {
        &mut self.nodes[id.index()]
    }

    pub fn is_element(&self, id: NodeId) -> bool {
        matches!(self.node(id).kind, NodeKind::Element(_))
    }

    pub fn element(&self, id: NodeId) -> Option<&ElementData> {
        match &self.node(id).kind {
            NodeKind::Element(e) => Some(e),
            NodeKind::Text(_) => None,
        }
    }

    fn element_mut(&mut self, id: NodeId) -> &mut ElementData {
        match &mut self.node_mut(id).kind {
            NodeKind::Element(e) => e,
            NodeKind::Text(_) => panic!("node is not an element"),
        }
    }

    /// Text content if `id` is a text node.
    pub fn text(&self, id: NodeId) -> Option<&str> {
        match &self.node(id).kind {
            NodeKind::Text(t) => Some(t),
            NodeKind::Element(_) => None,
        }
    }

    pub fn name(&self, id: NodeId) -> Option<&QName> {
        self.element(id).map(|e| &e.name)
    }

    pub fn parent(&self, id: NodeId) -> Option<NodeId> {
        self.node(id).parent
    }

    pub fn children(&self, id: NodeId) -> &[NodeId] {
        match &self.node(id).kind {
            NodeKind::Element(e) => &e.children,
            NodeKind::Text(_) => &[],
        }
    }

    pub fn child_elements<'a>(&'a self, id: NodeId) -> impl Iterator<Item = NodeId> + 'a {
        self.children(id).iter().copied().filter(|&c| self.is_element(c))
    }

    /// First child element matching `(ns, local)`.
    pub fn find_child(&self, id: NodeId, ns: Option<&str>, local: &str) -> Option<NodeId> {
        self.child_elements(id)
            .find(|&c| self.element(c).unwrap().name.matches(ns, local))
    }

    pub fn attrs(&self, id: NodeId) -> &[Attr] {
        self.element(id).map(|e| e.attrs.as_slice()).unwrap_or(&[])
    }

    /// Attribute value by serialized name (`href`, `xmlns:cml`, ...).
    pub fn attr(&self, id: NodeId, name: &str) -> Option<&str> {
        self.attrs(id)
            .iter()
            .find(|a| a.name.as_str() == name)
            .map(|a| a.value.as_str())
    }

    /// Attribute value by namespace and local name.
    pub fn attr_ns(&self, id: NodeId, ns: Option<&str>, local: &str) -> Option<&str> {
        self.attrs(id)
            .iter()
            .find(|a| a.name.matches(ns, local))
            .map(|a| a.value.as_str())
    }

    pub fn set_attr(&mut self, id: NodeId, name: QName, value: impl Into<String>) {
        let value = value.into();
        let el = self.element_mut(id);
        match el.attrs.iter_mut().find(|a| a.name == name) {
            Some(a) => a.value = value,
            None => el.attrs.push(Attr { name, value }),
        }
    }

    pub fn remove_attr(&mut self, id: NodeId, name: &str) {
        let el = self.element_mut(id);
        el.attrs.retain(|a| a.name.as_str() != name);
    }

    pub fn set_name(&mut self, id: NodeId, name: QName) {
        self.element_mut(id).name = name;
    }

    /// Replaces the content of a text node. Panics on an element node.
    pub fn set_text(&mut self, id: NodeId, content: impl Into<String>) {
        match &mut self.node_mut(id).kind {
            NodeKind::Text(t) => *t = content.into(),
            NodeKind::Element(_) => panic!("set_text on an element node"),
        }
    }

    /// Concatenated text of all descendant text nodes.
    pub fn text_content(&self, id: NodeId) -> String {
        let mut out = String::new();
        self.collect_text(id, &mut out);
        out
    }

    fn collect_text(&self, id: NodeId, out: &mut String) {
        match &self.node(id).kind {
            NodeKind::Text(t) => out.push_str(t),
            NodeKind::Element(e) => {
                for &c in &e.children {
                    self.collect_text(c, out);
                }
            }
        }
    }

    pub fn create_element(&mut self, name: QName) -> NodeId {
        self.push(Node {
            parent: None,
            kind: NodeKind::Element(ElementData {
                name,
                attrs: Vec::new(),
                children: Vec::new(),
                pos: None,
            }),
        })
    }

    pub fn create_text(&mut self, content: impl Into<String>) -> NodeId {
        self.push(Node { parent: None, kind: NodeKind::Text(content.into()) })
    }

    fn push(&mut self, node: Node) -> NodeId {
        let id = NodeId(self.nodes.len() as u32);
        self.nodes.push(node);
        id
    }

    /// Appends a detached node as the last child of `parent`.
    pub fn append_child(&mut self, parent: NodeId, child: NodeId) {
        assert!(self.node(child).parent.is_none(), "child is attached");
        self.element_mut(parent).children.push(child);
        self.node_mut(child).parent = Some(parent);
    }

    /// Inserts a detached node among `parent`'s children at `index`.
    pub fn insert_child(&mut self, parent: NodeId, index: usize, child: NodeId) {
        assert!(self.node(child).parent.is_none(), "child is attached");
        self.element_mut(parent).children.insert(index, child);
        self.node_mut(child).parent = Some(parent);
    }

    /// Detaches `id` from its parent. The subtree stays alive and can be
    /// re-attached. Detaching the root is not allowed.
    pub fn detach(&mut self, id: NodeId) {
        let parent = self.node(id).parent.expect("cannot detach the root");
        let el = self.element_mut(parent);
        el.children.retain(|&c| c != id);
        self.node_mut(id).parent = None;
    }

    /// Replaces attached node `old` with detached node `new` at the same
    /// position.
    pub fn replace_node(&mut self, old: NodeId, new: NodeId) {
        assert!(self.node(new).parent.is_none(), "replacement is attached");
        let parent = self.node(old).parent.expect("cannot replace the root this way");
        let el = self.element_mut(parent);
        let idx = el.children.iter().position(|&c| c == old).unwrap();
        el.children[idx] = new;
        self.node_mut(new).parent = Some(parent);
        self.node_mut(old).parent = None;
    }

    /// Deep-copies a subtree from another document into this one.
    /// Returns the detached copy's root.
    pub fn import(&mut self, src: &Document, src_id: NodeId) -> NodeId {
        match &src.node(src_id).kind {
            NodeKind::Text(t) => self.create_text(t.clone()),
            NodeKind::Element(e) => {
                let copy = self.create_element(e.name.clone());
                self.element_mut(copy).attrs = e.attrs.clone();
                self.element_mut(copy).pos = e.pos;
                for &c in &e.children {
                    let cc = self.import(src, c);
                    self.append_child(copy, cc);
                }
                copy
            }
        }
    }

    /// Deep-copies a subtree within this document. Returns the detached copy.
    pub fn clone_subtree(&mut self, id: NodeId) -> NodeId {
        match self.node(id).kind.clone() {
            NodeKind::Text(t) => self.create_text(t),
            NodeKind::Element(e) => {
                let copy = self.create_element(e.name.clone());
                self.element_mut(copy).attrs = e.attrs.clone();
                for c in e.children {
                    let cc = self.clone_subtree(c);
                    self.append_child(copy, cc);
                }
                copy
            }
        }
    }

    /// All nodes of the subtree rooted at `id`, in document order, `id` first.
    pub fn descendants_or_self(&self, id: NodeId) -> Vec<NodeId> {
        let mut out = Vec::new();
        let mut stack = vec![id];
        while let Some(n) = stack.pop() {
            out.push(n);
            for &c in self.children(n).iter().rev() {
                stack.push(c);
            }
        }
        out
    }

    /// Element nodes of the subtree rooted at `id`, in document order.
    pub fn element_descendants_or_self(&self, id: NodeId) -> Vec<NodeId> {
        self.descendants_or_self(id)
            .into_iter()
            .filter(|&n| self.is_element(n))
            .collect()
    }

    /// Map from node to its position in document order (root = 0).
    /// Recomputed on demand; trees here are small.
    pub fn order_index(&self) -> std::collections::HashMap<NodeId, usize> {
        self.descendants_or_self(self.root)
            .into_iter()
            .enumerate()
            .map(|(i, n)| (n, i))
            .collect()
    }

    /// Resolves a namespace prefix in the scope of `id` by walking
    /// `xmlns`/`xmlns:p` attributes up the ancestor chain. `prefix = ""`
    /// resolves the default namespace.
    pub fn resolve_prefix(&self, id: NodeId, prefix: &str) -> Option<String> {
        if prefix == "xml" {
            return Some(XML_NS.to_owned());
        }
        let mut cur = Some(id);
        while let Some(n) = cur {
            if let Some(e) = self.element(n) {
                for a in &e.attrs {
                    let hit = if prefix.is_empty() {
                        a.name.prefix.is_none() && a.name.local == "xmlns"
                    } else {
                        a.name.prefix.as_deref() == Some("xmlns") && a.name.local == prefix
                    };
                    if hit {
                        if a.value.is_empty() {
                            return None; // un-declaration
                        }
                        return Some(a.value.clone());
                    }
                }
            }
            cur = self.node(n).parent;
        }
        None
    }

    /// Makes sure `prefix` resolves to `uri` in the scope of `id`, declaring
    /// it on `id` itself when necessary. An empty prefix manages the default
    /// namespace.
    pub fn ensure_prefix(&mut self, id: NodeId, prefix: &str, uri: &str) {
        if self.resolve_prefix(id, prefix).as_deref() == Some(uri) {
            return;
        }
        let name = if prefix.is_empty() {
            QName::new(None, None, "xmlns")
        } else {
            QName::new(None, Some("xmlns"), prefix)
        };
        self.set_attr(id, name, uri);
    }

    /// Copies the subtree at `id` into a standalone document, adding
    /// whatever namespace declarations the subtree inherited from its
    /// ancestors so the result parses on its own.
    pub fn extract_fragment(&self, id: NodeId) -> Document {
        let name = self.element(id).expect("fragment root is an element").name.clone();
        let mut out = Document::with_root(name);
        let root = out.root();
        for a in self.attrs(id).to_vec() {
            out.set_attr(root, a.name, a.value);
        }
        for child in self.children(id).to_vec() {
            let c = out.import(self, child);
            out.append_child(root, c);
        }
        // walk top-down; declarations added here become visible below
        for n in out.element_descendants_or_self(root) {
            let mut needed: Vec<(String, Option<String>)> = Vec::new();
            {
                let e = out.element(n).unwrap();
                needed.push((
                    e.name.prefix.clone().unwrap_or_default(),
                    e.name.ns.clone(),
                ));
                for a in &e.attrs {
                    // only prefixed attributes live in a namespace; xmlns
                    // declarations themselves need no fixing
                    if let (Some(p), Some(ns)) = (&a.name.prefix, &a.name.ns) {
                        if p != "xmlns" && p != "xml" {
                            needed.push((p.clone(), Some(ns.clone())));
                        }
                    }
                }
            }
            for (prefix, ns) in needed {
                match ns {
                    Some(uri) => out.ensure_prefix(n, &prefix, &uri),
                    None if prefix.is_empty() => {
                        // unprefixed, no namespace: shield from any default
                        // namespace declared above
                        if out.resolve_prefix(n, "").is_some() {
                            out.set_attr(n, QName::new(None, None, "xmlns"), "");
                        }
                    }
                    None => {}
                }
            }
        }
        out
    }

    /// Structural path for error messages, e.g.
    /// `/sem:computationalDocument/cml:molecule[2]`. Indices are 1-based and
    /// only shown when the element has same-named siblings.
    pub fn node_path(&self, id: NodeId) -> String {
        let mut parts = Vec::new();
        let mut cur = id;
        loop {
            match &self.node(cur).kind {
                NodeKind::Text(_) => parts.push("text()".to_owned()),
                NodeKind::Element(e) => {
                    let label = match self.node(cur).parent {
                        None => e.name.as_str(),
                        Some(p) => {
                            let same: Vec<NodeId> = self
                                .child_elements(p)
                                .filter(|&c| self.element(c).unwrap().name == e.name)
                                .collect();
                            if same.len() > 1 {
                                let idx =
                                    same.iter().position(|&c| c == cur).unwrap() + 1;
                                format!("{}[{}]", e.name.as_str(), idx)
                            } else {
                                e.name.as_str()
                            }
                        }
                    };
                    parts.push(label);
                }
            }
            match self.node(cur).parent {
                Some(p) => cur = p,
                None => break,
            }
        }
        parts.reverse();
        format!("/{}", parts.join("/"))
    }
}
