//! Canonical serializer.
//!
//! One canonical form, used everywhere a document is written out or compared:
//!
//! - UTF-8, `<?xml version="1.0" encoding="UTF-8"?>` header for documents;
//! - attributes sorted by their serialized name;
//! - two-space indent, one element per line;
//! - an element with character data serializes entirely inline, so text is
//!   never polluted by indentation;
//! - fixed escape set (`& < >` in text, plus quotes and whitespace refs in
//!   attribute values).
//!
//! Together with the parser's whitespace-only text dropping this makes
//! `serialize -> parse -> serialize` byte-stable, which the pipeline's
//! reproducibility guarantees are built on.

use super::{Document, NodeId};

pub fn serialize_document(doc: &Document) -> String {
    let mut out = String::from("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    write_block(doc, doc.root(), 0, &mut out);
    out.push('\n');
    out
}

/// Serializes a subtree without the XML declaration or trailing newline.
pub fn serialize_fragment(doc: &Document, id: NodeId) -> String {
    let mut out = String::new();
    if doc.is_element(id) {
        write_block(doc, id, 0, &mut out);
    } else if let Some(t) = doc.text(id) {
        escape_text(t, &mut out);
    }
    out
}

fn visible_children(doc: &Document, id: NodeId) -> Vec<NodeId> {
    doc.children(id)
        .iter()
        .copied()
        .filter(|&c| doc.text(c).map_or(true, |t| !t.is_empty()))
        .collect()
}

fn write_block(doc: &Document, id: NodeId, depth: usize, out: &mut String) {
    for _ in 0..depth {
        out.push_str("  ");
    }
    let children = visible_children(doc, id);
    let has_text = children.iter().any(|&c| !doc.is_element(c));
    write_start_tag(doc, id, out);
    if children.is_empty() {
        out.push_str("/>");
    } else if has_text {
        out.push('>');
        for &c in &children {
            write_inline(doc, c, out);
        }
        write_end_tag(doc, id, out);
    } else {
        out.push_str(">\n");
        for &c in &children {
            write_block(doc, c, depth + 1, out);
            out.push('\n');
        }
        for _ in 0..depth {
            out.push_str("  ");
        }
        write_end_tag(doc, id, out);
    }
}

fn write_inline(doc: &Document, id: NodeId, out: &mut String) {
    if let Some(t) = doc.text(id) {
        escape_text(t, out);
        return;
    }
    let children = visible_children(doc, id);
    write_start_tag(doc, id, out);
    if children.is_empty() {
        out.push_str("/>");
    } else {
        out.push('>');
        for &c in &children {
            write_inline(doc, c, out);
        }
        write_end_tag(doc, id, out);
    }
}

fn write_start_tag(doc: &Document, id: NodeId, out: &mut String) {
    let el = doc.element(id).expect("start tag of a non-element");
    out.push('<');
    out.push_str(&el.name.as_str());
    let mut attrs: Vec<_> = doc.attrs(id).iter().collect();
    attrs.sort_by_key(|a| a.name.as_str());
    for a in attrs {
        out.push(' ');
        out.push_str(&a.name.as_str());
        out.push_str("=\"");
        escape_attr(&a.value, out);
        out.push('"');
    }
}

fn write_end_tag(doc: &Document, id: NodeId, out: &mut String) {
    out.push_str("</");
    out.push_str(&doc.element(id).unwrap().name.as_str());
    out.push('>');
}

fn escape_text(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
}

fn escape_attr(s: &str, out: &mut String) {
    for c in s.chars() {
        match c {
            '&' => out.push_str("&amp;"),
            '<' => out.push_str("&lt;"),
            '>' => out.push_str("&gt;"),
            '"' => out.push_str("&quot;"),
            '\t' => out.push_str("&#9;"),
            '\n' => out.push_str("&#10;"),
            '\r' => out.push_str("&#13;"),
            c => out.push(c),
        }
    }
}
