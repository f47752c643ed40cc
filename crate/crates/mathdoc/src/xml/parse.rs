//! XML parser for the document model.
//!
//! Supported: one root element, attributes, namespace declarations, character
//! data, CDATA sections, the five predefined entities plus numeric character
//! references, comments (dropped), and a leading XML declaration (dropped).
//! DOCTYPE and processing instructions are rejected: documents in this system
//! are self-contained and a DTD would reintroduce external state.
//!
//! Namespace handling is strict: an undeclared prefix is a parse error, not a
//! silently un-namespaced name.

use super::{Attr, Document, NodeId, QName, XmlError, XML_NS};

struct Cursor<'a> {
    src: &'a str,
    off: usize,
    line: u32,
    col: u32,
}

impl<'a> Cursor<'a> {
    fn new(src: &'a str) -> Self {
        Cursor { src, off: 0, line: 1, col: 1 }
    }

    fn rest(&self) -> &'a str {
        &self.src[self.off..]
    }

    fn peek(&self) -> Option<char> {
        self.rest().chars().next()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.off += c.len_utf8();
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn starts_with(&self, s: &str) -> bool {
        self.rest().starts_with(s)
    }

    fn eat(&mut self, s: &str) -> bool {
        if self.starts_with(s) {
            for _ in s.chars() {
                self.bump();
            }
            true
        } else {
            false
        }
    }

    fn expect(&mut self, s: &str) -> Result<(), XmlError> {
        if self.eat(s) {
            Ok(())
        } else {
            Err(self.err(format!("expected `{s}`")))
        }
    }

    fn skip_ws(&mut self) {
        while matches!(self.peek(), Some(' ' | '\t' | '\r' | '\n')) {
            self.bump();
        }
    }

    fn err(&self, msg: impl Into<String>) -> XmlError {
        XmlError::new(msg, self.line, self.col)
    }

    fn pos(&self) -> (u32, u32) {
        (self.line, self.col)
    }
}

fn is_name_start(c: char) -> bool {
    c.is_ascii_alphabetic() || c == '_' || !c.is_ascii()
}

fn is_name_char(c: char) -> bool {
    is_name_start(c) || c.is_ascii_digit() || c == '-' || c == '.'
}

/// Raw (still prefix-unresolved) attribute.
struct RawAttr {
    name: String,
    value: String,
    pos: (u32, u32),
}

struct NsScope {
    /// Stack of frames; each frame lists (prefix, uri) introduced by one
    /// element. Empty-string prefix is the default namespace; empty-string
    /// uri is an un-declaration.
    frames: Vec<Vec<(String, String)>>,
}

impl NsScope {
    fn new() -> Self {
        NsScope { frames: Vec::new() }
    }

    fn resolve(&self, prefix: &str) -> Option<&str> {
        if prefix == "xml" {
            return Some(XML_NS);
        }
        for frame in self.frames.iter().rev() {
            for (p, uri) in frame.iter().rev() {
                if p == prefix {
                    if uri.is_empty() {
                        return None;
                    }
                    return Some(uri);
                }
            }
        }
        None
    }
}

pub fn parse_document(src: &str) -> Result<Document, XmlError> {
    let src = src.strip_prefix('\u{feff}').unwrap_or(src);
    let mut cur = Cursor::new(src);
    let mut doc = Document::with_root(QName::plain("#pending"));
    let mut scope = NsScope::new();

    skip_misc(&mut cur, true)?;
    if cur.peek().is_none() {
        return Err(cur.err("document has no root element"));
    }
    let root = parse_element(&mut cur, &mut doc, &mut scope)?;
    doc.set_root(root);
    skip_misc(&mut cur, false)?;
    if cur.peek().is_some() {
        return Err(cur.err("content after the root element"));
    }
    Ok(doc)
}

/// Skips whitespace and comments between markup at document level. An XML
/// declaration is consumed only when `allow_decl` (i.e. before the root).
fn skip_misc(cur: &mut Cursor, allow_decl: bool) -> Result<(), XmlError> {
    let mut decl_allowed = allow_decl && cur.off == 0;
    loop {
        cur.skip_ws();
        if cur.starts_with("<!--") {
            skip_comment(cur)?;
        } else if cur.starts_with("<?xml") && decl_allowed {
            while !cur.eat("?>") {
                if cur.bump().is_none() {
                    return Err(cur.err("unterminated XML declaration"));
                }
            }
            decl_allowed = false;
        } else if cur.starts_with("<?") {
            return Err(cur.err("processing instructions are not supported"));
        } else if cur.starts_with("<!DOCTYPE") {
            return Err(cur.err("DOCTYPE is not supported"));
        } else if cur.starts_with("<") || cur.peek().is_none() {
            return Ok(());
        } else {
            return Err(cur.err("text is not allowed outside the root element"));
        }
    }
}

fn skip_comment(cur: &mut Cursor) -> Result<(), XmlError> {
    cur.expect("<!--")?;
    while !cur.eat("-->") {
        if cur.bump().is_none() {
            return Err(cur.err("unterminated comment"));
        }
    }
    Ok(())
}

fn parse_name(cur: &mut Cursor) -> Result<String, XmlError> {
    match cur.peek() {
        Some(c) if is_name_start(c) || c == ':' => {}
        _ => return Err(cur.err("expected a name")),
    }
    let start = cur.off;
    while matches!(cur.peek(), Some(c) if is_name_char(c) || c == ':') {
        cur.bump();
    }
    Ok(cur.src[start..cur.off].to_owned())
}

/// Splits `p:local`, rejecting names with more than one colon or empty parts.
fn split_name(cur: &Cursor, raw: &str) -> Result<(Option<String>, String), XmlError> {
    let mut it = raw.split(':');
    let first = it.next().unwrap_or("");
    match (it.next(), it.next()) {
        (None, _) => {
            if first.is_empty() {
                Err(cur.err("empty name"))
            } else {
                Ok((None, first.to_owned()))
            }
        }
        (Some(second), None) => {
            if first.is_empty() || second.is_empty() {
                Err(cur.err(format!("malformed qualified name `{raw}`")))
            } else {
                Ok((Some(first.to_owned()), second.to_owned()))
            }
        }
        (Some(_), Some(_)) => Err(cur.err(format!("malformed qualified name `{raw}`"))),
    }
}

fn parse_element(
    cur: &mut Cursor,
    doc: &mut Document,
    scope: &mut NsScope,
) -> Result<NodeId, XmlError> {
    let pos = cur.pos();
    cur.expect("<")?;
    let raw_name = parse_name(cur)?;

    let mut raw_attrs: Vec<RawAttr> = Vec::new();
    loop {
        let had_ws = matches!(cur.peek(), Some(' ' | '\t' | '\r' | '\n'));
        cur.skip_ws();
        match cur.peek() {
            Some('/') | Some('>') => break,
            Some(_) if had_ws => raw_attrs.push(parse_attr(cur)?),
            Some(_) => return Err(cur.err("expected whitespace before attribute")),
            None => return Err(cur.err("unterminated start tag")),
        }
    }

    // Namespace declarations introduced by this element.
    let mut frame: Vec<(String, String)> = Vec::new();
    for a in &raw_attrs {
        if a.name == "xmlns" {
            frame.push((String::new(), a.value.clone()));
        } else if let Some(p) = a.name.strip_prefix("xmlns:") {
            if p == "xml" && a.value != XML_NS {
                return Err(XmlError::new(
                    "the `xml` prefix cannot be rebound",
                    a.pos.0,
                    a.pos.1,
                ));
            }
            frame.push((p.to_owned(), a.value.clone()));
        }
    }
    scope.frames.push(frame);

    let (el_prefix, el_local) = split_name(cur, &raw_name)?;
    let el_ns = match &el_prefix {
        Some(p) => match scope.resolve(p) {
            Some(uri) => Some(uri.to_owned()),
            None => {
                return Err(XmlError::new(
                    format!("undeclared namespace prefix `{p}`"),
                    pos.0,
                    pos.1,
                ))
            }
        },
        None => scope.resolve("").map(str::to_owned),
    };

    let mut attrs: Vec<Attr> = Vec::new();
    for a in &raw_attrs {
        let (prefix, local) = split_name(cur, &a.name)?;
        let ns = match prefix.as_deref() {
            Some("xmlns") => None, // namespace declaration, kept as written
            Some(p) => match scope.resolve(p) {
                Some(uri) => Some(uri.to_owned()),
                None => {
                    return Err(XmlError::new(
                        format!("undeclared namespace prefix `{p}`"),
                        a.pos.0,
                        a.pos.1,
                    ))
                }
            },
            None => None, // unprefixed attributes take no namespace
        };
        let name = QName { prefix, local, ns };
        // Duplicate detection is on the expanded name, so `x:a` and `y:a`
        // clash when both prefixes bind the same URI.
        let dup = attrs
            .iter()
            .any(|x| x.name.matches(name.ns.as_deref(), &name.local));
        if dup {
            return Err(XmlError::new(
                format!("duplicate attribute `{}`", a.name),
                a.pos.0,
                a.pos.1,
            ));
        }
        attrs.push(Attr { name, value: a.value.clone() });
    }

    let name = QName { prefix: el_prefix, local: el_local, ns: el_ns };
    let id = doc.create_element(name);
    doc.set_element_parts(id, attrs, pos);

    if cur.eat("/>") {
        scope.frames.pop();
        return Ok(id);
    }
    cur.expect(">")?;

    // Content.
    let mut text = String::new();
    let mut text_is_ws = true;
    loop {
        if cur.starts_with("</") {
            flush_text(doc, id, &mut text, &mut text_is_ws);
            cur.expect("</")?;
            let close = parse_name(cur)?;
            if close != raw_name {
                return Err(cur.err(format!(
                    "mismatched end tag: expected `</{raw_name}>`, found `</{close}>`"
                )));
            }
            cur.skip_ws();
            cur.expect(">")?;
            scope.frames.pop();
            return Ok(id);
        } else if cur.starts_with("<!--") {
            skip_comment(cur)?;
        } else if cur.starts_with("<![CDATA[") {
            cur.expect("<![CDATA[")?;
            let start = cur.off;
            while !cur.starts_with("]]>") {
                if cur.bump().is_none() {
                    return Err(cur.err("unterminated CDATA section"));
                }
            }
            let chunk = &cur.src[start..cur.off];
            if !chunk.chars().all(|c| c.is_ascii_whitespace()) {
                text_is_ws = false;
            }
            text.push_str(chunk);
            cur.expect("]]>")?;
        } else if cur.starts_with("<?") {
            return Err(cur.err("processing instructions are not supported"));
        } else if cur.starts_with("<!") {
            return Err(cur.err("unsupported markup declaration"));
        } else if cur.starts_with("<") {
            flush_text(doc, id, &mut text, &mut text_is_ws);
            let child = parse_element(cur, doc, scope)?;
            doc.append_child(id, child);
        } else {
            match cur.peek() {
                None => return Err(cur.err(format!("unclosed element `{raw_name}`"))),
                Some('&') => {
                    // Whitespace via character reference is treated like
                    // literal whitespace so the canonical form (which writes
                    // it back literally) stays stable under re-parsing.
                    let c = parse_entity(cur)?;
                    if !c.is_ascii_whitespace() {
                        text_is_ws = false;
                    }
                    text.push(c);
                }
                Some(c) => {
                    if !c.is_ascii_whitespace() {
                        text_is_ws = false;
                    }
                    text.push(c);
                    cur.bump();
                }
            }
        }
    }
}

/// Appends accumulated character data as a text node unless it is
/// insignificant whitespace. Dropping whitespace-only runs is what makes the
/// pretty-printed canonical form stable under re-parsing.
fn flush_text(doc: &mut Document, parent: NodeId, text: &mut String, is_ws: &mut bool) {
    if !text.is_empty() && !*is_ws {
        let t = doc.create_text(std::mem::take(text));
        doc.append_child(parent, t);
    }
    text.clear();
    *is_ws = true;
}

fn parse_attr(cur: &mut Cursor) -> Result<RawAttr, XmlError> {
    let pos = cur.pos();
    let name = parse_name(cur)?;
    cur.skip_ws();
    cur.expect("=")?;
    cur.skip_ws();
    let quote = match cur.peek() {
        Some(q @ ('"' | '\'')) => {
            cur.bump();
            q
        }
        _ => return Err(cur.err("expected quoted attribute value")),
    };
    let mut value = String::new();
    loop {
        match cur.peek() {
            None => return Err(cur.err("unterminated attribute value")),
            Some(c) if c == quote => {
                cur.bump();
                break;
            }
            Some('<') => return Err(cur.err("`<` is not allowed in attribute values")),
            Some('&') => value.push(parse_entity(cur)?),
            Some('\t' | '\n' | '\r') => {
                // Attribute-value normalization: literal whitespace becomes a
                // space; character references (handled above) stay literal.
                cur.bump();
                value.push(' ');
            }
            Some(c) => {
                cur.bump();
                value.push(c);
            }
        }
    }
    Ok(RawAttr { name, value, pos })
}

fn parse_entity(cur: &mut Cursor) -> Result<char, XmlError> {
    let pos = cur.pos();
    cur.expect("&")?;
    let start = cur.off;
    while matches!(cur.peek(), Some(c) if c != ';') {
        cur.bump();
    }
    let body = cur.src[start..cur.off].to_owned();
    if cur.bump() != Some(';') {
        return Err(XmlError::new("unterminated entity reference", pos.0, pos.1));
    }
    let c = match body.as_str() {
        "amp" => '&',
        "lt" => '<',
        "gt" => '>',
        "quot" => '"',
        "apos" => '\'',
        _ => {
            let code = if let Some(hex) = body.strip_prefix("#x") {
                u32::from_str_radix(hex, 16).ok()
            } else if let Some(dec) = body.strip_prefix('#') {
                dec.parse::<u32>().ok()
            } else {
                None
            };
            match code.and_then(char::from_u32) {
                Some(c) => c,
                None => {
                    return Err(XmlError::new(
                        format!("unknown entity `&{body};`"),
                        pos.0,
                        pos.1,
                    ))
                }
            }
        }
    };
    Ok(c)
}
