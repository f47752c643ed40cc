//! Preparation stages: symbol substitution, transclusion, self-edits.
//!
//! All three stages are idempotent. Symbol substitution leaves no `${...}`
//! behind, transclusion removes every `href` it resolves, and editors are
//! stamped `sem:applied="true"`, so a prepared document prepared again is
//! unchanged.

use std::collections::HashMap;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use super::{selector_prefixes, CompDoc, PipelineError, SEM_NS};
use crate::selector::{compile_selector, Selector};
use crate::xml::{parse_document, Document, NodeId, QName};

/// Attribute name in the control namespace, serialized with the `sem` prefix.
pub(crate) fn sem_attr(local: &str) -> QName {
    QName::new(Some(SEM_NS), Some("sem"), local)
}

pub(crate) fn mark_applied(doc: &mut Document, el: NodeId) {
    doc.set_attr(el, sem_attr("applied"), "true");
    doc.ensure_prefix(el, "sem", SEM_NS);
}

pub(crate) fn is_applied(doc: &Document, el: NodeId) -> bool {
    doc.attr_ns(el, Some(SEM_NS), "applied") == Some("true")
}

// ---------------------------------------------------------------- symbols

/// Replaces every `${name}` in attribute values and text with the value of
/// the `sem:variable` named `name`. Definitions may reference each other;
/// the reference chain is expanded lazily and a loop is reported as a cycle.
pub fn resolve_symbols(cd: &mut CompDoc) -> Result<(), PipelineError> {
    symbols_pass(cd, true)
}

/// Pre-transclusion variant: a reference with no definition yet stays in
/// place, because the definition may arrive with included content. The
/// strict pass after transclusion catches anything still unresolved.
pub(crate) fn resolve_symbols_deferring(cd: &mut CompDoc) -> Result<(), PipelineError> {
    symbols_pass(cd, false)
}

fn symbols_pass(cd: &mut CompDoc, strict: bool) -> Result<(), PipelineError> {
    let doc = &mut cd.doc;
    let mut defs: HashMap<String, String> = HashMap::new();
    for el in doc.element_descendants_or_self(doc.root()) {
        if !doc.name(el).unwrap().matches(Some(SEM_NS), "variable") {
            continue;
        }
        let (Some(name), Some(value)) = (doc.attr(el, "name"), doc.attr(el, "value")) else {
            return Err(PipelineError::BadVariable { location: doc.node_path(el) });
        };
        if defs.insert(name.to_owned(), value.to_owned()).is_some() {
            return Err(PipelineError::DuplicateVariable { name: name.to_owned() });
        }
    }

    for node in doc.descendants_or_self(doc.root()) {
        if doc.is_element(node) {
            let attrs: Vec<(QName, String)> = doc
                .attrs(node)
                .iter()
                .filter(|a| a.value.contains("${"))
                .map(|a| (a.name.clone(), a.value.clone()))
                .collect();
            for (name, value) in attrs {
                let location = format!("{}/@{}", doc.node_path(node), name.as_str());
                let expanded = expand(&value, &defs, &mut Vec::new(), &location, strict)?;
                doc.set_attr(node, name, expanded);
            }
        } else if let Some(text) = doc.text(node) {
            if text.contains("${") {
                let location = doc.node_path(node);
                let expanded =
                    expand(&text.to_owned(), &defs, &mut Vec::new(), &location, strict)?;
                doc.set_text(node, expanded);
            }
        }
    }
    Ok(())
}

fn expand(
    input: &str,
    defs: &HashMap<String, String>,
    chain: &mut Vec<String>,
    location: &str,
    strict: bool,
) -> Result<String, PipelineError> {
    let mut out = String::with_capacity(input.len());
    let mut rest = input;
    while let Some(start) = rest.find("${") {
        out.push_str(&rest[..start]);
        let after = &rest[start + 2..];
        let Some(end) = after.find('}') else {
            return Err(PipelineError::UnterminatedVariable { location: location.to_owned() });
        };
        let name = &after[..end];
        if chain.iter().any(|c| c == name) {
            let mut cycle = chain.join(" -> ");
            cycle.push_str(" -> ");
            cycle.push_str(name);
            return Err(PipelineError::VariableCycle { chain: cycle });
        }
        let Some(def) = defs.get(name) else {
            if strict {
                return Err(PipelineError::UndefinedVariable {
                    name: name.to_owned(),
                    location: location.to_owned(),
                });
            }
            out.push_str("${");
            out.push_str(name);
            out.push('}');
            rest = &after[end + 1..];
            continue;
        };
        chain.push(name.to_owned());
        out.push_str(&expand(def, defs, chain, location, strict)?);
        chain.pop();
        rest = &after[end + 1..];
    }
    out.push_str(rest);
    Ok(out)
}

// ------------------------------------------------------------ transclusion

/// A fetched reference target.
pub struct Fetched {
    pub content: String,
    /// Absolute location (canonical path or URL): the cycle-detection key
    /// and the base for relative references inside the content.
    pub location: String,
    pub remote: bool,
}

/// Turns an `href` plus the location of the referencing document into
/// content. `base` is the referencing document's own location.
pub trait HrefResolver {
    fn fetch(&self, href: &str, base: &str) -> Result<Fetched, PipelineError>;
}

/// Default resolver: the filesystem, plus http(s) when explicitly enabled.
pub struct FileResolver {
    pub allow_remote: bool,
}

fn is_remote(s: &str) -> bool {
    s.starts_with("http://") || s.starts_with("https://")
}

impl HrefResolver for FileResolver {
    fn fetch(&self, href: &str, base: &str) -> Result<Fetched, PipelineError> {
        if is_remote(href) || (is_remote(base) && !href.starts_with('/')) {
            let url = if is_remote(href) {
                href.to_owned()
            } else {
                // relative reference inside remote content: replace the
                // last path segment of the base URL
                match base.rfind('/') {
                    Some(i) if i > "https://".len() => format!("{}/{}", &base[..i], href),
                    _ => format!("{base}/{href}"),
                }
            };
            if !self.allow_remote {
                return Err(PipelineError::RemoteDisabled { href: url });
            }
            let fail = |detail: String| PipelineError::Fetch { href: url.clone(), detail };
            let resp = reqwest::blocking::get(&url).map_err(|e| fail(e.to_string()))?;
            if !resp.status().is_success() {
                return Err(fail(format!("HTTP status {}", resp.status())));
            }
            let content = resp.text().map_err(|e| fail(e.to_string()))?;
            return Ok(Fetched { content, location: url, remote: true });
        }

        let path = if Path::new(href).is_absolute() {
            PathBuf::from(href)
        } else {
            Path::new(base).parent().unwrap_or(Path::new(".")).join(href)
        };
        let fail = |detail: String| PipelineError::Fetch {
            href: href.to_owned(),
            detail: format!("{} ({detail})", path.display()),
        };
        let content = std::fs::read_to_string(&path).map_err(|e| fail(e.to_string()))?;
        let canon = std::fs::canonicalize(&path).map_err(|e| fail(e.to_string()))?;
        Ok(Fetched {
            content,
            location: canon.display().to_string(),
            remote: false,
        })
    }
}

const INCLUDE_DEPTH_LIMIT: usize = 32;

/// Resolves every `href` attribute by splicing the referenced content into
/// the tree, recursively, and stamps the spliced content with provenance:
/// the reference as written (`sem:srcHref`), a content hash
/// (`sem:srcSha256`) and, for remote sources, the retrieval time
/// (`sem:retrievedAt`). Same-name content replaces the referencing element
/// (its other attributes override the incoming root's); different-name
/// content becomes the referencing element's last child.
pub fn transclude(cd: &mut CompDoc, resolver: &dyn HrefResolver) -> Result<(), PipelineError> {
    let origin = cd.path.display().to_string();
    let mut chain = vec![origin];
    let root = cd.doc.root();
    if cd.doc.attr(root, "href").is_some() {
        return Err(PipelineError::RootHref { location: cd.doc.node_path(root) });
    }
    expand_hrefs(&mut cd.doc, root, resolver, &mut chain)
}

fn expand_hrefs(
    doc: &mut Document,
    top: NodeId,
    resolver: &dyn HrefResolver,
    chain: &mut Vec<String>,
) -> Result<(), PipelineError> {
    let carriers: Vec<NodeId> = doc
        .element_descendants_or_self(top)
        .into_iter()
        .filter(|&el| el != top && doc.attr(el, "href").is_some())
        .collect();
    for el in carriers {
        // a same-name splice above may have detached this carrier
        if !reaches(doc, el, top) {
            continue;
        }
        splice_one(doc, el, resolver, chain)?;
    }
    Ok(())
}

fn reaches(doc: &Document, mut el: NodeId, top: NodeId) -> bool {
    loop {
        if el == top {
            return true;
        }
        match doc.parent(el) {
            Some(p) => el = p,
            None => return false,
        }
    }
}

fn splice_one(
    doc: &mut Document,
    el: NodeId,
    resolver: &dyn HrefResolver,
    chain: &mut Vec<String>,
) -> Result<(), PipelineError> {
    let href = doc.attr(el, "href").expect("caller checked").to_owned();
    let base = chain.last().expect("chain starts nonempty").clone();
    let fetched = resolver.fetch(&href, &base)?;
    if chain.contains(&fetched.location) {
        let mut cycle = chain.join(" -> ");
        cycle.push_str(" -> ");
        cycle.push_str(&fetched.location);
        return Err(PipelineError::IncludeCycle { chain: cycle });
    }
    if chain.len() >= INCLUDE_DEPTH_LIMIT {
        return Err(PipelineError::IncludeDepth { limit: INCLUDE_DEPTH_LIMIT });
    }

    let mut included = parse_document(&fetched.content).map_err(|e| PipelineError::Parse {
        path: fetched.location.clone(),
        detail: e.to_string(),
    })?;
    let inc_root = included.root();
    if included.attr(inc_root, "href").is_some() {
        return Err(PipelineError::RootHref { location: fetched.location.clone() });
    }
    let digest: String = Sha256::digest(fetched.content.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect();

    // references inside the included content resolve relative to it
    chain.push(fetched.location.clone());
    expand_hrefs(&mut included, inc_root, resolver, chain)?;
    chain.pop();

    let inc_name = included.name(inc_root).unwrap();
    let same_name = doc.name(el).unwrap().matches(inc_name.ns.as_deref(), &inc_name.local);

    let target = if same_name {
        let copy = doc.import(&included, inc_root);
        // the reference's own attributes win over the incoming root's
        for attr in doc.attrs(el).to_vec() {
            if attr.name.as_str() != "href" {
                doc.set_attr(copy, attr.name, attr.value);
            }
        }
        doc.replace_node(el, copy);
        fix_namespaces(doc, copy);
        copy
    } else {
        doc.remove_attr(el, "href");
        let child = doc.import(&included, inc_root);
        doc.append_child(el, child);
        fix_namespaces(doc, child);
        el
    };

    doc.set_attr(target, sem_attr("srcHref"), &href);
    doc.set_attr(target, sem_attr("srcSha256"), digest);
    if fetched.remote {
        doc.set_attr(target, sem_attr("retrievedAt"), now_rfc3339());
    }
    doc.ensure_prefix(target, "sem", SEM_NS);
    Ok(())
}

/// After importing a subtree from another document, make sure every prefix
/// it uses resolves to the right URI at its new position, declaring locally
/// where needed (and shielding no-namespace elements from an inherited
/// default namespace).
fn fix_namespaces(doc: &mut Document, top: NodeId) {
    for n in doc.element_descendants_or_self(top) {
        let mut needed: Vec<(String, Option<String>)> = Vec::new();
        {
            let e = doc.element(n).unwrap();
            needed.push((e.name.prefix.clone().unwrap_or_default(), e.name.ns.clone()));
            for a in doc.attrs(n) {
                if let (Some(p), Some(ns)) = (&a.name.prefix, &a.name.ns) {
                    if p != "xmlns" && p != "xml" {
                        needed.push((p.clone(), Some(ns.clone())));
                    }
                }
            }
        }
        for (prefix, ns) in needed {
            match ns {
                Some(uri) => doc.ensure_prefix(n, &prefix, &uri),
                None if prefix.is_empty() => {
                    if doc.resolve_prefix(n, "").is_some() {
                        doc.set_attr(n, QName::new(None, None, "xmlns"), "");
                    }
                }
                None => {}
            }
        }
    }
}

/// UTC timestamp, e.g. `2024-05-01T12:00:00Z`.
fn now_rfc3339() -> String {
    let secs = std::time::SystemTime::now()
        .duration_since(std::time::UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0);
    rfc3339_utc(secs)
}

/// Epoch seconds to RFC 3339 UTC, using the standard civil-from-days
/// conversion.
fn rfc3339_utc(secs: u64) -> String {
    let days = secs / 86_400;
    let rem = secs % 86_400;
    let (h, min, s) = (rem / 3600, rem % 3600 / 60, rem % 60);

    let z = days as i64 + 719_468;
    let era = z / 146_097;
    let doe = z - era * 146_097;
    let yoe = (doe - doe / 1460 + doe / 36_524 - doe / 146_096) / 365;
    let y = yoe + era * 400;
    let doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
    let mp = (5 * doy + 2) / 153;
    let d = doy - (153 * mp + 2) / 5 + 1;
    let m = if mp < 10 { mp + 3 } else { mp - 9 };
    let y = if m <= 2 { y + 1 } else { y };
    format!("{y:04}-{m:02}-{d:02}T{h:02}:{min:02}:{s:02}Z")
}

// ----------------------------------------------------------------- editors

/// Executes every `sem:editor` in document order. An editor's children are
/// operations (`sem:copy`, `sem:move`, `sem:delete`, `sem:transform`), each
/// applied to the tree as it stands when the operation runs. Editors already
/// stamped `sem:applied` are skipped.
pub fn apply_edits(cd: &mut CompDoc) -> Result<(), PipelineError> {
    let doc = &mut cd.doc;
    let editors: Vec<NodeId> = doc
        .element_descendants_or_self(doc.root())
        .into_iter()
        .filter(|&el| doc.name(el).unwrap().matches(Some(SEM_NS), "editor"))
        .collect();
    for editor in editors {
        if is_applied(doc, editor) || !reaches(doc, editor, doc.root()) {
            continue;
        }
        let ops: Vec<NodeId> = doc.child_elements(editor).collect();
        for op in ops {
            run_edit_op(doc, op)?;
        }
        mark_applied(doc, editor);
    }
    Ok(())
}

fn edit_err(doc: &Document, op: NodeId, msg: impl std::fmt::Display) -> PipelineError {
    PipelineError::Edit(format!("{} at {}", msg, doc.node_path(op)))
}

fn compile_at(doc: &Document, op: NodeId, attr: &str) -> Result<Selector, PipelineError> {
    let Some(text) = doc.attr(op, attr) else {
        return Err(edit_err(doc, op, format!("missing `{attr}` attribute")));
    };
    let sel = compile_selector(text, &selector_prefixes()).map_err(|e| {
        PipelineError::Selector { source_text: text.to_owned(), detail: e.to_string() }
    })?;
    if sel.is_attribute() {
        return Err(edit_err(doc, op, format!("`{attr}` must select elements, not attributes")));
    }
    Ok(sel)
}

fn select_sources(doc: &Document, op: NodeId) -> Result<Vec<NodeId>, PipelineError> {
    let sel = compile_at(doc, op, "select")?;
    let hits = sel.select(doc, doc.root());
    if hits.is_empty() {
        return Err(edit_err(doc, op, format!("`{}` selects nothing", sel.source())));
    }
    Ok(hits)
}

fn select_destination(doc: &Document, op: NodeId) -> Result<NodeId, PipelineError> {
    let sel = compile_at(doc, op, "to")?;
    let hits = sel.select(doc, doc.root());
    match hits.as_slice() {
        [one] => Ok(*one),
        [] => Err(edit_err(doc, op, format!("destination `{}` selects nothing", sel.source()))),
        many => Err(edit_err(
            doc,
            op,
            format!("destination `{}` is ambiguous ({} matches)", sel.source(), many.len()),
        )),
    }
}

fn run_edit_op(doc: &mut Document, op: NodeId) -> Result<(), PipelineError> {
    let name = doc.name(op).unwrap().clone();
    if name.ns.as_deref() != Some(SEM_NS) {
        return Err(edit_err(doc, op, format!("unknown editor operation `{}`", name.as_str())));
    }
    match name.local.as_str() {
        "copy" => {
            let sources = select_sources(doc, op)?;
            let dest = select_destination(doc, op)?;
            for src in sources {
                let copy = doc.clone_subtree(src);
                doc.append_child(dest, copy);
            }
            Ok(())
        }
        "move" => {
            let sources = select_sources(doc, op)?;
            let dest = select_destination(doc, op)?;
            for src in sources {
                if reaches(doc, dest, src) {
                    return Err(edit_err(doc, op, "destination is inside the source"));
                }
                if doc.parent(src).is_none() {
                    return Err(edit_err(doc, op, "cannot move the document root"));
                }
                doc.detach(src);
                doc.append_child(dest, src);
            }
            Ok(())
        }
        "delete" => {
            let sources = select_sources(doc, op)?;
            for src in sources {
                if doc.parent(src).is_none() {
                    return Err(edit_err(doc, op, "cannot delete the document root"));
                }
                doc.detach(src);
            }
            Ok(())
        }
        "transform" => {
            let sources = select_sources(doc, op)?;
            let rename = doc.attr(op, "rename").map(str::to_owned);
            let attr = doc.attr(op, "attr").map(str::to_owned);
            let value = doc.attr(op, "value").map(str::to_owned);
            match (rename, attr) {
                (Some(local), None) => {
                    if local.contains(':') || local.is_empty() {
                        return Err(edit_err(doc, op, "rename takes a plain local name"));
                    }
                    for src in sources {
                        let mut new_name = doc.name(src).unwrap().clone();
                        new_name.local = local.clone();
                        doc.set_name(src, new_name);
                    }
                    Ok(())
                }
                (None, Some(attr_name)) => {
                    let Some(value) = value else {
                        return Err(edit_err(doc, op, "setting an attribute needs `value`"));
                    };
                    if attr_name.contains(':') || attr_name.is_empty() {
                        return Err(edit_err(doc, op, "`attr` takes a plain attribute name"));
                    }
                    for src in sources {
                        doc.set_attr(src, QName::plain(&attr_name), value.clone());
                    }
                    Ok(())
                }
                (Some(_), Some(_)) => {
                    Err(edit_err(doc, op, "transform takes `rename` or `attr`, not both"))
                }
                (None, None) => {
                    Err(edit_err(doc, op, "transform needs `rename` or `attr`+`value`"))
                }
            }
        }
        other => Err(edit_err(doc, op, format!("unknown editor operation `sem:{other}`"))),
    }
}

#[cfg(test)]
mod tests {
    use super::super::{load_document_str, prepare};
    use super::*;
    use std::collections::HashMap as Map;

    fn doc(body: &str) -> CompDoc {
        let text = format!(
            "<sem:computationalDocument xmlns:sem=\"{SEM_NS}\">{body}</sem:computationalDocument>"
        );
        load_document_str(&text, Path::new("/virtual/test.xml")).unwrap()
    }

    /// Resolver backed by an in-memory map; locations are the hrefs
    /// themselves, absolute-path style.
    struct MapResolver(Map<String, String>);

    impl HrefResolver for MapResolver {
        fn fetch(&self, href: &str, base: &str) -> Result<Fetched, PipelineError> {
            let key = if href.starts_with('/') {
                href.to_owned()
            } else {
                let dir = &base[..base.rfind('/').unwrap_or(0)];
                format!("{dir}/{href}")
            };
            let content = self.0.get(&key).ok_or_else(|| PipelineError::Fetch {
                href: href.to_owned(),
                detail: format!("{key}: no such entry"),
            })?;
            Ok(Fetched { content: content.clone(), location: key, remote: false })
        }
    }

    fn no_fetch() -> MapResolver {
        MapResolver(Map::new())
    }

    #[test]
    fn symbols_expand_in_attributes_and_text() {
        let mut cd = doc(
            r#"<sem:variable name="base" value="/data"/>
               <sem:variable name="ff" value="${base}/ff.xml"/>
               <item path="${ff}">uses ${base} twice: ${base}</item>"#,
        );
        resolve_symbols(&mut cd).unwrap();
        let item = cd.doc.find_child(cd.doc.root(), None, "item").unwrap();
        assert_eq!(cd.doc.attr(item, "path"), Some("/data/ff.xml"));
        assert_eq!(cd.doc.text_content(item), "uses /data twice: /data");

        // second pass is identity
        let once = cd.serialize();
        resolve_symbols(&mut cd).unwrap();
        assert_eq!(cd.serialize(), once);
    }

    #[test]
    fn symbol_errors() {
        let mut cd = doc(r#"<item path="${ghost}"/>"#);
        match resolve_symbols(&mut cd).unwrap_err() {
            PipelineError::UndefinedVariable { name, location } => {
                assert_eq!(name, "ghost");
                assert!(location.contains("item"), "{location}");
                assert!(location.contains("@path"), "{location}");
            }
            other => panic!("unexpected {other}"),
        }

        let mut cd = doc(
            r#"<sem:variable name="a" value="${b}"/>
               <sem:variable name="b" value="${a}"/>"#,
        );
        match resolve_symbols(&mut cd).unwrap_err() {
            PipelineError::VariableCycle { chain } => {
                assert!(chain.contains("->"), "{chain}");
                let first = chain.split(" -> ").next().unwrap();
                assert!(chain.ends_with(first), "cycle closes on itself: {chain}");
            }
            other => panic!("unexpected {other}"),
        }

        let mut cd = doc(
            r#"<sem:variable name="x" value="1"/>
               <sem:variable name="x" value="2"/>"#,
        );
        assert!(matches!(
            resolve_symbols(&mut cd).unwrap_err(),
            PipelineError::DuplicateVariable { name } if name == "x"
        ));

        let mut cd = doc(r#"<item path="${open"/>"#);
        assert!(matches!(
            resolve_symbols(&mut cd).unwrap_err(),
            PipelineError::UnterminatedVariable { .. }
        ));

        // a lone dollar sign is not a reference
        let mut cd = doc(r#"<item note="costs $5"/>"#);
        resolve_symbols(&mut cd).unwrap();
    }

    #[test]
    fn same_name_transclusion_replaces_and_keeps_local_attributes() {
        let resolver = MapResolver(Map::from([(
            "/virtual/water.xml".to_owned(),
            r#"<mol id="water" kind="solvent"><atom/></mol>"#.to_owned(),
        )]));
        let mut cd = doc(r#"<mol href="water.xml" id="w2"/>"#);
        transclude(&mut cd, &resolver).unwrap();

        let mol = cd.doc.find_child(cd.doc.root(), None, "mol").unwrap();
        assert_eq!(cd.doc.attr(mol, "href"), None);
        assert_eq!(cd.doc.attr(mol, "id"), Some("w2"), "local attribute wins");
        assert_eq!(cd.doc.attr(mol, "kind"), Some("solvent"), "incoming attribute kept");
        assert_eq!(cd.doc.attr_ns(mol, Some(SEM_NS), "srcHref"), Some("water.xml"));
        let sha = cd.doc.attr_ns(mol, Some(SEM_NS), "srcSha256").unwrap();
        assert_eq!(sha.len(), 64);
        assert!(sha.chars().all(|c| c.is_ascii_hexdigit()));
        assert_eq!(cd.doc.attr_ns(mol, Some(SEM_NS), "retrievedAt"), None, "local source");
        assert!(cd.doc.find_child(mol, None, "atom").is_some());

        // idempotent: no hrefs remain
        let once = cd.serialize();
        transclude(&mut cd, &resolver).unwrap();
        assert_eq!(cd.serialize(), once);
    }

    #[test]
    fn different_name_transclusion_nests_the_content() {
        let resolver = MapResolver(Map::from([(
            "/virtual/note.xml".to_owned(),
            "<note>hello</note>".to_owned(),
        )]));
        let mut cd = doc(r#"<wrap href="note.xml"><existing/></wrap>"#);
        transclude(&mut cd, &resolver).unwrap();
        let wrap = cd.doc.find_child(cd.doc.root(), None, "wrap").unwrap();
        assert_eq!(cd.doc.attr(wrap, "href"), None);
        assert_eq!(cd.doc.attr_ns(wrap, Some(SEM_NS), "srcHref"), Some("note.xml"));
        let kids: Vec<String> = cd
            .doc
            .child_elements(wrap)
            .map(|c| cd.doc.name(c).unwrap().local.clone())
            .collect();
        assert_eq!(kids, ["existing", "note"], "content appended after existing children");
    }

    #[test]
    fn nested_includes_resolve_relative_to_their_own_file() {
        let resolver = MapResolver(Map::from([
            (
                "/virtual/sub/outer.xml".to_owned(),
                r#"<outer><inner href="inner.xml"/></outer>"#.to_owned(),
            ),
            ("/virtual/sub/inner.xml".to_owned(), "<inner deep=\"yes\"/>".to_owned()),
        ]));
        let mut cd = doc(r#"<box href="sub/outer.xml"/>"#);
        transclude(&mut cd, &resolver).unwrap();
        let boxed = cd.doc.find_child(cd.doc.root(), None, "box").unwrap();
        let outer = cd.doc.find_child(boxed, None, "outer").unwrap();
        let inner = cd.doc.find_child(outer, None, "inner").unwrap();
        assert_eq!(cd.doc.attr(inner, "deep"), Some("yes"));
        // nested provenance names the reference as written in its own file
        assert_eq!(cd.doc.attr_ns(inner, Some(SEM_NS), "srcHref"), Some("inner.xml"));
    }

    #[test]
    fn inclusion_cycle_and_missing_reference() {
        let resolver = MapResolver(Map::from([
            (
                "/virtual/a.xml".to_owned(),
                r#"<a><b href="b.xml"/></a>"#.to_owned(),
            ),
            (
                "/virtual/b.xml".to_owned(),
                r#"<b><a href="a.xml"/></b>"#.to_owned(),
            ),
        ]));
        let mut cd = doc(r#"<a href="a.xml"/>"#);
        match transclude(&mut cd, &resolver).unwrap_err() {
            PipelineError::IncludeCycle { chain } => {
                assert!(chain.contains("a.xml") && chain.contains("b.xml"), "{chain}");
            }
            other => panic!("unexpected {other}"),
        }

        let mut cd = doc(r#"<x href="gone.xml"/>"#);
        assert!(matches!(
            transclude(&mut cd, &no_fetch()).unwrap_err(),
            PipelineError::Fetch { .. }
        ));
    }

    #[test]
    fn self_inclusion_is_a_one_step_cycle() {
        let resolver = MapResolver(Map::from([(
            "/virtual/self.xml".to_owned(),
            r#"<s><s href="self.xml"/></s>"#.to_owned(),
        )]));
        let mut cd = doc(r#"<s href="self.xml"/>"#);
        assert!(matches!(
            transclude(&mut cd, &resolver).unwrap_err(),
            PipelineError::IncludeCycle { .. }
        ));
    }

    #[test]
    fn remote_requires_opt_in() {
        let mut cd = doc(r#"<x href="https://example.org/x.xml"/>"#);
        let resolver = FileResolver { allow_remote: false };
        assert!(matches!(
            transclude(&mut cd, &resolver).unwrap_err(),
            PipelineError::RemoteDisabled { .. }
        ));
    }

    #[test]
    fn transcluded_namespaces_survive_into_the_host() {
        let resolver = MapResolver(Map::from([(
            "/virtual/frag.xml".to_owned(),
            r#"<frag xmlns="urn:other"><piece/></frag>"#.to_owned(),
        )]));
        let mut cd = doc(r#"<holder href="frag.xml"/>"#);
        transclude(&mut cd, &resolver).unwrap();
        let text = cd.serialize();
        let reparsed = crate::xml::parse_document(&text).unwrap();
        let holder = reparsed.find_child(reparsed.root(), None, "holder").unwrap();
        let frag = reparsed.find_child(holder, Some("urn:other"), "frag").unwrap();
        assert!(reparsed.find_child(frag, Some("urn:other"), "piece").is_some());
    }

    #[test]
    fn epoch_formatting() {
        assert_eq!(rfc3339_utc(0), "1970-01-01T00:00:00Z");
        assert_eq!(rfc3339_utc(1_000_000_000), "2001-09-09T01:46:40Z");
        assert_eq!(rfc3339_utc(1_700_000_000), "2023-11-14T22:13:20Z");
    }

    #[test]
    fn editor_copy_move_delete_transform() {
        let mut cd = doc(
            r#"<data><src keep="1"><leaf/></src><dst/></data>
               <sem:editor>
                 <sem:copy select="/sem:computationalDocument/data/src" to="/sem:computationalDocument/data/dst"/>
                 <sem:transform select="//src[@keep='1']" attr="stamp" value="ok"/>
                 <sem:move select="/sem:computationalDocument/data/dst/src/leaf" to="/sem:computationalDocument/data"/>
                 <sem:delete select="/sem:computationalDocument/data/src[@keep='1']"/>
               </sem:editor>"#,
        );
        apply_edits(&mut cd).unwrap();
        let data = cd.doc.find_child(cd.doc.root(), None, "data").unwrap();
        let names: Vec<String> = cd
            .doc
            .child_elements(data)
            .map(|c| cd.doc.name(c).unwrap().local.clone())
            .collect();
        // original src deleted, dst holds the copied src, leaf moved up
        assert_eq!(names, ["dst", "leaf"]);
        let dst = cd.doc.find_child(data, None, "dst").unwrap();
        let copied = cd.doc.find_child(dst, None, "src").unwrap();
        assert_eq!(cd.doc.attr(copied, "stamp"), Some("ok"), "transform saw the copy");
        assert!(
            cd.doc.find_child(copied, None, "leaf").is_none(),
            "leaf was moved out of the copy"
        );

        // applied editors are skipped on a second pass
        let once = cd.serialize();
        apply_edits(&mut cd).unwrap();
        assert_eq!(cd.serialize(), once);
    }

    #[test]
    fn editor_rename_keeps_namespace() {
        let mut cd = doc(r#"<data><old xmlns="urn:k"/></data>
            <sem:editor><sem:transform select="//data" rename="table"/></sem:editor>"#);
        apply_edits(&mut cd).unwrap();
        let t = cd.doc.find_child(cd.doc.root(), None, "table").unwrap();
        assert!(cd.doc.name(t).unwrap().ns.is_none());
    }

    #[test]
    fn editor_errors() {
        // delete with no match
        let mut cd = doc(r#"<sem:editor><sem:delete select="//nothing"/></sem:editor>"#);
        let e = apply_edits(&mut cd).unwrap_err();
        assert!(e.to_string().contains("selects nothing"), "{e}");

        // ambiguous destination
        let mut cd = doc(
            r#"<a/><d/><d/>
               <sem:editor><sem:copy select="//a" to="//d"/></sem:editor>"#,
        );
        let e = apply_edits(&mut cd).unwrap_err();
        assert!(e.to_string().contains("ambiguous"), "{e}");

        // move into own subtree
        let mut cd = doc(
            r#"<a><b/></a>
               <sem:editor><sem:move select="//a" to="//a/b"/></sem:editor>"#,
        );
        let e = apply_edits(&mut cd).unwrap_err();
        assert!(e.to_string().contains("inside the source"), "{e}");

        // transform with both modes
        let mut cd = doc(
            r#"<a/>
               <sem:editor><sem:transform select="//a" rename="b" attr="x" value="1"/></sem:editor>"#,
        );
        let e = apply_edits(&mut cd).unwrap_err();
        assert!(e.to_string().contains("not both"), "{e}");

        // unknown operation
        let mut cd = doc(r#"<sem:editor><sem:explode select="//a"/></sem:editor>"#);
        let e = apply_edits(&mut cd).unwrap_err();
        assert!(e.to_string().contains("unknown editor operation"), "{e}");
    }

    #[test]
    fn prepare_runs_symbols_before_and_after_transclusion() {
        // the included file defines a variable the host document uses, and
        // the host defines one the include's href needs
        let resolver = MapResolver(Map::from([(
            "/virtual/defs.xml".to_owned(),
            format!(
                r#"<defs xmlns:sem="{SEM_NS}"><sem:variable name="unit" value="kcal"/></defs>"#
            ),
        )]));
        let mut cd = doc(
            r#"<sem:variable name="which" value="defs"/>
               <defs href="${which}.xml"/>
               <label text="${unit}"/>"#,
        );
        prepare(&mut cd, &resolver).unwrap();
        let label = cd.doc.find_child(cd.doc.root(), None, "label").unwrap();
        assert_eq!(cd.doc.attr(label, "text"), Some("kcal"));
    }
}
