//! Content-MathML reader and writer.
//!
//! The supported element set is frozen: `math`, `cn`, `ci`, `apply`,
//! `csymbol`, `bvar`, `condition` with `<in/>`, the operator heads listed in
//! [`super::ast::Op`], and the quantifiers `sum`/`product`. Anything else is
//! a parse error, not a silent skip: a document that uses an element this
//! engine does not execute must fail loudly.
//!
//! Elements may carry an `id` or foreign-namespace attributes (provenance
//! markers land there); those are ignored. Semantic attributes (`type`,
//! `units`, `func`, `definitionURL`) are honored.

use super::ast::{Expr, Head, Ident, Number, Op, QuantKind, Quantified, Symbol};
use super::MATHML_NS;
use crate::xml::{parse_document, serialize_fragment, Document, NodeId, QName};

/// Parse failure with a human-readable location (line:col when parsing text,
/// node path when reading from a document tree).
#[derive(Debug, Clone, thiserror::Error)]
#[error("{msg} (at {at})")]
pub struct MathParseError {
    pub msg: String,
    pub at: String,
}

fn err<T>(msg: impl Into<String>, doc: &Document, id: NodeId) -> Result<T, MathParseError> {
    Err(MathParseError { msg: msg.into(), at: doc.node_path(id) })
}

/// Parses a standalone MathML fragment (optionally wrapped in `<math>`).
pub fn parse_mathml(src: &str) -> Result<Expr, MathParseError> {
    let doc = parse_document(src)
        .map_err(|e| MathParseError { msg: e.msg, at: format!("{}:{}", e.line, e.col) })?;
    expr_from_node(&doc, doc.root())
}

/// Reads an expression from a document node. `<math>` wrappers (with exactly
/// one expression child) are unwrapped.
pub fn expr_from_node(doc: &Document, id: NodeId) -> Result<Expr, MathParseError> {
    let name = match doc.name(id) {
        Some(n) => n,
        None => return err("expected an element, found text", doc, id),
    };
    if !matches!(name.ns.as_deref(), None | Some(MATHML_NS)) {
        return err(
            format!("element `{}` is not in the MathML namespace", name.as_str()),
            doc,
            id,
        );
    }
    if name.local == "math" {
        let children: Vec<NodeId> = doc.children(id).to_vec();
        let elements: Vec<NodeId> =
            children.iter().copied().filter(|&c| doc.is_element(c)).collect();
        if elements.len() != 1 || elements.len() != children.len() {
            return err("`math` must contain exactly one expression", doc, id);
        }
        return expr_of(doc, elements[0]);
    }
    expr_of(doc, id)
}

fn expr_of(doc: &Document, id: NodeId) -> Result<Expr, MathParseError> {
    let name = match doc.name(id) {
        Some(n) => n.clone(),
        None => return err("expected an element, found text", doc, id),
    };
    if !matches!(name.ns.as_deref(), None | Some(MATHML_NS)) {
        return err(
            format!("element `{}` is not in the MathML namespace", name.as_str()),
            doc,
            id,
        );
    }
    match name.local.as_str() {
        "cn" => parse_cn(doc, id),
        "ci" => Ok(Expr::Identifier(parse_ci(doc, id)?)),
        "apply" => parse_apply(doc, id),
        other => err(format!("unsupported element `{other}`"), doc, id),
    }
}

fn parse_cn(doc: &Document, id: NodeId) -> Result<Expr, MathParseError> {
    if doc.child_elements(id).next().is_some() {
        return err("`cn` must contain only a literal", doc, id);
    }
    let text = doc.text_content(id);
    let text = text.trim();
    if text.is_empty() {
        return err("empty `cn` literal", doc, id);
    }
    let value: f64 = match text.parse() {
        Ok(v) => v,
        Err(_) => return err(format!("invalid number literal `{text}`"), doc, id),
    };
    let lexical_integer = {
        let body = text.strip_prefix(['+', '-']).unwrap_or(text);
        !body.is_empty() && body.bytes().all(|b| b.is_ascii_digit())
    };
    let integer = match doc.attr(id, "type") {
        None => lexical_integer,
        Some("integer") => {
            if !lexical_integer {
                return err(format!("`{text}` is not an integer literal"), doc, id);
            }
            true
        }
        Some("real") => false,
        Some(other) => return err(format!("unsupported cn type `{other}`"), doc, id),
    };
    let unit = doc.attr(id, "units").map(str::to_owned);
    Ok(Expr::Number(Number { value, integer, unit }))
}

fn parse_ci(doc: &Document, id: NodeId) -> Result<Ident, MathParseError> {
    if doc.child_elements(id).next().is_some() {
        return err("`ci` must contain only a name", doc, id);
    }
    let text = doc.text_content(id);
    let name = text.trim();
    if name.is_empty() {
        return err("empty `ci` identifier", doc, id);
    }
    Ok(Ident { name: name.to_owned(), type_hint: doc.attr(id, "type").map(str::to_owned) })
}

fn parse_apply(doc: &Document, id: NodeId) -> Result<Expr, MathParseError> {
    let children: Vec<NodeId> = doc.children(id).to_vec();
    if children.iter().any(|&c| !doc.is_element(c)) {
        return err("unexpected text inside `apply`", doc, id);
    }
    let (&head_id, rest) = match children.split_first() {
        Some(x) => x,
        None => return err("empty `apply`", doc, id),
    };
    let head_name = match doc.name(head_id) {
        Some(n) if matches!(n.ns.as_deref(), None | Some(MATHML_NS)) => n.local.clone(),
        Some(n) => {
            return err(
                format!("element `{}` is not in the MathML namespace", n.as_str()),
                doc,
                head_id,
            )
        }
        None => return err("expected an operator element", doc, head_id),
    };

    if head_name == "sum" || head_name == "product" {
        let kind = if head_name == "sum" { QuantKind::Sum } else { QuantKind::Product };
        return parse_quantified(doc, id, kind, rest);
    }

    let head = if let Some(op) = Op::from_tag(&head_name) {
        if !doc.children(head_id).is_empty() {
            return err(format!("operator `{head_name}` must be empty"), doc, head_id);
        }
        Head::Op(op)
    } else if head_name == "csymbol" {
        Head::Symbol(parse_csymbol(doc, head_id)?)
    } else {
        return err(
            format!("`{head_name}` cannot be used as an apply head"),
            doc,
            head_id,
        );
    };

    if rest.is_empty() {
        return err("`apply` needs at least one argument", doc, id);
    }
    let args = rest
        .iter()
        .map(|&c| expr_of(doc, c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Expr::Apply { head, args })
}

fn parse_csymbol(doc: &Document, id: NodeId) -> Result<Symbol, MathParseError> {
    if doc.child_elements(id).next().is_some() {
        return err("`csymbol` must contain only a display name", doc, id);
    }
    let sym = Symbol {
        func: doc.attr(id, "func").map(str::to_owned),
        definition_url: doc.attr(id, "definitionURL").map(str::to_owned),
        display: doc.text_content(id).trim().to_owned(),
    };
    if sym.keys().is_empty() {
        return err(
            "`csymbol` needs a `func` attribute, a `definitionURL`, or a name",
            doc,
            id,
        );
    }
    Ok(sym)
}

fn parse_quantified(
    doc: &Document,
    apply_id: NodeId,
    kind: QuantKind,
    rest: &[NodeId],
) -> Result<Expr, MathParseError> {
    let [bvar_id, cond_id, body_id] = match rest {
        [a, b, c] => [*a, *b, *c],
        _ => {
            return err(
                format!(
                    "`{}` requires a bound variable, a condition, and a body",
                    kind.tag()
                ),
                doc,
                apply_id,
            )
        }
    };

    let local_of = |n: NodeId| doc.name(n).map(|q| q.local.clone()).unwrap_or_default();
    if local_of(bvar_id) != "bvar" {
        return err(format!("`{}` requires a `bvar`", kind.tag()), doc, apply_id);
    }
    let bvar_children: Vec<NodeId> = doc.child_elements(bvar_id).collect();
    let bvar = match bvar_children.as_slice() {
        [ci] if local_of(*ci) == "ci" => parse_ci(doc, *ci)?.name,
        _ => return err("`bvar` must contain exactly one `ci`", doc, bvar_id),
    };

    if local_of(cond_id) != "condition" {
        return err(format!("`{}` requires a `condition`", kind.tag()), doc, apply_id);
    }
    let cond_children: Vec<NodeId> = doc.child_elements(cond_id).collect();
    let in_apply = match cond_children.as_slice() {
        [a] if local_of(*a) == "apply" => *a,
        _ => return err("`condition` must contain one `apply`", doc, cond_id),
    };
    let in_children: Vec<NodeId> = doc.child_elements(in_apply).collect();
    let domain = match in_children.as_slice() {
        [op, var, set] if local_of(*op) == "in" && local_of(*var) == "ci"
            && local_of(*set) == "ci" =>
        {
            let var_name = parse_ci(doc, *var)?.name;
            if var_name != bvar {
                return err(
                    format!(
                        "condition binds `{var_name}` but the bound variable is `{bvar}`"
                    ),
                    doc,
                    cond_id,
                );
            }
            parse_ci(doc, *set)?
        }
        _ => {
            return err(
                "condition must have the form `in(bvar, set)`",
                doc,
                cond_id,
            )
        }
    };

    let body = expr_of(doc, body_id)?;
    Ok(Expr::Quantified(Quantified { kind, bvar, domain, body: Box::new(body) }))
}

/// Writes the expression under `parent` in `doc`. Elements are created in the
/// MathML namespace with `prefix` (None = default namespace; the caller is
/// responsible for the corresponding `xmlns` declaration being in scope).
pub fn expr_to_node(
    expr: &Expr,
    doc: &mut Document,
    parent: NodeId,
    prefix: Option<&str>,
) -> NodeId {
    let mk = |local: &str| QName::new(Some(MATHML_NS), prefix, local);
    let id = match expr {
        Expr::Number(n) => {
            let el = doc.create_element(mk("cn"));
            let text = format_number(n);
            let t = doc.create_text(text);
            doc.append_child(el, t);
            if let Some(u) = &n.unit {
                doc.set_attr(el, QName::plain("units"), u.clone());
            }
            el
        }
        Expr::Identifier(i) => ident_to_node(i, doc, &mk),
        Expr::Apply { head, args } => {
            let el = doc.create_element(mk("apply"));
            let head_el = match head {
                Head::Op(op) => doc.create_element(mk(op.tag())),
                Head::Symbol(s) => {
                    let c = doc.create_element(mk("csymbol"));
                    if let Some(f) = &s.func {
                        doc.set_attr(c, QName::plain("func"), f.clone());
                    }
                    if let Some(u) = &s.definition_url {
                        doc.set_attr(c, QName::plain("definitionURL"), u.clone());
                    }
                    if !s.display.is_empty() {
                        let t = doc.create_text(s.display.clone());
                        doc.append_child(c, t);
                    }
                    c
                }
            };
            doc.append_child(el, head_el);
            for a in args {
                expr_to_node(a, doc, el, prefix);
            }
            el
        }
        Expr::Quantified(q) => {
            let el = doc.create_element(mk("apply"));
            let op = doc.create_element(mk(q.kind.tag()));
            doc.append_child(el, op);

            let bvar = doc.create_element(mk("bvar"));
            let bvar_ci = ident_to_node(&Ident::new(&q.bvar), doc, &mk);
            doc.append_child(bvar, bvar_ci);
            doc.append_child(el, bvar);

            let cond = doc.create_element(mk("condition"));
            let in_apply = doc.create_element(mk("apply"));
            let in_op = doc.create_element(mk("in"));
            doc.append_child(in_apply, in_op);
            let var_ci = ident_to_node(&Ident::new(&q.bvar), doc, &mk);
            doc.append_child(in_apply, var_ci);
            let set_ci = ident_to_node(&q.domain, doc, &mk);
            doc.append_child(in_apply, set_ci);
            doc.append_child(cond, in_apply);
            doc.append_child(el, cond);

            expr_to_node(&q.body, doc, el, prefix);
            el
        }
    };
    // Literal/identifier nodes come back detached; composites already
    // attached their own children. Attach the root of this sub-build.
    if doc.parent(id).is_none() {
        doc.append_child(parent, id);
    }
    id
}

fn ident_to_node(
    i: &Ident,
    doc: &mut Document,
    mk: &dyn Fn(&str) -> QName,
) -> NodeId {
    let el = doc.create_element(mk("ci"));
    let t = doc.create_text(i.name.clone());
    doc.append_child(el, t);
    if let Some(h) = &i.type_hint {
        doc.set_attr(el, QName::plain("type"), h.clone());
    }
    el
}

fn format_number(n: &Number) -> String {
    if n.integer {
        format!("{}", n.value)
    } else {
        format!("{:?}", n.value)
    }
}

/// Canonical standalone serialization, wrapped in `<math>` with the MathML
/// default namespace. `parse_mathml(serialize_mathml(e)) == e` structurally.
pub fn serialize_mathml(expr: &Expr) -> String {
    let mut doc = Document::with_root(QName::new(Some(MATHML_NS), None, "math"));
    doc.set_attr(doc.root(), QName::plain("xmlns"), MATHML_NS);
    let root = doc.root();
    expr_to_node(expr, &mut doc, root, None);
    serialize_fragment(&doc, root)
}
