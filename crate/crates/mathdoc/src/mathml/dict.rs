//! Standoff dictionaries: the semantic layer for `dictRef` terms and units.
//!
//! A dictionary maps prefixed terms (`u:ang`, `ff:k`) to a description, a
//! physical dimension, the canonical unit the term is expressed in, and — for
//! unit terms — a conversion to that canonical unit.
//!
//! Conversions are deliberately restricted to affine maps `y = scale·x +
//! offset`. The conversion is written in the file as MathML over one free
//! variable and validated *structurally* at load time by extracting the
//! linear form; sampling-based checks would accept curves that happen to look
//! straight at the probe points.

use super::ast::{Expr, Head, Op};
use super::dimension::Dimension;
use super::parse::expr_from_node;
use super::value::Scalar;
use crate::xml::{parse_document, Document, NodeId};
use indexmap::IndexMap;

pub const CML_NS: &str = "http://www.xml-cml.org/schema";

#[derive(Debug, Clone, thiserror::Error)]
pub enum DictError {
    #[error("dictionary: {0}")]
    Malformed(String),
    #[error("dictionary entry `{term}`: {msg}")]
    Entry { term: String, msg: String },
    #[error("duplicate dictionary prefix `{0}`")]
    DuplicatePrefix(String),
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum ConvertError {
    #[error("unknown unit term `{0}`")]
    UnknownUnit(String),
    #[error("cannot convert {from} to {to}: dimensions differ ({from_dim} vs {to_dim})")]
    DimensionMismatch { from: String, to: String, from_dim: String, to_dim: String },
    #[error("cannot convert {from} to {to}: no shared canonical unit ({c1} vs {c2})")]
    NoPath { from: String, to: String, c1: String, c2: String },
    #[error("value has no unit to convert from")]
    Unitless,
    #[error("conversion chain for `{0}` is cyclic or too deep")]
    BadChain(String),
}

/// Affine map to the canonical unit: `canonical = scale * x + offset`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Affine {
    pub scale: f64,
    pub offset: f64,
}

impl Affine {
    pub const IDENTITY: Affine = Affine { scale: 1.0, offset: 0.0 };

    pub fn apply(&self, x: f64) -> f64 {
        self.scale * x + self.offset
    }

    pub fn invert(&self, y: f64) -> f64 {
        (y - self.offset) / self.scale
    }

    fn compose_after(&self, inner: &Affine) -> Affine {
        Affine {
            scale: self.scale * inner.scale,
            offset: self.scale * inner.offset + self.offset,
        }
    }
}

#[derive(Debug, Clone)]
pub struct DictEntry {
    pub term: String,
    pub description: String,
    pub dim: Dimension,
    /// Prefixed term of the canonical unit; `None` when this entry *is*
    /// canonical for its dimension (or is not a unit at all).
    pub canonical_unit: Option<String>,
    pub conversion: Option<Affine>,
}

#[derive(Debug, Clone)]
pub struct Dictionary {
    pub prefix: String,
    pub title: String,
    entries: IndexMap<String, DictEntry>,
}

impl Dictionary {
    pub fn new(prefix: &str, title: &str) -> Dictionary {
        Dictionary { prefix: prefix.into(), title: title.into(), entries: IndexMap::new() }
    }

    pub fn insert(&mut self, e: DictEntry) -> Result<(), DictError> {
        if self.entries.contains_key(&e.term) {
            return Err(DictError::Entry { term: e.term, msg: "duplicate term".into() });
        }
        self.entries.insert(e.term.clone(), e);
        Ok(())
    }

    pub fn get(&self, term: &str) -> Option<&DictEntry> {
        self.entries.get(term)
    }

    pub fn terms(&self) -> impl Iterator<Item = &DictEntry> {
        self.entries.values()
    }
}

/// All dictionaries in scope for a document, keyed by prefix.
#[derive(Debug, Clone, Default)]
pub struct DictionarySet {
    dicts: IndexMap<String, Dictionary>,
}

impl DictionarySet {
    pub fn empty() -> DictionarySet {
        DictionarySet::default()
    }

    /// The built-in dictionaries every pipeline starts from: `u:` units and
    /// `ff:` forcefield terms (shipped as data files in the crate).
    pub fn core() -> DictionarySet {
        let mut set = DictionarySet::default();
        for src in [
            include_str!("../../data/units-dictionary.xml"),
            include_str!("../../data/forcefield-dictionary.xml"),
        ] {
            let dict = parse_dictionary(src).expect("embedded dictionary is valid");
            set.add(dict).expect("embedded dictionary prefixes are unique");
        }
        set
    }

    pub fn add(&mut self, d: Dictionary) -> Result<(), DictError> {
        if self.dicts.contains_key(&d.prefix) {
            return Err(DictError::DuplicatePrefix(d.prefix));
        }
        self.dicts.insert(d.prefix.clone(), d);
        Ok(())
    }

    pub fn dictionaries(&self) -> impl Iterator<Item = &Dictionary> {
        self.dicts.values()
    }

    /// Looks up a prefixed term such as `u:ang` or `ff:k`.
    pub fn lookup(&self, qualified: &str) -> Option<&DictEntry> {
        let (prefix, term) = qualified.split_once(':')?;
        self.dicts.get(prefix)?.get(term)
    }

    /// Follows the canonical-unit chain of a term, composing conversions.
    /// Returns the canonical term and the affine map onto it.
    fn to_canonical(&self, qualified: &str) -> Result<(String, Affine), ConvertError> {
        let mut term = qualified.to_owned();
        let mut map = Affine::IDENTITY;
        for _ in 0..8 {
            let entry = self
                .lookup(&term)
                .ok_or_else(|| ConvertError::UnknownUnit(term.clone()))?;
            let step = entry.conversion.unwrap_or(Affine::IDENTITY);
            map = step.compose_after(&map);
            match &entry.canonical_unit {
                None => return Ok((term, map)),
                Some(c) if *c == term => return Ok((term, map)),
                Some(c) => term = c.clone(),
            }
        }
        Err(ConvertError::BadChain(qualified.to_owned()))
    }

    /// Dimension of a unit term, if known.
    pub fn unit_dim(&self, qualified: &str) -> Option<Dimension> {
        self.lookup(qualified).map(|e| e.dim)
    }

    /// Converts a scalar to `target` units. Identity when the units already
    /// match; exact in that case.
    pub fn convert(&self, s: &Scalar, target: &str) -> Result<Scalar, ConvertError> {
        let from = s.unit.as_deref().ok_or(ConvertError::Unitless)?;
        let to_entry = self
            .lookup(target)
            .ok_or_else(|| ConvertError::UnknownUnit(target.to_owned()))?;
        if from == target {
            return Ok(Scalar::with_unit(s.value, to_entry.dim, target));
        }
        let from_entry = self
            .lookup(from)
            .ok_or_else(|| ConvertError::UnknownUnit(from.to_owned()))?;
        if from_entry.dim != to_entry.dim {
            return Err(ConvertError::DimensionMismatch {
                from: from.to_owned(),
                to: target.to_owned(),
                from_dim: from_entry.dim.to_string(),
                to_dim: to_entry.dim.to_string(),
            });
        }
        let (c1, a1) = self.to_canonical(from)?;
        let (c2, a2) = self.to_canonical(target)?;
        if c1 != c2 {
            return Err(ConvertError::NoPath {
                from: from.to_owned(),
                to: target.to_owned(),
                c1,
                c2,
            });
        }
        let value = a2.invert(a1.apply(s.value));
        Ok(Scalar::with_unit(value, to_entry.dim, target))
    }

    /// Converts a raw number carrying `unit` into the canonical unit of its
    /// dimension. This is the boundary through which document values enter
    /// evaluation.
    pub fn to_canonical_scalar(&self, value: f64, unit: &str) -> Result<Scalar, ConvertError> {
        let entry = self
            .lookup(unit)
            .ok_or_else(|| ConvertError::UnknownUnit(unit.to_owned()))?;
        let (canon, map) = self.to_canonical(unit)?;
        Ok(Scalar::with_unit(map.apply(value), entry.dim, canon))
    }
}

/// Extracts `scale`/`offset` from a conversion expression, proving it affine.
/// The grammar is intentionally tight: numbers, one free variable, `plus`,
/// `minus`, `times` (at most one non-constant factor) and `divide` (constant
/// divisor). Anything else — including `power`, a second variable, or a
/// variable divisor — is rejected.
pub fn affine_form(expr: &Expr) -> Result<Affine, String> {
    let (scale, offset, _) = linear_form(expr)?;
    if scale == 0.0 {
        return Err("conversion has zero scale and cannot be inverted".into());
    }
    if !scale.is_finite() || !offset.is_finite() {
        return Err("conversion coefficients are not finite".into());
    }
    Ok(Affine { scale, offset })
}

/// Returns (scale, offset, variable name seen).
fn linear_form(expr: &Expr) -> Result<(f64, f64, Option<String>), String> {
    match expr {
        Expr::Number(n) => {
            if n.unit.is_some() {
                return Err("unit-annotated literal inside a conversion".into());
            }
            Ok((0.0, n.value, None))
        }
        Expr::Identifier(i) => Ok((1.0, 0.0, Some(i.name.clone()))),
        Expr::Apply { head: Head::Op(op), args } => {
            let parts: Vec<(f64, f64, Option<String>)> =
                args.iter().map(linear_form).collect::<Result<_, _>>()?;
            let var = merge_vars(&parts)?;
            match op {
                Op::Plus => {
                    let (a, b) = parts
                        .iter()
                        .fold((0.0, 0.0), |(a, b), p| (a + p.0, b + p.1));
                    Ok((a, b, var))
                }
                Op::Minus => match parts.as_slice() {
                    [x] => Ok((-x.0, -x.1, var)),
                    [x, y] => Ok((x.0 - y.0, x.1 - y.1, var)),
                    _ => Err("minus takes one or two arguments".into()),
                },
                Op::Times => {
                    let mut acc = (0.0f64, 1.0f64); // scale, offset
                    for p in &parts {
                        if p.0 != 0.0 {
                            if acc.0 != 0.0 {
                                return Err(
                                    "product of two variable factors is not affine".into()
                                );
                            }
                            acc = (p.0 * acc.1, p.1 * acc.1);
                        } else {
                            acc = (acc.0 * p.1, acc.1 * p.1);
                        }
                    }
                    Ok((acc.0, acc.1, var))
                }
                Op::Divide => match parts.as_slice() {
                    [num, den] => {
                        if den.0 != 0.0 {
                            return Err("variable divisor is not affine".into());
                        }
                        if den.1 == 0.0 {
                            return Err("division by zero in conversion".into());
                        }
                        Ok((num.0 / den.1, num.1 / den.1, var))
                    }
                    _ => Err("divide takes two arguments".into()),
                },
                other => Err(format!("`{}` is not allowed in a conversion", other.tag())),
            }
        }
        Expr::Apply { head: Head::Symbol(_), .. } => {
            Err("function calls are not allowed in a conversion".into())
        }
        Expr::Quantified(_) => Err("quantifiers are not allowed in a conversion".into()),
    }
}

fn merge_vars(parts: &[(f64, f64, Option<String>)]) -> Result<Option<String>, String> {
    let mut var: Option<String> = None;
    for (_, _, v) in parts {
        match (&var, v) {
            (None, Some(x)) => var = Some(x.clone()),
            (Some(a), Some(b)) if a != b => {
                return Err(format!(
                    "conversion uses two free variables (`{a}` and `{b}`)"
                ))
            }
            _ => {}
        }
    }
    Ok(var)
}

/// Parses a dictionary file. Format (CML namespace):
///
/// ```xml
/// <dictionary xmlns="http://www.xml-cml.org/schema" prefix="u" title="units">
///   <entry term="ang" description="angstrom" dimension="length"/>
///   <entry term="nm" description="nanometre" dimension="length" canonicalUnit="u:ang">
///     <convert>
///       <math xmlns="http://www.w3.org/1998/Math/MathML">
///         <apply><times/><cn>10</cn><ci>x</ci></apply>
///       </math>
///     </convert>
///   </entry>
/// </dictionary>
/// ```
pub fn parse_dictionary(src: &str) -> Result<Dictionary, DictError> {
    let doc = parse_document(src)
        .map_err(|e| DictError::Malformed(format!("{e}")))?;
    dictionary_from_node(&doc, doc.root())
}

pub fn dictionary_from_node(doc: &Document, id: NodeId) -> Result<Dictionary, DictError> {
    let name = doc.name(id).ok_or_else(|| DictError::Malformed("not an element".into()))?;
    if !name.matches(Some(CML_NS), "dictionary") {
        return Err(DictError::Malformed(format!(
            "expected a cml dictionary element, found `{}`",
            name.as_str()
        )));
    }
    let prefix = doc
        .attr(id, "prefix")
        .ok_or_else(|| DictError::Malformed("dictionary has no `prefix`".into()))?
        .to_owned();
    let title = doc.attr(id, "title").unwrap_or("").to_owned();
    let mut dict = Dictionary::new(&prefix, &title);

    for entry_id in doc.child_elements(id) {
        let ename = doc.name(entry_id).unwrap();
        if !ename.matches(Some(CML_NS), "entry") {
            return Err(DictError::Malformed(format!(
                "unexpected element `{}` in dictionary",
                ename.as_str()
            )));
        }
        let term = doc
            .attr(entry_id, "term")
            .ok_or_else(|| DictError::Malformed("entry has no `term`".into()))?
            .to_owned();
        let mk_err = |msg: String| DictError::Entry { term: term.clone(), msg };
        let dim_text = doc
            .attr(entry_id, "dimension")
            .ok_or_else(|| mk_err("missing `dimension`".into()))?;
        let dim = Dimension::parse(dim_text).map_err(mk_err)?;
        let description = doc.attr(entry_id, "description").unwrap_or("").to_owned();
        let canonical_unit = doc.attr(entry_id, "canonicalUnit").map(str::to_owned);

        let mut conversion = None;
        for child in doc.child_elements(entry_id) {
            let cname = doc.name(child).unwrap();
            if !cname.matches(Some(CML_NS), "convert") {
                return Err(mk_err(format!("unexpected element `{}`", cname.as_str())));
            }
            let math: Vec<_> = doc.child_elements(child).collect();
            if math.len() != 1 {
                return Err(mk_err("`convert` must contain one expression".into()));
            }
            let expr = expr_from_node(doc, math[0])
                .map_err(|e| mk_err(format!("bad conversion: {e}")))?;
            conversion = Some(affine_form(&expr).map_err(mk_err)?);
        }

        if conversion.is_some() && canonical_unit.is_none() {
            return Err(mk_err("conversion given but no `canonicalUnit`".into()));
        }
        dict.insert(DictEntry { term, description, dim, canonical_unit, conversion })?;
    }
    Ok(dict)
}

#[cfg(test)]
mod tests {
    use super::super::parse::parse_mathml;
    use super::*;

    #[test]
    fn affine_extraction_exact() {
        let deg = parse_mathml(
            "<apply><times/><cn>0.017453292519943295</cn><ci>x</ci></apply>",
        )
        .unwrap();
        let a = affine_form(&deg).unwrap();
        assert_eq!(a.scale, 0.017453292519943295);
        assert_eq!(a.offset, 0.0);

        let with_offset = parse_mathml(
            "<apply><plus/><apply><divide/><ci>v</ci><cn>2</cn></apply><cn>3</cn></apply>",
        )
        .unwrap();
        let b = affine_form(&with_offset).unwrap();
        assert_eq!((b.scale, b.offset), (0.5, 3.0));
    }

    #[test]
    fn non_affine_rejected_structurally() {
        // This vanishes at x = 0, 1, 2, so any 3-point sampling check would
        // wrongly accept it; the structural walk must not.
        let sneaky = parse_mathml(
            "<apply><times/><ci>x</ci><apply><minus/><ci>x</ci><cn>1</cn></apply></apply>",
        )
        .unwrap();
        assert!(affine_form(&sneaky).is_err());

        for bad in [
            "<apply><power/><ci>x</ci><cn>2</cn></apply>",
            "<apply><divide/><cn>1</cn><ci>x</ci></apply>",
            "<apply><sin/><ci>x</ci></apply>",
            "<apply><plus/><ci>x</ci><ci>y</ci></apply>",
        ] {
            let e = parse_mathml(bad).unwrap();
            assert!(affine_form(&e).is_err(), "accepted {bad}");
        }
    }

    #[test]
    fn zero_scale_rejected() {
        let e = parse_mathml("<apply><times/><cn>0</cn><ci>x</ci></apply>").unwrap();
        assert!(affine_form(&e).is_err());
    }

    fn tiny_set() -> DictionarySet {
        let src = r#"<dictionary xmlns="http://www.xml-cml.org/schema" prefix="t" title="test units">
            <entry term="m" description="metre" dimension="length"/>
            <entry term="cm" description="centimetre" dimension="length" canonicalUnit="t:m">
              <convert><math xmlns="http://www.w3.org/1998/Math/MathML">
                <apply><divide/><ci>x</ci><cn>100</cn></apply>
              </math></convert>
            </entry>
            <entry term="celsius" description="degree Celsius" dimension="dimensionless" canonicalUnit="t:kelvinish">
              <convert><math xmlns="http://www.w3.org/1998/Math/MathML">
                <apply><plus/><ci>x</ci><cn>273.15</cn></apply>
              </math></convert>
            </entry>
            <entry term="kelvinish" description="offset base" dimension="dimensionless"/>
            <entry term="s" description="second" dimension="time"/>
          </dictionary>"#;
        let mut set = DictionarySet::empty();
        set.add(parse_dictionary(src).unwrap()).unwrap();
        set
    }

    #[test]
    fn conversion_and_round_trip() {
        let set = tiny_set();
        let cm = set.to_canonical_scalar(250.0, "t:cm").unwrap();
        assert_eq!(cm.value, 2.5);
        assert_eq!(cm.unit.as_deref(), Some("t:m"));
        assert_eq!(cm.dim, Dimension::LENGTH);

        // affine with offset
        let c = set.to_canonical_scalar(25.0, "t:celsius").unwrap();
        assert!((c.value - 298.15).abs() < 1e-12);

        // round trip within 1e-12 relative
        let back = set
            .convert(&Scalar::with_unit(2.5, Dimension::LENGTH, "t:m"), "t:cm")
            .unwrap();
        assert!((back.value - 250.0).abs() <= 1e-12 * 250.0);
        let there_again = set.convert(&back, "t:m").unwrap();
        assert!((there_again.value - 2.5).abs() <= 1e-12 * 2.5);
    }

    #[test]
    fn conversion_errors() {
        let set = tiny_set();
        let m = Scalar::with_unit(1.0, Dimension::LENGTH, "t:m");
        assert!(matches!(
            set.convert(&m, "t:s"),
            Err(ConvertError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            set.convert(&m, "t:nope"),
            Err(ConvertError::UnknownUnit(_))
        ));
        let unitless = Scalar::dimensionless(1.0);
        assert!(matches!(set.convert(&unitless, "t:m"), Err(ConvertError::Unitless)));
    }

    #[test]
    fn identity_conversion_is_exact() {
        let set = tiny_set();
        let v = Scalar::with_unit(0.1 + 0.2, Dimension::LENGTH, "t:m");
        let same = set.convert(&v, "t:m").unwrap();
        assert_eq!(same.value.to_bits(), v.value.to_bits());
    }

    #[test]
    fn duplicate_prefix_rejected() {
        let mut set = tiny_set();
        let dup = Dictionary::new("t", "again");
        assert!(matches!(set.add(dup), Err(DictError::DuplicatePrefix(_))));
    }
}
