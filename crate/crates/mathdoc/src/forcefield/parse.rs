//! Loading forcefield parameter tables from CML property lists.
//!
//! The container is a `cml` element with `convention="forcefield"`. Each
//! `property` child carries a `dictRef` naming the parameter group and an
//! `atomTypes` attribute with the space-separated type tuple; the values sit
//! in `scalar` children of a nested `list`, keyed by dictRef:
//!
//! ```xml
//! <property dictRef="ff:bond" atomTypes="CT CT">
//!   <list>
//!     <scalar dictRef="ff:k" units="u:kcal.mol-1.ang-2">310.0</scalar>
//!     <scalar dictRef="ff:r0" units="u:ang">1.526</scalar>
//!   </list>
//! </property>
//! ```
//!
//! A dihedral property holds one `list` per Fourier term. Every quantity is
//! converted to its canonical unit here, at the loading boundary, so the
//! stored tables are always angstrom/radian/kcal-per-mol.

use std::collections::HashMap;

use super::{
    AngleParam, BondParam, FfError, ForcefieldParams, FourierTerm, VdwParam, WILDCARD_TYPE,
};
use crate::mathml::{DictionarySet, Scalar};
use crate::xml::{parse_document, Document, NodeId};
use crate::chem::CML_NS;

/// Parses a standalone forcefield file using the built-in dictionaries.
pub fn parse_forcefield(text: &str) -> Result<ForcefieldParams, FfError> {
    let doc = parse_document(text).map_err(|e| FfError::Malformed(e.to_string()))?;
    forcefield_from_node(&doc, doc.root(), &DictionarySet::core())
}

/// Reads a forcefield from an already-parsed `cml` element, resolving units
/// through `dicts` (which may include document-local dictionaries).
pub fn forcefield_from_node(
    doc: &Document,
    node: NodeId,
    dicts: &DictionarySet,
) -> Result<ForcefieldParams, FfError> {
    let Some(name) = doc.name(node) else {
        return Err(FfError::Malformed(format!(
            "node at {} is not an element",
            doc.node_path(node)
        )));
    };
    if !name.matches(Some(CML_NS), "cml") {
        return Err(FfError::Malformed(format!(
            "expected a cml element in the CML namespace, found {} at {}",
            name.as_str(),
            doc.node_path(node)
        )));
    }
    if doc.attr(node, "convention") != Some("forcefield") {
        return Err(FfError::Malformed(format!(
            "cml element at {} lacks convention=\"forcefield\"",
            doc.node_path(node)
        )));
    }

    let mut p = ForcefieldParams::default();
    for child in doc.child_elements(node) {
        if !doc.name(child).unwrap().matches(Some(CML_NS), "property") {
            continue;
        }
        let group = doc.attr(child, "dictRef").ok_or_else(|| {
            FfError::Malformed(format!(
                "property at {} has no dictRef",
                doc.node_path(child)
            ))
        })?;
        let types: Vec<&str> =
            doc.attr(child, "atomTypes").map(str::split_whitespace).into_iter().flatten().collect();
        match group {
            "ff:bond" => read_bond(doc, child, dicts, &types, &mut p)?,
            "ff:angle" => read_angle(doc, child, dicts, &types, &mut p)?,
            "ff:dihedral" => read_dihedral(doc, child, dicts, &types, &mut p)?,
            "ff:vdw" => read_vdw(doc, child, dicts, &types, &mut p)?,
            "ff:global" => read_global(doc, child, dicts, &types, &mut p)?,
            other => {
                return Err(FfError::Malformed(format!(
                    "property at {} has unrecognized dictRef {other}",
                    doc.node_path(child)
                )))
            }
        }
    }
    Ok(p)
}

/// Scalars of one `list`, keyed by dictRef: (text, units attribute).
type FieldMap = HashMap<String, (String, Option<String>)>;

fn read_list_fields(
    doc: &Document,
    list: NodeId,
    group: &str,
    tuple: &str,
    allowed: &[&str],
) -> Result<FieldMap, FfError> {
    let mut fields = FieldMap::new();
    for sc in doc.child_elements(list) {
        let name = doc.name(sc).unwrap();
        if !name.matches(Some(CML_NS), "scalar") {
            return Err(FfError::Malformed(format!(
                "unexpected {} inside the list at {}",
                name.as_str(),
                doc.node_path(list)
            )));
        }
        let key = doc.attr(sc, "dictRef").ok_or_else(|| {
            FfError::Malformed(format!("scalar at {} has no dictRef", doc.node_path(sc)))
        })?;
        if !allowed.contains(&key) {
            return Err(FfError::Malformed(format!(
                "scalar dictRef {key} does not belong in a {group} entry ({tuple})"
            )));
        }
        let units = doc.attr(sc, "units").map(str::to_string);
        if fields.insert(key.to_string(), (doc.text_content(sc), units)).is_some() {
            return Err(FfError::Malformed(format!(
                "{group} entry ({tuple}) repeats scalar {key}"
            )));
        }
    }
    Ok(fields)
}

/// Single `list` child of a property; zero or several is an error.
fn only_list(doc: &Document, prop: NodeId, group: &str, tuple: &str) -> Result<NodeId, FfError> {
    let lists: Vec<NodeId> = doc
        .child_elements(prop)
        .filter(|n| doc.name(*n).unwrap().matches(Some(CML_NS), "list"))
        .collect();
    match lists.as_slice() {
        [one] => Ok(*one),
        _ => Err(FfError::Malformed(format!(
            "{group} entry ({tuple}) must contain exactly one list, found {}",
            lists.len()
        ))),
    }
}

/// Converts one field to the canonical unit required by its dictionary
/// entry. Fields whose dictionary entry has no canonical unit (counts, pure
/// ratios) must come without a units attribute.
fn field_value(
    dicts: &DictionarySet,
    fields: &FieldMap,
    group: &str,
    tuple: &str,
    key: &str,
) -> Result<f64, FfError> {
    let (text, units) = fields.get(key).ok_or_else(|| FfError::MissingField {
        group: group.into(),
        tuple: tuple.into(),
        field: key.into(),
    })?;
    let raw: f64 = text.trim().parse().map_err(|_| FfError::BadNumber {
        group: group.into(),
        tuple: tuple.into(),
        field: key.into(),
        text: text.trim().to_string(),
    })?;
    if !raw.is_finite() {
        return Err(FfError::BadNumber {
            group: group.into(),
            tuple: tuple.into(),
            field: key.into(),
            text: text.trim().to_string(),
        });
    }
    let entry = dicts.lookup(key).ok_or_else(|| {
        FfError::Malformed(format!("no dictionary entry for {key}"))
    })?;
    match (&entry.canonical_unit, units) {
        (Some(canon), Some(u)) => {
            let s: Scalar = dicts.to_canonical_scalar(raw, u)?;
            if s.unit.as_deref() != Some(canon.as_str()) {
                return Err(FfError::WrongUnits {
                    group: group.into(),
                    tuple: tuple.into(),
                    field: key.into(),
                    units: u.clone(),
                    expected: canon.clone(),
                });
            }
            Ok(s.value)
        }
        (Some(_), None) => Err(FfError::MissingUnits {
            group: group.into(),
            tuple: tuple.into(),
            field: key.into(),
        }),
        (None, Some(u)) => Err(FfError::UnexpectedUnits {
            group: group.into(),
            tuple: tuple.into(),
            field: key.into(),
            units: u.clone(),
        }),
        (None, None) => Ok(raw),
    }
}

fn optional_field(
    dicts: &DictionarySet,
    fields: &FieldMap,
    group: &str,
    tuple: &str,
    key: &str,
) -> Result<Option<f64>, FfError> {
    if fields.contains_key(key) {
        field_value(dicts, fields, group, tuple, key).map(Some)
    } else {
        Ok(None)
    }
}

fn nonnegative(group: &str, tuple: &str, field: &str, value: f64) -> Result<f64, FfError> {
    if value < 0.0 {
        return Err(FfError::NegativeForceConstant {
            group: group.into(),
            tuple: tuple.into(),
            field: field.into(),
            value,
        });
    }
    Ok(value)
}

fn expect_types<'a>(
    group: &str,
    types: &'a [&'a str],
    count: usize,
    wildcard_ok: &[usize],
) -> Result<&'a [&'a str], FfError> {
    let tuple = types.join(", ");
    if types.len() != count {
        return Err(FfError::Malformed(format!(
            "{group} entry needs {count} atom types, found {} ({tuple})",
            types.len()
        )));
    }
    for (i, t) in types.iter().enumerate() {
        if *t == WILDCARD_TYPE && !wildcard_ok.contains(&i) {
            return Err(FfError::MisplacedWildcard { group: group.into(), tuple });
        }
    }
    Ok(types)
}

fn read_bond(
    doc: &Document,
    prop: NodeId,
    dicts: &DictionarySet,
    types: &[&str],
    p: &mut ForcefieldParams,
) -> Result<(), FfError> {
    let t = expect_types("bond", types, 2, &[])?;
    let tuple = t.join(", ");
    let list = only_list(doc, prop, "bond", &tuple)?;
    let fields = read_list_fields(doc, list, "bond", &tuple, &["ff:k", "ff:r0"])?;
    let k = nonnegative("bond", &tuple, "ff:k", field_value(dicts, &fields, "bond", &tuple, "ff:k")?)?;
    let r_eq = field_value(dicts, &fields, "bond", &tuple, "ff:r0")?;
    p.insert_bond(t[0], t[1], BondParam { k, r_eq })
}

fn read_angle(
    doc: &Document,
    prop: NodeId,
    dicts: &DictionarySet,
    types: &[&str],
    p: &mut ForcefieldParams,
) -> Result<(), FfError> {
    let t = expect_types("angle", types, 3, &[])?;
    let tuple = t.join(", ");
    let list = only_list(doc, prop, "angle", &tuple)?;
    let fields = read_list_fields(doc, list, "angle", &tuple, &["ff:ktheta", "ff:theta0"])?;
    let k = nonnegative(
        "angle",
        &tuple,
        "ff:ktheta",
        field_value(dicts, &fields, "angle", &tuple, "ff:ktheta")?,
    )?;
    let theta_eq = field_value(dicts, &fields, "angle", &tuple, "ff:theta0")?;
    p.insert_angle(t[0], t[1], t[2], AngleParam { k, theta_eq })
}

fn read_dihedral(
    doc: &Document,
    prop: NodeId,
    dicts: &DictionarySet,
    types: &[&str],
    p: &mut ForcefieldParams,
) -> Result<(), FfError> {
    let t = expect_types("dihedral", types, 4, &[0, 3])?;
    let tuple = t.join(", ");
    let lists: Vec<NodeId> = doc
        .child_elements(prop)
        .filter(|n| doc.name(*n).unwrap().matches(Some(CML_NS), "list"))
        .collect();
    if lists.is_empty() {
        return Err(FfError::Malformed(format!(
            "dihedral entry ({tuple}) has no Fourier term lists"
        )));
    }
    let mut terms = Vec::new();
    for list in lists {
        let fields =
            read_list_fields(doc, list, "dihedral", &tuple, &["ff:vn", "ff:n", "ff:gamma"])?;
        let vn = field_value(dicts, &fields, "dihedral", &tuple, "ff:vn")?;
        let n_raw = field_value(dicts, &fields, "dihedral", &tuple, "ff:n")?;
        if n_raw < 1.0 || n_raw.fract() != 0.0 || n_raw > f64::from(i32::MAX) {
            return Err(FfError::BadPeriodicity { tuple: tuple.clone(), value: n_raw });
        }
        let gamma = field_value(dicts, &fields, "dihedral", &tuple, "ff:gamma")?;
        terms.push(FourierTerm { vn, n: n_raw as i32, gamma });
    }
    p.insert_dihedral([t[0], t[1], t[2], t[3]], terms)
}

fn read_vdw(
    doc: &Document,
    prop: NodeId,
    dicts: &DictionarySet,
    types: &[&str],
    p: &mut ForcefieldParams,
) -> Result<(), FfError> {
    if types.len() != 1 && types.len() != 2 {
        return Err(FfError::Malformed(format!(
            "vdw entry needs 1 atom type (per-type) or 2 (pair override), found {} ({})",
            types.len(),
            types.join(", ")
        )));
    }
    let t = expect_types("vdw", types, types.len(), &[])?;
    let tuple = t.join(", ");
    let list = only_list(doc, prop, "vdw", &tuple)?;
    let fields = read_list_fields(doc, list, "vdw", &tuple, &["ff:A", "ff:B"])?;
    let a = field_value(dicts, &fields, "vdw", &tuple, "ff:A")?;
    let b = field_value(dicts, &fields, "vdw", &tuple, "ff:B")?;
    let param = VdwParam { a, b };
    if t.len() == 1 {
        p.insert_vdw_type(t[0], param)
    } else {
        p.insert_vdw_pair(t[0], t[1], param)
    }
}

fn read_global(
    doc: &Document,
    prop: NodeId,
    dicts: &DictionarySet,
    types: &[&str],
    p: &mut ForcefieldParams,
) -> Result<(), FfError> {
    expect_types("global", types, 0, &[])?;
    let list = only_list(doc, prop, "global", "")?;
    let fields = read_list_fields(
        doc,
        list,
        "global",
        "",
        &["ff:ke", "ff:eps", "ff:vdwScale14", "ff:elecScale14"],
    )?;
    let dup = |field: &str| FfError::DuplicateEntry { group: "global".into(), tuple: field.into() };
    if let Some(v) = optional_field(dicts, &fields, "global", "", "ff:ke")? {
        if p.coulomb_k.is_some() {
            return Err(dup("ff:ke"));
        }
        p.coulomb_k = Some(v);
    }
    if let Some(v) = optional_field(dicts, &fields, "global", "", "ff:eps")? {
        if p.permittivity.is_some() {
            return Err(dup("ff:eps"));
        }
        p.permittivity = Some(v);
    }
    if let Some(v) = optional_field(dicts, &fields, "global", "", "ff:vdwScale14")? {
        if p.scale14_vdw.is_some() {
            return Err(dup("ff:vdwScale14"));
        }
        p.scale14_vdw = Some(v);
    }
    if let Some(v) = optional_field(dicts, &fields, "global", "", "ff:elecScale14")? {
        if p.scale14_elec.is_some() {
            return Err(dup("ff:elecScale14"));
        }
        p.scale14_elec = Some(v);
    }
    Ok(())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::forcefield::DEFAULT_COULOMB_K;

    pub(crate) const ETHANE_LIKE: &str = r#"<cml xmlns="http://www.xml-cml.org/schema" convention="forcefield" title="small alkane set">
  <property dictRef="ff:bond" atomTypes="CT CT">
    <list>
      <scalar dictRef="ff:k" units="u:kcal.mol-1.ang-2">310.0</scalar>
      <scalar dictRef="ff:r0" units="u:ang">1.526</scalar>
    </list>
  </property>
  <property dictRef="ff:bond" atomTypes="HC CT">
    <list>
      <scalar dictRef="ff:k" units="u:kcal.mol-1.ang-2">340.0</scalar>
      <scalar dictRef="ff:r0" units="u:ang">1.09</scalar>
    </list>
  </property>
  <property dictRef="ff:angle" atomTypes="HC CT CT">
    <list>
      <scalar dictRef="ff:ktheta" units="u:kcal.mol-1.rad-2">50.0</scalar>
      <scalar dictRef="ff:theta0" units="u:deg">109.5</scalar>
    </list>
  </property>
  <property dictRef="ff:angle" atomTypes="HC CT HC">
    <list>
      <scalar dictRef="ff:ktheta" units="u:kcal.mol-1.rad-2">35.0</scalar>
      <scalar dictRef="ff:theta0" units="u:deg">109.5</scalar>
    </list>
  </property>
  <property dictRef="ff:dihedral" atomTypes="X CT CT X">
    <list>
      <scalar dictRef="ff:vn" units="u:kcal.mol-1">1.4</scalar>
      <scalar dictRef="ff:n">3</scalar>
      <scalar dictRef="ff:gamma" units="u:deg">0.0</scalar>
    </list>
  </property>
  <property dictRef="ff:vdw" atomTypes="CT">
    <list>
      <scalar dictRef="ff:A" units="u:kcal.mol-1.ang12">1043080.2</scalar>
      <scalar dictRef="ff:B" units="u:kcal.mol-1.ang6">675.6</scalar>
    </list>
  </property>
  <property dictRef="ff:vdw" atomTypes="HC">
    <list>
      <scalar dictRef="ff:A" units="u:kcal.mol-1.ang12">7516.1</scalar>
      <scalar dictRef="ff:B" units="u:kcal.mol-1.ang6">21.73</scalar>
    </list>
  </property>
</cml>
"#;

    #[test]
    fn parses_and_canonicalizes_a_small_set() {
        let p = parse_forcefield(ETHANE_LIKE).unwrap();
        let b = p.lookup_bond("CT", "CT").unwrap();
        assert_eq!(b.k, 310.0);
        assert_eq!(b.r_eq, 1.526);

        // Declared as "HC CT"; the pair is unordered.
        let b2 = p.lookup_bond("CT", "HC").unwrap();
        assert_eq!(b2.r_eq, 1.09);

        // Degrees land in storage as radians, by the same multiply the
        // standard library uses.
        let a = p.lookup_angle("CT", "CT", "HC").unwrap();
        assert_eq!(a.theta_eq.to_bits(), 109.5f64.to_radians().to_bits());
        assert!((a.theta_eq - 1.911_135_5).abs() < 1e-6);

        let d = p.lookup_dihedral("HC", "CT", "CT", "HC").unwrap();
        assert_eq!(d.len(), 1);
        assert_eq!(d[0].vn, 1.4);
        assert_eq!(d[0].n, 3);
        assert_eq!(d[0].gamma, 0.0);

        assert_eq!(p.coulomb_k(), DEFAULT_COULOMB_K);
        assert_eq!(p.permittivity(), 1.0);
        assert_eq!(p.scale14().vdw, 1.0);
        assert_eq!(p.scale14().elec, 1.0);
    }

    #[test]
    fn global_overrides_apply() {
        let text = r#"<cml xmlns="http://www.xml-cml.org/schema" convention="forcefield">
  <property dictRef="ff:global">
    <list>
      <scalar dictRef="ff:ke" units="u:kcal.ang.mol-1.e-2">331.2</scalar>
      <scalar dictRef="ff:eps">78.5</scalar>
      <scalar dictRef="ff:vdwScale14">0.5</scalar>
      <scalar dictRef="ff:elecScale14">0.8333333333333334</scalar>
    </list>
  </property>
</cml>"#;
        let p = parse_forcefield(text).unwrap();
        assert_eq!(p.coulomb_k(), 331.2);
        assert_eq!(p.permittivity(), 78.5);
        assert_eq!(p.scale14().vdw, 0.5);
        assert_eq!(p.scale14().elec, 0.8333333333333334);
    }

    #[test]
    fn empty_table_parses_but_lookups_fail() {
        let p = parse_forcefield(
            r#"<cml xmlns="http://www.xml-cml.org/schema" convention="forcefield"/>"#,
        )
        .unwrap();
        let err = p.lookup_bond("CT", "CT").unwrap_err();
        assert!(err.to_string().contains("(CT, CT)"), "{err}");
    }

    fn bond_prop(body: &str, types: &str) -> String {
        format!(
            r#"<cml xmlns="http://www.xml-cml.org/schema" convention="forcefield">
  <property dictRef="ff:bond" atomTypes="{types}">
    <list>
{body}
    </list>
  </property>
</cml>"#
        )
    }

    #[test]
    fn missing_field_is_an_error() {
        let text = bond_prop(
            r#"      <scalar dictRef="ff:k" units="u:kcal.mol-1.ang-2">310.0</scalar>"#,
            "CT CT",
        );
        let err = parse_forcefield(&text).unwrap_err();
        assert!(matches!(err, FfError::MissingField { .. }), "{err}");
        assert!(err.to_string().contains("ff:r0"), "{err}");
    }

    #[test]
    fn negative_force_constant_is_an_error() {
        let text = bond_prop(
            "      <scalar dictRef=\"ff:k\" units=\"u:kcal.mol-1.ang-2\">-1.0</scalar>\n      <scalar dictRef=\"ff:r0\" units=\"u:ang\">1.5</scalar>",
            "CT CT",
        );
        let err = parse_forcefield(&text).unwrap_err();
        assert!(matches!(err, FfError::NegativeForceConstant { .. }), "{err}");
    }

    #[test]
    fn unit_problems_are_errors() {
        // No units on a dimensioned quantity.
        let text = bond_prop(
            "      <scalar dictRef=\"ff:k\">310.0</scalar>\n      <scalar dictRef=\"ff:r0\" units=\"u:ang\">1.5</scalar>",
            "CT CT",
        );
        assert!(matches!(
            parse_forcefield(&text).unwrap_err(),
            FfError::MissingUnits { .. }
        ));

        // Unknown unit term.
        let text = bond_prop(
            "      <scalar dictRef=\"ff:k\" units=\"u:bogus\">310.0</scalar>\n      <scalar dictRef=\"ff:r0\" units=\"u:ang\">1.5</scalar>",
            "CT CT",
        );
        assert!(matches!(parse_forcefield(&text).unwrap_err(), FfError::Convert(_)));

        // Right dictionary, wrong dimension for the field.
        let text = bond_prop(
            "      <scalar dictRef=\"ff:k\" units=\"u:kcal.mol-1.ang-2\">310.0</scalar>\n      <scalar dictRef=\"ff:r0\" units=\"u:rad\">1.5</scalar>",
            "CT CT",
        );
        assert!(matches!(parse_forcefield(&text).unwrap_err(), FfError::WrongUnits { .. }));

        // Units on a pure count.
        let text = r#"<cml xmlns="http://www.xml-cml.org/schema" convention="forcefield">
  <property dictRef="ff:dihedral" atomTypes="X CT CT X">
    <list>
      <scalar dictRef="ff:vn" units="u:kcal.mol-1">1.4</scalar>
      <scalar dictRef="ff:n" units="u:rad">3</scalar>
      <scalar dictRef="ff:gamma" units="u:deg">0.0</scalar>
    </list>
  </property>
</cml>"#;
        assert!(matches!(
            parse_forcefield(text).unwrap_err(),
            FfError::UnexpectedUnits { .. }
        ));
    }

    #[test]
    fn kj_per_mol_converts_on_load() {
        let text = r#"<cml xmlns="http://www.xml-cml.org/schema" convention="forcefield">
  <property dictRef="ff:dihedral" atomTypes="X CT CT X">
    <list>
      <scalar dictRef="ff:vn" units="u:kj.mol-1">4.184</scalar>
      <scalar dictRef="ff:n">3</scalar>
      <scalar dictRef="ff:gamma" units="u:rad">0.0</scalar>
    </list>
  </property>
</cml>"#;
        let p = parse_forcefield(text).unwrap();
        let terms = p.lookup_dihedral("A", "CT", "CT", "B").unwrap();
        assert_eq!(terms[0].vn, 1.0);
    }

    #[test]
    fn bad_periodicities_are_errors() {
        for n in ["0", "-2", "1.5"] {
            let text = format!(
                r#"<cml xmlns="http://www.xml-cml.org/schema" convention="forcefield">
  <property dictRef="ff:dihedral" atomTypes="X CT CT X">
    <list>
      <scalar dictRef="ff:vn" units="u:kcal.mol-1">1.4</scalar>
      <scalar dictRef="ff:n">{n}</scalar>
      <scalar dictRef="ff:gamma" units="u:deg">0.0</scalar>
    </list>
  </property>
</cml>"#
            );
            let err = parse_forcefield(&text).unwrap_err();
            assert!(matches!(err, FfError::BadPeriodicity { .. }), "n={n}: {err}");
        }
    }

    #[test]
    fn wildcard_outside_dihedral_ends_is_rejected() {
        let text = bond_prop(
            "      <scalar dictRef=\"ff:k\" units=\"u:kcal.mol-1.ang-2\">310.0</scalar>\n      <scalar dictRef=\"ff:r0\" units=\"u:ang\">1.5</scalar>",
            "X CT",
        );
        assert!(matches!(
            parse_forcefield(&text).unwrap_err(),
            FfError::MisplacedWildcard { .. }
        ));

        let text = r#"<cml xmlns="http://www.xml-cml.org/schema" convention="forcefield">
  <property dictRef="ff:dihedral" atomTypes="HC X CT HC">
    <list>
      <scalar dictRef="ff:vn" units="u:kcal.mol-1">1.4</scalar>
      <scalar dictRef="ff:n">3</scalar>
      <scalar dictRef="ff:gamma" units="u:deg">0.0</scalar>
    </list>
  </property>
</cml>"#;
        assert!(matches!(
            parse_forcefield(text).unwrap_err(),
            FfError::MisplacedWildcard { .. }
        ));
    }

    #[test]
    fn reversed_duplicate_bond_is_rejected() {
        let text = r#"<cml xmlns="http://www.xml-cml.org/schema" convention="forcefield">
  <property dictRef="ff:bond" atomTypes="CT HC">
    <list>
      <scalar dictRef="ff:k" units="u:kcal.mol-1.ang-2">340.0</scalar>
      <scalar dictRef="ff:r0" units="u:ang">1.09</scalar>
    </list>
  </property>
  <property dictRef="ff:bond" atomTypes="HC CT">
    <list>
      <scalar dictRef="ff:k" units="u:kcal.mol-1.ang-2">341.0</scalar>
      <scalar dictRef="ff:r0" units="u:ang">1.09</scalar>
    </list>
  </property>
</cml>"#;
        assert!(matches!(
            parse_forcefield(text).unwrap_err(),
            FfError::DuplicateEntry { .. }
        ));
    }

    #[test]
    fn structural_mistakes_are_errors() {
        // Wrong tuple arity.
        let text = bond_prop(
            "      <scalar dictRef=\"ff:k\" units=\"u:kcal.mol-1.ang-2\">310.0</scalar>\n      <scalar dictRef=\"ff:r0\" units=\"u:ang\">1.5</scalar>",
            "CT CT CT",
        );
        assert!(parse_forcefield(&text).is_err());

        // Field from another group.
        let text = bond_prop(
            "      <scalar dictRef=\"ff:vn\" units=\"u:kcal.mol-1\">310.0</scalar>",
            "CT CT",
        );
        assert!(parse_forcefield(&text).is_err());

        // Unknown group.
        let text = r#"<cml xmlns="http://www.xml-cml.org/schema" convention="forcefield">
  <property dictRef="ff:torsionz"><list/></property>
</cml>"#;
        assert!(parse_forcefield(text).is_err());

        // Missing convention marker.
        assert!(parse_forcefield(r#"<cml xmlns="http://www.xml-cml.org/schema"/>"#).is_err());

        // Not CML at all.
        assert!(parse_forcefield("<forcefield/>").is_err());
    }
}
