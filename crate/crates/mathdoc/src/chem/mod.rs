//! The chemistry blackbox: molecules, CML I/O, geometry and masses.
//!
//! A `Molecule` is immutable once built. Changing coordinates goes through
//! [`Molecule::with_positions`], which returns a fresh value, so an appended
//! "molecule with new coordinates" can never alias the original.
//!
//! Child elements of `<molecule>` other than `atomArray` and `bondArray`
//! (properties, annotations from other tools) are preserved verbatim as
//! serialized fragments and written back out on serialization.

pub mod elements;
pub mod geometry;
pub mod interactions;

use crate::mathml::dimension::Dimension;
use crate::mathml::value::Scalar;
use crate::xml::{parse_document, serialize_document, serialize_fragment, Document, NodeId, QName};
use geometry::Vec3;
use std::collections::HashMap;

pub use crate::mathml::dict::CML_NS;
pub use interactions::{interaction_sets, InteractionSets, NonbondedPair};

#[derive(Debug, Clone, thiserror::Error)]
pub enum ChemError {
    #[error("cml: {0}")]
    Malformed(String),
    #[error("duplicate atom id `{0}`")]
    DuplicateAtomId(String),
    #[error("bond references nonexistent atom `{0}`")]
    DanglingBondRef(String),
    #[error("atom `{atom}`: missing coordinate `{coord}`")]
    MissingCoordinate { atom: String, coord: &'static str },
    #[error("atom `{atom}`: coordinates must be finite")]
    NonFiniteCoordinate { atom: String },
    #[error("atom `{0}` is bonded to itself")]
    SelfBond(String),
    #[error("more than one bond between `{0}` and `{1}`")]
    DuplicateBond(String, String),
    #[error("atom `{atom}`: unknown element symbol `{symbol}`")]
    UnknownElement { atom: String, symbol: String },
    #[error("atom `{0}`: missing atomType (this tool does not assign types)")]
    MissingAtomType(String),
    #[error("no atom with id `{0}`")]
    UnknownAtomId(String),
    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),
    #[error("coordinate vector has {got} entries for {want} atoms")]
    CoordinateCount { got: usize, want: usize },
}

#[derive(Debug, Clone, PartialEq)]
pub struct Atom {
    pub id: String,
    pub element: String,
    pub atom_type: String,
    /// Partial charge in elementary charges.
    pub charge: f64,
    /// Cartesian position in angstroms.
    pub position: Vec3,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Bond {
    pub a: String,
    pub b: String,
    pub order: Option<String>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Molecule {
    pub id: Option<String>,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    /// Preserved non-structural children, each a self-contained fragment.
    annotations: Vec<String>,
    index: HashMap<String, usize>,
}

/// A `<property><scalar/></property>` pair attached to a molecule.
#[derive(Debug, Clone, PartialEq)]
pub struct ScalarProperty {
    pub dict_ref: Option<String>,
    pub value: f64,
    pub units: Option<String>,
}

impl Molecule {
    pub fn new(
        id: Option<String>,
        atoms: Vec<Atom>,
        bonds: Vec<Bond>,
        annotations: Vec<String>,
    ) -> Result<Molecule, ChemError> {
        let mut index = HashMap::new();
        for (i, a) in atoms.iter().enumerate() {
            if index.insert(a.id.clone(), i).is_some() {
                return Err(ChemError::DuplicateAtomId(a.id.clone()));
            }
            if !elements::is_known_element(&a.element) {
                return Err(ChemError::UnknownElement {
                    atom: a.id.clone(),
                    symbol: a.element.clone(),
                });
            }
            if a.atom_type.is_empty() {
                return Err(ChemError::MissingAtomType(a.id.clone()));
            }
            if !a.position.iter().all(|c| c.is_finite()) || !a.charge.is_finite() {
                return Err(ChemError::NonFiniteCoordinate { atom: a.id.clone() });
            }
        }
        let mut seen = std::collections::HashSet::new();
        for b in &bonds {
            for end in [&b.a, &b.b] {
                if !index.contains_key(end) {
                    return Err(ChemError::DanglingBondRef(end.clone()));
                }
            }
            if b.a == b.b {
                return Err(ChemError::SelfBond(b.a.clone()));
            }
            let key = if b.a < b.b {
                (b.a.clone(), b.b.clone())
            } else {
                (b.b.clone(), b.a.clone())
            };
            if !seen.insert(key.clone()) {
                return Err(ChemError::DuplicateBond(key.0, key.1));
            }
        }
        Ok(Molecule { id, atoms, bonds, annotations, index })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn annotations(&self) -> &[String] {
        &self.annotations
    }

    pub fn atom(&self, id: &str) -> Result<&Atom, ChemError> {
        self.index
            .get(id)
            .map(|i| &self.atoms[*i])
            .ok_or_else(|| ChemError::UnknownAtomId(id.to_owned()))
    }

    fn pos(&self, id: &str) -> Result<Vec3, ChemError> {
        Ok(self.atom(id)?.position)
    }

    /// Euclidean distance in angstroms. Symmetric in its arguments.
    pub fn distance(&self, a: &str, b: &str) -> Result<Scalar, ChemError> {
        let d = geometry::distance_points(self.pos(a)?, self.pos(b)?);
        Ok(Scalar::with_unit(d, Dimension::LENGTH, "u:ang"))
    }

    /// Angle at `b` in radians, in [0, π].
    pub fn angle(&self, a: &str, b: &str, c: &str) -> Result<Scalar, ChemError> {
        let v = geometry::angle_points(self.pos(a)?, self.pos(b)?, self.pos(c)?)
            .ok_or_else(|| {
                ChemError::DegenerateGeometry(format!("coincident atoms in angle {a}-{b}-{c}"))
            })?;
        Ok(Scalar::with_unit(v, Dimension::DIMENSIONLESS, "u:rad"))
    }

    /// Signed torsion of the path a-b-c-d in radians, in (−π, π].
    pub fn dihedral(&self, a: &str, b: &str, c: &str, d: &str) -> Result<Scalar, ChemError> {
        let v = geometry::dihedral_points(
            self.pos(a)?,
            self.pos(b)?,
            self.pos(c)?,
            self.pos(d)?,
        )
        .ok_or_else(|| {
            ChemError::DegenerateGeometry(format!(
                "collinear or coincident atoms in torsion {a}-{b}-{c}-{d}"
            ))
        })?;
        Ok(Scalar::with_unit(v, Dimension::DIMENSIONLESS, "u:rad"))
    }

    /// Sum of the atomic weights, in u. Zero for an empty molecule.
    pub fn molecular_mass(&self) -> Result<Scalar, ChemError> {
        let mut total = 0.0;
        for a in &self.atoms {
            total += atom_mass(a)?.value;
        }
        Ok(Scalar::with_unit(total, Dimension::MASS, "u:u"))
    }

    /// All coordinates flattened to `[x1, y1, z1, x2, ...]`, the layout the
    /// optimizer works on.
    pub fn coords_flat(&self) -> Vec<f64> {
        self.atoms.iter().flat_map(|a| a.position).collect()
    }

    /// Functional update: same topology, new coordinates.
    pub fn with_coords_flat(&self, coords: &[f64]) -> Result<Molecule, ChemError> {
        if coords.len() != self.atoms.len() * 3 {
            return Err(ChemError::CoordinateCount {
                got: coords.len(),
                want: self.atoms.len() * 3,
            });
        }
        let atoms = self
            .atoms
            .iter()
            .zip(coords.chunks_exact(3))
            .map(|(a, c)| Atom { position: [c[0], c[1], c[2]], ..a.clone() })
            .collect();
        Molecule::new(self.id.clone(), atoms, self.bonds.clone(), self.annotations.clone())
    }

    pub fn with_positions(&self, positions: &[Vec3]) -> Result<Molecule, ChemError> {
        let flat: Vec<f64> = positions.iter().flatten().copied().collect();
        self.with_coords_flat(&flat)
    }

    /// Scalar properties parsed out of the preserved annotations.
    pub fn scalar_properties(&self) -> Vec<ScalarProperty> {
        let mut out = Vec::new();
        for text in &self.annotations {
            let Ok(doc) = parse_document(text) else { continue };
            let root = doc.root();
            let Some(name) = doc.name(root) else { continue };
            if !name.matches(Some(CML_NS), "property") {
                continue;
            }
            for scalar in doc.child_elements(root) {
                let sname = doc.name(scalar).unwrap();
                if !sname.matches(Some(CML_NS), "scalar") {
                    continue;
                }
                if let Ok(value) = doc.text_content(scalar).trim().parse::<f64>() {
                    out.push(ScalarProperty {
                        dict_ref: doc
                            .attr(scalar, "dictRef")
                            .or_else(|| doc.attr(root, "dictRef"))
                            .map(str::to_owned),
                        value,
                        units: doc.attr(scalar, "units").map(str::to_owned),
                    });
                }
            }
        }
        out
    }
}

/// Standard atomic weight of the atom's element, in u.
pub fn atom_mass(a: &Atom) -> Result<Scalar, ChemError> {
    let w = elements::atomic_weight(&a.element).ok_or_else(|| ChemError::UnknownElement {
        atom: a.id.clone(),
        symbol: a.element.clone(),
    })?;
    Ok(Scalar::with_unit(w, Dimension::MASS, "u:u"))
}

pub fn parse_cml(text: &str) -> Result<Molecule, ChemError> {
    let doc = parse_document(text).map_err(|e| ChemError::Malformed(e.to_string()))?;
    molecule_from_node(&doc, doc.root())
}

pub fn molecule_from_node(doc: &Document, node: NodeId) -> Result<Molecule, ChemError> {
    let name = doc
        .name(node)
        .ok_or_else(|| ChemError::Malformed("molecule node is not an element".into()))?;
    if !name.matches(Some(CML_NS), "molecule") {
        return Err(ChemError::Malformed(format!(
            "expected a cml molecule, found `{}` at {}",
            name.as_str(),
            doc.node_path(node)
        )));
    }
    let id = doc.attr(node, "id").map(str::to_owned);
    let mut atoms = Vec::new();
    let mut bonds = Vec::new();
    let mut annotations = Vec::new();
    let mut seen_atom_array = false;
    let mut seen_bond_array = false;

    for child in doc.child_elements(node) {
        let cname = doc.name(child).unwrap();
        if cname.matches(Some(CML_NS), "atomArray") {
            if seen_atom_array {
                return Err(ChemError::Malformed("more than one atomArray".into()));
            }
            seen_atom_array = true;
            for atom in doc.child_elements(child) {
                atoms.push(parse_atom(doc, atom)?);
            }
        } else if cname.matches(Some(CML_NS), "bondArray") {
            if seen_bond_array {
                return Err(ChemError::Malformed("more than one bondArray".into()));
            }
            seen_bond_array = true;
            for bond in doc.child_elements(child) {
                bonds.push(parse_bond(doc, bond)?);
            }
        } else {
            let frag = doc.extract_fragment(child);
            annotations.push(serialize_fragment(&frag, frag.root()));
        }
    }
    Molecule::new(id, atoms, bonds, annotations)
}

fn parse_atom(doc: &Document, node: NodeId) -> Result<Atom, ChemError> {
    let name = doc.name(node).unwrap();
    if !name.matches(Some(CML_NS), "atom") {
        return Err(ChemError::Malformed(format!(
            "unexpected `{}` in atomArray",
            name.as_str()
        )));
    }
    let id = doc
        .attr(node, "id")
        .ok_or_else(|| ChemError::Malformed("atom without id".into()))?
        .to_owned();
    let element = doc
        .attr(node, "elementType")
        .ok_or_else(|| ChemError::Malformed(format!("atom `{id}` has no elementType")))?
        .to_owned();
    let atom_type = doc
        .attr(node, "atomType")
        .ok_or(ChemError::MissingAtomType(id.clone()))?
        .to_owned();
    let mut position = [0.0; 3];
    for (slot, coord) in position.iter_mut().zip(["x3", "y3", "z3"]) {
        let raw = doc
            .attr(node, coord)
            .ok_or(ChemError::MissingCoordinate { atom: id.clone(), coord })?;
        *slot = raw.parse().map_err(|_| {
            ChemError::Malformed(format!("atom `{id}`: bad {coord} value `{raw}`"))
        })?;
    }
    let charge = match doc.attr(node, "charge") {
        None => 0.0,
        Some(raw) => raw.parse().map_err(|_| {
            ChemError::Malformed(format!("atom `{id}`: bad charge value `{raw}`"))
        })?,
    };
    Ok(Atom { id, element, atom_type, charge, position })
}

fn parse_bond(doc: &Document, node: NodeId) -> Result<Bond, ChemError> {
    let name = doc.name(node).unwrap();
    if !name.matches(Some(CML_NS), "bond") {
        return Err(ChemError::Malformed(format!(
            "unexpected `{}` in bondArray",
            name.as_str()
        )));
    }
    let refs = doc
        .attr(node, "atomRefs2")
        .ok_or_else(|| ChemError::Malformed("bond without atomRefs2".into()))?;
    let parts: Vec<&str> = refs.split_whitespace().collect();
    let [a, b] = parts.as_slice() else {
        return Err(ChemError::Malformed(format!(
            "atomRefs2 must hold two ids, found `{refs}`"
        )));
    };
    Ok(Bond {
        a: (*a).to_owned(),
        b: (*b).to_owned(),
        order: doc.attr(node, "order").map(str::to_owned),
    })
}

pub fn serialize_cml(m: &Molecule) -> String {
    let mut doc = Document::with_root(QName::new(Some(CML_NS), None, "molecule"));
    let root = doc.root();
    doc.set_attr(root, QName::new(None, None, "xmlns"), CML_NS);
    molecule_fill_node(m, &mut doc, root, None);
    serialize_document(&doc)
}

/// Builds a `<molecule>` element for `m` under `parent`, using `prefix`
/// (e.g. `Some("cml")`) or the default namespace for the structural names.
pub fn molecule_to_node(
    m: &Molecule,
    doc: &mut Document,
    parent: NodeId,
    prefix: Option<&str>,
) -> NodeId {
    let node = doc.create_element(QName::new(Some(CML_NS), prefix, "molecule"));
    doc.append_child(parent, node);
    if let Some(p) = prefix {
        doc.ensure_prefix(node, p, CML_NS);
    } else {
        doc.ensure_prefix(node, "", CML_NS);
    }
    molecule_fill_node(m, doc, node, prefix);
    node
}

fn molecule_fill_node(m: &Molecule, doc: &mut Document, node: NodeId, prefix: Option<&str>) {
    let name = |local: &str| QName::new(Some(CML_NS), prefix, local);
    if let Some(id) = &m.id {
        doc.set_attr(node, QName::plain("id"), id);
    }
    if !m.atoms.is_empty() {
        let array = doc.create_element(name("atomArray"));
        doc.append_child(node, array);
        for a in &m.atoms {
            let atom = doc.create_element(name("atom"));
            doc.append_child(array, atom);
            doc.set_attr(atom, QName::plain("id"), &a.id);
            doc.set_attr(atom, QName::plain("elementType"), &a.element);
            doc.set_attr(atom, QName::plain("atomType"), &a.atom_type);
            doc.set_attr(atom, QName::plain("x3"), format!("{:?}", a.position[0]));
            doc.set_attr(atom, QName::plain("y3"), format!("{:?}", a.position[1]));
            doc.set_attr(atom, QName::plain("z3"), format!("{:?}", a.position[2]));
            doc.set_attr(atom, QName::plain("charge"), format!("{:?}", a.charge));
        }
    }
    if !m.bonds.is_empty() {
        let array = doc.create_element(name("bondArray"));
        doc.append_child(node, array);
        for b in &m.bonds {
            let bond = doc.create_element(name("bond"));
            doc.append_child(array, bond);
            doc.set_attr(bond, QName::plain("atomRefs2"), format!("{} {}", b.a, b.b));
            if let Some(order) = &b.order {
                doc.set_attr(bond, QName::plain("order"), order);
            }
        }
    }
    for text in &m.annotations {
        if let Ok(frag) = parse_document(text) {
            let imported = doc.import(&frag, frag.root());
            doc.append_child(node, imported);
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    pub(crate) const WATER: &str = r#"<molecule xmlns="http://www.xml-cml.org/schema" id="water">
  <atomArray>
    <atom id="o1" elementType="O" atomType="OW" charge="-0.834" x3="0.0" y3="0.0" z3="0.0"/>
    <atom id="h1" elementType="H" atomType="HW" charge="0.417" x3="0.9572" y3="0.0" z3="0.0"/>
    <atom id="h2" elementType="H" atomType="HW" charge="0.417" x3="-0.2399872" y3="0.9266272" z3="0.0"/>
  </atomArray>
  <bondArray>
    <bond atomRefs2="o1 h1" order="1"/>
    <bond atomRefs2="o1 h2" order="1"/>
  </bondArray>
</molecule>"#;

    #[test]
    fn water_parses_with_symmetric_adjacency() {
        let m = parse_cml(WATER).unwrap();
        assert_eq!(m.atoms().len(), 3);
        assert_eq!(m.bonds().len(), 2);
        assert_eq!(m.id.as_deref(), Some("water"));
        let sets = interaction_sets(&m);
        assert_eq!(sets.bonds, vec![
            ("h1".to_owned(), "o1".to_owned()),
            ("h2".to_owned(), "o1".to_owned()),
        ]);
        assert_eq!(m.atom("o1").unwrap().charge, -0.834);
    }

    #[test]
    fn empty_molecule_is_fine() {
        let m = parse_cml(r#"<molecule xmlns="http://www.xml-cml.org/schema"><atomArray/></molecule>"#)
            .unwrap();
        assert!(m.atoms().is_empty());
        assert_eq!(m.molecular_mass().unwrap().value, 0.0);
        let again = parse_cml(&serialize_cml(&m)).unwrap();
        assert_eq!(m, again);
    }

    #[test]
    fn parse_errors() {
        let dangling = WATER.replace("o1 h2", "o1 a9");
        match parse_cml(&dangling) {
            Err(ChemError::DanglingBondRef(id)) => assert_eq!(id, "a9"),
            other => panic!("expected dangling-reference error, got {other:?}"),
        }

        let dup = WATER.replace("id=\"h2\"", "id=\"h1\"");
        assert!(matches!(parse_cml(&dup), Err(ChemError::DuplicateAtomId(_))));

        let missing = WATER.replace(" z3=\"0.0\"/>\n    <atom id=\"h1\"", "/>\n    <atom id=\"h1\"");
        assert!(matches!(
            parse_cml(&missing),
            Err(ChemError::MissingCoordinate { coord: "z3", .. })
        ));

        let selfbond = WATER.replace("o1 h2", "h2 h2");
        assert!(matches!(parse_cml(&selfbond), Err(ChemError::SelfBond(_))));

        let dupbond = WATER.replace("o1 h2", "h1 o1");
        assert!(matches!(parse_cml(&dupbond), Err(ChemError::DuplicateBond(..))));

        let alien = WATER.replace("elementType=\"O\"", "elementType=\"Qq\"");
        assert!(matches!(parse_cml(&alien), Err(ChemError::UnknownElement { .. })));

        let untyped = WATER.replace(" atomType=\"OW\"", "");
        assert!(matches!(parse_cml(&untyped), Err(ChemError::MissingAtomType(_))));
    }

    #[test]
    fn round_trip_is_identity_on_the_model() {
        let m = parse_cml(WATER).unwrap();
        let text = serialize_cml(&m);
        let again = parse_cml(&text).unwrap();
        assert_eq!(m, again);
        // and serialization itself is stable
        assert_eq!(serialize_cml(&again), text);
    }

    #[test]
    fn properties_and_unknown_children_survive_round_trips() {
        let with_extras = WATER.replace(
            "</molecule>",
            concat!(
                r#"  <property dictRef="ff:energy" title="total energy">"#,
                "\n",
                r#"    <scalar units="u:kcal.mol-1">-12.5</scalar>"#,
                "\n  </property>\n",
                r#"  <metadata xmlns="urn:other" origin="elsewhere"><note>kept</note></metadata>"#,
                "\n</molecule>"
            ),
        );
        let m = parse_cml(&with_extras).unwrap();
        assert_eq!(m.annotations().len(), 2);

        let props = m.scalar_properties();
        assert_eq!(props.len(), 1);
        assert_eq!(props[0].dict_ref.as_deref(), Some("ff:energy"));
        assert_eq!(props[0].value, -12.5);
        assert_eq!(props[0].units.as_deref(), Some("u:kcal.mol-1"));

        let text = serialize_cml(&m);
        let again = parse_cml(&text).unwrap();
        assert_eq!(m, again);
        assert!(text.contains("urn:other"), "foreign annotation kept: {text}");
    }

    #[test]
    fn distances_angles_masses() {
        let m = parse_cml(WATER).unwrap();
        let oh = m.distance("o1", "h1").unwrap();
        assert_eq!(oh.value, 0.9572);
        assert_eq!(oh.unit.as_deref(), Some("u:ang"));
        assert_eq!(
            m.distance("o1", "h1").unwrap().value,
            m.distance("h1", "o1").unwrap().value
        );
        assert_eq!(m.distance("o1", "o1").unwrap().value, 0.0);

        // geometry above was built for the 104.52 degree water angle
        let theta = m.angle("h1", "o1", "h2").unwrap();
        assert!((theta.value - 104.52f64.to_radians()).abs() < 1e-6, "{}", theta.value);

        // H2O mass from the embedded table: 2 * 1.008 + 15.999
        let mass = m.molecular_mass().unwrap();
        assert!((mass.value - 18.015).abs() < 1e-12);
        assert_eq!(mass.unit.as_deref(), Some("u:u"));

        assert!(matches!(m.distance("o1", "zz"), Err(ChemError::UnknownAtomId(_))));
        let degenerate = m.angle("o1", "o1", "h1");
        assert!(matches!(degenerate, Err(ChemError::DegenerateGeometry(_))));
    }

    #[test]
    fn pythagorean_distance_through_molecule() {
        let text = r#"<molecule xmlns="http://www.xml-cml.org/schema">
  <atomArray>
    <atom id="a" elementType="C" atomType="CT" x3="0" y3="0" z3="0"/>
    <atom id="b" elementType="C" atomType="CT" x3="3" y3="4" z3="0"/>
  </atomArray>
</molecule>"#;
        let m = parse_cml(text).unwrap();
        assert_eq!(m.distance("a", "b").unwrap().value, 5.0);
    }

    #[test]
    fn functional_coordinate_update() {
        let m = parse_cml(WATER).unwrap();
        let mut coords = m.coords_flat();
        coords[3] = 1.2; // move h1 along x
        let moved = m.with_coords_flat(&coords).unwrap();
        assert_eq!(moved.distance("o1", "h1").unwrap().value, 1.2);
        // original untouched
        assert_eq!(m.distance("o1", "h1").unwrap().value, 0.9572);
        assert_eq!(m.bonds(), moved.bonds());

        assert!(matches!(
            m.with_coords_flat(&coords[..5]),
            Err(ChemError::CoordinateCount { .. })
        ));
    }
}
