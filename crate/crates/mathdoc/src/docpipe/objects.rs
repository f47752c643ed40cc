//! Domain objects visible to formulas, and the host functions over them.
//!
//! Formulas never see XML. A binding hands them an opaque object (a
//! molecule, a forcefield, or one interaction picked out of a molecule) and
//! the `get*`/`ff*` functions registered here project numbers out of those
//! objects. Every projection declares its result dimension, so the static
//! checker can type whole energy expressions, and an aggregation over an
//! empty interaction set still knows the dimension its zero should carry.
//!
//! Each function is registered twice, under its short name and under a URI
//! (`urn:mathdoc:chem#...` for structure and geometry, `urn:mathdoc:ff#...`
//! for parameter access), so documents can pin the URI form in
//! `definitionURL` while keeping the short form readable.

use std::any::Any;
use std::sync::Arc;

use crate::chem::{atom_mass, interaction_sets, Molecule};
use crate::forcefield::{
    ForcefieldParams, FourierTerm, BOND_K_DIM, COULOMB_K_DIM, VDW_A_DIM, VDW_B_DIM,
};
use crate::mathml::value::DomainObject;
use crate::mathml::{
    Context, Dimension, DictionarySet, EvalError, NativeFn, ObjectHandle, Scalar, Value,
};

pub const CHEM_FN_NS: &str = "urn:mathdoc:chem";
pub const FF_FN_NS: &str = "urn:mathdoc:ff";

/// Objects a computational document can bind into a formula.
#[derive(Debug, Clone)]
pub enum DocObj {
    Molecule(Arc<Molecule>),
    Forcefield(Arc<ForcefieldParams>),
    Atom {
        mol: Arc<Molecule>,
        id: String,
    },
    /// An unordered atom pair: a bond when `bonded`, otherwise a nonbonded
    /// pair with its three-bond-separation flag.
    Pair {
        mol: Arc<Molecule>,
        a: String,
        b: String,
        bonded: bool,
        is14: bool,
    },
    Angle {
        mol: Arc<Molecule>,
        i: String,
        j: String,
        k: String,
    },
    /// A torsion path i-j-k-l; `term` is present when the object stands for
    /// one Fourier term of that torsion rather than the bare geometry.
    Torsion {
        mol: Arc<Molecule>,
        path: [String; 4],
        term: Option<FourierTerm>,
    },
}

impl DomainObject for DocObj {
    fn kind(&self) -> &'static str {
        match self {
            DocObj::Molecule(_) => "molecule",
            DocObj::Forcefield(_) => "forcefield",
            DocObj::Atom { .. } => "atom",
            DocObj::Pair { .. } => "pair",
            DocObj::Angle { .. } => "angle",
            DocObj::Torsion { .. } => "torsion",
        }
    }

    fn as_any(&self) -> &dyn Any {
        self
    }
}

fn want_obj<'a>(what: &str, v: &'a Value) -> Result<&'a DocObj, EvalError> {
    match v {
        Value::Object(h) => h.downcast_ref::<DocObj>().ok_or_else(|| EvalError::Type {
            what: what.into(),
            expected: "a document object",
            got: v.kind(),
        }),
        other => Err(EvalError::Type {
            what: what.into(),
            expected: "an object",
            got: other.kind(),
        }),
    }
}

fn want_molecule<'a>(what: &str, v: &'a Value) -> Result<&'a Arc<Molecule>, EvalError> {
    match want_obj(what, v)? {
        DocObj::Molecule(m) => Ok(m),
        other => Err(EvalError::Type {
            what: what.into(),
            expected: "a molecule",
            got: format!("object({})", other.kind()),
        }),
    }
}

fn want_forcefield<'a>(
    what: &str,
    v: &'a Value,
) -> Result<&'a Arc<ForcefieldParams>, EvalError> {
    match want_obj(what, v)? {
        DocObj::Forcefield(p) => Ok(p),
        other => Err(EvalError::Type {
            what: what.into(),
            expected: "a forcefield",
            got: format!("object({})", other.kind()),
        }),
    }
}

fn domain(what: &str, e: impl std::fmt::Display) -> EvalError {
    EvalError::Domain { what: what.into(), msg: e.to_string() }
}

fn atom_type<'a>(what: &str, m: &'a Molecule, id: &str) -> Result<&'a str, EvalError> {
    Ok(&m.atom(id).map_err(|e| domain(what, e))?.atom_type)
}

fn obj(o: DocObj) -> Value {
    Value::Object(ObjectHandle::new(o))
}

/// Context with every chemistry and forcefield function registered,
/// evaluating against `dicts` for unit conversions.
pub fn base_context(dicts: Arc<DictionarySet>) -> Context {
    let mut ctx = Context::new(dicts);
    let mut add = |name: &str, uri_ns: &str, arity, dim, f: &NativeFnImpl| {
        let call = f.clone();
        let nf = NativeFn::new(name, arity, dim, move |args: &[Value]| call(args));
        let uri = format!("{uri_ns}#{name}");
        ctx = ctx
            .register_function(name, nf.clone())
            .and_then(|c| c.register_function(&uri, nf))
            .expect("native keys are distinct");
    };

    for (name, arity, dim, f) in chem_natives() {
        add(name, CHEM_FN_NS, arity, dim, &f);
    }
    for (name, arity, dim, f) in ff_natives() {
        add(name, FF_FN_NS, arity, dim, &f);
    }
    ctx
}

type NativeFnImpl = Arc<dyn Fn(&[Value]) -> Result<Value, EvalError> + Send + Sync>;
type NativeSpec = (&'static str, usize, Option<Dimension>, NativeFnImpl);

fn native(
    name: &'static str,
    arity: usize,
    dim: Option<Dimension>,
    f: impl Fn(&[Value]) -> Result<Value, EvalError> + Send + Sync + 'static,
) -> NativeSpec {
    (name, arity, dim, Arc::new(f))
}

fn chem_natives() -> Vec<NativeSpec> {
    vec![
        native("getAtoms", 1, None, |args| {
            let m = want_molecule("getAtoms", &args[0])?;
            Ok(Value::Seq(
                m.atoms()
                    .iter()
                    .map(|a| obj(DocObj::Atom { mol: m.clone(), id: a.id.clone() }))
                    .collect(),
            ))
        }),
        native("getBonds", 1, None, |args| {
            let m = want_molecule("getBonds", &args[0])?;
            Ok(Value::Seq(
                interaction_sets(m)
                    .bonds
                    .into_iter()
                    .map(|(a, b)| {
                        obj(DocObj::Pair { mol: m.clone(), a, b, bonded: true, is14: false })
                    })
                    .collect(),
            ))
        }),
        native("getAngles", 1, None, |args| {
            let m = want_molecule("getAngles", &args[0])?;
            Ok(Value::Seq(
                interaction_sets(m)
                    .angles
                    .into_iter()
                    .map(|(i, j, k)| obj(DocObj::Angle { mol: m.clone(), i, j, k }))
                    .collect(),
            ))
        }),
        native("getDihedrals", 1, None, |args| {
            let m = want_molecule("getDihedrals", &args[0])?;
            Ok(Value::Seq(
                interaction_sets(m)
                    .dihedrals
                    .into_iter()
                    .map(|(i, j, k, l)| {
                        obj(DocObj::Torsion { mol: m.clone(), path: [i, j, k, l], term: None })
                    })
                    .collect(),
            ))
        }),
        native("getNonbondedPairs", 1, None, |args| {
            let m = want_molecule("getNonbondedPairs", &args[0])?;
            Ok(Value::Seq(
                interaction_sets(m)
                    .nonbonded
                    .into_iter()
                    .map(|p| {
                        obj(DocObj::Pair {
                            mol: m.clone(),
                            a: p.a,
                            b: p.b,
                            bonded: false,
                            is14: p.is14,
                        })
                    })
                    .collect(),
            ))
        }),
        native("getMass", 1, Some(Dimension::MASS), |args| {
            match want_obj("getMass", &args[0])? {
                DocObj::Molecule(m) => {
                    Ok(Value::Scalar(m.molecular_mass().map_err(|e| domain("getMass", e))?))
                }
                DocObj::Atom { mol, id } => {
                    let a = mol.atom(id).map_err(|e| domain("getMass", e))?;
                    Ok(Value::Scalar(atom_mass(a).map_err(|e| domain("getMass", e))?))
                }
                other => Err(EvalError::Type {
                    what: "getMass".into(),
                    expected: "an atom or a molecule",
                    got: format!("object({})", other.kind()),
                }),
            }
        }),
        native("getCharge", 1, Some(Dimension::CHARGE), |args| {
            match want_obj("getCharge", &args[0])? {
                DocObj::Atom { mol, id } => {
                    let a = mol.atom(id).map_err(|e| domain("getCharge", e))?;
                    Ok(Value::Scalar(Scalar::with_unit(a.charge, Dimension::CHARGE, "u:e")))
                }
                other => Err(EvalError::Type {
                    what: "getCharge".into(),
                    expected: "an atom",
                    got: format!("object({})", other.kind()),
                }),
            }
        }),
        native("getLength", 1, Some(Dimension::LENGTH), |args| {
            match want_obj("getLength", &args[0])? {
                DocObj::Pair { mol, a, b, .. } => {
                    Ok(Value::Scalar(mol.distance(a, b).map_err(|e| domain("getLength", e))?))
                }
                other => Err(EvalError::Type {
                    what: "getLength".into(),
                    expected: "an atom pair",
                    got: format!("object({})", other.kind()),
                }),
            }
        }),
        native("getAngle", 1, Some(Dimension::DIMENSIONLESS), |args| {
            match want_obj("getAngle", &args[0])? {
                DocObj::Angle { mol, i, j, k } => {
                    Ok(Value::Scalar(mol.angle(i, j, k).map_err(|e| domain("getAngle", e))?))
                }
                other => Err(EvalError::Type {
                    what: "getAngle".into(),
                    expected: "an angle",
                    got: format!("object({})", other.kind()),
                }),
            }
        }),
        native("getTorsion", 1, Some(Dimension::DIMENSIONLESS), |args| {
            match want_obj("getTorsion", &args[0])? {
                DocObj::Torsion { mol, path: [i, j, k, l], .. } => Ok(Value::Scalar(
                    mol.dihedral(i, j, k, l).map_err(|e| domain("getTorsion", e))?,
                )),
                other => Err(EvalError::Type {
                    what: "getTorsion".into(),
                    expected: "a torsion",
                    got: format!("object({})", other.kind()),
                }),
            }
        }),
        native("getFirstAtom", 1, None, |args| pair_end("getFirstAtom", &args[0], 0)),
        native("getSecondAtom", 1, None, |args| pair_end("getSecondAtom", &args[0], 1)),
    ]
}

fn pair_end(what: &str, v: &Value, end: usize) -> Result<Value, EvalError> {
    match want_obj(what, v)? {
        DocObj::Pair { mol, a, b, .. } => {
            let id = if end == 0 { a } else { b };
            Ok(obj(DocObj::Atom { mol: mol.clone(), id: id.clone() }))
        }
        other => Err(EvalError::Type {
            what: what.into(),
            expected: "an atom pair",
            got: format!("object({})", other.kind()),
        }),
    }
}

fn want_pair<'a>(
    what: &str,
    v: &'a Value,
) -> Result<(&'a Arc<Molecule>, &'a str, &'a str), EvalError> {
    match want_obj(what, v)? {
        DocObj::Pair { mol, a, b, .. } => Ok((mol, a, b)),
        other => Err(EvalError::Type {
            what: what.into(),
            expected: "an atom pair",
            got: format!("object({})", other.kind()),
        }),
    }
}

fn want_angle<'a>(
    what: &str,
    v: &'a Value,
) -> Result<(&'a Arc<Molecule>, &'a str, &'a str, &'a str), EvalError> {
    match want_obj(what, v)? {
        DocObj::Angle { mol, i, j, k } => Ok((mol, i, j, k)),
        other => Err(EvalError::Type {
            what: what.into(),
            expected: "an angle",
            got: format!("object({})", other.kind()),
        }),
    }
}

fn want_term(what: &str, v: &Value) -> Result<FourierTerm, EvalError> {
    match want_obj(what, v)? {
        DocObj::Torsion { term: Some(t), .. } => Ok(*t),
        DocObj::Torsion { term: None, .. } => Err(EvalError::Domain {
            what: what.into(),
            msg: "torsion carries no Fourier term (use getDihedralTerms, not getDihedrals)"
                .into(),
        }),
        other => Err(EvalError::Type {
            what: what.into(),
            expected: "a torsion term",
            got: format!("object({})", other.kind()),
        }),
    }
}

fn pair_types<'a>(
    what: &str,
    m: &'a Molecule,
    a: &str,
    b: &str,
) -> Result<(&'a str, &'a str), EvalError> {
    Ok((atom_type(what, m, a)?, atom_type(what, m, b)?))
}

fn ff_natives() -> Vec<NativeSpec> {
    vec![
        native("getDihedralTerms", 2, None, |args| {
            let what = "getDihedralTerms";
            let p = want_forcefield(what, &args[0])?;
            let m = want_molecule(what, &args[1])?;
            let mut out = Vec::new();
            for (i, j, k, l) in interaction_sets(m).dihedrals {
                let terms = p
                    .lookup_dihedral(
                        atom_type(what, m, &i)?,
                        atom_type(what, m, &j)?,
                        atom_type(what, m, &k)?,
                        atom_type(what, m, &l)?,
                    )
                    .map_err(|e| domain(what, e))?;
                for t in terms {
                    out.push(obj(DocObj::Torsion {
                        mol: m.clone(),
                        path: [i.clone(), j.clone(), k.clone(), l.clone()],
                        term: Some(*t),
                    }));
                }
            }
            Ok(Value::Seq(out))
        }),
        native("ffBondK", 2, Some(BOND_K_DIM), |args| {
            let what = "ffBondK";
            let p = want_forcefield(what, &args[0])?;
            let (m, a, b) = want_pair(what, &args[1])?;
            let (ta, tb) = pair_types(what, m, a, b)?;
            let bp = p.lookup_bond(ta, tb).map_err(|e| domain(what, e))?;
            Ok(Value::Scalar(Scalar::new(bp.k, BOND_K_DIM)))
        }),
        native("ffBondR0", 2, Some(Dimension::LENGTH), |args| {
            let what = "ffBondR0";
            let p = want_forcefield(what, &args[0])?;
            let (m, a, b) = want_pair(what, &args[1])?;
            let (ta, tb) = pair_types(what, m, a, b)?;
            let bp = p.lookup_bond(ta, tb).map_err(|e| domain(what, e))?;
            Ok(Value::Scalar(Scalar::with_unit(bp.r_eq, Dimension::LENGTH, "u:ang")))
        }),
        native("ffAngleK", 2, Some(Dimension::MOLAR_ENERGY), |args| {
            let what = "ffAngleK";
            let p = want_forcefield(what, &args[0])?;
            let (m, i, j, k) = want_angle(what, &args[1])?;
            let ap = p
                .lookup_angle(
                    atom_type(what, m, i)?,
                    atom_type(what, m, j)?,
                    atom_type(what, m, k)?,
                )
                .map_err(|e| domain(what, e))?;
            Ok(Value::Scalar(Scalar::new(ap.k, Dimension::MOLAR_ENERGY)))
        }),
        native("ffAngleTheta0", 2, Some(Dimension::DIMENSIONLESS), |args| {
            let what = "ffAngleTheta0";
            let p = want_forcefield(what, &args[0])?;
            let (m, i, j, k) = want_angle(what, &args[1])?;
            let ap = p
                .lookup_angle(
                    atom_type(what, m, i)?,
                    atom_type(what, m, j)?,
                    atom_type(what, m, k)?,
                )
                .map_err(|e| domain(what, e))?;
            Ok(Value::Scalar(Scalar::with_unit(
                ap.theta_eq,
                Dimension::DIMENSIONLESS,
                "u:rad",
            )))
        }),
        native("ffBarrier", 1, Some(Dimension::MOLAR_ENERGY), |args| {
            let t = want_term("ffBarrier", &args[0])?;
            Ok(Value::Scalar(Scalar::with_unit(
                t.vn,
                Dimension::MOLAR_ENERGY,
                crate::forcefield::ENERGY_UNIT,
            )))
        }),
        native("ffPeriodicity", 1, Some(Dimension::DIMENSIONLESS), |args| {
            let t = want_term("ffPeriodicity", &args[0])?;
            Ok(Value::Scalar(Scalar::dimensionless(f64::from(t.n))))
        }),
        native("ffPhase", 1, Some(Dimension::DIMENSIONLESS), |args| {
            let t = want_term("ffPhase", &args[0])?;
            Ok(Value::Scalar(Scalar::with_unit(t.gamma, Dimension::DIMENSIONLESS, "u:rad")))
        }),
        native("ffVdwA", 2, Some(VDW_A_DIM), |args| {
            let what = "ffVdwA";
            let p = want_forcefield(what, &args[0])?;
            let (m, a, b) = want_pair(what, &args[1])?;
            let (ta, tb) = pair_types(what, m, a, b)?;
            let vp = p.lookup_vdw(ta, tb).map_err(|e| domain(what, e))?;
            Ok(Value::Scalar(Scalar::new(vp.a, VDW_A_DIM)))
        }),
        native("ffVdwB", 2, Some(VDW_B_DIM), |args| {
            let what = "ffVdwB";
            let p = want_forcefield(what, &args[0])?;
            let (m, a, b) = want_pair(what, &args[1])?;
            let (ta, tb) = pair_types(what, m, a, b)?;
            let vp = p.lookup_vdw(ta, tb).map_err(|e| domain(what, e))?;
            Ok(Value::Scalar(Scalar::new(vp.b, VDW_B_DIM)))
        }),
        native("ffCoulombK", 1, Some(COULOMB_K_DIM), |args| {
            let p = want_forcefield("ffCoulombK", &args[0])?;
            Ok(Value::Scalar(Scalar::new(p.coulomb_k(), COULOMB_K_DIM)))
        }),
        native("ffPermittivity", 1, Some(Dimension::DIMENSIONLESS), |args| {
            let p = want_forcefield("ffPermittivity", &args[0])?;
            Ok(Value::Scalar(Scalar::dimensionless(p.permittivity())))
        }),
        native("ffVdwScale", 2, Some(Dimension::DIMENSIONLESS), |args| {
            nonbonded_scale("ffVdwScale", args, |s| s.vdw)
        }),
        native("ffElecScale", 2, Some(Dimension::DIMENSIONLESS), |args| {
            nonbonded_scale("ffElecScale", args, |s| s.elec)
        }),
    ]
}

/// 1.0 for ordinary pairs, the forcefield's 1-4 factor for pairs separated
/// by exactly three bonds. Bonded pairs are outside the nonbonded sum.
fn nonbonded_scale(
    what: &str,
    args: &[Value],
    pick: impl Fn(crate::forcefield::Scale14) -> f64,
) -> Result<Value, EvalError> {
    let p = want_forcefield(what, &args[0])?;
    match want_obj(what, &args[1])? {
        DocObj::Pair { bonded: false, is14, .. } => {
            let v = if *is14 { pick(p.scale14()) } else { 1.0 };
            Ok(Value::Scalar(Scalar::dimensionless(v)))
        }
        DocObj::Pair { bonded: true, .. } => Err(EvalError::Domain {
            what: what.into(),
            msg: "scale factors apply to nonbonded pairs, this pair is a bond".into(),
        }),
        other => Err(EvalError::Type {
            what: what.into(),
            expected: "a nonbonded pair",
            got: format!("object({})", other.kind()),
        }),
    }
}
