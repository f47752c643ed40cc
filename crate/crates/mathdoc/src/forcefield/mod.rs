//! AMBER-style forcefield parameter tables and energy evaluation.
//!
//! Parameters are keyed by atom-type tuples and stored in canonical units
//! (angstrom, radian, kcal/mol and products thereof), so energy evaluation
//! never converts units. Lookups are symmetric under the tuple reversals
//! that leave the interaction unchanged, and a missing parameter is a hard
//! error naming the tuple rather than a silent zero.

mod parse;

pub use parse::{forcefield_from_node, parse_forcefield};

use std::collections::BTreeMap;
use std::fmt;

use crate::chem::{interaction_sets, ChemError, Molecule};
use crate::mathml::{ConvertError, Dimension, Scalar};

/// Wildcard atom type accepted at the outer positions of a dihedral key.
pub const WILDCARD_TYPE: &str = "X";

pub const ENERGY_UNIT: &str = "u:kcal.mol-1";

/// Dimension of a bond force constant (energy per length squared).
pub const BOND_K_DIM: Dimension = Dimension { length: 0, mass: 1, time: -2, charge: 0, amount: -1 };
/// Dimension of an angle force constant (energy per radian squared; radians
/// carry no dimension).
pub const ANGLE_K_DIM: Dimension = Dimension::MOLAR_ENERGY;
pub const VDW_A_DIM: Dimension = Dimension { length: 14, mass: 1, time: -2, charge: 0, amount: -1 };
pub const VDW_B_DIM: Dimension = Dimension { length: 8, mass: 1, time: -2, charge: 0, amount: -1 };
pub const COULOMB_K_DIM: Dimension =
    Dimension { length: 3, mass: 1, time: -2, charge: -2, amount: -1 };

/// Default Coulomb constant in kcal*angstrom/(mol*e^2).
pub const DEFAULT_COULOMB_K: f64 = 332.0637;

#[derive(Debug, thiserror::Error)]
pub enum FfError {
    #[error("malformed forcefield: {0}")]
    Malformed(String),
    #[error("{group} entry ({tuple}) is missing required field {field}")]
    MissingField { group: String, tuple: String, field: String },
    #[error("{field} in {group} entry ({tuple}) has no units attribute")]
    MissingUnits { group: String, tuple: String, field: String },
    #[error("{field} in {group} entry ({tuple}) must be unitless, found units {units}")]
    UnexpectedUnits { group: String, tuple: String, field: String, units: String },
    #[error("{field} in {group} entry ({tuple}) has units {units}, expected a quantity convertible to {expected}")]
    WrongUnits { group: String, tuple: String, field: String, units: String, expected: String },
    #[error("{field} in {group} entry ({tuple}) is not a finite number: {text}")]
    BadNumber { group: String, tuple: String, field: String, text: String },
    #[error("force constant {field} in {group} entry ({tuple}) is negative: {value}")]
    NegativeForceConstant { group: String, tuple: String, field: String, value: f64 },
    #[error("periodicity in dihedral entry ({tuple}) must be a positive integer, found {value}")]
    BadPeriodicity { tuple: String, value: f64 },
    #[error("duplicate {group} entry for ({tuple})")]
    DuplicateEntry { group: String, tuple: String },
    #[error("wildcard type X is only allowed at the end positions of a dihedral, found it in {group} entry ({tuple})")]
    MisplacedWildcard { group: String, tuple: String },
    #[error("no bond parameters for atom types ({0}, {1})")]
    MissingBond(String, String),
    #[error("no angle parameters for atom types ({0}, {1}, {2})")]
    MissingAngle(String, String, String),
    #[error("no dihedral parameters for atom types ({0}, {1}, {2}, {3})")]
    MissingDihedral(String, String, String, String),
    #[error("no van der Waals parameters for atom type {0} (needed for pair ({0}, {1}))")]
    MissingVdw(String, String),
    #[error("dimension mismatch in {what}: {detail}")]
    DimensionMismatch { what: String, detail: String },
    #[error("degenerate geometry in {0}")]
    Degenerate(String),
    #[error(transparent)]
    Chem(#[from] ChemError),
    #[error(transparent)]
    Convert(#[from] ConvertError),
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BondParam {
    /// Force constant in kcal/(mol*angstrom^2).
    pub k: f64,
    /// Equilibrium length in angstrom.
    pub r_eq: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AngleParam {
    /// Force constant in kcal/(mol*radian^2).
    pub k: f64,
    /// Equilibrium angle in radian.
    pub theta_eq: f64,
}

/// One term of a torsion Fourier series, (vn/2)(1 + cos(n*phi - gamma)).
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FourierTerm {
    /// Barrier height in kcal/mol.
    pub vn: f64,
    /// Periodicity; always >= 1.
    pub n: i32,
    /// Phase in radian.
    pub gamma: f64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VdwParam {
    /// 12-power coefficient in kcal*angstrom^12/mol.
    pub a: f64,
    /// 6-power coefficient in kcal*angstrom^6/mol.
    pub b: f64,
}

/// Scale factors applied to a nonbonded pair separated by exactly three bonds.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Scale14 {
    pub vdw: f64,
    pub elec: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ForcefieldParams {
    bonds: BTreeMap<(String, String), BondParam>,
    angles: BTreeMap<(String, String, String), AngleParam>,
    dihedrals: BTreeMap<[String; 4], Vec<FourierTerm>>,
    vdw_types: BTreeMap<String, VdwParam>,
    vdw_pairs: BTreeMap<(String, String), VdwParam>,
    coulomb_k: Option<f64>,
    permittivity: Option<f64>,
    scale14_vdw: Option<f64>,
    scale14_elec: Option<f64>,
}

fn pair_key(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_string(), b.to_string())
    } else {
        (b.to_string(), a.to_string())
    }
}

fn angle_key(a: &str, b: &str, c: &str) -> (String, String, String) {
    // The central type is fixed; only the ends commute.
    if a <= c {
        (a.to_string(), b.to_string(), c.to_string())
    } else {
        (c.to_string(), b.to_string(), a.to_string())
    }
}

fn dihedral_key(t: [&str; 4]) -> [String; 4] {
    let fwd = [t[0], t[1], t[2], t[3]];
    let rev = [t[3], t[2], t[1], t[0]];
    let key = if fwd <= rev { fwd } else { rev };
    key.map(str::to_string)
}

impl ForcefieldParams {
    /// Coulomb constant in kcal*angstrom/(mol*e^2).
    pub fn coulomb_k(&self) -> f64 {
        self.coulomb_k.unwrap_or(DEFAULT_COULOMB_K)
    }

    /// Relative permittivity (dimensionless, constant per forcefield).
    pub fn permittivity(&self) -> f64 {
        self.permittivity.unwrap_or(1.0)
    }

    pub fn scale14(&self) -> Scale14 {
        Scale14 {
            vdw: self.scale14_vdw.unwrap_or(1.0),
            elec: self.scale14_elec.unwrap_or(1.0),
        }
    }

    pub fn set_coulomb_k(&mut self, ke: f64) {
        self.coulomb_k = Some(ke);
    }

    pub fn set_permittivity(&mut self, eps: f64) {
        self.permittivity = Some(eps);
    }

    pub fn set_scale14(&mut self, vdw: f64, elec: f64) {
        self.scale14_vdw = Some(vdw);
        self.scale14_elec = Some(elec);
    }

    pub fn lookup_bond(&self, a: &str, b: &str) -> Result<&BondParam, FfError> {
        self.bonds
            .get(&pair_key(a, b))
            .ok_or_else(|| FfError::MissingBond(a.to_string(), b.to_string()))
    }

    pub fn lookup_angle(&self, a: &str, b: &str, c: &str) -> Result<&AngleParam, FfError> {
        self.angles
            .get(&angle_key(a, b, c))
            .ok_or_else(|| FfError::MissingAngle(a.to_string(), b.to_string(), c.to_string()))
    }

    /// Resolves a dihedral type tuple to its Fourier terms.
    ///
    /// An exact key wins over a single-end wildcard, which wins over a
    /// wildcard at both ends. When both single-end candidates exist the
    /// lexicographically smaller stored key is taken, which keeps the result
    /// independent of the query's orientation.
    pub fn lookup_dihedral(
        &self,
        a: &str,
        b: &str,
        c: &str,
        d: &str,
    ) -> Result<&[FourierTerm], FfError> {
        let tiers: [Vec<[String; 4]>; 3] = [
            vec![dihedral_key([a, b, c, d])],
            vec![dihedral_key([WILDCARD_TYPE, b, c, d]), dihedral_key([a, b, c, WILDCARD_TYPE])],
            vec![dihedral_key([WILDCARD_TYPE, b, c, WILDCARD_TYPE])],
        ];
        for tier in &tiers {
            let mut keys: Vec<&[String; 4]> = tier.iter().collect();
            keys.sort();
            keys.dedup();
            for key in keys {
                if let Some(terms) = self.dihedrals.get(key) {
                    return Ok(terms);
                }
            }
        }
        Err(FfError::MissingDihedral(
            a.to_string(),
            b.to_string(),
            c.to_string(),
            d.to_string(),
        ))
    }

    /// Pair coefficients, either a direct pairwise entry or the geometric
    /// combination sqrt(A_ii * A_jj), sqrt(B_ii * B_jj) of per-type entries.
    pub fn lookup_vdw(&self, a: &str, b: &str) -> Result<VdwParam, FfError> {
        if let Some(p) = self.vdw_pairs.get(&pair_key(a, b)) {
            return Ok(*p);
        }
        let pa = self
            .vdw_types
            .get(a)
            .ok_or_else(|| FfError::MissingVdw(a.to_string(), b.to_string()))?;
        let pb = self
            .vdw_types
            .get(b)
            .ok_or_else(|| FfError::MissingVdw(b.to_string(), a.to_string()))?;
        Ok(VdwParam { a: (pa.a * pb.a).sqrt(), b: (pa.b * pb.b).sqrt() })
    }

    fn insert_bond(&mut self, a: &str, b: &str, p: BondParam) -> Result<(), FfError> {
        let key = pair_key(a, b);
        if self.bonds.insert(key, p).is_some() {
            return Err(FfError::DuplicateEntry {
                group: "bond".into(),
                tuple: format!("{a}, {b}"),
            });
        }
        Ok(())
    }

    fn insert_angle(&mut self, a: &str, b: &str, c: &str, p: AngleParam) -> Result<(), FfError> {
        let key = angle_key(a, b, c);
        if self.angles.insert(key, p).is_some() {
            return Err(FfError::DuplicateEntry {
                group: "angle".into(),
                tuple: format!("{a}, {b}, {c}"),
            });
        }
        Ok(())
    }

    fn insert_dihedral(&mut self, t: [&str; 4], terms: Vec<FourierTerm>) -> Result<(), FfError> {
        let key = dihedral_key(t);
        if self.dihedrals.insert(key, terms).is_some() {
            return Err(FfError::DuplicateEntry {
                group: "dihedral".into(),
                tuple: t.join(", "),
            });
        }
        Ok(())
    }

    fn insert_vdw_type(&mut self, t: &str, p: VdwParam) -> Result<(), FfError> {
        if self.vdw_types.insert(t.to_string(), p).is_some() {
            return Err(FfError::DuplicateEntry { group: "vdw".into(), tuple: t.to_string() });
        }
        Ok(())
    }

    fn insert_vdw_pair(&mut self, a: &str, b: &str, p: VdwParam) -> Result<(), FfError> {
        let key = pair_key(a, b);
        if self.vdw_pairs.insert(key, p).is_some() {
            return Err(FfError::DuplicateEntry {
                group: "vdw".into(),
                tuple: format!("{a}, {b}"),
            });
        }
        Ok(())
    }
}

/// Per-component energies in kcal/mol; `total` is the exact floating-point
/// sum bond + angle + dihedral + vdw + electrostatic, in that order.
#[derive(Debug, Clone, PartialEq)]
pub struct EnergyBreakdown {
    pub bond: Scalar,
    pub angle: Scalar,
    pub dihedral: Scalar,
    pub vdw: Scalar,
    pub electrostatic: Scalar,
    pub total: Scalar,
}

#[derive(Debug, Clone, PartialEq)]
pub struct NonbondedEnergy {
    pub vdw: Scalar,
    pub elec: Scalar,
}

fn energy_scalar(value: f64) -> Scalar {
    Scalar::with_unit(value, Dimension::MOLAR_ENERGY, ENERGY_UNIT)
}

fn expect_dim(what: &str, s: &Scalar, dim: Dimension) -> Result<(), FfError> {
    if s.dim != dim {
        return Err(FfError::DimensionMismatch {
            what: what.to_string(),
            detail: format!("expected {dim}, found {}", s.dim),
        });
    }
    Ok(())
}

/// Harmonic stretch K_r (r - r_eq)^2.
pub fn bond_energy(k: &Scalar, r_eq: &Scalar, r: &Scalar) -> Result<Scalar, FfError> {
    expect_dim("bond force constant", k, BOND_K_DIM)?;
    expect_dim("bond equilibrium length", r_eq, Dimension::LENGTH)?;
    expect_dim("bond length", r, Dimension::LENGTH)?;
    Ok(energy_scalar(k.value * (r.value - r_eq.value).powi(2)))
}

/// Harmonic bend K_theta (theta - theta_eq)^2.
pub fn angle_energy(k: &Scalar, theta_eq: &Scalar, theta: &Scalar) -> Result<Scalar, FfError> {
    expect_dim("angle force constant", k, ANGLE_K_DIM)?;
    expect_dim("equilibrium angle", theta_eq, Dimension::DIMENSIONLESS)?;
    expect_dim("angle", theta, Dimension::DIMENSIONLESS)?;
    Ok(energy_scalar(k.value * (theta.value - theta_eq.value).powi(2)))
}

/// Fourier series sum over terms of (vn/2)(1 + cos(n*phi - gamma)).
pub fn dihedral_energy(terms: &[FourierTerm], phi: &Scalar) -> Result<Scalar, FfError> {
    expect_dim("torsion angle", phi, Dimension::DIMENSIONLESS)?;
    let mut e = 0.0;
    for t in terms {
        e += t.vn / 2.0 * (1.0 + (f64::from(t.n) * phi.value - t.gamma).cos());
    }
    Ok(energy_scalar(e))
}

/// Lennard-Jones A/R^12 - B/R^6 plus Coulomb k_e q_i q_j / (eps R).
///
/// `scale` carries the 1-4 factors and must be `Some` exactly when the pair
/// is separated by three bonds. R must be strictly positive.
pub fn nonbonded_energy(
    a: &Scalar,
    b: &Scalar,
    q_i: &Scalar,
    q_j: &Scalar,
    r: &Scalar,
    ke: &Scalar,
    eps: &Scalar,
    scale: Option<Scale14>,
) -> Result<NonbondedEnergy, FfError> {
    expect_dim("vdw coefficient A", a, VDW_A_DIM)?;
    expect_dim("vdw coefficient B", b, VDW_B_DIM)?;
    expect_dim("charge q_i", q_i, Dimension::CHARGE)?;
    expect_dim("charge q_j", q_j, Dimension::CHARGE)?;
    expect_dim("pair distance", r, Dimension::LENGTH)?;
    expect_dim("Coulomb constant", ke, COULOMB_K_DIM)?;
    expect_dim("permittivity", eps, Dimension::DIMENSIONLESS)?;
    if !(r.value > 0.0) {
        return Err(FfError::Degenerate(format!(
            "nonbonded pair at distance {:?}",
            r.value
        )));
    }
    let mut vdw = a.value / r.value.powi(12) - b.value / r.value.powi(6);
    let mut elec = ke.value * q_i.value * q_j.value / (eps.value * r.value);
    if let Some(s) = scale {
        vdw *= s.vdw;
        elec *= s.elec;
    }
    Ok(NonbondedEnergy { vdw: energy_scalar(vdw), elec: energy_scalar(elec) })
}

/// Sums every bonded and nonbonded term of `m` under `p`.
///
/// Interaction sets come from the bond graph; a missing parameter for any
/// interaction aborts with an error naming the atom-type tuple.
pub fn total_energy(m: &Molecule, p: &ForcefieldParams) -> Result<EnergyBreakdown, FfError> {
    let sets = interaction_sets(m);
    let atom_type = |id: &str| -> &str { &m.atom(id).expect("interaction ids exist").atom_type };

    let mut bond = 0.0;
    for (a, b) in &sets.bonds {
        let bp = p.lookup_bond(atom_type(a), atom_type(b))?;
        let r = m.distance(a, b)?;
        bond += bp.k * (r.value - bp.r_eq).powi(2);
    }

    let mut angle = 0.0;
    for (i, j, k) in &sets.angles {
        let ap = p.lookup_angle(atom_type(i), atom_type(j), atom_type(k))?;
        let theta = m.angle(i, j, k)?;
        angle += ap.k * (theta.value - ap.theta_eq).powi(2);
    }

    let mut dihedral = 0.0;
    for (i, j, k, l) in &sets.dihedrals {
        let terms =
            p.lookup_dihedral(atom_type(i), atom_type(j), atom_type(k), atom_type(l))?;
        let phi = m.dihedral(i, j, k, l)?;
        for t in terms {
            dihedral += t.vn / 2.0 * (1.0 + (f64::from(t.n) * phi.value - t.gamma).cos());
        }
    }

    let ke = p.coulomb_k();
    let eps = p.permittivity();
    let s14 = p.scale14();
    let mut vdw = 0.0;
    let mut elec = 0.0;
    for pair in &sets.nonbonded {
        let vp = p.lookup_vdw(atom_type(&pair.a), atom_type(&pair.b))?;
        let r = m.distance(&pair.a, &pair.b)?;
        if !(r.value > 0.0) {
            return Err(FfError::Degenerate(format!(
                "nonbonded pair ({}, {}) at distance {:?}",
                pair.a, pair.b, r.value
            )));
        }
        let qi = m.atom(&pair.a)?.charge;
        let qj = m.atom(&pair.b)?.charge;
        let mut ev = vp.a / r.value.powi(12) - vp.b / r.value.powi(6);
        let mut ee = ke * qi * qj / (eps * r.value);
        if pair.is14 {
            ev *= s14.vdw;
            ee *= s14.elec;
        }
        vdw += ev;
        elec += ee;
    }

    let total = bond + angle + dihedral + vdw + elec;
    Ok(EnergyBreakdown {
        bond: energy_scalar(bond),
        angle: energy_scalar(angle),
        dihedral: energy_scalar(dihedral),
        vdw: energy_scalar(vdw),
        electrostatic: energy_scalar(elec),
        total: energy_scalar(total),
    })
}

impl fmt::Display for EnergyBreakdown {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(
            f,
            "bond {:?} angle {:?} dihedral {:?} vdw {:?} elec {:?} total {:?} kcal/mol",
            self.bond.value,
            self.angle.value,
            self.dihedral.value,
            self.vdw.value,
            self.electrostatic.value,
            self.total.value
        )
    }
}
