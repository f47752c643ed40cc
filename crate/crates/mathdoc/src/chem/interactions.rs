//! Enumeration of the interaction sets a forcefield sums over.
//!
//! Everything is a function of the bond list alone. Tuples are canonical
//! (bonds and nonbonded pairs lesser id first; angles lesser end first;
//! dihedrals oriented so the lesser end atom leads, middle atoms breaking
//! the tie when the ends coincide in a three-ring) and the lists are sorted
//! lexicographically, so output order is reproducible byte for byte.

use super::Molecule;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NonbondedPair {
    pub a: String,
    pub b: String,
    /// True when the pair is the two ends of a three-bond path; forcefields
    /// scale these instead of excluding them.
    pub is14: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct InteractionSets {
    /// Unordered bonded pairs, lesser id first.
    pub bonds: Vec<(String, String)>,
    /// (i, j, k) with j central and i < k.
    pub angles: Vec<(String, String, String)>,
    /// Bonded paths i-j-k-l with j≠l and i≠k; i may equal l in a ring.
    pub dihedrals: Vec<(String, String, String, String)>,
    /// Pairs that are neither 1-2 nor 1-3.
    pub nonbonded: Vec<NonbondedPair>,
}

pub fn interaction_sets(m: &Molecule) -> InteractionSets {
    let mut adj: BTreeMap<&str, BTreeSet<&str>> = BTreeMap::new();
    for a in m.atoms() {
        adj.insert(&a.id, BTreeSet::new());
    }
    for b in m.bonds() {
        adj.get_mut(b.a.as_str()).unwrap().insert(&b.b);
        adj.get_mut(b.b.as_str()).unwrap().insert(&b.a);
    }

    let mut bonds: Vec<(String, String)> = m
        .bonds()
        .iter()
        .map(|b| order_pair(&b.a, &b.b))
        .collect();
    bonds.sort();

    let mut angles = Vec::new();
    for (j, nbrs) in &adj {
        let nbrs: Vec<&&str> = nbrs.iter().collect();
        for x in 0..nbrs.len() {
            for y in x + 1..nbrs.len() {
                angles.push(((*nbrs[x]).to_owned(), (*j).to_owned(), (*nbrs[y]).to_owned()));
            }
        }
    }
    angles.sort();

    let mut dihedrals: BTreeSet<(String, String, String, String)> = BTreeSet::new();
    for bond in m.bonds() {
        for (j, k) in [(&bond.a, &bond.b), (&bond.b, &bond.a)] {
            for i in &adj[j.as_str()] {
                if *i == k.as_str() {
                    continue;
                }
                for l in &adj[k.as_str()] {
                    if *l == j.as_str() {
                        continue;
                    }
                    dihedrals.insert(orient_dihedral(i, j, k, l));
                }
            }
        }
    }
    let dihedrals: Vec<_> = dihedrals.into_iter().collect();

    let excluded: BTreeSet<(String, String)> = bonds
        .iter()
        .cloned()
        .chain(angles.iter().map(|(i, _, k)| order_pair(i, k)))
        .collect();
    let pairs14: BTreeSet<(String, String)> = dihedrals
        .iter()
        .filter(|(i, _, _, l)| i != l)
        .map(|(i, _, _, l)| order_pair(i, l))
        .collect();

    let ids: Vec<&str> = adj.keys().copied().collect();
    let mut nonbonded = Vec::new();
    for x in 0..ids.len() {
        for y in x + 1..ids.len() {
            let pair = order_pair(ids[x], ids[y]);
            if excluded.contains(&pair) {
                continue;
            }
            let is14 = pairs14.contains(&pair);
            nonbonded.push(NonbondedPair { a: pair.0, b: pair.1, is14 });
        }
    }

    InteractionSets { bonds, angles, dihedrals, nonbonded }
}

fn order_pair(a: &str, b: &str) -> (String, String) {
    if a <= b {
        (a.to_owned(), b.to_owned())
    } else {
        (b.to_owned(), a.to_owned())
    }
}

fn orient_dihedral(i: &str, j: &str, k: &str, l: &str) -> (String, String, String, String) {
    let forward = match i.cmp(l) {
        std::cmp::Ordering::Less => true,
        std::cmp::Ordering::Greater => false,
        std::cmp::Ordering::Equal => j < k,
    };
    if forward {
        (i.to_owned(), j.to_owned(), k.to_owned(), l.to_owned())
    } else {
        (l.to_owned(), k.to_owned(), j.to_owned(), i.to_owned())
    }
}

#[cfg(test)]
mod tests {
    use super::super::{Atom, Bond, Molecule};
    use super::*;
    use proptest::prelude::*;

    fn molecule(n: usize, edges: &[(usize, usize)]) -> Molecule {
        let atoms = (0..n)
            .map(|i| Atom {
                id: format!("a{i}"),
                element: "C".into(),
                atom_type: "CT".into(),
                charge: 0.0,
                position: [i as f64, 0.5 * i as f64, 0.0],
            })
            .collect();
        let bonds = edges
            .iter()
            .map(|(x, y)| Bond { a: format!("a{x}"), b: format!("a{y}"), order: None })
            .collect();
        Molecule::new(None, atoms, bonds, vec![]).unwrap()
    }

    /// Brute force over all tuples, straight from the definitions.
    fn oracle(m: &Molecule) -> InteractionSets {
        let ids: Vec<&str> = m.atoms().iter().map(|a| a.id.as_str()).collect();
        let bonded = |x: &str, y: &str| {
            m.bonds()
                .iter()
                .any(|b| (b.a == x && b.b == y) || (b.a == y && b.b == x))
        };

        let mut bonds = Vec::new();
        for &x in &ids {
            for &y in &ids {
                if x < y && bonded(x, y) {
                    bonds.push((x.to_owned(), y.to_owned()));
                }
            }
        }
        bonds.sort();

        let mut angles = Vec::new();
        for &i in &ids {
            for &j in &ids {
                for &k in &ids {
                    if i < k && i != j && j != k && bonded(i, j) && bonded(j, k) {
                        angles.push((i.to_owned(), j.to_owned(), k.to_owned()));
                    }
                }
            }
        }
        angles.sort();

        let mut dihedrals = BTreeSet::new();
        for &i in &ids {
            for &j in &ids {
                for &k in &ids {
                    for &l in &ids {
                        if i != k
                            && j != l
                            && bonded(i, j)
                            && bonded(j, k)
                            && bonded(k, l)
                        {
                            dihedrals.insert(orient_dihedral(i, j, k, l));
                        }
                    }
                }
            }
        }
        let dihedrals: Vec<_> = dihedrals.into_iter().collect();

        let mut nonbonded = Vec::new();
        for &x in &ids {
            for &y in &ids {
                if x >= y || bonded(x, y) {
                    continue;
                }
                let is13 = ids.iter().any(|&mid| bonded(x, mid) && bonded(mid, y));
                if is13 {
                    continue;
                }
                let is14 = ids.iter().any(|&p| {
                    ids.iter().any(|&q| {
                        p != q
                            && p != y
                            && q != x
                            && bonded(x, p)
                            && bonded(p, q)
                            && bonded(q, y)
                    })
                });
                nonbonded.push(NonbondedPair { a: x.to_owned(), b: y.to_owned(), is14 });
            }
        }

        InteractionSets { bonds, angles, dihedrals, nonbonded }
    }

    #[test]
    fn water_counts() {
        let m = super::super::parse_cml(super::super::tests::WATER).unwrap();
        let s = interaction_sets(&m);
        assert_eq!(s.bonds.len(), 2);
        assert_eq!(s.angles, vec![("h1".to_owned(), "o1".to_owned(), "h2".to_owned())]);
        assert!(s.dihedrals.is_empty());
        // the H...H pair is 1-3 excluded, so nothing remains
        assert!(s.nonbonded.is_empty());
        assert_eq!(s, oracle(&m));
    }

    #[test]
    fn linear_chain_of_four() {
        let m = molecule(4, &[(0, 1), (1, 2), (2, 3)]);
        let s = interaction_sets(&m);
        assert_eq!(s.bonds.len(), 3);
        assert_eq!(s.angles.len(), 2);
        assert_eq!(
            s.dihedrals,
            vec![("a0".to_owned(), "a1".to_owned(), "a2".to_owned(), "a3".to_owned())]
        );
        assert_eq!(
            s.nonbonded,
            vec![NonbondedPair { a: "a0".to_owned(), b: "a3".to_owned(), is14: true }]
        );
        assert_eq!(s, oracle(&m));
    }

    #[test]
    fn single_atom_and_empty() {
        let lone = molecule(1, &[]);
        let s = interaction_sets(&lone);
        assert_eq!(s, InteractionSets::default());
        let none = molecule(0, &[]);
        assert_eq!(interaction_sets(&none), InteractionSets::default());
    }

    #[test]
    fn three_ring_has_closed_dihedrals_and_no_nonbonded() {
        // cyclopropane skeleton: every pair bonded, i may equal l
        let m = molecule(3, &[(0, 1), (1, 2), (0, 2)]);
        let s = interaction_sets(&m);
        assert_eq!(s.bonds.len(), 3);
        assert_eq!(s.angles.len(), 3);
        assert_eq!(s.dihedrals.len(), 3);
        for (i, j, k, l) in &s.dihedrals {
            assert_eq!(i, l, "ring paths close on themselves: {i} {j} {k} {l}");
            assert!(j < k);
        }
        assert!(s.nonbonded.is_empty());
        assert_eq!(s, oracle(&m));
    }

    #[test]
    fn branched_five_atoms() {
        // a0-a1-a2-a3 with a4 hanging off a1 (isobutane-like)
        let m = molecule(5, &[(0, 1), (1, 2), (2, 3), (1, 4)]);
        let s = interaction_sets(&m);
        assert_eq!(s.bonds.len(), 4);
        // angles: at a1 {a0,a2,a4} -> 3; at a2 {a1,a3} -> 1
        assert_eq!(s.angles.len(), 4);
        // dihedrals: 0-1-2-3 and 4-1-2-3
        assert_eq!(s.dihedrals.len(), 2);
        // nonbonded: (a0,a3) 1-4, (a3,a4) 1-4; (a0,a4) is 1-3; (a0,a2),(a2,a4) 1-3
        assert_eq!(s.nonbonded.len(), 2);
        assert!(s.nonbonded.iter().all(|p| p.is14));
        assert_eq!(s, oracle(&m));
    }

    #[test]
    fn beyond_four_neighbors_is_unscaled() {
        let m = molecule(5, &[(0, 1), (1, 2), (2, 3), (3, 4)]);
        let s = interaction_sets(&m);
        let far = s
            .nonbonded
            .iter()
            .find(|p| p.a == "a0" && p.b == "a4")
            .expect("1-5 pair present");
        assert!(!far.is14);
    }

    #[test]
    fn output_is_sorted_and_duplicate_free() {
        let m = molecule(6, &[(0, 1), (1, 2), (2, 3), (3, 4), (4, 5), (5, 0), (1, 4)]);
        let s = interaction_sets(&m);
        let mut sorted = s.dihedrals.clone();
        sorted.sort();
        sorted.dedup();
        assert_eq!(s.dihedrals, sorted);
        let mut pairs: Vec<_> = s.nonbonded.iter().map(|p| (&p.a, &p.b)).collect();
        pairs.sort();
        pairs.dedup();
        assert_eq!(pairs.len(), s.nonbonded.len());
        assert_eq!(s, oracle(&m));
    }

    proptest! {
        #[test]
        fn matches_oracle_on_random_graphs(bits in prop::collection::vec(any::<bool>(), 28)) {
            // 28 bits = all unordered pairs over 8 atoms
            let mut edges = Vec::new();
            let mut idx = 0;
            for x in 0..8usize {
                for y in x + 1..8 {
                    if bits[idx] {
                        edges.push((x, y));
                    }
                    idx += 1;
                }
            }
            let m = molecule(8, &edges);
            prop_assert_eq!(interaction_sets(&m), oracle(&m));
        }
    }
}
