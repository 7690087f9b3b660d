//! Heavy-atom molecular graphs built from a SMILES subset.
//!
//! Hydrogens are never stored as atoms. Organic-subset atoms carry
//! `explicit_h: None` and get their hydrogen count from the valence table;
//! bracket atoms carry a fixed count.

mod canon;
mod parse;
pub mod rings;
mod valence;
mod write;

use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use canon::canonical_ranks;
pub use parse::{parse_smiles, parse_smiles_with, ParseOptions};
pub use valence::{allowed_valences, kekulize, validate};
pub use write::{canonical_form, write_smiles};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Element {
    B,
    C,
    N,
    O,
    P,
    S,
    F,
    Cl,
    Br,
    I,
}

impl Element {
    pub const ALL: [Element; 10] = [
        Element::B,
        Element::C,
        Element::N,
        Element::O,
        Element::P,
        Element::S,
        Element::F,
        Element::Cl,
        Element::Br,
        Element::I,
    ];

    pub fn atomic_number(self) -> u8 {
        match self {
            Element::B => 5,
            Element::C => 6,
            Element::N => 7,
            Element::O => 8,
            Element::P => 15,
            Element::S => 16,
            Element::F => 9,
            Element::Cl => 17,
            Element::Br => 35,
            Element::I => 53,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Element::B => "B",
            Element::C => "C",
            Element::N => "N",
            Element::O => "O",
            Element::P => "P",
            Element::S => "S",
            Element::F => "F",
            Element::Cl => "Cl",
            Element::Br => "Br",
            Element::I => "I",
        }
    }

    pub fn from_symbol(sym: &str) -> Option<Element> {
        Element::ALL.iter().copied().find(|e| e.symbol() == sym)
    }

    /// Elements that may be written in lowercase (aromatic) form.
    pub fn can_be_aromatic(self) -> bool {
        matches!(
            self,
            Element::B | Element::C | Element::N | Element::O | Element::P | Element::S
        )
    }

    pub fn is_halogen(self) -> bool {
        matches!(self, Element::F | Element::Cl | Element::Br | Element::I)
    }
}

impl fmt::Display for Element {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.symbol())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Atom {
    pub element: Element,
    pub formal_charge: i8,
    /// `Some` for bracket atoms: the hydrogen count is fixed.
    pub explicit_h: Option<u8>,
    pub aromatic: bool,
    /// Chirality marks (`@`, `@@`, ...) kept verbatim; never interpreted.
    pub stereo_tag: Option<String>,
}

impl Atom {
    pub fn new(element: Element) -> Self {
        Atom {
            element,
            formal_charge: 0,
            explicit_h: None,
            aromatic: false,
            stereo_tag: None,
        }
    }

    pub fn aromatic(element: Element) -> Self {
        Atom {
            aromatic: true,
            ..Atom::new(element)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

impl BondOrder {
    /// Stable small integer used by hashing and canonical ranking.
    pub fn code(self) -> u8 {
        match self {
            BondOrder::Single => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
            BondOrder::Aromatic => 4,
        }
    }

    /// Contribution to valence when aromatic bonds are treated as sigma-only.
    pub fn sigma_valence(self) -> u8 {
        match self {
            BondOrder::Single | BondOrder::Aromatic => 1,
            BondOrder::Double => 2,
            BondOrder::Triple => 3,
        }
    }
}

/// Directional single-bond marks (`/`, `\`), retained but not interpreted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum BondStereo {
    Up,
    Down,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
    pub stereo: Option<BondStereo>,
}

impl Bond {
    pub fn new(a: usize, b: usize, order: BondOrder) -> Self {
        Bond {
            a,
            b,
            order,
            stereo: None,
        }
    }

    pub fn other(&self, atom: usize) -> usize {
        if self.a == atom {
            self.b
        } else {
            self.a
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("bond {bond} references atom {atom} outside 0..{len}")]
    OutOfRange { bond: usize, atom: usize, len: usize },
    #[error("bond {bond} connects atom {atom} to itself")]
    SelfLoop { bond: usize, atom: usize },
    #[error("duplicate bond between atoms {a} and {b}")]
    DuplicateBond { a: usize, b: usize },
}

/// Errors raised by [`parse_smiles`].
#[derive(Debug, Error, Clone, PartialEq)]
pub enum SmilesError {
    #[error("syntax error at {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("ring closure error: {msg}")]
    Ring { msg: String },
    #[error("valence error on atom {atom}: {msg}")]
    Valence {
        atom: usize,
        msg: String,
        report: ValidityReport,
    },
    #[error("input has {count} disconnected fragments")]
    Fragment { count: usize },
}

/// One heavy-atom molecule. Atom order follows SMILES token order when parsed.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MolGraph {
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, GraphError> {
        let n = atoms.len();
        let mut adjacency = vec![Vec::new(); n];
        for (i, bond) in bonds.iter().enumerate() {
            for atom in [bond.a, bond.b] {
                if atom >= n {
                    return Err(GraphError::OutOfRange {
                        bond: i,
                        atom,
                        len: n,
                    });
                }
            }
            if bond.a == bond.b {
                return Err(GraphError::SelfLoop {
                    bond: i,
                    atom: bond.a,
                });
            }
            if adjacency[bond.a].iter().any(|&(nb, _)| nb == bond.b) {
                return Err(GraphError::DuplicateBond {
                    a: bond.a.min(bond.b),
                    b: bond.a.max(bond.b),
                });
            }
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        Ok(MolGraph {
            atoms,
            bonds,
            adjacency,
        })
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    pub fn atom(&self, idx: usize) -> &Atom {
        &self.atoms[idx]
    }

    pub fn len(&self) -> usize {
        self.atoms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.atoms.is_empty()
    }

    /// `(neighbor, bond index)` pairs in bond insertion order.
    pub fn neighbors(&self, atom: usize) -> &[(usize, usize)] {
        &self.adjacency[atom]
    }

    pub fn degree(&self, atom: usize) -> usize {
        self.adjacency[atom].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<usize> {
        self.adjacency[a]
            .iter()
            .find(|&&(nb, _)| nb == b)
            .map(|&(_, bi)| bi)
    }

    pub fn into_parts(self) -> (Vec<Atom>, Vec<Bond>) {
        (self.atoms, self.bonds)
    }

    /// Connected components as sorted atom lists, ordered by their first atom.
    pub fn components(&self) -> Vec<Vec<usize>> {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut out = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            let mut comp = vec![start];
            seen[start] = true;
            let mut i = 0;
            while i < comp.len() {
                let u = comp[i];
                for &(v, _) in &self.adjacency[u] {
                    if !seen[v] {
                        seen[v] = true;
                        comp.push(v);
                    }
                }
                i += 1;
            }
            comp.sort_unstable();
            out.push(comp);
        }
        out
    }

    pub fn is_connected(&self) -> bool {
        self.atoms.len() <= 1 || self.components().len() == 1
    }

    /// Subgraph induced by `keep` (in the given order); bonds to dropped atoms vanish.
    pub fn induced(&self, keep: &[usize]) -> MolGraph {
        let mut map = vec![usize::MAX; self.atoms.len()];
        for (new, &old) in keep.iter().enumerate() {
            map[old] = new;
        }
        let atoms = keep.iter().map(|&i| self.atoms[i].clone()).collect();
        let bonds = self
            .bonds
            .iter()
            .filter(|b| map[b.a] != usize::MAX && map[b.b] != usize::MAX)
            .map(|b| Bond {
                a: map[b.a],
                b: map[b.b],
                ..b.clone()
            })
            .collect();
        MolGraph::new(atoms, bonds).expect("induced subgraph of a valid graph")
    }

    /// Relabel atoms: atom `i` moves to position `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> MolGraph {
        assert_eq!(perm.len(), self.atoms.len());
        let mut atoms = vec![None; self.atoms.len()];
        for (old, &new) in perm.iter().enumerate() {
            atoms[new] = Some(self.atoms[old].clone());
        }
        let atoms = atoms.into_iter().map(|a| a.expect("perm is a bijection")).collect();
        let bonds = self
            .bonds
            .iter()
            .map(|b| Bond {
                a: perm[b.a],
                b: perm[b.b],
                ..b.clone()
            })
            .collect();
        MolGraph::new(atoms, bonds).expect("permutation preserves validity")
    }

    pub fn with_atom(&self, idx: usize, atom: Atom) -> MolGraph {
        let mut atoms = self.atoms.clone();
        atoms[idx] = atom;
        MolGraph::new(atoms, self.bonds.clone()).expect("same bonds")
    }

    pub fn with_bond_order(&self, bond: usize, order: BondOrder) -> MolGraph {
        let mut bonds = self.bonds.clone();
        bonds[bond].order = order;
        MolGraph::new(self.atoms.clone(), bonds).expect("same endpoints")
    }

    /// Append `atom` bonded to `to`; the new atom gets the last index.
    pub fn with_appended(&self, to: usize, atom: Atom, order: BondOrder) -> MolGraph {
        let mut atoms = self.atoms.clone();
        let mut bonds = self.bonds.clone();
        atoms.push(atom);
        bonds.push(Bond::new(to, atoms.len() - 1, order));
        MolGraph::new(atoms, bonds).expect("fresh atom")
    }

    /// Add a bond between existing atoms.
    pub fn with_bond(&self, a: usize, b: usize, order: BondOrder) -> Result<MolGraph, GraphError> {
        let mut bonds = self.bonds.clone();
        bonds.push(Bond::new(a, b, order));
        MolGraph::new(self.atoms.clone(), bonds)
    }

    pub fn without_bond(&self, bond: usize) -> MolGraph {
        let mut bonds = self.bonds.clone();
        bonds.remove(bond);
        MolGraph::new(self.atoms.clone(), bonds).expect("subset of bonds")
    }

    pub fn without_atom(&self, idx: usize) -> MolGraph {
        let keep: Vec<usize> = (0..self.atoms.len()).filter(|&i| i != idx).collect();
        self.induced(&keep)
    }

    /// Join `other` onto this graph with one bond between `at_self` and `at_other`.
    pub fn attached(&self, other: &MolGraph, at_self: usize, at_other: usize, order: BondOrder) -> MolGraph {
        let offset = self.atoms.len();
        let mut atoms = self.atoms.clone();
        atoms.extend(other.atoms.iter().cloned());
        let mut bonds = self.bonds.clone();
        bonds.extend(other.bonds.iter().map(|b| Bond {
            a: b.a + offset,
            b: b.b + offset,
            ..b.clone()
        }));
        bonds.push(Bond::new(at_self, at_other + offset, order));
        MolGraph::new(atoms, bonds).expect("disjoint union plus one bond")
    }

    /// Heavy-atom count.
    pub fn heavy_atom_count(&self) -> usize {
        self.atoms.len()
    }
}

/// Outcome of [`validate`]: `valid` iff `violations` is empty.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct ValidityReport {
    pub valid: bool,
    pub violations: Vec<Violation>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Violation {
    /// `None` for whole-graph rules such as connectivity.
    pub atom: Option<usize>,
    pub rule: ValidityRule,
    pub message: String,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ValidityRule {
    Empty,
    Valence,
    ChargeState,
    Kekule,
    AromaticOutsideRing,
    AromaticBondOnAliphatic,
    Disconnected,
}

impl fmt::Display for ValidityRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ValidityRule::Empty => "empty",
            ValidityRule::Valence => "valence",
            ValidityRule::ChargeState => "charge_state",
            ValidityRule::Kekule => "kekule",
            ValidityRule::AromaticOutsideRing => "aromatic_outside_ring",
            ValidityRule::AromaticBondOnAliphatic => "aromatic_bond_on_aliphatic",
            ValidityRule::Disconnected => "disconnected",
        };
        f.write_str(s)
    }
}

/// Total hydrogen count per atom (implicit or bracketed). Requires a valid graph.
pub fn hydrogen_counts(mol: &MolGraph) -> Vec<u8> {
    valence::hydrogen_counts(mol)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rejects_duplicate_and_self_bonds() {
        let atoms = vec![Atom::new(Element::C), Atom::new(Element::C)];
        let dup = MolGraph::new(
            atoms.clone(),
            vec![Bond::new(0, 1, BondOrder::Single), Bond::new(1, 0, BondOrder::Double)],
        );
        assert_eq!(dup, Err(GraphError::DuplicateBond { a: 0, b: 1 }));
        let selfie = MolGraph::new(atoms.clone(), vec![Bond::new(1, 1, BondOrder::Single)]);
        assert!(matches!(selfie, Err(GraphError::SelfLoop { .. })));
        let oob = MolGraph::new(atoms, vec![Bond::new(0, 5, BondOrder::Single)]);
        assert!(matches!(oob, Err(GraphError::OutOfRange { .. })));
    }

    #[test]
    fn permutation_moves_atoms() {
        let g = parse_smiles("CCO").unwrap();
        let p = g.permuted(&[2, 0, 1]);
        assert_eq!(p.atom(1).element, Element::O);
        assert_eq!(p.atom(0).element, Element::C);
        assert!(p.bond_between(1, 0).is_some());
        assert!(p.bond_between(1, 2).is_none());
        assert_eq!(canonical_form(&p), canonical_form(&g));
    }
}
