//! Graph edits used by the simulated editor tools.
//!
//! An [`Edit`] is a cheap descriptor; [`Edit::apply`] materializes it and
//! returns `None` unless the result is a valid molecule.

use std::fmt;

use crate::molgraph::rings::smallest_rings;
use crate::molgraph::{
    allowed_valences, hydrogen_counts, parse_smiles, validate, Atom, BondOrder, Element, MolGraph,
};

/// Ring fragments available for appending.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RingKind {
    Cyclopropyl,
    Cyclopentyl,
    Cyclohexyl,
    Phenyl,
    Pyridyl,
    Thienyl,
}

impl RingKind {
    pub const ALL: [RingKind; 6] = [
        RingKind::Cyclopropyl,
        RingKind::Cyclopentyl,
        RingKind::Cyclohexyl,
        RingKind::Phenyl,
        RingKind::Pyridyl,
        RingKind::Thienyl,
    ];

    pub const AROMATIC: [RingKind; 3] = [RingKind::Phenyl, RingKind::Pyridyl, RingKind::Thienyl];

    /// SMILES of the fragment; atom 0 is the attachment point.
    fn smiles(self) -> &'static str {
        match self {
            RingKind::Cyclopropyl => "C1CC1",
            RingKind::Cyclopentyl => "C1CCCC1",
            RingKind::Cyclohexyl => "C1CCCCC1",
            RingKind::Phenyl => "c1ccccc1",
            RingKind::Pyridyl => "c1ccncc1",
            RingKind::Thienyl => "c1ccsc1",
        }
    }

    pub fn graph(self) -> MolGraph {
        parse_smiles(self.smiles()).expect("fragment smiles")
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Edit {
    SetElement { atom: usize, element: Element },
    Append { at: usize, element: Element },
    Delete { atom: usize },
    Move { atom: usize, to: usize },
    AttachRing { at: usize, ring: RingKind, replacing: Option<usize> },
    Contract { atom: usize },
    Expand { a: usize, b: usize },
    Pair(Box<Edit>, Box<Edit>),
}

impl fmt::Display for Edit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Edit::SetElement { atom, element } => write!(f, "set atom {atom} to {element}"),
            Edit::Append { at, element } => write!(f, "append {element} at {at}"),
            Edit::Delete { atom } => write!(f, "delete atom {atom}"),
            Edit::Move { atom, to } => write!(f, "move atom {atom} to {to}"),
            Edit::AttachRing { at, ring, replacing: None } => write!(f, "attach {ring:?} at {at}"),
            Edit::AttachRing { at, ring, replacing: Some(t) } => {
                write!(f, "replace atom {t} with {ring:?} at {at}")
            }
            Edit::Contract { atom } => write!(f, "contract ring at {atom}"),
            Edit::Expand { a, b } => write!(f, "expand ring bond {a}-{b}"),
            Edit::Pair(x, y) => write!(f, "{x}; {y}"),
        }
    }
}

/// Atoms the simulated tools may touch: neutral, unbracketed, no stereo mark.
pub fn editable(mol: &MolGraph, atom: usize) -> bool {
    let a = mol.atom(atom);
    a.formal_charge == 0 && a.explicit_h.is_none() && a.stereo_tag.is_none()
}

fn max_valence(e: Element) -> u8 {
    allowed_valences(e, 0).iter().copied().max().unwrap_or(0)
}

fn sigma_sum(mol: &MolGraph, atom: usize) -> u8 {
    mol.neighbors(atom)
        .iter()
        .map(|&(_, bi)| mol.bonds()[bi].order.sigma_valence())
        .sum()
}

pub const SUBSTITUENTS: [Element; 7] = [
    Element::C,
    Element::N,
    Element::O,
    Element::S,
    Element::F,
    Element::Cl,
    Element::Br,
];

pub const APPENDABLE: [Element; 5] = [Element::C, Element::N, Element::O, Element::F, Element::Cl];

/// Chemically close replacements for conservative edits.
pub fn partners(e: Element) -> &'static [Element] {
    match e {
        Element::C => &[Element::N],
        Element::N => &[Element::C, Element::O],
        Element::O => &[Element::N, Element::S],
        Element::S => &[Element::O],
        Element::F => &[Element::Cl],
        Element::Cl => &[Element::F, Element::Br],
        Element::Br => &[Element::Cl, Element::I],
        Element::I => &[Element::Br],
        Element::B | Element::P => &[],
    }
}

pub fn terminal_atoms(mol: &MolGraph) -> Vec<usize> {
    (0..mol.len())
        .filter(|&i| mol.degree(i) == 1 && !mol.atom(i).aromatic && editable(mol, i))
        .collect()
}

/// Editable atoms carrying at least one implicit hydrogen.
pub fn open_sites(mol: &MolGraph) -> Vec<usize> {
    let h = hydrogen_counts(mol);
    (0..mol.len()).filter(|&i| h[i] > 0 && editable(mol, i)).collect()
}

pub fn terminal_substitutions(mol: &MolGraph, pool: impl Fn(Element) -> Vec<Element>) -> Vec<Edit> {
    let mut out = Vec::new();
    for t in terminal_atoms(mol) {
        let need = sigma_sum(mol, t);
        let current = mol.atom(t).element;
        for e in pool(current) {
            if e != current && max_valence(e) >= need {
                out.push(Edit::SetElement { atom: t, element: e });
            }
        }
    }
    out
}

pub fn appends(mol: &MolGraph, pool: &[Element]) -> Vec<Edit> {
    let mut out = Vec::new();
    for at in open_sites(mol) {
        for &e in pool {
            out.push(Edit::Append { at, element: e });
        }
    }
    out
}

pub fn deletions(mol: &MolGraph) -> Vec<Edit> {
    if mol.len() <= 2 {
        return Vec::new();
    }
    terminal_atoms(mol)
        .into_iter()
        .filter(|&t| mol.bonds()[mol.neighbors(t)[0].1].order == BondOrder::Single)
        .map(|atom| Edit::Delete { atom })
        .collect()
}

pub fn moves(mol: &MolGraph) -> Vec<Edit> {
    let sites = open_sites(mol);
    let mut out = Vec::new();
    for t in terminal_atoms(mol) {
        let (anchor, bi) = mol.neighbors(t)[0];
        if mol.bonds()[bi].order != BondOrder::Single {
            continue;
        }
        for &to in &sites {
            if to != t && to != anchor {
                out.push(Edit::Move { atom: t, to });
            }
        }
    }
    out
}

/// Element swaps at any editable atom, filtered by `keep(atom, from, to)`.
pub fn mutations(mol: &MolGraph, keep: impl Fn(usize, Element, Element) -> bool) -> Vec<Edit> {
    let mut out = Vec::new();
    for i in (0..mol.len()).filter(|&i| editable(mol, i)) {
        let a = mol.atom(i);
        let pool: &[Element] = if a.aromatic {
            &[Element::C, Element::N, Element::O, Element::S]
        } else {
            &SUBSTITUENTS
        };
        let need = sigma_sum(mol, i);
        for &e in pool {
            if e != a.element && max_valence(e) >= need && keep(i, a.element, e) {
                out.push(Edit::SetElement { atom: i, element: e });
            }
        }
    }
    out
}

pub fn ring_attachments(mol: &MolGraph, kinds: &[RingKind], replace_terminal: bool) -> Vec<Edit> {
    let mut out = Vec::new();
    if replace_terminal {
        for t in terminal_atoms(mol) {
            let (at, bi) = mol.neighbors(t)[0];
            if mol.bonds()[bi].order != BondOrder::Single || mol.len() <= 2 {
                continue;
            }
            for &ring in kinds {
                out.push(Edit::AttachRing { at, ring, replacing: Some(t) });
            }
        }
    } else {
        for at in open_sites(mol) {
            for &ring in kinds {
                out.push(Edit::AttachRing { at, ring, replacing: None });
            }
        }
    }
    out
}

/// Remove one degree-2 atom of a non-aromatic ring with at least 5 members.
pub fn contractions(mol: &MolGraph) -> Vec<Edit> {
    let mut out = Vec::new();
    for ring in smallest_rings(mol) {
        if ring.size() < 5 || ring.atoms.iter().any(|&a| mol.atom(a).aromatic) {
            continue;
        }
        for &a in &ring.atoms {
            if mol.degree(a) == 2 && editable(mol, a) && !out.contains(&Edit::Contract { atom: a }) {
                out.push(Edit::Contract { atom: a });
            }
        }
    }
    out
}

/// Insert a carbon into a single bond of a non-aromatic ring with at most 7 members.
pub fn expansions(mol: &MolGraph) -> Vec<Edit> {
    let mut out = Vec::new();
    for ring in smallest_rings(mol) {
        if ring.size() > 7 || ring.atoms.iter().any(|&a| mol.atom(a).aromatic) {
            continue;
        }
        for &bi in &ring.bonds {
            let b = &mol.bonds()[bi];
            if b.order == BondOrder::Single {
                let e = Edit::Expand { a: b.a, b: b.b };
                if !out.contains(&e) {
                    out.push(e);
                }
            }
        }
    }
    out
}

fn checked(mol: MolGraph) -> Option<MolGraph> {
    validate(&mol).valid.then_some(mol)
}

impl Edit {
    /// Number of atoms whose identity or attachment changes, for a single edit.
    pub fn touched_atoms(&self) -> usize {
        match self {
            Edit::Pair(a, b) => a.touched_atoms() + b.touched_atoms(),
            Edit::AttachRing { ring, replacing, .. } => {
                ring.graph().len() + usize::from(replacing.is_some())
            }
            _ => 1,
        }
    }

    pub fn apply(&self, mol: &MolGraph) -> Option<MolGraph> {
        checked(self.apply_unchecked(mol)?)
    }

    fn apply_unchecked(&self, mol: &MolGraph) -> Option<MolGraph> {
        let n = mol.len();
        match *self {
            Edit::SetElement { atom, element } => {
                let mut a = mol.atom(atom).clone();
                a.element = element;
                Some(mol.with_atom(atom, a))
            }
            Edit::Append { at, element } => Some(mol.with_appended(at, Atom::new(element), BondOrder::Single)),
            Edit::Delete { atom } => (n > 1).then(|| mol.without_atom(atom)),
            Edit::Move { atom, to } => {
                let moved = mol.atom(atom).clone();
                let rest = mol.without_atom(atom);
                let to = if to > atom { to - 1 } else { to };
                Some(rest.with_appended(to, moved, BondOrder::Single))
            }
            Edit::AttachRing { at, ring, replacing } => {
                let (base, at) = match replacing {
                    Some(t) => (mol.without_atom(t), if at > t { at - 1 } else { at }),
                    None => (mol.clone(), at),
                };
                Some(base.attached(&ring.graph(), at, 0, BondOrder::Single))
            }
            Edit::Contract { atom } => {
                let nbrs: Vec<usize> = mol.neighbors(atom).iter().map(|&(v, _)| v).collect();
                if nbrs.len() != 2 || mol.bond_between(nbrs[0], nbrs[1]).is_some() {
                    return None;
                }
                let joined = mol.with_bond(nbrs[0], nbrs[1], BondOrder::Single).ok()?;
                Some(joined.without_atom(atom))
            }
            Edit::Expand { a, b } => {
                let bi = mol.bond_between(a, b)?;
                let cut = mol.without_bond(bi);
                let grown = cut.with_appended(a, Atom::new(Element::C), BondOrder::Single);
                grown.with_bond(b, n, BondOrder::Single).ok()
            }
            Edit::Pair(ref x, ref y) => {
                // Second edit addresses the original indices; only index-stable
                // first edits are paired.
                let mid = x.apply_unchecked(mol)?;
                y.apply_unchecked(&mid)
            }
        }
    }

    /// Whether the edit keeps existing atom indices stable.
    pub fn index_stable(&self) -> bool {
        matches!(self, Edit::SetElement { .. } | Edit::Append { .. } | Edit::AttachRing { replacing: None, .. })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::molgraph::{canonical_form, rings::smallest_rings};

    fn mol(s: &str) -> MolGraph {
        parse_smiles(s).unwrap()
    }

    #[test]
    fn substitution_and_append() {
        let m = mol("CCO");
        let e = Edit::SetElement { atom: 2, element: Element::Cl };
        assert_eq!(canonical_form(&e.apply(&m).unwrap()), canonical_form(&mol("CCCl")));
        let e = Edit::Append { at: 0, element: Element::N };
        assert_eq!(e.apply(&m).unwrap().len(), 4);
    }

    #[test]
    fn over_valent_substitution_rejected() {
        let m = mol("CC=O");
        let e = Edit::SetElement { atom: 2, element: Element::F };
        assert!(e.apply(&m).is_none());
        assert!(terminal_substitutions(&m, |_| SUBSTITUENTS.to_vec())
            .iter()
            .all(|e| e.apply(&m).is_some()));
    }

    #[test]
    fn move_and_delete() {
        let m = mol("CC(C)CO");
        let e = Edit::Move { atom: 4, to: 1 };
        let moved = e.apply(&m).unwrap();
        assert_eq!(moved.len(), 5);
        assert_ne!(canonical_form(&moved), canonical_form(&m));
        assert_eq!(canonical_form(&Edit::Delete { atom: 4 }.apply(&m).unwrap()), canonical_form(&mol("CC(C)C")));
    }

    #[test]
    fn ring_edits() {
        let hexane = mol("CCCCCC");
        let e = Edit::AttachRing { at: 2, ring: RingKind::Phenyl, replacing: None };
        let out = e.apply(&hexane).unwrap();
        assert_eq!(smallest_rings(&out).len(), 1);
        let cyclohexane = mol("C1CCCCC1C");
        let contracted = contractions(&cyclohexane)[0].apply(&cyclohexane).unwrap();
        assert_eq!(smallest_rings(&contracted)[0].size(), 5);
        let expanded = expansions(&cyclohexane)[0].apply(&cyclohexane).unwrap();
        assert_eq!(smallest_rings(&expanded)[0].size(), 7);
    }

    #[test]
    fn aromatic_mutation_respects_kekule() {
        let benzene = mol("c1ccccc1");
        let to_n = Edit::SetElement { atom: 0, element: Element::N };
        assert_eq!(canonical_form(&to_n.apply(&benzene).unwrap()), canonical_form(&mol("c1ccncc1")));
        let to_o = Edit::SetElement { atom: 0, element: Element::O };
        assert!(to_o.apply(&benzene).is_none());
    }
}
