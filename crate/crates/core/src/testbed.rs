//! Seeded molecule generators for tests, benchmarks and synthetic datasets.
//!
//! Leads come in families: a ring scaffold decorated with two to four
//! substituents. Members of one family are structurally close, so leads from
//! a training split find similar trajectories for a disjoint test split.

use std::collections::BTreeSet;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::molgraph::{canonical_form, hydrogen_counts, parse_smiles, validate, Atom, BondOrder, Element, MolGraph};
use crate::tools::edits::{editable, open_sites};

/// Hand-picked molecules covering the supported SMILES features.
pub const CURATED: [&str; 50] = [
    "C",
    "CC",
    "CCO",
    "C=C",
    "C#N",
    "CC(=O)O",
    "CC(=O)Nc1ccc(O)cc1",
    "CC(C)Cc1ccc(cc1)C(C)C(=O)O",
    "c1ccccc1",
    "c1ccncc1",
    "c1cc[nH]c1",
    "c1ccoc1",
    "c1ccsc1",
    "c1ccc2ccccc2c1",
    "c1ccc2[nH]ccc2c1",
    "C1CCCCC1",
    "C1CC2CCC1C2",
    "C12C3C4C1C5C2C3C45",
    "O=C1CCCN1",
    "CN1CCN(CC1)c1ccccc1",
    "OC(=O)c1ccccc1O",
    "FC(F)(F)c1ccc(Cl)cc1",
    "BrC1=CC=CC=C1",
    "C1=CC=CC=C1",
    "[NH4+]",
    "C[N+](C)(C)C",
    "CC(=O)[O-]",
    "[O-][N+](=O)c1ccccc1",
    "C[S](=O)(=O)N",
    "CS(=O)(=O)c1ccccc1",
    "OP(=O)(O)O",
    "OB(O)c1ccccc1",
    "N[C@@H](C)C(=O)O",
    "F/C=C/F",
    "F/C=C\\F",
    "C%10CC%10",
    "c1ccc(cc1)-c1ccccc1",
    "C1CC1C1CC1",
    "ClCCl",
    "ICC#CBr",
    "CC(C)(C)OC(=O)N",
    "O=C(Nc1ccccc1)c1ccccn1",
    "Cc1nc2ccccc2s1",
    "c1ccc2c(c1)ccc1ccccc12",
    "C1=CCC=CC1",
    "N#Cc1ccccc1C#N",
    "OCC(O)CO",
    "CC[S+](C)C",
    "[CH3-]",
    "C1CCC2(CC1)CCCC2",
];

/// Ring systems lead families are built on.
pub const SCAFFOLDS: [&str; 16] = [
    "c1ccc2ccccc2c1",
    "c1ccc(cc1)C(=O)Nc1ccccc1",
    "c1ccc(cc1)Oc1ccncc1",
    "C1CCN(CC1)c1ccccc1",
    "c1ccc(cc1)c1ccsc1",
    "O=C1CCCN1c1ccccc1",
    "c1cnc2ccccc2n1",
    "C1CCC(CC1)Nc1ccccn1",
    "c1ccc(cc1)CC1CCOCC1",
    "c1ccc2occc2c1",
    "O=C(N1CCCC1)c1ccccc1",
    "c1ccc(cc1)S(=O)(=O)N1CCCC1",
    "c1ccc(nc1)C1CCCCC1",
    "c1ccc2c(c1)CCN2",
    "c1cc(ccc1)OCCN1CCOCC1",
    "C1CC2CCC1CC2c1ccccc1",
];

/// Substituents; atom 0 bonds to the scaffold.
pub const SUBSTITUENTS: [&str; 14] = [
    "C", "CC", "O", "N", "F", "Cl", "Br", "OC", "C(=O)O", "C(=O)N", "NC(=O)C", "C#N", "C(F)(F)F", "CO",
];

fn decorate(base: &MolGraph, rng: &mut impl Rng, count: usize) -> MolGraph {
    let mut mol = base.clone();
    for _ in 0..count {
        let sites = open_sites(&mol);
        let Some(&site) = sites.choose(rng) else { break };
        let sub = parse_smiles(SUBSTITUENTS.choose(rng).expect("nonempty")).expect("substituent smiles");
        let next = mol.attached(&sub, site, 0, BondOrder::Single);
        if validate(&next).valid {
            mol = next;
        }
    }
    mol
}

/// One decorated member of scaffold family `family`.
pub fn family_member(family: usize, rng: &mut impl Rng) -> MolGraph {
    let scaffold = parse_smiles(SCAFFOLDS[family % SCAFFOLDS.len()]).expect("scaffold smiles");
    let count = rng.gen_range(2..=4);
    decorate(&scaffold, rng, count)
}

/// Number of analog series a split draws from.
pub const SERIES: usize = 48;

/// Disjoint train and test leads drawn from the same analog series.
///
/// A series is a scaffold with two fixed decorations; each lead adds one or
/// two more. Returned as canonical SMILES; generation is fully determined by
/// `seed`.
pub fn lead_split(seed: u64, n_train: usize, n_test: usize) -> (Vec<String>, Vec<String>) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let cores: Vec<MolGraph> = (0..SERIES)
        .map(|i| {
            let scaffold = parse_smiles(SCAFFOLDS[i % SCAFFOLDS.len()]).expect("scaffold smiles");
            decorate(&scaffold, &mut rng, 2)
        })
        .collect();
    let mut seen = BTreeSet::new();
    let mut draw = |n: usize, rng: &mut ChaCha8Rng| {
        let mut out = Vec::with_capacity(n);
        let mut guard = 0;
        while out.len() < n && guard < n * 100 {
            guard += 1;
            let core = cores.choose(rng).expect("nonempty");
            let count = rng.gen_range(1..=2);
            let smi = canonical_form(&decorate(core, rng, count));
            if seen.insert(smi.clone()) {
                out.push(smi);
            }
        }
        out
    };
    let train = draw(n_train, &mut rng);
    let test = draw(n_test, &mut rng);
    (train, test)
}

pub fn leads(seed: u64, n: usize) -> Vec<String> {
    lead_split(seed, 0, n).1
}

/// A random valid connected molecule with at most `max_atoms` heavy atoms.
///
/// Grown from a random seed fragment by appending atoms and rings, raising
/// bond orders and mutating elements; every intermediate is validated.
pub fn random_molecule(rng: &mut impl Rng, max_atoms: usize) -> MolGraph {
    const STARTS: [&str; 8] = ["C", "CC", "c1ccccc1", "C1CCCC1", "c1ccncc1", "N", "O=C", "c1ccsc1"];
    const ELEMENTS: [Element; 9] = [
        Element::C,
        Element::C,
        Element::C,
        Element::N,
        Element::O,
        Element::S,
        Element::F,
        Element::Cl,
        Element::Br,
    ];
    let mut mol = parse_smiles(STARTS.choose(rng).expect("nonempty")).expect("start smiles");
    let target = rng.gen_range(1..=max_atoms.max(1));
    let mut guard = 0;
    while mol.len() < target && guard < 200 {
        guard += 1;
        let candidate = match rng.gen_range(0..10) {
            0..=4 => {
                let sites = open_sites(&mol);
                let Some(&at) = sites.choose(rng) else { break };
                mol.with_appended(at, Atom::new(*ELEMENTS.choose(rng).expect("nonempty")), BondOrder::Single)
            }
            5 => {
                let sites = open_sites(&mol);
                let Some(&at) = sites.choose(rng) else { break };
                let ring = parse_smiles(["c1ccccc1", "C1CC1", "C1CCNCC1", "c1ccoc1"].choose(rng).expect("nonempty"))
                    .expect("ring smiles");
                mol.attached(&ring, at, 0, BondOrder::Single)
            }
            6 => {
                // Close a new ring between two atoms with free hydrogens.
                let sites = open_sites(&mol);
                if sites.len() < 2 {
                    continue;
                }
                let a = *sites.choose(rng).expect("nonempty");
                let b = *sites.choose(rng).expect("nonempty");
                match mol.with_bond(a, b, BondOrder::Single) {
                    Ok(m) => m,
                    Err(_) => continue,
                }
            }
            7 => {
                let h = hydrogen_counts(&mol);
                let bonds: Vec<usize> = (0..mol.bonds().len())
                    .filter(|&bi| {
                        let b = &mol.bonds()[bi];
                        b.order == BondOrder::Single
                            && !mol.atom(b.a).aromatic
                            && !mol.atom(b.b).aromatic
                            && h[b.a] > 0
                            && h[b.b] > 0
                    })
                    .collect();
                let Some(&bi) = bonds.choose(rng) else { continue };
                let order = if rng.gen_bool(0.8) { BondOrder::Double } else { BondOrder::Triple };
                mol.with_bond_order(bi, order)
            }
            _ => {
                let atoms: Vec<usize> = (0..mol.len()).filter(|&i| editable(&mol, i)).collect();
                let Some(&i) = atoms.choose(rng) else { continue };
                let mut atom = mol.atom(i).clone();
                atom.element = *ELEMENTS.choose(rng).expect("nonempty");
                mol.with_atom(i, atom)
            }
        };
        if candidate.len() <= max_atoms.max(mol.len()) && validate(&candidate).valid {
            mol = candidate;
        }
    }
    mol
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fingerprint::{morgan_fp, tanimoto};

    #[test]
    fn curated_corpus_parses() {
        for smi in CURATED {
            let mol = parse_smiles(smi).unwrap_or_else(|e| panic!("{smi}: {e}"));
            assert!(validate(&mol).valid, "{smi}");
        }
    }

    #[test]
    fn random_molecules_are_valid() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..200 {
            let m = random_molecule(&mut rng, 30);
            assert!(validate(&m).valid);
            assert!(m.is_connected());
        }
    }

    #[test]
    fn splits_are_disjoint_and_deterministic() {
        let (train, test) = lead_split(3, 50, 30);
        assert_eq!(train.len(), 50);
        assert_eq!(test.len(), 30);
        let t: BTreeSet<_> = train.iter().collect();
        assert!(test.iter().all(|s| !t.contains(s)));
        assert_eq!(lead_split(3, 50, 30), (train, test));
    }

    #[test]
    fn families_are_similar() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let a = family_member(0, &mut rng);
        let b = family_member(0, &mut rng);
        let c = family_member(5, &mut rng);
        let fp = |m: &MolGraph| morgan_fp(m, 2, 2048).unwrap();
        let same = tanimoto(&fp(&a), &fp(&b)).unwrap().value();
        let other = tanimoto(&fp(&a), &fp(&c)).unwrap().value();
        assert!(same > other, "{same} vs {other}");
    }
}
