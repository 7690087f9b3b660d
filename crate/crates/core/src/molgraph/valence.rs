use super::rings::ring_bond_flags;
use super::{BondOrder, Element, MolGraph, ValidityReport, ValidityRule, Violation};

/// Allowed total valences (bond orders plus hydrogens) after charge adjustment.
///
/// | element  | neutral   | +1     | -1   |
/// |----------|-----------|--------|------|
/// | B        | 3         | 2      | 4    |
/// | C        | 4         | 3      | 3    |
/// | N        | 3         | 4      | 2    |
/// | O        | 2         | 3      | 1    |
/// | P        | 3, 5      | 4      | 2    |
/// | S        | 2, 4, 6   | 3, 5   | 1    |
/// | halogens | 1         | 2      | 0    |
///
/// Any other charge is unsupported and yields an empty slice.
pub fn allowed_valences(element: Element, charge: i8) -> &'static [u8] {
    use Element::*;
    match (element, charge) {
        (B, 0) => &[3],
        (B, 1) => &[2],
        (B, -1) => &[4],
        (C, 0) => &[4],
        (C, 1) | (C, -1) => &[3],
        (N, 0) => &[3],
        (N, 1) => &[4],
        (N, -1) => &[2],
        (O, 0) => &[2],
        (O, 1) => &[3],
        (O, -1) => &[1],
        (P, 0) => &[3, 5],
        (P, 1) => &[4],
        (P, -1) => &[2],
        (S, 0) => &[2, 4, 6],
        (S, 1) => &[3, 5],
        (S, -1) => &[1],
        (F | Cl | Br | I, 0) => &[1],
        (F | Cl | Br | I, 1) => &[2],
        (F | Cl | Br | I, -1) => &[0],
        _ => &[],
    }
}

/// Bond-order sum counting aromatic bonds as 1, plus bracket hydrogens.
fn sigma_sum(mol: &MolGraph, atom: usize) -> u8 {
    let bonds: u8 = mol
        .neighbors(atom)
        .iter()
        .map(|&(_, bi)| mol.bonds()[bi].order.sigma_valence())
        .sum();
    bonds + mol.atom(atom).explicit_h.unwrap_or(0)
}

/// Whether an aromatic atom must take one double bond in a Kekulé structure.
fn needs_pi(mol: &MolGraph, atom: usize) -> bool {
    let a = mol.atom(atom);
    if !a.aromatic {
        return false;
    }
    let s = sigma_sum(mol, atom);
    allowed_valences(a.element, a.formal_charge)
        .iter()
        .find(|&&v| v >= s)
        .is_some_and(|&v| v > s)
}

/// Resolve aromatic bonds into single/double orders.
///
/// Returns the effective integer order of every bond, or the index of an
/// aromatic atom that could not be matched.
pub fn kekulize(mol: &MolGraph) -> Result<Vec<u8>, usize> {
    let mut orders: Vec<u8> = mol
        .bonds()
        .iter()
        .map(|b| b.order.sigma_valence())
        .collect();
    let n = mol.len();
    let needs: Vec<bool> = (0..n).map(|i| needs_pi(mol, i)).collect();
    if !needs.iter().any(|&x| x) {
        return Ok(orders);
    }
    // Candidate pi partners: aromatic bonds between two atoms that need one.
    let partners: Vec<Vec<(usize, usize)>> = (0..n)
        .map(|i| {
            if !needs[i] {
                return Vec::new();
            }
            mol.neighbors(i)
                .iter()
                .filter(|&&(nb, bi)| needs[nb] && mol.bonds()[bi].order == BondOrder::Aromatic)
                .copied()
                .collect()
        })
        .collect();

    let mut mate: Vec<Option<usize>> = vec![None; n];
    let mut seen = vec![false; n];
    for start in 0..n {
        if !needs[start] || seen[start] {
            continue;
        }
        let mut comp = vec![start];
        seen[start] = true;
        let mut i = 0;
        while i < comp.len() {
            for &(nb, _) in &partners[comp[i]] {
                if !seen[nb] {
                    seen[nb] = true;
                    comp.push(nb);
                }
            }
            i += 1;
        }
        comp.sort_unstable();
        if comp.len() % 2 == 1 {
            return Err(comp[0]);
        }
        if !match_component(&comp, &partners, &mut mate) {
            return Err(comp[0]);
        }
    }
    for (atom, m) in mate.iter().enumerate() {
        if let Some(bi) = m {
            if mol.bonds()[*bi].a == atom {
                orders[*bi] = 2;
            }
        }
    }
    Ok(orders)
}

/// Backtracking perfect matching restricted to one component.
/// `mate[atom]` holds the bond index of the chosen double bond.
fn match_component(
    comp: &[usize],
    partners: &[Vec<(usize, usize)>],
    mate: &mut Vec<Option<usize>>,
) -> bool {
    // Most constrained unmatched atom first.
    let next = comp
        .iter()
        .copied()
        .filter(|&a| mate[a].is_none())
        .min_by_key(|&a| {
            partners[a]
                .iter()
                .filter(|&&(nb, _)| mate[nb].is_none())
                .count()
        });
    let Some(atom) = next else {
        return true;
    };
    for &(nb, bi) in &partners[atom] {
        if mate[nb].is_some() {
            continue;
        }
        mate[atom] = Some(bi);
        mate[nb] = Some(bi);
        if match_component(comp, partners, mate) {
            return true;
        }
        mate[atom] = None;
        mate[nb] = None;
    }
    false
}

fn bond_sum(mol: &MolGraph, orders: &[u8], atom: usize) -> u8 {
    mol.neighbors(atom).iter().map(|&(_, bi)| orders[bi]).sum()
}

/// Implicit hydrogens for an organic-subset atom given Kekulé bond orders.
pub(crate) fn implicit_h(mol: &MolGraph, orders: &[u8], atom: usize) -> Option<u8> {
    let a = mol.atom(atom);
    let s = bond_sum(mol, orders, atom);
    allowed_valences(a.element, a.formal_charge)
        .iter()
        .find(|&&v| v >= s)
        .map(|&v| v - s)
}

pub(crate) fn hydrogen_counts(mol: &MolGraph) -> Vec<u8> {
    let orders = kekulize(mol).unwrap_or_else(|_| {
        mol.bonds()
            .iter()
            .map(|b| b.order.sigma_valence())
            .collect()
    });
    (0..mol.len())
        .map(|i| match mol.atom(i).explicit_h {
            Some(h) => h,
            None => implicit_h(mol, &orders, i).unwrap_or(0),
        })
        .collect()
}

/// True when atom `i` written without brackets would re-parse to the same
/// charge, hydrogen count and pi requirement.
pub(crate) fn organic_equivalent(mol: &MolGraph, orders: &[u8], atom: usize) -> bool {
    let a = mol.atom(atom);
    if a.formal_charge != 0 || a.stereo_tag.is_some() {
        return false;
    }
    let Some(h) = a.explicit_h else {
        return true;
    };
    if implicit_h(mol, orders, atom) != Some(h) {
        return false;
    }
    if !a.aromatic {
        return true;
    }
    let s_plain: u8 = mol
        .neighbors(atom)
        .iter()
        .map(|&(_, bi)| mol.bonds()[bi].order.sigma_valence())
        .sum();
    let plain_needs = allowed_valences(a.element, 0)
        .iter()
        .find(|&&v| v >= s_plain)
        .is_some_and(|&v| v > s_plain);
    plain_needs == needs_pi(mol, atom)
}

/// Check valence, aromaticity and connectivity. Never panics.
pub fn validate(mol: &MolGraph) -> ValidityReport {
    let mut violations = Vec::new();
    if mol.is_empty() {
        violations.push(Violation {
            atom: None,
            rule: ValidityRule::Empty,
            message: "molecule has no atoms".into(),
        });
    }

    let ring_bonds = ring_bond_flags(mol);
    for (bi, bond) in mol.bonds().iter().enumerate() {
        if bond.order == BondOrder::Aromatic {
            for end in [bond.a, bond.b] {
                if !mol.atom(end).aromatic {
                    violations.push(Violation {
                        atom: Some(end),
                        rule: ValidityRule::AromaticBondOnAliphatic,
                        message: format!("aromatic bond {bi} on non-aromatic atom"),
                    });
                }
            }
            if !ring_bonds[bi] {
                violations.push(Violation {
                    atom: Some(bond.a),
                    rule: ValidityRule::AromaticOutsideRing,
                    message: format!("aromatic bond {bi} is not in a ring"),
                });
            }
        }
    }
    for i in 0..mol.len() {
        let a = mol.atom(i);
        if a.aromatic {
            if !a.element.can_be_aromatic() {
                violations.push(Violation {
                    atom: Some(i),
                    rule: ValidityRule::Valence,
                    message: format!("{} cannot be aromatic", a.element),
                });
            }
            let in_ring = mol.neighbors(i).iter().any(|&(_, bi)| ring_bonds[bi]);
            if !in_ring {
                violations.push(Violation {
                    atom: Some(i),
                    rule: ValidityRule::AromaticOutsideRing,
                    message: "aromatic atom outside any ring".into(),
                });
            }
        }
        if allowed_valences(a.element, a.formal_charge).is_empty() {
            violations.push(Violation {
                atom: Some(i),
                rule: ValidityRule::ChargeState,
                message: format!("unsupported charge {} on {}", a.formal_charge, a.element),
            });
        }
    }

    let orders = match kekulize(mol) {
        Ok(o) => Some(o),
        Err(atom) => {
            violations.push(Violation {
                atom: Some(atom),
                rule: ValidityRule::Kekule,
                message: "aromatic system has no alternating Kekulé assignment".into(),
            });
            None
        }
    };
    if let Some(orders) = &orders {
        for i in 0..mol.len() {
            let a = mol.atom(i);
            let allowed = allowed_valences(a.element, a.formal_charge);
            if allowed.is_empty() {
                continue;
            }
            let s = bond_sum(mol, orders, i);
            let ok = match a.explicit_h {
                Some(h) => allowed.contains(&(s + h)),
                None => s <= *allowed.last().expect("nonempty"),
            };
            if !ok {
                let total = s + a.explicit_h.unwrap_or(0);
                violations.push(Violation {
                    atom: Some(i),
                    rule: ValidityRule::Valence,
                    message: format!(
                        "{}{} has valence {total}, allowed {:?}",
                        a.element,
                        charge_suffix(a.formal_charge),
                        allowed
                    ),
                });
            }
        }
    }

    if !mol.is_connected() {
        violations.push(Violation {
            atom: None,
            rule: ValidityRule::Disconnected,
            message: format!("{} fragments", mol.components().len()),
        });
    }

    ValidityReport {
        valid: violations.is_empty(),
        violations,
    }
}

fn charge_suffix(charge: i8) -> String {
    match charge {
        0 => String::new(),
        c if c > 0 => format!("{c}+"),
        c => format!("{}-", -c),
    }
}
