use std::collections::BTreeMap;

use super::valence::{implicit_h, kekulize, organic_equivalent};
use super::{canonical_ranks, BondOrder, BondStereo, MolGraph};

/// Write SMILES following atom index order. Stereo marks are carried through.
pub fn write_smiles(mol: &MolGraph) -> String {
    let order: Vec<usize> = (0..mol.len()).collect();
    Writer::new(mol, &order, false).finish()
}

/// Canonical SMILES: identical for every atom relabeling of the same graph.
///
/// Stereo marks are dropped and bracket atoms equivalent to their
/// organic-subset form are written without brackets.
pub fn canonical_form(mol: &MolGraph) -> String {
    let ranks = canonical_ranks(mol);
    Writer::new(mol, &ranks, true).finish()
}

struct Writer<'a> {
    mol: &'a MolGraph,
    rank: &'a [usize],
    canonical: bool,
    orders: Vec<u8>,
    visit: Vec<usize>,
    children: Vec<Vec<(usize, usize)>>,
    ring: Vec<Vec<(usize, usize)>>,
    open: BTreeMap<usize, u32>,
    out: String,
}

impl<'a> Writer<'a> {
    fn new(mol: &'a MolGraph, rank: &'a [usize], canonical: bool) -> Self {
        let orders = kekulize(mol).unwrap_or_else(|_| {
            mol.bonds()
                .iter()
                .map(|b| b.order.sigma_valence())
                .collect()
        });
        let n = mol.len();
        Writer {
            mol,
            rank,
            canonical,
            orders,
            visit: vec![usize::MAX; n],
            children: vec![Vec::new(); n],
            ring: vec![Vec::new(); n],
            open: BTreeMap::new(),
            out: String::new(),
        }
    }

    fn finish(mut self) -> String {
        let mut starts: Vec<usize> = (0..self.mol.len()).collect();
        starts.sort_by_key(|&i| self.rank[i]);
        let mut classified = vec![false; self.mol.bonds().len()];
        let mut counter = 0;
        let mut roots = Vec::new();
        for s in starts {
            if self.visit[s] == usize::MAX {
                roots.push(s);
                self.explore(s, usize::MAX, &mut counter, &mut classified);
            }
        }
        for (i, root) in roots.into_iter().enumerate() {
            if i > 0 {
                self.out.push('.');
            }
            self.emit(root, None);
        }
        self.out
    }

    fn explore(&mut self, u: usize, via: usize, counter: &mut usize, classified: &mut [bool]) {
        self.visit[u] = *counter;
        *counter += 1;
        let mut nbrs: Vec<(usize, usize)> = self
            .mol
            .neighbors(u)
            .iter()
            .copied()
            .filter(|&(_, bi)| bi != via)
            .collect();
        nbrs.sort_by_key(|&(v, _)| self.rank[v]);
        for (v, bi) in nbrs {
            if classified[bi] {
                continue;
            }
            classified[bi] = true;
            if self.visit[v] == usize::MAX {
                self.children[u].push((v, bi));
                self.explore(v, bi, counter, classified);
            } else {
                self.ring[u].push((v, bi));
                self.ring[v].push((u, bi));
            }
        }
    }

    fn emit(&mut self, u: usize, via: Option<usize>) {
        if let Some(bi) = via {
            let sym = self.bond_symbol(bi);
            self.out.push_str(sym);
        }
        let atom = self.atom_symbol(u);
        self.out.push_str(&atom);

        let mut ring = self.ring[u].clone();
        ring.sort_by_key(|&(v, _)| self.visit[v]);
        for (v, bi) in ring {
            if self.visit[v] < self.visit[u] {
                let digit = self.open.remove(&bi).expect("ring bond opened at ancestor");
                self.out.push_str(&digit_label(digit));
            } else {
                let used: Vec<u32> = self.open.values().copied().collect();
                let digit = (1..).find(|d| !used.contains(d)).expect("free digit");
                let sym = self.bond_symbol(bi);
                self.out.push_str(sym);
                self.out.push_str(&digit_label(digit));
                self.open.insert(bi, digit);
            }
        }

        let children = self.children[u].clone();
        let last = children.len().saturating_sub(1);
        for (i, (v, bi)) in children.into_iter().enumerate() {
            if i < last {
                self.out.push('(');
                self.emit(v, Some(bi));
                self.out.push(')');
            } else {
                self.emit(v, Some(bi));
            }
        }
    }

    fn bond_symbol(&self, bi: usize) -> &'static str {
        let bond = &self.mol.bonds()[bi];
        let both_aromatic = self.mol.atom(bond.a).aromatic && self.mol.atom(bond.b).aromatic;
        match bond.order {
            BondOrder::Single => match bond.stereo {
                Some(BondStereo::Up) if !self.canonical => "/",
                Some(BondStereo::Down) if !self.canonical => "\\",
                _ if both_aromatic => "-",
                _ => "",
            },
            BondOrder::Double => "=",
            BondOrder::Triple => "#",
            BondOrder::Aromatic if both_aromatic => "",
            BondOrder::Aromatic => ":",
        }
    }

    fn atom_symbol(&self, i: usize) -> String {
        let a = self.mol.atom(i);
        let sym = if a.aromatic {
            a.element.symbol().to_lowercase()
        } else {
            a.element.symbol().to_string()
        };
        let stereo = if self.canonical { None } else { a.stereo_tag.as_deref() };
        let bracket = a.formal_charge != 0
            || stereo.is_some()
            || match a.explicit_h {
                None => false,
                Some(_) if self.canonical => !organic_equivalent(self.mol, &self.orders, i),
                Some(_) => true,
            };
        if !bracket {
            return sym;
        }
        let h = a
            .explicit_h
            .or_else(|| implicit_h(self.mol, &self.orders, i))
            .unwrap_or(0);
        let mut s = format!("[{sym}");
        if let Some(tag) = stereo {
            s.push_str(tag);
        }
        match h {
            0 => {}
            1 => s.push('H'),
            h => s.push_str(&format!("H{h}")),
        }
        match a.formal_charge {
            0 => {}
            1 => s.push('+'),
            -1 => s.push('-'),
            c if c > 0 => s.push_str(&format!("+{c}")),
            c => s.push_str(&format!("-{}", -c)),
        }
        s.push(']');
        s
    }
}

fn digit_label(d: u32) -> String {
    if d < 10 {
        d.to_string()
    } else {
        format!("%{d:02}")
    }
}
