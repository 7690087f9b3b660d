//! Ring membership and a minimum cycle basis (smallest set of smallest rings).

use std::collections::VecDeque;

use super::MolGraph;

/// `true` for every bond that lies on some cycle (i.e. is not a bridge).
pub fn ring_bond_flags(mol: &MolGraph) -> Vec<bool> {
    let n = mol.len();
    let mut flags = vec![true; mol.bonds().len()];
    let mut disc = vec![usize::MAX; n];
    let mut low = vec![0usize; n];
    let mut timer = 0;
    for root in 0..n {
        if disc[root] != usize::MAX {
            continue;
        }
        // Iterative DFS: (atom, bond used to enter, next neighbor slot).
        let mut stack: Vec<(usize, usize, usize)> = vec![(root, usize::MAX, 0)];
        disc[root] = timer;
        low[root] = timer;
        timer += 1;
        while let Some(&mut (u, via, ref mut slot)) = stack.last_mut() {
            if let Some(&(v, bi)) = mol.neighbors(u).get(*slot) {
                *slot += 1;
                if bi == via {
                    continue;
                }
                if disc[v] == usize::MAX {
                    disc[v] = timer;
                    low[v] = timer;
                    timer += 1;
                    stack.push((v, bi, 0));
                } else {
                    low[u] = low[u].min(disc[v]);
                }
            } else {
                stack.pop();
                if let Some(&(parent, _, _)) = stack.last() {
                    low[parent] = low[parent].min(low[u]);
                    if low[u] > disc[parent] {
                        flags[via] = false;
                    }
                }
            }
        }
    }
    flags
}

pub fn atom_ring_flags(mol: &MolGraph) -> Vec<bool> {
    let bonds = ring_bond_flags(mol);
    (0..mol.len())
        .map(|i| mol.neighbors(i).iter().any(|&(_, bi)| bonds[bi]))
        .collect()
}

/// A ring of the minimum cycle basis, as sorted atom and bond index lists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Ring {
    pub atoms: Vec<usize>,
    pub bonds: Vec<usize>,
}

impl Ring {
    pub fn size(&self) -> usize {
        self.bonds.len()
    }
}

type EdgeSet = Vec<u64>;

fn edge_set(nbonds: usize, bonds: &[usize]) -> EdgeSet {
    let mut set = vec![0u64; nbonds.div_ceil(64)];
    for &b in bonds {
        set[b / 64] |= 1 << (b % 64);
    }
    set
}

/// Minimum cycle basis via Horton candidates and GF(2) elimination.
///
/// The multiset of ring sizes is a graph invariant even where the basis
/// itself is not unique.
pub fn smallest_rings(mol: &MolGraph) -> Vec<Ring> {
    let n = mol.len();
    let m = mol.bonds().len();
    let ring_bonds = ring_bond_flags(mol);
    let ring_bond_count = ring_bonds.iter().filter(|&&b| b).count();
    if ring_bond_count == 0 {
        return Vec::new();
    }
    let ring_atoms: Vec<bool> = (0..n)
        .map(|i| mol.neighbors(i).iter().any(|&(_, bi)| ring_bonds[bi]))
        .collect();
    let ring_atom_count = ring_atoms.iter().filter(|&&a| a).count();
    // Ring bonds form 2-edge-connected blocks; count them for the cyclomatic number.
    let blocks = {
        let mut seen = vec![false; n];
        let mut count = 0;
        for s in 0..n {
            if !ring_atoms[s] || seen[s] {
                continue;
            }
            count += 1;
            let mut q = vec![s];
            seen[s] = true;
            while let Some(u) = q.pop() {
                for &(v, bi) in mol.neighbors(u) {
                    if ring_bonds[bi] && !seen[v] {
                        seen[v] = true;
                        q.push(v);
                    }
                }
            }
        }
        count
    };
    let target = ring_bond_count + blocks - ring_atom_count;

    // Horton candidates: shortest-path trees restricted to ring bonds.
    let mut candidates: Vec<Vec<usize>> = Vec::new();
    for root in (0..n).filter(|&i| ring_atoms[i]) {
        let mut dist = vec![usize::MAX; n];
        let mut via = vec![usize::MAX; n];
        let mut parent = vec![usize::MAX; n];
        dist[root] = 0;
        let mut q = VecDeque::from([root]);
        while let Some(u) = q.pop_front() {
            for &(v, bi) in mol.neighbors(u) {
                if ring_bonds[bi] && dist[v] == usize::MAX {
                    dist[v] = dist[u] + 1;
                    via[v] = bi;
                    parent[v] = u;
                    q.push_back(v);
                }
            }
        }
        let path = |mut x: usize| {
            let mut atoms = vec![x];
            let mut bonds = Vec::new();
            while x != root {
                bonds.push(via[x]);
                x = parent[x];
                atoms.push(x);
            }
            (atoms, bonds)
        };
        for (bi, bond) in mol.bonds().iter().enumerate() {
            if !ring_bonds[bi] || dist[bond.a] == usize::MAX || dist[bond.b] == usize::MAX {
                continue;
            }
            if via[bond.a] == bi || via[bond.b] == bi {
                continue;
            }
            let (pa, ba) = path(bond.a);
            let (pb, bb) = path(bond.b);
            // Paths may only share the root.
            let disjoint = pa
                .iter()
                .filter(|&&x| x != root)
                .all(|x| !pb.contains(x));
            if !disjoint {
                continue;
            }
            let mut bonds: Vec<usize> = ba.into_iter().chain(bb).collect();
            bonds.push(bi);
            bonds.sort_unstable();
            candidates.push(bonds);
        }
    }
    candidates.sort_by(|x, y| x.len().cmp(&y.len()).then_with(|| x.cmp(y)));
    candidates.dedup();

    let mut basis: Vec<(usize, EdgeSet)> = Vec::new(); // (pivot bit, reduced vector)
    let mut rings = Vec::new();
    for cand in candidates {
        if rings.len() == target {
            break;
        }
        let mut v = edge_set(m, &cand);
        for (pivot, row) in &basis {
            if v[pivot / 64] >> (pivot % 64) & 1 == 1 {
                for (x, y) in v.iter_mut().zip(row) {
                    *x ^= *y;
                }
            }
        }
        let pivot = v
            .iter()
            .enumerate()
            .find(|(_, w)| **w != 0)
            .map(|(i, w)| i * 64 + w.trailing_zeros() as usize);
        if let Some(pivot) = pivot {
            // Keep rows fully reduced on earlier pivots.
            for (_, row) in basis.iter_mut() {
                if row[pivot / 64] >> (pivot % 64) & 1 == 1 {
                    for (x, y) in row.iter_mut().zip(&v) {
                        *x ^= *y;
                    }
                }
            }
            basis.push((pivot, v));
            let mut atoms: Vec<usize> = cand
                .iter()
                .flat_map(|&b| [mol.bonds()[b].a, mol.bonds()[b].b])
                .collect();
            atoms.sort_unstable();
            atoms.dedup();
            rings.push(Ring { atoms, bonds: cand });
        }
    }
    rings
}

pub fn largest_ring_size(mol: &MolGraph) -> usize {
    smallest_rings(mol).iter().map(Ring::size).max().unwrap_or(0)
}

/// Rings of the minimum cycle basis made entirely of aromatic atoms.
pub fn aromatic_ring_count(mol: &MolGraph) -> usize {
    smallest_rings(mol)
        .iter()
        .filter(|r| r.atoms.iter().all(|&a| mol.atom(a).aromatic))
        .count()
}
