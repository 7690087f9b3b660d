use super::rings::atom_ring_flags;
use super::{hydrogen_counts, MolGraph};

/// Unique canonical rank per atom (a permutation of `0..n`).
///
/// Atom invariants are refined by neighbor ranks until stable; remaining
/// ties are broken by individualizing one atom of the lowest tied class and
/// refining again.
pub fn canonical_ranks(mol: &MolGraph) -> Vec<usize> {
    let n = mol.len();
    if n == 0 {
        return Vec::new();
    }
    let hs = hydrogen_counts(mol);
    let in_ring = atom_ring_flags(mol);
    let seeds: Vec<(usize, u8, bool, i8, u8, bool)> = (0..n)
        .map(|i| {
            let a = mol.atom(i);
            (
                mol.degree(i),
                a.element.atomic_number(),
                a.aromatic,
                a.formal_charge,
                hs[i],
                in_ring[i],
            )
        })
        .collect();
    let mut ranks = dense_ranks(&seeds);
    refine(mol, &mut ranks);
    while distinct(&ranks) < n {
        let mut counts = vec![0usize; n];
        for &r in &ranks {
            counts[r] += 1;
        }
        let tied = (0..n).find(|&r| counts[r] > 1).expect("some class is tied");
        let chosen = (0..n).find(|&i| ranks[i] == tied).expect("class is nonempty");
        let split: Vec<usize> = (0..n)
            .map(|i| {
                if ranks[i] == tied && i != chosen {
                    2 * ranks[i] + 1
                } else {
                    2 * ranks[i]
                }
            })
            .collect();
        ranks = dense_ranks(&split);
        refine(mol, &mut ranks);
    }
    ranks
}

fn distinct(ranks: &[usize]) -> usize {
    let mut seen = vec![false; ranks.len()];
    ranks.iter().for_each(|&r| seen[r] = true);
    seen.iter().filter(|&&s| s).count()
}

fn dense_ranks<K: Ord>(keys: &[K]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..keys.len()).collect();
    idx.sort_by(|&a, &b| keys[a].cmp(&keys[b]));
    let mut ranks = vec![0; keys.len()];
    let mut r = 0;
    for w in 0..idx.len() {
        if w > 0 && keys[idx[w]] != keys[idx[w - 1]] {
            r += 1;
        }
        ranks[idx[w]] = r;
    }
    ranks
}

fn refine(mol: &MolGraph, ranks: &mut Vec<usize>) {
    let mut classes = distinct(ranks);
    loop {
        let keys: Vec<(usize, Vec<(usize, u8)>)> = (0..mol.len())
            .map(|i| {
                let mut env: Vec<(usize, u8)> = mol
                    .neighbors(i)
                    .iter()
                    .map(|&(nb, bi)| (ranks[nb], mol.bonds()[bi].order.code()))
                    .collect();
                env.sort_unstable();
                (ranks[i], env)
            })
            .collect();
        *ranks = dense_ranks(&keys);
        let now = distinct(ranks);
        if now == classes {
            break;
        }
        classes = now;
    }
}
