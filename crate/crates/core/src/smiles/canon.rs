use super::graph::{BondOrder, MolGraph};
use super::write::write_ranked;

/// Writes the canonical SMILES of a graph. The output depends only on the
/// isomorphism class of the input: atoms are ranked by iterative neighborhood
/// refinement seeded with (element, aromatic flag, charge, explicit-H count,
/// degree); remaining ties are resolved by individualization, taking the
/// lexicographically smallest string over the candidate labelings. Writing is
/// a deterministic depth-first traversal from the minimal-rank atom.
pub fn write_canonical(g: &MolGraph) -> String {
    let ranks = initial_ranks(g);
    best_string(g, ranks).0
}

/// Canonical atom ranks: the discrete labeling that produces the canonical
/// SMILES. Ranks are a permutation of `0..atom_count`.
pub fn canonical_ranks(g: &MolGraph) -> Vec<usize> {
    let ranks = initial_ranks(g);
    best_string(g, ranks).1
}

fn best_string(g: &MolGraph, ranks: Vec<usize>) -> (String, Vec<usize>) {
    let ranks = refine(g, ranks);
    match first_tied_cell(g, &ranks) {
        None => (write_ranked(g, &ranks), ranks),
        Some(cell) => cell
            .into_iter()
            .map(|atom| best_string(g, individualize(g, &ranks, atom)))
            .min_by(|a, b| a.0.cmp(&b.0))
            .expect("cell is non-empty"),
    }
}

fn initial_ranks(g: &MolGraph) -> Vec<usize> {
    let keys: Vec<_> = (0..g.atom_count())
        .map(|i| {
            let a = g.atom(i);
            (a.identity(), g.degree(i))
        })
        .collect();
    dense_ranks(&keys)
}

/// One round of neighborhood refinement until the partition is stable.
fn refine(g: &MolGraph, mut ranks: Vec<usize>) -> Vec<usize> {
    loop {
        let keys: Vec<_> = (0..g.atom_count())
            .map(|i| {
                let mut nbrs: Vec<(u8, usize)> = g
                    .neighbors(i)
                    .iter()
                    .map(|&(nbr, bi)| (order_code(g.bonds()[bi].order), ranks[nbr]))
                    .collect();
                nbrs.sort_unstable();
                (ranks[i], nbrs)
            })
            .collect();
        let next = dense_ranks(&keys);
        if next == ranks {
            return ranks;
        }
        ranks = next;
    }
}

/// The tied cell with the smallest rank value, if any.
fn first_tied_cell(g: &MolGraph, ranks: &[usize]) -> Option<Vec<usize>> {
    let n = g.atom_count();
    let mut counts = vec![0usize; n];
    for &r in ranks {
        counts[r] += 1;
    }
    let rank = (0..n).find(|&r| counts[r] > 1)?;
    Some((0..n).filter(|&i| ranks[i] == rank).collect())
}

/// Splits `atom` out of its cell, giving it the smaller rank.
fn individualize(g: &MolGraph, ranks: &[usize], atom: usize) -> Vec<usize> {
    let keys: Vec<_> = (0..g.atom_count())
        .map(|i| (ranks[i], usize::from(i != atom && ranks[i] == ranks[atom])))
        .collect();
    dense_ranks(&keys)
}

fn order_code(order: BondOrder) -> u8 {
    match order {
        BondOrder::Single => 0,
        BondOrder::Double => 1,
        BondOrder::Triple => 2,
        BondOrder::Aromatic => 3,
    }
}

fn dense_ranks<K: Ord + Clone>(keys: &[K]) -> Vec<usize> {
    let mut sorted: Vec<&K> = keys.iter().collect();
    sorted.sort();
    sorted.dedup();
    keys.iter()
        .map(|k| sorted.binary_search(&k).expect("key present"))
        .collect()
}
