//! Shared generators and independent oracles for the integration suites.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use rpt_core::data::Reaction;
use rpt_core::smiles::{write_canonical, Atom, Bond, BondOrder, Element, MolGraph};

/// Builds a random connected molecule of at most `max_atoms` heavy atoms:
/// a random tree with occasional double/triple bonds and extra ring edges,
/// optionally seeded with an aromatic six-ring, plus occasional charges and
/// explicit hydrogens when `decorations` is on.
pub fn random_molecule(rng: &mut ChaCha8Rng, max_atoms: usize, decorations: bool) -> MolGraph {
    let n = rng.gen_range(1..=max_atoms.max(1));
    let mut atoms: Vec<Atom> = Vec::with_capacity(n);
    let mut bonds: Vec<Bond> = Vec::new();

    let aromatic_ring = n >= 6 && rng.gen_bool(0.35);
    let ring_len = if aromatic_ring { 6 } else { 0 };
    for i in 0..ring_len {
        // Aromatic ring members: mostly carbon, some nitrogen.
        let element = if rng.gen_bool(0.8) {
            Element::C
        } else {
            Element::N
        };
        atoms.push(Atom {
            element,
            aromatic: true,
            charge: 0,
            explicit_h: 0,
            bracketed: false,
        });
        if i > 0 {
            bonds.push(Bond {
                a: i - 1,
                b: i,
                order: BondOrder::Aromatic,
            });
        }
    }
    if aromatic_ring {
        bonds.push(Bond {
            a: 5,
            b: 0,
            order: BondOrder::Aromatic,
        });
    }

    while atoms.len() < n {
        let element = match rng.gen_range(0..100) {
            0..=54 => Element::C,
            55..=69 => Element::N,
            70..=84 => Element::O,
            85..=89 => Element::S,
            90..=92 => Element::F,
            93..=95 => Element::Cl,
            96..=97 => Element::Br,
            98 => Element::P,
            _ => Element::I,
        };
        let charge = if decorations && rng.gen_bool(0.06) && matches!(element, Element::N | Element::O)
        {
            if element == Element::N {
                1
            } else {
                -1
            }
        } else {
            0
        };
        let explicit_h = if decorations && rng.gen_bool(0.08) {
            rng.gen_range(1..=3)
        } else {
            0
        };
        let idx = atoms.len();
        atoms.push(Atom {
            element,
            aromatic: false,
            charge,
            explicit_h,
            bracketed: charge != 0 || explicit_h > 0,
        });
        if idx > 0 {
            let parent = rng.gen_range(0..idx);
            let order = if atoms[parent].aromatic {
                BondOrder::Single
            } else {
                match rng.gen_range(0..10) {
                    0 => BondOrder::Double,
                    1 if matches!(element, Element::C | Element::N) => BondOrder::Triple,
                    _ => BondOrder::Single,
                }
            };
            bonds.push(Bond {
                a: parent,
                b: idx,
                order,
            });
        }
    }

    // An occasional extra edge closes a ring.
    if n >= 4 && rng.gen_bool(0.3) {
        for _ in 0..4 {
            let a = rng.gen_range(0..n);
            let b = rng.gen_range(0..n);
            if a == b {
                continue;
            }
            let exists = bonds
                .iter()
                .any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a));
            if exists {
                continue;
            }
            bonds.push(Bond {
                a,
                b,
                order: BondOrder::Single,
            });
            break;
        }
    }

    MolGraph::new(atoms, bonds).expect("generated molecule is valid")
}

/// Disjoint union of two molecules plus a single bond between their first
/// atoms: the product rule of the synthetic reaction grammar.
pub fn join_molecules(a: &MolGraph, b: &MolGraph) -> MolGraph {
    let offset = a.atom_count();
    let mut atoms: Vec<Atom> = a.atoms().to_vec();
    atoms.extend_from_slice(b.atoms());
    let mut bonds: Vec<Bond> = a.bonds().to_vec();
    bonds.extend(b.bonds().iter().map(|bond| Bond {
        a: bond.a + offset,
        b: bond.b + offset,
        order: bond.order,
    }));
    bonds.push(Bond {
        a: 0,
        b: offset,
        order: BondOrder::Single,
    });
    MolGraph::new(atoms, bonds).expect("joined molecule is valid")
}

/// A synthetic reaction: two random reactants whose join is the product.
pub fn random_reaction(rng: &mut ChaCha8Rng, max_atoms_per_reactant: usize) -> Reaction {
    let a = random_molecule(rng, max_atoms_per_reactant, false);
    let b = random_molecule(rng, max_atoms_per_reactant, false);
    let product = join_molecules(&a, &b);
    Reaction {
        reactants: vec![write_canonical(&a), write_canonical(&b)],
        reagents: vec![],
        product: write_canonical(&product),
    }
}

/// Number of non-carbon heavy atoms: the synthetic property label.
pub fn heteroatom_count(g: &MolGraph) -> usize {
    g.atoms()
        .iter()
        .filter(|a| a.element != Element::C)
        .count()
}

/// Literal 2^n enumeration of sign patterns over the given (average) ranks:
/// the independent oracle for the exact signed-rank tail.
pub fn wilcoxon_enumeration_p(ranks: &[f64], w_plus_observed: f64) -> f64 {
    let n = ranks.len();
    assert!(n <= 20, "enumeration oracle is for small n");
    let mut at_least = 0u64;
    for pattern in 0u64..(1u64 << n) {
        let w: f64 = (0..n)
            .filter(|&i| pattern & (1 << i) != 0)
            .map(|i| ranks[i])
            .sum();
        if w >= w_plus_observed {
            at_least += 1;
        }
    }
    at_least as f64 / (1u64 << n) as f64
}

/// Average ranks of |values|, the convention the test under check uses.
pub fn average_ranks_of_abs(values: &[f64]) -> Vec<f64> {
    let abs: Vec<f64> = values.iter().map(|v| v.abs()).collect();
    let n = abs.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| abs[a].total_cmp(&abs[b]));
    let mut ranks = vec![0.0; n];
    let mut i = 0;
    while i < n {
        let mut j = i;
        while j < n && abs[order[j]] == abs[order[i]] {
            j += 1;
        }
        let avg = (i + j + 1) as f64 / 2.0;
        for &idx in &order[i..j] {
            ranks[idx] = avg;
        }
        i = j;
    }
    ranks
}

/// Brute-force graph isomorphism respecting atom identity and bond orders,
/// for small molecules.
pub fn isomorphic(a: &MolGraph, b: &MolGraph) -> bool {
    if a.atom_count() != b.atom_count() || a.bond_count() != b.bond_count() {
        return false;
    }
    let n = a.atom_count();
    assert!(n <= 12, "oracle is exponential; keep molecules small");
    let mut mapping: Vec<Option<usize>> = vec![None; n];
    let mut used = vec![false; n];
    backtrack(a, b, 0, &mut mapping, &mut used)
}

fn backtrack(
    a: &MolGraph,
    b: &MolGraph,
    next: usize,
    mapping: &mut Vec<Option<usize>>,
    used: &mut Vec<bool>,
) -> bool {
    let n = a.atom_count();
    if next == n {
        return true;
    }
    for candidate in 0..n {
        if used[candidate] {
            continue;
        }
        if a.atom(next).identity() != b.atom(candidate).identity() {
            continue;
        }
        if a.degree(next) != b.degree(candidate) {
            continue;
        }
        // Edges back to already-mapped atoms must match with equal orders.
        let mut consistent = true;
        for earlier in 0..next {
            let image = mapping[earlier].expect("mapped");
            let edge_a = a.bond_between(next, earlier).map(|bond| bond.order);
            let edge_b = b.bond_between(candidate, image).map(|bond| bond.order);
            if edge_a != edge_b {
                consistent = false;
                break;
            }
        }
        if !consistent {
            continue;
        }
        mapping[next] = Some(candidate);
        used[candidate] = true;
        if backtrack(a, b, next + 1, mapping, used) {
            return true;
        }
        mapping[next] = None;
        used[candidate] = false;
    }
    false
}
