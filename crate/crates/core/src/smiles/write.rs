use rand::seq::SliceRandom;
use rand::Rng;

use super::graph::{BondOrder, MolGraph};

/// Writes a randomized SMILES: the traversal starts at a uniformly chosen
/// atom and shuffles the neighbor visitation order at every step. The output
/// parses back to a graph isomorphic to the input, and with a fixed seed the
/// output is deterministic.
pub fn write_randomized<R: Rng>(g: &MolGraph, rng: &mut R) -> String {
    let start = rng.gen_range(0..g.atom_count());
    let plan = plan_traversal(g, start, |neighbors| neighbors.shuffle(rng));
    emit(g, &plan)
}

/// Writes a SMILES following the given atom ranking: the traversal starts at
/// the minimal-rank atom and visits neighbors in ascending rank order.
pub(crate) fn write_ranked(g: &MolGraph, ranks: &[usize]) -> String {
    let start = (0..g.atom_count()).min_by_key(|&i| ranks[i]).unwrap();
    let plan = plan_traversal(g, start, |neighbors| {
        neighbors.sort_by_key(|&n| ranks[n]);
    });
    emit(g, &plan)
}

/// The result of the first traversal pass: the DFS tree (with per-atom child
/// order fixed) plus the ring-closure edges, each attributed to the atom
/// that opens it (emitted earlier) and the atom that closes it.
struct Traversal {
    start: usize,
    tree_children: Vec<Vec<usize>>,
    opens: Vec<Vec<usize>>,
}

fn plan_traversal<F>(g: &MolGraph, start: usize, mut order: F) -> Traversal
where
    F: FnMut(&mut Vec<usize>),
{
    let n = g.atom_count();
    let mut visited = vec![false; n];
    let mut bond_used = vec![false; g.bond_count()];
    let mut tree_children = vec![Vec::new(); n];
    let mut opens = vec![Vec::new(); n];

    struct Frame {
        atom: usize,
        neighbors: Vec<usize>,
        next: usize,
    }

    let mut ordered_neighbors = |atom: usize, parent: Option<usize>| {
        let mut nbrs: Vec<usize> = g
            .neighbors(atom)
            .iter()
            .map(|&(nbr, _)| nbr)
            .filter(|&nbr| Some(nbr) != parent)
            .collect();
        order(&mut nbrs);
        nbrs
    };

    visited[start] = true;
    let mut stack = vec![Frame {
        atom: start,
        neighbors: ordered_neighbors(start, None),
        next: 0,
    }];

    loop {
        let (u, v) = {
            let Some(frame) = stack.last_mut() else { break };
            if frame.next >= frame.neighbors.len() {
                stack.pop();
                continue;
            }
            let u = frame.atom;
            let v = frame.neighbors[frame.next];
            frame.next += 1;
            (u, v)
        };
        let bond_idx = g
            .neighbors(u)
            .iter()
            .find(|&&(nbr, _)| nbr == v)
            .map(|&(_, bi)| bi)
            .expect("neighbor bond exists");
        if bond_used[bond_idx] {
            continue;
        }
        bond_used[bond_idx] = true;
        if visited[v] {
            // Back edge: v was emitted earlier, so it opens the closure and
            // u closes it.
            opens[v].push(u);
        } else {
            visited[v] = true;
            tree_children[u].push(v);
            stack.push(Frame {
                atom: v,
                neighbors: ordered_neighbors(v, Some(u)),
                next: 0,
            });
        }
    }

    Traversal {
        start,
        tree_children,
        opens,
    }
}

/// Allocates the smallest free ring-closure digit, `%nn` beyond 9.
struct DigitPool {
    in_use: Vec<bool>,
}

impl DigitPool {
    fn new() -> Self {
        Self {
            in_use: vec![false; 100],
        }
    }

    fn take(&mut self) -> usize {
        for d in 1..100 {
            if !self.in_use[d] {
                self.in_use[d] = true;
                return d;
            }
        }
        panic!("more than 99 ring closures open at once");
    }

    fn release(&mut self, d: usize) {
        self.in_use[d] = false;
    }
}

fn push_digit(out: &mut String, d: usize) {
    if d > 9 {
        out.push('%');
    }
    out.push_str(&d.to_string());
}

fn emit(g: &MolGraph, plan: &Traversal) -> String {
    enum Task {
        Visit { atom: usize, parent: Option<usize> },
        Text(&'static str),
    }

    let mut out = String::new();
    let mut digits = DigitPool::new();
    // closure key: (open atom, close atom) -> digit
    let mut open_digits: Vec<(usize, usize, usize)> = Vec::new();
    let mut stack = vec![Task::Visit {
        atom: plan.start,
        parent: None,
    }];

    while let Some(task) = stack.pop() {
        match task {
            Task::Text(t) => out.push_str(t),
            Task::Visit { atom, parent } => {
                if let Some(p) = parent {
                    out.push_str(bond_symbol(g, p, atom));
                }
                push_atom(&mut out, g, atom);

                // Close ring bonds opened earlier, smallest digit first.
                let mut closing: Vec<(usize, usize)> = open_digits
                    .iter()
                    .filter(|&&(_, close, _)| close == atom)
                    .map(|&(open, _, d)| (d, open))
                    .collect();
                closing.sort_unstable();
                for (d, open_atom) in closing {
                    out.push_str(bond_symbol(g, open_atom, atom));
                    push_digit(&mut out, d);
                    digits.release(d);
                    open_digits.retain(|&(o, c, _)| !(o == open_atom && c == atom));
                }

                // Open ring bonds that a later atom will close.
                for &closer in &plan.opens[atom] {
                    let d = digits.take();
                    push_digit(&mut out, d);
                    open_digits.push((atom, closer, d));
                }

                let children = &plan.tree_children[atom];
                for (i, &child) in children.iter().enumerate().rev() {
                    let last = i == children.len() - 1;
                    if !last {
                        stack.push(Task::Text(")"));
                    }
                    stack.push(Task::Visit {
                        atom: child,
                        parent: Some(atom),
                    });
                    if !last {
                        stack.push(Task::Text("("));
                    }
                }
            }
        }
    }
    out
}

/// Bond symbol as written between two atoms. Implicit bonds are aromatic
/// when both ends are aromatic, so a true single bond between two aromatic
/// atoms must be written explicitly.
fn bond_symbol(g: &MolGraph, a: usize, b: usize) -> &'static str {
    let bond = g.bond_between(a, b).expect("bond exists");
    match bond.order {
        BondOrder::Single => {
            if g.atom(a).aromatic && g.atom(b).aromatic {
                "-"
            } else {
                ""
            }
        }
        BondOrder::Double => "=",
        BondOrder::Triple => "#",
        BondOrder::Aromatic => "",
    }
}

fn push_atom(out: &mut String, g: &MolGraph, i: usize) {
    let atom = g.atom(i);
    let needs_bracket = atom.charge != 0 || atom.explicit_h > 0;
    let symbol = atom.element.symbol();
    let lower;
    let written: &str = if atom.aromatic {
        lower = symbol.to_lowercase();
        &lower
    } else {
        symbol
    };
    if !needs_bracket {
        out.push_str(written);
        return;
    }
    out.push('[');
    out.push_str(written);
    if atom.explicit_h == 1 {
        out.push('H');
    } else if atom.explicit_h > 1 {
        out.push('H');
        out.push_str(&atom.explicit_h.to_string());
    }
    match atom.charge {
        0 => {}
        1 => out.push('+'),
        -1 => out.push('-'),
        c if c > 0 => out.push_str(&format!("+{c}")),
        c => out.push_str(&format!("-{}", -c)),
    }
    out.push(']');
}

#[cfg(test)]
mod tests {
    use super::super::parse_smiles;
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn single_atom_has_one_linearization() {
        let g = parse_smiles("C").unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        for _ in 0..10 {
            assert_eq!(write_randomized(&g, &mut rng), "C");
        }
    }

    #[test]
    fn randomized_outputs_come_from_the_dfs_linearization_set() {
        // Brute-force oracle: all DFS linearizations of the path C-C-O.
        let expected = ["CCO", "OCC", "C(C)O", "C(O)C"];
        let g = parse_smiles("CCO").unwrap();
        let mut seen = std::collections::BTreeSet::new();
        for seed in 0..200 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let s = write_randomized(&g, &mut rng);
            assert!(expected.contains(&s.as_str()), "unexpected output {s}");
            seen.insert(s);
        }
        assert_eq!(seen.len(), expected.len(), "all linearizations reached");
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        let g = parse_smiles("CC(=O)OC1CCCC1").unwrap();
        let a = write_randomized(&g, &mut ChaCha8Rng::seed_from_u64(7));
        let b = write_randomized(&g, &mut ChaCha8Rng::seed_from_u64(7));
        assert_eq!(a, b);
    }

    #[test]
    fn bracket_atoms_render_charge_and_hydrogens() {
        for s in ["[NH4+]", "[O-]", "[CH2-2]", "[nH]"] {
            let g = parse_smiles(s).unwrap();
            let mut rng = ChaCha8Rng::seed_from_u64(1);
            assert_eq!(write_randomized(&g, &mut rng), s);
        }
    }

    #[test]
    fn ring_closure_digits_are_reused() {
        let g = parse_smiles("C1CC1C1CC1").unwrap();
        let ranks: Vec<usize> = (0..g.atom_count()).collect();
        let s = write_ranked(&g, &ranks);
        assert!(!s.contains('2'), "digit 1 should be reused: {s}");
        let back = parse_smiles(&s).unwrap();
        assert_eq!(back.atom_count(), 6);
        assert_eq!(back.bond_count(), 7);
    }
}
