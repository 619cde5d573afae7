use super::{SmilesError, SmilesErrorKind};

/// Element of the supported organic subset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
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

    /// Elements that may carry the aromatic flag (the ones with a lowercase
    /// SMILES form).
    pub fn supports_aromatic(self) -> bool {
        matches!(
            self,
            Element::B | Element::C | Element::N | Element::O | Element::P | Element::S
        )
    }
}

/// Atom attributes. `bracketed` records whether the atom was written in
/// bracket form in the source string; it is a parse artifact and does not
/// participate in graph identity (`[C]` and `C` denote the same heavy atom
/// under the no-valence model used here).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Atom {
    pub element: Element,
    pub aromatic: bool,
    pub charge: i32,
    pub explicit_h: u8,
    pub bracketed: bool,
}

impl Atom {
    /// The attribute tuple that defines atom identity for isomorphism and
    /// canonicalization.
    pub fn identity(&self) -> (Element, bool, i32, u8) {
        (self.element, self.aromatic, self.charge, self.explicit_h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub enum BondOrder {
    Single,
    Double,
    Triple,
    Aromatic,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Bond {
    pub a: usize,
    pub b: usize,
    pub order: BondOrder,
}

/// Attributed molecular graph: the semantic ground truth behind a SMILES
/// string. Always connected, with no duplicate bonds or self-loops, and
/// aromatic bonds only between aromatic-flagged atoms.
#[derive(Debug, Clone)]
pub struct MolGraph {
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    adjacency: Vec<Vec<(usize, usize)>>,
}

impl MolGraph {
    /// Builds a graph and validates its invariants. Invariant violations are
    /// reported at position 0 (callers with source positions should remap).
    pub fn new(atoms: Vec<Atom>, bonds: Vec<Bond>) -> Result<Self, SmilesError> {
        let err = |kind| Err(SmilesError::new(0, kind));
        if atoms.is_empty() {
            return err(SmilesErrorKind::EmptyInput);
        }
        let n = atoms.len();
        let mut adjacency = vec![Vec::new(); n];
        for (i, bond) in bonds.iter().enumerate() {
            if bond.a >= n || bond.b >= n {
                return err(SmilesErrorKind::UnexpectedCharacter { ch: '?' });
            }
            if bond.a == bond.b {
                return err(SmilesErrorKind::RingSelfBond);
            }
            if adjacency[bond.a].iter().any(|&(nbr, _)| nbr == bond.b) {
                return err(SmilesErrorKind::DuplicateBond);
            }
            if bond.order == BondOrder::Aromatic
                && !(atoms[bond.a].aromatic && atoms[bond.b].aromatic)
            {
                return err(SmilesErrorKind::AromaticBondNonAromatic);
            }
            adjacency[bond.a].push((bond.b, i));
            adjacency[bond.b].push((bond.a, i));
        }
        let graph = Self {
            atoms,
            bonds,
            adjacency,
        };
        if !graph.is_connected() {
            return err(SmilesErrorKind::DotInFragment);
        }
        Ok(graph)
    }

    pub fn atom_count(&self) -> usize {
        self.atoms.len()
    }

    pub fn bond_count(&self) -> usize {
        self.bonds.len()
    }

    pub fn atom(&self, i: usize) -> &Atom {
        &self.atoms[i]
    }

    pub fn atoms(&self) -> &[Atom] {
        &self.atoms
    }

    pub fn bonds(&self) -> &[Bond] {
        &self.bonds
    }

    /// Neighbors of atom `i` as `(neighbor index, bond index)` pairs.
    pub fn neighbors(&self, i: usize) -> &[(usize, usize)] {
        &self.adjacency[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.adjacency[i].len()
    }

    pub fn bond_between(&self, a: usize, b: usize) -> Option<&Bond> {
        self.adjacency[a]
            .iter()
            .find(|&&(nbr, _)| nbr == b)
            .map(|&(_, bi)| &self.bonds[bi])
    }

    fn is_connected(&self) -> bool {
        let n = self.atoms.len();
        let mut seen = vec![false; n];
        let mut stack = vec![0];
        seen[0] = true;
        let mut count = 1;
        while let Some(i) = stack.pop() {
            for &(nbr, _) in &self.adjacency[i] {
                if !seen[nbr] {
                    seen[nbr] = true;
                    count += 1;
                    stack.push(nbr);
                }
            }
        }
        count == n
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn carbon() -> Atom {
        Atom {
            element: Element::C,
            aromatic: false,
            charge: 0,
            explicit_h: 0,
            bracketed: false,
        }
    }

    #[test]
    fn rejects_duplicate_bonds() {
        let atoms = vec![carbon(), carbon()];
        let bonds = vec![
            Bond {
                a: 0,
                b: 1,
                order: BondOrder::Single,
            },
            Bond {
                a: 1,
                b: 0,
                order: BondOrder::Double,
            },
        ];
        let err = MolGraph::new(atoms, bonds).unwrap_err();
        assert_eq!(err.kind, SmilesErrorKind::DuplicateBond);
    }

    #[test]
    fn rejects_disconnected_graphs() {
        let atoms = vec![carbon(), carbon()];
        let err = MolGraph::new(atoms, vec![]).unwrap_err();
        assert_eq!(err.kind, SmilesErrorKind::DotInFragment);
    }

    #[test]
    fn rejects_aromatic_bond_between_plain_atoms() {
        let atoms = vec![carbon(), carbon()];
        let bonds = vec![Bond {
            a: 0,
            b: 1,
            order: BondOrder::Aromatic,
        }];
        let err = MolGraph::new(atoms, bonds).unwrap_err();
        assert_eq!(err.kind, SmilesErrorKind::AromaticBondNonAromatic);
    }
}
