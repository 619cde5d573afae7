use super::graph::{Atom, Bond, BondOrder, Element, MolGraph};
use super::{SmilesError, SmilesErrorKind};

/// Parses a single-fragment SMILES string into a molecular graph.
///
/// Errors carry the 1-based character position they are attributed to: the
/// unmatched `(` for unbalanced parentheses, the digit for unmatched ring
/// closures, the first offending character otherwise.
pub fn parse_smiles(s: &str) -> Result<MolGraph, SmilesError> {
    Parser::new(s).run()
}

struct PendingBond {
    order: Option<BondOrder>,
    position: usize,
}

struct OpenClosure {
    atom: usize,
    order: Option<BondOrder>,
    position: usize,
}

struct Parser<'a> {
    bytes: &'a [u8],
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    bond_pos: Vec<usize>,
    prev: Option<usize>,
    branch_stack: Vec<(usize, usize)>,
    pending: Option<PendingBond>,
    closures: Vec<Option<OpenClosure>>,
}

impl<'a> Parser<'a> {
    fn new(s: &'a str) -> Self {
        Self {
            bytes: s.as_bytes(),
            pos: 0,
            atoms: Vec::new(),
            bonds: Vec::new(),
            bond_pos: Vec::new(),
            prev: None,
            branch_stack: Vec::new(),
            pending: None,
            closures: vec![],
        }
    }

    fn err<T>(&self, position: usize, kind: SmilesErrorKind) -> Result<T, SmilesError> {
        Err(SmilesError::new(position, kind))
    }

    /// 1-based column of the byte at `idx`.
    fn col(&self, idx: usize) -> usize {
        idx + 1
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn run(mut self) -> Result<MolGraph, SmilesError> {
        if self.bytes.is_empty() {
            return self.err(1, SmilesErrorKind::EmptyInput);
        }
        while let Some(b) = self.peek() {
            let at = self.pos;
            match b {
                b'-' | b'=' | b'#' | b':' => {
                    if self.pending.is_some() || self.prev.is_none() {
                        return self.err(self.col(at), SmilesErrorKind::DanglingBond);
                    }
                    self.pending = Some(PendingBond {
                        order: Some(bond_order(b)),
                        position: self.col(at),
                    });
                    self.pos += 1;
                }
                b'/' | b'\\' => {
                    return self.err(
                        self.col(at),
                        SmilesErrorKind::StereoNotSupported { ch: b as char },
                    );
                }
                b'(' => {
                    let Some(prev) = self.prev else {
                        return self.err(self.col(at), SmilesErrorKind::BranchBeforeAtom);
                    };
                    if let Some(p) = &self.pending {
                        // "C=(C)" — the bond belongs inside the branch.
                        return self.err(p.position, SmilesErrorKind::DanglingBond);
                    }
                    self.branch_stack.push((prev, self.col(at)));
                    self.pos += 1;
                }
                b')' => {
                    if let Some(p) = &self.pending {
                        return self.err(p.position, SmilesErrorKind::DanglingBond);
                    }
                    let Some((return_to, _)) = self.branch_stack.pop() else {
                        return self.err(self.col(at), SmilesErrorKind::UnbalancedParenthesis);
                    };
                    self.prev = Some(return_to);
                    self.pos += 1;
                }
                b'0'..=b'9' => {
                    self.ring_closure((b - b'0') as usize, self.col(at))?;
                    self.pos += 1;
                }
                b'%' => {
                    let d1 = self.bytes.get(self.pos + 1).copied();
                    let d2 = self.bytes.get(self.pos + 2).copied();
                    match (d1, d2) {
                        (Some(x), Some(y)) if x.is_ascii_digit() && y.is_ascii_digit() => {
                            let digit = (x - b'0') as usize * 10 + (y - b'0') as usize;
                            self.ring_closure(digit, self.col(at))?;
                            self.pos += 3;
                        }
                        _ => return self.err(self.col(at), SmilesErrorKind::BadPercentClosure),
                    }
                }
                b'.' => {
                    return self.err(self.col(at), SmilesErrorKind::DotInFragment);
                }
                b'[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom, self.col(at))?;
                }
                _ => {
                    let atom = self.organic_atom()?;
                    self.add_atom(atom, self.col(at))?;
                }
            }
        }
        self.finish()
    }

    fn finish(self) -> Result<MolGraph, SmilesError> {
        if let Some((_, open_col)) = self.branch_stack.last() {
            return Err(SmilesError::new(
                *open_col,
                SmilesErrorKind::UnbalancedParenthesis,
            ));
        }
        if self.pending.is_some() {
            let p = self.pending.unwrap();
            return Err(SmilesError::new(p.position, SmilesErrorKind::DanglingBond));
        }
        for (digit, open) in self.closures.iter().enumerate() {
            if let Some(open) = open {
                return Err(SmilesError::new(
                    open.position,
                    SmilesErrorKind::UnmatchedRingClosure { digit },
                ));
            }
        }
        if self.atoms.is_empty() {
            return Err(SmilesError::new(1, SmilesErrorKind::EmptyInput));
        }
        let Parser {
            atoms,
            bonds,
            bond_pos,
            ..
        } = self;
        MolGraph::new(atoms, bonds).map_err(|e| {
            // Graph validation reports at position 0; remap duplicate-bond and
            // aromatic-bond errors to the last bond's source position.
            let position = bond_pos.last().copied().unwrap_or(1);
            SmilesError::new(position, e.kind)
        })
    }

    fn add_atom(&mut self, atom: Atom, col: usize) -> Result<(), SmilesError> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        if let Some(prev) = self.prev {
            let order = self.take_pending_order(prev, idx);
            self.push_bond(prev, idx, order, col)?;
        } else if let Some(p) = self.pending.take() {
            return self.err(p.position, SmilesErrorKind::DanglingBond);
        }
        self.prev = Some(idx);
        Ok(())
    }

    /// Bond order between two atoms when no explicit symbol was written:
    /// aromatic if both ends are aromatic, single otherwise.
    fn take_pending_order(&mut self, a: usize, b: usize) -> BondOrder {
        match self.pending.take().and_then(|p| p.order) {
            Some(order) => order,
            None => {
                if self.atoms[a].aromatic && self.atoms[b].aromatic {
                    BondOrder::Aromatic
                } else {
                    BondOrder::Single
                }
            }
        }
    }

    fn push_bond(
        &mut self,
        a: usize,
        b: usize,
        order: BondOrder,
        col: usize,
    ) -> Result<(), SmilesError> {
        if a == b {
            return self.err(col, SmilesErrorKind::RingSelfBond);
        }
        if self
            .bonds
            .iter()
            .any(|x| (x.a == a && x.b == b) || (x.a == b && x.b == a))
        {
            return self.err(col, SmilesErrorKind::DuplicateBond);
        }
        if order == BondOrder::Aromatic && !(self.atoms[a].aromatic && self.atoms[b].aromatic) {
            return self.err(col, SmilesErrorKind::AromaticBondNonAromatic);
        }
        self.bonds.push(Bond { a, b, order });
        self.bond_pos.push(col);
        Ok(())
    }

    fn ring_closure(&mut self, digit: usize, col: usize) -> Result<(), SmilesError> {
        let Some(current) = self.prev else {
            return self.err(col, SmilesErrorKind::UnmatchedRingClosure { digit });
        };
        if self.closures.len() <= digit {
            self.closures.resize_with(digit + 1, || None);
        }
        let pending = self.pending.take();
        match self.closures[digit].take() {
            None => {
                self.closures[digit] = Some(OpenClosure {
                    atom: current,
                    order: pending.and_then(|p| p.order),
                    position: col,
                });
                Ok(())
            }
            Some(open) => {
                let here = pending.and_then(|p| p.order);
                let order = match (open.order, here) {
                    (Some(x), Some(y)) if x != y => {
                        return self.err(col, SmilesErrorKind::RingBondMismatch)
                    }
                    (Some(x), _) => x,
                    (None, Some(y)) => y,
                    (None, None) => {
                        if self.atoms[open.atom].aromatic && self.atoms[current].aromatic {
                            BondOrder::Aromatic
                        } else {
                            BondOrder::Single
                        }
                    }
                };
                self.push_bond(open.atom, current, order, col)
            }
        }
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let at = self.pos;
        let b = self.bytes[at];
        let two = if at + 1 < self.bytes.len() {
            Some([b, self.bytes[at + 1]])
        } else {
            None
        };
        // Two-letter symbols first: Cl and Br.
        if let Some(pair) = two {
            if &pair == b"Cl" {
                self.pos += 2;
                return Ok(plain(Element::Cl, false));
            }
            if &pair == b"Br" {
                self.pos += 2;
                return Ok(plain(Element::Br, false));
            }
        }
        let (element, aromatic) = match b {
            b'B' => (Element::B, false),
            b'C' => (Element::C, false),
            b'N' => (Element::N, false),
            b'O' => (Element::O, false),
            b'P' => (Element::P, false),
            b'S' => (Element::S, false),
            b'F' => (Element::F, false),
            b'I' => (Element::I, false),
            b'b' => (Element::B, true),
            b'c' => (Element::C, true),
            b'n' => (Element::N, true),
            b'o' => (Element::O, true),
            b'p' => (Element::P, true),
            b's' => (Element::S, true),
            _ => {
                let kind = if b.is_ascii_alphabetic() {
                    SmilesErrorKind::UnknownAtomSymbol {
                        symbol: (b as char).to_string(),
                    }
                } else if b.is_ascii() {
                    SmilesErrorKind::UnexpectedCharacter { ch: b as char }
                } else {
                    SmilesErrorKind::NonAscii
                };
                return self.err(self.col(at), kind);
            }
        };
        self.pos += 1;
        Ok(plain(element, aromatic))
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let open_at = self.pos;
        self.pos += 1; // consume '['
        let sym_at = self.pos;
        let Some(b) = self.peek() else {
            return self.err(self.col(open_at), SmilesErrorKind::UnterminatedBracket);
        };
        let (element, aromatic) = {
            let two = if self.pos + 1 < self.bytes.len() {
                Some([b, self.bytes[self.pos + 1]])
            } else {
                None
            };
            if two == Some(*b"Cl") {
                self.pos += 2;
                (Element::Cl, false)
            } else if two == Some(*b"Br") {
                self.pos += 2;
                (Element::Br, false)
            } else {
                let pair = match b {
                    b'B' => (Element::B, false),
                    b'C' => (Element::C, false),
                    b'N' => (Element::N, false),
                    b'O' => (Element::O, false),
                    b'P' => (Element::P, false),
                    b'S' => (Element::S, false),
                    b'F' => (Element::F, false),
                    b'I' => (Element::I, false),
                    b'b' => (Element::B, true),
                    b'c' => (Element::C, true),
                    b'n' => (Element::N, true),
                    b'o' => (Element::O, true),
                    b'p' => (Element::P, true),
                    b's' => (Element::S, true),
                    b'@' => {
                        return self.err(
                            self.col(sym_at),
                            SmilesErrorKind::StereoNotSupported { ch: '@' },
                        )
                    }
                    _ => {
                        let mut symbol = String::new();
                        symbol.push(b as char);
                        if b.is_ascii_uppercase() {
                            if let Some(n) = self.bytes.get(self.pos + 1) {
                                if n.is_ascii_lowercase() {
                                    symbol.push(*n as char);
                                }
                            }
                        }
                        let kind = if b.is_ascii_alphabetic() {
                            SmilesErrorKind::UnknownAtomSymbol { symbol }
                        } else if b.is_ascii() {
                            SmilesErrorKind::MalformedBracket {
                                detail: "expected an element symbol after '['",
                            }
                        } else {
                            SmilesErrorKind::NonAscii
                        };
                        return self.err(self.col(sym_at), kind);
                    }
                };
                self.pos += 1;
                pair
            }
        };

        let mut explicit_h: u32 = 0;
        if self.peek() == Some(b'@') {
            return self.err(
                self.col(self.pos),
                SmilesErrorKind::StereoNotSupported { ch: '@' },
            );
        }
        if self.peek() == Some(b'H') {
            self.pos += 1;
            explicit_h = match self.read_digits() {
                Some(n) => n,
                None => 1,
            };
            if explicit_h > 9 {
                return self.err(
                    self.col(self.pos),
                    SmilesErrorKind::MalformedBracket {
                        detail: "hydrogen count too large",
                    },
                );
            }
        }

        let mut charge: i32 = 0;
        if let Some(sign @ (b'+' | b'-')) = self.peek() {
            let unit: i32 = if sign == b'+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(n) = self.read_digits() {
                if n > 15 {
                    return self.err(self.col(self.pos), SmilesErrorKind::ChargeOutOfRange);
                }
                charge = unit * n as i32;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    charge += unit;
                    self.pos += 1;
                    if charge.unsigned_abs() > 15 {
                        return self.err(self.col(self.pos), SmilesErrorKind::ChargeOutOfRange);
                    }
                }
            }
        }

        match self.peek() {
            Some(b']') => {
                self.pos += 1;
            }
            Some(b'@') => {
                return self.err(
                    self.col(self.pos),
                    SmilesErrorKind::StereoNotSupported { ch: '@' },
                )
            }
            Some(_) => {
                return self.err(
                    self.col(self.pos),
                    SmilesErrorKind::MalformedBracket {
                        detail: "expected ']'",
                    },
                )
            }
            None => return self.err(self.col(open_at), SmilesErrorKind::UnterminatedBracket),
        }

        if aromatic && !element.supports_aromatic() {
            return self.err(
                self.col(sym_at),
                SmilesErrorKind::UnknownAtomSymbol {
                    symbol: element.symbol().to_lowercase(),
                },
            );
        }

        Ok(Atom {
            element,
            aromatic,
            charge,
            explicit_h: explicit_h as u8,
            bracketed: true,
        })
    }

    fn read_digits(&mut self) -> Option<u32> {
        let start = self.pos;
        let mut value: u32 = 0;
        while let Some(b @ b'0'..=b'9') = self.peek() {
            value = value.saturating_mul(10).saturating_add(u32::from(b - b'0'));
            self.pos += 1;
            if value > 999 {
                break;
            }
        }
        if self.pos == start {
            None
        } else {
            Some(value)
        }
    }
}

fn plain(element: Element, aromatic: bool) -> Atom {
    Atom {
        element,
        aromatic,
        charge: 0,
        explicit_h: 0,
        bracketed: false,
    }
}

fn bond_order(b: u8) -> BondOrder {
    match b {
        b'-' => BondOrder::Single,
        b'=' => BondOrder::Double,
        b'#' => BondOrder::Triple,
        b':' => BondOrder::Aromatic,
        _ => unreachable!("caller filters bond symbols"),
    }
}
