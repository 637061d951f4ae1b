//! A single-pass SMILES reader for the organic subset plus bracket atoms.
//!
//! Supported: bare organic-subset atoms (B C N O P S F Cl Br I), aromatic
//! lowercase forms, bracket atoms with isotope / H-count / charge, branches,
//! ring closures including `%nn`, bond symbols `- = # :`, and `.` for
//! disconnected components. Stereo markers (`@`, `@@`, `/`, `\`) are
//! accepted and ignored (`/` and `\` read as single bonds); isotopes are
//! accepted and discarded. Aromaticity is taken from the notation as
//! written — there is no perception pass.
//!
//! Every error carries the byte offset in the input that triggered it.

use std::collections::HashMap;

use thiserror::Error;

use super::{Atom, Bond, BondOrder, Element, Molecule};

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("empty SMILES string")]
    Empty,
    #[error("unexpected character '{ch}' at offset {pos}")]
    UnexpectedChar { ch: char, pos: usize },
    #[error("unknown element '{symbol}' at offset {pos}")]
    UnknownElement { symbol: String, pos: usize },
    #[error("element '{symbol}' at offset {pos} must be written in brackets")]
    BareElementNotAllowed { symbol: String, pos: usize },
    #[error("unclosed bracket atom starting at offset {pos}")]
    UnclosedBracket { pos: usize },
    #[error("')' at offset {pos} has no matching '('")]
    UnmatchedBranchClose { pos: usize },
    #[error("'(' at offset {pos} is never closed")]
    UnclosedBranch { pos: usize },
    #[error("'(' at offset {pos} requires a preceding atom")]
    BranchWithoutAtom { pos: usize },
    #[error("ring closure at offset {pos} requires a preceding atom")]
    RingWithoutAtom { pos: usize },
    #[error("ring closure {label} opened at offset {pos} is never closed")]
    UnmatchedRingClosure { label: u16, pos: usize },
    #[error("'%' ring label at offset {pos} needs exactly two digits")]
    InvalidRingLabel { pos: usize },
    #[error("ring closure at offset {pos} would bond an atom to itself")]
    RingSelfBond { pos: usize },
    #[error("ring closure {label} at offset {pos} disagrees with the bond order at its opening")]
    RingBondConflict { label: u16, pos: usize },
    #[error("duplicate bond between the same atoms at offset {pos}")]
    DuplicateBond { pos: usize },
    #[error("bond symbol at offset {pos} is not followed by an atom or ring closure")]
    DanglingBond { pos: usize },
    #[error("two bond symbols in a row at offset {pos}")]
    RepeatedBondSymbol { pos: usize },
    #[error("invalid charge specification at offset {pos}")]
    InvalidCharge { pos: usize },
    #[error("valence overflow on '{symbol}' at offset {pos}: bond order sum {load} exceeds every allowed valence")]
    ValenceOverflow {
        symbol: String,
        pos: usize,
        load: u32,
    },
}

/// Parse a SMILES string into a molecular graph.
///
/// Leading/trailing whitespace is tolerated; reported offsets always refer
/// to the original string.
pub fn parse_smiles(text: &str) -> Result<Molecule, SmilesError> {
    let trimmed = text.trim();
    if trimmed.is_empty() {
        return Err(SmilesError::Empty);
    }
    let base = text.len() - text.trim_start().len();
    Parser::new(trimmed, base).run()
}

struct RingOpen {
    atom: usize,
    order: Option<BondOrder>,
    pos: usize,
}

struct Parser<'a> {
    text: &'a str,
    bytes: &'a [u8],
    pos: usize,
    /// Offset of `text` within the original (untrimmed) input.
    base: usize,
    atoms: Vec<Atom>,
    /// Source offset of each atom, for valence diagnostics.
    atom_pos: Vec<usize>,
    /// Whether each atom came from a bracket (no implicit hydrogens).
    bracket: Vec<bool>,
    bonds: Vec<Bond>,
    prev: Option<usize>,
    pending: Option<(BondOrder, usize)>,
    branch_stack: Vec<(usize, usize)>,
    ring_open: HashMap<u16, RingOpen>,
}

impl<'a> Parser<'a> {
    fn new(text: &'a str, base: usize) -> Parser<'a> {
        Parser {
            text,
            bytes: text.as_bytes(),
            pos: 0,
            base,
            atoms: Vec::new(),
            atom_pos: Vec::new(),
            bracket: Vec::new(),
            bonds: Vec::new(),
            prev: None,
            pending: None,
            branch_stack: Vec::new(),
            ring_open: HashMap::new(),
        }
    }

    /// Absolute offset of a local position, for error reporting.
    fn at(&self, pos: usize) -> usize {
        self.base + pos
    }

    fn peek(&self) -> Option<u8> {
        self.bytes.get(self.pos).copied()
    }

    fn unexpected(&self, pos: usize) -> SmilesError {
        let ch = self.text[pos..].chars().next().unwrap_or('?');
        SmilesError::UnexpectedChar {
            ch,
            pos: self.at(pos),
        }
    }

    fn run(mut self) -> Result<Molecule, SmilesError> {
        while let Some(c) = self.peek() {
            let pos = self.pos;
            match c {
                b'(' => {
                    if let Some((_, bpos)) = self.pending {
                        return Err(SmilesError::DanglingBond { pos: self.at(bpos) });
                    }
                    let Some(cur) = self.prev else {
                        return Err(SmilesError::BranchWithoutAtom { pos: self.at(pos) });
                    };
                    self.branch_stack.push((cur, pos));
                    self.pos += 1;
                }
                b')' => {
                    if let Some((_, bpos)) = self.pending {
                        return Err(SmilesError::DanglingBond { pos: self.at(bpos) });
                    }
                    let Some((attach, _)) = self.branch_stack.pop() else {
                        return Err(SmilesError::UnmatchedBranchClose { pos: self.at(pos) });
                    };
                    self.prev = Some(attach);
                    self.pos += 1;
                }
                b'-' | b'=' | b'#' | b':' | b'/' | b'\\' => {
                    if self.prev.is_none() {
                        return Err(SmilesError::DanglingBond { pos: self.at(pos) });
                    }
                    if self.pending.is_some() {
                        return Err(SmilesError::RepeatedBondSymbol { pos: self.at(pos) });
                    }
                    let order = match c {
                        b'=' => BondOrder::Double,
                        b'#' => BondOrder::Triple,
                        b':' => BondOrder::Aromatic,
                        // '-' and the stereo slashes all mean a single bond.
                        _ => BondOrder::Single,
                    };
                    self.pending = Some((order, pos));
                    self.pos += 1;
                }
                b'.' => {
                    if let Some((_, bpos)) = self.pending {
                        return Err(SmilesError::DanglingBond { pos: self.at(bpos) });
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                b'0'..=b'9' => {
                    self.handle_ring(u16::from(c - b'0'), pos)?;
                    self.pos += 1;
                }
                b'%' => {
                    let d1 = self.bytes.get(pos + 1).copied();
                    let d2 = self.bytes.get(pos + 2).copied();
                    match (d1, d2) {
                        (Some(a), Some(b)) if a.is_ascii_digit() && b.is_ascii_digit() => {
                            let label = u16::from(a - b'0') * 10 + u16::from(b - b'0');
                            self.handle_ring(label, pos)?;
                            self.pos += 3;
                        }
                        _ => return Err(SmilesError::InvalidRingLabel { pos: self.at(pos) }),
                    }
                }
                b'[' => self.parse_bracket()?,
                b'A'..=b'Z' | b'a'..=b'z' => self.parse_bare_atom()?,
                _ => return Err(self.unexpected(pos)),
            }
        }
        if let Some((_, bpos)) = self.pending {
            return Err(SmilesError::DanglingBond { pos: self.at(bpos) });
        }
        if let Some(&(_, bpos)) = self.branch_stack.first() {
            return Err(SmilesError::UnclosedBranch { pos: self.at(bpos) });
        }
        if !self.ring_open.is_empty() {
            // Report the earliest unmatched opening for determinism.
            let (label, open) = self
                .ring_open
                .iter()
                .min_by_key(|(_, o)| o.pos)
                .map(|(l, o)| (*l, o))
                .expect("non-empty map");
            return Err(SmilesError::UnmatchedRingClosure {
                label,
                pos: self.at(open.pos),
            });
        }
        if self.atoms.is_empty() {
            return Err(SmilesError::Empty);
        }
        self.finish()
    }

    fn finish(self) -> Result<Molecule, SmilesError> {
        let Parser {
            text,
            atoms,
            atom_pos,
            bracket,
            bonds,
            base,
            ..
        } = self;
        let mut mol = Molecule::new(atoms, bonds, text.to_string());
        for i in 0..mol.atom_count() {
            if bracket[i] {
                continue; // bracket atoms carry explicit hydrogens only
            }
            match mol.implicit_h_for(i) {
                Some(h) => mol.atoms_mut()[i].implicit_h = h,
                None => {
                    return Err(SmilesError::ValenceOverflow {
                        symbol: mol.atom(i).element.symbol().to_string(),
                        pos: base + atom_pos[i],
                        load: mol.valence_load(i),
                    })
                }
            }
        }
        Ok(mol)
    }

    /// Append an atom, bonding it to the previous attachment point.
    fn add_atom(&mut self, atom: Atom, pos: usize, from_bracket: bool) -> Result<(), SmilesError> {
        let idx = self.atoms.len();
        let aromatic = atom.aromatic;
        self.atoms.push(atom);
        self.atom_pos.push(pos);
        self.bracket.push(from_bracket);
        if let Some(prev) = self.prev {
            let order = match self.pending.take() {
                Some((o, _)) => o,
                None => self.default_order(prev, aromatic),
            };
            self.add_bond(prev, idx, order, pos)?;
        }
        self.prev = Some(idx);
        Ok(())
    }

    /// Unannotated bonds are aromatic between two aromatic atoms, single
    /// otherwise.
    fn default_order(&self, a: usize, b_aromatic: bool) -> BondOrder {
        if self.atoms[a].aromatic && b_aromatic {
            BondOrder::Aromatic
        } else {
            BondOrder::Single
        }
    }

    fn add_bond(
        &mut self,
        a: usize,
        b: usize,
        order: BondOrder,
        pos: usize,
    ) -> Result<(), SmilesError> {
        if self
            .bonds
            .iter()
            .any(|bd| (bd.a == a && bd.b == b) || (bd.a == b && bd.b == a))
        {
            return Err(SmilesError::DuplicateBond { pos: self.at(pos) });
        }
        self.bonds.push(Bond { a, b, order });
        Ok(())
    }

    fn handle_ring(&mut self, label: u16, pos: usize) -> Result<(), SmilesError> {
        let Some(current) = self.prev else {
            return Err(SmilesError::RingWithoutAtom { pos: self.at(pos) });
        };
        let pending = self.pending.take().map(|(o, _)| o);
        if let Some(open) = self.ring_open.remove(&label) {
            if open.atom == current {
                return Err(SmilesError::RingSelfBond { pos: self.at(pos) });
            }
            let order = match (open.order, pending) {
                (Some(a), Some(b)) if a != b => {
                    return Err(SmilesError::RingBondConflict {
                        label,
                        pos: self.at(pos),
                    })
                }
                (Some(a), _) => a,
                (None, Some(b)) => b,
                (None, None) => self.default_order(open.atom, self.atoms[current].aromatic),
            };
            self.add_bond(open.atom, current, order, pos)
        } else {
            self.ring_open.insert(
                label,
                RingOpen {
                    atom: current,
                    order: pending,
                    pos,
                },
            );
            Ok(())
        }
    }

    fn parse_bare_atom(&mut self) -> Result<(), SmilesError> {
        let pos = self.pos;
        let c = self.bytes[pos];
        let next = self.bytes.get(pos + 1).copied();
        // Two-letter organic-subset symbols first.
        let (symbol, aromatic, len) = match (c, next) {
            (b'C', Some(b'l')) => ("Cl", false, 2),
            (b'B', Some(b'r')) => ("Br", false, 2),
            (b'B', _) => ("B", false, 1),
            (b'C', _) => ("C", false, 1),
            (b'N', _) => ("N", false, 1),
            (b'O', _) => ("O", false, 1),
            (b'P', _) => ("P", false, 1),
            (b'S', _) => ("S", false, 1),
            (b'F', _) => ("F", false, 1),
            (b'I', _) => ("I", false, 1),
            (b'b', _) => ("B", true, 1),
            (b'c', _) => ("C", true, 1),
            (b'n', _) => ("N", true, 1),
            (b'o', _) => ("O", true, 1),
            (b'p', _) => ("P", true, 1),
            (b's', _) => ("S", true, 1),
            _ => {
                // Gather a plausible symbol (letter + optional lowercase) for
                // the error message.
                let mut sym = String::new();
                sym.push(c as char);
                if let Some(n) = next {
                    if n.is_ascii_lowercase() {
                        sym.push(n as char);
                    }
                }
                return Err(SmilesError::BareElementNotAllowed {
                    symbol: sym,
                    pos: self.at(pos),
                });
            }
        };
        let element = Element::from_symbol(symbol).expect("organic subset symbol");
        self.pos += len;
        self.add_atom(
            Atom {
                element,
                formal_charge: 0,
                explicit_h: 0,
                implicit_h: 0,
                aromatic,
                ring_member: false,
            },
            pos,
            false,
        )
    }

    fn parse_bracket(&mut self) -> Result<(), SmilesError> {
        let open_pos = self.pos;
        self.pos += 1;
        // Isotope: accepted and discarded (fragment invariants ignore mass).
        while self.peek().is_some_and(|b| b.is_ascii_digit()) {
            self.pos += 1;
        }
        let (element, aromatic) = self.parse_bracket_symbol(open_pos)?;
        // Chirality markers: accepted and ignored.
        while self.peek() == Some(b'@') {
            self.pos += 1;
        }
        let mut hcount = 0u8;
        if self.peek() == Some(b'H') {
            self.pos += 1;
            hcount = 1;
            let mut digits = 0u32;
            let mut saw_digit = false;
            while let Some(b) = self.peek() {
                if !b.is_ascii_digit() {
                    break;
                }
                saw_digit = true;
                digits = digits * 10 + u32::from(b - b'0');
                if digits > 99 {
                    return Err(self.unexpected(self.pos));
                }
                self.pos += 1;
            }
            if saw_digit {
                hcount = digits as u8;
            }
        }
        let mut charge = 0i32;
        if let Some(sign_byte @ (b'+' | b'-')) = self.peek() {
            let sign: i32 = if sign_byte == b'+' { 1 } else { -1 };
            let sign_pos = self.pos;
            self.pos += 1;
            let mut magnitude = 1i32;
            if self.peek().is_some_and(|b| b.is_ascii_digit()) {
                let mut value = 0i32;
                while let Some(b) = self.peek() {
                    if !b.is_ascii_digit() {
                        break;
                    }
                    value = value * 10 + i32::from(b - b'0');
                    if value > 15 {
                        return Err(SmilesError::InvalidCharge {
                            pos: self.at(sign_pos),
                        });
                    }
                    self.pos += 1;
                }
                magnitude = value;
            } else {
                // Repeated signs: "++" means +2, "--" means -2.
                while self.peek() == Some(sign_byte) {
                    magnitude += 1;
                    self.pos += 1;
                }
            }
            charge = sign * magnitude;
        }
        match self.peek() {
            Some(b']') => self.pos += 1,
            Some(_) => return Err(self.unexpected(self.pos)),
            None => {
                return Err(SmilesError::UnclosedBracket {
                    pos: self.at(open_pos),
                })
            }
        }
        self.add_atom(
            Atom {
                element,
                formal_charge: charge,
                explicit_h: hcount,
                implicit_h: 0,
                aromatic,
                ring_member: false,
            },
            open_pos,
            true,
        )
    }

    fn parse_bracket_symbol(&mut self, open_pos: usize) -> Result<(Element, bool), SmilesError> {
        let pos = self.pos;
        let Some(c) = self.peek() else {
            return Err(SmilesError::UnclosedBracket {
                pos: self.at(open_pos),
            });
        };
        if c.is_ascii_uppercase() {
            let next = self.bytes.get(pos + 1).copied();
            // Greedy two-letter match: [Co] is cobalt, not carbon + oxygen.
            if let Some(n) = next {
                if n.is_ascii_lowercase() {
                    let two = &self.text[pos..pos + 2];
                    if let Some(e) = Element::from_symbol(two) {
                        self.pos += 2;
                        return Ok((e, false));
                    }
                }
            }
            let one = &self.text[pos..=pos];
            if let Some(e) = Element::from_symbol(one) {
                self.pos += 1;
                return Ok((e, false));
            }
            let mut sym = one.to_string();
            if let Some(n) = next {
                if n.is_ascii_lowercase() {
                    sym.push(n as char);
                }
            }
            Err(SmilesError::UnknownElement {
                symbol: sym,
                pos: self.at(pos),
            })
        } else if c.is_ascii_lowercase() {
            // Aromatic bracket forms: the organic-subset ones plus se/as.
            let next = self.bytes.get(pos + 1).copied();
            if let Some(n) = next {
                let two = [c, n];
                if &two == b"se" || &two == b"as" {
                    let sym = if &two == b"se" { "Se" } else { "As" };
                    self.pos += 2;
                    return Ok((Element::from_symbol(sym).expect("table symbol"), true));
                }
            }
            let sym = match c {
                b'b' => "B",
                b'c' => "C",
                b'n' => "N",
                b'o' => "O",
                b'p' => "P",
                b's' => "S",
                _ => {
                    return Err(SmilesError::UnknownElement {
                        symbol: (c as char).to_string(),
                        pos: self.at(pos),
                    })
                }
            };
            self.pos += 1;
            Ok((Element::from_symbol(sym).expect("table symbol"), true))
        } else {
            Err(self.unexpected(pos))
        }
    }
}
