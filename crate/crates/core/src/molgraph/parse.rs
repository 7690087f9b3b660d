use std::collections::BTreeMap;

use super::rings::ring_bond_flags;
use super::{
    validate, Atom, Bond, BondOrder, BondStereo, Element, MolGraph, SmilesError, ValidityRule,
};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq)]
pub struct ParseOptions {
    /// Keep the largest dot-separated fragment instead of failing.
    pub keep_largest_fragment: bool,
}

/// Parse a SMILES string into a validated, connected molecular graph.
pub fn parse_smiles(text: &str) -> Result<MolGraph, SmilesError> {
    parse_smiles_with(text, ParseOptions::default())
}

pub fn parse_smiles_with(text: &str, opts: ParseOptions) -> Result<MolGraph, SmilesError> {
    let text = text.trim();
    if text.is_empty() {
        return Err(SmilesError::Syntax {
            pos: 0,
            msg: "empty input".into(),
        });
    }
    let mut p = Parser::new(text);
    p.run()?;
    let Parser { atoms, bonds, .. } = p;
    let mut mol = MolGraph::new(atoms, bonds).map_err(|e| SmilesError::Ring { msg: e.to_string() })?;

    let comps = mol.components();
    if comps.len() > 1 {
        if !opts.keep_largest_fragment {
            return Err(SmilesError::Fragment { count: comps.len() });
        }
        let largest = comps
            .iter()
            .enumerate()
            .max_by(|(i, a), (j, b)| a.len().cmp(&b.len()).then(j.cmp(i)))
            .map(|(_, c)| c.clone())
            .expect("at least one component");
        mol = mol.induced(&largest);
    }

    // Implicit aromatic bonds that ended up outside rings are plain single bonds.
    let ring = ring_bond_flags(&mol);
    let demote: Vec<usize> = mol
        .bonds()
        .iter()
        .enumerate()
        .filter(|(i, b)| b.order == BondOrder::Aromatic && !ring[*i])
        .map(|(i, _)| i)
        .collect();
    for bi in demote {
        mol = mol.with_bond_order(bi, BondOrder::Single);
    }

    let report = validate(&mol);
    if let Some(v) = report.violations.first() {
        let atom = v.atom.unwrap_or(0);
        let msg = match v.rule {
            ValidityRule::Valence | ValidityRule::ChargeState => v.message.clone(),
            _ => format!("{}: {}", v.rule, v.message),
        };
        return Err(SmilesError::Valence { atom, msg, report });
    }
    Ok(mol)
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum BondSym {
    Single,
    Double,
    Triple,
    Aromatic,
    Up,
    Down,
}

impl BondSym {
    fn to_bond(self, a: usize, b: usize) -> Bond {
        let (order, stereo) = match self {
            BondSym::Single => (BondOrder::Single, None),
            BondSym::Double => (BondOrder::Double, None),
            BondSym::Triple => (BondOrder::Triple, None),
            BondSym::Aromatic => (BondOrder::Aromatic, None),
            BondSym::Up => (BondOrder::Single, Some(BondStereo::Up)),
            BondSym::Down => (BondOrder::Single, Some(BondStereo::Down)),
        };
        Bond { a, b, order, stereo }
    }
}

struct Parser {
    chars: Vec<char>,
    pos: usize,
    atoms: Vec<Atom>,
    bonds: Vec<Bond>,
    prev: Option<usize>,
    pending: Option<(BondSym, usize)>,
    branches: Vec<usize>,
    rings: BTreeMap<u32, (usize, Option<BondSym>, usize)>,
}

impl Parser {
    fn new(src: &str) -> Self {
        Parser {
            chars: src.chars().collect(),
            pos: 0,
            atoms: Vec::new(),
            bonds: Vec::new(),
            prev: None,
            pending: None,
            branches: Vec::new(),
            rings: BTreeMap::new(),
        }
    }

    fn err<T>(&self, msg: impl Into<String>) -> Result<T, SmilesError> {
        Err(SmilesError::Syntax {
            pos: self.pos,
            msg: msg.into(),
        })
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn run(&mut self) -> Result<(), SmilesError> {
        while let Some(c) = self.peek() {
            match c {
                '(' => {
                    let Some(prev) = self.prev else {
                        return self.err("branch without a preceding atom");
                    };
                    if self.pending.is_some() {
                        return self.err("bond symbol before '('");
                    }
                    self.branches.push(prev);
                    self.pos += 1;
                }
                ')' => {
                    if self.pending.is_some() {
                        return self.err("bond symbol before ')'");
                    }
                    let Some(top) = self.branches.pop() else {
                        return self.err("unbalanced ')'");
                    };
                    if self.chars.get(self.pos.wrapping_sub(1)) == Some(&'(') {
                        return self.err("empty branch");
                    }
                    self.prev = Some(top);
                    self.pos += 1;
                }
                '-' | '=' | '#' | ':' | '/' | '\\' => {
                    if self.pending.is_some() {
                        return self.err("two consecutive bond symbols");
                    }
                    if self.prev.is_none() {
                        return self.err("bond symbol without a preceding atom");
                    }
                    let sym = match c {
                        '-' => BondSym::Single,
                        '=' => BondSym::Double,
                        '#' => BondSym::Triple,
                        ':' => BondSym::Aromatic,
                        '/' => BondSym::Up,
                        _ => BondSym::Down,
                    };
                    self.pending = Some((sym, self.pos));
                    self.pos += 1;
                }
                '.' => {
                    if self.pending.is_some() || self.prev.is_none() {
                        return self.err("misplaced '.'");
                    }
                    if !self.branches.is_empty() {
                        return self.err("'.' inside a branch");
                    }
                    self.prev = None;
                    self.pos += 1;
                }
                '0'..='9' | '%' => self.ring_closure()?,
                '[' => {
                    let atom = self.bracket_atom()?;
                    self.add_atom(atom)?;
                }
                _ => {
                    let atom = self.organic_atom()?;
                    self.add_atom(atom)?;
                }
            }
        }
        if let Some((_, pos)) = self.pending {
            return Err(SmilesError::Syntax {
                pos,
                msg: "dangling bond symbol".into(),
            });
        }
        if !self.branches.is_empty() {
            return self.err("unbalanced '('");
        }
        if let Some((label, (atom, _, _))) = self.rings.iter().next() {
            return Err(SmilesError::Ring {
                msg: format!("ring bond {label} opened at atom {atom} is never closed"),
            });
        }
        if self.atoms.is_empty() {
            return self.err("no atoms");
        }
        Ok(())
    }

    fn implicit_bond(&self, a: usize, b: usize) -> BondSym {
        if self.atoms[a].aromatic && self.atoms[b].aromatic {
            BondSym::Aromatic
        } else {
            BondSym::Single
        }
    }

    fn add_atom(&mut self, atom: Atom) -> Result<(), SmilesError> {
        let idx = self.atoms.len();
        self.atoms.push(atom);
        if let Some(prev) = self.prev {
            let sym = match self.pending.take() {
                Some((s, _)) => s,
                None => self.implicit_bond(prev, idx),
            };
            self.bonds.push(sym.to_bond(prev, idx));
        }
        self.prev = Some(idx);
        Ok(())
    }

    fn ring_closure(&mut self) -> Result<(), SmilesError> {
        let start = self.pos;
        let Some(prev) = self.prev else {
            return self.err("ring closure without a preceding atom");
        };
        let label = if self.peek() == Some('%') {
            self.pos += 1;
            let d: String = self.chars[self.pos..].iter().take(2).collect();
            if d.len() != 2 || !d.chars().all(|c| c.is_ascii_digit()) {
                return self.err("'%' must be followed by two digits");
            }
            self.pos += 2;
            d.parse::<u32>().expect("two digits")
        } else {
            let d = self.peek().and_then(|c| c.to_digit(10)).expect("digit");
            self.pos += 1;
            d
        };
        let sym = self.pending.take().map(|(s, _)| s);
        match self.rings.remove(&label) {
            None => {
                self.rings.insert(label, (prev, sym, start));
            }
            Some((other, open_sym, _)) => {
                if other == prev {
                    return Err(SmilesError::Ring {
                        msg: format!("ring bond {label} closes on its own atom {prev}"),
                    });
                }
                if self.bonds.iter().any(|b| {
                    (b.a == other && b.b == prev) || (b.a == prev && b.b == other)
                }) {
                    return Err(SmilesError::Ring {
                        msg: format!("ring bond {label} duplicates bond {other}-{prev}"),
                    });
                }
                let sym = match (open_sym, sym) {
                    (Some(a), Some(b)) if a != b => {
                        let compatible = matches!(
                            (a, b),
                            (BondSym::Up | BondSym::Down, BondSym::Up | BondSym::Down)
                        );
                        if !compatible {
                            return Err(SmilesError::Ring {
                                msg: format!("ring bond {label} has conflicting bond symbols"),
                            });
                        }
                        a
                    }
                    (Some(a), _) => a,
                    (None, Some(b)) => b,
                    (None, None) => self.implicit_bond(other, prev),
                };
                self.bonds.push(sym.to_bond(other, prev));
            }
        }
        Ok(())
    }

    fn organic_atom(&mut self) -> Result<Atom, SmilesError> {
        let c = self.peek().expect("caller checked");
        let next = self.chars.get(self.pos + 1).copied();
        let (sym, len, aromatic) = match (c, next) {
            ('C', Some('l')) => ("Cl", 2, false),
            ('B', Some('r')) => ("Br", 2, false),
            ('B', _) => ("B", 1, false),
            ('C', _) => ("C", 1, false),
            ('N', _) => ("N", 1, false),
            ('O', _) => ("O", 1, false),
            ('P', _) => ("P", 1, false),
            ('S', _) => ("S", 1, false),
            ('F', _) => ("F", 1, false),
            ('I', _) => ("I", 1, false),
            ('b', _) => ("B", 1, true),
            ('c', _) => ("C", 1, true),
            ('n', _) => ("N", 1, true),
            ('o', _) => ("O", 1, true),
            ('p', _) => ("P", 1, true),
            ('s', _) => ("S", 1, true),
            ('*', _) => return self.err("wildcard atoms are not supported"),
            ('$', _) => return self.err("quadruple bonds are not supported"),
            _ => return self.err(format!("unexpected character {c:?}")),
        };
        let element = Element::from_symbol(sym).expect("organic subset symbol");
        self.pos += len;
        Ok(Atom {
            aromatic,
            ..Atom::new(element)
        })
    }

    fn bracket_atom(&mut self) -> Result<Atom, SmilesError> {
        let open = self.pos;
        self.pos += 1;
        if self.peek().is_some_and(|c| c.is_ascii_digit()) {
            return self.err("isotopes are not supported");
        }
        // Element symbol: aromatic lowercase or capital with optional lowercase.
        let c = match self.peek() {
            Some(c) => c,
            None => return self.err("unterminated bracket atom"),
        };
        let (element, aromatic) = if c.is_ascii_lowercase() {
            let el = match c {
                'b' => Element::B,
                'c' => Element::C,
                'n' => Element::N,
                'o' => Element::O,
                'p' => Element::P,
                's' => Element::S,
                _ => return self.err(format!("unsupported aromatic symbol {c:?}")),
            };
            self.pos += 1;
            (el, true)
        } else if c.is_ascii_uppercase() {
            let two: String = self.chars[self.pos..].iter().take(2).collect();
            let (sym, len) = match Element::from_symbol(&two) {
                Some(_) if two.len() == 2 => (two.clone(), 2),
                _ => (c.to_string(), 1),
            };
            match Element::from_symbol(&sym) {
                Some(el) => {
                    // A lowercase letter after a one-letter symbol is an unsupported element.
                    if len == 1
                        && self
                            .chars
                            .get(self.pos + 1)
                            .is_some_and(|n| n.is_ascii_lowercase())
                    {
                        return self.err(format!(
                            "unsupported element {}{}",
                            c,
                            self.chars[self.pos + 1]
                        ));
                    }
                    self.pos += len;
                    (el, false)
                }
                None => return self.err(format!("unsupported element starting with {c:?}")),
            }
        } else {
            return self.err(format!("expected element symbol, found {c:?}"));
        };

        let mut stereo = None;
        if self.peek() == Some('@') {
            let start = self.pos;
            while self
                .peek()
                .is_some_and(|c| c == '@' || c.is_ascii_uppercase() && c != 'H' || c.is_ascii_digit())
            {
                self.pos += 1;
            }
            stereo = Some(self.chars[start..self.pos].iter().collect::<String>());
        }

        let mut hcount = 0u8;
        if self.peek() == Some('H') {
            self.pos += 1;
            hcount = 1;
            if let Some(d) = self.peek().and_then(|c| c.to_digit(10)) {
                hcount = d as u8;
                self.pos += 1;
            }
        }

        let mut charge: i32 = 0;
        if let Some(sign @ ('+' | '-')) = self.peek() {
            let unit = if sign == '+' { 1 } else { -1 };
            self.pos += 1;
            if let Some(d) = self.peek().and_then(|c| c.to_digit(10)) {
                charge = unit * d as i32;
                self.pos += 1;
            } else {
                charge = unit;
                while self.peek() == Some(sign) {
                    charge += unit;
                    self.pos += 1;
                }
            }
        }
        if !(-8..=8).contains(&charge) {
            return self.err("charge out of range");
        }

        if self.peek() == Some(':') {
            // Atom class: parsed and dropped.
            self.pos += 1;
            let start = self.pos;
            while self.peek().is_some_and(|c| c.is_ascii_digit()) {
                self.pos += 1;
            }
            if start == self.pos {
                return self.err("atom class needs digits");
            }
        }
        if self.peek() != Some(']') {
            self.pos = self.pos.max(open);
            return self.err("expected ']'");
        }
        self.pos += 1;
        Ok(Atom {
            element,
            formal_charge: charge as i8,
            explicit_h: Some(hcount),
            aromatic,
            stereo_tag: stereo,
        })
    }
}
