//! A deliberately small SMILES dialect: kekulized, hydrogen-suppressed
//! molecules over the bare atoms B C N O F P S Cl Br I, explicit bonds
//! `-` `=` `#` (single by default), branches in parentheses, and ring
//! closures `1`-`9` or `%nn`. No aromatic lowercase, brackets, charges,
//! stereo, isotopes, or dot-separated fragments; anything outside the
//! grammar fails with a byte position instead of being approximated.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use thiserror::Error;

use crate::graph::{canonical_labeling, AtomVocab, GraphError, MolecularGraph};
use crate::io::DatasetRecord;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum SmilesError {
    #[error("input is empty")]
    EmptyInput,
    /// Also raised for tokens that are recognizable but sit somewhere the
    /// grammar forbids (dangling bonds, self-rings, duplicate bonds).
    #[error("unsupported or misplaced token at byte {position}")]
    UnsupportedToken { position: usize },
    #[error("ring closure opened at byte {position} is never closed")]
    UnclosedRing { position: usize },
    #[error("unbalanced parenthesis at byte {position}")]
    UnbalancedParen { position: usize },
}

#[derive(Debug, Error)]
pub enum SmilesWriteError {
    #[error("molecule has no real atoms")]
    EmptyGraph,
    #[error("molecule is not connected")]
    Disconnected,
    #[error("molecule needs more than 99 simultaneously open ring closures")]
    RingOverflow,
    #[error(transparent)]
    Graph(#[from] GraphError),
}

/// Parse one SMILES-lite string into atoms and bonds. Positions in errors
/// are byte offsets into `text`.
pub fn parse_smiles_lite(text: &str) -> Result<DatasetRecord, SmilesError> {
    if text.trim().is_empty() {
        return Err(SmilesError::EmptyInput);
    }
    let bytes = text.as_bytes();
    let mut atoms: Vec<String> = Vec::new();
    let mut bonds: Vec<(usize, usize, u8)> = Vec::new();
    let mut bonded: BTreeSet<(usize, usize)> = BTreeSet::new();
    // Atom the next bond attaches to, explicit bond awaiting its right-hand
    // side, branch return points, and open ring closures by digit.
    let mut prev: Option<usize> = None;
    let mut pending: Option<(u8, usize)> = None;
    let mut stack: Vec<(usize, usize)> = Vec::new();
    let mut rings: BTreeMap<u32, (usize, Option<u8>, usize)> = BTreeMap::new();

    let mut add_bond = |i: usize, j: usize, order: u8, pos: usize| {
        let key = (i.min(j), i.max(j));
        if !bonded.insert(key) {
            return Err(SmilesError::UnsupportedToken { position: pos });
        }
        bonds.push((i, j, order));
        Ok(())
    };

    let mut i = 0usize;
    while i < bytes.len() {
        let pos = i;
        match bytes[i] {
            b'C' if bytes.get(i + 1) == Some(&b'l') => {
                i += 2;
                attach(&mut atoms, "Cl", &mut prev, &mut pending, &mut add_bond, pos)?;
            }
            b'B' if bytes.get(i + 1) == Some(&b'r') => {
                i += 2;
                attach(&mut atoms, "Br", &mut prev, &mut pending, &mut add_bond, pos)?;
            }
            b'B' | b'C' | b'N' | b'O' | b'F' | b'P' | b'S' | b'I' => {
                let sym = &text[i..i + 1];
                i += 1;
                attach(&mut atoms, sym, &mut prev, &mut pending, &mut add_bond, pos)?;
            }
            b'-' | b'=' | b'#' => {
                if prev.is_none() || pending.is_some() {
                    return Err(SmilesError::UnsupportedToken { position: pos });
                }
                let order = match bytes[i] {
                    b'-' => 1,
                    b'=' => 2,
                    _ => 3,
                };
                pending = Some((order, pos));
                i += 1;
            }
            b'(' => {
                let Some(p) = prev else {
                    return Err(SmilesError::UnsupportedToken { position: pos });
                };
                if pending.is_some() {
                    return Err(SmilesError::UnsupportedToken { position: pos });
                }
                stack.push((p, pos));
                i += 1;
            }
            b')' => {
                if let Some((_, bond_pos)) = pending {
                    return Err(SmilesError::UnsupportedToken { position: bond_pos });
                }
                let Some((p, _)) = stack.pop() else {
                    return Err(SmilesError::UnbalancedParen { position: pos });
                };
                prev = Some(p);
                i += 1;
            }
            b'1'..=b'9' => {
                let id = u32::from(bytes[i] - b'0');
                i += 1;
                ring(id, pos, &mut prev, &mut pending, &mut rings, &mut add_bond)?;
            }
            b'%' => {
                let (Some(&d1), Some(&d2)) = (bytes.get(i + 1), bytes.get(i + 2)) else {
                    return Err(SmilesError::UnsupportedToken { position: pos });
                };
                if !(d1.is_ascii_digit() && d2.is_ascii_digit()) {
                    return Err(SmilesError::UnsupportedToken { position: pos });
                }
                let id = u32::from(d1 - b'0') * 10 + u32::from(d2 - b'0');
                i += 3;
                ring(id, pos, &mut prev, &mut pending, &mut rings, &mut add_bond)?;
            }
            _ => return Err(SmilesError::UnsupportedToken { position: pos }),
        }
    }
    if let Some((_, pos)) = pending {
        return Err(SmilesError::UnsupportedToken { position: pos });
    }
    if let Some(&(_, pos)) = stack.first() {
        return Err(SmilesError::UnbalancedParen { position: pos });
    }
    if let Some(&pos) = rings.values().map(|(_, _, pos)| pos).min() {
        return Err(SmilesError::UnclosedRing { position: pos });
    }
    Ok(DatasetRecord { atoms, bonds, y_raw: None })
}

fn attach(
    atoms: &mut Vec<String>,
    symbol: &str,
    prev: &mut Option<usize>,
    pending: &mut Option<(u8, usize)>,
    add_bond: &mut impl FnMut(usize, usize, u8, usize) -> Result<(), SmilesError>,
    pos: usize,
) -> Result<(), SmilesError> {
    let idx = atoms.len();
    atoms.push(symbol.to_string());
    if let Some(p) = *prev {
        let order = pending.take().map(|(o, _)| o).unwrap_or(1);
        add_bond(p, idx, order, pos)?;
    }
    *prev = Some(idx);
    Ok(())
}

fn ring(
    id: u32,
    pos: usize,
    prev: &mut Option<usize>,
    pending: &mut Option<(u8, usize)>,
    rings: &mut BTreeMap<u32, (usize, Option<u8>, usize)>,
    add_bond: &mut impl FnMut(usize, usize, u8, usize) -> Result<(), SmilesError>,
) -> Result<(), SmilesError> {
    let Some(p) = *prev else {
        return Err(SmilesError::UnsupportedToken { position: pos });
    };
    match rings.remove(&id) {
        Some((other, opened_order, _)) => {
            if other == p {
                return Err(SmilesError::UnsupportedToken { position: pos });
            }
            let order = match (pending.take(), opened_order) {
                (Some((a, _)), Some(b)) if a != b => {
                    return Err(SmilesError::UnsupportedToken { position: pos });
                }
                (Some((a, _)), _) => a,
                (None, Some(b)) => b,
                (None, None) => 1,
            };
            add_bond(other, p, order, pos)
        }
        None => {
            rings.insert(id, (p, pending.take().map(|(o, _)| o), pos));
            Ok(())
        }
    }
}

/// Serialize a connected molecule, starting from the canonical first atom
/// and visiting neighbors in canonical-rank order, so the output depends
/// only on the isomorphism class.
pub fn write_smiles_lite(
    g: &MolecularGraph,
    vocab: &AtomVocab,
) -> Result<String, SmilesWriteError> {
    let labeling = match canonical_labeling(g, vocab) {
        Ok((_, labeling)) => labeling,
        Err(GraphError::EmptyGraph) => return Err(SmilesWriteError::EmptyGraph),
        Err(e) => return Err(e.into()),
    };
    let rank: HashMap<usize, usize> =
        labeling.iter().enumerate().map(|(r, &orig)| (orig, r)).collect();
    let mut w = Writer {
        g,
        vocab,
        rank,
        visited: vec![false; g.dims().n],
        children: HashMap::new(),
        rings: HashMap::new(),
        reached: 0,
    };
    let start = labeling[0];
    w.walk(start, usize::MAX);
    if w.reached != g.real_atom_count() {
        return Err(SmilesWriteError::Disconnected);
    }
    for list in w.rings.values_mut() {
        list.sort_by_key(|v| w.rank[v]);
    }
    let mut out = String::new();
    let mut free: BTreeSet<u32> = (1..=99).collect();
    let mut open: HashMap<(usize, usize), u32> = HashMap::new();
    w.emit(start, &mut out, &mut free, &mut open)?;
    Ok(out)
}

struct Writer<'a> {
    g: &'a MolecularGraph,
    vocab: &'a AtomVocab,
    rank: HashMap<usize, usize>,
    visited: Vec<bool>,
    children: HashMap<usize, Vec<usize>>,
    /// Ring-closure partners per atom (both endpoints of every back edge).
    rings: HashMap<usize, Vec<usize>>,
    reached: usize,
}

impl Writer<'_> {
    fn neighbors(&self, u: usize) -> Vec<usize> {
        let mut out: Vec<usize> = (0..self.g.dims().n)
            .filter(|&v| v != u && self.g.is_real_atom(v) && self.g.bond_order(u, v) > 0)
            .collect();
        out.sort_by_key(|v| self.rank[v]);
        out
    }

    /// Depth-first pass fixing tree children and back edges. Depth is at
    /// most the atom count, which the graph layout bounds.
    fn walk(&mut self, u: usize, parent: usize) {
        self.visited[u] = true;
        self.reached += 1;
        for v in self.neighbors(u) {
            if !self.visited[v] {
                self.children.entry(u).or_default().push(v);
                self.walk(v, u);
            } else if v != parent && self.rank[&v] < self.rank[&u] {
                // A back edge is sighted from both ends; record it only at
                // the sighting whose partner has the smaller canonical rank.
                self.rings.entry(u).or_default().push(v);
                self.rings.entry(v).or_default().push(u);
            }
        }
    }

    /// Print `u`, its ring-closure digits, then each child subtree; every
    /// child but the last sits in parentheses.
    fn emit(
        &self,
        u: usize,
        out: &mut String,
        free: &mut BTreeSet<u32>,
        open: &mut HashMap<(usize, usize), u32>,
    ) -> Result<(), SmilesWriteError> {
        out.push_str(self.vocab.symbol(self.g.atom_type(u)));
        for &v in self.rings.get(&u).map(Vec::as_slice).unwrap_or(&[]) {
            let key = (u.min(v), u.max(v));
            let digit = match open.remove(&key) {
                Some(d) => {
                    free.insert(d);
                    d
                }
                None => {
                    let d = *free.iter().next().ok_or(SmilesWriteError::RingOverflow)?;
                    free.remove(&d);
                    open.insert(key, d);
                    d
                }
            };
            out.push_str(bond_symbol(self.g.bond_order(u, v)));
            if digit < 10 {
                out.push((b'0' + digit as u8) as char);
            } else {
                out.push('%');
                out.push((b'0' + (digit / 10) as u8) as char);
                out.push((b'0' + (digit % 10) as u8) as char);
            }
        }
        let kids = self.children.get(&u).map(Vec::as_slice).unwrap_or(&[]);
        for (i, &c) in kids.iter().enumerate() {
            let last = i + 1 == kids.len();
            if !last {
                out.push('(');
            }
            out.push_str(bond_symbol(self.g.bond_order(u, c)));
            self.emit(c, out, free, open)?;
            if !last {
                out.push(')');
            }
        }
        Ok(())
    }
}

fn bond_symbol(order: u32) -> &'static str {
    match order {
        2 => "=",
        3 => "#",
        _ => "",
    }
}
