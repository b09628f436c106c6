//! Canonical graph labeling for duplicate and novelty detection.
//!
//! Color refinement seeded by atom type and incident bond orders, followed
//! by individualization with full backtracking over the first non-singleton
//! cell. Taking the minimum serialization over all leaves of the search tree
//! yields a complete isomorphism invariant; refinement keeps the tree tiny
//! at molecular sizes.

use std::collections::BTreeMap;

use super::{AtomVocab, GraphError, MolecularGraph};

/// Isomorphism-invariant identity of a molecule. Equal keys mean isomorphic
/// graphs over real atoms and bonds; padding never contributes.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
#[serde(transparent)]
pub struct CanonicalKey(String);

impl CanonicalKey {
    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn into_string(self) -> String {
        self.0
    }
}

impl std::fmt::Display for CanonicalKey {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(&self.0)
    }
}

impl From<String> for CanonicalKey {
    fn from(s: String) -> Self {
        CanonicalKey(s)
    }
}

/// Real-atom subgraph with compact indices.
struct Reduced {
    m: usize,
    /// Atom-type index per reduced vertex.
    types: Vec<usize>,
    /// Reduced index to original node index.
    orig: Vec<usize>,
    /// Adjacency as `(reduced neighbor, bond order)`.
    adj: Vec<Vec<(usize, u32)>>,
}

fn reduce(g: &MolecularGraph) -> Option<Reduced> {
    let orig: Vec<usize> = g.real_atoms().collect();
    if orig.is_empty() {
        return None;
    }
    let m = orig.len();
    let mut back = vec![usize::MAX; g.dims().n];
    for (r, &i) in orig.iter().enumerate() {
        back[i] = r;
    }
    let types = orig.iter().map(|&i| g.atom_type(i)).collect();
    let mut adj = vec![Vec::new(); m];
    for (r, &i) in orig.iter().enumerate() {
        for &j in &orig {
            let o = g.bond_order(i, j);
            if o > 0 {
                adj[r].push((back[j], o));
            }
        }
    }
    Some(Reduced { m, types, orig, adj })
}

/// Dense ranks (0..k) of the given per-vertex keys, assigned in sorted key
/// order. Invariant under vertex relabeling because only key values matter.
fn densify(keys: &[Vec<u64>]) -> Vec<u32> {
    let mut rank: BTreeMap<&[u64], u32> = BTreeMap::new();
    for k in keys {
        rank.entry(k.as_slice()).or_insert(0);
    }
    for (next, v) in rank.values_mut().enumerate() {
        *v = next as u32;
    }
    keys.iter().map(|k| rank[k.as_slice()]).collect()
}

/// Refine colors to stability. The per-vertex key is the current color
/// followed by the sorted `(bond order, neighbor color)` pairs, so cells can
/// only split and stable means unchanged.
fn refine(r: &Reduced, mut colors: Vec<u32>) -> Vec<u32> {
    loop {
        let keys: Vec<Vec<u64>> = (0..r.m)
            .map(|v| {
                let mut k = Vec::with_capacity(1 + r.adj[v].len());
                k.push(colors[v] as u64);
                let mut pairs: Vec<u64> = r.adj[v]
                    .iter()
                    .map(|&(u, o)| ((o as u64) << 32) | colors[u] as u64)
                    .collect();
                pairs.sort_unstable();
                k.extend(pairs);
                k
            })
            .collect();
        let next = densify(&keys);
        if next == colors {
            return colors;
        }
        colors = next;
    }
}

/// Split vertex `v` out of its cell, ordered before its old cellmates.
fn individualize(colors: &[u32], v: usize) -> Vec<u32> {
    let keys: Vec<Vec<u64>> = colors
        .iter()
        .enumerate()
        .map(|(u, &c)| vec![if u == v { 2 * c as u64 } else { 2 * c as u64 + 1 }])
        .collect();
    densify(&keys)
}

/// Serialize under a discrete coloring: symbols in rank order, then sorted
/// `rank-rank:order` bond triples.
fn serialize(r: &Reduced, colors: &[u32], vocab: &AtomVocab) -> String {
    let mut at_rank = vec![0usize; r.m];
    for (v, &c) in colors.iter().enumerate() {
        at_rank[c as usize] = v;
    }
    let atoms: Vec<&str> = at_rank.iter().map(|&v| vocab.symbol(r.types[v])).collect();
    let mut bonds: Vec<(u32, u32, u32)> = Vec::new();
    for v in 0..r.m {
        for &(u, o) in &r.adj[v] {
            if v < u {
                let (a, b) = (colors[v].min(colors[u]), colors[v].max(colors[u]));
                bonds.push((a, b, o));
            }
        }
    }
    bonds.sort_unstable();
    let bond_strs: Vec<String> =
        bonds.iter().map(|&(a, b, o)| format!("{a}-{b}:{o}")).collect();
    format!("{}|{}", atoms.join(","), bond_strs.join(";"))
}

fn search(
    r: &Reduced,
    colors: Vec<u32>,
    vocab: &AtomVocab,
    best: &mut Option<(String, Vec<u32>)>,
) {
    let colors = refine(r, colors);
    let distinct = colors.iter().max().map_or(0, |&c| c as usize + 1);
    if distinct == r.m {
        let s = serialize(r, &colors, vocab);
        let better = best.as_ref().is_none_or(|(bs, _)| s < *bs);
        if better {
            *best = Some((s, colors));
        }
        return;
    }
    // First non-singleton cell by color id; invariant because colors are
    // dense ranks of invariant keys.
    let mut counts = vec![0usize; distinct];
    for &c in &colors {
        counts[c as usize] += 1;
    }
    let target = counts.iter().position(|&c| c > 1).unwrap() as u32;
    for v in 0..r.m {
        if colors[v] == target {
            search(r, individualize(&colors, v), vocab, best);
        }
    }
}

/// Canonical key plus the labeling that realizes it: `labeling[rank]` is the
/// original node index placed at that rank.
pub fn canonical_labeling(
    g: &MolecularGraph,
    vocab: &AtomVocab,
) -> Result<(CanonicalKey, Vec<usize>), GraphError> {
    assert!(vocab.len() >= g.dims().b, "vocabulary smaller than graph atom-type range");
    let r = reduce(g).ok_or(GraphError::EmptyGraph)?;
    let seed_keys: Vec<Vec<u64>> = (0..r.m)
        .map(|v| {
            let mut k = vec![r.types[v] as u64];
            let mut orders: Vec<u64> = r.adj[v].iter().map(|&(_, o)| o as u64).collect();
            orders.sort_unstable();
            k.extend(orders);
            k
        })
        .collect();
    let mut best = None;
    search(&r, densify(&seed_keys), vocab, &mut best);
    let (key, colors) = best.expect("search visits at least one leaf");
    let mut labeling = vec![0usize; r.m];
    for (v, &c) in colors.iter().enumerate() {
        labeling[c as usize] = r.orig[v];
    }
    Ok((CanonicalKey(key), labeling))
}

/// Isomorphism-invariant key of a molecule.
pub fn canonical_key(g: &MolecularGraph, vocab: &AtomVocab) -> Result<CanonicalKey, GraphError> {
    canonical_labeling(g, vocab).map(|(key, _)| key)
}
