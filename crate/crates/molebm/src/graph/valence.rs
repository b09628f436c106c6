//! Valency checking, deterministic validity correction, and component
//! extraction.

use super::{AtomVocab, GraphError, MolecularGraph};

/// Outcome of a valency check: per-real-atom excess over the vocabulary cap.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ValidityReport {
    pub valid: bool,
    /// `(atom index, excess)` for every real atom, in index order. Excess is
    /// the total incident bond order minus the type's maximum valence; the
    /// atom is over-bonded iff its excess is positive.
    pub excess: Vec<(usize, i64)>,
}

impl ValidityReport {
    /// Excess values without atom indices, sorted; equal across isomorphic
    /// graphs.
    pub fn excess_multiset(&self) -> Vec<i64> {
        let mut v: Vec<i64> = self.excess.iter().map(|&(_, e)| e).collect();
        v.sort_unstable();
        v
    }
}

/// Sum incident bond orders per real atom and compare against the valence
/// cap for its type. Virtual atoms and virtual bonds contribute nothing.
///
/// The vocabulary must cover the graph's atom-type range.
pub fn check_valency(g: &MolecularGraph, vocab: &AtomVocab) -> ValidityReport {
    assert!(vocab.len() >= g.dims().b, "vocabulary smaller than graph atom-type range");
    let n = g.dims().n;
    let mut excess = Vec::new();
    let mut valid = true;
    for i in 0..n {
        if !g.is_real_atom(i) {
            continue;
        }
        let total: i64 = (0..n).map(|j| g.bond_order(i, j) as i64).sum();
        let e = total - vocab.valence(g.atom_type(i)) as i64;
        if e > 0 {
            valid = false;
        }
        excess.push((i, e));
    }
    ValidityReport { valid, excess }
}

/// Reduce bond orders until every atom satisfies its valence cap.
///
/// Repeatedly takes the atom with the largest positive excess (lowest index
/// on ties) and decrements its highest-order incident bond (lowest `(i, j)`
/// pair on ties) by one; a single bond becomes virtual. Atom types are never
/// touched and no bond order ever increases, so the procedure terminates and
/// is idempotent.
pub fn correct_validity(g: &MolecularGraph, vocab: &AtomVocab) -> MolecularGraph {
    assert!(vocab.len() >= g.dims().b, "vocabulary smaller than graph atom-type range");
    let n = g.dims().n;
    let atoms: Vec<u8> = (0..n).map(|i| g.atom_type(i) as u8).collect();
    let mut order = vec![0u32; n * n];
    for i in 0..n {
        for j in 0..n {
            order[i * n + j] = g.bond_order(i, j);
        }
    }
    let cap: Vec<i64> = (0..n)
        .map(|i| if g.is_real_atom(i) { vocab.valence(g.atom_type(i)) as i64 } else { 0 })
        .collect();

    loop {
        let mut worst: Option<(i64, usize)> = None;
        for i in 0..n {
            if !g.is_real_atom(i) {
                continue;
            }
            let total: i64 = (0..n).map(|j| order[i * n + j] as i64).sum();
            let e = total - cap[i];
            if e > 0 && worst.is_none_or(|(we, _)| e > we) {
                worst = Some((e, i));
            }
        }
        let Some((_, a)) = worst else { break };
        // Highest-order incident bond of `a`; ties by lowest normalized pair.
        let mut pick: Option<(u32, usize, usize)> = None;
        for j in 0..n {
            let o = order[a * n + j];
            if o == 0 {
                continue;
            }
            let (lo, hi) = if a < j { (a, j) } else { (j, a) };
            let better = match pick {
                None => true,
                Some((po, pi, pj)) => o > po || (o == po && (lo, hi) < (pi, pj)),
            };
            if better {
                pick = Some((o, lo, hi));
            }
        }
        let (o, i, j) = pick.expect("positive excess implies an incident real bond");
        order[i * n + j] = o - 1;
        order[j * n + i] = o - 1;
    }

    let virtual_bond = g.dims().virtual_bond() as u8;
    let mut edge_type = vec![virtual_bond; n * n];
    for i in 0..n {
        for j in 0..n {
            let o = order[i * n + j];
            if o > 0 {
                edge_type[i * n + j] = (o - 1) as u8;
            }
        }
    }
    MolecularGraph::from_types(g.dims(), atoms, edge_type)
}

/// Keep only the connected component (over real bonds) with the most real
/// atoms; ties go to the component containing the smallest node index.
/// Atoms outside the winner become virtual, their bonds with them.
pub fn largest_component(g: &MolecularGraph) -> Result<MolecularGraph, GraphError> {
    let n = g.dims().n;
    let mut component = vec![usize::MAX; n];
    let mut sizes: Vec<usize> = Vec::new();
    for start in 0..n {
        if !g.is_real_atom(start) || component[start] != usize::MAX {
            continue;
        }
        let id = sizes.len();
        let mut queue = vec![start];
        component[start] = id;
        let mut size = 0;
        while let Some(i) = queue.pop() {
            size += 1;
            for (j, slot) in component.iter_mut().enumerate() {
                if g.bond_order(i, j) > 0 && *slot == usize::MAX {
                    *slot = id;
                    queue.push(j);
                }
            }
        }
        sizes.push(size);
    }
    if sizes.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    // Component ids are assigned in order of their smallest member, so the
    // first maximal-size id is the tie-break winner.
    let winner = sizes
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(&a.0)))
        .map(|(id, _)| id)
        .unwrap();

    let virtual_atom = g.dims().virtual_atom() as u8;
    let node_type: Vec<u8> = (0..n)
        .map(|i| {
            if component[i] == winner {
                g.atom_type(i) as u8
            } else {
                virtual_atom
            }
        })
        .collect();
    let mut edge_type = vec![g.dims().virtual_bond() as u8; n * n];
    for i in 0..n {
        for j in 0..n {
            edge_type[i * n + j] = g.bond_channel(i, j) as u8;
        }
    }
    Ok(MolecularGraph::from_types(g.dims(), node_type, edge_type))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::Dims;

    fn dims(n: usize) -> Dims {
        Dims::new(n, 4, 3).unwrap()
    }

    #[test]
    fn lone_carbon_is_valid() {
        let g = MolecularGraph::encode(&[0], &[], dims(3)).unwrap();
        let r = check_valency(&g, &AtomVocab::qm9());
        assert!(r.valid);
        assert_eq!(r.excess, vec![(0, -4)]);
    }

    #[test]
    fn over_bonded_carbon_reports_excess() {
        // C0 with a triple to C1 and a double to O2: 5 > 4.
        let g = MolecularGraph::encode(&[0, 0, 2], &[(0, 1, 3), (0, 2, 2)], dims(3)).unwrap();
        let r = check_valency(&g, &AtomVocab::qm9());
        assert!(!r.valid);
        assert_eq!(r.excess[0], (0, 1));
        assert_eq!(r.excess[1], (1, -1));
        assert_eq!(r.excess[2], (2, 0));
    }

    #[test]
    fn oxygen_at_cap_is_valid() {
        // O1 with two single bonds sums to exactly its valence.
        let g = MolecularGraph::encode(&[0, 2, 0], &[(0, 1, 1), (1, 2, 1)], dims(3)).unwrap();
        let r = check_valency(&g, &AtomVocab::qm9());
        assert!(r.valid);
        assert_eq!(r.excess[1], (1, 0));
    }

    #[test]
    fn check_valency_permutation_invariant() {
        let g = MolecularGraph::encode(
            &[0, 1, 2, 0],
            &[(0, 1, 2), (1, 2, 1), (0, 3, 3)],
            dims(5),
        )
        .unwrap();
        let vocab = AtomVocab::qm9();
        let base = check_valency(&g, &vocab);
        let perm = vec![4, 2, 0, 3, 1];
        let p = g.permute(&perm).unwrap();
        let permuted = check_valency(&p, &vocab);
        assert_eq!(base.valid, permuted.valid);
        assert_eq!(base.excess_multiset(), permuted.excess_multiset());
    }

    #[test]
    fn correct_keeps_valid_graph() {
        let g = MolecularGraph::encode(&[0, 2], &[(0, 1, 2)], dims(3)).unwrap();
        assert_eq!(correct_validity(&g, &AtomVocab::qm9()), g);
    }

    #[test]
    fn correct_downgrades_double_bond() {
        // C0 at excess +1 whose highest-order bond is the double to O1:
        // that bond drops to single and everything is within cap.
        let g = MolecularGraph::encode(
            &[0, 2, 0, 0, 0],
            &[(0, 1, 2), (0, 2, 1), (0, 3, 1), (0, 4, 1)],
            dims(5),
        )
        .unwrap();
        let vocab = AtomVocab::qm9();
        let fixed = correct_validity(&g, &vocab);
        assert!(check_valency(&fixed, &vocab).valid);
        assert_eq!(fixed.bond_order(0, 1), 1);
        assert_eq!(fixed.bond_order(0, 2), 1);
        assert_eq!(fixed.bond_order(0, 3), 1);
        assert_eq!(fixed.bond_order(0, 4), 1);
    }

    #[test]
    fn correct_can_delete_bonds() {
        // Two fluorines (valence 1) pinned by a triple bond: the bond must
        // fall all the way to deletion before both are within cap... one
        // decrement at a time, ending at single (1 <= 1 for both).
        let g = MolecularGraph::encode(&[3, 3], &[(0, 1, 3)], dims(2)).unwrap();
        let vocab = AtomVocab::qm9();
        let fixed = correct_validity(&g, &vocab);
        assert!(check_valency(&fixed, &vocab).valid);
        assert_eq!(fixed.bond_order(0, 1), 1);

        // F with two single bonds: one is deleted entirely.
        let g2 = MolecularGraph::encode(&[3, 0, 0], &[(0, 1, 1), (0, 2, 1)], dims(3)).unwrap();
        let fixed2 = correct_validity(&g2, &vocab);
        assert!(check_valency(&fixed2, &vocab).valid);
        let kept: u32 = fixed2.bond_order(0, 1) + fixed2.bond_order(0, 2);
        assert_eq!(kept, 1);
        assert_eq!(fixed2.bond_order(0, 1), 0, "lowest pair is decremented first");
    }

    #[test]
    fn correct_is_idempotent_and_monotone() {
        let g = MolecularGraph::encode(
            &[0, 0, 2, 1, 3],
            &[(0, 1, 3), (0, 2, 2), (0, 3, 2), (1, 4, 1), (2, 3, 3)],
            dims(5),
        )
        .unwrap();
        let vocab = AtomVocab::qm9();
        let once = correct_validity(&g, &vocab);
        assert!(check_valency(&once, &vocab).valid);
        assert_eq!(correct_validity(&once, &vocab), once);
        for i in 0..5 {
            for j in 0..5 {
                assert!(once.bond_order(i, j) <= g.bond_order(i, j));
            }
        }
    }

    #[test]
    fn largest_component_keeps_bigger() {
        // Sizes 3 and 2: the 3-chain survives, the pair goes virtual.
        let g = MolecularGraph::encode(
            &[0, 0, 0, 2, 2],
            &[(0, 1, 1), (1, 2, 1), (3, 4, 1)],
            dims(6),
        )
        .unwrap();
        let kept = largest_component(&g).unwrap();
        assert_eq!(kept.real_atom_count(), 3);
        assert!(kept.is_real_atom(0) && kept.is_real_atom(1) && kept.is_real_atom(2));
        assert!(!kept.is_real_atom(3) && !kept.is_real_atom(4));
        assert_eq!(kept.bond_order(3, 4), 0);
    }

    #[test]
    fn largest_component_tie_takes_lowest_index() {
        let g = MolecularGraph::encode(&[0, 0, 1, 1], &[(0, 1, 1), (2, 3, 1)], dims(4)).unwrap();
        let kept = largest_component(&g).unwrap();
        assert!(kept.is_real_atom(0) && kept.is_real_atom(1));
        assert!(!kept.is_real_atom(2));
    }

    #[test]
    fn largest_component_connected_unchanged() {
        let g = MolecularGraph::encode(&[0, 1, 2], &[(0, 1, 1), (1, 2, 1)], dims(4)).unwrap();
        assert_eq!(largest_component(&g).unwrap(), g);
    }

    #[test]
    fn largest_component_empty_errors() {
        let g = MolecularGraph::encode(&[], &[], dims(3)).unwrap();
        assert!(matches!(largest_component(&g), Err(GraphError::EmptyGraph)));
    }
}
