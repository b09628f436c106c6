//! Circular substructure fingerprints and Tanimoto similarity.

use super::{GraphError, MolecularGraph};

/// Fixed-width bit vector of hashed circular environments.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Fingerprint {
    bits: Vec<u64>,
    nbits: usize,
}

impl Fingerprint {
    pub fn empty(nbits: usize) -> Self {
        assert!(nbits >= 1, "fingerprint width must be at least one bit");
        Fingerprint { bits: vec![0; nbits.div_ceil(64)], nbits }
    }

    pub fn nbits(&self) -> usize {
        self.nbits
    }

    pub fn set_bit(&mut self, i: usize) {
        assert!(i < self.nbits);
        self.bits[i / 64] |= 1u64 << (i % 64);
    }

    pub fn bit(&self, i: usize) -> bool {
        assert!(i < self.nbits);
        self.bits[i / 64] >> (i % 64) & 1 == 1
    }

    pub fn count_ones(&self) -> u32 {
        self.bits.iter().map(|w| w.count_ones()).sum()
    }
}

pub(crate) fn fnv1a(bytes: &[u8]) -> u64 {
    let mut h: u64 = 0xcbf2_9ce4_8422_2325;
    for &b in bytes {
        h ^= u64::from(b);
        h = h.wrapping_mul(0x0100_0000_01b3);
    }
    h
}

/// Hash every atom's circular environment out to `radius` bonds and set the
/// corresponding bits.
///
/// Round 0 hashes the atom type; round `r+1` hashes the atom's round-`r`
/// code together with its sorted `(bond order, neighbor code)` pairs.
/// Sorting makes the result independent of node numbering.
pub fn morgan_fingerprint(
    g: &MolecularGraph,
    radius: usize,
    nbits: usize,
) -> Result<Fingerprint, GraphError> {
    let atoms: Vec<usize> = g.real_atoms().collect();
    if atoms.is_empty() {
        return Err(GraphError::EmptyGraph);
    }
    let mut back = vec![usize::MAX; g.dims().n];
    for (r, &i) in atoms.iter().enumerate() {
        back[i] = r;
    }
    let adj: Vec<Vec<(usize, u32)>> = atoms
        .iter()
        .map(|&i| {
            atoms
                .iter()
                .filter_map(|&j| {
                    let o = g.bond_order(i, j);
                    (o > 0).then(|| (back[j], o))
                })
                .collect()
        })
        .collect();

    let mut fp = Fingerprint::empty(nbits);
    let mut codes: Vec<u64> = atoms
        .iter()
        .map(|&i| {
            let mut buf = vec![0x01u8];
            buf.extend((g.atom_type(i) as u64).to_le_bytes());
            fnv1a(&buf)
        })
        .collect();
    for code in &codes {
        fp.set_bit((code % nbits as u64) as usize);
    }
    for _ in 0..radius {
        let next: Vec<u64> = (0..atoms.len())
            .map(|v| {
                let mut pairs: Vec<(u32, u64)> =
                    adj[v].iter().map(|&(u, o)| (o, codes[u])).collect();
                pairs.sort_unstable();
                let mut buf = vec![0x02u8];
                buf.extend(codes[v].to_le_bytes());
                for (o, c) in pairs {
                    buf.push(o as u8);
                    buf.extend(c.to_le_bytes());
                }
                fnv1a(&buf)
            })
            .collect();
        for code in &next {
            fp.set_bit((code % nbits as u64) as usize);
        }
        codes = next;
    }
    Ok(fp)
}

/// Tanimoto similarity `|a AND b| / |a OR b|`; two empty fingerprints score
/// 1.0.
pub fn tanimoto(a: &Fingerprint, b: &Fingerprint) -> Result<f64, GraphError> {
    if a.nbits != b.nbits {
        return Err(GraphError::LengthMismatch { left: a.nbits, right: b.nbits });
    }
    let mut inter = 0u32;
    let mut union = 0u32;
    for (&wa, &wb) in a.bits.iter().zip(&b.bits) {
        inter += (wa & wb).count_ones();
        union += (wa | wb).count_ones();
    }
    if union == 0 {
        Ok(1.0)
    } else {
        Ok(f64::from(inter) / f64::from(union))
    }
}
