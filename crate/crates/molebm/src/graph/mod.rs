//! Molecular graph representations.
//!
//! A molecule is held in a fixed-size layout: `n` node slots where unused
//! slots carry a virtual atom type, and an `n x n` edge field where
//! non-bonded pairs carry a virtual bond type. Bond channels are ordered
//! single, double, triple, with the virtual channel last; diagonal entries
//! always carry the virtual channel.

mod canon;
mod fingerprint;
mod valence;

pub use canon::{canonical_key, canonical_labeling, CanonicalKey};
pub(crate) use fingerprint::fnv1a;
pub use fingerprint::{morgan_fingerprint, tanimoto, Fingerprint};
pub use valence::{check_valency, correct_validity, largest_component, ValidityReport};

use ndarray::{Array2, Array3};
use thiserror::Error;

/// Symbol used for the padding atom type.
pub const VIRTUAL_SYMBOL: &str = "⋆";

/// Default fingerprint radius (ECFP4-like).
pub const DEFAULT_FP_RADIUS: usize = 2;
/// Default fingerprint width in bits.
pub const DEFAULT_FP_BITS: usize = 2048;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("dims must satisfy n >= 1, b >= 1, c >= 1")]
    InvalidDims,
    #[error("invalid vocabulary: {0}")]
    InvalidVocab(String),
    #[error("atom type index {index} out of vocabulary (b = {b})")]
    IndexOutOfVocab { index: usize, b: usize },
    #[error("molecule has {count} atoms but the layout allows at most {n}")]
    TooManyAtoms { count: usize, n: usize },
    #[error("duplicate bond between atoms {i} and {j}")]
    DuplicateBond { i: usize, j: usize },
    #[error("invalid bond ({i}, {j}) with order {order}")]
    InvalidBond { i: usize, j: usize, order: u8 },
    #[error("permutation is not a bijection on 0..{n}")]
    InvalidPermutation { n: usize },
    #[error("graph has no real atoms")]
    EmptyGraph,
    #[error("fingerprint lengths differ: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },
}

/// Tensor layout sizes for a dataset: `n` node slots, `b` real atom types,
/// `c` real bond types. One-hot tensors are `n x (b+1)` and `n x n x (c+1)`;
/// the extra channel is the virtual type.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, serde::Serialize, serde::Deserialize)]
pub struct Dims {
    pub n: usize,
    pub b: usize,
    pub c: usize,
}

impl Dims {
    pub fn new(n: usize, b: usize, c: usize) -> Result<Self, GraphError> {
        if n < 1 || b < 1 || c < 1 {
            return Err(GraphError::InvalidDims);
        }
        Ok(Dims { n, b, c })
    }

    /// Number of node channels, `b + 1`.
    pub fn node_channels(&self) -> usize {
        self.b + 1
    }

    /// Number of bond channels, `c + 1`.
    pub fn bond_channels(&self) -> usize {
        self.c + 1
    }

    /// Channel index of the virtual atom type.
    pub fn virtual_atom(&self) -> usize {
        self.b
    }

    /// Channel index of the virtual bond type.
    pub fn virtual_bond(&self) -> usize {
        self.c
    }
}

/// Ordered atom-type vocabulary with per-type maximum valences. The virtual
/// type is implicit at index `len()` and is not stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AtomVocab {
    symbols: Vec<String>,
    valences: Vec<u32>,
}

impl AtomVocab {
    pub fn new(entries: &[(&str, u32)]) -> Result<Self, GraphError> {
        if entries.is_empty() {
            return Err(GraphError::InvalidVocab("no atom types".into()));
        }
        let mut symbols = Vec::with_capacity(entries.len());
        let mut valences = Vec::with_capacity(entries.len());
        for &(sym, val) in entries {
            if sym.is_empty() || sym == VIRTUAL_SYMBOL {
                return Err(GraphError::InvalidVocab(format!("bad symbol {sym:?}")));
            }
            if symbols.iter().any(|s| s == sym) {
                return Err(GraphError::InvalidVocab(format!("duplicate symbol {sym}")));
            }
            if val < 1 {
                return Err(GraphError::InvalidVocab(format!("valence of {sym} must be >= 1")));
            }
            symbols.push(sym.to_string());
            valences.push(val);
        }
        Ok(AtomVocab { symbols, valences })
    }

    /// Maximum total bond order under kekulized, charge-free chemistry.
    pub fn default_valence(symbol: &str) -> Option<u32> {
        match symbol {
            "C" => Some(4),
            "N" => Some(3),
            "O" => Some(2),
            "F" => Some(1),
            "P" => Some(5),
            "S" => Some(6),
            "Cl" => Some(1),
            "Br" => Some(1),
            "I" => Some(1),
            "B" => Some(3),
            _ => None,
        }
    }

    /// QM9 preset: C, N, O, F.
    pub fn qm9() -> Self {
        AtomVocab::new(&[("C", 4), ("N", 3), ("O", 2), ("F", 1)]).unwrap()
    }

    /// ZINC preset: nine heavy-atom types.
    pub fn zinc() -> Self {
        AtomVocab::new(&[
            ("C", 4),
            ("N", 3),
            ("O", 2),
            ("F", 1),
            ("P", 5),
            ("S", 6),
            ("Cl", 1),
            ("Br", 1),
            ("I", 1),
        ])
        .unwrap()
    }

    /// Number of real atom types, `b`.
    pub fn len(&self) -> usize {
        self.symbols.len()
    }

    pub fn is_empty(&self) -> bool {
        self.symbols.is_empty()
    }

    /// Symbol for a type index; the index just past the real types maps to
    /// the virtual symbol.
    pub fn symbol(&self, index: usize) -> &str {
        if index == self.symbols.len() {
            VIRTUAL_SYMBOL
        } else {
            &self.symbols[index]
        }
    }

    pub fn valence(&self, index: usize) -> u32 {
        self.valences[index]
    }

    pub fn index_of(&self, symbol: &str) -> Option<usize> {
        self.symbols.iter().position(|s| s == symbol)
    }

    pub fn symbols(&self) -> impl Iterator<Item = &str> {
        self.symbols.iter().map(String::as_str)
    }

    pub fn entries(&self) -> impl Iterator<Item = (&str, u32)> {
        self.symbols.iter().map(String::as_str).zip(self.valences.iter().copied())
    }
}

/// A discrete molecular graph in the fixed-size one-hot layout.
///
/// Stored compactly as per-node type indices and a symmetric per-pair bond
/// channel matrix; [`MolecularGraph::one_hot`] expands to the dense tensors.
/// Construction enforces: every node slot has exactly one type, every pair
/// exactly one bond channel, the edge field is symmetric, diagonal entries
/// are virtual, and virtual nodes have only virtual incident edges.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MolecularGraph {
    dims: Dims,
    node_type: Vec<u8>,
    edge_type: Vec<u8>,
}

impl MolecularGraph {
    /// Build the padded one-hot graph from real atoms and bonds.
    ///
    /// `atoms[i]` is an atom-type index below `dims.b`; bonds are
    /// `(i, j, order)` with `i < j` over atom positions and order in
    /// `1..=dims.c`. Unlisted pairs and all padding slots come out virtual.
    pub fn encode(
        atoms: &[usize],
        bonds: &[(usize, usize, u8)],
        dims: Dims,
    ) -> Result<Self, GraphError> {
        if atoms.len() > dims.n {
            return Err(GraphError::TooManyAtoms { count: atoms.len(), n: dims.n });
        }
        let mut node_type = vec![dims.virtual_atom() as u8; dims.n];
        for (slot, &t) in node_type.iter_mut().zip(atoms) {
            if t >= dims.b {
                return Err(GraphError::IndexOutOfVocab { index: t, b: dims.b });
            }
            *slot = t as u8;
        }
        let mut edge_type = vec![dims.virtual_bond() as u8; dims.n * dims.n];
        for &(i, j, order) in bonds {
            if i >= j || j >= atoms.len() || order == 0 || order as usize > dims.c {
                return Err(GraphError::InvalidBond { i, j, order });
            }
            let channel = order - 1;
            if edge_type[i * dims.n + j] != dims.virtual_bond() as u8 {
                return Err(GraphError::DuplicateBond { i, j });
            }
            edge_type[i * dims.n + j] = channel;
            edge_type[j * dims.n + i] = channel;
        }
        Ok(MolecularGraph { dims, node_type, edge_type })
    }

    /// Assemble from raw type fields, forcing the structural invariants:
    /// diagonal and virtual-node edges are overwritten with the virtual
    /// channel. Callers provide a symmetric `edge_type`.
    pub(crate) fn from_types(dims: Dims, node_type: Vec<u8>, mut edge_type: Vec<u8>) -> Self {
        debug_assert_eq!(node_type.len(), dims.n);
        debug_assert_eq!(edge_type.len(), dims.n * dims.n);
        let virtual_bond = dims.virtual_bond() as u8;
        for i in 0..dims.n {
            edge_type[i * dims.n + i] = virtual_bond;
            if node_type[i] == dims.virtual_atom() as u8 {
                for j in 0..dims.n {
                    edge_type[i * dims.n + j] = virtual_bond;
                    edge_type[j * dims.n + i] = virtual_bond;
                }
            }
        }
        for i in 0..dims.n {
            for j in (i + 1)..dims.n {
                debug_assert_eq!(edge_type[i * dims.n + j], edge_type[j * dims.n + i]);
            }
        }
        MolecularGraph { dims, node_type, edge_type }
    }

    pub fn dims(&self) -> Dims {
        self.dims
    }

    /// Type index of node `i`; equals `dims.virtual_atom()` for padding.
    pub fn atom_type(&self, i: usize) -> usize {
        self.node_type[i] as usize
    }

    /// Bond channel between nodes `i` and `j`.
    pub fn bond_channel(&self, i: usize, j: usize) -> usize {
        self.edge_type[i * self.dims.n + j] as usize
    }

    /// Numeric bond order between `i` and `j`; virtual or absent bonds are 0.
    pub fn bond_order(&self, i: usize, j: usize) -> u32 {
        let ch = self.bond_channel(i, j);
        if ch == self.dims.virtual_bond() {
            0
        } else {
            ch as u32 + 1
        }
    }

    pub fn is_real_atom(&self, i: usize) -> bool {
        (self.node_type[i] as usize) < self.dims.b
    }

    pub fn real_atom_count(&self) -> usize {
        (0..self.dims.n).filter(|&i| self.is_real_atom(i)).count()
    }

    pub fn real_atoms(&self) -> impl Iterator<Item = usize> + '_ {
        (0..self.dims.n).filter(|&i| self.is_real_atom(i))
    }

    /// All real bonds as `(i, j, order)` with `i < j`, in index order.
    pub fn real_bonds(&self) -> Vec<(usize, usize, u8)> {
        let mut out = Vec::new();
        for i in 0..self.dims.n {
            for j in (i + 1)..self.dims.n {
                let order = self.bond_order(i, j);
                if order > 0 {
                    out.push((i, j, order as u8));
                }
            }
        }
        out
    }

    /// Relabel nodes: row `i` of the result is row `perm[i]` of the input.
    pub fn permute(&self, perm: &[usize]) -> Result<Self, GraphError> {
        let n = self.dims.n;
        if perm.len() != n {
            return Err(GraphError::InvalidPermutation { n });
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(GraphError::InvalidPermutation { n });
            }
            seen[p] = true;
        }
        let node_type = perm.iter().map(|&p| self.node_type[p]).collect();
        let mut edge_type = vec![0u8; n * n];
        for i in 0..n {
            for j in 0..n {
                edge_type[i * n + j] = self.edge_type[perm[i] * n + perm[j]];
            }
        }
        Ok(MolecularGraph { dims: self.dims, node_type, edge_type })
    }

    /// Expand to the dense one-hot tensors `X: n x (b+1)` and
    /// `A: n x n x (c+1)`.
    pub fn one_hot(&self) -> (Array2<f64>, Array3<f64>) {
        let Dims { n, .. } = self.dims;
        let mut x = Array2::zeros((n, self.dims.node_channels()));
        for i in 0..n {
            x[[i, self.node_type[i] as usize]] = 1.0;
        }
        let mut a = Array3::zeros((n, n, self.dims.bond_channels()));
        for i in 0..n {
            for j in 0..n {
                a[[i, j, self.edge_type[i * n + j] as usize]] = 1.0;
            }
        }
        (x, a)
    }
}

/// Continuous relaxation of a molecular graph: `x` lives in `[0, 1+t)` per
/// entry and `a` in `[0, 1)`. Producers are responsible for clamping into
/// those ranges; `t` is carried by the sampler/trainer configuration.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseGraphTensor {
    pub x: Array2<f64>,
    pub a: Array3<f64>,
}

impl DenseGraphTensor {
    pub fn new(x: Array2<f64>, a: Array3<f64>) -> Self {
        let s = DenseGraphTensor { x, a };
        s.dims();
        s
    }

    pub fn zeros(dims: Dims) -> Self {
        DenseGraphTensor {
            x: Array2::zeros((dims.n, dims.node_channels())),
            a: Array3::zeros((dims.n, dims.n, dims.bond_channels())),
        }
    }

    /// Layout sizes implied by the tensor shapes.
    ///
    /// Panics if the shapes are not a consistent `(n, b+1)` / `(n, n, c+1)`
    /// pair; library constructors never produce such a value.
    pub fn dims(&self) -> Dims {
        let (n, bc) = self.x.dim();
        let (an, am, cc) = self.a.dim();
        assert!(
            n == an && n == am && bc >= 2 && cc >= 2,
            "inconsistent tensor shapes: x {:?}, a {:?}",
            self.x.dim(),
            self.a.dim()
        );
        Dims { n, b: bc - 1, c: cc - 1 }
    }

    /// Relabel node slots: row `i` of the result is row `perm[i]` of the
    /// input, applied to both node axes of `a`.
    pub fn permuted(&self, perm: &[usize]) -> Result<DenseGraphTensor, GraphError> {
        let dims = self.dims();
        let n = dims.n;
        if perm.len() != n {
            return Err(GraphError::InvalidPermutation { n });
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n || seen[p] {
                return Err(GraphError::InvalidPermutation { n });
            }
            seen[p] = true;
        }
        let x = Array2::from_shape_fn(self.x.dim(), |(i, ch)| self.x[[perm[i], ch]]);
        let a = Array3::from_shape_fn(self.a.dim(), |(i, j, k)| self.a[[perm[i], perm[j], k]]);
        Ok(DenseGraphTensor { x, a })
    }

    /// `a + a^T` over the node axes, channels kept.
    pub fn symmetrized_a(&self) -> Array3<f64> {
        let (n, _, ch) = self.a.dim();
        let mut out = self.a.clone();
        for i in 0..n {
            for j in 0..n {
                for k in 0..ch {
                    out[[i, j, k]] = self.a[[i, j, k]] + self.a[[j, i, k]];
                }
            }
        }
        out
    }
}

/// Decode a continuous tensor to a discrete graph: symmetrize the adjacency
/// as `a + a^T`, then take the argmax over type channels for every node and
/// every node pair. Ties break toward the lowest channel index, diagonals
/// are forced virtual, and edges incident to virtual nodes come out virtual.
pub fn discretize(s: &DenseGraphTensor) -> MolecularGraph {
    let dims = s.dims();
    let n = dims.n;
    let node_type: Vec<u8> =
        (0..n).map(|i| argmax_lowest(s.x.row(i).iter().copied()) as u8).collect();
    let a_sym = s.symmetrized_a();
    let mut edge_type = vec![dims.virtual_bond() as u8; n * n];
    for i in 0..n {
        for j in (i + 1)..n {
            let fiber = (0..dims.bond_channels()).map(|k| a_sym[[i, j, k]]);
            let ch = argmax_lowest(fiber) as u8;
            edge_type[i * n + j] = ch;
            edge_type[j * n + i] = ch;
        }
    }
    MolecularGraph::from_types(dims, node_type, edge_type)
}

/// Index of the maximum value; first occurrence wins on ties.
fn argmax_lowest(values: impl Iterator<Item = f64>) -> usize {
    let mut best = 0;
    let mut best_val = f64::NEG_INFINITY;
    for (idx, v) in values.enumerate() {
        if v > best_val {
            best_val = v;
            best = idx;
        }
    }
    best
}
