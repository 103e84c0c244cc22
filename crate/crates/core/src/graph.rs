//! Graph construction and the orthogonal spectral transform.
//!
//! A [`Graph`] is a weighted undirected graph over `n3` nodes with a dense
//! symmetric adjacency matrix. Its Laplacian eigenbasis yields the
//! [`GraphTransform`] used to move graph-tensors between the time and
//! spectral domains.

use std::collections::BTreeMap;
use std::io::BufRead;

use nalgebra::DMatrix;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

/// Weighted undirected graph with symmetric non-negative adjacency and zero
/// diagonal.
#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    adjacency: DMatrix<f64>,
}

impl Graph {
    /// Builds a graph from an adjacency matrix, enforcing symmetry,
    /// non-negative weights, and a zero diagonal.
    pub fn from_adjacency(adjacency: DMatrix<f64>) -> Result<Self> {
        let n = adjacency.nrows();
        if adjacency.ncols() != n {
            return Err(Error::Validation(format!(
                "adjacency must be square, got {}x{}",
                adjacency.nrows(),
                adjacency.ncols()
            )));
        }
        if n == 0 {
            return Err(Error::Validation("graph must have at least one node".into()));
        }
        for i in 0..n {
            if adjacency[(i, i)] != 0.0 {
                return Err(Error::Validation(format!("nonzero diagonal at node {i}")));
            }
            for j in 0..n {
                let w = adjacency[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(Error::Validation(format!(
                        "invalid weight {w} at ({i},{j})"
                    )));
                }
                if w != adjacency[(j, i)] {
                    return Err(Error::Validation(format!(
                        "adjacency not symmetric at ({i},{j})"
                    )));
                }
            }
        }
        Ok(Self { adjacency })
    }

    /// Graph with `n3` nodes and no edges.
    pub fn edgeless(n3: usize) -> Result<Self> {
        Self::from_adjacency(DMatrix::zeros(n3, n3))
    }

    /// Builds a graph from undirected `(u, v, w)` edges over nodes `0..n3`.
    pub fn from_edges(n3: usize, edges: &[(usize, usize, f64)]) -> Result<Self> {
        let mut adj = DMatrix::zeros(n3, n3);
        for &(u, v, w) in edges {
            if u >= n3 || v >= n3 {
                return Err(Error::Validation(format!(
                    "edge ({u},{v}) out of range for {n3} nodes"
                )));
            }
            if u == v {
                return Err(Error::Validation(format!("self-loop at node {u}")));
            }
            adj[(u, v)] = w;
            adj[(v, u)] = w;
        }
        Self::from_adjacency(adj)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.nrows()
    }

    pub fn adjacency(&self) -> &DMatrix<f64> {
        &self.adjacency
    }

    /// Weighted degree of node `k`.
    pub fn degree(&self, k: usize) -> f64 {
        self.adjacency.row(k).sum()
    }

    /// Number of undirected edges with nonzero weight.
    pub fn edge_count(&self) -> usize {
        let n = self.node_count();
        let mut count = 0;
        for i in 0..n {
            for j in (i + 1)..n {
                if self.adjacency[(i, j)] != 0.0 {
                    count += 1;
                }
            }
        }
        count
    }

    /// Undirected edges as `(u, v, w)` with `u < v`, in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.node_count();
        let mut out = Vec::new();
        for i in 0..n {
            for j in (i + 1)..n {
                let w = self.adjacency[(i, j)];
                if w != 0.0 {
                    out.push((i, j, w));
                }
            }
        }
        out
    }

    /// BFS connectivity check.
    pub fn is_connected(&self) -> bool {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut visited = 1;
        while let Some(u) = stack.pop() {
            for v in 0..n {
                if self.adjacency[(u, v)] != 0.0 && !seen[v] {
                    seen[v] = true;
                    visited += 1;
                    stack.push(v);
                }
            }
        }
        visited == n
    }
}

/// Bookkeeping from [`load_edge_list`].
#[derive(Debug, Clone, Default)]
pub struct LoadStats {
    /// Original node ids in ascending order; position = dense index.
    pub original_ids: Vec<u64>,
    pub self_loops_dropped: usize,
    pub duplicate_edges: usize,
}

impl LoadStats {
    /// Dense index of an original node id, if present.
    pub fn dense_index(&self, original_id: u64) -> Option<usize> {
        self.original_ids.binary_search(&original_id).ok()
    }
}

/// Parses a whitespace-separated edge list (`u v` or `u v w` per line,
/// `#` comments and blank lines ignored). Node ids are re-indexed densely
/// in ascending original-id order; duplicate edges keep the last weight;
/// self-loops are dropped and counted.
pub fn load_edge_list<R: BufRead>(reader: R) -> Result<(Graph, LoadStats)> {
    let mut ids = std::collections::BTreeSet::new();
    // canonical (min,max) -> weight, last occurrence wins
    let mut edges: BTreeMap<(u64, u64), f64> = BTreeMap::new();
    let mut stats = LoadStats::default();

    for (lineno, line) in reader.lines().enumerate() {
        let lineno = lineno + 1;
        let line = line?;
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        if fields.len() != 2 && fields.len() != 3 {
            return Err(Error::Parse {
                line: lineno,
                msg: format!("expected `u v` or `u v w`, got {} fields", fields.len()),
            });
        }
        let u: u64 = fields[0].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("invalid node id `{}`", fields[0]),
        })?;
        let v: u64 = fields[1].parse().map_err(|_| Error::Parse {
            line: lineno,
            msg: format!("invalid node id `{}`", fields[1]),
        })?;
        let w: f64 = if fields.len() == 3 {
            fields[2].parse().map_err(|_| Error::Parse {
                line: lineno,
                msg: format!("invalid weight `{}`", fields[2]),
            })?
        } else {
            1.0
        };
        if !w.is_finite() || w <= 0.0 {
            return Err(Error::Validation(format!(
                "line {lineno}: edge weight must be a positive real, got {w}"
            )));
        }
        ids.insert(u);
        ids.insert(v);
        if u == v {
            stats.self_loops_dropped += 1;
            continue;
        }
        let key = (u.min(v), u.max(v));
        if edges.insert(key, w).is_some() {
            stats.duplicate_edges += 1;
        }
    }

    if ids.is_empty() {
        return Err(Error::Data("edge list contains no nodes".into()));
    }

    stats.original_ids = ids.into_iter().collect();
    let index: BTreeMap<u64, usize> = stats
        .original_ids
        .iter()
        .enumerate()
        .map(|(i, &id)| (id, i))
        .collect();

    let n = stats.original_ids.len();
    let mut adj = DMatrix::zeros(n, n);
    for (&(u, v), &w) in &edges {
        let (i, j) = (index[&u], index[&v]);
        adj[(i, j)] = w;
        adj[(j, i)] = w;
    }
    Ok((Graph { adjacency: adj }, stats))
}

/// Restricts `g` to `ids`, re-indexed in the given order.
pub fn induced_subgraph(g: &Graph, ids: &[usize]) -> Result<Graph> {
    let n = g.node_count();
    let mut seen = vec![false; n];
    for &id in ids {
        if id >= n {
            return Err(Error::Validation(format!(
                "node id {id} out of range for {n} nodes"
            )));
        }
        if seen[id] {
            return Err(Error::Validation(format!("duplicate node id {id}")));
        }
        seen[id] = true;
    }
    if ids.is_empty() {
        return Err(Error::Validation("subgraph must keep at least one node".into()));
    }
    let m = ids.len();
    let mut adj = DMatrix::zeros(m, m);
    for (a, &i) in ids.iter().enumerate() {
        for (b, &j) in ids.iter().enumerate() {
            adj[(a, b)] = g.adjacency[(i, j)];
        }
    }
    Ok(Graph { adjacency: adj })
}

/// Replaces every existing edge weight with an independent integer weight
/// drawn uniformly from `[lo, hi]` by a seeded generator. Deterministic for
/// a fixed seed; edges are visited in row-major `(i, j), i < j` order.
pub fn assign_random_weights(g: &Graph, lo: f64, hi: f64, seed: u64) -> Result<Graph> {
    if !(lo.is_finite() && hi.is_finite()) || lo <= 0.0 {
        return Err(Error::Validation(format!(
            "weight range must be positive, got [{lo}, {hi}]"
        )));
    }
    if lo > hi {
        return Err(Error::Validation(format!(
            "weight range inverted: lo {lo} > hi {hi}"
        )));
    }
    let lo_i = lo.ceil() as i64;
    let hi_i = hi.floor() as i64;
    if lo_i > hi_i {
        return Err(Error::Validation(format!(
            "no integer weight in [{lo}, {hi}]"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = g.node_count();
    let mut adj = g.adjacency.clone();
    for i in 0..n {
        for j in (i + 1)..n {
            if adj[(i, j)] != 0.0 {
                let w = rng.random_range(lo_i..=hi_i) as f64;
                adj[(i, j)] = w;
                adj[(j, i)] = w;
            }
        }
    }
    Ok(Graph { adjacency: adj })
}

/// Graph Laplacian `D - A`, or the normalized variant
/// `I - D^{-1/2} A D^{-1/2}` when `normalized` is set.
pub fn laplacian(g: &Graph, normalized: bool) -> Result<DMatrix<f64>> {
    let n = g.node_count();
    let degrees: Vec<f64> = (0..n).map(|k| g.degree(k)).collect();
    if normalized {
        if let Some(k) = degrees.iter().position(|&d| d <= 0.0) {
            return Err(Error::Validation(format!(
                "normalized Laplacian undefined: node {k} has zero degree"
            )));
        }
        let inv_sqrt: Vec<f64> = degrees.iter().map(|d| 1.0 / d.sqrt()).collect();
        let mut l = DMatrix::identity(n, n);
        for i in 0..n {
            for j in 0..n {
                let a = g.adjacency[(i, j)];
                if a != 0.0 {
                    l[(i, j)] -= inv_sqrt[i] * a * inv_sqrt[j];
                }
            }
        }
        Ok(l)
    } else {
        let mut l = -g.adjacency.clone();
        for i in 0..n {
            l[(i, i)] = degrees[i];
        }
        Ok(l)
    }
}

/// Which matrix supplies the spectral basis.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TransformKind {
    /// Eigenbasis of `D - A` (the default).
    Laplacian,
    /// Eigenbasis of `I - D^{-1/2} A D^{-1/2}`.
    NormalizedLaplacian,
    /// Real orthogonal eigenbasis of the n-cycle Laplacian; ignores the
    /// graph's edges entirely (topology-oblivious baseline transform).
    CycleDct,
    /// `U = I`; a no-op transform.
    Identity,
}

/// Orthogonal transform pair derived from a graph: `u` maps time-domain
/// slices to the spectral domain, `u_inv = uᵀ` maps back.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTransform {
    kind: TransformKind,
    u: DMatrix<f64>,
    u_inv: DMatrix<f64>,
    eigenvalues: Vec<f64>,
}

impl GraphTransform {
    pub fn kind(&self) -> TransformKind {
        self.kind
    }

    pub fn dimension(&self) -> usize {
        self.u.nrows()
    }

    /// Forward transform matrix (rows are eigenvectors).
    pub fn u(&self) -> &DMatrix<f64> {
        &self.u
    }

    /// Inverse transform matrix, the transpose of `u`.
    pub fn u_inv(&self) -> &DMatrix<f64> {
        &self.u_inv
    }

    /// Eigenvalues of the source matrix in ascending order (all zero for
    /// the identity kind).
    pub fn eigenvalues(&self) -> &[f64] {
        &self.eigenvalues
    }

    /// Identity transform of dimension `n`.
    pub fn identity(n: usize) -> Self {
        Self {
            kind: TransformKind::Identity,
            u: DMatrix::identity(n, n),
            u_inv: DMatrix::identity(n, n),
            eigenvalues: vec![0.0; n],
        }
    }

    /// Topology-oblivious transform for `n` nodes: the eigenbasis of the
    /// n-cycle Laplacian.
    pub fn cycle_dct(n: usize) -> Result<Self> {
        let ring = cycle_graph(n)?;
        let l = laplacian(&ring, false)?;
        let (eigenvalues, q) = symmetric_eigen_sorted(&l)?;
        Ok(Self {
            kind: TransformKind::CycleDct,
            u: q.transpose(),
            u_inv: q,
            eigenvalues,
        })
    }
}

fn cycle_graph(n: usize) -> Result<Graph> {
    let edges: Vec<(usize, usize, f64)> = match n {
        0 => return Err(Error::Validation("cycle graph needs at least one node".into())),
        1 => Vec::new(),
        2 => vec![(0, 1, 1.0)],
        _ => (0..n).map(|i| (i, (i + 1) % n, 1.0)).collect(),
    };
    Graph::from_edges(n, &edges)
}

/// Symmetric eigendecomposition with ascending eigenvalues and a fixed sign
/// convention: each eigenvector's first entry larger than 1e-12 in magnitude
/// is made positive. Returns `(eigenvalues, Q)` with eigenvectors as columns.
fn symmetric_eigen_sorted(l: &DMatrix<f64>) -> Result<(Vec<f64>, DMatrix<f64>)> {
    let n = l.nrows();
    let eig = nalgebra::SymmetricEigen::try_new(l.clone(), f64::EPSILON, 10_000)
        .ok_or_else(|| Error::Numerical("symmetric eigensolver did not converge".into()))?;

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));

    let mut q = DMatrix::zeros(n, n);
    let mut eigenvalues = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        eigenvalues.push(eig.eigenvalues[src]);
        let mut col = eig.eigenvectors.column(src).clone_owned();
        if let Some(first) = col.iter().find(|v| v.abs() > 1e-12) {
            if *first < 0.0 {
                col.neg_mut();
            }
        }
        q.set_column(dst, &col);
    }
    Ok((eigenvalues, q))
}

/// Builds the spectral transform of `g` for the requested basis kind.
pub fn spectral_transform(g: &Graph, kind: TransformKind) -> Result<GraphTransform> {
    match kind {
        TransformKind::Identity => Ok(GraphTransform::identity(g.node_count())),
        TransformKind::CycleDct => GraphTransform::cycle_dct(g.node_count()),
        TransformKind::Laplacian | TransformKind::NormalizedLaplacian => {
            let l = laplacian(g, kind == TransformKind::NormalizedLaplacian)?;
            let (eigenvalues, q) = symmetric_eigen_sorted(&l)?;
            Ok(GraphTransform {
                kind,
                u: q.transpose(),
                u_inv: q,
                eigenvalues,
            })
        }
    }
}
