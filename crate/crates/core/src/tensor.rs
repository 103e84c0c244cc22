//! Dense third-order graph-tensors and their spectral algebra.
//!
//! Storage is slice-major: entry `(i, j, k)` lives at
//! `k * n1 * n2 + i * n2 + j`, so the k-th frontal slice is contiguous and
//! row-major. Every algorithm in this crate iterates per slice, and the
//! `GTT1` file format serializes exactly this layout.

use std::io::{Read, Write};
use std::path::Path;

use nalgebra::{DMatrix, DMatrixView};

use crate::error::{Error, Result};
use crate::graph::GraphTransform;

const GTT1_MAGIC: &[u8; 4] = b"GTT1";

/// Dense real `n1 x n2 x n3` tensor; one frontal slice per graph node.
#[derive(Debug, Clone, PartialEq)]
pub struct GraphTensor {
    n1: usize,
    n2: usize,
    n3: usize,
    data: Vec<f64>,
}

impl GraphTensor {
    pub fn zeros(n1: usize, n2: usize, n3: usize) -> Result<Self> {
        check_dims(n1, n2, n3)?;
        Ok(Self {
            n1,
            n2,
            n3,
            data: vec![0.0; n1 * n2 * n3],
        })
    }

    /// Wraps an existing slice-major buffer.
    pub fn from_vec(n1: usize, n2: usize, n3: usize, data: Vec<f64>) -> Result<Self> {
        check_dims(n1, n2, n3)?;
        if data.len() != n1 * n2 * n3 {
            return Err(Error::Validation(format!(
                "buffer length {} does not match {n1}x{n2}x{n3}",
                data.len()
            )));
        }
        Ok(Self { n1, n2, n3, data })
    }

    pub fn from_fn(n1: usize, n2: usize, n3: usize, mut f: impl FnMut(usize, usize, usize) -> f64) -> Result<Self> {
        let mut t = Self::zeros(n1, n2, n3)?;
        for k in 0..n3 {
            for i in 0..n1 {
                for j in 0..n2 {
                    t.data[k * n1 * n2 + i * n2 + j] = f(i, j, k);
                }
            }
        }
        Ok(t)
    }

    pub fn n1(&self) -> usize {
        self.n1
    }

    pub fn n2(&self) -> usize {
        self.n2
    }

    pub fn n3(&self) -> usize {
        self.n3
    }

    pub fn dims(&self) -> (usize, usize, usize) {
        (self.n1, self.n2, self.n3)
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize, k: usize) -> f64 {
        self.data[k * self.n1 * self.n2 + i * self.n2 + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, k: usize, value: f64) {
        self.data[k * self.n1 * self.n2 + i * self.n2 + j] = value;
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    /// Contiguous row-major view of frontal slice `k`.
    pub fn slice(&self, k: usize) -> &[f64] {
        let len = self.n1 * self.n2;
        &self.data[k * len..(k + 1) * len]
    }

    pub fn slice_mut(&mut self, k: usize) -> &mut [f64] {
        let len = self.n1 * self.n2;
        &mut self.data[k * len..(k + 1) * len]
    }

    /// Frontal slice `k` as a matrix.
    pub fn slice_matrix(&self, k: usize) -> DMatrix<f64> {
        DMatrix::from_row_slice(self.n1, self.n2, self.slice(k))
    }

    pub fn set_slice_matrix(&mut self, k: usize, m: &DMatrix<f64>) {
        debug_assert_eq!((m.nrows(), m.ncols()), (self.n1, self.n2));
        let (n1, n2) = (self.n1, self.n2);
        let dst = self.slice_mut(k);
        for i in 0..n1 {
            for j in 0..n2 {
                dst[i * n2 + j] = m[(i, j)];
            }
        }
    }

    /// Frobenius norm: sqrt of the sum of squared entries.
    pub fn fro_norm(&self) -> f64 {
        self.data.iter().map(|v| v * v).sum::<f64>().sqrt()
    }

    pub fn scale(&self, c: f64) -> Self {
        Self {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            data: self.data.iter().map(|v| c * v).collect(),
        }
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Writes the tensor in the `GTT1` binary format.
    pub fn write_gtt1<W: Write>(&self, mut w: W) -> Result<()> {
        w.write_all(GTT1_MAGIC)?;
        for d in [self.n1, self.n2, self.n3] {
            let d = u32::try_from(d)
                .map_err(|_| Error::Format(format!("dimension {d} exceeds u32 range")))?;
            w.write_all(&d.to_le_bytes())?;
        }
        for v in &self.data {
            w.write_all(&v.to_le_bytes())?;
        }
        Ok(())
    }

    /// Reads a tensor in the `GTT1` binary format, rejecting bad magic,
    /// truncation, trailing bytes, and non-finite entries.
    pub fn read_gtt1<R: Read>(mut r: R) -> Result<Self> {
        let mut magic = [0u8; 4];
        r.read_exact(&mut magic)
            .map_err(|_| Error::Format("truncated GTT1 header".into()))?;
        if &magic != GTT1_MAGIC {
            return Err(Error::Format("bad GTT1 magic".into()));
        }
        let mut dims = [0usize; 3];
        for d in &mut dims {
            let mut buf = [0u8; 4];
            r.read_exact(&mut buf)
                .map_err(|_| Error::Format("truncated GTT1 header".into()))?;
            *d = u32::from_le_bytes(buf) as usize;
        }
        let [n1, n2, n3] = dims;
        check_dims(n1, n2, n3).map_err(|_| Error::Format("GTT1 dimensions must be positive".into()))?;
        let count = n1
            .checked_mul(n2)
            .and_then(|p| p.checked_mul(n3))
            .ok_or_else(|| Error::Format("GTT1 dimensions overflow".into()))?;
        let mut data = Vec::with_capacity(count.min(1 << 20));
        let mut buf = [0u8; 8];
        for _ in 0..count {
            r.read_exact(&mut buf)
                .map_err(|_| Error::Format("truncated GTT1 payload".into()))?;
            let v = f64::from_le_bytes(buf);
            if !v.is_finite() {
                return Err(Error::Format("non-finite value in GTT1 payload".into()));
            }
            data.push(v);
        }
        if r.read(&mut buf[..1])? != 0 {
            return Err(Error::Format("trailing bytes after GTT1 payload".into()));
        }
        Self::from_vec(n1, n2, n3, data)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path)?);
        self.write_gtt1(&mut f)?;
        f.flush()?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let f = std::io::BufReader::new(std::fs::File::open(path)?);
        Self::read_gtt1(f)
    }
}

impl std::ops::Add for &GraphTensor {
    type Output = GraphTensor;
    fn add(self, rhs: &GraphTensor) -> GraphTensor {
        assert_eq!(self.dims(), rhs.dims(), "tensor dims mismatch");
        GraphTensor {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl std::ops::Sub for &GraphTensor {
    type Output = GraphTensor;
    fn sub(self, rhs: &GraphTensor) -> GraphTensor {
        assert_eq!(self.dims(), rhs.dims(), "tensor dims mismatch");
        GraphTensor {
            n1: self.n1,
            n2: self.n2,
            n3: self.n3,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

fn check_dims(n1: usize, n2: usize, n3: usize) -> Result<()> {
    if n1 == 0 || n2 == 0 || n3 == 0 {
        return Err(Error::Validation(format!(
            "tensor dimensions must be positive, got {n1}x{n2}x{n3}"
        )));
    }
    Ok(())
}

/// Mixes frontal slices by a matrix: output slice k = sum_s m(k,s) * slice s.
/// This is the common core of the graph Fourier transform and the learned
/// FC layers.
pub(crate) fn mix_slices(x: &GraphTensor, m: &DMatrix<f64>) -> GraphTensor {
    debug_assert_eq!(m.nrows(), x.n3);
    debug_assert_eq!(m.ncols(), x.n3);
    // Column k of the (n1*n2) x n3 view is slice k, so slice mixing is one
    // dense product with the transposed mixer.
    let view = DMatrixView::from_slice(&x.data, x.n1 * x.n2, x.n3);
    let mixed = view * m.transpose();
    GraphTensor {
        n1: x.n1,
        n2: x.n2,
        n3: x.n3,
        data: mixed.as_slice().to_vec(),
    }
}

fn check_transform_dims(x: &GraphTensor, t: &GraphTransform) -> Result<()> {
    if x.n3 != t.dimension() {
        return Err(Error::Validation(format!(
            "tensor has {} slices but transform has dimension {}",
            x.n3,
            t.dimension()
        )));
    }
    Ok(())
}

/// Graph Fourier transform: spectral slice k is the U(k,.)-weighted sum of
/// time-domain slices.
pub fn transform(x: &GraphTensor, t: &GraphTransform) -> Result<GraphTensor> {
    check_transform_dims(x, t)?;
    Ok(mix_slices(x, t.u()))
}

/// Inverse graph Fourier transform; exact linear inverse of [`transform`].
pub fn inverse_transform(x_spec: &GraphTensor, t: &GraphTransform) -> Result<GraphTensor> {
    check_transform_dims(x_spec, t)?;
    Ok(mix_slices(x_spec, t.u_inv()))
}

/// Thin SVD with singular values sorted non-increasing, computed by
/// one-sided Jacobi rotations. Exactly-zero inputs short-circuit to zero
/// factors so solvers starting from a zero tensor never touch the iterative
/// decomposition.
///
/// One-sided Jacobi is used instead of a library bidiagonalization SVD: the
/// slices here are small (tens of rows), the routine is deterministic, and it
/// computes small singular values to high relative accuracy.
pub(crate) fn svd_thin(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let r = a.nrows().min(a.ncols());
    if a.iter().all(|&v| v == 0.0) {
        return Ok((
            DMatrix::zeros(a.nrows(), r),
            vec![0.0; r],
            DMatrix::zeros(a.ncols(), r),
        ));
    }
    if a.nrows() >= a.ncols() {
        jacobi_svd_tall(a)
    } else {
        let (u, s, v) = jacobi_svd_tall(&a.transpose())?;
        Ok((v, s, u))
    }
}

/// One-sided Jacobi SVD of a tall (or square) matrix: orthogonalizes the
/// columns by plane rotations until all pairwise inner products vanish, then
/// reads the singular values off the column norms.
fn jacobi_svd_tall(a: &DMatrix<f64>) -> Result<(DMatrix<f64>, Vec<f64>, DMatrix<f64>)> {
    let (m, n) = (a.nrows(), a.ncols());
    debug_assert!(m >= n);
    let mut w = a.clone();
    let mut v = DMatrix::identity(n, n);
    let tol = 1e-15;
    let max_sweeps = 60;

    let mut converged = false;
    for _ in 0..max_sweeps {
        let mut rotated = false;
        for p in 0..n.saturating_sub(1) {
            for q in (p + 1)..n {
                let mut app = 0.0;
                let mut aqq = 0.0;
                let mut apq = 0.0;
                for i in 0..m {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    app += wp * wp;
                    aqq += wq * wq;
                    apq += wp * wq;
                }
                if apq.abs() <= tol * (app * aqq).sqrt() {
                    continue;
                }
                rotated = true;
                let tau = (aqq - app) / (2.0 * apq);
                let t = tau.signum() / (tau.abs() + (1.0 + tau * tau).sqrt());
                let c = 1.0 / (1.0 + t * t).sqrt();
                let s = c * t;
                for i in 0..m {
                    let wp = w[(i, p)];
                    let wq = w[(i, q)];
                    w[(i, p)] = c * wp - s * wq;
                    w[(i, q)] = s * wp + c * wq;
                }
                for i in 0..n {
                    let vp = v[(i, p)];
                    let vq = v[(i, q)];
                    v[(i, p)] = c * vp - s * vq;
                    v[(i, q)] = s * vp + c * vq;
                }
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Numerical("Jacobi SVD did not converge".into()));
    }

    let norms: Vec<f64> = (0..n).map(|j| w.column(j).norm()).collect();
    let max_norm = norms.iter().cloned().fold(0.0, f64::max);
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| norms[j].total_cmp(&norms[i]));

    let mut u = DMatrix::zeros(m, n);
    let mut v_sorted = DMatrix::zeros(n, n);
    let mut s = Vec::with_capacity(n);
    for (dst, &src) in order.iter().enumerate() {
        let sigma = norms[src];
        // columns with negligible norm carry no signal; leave them zero in U
        if sigma > max_norm * 1e-300 {
            let mut col = w.column(src).clone_owned();
            col.unscale_mut(sigma);
            u.set_column(dst, &col);
        }
        s.push(sigma);
        v_sorted.set_column(dst, &v.column(src));
    }
    Ok((u, s, v_sorted))
}

/// Per-slice factors of a graph-tensor SVD under a fixed transform.
#[derive(Debug, Clone)]
pub struct LsvdFactors {
    spectral_u: Vec<DMatrix<f64>>,
    spectral_s: Vec<Vec<f64>>,
    spectral_v: Vec<DMatrix<f64>>,
    transform: GraphTransform,
}

impl LsvdFactors {
    pub fn transform(&self) -> &GraphTransform {
        &self.transform
    }

    pub fn spectral_u(&self, k: usize) -> &DMatrix<f64> {
        &self.spectral_u[k]
    }

    /// Singular values of spectral slice `k`, non-increasing.
    pub fn singular_values(&self, k: usize) -> &[f64] {
        &self.spectral_s[k]
    }

    pub fn spectral_v(&self, k: usize) -> &DMatrix<f64> {
        &self.spectral_v[k]
    }

    /// Recomposes the spectral-domain tensor from the factors.
    pub fn reconstruct_spectral(&self) -> Result<GraphTensor> {
        let n3 = self.spectral_u.len();
        let n1 = self.spectral_u[0].nrows();
        let n2 = self.spectral_v[0].nrows();
        let mut out = GraphTensor::zeros(n1, n2, n3)?;
        for k in 0..n3 {
            let mut scaled = self.spectral_u[k].clone();
            for (c, &s) in self.spectral_s[k].iter().enumerate() {
                scaled.column_mut(c).scale_mut(s);
            }
            let m = scaled * self.spectral_v[k].transpose();
            out.set_slice_matrix(k, &m);
        }
        Ok(out)
    }

    /// Recomposes the time-domain tensor.
    pub fn reconstruct(&self) -> Result<GraphTensor> {
        inverse_transform(&self.reconstruct_spectral()?, &self.transform)
    }
}

/// Transform `x` and take a thin SVD of every spectral slice.
pub fn l_svd(x: &GraphTensor, t: &GraphTransform) -> Result<LsvdFactors> {
    let spec = transform(x, t)?;
    let mut spectral_u = Vec::with_capacity(x.n3);
    let mut spectral_s = Vec::with_capacity(x.n3);
    let mut spectral_v = Vec::with_capacity(x.n3);
    for k in 0..x.n3 {
        let (u, s, v) = svd_thin(&spec.slice_matrix(k))
            .map_err(|e| Error::Numerical(format!("SVD failed on spectral slice {k}: {e}")))?;
        spectral_u.push(u);
        spectral_s.push(s);
        spectral_v.push(v);
    }
    Ok(LsvdFactors {
        spectral_u,
        spectral_s,
        spectral_v,
        transform: t.clone(),
    })
}

/// Which spectral slices the graph-tensor nuclear norm sums over.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum GtnnMode {
    /// Sum of singular values of the first spectral slice only, exactly as
    /// the norm is written.
    #[default]
    PaperFirstSlice,
    /// Sum over all spectral slices; the quantity the shrinkage-based
    /// solvers actually decrease.
    AllSlices,
}

/// Graph-tensor nuclear norm of `x` under transform `t`.
pub fn gtnn(x: &GraphTensor, t: &GraphTransform, mode: GtnnMode) -> Result<f64> {
    let factors = l_svd(x, t)?;
    let sum_slice = |k: usize| factors.singular_values(k).iter().sum::<f64>();
    Ok(match mode {
        GtnnMode::PaperFirstSlice => sum_slice(0),
        GtnnMode::AllSlices => (0..x.n3).map(sum_slice).sum(),
    })
}

/// Singular-value soft-thresholding: shrink the singular values of `a` by
/// `lambda`, clamp at zero, and recompose. The proximal map of
/// `lambda * nuclear_norm`.
pub fn singular_soft(a: &DMatrix<f64>, lambda: f64) -> Result<DMatrix<f64>> {
    if lambda < 0.0 || !lambda.is_finite() {
        return Err(Error::Validation(format!(
            "shrinkage threshold must be non-negative, got {lambda}"
        )));
    }
    if a.iter().all(|&v| v == 0.0) {
        return Ok(DMatrix::zeros(a.nrows(), a.ncols()));
    }
    let (u, s, v) = svd_thin(a)?;
    let mut scaled = u;
    for (c, &sv) in s.iter().enumerate() {
        scaled.column_mut(c).scale_mut((sv - lambda).max(0.0));
    }
    Ok(scaled * v.transpose())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{spectral_transform, Graph, TransformKind};
    use proptest::prelude::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    pub(crate) fn random_tensor(n1: usize, n2: usize, n3: usize, seed: u64) -> GraphTensor {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        GraphTensor::from_fn(n1, n2, n3, |_, _, _| rng.random_range(-2.0..2.0)).unwrap()
    }

    pub(crate) fn random_connected_graph(n: usize, seed: u64) -> Graph {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut edges: Vec<(usize, usize, f64)> =
            (1..n).map(|i| (i - 1, i, rng.random_range(0.5..2.0))).collect();
        for i in 0..n {
            for j in (i + 2)..n {
                if rng.random::<f64>() < 0.3 {
                    edges.push((i, j, rng.random_range(0.5..2.0)));
                }
            }
        }
        Graph::from_edges(n, &edges).unwrap()
    }

    #[test]
    fn fro_norm_basics() {
        assert_eq!(GraphTensor::zeros(3, 2, 4).unwrap().fro_norm(), 0.0);
        let ones = GraphTensor::from_fn(2, 2, 2, |_, _, _| 1.0).unwrap();
        assert!((ones.fro_norm() - 8.0f64.sqrt()).abs() < 1e-15);
    }

    #[test]
    fn fro_norm_matches_scalar_loop_oracle() {
        let x = random_tensor(4, 3, 5, 11);
        let mut acc = 0.0;
        for k in 0..5 {
            for i in 0..4 {
                for j in 0..3 {
                    acc += x.get(i, j, k) * x.get(i, j, k);
                }
            }
        }
        assert_eq!(x.fro_norm(), acc.sqrt());
    }

    #[test]
    fn transform_of_zero_is_zero() {
        let g = random_connected_graph(5, 3);
        let t = spectral_transform(&g, TransformKind::Laplacian).unwrap();
        let z = GraphTensor::zeros(2, 3, 5).unwrap();
        let out = transform(&z, &t).unwrap();
        assert_eq!(out.fro_norm(), 0.0);
    }

    #[test]
    fn transform_with_single_node_is_identity() {
        let g = Graph::edgeless(1).unwrap();
        let t = spectral_transform(&g, TransformKind::Laplacian).unwrap();
        let x = random_tensor(3, 4, 1, 5);
        let out = transform(&x, &t).unwrap();
        assert_eq!(out, x);
    }

    #[test]
    fn transform_of_constant_slices_on_p3_concentrates_in_dc_slice() {
        let g = Graph::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        let t = spectral_transform(&g, TransformKind::Laplacian).unwrap();
        let x = GraphTensor::from_fn(2, 2, 3, |_, _, _| 1.0).unwrap();
        let spec = transform(&x, &t).unwrap();
        let sqrt3 = 3.0f64.sqrt();
        for i in 0..2 {
            for j in 0..2 {
                assert!((spec.get(i, j, 0) - sqrt3).abs() < 1e-12);
                assert!(spec.get(i, j, 1).abs() < 1e-12);
                assert!(spec.get(i, j, 2).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn round_trip_recovers_random_tensor() {
        let g = random_connected_graph(12, 21);
        let t = spectral_transform(&g, TransformKind::Laplacian).unwrap();
        let x = random_tensor(8, 6, 12, 22);
        let back = inverse_transform(&transform(&x, &t).unwrap(), &t).unwrap();
        let rel = (&back - &x).fro_norm() / x.fro_norm();
        assert!(rel < 1e-10, "round-trip error {rel}");
    }

    #[test]
    fn identity_transform_round_trip_is_exact() {
        let t = crate::graph::GraphTransform::identity(4);
        let x = random_tensor(3, 3, 4, 9);
        assert_eq!(transform(&x, &t).unwrap(), x);
        assert_eq!(inverse_transform(&x, &t).unwrap(), x);
    }

    #[test]
    fn transform_rejects_dimension_mismatch() {
        let t = crate::graph::GraphTransform::identity(4);
        let x = random_tensor(3, 3, 5, 9);
        assert!(matches!(transform(&x, &t), Err(Error::Validation(_))));
        assert!(matches!(inverse_transform(&x, &t), Err(Error::Validation(_))));
    }

    #[test]
    fn l_svd_of_zero_tensor_has_zero_singular_values() {
        let t = crate::graph::GraphTransform::identity(4);
        let z = GraphTensor::zeros(3, 5, 4).unwrap();
        let f = l_svd(&z, &t).unwrap();
        for k in 0..4 {
            assert!(f.singular_values(k).iter().all(|&s| s == 0.0));
        }
    }

    #[test]
    fn l_svd_sees_spectral_rank_two() {
        let g = random_connected_graph(6, 31);
        let t = spectral_transform(&g, TransformKind::Laplacian).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(32);
        // build rank-2 spectral slices, move to time domain, decompose
        let mut spec = GraphTensor::zeros(5, 4, 6).unwrap();
        for k in 0..6 {
            let a = DMatrix::from_fn(5, 2, |_, _| rng.random_range(-1.0..1.0));
            let b = DMatrix::from_fn(4, 2, |_, _| rng.random_range(-1.0..1.0));
            spec.set_slice_matrix(k, &(a * b.transpose()));
        }
        let x = inverse_transform(&spec, &t).unwrap();
        let f = l_svd(&x, &t).unwrap();
        for k in 0..6 {
            let above: usize = f.singular_values(k).iter().filter(|&&s| s > 1e-9).count();
            assert!(above <= 2, "slice {k} has {above} significant singular values");
            assert!(f.singular_values(k).windows(2).all(|w| w[0] >= w[1]));
        }
        let back = f.reconstruct().unwrap();
        let rel = (&back - &x).fro_norm() / x.fro_norm();
        assert!(rel < 1e-9, "reconstruction error {rel}");
    }

    #[test]
    fn gtnn_of_zero_is_zero_in_both_modes() {
        let t = crate::graph::GraphTransform::identity(3);
        let z = GraphTensor::zeros(2, 2, 3).unwrap();
        assert_eq!(gtnn(&z, &t, GtnnMode::PaperFirstSlice).unwrap(), 0.0);
        assert_eq!(gtnn(&z, &t, GtnnMode::AllSlices).unwrap(), 0.0);
    }

    #[test]
    fn gtnn_is_absolutely_homogeneous() {
        let g = random_connected_graph(6, 41);
        let t = spectral_transform(&g, TransformKind::Laplacian).unwrap();
        let x = random_tensor(5, 4, 6, 42);
        let c = -2.5;
        for mode in [GtnnMode::PaperFirstSlice, GtnnMode::AllSlices] {
            let lhs = gtnn(&x.scale(c), &t, mode).unwrap();
            let rhs = c.abs() * gtnn(&x, &t, mode).unwrap();
            assert!((lhs - rhs).abs() < 1e-9 * rhs.max(1.0));
        }
    }

    #[test]
    fn gtnn_first_slice_matches_gram_eigenvalue_oracle() {
        let g = random_connected_graph(6, 51);
        let t = spectral_transform(&g, TransformKind::Laplacian).unwrap();
        let x = random_tensor(5, 4, 6, 52);
        let got = gtnn(&x, &t, GtnnMode::PaperFirstSlice).unwrap();

        // independent route: mix slices by explicit loops, then sum the
        // square roots of the Gram matrix eigenvalues
        let mut first = DMatrix::zeros(5, 4);
        for s in 0..6 {
            first += t.u()[(0, s)] * x.slice_matrix(s);
        }
        let gram = first.transpose() * &first;
        let eig = nalgebra::SymmetricEigen::new(gram);
        let oracle: f64 = eig.eigenvalues.iter().map(|&e| e.max(0.0).sqrt()).sum();
        assert!((got - oracle).abs() < 1e-9 * oracle.max(1.0), "{got} vs {oracle}");
    }

    #[test]
    fn singular_soft_with_zero_lambda_reproduces_input() {
        let mut rng = ChaCha8Rng::seed_from_u64(61);
        let a = DMatrix::from_fn(5, 3, |_, _| rng.random_range(-1.0..1.0));
        let out = singular_soft(&a, 0.0).unwrap();
        let rel = (&out - &a).norm() / a.norm();
        assert!(rel < 1e-10);
    }

    #[test]
    fn singular_soft_shrinks_diagonal_by_hand() {
        let a = DMatrix::from_row_slice(2, 2, &[3.0, 0.0, 0.0, 1.0]);
        let out = singular_soft(&a, 2.0).unwrap();
        let expected = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!((&out - &expected).norm() < 1e-12);
    }

    #[test]
    fn singular_soft_clamps_to_zero_above_largest_value() {
        let mut rng = ChaCha8Rng::seed_from_u64(62);
        let a = DMatrix::from_fn(4, 4, |_, _| rng.random_range(-1.0..1.0));
        let sigma_max = svd_thin(&a).unwrap().1[0];
        let out = singular_soft(&a, sigma_max + 0.1).unwrap();
        assert!(out.norm() < 1e-12);
    }

    #[test]
    fn singular_soft_rejects_negative_lambda() {
        let a = DMatrix::zeros(2, 2);
        assert!(matches!(singular_soft(&a, -1.0), Err(Error::Validation(_))));
    }

    /// Nuclear norm of a 2x2 matrix in closed form, independent of any SVD.
    fn nuclear_2x2(m: &DMatrix<f64>) -> f64 {
        let fro2 = m.iter().map(|v| v * v).sum::<f64>();
        let det = m[(0, 0)] * m[(1, 1)] - m[(0, 1)] * m[(1, 0)];
        (fro2 + 2.0 * det.abs()).max(0.0).sqrt()
    }

    fn prox_objective(z: &DMatrix<f64>, a: &DMatrix<f64>, lambda: f64) -> f64 {
        0.5 * (z - a).iter().map(|v| v * v).sum::<f64>() + lambda * nuclear_2x2(z)
    }

    #[test]
    fn singular_soft_is_the_nuclear_prox_on_a_2x2_grid() {
        let mut rng = ChaCha8Rng::seed_from_u64(71);
        for _ in 0..3 {
            let a = DMatrix::from_fn(2, 2, |_, _| rng.random_range(-1.5..1.5));
            let lambda = rng.random_range(0.1..0.8);
            let z_soft = singular_soft(&a, lambda).unwrap();
            let f_soft = prox_objective(&z_soft, &a, lambda);

            let step = 0.1;
            let span = 10; // +/- 1.0 around the candidate in each coordinate
            let mut grid_min = f64::INFINITY;
            let mut z = z_soft.clone();
            for d0 in -span..=span {
                for d1 in -span..=span {
                    for d2 in -span..=span {
                        for d3 in -span..=span {
                            z[(0, 0)] = z_soft[(0, 0)] + d0 as f64 * step;
                            z[(0, 1)] = z_soft[(0, 1)] + d1 as f64 * step;
                            z[(1, 0)] = z_soft[(1, 0)] + d2 as f64 * step;
                            z[(1, 1)] = z_soft[(1, 1)] + d3 as f64 * step;
                            let f = prox_objective(&z, &a, lambda);
                            if f < grid_min {
                                grid_min = f;
                            }
                        }
                    }
                }
            }
            // no grid point may beat the candidate, and the grid point at the
            // candidate itself must be the near-minimum
            assert!(grid_min >= f_soft - 1e-9, "grid found {grid_min} < {f_soft}");
            assert!(grid_min <= f_soft + 1e-12);
        }
    }

    #[test]
    fn gtt1_round_trip_is_bit_exact() {
        let x = random_tensor(4, 3, 5, 81);
        let mut buf = Vec::new();
        x.write_gtt1(&mut buf).unwrap();
        let back = GraphTensor::read_gtt1(buf.as_slice()).unwrap();
        assert_eq!(back.dims(), x.dims());
        assert_eq!(back.data(), x.data());
    }

    #[test]
    fn gtt1_rejects_corruption() {
        let x = random_tensor(2, 2, 2, 82);
        let mut buf = Vec::new();
        x.write_gtt1(&mut buf).unwrap();

        let truncated = &buf[..buf.len() - 3];
        assert!(matches!(
            GraphTensor::read_gtt1(truncated),
            Err(Error::Format(_))
        ));

        let mut bad_magic = buf.clone();
        bad_magic[0] = b'X';
        assert!(matches!(
            GraphTensor::read_gtt1(bad_magic.as_slice()),
            Err(Error::Format(_))
        ));

        let mut trailing = buf.clone();
        trailing.push(0);
        assert!(matches!(
            GraphTensor::read_gtt1(trailing.as_slice()),
            Err(Error::Format(_))
        ));

        let mut nan = buf.clone();
        let tail = nan.len() - 8;
        nan[tail..].copy_from_slice(&f64::NAN.to_le_bytes());
        assert!(matches!(
            GraphTensor::read_gtt1(nan.as_slice()),
            Err(Error::Format(_))
        ));
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(32))]

        #[test]
        fn prop_round_trip_and_norm_preservation(
            n1 in 1usize..6,
            n2 in 1usize..6,
            n3 in 2usize..16,
            seed in 0u64..1000,
        ) {
            let g = random_connected_graph(n3, seed);
            let t = spectral_transform(&g, TransformKind::Laplacian).unwrap();
            let x = random_tensor(n1, n2, n3, seed.wrapping_add(1));
            let spec = transform(&x, &t).unwrap();
            let back = inverse_transform(&spec, &t).unwrap();
            let scale = x.fro_norm().max(1e-12);
            prop_assert!((&back - &x).fro_norm() / scale < 1e-10);
            prop_assert!((spec.fro_norm() - x.fro_norm()).abs() / scale < 1e-10);
        }

        #[test]
        fn prop_gtnn_is_subadditive(
            seed in 0u64..500,
        ) {
            let g = random_connected_graph(5, seed);
            let t = spectral_transform(&g, TransformKind::Laplacian).unwrap();
            let x = random_tensor(4, 3, 5, seed.wrapping_add(7));
            let y = random_tensor(4, 3, 5, seed.wrapping_add(8));
            let sum = &x + &y;
            for mode in [GtnnMode::PaperFirstSlice, GtnnMode::AllSlices] {
                let lhs = gtnn(&sum, &t, mode).unwrap();
                let rhs = gtnn(&x, &t, mode).unwrap() + gtnn(&y, &t, mode).unwrap();
                prop_assert!(lhs <= rhs + 1e-9 * rhs.max(1.0));
            }
        }

        #[test]
        fn prop_singular_soft_is_non_expansive(
            seed in 0u64..500,
            lambda in 0.0f64..2.0,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = DMatrix::from_fn(4, 3, |_, _| rng.random_range(-2.0..2.0));
            let b = DMatrix::from_fn(4, 3, |_, _| rng.random_range(-2.0..2.0));
            let sa = singular_soft(&a, lambda).unwrap();
            let sb = singular_soft(&b, lambda).unwrap();
            let dist = (&a - &b).norm();
            prop_assert!((sa - sb).norm() <= dist + 1e-9 * dist.max(1.0));
        }
    }
}

