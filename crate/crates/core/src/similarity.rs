//! Similarity kernels over gradient embeddings.
//!
//! Raw cosine similarities in `[-1, 1]` are mapped affinely to `(1 + s) / 2`
//! so every kernel entry lies in `[0, 1]` and square self-kernels stay
//! positive semidefinite. Square kernels may carry a diagonal shift `ε`
//! (`regularization`) that keeps log-determinant blocks invertible.

use std::collections::HashSet;
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::{s, Array2, ArrayView1, ArrayView2, Axis};

use crate::error::{Error, Result};

/// Default diagonal shift for the log-determinant family.
pub const LOGDET_EPSILON: f64 = 1e-2;

const MAGIC: &[u8; 4] = b"SIMK";

/// Row-major embedding vectors with an external id per row.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingMatrix {
    data: Array2<f64>,
    ids: Vec<usize>,
}

impl EmbeddingMatrix {
    pub fn new(data: Array2<f64>, ids: Vec<usize>) -> Result<Self> {
        if ids.len() != data.nrows() {
            return Err(Error::DimensionMismatch(format!(
                "{} ids for {} rows",
                ids.len(),
                data.nrows()
            )));
        }
        let mut seen = HashSet::with_capacity(ids.len());
        for &id in &ids {
            if !seen.insert(id) {
                return Err(Error::config(format!("duplicate embedding id {id}")));
            }
        }
        for (r, row) in data.axis_iter(Axis(0)).enumerate() {
            if row.iter().any(|v| !v.is_finite()) {
                return Err(Error::NonFinite { row: ids[r] });
            }
        }
        let data = if data.is_standard_layout() {
            data
        } else {
            data.as_standard_layout().to_owned()
        };
        Ok(Self { data, ids })
    }

    /// Rows get ids `0..n`.
    pub fn from_rows(data: Array2<f64>) -> Result<Self> {
        let ids = (0..data.nrows()).collect();
        Self::new(data, ids)
    }

    pub fn rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn dim(&self) -> usize {
        self.data.ncols()
    }

    pub fn ids(&self) -> &[usize] {
        &self.ids
    }

    pub fn data(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn row(&self, i: usize) -> ArrayView1<'_, f64> {
        self.data.row(i)
    }

    /// Rows at `idx`, keeping their ids.
    pub fn select(&self, idx: &[usize]) -> Result<Self> {
        for &i in idx {
            if i >= self.rows() {
                return Err(Error::IndexOutOfRange {
                    index: i,
                    len: self.rows(),
                });
            }
        }
        Ok(Self {
            data: self.data.select(Axis(0), idx),
            ids: idx.iter().map(|&i| self.ids[i]).collect(),
        })
    }

    /// Unit-normalized copy. Rejects zero-norm rows.
    fn normalized(&self) -> Result<Array2<f64>> {
        let mut out = self.data.clone();
        for (r, mut row) in out.axis_iter_mut(Axis(0)).enumerate() {
            let norm = row.dot(&row).sqrt();
            if norm == 0.0 {
                return Err(Error::ZeroNormRow { id: self.ids[r] });
            }
            row.mapv_inplace(|v| v / norm);
        }
        Ok(out)
    }
}

/// Dense pairwise similarity matrix, square or rectangular.
#[derive(Debug, Clone, PartialEq)]
pub struct SimilarityKernel {
    data: Array2<f64>,
    symmetric: bool,
    row_ids: Vec<usize>,
    col_ids: Vec<usize>,
    regularization: f64,
}

impl SimilarityKernel {
    /// Wraps an explicit matrix. `symmetric` is verified, not trusted.
    pub fn from_dense(data: Array2<f64>, symmetric: bool) -> Result<Self> {
        let (r, c) = data.dim();
        if symmetric {
            if r != c {
                return Err(Error::NotSymmetric);
            }
            for i in 0..r {
                for j in 0..i {
                    if data[[i, j]] != data[[j, i]] {
                        return Err(Error::NotSymmetric);
                    }
                }
            }
        }
        Ok(Self {
            data: standard(data),
            symmetric,
            row_ids: (0..r).collect(),
            col_ids: (0..c).collect(),
            regularization: 0.0,
        })
    }

    pub fn shape(&self) -> (usize, usize) {
        self.data.dim()
    }

    pub fn n_rows(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_cols(&self) -> usize {
        self.data.ncols()
    }

    pub fn is_symmetric(&self) -> bool {
        self.symmetric
    }

    pub fn regularization(&self) -> f64 {
        self.regularization
    }

    pub fn row_ids(&self) -> &[usize] {
        &self.row_ids
    }

    pub fn col_ids(&self) -> &[usize] {
        &self.col_ids
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.data[[i, j]]
    }

    /// Contiguous row slice.
    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        let c = self.n_cols();
        let all = self.data.as_slice().expect("kernel is standard layout");
        &all[i * c..(i + 1) * c]
    }

    pub fn view(&self) -> ArrayView2<'_, f64> {
        self.data.view()
    }

    pub fn transpose(&self) -> SimilarityKernel {
        SimilarityKernel {
            data: self.data.t().as_standard_layout().to_owned(),
            symmetric: self.symmetric,
            row_ids: self.col_ids.clone(),
            col_ids: self.row_ids.clone(),
            regularization: self.regularization,
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut w = BufWriter::new(File::create(path)?);
        let mut header = [0u8; 16];
        header[..4].copy_from_slice(MAGIC);
        header[4..8].copy_from_slice(&(self.n_rows() as u32).to_le_bytes());
        header[8..12].copy_from_slice(&(self.n_cols() as u32).to_le_bytes());
        header[12] = u8::from(self.symmetric);
        w.write_all(&header)?;
        for v in self.data.iter() {
            w.write_all(&v.to_le_bytes())?;
        }
        w.flush()?;
        Ok(())
    }

    /// Reads a kernel written by [`SimilarityKernel::save`]. Ids are reset
    /// to `0..n` since the file does not store them.
    pub fn load(path: &Path) -> Result<Self> {
        let mut r = BufReader::new(File::open(path)?);
        let mut header = [0u8; 16];
        r.read_exact(&mut header)?;
        if &header[..4] != MAGIC {
            return Err(Error::config("not a SIMK kernel file"));
        }
        let rows = u32::from_le_bytes(header[4..8].try_into().unwrap()) as usize;
        let cols = u32::from_le_bytes(header[8..12].try_into().unwrap()) as usize;
        let symmetric = header[12] != 0;
        let mut buf = vec![0u8; rows * cols * 8];
        r.read_exact(&mut buf)?;
        let values: Vec<f64> = buf
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let data = Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| Error::DimensionMismatch(e.to_string()))?;
        let mut k = Self::from_dense(data, symmetric)?;
        if symmetric && rows > 0 {
            k.regularization = (k.data[[0, 0]] - 1.0).max(0.0);
        }
        Ok(k)
    }
}

fn standard(data: Array2<f64>) -> Array2<f64> {
    if data.is_standard_layout() {
        data
    } else {
        data.as_standard_layout().into_owned()
    }
}

/// Rescaled cosine kernel between the rows of `a` and the rows of `b`.
///
/// The result is marked symmetric when `a` and `b` are the same matrix.
pub fn cosine_kernel(a: &EmbeddingMatrix, b: &EmbeddingMatrix) -> Result<SimilarityKernel> {
    if a.dim() != b.dim() {
        return Err(Error::DimensionMismatch(format!(
            "embedding dims {} and {}",
            a.dim(),
            b.dim()
        )));
    }
    let same = std::ptr::eq(a, b);
    let an = a.normalized()?;
    let mut data = if same {
        gram(&an)
    } else {
        an.dot(&b.normalized()?.t())
    };
    data.mapv_inplace(|s| ((1.0 + s) * 0.5).clamp(0.0, 1.0));
    if same {
        data.diag_mut().fill(1.0);
    }
    Ok(SimilarityKernel {
        data: standard(data),
        symmetric: same,
        row_ids: a.ids.clone(),
        col_ids: b.ids.clone(),
        regularization: 0.0,
    })
}

/// `x xᵀ` computed one block row at a time on and above the diagonal, then
/// mirrored, so the result is exactly symmetric at half the multiply cost.
fn gram(x: &Array2<f64>) -> Array2<f64> {
    const BLOCK: usize = 256;
    let n = x.nrows();
    let mut out = Array2::<f64>::zeros((n, n));
    for start in (0..n).step_by(BLOCK) {
        let end = (start + BLOCK).min(n);
        let rows = x.slice(s![start..end, ..]);
        let cols = x.slice(s![start.., ..]);
        let mut target = out.slice_mut(s![start..end, start..]);
        ndarray::linalg::general_mat_mul(1.0, &rows, &cols.t(), 0.0, &mut target);
    }
    const TILE: usize = 64;
    for bi in (0..n).step_by(TILE) {
        for bj in (0..=bi).step_by(TILE) {
            for i in bi..(bi + TILE).min(n) {
                for j in bj..(bj + TILE).min(i) {
                    out[[i, j]] = out[[j, i]];
                }
            }
        }
    }
    out
}

/// Low-rank factors `F` with `F Fᵀ` equal to the rescaled cosine kernel:
/// row `i` is `[1, x̂_i] / √2` for the unit-normalized embedding `x̂_i`.
pub fn cosine_factors(a: &EmbeddingMatrix) -> Result<Array2<f64>> {
    let an = a.normalized()?;
    let half = std::f64::consts::FRAC_1_SQRT_2;
    let mut f = Array2::<f64>::zeros((a.rows(), a.dim() + 1));
    f.column_mut(0).fill(half);
    f.slice_mut(s![.., 1..]).assign(&(an * half));
    Ok(f)
}

/// Adds `eps` to the diagonal of a symmetric kernel.
pub fn regularize(k: &SimilarityKernel, eps: f64) -> Result<SimilarityKernel> {
    k.clone().into_regularized(eps)
}

impl SimilarityKernel {
    /// Consuming form of [`regularize`], avoiding a copy of the matrix.
    pub fn into_regularized(mut self, eps: f64) -> Result<Self> {
        if !self.symmetric {
            return Err(Error::NotSymmetric);
        }
        if !(eps >= 0.0) {
            return Err(Error::config(format!("regularization must be >= 0, got {eps}")));
        }
        if eps > 0.0 {
            self.data.diag_mut().mapv_inplace(|d| d + eps);
        }
        self.regularization += eps;
        Ok(self)
    }
}

/// The block `S[rows, cols]` with ids carried over.
pub fn submatrix(k: &SimilarityKernel, rows: &[usize], cols: &[usize]) -> Result<SimilarityKernel> {
    for &i in rows {
        if i >= k.n_rows() {
            return Err(Error::IndexOutOfRange {
                index: i,
                len: k.n_rows(),
            });
        }
    }
    for &j in cols {
        if j >= k.n_cols() {
            return Err(Error::IndexOutOfRange {
                index: j,
                len: k.n_cols(),
            });
        }
    }
    let data = standard(k.data.select(Axis(0), rows).select(Axis(1), cols));
    let symmetric = k.symmetric && rows == cols;
    Ok(SimilarityKernel {
        data,
        symmetric,
        row_ids: rows.iter().map(|&i| k.row_ids[i]).collect(),
        col_ids: cols.iter().map(|&j| k.col_ids[j]).collect(),
        regularization: if symmetric { k.regularization } else { 0.0 },
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::symmetric_eigenvalues;
    use ndarray::array;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_embeddings(n: usize, d: usize, seed: u64) -> EmbeddingMatrix {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let data = Array2::from_shape_fn((n, d), |_| rng.random_range(-1.0..1.0));
        EmbeddingMatrix::from_rows(data).unwrap()
    }

    #[test]
    fn blocked_gram_matches_plain_product() {
        let e = random_embeddings(601, 7, 11);
        let g = gram(&e.data().to_owned());
        let plain = e.data().dot(&e.data().t());
        for i in 0..601 {
            for j in 0..601 {
                assert!((g[[i, j]] - plain[[i, j]]).abs() < 1e-12);
                assert_eq!(g[[i, j]].to_bits(), g[[j, i]].to_bits());
            }
        }
    }

    #[test]
    fn cosine_examples() {
        let a = EmbeddingMatrix::from_rows(array![[1.0, 0.0], [0.0, 1.0], [-1.0, 0.0]]).unwrap();
        let k = cosine_kernel(&a, &a).unwrap();
        assert!(k.is_symmetric());
        assert_eq!(k.get(0, 0), 1.0);
        assert_eq!(k.get(0, 1), 0.5);
        assert_eq!(k.get(0, 2), 0.0);
    }

    #[test]
    fn cross_kernel_is_not_symmetric() {
        let a = random_embeddings(4, 3, 1);
        let b = a.clone();
        let k = cosine_kernel(&a, &b).unwrap();
        assert!(!k.is_symmetric());
        assert_eq!(k.shape(), (4, 4));
    }

    #[test]
    fn zero_row_rejected_with_id() {
        let a = EmbeddingMatrix::new(array![[1.0, 0.0], [0.0, 0.0]], vec![10, 42]).unwrap();
        match cosine_kernel(&a, &a) {
            Err(Error::ZeroNormRow { id }) => assert_eq!(id, 42),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dim_mismatch_rejected() {
        let a = random_embeddings(2, 3, 1);
        let b = random_embeddings(2, 4, 2);
        assert!(matches!(cosine_kernel(&a, &b), Err(Error::DimensionMismatch(_))));
    }

    #[test]
    fn embedding_invariants() {
        assert!(EmbeddingMatrix::new(array![[1.0], [2.0]], vec![1, 1]).is_err());
        assert!(EmbeddingMatrix::new(array![[1.0], [f64::NAN]], vec![1, 2]).is_err());
        assert!(EmbeddingMatrix::new(array![[1.0]], vec![1, 2]).is_err());
    }

    #[test]
    fn regularize_examples() {
        let k = SimilarityKernel::from_dense(array![[1.0, 0.5], [0.5, 1.0]], true).unwrap();
        let r = regularize(&k, 0.05).unwrap();
        assert!((r.get(0, 0) - 1.05).abs() < 1e-15);
        assert_eq!(r.get(0, 1), 0.5);
        assert_eq!(r.regularization(), 0.05);
        assert_eq!(regularize(&k, 0.0).unwrap(), k);
        let rect = SimilarityKernel::from_dense(array![[1.0, 0.5]], false).unwrap();
        assert!(matches!(regularize(&rect, 0.1), Err(Error::NotSymmetric)));
    }

    #[test]
    fn regularized_min_eigenvalue() {
        let a = random_embeddings(8, 3, 7);
        let k = regularize(&cosine_kernel(&a, &a).unwrap(), 1e-3).unwrap();
        let ev = symmetric_eigenvalues(k.view());
        assert!(ev[0] >= 1e-3 - 1e-9, "min eigenvalue {}", ev[0]);
    }

    #[test]
    fn psd_up_to_64() {
        for (n, seed) in [(5, 1), (16, 2), (64, 3)] {
            let a = random_embeddings(n, 4, seed);
            let k = cosine_kernel(&a, &a).unwrap();
            for i in 0..n {
                assert_eq!(k.get(i, i), 1.0);
                for j in 0..n {
                    assert_eq!(k.get(i, j), k.get(j, i));
                    assert!((0.0..=1.0).contains(&k.get(i, j)));
                }
            }
            let ev = symmetric_eigenvalues(k.view());
            assert!(ev[0] >= -1e-8, "n={n} min eigenvalue {}", ev[0]);
        }
    }

    #[test]
    fn submatrix_examples() {
        let k = SimilarityKernel::from_dense(
            array![[1.0, 0.5, 0.2], [0.5, 1.0, 0.4], [0.2, 0.4, 1.0]],
            true,
        )
        .unwrap();
        assert_eq!(submatrix(&k, &[0, 1, 2], &[0, 1, 2]).unwrap(), k);
        let b = submatrix(&k, &[0], &[2]).unwrap();
        assert_eq!(b.shape(), (1, 1));
        assert_eq!(b.get(0, 0), 0.2);
        assert!(!b.is_symmetric());
        let c = submatrix(&k, &[1, 2], &[1, 2]).unwrap();
        assert!(c.is_symmetric());
        assert_eq!(c.get(0, 1), 0.4);
        assert_eq!(c.row_ids(), &[1, 2]);
        assert!(matches!(
            submatrix(&k, &[3], &[0]),
            Err(Error::IndexOutOfRange { index: 3, .. })
        ));
    }

    #[test]
    fn factors_reproduce_kernel() {
        let a = random_embeddings(10, 5, 11);
        let k = cosine_kernel(&a, &a).unwrap();
        let f = cosine_factors(&a).unwrap();
        let g = f.dot(&f.t());
        for i in 0..10 {
            for j in 0..10 {
                assert!((g[[i, j]] - k.get(i, j)).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn kernel_file_roundtrip() {
        let a = random_embeddings(5, 3, 4);
        let k = regularize(&cosine_kernel(&a, &a).unwrap(), 0.25).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("k.simk");
        k.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..4], b"SIMK");
        assert_eq!(u32::from_le_bytes(bytes[4..8].try_into().unwrap()), 5);
        assert_eq!(bytes[12], 1);
        assert_eq!(bytes.len(), 16 + 25 * 8);
        let back = SimilarityKernel::load(&path).unwrap();
        assert_eq!(back.view(), k.view());
        assert!(back.is_symmetric());
        assert!((back.regularization() - 0.25).abs() < 1e-15);
    }
}
