//! Square complex CSR matrices and the dense-times-sparse kernels used by
//! the integrators.
//!
//! Dense operands are column-major `n×n` slices, matching the storage order
//! of `nalgebra::DMatrix`.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::collections::BTreeMap;

pub type C64 = Complex64;

pub const ZERO: C64 = C64::new(0.0, 0.0);
pub const ONE: C64 = C64::new(1.0, 0.0);
pub const I: C64 = C64::new(0.0, 1.0);

/// Square sparse matrix in compressed-sparse-row form.
#[derive(Clone, Debug, PartialEq)]
pub struct SparseMatrix {
    n: usize,
    indptr: Vec<usize>,
    indices: Vec<usize>,
    values: Vec<C64>,
}

impl SparseMatrix {
    pub fn zeros(n: usize) -> Self {
        Self { n, indptr: vec![0; n + 1], indices: Vec::new(), values: Vec::new() }
    }

    pub fn identity(n: usize) -> Self {
        Self::diagonal(&vec![ONE; n])
    }

    pub fn diagonal(diag: &[C64]) -> Self {
        Self::from_triplets(diag.len(), diag.iter().enumerate().map(|(i, &v)| (i, i, v)))
    }

    /// Builds from `(row, col, value)` triplets. Duplicates are summed and
    /// entries that sum to exactly zero are dropped.
    pub fn from_triplets<T>(n: usize, triplets: T) -> Self
    where
        T: IntoIterator<Item = (usize, usize, C64)>,
    {
        let mut rows: Vec<BTreeMap<usize, C64>> = vec![BTreeMap::new(); n];
        for (r, c, v) in triplets {
            assert!(r < n && c < n, "triplet ({r}, {c}) outside {n}x{n}");
            *rows[r].entry(c).or_insert(ZERO) += v;
        }
        let mut indptr = Vec::with_capacity(n + 1);
        let mut indices = Vec::new();
        let mut values = Vec::new();
        indptr.push(0);
        for row in rows {
            for (c, v) in row {
                if v != ZERO {
                    indices.push(c);
                    values.push(v);
                }
            }
            indptr.push(indices.len());
        }
        Self { n, indptr, indices, values }
    }

    pub fn from_dense(m: &DMatrix<C64>) -> Self {
        assert_eq!(m.nrows(), m.ncols(), "sparse matrices are square");
        let n = m.nrows();
        let triplets = (0..n)
            .flat_map(|r| (0..n).map(move |c| (r, c)))
            .map(|(r, c)| (r, c, m[(r, c)]));
        Self::from_triplets(n, triplets)
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.n, self.n);
        for (r, c, v) in self.iter() {
            m[(r, c)] = v;
        }
        m
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn nnz(&self) -> usize {
        self.values.len()
    }

    pub fn get(&self, r: usize, c: usize) -> C64 {
        let row = &self.indices[self.indptr[r]..self.indptr[r + 1]];
        match row.binary_search(&c) {
            Ok(k) => self.values[self.indptr[r] + k],
            Err(_) => ZERO,
        }
    }

    pub fn row(&self, r: usize) -> impl Iterator<Item = (usize, C64)> + '_ {
        let span = self.indptr[r]..self.indptr[r + 1];
        self.indices[span.clone()].iter().copied().zip(self.values[span].iter().copied())
    }

    pub fn iter(&self) -> impl Iterator<Item = (usize, usize, C64)> + '_ {
        (0..self.n).flat_map(move |r| self.row(r).map(move |(c, v)| (r, c, v)))
    }

    pub fn adjoint(&self) -> Self {
        Self::from_triplets(self.n, self.iter().map(|(r, c, v)| (c, r, v.conj())))
    }

    pub fn scale(&self, a: C64) -> Self {
        Self::from_triplets(self.n, self.iter().map(|(r, c, v)| (r, c, a * v)))
    }

    pub fn add(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self::from_triplets(self.n, self.iter().chain(other.iter()))
    }

    pub fn sub(&self, other: &Self) -> Self {
        self.add(&other.scale(-ONE))
    }

    pub fn matmul(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let triplets = self.iter().flat_map(|(r, k, a)| other.row(k).map(move |(c, b)| (r, c, a * b)));
        Self::from_triplets(self.n, triplets)
    }

    pub fn commutator(&self, other: &Self) -> Self {
        self.matmul(other).sub(&other.matmul(self))
    }

    /// Largest entry modulus, zero for an empty matrix.
    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    pub fn hermiticity_deviation(&self) -> f64 {
        self.sub(&self.adjoint()).max_abs()
    }

    pub fn mul_vec(&self, x: &[C64]) -> Vec<C64> {
        let mut y = vec![ZERO; self.n];
        self.mul_vec_acc(ONE, x, &mut y);
        y
    }

    /// `y += alpha * A x`
    pub fn mul_vec_acc(&self, alpha: C64, x: &[C64], y: &mut [C64]) {
        debug_assert_eq!(x.len(), self.n);
        for (r, yr) in y.iter_mut().enumerate() {
            let mut acc = ZERO;
            for (c, v) in self.row(r) {
                acc += v * x[c];
            }
            *yr += alpha * acc;
        }
    }

    /// `out += alpha * A·B` for column-major dense `B`.
    pub fn left_mul_acc(&self, alpha: C64, b: &[C64], out: &mut [C64]) {
        let n = self.n;
        debug_assert_eq!(b.len(), n * n);
        for j in 0..n {
            let col = &b[j * n..(j + 1) * n];
            let dst = &mut out[j * n..(j + 1) * n];
            self.mul_vec_acc(alpha, col, dst);
        }
    }

    /// `out += alpha * B·A` for column-major dense `B`.
    pub fn right_mul_acc(&self, alpha: C64, b: &[C64], out: &mut [C64]) {
        let n = self.n;
        for k in 0..n {
            let src = &b[k * n..(k + 1) * n];
            for (j, v) in self.row(k) {
                let a = alpha * v;
                let dst = &mut out[j * n..(j + 1) * n];
                for (d, s) in dst.iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
    }

    /// `out += alpha * B·A†` for column-major dense `B`.
    pub fn right_mul_adjoint_acc(&self, alpha: C64, b: &[C64], out: &mut [C64]) {
        let n = self.n;
        for j in 0..n {
            let dst_range = j * n..(j + 1) * n;
            for (k, v) in self.row(j) {
                let a = alpha * v.conj();
                let src = &b[k * n..(k + 1) * n];
                for (d, s) in out[dst_range.clone()].iter_mut().zip(src) {
                    *d += a * s;
                }
            }
        }
    }

    /// Principal submatrix on the given (sorted, unique) index set.
    pub fn restrict(&self, keep: &[usize]) -> Self {
        let mut position = vec![usize::MAX; self.n];
        for (new, &old) in keep.iter().enumerate() {
            position[old] = new;
        }
        let triplets = keep.iter().enumerate().flat_map(|(new_r, &old_r)| {
            let position = &position;
            self.row(old_r)
                .filter(move |(c, _)| position[*c] != usize::MAX)
                .map(move |(c, v)| (new_r, position[c], v))
        });
        Self::from_triplets(keep.len(), triplets.collect::<Vec<_>>())
    }

    /// Kronecker product `self ⊗ other`.
    pub fn kron(&self, other: &Self) -> Self {
        let m = other.n;
        let triplets = self.iter().flat_map(|(r1, c1, a)| {
            other.iter().map(move |(r2, c2, b)| (r1 * m + r2, c1 * m + c2, a * b))
        });
        Self::from_triplets(self.n * m, triplets.collect::<Vec<_>>())
    }
}

/// Largest entry-wise modulus of `M - M†`.
pub fn dense_hermiticity_deviation(m: &DMatrix<C64>) -> f64 {
    let n = m.nrows();
    let mut worst: f64 = 0.0;
    for j in 0..n {
        for i in 0..=j {
            worst = worst.max((m[(i, j)] - m[(j, i)].conj()).norm());
        }
    }
    worst
}
