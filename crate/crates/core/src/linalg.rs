//! Exact arithmetic in prime fields F_q and dense matrices over them.
//!
//! Field elements are plain `u64` values in `[0, q)`; every operation that
//! combines elements goes through a [`Field`] handle so reductions stay
//! explicit. Matrices are row-major and carry their field with them.

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum LinalgError {
    #[error("modulus {0} is not prime")]
    NonPrimeModulus(u64),
    #[error("zero has no multiplicative inverse")]
    ZeroInverse,
    #[error("matrix is not square ({rows}x{cols})")]
    NotSquare { rows: usize, cols: usize },
    #[error("matrix is singular")]
    SingularMatrix,
}

/// A prime field F_q. Construction rejects composite moduli, so a `Field`
/// value is proof that `q` is prime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Field {
    q: u64,
}

fn is_prime(n: u64) -> bool {
    if n < 2 {
        return false;
    }
    if n.is_multiple_of(2) {
        return n == 2;
    }
    let mut f = 3u64;
    while f.saturating_mul(f) <= n {
        if n.is_multiple_of(f) {
            return false;
        }
        f += 2;
    }
    true
}

impl Field {
    pub fn new(q: u64) -> Result<Self, LinalgError> {
        if !is_prime(q) {
            return Err(LinalgError::NonPrimeModulus(q));
        }
        Ok(Field { q })
    }

    #[inline]
    pub fn order(&self) -> u64 {
        self.q
    }

    /// Reduces an arbitrary integer into `[0, q)`.
    #[inline]
    pub fn reduce(&self, a: u64) -> u64 {
        a % self.q
    }

    #[inline]
    pub fn add(&self, a: u64, b: u64) -> u64 {
        let s = a + b;
        if s >= self.q {
            s - self.q
        } else {
            s
        }
    }

    #[inline]
    pub fn sub(&self, a: u64, b: u64) -> u64 {
        if a >= b {
            a - b
        } else {
            a + self.q - b
        }
    }

    #[inline]
    pub fn neg(&self, a: u64) -> u64 {
        if a == 0 {
            0
        } else {
            self.q - a
        }
    }

    #[inline]
    pub fn mul(&self, a: u64, b: u64) -> u64 {
        ((a as u128 * b as u128) % self.q as u128) as u64
    }

    /// Multiplicative inverse via the extended Euclidean algorithm.
    pub fn inv(&self, a: u64) -> Result<u64, LinalgError> {
        if a == 0 {
            return Err(LinalgError::ZeroInverse);
        }
        let (mut t, mut new_t) = (0i128, 1i128);
        let (mut r, mut new_r) = (self.q as i128, a as i128);
        while new_r != 0 {
            let quotient = r / new_r;
            (t, new_t) = (new_t, t - quotient * new_t);
            (r, new_r) = (new_r, r - quotient * new_r);
        }
        debug_assert_eq!(r, 1, "element of a prime field must be a unit");
        Ok(t.rem_euclid(self.q as i128) as u64)
    }
}

/// A dense matrix over a prime field, stored row-major.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    field: Field,
    data: Vec<u64>,
}

impl Matrix {
    pub fn zero(field: Field, rows: usize, cols: usize) -> Self {
        Matrix {
            rows,
            cols,
            field,
            data: vec![0; rows * cols],
        }
    }

    pub fn identity(field: Field, n: usize) -> Self {
        let mut m = Matrix::zero(field, n, n);
        for i in 0..n {
            m.data[i * n + i] = 1;
        }
        m
    }

    /// Builds a matrix from explicit rows. Entries must already lie in `[0, q)`.
    pub fn from_rows(field: Field, rows: &[Vec<u64>]) -> Self {
        let nrows = rows.len();
        let ncols = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(nrows * ncols);
        for row in rows {
            assert_eq!(row.len(), ncols, "ragged rows");
            for &v in row {
                assert!(
                    v < field.order(),
                    "entry {v} out of range for F_{}",
                    field.order()
                );
                data.push(v);
            }
        }
        Matrix {
            rows: nrows,
            cols: ncols,
            field,
            data,
        }
    }

    #[inline]
    pub fn rows(&self) -> usize {
        self.rows
    }

    #[inline]
    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn field(&self) -> Field {
        self.field
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> u64 {
        debug_assert!(i < self.rows && j < self.cols);
        self.data[i * self.cols + j]
    }

    #[inline]
    pub fn set(&mut self, i: usize, j: usize, v: u64) {
        debug_assert!(i < self.rows && j < self.cols);
        debug_assert!(v < self.field.order());
        self.data[i * self.cols + j] = v;
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn transpose(&self) -> Matrix {
        let mut t = Matrix::zero(self.field, self.cols, self.rows);
        for i in 0..self.rows {
            for j in 0..self.cols {
                t.data[j * self.rows + i] = self.data[i * self.cols + j];
            }
        }
        t
    }

    pub fn mat_mul(&self, other: &Matrix) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "dimension mismatch in matrix product"
        );
        assert_eq!(self.field, other.field);
        let f = self.field;
        let mut out = Matrix::zero(f, self.rows, other.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self.data[i * self.cols + k];
                if a == 0 {
                    continue;
                }
                for j in 0..other.cols {
                    let b = other.data[k * other.cols + j];
                    if b != 0 {
                        let idx = i * other.cols + j;
                        out.data[idx] = f.add(out.data[idx], f.mul(a, b));
                    }
                }
            }
        }
        out
    }

    /// Copies the `size`-by-`size` leading principal block.
    pub fn leading_block(&self, size: usize) -> Matrix {
        assert!(size <= self.rows && size <= self.cols);
        let mut out = Matrix::zero(self.field, size, size);
        for i in 0..size {
            let src = i * self.cols;
            out.data[i * size..(i + 1) * size].copy_from_slice(&self.data[src..src + size]);
        }
        out
    }

    /// Extracts the submatrix with the given (ascending) row and column indices.
    pub fn submatrix(&self, row_idx: &[usize], col_idx: &[usize]) -> Matrix {
        let mut out = Matrix::zero(self.field, row_idx.len(), col_idx.len());
        for (a, &i) in row_idx.iter().enumerate() {
            for (b, &j) in col_idx.iter().enumerate() {
                out.data[a * col_idx.len() + b] = self.get(i, j);
            }
        }
        out
    }

    /// Determinant by Gaussian elimination with partial pivoting on the first
    /// nonzero pivot in column order. Exact in F_q.
    pub fn det(&self) -> Result<u64, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let f = self.field;
        let mut w = self.data.clone();
        let mut det = 1u64;
        for col in 0..n {
            let pivot_row = match (col..n).find(|&r| w[r * n + col] != 0) {
                Some(r) => r,
                None => return Ok(0),
            };
            if pivot_row != col {
                for j in 0..n {
                    w.swap(pivot_row * n + j, col * n + j);
                }
                det = f.neg(det);
            }
            let pivot = w[col * n + col];
            det = f.mul(det, pivot);
            let pivot_inv = f.inv(pivot)?;
            for r in (col + 1)..n {
                let factor = w[r * n + col];
                if factor == 0 {
                    continue;
                }
                let scale = f.mul(factor, pivot_inv);
                w[r * n + col] = 0;
                for j in (col + 1)..n {
                    let sub = f.mul(scale, w[col * n + j]);
                    w[r * n + j] = f.sub(w[r * n + j], sub);
                }
            }
        }
        Ok(det)
    }

    /// Rank over F_q by forward elimination.
    pub fn rank(&self) -> usize {
        let f = self.field;
        let (nr, nc) = (self.rows, self.cols);
        let mut w = self.data.clone();
        let mut rank = 0usize;
        for col in 0..nc {
            if rank == nr {
                break;
            }
            let pivot_row = match (rank..nr).find(|&r| w[r * nc + col] != 0) {
                Some(r) => r,
                None => continue,
            };
            if pivot_row != rank {
                for j in 0..nc {
                    w.swap(pivot_row * nc + j, rank * nc + j);
                }
            }
            let pivot_inv = f.inv(w[rank * nc + col]).expect("pivot is nonzero");
            for r in (rank + 1)..nr {
                let factor = w[r * nc + col];
                if factor == 0 {
                    continue;
                }
                let scale = f.mul(factor, pivot_inv);
                for j in col..nc {
                    let sub = f.mul(scale, w[rank * nc + j]);
                    w[r * nc + j] = f.sub(w[r * nc + j], sub);
                }
            }
            rank += 1;
        }
        rank
    }

    /// Inverse by Gauss-Jordan elimination on the augmented matrix.
    pub fn inverse(&self) -> Result<Matrix, LinalgError> {
        if !self.is_square() {
            return Err(LinalgError::NotSquare {
                rows: self.rows,
                cols: self.cols,
            });
        }
        let n = self.rows;
        let f = self.field;
        let mut w = self.data.clone();
        let mut inv = Matrix::identity(f, n).data;
        for col in 0..n {
            let pivot_row = match (col..n).find(|&r| w[r * n + col] != 0) {
                Some(r) => r,
                None => return Err(LinalgError::SingularMatrix),
            };
            if pivot_row != col {
                for j in 0..n {
                    w.swap(pivot_row * n + j, col * n + j);
                    inv.swap(pivot_row * n + j, col * n + j);
                }
            }
            let pivot_inv = f.inv(w[col * n + col])?;
            for j in 0..n {
                w[col * n + j] = f.mul(w[col * n + j], pivot_inv);
                inv[col * n + j] = f.mul(inv[col * n + j], pivot_inv);
            }
            for r in 0..n {
                if r == col {
                    continue;
                }
                let factor = w[r * n + col];
                if factor == 0 {
                    continue;
                }
                for j in 0..n {
                    let sub = f.mul(factor, w[col * n + j]);
                    w[r * n + j] = f.sub(w[r * n + j], sub);
                    let sub = f.mul(factor, inv[col * n + j]);
                    inv[r * n + j] = f.sub(inv[r * n + j], sub);
                }
            }
        }
        Ok(Matrix {
            rows: n,
            cols: n,
            field: f,
            data: inv,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    /// Independent determinant oracle: Laplace cofactor expansion along the
    /// first row. Exponential, only for small test matrices.
    pub fn det_cofactor(m: &Matrix) -> u64 {
        assert!(m.is_square());
        let n = m.rows();
        let f = m.field();
        if n == 0 {
            return 1;
        }
        if n == 1 {
            return m.get(0, 0);
        }
        let mut acc = 0u64;
        for j in 0..n {
            let a = m.get(0, j);
            if a == 0 {
                continue;
            }
            let rows: Vec<usize> = (1..n).collect();
            let cols: Vec<usize> = (0..n).filter(|&c| c != j).collect();
            let minor = det_cofactor(&m.submatrix(&rows, &cols));
            let term = f.mul(a, minor);
            acc = if j % 2 == 0 {
                f.add(acc, term)
            } else {
                f.sub(acc, term)
            };
        }
        acc
    }

    fn random_matrix(f: Field, n: usize, rng: &mut ChaCha8Rng) -> Matrix {
        let mut m = Matrix::zero(f, n, n);
        for i in 0..n {
            for j in 0..n {
                m.set(i, j, rng.random_range(0..f.order()));
            }
        }
        m
    }

    #[test]
    fn field_construction() {
        assert_eq!(Field::new(2).unwrap().order(), 2);
        assert_eq!(Field::new(29).unwrap().order(), 29);
        assert_eq!(Field::new(4), Err(LinalgError::NonPrimeModulus(4)));
        assert_eq!(Field::new(1), Err(LinalgError::NonPrimeModulus(1)));
        assert_eq!(Field::new(0), Err(LinalgError::NonPrimeModulus(0)));
    }

    #[test]
    fn inverses() {
        let f7 = Field::new(7).unwrap();
        assert_eq!(f7.inv(1).unwrap(), 1);
        assert_eq!(f7.inv(3).unwrap(), 5);
        let f5 = Field::new(5).unwrap();
        assert_eq!(f5.inv(0), Err(LinalgError::ZeroInverse));
    }

    #[test]
    fn inv_roundtrip_all_small_fields() {
        for q in [2, 3, 5, 7, 11, 13] {
            let f = Field::new(q).unwrap();
            for a in 1..q {
                let b = f.inv(a).unwrap();
                assert_eq!(f.mul(a, b), 1);
                assert_eq!(f.inv(b).unwrap(), a);
            }
        }
    }

    #[test]
    fn det_examples() {
        let f5 = Field::new(5).unwrap();
        assert_eq!(Matrix::identity(f5, 3).det().unwrap(), 1);

        let f2 = Field::new(2).unwrap();
        let equal_rows = Matrix::from_rows(f2, &[vec![1, 1], vec![1, 1]]);
        assert_eq!(equal_rows.det().unwrap(), 0);

        // Oracle check against cofactor expansion; this instance happens to
        // be singular mod 5 (det = 25 over the integers).
        let m = Matrix::from_rows(f5, &[vec![1, 2, 0], vec![0, 1, 3], vec![4, 0, 1]]);
        assert_eq!(det_cofactor(&m), 0);
        assert_eq!(m.det().unwrap(), 0);
    }

    #[test]
    fn det_not_square() {
        let f2 = Field::new(2).unwrap();
        let m = Matrix::zero(f2, 2, 3);
        assert_eq!(m.det(), Err(LinalgError::NotSquare { rows: 2, cols: 3 }));
    }

    #[test]
    fn det_matches_cofactor_oracle() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        for q in [2u64, 3, 5, 7] {
            let f = Field::new(q).unwrap();
            for n in 1..=4 {
                for _ in 0..25 {
                    let m = random_matrix(f, n, &mut rng);
                    assert_eq!(m.det().unwrap(), det_cofactor(&m));
                }
            }
        }
    }

    #[test]
    fn det_is_multiplicative() {
        let mut rng = ChaCha8Rng::seed_from_u64(12);
        let mut checked = 0;
        for q in [2u64, 3, 5] {
            let f = Field::new(q).unwrap();
            for n in 1..=5 {
                for _ in 0..10 {
                    let a = random_matrix(f, n, &mut rng);
                    let b = random_matrix(f, n, &mut rng);
                    let lhs = a.mat_mul(&b).det().unwrap();
                    let rhs = f.mul(a.det().unwrap(), b.det().unwrap());
                    assert_eq!(lhs, rhs);
                    checked += 1;
                }
            }
        }
        assert!(checked >= 100);
    }

    #[test]
    fn partitioned_determinant_identity() {
        // det [[P,U],[V,W]] = det P * det(W - V P^-1 U) whenever P is
        // nonsingular.
        let mut rng = ChaCha8Rng::seed_from_u64(13);
        let mut checked = 0;
        for q in [3u64, 5, 7] {
            let f = Field::new(q).unwrap();
            for (np, nw) in [(1, 1), (2, 1), (2, 2), (3, 2)] {
                for _ in 0..20 {
                    let p = random_matrix(f, np, &mut rng);
                    if p.det().unwrap() == 0 {
                        continue;
                    }
                    let n = np + nw;
                    let mut m = Matrix::zero(f, n, n);
                    for i in 0..n {
                        for j in 0..n {
                            if i < np && j < np {
                                m.set(i, j, p.get(i, j));
                            } else {
                                m.set(i, j, rng.random_range(0..q));
                            }
                        }
                    }
                    let rows_top: Vec<usize> = (0..np).collect();
                    let rows_bot: Vec<usize> = (np..n).collect();
                    let u = m.submatrix(&rows_top, &rows_bot);
                    let v = m.submatrix(&rows_bot, &rows_top);
                    let w = m.submatrix(&rows_bot, &rows_bot);
                    let correction = v.mat_mul(&p.inverse().unwrap()).mat_mul(&u);
                    let mut schur = w.clone();
                    for i in 0..nw {
                        for j in 0..nw {
                            schur.set(i, j, f.sub(w.get(i, j), correction.get(i, j)));
                        }
                    }
                    let lhs = m.det().unwrap();
                    let rhs = f.mul(p.det().unwrap(), schur.det().unwrap());
                    assert_eq!(lhs, rhs);
                    checked += 1;
                }
            }
        }
        assert!(checked >= 100);
    }

    #[test]
    fn det_is_affine_in_each_entry() {
        // Fix all entries but one; det as a function of the free entry must be
        // affine. Checked by three-point collinearity in F_q.
        let mut rng = ChaCha8Rng::seed_from_u64(14);
        for q in [3u64, 5, 7] {
            let f = Field::new(q).unwrap();
            for _ in 0..20 {
                let n = rng.random_range(2..=4);
                let mut m = random_matrix(f, n, &mut rng);
                let (i, j) = (rng.random_range(0..n), rng.random_range(0..n));
                let eval = |m: &mut Matrix, t: u64| {
                    m.set(i, j, t);
                    m.det().unwrap()
                };
                let (t0, t1, t2) = (0, 1, 2);
                let (f0, f1, f2) = (eval(&mut m, t0), eval(&mut m, t1), eval(&mut m, t2));
                let lhs = f.mul(f.sub(f1, f0), f.sub(t2, t0));
                let rhs = f.mul(f.sub(f2, f0), f.sub(t1, t0));
                assert_eq!(lhs, rhs);
            }
        }
    }

    #[test]
    fn inverse_examples() {
        let f2 = Field::new(2).unwrap();
        assert_eq!(
            Matrix::identity(f2, 3).inverse().unwrap(),
            Matrix::identity(f2, 3)
        );
        let unipotent = Matrix::from_rows(f2, &[vec![1, 1], vec![0, 1]]);
        assert_eq!(unipotent.inverse().unwrap(), unipotent);

        let f7 = Field::new(7).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(15);
        let mut found = 0;
        while found < 5 {
            let m = random_matrix(f7, 4, &mut rng);
            if m.det().unwrap() == 0 {
                continue;
            }
            let inv = m.inverse().unwrap();
            assert_eq!(m.mat_mul(&inv), Matrix::identity(f7, 4));
            assert_eq!(inv.mat_mul(&m), Matrix::identity(f7, 4));
            found += 1;
        }

        let f2 = Field::new(2).unwrap();
        let singular = Matrix::from_rows(f2, &[vec![1, 1], vec![1, 1]]);
        assert_eq!(singular.inverse(), Err(LinalgError::SingularMatrix));
    }

    #[test]
    fn rank_examples() {
        let f5 = Field::new(5).unwrap();
        assert_eq!(Matrix::zero(f5, 2, 3).rank(), 0);
        assert_eq!(Matrix::identity(f5, 4).rank(), 4);
        let m = Matrix::from_rows(f5, &[vec![1, 2], vec![2, 4]]);
        assert_eq!(m.rank(), 1);
    }

    #[test]
    fn rank_full_iff_nonzero_det() {
        let mut rng = ChaCha8Rng::seed_from_u64(16);
        for q in [2u64, 5] {
            let f = Field::new(q).unwrap();
            for _ in 0..50 {
                let n = rng.random_range(1..=5);
                let m = random_matrix(f, n, &mut rng);
                assert_eq!(m.rank() == n, m.det().unwrap() != 0);
            }
        }
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        fn small_prime() -> impl Strategy<Value = u64> {
            prop::sample::select(vec![2u64, 3, 5, 7, 11, 13, 29])
        }

        proptest! {
            #[test]
            fn field_axioms(q in small_prime(), a in 0u64..1000, b in 0u64..1000, c in 0u64..1000) {
                let f = Field::new(q).unwrap();
                let (a, b, c) = (f.reduce(a), f.reduce(b), f.reduce(c));
                prop_assert_eq!(f.add(a, b), f.add(b, a));
                prop_assert_eq!(f.mul(a, b), f.mul(b, a));
                prop_assert_eq!(f.mul(a, f.add(b, c)), f.add(f.mul(a, b), f.mul(a, c)));
                prop_assert_eq!(f.sub(f.add(a, b), b), a);
                prop_assert_eq!(f.add(a, f.neg(a)), 0);
            }

            #[test]
            fn inverse_is_an_involution(q in small_prime(), a in 1u64..1000) {
                let f = Field::new(q).unwrap();
                let a = f.reduce(a);
                prop_assume!(a != 0);
                let inv = f.inv(a).unwrap();
                prop_assert_eq!(f.mul(a, inv), 1);
                prop_assert_eq!(f.inv(inv).unwrap(), a);
            }

            #[test]
            fn matrix_inverse_roundtrip(q in small_prime(), seed in 0u64..1000) {
                let f = Field::new(q).unwrap();
                let mut rng = ChaCha8Rng::seed_from_u64(seed);
                let n = rng.random_range(1..=4);
                let m = random_matrix(f, n, &mut rng);
                prop_assume!(m.det().unwrap() != 0);
                let inv = m.inverse().unwrap();
                prop_assert_eq!(inv.inverse().unwrap(), m.clone());
                prop_assert_eq!(m.mat_mul(&inv), Matrix::identity(f, n));
            }
        }
    }
}
