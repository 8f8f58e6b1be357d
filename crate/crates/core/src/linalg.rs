//! Dense row-major linear algebra: just enough for the forward pass,
//! Jacobian assembly and the damped normal equations of the trainer.

use crate::error::{Error, Result};

/// Relative tolerance for the symmetry check in [`solve_spd`].
pub const SYMMETRY_TOL: f64 = 1e-9;

/// Dense real matrix in row-major order. Entries are always finite.
#[derive(Clone, Debug, PartialEq)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    /// Builds a matrix from row-major data.
    pub fn new(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if rows == 0 || cols == 0 {
            return Err(Error::Shape(format!("matrix dimensions must be positive, got {rows}x{cols}")));
        }
        if data.len() != rows * cols {
            return Err(Error::Shape(format!(
                "{rows}x{cols} matrix needs {} entries, got {}",
                rows * cols,
                data.len()
            )));
        }
        if let Some(k) = data.iter().position(|v| !v.is_finite()) {
            return Err(Error::NonFinite(format!("matrix entry ({}, {})", k / cols, k % cols)));
        }
        Ok(Matrix { rows, cols, data })
    }

    /// Builds a matrix from a slice of equally long rows.
    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let cols = rows.first().map_or(0, |r| r.as_ref().len());
        if let Some((i, r)) = rows.iter().enumerate().find(|(_, r)| r.as_ref().len() != cols) {
            return Err(Error::Shape(format!(
                "row {i} has {} entries, expected {cols}",
                r.as_ref().len()
            )));
        }
        let data = rows.iter().flat_map(|r| r.as_ref().iter().copied()).collect();
        Matrix::new(rows.len(), cols, data)
    }

    /// # Panics
    /// If either dimension is zero.
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dimensions must be positive");
        Matrix {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    /// # Panics
    /// If `n` is zero.
    pub fn identity(n: usize) -> Self {
        let mut m = Matrix::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn get(&self, row: usize, col: usize) -> f64 {
        self.data[row * self.cols + col]
    }

    pub fn row(&self, row: usize) -> &[f64] {
        &self.data[row * self.cols..(row + 1) * self.cols]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    /// Frobenius norm.
    pub fn norm(&self) -> f64 {
        norm(&self.data)
    }

    pub fn matmul(&self, other: &Matrix) -> Result<Matrix> {
        if self.cols != other.rows {
            return Err(Error::Shape(format!(
                "cannot multiply left operand {}x{} by right operand {}x{}",
                self.rows, self.cols, other.rows, other.cols
            )));
        }
        let mut out = vec![0.0; self.rows * other.cols];
        for i in 0..self.rows {
            let out_row = &mut out[i * other.cols..(i + 1) * other.cols];
            for (k, &a) in self.row(i).iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                for (o, &b) in out_row.iter_mut().zip(other.row(k)) {
                    *o += a * b;
                }
            }
        }
        Ok(Matrix {
            rows: self.rows,
            cols: other.cols,
            data: out,
        })
    }

    pub fn transpose(&self) -> Matrix {
        let mut data = Vec::with_capacity(self.data.len());
        for j in 0..self.cols {
            data.extend((0..self.rows).map(|i| self.get(i, j)));
        }
        Matrix {
            rows: self.cols,
            cols: self.rows,
            data,
        }
    }

    /// `A·v`
    pub fn mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.cols {
            return Err(Error::Shape(format!(
                "cannot multiply {}x{} matrix by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        Ok((0..self.rows).map(|i| dot(self.row(i), v)).collect())
    }

    /// `Aᵀ·v`
    pub fn tr_mul_vec(&self, v: &[f64]) -> Result<Vec<f64>> {
        if v.len() != self.rows {
            return Err(Error::Shape(format!(
                "cannot multiply transpose of {}x{} matrix by vector of length {}",
                self.rows,
                self.cols,
                v.len()
            )));
        }
        let mut out = vec![0.0; self.cols];
        for (i, &vi) in v.iter().enumerate() {
            for (o, &a) in out.iter_mut().zip(self.row(i)) {
                *o += a * vi;
            }
        }
        Ok(out)
    }

    /// `AᵀA`, computed on the upper triangle and mirrored so the result is
    /// exactly symmetric.
    pub fn gram(&self) -> Matrix {
        let n = self.cols;
        let mut g = vec![0.0; n * n];
        for r in 0..self.rows {
            let row = self.row(r);
            for (i, &a) in row.iter().enumerate() {
                if a == 0.0 {
                    continue;
                }
                let g_row = &mut g[i * n..(i + 1) * n];
                for j in i..n {
                    g_row[j] += a * row[j];
                }
            }
        }
        for i in 0..n {
            for j in 0..i {
                g[i * n + j] = g[j * n + i];
            }
        }
        Matrix {
            rows: n,
            cols: n,
            data: g,
        }
    }

    /// Returns `A + shift·I`.
    pub fn add_diagonal(&self, shift: f64) -> Result<Matrix> {
        if self.rows != self.cols {
            return Err(Error::Shape(format!(
                "diagonal shift needs a square matrix, got {}x{}",
                self.rows, self.cols
            )));
        }
        let mut m = self.clone();
        for i in 0..self.rows {
            m.data[i * self.cols + i] += shift;
        }
        if m.data.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("shifted matrix".into()));
        }
        Ok(m)
    }
}

pub fn matmul(a: &Matrix, b: &Matrix) -> Result<Matrix> {
    a.matmul(b)
}

pub fn transpose(a: &Matrix) -> Matrix {
    a.transpose()
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// Euclidean norm.
pub fn norm(v: &[f64]) -> f64 {
    v.iter().map(|x| x * x).sum::<f64>().sqrt()
}

/// Lower-triangular Cholesky factor of a symmetric positive-definite matrix.
#[derive(Clone, Debug)]
pub struct Cholesky {
    n: usize,
    lower: Vec<f64>,
}

impl Cholesky {
    pub fn factor(a: &Matrix) -> Result<Self> {
        let n = a.rows;
        if a.cols != n {
            return Err(Error::Shape(format!(
                "Cholesky needs a square matrix, got {}x{}",
                a.rows, a.cols
            )));
        }
        check_symmetric(a)?;

        let mut l = vec![0.0; n * n];
        for j in 0..n {
            let lj = &l[j * n..j * n + j];
            let d = a.get(j, j) - dot(lj, lj);
            if !(d > 0.0) || !d.is_finite() {
                return Err(Error::NotPositiveDefinite { pivot: j, value: d });
            }
            let djj = d.sqrt();
            l[j * n + j] = djj;
            for i in j + 1..n {
                let s = a.get(i, j) - dot(&l[i * n..i * n + j], &l[j * n..j * n + j]);
                l[i * n + j] = s / djj;
            }
        }
        Ok(Cholesky { n, lower: l })
    }

    pub fn solve(&self, b: &[f64]) -> Result<Vec<f64>> {
        let n = self.n;
        if b.len() != n {
            return Err(Error::Shape(format!(
                "right-hand side has length {}, system has order {n}",
                b.len()
            )));
        }
        // L y = b
        let mut y = b.to_vec();
        for i in 0..n {
            let s = dot(&self.lower[i * n..i * n + i], &y[..i]);
            y[i] = (y[i] - s) / self.lower[i * n + i];
        }
        // Lᵀ x = y
        for i in (0..n).rev() {
            let mut s = y[i];
            for k in i + 1..n {
                s -= self.lower[k * n + i] * y[k];
            }
            y[i] = s / self.lower[i * n + i];
        }
        if y.iter().any(|v| !v.is_finite()) {
            return Err(Error::NonFinite("Cholesky solution".into()));
        }
        Ok(y)
    }
}

fn check_symmetric(a: &Matrix) -> Result<()> {
    let scale = a.data.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tol = SYMMETRY_TOL * scale;
    for i in 0..a.rows {
        for j in 0..i {
            let diff = (a.get(i, j) - a.get(j, i)).abs();
            if diff > tol {
                return Err(Error::NotSymmetric { row: i, col: j, diff });
            }
        }
    }
    Ok(())
}

/// Solves `A·x = b` for symmetric positive-definite `A` by Cholesky
/// factorization. A non-positive pivot is reported, never patched.
pub fn solve_spd(a: &Matrix, b: &[f64]) -> Result<Vec<f64>> {
    Cholesky::factor(a)?.solve(b)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn random_matrix(rng: &mut ChaCha8Rng, rows: usize, cols: usize) -> Matrix {
        let data = (0..rows * cols).map(|_| rng.random_range(-1.0..1.0)).collect();
        Matrix::new(rows, cols, data).unwrap()
    }

    #[test]
    fn identity_times_a_is_a() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a = random_matrix(&mut rng, 3, 5);
        assert_eq!(Matrix::identity(3).matmul(&a).unwrap(), a);
    }

    #[test]
    fn zeros_times_a_is_zeros() {
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let a = random_matrix(&mut rng, 3, 4);
        assert_eq!(Matrix::zeros(2, 3).matmul(&a).unwrap(), Matrix::zeros(2, 4));
    }

    #[test]
    fn hand_multiplied_product() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [3.0, 4.0]]).unwrap();
        let b = Matrix::from_rows(&[[5.0], [6.0]]).unwrap();
        let c = a.matmul(&b).unwrap();
        assert_eq!(c, Matrix::from_rows(&[[17.0], [39.0]]).unwrap());
    }

    #[test]
    fn dimension_mismatch_names_both_operands() {
        let err = Matrix::zeros(2, 3).matmul(&Matrix::zeros(2, 3)).unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("2x3") && msg.contains("left") && msg.contains("right"), "{msg}");
    }

    #[test]
    fn rejects_non_finite_and_bad_lengths() {
        assert!(matches!(Matrix::new(1, 2, vec![1.0, f64::NAN]), Err(Error::NonFinite(_))));
        assert!(matches!(Matrix::new(2, 2, vec![1.0; 3]), Err(Error::Shape(_))));
        assert!(matches!(Matrix::new(0, 2, vec![]), Err(Error::Shape(_))));
    }

    #[test]
    fn transpose_cases() {
        assert_eq!(Matrix::identity(4).transpose(), Matrix::identity(4));
        let row = Matrix::from_rows(&[[1.0, 2.0, 3.0]]).unwrap();
        assert_eq!(row.transpose(), Matrix::from_rows(&[[1.0], [2.0], [3.0]]).unwrap());
    }

    #[test]
    fn solve_trivial_systems() {
        assert_eq!(solve_spd(&Matrix::identity(2), &[3.0, 4.0]).unwrap(), vec![3.0, 4.0]);
        let d = Matrix::from_rows(&[[2.0, 0.0], [0.0, 4.0]]).unwrap();
        let x = solve_spd(&d, &[2.0, 8.0]).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-15 && (x[1] - 2.0).abs() < 1e-15, "{x:?}");
    }

    #[test]
    fn indefinite_matrix_is_reported() {
        let a = Matrix::from_rows(&[[1.0, 2.0], [2.0, 1.0]]).unwrap();
        assert!(matches!(solve_spd(&a, &[1.0, 1.0]), Err(Error::NotPositiveDefinite { pivot: 1, .. })));
        let z = Matrix::zeros(3, 3);
        assert!(matches!(solve_spd(&z, &[0.0; 3]), Err(Error::NotPositiveDefinite { pivot: 0, .. })));
    }

    #[test]
    fn asymmetric_matrix_is_rejected() {
        let a = Matrix::from_rows(&[[4.0, 1.0], [0.0, 4.0]]).unwrap();
        assert!(matches!(solve_spd(&a, &[1.0, 1.0]), Err(Error::NotSymmetric { .. })));
    }

    #[test]
    fn gram_matches_explicit_product() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let j = random_matrix(&mut rng, 7, 4);
        let explicit = j.transpose().matmul(&j).unwrap();
        let g = j.gram();
        for (a, b) in g.as_slice().iter().zip(explicit.as_slice()) {
            assert!((a - b).abs() <= 1e-14, "{a} vs {b}");
        }
        assert_eq!(g, g.transpose());
    }

    #[test]
    fn random_spd_residual_up_to_200() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for &n in &[1usize, 2, 5, 17, 60, 200] {
            let m = random_matrix(&mut rng, n, n);
            let a = m.gram().add_diagonal(1.0).unwrap();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-10.0..10.0)).collect();
            let x = solve_spd(&a, &b).unwrap();
            let ax = a.mul_vec(&x).unwrap();
            let resid: Vec<f64> = ax.iter().zip(&b).map(|(p, q)| p - q).collect();
            assert!(norm(&resid) <= 1e-8 * norm(&b), "n={n}: residual {}", norm(&resid));
        }
    }

    proptest! {
        #[test]
        fn transpose_is_an_involution(rows in 1usize..8, cols in 1usize..8, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, rows, cols);
            prop_assert_eq!(a.transpose().transpose(), a);
        }

        #[test]
        fn matmul_is_associative(m in 1usize..6, k in 1usize..6, l in 1usize..6, n in 1usize..6, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, m, k);
            let b = random_matrix(&mut rng, k, l);
            let c = random_matrix(&mut rng, l, n);
            let left = a.matmul(&b).unwrap().matmul(&c).unwrap();
            let right = a.matmul(&b.matmul(&c).unwrap()).unwrap();
            let scale = left.norm().max(1.0);
            for (x, y) in left.as_slice().iter().zip(right.as_slice()) {
                prop_assert!((x - y).abs() <= 1e-9 * scale);
            }
        }

        #[test]
        fn spd_solve_residual(n in 1usize..40, seed in any::<u64>()) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let a = random_matrix(&mut rng, n, n).gram().add_diagonal(1.0).unwrap();
            let b: Vec<f64> = (0..n).map(|_| rng.random_range(-5.0..5.0)).collect();
            let x = solve_spd(&a, &b).unwrap();
            let r: Vec<f64> = a.mul_vec(&x).unwrap().iter().zip(&b).map(|(p, q)| p - q).collect();
            prop_assert!(norm(&r) <= 1e-8 * norm(&b).max(f64::MIN_POSITIVE));
        }
    }
}
