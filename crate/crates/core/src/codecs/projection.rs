//! Semi-orthogonal random projections.
//!
//! `Q` is `m × n` with orthonormal rows (`Q·Qᵀ = I_m`), spanning a uniformly
//! random `m`-dimensional subspace of `Rⁿ`. Projection applies `Q` bare: no
//! `√(n/m)` rescaling, so squared norms shrink by `m/n` in expectation.

use ndarray::{Array2, ArrayView1, ArrayView2};
use rand_distr::{Distribution, StandardNormal};

use crate::error::{Error, Result};
use crate::rng::derive_rng;
use crate::scalar::Scalar;

/// Tolerance on `‖Q·Qᵀ − I‖_max` accepted by [`ProjectionMatrix::from_rows`].
pub const ORTHONORMAL_TOL: f64 = 1e-5;

#[derive(Clone, Debug, PartialEq)]
pub struct ProjectionMatrix<T> {
    q: Array2<T>,
}

impl<T: Scalar> ProjectionMatrix<T> {
    /// Draws `Q` from `derive_rng(seed, "projection")`: i.i.d. standard
    /// normal entries, rows orthonormalised by modified Gram–Schmidt in `f64`
    /// (two passes).
    pub fn random(n: usize, m: usize, seed: u64) -> Result<Self> {
        if m == 0 || m > n {
            return Err(Error::ProjectionShape { rows: m, cols: n });
        }
        let mut rng = derive_rng(seed, "projection");
        let mut rows: Vec<Vec<f64>> = Vec::with_capacity(m);
        while rows.len() < m {
            let mut v: Vec<f64> = (0..n).map(|_| StandardNormal.sample(&mut rng)).collect();
            let norm0 = dot(&v, &v).sqrt();
            for _ in 0..2 {
                for r in &rows {
                    let p = dot(r, &v);
                    v.iter_mut().zip(r).for_each(|(x, q)| *x -= p * q);
                }
            }
            let norm = dot(&v, &v).sqrt();
            // a draw (numerically) inside the current span carries no new direction
            if norm <= 1e-10 * norm0 {
                continue;
            }
            v.iter_mut().for_each(|x| *x /= norm);
            rows.push(v);
        }
        let q = Array2::from_shape_fn((m, n), |(i, j)| T::of(rows[i][j]));
        Ok(ProjectionMatrix { q })
    }

    /// Wraps an explicit `m × n` matrix, checking row orthonormality.
    pub fn from_rows(q: Array2<T>) -> Result<Self> {
        let (m, n) = q.dim();
        if m == 0 || m > n {
            return Err(Error::ProjectionShape { rows: m, cols: n });
        }
        let p = ProjectionMatrix { q };
        let dev = p.orthonormality_error();
        if dev >= ORTHONORMAL_TOL {
            return Err(Error::Shape(format!(
                "rows are not orthonormal (max deviation {dev:e})"
            )));
        }
        Ok(p)
    }

    pub fn rows(&self) -> usize {
        self.q.nrows()
    }

    pub fn cols(&self) -> usize {
        self.q.ncols()
    }

    pub fn matrix(&self) -> ArrayView2<'_, T> {
        self.q.view()
    }

    /// `‖Q·Qᵀ − I‖_max`, accumulated in `f64`.
    pub fn orthonormality_error(&self) -> f64 {
        let m = self.rows();
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in i..m {
                let g: f64 = self
                    .q
                    .row(i)
                    .iter()
                    .zip(self.q.row(j))
                    .map(|(a, b)| a.as_f64() * b.as_f64())
                    .sum();
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((g - target).abs());
            }
        }
        worst
    }

    /// `Q·v`.
    pub fn project(&self, v: &[T]) -> Result<Vec<T>> {
        if v.len() != self.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.cols(),
                actual: v.len(),
            });
        }
        Ok(self.q.dot(&ArrayView1::from(v)).to_vec())
    }

    /// Projects each row of `batch` (`k × n`) into a `k × m` matrix.
    pub fn project_rows(&self, batch: ArrayView2<'_, T>) -> Result<Array2<T>> {
        if batch.ncols() != self.cols() {
            return Err(Error::DimensionMismatch {
                expected: self.cols(),
                actual: batch.ncols(),
            });
        }
        Ok(batch.dot(&self.q.t()))
    }
}

/// Free-function form of [`ProjectionMatrix::random`].
pub fn make_projection<T: Scalar>(n: usize, m: usize, seed: u64) -> Result<ProjectionMatrix<T>> {
    ProjectionMatrix::random(n, m, seed)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::Projection;
    use ndarray::array;
    use proptest::prelude::*;

    #[test]
    fn square_projection_is_orthogonal() {
        let q = Projection::random(4, 4, 11).unwrap();
        assert!(q.orthonormality_error() < 1e-5);
        let qtq = q.matrix().t().dot(&q.matrix());
        for i in 0..4 {
            for j in 0..4 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((qtq[[i, j]] - target).abs() < 1e-5);
            }
        }
    }

    #[test]
    fn mnist_sized_projection_is_semi_orthogonal() {
        let q = Projection::random(784, 128, 3).unwrap();
        assert_eq!((q.rows(), q.cols()), (128, 784));
        assert!(q.orthonormality_error() < 1e-5);
    }

    #[test]
    fn more_rows_than_cols_rejected() {
        assert!(matches!(
            Projection::random(10, 11, 0),
            Err(Error::ProjectionShape { rows: 11, cols: 10 })
        ));
        assert!(Projection::random(10, 0, 0).is_err());
    }

    #[test]
    fn identity_and_coordinate_selection() {
        let eye = Projection::from_rows(Array2::eye(3)).unwrap();
        assert_eq!(eye.project(&[1.0, 2.0, 3.0]).unwrap(), vec![1.0, 2.0, 3.0]);
        let sel =
            Projection::from_rows(array![[1.0, 0.0, 0.0, 0.0], [0.0, 0.0, 1.0, 0.0]]).unwrap();
        assert_eq!(sel.project(&[5.0, 6.0, 7.0, 8.0]).unwrap(), vec![5.0, 7.0]);
        assert!(matches!(
            sel.project(&[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));
    }

    #[test]
    fn non_orthonormal_rows_rejected() {
        assert!(Projection::from_rows(array![[1.0, 1.0], [0.0, 1.0]]).is_err());
    }

    #[test]
    fn deterministic_per_seed() {
        let a = Projection::random(50, 10, 9).unwrap();
        assert_eq!(a, Projection::random(50, 10, 9).unwrap());
        assert_ne!(a, Projection::random(50, 10, 10).unwrap());
    }

    #[test]
    fn batch_projection_matches_single() {
        let q = Projection::random(20, 5, 1).unwrap();
        let batch = Array2::from_shape_fn((3, 20), |(i, j)| (i * 20 + j) as f32 / 10.0);
        let out = q.project_rows(batch.view()).unwrap();
        for i in 0..3 {
            let single = q.project(batch.row(i).as_slice().unwrap()).unwrap();
            for (a, b) in single.iter().zip(out.row(i)) {
                assert!((a - b).abs() < 1e-4);
            }
        }
    }

    #[test]
    fn squared_norm_contracts_by_m_over_n() {
        let (n, m) = (100, 20);
        let x: Vec<f64> = (0..n).map(|i| ((i * 13 % 17) as f64) - 8.0).collect();
        let xx: f64 = x.iter().map(|v| v * v).sum();
        let ratios: Vec<f64> = (0..200)
            .map(|s| {
                let q = ProjectionMatrix::<f64>::random(n, m, s).unwrap();
                let y = q.project(&x).unwrap();
                y.iter().map(|v| v * v).sum::<f64>() / xx
            })
            .collect();
        let mean = ratios.iter().sum::<f64>() / ratios.len() as f64;
        let expected = m as f64 / n as f64;
        assert!(
            (mean - expected).abs() < 0.1 * expected,
            "mean ratio {mean}"
        );
    }

    proptest! {
        #[test]
        fn linear(a in -3.0f32..3.0, b in -3.0f32..3.0, seed in 0u64..1000) {
            let q = Projection::random(30, 7, seed).unwrap();
            let u: Vec<f32> = (0..30).map(|i| (i as f32).sin()).collect();
            let v: Vec<f32> = (0..30).map(|i| (i as f32 * 0.7).cos()).collect();
            let mix: Vec<f32> = u.iter().zip(&v).map(|(x, y)| a * x + b * y).collect();
            let lhs = q.project(&mix).unwrap();
            let qu = q.project(&u).unwrap();
            let qv = q.project(&v).unwrap();
            for i in 0..7 {
                let rhs = a * qu[i] + b * qv[i];
                let scale = lhs[i].abs().max(rhs.abs()).max(1.0);
                prop_assert!((lhs[i] - rhs).abs() / scale < 1e-4);
            }
        }
    }
}
