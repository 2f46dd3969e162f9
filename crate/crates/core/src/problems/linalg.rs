//! Dense symmetric helpers for the `m x m` normal-equation systems.

use crate::scalar::Real;

/// `y = A x` for a row-major `n x n` matrix.
pub(crate) fn matvec<T: Real>(a: &[T], n: usize, x: &[T]) -> Vec<T> {
    a.chunks_exact(n)
        .map(|row| row.iter().zip(x).map(|(&r, &v)| r * v).sum())
        .collect()
}

/// Lower Cholesky factor of a symmetric positive-definite matrix, or `None`
/// when a pivot is not safely positive.
pub(crate) fn cholesky<T: Real>(a: &[T], n: usize) -> Option<Vec<T>> {
    let max_diag = (0..n).map(|i| a[i * n + i]).fold(T::zero(), T::max);
    let floor = max_diag * T::epsilon() * T::of_usize(n.max(1));
    let mut l = vec![T::zero(); n * n];
    for i in 0..n {
        for j in 0..=i {
            let mut sum = a[i * n + j];
            for k in 0..j {
                sum = sum - l[i * n + k] * l[j * n + k];
            }
            if i == j {
                if !(sum > floor) {
                    return None;
                }
                l[i * n + i] = sum.sqrt();
            } else {
                l[i * n + j] = sum / l[j * n + j];
            }
        }
    }
    Some(l)
}

/// Solves `L L^T x = b`.
pub(crate) fn cholesky_solve<T: Real>(l: &[T], n: usize, b: &[T]) -> Vec<T> {
    let mut y = vec![T::zero(); n];
    for i in 0..n {
        let mut sum = b[i];
        for k in 0..i {
            sum = sum - l[i * n + k] * y[k];
        }
        y[i] = sum / l[i * n + i];
    }
    let mut x = vec![T::zero(); n];
    for i in (0..n).rev() {
        let mut sum = y[i];
        for k in i + 1..n {
            sum = sum - l[k * n + i] * x[k];
        }
        x[i] = sum / l[i * n + i];
    }
    x
}

/// Solves `A x = b` with Cholesky plus two rounds of iterative refinement.
pub(crate) fn solve_spd<T: Real>(a: &[T], n: usize, b: &[T]) -> Option<Vec<T>> {
    let l = cholesky(a, n)?;
    let mut x = cholesky_solve(&l, n, b);
    for _ in 0..2 {
        let ax = matvec(a, n, &x);
        let residual: Vec<T> = b.iter().zip(&ax).map(|(&bi, &ai)| bi - ai).collect();
        let correction = cholesky_solve(&l, n, &residual);
        for (xi, ci) in x.iter_mut().zip(correction) {
            *xi = *xi + ci;
        }
    }
    Some(x)
}
