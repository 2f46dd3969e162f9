//! Dense real vectors: model weights, gradients and pseudogradients all live
//! in a [`Vector`].

use std::ops::{Index, IndexMut};

use crate::error::{Error, Result};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct Vector<T> {
    values: Vec<T>,
}

impl<T: Real> Vector<T> {
    pub fn from_vec(values: Vec<T>) -> Self {
        Self { values }
    }

    pub fn zeros(dim: usize) -> Self {
        Self {
            values: vec![T::zero(); dim],
        }
    }

    pub fn filled(dim: usize, value: T) -> Self {
        Self {
            values: vec![value; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.values.len()
    }

    pub fn as_slice(&self) -> &[T] {
        &self.values
    }

    pub fn as_mut_slice(&mut self) -> &mut [T] {
        &mut self.values
    }

    pub fn into_vec(self) -> Vec<T> {
        self.values
    }

    pub fn iter(&self) -> std::slice::Iter<'_, T> {
        self.values.iter()
    }

    /// True when no coordinate is NaN or infinite.
    pub fn is_finite(&self) -> bool {
        self.values.iter().all(|v| v.is_finite())
    }

    pub fn ensure_same_dim(&self, other: &Self) -> Result<()> {
        if self.dim() != other.dim() {
            return Err(Error::DimensionMismatch {
                expected: self.dim(),
                found: other.dim(),
            });
        }
        Ok(())
    }

    pub fn l2_norm(&self) -> T {
        let sum_sq: T = self.values.iter().map(|&v| v * v).sum();
        let norm = sum_sq.sqrt();
        if norm.is_finite() || !self.is_finite() {
            return norm;
        }
        // Squares overflowed although every coordinate is finite; rescale.
        let peak = self.linf_norm();
        let scaled: T = self
            .values
            .iter()
            .map(|&v| {
                let r = v / peak;
                r * r
            })
            .sum();
        peak * scaled.sqrt()
    }

    pub fn linf_norm(&self) -> T {
        self.values
            .iter()
            .fold(T::zero(), |acc, &v| if v.abs() > acc { v.abs() } else { acc })
    }

    pub fn dot(&self, other: &Self) -> Result<T> {
        self.ensure_same_dim(other)?;
        Ok(self.values.iter().zip(&other.values).map(|(&a, &b)| a * b).sum())
    }

    pub fn scaled(&self, factor: T) -> Self {
        Self {
            values: self.values.iter().map(|&v| v * factor).collect(),
        }
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.ensure_same_dim(other)?;
        Ok(Self {
            values: self.values.iter().zip(&other.values).map(|(&a, &b)| a - b).collect(),
        })
    }

    /// `self += a * x`, in place.
    pub fn axpy_in_place(&mut self, a: T, x: &Self) -> Result<()> {
        self.ensure_same_dim(x)?;
        for (y, &xv) in self.values.iter_mut().zip(&x.values) {
            *y = a * xv + *y;
        }
        Ok(())
    }

    pub fn map(&self, f: impl Fn(T) -> T) -> Self {
        Self {
            values: self.values.iter().map(|&v| f(v)).collect(),
        }
    }
}

impl<T> Index<usize> for Vector<T> {
    type Output = T;

    fn index(&self, index: usize) -> &T {
        &self.values[index]
    }
}

impl<T> IndexMut<usize> for Vector<T> {
    fn index_mut(&mut self, index: usize) -> &mut T {
        &mut self.values[index]
    }
}

impl<T: Real> From<Vec<T>> for Vector<T> {
    fn from(values: Vec<T>) -> Self {
        Self::from_vec(values)
    }
}

/// Returns `a * x + y`.
pub fn axpy<T: Real>(a: T, x: &Vector<T>, y: &Vector<T>) -> Result<Vector<T>> {
    if !a.is_finite() {
        return Err(Error::contract("axpy scalar must be finite"));
    }
    let mut out = y.clone();
    out.axpy_in_place(a, x)?;
    Ok(out)
}

pub fn l2_norm<T: Real>(x: &Vector<T>) -> T {
    x.l2_norm()
}

/// Euclidean projection onto the closed ball of the given radius about the
/// origin.
///
/// The result's computed norm never exceeds `radius`, so projecting twice
/// returns the first projection unchanged.
pub fn project_ball<T: Real>(x: &Vector<T>, radius: T) -> Result<Vector<T>> {
    if !(radius > T::zero()) {
        return Err(Error::contract(format!(
            "projection radius must be positive, got {radius}"
        )));
    }
    let norm = x.l2_norm();
    if norm <= radius || !norm.is_finite() {
        return Ok(x.clone());
    }
    let mut factor = radius / norm;
    let shrink = T::one() - T::epsilon();
    loop {
        let projected = x.scaled(factor);
        if projected.l2_norm() <= radius {
            return Ok(projected);
        }
        factor = factor * shrink;
    }
}
