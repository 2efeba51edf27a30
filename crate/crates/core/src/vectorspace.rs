//! Dense finite-dimensional vectors and small square matrices.
//!
//! Everything here is a pure function on immutable values. The dimension
//! checks are explicit (`Result`) on the public operations; the arithmetic
//! operator impls panic on mismatched dimensions since a mismatch there is a
//! programming error inside the crate.

use std::ops::{Add, Mul, Neg, Sub};

use thiserror::Error;

use crate::scalar::Scalar;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum VectorError {
    #[error("dimension mismatch: {left} vs {right}")]
    DimensionMismatch { left: usize, right: usize },
    #[error("vector has zero norm (at most {tol:e}); direction undefined")]
    ZeroVector { tol: f64 },
    #[error("non-finite coordinate at index {index}")]
    NonFinite { index: usize },
    #[error("vector must have at least one coordinate")]
    Empty,
    #[error("expected a planar vector, got dimension {dim}")]
    NotPlanar { dim: usize },
    #[error("matrix must be square and non-empty, got {rows} rows with a row of length {cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("linear system is numerically singular")]
    SingularSystem,
}

/// A point of a finite-dimensional real inner product space.
#[derive(Debug, Clone, PartialEq)]
pub struct Vector<T> {
    coords: Vec<T>,
}

impl<T: Scalar> Vector<T> {
    /// Builds a vector, rejecting empty input and NaN/infinite entries.
    pub fn new(coords: Vec<T>) -> Result<Self, VectorError> {
        if coords.is_empty() {
            return Err(VectorError::Empty);
        }
        if let Some(index) = coords.iter().position(|c| !c.is_finite()) {
            return Err(VectorError::NonFinite { index });
        }
        Ok(Self { coords })
    }

    /// Builds a vector from `f64` data.
    pub fn from_f64s(coords: &[f64]) -> Result<Self, VectorError> {
        Self::new(coords.iter().map(|&c| T::lit(c)).collect())
    }

    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "zero-dimensional vector");
        Self {
            coords: vec![T::zero(); dim],
        }
    }

    /// Standard basis vector with a one at 0-based `index`.
    pub fn basis(dim: usize, index: usize) -> Self {
        let mut v = Self::zeros(dim);
        v.coords[index] = T::one();
        v
    }

    pub(crate) fn from_raw(coords: Vec<T>) -> Self {
        debug_assert!(!coords.is_empty());
        Self { coords }
    }

    pub fn dim(&self) -> usize {
        self.coords.len()
    }

    pub fn coords(&self) -> &[T] {
        &self.coords
    }

    pub fn into_coords(self) -> Vec<T> {
        self.coords
    }

    pub fn is_finite(&self) -> bool {
        self.coords.iter().all(|c| c.is_finite())
    }

    pub fn dot(&self, other: &Self) -> Result<T, VectorError> {
        self.check_dim(other)?;
        Ok(self.dot_unchecked(other))
    }

    pub(crate) fn dot_unchecked(&self, other: &Self) -> T {
        self.coords
            .iter()
            .zip(&other.coords)
            .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
    }

    pub fn norm_sq(&self) -> T {
        self.dot_unchecked(self)
    }

    /// Euclidean norm, computed with scaling so tiny and huge vectors keep
    /// their precision.
    pub fn norm(&self) -> T {
        let scale = self.coords.iter().fold(T::zero(), |m, c| m.max(c.abs()));
        if scale == T::zero() || !scale.is_finite() {
            return scale;
        }
        let sum = self
            .coords
            .iter()
            .fold(T::zero(), |acc, &c| acc + (c / scale) * (c / scale));
        scale * sum.sqrt()
    }

    pub fn distance(&self, other: &Self) -> Result<T, VectorError> {
        self.check_dim(other)?;
        Ok((self - other).norm())
    }

    pub fn scale(&self, factor: T) -> Self {
        Self::from_raw(self.coords.iter().map(|&c| c * factor).collect())
    }

    /// `self + factor * other`.
    pub fn axpy(&self, factor: T, other: &Self) -> Self {
        assert_eq!(self.dim(), other.dim(), "axpy dimension mismatch");
        Self::from_raw(
            self.coords
                .iter()
                .zip(&other.coords)
                .map(|(&a, &b)| a + factor * b)
                .collect(),
        )
    }

    /// Largest absolute coordinate difference.
    pub fn max_abs_diff(&self, other: &Self) -> T {
        self.coords
            .iter()
            .zip(&other.coords)
            .fold(T::zero(), |m, (&a, &b)| m.max((a - b).abs()))
    }

    pub fn check_dim(&self, other: &Self) -> Result<(), VectorError> {
        if self.dim() == other.dim() {
            Ok(())
        } else {
            Err(VectorError::DimensionMismatch {
                left: self.dim(),
                right: other.dim(),
            })
        }
    }
}

impl<T: Scalar> Add for &Vector<T> {
    type Output = Vector<T>;

    fn add(self, rhs: Self) -> Vector<T> {
        self.axpy(T::one(), rhs)
    }
}

impl<T: Scalar> Sub for &Vector<T> {
    type Output = Vector<T>;

    fn sub(self, rhs: Self) -> Vector<T> {
        assert_eq!(self.dim(), rhs.dim(), "sub dimension mismatch");
        Vector::from_raw(self.coords.iter().zip(&rhs.coords).map(|(&a, &b)| a - b).collect())
    }
}

impl<T: Scalar> Mul<T> for &Vector<T> {
    type Output = Vector<T>;

    fn mul(self, rhs: T) -> Vector<T> {
        self.scale(rhs)
    }
}

impl<T: Scalar> Neg for &Vector<T> {
    type Output = Vector<T>;

    fn neg(self) -> Vector<T> {
        self.scale(-T::one())
    }
}

/// A vector of norm one (within `1e-12` for `f64`).
#[derive(Debug, Clone, PartialEq)]
pub struct UnitVector<T> {
    inner: Vector<T>,
}

impl<T: Scalar> UnitVector<T> {
    pub fn as_vector(&self) -> &Vector<T> {
        &self.inner
    }

    pub fn into_vector(self) -> Vector<T> {
        self.inner
    }

    pub fn dim(&self) -> usize {
        self.inner.dim()
    }

    pub fn coords(&self) -> &[T] {
        self.inner.coords()
    }

    /// Euclidean distance between two unit vectors.
    pub fn chordal_distance(&self, other: &Self) -> T {
        (&self.inner - &other.inner).norm()
    }
}

pub fn inner_product<T: Scalar>(u: &Vector<T>, v: &Vector<T>) -> Result<T, VectorError> {
    u.dot(v)
}

/// `v / ‖v‖`, refusing vectors whose norm is at most [`Scalar::zero_tol`].
pub fn unit_direction<T: Scalar>(v: &Vector<T>) -> Result<UnitVector<T>, VectorError> {
    let norm = v.norm();
    if !(norm > T::zero_tol()) {
        return Err(VectorError::ZeroVector {
            tol: T::zero_tol().to_f64().unwrap_or(0.0),
        });
    }
    Ok(UnitVector {
        inner: v.scale(T::one() / norm),
    })
}

/// Polar angle of a planar direction in degrees, normalized to `[0, 360)`.
pub fn angle_of<T: Scalar>(d: &UnitVector<T>) -> Result<T, VectorError> {
    angle_deg(d.as_vector())
}

pub(crate) fn angle_deg<T: Scalar>(v: &Vector<T>) -> Result<T, VectorError> {
    if v.dim() != 2 {
        return Err(VectorError::NotPlanar { dim: v.dim() });
    }
    let c = v.coords();
    let mut deg = c[1].atan2(c[0]).to_degrees();
    if deg < T::zero() {
        deg += T::lit(360.0);
    }
    if deg >= T::lit(360.0) {
        deg -= T::lit(360.0);
    }
    Ok(deg)
}

/// Dense row-major square matrix.
#[derive(Debug, Clone, PartialEq)]
pub struct Matrix<T> {
    n: usize,
    data: Vec<T>,
}

impl<T: Scalar> Matrix<T> {
    pub fn from_rows(rows: Vec<Vec<T>>) -> Result<Self, VectorError> {
        let n = rows.len();
        if n == 0 {
            return Err(VectorError::NotSquare { rows: 0, cols: 0 });
        }
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(VectorError::NotSquare {
                rows: n,
                cols: bad.len(),
            });
        }
        let data: Vec<T> = rows.into_iter().flatten().collect();
        if let Some(index) = data.iter().position(|c| !c.is_finite()) {
            return Err(VectorError::NonFinite { index });
        }
        Ok(Self { n, data })
    }

    pub fn identity(n: usize) -> Self {
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            data[i * n + i] = T::one();
        }
        Self { n, data }
    }

    /// Block-diagonal matrix assembled from square blocks.
    pub fn block_diagonal(blocks: &[Matrix<T>]) -> Self {
        let n = blocks.iter().map(|b| b.n).sum();
        let mut data = vec![T::zero(); n * n];
        let mut offset = 0;
        for b in blocks {
            for i in 0..b.n {
                for j in 0..b.n {
                    data[(offset + i) * n + offset + j] = b.get(i, j);
                }
            }
            offset += b.n;
        }
        Self { n, data }
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn get(&self, i: usize, j: usize) -> T {
        self.data[i * self.n + j]
    }

    pub fn transpose(&self) -> Self {
        let n = self.n;
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            for j in 0..n {
                data[j * n + i] = self.get(i, j);
            }
        }
        Self { n, data }
    }

    pub fn mul_vec(&self, x: &Vector<T>) -> Result<Vector<T>, VectorError> {
        if x.dim() != self.n {
            return Err(VectorError::DimensionMismatch {
                left: self.n,
                right: x.dim(),
            });
        }
        let xs = x.coords();
        Ok(Vector::from_raw(
            (0..self.n)
                .map(|i| {
                    self.data[i * self.n..(i + 1) * self.n]
                        .iter()
                        .zip(xs)
                        .fold(T::zero(), |acc, (&a, &b)| acc + a * b)
                })
                .collect(),
        ))
    }

    pub fn mul_mat(&self, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        let n = self.n;
        let mut data = vec![T::zero(); n * n];
        for i in 0..n {
            for k in 0..n {
                let a = self.get(i, k);
                for j in 0..n {
                    data[i * n + j] += a * other.get(k, j);
                }
            }
        }
        Self { n, data }
    }

    /// `self + factor * other`.
    pub fn add_scaled(&self, factor: T, other: &Self) -> Self {
        assert_eq!(self.n, other.n);
        Self {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&other.data)
                .map(|(&a, &b)| a + factor * b)
                .collect(),
        }
    }

    pub fn max_abs_entry(&self) -> T {
        self.data.iter().fold(T::zero(), |m, c| m.max(c.abs()))
    }

    /// Solves `self * y = rhs` by Gaussian elimination with partial pivoting.
    pub fn solve(&self, rhs: &Vector<T>) -> Result<Vector<T>, VectorError> {
        if rhs.dim() != self.n {
            return Err(VectorError::DimensionMismatch {
                left: self.n,
                right: rhs.dim(),
            });
        }
        let n = self.n;
        let mut a = self.data.clone();
        let mut b = rhs.coords().to_vec();
        let scale = self.max_abs_entry().max(T::min_positive_value());
        let pivot_tol = scale * T::epsilon() * T::lit(n as f64) * T::lit(16.0);
        for col in 0..n {
            let (piv, piv_abs) = (col..n)
                .map(|r| (r, a[r * n + col].abs()))
                .fold((col, -T::one()), |best, cur| if cur.1 > best.1 { cur } else { best });
            if !(piv_abs > pivot_tol) {
                return Err(VectorError::SingularSystem);
            }
            if piv != col {
                for j in 0..n {
                    a.swap(col * n + j, piv * n + j);
                }
                b.swap(col, piv);
            }
            let p = a[col * n + col];
            for r in col + 1..n {
                let f = a[r * n + col] / p;
                if f == T::zero() {
                    continue;
                }
                for j in col..n {
                    let v = a[col * n + j];
                    a[r * n + j] -= f * v;
                }
                let v = b[col];
                b[r] -= f * v;
            }
        }
        let mut y = vec![T::zero(); n];
        for i in (0..n).rev() {
            let s = (i + 1..n).fold(b[i], |acc, j| acc - a[i * n + j] * y[j]);
            y[i] = s / a[i * n + i];
        }
        Vector::new(y).map_err(|_| VectorError::SingularSystem)
    }
}

/// Least squares `min ‖A x − b‖` for a column-major `A` with `m` rows, by
/// Householder QR. Columns found numerically dependent get a zero coefficient.
pub(crate) fn least_squares<T: Scalar>(cols: &[Vec<T>], b: &[T]) -> Vec<T> {
    let m = b.len();
    let k = cols.len();
    let mut a: Vec<Vec<T>> = cols.to_vec();
    let mut rhs = b.to_vec();
    let col_scale = cols
        .iter()
        .flat_map(|c| c.iter())
        .fold(T::zero(), |acc, v| acc.max(v.abs()));
    let tol = col_scale * T::epsilon() * T::lit((m.max(k) * 10) as f64);
    let mut diag = vec![T::zero(); k];
    let steps = k.min(m);
    for j in 0..steps {
        let norm = a[j][j..].iter().fold(T::zero(), |acc, &v| acc + v * v).sqrt();
        if norm <= tol {
            diag[j] = T::zero();
            continue;
        }
        let alpha = if a[j][j] > T::zero() { -norm } else { norm };
        let mut v: Vec<T> = a[j][j..].to_vec();
        v[0] -= alpha;
        let vnorm_sq = v.iter().fold(T::zero(), |acc, &x| acc + x * x);
        if vnorm_sq > T::zero() {
            for col in a.iter_mut().skip(j) {
                let s = v.iter().zip(&col[j..]).fold(T::zero(), |acc, (&p, &q)| acc + p * q);
                let f = (s + s) / vnorm_sq;
                for (c, &p) in col[j..].iter_mut().zip(&v) {
                    *c -= f * p;
                }
            }
            let s = v.iter().zip(&rhs[j..]).fold(T::zero(), |acc, (&p, &q)| acc + p * q);
            let f = (s + s) / vnorm_sq;
            for (c, &p) in rhs[j..].iter_mut().zip(&v) {
                *c -= f * p;
            }
        }
        diag[j] = a[j][j];
    }
    let mut x = vec![T::zero(); k];
    for j in (0..steps).rev() {
        if diag[j].abs() <= tol {
            x[j] = T::zero();
            continue;
        }
        let s = (j + 1..steps).fold(rhs[j], |acc, c| acc - a[c][j] * x[c]);
        x[j] = s / diag[j];
    }
    x
}
