//! Dense complex linear algebra for small spin spaces (dimension 2 to ~16).
//!
//! Matrices are stored row-major. Hamiltonians are angular frequencies in
//! rad/us and times are in us, so `exp(-i H t)` needs no further scaling.

mod eigen;
mod state;

use std::fmt;
use std::ops::{Add, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64 as C64;

use crate::error::{Error, Result};

pub use eigen::{eig_hermitian, expm_unitary, Spectrum};
pub use state::{partial_trace_electron, state_fidelity, DensityMatrix, StateVector};

pub const ZERO: C64 = C64 { re: 0.0, im: 0.0 };
pub const ONE: C64 = C64 { re: 1.0, im: 0.0 };
pub const I: C64 = C64 { re: 0.0, im: 1.0 };

/// Largest anti-Hermitian deviation accepted by spectral routines.
pub const HERMITIAN_TOL: f64 = 1e-10;

/// Square complex matrix.
#[derive(Clone, PartialEq)]
pub struct Operator {
    dim: usize,
    data: Vec<C64>,
}

impl Operator {
    pub fn zeros(dim: usize) -> Self {
        assert!(dim > 0, "operator dimension must be positive");
        Self { dim, data: vec![ZERO; dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut out = Self::zeros(dim);
        for k in 0..dim {
            out[(k, k)] = ONE;
        }
        out
    }

    pub fn from_fn<F>(dim: usize, mut f: F) -> Self
    where
        F: FnMut(usize, usize) -> C64,
    {
        let mut out = Self::zeros(dim);
        for i in 0..dim {
            for j in 0..dim {
                out[(i, j)] = f(i, j);
            }
        }
        out
    }

    /// Builds from row-major entries; `entries.len()` must be a perfect square.
    pub fn from_rows(entries: &[C64]) -> Result<Self> {
        let dim = (entries.len() as f64).sqrt().round() as usize;
        if dim == 0 || dim * dim != entries.len() {
            return Err(Error::Dimension(format!(
                "{} entries do not form a square matrix",
                entries.len()
            )));
        }
        Ok(Self { dim, data: entries.to_vec() })
    }

    pub fn from_real_rows(entries: &[f64]) -> Result<Self> {
        let cplx: Vec<C64> = entries.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_rows(&cplx)
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut out = Self::zeros(diag.len());
        for (k, &d) in diag.iter().enumerate() {
            out[(k, k)] = d;
        }
        out
    }

    pub fn from_real_diag(diag: &[f64]) -> Self {
        let cplx: Vec<C64> = diag.iter().map(|&x| C64::new(x, 0.0)).collect();
        Self::from_diag(&cplx)
    }

    /// `|a><b|` in the computational basis of dimension `dim`.
    pub fn ket_bra(dim: usize, a: usize, b: usize) -> Self {
        let mut out = Self::zeros(dim);
        out[(a, b)] = ONE;
        out
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn entries(&self) -> &[C64] {
        &self.data
    }

    pub fn entries_mut(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn dagger(&self) -> Self {
        Self::from_fn(self.dim, |i, j| self[(j, i)].conj())
    }

    pub fn trace(&self) -> C64 {
        (0..self.dim).map(|k| self[(k, k)]).sum()
    }

    pub fn diag(&self) -> Vec<C64> {
        (0..self.dim).map(|k| self[(k, k)]).collect()
    }

    pub fn scale(&self, s: C64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn scale_re(&self, s: f64) -> Self {
        Self { dim: self.dim, data: self.data.iter().map(|&x| x * s).collect() }
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|x| x.norm()).fold(0.0, f64::max)
    }

    /// Largest entrywise modulus of `self - other`.
    pub fn max_abs_diff(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch in max_abs_diff");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| (a - b).norm())
            .fold(0.0, f64::max)
    }

    pub fn frobenius_norm(&self) -> f64 {
        self.data.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn hermiticity_defect(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for i in 0..self.dim {
            for j in i..self.dim {
                worst = worst.max((self[(i, j)] - self[(j, i)].conj()).norm());
            }
        }
        worst
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|x| x.re.is_finite() && x.im.is_finite())
    }

    /// Hermitian part `(A + A^dagger) / 2`.
    pub fn hermitian_part(&self) -> Self {
        Self::from_fn(self.dim, |i, j| (self[(i, j)] + self[(j, i)].conj()) * 0.5)
    }

    /// `U A U^dagger`.
    pub fn conjugate_by(&self, u: &Operator) -> Self {
        &(u * self) * &u.dagger()
    }

    /// Principal submatrix on `indices`, in the given order.
    pub fn restrict(&self, indices: &[usize]) -> Self {
        Self::from_fn(indices.len(), |i, j| self[(indices[i], indices[j])])
    }

    /// Places `self` on `indices` of a `dim`-dimensional zero operator.
    pub fn embed(&self, dim: usize, indices: &[usize]) -> Self {
        assert_eq!(indices.len(), self.dim, "embedding index count mismatch");
        let mut out = Self::zeros(dim);
        for (i, &r) in indices.iter().enumerate() {
            for (j, &c) in indices.iter().enumerate() {
                out[(r, c)] = self[(i, j)];
            }
        }
        out
    }

    pub fn apply(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(v.len(), self.dim, "dimension mismatch in apply");
        (0..self.dim)
            .map(|i| (0..self.dim).map(|j| self[(i, j)] * v[j]).sum())
            .collect()
    }

    /// Phase-insensitive gate overlap `|Tr(A^dagger B)| / d`.
    pub fn gate_overlap(&self, other: &Operator) -> f64 {
        assert_eq!(self.dim, other.dim, "dimension mismatch in gate_overlap");
        let tr: C64 = self.data.iter().zip(&other.data).map(|(a, b)| a.conj() * b).sum();
        tr.norm() / self.dim as f64
    }

    /// `||A^dagger A - 1||_max`.
    pub fn unitarity_defect(&self) -> f64 {
        (&self.dagger() * self).max_abs_diff(&Operator::identity(self.dim))
    }
}

/// Tensor product with row-major block layout:
/// `out[(i*db + k, j*db + l)] = a[(i, j)] * b[(k, l)]`.
pub fn kron(a: &Operator, b: &Operator) -> Operator {
    let db = b.dim;
    Operator::from_fn(a.dim * db, |r, c| a[(r / db, c / db)] * b[(r % db, c % db)])
}

impl Index<(usize, usize)> for Operator {
    type Output = C64;

    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.dim + j]
    }
}

impl IndexMut<(usize, usize)> for Operator {
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.dim + j]
    }
}

impl Mul for &Operator {
    type Output = Operator;

    fn mul(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in product");
        let n = self.dim;
        let mut out = Operator::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }
}

impl Add for &Operator {
    type Output = Operator;

    fn add(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in sum");
        Operator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &Operator {
    type Output = Operator;

    fn sub(self, rhs: &Operator) -> Operator {
        assert_eq!(self.dim, rhs.dim, "dimension mismatch in difference");
        Operator {
            dim: self.dim,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Neg for &Operator {
    type Output = Operator;

    fn neg(self) -> Operator {
        self.scale_re(-1.0)
    }
}

impl fmt::Debug for Operator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "Operator({}x{})", self.dim, self.dim)?;
        for i in 0..self.dim {
            write!(f, "  [")?;
            for j in 0..self.dim {
                let z = self[(i, j)];
                write!(f, " {:+.6}{:+.6}i", z.re, z.im)?;
            }
            writeln!(f, " ]")?;
        }
        Ok(())
    }
}
