//! Dense complex matrices and vectors, row-major storage.

use std::fmt;
use std::ops::{Add, Mul, Neg, Sub};

use num_complex::Complex;

use crate::error::{Error, Result};

/// Double-precision complex scalar used throughout the crate.
pub type C64 = Complex<f64>;

/// Shorthand for a real complex scalar.
#[inline]
pub fn c(re: f64, im: f64) -> C64 {
    C64::new(re, im)
}

/// Dense complex matrix, entries stored in row-major order.
#[derive(Clone, PartialEq)]
pub struct CMatrix {
    rows: usize,
    cols: usize,
    data: Vec<C64>,
}

/// Dense complex column vector.
#[derive(Clone, PartialEq)]
pub struct CVector {
    data: Vec<C64>,
}

impl CMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        CMatrix {
            rows,
            cols,
            data: vec![C64::ZERO; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = CMatrix::zeros(n, n);
        for i in 0..n {
            m[(i, i)] = C64::ONE;
        }
        m
    }

    pub fn diag(entries: &[C64]) -> Self {
        let n = entries.len();
        let mut m = CMatrix::zeros(n, n);
        for (i, &e) in entries.iter().enumerate() {
            m[(i, i)] = e;
        }
        m
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> C64) -> Self {
        let mut m = CMatrix::zeros(rows, cols);
        for i in 0..rows {
            for j in 0..cols {
                m[(i, j)] = f(i, j);
            }
        }
        m
    }

    /// Build from nested rows; every row must have the same length.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        let mut data = Vec::with_capacity(r * c);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != c {
                return Err(Error::Dimension(format!(
                    "row {i} has {} entries, expected {c}",
                    row.len()
                )));
            }
            data.extend_from_slice(row);
        }
        Ok(CMatrix { rows: r, cols: c, data })
    }

    /// Real-valued convenience constructor, mostly for tests and builtins.
    pub fn from_real(rows: &[&[f64]]) -> Self {
        let r = rows.len();
        let c = rows.first().map_or(0, |row| row.len());
        CMatrix::from_fn(r, c, |i, j| c64_real(rows[i][j]))
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn is_square(&self) -> bool {
        self.rows == self.cols
    }

    pub fn data(&self) -> &[C64] {
        &self.data
    }

    pub fn row(&self, i: usize) -> &[C64] {
        &self.data[i * self.cols..(i + 1) * self.cols]
    }

    pub fn column(&self, j: usize) -> CVector {
        CVector::from((0..self.rows).map(|i| self[(i, j)]).collect::<Vec<_>>())
    }

    pub fn set_column(&mut self, j: usize, v: &CVector) {
        assert_eq!(v.dim(), self.rows, "column length mismatch");
        for i in 0..self.rows {
            self[(i, j)] = v[i];
        }
    }

    pub fn transpose(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)])
    }

    pub fn conj(&self) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z.conj()).collect(),
        }
    }

    /// Conjugate transpose.
    pub fn adjoint(&self) -> CMatrix {
        CMatrix::from_fn(self.cols, self.rows, |i, j| self[(j, i)].conj())
    }

    pub fn scale(&self, s: C64) -> CMatrix {
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn trace(&self) -> C64 {
        assert!(self.is_square(), "trace of a non-square matrix");
        (0..self.rows).map(|i| self[(i, i)]).sum()
    }

    pub fn frob_norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }

    /// Hermitian part (A + A*)/2.
    pub fn hermitize(&self) -> CMatrix {
        assert!(self.is_square());
        let adj = self.adjoint();
        (self + &adj).scale(c(0.5, 0.0))
    }

    /// Deviation from Hermitian symmetry, ‖A − A*‖_F.
    pub fn herm_deviation(&self) -> f64 {
        (self - &self.adjoint()).frob_norm()
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.is_square() && self.herm_deviation() <= tol * self.frob_norm().max(1.0)
    }

    /// Matrix product.
    pub fn mul(&self, rhs: &CMatrix) -> CMatrix {
        assert_eq!(
            self.cols, rhs.rows,
            "matmul shape mismatch: {}x{} * {}x{}",
            self.rows, self.cols, rhs.rows, rhs.cols
        );
        let mut out = CMatrix::zeros(self.rows, rhs.cols);
        for i in 0..self.rows {
            for k in 0..self.cols {
                let a = self[(i, k)];
                if a == C64::ZERO {
                    continue;
                }
                let rrow = rhs.row(k);
                let orow = &mut out.data[i * rhs.cols..(i + 1) * rhs.cols];
                for (o, &b) in orow.iter_mut().zip(rrow) {
                    *o += a * b;
                }
            }
        }
        out
    }

    /// Matrix-vector product.
    pub fn apply(&self, v: &CVector) -> CVector {
        assert_eq!(
            self.cols,
            v.dim(),
            "matvec shape mismatch: {}x{} * {}",
            self.rows,
            self.cols,
            v.dim()
        );
        let mut out = vec![C64::ZERO; self.rows];
        for i in 0..self.rows {
            let mut acc = C64::ZERO;
            for (a, b) in self.row(i).iter().zip(v.as_slice()) {
                acc += a * b;
            }
            out[i] = acc;
        }
        CVector::from(out)
    }

    /// Kronecker product self ⊗ rhs.
    pub fn kron(&self, rhs: &CMatrix) -> CMatrix {
        let (ra, ca) = (self.rows, self.cols);
        let (rb, cb) = (rhs.rows, rhs.cols);
        let mut out = CMatrix::zeros(ra * rb, ca * cb);
        for i in 0..ra {
            for j in 0..ca {
                let a = self[(i, j)];
                if a == C64::ZERO {
                    continue;
                }
                for p in 0..rb {
                    for q in 0..cb {
                        out[(i * rb + p, j * cb + q)] = a * rhs[(p, q)];
                    }
                }
            }
        }
        out
    }

    /// Solve A X = B by Gaussian elimination with partial pivoting.
    pub fn solve(&self, b: &CMatrix) -> Result<CMatrix> {
        if !self.is_square() {
            return Err(Error::Dimension("solve requires a square matrix".into()));
        }
        if b.rows != self.rows {
            return Err(Error::Dimension(format!(
                "solve rhs has {} rows, expected {}",
                b.rows, self.rows
            )));
        }
        let n = self.rows;
        let mut a = self.clone();
        let mut x = b.clone();
        for k in 0..n {
            let (piv, mag) = (k..n)
                .map(|i| (i, a[(i, k)].norm()))
                .max_by(|p, q| p.1.total_cmp(&q.1))
                .unwrap();
            if mag <= f64::EPSILON * a.frob_norm().max(1e-300) * n as f64 {
                return Err(Error::Singular(format!("pivot {mag:.3e} at column {k}")));
            }
            if piv != k {
                for j in 0..n {
                    let t = a[(k, j)];
                    a[(k, j)] = a[(piv, j)];
                    a[(piv, j)] = t;
                }
                for j in 0..x.cols {
                    let t = x[(k, j)];
                    x[(k, j)] = x[(piv, j)];
                    x[(piv, j)] = t;
                }
            }
            let d = a[(k, k)];
            for i in k + 1..n {
                let f = a[(i, k)] / d;
                if f == C64::ZERO {
                    continue;
                }
                for j in k..n {
                    let akj = a[(k, j)];
                    a[(i, j)] -= f * akj;
                }
                for j in 0..x.cols {
                    let xkj = x[(k, j)];
                    x[(i, j)] -= f * xkj;
                }
            }
        }
        for k in (0..n).rev() {
            for j in 0..x.cols {
                let mut acc = x[(k, j)];
                for m in k + 1..n {
                    acc -= a[(k, m)] * x[(m, j)];
                }
                x[(k, j)] = acc / a[(k, k)];
            }
        }
        Ok(x)
    }
}

#[inline]
fn c64_real(x: f64) -> C64 {
    C64::new(x, 0.0)
}

impl std::ops::Index<(usize, usize)> for CMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.cols + j]
    }
}

impl std::ops::IndexMut<(usize, usize)> for CMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.cols + j]
    }
}

impl Add for &CMatrix {
    type Output = CMatrix;
    fn add(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "add shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a + b).collect(),
        }
    }
}

impl Sub for &CMatrix {
    type Output = CMatrix;
    fn sub(self, rhs: &CMatrix) -> CMatrix {
        assert_eq!((self.rows, self.cols), (rhs.rows, rhs.cols), "sub shape mismatch");
        CMatrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().zip(&rhs.data).map(|(a, b)| a - b).collect(),
        }
    }
}

impl Mul for &CMatrix {
    type Output = CMatrix;
    fn mul(self, rhs: &CMatrix) -> CMatrix {
        CMatrix::mul(self, rhs)
    }
}

impl Neg for &CMatrix {
    type Output = CMatrix;
    fn neg(self) -> CMatrix {
        self.scale(c(-1.0, 0.0))
    }
}

impl fmt::Debug for CMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "CMatrix {}x{} [", self.rows, self.cols)?;
        for i in 0..self.rows {
            write!(f, "  ")?;
            for j in 0..self.cols {
                let z = self[(i, j)];
                write!(f, "{:+.4}{:+.4}i  ", z.re, z.im)?;
            }
            writeln!(f)?;
        }
        write!(f, "]")
    }
}

impl CVector {
    pub fn zeros(dim: usize) -> Self {
        CVector {
            data: vec![C64::ZERO; dim],
        }
    }

    pub fn from(data: Vec<C64>) -> Self {
        CVector { data }
    }

    pub fn from_real(xs: &[f64]) -> Self {
        CVector {
            data: xs.iter().map(|&x| c64_real(x)).collect(),
        }
    }

    /// Standard basis vector e_k in dimension `dim`.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut v = CVector::zeros(dim);
        v.data[k] = C64::ONE;
        v
    }

    pub fn dim(&self) -> usize {
        self.data.len()
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [C64] {
        &mut self.data
    }

    pub fn norm(&self) -> f64 {
        self.data.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Inner product ⟨self, other⟩, conjugate-linear in the first argument.
    pub fn inner(&self, other: &CVector) -> C64 {
        assert_eq!(self.dim(), other.dim(), "inner product dimension mismatch");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(a, b)| a.conj() * b)
            .sum()
    }

    pub fn scale(&self, s: C64) -> CVector {
        CVector {
            data: self.data.iter().map(|z| z * s).collect(),
        }
    }

    pub fn add(&self, other: &CVector) -> CVector {
        assert_eq!(self.dim(), other.dim());
        CVector {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a + b).collect(),
        }
    }

    pub fn sub(&self, other: &CVector) -> CVector {
        assert_eq!(self.dim(), other.dim());
        CVector {
            data: self.data.iter().zip(&other.data).map(|(a, b)| a - b).collect(),
        }
    }

    pub fn normalized(&self) -> CVector {
        let n = self.norm();
        if n == 0.0 {
            self.clone()
        } else {
            self.scale(c(1.0 / n, 0.0))
        }
    }

    /// Outer product |self⟩⟨other|.
    pub fn outer(&self, other: &CVector) -> CMatrix {
        CMatrix::from_fn(self.dim(), other.dim(), |i, j| {
            self.data[i] * other.data[j].conj()
        })
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|z| z.re.is_finite() && z.im.is_finite())
    }
}

impl std::ops::Index<usize> for CVector {
    type Output = C64;
    #[inline]
    fn index(&self, i: usize) -> &C64 {
        &self.data[i]
    }
}

impl std::ops::IndexMut<usize> for CVector {
    #[inline]
    fn index_mut(&mut self, i: usize) -> &mut C64 {
        &mut self.data[i]
    }
}

impl fmt::Debug for CVector {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "CVector [")?;
        for z in &self.data {
            write!(f, "{:+.4}{:+.4}i ", z.re, z.im)?;
        }
        write!(f, "]")
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn matmul_identity() {
        let a = CMatrix::from_real(&[&[1.0, 2.0], &[3.0, 4.0]]);
        let id = CMatrix::identity(2);
        assert_eq!(a.mul(&id), a);
        assert_eq!(id.mul(&a), a);
    }

    #[test]
    fn adjoint_conjugates() {
        let a = CMatrix::from_fn(2, 2, |i, j| c(i as f64, j as f64 + 1.0));
        let ad = a.adjoint();
        assert_eq!(ad[(0, 1)], c(1.0, -1.0));
        assert_eq!(ad[(1, 0)], c(0.0, -2.0));
    }

    #[test]
    fn kron_dims_and_values() {
        let a = CMatrix::from_real(&[&[1.0, 2.0]]);
        let b = CMatrix::from_real(&[&[3.0], &[4.0]]);
        let k = a.kron(&b);
        assert_eq!((k.rows(), k.cols()), (2, 2));
        assert_eq!(k[(0, 0)], c(3.0, 0.0));
        assert_eq!(k[(1, 1)], c(8.0, 0.0));
    }

    #[test]
    fn solve_small_system() {
        let a = CMatrix::from_real(&[&[2.0, 1.0], &[1.0, 3.0]]);
        let b = CMatrix::from_real(&[&[3.0], &[4.0]]);
        let x = a.solve(&b).unwrap();
        let r = &a.mul(&x) - &b;
        assert!(r.frob_norm() < 1e-12);
    }

    #[test]
    fn singular_solve_rejected() {
        let a = CMatrix::from_real(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let b = CMatrix::identity(2);
        assert!(a.solve(&b).is_err());
    }
}
