//! Singular value decomposition by one-sided Jacobi rotations.
//!
//! One-sided Jacobi orthogonalizes the columns of the input; it is slow
//! compared to bidiagonalization but delivers high relative accuracy on the
//! small dense matrices this crate works with.

use super::matrix::{c, C64, CMatrix, CVector};
use crate::error::{Error, Result};

/// Result of a singular value decomposition `m = U diag(sigma) V*`.
///
/// Singular values are sorted in descending order. `u` is rows x rank-padded
/// (square on columns count of `m`), `v` is cols x cols unitary.
pub struct Svd {
    pub u: CMatrix,
    pub sigma: Vec<f64>,
    pub v: CMatrix,
}

const MAX_SWEEPS: usize = 60;

/// One-sided Jacobi SVD. Works for any rectangular matrix.
pub fn svd(m: &CMatrix) -> Result<Svd> {
    let rows = m.rows();
    let cols = m.cols();
    let mut b = m.clone();
    let mut v = CMatrix::identity(cols);

    let scale = m.frob_norm();
    if scale == 0.0 {
        return Ok(Svd {
            u: CMatrix::zeros(rows, cols),
            sigma: vec![0.0; cols],
            v,
        });
    }
    let tol = f64::EPSILON * (cols.max(rows) as f64);

    let mut converged = false;
    for _ in 0..MAX_SWEEPS {
        let mut rotated = false;
        for p in 0..cols {
            for q in p + 1..cols {
                let (app, aqq, apq) = column_gram(&b, p, q);
                if apq.norm() <= tol * (app * aqq).sqrt() + f64::MIN_POSITIVE {
                    continue;
                }
                rotated = true;
                let (alpha, beta) = diagonalizing_rotation(app, aqq, apq);
                rotate_columns(&mut b, p, q, alpha, beta);
                rotate_columns(&mut v, p, q, alpha, beta);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence(format!(
            "one-sided Jacobi SVD did not settle in {MAX_SWEEPS} sweeps ({rows}x{cols})"
        )));
    }

    // Column norms are the singular values; sort descending.
    let mut order: Vec<usize> = (0..cols).collect();
    let norms: Vec<f64> = (0..cols).map(|j| b.column(j).norm()).collect();
    order.sort_by(|&a, &bb| norms[bb].total_cmp(&norms[a]));

    let mut u = CMatrix::zeros(rows, cols);
    let mut vv = CMatrix::zeros(cols, cols);
    let mut sigma = Vec::with_capacity(cols);
    for (slot, &j) in order.iter().enumerate() {
        let s = norms[j];
        sigma.push(s);
        if s > 0.0 {
            u.set_column(slot, &b.column(j).scale(c(1.0 / s, 0.0)));
        }
        vv.set_column(slot, &v.column(j));
    }
    Ok(Svd { u, sigma, v: vv })
}

/// Gram data for columns p, q: (‖b_p‖², ‖b_q‖², ⟨b_p, b_q⟩).
fn column_gram(b: &CMatrix, p: usize, q: usize) -> (f64, f64, C64) {
    let mut app = 0.0;
    let mut aqq = 0.0;
    let mut apq = C64::ZERO;
    for i in 0..b.rows() {
        let x = b[(i, p)];
        let y = b[(i, q)];
        app += x.norm_sqr();
        aqq += y.norm_sqr();
        apq += x.conj() * y;
    }
    (app, aqq, apq)
}

/// Unitary 2x2 `[[alpha, -conj(beta)], [beta, conj(alpha)]]` whose columns are
/// the eigenvectors of the Hermitian matrix [[a, g], [conj(g), b]], largest
/// eigenvalue first.
pub(crate) fn diagonalizing_rotation(a: f64, b: f64, g: C64) -> (C64, C64) {
    let delta = 0.5 * (a - b);
    let r = (delta * delta + g.norm_sqr()).sqrt();
    let lam1 = 0.5 * (a + b) + r;
    // Pick the eigenvector expression with the larger leading component.
    let (mut x, mut y) = if delta >= 0.0 {
        (c(lam1 - b, 0.0), g.conj())
    } else {
        (g, c(lam1 - a, 0.0))
    };
    let n = (x.norm_sqr() + y.norm_sqr()).sqrt();
    if n == 0.0 {
        return (C64::ONE, C64::ZERO);
    }
    x /= n;
    y /= n;
    (x, y)
}

/// Apply the rotation on columns (p, q): [b_p, b_q] <- [b_p, b_q] U.
fn rotate_columns(b: &mut CMatrix, p: usize, q: usize, alpha: C64, beta: C64) {
    for i in 0..b.rows() {
        let x = b[(i, p)];
        let y = b[(i, q)];
        b[(i, p)] = x * alpha + y * beta;
        b[(i, q)] = -x * beta.conj() + y * alpha.conj();
    }
}

/// Operator 2-norm (largest singular value).
pub fn opnorm2(m: &CMatrix) -> Result<f64> {
    Ok(svd(m)?.sigma.first().copied().unwrap_or(0.0))
}

/// Trace norm (sum of singular values) of a square matrix.
pub fn trace_norm(m: &CMatrix) -> Result<f64> {
    if !m.is_square() {
        return Err(Error::Dimension("trace norm requires a square matrix".into()));
    }
    Ok(svd(m)?.sigma.iter().sum())
}

/// Orthonormal basis of the numerical kernel {v : ‖m v‖ <= tol·‖m‖}.
///
/// The right singular vectors with singular value below `tol * sigma_max`
/// span the kernel; a zero matrix yields the full standard basis.
pub fn null_space(m: &CMatrix, tol: f64) -> Result<Vec<CVector>> {
    let dec = svd(m)?;
    let smax = dec.sigma.first().copied().unwrap_or(0.0);
    let cutoff = tol * smax;
    let mut basis = Vec::new();
    for (j, &s) in dec.sigma.iter().enumerate() {
        if s <= cutoff || smax == 0.0 {
            basis.push(dec.v.column(j));
        }
    }
    Ok(basis)
}

/// Kernel basis with an absolute singular-value cutoff, for callers that know
/// the scale of `m` (e.g. shifted unitaries, where ‖m‖ can itself vanish).
pub fn null_space_abs(m: &CMatrix, cutoff: f64) -> Result<Vec<CVector>> {
    let dec = svd(m)?;
    let mut basis = Vec::new();
    for (j, &s) in dec.sigma.iter().enumerate() {
        if s <= cutoff {
            basis.push(dec.v.column(j));
        }
    }
    Ok(basis)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn reconstruct(dec: &Svd, rows: usize, cols: usize) -> CMatrix {
        let mut s = CMatrix::zeros(cols, cols);
        for (i, &x) in dec.sigma.iter().enumerate() {
            s[(i, i)] = c(x, 0.0);
        }
        let _ = rows;
        dec.u.mul(&s).mul(&dec.v.adjoint())
    }

    #[test]
    fn svd_reconstructs_random_matrix() {
        // Fixed pseudo-random entries, no RNG dependency here.
        let m = CMatrix::from_fn(5, 3, |i, j| {
            c(
                ((i * 7 + j * 3 + 1) as f64 * 0.37).sin(),
                ((i + 2 * j) as f64 * 0.11).cos(),
            )
        });
        let dec = svd(&m).unwrap();
        let r = &reconstruct(&dec, 5, 3) - &m;
        assert!(r.frob_norm() < 1e-12 * m.frob_norm());
        // V unitary
        let vtv = dec.v.adjoint().mul(&dec.v);
        assert!((&vtv - &CMatrix::identity(3)).frob_norm() < 1e-12);
    }

    #[test]
    fn trace_norm_examples() {
        // identity n x n -> n
        assert!((trace_norm(&CMatrix::identity(4)).unwrap() - 4.0).abs() < 1e-12);
        // diag(1, -2) -> 3
        let d = CMatrix::diag(&[c(1.0, 0.0), c(-2.0, 0.0)]);
        assert!((trace_norm(&d).unwrap() - 3.0).abs() < 1e-12);
        // single Jordan block has one singular value 1
        let j = CMatrix::from_real(&[&[0.0, 1.0], &[0.0, 0.0]]);
        assert!((trace_norm(&j).unwrap() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn null_space_examples() {
        // zero 2x2 -> full basis
        let z = CMatrix::zeros(2, 2);
        assert_eq!(null_space(&z, 1e-9).unwrap().len(), 2);
        // identity -> empty
        assert!(null_space(&CMatrix::identity(3), 1e-9).unwrap().is_empty());
        // [[1,1],[1,1]] -> span{(1,-1)/sqrt(2)}
        let m = CMatrix::from_real(&[&[1.0, 1.0], &[1.0, 1.0]]);
        let ns = null_space(&m, 1e-9).unwrap();
        assert_eq!(ns.len(), 1);
        let v = &ns[0];
        assert!((v[0] + v[1]).norm() < 1e-12);
        assert!((v.norm() - 1.0).abs() < 1e-12);
    }
}
