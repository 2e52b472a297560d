//! Dense complex eigensolvers.
//!
//! `eig_hermitian` runs cyclic Jacobi rotations; `eig_general` reduces to
//! Hessenberg form, iterates an explicit single-shift QR to a Schur form, and
//! back-substitutes triangular eigenvectors. Both are written for small dense
//! matrices (the spectral analyses in this crate stay well below 10^3 rows).

use super::matrix::{c, C64, CMatrix, CVector};
use super::svd::diagonalizing_rotation;
use crate::error::{Error, Result};

/// Eigen-decomposition of a Hermitian matrix: ascending real eigenvalues with
/// an orthonormal eigenbasis.
pub struct HermitianEig {
    pub values: Vec<f64>,
    pub vectors: Vec<CVector>,
}

/// Eigenvalues (with algebraic multiplicity) and right eigenvectors of a
/// general square matrix.
pub struct GeneralEig {
    pub values: Vec<C64>,
    pub vectors: Vec<CVector>,
}

/// Relative Hermiticity tolerance accepted by `eig_hermitian`.
pub const HERMITIAN_TOL: f64 = 1e-10;

const MAX_JACOBI_SWEEPS: usize = 60;
const MAX_QR_ITERS_PER_EIGENVALUE: usize = 100;

/// Jacobi eigensolver for Hermitian matrices.
pub fn eig_hermitian(m: &CMatrix) -> Result<HermitianEig> {
    if !m.is_square() {
        return Err(Error::Dimension("eig_hermitian requires a square matrix".into()));
    }
    let dev = m.herm_deviation();
    let scale = m.frob_norm().max(1e-300);
    if dev > HERMITIAN_TOL * scale {
        return Err(Error::NonHermitian {
            deviation: dev / scale,
            tol: HERMITIAN_TOL,
        });
    }
    let n = m.rows();
    let mut a = m.hermitize();
    let mut v = CMatrix::identity(n);
    let thresh = f64::EPSILON * (n as f64) * a.frob_norm();

    let mut converged = n < 2;
    for _ in 0..MAX_JACOBI_SWEEPS {
        let mut rotated = false;
        for p in 0..n {
            for q in p + 1..n {
                let g = a[(p, q)];
                if g.norm() <= thresh + f64::MIN_POSITIVE {
                    continue;
                }
                rotated = true;
                let (alpha, beta) = diagonalizing_rotation(a[(p, p)].re, a[(q, q)].re, g);
                apply_similarity_rotation(&mut a, p, q, alpha, beta);
                apply_column_rotation(&mut v, p, q, alpha, beta);
            }
        }
        if !rotated {
            converged = true;
            break;
        }
    }
    if !converged {
        return Err(Error::Convergence(format!(
            "Jacobi eigensolver did not settle in {MAX_JACOBI_SWEEPS} sweeps (n = {n})"
        )));
    }

    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&i, &j| a[(i, i)].re.total_cmp(&a[(j, j)].re));
    let values = order.iter().map(|&i| a[(i, i)].re).collect();
    let vectors = order.iter().map(|&i| v.column(i)).collect();
    Ok(HermitianEig { values, vectors })
}

/// A <- U* A U on rows/columns (p, q), keeping A explicitly Hermitian.
fn apply_similarity_rotation(a: &mut CMatrix, p: usize, q: usize, alpha: C64, beta: C64) {
    apply_column_rotation(a, p, q, alpha, beta);
    // Row update = conjugated column update on the adjoint; do it in place.
    let n = a.rows();
    for j in 0..n {
        let x = a[(p, j)];
        let y = a[(q, j)];
        a[(p, j)] = alpha.conj() * x + beta.conj() * y;
        a[(q, j)] = -beta * x + alpha * y;
    }
    // The rotation diagonalizes the (p, q) block exactly in exact arithmetic.
    a[(p, q)] = C64::ZERO;
    a[(q, p)] = C64::ZERO;
    a[(p, p)] = c(a[(p, p)].re, 0.0);
    a[(q, q)] = c(a[(q, q)].re, 0.0);
}

/// M <- M U with U acting on columns (p, q).
fn apply_column_rotation(m: &mut CMatrix, p: usize, q: usize, alpha: C64, beta: C64) {
    for i in 0..m.rows() {
        let x = m[(i, p)];
        let y = m[(i, q)];
        m[(i, p)] = x * alpha + y * beta;
        m[(i, q)] = -x * beta.conj() + y * alpha.conj();
    }
}

/// Complex Schur decomposition `m = z t z*` with `t` upper triangular.
pub fn schur(m: &CMatrix) -> Result<(CMatrix, CMatrix)> {
    if !m.is_square() {
        return Err(Error::Dimension("schur requires a square matrix".into()));
    }
    let n = m.rows();
    let mut h = m.clone();
    let mut z = CMatrix::identity(n);
    if n <= 1 {
        return Ok((h, z));
    }
    hessenberg_in_place(&mut h, &mut z);

    let norm = h.frob_norm().max(f64::MIN_POSITIVE);
    let eps = f64::EPSILON;
    let mut hi = n - 1;
    let mut iters_at_hi = 0usize;
    loop {
        // Zero negligible subdiagonals, then find the active block [lo, hi].
        let mut lo = hi;
        while lo > 0 {
            let s = h[(lo - 1, lo - 1)].norm() + h[(lo, lo)].norm();
            let s = if s == 0.0 { norm } else { s };
            if h[(lo, lo - 1)].norm() <= eps * s {
                h[(lo, lo - 1)] = C64::ZERO;
                break;
            }
            lo -= 1;
        }
        if lo == hi {
            // Eigenvalue converged at position hi.
            if hi == 0 {
                break;
            }
            hi -= 1;
            iters_at_hi = 0;
            continue;
        }

        iters_at_hi += 1;
        if iters_at_hi > MAX_QR_ITERS_PER_EIGENVALUE {
            return Err(Error::Convergence(format!(
                "QR iteration stalled at block [{lo}, {hi}] of a {n}x{n} matrix"
            )));
        }

        let sigma = if iters_at_hi.is_multiple_of(20) {
            // Exceptional shift to break symmetry-induced cycles.
            h[(hi, hi)] + c(0.75 * h[(hi, hi - 1)].norm() + 1e-3 * norm, 0.0)
        } else {
            wilkinson_shift(&h, hi)
        };

        // Explicit single-shift QR step on the active block.
        for k in lo..=hi {
            let d = h[(k, k)];
            h[(k, k)] = d - sigma;
        }
        let mut rotations = Vec::with_capacity(hi - lo);
        for k in lo..hi {
            let (cc, ss) = givens(h[(k, k)], h[(k + 1, k)]);
            apply_givens_rows(&mut h, k, cc, ss, k, n);
            h[(k + 1, k)] = C64::ZERO;
            rotations.push((k, cc, ss));
        }
        for &(k, cc, ss) in &rotations {
            apply_givens_cols(&mut h, k, cc, ss, 0, (k + 2).min(hi + 1));
            apply_givens_cols(&mut z, k, cc, ss, 0, n);
        }
        for k in lo..=hi {
            let d = h[(k, k)];
            h[(k, k)] = d + sigma;
        }
    }

    // Clean the strictly lower triangle (roundoff only).
    for i in 0..n {
        for j in 0..i {
            h[(i, j)] = C64::ZERO;
        }
    }
    Ok((h, z))
}

/// Eigenvalue of the trailing 2x2 block closest to the bottom-right entry.
fn wilkinson_shift(h: &CMatrix, hi: usize) -> C64 {
    let a = h[(hi - 1, hi - 1)];
    let b = h[(hi - 1, hi)];
    let cc = h[(hi, hi - 1)];
    let d = h[(hi, hi)];
    let mean = (a + d) * c(0.5, 0.0);
    let disc = ((a - d) * (a - d) * c(0.25, 0.0) + b * cc).sqrt();
    let mu1 = mean + disc;
    let mu2 = mean - disc;
    if (mu1 - d).norm() <= (mu2 - d).norm() {
        mu1
    } else {
        mu2
    }
}

/// Givens pair (c real, s complex) with [[c, s], [-conj(s), c]] · (f, g) = (r, 0).
fn givens(f: C64, g: C64) -> (f64, C64) {
    let gn = g.norm();
    if gn == 0.0 {
        return (1.0, C64::ZERO);
    }
    let fn_ = f.norm();
    let r = (fn_ * fn_ + gn * gn).sqrt();
    if fn_ == 0.0 {
        // Rotation that just swaps with a phase.
        return (0.0, g.conj() / c(gn, 0.0));
    }
    let cc = fn_ / r;
    let ss = (f / c(fn_, 0.0)) * g.conj() / c(r, 0.0);
    (cc, ss)
}

fn apply_givens_rows(h: &mut CMatrix, k: usize, cc: f64, ss: C64, from_col: usize, to_col: usize) {
    for j in from_col..to_col {
        let x = h[(k, j)];
        let y = h[(k + 1, j)];
        h[(k, j)] = x * cc + ss * y;
        h[(k + 1, j)] = -ss.conj() * x + y * cc;
    }
}

fn apply_givens_cols(h: &mut CMatrix, k: usize, cc: f64, ss: C64, from_row: usize, to_row: usize) {
    for i in from_row..to_row {
        let x = h[(i, k)];
        let y = h[(i, k + 1)];
        h[(i, k)] = x * cc + y * ss.conj();
        h[(i, k + 1)] = -(ss * x) + y * cc;
    }
}

/// Householder reduction to upper Hessenberg form, accumulating z.
fn hessenberg_in_place(h: &mut CMatrix, z: &mut CMatrix) {
    let n = h.rows();
    for k in 0..n.saturating_sub(2) {
        // Reflector for column k, rows k+1..n.
        let mut v: Vec<C64> = (k + 1..n).map(|i| h[(i, k)]).collect();
        let xnorm = v.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt();
        if xnorm == 0.0 {
            continue;
        }
        let x0 = v[0];
        let phase = if x0.norm() == 0.0 { C64::ONE } else { x0 / c(x0.norm(), 0.0) };
        let alpha = -phase * c(xnorm, 0.0);
        v[0] -= alpha;
        let vnorm_sq: f64 = v.iter().map(|x| x.norm_sqr()).sum();
        if vnorm_sq == 0.0 {
            continue;
        }
        let tau = 2.0 / vnorm_sq;

        // H <- P H, rows k+1.., all columns.
        for j in 0..n {
            let mut dot = C64::ZERO;
            for (off, vi) in v.iter().enumerate() {
                dot += vi.conj() * h[(k + 1 + off, j)];
            }
            dot *= c(tau, 0.0);
            for (off, vi) in v.iter().enumerate() {
                let upd = vi * dot;
                h[(k + 1 + off, j)] -= upd;
            }
        }
        // H <- H P, columns k+1.., all rows.
        for i in 0..n {
            let mut dot = C64::ZERO;
            for (off, vi) in v.iter().enumerate() {
                dot += h[(i, k + 1 + off)] * vi;
            }
            dot *= c(tau, 0.0);
            for (off, vi) in v.iter().enumerate() {
                let upd = dot * vi.conj();
                h[(i, k + 1 + off)] -= upd;
            }
        }
        // Z <- Z P.
        for i in 0..n {
            let mut dot = C64::ZERO;
            for (off, vi) in v.iter().enumerate() {
                dot += z[(i, k + 1 + off)] * vi;
            }
            dot *= c(tau, 0.0);
            for (off, vi) in v.iter().enumerate() {
                let upd = dot * vi.conj();
                z[(i, k + 1 + off)] -= upd;
            }
        }
        // Rows below the first subdiagonal are now zero by construction.
        for i in k + 2..n {
            h[(i, k)] = C64::ZERO;
        }
    }
}

/// General eigensolver via Schur form.
///
/// Eigenvalues come with algebraic multiplicity; each returned vector is
/// normalized. For defective clusters the vectors degenerate toward a common
/// direction, which callers detect through residual/rank checks.
pub fn eig_general(m: &CMatrix) -> Result<GeneralEig> {
    if !m.is_square() {
        return Err(Error::Dimension("eig_general requires a square matrix".into()));
    }
    if m.rows() > 4096 {
        return Err(Error::Dimension(format!(
            "eig_general supports dimensions up to 4096, got {}",
            m.rows()
        )));
    }
    if !m.is_finite() {
        return Err(Error::InvalidArgument("eig_general input has NaN/Inf entries".into()));
    }
    let n = m.rows();
    if n == 0 {
        return Ok(GeneralEig { values: vec![], vectors: vec![] });
    }
    let (t, z) = schur(m)?;
    let values: Vec<C64> = (0..n).map(|i| t[(i, i)]).collect();
    let smlnum = f64::EPSILON * t.frob_norm().max(f64::MIN_POSITIVE);

    let mut vectors = Vec::with_capacity(n);
    for k in 0..n {
        let lambda = values[k];
        let mut y = vec![C64::ZERO; n];
        y[k] = C64::ONE;
        for i in (0..k).rev() {
            let mut sum = C64::ZERO;
            for j in i + 1..=k {
                sum += t[(i, j)] * y[j];
            }
            let mut d = t[(i, i)] - lambda;
            if d.norm() < smlnum {
                d = c(smlnum, 0.0);
            }
            y[i] = -sum / d;
            let mag = y[i].norm();
            if mag > 1e120 {
                for yy in y.iter_mut() {
                    *yy /= c(mag, 0.0);
                }
            }
        }
        let mut v = CVector::zeros(n);
        for i in 0..n {
            let mut acc = C64::ZERO;
            for (j, yj) in y.iter().enumerate().take(k + 1) {
                acc += z[(i, j)] * yj;
            }
            v[i] = acc;
        }
        vectors.push(v.normalized());
    }
    Ok(GeneralEig { values, vectors })
}

/// Unitary polar factor `m (m* m)^(-1/2)`; fails when `m` is singular within
/// `tol` relative to its largest singular value.
pub fn polar_unitary(m: &CMatrix, tol: f64) -> Result<CMatrix> {
    if !m.is_square() {
        return Err(Error::Dimension("polar factor requires a square matrix".into()));
    }
    let gram = m.adjoint().mul(m);
    let eig = eig_hermitian(&gram)?;
    let top = eig.values.last().copied().unwrap_or(0.0).max(0.0);
    if top == 0.0 {
        return Err(Error::Singular("polar factor of the zero matrix".into()));
    }
    let mut inv_sqrt = CMatrix::zeros(m.rows(), m.cols());
    for (lam, v) in eig.values.iter().zip(&eig.vectors) {
        if *lam <= tol * tol * top {
            return Err(Error::Singular(format!(
                "polar factor: singular value ratio {:.3e} below tolerance {tol:.3e}",
                (lam.max(0.0) / top).sqrt()
            )));
        }
        let w = v.outer(v).scale(c(1.0 / lam.sqrt(), 0.0));
        inv_sqrt = &inv_sqrt + &w;
    }
    Ok(m.mul(&inv_sqrt))
}

/// Hermitian PSD square root via spectral decomposition.
pub fn herm_sqrt(m: &CMatrix) -> Result<CMatrix> {
    let eig = eig_hermitian(m)?;
    let mut out = CMatrix::zeros(m.rows(), m.cols());
    for (lam, v) in eig.values.iter().zip(&eig.vectors) {
        let l = lam.max(0.0).sqrt();
        if l == 0.0 {
            continue;
        }
        out = &out + &v.outer(v).scale(c(l, 0.0));
    }
    Ok(out)
}

/// Group complex values into clusters whose members are within `gap` of the
/// cluster seed; returns index groups.
pub fn cluster_by_gap(values: &[C64], gap: f64) -> Vec<Vec<usize>> {
    let mut clusters: Vec<(C64, Vec<usize>)> = Vec::new();
    for (i, &v) in values.iter().enumerate() {
        if let Some((_, members)) = clusters
            .iter_mut()
            .find(|(seed, _)| (*seed - v).norm() <= gap)
        {
            members.push(i);
        } else {
            clusters.push((v, vec![i]));
        }
    }
    clusters.into_iter().map(|(_, m)| m).collect()
}
