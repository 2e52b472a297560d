//! Dense complex linear-algebra kernel.
//!
//! Conventions fixed here and used by every other module:
//! - matrices are row-major;
//! - vectorization is column-stacking, so vec(A X B) = (B^T ⊗ A) vec(X);
//! - the default rank/null tolerance is 1e-9 relative, overridable per call;
//! - eigenvalue clusters are grouped by absolute gap 1e-7.
//!
//! All operations are pure functions of their inputs.

mod eig;
mod matrix;
mod svd;

pub use eig::{
    cluster_by_gap, eig_general, eig_hermitian, herm_sqrt, polar_unitary, schur, GeneralEig,
    HermitianEig, HERMITIAN_TOL,
};
pub use matrix::{c, C64, CMatrix, CVector};
pub use svd::{null_space, null_space_abs, opnorm2, svd, trace_norm, Svd};

use crate::error::{Error, Result};

/// Default relative tolerance for rank and kernel decisions.
pub const DEFAULT_RANK_TOL: f64 = 1e-9;

/// Default absolute gap for grouping degenerate eigenvalue clusters.
pub const CLUSTER_GAP: f64 = 1e-7;

/// Extend an orthonormal `basis` by the `candidates`, Gram-Schmidt style.
///
/// Candidates whose residual after projection onto the current span is below
/// `tol` are dropped; the rest are orthonormalized (with one
/// re-orthogonalization pass) and appended. The returned list starts with the
/// original basis.
pub fn orthonormal_extend(
    basis: &[CVector],
    candidates: &[CVector],
    tol: f64,
) -> Result<Vec<CVector>> {
    let dim = basis
        .first()
        .or_else(|| candidates.first())
        .map(CVector::dim)
        .unwrap_or(0);
    for v in basis.iter().chain(candidates) {
        if v.dim() != dim {
            return Err(Error::Dimension(format!(
                "orthonormal_extend: vector of dimension {} among dimension {}",
                v.dim(),
                dim
            )));
        }
    }
    let mut out: Vec<CVector> = basis.to_vec();
    for cand in candidates {
        if out.len() == dim {
            break;
        }
        let mut w = cand.clone();
        for _ in 0..2 {
            for b in &out {
                let coeff = b.inner(&w);
                w = w.sub(&b.scale(coeff));
            }
        }
        let n = w.norm();
        if n > tol {
            out.push(w.scale(c(1.0 / n, 0.0)));
        }
    }
    Ok(out)
}

/// Orthonormal complement of `basis` inside the full space of dimension `dim`.
pub fn orthonormal_complement(basis: &[CVector], dim: usize, tol: f64) -> Result<Vec<CVector>> {
    let candidates: Vec<CVector> = (0..dim).map(|k| CVector::basis(dim, k)).collect();
    let full = orthonormal_extend(basis, &candidates, tol)?;
    Ok(full[basis.len()..].to_vec())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn extend_normalizes_single_candidate() {
        let out = orthonormal_extend(&[], &[CVector::from_real(&[2.0, 0.0])], 1e-9).unwrap();
        assert_eq!(out.len(), 1);
        assert!((out[0][0].re - 1.0).abs() < 1e-15);
        assert!(out[0][1].norm() < 1e-15);
    }

    #[test]
    fn extend_drops_duplicates() {
        let e1 = CVector::basis(2, 0);
        let out = orthonormal_extend(std::slice::from_ref(&e1), std::slice::from_ref(&e1), 1e-9).unwrap();
        assert_eq!(out.len(), 1);
    }

    #[test]
    fn extend_gram_schmidt_step() {
        let e1 = CVector::basis(2, 0);
        let s = 1.0 / 2f64.sqrt();
        let cand = CVector::from_real(&[s, s]);
        let out = orthonormal_extend(&[e1], &[cand], 1e-9).unwrap();
        assert_eq!(out.len(), 2);
        assert!(out[0].inner(&out[1]).norm() < 1e-12);
        assert!((out[1][1].norm() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn extend_rejects_dimension_mismatch() {
        let e1 = CVector::basis(2, 0);
        let bad = CVector::basis(3, 0);
        assert!(orthonormal_extend(&[e1], &[bad], 1e-9).is_err());
    }

    #[test]
    fn complement_fills_space() {
        let e1 = CVector::basis(3, 0);
        let comp = orthonormal_complement(&[e1], 3, 1e-9).unwrap();
        assert_eq!(comp.len(), 2);
        for v in &comp {
            assert!(v[0].norm() < 1e-12);
        }
    }
}
