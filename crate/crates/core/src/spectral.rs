//! Superoperator construction and spectral classification.
//!
//! The channel restricted to block-diagonal operators is a `D x D` matrix with
//! `D = sum_i dim(i)^2` under column-stacking vectorization. Everything here
//! is read off that matrix: the fixed-point space (invariant states),
//! irreducibility, the peripheral spectrum and period, cyclic resolutions of
//! the identity, and the loop-length GCD diagnostic.

use std::collections::BTreeMap;

use crate::error::{Error, Result};
use crate::numerics::{
    c, cluster_by_gap, eig_general, null_space_abs, polar_unitary, C64, CMatrix, CVector,
    CLUSTER_GAP, DEFAULT_RANK_TOL,
};
use crate::structure::BlockSubspace;
use crate::walk::{BlockObservable, BlockState, WalkModel};

/// Default tolerance on ||lambda| - 1| for calling an eigenvalue peripheral.
pub const PERIPHERAL_TOL: f64 = 1e-8;

/// Relative eigenvalue floor below which an invariant state stops counting as
/// faithful on a block.
pub const FAITHFUL_TOL: f64 = 1e-8;

/// Layout entry: one site's block of the vectorized operator space.
#[derive(Debug, Clone)]
pub struct SiteLayout {
    pub site: String,
    pub offset: usize,
    pub dim: usize,
}

/// Matrix of the channel on vectorized block-diagonal operators.
#[derive(Debug, Clone)]
pub struct Superoperator {
    pub dim: usize,
    pub matrix: CMatrix,
    pub layout: Vec<SiteLayout>,
}

impl Superoperator {
    /// Column-stacked coordinates of a block state in this layout.
    pub fn vec_state(&self, rho: &BlockState) -> CVector {
        let mut out = CVector::zeros(self.dim);
        for entry in &self.layout {
            if let Some(block) = rho.blocks.get(&entry.site) {
                for col in 0..entry.dim {
                    for row in 0..entry.dim {
                        out[entry.offset + col * entry.dim + row] = block[(row, col)];
                    }
                }
            }
        }
        out
    }

    /// Inverse of [`Superoperator::vec_state`].
    pub fn unvec_state(&self, v: &CVector) -> BlockState {
        let mut blocks = BTreeMap::new();
        for entry in &self.layout {
            let mut m = CMatrix::zeros(entry.dim, entry.dim);
            for col in 0..entry.dim {
                for row in 0..entry.dim {
                    m[(row, col)] = v[entry.offset + col * entry.dim + row];
                }
            }
            blocks.insert(entry.site.clone(), m);
        }
        BlockState { blocks }
    }

    /// Spectral radius from the full eigenvalue set.
    pub fn spectral_radius(&self) -> Result<f64> {
        let eig = eig_general(&self.matrix)?;
        Ok(eig.values.iter().map(|l| l.norm()).fold(0.0, f64::max))
    }
}

/// Build the matrix of the channel: block `(i, j)` is
/// `sum_{e in E(j,i)} conj(L_e) (x) L_e` in column-stacking convention.
pub fn build_superoperator(walk: &WalkModel) -> Result<Superoperator> {
    let mut layout = Vec::with_capacity(walk.site_count());
    let mut offset = 0;
    for s in walk.sites() {
        layout.push(SiteLayout {
            site: s.id.clone(),
            offset,
            dim: s.dim,
        });
        offset += s.dim * s.dim;
    }
    let dim = offset;
    let mut matrix = CMatrix::zeros(dim, dim);
    let pos: BTreeMap<&str, usize> = layout
        .iter()
        .enumerate()
        .map(|(k, e)| (e.site.as_str(), k))
        .collect();
    for e in walk.edges() {
        let j = pos[e.from.as_str()];
        let i = pos[e.to.as_str()];
        let (node_j, node_i) = (&layout[j], &layout[i]);
        for m in &e.kraus {
            let block = m.conj().kron(m);
            for r in 0..node_i.dim * node_i.dim {
                for cc in 0..node_j.dim * node_j.dim {
                    let v = block[(r, cc)];
                    if v != C64::ZERO {
                        matrix[(node_i.offset + r, node_j.offset + cc)] += v;
                    }
                }
            }
        }
    }
    Ok(Superoperator { dim, matrix, layout })
}

/// Orthonormal (Hilbert-Schmidt) basis of the fixed-point space Ker(S - Id),
/// as block operators.
pub fn fixed_space(walk: &WalkModel, tol: f64) -> Result<(Superoperator, Vec<BlockState>)> {
    let sup = build_superoperator(walk)?;
    let a = &sup.matrix - &CMatrix::identity(sup.dim);
    // The channel has norm one, so `tol` is an absolute cutoff on ||(S-I)v||;
    // a cutoff relative to ||S - I|| would break on near-identity channels.
    let basis = null_space_abs(&a, tol)?;
    let ops = basis.iter().map(|v| sup.unvec_state(v)).collect();
    Ok((sup, ops))
}

/// Fixed points of the dual (Heisenberg) map, as block operators.
///
/// In the vec basis the dual map's matrix is the conjugate transpose of the
/// channel matrix. When the walk carries a faithful invariant state these
/// fixed points form a *-algebra, so spectral projections of Hermitian
/// elements are enclosures; the decomposition machinery relies on that.
pub fn dual_fixed_space(walk: &WalkModel, tol: f64) -> Result<(Superoperator, Vec<BlockState>)> {
    let sup = build_superoperator(walk)?;
    let a = &sup.matrix.adjoint() - &CMatrix::identity(sup.dim);
    let basis = null_space_abs(&a, tol)?;
    let ops = basis.iter().map(|v| sup.unvec_state(v)).collect();
    Ok((sup, ops))
}

/// Invariant states of a finite validated walk.
///
/// Returns an orthonormal basis of the fixed-point space together with a list
/// of trace-one PSD fixed states whose real span covers the span of all
/// invariant states. For an irreducible walk the list has exactly one
/// element, the faithful invariant state.
pub fn invariant_states(walk: &WalkModel, tol: f64) -> Result<(Vec<BlockState>, Vec<BlockState>)> {
    let sup = build_superoperator(walk)?;
    let a = &sup.matrix - &CMatrix::identity(sup.dim);
    let right = null_space_abs(&a, tol)?;
    if right.is_empty() {
        return Err(Error::Degenerate(
            "finite walk with empty fixed space; is the walk validated?".into(),
        ));
    }
    let left = null_space_abs(&a.adjoint(), tol)?;
    if left.len() != right.len() {
        return Err(Error::Degenerate(format!(
            "fixed space dimension mismatch: {} right vs {} left null vectors",
            right.len(),
            left.len()
        )));
    }
    let k = right.len();

    // Spectral projector onto the fixed space along the complementary
    // invariant subspace: P = R (L* R)^{-1} L*.
    let mut rmat = CMatrix::zeros(sup.dim, k);
    let mut lmat = CMatrix::zeros(sup.dim, k);
    for (j, (r, l)) in right.iter().zip(&left).enumerate() {
        rmat.set_column(j, r);
        lmat.set_column(j, l);
    }
    let lh = lmat.adjoint();
    let gram = lh.mul(&rmat);
    let y = gram
        .solve(&lh)
        .map_err(|_| Error::Degenerate("eigenvalue 1 is not semisimple within tolerance".into()))?;
    let projector = rmat.mul(&y);

    // Project physical states through P; their images are PSD fixed points.
    let mut states: Vec<BlockState> = Vec::new();
    let mut kept_vecs: Vec<CVector> = Vec::new();
    for cand in candidate_states(walk) {
        if states.len() == k {
            break;
        }
        let w = projector.apply(&sup.vec_state(&cand));
        let fixed = sup.unvec_state(&w).hermitize();
        let tr = fixed.trace().re;
        if tr.abs() < 1e-12 {
            continue;
        }
        let state = fixed.scale(c(1.0 / tr, 0.0));
        if state.min_eigenvalue()? < -1e-8 {
            continue;
        }
        // Keep only directions that enlarge the span.
        let v = sup.vec_state(&state);
        let mut w = v.clone();
        for b in &kept_vecs {
            let coeff = b.inner(&w).re / b.inner(b).re;
            w = w.sub(&b.scale(c(coeff, 0.0)));
        }
        if w.norm() > 1e-6 * v.norm().max(1.0) {
            kept_vecs.push(v);
            states.push(state);
        }
    }
    let fixed_basis = right.iter().map(|v| sup.unvec_state(v)).collect();
    Ok((fixed_basis, states))
}

/// Physical probe states: per-site basis states, pairwise superpositions, and
/// the maximally mixed state last.
fn candidate_states(walk: &WalkModel) -> Vec<BlockState> {
    let mut out = Vec::new();
    for s in walk.sites() {
        for a in 0..s.dim {
            out.push(
                BlockState::pure(walk, &s.id, &CVector::basis(s.dim, a))
                    .expect("basis state fits the site"),
            );
        }
    }
    for s in walk.sites() {
        for a in 0..s.dim {
            for b in a + 1..s.dim {
                let mut plus = CVector::zeros(s.dim);
                plus[a] = C64::ONE;
                plus[b] = C64::ONE;
                out.push(BlockState::pure(walk, &s.id, &plus).expect("fits"));
                let mut phase = CVector::zeros(s.dim);
                phase[a] = C64::ONE;
                phase[b] = c(0.0, 1.0);
                out.push(BlockState::pure(walk, &s.id, &phase).expect("fits"));
            }
        }
    }
    out.push(BlockState::maximally_mixed(walk));
    out
}

/// A walk is irreducible iff its fixed space is one-dimensional and the
/// invariant state is faithful (strictly positive on every block).
pub fn is_irreducible(walk: &WalkModel) -> Result<bool> {
    let (basis, states) = invariant_states(walk, DEFAULT_RANK_TOL)?;
    if basis.len() != 1 || states.len() != 1 {
        return Ok(false);
    }
    state_is_faithful(walk, &states[0])
}

/// Faithfulness of a state: smallest block eigenvalue relative to the largest.
pub fn state_is_faithful(walk: &WalkModel, state: &BlockState) -> Result<bool> {
    let mut min = f64::INFINITY;
    let mut max: f64 = 0.0;
    for s in walk.sites() {
        let b = state.block_or_zero(walk, &s.id)?;
        let eig = crate::numerics::eig_hermitian(&b.hermitize())?;
        min = min.min(eig.values.first().copied().unwrap_or(0.0));
        max = max.max(eig.values.last().copied().unwrap_or(0.0));
    }
    Ok(max > 0.0 && min > FAITHFUL_TOL * max)
}

/// Peripheral spectrum, period, and simplicity of the leading eigenvalue.
#[derive(Debug, Clone)]
pub struct SpectrumReport {
    pub eigenvalues: Vec<C64>,
    pub peripheral: Vec<C64>,
    pub period: usize,
    pub simple_one: bool,
}

/// Period of an irreducible walk from its peripheral spectrum.
///
/// The count of eigenvalues with ||lambda| - 1| <= tol is the period; the
/// peripheral set must match the d-th roots of unity within 1e-7, otherwise a
/// diagnostic failure is raised rather than silently rounded away.
pub fn period(walk: &WalkModel, tol: f64) -> Result<SpectrumReport> {
    if !is_irreducible(walk)? {
        return Err(Error::Reducible(format!(
            "period is defined for irreducible walks; `{}` is reducible",
            walk.name
        )));
    }
    let sup = build_superoperator(walk)?;
    let eig = eig_general(&sup.matrix)?;
    let peripheral: Vec<C64> = eig
        .values
        .iter()
        .copied()
        .filter(|l| (l.norm() - 1.0).abs() <= tol)
        .collect();
    let d = peripheral.len();
    if d == 0 {
        return Err(Error::PeripheralMismatch(
            "no peripheral eigenvalues found for a trace-preserving walk".into(),
        ));
    }
    // The peripheral set of an irreducible walk is the cyclic group of d-th
    // roots of unity; check the match one root at a time.
    let mut unmatched: Vec<C64> = peripheral.clone();
    for k in 0..d {
        let root = C64::from_polar(1.0, 2.0 * std::f64::consts::PI * k as f64 / d as f64);
        let Some(pos) = unmatched
            .iter()
            .position(|l| (l - root).norm() <= CLUSTER_GAP)
        else {
            return Err(Error::PeripheralMismatch(format!(
                "peripheral set {:?} does not contain the {d}-th root of unity #{k}",
                peripheral
            )));
        };
        unmatched.swap_remove(pos);
    }
    let ones = eig
        .values
        .iter()
        .filter(|l| (*l - C64::ONE).norm() <= CLUSTER_GAP)
        .count();
    Ok(SpectrumReport {
        eigenvalues: eig.values,
        peripheral,
        period: d,
        simple_one: ones == 1,
    })
}

/// Cyclic resolution of the identity: orthogonal projections P_0 .. P_{d-1}
/// with dual action P_k -> P_{k-1 mod d}.
#[derive(Debug, Clone)]
pub struct CyclicResolution {
    pub projections: Vec<BlockSubspace>,
}

impl CyclicResolution {
    /// Materialize the per-site projector matrix of projection `k`.
    pub fn projector_matrix(&self, k: usize, walk: &WalkModel, site: &str) -> Result<CMatrix> {
        let d = walk.dim_of(site)?;
        let mut p = CMatrix::zeros(d, d);
        if let Some(vs) = self.projections[k].blocks.get(site) {
            for v in vs {
                p = &p + &v.outer(v);
            }
        }
        Ok(p)
    }

    /// Projection `k` as a block observable.
    pub fn projector_observable(&self, k: usize, walk: &WalkModel) -> Result<BlockObservable> {
        let mut blocks = BTreeMap::new();
        for s in walk.sites() {
            blocks.insert(s.id.clone(), self.projector_matrix(k, walk, &s.id)?);
        }
        Ok(BlockObservable { blocks })
    }
}

/// Extract the cyclic resolution of an irreducible walk of period `d`.
///
/// The dual eigen-operator at `e^{2 pi i / d}` is rescaled to a unitary by a
/// per-site polar correction, its global phase is fixed so the first nonzero
/// diagonal entry is positive real, and its eigenspaces (clustered onto d
/// rotated roots of unity) give the projections. The cyclic dual action and
/// the edge-wise block commutation relation are verified before returning.
pub fn cyclic_resolution(walk: &WalkModel, d: usize) -> Result<CyclicResolution> {
    if d == 0 {
        return Err(Error::InvalidArgument("period 0 does not exist".into()));
    }
    if d == 1 {
        let mut blocks = BTreeMap::new();
        for s in walk.sites() {
            blocks.insert(
                s.id.clone(),
                (0..s.dim).map(|k| CVector::basis(s.dim, k)).collect(),
            );
        }
        return Ok(CyclicResolution {
            projections: vec![BlockSubspace { blocks }],
        });
    }

    let sup = build_superoperator(walk)?;
    let omega = C64::from_polar(1.0, 2.0 * std::f64::consts::PI / d as f64);
    // Eigen-operator of the dual map at omega: the dual matrix is the
    // conjugate transpose in the Hilbert-Schmidt-orthonormal vec basis.
    let dual = sup.matrix.adjoint();
    let eig = eig_general(&dual)?;
    let (best, _) = eig
        .values
        .iter()
        .enumerate()
        .min_by(|(_, a), (_, b)| (*a - omega).norm().total_cmp(&(*b - omega).norm()))
        .ok_or_else(|| Error::Degenerate("empty spectrum".into()))?;
    if (eig.values[best] - omega).norm() > CLUSTER_GAP {
        return Err(Error::PeripheralMismatch(format!(
            "no dual eigenvalue near e^(2 pi i / {d}); closest is {}",
            eig.values[best]
        )));
    }
    let u_state = sup.unvec_state(&eig.vectors[best]);

    // Rescale to roughly unit singular values, then polar-correct per site.
    let mut sq_sum = 0.0;
    for s in walk.sites() {
        let b = u_state.block_or_zero(walk, &s.id)?;
        sq_sum += b.frob_norm().powi(2);
    }
    let scale = (sq_sum / walk.total_dim() as f64).sqrt();
    if scale == 0.0 {
        return Err(Error::Degenerate("zero dual eigen-operator".into()));
    }
    let mut unitary_blocks: BTreeMap<String, CMatrix> = BTreeMap::new();
    for s in walk.sites() {
        let b = u_state
            .block_or_zero(walk, &s.id)?
            .scale(c(1.0 / scale, 0.0));
        let u = polar_unitary(&b, 1e-6).map_err(|_| {
            Error::Degenerate(format!(
                "dual eigen-operator is not invertible on site `{}`",
                s.id
            ))
        })?;
        unitary_blocks.insert(s.id.clone(), u);
    }

    // Global phase: first nonzero diagonal entry becomes positive real.
    let mut phase = C64::ONE;
    'outer: for s in walk.sites() {
        let u = &unitary_blocks[&s.id];
        for i in 0..u.rows() {
            let z = u[(i, i)];
            if z.norm() > 1e-8 {
                phase = z.conj() / c(z.norm(), 0.0);
                break 'outer;
            }
        }
    }
    for u in unitary_blocks.values_mut() {
        *u = u.scale(phase);
    }

    // Eigenvalues of the unitary cluster on d rotated roots of unity.
    let mut all_values = Vec::new();
    let mut per_site: BTreeMap<String, Vec<C64>> = BTreeMap::new();
    for s in walk.sites() {
        let e = eig_general(&unitary_blocks[&s.id])?;
        per_site.insert(s.id.clone(), e.values.clone());
        all_values.extend(e.values);
    }
    let clusters = cluster_by_gap(&all_values, 1e-6);
    if clusters.len() != d {
        return Err(Error::Degenerate(format!(
            "dual eigen-operator has {} eigenvalue clusters, expected {d}",
            clusters.len()
        )));
    }
    let centers: Vec<C64> = clusters
        .iter()
        .map(|idx| {
            let sum: C64 = idx.iter().map(|&i| all_values[i]).sum();
            let mean = sum / c(idx.len() as f64, 0.0);
            mean / c(mean.norm(), 0.0)
        })
        .collect();
    // Label clusters: k = 0 is the center closest to angle 0; center k must
    // equal center_0 * omega^k.
    let base = centers
        .iter()
        .copied()
        .min_by(|a, b| a.arg().abs().total_cmp(&b.arg().abs()))
        .unwrap();
    let mut ordered_centers = Vec::with_capacity(d);
    for k in 0..d {
        let want = base * omega.powu(k as u32);
        let found = centers
            .iter()
            .copied()
            .find(|z| (z - want).norm() <= 1e-5)
            .ok_or_else(|| {
                Error::Degenerate(format!(
                    "eigenvalue clusters of the dual eigen-operator are not the rotated {d}-th roots of unity"
                ))
            })?;
        ordered_centers.push(found);
    }

    // Per-site ranges: kernel of (U_j - mu_k Id).
    let mut projections = Vec::with_capacity(d);
    for &mu in &ordered_centers {
        let mut blocks = BTreeMap::new();
        for s in walk.sites() {
            let u = &unitary_blocks[&s.id];
            let shifted = u - &CMatrix::identity(s.dim).scale(mu);
            // The unitary has norm one, so an absolute cutoff separates the
            // in-cluster directions (sigma ~ 1e-7) from the rest (sigma ~ 1).
            let basis = null_space_abs(&shifted, 1e-4)?;
            if !basis.is_empty() {
                blocks.insert(s.id.clone(), basis);
            }
        }
        projections.push(BlockSubspace { blocks });
    }
    let res = CyclicResolution { projections };

    // Completeness per site.
    for s in walk.sites() {
        let total: usize = res
            .projections
            .iter()
            .map(|p| p.blocks.get(&s.id).map_or(0, Vec::len))
            .sum();
        if total != s.dim {
            return Err(Error::Degenerate(format!(
                "cyclic projections cover dimension {total} of {} at site `{}`",
                s.dim, s.id
            )));
        }
    }
    // Dual cyclic action: M*(P_k) = P_{k-1 mod d} within 1e-8.
    for k in 0..d {
        let pk = res.projector_observable(k, walk)?;
        let prev = res.projector_observable((k + d - 1) % d, walk)?;
        let moved = walk.apply_dual(&pk)?;
        let gap = moved.frob_distance(&prev, walk);
        if gap > 1e-8 {
            return Err(Error::Degenerate(format!(
                "cyclic relation fails: ||M*(P_{k}) - P_{}|| = {gap:.3e}",
                (k + d - 1) % d
            )));
        }
    }
    // Edge-wise block relation: P_{k,i} L = L P_{k-1 mod d, j}.
    for e in walk.edges() {
        for m in &e.kraus {
            for k in 0..d {
                let pi = res.projector_matrix(k, walk, &e.to)?;
                let pj = res.projector_matrix((k + d - 1) % d, walk, &e.from)?;
                let gap = (&pi.mul(m) - &m.mul(&pj)).frob_norm();
                if gap > 1e-8 {
                    return Err(Error::Degenerate(format!(
                        "block commutation fails on edge {} -> {} at k = {k}: {gap:.3e}",
                        e.from, e.to
                    )));
                }
            }
        }
    }
    Ok(res)
}

/// Iterated channel: returns the trajectory rho, M(rho), ..., M^n(rho).
pub fn evolve(walk: &WalkModel, rho: &BlockState, n: usize) -> Result<Vec<BlockState>> {
    let mut out = Vec::with_capacity(n + 1);
    out.push(rho.clone());
    for _ in 0..n {
        let next = walk.apply(out.last().unwrap())?;
        out.push(next);
    }
    Ok(out)
}

/// Cesaro average (1/n) sum_{k<n} M^k(rho).
pub fn cesaro_evolve(walk: &WalkModel, rho: &BlockState, n: usize) -> Result<BlockState> {
    if n == 0 {
        return Err(Error::InvalidArgument("Cesaro average needs n >= 1".into()));
    }
    let mut acc = rho.clone();
    let mut cur = rho.clone();
    for _ in 1..n {
        cur = walk.apply(&cur)?;
        acc = acc.add(&cur);
    }
    Ok(acc.scale(c(1.0 / n as f64, 0.0)))
}

/// GCD of loop lengths at `site` whose loop operators overlap `x`.
///
/// For each length `l <= max_len` the aggregate
/// `q_l = sum_{loops pi of length l} |<x, L_pi x>|^2` is computed by evolving
/// the pure state `|x><x|` at `site` (the per-path sum collapses into the
/// channel iteration, so no path enumeration is needed); lengths qualify when
/// `sqrt(q_l) > tol`. Returns 0 when no loop qualifies. `x` is normalized
/// first. The authoritative period is spectral; this is a diagnostic.
pub fn loop_gcd(
    walk: &WalkModel,
    site: &str,
    x: &CVector,
    max_len: usize,
    tol: f64,
) -> Result<usize> {
    let d = walk.dim_of(site)?;
    if x.dim() != d {
        return Err(Error::Dimension(format!(
            "vector of dimension {} at site `{site}` of dimension {d}",
            x.dim()
        )));
    }
    if x.norm() == 0.0 {
        return Err(Error::InvalidArgument("loop_gcd needs a nonzero vector".into()));
    }
    let xn = x.normalized();
    let mut rho = BlockState::pure(walk, site, &xn)?;
    let mut g = 0usize;
    for len in 1..=max_len {
        rho = walk.apply(&rho)?;
        let block = rho.block_or_zero(walk, site)?;
        let q = xn.inner(&block.apply(&xn)).re.max(0.0);
        if q.sqrt() > tol {
            g = gcd(g, len);
        }
    }
    Ok(g)
}

fn gcd(a: usize, b: usize) -> usize {
    if b == 0 {
        a
    } else {
        gcd(b, a % b)
    }
}

/// Default loop search horizon: twice the site count times the largest
/// internal dimension.
pub fn default_loop_horizon(walk: &WalkModel) -> usize {
    2 * walk.site_count() * walk.max_dim()
}
