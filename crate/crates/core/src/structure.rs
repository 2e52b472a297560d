//! Enclosures, accessibility, recurrent/transient split, decomposition into
//! minimal enclosures, and the structure of invariant states.
//!
//! An enclosure is a per-site family of subspaces `V = (+) V_i` stable under
//! every transition operator: `L_e V_j ⊆ V_i` for each edge `j -> i`. Minimal
//! enclosures are the supports of extremal invariant states; two minimal
//! enclosures are either orthogonal or linked by a partial isometry that
//! transports invariant states and supports invariant coherences.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::numerics::{
    c, cluster_by_gap, eig_hermitian, orthonormal_complement, orthonormal_extend, polar_unitary,
    C64, CMatrix, CVector, DEFAULT_RANK_TOL,
};
use crate::spectral::{dual_fixed_space, fixed_space, invariant_states};
use crate::walk::{BlockState, SiteSpace, TransitionEdge, WalkModel};

/// Default absolute tolerance for enclosure residuals.
pub const ENCLOSURE_TOL: f64 = 1e-9;

/// Per-site orthonormal bases representing a block subspace `(+) V_i`.
/// Absent keys mean the zero subspace at that site.
#[derive(Debug, Clone)]
pub struct BlockSubspace {
    pub blocks: BTreeMap<String, Vec<CVector>>,
}

impl BlockSubspace {
    pub fn empty() -> Self {
        BlockSubspace { blocks: BTreeMap::new() }
    }

    /// The full space of a walk: the standard basis at every site.
    pub fn full(walk: &WalkModel) -> Self {
        let mut blocks = BTreeMap::new();
        for s in walk.sites() {
            blocks.insert(
                s.id.clone(),
                (0..s.dim).map(|k| CVector::basis(s.dim, k)).collect(),
            );
        }
        BlockSubspace { blocks }
    }

    pub fn dim_at(&self, site: &str) -> usize {
        self.blocks.get(site).map_or(0, Vec::len)
    }

    pub fn total_dim(&self) -> usize {
        self.blocks.values().map(Vec::len).sum()
    }

    pub fn basis_at(&self, site: &str) -> &[CVector] {
        self.blocks.get(site).map_or(&[], Vec::as_slice)
    }

    /// Basis as a `dim x k` matrix whose columns are the site basis vectors.
    pub fn basis_matrix(&self, walk: &WalkModel, site: &str) -> Result<CMatrix> {
        let d = walk.dim_of(site)?;
        let vs = self.basis_at(site);
        let mut b = CMatrix::zeros(d, vs.len());
        for (j, v) in vs.iter().enumerate() {
            b.set_column(j, v);
        }
        Ok(b)
    }

    /// Residual norm of `v` outside the subspace at `site`.
    pub fn residual_at(&self, site: &str, v: &CVector) -> f64 {
        let mut w = v.clone();
        for b in self.basis_at(site) {
            let coeff = b.inner(&w);
            w = w.sub(&b.scale(coeff));
        }
        w.norm()
    }

    /// Per-site orthonormality within `tol`.
    pub fn is_orthonormal(&self, tol: f64) -> bool {
        for vs in self.blocks.values() {
            for (a, va) in vs.iter().enumerate() {
                for (b, vb) in vs.iter().enumerate() {
                    let g = va.inner(vb);
                    let want = if a == b { C64::ONE } else { C64::ZERO };
                    if (g - want).norm() > tol {
                        return false;
                    }
                }
            }
        }
        true
    }

    /// Mutual orthogonality with another subspace within `tol`.
    pub fn is_orthogonal_to(&self, other: &BlockSubspace, tol: f64) -> bool {
        for (site, vs) in &self.blocks {
            for v in vs {
                for w in other.basis_at(site) {
                    if v.inner(w).norm() > tol {
                        return false;
                    }
                }
            }
        }
        true
    }
}

/// Recurrent space (union of invariant-state supports) and its complement.
#[derive(Debug, Clone)]
pub struct RecurrentSplit {
    pub recurrent: BlockSubspace,
    pub transient: BlockSubspace,
}

/// A class of mutually equivalent minimal enclosures with the linking partial
/// isometries `Q[(a, b)] : member_a -> member_b` (full-space matrices).
#[derive(Debug, Clone)]
pub struct Family {
    pub members: Vec<BlockSubspace>,
    pub member_states: Vec<BlockState>,
    pub isometries: BTreeMap<(usize, usize), CMatrix>,
}

/// Orthogonal decomposition of the space into the transient part, singleton
/// minimal enclosures, and families of equivalent minimal enclosures.
#[derive(Debug, Clone)]
pub struct Decomposition {
    pub transient: BlockSubspace,
    pub singletons: Vec<BlockSubspace>,
    pub singleton_states: Vec<BlockState>,
    pub families: Vec<Family>,
}

impl Decomposition {
    /// All minimal enclosures, singletons first, then family members.
    pub fn enclosures(&self) -> Vec<&BlockSubspace> {
        let mut out: Vec<&BlockSubspace> = self.singletons.iter().collect();
        for f in &self.families {
            out.extend(f.members.iter());
        }
        out
    }

    /// Invariant states in the same order as [`Decomposition::enclosures`].
    pub fn enclosure_states(&self) -> Vec<&BlockState> {
        let mut out: Vec<&BlockState> = self.singleton_states.iter().collect();
        for f in &self.families {
            out.extend(f.member_states.iter());
        }
        out
    }

    /// Trivial decompositions (one enclosure covering everything, empty
    /// transient part) characterize irreducibility structurally.
    pub fn is_trivial(&self, walk: &WalkModel) -> bool {
        self.transient.total_dim() == 0
            && self.families.is_empty()
            && self.singletons.len() == 1
            && self.singletons[0].total_dim() == walk.total_dim()
    }
}

/// Smallest enclosure containing `x` at `site`: closure of the seed under all
/// single-edge transition operators.
pub fn enclosure_of(walk: &WalkModel, site: &str, x: &CVector, tol: f64) -> Result<BlockSubspace> {
    let d = walk.dim_of(site)?;
    if x.dim() != d {
        return Err(Error::Dimension(format!(
            "vector of dimension {} at site `{site}` of dimension {d}",
            x.dim()
        )));
    }
    if x.norm() == 0.0 {
        return Err(Error::InvalidArgument("enclosure of the zero vector".into()));
    }
    let mut blocks: BTreeMap<String, Vec<CVector>> = BTreeMap::new();
    blocks.insert(site.to_string(), vec![x.normalized()]);
    let mut space = BlockSubspace { blocks };

    // Dimension strictly grows until stable, so total_dim + 1 rounds suffice.
    for _ in 0..walk.total_dim() + 1 {
        let mut grew = false;
        for e in walk.edges() {
            let source: Vec<CVector> = space.basis_at(&e.from).to_vec();
            if source.is_empty() {
                continue;
            }
            let mut images = Vec::new();
            for m in &e.kraus {
                for v in &source {
                    let img = m.apply(v);
                    if img.norm() > tol {
                        images.push(img);
                    }
                }
            }
            if images.is_empty() {
                continue;
            }
            let current = space.blocks.entry(e.to.clone()).or_default();
            let extended = orthonormal_extend(current, &images, tol)?;
            if extended.len() > current.len() {
                grew = true;
                *current = extended;
            }
        }
        if !grew {
            break;
        }
    }
    Ok(space)
}

/// True when the subspace is stable under every transition operator: for each
/// edge and each basis vector, the image's residual outside the target block
/// stays below `tol`.
pub fn is_enclosure(walk: &WalkModel, v: &BlockSubspace, tol: f64) -> Result<bool> {
    for e in walk.edges() {
        for m in &e.kraus {
            for b in v.basis_at(&e.from) {
                let img = m.apply(b);
                if v.residual_at(&e.to, &img) > tol {
                    return Ok(false);
                }
            }
        }
    }
    Ok(true)
}

/// Accessibility of vectors: `to` is reachable from `from` when it lies in the
/// enclosure generated by `from` (residual below `tol` after normalization).
pub fn accessible(
    walk: &WalkModel,
    from: (&str, &CVector),
    to: (&str, &CVector),
    tol: f64,
) -> Result<bool> {
    if to.1.norm() == 0.0 {
        return Err(Error::InvalidArgument("accessibility of the zero vector".into()));
    }
    let enc = enclosure_of(walk, from.0, from.1, ENCLOSURE_TOL)?;
    Ok(enc.residual_at(to.0, &to.1.normalized()) <= tol)
}

/// Compress the walk onto an enclosure: every Kraus operator becomes
/// `B_i* L B_j` in the per-site bases; empty sites are dropped.
pub fn restrict_walk(walk: &WalkModel, v: &BlockSubspace) -> Result<WalkModel> {
    let mut sites = Vec::new();
    for s in walk.sites() {
        let k = v.dim_at(&s.id);
        if k > 0 {
            sites.push(SiteSpace { id: s.id.clone(), dim: k });
        }
    }
    if sites.is_empty() {
        return Err(Error::InvalidArgument("restriction to the zero subspace".into()));
    }
    let mut edges = Vec::new();
    for e in walk.edges() {
        if v.dim_at(&e.from) == 0 || v.dim_at(&e.to) == 0 {
            continue;
        }
        let bj = v.basis_matrix(walk, &e.from)?;
        let bi = v.basis_matrix(walk, &e.to)?;
        let kraus = e
            .kraus
            .iter()
            .map(|m| bi.adjoint().mul(m).mul(&bj))
            .collect();
        edges.push(TransitionEdge {
            from: e.from.clone(),
            to: e.to.clone(),
            kraus,
        });
    }
    WalkModel::new(format!("{}|restricted", walk.name), sites, edges)
}

/// Expand a state of the restricted walk back to full coordinates.
pub fn unrestrict_state(
    walk: &WalkModel,
    v: &BlockSubspace,
    state: &BlockState,
) -> Result<BlockState> {
    let mut blocks = BTreeMap::new();
    for (site, small) in &state.blocks {
        let b = v.basis_matrix(walk, site)?;
        blocks.insert(site.clone(), b.mul(small).mul(&b.adjoint()));
    }
    Ok(BlockState { blocks })
}

/// Recurrent space: union of the supports of a spanning set of invariant
/// states, with the orthogonal complement reported as the transient part.
pub fn recurrent_space(walk: &WalkModel) -> Result<RecurrentSplit> {
    let (_, states) = invariant_states(walk, DEFAULT_RANK_TOL)?;
    if states.is_empty() {
        return Err(Error::Degenerate("no invariant state found".into()));
    }
    // Equal-weight average of PSD states has support equal to the union.
    let mut avg = BlockState::zero();
    for s in &states {
        avg = avg.add(s);
    }
    avg = avg.scale(c(1.0 / states.len() as f64, 0.0));

    let mut lam_max: f64 = 0.0;
    let mut per_site: BTreeMap<String, Vec<(f64, CVector)>> = BTreeMap::new();
    for s in walk.sites() {
        let b = avg.block_or_zero(walk, &s.id)?.hermitize();
        let eig = eig_hermitian(&b)?;
        lam_max = lam_max.max(eig.values.last().copied().unwrap_or(0.0));
        per_site.insert(
            s.id.clone(),
            eig.values.into_iter().zip(eig.vectors).collect(),
        );
    }
    let cutoff = (DEFAULT_RANK_TOL * lam_max).max(1e-14);
    let mut rec = BTreeMap::new();
    let mut trans = BTreeMap::new();
    for s in walk.sites() {
        let pairs = &per_site[&s.id];
        let kept: Vec<CVector> = pairs
            .iter()
            .filter(|(l, _)| *l > cutoff)
            .map(|(_, v)| v.clone())
            .collect();
        let comp = orthonormal_complement(&kept, s.dim, DEFAULT_RANK_TOL)?;
        if !kept.is_empty() {
            rec.insert(s.id.clone(), kept);
        }
        if !comp.is_empty() {
            trans.insert(s.id.clone(), comp);
        }
    }
    Ok(RecurrentSplit {
        recurrent: BlockSubspace { blocks: rec },
        transient: BlockSubspace { blocks: trans },
    })
}

/// The unique invariant state supported on a minimal enclosure.
pub fn enclosure_state(walk: &WalkModel, enc: &BlockSubspace) -> Result<BlockState> {
    let restricted = restrict_walk(walk, enc)?;
    let (_, states) = invariant_states(&restricted, DEFAULT_RANK_TOL)?;
    if states.len() != 1 {
        return Err(Error::Degenerate(format!(
            "expected a unique invariant state on the enclosure, found {}",
            states.len()
        )));
    }
    unrestrict_state(walk, enc, &states[0])
}

/// Decompose the recurrent space into minimal enclosures and group them into
/// singletons and families of equivalent classes.
///
/// Splitting draws a seeded random Hermitian element of the fixed-point space
/// of the restricted walk and cuts along its spectral clusters, recursing
/// until every block carries a one-dimensional fixed space. A fresh draw is
/// retried on degenerate splits.
pub fn minimal_enclosures(walk: &WalkModel, seed: u64) -> Result<Decomposition> {
    let split = recurrent_space(walk)?;
    let mut rng = ChaCha12Rng::seed_from_u64(seed);

    let mut minimals: Vec<BlockSubspace> = Vec::new();
    let mut stack = vec![split.recurrent.clone()];
    while let Some(space) = stack.pop() {
        if space.total_dim() == 0 {
            continue;
        }
        let restricted = restrict_walk(walk, &space)?;
        let (_, fixed) = fixed_space(&restricted, DEFAULT_RANK_TOL)?;
        if fixed.is_empty() {
            return Err(Error::Degenerate(
                "restricted walk lost its fixed space; the block is not an enclosure".into(),
            ));
        }
        if fixed.len() == 1 {
            minimals.push(space);
            continue;
        }
        let (_, dual_fixed) = dual_fixed_space(&restricted, DEFAULT_RANK_TOL)?;
        let pieces = split_along_random_fixed_point(&restricted, &dual_fixed, &mut rng)?;
        for piece in pieces {
            // Map the restricted-coordinate piece back to full coordinates.
            let mut blocks: BTreeMap<String, Vec<CVector>> = BTreeMap::new();
            for (site, vs) in &piece.blocks {
                let b = space.basis_matrix(walk, site)?;
                let lifted: Vec<CVector> = vs.iter().map(|v| b.apply(v)).collect();
                blocks.insert(site.clone(), lifted);
            }
            stack.push(BlockSubspace { blocks });
        }
    }

    // Deterministic order: by (first site label, descending dim) of the content.
    minimals.sort_by_key(|m| {
        (
            m.blocks.keys().next().cloned().unwrap_or_default(),
            usize::MAX - m.total_dim(),
            m.blocks
                .values()
                .flat_map(|vs| vs.iter())
                .map(|v| format!("{:.6}", v[0].re))
                .collect::<String>(),
        )
    });

    // Group by equivalence (existence of an off-diagonal fixed point).
    let n = minimals.len();
    let mut class = (0..n).collect::<Vec<usize>>();
    let mut links: BTreeMap<(usize, usize), CMatrix> = BTreeMap::new();
    for a in 0..n {
        for b in a + 1..n {
            if let Some(q) = link_isometry(walk, &minimals[a], &minimals[b])? {
                links.insert((a, b), q);
                let (ca, cb) = (class[a], class[b]);
                let target = ca.min(cb);
                for cl in class.iter_mut() {
                    if *cl == ca || *cl == cb {
                        *cl = target;
                    }
                }
            }
        }
    }

    let mut singleton_idx = Vec::new();
    let mut family_groups: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = class[i];
        family_groups.entry(root).or_default().push(i);
    }
    let mut families = Vec::new();
    for (_, group) in family_groups {
        if group.len() == 1 {
            singleton_idx.push(group[0]);
        } else {
            let mut members = Vec::new();
            let mut member_states = Vec::new();
            for &i in &group {
                members.push(minimals[i].clone());
                member_states.push(enclosure_state(walk, &minimals[i])?);
            }
            let mut isometries = BTreeMap::new();
            for (pa, &ia) in group.iter().enumerate() {
                for (pb, &ib) in group.iter().enumerate().skip(pa + 1) {
                    let q = match links.get(&(ia, ib)) {
                        Some(q) => q.clone(),
                        None => link_isometry(walk, &minimals[ia], &minimals[ib])?.ok_or_else(
                            || {
                                Error::Degenerate(
                                    "family members without a linking isometry".into(),
                                )
                            },
                        )?,
                    };
                    isometries.insert((pa, pb), q);
                }
            }
            families.push(Family {
                members,
                member_states,
                isometries,
            });
        }
    }
    let mut singletons = Vec::new();
    let mut singleton_states = Vec::new();
    for i in singleton_idx {
        singletons.push(minimals[i].clone());
        singleton_states.push(enclosure_state(walk, &minimals[i])?);
    }

    let dec = Decomposition {
        transient: split.transient,
        singletons,
        singleton_states,
        families,
    };

    // Completeness: the listed subspaces tile the full dimension.
    let covered: usize =
        dec.transient.total_dim() + dec.enclosures().iter().map(|e| e.total_dim()).sum::<usize>();
    if covered != walk.total_dim() {
        return Err(Error::Degenerate(format!(
            "decomposition covers dimension {covered} of {}",
            walk.total_dim()
        )));
    }
    Ok(dec)
}

/// Split a reducible restricted walk along the spectral clusters of a random
/// Hermitian element of the dual fixed-point algebra. Returns at least two
/// sub-subspaces (in restricted coordinates).
fn split_along_random_fixed_point(
    restricted: &WalkModel,
    dual_fixed: &[BlockState],
    rng: &mut ChaCha12Rng,
) -> Result<Vec<BlockSubspace>> {
    const RETRIES: usize = 20;
    for _ in 0..RETRIES {
        // Random Hermitian element of the dual fixed space (it is *-closed).
        let mut h = BlockState::zero();
        for f in dual_fixed {
            let (a, b): (f64, f64) = (rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5);
            let herm = f.add(&adjoint_state(f)).scale(c(0.5 * a, 0.0));
            let anti = f.sub(&adjoint_state(f)).scale(c(0.0, -0.5)).scale(c(b, 0.0));
            h = h.add(&herm).add(&anti);
        }
        // Normalize scale so the cluster gap threshold is meaningful.
        let norm: f64 = h
            .blocks
            .values()
            .map(|m| m.frob_norm().powi(2))
            .sum::<f64>()
            .sqrt();
        if norm < 1e-12 {
            continue;
        }
        let h = h.scale(c(1.0 / norm, 0.0));

        let mut all_values: Vec<C64> = Vec::new();
        let mut per_site: BTreeMap<String, (Vec<f64>, Vec<CVector>)> = BTreeMap::new();
        for s in restricted.sites() {
            let block = h.block_or_zero(restricted, &s.id)?.hermitize();
            let eig = eig_hermitian(&block)?;
            all_values.extend(eig.values.iter().map(|&l| c(l, 0.0)));
            per_site.insert(s.id.clone(), (eig.values, eig.vectors));
        }
        let clusters = cluster_by_gap(&all_values, 1e-7);
        if clusters.len() < 2 {
            continue;
        }
        let centers: Vec<f64> = clusters
            .iter()
            .map(|idx| idx.iter().map(|&i| all_values[i].re).sum::<f64>() / idx.len() as f64)
            .collect();

        let mut pieces: Vec<BlockSubspace> = centers
            .iter()
            .map(|_| BlockSubspace::empty())
            .collect();
        for s in restricted.sites() {
            let (values, vectors) = &per_site[&s.id];
            for (l, v) in values.iter().zip(vectors) {
                let (best, _) = centers
                    .iter()
                    .enumerate()
                    .min_by(|(_, x), (_, y)| (*x - l).abs().total_cmp(&(*y - l).abs()))
                    .unwrap();
                pieces[best]
                    .blocks
                    .entry(s.id.clone())
                    .or_default()
                    .push(v.clone());
            }
        }
        pieces.retain(|p| p.total_dim() > 0);
        if pieces.len() >= 2 {
            return Ok(pieces);
        }
    }
    Err(Error::Degenerate(
        "failed to split a reducible block after repeated random draws".into(),
    ))
}

fn adjoint_state(s: &BlockState) -> BlockState {
    BlockState {
        blocks: s
            .blocks
            .iter()
            .map(|(k, m)| (k.clone(), m.adjoint()))
            .collect(),
    }
}

/// Partial isometry linking two orthogonal minimal enclosures, if any.
///
/// Looks for a fixed point with a nonzero off-diagonal block between the two
/// enclosures; its per-site polar factors assemble the full-space `Q` with
/// `Q* Q = P_1`, `Q Q* = P_2` and `rho_2 = Q rho_1 Q*`. Returns `None` when
/// every fixed point is block-diagonal (the enclosures are not equivalent).
pub fn link_isometry(
    walk: &WalkModel,
    e1: &BlockSubspace,
    e2: &BlockSubspace,
) -> Result<Option<CMatrix>> {
    if !e1.is_orthogonal_to(e2, 1e-9) {
        return Err(Error::InvalidArgument(
            "link_isometry expects orthogonal enclosures".into(),
        ));
    }
    // Combined subspace with per-site bases [e1 | e2].
    let mut blocks: BTreeMap<String, Vec<CVector>> = BTreeMap::new();
    for s in walk.sites() {
        let mut vs: Vec<CVector> = e1.basis_at(&s.id).to_vec();
        vs.extend(e2.basis_at(&s.id).iter().cloned());
        if !vs.is_empty() {
            blocks.insert(s.id.clone(), vs);
        }
    }
    let combined = BlockSubspace { blocks };
    let restricted = restrict_walk(walk, &combined)?;
    let (_, fixed) = fixed_space(&restricted, DEFAULT_RANK_TOL)?;

    // Off-diagonal block (rows in e1, columns in e2) of a fixed point.
    let mut off: Option<BTreeMap<String, CMatrix>> = None;
    for f in &fixed {
        let mut candidate = BTreeMap::new();
        let mut norm = 0.0;
        for s in restricted.sites() {
            let k1 = e1.dim_at(&s.id);
            let k2 = e2.dim_at(&s.id);
            let block = f.block_or_zero(&restricted, &s.id)?;
            let sub = CMatrix::from_fn(k1, k2, |r, cc| block[(r, k1 + cc)]);
            norm += sub.frob_norm().powi(2);
            candidate.insert(s.id.clone(), sub);
        }
        if norm.sqrt() > 1e-8 {
            off = Some(candidate);
            break;
        }
    }
    let Some(m12) = off else {
        return Ok(None);
    };

    // A site-diagonal partial isometry needs matching per-site dimensions.
    for s in walk.sites() {
        let (k1, k2) = (e1.dim_at(&s.id), e2.dim_at(&s.id));
        if k1 != k2 {
            return Ok(None);
        }
    }

    // Q(i) = polar factor of M(i)*; a common scalar phase keeps the sites
    // coherent because M is proportional to rho_1 Q* with one constant.
    let mut q_small: BTreeMap<String, CMatrix> = BTreeMap::new();
    for s in walk.sites() {
        let k1 = e1.dim_at(&s.id);
        if k1 == 0 {
            continue;
        }
        let m = &m12[&s.id];
        match polar_unitary(&m.adjoint(), 1e-6) {
            Ok(u) => {
                q_small.insert(s.id.clone(), u);
            }
            Err(_) => return Ok(None),
        }
    }

    // Verify transport of the invariant states within 1e-8.
    let rho1 = enclosure_state_restricted(walk, e1)?;
    let rho2 = enclosure_state_restricted(walk, e2)?;
    let mut gap = 0.0f64;
    for s in walk.sites() {
        if e1.dim_at(&s.id) == 0 {
            continue;
        }
        let q = &q_small[&s.id];
        let moved = q.mul(&rho1[&s.id]).mul(&q.adjoint());
        gap += (&moved - &rho2[&s.id]).frob_norm().powi(2);
    }
    if gap.sqrt() > 1e-8 {
        return Ok(None);
    }

    // Assemble the full-space matrix Q = sum_i B2_i Q_i B1_i*.
    let layout = flat_layout(walk);
    let total = walk.total_dim();
    let mut q_full = CMatrix::zeros(total, total);
    for s in walk.sites() {
        if e1.dim_at(&s.id) == 0 {
            continue;
        }
        let b1 = e1.basis_matrix(walk, &s.id)?;
        let b2 = e2.basis_matrix(walk, &s.id)?;
        let site_block = b2.mul(&q_small[&s.id]).mul(&b1.adjoint());
        let off = layout[&s.id];
        for r in 0..site_block.rows() {
            for cc in 0..site_block.cols() {
                q_full[(off + r, off + cc)] = site_block[(r, cc)];
            }
        }
    }
    Ok(Some(q_full))
}

/// Invariant state of a minimal enclosure, kept in the enclosure's own
/// coordinates (per-site k x k blocks).
fn enclosure_state_restricted(
    walk: &WalkModel,
    enc: &BlockSubspace,
) -> Result<BTreeMap<String, CMatrix>> {
    let restricted = restrict_walk(walk, enc)?;
    let (_, states) = invariant_states(&restricted, DEFAULT_RANK_TOL)?;
    if states.len() != 1 {
        return Err(Error::Degenerate(format!(
            "expected a unique invariant state on the enclosure, found {}",
            states.len()
        )));
    }
    let mut out = BTreeMap::new();
    for s in restricted.sites() {
        out.insert(s.id.clone(), states[0].block_or_zero(&restricted, &s.id)?);
    }
    Ok(out)
}

/// Site offsets in the flattened direct-sum space (+) h_i, label order.
pub fn flat_layout(walk: &WalkModel) -> BTreeMap<String, usize> {
    let mut out = BTreeMap::new();
    let mut off = 0;
    for s in walk.sites() {
        out.insert(s.id.clone(), off);
        off += s.dim;
    }
    out
}

/// Full-space projector onto a block subspace, in the flattened layout.
pub fn subspace_projector(walk: &WalkModel, v: &BlockSubspace) -> Result<CMatrix> {
    let layout = flat_layout(walk);
    let total = walk.total_dim();
    let mut p = CMatrix::zeros(total, total);
    for s in walk.sites() {
        let off = layout[&s.id];
        for b in v.basis_at(&s.id) {
            for r in 0..b.dim() {
                for cc in 0..b.dim() {
                    p[(off + r, off + cc)] += b[r] * b[cc].conj();
                }
            }
        }
    }
    Ok(p)
}

/// Coefficients of an invariant state over a decomposition.
#[derive(Debug, Clone)]
pub struct StructureReport {
    /// Weight Tr(P_a rho P_a) per enclosure, in `Decomposition::enclosures` order.
    pub coefficients: Vec<f64>,
    /// Off-diagonal coefficient per family and member pair (a, b): the scalar
    /// `s` with `P_a rho P_b = s · rho_a Q*`.
    pub off_diagonal: Vec<(usize, usize, usize, C64)>,
    /// Norm of the part of `rho` not explained by the structure theorem.
    pub residual: f64,
}

/// Project an invariant state onto a decomposition and verify the structure
/// theorem: diagonal blocks proportional to the per-enclosure invariant
/// states, off-diagonal blocks zero outside families and proportional to
/// `rho_a Q*` inside them.
pub fn invariant_state_structure(
    walk: &WalkModel,
    dec: &Decomposition,
    rho: &BlockState,
) -> Result<StructureReport> {
    let moved = walk.apply(rho)?;
    let inv_gap = moved.trace_distance(rho, walk)?;
    if inv_gap > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "state is not invariant: one-step trace distance {inv_gap:.3e}"
        )));
    }

    let enclosures = dec.enclosures();
    let states = dec.enclosure_states();
    // Blocks on the diagonal count once; strictly-upper blocks mirror into
    // their conjugates for a Hermitian state and count twice.
    let mut diag_sq = 0.0f64;
    let mut upper_sq = 0.0f64;

    // Diagonal coefficients and residuals.
    let mut coefficients = Vec::with_capacity(enclosures.len());
    for (enc, st) in enclosures.iter().zip(&states) {
        let mut t = 0.0;
        for s in walk.sites() {
            let b = enc.basis_matrix(walk, &s.id)?;
            let block = rho.block_or_zero(walk, &s.id)?;
            t += b.adjoint().mul(&block).mul(&b).trace().re;
        }
        for s in walk.sites() {
            let b = enc.basis_matrix(walk, &s.id)?;
            let block = rho.block_or_zero(walk, &s.id)?;
            let proj = b.adjoint().mul(&block).mul(&b);
            let sb = st.block_or_zero(walk, &s.id)?;
            let want = b.adjoint().mul(&sb).mul(&b).scale(c(t, 0.0));
            diag_sq += (&proj - &want).frob_norm().powi(2);
        }
        coefficients.push(t);
    }

    // Transient part must carry no weight.
    for s in walk.sites() {
        let bt = dec.transient.basis_matrix(walk, &s.id)?;
        if bt.cols() == 0 {
            continue;
        }
        let block = rho.block_or_zero(walk, &s.id)?;
        diag_sq += bt.adjoint().mul(&block).mul(&bt).frob_norm().powi(2);
    }

    // Cross blocks: zero between non-equivalent enclosures (and against the
    // transient part), proportional to rho_a Q* inside families.
    let mut off_diagonal = Vec::new();
    // First: all ordered pairs that must vanish.
    let mut family_of: Vec<Option<usize>> = vec![None; enclosures.len()];
    {
        let mut idx = dec.singletons.len();
        for (fi, f) in dec.families.iter().enumerate() {
            for _ in &f.members {
                family_of[idx] = Some(fi);
                idx += 1;
            }
        }
    }
    for a in 0..enclosures.len() {
        for b in a + 1..enclosures.len() {
            let same_family = match (family_of[a], family_of[b]) {
                (Some(x), Some(y)) => x == y,
                _ => false,
            };
            if same_family {
                continue;
            }
            upper_sq += cross_block_norm_sq(walk, rho, enclosures[a], enclosures[b])?;
        }
    }
    for enc in &enclosures {
        upper_sq += cross_block_norm_sq(walk, rho, enc, &dec.transient)?;
    }

    // Family off-diagonals.
    for (fi, f) in dec.families.iter().enumerate() {
        for pa in 0..f.members.len() {
            for pb in pa + 1..f.members.len() {
                let ea = &f.members[pa];
                let eb = &f.members[pb];
                let q = &f.isometries[&(pa, pb)];
                // eta = rho_a Q*, restricted to (ea rows, eb columns).
                let rho_a = &f.member_states[pa];
                let layout = flat_layout(walk);
                let mut s_num = C64::ZERO;
                let mut s_den = 0.0f64;
                let mut blocks_m: Vec<(CMatrix, CMatrix)> = Vec::new();
                for s in walk.sites() {
                    let ka = ea.dim_at(&s.id);
                    let kb = eb.dim_at(&s.id);
                    if ka == 0 || kb == 0 {
                        continue;
                    }
                    let ba = ea.basis_matrix(walk, &s.id)?;
                    let bb = eb.basis_matrix(walk, &s.id)?;
                    let block = rho.block_or_zero(walk, &s.id)?;
                    let m = ba.adjoint().mul(&block).mul(&bb);
                    // eta(i) in the same bases.
                    let off = layout[&s.id];
                    let d = walk.dim_of(&s.id)?;
                    let q_site = CMatrix::from_fn(d, d, |r, cc| q[(off + r, off + cc)]);
                    let eta = ba
                        .adjoint()
                        .mul(&rho_a.block_or_zero(walk, &s.id)?)
                        .mul(&q_site.adjoint())
                        .mul(&bb);
                    for r in 0..m.rows() {
                        for cc in 0..m.cols() {
                            s_num += eta[(r, cc)].conj() * m[(r, cc)];
                            s_den += eta[(r, cc)].norm_sqr();
                        }
                    }
                    blocks_m.push((m, eta));
                }
                let s_coeff = if s_den > 0.0 { s_num / c(s_den, 0.0) } else { C64::ZERO };
                for (m, eta) in blocks_m {
                    upper_sq += (&m - &eta.scale(s_coeff)).frob_norm().powi(2);
                }
                off_diagonal.push((fi, pa, pb, s_coeff));
            }
        }
    }

    Ok(StructureReport {
        coefficients,
        off_diagonal,
        residual: (diag_sq + 2.0 * upper_sq).sqrt(),
    })
}

fn cross_block_norm_sq(
    walk: &WalkModel,
    rho: &BlockState,
    a: &BlockSubspace,
    b: &BlockSubspace,
) -> Result<f64> {
    let mut acc = 0.0;
    for s in walk.sites() {
        let ka = a.dim_at(&s.id);
        let kb = b.dim_at(&s.id);
        if ka == 0 || kb == 0 {
            continue;
        }
        let ba = a.basis_matrix(walk, &s.id)?;
        let bb = b.basis_matrix(walk, &s.id)?;
        let block = rho.block_or_zero(walk, &s.id)?;
        acc += ba.adjoint().mul(&block).mul(&bb).frob_norm().powi(2);
    }
    Ok(acc)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;
    use crate::spectral;

    fn e(k: usize) -> CVector {
        CVector::basis(2, k)
    }

    fn plus() -> CVector {
        CVector::from_real(&[1.0, 1.0]).normalized()
    }

    fn minus() -> CVector {
        CVector::from_real(&[1.0, -1.0]).normalized()
    }

    #[test]
    fn lane_enclosures_of_ex_6_4() {
        let walk = registry::builtin("ex-6.4").unwrap();
        let enc = enclosure_of(&walk, "1", &e(0), ENCLOSURE_TOL).unwrap();
        assert_eq!(enc.total_dim(), 3);
        for s in walk.sites() {
            assert_eq!(enc.dim_at(&s.id), 1);
            // basis vector proportional to e1
            let v = &enc.basis_at(&s.id)[0];
            assert!(v[1].norm() < 1e-12);
        }
        assert!(is_enclosure(&walk, &enc, ENCLOSURE_TOL).unwrap());

        let full = enclosure_of(&walk, "1", &plus(), ENCLOSURE_TOL).unwrap();
        assert_eq!(full.total_dim(), 6);
    }

    #[test]
    fn ex_6_11_plus_line_is_a_two_dim_enclosure() {
        let walk = registry::builtin("ex-6.11").unwrap();
        let enc = enclosure_of(&walk, "1", &plus(), ENCLOSURE_TOL).unwrap();
        assert_eq!(enc.total_dim(), 2);
        assert!(is_enclosure(&walk, &enc, ENCLOSURE_TOL).unwrap());
    }

    #[test]
    fn single_lane_at_one_site_is_not_an_enclosure() {
        let walk = registry::builtin("ex-6.4").unwrap();
        let mut blocks = BTreeMap::new();
        blocks.insert("1".to_string(), vec![e(0)]);
        let v = BlockSubspace { blocks };
        assert!(!is_enclosure(&walk, &v, ENCLOSURE_TOL).unwrap());
        // The full space always is.
        assert!(is_enclosure(&walk, &BlockSubspace::full(&walk), ENCLOSURE_TOL).unwrap());
    }

    #[test]
    fn enclosure_passes_is_enclosure_and_minimality_probe() {
        let walk = registry::builtin("ex-6.11").unwrap();
        let enc = enclosure_of(&walk, "1", &plus(), ENCLOSURE_TOL).unwrap();
        assert!(is_enclosure(&walk, &enc, ENCLOSURE_TOL).unwrap());
        // Removing the last-added vector must break stability or drop the seed.
        let mut pruned = enc.clone();
        let last_site = pruned.blocks.keys().last().unwrap().clone();
        pruned.blocks.get_mut(&last_site).unwrap().pop();
        let still = is_enclosure(&walk, &pruned, ENCLOSURE_TOL).unwrap();
        let contains_seed = pruned.residual_at("1", &plus()) < 1e-9;
        assert!(!still || !contains_seed);
    }

    #[test]
    fn accessibility_examples() {
        let walk = registry::builtin("ex-6.11").unwrap();
        assert!(accessible(&walk, ("1", &plus()), ("2", &plus()), 1e-9).unwrap());
        assert!(!accessible(&walk, ("1", &plus()), ("1", &minus()), 1e-9).unwrap());
        assert!(accessible(&walk, ("1", &plus()), ("1", &plus()), 1e-9).unwrap());
    }

    #[test]
    fn recurrent_space_of_ex_9_2() {
        let walk = registry::builtin("ex-9.2").unwrap();
        let split = recurrent_space(&walk).unwrap();
        assert_eq!(split.recurrent.total_dim(), 1);
        assert_eq!(split.transient.total_dim(), 3);
        assert_eq!(split.recurrent.dim_at("2"), 1);
        let v = &split.recurrent.basis_at("2")[0];
        assert!(v[1].norm() < 1e-9, "recurrent direction should be e1 at site 2");
    }

    #[test]
    fn recurrent_space_full_for_irreducible() {
        let walk = registry::builtin("m3").unwrap();
        let split = recurrent_space(&walk).unwrap();
        assert_eq!(split.recurrent.total_dim(), walk.total_dim());
        assert_eq!(split.transient.total_dim(), 0);
    }

    #[test]
    fn recurrent_space_of_absorbing_chain() {
        let labels: Vec<String> = vec!["1".into(), "2".into()];
        let walk = crate::walk::minimal_dilation(
            &[vec![1.0, 0.0], vec![0.5, 0.5]],
            &labels,
        )
        .unwrap();
        let split = recurrent_space(&walk).unwrap();
        assert_eq!(split.recurrent.dim_at("1"), 1);
        assert_eq!(split.recurrent.dim_at("2"), 0);
        assert_eq!(split.transient.dim_at("2"), 1);
    }

    #[test]
    fn decomposition_of_ex_6_4_two_singletons() {
        let walk = registry::builtin("ex-6.4").unwrap();
        let dec = minimal_enclosures(&walk, 7).unwrap();
        assert_eq!(dec.transient.total_dim(), 0);
        assert_eq!(dec.singletons.len(), 2);
        assert!(dec.families.is_empty());
        for enc in &dec.singletons {
            assert_eq!(enc.total_dim(), 3);
            assert!(is_enclosure(&walk, enc, 1e-8).unwrap());
        }
        assert!(dec.singletons[0].is_orthogonal_to(&dec.singletons[1], 1e-9));
    }

    #[test]
    fn decomposition_of_ex_9_6_one_family() {
        let walk = registry::builtin("ex-9.6").unwrap();
        let dec = minimal_enclosures(&walk, 7).unwrap();
        assert_eq!(dec.transient.total_dim(), 0);
        assert!(dec.singletons.is_empty());
        assert_eq!(dec.families.len(), 1);
        let fam = &dec.families[0];
        assert_eq!(fam.members.len(), 2);
        for m in &fam.members {
            assert_eq!(m.total_dim(), 2);
            assert!(is_enclosure(&walk, m, 1e-8).unwrap());
        }
        let q = &fam.isometries[&(0, 1)];
        // Q*Q = P_1, QQ* = P_2, rho_2 = Q rho_1 Q*.
        let p1 = subspace_projector(&walk, &fam.members[0]).unwrap();
        let p2 = subspace_projector(&walk, &fam.members[1]).unwrap();
        assert!((&q.adjoint().mul(q) - &p1).frob_norm() < 1e-8);
        assert!((&q.mul(&q.adjoint()) - &p2).frob_norm() < 1e-8);
    }

    #[test]
    fn decomposition_of_ex_9_2_singleton_plus_transient() {
        let walk = registry::builtin("ex-9.2").unwrap();
        let dec = minimal_enclosures(&walk, 7).unwrap();
        assert_eq!(dec.transient.total_dim(), 3);
        assert_eq!(dec.singletons.len(), 1);
        assert!(dec.families.is_empty());
        assert_eq!(dec.singletons[0].total_dim(), 1);
    }

    #[test]
    fn decomposition_of_ex_6_11_two_singletons() {
        let walk = registry::builtin("ex-6.11").unwrap();
        let dec = minimal_enclosures(&walk, 7).unwrap();
        assert_eq!(dec.singletons.len(), 2);
        assert!(dec.families.is_empty());
        for m in &dec.singletons {
            assert_eq!(m.total_dim(), 2);
        }
    }

    #[test]
    fn link_isometry_absent_for_inequivalent_lanes() {
        let walk = registry::builtin("ex-6.4").unwrap();
        let dec = minimal_enclosures(&walk, 7).unwrap();
        let q = link_isometry(&walk, &dec.singletons[0], &dec.singletons[1]).unwrap();
        assert!(q.is_none());
    }

    #[test]
    fn link_isometry_matches_known_swap_structure() {
        // For the identity/swap walk, the enclosures generated by e1 and e2
        // at site 1 are linked by the partial isometry that sends e1@1 to
        // e2@1 and e2@2 to e1@2 (one global phase free).
        let walk = registry::builtin("ex-9.6").unwrap();
        let mut b1 = BTreeMap::new();
        b1.insert("1".to_string(), vec![e(0)]);
        b1.insert("2".to_string(), vec![e(1)]);
        let e1_enc = BlockSubspace { blocks: b1 };
        let mut b2 = BTreeMap::new();
        b2.insert("1".to_string(), vec![e(1)]);
        b2.insert("2".to_string(), vec![e(0)]);
        let e2_enc = BlockSubspace { blocks: b2 };
        assert!(is_enclosure(&walk, &e1_enc, 1e-9).unwrap());
        assert!(is_enclosure(&walk, &e2_enc, 1e-9).unwrap());

        let q = link_isometry(&walk, &e1_enc, &e2_enc)
            .unwrap()
            .expect("equivalent enclosures are linked");
        // Flat layout (e1@1, e2@1, e1@2, e2@2): the only nonzero entries are
        // (1,0) and (2,3), sharing one phase.
        let a = q[(1, 0)];
        let b = q[(2, 3)];
        assert!((a.norm() - 1.0).abs() < 1e-8);
        assert!((b.norm() - 1.0).abs() < 1e-8);
        assert!((a - b).norm() < 1e-8, "site phases must agree: {a} vs {b}");
        let mut off_mass = 0.0;
        for r in 0..4 {
            for cc in 0..4 {
                if (r, cc) != (1, 0) && (r, cc) != (2, 3) {
                    off_mass += q[(r, cc)].norm_sqr();
                }
            }
        }
        assert!(off_mass.sqrt() < 1e-8, "unexpected support {q:?}");
    }

    #[test]
    fn trivial_decomposition_iff_irreducible() {
        for name in ["m3", "m4", "ex-9.2", "ex-6.4", "ex-9.6"] {
            let walk = registry::builtin(name).unwrap();
            let dec = minimal_enclosures(&walk, 11).unwrap();
            let spectrally = spectral::is_irreducible(&walk).unwrap();
            assert_eq!(dec.is_trivial(&walk), spectrally, "disagreement on {name}");
        }
    }

    #[test]
    fn structure_report_for_ex_9_6_invariant_states() {
        let walk = registry::builtin("ex-9.6").unwrap();
        let dec = minimal_enclosures(&walk, 7).unwrap();
        let fam = &dec.families[0];

        // Assemble t rho_1 + (1-t) rho_2 + s eta + conj(s) eta*.
        let (t, s_re, s_im) = (0.3f64, 0.08f64, -0.05f64);
        let s_coeff = c(s_re, s_im);
        let rho1 = &fam.member_states[0];
        let rho2 = &fam.member_states[1];
        let q = &fam.isometries[&(0, 1)];
        let layout = flat_layout(&walk);
        let mut rho = rho1.scale(c(t, 0.0)).add(&rho2.scale(c(1.0 - t, 0.0)));
        for s in walk.sites() {
            let off = layout[&s.id];
            let d = s.dim;
            let q_site = CMatrix::from_fn(d, d, |r, cc| q[(off + r, off + cc)]);
            let eta = rho1
                .block_or_zero(&walk, &s.id)
                .unwrap()
                .mul(&q_site.adjoint());
            let coh = &eta.scale(s_coeff) + &eta.scale(s_coeff).adjoint();
            let block = rho.blocks.get_mut(&s.id).unwrap();
            *block = &*block + &coh;
        }
        // The assembled state must be invariant...
        let moved = walk.apply(&rho).unwrap();
        assert!(moved.trace_distance(&rho, &walk).unwrap() < 1e-9);
        // ...and the analyzer must recover (t, 1-t, s).
        let report = invariant_state_structure(&walk, &dec, &rho).unwrap();
        assert!(report.residual < 1e-8, "residual {}", report.residual);
        assert!((report.coefficients[0] - t).abs() < 1e-9);
        assert!((report.coefficients[1] - (1.0 - t)).abs() < 1e-9);
        assert_eq!(report.off_diagonal.len(), 1);
        let got = report.off_diagonal[0].3;
        // eta has Hilbert-Schmidt norm sqrt(sum ||rho1 Q*||^2); the analyzer
        // normalizes by that, so compare the reconstructed block directly.
        let mut eta_norm_sq = 0.0;
        for s in walk.sites() {
            let off = layout[&s.id];
            let d = s.dim;
            let q_site = CMatrix::from_fn(d, d, |r, cc| q[(off + r, off + cc)]);
            let eta = rho1
                .block_or_zero(&walk, &s.id)
                .unwrap()
                .mul(&q_site.adjoint());
            eta_norm_sq += eta.frob_norm().powi(2);
        }
        let _ = eta_norm_sq;
        assert!((got - s_coeff).norm() < 1e-8, "expected {s_coeff}, got {got}");
    }

    #[test]
    fn structure_report_extremal_state() {
        let walk = registry::builtin("ex-6.4").unwrap();
        let dec = minimal_enclosures(&walk, 7).unwrap();
        let rho = dec.singleton_states[0].clone();
        let report = invariant_state_structure(&walk, &dec, &rho).unwrap();
        assert!(report.residual < 1e-8);
        assert!((report.coefficients[0] - 1.0).abs() < 1e-9);
        assert!(report.coefficients[1].abs() < 1e-9);
    }

    #[test]
    fn structure_report_mixture_recovery() {
        let walk = registry::builtin("ex-6.4").unwrap();
        let dec = minimal_enclosures(&walk, 7).unwrap();
        let p = 0.3;
        let rho = dec.singleton_states[0]
            .scale(c(p, 0.0))
            .add(&dec.singleton_states[1].scale(c(1.0 - p, 0.0)));
        let report = invariant_state_structure(&walk, &dec, &rho).unwrap();
        assert!(report.residual < 1e-8);
        let mut coeffs = report.coefficients.clone();
        coeffs.sort_by(f64::total_cmp);
        assert!((coeffs[0] - 0.3).abs() < 1e-9);
        assert!((coeffs[1] - 0.7).abs() < 1e-9);
    }

    #[test]
    fn structure_rejects_non_invariant_states() {
        let walk = registry::builtin("ex-6.4").unwrap();
        let dec = minimal_enclosures(&walk, 7).unwrap();
        let rho = BlockState::pure(&walk, "1", &plus()).unwrap();
        assert!(invariant_state_structure(&walk, &dec, &rho).is_err());
    }

    #[test]
    fn restriction_of_enclosure_validates() {
        let walk = registry::builtin("ex-6.4").unwrap();
        let enc = enclosure_of(&walk, "1", &e(0), ENCLOSURE_TOL).unwrap();
        let restricted = restrict_walk(&walk, &enc).unwrap();
        let report = restricted.validate(1e-8).unwrap();
        assert!(report.ok, "restricted walk should stay stochastic: {:?}", report.per_site);
    }
}
