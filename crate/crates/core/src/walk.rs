//! Walk definition, validation, and single-step channel semantics.
//!
//! A walk is a directed multigraph over labelled sites. Every site `i`
//! carries an internal space of dimension `dim(i)`; every edge `j -> i`
//! carries one or more Kraus operators of shape `dim(i) x dim(j)`. The
//! channel acts on block-diagonal states as
//! `rho(i) <- sum_j sum_{e in E(j,i)} L_e rho(j) L_e*`.
//!
//! Plain walks have one Kraus operator per edge; the multigraph case arises
//! naturally (powers of a plain walk are multigraph walks) and is first-class
//! here. Absent edges act as zero operators rather than errors.

use std::collections::{BTreeMap, HashMap};

use crate::error::{Error, Result};
use crate::numerics::{c, eig_hermitian, opnorm2, C64, CMatrix, CVector};

/// A site (vertex) with its internal dimension.
#[derive(Debug, Clone, PartialEq)]
pub struct SiteSpace {
    pub id: String,
    pub dim: usize,
}

/// Directed edge `from -> to` with its Kraus operators (target x source shaped).
#[derive(Debug, Clone, PartialEq)]
pub struct TransitionEdge {
    pub from: String,
    pub to: String,
    pub kraus: Vec<CMatrix>,
}

/// A validated-in-structure open quantum random walk.
///
/// Construction checks shapes, label uniqueness and edge uniqueness; the
/// total-probability condition is checked separately by [`WalkModel::validate`].
/// Sites are kept sorted by label so that every downstream layout
/// (vectorization, sampling order, CSV output) is deterministic.
#[derive(Debug, Clone)]
pub struct WalkModel {
    pub name: String,
    sites: Vec<SiteSpace>,
    edges: Vec<TransitionEdge>,
    site_index: HashMap<String, usize>,
    // (source index, target index) -> edge index
    edge_index: HashMap<(usize, usize), usize>,
    // outgoing edge indices per source, sorted by target label
    outgoing: Vec<Vec<usize>>,
}

/// Stochasticity report: per-site deviation of `sum L* L` from the identity.
#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub ok: bool,
    pub tol: f64,
    /// (site label, operator-norm deviation), in site order.
    pub per_site: Vec<(String, f64)>,
}

impl ValidationReport {
    /// Site with the largest deviation.
    pub fn worst(&self) -> Option<&(String, f64)> {
        self.per_site
            .iter()
            .max_by(|a, b| a.1.total_cmp(&b.1))
    }
}

/// Default absolute tolerance on the stochasticity deviation.
pub const VALIDATE_TOL: f64 = 1e-10;

impl WalkModel {
    pub fn new(
        name: impl Into<String>,
        sites: Vec<SiteSpace>,
        edges: Vec<TransitionEdge>,
    ) -> Result<Self> {
        let mut sites = sites;
        sites.sort_by(|a, b| a.id.cmp(&b.id));
        let mut site_index = HashMap::new();
        for (k, s) in sites.iter().enumerate() {
            if s.dim == 0 {
                return Err(Error::InvalidWalk(format!("site `{}` has dimension 0", s.id)));
            }
            if site_index.insert(s.id.clone(), k).is_some() {
                return Err(Error::InvalidWalk(format!("duplicate site id `{}`", s.id)));
            }
        }
        let mut edge_index = HashMap::new();
        let mut outgoing = vec![Vec::new(); sites.len()];
        for (idx, e) in edges.iter().enumerate() {
            let j = *site_index
                .get(&e.from)
                .ok_or_else(|| Error::UnknownSite(e.from.clone()))?;
            let i = *site_index
                .get(&e.to)
                .ok_or_else(|| Error::UnknownSite(e.to.clone()))?;
            if e.kraus.is_empty() {
                return Err(Error::InvalidWalk(format!(
                    "edge {} -> {} has no Kraus operators",
                    e.from, e.to
                )));
            }
            for (k, m) in e.kraus.iter().enumerate() {
                if m.rows() != sites[i].dim || m.cols() != sites[j].dim {
                    return Err(Error::EdgeShape {
                        from: e.from.clone(),
                        to: e.to.clone(),
                        index: k,
                        got_rows: m.rows(),
                        got_cols: m.cols(),
                        want_rows: sites[i].dim,
                        want_cols: sites[j].dim,
                    });
                }
                if !m.is_finite() {
                    return Err(Error::InvalidWalk(format!(
                        "edge {} -> {}: Kraus operator #{k} has non-finite entries",
                        e.from, e.to
                    )));
                }
            }
            if edge_index.insert((j, i), idx).is_some() {
                return Err(Error::DuplicateEdge {
                    from: e.from.clone(),
                    to: e.to.clone(),
                });
            }
            outgoing[j].push(idx);
        }
        for out in &mut outgoing {
            out.sort_by(|&a, &b| edges[a].to.cmp(&edges[b].to));
        }
        Ok(WalkModel {
            name: name.into(),
            sites,
            edges,
            site_index,
            edge_index,
            outgoing,
        })
    }

    pub fn sites(&self) -> &[SiteSpace] {
        &self.sites
    }

    pub fn edges(&self) -> &[TransitionEdge] {
        &self.edges
    }

    pub fn site_count(&self) -> usize {
        self.sites.len()
    }

    pub fn site_pos(&self, id: &str) -> Result<usize> {
        self.site_index
            .get(id)
            .copied()
            .ok_or_else(|| Error::UnknownSite(id.to_string()))
    }

    pub fn dim_of(&self, id: &str) -> Result<usize> {
        Ok(self.sites[self.site_pos(id)?].dim)
    }

    /// Total internal dimension, sum of the per-site dimensions.
    pub fn total_dim(&self) -> usize {
        self.sites.iter().map(|s| s.dim).sum()
    }

    /// Maximum internal dimension over the sites.
    pub fn max_dim(&self) -> usize {
        self.sites.iter().map(|s| s.dim).max().unwrap_or(0)
    }

    /// Edge from `from` to `to`, if present.
    pub fn edge(&self, from: &str, to: &str) -> Option<&TransitionEdge> {
        let j = *self.site_index.get(from)?;
        let i = *self.site_index.get(to)?;
        self.edge_index.get(&(j, i)).map(|&k| &self.edges[k])
    }

    /// Outgoing edges of a source site, sorted by target label.
    pub fn outgoing(&self, from: &str) -> Result<Vec<&TransitionEdge>> {
        let j = self.site_pos(from)?;
        Ok(self.outgoing[j].iter().map(|&k| &self.edges[k]).collect())
    }

    /// True when every edge carries exactly one Kraus operator.
    pub fn is_plain(&self) -> bool {
        self.edges.iter().all(|e| e.kraus.len() == 1)
    }

    /// Check the total-probability condition `sum_e L_e* L_e = Id` per source.
    pub fn validate(&self, tol: f64) -> Result<ValidationReport> {
        let mut per_site = Vec::with_capacity(self.sites.len());
        let mut ok = true;
        for (j, s) in self.sites.iter().enumerate() {
            let mut acc = CMatrix::zeros(s.dim, s.dim);
            for &eidx in &self.outgoing[j] {
                for m in &self.edges[eidx].kraus {
                    acc = &acc + &m.adjoint().mul(m);
                }
            }
            let dev = opnorm2(&(&acc - &CMatrix::identity(s.dim)))?;
            if dev > tol {
                ok = false;
            }
            per_site.push((s.id.clone(), dev));
        }
        Ok(ValidationReport { ok, tol, per_site })
    }

    /// One step of the channel on a block-diagonal state.
    pub fn apply(&self, rho: &BlockState) -> Result<BlockState> {
        let mut out = BTreeMap::new();
        for s in &self.sites {
            out.insert(s.id.clone(), CMatrix::zeros(s.dim, s.dim));
        }
        for (j, s) in self.sites.iter().enumerate() {
            let Some(block) = rho.blocks.get(&s.id) else {
                continue;
            };
            if block.rows() != s.dim || block.cols() != s.dim {
                return Err(Error::Dimension(format!(
                    "state block at `{}` is {}x{}, site dimension is {}",
                    s.id,
                    block.rows(),
                    block.cols(),
                    s.dim
                )));
            }
            for &eidx in &self.outgoing[j] {
                let e = &self.edges[eidx];
                let target = out.get_mut(&e.to).expect("target block exists");
                for m in &e.kraus {
                    let contrib = m.mul(block).mul(&m.adjoint());
                    *target = &*target + &contrib;
                }
            }
        }
        Ok(BlockState { blocks: out })
    }

    /// One step of the dual (Heisenberg) map on a block observable.
    pub fn apply_dual(&self, x: &BlockObservable) -> Result<BlockObservable> {
        let mut out = BTreeMap::new();
        for s in &self.sites {
            out.insert(s.id.clone(), CMatrix::zeros(s.dim, s.dim));
        }
        for (j, s) in self.sites.iter().enumerate() {
            let target = out.get_mut(&s.id).expect("block exists");
            for &eidx in &self.outgoing[j] {
                let e = &self.edges[eidx];
                let Some(xi) = x.blocks.get(&e.to) else {
                    continue;
                };
                let di = self.dim_of(&e.to)?;
                if xi.rows() != di || xi.cols() != di {
                    return Err(Error::Dimension(format!(
                        "observable block at `{}` is {}x{}, site dimension is {di}",
                        e.to,
                        xi.rows(),
                        xi.cols()
                    )));
                }
                for m in &e.kraus {
                    let contrib = m.adjoint().mul(xi).mul(m);
                    *target = &*target + &contrib;
                }
            }
        }
        Ok(BlockObservable { blocks: out })
    }

    /// Composite operator along a path, for plain (single-Kraus) walks.
    ///
    /// Absent edges contribute the zero operator; multigraph edges are
    /// rejected here, use [`WalkModel::edge_sequence_operator`] instead.
    pub fn path_operator(&self, path: &Path) -> Result<CMatrix> {
        let start_dim = self.dim_of(path.first())?;
        let end_dim = self.dim_of(path.last())?;
        let mut acc = CMatrix::identity(start_dim);
        for (from, to) in path.steps() {
            // Unknown labels are errors even when the edge is absent.
            self.dim_of(to)?;
            match self.edge(from, to) {
                Some(e) => {
                    if e.kraus.len() != 1 {
                        return Err(Error::InvalidArgument(format!(
                            "edge {from} -> {to} carries {} Kraus operators; use edge_sequence_operator",
                            e.kraus.len()
                        )));
                    }
                    acc = e.kraus[0].mul(&acc);
                }
                None => return Ok(CMatrix::zeros(end_dim, start_dim)),
            }
        }
        Ok(acc)
    }

    /// Composite operator along a path with an explicit Kraus index per step.
    pub fn edge_sequence_operator(&self, path: &Path, kraus_indices: &[usize]) -> Result<CMatrix> {
        if kraus_indices.len() != path.len() - 1 {
            return Err(Error::InvalidArgument(format!(
                "path of {} steps given {} Kraus indices",
                path.len() - 1,
                kraus_indices.len()
            )));
        }
        let start_dim = self.dim_of(path.first())?;
        let end_dim = self.dim_of(path.last())?;
        let mut acc = CMatrix::identity(start_dim);
        for ((from, to), &k) in path.steps().zip(kraus_indices) {
            match self.edge(from, to) {
                Some(e) => {
                    let m = e.kraus.get(k).ok_or_else(|| {
                        Error::InvalidArgument(format!(
                            "edge {from} -> {to} has {} Kraus operators, index {k} out of range",
                            e.kraus.len()
                        ))
                    })?;
                    acc = m.mul(&acc);
                }
                None => return Ok(CMatrix::zeros(end_dim, start_dim)),
            }
        }
        Ok(acc)
    }
}

/// Minimal dilation of a classical Markov chain: one-dimensional internal
/// spaces and `L_{i,j} = sqrt(P_{j,i})`.
pub fn minimal_dilation(p: &[Vec<f64>], labels: &[String]) -> Result<WalkModel> {
    let n = p.len();
    if labels.len() != n {
        return Err(Error::InvalidArgument(format!(
            "{n} rows but {} labels",
            labels.len()
        )));
    }
    for (j, row) in p.iter().enumerate() {
        if row.len() != n {
            return Err(Error::Dimension(format!(
                "row {j} has {} entries, expected {n}",
                row.len()
            )));
        }
        let sum: f64 = row.iter().sum();
        if row.iter().any(|&x| x < -1e-12) || (sum - 1.0).abs() > 1e-10 {
            return Err(Error::Stochasticity {
                site: labels[j].clone(),
                deviation: (sum - 1.0).abs(),
                tol: 1e-10,
            });
        }
    }
    let sites = labels
        .iter()
        .map(|l| SiteSpace { id: l.clone(), dim: 1 })
        .collect();
    let mut edges = Vec::new();
    for (j, row) in p.iter().enumerate() {
        for (i, &prob) in row.iter().enumerate() {
            if prob > 0.0 {
                edges.push(TransitionEdge {
                    from: labels[j].clone(),
                    to: labels[i].clone(),
                    kraus: vec![CMatrix::diag(&[c(prob.sqrt(), 0.0)])],
                });
            }
        }
    }
    WalkModel::new("minimal-dilation", sites, edges)
}

/// Cyclic lift of a translation-invariant generator family: on `n` sites the
/// shift `s` maps site `t` to `t + s (mod n)` with operator `L_s`.
///
/// Shifts that coincide mod `n` merge into one multigraph edge.
pub fn lift_homogeneous(
    generators: &BTreeMap<i64, CMatrix>,
    n: usize,
    name: impl Into<String>,
) -> Result<WalkModel> {
    if n == 0 || generators.is_empty() {
        return Err(Error::InvalidArgument("empty cycle or generator family".into()));
    }
    let d = generators.values().next().unwrap().rows();
    let mut acc = CMatrix::zeros(d, d);
    for m in generators.values() {
        if m.rows() != d || m.cols() != d {
            return Err(Error::Dimension(
                "homogeneous generators must share one square shape".into(),
            ));
        }
        acc = &acc + &m.adjoint().mul(m);
    }
    let dev = opnorm2(&(&acc - &CMatrix::identity(d)))?;
    if dev > 1e-10 {
        return Err(Error::Stochasticity {
            site: "generator family".into(),
            deviation: dev,
            tol: 1e-10,
        });
    }

    let label = |t: usize| (t + 1).to_string();
    let sites = (0..n).map(|t| SiteSpace { id: label(t), dim: d }).collect();
    // Merge shifts landing on the same target.
    let mut merged: BTreeMap<(usize, usize), Vec<CMatrix>> = BTreeMap::new();
    for t in 0..n {
        for (&s, m) in generators {
            let target = (t as i64 + s).rem_euclid(n as i64) as usize;
            merged.entry((t, target)).or_default().push(m.clone());
        }
    }
    let edges = merged
        .into_iter()
        .map(|((t, target), kraus)| TransitionEdge {
            from: label(t),
            to: label(target),
            kraus,
        })
        .collect();
    WalkModel::new(name, sites, edges)
}

/// The local map of a homogeneous family: `eta <- sum_s L_s eta L_s*`.
pub fn local_map_apply(generators: &BTreeMap<i64, CMatrix>, eta: &CMatrix) -> Result<CMatrix> {
    if !eta.is_square() {
        return Err(Error::Dimension("local map argument must be square".into()));
    }
    let mut out = CMatrix::zeros(eta.rows(), eta.cols());
    for m in generators.values() {
        if m.cols() != eta.rows() {
            return Err(Error::Dimension(format!(
                "generator is {}x{}, state is {}x{}",
                m.rows(),
                m.cols(),
                eta.rows(),
                eta.cols()
            )));
        }
        out = &out + &m.mul(eta).mul(&m.adjoint());
    }
    Ok(out)
}

/// Block-diagonal positive operator `rho = sum_i rho(i) (x) |i><i|`.
///
/// Absent keys are zero blocks. Positivity and normalization are contracts of
/// specific operations, not of the container, so fixed-point basis elements
/// can reuse the type.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockState {
    pub blocks: BTreeMap<String, CMatrix>,
}

/// Block-diagonal (intended self-adjoint) observable.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockObservable {
    pub blocks: BTreeMap<String, CMatrix>,
}

impl BlockState {
    pub fn zero() -> Self {
        BlockState { blocks: BTreeMap::new() }
    }

    /// Pure state `|x><x|` at one site.
    pub fn pure(walk: &WalkModel, site: &str, x: &CVector) -> Result<Self> {
        let d = walk.dim_of(site)?;
        if x.dim() != d {
            return Err(Error::Dimension(format!(
                "vector of dimension {} at site `{site}` of dimension {d}",
                x.dim()
            )));
        }
        let v = x.normalized();
        let mut blocks = BTreeMap::new();
        blocks.insert(site.to_string(), v.outer(&v));
        Ok(BlockState { blocks })
    }

    /// Maximally mixed state `Id / total_dim` spread over all sites.
    pub fn maximally_mixed(walk: &WalkModel) -> Self {
        let total = walk.total_dim() as f64;
        let mut blocks = BTreeMap::new();
        for s in walk.sites() {
            blocks.insert(
                s.id.clone(),
                CMatrix::identity(s.dim).scale(c(1.0 / total, 0.0)),
            );
        }
        BlockState { blocks }
    }

    pub fn block(&self, site: &str) -> Option<&CMatrix> {
        self.blocks.get(site)
    }

    /// Block at `site`, materializing zeros for absent keys.
    pub fn block_or_zero(&self, walk: &WalkModel, site: &str) -> Result<CMatrix> {
        let d = walk.dim_of(site)?;
        Ok(self
            .blocks
            .get(site)
            .cloned()
            .unwrap_or_else(|| CMatrix::zeros(d, d)))
    }

    pub fn trace(&self) -> C64 {
        self.blocks.values().map(CMatrix::trace).sum()
    }

    /// Per-site traces (the position law), in label order.
    pub fn site_traces(&self, walk: &WalkModel) -> Result<Vec<(String, f64)>> {
        let mut out = Vec::with_capacity(walk.site_count());
        for s in walk.sites() {
            let t = self
                .blocks
                .get(&s.id)
                .map(|b| b.trace().re)
                .unwrap_or(0.0);
            out.push((s.id.clone(), t));
        }
        Ok(out)
    }

    /// Trace norm, the sum of per-block trace norms.
    pub fn trace_norm(&self) -> Result<f64> {
        let mut acc = 0.0;
        for b in self.blocks.values() {
            acc += crate::numerics::trace_norm(b)?;
        }
        Ok(acc)
    }

    /// Trace distance to another block state over the given walk's sites.
    pub fn trace_distance(&self, other: &BlockState, walk: &WalkModel) -> Result<f64> {
        let mut acc = 0.0;
        for s in walk.sites() {
            let a = self.block_or_zero(walk, &s.id)?;
            let b = other.block_or_zero(walk, &s.id)?;
            acc += crate::numerics::trace_norm(&(&a - &b))?;
        }
        Ok(acc)
    }

    pub fn scale(&self, s: C64) -> BlockState {
        BlockState {
            blocks: self
                .blocks
                .iter()
                .map(|(k, m)| (k.clone(), m.scale(s)))
                .collect(),
        }
    }

    pub fn add(&self, other: &BlockState) -> BlockState {
        let mut blocks = self.blocks.clone();
        for (k, m) in &other.blocks {
            blocks
                .entry(k.clone())
                .and_modify(|b| *b = &*b + m)
                .or_insert_with(|| m.clone());
        }
        BlockState { blocks }
    }

    pub fn sub(&self, other: &BlockState) -> BlockState {
        self.add(&other.scale(c(-1.0, 0.0)))
    }

    /// Hermitian part of every block.
    pub fn hermitize(&self) -> BlockState {
        BlockState {
            blocks: self
                .blocks
                .iter()
                .map(|(k, m)| (k.clone(), m.hermitize()))
                .collect(),
        }
    }

    /// Smallest eigenvalue over all blocks (0 for an empty state).
    pub fn min_eigenvalue(&self) -> Result<f64> {
        let mut min = f64::INFINITY;
        for b in self.blocks.values() {
            let eig = eig_hermitian(&b.hermitize())?;
            if let Some(&l) = eig.values.first() {
                min = min.min(l);
            }
        }
        Ok(if min.is_finite() { min } else { 0.0 })
    }

    /// True when every block is Hermitian and PSD within `tol`, and the trace
    /// is 1 within `tol` when `normalized` is requested.
    pub fn is_state(&self, tol: f64, normalized: bool) -> Result<bool> {
        for b in self.blocks.values() {
            if b.herm_deviation() > tol * b.frob_norm().max(1.0) {
                return Ok(false);
            }
        }
        if self.min_eigenvalue()? < -tol {
            return Ok(false);
        }
        if normalized && (self.trace() - C64::ONE).norm() > tol {
            return Ok(false);
        }
        Ok(true)
    }
}

impl BlockObservable {
    /// Identity observable on the walk.
    pub fn identity(walk: &WalkModel) -> Self {
        let mut blocks = BTreeMap::new();
        for s in walk.sites() {
            blocks.insert(s.id.clone(), CMatrix::identity(s.dim));
        }
        BlockObservable { blocks }
    }

    pub fn block(&self, site: &str) -> Option<&CMatrix> {
        self.blocks.get(site)
    }

    /// Duality pairing `Tr(rho X)`.
    pub fn pair(&self, rho: &BlockState) -> C64 {
        let mut acc = C64::ZERO;
        for (k, x) in &self.blocks {
            if let Some(b) = rho.blocks.get(k) {
                acc += b.mul(x).trace();
            }
        }
        acc
    }

    /// Frobenius distance to another observable over the walk's sites.
    pub fn frob_distance(&self, other: &BlockObservable, walk: &WalkModel) -> f64 {
        let mut acc = 0.0;
        for s in walk.sites() {
            let z = CMatrix::zeros(s.dim, s.dim);
            let a = self.blocks.get(&s.id).unwrap_or(&z);
            let b = other.blocks.get(&s.id).unwrap_or(&z);
            acc += (a - b).frob_norm().powi(2);
        }
        acc.sqrt()
    }
}

/// A path is a vertex sequence with at least one step. Consecutive pairs need
/// not be edges of the walk: missing edges act as zero operators.
#[derive(Debug, Clone, PartialEq)]
pub struct Path {
    vertices: Vec<String>,
}

impl Path {
    pub fn new(vertices: Vec<String>) -> Result<Self> {
        if vertices.len() < 2 {
            return Err(Error::InvalidArgument(
                "a path needs at least two vertices (one step)".into(),
            ));
        }
        Ok(Path { vertices })
    }

    pub fn from_labels(labels: &[&str]) -> Result<Self> {
        Path::new(labels.iter().map(|s| s.to_string()).collect())
    }

    pub fn vertices(&self) -> &[String] {
        &self.vertices
    }

    pub fn len(&self) -> usize {
        self.vertices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vertices.is_empty()
    }

    /// Number of edges traversed.
    pub fn step_count(&self) -> usize {
        self.vertices.len() - 1
    }

    pub fn first(&self) -> &str {
        &self.vertices[0]
    }

    pub fn last(&self) -> &str {
        self.vertices.last().unwrap()
    }

    /// Iterator over consecutive (from, to) pairs.
    pub fn steps(&self) -> impl Iterator<Item = (&str, &str)> {
        self.vertices
            .windows(2)
            .map(|w| (w[0].as_str(), w[1].as_str()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::registry;

    fn e1() -> CVector {
        CVector::basis(2, 0)
    }

    #[test]
    fn m3_validates_tightly() {
        let walk = registry::builtin("m3").unwrap();
        let report = walk.validate(1e-12).unwrap();
        assert!(report.ok, "deviations: {:?}", report.per_site);
        assert!(report.worst().unwrap().1 < 1e-12);
    }

    #[test]
    fn identity_walk_validates() {
        let walk = WalkModel::new(
            "id",
            vec![SiteSpace { id: "a".into(), dim: 2 }],
            vec![TransitionEdge {
                from: "a".into(),
                to: "a".into(),
                kraus: vec![CMatrix::identity(2)],
            }],
        )
        .unwrap();
        assert!(walk.validate(1e-12).unwrap().ok);
    }

    #[test]
    fn scaled_walk_fails_validation_by_the_expected_amount() {
        let walk = registry::builtin("m3").unwrap();
        let scaled_edges: Vec<TransitionEdge> = walk
            .edges()
            .iter()
            .map(|e| TransitionEdge {
                from: e.from.clone(),
                to: e.to.clone(),
                kraus: e.kraus.iter().map(|m| m.scale(c(0.9, 0.0))).collect(),
            })
            .collect();
        let bad = WalkModel::new("m3-scaled", walk.sites().to_vec(), scaled_edges).unwrap();
        let report = bad.validate(1e-10).unwrap();
        assert!(!report.ok);
        // sum L*L becomes 0.81 Id, so the deviation is 0.19 at every site.
        for (_, dev) in &report.per_site {
            assert!((dev - 0.19).abs() < 1e-12);
        }
    }

    #[test]
    fn apply_matches_hand_computation_on_m3() {
        let walk = registry::builtin("m3").unwrap();
        let rho = BlockState::pure(&walk, "1", &e1()).unwrap();
        let out = walk.apply(&rho).unwrap();
        // Hand evaluation: block(2) = (1/3)[[1,0],[0,0]], block(3) = (1/3)[[1,-1],[-1,1]].
        let b2 = out.block("2").unwrap();
        let b3 = out.block("3").unwrap();
        let want2 = CMatrix::from_real(&[&[1.0 / 3.0, 0.0], &[0.0, 0.0]]);
        let want3 = CMatrix::from_real(&[&[1.0 / 3.0, -1.0 / 3.0], &[-1.0 / 3.0, 1.0 / 3.0]]);
        assert!((b2 - &want2).frob_norm() < 1e-14);
        assert!((b3 - &want3).frob_norm() < 1e-14);
        assert!(out.block("1").unwrap().frob_norm() < 1e-14);
        assert!((out.trace() - C64::ONE).norm() < 1e-14);
    }

    #[test]
    fn identity_walk_apply_is_identity() {
        let walk = WalkModel::new(
            "id",
            vec![SiteSpace { id: "a".into(), dim: 2 }],
            vec![TransitionEdge {
                from: "a".into(),
                to: "a".into(),
                kraus: vec![CMatrix::identity(2)],
            }],
        )
        .unwrap();
        let rho = BlockState::pure(&walk, "a", &CVector::from_real(&[0.6, 0.8])).unwrap();
        let out = walk.apply(&rho).unwrap();
        assert!(rho.trace_distance(&out, &walk).unwrap() < 1e-14);
    }

    #[test]
    fn ex_9_2_invariant_state_is_fixed() {
        let walk = registry::builtin("ex-9.2").unwrap();
        let rho = BlockState::pure(&walk, "2", &e1()).unwrap();
        let out = walk.apply(&rho).unwrap();
        assert!(rho.trace_distance(&out, &walk).unwrap() < 1e-12);
    }

    #[test]
    fn dual_of_identity_is_identity() {
        for name in ["m3", "m4", "ex-9.2", "ex-6.4", "ex-6.11", "ex-9.6", "remark-4.6"] {
            let walk = registry::builtin(name).unwrap();
            let id = BlockObservable::identity(&walk);
            let out = walk.apply_dual(&id).unwrap();
            assert!(
                out.frob_distance(&id, &walk) < 1e-12,
                "dual unitality failed for {name}"
            );
        }
    }

    #[test]
    fn dual_hand_computation_on_m3() {
        let walk = registry::builtin("m3").unwrap();
        let mut blocks = BTreeMap::new();
        blocks.insert("2".to_string(), CMatrix::identity(2));
        let x = BlockObservable { blocks };
        let out = walk.apply_dual(&x).unwrap();
        let want1 = CMatrix::from_real(&[&[1.0 / 3.0, 1.0 / 3.0], &[1.0 / 3.0, 2.0 / 3.0]]);
        let want3 = CMatrix::from_real(&[&[2.0 / 3.0, -1.0 / 3.0], &[-1.0 / 3.0, 1.0 / 3.0]]);
        assert!((out.block("1").unwrap() - &want1).frob_norm() < 1e-14);
        assert!((out.block("3").unwrap() - &want3).frob_norm() < 1e-14);
        assert!(out.block("2").unwrap().frob_norm() < 1e-14);
    }

    #[test]
    fn path_operator_examples() {
        // ex-6.4, path (1,2,3) -> diag(4,1)/5
        let walk = registry::builtin("ex-6.4").unwrap();
        let p = Path::from_labels(&["1", "2", "3"]).unwrap();
        let op = walk.path_operator(&p).unwrap();
        let want = CMatrix::from_real(&[&[0.8, 0.0], &[0.0, 0.2]]);
        assert!((&op - &want).frob_norm() < 1e-14);

        // m3 has no self edge: path (1,1) gives the zero operator.
        let m3 = registry::builtin("m3").unwrap();
        let loopy = Path::from_labels(&["1", "1"]).unwrap();
        assert!(m3.path_operator(&loopy).unwrap().frob_norm() == 0.0);

        // a single step returns the edge operator itself.
        let single = Path::from_labels(&["1", "2"]).unwrap();
        let op = m3.path_operator(&single).unwrap();
        assert!((&op - &m3.edge("1", "2").unwrap().kraus[0]).frob_norm() == 0.0);
    }

    #[test]
    fn path_composition_law() {
        let walk = registry::builtin("m3").unwrap();
        let p1 = Path::from_labels(&["1", "2"]).unwrap();
        let p2 = Path::from_labels(&["2", "3"]).unwrap();
        let whole = Path::from_labels(&["1", "2", "3"]).unwrap();
        let composed = walk
            .path_operator(&p2)
            .unwrap()
            .mul(&walk.path_operator(&p1).unwrap());
        assert!((&walk.path_operator(&whole).unwrap() - &composed).frob_norm() < 1e-14);
    }

    #[test]
    fn minimal_dilation_examples() {
        let labels: Vec<String> = vec!["a".into(), "b".into()];
        // identity chain: self loops only
        let w = minimal_dilation(&[vec![1.0, 0.0], vec![0.0, 1.0]], &labels).unwrap();
        assert!(w.edge("a", "b").is_none());
        assert!((w.edge("a", "a").unwrap().kraus[0][(0, 0)] - C64::ONE).norm() < 1e-15);
        assert!(w.validate(1e-12).unwrap().ok);

        // permutation
        let w = minimal_dilation(&[vec![0.0, 1.0], vec![1.0, 0.0]], &labels).unwrap();
        assert!(w.edge("a", "a").is_none());
        assert!((w.edge("a", "b").unwrap().kraus[0][(0, 0)] - C64::ONE).norm() < 1e-15);

        // uniform chain: all operators 1/sqrt(2)
        let w = minimal_dilation(&[vec![0.5, 0.5], vec![0.5, 0.5]], &labels).unwrap();
        let s = 1.0 / 2f64.sqrt();
        for e in w.edges() {
            assert!((e.kraus[0][(0, 0)].re - s).abs() < 1e-15);
        }
        assert!(w.validate(1e-12).unwrap().ok);

        // non-stochastic input rejected
        assert!(minimal_dilation(&[vec![0.5, 0.4], vec![0.5, 0.5]], &labels).is_err());
    }

    #[test]
    fn minimal_dilation_reproduces_classical_markov_evolution() {
        // Brute-force comparison on a fixed 4-state chain.
        let p = vec![
            vec![0.1, 0.2, 0.3, 0.4],
            vec![0.25, 0.25, 0.25, 0.25],
            vec![0.0, 0.5, 0.5, 0.0],
            vec![0.7, 0.0, 0.1, 0.2],
        ];
        let labels: Vec<String> = (1..=4).map(|i| i.to_string()).collect();
        let walk = minimal_dilation(&p, &labels).unwrap();
        let mut weights = [1.0, 0.0, 0.0, 0.0];
        let mut rho = BlockState::pure(&walk, "1", &CVector::basis(1, 0)).unwrap();
        for _ in 0..8 {
            rho = walk.apply(&rho).unwrap();
            let mut next = [0.0; 4];
            for j in 0..4 {
                for i in 0..4 {
                    next[i] += weights[j] * p[j][i];
                }
            }
            weights = next;
            for (i, l) in labels.iter().enumerate() {
                let got = rho.block(l).map(|b| b.trace().re).unwrap_or(0.0);
                assert!((got - weights[i]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn lift_homogeneous_matches_builtin_m3() {
        let gens = registry::m_n_generators();
        let lifted = lift_homogeneous(&gens, 3, "lifted").unwrap();
        let m3 = registry::builtin("m3").unwrap();
        assert_eq!(lifted.site_count(), m3.site_count());
        for e in m3.edges() {
            let le = lifted.edge(&e.from, &e.to).expect("edge present");
            assert!((&le.kraus[0] - &e.kraus[0]).frob_norm() < 1e-15);
        }
    }

    #[test]
    fn lift_single_identity_generator() {
        let mut gens = BTreeMap::new();
        gens.insert(0i64, CMatrix::identity(2));
        let w = lift_homogeneous(&gens, 2, "decoupled").unwrap();
        assert_eq!(w.edges().len(), 2);
        assert!(w.edge("1", "2").is_none());
        assert!(w.validate(1e-12).unwrap().ok);
    }

    #[test]
    fn local_map_preserves_trace_and_fixes_half_identity() {
        let gens = registry::m_n_generators();
        let eta = CMatrix::identity(2).scale(c(0.5, 0.0));
        let out = local_map_apply(&gens, &eta).unwrap();
        assert!((&out - &eta).frob_norm() < 1e-14);

        let zero = CMatrix::zeros(2, 2);
        assert!(local_map_apply(&gens, &zero).unwrap().frob_norm() == 0.0);

        let e1 = CMatrix::from_real(&[&[1.0, 0.0], &[0.0, 0.0]]);
        let out = local_map_apply(&gens, &e1).unwrap();
        let want = CMatrix::from_real(&[&[2.0 / 3.0, -1.0 / 3.0], &[-1.0 / 3.0, 1.0 / 3.0]]);
        assert!((&out - &want).frob_norm() < 1e-14);
        assert!((out.trace() - C64::ONE).norm() < 1e-14);
    }

    #[test]
    fn edge_sequence_operator_selects_kraus_branches() {
        // The 2-cycle lift merges the two shift generators onto one edge, so
        // explicit Kraus indices pick the branch.
        let gens = registry::m_n_generators();
        let walk = lift_homogeneous(&gens, 2, "m2").unwrap();
        let e = walk.edge("1", "2").unwrap();
        assert_eq!(e.kraus.len(), 2);
        let p = Path::from_labels(&["1", "2", "1"]).unwrap();
        for (a, b) in [(0usize, 0usize), (0, 1), (1, 0), (1, 1)] {
            let op = walk.edge_sequence_operator(&p, &[a, b]).unwrap();
            let want = walk.edge("2", "1").unwrap().kraus[b].mul(&e.kraus[a]);
            assert!((&op - &want).frob_norm() < 1e-15);
        }
        // Plain path_operator refuses the ambiguous edge.
        assert!(walk.path_operator(&p).is_err());
        // Index bookkeeping errors.
        assert!(walk.edge_sequence_operator(&p, &[0]).is_err());
        assert!(walk.edge_sequence_operator(&p, &[0, 5]).is_err());
        // Absent edges still short-circuit to the zero operator.
        let m3 = registry::builtin("m3").unwrap();
        let loopy = Path::from_labels(&["1", "1"]).unwrap();
        let z = m3.edge_sequence_operator(&loopy, &[0]).unwrap();
        assert_eq!(z.frob_norm(), 0.0);
    }

    #[test]
    fn structural_errors_are_detected() {
        let sites = vec![
            SiteSpace { id: "a".into(), dim: 2 },
            SiteSpace { id: "b".into(), dim: 2 },
        ];
        // wrong shape
        let bad = WalkModel::new(
            "bad",
            sites.clone(),
            vec![TransitionEdge {
                from: "a".into(),
                to: "b".into(),
                kraus: vec![CMatrix::zeros(3, 2)],
            }],
        );
        assert!(matches!(bad, Err(Error::EdgeShape { .. })));
        // unknown site
        let bad = WalkModel::new(
            "bad",
            sites.clone(),
            vec![TransitionEdge {
                from: "zzz".into(),
                to: "b".into(),
                kraus: vec![CMatrix::zeros(2, 2)],
            }],
        );
        assert!(matches!(bad, Err(Error::UnknownSite(_))));
        // duplicate edge
        let dup = TransitionEdge {
            from: "a".into(),
            to: "b".into(),
            kraus: vec![CMatrix::zeros(2, 2)],
        };
        let bad = WalkModel::new("bad", sites, vec![dup.clone(), dup]);
        assert!(matches!(bad, Err(Error::DuplicateEdge { .. })));
    }
}
