//! Shared helpers for the integration suites: seeded random walks and states.

use rand::Rng;
use rand_chacha::ChaCha12Rng;

use oqrw::numerics::{c, eig_hermitian, C64, CMatrix, CVector};
use oqrw::walk::{BlockState, SiteSpace, TransitionEdge, WalkModel};

pub fn random_complex(rng: &mut ChaCha12Rng) -> C64 {
    c(rng.random::<f64>() * 2.0 - 1.0, rng.random::<f64>() * 2.0 - 1.0)
}

pub fn random_matrix(rng: &mut ChaCha12Rng, rows: usize, cols: usize) -> CMatrix {
    CMatrix::from_fn(rows, cols, |_, _| random_complex(rng))
}

/// Inverse square root of a positive definite Hermitian matrix.
fn inv_sqrt(m: &CMatrix) -> Option<CMatrix> {
    let eig = eig_hermitian(m).ok()?;
    let top = eig.values.last().copied()?;
    if eig.values[0] <= 1e-3 * top {
        return None;
    }
    let mut out = CMatrix::zeros(m.rows(), m.cols());
    for (l, v) in eig.values.iter().zip(&eig.vectors) {
        out = &out + &v.outer(v).scale(c(1.0 / l.sqrt(), 0.0));
    }
    Some(out)
}

/// Random validated walk: 2..=4 sites of dimension 1..=3, random edge set,
/// Kraus families renormalized to satisfy the total-probability condition
/// exactly (up to roundoff).
pub fn random_walk(rng: &mut ChaCha12Rng) -> WalkModel {
    loop {
        let n_sites = rng.random_range(2..=4usize);
        let dims: Vec<usize> = (0..n_sites).map(|_| rng.random_range(1..=3usize)).collect();
        let labels: Vec<String> = (1..=n_sites).map(|i| i.to_string()).collect();
        let sites: Vec<SiteSpace> = labels
            .iter()
            .zip(&dims)
            .map(|(id, &dim)| SiteSpace { id: id.clone(), dim })
            .collect();

        let mut ok = true;
        let mut edges: Vec<TransitionEdge> = Vec::new();
        for (j, dj) in dims.iter().enumerate() {
            // Raw Kraus data per target; grow until sum L*L is well-conditioned.
            let mut raw: Vec<(usize, Vec<CMatrix>)> = Vec::new();
            let mut guard = 0;
            loop {
                guard += 1;
                if guard > 20 {
                    ok = false;
                    break;
                }
                let target = rng.random_range(0..n_sites);
                if let Some((_, kraus)) = raw.iter_mut().find(|(t, _)| *t == target) {
                    kraus.push(random_matrix(rng, dims[target], *dj));
                } else {
                    raw.push((target, vec![random_matrix(rng, dims[target], *dj)]));
                }
                let mut gram = CMatrix::zeros(*dj, *dj);
                for (_, kraus) in &raw {
                    for m in kraus {
                        gram = &gram + &m.adjoint().mul(m);
                    }
                }
                if let Some(w) = inv_sqrt(&gram) {
                    for (target, kraus) in raw {
                        edges.push(TransitionEdge {
                            from: labels[j].clone(),
                            to: labels[target].clone(),
                            kraus: kraus.iter().map(|m| m.mul(&w)).collect(),
                        });
                    }
                    break;
                }
            }
            if !ok {
                break;
            }
        }
        if !ok {
            continue;
        }
        let walk = WalkModel::new("random", sites, edges).expect("structurally sound");
        let report = walk.validate(1e-10).expect("validation runs");
        if report.ok {
            return walk;
        }
    }
}

/// Random normalized PSD block state over the walk's sites.
pub fn random_state(rng: &mut ChaCha12Rng, walk: &WalkModel) -> BlockState {
    let mut rho = BlockState::zero();
    let mut total = 0.0;
    for s in walk.sites() {
        let m = random_matrix(rng, s.dim, s.dim);
        let psd = m.mul(&m.adjoint());
        total += psd.trace().re;
        rho.blocks.insert(s.id.clone(), psd);
    }
    rho.scale(c(1.0 / total, 0.0))
}

/// Random normalized vector of a given dimension.
#[allow(dead_code)]
pub fn random_vector(rng: &mut ChaCha12Rng, dim: usize) -> CVector {
    loop {
        let v = CVector::from((0..dim).map(|_| random_complex(rng)).collect::<Vec<_>>());
        if v.norm() > 1e-3 {
            return v.normalized();
        }
    }
}

/// Random unitary via the polar factor of a random matrix.
#[allow(dead_code)]
pub fn random_unitary(rng: &mut ChaCha12Rng, dim: usize) -> CMatrix {
    loop {
        let m = random_matrix(rng, dim, dim);
        if let Ok(u) = oqrw::numerics::polar_unitary(&m, 1e-6) {
            return u;
        }
    }
}

/// Random validated walk on a directed-cycle backbone (strongly connected by
/// construction), with occasional extra edges. Generically irreducible.
#[allow(dead_code)]
pub fn random_cycle_walk(rng: &mut ChaCha12Rng) -> WalkModel {
    loop {
        let n_sites = rng.random_range(2..=4usize);
        let dims: Vec<usize> = (0..n_sites).map(|_| rng.random_range(1..=3usize)).collect();
        let labels: Vec<String> = (1..=n_sites).map(|i| i.to_string()).collect();
        let sites: Vec<SiteSpace> = labels
            .iter()
            .zip(&dims)
            .map(|(id, &dim)| SiteSpace { id: id.clone(), dim })
            .collect();
        let mut ok = true;
        let mut edges: Vec<TransitionEdge> = Vec::new();
        for (j, dj) in dims.iter().enumerate() {
            let cycle_target = (j + 1) % n_sites;
            let mut raw: Vec<(usize, Vec<CMatrix>)> = vec![(
                cycle_target,
                vec![random_matrix(rng, dims[cycle_target], *dj)],
            )];
            // A lone edge would normalize to an isometry and make the walk
            // trivially reducible; give every source a second operator.
            let extra = rng.random_range(0..n_sites);
            if let Some((_, kraus)) = raw.iter_mut().find(|(t, _)| *t == extra) {
                kraus.push(random_matrix(rng, dims[extra], *dj));
            } else {
                raw.push((extra, vec![random_matrix(rng, dims[extra], *dj)]));
            }
            let mut guard = 0;
            loop {
                guard += 1;
                if guard > 20 {
                    ok = false;
                    break;
                }
                let mut gram = CMatrix::zeros(*dj, *dj);
                for (_, kraus) in &raw {
                    for m in kraus {
                        gram = &gram + &m.adjoint().mul(m);
                    }
                }
                if let Some(w) = inv_sqrt(&gram) {
                    for (target, kraus) in raw {
                        edges.push(TransitionEdge {
                            from: labels[j].clone(),
                            to: labels[target].clone(),
                            kraus: kraus.iter().map(|m| m.mul(&w)).collect(),
                        });
                    }
                    break;
                }
                let target = rng.random_range(0..n_sites);
                if let Some((_, kraus)) = raw.iter_mut().find(|(t, _)| *t == target) {
                    kraus.push(random_matrix(rng, dims[target], *dj));
                } else {
                    raw.push((target, vec![random_matrix(rng, dims[target], *dj)]));
                }
            }
            if !ok {
                break;
            }
        }
        if !ok {
            continue;
        }
        let walk = WalkModel::new("random-cycle", sites, edges).expect("structurally sound");
        if walk.validate(1e-10).expect("validation runs").ok {
            return walk;
        }
    }
}

/// Random walk on a strictly forward d-cycle: every edge advances one site,
/// so any admissible period is a multiple of d. Internal spaces share one
/// dimension and every edge carries two normalized random Kraus operators.
#[allow(dead_code)]
pub fn random_forward_cycle_walk(rng: &mut ChaCha12Rng, d: usize, dim: usize) -> WalkModel {
    loop {
        let labels: Vec<String> = (1..=d).map(|i| i.to_string()).collect();
        let sites: Vec<SiteSpace> = labels
            .iter()
            .map(|id| SiteSpace { id: id.clone(), dim })
            .collect();
        let mut edges = Vec::new();
        let mut ok = true;
        for j in 0..d {
            let target = (j + 1) % d;
            let raw = vec![random_matrix(rng, dim, dim), random_matrix(rng, dim, dim)];
            let mut gram = CMatrix::zeros(dim, dim);
            for m in &raw {
                gram = &gram + &m.adjoint().mul(m);
            }
            let Some(w) = inv_sqrt(&gram) else {
                ok = false;
                break;
            };
            edges.push(TransitionEdge {
                from: labels[j].clone(),
                to: labels[target].clone(),
                kraus: raw.iter().map(|m| m.mul(&w)).collect(),
            });
        }
        if !ok {
            continue;
        }
        let walk = WalkModel::new("forward-cycle", sites, edges).expect("structurally sound");
        if walk.validate(1e-10).expect("validation runs").ok {
            return walk;
        }
    }
}
