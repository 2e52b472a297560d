//! Builtin example walks.
//!
//! Names accept an optional query suffix for parameters, e.g.
//! `m4-eps?eps=0.05` or `z8-period4?alpha=0.7853981633974483`.

use std::collections::BTreeMap;
use std::f64::consts::{FRAC_1_SQRT_2, PI};

use crate::error::{Error, Result};
use crate::numerics::{c, CMatrix};
use crate::walk::{lift_homogeneous, SiteSpace, TransitionEdge, WalkModel};

/// Registry names, without parameter suffixes.
pub const NAMES: &[&str] = &[
    "ex-9.2",
    "m3",
    "m4",
    "m4-eps",
    "ex-6.4",
    "ex-6.11",
    "z8-period4",
    "ex-9.6",
    "remark-4.6",
];

/// Shift generators of the cyclic nearest-neighbour walk family:
/// `L_+ = (1/sqrt 3) [[1,1],[0,1]]`, `L_- = (1/sqrt 3) [[1,0],[-1,1]]`.
pub fn m_n_generators() -> BTreeMap<i64, CMatrix> {
    let s = 1.0 / 3f64.sqrt();
    let mut gens = BTreeMap::new();
    gens.insert(
        1i64,
        CMatrix::from_real(&[&[s, s], &[0.0, s]]),
    );
    gens.insert(
        -1i64,
        CMatrix::from_real(&[&[s, 0.0], &[-s, s]]),
    );
    gens
}

/// Same family with a loop of weight `eps` added at every site.
pub fn m_n_eps_generators(eps: f64) -> BTreeMap<i64, CMatrix> {
    let damp = (1.0 - eps).sqrt();
    let mut gens = BTreeMap::new();
    for (s, m) in m_n_generators() {
        gens.insert(s, m.scale(c(damp, 0.0)));
    }
    gens.insert(0i64, CMatrix::identity(2).scale(c(eps.sqrt(), 0.0)));
    gens
}

/// Cyclic walk on `n` sites from the `m_n` generators.
pub fn m_n(n: usize) -> Result<WalkModel> {
    lift_homogeneous(&m_n_generators(), n, format!("m{n}"))
}

/// Perturbed (loop-added) cyclic walk on `n` sites.
pub fn m_n_eps(n: usize, eps: f64) -> Result<WalkModel> {
    if !(0.0..1.0).contains(&eps) || eps == 0.0 {
        return Err(Error::InvalidArgument(format!(
            "eps must lie in (0, 1), got {eps}"
        )));
    }
    lift_homogeneous(&m_n_eps_generators(eps), n, format!("m{n}-eps{eps}"))
}

/// Generators of the spin-flip/phase walk: `L_+ = p [[0,1],[1,0]]`,
/// `L_- = q [[1,0],[0,e^{i alpha}]]`, with `p = q = 1/sqrt 2`.
pub fn phase_walk_generators(alpha: f64) -> BTreeMap<i64, CMatrix> {
    let p = FRAC_1_SQRT_2;
    let mut gens = BTreeMap::new();
    gens.insert(
        1i64,
        CMatrix::from_real(&[&[0.0, p], &[p, 0.0]]),
    );
    let mut lm = CMatrix::zeros(2, 2);
    lm[(0, 0)] = c(p, 0.0);
    lm[(1, 1)] = c(p * alpha.cos(), p * alpha.sin());
    gens.insert(-1i64, lm);
    gens
}

/// The spin-flip/phase walk truncated to an 8-site cycle.
pub fn z8_phase_walk(alpha: f64) -> Result<WalkModel> {
    lift_homogeneous(&phase_walk_generators(alpha), 8, format!("z8-period4(alpha={alpha})"))
}

/// Two-site absorbing walk with one transient layer.
fn ex_9_2() -> Result<WalkModel> {
    let (a, b, cc, d) = (0.6, 0.8, 0.8, 0.6);
    let p = 0.5f64;
    let q = 1.0 - p;
    let sites = vec![
        SiteSpace { id: "1".into(), dim: 2 },
        SiteSpace { id: "2".into(), dim: 2 },
    ];
    let edges = vec![
        TransitionEdge {
            from: "1".into(),
            to: "1".into(),
            kraus: vec![CMatrix::from_real(&[&[a, 0.0], &[0.0, b]])],
        },
        TransitionEdge {
            from: "2".into(),
            to: "1".into(),
            kraus: vec![CMatrix::from_real(&[&[0.0, p.sqrt()], &[0.0, 0.0]])],
        },
        TransitionEdge {
            from: "2".into(),
            to: "2".into(),
            kraus: vec![CMatrix::from_real(&[&[1.0, 0.0], &[0.0, q.sqrt()]])],
        },
        TransitionEdge {
            from: "1".into(),
            to: "2".into(),
            kraus: vec![CMatrix::from_real(&[&[cc, 0.0], &[0.0, d]])],
        },
    ];
    WalkModel::new("ex-9.2", sites, edges)
}

/// Three-site cycle with diagonal operators and two decoupled lanes.
fn ex_6_4() -> Result<WalkModel> {
    let s = 1.0 / 5f64.sqrt();
    let fwd = CMatrix::from_real(&[&[s, 0.0], &[0.0, 2.0 * s]]);
    let bwd = CMatrix::from_real(&[&[2.0 * s, 0.0], &[0.0, s]]);
    let sites = (1..=3)
        .map(|i| SiteSpace { id: i.to_string(), dim: 2 })
        .collect();
    // L_{1,2} = L_{2,3} = L_{3,1} = diag(1,2)/sqrt 5, the reverse arcs carry diag(2,1)/sqrt 5.
    let edges = vec![
        TransitionEdge { from: "2".into(), to: "1".into(), kraus: vec![fwd.clone()] },
        TransitionEdge { from: "3".into(), to: "2".into(), kraus: vec![fwd.clone()] },
        TransitionEdge { from: "1".into(), to: "3".into(), kraus: vec![fwd] },
        TransitionEdge { from: "1".into(), to: "2".into(), kraus: vec![bwd.clone()] },
        TransitionEdge { from: "2".into(), to: "3".into(), kraus: vec![bwd.clone()] },
        TransitionEdge { from: "3".into(), to: "1".into(), kraus: vec![bwd] },
    ];
    WalkModel::new("ex-6.4", sites, edges)
}

/// Two sites, swap loops and identity hops; minimal enclosures are the
/// symmetric/antisymmetric lines.
fn ex_6_11() -> Result<WalkModel> {
    let s = FRAC_1_SQRT_2;
    let swap = CMatrix::from_real(&[&[0.0, s], &[s, 0.0]]);
    let id = CMatrix::identity(2).scale(c(s, 0.0));
    let sites = vec![
        SiteSpace { id: "1".into(), dim: 2 },
        SiteSpace { id: "2".into(), dim: 2 },
    ];
    let edges = vec![
        TransitionEdge { from: "1".into(), to: "1".into(), kraus: vec![swap.clone()] },
        TransitionEdge { from: "2".into(), to: "2".into(), kraus: vec![swap] },
        TransitionEdge { from: "2".into(), to: "1".into(), kraus: vec![id.clone()] },
        TransitionEdge { from: "1".into(), to: "2".into(), kraus: vec![id] },
    ];
    WalkModel::new("ex-6.11", sites, edges)
}

/// Two sites, identity loops and swap hops; continuum of minimal enclosures.
fn ex_9_6() -> Result<WalkModel> {
    let p = 0.5f64;
    let stay = CMatrix::identity(2).scale(c(p.sqrt(), 0.0));
    let hop = CMatrix::from_real(&[&[0.0, (1.0 - p).sqrt()], &[(1.0 - p).sqrt(), 0.0]]);
    let sites = vec![
        SiteSpace { id: "1".into(), dim: 2 },
        SiteSpace { id: "2".into(), dim: 2 },
    ];
    let edges = vec![
        TransitionEdge { from: "1".into(), to: "1".into(), kraus: vec![stay.clone()] },
        TransitionEdge { from: "2".into(), to: "2".into(), kraus: vec![stay] },
        TransitionEdge { from: "1".into(), to: "2".into(), kraus: vec![hop.clone()] },
        TransitionEdge { from: "2".into(), to: "1".into(), kraus: vec![hop] },
    ];
    WalkModel::new("ex-9.6", sites, edges)
}

/// Two sites driven by the rotation matrix R = [[0,-1],[1,0]] with phases.
fn remark_4_6() -> Result<WalkModel> {
    let s = FRAC_1_SQRT_2;
    // i R / sqrt 2 and its negative.
    let pos = CMatrix::from_fn(2, 2, |i, j| match (i, j) {
        (0, 1) => c(0.0, -s),
        (1, 0) => c(0.0, s),
        _ => c(0.0, 0.0),
    });
    let neg = pos.scale(c(-1.0, 0.0));
    let sites = vec![
        SiteSpace { id: "1".into(), dim: 2 },
        SiteSpace { id: "2".into(), dim: 2 },
    ];
    let edges = vec![
        TransitionEdge { from: "1".into(), to: "1".into(), kraus: vec![pos.clone()] },
        TransitionEdge { from: "1".into(), to: "2".into(), kraus: vec![pos] },
        TransitionEdge { from: "2".into(), to: "1".into(), kraus: vec![neg.clone()] },
        TransitionEdge { from: "2".into(), to: "2".into(), kraus: vec![neg] },
    ];
    WalkModel::new("remark-4.6", sites, edges)
}

/// Look up a builtin walk, with optional `?key=value` parameters.
pub fn builtin(spec: &str) -> Result<WalkModel> {
    let (name, params) = match spec.split_once('?') {
        Some((n, p)) => (n, Some(p)),
        None => (spec, None),
    };
    let mut eps = 0.05;
    let mut alpha = PI / 2.0;
    if let Some(p) = params {
        for kv in p.split('&').filter(|s| !s.is_empty()) {
            let (k, v) = kv.split_once('=').ok_or_else(|| {
                Error::InvalidArgument(format!("malformed parameter `{kv}` (expected key=value)"))
            })?;
            let val: f64 = v
                .parse()
                .map_err(|_| Error::InvalidArgument(format!("parameter `{k}`: bad number `{v}`")))?;
            match k {
                "eps" => eps = val,
                "alpha" => alpha = val,
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "unknown parameter `{k}` for builtin `{name}`"
                    )))
                }
            }
        }
    }
    match name {
        "ex-9.2" => ex_9_2(),
        "m3" => m_n(3),
        "m4" => m_n(4),
        "m4-eps" => m_n_eps(4, eps),
        "ex-6.4" => ex_6_4(),
        "ex-6.11" => ex_6_11(),
        "z8-period4" => z8_phase_walk(alpha),
        "ex-9.6" => ex_9_6(),
        "remark-4.6" => remark_4_6(),
        _ => Err(Error::UnknownBuiltin {
            name: name.to_string(),
            available: NAMES.join(", "),
        }),
    }
}
