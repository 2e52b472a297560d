//! Seeded Monte Carlo sampling of the measured process.
//!
//! Measuring the position after every step turns the walk into a classical
//! Markov chain (X_n, rho_n) of sites and conditioned internal states: from
//! (j, rho) the chain jumps to site i with probability `Tr Phi_{i,j}(rho)`
//! (Kraus operators aggregated per target site) and the state renormalizes to
//! `Phi_{i,j}(rho) / prob`. Identical seeds reproduce identical samples;
//! independent trajectories use per-index ChaCha streams so aggregation can be
//! parallelized without changing results.

use std::collections::BTreeMap;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::numerics::{c, CMatrix};
use crate::spectral::evolve;
use crate::walk::{BlockState, WalkModel};

/// One sampled trajectory: visited sites and (optionally) the conditioned
/// internal states, each trace-one PSD on its site.
#[derive(Debug, Clone)]
pub struct TrajectorySample {
    pub seed: u64,
    pub sites: Vec<String>,
    pub states: Option<Vec<CMatrix>>,
}

/// Occupation counts and conditional state averages of one trajectory.
#[derive(Debug, Clone)]
pub struct OccupationStats {
    pub counts: BTreeMap<String, u64>,
    pub freq: BTreeMap<String, f64>,
    pub conditional_avg: BTreeMap<String, CMatrix>,
    /// Running average of rho_k (x) |X_k><X_k|, a.s. convergent to an
    /// invariant state.
    pub km_average: BlockState,
}

/// Empirical-vs-exact comparison of the position law at time n.
#[derive(Debug, Clone)]
pub struct ComparisonReport {
    pub n: usize,
    pub trials: usize,
    /// (site, exact probability, observed count), label order.
    pub cells: Vec<(String, f64, u64)>,
    pub statistic: f64,
    pub dof: usize,
    pub threshold: f64,
    pub pass: bool,
}

/// Sample one trajectory of length `n` (so `n + 1` positions), recording the
/// conditioned states.
pub fn sample_trajectory(
    walk: &WalkModel,
    rho0: &BlockState,
    n: usize,
    seed: u64,
) -> Result<TrajectorySample> {
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let (sites, states) = run_chain(walk, rho0, n, &mut rng, true)?;
    Ok(TrajectorySample {
        seed,
        sites,
        states,
    })
}

/// Variant of [`sample_trajectory`] driven by an externally prepared RNG,
/// used for per-index trajectory streams.
pub fn sample_trajectory_from(
    walk: &WalkModel,
    rho0: &BlockState,
    n: usize,
    rng: &mut ChaCha12Rng,
) -> Result<TrajectorySample> {
    let (sites, states) = run_chain(walk, rho0, n, rng, true)?;
    Ok(TrajectorySample {
        seed: 0,
        sites,
        states,
    })
}

/// Core chain: X_0 from the initial per-site traces, then the measured-step
/// transition law.
fn run_chain(
    walk: &WalkModel,
    rho0: &BlockState,
    n: usize,
    rng: &mut ChaCha12Rng,
    record_states: bool,
) -> Result<(Vec<String>, Option<Vec<CMatrix>>)> {
    // Initial site distribution.
    let init = rho0.site_traces(walk)?;
    let total: f64 = init.iter().map(|(_, p)| p).sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "initial state has trace {total}, expected 1"
        )));
    }
    let mut site = draw(&init, rng)?.to_string();
    let mut rho = {
        let b = rho0.block_or_zero(walk, &site)?;
        let tr = b.trace().re;
        b.scale(c(1.0 / tr, 0.0))
    };

    let mut sites = Vec::with_capacity(n + 1);
    let mut states = record_states.then(|| Vec::with_capacity(n + 1));
    sites.push(site.clone());
    if let Some(v) = states.as_mut() {
        v.push(rho.clone());
    }

    for _ in 0..n {
        // Aggregate Kraus operators per target site (position measurement).
        let mut options: Vec<(String, f64, CMatrix)> = Vec::new();
        for e in walk.outgoing(&site)? {
            let d = walk.dim_of(&e.to)?;
            let mut moved = CMatrix::zeros(d, d);
            for m in &e.kraus {
                moved = &moved + &m.mul(&rho).mul(&m.adjoint());
            }
            let p = moved.trace().re;
            if p > 0.0 {
                options.push((e.to.clone(), p, moved));
            }
        }
        let total: f64 = options.iter().map(|(_, p, _)| p).sum();
        if (total - 1.0).abs() > 1e-9 {
            return Err(Error::Stochasticity {
                site: site.clone(),
                deviation: (total - 1.0).abs(),
                tol: 1e-9,
            });
        }
        // Cumulative inversion with a final clamp.
        let u: f64 = rng.random::<f64>() * total;
        let mut acc = 0.0;
        let mut chosen = options.len() - 1;
        for (k, (_, p, _)) in options.iter().enumerate() {
            acc += p;
            if u < acc {
                chosen = k;
                break;
            }
        }
        let (next_site, p, moved) = options.swap_remove(chosen);
        site = next_site;
        // Renormalize and keep the state explicitly Hermitian.
        rho = moved.scale(c(1.0 / p, 0.0)).hermitize();
        sites.push(site.clone());
        if let Some(v) = states.as_mut() {
            v.push(rho.clone());
        }
    }
    Ok((sites, states))
}

fn draw<'a>(weights: &'a [(String, f64)], rng: &mut ChaCha12Rng) -> Result<&'a str> {
    let entries: Vec<&(String, f64)> = weights.iter().filter(|(_, p)| *p > 0.0).collect();
    if entries.is_empty() {
        return Err(Error::InvalidArgument("no positive-probability site".into()));
    }
    let total: f64 = entries.iter().map(|(_, p)| p).sum();
    let u: f64 = rng.random::<f64>() * total;
    let mut acc = 0.0;
    for (label, p) in &entries {
        acc += p;
        if u < acc {
            return Ok(label);
        }
    }
    Ok(&entries.last().unwrap().0)
}

/// Occupation statistics of a trajectory with recorded states.
pub fn occupation_stats(sample: &TrajectorySample) -> Result<OccupationStats> {
    let states = sample
        .states
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("sample has no recorded states".into()))?;
    if sample.sites.is_empty() {
        return Err(Error::InvalidArgument("empty sample".into()));
    }
    let len = sample.sites.len() as f64;
    let mut counts: BTreeMap<String, u64> = BTreeMap::new();
    let mut sums: BTreeMap<String, CMatrix> = BTreeMap::new();
    for (site, rho) in sample.sites.iter().zip(states) {
        *counts.entry(site.clone()).or_insert(0) += 1;
        sums.entry(site.clone())
            .and_modify(|m| *m = &*m + rho)
            .or_insert_with(|| rho.clone());
    }
    let mut freq = BTreeMap::new();
    let mut conditional_avg = BTreeMap::new();
    let mut km_blocks = BTreeMap::new();
    for (site, &cnt) in &counts {
        freq.insert(site.clone(), cnt as f64 / len);
        let sum = &sums[site];
        conditional_avg.insert(site.clone(), sum.scale(c(1.0 / cnt as f64, 0.0)));
        km_blocks.insert(site.clone(), sum.scale(c(1.0 / len, 0.0)));
    }
    Ok(OccupationStats {
        counts,
        freq,
        conditional_avg,
        km_average: BlockState { blocks: km_blocks },
    })
}

/// Invariance defect of the running average: ‖M(km) − km‖₁. Small values
/// certify that the empirical limit is (approximately) an invariant state.
pub fn km_residual(walk: &WalkModel, stats: &OccupationStats) -> Result<f64> {
    let moved = walk.apply(&stats.km_average)?;
    moved.trace_distance(&stats.km_average, walk)
}

/// Upper quantile of the chi-square distribution used by `law_comparison`.
pub const LAW_SIGNIFICANCE: f64 = 1e-3;

/// Compare the empirical law of X_n over many trajectories with the exact law
/// of the unmeasured process at time n, via a chi-square test.
pub fn law_comparison(
    walk: &WalkModel,
    rho0: &BlockState,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<ComparisonReport> {
    if trials == 0 {
        return Err(Error::InvalidArgument("law comparison needs trials >= 1".into()));
    }
    let exact = evolve(walk, rho0, n)?
        .pop()
        .expect("evolve returns n + 1 states")
        .site_traces(walk)?;

    let mut observed: BTreeMap<String, u64> = BTreeMap::new();
    for t in 0..trials {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let (sites, _) = run_chain(walk, rho0, n, &mut rng, false)?;
        *observed.entry(sites.last().unwrap().clone()).or_insert(0) += 1;
    }

    let mut cells = Vec::new();
    let mut statistic = 0.0;
    let mut dof = 0usize;
    for (site, p) in &exact {
        let o = observed.get(site).copied().unwrap_or(0);
        cells.push((site.clone(), *p, o));
        let expected = p * trials as f64;
        if expected < 1e-6 {
            // Structurally (or numerically) unreachable cell: a hit would be
            // an outright law violation.
            if o > 0 {
                statistic = f64::INFINITY;
            }
            continue;
        }
        statistic += (o as f64 - expected).powi(2) / expected;
        dof += 1;
    }
    dof = dof.saturating_sub(1);
    let threshold = if dof == 0 {
        0.0
    } else {
        chi_square_quantile(dof as f64, 1.0 - LAW_SIGNIFICANCE)
    };
    // With a single viable cell the statistic is degenerate; the laws agree
    // exactly when no impossible cell was ever hit (infinity flags that).
    let pass = if dof == 0 {
        statistic.is_finite()
    } else {
        statistic <= threshold
    };
    Ok(ComparisonReport {
        n,
        trials,
        cells,
        statistic,
        dof,
        threshold,
        pass,
    })
}

/// Quantile of the chi-square distribution with `k` degrees of freedom, by
/// bisection on the regularized lower incomplete gamma function.
pub fn chi_square_quantile(k: f64, p: f64) -> f64 {
    assert!((0.0..1.0).contains(&p) && k > 0.0);
    let cdf = |x: f64| gamma_p(0.5 * k, 0.5 * x);
    let mut lo = 0.0;
    let mut hi = k + 40.0 * k.sqrt() + 100.0;
    while cdf(hi) < p {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if cdf(mid) < p {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    0.5 * (lo + hi)
}

/// Regularized lower incomplete gamma P(a, x), series + continued fraction.
fn gamma_p(a: f64, x: f64) -> f64 {
    if x <= 0.0 {
        return 0.0;
    }
    if x < a + 1.0 {
        // Series representation.
        let mut ap = a;
        let mut sum = 1.0 / a;
        let mut del = sum;
        for _ in 0..500 {
            ap += 1.0;
            del *= x / ap;
            sum += del;
            if del.abs() < sum.abs() * 1e-15 {
                break;
            }
        }
        sum * (-x + a * x.ln() - ln_gamma(a)).exp()
    } else {
        // Continued fraction for Q(a, x) = 1 - P(a, x).
        let tiny = 1e-300;
        let mut b = x + 1.0 - a;
        let mut cc = 1.0 / tiny;
        let mut d = 1.0 / b;
        let mut h = d;
        for i in 1..500 {
            let an = -(i as f64) * (i as f64 - a);
            b += 2.0;
            d = an * d + b;
            if d.abs() < tiny {
                d = tiny;
            }
            cc = b + an / cc;
            if cc.abs() < tiny {
                cc = tiny;
            }
            d = 1.0 / d;
            let del = d * cc;
            h *= del;
            if (del - 1.0).abs() < 1e-15 {
                break;
            }
        }
        let q = (-x + a * x.ln() - ln_gamma(a)).exp() * h;
        1.0 - q
    }
}

/// Lanczos approximation of ln Gamma.
fn ln_gamma(x: f64) -> f64 {
    const COEF: [f64; 6] = [
        76.18009172947146,
        -86.50532032941677,
        24.01409824083091,
        -1.231739572450155,
        0.1208650973866179e-2,
        -0.5395239384953e-5,
    ];
    let mut y = x;
    let tmp = x + 5.5;
    let tmp = tmp - (x + 0.5) * tmp.ln();
    let mut ser = 1.000000000190015;
    for cj in COEF {
        y += 1.0;
        ser += cj / y;
    }
    -tmp + (2.5066282746310005 * ser / x).ln()
}

/// Average of rho_n (x) |X_n><X_n| over `trials` independent trajectories:
/// an unbiased estimate of the unmeasured evolution at time n.
pub fn trajectory_mean_state(
    walk: &WalkModel,
    rho0: &BlockState,
    n: usize,
    trials: usize,
    seed: u64,
) -> Result<BlockState> {
    let mut acc: BTreeMap<String, CMatrix> = BTreeMap::new();
    for t in 0..trials {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let (sites, states) = run_chain(walk, rho0, n, &mut rng, true)?;
        let site = sites.last().unwrap();
        let rho = states.as_ref().unwrap().last().unwrap();
        acc.entry(site.clone())
            .and_modify(|m| *m = &*m + rho)
            .or_insert_with(|| rho.clone());
    }
    let scale = c(1.0 / trials as f64, 0.0);
    Ok(BlockState {
        blocks: acc.into_iter().map(|(k, m)| (k, m.scale(scale))).collect(),
    })
}
