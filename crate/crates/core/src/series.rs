//! CSV emission for evolution and sampling runs.
//!
//! All modes write `site_probs.csv` (step, site, probability) and
//! `blocks.csv` (step, site, row, col, re, im); sample mode additionally
//! writes `trajectory.csv` (step, site) for the first trajectory and
//! `conditional_avg.csv` (site, row, col, re, im) aggregated over all
//! trajectories. Numbers carry 17 significant digits so the files
//! round-trip to the exact doubles.

use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};

use rand::SeedableRng;
use rand_chacha::ChaCha12Rng;

use crate::error::{Error, Result};
use crate::numerics::c;
use crate::spectral::evolve;
use crate::trajectory::{occupation_stats, TrajectorySample};
use crate::walk::{BlockState, WalkModel};

/// What to evolve and record.
#[derive(Debug, Clone)]
pub enum SeriesMode {
    /// Iterated channel states M^k(rho).
    Direct,
    /// Running Cesaro averages (1/(k+1)) sum_{j<=k} M^j(rho).
    Cesaro,
    /// Monte Carlo: empirical per-step statistics over sampled trajectories.
    Sample { trajectories: usize, seed: u64 },
}

fn fmt_f(x: f64) -> String {
    format!("{x:.16e}")
}

/// Write the series files into `out_dir`; returns the created paths.
pub fn emit_series(
    walk: &WalkModel,
    rho0: &BlockState,
    n: usize,
    mode: &SeriesMode,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    fs::create_dir_all(out_dir)?;
    match mode {
        SeriesMode::Direct => {
            let states = evolve(walk, rho0, n)?;
            emit_states(walk, &states, out_dir)
        }
        SeriesMode::Cesaro => {
            let states = evolve(walk, rho0, n)?;
            let mut running = Vec::with_capacity(states.len());
            let mut acc = BlockState::zero();
            for (k, st) in states.iter().enumerate() {
                acc = acc.add(st);
                running.push(acc.scale(c(1.0 / (k + 1) as f64, 0.0)));
            }
            emit_states(walk, &running, out_dir)
        }
        SeriesMode::Sample { trajectories, seed } => {
            emit_sampled(walk, rho0, n, *trajectories, *seed, out_dir)
        }
    }
}

fn emit_states(walk: &WalkModel, states: &[BlockState], out_dir: &Path) -> Result<Vec<PathBuf>> {
    let mut probs = String::from("step,site,probability\n");
    let mut blocks = String::from("step,site,row,col,re,im\n");
    for (k, st) in states.iter().enumerate() {
        let traces = st.site_traces(walk)?;
        let total: f64 = traces.iter().map(|(_, p)| p).sum();
        if (total - 1.0).abs() > 1e-10 {
            return Err(Error::Degenerate(format!(
                "site probabilities sum to {total} at step {k}"
            )));
        }
        for (site, p) in &traces {
            let _ = writeln!(probs, "{k},{site},{}", fmt_f(*p));
        }
        for s in walk.sites() {
            let b = st.block_or_zero(walk, &s.id)?;
            for r in 0..s.dim {
                for cc in 0..s.dim {
                    let z = b[(r, cc)];
                    let _ = writeln!(
                        blocks,
                        "{k},{},{r},{cc},{},{}",
                        s.id,
                        fmt_f(z.re),
                        fmt_f(z.im)
                    );
                }
            }
        }
    }
    let p1 = out_dir.join("site_probs.csv");
    let p2 = out_dir.join("blocks.csv");
    fs::write(&p1, probs)?;
    fs::write(&p2, blocks)?;
    Ok(vec![p1, p2])
}

fn emit_sampled(
    walk: &WalkModel,
    rho0: &BlockState,
    n: usize,
    trajectories: usize,
    seed: u64,
    out_dir: &Path,
) -> Result<Vec<PathBuf>> {
    if trajectories == 0 {
        return Err(Error::InvalidArgument("sample mode needs trajectories >= 1".into()));
    }
    // Per-step Monte Carlo averages of rho_k (x) |X_k><X_k| across
    // trajectories (an unbiased estimate of the channel power), plus the
    // pooled conditional state averages.
    let mut mean_per_step: Vec<BlockState> = vec![BlockState::zero(); n + 1];
    let mut pooled: Option<TrajectorySample> = None;
    let mut pooled_sites: Vec<String> = Vec::new();
    let mut pooled_states = Vec::new();
    for t in 0..trajectories {
        let mut rng = ChaCha12Rng::seed_from_u64(seed);
        rng.set_stream(t as u64);
        let sample = crate::trajectory::sample_trajectory_from(walk, rho0, n, &mut rng)?;
        let states = sample.states.as_ref().expect("states recorded");
        for (k, (site, rho)) in sample.sites.iter().zip(states).enumerate() {
            let entry = mean_per_step[k]
                .blocks
                .entry(site.clone())
                .or_insert_with(|| crate::numerics::CMatrix::zeros(rho.rows(), rho.cols()));
            *entry = &*entry + rho;
        }
        pooled_sites.extend(sample.sites.iter().cloned());
        pooled_states.extend(states.iter().cloned());
        if t == 0 {
            pooled = Some(sample);
        }
    }
    let first = pooled.expect("at least one trajectory");
    let weight = c(1.0 / trajectories as f64, 0.0);
    let mean_per_step: Vec<BlockState> =
        mean_per_step.into_iter().map(|st| st.scale(weight)).collect();

    let mut files = emit_states(walk, &mean_per_step, out_dir)?;

    let mut traj = String::from("step,site\n");
    for (k, site) in first.sites.iter().enumerate() {
        let _ = writeln!(traj, "{k},{site}");
    }
    let p3 = out_dir.join("trajectory.csv");
    fs::write(&p3, traj)?;
    files.push(p3);

    let pooled_sample = TrajectorySample {
        seed,
        sites: pooled_sites,
        states: Some(pooled_states),
    };
    let stats = occupation_stats(&pooled_sample)?;
    let mut cond = String::from("site,row,col,re,im\n");
    for (site, m) in &stats.conditional_avg {
        for r in 0..m.rows() {
            for cc in 0..m.cols() {
                let z = m[(r, cc)];
                let _ = writeln!(cond, "{site},{r},{cc},{},{}", fmt_f(z.re), fmt_f(z.im));
            }
        }
    }
    let p4 = out_dir.join("conditional_avg.csv");
    fs::write(&p4, cond)?;
    files.push(p4);
    Ok(files)
}
