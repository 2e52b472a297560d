//! One-shot classification report for a walk.

use std::fmt;

use serde::Serialize;

use crate::config::matrix_to_rows;
use crate::error::{Error, Result};
use crate::numerics::{CVector, DEFAULT_RANK_TOL};
use crate::registry;
use crate::spectral::{
    self, default_loop_horizon, invariant_states, loop_gcd, PERIPHERAL_TOL,
};
use crate::structure::{minimal_enclosures, Decomposition};
use crate::walk::{WalkModel, VALIDATE_TOL};

/// Tolerances and the seed driving the deterministic parts of the analysis.
#[derive(Debug, Clone)]
pub struct AnalyzeOptions {
    /// Absolute tolerance on the stochasticity deviation.
    pub validate_tol: f64,
    /// Tolerance on ||lambda| - 1| for the peripheral spectrum.
    pub peripheral_tol: f64,
    /// Threshold on loop overlaps in the GCD diagnostic.
    pub loop_tol: f64,
    /// Seed for the decomposition's random splitting.
    pub seed: u64,
}

impl Default for AnalyzeOptions {
    fn default() -> Self {
        AnalyzeOptions {
            validate_tol: VALIDATE_TOL,
            peripheral_tol: PERIPHERAL_TOL,
            loop_tol: 1e-8,
            seed: 1,
        }
    }
}

/// One serialized block operator: (site, row-major rows of [re, im]) pairs.
pub type SerializedBlocks = Vec<(String, Vec<Vec<[f64; 2]>>)>;

#[derive(Debug, Clone, Serialize)]
pub struct AnalysisReport {
    pub walk: String,
    pub stochastic_ok: bool,
    pub worst_site: String,
    pub worst_deviation: f64,
    pub irreducible: bool,
    /// Present only for irreducible walks.
    pub period: Option<usize>,
    pub fixed_space_dim: usize,
    /// Trace-one PSD fixed states spanning the invariant states; each block
    /// serialized as row-major [re, im] entries.
    pub invariant_states: Vec<SerializedBlocks>,
    pub decomposition: DecompositionSummary,
    pub diagnostics: Diagnostics,
}

#[derive(Debug, Clone, Serialize)]
pub struct DecompositionSummary {
    pub transient_dim: usize,
    pub singleton_dims: Vec<usize>,
    pub families: Vec<FamilySummary>,
}

#[derive(Debug, Clone, Serialize)]
pub struct FamilySummary {
    pub member_dims: Vec<usize>,
    pub has_isometry: bool,
}

#[derive(Debug, Clone, Serialize)]
pub struct Diagnostics {
    /// Loop-length GCD per site for the first basis vector.
    pub loop_gcd_samples: Vec<LoopGcdSample>,
    /// Path-count necessary condition for n-regularity at n = site count:
    /// card P_n(i, j) >= dim h_j for all pairs.
    pub path_counts: PathCountDiagnostic,
}

#[derive(Debug, Clone, Serialize)]
pub struct LoopGcdSample {
    pub site: String,
    pub vector: String,
    pub gcd: usize,
}

#[derive(Debug, Clone, Serialize)]
pub struct PathCountDiagnostic {
    pub steps: usize,
    pub min_count: u64,
    pub necessary_condition_met: bool,
}

/// Run the full classification pipeline on a validated walk.
pub fn analyze(walk: &WalkModel, opts: &AnalyzeOptions) -> Result<AnalysisReport> {
    let report = walk.validate(opts.validate_tol)?;
    let (worst_site, worst_deviation) = report
        .worst()
        .cloned()
        .unwrap_or_else(|| (String::new(), 0.0));
    if !report.ok {
        return Err(Error::Stochasticity {
            site: worst_site,
            deviation: worst_deviation,
            tol: opts.validate_tol,
        });
    }

    let (fixed_basis, states) = invariant_states(walk, DEFAULT_RANK_TOL)?;
    let irreducible = spectral::is_irreducible(walk)?;
    let period = if irreducible {
        Some(spectral::period(walk, opts.peripheral_tol)?.period)
    } else {
        None
    };

    let dec = minimal_enclosures(walk, opts.seed)?;
    let decomposition = summarize(&dec);

    let mut loop_samples = Vec::new();
    let horizon = default_loop_horizon(walk);
    for s in walk.sites() {
        let x = CVector::basis(s.dim, 0);
        let gcd = loop_gcd(walk, &s.id, &x, horizon, opts.loop_tol)?;
        loop_samples.push(LoopGcdSample {
            site: s.id.clone(),
            vector: "e0".into(),
            gcd,
        });
    }

    let path_counts = path_count_diagnostic(walk);

    let invariant_states_ser = states
        .iter()
        .map(|st| {
            st.blocks
                .iter()
                .map(|(site, m)| (site.clone(), matrix_to_rows(m)))
                .collect()
        })
        .collect();

    Ok(AnalysisReport {
        walk: walk.name.clone(),
        stochastic_ok: report.ok,
        worst_site,
        worst_deviation,
        irreducible,
        period,
        fixed_space_dim: fixed_basis.len(),
        invariant_states: invariant_states_ser,
        decomposition,
        diagnostics: Diagnostics {
            loop_gcd_samples: loop_samples,
            path_counts,
        },
    })
}

fn summarize(dec: &Decomposition) -> DecompositionSummary {
    DecompositionSummary {
        transient_dim: dec.transient.total_dim(),
        singleton_dims: dec.singletons.iter().map(|e| e.total_dim()).collect(),
        families: dec
            .families
            .iter()
            .map(|f| FamilySummary {
                member_dims: f.members.iter().map(|m| m.total_dim()).collect(),
                has_isometry: !f.isometries.is_empty(),
            })
            .collect(),
    }
}

/// Count paths of length `site_count` between every ordered pair on the edge
/// graph and compare with the target dimensions (necessary condition for
/// n-regularity).
fn path_count_diagnostic(walk: &WalkModel) -> PathCountDiagnostic {
    let n = walk.site_count();
    let ids: Vec<&str> = walk.sites().iter().map(|s| s.id.as_str()).collect();
    let mut adj = vec![vec![0u64; n]; n];
    for (j, &from) in ids.iter().enumerate() {
        for (i, &to) in ids.iter().enumerate() {
            if walk.edge(from, to).is_some() {
                adj[j][i] = 1;
            }
        }
    }
    let mut count = adj.clone();
    for _ in 1..n {
        let mut next = vec![vec![0u64; n]; n];
        for a in 0..n {
            for b in 0..n {
                if count[a][b] == 0 {
                    continue;
                }
                for cc in 0..n {
                    next[a][cc] = next[a][cc].saturating_add(count[a][b] * adj[b][cc]);
                }
            }
        }
        count = next;
    }
    let mut min_count = u64::MAX;
    let mut met = true;
    for a in 0..n {
        for b in 0..n {
            min_count = min_count.min(count[a][b]);
            if (count[a][b] as usize) < walk.sites()[b].dim {
                met = false;
            }
        }
    }
    PathCountDiagnostic {
        steps: n,
        min_count: if min_count == u64::MAX { 0 } else { min_count },
        necessary_condition_met: met,
    }
}

impl fmt::Display for AnalysisReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "walk:             {}", self.walk)?;
        writeln!(
            f,
            "stochasticity:    ok (worst deviation {:.3e} at site `{}`)",
            self.worst_deviation, self.worst_site
        )?;
        writeln!(f, "irreducible:      {}", self.irreducible)?;
        match self.period {
            Some(d) => writeln!(f, "period:           {d}")?,
            None => writeln!(f, "period:           n/a (reducible)")?,
        }
        writeln!(f, "fixed space dim:  {}", self.fixed_space_dim)?;
        writeln!(f, "invariant states: {}", self.invariant_states.len())?;
        let d = &self.decomposition;
        writeln!(f, "transient dim:    {}", d.transient_dim)?;
        writeln!(
            f,
            "singleton classes: {:?}",
            d.singleton_dims
        )?;
        for (i, fam) in d.families.iter().enumerate() {
            writeln!(
                f,
                "family {i}:         members {:?}, isometry {}",
                fam.member_dims, fam.has_isometry
            )?;
        }
        writeln!(f, "loop GCD samples:")?;
        for s in &self.diagnostics.loop_gcd_samples {
            writeln!(f, "  site {:<6} {}: {}", s.site, s.vector, s.gcd)?;
        }
        let pc = &self.diagnostics.path_counts;
        write!(
            f,
            "path counts ({} steps): min {}, n-regularity necessary condition {}",
            pc.steps,
            pc.min_count,
            if pc.necessary_condition_met { "met" } else { "violated" }
        )
    }
}

/// Load a walk from a `builtin:NAME` reference or a JSON file path.
pub fn load_walk_source(source: &str) -> Result<WalkModel> {
    if let Some(name) = source.strip_prefix("builtin:") {
        return registry::builtin(name);
    }
    let text = std::fs::read_to_string(source)?;
    crate::config::parse_config(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn m4_report_matches_expectations() {
        let walk = registry::builtin("m4").unwrap();
        let rep = analyze(&walk, &AnalyzeOptions::default()).unwrap();
        assert!(rep.irreducible);
        assert_eq!(rep.period, Some(2));
        assert_eq!(rep.fixed_space_dim, 1);
        assert_eq!(rep.decomposition.transient_dim, 0);
        assert_eq!(rep.decomposition.singleton_dims, vec![8]);
    }

    #[test]
    fn ex_9_6_report() {
        let walk = registry::builtin("ex-9.6").unwrap();
        let rep = analyze(&walk, &AnalyzeOptions::default()).unwrap();
        assert!(!rep.irreducible);
        assert_eq!(rep.period, None);
        assert_eq!(rep.fixed_space_dim, 4);
        assert_eq!(rep.decomposition.families.len(), 1);
        let fam = &rep.decomposition.families[0];
        assert_eq!(fam.member_dims, vec![2, 2]);
        assert!(fam.has_isometry);
    }

    #[test]
    fn ex_9_2_report() {
        let walk = registry::builtin("ex-9.2").unwrap();
        let rep = analyze(&walk, &AnalyzeOptions::default()).unwrap();
        assert!(!rep.irreducible);
        assert_eq!(rep.decomposition.transient_dim, 3);
        assert_eq!(rep.decomposition.singleton_dims, vec![1]);
    }

    #[test]
    fn failing_stochasticity_is_an_error() {
        let walk = registry::builtin("m3").unwrap();
        let mut edges = walk.edges().to_vec();
        for e in &mut edges {
            for m in &mut e.kraus {
                *m = m.scale(crate::numerics::c(0.9, 0.0));
            }
        }
        let bad = WalkModel::new("bad", walk.sites().to_vec(), edges).unwrap();
        let err = analyze(&bad, &AnalyzeOptions::default()).unwrap_err();
        assert!(matches!(err, Error::Stochasticity { .. }));
    }

    #[test]
    fn report_is_json_serializable() {
        let walk = registry::builtin("m3").unwrap();
        let rep = analyze(&walk, &AnalyzeOptions::default()).unwrap();
        let text = serde_json::to_string_pretty(&rep).unwrap();
        assert!(text.contains("\"irreducible\": true"));
        assert!(text.contains("\"period\": 1"));
    }

    #[test]
    fn loads_builtin_and_file_sources() {
        let walk = load_walk_source("builtin:m3").unwrap();
        assert_eq!(walk.name, "m3");
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("walk.json");
        std::fs::write(&path, crate::config::walk_to_json(&walk)).unwrap();
        let back = load_walk_source(path.to_str().unwrap()).unwrap();
        assert_eq!(back.name, "m3");
        assert!(load_walk_source("builtin:nope").is_err());
        assert!(load_walk_source("/no/such/file.json").is_err());
    }
}
