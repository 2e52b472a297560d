//! JSON configuration format for walks.
//!
//! A walk document looks like:
//!
//! ```json
//! {
//!   "name": "hop",
//!   "sites": [{ "id": "a", "dim": 2 }, { "id": "b", "dim": 2 }],
//!   "edges": [
//!     { "from": "a", "to": "b", "kraus": [[[[1.0, 0.0], [0.0, 0.0]],
//!                                          [[0.0, 0.0], [1.0, 0.0]]]] }
//!   ]
//! }
//! ```
//!
//! Matrices are row-major lists of rows; every complex entry is a `[re, im]`
//! pair. Serialization round-trips: parsing the emitted document reproduces
//! the walk exactly.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::numerics::{c, CMatrix};
use crate::walk::{SiteSpace, TransitionEdge, WalkModel};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct WalkConfig {
    pub name: String,
    pub sites: Vec<SiteConfig>,
    pub edges: Vec<EdgeConfig>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SiteConfig {
    pub id: String,
    pub dim: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EdgeConfig {
    pub from: String,
    pub to: String,
    /// One or more matrices, each a row-major list of rows of [re, im] pairs.
    pub kraus: Vec<Vec<Vec<[f64; 2]>>>,
}

/// Parse a JSON document into a structurally validated walk.
pub fn parse_config(text: &str) -> Result<WalkModel> {
    let cfg: WalkConfig = serde_json::from_str(text)
        .map_err(|e| Error::Config(format!("invalid JSON: {e}")))?;
    config_to_walk(&cfg)
}

/// Convert a parsed configuration, reporting shape problems with edge context.
pub fn config_to_walk(cfg: &WalkConfig) -> Result<WalkModel> {
    let sites: Vec<SiteSpace> = cfg
        .sites
        .iter()
        .map(|s| SiteSpace {
            id: s.id.clone(),
            dim: s.dim,
        })
        .collect();
    let mut edges = Vec::with_capacity(cfg.edges.len());
    for e in &cfg.edges {
        let mut kraus = Vec::with_capacity(e.kraus.len());
        for (k, mat) in e.kraus.iter().enumerate() {
            let rows = mat.len();
            let cols = mat.first().map_or(0, Vec::len);
            if mat.iter().any(|row| row.len() != cols) {
                return Err(Error::Config(format!(
                    "edge {} -> {}: Kraus matrix #{k} is not rectangular",
                    e.from, e.to
                )));
            }
            let mut m = CMatrix::zeros(rows, cols);
            for (i, row) in mat.iter().enumerate() {
                for (j, &[re, im]) in row.iter().enumerate() {
                    m[(i, j)] = c(re, im);
                }
            }
            kraus.push(m);
        }
        edges.push(TransitionEdge {
            from: e.from.clone(),
            to: e.to.clone(),
            kraus,
        });
    }
    WalkModel::new(cfg.name.clone(), sites, edges)
}

/// Serialize a walk back into its configuration form.
pub fn walk_to_config(walk: &WalkModel) -> WalkConfig {
    let sites = walk
        .sites()
        .iter()
        .map(|s| SiteConfig {
            id: s.id.clone(),
            dim: s.dim,
        })
        .collect();
    let edges = walk
        .edges()
        .iter()
        .map(|e| EdgeConfig {
            from: e.from.clone(),
            to: e.to.clone(),
            kraus: e.kraus.iter().map(matrix_to_rows).collect(),
        })
        .collect();
    WalkConfig {
        name: walk.name.clone(),
        sites,
        edges,
    }
}

pub fn matrix_to_rows(m: &CMatrix) -> Vec<Vec<[f64; 2]>> {
    (0..m.rows())
        .map(|i| (0..m.cols()).map(|j| [m[(i, j)].re, m[(i, j)].im]).collect())
        .collect()
}

/// Pretty-printed JSON for a walk.
pub fn walk_to_json(walk: &WalkModel) -> String {
    serde_json::to_string_pretty(&walk_to_config(walk)).expect("config serializes")
}
