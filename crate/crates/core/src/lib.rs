//! Open quantum random walks: definition, validation, channel evolution,
//! spectral classification (invariant states, irreducibility, period),
//! decomposition into irreducible components, and seeded quantum-trajectory
//! sampling.
//!
//! A walk lives on a finite set of sites, each carrying a finite-dimensional
//! internal space; directed edges carry one or more transition (Kraus)
//! operators subject to the total-probability condition
//! `sum_i L_{i,j}* L_{i,j} = Id` at every source site `j`. The induced channel
//! maps block-diagonal density matrices to block-diagonal density matrices;
//! everything this crate computes — invariant states, period, enclosures,
//! communication structure, trajectory statistics — is read off that channel.

pub mod analyze;
pub mod config;
pub mod error;
pub mod numerics;
pub mod registry;
pub mod series;
pub mod spectral;
pub mod trajectory;
pub mod structure;
pub mod walk;

pub use error::{Error, Result};
pub use numerics::{C64, CMatrix, CVector};
pub use walk::{BlockObservable, BlockState, Path, SiteSpace, TransitionEdge, WalkModel};
