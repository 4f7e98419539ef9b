//! Monte Carlo and quadrature toolkit for the maximum, over all 2×2 principal
//! minors, of the largest minor eigenvalue — for deformed GOE matrices
//! (independent N(0,1) off-diagonals, N(0,ξ) diagonals) and Wishart matrices
//! XᵀX with unit-variance entries.
//!
//! The crate has three layers:
//!
//! * [`ensembles`] and [`stats`] draw reproducible replicates and reduce each
//!   to the pair-maximum statistic, normalized by the constants in [`laws`].
//! * [`laws`] evaluates the limiting distributions: Gumbel for ξ ∈ [0, 2] and
//!   the heavier one-parameter family G(·; η), η = (2+√ξ)/(ξ+√ξ), above.
//! * [`kernels`] re-derives the limit numerically: deterministic quadrature
//!   of the pair-exceedance kernels at astronomically large p, compared
//!   against every closed-form prediction used on the way to the theorem.
//!
//! [`experiments`] wires the sampling side to goodness-of-fit reports.

pub mod ensembles;
pub mod error;
pub mod experiments;
pub mod kernels;
pub mod laws;
pub mod special;
pub mod stats;

pub use ensembles::{EnsembleSpec, EntryDistribution, SeedSpec};
pub use error::{Error, Result};
pub use experiments::{ks_distance, run_mc, write_report, ExperimentConfig, GofReport, ReplicateStat};
pub use laws::{law_for, norm_constants, LimitLaw, NormConstants};
pub use special::QuadratureSpec;
pub use stats::{diag_max, goe_pair_max, top_eig_2x2, wishart_pair_max, PairMaxResult};
