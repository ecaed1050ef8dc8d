//! Two-stage epistasis detection for case-control genotype data.
//!
//! Stage one ranks SNPs by a single-locus Fisher exact test. Stage two tests
//! every pair (or triplet) of the top-ranked SNPs for a higher-order
//! interaction with the phenotype, using a Metropolis-Hastings walk over the
//! fiber of contingency tables that share the null model's sufficient
//! statistics. The walk's moves come from a Markov basis.
//!
//! Modules:
//!
//! - [`tables`]: contingency tables, margins, expected counts (closed form and
//!   iterative proportional fitting), the χ² statistic and a brute-force fiber
//!   enumerator.
//! - [`markov`]: Markov moves and bases, including the built-in 15-move basis
//!   of the no-3-way interaction model on 3×3×2 tables.
//! - [`sampler`]: the fiber walk, the MCMC exact test and chain diagnostics.
//! - [`single_locus`]: the stage-one Fisher exact test on 2×3 tables.
//! - [`models`]: control/additive/multiplicative interaction models, parameter
//!   solving and the case-control simulator.
//! - [`pipeline`]: studies, the two-stage scan, and TSV reports.

pub mod lnfact;
pub mod markov;
pub mod models;
pub mod pipeline;
pub mod sampler;
pub mod single_locus;
pub mod tables;

pub use markov::{apply_move, builtin_no3way_basis, load_basis, validate_basis, MarkovBasis, MarkovMove, Sign};
pub use models::{InteractionModel, ModelKind, PopulationSpec};
pub use pipeline::{pairwise_scan, rank_snps, triplet_scan, ScanConfig, ScanReport, Study};
pub use sampler::{extended_fisher_test, ChainConfig, ExactTestResult};
pub use single_locus::{fisher_exact, GenotypeTable};
pub use tables::{ContingencyTable, LogLinearModel, MarginSet, RealTable, TableShape};
