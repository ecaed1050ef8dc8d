//! Two-stage genome scan: Fisher-filter every SNP, then test combinations of
//! the top-ranked SNPs for interaction with the extended exact test.
//!
//! Individuals missing a genotype are dropped per combination (pairwise
//! deletion). Every combination gets its own chain seed derived from the
//! master seed and its position in the scan, so reports do not depend on
//! thread scheduling.

mod report;
mod scan;
mod study;

use thiserror::Error;

pub use report::{
    format_p, format_sig, load_report, parse_report, write_report, InteractionTest, RankedSnp, ScanReport,
    ScanSettings, SkippedTest,
};
pub use scan::{
    binomial, combination_seed, filter_report, interaction_table, pairwise_scan, rank_snps, triplet_scan, ScanConfig,
};
pub use study::{default_snp_id, load_study, parse_study, write_study, Study, StudyError};

use crate::sampler::SamplerError;
use crate::tables::TableError;

#[derive(Debug, Error)]
pub enum ScanError {
    #[error(transparent)]
    Study(#[from] StudyError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("invalid scan configuration: {0}")]
    InvalidConfig(String),
    #[error("{0}")]
    Basis(String),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("report line {line}: {message}")]
    Report { line: usize, message: String },
}
