//! Stage-one SNP ranking and stage-two interaction scans.

use rayon::prelude::*;

use super::report::{InteractionTest, RankedSnp, ScanReport, ScanSettings, SkippedTest};
use super::{ScanError, Study};
use crate::markov::{builtin_no3way_basis, validate_basis, MarkovBasis};
use crate::sampler::{extended_fisher_test, ChainConfig, SamplerError};
use crate::single_locus::{fisher_exact, genotype_table, MISSING};
use crate::tables::{ContingencyTable, LogLinearModel, TableError, TableShape};

#[derive(Debug, Clone, PartialEq)]
pub struct ScanConfig {
    /// Number of top-ranked SNPs carried into stage two.
    pub k: usize,
    pub chain: ChainConfig,
    /// Level for the `significant` column, applied to Bonferroni-adjusted p.
    pub alpha: f64,
}

impl Default for ScanConfig {
    fn default() -> Self {
        ScanConfig { k: 10, chain: ChainConfig::default(), alpha: 0.05 }
    }
}

/// Fisher exact p-value of every SNP, ascending, ties broken by SNP index.
pub fn rank_snps(study: &Study) -> Vec<RankedSnp> {
    let mut ranked: Vec<(usize, f64)> = (0..study.n_snps())
        .into_par_iter()
        .map(|j| {
            let table = genotype_table(study.snp(j), study.phenotypes()).expect("study codes validated on construction");
            (j, fisher_exact(&table))
        })
        .collect();
    ranked.sort_by(|a, b| a.1.total_cmp(&b.1).then(a.0.cmp(&b.0)));
    ranked
        .into_iter()
        .enumerate()
        .map(|(r, (snp, p_value))| RankedSnp { snp, id: study.snp_id(snp).to_string(), p_value, rank: r + 1 })
        .collect()
}

/// Phenotype × genotype table over the given SNPs (axes in the given order,
/// phenotype last). Individuals missing any of the SNPs are dropped.
pub fn interaction_table(study: &Study, snps: &[usize]) -> Result<ContingencyTable, TableError> {
    let shape = TableShape::snp_set(snps.len())?;
    let strides = shape.strides();
    let d_stride = strides[snps.len()];
    let mut table = ContingencyTable::zeros(shape);
    let columns: Vec<&[u8]> = snps.iter().map(|&j| study.snp(j)).collect();
    let counts = table.counts_mut();
    'individual: for (i, &d) in study.phenotypes().iter().enumerate() {
        let mut cell = d as usize * d_stride;
        for (col, &stride) in columns.iter().zip(&strides) {
            let g = col[i];
            if g == MISSING {
                continue 'individual;
            }
            cell += g as usize * stride;
        }
        counts[cell] += 1;
    }
    Ok(table)
}

/// Reason a table carries no information about interaction, if any.
fn degeneracy(table: &ContingencyTable, ids: &[String]) -> Option<String> {
    let rank = table.shape().rank();
    if table.total() == 0 {
        return Some("no individual has all genotypes called".into());
    }
    for axis in 0..rank {
        let size = table.shape().axis_sizes()[axis];
        let mut sums = vec![0u64; size];
        for (cell, &n) in table.counts().iter().enumerate() {
            sums[table.shape().coords(cell)[axis]] += n;
        }
        if sums.iter().filter(|&&s| s > 0).count() < 2 {
            return Some(if axis + 1 == rank {
                "phenotype is constant among complete individuals".into()
            } else {
                format!("{} is monomorphic among complete individuals", ids[axis])
            });
        }
    }
    None
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e37_79b9_7f4a_7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    x ^ (x >> 31)
}

/// Seed for the `index`-th tested combination, derived from the master seed.
pub fn combination_seed(master: u64, index: usize) -> u64 {
    splitmix64(master ^ splitmix64(index as u64))
}

/// All `r`-subsets of `items`, lexicographic in position.
fn combinations(items: &[usize], r: usize) -> Vec<Vec<usize>> {
    let n = items.len();
    if r > n {
        return Vec::new();
    }
    let mut out = Vec::new();
    let mut idx: Vec<usize> = (0..r).collect();
    loop {
        out.push(idx.iter().map(|&i| items[i]).collect());
        let Some(pos) = (0..r).rev().find(|&p| idx[p] != p + n - r) else {
            return out;
        };
        idx[pos] += 1;
        for q in pos + 1..r {
            idx[q] = idx[q - 1] + 1;
        }
    }
}

pub fn binomial(n: usize, r: usize) -> u64 {
    if r > n {
        return 0;
    }
    let r = r.min(n - r);
    (0..r).fold(1u64, |acc, i| acc * (n - i) as u64 / (i + 1) as u64)
}

enum Outcome {
    Tested(InteractionTest),
    Skipped(SkippedTest),
}

fn test_combination(
    study: &Study,
    snps: Vec<usize>,
    basis: &MarkovBasis,
    chain: &ChainConfig,
) -> Result<Outcome, ScanError> {
    let ids: Vec<String> = snps.iter().map(|&j| study.snp_id(j).to_string()).collect();
    let table = interaction_table(study, &snps)?;
    if let Some(reason) = degeneracy(&table, &ids) {
        return Ok(Outcome::Skipped(SkippedTest { snps, ids, reason }));
    }
    match extended_fisher_test(&table, basis, chain) {
        Ok(res) => Ok(Outcome::Tested(InteractionTest {
            snps,
            ids,
            p_value: res.p_value,
            n_samples: res.n_samples,
            tail_count: res.tail_count,
            observed_chi2: res.observed_chi2,
            r_hat: res.diagnostics.r_hat(),
            acceptance_rate: res.diagnostics.acceptance_rate,
            total: table.total(),
        })),
        Err(SamplerError::Table(TableError::IpfNotConverged { iterations, max_deviation })) => {
            Ok(Outcome::Skipped(SkippedTest {
                snps,
                ids,
                reason: format!("expected counts did not converge ({iterations} iterations, deviation {max_deviation:e})"),
            }))
        }
        Err(e) => Err(e.into()),
    }
}

fn scan(study: &Study, basis: &MarkovBasis, arity: usize, config: &ScanConfig) -> Result<ScanReport, ScanError> {
    config.chain.validate()?;
    if config.k < arity {
        return Err(ScanError::InvalidConfig(format!("k = {} is below the combination size {arity}", config.k)));
    }
    if study.n_snps() < arity {
        return Err(ScanError::InvalidConfig(format!("study has {} SNPs, need at least {arity}", study.n_snps())));
    }
    if !(config.alpha > 0.0 && config.alpha < 1.0) {
        return Err(ScanError::InvalidConfig(format!("alpha {} outside (0, 1)", config.alpha)));
    }
    let stage1 = rank_snps(study);
    let k = config.k.min(study.n_snps());
    let mut selected: Vec<usize> = stage1[..k].iter().map(|r| r.snp).collect();
    selected.sort_unstable();

    let outcomes: Vec<Outcome> = combinations(&selected, arity)
        .into_par_iter()
        .enumerate()
        .map(|(index, snps)| {
            let chain = ChainConfig { seed: combination_seed(config.chain.seed, index), ..config.chain.clone() };
            test_combination(study, snps, basis, &chain)
        })
        .collect::<Result<_, _>>()?;

    let mut tests = Vec::new();
    let mut skipped = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Tested(t) => tests.push(t),
            Outcome::Skipped(s) => skipped.push(s),
        }
    }
    let settings = ScanSettings {
        n_individuals: study.n_individuals(),
        n_snps: study.n_snps(),
        k,
        arity,
        n_chains: config.chain.n_chains,
        iterations: config.chain.iterations,
        burn_in: config.chain.burn_in,
        thinning: config.chain.thinning,
        seed: config.chain.seed,
        alpha: config.alpha,
        model: basis.model().describe(),
    };
    Ok(ScanReport { settings, stage1, tests, skipped })
}

/// Ranks all SNPs, then tests every pair among the top `config.k` for a
/// three-way interaction with the phenotype using the built-in basis.
pub fn pairwise_scan(study: &Study, config: &ScanConfig) -> Result<ScanReport, ScanError> {
    scan(study, &builtin_no3way_basis(), 2, config)
}

/// Ranks all SNPs, then tests every triplet among the top `config.k` for a
/// four-way interaction. `basis` must be a Markov basis of the model fixing
/// all three-variable margins of 3×3×3×2 tables.
pub fn triplet_scan(study: &Study, basis: &MarkovBasis, config: &ScanConfig) -> Result<ScanReport, ScanError> {
    let expected = LogLinearModel::no_highest_interaction(TableShape::snp_set(3)?);
    let mut want: Vec<Vec<usize>> = expected.facets().to_vec();
    let mut have: Vec<Vec<usize>> = basis.model().facets().to_vec();
    want.sort();
    have.sort();
    if basis.shape() != expected.shape() || want != have {
        return Err(ScanError::Basis(format!(
            "triplet scans need a basis for {} on 3x3x3x2 tables, got {} on {:?}",
            expected.describe(),
            basis.model().describe(),
            basis.shape().axis_sizes()
        )));
    }
    let report = validate_basis(basis);
    if let Some(bad) = report.failures().next() {
        return Err(ScanError::Basis(format!("basis is invalid: {}", bad.to_error())));
    }
    if basis.is_empty() {
        return Err(ScanError::Basis("basis has no moves".into()));
    }
    scan(study, basis, 3, config)
}

/// Stage one alone, as a report without interaction tests.
pub fn filter_report(study: &Study) -> ScanReport {
    let settings = ScanSettings {
        n_individuals: study.n_individuals(),
        n_snps: study.n_snps(),
        k: 0,
        arity: 0,
        n_chains: 0,
        iterations: 0,
        burn_in: 0,
        thinning: 0,
        seed: 0,
        alpha: 0.0,
        model: String::new(),
    };
    ScanReport { settings, stage1: rank_snps(study), tests: Vec::new(), skipped: Vec::new() }
}
