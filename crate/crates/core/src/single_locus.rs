//! Stage one: single-locus Fisher exact test on phenotype × genotype tables.

use thiserror::Error;

use crate::lnfact::LnFactorial;

/// Genotype code for a missing call.
pub const MISSING: u8 = 3;

/// Relative tolerance under which a table's probability counts as tied with
/// the observed one.
pub const TIE_TOLERANCE: f64 = 1e-7;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum SingleLocusError {
    #[error("genotype and phenotype vectors differ in length ({genotypes} vs {phenotypes})")]
    LengthMismatch { genotypes: usize, phenotypes: usize },
    #[error("no individuals")]
    Empty,
    #[error("individual {index}: genotype code {code} is not 0, 1, 2 or 3 (missing)")]
    BadGenotype { index: usize, code: u8 },
    #[error("individual {index}: phenotype {code} is not 0 or 1")]
    BadPhenotype { index: usize, code: u8 },
}

/// 2×3 counts: rows are phenotype 0/1, columns genotype 0/1/2.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub struct GenotypeTable {
    pub counts: [[u64; 3]; 2],
}

impl GenotypeTable {
    pub fn new(counts: [[u64; 3]; 2]) -> Self {
        GenotypeTable { counts }
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().flatten().sum()
    }

    pub fn row_sums(&self) -> [u64; 2] {
        [self.counts[0].iter().sum(), self.counts[1].iter().sum()]
    }

    pub fn col_sums(&self) -> [u64; 3] {
        [0, 1, 2].map(|j| self.counts[0][j] + self.counts[1][j])
    }
}

/// Cross-tabulates phenotypes against genotypes, dropping missing calls.
pub fn genotype_table(genotypes: &[u8], phenotypes: &[u8]) -> Result<GenotypeTable, SingleLocusError> {
    if genotypes.len() != phenotypes.len() {
        return Err(SingleLocusError::LengthMismatch { genotypes: genotypes.len(), phenotypes: phenotypes.len() });
    }
    if genotypes.is_empty() {
        return Err(SingleLocusError::Empty);
    }
    let mut t = GenotypeTable::default();
    for (index, (&g, &d)) in genotypes.iter().zip(phenotypes).enumerate() {
        if d > 1 {
            return Err(SingleLocusError::BadPhenotype { index, code: d });
        }
        match g {
            0..=2 => t.counts[d as usize][g as usize] += 1,
            MISSING => {}
            code => return Err(SingleLocusError::BadGenotype { index, code }),
        }
    }
    Ok(t)
}

/// Two-sided Fisher exact p-value: the total probability of all tables with
/// the observed margins that are no more likely than the observed table.
///
/// Tables without two nonempty rows and two nonempty columns carry no
/// evidence and get p = 1.
pub fn fisher_exact(table: &GenotypeTable) -> f64 {
    let rows = table.row_sums();
    let cols = table.col_sums();
    if rows.contains(&0) || cols.iter().filter(|&&c| c > 0).count() < 2 {
        return 1.0;
    }
    let n = table.total();
    let lf = LnFactorial::new(n);
    let log_const = lf.get(rows[0]) + lf.get(rows[1]) + cols.iter().map(|&c| lf.get(c)).sum::<f64>() - lf.get(n);
    // Row 1 of any table is determined by row 0 and the column sums.
    let log_p = |a: u64, b: u64, c: u64| -> f64 {
        log_const
            - lf.get(a)
            - lf.get(b)
            - lf.get(c)
            - lf.get(cols[0] - a)
            - lf.get(cols[1] - b)
            - lf.get(cols[2] - c)
    };
    let obs = table.counts[0];
    let log_obs = log_p(obs[0], obs[1], obs[2]);
    let threshold = log_obs + TIE_TOLERANCE.ln_1p();

    let r0 = rows[0];
    let mut p = 0.0;
    let a_lo = r0.saturating_sub(cols[1] + cols[2]);
    let a_hi = cols[0].min(r0);
    for a in a_lo..=a_hi {
        let rest = r0 - a;
        let b_lo = rest.saturating_sub(cols[2]);
        let b_hi = cols[1].min(rest);
        for b in b_lo..=b_hi {
            let lp = log_p(a, b, rest - b);
            if lp <= threshold {
                p += lp.exp();
            }
        }
    }
    p.min(1.0)
}

/// Fisher exact p-value for one SNP.
pub fn snp_p_value(genotypes: &[u8], phenotypes: &[u8]) -> Result<f64, SingleLocusError> {
    Ok(fisher_exact(&genotype_table(genotypes, phenotypes)?))
}
