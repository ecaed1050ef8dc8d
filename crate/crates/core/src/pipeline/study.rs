//! Genotype/phenotype studies and their text file format.
//!
//! ```text
//! #individuals <n> #snps <m>
//! #ids <id_1> … <id_m>          (optional)
//! <phenotype 0|1> <code_1> … <code_m>
//! …
//! ```
//!
//! Genotype codes count minor alleles (0, 1, 2); 3 marks a missing call.
//! Without an `#ids` line SNPs are named `snp1 … snpm`.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::single_locus::MISSING;

#[derive(Debug, Error)]
pub enum StudyError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Malformed { line: usize, message: String },
    #[error("inconsistent study: {0}")]
    Inconsistent(String),
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Study {
    phenotypes: Vec<u8>,
    /// SNP-major: `genotypes[snp * n_individuals + individual]`.
    genotypes: Vec<u8>,
    snp_ids: Vec<String>,
}

pub fn default_snp_id(index: usize) -> String {
    format!("snp{}", index + 1)
}

impl Study {
    /// Builds a study from per-SNP genotype columns.
    pub fn new(phenotypes: Vec<u8>, columns: Vec<Vec<u8>>, snp_ids: Option<Vec<String>>) -> Result<Self, StudyError> {
        let n = phenotypes.len();
        if let Some((i, &d)) = phenotypes.iter().enumerate().find(|(_, &d)| d > 1) {
            return Err(StudyError::Inconsistent(format!("individual {} has phenotype {d}", i + 1)));
        }
        if !phenotypes.contains(&1) || !phenotypes.contains(&0) {
            return Err(StudyError::Inconsistent("need at least one case and one control".into()));
        }
        if columns.is_empty() {
            return Err(StudyError::Inconsistent("no SNPs".into()));
        }
        let mut genotypes = Vec::with_capacity(n * columns.len());
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(StudyError::Inconsistent(format!(
                    "SNP {} has {} genotypes for {n} individuals",
                    j + 1,
                    col.len()
                )));
            }
            if let Some(&g) = col.iter().find(|&&g| g > MISSING) {
                return Err(StudyError::Inconsistent(format!("SNP {} has genotype code {g}", j + 1)));
            }
            genotypes.extend_from_slice(col);
        }
        let snp_ids = match snp_ids {
            Some(ids) if ids.len() != columns.len() => {
                return Err(StudyError::Inconsistent(format!(
                    "{} SNP identifiers for {} SNPs",
                    ids.len(),
                    columns.len()
                )))
            }
            Some(ids) => ids,
            None => (0..columns.len()).map(default_snp_id).collect(),
        };
        Ok(Study { phenotypes, genotypes, snp_ids })
    }

    pub fn n_individuals(&self) -> usize {
        self.phenotypes.len()
    }

    pub fn n_snps(&self) -> usize {
        self.snp_ids.len()
    }

    pub fn n_cases(&self) -> usize {
        self.phenotypes.iter().filter(|&&d| d == 1).count()
    }

    pub fn phenotypes(&self) -> &[u8] {
        &self.phenotypes
    }

    /// Genotype column of one SNP.
    pub fn snp(&self, index: usize) -> &[u8] {
        let n = self.n_individuals();
        &self.genotypes[index * n..(index + 1) * n]
    }

    pub fn genotype(&self, individual: usize, snp: usize) -> u8 {
        self.genotypes[snp * self.n_individuals() + individual]
    }

    pub fn snp_id(&self, index: usize) -> &str {
        &self.snp_ids[index]
    }

    pub fn snp_ids(&self) -> &[String] {
        &self.snp_ids
    }

    /// Keeps only the listed SNP columns, in the given order.
    pub fn select(&self, snps: &[usize]) -> Result<Study, StudyError> {
        let columns = snps.iter().map(|&j| self.snp(j).to_vec()).collect();
        let ids = snps.iter().map(|&j| self.snp_ids[j].clone()).collect();
        Study::new(self.phenotypes.clone(), columns, Some(ids))
    }

    pub fn to_text(&self) -> String {
        let (n, m) = (self.n_individuals(), self.n_snps());
        let mut out = String::with_capacity(n * (2 * m + 3) + 64);
        let _ = writeln!(out, "#individuals {n} #snps {m}");
        if self.snp_ids.iter().enumerate().any(|(j, id)| *id != default_snp_id(j)) {
            out.push_str("#ids");
            for id in &self.snp_ids {
                out.push(' ');
                out.push_str(id);
            }
            out.push('\n');
        }
        for i in 0..n {
            out.push((b'0' + self.phenotypes[i]) as char);
            for j in 0..m {
                out.push(' ');
                out.push((b'0' + self.genotype(i, j)) as char);
            }
            out.push('\n');
        }
        out
    }
}

fn parse_header(line: &str, lineno: usize) -> Result<(usize, usize), StudyError> {
    let bad = || StudyError::Malformed {
        line: lineno,
        message: format!("expected `#individuals <n> #snps <m>`, got {line:?}"),
    };
    let toks: Vec<&str> = line.split_whitespace().collect();
    match toks.as_slice() {
        ["#individuals", n, "#snps", m] => Ok((n.parse().map_err(|_| bad())?, m.parse().map_err(|_| bad())?)),
        _ => Err(bad()),
    }
}

/// Parses the study text format.
pub fn parse_study(text: &str) -> Result<Study, StudyError> {
    let mut lines = text.lines().enumerate().map(|(i, l)| (i + 1, l.trim())).filter(|(_, l)| !l.is_empty());
    let (hline, header) = lines
        .next()
        .ok_or(StudyError::Malformed { line: 1, message: "empty file".into() })?;
    let (n, m) = parse_header(header, hline)?;

    let mut ids = None;
    let mut phenotypes = Vec::with_capacity(n);
    let mut columns: Vec<Vec<u8>> = (0..m).map(|_| Vec::with_capacity(n)).collect();
    let mut last_line = hline;
    for (lineno, line) in lines {
        last_line = lineno;
        if let Some(rest) = line.strip_prefix("#ids") {
            if ids.is_some() || !phenotypes.is_empty() {
                return Err(StudyError::Malformed { line: lineno, message: "`#ids` must directly follow the header".into() });
            }
            let list: Vec<String> = rest.split_whitespace().map(String::from).collect();
            if list.len() != m {
                return Err(StudyError::Malformed {
                    line: lineno,
                    message: format!("{} identifiers for {m} SNPs", list.len()),
                });
            }
            ids = Some(list);
            continue;
        }
        if line.starts_with('#') {
            continue;
        }
        let mut toks = line.split_whitespace();
        let pheno = toks.next().unwrap_or("");
        let d = match pheno {
            "0" => 0,
            "1" => 1,
            other => {
                return Err(StudyError::Malformed { line: lineno, message: format!("phenotype {other:?} is not 0 or 1") })
            }
        };
        let mut count = 0;
        for tok in toks {
            let g = match tok {
                "0" => 0,
                "1" => 1,
                "2" => 2,
                "3" => 3,
                other => {
                    return Err(StudyError::Malformed {
                        line: lineno,
                        message: format!("genotype code {other:?} is not 0, 1, 2 or 3"),
                    })
                }
            };
            if count < m {
                columns[count].push(g);
            }
            count += 1;
        }
        if count != m {
            return Err(StudyError::Malformed { line: lineno, message: format!("{count} genotypes, expected {m}") });
        }
        phenotypes.push(d);
    }
    if phenotypes.len() != n {
        return Err(StudyError::Malformed {
            line: last_line,
            message: format!("{} individuals, header declares {n}", phenotypes.len()),
        });
    }
    Study::new(phenotypes, columns, ids)
}

pub fn load_study(path: impl AsRef<Path>) -> Result<Study, StudyError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| StudyError::Io { path: path.display().to_string(), source })?;
    parse_study(&text)
}

pub fn write_study(study: &Study, path: impl AsRef<Path>) -> Result<(), StudyError> {
    let path = path.as_ref();
    fs::write(path, study.to_text()).map_err(|source| StudyError::Io { path: path.display().to_string(), source })
}
