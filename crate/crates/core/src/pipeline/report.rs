//! Scan reports and their TSV serialization.
//!
//! ```text
//! # key<TAB>value                  settings, one per line
//! [stage1]
//! snp  p  rank  p_bonferroni  column
//! [stage2]
//! snp_a  snp_b  [snp_c]  p  n_samples  r_hat  acceptance_rate  chi2  p_bonferroni  significant
//! [skipped]
//! snps  reason
//! ```
//!
//! Numbers carry 4 significant digits. A Monte Carlo p-value of 0 is written
//! `<1/N` with `N` the number of samples. `column` is the SNP's 1-based
//! position in the study. Reports without interaction tests (`arity` 0)
//! stop after the stage-one section.

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use super::scan::binomial;
use super::ScanError;

#[derive(Debug, Clone, PartialEq)]
pub struct ScanSettings {
    pub n_individuals: usize,
    pub n_snps: usize,
    /// SNPs carried into stage two.
    pub k: usize,
    /// SNPs per tested combination; 0 for a stage-one-only report.
    pub arity: usize,
    pub n_chains: usize,
    pub iterations: usize,
    pub burn_in: usize,
    pub thinning: usize,
    pub seed: u64,
    pub alpha: f64,
    /// Null model of the interaction test, e.g. `(XY,XD,YD)`.
    pub model: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct RankedSnp {
    pub snp: usize,
    pub id: String,
    pub p_value: f64,
    /// 1-based.
    pub rank: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct InteractionTest {
    pub snps: Vec<usize>,
    pub ids: Vec<String>,
    pub p_value: f64,
    pub n_samples: usize,
    pub tail_count: usize,
    pub observed_chi2: f64,
    pub r_hat: Option<f64>,
    pub acceptance_rate: f64,
    /// Individuals with all genotypes called.
    pub total: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SkippedTest {
    pub snps: Vec<usize>,
    pub ids: Vec<String>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScanReport {
    pub settings: ScanSettings,
    pub stage1: Vec<RankedSnp>,
    pub tests: Vec<InteractionTest>,
    pub skipped: Vec<SkippedTest>,
}

impl ScanReport {
    /// Number of combinations the Bonferroni correction accounts for.
    pub fn bonferroni_factor(&self) -> u64 {
        binomial(self.settings.k, self.settings.arity).max(1)
    }

    pub fn bonferroni(&self, p: f64) -> f64 {
        (p * self.bonferroni_factor() as f64).min(1.0)
    }

    pub fn is_significant(&self, test: &InteractionTest) -> bool {
        self.bonferroni(test.p_value) < self.settings.alpha
    }

    /// The test with the smallest p-value, first in report order on ties.
    pub fn best_test(&self) -> Option<&InteractionTest> {
        self.tests.iter().reduce(|best, t| if t.p_value < best.p_value { t } else { best })
    }

    pub fn rank_of(&self, snp: usize) -> Option<usize> {
        self.stage1.iter().find(|r| r.snp == snp).map(|r| r.rank)
    }

    pub fn to_tsv(&self) -> String {
        let s = &self.settings;
        let mut out = String::new();
        let _ = writeln!(out, "# individuals\t{}", s.n_individuals);
        let _ = writeln!(out, "# snps\t{}", s.n_snps);
        let _ = writeln!(out, "# arity\t{}", s.arity);
        if s.arity > 0 {
            let _ = writeln!(out, "# k\t{}", s.k);
            let _ = writeln!(out, "# model\t{}", s.model);
            let _ = writeln!(out, "# chains\t{}", s.n_chains);
            let _ = writeln!(out, "# iterations\t{}", s.iterations);
            let _ = writeln!(out, "# burn_in\t{}", s.burn_in);
            let _ = writeln!(out, "# thinning\t{}", s.thinning);
            let _ = writeln!(out, "# seed\t{}", s.seed);
            let _ = writeln!(out, "# alpha\t{}", s.alpha);
            let _ = writeln!(out, "# bonferroni\t{}", self.bonferroni_factor());
        }

        out.push_str("[stage1]\nsnp\tp\trank\tp_bonferroni\tcolumn\n");
        let m = s.n_snps.max(1) as f64;
        for r in &self.stage1 {
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}",
                r.id,
                format_sig(r.p_value),
                r.rank,
                format_sig((r.p_value * m).min(1.0)),
                r.snp + 1
            );
        }
        if s.arity == 0 {
            return out;
        }

        out.push_str("[stage2]\n");
        for name in snp_columns(s.arity) {
            out.push_str(&name);
            out.push('\t');
        }
        out.push_str("p\tn_samples\tr_hat\tacceptance_rate\tchi2\tp_bonferroni\tsignificant\n");
        for t in &self.tests {
            for id in &t.ids {
                out.push_str(id);
                out.push('\t');
            }
            let _ = writeln!(
                out,
                "{}\t{}\t{}\t{}\t{}\t{}\t{}",
                format_p(t.p_value, t.n_samples),
                t.n_samples,
                t.r_hat.map_or_else(|| "NA".to_string(), format_sig),
                format_sig(t.acceptance_rate),
                format_sig(t.observed_chi2),
                format_p(self.bonferroni(t.p_value), t.n_samples),
                if self.is_significant(t) { "yes" } else { "no" }
            );
        }

        out.push_str("[skipped]\nsnps\treason\n");
        for sk in &self.skipped {
            let _ = writeln!(out, "{}\t{}", sk.ids.join(","), sk.reason);
        }
        out
    }
}

fn snp_columns(arity: usize) -> Vec<String> {
    (0..arity)
        .map(|i| match char::from_u32('a' as u32 + i as u32) {
            Some(c) if i < 26 => format!("snp_{c}"),
            _ => format!("snp_{}", i + 1),
        })
        .collect()
}

/// `x` rounded to 4 significant digits, fixed-point above 1e-4 and
/// scientific below.
pub fn format_sig(x: f64) -> String {
    if !x.is_finite() {
        return format!("{x}");
    }
    if x == 0.0 {
        return "0.000".into();
    }
    let rounded: f64 = format!("{x:.3e}").parse().expect("formatted float parses");
    let mag = rounded.abs();
    if (1e-4..1e15).contains(&mag) {
        let decimals = (3 - mag.log10().floor() as i32).max(0) as usize;
        format!("{rounded:.decimals$}")
    } else {
        format!("{rounded:.3e}")
    }
}

/// A Monte Carlo p-value; 0 becomes `<1/N`.
pub fn format_p(p: f64, n_samples: usize) -> String {
    if p == 0.0 {
        format!("<1/{n_samples}")
    } else {
        format_sig(p)
    }
}

pub fn write_report(report: &ScanReport, path: impl AsRef<Path>) -> Result<(), ScanError> {
    let path = path.as_ref();
    fs::write(path, report.to_tsv()).map_err(|source| ScanError::Io { path: path.display().to_string(), source })
}

fn malformed(line: usize, message: impl Into<String>) -> ScanError {
    ScanError::Report { line, message: message.into() }
}

fn parse_num<T: std::str::FromStr>(tok: &str, line: usize, what: &str) -> Result<T, ScanError> {
    tok.parse().map_err(|_| malformed(line, format!("bad {what} {tok:?}")))
}

fn parse_p(tok: &str, line: usize) -> Result<f64, ScanError> {
    if tok.starts_with("<1/") {
        return Ok(0.0);
    }
    let p: f64 = parse_num(tok, line, "p-value")?;
    if !(0.0..=1.0).contains(&p) {
        return Err(malformed(line, format!("p-value {p} outside [0, 1]")));
    }
    Ok(p)
}

#[derive(PartialEq)]
enum Section {
    Settings,
    Stage1,
    Stage2,
    Skipped,
}

/// Reads a report written by [`ScanReport::to_tsv`]. Rounded numbers stay
/// rounded, and
/// `tail_count` and `total` are not stored, so they read back as
/// `round(p·N)` and 0.
pub fn parse_report(text: &str) -> Result<ScanReport, ScanError> {
    let mut settings = ScanSettings {
        n_individuals: 0,
        n_snps: 0,
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
    let mut stage1: Vec<RankedSnp> = Vec::new();
    let mut tests = Vec::new();
    let mut skipped = Vec::new();
    let mut section = Section::Settings;
    let mut expect_header = false;

    let check_ids = |stage1: &[RankedSnp], ids: &[String], line: usize| -> Result<(), ScanError> {
        match ids.iter().find(|id| !stage1.iter().any(|r| &r.id == *id)) {
            Some(id) => Err(malformed(line, format!("SNP {id:?} missing from stage one"))),
            None => Ok(()),
        }
    };

    for (i, raw) in text.lines().enumerate() {
        let lineno = i + 1;
        if raw.is_empty() {
            continue;
        }
        let next = match raw {
            "[stage1]" => Some(Section::Stage1),
            "[stage2]" => Some(Section::Stage2),
            "[skipped]" => Some(Section::Skipped),
            _ => None,
        };
        if let Some(s) = next {
            section = s;
            expect_header = true;
            continue;
        }
        if expect_header {
            expect_header = false;
            continue;
        }
        let cols: Vec<&str> = raw.split('\t').collect();
        match section {
            Section::Settings => {
                let key = cols[0].strip_prefix("# ").ok_or_else(|| malformed(lineno, "expected `# key<TAB>value`"))?;
                let value = *cols.get(1).ok_or_else(|| malformed(lineno, "missing value"))?;
                match key {
                    "individuals" => settings.n_individuals = parse_num(value, lineno, key)?,
                    "snps" => settings.n_snps = parse_num(value, lineno, key)?,
                    "arity" => settings.arity = parse_num(value, lineno, key)?,
                    "k" => settings.k = parse_num(value, lineno, key)?,
                    "model" => settings.model = value.to_string(),
                    "chains" => settings.n_chains = parse_num(value, lineno, key)?,
                    "iterations" => settings.iterations = parse_num(value, lineno, key)?,
                    "burn_in" => settings.burn_in = parse_num(value, lineno, key)?,
                    "thinning" => settings.thinning = parse_num(value, lineno, key)?,
                    "seed" => settings.seed = parse_num(value, lineno, key)?,
                    "alpha" => settings.alpha = parse_num(value, lineno, key)?,
                    "bonferroni" => {}
                    other => return Err(malformed(lineno, format!("unknown setting {other:?}"))),
                }
            }
            Section::Stage1 => {
                if cols.len() != 5 {
                    return Err(malformed(lineno, format!("{} columns, expected 5", cols.len())));
                }
                let rank: usize = parse_num(cols[2], lineno, "rank")?;
                let p = parse_p(cols[1], lineno)?;
                let column: usize = parse_num(cols[4], lineno, "column")?;
                if column == 0 {
                    return Err(malformed(lineno, "columns are 1-based"));
                }
                stage1.push(RankedSnp { snp: column - 1, id: cols[0].to_string(), p_value: p, rank });
            }
            Section::Stage2 => {
                let a = settings.arity;
                if cols.len() != a + 7 {
                    return Err(malformed(lineno, format!("{} columns, expected {}", cols.len(), a + 7)));
                }
                let ids: Vec<String> = cols[..a].iter().map(|s| s.to_string()).collect();
                check_ids(&stage1, &ids, lineno)?;
                let p_value = parse_p(cols[a], lineno)?;
                let n_samples: usize = parse_num(cols[a + 1], lineno, "n_samples")?;
                let r_hat = match cols[a + 2] {
                    "NA" => None,
                    tok => Some(parse_num(tok, lineno, "r_hat")?),
                };
                tests.push(InteractionTest {
                    snps: Vec::new(),
                    ids,
                    p_value,
                    n_samples,
                    tail_count: (p_value * n_samples as f64).round() as usize,
                    observed_chi2: parse_num(cols[a + 4], lineno, "chi2")?,
                    r_hat,
                    acceptance_rate: parse_num(cols[a + 3], lineno, "acceptance_rate")?,
                    total: 0,
                });
            }
            Section::Skipped => {
                if cols.len() != 2 {
                    return Err(malformed(lineno, format!("{} columns, expected 2", cols.len())));
                }
                let ids: Vec<String> = cols[0].split(',').map(String::from).collect();
                check_ids(&stage1, &ids, lineno)?;
                skipped.push(SkippedTest { snps: Vec::new(), ids, reason: cols[1].to_string() });
            }
        }
    }
    let lookup = |ids: &[String]| -> Vec<usize> {
        ids.iter().map(|id| stage1.iter().find(|r| &r.id == id).map(|r| r.snp).expect("ids checked")).collect()
    };
    for t in &mut tests {
        t.snps = lookup(&t.ids);
    }
    for s in &mut skipped {
        s.snps = lookup(&s.ids);
    }
    Ok(ScanReport { settings, stage1, tests, skipped })
}

pub fn load_report(path: impl AsRef<Path>) -> Result<ScanReport, ScanError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| ScanError::Io { path: path.display().to_string(), source })?;
    parse_report(&text)
}
