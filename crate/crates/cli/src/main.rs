//! Command-line front end: `filter`, `scan`, `test`, `simulate` and `basis`.
//!
//! Exit codes: 0 success, 1 usage error, 2 data error, 3 non-convergence.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use epimarkov::markov::{builtin_no3way_basis, load_basis, validate_basis, write_basis, BasisError, MarkovBasis};
use epimarkov::models::{simulate_study, solve_params, DesignTargets, ModelError, ModelKind, PopulationSpec};
use epimarkov::pipeline::{
    filter_report, load_study, pairwise_scan, triplet_scan, write_study, ScanConfig, ScanError, StudyError,
};
use epimarkov::sampler::{extended_fisher_test, ChainConfig, SamplerError};
use epimarkov::tables::{axis_label, ContingencyTable, LogLinearModel, TableError, TableShape};

#[derive(Parser)]
#[command(name = "epimarkov", version, about = "Two-stage epistasis scan with Markov basis exact tests")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Rank SNPs by the single-locus Fisher exact test.
    Filter {
        /// Study file.
        study: PathBuf,
        /// Report path (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Rank SNPs, then test pairs (or triplets) of the top k for interaction.
    Scan {
        study: PathBuf,
        #[arg(long, default_value_t = 10)]
        k: usize,
        #[command(flatten)]
        chain: ChainArgs,
        #[arg(long, default_value_t = 0.05)]
        alpha: f64,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Run the extended exact test on a single table file.
    Test {
        /// Table file: a line of axis sizes, then the counts.
        table: PathBuf,
        #[command(flatten)]
        chain: ChainArgs,
        #[command(flatten)]
        model: ModelArgs,
        #[arg(long)]
        out: Option<PathBuf>,
        /// Write per-chain χ² traces as TSV.
        #[arg(long)]
        traces: Option<PathBuf>,
        /// Write the chain-averaged autocorrelation function as TSV.
        #[arg(long)]
        acf: Option<PathBuf>,
    },
    /// Simulate a case-control study from an interaction model.
    Simulate {
        #[arg(long, value_enum, default_value_t = Interaction::Multiplicative)]
        interaction: Interaction,
        /// Minor allele frequency of both causative SNPs.
        #[arg(long, default_value_t = 0.25)]
        maf: f64,
        #[arg(long, default_value_t = 400)]
        cases: usize,
        #[arg(long, default_value_t = 400)]
        controls: usize,
        /// Total SNPs, the two causative ones included.
        #[arg(long, default_value_t = 2)]
        snps: usize,
        /// Marginal effect size of each causative SNP.
        #[arg(long, default_value_t = 1.0)]
        effect: f64,
        #[arg(long, default_value_t = 0.5)]
        prevalence: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export or validate Markov bases.
    Basis {
        #[command(subcommand)]
        action: BasisAction,
    },
}

#[derive(Subcommand)]
enum BasisAction {
    /// Write the built-in basis of the no-3-way model on 3×3×2 tables.
    Export {
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Check that every move of a basis file preserves the model's margins.
    Validate {
        basis: PathBuf,
        /// Table shape as comma-separated axis sizes.
        #[arg(long, default_value = "3,3,2")]
        shape: String,
        /// Model facets, e.g. `XY,XD,YD` (default: all facets of size rank − 1).
        #[arg(long)]
        facets: Option<String>,
    },
}

#[derive(Clone, Copy, ValueEnum)]
enum Interaction {
    Control,
    Additive,
    Multiplicative,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModelChoice {
    /// Built-in basis of the no-3-way model on 3×3×2 tables.
    No3way,
    /// Basis loaded from `--basis`.
    File,
}

#[derive(Args)]
struct ChainArgs {
    #[arg(long, default_value_t = 3)]
    chains: usize,
    /// Iterations per chain, burn-in included.
    #[arg(long, default_value_t = 40_000)]
    iters: usize,
    #[arg(long, default_value_t = 10_000)]
    burnin: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl ChainArgs {
    fn config(&self) -> ChainConfig {
        ChainConfig { n_chains: self.chains, iterations: self.iters, burn_in: self.burnin, seed: self.seed, thinning: 1 }
    }
}

#[derive(Args)]
struct ModelArgs {
    #[arg(long, value_enum, default_value_t = ModelChoice::No3way)]
    model: ModelChoice,
    /// Basis file, required with `--model file`.
    #[arg(long)]
    basis: Option<PathBuf>,
    /// Model facets for `--model file`, e.g. `XYD,XZD,YZD,XYZ`.
    #[arg(long)]
    facets: Option<String>,
}

enum Failure {
    Usage(String),
    Data(String),
    NonConvergence(String),
}

impl Failure {
    fn code(&self) -> u8 {
        match self {
            Failure::Usage(_) => 1,
            Failure::Data(_) => 2,
            Failure::NonConvergence(_) => 3,
        }
    }

    fn message(&self) -> &str {
        match self {
            Failure::Usage(m) | Failure::Data(m) | Failure::NonConvergence(m) => m,
        }
    }
}

impl From<StudyError> for Failure {
    fn from(e: StudyError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<BasisError> for Failure {
    fn from(e: BasisError) -> Self {
        Failure::Data(e.to_string())
    }
}

impl From<TableError> for Failure {
    fn from(e: TableError) -> Self {
        match e {
            TableError::IpfNotConverged { .. } => Failure::NonConvergence(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<SamplerError> for Failure {
    fn from(e: SamplerError) -> Self {
        match e {
            SamplerError::Table(t) => t.into(),
            SamplerError::InvalidConfig(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<ScanError> for Failure {
    fn from(e: ScanError) -> Self {
        match e {
            ScanError::Sampler(s) => s.into(),
            ScanError::Table(t) => t.into(),
            ScanError::InvalidConfig(_) => Failure::Usage(e.to_string()),
            _ => Failure::Data(e.to_string()),
        }
    }
}

impl From<ModelError> for Failure {
    fn from(e: ModelError) -> Self {
        match e {
            ModelError::NoConvergence { .. } => Failure::NonConvergence(e.to_string()),
            ModelError::InvalidParameters(_) | ModelError::InvalidMaf(_) | ModelError::InfeasibleTargets(_) => {
                Failure::Usage(e.to_string())
            }
            _ => Failure::Data(e.to_string()),
        }
    }
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Failure> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Failure::Data(format!("{}: {e}", path.display()))),
        None => std::io::stdout().write_all(text.as_bytes()).map_err(|e| Failure::Data(format!("stdout: {e}"))),
    }
}

fn parse_shape(text: &str) -> Result<TableShape, Failure> {
    let sizes = text
        .split(',')
        .map(|t| t.trim().parse::<usize>().map_err(|_| Failure::Usage(format!("bad axis size {t:?}"))))
        .collect::<Result<Vec<_>, _>>()?;
    TableShape::new(sizes).map_err(|e| Failure::Usage(e.to_string()))
}

/// Parses facets written with axis letters, e.g. `XY,XD,YD`.
fn parse_facets(text: &str, shape: &TableShape) -> Result<LogLinearModel, Failure> {
    let rank = shape.rank();
    let labels: Vec<String> = (0..rank).map(|a| axis_label(rank, a)).collect();
    let facets = text
        .split(',')
        .map(|facet| {
            facet
                .trim()
                .chars()
                .map(|c| {
                    labels
                        .iter()
                        .position(|l| l.len() == 1 && l.starts_with(c))
                        .ok_or_else(|| Failure::Usage(format!("axis {c:?} not in {}", labels.concat())))
                })
                .collect::<Result<Vec<_>, _>>()
        })
        .collect::<Result<Vec<_>, _>>()?;
    LogLinearModel::new(shape.clone(), facets).map_err(|e| Failure::Usage(e.to_string()))
}

fn model_for(shape: &TableShape, facets: Option<&str>) -> Result<LogLinearModel, Failure> {
    match facets {
        Some(f) => parse_facets(f, shape),
        None => Ok(LogLinearModel::no_highest_interaction(shape.clone())),
    }
}

fn resolve_basis(args: &ModelArgs, shape: &TableShape) -> Result<MarkovBasis, Failure> {
    match args.model {
        ModelChoice::No3way => {
            if args.basis.is_some() || args.facets.is_some() {
                return Err(Failure::Usage("--basis and --facets need --model file".into()));
            }
            Ok(builtin_no3way_basis())
        }
        ModelChoice::File => {
            let path = args.basis.as_ref().ok_or_else(|| Failure::Usage("--model file needs --basis <path>".into()))?;
            let model = model_for(shape, args.facets.as_deref())?;
            Ok(load_basis(path, model)?)
        }
    }
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Filter { study, out } => {
            let study = load_study(&study)?;
            emit(&filter_report(&study).to_tsv(), out.as_deref())
        }
        Command::Scan { study, k, chain, alpha, model, out } => {
            let study = load_study(&study)?;
            let config = ScanConfig { k, chain: chain.config(), alpha };
            let report = match model.model {
                ModelChoice::No3way => {
                    resolve_basis(&model, &TableShape::snp_pair())?;
                    pairwise_scan(&study, &config)?
                }
                ModelChoice::File => {
                    let basis = resolve_basis(&model, &TableShape::snp_set(3)?)?;
                    triplet_scan(&study, &basis, &config)?
                }
            };
            emit(&report.to_tsv(), out.as_deref())
        }
        Command::Test { table, chain, model, out, traces, acf } => {
            let text = fs::read_to_string(&table).map_err(|e| Failure::Data(format!("{}: {e}", table.display())))?;
            let observed: ContingencyTable = text
                .parse()
                .map_err(|e: TableError| Failure::Data(format!("{}: {e}", table.display())))?;
            let basis = resolve_basis(&model, observed.shape())?;
            let res = extended_fisher_test(&observed, &basis, &chain.config())?;
            let d = &res.diagnostics;
            let mut summary = format!(
                "model\t{}\nchi2\t{}\np\t{}\nn_samples\t{}\ntail_count\t{}\nr_hat\t{}\nacceptance_rate\t{}\n",
                basis.model().describe(),
                res.observed_chi2,
                epimarkov::pipeline::format_p(res.p_value, res.n_samples),
                res.n_samples,
                res.tail_count,
                d.r_hat().map_or_else(|| "NA".into(), |r| r.to_string()),
                d.acceptance_rate,
            );
            for (c, p) in res.chain_p_values.iter().enumerate() {
                summary.push_str(&format!("chain_{}_p\t{p}\n", c + 1));
            }
            for w in &d.warnings {
                eprintln!("warning: {w}");
            }
            if let Some(path) = traces {
                emit(&d.traces_tsv(), Some(&path))?;
            }
            if let Some(path) = acf {
                emit(&d.autocorrelation_tsv(), Some(&path))?;
            }
            emit(&summary, out.as_deref())
        }
        Command::Simulate { interaction, maf, cases, controls, snps, effect, prevalence, seed, out } => {
            if snps < 2 {
                return Err(Failure::Usage("--snps must be at least 2".into()));
            }
            let kind = match interaction {
                Interaction::Control => ModelKind::Control,
                Interaction::Additive => ModelKind::Additive,
                Interaction::Multiplicative => ModelKind::Multiplicative,
            };
            let pop = PopulationSpec::symmetric(maf)?;
            let model = solve_params(kind, &pop, &DesignTargets::symmetric(effect, prevalence))?;
            let sim = simulate_study(&model, &pop, cases, controls, snps - 2, seed)?;
            eprintln!(
                "causative SNPs: {} {}",
                sim.study.snp_id(sim.causal[0]),
                sim.study.snp_id(sim.causal[1])
            );
            match out {
                Some(path) => Ok(write_study(&sim.study, path)?),
                None => emit(&sim.study.to_text(), None),
            }
        }
        Command::Basis { action: BasisAction::Export { out } } => match out {
            Some(path) => Ok(write_basis(&builtin_no3way_basis(), path)?),
            None => emit(&builtin_no3way_basis().to_text(), None),
        },
        Command::Basis { action: BasisAction::Validate { basis, shape, facets } } => {
            let shape = parse_shape(&shape)?;
            let model = model_for(&shape, facets.as_deref())?;
            let text = fs::read_to_string(&basis).map_err(|e| Failure::Data(format!("{}: {e}", basis.display())))?;
            let parsed = epimarkov::markov::parse_basis_unchecked(&text, model)?;
            let report = validate_basis(&parsed);
            for w in &report.warnings {
                eprintln!("warning: {w}");
            }
            let mut out = String::new();
            for check in &report.checks {
                if check.passed() {
                    out.push_str(&format!("move {}\tok\n", check.number));
                } else {
                    out.push_str(&format!("move {}\tFAIL\t{}\n", check.number, check.to_error()));
                }
            }
            emit(&out, None)?;
            if report.passed() {
                Ok(())
            } else {
                Err(Failure::Data(format!("{} of {} moves failed", report.failures().count(), report.checks.len())))
            }
        }
    }
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { ExitCode::from(1) } else { ExitCode::SUCCESS };
        }
    };
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(f) => {
            eprintln!("error: {}", f.message());
            ExitCode::from(f.code())
        }
    }
}
