//! The extended Fisher exact test.
//!
//! A Metropolis-Hastings walk over the fiber of the observed table, with
//! moves drawn uniformly from a Markov basis and a uniform ± sign. The target
//! law is the conditional hypergeometric distribution `∝ 1 / Π n_c!`. Each
//! visited table is scored by its χ² against the expected counts of the
//! observed margins, which every table in the fiber shares.

mod diagnostics;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use thiserror::Error;

pub use diagnostics::{
    autocorrelation, gelman_rubin, Autocorrelation, ChainDiagnostics, DiagnosticsError, GelmanRubin, MAX_LAG,
};

use crate::lnfact::LnFactorial;
use crate::markov::{apply_move, MarkovBasis, MarkovMove, Sign};
use crate::tables::{chi_square, fit_margins, margins, ContingencyTable, RealTable, TableError};

/// Relative slack when comparing a sampled χ² against the observed one, so
/// that tables with mathematically equal χ² land in the tail.
pub const CHI2_TIE_TOLERANCE: f64 = 1e-9;

/// `true` when `sample` counts toward the p-value tail of `observed`.
#[inline]
pub fn in_tail(sample: f64, observed: f64) -> bool {
    sample >= observed - CHI2_TIE_TOLERANCE * observed.abs().max(1.0)
}

#[derive(Debug, Error)]
pub enum SamplerError {
    #[error(transparent)]
    Table(#[from] TableError),
    #[error("table shape {table:?} does not match basis shape {basis:?}")]
    ShapeMismatch { table: Vec<usize>, basis: Vec<usize> },
    #[error("invalid chain configuration: {0}")]
    InvalidConfig(String),
    #[error("no samples remain after burn-in")]
    EmptySample,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ChainConfig {
    pub n_chains: usize,
    /// Total iterations per chain, burn-in included.
    pub iterations: usize,
    pub burn_in: usize,
    pub seed: u64,
    /// Keep every `thinning`-th post-burn-in state.
    pub thinning: usize,
}

impl Default for ChainConfig {
    fn default() -> Self {
        ChainConfig { n_chains: 3, iterations: 40_000, burn_in: 10_000, seed: 0, thinning: 1 }
    }
}

impl ChainConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.n_chains == 0 {
            return Err(SamplerError::InvalidConfig("n_chains must be at least 1".into()));
        }
        if self.burn_in >= self.iterations {
            return Err(SamplerError::InvalidConfig(format!(
                "burn-in {} must be below iterations {}",
                self.burn_in, self.iterations
            )));
        }
        if self.thinning == 0 {
            return Err(SamplerError::InvalidConfig("thinning must be at least 1".into()));
        }
        Ok(())
    }

    /// Retained samples per chain.
    pub fn samples_per_chain(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thinning)
    }

    /// Independent generator for one chain, derived from the master seed.
    pub fn chain_rng(&self, chain: usize) -> ChaCha8Rng {
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(chain as u64);
        rng
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepOutcome {
    Accepted,
    Rejected,
    /// The proposal left the nonnegative orthant; the walk stays put.
    Infeasible,
}

/// Mutable walker state for one chain.
#[derive(Debug, Clone)]
pub struct FiberWalk {
    moves: Vec<Vec<(usize, i64)>>,
    lnfact: LnFactorial,
    state: Vec<u64>,
}

impl FiberWalk {
    pub fn new(start: &ContingencyTable, basis: &MarkovBasis) -> Result<Self, SamplerError> {
        check_shape(start, basis)?;
        Ok(FiberWalk {
            moves: basis.moves().iter().map(MarkovMove::support).collect(),
            lnfact: LnFactorial::new(start.total()),
            state: start.counts().to_vec(),
        })
    }

    pub fn state(&self) -> &[u64] {
        &self.state
    }

    pub fn step<R: Rng + ?Sized>(&mut self, rng: &mut R) -> StepOutcome {
        if self.moves.is_empty() {
            return StepOutcome::Infeasible;
        }
        let pick = rng.random_range(0..2 * self.moves.len());
        let support = &self.moves[pick / 2];
        let sign = if pick % 2 == 0 { 1 } else { -1 };
        if support.iter().any(|&(cell, m)| (self.state[cell] as i64) + sign * m < 0) {
            return StepOutcome::Infeasible;
        }
        let mut log_ratio = 0.0;
        for &(cell, m) in support {
            let old = self.state[cell];
            log_ratio += self.lnfact.get(old) - self.lnfact.get((old as i64 + sign * m) as u64);
        }
        if log_ratio < 0.0 && rng.random::<f64>() >= log_ratio.exp() {
            return StepOutcome::Rejected;
        }
        for &(cell, m) in support {
            self.state[cell] = (self.state[cell] as i64 + sign * m) as u64;
        }
        StepOutcome::Accepted
    }
}

fn check_shape(table: &ContingencyTable, basis: &MarkovBasis) -> Result<(), SamplerError> {
    if table.shape() != basis.shape() {
        return Err(SamplerError::ShapeMismatch {
            table: table.shape().axis_sizes().to_vec(),
            basis: basis.shape().axis_sizes().to_vec(),
        });
    }
    Ok(())
}

fn ln_factorial(n: u64) -> f64 {
    (2..=n).map(|k| (k as f64).ln()).sum()
}

/// Metropolis-Hastings acceptance probability of `state + sign·move`, or
/// `None` when the proposal is infeasible.
pub fn acceptance_probability(state: &ContingencyTable, mv: &MarkovMove, sign: Sign) -> Option<f64> {
    let next = apply_move(state, mv, sign)?;
    let log_ratio: f64 = mv
        .support()
        .iter()
        .map(|&(c, _)| ln_factorial(state.counts()[c]) - ln_factorial(next.counts()[c]))
        .sum();
    Some(log_ratio.exp().min(1.0))
}

/// One Metropolis-Hastings step. Returns the next state and whether the
/// proposal was accepted.
pub fn mh_step<R: Rng + ?Sized>(state: &ContingencyTable, basis: &MarkovBasis, rng: &mut R) -> (ContingencyTable, bool) {
    let mut walk = FiberWalk::new(state, basis).expect("state and basis shapes must match");
    let accepted = walk.step(rng) == StepOutcome::Accepted;
    let next = ContingencyTable::new(state.shape().clone(), walk.state).expect("walk preserves length");
    (next, accepted)
}

#[derive(Debug, Clone)]
pub struct ExactTestResult {
    pub observed_chi2: f64,
    /// Fraction of pooled post-burn-in samples with χ² ≥ observed.
    pub p_value: f64,
    pub n_samples: usize,
    pub tail_count: usize,
    pub chain_p_values: Vec<f64>,
    pub expected: RealTable,
    pub diagnostics: ChainDiagnostics,
}

struct ChainRun {
    trace: Vec<f64>,
    tail: usize,
    accepted: u64,
    proposals: u64,
}

/// χ² with the same arithmetic as [`chi_square`], for cells already known to
/// respect the structural zeros.
#[inline]
fn chi2_of(counts: &[u64], expected: &[f64]) -> f64 {
    let mut chi2 = 0.0;
    for (&o, &e) in counts.iter().zip(expected) {
        if e == 0.0 {
            continue;
        }
        let d = o as f64 - e;
        chi2 += d * d / e;
    }
    chi2
}

fn run_chain(
    observed: &ContingencyTable,
    basis: &MarkovBasis,
    expected: &[f64],
    observed_chi2: f64,
    config: &ChainConfig,
    chain: usize,
) -> ChainRun {
    let mut rng = config.chain_rng(chain);
    let mut walk = FiberWalk::new(observed, basis).expect("shape checked by caller");
    let mut chi2 = observed_chi2;
    let mut trace = Vec::with_capacity(config.samples_per_chain());
    let mut tail = 0;
    let mut accepted = 0;
    for it in 0..config.iterations {
        if walk.step(&mut rng) == StepOutcome::Accepted {
            accepted += 1;
            chi2 = chi2_of(walk.state(), expected);
        }
        if it >= config.burn_in && (it - config.burn_in).is_multiple_of(config.thinning) {
            trace.push(chi2);
            if in_tail(chi2, observed_chi2) {
                tail += 1;
            }
        }
    }
    ChainRun { trace, tail, accepted, proposals: config.iterations as u64 }
}

/// Runs `config.n_chains` independent chains from the observed table and
/// estimates the p-value of its χ² under the basis' model.
pub fn extended_fisher_test(
    observed: &ContingencyTable,
    basis: &MarkovBasis,
    config: &ChainConfig,
) -> Result<ExactTestResult, SamplerError> {
    check_shape(observed, basis)?;
    config.validate()?;
    if observed.total() == 0 {
        return Err(TableError::EmptyTable.into());
    }
    let expected = fit_margins(&margins(observed, basis.model())?)?;
    let observed_chi2 = chi_square(observed, &expected)?;

    let runs: Vec<ChainRun> = (0..config.n_chains)
        .into_par_iter()
        .map(|c| run_chain(observed, basis, expected.values(), observed_chi2, config, c))
        .collect();

    let n_samples: usize = runs.iter().map(|r| r.trace.len()).sum();
    if n_samples == 0 {
        return Err(SamplerError::EmptySample);
    }
    let tail_count: usize = runs.iter().map(|r| r.tail).sum();
    let chain_p_values = runs.iter().map(|r| r.tail as f64 / r.trace.len() as f64).collect();
    let accepted: u64 = runs.iter().map(|r| r.accepted).sum();
    let proposals: u64 = runs.iter().map(|r| r.proposals).sum();
    let diagnostics =
        ChainDiagnostics::from_traces(runs.into_iter().map(|r| r.trace).collect(), accepted as f64 / proposals as f64);

    Ok(ExactTestResult {
        observed_chi2,
        p_value: tail_count as f64 / n_samples as f64,
        n_samples,
        tail_count,
        chain_p_values,
        expected,
        diagnostics,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::markov::builtin_no3way_basis;
    use crate::tables::{LogLinearModel, TableShape};

    fn small_config(seed: u64) -> ChainConfig {
        ChainConfig { n_chains: 2, iterations: 2_000, burn_in: 500, seed, thinning: 1 }
    }

    #[test]
    fn config_validation() {
        assert!(ChainConfig::default().validate().is_ok());
        assert_eq!(ChainConfig::default().samples_per_chain(), 30_000);
        assert!(ChainConfig { burn_in: 40_000, ..ChainConfig::default() }.validate().is_err());
        assert!(ChainConfig { n_chains: 0, ..ChainConfig::default() }.validate().is_err());
        assert!(ChainConfig { thinning: 0, ..ChainConfig::default() }.validate().is_err());
        assert_eq!(ChainConfig { thinning: 7, ..ChainConfig::default() }.samples_per_chain(), 4286);
    }

    #[test]
    fn acceptance_from_uniform_twos() {
        let t = ContingencyTable::filled(TableShape::snp_pair(), 2);
        let basis = builtin_no3way_basis();
        let f1 = &basis.moves()[0];
        let p = acceptance_probability(&t, f1, Sign::Plus).unwrap();
        // 2!^8 / (3!^4 1!^4)
        assert!((p - 256.0 / 1296.0).abs() < 1e-12);
        let zero = ContingencyTable::zeros(TableShape::snp_pair());
        assert!(acceptance_probability(&zero, f1, Sign::Plus).is_none());
    }

    #[test]
    fn singleton_fiber_never_moves() {
        let mut t = ContingencyTable::zeros(TableShape::snp_pair());
        t.counts_mut()[4] = 7;
        let basis = builtin_no3way_basis();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut walk = FiberWalk::new(&t, &basis).unwrap();
        for _ in 0..1000 {
            assert_eq!(walk.step(&mut rng), StepOutcome::Infeasible);
        }
        let (next, accepted) = mh_step(&t, &basis, &mut rng);
        assert!(!accepted);
        assert_eq!(next, t);

        let r = extended_fisher_test(&t, &basis, &small_config(1)).unwrap();
        assert_eq!(r.p_value, 1.0);
        assert_eq!(r.diagnostics.acceptance_rate, 0.0);
    }

    #[test]
    fn walk_preserves_margins() {
        let t = ContingencyTable::new(
            TableShape::snp_pair(),
            vec![3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5, 8, 9, 7, 9, 3, 2, 3],
        )
        .unwrap();
        let model = LogLinearModel::no_three_way();
        let want = margins(&t, &model).unwrap();
        let basis = builtin_no3way_basis();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut walk = FiberWalk::new(&t, &basis).unwrap();
        let mut accepted = 0;
        for _ in 0..5_000 {
            if walk.step(&mut rng) == StepOutcome::Accepted {
                accepted += 1;
            }
            let now = ContingencyTable::new(t.shape().clone(), walk.state().to_vec()).unwrap();
            assert_eq!(margins(&now, &model).unwrap(), want);
        }
        assert!(accepted > 0);
    }

    #[test]
    fn perfect_fit_gives_p_one() {
        // n_ijk = a_ij b_ik c_jk is its own no-3-way fit, so χ²_obs = 0.
        let s = TableShape::snp_pair();
        let mut counts = vec![0; 18];
        for i in 0..3 {
            for j in 0..3 {
                for k in 0..2 {
                    counts[s.cell_index(&[i, j, k])] = ((i + 1) * (j + 2) * (k + 1)) as u64;
                }
            }
        }
        let t = ContingencyTable::new(s, counts).unwrap();
        let r = extended_fisher_test(&t, &builtin_no3way_basis(), &small_config(9)).unwrap();
        assert!(r.observed_chi2 < 1e-9);
        assert_eq!(r.p_value, 1.0);
    }

    #[test]
    fn deterministic_given_seed() {
        let t = ContingencyTable::new(
            TableShape::snp_pair(),
            vec![3, 1, 4, 1, 5, 9, 2, 6, 5, 3, 5, 8, 9, 7, 9, 3, 2, 3],
        )
        .unwrap();
        let basis = builtin_no3way_basis();
        let a = extended_fisher_test(&t, &basis, &small_config(42)).unwrap();
        let b = extended_fisher_test(&t, &basis, &small_config(42)).unwrap();
        assert_eq!(a.p_value, b.p_value);
        assert_eq!(a.diagnostics.traces, b.diagnostics.traces);
        assert_eq!(a.n_samples, 3_000);
        assert!(a.diagnostics.acceptance_rate > 0.0 && a.diagnostics.acceptance_rate <= 1.0);
        let c = extended_fisher_test(&t, &basis, &small_config(43)).unwrap();
        assert_ne!(a.diagnostics.traces, c.diagnostics.traces);
    }

    #[test]
    fn shape_mismatch_is_rejected() {
        let t = ContingencyTable::zeros(TableShape::new(vec![2, 2]).unwrap());
        assert!(matches!(
            extended_fisher_test(&t, &builtin_no3way_basis(), &ChainConfig::default()),
            Err(SamplerError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn tail_tolerance() {
        assert!(in_tail(5.0, 5.0));
        assert!(in_tail(5.0 - 1e-12, 5.0));
        assert!(!in_tail(4.99, 5.0));
        assert!(in_tail(0.0, 0.0));
    }
}
