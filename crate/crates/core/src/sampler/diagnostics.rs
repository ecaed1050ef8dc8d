//! Convergence diagnostics for the χ² traces of parallel chains.

use std::fmt::Write as _;

use thiserror::Error;

/// Largest lag reported in [`ChainDiagnostics::autocorrelations`].
pub const MAX_LAG: usize = 50;
/// R̂ above this triggers a convergence warning.
pub const RHAT_WARN: f64 = 1.1;
/// Lag at which the autocorrelation warning is checked.
pub const ACF_WARN_LAG: usize = 10;
pub const ACF_WARN: f64 = 0.5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DiagnosticsError {
    #[error("Gelman-Rubin needs at least 2 chains, got {0}")]
    TooFewChains(usize),
    #[error("chains have unequal lengths")]
    UnequalLengths,
    #[error("chains must have at least 2 samples, got {0}")]
    TooShort(usize),
    #[error("lag {lag} is not below trace length {len}")]
    LagTooLarge { lag: usize, len: usize },
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GelmanRubin {
    pub r_hat: f64,
    /// Chains are individually constant but disagree; `r_hat` is infinite.
    pub diverged: bool,
}

fn mean(xs: &[f64]) -> f64 {
    xs.iter().sum::<f64>() / xs.len() as f64
}

fn sample_variance(xs: &[f64]) -> f64 {
    let m = mean(xs);
    xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (xs.len() as f64 - 1.0)
}

/// Potential scale reduction `sqrt(((n−1)/n·W + B/n) / W)`.
///
/// `W` is the mean within-chain variance and `B` is `n` times the variance of
/// the chain means. `W = 0` gives 1 when `B = 0` and a divergence flag
/// otherwise.
pub fn gelman_rubin(traces: &[Vec<f64>]) -> Result<GelmanRubin, DiagnosticsError> {
    if traces.len() < 2 {
        return Err(DiagnosticsError::TooFewChains(traces.len()));
    }
    let n = traces[0].len();
    if traces.iter().any(|t| t.len() != n) {
        return Err(DiagnosticsError::UnequalLengths);
    }
    if n < 2 {
        return Err(DiagnosticsError::TooShort(n));
    }
    let nf = n as f64;
    let means: Vec<f64> = traces.iter().map(|t| mean(t)).collect();
    let w = mean(&traces.iter().map(|t| sample_variance(t)).collect::<Vec<_>>());
    let b = nf * sample_variance(&means);
    if w == 0.0 {
        return Ok(if b == 0.0 {
            GelmanRubin { r_hat: 1.0, diverged: false }
        } else {
            GelmanRubin { r_hat: f64::INFINITY, diverged: true }
        });
    }
    let var_plus = (nf - 1.0) / nf * w + b / nf;
    Ok(GelmanRubin { r_hat: (var_plus / w).sqrt(), diverged: false })
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Autocorrelation {
    pub rho: f64,
    /// The trace is constant; `rho` is reported as 0.
    pub zero_variance: bool,
}

/// Sample autocorrelation at `lag`, mean-centered and normalized by the
/// lag-0 sum of squares.
pub fn autocorrelation(trace: &[f64], lag: usize) -> Result<Autocorrelation, DiagnosticsError> {
    if lag >= trace.len() {
        return Err(DiagnosticsError::LagTooLarge { lag, len: trace.len() });
    }
    let m = mean(trace);
    let denom: f64 = trace.iter().map(|x| (x - m) * (x - m)).sum();
    if denom == 0.0 {
        return Ok(Autocorrelation { rho: 0.0, zero_variance: true });
    }
    let numer: f64 = trace.iter().zip(&trace[lag..]).map(|(a, b)| (a - m) * (b - m)).sum();
    Ok(Autocorrelation { rho: numer / denom, zero_variance: false })
}

#[derive(Debug, Clone)]
pub struct ChainDiagnostics {
    /// Post-burn-in χ² trace per chain.
    pub traces: Vec<Vec<f64>>,
    /// `None` for a single chain.
    pub gelman_rubin: Option<GelmanRubin>,
    /// Chain-averaged autocorrelation at lags `1..=len` (entry `k − 1` is lag `k`).
    pub autocorrelations: Vec<f64>,
    /// Accepted proposals over all proposals, infeasible ones included.
    pub acceptance_rate: f64,
    pub warnings: Vec<String>,
}

impl ChainDiagnostics {
    pub(crate) fn from_traces(traces: Vec<Vec<f64>>, acceptance_rate: f64) -> Self {
        let gelman_rubin = gelman_rubin(&traces).ok();
        let len = traces.first().map_or(0, Vec::len);
        let max_lag = MAX_LAG.min(len.saturating_sub(1));
        let autocorrelations: Vec<f64> = (1..=max_lag)
            .map(|lag| {
                let rhos: Vec<f64> = traces
                    .iter()
                    .filter_map(|t| autocorrelation(t, lag).ok())
                    .map(|a| a.rho)
                    .collect();
                mean(&rhos)
            })
            .collect();

        let mut warnings = Vec::new();
        match gelman_rubin {
            Some(g) if g.diverged => warnings.push("chains are constant but disagree (R-hat diverged)".to_string()),
            Some(g) if g.r_hat > RHAT_WARN => {
                warnings.push(format!("R-hat {:.3} exceeds {RHAT_WARN}", g.r_hat))
            }
            _ => {}
        }
        if let Some(&rho) = autocorrelations.get(ACF_WARN_LAG - 1) {
            if rho > ACF_WARN {
                warnings.push(format!("lag-{ACF_WARN_LAG} autocorrelation {rho:.3} exceeds {ACF_WARN}"));
            }
        }
        ChainDiagnostics { traces, gelman_rubin, autocorrelations, acceptance_rate, warnings }
    }

    pub fn r_hat(&self) -> Option<f64> {
        self.gelman_rubin.map(|g| g.r_hat)
    }

    /// Traces as TSV: one row per retained sample, one column per chain.
    pub fn traces_tsv(&self) -> String {
        let mut out = String::from("sample");
        for c in 0..self.traces.len() {
            let _ = write!(out, "\tchain_{}", c + 1);
        }
        out.push('\n');
        let len = self.traces.first().map_or(0, Vec::len);
        for i in 0..len {
            let _ = write!(out, "{}", i + 1);
            for t in &self.traces {
                let _ = write!(out, "\t{}", t[i]);
            }
            out.push('\n');
        }
        out
    }

    /// Chain-averaged autocorrelations as TSV (`lag`, `acf`).
    pub fn autocorrelation_tsv(&self) -> String {
        let mut out = String::from("lag\tacf\n");
        for (k, rho) in self.autocorrelations.iter().enumerate() {
            let _ = writeln!(out, "{}\t{}", k + 1, rho);
        }
        out
    }
}
