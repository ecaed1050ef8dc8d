//! Two-locus interaction models for a binary phenotype.
//!
//! Every model assigns the phenotype odds `ε·αⁱ·βʲ·δ^{ij}` to genotype pair
//! `(i, j)`, where `i` and `j` count minor alleles. The control model fixes
//! `α = β = δ = 1`, the additive model fixes `δ = 1`, and the multiplicative
//! model leaves all four free. Only `δ ≠ 1` produces a three-way interaction
//! with the phenotype.

mod simulate;
mod solve;

use thiserror::Error;

pub use simulate::{simulate_study, SimulatedStudy, NOISE_MAF_RANGE};
pub use solve::{solve_params, DesignTargets, SOLVER_TOLERANCE};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ModelError {
    #[error("invalid model parameters: {0}")]
    InvalidParameters(String),
    #[error("minor allele frequency {0} is outside (0, 0.5]")]
    InvalidMaf(f64),
    #[error("effect size undefined: {0}")]
    UndefinedEffect(String),
    #[error("infeasible design targets: {0}")]
    InfeasibleTargets(String),
    #[error("parameter solver did not converge (residuals: effect {effect:e}, prevalence {prevalence:e})")]
    NoConvergence { effect: f64, prevalence: f64 },
    #[error("case/control quota unreachable: {0}")]
    QuotaUnreachable(String),
    #[error("invalid study: {0}")]
    Study(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    Control,
    Additive,
    Multiplicative,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Control, ModelKind::Additive, ModelKind::Multiplicative];

    pub fn name(self) -> &'static str {
        match self {
            ModelKind::Control => "control",
            ModelKind::Additive => "additive",
            ModelKind::Multiplicative => "multiplicative",
        }
    }
}

impl std::str::FromStr for ModelKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "control" => Ok(ModelKind::Control),
            "additive" => Ok(ModelKind::Additive),
            "multiplicative" => Ok(ModelKind::Multiplicative),
            other => Err(format!("unknown interaction model {other:?}")),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct InteractionModel {
    kind: ModelKind,
    epsilon: f64,
    alpha: f64,
    beta: f64,
    delta: f64,
}

fn check_positive(name: &str, v: f64) -> Result<(), ModelError> {
    if v > 0.0 && v.is_finite() {
        Ok(())
    } else {
        Err(ModelError::InvalidParameters(format!("{name} must be positive and finite, got {v}")))
    }
}

impl InteractionModel {
    pub fn control(epsilon: f64) -> Result<Self, ModelError> {
        check_positive("epsilon", epsilon)?;
        Ok(InteractionModel { kind: ModelKind::Control, epsilon, alpha: 1.0, beta: 1.0, delta: 1.0 })
    }

    pub fn additive(epsilon: f64, alpha: f64, beta: f64) -> Result<Self, ModelError> {
        check_positive("epsilon", epsilon)?;
        check_positive("alpha", alpha)?;
        check_positive("beta", beta)?;
        Ok(InteractionModel { kind: ModelKind::Additive, epsilon, alpha, beta, delta: 1.0 })
    }

    pub fn multiplicative(epsilon: f64, alpha: f64, beta: f64, delta: f64) -> Result<Self, ModelError> {
        check_positive("epsilon", epsilon)?;
        check_positive("alpha", alpha)?;
        check_positive("beta", beta)?;
        check_positive("delta", delta)?;
        Ok(InteractionModel { kind: ModelKind::Multiplicative, epsilon, alpha, beta, delta })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn alpha(&self) -> f64 {
        self.alpha
    }

    pub fn beta(&self) -> f64 {
        self.beta
    }

    pub fn delta(&self) -> f64 {
        self.delta
    }

    /// Odds of phenotype 1 at genotype pair `(i, j)`.
    pub fn odds(&self, i: usize, j: usize) -> f64 {
        assert!(i < 3 && j < 3, "genotype codes are 0, 1, 2");
        self.epsilon * self.alpha.powi(i as i32) * self.beta.powi(j as i32) * self.delta.powi((i * j) as i32)
    }

    /// `P(D = 1 | X = i, Y = j)`.
    pub fn penetrance(&self, i: usize, j: usize) -> f64 {
        let o = self.odds(i, j);
        if o.is_infinite() {
            1.0
        } else {
            o / (1.0 + o)
        }
    }
}

pub fn penetrance(model: &InteractionModel, i: usize, j: usize) -> f64 {
    model.penetrance(i, j)
}

/// Hardy-Weinberg genotype frequencies `((1−q)², 2q(1−q), q²)`.
pub fn hardy_weinberg(maf: f64) -> [f64; 3] {
    [(1.0 - maf) * (1.0 - maf), 2.0 * maf * (1.0 - maf), maf * maf]
}

/// Minor allele frequencies of two independent loci in Hardy-Weinberg
/// equilibrium.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PopulationSpec {
    maf_x: f64,
    maf_y: f64,
}

impl PopulationSpec {
    pub fn new(maf_x: f64, maf_y: f64) -> Result<Self, ModelError> {
        for maf in [maf_x, maf_y] {
            if !(maf > 0.0 && maf <= 0.5) {
                return Err(ModelError::InvalidMaf(maf));
            }
        }
        Ok(PopulationSpec { maf_x, maf_y })
    }

    pub fn symmetric(maf: f64) -> Result<Self, ModelError> {
        Self::new(maf, maf)
    }

    pub fn maf_x(&self) -> f64 {
        self.maf_x
    }

    pub fn maf_y(&self) -> f64 {
        self.maf_y
    }

    pub fn genotype_freqs(&self, locus: Locus) -> [f64; 3] {
        match locus {
            Locus::X => hardy_weinberg(self.maf_x),
            Locus::Y => hardy_weinberg(self.maf_y),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Locus {
    X,
    Y,
}

/// Population prevalence `Σ_{i,j} P(D=1|i,j)·P(i)·P(j)`.
pub fn prevalence(model: &InteractionModel, pop: &PopulationSpec) -> f64 {
    let px = pop.genotype_freqs(Locus::X);
    let py = pop.genotype_freqs(Locus::Y);
    let mut pi = 0.0;
    for (i, &fx) in px.iter().enumerate() {
        for (j, &fy) in py.iter().enumerate() {
            pi += model.penetrance(i, j) * fx * fy;
        }
    }
    pi
}

/// `P(D = 1 | locus = g)`, marginalized over the other locus.
pub fn marginal_penetrance(model: &InteractionModel, pop: &PopulationSpec, locus: Locus, g: usize) -> f64 {
    match locus {
        Locus::X => {
            let py = pop.genotype_freqs(Locus::Y);
            (0..3).map(|j| model.penetrance(g, j) * py[j]).sum()
        }
        Locus::Y => {
            let px = pop.genotype_freqs(Locus::X);
            (0..3).map(|i| model.penetrance(i, g) * px[i]).sum()
        }
    }
}

/// Marginal odds ratio of heterozygotes against major homozygotes, minus one.
pub fn effect_size(model: &InteractionModel, pop: &PopulationSpec, locus: Locus) -> Result<f64, ModelError> {
    let p0 = marginal_penetrance(model, pop, locus, 0);
    let p1 = marginal_penetrance(model, pop, locus, 1);
    for (g, p) in [(0, p0), (1, p1)] {
        if !(p > 0.0 && p < 1.0) {
            return Err(ModelError::UndefinedEffect(format!("P(D=1 | g={g}) = {p}")));
        }
    }
    Ok((p1 / (1.0 - p1)) * ((1.0 - p0) / p0) - 1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_penetrance_is_half() {
        let m = InteractionModel::control(1.0).unwrap();
        for i in 0..3 {
            for j in 0..3 {
                assert_eq!(m.penetrance(i, j), 0.5);
            }
        }
        let pop = PopulationSpec::new(0.1, 0.3).unwrap();
        assert!((prevalence(&m, &pop) - 0.5).abs() < 1e-15);
        assert_eq!(effect_size(&m, &pop, Locus::X).unwrap(), 0.0);
        assert_eq!(effect_size(&m, &pop, Locus::Y).unwrap(), 0.0);
    }

    #[test]
    fn odds_tables() {
        let (e, a, b, d) = (0.3, 1.7, 1.4, 2.2);
        let m = InteractionModel::multiplicative(e, a, b, d).unwrap();
        assert!((m.odds(2, 2) - e * a * a * b * b * d.powi(4)).abs() < 1e-12);
        assert!((m.odds(1, 2) - e * a * b * b * d * d).abs() < 1e-12);
        assert!((m.odds(2, 1) - e * a * a * b * d * d).abs() < 1e-12);
        let add = InteractionModel::additive(e, a, b).unwrap();
        assert!((add.odds(1, 2) - e * a * b * b).abs() < 1e-12);
        assert_eq!(add.delta(), 1.0);
        // odds(i,j) = odds(i,0) odds(0,j) δ^{ij} / odds(0,0)
        for i in 0..3 {
            for j in 0..3 {
                let f = m.odds(i, 0) * m.odds(0, j) * d.powi((i * j) as i32) / m.odds(0, 0);
                assert!((m.odds(i, j) - f).abs() < 1e-12 * f);
            }
        }
    }

    #[test]
    fn vanishing_odds_vanishing_prevalence() {
        let pop = PopulationSpec::symmetric(0.25).unwrap();
        let m = InteractionModel::multiplicative(1e-12, 2.0, 2.0, 3.0).unwrap();
        assert!(prevalence(&m, &pop) < 1e-9);
    }

    #[test]
    fn symmetric_effects() {
        let pop = PopulationSpec::symmetric(0.2).unwrap();
        let m = InteractionModel::multiplicative(0.4, 1.5, 1.5, 2.0).unwrap();
        let lx = effect_size(&m, &pop, Locus::X).unwrap();
        let ly = effect_size(&m, &pop, Locus::Y).unwrap();
        assert!((lx - ly).abs() < 1e-12);
        assert!(lx > 0.0);
    }

    #[test]
    fn parameter_validation() {
        assert!(InteractionModel::control(0.0).is_err());
        assert!(InteractionModel::additive(1.0, -1.0, 1.0).is_err());
        assert!(InteractionModel::multiplicative(1.0, 1.0, 1.0, f64::NAN).is_err());
        assert!(PopulationSpec::new(0.0, 0.1).is_err());
        assert!(PopulationSpec::new(0.6, 0.1).is_err());
        assert!(PopulationSpec::new(0.5, 0.1).is_ok());
    }

    #[test]
    fn hardy_weinberg_sums_to_one() {
        for q in [0.05, 0.1, 0.25, 0.4, 0.5] {
            let f = hardy_weinberg(q);
            assert!((f.iter().sum::<f64>() - 1.0).abs() < 1e-15);
        }
    }
}
