//! Case-control study simulation by rejection sampling.
//!
//! Individuals are drawn from the population (two independent loci in
//! Hardy-Weinberg equilibrium), assigned a phenotype from the model's
//! penetrance, and kept until both the case and control quotas are filled.
//! Optional noise SNPs are independent of everything else.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{hardy_weinberg, InteractionModel, Locus, ModelError, PopulationSpec};
use crate::pipeline::Study;

/// Noise SNP minor allele frequencies are uniform on this range.
pub const NOISE_MAF_RANGE: (f64, f64) = (0.05, 0.5);

#[derive(Debug, Clone)]
pub struct SimulatedStudy {
    pub study: Study,
    /// Column indices of the two causative SNPs (X, Y).
    pub causal: [usize; 2],
    /// Individuals drawn before both quotas were met.
    pub draws: u64,
    /// Cases among all draws, kept or not.
    pub cases_drawn: u64,
}

impl SimulatedStudy {
    /// Case fraction among all draws, an estimate of the prevalence.
    pub fn case_fraction_before_rejection(&self) -> f64 {
        self.cases_drawn as f64 / self.draws as f64
    }
}

fn draw_genotype<R: Rng + ?Sized>(rng: &mut R, freqs: &[f64; 3]) -> u8 {
    let u: f64 = rng.random();
    if u < freqs[0] {
        0
    } else if u < freqs[0] + freqs[1] {
        1
    } else {
        2
    }
}

/// Simulates `n_cases` cases and `n_controls` controls. With `n_noise_snps > 0`
/// the two causative SNPs are placed at random columns among the noise SNPs.
pub fn simulate_study(
    model: &InteractionModel,
    pop: &PopulationSpec,
    n_cases: usize,
    n_controls: usize,
    n_noise_snps: usize,
    seed: u64,
) -> Result<SimulatedStudy, ModelError> {
    if n_cases == 0 || n_controls == 0 {
        return Err(ModelError::QuotaUnreachable("need at least one case and one control".into()));
    }
    let px = pop.genotype_freqs(Locus::X);
    let py = pop.genotype_freqs(Locus::Y);
    let pens: Vec<f64> = (0..3).flat_map(|i| (0..3).map(move |j| (i, j))).map(|(i, j)| model.penetrance(i, j)).collect();
    if pens.iter().all(|&p| p == 0.0) {
        return Err(ModelError::QuotaUnreachable("penetrance is identically 0".into()));
    }
    if pens.iter().all(|&p| p == 1.0) {
        return Err(ModelError::QuotaUnreachable("penetrance is identically 1".into()));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = n_cases + n_controls;
    let mut phenotypes = Vec::with_capacity(n);
    let mut gx = Vec::with_capacity(n);
    let mut gy = Vec::with_capacity(n);
    let (mut cases, mut controls) = (0usize, 0usize);
    let (mut draws, mut cases_drawn) = (0u64, 0u64);
    while cases < n_cases || controls < n_controls {
        let i = draw_genotype(&mut rng, &px);
        let j = draw_genotype(&mut rng, &py);
        let d = rng.random::<f64>() < model.penetrance(i as usize, j as usize);
        draws += 1;
        if d {
            cases_drawn += 1;
            if cases < n_cases {
                cases += 1;
            } else {
                continue;
            }
        } else if controls < n_controls {
            controls += 1;
        } else {
            continue;
        }
        phenotypes.push(d as u8);
        gx.push(i);
        gy.push(j);
    }

    let m = n_noise_snps + 2;
    let causal = if n_noise_snps == 0 {
        [0, 1]
    } else {
        let a = rng.random_range(0..m);
        let mut b = rng.random_range(0..m - 1);
        if b >= a {
            b += 1;
        }
        [a, b]
    };
    let mut columns = Vec::with_capacity(m);
    let mut causal_cols = [Some(gx), Some(gy)];
    for col in 0..m {
        if let Some(k) = causal.iter().position(|&c| c == col) {
            columns.push(causal_cols[k].take().expect("each causal column used once"));
        } else {
            let maf = rng.random_range(NOISE_MAF_RANGE.0..=NOISE_MAF_RANGE.1);
            let freqs = hardy_weinberg(maf);
            columns.push((0..n).map(|_| draw_genotype(&mut rng, &freqs)).collect());
        }
    }
    let ids = (0..m).map(|j| format!("chr1.{}", (j + 1) * 1000)).collect();
    let study = Study::new(phenotypes, columns, Some(ids)).map_err(|e| ModelError::Study(e.to_string()))?;
    Ok(SimulatedStudy { study, causal, draws, cases_drawn })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::models::{solve_params, DesignTargets, ModelKind};

    #[test]
    fn quotas_and_layout() {
        let pop = PopulationSpec::symmetric(0.25).unwrap();
        let m = InteractionModel::control(1.0).unwrap();
        let sim = simulate_study(&m, &pop, 30, 20, 0, 1).unwrap();
        assert_eq!(sim.causal, [0, 1]);
        assert_eq!(sim.study.n_individuals(), 50);
        assert_eq!(sim.study.n_cases(), 30);
        assert_eq!(sim.study.n_snps(), 2);

        let sim = simulate_study(&m, &pop, 30, 20, 8, 2).unwrap();
        assert_eq!(sim.study.n_snps(), 10);
        assert_ne!(sim.causal[0], sim.causal[1]);
        assert!(sim.causal.iter().all(|&c| c < 10));
    }

    #[test]
    fn deterministic() {
        let pop = PopulationSpec::symmetric(0.25).unwrap();
        let m = InteractionModel::control(1.0).unwrap();
        let a = simulate_study(&m, &pop, 40, 40, 5, 77).unwrap();
        let b = simulate_study(&m, &pop, 40, 40, 5, 77).unwrap();
        assert_eq!(a.study, b.study);
        assert_eq!(a.causal, b.causal);
    }

    #[test]
    fn unreachable_quota() {
        let pop = PopulationSpec::symmetric(0.25).unwrap();
        let m = InteractionModel::control(1.0).unwrap();
        assert!(simulate_study(&m, &pop, 0, 10, 0, 1).is_err());
        // Odds this large round the penetrance to exactly 1.
        let m = InteractionModel::control(f64::MAX).unwrap();
        assert!(matches!(simulate_study(&m, &pop, 5, 5, 0, 1), Err(ModelError::QuotaUnreachable(_))));
    }

    #[test]
    fn prevalence_round_trip_at_800() {
        let pop = PopulationSpec::symmetric(0.25).unwrap();
        let m = solve_params(ModelKind::Multiplicative, &pop, &DesignTargets::default()).unwrap();
        let sim = simulate_study(&m, &pop, 400, 400, 0, 5).unwrap();
        assert!((sim.case_fraction_before_rejection() - 0.5).abs() < 0.05);
    }
}
