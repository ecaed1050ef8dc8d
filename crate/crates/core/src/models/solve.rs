//! Numerical solving of model parameters from effect size and prevalence.
//!
//! With `β = α` (and `δ = 3α` for the multiplicative model) the two unknowns
//! `α` and `ε` are pinned by two equations, `λ(α, ε) = λ*` and
//! `π(α, ε) = π*`. The primary solver is damped Newton on `(ln α, ln ε)`; if
//! it stalls, a bracketing search (bisection on `ε` nested in golden-section
//! on `α`) supplies a new starting point.

use super::{effect_size, prevalence, InteractionModel, Locus, ModelError, ModelKind, PopulationSpec};

/// Required accuracy of both equations.
pub const SOLVER_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DesignTargets {
    pub effect_x: f64,
    pub effect_y: f64,
    pub prevalence: f64,
}

impl Default for DesignTargets {
    fn default() -> Self {
        DesignTargets { effect_x: 1.0, effect_y: 1.0, prevalence: 0.5 }
    }
}

impl DesignTargets {
    pub fn symmetric(effect: f64, prevalence: f64) -> Self {
        DesignTargets { effect_x: effect, effect_y: effect, prevalence }
    }

    fn validate(&self) -> Result<(), ModelError> {
        if !(self.prevalence > 0.0 && self.prevalence < 1.0) {
            return Err(ModelError::InfeasibleTargets(format!("prevalence {} outside (0, 1)", self.prevalence)));
        }
        for l in [self.effect_x, self.effect_y] {
            if !l.is_finite() || l <= -1.0 {
                return Err(ModelError::InfeasibleTargets(format!("effect size {l} must exceed -1")));
            }
        }
        Ok(())
    }
}

fn build(kind: ModelKind, log_alpha: f64, log_eps: f64) -> Option<InteractionModel> {
    let (a, e) = (log_alpha.exp(), log_eps.exp());
    match kind {
        ModelKind::Control => InteractionModel::control(e).ok(),
        ModelKind::Additive => InteractionModel::additive(e, a, a).ok(),
        ModelKind::Multiplicative => InteractionModel::multiplicative(e, a, a, 3.0 * a).ok(),
    }
}

struct System<'a> {
    kind: ModelKind,
    pop: &'a PopulationSpec,
    targets: &'a DesignTargets,
}

impl System<'_> {
    fn residual(&self, x: [f64; 2]) -> Option<[f64; 2]> {
        let m = build(self.kind, x[0], x[1])?;
        let l = effect_size(&m, self.pop, Locus::X).ok()?;
        let r = [l - self.targets.effect_x, prevalence(&m, self.pop) - self.targets.prevalence];
        (r[0].is_finite() && r[1].is_finite()).then_some(r)
    }

    fn norm(r: [f64; 2]) -> f64 {
        r[0].abs().max(r[1].abs())
    }

    fn newton(&self, mut x: [f64; 2], max_iter: usize) -> Option<([f64; 2], [f64; 2])> {
        let mut r = self.residual(x)?;
        for _ in 0..max_iter {
            if Self::norm(r) < 1e-13 {
                break;
            }
            let h = 1e-6;
            let mut jac = [[0.0; 2]; 2];
            for k in 0..2 {
                let mut xp = x;
                let mut xm = x;
                xp[k] += h;
                xm[k] -= h;
                let (rp, rm) = (self.residual(xp)?, self.residual(xm)?);
                jac[0][k] = (rp[0] - rm[0]) / (2.0 * h);
                jac[1][k] = (rp[1] - rm[1]) / (2.0 * h);
            }
            let det = jac[0][0] * jac[1][1] - jac[0][1] * jac[1][0];
            if det.abs() < 1e-300 || !det.is_finite() {
                return None;
            }
            let step = [
                (jac[1][1] * r[0] - jac[0][1] * r[1]) / det,
                (-jac[1][0] * r[0] + jac[0][0] * r[1]) / det,
            ];
            let mut t = 1.0;
            let mut improved = false;
            for _ in 0..40 {
                let cand = [x[0] - t * step[0], x[1] - t * step[1]];
                if let Some(rc) = self.residual(cand) {
                    if Self::norm(rc) < Self::norm(r) {
                        x = cand;
                        r = rc;
                        improved = true;
                        break;
                    }
                }
                t *= 0.5;
            }
            if !improved {
                break;
            }
        }
        Some((x, r))
    }

    /// `ln ε` matching the target prevalence for fixed `ln α`; prevalence is
    /// increasing in `ε`.
    fn eps_for_alpha(&self, log_alpha: f64) -> f64 {
        let (mut lo, mut hi) = (-60.0f64, 60.0f64);
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            let pi = build(self.kind, log_alpha, mid).map(|m| prevalence(&m, self.pop)).unwrap_or(f64::NAN);
            if pi < self.targets.prevalence {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    fn bracketed_start(&self) -> [f64; 2] {
        let objective = |u: f64| {
            let v = self.eps_for_alpha(u);
            self.residual([u, v]).map_or(f64::INFINITY, |r| r[0].abs())
        };
        let g = (5f64.sqrt() - 1.0) / 2.0;
        let (mut a, mut b) = (-10.0f64, 10.0f64);
        let mut c = b - g * (b - a);
        let mut d = a + g * (b - a);
        let (mut fc, mut fd) = (objective(c), objective(d));
        for _ in 0..200 {
            if fc < fd {
                b = d;
                d = c;
                fd = fc;
                c = b - g * (b - a);
                fc = objective(c);
            } else {
                a = c;
                c = d;
                fc = fd;
                d = a + g * (b - a);
                fd = objective(d);
            }
        }
        let u = 0.5 * (a + b);
        [u, self.eps_for_alpha(u)]
    }
}

/// Solves the model parameters for the given targets.
///
/// The control model ignores effect sizes and sets `ε = π/(1−π)`. The other
/// kinds constrain `β = α` (and `δ = 3α`), solve on locus X's effect size,
/// and require locus Y's effect to match its own target as well.
pub fn solve_params(kind: ModelKind, pop: &PopulationSpec, targets: &DesignTargets) -> Result<InteractionModel, ModelError> {
    targets.validate()?;
    if kind == ModelKind::Control {
        return InteractionModel::control(targets.prevalence / (1.0 - targets.prevalence));
    }
    let sys = System { kind, pop, targets };
    let odds = targets.prevalence / (1.0 - targets.prevalence);
    let start = [(1.0 + targets.effect_x).ln().max(0.1), odds.ln()];
    let mut solution = sys.newton(start, 200);
    if solution.is_none_or(|(_, r)| System::norm(r) >= SOLVER_TOLERANCE) {
        solution = sys.newton(sys.bracketed_start(), 200);
    }
    let Some((x, r)) = solution else {
        return Err(ModelError::NoConvergence { effect: f64::NAN, prevalence: f64::NAN });
    };
    if System::norm(r) >= SOLVER_TOLERANCE {
        return Err(ModelError::NoConvergence { effect: r[0], prevalence: r[1] });
    }
    let model = build(kind, x[0], x[1]).expect("solver iterates are finite");
    let ly = effect_size(&model, pop, Locus::Y)?;
    if (ly - targets.effect_y).abs() >= 1e-6 {
        return Err(ModelError::InfeasibleTargets(format!(
            "with beta = alpha, locus Y has effect {ly:.6} instead of {}",
            targets.effect_y
        )));
    }
    Ok(model)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn control_is_closed_form() {
        let pop = PopulationSpec::symmetric(0.25).unwrap();
        let m = solve_params(ModelKind::Control, &pop, &DesignTargets::default()).unwrap();
        assert_eq!(m.epsilon(), 1.0);
        let m = solve_params(ModelKind::Control, &pop, &DesignTargets::symmetric(1.0, 0.2)).unwrap();
        assert!((m.epsilon() - 0.25).abs() < 1e-15);
    }

    #[test]
    fn additive_round_trip() {
        let pop = PopulationSpec::symmetric(0.25).unwrap();
        let m = solve_params(ModelKind::Additive, &pop, &DesignTargets::default()).unwrap();
        assert_eq!(m.alpha(), m.beta());
        assert_eq!(m.delta(), 1.0);
        assert!((effect_size(&m, &pop, Locus::X).unwrap() - 1.0).abs() < 1e-6);
        assert!((prevalence(&m, &pop) - 0.5).abs() < 1e-6);
    }

    #[test]
    fn multiplicative_round_trip() {
        for maf in [0.1, 0.4] {
            let pop = PopulationSpec::symmetric(maf).unwrap();
            let m = solve_params(ModelKind::Multiplicative, &pop, &DesignTargets::default()).unwrap();
            assert_eq!(m.delta(), 3.0 * m.alpha());
            assert!((effect_size(&m, &pop, Locus::X).unwrap() - 1.0).abs() < 1e-6);
            assert!((effect_size(&m, &pop, Locus::Y).unwrap() - 1.0).abs() < 1e-6);
            assert!((prevalence(&m, &pop) - 0.5).abs() < 1e-6);
        }
    }

    #[test]
    fn bracketing_fallback_finds_same_root() {
        let pop = PopulationSpec::symmetric(0.25).unwrap();
        let targets = DesignTargets::default();
        let sys = System { kind: ModelKind::Multiplicative, pop: &pop, targets: &targets };
        let (x, r) = sys.newton(sys.bracketed_start(), 200).unwrap();
        assert!(System::norm(r) < SOLVER_TOLERANCE);
        let direct = solve_params(ModelKind::Multiplicative, &pop, &targets).unwrap();
        assert!((x[0].exp() - direct.alpha()).abs() < 1e-6);
    }

    #[test]
    fn infeasible_targets() {
        let pop = PopulationSpec::symmetric(0.25).unwrap();
        assert!(matches!(
            solve_params(ModelKind::Additive, &pop, &DesignTargets::symmetric(-1.5, 0.5)),
            Err(ModelError::InfeasibleTargets(_))
        ));
        assert!(matches!(
            solve_params(ModelKind::Additive, &pop, &DesignTargets::symmetric(1.0, 1.0)),
            Err(ModelError::InfeasibleTargets(_))
        ));
        let lopsided = PopulationSpec::new(0.1, 0.4).unwrap();
        assert!(matches!(
            solve_params(ModelKind::Multiplicative, &lopsided, &DesignTargets::default()),
            Err(ModelError::InfeasibleTargets(_))
        ));
    }
}
