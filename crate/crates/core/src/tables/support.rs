//! Cells that can be positive in some nonnegative table with given margins.
//!
//! When the observed margins sit on the boundary of the model, the maximum
//! likelihood fit has zeros outside this set and IPF from all-ones only
//! approaches them at a sublinear rate. Restricting IPF to the set restores
//! fast convergence.

use microlp::{ComparisonOp, OptimizationDirection, Problem};

use super::{FacetProjection, MarginSet, TableError};

/// Values above this count as positive in a linear programming solution.
const POSITIVE: f64 = 1e-9;

/// Per cell, whether some real nonnegative table with the target margins is
/// positive there.
///
/// Each round maximizes `Σ y_c` over the still-undecided cells subject to
/// the margins, `0 ≤ y_c ≤ min(1, x_c)`; every cell with `y_c > 0` is
/// positive somewhere, and a round with objective 0 proves the remaining
/// cells are zero throughout.
pub fn facial_support(targets: &MarginSet) -> Result<Vec<bool>, TableError> {
    let shape = targets.shape();
    let n = shape.num_cells();
    let projections: Vec<FacetProjection> =
        targets.margins().iter().map(|m| FacetProjection::new(shape, &m.axes)).collect();

    let mut positive = vec![false; n];
    let mut undecided: Vec<usize> = (0..n)
        .filter(|&c| projections.iter().zip(targets.margins()).all(|(p, m)| m.counts[p.cell_to_entry[c]] > 0))
        .collect();

    while !undecided.is_empty() {
        let mut lp = Problem::new(OptimizationDirection::Maximize);
        let x: Vec<_> = (0..n).map(|_| lp.add_var(0.0, (0.0, f64::INFINITY))).collect();
        let y: Vec<_> = undecided.iter().map(|_| lp.add_var(1.0, (0.0, 1.0))).collect();
        for (proj, margin) in projections.iter().zip(targets.margins()) {
            let mut rows: Vec<Vec<(microlp::Variable, f64)>> = vec![Vec::new(); proj.num_entries];
            for (c, &e) in proj.cell_to_entry.iter().enumerate() {
                rows[e].push((x[c], 1.0));
            }
            for (row, &count) in rows.into_iter().zip(&margin.counts) {
                lp.add_constraint(row, ComparisonOp::Eq, count as f64);
            }
        }
        for (&c, &yc) in undecided.iter().zip(&y) {
            lp.add_constraint([(yc, 1.0), (x[c], -1.0)], ComparisonOp::Le, 0.0);
        }
        let outcome = lp
            .solve()
            .map_err(|e| TableError::InconsistentMargins(format!("margins admit no nonnegative table: {e}")))?;
        let solution = outcome
            .solution()
            .ok_or_else(|| TableError::InconsistentMargins("linear program interrupted".into()))?;
        let found: Vec<usize> =
            undecided.iter().zip(&y).filter(|(_, &yc)| solution[yc] > POSITIVE).map(|(&c, _)| c).collect();
        if found.is_empty() {
            break;
        }
        for &c in &found {
            positive[c] = true;
        }
        undecided.retain(|c| !positive[*c]);
    }
    Ok(positive)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tables::{margins, ContingencyTable, LogLinearModel, TableShape};

    #[test]
    fn interior_table_supports_every_cell() {
        let t = ContingencyTable::filled(TableShape::snp_pair(), 1);
        let s = facial_support(&margins(&t, &LogLinearModel::no_three_way()).unwrap()).unwrap();
        assert!(s.iter().all(|&b| b));
    }

    #[test]
    fn zero_margin_cells_are_excluded() {
        let mut t = ContingencyTable::filled(TableShape::snp_pair(), 2);
        // Empty the (X=0, Y=0) column of both phenotypes.
        t.counts_mut()[0] = 0;
        t.counts_mut()[9] = 0;
        let s = facial_support(&margins(&t, &LogLinearModel::no_three_way()).unwrap()).unwrap();
        assert!(!s[0] && !s[9]);
        assert_eq!(s.iter().filter(|&&b| b).count(), 16);
    }

    #[test]
    fn antipodal_zeros_stay_zero() {
        // Zeros at (0,0,0) and (1,1,1) of a 2x2x2 table are forced by the
        // two-way margins jointly although every margin entry is positive.
        let shape = TableShape::new(vec![2, 2, 2]).unwrap();
        let t = ContingencyTable::new(shape, vec![0, 1, 1, 1, 1, 1, 1, 0]).unwrap();
        let model = LogLinearModel::no_highest_interaction(t.shape().clone());
        let s = facial_support(&margins(&t, &model).unwrap()).unwrap();
        assert_eq!(s, vec![false, true, true, true, true, true, true, false]);
        let fit = crate::tables::fit_margins(&margins(&t, &model).unwrap()).unwrap();
        assert_eq!((fit.values()[0], fit.values()[7]), (0.0, 0.0));
    }
}
