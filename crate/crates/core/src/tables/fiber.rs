//! Exhaustive enumeration of small fibers.
//!
//! Used as an exact oracle for the MCMC test: every nonnegative integer table
//! with the given margins, weighted by the conditional hypergeometric law
//! `∝ 1 / Π n_c!`.

use super::{ContingencyTable, FacetProjection, MarginSet, TableError, TableShape};
use crate::lnfact::LnFactorial;

/// Largest grand total [`enumerate_fiber`] accepts.
pub const DEFAULT_FIBER_CAP: u64 = 40;

#[derive(Debug, Clone)]
pub struct Fiber {
    pub tables: Vec<ContingencyTable>,
    /// Normalized hypergeometric weights, parallel to `tables`.
    pub weights: Vec<f64>,
}

impl Fiber {
    pub fn len(&self) -> usize {
        self.tables.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tables.is_empty()
    }

    pub fn position(&self, table: &ContingencyTable) -> Option<usize> {
        self.tables.iter().position(|t| t == table)
    }
}

pub fn enumerate_fiber(margins: &MarginSet, shape: &TableShape) -> Result<Fiber, TableError> {
    enumerate_fiber_capped(margins, shape, DEFAULT_FIBER_CAP)
}

struct Search<'a> {
    /// Margin-entry groups each cell belongs to.
    cell_groups: Vec<Vec<usize>>,
    /// Groups whose last cell (in flat order) is this cell.
    closes: Vec<Vec<usize>>,
    remaining: Vec<u64>,
    current: Vec<u64>,
    found: &'a mut Vec<Vec<u64>>,
}

impl Search<'_> {
    fn descend(&mut self, cell: usize) {
        if cell == self.current.len() {
            self.found.push(self.current.clone());
            return;
        }
        let cap = self.cell_groups[cell].iter().map(|&g| self.remaining[g]).min().unwrap_or(0);
        let (lo, hi) = match self.closes[cell].first() {
            Some(&g) => {
                let forced = self.remaining[g];
                if self.closes[cell].iter().any(|&h| self.remaining[h] != forced) || forced > cap {
                    return;
                }
                (forced, forced)
            }
            None => (0, cap),
        };
        for v in lo..=hi {
            self.current[cell] = v;
            for &g in &self.cell_groups[cell] {
                self.remaining[g] -= v;
            }
            self.descend(cell + 1);
            for &g in &self.cell_groups[cell] {
                self.remaining[g] += v;
            }
        }
        self.current[cell] = 0;
    }
}

/// All tables with the given margins. Refuses grand totals above `cap`.
pub fn enumerate_fiber_capped(margins: &MarginSet, shape: &TableShape, cap: u64) -> Result<Fiber, TableError> {
    margins.shape().check_same(shape)?;
    let total = margins.total();
    if total > cap {
        return Err(TableError::FiberTooLarge { total, cap });
    }
    let n = shape.num_cells();
    let mut cell_groups = vec![Vec::new(); n];
    let mut closes = vec![Vec::new(); n];
    let mut remaining = Vec::new();
    for m in margins.margins() {
        let proj = FacetProjection::new(shape, &m.axes);
        let base = remaining.len();
        remaining.extend_from_slice(&m.counts);
        let mut last = vec![0usize; proj.num_entries];
        for (cell, &e) in proj.cell_to_entry.iter().enumerate() {
            cell_groups[cell].push(base + e);
            last[e] = cell;
        }
        for (e, &cell) in last.iter().enumerate() {
            closes[cell].push(base + e);
        }
    }

    let mut found = Vec::new();
    Search { cell_groups, closes, remaining, current: vec![0; n], found: &mut found }.descend(0);

    let lf = LnFactorial::new(total);
    let log_w: Vec<f64> = found.iter().map(|c| -lf.sum(c)).collect();
    let max = log_w.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let raw: Vec<f64> = log_w.iter().map(|w| (w - max).exp()).collect();
    let z: f64 = raw.iter().sum();
    let tables = found
        .into_iter()
        .map(|c| ContingencyTable::new(shape.clone(), c))
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Fiber { tables, weights: raw.into_iter().map(|w| w / z).collect() })
}
