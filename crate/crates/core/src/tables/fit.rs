//! Expected cell counts under a log-linear model.
//!
//! Decomposable models have product-form maximum likelihood estimates; the
//! rest (the no-3-way model among them) go through iterative proportional
//! fitting.

use super::support::facial_support;
use super::{
    facet_label, margins, ContingencyTable, FacetProjection, LogLinearModel, Margin, MarginSet, RealTable,
    TableError, TableShape,
};

#[derive(Debug, Clone)]
pub struct IpfOptions {
    /// Convergence threshold on the largest absolute margin deviation.
    pub tol: f64,
    /// Maximum number of full cycles over the facets.
    pub max_iter: usize,
    /// Facet visiting order within a cycle; defaults to model order.
    pub facet_order: Option<Vec<usize>>,
    /// Cells allowed to be positive; the starting table is their indicator.
    /// Defaults to every cell.
    pub support: Option<Vec<bool>>,
}

impl Default for IpfOptions {
    fn default() -> Self {
        IpfOptions { tol: 1e-10, max_iter: 10_000, facet_order: None, support: None }
    }
}

#[derive(Debug, Clone)]
pub struct IpfFit {
    pub fitted: RealTable,
    /// Number of completed cycles.
    pub iterations: usize,
    pub max_deviation: f64,
    pub converged: bool,
}

/// Margin over `sub_axes` (a subset of `margin.axes`), computed from `margin`.
fn sub_margin(margin: &Margin, sub_axes: &[usize]) -> Vec<f64> {
    let positions: Vec<usize> = sub_axes
        .iter()
        .map(|a| margin.axes.iter().position(|x| x == a).expect("sub-axis must belong to facet"))
        .collect();
    let mut sub_strides = Vec::with_capacity(positions.len());
    let mut s = 1;
    for &p in &positions {
        sub_strides.push(s);
        s *= margin.sizes[p];
    }
    let mut out = vec![0.0; s];
    for (entry, &count) in margin.counts.iter().enumerate() {
        let mut rest = entry;
        let mut coords = Vec::with_capacity(margin.sizes.len());
        for &size in &margin.sizes {
            coords.push(rest % size);
            rest /= size;
        }
        let idx: usize = positions.iter().zip(&sub_strides).map(|(&p, &st)| coords[p] * st).sum();
        out[idx] += count as f64;
    }
    out
}

fn intersection(a: &[usize], b: &[usize]) -> Vec<usize> {
    a.iter().copied().filter(|x| b.contains(x)).collect()
}

/// Checks that margins agree wherever their facets overlap.
fn check_consistency(targets: &MarginSet) -> Result<(), TableError> {
    let ms = targets.margins();
    let rank = targets.shape().rank();
    for i in 0..ms.len() {
        for j in i + 1..ms.len() {
            let common = intersection(&ms[i].axes, &ms[j].axes);
            if sub_margin(&ms[i], &common) != sub_margin(&ms[j], &common) {
                return Err(TableError::InconsistentMargins(format!(
                    "margins {} and {} disagree on their common axes",
                    facet_label(rank, &ms[i].axes),
                    facet_label(rank, &ms[j].axes)
                )));
            }
        }
    }
    Ok(())
}

/// Fits a table to the target margins by cyclic proportional scaling,
/// starting from the all-ones table.
///
/// Non-convergence is not an error: the best iterate is returned with
/// `converged == false`.
pub fn ipf_fit(targets: &MarginSet, shape: &TableShape, opts: &IpfOptions) -> Result<IpfFit, TableError> {
    targets.shape().check_same(shape)?;
    if opts.tol.is_nan() || opts.tol <= 0.0 {
        return Err(TableError::InconsistentMargins(format!("tolerance must be positive, got {}", opts.tol)));
    }
    check_consistency(targets)?;

    let projections: Vec<FacetProjection> =
        targets.margins().iter().map(|m| FacetProjection::new(shape, &m.axes)).collect();
    let goals: Vec<Vec<f64>> =
        targets.margins().iter().map(|m| m.counts.iter().map(|&c| c as f64).collect()).collect();
    let order: Vec<usize> = match &opts.facet_order {
        Some(o) => {
            let mut sorted = o.clone();
            sorted.sort_unstable();
            if sorted != (0..projections.len()).collect::<Vec<_>>() {
                return Err(TableError::InvalidFacets(format!("facet order {o:?} is not a permutation")));
            }
            o.clone()
        }
        None => (0..projections.len()).collect(),
    };

    let deviation = |fitted: &[f64]| -> f64 {
        projections
            .iter()
            .zip(&goals)
            .flat_map(|(p, g)| p.project(fitted).into_iter().zip(g.iter()).map(|(a, b)| (a - b).abs()).collect::<Vec<_>>())
            .fold(0.0, f64::max)
    };

    let mut fitted = match &opts.support {
        Some(s) if s.len() != shape.num_cells() => {
            return Err(TableError::InconsistentMargins(format!(
                "support has {} cells, table has {}",
                s.len(),
                shape.num_cells()
            )))
        }
        Some(s) => s.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect(),
        None => vec![1.0; shape.num_cells()],
    };
    let mut best = (f64::INFINITY, fitted.clone(), 0);
    for iteration in 1..=opts.max_iter {
        for &f in &order {
            let proj = &projections[f];
            let current = proj.project(&fitted);
            for (v, &e) in fitted.iter_mut().zip(&proj.cell_to_entry) {
                let c = current[e];
                *v = if c > 0.0 { *v * (goals[f][e] / c) } else { 0.0 };
            }
        }
        let dev = deviation(&fitted);
        if dev < best.0 {
            best = (dev, fitted.clone(), iteration);
        }
        if dev <= opts.tol {
            return Ok(IpfFit {
                fitted: RealTable { shape: shape.clone(), values: fitted },
                iterations: iteration,
                max_deviation: dev,
                converged: true,
            });
        }
    }
    let (max_deviation, values, _) = best;
    Ok(IpfFit {
        fitted: RealTable { shape: shape.clone(), values },
        iterations: opts.max_iter,
        max_deviation,
        converged: false,
    })
}

/// Facet ordering with the running intersection property, if one exists.
///
/// Such an ordering exists exactly when the model is decomposable, and then
/// the fitted table has the product form
/// `Π_j n_{F_j} / Π_{j≥2} n_{S_j}` with separators `S_j = F_j ∩ (F_1 ∪ … ∪ F_{j−1})`.
pub fn rip_ordering(model: &LogLinearModel) -> Option<Vec<usize>> {
    fn extend(facets: &[Vec<usize>], order: &mut Vec<usize>, used: &mut [bool]) -> bool {
        if order.len() == facets.len() {
            return true;
        }
        for cand in 0..facets.len() {
            if used[cand] {
                continue;
            }
            let covered: Vec<usize> = order.iter().flat_map(|&i| facets[i].iter().copied()).collect();
            let sep: Vec<usize> = facets[cand].iter().copied().filter(|a| covered.contains(a)).collect();
            let ok = order.is_empty() || order.iter().any(|&i| sep.iter().all(|a| facets[i].contains(a)));
            if ok {
                used[cand] = true;
                order.push(cand);
                if extend(facets, order, used) {
                    return true;
                }
                order.pop();
                used[cand] = false;
            }
        }
        false
    }
    let facets = model.facets();
    let mut order = Vec::with_capacity(facets.len());
    let mut used = vec![false; facets.len()];
    extend(facets, &mut order, &mut used).then_some(order)
}

/// Product-form fit for a decomposable model; `None` if the model is not
/// decomposable.
pub fn closed_form_fit(targets: &MarginSet) -> Result<Option<RealTable>, TableError> {
    let model = targets.model()?;
    let Some(order) = rip_ordering(&model) else {
        return Ok(None);
    };
    let shape = targets.shape();
    let ms = targets.margins();
    let n = shape.num_cells();
    let mut numer = vec![1.0f64; n];
    let mut denom = vec![1.0f64; n];
    let mut covered: Vec<usize> = Vec::new();
    for (pos, &fi) in order.iter().enumerate() {
        let m = &ms[fi];
        let proj = FacetProjection::new(shape, &m.axes);
        for (cell, &e) in proj.cell_to_entry.iter().enumerate() {
            numer[cell] *= m.counts[e] as f64;
        }
        if pos > 0 {
            let sep: Vec<usize> = m.axes.iter().copied().filter(|a| covered.contains(a)).collect();
            let sep_margin = sub_margin(m, &sep);
            let sep_proj = FacetProjection::new(shape, &sep);
            for (cell, &e) in sep_proj.cell_to_entry.iter().enumerate() {
                denom[cell] *= sep_margin[e];
            }
        }
        for &a in &m.axes {
            if !covered.contains(&a) {
                covered.push(a);
            }
        }
    }
    let values = numer
        .into_iter()
        .zip(denom)
        .map(|(a, b)| if b > 0.0 { a / b } else { 0.0 })
        .collect();
    Ok(Some(RealTable { shape: shape.clone(), values }))
}

/// Expected counts for fixed margins: closed form when decomposable,
/// otherwise IPF with default options. When IPF stalls on margins at the
/// boundary of the model, it is rerun restricted to the cells that some
/// table with those margins can make positive.
pub fn fit_margins(targets: &MarginSet) -> Result<RealTable, TableError> {
    if targets.total() == 0 {
        return Err(TableError::EmptyTable);
    }
    if let Some(t) = closed_form_fit(targets)? {
        return Ok(t);
    }
    let mut fit = ipf_fit(targets, targets.shape(), &IpfOptions::default())?;
    if !fit.converged {
        let support = facial_support(targets)?;
        fit = ipf_fit(targets, targets.shape(), &IpfOptions { support: Some(support), ..IpfOptions::default() })?;
    }
    if !fit.converged {
        return Err(TableError::IpfNotConverged { iterations: fit.iterations, max_deviation: fit.max_deviation });
    }
    Ok(fit.fitted)
}

/// Maximum likelihood expected counts of `table` under `model`.
pub fn expected_counts(table: &ContingencyTable, model: &LogLinearModel) -> Result<RealTable, TableError> {
    if table.total() == 0 {
        return Err(TableError::EmptyTable);
    }
    fit_margins(&margins(table, model)?)
}
