//! Contingency tables over a small number of discrete axes.
//!
//! Cells are stored flat with the first axis varying fastest, so the canonical
//! 3×3×2 table `(X, Y, D)` is laid out as
//! `(n111, n211, n311, n121, …, n332)`.

mod fiber;
mod fit;
mod support;

use std::fmt;
use std::ops::AddAssign;
use std::str::FromStr;

use thiserror::Error;

pub use support::facial_support;
pub use fiber::{enumerate_fiber, enumerate_fiber_capped, Fiber, DEFAULT_FIBER_CAP};
pub use fit::{
    closed_form_fit, expected_counts, fit_margins, ipf_fit, rip_ordering, IpfFit, IpfOptions,
};

/// Tables with more axes than this are rejected.
pub const MAX_AXES: usize = 5;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum TableError {
    #[error("invalid table shape {0:?}: need 2..={MAX_AXES} axes, each of size >= 2")]
    InvalidShape(Vec<usize>),
    #[error("table shape {shape:?} has {expected} cells but {found} counts were given")]
    LengthMismatch {
        shape: Vec<usize>,
        expected: usize,
        found: usize,
    },
    #[error("shape mismatch: {left:?} vs {right:?}")]
    ShapeMismatch { left: Vec<usize>, right: Vec<usize> },
    #[error("invalid facet set: {0}")]
    InvalidFacets(String),
    #[error("table total is zero")]
    EmptyTable,
    #[error("margins are inconsistent: {0}")]
    InconsistentMargins(String),
    #[error("cell {cell} has observed count {observed} but expected count 0")]
    StructuralZeroViolation { cell: usize, observed: u64 },
    #[error("expected count at cell {cell} is negative or not finite ({value})")]
    InvalidExpected { cell: usize, value: f64 },
    #[error("fiber enumeration refused: total {total} exceeds cap {cap}")]
    FiberTooLarge { total: u64, cap: u64 },
    #[error("iterative proportional fitting did not converge after {iterations} cycles (max margin deviation {max_deviation:e})")]
    IpfNotConverged { iterations: usize, max_deviation: f64 },
    #[error("table parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
}

/// Axis sizes of a table.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct TableShape {
    axis_sizes: Vec<usize>,
}

impl TableShape {
    pub fn new(axis_sizes: Vec<usize>) -> Result<Self, TableError> {
        if axis_sizes.len() < 2 || axis_sizes.len() > MAX_AXES || axis_sizes.iter().any(|&s| s < 2) {
            return Err(TableError::InvalidShape(axis_sizes));
        }
        Ok(TableShape { axis_sizes })
    }

    /// The canonical `3×3×2` shape for two SNPs and a binary phenotype.
    pub fn snp_pair() -> Self {
        TableShape { axis_sizes: vec![3, 3, 2] }
    }

    /// `3×…×3×2` with `n_snps` genotype axes and a trailing phenotype axis.
    pub fn snp_set(n_snps: usize) -> Result<Self, TableError> {
        let mut sizes = vec![3; n_snps];
        sizes.push(2);
        TableShape::new(sizes)
    }

    pub fn axis_sizes(&self) -> &[usize] {
        &self.axis_sizes
    }

    pub fn rank(&self) -> usize {
        self.axis_sizes.len()
    }

    pub fn num_cells(&self) -> usize {
        self.axis_sizes.iter().product()
    }

    pub fn strides(&self) -> Vec<usize> {
        strides_of(&self.axis_sizes)
    }

    pub fn cell_index(&self, coords: &[usize]) -> usize {
        debug_assert_eq!(coords.len(), self.rank());
        let mut idx = 0;
        let mut stride = 1;
        for (&c, &s) in coords.iter().zip(&self.axis_sizes) {
            debug_assert!(c < s);
            idx += c * stride;
            stride *= s;
        }
        idx
    }

    pub fn coords(&self, mut cell: usize) -> Vec<usize> {
        self.axis_sizes
            .iter()
            .map(|&s| {
                let c = cell % s;
                cell /= s;
                c
            })
            .collect()
    }

    fn check_same(&self, other: &TableShape) -> Result<(), TableError> {
        if self != other {
            return Err(TableError::ShapeMismatch {
                left: self.axis_sizes.clone(),
                right: other.axis_sizes.clone(),
            });
        }
        Ok(())
    }
}

fn strides_of(sizes: &[usize]) -> Vec<usize> {
    let mut strides = Vec::with_capacity(sizes.len());
    let mut s = 1;
    for &n in sizes {
        strides.push(s);
        s *= n;
    }
    strides
}

/// Label used for an axis in messages: genotype axes are `X`, `Y`, `Z`, `W`
/// and the last axis is the phenotype `D`.
pub fn axis_label(rank: usize, axis: usize) -> String {
    const SNP_LABELS: [&str; 4] = ["X", "Y", "Z", "W"];
    if axis + 1 == rank {
        "D".to_string()
    } else {
        SNP_LABELS.get(axis).map(|s| s.to_string()).unwrap_or_else(|| format!("A{axis}"))
    }
}

/// Renders a facet such as `{X,Y}`.
pub fn facet_label(rank: usize, axes: &[usize]) -> String {
    let names: Vec<String> = axes.iter().map(|&a| axis_label(rank, a)).collect();
    format!("{{{}}}", names.join(","))
}

/// A dense table of nonnegative integer counts.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct ContingencyTable {
    shape: TableShape,
    counts: Vec<u64>,
}

impl ContingencyTable {
    pub fn new(shape: TableShape, counts: Vec<u64>) -> Result<Self, TableError> {
        if counts.len() != shape.num_cells() {
            return Err(TableError::LengthMismatch {
                shape: shape.axis_sizes.clone(),
                expected: shape.num_cells(),
                found: counts.len(),
            });
        }
        Ok(ContingencyTable { shape, counts })
    }

    pub fn zeros(shape: TableShape) -> Self {
        let n = shape.num_cells();
        ContingencyTable { shape, counts: vec![0; n] }
    }

    pub fn filled(shape: TableShape, value: u64) -> Self {
        let n = shape.num_cells();
        ContingencyTable { shape, counts: vec![value; n] }
    }

    pub fn shape(&self) -> &TableShape {
        &self.shape
    }

    pub fn counts(&self) -> &[u64] {
        &self.counts
    }

    pub fn counts_mut(&mut self) -> &mut [u64] {
        &mut self.counts
    }

    pub fn into_counts(self) -> Vec<u64> {
        self.counts
    }

    pub fn get(&self, coords: &[usize]) -> u64 {
        self.counts[self.shape.cell_index(coords)]
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }

    pub fn to_real(&self) -> RealTable {
        RealTable {
            shape: self.shape.clone(),
            values: self.counts.iter().map(|&c| c as f64).collect(),
        }
    }

    /// Text form: a header line of axis sizes, then the flat counts.
    pub fn to_text(&self) -> String {
        let header: Vec<String> = self.shape.axis_sizes.iter().map(|s| s.to_string()).collect();
        let body: Vec<String> = self.counts.iter().map(|c| c.to_string()).collect();
        format!("{}\n{}\n", header.join(" "), body.join(" "))
    }
}

impl fmt::Display for ContingencyTable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_text())
    }
}

impl FromStr for ContingencyTable {
    type Err = TableError;

    /// Parses the text form. `#` starts a comment; counts may span lines.
    fn from_str(text: &str) -> Result<Self, Self::Err> {
        let mut header: Option<(usize, TableShape)> = None;
        let mut counts = Vec::new();
        for (lineno, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let parse_err = |message: String| TableError::Parse { line: lineno + 1, message };
            if header.is_none() {
                let sizes = line
                    .split_whitespace()
                    .map(|t| t.parse::<usize>().map_err(|e| parse_err(format!("bad axis size {t:?}: {e}"))))
                    .collect::<Result<Vec<_>, _>>()?;
                let shape = TableShape::new(sizes).map_err(|e| parse_err(e.to_string()))?;
                header = Some((lineno + 1, shape));
                continue;
            }
            for tok in line.split_whitespace() {
                let c = tok
                    .parse::<u64>()
                    .map_err(|e| parse_err(format!("bad count {tok:?}: {e}")))?;
                counts.push(c);
            }
        }
        let (line, shape) = header.ok_or(TableError::Parse { line: 1, message: "missing header".into() })?;
        ContingencyTable::new(shape, counts).map_err(|e| TableError::Parse { line, message: e.to_string() })
    }
}

/// A dense real-valued table (fitted or expected counts).
#[derive(Debug, Clone, PartialEq)]
pub struct RealTable {
    shape: TableShape,
    values: Vec<f64>,
}

impl RealTable {
    pub fn new(shape: TableShape, values: Vec<f64>) -> Result<Self, TableError> {
        if values.len() != shape.num_cells() {
            return Err(TableError::LengthMismatch {
                shape: shape.axis_sizes.clone(),
                expected: shape.num_cells(),
                found: values.len(),
            });
        }
        Ok(RealTable { shape, values })
    }

    pub fn shape(&self) -> &TableShape {
        &self.shape
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn total(&self) -> f64 {
        self.values.iter().sum()
    }

    pub fn max_abs_diff(&self, other: &RealTable) -> f64 {
        self.values
            .iter()
            .zip(&other.values)
            .map(|(a, b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Hierarchical log-linear model given by its generating facets.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct LogLinearModel {
    shape: TableShape,
    facets: Vec<Vec<usize>>,
}

impl LogLinearModel {
    /// Facet axes are sorted and facets kept in the given order. No facet may
    /// contain another and together they must cover every axis.
    pub fn new(shape: TableShape, facets: Vec<Vec<usize>>) -> Result<Self, TableError> {
        let rank = shape.rank();
        if facets.is_empty() {
            return Err(TableError::InvalidFacets("no facets".into()));
        }
        let mut normalized = Vec::with_capacity(facets.len());
        for mut f in facets {
            f.sort_unstable();
            f.dedup();
            if f.is_empty() {
                return Err(TableError::InvalidFacets("empty facet".into()));
            }
            if let Some(&a) = f.iter().find(|&&a| a >= rank) {
                return Err(TableError::InvalidFacets(format!("axis {a} out of range for rank {rank}")));
            }
            normalized.push(f);
        }
        for (i, a) in normalized.iter().enumerate() {
            for (j, b) in normalized.iter().enumerate() {
                if i != j && a.iter().all(|x| b.contains(x)) {
                    return Err(TableError::InvalidFacets(format!(
                        "facet {} is contained in facet {}",
                        facet_label(rank, a),
                        facet_label(rank, b)
                    )));
                }
            }
        }
        for axis in 0..rank {
            if !normalized.iter().any(|f| f.contains(&axis)) {
                return Err(TableError::InvalidFacets(format!(
                    "axis {} is not covered",
                    axis_label(rank, axis)
                )));
            }
        }
        Ok(LogLinearModel { shape, facets: normalized })
    }

    /// `(XY, XD, YD)` on the canonical 3×3×2 shape.
    pub fn no_three_way() -> Self {
        Self::no_highest_interaction(TableShape::snp_pair())
    }

    /// All facets of size `rank − 1`: no interaction of the highest order.
    pub fn no_highest_interaction(shape: TableShape) -> Self {
        let rank = shape.rank();
        let facets = (0..rank)
            .rev()
            .map(|skip| (0..rank).filter(|&a| a != skip).collect())
            .collect();
        LogLinearModel { shape, facets }
    }

    /// Mutual independence of all axes.
    pub fn independence(shape: TableShape) -> Self {
        let facets = (0..shape.rank()).map(|a| vec![a]).collect();
        LogLinearModel { shape, facets }
    }

    /// A single facet over every axis.
    pub fn saturated(shape: TableShape) -> Self {
        let facets = vec![(0..shape.rank()).collect()];
        LogLinearModel { shape, facets }
    }

    pub fn shape(&self) -> &TableShape {
        &self.shape
    }

    pub fn facets(&self) -> &[Vec<usize>] {
        &self.facets
    }

    pub fn describe(&self) -> String {
        let rank = self.shape.rank();
        let parts: Vec<String> = self
            .facets
            .iter()
            .map(|f| f.iter().map(|&a| axis_label(rank, a)).collect::<String>())
            .collect();
        format!("({})", parts.join(","))
    }
}

/// Maps each cell of a table to its entry in one facet's marginal table.
#[derive(Debug, Clone)]
pub(crate) struct FacetProjection {
    pub(crate) axes: Vec<usize>,
    pub(crate) sizes: Vec<usize>,
    pub(crate) cell_to_entry: Vec<usize>,
    pub(crate) num_entries: usize,
}

impl FacetProjection {
    pub(crate) fn new(shape: &TableShape, axes: &[usize]) -> Self {
        let sizes: Vec<usize> = axes.iter().map(|&a| shape.axis_sizes[a]).collect();
        let margin_strides = strides_of(&sizes);
        let num_entries = sizes.iter().product();
        let cell_to_entry = (0..shape.num_cells())
            .map(|cell| {
                let coords = shape.coords(cell);
                axes.iter().zip(&margin_strides).map(|(&a, &s)| coords[a] * s).sum()
            })
            .collect();
        FacetProjection { axes: axes.to_vec(), sizes, cell_to_entry, num_entries }
    }

    pub(crate) fn for_model(model: &LogLinearModel) -> Vec<FacetProjection> {
        model.facets.iter().map(|f| FacetProjection::new(&model.shape, f)).collect()
    }

    pub(crate) fn project<T: Copy + Default + AddAssign>(&self, cells: &[T]) -> Vec<T> {
        let mut out = vec![T::default(); self.num_entries];
        for (&v, &e) in cells.iter().zip(&self.cell_to_entry) {
            out[e] += v;
        }
        out
    }
}

/// One marginal table: counts summed over every axis outside `axes`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Margin {
    pub axes: Vec<usize>,
    pub sizes: Vec<usize>,
    /// Flat counts, first facet axis fastest.
    pub counts: Vec<u64>,
}

impl Margin {
    pub fn total(&self) -> u64 {
        self.counts.iter().sum()
    }
}

/// The minimal sufficient statistics of a model: one margin per facet.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MarginSet {
    shape: TableShape,
    margins: Vec<Margin>,
}

impl MarginSet {
    /// Builds a margin set from explicit marginal tables; all grand totals
    /// must agree.
    pub fn new(shape: TableShape, margins: Vec<Margin>) -> Result<Self, TableError> {
        if margins.is_empty() {
            return Err(TableError::InconsistentMargins("no margins".into()));
        }
        for m in &margins {
            let expected_sizes: Vec<usize> = m
                .axes
                .iter()
                .map(|&a| shape.axis_sizes.get(a).copied().unwrap_or(0))
                .collect();
            if expected_sizes != m.sizes || m.counts.len() != m.sizes.iter().product::<usize>() {
                return Err(TableError::InconsistentMargins(format!(
                    "margin over axes {:?} does not fit shape {:?}",
                    m.axes, shape.axis_sizes
                )));
            }
        }
        let total = margins[0].total();
        if let Some(m) = margins.iter().find(|m| m.total() != total) {
            return Err(TableError::InconsistentMargins(format!(
                "margin {} totals {} but first margin totals {}",
                facet_label(shape.rank(), &m.axes),
                m.total(),
                total
            )));
        }
        Ok(MarginSet { shape, margins })
    }

    pub fn shape(&self) -> &TableShape {
        &self.shape
    }

    pub fn margins(&self) -> &[Margin] {
        &self.margins
    }

    pub fn total(&self) -> u64 {
        self.margins[0].total()
    }

    pub fn model(&self) -> Result<LogLinearModel, TableError> {
        LogLinearModel::new(self.shape.clone(), self.margins.iter().map(|m| m.axes.clone()).collect())
    }
}

/// Marginal tables of `table` for every facet of `model`.
pub fn margins(table: &ContingencyTable, model: &LogLinearModel) -> Result<MarginSet, TableError> {
    table.shape.check_same(&model.shape)?;
    let margins = FacetProjection::for_model(model)
        .into_iter()
        .map(|p| Margin { counts: p.project(&table.counts), axes: p.axes, sizes: p.sizes })
        .collect();
    Ok(MarginSet { shape: model.shape.clone(), margins })
}

/// Pearson χ² between an observed table and expected counts.
///
/// Cells with expected 0 and observed 0 contribute nothing; observed mass on
/// an expected-zero cell is an error.
pub fn chi_square(observed: &ContingencyTable, expected: &RealTable) -> Result<f64, TableError> {
    observed.shape.check_same(&expected.shape)?;
    let mut chi2 = 0.0;
    for (cell, (&o, &e)) in observed.counts.iter().zip(&expected.values).enumerate() {
        if !e.is_finite() || e < 0.0 {
            return Err(TableError::InvalidExpected { cell, value: e });
        }
        if e == 0.0 {
            if o > 0 {
                return Err(TableError::StructuralZeroViolation { cell, observed: o });
            }
            continue;
        }
        let d = o as f64 - e;
        chi2 += d * d / e;
    }
    Ok(chi2)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn uniform(value: u64) -> ContingencyTable {
        ContingencyTable::filled(TableShape::snp_pair(), value)
    }

    #[test]
    fn shape_validation() {
        assert!(TableShape::new(vec![3]).is_err());
        assert!(TableShape::new(vec![3, 1]).is_err());
        assert!(TableShape::new(vec![2; 6]).is_err());
        let s = TableShape::new(vec![3, 3, 2]).unwrap();
        assert_eq!(s.num_cells(), 18);
        assert_eq!(s.cell_index(&[1, 0, 0]), 1);
        assert_eq!(s.cell_index(&[0, 1, 0]), 3);
        assert_eq!(s.cell_index(&[2, 2, 1]), 17);
        for cell in 0..18 {
            assert_eq!(s.cell_index(&s.coords(cell)), cell);
        }
    }

    #[test]
    fn model_validation() {
        let s = TableShape::snp_pair();
        assert!(LogLinearModel::new(s.clone(), vec![vec![0, 1], vec![0]]).is_err());
        assert!(LogLinearModel::new(s.clone(), vec![vec![0, 1]]).is_err());
        assert!(LogLinearModel::new(s.clone(), vec![vec![0, 3], vec![2]]).is_err());
        let m = LogLinearModel::no_three_way();
        assert_eq!(m.facets(), &[vec![0, 1], vec![0, 2], vec![1, 2]]);
        assert_eq!(m.describe(), "(XY,XD,YD)");
        assert!(LogLinearModel::new(s, m.facets().to_vec()).is_ok());
    }

    #[test]
    fn margins_of_uniform_table() {
        let ms = margins(&uniform(1), &LogLinearModel::no_three_way()).unwrap();
        let m = ms.margins();
        assert!(m[0].counts.iter().all(|&c| c == 2));
        assert!(m[1].counts.iter().all(|&c| c == 3));
        assert!(m[2].counts.iter().all(|&c| c == 3));
        assert_eq!(m[0].counts.len(), 9);
        assert_eq!(m[1].counts.len(), 6);
    }

    #[test]
    fn margins_of_point_mass() {
        let mut t = ContingencyTable::zeros(TableShape::snp_pair());
        t.counts_mut()[0] = 5;
        let ms = margins(&t, &LogLinearModel::no_three_way()).unwrap();
        for m in ms.margins() {
            assert_eq!(m.counts[0], 5);
            assert!(m.counts[1..].iter().all(|&c| c == 0));
        }
    }

    #[test]
    fn margins_reject_shape_mismatch() {
        let t = ContingencyTable::zeros(TableShape::new(vec![2, 2]).unwrap());
        assert!(matches!(
            margins(&t, &LogLinearModel::no_three_way()),
            Err(TableError::ShapeMismatch { .. })
        ));
    }

    #[test]
    fn margin_set_rejects_unequal_totals() {
        let s = TableShape::new(vec![2, 2]).unwrap();
        let rows = Margin { axes: vec![0], sizes: vec![2], counts: vec![1, 1] };
        let cols = Margin { axes: vec![1], sizes: vec![2], counts: vec![1, 2] };
        assert!(matches!(MarginSet::new(s, vec![rows, cols]), Err(TableError::InconsistentMargins(_))));
    }

    #[test]
    fn chi_square_cases() {
        let t = uniform(2);
        assert_eq!(chi_square(&t, &t.to_real()).unwrap(), 0.0);

        let mut obs = uniform(4);
        obs.counts_mut()[3] = 5;
        let exp = uniform(4).to_real();
        assert!((chi_square(&obs, &exp).unwrap() - 0.25).abs() < 1e-15);

        let mut exp0 = uniform(4).to_real();
        exp0.values[0] = 0.0;
        assert!(matches!(
            chi_square(&uniform(4), &exp0),
            Err(TableError::StructuralZeroViolation { cell: 0, observed: 4 })
        ));
        let mut zero_obs = uniform(4);
        zero_obs.counts_mut()[0] = 0;
        assert!(chi_square(&zero_obs, &exp0).is_ok());
    }

    #[test]
    fn text_format() {
        let mut t = uniform(2);
        t.counts_mut()[17] = 9;
        let text = t.to_text();
        assert!(text.starts_with("3 3 2\n"));
        let back: ContingencyTable = text.parse().unwrap();
        assert_eq!(back, t);

        let commented = "# pair table\n3 3 2\n1 2 3 4 5 6 7 8 9\n# cases\n9 8 7 6 5 4 3 2 1\n";
        let t2: ContingencyTable = commented.parse().unwrap();
        assert_eq!(t2.get(&[0, 0, 1]), 9);
        assert_eq!(t2.total(), 90);

        let err = "3 3 2\n1 2 3".parse::<ContingencyTable>().unwrap_err();
        assert!(matches!(err, TableError::Parse { line: 1, .. }));
        assert!("3 3 2\n1 x".parse::<ContingencyTable>().is_err());
    }

    #[test]
    fn facet_labels() {
        assert_eq!(facet_label(3, &[0, 1]), "{X,Y}");
        assert_eq!(facet_label(3, &[1, 2]), "{Y,D}");
        assert_eq!(facet_label(4, &[0, 2, 3]), "{X,Z,D}");
    }
}
