//! Markov moves and Markov bases.
//!
//! A move is an integer vector over the flattened table whose projection
//! onto every facet of the model is zero, so adding it to a table leaves the
//! sufficient statistics unchanged. A Markov basis is a set of moves whose
//! ± steps connect every fiber of the model.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use thiserror::Error;

use crate::tables::{facet_label, ContingencyTable, FacetProjection, LogLinearModel, TableShape};

#[derive(Debug, Error)]
pub enum BasisError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("basis parse error on line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("move {row} (line {line}) has {found} entries, expected {expected}")]
    DimensionMismatch {
        row: usize,
        line: usize,
        expected: usize,
        found: usize,
    },
    #[error("move {row} is invalid: {reason}")]
    InvalidMove { row: usize, reason: String },
    #[error("move {row} does not preserve margin {facet}")]
    MarginViolation { row: usize, facet: String },
    #[error("move {row} duplicates move {earlier} (up to sign)")]
    Duplicate { row: usize, earlier: usize },
}

/// Integer move over the flattened table, in canonical cell order.
#[derive(Debug, Clone, PartialEq, Eq, Hash)]
pub struct MarkovMove(Vec<i64>);

impl MarkovMove {
    pub fn new(entries: Vec<i64>) -> Self {
        MarkovMove(entries)
    }

    pub fn entries(&self) -> &[i64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn is_zero(&self) -> bool {
        self.0.iter().all(|&x| x == 0)
    }

    pub fn negated(&self) -> MarkovMove {
        MarkovMove(self.0.iter().map(|x| -x).collect())
    }

    /// Sign-normalized form: first nonzero entry positive.
    fn canonical(&self) -> MarkovMove {
        match self.0.iter().find(|&&x| x != 0) {
            Some(&x) if x < 0 => self.negated(),
            _ => self.clone(),
        }
    }

    /// Cells touched by the move with their entries.
    pub fn support(&self) -> Vec<(usize, i64)> {
        self.0.iter().enumerate().filter(|(_, &x)| x != 0).map(|(i, &x)| (i, x)).collect()
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Sign {
    Plus,
    Minus,
}

impl Sign {
    pub fn value(self) -> i64 {
        match self {
            Sign::Plus => 1,
            Sign::Minus => -1,
        }
    }
}

/// `table + sign·move`, or `None` if any cell would go negative.
pub fn apply_move(table: &ContingencyTable, mv: &MarkovMove, sign: Sign) -> Option<ContingencyTable> {
    assert_eq!(table.counts().len(), mv.len(), "move and table dimensions differ");
    let s = sign.value();
    let mut next = table.clone();
    for (c, &m) in next.counts_mut().iter_mut().zip(mv.entries()) {
        let v = *c as i64 + s * m;
        if v < 0 {
            return None;
        }
        *c = v as u64;
    }
    Some(next)
}

#[derive(Debug, Clone)]
pub struct MarkovBasis {
    model: LogLinearModel,
    moves: Vec<MarkovMove>,
}

impl MarkovBasis {
    /// Validates every move and rejects the first failure.
    pub fn new(model: LogLinearModel, moves: Vec<MarkovMove>) -> Result<Self, BasisError> {
        let basis = MarkovBasis { model, moves };
        let report = validate_basis(&basis);
        if let Some(f) = report.failures().next() {
            return Err(f.to_error());
        }
        Ok(basis)
    }

    /// Builds a basis without validation, e.g. to inspect a candidate with
    /// [`validate_basis`].
    pub fn unvalidated(model: LogLinearModel, moves: Vec<MarkovMove>) -> Self {
        MarkovBasis { model, moves }
    }

    pub fn model(&self) -> &LogLinearModel {
        &self.model
    }

    pub fn shape(&self) -> &TableShape {
        self.model.shape()
    }

    pub fn moves(&self) -> &[MarkovMove] {
        &self.moves
    }

    pub fn len(&self) -> usize {
        self.moves.len()
    }

    pub fn is_empty(&self) -> bool {
        self.moves.is_empty()
    }

    /// One move per line, whitespace-separated, canonical cell order.
    pub fn to_text(&self) -> String {
        let mut out = String::new();
        let _ = writeln!(out, "# Markov basis for model {} on shape {:?}", self.model.describe(), self.shape().axis_sizes());
        for mv in &self.moves {
            let row: Vec<String> = mv.entries().iter().map(|x| x.to_string()).collect();
            let _ = writeln!(out, "{}", row.join(" "));
        }
        out
    }
}

/// Basis of the no-3-way interaction model on 3×3×2 tables.
///
/// Cell order is `(n111, n211, n311, n121, …, n332)`.
const NO3WAY_MOVES: [[i64; 18]; 15] = [
    [0, 0, 0, 1, 0, -1, -1, 0, 1, 0, 0, 0, -1, 0, 1, 1, 0, -1],
    [0, 0, 0, 0, 1, -1, 0, -1, 1, 0, 0, 0, 0, -1, 1, 0, 1, -1],
    [1, 0, -1, 0, 0, 0, -1, 0, 1, -1, 0, 1, 0, 0, 0, 1, 0, -1],
    [0, 1, -1, 0, 0, 0, 0, -1, 1, 0, -1, 1, 0, 0, 0, 0, 1, -1],
    [0, 0, 0, 1, -1, 0, -1, 1, 0, 0, 0, 0, -1, 1, 0, 1, -1, 0],
    [1, -1, 0, 0, 0, 0, -1, 1, 0, -1, 1, 0, 0, 0, 0, 1, -1, 0],
    [1, -1, 0, -1, 1, 0, 0, 0, 0, -1, 1, 0, 1, -1, 0, 0, 0, 0],
    [1, 0, -1, -1, 0, 1, 0, 0, 0, -1, 0, 1, 1, 0, -1, 0, 0, 0],
    [0, 1, -1, 0, -1, 1, 0, 0, 0, 0, -1, 1, 0, 1, -1, 0, 0, 0],
    [0, 1, -1, -1, 0, 1, 1, -1, 0, 0, -1, 1, 1, 0, -1, -1, 1, 0],
    [1, 0, -1, 0, -1, 1, -1, 1, 0, -1, 0, 1, 0, 1, -1, 1, -1, 0],
    [-1, 1, 0, 1, 0, -1, 0, -1, 1, 1, -1, 0, -1, 0, 1, 0, 1, -1],
    [1, -1, 0, 0, 1, -1, -1, 0, 1, -1, 1, 0, 0, -1, 1, 1, 0, -1],
    [1, 0, -1, -1, 1, 0, 0, -1, 1, -1, 0, 1, 1, -1, 0, 0, 1, -1],
    [0, 1, -1, 1, -1, 0, -1, 0, 1, 0, -1, 1, -1, 1, 0, 1, 0, -1],
];

pub fn builtin_no3way_basis() -> MarkovBasis {
    MarkovBasis {
        model: LogLinearModel::no_three_way(),
        moves: NO3WAY_MOVES.iter().map(|m| MarkovMove(m.to_vec())).collect(),
    }
}

/// Parses a basis file body. Blank lines and `#` comments are skipped.
pub fn parse_basis(text: &str, model: LogLinearModel) -> Result<MarkovBasis, BasisError> {
    let basis = parse_basis_unchecked(text, model)?;
    MarkovBasis::new(basis.model, basis.moves)
}

/// Parses a basis file body without checking the moves against the model.
pub fn parse_basis_unchecked(text: &str, model: LogLinearModel) -> Result<MarkovBasis, BasisError> {
    let expected = model.shape().num_cells();
    let mut moves = Vec::new();
    for (lineno, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let entries = line
            .split_whitespace()
            .map(|t| {
                t.parse::<i64>().map_err(|e| BasisError::Parse {
                    line: lineno + 1,
                    message: format!("bad integer {t:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>, _>>()?;
        if entries.len() != expected {
            return Err(BasisError::DimensionMismatch {
                row: moves.len() + 1,
                line: lineno + 1,
                expected,
                found: entries.len(),
            });
        }
        moves.push(MarkovMove(entries));
    }
    Ok(MarkovBasis::unvalidated(model, moves))
}

pub fn load_basis(path: impl AsRef<Path>, model: LogLinearModel) -> Result<MarkovBasis, BasisError> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|source| BasisError::Io { path: path.display().to_string(), source })?;
    parse_basis(&text, model)
}

pub fn write_basis(basis: &MarkovBasis, path: impl AsRef<Path>) -> Result<(), BasisError> {
    let path = path.as_ref();
    fs::write(path, basis.to_text()).map_err(|source| BasisError::Io { path: path.display().to_string(), source })
}

#[derive(Debug, Clone, PartialEq)]
pub enum MoveProblem {
    WrongLength { expected: usize, found: usize },
    Zero,
    /// Facets (as labels such as `{X,Y}`) whose margin the move changes.
    MarginViolation(Vec<String>),
    /// 1-based number of the earlier move this one repeats up to sign.
    Duplicate(usize),
}

#[derive(Debug, Clone)]
pub struct MoveCheck {
    /// 1-based position in the basis.
    pub number: usize,
    pub problems: Vec<MoveProblem>,
}

impl MoveCheck {
    pub fn passed(&self) -> bool {
        self.problems.is_empty()
    }

    pub fn to_error(&self) -> BasisError {
        let row = self.number;
        match &self.problems[0] {
            MoveProblem::WrongLength { expected, found } => {
                BasisError::DimensionMismatch { row, line: row, expected: *expected, found: *found }
            }
            MoveProblem::Zero => BasisError::InvalidMove { row, reason: "zero vector is not a move".into() },
            MoveProblem::MarginViolation(facets) => BasisError::MarginViolation { row, facet: facets.join(", ") },
            MoveProblem::Duplicate(earlier) => BasisError::Duplicate { row, earlier: *earlier },
        }
    }
}

#[derive(Debug, Clone)]
pub struct ValidationReport {
    pub checks: Vec<MoveCheck>,
    pub warnings: Vec<String>,
}

impl ValidationReport {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(MoveCheck::passed)
    }

    pub fn failures(&self) -> impl Iterator<Item = &MoveCheck> {
        self.checks.iter().filter(|c| !c.passed())
    }
}

/// Checks each move for length, nonzero-ness, margin annihilation under
/// every facet of the basis model, and duplicates up to sign.
pub fn validate_basis(basis: &MarkovBasis) -> ValidationReport {
    let shape = basis.model.shape();
    let rank = shape.rank();
    let n = shape.num_cells();
    let projections = FacetProjection::for_model(&basis.model);
    let mut seen: HashSet<MarkovMove> = HashSet::new();
    let mut first_seen: Vec<(MarkovMove, usize)> = Vec::new();
    let mut checks = Vec::with_capacity(basis.moves.len());
    for (i, mv) in basis.moves.iter().enumerate() {
        let number = i + 1;
        let mut problems = Vec::new();
        if mv.len() != n {
            problems.push(MoveProblem::WrongLength { expected: n, found: mv.len() });
            checks.push(MoveCheck { number, problems });
            continue;
        }
        if mv.is_zero() {
            problems.push(MoveProblem::Zero);
        } else {
            let violated: Vec<String> = projections
                .iter()
                .filter(|p| p.project(mv.entries()).iter().any(|&x| x != 0))
                .map(|p| facet_label(rank, &p.axes))
                .collect();
            if !violated.is_empty() {
                problems.push(MoveProblem::MarginViolation(violated));
            }
            let canon = mv.canonical();
            if seen.contains(&canon) {
                let earlier = first_seen.iter().find(|(m, _)| *m == canon).map(|(_, k)| *k).unwrap_or(0);
                problems.push(MoveProblem::Duplicate(earlier));
            } else {
                seen.insert(canon.clone());
                first_seen.push((canon, number));
            }
        }
        checks.push(MoveCheck { number, problems });
    }
    let mut warnings = Vec::new();
    if basis.moves.is_empty() {
        warnings.push("empty basis".to_string());
    }
    ValidationReport { checks, warnings }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tables::margins;

    #[test]
    fn builtin_basis_matches_listing() {
        let b = builtin_no3way_basis();
        assert_eq!(b.len(), 15);
        assert_eq!(
            b.moves()[0].entries(),
            &[0, 0, 0, 1, 0, -1, -1, 0, 1, 0, 0, 0, -1, 0, 1, 1, 0, -1]
        );
        let report = validate_basis(&b);
        assert!(report.passed());
        assert!(report.warnings.is_empty());
        for mv in b.moves() {
            assert_eq!(mv.entries().iter().sum::<i64>(), 0);
        }
    }

    #[test]
    fn parse_round_trip() {
        let b = builtin_no3way_basis();
        let parsed = parse_basis(&b.to_text(), LogLinearModel::no_three_way()).unwrap();
        assert_eq!(parsed.moves(), b.moves());
    }

    #[test]
    fn zero_row_rejected() {
        let text = "0 ".repeat(18);
        match parse_basis(&text, LogLinearModel::no_three_way()) {
            Err(BasisError::InvalidMove { row: 1, .. }) => {}
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn margin_violation_names_facet() {
        // +1 in cell 0 breaks every margin that contains cell 0; bump a cell
        // and compensate within the same (i, j) fiber to break only XD and YD,
        // then separately break only XY.
        let mut row = NO3WAY_MOVES[0].to_vec();
        row[0] += 1;
        row[9] -= 1; // n_{112}: same (i, j), other k -> XY preserved
        let text = row.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        let err = parse_basis(&text, LogLinearModel::no_three_way()).unwrap_err();
        match err {
            BasisError::MarginViolation { row: 1, facet } => {
                assert!(facet.contains("{X,D}") && facet.contains("{Y,D}"));
                assert!(!facet.contains("{X,Y}"));
            }
            other => panic!("unexpected {other:?}"),
        }

        let mut row = NO3WAY_MOVES[0].to_vec();
        row[0] += 1;
        let text = row.iter().map(|x| x.to_string()).collect::<Vec<_>>().join(" ");
        match parse_basis(&text, LogLinearModel::no_three_way()).unwrap_err() {
            BasisError::MarginViolation { row: 1, facet } => assert!(facet.contains("{X,Y}")),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn dimension_mismatch_and_parse_errors() {
        let err = parse_basis("1 -1 0", LogLinearModel::no_three_way()).unwrap_err();
        assert!(matches!(err, BasisError::DimensionMismatch { row: 1, expected: 18, found: 3, .. }));
        let err = parse_basis("# header\n1 x", LogLinearModel::no_three_way()).unwrap_err();
        assert!(matches!(err, BasisError::Parse { line: 2, .. }));
    }

    #[test]
    fn duplicates_up_to_sign() {
        let b = builtin_no3way_basis();
        let mut moves = b.moves().to_vec();
        moves.push(moves[2].negated());
        let report = validate_basis(&MarkovBasis::unvalidated(LogLinearModel::no_three_way(), moves));
        let fails: Vec<_> = report.failures().collect();
        assert_eq!(fails.len(), 1);
        assert_eq!(fails[0].number, 16);
        assert_eq!(fails[0].problems, vec![MoveProblem::Duplicate(3)]);
    }

    #[test]
    fn broken_first_move_fails_validation() {
        let mut moves = builtin_no3way_basis().moves().to_vec();
        let mut f1 = moves[0].entries().to_vec();
        f1[0] += 1;
        moves[0] = MarkovMove::new(f1);
        let report = validate_basis(&MarkovBasis::unvalidated(LogLinearModel::no_three_way(), moves));
        assert!(!report.passed());
        let fails: Vec<_> = report.failures().map(|c| c.number).collect();
        assert_eq!(fails, vec![1]);
    }

    #[test]
    fn empty_basis_warns() {
        let report = validate_basis(&MarkovBasis::unvalidated(LogLinearModel::no_three_way(), vec![]));
        assert!(report.passed());
        assert_eq!(report.warnings, vec!["empty basis".to_string()]);
    }

    #[test]
    fn apply_first_move_to_uniform_table() {
        let t = ContingencyTable::filled(TableShape::snp_pair(), 2);
        let basis = builtin_no3way_basis();
        let f1 = &basis.moves()[0];
        let next = apply_move(&t, f1, Sign::Plus).unwrap();
        for (cell, (&c, &m)) in next.counts().iter().zip(f1.entries()).enumerate() {
            let want = (2 + m) as u64;
            assert_eq!(c, want, "cell {cell}");
        }
        let model = LogLinearModel::no_three_way();
        assert_eq!(margins(&next, &model).unwrap(), margins(&t, &model).unwrap());
        assert_eq!(apply_move(&next, f1, Sign::Minus).unwrap(), t);
    }

    #[test]
    fn infeasible_moves() {
        let zero = ContingencyTable::zeros(TableShape::snp_pair());
        for mv in builtin_no3way_basis().moves() {
            assert!(apply_move(&zero, mv, Sign::Plus).is_none());
            assert!(apply_move(&zero, mv, Sign::Minus).is_none());
        }
        // -f1 adds 1 where f1 is -1 and removes 1 where f1 is +1; cell 3 is +1 in f1.
        let mut t = ContingencyTable::filled(TableShape::snp_pair(), 2);
        t.counts_mut()[3] = 0;
        assert!(apply_move(&t, &builtin_no3way_basis().moves()[0], Sign::Minus).is_none());
    }
}
