//! Stability diagnostics: formula matrices, the finite ladder index, and
//! definability tests built on type distances.
//!
//! The central quantity is the (r, s)-ladder index of a rational matrix: the
//! longest ladder `a_1..a_k`, `b_1..b_k` with `entry(a_i, b_j) >= r` when
//! `i > j` and `<= s` when `i < j`, over *distinct* row indices and
//! *distinct* column indices (diagonal pairs are unconstrained, so a single
//! pair is vacuously a ladder and the index is always at least 1).
//! Distinctness is what ties the index to matrix size: the half-graph
//! comparison matrix of order n has index exactly n, while with repetition
//! allowed even a 2x2 half-graph would admit length 3.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use thiserror::Error;

use crate::cancel::{CancelToken, Cancelled};
use crate::logic::{Formula, LogicError};
use crate::rational::{fmt_q, Q};
use crate::structures::{FiniteStructure, StructureError};

/// Exhaustive ladder search is exponential in min(rows, cols); this caps it.
pub const LADDER_LIMIT: usize = 15;

/// Index sets are stored as 128-bit masks, so no dimension may exceed this.
pub const LADDER_WIDTH: usize = 128;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum StabilityError {
    #[error("matrix needs at least one row and one column")]
    EmptyMatrix,
    #[error("expected {expected} entries in row {row}, got {got}")]
    RowSize {
        row: usize,
        expected: usize,
        got: usize,
    },
    #[error("formula must have exactly the free variables `{row}` and `{col}`")]
    WrongFreeVars { row: String, col: String },
    #[error("row and column variables must differ")]
    EqualVars,
    #[error("type vector has {got} coordinates, expected {expected}")]
    TypeSize { expected: usize, got: usize },
    #[error("threshold r = {r} must exceed s = {s}")]
    ThresholdOrder { r: String, s: String },
    #[error("exact ladder search needs min(rows, cols) <= {limit}, got {got}")]
    MatrixTooLarge { got: usize, limit: usize },
    #[error("index sets are {limit}-bit masks; a dimension of {got} does not fit")]
    MatrixTooWide { got: usize, limit: usize },
    #[error("witness is not a ladder: {0}")]
    BadWitness(String),
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Cancelled(#[from] Cancelled),
}

/// A labeled rational matrix with the measures of its index spaces carried
/// along, as produced by evaluating a two-variable formula on a structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PhiMatrix {
    row_labels: Vec<String>,
    col_labels: Vec<String>,
    entries: Vec<Vec<Q>>,
    bound: Q,
    row_measure: Vec<Q>,
    col_measure: Vec<Q>,
}

impl PhiMatrix {
    pub fn new(
        row_labels: Vec<String>,
        col_labels: Vec<String>,
        entries: Vec<Vec<Q>>,
        bound: Q,
        row_measure: Vec<Q>,
        col_measure: Vec<Q>,
    ) -> Result<Self, StabilityError> {
        if entries.is_empty() || col_labels.is_empty() {
            return Err(StabilityError::EmptyMatrix);
        }
        if row_labels.len() != entries.len()
            || row_measure.len() != entries.len()
            || col_measure.len() != col_labels.len()
        {
            return Err(StabilityError::RowSize {
                row: 0,
                expected: entries.len(),
                got: row_labels.len(),
            });
        }
        for (i, row) in entries.iter().enumerate() {
            if row.len() != col_labels.len() {
                return Err(StabilityError::RowSize {
                    row: i,
                    expected: col_labels.len(),
                    got: row.len(),
                });
            }
        }
        Ok(Self {
            row_labels,
            col_labels,
            entries,
            bound,
            row_measure,
            col_measure,
        })
    }

    /// Bare matrix: labels become `r0..`/`c0..`, measures uniform, bound the
    /// largest absolute entry.
    pub fn from_entries(entries: Vec<Vec<Q>>) -> Result<Self, StabilityError> {
        if entries.is_empty() || entries[0].is_empty() {
            return Err(StabilityError::EmptyMatrix);
        }
        let rows = entries.len();
        let cols = entries[0].len();
        let zero = Q::from_integer(0.into());
        let bound = entries
            .iter()
            .flatten()
            .map(|v| if v < &zero { -v } else { v.clone() })
            .max()
            .expect("nonempty");
        let uniform = |n: usize| vec![Q::new(1.into(), (n as i64).into()); n];
        Self::new(
            (0..rows).map(|i| format!("r{i}")).collect(),
            (0..cols).map(|j| format!("c{j}")).collect(),
            entries,
            bound,
            uniform(rows),
            uniform(cols),
        )
    }

    pub fn rows(&self) -> usize {
        self.entries.len()
    }

    pub fn cols(&self) -> usize {
        self.col_labels.len()
    }

    pub fn entry(&self, i: usize, j: usize) -> &Q {
        &self.entries[i][j]
    }

    pub fn row(&self, i: usize) -> &[Q] {
        &self.entries[i]
    }

    pub fn row_labels(&self) -> &[String] {
        &self.row_labels
    }

    pub fn col_labels(&self) -> &[String] {
        &self.col_labels
    }

    pub fn bound(&self) -> &Q {
        &self.bound
    }

    pub fn row_measure(&self) -> &[Q] {
        &self.row_measure
    }

    pub fn col_measure(&self) -> &[Q] {
        &self.col_measure
    }

    /// The transpose with negated entries; swapping thresholds
    /// (r, s) -> (-s, -r) carries ladders of one to ladders of the other,
    /// so the ladder index is preserved exactly.
    pub fn negated_transpose(&self) -> Self {
        let entries = (0..self.cols())
            .map(|j| (0..self.rows()).map(|i| -self.entry(i, j)).collect())
            .collect();
        Self {
            row_labels: self.col_labels.clone(),
            col_labels: self.row_labels.clone(),
            entries,
            bound: self.bound.clone(),
            row_measure: self.col_measure.clone(),
            col_measure: self.row_measure.clone(),
        }
    }
}

/// Evaluates `formula` at every pair of points. The formula's free variables
/// must be exactly `row_var` and `col_var`; rows range over the first, and
/// the structure's weights become the index measures.
pub fn phi_matrix(
    structure: &FiniteStructure,
    formula: &Formula,
    row_var: &str,
    col_var: &str,
) -> Result<PhiMatrix, StabilityError> {
    if row_var == col_var {
        return Err(StabilityError::EqualVars);
    }
    let free = formula.free_vars();
    if free.len() != 2 || !free.contains(row_var) || !free.contains(col_var) {
        return Err(StabilityError::WrongFreeVars {
            row: row_var.to_string(),
            col: col_var.to_string(),
        });
    }
    structure.check_symbols(formula)?;
    let n = structure.len();
    let mut entries = Vec::with_capacity(n);
    for i in 0..n {
        let mut row = Vec::with_capacity(n);
        for j in 0..n {
            let assignment = BTreeMap::from([
                (row_var.to_string(), i),
                (col_var.to_string(), j),
            ]);
            row.push(structure.evaluate(formula, &assignment)?);
        }
        entries.push(row);
    }
    PhiMatrix::new(
        structure.points().to_vec(),
        structure.points().to_vec(),
        entries,
        formula.bound().clone(),
        structure.weights().to_vec(),
        structure.weights().to_vec(),
    )
}

/// The value profile of one row against every formula/column pair.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TypeVector {
    pub label: String,
    pub coords: Vec<Q>,
}

/// Sup distance between two type vectors of equal length.
pub fn type_metric(a: &TypeVector, b: &TypeVector) -> Result<Q, StabilityError> {
    if a.coords.len() != b.coords.len() {
        return Err(StabilityError::TypeSize {
            expected: a.coords.len(),
            got: b.coords.len(),
        });
    }
    let zero = Q::from_integer(0.into());
    Ok(a.coords
        .iter()
        .zip(&b.coords)
        .map(|(x, y)| {
            let d = x - y;
            if d < zero {
                -d
            } else {
                d
            }
        })
        .max()
        .unwrap_or(zero))
}

/// A ladder: distinct rows `a_1..a_k` and distinct columns `b_1..b_k` with
/// entries `>= r` strictly below the diagonal pairing and `<= s` strictly
/// above it. Diagonal pairs carry no constraint.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LadderWitness {
    pub r: Q,
    pub s: Q,
    pub rows: Vec<usize>,
    pub cols: Vec<usize>,
}

impl LadderWitness {
    pub fn len(&self) -> usize {
        self.rows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rows.is_empty()
    }

    /// Re-checks every defining inequality against the matrix.
    pub fn validate(&self, m: &PhiMatrix) -> Result<(), StabilityError> {
        if self.rows.len() != self.cols.len() {
            return Err(StabilityError::BadWitness(format!(
                "{} rows vs {} columns",
                self.rows.len(),
                self.cols.len()
            )));
        }
        if self.rows.is_empty() {
            return Err(StabilityError::BadWitness("empty ladder".into()));
        }
        let mut seen_rows = BTreeSet::new();
        let mut seen_cols = BTreeSet::new();
        for &a in &self.rows {
            if a >= m.rows() || !seen_rows.insert(a) {
                return Err(StabilityError::BadWitness(format!(
                    "row {a} repeats or is out of range"
                )));
            }
        }
        for &b in &self.cols {
            if b >= m.cols() || !seen_cols.insert(b) {
                return Err(StabilityError::BadWitness(format!(
                    "column {b} repeats or is out of range"
                )));
            }
        }
        for i in 0..self.rows.len() {
            for j in 0..self.cols.len() {
                let v = m.entry(self.rows[i], self.cols[j]);
                if i > j && v < &self.r {
                    return Err(StabilityError::BadWitness(format!(
                        "entry ({}, {}) = {} < r at i = {}, j = {}",
                        self.rows[i],
                        self.cols[j],
                        fmt_q(v),
                        i,
                        j
                    )));
                }
                if i < j && v > &self.s {
                    return Err(StabilityError::BadWitness(format!(
                        "entry ({}, {}) = {} > s at i = {}, j = {}",
                        self.rows[i],
                        self.cols[j],
                        fmt_q(v),
                        i,
                        j
                    )));
                }
            }
        }
        Ok(())
    }
}

/// The exact or lower-bound ladder index, with a witness of that length.
/// The index is at least 1 on any matrix, so a witness always exists.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LadderIndex {
    pub index: usize,
    pub witness: LadderWitness,
}

impl fmt::Display for LadderIndex {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "ladder index {}", self.index)
    }
}

fn check_thresholds(r: &Q, s: &Q) -> Result<(), StabilityError> {
    if r <= s {
        return Err(StabilityError::ThresholdOrder {
            r: fmt_q(r),
            s: fmt_q(s),
        });
    }
    Ok(())
}

/// Per-index bitmask tables: `ge_r[a]` has bit b set when entry(a, b) >= r,
/// `le_s[a]` when entry(a, b) <= s. Thresholds r > s make the two disjoint.
struct Masks {
    ge_r: Vec<u128>,
    le_s: Vec<u128>,
}

fn build_masks(m: &PhiMatrix, r: &Q, s: &Q) -> Masks {
    let mut ge_r = vec![0u128; m.rows()];
    let mut le_s = vec![0u128; m.rows()];
    for a in 0..m.rows() {
        for b in 0..m.cols() {
            let v = m.entry(a, b);
            if v >= r {
                ge_r[a] |= 1 << b;
            }
            if v <= s {
                le_s[a] |= 1 << b;
            }
        }
    }
    Masks { ge_r, le_s }
}

/// Depth-first extension of a partial ladder, memoized on the used row and
/// column sets. The set state is sound because appending a pair (a, b) at
/// position k+1 constrains it only against the *sets* already used: the new
/// row needs entry(a, b_j) >= r for every used column (positions j < k+1)
/// and the new column needs entry(a_i, b) <= s for every used row, while the
/// new diagonal pair (a, b) itself is unconstrained. Candidates are explored
/// in row-major index order, making the reconstructed witness deterministic.
struct LadderSearch<'a> {
    m: &'a PhiMatrix,
    masks: Masks,
    memo: BTreeMap<(u128, u128), usize>,
    token: &'a CancelToken,
}

impl<'a> LadderSearch<'a> {
    /// Longest extension possible from this state.
    fn extension(&mut self, used_rows: u128, used_cols: u128) -> Result<usize, Cancelled> {
        self.token.check()?;
        if let Some(&v) = self.memo.get(&(used_rows, used_cols)) {
            return Ok(v);
        }
        let mut best = 0usize;
        for a in 0..self.m.rows() {
            if used_rows & (1 << a) != 0 || self.masks.ge_r[a] & used_cols != used_cols {
                continue;
            }
            // Columns acceptable to every used row at level s.
            let mut allowed = !used_cols;
            for i in 0..self.m.rows() {
                if used_rows & (1 << i) != 0 {
                    allowed &= self.masks.le_s[i];
                }
            }
            for b in 0..self.m.cols() {
                if allowed & (1 << b) == 0 {
                    continue;
                }
                let sub = self.extension(used_rows | (1 << a), used_cols | (1 << b))?;
                best = best.max(1 + sub);
            }
        }
        self.memo.insert((used_rows, used_cols), best);
        Ok(best)
    }

    /// Rebuilds one maximum ladder by re-walking the memo table, taking the
    /// first (row-major index order) pair whose extension achieves the
    /// optimum at each step.
    fn reconstruct(&mut self) -> Result<(Vec<usize>, Vec<usize>), Cancelled> {
        let mut rows = Vec::new();
        let mut cols = Vec::new();
        let mut used_rows = 0u128;
        let mut used_cols = 0u128;
        loop {
            let remaining = self.extension(used_rows, used_cols)?;
            if remaining == 0 {
                return Ok((rows, cols));
            }
            let mut advanced = false;
            'pairs: for a in 0..self.m.rows() {
                if used_rows & (1 << a) != 0
                    || self.masks.ge_r[a] & used_cols != used_cols
                {
                    continue;
                }
                let mut allowed = !used_cols;
                for i in 0..self.m.rows() {
                    if used_rows & (1 << i) != 0 {
                        allowed &= self.masks.le_s[i];
                    }
                }
                for b in 0..self.m.cols() {
                    if allowed & (1 << b) == 0 {
                        continue;
                    }
                    let sub =
                        self.extension(used_rows | (1 << a), used_cols | (1 << b))?;
                    if 1 + sub == remaining {
                        rows.push(a);
                        cols.push(b);
                        used_rows |= 1 << a;
                        used_cols |= 1 << b;
                        advanced = true;
                        break 'pairs;
                    }
                }
            }
            assert!(advanced, "memoized optimum must be achievable");
        }
    }
}

fn check_width(m: &PhiMatrix) -> Result<(), StabilityError> {
    let wide = m.rows().max(m.cols());
    if wide > LADDER_WIDTH {
        return Err(StabilityError::MatrixTooWide {
            got: wide,
            limit: LADDER_WIDTH,
        });
    }
    Ok(())
}

/// Computes the exact (r, s)-ladder index of the matrix, with a maximum
/// witness. Requires r > s and min(rows, cols) <= [`LADDER_LIMIT`].
pub fn ladder_index(
    m: &PhiMatrix,
    r: &Q,
    s: &Q,
    token: &CancelToken,
) -> Result<LadderIndex, StabilityError> {
    check_thresholds(r, s)?;
    check_width(m)?;
    let small = m.rows().min(m.cols());
    if small > LADDER_LIMIT {
        return Err(StabilityError::MatrixTooLarge {
            got: small,
            limit: LADDER_LIMIT,
        });
    }
    let mut search = LadderSearch {
        m,
        masks: build_masks(m, r, s),
        memo: BTreeMap::new(),
        token,
    };
    let index = search.extension(0, 0)?;
    assert!(index >= 1, "a single pair is always a ladder");
    let (rows, cols) = search.reconstruct()?;
    let witness = LadderWitness {
        r: r.clone(),
        s: s.clone(),
        rows,
        cols,
    };
    witness.validate(m).expect("search must produce a valid ladder");
    assert_eq!(witness.len(), index);
    Ok(LadderIndex { index, witness })
}

/// Greedy lower bound: repeatedly append the first (row-major index order)
/// admissible pair. Cheap, valid at any size, and never exceeds the exact
/// index; the first pair is always admissible, so the result is >= 1.
pub fn ladder_lower_bound(
    m: &PhiMatrix,
    r: &Q,
    s: &Q,
) -> Result<LadderIndex, StabilityError> {
    check_thresholds(r, s)?;
    let mut rows: Vec<usize> = Vec::new();
    let mut cols: Vec<usize> = Vec::new();
    loop {
        let mut found = None;
        'outer: for a in 0..m.rows() {
            if rows.contains(&a) || !cols.iter().all(|&b| m.entry(a, b) >= r) {
                continue;
            }
            for b in 0..m.cols() {
                if !cols.contains(&b) && rows.iter().all(|&i| m.entry(i, b) <= s) {
                    found = Some((a, b));
                    break 'outer;
                }
            }
        }
        match found {
            Some((a, b)) => {
                rows.push(a);
                cols.push(b);
            }
            None => break,
        }
    }
    let witness = LadderWitness {
        r: r.clone(),
        s: s.clone(),
        rows,
        cols,
    };
    witness
        .validate(m)
        .expect("greedy construction must be a ladder");
    Ok(LadderIndex {
        index: witness.len(),
        witness,
    })
}

/// The half-graph comparison matrix of order n: entry (i, j) is 1 when
/// i > j and 0 otherwise. Its (1, 0)-ladder index is exactly n, witnessed by
/// the diagonal sequences a_i = b_i = i.
pub fn half_graph(n: usize) -> Result<PhiMatrix, StabilityError> {
    let entries = (0..n)
        .map(|i| {
            (0..n)
                .map(|j| Q::from_integer(i64::from(i > j).into()))
                .collect()
        })
        .collect();
    PhiMatrix::from_entries(entries)
}

/// Rows whose type vector (their full row of values) lies within `epsilon`
/// of the reference vector in sup distance, with the minimum distance over
/// all rows.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct NearestRows {
    pub min_distance: Q,
    pub within: Vec<(String, Q)>,
}

pub fn nearest_rows(
    m: &PhiMatrix,
    reference: &[Q],
    epsilon: &Q,
) -> Result<NearestRows, StabilityError> {
    if reference.len() != m.cols() {
        return Err(StabilityError::TypeSize {
            expected: m.cols(),
            got: reference.len(),
        });
    }
    let reference = TypeVector {
        label: String::new(),
        coords: reference.to_vec(),
    };
    let mut min_distance: Option<Q> = None;
    let mut within = Vec::new();
    for i in 0..m.rows() {
        let row = TypeVector {
            label: m.row_labels[i].clone(),
            coords: m.row(i).to_vec(),
        };
        let d = type_metric(&reference, &row)?;
        if min_distance.as_ref().is_none_or(|cur| &d < cur) {
            min_distance = Some(d.clone());
        }
        if &d <= epsilon {
            within.push((m.row_labels[i].clone(), d));
        }
    }
    Ok(NearestRows {
        min_distance: min_distance.expect("matrix has rows"),
        within,
    })
}

/// Whether `target` lies within `epsilon` (sup distance) of the affine
/// combination `constant + sum coefficients[i] * row(rows[i])`. This checks
/// one explicit candidate definition; the report names the worst column.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DefinabilityReport {
    pub within: bool,
    pub max_error: Q,
    pub worst_col: String,
}

pub fn is_definable_by(
    m: &PhiMatrix,
    target: &[Q],
    rows: &[usize],
    coefficients: &[Q],
    constant: &Q,
    epsilon: &Q,
) -> Result<DefinabilityReport, StabilityError> {
    if target.len() != m.cols() {
        return Err(StabilityError::TypeSize {
            expected: m.cols(),
            got: target.len(),
        });
    }
    if rows.len() != coefficients.len() {
        return Err(StabilityError::TypeSize {
            expected: rows.len(),
            got: coefficients.len(),
        });
    }
    for &i in rows {
        if i >= m.rows() {
            return Err(StabilityError::BadWitness(format!("row {i} out of range")));
        }
    }
    let zero = Q::from_integer(0.into());
    let mut max_error = zero.clone();
    let mut worst_col = m.col_labels[0].clone();
    for j in 0..m.cols() {
        let mut value = constant.clone();
        for (&i, c) in rows.iter().zip(coefficients) {
            value += c * m.entry(i, j);
        }
        let mut err = &value - &target[j];
        if err < zero {
            err = -err;
        }
        if err > max_error {
            max_error = err.clone();
            worst_col = m.col_labels[j].clone();
        }
    }
    Ok(DefinabilityReport {
        within: &max_error <= epsilon,
        max_error,
        worst_col,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_formula, RelationDecl, Signature};
    use crate::rational::{q, qi};
    use rand::Rng;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn token() -> CancelToken {
        CancelToken::new()
    }

    /// Unmemoized reference search over explicit index sequences. Slower but
    /// independent of the set-state argument.
    fn ladder_oracle(m: &PhiMatrix, r: &Q, s: &Q) -> usize {
        fn go(
            m: &PhiMatrix,
            r: &Q,
            s: &Q,
            rows: &mut Vec<usize>,
            cols: &mut Vec<usize>,
        ) -> usize {
            let mut best = rows.len();
            for a in 0..m.rows() {
                if rows.contains(&a) || !cols.iter().all(|&b| m.entry(a, b) >= r) {
                    continue;
                }
                for b in 0..m.cols() {
                    if cols.contains(&b) || !rows.iter().all(|&i| m.entry(i, b) <= s) {
                        continue;
                    }
                    rows.push(a);
                    cols.push(b);
                    best = best.max(go(m, r, s, rows, cols));
                    rows.pop();
                    cols.pop();
                }
            }
            best
        }
        go(m, r, s, &mut Vec::new(), &mut Vec::new())
    }

    #[test]
    fn half_graph_index_is_its_order() {
        for n in 1..6 {
            let m = half_graph(n).unwrap();
            let result = ladder_index(&m, &qi(1), &qi(0), &token()).unwrap();
            assert_eq!(result.index, n, "order {n}");
            assert_eq!(result.witness.len(), n);
            result.witness.validate(&m).unwrap();
        }
    }

    #[test]
    fn constant_matrices_have_index_one() {
        // All entries 0: a second pair needs entry >= 1 below the diagonal.
        // All entries 1: a second pair needs entry <= 0 above it. Either way
        // only the vacuous single pair survives.
        for value in [qi(0), qi(1)] {
            let m = PhiMatrix::from_entries(vec![vec![value.clone(); 3]; 3]).unwrap();
            let result = ladder_index(&m, &qi(1), &qi(0), &token()).unwrap();
            assert_eq!(result.index, 1);
            assert_eq!(result.witness.rows, vec![0]);
            assert_eq!(result.witness.cols, vec![0]);
        }
    }

    #[test]
    fn memoized_search_matches_the_oracle_on_random_matrices() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x1adde5);
        for round in 0..40 {
            let rows = rng.gen_range(1..=6);
            let cols = rng.gen_range(1..=6);
            let entries: Vec<Vec<Q>> = (0..rows)
                .map(|_| (0..cols).map(|_| q(rng.gen_range(-4..=4), 2)).collect())
                .collect();
            let m = PhiMatrix::from_entries(entries).unwrap();
            let r = q(1, 2);
            let s = q(-1, 2);
            let exact = ladder_index(&m, &r, &s, &token()).unwrap();
            assert_eq!(exact.index, ladder_oracle(&m, &r, &s), "round {round}");
            let greedy = ladder_lower_bound(&m, &r, &s).unwrap();
            assert!(greedy.index <= exact.index, "round {round}");
            exact.witness.validate(&m).unwrap();
            greedy.witness.validate(&m).unwrap();
        }
    }

    #[test]
    fn negated_transpose_preserves_the_index_with_swapped_thresholds() {
        let mut rng = ChaCha8Rng::seed_from_u64(0x7a4e5);
        for _ in 0..25 {
            let rows = rng.gen_range(1..=5);
            let cols = rng.gen_range(1..=5);
            let entries: Vec<Vec<Q>> = (0..rows)
                .map(|_| (0..cols).map(|_| qi(rng.gen_range(-2..=2))).collect())
                .collect();
            let m = PhiMatrix::from_entries(entries).unwrap();
            // Asymmetric thresholds exercise the swap: (r, s) = (2, -1)
            // becomes (-s, -r) = (1, -2) on the negated transpose.
            let direct = ladder_index(&m, &qi(2), &qi(-1), &token()).unwrap();
            let flipped =
                ladder_index(&m.negated_transpose(), &qi(1), &qi(-2), &token()).unwrap();
            assert_eq!(direct.index, flipped.index);
        }
    }

    #[test]
    fn thresholds_must_be_ordered_and_size_capped() {
        let m = half_graph(2).unwrap();
        assert!(matches!(
            ladder_index(&m, &qi(0), &qi(0), &token()),
            Err(StabilityError::ThresholdOrder { .. })
        ));
        let big = half_graph(16).unwrap();
        assert!(matches!(
            ladder_index(&big, &qi(1), &qi(0), &token()),
            Err(StabilityError::MatrixTooLarge { got: 16, limit: 15 })
        ));
        // The greedy bound still works above the cap and follows the
        // diagonal all the way here.
        let greedy = ladder_lower_bound(&big, &qi(1), &qi(0)).unwrap();
        assert_eq!(greedy.index, 16);
    }

    #[test]
    fn wide_matrices_are_handled_up_to_the_mask_width() {
        // 2 x 40: the small dimension passes the search cap, the wide one
        // must fit the mask. Entry (1, j) = 1 for j < 20, entry (0, j) = 0:
        // rows (1, 0) with cols (5, 25) form a ladder of length 2.
        let entries = vec![
            vec![qi(0); 40],
            (0..40).map(|j| qi(i64::from(j < 20))).collect(),
        ];
        let m = PhiMatrix::from_entries(entries).unwrap();
        let result = ladder_index(&m, &qi(1), &qi(0), &token()).unwrap();
        assert_eq!(result.index, 2);
        let too_wide = PhiMatrix::from_entries(vec![vec![qi(0); 129]]).unwrap();
        assert!(matches!(
            ladder_index(&too_wide, &qi(1), &qi(0), &token()),
            Err(StabilityError::MatrixTooWide { got: 129, limit: 128 })
        ));
    }

    #[test]
    fn witness_validation_rejects_repeats_and_violations() {
        let m = half_graph(3).unwrap();
        let repeat = LadderWitness {
            r: qi(1),
            s: qi(0),
            rows: vec![1, 1],
            cols: vec![0, 1],
        };
        assert!(matches!(
            repeat.validate(&m),
            Err(StabilityError::BadWitness(_))
        ));
        // entry(rows[1] = 0, cols[0] = 1) = 0 < 1 violates the i > j rule.
        let violation = LadderWitness {
            r: qi(1),
            s: qi(0),
            rows: vec![2, 0],
            cols: vec![1, 2],
        };
        assert!(matches!(
            violation.validate(&m),
            Err(StabilityError::BadWitness(_))
        ));
        let empty = LadderWitness {
            r: qi(1),
            s: qi(0),
            rows: vec![],
            cols: vec![],
        };
        assert!(matches!(
            empty.validate(&m),
            Err(StabilityError::BadWitness(_))
        ));
    }

    fn two_var_structure() -> (FiniteStructure, Formula) {
        let sig = Signature::new(
            vec![RelationDecl {
                name: "E".into(),
                arity: 2,
                bound: qi(1),
            }],
            vec![],
        )
        .unwrap();
        // E is the order comparison on three points.
        let table: Vec<Q> = (0..3)
            .flat_map(|i| (0..3).map(move |j| qi(i64::from(i > j))))
            .collect();
        let st = FiniteStructure::new(
            sig.clone(),
            vec!["p0".into(), "p1".into(), "p2".into()],
            vec![q(1, 3), q(1, 3), q(1, 3)],
            vec![("E".into(), table)],
            vec![],
        )
        .unwrap();
        let f = parse_formula("E(u, v)", &sig).unwrap();
        (st, f)
    }

    #[test]
    fn phi_matrix_evaluates_on_structures() {
        let (st, f) = two_var_structure();
        let m = phi_matrix(&st, &f, "u", "v").unwrap();
        assert_eq!(m.rows(), 3);
        assert_eq!(m.entry(2, 0), &qi(1));
        assert_eq!(m.entry(0, 2), &qi(0));
        assert_eq!(m.bound(), &qi(1));
        assert_eq!(m.row_measure()[0], q(1, 3));
        let idx = ladder_index(&m, &qi(1), &qi(0), &token()).unwrap();
        assert_eq!(idx.index, 3);
        // Swapping the roles of the variables transposes the matrix.
        let mt = phi_matrix(&st, &f, "v", "u").unwrap();
        assert_eq!(mt.entry(0, 2), &qi(1));
    }

    #[test]
    fn phi_matrix_rejects_wrong_variables() {
        let (st, f) = two_var_structure();
        assert!(matches!(
            phi_matrix(&st, &f, "u", "u"),
            Err(StabilityError::EqualVars)
        ));
        assert!(matches!(
            phi_matrix(&st, &f, "u", "w"),
            Err(StabilityError::WrongFreeVars { .. })
        ));
    }

    #[test]
    fn type_metric_and_nearest_rows() {
        let m = PhiMatrix::from_entries(vec![
            vec![qi(0), qi(1)],
            vec![qi(0), q(3, 4)],
            vec![qi(2), qi(2)],
        ])
        .unwrap();
        let near = nearest_rows(&m, &[qi(0), qi(1)], &q(1, 4)).unwrap();
        assert_eq!(near.min_distance, qi(0));
        assert_eq!(near.within.len(), 2);
        assert_eq!(near.within[0], ("r0".into(), qi(0)));
        assert_eq!(near.within[1], ("r1".into(), q(1, 4)));
        let a = TypeVector {
            label: "a".into(),
            coords: vec![qi(1), qi(5)],
        };
        let b = TypeVector {
            label: "b".into(),
            coords: vec![qi(2), qi(3)],
        };
        assert_eq!(type_metric(&a, &b).unwrap(), qi(2));
    }

    #[test]
    fn definability_checks_an_affine_combination() {
        let m = PhiMatrix::from_entries(vec![
            vec![qi(1), qi(0), qi(1)],
            vec![qi(0), qi(1), qi(1)],
        ])
        .unwrap();
        // target = r0 + r1 exactly.
        let target = vec![qi(1), qi(1), qi(2)];
        let report =
            is_definable_by(&m, &target, &[0, 1], &[qi(1), qi(1)], &qi(0), &qi(0)).unwrap();
        assert!(report.within);
        assert_eq!(report.max_error, qi(0));
        // Perturb one coordinate; the worst column is named.
        let target = vec![qi(1), qi(1), q(5, 2)];
        let report =
            is_definable_by(&m, &target, &[0, 1], &[qi(1), qi(1)], &qi(0), &q(1, 4)).unwrap();
        assert!(!report.within);
        assert_eq!(report.max_error, q(1, 2));
        assert_eq!(report.worst_col, "c2");
    }
}
