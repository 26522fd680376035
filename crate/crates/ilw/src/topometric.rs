//! Finite topometric spaces and the epsilon-Cantor-Bendixson derivative.
//!
//! A finite topology is stored as its minimal-open-neighborhood map; the
//! derivative removes every point whose relative minimal neighborhood has
//! diameter at most epsilon, which equals the literal definition (the
//! intersection of all relatively closed F with diam(X_a \ F) <= epsilon)
//! because the removable region is exactly the union of the relatively open
//! sets of small diameter. Finite Hausdorff spaces are discrete and collapse
//! every rank to 0, so the model deliberately admits non-Hausdorff finite
//! topologies; the recursion never uses Hausdorffness.

use std::collections::BTreeSet;
use std::fmt;

use thiserror::Error;

use crate::rational::{fmt_q, q0, Q};
use crate::structures::valid_label;

/// Validation enumerates all 2^n subsets to find the closed sets.
pub const VALIDATE_LIMIT: usize = 12;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum TopoError {
    #[error("space needs at least one point")]
    EmptySpace,
    #[error("invalid label `{0}`")]
    BadLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("expected {expected} neighborhoods, got {got}")]
    MinOpenCount { expected: usize, got: usize },
    #[error("point index {0} out of range")]
    BadPoint(usize),
    #[error("metric must be a {expected}x{expected} matrix, row {row} has {got} entries")]
    MetricShape {
        expected: usize,
        row: usize,
        got: usize,
    },
    #[error("validation enumerates closed sets; {got} points exceed the limit {limit}")]
    TooManyPoints { got: usize, limit: usize },
    #[error("epsilon must be nonnegative, got {0}")]
    NegativeEpsilon(String),
    #[error("rank of the empty set is undefined")]
    EmptySet,
}

/// A finite point set with a minimal-open-neighborhood map and a rational
/// distance matrix. Construction checks shape only; the axioms are the
/// business of [`validate_topometric`], which reports violations as data.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteTopoSpace {
    points: Vec<String>,
    min_open: Vec<BTreeSet<usize>>,
    metric: Vec<Vec<Q>>,
}

impl FiniteTopoSpace {
    pub fn new(
        points: Vec<String>,
        min_open: Vec<BTreeSet<usize>>,
        metric: Vec<Vec<Q>>,
    ) -> Result<Self, TopoError> {
        if points.is_empty() {
            return Err(TopoError::EmptySpace);
        }
        let n = points.len();
        let mut seen = BTreeSet::new();
        for p in &points {
            if !valid_label(p) {
                return Err(TopoError::BadLabel(p.clone()));
            }
            if !seen.insert(p.clone()) {
                return Err(TopoError::DuplicateLabel(p.clone()));
            }
        }
        if min_open.len() != n {
            return Err(TopoError::MinOpenCount {
                expected: n,
                got: min_open.len(),
            });
        }
        for nb in &min_open {
            for &y in nb {
                if y >= n {
                    return Err(TopoError::BadPoint(y));
                }
            }
        }
        if metric.len() != n {
            return Err(TopoError::MetricShape {
                expected: n,
                row: metric.len(),
                got: metric.len(),
            });
        }
        for (i, row) in metric.iter().enumerate() {
            if row.len() != n {
                return Err(TopoError::MetricShape {
                    expected: n,
                    row: i,
                    got: row.len(),
                });
            }
        }
        Ok(Self {
            points,
            min_open,
            metric,
        })
    }

    /// The discrete topology: every singleton is open.
    pub fn discrete(points: Vec<String>, metric: Vec<Vec<Q>>) -> Result<Self, TopoError> {
        let n = points.len();
        Self::new(points, (0..n).map(|x| BTreeSet::from([x])).collect(), metric)
    }

    /// The chain on n points: minOpen(i) = {0..i}, all distances 1. Its
    /// epsilon-derivative for epsilon < 1 peels one point per step.
    pub fn chain(n: usize) -> Result<Self, TopoError> {
        let points = (0..n).map(|i| format!("p{i}")).collect();
        let min_open = (0..n).map(|i| (0..=i).collect()).collect();
        let metric = (0..n)
            .map(|i| {
                (0..n)
                    .map(|j| Q::from_integer(i64::from(i != j).into()))
                    .collect()
            })
            .collect();
        Self::new(points, min_open, metric)
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn min_open(&self, x: usize) -> &BTreeSet<usize> {
        &self.min_open[x]
    }

    pub fn distance(&self, x: usize, y: usize) -> &Q {
        &self.metric[x][y]
    }

    pub fn point_index(&self, label: &str) -> Option<usize> {
        self.points.iter().position(|p| p == label)
    }

    /// A set is open iff it contains the minimal neighborhood of each of
    /// its members.
    fn is_open(&self, set: &BTreeSet<usize>) -> bool {
        set.iter().all(|&x| self.min_open[x].is_subset(set))
    }
}

/// One broken axiom, with the witnessing points.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TopoViolation {
    /// x is missing from its own minimal neighborhood.
    MissingSelf { x: String },
    /// y lies in minOpen(x) but brings z along; neighborhoods must nest.
    NotNested { x: String, y: String, z: String },
    /// d(x, x) is nonzero.
    SelfDistance { x: String },
    Asymmetric { x: String, y: String },
    NegativeDistance { x: String, y: String },
    /// d(x, z) > d(x, y) + d(y, z).
    Triangle { x: String, y: String, z: String },
    /// d(x, y) = 0 but y is not in minOpen(x): the metric topology fails
    /// to refine the topology.
    RefinementFailure { x: String, y: String },
    /// A closed set whose closed epsilon-neighborhood is not closed.
    NeighborhoodNotClosed { set: Vec<String>, epsilon: String },
}

impl fmt::Display for TopoViolation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingSelf { x } => write!(f, "{x} is not in its own minimal neighborhood"),
            Self::NotNested { x, y, z } => write!(
                f,
                "minOpen({y}) contains {z} outside minOpen({x}) although {y} is in minOpen({x})"
            ),
            Self::SelfDistance { x } => write!(f, "d({x}, {x}) is nonzero"),
            Self::Asymmetric { x, y } => write!(f, "d({x}, {y}) differs from d({y}, {x})"),
            Self::NegativeDistance { x, y } => write!(f, "d({x}, {y}) is negative"),
            Self::Triangle { x, y, z } => {
                write!(f, "d({x}, {z}) exceeds d({x}, {y}) + d({y}, {z})")
            }
            Self::RefinementFailure { x, y } => write!(
                f,
                "d({x}, {y}) = 0 but {y} is outside minOpen({x})"
            ),
            Self::NeighborhoodNotClosed { set, epsilon } => write!(
                f,
                "the {epsilon}-neighborhood of the closed set {{{}}} is not closed",
                set.join(", ")
            ),
        }
    }
}

/// The outcome of a validation run: every violation found, with witnesses.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TopoReport {
    pub violations: Vec<TopoViolation>,
}

impl TopoReport {
    pub fn valid(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Checks every topometric axiom: the neighborhood map generates a
/// topology, d is a pseudometric, the metric topology refines the
/// topology, and closed epsilon-neighborhoods of closed sets are closed
/// for every epsilon occurring in the matrix. Violations are report
/// content, not errors. Limited to [`VALIDATE_LIMIT`] points by the
/// closed-set enumeration.
pub fn validate_topometric(space: &FiniteTopoSpace) -> Result<TopoReport, TopoError> {
    let n = space.len();
    if n > VALIDATE_LIMIT {
        return Err(TopoError::TooManyPoints {
            got: n,
            limit: VALIDATE_LIMIT,
        });
    }
    let mut violations = Vec::new();
    let label = |x: usize| space.points[x].clone();
    for x in 0..n {
        if !space.min_open[x].contains(&x) {
            violations.push(TopoViolation::MissingSelf { x: label(x) });
        }
        for &y in &space.min_open[x] {
            for &z in &space.min_open[y] {
                if !space.min_open[x].contains(&z) {
                    violations.push(TopoViolation::NotNested {
                        x: label(x),
                        y: label(y),
                        z: label(z),
                    });
                }
            }
        }
    }
    let zero = q0();
    for x in 0..n {
        if space.metric[x][x] != zero {
            violations.push(TopoViolation::SelfDistance { x: label(x) });
        }
        for y in 0..n {
            if y > x && space.metric[x][y] != space.metric[y][x] {
                violations.push(TopoViolation::Asymmetric {
                    x: label(x),
                    y: label(y),
                });
            }
            if space.metric[x][y] < zero {
                violations.push(TopoViolation::NegativeDistance {
                    x: label(x),
                    y: label(y),
                });
            }
            if x != y && space.metric[x][y] == zero && !space.min_open[x].contains(&y) {
                violations.push(TopoViolation::RefinementFailure {
                    x: label(x),
                    y: label(y),
                });
            }
            for z in 0..n {
                if &space.metric[x][z]
                    > &(&space.metric[x][y] + &space.metric[y][z])
                {
                    violations.push(TopoViolation::Triangle {
                        x: label(x),
                        y: label(y),
                        z: label(z),
                    });
                }
            }
        }
    }
    // Closed epsilon-neighborhoods of closed sets, for every distance value.
    let epsilons: BTreeSet<&Q> = space.metric.iter().flatten().collect();
    let closed_sets: Vec<BTreeSet<usize>> = (0..(1u32 << n))
        .map(|mask| (0..n).filter(|x| mask & (1 << x) != 0).collect::<BTreeSet<usize>>())
        .filter(|set| {
            let complement: BTreeSet<usize> =
                (0..n).filter(|x| !set.contains(x)).collect();
            space.is_open(&complement)
        })
        .collect();
    for f_set in &closed_sets {
        if f_set.is_empty() {
            continue;
        }
        for &eps in &epsilons {
            if eps < &zero {
                continue;
            }
            let neighborhood: BTreeSet<usize> = (0..n)
                .filter(|&x| f_set.iter().any(|&y| &space.metric[x][y] <= eps))
                .collect();
            if !closed_sets.contains(&neighborhood) {
                violations.push(TopoViolation::NeighborhoodNotClosed {
                    set: f_set.iter().map(|&x| label(x)).collect(),
                    epsilon: fmt_q(eps),
                });
            }
        }
    }
    Ok(TopoReport { violations })
}

/// Max pairwise distance within the set; 0 for the empty set or singletons.
pub fn diameter(space: &FiniteTopoSpace, set: &BTreeSet<usize>) -> Result<Q, TopoError> {
    for &x in set {
        if x >= space.len() {
            return Err(TopoError::BadPoint(x));
        }
    }
    let mut best = q0();
    for &x in set {
        for &y in set {
            if &space.metric[x][y] > &best {
                best = space.metric[x][y].clone();
            }
        }
    }
    Ok(best)
}

/// The derivative sequence X_0 superset X_1 superset ... down to the first
/// repeated set. The last entry is the stabilized set X_infinity; all
/// earlier entries are strictly decreasing, so there are at most
/// n + 1 entries.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CbSequence {
    sets: Vec<BTreeSet<usize>>,
}

impl CbSequence {
    pub fn sets(&self) -> &[BTreeSet<usize>] {
        &self.sets
    }

    /// X_alpha, reading past the end as the stabilized set.
    pub fn level(&self, alpha: usize) -> &BTreeSet<usize> {
        &self.sets[alpha.min(self.sets.len() - 1)]
    }

    pub fn stabilized(&self) -> &BTreeSet<usize> {
        self.sets.last().expect("sequence starts at X_0")
    }

    /// Number of strict shrinking steps taken.
    pub fn steps(&self) -> usize {
        self.sets.len() - 1
    }
}

/// Iterates the epsilon-derivative: each step removes every point whose
/// minimal neighborhood, relative to the current set, has diameter at most
/// epsilon.
pub fn cb_sequence(space: &FiniteTopoSpace, epsilon: &Q) -> Result<CbSequence, TopoError> {
    if epsilon < &q0() {
        return Err(TopoError::NegativeEpsilon(fmt_q(epsilon)));
    }
    let mut sets = vec![(0..space.len()).collect::<BTreeSet<usize>>()];
    loop {
        let current = sets.last().expect("nonempty");
        let next: BTreeSet<usize> = current
            .iter()
            .filter(|&&x| {
                let relative: BTreeSet<usize> =
                    space.min_open[x].intersection(current).copied().collect();
                &diameter(space, &relative).expect("indices in range") > epsilon
            })
            .copied()
            .collect();
        if &next == current {
            return Ok(CbSequence { sets });
        }
        sets.push(next);
    }
}

/// A finite rank or the symbol for "meets the stable core".
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum CbRank {
    Finite(usize),
    Infinite,
}

impl fmt::Display for CbRank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Finite(alpha) => write!(f, "{alpha}"),
            Self::Infinite => write!(f, "inf"),
        }
    }
}

/// The largest alpha with U meeting X_alpha, or infinite when U meets the
/// stabilized set. U must be nonempty.
pub fn cb_rank(
    space: &FiniteTopoSpace,
    epsilon: &Q,
    u: &BTreeSet<usize>,
) -> Result<CbRank, TopoError> {
    if u.is_empty() {
        return Err(TopoError::EmptySet);
    }
    for &x in u {
        if x >= space.len() {
            return Err(TopoError::BadPoint(x));
        }
    }
    let seq = cb_sequence(space, epsilon)?;
    if !seq.stabilized().is_disjoint(u) {
        return Ok(CbRank::Infinite);
    }
    let alpha = seq
        .sets()
        .iter()
        .rposition(|set| !set.is_disjoint(u))
        .expect("U meets X_0");
    Ok(CbRank::Finite(alpha))
}
