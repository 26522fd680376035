//! Dependence diagnostics over finite measured function families: exact D_k
//! product-measure computation, the least-k almost-dependence verdict,
//! independence (shattering) dimension, and L1/a.e. comparisons.
//!
//! D_k(A, E, s, r) is the union over f in A of the interleaved boxes
//! (L_f x H_f)^k, where L_f = {x in E : f(x) <= s} and H_f = {x in E :
//! f(x) >= r}. Its product measure is computed exactly by
//! inclusion-exclusion over distinct (L, H) pairs.

use std::collections::BTreeSet;

use thiserror::Error;

use crate::cancel::{CancelToken, Cancelled};
use crate::rational::{fmt_q, q0, Q};
use crate::stability::{LadderWitness, PhiMatrix, StabilityError, TypeVector};
use crate::structures::valid_label;

/// Inclusion-exclusion is over 2^m subsets of distinct (L, H) pairs.
pub const DK_PAIR_LIMIT: usize = 20;

/// Level sets are stored as 128-bit masks, so the carrier may not exceed this.
pub const CARRIER_WIDTH: usize = 128;

/// Shattering enumeration walks all carrier subsets; this caps the carrier.
pub const SHATTER_LIMIT: usize = 20;

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NipError {
    #[error("carrier needs at least one point")]
    EmptyCarrier,
    #[error("invalid label `{0}`")]
    BadLabel(String),
    #[error("duplicate label `{0}`")]
    DuplicateLabel(String),
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weight of `{0}` is negative")]
    NegativeWeight(String),
    #[error("weights must sum to 1, got {0}")]
    WeightSum(String),
    #[error("function `{name}` has {got} values, expected {expected}")]
    FunctionSize {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("unknown function `{0}`")]
    UnknownFunction(String),
    #[error("unknown point `{0}`")]
    UnknownPoint(String),
    #[error("point index {0} out of range")]
    BadPoint(usize),
    #[error("s = {s} must be below r = {r}")]
    ThresholdOrder { s: String, r: String },
    #[error("k must be at least 1")]
    ZeroK,
    #[error("{got} distinct (L, H) pairs exceed the inclusion-exclusion limit {limit}")]
    TooManyPairs { got: usize, limit: usize },
    #[error("level sets are {limit}-bit masks; a carrier of {got} points does not fit")]
    CarrierTooWide { got: usize, limit: usize },
    #[error("shattering enumeration needs a carrier of at most {limit} points, got {got}")]
    CarrierTooLarge { got: usize, limit: usize },
    #[error("the set E has measure zero")]
    NullSet,
    #[error("expected vectors of length {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },
    #[error("tuple is not shattered: {0}")]
    NotShattered(String),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error(transparent)]
    Cancelled(#[from] Cancelled),
}

/// One deduplicated member of a family: every original name that carried
/// this exact value vector, in first-seen order.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FamilyFunction {
    names: Vec<String>,
    values: Vec<Q>,
}

impl FamilyFunction {
    pub fn names(&self) -> &[String] {
        &self.names
    }

    pub fn values(&self) -> &[Q] {
        &self.values
    }

    /// All merged names joined with `=`.
    pub fn display_name(&self) -> String {
        self.names.join("=")
    }
}

/// Named rational functions on a finite measured carrier. Functions with
/// identical value vectors are merged, keeping every name.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FunctionFamily {
    points: Vec<String>,
    weights: Vec<Q>,
    functions: Vec<FamilyFunction>,
}

impl FunctionFamily {
    pub fn new(
        points: Vec<String>,
        weights: Vec<Q>,
        functions: Vec<(String, Vec<Q>)>,
    ) -> Result<Self, NipError> {
        if points.is_empty() {
            return Err(NipError::EmptyCarrier);
        }
        let mut seen = BTreeSet::new();
        for p in &points {
            if !valid_label(p) {
                return Err(NipError::BadLabel(p.clone()));
            }
            if !seen.insert(p.clone()) {
                return Err(NipError::DuplicateLabel(p.clone()));
            }
        }
        if weights.len() != points.len() {
            return Err(NipError::WeightCount {
                expected: points.len(),
                got: weights.len(),
            });
        }
        for (p, w) in points.iter().zip(&weights) {
            if w < &q0() {
                return Err(NipError::NegativeWeight(p.clone()));
            }
        }
        let total: Q = weights.iter().sum();
        if total != Q::from_integer(1.into()) {
            return Err(NipError::WeightSum(fmt_q(&total)));
        }
        let mut merged: Vec<FamilyFunction> = Vec::new();
        let mut names = BTreeSet::new();
        for (name, values) in functions {
            if !valid_label(&name) {
                return Err(NipError::BadLabel(name));
            }
            if !names.insert(name.clone()) {
                return Err(NipError::DuplicateLabel(name));
            }
            if values.len() != points.len() {
                return Err(NipError::FunctionSize {
                    name,
                    expected: points.len(),
                    got: values.len(),
                });
            }
            match merged.iter_mut().find(|f| f.values == values) {
                Some(f) => f.names.push(name),
                None => merged.push(FamilyFunction {
                    names: vec![name],
                    values,
                }),
            }
        }
        Ok(Self {
            points,
            weights,
            functions: merged,
        })
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn weights(&self) -> &[Q] {
        &self.weights
    }

    /// Carrier size.
    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    /// Deduplicated functions, in first-seen order.
    pub fn functions(&self) -> &[FamilyFunction] {
        &self.functions
    }

    /// Looks a function up by any of its original names.
    pub fn function(&self, name: &str) -> Option<&FamilyFunction> {
        self.functions
            .iter()
            .find(|f| f.names.iter().any(|n| n == name))
    }

    pub fn point_index(&self, label: &str) -> Option<usize> {
        self.points.iter().position(|p| p == label)
    }

    /// Maps point labels to an index set.
    pub fn point_set(&self, labels: &[String]) -> Result<BTreeSet<usize>, NipError> {
        labels
            .iter()
            .map(|l| {
                self.point_index(l)
                    .ok_or_else(|| NipError::UnknownPoint(l.clone()))
            })
            .collect()
    }

    fn mask_measure(&self, mask: u128) -> Q {
        self.weights
            .iter()
            .enumerate()
            .filter(|(i, _)| mask & (1 << i) != 0)
            .map(|(_, w)| w)
            .sum()
    }

    pub fn set_measure(&self, set: &BTreeSet<usize>) -> Result<Q, NipError> {
        let mut total = q0();
        for &x in set {
            if x >= self.len() {
                return Err(NipError::BadPoint(x));
            }
            total += &self.weights[x];
        }
        Ok(total)
    }
}

fn check_thresholds(s: &Q, r: &Q) -> Result<(), NipError> {
    if s >= r {
        return Err(NipError::ThresholdOrder {
            s: fmt_q(s),
            r: fmt_q(r),
        });
    }
    Ok(())
}

/// The distinct nonempty-box (L, H) mask pairs of the family on E. Pairs
/// whose box is empty contribute nothing to the union and are dropped
/// before the deduplication and the pair-count limit.
fn level_pairs(
    fam: &FunctionFamily,
    e: &BTreeSet<usize>,
    s: &Q,
    r: &Q,
) -> Result<Vec<(u128, u128)>, NipError> {
    if fam.len() > CARRIER_WIDTH {
        return Err(NipError::CarrierTooWide {
            got: fam.len(),
            limit: CARRIER_WIDTH,
        });
    }
    for &x in e {
        if x >= fam.len() {
            return Err(NipError::BadPoint(x));
        }
    }
    let mut pairs = BTreeSet::new();
    for f in &fam.functions {
        let mut low = 0u128;
        let mut high = 0u128;
        for &x in e {
            if &f.values[x] <= s {
                low |= 1 << x;
            }
            if &f.values[x] >= r {
                high |= 1 << x;
            }
        }
        if low != 0 && high != 0 {
            pairs.insert((low, high));
        }
    }
    if pairs.len() > DK_PAIR_LIMIT {
        return Err(NipError::TooManyPairs {
            got: pairs.len(),
            limit: DK_PAIR_LIMIT,
        });
    }
    Ok(pairs.into_iter().collect())
}

/// Inclusion-exclusion over nonempty subfamilies. Branches whose running
/// intersection is empty on either side are pruned: every superset's term
/// vanishes with it.
fn ie_boxes(
    fam: &FunctionFamily,
    pairs: &[(u128, u128)],
    k: usize,
    token: &CancelToken,
) -> Result<Q, Cancelled> {
    fn go(
        fam: &FunctionFamily,
        pairs: &[(u128, u128)],
        idx: usize,
        low: u128,
        high: u128,
        positive: bool,
        k: usize,
        total: &mut Q,
        token: &CancelToken,
    ) -> Result<(), Cancelled> {
        token.check()?;
        for i in idx..pairs.len() {
            let l = low & pairs[i].0;
            let h = high & pairs[i].1;
            if l == 0 || h == 0 {
                continue;
            }
            let term = num_traits::pow(fam.mask_measure(l) * fam.mask_measure(h), k);
            if positive {
                *total += term;
            } else {
                *total -= term;
            }
            go(fam, pairs, i + 1, l, h, !positive, k, total, token)?;
        }
        Ok(())
    }
    let mut total = q0();
    go(fam, pairs, 0, !0, !0, true, k, &mut total, token)?;
    Ok(total)
}

/// Exact product measure of D_k(A, E, s, r) = union over f of the
/// interleaved boxes (L_f x H_f)^k, a subset of E^{2k}. Requires s < r,
/// k >= 1, and at most [`DK_PAIR_LIMIT`] distinct (L, H) pairs.
pub fn dk_measure(
    fam: &FunctionFamily,
    e: &BTreeSet<usize>,
    s: &Q,
    r: &Q,
    k: usize,
    token: &CancelToken,
) -> Result<Q, NipError> {
    check_thresholds(s, r)?;
    if k == 0 {
        return Err(NipError::ZeroK);
    }
    let pairs = level_pairs(fam, e, s, r)?;
    let result = ie_boxes(fam, &pairs, k, token)?;
    let bound = num_traits::pow(fam.set_measure(e)?, 2 * k);
    assert!(result >= q0() && result <= bound, "union must fit in E^2k");
    Ok(result)
}

/// Outcome of the bounded almost-dependence search.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum DependenceVerdict {
    /// The least k <= kmax with D_k measure strictly below the full box.
    AlmostDependent { k: usize, dk: Q, bound: Q },
    /// Every k <= kmax had D_k of full measure: the family fails the test
    /// at scale epsilon = mu(E); the checked values are the witness data.
    /// On a finite carrier this cannot happen (see
    /// [`almost_dependence_check`]), but the bounded contract reports it
    /// honestly rather than claiming independence.
    Exhausted {
        epsilon: Q,
        checked: Vec<(usize, Q, Q)>,
    },
}

/// Finds the least k <= kmax with dk_measure < mu(E)^2k. Requires
/// mu(E) > 0.
///
/// On a finite carrier the verdict is always almost-dependent at k = 1:
/// E contains an atom x of positive weight, and the constant pair (x, x)
/// lies in no box, since no f has f(x) <= s and f(x) >= r with s < r. The
/// exhausted branch exists for the bounded-search contract only.
pub fn almost_dependence_check(
    fam: &FunctionFamily,
    e: &BTreeSet<usize>,
    s: &Q,
    r: &Q,
    kmax: usize,
    token: &CancelToken,
) -> Result<DependenceVerdict, NipError> {
    check_thresholds(s, r)?;
    if kmax == 0 {
        return Err(NipError::ZeroK);
    }
    let mass = fam.set_measure(e)?;
    if mass == q0() {
        return Err(NipError::NullSet);
    }
    let mut checked = Vec::new();
    for k in 1..=kmax {
        let dk = dk_measure(fam, e, s, r, k, token)?;
        let bound = num_traits::pow(mass.clone(), 2 * k);
        if dk < bound {
            return Ok(DependenceVerdict::AlmostDependent { k, dk, bound });
        }
        checked.push((k, dk, bound));
    }
    Ok(DependenceVerdict::Exhausted {
        epsilon: mass,
        checked,
    })
}

/// The low/high pattern of one function on a point tuple: bit i set when
/// the function is low at tuple position i. `None` when some coordinate
/// falls in the gap (neither low nor high), realizing no pattern.
fn tuple_pattern(f: &FamilyFunction, tuple: &[usize], s: &Q, r: &Q) -> Option<u32> {
    let mut pattern = 0u32;
    for (i, &x) in tuple.iter().enumerate() {
        if &f.values[x] <= s {
            pattern |= 1 << i;
        } else if &f.values[x] < r {
            return None;
        }
    }
    Some(pattern)
}

fn is_shattered(fam: &FunctionFamily, tuple: &[usize], s: &Q, r: &Q) -> bool {
    let want = 1usize << tuple.len();
    let mut seen = vec![false; want];
    let mut count = 0usize;
    for f in &fam.functions {
        if let Some(p) = tuple_pattern(f, tuple, s, r) {
            if !seen[p as usize] {
                seen[p as usize] = true;
                count += 1;
                if count == want {
                    return true;
                }
            }
        }
    }
    false
}

/// Enumerates size-k index subsets of 0..n in lexicographic order.
fn for_each_subset<F>(n: usize, k: usize, mut visit: F) -> Result<(), NipError>
where
    F: FnMut(&[usize]) -> Result<bool, NipError>,
{
    let mut tuple: Vec<usize> = (0..k).collect();
    if k > n {
        return Ok(());
    }
    loop {
        if visit(&tuple)? {
            return Ok(());
        }
        // Advance the rightmost index that can still move.
        let mut i = k;
        loop {
            if i == 0 {
                return Ok(());
            }
            i -= 1;
            if tuple[i] < n - (k - i) {
                tuple[i] += 1;
                for j in i + 1..k {
                    tuple[j] = tuple[j - 1] + 1;
                }
                break;
            }
        }
    }
}

/// The largest k such that some k points are shattered: for every
/// I subset of {1..k}, some f is low (<= s) exactly on the positions in I
/// and high (>= r) on the rest. Returns the lexicographically first
/// shattered tuple at that k; (0, empty) when not even one point carries
/// both a low and a high label. Requires the carrier to have at most
/// [`SHATTER_LIMIT`] points.
pub fn independence_dimension(
    fam: &FunctionFamily,
    s: &Q,
    r: &Q,
    token: &CancelToken,
) -> Result<(usize, Vec<usize>), NipError> {
    check_thresholds(s, r)?;
    if fam.len() > SHATTER_LIMIT {
        return Err(NipError::CarrierTooLarge {
            got: fam.len(),
            limit: SHATTER_LIMIT,
        });
    }
    // Shattering k points needs 2^k distinct patterns, one per function.
    let mut cap = 0usize;
    while cap < fam.len() && (1usize << (cap + 1)) <= fam.functions.len() {
        cap += 1;
    }
    for k in (1..=cap).rev() {
        let mut witness = None;
        for_each_subset(fam.len(), k, |tuple| {
            token.check()?;
            if is_shattered(fam, tuple, s, r) {
                witness = Some(tuple.to_vec());
                return Ok(true);
            }
            Ok(false)
        })?;
        if let Some(w) = witness {
            return Ok((k, w));
        }
    }
    Ok((0, Vec::new()))
}

/// The family as a matrix: one row per deduplicated function, one column
/// per carrier point, uniform row measure, carrier weights as the column
/// measure.
pub fn family_matrix(fam: &FunctionFamily) -> Result<PhiMatrix, NipError> {
    let zero = q0();
    let bound = fam
        .functions
        .iter()
        .flat_map(|f| &f.values)
        .map(|v| if v < &zero { -v } else { v.clone() })
        .max()
        .unwrap_or(zero);
    let rows = fam.functions.len();
    Ok(PhiMatrix::new(
        fam.functions.iter().map(FamilyFunction::display_name).collect(),
        fam.points.clone(),
        fam.functions.iter().map(|f| f.values.clone()).collect(),
        bound,
        vec![Q::new(1.into(), (rows as i64).into()); rows],
        fam.weights.clone(),
    )?)
}

/// Builds the ladder hidden inside a shattered tuple w_1..w_k: row i is a
/// function low exactly on {w_i+1, ..., w_k}, so the function rows and the
/// tuple columns form a valid (r, s)-ladder of length k in the family
/// matrix. Returns the matrix and the re-validated witness.
pub fn shattering_ladder(
    fam: &FunctionFamily,
    witness: &[usize],
    s: &Q,
    r: &Q,
) -> Result<(PhiMatrix, LadderWitness), NipError> {
    check_thresholds(s, r)?;
    let k = witness.len();
    if k == 0 {
        return Err(NipError::NotShattered("empty tuple".into()));
    }
    for &x in witness {
        if x >= fam.len() {
            return Err(NipError::BadPoint(x));
        }
    }
    let mut rows = Vec::with_capacity(k);
    for i in 1..=k {
        // Low exactly at tuple positions i+1..k (0-indexed bits i..k-1).
        let target: u32 = (i..k).map(|b| 1u32 << b).sum();
        let row = fam
            .functions
            .iter()
            .position(|f| tuple_pattern(f, witness, s, r) == Some(target))
            .ok_or_else(|| {
                NipError::NotShattered(format!(
                    "no function is low exactly on positions {}..{k}",
                    i + 1
                ))
            })?;
        rows.push(row);
    }
    let matrix = family_matrix(fam)?;
    let ladder = LadderWitness {
        r: r.clone(),
        s: s.clone(),
        rows,
        cols: witness.to_vec(),
    };
    ladder.validate(&matrix)?;
    Ok((matrix, ladder))
}

/// Integral of |a - b| against mu.
pub fn l1_distance(a: &[Q], b: &[Q], mu: &[Q]) -> Result<Q, NipError> {
    if a.len() != b.len() || mu.len() != a.len() {
        return Err(NipError::LengthMismatch {
            expected: mu.len(),
            got: if a.len() != mu.len() { a.len() } else { b.len() },
        });
    }
    let zero = q0();
    Ok(a.iter()
        .zip(b)
        .zip(mu)
        .map(|((x, y), w)| {
            let d = x - y;
            w * if d < zero { -d } else { d }
        })
        .sum())
}

/// An almost-everywhere equivalence class of vectors on a measured carrier:
/// two vectors are the same class iff they agree on every point of positive
/// weight. Classes are comparable only when built over the same weights.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct L1Class {
    representative: Vec<Q>,
    key: Vec<Option<Q>>,
}

impl L1Class {
    pub fn new(representative: Vec<Q>, mu: &[Q]) -> Result<Self, NipError> {
        if representative.len() != mu.len() {
            return Err(NipError::LengthMismatch {
                expected: mu.len(),
                got: representative.len(),
            });
        }
        let key = representative
            .iter()
            .zip(mu)
            .map(|(v, w)| (w > &q0()).then(|| v.clone()))
            .collect();
        Ok(Self {
            representative,
            key,
        })
    }

    pub fn representative(&self) -> &[Q] {
        &self.representative
    }

    pub fn same_class(&self, other: &Self) -> bool {
        self.key == other.key
    }
}

/// True iff psi(b) = p(b) for every column b of positive weight.
pub fn almost_defines(psi: &TypeVector, p: &TypeVector, mu: &[Q]) -> Result<bool, NipError> {
    if psi.coords.len() != mu.len() || p.coords.len() != mu.len() {
        return Err(NipError::LengthMismatch {
            expected: mu.len(),
            got: if psi.coords.len() != mu.len() {
                psi.coords.len()
            } else {
                p.coords.len()
            },
        });
    }
    Ok(psi
        .coords
        .iter()
        .zip(&p.coords)
        .zip(mu)
        .all(|((a, b), w)| w == &q0() || a == b))
}

/// Partitions the vectors by almost-everywhere equality. Each class lists
/// input indices; the first listed member is the representative. A.e.
/// equality is coordinatewise equality on the support, hence transitive, so
/// comparing against representatives suffices.
pub fn quotient_types(
    vectors: &[TypeVector],
    mu: &[Q],
) -> Result<Vec<Vec<usize>>, NipError> {
    let mut classes: Vec<Vec<usize>> = Vec::new();
    for (i, v) in vectors.iter().enumerate() {
        let mut placed = false;
        for class in &mut classes {
            if almost_defines(&vectors[class[0]], v, mu)? {
                class.push(i);
                placed = true;
                break;
            }
        }
        if !placed {
            classes.push(vec![i]);
        }
    }
    Ok(classes)
}
