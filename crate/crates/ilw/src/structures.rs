//! Finite probability structures: a weighted point set interpreting a
//! signature, with exact evaluation of formulas, sup-norms over assignments,
//! superlevel-set minimalization, and the two-structure substructure check.

use std::collections::{BTreeMap, BTreeSet};

use num_traits::{One, Signed, Zero};
use thiserror::Error;

use crate::cancel::{CancelToken, Cancelled};
use crate::logic::{print_formula, Comparator, Formula, Node, Signature, Statement, Term, Theory};
use crate::rational::{fmt_q, q0, Q};

/// Default ceiling on the number of assignments `sup_norm` enumerates.
pub const SUP_NORM_LIMIT: u128 = 10_000_000;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum StructureError {
    #[error(transparent)]
    Logic(#[from] crate::logic::LogicError),
    #[error("structure needs at least one point")]
    EmptySpace,
    #[error("invalid point label `{0}`")]
    BadPointLabel(String),
    #[error("duplicate point label `{0}`")]
    DuplicatePoint(String),
    #[error("expected {expected} weights, got {got}")]
    WeightCount { expected: usize, got: usize },
    #[error("weight of `{0}` is negative")]
    NegativeWeight(String),
    #[error("weights must sum to 1, got {0}")]
    WeightSum(String),
    #[error("missing interpretation for relation `{0}`")]
    MissingRelation(String),
    #[error("`{0}` is not a relation of the signature")]
    ExtraRelation(String),
    #[error("relation `{name}`: expected {expected} values, got {got}")]
    TableSize {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("relation `{name}` at ({tuple}): |{value}| exceeds the bound {bound}")]
    EntryBound {
        name: String,
        tuple: String,
        value: String,
        bound: String,
    },
    #[error("missing interpretation for constant `{0}`")]
    MissingConstant(String),
    #[error("`{0}` is not a constant of the signature")]
    ExtraConstant(String),
    #[error("unknown point label `{0}`")]
    UnknownPoint(String),
    #[error("point index {0} out of range")]
    BadPointIndex(usize),
    #[error("free variable `{0}` has no assignment")]
    Unassigned(String),
    #[error("formula uses `{0}`, which this structure's signature lacks")]
    ForeignSymbol(String),
    #[error("formula uses `{name}` with arity {used}, but the signature declares {declared}")]
    ForeignArity {
        name: String,
        used: usize,
        declared: usize,
    },
    #[error("sup-norm would enumerate {0} assignments, over the limit {1}")]
    TooManyAssignments(u128, u128),
    #[error("parameter `{0}` is also the minimalization variable")]
    ParamCollision(String),
    #[error("structures have different signatures")]
    SignatureMismatch,
    #[error("embedding must list an image for each of the {expected} points, got {got}")]
    EmbeddingSize { expected: usize, got: usize },
    #[error("embedding is not injective: points `{0}` and `{1}` share an image")]
    EmbeddingNotInjective(String, String),
    #[error("embedding does not preserve {0}")]
    EmbeddingNotMorphism(String),
    #[error(transparent)]
    Cancelled(#[from] Cancelled),
}

/// Row-major value table of one relation; `values.len() == n^arity`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Table {
    pub arity: usize,
    pub values: Vec<Q>,
}

impl Table {
    /// Flat index of a tuple; `idx.len() == arity`, entries `< n`.
    pub fn flat(&self, n: usize, idx: &[usize]) -> usize {
        debug_assert_eq!(idx.len(), self.arity);
        idx.iter().fold(0, |acc, &i| acc * n + i)
    }
}

pub(crate) fn valid_label(s: &str) -> bool {
    !s.is_empty() && s.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'_')
}

/// A finite set of labeled points with probability weights, interpreting
/// every relation (within its bound) and constant of a signature.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteStructure {
    sig: Signature,
    points: Vec<String>,
    weights: Vec<Q>,
    tables: Vec<Table>,
    consts: Vec<usize>,
}

impl FiniteStructure {
    /// Builds and fully validates a structure. `relation_values` holds
    /// row-major tables keyed by relation name; `constants` maps constant
    /// names to point labels. Everything declared must be interpreted.
    pub fn new(
        sig: Signature,
        points: Vec<String>,
        weights: Vec<Q>,
        relation_values: Vec<(String, Vec<Q>)>,
        constants: Vec<(String, String)>,
    ) -> Result<Self, StructureError> {
        if points.is_empty() {
            return Err(StructureError::EmptySpace);
        }
        let mut seen = BTreeSet::new();
        for p in &points {
            if !valid_label(p) {
                return Err(StructureError::BadPointLabel(p.clone()));
            }
            if !seen.insert(p.clone()) {
                return Err(StructureError::DuplicatePoint(p.clone()));
            }
        }
        if weights.len() != points.len() {
            return Err(StructureError::WeightCount {
                expected: points.len(),
                got: weights.len(),
            });
        }
        for (p, w) in points.iter().zip(&weights) {
            if w.is_negative() {
                return Err(StructureError::NegativeWeight(p.clone()));
            }
        }
        let total: Q = weights.iter().cloned().sum();
        if !total.is_one() {
            return Err(StructureError::WeightSum(fmt_q(&total)));
        }
        let n = points.len();
        for (name, _) in &relation_values {
            if sig.relation(name).is_none() {
                return Err(StructureError::ExtraRelation(name.clone()));
            }
        }
        let mut tables = Vec::new();
        for decl in sig.relations() {
            let values = relation_values
                .iter()
                .find(|(name, _)| *name == decl.name)
                .map(|(_, v)| v.clone())
                .ok_or_else(|| StructureError::MissingRelation(decl.name.clone()))?;
            let expected = n.pow(decl.arity as u32);
            if values.len() != expected {
                return Err(StructureError::TableSize {
                    name: decl.name.clone(),
                    expected,
                    got: values.len(),
                });
            }
            for (flat, v) in values.iter().enumerate() {
                if v.abs() > decl.bound {
                    let tuple = decode_tuple(flat, n, decl.arity)
                        .into_iter()
                        .map(|i| points[i].clone())
                        .collect::<Vec<_>>()
                        .join(", ");
                    return Err(StructureError::EntryBound {
                        name: decl.name.clone(),
                        tuple,
                        value: fmt_q(v),
                        bound: fmt_q(&decl.bound),
                    });
                }
            }
            tables.push(Table {
                arity: decl.arity,
                values,
            });
        }
        for (name, _) in &constants {
            if !sig.is_constant(name) {
                return Err(StructureError::ExtraConstant(name.clone()));
            }
        }
        let mut consts = Vec::new();
        for cname in sig.constants() {
            let label = constants
                .iter()
                .find(|(name, _)| name == cname)
                .map(|(_, l)| l.clone())
                .ok_or_else(|| StructureError::MissingConstant(cname.clone()))?;
            let idx = points
                .iter()
                .position(|p| *p == label)
                .ok_or(StructureError::UnknownPoint(label))?;
            consts.push(idx);
        }
        Ok(Self {
            sig,
            points,
            weights,
            tables,
            consts,
        })
    }

    pub fn signature(&self) -> &Signature {
        &self.sig
    }

    pub fn points(&self) -> &[String] {
        &self.points
    }

    pub fn weights(&self) -> &[Q] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn point_index(&self, label: &str) -> Option<usize> {
        self.points.iter().position(|p| p == label)
    }

    pub fn table(&self, relation: &str) -> Option<&Table> {
        self.sig.relation_index(relation).map(|i| &self.tables[i])
    }

    pub fn constant_point(&self, name: &str) -> Option<usize> {
        self.sig.constant_index(name).map(|i| self.consts[i])
    }

    /// Measure of a set of point indices.
    pub fn measure_of(&self, set: &BTreeSet<usize>) -> Q {
        set.iter().map(|&i| self.weights[i].clone()).sum()
    }

    /// Checks that every atom of `f` matches this structure's signature and
    /// that `assign` covers the free variables with valid point indices.
    fn check_compatible(
        &self,
        f: &Formula,
        assign: &BTreeMap<String, usize>,
    ) -> Result<(), StructureError> {
        for v in f.free_vars() {
            match assign.get(v) {
                None => return Err(StructureError::Unassigned(v.clone())),
                Some(&i) if i >= self.points.len() => {
                    return Err(StructureError::BadPointIndex(i))
                }
                _ => {}
            }
        }
        self.check_symbols(f)
    }

    /// Checks that every symbol in the formula is declared in this
    /// structure's signature with the right arity.
    pub fn check_symbols(&self, f: &Formula) -> Result<(), StructureError> {
        match f.node() {
            Node::Rat(_) => Ok(()),
            Node::Atom { relation, args, .. } => {
                let decl = self
                    .sig
                    .relation(relation)
                    .ok_or_else(|| StructureError::ForeignSymbol(relation.clone()))?;
                if decl.arity != args.len() {
                    return Err(StructureError::ForeignArity {
                        name: relation.clone(),
                        used: args.len(),
                        declared: decl.arity,
                    });
                }
                for t in args {
                    if let Term::Const(c) = t {
                        if !self.sig.is_constant(c) {
                            return Err(StructureError::ForeignSymbol(c.clone()));
                        }
                    }
                }
                Ok(())
            }
            Node::Linear { left, right, .. } | Node::Product { left, right } => {
                self.check_symbols(left)?;
                self.check_symbols(right)
            }
            Node::Abs(body) => self.check_symbols(body),
            Node::Integral { body, .. } => self.check_symbols(body),
        }
    }

    /// Exact value of `f` under an assignment of point indices to its free
    /// variables. Extra keys in `assign` are ignored.
    pub fn evaluate(
        &self,
        f: &Formula,
        assign: &BTreeMap<String, usize>,
    ) -> Result<Q, StructureError> {
        self.check_compatible(f, assign)?;
        let mut env = assign.clone();
        Ok(self.eval_rec(f, &mut env))
    }

    fn eval_rec(&self, f: &Formula, env: &mut BTreeMap<String, usize>) -> Q {
        match f.node() {
            Node::Rat(v) => v.clone(),
            Node::Atom { relation, args, .. } => {
                let ri = self.sig.relation_index(relation).expect("checked symbol");
                let table = &self.tables[ri];
                let idx: Vec<usize> = args
                    .iter()
                    .map(|t| match t {
                        Term::Var(v) => *env.get(v).expect("checked assignment"),
                        Term::Const(c) => self.constant_point(c).expect("checked symbol"),
                    })
                    .collect();
                table.values[table.flat(self.points.len(), &idx)].clone()
            }
            Node::Linear {
                cl,
                left,
                cr,
                right,
            } => cl * self.eval_rec(left, env) + cr * self.eval_rec(right, env),
            Node::Product { left, right } => self.eval_rec(left, env) * self.eval_rec(right, env),
            Node::Abs(body) => self.eval_rec(body, env).abs(),
            Node::Integral { var, body } => {
                let mut acc = q0();
                let saved = env.get(var).copied();
                for i in 0..self.points.len() {
                    if self.weights[i].is_zero() {
                        continue;
                    }
                    env.insert(var.clone(), i);
                    acc += &self.weights[i] * self.eval_rec(body, env);
                }
                match saved {
                    Some(s) => env.insert(var.clone(), s),
                    None => env.remove(var),
                };
                acc
            }
        }
    }

    /// Whether a closed statement holds here.
    pub fn satisfies_statement(&self, st: &Statement) -> Result<bool, StructureError> {
        let value = self.evaluate(st.formula(), &BTreeMap::new())?;
        Ok(st.comparator().holds(&value, st.threshold()))
    }

    /// Checks every statement in order; reports the first failure with both
    /// sides of the comparison.
    pub fn satisfies_theory(&self, th: &Theory) -> Result<TheoryReport, StructureError> {
        for (index, entry) in th.entries.iter().enumerate() {
            let value = self.evaluate(entry.statement.formula(), &BTreeMap::new())?;
            if !entry
                .statement
                .comparator()
                .holds(&value, entry.statement.threshold())
            {
                return Ok(TheoryReport {
                    pass: false,
                    failure: Some(TheoryFailure {
                        index,
                        label: entry.label.clone(),
                        statement: entry.statement.render(),
                        value,
                        threshold: entry.statement.threshold().clone(),
                        comparator: entry.statement.comparator(),
                    }),
                });
            }
        }
        Ok(TheoryReport {
            pass: true,
            failure: None,
        })
    }

    /// Sup-norm of `f` over all assignments to its free variables, with the
    /// default enumeration limit.
    pub fn sup_norm(&self, f: &Formula) -> Result<Q, StructureError> {
        self.sup_norm_cancellable(f, &CancelToken::new(), SUP_NORM_LIMIT)
    }

    /// Sup-norm with an explicit limit and cancellation token.
    pub fn sup_norm_cancellable(
        &self,
        f: &Formula,
        token: &CancelToken,
        limit: u128,
    ) -> Result<Q, StructureError> {
        let vars: Vec<&String> = f.free_vars().iter().collect();
        let n = self.points.len();
        let mut total: u128 = 1;
        for _ in &vars {
            total = total
                .checked_mul(n as u128)
                .ok_or(StructureError::TooManyAssignments(u128::MAX, limit))?;
        }
        if total > limit {
            return Err(StructureError::TooManyAssignments(total, limit));
        }
        self.check_symbols(f)?;
        let mut env: BTreeMap<String, usize> = vars.iter().map(|v| ((*v).clone(), 0)).collect();
        let mut idx = vec![0usize; vars.len()];
        let mut best = q0();
        loop {
            token.check()?;
            let value = self.eval_rec(f, &mut env).abs();
            if value > best {
                best = value;
            }
            // Advance the mixed-radix counter over assignments.
            let mut carry = true;
            for k in (0..vars.len()).rev() {
                idx[k] += 1;
                if idx[k] < n {
                    env.insert(vars[k].clone(), idx[k]);
                    carry = false;
                    break;
                }
                idx[k] = 0;
                env.insert(vars[k].clone(), 0);
            }
            if carry {
                break;
            }
        }
        Ok(best)
    }

    /// Partitions the points by the sign pattern (`> 0` or not) of each
    /// fragment formula in `fragment`, read as a function of `var` with all
    /// other free variables fixed by `params`. Blocks and their contents are
    /// sorted by point index.
    pub fn minimalize(
        &self,
        fragment: &[(Formula, String)],
        params: &BTreeMap<String, usize>,
    ) -> Result<Partition, StructureError> {
        for (f, var) in fragment {
            if params.contains_key(var) {
                return Err(StructureError::ParamCollision(var.clone()));
            }
            let mut env = params.clone();
            env.insert(var.clone(), 0);
            self.check_compatible(f, &env)?;
        }
        let mut groups: BTreeMap<Vec<bool>, Vec<usize>> = BTreeMap::new();
        for i in 0..self.points.len() {
            let mut pattern = Vec::with_capacity(fragment.len());
            for (f, var) in fragment {
                let mut env = params.clone();
                env.insert(var.clone(), i);
                pattern.push(self.eval_rec(f, &mut env).is_positive());
            }
            groups.entry(pattern).or_default().push(i);
        }
        let mut blocks: Vec<Vec<usize>> = groups.into_values().collect();
        blocks.sort_by_key(|b| b[0]);
        Ok(Partition { blocks })
    }
}

fn decode_tuple(flat: usize, n: usize, arity: usize) -> Vec<usize> {
    let mut rest = flat;
    let mut idx = vec![0; arity];
    for k in (0..arity).rev() {
        idx[k] = rest % n;
        rest /= n;
    }
    idx
}

/// Outcome of a theory check: the first failing statement, if any.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TheoryReport {
    pub pass: bool,
    pub failure: Option<TheoryFailure>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TheoryFailure {
    pub index: usize,
    pub label: String,
    pub statement: String,
    pub value: Q,
    pub threshold: Q,
    pub comparator: Comparator,
}

/// A partition of point indices; blocks are sorted by first member.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub blocks: Vec<Vec<usize>>,
}

impl Partition {
    /// The block containing point `i`, if any.
    pub fn block_of(&self, i: usize) -> Option<usize> {
        self.blocks.iter().position(|b| b.contains(&i))
    }
}

/// Outcome of the substructure measure check.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TvReport {
    pub pass: bool,
    pub failure: Option<TvFailure>,
}

/// A formula and parameter choice whose superlevel set gets different
/// measures in the two structures. Parameters are labeled with points of the
/// smaller structure.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TvFailure {
    pub formula: String,
    pub var: String,
    pub params: Vec<(String, String)>,
    pub m_measure: Q,
    pub n_measure: Q,
}

/// Checks the substructure condition between `m` and a larger `n` along an
/// embedding (a point of `n` for each point of `m`, injective, preserving
/// relations and constants): for every fragment formula, read as a function
/// of its designated variable, and every choice of parameters from `m`, the
/// superlevel set `{value > 0}` in `n` and its preimage in `m` must have
/// equal measure.
pub fn tarski_vaught_check(
    m: &FiniteStructure,
    n: &FiniteStructure,
    embedding: &[usize],
    fragment: &[(Formula, String)],
    token: &CancelToken,
) -> Result<TvReport, StructureError> {
    if m.sig != n.sig {
        return Err(StructureError::SignatureMismatch);
    }
    if embedding.len() != m.len() {
        return Err(StructureError::EmbeddingSize {
            expected: m.len(),
            got: embedding.len(),
        });
    }
    for &j in embedding {
        if j >= n.len() {
            return Err(StructureError::BadPointIndex(j));
        }
    }
    for a in 0..m.len() {
        for b in (a + 1)..m.len() {
            if embedding[a] == embedding[b] {
                return Err(StructureError::EmbeddingNotInjective(
                    m.points[a].clone(),
                    m.points[b].clone(),
                ));
            }
        }
    }
    // Constants and relation tables must be carried over exactly.
    for (ci, cname) in m.sig.constants().iter().enumerate() {
        if embedding[m.consts[ci]] != n.consts[ci] {
            return Err(StructureError::EmbeddingNotMorphism(format!(
                "constant `{cname}`: `{}` maps to `{}`, not `{}`",
                m.points[m.consts[ci]],
                n.points[embedding[m.consts[ci]]],
                n.points[n.consts[ci]]
            )));
        }
    }
    for (ri, decl) in m.sig.relations().iter().enumerate() {
        let mt = &m.tables[ri];
        let nt = &n.tables[ri];
        let count = m.len().pow(decl.arity as u32);
        for flat in 0..count {
            token.check()?;
            let idx = decode_tuple(flat, m.len(), decl.arity);
            let image: Vec<usize> = idx.iter().map(|&i| embedding[i]).collect();
            let mv = &mt.values[flat];
            let nv = &nt.values[nt.flat(n.len(), &image)];
            if mv != nv {
                let tuple = idx
                    .iter()
                    .map(|&i| m.points[i].clone())
                    .collect::<Vec<_>>()
                    .join(", ");
                return Err(StructureError::EmbeddingNotMorphism(format!(
                    "relation `{}` at ({tuple}): {} here, {} in the image",
                    decl.name,
                    fmt_q(mv),
                    fmt_q(nv)
                )));
            }
        }
    }
    for (f, var) in fragment {
        let mut probe = BTreeMap::new();
        for v in f.free_vars() {
            probe.insert(v.clone(), 0usize);
        }
        m.check_compatible(f, &probe)?;
        let params: Vec<&String> = f.free_vars().iter().filter(|v| *v != var).collect();
        let mut idx = vec![0usize; params.len()];
        loop {
            token.check()?;
            // Evaluate over `n` with parameters pushed through the embedding.
            let mut env_n: BTreeMap<String, usize> = params
                .iter()
                .zip(&idx)
                .map(|(v, &i)| ((*v).clone(), embedding[i]))
                .collect();
            let mut n_measure = q0();
            let mut in_set = vec![false; n.len()];
            for j in 0..n.len() {
                env_n.insert(var.clone(), j);
                if n.eval_rec(f, &mut env_n).is_positive() {
                    in_set[j] = true;
                    n_measure += &n.weights[j];
                }
            }
            let mut m_measure = q0();
            for i in 0..m.len() {
                if in_set[embedding[i]] {
                    m_measure += &m.weights[i];
                }
            }
            if m_measure != n_measure {
                return Ok(TvReport {
                    pass: false,
                    failure: Some(TvFailure {
                        formula: print_formula(f),
                        var: var.clone(),
                        params: params
                            .iter()
                            .zip(&idx)
                            .map(|(v, &i)| ((*v).clone(), m.points[i].clone()))
                            .collect(),
                        m_measure,
                        n_measure,
                    }),
                });
            }
            let mut carry = true;
            for k in (0..idx.len()).rev() {
                idx[k] += 1;
                if idx[k] < m.len() {
                    carry = false;
                    break;
                }
                idx[k] = 0;
            }
            if carry {
                break;
            }
        }
    }
    Ok(TvReport {
        pass: true,
        failure: None,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::logic::{parse_formula, RelationDecl, Signature};
    use crate::rational::{q, qi};

    fn two_point() -> FiniteStructure {
        let sig = Signature::new(
            vec![
                RelationDecl::new("P", 1, qi(1)),
                RelationDecl::new("E", 2, qi(1)),
            ],
            vec!["c".into()],
        )
        .unwrap();
        FiniteStructure::new(
            sig,
            vec!["p0".into(), "p1".into()],
            vec![q(1, 2), q(1, 2)],
            vec![
                ("P".into(), vec![qi(0), qi(1)]),
                // E(x, y) = 1 exactly when x = y.
                ("E".into(), vec![qi(1), qi(0), qi(0), qi(1)]),
            ],
            vec![("c".into(), "p0".into())],
        )
        .unwrap()
    }

    fn eval(st: &FiniteStructure, text: &str, assign: &[(&str, usize)]) -> Q {
        let f = parse_formula(text, st.signature()).unwrap();
        let env: BTreeMap<String, usize> =
            assign.iter().map(|(v, i)| (v.to_string(), *i)).collect();
        st.evaluate(&f, &env).unwrap()
    }

    #[test]
    fn integral_averages_with_the_weights() {
        let st = two_point();
        assert_eq!(eval(&st, "int x. P(x)", &[]), q(1, 2));
        assert_eq!(eval(&st, "int x. int y. E(x, y)", &[]), q(1, 2));
        assert_eq!(eval(&st, "P(c)", &[]), qi(0));
        assert_eq!(eval(&st, "2*P + -1*E(x, x)", &[("x", 1)]), qi(1));
        assert_eq!(eval(&st, "abs(P(x) - 1)", &[("x", 0)]), qi(1));
    }

    #[test]
    fn max_and_min_desugar_to_the_right_values() {
        let st = two_point();
        for i in 0..2 {
            for j in 0..2 {
                let assign = [("x", i), ("y", j)];
                let p = eval(&st, "P(x)", &assign[..1]);
                let e = eval(&st, "E(x, y)", &assign);
                assert_eq!(eval(&st, "max(P(x), E(x, y))", &assign), p.clone().max(e.clone()));
                assert_eq!(eval(&st, "min(P(x), E(x, y))", &assign), p.min(e));
            }
        }
    }

    #[test]
    fn extra_assignment_keys_are_ignored() {
        let st = two_point();
        // x is bound, not free; a stray assignment for it must not leak into
        // the integral.
        let v = eval(&st, "int x. P(x)", &[("x", 0), ("z", 1)]);
        assert_eq!(v, q(1, 2));
    }

    #[test]
    fn evaluation_respects_the_universal_bound() {
        let st = two_point();
        let texts = [
            "max(P, E(x, x)) - min(P, E(x, x))",
            "int y. E(x, y)*P(y)",
            "abs(2*P + -1*E(x, x))",
        ];
        for text in texts {
            let f = parse_formula(text, st.signature()).unwrap();
            let b = crate::logic::universal_bound(&f);
            for i in 0..2 {
                let env: BTreeMap<String, usize> = [("x".to_string(), i)].into();
                let v = st.evaluate(&f, &env).unwrap();
                assert!(v.abs() <= b, "{text}: |{v}| > {b}");
            }
        }
    }

    #[test]
    fn unassigned_and_foreign_symbols_are_errors() {
        let st = two_point();
        let f = parse_formula("P(x)", st.signature()).unwrap();
        assert_eq!(
            st.evaluate(&f, &BTreeMap::new()).unwrap_err(),
            StructureError::Unassigned("x".into())
        );
        let other = Signature::new(vec![RelationDecl::new("R", 1, qi(1))], vec![]).unwrap();
        let g = parse_formula("int x. R(x)", &other).unwrap();
        assert_eq!(
            st.evaluate(&g, &BTreeMap::new()).unwrap_err(),
            StructureError::ForeignSymbol("R".into())
        );
    }

    #[test]
    fn structure_validation_catches_bad_input() {
        let sig = Signature::new(vec![RelationDecl::new("P", 1, qi(1))], vec![]).unwrap();
        let bad_weights = FiniteStructure::new(
            sig.clone(),
            vec!["a".into(), "b".into()],
            vec![q(1, 2), q(1, 3)],
            vec![("P".into(), vec![qi(0), qi(0)])],
            vec![],
        );
        assert_eq!(
            bad_weights.unwrap_err(),
            StructureError::WeightSum("5/6".into())
        );
        let over_bound = FiniteStructure::new(
            sig.clone(),
            vec!["a".into()],
            vec![qi(1)],
            vec![("P".into(), vec![qi(2)])],
            vec![],
        );
        assert!(matches!(
            over_bound.unwrap_err(),
            StructureError::EntryBound { .. }
        ));
        let missing = FiniteStructure::new(
            sig,
            vec!["a".into()],
            vec![qi(1)],
            vec![],
            vec![],
        );
        assert_eq!(
            missing.unwrap_err(),
            StructureError::MissingRelation("P".into())
        );
    }

    #[test]
    fn sup_norm_maximizes_over_assignments() {
        let st = two_point();
        let f = parse_formula("P(x) - P(y)", st.signature()).unwrap();
        assert_eq!(st.sup_norm(&f).unwrap(), qi(1));
        let closed = parse_formula("int x. P(x) - 1", st.signature()).unwrap();
        assert_eq!(st.sup_norm(&closed).unwrap(), q(1, 2));
        let e = st.sup_norm_cancellable(&f, &CancelToken::new(), 3).unwrap_err();
        assert_eq!(e, StructureError::TooManyAssignments(4, 3));
    }

    #[test]
    fn sup_norm_cancellation_interrupts() {
        let st = two_point();
        let f = parse_formula("P(x) - P(y)", st.signature()).unwrap();
        let token = CancelToken::new();
        token.cancel();
        assert_eq!(
            st.sup_norm_cancellable(&f, &token, SUP_NORM_LIMIT).unwrap_err(),
            StructureError::Cancelled(Cancelled)
        );
    }

    #[test]
    fn minimalize_groups_by_sign_patterns() {
        let st = two_point();
        let f = parse_formula("P(x)", st.signature()).unwrap();
        let partition = st
            .minimalize(&[(f, "x".to_string())], &BTreeMap::new())
            .unwrap();
        assert_eq!(partition.blocks, vec![vec![0], vec![1]]);
        // With no fragment formulas everything collapses to one block.
        let trivial = st.minimalize(&[], &BTreeMap::new()).unwrap();
        assert_eq!(trivial.blocks, vec![vec![0, 1]]);
    }

    #[test]
    fn satisfies_theory_reports_first_failure() {
        let st = two_point();
        let mut th = Theory::default();
        let ok = parse_formula("int x. P(x)", st.signature()).unwrap();
        th.push(
            Statement::new(ok, Comparator::Eq, q(1, 2)).unwrap(),
            "mass",
        );
        let bad = parse_formula("int x. P(x)", st.signature()).unwrap();
        th.push(Statement::new(bad, Comparator::Ge, qi(1)).unwrap(), "full");
        let report = st.satisfies_theory(&th).unwrap();
        assert!(!report.pass);
        let failure = report.failure.unwrap();
        assert_eq!(failure.index, 1);
        assert_eq!(failure.label, "full");
        assert_eq!(failure.value, q(1, 2));
        assert_eq!(failure.threshold, qi(1));
    }

    fn tv_pair() -> (FiniteStructure, FiniteStructure) {
        let sig = Signature::new(vec![RelationDecl::new("P", 1, qi(1))], vec![]).unwrap();
        // m: two points, P = (0, 1); n: four points, P = (0, 0, 1, 1).
        let m = FiniteStructure::new(
            sig.clone(),
            vec!["a".into(), "b".into()],
            vec![q(1, 2), q(1, 2)],
            vec![("P".into(), vec![qi(0), qi(1)])],
            vec![],
        )
        .unwrap();
        let n = FiniteStructure::new(
            sig,
            vec!["n0".into(), "n1".into(), "n2".into(), "n3".into()],
            vec![q(1, 4), q(1, 4), q(1, 4), q(1, 4)],
            vec![("P".into(), vec![qi(0), qi(0), qi(1), qi(1)])],
            vec![],
        )
        .unwrap();
        (m, n)
    }

    #[test]
    fn tarski_vaught_accepts_a_measure_preserving_embedding() {
        let (m, n) = tv_pair();
        let f = parse_formula("P(x)", m.signature()).unwrap();
        let report = tarski_vaught_check(
            &m,
            &n,
            &[0, 2],
            &[(f, "x".to_string())],
            &CancelToken::new(),
        )
        .unwrap();
        assert!(report.pass, "{:?}", report.failure);
    }

    #[test]
    fn tarski_vaught_reports_measure_mismatch() {
        let sig = Signature::new(vec![RelationDecl::new("P", 1, qi(1))], vec![]).unwrap();
        let m = FiniteStructure::new(
            sig.clone(),
            vec!["a".into(), "b".into()],
            vec![q(1, 4), q(3, 4)],
            vec![("P".into(), vec![qi(0), qi(1)])],
            vec![],
        )
        .unwrap();
        let n = FiniteStructure::new(
            sig,
            vec!["n0".into(), "n1".into()],
            vec![q(1, 2), q(1, 2)],
            vec![("P".into(), vec![qi(0), qi(1)])],
            vec![],
        )
        .unwrap();
        let f = parse_formula("P(x)", m.signature()).unwrap();
        let report = tarski_vaught_check(
            &m,
            &n,
            &[0, 1],
            &[(f, "x".to_string())],
            &CancelToken::new(),
        )
        .unwrap();
        assert!(!report.pass);
        let failure = report.failure.unwrap();
        assert_eq!(failure.m_measure, q(3, 4));
        assert_eq!(failure.n_measure, q(1, 2));
    }

    #[test]
    fn tarski_vaught_rejects_non_embeddings() {
        let (m, n) = tv_pair();
        let f = parse_formula("P(x)", m.signature()).unwrap();
        let frag = vec![(f, "x".to_string())];
        let token = CancelToken::new();
        assert_eq!(
            tarski_vaught_check(&m, &n, &[0, 0], &frag, &token).unwrap_err(),
            StructureError::EmbeddingNotInjective("a".into(), "b".into())
        );
        // Image with the wrong relation values is not a morphism.
        assert!(matches!(
            tarski_vaught_check(&m, &n, &[0, 1], &frag, &token).unwrap_err(),
            StructureError::EmbeddingNotMorphism(_)
        ));
    }

    #[test]
    fn fubini_on_a_small_structure() {
        let st = two_point();
        let xy = eval(&st, "int x. int y. E(x, y)*P(y)", &[]);
        let yx = eval(&st, "int y. int x. E(x, y)*P(y)", &[]);
        assert_eq!(xy, yx);
    }
}
