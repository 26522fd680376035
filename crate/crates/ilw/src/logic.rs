//! Formula language: signatures, syntax trees with cached compositional
//! bounds and variable sets, the concrete grammar, and a printer whose output
//! re-parses to the same tree.
//!
//! Grammar (binding looser to tighter; `int` extends maximally to the right):
//!
//! ```text
//! formula := term (("+" | "-") term)*
//! term    := factor ("*" factor)*
//! factor  := RATIONAL
//!          | IDENT "(" IDENT ("," IDENT)* ")"
//!          | IDENT
//!          | "abs" "(" formula ")"
//!          | "max" "(" formula "," formula ")"
//!          | "min" "(" formula "," formula ")"
//!          | "int" IDENT "." formula
//!          | "(" formula ")"
//! ```
//!
//! `RATIONAL` is an optional sign, an integer, and an optional `/` followed by
//! a positive integer, with no interior spaces. A bare `IDENT` names a
//! relation applied to canonical variables (`x`, then `x, y`, then `x, y, z`,
//! then `x1..xn`). `max` and `min` are sugar: with `d = l - r`,
//! `max(l, r) = 1/2*d + 1/2*abs(d) + r` and `min` uses `-1/2*abs(d)`. The
//! printer recognizes exactly those shapes and restores the call syntax.

use std::collections::BTreeSet;
use std::fmt;

use num_traits::Signed;
use thiserror::Error;

use crate::rational::{fmt_q, q, q1, Q};

/// Errors from signature construction, parsing, and formula constructors.
/// Only `Syntax` carries a byte position; the rest are semantic and can also
/// arise from direct constructor calls.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum LogicError {
    #[error("syntax error at byte {pos}: {msg}")]
    Syntax { pos: usize, msg: String },
    #[error("unknown symbol `{0}`")]
    UnknownSymbol(String),
    #[error("`{0}` is a declared constant, not a relation")]
    NotARelation(String),
    #[error("relation `{name}` expects {expected} argument(s), got {got}")]
    ArityMismatch {
        name: String,
        expected: usize,
        got: usize,
    },
    #[error("`{0}` names a relation and cannot appear as an atomic argument")]
    RelationAsTerm(String),
    #[error("`{0}` is a declared constant; use a constant term, not a variable")]
    ConstantAsVariable(String),
    #[error("variable `{0}` would be bound twice along one branch")]
    Shadowing(String),
    #[error("duplicate name `{0}` in signature")]
    DuplicateName(String),
    #[error("invalid identifier `{0}`")]
    BadIdent(String),
    #[error("relation `{0}` has a negative bound")]
    NegativeBound(String),
    #[error("relation `{0}` must have positive arity")]
    ZeroArity(String),
    #[error("statement formula must be closed; free variables: {0}")]
    OpenStatement(String),
}

/// Reserved words of the grammar; never valid identifiers.
pub const KEYWORDS: [&str; 4] = ["int", "abs", "max", "min"];

/// True for `[A-Za-z_][A-Za-z0-9_]*` that is not a grammar keyword.
pub fn is_ident(s: &str) -> bool {
    let mut bytes = s.bytes();
    match bytes.next() {
        Some(b) if b.is_ascii_alphabetic() || b == b'_' => {}
        _ => return false,
    }
    if !bytes.all(|b| b.is_ascii_alphanumeric() || b == b'_') {
        return false;
    }
    !KEYWORDS.contains(&s)
}

/// A relation symbol: name, argument count, and the uniform bound its
/// interpretations must respect.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RelationDecl {
    pub name: String,
    pub arity: usize,
    pub bound: Q,
}

impl RelationDecl {
    pub fn new(name: &str, arity: usize, bound: Q) -> Self {
        Self {
            name: name.to_string(),
            arity,
            bound,
        }
    }
}

/// Relation and constant symbols. Names are unique across both kinds.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Signature {
    relations: Vec<RelationDecl>,
    constants: Vec<String>,
}

impl Signature {
    pub fn new(relations: Vec<RelationDecl>, constants: Vec<String>) -> Result<Self, LogicError> {
        let mut seen = BTreeSet::new();
        for r in &relations {
            if !is_ident(&r.name) {
                return Err(LogicError::BadIdent(r.name.clone()));
            }
            if r.arity == 0 {
                return Err(LogicError::ZeroArity(r.name.clone()));
            }
            if r.bound.is_negative() {
                return Err(LogicError::NegativeBound(r.name.clone()));
            }
            if !seen.insert(r.name.clone()) {
                return Err(LogicError::DuplicateName(r.name.clone()));
            }
        }
        for c in &constants {
            if !is_ident(c) {
                return Err(LogicError::BadIdent(c.clone()));
            }
            if !seen.insert(c.clone()) {
                return Err(LogicError::DuplicateName(c.clone()));
            }
        }
        Ok(Self {
            relations,
            constants,
        })
    }

    pub fn relations(&self) -> &[RelationDecl] {
        &self.relations
    }

    pub fn constants(&self) -> &[String] {
        &self.constants
    }

    pub fn relation(&self, name: &str) -> Option<&RelationDecl> {
        self.relations.iter().find(|r| r.name == name)
    }

    pub fn relation_index(&self, name: &str) -> Option<usize> {
        self.relations.iter().position(|r| r.name == name)
    }

    pub fn is_constant(&self, name: &str) -> bool {
        self.constants.iter().any(|c| c == name)
    }

    pub fn constant_index(&self, name: &str) -> Option<usize> {
        self.constants.iter().position(|c| c == name)
    }
}

/// An atomic argument: a variable or a declared constant.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum Term {
    Var(String),
    Const(String),
}

impl Term {
    pub fn name(&self) -> &str {
        match self {
            Term::Var(s) | Term::Const(s) => s,
        }
    }
}

/// Formula shapes. Values are built through the [`Formula`] constructors,
/// which maintain the cached bound and variable sets.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Node {
    /// Rational constant.
    Rat(Q),
    /// Relation applied to arguments. `bare` records that the source wrote
    /// the relation name alone and the canonical arguments were filled in.
    Atom {
        relation: String,
        args: Vec<Term>,
        bare: bool,
    },
    /// `cl*left + cr*right`. The parser only produces `cl = 1, cr = ±1`
    /// (sums and differences) and the `max`/`min` sugar with `±1/2`.
    Linear {
        cl: Q,
        left: Box<Formula>,
        cr: Q,
        right: Box<Formula>,
    },
    Product {
        left: Box<Formula>,
        right: Box<Formula>,
    },
    Abs(Box<Formula>),
    /// Integral of `body` in the variable `var` against the structure
    /// measure.
    Integral { var: String, body: Box<Formula> },
}

/// A formula with cached data: `bound` is the compositional uniform bound,
/// `free` the free variables, `binders` every variable bound by an integral
/// inside. Invariant: `free` and `binders` are disjoint, and no variable is
/// bound twice along one branch.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Formula {
    node: Node,
    bound: Q,
    free: BTreeSet<String>,
    binders: BTreeSet<String>,
}

fn check_combine(l: &Formula, r: &Formula) -> Result<(), LogicError> {
    if let Some(v) = l.binders.intersection(&r.free).next() {
        return Err(LogicError::Shadowing(v.clone()));
    }
    if let Some(v) = r.binders.intersection(&l.free).next() {
        return Err(LogicError::Shadowing(v.clone()));
    }
    Ok(())
}

impl Formula {
    pub fn rat(value: Q) -> Formula {
        Formula {
            bound: value.abs(),
            node: Node::Rat(value),
            free: BTreeSet::new(),
            binders: BTreeSet::new(),
        }
    }

    /// Relation atom with explicit arguments.
    pub fn atom(sig: &Signature, relation: &str, args: Vec<Term>) -> Result<Formula, LogicError> {
        Self::atom_impl(sig, relation, args, false)
    }

    fn atom_impl(
        sig: &Signature,
        relation: &str,
        args: Vec<Term>,
        bare: bool,
    ) -> Result<Formula, LogicError> {
        let decl = match sig.relation(relation) {
            Some(d) => d,
            None if sig.is_constant(relation) => {
                return Err(LogicError::NotARelation(relation.to_string()))
            }
            None => return Err(LogicError::UnknownSymbol(relation.to_string())),
        };
        if decl.arity != args.len() {
            return Err(LogicError::ArityMismatch {
                name: relation.to_string(),
                expected: decl.arity,
                got: args.len(),
            });
        }
        let mut free = BTreeSet::new();
        for t in &args {
            match t {
                Term::Var(v) => {
                    if !is_ident(v) {
                        return Err(LogicError::BadIdent(v.clone()));
                    }
                    if sig.relation(v).is_some() {
                        return Err(LogicError::RelationAsTerm(v.clone()));
                    }
                    if sig.is_constant(v) {
                        return Err(LogicError::ConstantAsVariable(v.clone()));
                    }
                    free.insert(v.clone());
                }
                Term::Const(c) => {
                    if !sig.is_constant(c) {
                        return Err(LogicError::UnknownSymbol(c.clone()));
                    }
                }
            }
        }
        Ok(Formula {
            bound: decl.bound.clone(),
            node: Node::Atom {
                relation: relation.to_string(),
                args,
                bare,
            },
            free,
            binders: BTreeSet::new(),
        })
    }

    /// `cl*left + cr*right` with bound `|cl|*b(left) + |cr|*b(right)`.
    pub fn linear(cl: Q, left: Formula, cr: Q, right: Formula) -> Result<Formula, LogicError> {
        check_combine(&left, &right)?;
        let bound = cl.abs() * &left.bound + cr.abs() * &right.bound;
        let free = left.free.union(&right.free).cloned().collect();
        let binders = left.binders.union(&right.binders).cloned().collect();
        Ok(Formula {
            node: Node::Linear {
                cl,
                left: Box::new(left),
                cr,
                right: Box::new(right),
            },
            bound,
            free,
            binders,
        })
    }

    pub fn add(left: Formula, right: Formula) -> Result<Formula, LogicError> {
        Self::linear(q1(), left, q1(), right)
    }

    pub fn sub(left: Formula, right: Formula) -> Result<Formula, LogicError> {
        Self::linear(q1(), left, -q1(), right)
    }

    /// Pointwise product with bound `b(left)*b(right)`.
    pub fn product(left: Formula, right: Formula) -> Result<Formula, LogicError> {
        check_combine(&left, &right)?;
        let bound = &left.bound * &right.bound;
        let free = left.free.union(&right.free).cloned().collect();
        let binders = left.binders.union(&right.binders).cloned().collect();
        Ok(Formula {
            node: Node::Product {
                left: Box::new(left),
                right: Box::new(right),
            },
            bound,
            free,
            binders,
        })
    }

    pub fn abs(body: Formula) -> Formula {
        Formula {
            bound: body.bound.clone(),
            free: body.free.clone(),
            binders: body.binders.clone(),
            node: Node::Abs(Box::new(body)),
        }
    }

    /// Integral in `var`. Rejects rebinding a variable already bound inside
    /// the body; the bound is unchanged because the measure is a probability.
    pub fn integral(var: &str, body: Formula) -> Result<Formula, LogicError> {
        if !is_ident(var) {
            return Err(LogicError::BadIdent(var.to_string()));
        }
        if body.binders.contains(var) {
            return Err(LogicError::Shadowing(var.to_string()));
        }
        let mut free = body.free.clone();
        free.remove(var);
        let mut binders = body.binders.clone();
        binders.insert(var.to_string());
        Ok(Formula {
            bound: body.bound.clone(),
            node: Node::Integral {
                var: var.to_string(),
                body: Box::new(body),
            },
            free,
            binders,
        })
    }

    /// `max(l, r)` desugared as `1/2*(l - r) + 1/2*abs(l - r) + r`. The bound
    /// is the compositional `b(l) + 2*b(r)`, sound but not tight.
    pub fn max(left: Formula, right: Formula) -> Result<Formula, LogicError> {
        let delta = Formula::sub(left, right.clone())?;
        let pos = Formula::linear(q(1, 2), delta.clone(), q(1, 2), Formula::abs(delta))?;
        Formula::add(pos, right)
    }

    /// `min(l, r)` desugared as `1/2*(l - r) - 1/2*abs(l - r) + r`.
    pub fn min(left: Formula, right: Formula) -> Result<Formula, LogicError> {
        let delta = Formula::sub(left, right.clone())?;
        let neg = Formula::linear(q(1, 2), delta.clone(), q(-1, 2), Formula::abs(delta))?;
        Formula::add(neg, right)
    }

    pub fn node(&self) -> &Node {
        &self.node
    }

    /// Compositional uniform bound: evaluation in any structure respecting
    /// the signature bounds stays within it.
    pub fn bound(&self) -> &Q {
        &self.bound
    }

    pub fn free_vars(&self) -> &BTreeSet<String> {
        &self.free
    }

    /// Variables bound by an integral somewhere inside.
    pub fn bound_vars(&self) -> &BTreeSet<String> {
        &self.binders
    }
}

impl fmt::Display for Formula {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&print_formula(self))
    }
}

/// Compositional uniform bound of `f`.
pub fn universal_bound(f: &Formula) -> Q {
    f.bound().clone()
}

/// Free variables of `f`.
pub fn free_variables(f: &Formula) -> BTreeSet<String> {
    f.free_vars().clone()
}

/// Comparison used by statements.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Comparator {
    Ge,
    Eq,
}

impl Comparator {
    pub fn symbol(self) -> &'static str {
        match self {
            Comparator::Ge => ">=",
            Comparator::Eq => "=",
        }
    }

    pub fn holds(self, value: &Q, threshold: &Q) -> bool {
        match self {
            Comparator::Ge => value >= threshold,
            Comparator::Eq => value == threshold,
        }
    }
}

/// A closed formula compared against a rational threshold.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Statement {
    formula: Formula,
    comparator: Comparator,
    threshold: Q,
}

impl Statement {
    pub fn new(formula: Formula, comparator: Comparator, threshold: Q) -> Result<Self, LogicError> {
        if !formula.free_vars().is_empty() {
            let vars: Vec<&str> = formula.free_vars().iter().map(|s| s.as_str()).collect();
            return Err(LogicError::OpenStatement(vars.join(", ")));
        }
        Ok(Self {
            formula,
            comparator,
            threshold,
        })
    }

    pub fn formula(&self) -> &Formula {
        &self.formula
    }

    pub fn comparator(&self) -> Comparator {
        self.comparator
    }

    pub fn threshold(&self) -> &Q {
        &self.threshold
    }

    /// The line form used by theory files: `"formula" op "threshold"`.
    pub fn render(&self) -> String {
        format!(
            "\"{}\" {} \"{}\"",
            print_formula(&self.formula),
            self.comparator.symbol(),
            fmt_q(&self.threshold)
        )
    }
}

/// A labeled statement inside a theory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TheoryEntry {
    pub statement: Statement,
    pub label: String,
}

/// An ordered collection of labeled closed statements.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct Theory {
    pub entries: Vec<TheoryEntry>,
}

impl Theory {
    pub fn push(&mut self, statement: Statement, label: &str) {
        self.entries.push(TheoryEntry {
            statement,
            label: label.to_string(),
        });
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Ident(String),
    Num(String),
    Plus,
    Minus,
    Star,
    LPar,
    RPar,
    Comma,
    Dot,
}

fn lex(text: &str) -> Result<Vec<(Tok, usize)>, LogicError> {
    let bytes = text.as_bytes();
    let mut out = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let b = bytes[i];
        let start = i;
        match b {
            b' ' | b'\t' | b'\r' | b'\n' => {
                i += 1;
            }
            b'+' => {
                out.push((Tok::Plus, start));
                i += 1;
            }
            b'-' => {
                out.push((Tok::Minus, start));
                i += 1;
            }
            b'*' => {
                out.push((Tok::Star, start));
                i += 1;
            }
            b'(' => {
                out.push((Tok::LPar, start));
                i += 1;
            }
            b')' => {
                out.push((Tok::RPar, start));
                i += 1;
            }
            b',' => {
                out.push((Tok::Comma, start));
                i += 1;
            }
            b'.' => {
                out.push((Tok::Dot, start));
                i += 1;
            }
            b'0'..=b'9' => {
                while i < bytes.len() && bytes[i].is_ascii_digit() {
                    i += 1;
                }
                // A slash glued to digits on both sides belongs to the
                // rational token; anywhere else `/` is not part of the
                // grammar.
                if i + 1 < bytes.len() && bytes[i] == b'/' && bytes[i + 1].is_ascii_digit() {
                    i += 1;
                    while i < bytes.len() && bytes[i].is_ascii_digit() {
                        i += 1;
                    }
                }
                out.push((Tok::Num(text[start..i].to_string()), start));
            }
            _ if b.is_ascii_alphabetic() || b == b'_' => {
                while i < bytes.len()
                    && (bytes[i].is_ascii_alphanumeric() || bytes[i] == b'_')
                {
                    i += 1;
                }
                out.push((Tok::Ident(text[start..i].to_string()), start));
            }
            _ => {
                return Err(LogicError::Syntax {
                    pos: start,
                    msg: format!("unexpected character `{}`", text[start..].chars().next().unwrap()),
                });
            }
        }
    }
    Ok(out)
}

struct Parser<'a> {
    sig: &'a Signature,
    toks: Vec<(Tok, usize)>,
    pos: usize,
    end: usize,
    /// Integral variables currently in scope; guards bare-atom expansion.
    scope: Vec<String>,
}

impl<'a> Parser<'a> {
    fn peek(&self) -> Option<&Tok> {
        self.toks.get(self.pos).map(|(t, _)| t)
    }

    fn here(&self) -> usize {
        self.toks.get(self.pos).map(|(_, p)| *p).unwrap_or(self.end)
    }

    fn bump(&mut self) -> Option<Tok> {
        let t = self.toks.get(self.pos).map(|(t, _)| t.clone());
        if t.is_some() {
            self.pos += 1;
        }
        t
    }

    fn eat(&mut self, t: &Tok) -> bool {
        if self.peek() == Some(t) {
            self.pos += 1;
            true
        } else {
            false
        }
    }

    fn expect(&mut self, t: &Tok, what: &str) -> Result<(), LogicError> {
        if self.eat(t) {
            Ok(())
        } else {
            Err(self.err(format!("expected {what}")))
        }
    }

    fn err(&self, msg: String) -> LogicError {
        LogicError::Syntax {
            pos: self.here(),
            msg,
        }
    }

    fn sum(&mut self) -> Result<Formula, LogicError> {
        let mut acc = self.term()?;
        loop {
            if self.eat(&Tok::Plus) {
                let rhs = self.term()?;
                acc = Formula::add(acc, rhs)?;
            } else if self.eat(&Tok::Minus) {
                let rhs = self.term()?;
                acc = Formula::sub(acc, rhs)?;
            } else {
                break;
            }
        }
        Ok(acc)
    }

    fn term(&mut self) -> Result<Formula, LogicError> {
        let mut acc = self.factor()?;
        while self.eat(&Tok::Star) {
            let rhs = self.factor()?;
            acc = Formula::product(acc, rhs)?;
        }
        Ok(acc)
    }

    fn number(&mut self, negative: bool) -> Result<Formula, LogicError> {
        let pos = self.here();
        let text = match self.bump() {
            Some(Tok::Num(s)) => s,
            _ => return Err(LogicError::Syntax { pos, msg: "expected a number".into() }),
        };
        let mut value = crate::rational::parse_q(&text)
            .map_err(|msg| LogicError::Syntax { pos, msg })?;
        if negative {
            value = -value;
        }
        Ok(Formula::rat(value))
    }

    fn factor(&mut self) -> Result<Formula, LogicError> {
        match self.peek().cloned() {
            Some(Tok::Minus) => {
                if matches!(self.toks.get(self.pos + 1).map(|(t, _)| t), Some(Tok::Num(_))) {
                    self.pos += 1;
                    self.number(true)
                } else {
                    Err(self.err("`-` here must prefix a rational literal".into()))
                }
            }
            Some(Tok::Num(_)) => self.number(false),
            Some(Tok::LPar) => {
                self.pos += 1;
                let inner = self.sum()?;
                self.expect(&Tok::RPar, "`)`")?;
                Ok(inner)
            }
            Some(Tok::Ident(name)) => match name.as_str() {
                "abs" => {
                    self.pos += 1;
                    self.expect(&Tok::LPar, "`(` after `abs`")?;
                    let body = self.sum()?;
                    self.expect(&Tok::RPar, "`)`")?;
                    Ok(Formula::abs(body))
                }
                "max" | "min" => {
                    self.pos += 1;
                    self.expect(&Tok::LPar, &format!("`(` after `{name}`"))?;
                    let left = self.sum()?;
                    self.expect(&Tok::Comma, "`,` between arguments")?;
                    let right = self.sum()?;
                    self.expect(&Tok::RPar, "`)`")?;
                    if name == "max" {
                        Formula::max(left, right)
                    } else {
                        Formula::min(left, right)
                    }
                }
                "int" => {
                    self.pos += 1;
                    let var_pos = self.here();
                    let var = match self.bump() {
                        Some(Tok::Ident(v)) if is_ident(&v) => v,
                        _ => {
                            return Err(LogicError::Syntax {
                                pos: var_pos,
                                msg: "expected a variable after `int`".into(),
                            })
                        }
                    };
                    self.expect(&Tok::Dot, "`.` after the integral variable")?;
                    self.scope.push(var.clone());
                    let body = self.sum();
                    self.scope.pop();
                    Formula::integral(&var, body?)
                }
                _ => self.atom_or_bare(name),
            },
            _ => Err(self.err("expected a formula".into())),
        }
    }

    fn atom_or_bare(&mut self, name: String) -> Result<Formula, LogicError> {
        let name_pos = self.here();
        self.pos += 1;
        if self.eat(&Tok::LPar) {
            let mut args = Vec::new();
            loop {
                let arg_pos = self.here();
                let arg = match self.bump() {
                    Some(Tok::Ident(a)) => a,
                    _ => {
                        return Err(LogicError::Syntax {
                            pos: arg_pos,
                            msg: "expected a variable or constant".into(),
                        })
                    }
                };
                let term = if self.sig.is_constant(&arg) {
                    Term::Const(arg)
                } else {
                    Term::Var(arg)
                };
                args.push(term);
                if !self.eat(&Tok::Comma) {
                    break;
                }
            }
            self.expect(&Tok::RPar, "`)`")?;
            Formula::atom(self.sig, &name, args)
        } else {
            // Bare relation: fill in canonical variables. Refuse when a
            // canonical variable is captured by an enclosing integral or
            // collides with a declared symbol; explicit arguments stay
            // available for those cases.
            let decl = match self.sig.relation(&name) {
                Some(d) => d,
                None if self.sig.is_constant(&name) => {
                    return Err(LogicError::Syntax {
                        pos: name_pos,
                        msg: format!(
                            "`{name}` is a constant; constants appear only as atomic arguments"
                        ),
                    })
                }
                None => return Err(LogicError::UnknownSymbol(name)),
            };
            let vars = canonical_vars(decl.arity);
            for v in &vars {
                if self.scope.contains(v) || self.sig.relation(v).is_some() || self.sig.is_constant(v)
                {
                    return Err(LogicError::Syntax {
                        pos: name_pos,
                        msg: format!(
                            "bare `{name}` expands to canonical argument `{v}`, which is taken \
                             here; write explicit arguments"
                        ),
                    });
                }
            }
            let args = vars.into_iter().map(Term::Var).collect();
            Formula::atom_impl(self.sig, &name, args, true)
        }
    }
}

/// Canonical argument names for bare relations: `x`; `x, y`; `x, y, z`;
/// `x1..xn` beyond arity 3.
pub fn canonical_vars(arity: usize) -> Vec<String> {
    match arity {
        1 => vec!["x".into()],
        2 => vec!["x".into(), "y".into()],
        3 => vec!["x".into(), "y".into(), "z".into()],
        n => (1..=n).map(|i| format!("x{i}")).collect(),
    }
}

/// Parses `text` against `sig`. Syntax errors carry the byte position.
pub fn parse_formula(text: &str, sig: &Signature) -> Result<Formula, LogicError> {
    let toks = lex(text)?;
    let mut p = Parser {
        sig,
        toks,
        pos: 0,
        end: text.len(),
        scope: Vec::new(),
    };
    let f = p.sum()?;
    if p.pos < p.toks.len() {
        return Err(p.err("unexpected trailing input".into()));
    }
    Ok(f)
}

/// How loose a slot is; a node prints bare only where its own level fits.
/// `Sum` slots accept anything, `SumLeft` excludes a bare integral (which
/// would swallow the rest of the sum on re-parse), `Term` accepts products
/// and tighter, `Factor` only atoms, literals, calls, and parens.
#[derive(Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
enum Slot {
    Sum = 0,
    SumLeft = 1,
    Term = 2,
    Factor = 3,
}

fn natural_slot(f: &Formula) -> Slot {
    if max_min_sugar(f).is_some() {
        return Slot::Factor;
    }
    match f.node() {
        Node::Rat(_) | Node::Atom { .. } | Node::Abs(_) => Slot::Factor,
        Node::Product { .. } => Slot::Term,
        Node::Linear { .. } => Slot::SumLeft,
        Node::Integral { .. } => Slot::Sum,
    }
}

/// Detects the exact desugared shape produced by [`Formula::max`] and
/// [`Formula::min`]: `1/2*(l - r) ± 1/2*abs(l - r) + r`.
fn max_min_sugar(f: &Formula) -> Option<(bool, &Formula, &Formula)> {
    let (cl, inner, cr, psi) = match f.node() {
        Node::Linear {
            cl,
            left,
            cr,
            right,
        } => (cl, left, cr, right),
        _ => return None,
    };
    if *cl != q1() || *cr != q1() {
        return None;
    }
    let (hl, delta, hc, absd) = match inner.node() {
        Node::Linear {
            cl,
            left,
            cr,
            right,
        } => (cl, left, cr, right),
        _ => return None,
    };
    if *hl != q(1, 2) {
        return None;
    }
    let is_max = if *hc == q(1, 2) {
        true
    } else if *hc == q(-1, 2) {
        false
    } else {
        return None;
    };
    match absd.node() {
        Node::Abs(body) if **body == **delta => {}
        _ => return None,
    }
    let (dl, phi, dr, psi2) = match delta.node() {
        Node::Linear {
            cl,
            left,
            cr,
            right,
        } => (cl, left, cr, right),
        _ => return None,
    };
    if *dl != q1() || *dr != -q1() || **psi2 != **psi {
        return None;
    }
    Some((is_max, phi, psi))
}

fn render(f: &Formula, slot: Slot, out: &mut String) {
    if let Some((is_max, l, r)) = max_min_sugar(f) {
        out.push_str(if is_max { "max(" } else { "min(" });
        render(l, Slot::Sum, out);
        out.push_str(", ");
        render(r, Slot::Sum, out);
        out.push(')');
        return;
    }
    let parens = natural_slot(f) < slot;
    if parens {
        out.push('(');
    }
    match f.node() {
        Node::Rat(v) => out.push_str(&fmt_q(v)),
        Node::Atom {
            relation,
            args,
            bare,
        } => {
            out.push_str(relation);
            if !bare {
                out.push('(');
                for (i, a) in args.iter().enumerate() {
                    if i > 0 {
                        out.push_str(", ");
                    }
                    out.push_str(a.name());
                }
                out.push(')');
            }
        }
        Node::Abs(body) => {
            out.push_str("abs(");
            render(body, Slot::Sum, out);
            out.push(')');
        }
        Node::Linear {
            cl,
            left,
            cr,
            right,
        } => {
            if *cl == q1() && *cr == q1() {
                render(left, Slot::SumLeft, out);
                out.push_str(" + ");
                render(right, Slot::Term, out);
            } else if *cl == q1() && *cr == -q1() {
                render(left, Slot::SumLeft, out);
                out.push_str(" - ");
                render(right, Slot::Term, out);
            } else {
                // Coefficients outside the parser's reach; print an
                // evaluation-equivalent product form.
                out.push_str(&fmt_q(cl));
                out.push_str("*(");
                render(left, Slot::Sum, out);
                out.push_str(") + ");
                out.push_str(&fmt_q(cr));
                out.push_str("*(");
                render(right, Slot::Sum, out);
                out.push(')');
            }
        }
        Node::Product { left, right } => {
            render(left, Slot::Term, out);
            out.push('*');
            render(right, Slot::Factor, out);
        }
        Node::Integral { var, body } => {
            out.push_str("int ");
            out.push_str(var);
            out.push_str(". ");
            render(body, Slot::Sum, out);
        }
    }
    if parens {
        out.push(')');
    }
}

/// Prints `f` so that re-parsing yields a structurally identical tree.
/// Linear nodes whose coefficients the grammar cannot express (anything other
/// than sums, differences, and the `max`/`min` shapes) print as an
/// evaluation-equivalent product form instead.
pub fn print_formula(f: &Formula) -> String {
    let mut out = String::new();
    render(f, Slot::Sum, &mut out);
    out
}
