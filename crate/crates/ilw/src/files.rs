//! Readers and writers for the workbench file formats.
//!
//! Keyed formats (signature, structure, action, partial action, paradox
//! certificate, function family, topometric space) are TOML; parsing uses
//! the toml crate so malformed input reports a position, while rendering is
//! direct string building with a fixed layout. Line formats (theory,
//! formula fragment, matrix) use one record per line with formulas and
//! rationals in double quotes. Rationals are always quoted strings "p/q".
//! Rendering is deterministic, and parse(render(x)) reproduces x up to the
//! documented normalizations (tables keyed by name are loaded in sorted
//! name order).

use std::collections::BTreeSet;

use thiserror::Error;
use toml::value::{Table as TomlTable, Value};

use crate::invariance::paradox::{ParadoxCertificate, PartialAction, Piece};
use crate::invariance::{FiniteAction, FiniteSemigroup, InvarianceError};
use crate::logic::{
    parse_formula, Comparator, Formula, LogicError, RelationDecl, Signature, Statement, Theory,
};
use crate::nip::{FunctionFamily, NipError};
use crate::rational::{fmt_q, parse_q, sup_abs, Q};
use crate::stability::{PhiMatrix, StabilityError, TypeVector};
use crate::structures::{FiniteStructure, StructureError};
use crate::topometric::{FiniteTopoSpace, TopoError};

#[derive(Debug, Error)]
pub enum FileError {
    #[error("{0}")]
    Toml(String),
    #[error("line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("missing key `{0}`")]
    MissingKey(String),
    #[error("key `{key}`: expected {expected}")]
    BadValue { key: String, expected: String },
    #[error("{context}: unknown label `{label}`")]
    UnknownLabel { context: String, label: String },
    #[error("{context}: duplicate entry `{label}`")]
    DuplicateEntry { context: String, label: String },
    #[error("{context}: expected {expected} entries, got {got}")]
    WrongCount {
        context: String,
        expected: usize,
        got: usize,
    },
    #[error(transparent)]
    Logic(#[from] LogicError),
    #[error(transparent)]
    Structure(#[from] StructureError),
    #[error(transparent)]
    Invariance(#[from] InvarianceError),
    #[error(transparent)]
    Stability(#[from] StabilityError),
    #[error(transparent)]
    Nip(#[from] NipError),
    #[error(transparent)]
    Topo(#[from] TopoError),
}

// ---- TOML helpers ----

fn parse_toml(text: &str) -> Result<TomlTable, FileError> {
    text.parse::<TomlTable>()
        .map_err(|e| FileError::Toml(e.to_string()))
}

fn get<'a>(tbl: &'a TomlTable, key: &str, path: &str) -> Result<&'a Value, FileError> {
    tbl.get(key)
        .ok_or_else(|| FileError::MissingKey(join_key(path, key)))
}

fn join_key(path: &str, key: &str) -> String {
    if path.is_empty() {
        key.to_string()
    } else {
        format!("{path}.{key}")
    }
}

fn as_table<'a>(v: &'a Value, key: &str) -> Result<&'a TomlTable, FileError> {
    v.as_table().ok_or_else(|| FileError::BadValue {
        key: key.to_string(),
        expected: "a table".to_string(),
    })
}

fn as_str<'a>(v: &'a Value, key: &str) -> Result<&'a str, FileError> {
    v.as_str().ok_or_else(|| FileError::BadValue {
        key: key.to_string(),
        expected: "a string".to_string(),
    })
}

fn as_array<'a>(v: &'a Value, key: &str) -> Result<&'a [Value], FileError> {
    v.as_array()
        .map(Vec::as_slice)
        .ok_or_else(|| FileError::BadValue {
            key: key.to_string(),
            expected: "an array".to_string(),
        })
}

fn as_q(v: &Value, key: &str) -> Result<Q, FileError> {
    let s = as_str(v, key)?;
    parse_q(s).map_err(|message| FileError::BadValue {
        key: key.to_string(),
        expected: message,
    })
}

fn str_list(tbl: &TomlTable, key: &str, path: &str) -> Result<Vec<String>, FileError> {
    let full = join_key(path, key);
    as_array(get(tbl, key, path)?, &full)?
        .iter()
        .map(|v| as_str(v, &full).map(str::to_string))
        .collect()
}

fn q_vec(tbl: &TomlTable, key: &str, path: &str) -> Result<Vec<Q>, FileError> {
    let full = join_key(path, key);
    as_array(get(tbl, key, path)?, &full)?
        .iter()
        .map(|v| as_q(v, &full))
        .collect()
}

/// Rows of labels: `[["a", "b"], ["b", "a"]]`.
fn label_rows(tbl: &TomlTable, key: &str, path: &str) -> Result<Vec<Vec<String>>, FileError> {
    let full = join_key(path, key);
    as_array(get(tbl, key, path)?, &full)?
        .iter()
        .map(|row| {
            as_array(row, &full)?
                .iter()
                .map(|v| as_str(v, &full).map(str::to_string))
                .collect()
        })
        .collect()
}

fn resolve(labels: &[String], label: &str, context: &str) -> Result<usize, FileError> {
    labels
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| FileError::UnknownLabel {
            context: context.to_string(),
            label: label.to_string(),
        })
}

pub(crate) fn quoted_list(items: &[String]) -> String {
    let quoted: Vec<String> = items.iter().map(|s| format!("\"{s}\"")).collect();
    format!("[{}]", quoted.join(", "))
}

pub(crate) fn quoted_q_list(values: &[Q]) -> String {
    let quoted: Vec<String> = values.iter().map(|v| format!("\"{}\"", fmt_q(v))).collect();
    format!("[{}]", quoted.join(", "))
}

// ---- line-format helpers ----

#[derive(Debug, Clone, PartialEq, Eq)]
enum Tok {
    Quoted(String),
    Bare(String),
}

/// Splits one line into tokens plus an optional trailing `# label`. Quoted
/// tokens keep their inner text; bare tokens end at whitespace, a quote, or
/// a hash.
fn tokenize_line(line: &str) -> Result<(Vec<Tok>, Option<String>), String> {
    let bytes = line.as_bytes();
    let mut toks = Vec::new();
    let mut i = 0;
    while i < bytes.len() {
        let c = bytes[i];
        if c.is_ascii_whitespace() {
            i += 1;
        } else if c == b'#' {
            return Ok((toks, Some(line[i + 1..].trim().to_string())));
        } else if c == b'"' {
            let start = i + 1;
            let end = line[start..]
                .find('"')
                .ok_or_else(|| "unterminated quote".to_string())?;
            toks.push(Tok::Quoted(line[start..start + end].to_string()));
            i = start + end + 1;
        } else {
            let start = i;
            while i < bytes.len()
                && !bytes[i].is_ascii_whitespace()
                && bytes[i] != b'"'
                && bytes[i] != b'#'
            {
                i += 1;
            }
            toks.push(Tok::Bare(line[start..i].to_string()));
        }
    }
    Ok((toks, None))
}

fn line_err(line: usize, message: impl Into<String>) -> FileError {
    FileError::Line {
        line,
        message: message.into(),
    }
}

/// Non-blank, non-comment lines with their 1-based numbers.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l))
        .filter(|(_, l)| {
            let t = l.trim();
            !t.is_empty() && !t.starts_with('#')
        })
}

// ---- signature files ----

/// Format: `constants = [...]` plus one `[relation.<name>]` table per
/// relation with `arity` and quoted `bound`. Relations load in sorted name
/// order.
pub fn parse_signature(text: &str) -> Result<Signature, FileError> {
    let root = parse_toml(text)?;
    signature_from_tables(&root)
}

fn signature_from_tables(root: &TomlTable) -> Result<Signature, FileError> {
    let constants = match root.get("constants") {
        Some(v) => as_array(v, "constants")?
            .iter()
            .map(|v| as_str(v, "constants").map(str::to_string))
            .collect::<Result<Vec<_>, _>>()?,
        None => Vec::new(),
    };
    let mut relations = Vec::new();
    if let Some(v) = root.get("relation") {
        let rel_tbl = as_table(v, "relation")?;
        for (name, decl) in rel_tbl {
            let path = format!("relation.{name}");
            let decl = as_table(decl, &path)?;
            let arity = get(decl, "arity", &path)?
                .as_integer()
                .filter(|&a| a >= 0)
                .ok_or_else(|| FileError::BadValue {
                    key: join_key(&path, "arity"),
                    expected: "a nonnegative integer".to_string(),
                })? as usize;
            let bound = as_q(get(decl, "bound", &path)?, &join_key(&path, "bound"))?;
            relations.push(RelationDecl::new(name, arity, bound));
        }
    }
    Ok(Signature::new(relations, constants)?)
}

pub fn render_signature(sig: &Signature) -> String {
    let mut out = String::new();
    out.push_str(&format!("constants = {}\n", quoted_list(sig.constants())));
    for decl in sig.relations() {
        out.push_str(&format!(
            "\n[relation.{}]\narity = {}\nbound = \"{}\"\n",
            decl.name,
            decl.arity,
            fmt_q(&decl.bound)
        ));
    }
    out
}

// ---- structure files ----

/// Nested value arrays: depth equals arity, every level has exactly n
/// entries, leaves are quoted rationals. Returns (depth, row-major values).
fn parse_nested(v: &Value, n: usize, key: &str) -> Result<(usize, Vec<Q>), FileError> {
    match v {
        Value::String(_) => Ok((0, vec![as_q(v, key)?])),
        Value::Array(items) => {
            if items.len() != n {
                return Err(FileError::WrongCount {
                    context: key.to_string(),
                    expected: n,
                    got: items.len(),
                });
            }
            let mut depth = None;
            let mut flat = Vec::new();
            for item in items {
                let (d, mut vals) = parse_nested(item, n, key)?;
                if *depth.get_or_insert(d) != d {
                    return Err(FileError::BadValue {
                        key: key.to_string(),
                        expected: "rectangular nesting".to_string(),
                    });
                }
                flat.append(&mut vals);
            }
            // Empty arrays cannot occur: n >= 1 is enforced by [space].
            Ok((depth.expect("nonempty") + 1, flat))
        }
        _ => Err(FileError::BadValue {
            key: key.to_string(),
            expected: "a quoted rational or nested array".to_string(),
        }),
    }
}

fn render_nested(values: &[Q], n: usize, arity: usize) -> String {
    if arity == 0 {
        return format!("\"{}\"", fmt_q(&values[0]));
    }
    let chunk = values.len() / n;
    let parts: Vec<String> = (0..n)
        .map(|i| render_nested(&values[i * chunk..(i + 1) * chunk], n, arity - 1))
        .collect();
    format!("[{}]", parts.join(", "))
}

/// Format: `[space] points, weights`; one `[relation.<name>]` per relation
/// with `values` (nested arrays, depth = arity) and optional `arity` and
/// `bound` (defaults: inferred depth, largest absolute value); one
/// `[constant.<name>]` with `point`. Tables load in sorted name order.
pub fn parse_structure(text: &str) -> Result<FiniteStructure, FileError> {
    let root = parse_toml(text)?;
    let space = as_table(get(&root, "space", "")?, "space")?;
    let points = str_list(space, "points", "space")?;
    let weights = q_vec(space, "weights", "space")?;
    let n = points.len();
    let mut relations = Vec::new();
    let mut relation_values = Vec::new();
    if let Some(v) = root.get("relation") {
        for (name, decl) in as_table(v, "relation")? {
            let path = format!("relation.{name}");
            let decl = as_table(decl, &path)?;
            let (depth, values) =
                parse_nested(get(decl, "values", &path)?, n, &join_key(&path, "values"))?;
            if let Some(a) = decl.get("arity") {
                let stated = a.as_integer().unwrap_or(-1);
                if stated != depth as i64 {
                    return Err(FileError::BadValue {
                        key: join_key(&path, "arity"),
                        expected: format!("the nesting depth {depth}"),
                    });
                }
            }
            let bound = match decl.get("bound") {
                Some(b) => as_q(b, &join_key(&path, "bound"))?,
                None => sup_abs(&values),
            };
            relations.push(RelationDecl::new(name, depth, bound));
            relation_values.push((name.clone(), values));
        }
    }
    let mut constants = Vec::new();
    if let Some(v) = root.get("constant") {
        for (name, decl) in as_table(v, "constant")? {
            let path = format!("constant.{name}");
            let decl = as_table(decl, &path)?;
            let point = as_str(get(decl, "point", &path)?, &join_key(&path, "point"))?;
            constants.push((name.clone(), point.to_string()));
        }
    }
    let sig = Signature::new(
        relations,
        constants.iter().map(|(name, _)| name.clone()).collect(),
    )?;
    Ok(FiniteStructure::new(
        sig,
        points,
        weights,
        relation_values,
        constants,
    )?)
}

pub fn render_structure(s: &FiniteStructure) -> String {
    let mut out = String::new();
    out.push_str(&format!(
        "[space]\npoints = {}\nweights = {}\n",
        quoted_list(s.points()),
        quoted_q_list(s.weights())
    ));
    for name in s.signature().constants() {
        let point = s.constant_point(name).expect("interpreted constant");
        out.push_str(&format!(
            "\n[constant.{name}]\npoint = \"{}\"\n",
            s.points()[point]
        ));
    }
    for decl in s.signature().relations() {
        let table = s.table(&decl.name).expect("interpreted relation");
        out.push_str(&format!(
            "\n[relation.{}]\narity = {}\nbound = \"{}\"\nvalues = {}\n",
            decl.name,
            decl.arity,
            fmt_q(&decl.bound),
            render_nested(&table.values, s.points().len(), decl.arity)
        ));
    }
    out
}

// ---- theory files ----

/// Format: one statement per line, `"<formula>" >= "<q>"` or
/// `"<formula>" = "<q>"`, optionally followed by `# <label>`. Blank lines
/// and lines starting with `#` are skipped. Unlabeled statements get
/// `s<position>` (1-based).
pub fn parse_theory(text: &str, sig: &Signature) -> Result<Theory, FileError> {
    let mut theory = Theory::default();
    for (lineno, line) in content_lines(text) {
        let (toks, label) = tokenize_line(line).map_err(|m| line_err(lineno, m))?;
        let [Tok::Quoted(formula), Tok::Bare(op), Tok::Quoted(threshold)] = toks.as_slice() else {
            return Err(line_err(
                lineno,
                "expected `\"<formula>\" >= \"<rational>\"` or `\"<formula>\" = \"<rational>\"`",
            ));
        };
        let comparator = match op.as_str() {
            ">=" => Comparator::Ge,
            "=" => Comparator::Eq,
            other => return Err(line_err(lineno, format!("unknown comparator `{other}`"))),
        };
        let formula = parse_formula(formula, sig).map_err(|e| line_err(lineno, e.to_string()))?;
        let threshold = parse_q(threshold).map_err(|m| line_err(lineno, m))?;
        let statement =
            Statement::new(formula, comparator, threshold).map_err(|e| line_err(lineno, e.to_string()))?;
        let label = match label {
            Some(l) if !l.is_empty() => l,
            _ => format!("s{}", theory.len() + 1),
        };
        theory.push(statement, &label);
    }
    Ok(theory)
}

pub fn render_theory(theory: &Theory) -> String {
    let mut out = String::new();
    for entry in &theory.entries {
        out.push_str(&format!("{} # {}\n", entry.statement.render(), entry.label));
    }
    out
}

// ---- fragment files ----

/// Format: one `"<formula>" <variable>` per line; the variable is the
/// designated free variable the formula is read as a function of.
pub fn parse_fragment(text: &str, sig: &Signature) -> Result<Vec<(Formula, String)>, FileError> {
    let mut fragment = Vec::new();
    for (lineno, line) in content_lines(text) {
        let (toks, _) = tokenize_line(line).map_err(|m| line_err(lineno, m))?;
        let [Tok::Quoted(formula), Tok::Bare(var)] = toks.as_slice() else {
            return Err(line_err(lineno, "expected `\"<formula>\" <variable>`"));
        };
        let formula = parse_formula(formula, sig).map_err(|e| line_err(lineno, e.to_string()))?;
        fragment.push((formula, var.clone()));
    }
    Ok(fragment)
}

pub fn render_fragment(fragment: &[(Formula, String)]) -> String {
    let mut out = String::new();
    for (formula, var) in fragment {
        out.push_str(&format!(
            "\"{}\" {var}\n",
            crate::logic::print_formula(formula)
        ));
    }
    out
}

// ---- action files ----

/// Format: `[semigroup] elements, table` and `[action] points, table`,
/// both tables row-major with entries given by label: `table[i][j]` is the
/// label of `s_i * s_j`, and the action's `table[i][x]` is the label of
/// `s_i . x`.
pub fn parse_action(text: &str) -> Result<FiniteAction, FileError> {
    let root = parse_toml(text)?;
    let sg = as_table(get(&root, "semigroup", "")?, "semigroup")?;
    let elements = str_list(sg, "elements", "semigroup")?;
    let sg_rows = label_rows(sg, "table", "semigroup")?;
    let table = sg_rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|l| resolve(&elements, l, "semigroup.table"))
                .collect()
        })
        .collect::<Result<Vec<Vec<usize>>, _>>()?;
    let semigroup = FiniteSemigroup::new(elements, table)?;
    let act_tbl = as_table(get(&root, "action", "")?, "action")?;
    let points = str_list(act_tbl, "points", "action")?;
    let act_rows = label_rows(act_tbl, "table", "action")?;
    let act = act_rows
        .iter()
        .map(|row| {
            row.iter()
                .map(|l| resolve(&points, l, "action.table"))
                .collect()
        })
        .collect::<Result<Vec<Vec<usize>>, _>>()?;
    Ok(FiniteAction::new(semigroup, points, act)?)
}

pub fn render_action(action: &FiniteAction) -> String {
    let sg = action.semigroup();
    let elements = sg.elements();
    let sg_rows: Vec<String> = (0..elements.len())
        .map(|s| {
            let row: Vec<String> = (0..elements.len())
                .map(|t| format!("\"{}\"", elements[sg.op(s, t)]))
                .collect();
            format!("[{}]", row.join(", "))
        })
        .collect();
    let points = action.points();
    let act_rows: Vec<String> = (0..elements.len())
        .map(|s| {
            let row: Vec<String> = (0..points.len())
                .map(|x| format!("\"{}\"", points[action.apply(s, x)]))
                .collect();
            format!("[{}]", row.join(", "))
        })
        .collect();
    format!(
        "[semigroup]\nelements = {}\ntable = [{}]\n\n[action]\npoints = {}\ntable = [{}]\n",
        quoted_list(elements),
        sg_rows.join(", "),
        quoted_list(points),
        act_rows.join(", ")
    )
}

// ---- partial-action files ----

/// Format: top-level `points`, then one `[generator.<name>]` table per
/// generator with `pairs = [["from", "to"], ...]`; omitted points are
/// outside the generator's domain. Generators load in sorted name order.
pub fn parse_partial_action(text: &str) -> Result<PartialAction, FileError> {
    let root = parse_toml(text)?;
    let points = str_list(&root, "points", "")?;
    let mut generators = Vec::new();
    if let Some(v) = root.get("generator") {
        for (name, decl) in as_table(v, "generator")? {
            let path = format!("generator.{name}");
            let decl = as_table(decl, &path)?;
            let pairs = label_rows(decl, "pairs", &path)?;
            let mut map = vec![None; points.len()];
            for pair in &pairs {
                let [from, to] = pair.as_slice() else {
                    return Err(FileError::BadValue {
                        key: join_key(&path, "pairs"),
                        expected: "pairs [\"from\", \"to\"]".to_string(),
                    });
                };
                let f = resolve(&points, from, &path)?;
                let t = resolve(&points, to, &path)?;
                if map[f].is_some() {
                    return Err(FileError::DuplicateEntry {
                        context: join_key(&path, "pairs"),
                        label: from.clone(),
                    });
                }
                map[f] = Some(t);
            }
            generators.push((name.clone(), map));
        }
    }
    Ok(PartialAction::new(points, generators)?)
}

pub fn render_partial_action(action: &PartialAction) -> String {
    let points = action.points();
    let mut out = format!("points = {}\n", quoted_list(points));
    for (name, map) in action.generators() {
        let pairs: Vec<String> = map
            .iter()
            .enumerate()
            .filter_map(|(from, to)| {
                to.map(|t| format!("[\"{}\", \"{}\"]", points[from], points[t]))
            })
            .collect();
        out.push_str(&format!(
            "\n[generator.{name}]\npairs = [{}]\n",
            pairs.join(", ")
        ));
    }
    out
}

// ---- paradox-certificate files ----

/// Format: `target` (point labels), then `[[apiece]]` and `[[bpiece]]`
/// entries, each with `points` and `mover` (a word of generator names,
/// leftmost applied last). Labels resolve against the given action.
pub fn parse_certificate(
    text: &str,
    action: &PartialAction,
) -> Result<ParadoxCertificate, FileError> {
    let root = parse_toml(text)?;
    let target = str_list(&root, "target", "")?
        .iter()
        .map(|l| resolve(action.points(), l, "target"))
        .collect::<Result<BTreeSet<usize>, _>>()?;
    let side = |key: &str| -> Result<Vec<Piece>, FileError> {
        let mut pieces = Vec::new();
        if let Some(v) = root.get(key) {
            for (i, entry) in as_array(v, key)?.iter().enumerate() {
                let path = format!("{key}[{i}]");
                let entry = as_table(entry, &path)?;
                let points = str_list(entry, "points", &path)?
                    .iter()
                    .map(|l| resolve(action.points(), l, &path))
                    .collect::<Result<BTreeSet<usize>, _>>()?;
                let mover = str_list(entry, "mover", &path)?
                    .iter()
                    .map(|name| {
                        action
                            .generator_index(name)
                            .ok_or_else(|| FileError::UnknownLabel {
                                context: join_key(&path, "mover"),
                                label: name.clone(),
                            })
                    })
                    .collect::<Result<Vec<usize>, _>>()?;
                pieces.push(Piece { points, mover });
            }
        }
        Ok(pieces)
    };
    Ok(ParadoxCertificate {
        target,
        a_pieces: side("apiece")?,
        b_pieces: side("bpiece")?,
    })
}

pub fn render_certificate(cert: &ParadoxCertificate, action: &PartialAction) -> String {
    let label = |x: &usize| action.points()[*x].clone();
    let mut out = format!(
        "target = {}\n",
        quoted_list(&cert.target.iter().map(label).collect::<Vec<_>>())
    );
    let mut side = |key: &str, pieces: &[Piece]| {
        for piece in pieces {
            let mover: Vec<String> = piece
                .mover
                .iter()
                .map(|&g| action.generators()[g].0.clone())
                .collect();
            out.push_str(&format!(
                "\n[[{key}]]\npoints = {}\nmover = {}\n",
                quoted_list(&piece.points.iter().map(label).collect::<Vec<_>>()),
                quoted_list(&mover)
            ));
        }
    };
    side("apiece", &cert.a_pieces);
    side("bpiece", &cert.b_pieces);
    out
}

// ---- matrix and vector files ----

/// Format: a header line of bare column labels, then one line per row:
/// the row label followed by quoted rationals, one per column. Measures
/// are uniform and the bound is the largest absolute entry.
pub fn parse_matrix(text: &str) -> Result<PhiMatrix, FileError> {
    let mut lines = content_lines(text);
    let (lineno, header) = lines.next().ok_or(line_err(1, "missing header line"))?;
    let (toks, _) = tokenize_line(header).map_err(|m| line_err(lineno, m))?;
    let col_labels: Vec<String> = toks
        .iter()
        .map(|t| match t {
            Tok::Bare(l) => Ok(l.clone()),
            Tok::Quoted(_) => Err(line_err(lineno, "column labels must be bare")),
        })
        .collect::<Result<_, _>>()?;
    if col_labels.is_empty() {
        return Err(line_err(lineno, "header has no column labels"));
    }
    let mut row_labels = Vec::new();
    let mut entries: Vec<Vec<Q>> = Vec::new();
    for (lineno, line) in lines {
        let (toks, _) = tokenize_line(line).map_err(|m| line_err(lineno, m))?;
        let Some((Tok::Bare(label), rest)) = toks.split_first() else {
            return Err(line_err(lineno, "expected a bare row label first"));
        };
        let row: Vec<Q> = rest
            .iter()
            .map(|t| match t {
                Tok::Quoted(v) => parse_q(v).map_err(|m| line_err(lineno, m)),
                Tok::Bare(_) => Err(line_err(lineno, "entries must be quoted rationals")),
            })
            .collect::<Result<_, _>>()?;
        if row.len() != col_labels.len() {
            return Err(line_err(
                lineno,
                format!("expected {} entries, got {}", col_labels.len(), row.len()),
            ));
        }
        row_labels.push(label.clone());
        entries.push(row);
    }
    let n_rows = entries.len();
    let n_cols = col_labels.len();
    let bound = sup_abs(&entries.iter().flatten().cloned().collect::<Vec<_>>());
    let uniform = |n: usize| vec![Q::new(1.into(), (n as i64).into()); n];
    Ok(PhiMatrix::new(
        row_labels,
        col_labels,
        entries,
        bound,
        uniform(n_rows),
        uniform(n_cols),
    )?)
}

pub fn render_matrix(m: &PhiMatrix) -> String {
    let mut out = m.col_labels().join(" ");
    out.push('\n');
    for i in 0..m.rows() {
        out.push_str(&m.row_labels()[i]);
        for v in m.row(i) {
            out.push_str(&format!(" \"{}\"", fmt_q(v)));
        }
        out.push('\n');
    }
    out
}

/// A vector file is a matrix file with exactly one row; returns the column
/// labels alongside the row as a type vector.
pub fn parse_vector(text: &str) -> Result<(Vec<String>, TypeVector), FileError> {
    let m = parse_matrix(text)?;
    if m.rows() != 1 {
        return Err(FileError::WrongCount {
            context: "vector file rows".to_string(),
            expected: 1,
            got: m.rows(),
        });
    }
    Ok((
        m.col_labels().to_vec(),
        TypeVector {
            label: m.row_labels()[0].clone(),
            coords: m.row(0).to_vec(),
        },
    ))
}

pub fn render_vector(col_labels: &[String], v: &TypeVector) -> String {
    let mut out = col_labels.join(" ");
    out.push('\n');
    out.push_str(&v.label);
    for value in &v.coords {
        out.push_str(&format!(" \"{}\"", fmt_q(value)));
    }
    out.push('\n');
    out
}

// ---- family files ----

/// Format: `[carrier] points, weights`, then one `[function.<name>]` table
/// per function with `values` (quoted rationals, one per carrier point).
/// Functions load in sorted name order; identical value vectors merge.
pub fn parse_family(text: &str) -> Result<FunctionFamily, FileError> {
    let (points, weights, functions) = parse_family_raw(text)?;
    Ok(FunctionFamily::new(points, weights, functions)?)
}

/// The family file's content before any merging: carrier points, weights,
/// and the named value vectors in sorted name order. Callers that need the
/// original one-name-per-vector form (theory generation, multiplicativity)
/// use this instead of [`parse_family`].
pub fn parse_family_raw(
    text: &str,
) -> Result<(Vec<String>, Vec<Q>, Vec<(String, Vec<Q>)>), FileError> {
    let root = parse_toml(text)?;
    let carrier = as_table(get(&root, "carrier", "")?, "carrier")?;
    let points = str_list(carrier, "points", "carrier")?;
    let weights = q_vec(carrier, "weights", "carrier")?;
    let mut functions = Vec::new();
    if let Some(v) = root.get("function") {
        for (name, decl) in as_table(v, "function")? {
            let path = format!("function.{name}");
            let decl = as_table(decl, &path)?;
            functions.push((name.clone(), q_vec(decl, "values", &path)?));
        }
    }
    Ok((points, weights, functions))
}

pub fn render_family(family: &FunctionFamily) -> String {
    let mut out = format!(
        "[carrier]\npoints = {}\nweights = {}\n",
        quoted_list(family.points()),
        quoted_q_list(family.weights())
    );
    // Merged functions render one block per original name, same values.
    let mut blocks: Vec<(&String, &[Q])> = family
        .functions()
        .iter()
        .flat_map(|f| f.names().iter().map(move |n| (n, f.values())))
        .collect();
    blocks.sort_by(|a, b| a.0.cmp(b.0));
    for (name, values) in blocks {
        out.push_str(&format!(
            "\n[function.{name}]\nvalues = {}\n",
            quoted_q_list(values)
        ));
    }
    out
}

// ---- topometric-space files ----

/// Format: top-level `points` and `metric` (lower-triangular rows of
/// quoted rationals, diagonal included; the matrix is completed by
/// symmetry), then a `[minopen]` table mapping every point label to the
/// labels of its minimal open neighborhood.
pub fn parse_space(text: &str) -> Result<FiniteTopoSpace, FileError> {
    let root = parse_toml(text)?;
    let points = str_list(&root, "points", "")?;
    let n = points.len();
    let rows = as_array(get(&root, "metric", "")?, "metric")?;
    if rows.len() != n {
        return Err(FileError::WrongCount {
            context: "metric rows".to_string(),
            expected: n,
            got: rows.len(),
        });
    }
    let mut metric = vec![vec![Q::default(); n]; n];
    for (i, row) in rows.iter().enumerate() {
        let row = as_array(row, "metric")?;
        if row.len() != i + 1 {
            return Err(FileError::WrongCount {
                context: format!("metric row {i}"),
                expected: i + 1,
                got: row.len(),
            });
        }
        for (j, v) in row.iter().enumerate() {
            let value = as_q(v, "metric")?;
            metric[i][j] = value.clone();
            metric[j][i] = value;
        }
    }
    let minopen_tbl = as_table(get(&root, "minopen", "")?, "minopen")?;
    let mut min_open = Vec::with_capacity(n);
    for p in &points {
        let nb = str_list(minopen_tbl, p, "minopen")?
            .iter()
            .map(|l| resolve(&points, l, "minopen"))
            .collect::<Result<BTreeSet<usize>, _>>()?;
        min_open.push(nb);
    }
    for key in minopen_tbl.keys() {
        if !points.contains(key) {
            return Err(FileError::UnknownLabel {
                context: "minopen".to_string(),
                label: key.clone(),
            });
        }
    }
    Ok(FiniteTopoSpace::new(points, min_open, metric)?)
}

pub fn render_space(space: &FiniteTopoSpace) -> String {
    let n = space.len();
    let rows: Vec<String> = (0..n)
        .map(|i| {
            let row: Vec<String> = (0..=i)
                .map(|j| format!("\"{}\"", fmt_q(space.distance(i, j))))
                .collect();
            format!("[{}]", row.join(", "))
        })
        .collect();
    let mut out = format!(
        "points = {}\nmetric = [{}]\n\n[minopen]\n",
        quoted_list(space.points()),
        rows.join(", ")
    );
    for (x, p) in space.points().iter().enumerate() {
        let nb: Vec<String> = space
            .min_open(x)
            .iter()
            .map(|&y| space.points()[y].clone())
            .collect();
        out.push_str(&format!("{p} = {}\n", quoted_list(&nb)));
    }
    out
}

// ---- CLI flag helpers ----

/// Comma-separated labels; empty text gives an empty list.
pub fn parse_label_list(text: &str) -> Vec<String> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(str::to_string)
        .collect()
}

/// Comma-separated rationals, e.g. `1/3,1/3,1/3`.
pub fn parse_q_list(text: &str) -> Result<Vec<Q>, FileError> {
    text.split(',')
        .map(|s| {
            parse_q(s).map_err(|message| FileError::BadValue {
                key: "list".to_string(),
                expected: message,
            })
        })
        .collect()
}
