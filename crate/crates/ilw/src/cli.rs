//! Command-line front end: one subcommand per library operation.
//!
//! Every invocation prints a keyed report whose first line is
//! `status = "ok" | "property-fails" | "input-error"`; the remaining lines
//! are `name = value` pairs with exact rationals as quoted strings.
//! Commands that generate a file (theory, matrix, partial action,
//! certificate) append its body after a blank line, or write it to `--out`
//! instead. Exit code 0 covers both ok and property-fails-with-report;
//! malformed input exits 2. Output is byte-identical for identical inputs
//! and flags.

use std::collections::{BTreeMap, BTreeSet};
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand, ValueEnum};

use crate::cancel::CancelToken;
use crate::files::{
    self, parse_label_list, parse_q_list, quoted_list, quoted_q_list, render_certificate,
    render_matrix, render_partial_action, render_structure, render_theory,
};
use crate::invariance::paradox::{
    f2ball, paradox_search, paradox_search_heuristic, paradox_verify, SEARCH_LIMIT,
};
use crate::invariance::{
    build_invariance_theory, cesaro_limit, family_structure, infeasibility_witness,
    invariant_measures, is_multiplicative, FeasibilityResult, FiniteAction, InvarianceError,
};
use crate::logic::parse_formula;
use crate::nip::{
    almost_defines, almost_dependence_check, dk_measure, independence_dimension, l1_distance,
    quotient_types, DependenceVerdict, FunctionFamily,
};
use crate::rational::{fmt_q, parse_q, q0, Q};
use crate::stability::{
    ladder_index, ladder_lower_bound, nearest_rows, phi_matrix, type_metric, LadderIndex,
    TypeVector,
};
use crate::structures::{tarski_vaught_check, FiniteStructure};
use crate::topometric::{cb_rank, cb_sequence, validate_topometric, CbRank, FiniteTopoSpace};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Status {
    Ok,
    PropertyFails,
    InputError,
}

impl Status {
    fn text(self) -> &'static str {
        match self {
            Status::Ok => "ok",
            Status::PropertyFails => "property-fails",
            Status::InputError => "input-error",
        }
    }
}

/// A finished command: a status, keyed payload lines, and optionally a
/// generated file body printed after a blank line.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CommandReport {
    pub status: Status,
    pub payload: Vec<(String, String)>,
    pub body: Option<String>,
}

impl CommandReport {
    fn new(status: Status) -> Self {
        Self {
            status,
            payload: Vec::new(),
            body: None,
        }
    }

    fn push(&mut self, key: &str, value: String) {
        self.payload.push((key.to_string(), value));
    }

    pub fn render(&self) -> String {
        let mut out = format!("status = \"{}\"\n", self.status.text());
        for (key, value) in &self.payload {
            out.push_str(&format!("{key} = {value}\n"));
        }
        if let Some(body) = &self.body {
            out.push('\n');
            out.push_str(body);
        }
        out
    }

    pub fn exit_code(&self) -> i32 {
        match self.status {
            Status::InputError => 2,
            _ => 0,
        }
    }
}

struct CmdError {
    message: String,
    hint: Option<String>,
}

impl CmdError {
    fn into_report(self) -> CommandReport {
        let mut report = CommandReport::new(Status::InputError);
        report.push("error", tstr(&self.message));
        if let Some(hint) = self.hint {
            report.push("hint", tstr(&hint));
        }
        report
    }
}

fn fail(e: impl std::fmt::Display) -> CmdError {
    CmdError {
        message: e.to_string(),
        hint: None,
    }
}

// ---- value rendering ----

/// TOML-style quoted string with backslash, quote, and newline escapes.
fn tstr(s: &str) -> String {
    let mut out = String::with_capacity(s.len() + 2);
    out.push('"');
    for c in s.chars() {
        match c {
            '\\' => out.push_str("\\\\"),
            '"' => out.push_str("\\\""),
            '\n' => out.push_str("\\n"),
            _ => out.push(c),
        }
    }
    out.push('"');
    out
}

fn qstr(v: &Q) -> String {
    format!("\"{}\"", fmt_q(v))
}

fn ilist(values: &[usize]) -> String {
    let items: Vec<String> = values.iter().map(usize::to_string).collect();
    format!("[{}]", items.join(", "))
}

fn set_labels(set: &BTreeSet<usize>, labels: &[String]) -> Vec<String> {
    set.iter().map(|&x| labels[x].clone()).collect()
}

// ---- argument parsing helpers ----

fn read_file(path: &Path) -> Result<String, CmdError> {
    std::fs::read_to_string(path).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn write_file(path: &Path, body: &str) -> Result<(), CmdError> {
    std::fs::write(path, body).map_err(|e| fail(format!("{}: {e}", path.display())))
}

fn load_structure(path: &Path) -> Result<FiniteStructure, CmdError> {
    files::parse_structure(&read_file(path)?).map_err(fail)
}

fn load_action(path: &Path) -> Result<FiniteAction, CmdError> {
    files::parse_action(&read_file(path)?).map_err(fail)
}

fn load_family(path: &Path) -> Result<FunctionFamily, CmdError> {
    files::parse_family(&read_file(path)?).map_err(fail)
}

fn load_matrix(path: &Path) -> Result<crate::stability::PhiMatrix, CmdError> {
    files::parse_matrix(&read_file(path)?).map_err(fail)
}

fn load_vector(path: &Path) -> Result<(Vec<String>, TypeVector), CmdError> {
    files::parse_vector(&read_file(path)?).map_err(fail)
}

fn load_space(path: &Path) -> Result<FiniteTopoSpace, CmdError> {
    files::parse_space(&read_file(path)?).map_err(fail)
}

/// `x=p0,y=p1` into variable-to-point-label pairs.
fn parse_bindings(text: &str) -> Result<Vec<(String, String)>, CmdError> {
    text.split(',')
        .map(str::trim)
        .filter(|s| !s.is_empty())
        .map(|pair| {
            pair.split_once('=')
                .map(|(k, v)| (k.trim().to_string(), v.trim().to_string()))
                .ok_or_else(|| fail(format!("binding `{pair}` is not `name=point`")))
        })
        .collect()
}

fn resolve_assignment(
    s: &FiniteStructure,
    bindings: &[(String, String)],
) -> Result<BTreeMap<String, usize>, CmdError> {
    let mut assign = BTreeMap::new();
    for (var, label) in bindings {
        let idx = s
            .point_index(label)
            .ok_or_else(|| fail(format!("unknown point `{label}`")))?;
        assign.insert(var.clone(), idx);
    }
    Ok(assign)
}

fn resolve_points<'a>(
    labels: impl IntoIterator<Item = &'a String>,
    lookup: impl Fn(&str) -> Option<usize>,
) -> Result<Vec<usize>, CmdError> {
    labels
        .into_iter()
        .map(|l| lookup(l).ok_or_else(|| fail(format!("unknown point `{l}`"))))
        .collect()
}

fn parse_thresholds(pair: &[String]) -> Result<(Q, Q), CmdError> {
    let r = parse_q(&pair[0]).map_err(fail)?;
    let s = parse_q(&pair[1]).map_err(fail)?;
    Ok((r, s))
}

// ---- command tree ----

#[derive(Parser)]
#[command(
    name = "ilw",
    about = "Workbench for integral logic over finite probability structures",
    disable_help_subcommand = true,
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum LadderMode {
    /// Depth-first search with memoized pruning; exact up to the size limit.
    Exact,
    /// Greedy extension; the result never exceeds the true index.
    LowerBound,
}

#[derive(Subcommand)]
enum Cmd {
    /// Evaluate a formula on a structure, with bindings for free variables.
    Eval {
        #[arg(long)]
        structure: PathBuf,
        /// Formula text, e.g. "int x. R(x, c)".
        #[arg(long)]
        formula: String,
        /// Free-variable bindings `x=p0,y=p1`.
        #[arg(long, default_value = "")]
        env: String,
    },
    /// Check every statement of a theory file against a structure.
    CheckTheory {
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        theory: PathBuf,
    },
    /// Sup of |formula| over all assignments of its free variables.
    Supnorm {
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        formula: String,
    },
    /// Partition the points by sign patterns of a formula fragment.
    Minimalize {
        #[arg(long)]
        structure: PathBuf,
        /// Fragment file: one `"<formula>" <variable>` per line.
        #[arg(long)]
        fragment: PathBuf,
        /// Fixed parameter bindings `y=p1`.
        #[arg(long, default_value = "")]
        params: String,
    },
    /// Compare superlevel-set measures between a structure and a
    /// substructure along an embedding.
    TvCheck {
        /// The smaller structure.
        #[arg(long)]
        sub: PathBuf,
        /// The larger structure.
        #[arg(long)]
        structure: PathBuf,
        /// Comma-separated points of the larger structure, one per point of
        /// the smaller one in order.
        #[arg(long)]
        embedding: String,
        #[arg(long)]
        fragment: PathBuf,
    },
    /// Decide whether an action has an invariant probability measure.
    InvariantMeasure {
        #[arg(long)]
        action: PathBuf,
    },
    /// Produce the norm-form infeasibility witness for an action with no
    /// invariant measure.
    DualityWitness {
        #[arg(long)]
        action: PathBuf,
    },
    /// Average the orbit of a point mass under commuting maps.
    Cesaro {
        #[arg(long)]
        action: PathBuf,
        /// Starting point label.
        #[arg(long)]
        start: String,
    },
    /// List the points fixed by every semigroup element.
    FixedPoints {
        #[arg(long)]
        action: PathBuf,
    },
    /// Check integral(f*g) = integral(f)*integral(g) over a family.
    MultiplicativeCheck {
        /// Family file; the carrier must match the measure length.
        #[arg(long)]
        family: PathBuf,
        /// Measure weights `1/3,1/3,1/3`.
        #[arg(long)]
        measure: String,
    },
    /// Generate the invariance axioms of an action over a function family.
    GenTheory {
        #[arg(long)]
        action: PathBuf,
        /// Family file over the action's points; must contain the constant
        /// one function.
        #[arg(long)]
        family: PathBuf,
        /// Also emit product-independence axioms.
        #[arg(long)]
        independence: bool,
        /// Write the theory file here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
        /// Measure weights for the companion structure file.
        #[arg(long)]
        measure: Option<String>,
        /// Write the companion structure file here (requires --measure).
        #[arg(long)]
        out_structure: Option<PathBuf>,
    },
    /// Verify a two-sided piece decomposition against a partial action.
    ParadoxVerify {
        /// Partial-action file.
        #[arg(long)]
        action: PathBuf,
        #[arg(long)]
        certificate: PathBuf,
    },
    /// Search for an exact two-sided piece decomposition of a target set.
    ParadoxSearch {
        /// Partial-action file.
        #[arg(long)]
        action: PathBuf,
        /// Target point labels; all points when omitted.
        #[arg(long)]
        target: Option<String>,
        /// Piece count limit per side.
        #[arg(long, default_value_t = 2)]
        max_pieces: usize,
        /// Mover word length limit.
        #[arg(long, default_value_t = 1)]
        max_word: usize,
        /// Randomized search with a node budget instead of exhaustion.
        #[arg(long)]
        heuristic: bool,
        /// Seed for the heuristic mover order.
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Node budget for the heuristic search.
        #[arg(long, default_value_t = 100_000)]
        limit: u64,
        /// Write the certificate file here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Emit the radius-n ball of the free group on two generators as a
    /// partial action (reduced words over a, A, b, B; left multiplication).
    F2ball {
        #[arg(short = 'n', long)]
        radius: usize,
        /// Write the partial-action file here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Tabulate a two-variable formula over a structure as a matrix file.
    PhiMatrix {
        #[arg(long)]
        structure: PathBuf,
        #[arg(long)]
        formula: String,
        /// Row variable.
        #[arg(long, default_value = "x")]
        row_var: String,
        /// Column variable.
        #[arg(long, default_value = "y")]
        col_var: String,
        /// Write the matrix file here instead of printing it.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Longest ladder configuration of a matrix at thresholds r > s.
    Ladder {
        #[arg(long)]
        matrix: PathBuf,
        /// Threshold pair: r (high) then s (low).
        #[arg(long, num_args = 2, value_names = ["R", "S"], allow_hyphen_values = true)]
        thresholds: Vec<String>,
        #[arg(long, value_enum, default_value_t = LadderMode::Exact)]
        mode: LadderMode,
    },
    /// Sup distance between two type vectors with equal column labels.
    TypeMetric {
        /// Vector file (a one-row matrix file).
        #[arg(long)]
        left: PathBuf,
        #[arg(long)]
        right: PathBuf,
    },
    /// Minimum sup distance from a vector to the rows of a matrix.
    NearestRows {
        #[arg(long)]
        matrix: PathBuf,
        #[arg(long)]
        vector: PathBuf,
        /// Also list all rows within this distance.
        #[arg(long, default_value = "0")]
        epsilon: String,
    },
    /// Check whether a candidate definition matches a vector within
    /// epsilon in sup distance.
    DefinableCheck {
        #[arg(long)]
        matrix: PathBuf,
        /// The vector being defined.
        #[arg(long)]
        vector: PathBuf,
        /// The candidate defining vector.
        #[arg(long)]
        psi: PathBuf,
        #[arg(long, default_value = "0")]
        epsilon: String,
    },
    /// Product measure of the k-fold alternating low/high region.
    DkMeasure {
        #[arg(long)]
        family: PathBuf,
        /// Restrict to these carrier points; all points when omitted.
        #[arg(long)]
        set: Option<String>,
        /// Threshold pair: r (high) then s (low).
        #[arg(long, num_args = 2, value_names = ["R", "S"], allow_hyphen_values = true)]
        thresholds: Vec<String>,
        #[arg(short, long)]
        k: usize,
    },
    /// Least k whose alternating region is smaller than the full box.
    NipCheck {
        #[arg(long)]
        family: PathBuf,
        #[arg(long)]
        set: Option<String>,
        #[arg(long, num_args = 2, value_names = ["R", "S"], allow_hyphen_values = true)]
        thresholds: Vec<String>,
        #[arg(long, default_value_t = 4)]
        kmax: usize,
    },
    /// Largest point tuple shattered by the family at the thresholds.
    IndDim {
        #[arg(long)]
        family: PathBuf,
        #[arg(long, num_args = 2, value_names = ["R", "S"], allow_hyphen_values = true)]
        thresholds: Vec<String>,
    },
    /// Weighted L1 distance between two named family functions.
    L1 {
        #[arg(long)]
        family: PathBuf,
        /// First function name.
        left: String,
        /// Second function name.
        right: String,
    },
    /// Check two named family functions agree off a null set.
    AlmostDefines {
        #[arg(long)]
        family: PathBuf,
        /// Candidate defining function name.
        psi: String,
        /// Defined function name.
        p: String,
    },
    /// Partition the family's functions by almost-everywhere equality.
    Quotient {
        #[arg(long)]
        family: PathBuf,
    },
    /// Check the topometric axioms of a space file.
    TopoValidate {
        #[arg(long)]
        space: PathBuf,
    },
    /// Epsilon-Cantor-Bendixson derivative sequence and rank.
    Cb {
        #[arg(long)]
        space: PathBuf,
        #[arg(long)]
        epsilon: String,
        /// Rank of this point set; the whole space when omitted.
        #[arg(long)]
        set: Option<String>,
    },
}

/// Parses the argument list and runs the named subcommand, returning the
/// full stdout text and the process exit code.
pub fn run_command<I, T>(argv: I) -> (String, i32)
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(argv) {
        Ok(cli) => cli,
        Err(e) if matches!(e.kind(), ErrorKind::DisplayHelp | ErrorKind::DisplayVersion) => {
            return (e.to_string(), 0);
        }
        Err(e) => {
            let report = fail(e).into_report();
            return (report.render(), report.exit_code());
        }
    };
    let report = match dispatch(cli.cmd) {
        Ok(report) => report,
        Err(e) => e.into_report(),
    };
    (report.render(), report.exit_code())
}

/// Puts the generated file body on the report, or writes it to `out`.
fn attach_body(
    report: &mut CommandReport,
    body: String,
    out: Option<&PathBuf>,
) -> Result<(), CmdError> {
    match out {
        Some(path) => {
            write_file(path, &body)?;
            report.push("written", tstr(&path.display().to_string()));
        }
        None => report.body = Some(body),
    }
    Ok(())
}

fn dispatch(cmd: Cmd) -> Result<CommandReport, CmdError> {
    let token = CancelToken::new();
    match cmd {
        Cmd::Eval {
            structure,
            formula,
            env,
        } => {
            let s = load_structure(&structure)?;
            let f = parse_formula(&formula, s.signature()).map_err(fail)?;
            let assign = resolve_assignment(&s, &parse_bindings(&env)?)?;
            let value = s.evaluate(&f, &assign).map_err(fail)?;
            let mut report = CommandReport::new(Status::Ok);
            report.push("value", qstr(&value));
            Ok(report)
        }
        Cmd::CheckTheory { structure, theory } => {
            let s = load_structure(&structure)?;
            let th = files::parse_theory(&read_file(&theory)?, s.signature()).map_err(fail)?;
            let outcome = s.satisfies_theory(&th).map_err(fail)?;
            let mut report = CommandReport::new(if outcome.pass {
                Status::Ok
            } else {
                Status::PropertyFails
            });
            report.push("pass", outcome.pass.to_string());
            report.push("statements", th.len().to_string());
            if let Some(failure) = outcome.failure {
                report.push("failed_label", tstr(&failure.label));
                report.push("failed_statement", tstr(&failure.statement));
                report.push("value", qstr(&failure.value));
                report.push("threshold", qstr(&failure.threshold));
                report.push("comparator", tstr(failure.comparator.symbol()));
            }
            Ok(report)
        }
        Cmd::Supnorm { structure, formula } => {
            let s = load_structure(&structure)?;
            let f = parse_formula(&formula, s.signature()).map_err(fail)?;
            let value = s.sup_norm(&f).map_err(fail)?;
            let mut report = CommandReport::new(Status::Ok);
            report.push("supnorm", qstr(&value));
            Ok(report)
        }
        Cmd::Minimalize {
            structure,
            fragment,
            params,
        } => {
            let s = load_structure(&structure)?;
            let frag = files::parse_fragment(&read_file(&fragment)?, s.signature()).map_err(fail)?;
            let assign = resolve_assignment(&s, &parse_bindings(&params)?)?;
            let partition = s.minimalize(&frag, &assign).map_err(fail)?;
            let mut report = CommandReport::new(Status::Ok);
            report.push("blocks", partition.blocks.len().to_string());
            for (i, block) in partition.blocks.iter().enumerate() {
                let labels: Vec<String> = block.iter().map(|&x| s.points()[x].clone()).collect();
                report.push(&format!("block{i}"), quoted_list(&labels));
            }
            Ok(report)
        }
        Cmd::TvCheck {
            sub,
            structure,
            embedding,
            fragment,
        } => {
            let m = load_structure(&sub)?;
            let n = load_structure(&structure)?;
            let labels = parse_label_list(&embedding);
            let embedding = resolve_points(&labels, |l| n.point_index(l))?;
            let frag = files::parse_fragment(&read_file(&fragment)?, m.signature()).map_err(fail)?;
            let outcome = tarski_vaught_check(&m, &n, &embedding, &frag, &token).map_err(fail)?;
            let mut report = CommandReport::new(if outcome.pass {
                Status::Ok
            } else {
                Status::PropertyFails
            });
            report.push("pass", outcome.pass.to_string());
            if let Some(failure) = outcome.failure {
                report.push("formula", tstr(&failure.formula));
                report.push("variable", tstr(&failure.var));
                let params: Vec<String> = failure
                    .params
                    .iter()
                    .map(|(var, point)| format!("{var}={point}"))
                    .collect();
                report.push("params", quoted_list(&params));
                report.push("sub_measure", qstr(&failure.m_measure));
                report.push("measure", qstr(&failure.n_measure));
            }
            Ok(report)
        }
        Cmd::InvariantMeasure { action } => {
            let action = load_action(&action)?;
            let mut report = CommandReport::new(Status::Ok);
            match invariant_measures(&action) {
                FeasibilityResult::Feasible { measure } => {
                    report.push("feasible", "true".to_string());
                    report.push("measure", quoted_q_list(&measure));
                }
                FeasibilityResult::Infeasible { farkas } => {
                    report.push("feasible", "false".to_string());
                    report.push("farkas_mass", qstr(&farkas.mass_weight));
                    for (s, weights) in farkas.row_weights.iter().enumerate() {
                        let element = &action.semigroup().elements()[s];
                        report.push(&format!("farkas_{element}"), quoted_q_list(weights));
                    }
                }
            }
            Ok(report)
        }
        Cmd::DualityWitness { action } => {
            let action = load_action(&action)?;
            match infeasibility_witness(&action) {
                Ok(witness) => {
                    let mut report = CommandReport::new(Status::Ok);
                    report.push("norm", qstr(&witness.norm));
                    report.push("functions", witness.functions.len().to_string());
                    for (i, (s, values)) in witness.functions.iter().enumerate() {
                        let element = &action.semigroup().elements()[*s];
                        report.push(&format!("element{i}"), tstr(element));
                        report.push(&format!("function{i}"), quoted_q_list(values));
                    }
                    Ok(report)
                }
                Err(InvarianceError::FeasibleAction) => {
                    let mut report = CommandReport::new(Status::PropertyFails);
                    report.push("feasible", "true".to_string());
                    report.push(
                        "error",
                        tstr("the action has an invariant measure; no witness exists"),
                    );
                    Ok(report)
                }
                Err(e) => Err(fail(e)),
            }
        }
        Cmd::Cesaro { action, start } => {
            let action = load_action(&action)?;
            let start = action
                .point_index(&start)
                .ok_or_else(|| fail(format!("unknown point `{start}`")))?;
            let maps: Vec<Vec<usize>> = (0..action.semigroup().len())
                .map(|s| (0..action.len()).map(|x| action.apply(s, x)).collect())
                .collect();
            let measure = cesaro_limit(action.len(), &maps, start, &token).map_err(fail)?;
            let mut report = CommandReport::new(Status::Ok);
            report.push("measure", quoted_q_list(&measure));
            Ok(report)
        }
        Cmd::FixedPoints { action } => {
            let action = load_action(&action)?;
            let fixed = action.fixed_points();
            let labels: Vec<String> = fixed.iter().map(|&x| action.points()[x].clone()).collect();
            let mut report = CommandReport::new(Status::Ok);
            report.push("count", fixed.len().to_string());
            report.push("fixed", quoted_list(&labels));
            Ok(report)
        }
        Cmd::MultiplicativeCheck { family, measure } => {
            let (_, _, functions) = files::parse_family_raw(&read_file(&family)?).map_err(fail)?;
            let mu = parse_q_list(&measure).map_err(fail)?;
            let vectors: Vec<Vec<Q>> = functions.into_iter().map(|(_, v)| v).collect();
            let multiplicative = is_multiplicative(&mu, &vectors).map_err(fail)?;
            let mut report = CommandReport::new(if multiplicative {
                Status::Ok
            } else {
                Status::PropertyFails
            });
            report.push("multiplicative", multiplicative.to_string());
            Ok(report)
        }
        Cmd::GenTheory {
            action,
            family,
            independence,
            out,
            measure,
            out_structure,
        } => {
            let action = load_action(&action)?;
            let (_, _, functions) = files::parse_family_raw(&read_file(&family)?).map_err(fail)?;
            let generated =
                build_invariance_theory(&action, &functions, independence).map_err(fail)?;
            let mut report = CommandReport::new(Status::Ok);
            report.push("statements", generated.theory.len().to_string());
            if let Some(out_structure) = out_structure {
                let measure = measure
                    .ok_or_else(|| fail("--out-structure requires --measure"))
                    .and_then(|m| parse_q_list(&m).map_err(fail))?;
                let s = family_structure(&action, &measure, &functions).map_err(fail)?;
                write_file(&out_structure, &render_structure(&s))?;
                report.push(
                    "structure_written",
                    tstr(&out_structure.display().to_string()),
                );
            }
            attach_body(&mut report, render_theory(&generated.theory), out.as_ref())?;
            Ok(report)
        }
        Cmd::ParadoxVerify {
            action,
            certificate,
        } => {
            let action = files::parse_partial_action(&read_file(&action)?).map_err(fail)?;
            let cert =
                files::parse_certificate(&read_file(&certificate)?, &action).map_err(fail)?;
            match paradox_verify(&action, &cert) {
                Ok(outcome) => {
                    let mut report = CommandReport::new(Status::Ok);
                    report.push("exact", outcome.exact.to_string());
                    report.push(
                        "undefined_applications",
                        outcome.undefined_applications.to_string(),
                    );
                    report.push(
                        "uncovered_a",
                        quoted_list(&set_labels(&outcome.uncovered_a, action.points())),
                    );
                    report.push(
                        "uncovered_b",
                        quoted_list(&set_labels(&outcome.uncovered_b, action.points())),
                    );
                    Ok(report)
                }
                Err(e) => {
                    let mut report = CommandReport::new(Status::PropertyFails);
                    report.push("error", tstr(&e.to_string()));
                    Ok(report)
                }
            }
        }
        Cmd::ParadoxSearch {
            action,
            target,
            max_pieces,
            max_word,
            heuristic,
            seed,
            limit,
            out,
        } => {
            let action = files::parse_partial_action(&read_file(&action)?).map_err(fail)?;
            let target: BTreeSet<usize> = match target {
                Some(text) => resolve_points(&parse_label_list(&text), |l| action.point_index(l))?
                    .into_iter()
                    .collect(),
                None => (0..action.len()).collect(),
            };
            let (found, complete) = if heuristic {
                paradox_search_heuristic(
                    &action, &target, max_pieces, max_word, seed, limit, &token,
                )
                .map_err(fail)?
            } else {
                let outcome =
                    paradox_search(&action, &target, max_pieces, max_word, SEARCH_LIMIT, &token);
                match outcome {
                    Ok(found) => (found, true),
                    Err(e @ InvarianceError::TargetTooLarge { .. }) => {
                        return Err(CmdError {
                            message: e.to_string(),
                            hint: Some(
                                "pass --heuristic to search with a node budget".to_string(),
                            ),
                        })
                    }
                    Err(e) => return Err(fail(e)),
                }
            };
            let mut report = CommandReport::new(Status::Ok);
            report.push("found", found.is_some().to_string());
            report.push("complete", complete.to_string());
            if let Some(cert) = found {
                attach_body(&mut report, render_certificate(&cert, &action), out.as_ref())?;
            }
            Ok(report)
        }
        Cmd::F2ball { radius, out } => {
            let ball = f2ball(radius);
            let mut report = CommandReport::new(Status::Ok);
            report.push("points", ball.len().to_string());
            attach_body(&mut report, render_partial_action(&ball), out.as_ref())?;
            Ok(report)
        }
        Cmd::PhiMatrix {
            structure,
            formula,
            row_var,
            col_var,
            out,
        } => {
            let s = load_structure(&structure)?;
            let f = parse_formula(&formula, s.signature()).map_err(fail)?;
            let m = phi_matrix(&s, &f, &row_var, &col_var).map_err(fail)?;
            let mut report = CommandReport::new(Status::Ok);
            report.push("rows", m.rows().to_string());
            report.push("cols", m.cols().to_string());
            report.push("bound", qstr(m.bound()));
            attach_body(&mut report, render_matrix(&m), out.as_ref())?;
            Ok(report)
        }
        Cmd::Ladder {
            matrix,
            thresholds,
            mode,
        } => {
            let m = load_matrix(&matrix)?;
            let (r, s) = parse_thresholds(&thresholds)?;
            let LadderIndex { index, witness } = match mode {
                LadderMode::Exact => ladder_index(&m, &r, &s, &token).map_err(fail)?,
                LadderMode::LowerBound => ladder_lower_bound(&m, &r, &s).map_err(fail)?,
            };
            let mut report = CommandReport::new(Status::Ok);
            report.push("index", index.to_string());
            report.push("exact", (mode == LadderMode::Exact).to_string());
            report.push("witness_rows", ilist(&witness.rows));
            report.push("witness_cols", ilist(&witness.cols));
            Ok(report)
        }
        Cmd::TypeMetric { left, right } => {
            let (left_cols, p) = load_vector(&left)?;
            let (right_cols, q) = load_vector(&right)?;
            if left_cols != right_cols {
                return Err(fail("column labels differ between the two vectors"));
            }
            let distance = type_metric(&p, &q).map_err(fail)?;
            let mut report = CommandReport::new(Status::Ok);
            report.push("distance", qstr(&distance));
            Ok(report)
        }
        Cmd::NearestRows {
            matrix,
            vector,
            epsilon,
        } => {
            let m = load_matrix(&matrix)?;
            let (cols, p) = load_vector(&vector)?;
            if cols != m.col_labels() {
                return Err(fail("vector columns do not match the matrix"));
            }
            let epsilon = parse_q(&epsilon).map_err(fail)?;
            let outcome = nearest_rows(&m, &p.coords, &epsilon).map_err(fail)?;
            let mut report = CommandReport::new(Status::Ok);
            report.push("min_distance", qstr(&outcome.min_distance));
            let labels: Vec<String> = outcome.within.iter().map(|(l, _)| l.clone()).collect();
            let distances: Vec<Q> = outcome.within.iter().map(|(_, d)| d.clone()).collect();
            report.push("within", quoted_list(&labels));
            report.push("distances", quoted_q_list(&distances));
            Ok(report)
        }
        Cmd::DefinableCheck {
            matrix,
            vector,
            psi,
            epsilon,
        } => {
            let m = load_matrix(&matrix)?;
            let (p_cols, p) = load_vector(&vector)?;
            let (psi_cols, psi) = load_vector(&psi)?;
            if p_cols != m.col_labels() || psi_cols != m.col_labels() {
                return Err(fail("vector columns do not match the matrix"));
            }
            let epsilon = parse_q(&epsilon).map_err(fail)?;
            // Sup-distance comparison of the candidate definition against
            // the target vector, reporting the worst column.
            let mut max_error = q0();
            let mut worst_col = m.col_labels()[0].clone();
            for (j, (a, b)) in p.coords.iter().zip(&psi.coords).enumerate() {
                let mut err = a - b;
                if err < q0() {
                    err = -err;
                }
                if err > max_error {
                    max_error = err;
                    worst_col = m.col_labels()[j].clone();
                }
            }
            let within = max_error <= epsilon;
            let mut report = CommandReport::new(if within {
                Status::Ok
            } else {
                Status::PropertyFails
            });
            report.push("within", within.to_string());
            report.push("max_error", qstr(&max_error));
            report.push("worst_col", tstr(&worst_col));
            Ok(report)
        }
        Cmd::DkMeasure {
            family,
            set,
            thresholds,
            k,
        } => {
            let fam = load_family(&family)?;
            let e = family_set(&fam, set.as_deref())?;
            let (r, s) = parse_thresholds(&thresholds)?;
            let value = dk_measure(&fam, &e, &s, &r, k, &token).map_err(fail)?;
            let mut report = CommandReport::new(Status::Ok);
            report.push("value", qstr(&value));
            Ok(report)
        }
        Cmd::NipCheck {
            family,
            set,
            thresholds,
            kmax,
        } => {
            let fam = load_family(&family)?;
            let e = family_set(&fam, set.as_deref())?;
            let (r, s) = parse_thresholds(&thresholds)?;
            let verdict = almost_dependence_check(&fam, &e, &s, &r, kmax, &token).map_err(fail)?;
            let mut report = CommandReport::new(Status::Ok);
            match verdict {
                DependenceVerdict::AlmostDependent { k, dk, bound } => {
                    report.push("verdict", tstr("almost-dependent"));
                    report.push("k", k.to_string());
                    report.push("dk", qstr(&dk));
                    report.push("bound", qstr(&bound));
                }
                DependenceVerdict::Exhausted { epsilon, checked } => {
                    report.push("verdict", tstr("exhausted"));
                    report.push("epsilon", qstr(&epsilon));
                    for (k, dk, bound) in checked {
                        report.push(
                            &format!("checked{k}"),
                            format!("[{}, {}]", qstr(&dk), qstr(&bound)),
                        );
                    }
                }
            }
            Ok(report)
        }
        Cmd::IndDim { family, thresholds } => {
            let fam = load_family(&family)?;
            let (r, s) = parse_thresholds(&thresholds)?;
            let (dimension, witness) = independence_dimension(&fam, &s, &r, &token).map_err(fail)?;
            let labels: Vec<String> = witness.iter().map(|&x| fam.points()[x].clone()).collect();
            let mut report = CommandReport::new(Status::Ok);
            report.push("dimension", dimension.to_string());
            report.push("witness", quoted_list(&labels));
            Ok(report)
        }
        Cmd::L1 {
            family,
            left,
            right,
        } => {
            let fam = load_family(&family)?;
            let a = family_function(&fam, &left)?;
            let b = family_function(&fam, &right)?;
            let distance = l1_distance(&a, &b, fam.weights()).map_err(fail)?;
            let same = distance == q0();
            let mut report = CommandReport::new(Status::Ok);
            report.push("distance", qstr(&distance));
            report.push("same_class", same.to_string());
            Ok(report)
        }
        Cmd::AlmostDefines { family, psi, p } => {
            let fam = load_family(&family)?;
            let psi_vec = TypeVector {
                label: psi.clone(),
                coords: family_function(&fam, &psi)?,
            };
            let p_vec = TypeVector {
                label: p.clone(),
                coords: family_function(&fam, &p)?,
            };
            let defines = almost_defines(&psi_vec, &p_vec, fam.weights()).map_err(fail)?;
            let mut report = CommandReport::new(if defines {
                Status::Ok
            } else {
                Status::PropertyFails
            });
            report.push("almost_defines", defines.to_string());
            Ok(report)
        }
        Cmd::Quotient { family } => {
            let fam = load_family(&family)?;
            let vectors: Vec<TypeVector> = fam
                .functions()
                .iter()
                .map(|f| TypeVector {
                    label: f.display_name(),
                    coords: f.values().to_vec(),
                })
                .collect();
            let classes = quotient_types(&vectors, fam.weights()).map_err(fail)?;
            let mut report = CommandReport::new(Status::Ok);
            report.push("classes", classes.len().to_string());
            for (i, class) in classes.iter().enumerate() {
                let names: Vec<String> =
                    class.iter().map(|&j| vectors[j].label.clone()).collect();
                report.push(&format!("class{i}"), quoted_list(&names));
            }
            Ok(report)
        }
        Cmd::TopoValidate { space } => {
            let space = load_space(&space)?;
            let outcome = validate_topometric(&space).map_err(fail)?;
            let mut report = CommandReport::new(if outcome.valid() {
                Status::Ok
            } else {
                Status::PropertyFails
            });
            report.push("valid", outcome.valid().to_string());
            report.push("violations", outcome.violations.len().to_string());
            for (i, violation) in outcome.violations.iter().enumerate() {
                report.push(&format!("violation{i}"), tstr(&violation.to_string()));
            }
            Ok(report)
        }
        Cmd::Cb {
            space,
            epsilon,
            set,
        } => {
            let space = load_space(&space)?;
            let epsilon = parse_q(&epsilon).map_err(fail)?;
            let u: BTreeSet<usize> = match set {
                Some(text) => {
                    resolve_points(&parse_label_list(&text), |l| space.point_index(l))?
                        .into_iter()
                        .collect()
                }
                None => (0..space.len()).collect(),
            };
            let sequence = cb_sequence(&space, &epsilon).map_err(fail)?;
            let rank = cb_rank(&space, &epsilon, &u).map_err(fail)?;
            let mut report = CommandReport::new(Status::Ok);
            report.push(
                "rank",
                match rank {
                    CbRank::Finite(alpha) => format!("\"{alpha}\""),
                    CbRank::Infinite => "\"inf\"".to_string(),
                },
            );
            report.push("steps", sequence.steps().to_string());
            for (alpha, level) in sequence.sets().iter().enumerate() {
                report.push(
                    &format!("level{alpha}"),
                    quoted_list(&set_labels(level, space.points())),
                );
            }
            Ok(report)
        }
    }
}

/// The carrier subset named by `--set`, or the whole carrier.
fn family_set(fam: &FunctionFamily, set: Option<&str>) -> Result<BTreeSet<usize>, CmdError> {
    match set {
        Some(text) => fam.point_set(&parse_label_list(text)).map_err(fail),
        None => Ok((0..fam.len()).collect()),
    }
}

/// A named function's values; merged names all resolve.
fn family_function(fam: &FunctionFamily, name: &str) -> Result<Vec<Q>, CmdError> {
    fam.function(name)
        .map(|f| f.values().to_vec())
        .ok_or_else(|| fail(format!("unknown function `{name}`")))
}
