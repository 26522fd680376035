//! Parse and evaluate integral-logic formulas on a finite probability
//! structure, then check a small theory against it.

use std::collections::BTreeMap;

use ilw::logic::{parse_formula, print_formula, Comparator, Signature, Statement, Theory};
use ilw::rational::{fmt_q, q, q1};
use ilw::structures::FiniteStructure;

fn main() {
    // A three-point space with a biased measure, one unary relation P
    // (an indicator), and one binary relation E bounded by 1.
    let sig = Signature::new(
        vec![
            ilw::logic::RelationDecl::new("P", 1, q1()),
            ilw::logic::RelationDecl::new("E", 2, q1()),
        ],
        vec!["c".to_string()],
    )
    .unwrap();
    let s = FiniteStructure::new(
        sig,
        vec!["p0".into(), "p1".into(), "p2".into()],
        vec![q(1, 2), q(1, 4), q(1, 4)],
        vec![
            ("P".to_string(), vec![q1(), q(0, 1), q1()]),
            (
                "E".to_string(),
                // Row-major: E(p_i, p_j) = 1 exactly when i < j.
                vec![
                    q(0, 1),
                    q1(),
                    q1(),
                    q(0, 1),
                    q(0, 1),
                    q1(),
                    q(0, 1),
                    q(0, 1),
                    q(0, 1),
                ],
            ),
        ],
        vec![("c".to_string(), "p1".to_string())],
    )
    .unwrap();

    // The only quantifier is integration against the measure.
    for text in [
        "int x. P(x)",
        "int x. int y. E(x, y)",
        "int x. E(c, x) - E(x, c)",
        "max(P(c), int x. P(x)*P(x))",
        "int x. abs(P(x) - E(x, c))",
    ] {
        let f = parse_formula(text, s.signature()).unwrap();
        let v = s.evaluate(&f, &BTreeMap::new()).unwrap();
        println!("{text:<35} = {}", fmt_q(&v));
        // Printing re-parses to the same tree.
        let printed = print_formula(&f);
        let reparsed = parse_formula(&printed, s.signature()).unwrap();
        assert_eq!(f, reparsed);
    }

    // Free variables range over points; the sup norm maximizes over all
    // assignments.
    let open = parse_formula("E(x, y) - P(x)", s.signature()).unwrap();
    let mut env = BTreeMap::new();
    env.insert("x".to_string(), 0);
    env.insert("y".to_string(), 2);
    println!(
        "\nE(x, y) - P(x) at x=p0, y=p2    = {}",
        fmt_q(&s.evaluate(&open, &env).unwrap())
    );
    println!(
        "sup |E(x, y) - P(x)|            = {}",
        fmt_q(&s.sup_norm(&open).unwrap())
    );

    // A theory is a list of threshold statements; the report pinpoints
    // the first failure.
    let mut theory = Theory::default();
    theory.push(
        Statement::new(
            parse_formula("int x. P(x)", s.signature()).unwrap(),
            Comparator::Ge,
            q(3, 4),
        )
        .unwrap(),
        "p-mass",
    );
    theory.push(
        Statement::new(
            parse_formula("P(c)", s.signature()).unwrap(),
            Comparator::Eq,
            q(0, 1),
        )
        .unwrap(),
        "center-off",
    );
    let report = s.satisfies_theory(&theory).unwrap();
    println!("\ntheory pass = {}", report.pass);
    if let Some(failure) = report.failure {
        println!(
            "first failure: {} gives {}, needs {} {}",
            failure.label,
            fmt_q(&failure.value),
            failure.comparator.symbol(),
            fmt_q(&failure.threshold),
        );
    }
}
