//! Stability diagnostics for a two-variable formula: tabulate it as a
//! matrix, compute the ladder index at thresholds, and use the row space
//! as a metric space of types.

use ilw::cancel::CancelToken;
use ilw::logic::{parse_formula, RelationDecl, Signature};
use ilw::rational::{fmt_q, q, q0, q1};
use ilw::stability::{
    half_graph, ladder_index, ladder_lower_bound, nearest_rows, phi_matrix, type_metric,
    TypeVector,
};
use ilw::structures::FiniteStructure;

fn main() {
    let token = CancelToken::new();

    // The half graph is the canonical unstable configuration: entries 1
    // strictly below the diagonal, 0 elsewhere, so rows a_1..a_n and
    // columns b_1..b_n form a full ladder at thresholds (1, 0).
    let m = half_graph(8).unwrap();
    let outcome = ladder_index(&m, &q1(), &q0(), &token).unwrap();
    println!("half graph 8: ladder index = {}", outcome.index);
    assert_eq!(outcome.index, 8);
    println!(
        "witness rows = {:?}, cols = {:?}",
        outcome.witness.rows, outcome.witness.cols
    );

    // The greedy lower bound is cheaper and can only undershoot.
    let greedy = ladder_lower_bound(&m, &q1(), &q0()).unwrap();
    assert!(greedy.index <= outcome.index);

    // A formula over a structured space. E(x, y) = 1 exactly when
    // i < j, so the formula matrix of E is itself a half graph and the
    // ladder index grows with the space: the formula has the order
    // property over this family of structures.
    let n = 6;
    let sig = Signature::new(vec![RelationDecl::new("E", 2, q1())], vec![]).unwrap();
    let points: Vec<String> = (0..n).map(|i| format!("p{i}")).collect();
    let weights = vec![q(1, n as i64); n];
    let mut values = Vec::new();
    for i in 0..n {
        for j in 0..n {
            values.push(if i < j { q1() } else { q0() });
        }
    }
    let s = FiniteStructure::new(
        sig,
        points,
        weights,
        vec![("E".to_string(), values)],
        vec![],
    )
    .unwrap();
    let f = parse_formula("E(x, y)", s.signature()).unwrap();
    let phi = phi_matrix(&s, &f, "x", "y").unwrap();
    let outcome = ladder_index(&phi, &q1(), &q0(), &token).unwrap();
    println!("\nE(x, y) on the {n}-point order: ladder index = {}", outcome.index);
    assert_eq!(outcome.index, n);

    // Relaxing the thresholds to a gap the entries never separate kills
    // the ladder; the index is monotone in (r, -s).
    let loose = ladder_index(&phi, &q(3, 2), &q0(), &token).unwrap();
    println!("at thresholds (3/2, 0): ladder index = {}", loose.index);
    assert!(loose.index <= 1);

    // Rows of the matrix are types; the sup metric on them measures how
    // distinguishable two parameters are by this formula.
    let rows: Vec<TypeVector> = (0..phi.rows())
        .map(|i| TypeVector {
            label: phi.row_labels()[i].clone(),
            coords: phi.row(i).to_vec(),
        })
        .collect();
    let d = type_metric(&rows[0], &rows[1]).unwrap();
    println!("\nd(tp(p0), tp(p1)) = {}", fmt_q(&d));

    // Nearest-row queries locate which parameters almost realize a type.
    let near = nearest_rows(&phi, phi.row(2), &q0()).unwrap();
    println!(
        "rows at distance 0 from tp(p2): {:?} (min distance {})",
        near.within.iter().map(|(l, _)| l.as_str()).collect::<Vec<_>>(),
        fmt_q(&near.min_distance),
    );
    assert!(near.within.iter().any(|(l, _)| l == "p2"));
}
