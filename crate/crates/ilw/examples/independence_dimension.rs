//! Dependence diagnostics for a family of [0, 1]-valued functions: the
//! alternating-box measures d_k, the almost-dependent verdict, exact
//! independence dimension, and the bridge from shattering to ladders.

use ilw::cancel::CancelToken;
use ilw::nip::{
    almost_dependence_check, dk_measure, independence_dimension, shattering_ladder,
    DependenceVerdict, FunctionFamily,
};
use ilw::rational::{fmt_q, q, q0, q1};

fn main() {
    let token = CancelToken::new();

    // Two indicator functions on four uniform points, arranged so each
    // of the four low/high patterns appears exactly once: the family
    // shatters a 2-element set but nothing larger.
    let fam = FunctionFamily::new(
        (0..4).map(|i| format!("x{i}")).collect(),
        vec![q(1, 4); 4],
        vec![
            ("f".to_string(), vec![q0(), q0(), q1(), q1()]),
            ("g".to_string(), vec![q0(), q1(), q0(), q1()]),
        ],
    )
    .unwrap();
    let e: std::collections::BTreeSet<usize> = (0..4).collect();

    // d_k is the product measure of tuples (x_1, y_1, .., x_k, y_k)
    // where some single function is low on every x_i and high on every
    // y_i. d_1 here: f and g are each low on half the space and high on
    // the other half, and their boxes overlap, so d_1 < 2 * (1/2)^2.
    for k in 1..=3 {
        let dk = dk_measure(&fam, &e, &q(1, 4), &q(3, 4), k, &token).unwrap();
        let single_box = (0..2 * k).fold(q1(), |acc, _| acc * q(1, 2));
        println!(
            "d_{k} = {:<9} one function's box alone = {}",
            fmt_q(&dk),
            fmt_q(&single_box),
        );
    }

    // The verdict finds the least k where d_k drops below the full-box
    // benchmark, certifying the family cannot alternate forever.
    match almost_dependence_check(&fam, &e, &q(1, 4), &q(3, 4), 4, &token).unwrap() {
        DependenceVerdict::AlmostDependent { k, dk, bound } => {
            println!(
                "almost dependent at k = {k}: d_k = {} < bound {}",
                fmt_q(&dk),
                fmt_q(&bound),
            );
        }
        DependenceVerdict::Exhausted { .. } => {
            unreachable!("finite families with positive boxes always certify")
        }
    }

    // Independence dimension: the largest point tuple on which the
    // family realizes all 2^k low/high patterns. Two functions offer at
    // most two patterns on any pair, so {f, g} shatters only singletons.
    let (dim, witness) = independence_dimension(&fam, &q(1, 4), &q(3, 4), &token).unwrap();
    let labels: Vec<&str> = witness.iter().map(|&x| fam.points()[x].as_str()).collect();
    println!("\ntwo-function family: dimension = {dim}, witness = {labels:?}");
    assert_eq!(dim, 1);

    // Shattering a pair takes all four patterns. Transposing the roles,
    // the four pattern functions on two points do exactly that.
    let patterns = FunctionFamily::new(
        vec!["w0".to_string(), "w1".to_string()],
        vec![q(1, 2); 2],
        (0..4u32)
            .map(|sigma| {
                let values = (0..2)
                    .map(|i| if sigma >> i & 1 == 1 { q1() } else { q0() })
                    .collect();
                (format!("pat{sigma}"), values)
            })
            .collect(),
    )
    .unwrap();
    let (dim, witness) = independence_dimension(&patterns, &q(1, 4), &q(3, 4), &token).unwrap();
    println!("four-pattern family: dimension = {dim}");
    assert_eq!(dim, 2);

    // The half-graph family has dimension 1: h_i = indicator of
    // points below i, and the nested level sets can shatter one point
    // but never two.
    let n = 6;
    let half: Vec<(String, Vec<ilw::rational::Q>)> = (0..n)
        .map(|i| {
            let values = (0..n).map(|j| if j < i { q1() } else { q0() }).collect();
            (format!("h{i}"), values)
        })
        .collect();
    let nested = FunctionFamily::new(
        (0..n).map(|j| format!("x{j}")).collect(),
        vec![q(1, n as i64); n],
        half,
    )
    .unwrap();
    let (dim, _) = independence_dimension(&nested, &q(1, 4), &q(3, 4), &token).unwrap();
    println!("nested half-graph family: independence dimension = {dim}");
    assert_eq!(dim, 1);

    // Shattering transfers to ladders: a shattered k-tuple yields a
    // ladder of length k for the same thresholds, with one row per
    // function that is low on exactly a suffix of the tuple. So
    // independence bounds the ladder index from below.
    let (matrix, ladder) = shattering_ladder(&patterns, &witness, &q(1, 4), &q(3, 4)).unwrap();
    ladder.validate(&matrix).unwrap();
    println!(
        "\nladder built from the shattered pair: length {} (rows {:?})",
        ladder.rows.len(),
        ladder.rows,
    );
    assert_eq!(ladder.rows.len(), 2);
}
