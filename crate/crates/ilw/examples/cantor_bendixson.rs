//! Topometric spaces: validate the axioms linking topology to metric,
//! then peel spaces with the epsilon-Cantor-Bendixson derivative and
//! read off ranks.

use std::collections::BTreeSet;

use ilw::rational::{q, q1, Q};
use ilw::topometric::{
    cb_rank, cb_sequence, validate_topometric, CbRank, FiniteTopoSpace,
};

fn show_levels(space: &FiniteTopoSpace, epsilon: &Q) {
    let sequence = cb_sequence(space, epsilon).unwrap();
    for (alpha, level) in sequence.sets().iter().enumerate() {
        let labels: Vec<&str> = level.iter().map(|&x| space.points()[x].as_str()).collect();
        println!("  X_{alpha} = {labels:?}");
    }
}

fn main() {
    // A chain: minopen(p_i) = {p_0, ..., p_i}, all distances 1. Every
    // derivative at epsilon < 1 removes exactly the current maximum,
    // whose minimal neighborhood meets the remainder in a singleton.
    let chain = FiniteTopoSpace::chain(4).unwrap();
    let report = validate_topometric(&chain).unwrap();
    assert!(report.valid());
    println!("chain of 4, epsilon = 1/2:");
    show_levels(&chain, &q(1, 2));

    let whole: BTreeSet<usize> = (0..chain.len()).collect();
    let rank = cb_rank(&chain, &q(1, 2), &whole).unwrap();
    println!("rank of the whole chain = {rank}");
    assert_eq!(rank, CbRank::Finite(3));

    // The bottom point survives longest: it is in every neighborhood,
    // so it only disappears when the whole space does.
    let bottom: BTreeSet<usize> = [0].into_iter().collect();
    println!(
        "rank of the bottom point = {}",
        cb_rank(&chain, &q(1, 2), &bottom).unwrap()
    );

    // Discrete spaces with separated points die immediately: each
    // minimal neighborhood is a singleton of diameter 0 <= epsilon.
    let discrete = FiniteTopoSpace::discrete(
        vec!["a".into(), "b".into(), "c".into()],
        vec![
            vec![q(0, 1), q1(), q1()],
            vec![q1(), q(0, 1), q1()],
            vec![q1(), q1(), q(0, 1)],
        ],
    )
    .unwrap();
    let whole: BTreeSet<usize> = (0..3).collect();
    println!(
        "\ndiscrete 3-point space: rank = {}",
        cb_rank(&discrete, &q(1, 2), &whole).unwrap()
    );

    // An indiscrete space never shrinks when epsilon is below its
    // diameter: the only nonempty open set has diameter 1 > epsilon, so
    // the derivative is the identity and the rank is infinite.
    let indiscrete = FiniteTopoSpace::new(
        vec!["a".into(), "b".into()],
        vec![
            [0, 1].into_iter().collect(),
            [0, 1].into_iter().collect(),
        ],
        vec![vec![q(0, 1), q1()], vec![q1(), q(0, 1)]],
    )
    .unwrap();
    let whole: BTreeSet<usize> = (0..2).collect();
    let rank = cb_rank(&indiscrete, &q(1, 2), &whole).unwrap();
    println!("indiscrete pair at epsilon = 1/2: rank = {rank}");
    assert_eq!(rank, CbRank::Infinite);
    // Raising epsilon past the diameter makes the pair removable.
    let rank = cb_rank(&indiscrete, &q1(), &whole).unwrap();
    println!("indiscrete pair at epsilon = 1:   rank = {rank}");
    assert_eq!(rank, CbRank::Finite(0));

    // Shrinking epsilon can only slow the peeling: each level of the
    // sequence grows or stays the same as epsilon decreases.
    let fine = cb_sequence(&chain, &q(1, 4)).unwrap();
    let coarse = cb_sequence(&chain, &q1()).unwrap();
    for alpha in 0..=chain.len() {
        assert!(coarse.level(alpha).is_subset(fine.level(alpha)));
    }
    println!("\nepsilon monotonicity checked on the chain");

    // Validation catches broken axioms and names the witnesses.
    let broken = FiniteTopoSpace::new(
        vec!["a".into(), "b".into()],
        vec![
            [0].into_iter().collect(),
            [1].into_iter().collect(),
        ],
        // Refinement fails: d(a, b) = 0 but the points are topologically
        // separated.
        vec![vec![q(0, 1), q(0, 1)], vec![q(0, 1), q(0, 1)]],
    )
    .unwrap();
    let report = validate_topometric(&broken).unwrap();
    assert!(!report.valid());
    println!("\nbroken space violations:");
    for violation in &report.violations {
        println!("  {violation}");
    }
}
