//! Build invariant measures constructively for commuting maps by Cesaro
//! averaging of a point mass, and connect fixed points to multiplicative
//! invariant means.

use ilw::cancel::CancelToken;
use ilw::invariance::{
    cesaro_limit, invariant_measures, is_multiplicative, FeasibilityResult, FiniteAction,
    FiniteSemigroup,
};
use ilw::rational::{fmt_q, q, q0, q1, Q};

fn fmt_vec(v: &[Q]) -> String {
    let items: Vec<String> = v.iter().map(fmt_q).collect();
    format!("[{}]", items.join(", "))
}

fn main() {
    let token = CancelToken::new();

    // One map on {0, 1, 2}: 0 -> 1 -> 2 -> 1. The orbit of a point mass
    // at 0 falls into the 2-cycle {1, 2}, and the running averages
    // converge to the uniform measure on that cycle. The limit is exact:
    // the transient prefix washes out at rate 1/n.
    let shift = vec![vec![1, 2, 1]];
    let limit = cesaro_limit(3, &shift, 0, &token).unwrap();
    println!("transient into a 2-cycle: {}", fmt_vec(&limit));
    assert_eq!(limit, vec![q0(), q(1, 2), q(1, 2)]);

    // Two commuting rotations of Z/6 (by 2 and by 3) generate the whole
    // group, so averaging spreads any start uniformly.
    let by2: Vec<usize> = (0..6).map(|x| (x + 2) % 6).collect();
    let by3: Vec<usize> = (0..6).map(|x| (x + 3) % 6).collect();
    let limit = cesaro_limit(6, &[by2, by3], 4, &token).unwrap();
    println!("two commuting rotations:  {}", fmt_vec(&limit));
    assert!(limit.iter().all(|w| *w == q(1, 6)));

    // Non-commuting maps are rejected; averaging in a fixed order would
    // silently depend on that order.
    let swap01 = vec![1, 0, 2];
    let swap12 = vec![0, 2, 1];
    assert!(cesaro_limit(3, &[swap01, swap12], 0, &token).is_err());
    println!("non-commuting maps are rejected");

    // Fixed points of a full action are exactly the Dirac masses that
    // are invariant, and a Dirac mass is a multiplicative mean on any
    // family of indicator functions.
    let monoid = FiniteSemigroup::new(
        vec!["e".into(), "f".into()],
        vec![vec![0, 1], vec![1, 1]],
    )
    .unwrap();
    let collapse = FiniteAction::new(
        monoid,
        vec!["x0".into(), "x1".into(), "x2".into()],
        // e is the identity; f folds everything onto x2.
        vec![vec![0, 1, 2], vec![2, 2, 2]],
    )
    .unwrap();
    let fixed = collapse.fixed_points();
    println!(
        "\nfixed points: {:?}",
        fixed
            .iter()
            .map(|&x| collapse.points()[x].as_str())
            .collect::<Vec<_>>()
    );
    assert_eq!(fixed, vec![2]);

    match invariant_measures(&collapse) {
        FeasibilityResult::Feasible { measure } => {
            println!("invariant measure:       {}", fmt_vec(&measure));
            assert_eq!(measure, vec![q0(), q0(), q1()]);
            // Dirac at x2, so integration is evaluation: multiplicative
            // on the full indicator family.
            let indicators: Vec<Vec<Q>> = (0..3)
                .map(|i| (0..3).map(|j| if i == j { q1() } else { q0() }).collect())
                .collect();
            let multiplicative = is_multiplicative(&measure, &indicators).unwrap();
            println!("multiplicative on indicators: {multiplicative}");
            assert!(multiplicative);
        }
        FeasibilityResult::Infeasible { .. } => unreachable!("x2 is fixed"),
    }

    // The uniform measure on two points is invariant for the identity
    // action but not multiplicative: integral(f*f) = 1/2 while
    // integral(f)^2 = 1/4 for an indicator of one point.
    let uniform = vec![q(1, 2), q(1, 2)];
    let indicator = vec![vec![q1(), q0()]];
    assert!(!is_multiplicative(&uniform, &indicator).unwrap());
    println!("uniform measure on two points is not multiplicative");
}
