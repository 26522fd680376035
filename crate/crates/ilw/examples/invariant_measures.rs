//! Decide invariant-measure existence for finite semigroup actions with
//! exact certificates on both sides of the dichotomy.

use ilw::invariance::{
    infeasibility_witness, invariant_measures, FeasibilityResult, FiniteAction, FiniteSemigroup,
};
use ilw::rational::fmt_q;

fn fmt_vec(v: &[ilw::rational::Q]) -> String {
    let items: Vec<String> = v.iter().map(fmt_q).collect();
    format!("[{}]", items.join(", "))
}

fn main() {
    // Z/3 acting on itself by rotation: the uniform measure is the unique
    // invariant one, and the solver returns it exactly.
    let z3 = FiniteSemigroup::new(
        vec!["e".into(), "s".into(), "t".into()],
        vec![vec![0, 1, 2], vec![1, 2, 0], vec![2, 0, 1]],
    )
    .unwrap();
    let rotation = FiniteAction::new(
        z3,
        vec!["x0".into(), "x1".into(), "x2".into()],
        vec![vec![0, 1, 2], vec![1, 2, 0], vec![2, 0, 1]],
    )
    .unwrap();
    match invariant_measures(&rotation) {
        FeasibilityResult::Feasible { measure } => {
            println!("rotation: feasible, measure = {}", fmt_vec(&measure));
        }
        FeasibilityResult::Infeasible { .. } => unreachable!("finite groups always average"),
    }

    // A two-element left-zero semigroup (st = s) acting by constant maps
    // to different points: any invariant measure would have to be two
    // distinct point masses at once, so none exists.
    let left_zero = FiniteSemigroup::new(
        vec!["a".into(), "b".into()],
        vec![vec![0, 0], vec![1, 1]],
    )
    .unwrap();
    let clash = FiniteAction::new(
        left_zero,
        vec!["x0".into(), "x1".into()],
        vec![vec![0, 0], vec![1, 1]],
    )
    .unwrap();
    match invariant_measures(&clash) {
        FeasibilityResult::Feasible { .. } => unreachable!("constant maps clash"),
        FeasibilityResult::Infeasible { farkas } => {
            // The certificate is a linear combination of the invariance
            // rows plus the mass row that is manifestly unsatisfiable.
            println!("\nconstant-map clash: infeasible");
            println!("farkas mass weight = {}", fmt_q(&farkas.mass_weight));
            for (s, rows) in farkas.row_weights.iter().enumerate() {
                println!(
                    "farkas rows for {} = {}",
                    clash.semigroup().elements()[s],
                    fmt_vec(rows)
                );
            }
        }
    }

    // The same certificate in norm form: functions f_i and elements s_i
    // with ||1 - sum(f_i . s_i - f_i)||_inf < 1, which no invariant mean
    // can tolerate.
    let witness = infeasibility_witness(&clash).unwrap();
    println!("\nduality witness norm = {}", fmt_q(&witness.norm));
    assert!(witness.norm < ilw::rational::q1());
    for (s, values) in &witness.functions {
        println!(
            "  element {} carries f = {}",
            clash.semigroup().elements()[*s],
            fmt_vec(values)
        );
    }

    // Asking for a witness on a feasible action is an error, not a
    // silent fabrication.
    assert!(infeasibility_witness(&rotation).is_err());
    println!("\nno witness exists for the rotation, as expected");
}
